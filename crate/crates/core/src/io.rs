//! CSV ingest of distributions and CSV export/import of allocations.

use std::io::{Read, Write};

use crate::allocate::{Allocation, Region};
use crate::beliefs::BeliefMeasure;
use crate::error::{Error, Result};
use crate::riskmetric::{total_order, DiscreteRv};

/// Largest denominator accepted for a row probability, and largest expanded grid.
pub const MAX_DENOMINATOR: u64 = 1_000_000;

/// A distribution on an equiprobable grid with optional named beliefs over its states.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub x: DiscreteRv,
    pub beliefs: Vec<(String, BeliefMeasure)>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

fn parse_f64(field: &str, row: usize, col: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| {
            Error::InvalidInput(format!(
                "row {row}, column {col}: not a finite number: {field:?}"
            ))
        })
}

/// Best rational approximation `p/q` with `q <= MAX_DENOMINATOR`, if it matches `v` to `1e-15`.
pub fn rational(v: f64) -> Option<(u64, u64)> {
    if !(0.0..=1.0).contains(&v) {
        return None;
    }
    // continued-fraction convergents
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut r = v;
    let mut best = None;
    for _ in 0..64 {
        let a = r.floor();
        if a > MAX_DENOMINATOR as f64 * 2.0 {
            break;
        }
        let a = a as u64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > MAX_DENOMINATOR {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        if (p1 as f64 / q1 as f64 - v).abs() <= 1e-15 {
            best = Some((p1, q1));
            break;
        }
        let frac = r - a as f64;
        if frac == 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    best
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Reads a distribution from CSV with a header row.
///
/// The `value` column is required. With a `probability` column each probability must be
/// rational with denominator at most `1e6`; rows are then expanded onto the smallest
/// equiprobable grid that carries them. Any other column is read as a named belief,
/// one probability per row, spread evenly across the row's grid states.
pub fn read_distribution_csv(reader: impl Read) -> Result<Distribution> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    let value_col = headers
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| Error::InvalidInput("missing 'value' column".into()))?;
    let prob_col = headers.iter().position(|h| h == "probability");
    let belief_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != value_col && Some(c) != prob_col)
        .collect();

    let mut values = Vec::new();
    let mut probs = Vec::new();
    let mut beliefs: Vec<Vec<f64>> = vec![Vec::new(); belief_cols.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        values.push(parse_f64(field(value_col), row + 1, "value")?);
        if let Some(c) = prob_col {
            probs.push(parse_f64(field(c), row + 1, "probability")?);
        }
        for (k, &c) in belief_cols.iter().enumerate() {
            beliefs[k].push(parse_f64(field(c), row + 1, &headers[c])?);
        }
    }
    if values.is_empty() {
        return Err(Error::InvalidInput("no rows".into()));
    }

    let counts: Vec<u64> = match prob_col {
        None => vec![1; values.len()],
        Some(_) => {
            let fracs = probs
                .iter()
                .map(|&p| {
                    rational(p).ok_or_else(|| {
                        Error::InvalidInput(format!(
                            "probability {p} is not rational with denominator <= {MAX_DENOMINATOR}"
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut n = 1u64;
            for &(_, q) in &fracs {
                n = n / gcd(n, q) * q;
                if n > MAX_DENOMINATOR {
                    return Err(Error::TooLarge(format!(
                        "probabilities need a grid of more than {MAX_DENOMINATOR} states"
                    )));
                }
            }
            let counts: Vec<u64> = fracs.iter().map(|&(p, q)| p * (n / q)).collect();
            if counts.iter().sum::<u64>() != n {
                return Err(Error::InvalidInput(format!(
                    "probabilities sum to {}",
                    probs.iter().sum::<f64>()
                )));
            }
            counts
        }
    };

    let mut x = Vec::new();
    let mut expanded: Vec<Vec<f64>> = vec![Vec::new(); belief_cols.len()];
    for (row, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            x.push(values[row]);
            for (k, b) in beliefs.iter().enumerate() {
                expanded[k].push(b[row] / c as f64);
            }
        }
    }
    let beliefs = belief_cols
        .iter()
        .zip(expanded)
        .map(|(&c, probs)| Ok((headers[c].clone(), BeliefMeasure::new(probs)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Distribution {
        x: DiscreteRv::new(x)?,
        beliefs,
    })
}

/// Writes `state,X,X_1..X_n,region`, rows sorted by `X` descending.
///
/// States without a tail region are labelled `middle`.
pub fn write_allocation_csv(
    writer: impl Write,
    a: &Allocation,
    regions: Option<&[Region]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["state".to_string(), "X".to_string()];
    header.extend((1..=a.n_agents()).map(|i| format!("X_{i}")));
    header.push("region".into());
    w.write_record(&header).map_err(csv_err)?;
    let xv = a.total().values();
    let mut order: Vec<usize> = (0..xv.len()).collect();
    order.sort_by(|&s, &t| total_order(xv, t, s));
    for s in order {
        let mut rec = vec![s.to_string(), xv[s].to_string()];
        rec.extend(a.parts().iter().map(|p| p[s].to_string()));
        rec.push(regions.map_or(Region::Middle, |r| r[s]).to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidInput(format!("write: {e}")))?;
    Ok(())
}

/// Reads an allocation written by [`write_allocation_csv`].
pub fn read_allocation_csv(reader: impl Read) -> Result<Allocation> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidInput(format!("missing '{name}' column")))
    };
    let (state_col, x_col) = (col("state")?, col("X")?);
    let part_cols: Vec<usize> = (1..)
        .map_while(|i| headers.iter().position(|h| *h == format!("X_{i}")))
        .collect();
    if part_cols.is_empty() {
        return Err(Error::InvalidInput("no X_i columns".into()));
    }
    let mut rows = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let state: usize = rec
            .get(state_col)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::InvalidInput(format!("row {}: bad state index", row + 1)))?;
        let x = parse_f64(rec.get(x_col).unwrap_or(""), row + 1, "X")?;
        let parts = part_cols
            .iter()
            .map(|&c| parse_f64(rec.get(c).unwrap_or(""), row + 1, &headers[c]))
            .collect::<Result<Vec<_>>>()?;
        rows.push((state, x, parts));
    }
    let n = rows.len();
    let mut total = vec![f64::NAN; n];
    let mut parts = vec![vec![f64::NAN; n]; part_cols.len()];
    for (state, x, p) in rows {
        if state >= n || !total[state].is_nan() {
            return Err(Error::InvalidInput(format!(
                "state index {state} repeated or out of range"
            )));
        }
        total[state] = x;
        for (i, v) in p.into_iter().enumerate() {
            parts[i][state] = v;
        }
    }
    Allocation::new(DiscreteRv::new(total)?, parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals() {
        assert_eq!(rational(0.25), Some((1, 4)));
        assert_eq!(rational(1.0 / 3.0), Some((1, 3)));
        assert_eq!(rational(0.0), Some((0, 1)));
        assert_eq!(rational(1.0), Some((1, 1)));
        assert_eq!(rational(0.123457), Some((123457, 1_000_000)));
        assert_eq!(rational(std::f64::consts::PI / 4.0), None);
    }

    #[test]
    fn plain_values() {
        let d = read_distribution_csv("value\n3\n-1.5\n2\n".as_bytes()).unwrap();
        assert_eq!(d.x.values(), &[3.0, -1.5, 2.0]);
        assert!(d.beliefs.is_empty());
    }

    #[test]
    fn probabilities_expand() {
        let text = "value,probability,alice\n1,0.5,0.2\n2,0.25,0.4\n3,0.25,0.4\n";
        let d = read_distribution_csv(text.as_bytes()).unwrap();
        assert_eq!(d.x.values(), &[1.0, 1.0, 2.0, 3.0]);
        assert_eq!(d.beliefs[0].0, "alice");
        assert_eq!(d.beliefs[0].1.probs(), &[0.1, 0.1, 0.4, 0.4]);
        assert!(read_distribution_csv("value,probability\n1,0.5\n2,0.4\n".as_bytes()).is_err());
    }

    #[test]
    fn allocation_round_trip() {
        let x = DiscreteRv::new(vec![0.1, 3.0, -2.0 / 3.0]).unwrap();
        let p1 = vec![1.0 / 7.0, 2.5, -1.0];
        let p2: Vec<f64> = x.values().iter().zip(&p1).map(|(a, b)| a - b).collect();
        let a = Allocation::new(x, vec![p1, p2]).unwrap();
        let mut buf = Vec::new();
        let regions = [Region::Middle, Region::A(0), Region::B(1)];
        write_allocation_csv(&mut buf, &a, Some(&regions)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("state,X,X_1,X_2,region\n1,3,"));
        assert!(text.contains(",A1\n"));
        assert_eq!(read_allocation_csv(buf.as_slice()).unwrap(), a);
    }
}

use super::{Allocation, TailAssignment};
use crate::error::{Error, Result};
use crate::riskmetric::{iqd, quantile_sorted, DiscreteRv, QuantileSide};
use crate::tol::{close, scale_of, EXACT};

/// Free parameters of the tail allocation; `None` picks the sum-optimal default.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IqdOptions {
    /// Centre `c`, within the median interval. Default `Q^-_{1/2}(X)`.
    pub c: Option<f64>,
    /// Constants `c_i` summing to `c`. Default `c / n`.
    pub cs: Option<Vec<f64>>,
    /// Nonnegative middle weights `a_i` summing to 1. Default: equal split among minimal `lambda_i`.
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IqdOutcome {
    pub allocation: Allocation,
    pub tails: TailAssignment,
    /// `sum lambda_i IQD_{alpha_i}(X_i)`.
    pub value: f64,
    pub c: f64,
}

fn integral(v: f64) -> Option<usize> {
    let r = v.round();
    ((v - r).abs() <= 1e-9 && r >= 0.0).then_some(r as usize)
}

/// Right and left `beta`-tail events of `x` split among agents in proportion to `alphas`,
/// with `beta = min(sum alphas, 1/2)`.
///
/// States are ordered by `(value, index)`; agent 0 holds the most extreme states of each tail.
pub fn tail_assignment(x: &DiscreteRv, alphas: &[f64]) -> Result<TailAssignment> {
    if let Some(&a) = alphas.iter().find(|a| !(**a >= 0.0 && **a < 0.5)) {
        return Err(Error::ParamOutOfRange {
            name: "alpha",
            value: a,
            expected: "[0, 1/2)",
        });
    }
    let n = x.len();
    let alpha: f64 = alphas.iter().sum();
    if alpha == 0.0 {
        return Ok(TailAssignment::empty(alphas.len()));
    }
    let beta = alpha.min(0.5);
    let sizes_at = |nn: usize| -> Option<(usize, Vec<usize>)> {
        let total = integral(beta * nn as f64)?;
        let sizes = alphas
            .iter()
            .map(|a| integral(a * beta / alpha * nn as f64))
            .collect::<Option<Vec<usize>>>()?;
        (sizes.iter().sum::<usize>() == total).then_some((total, sizes))
    };
    let (total, sizes) = sizes_at(n).ok_or_else(|| Error::GridIncompatible {
        n,
        suggested: (2..=10_000).map(|k| k * n).find(|&m| sizes_at(m).is_some()),
        detail: format!("tail sizes alpha_i * beta / alpha * N for alphas {alphas:?}"),
    })?;
    let order = x.ascending_order();
    let b: Vec<usize> = order[..total].to_vec();
    let a: Vec<usize> = order[n - total..].iter().rev().copied().collect();
    let mut parts_a = Vec::with_capacity(sizes.len());
    let mut parts_b = Vec::with_capacity(sizes.len());
    let mut at = 0;
    for &k in &sizes {
        parts_a.push(a[at..at + k].to_vec());
        parts_b.push(b[at..at + k].to_vec());
        at += k;
    }
    Ok(TailAssignment {
        a,
        b,
        parts_a,
        parts_b,
        beta,
    })
}

pub(crate) fn median_interval(x: &DiscreteRv) -> (f64, f64) {
    let asc = x.sorted_ascending();
    (
        quantile_sorted(&asc, 0.5, QuantileSide::Left),
        quantile_sorted(&asc, 0.5, QuantileSide::Right),
    )
}

pub(crate) fn check_median(x: &DiscreteRv, c: f64) -> Result<()> {
    let (lo, hi) = median_interval(x);
    let tol = EXACT * scale_of(&[lo, hi, c]);
    if c < lo - tol || c > hi + tol {
        return Err(Error::MedianOutOfRange { c, lo, hi });
    }
    Ok(())
}

pub(crate) fn resolve_constants(c: f64, n: usize, cs: Option<&Vec<f64>>) -> Result<Vec<f64>> {
    match cs {
        None => Ok(vec![c / n as f64; n]),
        Some(v) if v.len() != n => Err(Error::InvalidInput(format!(
            "{} constants for {n} agents",
            v.len()
        ))),
        Some(v) => {
            let sum: f64 = v.iter().sum();
            if !close(sum, c, EXACT * n as f64) {
                return Err(Error::InvalidInput(format!(
                    "constants sum to {sum}, expected c = {c}"
                )));
            }
            Ok(v.clone())
        }
    }
}

/// Equal weights on the agents with minimal `lambda_i`.
pub(crate) fn minimal_weight_split(lambdas: &[f64]) -> Vec<f64> {
    let min = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let members: Vec<bool> = lambdas.iter().map(|&l| close(l, min, EXACT)).collect();
    let k = members.iter().filter(|m| **m).count() as f64;
    members
        .iter()
        .map(|&m| if m { 1.0 / k } else { 0.0 })
        .collect()
}

/// Sum-optimal allocation among IQD agents: each agent takes its share of both tails
/// of `X - c`, and the middle of `X - c` is split by the weights `a_i`.
pub fn iqd_allocation(
    x: &DiscreteRv,
    alphas: &[f64],
    lambdas: &[f64],
    opts: &IqdOptions,
) -> Result<IqdOutcome> {
    let n = alphas.len();
    if n == 0 || lambdas.len() != n {
        return Err(Error::InvalidInput(format!(
            "{n} levels and {} weights",
            lambdas.len()
        )));
    }
    if let Some(&l) = lambdas.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::ParamOutOfRange {
            name: "lambda",
            value: l,
            expected: "[0, inf)",
        });
    }
    let tails = tail_assignment(x, alphas)?;
    let c = match opts.c {
        Some(c) => {
            check_median(x, c)?;
            c
        }
        None => median_interval(x).0,
    };
    let cs = resolve_constants(c, n, opts.cs.as_ref())?;
    let weights = match &opts.weights {
        None => minimal_weight_split(lambdas),
        Some(w) => {
            if w.len() != n || w.iter().any(|v| !(*v >= 0.0)) || !close(w.iter().sum(), 1.0, EXACT)
            {
                return Err(Error::InvalidInput(format!(
                    "middle weights {w:?} must be {n} nonnegative numbers summing to 1"
                )));
            }
            w.clone()
        }
    };

    let xv = x.values();
    let regions = tails.regions(x.len());
    let mut parts = vec![vec![0.0; x.len()]; n];
    for (s, region) in regions.iter().enumerate() {
        let d = xv[s] - c;
        for i in 0..n {
            let tail = match region {
                super::Region::A(j) | super::Region::B(j) => *j == i,
                super::Region::Middle => false,
            };
            parts[i][s] = match region {
                super::Region::Middle => weights[i] * d,
                _ if tail => d,
                _ => 0.0,
            } + cs[i];
        }
    }
    let mut value = 0.0;
    for i in 0..n {
        value += lambdas[i] * iqd(&DiscreteRv::new(parts[i].clone())?, alphas[i])?;
    }
    Ok(IqdOutcome {
        allocation: Allocation::new(x.clone(), parts)?,
        tails,
        value,
        c,
    })
}

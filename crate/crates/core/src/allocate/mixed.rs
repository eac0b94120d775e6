use super::iqd::{check_median, median_interval, resolve_constants, tail_assignment};
use super::{
    comonotonic_allocation, slice_allocation, AgentSpec, Allocation, Region, Role, TailAssignment,
    TieRule,
};
use crate::distortion::{envelope_min, DistortionFunction};
use crate::error::{Error, Result};
use crate::infconv::infconv_mixed;
use crate::riskmetric::{choquet, DiscreteRv};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MixedOptions {
    /// Centre `c`; must lie in the median interval. By default the median is used when it
    /// attains the representative value, and otherwise the crossing level of the
    /// shifted envelopes.
    pub c: Option<f64>,
    /// Constants `c_i` summing to `c`. Default `c / n`.
    pub cs: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedOutcome {
    pub allocation: Allocation,
    pub tails: TailAssignment,
    /// Achieved `sum lambda_i rho_i(X_i)`.
    pub value: f64,
    /// `rho_G(X)` for the representative distortion.
    pub representative_value: f64,
    pub c: f64,
}

/// Agents split into IQD levels (0 for concave agents) after role checks.
fn iqd_levels(agents: &[AgentSpec]) -> Result<Vec<f64>> {
    agents
        .iter()
        .map(|a| match a.role() {
            Role::Iqd(alpha) => Ok(alpha),
            Role::Concave => Ok(0.0),
            Role::General if a.distortion.is_concave() => {
                Err(Error::NotLocationInvariant(a.distortion.value_at_one()))
            }
            Role::General => Err(Error::NotConcave(format!(
                "agent {} is neither IQD nor concave",
                a.name.as_deref().unwrap_or("?")
            ))),
        })
        .collect()
}

/// Chooses the centre so that the middle slices reproduce the representative distortion:
/// gaps above `c` must sit where `h*(S - beta) <= h*(S + beta)`, gaps below where the
/// reverse holds. The median is preferred when it qualifies.
fn default_centre(
    x: &DiscreteRv,
    middle: &[usize],
    beta: f64,
    envelope: Option<&DistortionFunction>,
    cap: f64,
) -> Result<f64> {
    let median = median_interval(x).0;
    if middle.is_empty() {
        return Ok(median);
    }
    let hstar = |t: f64| -> f64 {
        if !(-1e-12..=1.0 + 1e-12).contains(&t) {
            0.0
        } else {
            envelope.map_or(cap, |h| h.at(t).min(cap))
        }
    };
    let xv = x.values();
    let n = xv.len() as f64;
    let mut v: Vec<f64> = middle.iter().map(|&s| xv[s]).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let mut asc = xv.to_vec();
    asc.sort_by(f64::total_cmp);
    let f: Vec<f64> = v[..v.len() - 1]
        .iter()
        .map(|&w| {
            let above = asc.len() - asc.partition_point(|&y| y <= w);
            let s = above as f64 / n;
            hstar(s + beta) - hstar(s - beta)
        })
        .collect();
    let tol = 1e-12 * cap.min(1e12).max(1.0);
    // valid(j): gaps below v[j] have f <= 0, gaps above have f >= 0
    let m = v.len();
    let mut prefix_ok = vec![true; m + 1];
    for k in 0..m - 1 {
        prefix_ok[k + 1] = prefix_ok[k] && f[k] <= tol;
    }
    let mut suffix_ok = vec![true; m + 1];
    for k in (0..m - 1).rev() {
        suffix_ok[k] = suffix_ok[k + 1] && f[k] >= -tol;
    }
    let valid = |j: usize| prefix_ok[j] && suffix_ok[j];
    if let Some(j) = v.iter().position(|&w| w == median) {
        if valid(j) {
            return Ok(median);
        }
    }
    (0..m).find(|&j| valid(j)).map(|j| v[j]).ok_or_else(|| {
        Error::UnsupportedRegime("no crossing level for the middle allocation".into())
    })
}

/// Sum-optimal allocation among IQD agents and concave location-invariant agents.
///
/// The IQD agents take their shares of both tails of `X - c`; the middle of `X - c` is
/// shared comonotonically, with IQD agents acting as `lambda_i 1{0 < t < 1}`.
pub fn mixed_allocation(
    x: &DiscreteRv,
    agents: &[AgentSpec],
    tie: TieRule,
    opts: &MixedOptions,
) -> Result<MixedOutcome> {
    if agents.is_empty() {
        return Err(Error::InvalidInput("no agents".into()));
    }
    if agents.iter().any(|a| a.belief.is_some()) {
        return Err(Error::InvalidInput(
            "beliefs are only supported for comonotonic allocations".into(),
        ));
    }
    let alphas = iqd_levels(agents)?;
    let representative = infconv_mixed(agents)?.representative;
    let representative_value = choquet(&representative, x);
    let n = agents.len();
    let has_iqd = agents.iter().any(|a| matches!(a.role(), Role::Iqd(_)));
    if !has_iqd {
        let (allocation, value) = comonotonic_allocation(x, agents, tie)?;
        return Ok(MixedOutcome {
            allocation,
            tails: TailAssignment::empty(n),
            value,
            representative_value,
            c: 0.0,
        });
    }

    let tails = tail_assignment(x, &alphas)?;
    let regions = tails.regions(x.len());
    let middle: Vec<usize> = (0..x.len())
        .filter(|&s| regions[s] == Region::Middle)
        .collect();
    let c = match opts.c {
        Some(c) => {
            check_median(x, c)?;
            c
        }
        None => {
            let concave: Vec<DistortionFunction> = agents
                .iter()
                .filter(|a| a.role() == Role::Concave)
                .map(|a| a.weighted_distortion())
                .collect();
            let envelope = if concave.is_empty() {
                None
            } else {
                Some(envelope_min(&concave)?)
            };
            let cap = agents
                .iter()
                .filter(|a| matches!(a.role(), Role::Iqd(_)))
                .map(|a| a.weight)
                .fold(f64::INFINITY, f64::min);
            default_centre(x, &middle, tails.beta, envelope.as_ref(), cap)?
        }
    };
    let cs = resolve_constants(c, n, opts.cs.as_ref())?;

    let xv = x.values();
    let z: Vec<f64> = (0..x.len())
        .map(|s| {
            if regions[s] == Region::Middle {
                xv[s] - c
            } else {
                0.0
            }
        })
        .collect();
    let inner: Vec<DistortionFunction> = agents
        .iter()
        .map(|a| match a.role() {
            Role::Iqd(_) => DistortionFunction::plateau(a.weight),
            _ => a.weighted_distortion(),
        })
        .collect();
    let y = slice_allocation(&z, None, &inner, tie);
    let parts: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..x.len())
                .map(|s| {
                    let tail = match regions[s] {
                        Region::A(j) | Region::B(j) if j == i => xv[s] - c,
                        _ => 0.0,
                    };
                    tail + y[i][s] + cs[i]
                })
                .collect()
        })
        .collect();
    let allocation = Allocation::new(x.clone(), parts)?;
    let (_, value) = super::welfare(&allocation, agents)?;
    Ok(MixedOutcome {
        allocation,
        tails,
        value,
        representative_value,
        c,
    })
}

use super::{distinct_groups, AgentSpec, Allocation, TieRule};
use crate::distortion::{argmin_of, DistortionFunction};
use crate::error::{Error, Result};
use crate::riskmetric::{choquet, DiscreteRv};
use crate::tol::{close, EXACT};

fn shares(levels: &[f64], tie: TieRule) -> Vec<f64> {
    let members = argmin_of(levels);
    let mut w = vec![0.0; levels.len()];
    match tie {
        TieRule::EqualSplit => {
            let k = members.len() as f64;
            members.iter().for_each(|&i| w[i] = 1.0 / k);
        }
        TieRule::MinIndex => w[members[0]] = 1.0,
        TieRule::MaxIndex => w[*members.last().unwrap()] = 1.0,
    }
    w
}

/// Marginal-slice allocation of `values` among agents with weighted distortions.
///
/// Each gap between consecutive distinct values is handed to the agents minimizing
/// `lambda_i h_i` at the survival level of the gap. Survival levels are `count / N`
/// for equiprobable states, or suffix sums of `probs`. Parts are normalized so that
/// `f_i(0) = 0`.
pub(crate) fn slice_allocation(
    values: &[f64],
    probs: Option<&[f64]>,
    weighted: &[DistortionFunction],
    tie: TieRule,
) -> Vec<Vec<f64>> {
    let n_agents = weighted.len();
    let (v, group, order) = distinct_groups(values);
    let m = v.len();
    let nf = values.len() as f64;

    // survival[k] = P(X > v[k])
    let mut mass = vec![0.0; m];
    for &s in order.iter().rev() {
        mass[group[s]] += probs.map_or(1.0, |p| p[s]);
    }
    let mut survival = vec![0.0; m];
    let mut acc = 0.0;
    for k in (0..m).rev() {
        survival[k] = if probs.is_some() { acc } else { acc / nf };
        acc += mass[k];
    }

    let share_at = |t: f64| -> Vec<f64> {
        let levels: Vec<f64> = weighted.iter().map(|h| h.at(t)).collect();
        shares(&levels, tie)
    };
    let below = share_at(1.0);
    let above = share_at(0.0);
    let gap_shares: Vec<Vec<f64>> = survival[..m - 1].iter().map(|&s| share_at(s)).collect();

    // cumulative integral from v[0]
    let mut f = vec![vec![0.0; m]; n_agents];
    for k in 1..m {
        let d = v[k] - v[k - 1];
        for i in 0..n_agents {
            f[i][k] = f[i][k - 1] + gap_shares[k - 1][i] * d;
        }
    }
    // value of the cumulative integral at 0
    let k0 = v.partition_point(|&x| x <= 0.0);
    let at_zero: Vec<f64> = (0..n_agents)
        .map(|i| {
            if k0 == 0 {
                -v[0] * below[i]
            } else if k0 == m {
                f[i][m - 1] - v[m - 1] * above[i]
            } else {
                f[i][k0 - 1] - v[k0 - 1] * gap_shares[k0 - 1][i]
            }
        })
        .collect();
    (0..n_agents)
        .map(|i| group.iter().map(|&g| f[i][g] - at_zero[i]).collect())
        .collect()
}

/// Sum-optimal comonotonic allocation and its weighted welfare.
///
/// Requires all `lambda_i h_i(1)` to coincide. Agents' beliefs must be absent; see
/// [`crate::beliefs::comonotonic_allocation_with_beliefs`] otherwise.
pub fn comonotonic_allocation(
    x: &DiscreteRv,
    agents: &[AgentSpec],
    tie: TieRule,
) -> Result<(Allocation, f64)> {
    if agents.is_empty() {
        return Err(Error::InvalidInput("no agents".into()));
    }
    if agents.iter().any(|a| a.belief.is_some()) {
        return Err(Error::InvalidInput(
            "agents carry beliefs; use the belief-aware allocation".into(),
        ));
    }
    let weighted: Vec<DistortionFunction> =
        agents.iter().map(|a| a.weighted_distortion()).collect();
    check_equal_at_one(&weighted)?;
    let parts = slice_allocation(x.values(), None, &weighted, tie);
    let value = parts
        .iter()
        .zip(&weighted)
        .map(|(p, h)| choquet(h, &DiscreteRv::new(p.clone()).expect("finite parts")))
        .sum();
    Ok((Allocation::new(x.clone(), parts)?, value))
}

pub(crate) fn check_equal_at_one(weighted: &[DistortionFunction]) -> Result<()> {
    let values: Vec<f64> = weighted.iter().map(|h| h.value_at_one()).collect();
    if values.windows(2).any(|w| !close(w[0], w[1], EXACT)) {
        return Err(Error::UnboundedProblem { values });
    }
    Ok(())
}

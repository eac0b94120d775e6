//! Heterogeneous beliefs: distortions transformed to a common reference measure.

use serde::{Deserialize, Serialize};

use crate::allocate::comonotonic::{check_equal_at_one, slice_allocation};
use crate::allocate::{AgentSpec, Allocation, TieRule};
use crate::distortion::{envelope_min, DistortionFunction, Quadratic};
use crate::error::{Error, Result};
use crate::riskmetric::{choquet_weighted, total_order, DiscreteRv};
use crate::tol::{FLOAT, SNAP};

/// Probability vector over the states of the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BeliefMeasure {
    probs: Vec<f64>,
}

impl BeliefMeasure {
    /// Nonnegative weights summing to one within `1e-9`; rescaled to sum to one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidInput("empty belief".into()));
        }
        if let Some(&p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::ParamOutOfRange {
                name: "probability",
                value: p,
                expected: "[0, 1]",
            });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > FLOAT {
            return Err(Error::InvalidInput(format!("probabilities sum to {sum}")));
        }
        Ok(BeliefMeasure {
            probs: probs.into_iter().map(|p| p / sum).collect(),
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

impl TryFrom<Vec<f64>> for BeliefMeasure {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BeliefMeasure> for Vec<f64> {
    fn from(b: BeliefMeasure) -> Self {
        b.probs
    }
}

/// Equal-weight average of the beliefs; every belief is absolutely continuous with respect to it.
pub fn common_measure(beliefs: &[BeliefMeasure]) -> Result<BeliefMeasure> {
    let n = beliefs
        .first()
        .ok_or_else(|| Error::InvalidInput("no beliefs".into()))?
        .len();
    if beliefs.iter().any(|b| b.len() != n) {
        return Err(Error::InvalidInput("beliefs over different grids".into()));
    }
    let k = beliefs.len() as f64;
    BeliefMeasure::new(
        (0..n)
            .map(|s| beliefs.iter().map(|b| b.probs[s]).sum::<f64>() / k)
            .collect(),
    )
}

/// The distortion `g` with `rho^{P0}_h(f(X)) = rho^P_g(f(X))` for every increasing `f`.
///
/// With `y_1 < ... < y_m` the values of `X` on `P`-charged states,
/// `g = h(P0(X > y_j))` on `[P(X > y_j), P(X > y_{j-1}))` and `g(1) = h(1)`.
/// Requires `P0 << P` and distinct values of `X` on the charged states.
pub fn transform_distortion(
    h: &DistortionFunction,
    p0: &BeliefMeasure,
    p: &BeliefMeasure,
    x: &DiscreteRv,
) -> Result<DistortionFunction> {
    let n = x.len();
    if p0.len() != n || p.len() != n {
        return Err(Error::InvalidInput(format!(
            "beliefs of length {} and {} for {n} states",
            p0.len(),
            p.len()
        )));
    }
    if let Some(s) = (0..n).find(|&s| p0.probs[s] > 0.0 && p.probs[s] == 0.0) {
        return Err(Error::AbsContViolated(s));
    }
    let xv = x.values();
    let mut charged: Vec<usize> = (0..n).filter(|&s| p.probs[s] > 0.0).collect();
    charged.sort_by(|&a, &b| total_order(xv, a, b));
    if charged.windows(2).any(|w| xv[w[0]] == xv[w[1]]) {
        return Err(Error::DensityViolated);
    }
    let m = charged.len();
    // survival[j] = P(X > y_j), level[j] = h(P0(X > y_j)), summed from the top
    let mut survival = vec![0.0; m];
    let mut level = vec![0.0; m];
    let (mut acc, mut acc0) = (0.0, 0.0);
    for j in (0..m).rev() {
        survival[j] = acc;
        level[j] = h.at(acc0);
        acc += p.probs[charged[j]];
        acc0 += p0.probs[charged[j]];
    }

    let mut bps = vec![0.0];
    let mut segs = Vec::with_capacity(m);
    let mut pvs = vec![0.0];
    let mut current = level[m - 1];
    for j in (0..m - 1).rev() {
        let s = survival[j];
        if s > bps[bps.len() - 1] + SNAP && s < 1.0 - SNAP {
            segs.push(Quadratic::constant(current));
            bps.push(s);
            pvs.push(level[j]);
        }
        current = level[j];
    }
    segs.push(Quadratic::constant(current));
    bps.push(1.0);
    pvs.push(h.value_at_one());
    DistortionFunction::from_parts(bps, segs, pvs)
}

/// Choquet integral of `x` under the belief `p`.
pub fn choquet_under(h: &DistortionFunction, x: &DiscreteRv, p: &BeliefMeasure) -> Result<f64> {
    choquet_weighted(h, x.values(), p.probs())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeliefOutcome {
    pub allocation: Allocation,
    /// `sum lambda_i rho^{P_i}_{h_i}(X_i)` under each agent's own belief.
    pub value: f64,
    /// Reference measure: the average of the agents' beliefs.
    pub common: BeliefMeasure,
    /// Transformed distortions `g_i`, unweighted.
    pub transformed: Vec<DistortionFunction>,
    /// `rho^P` of `X` under the envelope of `lambda_i g_i`.
    pub representative_value: f64,
}

/// Sum-optimal comonotonic allocation when agents hold different beliefs.
///
/// Agents without a belief use the uniform measure. Each distortion is moved to the
/// common measure and the marginal slices are assigned as in the single-belief case.
pub fn comonotonic_allocation_with_beliefs(
    x: &DiscreteRv,
    agents: &[AgentSpec],
    tie: TieRule,
) -> Result<BeliefOutcome> {
    if agents.is_empty() {
        return Err(Error::InvalidInput("no agents".into()));
    }
    let n = x.len();
    let beliefs = agents
        .iter()
        .map(|a| match &a.belief {
            Some(b) => Ok(b.clone()),
            None => BeliefMeasure::uniform(n),
        })
        .collect::<Result<Vec<_>>>()?;
    let common = common_measure(&beliefs)?;
    let transformed = agents
        .iter()
        .zip(&beliefs)
        .map(|(a, b)| transform_distortion(&a.distortion, b, &common, x))
        .collect::<Result<Vec<_>>>()?;
    let weighted: Vec<DistortionFunction> = transformed
        .iter()
        .zip(agents)
        .map(|(g, a)| g.scale(a.weight))
        .collect();
    check_equal_at_one(&weighted)?;
    let parts = slice_allocation(x.values(), Some(common.probs()), &weighted, tie);
    let allocation = Allocation::new(x.clone(), parts)?;
    let value = agents
        .iter()
        .zip(&beliefs)
        .zip(allocation.parts())
        .map(|((a, b), part)| Ok(a.weight * choquet_weighted(&a.distortion, part, b.probs())?))
        .sum::<Result<f64>>()?;
    let representative_value = choquet_under(&envelope_min(&weighted)?, x, &common)?;
    Ok(BeliefOutcome {
        allocation,
        value,
        common,
        transformed,
        representative_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(v: &[f64]) -> DiscreteRv {
        DiscreteRv::new(v.to_vec()).unwrap()
    }

    fn belief(v: &[f64]) -> BeliefMeasure {
        BeliefMeasure::new(v.to_vec()).unwrap()
    }

    #[test]
    fn identical_beliefs_leave_h_unchanged_on_values() {
        let x = rv(&[0.3, -1.0, 2.0, 5.0]);
        let p = BeliefMeasure::uniform(4).unwrap();
        let g = transform_distortion(&DistortionFunction::gd(), &p, &p, &x).unwrap();
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            assert!((g.at(t) - DistortionFunction::gd().at(t)).abs() < 1e-15);
        }
    }

    #[test]
    fn evaluation_identity_on_increasing_maps() {
        let x = rv(&[0.3, -1.0, 2.0, 5.0, 1.1]);
        let p0 = belief(&[0.1, 0.3, 0.2, 0.15, 0.25]);
        let p1 = belief(&[0.4, 0.1, 0.1, 0.2, 0.2]);
        let p = common_measure(&[p0.clone(), p1]).unwrap();
        for h in [
            DistortionFunction::gd(),
            DistortionFunction::iqd(0.2).unwrap(),
        ] {
            let g = transform_distortion(&h, &p0, &p, &x).unwrap();
            for f in [|v: f64| v, |v: f64| v.max(0.5), |v: f64| (v * 0.7).exp()] {
                let y = x.map(f).unwrap();
                let lhs = choquet_under(&h, &y, &p0).unwrap();
                let rhs = choquet_under(&g, &y, &p).unwrap();
                assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn abs_cont_and_density_errors() {
        let x = rv(&[1.0, 2.0, 3.0]);
        let p0 = belief(&[0.5, 0.5, 0.0]);
        let p = belief(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            transform_distortion(&DistortionFunction::gd(), &p0, &p, &x),
            Err(Error::AbsContViolated(1))
        ));
        let tied = rv(&[1.0, 1.0, 3.0]);
        let u = BeliefMeasure::uniform(3).unwrap();
        assert!(matches!(
            transform_distortion(&DistortionFunction::gd(), &u, &u, &tied),
            Err(Error::DensityViolated)
        ));
    }

    #[test]
    fn allocation_value_matches_representative() {
        let x = rv(&[0.3, -1.0, 2.0, 5.0, 1.1, 4.0]);
        let agents = [
            AgentSpec::new(DistortionFunction::gd(), 1.0)
                .with_belief(belief(&[0.1, 0.3, 0.2, 0.15, 0.15, 0.1])),
            AgentSpec::new(DistortionFunction::mmd(), 0.8),
        ];
        let out = comonotonic_allocation_with_beliefs(&x, &agents, TieRule::EqualSplit).unwrap();
        assert!((out.value - out.representative_value).abs() < 1e-12);
        assert!(crate::allocate::is_comonotonic(&out.allocation));
    }

    #[test]
    fn belief_validation() {
        assert!(BeliefMeasure::new(vec![0.5, 0.6]).is_err());
        assert!(BeliefMeasure::new(vec![-0.1, 1.1]).is_err());
        let b: BeliefMeasure = serde_json::from_str("[0.25, 0.75]").unwrap();
        assert_eq!(b.probs(), &[0.25, 0.75]);
    }
}

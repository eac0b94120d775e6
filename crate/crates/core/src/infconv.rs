//! Closed-form inf-convolutions and their representative distortions.

use serde::Serialize;

use crate::allocate::{AgentSpec, Role};
use crate::distortion::{envelope_min, g_transform, weighted, DistortionFunction};
use crate::error::{Error, Result};
use crate::riskmetric::{choquet, DiscreteRv};
use crate::tol::{close, EXACT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// Infimum over comonotonic allocations.
    ComonotonicEnvelope,
    /// Unconstrained infimum among IQD agents.
    IqdUnconstrained,
    /// Unconstrained infimum among IQD agents and concave location-invariant agents.
    MixedUnconstrained,
}

/// The inf-convolution as a single distortion riskmetric.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InfconvResult {
    pub representative: DistortionFunction,
    pub regime: Regime,
}

impl InfconvResult {
    pub fn value_at(&self, x: &DiscreteRv) -> f64 {
        choquet(&self.representative, x)
    }
}

/// Comonotonic inf-convolution of `lambda_i rho_{h_i}`: the lower envelope of `lambda_i h_i`.
pub fn infconv_comonotonic(hs: &[DistortionFunction], lambdas: &[f64]) -> Result<InfconvResult> {
    let w = weighted(hs, lambdas)?;
    let at_one: Vec<f64> = w.iter().map(|h| h.value_at_one()).collect();
    if at_one.windows(2).any(|p| !close(p[0], p[1], EXACT)) {
        return Err(Error::UnboundedProblem { values: at_one });
    }
    Ok(InfconvResult {
        representative: envelope_min(&w)?,
        regime: Regime::ComonotonicEnvelope,
    })
}

fn check_levels(alphas: &[f64], lambdas: &[f64]) -> Result<()> {
    if alphas.is_empty() || alphas.len() != lambdas.len() {
        return Err(Error::InvalidInput(format!(
            "{} levels and {} weights",
            alphas.len(),
            lambdas.len()
        )));
    }
    if let Some(&a) = alphas.iter().find(|a| !(**a >= 0.0 && **a < 0.5)) {
        return Err(Error::ParamOutOfRange {
            name: "alpha",
            value: a,
            expected: "[0, 1/2)",
        });
    }
    if let Some(&l) = lambdas.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::ParamOutOfRange {
            name: "lambda",
            value: l,
            expected: "[0, inf)",
        });
    }
    Ok(())
}

/// `min lambda_i * IQD(alpha)` with `alpha = sum alpha_i`; zero once `alpha >= 1/2`.
fn scaled_iqd(lambda: f64, alpha: f64) -> Result<DistortionFunction> {
    if alpha >= 0.5 {
        Ok(DistortionFunction::zero())
    } else {
        Ok(DistortionFunction::iqd(alpha)?.scale(lambda))
    }
}

/// Unconstrained inf-convolution of `lambda_i IQD_{alpha_i}`.
pub fn infconv_iqd(alphas: &[f64], lambdas: &[f64]) -> Result<InfconvResult> {
    check_levels(alphas, lambdas)?;
    let lambda = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(InfconvResult {
        representative: scaled_iqd(lambda, alphas.iter().sum())?,
        regime: Regime::IqdUnconstrained,
    })
}

/// Unconstrained inf-convolution of IQD agents and concave agents with `h(1) = 0`.
pub fn infconv_mixed(agents: &[AgentSpec]) -> Result<InfconvResult> {
    let mut concave = Vec::new();
    let mut alphas = Vec::new();
    let mut caps = Vec::new();
    for a in agents {
        match a.role() {
            Role::Iqd(alpha) => {
                alphas.push(alpha);
                caps.push(a.weight);
            }
            Role::Concave => concave.push(a.weighted_distortion()),
            Role::General if a.distortion.is_concave() => {
                return Err(Error::NotLocationInvariant(a.distortion.value_at_one()))
            }
            Role::General => {
                return Err(Error::NotConcave(format!(
                    "agent {} is neither IQD nor concave",
                    a.name.as_deref().unwrap_or("?")
                )))
            }
        }
    }
    if alphas.is_empty() {
        let hs: Vec<DistortionFunction> = agents.iter().map(|a| a.distortion.clone()).collect();
        let lambdas: Vec<f64> = agents.iter().map(|a| a.weight).collect();
        return infconv_comonotonic(&hs, &lambdas);
    }
    check_levels(&alphas, &caps)?;
    if concave.is_empty() {
        return infconv_iqd(&alphas, &caps);
    }
    let cap = caps.iter().copied().fold(f64::INFINITY, f64::min);
    let h = envelope_min(&concave)?;
    Ok(InfconvResult {
        representative: g_transform(&h, alphas.iter().sum(), Some(cap))?,
        regime: Regime::MixedUnconstrained,
    })
}

/// Comonotonic minus unconstrained optimum for IQD agents:
/// `rho_{(min lambda) IQD(max alpha)}(X) - rho_{(min lambda) IQD(sum alpha)}(X)`.
pub fn welfare_gap(x: &DiscreteRv, alphas: &[f64], lambdas: &[f64]) -> Result<f64> {
    check_levels(alphas, lambdas)?;
    let hs = alphas
        .iter()
        .map(|&a| DistortionFunction::iqd(a))
        .collect::<Result<Vec<_>>>()?;
    let comonotonic = infconv_comonotonic(&hs, lambdas)?;
    let unconstrained = infconv_iqd(alphas, lambdas)?;
    Ok(comonotonic.value_at(x) - unconstrained.value_at(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agents_iqd(alphas: &[f64], lambdas: &[f64]) -> Vec<AgentSpec> {
        alphas
            .iter()
            .zip(lambdas)
            .map(|(&a, &l)| AgentSpec::iqd(a, l).unwrap())
            .collect()
    }

    #[test]
    fn identical_gd_agents() {
        let gd = DistortionFunction::gd();
        let r = infconv_comonotonic(&[gd.clone(), gd.clone()], &[1.0, 1.0]).unwrap();
        assert_eq!(r.representative, gd);
        assert_eq!(r.regime, Regime::ComonotonicEnvelope);
    }

    #[test]
    fn comonotonic_iqd_family() {
        let hs: Vec<_> = [0.1, 0.3, 0.2]
            .iter()
            .map(|&a| DistortionFunction::iqd(a).unwrap())
            .collect();
        let r = infconv_comonotonic(&hs, &[2.0, 0.7, 1.5]).unwrap();
        let expected = DistortionFunction::iqd(0.3).unwrap().scale(0.7);
        assert!(
            r.representative.approx_eq(&expected, 1e-15),
            "{:?}",
            r.representative
        );
    }

    #[test]
    fn iqd_examples() {
        let r = infconv_iqd(&[0.2], &[3.0]).unwrap();
        assert_eq!(
            r.representative,
            DistortionFunction::iqd(0.2).unwrap().scale(3.0)
        );
        let r = infconv_iqd(&[0.125, 0.125], &[1.0, 1.0]).unwrap();
        assert_eq!(r.representative, DistortionFunction::iqd(0.25).unwrap());
        let r = infconv_iqd(&[0.3, 0.3], &[1.0, 1.0]).unwrap();
        assert_eq!(r.representative, DistortionFunction::zero());
        assert!(infconv_iqd(&[0.5], &[1.0]).is_err());
    }

    #[test]
    fn mixed_reductions() {
        let agents = [
            AgentSpec::new(DistortionFunction::gd(), 0.6),
            AgentSpec::new(DistortionFunction::mmd(), 0.4),
        ];
        let r = infconv_mixed(&agents).unwrap();
        let c = infconv_comonotonic(
            &[DistortionFunction::gd(), DistortionFunction::mmd()],
            &[0.6, 0.4],
        )
        .unwrap();
        assert_eq!(r, c);
        let iq = agents_iqd(&[0.1, 0.15], &[1.0, 2.0]);
        assert_eq!(
            infconv_mixed(&iq).unwrap(),
            infconv_iqd(&[0.1, 0.15], &[1.0, 2.0]).unwrap()
        );
    }

    #[test]
    fn one_iqd_one_concave() {
        let agents = [
            AgentSpec::iqd(0.1, 0.2).unwrap(),
            AgentSpec::new(DistortionFunction::gd(), 1.0),
        ];
        let r = infconv_mixed(&agents).unwrap();
        assert_eq!(r.regime, Regime::MixedUnconstrained);
        let expected = g_transform(&DistortionFunction::gd(), 0.1, Some(0.2)).unwrap();
        assert_eq!(r.representative, expected);
    }

    #[test]
    fn associativity() {
        // (IQD_a1 with IQD_a2) then GD equals the three-agent mixed result
        let iq = infconv_iqd(&[0.05, 0.1], &[0.3, 0.5]).unwrap();
        let stepwise = g_transform(&DistortionFunction::gd().scale(0.9), 0.15, Some(0.3)).unwrap();
        let mut agents = agents_iqd(&[0.05, 0.1], &[0.3, 0.5]);
        agents.push(AgentSpec::new(DistortionFunction::gd(), 0.9));
        let all = infconv_mixed(&agents).unwrap();
        assert!(iq
            .representative
            .approx_eq(&DistortionFunction::iqd(0.15).unwrap().scale(0.3), 1e-15));
        assert!(all.representative.approx_eq(&stepwise, 1e-15));
    }

    #[test]
    fn gap_examples() {
        let x = DiscreteRv::new((1..=8).rev().map(f64::from).collect()).unwrap();
        assert_eq!(welfare_gap(&x, &[0.125, 0.125], &[1.0, 1.0]).unwrap(), 2.0);
        let c = DiscreteRv::constant(3.0, 8).unwrap();
        assert_eq!(welfare_gap(&c, &[0.125, 0.125], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(welfare_gap(&x, &[0.2], &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_non_concave() {
        let agents = [
            AgentSpec::new(DistortionFunction::iqd(0.1).unwrap(), 1.0),
            AgentSpec::iqd(0.1, 1.0).unwrap(),
        ];
        assert!(matches!(infconv_mixed(&agents), Err(Error::NotConcave(_))));
    }
}

//! Allocations of a total risk among agents and the constructors for optimal ones.

pub(crate) mod comonotonic;
mod improve;
mod iqd;
mod mixed;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use comonotonic::comonotonic_allocation;
pub(crate) use comonotonic::slice_allocation;
pub use improve::comonotonic_improvement;
pub use iqd::{iqd_allocation, tail_assignment, IqdOptions, IqdOutcome};
pub use mixed::{mixed_allocation, MixedOptions, MixedOutcome};

use crate::beliefs::BeliefMeasure;
use crate::distortion::{DistortionFunction, NamedKind};
use crate::error::{Error, Result};
use crate::riskmetric::{choquet, choquet_weighted, total_order, DiscreteRv};
use crate::tol::{close, scale_of, EXACT};

/// One agent: a distortion, a Pareto weight and an optional subjective belief.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub distortion: DistortionFunction,
    pub weight: f64,
    /// Set when the distortion is `IQD(alpha)`; such agents take tail risk in unconstrained problems.
    #[serde(default)]
    pub iqd_alpha: Option<f64>,
    #[serde(default)]
    pub belief: Option<BeliefMeasure>,
}

/// How an agent participates in the unconstrained problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Role {
    Iqd(f64),
    Concave,
    General,
}

impl AgentSpec {
    pub fn new(distortion: DistortionFunction, weight: f64) -> Self {
        AgentSpec {
            name: None,
            distortion,
            weight,
            iqd_alpha: None,
            belief: None,
        }
    }

    pub fn named(kind: &NamedKind, weight: f64) -> Result<Self> {
        let mut a = Self::new(kind.build()?, weight);
        a.iqd_alpha = kind.iqd_alpha();
        Ok(a)
    }

    pub fn iqd(alpha: f64, weight: f64) -> Result<Self> {
        Self::named(&NamedKind::Iqd(alpha), weight)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_belief(mut self, belief: BeliefMeasure) -> Self {
        self.belief = Some(belief);
        self
    }

    pub fn role(&self) -> Role {
        if let Some(a) = self.iqd_alpha {
            Role::Iqd(a)
        } else if self.distortion.is_concave() && close(self.distortion.value_at_one(), 0.0, EXACT)
        {
            Role::Concave
        } else {
            Role::General
        }
    }

    /// `lambda_i h_i`.
    pub fn weighted_distortion(&self) -> DistortionFunction {
        self.distortion.scale(self.weight)
    }

    /// Unweighted riskmetric of `part`, under the agent's belief when one is set.
    pub fn evaluate(&self, part: &[f64]) -> Result<f64> {
        match &self.belief {
            Some(b) => choquet_weighted(&self.distortion, part, b.probs()),
            None => Ok(choquet(&self.distortion, &DiscreteRv::new(part.to_vec())?)),
        }
    }
}

/// Rule for splitting a marginal slice among tied minimizers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieRule {
    #[default]
    EqualSplit,
    MinIndex,
    MaxIndex,
}

impl FromStr for TieRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "equal" | "equalsplit" => Ok(TieRule::EqualSplit),
            "min" | "minindex" => Ok(TieRule::MinIndex),
            "max" | "maxindex" => Ok(TieRule::MaxIndex),
            _ => Err(Error::InvalidInput(format!("unknown tie rule {s:?}"))),
        }
    }
}

impl fmt::Display for TieRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TieRule::EqualSplit => "equal",
            TieRule::MinIndex => "min",
            TieRule::MaxIndex => "max",
        })
    }
}

/// `n` parts over the states of `total`, summing to it statewise.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Allocation {
    total: DiscreteRv,
    parts: Vec<Vec<f64>>,
}

impl Allocation {
    pub fn new(total: DiscreteRv, parts: Vec<Vec<f64>>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidInput(
                "allocation needs at least one agent".into(),
            ));
        }
        let n = total.len();
        if let Some(p) = parts.iter().find(|p| p.len() != n) {
            return Err(Error::InvalidInput(format!(
                "part has {} states, total has {n}",
                p.len()
            )));
        }
        for s in 0..n {
            let x = total.values()[s];
            let sum: f64 = parts.iter().map(|p| p[s]).sum();
            let scale = parts
                .iter()
                .fold(x.abs().max(1.0), |m, p| m.max(p[s].abs()));
            if !((sum - x).abs() <= EXACT * scale * parts.len() as f64) {
                return Err(Error::InvalidInput(format!(
                    "parts sum to {sum} in state {s}, total is {x}"
                )));
            }
        }
        Ok(Allocation { total, parts })
    }

    /// Everything to one agent.
    pub fn single(total: DiscreteRv) -> Self {
        let parts = vec![total.values().to_vec()];
        Allocation { total, parts }
    }

    pub fn total(&self) -> &DiscreteRv {
        &self.total
    }

    pub fn parts(&self) -> &[Vec<f64>] {
        &self.parts
    }

    pub fn n_agents(&self) -> usize {
        self.parts.len()
    }

    pub fn n_states(&self) -> usize {
        self.total.len()
    }

    pub fn part(&self, i: usize) -> DiscreteRv {
        DiscreteRv::new(self.parts[i].clone()).expect("parts are finite")
    }

    /// The allocation restricted to a subset of states.
    pub fn restrict(&self, states: &[usize]) -> Result<Allocation> {
        let total = DiscreteRv::new(states.iter().map(|&s| self.total.values()[s]).collect())?;
        let parts = self
            .parts
            .iter()
            .map(|p| states.iter().map(|&s| p[s]).collect())
            .collect();
        Ok(Allocation { total, parts })
    }

    pub fn into_parts(self) -> Vec<Vec<f64>> {
        self.parts
    }
}

/// `A`, `B` tail events and their per-agent partitions.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TailAssignment {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub parts_a: Vec<Vec<usize>>,
    pub parts_b: Vec<Vec<usize>>,
    pub beta: f64,
}

/// Which tail event a state belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// Right tail, held by the given agent.
    A(usize),
    /// Left tail, held by the given agent.
    B(usize),
    Middle,
}

impl fmt::Display for Region {
    /// Agent indices are printed one-based: `A1`, `B2`, `middle`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::A(i) => write!(f, "A{}", i + 1),
            Region::B(i) => write!(f, "B{}", i + 1),
            Region::Middle => f.write_str("middle"),
        }
    }
}

impl TailAssignment {
    pub fn empty(n_agents: usize) -> Self {
        TailAssignment {
            parts_a: vec![Vec::new(); n_agents],
            parts_b: vec![Vec::new(); n_agents],
            ..Default::default()
        }
    }

    pub fn regions(&self, n_states: usize) -> Vec<Region> {
        let mut r = vec![Region::Middle; n_states];
        for (i, (pa, pb)) in self.parts_a.iter().zip(&self.parts_b).enumerate() {
            pa.iter().for_each(|&s| r[s] = Region::A(i));
            pb.iter().for_each(|&s| r[s] = Region::B(i));
        }
        r
    }

    pub fn middle(&self, n_states: usize) -> Vec<usize> {
        self.regions(n_states)
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == Region::Middle)
            .map(|(s, _)| s)
            .collect()
    }
}

/// Comonotonicity: every part is a nondecreasing function of the total.
pub fn is_comonotonic(a: &Allocation) -> bool {
    let scale = a
        .parts
        .iter()
        .fold(scale_of(a.total.values()), |m, p| m.max(scale_of(p)));
    is_comonotonic_tol(a, EXACT * scale)
}

/// [`is_comonotonic`] with an absolute tolerance on part differences.
pub fn is_comonotonic_tol(a: &Allocation, tol: f64) -> bool {
    let x = a.total.values();
    let order = a.total.ascending_order();
    a.parts.iter().all(|p| {
        order.windows(2).all(|w| {
            let (s, t) = (w[0], w[1]);
            if x[s] == x[t] {
                (p[t] - p[s]).abs() <= tol
            } else {
                p[t] - p[s] >= -tol
            }
        })
    })
}

/// Per-agent riskmetrics and the weighted welfare `sum lambda_i rho_i(X_i)`.
pub fn welfare(a: &Allocation, agents: &[AgentSpec]) -> Result<(Vec<f64>, f64)> {
    if agents.len() != a.n_agents() {
        return Err(Error::InvalidInput(format!(
            "{} agents for an allocation with {} parts",
            agents.len(),
            a.n_agents()
        )));
    }
    let values = agents
        .iter()
        .zip(&a.parts)
        .map(|(ag, p)| ag.evaluate(p))
        .collect::<Result<Vec<f64>>>()?;
    let total = values.iter().zip(agents).map(|(v, ag)| ag.weight * v).sum();
    Ok((values, total))
}

/// Sign and level consistency of `h_i(1)` across agents.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub values_at_one: Vec<f64>,
    pub weighted_values_at_one: Vec<f64>,
    /// Some `h_i(1)` are zero, positive and negative at once: no Pareto optimum exists.
    pub mixed_sign: bool,
    /// Weighted `lambda_i h_i(1)` differ: the comonotonic inf-convolution is `-inf`.
    pub unequal: bool,
    /// Some `h_i(1) != 0`; normalizing to `h / |h(1)|` is advised.
    pub suggest_normalization: bool,
    pub messages: Vec<String>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        !self.mixed_sign && !self.unequal
    }
}

pub fn validate_scenario(agents: &[AgentSpec]) -> ScenarioReport {
    let values: Vec<f64> = agents.iter().map(|a| a.distortion.value_at_one()).collect();
    let weighted: Vec<f64> = agents
        .iter()
        .zip(&values)
        .map(|(a, v)| a.weight * v)
        .collect();
    let sign = |v: f64| {
        if close(v, 0.0, EXACT) {
            0
        } else if v > 0.0 {
            1
        } else {
            -1
        }
    };
    let mixed_sign = values.windows(2).any(|w| sign(w[0]) != sign(w[1]));
    let unequal = weighted.windows(2).any(|w| !close(w[0], w[1], EXACT));
    let suggest_normalization = values.iter().any(|&v| sign(v) != 0);
    let mut messages = Vec::new();
    if mixed_sign {
        messages.push(format!(
            "values h_i(1) = {values:?} mix zero, positive and negative signs; no Pareto-optimal allocation exists"
        ));
    }
    if unequal {
        messages.push(format!(
            "weighted values lambda_i h_i(1) = {weighted:?} differ; the comonotonic inf-convolution is -infinity"
        ));
    }
    if suggest_normalization {
        messages.push("normalize each distortion to h / |h(1)| before optimizing".into());
    }
    ScenarioReport {
        values_at_one: values,
        weighted_values_at_one: weighted,
        mixed_sign,
        unequal,
        suggest_normalization,
        messages,
    }
}

/// States grouped by distinct value: ascending distinct values and the group of each state.
pub(crate) fn distinct_groups(values: &[f64]) -> (Vec<f64>, Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| total_order(values, a, b));
    let mut distinct = Vec::new();
    let mut group = vec![0; values.len()];
    for &s in &order {
        if distinct.last() != Some(&values[s]) {
            distinct.push(values[s]);
        }
        group[s] = distinct.len() - 1;
    }
    (distinct, group, order)
}

//! Scenario documents: a distribution, the agents and solver options.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use riskshare_core::io::read_distribution_csv;
use riskshare_core::{
    AgentSpec, BeliefMeasure, DiscreteRv, DistortionFunction, NamedKind, TieRule,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Which inf-convolution the solver targets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Comonotonic,
    Unconstrained,
    Mixed,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSource {
    Values(Vec<f64>),
    Csv(PathBuf),
    UniformGrid { n: usize, lo: f64, hi: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum DistortionSpec {
    /// `gd`, `iqd:0.25`, `mix:a=0.5:gd+mmd`, ... or a CSV record text.
    Named(String),
    Raw(DistortionFunction),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum BeliefSpec {
    Probabilities(Vec<f64>),
    /// Name of a belief column in the distribution CSV.
    Column(String),
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    #[serde(default)]
    pub name: Option<String>,
    pub distortion: DistortionSpec,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub belief: Option<BeliefSpec>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    pub tie_rule: Option<String>,
    pub c: Option<f64>,
    pub cs: Option<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub tol: Option<f64>,
    pub plot_points: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub distribution: DistributionSource,
    pub agents: Vec<AgentEntry>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub options: Options,
}

/// A scenario with the distribution loaded and agents built.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub x: DiscreteRv,
    pub agents: Vec<AgentSpec>,
    pub mode: Mode,
    pub tie: TieRule,
    pub c: Option<f64>,
    pub cs: Option<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
    pub seed: u64,
    pub trials: usize,
    pub tol: f64,
    pub plot_points: usize,
}

/// Command-line overrides of scenario options.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub tol: Option<f64>,
    pub tie: Option<TieRule>,
    pub mode: Option<Mode>,
}

fn build_distortion(spec: DistortionSpec) -> Result<(DistortionFunction, Option<f64>), CliError> {
    match spec {
        DistortionSpec::Raw(h) => Ok((h, None)),
        DistortionSpec::Named(s) if s.trim_start().starts_with("kind,") => {
            Ok((DistortionFunction::from_record(&s)?, None))
        }
        DistortionSpec::Named(s) => {
            let kind: NamedKind = s.parse()?;
            Ok((kind.build()?, kind.iqd_alpha()))
        }
    }
}

impl Scenario {
    pub fn load(path: &Path, ov: &Overrides) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")), ov)
    }

    /// Parses a scenario; relative CSV paths resolve against `base`.
    pub fn from_json(text: &str, base: &Path, ov: &Overrides) -> Result<Self, CliError> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| CliError::Parse(format!("scenario: {e}")))?;
        let (x, columns) = match file.distribution {
            DistributionSource::Values(v) => (DiscreteRv::new(v)?, Vec::new()),
            DistributionSource::UniformGrid { n, lo, hi } => {
                (DiscreteRv::uniform_grid(n, lo, hi)?, Vec::new())
            }
            DistributionSource::Csv(p) => {
                let p = if p.is_absolute() { p } else { base.join(p) };
                let f = fs::File::open(&p)
                    .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                let d = read_distribution_csv(f)?;
                (d.x, d.beliefs)
            }
        };
        if file.agents.is_empty() {
            return Err(CliError::Parse("scenario has no agents".into()));
        }
        let agents = file
            .agents
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                let (h, alpha) = build_distortion(e.distortion)?;
                let mut a = AgentSpec::new(h, e.weight);
                a.iqd_alpha = alpha;
                a.name = Some(e.name.unwrap_or_else(|| format!("agent{}", i + 1)));
                a.belief = match e.belief {
                    None => None,
                    Some(BeliefSpec::Probabilities(p)) => Some(BeliefMeasure::new(p)?),
                    Some(BeliefSpec::Column(c)) => Some(
                        columns
                            .iter()
                            .find(|(name, _)| *name == c)
                            .map(|(_, b)| b.clone())
                            .ok_or_else(|| CliError::Parse(format!("no belief column {c:?}")))?,
                    ),
                };
                if let Some(b) = &a.belief {
                    if b.len() != x.len() {
                        return Err(CliError::Parse(format!(
                            "belief of agent {} has {} entries for {} states",
                            i + 1,
                            b.len(),
                            x.len()
                        )));
                    }
                }
                Ok(a)
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let opts = file.options;
        let tie = match (ov.tie, &opts.tie_rule) {
            (Some(t), _) => t,
            (None, Some(s)) => s.parse()?,
            (None, None) => TieRule::default(),
        };
        Ok(Scenario {
            x,
            agents,
            mode: ov.mode.or(file.mode).unwrap_or_default(),
            tie,
            c: opts.c,
            cs: opts.cs,
            weights: opts.weights,
            seed: ov.seed.or(opts.seed).unwrap_or(0),
            trials: ov.trials.or(opts.trials).unwrap_or(1000),
            tol: ov.tol.or(opts.tol).unwrap_or(1e-9),
            plot_points: opts.plot_points.unwrap_or(1001).max(2),
        })
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.weight).collect()
    }

    pub fn has_beliefs(&self) -> bool {
        self.agents.iter().any(|a| a.belief.is_some())
    }

    /// IQD levels when every agent is a pure IQD agent.
    pub fn iqd_levels(&self) -> Option<Vec<f64>> {
        self.agents.iter().map(|a| a.iqd_alpha).collect()
    }
}

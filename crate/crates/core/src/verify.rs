//! Randomized and exhaustive oracles for the closed forms.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::allocate::{AgentSpec, Allocation};
use crate::distortion::DistortionFunction;
use crate::error::{Error, Result};
use crate::infconv::{InfconvResult, Regime};
use crate::riskmetric::{choquet_sorted, quantile_sorted, DiscreteRv, LevelTable, QuantileSide};

/// Family of random allocations to draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleMode {
    /// Random increasing slicings of the total.
    Comonotonic,
    /// Proportional shares plus agentwise noise, projected onto the sum constraint.
    Unconstrained,
    /// Random tail events per agent around a random centre, middle sliced randomly.
    TailRandomized,
}

/// Independent stream for trial `trial`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn spread(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    (hi - lo).max(1.0)
}

/// Random point of the simplex written into `w`; one-hot with probability 0.3.
fn simplex_into(w: &mut [f64], rng: &mut ChaCha8Rng) {
    if rng.gen_bool(0.3) {
        w.fill(0.0);
        w[rng.gen_range(0..w.len())] = 1.0;
        return;
    }
    w.iter_mut().for_each(|v| *v = Exp1.sample(rng));
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
}

fn simplex(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut w = vec![0.0; n];
    simplex_into(&mut w, rng);
    w
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Zero-sum random constants of the given scale.
fn zero_sum(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut c: Vec<f64> = (0..n).map(|_| scale * normal(rng)).collect();
    let m = c.iter().sum::<f64>() / n as f64;
    c.iter_mut().for_each(|v| *v -= m);
    c
}

/// Closes the sum constraint exactly on the last agent.
fn close_sum(x: &[f64], parts: &mut [Vec<f64>]) {
    let n = parts.len();
    for s in 0..x.len() {
        let others: f64 = parts[..n - 1].iter().map(|p| p[s]).sum();
        parts[n - 1][s] = x[s] - others;
    }
}

fn ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Random comonotonic split of `values` (visited in ascending `order`): each gap between
/// distinct values goes to a random simplex point, plus zero-sum constants.
fn comonotonic_parts(
    values: &[f64],
    order: &[usize],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let base = simplex(n, rng);
    let consts = zero_sum(n, spread(values), rng);
    let mut parts = vec![vec![0.0; values.len()]; n];
    let first = order[0];
    let mut level: Vec<f64> = (0..n)
        .map(|i| base[i] * values[first] + consts[i])
        .collect();
    let mut prev = values[first];
    let mut w = vec![0.0; n];
    for &s in order {
        let d = values[s] - prev;
        if d > 0.0 {
            simplex_into(&mut w, rng);
            for i in 0..n {
                level[i] += w[i] * d;
            }
        }
        prev = values[s];
        for i in 0..n {
            parts[i][s] = level[i];
        }
    }
    close_sum(values, &mut parts);
    parts
}

fn unconstrained_parts(x: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let u = simplex(n, rng);
    let sc = spread(x);
    let sigma: Vec<f64> = (0..n).map(|_| sc * rng.gen::<f64>()).collect();
    let mut parts: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            x.iter()
                .map(|&v| u[i] * v + sigma[i] * normal(rng))
                .collect()
        })
        .collect();
    for s in 0..x.len() {
        let excess = (parts.iter().map(|p| p[s]).sum::<f64>() - x[s]) / n as f64;
        parts.iter_mut().for_each(|p| p[s] -= excess);
    }
    close_sum(x, &mut parts);
    parts
}

fn tail_randomized_parts(
    x: &[f64],
    order: &[usize],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let len = x.len();
    let k = rng.gen_range(0..=len / 2);
    // tail states: extreme order statistics, or random states half the time
    let (top, bottom): (Vec<usize>, Vec<usize>) = if rng.gen_bool(0.5) {
        (order[len - k..].to_vec(), order[..k].to_vec())
    } else {
        let mut shuffled = order.to_vec();
        shuffled.shuffle(rng);
        (shuffled[..k].to_vec(), shuffled[k..2 * k].to_vec())
    };
    let mut owner: Vec<Option<usize>> = vec![None; len];
    for &s in top.iter().chain(&bottom) {
        owner[s] = Some(rng.gen_range(0..n));
    }
    let asc: Vec<f64> = order.iter().map(|&s| x[s]).collect();
    let c = if rng.gen_bool(0.5) {
        quantile_sorted(&asc, 0.5, QuantileSide::Left)
    } else {
        asc[0] + rng.gen::<f64>() * (asc[len - 1] - asc[0])
    };
    let middle: Vec<f64> = (0..len)
        .map(|s| if owner[s].is_none() { x[s] - c } else { 0.0 })
        .collect();
    let mut parts = if rng.gen_bool(0.5) {
        comonotonic_parts(&middle, &ascending(&middle), n, rng)
    } else {
        let a = simplex(n, rng);
        (0..n)
            .map(|i| middle.iter().map(|v| a[i] * v).collect())
            .collect()
    };
    let shares = simplex(n, rng);
    for s in 0..len {
        for i in 0..n {
            parts[i][s] += shares[i] * c;
        }
        if let Some(i) = owner[s] {
            parts[i][s] += x[s] - c;
        }
    }
    if rng.gen_bool(0.5) {
        let eps = 1e-3 * spread(x);
        let mut noise = vec![0.0; n];
        for s in 0..len {
            noise.iter_mut().for_each(|v| *v = eps * normal(rng));
            let m = noise.iter().sum::<f64>() / n as f64;
            for i in 0..n {
                parts[i][s] += noise[i] - m;
            }
        }
    }
    close_sum(x, &mut parts);
    parts
}

/// Draws random allocations of a fixed total among `n` agents.
pub struct Sampler<'a> {
    x: &'a DiscreteRv,
    n: usize,
    order: Vec<usize>,
}

impl<'a> Sampler<'a> {
    pub fn new(x: &'a DiscreteRv, n: usize) -> Self {
        Sampler {
            x,
            n,
            order: ascending(x.values()),
        }
    }

    pub fn sample(&self, mode: SampleMode, rng: &mut ChaCha8Rng) -> Allocation {
        if self.n <= 1 {
            return Allocation::single(self.x.clone());
        }
        let (xv, n) = (self.x.values(), self.n);
        let parts = match mode {
            SampleMode::Comonotonic => comonotonic_parts(xv, &self.order, n, rng),
            SampleMode::Unconstrained => unconstrained_parts(xv, n, rng),
            SampleMode::TailRandomized => tail_randomized_parts(xv, &self.order, n, rng),
        };
        Allocation::new(self.x.clone(), parts).expect("sampled parts sum to the total")
    }
}

/// One random allocation of `x` among `n` agents.
pub fn sample_allocation(
    x: &DiscreteRv,
    n: usize,
    mode: SampleMode,
    rng: &mut ChaCha8Rng,
) -> Allocation {
    Sampler::new(x, n).sample(mode, rng)
}

/// `count` random allocations; trial `k` draws from its own stream of `seed`.
pub fn sample_allocations(
    x: &DiscreteRv,
    n: usize,
    mode: SampleMode,
    count: usize,
    seed: u64,
) -> impl Iterator<Item = Allocation> + '_ {
    let sampler = Sampler::new(x, n);
    (0..count).map(move |k| sampler.sample(mode, &mut trial_rng(seed, k as u64)))
}

/// Outcome of a randomized or exhaustive check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub trials: usize,
    pub violations: usize,
    /// Smallest observed `candidate - reference`; negative values are violations
    /// when they exceed the tolerance.
    pub worst_gap: f64,
    /// Up to five violating allocations.
    pub witnesses: Vec<Allocation>,
}

const MAX_WITNESSES: usize = 5;

impl VerificationReport {
    fn new() -> Self {
        VerificationReport {
            trials: 0,
            violations: 0,
            worst_gap: f64::INFINITY,
            witnesses: Vec::new(),
        }
    }

    fn record(&mut self, gap: f64, tol: f64, a: impl FnOnce() -> Allocation) {
        self.trials += 1;
        self.worst_gap = self.worst_gap.min(gap);
        if gap < -tol {
            self.violations += 1;
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(a());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// Combines two reports as if their trials had run in one batch.
    pub fn merge(mut self, other: VerificationReport) -> Self {
        self.trials += other.trials;
        self.violations += other.violations;
        self.worst_gap = self.worst_gap.min(other.worst_gap);
        for w in other.witnesses {
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(w);
            }
        }
        self
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "trials: {}\nviolations: {}\nworst gap: {:e}\nresult: {}",
            self.trials,
            self.violations,
            self.worst_gap,
            if self.passed() { "pass" } else { "FAIL" }
        )
    }
}

/// Welfare evaluator; uses precomputed level tables when no agent has a belief.
struct Evaluator<'a> {
    agents: &'a [AgentSpec],
    tables: Option<Vec<LevelTable>>,
    order: Vec<usize>,
}

impl<'a> Evaluator<'a> {
    fn new(agents: &'a [AgentSpec], x: &DiscreteRv) -> Self {
        let tables = agents.iter().all(|a| a.belief.is_none()).then(|| {
            agents
                .iter()
                .map(|a| LevelTable::new(&a.weighted_distortion(), x.len()))
                .collect()
        });
        Evaluator {
            agents,
            tables,
            order: x.ascending_order(),
        }
    }

    fn welfare(&self, a: &Allocation, buf: &mut Vec<f64>) -> Result<f64> {
        match &self.tables {
            Some(tables) => Ok(a
                .parts()
                .iter()
                .zip(tables)
                .map(|(p, t)| {
                    // parts that increase with the total arrive already sorted
                    buf.clear();
                    buf.extend(self.order.iter().map(|&s| p[s]));
                    if buf.windows(2).any(|w| w[1] < w[0]) {
                        buf.sort_by(f64::total_cmp);
                    }
                    t.eval_ascending(buf)
                })
                .sum()),
            None => crate::allocate::welfare(a, self.agents).map(|(_, w)| w),
        }
    }
}

/// Samples allocations and checks that none beats the closed form by more than
/// `tol * max(1, |closed form|)`.
///
/// Comonotonic closed forms are tested against comonotonic samples; unconstrained
/// ones against all three families in turn.
pub fn dominance_check(
    x: &DiscreteRv,
    agents: &[AgentSpec],
    closed_form: &InfconvResult,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<VerificationReport> {
    let modes: &[SampleMode] = match closed_form.regime {
        Regime::ComonotonicEnvelope => &[SampleMode::Comonotonic],
        _ => &[
            SampleMode::Unconstrained,
            SampleMode::TailRandomized,
            SampleMode::Comonotonic,
        ],
    };
    dominance_check_modes(x, agents, closed_form, modes, trials, seed, tol)
}

/// [`dominance_check`] with the sample families chosen by the caller; trial `k` uses
/// `modes[k % modes.len()]`.
pub fn dominance_check_modes(
    x: &DiscreteRv,
    agents: &[AgentSpec],
    closed_form: &InfconvResult,
    modes: &[SampleMode],
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<VerificationReport> {
    if agents.is_empty() || modes.is_empty() {
        return Err(Error::InvalidInput("no agents or no sample modes".into()));
    }
    let reference = closed_form.value_at(x);
    let abs_tol = tol * reference.abs().max(1.0);
    let eval = Evaluator::new(agents, x);
    let mut report = VerificationReport::new();
    let mut buf = Vec::with_capacity(x.len());
    let sampler = Sampler::new(x, agents.len());
    for k in 0..trials {
        let mode = modes[k % modes.len()];
        let a = sampler.sample(mode, &mut trial_rng(seed, k as u64));
        let gap = eval.welfare(&a, &mut buf)? - reference;
        report.record(gap, abs_tol, || a.clone());
    }
    Ok(report)
}

/// Checks that no candidate improves every agent on `a`.
///
/// For each candidate the gap is the largest per-agent change `rho_i(candidate_i) -
/// rho_i(a_i)`; a candidate with gap below `-tol` Pareto-dominates `a`.
pub fn pareto_check(
    a: &Allocation,
    agents: &[AgentSpec],
    candidates: impl IntoIterator<Item = Allocation>,
    tol: f64,
) -> Result<VerificationReport> {
    let (base, _) = crate::allocate::welfare(a, agents)?;
    let mut report = VerificationReport::new();
    for cand in candidates {
        let (vals, _) = crate::allocate::welfare(&cand, agents)?;
        let gap = vals
            .iter()
            .zip(&base)
            .map(|(c, b)| c - b)
            .fold(f64::NEG_INFINITY, f64::max);
        let scale = base.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        report.record(gap, tol * scale, || cand);
    }
    Ok(report)
}

/// Exhaustive minimum of `lambda_1 rho_1(Y) + lambda_2 rho_2(X - Y)` over `Y` with
/// every state value on a uniform grid of `grid` points spanning `[min X, max X]`.
///
/// Limited to two agents, at most six states and at most 25 grid points.
pub fn bruteforce_infconv(x: &DiscreteRv, agents: &[AgentSpec], grid: usize) -> Result<f64> {
    if agents.len() != 2 || x.len() > 6 || !(2..=25).contains(&grid) {
        return Err(Error::TooLarge(format!(
            "{} agents, {} states, {grid} grid points (limits: 2, 6, 2..=25)",
            agents.len(),
            x.len()
        )));
    }
    let (lo, hi) = (x.min(), x.max());
    let points: Vec<f64> = (0..grid)
        .map(|k| lo + (hi - lo) * k as f64 / (grid - 1) as f64)
        .collect();
    let n = x.len();
    let xv = x.values();
    let eval = Evaluator::new(agents, x);
    let mut idx = vec![0usize; n];
    let mut best = f64::INFINITY;
    let mut buf = Vec::with_capacity(n);
    loop {
        let y: Vec<f64> = idx.iter().map(|&k| points[k]).collect();
        let rest: Vec<f64> = y.iter().zip(xv).map(|(a, b)| b - a).collect();
        let a = Allocation::new(x.clone(), vec![y, rest])?;
        best = best.min(eval.welfare(&a, &mut buf)?);
        let mut d = 0;
        while d < n && idx[d] + 1 == grid {
            idx[d] = 0;
            d += 1;
        }
        if d == n {
            break;
        }
        idx[d] += 1;
    }
    Ok(best)
}

/// Monte Carlo estimate of `rho_h` from `m` draws, with a standard error from ten batch means.
pub fn monte_carlo_choquet(
    h: &DistortionFunction,
    mut sampler: impl FnMut(&mut ChaCha8Rng) -> f64,
    m: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    const BATCHES: usize = 10;
    if m < 10 * BATCHES {
        return Err(Error::InvalidInput(format!(
            "need at least {} draws",
            10 * BATCHES
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<f64> = (0..m).map(|_| sampler(&mut rng)).collect();
    if let Some(v) = draws.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("sampler returned {v}")));
    }
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let estimate = choquet_sorted(h, &sorted(&draws));
    let size = m / BATCHES;
    let means: Vec<f64> = draws
        .chunks_exact(size)
        .take(BATCHES)
        .map(|c| choquet_sorted(h, &sorted(c)))
        .collect();
    let mean = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok((estimate, (var / BATCHES as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocate::is_comonotonic;
    use crate::infconv::{infconv_comonotonic, infconv_iqd};

    fn x8() -> DiscreteRv {
        DiscreteRv::new((1..=8).rev().map(f64::from).collect()).unwrap()
    }

    #[test]
    fn samples_are_valid_and_reproducible() {
        let x = DiscreteRv::new(vec![1.0, -2.0, 1.0, 4.0, 0.5]).unwrap();
        for mode in [
            SampleMode::Comonotonic,
            SampleMode::Unconstrained,
            SampleMode::TailRandomized,
        ] {
            let a: Vec<_> = sample_allocations(&x, 3, mode, 20, 9).collect();
            let b: Vec<_> = sample_allocations(&x, 3, mode, 20, 9).collect();
            assert_eq!(a, b);
            if mode == SampleMode::Comonotonic {
                assert!(a.iter().all(is_comonotonic));
            }
        }
    }

    #[test]
    fn comonotonic_dominance() {
        let agents = [
            AgentSpec::new(DistortionFunction::gd(), 1.0),
            AgentSpec::new(DistortionFunction::mmd(), 0.8),
        ];
        let cf = infconv_comonotonic(
            &[DistortionFunction::gd(), DistortionFunction::mmd()],
            &[1.0, 0.8],
        )
        .unwrap();
        let r = dominance_check(&x8(), &agents, &cf, 500, 1, 1e-9).unwrap();
        assert!(r.passed(), "{r}");
        assert!(r.worst_gap >= -1e-9);
    }

    #[test]
    fn iqd_unconstrained_dominance() {
        let agents = [
            AgentSpec::iqd(0.125, 1.0).unwrap(),
            AgentSpec::iqd(0.125, 1.0).unwrap(),
        ];
        let cf = infconv_iqd(&[0.125, 0.125], &[1.0, 1.0]).unwrap();
        let r = dominance_check(&x8(), &agents, &cf, 600, 2, 1e-9).unwrap();
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn detects_a_false_closed_form() {
        // a closed form that is too high is beaten by the optimum
        let agents = [
            AgentSpec::iqd(0.125, 1.0).unwrap(),
            AgentSpec::iqd(0.125, 1.0).unwrap(),
        ];
        let wrong = infconv_comonotonic(
            &[
                DistortionFunction::iqd(0.125).unwrap(),
                DistortionFunction::iqd(0.125).unwrap(),
            ],
            &[1.0, 1.0],
        )
        .unwrap();
        let wrong = InfconvResult {
            regime: Regime::IqdUnconstrained,
            ..wrong
        };
        let r = dominance_check(&x8(), &agents, &wrong, 3000, 3, 1e-9).unwrap();
        assert!(!r.passed());
        assert!(!r.witnesses.is_empty());
    }

    #[test]
    fn bruteforce_limits_and_value() {
        let agents = [
            AgentSpec::new(DistortionFunction::gd(), 1.0),
            AgentSpec::new(DistortionFunction::gd(), 1.0),
        ];
        assert!(matches!(
            bruteforce_infconv(&x8(), &agents, 5),
            Err(Error::TooLarge(_))
        ));
        let x = DiscreteRv::new(vec![0.0, 1.0, 2.0]).unwrap();
        let v = bruteforce_infconv(&x, &agents, 5).unwrap();
        let exact = crate::riskmetric::gd(&x);
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
    }

    #[test]
    fn monte_carlo_mean() {
        let (est, se) =
            monte_carlo_choquet(&DistortionFunction::mean(), |r| r.gen::<f64>(), 20_000, 5)
                .unwrap();
        assert!((est - 0.5).abs() < 5.0 * se.max(1e-3), "{est} {se}");
    }
}

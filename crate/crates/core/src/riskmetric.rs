//! Quantiles and Choquet evaluation on finite equiprobable state spaces.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::distortion::DistortionFunction;
use crate::error::{Error, Result};
use crate::tol::scale_of;

/// A random variable on `N` equiprobable states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiscreteRv {
    values: Vec<f64>,
}

impl TryFrom<Vec<f64>> for DiscreteRv {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        DiscreteRv::new(v)
    }
}

impl From<DiscreteRv> for Vec<f64> {
    fn from(x: DiscreteRv) -> Self {
        x.values
    }
}

impl DiscreteRv {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput(
                "random variable needs at least one state".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite state value {v}")));
        }
        Ok(DiscreteRv { values })
    }

    /// Midpoints of `n` equal cells covering `[lo, hi]`.
    pub fn uniform_grid(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("grid needs at least one state".into()));
        }
        let w = (hi - lo) / n as f64;
        Self::new((0..n).map(|k| lo + (k as f64 + 0.5) * w).collect())
    }

    pub fn constant(c: f64, n: usize) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// State indices ordered by `(value, index)` ascending.
    pub fn ascending_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| total_order(&self.values, a, b));
        idx
    }

    pub fn sorted_ascending(&self) -> Vec<f64> {
        sorted(&self.values)
    }

    pub fn sorted_descending(&self) -> Vec<f64> {
        let mut v = sorted(&self.values);
        v.reverse();
        v
    }

    /// Rank of each state (0 = smallest) under the `(value, index)` order.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.len()];
        for (k, s) in self.ascending_order().into_iter().enumerate() {
            r[s] = k;
        }
        r
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn neg(&self) -> Self {
        DiscreteRv {
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether all state values are pairwise distinct.
    pub fn has_distinct_values(&self) -> bool {
        self.sorted_ascending().windows(2).all(|w| w[0] < w[1])
    }
}

pub(crate) fn total_order(v: &[f64], a: usize, b: usize) -> Ordering {
    v[a].total_cmp(&v[b]).then(a.cmp(&b))
}

pub(crate) fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    s
}

/// Left (`Q^-`) or right (`Q^+`) quantile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuantileSide {
    Left,
    Right,
}

/// Quantile at level `t` under the large-to-small convention:
/// `Q^-_t = inf{x : P(X <= x) >= 1 - t}`, `Q^+_t = inf{x : P(X <= x) > 1 - t}`.
///
/// The unbounded cases `Q^-_1` and `Q^+_0` are clamped to the minimum and the maximum.
pub fn quantile(x: &DiscreteRv, t: f64, side: QuantileSide) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::DomainError(t));
    }
    Ok(quantile_sorted(&x.sorted_ascending(), t, side))
}

/// [`quantile`] on values already sorted ascending.
pub fn quantile_sorted(asc: &[f64], t: f64, side: QuantileSide) -> f64 {
    let n = asc.len();
    asc[quantile_index(n, t, side)]
}

/// Zero-based position of the quantile in an ascending array of length `n`.
pub fn quantile_index(n: usize, t: f64, side: QuantileSide) -> usize {
    let mut u = n as f64 * (1.0 - t.clamp(0.0, 1.0));
    let r = u.round();
    if (u - r).abs() <= 1e-9 {
        u = r;
    }
    let j = match side {
        QuantileSide::Left => u.ceil() as usize,
        QuantileSide::Right => u.floor() as usize + 1,
    };
    j.clamp(1, n) - 1
}

/// Choquet integral of `X` with respect to `h`, via the survival staircase.
pub fn choquet(h: &DistortionFunction, x: &DiscreteRv) -> f64 {
    choquet_sorted(h, &x.sorted_ascending())
}

/// [`choquet`] on values already sorted ascending.
pub fn choquet_sorted(h: &DistortionFunction, asc: &[f64]) -> f64 {
    let n = asc.len();
    let nf = n as f64;
    let mut acc = asc[0] * h.value_at_one();
    for j in 1..n {
        let gap = asc[j] - asc[j - 1];
        if gap != 0.0 {
            acc += gap * h.at((n - j) as f64 / nf);
        }
    }
    acc
}

/// Choquet integral under a general probability vector over the states.
pub fn choquet_weighted(h: &DistortionFunction, values: &[f64], probs: &[f64]) -> Result<f64> {
    if values.len() != probs.len() || values.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} values but {} probabilities",
            values.len(),
            probs.len()
        )));
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| total_order(values, a, b));
    // survival[j] = P(X > value of idx[j]) computed as a suffix sum from the top
    let mut survival = vec![0.0; idx.len()];
    let mut acc = 0.0;
    for j in (0..idx.len()).rev() {
        survival[j] = acc;
        acc += probs[idx[j]];
    }
    let mut out = values[idx[0]] * h.value_at_one();
    for j in 1..idx.len() {
        let gap = values[idx[j]] - values[idx[j - 1]];
        if gap != 0.0 {
            out += gap * h.at(survival[j - 1]);
        }
    }
    Ok(out)
}

/// `h(k/N)` for `k = 0..=N`, for repeated evaluation on one grid size.
#[derive(Clone, Debug)]
pub struct LevelTable {
    levels: Vec<f64>,
}

impl LevelTable {
    pub fn new(h: &DistortionFunction, n: usize) -> Self {
        LevelTable {
            levels: (0..=n).map(|k| h.at(k as f64 / n as f64)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.levels.len() - 1
    }

    /// Choquet integral of ascending values; agrees with [`choquet_sorted`].
    pub fn eval_ascending(&self, asc: &[f64]) -> f64 {
        let n = asc.len();
        debug_assert_eq!(n, self.n());
        let mut acc = asc[0] * self.levels[n];
        for j in 1..n {
            acc += (asc[j] - asc[j - 1]) * self.levels[n - j];
        }
        acc
    }
}

/// Evaluation via `int Q^+ dh` (right-continuous `h`) or `int Q^- dh` (left-continuous `h`).
pub fn choquet_via_quantiles(h: &DistortionFunction, x: &DiscreteRv) -> Result<f64> {
    let side = if h.is_right_continuous() {
        QuantileSide::Right
    } else if h.is_left_continuous() {
        QuantileSide::Left
    } else {
        return Err(Error::HypothesisUnmet(
            "distortion is neither left- nor right-continuous".into(),
        ));
    };
    let asc = x.sorted_ascending();
    let n = asc.len();
    let mut pts: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    pts.extend_from_slice(h.breakpoints());
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= crate::tol::SNAP);

    let mut total = 0.0;
    for w in pts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let q = h.segment_at(mid);
        total += quantile_sorted(&asc, mid, side) * (q.eval(w[1]) - q.eval(w[0]));
    }
    let bps = h.breakpoints();
    let m = bps.len() - 1;
    for k in 0..=m {
        let jump = match side {
            QuantileSide::Right if k > 0 => h.point_values()[k] - h.left_limit(k),
            QuantileSide::Left if k < m => h.right_limit(k) - h.point_values()[k],
            _ => 0.0,
        };
        if jump != 0.0 {
            total += jump * quantile_sorted(&asc, bps[k], side);
        }
    }
    Ok(total)
}

/// Gini deviation `E|X* - X**| / 2` from order statistics.
pub fn gd(x: &DiscreteRv) -> f64 {
    let asc = x.sorted_ascending();
    let n = asc.len() as f64;
    let s: f64 = asc
        .iter()
        .enumerate()
        .map(|(j, y)| (2.0 * (j + 1) as f64 - n - 1.0) * y)
        .sum();
    s / (n * n)
}

/// Mean-median deviation `E|X - Q^-_{1/2}(X)|`.
pub fn mmd(x: &DiscreteRv) -> f64 {
    let asc = x.sorted_ascending();
    let m = quantile_sorted(&asc, 0.5, QuantileSide::Left);
    asc.iter().map(|y| (y - m).abs()).sum::<f64>() / asc.len() as f64
}

/// Inter-quantile difference `Q^-_alpha(X) - Q^+_{1-alpha}(X)`, zero for `alpha >= 1/2`.
pub fn iqd(x: &DiscreteRv, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::ParamOutOfRange {
            name: "alpha",
            value: alpha,
            expected: "[0, inf)",
        });
    }
    if alpha >= 0.5 {
        return Ok(0.0);
    }
    let asc = x.sorted_ascending();
    Ok(quantile_sorted(&asc, alpha, QuantileSide::Left)
        - quantile_sorted(&asc, 1.0 - alpha, QuantileSide::Right))
}

/// `mu(t) = int_0^t Q^-_s(X) ds`.
pub fn integrated_quantile(x: &DiscreteRv, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::DomainError(t));
    }
    let desc = x.sorted_descending();
    let n = desc.len();
    let mut u = n as f64 * t;
    if (u - u.round()).abs() <= 1e-9 {
        u = u.round();
    }
    let k = (u.floor() as usize).min(n);
    let mut acc: f64 = desc[..k].iter().sum();
    if k < n {
        acc += (u - k as f64) * desc[k];
    }
    Ok(acc / n as f64)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

const MAX_REFINEMENT: usize = 10_000_000;

/// `X <=_cx Y` on the common refinement of the two grids, with the default tolerance.
pub fn convex_order_leq(x: &DiscreteRv, y: &DiscreteRv) -> Result<bool> {
    let scale = scale_of(x.values()).max(scale_of(y.values()));
    convex_order_leq_tol(x, y, 1e-10 * scale)
}

/// `X <=_cx Y` iff `mu_X <= mu_Y` on `[0, 1]` with `mu_X(1) = mu_Y(1)`, up to `tol`.
pub fn convex_order_leq_tol(x: &DiscreteRv, y: &DiscreteRv, tol: f64) -> Result<bool> {
    let (nx, ny) = (x.len(), y.len());
    let l = nx / gcd(nx, ny) * ny;
    if l > MAX_REFINEMENT {
        return Err(Error::IncompatibleGrids {
            left: nx,
            right: ny,
        });
    }
    let (rx, ry) = (l / nx, l / ny);
    let (dx, dy) = (x.sorted_descending(), y.sorted_descending());
    let (mut sx, mut sy) = (0.0, 0.0);
    for k in 0..l {
        sx += dx[k / rx] / l as f64;
        sy += dy[k / ry] / l as f64;
        if sx > sy + tol {
            return Ok(false);
        }
    }
    Ok((sx - sy).abs() <= tol)
}

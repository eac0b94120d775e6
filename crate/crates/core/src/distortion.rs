//! Piecewise-quadratic distortion functions of bounded variation.
//!
//! A [`DistortionFunction`] stores a partition `0 = t_0 < ... < t_m = 1`, one
//! polynomial of degree at most two per open interval, and an explicit value at
//! every breakpoint. Point values are independent of the one-sided limits, so
//! open and closed indicators such as the IQD distortion are represented
//! without loss.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol::{close, SNAP};

/// `c0 + c1 t + c2 t^2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Quadratic {
    pub const ZERO: Quadratic = Quadratic {
        c0: 0.0,
        c1: 0.0,
        c2: 0.0,
    };

    pub const fn new(c0: f64, c1: f64, c2: f64) -> Self {
        Quadratic { c0, c1, c2 }
    }

    pub const fn constant(c: f64) -> Self {
        Quadratic::new(c, 0.0, 0.0)
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.c0 + t * (self.c1 + t * self.c2)
    }

    #[inline]
    pub fn slope(&self, t: f64) -> f64 {
        self.c1 + 2.0 * self.c2 * t
    }

    pub fn scale(self, k: f64) -> Self {
        Quadratic::new(k * self.c0, k * self.c1, k * self.c2)
    }

    pub fn add(self, o: Self) -> Self {
        Quadratic::new(self.c0 + o.c0, self.c1 + o.c1, self.c2 + o.c2)
    }

    pub fn sub(self, o: Self) -> Self {
        Quadratic::new(self.c0 - o.c0, self.c1 - o.c1, self.c2 - o.c2)
    }

    /// The polynomial `t -> p(t - a)`.
    pub fn shift(self, a: f64) -> Self {
        Quadratic::new(
            self.c0 - self.c1 * a + self.c2 * a * a,
            self.c1 - 2.0 * self.c2 * a,
            self.c2,
        )
    }

    fn magnitude(&self) -> f64 {
        self.c0.abs().max(self.c1.abs()).max(self.c2.abs())
    }

    pub fn approx_eq(&self, o: &Self, tol: f64) -> bool {
        let s = 1.0f64.max(self.magnitude()).max(o.magnitude());
        (self.c0 - o.c0).abs() <= tol * s
            && (self.c1 - o.c1).abs() <= tol * s
            && (self.c2 - o.c2).abs() <= tol * s
    }

    /// Real roots strictly inside `(lo, hi)`, ascending, at least `SNAP` away from the ends.
    pub fn roots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let s = 1.0f64.max(self.magnitude());
        let eps = 1e-15 * s;
        let mut out = Vec::new();
        if self.c2.abs() <= eps {
            if self.c1.abs() > eps {
                out.push(-self.c0 / self.c1);
            }
        } else {
            let d = self.c1 * self.c1 - 4.0 * self.c2 * self.c0;
            if d > 0.0 {
                let sq = d.sqrt();
                let q = -0.5 * (self.c1 + self.c1.signum() * sq);
                let q = if self.c1 == 0.0 { -0.5 * sq } else { q };
                out.push(q / self.c2);
                if q != 0.0 {
                    out.push(self.c0 / q);
                }
            }
        }
        out.retain(|r| r.is_finite() && *r > lo + SNAP && *r < hi - SNAP);
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= SNAP);
        out
    }
}

/// Where a probability level sits relative to the breakpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Loc {
    Point(usize),
    Inside(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct DistortionParts {
    breakpoints: Vec<f64>,
    segments: Vec<Quadratic>,
    point_values: Vec<f64>,
}

/// A distortion function `h: [0,1] -> R` with `h(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistortionParts", into = "DistortionParts")]
pub struct DistortionFunction {
    breakpoints: Vec<f64>,
    segments: Vec<Quadratic>,
    point_values: Vec<f64>,
}

impl TryFrom<DistortionParts> for DistortionFunction {
    type Error = Error;
    fn try_from(p: DistortionParts) -> Result<Self> {
        DistortionFunction::from_parts(p.breakpoints, p.segments, p.point_values)
    }
}

impl From<DistortionFunction> for DistortionParts {
    fn from(h: DistortionFunction) -> Self {
        DistortionParts {
            breakpoints: h.breakpoints,
            segments: h.segments,
            point_values: h.point_values,
        }
    }
}

impl DistortionFunction {
    /// Builds and canonicalizes a function from raw parts.
    pub fn from_parts(
        breakpoints: Vec<f64>,
        segments: Vec<Quadratic>,
        mut point_values: Vec<f64>,
    ) -> Result<Self> {
        let m = breakpoints.len();
        if m < 2 || segments.len() != m - 1 || point_values.len() != m {
            return Err(Error::InvalidInput(format!(
                "{m} breakpoints need {} segments and {m} point values, got {} and {}",
                m.saturating_sub(1),
                segments.len(),
                point_values.len()
            )));
        }
        if breakpoints[0] != 0.0 || breakpoints[m - 1] != 1.0 {
            return Err(Error::InvalidInput(
                "breakpoints must start at 0 and end at 1".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let finite = point_values.iter().all(|v| v.is_finite())
            && segments
                .iter()
                .all(|q| q.c0.is_finite() && q.c1.is_finite() && q.c2.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        if !close(point_values[0], 0.0, 1e-12) {
            return Err(Error::InvalidInput(format!(
                "h(0) must be 0, found {}",
                point_values[0]
            )));
        }
        point_values[0] = 0.0;
        let mut h = DistortionFunction {
            breakpoints,
            segments,
            point_values,
        };
        h.canonicalize();
        Ok(h)
    }

    /// Builds a function from a set of candidate breakpoints, a segment rule
    /// evaluated on each open interval and a point rule.
    fn build(
        mut points: Vec<f64>,
        seg: impl Fn(f64, f64) -> Quadratic,
        val: impl Fn(f64) -> f64,
    ) -> Self {
        points.retain(|t| *t > SNAP && *t < 1.0 - SNAP);
        points.push(0.0);
        points.push(1.0);
        points.sort_by(f64::total_cmp);
        let mut bps: Vec<f64> = Vec::with_capacity(points.len());
        for t in points {
            match bps.last() {
                Some(&last) if t - last <= SNAP => {}
                _ => bps.push(t),
            }
        }
        let segments = bps.windows(2).map(|w| seg(w[0], w[1])).collect();
        let mut point_values: Vec<f64> = bps.iter().map(|&t| val(t)).collect();
        point_values[0] = 0.0;
        let mut h = DistortionFunction {
            breakpoints: bps,
            segments,
            point_values,
        };
        h.canonicalize();
        h
    }

    fn canonicalize(&mut self) {
        let mut k = 1;
        while k + 1 < self.breakpoints.len() {
            let t = self.breakpoints[k];
            let (l, r) = (self.segments[k - 1], self.segments[k]);
            let pv = self.point_values[k];
            if l.approx_eq(&r, 1e-12) && close(pv, l.eval(t), 1e-12) && close(pv, r.eval(t), 1e-12)
            {
                self.breakpoints.remove(k);
                self.segments.remove(k);
                self.point_values.remove(k);
            } else {
                k += 1;
            }
        }
    }

    pub fn zero() -> Self {
        DistortionFunction {
            breakpoints: vec![0.0, 1.0],
            segments: vec![Quadratic::ZERO],
            point_values: vec![0.0, 0.0],
        }
    }

    /// Gini deviation, `t - t^2`.
    pub fn gd() -> Self {
        DistortionFunction {
            breakpoints: vec![0.0, 1.0],
            segments: vec![Quadratic::new(0.0, 1.0, -1.0)],
            point_values: vec![0.0, 0.0],
        }
    }

    /// Mean-median deviation, `min(t, 1 - t)`.
    pub fn mmd() -> Self {
        DistortionFunction {
            breakpoints: vec![0.0, 0.5, 1.0],
            segments: vec![
                Quadratic::new(0.0, 1.0, 0.0),
                Quadratic::new(1.0, -1.0, 0.0),
            ],
            point_values: vec![0.0, 0.5, 0.0],
        }
    }

    /// Inter-quantile difference: indicator of the open interval `(alpha, 1 - alpha)`.
    pub fn iqd(alpha: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&alpha) {
            return Err(Error::ParamOutOfRange {
                name: "alpha",
                value: alpha,
                expected: "[0, 1/2)",
            });
        }
        if alpha == 0.0 {
            return Ok(Self::plateau(1.0));
        }
        Ok(DistortionFunction {
            breakpoints: vec![0.0, alpha, 1.0 - alpha, 1.0],
            segments: vec![Quadratic::ZERO, Quadratic::constant(1.0), Quadratic::ZERO],
            point_values: vec![0.0; 4],
        })
    }

    /// Range, the IQD distortion at level 0.
    pub fn range() -> Self {
        Self::plateau(1.0)
    }

    /// `lambda` times the indicator of `(0, 1)`.
    pub fn plateau(lambda: f64) -> Self {
        if lambda == 0.0 {
            return Self::zero();
        }
        DistortionFunction {
            breakpoints: vec![0.0, 1.0],
            segments: vec![Quadratic::constant(lambda)],
            point_values: vec![0.0, 0.0],
        }
    }

    /// Expectation, `h(t) = t`.
    pub fn mean() -> Self {
        DistortionFunction {
            breakpoints: vec![0.0, 1.0],
            segments: vec![Quadratic::new(0.0, 1.0, 0.0)],
            point_values: vec![0.0, 1.0],
        }
    }

    /// `t + gamma * base(t)`.
    pub fn mean_plus(gamma: f64, base: &DistortionFunction) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::ParamOutOfRange {
                name: "gamma",
                value: gamma,
                expected: "[0, inf)",
            });
        }
        Ok(Self::mean().add(&base.scale(gamma)))
    }

    /// `a * first + (1 - a) * second`.
    pub fn mix(a: f64, first: &DistortionFunction, second: &DistortionFunction) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::ParamOutOfRange {
                name: "a",
                value: a,
                expected: "[0, 1]",
            });
        }
        Ok(first.scale(a).add(&second.scale(1.0 - a)))
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[Quadratic] {
        &self.segments
    }

    pub fn point_values(&self) -> &[f64] {
        &self.point_values
    }

    fn locate(&self, t: f64) -> Loc {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        // breakpoints[k-1] <= t < breakpoints[k]
        if k > 0 && t - self.breakpoints[k - 1] <= SNAP {
            return Loc::Point(k - 1);
        }
        if k < self.breakpoints.len() && self.breakpoints[k] - t <= SNAP {
            return Loc::Point(k);
        }
        Loc::Inside(k.clamp(1, self.segments.len()) - 1)
    }

    /// Index of the segment whose closure contains `t`, without snapping.
    pub(crate) fn segment_containing(&self, t: f64) -> usize {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        k.clamp(1, self.segments.len()) - 1
    }

    pub(crate) fn segment_at(&self, t: f64) -> Quadratic {
        self.segments[self.segment_containing(t)]
    }

    /// Evaluates `h(t)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(-SNAP..=1.0 + SNAP).contains(&t) {
            return Err(Error::DomainError(t));
        }
        Ok(self.at(t))
    }

    /// Evaluates `h(t)` with `t` clamped to `[0, 1]`.
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        match self.locate(t.clamp(0.0, 1.0)) {
            Loc::Point(k) => self.point_values[k],
            Loc::Inside(k) => self.segments[k].eval(t),
        }
    }

    pub fn value_at_one(&self) -> f64 {
        *self.point_values.last().unwrap()
    }

    /// `h(t-)` at breakpoint `k > 0`.
    pub fn left_limit(&self, k: usize) -> f64 {
        self.segments[k - 1].eval(self.breakpoints[k])
    }

    /// `h(t+)` at breakpoint `k < m`.
    pub fn right_limit(&self, k: usize) -> f64 {
        self.segments[k].eval(self.breakpoints[k])
    }

    fn combine(
        &self,
        other: &Self,
        seg: impl Fn(Quadratic, Quadratic) -> Quadratic,
        val: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut pts = self.breakpoints.clone();
        pts.extend_from_slice(&other.breakpoints);
        Self::build(
            pts,
            |lo, hi| {
                let mid = 0.5 * (lo + hi);
                seg(self.segment_at(mid), other.segment_at(mid))
            },
            |t| val(self.at(t), other.at(t)),
        )
    }

    pub fn scale(&self, lambda: f64) -> Self {
        let mut h = DistortionFunction {
            breakpoints: self.breakpoints.clone(),
            segments: self.segments.iter().map(|q| q.scale(lambda)).collect(),
            point_values: self.point_values.iter().map(|v| lambda * v).collect(),
        };
        h.canonicalize();
        h
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, Quadratic::add, |a, b| a + b)
    }

    /// `h / |h(1)|` when `h(1) != 0`, otherwise `h`.
    pub fn normalize(&self) -> Self {
        let v = self.value_at_one();
        if v == 0.0 {
            self.clone()
        } else {
            self.scale(1.0 / v.abs())
        }
    }

    fn min2(&self, other: &Self) -> Self {
        let mut union = self.breakpoints.clone();
        union.extend_from_slice(&other.breakpoints);
        union.sort_by(f64::total_cmp);
        union.dedup();
        let mut pts = union.clone();
        for w in union.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let d = self.segment_at(mid).sub(other.segment_at(mid));
            pts.extend(d.roots_in(w[0], w[1]));
        }
        Self::build(
            pts,
            |lo, hi| {
                let mid = 0.5 * (lo + hi);
                let (p, q) = (self.segment_at(mid), other.segment_at(mid));
                let (a, b) = (p.eval(mid), q.eval(mid));
                if a < b {
                    p
                } else if b < a {
                    q
                } else if (p.c2, p.c1, p.c0) <= (q.c2, q.c1, q.c0) {
                    p
                } else {
                    q
                }
            },
            |t| self.at(t).min(other.at(t)),
        )
    }

    /// `t -> h(t - a)`, zero for `t < a`.
    pub fn shift_right(&self, a: f64) -> Self {
        let mut pts: Vec<f64> = self.breakpoints.iter().map(|b| b + a).collect();
        pts.push(a);
        Self::build(
            pts,
            |lo, hi| {
                let mid = 0.5 * (lo + hi);
                if mid < a {
                    Quadratic::ZERO
                } else {
                    self.segment_at(mid - a).shift(a)
                }
            },
            |t| {
                if t < a - SNAP {
                    0.0
                } else {
                    self.at((t - a).max(0.0))
                }
            },
        )
    }

    /// `t -> h(t + a)`, zero for `t > 1 - a`.
    pub fn shift_left(&self, a: f64) -> Self {
        let mut pts: Vec<f64> = self.breakpoints.iter().map(|b| b - a).collect();
        pts.push(1.0 - a);
        Self::build(
            pts,
            |lo, hi| {
                let mid = 0.5 * (lo + hi);
                if mid > 1.0 - a {
                    Quadratic::ZERO
                } else {
                    self.segment_at(mid + a).shift(-a)
                }
            },
            |t| {
                if t > 1.0 - a + SNAP {
                    0.0
                } else {
                    self.at((t + a).min(1.0))
                }
            },
        )
    }

    /// Sets the function to zero outside the open interval `(lo, hi)`.
    pub fn restrict_open(&self, lo: f64, hi: f64) -> Self {
        let mut pts = self.breakpoints.clone();
        pts.push(lo);
        pts.push(hi);
        Self::build(
            pts,
            |a, b| {
                let mid = 0.5 * (a + b);
                if mid > lo && mid < hi {
                    self.segment_at(mid)
                } else {
                    Quadratic::ZERO
                }
            },
            |t| {
                if t > lo + SNAP && t < hi - SNAP {
                    self.at(t)
                } else {
                    0.0
                }
            },
        )
    }

    /// Concavity on `[0, 1]`, allowing only downward jumps at the endpoints.
    pub fn is_concave(&self) -> bool {
        let scale = self
            .segments
            .iter()
            .map(Quadratic::magnitude)
            .chain(self.point_values.iter().map(|v| v.abs()))
            .fold(1.0, f64::max);
        let tol = 1e-12 * scale;
        if self.segments.iter().any(|q| q.c2 > tol) {
            return false;
        }
        let m = self.breakpoints.len() - 1;
        for k in 1..m {
            let t = self.breakpoints[k];
            let (l, r) = (self.segments[k - 1], self.segments[k]);
            let pv = self.point_values[k];
            if (l.eval(t) - pv).abs() > tol || (r.eval(t) - pv).abs() > tol {
                return false;
            }
            if l.slope(t) < r.slope(t) - tol {
                return false;
            }
        }
        self.point_values[0] <= self.right_limit(0) + tol
            && self.point_values[m] <= self.left_limit(m) + tol
    }

    /// Total variation over `[0, 1]`, including jumps into and out of every breakpoint.
    pub fn total_variation(&self) -> f64 {
        let mut tv = 0.0;
        for (k, q) in self.segments.iter().enumerate() {
            let (lo, hi) = (self.breakpoints[k], self.breakpoints[k + 1]);
            if q.c2 != 0.0 {
                let v = -q.c1 / (2.0 * q.c2);
                if v > lo && v < hi {
                    tv += (q.eval(v) - q.eval(lo)).abs() + (q.eval(hi) - q.eval(v)).abs();
                    continue;
                }
            }
            tv += (q.eval(hi) - q.eval(lo)).abs();
        }
        let m = self.breakpoints.len() - 1;
        for k in 0..=m {
            let pv = self.point_values[k];
            if k > 0 {
                tv += (pv - self.left_limit(k)).abs();
            }
            if k < m {
                tv += (self.right_limit(k) - pv).abs();
            }
        }
        tv
    }

    /// `h(t) = h(t+)` at every breakpoint in `[0, 1)`.
    pub fn is_right_continuous(&self) -> bool {
        (0..self.segments.len()).all(|k| close(self.point_values[k], self.right_limit(k), 1e-12))
    }

    /// `h(t) = h(t-)` at every breakpoint in `(0, 1]`.
    pub fn is_left_continuous(&self) -> bool {
        (1..self.breakpoints.len()).all(|k| close(self.point_values[k], self.left_limit(k), 1e-12))
    }

    /// Structural comparison with a coefficient tolerance.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.breakpoints.len() == other.breakpoints.len()
            && self
                .breakpoints
                .iter()
                .zip(&other.breakpoints)
                .all(|(a, b)| (a - b).abs() <= tol)
            && self
                .segments
                .iter()
                .zip(&other.segments)
                .all(|(p, q)| p.approx_eq(q, tol))
            && self
                .point_values
                .iter()
                .zip(&other.point_values)
                .all(|(a, b)| close(*a, *b, tol))
    }

    /// Self-describing CSV record: one row per breakpoint and per segment.
    pub fn to_record(&self) -> String {
        let mut s = String::from("kind,lo,hi,c0,c1,c2,value\n");
        for (k, &t) in self.breakpoints.iter().enumerate() {
            s.push_str(&format!("point,{t},,,,,{}\n", self.point_values[k]));
            if let Some(q) = self.segments.get(k) {
                let hi = self.breakpoints[k + 1];
                s.push_str(&format!("segment,{t},{hi},{},{},{},\n", q.c0, q.c1, q.c2));
            }
        }
        s
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidInput(format!("distortion record: {msg}"));
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
        let mut bps = Vec::new();
        let mut pvs = Vec::new();
        let mut segs = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            match row.get(0) {
                Some("point") => {
                    bps.push(num(row.get(1).unwrap_or(""))?);
                    pvs.push(num(row.get(6).unwrap_or(""))?);
                }
                Some("segment") => segs.push(Quadratic::new(
                    num(row.get(3).unwrap_or(""))?,
                    num(row.get(4).unwrap_or(""))?,
                    num(row.get(5).unwrap_or(""))?,
                )),
                other => return Err(bad(format!("unknown row kind {other:?}"))),
            }
        }
        Self::from_parts(bps, segs, pvs)
    }
}

/// Pointwise minimum of a nonempty family.
pub fn envelope_min(hs: &[DistortionFunction]) -> Result<DistortionFunction> {
    let (first, rest) = hs
        .split_first()
        .ok_or_else(|| Error::InvalidInput("envelope of an empty family".into()))?;
    Ok(rest.iter().fold(first.clone(), |acc, h| acc.min2(h)))
}

/// `lambda_i * h_i` for each agent.
pub fn weighted(hs: &[DistortionFunction], lambdas: &[f64]) -> Result<Vec<DistortionFunction>> {
    if hs.len() != lambdas.len() {
        return Err(Error::InvalidInput(format!(
            "{} distortions but {} weights",
            hs.len(),
            lambdas.len()
        )));
    }
    Ok(hs.iter().zip(lambdas).map(|(h, &l)| h.scale(l)).collect())
}

/// A piece of `[0, 1]` on which the set of minimizing agents is constant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArgminPiece {
    pub lo: f64,
    pub hi: f64,
    pub includes_lo: bool,
    pub includes_hi: bool,
    pub members: Vec<usize>,
}

impl ArgminPiece {
    pub fn contains(&self, t: f64) -> bool {
        (t > self.lo || (self.includes_lo && t == self.lo))
            && (t < self.hi || (self.includes_hi && t == self.hi))
    }
}

/// Agents attaining the minimum of `hs` at level `t`.
pub fn argmin_at(hs: &[DistortionFunction], t: f64) -> Vec<usize> {
    let vals: Vec<f64> = hs.iter().map(|h| h.at(t)).collect();
    argmin_of(&vals)
}

pub(crate) fn argmin_of(vals: &[f64]) -> Vec<usize> {
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * min.abs().max(1.0);
    (0..vals.len()).filter(|&i| vals[i] <= min + tol).collect()
}

/// Partition of `[0, 1]` by the set of agents minimizing `lambda_i h_i`.
pub fn argmin_sets(hs: &[DistortionFunction], lambdas: &[f64]) -> Result<Vec<ArgminPiece>> {
    let w = weighted(hs, lambdas)?;
    if w.is_empty() {
        return Err(Error::InvalidInput("argmin of an empty family".into()));
    }
    let mut pts: Vec<f64> = w
        .iter()
        .flat_map(|h| h.breakpoints.iter().copied())
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= SNAP);
    let base = pts.clone();
    for win in base.windows(2) {
        let mid = 0.5 * (win[0] + win[1]);
        for i in 0..w.len() {
            for j in i + 1..w.len() {
                let d = w[i].segment_at(mid).sub(w[j].segment_at(mid));
                pts.extend(d.roots_in(win[0], win[1]));
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= SNAP);

    let mut pieces: Vec<ArgminPiece> = Vec::new();
    let mut push = |p: ArgminPiece| {
        if let Some(last) = pieces.last_mut() {
            if last.members == p.members {
                last.hi = p.hi;
                last.includes_hi = p.includes_hi;
                return;
            }
        }
        pieces.push(p);
    };
    for (k, &t) in pts.iter().enumerate() {
        push(ArgminPiece {
            lo: t,
            hi: t,
            includes_lo: true,
            includes_hi: true,
            members: argmin_at(&w, t),
        });
        if let Some(&next) = pts.get(k + 1) {
            push(ArgminPiece {
                lo: t,
                hi: next,
                includes_lo: false,
                includes_hi: false,
                members: argmin_at(&w, 0.5 * (t + next)),
            });
        }
    }
    Ok(pieces)
}

/// `(h(t - alpha) ∧ h(t + alpha) ∧ cap) 1{alpha < t < 1 - alpha}` with `h` zero-extended
/// outside `[0, 1]`; `cap = None` means uncapped.
pub fn g_transform(
    h: &DistortionFunction,
    alpha: f64,
    cap: Option<f64>,
) -> Result<DistortionFunction> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::ParamOutOfRange {
            name: "alpha",
            value: alpha,
            expected: "[0, inf)",
        });
    }
    if let Some(l) = cap {
        if !(l >= 0.0) {
            return Err(Error::ParamOutOfRange {
                name: "cap",
                value: l,
                expected: "[0, inf]",
            });
        }
    }
    if !h.is_concave() {
        return Err(Error::NotConcave(
            "the transform requires a concave distortion".into(),
        ));
    }
    if !close(h.value_at_one(), 0.0, 1e-12) {
        return Err(Error::NotLocationInvariant(h.value_at_one()));
    }
    if alpha >= 0.5 {
        return Ok(DistortionFunction::zero());
    }
    let mut parts = vec![h.shift_right(alpha), h.shift_left(alpha)];
    if let Some(l) = cap.filter(|l| l.is_finite()) {
        parts.push(DistortionFunction::plateau(l));
    }
    Ok(envelope_min(&parts)?.restrict_open(alpha, 1.0 - alpha))
}

/// Named distortion families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NamedKind {
    Gd,
    Mmd,
    Iqd(f64),
    Mean,
    Range,
    MeanPlus {
        gamma: f64,
        base: Box<NamedKind>,
    },
    Mix {
        a: f64,
        first: Box<NamedKind>,
        second: Box<NamedKind>,
    },
}

impl NamedKind {
    pub fn build(&self) -> Result<DistortionFunction> {
        match self {
            NamedKind::Gd => Ok(DistortionFunction::gd()),
            NamedKind::Mmd => Ok(DistortionFunction::mmd()),
            NamedKind::Iqd(a) => DistortionFunction::iqd(*a),
            NamedKind::Mean => Ok(DistortionFunction::mean()),
            NamedKind::Range => Ok(DistortionFunction::range()),
            NamedKind::MeanPlus { gamma, base } => {
                DistortionFunction::mean_plus(*gamma, &base.build()?)
            }
            NamedKind::Mix { a, first, second } => {
                DistortionFunction::mix(*a, &first.build()?, &second.build()?)
            }
        }
    }

    /// The IQD level, for agents that are pure IQD.
    pub fn iqd_alpha(&self) -> Option<f64> {
        match self {
            NamedKind::Iqd(a) => Some(*a),
            NamedKind::Range => Some(0.0),
            _ => None,
        }
    }
}

pub fn make_named(kind: &NamedKind) -> Result<DistortionFunction> {
    kind.build()
}

impl fmt::Display for NamedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NamedKind::Gd => write!(f, "gd"),
            NamedKind::Mmd => write!(f, "mmd"),
            NamedKind::Iqd(a) => write!(f, "iqd:{a}"),
            NamedKind::Mean => write!(f, "mean"),
            NamedKind::Range => write!(f, "range"),
            NamedKind::MeanPlus { gamma, base } => write!(f, "meanplus:g={gamma}:{base}"),
            NamedKind::Mix { a, first, second } => write!(f, "mix:a={a}:{first}+{second}"),
        }
    }
}

impl FromStr for NamedKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown distortion spec {s:?}"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let s = s.trim();
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "gd" => return Ok(NamedKind::Gd),
            "mmd" => return Ok(NamedKind::Mmd),
            "mean" => return Ok(NamedKind::Mean),
            "range" => return Ok(NamedKind::Range),
            _ => {}
        }
        if let Some(rest) = lower.strip_prefix("iqd:") {
            return Ok(NamedKind::Iqd(num(rest)?));
        }
        if let Some(rest) = lower.strip_prefix("meanplus:") {
            let (g, base) = rest.split_once(':').ok_or_else(bad)?;
            let gamma = num(g.strip_prefix("g=").ok_or_else(bad)?)?;
            return Ok(NamedKind::MeanPlus {
                gamma,
                base: Box::new(base.parse()?),
            });
        }
        if let Some(rest) = lower.strip_prefix("mix:") {
            let (a, pair) = rest.split_once(':').ok_or_else(bad)?;
            let a = num(a.strip_prefix("a=").ok_or_else(bad)?)?;
            let (x, y) = pair.split_once('+').ok_or_else(bad)?;
            return Ok(NamedKind::Mix {
                a,
                first: Box::new(x.parse()?),
                second: Box::new(y.parse()?),
            });
        }
        Err(bad())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn named_values() {
        assert_eq!(DistortionFunction::gd().eval(0.5).unwrap(), 0.25);
        assert_eq!(DistortionFunction::mmd().eval(0.5).unwrap(), 0.5);
        let iqd = DistortionFunction::iqd(0.3).unwrap();
        assert_eq!(iqd.eval(0.3).unwrap(), 0.0);
        assert_eq!(iqd.eval(0.31).unwrap(), 1.0);
        assert_eq!(iqd.eval(0.7).unwrap(), 0.0);
        assert!(DistortionFunction::iqd(0.5).is_err());
    }

    #[test]
    fn eval_domain() {
        let gd = DistortionFunction::gd();
        assert_eq!(gd.eval(0.0).unwrap(), 0.0);
        assert_eq!(gd.eval(0.25).unwrap(), 0.1875);
        assert!(matches!(gd.eval(1.5), Err(Error::DomainError(_))));
        let mp = DistortionFunction::mean_plus(0.5, &gd).unwrap();
        assert_eq!(mp.eval(1.0).unwrap(), 1.0);
    }

    #[test]
    fn normalize_and_add() {
        let two_mean = DistortionFunction::mean().scale(2.0);
        assert!(two_mean
            .normalize()
            .approx_eq(&DistortionFunction::mean(), 0.0));
        assert_eq!(
            DistortionFunction::gd().normalize(),
            DistortionFunction::gd()
        );
        let sum = DistortionFunction::gd()
            .scale(0.5)
            .add(&DistortionFunction::mean());
        let mp = DistortionFunction::mean_plus(0.5, &DistortionFunction::gd()).unwrap();
        assert!(sum.approx_eq(&mp, 0.0));
    }

    #[test]
    fn lambda_pair_crossings() {
        let e = envelope_min(&[
            DistortionFunction::gd().scale(0.6),
            DistortionFunction::mmd().scale(0.4),
        ])
        .unwrap();
        let bps = e.breakpoints();
        assert!(bps.iter().any(|&b| approx(b, 1.0 / 3.0)), "{bps:?}");
        assert!(bps.iter().any(|&b| approx(b, 2.0 / 3.0)), "{bps:?}");
    }

    #[test]
    fn singleton_envelope() {
        let h = DistortionFunction::mmd();
        assert_eq!(envelope_min(std::slice::from_ref(&h)).unwrap(), h);
        assert!(envelope_min(&[]).is_err());
    }

    #[test]
    fn mixture_first_crossing() {
        let (gd, mmd) = (DistortionFunction::gd(), DistortionFunction::mmd());
        let hs: Vec<_> = [0.25, 0.5, 0.75]
            .iter()
            .zip([0.31, 0.32, 0.37])
            .map(|(&a, l)| DistortionFunction::mix(a, &gd, &mmd).unwrap().scale(l))
            .collect();
        let e = envelope_min(&hs).unwrap();
        let first = e.breakpoints()[1];
        assert!((first - 0.1212).abs() < 1e-4, "{first}");
    }

    #[test]
    fn argmin_identical_inputs() {
        let h = DistortionFunction::gd();
        let pieces = argmin_sets(&[h.clone(), h], &[1.0, 1.0]).unwrap();
        assert_eq!(pieces.len(), 1);
        assert_eq!(pieces[0].members, vec![0, 1]);
        assert!(pieces[0].includes_lo && pieces[0].includes_hi);
    }

    #[test]
    fn argmin_lambda_pair() {
        let pieces = argmin_sets(
            &[DistortionFunction::gd(), DistortionFunction::mmd()],
            &[0.6, 0.4],
        )
        .unwrap();
        let members = |t: f64| {
            pieces
                .iter()
                .find(|p| p.contains(t))
                .map(|p| p.members.clone())
                .unwrap()
        };
        assert_eq!(members(0.2), vec![1]);
        assert_eq!(members(0.5), vec![0]);
        assert_eq!(members(0.8), vec![1]);
        assert_eq!(members(0.0), vec![0, 1]);
    }

    #[test]
    fn argmin_gd_below_mmd() {
        let pieces = argmin_sets(
            &[DistortionFunction::gd(), DistortionFunction::mmd()],
            &[1.0, 1.0],
        )
        .unwrap();
        // ties only at the endpoints
        assert_eq!(pieces.len(), 3);
        assert_eq!(pieces[1].members, vec![0]);
        assert_eq!((pieces[1].lo, pieces[1].hi), (0.0, 1.0));
        assert_eq!(pieces[0].members, vec![0, 1]);
        assert_eq!(pieces[2].members, vec![0, 1]);
    }

    #[test]
    fn g_transform_examples() {
        let mmd = DistortionFunction::mmd();
        let g = g_transform(&mmd, 0.25, Some(10.0)).unwrap();
        assert!(approx(g.eval(0.5).unwrap(), 0.25));
        assert_eq!(g.eval(0.25).unwrap(), 0.0);
        assert_eq!(
            g_transform(&mmd, 0.6, Some(1.0)).unwrap(),
            DistortionFunction::zero()
        );
        assert!(g_transform(&mmd, 0.0, None).unwrap().approx_eq(&mmd, 0.0));
        let gd = DistortionFunction::gd();
        assert!(g_transform(&gd, 0.0, None).unwrap().approx_eq(&gd, 0.0));
        assert!(matches!(
            g_transform(&DistortionFunction::iqd(0.1).unwrap(), 0.1, None),
            Err(Error::NotConcave(_))
        ));
        assert!(matches!(
            g_transform(&DistortionFunction::mean(), 0.1, None),
            Err(Error::NotLocationInvariant(_))
        ));
    }

    #[test]
    fn concavity_and_variation() {
        assert!(DistortionFunction::gd().is_concave());
        assert!(DistortionFunction::mmd().is_concave());
        assert!(DistortionFunction::range().is_concave());
        assert!(!DistortionFunction::iqd(0.25).unwrap().is_concave());
        assert_eq!(
            DistortionFunction::iqd(0.25).unwrap().total_variation(),
            2.0
        );
        assert!(approx(DistortionFunction::gd().total_variation(), 0.5));
        assert!(approx(DistortionFunction::mean().total_variation(), 1.0));
    }

    #[test]
    fn record_round_trip() {
        let h = envelope_min(&[
            DistortionFunction::gd().scale(0.6),
            DistortionFunction::mmd().scale(0.4),
            DistortionFunction::iqd(0.1).unwrap().scale(0.2),
        ])
        .unwrap();
        let back = DistortionFunction::from_record(&h.to_record()).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn spec_strings() {
        for s in [
            "gd",
            "mmd",
            "iqd:0.25",
            "mean",
            "mix:a=0.5:gd+mmd",
            "meanplus:g=0.5:gd",
        ] {
            let k: NamedKind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
            k.build().unwrap();
        }
        assert!("foo".parse::<NamedKind>().is_err());
    }

    #[test]
    fn canonical_merge() {
        let h = DistortionFunction::from_parts(
            vec![0.0, 0.3, 1.0],
            vec![
                Quadratic::new(0.0, 1.0, -1.0),
                Quadratic::new(0.0, 1.0, -1.0),
            ],
            vec![0.0, 0.21, 0.0],
        )
        .unwrap();
        assert_eq!(h, DistortionFunction::gd());
    }
}

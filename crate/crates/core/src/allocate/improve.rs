use super::Allocation;
use crate::tol::scale_of;

const MAX_SWEEPS: usize = 1_000_000;

/// Contracts every part towards its midpoint on states `s`, `t` with `x[s] <= x[t]` when
/// some part moves against the total there. Returns whether anything changed.
fn contract_pair(
    x: &[f64],
    parts: &mut [Vec<f64>],
    s: usize,
    t: usize,
    tol: f64,
    half: &mut [f64],
) -> bool {
    let n = parts.len();
    let d = 0.5 * (x[t] - x[s]);
    let mut violated = false;
    for i in 0..n {
        half[i] = 0.5 * (parts[i][t] - parts[i][s]);
        violated |= if d == 0.0 {
            half[i].abs() > tol
        } else {
            half[i] < -tol
        };
    }
    if !violated {
        return false;
    }
    let positive: f64 = half.iter().filter(|h| **h > 0.0).sum();
    for i in 0..n {
        let mid = 0.5 * (parts[i][s] + parts[i][t]);
        let di = if half[i] > 0.0 && positive > 0.0 {
            half[i] * (d / positive)
        } else {
            0.0
        };
        parts[i][s] = mid - di;
        parts[i][t] = mid + di;
    }
    true
}

/// Comonotonic improvement: a comonotonic allocation of the same total whose parts are
/// each smaller in convex order than the input parts.
///
/// Works on pairs of states `h` apart in the order of the total, for halving strides
/// `h`. Whenever some part moves against the total on such a pair, every part is
/// contracted towards its two-state midpoint: anti-aligned parts are flattened and
/// aligned ones shrunk proportionally so the pair stays summable to the total. Each
/// step is a mean-preserving contraction of every part and strictly lowers the sum of
/// squares; passes stop once no violation exceeds a relative tolerance of `1e-13`.
pub fn comonotonic_improvement(a: &Allocation) -> Allocation {
    let x = a.total().values();
    let order = a.total().ascending_order();
    let mut parts = a.parts().to_vec();
    let n = parts.len();
    let scale = parts.iter().fold(scale_of(x), |m, p| m.max(scale_of(p)));
    let tol = 1e-13 * scale;
    let mut half = vec![0.0; n];
    let mut touched = false;

    let len = order.len();
    let mut strides = vec![1usize];
    while strides[strides.len() - 1] * 2 < len {
        strides.push(strides[strides.len() - 1] * 2);
    }
    strides.reverse();

    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        // long strides move mass across the order quickly; stride 1 settles the rest
        for &h in &strides {
            for k in 0..len - h {
                let (s, t) = (order[k], order[k + h]);
                changed |= contract_pair(x, &mut parts, s, t, tol, &mut half);
            }
        }
        if !changed {
            break;
        }
        touched = true;
    }
    if !touched {
        return a.clone();
    }
    // restore the statewise sum exactly on the last agent
    for s in 0..x.len() {
        let others: f64 = parts[..n - 1].iter().map(|p| p[s]).sum();
        parts[n - 1][s] = x[s] - others;
    }
    Allocation::new(a.total().clone(), parts).expect("contractions preserve the total")
}

//! Tanh-sinh integration with error control, panel sums and bisection
//! refinement.

use crate::error::{Result, RwreError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: u64,
}

/// Most subintervals [`integrate`] will hold at once.
pub const MAX_INTERVALS: usize = 400;

#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error).is_eq()
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// `int_a^b f` to absolute accuracy `tol`. The subinterval with the largest
/// double-exponential error estimate is bisected until the summed estimate
/// meets `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<Integral> {
    let mut evaluations = 0u64;
    let mut piece = |lo: f64, hi: f64| {
        let out = quadrature::double_exponential::integrate(f, lo, hi, 0.1 * tol);
        evaluations += out.num_function_evaluations as u64;
        let error = if out.integral.is_finite() { out.error_estimate } else { f64::INFINITY };
        Piece { lo, hi, value: out.integral, error }
    };
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(piece(a, b));
    loop {
        let error: f64 = heap.iter().map(|p| p.error).sum();
        if error <= tol {
            let value = heap.iter().map(|p| p.value).sum();
            return Ok(Integral { value, error, evaluations });
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(RwreError::Quadrature { bound: error, target: tol });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo && mid < worst.hi) {
            return Err(RwreError::Quadrature { bound: error, target: tol });
        }
        heap.push(piece(worst.lo, mid));
        heap.push(piece(mid, worst.hi));
    }
}

/// Sum of [`integrate`] over consecutive panels `[p_i, p_{i+1}]`, the
/// tolerance shared equally.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: &F, points: &[f64], tol: f64) -> Result<Integral> {
    let panels = points.len().saturating_sub(1).max(1) as f64;
    let mut total = Integral { value: 0.0, error: 0.0, evaluations: 0 };
    for w in points.windows(2) {
        let part = integrate(f, w[0], w[1], tol / panels)?;
        total.value += part.value;
        total.error += part.error;
        total.evaluations += part.evaluations;
    }
    Ok(total)
}

//! Finite-state Markov environments: the model type, the executable
//! assumption checks, stationary and reversed kernels, lattice detection and
//! the uniform minorization split used by regeneration.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, RwreError};
use crate::linalg;
use crate::spectral;

/// Row sums of `H` must equal one to this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// A finite-state stationary Markov chain together with the per-state
/// probability of a right step.
///
/// The environment is read off the chain by `omega_{-n} = omega(x_n)`:
/// non-positive sites follow the forward chain, positive sites the reversed
/// one. `rho` is always derived from `omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    states: Vec<String>,
    h: DMatrix<f64>,
    omega: Vec<f64>,
    rho: Vec<f64>,
    epsilon: f64,
}

impl EnvironmentSpec {
    /// Builds a spec, rejecting non-stochastic rows, omega outside (0, 1),
    /// a bad epsilon and violations of strict ellipticity.
    pub fn new(states: Vec<String>, h: DMatrix<f64>, omega: Vec<f64>, epsilon: f64) -> Result<Self> {
        let k = omega.len();
        if k == 0 {
            return Err(RwreError::Dimension("empty state space".into()));
        }
        if h.nrows() != k || h.ncols() != k {
            return Err(RwreError::Dimension(format!(
                "H is {}x{} but omega has {} entries",
                h.nrows(),
                h.ncols(),
                k
            )));
        }
        if states.len() != k {
            return Err(RwreError::Dimension(format!("{} state labels for {} states", states.len(), k)));
        }
        for i in 0..k {
            for j in 0..k {
                let v = h[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(RwreError::InvalidEntry { row: i, col: j, value: v });
                }
            }
            let sum: f64 = h.row(i).iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(RwreError::NonStochasticRow { row: i, sum });
            }
        }
        for (i, &w) in omega.iter().enumerate() {
            if !(w > 0.0 && w < 1.0) {
                return Err(RwreError::OmegaOutOfRange { state: i, value: w });
            }
        }
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(RwreError::BadEpsilon(epsilon));
        }
        for (i, &w) in omega.iter().enumerate() {
            if !(w > epsilon && w < 1.0 - epsilon) {
                return Err(RwreError::Ellipticity { state: i, value: w, epsilon });
            }
        }
        let rho = omega.iter().map(|&w| (1.0 - w) / w).collect();
        Ok(Self { states, h, omega, rho, epsilon })
    }

    /// Spec with unnamed states `s0, s1, ...` built from row slices.
    pub fn from_rows(rows: &[&[f64]], omega: &[f64], epsilon: f64) -> Result<Self> {
        let k = rows.len();
        let h = DMatrix::from_fn(k, k, |i, j| rows[i].get(j).copied().unwrap_or(f64::NAN));
        let states = (0..k).map(|i| format!("s{i}")).collect();
        Self::new(states, h, omega.to_vec(), epsilon)
    }

    /// Environment whose sites are i.i.d. with law `probs`: every row of `H`
    /// equals `probs`.
    pub fn iid(probs: &[f64], omega: &[f64], epsilon: f64) -> Result<Self> {
        let rows: Vec<&[f64]> = (0..probs.len()).map(|_| probs).collect();
        Self::from_rows(&rows, omega, epsilon)
    }

    /// A constant environment.
    pub fn single_state(omega: f64, epsilon: f64) -> Result<Self> {
        Self::from_rows(&[&[1.0]], &[omega], epsilon)
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `c_rho = (1 - epsilon) / epsilon`; every `rho(x)` lies strictly inside
    /// `(1 / c_rho, c_rho)`.
    pub fn c_rho(&self) -> f64 {
        (1.0 - self.epsilon) / self.epsilon
    }

    /// True when all rows of `H` coincide (i.i.d. sites).
    pub fn has_identical_rows(&self) -> bool {
        let first = self.h.row(0);
        self.h.row_iter().all(|r| r == first)
    }
}

/// Outcome of lattice detection for the additive functional `log rho`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arithmetic {
    /// `log rho(v) + gamma(v) - gamma(u)` is a multiple of `span` on every
    /// transition `u -> v`; `span` is the largest such value.
    Lattice { span: f64, shift: Vec<f64> },
    /// Cycle discrepancies generate a dense subgroup of the reals.
    NonArithmetic,
    /// Every cycle sum vanishes: `log rho` is a coboundary and the products
    /// stay bounded.
    Coboundary { shift: Vec<f64> },
}

impl Arithmetic {
    pub fn is_non_arithmetic(&self) -> bool {
        matches!(self, Arithmetic::NonArithmetic)
    }

    pub fn span(&self) -> Option<f64> {
        match self {
            Arithmetic::Lattice { span, .. } => Some(*span),
            _ => None,
        }
    }
}

/// Result of checking a spec against the model assumptions.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub irreducible: bool,
    pub components: Vec<Vec<usize>>,
    /// `min_x min(omega(x), 1 - omega(x))`; every epsilon below it is valid.
    pub ellipticity_margin: f64,
    /// `E_pi(log rho)`, absent for reducible chains.
    pub drift: Option<f64>,
    /// Some beta with `Lambda(beta) < 0`.
    pub a3_negative_beta: Option<f64>,
    /// Some beta with `Lambda(beta) >= 0`.
    pub a3_nonnegative_beta: Option<f64>,
    pub arithmetic: Option<Arithmetic>,
}

impl ValidationReport {
    /// All assumptions hold: irreducible, both growth witnesses, non-lattice.
    pub fn all_hold(&self) -> bool {
        self.irreducible
            && self.a3_negative_beta.is_some()
            && self.a3_nonnegative_beta.is_some()
            && self.arithmetic.as_ref().is_some_and(|a| a.is_non_arithmetic())
    }

    /// Irreducible with both growth witnesses, so a unique index exists.
    pub fn has_index(&self) -> bool {
        self.irreducible && self.a3_negative_beta.is_some() && self.a3_nonnegative_beta.is_some()
    }
}

/// Geometric probe grid for the growth witnesses, `2^-6 ..= 2^6`.
pub fn probe_grid() -> Vec<f64> {
    (-6..=6).map(|e| 2f64.powi(e)).collect()
}

/// Checks irreducibility, ellipticity margin, drift, growth witnesses and
/// the lattice property.
pub fn validate(spec: &EnvironmentSpec) -> Result<ValidationReport> {
    let components = linalg::strongly_connected_components(spec.transition());
    let irreducible = components.len() == 1;
    let ellipticity_margin = spec.omega().iter().map(|&w| w.min(1.0 - w)).fold(f64::INFINITY, f64::min);

    if !irreducible {
        return Ok(ValidationReport {
            irreducible,
            components,
            ellipticity_margin,
            drift: None,
            a3_negative_beta: None,
            a3_nonnegative_beta: None,
            arithmetic: None,
        });
    }

    let pi = stationary_distribution(spec.transition())?;
    let drift = pi.iter().zip(spec.rho()).map(|(p, r)| p * r.ln()).sum::<f64>();

    let mut a3_negative_beta = None;
    let mut a3_nonnegative_beta = None;
    for beta in probe_grid() {
        let l = spectral::lambda(spec, beta)?;
        if l < 0.0 && a3_negative_beta.is_none() {
            a3_negative_beta = Some(beta);
        }
        if l >= 0.0 && a3_nonnegative_beta.is_none() {
            a3_nonnegative_beta = Some(beta);
        }
    }

    Ok(ValidationReport {
        irreducible,
        components,
        ellipticity_margin,
        drift: Some(drift),
        a3_negative_beta,
        a3_nonnegative_beta,
        arithmetic: Some(detect_arithmetic(spec)?),
    })
}

/// Unique invariant probability vector of an irreducible stochastic matrix.
pub fn stationary_distribution(h: &DMatrix<f64>) -> Result<DVector<f64>> {
    let components = linalg::strongly_connected_components(h);
    if components.len() != 1 {
        return Err(RwreError::Reducible { components });
    }
    let k = h.nrows();
    if k == 1 {
        return Ok(DVector::from_element(1, 1.0));
    }
    // (H^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    let mut a = h.transpose() - DMatrix::identity(k, k);
    let mut rhs = DVector::zeros(k);
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    rhs[k - 1] = 1.0;
    let lu = a.clone().lu();
    let mut pi = lu.solve(&rhs).ok_or_else(|| RwreError::Numerical("singular stationary system".into()))?;
    let resid = &rhs - &a * &pi;
    if let Some(corr) = lu.solve(&resid) {
        pi += corr;
    }
    let total: f64 = pi.iter().sum();
    pi /= total;
    if pi.iter().any(|&p| p <= 0.0) {
        return Err(RwreError::Numerical(format!("non-positive stationary mass {pi:?}")));
    }
    Ok(pi)
}

/// Time reversal of `H` with respect to its stationary law:
/// `H_rev(y, x) = pi(x) H(x, y) / pi(y)`.
pub fn reverse_kernel(spec: &EnvironmentSpec) -> Result<DMatrix<f64>> {
    let pi = stationary_distribution(spec.transition())?;
    reverse_with(spec.transition(), &pi)
}

pub(crate) fn reverse_with(h: &DMatrix<f64>, pi: &DVector<f64>) -> Result<DMatrix<f64>> {
    let k = h.nrows();
    if let Some(y) = pi.iter().position(|&p| p <= 0.0) {
        return Err(RwreError::Numerical(format!("zero stationary mass at state {y}")));
    }
    let mut rev = DMatrix::from_fn(k, k, |y, x| pi[x] * h[(x, y)] / pi[y]);
    // Renormalize away the O(ulp) drift of the stationary solve.
    for mut row in rev.row_iter_mut() {
        let s: f64 = row.iter().sum();
        row /= s;
    }
    Ok(rev)
}

/// Absolute tolerance for the real-number Euclid algorithm.
pub const GCD_TOL: f64 = 1e-9;
/// A common span below this floor is treated as no span at all.
pub const GCD_FLOOR: f64 = 1e-6;

/// Largest `alpha` with `log rho(v) in gamma(u) - gamma(v) + alpha Z` on every
/// positive-probability transition `u -> v`.
///
/// Potentials are propagated along a breadth-first spanning tree with edge
/// weight `log rho(target)`; the cycle discrepancies of the remaining edges
/// generate the additive group of all cycle sums, whose generator is found
/// by a tolerant Euclid algorithm.
pub fn detect_arithmetic(spec: &EnvironmentSpec) -> Result<Arithmetic> {
    let h = spec.transition();
    let k = spec.len();
    let weight: Vec<f64> = spec.rho().iter().map(|r| r.ln()).collect();

    let mut potential = vec![f64::NAN; k];
    potential[0] = 0.0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..k {
            if h[(u, v)] > 0.0 && potential[v].is_nan() {
                potential[v] = potential[u] + weight[v];
                queue.push_back(v);
            }
        }
    }
    if potential.iter().any(|p| p.is_nan()) {
        return Err(RwreError::Reducible { components: linalg::strongly_connected_components(h) });
    }

    let mut span = 0.0f64;
    for u in 0..k {
        for v in 0..k {
            if h[(u, v)] > 0.0 {
                let d = (potential[u] + weight[v] - potential[v]).abs();
                span = real_gcd(span, d);
            }
        }
    }
    if span <= GCD_TOL {
        let shift = potential.iter().map(|p| -p).collect();
        return Ok(Arithmetic::Coboundary { shift });
    }
    if span < GCD_FLOOR {
        return Ok(Arithmetic::NonArithmetic);
    }
    let shift = potential.iter().map(|p| (-p).rem_euclid(span)).collect();
    Ok(Arithmetic::Lattice { span, shift })
}

/// Euclid's algorithm on non-negative reals; remainders below [`GCD_TOL`]
/// count as zero.
fn real_gcd(a: f64, b: f64) -> f64 {
    let (mut a, mut b) = (a.max(b), a.min(b));
    while b > GCD_TOL {
        let r = a - b * (a / b).floor();
        // Snap remainders within tolerance of a full period.
        let r = if b - r <= GCD_TOL { 0.0 } else { r };
        a = b;
        b = r;
    }
    a
}

/// Uniform minorization `H^m = Theta + r 1 psi^T` with `psi` the normalized
/// column-minimum measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MinorizationSplit {
    pub m: usize,
    pub r: f64,
    pub psi: DVector<f64>,
    pub theta: DMatrix<f64>,
}

impl MinorizationSplit {
    /// Largest entrywise deviation of `Theta + r 1 psi^T` from `H^m`.
    pub fn reconstruction_error(&self, h: &DMatrix<f64>) -> f64 {
        let hm = linalg::matrix_power(h, self.m);
        let k = h.nrows();
        let mut err = 0.0f64;
        for x in 0..k {
            for y in 0..k {
                err = err.max((self.theta[(x, y)] + self.r * self.psi[y] - hm[(x, y)]).abs());
            }
        }
        err
    }
}

pub fn minorization_split(spec: &EnvironmentSpec, m: usize) -> Result<MinorizationSplit> {
    if m == 0 {
        return Err(RwreError::NoMinorization { m });
    }
    let hm = linalg::matrix_power(spec.transition(), m);
    let k = spec.len();
    let col_min: Vec<f64> =
        (0..k).map(|y| hm.column(y).iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let r: f64 = col_min.iter().sum();
    if r <= 0.0 {
        return Err(RwreError::NoMinorization { m });
    }
    let r = r.min(1.0);
    let psi = DVector::from_iterator(k, col_min.iter().map(|c| c / r));
    let theta = DMatrix::from_fn(k, k, |x, y| (hm[(x, y)] - r * psi[y]).max(0.0));
    Ok(MinorizationSplit { m, r, psi, theta })
}

//! Perron-Frobenius numerics for the tilted kernels `H_beta(x, y) = H(x, y) rho(y)^beta`.
//!
//! `Lambda(beta) = log r(H_beta)` is the exponential growth rate of
//! `E_x(prod rho^beta)`, and the index `kappa` is its positive root.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::envmodel::{probe_grid, EnvironmentSpec};
use crate::error::{Result, RwreError};
use crate::linalg;

/// Relative agreement of the Collatz-Wielandt bounds at convergence.
pub const RADIUS_TOL: f64 = 1e-13;
pub const MAX_ITERATIONS: usize = 100_000;
/// Target for `|Lambda(kappa)|`.
pub const ROOT_TOL: f64 = 1e-12;
/// Regeneration coin used when none is given.
pub const DEFAULT_COIN: f64 = 0.5;
/// Radii within this distance of one are reported as a weak coin.
pub const WEAK_COIN_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TiltedKernel {
    pub beta: f64,
    pub matrix: DMatrix<f64>,
}

/// `H_beta(x, y) = H(x, y) rho(y)^beta`.
pub fn tilt(spec: &EnvironmentSpec, beta: f64) -> TiltedKernel {
    TiltedKernel { beta, matrix: tilt_matrix(spec.transition(), spec.rho(), beta) }
}

pub(crate) fn tilt_matrix(h: &DMatrix<f64>, rho: &[f64], beta: f64) -> DMatrix<f64> {
    if beta == 0.0 {
        return h.clone();
    }
    let weights: Vec<f64> = rho.iter().map(|r| r.powf(beta)).collect();
    DMatrix::from_fn(h.nrows(), h.ncols(), |x, y| h[(x, y)] * weights[y])
}

/// Perron root of a nonnegative matrix with its right eigenvector.
#[derive(Debug, Clone)]
pub struct PerronRoot {
    pub radius: f64,
    /// Positive, max-entry one. Only trustworthy when `reliable`.
    pub vector: DVector<f64>,
    pub iterations: usize,
    /// A diagonal shift was needed to break periodic oscillation.
    pub period_regularized: bool,
    /// False for reducible input, where the radius is the largest block radius.
    pub reliable: bool,
}

impl PerronRoot {
    /// `||M v - radius v||_inf`.
    pub fn residual(&self, m: &DMatrix<f64>) -> f64 {
        let mv = m * &self.vector;
        linalg::sup_norm((mv - &self.vector * self.radius).iter().copied())
    }
}

/// Power iteration with max-normalization. Convergence is declared when the
/// Collatz-Wielandt lower and upper bounds agree to [`RADIUS_TOL`].
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<PerronRoot> {
    let k = m.nrows();
    if m.ncols() != k {
        return Err(RwreError::Dimension("spectral_radius needs a square matrix".into()));
    }
    if m.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(RwreError::Numerical("matrix has negative or non-finite entries".into()));
    }
    let comps = linalg::strongly_connected_components(m);
    if comps.len() > 1 {
        let mut radius = 0.0f64;
        for comp in &comps {
            let sub = DMatrix::from_fn(comp.len(), comp.len(), |i, j| m[(comp[i], comp[j])]);
            let r = if comp.len() == 1 { sub[(0, 0)] } else { spectral_radius(&sub)?.radius };
            radius = radius.max(r);
        }
        let (vector, iterations) = match power_iterate(m, 0.0) {
            Some((_, v, it)) => (v, it),
            None => (DVector::from_element(k, 1.0), MAX_ITERATIONS),
        };
        return Ok(PerronRoot { radius, vector, iterations, period_regularized: false, reliable: false });
    }
    if let Some((radius, vector, iterations)) = power_iterate(m, 0.0) {
        return Ok(PerronRoot { radius, vector, iterations, period_regularized: false, reliable: true });
    }
    let scale = m.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
    let eta = scale;
    match power_iterate(m, eta) {
        Some((radius, vector, iterations)) => {
            Ok(PerronRoot { radius, vector, iterations, period_regularized: true, reliable: true })
        }
        None => Err(RwreError::Numerical(format!(
            "power iteration did not converge in {MAX_ITERATIONS} iterations"
        ))),
    }
}

/// Iterates `v <- (M + eta I) v`; returns the radius of `M`, the vector and
/// the iteration count, or `None` on hitting the cap.
fn power_iterate(m: &DMatrix<f64>, eta: f64) -> Option<(f64, DVector<f64>, usize)> {
    let k = m.nrows();
    let mut v = DVector::from_element(k, 1.0);
    for it in 1..=MAX_ITERATIONS {
        let mut w = m * &v;
        if eta != 0.0 {
            w += &v * eta;
        }
        let top = w.max();
        if top <= 0.0 {
            // Nilpotent: the radius is zero.
            return Some((0.0, v, it));
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..k {
            if v[i] > 0.0 {
                let q = w[i] / v[i];
                lo = lo.min(q);
                hi = hi.max(q);
            } else if w[i] > 0.0 {
                lo = 0.0;
                hi = f64::INFINITY;
            }
        }
        w /= top;
        if hi.is_finite() && hi - lo <= RADIUS_TOL * hi {
            let radius = 0.5 * (lo + hi) - eta;
            return Some((radius.max(0.0), w, it));
        }
        v = w;
    }
    None
}

/// `Lambda(beta) = log r(H_beta)`.
pub fn lambda(spec: &EnvironmentSpec, beta: f64) -> Result<f64> {
    Ok(spectral_radius(&tilt(spec, beta).matrix)?.radius.ln())
}

/// Finite-horizon proxy `(1/n) log E_x(prod_{k<n} rho_{-k}^beta)` for each
/// start state, using `E_x(prod) = rho(x)^beta (H_beta^{n-1} 1)(x)`.
pub fn finite_horizon_growth(spec: &EnvironmentSpec, beta: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1);
    let hb = tilt(spec, beta).matrix;
    let ones = DVector::from_element(spec.len(), 1.0);
    let mut log_scale = 0.0;
    let mut v = ones;
    for _ in 1..n {
        v = &hb * v;
        let s = v.max();
        log_scale += s.ln();
        v /= s;
    }
    (0..spec.len()).map(|x| (beta * spec.rho()[x].ln() + log_scale + v[x].ln()) / n as f64).collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridPoint {
    pub beta: f64,
    pub lambda: f64,
    pub radius: f64,
}

/// Everything the tilted spectral analysis produces for one spec.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub grid: Vec<GridPoint>,
    pub kappa: f64,
    pub lambda_at_kappa: f64,
    /// Positive eigenvector of `H_kappa`, normalized so that
    /// `f(x*) rho(x*)^kappa = 1`.
    pub f_kappa: Vec<f64>,
    pub regen_state: usize,
    pub coin: f64,
    /// Spectral radius of `Theta_kappa`; below one.
    pub theta_kappa_radius: f64,
    pub period_regularized: bool,
}

/// Options for [`solve_kappa_with`].
#[derive(Debug, Clone, Copy)]
pub struct KappaOptions {
    pub regen_state: usize,
    pub coin: f64,
}

impl Default for KappaOptions {
    fn default() -> Self {
        Self { regen_state: 0, coin: DEFAULT_COIN }
    }
}

pub fn solve_kappa(spec: &EnvironmentSpec) -> Result<SpectralReport> {
    solve_kappa_with(spec, KappaOptions::default())
}

/// Locates the root of `Lambda` on `(0, inf)` by bracketing on the probe grid
/// followed by a safeguarded secant (Illinois) iteration.
pub fn solve_kappa_with(spec: &EnvironmentSpec, opts: KappaOptions) -> Result<SpectralReport> {
    if opts.regen_state >= spec.len() {
        return Err(RwreError::Dimension(format!("regeneration state {} out of range", opts.regen_state)));
    }
    let mut grid = Vec::new();
    for beta in probe_grid() {
        let root = spectral_radius(&tilt(spec, beta).matrix)?;
        grid.push(GridPoint { beta, lambda: root.radius.ln(), radius: root.radius });
    }
    let first_neg = grid.iter().position(|g| g.lambda < 0.0);
    let Some(first_neg) = first_neg else {
        return Err(RwreError::NoKappa(
            "Lambda(beta) >= 0 at every probed beta: drift condition fails".into(),
        ));
    };
    let Some(pos) = grid[first_neg..].iter().position(|g| g.lambda >= 0.0) else {
        return Err(RwreError::NoKappa("Lambda(beta) < 0 up to beta = 64: growth condition fails".into()));
    };
    let hi_idx = first_neg + pos;
    let (mut a, mut fa) = (grid[hi_idx - 1].beta, grid[hi_idx - 1].lambda);
    let (mut b, mut fb) = (grid[hi_idx].beta, grid[hi_idx].lambda);

    let (mut kappa, mut lk) = if fb.abs() < fa.abs() { (b, fb) } else { (a, fa) };
    let mut side = 0i8;
    for _ in 0..200 {
        if lk.abs() < ROOT_TOL || fb == 0.0 {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let fc = lambda(spec, c)?;
        kappa = c;
        lk = fc;
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if b - a < 1e-15 * b {
            break;
        }
    }
    if lk.abs() >= ROOT_TOL {
        log::warn!("kappa root reached |Lambda| = {lk:e} only");
    }

    let hk = tilt(spec, kappa).matrix;
    let root = spectral_radius(&hk)?;
    let x_star = opts.regen_state;
    let norm = root.vector[x_star] * spec.rho()[x_star].powf(kappa);
    let f_kappa: Vec<f64> = root.vector.iter().map(|v| v / norm).collect();
    let sub = sub_stochastic_radius(spec, opts.coin, kappa, x_star)?;
    if sub.weak_coin {
        log::warn!(
            "regeneration coin too weak: r(Theta_kappa) = {} within {:e} of one",
            sub.radius,
            sub.margin
        );
    }

    Ok(SpectralReport {
        grid,
        kappa,
        lambda_at_kappa: lk,
        f_kappa,
        regen_state: x_star,
        coin: opts.coin,
        theta_kappa_radius: sub.radius,
        period_regularized: root.period_regularized,
    })
}

/// `Theta(x, y) = H(x, y) (1 - r [y = x*])`: the chain killed at a successful
/// regeneration coin.
pub fn regeneration_kernel(h: &DMatrix<f64>, coin: f64, x_star: usize) -> DMatrix<f64> {
    let mut theta = h.clone();
    for x in 0..h.nrows() {
        theta[(x, x_star)] *= 1.0 - coin;
    }
    theta
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SubStochastic {
    pub radius: f64,
    /// `1 - radius`.
    pub margin: f64,
    pub weak_coin: bool,
}

/// Spectral radius of `Theta_kappa(x, y) = Theta(x, y) rho(y)^kappa`.
pub fn sub_stochastic_radius(
    spec: &EnvironmentSpec,
    coin: f64,
    kappa: f64,
    x_star: usize,
) -> Result<SubStochastic> {
    if !(coin > 0.0 && coin <= 1.0) {
        return Err(RwreError::BadCoin(coin));
    }
    let theta = regeneration_kernel(spec.transition(), coin, x_star);
    let theta_k = tilt_matrix(&theta, spec.rho(), kappa);
    let radius = spectral_radius(&theta_k)?.radius;
    let margin = 1.0 - radius;
    Ok(SubStochastic { radius, margin, weak_coin: margin < WEAK_COIN_MARGIN })
}

/// Chain tilted by the Perron data of `H_kappa`:
/// `H~(x, y) = H_kappa(x, y) h(y) / h(x)`, stochastic when `r(H_kappa) = 1`.
pub fn tilted_chain(spec: &EnvironmentSpec, kappa: f64, h_vec: &[f64]) -> DMatrix<f64> {
    let hk = tilt(spec, kappa).matrix;
    let mut t = DMatrix::from_fn(spec.len(), spec.len(), |x, y| hk[(x, y)] * h_vec[y] / h_vec[x]);
    for mut row in t.row_iter_mut() {
        let s: f64 = row.iter().sum();
        row /= s;
    }
    t
}

//! The series `R = 1 + sum_{n>=0} rho_0 rho_{-1} ... rho_{-n}`, tail-index
//! estimation, and importance sampling of its tail under the tilted chain.

use rand::Rng;
use serde::Serialize;

use crate::envmodel::{stationary_distribution, EnvironmentSpec};
use crate::error::{Result, RwreError};
use crate::rng::par_replicas;
use crate::sampling::ChainSampler;
use crate::spectral::tilt;
use crate::stats::{linear_fit, LinearFit};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_TOL: f64 = 1e-6;
pub const MAX_TERMS: usize = 1_000_000;
/// Smallest sample accepted by [`hill_estimator`].
pub const MIN_HILL_SAMPLES: usize = 1000;
pub const MAX_TOP_FRACTION: f64 = 0.2;
/// Top fractions scanned by [`hill_plateau`].
pub const PLATEAU_FRACTIONS: [f64; 8] = [0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001];
/// Relative rise of the Hill estimate, from the widest to the narrowest top
/// fraction, beyond which no plateau is declared.
pub const PLATEAU_DRIFT: f64 = 0.25;
pub const MIN_ESS: f64 = 50.0;

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol <= MAX_TOL {
        Ok(())
    } else {
        Err(RwreError::BadParameter(format!("tol = {tol} must lie in (0, {MAX_TOL}]")))
    }
}

/// Draws of `R` with the environment chain started from `pi`.
#[derive(Debug, Clone)]
pub struct RSampler {
    chain: ChainSampler,
    rho: Vec<f64>,
}

impl RSampler {
    pub fn new(spec: &EnvironmentSpec) -> Result<Self> {
        let pi = stationary_distribution(spec.transition())?;
        Ok(Self { chain: ChainSampler::new(spec.transition(), &pi), rho: spec.rho().to_vec() })
    }

    /// Partial sum up to the first product below `tol`. The remainder is
    /// that product times an independent copy of `R` and is not added.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, tol: f64) -> Result<f64> {
        let mut x = self.chain.start(rng);
        let mut prod = self.rho[x];
        let mut sum = 1.0 + prod;
        let mut terms = 1;
        while prod >= tol {
            if terms >= MAX_TERMS {
                return Err(RwreError::SlowContraction { terms, product: prod });
            }
            x = self.chain.step(x, rng);
            prod *= self.rho[x];
            sum += prod;
            terms += 1;
        }
        Ok(sum)
    }
}

pub fn sample_r<R: Rng + ?Sized>(spec: &EnvironmentSpec, rng: &mut R, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    RSampler::new(spec)?.sample(rng, tol)
}

/// `count` independent draws, draw `i` on replica stream `i`.
pub fn sample_r_batch(spec: &EnvironmentSpec, count: u64, seed: u64, tol: f64) -> Result<Vec<f64>> {
    check_tol(tol)?;
    let sampler = RSampler::new(spec)?;
    par_replicas(seed, count, |_, rng| sampler.sample(rng, tol)).into_iter().collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HillEstimate {
    pub top_fraction: f64,
    pub k: usize,
    pub index: f64,
    /// `index / sqrt(k)`.
    pub ci_half_width: f64,
    /// The `(k+1)`-th largest sample.
    pub threshold: f64,
}

/// Largest `k + 1` values of the positive samples, descending.
fn top_values(samples: &[f64], k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    let n = v.len();
    let keep = (k + 1).min(n);
    v.select_nth_unstable_by(n - keep, f64::total_cmp);
    let mut top = v.split_off(n - keep);
    top.sort_by(|a, b| b.total_cmp(a));
    top
}

/// Classical Hill estimator on the top `k = floor(top_fraction * n)` order
/// statistics.
pub fn hill_estimator(samples: &[f64], top_fraction: f64) -> Result<HillEstimate> {
    if samples.len() < MIN_HILL_SAMPLES {
        return Err(RwreError::InsufficientData(format!(
            "{} samples; Hill needs at least {MIN_HILL_SAMPLES}",
            samples.len()
        )));
    }
    if !(top_fraction > 0.0 && top_fraction <= MAX_TOP_FRACTION) {
        return Err(RwreError::BadParameter(format!(
            "top fraction {top_fraction} outside (0, {MAX_TOP_FRACTION}]"
        )));
    }
    let k = ((samples.len() as f64 * top_fraction) as usize).max(2);
    let top = top_values(samples, k);
    let threshold = top[k];
    if !(threshold > 0.0) {
        return Err(RwreError::BadParameter("Hill needs positive order statistics".into()));
    }
    let ln_u = threshold.ln();
    let mean_excess = top[..k].iter().map(|x| x.ln() - ln_u).sum::<f64>() / k as f64;
    if mean_excess <= 0.0 {
        return Err(RwreError::InsufficientData("ties collapse the top order statistics".into()));
    }
    let index = 1.0 / mean_excess;
    Ok(HillEstimate { top_fraction, k, index, ci_half_width: index / (k as f64).sqrt(), threshold })
}

/// Thresholds pooled per period by [`hill_estimator_lattice`].
pub const LATTICE_PHASES: usize = 16;

/// Fixed-point iterations in [`hill_estimator_lattice`].
const LATTICE_ITERATIONS: usize = 200;

/// Hill estimator for a lattice tail `t^-kappa p(log t)` with `p` of period
/// `span`. Exceedance counts and log-excesses at [`LATTICE_PHASES`]
/// thresholds `u_j`, spread evenly in `log t` across one period below the
/// `top_fraction` order statistic, are pooled with weights `u_j^kappa`;
/// `kappa` solves the resulting fixed-point equation.
pub fn hill_estimator_lattice(samples: &[f64], top_fraction: f64, span: f64) -> Result<HillEstimate> {
    let single = hill_estimator(samples, top_fraction)?;
    if !(span > 0.0 && span.is_finite()) {
        return Err(RwreError::BadParameter(format!("lattice span {span}")));
    }
    let mut v: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite() && *x > 0.0).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = Vec::with_capacity(v.len() + 1);
    prefix.push(0.0f64);
    for x in &v {
        prefix.push(prefix.last().unwrap() + x.ln());
    }
    // (offset of log u_j below the top threshold, count, log-excess)
    let phases: Vec<(f64, f64, f64)> = (0..LATTICE_PHASES)
        .map(|j| {
            let drop = span * (j as f64 + 0.5) / LATTICE_PHASES as f64;
            let ln_u = single.threshold.ln() - drop;
            let c = v.partition_point(|x| x.ln() > ln_u);
            (drop, c as f64, prefix[c] - c as f64 * ln_u)
        })
        .collect();
    let mut index = single.index;
    for _ in 0..LATTICE_ITERATIONS {
        let (mut num, mut den) = (0.0, 0.0);
        for &(drop, c, e) in &phases {
            let w = (-index * drop).exp();
            num += w * c;
            den += w * e;
        }
        if !(den > 0.0) {
            return Err(RwreError::InsufficientData("ties collapse the top order statistics".into()));
        }
        let next = num / den;
        let done = (next - index).abs() <= 1e-12 * index;
        index = next;
        if done {
            break;
        }
    }
    let k = phases.iter().map(|p| p.1).sum::<f64>() as usize / LATTICE_PHASES;
    Ok(HillEstimate {
        top_fraction,
        k,
        index,
        ci_half_width: index / (k.max(1) as f64).sqrt(),
        threshold: single.threshold,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HillPlateau {
    pub estimates: Vec<HillEstimate>,
    /// `(narrowest - widest) / widest`.
    pub drift: f64,
    pub plateau: bool,
}

/// Hill estimates over [`PLATEAU_FRACTIONS`] (those leaving `k >= 50`);
/// light tails show up as estimates rising without bound as the fraction
/// shrinks.
pub fn hill_plateau(samples: &[f64]) -> Result<HillPlateau> {
    let n = samples.len() as f64;
    let estimates = PLATEAU_FRACTIONS
        .iter()
        .filter(|&&f| n * f >= 50.0)
        .map(|&f| hill_estimator(samples, f))
        .collect::<Result<Vec<_>>>()?;
    if estimates.len() < 2 {
        return Err(RwreError::InsufficientData("too few top fractions".into()));
    }
    let widest = estimates[0].index;
    let narrowest = estimates[estimates.len() - 1].index;
    let drift = (narrowest - widest) / widest;
    Ok(HillPlateau { estimates, drift, plateau: drift <= PLATEAU_DRIFT })
}

/// Regression of `log P(X > x)` on `log x` over the top order statistics;
/// the slope estimates `-kappa`.
pub fn log_log_slope(samples: &[f64], top_fraction: f64) -> Result<LinearFit> {
    let n = samples.len();
    let k = (n as f64 * top_fraction) as usize;
    if k < 10 {
        return Err(RwreError::InsufficientData(format!("{k} top samples")));
    }
    let top = top_values(samples, k);
    let (xs, ys): (Vec<f64>, Vec<f64>) = top[..k]
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0)
        .map(|(i, &x)| (x.ln(), ((i + 1) as f64 / n as f64).ln()))
        .unzip();
    Ok(linear_fit(&xs, &ys))
}

/// Layout of the [`tail_curve`] grid.
#[derive(Debug, Clone, Copy)]
pub struct CurveOptions {
    pub decades: f64,
    pub points: usize,
    /// Samples required beyond the right end of the grid.
    pub min_exceedances: usize,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self { decades: 3.0, points: 31, min_exceedances: 100 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TailCurve {
    pub kappa: f64,
    pub t: Vec<f64>,
    /// `t^kappa * P_hat(X > t)`.
    pub value: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// `max / min` over the last decade of the grid.
    pub top_decade_ratio: f64,
}

/// `t^kappa` times the empirical survival on a geometric grid over the top
/// decades of the sample. The grid ends at the order statistic with
/// `min_exceedances` samples above it.
pub fn tail_curve(samples: &[f64], kappa: f64, opts: CurveOptions) -> Result<TailCurve> {
    let mut v: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n <= opts.min_exceedances || opts.points < 2 {
        return Err(RwreError::InsufficientData(format!("{n} samples for the tail curve")));
    }
    let t_end = v[n - 1 - opts.min_exceedances];
    let t_start = t_end / 10f64.powf(opts.decades);
    let survival = |t: f64| (n - v.partition_point(|&x| x <= t)) as f64 / n as f64;
    if !(t_start > 0.0) || n - v.partition_point(|&x| x <= t_start) < 100 {
        return Err(RwreError::InsufficientData("fewer than 100 samples beyond grid start".into()));
    }
    let ratio = t_end / t_start;
    let t: Vec<f64> =
        (0..opts.points).map(|i| t_start * ratio.powf(i as f64 / (opts.points - 1) as f64)).collect();
    let value: Vec<f64> = t.iter().map(|&s| s.powf(kappa) * survival(s)).collect();
    let min = value.iter().copied().fold(f64::INFINITY, f64::min);
    let max = value.iter().copied().fold(0.0, f64::max);
    let top: Vec<f64> = t.iter().zip(&value).filter(|(&s, _)| s >= t_end / 10.0).map(|(_, &c)| c).collect();
    let top_min = top.iter().copied().fold(f64::INFINITY, f64::min);
    let top_max = top.iter().copied().fold(0.0, f64::max);
    Ok(TailCurve { kappa, t, value, min, max, top_decade_ratio: top_max / top_min })
}

/// Plain Monte Carlo `P(X > threshold)` and its standard error.
pub fn empirical_tail(samples: &[f64], threshold: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    let p = samples.iter().filter(|&&x| x > threshold).count() as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltedEstimate {
    pub threshold: f64,
    pub probability: f64,
    pub standard_error: f64,
    pub effective_sample_size: f64,
    pub samples: u64,
    pub hits: u64,
    pub reliable: bool,
}

/// Importance sampling of `P(R > threshold)`.
///
/// Paths start from `pi` and move by `H~(x, y) = H_kappa(x, y) h(y) / (c(x) h(x))`
/// with `c(x)` the row normalizer (the Perron root when `h` is the Perron
/// vector). Each path stops when its partial sum first exceeds the
/// threshold and carries the likelihood ratio `prod H / H~` up to that
/// point; paths whose running product falls below `tol` first score zero.
pub fn tilted_tail_sampler(
    spec: &EnvironmentSpec,
    kappa: f64,
    h: &[f64],
    threshold: f64,
    samples: u64,
    seed: u64,
    tol: f64,
) -> Result<TiltedEstimate> {
    check_tol(tol)?;
    let k = spec.len();
    if h.len() != k || h.iter().any(|&v| !(v > 0.0)) {
        return Err(RwreError::BadParameter("h must be a positive vector over the states".into()));
    }
    let hk = tilt(spec, kappa).matrix;
    let rho = spec.rho();
    let mut rows = Vec::with_capacity(k);
    let mut log_c = Vec::with_capacity(k);
    for x in 0..k {
        let row: Vec<f64> = (0..k).map(|y| hk[(x, y)] * h[y] / h[x]).collect();
        let c: f64 = row.iter().sum();
        rows.push(row.iter().map(|v| v / c).collect::<Vec<f64>>());
        log_c.push(c.ln());
    }
    let tilted = nalgebra::DMatrix::from_fn(k, k, |x, y| rows[x][y]);
    let pi = stationary_distribution(spec.transition())?;
    let chain = ChainSampler::new(&tilted, &pi);
    let log_h: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let kappa_log_rho: Vec<f64> = rho.iter().map(|r| kappa * r.ln()).collect();

    let weights: Vec<f64> = par_replicas(seed, samples, |_, rng| {
        let mut x = chain.start(rng);
        let mut prod = rho[x];
        let mut sum = 1.0 + prod;
        let mut log_lr = 0.0f64;
        let mut terms = 1;
        loop {
            if sum > threshold {
                return log_lr.exp();
            }
            if prod < tol || terms >= MAX_TERMS {
                return 0.0;
            }
            let y = chain.step(x, rng);
            log_lr += log_c[x] + log_h[x] - log_h[y] - kappa_log_rho[y];
            prod *= rho[y];
            sum += prod;
            terms += 1;
            x = y;
        }
    });
    let s1: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    let (mean, se) = crate::stats::mean_and_se(&weights);
    let ess = if s2 > 0.0 { s1 * s1 / s2 } else { 0.0 };
    Ok(TiltedEstimate {
        threshold,
        probability: mean,
        standard_error: se,
        effective_sample_size: ess,
        samples,
        hits: weights.iter().filter(|&&w| w > 0.0).count() as u64,
        reliable: ess >= MIN_ESS,
    })
}

/// Summary of a batch of `R` draws.
#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub samples: usize,
    pub tol: f64,
    pub hill: Vec<HillEstimate>,
    pub plateau: bool,
    pub log_log: LinearFit,
    pub curve: TailCurve,
}

pub fn tail_report(samples: &[f64], kappa: f64, tol: f64, top_fraction: f64) -> Result<TailReport> {
    let plateau = hill_plateau(samples)?;
    let mut hill = plateau.estimates.clone();
    if !hill.iter().any(|e| e.top_fraction == top_fraction) {
        hill.push(hill_estimator(samples, top_fraction)?);
    }
    Ok(TailReport {
        samples: samples.len(),
        tol,
        hill,
        plateau: plateau.plateau,
        log_log: log_log_slope(samples, top_fraction)?,
        curve: tail_curve(samples, kappa, CurveOptions::default())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use crate::stats::mean_and_se;

    fn pareto(alpha: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = replica_rng(seed, 0);
        (0..n).map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / alpha)).collect()
    }

    fn chain_mk_k2() -> EnvironmentSpec {
        EnvironmentSpec::from_rows(&[&[0.9, 0.1], &[0.775, 0.225]], &[2.0 / 3.0, 1.0 / 3.0], 0.3).unwrap()
    }

    #[test]
    fn lattice_hill_removes_phase_dependence() {
        // X = 2^G with P(G >= g) = 2^{-2g}: P(X > t) oscillates around t^-2.
        let mut rng = replica_rng(9, 0);
        let s: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let u: f64 = 1.0 - rng.random::<f64>();
                2f64.powf((u.ln() / 4f64.ln()).abs().floor())
            })
            .collect();
        let span = 2f64.ln();
        for f in [0.01, 0.003, 0.001] {
            let h = hill_estimator_lattice(&s, f, span).unwrap();
            assert!((h.index - 2.0).abs() < 0.1, "{f}: {h:?}");
        }
        assert!(hill_estimator_lattice(&s, 0.01, 0.0).is_err());
    }

    #[test]
    fn single_state_r_is_geometric_series() {
        let spec = EnvironmentSpec::single_state(2.0 / 3.0, 0.1).unwrap();
        let r = sample_r(&spec, &mut replica_rng(0, 0), DEFAULT_TOL).unwrap();
        assert!((r - 2.0).abs() < 2.0 * DEFAULT_TOL);
        let spec = EnvironmentSpec::single_state(0.8, 0.1).unwrap();
        let c = spec.rho()[0];
        let r = sample_r(&spec, &mut replica_rng(0, 0), DEFAULT_TOL).unwrap();
        assert!((r - 1.0 / (1.0 - c)).abs() < 1e-11);
    }

    #[test]
    fn bad_tolerance_rejected() {
        let spec = EnvironmentSpec::single_state(0.8, 0.1).unwrap();
        assert!(sample_r(&spec, &mut replica_rng(0, 0), 1e-3).is_err());
        assert!(sample_r(&spec, &mut replica_rng(0, 0), 0.0).is_err());
    }

    #[test]
    fn looser_tolerance_truncates_prefix() {
        let spec = chain_mk_k2();
        for i in 0..200 {
            let tight = sample_r(&spec, &mut replica_rng(5, i), 1e-12).unwrap();
            let loose = sample_r(&spec, &mut replica_rng(5, i), 1e-7).unwrap();
            assert!(loose <= tight);
        }
    }

    #[test]
    fn hill_on_pareto() {
        let s = pareto(2.0, 1_000_000, 1);
        let h = hill_estimator(&s, 0.01).unwrap();
        assert!((h.index - 2.0).abs() < 0.1, "{h:?}");
        let s = pareto(0.5, 1_000_000, 2);
        let h = hill_estimator(&s, 0.01).unwrap();
        assert!((h.index - 0.5).abs() < 0.03, "{h:?}");
        assert!(hill_plateau(&s).unwrap().plateau);
    }

    #[test]
    fn hill_errors() {
        assert!(hill_estimator(&[1.0; 10], 0.1).is_err());
        assert!(hill_estimator(&[1.0; 2000], 0.1).is_err());
        assert!(hill_estimator(&pareto(1.0, 2000, 3), 0.5).is_err());
    }

    #[test]
    fn exponential_has_no_plateau() {
        let mut rng = replica_rng(4, 0);
        let s: Vec<f64> = (0..1_000_000).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let p = hill_plateau(&s).unwrap();
        assert!(!p.plateau, "{p:?}");
        assert!(p.estimates.windows(2).all(|w| w[1].index > w[0].index));
    }

    #[test]
    fn pareto_tail_curve_is_flat() {
        // Two decades keep the grid inside the support at this sample size.
        let s: Vec<f64> = pareto(1.5, 1_000_000, 5).iter().map(|x| 100.0 * x).collect();
        let level = 100f64.powf(1.5);
        let opts = CurveOptions { decades: 2.0, ..CurveOptions::default() };
        let c = tail_curve(&s, 1.5, opts).unwrap();
        assert!(c.value.iter().all(|&v| (v / level - 1.0).abs() < 0.3), "{:?}", c.value);
        // Wrong exponent: the curve grows like t.
        let c = tail_curve(&s, 2.5, opts).unwrap();
        let growth = c.value.last().unwrap() / c.value[0];
        let span = c.t.last().unwrap() / c.t[0];
        assert!(growth > 0.5 * span && growth < 2.0 * span);
    }

    #[test]
    fn tilted_is_identity_on_single_state() {
        let spec = EnvironmentSpec::single_state(0.8, 0.1).unwrap();
        let r = 1.0 / (1.0 - spec.rho()[0]);
        let est = tilted_tail_sampler(&spec, 1.3, &[1.0], r - 0.01, 1000, 1, DEFAULT_TOL).unwrap();
        assert!((est.probability - 1.0).abs() < 1e-12);
        assert!(est.standard_error < 1e-12);
        let est = tilted_tail_sampler(&spec, 1.3, &[1.0], r + 0.01, 1000, 1, DEFAULT_TOL).unwrap();
        assert_eq!(est.probability, 0.0);
        assert!(!est.reliable);
    }

    #[test]
    fn tilted_matches_plain_below_median() {
        let spec = chain_mk_k2();
        let rep = crate::spectral::solve_kappa(&spec).unwrap();
        let plain = sample_r_batch(&spec, 200_000, 3, DEFAULT_TOL).unwrap();
        let u = crate::stats::median(&plain) * 0.8;
        let (p, se) = empirical_tail(&plain, u);
        let est = tilted_tail_sampler(&spec, rep.kappa, &rep.f_kappa, u, 200_000, 4, DEFAULT_TOL).unwrap();
        let comb = (se * se + est.standard_error.powi(2)).sqrt();
        assert!((est.probability - p).abs() < 4.0 * comb, "{} vs {p}", est.probability);
    }

    #[test]
    fn r_mean_small_sample() {
        let spec = chain_mk_k2();
        let s = sample_r_batch(&spec, 100_000, 7, DEFAULT_TOL).unwrap();
        let (m, se) = mean_and_se(&s);
        assert!((m - 24.0 / 7.0).abs() < 4.0 * se, "{m} +- {se}");
    }
}

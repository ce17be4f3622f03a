//! Stable laws `L_{kappa,b}`, the normalizations of `T_n` and `X_n`, and
//! Monte Carlo checks of the limit theorems.
//!
//! `L_{kappa,b}` has characteristic exponent
//! `-b |t|^kappa (1 + i sgn(t) f_kappa(t))` with `f_kappa = -tan(pi kappa / 2)`
//! for `kappa != 1` and `f_1(t) = (2/pi) log|t|`: the totally right-skewed
//! stable law with scale `b^{1/kappa}`, supported on the positive reals when
//! `kappa < 1` and centered when `kappa > 1`.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::Serialize;

use crate::envmodel::{detect_arithmetic, EnvironmentSpec};
use crate::error::{Result, RwreError};
use crate::quadrature::integrate_panels;
use crate::rng::sub_seed;
use crate::spectral::solve_kappa;
use crate::speed::speed_with_kappa;
use crate::stats::{linear_fit, median, quantile, LinearFit};
use crate::tails::{hill_estimator, HillEstimate};
use crate::walksim::{annealed_hitting_sample, annealed_hitting_sample_fast, annealed_position_sample};

/// Absolute accuracy of [`stable_cdf`].
pub const CDF_TOL: f64 = 1e-8;
/// Accuracy asked of each inversion integral (the CDF error is `1/pi` of it).
const INTEGRAL_TOL: f64 = 1e-9;
/// The Gil-Pelaez integral is cut where `exp(-b t^kappa) < exp(-ENVELOPE)`.
const ENVELOPE: f64 = 30.0;
/// Above this many half-oscillations of the Gil-Pelaez integrand
/// [`stable_cdf`] switches to the Zolotarev integral.
pub const MAX_GP_PANELS: usize = 2000;
/// Distance from 1 and 2 within which `kappa` is treated as exactly 1 or 2.
pub const REGIME_TOL: f64 = 1e-9;
pub const KS_T_THRESHOLD: f64 = 0.05;
pub const KS_X_THRESHOLD: f64 = 0.07;
pub const MAX_CENSORING: f64 = 0.01;
/// Tolerance on the Hill index of normalized hitting times for `kappa <= 1`.
pub const HILL_TOL: f64 = 0.15;
pub const DEFAULT_HILL_FRACTION: f64 = 0.05;
pub const MIN_FIT_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StableParams {
    pub kappa: f64,
    pub b: f64,
}

impl StableParams {
    pub fn new(kappa: f64, b: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa <= 2.0) {
            return Err(RwreError::BadParameter(format!("stable index {kappa} outside (0, 2]")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(RwreError::BadParameter(format!("stable scale b = {b} must be positive")));
        }
        Ok(Self { kappa, b })
    }

    fn is_one(&self) -> bool {
        (self.kappa - 1.0).abs() <= REGIME_TOL
    }

    fn is_two(&self) -> bool {
        (self.kappa - 2.0).abs() <= REGIME_TOL
    }

    /// `tan(pi kappa / 2)`, exactly 0 at `kappa = 2`.
    fn skew(&self) -> f64 {
        if self.is_two() {
            0.0
        } else {
            (FRAC_PI_2 * self.kappa).tan()
        }
    }

    /// Maps `x` to the standard (`b = 1`) variable.
    fn standardize(&self, x: f64) -> f64 {
        if self.is_one() {
            (x - 2.0 / PI * self.b * self.b.ln()) / self.b
        } else {
            x / self.b.powf(1.0 / self.kappa)
        }
    }
}

/// `P(L_{kappa,b} <= x)`.
pub fn stable_cdf(p: StableParams, x: f64) -> Result<f64> {
    if p.kappa < 1.0 - REGIME_TOL && x <= 0.0 {
        return Ok(0.0);
    }
    if gil_pelaez_panels(p, x) <= MAX_GP_PANELS {
        stable_cdf_gil_pelaez(p, x)
    } else {
        stable_cdf_zolotarev(p, x)
    }
}

pub fn gp_horizon(p: StableParams) -> f64 {
    (ENVELOPE / p.b).powf(1.0 / p.kappa)
}

pub fn gil_pelaez_panels(p: StableParams, x: f64) -> usize {
    let t = gp_horizon(p);
    let drift_phase = if p.is_one() { 2.0 / PI * p.b * t * t.ln().abs() } else { ENVELOPE * p.skew().abs() };
    let phase = drift_phase + x.abs() * t;
    (phase / PI).ceil().max(1.0).min(usize::MAX as f64 / 2.0) as usize
}

/// `F(x) = 1/2 - (1/pi) int_0^inf Im(e^{-itx} phi(t)) / t dt`, integrated
/// over panels of about half an oscillation each. For `kappa < 1` the
/// integral is taken in `s = t^kappa`, which removes the singularity at the
/// origin.
pub fn stable_cdf_gil_pelaez(p: StableParams, x: f64) -> Result<f64> {
    let (kappa, b) = (p.kappa, p.b);
    let horizon = gp_horizon(p);
    let panels = gil_pelaez_panels(p, x);
    if panels > 50 * MAX_GP_PANELS {
        return Err(RwreError::Quadrature { bound: f64::INFINITY, target: INTEGRAL_TOL });
    }
    let integral = if kappa >= 1.0 - REGIME_TOL {
        let one = p.is_one();
        let skew = p.skew();
        let f = move |t: f64| {
            if t <= 0.0 {
                return 0.0;
            }
            let tk = if one { t } else { t.powf(kappa) };
            let phase = if one { -2.0 / PI * b * t * t.ln() - t * x } else { b * tk * skew - t * x };
            (-b * tk).exp() * phase.sin() / t
        };
        let points: Vec<f64> = (0..=panels).map(|i| horizon * i as f64 / panels as f64).collect();
        integrate_panels(&f, &points, INTEGRAL_TOL)?.value
    } else {
        let skew = p.skew();
        let inv = 1.0 / kappa;
        let f = move |s: f64| {
            if s <= 0.0 {
                return inv * b * skew;
            }
            let phase = b * s * skew - x * s.powf(inv);
            inv * (-b * s).exp() * phase.sin() / s
        };
        let s_end = horizon.powf(kappa);
        let skew_panels = (b * skew.abs() * s_end / PI).ceil().max(1.0) as usize;
        let shift_panels = panels.saturating_sub(skew_panels).max(1);
        let mut points: Vec<f64> = (0..=skew_panels)
            .map(|i| s_end * i as f64 / skew_panels as f64)
            .chain((1..shift_panels).map(|i| (horizon * i as f64 / shift_panels as f64).powf(kappa)))
            .collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        integrate_panels(&f, &points, INTEGRAL_TOL)?.value
    };
    Ok((0.5 - integral / PI).clamp(0.0, 1.0))
}

/// Clamped logarithm for trigonometric factors that vanish at the ends of
/// the Zolotarev interval.
fn ln_pos(v: f64) -> f64 {
    v.max(1e-300).ln()
}

/// `log V(theta)` of Zolotarev's integral for `alpha != 1`.
fn ln_v(alpha: f64, theta0: f64, theta: f64) -> f64 {
    let e = alpha / (alpha - 1.0);
    ln_pos((alpha * theta0).cos()) / (alpha - 1.0)
        + e * (ln_pos(theta.cos()) - ln_pos((alpha * (theta0 + theta)).sin()))
        + ln_pos((alpha * theta0 + (alpha - 1.0) * theta).cos())
        - ln_pos(theta.cos())
}

/// `log V(theta)` for `alpha = 1`, `beta = 1`.
fn ln_v_one(theta: f64) -> f64 {
    (2.0 / PI).ln() + (FRAC_PI_2 + theta).ln() - ln_pos(theta.cos()) + (FRAC_PI_2 + theta) * theta.tan()
}

/// Exponent levels used as breakpoints in [`zolotarev_integral`].
const ZOLOTAREV_LEVELS: [f64; 9] = [-8.0, -4.0, -2.0, -1.0, 0.0, 0.5, 1.0, 2.0, 3.5];

/// `int_lo^{pi/2} exp(-exp(ln_c + ln V(theta))) d theta`, split where the
/// exponent crosses each of [`ZOLOTAREV_LEVELS`] (it is monotone in
/// `theta`).
fn zolotarev_integral(ln_c: f64, lo: f64, ln_v: impl Fn(f64) -> f64) -> Result<f64> {
    let hi = FRAC_PI_2;
    let s = |th: f64| ln_c + ln_v(th);
    let g = |th: f64| {
        let e = s(th);
        if e.is_nan() {
            0.0
        } else {
            (-e.exp()).exp()
        }
    };
    let span = hi - lo;
    let (a, b) = (lo + 1e-12 * span, hi - 1e-12 * span);
    let (sa, sb) = (s(a), s(b));
    let mut points = vec![lo];
    for level in ZOLOTAREV_LEVELS {
        let (da, db) = (sa - level, sb - level);
        if da.is_nan() || db.is_nan() || da.signum() == db.signum() {
            continue;
        }
        let (mut l, mut r) = (a, b);
        for _ in 0..200 {
            let m = 0.5 * (l + r);
            if (s(m) - level).signum() == da.signum() {
                l = m;
            } else {
                r = m;
            }
        }
        points.push(0.5 * (l + r));
    }
    points.push(hi);
    points.sort_by(f64::total_cmp);
    points.dedup();
    Ok(integrate_panels(&g, &points, INTEGRAL_TOL)?.value)
}

/// CDF of the standard (`b = 1`) law.
fn zolotarev_standard(alpha: f64, z: f64) -> Result<f64> {
    if (alpha - 1.0).abs() <= REGIME_TOL {
        let ln_c = -FRAC_PI_2 * z;
        return Ok(zolotarev_integral(ln_c, -FRAC_PI_2, ln_v_one)? / PI);
    }
    let e = alpha / (alpha - 1.0);
    if alpha < 1.0 {
        if z <= 0.0 {
            return Ok(0.0);
        }
        let th0 = FRAC_PI_2;
        let v = zolotarev_integral(e * z.ln(), -th0, |t| ln_v(alpha, th0, t))?;
        return Ok((v / PI).clamp(0.0, 1.0));
    }
    if z == 0.0 {
        return Ok(1.0 / alpha);
    }
    if z > 0.0 {
        let th0 = FRAC_PI_2 - PI / alpha;
        let v = zolotarev_integral(e * z.ln(), -th0, |t| ln_v(alpha, th0, t))?;
        Ok((1.0 - v / PI).clamp(0.0, 1.0))
    } else {
        // Reflection: F(z; beta = 1) = 1 - F(-z; beta = -1).
        let th0 = PI / alpha - FRAC_PI_2;
        let v = zolotarev_integral(e * (-z).ln(), -th0, |t| ln_v(alpha, th0, t))?;
        Ok((v / PI).clamp(0.0, 1.0))
    }
}

/// CDF through Zolotarev's non-oscillatory integral representation.
pub fn stable_cdf_zolotarev(p: StableParams, x: f64) -> Result<f64> {
    zolotarev_standard(p.kappa, p.standardize(x))
}

/// Median of `L_{1,1}`.
fn median_one() -> f64 {
    static MEDIAN: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *MEDIAN.get_or_init(|| {
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..80 {
            let m = 0.5 * (lo + hi);
            let f = zolotarev_standard(1.0, m).unwrap_or(0.5);
            if f < 0.5 {
                lo = m;
            } else {
                hi = m;
            }
        }
        0.5 * (lo + hi)
    })
}

/// Median of `L_{1,b}`.
pub fn median_kappa_one(b: f64) -> f64 {
    b * median_one() + 2.0 / PI * b * b.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `kappa` in (0, 1).
    Subunit,
    One,
    /// `kappa` in (1, 2).
    Between,
    Two,
}

impl Regime {
    pub fn from_kappa(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(RwreError::BadParameter(format!("kappa = {kappa}")));
        }
        if (kappa - 1.0).abs() <= REGIME_TOL {
            Ok(Regime::One)
        } else if (kappa - 2.0).abs() <= REGIME_TOL {
            Ok(Regime::Two)
        } else if kappa < 1.0 {
            Ok(Regime::Subunit)
        } else if kappa < 2.0 {
            Ok(Regime::Between)
        } else {
            Err(RwreError::OutOfScope(format!("kappa = {kappa} > 2: CLT regime, out of stable scope")))
        }
    }
}

/// Centering and scale at level `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizationSchedule {
    pub regime: Regime,
    pub kappa: f64,
    pub n: u64,
    pub center: f64,
    pub scale: f64,
}

impl NormalizationSchedule {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.center) / self.scale
    }
}

fn need_speed(regime: Regime, v_p: f64) -> Result<()> {
    if matches!(regime, Regime::Between | Regime::Two) && !(v_p > 0.0) {
        return Err(RwreError::BadParameter(format!("kappa > 1 needs a positive speed, got {v_p}")));
    }
    Ok(())
}

/// Schedule for `T_n`. For `kappa = 1`, `empirical_center` must carry the
/// sample median of `T_n` (the centering `n D(n)`).
pub fn normalization(
    kappa: f64,
    n: u64,
    v_p: f64,
    empirical_center: Option<f64>,
) -> Result<NormalizationSchedule> {
    let regime = Regime::from_kappa(kappa)?;
    need_speed(regime, v_p)?;
    let nf = n as f64;
    let (center, scale) = match regime {
        Regime::Subunit => (0.0, nf.powf(1.0 / kappa)),
        Regime::One => {
            let c = empirical_center
                .ok_or_else(|| RwreError::BadParameter("kappa = 1 needs the empirical centering".into()))?;
            (c, nf)
        }
        Regime::Between => (nf / v_p, nf.powf(1.0 / kappa)),
        Regime::Two => (nf / v_p, (nf * nf.ln()).sqrt()),
    };
    Ok(NormalizationSchedule { regime, kappa, n, center, scale })
}

/// Schedule for `X_n`: `n^kappa`; `delta(n)` with `n / (log n)^2`;
/// `n v_P` with `n^{1/kappa}`; `n v_P` with `(n log n)^{1/2}`.
pub fn position_normalization(
    kappa: f64,
    n: u64,
    v_p: f64,
    empirical_center: Option<f64>,
) -> Result<NormalizationSchedule> {
    let regime = Regime::from_kappa(kappa)?;
    need_speed(regime, v_p)?;
    let nf = n as f64;
    let (center, scale) = match regime {
        Regime::Subunit => (0.0, nf.powf(kappa)),
        Regime::One => {
            let c = empirical_center
                .ok_or_else(|| RwreError::BadParameter("kappa = 1 needs the empirical centering".into()))?;
            (c, nf / nf.ln().powi(2))
        }
        Regime::Between => (nf * v_p, nf.powf(1.0 / kappa)),
        Regime::Two => (nf * v_p, (nf * nf.ln()).sqrt()),
    };
    Ok(NormalizationSchedule { regime, kappa, n, center, scale })
}

/// The limit law a normalized sample is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LawFamily {
    /// `L_{kappa,b}(x)`.
    Direct,
    /// `L_{kappa,b}` shifted to zero median.
    MedianCentered,
    /// `1 - L_{kappa,b}(z^{-1/kappa})` for `z > 0`, else 0.
    InverseSubunit,
    /// `1 - L_{kappa,b}(-z)`.
    Reflected,
    /// `1 - L_{kappa,b}(m_b - z)` with `m_b` the median.
    ReflectedMedian,
}

pub fn family_cdf(family: LawFamily, p: StableParams, x: f64) -> Result<f64> {
    family_cdf_with(family, p, x, |z| zolotarev_or_gp(p.kappa, z))
}

/// Standard CDF through [`stable_cdf`].
fn zolotarev_or_gp(kappa: f64, z: f64) -> Result<f64> {
    stable_cdf(StableParams { kappa, b: 1.0 }, z)
}

/// [`family_cdf`] with the standard (`b = 1`) CDF supplied by `standard`.
fn family_cdf_with(
    family: LawFamily,
    p: StableParams,
    x: f64,
    standard: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    let f = |y: f64| {
        if p.kappa < 1.0 - REGIME_TOL && y <= 0.0 {
            Ok(0.0)
        } else {
            standard(p.standardize(y))
        }
    };
    match family {
        LawFamily::Direct => f(x),
        LawFamily::MedianCentered => f(x + median_kappa_one(p.b)),
        LawFamily::InverseSubunit => {
            if x <= 0.0 {
                Ok(0.0)
            } else {
                Ok(1.0 - f(x.powf(-1.0 / p.kappa))?)
            }
        }
        LawFamily::Reflected => Ok(1.0 - f(-x)?),
        LawFamily::ReflectedMedian => Ok(1.0 - f(median_kappa_one(p.b) - x)?),
    }
}

/// Half-width of the [`StandardTable`] grid in `asinh z`.
const TABLE_SPAN: f64 = 60.0;
/// Nodes of the [`StandardTable`] grid.
const TABLE_NODES: usize = 24_001;

/// `F_{kappa,1}` tabulated on a uniform grid in `asinh z`, linearly
/// interpolated.
struct StandardTable {
    values: Vec<f64>,
    step: f64,
}

impl StandardTable {
    fn new(kappa: f64) -> Result<Self> {
        let step = 2.0 * TABLE_SPAN / (TABLE_NODES - 1) as f64;
        let values = (0..TABLE_NODES)
            .into_par_iter()
            .map(|i| zolotarev_or_gp(kappa, (-TABLE_SPAN + step * i as f64).sinh()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { values, step })
    }

    fn eval(&self, z: f64) -> f64 {
        let pos = (z.asinh() + TABLE_SPAN) / self.step;
        if !(pos > 0.0) {
            return self.values[0];
        }
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return self.values[self.values.len() - 1];
        }
        let w = pos - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

/// `sup |F_n - F|` for sorted data and `F` evaluated at each point.
fn ks_from_values(sorted: &[f64], cdf: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        d = d.max((cdf[i] - i as f64 / n).abs()).max((j as f64 / n - cdf[i]).abs());
        i = j;
    }
    d
}

fn family_values(family: LawFamily, p: StableParams, sorted: &[f64]) -> Result<Vec<f64>> {
    sorted.par_iter().map(|&x| family_cdf(family, p, x)).collect()
}

/// KS distance of a sample to a family member.
pub fn ks_to_family(samples: &[f64], family: LawFamily, p: StableParams) -> Result<f64> {
    let mut v: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    Ok(ks_from_values(&v, &family_values(family, p, &v)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BFit {
    pub b: f64,
    pub ks: f64,
}

/// `b` minimizing the KS distance to `L_{kappa,b}`.
pub fn fit_b(samples: &[f64], kappa: f64) -> Result<BFit> {
    fit_b_family(samples, kappa, LawFamily::Direct)
}

/// Coarse scan over `log b` followed by golden-section refinement.
pub fn fit_b_family(samples: &[f64], kappa: f64, family: LawFamily) -> Result<BFit> {
    let mut v: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    if v.len() < MIN_FIT_SAMPLES {
        return Err(RwreError::InsufficientData(format!(
            "{} samples; fitting needs at least {MIN_FIT_SAMPLES}",
            v.len()
        )));
    }
    v.sort_by(f64::total_cmp);
    let iqr = quantile(&v, 0.75) - quantile(&v, 0.25);
    if !(iqr > 0.0) {
        return Err(RwreError::InsufficientData("degenerate samples (zero spread)".into()));
    }
    StableParams::new(kappa, 1.0)?;
    let table = StandardTable::new(kappa)?;
    let center = match family {
        LawFamily::InverseSubunit => -median(&v).max(f64::MIN_POSITIVE).ln(),
        _ => kappa * (0.5 * iqr).ln(),
    };
    let objective = |lb: f64| -> Result<f64> {
        let p = StableParams::new(kappa, lb.exp())?;
        let cdf = v
            .iter()
            .map(|&x| family_cdf_with(family, p, x, |z| Ok(table.eval(z))))
            .collect::<Result<Vec<_>>>()?;
        Ok(ks_from_values(&v, &cdf))
    };
    let width = 8.0;
    let steps = 33;
    let grid: Vec<f64> =
        (0..steps).map(|i| center - width + 2.0 * width * i as f64 / (steps - 1) as f64).collect();
    let vals = grid.iter().map(|&g| objective(g)).collect::<Result<Vec<_>>>()?;
    let best = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    let (mut a, mut d) = (grid[best.saturating_sub(1)], grid[(best + 1).min(steps - 1)]);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut b = d - phi * (d - a);
    let mut c = a + phi * (d - a);
    let (mut fb, mut fc) = (objective(b)?, objective(c)?);
    for _ in 0..40 {
        if fb <= fc {
            d = c;
            c = b;
            fc = fb;
            b = d - phi * (d - a);
            fb = objective(b)?;
        } else {
            a = b;
            b = c;
            fb = fc;
            c = a + phi * (d - a);
            fc = objective(c)?;
        }
    }
    let (lb, ks) = if fb <= fc { (b, fb) } else { (c, fc) };
    let lb = if vals[best] < ks { grid[best] } else { lb };
    let ks = ks_to_family(&v, family, StableParams::new(kappa, lb.exp())?)?;
    Ok(BFit { b: lb.exp(), ks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    T,
    X,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitCheckReport {
    pub side: Side,
    pub regime: Regime,
    pub kappa: f64,
    pub v_p: f64,
    pub n: u64,
    pub replicas: u64,
    pub schedule: NormalizationSchedule,
    pub family: LawFamily,
    /// `b` used for the reported KS distance.
    pub b: f64,
    pub ks: f64,
    /// On the X side: `b` fitted to the position sample itself.
    pub b_direct: Option<f64>,
    pub ks_direct: Option<f64>,
    pub threshold: f64,
    pub hill: Option<HillEstimate>,
    pub censoring_fraction: f64,
    pub censoring_flagged: bool,
    pub arithmetic_warning: bool,
    pub pass: bool,
    pub normalized: Vec<f64>,
    pub fitted_cdf: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct LimitOptions {
    pub threshold: f64,
    /// Use the stepping walker instead of the excursion-count sampler.
    pub reference_walk: bool,
    pub step_cap: u64,
    pub hill_fraction: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self {
            threshold: KS_T_THRESHOLD,
            reference_walk: false,
            step_cap: crate::walksim::DEFAULT_STEP_CAP,
            hill_fraction: DEFAULT_HILL_FRACTION,
        }
    }
}

fn pass_rule(regime: Regime, ks: f64, threshold: f64, kappa: f64, hill: Option<&HillEstimate>) -> bool {
    match regime {
        Regime::Between | Regime::Two => ks < threshold,
        Regime::Subunit | Regime::One => hill.is_some_and(|h| (h.index - kappa).abs() <= HILL_TOL),
    }
}

/// Spectral and speed data a limit check needs.
#[derive(Debug, Clone, Copy)]
struct ChainConstants {
    kappa: f64,
    v_p: f64,
    regime: Regime,
    arithmetic: bool,
}

fn chain_constants(spec: &EnvironmentSpec) -> Result<ChainConstants> {
    let kappa = solve_kappa(spec)?.kappa;
    let regime = Regime::from_kappa(kappa)?;
    let v_p = speed_with_kappa(spec, kappa)?.v_p;
    let arithmetic = !detect_arithmetic(spec)?.is_non_arithmetic();
    if arithmetic {
        log::warn!("arithmetic environment: limit constants may oscillate");
    }
    Ok(ChainConstants { kappa, v_p, regime, arithmetic })
}

/// Simulates `T_n` over `replicas` environments, normalizes, fits `b` and
/// reports the KS distance (and, for `kappa <= 1`, the Hill index).
pub fn limit_check_t(
    spec: &EnvironmentSpec,
    n: u64,
    replicas: u64,
    seed: u64,
    opts: LimitOptions,
) -> Result<LimitCheckReport> {
    let cc = chain_constants(spec)?;
    let draws = if opts.reference_walk {
        annealed_hitting_sample(spec, n, replicas, seed, opts.step_cap)?
    } else {
        annealed_hitting_sample_fast(spec, n, replicas, seed)?
    };
    let censored = draws.iter().filter(|d| d.censored).count();
    let t: Vec<f64> = draws.iter().filter(|d| !d.censored).map(|d| d.t_n as f64).collect();
    let censoring_fraction = censored as f64 / replicas.max(1) as f64;
    let empirical = (cc.regime == Regime::One).then(|| median(&t));
    let schedule = normalization(cc.kappa, n, cc.v_p, empirical)?;
    let normalized: Vec<f64> = t.iter().map(|&x| schedule.apply(x)).collect();
    let family = if cc.regime == Regime::One { LawFamily::MedianCentered } else { LawFamily::Direct };
    let fit = fit_b_family(&normalized, cc.kappa, family)?;
    let hill = match cc.regime {
        Regime::Subunit | Regime::One => Some(hill_estimator(&normalized, opts.hill_fraction)?),
        _ => None,
    };
    let p = StableParams::new(cc.kappa, fit.b)?;
    let fitted_cdf = normalized.par_iter().map(|&x| family_cdf(family, p, x)).collect::<Result<_>>()?;
    Ok(LimitCheckReport {
        side: Side::T,
        regime: cc.regime,
        kappa: cc.kappa,
        v_p: cc.v_p,
        n,
        replicas,
        schedule,
        family,
        b: fit.b,
        ks: fit.ks,
        b_direct: None,
        ks_direct: None,
        threshold: opts.threshold,
        pass: pass_rule(cc.regime, fit.ks, opts.threshold, cc.kappa, hill.as_ref())
            && censoring_fraction <= MAX_CENSORING,
        hill,
        censoring_fraction,
        censoring_flagged: censoring_fraction > MAX_CENSORING,
        arithmetic_warning: cc.arithmetic,
        normalized,
        fitted_cdf,
    })
}

/// `b` of the position law at level `n` implied by the hitting-time fit:
/// unchanged for `kappa < 1`, times `v_P^{kappa+1}` for `kappa` in (1, 2),
/// times `v_P^3 log(n v_P) / log n` at 2; none at 1.
pub fn transfer_b(kappa: f64, b_t: f64, v_p: f64, n: u64) -> Result<Option<f64>> {
    Ok(match Regime::from_kappa(kappa)? {
        Regime::Subunit => Some(b_t),
        Regime::One => None,
        Regime::Between => Some(b_t * v_p.powf(kappa + 1.0)),
        Regime::Two => {
            let sites = n as f64 * v_p;
            if !(sites > 1.0 && n > 1) {
                return Err(RwreError::BadParameter(format!(
                    "kappa = 2 transfer needs n v_P > 1, got n = {n}, v_P = {v_p}"
                )));
            }
            Some(b_t * v_p.powi(3) * sites.ln() / (n as f64).ln())
        }
    })
}

pub fn transfer_t_to_x(
    t_report: &LimitCheckReport,
    positions: &[f64],
    n: u64,
    threshold: f64,
) -> Result<LimitCheckReport> {
    let (kappa, v_p, regime) = (t_report.kappa, t_report.v_p, t_report.regime);
    let empirical = (regime == Regime::One).then(|| median(positions));
    let schedule = position_normalization(kappa, n, v_p, empirical)?;
    let normalized: Vec<f64> = positions.iter().map(|&x| schedule.apply(x)).collect();
    let family = match regime {
        Regime::Subunit => LawFamily::InverseSubunit,
        Regime::One => LawFamily::ReflectedMedian,
        Regime::Between => LawFamily::Reflected,
        Regime::Two => LawFamily::Direct,
    };
    let direct = fit_b_family(&normalized, kappa, family)?;
    let (b, ks) = match transfer_b(kappa, t_report.b, v_p, n)? {
        Some(b) => (b, ks_to_family(&normalized, family, StableParams::new(kappa, b)?)?),
        None => (direct.b, direct.ks),
    };
    let p = StableParams::new(kappa, b)?;
    let fitted_cdf = normalized.par_iter().map(|&x| family_cdf(family, p, x)).collect::<Result<_>>()?;
    Ok(LimitCheckReport {
        side: Side::X,
        regime,
        kappa,
        v_p,
        n,
        replicas: positions.len() as u64,
        schedule,
        family,
        b,
        ks,
        b_direct: Some(direct.b),
        ks_direct: Some(direct.ks),
        threshold,
        hill: None,
        censoring_fraction: 0.0,
        censoring_flagged: false,
        arithmetic_warning: t_report.arithmetic_warning,
        pass: ks < threshold,
        normalized,
        fitted_cdf,
    })
}

/// Hitting-time check at `n`, then positions at time `n` on an independent
/// seed, transferred through the fitted `b`.
pub fn limit_check_x(
    spec: &EnvironmentSpec,
    n: u64,
    replicas: u64,
    seed: u64,
    opts: LimitOptions,
    x_threshold: f64,
) -> Result<(LimitCheckReport, LimitCheckReport)> {
    let t = limit_check_t(spec, n, replicas, seed, opts)?;
    let x: Vec<f64> = annealed_position_sample(spec, n, replicas, sub_seed(seed, 3))?
        .into_iter()
        .map(|v| v as f64)
        .collect();
    let xr = transfer_t_to_x(&t, &x, n, x_threshold)?;
    Ok((t, xr))
}

/// `median(T_n) / n^{1/kappa}` at each `n`.
pub fn median_scaling(
    spec: &EnvironmentSpec,
    kappa: f64,
    ns: &[u64],
    replicas: u64,
    seed: u64,
) -> Result<Vec<(u64, f64)>> {
    ns.iter()
        .enumerate()
        .map(|(i, &n)| {
            let t = annealed_hitting_sample_fast(spec, n, replicas, sub_seed(seed, i as u64))?;
            let v: Vec<f64> = t.iter().filter(|d| !d.censored).map(|d| d.t_n as f64).collect();
            Ok((n, median(&v) / (n as f64).powf(1.0 / kappa)))
        })
        .collect()
}

/// Regression of `median(T_n) / n` on `log n`; at `kappa = 1` its slope is
/// the empirical proxy for `c_0` in `D(n) ~ c_0 log n`.
pub fn kappa_one_centering(
    spec: &EnvironmentSpec,
    ns: &[u64],
    replicas: u64,
    seed: u64,
) -> Result<LinearFit> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let t = annealed_hitting_sample_fast(spec, n, replicas, sub_seed(seed, i as u64))?;
        let v: Vec<f64> = t.iter().filter(|d| !d.censored).map(|d| d.t_n as f64).collect();
        x.push((n as f64).ln());
        y.push(median(&v) / n as f64);
    }
    Ok(linear_fit(&x, &y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use crate::rng::replica_rng;
    use crate::stats::{erfc, normal_cdf};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn levy_cdf(c: f64, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            erfc((c / (2.0 * x)).sqrt())
        }
    }

    #[test]
    fn gaussian_case() {
        let p = StableParams::new(2.0, 0.7).unwrap();
        assert!((stable_cdf(p, 0.0).unwrap() - 0.5).abs() < 1e-9);
        let sd = (2.0 * p.b).sqrt();
        for i in -20..=20 {
            let x = 0.25 * i as f64 * sd;
            let f = stable_cdf(p, x).unwrap();
            assert!((f - normal_cdf(x / sd)).abs() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn levy_case() {
        for b in [0.5, 1.0, 2.0] {
            let p = StableParams::new(0.5, b).unwrap();
            let c = b * b;
            for x in [1e-3, 0.05, 0.3, 1.0, 3.0, 10.0, 100.0, 1e4] {
                let f = stable_cdf(p, x).unwrap();
                assert!((f - levy_cdf(c, x)).abs() < 1e-8, "b = {b}, x = {x}: {f}");
            }
            assert_eq!(stable_cdf(p, -1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn both_representations_agree() {
        for kappa in [0.3, 0.7, 1.0, 1.3, 1.5, 1.9, 2.0] {
            for b in [0.4, 1.0, 2.5] {
                let p = StableParams::new(kappa, b).unwrap();
                for x in [-3.0, -0.7, -0.1, 0.1, 0.5, 1.5, 4.0, 12.0] {
                    if (kappa < 1.0 && x <= 0.0) || gil_pelaez_panels(p, x) > MAX_GP_PANELS {
                        continue;
                    }
                    let g = stable_cdf_gil_pelaez(p, x).unwrap();
                    let z = stable_cdf_zolotarev(p, x).unwrap();
                    assert!((g - z).abs() < 1e-8, "kappa {kappa} b {b} x {x}: {g} vs {z}");
                }
            }
        }
    }

    #[test]
    fn scaling_identity() {
        for kappa in [0.5, 1.5, 2.0] {
            let s: f64 = 2.0;
            for x in [0.05, 0.4, 1.0, 3.0, -0.5, -2.0] {
                let a = stable_cdf(StableParams::new(kappa, 0.8).unwrap(), x).unwrap();
                let b = stable_cdf(StableParams::new(kappa, s.powf(kappa) * 0.8).unwrap(), s * x).unwrap();
                assert!((a - b).abs() < 1e-8, "kappa {kappa} x {x}");
            }
        }
    }

    #[test]
    fn right_skew_median_below_zero_mean() {
        // Zero mean and a heavy right tail force P(X <= 0) = 1/kappa > 1/2.
        for kappa in [1.2, 1.5, 1.8] {
            let p = StableParams::new(kappa, 1.0).unwrap();
            assert!((stable_cdf(p, 0.0).unwrap() - 1.0 / kappa).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_mean_between_one_and_two() {
        // mean = int_0^L (1 - F) - int_{-L}^0 F + right-tail remainder,
        // with P(X > x) ~ 2 b Gamma(kappa) sin(pi kappa / 2) / pi x^{-kappa}.
        let kappa = 1.5;
        let p = StableParams::new(kappa, 1.0).unwrap();
        let l: f64 = 1e6;
        let right = integrate(
            &|s: f64| {
                let x = s.exp();
                (1.0 - stable_cdf(p, x).unwrap()) * x
            },
            (1e-8f64).ln(),
            l.ln(),
            1e-8,
        )
        .unwrap()
        .value;
        let left = integrate(&|x: f64| stable_cdf(p, x).unwrap(), -40.0, 0.0, 1e-8).unwrap().value;
        let c = 2.0 * libm::tgamma(kappa) * (FRAC_PI_2 * kappa).sin() / PI;
        let remainder = c * l.powf(1.0 - kappa) / (kappa - 1.0);
        let mean = right - left + remainder;
        assert!(mean.abs() < 1e-4, "{mean}");
    }

    #[test]
    fn cdf_monotone_with_limits() {
        for kappa in [0.6, 1.0, 1.6] {
            let p = StableParams::new(kappa, 1.0).unwrap();
            let mut prev = 0.0;
            for i in -40..=40 {
                let x = 0.5 * i as f64;
                let f = stable_cdf(p, x).unwrap();
                assert!(f >= prev - 1e-9, "kappa {kappa} x {x}");
                prev = f;
            }
            assert!(stable_cdf(p, -1e6).unwrap() < 1e-6);
            assert!(stable_cdf(p, 1e8).unwrap() > 1.0 - 1e-4);
        }
    }

    #[test]
    fn normalization_examples() {
        let s = normalization(2.0, 10_000, 7.0 / 41.0, None).unwrap();
        assert!((s.center - 1e4 * 41.0 / 7.0).abs() < 1e-6);
        assert!((s.scale - (1e4 * (1e4f64).ln()).sqrt()).abs() < 1e-9);
        let s = normalization(0.5, 10_000, 0.0, None).unwrap();
        assert_eq!(s.center, 0.0);
        assert!((s.scale - 1e8).abs() < 1e-3);
        assert!(matches!(normalization(3.0, 10, 0.5, None), Err(RwreError::OutOfScope(_))));
        assert!(normalization(1.0, 10, 0.0, None).is_err());
        assert!(normalization(1.5, 10, 0.0, None).is_err());
    }

    #[test]
    fn fit_gaussian_and_scaling() {
        let b0: f64 = 1.7;
        let mut rng = replica_rng(21, 0);
        let sd = (2.0 * b0).sqrt();
        let z: Vec<f64> = (0..10_000).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
        let fit = fit_b(&z, 2.0).unwrap();
        assert!((fit.b / b0 - 1.0).abs() < 0.1, "{fit:?}");
        let scaled: Vec<f64> = z.iter().map(|v| 3.0 * v).collect();
        let fit3 = fit_b(&scaled, 2.0).unwrap();
        assert!((fit3.b / (9.0 * fit.b) - 1.0).abs() < 0.02, "{fit3:?} vs {fit:?}");
    }

    #[test]
    fn fit_levy() {
        let c: f64 = 2.0;
        let mut rng = replica_rng(22, 0);
        // Levy(c) is c / N^2.
        let s: Vec<f64> = (0..10_000)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                c / (g * g)
            })
            .collect();
        let fit = fit_b(&s, 0.5).unwrap();
        assert!((fit.b / c.sqrt() - 1.0).abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn fit_rejects_degenerate() {
        assert!(fit_b(&[1.0; 2000], 2.0).is_err());
        assert!(fit_b(&[1.0, 2.0], 2.0).is_err());
    }

    #[test]
    fn transfer_maps() {
        assert_eq!(transfer_b(0.5, 2.0, 0.0, 100).unwrap(), Some(2.0));
        let b = transfer_b(1.5, 1.0, 0.25, 100).unwrap().unwrap();
        assert!((b - 0.25f64.powf(2.5)).abs() < 1e-15);
        // n = 10^4, v = 1/10: log(10^3) / log(10^4) = 3/4.
        let b = transfer_b(2.0, 1.0, 0.1, 10_000).unwrap().unwrap();
        assert!((b - 0.75e-3).abs() < 1e-15);
        assert!(transfer_b(2.0, 1.0, 0.1, 5).is_err());
        assert_eq!(transfer_b(1.0, 1.0, 0.0, 100).unwrap(), None);
    }

    #[test]
    fn inverse_subunit_family_is_a_cdf() {
        let p = StableParams::new(0.5, 1.0).unwrap();
        let mut prev = 0.0;
        for i in 1..50 {
            let z = 0.1 * i as f64;
            let g = family_cdf(LawFamily::InverseSubunit, p, z).unwrap();
            assert!(g >= prev);
            prev = g;
        }
        assert_eq!(family_cdf(LawFamily::InverseSubunit, p, -1.0).unwrap(), 0.0);
    }

    #[test]
    fn kappa_one_median() {
        let m = median_kappa_one(1.3);
        let f = stable_cdf(StableParams::new(1.0, 1.3).unwrap(), m).unwrap();
        assert!((f - 0.5).abs() < 1e-8);
    }
}

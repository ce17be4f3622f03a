use std::fmt::Write as _;
use std::path::Path;

use rwre_core::branching::{finite_variance_atom, regeneration_sample};
use rwre_core::limitlaws::{limit_check_t, limit_check_x, LimitOptions, KS_X_THRESHOLD};
use rwre_core::spectral::DEFAULT_COIN;
use rwre_core::speed::speed_cross_check;
use rwre_core::tails::{sample_r_batch, tail_report, tilted_tail_sampler};
use rwre_core::walksim::annealed_hitting_sample;
use rwre_core::{
    solve_kappa, speed, stationary_distribution, validate, EnvironmentSpec, LimitCheckReport, Result,
    RwreError,
};

use crate::args::SideArg;
use crate::output::{fmt_vec, Table};

/// What a subcommand produced.
pub struct Outcome {
    pub summary: String,
    pub table: Table,
    /// Set when the command ran but the model fails a check.
    pub validation_failed: bool,
}

impl Outcome {
    fn ok(summary: String, table: Table) -> Self {
        Self { summary, table, validation_failed: false }
    }
}

pub fn validate_cmd(spec: &EnvironmentSpec) -> Result<Outcome> {
    let report = validate(spec)?;
    let mut s = String::new();
    writeln!(s, "states: {}", spec.len()).ok();
    writeln!(s, "irreducible: {}", report.irreducible).ok();
    if !report.irreducible {
        writeln!(s, "components: {:?}", report.components).ok();
    }
    writeln!(s, "ellipticity margin: {}", report.ellipticity_margin).ok();
    if let Some(d) = report.drift {
        let dir = if d < 0.0 { "transient to the right" } else { "not transient to the right" };
        writeln!(s, "drift E_pi(log rho): {d:.12} ({dir})").ok();
    }
    writeln!(s, "Lambda < 0 at beta: {:?}", report.a3_negative_beta).ok();
    writeln!(s, "Lambda >= 0 at beta: {:?}", report.a3_nonnegative_beta).ok();
    if let Some(a) = &report.arithmetic {
        writeln!(s, "arithmetic: {a:?}").ok();
        if !a.is_non_arithmetic() {
            writeln!(s, "warning: lattice environment, limit constants may oscillate").ok();
        }
    }
    let ok = report.has_index();
    writeln!(s, "result: {}", if ok { "valid" } else { "INVALID" }).ok();

    let mut table = Table::new(&["state", "name", "omega", "rho", "pi"]);
    if report.irreducible {
        let pi = stationary_distribution(spec.transition())?;
        for (x, name) in spec.states().iter().enumerate() {
            table.row(&[&x, name, &spec.omega()[x], &spec.rho()[x], &pi[x]]);
        }
    }
    Ok(Outcome { summary: s, table, validation_failed: !ok })
}

pub fn kappa_cmd(spec: &EnvironmentSpec) -> Result<Outcome> {
    let r = solve_kappa(spec)?;
    let mut s = String::new();
    writeln!(s, "kappa={:.12}", r.kappa).ok();
    writeln!(s, "Lambda(kappa)={:e}", r.lambda_at_kappa).ok();
    writeln!(s, "eigenvector={}", fmt_vec(&r.f_kappa)).ok();
    writeln!(s, "regeneration state={} coin={}", r.regen_state, r.coin).ok();
    writeln!(s, "r(Theta_kappa)={:.12}", r.theta_kappa_radius).ok();
    if r.period_regularized {
        writeln!(s, "note: periodic chain, lazy version used for the eigenvector").ok();
    }
    let mut table = Table::new(&["beta", "lambda", "radius"]);
    for g in &r.grid {
        table.row(&[&g.beta, &g.lambda, &g.radius]);
    }
    Ok(Outcome::ok(s, table))
}

pub fn speed_cmd(
    spec: &EnvironmentSpec,
    samples: Option<u64>,
    samples_file: Option<&Path>,
    tol: f64,
    seed: u64,
) -> Result<Outcome> {
    let report = speed(spec)?;
    let mut s = String::new();
    writeln!(s, "kappa={:.12}", report.kappa).ok();
    writeln!(s, "v_P={:.12}", report.v_p).ok();
    match &report.xi {
        Some(xi) => writeln!(s, "xi={}", fmt_vec(xi)).ok(),
        None => writeln!(s, "xi: unbounded (zero speed)").ok(),
    };
    let r = match (samples, samples_file) {
        (Some(count), _) => Some(sample_r_batch(spec, count, seed, tol)?),
        (None, Some(path)) => Some(read_samples(path)?),
        (None, None) => None,
    };
    if let Some(r) = r {
        let c = speed_cross_check(&report, &r)?;
        writeln!(
            s,
            "cross-check: 1/v_P={:.6} 2E(R)-1={:.6} +/- {:.6} (z={:.2}, {})",
            c.inverse_speed,
            c.estimate,
            c.standard_error,
            c.z,
            if c.consistent { "consistent" } else { "INCONSISTENT" }
        )
        .ok();
    }
    let mut table = Table::new(&["state", "xi"]);
    if let Some(xi) = &report.xi {
        for (x, v) in xi.iter().enumerate() {
            table.row(&[&x, v]);
        }
    }
    Ok(Outcome::ok(s, table))
}

/// One number per line; blank lines, `#` lines and a non-numeric header
/// are skipped.
fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {}
            Err(_) => return Err(RwreError::BadParameter(format!("line {}: not a number", i + 1))),
        }
    }
    Ok(out)
}

pub fn walk_cmd(spec: &EnvironmentSpec, n: u64, replicas: u64, seed: u64, step_cap: u64) -> Result<Outcome> {
    let draws = annealed_hitting_sample(spec, n, replicas, seed, step_cap)?;
    let done: Vec<f64> = draws.iter().filter(|d| !d.censored).map(|d| d.t_n as f64).collect();
    let censored = draws.len() - done.len();
    let mut s = String::new();
    writeln!(s, "n={n} replicas={replicas} censored={censored}").ok();
    if !done.is_empty() {
        let (mean, se) = rwre_core::stats::mean_and_se(&done);
        writeln!(s, "mean T_n/n={:.6} +/- {:.6}", mean / n as f64, se / n as f64).ok();
        writeln!(s, "median T_n={}", rwre_core::stats::median(&done)).ok();
    }
    let mut table = Table::new(&["replica", "T_n", "steps", "censored"]);
    for d in &draws {
        table.row(&[&d.replica, &d.t_n, &d.steps, &u8::from(d.censored)]);
    }
    Ok(Outcome::ok(s, table))
}

pub fn branching_cmd(spec: &EnvironmentSpec, horizon: u64, replicas: u64, seed: u64) -> Result<Outcome> {
    let k = solve_kappa(spec)?;
    let (x_star, coin) = match finite_variance_atom(spec, k.kappa, &[DEFAULT_COIN, 0.9])? {
        Some(atom) => atom,
        None => {
            log::warn!("no atom with finite-variance M^kappa; E[M^kappa] estimate is unreliable");
            (k.regen_state, k.coin)
        }
    };
    let sample = regeneration_sample(spec, horizon as usize, replicas, seed, x_star, coin)?;
    let (m_mean, m_se) = sample.m_kappa_mean(k.kappa);
    let mut s = String::new();
    writeln!(s, "kappa={:.12}", k.kappa).ok();
    writeln!(s, "regeneration state={x_star} coin={coin}").ok();
    writeln!(s, "generations={horizon} replicas={replicas} explosions={}", sample.explosions).ok();
    writeln!(s, "common regeneration blocks={}", sample.bar_blocks.len()).ok();
    writeln!(s, "chain blocks={} E[M^kappa]={m_mean:.6} +/- {m_se:.6}", sample.chain_blocks.len()).ok();
    let mut table = Table::new(&["block", "gap", "w_bar", "m", "q"]);
    for (i, b) in sample.bar_blocks.iter().enumerate() {
        table.row(&[&i, &b.gap, &b.w_bar, &b.log_m.exp(), &b.log_q.exp()]);
    }
    Ok(Outcome::ok(s, table))
}

pub struct TailsArgs<'a> {
    pub samples: u64,
    pub tol: f64,
    pub top_fraction: f64,
    pub threshold: Option<f64>,
    pub dump: Option<&'a Path>,
}

pub fn tails_cmd(spec: &EnvironmentSpec, a: TailsArgs<'_>, seed: u64, hash: &str) -> Result<Outcome> {
    let k = solve_kappa(spec)?;
    let r = sample_r_batch(spec, a.samples, seed, a.tol)?;
    let report = tail_report(&r, k.kappa, a.tol, a.top_fraction)?;
    let mut s = String::new();
    writeln!(s, "kappa={:.12} samples={} tol={:e}", k.kappa, report.samples, report.tol).ok();
    for h in &report.hill {
        writeln!(s, "hill top={} k={} index={:.4} +/- {:.4}", h.top_fraction, h.k, h.index, h.ci_half_width)
            .ok();
    }
    writeln!(s, "plateau: {}", report.plateau).ok();
    writeln!(s, "log-log slope={:.4} +/- {:.4}", report.log_log.slope, report.log_log.slope_se).ok();
    writeln!(
        s,
        "t^kappa P(R>t): min={:.4} max={:.4} top-decade ratio={:.3}",
        report.curve.min, report.curve.max, report.curve.top_decade_ratio
    )
    .ok();
    if let Some(t) = a.threshold {
        let est = tilted_tail_sampler(spec, k.kappa, &k.f_kappa, t, a.samples, seed, a.tol)?;
        writeln!(
            s,
            "tilted P(R>{t})={:e} +/- {:e} (ess={:.0}{})",
            est.probability,
            est.standard_error,
            est.effective_sample_size,
            if est.reliable { "" } else { ", unreliable" }
        )
        .ok();
    }
    if let Some(path) = a.dump {
        let mut dump = Table::new(&["sample", "r"]);
        for (i, v) in r.iter().enumerate() {
            dump.row(&[&i, v]);
        }
        dump.write(path, hash, seed)?;
    }
    let mut table = Table::new(&["t", "scaled_survival"]);
    for (t, v) in report.curve.t.iter().zip(&report.curve.value) {
        table.row(&[t, v]);
    }
    Ok(Outcome::ok(s, table))
}

pub struct LimitArgs {
    pub n: u64,
    pub replicas: u64,
    pub side: SideArg,
    pub reference_walk: bool,
    pub step_cap: u64,
}

pub fn limit_cmd(spec: &EnvironmentSpec, a: LimitArgs, seed: u64) -> Result<Outcome> {
    let opts =
        LimitOptions { reference_walk: a.reference_walk, step_cap: a.step_cap, ..LimitOptions::default() };
    let reports = match a.side {
        SideArg::T => vec![limit_check_t(spec, a.n, a.replicas, seed, opts)?],
        SideArg::X | SideArg::Both => {
            let (t, x) = limit_check_x(spec, a.n, a.replicas, seed, opts, KS_X_THRESHOLD)?;
            if a.side == SideArg::X {
                vec![x]
            } else {
                vec![t, x]
            }
        }
    };
    let mut s = String::new();
    let mut table = Table::new(&["side", "index", "normalized", "fitted_cdf"]);
    for r in &reports {
        summarize(&mut s, r);
        let side = side_name(r);
        for (i, (x, f)) in r.normalized.iter().zip(&r.fitted_cdf).enumerate() {
            table.row(&[&side, &i, x, f]);
        }
        table.note(format!(
            "summary side={side} regime={:?} kappa={} b={} ks={} pass={}",
            r.regime, r.kappa, r.b, r.ks, r.pass
        ));
    }
    let failed = reports.iter().any(|r| !r.pass);
    Ok(Outcome { summary: s, table, validation_failed: failed })
}

fn side_name(r: &LimitCheckReport) -> &'static str {
    match r.side {
        rwre_core::limitlaws::Side::T => "T",
        rwre_core::limitlaws::Side::X => "X",
    }
}

fn summarize(s: &mut String, r: &LimitCheckReport) {
    writeln!(s, "[{}] regime={:?} kappa={:.6} v_P={:.6}", side_name(r), r.regime, r.kappa, r.v_p).ok();
    writeln!(
        s,
        "  n={} replicas={} center={} scale={}",
        r.n, r.replicas, r.schedule.center, r.schedule.scale
    )
    .ok();
    writeln!(s, "  b={:.6} KS={:.4} (threshold {})", r.b, r.ks, r.threshold).ok();
    if let (Some(b), Some(ks)) = (r.b_direct, r.ks_direct) {
        writeln!(s, "  direct fit: b={b:.6} KS={ks:.4}").ok();
    }
    if let Some(h) = &r.hill {
        writeln!(s, "  hill index={:.4} +/- {:.4}", h.index, h.ci_half_width).ok();
    }
    if r.censoring_flagged {
        writeln!(s, "  warning: censoring fraction {:.4}", r.censoring_fraction).ok();
    }
    if r.arithmetic_warning {
        writeln!(s, "  warning: lattice environment").ok();
    }
    writeln!(s, "  result: {}", if r.pass { "pass" } else { "FAIL" }).ok();
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_file_skips_header_and_comments() {
        let path = std::env::temp_dir().join(format!("rwre_samples_{}", std::process::id()));
        std::fs::write(&path, "sample,r\n0,1.5\n\n1,2.5\n# meta\n").unwrap();
        let v = read_samples(&path).unwrap();
        std::fs::write(&path, "1.0\nx\n").unwrap();
        let bad = read_samples(&path);
        std::fs::remove_file(&path).unwrap();
        assert_eq!(v, vec![1.5, 2.5]);
        assert!(bad.is_err());
    }
}

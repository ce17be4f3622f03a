//! Branching process with one immigrant per generation in the Markov
//! environment, its extinction and regeneration times, and block statistics.
//!
//! Generation `n` lives in environment state `x_n`; every one of the
//! `Z_n + 1` individuals (including the immigrant) has a geometric number of
//! children with success probability `omega(x_n)`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::envmodel::{stationary_distribution, EnvironmentSpec, MinorizationSplit};
use crate::error::{Result, RwreError};
use crate::rng::{par_replicas, sub_seed};
use crate::sampling::{categorical, geometric, negative_binomial, ChainSampler};
use crate::stats::{ks_two_sample, linear_fit, mean_and_se, KsResult, LinearFit};
use crate::walksim::{run_to_hit_extending, EnvSampler};

/// Populations above this abort the replica.
pub const POPULATION_LIMIT: u64 = i64::MAX as u64;

#[derive(Debug, Clone, Serialize)]
pub struct BranchPath {
    /// `Z_0 .. Z_T`, `Z_0 = 0`.
    pub z: Vec<u64>,
    /// `x_0 .. x_T`.
    pub states: Vec<usize>,
    /// Children of the immigrant of generation `n`, for `n < T`.
    pub immigrant_offspring: Vec<u64>,
    /// Generation at which the population overflowed; the path stops there.
    pub explosion: Option<usize>,
}

impl BranchPath {
    pub fn horizon(&self) -> usize {
        self.z.len() - 1
    }

    /// Progeny of the individuals already present, `Z_{n+1} - V_{n,0}`.
    pub fn native_offspring(&self, n: usize) -> u64 {
        self.z[n + 1] - self.immigrant_offspring[n]
    }
}

/// Grows the process along a given state sequence; `Z_{n+1}` is drawn from
/// `x_n` for `n < states.len() - 1`.
pub fn branch_on_states<R: Rng + ?Sized>(states: Vec<usize>, omega: &[f64], rng: &mut R) -> BranchPath {
    let t = states.len().saturating_sub(1);
    let mut z = Vec::with_capacity(t + 1);
    let mut imm = Vec::with_capacity(t);
    z.push(0u64);
    let mut explosion = None;
    for n in 0..t {
        let w = omega[states[n]];
        let v0 = geometric(w, rng);
        let rest = negative_binomial(z[n], w, rng);
        match rest.and_then(|r| r.checked_add(v0)) {
            Some(next) if next <= POPULATION_LIMIT => {
                z.push(next);
                imm.push(v0);
            }
            _ => {
                explosion = Some(n + 1);
                break;
            }
        }
    }
    let mut states = states;
    states.truncate(z.len());
    BranchPath { z, states, immigrant_offspring: imm, explosion }
}

/// Chain forward from `pi` for `horizon` steps, then the branching process
/// on it.
pub fn sample_branching_with<R: Rng + ?Sized>(
    sampler: &EnvSampler,
    horizon: usize,
    rng: &mut R,
) -> BranchPath {
    let chain = sampler.forward();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut x = chain.start(rng);
    states.push(x);
    for _ in 0..horizon {
        x = chain.step(x, rng);
        states.push(x);
    }
    branch_on_states(states, sampler.omega(), rng)
}

pub fn sample_branching<R: Rng + ?Sized>(
    spec: &EnvironmentSpec,
    horizon: usize,
    rng: &mut R,
) -> Result<BranchPath> {
    if horizon == 0 {
        return Err(RwreError::Dimension("branching horizon must be at least 1".into()));
    }
    Ok(sample_branching_with(&EnvSampler::new(spec)?, horizon, rng))
}

/// `nu_0 = 0` followed by every later generation with `Z = 0`.
pub fn extinction_times(z: &[u64]) -> Vec<usize> {
    std::iter::once(0).chain(z.iter().enumerate().skip(1).filter(|(_, &v)| v == 0).map(|(t, _)| t)).collect()
}

/// Coin-at-atom regeneration times: `N_0 = 0`, then each `k >= 1` with
/// `x_k = x*` whose independent `Bernoulli(coin)` succeeds.
pub fn chain_regenerations<R: Rng + ?Sized>(
    states: &[usize],
    x_star: usize,
    coin: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if !(coin > 0.0 && coin <= 1.0) {
        return Err(RwreError::BadCoin(coin));
    }
    let mut n = vec![0];
    for (k, &x) in states.iter().enumerate().skip(1) {
        if x == x_star && rng.random::<f64>() < coin {
            n.push(k);
        }
    }
    Ok(n)
}

/// A chain path built through the minorization of its `m`-step kernel,
/// with the split regeneration times.
#[derive(Debug, Clone, Serialize)]
pub struct SplitChain {
    pub states: Vec<usize>,
    pub regenerations: Vec<usize>,
}

/// Samples `skeleton_steps` moves of the `m`-skeleton: each move regenerates
/// from `psi` with probability `r` and otherwise follows the residual kernel.
/// Intermediate states come from the `H`-bridge between skeleton points,
/// sampled by rejection.
pub fn split_chain<R: Rng + ?Sized>(
    h: &DMatrix<f64>,
    split: &MinorizationSplit,
    skeleton_steps: usize,
    rng: &mut R,
) -> Result<SplitChain> {
    if !(split.r > 0.0 && split.r <= 1.0) {
        return Err(RwreError::BadCoin(split.r));
    }
    let k = h.nrows();
    let m = split.m;
    let pi = stationary_distribution(h)?;
    let step = ChainSampler::new(h, &pi);
    let residual_rows: Vec<Vec<f64>> = (0..k)
        .map(|x| {
            let row: Vec<f64> = split.theta.row(x).iter().copied().collect();
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter().map(|v| v / s).collect()
            } else {
                split.psi.iter().copied().collect()
            }
        })
        .collect();
    let psi: Vec<f64> = split.psi.iter().copied().collect();
    let col_max: Vec<f64> = (0..k).map(|y| h.column(y).iter().copied().fold(0.0, f64::max)).collect();

    let mut states = Vec::with_capacity(skeleton_steps * m + 1);
    let mut regenerations = vec![0];
    let mut x = step.start(rng);
    states.push(x);
    for s in 0..skeleton_steps {
        let y = if rng.random::<f64>() < split.r {
            regenerations.push((s + 1) * m);
            categorical(&psi, rng)
        } else {
            categorical(&residual_rows[x], rng)
        };
        if m > 1 {
            let mut bridge = Vec::with_capacity(m - 1);
            let mut attempts = 0u64;
            loop {
                attempts += 1;
                if attempts > 10_000_000 {
                    return Err(RwreError::Numerical(format!("bridge {x} -> {y} rejected too often")));
                }
                bridge.clear();
                let mut u = x;
                for _ in 0..m - 1 {
                    u = step.step(u, rng);
                    bridge.push(u);
                }
                if rng.random::<f64>() * col_max[y] < h[(u, y)] {
                    break;
                }
            }
            states.extend_from_slice(&bridge);
        }
        states.push(y);
        x = y;
    }
    Ok(SplitChain { states, regenerations })
}

/// `nu-bar`: 0, then the common points of `nu` and `N` beyond 0, in order.
pub fn common_times(nu: &[usize], n: &[usize]) -> Vec<usize> {
    let mut out = vec![0];
    let (mut i, mut j) = (0, 0);
    while i < nu.len() && j < n.len() {
        match nu[i].cmp(&n[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if nu[i] > 0 {
                    out.push(nu[i]);
                }
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Sums of `z` over `[t_k, t_{k+1})` for consecutive boundaries.
pub fn block_sums(z: &[u64], boundaries: &[usize]) -> Vec<u64> {
    boundaries.windows(2).map(|w| z[w[0]..w[1]].iter().sum()).collect()
}

/// `(Q, M)` of one block in log form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockQm {
    pub start: usize,
    pub len: usize,
    /// `log M = sum log rho(x_i)` over the block.
    pub log_m: f64,
    /// `log Q`, `Q = 1 + sum_{i < end-1} prod_{j <= i} rho(x_j)`.
    pub log_q: f64,
}

impl BlockQm {
    pub fn m(&self) -> f64 {
        self.log_m.exp()
    }

    pub fn q(&self) -> f64 {
        self.log_q.exp()
    }

    pub fn m_pow(&self, kappa: f64) -> f64 {
        (kappa * self.log_m).exp()
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Block statistics between consecutive boundaries.
pub fn block_qm(states: &[usize], rho: &[f64], boundaries: &[usize]) -> Vec<BlockQm> {
    let log_rho: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
    boundaries
        .windows(2)
        .map(|w| {
            let (start, end) = (w[0], w[1]);
            let mut cum = 0.0;
            let mut log_q = 0.0;
            for (i, &x) in states[start..end].iter().enumerate() {
                cum += log_rho[x];
                if start + i + 1 < end {
                    log_q = log_add_exp(log_q, cum);
                }
            }
            BlockQm { start, len: end - start, log_m: cum, log_q }
        })
        .collect()
}

/// One block between consecutive common regeneration times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarBlock {
    pub start: usize,
    pub gap: usize,
    pub w_bar: u64,
    pub log_m: f64,
    pub log_q: f64,
}

/// Regeneration structure of one branching path.
#[derive(Debug, Clone, Serialize)]
pub struct RegenTrace {
    pub n_times: Vec<usize>,
    pub nu: Vec<usize>,
    pub nu_bar: Vec<usize>,
    /// `W` over complete extinction blocks.
    pub w: Vec<u64>,
    /// Complete blocks between consecutive `nu-bar` times.
    pub bar_blocks: Vec<BarBlock>,
    /// Chain blocks between consecutive `N` times.
    pub chain_blocks: Vec<BlockQm>,
    /// Generations after the last `nu-bar` time (an unfinished block).
    pub incomplete_tail: usize,
}

pub fn common_regenerations(path: &BranchPath, n_times: &[usize], rho: &[f64]) -> RegenTrace {
    let nu = extinction_times(&path.z);
    let nu_bar = common_times(&nu, n_times);
    let w = block_sums(&path.z, &nu);
    let w_bar = block_sums(&path.z, &nu_bar);
    let qm = block_qm(&path.states, rho, &nu_bar);
    let bar_blocks = qm
        .iter()
        .zip(&w_bar)
        .map(|(b, &w)| BarBlock { start: b.start, gap: b.len, w_bar: w, log_m: b.log_m, log_q: b.log_q })
        .collect();
    let chain_blocks = block_qm(&path.states, rho, n_times);
    let last = *nu_bar.last().unwrap_or(&0);
    RegenTrace {
        n_times: n_times.to_vec(),
        nu,
        nu_bar,
        w,
        bar_blocks,
        chain_blocks,
        incomplete_tail: path.z.len() - 1 - last,
    }
}

/// Pooled block statistics over independent replicas. The first block of
/// every replica starts from `pi` rather than from a regeneration and is
/// dropped, as are unfinished final blocks.
#[derive(Debug, Clone, Serialize)]
pub struct RegenSample {
    pub bar_blocks: Vec<BarBlock>,
    pub chain_blocks: Vec<BlockQm>,
    pub explosions: usize,
    pub replicas: u64,
}

impl RegenSample {
    pub fn gaps(&self) -> Vec<f64> {
        self.bar_blocks.iter().map(|b| b.gap as f64).collect()
    }

    pub fn w_bar(&self) -> Vec<f64> {
        self.bar_blocks.iter().map(|b| b.w_bar as f64).collect()
    }

    /// Mean and standard error of `M^kappa` over chain blocks.
    pub fn m_kappa_mean(&self, kappa: f64) -> (f64, f64) {
        let v: Vec<f64> = self.chain_blocks.iter().map(|b| b.m_pow(kappa)).collect();
        mean_and_se(&v)
    }
}

pub fn regeneration_sample(
    spec: &EnvironmentSpec,
    horizon: usize,
    replicas: u64,
    seed: u64,
    x_star: usize,
    coin: f64,
) -> Result<RegenSample> {
    if x_star >= spec.len() {
        return Err(RwreError::Dimension(format!("regeneration state {x_star} out of range")));
    }
    let sampler = EnvSampler::new(spec)?;
    let rho = spec.rho();
    let traces = par_replicas(seed, replicas, |_, rng| -> Result<Option<RegenTrace>> {
        let path = sample_branching_with(&sampler, horizon, rng);
        if path.explosion.is_some() {
            return Ok(None);
        }
        let n = chain_regenerations(&path.states, x_star, coin, rng)?;
        Ok(Some(common_regenerations(&path, &n, rho)))
    });
    let mut out = RegenSample { bar_blocks: Vec::new(), chain_blocks: Vec::new(), explosions: 0, replicas };
    for t in traces {
        match t? {
            None => out.explosions += 1,
            Some(t) => {
                out.bar_blocks.extend(t.bar_blocks.into_iter().skip(1));
                out.chain_blocks.extend(t.chain_blocks.into_iter().skip(1));
            }
        }
    }
    Ok(out)
}

/// Least-squares slope of `log P(gap > t)` against `t`, over the `t` with at
/// least `min_count` exceedances.
pub fn gap_tail_slope(gaps: &[f64], min_count: usize) -> Result<LinearFit> {
    let mut g = gaps.to_vec();
    g.sort_by(f64::total_cmp);
    let n = g.len();
    let mut ts = Vec::new();
    let mut ls = Vec::new();
    let mut idx = 0;
    let max_t = g.last().copied().unwrap_or(0.0) as usize;
    for t in 1..=max_t {
        while idx < n && g[idx] <= t as f64 {
            idx += 1;
        }
        let above = n - idx;
        if above < min_count {
            break;
        }
        ts.push(t as f64);
        ls.push((above as f64 / n as f64).ln());
    }
    if ts.len() < 3 {
        return Err(RwreError::InsufficientData(format!("{} tail points", ts.len())));
    }
    Ok(linear_fit(&ts, &ls))
}

/// First regeneration atom `(x*, r)`, scanning states in order and then
/// `coins` in order, for which `M^kappa` has finite variance, that is
/// `r(Theta_{2 kappa}) < 1`.
pub fn finite_variance_atom(
    spec: &EnvironmentSpec,
    kappa: f64,
    coins: &[f64],
) -> Result<Option<(usize, f64)>> {
    for x_star in 0..spec.len() {
        for &coin in coins {
            if crate::spectral::sub_stochastic_radius(spec, coin, 2.0 * kappa, x_star)?.radius < 1.0 {
                return Ok(Some((x_star, coin)));
            }
        }
    }
    Ok(None)
}

/// Outcome of comparing left-move totals of the walk with branching sums.
#[derive(Debug, Clone, Serialize)]
pub struct BranchWalkCheck {
    pub n: u64,
    pub walk_completed: usize,
    pub walk_mean: f64,
    pub walk_se: f64,
    pub branch_mean: f64,
    pub branch_se: f64,
    pub ks: KsResult,
    pub rejected: bool,
}

/// Significance of [`branching_vs_walk_check`].
pub const BRANCH_WALK_ALPHA: f64 = 0.01;

/// Two-sample KS between `sum_{i=1}^n U_i^n` from quenched walks and
/// `sum_{k<n} Z_k` from branching paths, each over `replicas` environments.
pub fn branching_vs_walk_check(
    spec: &EnvironmentSpec,
    n: u64,
    replicas: u64,
    seed: u64,
    step_cap: u64,
) -> Result<BranchWalkCheck> {
    let sampler = EnvSampler::new(spec)?;
    let left = sampler.left_window(replicas);
    let walk: Vec<Option<f64>> = par_replicas(sub_seed(seed, 1), replicas, |_, rng| {
        let mut env = sampler.sample(left, n as usize, rng);
        let rec = run_to_hit_extending(&sampler, &mut env, n, rng, step_cap).ok()?;
        (!rec.censored).then(|| rec.left_move_sum(1, n as i64) as f64)
    });
    let walk: Vec<f64> = walk.into_iter().flatten().collect();
    if walk.len() < 2 || (walk.len() as u64) * 2 < replicas {
        return Err(RwreError::InsufficientData(format!("{} of {replicas} walks completed", walk.len())));
    }
    let branch: Vec<f64> = par_replicas(sub_seed(seed, 2), replicas, |_, rng| {
        let path = sample_branching_with(&sampler, n as usize, rng);
        path.z[..n as usize].iter().sum::<u64>() as f64
    });
    let ks = ks_two_sample(&walk, &branch);
    let (walk_mean, walk_se) = mean_and_se(&walk);
    let (branch_mean, branch_se) = mean_and_se(&branch);
    Ok(BranchWalkCheck {
        n,
        walk_completed: walk.len(),
        walk_mean,
        walk_se,
        branch_mean,
        branch_se,
        rejected: ks.rejected_at(BRANCH_WALK_ALPHA),
        ks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmodel::minorization_split;
    use crate::rng::replica_rng;
    use crate::spectral::solve_kappa;

    fn chain_mk_k2() -> EnvironmentSpec {
        EnvironmentSpec::from_rows(&[&[0.9, 0.1], &[0.775, 0.225]], &[2.0 / 3.0, 1.0 / 3.0], 0.3).unwrap()
    }

    fn chain_mk_k1() -> EnvironmentSpec {
        EnvironmentSpec::from_rows(&[&[0.8, 0.2], &[0.6, 0.4]], &[2.0 / 3.0, 1.0 / 3.0], 0.3).unwrap()
    }

    #[test]
    fn finite_variance_atom_avoids_heavy_blocks() {
        // rho = (1/2, 2), kappa = 1: killing at state 0 leaves the rho = 2
        // loop with weight 0.4 * 4 > 1.
        let k1 =
            EnvironmentSpec::from_rows(&[&[0.8, 0.2], &[0.6, 0.4]], &[2.0 / 3.0, 1.0 / 3.0], 0.3).unwrap();
        assert_eq!(finite_variance_atom(&k1, 1.0, &[0.5]).unwrap(), Some((1, 0.5)));
        let k2 = EnvironmentSpec::from_rows(&[&[0.9, 0.1], &[0.775, 0.225]], &[2.0 / 3.0, 1.0 / 3.0], 0.3)
            .unwrap();
        assert_eq!(finite_variance_atom(&k2, 2.0, &[0.5]).unwrap(), None);
        assert_eq!(finite_variance_atom(&k2, 2.0, &[0.5, 0.9]).unwrap(), Some((1, 0.9)));
    }

    #[test]
    fn near_one_omega_keeps_population_small() {
        let spec = EnvironmentSpec::single_state(0.99, 0.005).unwrap();
        let path = sample_branching(&spec, 10_000, &mut replica_rng(1, 0)).unwrap();
        let mean = path.z.iter().sum::<u64>() as f64 / path.z.len() as f64;
        // Stationary mean of the immigration process is rho / (1 - rho).
        let rho = 0.01 / 0.99;
        assert!((mean - rho / (1.0 - rho)).abs() < 0.005, "{mean}");
        assert!(path.z.iter().all(|&z| z <= 5));
    }

    #[test]
    fn geometric_offspring_mean() {
        let mut rng = replica_rng(2, 0);
        let v: Vec<f64> = (0..1_000_000).map(|_| geometric(1.0 / 3.0, &mut rng) as f64).collect();
        let (m, se) = mean_and_se(&v);
        assert!((m - 2.0).abs() < 4.0 * se);
    }

    #[test]
    fn deterministic_omega_gives_zero_population() {
        let path = branch_on_states(vec![0; 50], &[1.0], &mut replica_rng(0, 0));
        assert!(path.z.iter().all(|&z| z == 0));
        assert_eq!(extinction_times(&path.z), (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn extinction_examples() {
        assert_eq!(extinction_times(&[0, 0, 0, 0]), vec![0, 1, 2, 3]);
        assert_eq!(extinction_times(&[0, 2, 1, 0, 4]), vec![0, 3]);
    }

    #[test]
    fn ledger_reconstructs_population() {
        let spec = chain_mk_k2();
        let path = sample_branching(&spec, 1000, &mut replica_rng(4, 0)).unwrap();
        for n in 0..path.horizon() {
            assert_eq!(path.native_offspring(n) + path.immigrant_offspring[n], path.z[n + 1]);
            if path.z[n] == 0 {
                assert_eq!(path.native_offspring(n), 0);
            }
        }
    }

    #[test]
    fn common_times_examples() {
        assert_eq!(common_times(&[0, 2, 5, 9], &[0, 3, 5, 8, 9]), vec![0, 5, 9]);
        let same = vec![0, 1, 4, 6];
        assert_eq!(common_times(&same, &same), same);
    }

    #[test]
    fn full_coin_on_single_state() {
        let n = chain_regenerations(&[0; 6], 0, 1.0, &mut replica_rng(0, 0)).unwrap();
        assert_eq!(n, vec![0, 1, 2, 3, 4, 5]);
        assert!(chain_regenerations(&[0; 6], 0, 0.0, &mut replica_rng(0, 0)).is_err());
        assert!(chain_regenerations(&[0; 6], 0, 1.5, &mut replica_rng(0, 0)).is_err());
    }

    #[test]
    fn block_qm_examples() {
        let rho = [0.5, 2.0];
        let b = block_qm(&[0, 0], &rho, &[0, 1]);
        assert!((b[0].m() - 0.5).abs() < 1e-15 && (b[0].q() - 1.0).abs() < 1e-15);
        let b = block_qm(&[0, 1, 0], &rho, &[0, 2]);
        assert!((b[0].m() - 1.0).abs() < 1e-15);
        assert!((b[0].q() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn regeneration_gap_mean_and_atom() {
        let spec = chain_mk_k2();
        let sampler = EnvSampler::new(&spec).unwrap();
        let mut rng = replica_rng(7, 0);
        let path = sample_branching_with(&sampler, 400_000, &mut rng);
        let n = chain_regenerations(&path.states, 0, 0.5, &mut rng).unwrap();
        assert!(n[1..].iter().all(|&k| path.states[k] == 0));
        let gaps: Vec<f64> = n.windows(2).skip(1).map(|w| (w[1] - w[0]) as f64).collect();
        let (m, se) = mean_and_se(&gaps);
        let expect = 1.0 / (31.0 / 35.0 * 0.5);
        assert!((m - expect).abs() < 4.0 * se, "{m} vs {expect}");
    }

    #[test]
    fn extinction_gap_tail_decays() {
        let spec = chain_mk_k2();
        let sampler = EnvSampler::new(&spec).unwrap();
        let path = sample_branching_with(&sampler, 1_000_000, &mut replica_rng(8, 0));
        let nu = extinction_times(&path.z);
        let gaps: Vec<f64> = nu.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
        let fit = gap_tail_slope(&gaps, 30).unwrap();
        assert!(fit.slope < 0.0);
    }

    #[test]
    fn split_chain_preserves_law_and_regenerates() {
        let spec = chain_mk_k1();
        let split = minorization_split(&spec, 2).unwrap();
        let sc = split_chain(spec.transition(), &split, 200_000, &mut replica_rng(9, 0)).unwrap();
        assert_eq!(sc.states.len(), 400_001);
        assert!(sc.regenerations.iter().all(|t| t % 2 == 0));
        let freq0 = sc.states.iter().filter(|&&s| s == 0).count() as f64 / sc.states.len() as f64;
        assert!((freq0 - 0.75).abs() < 0.01, "{freq0}");
        // Transition frequencies out of state 1.
        let mut c = [0usize; 2];
        for w in sc.states.windows(2) {
            if w[0] == 1 {
                c[w[1]] += 1;
            }
        }
        let p10 = c[0] as f64 / (c[0] + c[1]) as f64;
        assert!((p10 - 0.6).abs() < 0.01, "{p10}");
        let rate = (sc.regenerations.len() - 1) as f64 / 200_000.0;
        assert!((rate - split.r).abs() < 0.01);
    }

    #[test]
    fn m_kappa_has_unit_mean_on_small_run() {
        let spec = chain_mk_k1();
        let rep = solve_kappa(&spec).unwrap();
        let s = regeneration_sample(&spec, 20_000, 8, 3, 0, 0.5).unwrap();
        let (m, se) = s.m_kappa_mean(rep.kappa);
        assert!((m - 1.0).abs() < 4.0 * se, "{m} +- {se}");
    }

    #[test]
    fn branching_matches_walk_single_state() {
        let spec = EnvironmentSpec::single_state(0.9, 0.05).unwrap();
        let chk = branching_vs_walk_check(&spec, 100, 2000, 11, u64::MAX).unwrap();
        assert!(!chk.rejected, "{chk:?}");
        let se = (chk.walk_se.powi(2) + chk.branch_se.powi(2)).sqrt();
        assert!((chk.walk_mean - chk.branch_mean).abs() < 4.0 * se);
    }

    #[test]
    fn branching_matches_walk_n1_and_degenerate() {
        let spec = chain_mk_k2();
        let chk = branching_vs_walk_check(&spec, 1, 500, 12, u64::MAX).unwrap();
        assert_eq!(chk.walk_mean, 0.0);
        assert_eq!(chk.branch_mean, 0.0);
        assert!(!chk.rejected);
    }
}

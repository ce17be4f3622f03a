//! Quenched simulation of the walk and hitting-time extraction.
//!
//! Site `-k` (k >= 0) of the environment carries the state `x_k` of the
//! forward chain started from `pi`; site `k > 0` carries `x_{-k}`, generated
//! by the reversed kernel from `x_0`. The resulting two-sided path is
//! stationary.

use rand::Rng;
use serde::Serialize;

use crate::envmodel::{reverse_with, stationary_distribution, EnvironmentSpec};
use crate::error::{Result, RwreError};
use crate::rng::{par_replicas, ReplicaRng};
use crate::sampling::{negative_binomial, ChainSampler};

/// Default per-replica step budget of the reference walker.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;
/// Smallest left window.
pub const MIN_LEFT_WINDOW: usize = 50;
/// Target probability of the walk ever leaving the initial left window,
/// per batch of replicas.
pub const WINDOW_DELTA: f64 = 1e-6;

/// Seed provenance of a sampled environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub seed: u64,
    pub replica: u64,
}

/// A finite window `[-left, right]` of one environment realization.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvPath {
    left: usize,
    right: usize,
    /// `omega[site + left]`.
    omega: Vec<f64>,
    /// Chain state per site; empty for hand-built environments.
    states: Vec<usize>,
    pub provenance: Option<Provenance>,
}

impl EnvPath {
    /// Environment given directly by its omega values on `[-left, right]`.
    /// No ellipticity is enforced; used for degenerate test environments.
    pub fn from_omega(left: usize, omega: Vec<f64>) -> Self {
        assert!(omega.len() > left, "window must contain site 0");
        let right = omega.len() - 1 - left;
        Self { left, right, omega, states: Vec::new(), provenance: None }
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn omega_at(&self, site: i64) -> f64 {
        self.omega[(site + self.left as i64) as usize]
    }

    pub fn state_at(&self, site: i64) -> Option<usize> {
        self.states.get((site + self.left as i64) as usize).copied()
    }

    /// Omega values from site `-left` to `right`.
    pub fn omegas(&self) -> &[f64] {
        &self.omega
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }
}

/// Per-spec precomputation for drawing environments: forward and reversed
/// chain samplers started from `pi`.
#[derive(Debug, Clone)]
pub struct EnvSampler {
    forward: ChainSampler,
    reverse: ChainSampler,
    omega: Vec<f64>,
    drift: f64,
}

impl EnvSampler {
    pub fn new(spec: &EnvironmentSpec) -> Result<Self> {
        let pi = stationary_distribution(spec.transition())?;
        let rev = reverse_with(spec.transition(), &pi)?;
        let drift = pi.iter().zip(spec.rho()).map(|(p, r)| p * r.ln()).sum();
        Ok(Self {
            forward: ChainSampler::new(spec.transition(), &pi),
            reverse: ChainSampler::new(&rev, &pi),
            omega: spec.omega().to_vec(),
            drift,
        })
    }

    /// `E_pi(log rho)`.
    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn forward(&self) -> &ChainSampler {
        &self.forward
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn sample<R: Rng + ?Sized>(&self, left: usize, right: usize, rng: &mut R) -> EnvPath {
        let mut states = vec![0usize; left + right + 1];
        let x0 = self.forward.start(rng);
        states[left] = x0;
        let mut x = x0;
        for k in 1..=left {
            x = self.forward.step(x, rng);
            states[left - k] = x;
        }
        let mut x = x0;
        for k in 1..=right {
            x = self.reverse.step(x, rng);
            states[left + k] = x;
        }
        let omega = states.iter().map(|&s| self.omega[s]).collect();
        EnvPath { left, right, omega, states, provenance: None }
    }

    /// Continues the forward chain `extra` more sites to the left.
    pub fn extend_left<R: Rng + ?Sized>(&self, env: &mut EnvPath, extra: usize, rng: &mut R) {
        let mut x = env.states[0];
        let mut new_states = Vec::with_capacity(extra + env.states.len());
        for _ in 0..extra {
            x = self.forward.step(x, rng);
            new_states.push(x);
        }
        new_states.reverse();
        new_states.extend_from_slice(&env.states);
        env.omega = new_states.iter().map(|&s| self.omega[s]).collect();
        env.states = new_states;
        env.left += extra;
    }

    /// Left window `max(50, ceil(c log(replicas / delta)))` with
    /// `c = 2 / |drift|`.
    pub fn left_window(&self, replicas: u64) -> usize {
        let c = 2.0 / self.drift.abs().max(1e-3);
        let l = (c * ((replicas.max(1) as f64) / WINDOW_DELTA).ln()).ceil();
        (l as usize).max(MIN_LEFT_WINDOW)
    }
}

/// Draws one stationary environment window `[-left, right]`.
pub fn sample_environment<R: Rng + ?Sized>(
    spec: &EnvironmentSpec,
    left: usize,
    right: usize,
    rng: &mut R,
) -> Result<EnvPath> {
    Ok(EnvSampler::new(spec)?.sample(left, right, rng))
}

/// One quenched walk run until it first reaches `n_target`.
#[derive(Debug, Clone, Serialize)]
pub struct WalkRecord {
    pub n_target: u64,
    /// `T_k` for `k = 1..=` the largest level reached.
    pub hitting_times: Vec<u64>,
    /// Left moves per site; entry `i` is site `i - left_offset`.
    pub left_moves: Vec<u64>,
    pub left_offset: i64,
    pub final_position: i64,
    pub steps: u64,
    /// Leftmost site visited.
    pub deepest: i64,
    /// The step budget ran out before `n_target` was reached.
    pub censored: bool,
}

impl WalkRecord {
    /// `T_n`, when reached.
    pub fn hitting_time(&self) -> Option<u64> {
        if self.censored {
            None
        } else {
            self.hitting_times.last().copied().or(Some(0))
        }
    }

    /// `tau_k = T_k - T_{k-1}` with `T_0 = 0`.
    pub fn increments(&self) -> Vec<u64> {
        let mut prev = 0;
        self.hitting_times
            .iter()
            .map(|&t| {
                let d = t - prev;
                prev = t;
                d
            })
            .collect()
    }

    pub fn left_moves_at(&self, site: i64) -> u64 {
        let idx = site + self.left_offset;
        if idx < 0 {
            return 0;
        }
        self.left_moves.get(idx as usize).copied().unwrap_or(0)
    }

    /// Sum of left moves over sites `lo..=hi`.
    pub fn left_move_sum(&self, lo: i64, hi: i64) -> u64 {
        (lo..=hi).map(|s| self.left_moves_at(s)).sum()
    }

    /// `T_n = n + 2 sum_{i <= n} U_i^n`, exactly.
    pub fn identity_holds(&self) -> bool {
        let total: u64 = self.left_moves.iter().sum();
        !self.censored && self.steps == self.n_target + 2 * total
    }
}

struct Walker {
    pos: i64,
    steps: u64,
    max_reached: i64,
    deepest: i64,
    hitting: Vec<u64>,
    left_moves: Vec<u64>,
    offset: i64,
}

enum Stop {
    Hit,
    Budget,
    Underflow,
}

impl Walker {
    fn new(env: &EnvPath) -> Self {
        Self {
            pos: 0,
            steps: 0,
            max_reached: 0,
            deepest: 0,
            hitting: Vec::new(),
            left_moves: vec![0; env.omega.len()],
            offset: env.left as i64,
        }
    }

    fn grow_left(&mut self, extra: usize) {
        let mut v = vec![0; extra];
        v.extend_from_slice(&self.left_moves);
        self.left_moves = v;
        self.offset += extra as i64;
    }

    /// One uniform per step, compared against omega at the current site.
    fn advance<R: Rng + ?Sized>(&mut self, env: &EnvPath, n: i64, cap: u64, rng: &mut R) -> Stop {
        let omega = &env.omega;
        loop {
            if self.pos >= n {
                return Stop::Hit;
            }
            if self.steps >= cap {
                return Stop::Budget;
            }
            let idx = (self.pos + self.offset) as usize;
            self.steps += 1;
            if rng.random::<f64>() < omega[idx] {
                self.pos += 1;
                if self.pos > self.max_reached {
                    self.max_reached = self.pos;
                    self.hitting.push(self.steps);
                }
            } else {
                self.left_moves[idx] += 1;
                self.pos -= 1;
                if self.pos < self.deepest {
                    self.deepest = self.pos;
                    if self.pos + self.offset < 0 {
                        return Stop::Underflow;
                    }
                }
            }
        }
    }

    fn into_record(self, n: u64, censored: bool) -> WalkRecord {
        WalkRecord {
            n_target: n,
            hitting_times: self.hitting,
            left_moves: self.left_moves,
            left_offset: self.offset,
            final_position: self.pos,
            steps: self.steps,
            deepest: self.deepest,
            censored,
        }
    }
}

/// Runs the walk in a fixed environment until it reaches `n`. Exhausting
/// `step_cap` yields a censored partial record; leaving the window on the
/// left is an error.
pub fn run_to_hit<R: Rng + ?Sized>(env: &EnvPath, n: u64, rng: &mut R, step_cap: u64) -> Result<WalkRecord> {
    if n as usize > env.right {
        return Err(RwreError::Dimension(format!("target {n} beyond window end {}", env.right)));
    }
    let mut w = Walker::new(env);
    match w.advance(env, n as i64, step_cap, rng) {
        Stop::Hit => Ok(w.into_record(n, false)),
        Stop::Budget => Ok(w.into_record(n, true)),
        Stop::Underflow => Err(RwreError::WindowTooSmall { deepest: w.deepest }),
    }
}

/// As [`run_to_hit`], but continues the environment to the left whenever
/// the walk leaves the window.
pub fn run_to_hit_extending<R: Rng + ?Sized>(
    sampler: &EnvSampler,
    env: &mut EnvPath,
    n: u64,
    rng: &mut R,
    step_cap: u64,
) -> Result<WalkRecord> {
    if n as usize > env.right {
        return Err(RwreError::Dimension(format!("target {n} beyond window end {}", env.right)));
    }
    let mut w = Walker::new(env);
    loop {
        match w.advance(env, n as i64, step_cap, rng) {
            Stop::Hit => return Ok(w.into_record(n, false)),
            Stop::Budget => return Ok(w.into_record(n, true)),
            Stop::Underflow => {
                let extra = env.left.max(MIN_LEFT_WINDOW);
                sampler.extend_left(env, extra, rng);
                w.grow_left(extra);
            }
        }
    }
}

/// Position after exactly `time` steps, extending the window on demand.
pub fn run_for_time<R: Rng + ?Sized>(sampler: &EnvSampler, env: &mut EnvPath, time: u64, rng: &mut R) -> i64 {
    assert!(env.right as u64 >= time, "window must reach the time horizon");
    let mut w = Walker::new(env);
    loop {
        // A horizon of `time + 1` sites is never hit within `time` steps.
        match w.advance(env, time as i64 + 1, time, rng) {
            Stop::Budget | Stop::Hit => return w.pos,
            Stop::Underflow => {
                let extra = env.left.max(MIN_LEFT_WINDOW);
                sampler.extend_left(env, extra, rng);
                w.grow_left(extra);
            }
        }
    }
}

/// One annealed draw of `T_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingSample {
    pub replica: u64,
    pub t_n: u64,
    pub steps: u64,
    pub censored: bool,
}

/// Independent environment and walk per replica; replica `i` uses stream
/// `i` of the master seed, so the output does not depend on scheduling.
pub fn annealed_hitting_sample(
    spec: &EnvironmentSpec,
    n: u64,
    replicas: u64,
    seed: u64,
    step_cap: u64,
) -> Result<Vec<HittingSample>> {
    let sampler = EnvSampler::new(spec)?;
    let left = sampler.left_window(replicas);
    let results = par_replicas(seed, replicas, |i, rng| {
        let mut env = sampler.sample(left, n as usize, rng);
        env.provenance = Some(Provenance { seed, replica: i });
        run_to_hit_extending(&sampler, &mut env, n, rng, step_cap).map(|rec| HittingSample {
            replica: i,
            t_n: rec.hitting_time().unwrap_or(rec.steps),
            steps: rec.steps,
            censored: rec.censored,
        })
    });
    collect_replicas(results)
}

/// Full walk records for `replicas` annealed runs.
pub fn annealed_walk_records(
    spec: &EnvironmentSpec,
    n: u64,
    replicas: u64,
    seed: u64,
    step_cap: u64,
) -> Result<Vec<WalkRecord>> {
    let sampler = EnvSampler::new(spec)?;
    let left = sampler.left_window(replicas);
    let results = par_replicas(seed, replicas, |_, rng| {
        let mut env = sampler.sample(left, n as usize, rng);
        run_to_hit_extending(&sampler, &mut env, n, rng, step_cap)
    });
    collect_replicas(results)
}

/// Annealed draws of `X_time`.
pub fn annealed_position_sample(
    spec: &EnvironmentSpec,
    time: u64,
    replicas: u64,
    seed: u64,
) -> Result<Vec<i64>> {
    let sampler = EnvSampler::new(spec)?;
    let left = sampler.left_window(replicas);
    Ok(par_replicas(seed, replicas, |_, rng| {
        let mut env = sampler.sample(left, time as usize, rng);
        run_for_time(&sampler, &mut env, time, rng)
    }))
}

fn collect_replicas<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(e) => failures.push(format!("replica {i}: {e}")),
        }
    }
    if failures.is_empty() {
        Ok(out)
    } else {
        Err(RwreError::Numerical(failures.join("; ")))
    }
}

/// `T_n` split into its parts: `t_n = n + 2 (right_sum + left_sum)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExcursionCounts {
    pub t_n: u64,
    /// `sum_{i=1}^{n} U_i^n`.
    pub right_sum: u64,
    /// `sum_{i<=0} U_i^n`.
    pub left_sum: u64,
}

/// Exact draw of `T_n` without stepping the walk.
///
/// Given the environment, the left-move counts satisfy `U_n = 0`,
/// `U_{i} ~ NB(U_{i+1} + 1, omega_i)` for `0 <= i < n` and
/// `U_i ~ NB(U_{i+1}, omega_i)` for `i < 0`, where `NB(r, w)` counts the
/// left exits from a site before its `r`-th right exit. Walking down from
/// site `n - 1` visits the environment in forward-chain order, so the chain
/// is started from `pi` at site `n - 1`. Cost is `O(n)` per draw however
/// large `T_n` is. Returns `None` on `u64` overflow.
pub fn fast_hitting_time<R: Rng + ?Sized>(
    sampler: &EnvSampler,
    n: u64,
    rng: &mut R,
) -> Option<ExcursionCounts> {
    let chain = sampler.forward();
    let omega = sampler.omega();
    let mut x = chain.start(rng);
    let mut u = 0u64;
    let mut right_sum = 0u64;
    // Sites n-1 down to 1.
    for _ in 1..n {
        u = negative_binomial(u.checked_add(1)?, omega[x], rng)?;
        right_sum = right_sum.checked_add(u)?;
        x = chain.step(x, rng);
    }
    // Site 0 still carries the extra final crossing.
    let mut left_sum = 0u64;
    if n >= 1 {
        u = negative_binomial(u.checked_add(1)?, omega[x], rng)?;
        left_sum = u;
    }
    while u > 0 {
        x = chain.step(x, rng);
        u = negative_binomial(u, omega[x], rng)?;
        left_sum = left_sum.checked_add(u)?;
    }
    let t_n = n.checked_add(right_sum.checked_add(left_sum)?.checked_mul(2)?)?;
    Some(ExcursionCounts { t_n, right_sum, left_sum })
}

/// Annealed `T_n` draws through [`fast_hitting_time`]; overflowing replicas
/// are reported as censored at `u64::MAX`.
pub fn annealed_hitting_sample_fast(
    spec: &EnvironmentSpec,
    n: u64,
    replicas: u64,
    seed: u64,
) -> Result<Vec<HittingSample>> {
    let sampler = EnvSampler::new(spec)?;
    Ok(par_replicas(seed, replicas, |i, rng: &mut ReplicaRng| match fast_hitting_time(&sampler, n, rng) {
        Some(c) => HittingSample { replica: i, t_n: c.t_n, steps: c.t_n, censored: false },
        None => HittingSample { replica: i, t_n: u64::MAX, steps: u64::MAX, censored: true },
    }))
}

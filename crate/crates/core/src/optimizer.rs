//! ADAM descent on the relaxed objectives, single trials and seeded batches.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{self, GradientProvider};
use crate::hamiltonian::{self, HyperIsingModel, Relaxation, SpinState};
use crate::par::{self, Exec};
use crate::Spin;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub steps: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            steps: 500,
        }
    }
}

impl AdamConfig {
    /// Settings used with the Moreau estimator: `lr = 1`, 10000 steps.
    pub fn moreau() -> Self {
        AdamConfig {
            lr: 1.0,
            steps: 10_000,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidParameter(what));
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        Ok(())
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    pub fn new(n: usize) -> Self {
        Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One bias-corrected ADAM update at step `t >= 1`.
pub fn adam_step(cfg: &AdamConfig, t: usize, a: &mut [f64], g: &[f64], moments: &mut Moments) {
    debug_assert!(t >= 1);
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..a.len() {
        moments.m[i] = cfg.beta1 * moments.m[i] + (1.0 - cfg.beta1) * g[i];
        moments.v[i] = cfg.beta2 * moments.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let m_hat = moments.m[i] / bc1;
        let v_hat = moments.v[i] / bc2;
        a[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Clamps onto the relaxation's box; Type III is unconstrained.
pub fn project(a: &mut [f64], relaxation: Relaxation, p: f64) {
    if let Some(b) = relaxation.bound(p) {
        for x in a {
            *x = x.clamp(-b, b);
        }
    }
}

/// Uniform draw from `[-1,1]^n`, `[-sqrt p, sqrt p]^n` or `[-pi, pi]^n`.
pub fn initial_state<R: Rng + ?Sized>(n: usize, relaxation: Relaxation, p: f64, rng: &mut R) -> Vec<f64> {
    let b = relaxation.bound(p).unwrap_or(PI);
    (0..n).map(|_| rng.random_range(-b..=b)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub relaxation: Relaxation,
    pub p: f64,
    pub provider: GradientProvider,
    pub adam: AdamConfig,
    pub record_trajectory: bool,
    /// Stop at the first satisfying step instead of running the full budget.
    pub early_stop: bool,
}

impl TrialConfig {
    pub fn new(relaxation: Relaxation, provider: GradientProvider, adam: AdamConfig) -> Self {
        TrialConfig {
            relaxation,
            p: 1.0,
            provider,
            adam,
            record_trajectory: false,
            early_stop: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        self.provider.validate()?;
        if !(self.p.is_finite() && self.p > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "p must be positive, got {}",
                self.p
            )));
        }
        Ok(())
    }
}

/// State at one step, with the gradient computed there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub state: Vec<f64>,
    pub objective: f64,
    pub gradient: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub success: bool,
    pub first_success_step: Option<usize>,
    /// Relaxed objective at the final state.
    pub final_energy: f64,
    /// Discrete Hamiltonian of the final rounded assignment.
    pub final_hamiltonian: f64,
    pub final_state: Vec<f64>,
    pub final_assignment: Vec<Spin>,
    pub steps_run: usize,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

/// Runs one trial from a uniformly random start drawn from `seed`.
pub fn run_trial(m: &HyperIsingModel, cfg: &TrialConfig, seed: u64) -> Result<TrialResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = initial_state(m.n(), cfg.relaxation, cfg.p, &mut rng);
    descend(m, cfg, init, &mut rng)
}

/// Runs one trial from a given start. `seed` feeds stochastic estimators.
pub fn run_trial_from(
    m: &HyperIsingModel,
    cfg: &TrialConfig,
    init: Vec<f64>,
    seed: u64,
) -> Result<TrialResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    descend(m, cfg, init, &mut rng)
}

fn descend(m: &HyperIsingModel, cfg: &TrialConfig, init: Vec<f64>, rng: &mut ChaCha8Rng) -> Result<TrialResult> {
    cfg.validate()?;
    if init.len() != m.n() {
        return Err(Error::DimensionMismatch {
            expected: m.n(),
            got: init.len(),
        });
    }
    let mut state = SpinState::new(init, cfg.relaxation, cfg.p);
    project(&mut state.a, cfg.relaxation, cfg.p);
    let mut moments = Moments::new(m.n());
    let mut trajectory = cfg.record_trajectory.then(Vec::new);
    let mut first_success = None;
    let mut steps_run = 0;

    for t in 1..=cfg.adam.steps {
        let g = estimators::gradient(&cfg.provider, m, &state, rng)?;
        if let Some(points) = trajectory.as_mut() {
            points.push(TrajectoryPoint {
                step: t - 1,
                state: state.a.clone(),
                objective: cfg.relaxation.objective(m, &state.a, cfg.p)?,
                gradient: g.clone(),
            });
        }
        adam_step(&cfg.adam, t, &mut state.a, &g, &mut moments);
        project(&mut state.a, cfg.relaxation, cfg.p);
        if state.a.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("updating spins at step {t}")));
        }
        steps_run = t;
        if first_success.is_none() {
            let assignment = hamiltonian::round_to_assignment(&state);
            if hamiltonian::is_satisfying(m, &assignment)? {
                first_success = Some(t);
                if cfg.early_stop {
                    break;
                }
            }
        }
    }

    let final_energy = cfg.relaxation.objective(m, &state.a, cfg.p)?;
    if !final_energy.is_finite() {
        return Err(Error::NonFinite("evaluating the final state".into()));
    }
    if let Some(points) = trajectory.as_mut() {
        let g = estimators::gradient(&cfg.provider, m, &state, rng)?;
        points.push(TrajectoryPoint {
            step: steps_run,
            state: state.a.clone(),
            objective: final_energy,
            gradient: g,
        });
    }
    let final_assignment = hamiltonian::round_to_assignment(&state);
    let spins: Vec<f64> = final_assignment.iter().map(|&s| s as f64).collect();
    Ok(TrialResult {
        success: first_success.is_some(),
        first_success_step: first_success,
        final_energy,
        final_hamiltonian: hamiltonian::hamiltonian(m, &spins)?,
        final_state: state.a,
        final_assignment,
        steps_run,
        trajectory,
    })
}

/// One solver configuration of a batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSetup {
    pub label: String,
    pub relaxation: Relaxation,
    pub p: f64,
    pub provider: GradientProvider,
    pub adam: AdamConfig,
}

impl SolverSetup {
    pub fn new(relaxation: Relaxation, provider: GradientProvider, adam: AdamConfig) -> Self {
        SolverSetup {
            label: format!("{relaxation}/{}", provider.name()),
            relaxation,
            p: 1.0,
            provider,
            adam,
        }
    }

    fn trial_config(&self) -> TrialConfig {
        TrialConfig {
            relaxation: self.relaxation,
            p: self.p,
            provider: self.provider,
            adam: self.adam,
            record_trajectory: false,
            early_stop: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchConfig {
    pub trials_per_instance: usize,
    pub seed: u64,
    pub exec: Exec,
}

/// Success-by-step curves of one setup over all instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetupReport {
    pub label: String,
    pub steps: usize,
    pub instances: usize,
    pub trials: usize,
    /// Trials aborted by a non-finite objective; counted as failures.
    pub diverged: usize,
    /// Fraction of all trials satisfied by step `t`, at index `t - 1`.
    pub pooled: Vec<f64>,
    /// Median and quartiles over instances of the per-instance rate.
    pub median: Vec<f64>,
    pub q1: Vec<f64>,
    pub q3: Vec<f64>,
}

impl SetupReport {
    pub fn final_pooled(&self) -> f64 {
        self.pooled.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub setups: Vec<SetupReport>,
}

/// Seed of trial `trial` on instance `instance`. Shared across setups so
/// configurations are compared from the same random streams.
pub fn trial_seed(master: u64, instance: usize, trial: usize, trials_per_instance: usize) -> u64 {
    let counter = (instance as u64)
        .wrapping_mul(trials_per_instance as u64)
        .wrapping_add(trial as u64);
    derive_seed(master, counter)
}

/// Independent seed for sub-stream `stream` of a master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs every setup on every model, `trials_per_instance` times each.
pub fn run_batch(
    models: &[HyperIsingModel],
    setups: &[SolverSetup],
    batch: &BatchConfig,
) -> Result<BatchReport> {
    for s in setups {
        s.trial_config().validate()?;
    }
    if batch.trials_per_instance == 0 {
        return Err(Error::InvalidParameter("trials per instance must be positive".into()));
    }
    let trials = batch.trials_per_instance;
    let jobs: Vec<(usize, usize, usize)> = (0..setups.len())
        .flat_map(|s| (0..models.len()).flat_map(move |i| (0..trials).map(move |t| (s, i, t))))
        .collect();
    let outcomes: Vec<Option<Option<usize>>> = par::map_collect(batch.exec, jobs, |(s, i, t)| {
        let seed = trial_seed(batch.seed, i, t, trials);
        match run_trial(&models[i], &setups[s].trial_config(), seed) {
            Ok(r) => Some(r.first_success_step),
            Err(_) => None,
        }
    });

    let per_setup = models.len() * trials;
    let reports = setups
        .iter()
        .zip(outcomes.chunks(per_setup.max(1)))
        .map(|(setup, chunk)| summarize(setup, models.len(), trials, chunk))
        .collect();
    Ok(BatchReport { setups: reports })
}

fn summarize(setup: &SolverSetup, instances: usize, trials: usize, outcomes: &[Option<Option<usize>>]) -> SetupReport {
    let steps = setup.adam.steps;
    let diverged = outcomes.iter().filter(|o| o.is_none()).count();
    // success_at[i][t-1] = trials of instance i satisfied by step t
    let mut per_instance = vec![vec![0usize; steps]; instances];
    for (i, chunk) in outcomes.chunks(trials).enumerate() {
        let mut firsts = vec![0usize; steps + 1];
        for step in chunk.iter().flatten().flatten() {
            firsts[*step] += 1;
        }
        let mut running = firsts[0];
        for t in 1..=steps {
            running += firsts[t];
            per_instance[i][t - 1] = running;
        }
    }
    let total = (instances * trials).max(1) as f64;
    let mut pooled = Vec::with_capacity(steps);
    let (mut median, mut q1, mut q3) = (Vec::new(), Vec::new(), Vec::new());
    for t in 0..steps {
        pooled.push(per_instance.iter().map(|r| r[t]).sum::<usize>() as f64 / total);
        let mut rates: Vec<f64> = per_instance.iter().map(|r| r[t] as f64 / trials as f64).collect();
        rates.sort_by(|a, b| a.total_cmp(b));
        median.push(quantile(&rates, 0.5));
        q1.push(quantile(&rates, 0.25));
        q3.push(quantile(&rates, 0.75));
    }
    SetupReport {
        label: setup.label.clone(),
        steps,
        instances,
        trials: instances * trials,
        diverged,
        pooled,
        median,
        q1,
        q3,
    }
}

/// Linear interpolation between order statistics of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

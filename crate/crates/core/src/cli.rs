//! Command-line front end: `expand`, `solve`, `trace`, `generate-ple`, `bench`.
//!
//! All CSV outputs start with a `# <schema> v<version>: <columns>` line
//! followed by the column header.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;

use crate::constraints::{compile_general, symmetric_numerators, Constraint, ConstraintKind, FourierTable, Literal};
use crate::error::Error;
use crate::estimators::{GradientProvider, MoreauParams, DEFAULT_TWO_POINT_DELTA};
use crate::hamiltonian::{ground_energy, weak_convexity_bound, HyperIsingModel, Relaxation};
use crate::instances::{encoding_stats, generate_ple, parse, serialize, to_model, PleSpec, WeightRule};
use crate::optimizer::{
    derive_seed, initial_state, run_batch, run_trial, run_trial_from, trial_seed, AdamConfig, BatchConfig, SolverSetup,
    TrialConfig, TrialResult,
};
use crate::par::{self, Exec};
use crate::Spin;

pub const TRACE_SCHEMA: &str = "# hoising-trace v1: step,a1,a2,objective,grad1,grad2";
pub const BENCH_SCHEMA: &str = "# hoising-bench v1: n,relaxation,gradient,step,pooled,median,q1,q3";
pub const SUMMARY_SCHEMA: &str =
    "# hoising-bench-summary v1: n,relaxation,gradient,instances,trials,diverged,pooled,median,q1,q3";
pub const STATS_SCHEMA: &str = "# hoising-stats v1: n,vars,edges,max_arity,fourier_terms";
pub const SOLVE_SCHEMA: &str = "hoising-solve/1";

/// Largest PLE size benchmarked with Moreau gradients without `--force`.
const MOREAU_MAX_N: usize = 8;

#[derive(Parser, Debug)]
#[command(name = "hoising", version, about = "Higher-order Ising simulator and solver for hybrid SAT")]
struct Cli {
    /// Worker threads for trials; 1 runs everything sequentially.
    #[arg(long, global = true, env = "HOISING_JOBS")]
    jobs: Option<usize>,
    /// Master seed. Drawn from entropy and reported on stderr when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the Walsh-Fourier coefficients of one constraint.
    Expand(ExpandArgs),
    /// Run descent trials on a hybrid formula and report JSON.
    Solve(SolveArgs),
    /// Export one two-variable descent trajectory as CSV.
    Trace(TraceArgs),
    /// Write parity-learning-with-error instances.
    GeneratePle(GenerateArgs),
    /// Success-rate curves on generated instances, or encoding sizes with --stats.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct KindArgs {
    /// At least K inputs true.
    #[arg(long, value_name = "K")]
    card: Option<usize>,
    /// Odd number of inputs true.
    #[arg(long)]
    xor: bool,
    /// At least one input true.
    #[arg(long)]
    clause: bool,
    /// Truth table of 2^d characters, `1` or `T` where satisfied. Character i
    /// is the input pattern whose bit j is set iff input j+1 is true.
    #[arg(long, value_name = "BITS")]
    table: Option<String>,
}

impl KindArgs {
    fn build(&self, arity: Option<usize>, negate: &[usize]) -> Result<Constraint, Failure> {
        let table = match &self.table {
            Some(bits) => Some(parse_table(bits)?),
            None => None,
        };
        let d = match (&table, arity) {
            (Some(t), Some(d)) if 1usize.checked_shl(d as u32) != Some(t.len()) => {
                return Err(Failure::input(format!(
                    "truth table has {} entries, arity {d} needs 2^{d}",
                    t.len()
                )))
            }
            (Some(t), _) => t.len().trailing_zeros() as usize,
            (None, Some(d)) => d,
            (None, None) => return Err(Failure::input("--arity is required")),
        };
        if let Some(&i) = negate.iter().find(|&&i| i == 0 || i > d) {
            return Err(Failure::input(format!("--negate position {i} is outside 1..={d}")));
        }
        let literals = (1..=d)
            .map(|v| Literal {
                var: v,
                negated: negate.contains(&v),
            })
            .collect();
        let kind = if let Some(k) = self.card {
            ConstraintKind::CardGe(k)
        } else if self.xor {
            ConstraintKind::Xor
        } else if self.clause {
            ConstraintKind::Clause
        } else {
            ConstraintKind::TruthTable(table.expect("group requires one kind"))
        };
        Ok(Constraint::new(kind, literals)?)
    }
}

fn parse_table(bits: &str) -> Result<Vec<Spin>, Failure> {
    let table = bits
        .chars()
        .map(|ch| match ch {
            '1' | 'T' | 't' => Ok(-1),
            '0' | 'F' | 'f' => Ok(1),
            other => Err(Failure::input(format!("invalid truth-table character `{other}`"))),
        })
        .collect::<Result<Vec<Spin>, _>>()?;
    if !table.len().is_power_of_two() || table.len() < 2 {
        return Err(Failure::input(format!(
            "truth table length {} is not 2^d with d >= 1",
            table.len()
        )));
    }
    Ok(table)
}

#[derive(Args, Debug)]
struct ExpandArgs {
    #[command(flatten)]
    kind: KindArgs,
    /// Number of inputs (implied by --table).
    #[arg(long)]
    arity: Option<usize>,
    /// Comma-separated 1-based input positions to negate.
    #[arg(long, value_delimiter = ',')]
    negate: Vec<usize>,
    /// Print every subset coefficient in the original inputs instead of the
    /// degree-indexed form.
    #[arg(long)]
    subsets: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GradientKind {
    Exact,
    TwoPoint,
    Moreau,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum WeightArg {
    Unit,
    Arity,
}

impl From<WeightArg> for WeightRule {
    fn from(w: WeightArg) -> Self {
        match w {
            WeightArg::Unit => WeightRule::Unit,
            WeightArg::Arity => WeightRule::Arity,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct AdamArgs {
    /// ADAM learning rate [default: 0.05, or 1 for moreau]
    #[arg(long)]
    lr: Option<f64>,
    /// Gradient steps per trial [default: 500, or 10000 for moreau]
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,
}

impl AdamArgs {
    fn config(&self, kind: GradientKind) -> AdamConfig {
        let base = match kind {
            GradientKind::Moreau => AdamConfig::moreau(),
            _ => AdamConfig::default(),
        };
        AdamConfig {
            lr: self.lr.unwrap_or(base.lr),
            steps: self.steps.unwrap_or(base.steps),
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct EstimatorArgs {
    /// Two-point perturbation size.
    #[arg(long, default_value_t = DEFAULT_TWO_POINT_DELTA)]
    fd_delta: f64,
    /// Moreau envelope time t.
    #[arg(long, default_value_t = 1.0)]
    moreau_t: f64,
    /// Moreau alpha.
    #[arg(long, default_value_t = 1.0)]
    moreau_alpha: f64,
    /// Moreau softmax temperature.
    #[arg(long, default_value_t = 1.0)]
    moreau_delta: f64,
    /// Moreau samples per gradient.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

impl EstimatorArgs {
    fn provider(&self, kind: GradientKind, exec: Exec) -> GradientProvider {
        match kind {
            GradientKind::Exact => GradientProvider::Exact,
            GradientKind::TwoPoint => GradientProvider::TwoPoint { delta: self.fd_delta },
            GradientKind::Moreau => GradientProvider::Moreau(MoreauParams {
                t: self.moreau_t,
                alpha: self.moreau_alpha,
                delta: self.moreau_delta,
                samples: self.samples,
                exec,
            }),
        }
    }
}

#[derive(Args, Debug)]
struct SetupArgs {
    /// type-I, type-II or type-III.
    #[arg(long, default_value = "type-I")]
    relaxation: Relaxation,
    /// Locking strength of the type-II relaxation.
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, value_enum, default_value_t = GradientKind::Exact)]
    gradient: GradientKind,
    #[command(flatten)]
    adam: AdamArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

impl SetupArgs {
    fn trial_config(&self, exec: Exec) -> TrialConfig {
        let mut cfg = TrialConfig::new(
            self.relaxation,
            self.estimator.provider(self.gradient, exec),
            self.adam.config(self.gradient),
        );
        cfg.p = self.p;
        cfg
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Hybrid formula file, or `-` for stdin.
    file: PathBuf,
    #[command(flatten)]
    setup: SetupArgs,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Weight of constraints without an explicit `w`.
    #[arg(long, value_enum, default_value_t = WeightArg::Arity)]
    weights: WeightArg,
    /// Keep descending after a trial is satisfied.
    #[arg(long)]
    full_runs: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[command(flatten)]
    kind: KindArgs,
    /// Comma-separated input positions (1 or 2) to negate.
    #[arg(long, value_delimiter = ',')]
    negate: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    weight: f64,
    #[command(flatten)]
    setup: SetupArgs,
    /// Start point `a1,a2`; random from the seed when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    init: Option<Vec<f64>>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Parity bits.
    #[arg(long)]
    n: usize,
    /// Samples [default: 2n]
    #[arg(long)]
    m: Option<usize>,
    /// Fault fraction as `num/den`.
    #[arg(long, default_value = "1/2")]
    noise: String,
    /// Number of instances; instance i uses seed + i.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Directory for `ple-n<n>-<i>.hybrid` files; stdout when absent.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated PLE sizes.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    n: Vec<usize>,
    /// Print encoding sizes instead of running trials.
    #[arg(long)]
    stats: bool,
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "type-I,type-II,type-III")]
    relaxations: Vec<Relaxation>,
    #[arg(long, value_delimiter = ',', value_enum, default_value = "exact")]
    gradients: Vec<GradientKind>,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[command(flatten)]
    adam: AdamArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long, value_enum, default_value_t = WeightArg::Arity)]
    weights: WeightArg,
    /// Allow moreau gradients above n = 8.
    #[arg(long)]
    force: bool,
    /// Write the per-step CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the summary CSV here instead of stderr.
    #[arg(long)]
    summary: Option<PathBuf>,
}

/// A failed command: exit code and message for stderr.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            return Failure {
                code: 0,
                message: String::new(),
            };
        }
        Failure::input(format!("i/o error: {e}"))
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let exec = match cli.jobs {
        Some(0) => {
            let _ = writeln!(err, "error: --jobs must be at least 1");
            return 2;
        }
        Some(1) => Exec::Sequential,
        Some(j) => {
            par::set_jobs(j);
            Exec::Parallel
        }
        None => Exec::Parallel,
    };
    let result = match &cli.command {
        Command::Expand(a) => cmd_expand(a, out),
        Command::Solve(a) => cmd_solve(a, resolve_seed(cli.seed, err), exec, out),
        Command::Trace(a) => cmd_trace(a, resolve_seed(cli.seed, err), exec, out, err),
        Command::GeneratePle(a) => cmd_generate(a, resolve_seed(cli.seed, err), out),
        Command::Bench(a) => cmd_bench(a, resolve_seed(cli.seed, err), exec, out, err),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            if !f.message.is_empty() {
                let _ = writeln!(err, "error: {}", f.message);
            }
            f.code
        }
    }
}

fn resolve_seed(seed: Option<u64>, err: &mut dyn Write) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        let _ = writeln!(err, "seed: {s}");
        s
    })
}

fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// `num / 2^exp` in lowest terms.
fn dyadic(num: &BigInt, mut exp: usize) -> String {
    if num.is_zero() {
        return "0".into();
    }
    let mut num = num.clone();
    let two = BigInt::from(2);
    while exp > 0 && (&num % &two).is_zero() {
        num /= &two;
        exp -= 1;
    }
    if exp == 0 {
        num.to_string()
    } else {
        format!("{num}/{}", BigInt::from(1) << exp)
    }
}

fn describe(c: &Constraint) -> String {
    let lits: Vec<String> = c.literals().iter().map(|l| l.to_string()).collect();
    let kind = match c.kind() {
        ConstraintKind::CardGe(k) => format!("card>={k}"),
        other => other.name().to_string(),
    };
    format!("{kind} over ({})", lits.join(" "))
}

fn cmd_expand(a: &ExpandArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let c = a.kind.build(a.arity, &a.negate)?;
    let d = c.arity();
    let mut text = String::new();
    if c.is_symmetric() && !a.subsets {
        let folded = if c.literals().iter().any(|l| l.negated) {
            ", in sign-folded inputs"
        } else {
            ""
        };
        let _ = writeln!(
            text,
            "# {}: degree-indexed, shared by every subset of size k{folded}",
            describe(&c)
        );
        text.push_str("degree,fraction,decimal\n");
        let numerators = symmetric_numerators(&c)?;
        let scale = 0.5f64.powi(d as i32);
        for (k, num) in numerators.iter().enumerate() {
            let value = num_traits::ToPrimitive::to_f64(num).unwrap_or(f64::NAN) * scale;
            let _ = writeln!(text, "{k},{},{value}", dyadic(num, d));
        }
    } else {
        let FourierTable::General { coeffs, .. } = compile_general(&c)? else {
            unreachable!("compile_general returns a general table")
        };
        let _ = writeln!(text, "# {}: nonzero subset coefficients", describe(&c));
        text.push_str("subset,fraction,decimal\n");
        let mut entries: Vec<(u32, f64)> = coeffs.into_iter().collect();
        let members = |mask: u32| (0..d).filter(move |i| mask >> i & 1 == 1);
        entries.sort_by_key(|&(mask, _)| (mask.count_ones(), members(mask).collect::<Vec<_>>()));
        for (mask, value) in entries {
            let vars: Vec<String> = members(mask).map(|i| (i + 1).to_string()).collect();
            let num = BigInt::from((value * (1u64 << d) as f64) as i64);
            let _ = writeln!(text, "{{{}}},{},{value}", vars.join(" "), dyadic(&num, d));
        }
    }
    out.write_all(text.as_bytes())?;
    Ok(0)
}

#[derive(Serialize)]
struct BestTrial {
    trial: usize,
    satisfied: bool,
    first_success_step: Option<usize>,
    /// Hamiltonian at the rounded assignment.
    energy: f64,
    relaxed_objective: f64,
    assignment: Vec<Spin>,
}

#[derive(Serialize)]
struct SolveReport {
    schema: &'static str,
    instance: String,
    variables: usize,
    edges: usize,
    relaxation: String,
    p: f64,
    gradient: &'static str,
    lr: f64,
    steps: usize,
    trials: usize,
    seed: u64,
    successes: usize,
    diverged: usize,
    success_rate: f64,
    first_success_step: Option<usize>,
    best_energy: Option<f64>,
    best: Option<BestTrial>,
    ground_energy: f64,
    target_energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_energy_p1: Option<f64>,
    weak_convexity: BTreeMap<String, f64>,
}

fn read_input(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
    }
}

fn better(a: &TrialResult, b: &TrialResult) -> bool {
    match (a.first_success_step, b.first_success_step) {
        (Some(x), Some(y)) => x < y,
        (Some(_), None) => true,
        (None, Some(_)) => false,
        (None, None) => a.final_hamiltonian < b.final_hamiltonian,
    }
}

fn cmd_solve(a: &SolveArgs, seed: u64, exec: Exec, out: &mut dyn Write) -> Result<i32, Failure> {
    let text = read_input(&a.file)?;
    let formula = parse(&text).map_err(|e| Failure::input(format!("{}: {e}", a.file.display())))?;
    let model = to_model(&formula, a.weights.into())?;
    let mut cfg = a.setup.trial_config(exec);
    cfg.early_stop = !a.full_runs;
    cfg.validate()?;
    if a.trials == 0 {
        return Err(Failure::input("--trials must be positive"));
    }
    let results = par::map_range(exec, a.trials, |t| run_trial(&model, &cfg, trial_seed(seed, 0, t, a.trials)));

    let mut best: Option<(usize, &TrialResult)> = None;
    let (mut successes, mut diverged) = (0, 0);
    for (t, r) in results.iter().enumerate() {
        let Ok(r) = r else {
            diverged += 1;
            continue;
        };
        successes += usize::from(r.success);
        if best.is_none_or(|(_, b)| better(r, b)) {
            best = Some((t, r));
        }
    }
    let rel = cfg.relaxation;
    let weak_convexity = Relaxation::ALL
        .iter()
        .map(|&r| (r.to_string(), weak_convexity_bound(&model, r, cfg.p)))
        .collect();
    let report = SolveReport {
        schema: SOLVE_SCHEMA,
        instance: a.file.display().to_string(),
        variables: model.n(),
        edges: model.edges().len(),
        relaxation: rel.to_string(),
        p: cfg.p,
        gradient: cfg.provider.name(),
        lr: cfg.adam.lr,
        steps: cfg.adam.steps,
        trials: a.trials,
        seed,
        successes,
        diverged,
        success_rate: successes as f64 / a.trials as f64,
        first_success_step: best.and_then(|(_, b)| b.first_success_step),
        best_energy: best.map(|(_, b)| b.final_hamiltonian),
        best: best.map(|(t, b)| BestTrial {
            trial: t,
            satisfied: b.success,
            first_success_step: b.first_success_step,
            energy: b.final_hamiltonian,
            relaxed_objective: b.final_energy,
            assignment: b.final_assignment.clone(),
        }),
        ground_energy: ground_energy(&model),
        target_energy: rel.target_energy(&model, cfg.p),
        target_energy_p1: (cfg.p != 1.0 && rel == Relaxation::TypeII).then(|| rel.target_energy(&model, 1.0)),
        weak_convexity,
    };
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| Failure::input(e.to_string()))?;
    json.push('\n');
    emit(a.output.as_deref(), &json, out)?;
    Ok(if successes > 0 { 0 } else { 1 })
}

fn cmd_trace(a: &TraceArgs, seed: u64, exec: Exec, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let c = a.kind.build(Some(2), &a.negate)?;
    if c.arity() != 2 {
        return Err(Failure::input(format!("trace needs a 2-input constraint, got arity {}", c.arity())));
    }
    let model = HyperIsingModel::from_constraints(2, [(c, a.weight)])?;
    let mut cfg = a.setup.trial_config(exec);
    cfg.record_trajectory = true;
    cfg.validate()?;
    let init = match &a.init {
        Some(v) if v.len() == 2 => v.clone(),
        Some(v) => return Err(Failure::input(format!("--init needs 2 values, got {}", v.len()))),
        None => {
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(derive_seed(seed, 0));
            initial_state(2, cfg.relaxation, cfg.p, &mut rng)
        }
    };
    let r = run_trial_from(&model, &cfg, init, seed)?;
    let mut text = String::new();
    let _ = writeln!(text, "{TRACE_SCHEMA}");
    text.push_str("step,a1,a2,objective,grad1,grad2\n");
    for pt in r.trajectory.as_deref().unwrap_or_default() {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            pt.step, pt.state[0], pt.state[1], pt.objective, pt.gradient[0], pt.gradient[1]
        );
    }
    emit(a.output.as_deref(), &text, out)?;
    let _ = writeln!(
        err,
        "final a = ({}, {}), satisfied: {}, first success step: {}",
        r.final_state[0],
        r.final_state[1],
        r.success,
        r.first_success_step.map_or("none".into(), |s| s.to_string())
    );
    Ok(0)
}

fn parse_noise(s: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::input(format!("--noise expects `num/den`, got `{s}`"));
    let (num, den) = s.split_once('/').ok_or_else(bad)?;
    Ok((num.trim().parse().map_err(|_| bad())?, den.trim().parse().map_err(|_| bad())?))
}

/// PLE text with the planted assignment appended as a DIMACS-style comment.
fn ple_text(spec: &PleSpec) -> Result<String, Failure> {
    let inst = generate_ple(spec)?;
    let mut formula = inst.formula;
    let planted: Vec<String> = inst
        .planted
        .iter()
        .enumerate()
        .map(|(i, &s)| if s == -1 { format!("{}", i + 1) } else { format!("-{}", i + 1) })
        .collect();
    formula.comments.push(format!("planted {}", planted.join(" ")));
    Ok(serialize(&formula)?)
}

fn cmd_generate(a: &GenerateArgs, seed: u64, out: &mut dyn Write) -> Result<i32, Failure> {
    let (noise_num, noise_den) = parse_noise(&a.noise)?;
    if a.count == 0 {
        return Err(Failure::input("--count must be positive"));
    }
    let spec = |i: usize| PleSpec {
        n: a.n,
        m: a.m.unwrap_or(2 * a.n),
        noise_num,
        noise_den,
        seed: seed.wrapping_add(i as u64),
    };
    match &a.out_dir {
        None if a.count > 1 => Err(Failure::input("--count above 1 needs --out-dir")),
        None => {
            out.write_all(ple_text(&spec(0))?.as_bytes())?;
            Ok(0)
        }
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for i in 0..a.count {
                let path = dir.join(format!("ple-n{}-{i:03}.hybrid", a.n));
                fs::write(&path, ple_text(&spec(i))?)?;
                writeln!(out, "{}", path.display())?;
            }
            Ok(0)
        }
    }
}

fn bench_instances(n: usize, count: usize, master: u64) -> Result<Vec<PleSpec>, Failure> {
    if n < 2 {
        return Err(Failure::input(format!("PLE size must be at least 2, got {n}")));
    }
    Ok((0..count)
        .map(|i| PleSpec::new(n, derive_seed(master, (n as u64) << 32 | i as u64)))
        .collect())
}

fn cmd_bench(a: &BenchArgs, seed: u64, exec: Exec, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    if a.stats {
        let mut text = String::new();
        let _ = writeln!(text, "{STATS_SCHEMA}");
        text.push_str("n,vars,edges,max_arity,fourier_terms\n");
        for &n in &a.n {
            let spec = bench_instances(n, 1, seed)?[0];
            let stats = encoding_stats(&generate_ple(&spec)?.formula)?;
            let max_arity = stats.arity_histogram.keys().last().copied().unwrap_or(0);
            let _ = writeln!(
                text,
                "{n},{},{},{max_arity},{}",
                stats.variables, stats.edges, stats.fourier_terms
            );
        }
        emit(a.output.as_deref(), &text, out)?;
        return Ok(0);
    }
    if a.instances == 0 || a.trials == 0 {
        return Err(Failure::input("--instances and --trials must be positive"));
    }
    if a.gradients.contains(&GradientKind::Moreau) {
        let adam = a.adam.config(GradientKind::Moreau);
        for &n in a.n.iter().filter(|&&n| n > MOREAU_MAX_N) {
            let evaluations = (a.instances * a.trials * adam.steps) as f64 * (a.estimator.samples + 1) as f64;
            let cost = format!(
                "moreau gradients cost {} objective evaluations per step; n = {n} with {} instances x {} trials x {} steps is {evaluations:.3e} evaluations",
                a.estimator.samples + 1,
                a.instances,
                a.trials,
                adam.steps
            );
            if !a.force {
                return Err(Failure::input(format!("{cost}; pass --force to run anyway")));
            }
            let _ = writeln!(err, "warning: {cost}");
        }
    }

    let mut csv = String::new();
    let _ = writeln!(csv, "{BENCH_SCHEMA}");
    csv.push_str("n,relaxation,gradient,step,pooled,median,q1,q3\n");
    let mut summary = String::new();
    let _ = writeln!(summary, "{SUMMARY_SCHEMA}");
    summary.push_str("n,relaxation,gradient,instances,trials,diverged,pooled,median,q1,q3\n");
    for &n in &a.n {
        let models = bench_instances(n, a.instances, seed)?
            .iter()
            .map(|spec| Ok(to_model(&generate_ple(spec)?.formula, a.weights.into())?))
            .collect::<Result<Vec<_>, Failure>>()?;
        let mut setups = Vec::new();
        let mut names = Vec::new();
        for &g in &a.gradients {
            for &r in &a.relaxations {
                let mut s = SolverSetup::new(r, a.estimator.provider(g, exec), a.adam.config(g));
                s.p = a.p;
                names.push((r, s.provider.name()));
                setups.push(s);
            }
        }
        let batch = BatchConfig {
            trials_per_instance: a.trials,
            seed,
            exec,
        };
        let report = run_batch(&models, &setups, &batch)?;
        for ((rel, grad), s) in names.iter().zip(&report.setups) {
            for t in 0..s.steps {
                let _ = writeln!(
                    csv,
                    "{n},{rel},{grad},{},{},{},{},{}",
                    t + 1,
                    s.pooled[t],
                    s.median[t],
                    s.q1[t],
                    s.q3[t]
                );
            }
            let last = s.steps.saturating_sub(1);
            let _ = writeln!(
                summary,
                "{n},{rel},{grad},{},{},{},{},{},{},{}",
                s.instances, s.trials, s.diverged, s.pooled[last], s.median[last], s.q1[last], s.q3[last]
            );
        }
    }
    emit(a.output.as_deref(), &csv, out)?;
    match &a.summary {
        Some(p) => fs::write(p, &summary)?,
        None => err.write_all(summary.as_bytes())?,
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("hoising").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn dyadic_fractions() {
        assert_eq!(dyadic(&BigInt::from(-6), 4), "-3/8");
        assert_eq!(dyadic(&BigInt::from(8), 3), "1");
        assert_eq!(dyadic(&BigInt::from(0), 3), "0");
        assert_eq!(dyadic(&BigInt::from(-2), 2), "-1/2");
    }

    #[test]
    fn expand_examples() {
        let (code, out, _) = run_str(&["expand", "--card", "2", "--arity", "4"]);
        assert_eq!(code, 0);
        let rows: Vec<&str> = out.lines().skip(2).collect();
        assert_eq!(
            rows,
            ["0,-3/8,-0.375", "1,3/8,0.375", "2,1/8,0.125", "3,-1/8,-0.125", "4,-3/8,-0.375"]
        );
        let (_, out, _) = run_str(&["expand", "--xor", "--arity", "2"]);
        assert!(out.lines().skip(2).eq(["0,0,0", "1,0,0", "2,1,1"]));
        let (_, out, _) = run_str(&["expand", "--clause", "--arity", "2"]);
        assert!(out.lines().skip(2).eq(["0,-1/2,-0.5", "1,1/2,0.5", "2,1/2,0.5"]));
    }

    #[test]
    fn expand_subsets_and_tables() {
        let (code, out, _) = run_str(&["expand", "--table", "0110"]);
        assert_eq!(code, 0);
        assert!(out.lines().skip(2).eq(["{1 2},1,1"]));
        let (_, out, _) = run_str(&["expand", "--clause", "--arity", "2", "--negate", "2", "--subsets"]);
        assert!(out.lines().skip(2).eq(["{},-1/2,-0.5", "{1},1/2,0.5", "{2},-1/2,-0.5", "{1 2},-1/2,-0.5"]));
    }

    #[test]
    fn expand_errors() {
        assert_eq!(run_str(&["expand", "--xor"]).0, 2);
        assert_eq!(run_str(&["expand", "--xor", "--clause", "--arity", "2"]).0, 2);
        assert_eq!(run_str(&["expand", "--table", "011"]).0, 2);
        assert_eq!(run_str(&["expand", "--card", "5", "--arity", "4"]).0, 2);
        assert_eq!(run_str(&["expand", "--xor", "--arity", "2", "--negate", "3"]).0, 2);
    }

    #[test]
    fn trace_schema_and_rows() {
        let (code, out, _) = run_str(&["trace", "--xor", "--init", "0.4,-0.3", "--steps", "5", "--seed", "1"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], TRACE_SCHEMA);
        assert_eq!(lines[1], "step,a1,a2,objective,grad1,grad2");
        assert_eq!(lines.len(), 2 + 6);
        assert!(lines[2].starts_with("0,0.4,-0.3,"));
    }

    #[test]
    fn unseeded_commands_report_their_seed() {
        let (code, _, err) = run_str(&["generate-ple", "--n", "3"]);
        assert_eq!(code, 0);
        assert!(err.starts_with("seed: "));
    }

    #[test]
    fn generate_is_seeded() {
        let a = run_str(&["generate-ple", "--n", "4", "--seed", "9"]);
        let b = run_str(&["generate-ple", "--n", "4", "--seed", "9"]);
        assert_eq!(a.0, 0);
        assert_eq!(a.1, b.1);
        let f = parse(&a.1).unwrap();
        assert_eq!((f.n, f.constraints.len()), (12, 9));
        assert!(f.comments.last().unwrap().starts_with("planted "));
        assert_eq!(run_str(&["generate-ple", "--n", "1", "--seed", "9"]).0, 2);
        assert_eq!(run_str(&["generate-ple", "--n", "4", "--count", "2"]).0, 2);
    }

    #[test]
    fn bench_refuses_large_moreau_without_force() {
        let (code, _, err) = run_str(&["bench", "--n", "16", "--gradients", "moreau", "--seed", "1"]);
        assert_eq!(code, 2);
        assert!(err.contains("--force"), "{err}");
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_str(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("generate-ple"));
        assert_eq!(run_str(&["frobnicate"]).0, 2);
        assert_eq!(run_str(&["--jobs", "0", "expand", "--xor", "--arity", "2"]).0, 2);
    }
}

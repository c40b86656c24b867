//! `ctrlplace`: Gramian computation, actuator selection, centrality scores,
//! property checks and the randomized experiments from the command line.
//!
//! Exit status: 0 success, 2 invalid input or configuration, 3 numerical
//! failure, 4 property violation reported by `verify`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ctrlplace::centrality::centrality_from_cache;
use ctrlplace::experiment::{
    distribution_csv, histogram_trial, run_eig_compare, run_histogram, EigCompareConfig, HistogramConfig,
};
use ctrlplace::gramian::{finite_gramian, infinite_gramian};
use ctrlplace::io::{matrix_to_csv, matrix_to_rows, parse_candidates_json, read_matrix_csv, to_json_string};
use ctrlplace::linalg::sym_eigenvalues;
use ctrlplace::selection::{BoundCertificate, SelectionResult};
use ctrlplace::systems::{oscillator_network, random_stable_system, OscillatorNetworkConfig, RandomSystemConfig};
use ctrlplace::verify::{run_verify, VerifyConfig};
use ctrlplace::{
    build_cache, solve, Algorithm, CandidateSet, CentralityMeasure, Error, ExtReal, Horizon, MetricKind,
    MetricSpec, MetricValue, RunConfig, SelectionProblem, SingularPolicy, SystemModel,
};

#[derive(Parser, Debug)]
#[command(name = "ctrlplace", version, about = "Gramian-based actuator placement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

/// Flags shared by all commands; each maps onto a [`RunConfig`] field and
/// overrides the value from `--config`.
#[derive(Args, Debug, Default)]
struct Opts {
    /// JSON run configuration; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// State matrix A as CSV.
    #[arg(long, global = true)]
    system: Option<PathBuf>,
    /// Candidate columns as JSON: {"columns": [[...]], "base": [[...]]}.
    #[arg(long, global = true)]
    candidates: Option<PathBuf>,
    /// Input matrix B as CSV.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Output weight C as CSV, for the weighted metrics.
    #[arg(long, global = true)]
    weight: Option<PathBuf>,
    #[arg(long, global = true)]
    metric: Option<MetricKind>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    algorithm: Option<Algorithm>,
    /// `inf` or `t=<positive real>`.
    #[arg(long, global = true)]
    horizon: Option<Horizon>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// State dimension (node count for the oscillator fixture).
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Relative eigenvalue cutoff for rank decisions.
    #[arg(long, global = true)]
    rank_tol: Option<f64>,
    #[arg(long, global = true)]
    singular_policy: Option<SingularPolicy>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Controllability Gramian of (A, B). Writes JSON when --out ends in .json, CSV otherwise.
    Gramian {
        /// Include the ascending eigenvalues (JSON output only).
        #[arg(long)]
        eigenvalues: bool,
    },
    /// Choose k actuators maximizing a Gramian metric.
    Select {
        /// Add the wall time to the output (makes it nondeterministic).
        #[arg(long)]
        timing: bool,
    },
    /// Per-node control energy centrality as CSV: node,score,rank.
    Centrality {
        #[arg(long, default_value = "ac")]
        measure: CentralityMeasure,
    },
    /// Counterexample reproduction and randomized property probes.
    Verify,
    #[command(subcommand)]
    Experiment(Experiment),
    /// Write a fixture state matrix as CSV.
    #[command(subcommand)]
    Generate(Generate),
}

#[derive(Subcommand, Debug)]
enum Experiment {
    /// Greedy against the exhaustive value distribution.
    Histogram {
        #[arg(long)]
        bins: Option<usize>,
        /// Also write every subset value of trial 0 to this CSV.
        #[arg(long)]
        distribution: Option<PathBuf>,
    },
    /// Mean Gramian eigenvalue profiles of greedy choices per metric.
    EigCompare,
}

#[derive(Subcommand, Debug)]
enum Generate {
    /// Random stable system.
    Random,
    /// Damped oscillator ring; velocity-channel candidates go to --candidates.
    Oscillator,
}

enum Failure {
    Lib(Error),
    Violation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Lib(Error::InvalidConfig(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
        Err(Failure::Violation(report)) => {
            eprint!("{report}");
            ExitCode::from(4)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = load_config(&cli)?;
    let workers = cfg.workers;
    let task = || dispatch(&cli.command, &cfg);
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| invalid(format!("cannot start {w} workers: {e}")))?
            .install(task),
        None => task(),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Gramian { .. } => "gramian",
        Command::Select { .. } => "select",
        Command::Centrality { .. } => "centrality",
        Command::Verify => "verify",
        Command::Experiment(Experiment::Histogram { .. }) => "experiment histogram",
        Command::Experiment(Experiment::EigCompare) => "experiment eig-compare",
        Command::Generate(Generate::Random) => "generate random",
        Command::Generate(Generate::Oscillator) => "generate oscillator",
    }
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let o = &cli.opts;
    let file = match &o.config {
        Some(path) => RunConfig::from_json(&read_text(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(c) = &file.command {
        if c != command_name(&cli.command) {
            return Err(invalid(format!(
                "config is for command {c:?}, not {:?}",
                command_name(&cli.command)
            )));
        }
    }
    let mut tolerances = file.tolerances;
    if let Some(r) = o.rank_tol {
        tolerances = Some(tolerances.unwrap_or_default().with_rank_rel(r));
    }
    let flags = RunConfig {
        command: None,
        system: o.system.clone(),
        candidates: o.candidates.clone(),
        input: o.input.clone(),
        weight: o.weight.clone(),
        metric: o.metric,
        k: o.k,
        algorithm: o.algorithm,
        horizon: o.horizon,
        tolerances,
        singular_policy: o.singular_policy,
        seed: o.seed,
        trials: o.trials,
        n: o.n,
        out: o.out.clone(),
        workers: o.workers,
    };
    let cfg = file.merge(flags);
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(command: &Command, cfg: &RunConfig) -> CliResult<()> {
    match command {
        Command::Gramian { eigenvalues } => cmd_gramian(cfg, *eigenvalues),
        Command::Select { timing } => cmd_select(cfg, *timing),
        Command::Centrality { measure } => cmd_centrality(cfg, *measure),
        Command::Verify => cmd_verify(cfg),
        Command::Experiment(Experiment::Histogram { bins, distribution }) => {
            cmd_histogram(cfg, *bins, distribution.as_deref())
        }
        Command::Experiment(Experiment::EigCompare) => cmd_eig_compare(cfg),
        Command::Generate(Generate::Random) => cmd_generate_random(cfg),
        Command::Generate(Generate::Oscillator) => cmd_generate_oscillator(cfg),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| invalid(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn is_json(path: Option<&Path>) -> bool {
    path.and_then(Path::extension).is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn load_model(cfg: &RunConfig) -> CliResult<SystemModel> {
    let path = cfg.system.as_deref().ok_or_else(|| invalid("--system is required"))?;
    Ok(SystemModel::with_tolerances(read_matrix_csv(path)?, cfg.tolerances())?)
}

fn load_candidates(cfg: &RunConfig, n: usize) -> CliResult<CandidateSet> {
    match (&cfg.candidates, &cfg.input) {
        (Some(_), Some(_)) => Err(invalid("give either --candidates or --input, not both")),
        (Some(path), None) => Ok(parse_candidates_json(&read_text(path)?, n)?),
        (None, Some(path)) => {
            let b = read_matrix_csv(path)?;
            if b.nrows() != n {
                return Err(Error::DimensionMismatch(format!("input matrix has {} rows, state dimension is {n}", b.nrows())).into());
            }
            Ok(CandidateSet::from_matrix(&b))
        }
        (None, None) => Ok(CandidateSet::unit_vectors(n)),
    }
}

fn load_metric(cfg: &RunConfig, default: MetricKind) -> CliResult<MetricSpec> {
    let mut spec = MetricSpec::new(cfg.metric.unwrap_or(default));
    if let Some(policy) = cfg.singular_policy {
        spec = spec.with_policy(policy);
    }
    if let Some(path) = &cfg.weight {
        spec = spec.with_weight(read_matrix_csv(path)?)?;
    }
    Ok(spec)
}

#[derive(Serialize)]
struct GramianOutput {
    horizon: Horizon,
    gramian: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eigenvalues: Option<Vec<f64>>,
}

fn cmd_gramian(cfg: &RunConfig, eigenvalues: bool) -> CliResult<()> {
    let model = load_model(cfg)?;
    let n = model.dim();
    let b = match (&cfg.input, &cfg.candidates) {
        (None, None) => return Err(invalid("gramian needs --input or --candidates")),
        _ => {
            let cands = load_candidates(cfg, n)?;
            let all: Vec<usize> = (0..cands.len()).collect();
            cands.stacked(&all)?
        }
    };
    let horizon = cfg.horizon.unwrap_or(Horizon::Infinite);
    let w = match horizon {
        Horizon::Infinite => infinite_gramian(&model, &b)?,
        Horizon::Finite(t) => finite_gramian(model.a(), &b, t)?,
    };
    let out = cfg.out.as_deref();
    if is_json(out) {
        let doc = GramianOutput {
            horizon,
            eigenvalues: eigenvalues.then(|| sym_eigenvalues(&w)),
            gramian: matrix_to_rows(&w),
        };
        emit(out, &(to_json_string(&doc)? + "\n"))
    } else {
        emit(out, &matrix_to_csv(&w))
    }
}

#[derive(Serialize)]
struct SelectOutput<'a> {
    algorithm: Algorithm,
    metric: MetricKind,
    k: usize,
    horizon: Horizon,
    /// 1-based candidate indices in selection order.
    chosen: Vec<usize>,
    gains: &'a [ExtReal],
    final_value: &'a MetricValue,
    bound: &'a Option<BoundCertificate>,
    evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_s: Option<f64>,
}

fn cmd_select(cfg: &RunConfig, timing: bool) -> CliResult<()> {
    let model = load_model(cfg)?;
    let cands = load_candidates(cfg, model.dim())?;
    let k = cfg.k.ok_or_else(|| invalid("--k is required"))?;
    let horizon = cfg.horizon.unwrap_or(Horizon::Infinite);
    let metric = load_metric(cfg, MetricKind::LogDet)?;
    let algorithm = cfg.algorithm.unwrap_or(Algorithm::Greedy);
    let start = Instant::now();
    let cache = build_cache(&model, &cands, horizon)?;
    let problem = SelectionProblem::new(&cache, metric, k, cfg.tolerances())?;
    let result: SelectionResult = solve(&problem, algorithm)?;
    let elapsed = start.elapsed().as_secs_f64();
    let doc = SelectOutput {
        algorithm: result.algorithm,
        metric: problem.metric().kind(),
        k,
        horizon,
        chosen: result.chosen.iter().map(|i| i + 1).collect(),
        gains: &result.gains,
        final_value: &result.final_value,
        bound: &result.bound,
        evaluations: result.evaluations,
        wall_time_s: timing.then_some(elapsed),
    };
    emit(cfg.out.as_deref(), &(to_json_string(&doc)? + "\n"))
}

fn cmd_centrality(cfg: &RunConfig, measure: CentralityMeasure) -> CliResult<()> {
    let model = load_model(cfg)?;
    model.require_stable()?;
    let cands = load_candidates(cfg, model.dim())?;
    let cache = build_cache(&model, &cands, cfg.horizon.unwrap_or(Horizon::Infinite))?;
    let report = centrality_from_cache(&cache, measure, &cfg.tolerances())?;
    let ranks = report.ranks();
    let mut text = String::from("node,score,rank\n");
    for (i, (score, rank)) in report.scores.iter().zip(&ranks).enumerate() {
        text.push_str(&format!("{},{},{rank}\n", i + 1, ctrlplace::io::format_f64(*score)));
    }
    emit(cfg.out.as_deref(), &text)
}

fn cmd_verify(cfg: &RunConfig) -> CliResult<()> {
    let mut vc = VerifyConfig::new(cfg.require_seed("verify")?);
    if let Some(t) = cfg.trials {
        vc.trials = t;
    }
    if let Some(n) = cfg.n {
        vc.n = n;
    }
    vc.tolerances = cfg.tolerances();
    let report = run_verify(&vc)?;
    let out = cfg.out.as_deref();
    if is_json(out) {
        emit(out, &(to_json_string(&report)? + "\n"))?;
    } else {
        emit(out, &report.to_text())?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Violation(report.to_text()))
    }
}

/// Writes `files` into the `--out` directory, or prints the first one.
fn emit_bundle(out: Option<&Path>, files: &[(&str, String)]) -> CliResult<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| invalid(format!("cannot create {}: {e}", dir.display())))?;
            for (name, text) in files {
                emit(Some(&dir.join(name)), text)?;
            }
            Ok(())
        }
        None => emit(None, &files[0].1),
    }
}

fn cmd_histogram(cfg: &RunConfig, bins: Option<usize>, distribution: Option<&Path>) -> CliResult<()> {
    let mut hc = HistogramConfig::new(cfg.require_seed("experiment histogram")?);
    if let Some(n) = cfg.n {
        hc.system.n = n;
    }
    if let Some(k) = cfg.k {
        hc.k = k;
    }
    if let Some(m) = cfg.metric {
        hc.metric = m;
    }
    if let Some(t) = cfg.trials {
        hc.trials = t;
    }
    if let Some(b) = bins {
        hc.bins = b;
    }
    hc.tolerances = cfg.tolerances();
    let mut summary = run_histogram(&hc)?;
    if let Some(path) = distribution {
        let (record, values) = histogram_trial(&hc, 0)?;
        emit(Some(path), &distribution_csv(&record, &values, hc.system.n))?;
    }
    for t in &mut summary.trials {
        t.greedy_chosen.iter_mut().for_each(|i| *i += 1);
    }
    emit_bundle(
        cfg.out.as_deref(),
        &[
            ("summary.json", to_json_string(&summary)? + "\n"),
            ("trials.csv", summary.trials_csv()),
            ("histogram.csv", summary.histogram_csv()),
        ],
    )
}

fn cmd_eig_compare(cfg: &RunConfig) -> CliResult<()> {
    let mut ec = EigCompareConfig::new(cfg.require_seed("experiment eig-compare")?);
    if let Some(n) = cfg.n {
        ec.system.n = n;
    }
    if let Some(k) = cfg.k {
        ec.k = k;
    }
    if let Some(t) = cfg.trials {
        ec.trials = t;
    }
    if let Some(m) = cfg.metric {
        ec.metrics = vec![m];
    }
    ec.tolerances = cfg.tolerances();
    let summary = run_eig_compare(&ec)?;
    emit_bundle(
        cfg.out.as_deref(),
        &[
            ("profiles.csv", summary.to_csv()),
            ("summary.json", to_json_string(&summary)? + "\n"),
        ],
    )
}

fn cmd_generate_random(cfg: &RunConfig) -> CliResult<()> {
    let n = cfg.n.ok_or_else(|| invalid("--n is required"))?;
    let model = random_stable_system(&RandomSystemConfig::new(n, cfg.require_seed("generate random")?))?;
    emit(cfg.out.as_deref(), &matrix_to_csv(model.a()))
}

fn cmd_generate_oscillator(cfg: &RunConfig) -> CliResult<()> {
    let nodes = cfg.n.ok_or_else(|| invalid("--n is required"))?;
    let net = OscillatorNetworkConfig::ring(nodes, cfg.require_seed("generate oscillator")?);
    let (model, cands) = oscillator_network(&net)?;
    if let Some(path) = &cfg.candidates {
        let file = ctrlplace::io::CandidatesFile::from_candidate_set(&cands);
        emit(Some(path), &(to_json_string(&file)? + "\n"))?;
    }
    emit(cfg.out.as_deref(), &matrix_to_csv(model.a()))
}

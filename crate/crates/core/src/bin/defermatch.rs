use std::fs::{File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use defermatch::bandit::RewardMode;
use defermatch::experiment::{
    analyze_dataset, emit_results, run_experiment, simulate_fixed_b, ExperimentConfig, HumanSource, HumanSpec,
};
use defermatch::human::{load_records, load_tasks, write_tasks, CompletionStrategy, SimulatedHuman, TaskEntry, TaskStore};
use defermatch::rng::stream;
use defermatch::scoregen::{sample_instance, GeneratorConfig};
use defermatch::session::{generate_task_pool, serve, ServeOptions, SessionManager, SystemClock};
use defermatch::{brute_force_matching, matching_utility, solve_imperfect_matching, Error, MatchInstance, Scores};

#[derive(Parser)]
#[command(name = "defermatch", version, about = "Human-AI collaborative matching engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw synthetic task instances.
    Generate(GenerateArgs),
    /// Solve one imperfect matching.
    Solve(SolveArgs),
    /// Roll out a fixed deferral count.
    Simulate(SimulateArgs),
    /// Run the UCB1 experiment and write its results.
    Bandit(BanditArgs),
    /// Filter and stratify a recorded dataset.
    Analyze(AnalyzeArgs),
    /// Start the session service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator config (TOML); defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout if absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreArg {
    Confidence,
    SuccessProb,
}

impl From<ScoreArg> for Scores {
    fn from(s: ScoreArg) -> Self {
        match s {
            ScoreArg::Confidence => Scores::Confidence,
            ScoreArg::SuccessProb => Scores::SuccessProb,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// A JSON instance, or a tasks file together with --task.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    b: usize,
    #[arg(long, value_enum, default_value = "confidence")]
    scores: ScoreArg,
    /// Use exhaustive search instead of min-cost flow.
    #[arg(long)]
    brute_force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Greedy,
    NoisyGreedy,
    CapacityLimited,
}

#[derive(Args)]
struct PolicyOpts {
    #[arg(long, value_enum, default_value = "greedy")]
    policy: PolicyArg,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10.0)]
    seconds_per_decision: f64,
}

impl PolicyOpts {
    fn build(&self) -> SimulatedHuman {
        match self.policy {
            PolicyArg::Greedy => SimulatedHuman::Greedy,
            PolicyArg::NoisyGreedy => SimulatedHuman::NoisyGreedy { sigma: self.sigma },
            PolicyArg::CapacityLimited => SimulatedHuman::CapacityLimited {
                sigma: self.sigma,
                seconds_per_decision: self.seconds_per_decision,
                time_budget: 120.0,
            },
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment config (TOML) for generator, human and reward settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    b: usize,
    #[arg(long, default_value_t = 1000)]
    count: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured human.
    #[command(flatten)]
    policy: Option<PolicyOpts>,
    #[arg(long, value_enum)]
    completion: Option<CompletionArg>,
    /// Write per-rollout logs as JSON lines.
    #[arg(long)]
    logs: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CompletionArg {
    LeaveUnassigned,
    RandomFill,
}

impl From<CompletionArg> for CompletionStrategy {
    fn from(c: CompletionArg) -> Self {
        match c {
            CompletionArg::LeaveUnassigned => CompletionStrategy::LeaveUnassigned,
            CompletionArg::RandomFill => CompletionStrategy::RandomFill,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Full,
    Desk,
}

#[derive(Args)]
struct BanditArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base settings when no config is given.
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    sampled: bool,
    /// Output directory; overrides the config.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long)]
    records: PathBuf,
    /// Incompleteness threshold; no filtering if absent.
    #[arg(long)]
    filter_u: Option<usize>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "DEFERMATCH_ADDR", default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Task pool file; a generated pool otherwise.
    #[arg(long, env = "DEFERMATCH_TASKS")]
    tasks: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pool_size: usize,
    /// Seed for task plans and the generated pool.
    #[arg(long, env = "DEFERMATCH_SEED", default_value_t = 0)]
    seed: u64,
    /// Records are appended here as JSON lines.
    #[arg(long, env = "DEFERMATCH_DATASET", default_value = "records.jsonl")]
    dataset: PathBuf,
    /// Directory with the UI bundle.
    #[arg(long, env = "DEFERMATCH_STATIC")]
    static_dir: Option<PathBuf>,
}

fn print_json<T: Serialize>(value: &T) -> defermatch::Result<()> {
    let stdout = io::stdout();
    let mut w = stdout.lock();
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn generate(args: GenerateArgs) -> defermatch::Result<()> {
    let config: GeneratorConfig = match &args.config {
        Some(p) => toml::from_str(&std::fs::read_to_string(p)?).map_err(|e| Error::Config(e.to_string()))?,
        None => GeneratorConfig::default(),
    };
    config.validate()?;
    let entries = (0..args.count)
        .map(|i| {
            let mut rng = stream(args.seed, &[i as u64]);
            Ok(TaskEntry {
                task_id: format!("t{i:04}"),
                instance: sample_instance(&config, &mut rng)?.0,
            })
        })
        .collect::<defermatch::Result<Vec<_>>>()?;
    let store = TaskStore::new(entries)?;
    match &args.out {
        Some(p) => write_tasks(BufWriter::new(File::create(p)?), &store)?,
        None => {
            write_tasks(io::stdout().lock(), &store)?;
            println!();
        }
    }
    Ok(())
}

fn load_instance(args: &SolveArgs) -> defermatch::Result<MatchInstance> {
    let text = std::fs::read_to_string(&args.instance)?;
    match &args.task {
        Some(id) => {
            let store = load_tasks(text.as_bytes())?;
            store
                .get(id)
                .cloned()
                .ok_or_else(|| Error::Config(format!("no task {id} in {}", args.instance.display())))
        }
        None => Ok(serde_json::from_str(&text)?),
    }
}

#[derive(Serialize)]
struct SolveReply {
    b: usize,
    pairs: Vec<(usize, usize)>,
    objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected_utility: Option<f64>,
}

fn solve(args: SolveArgs) -> defermatch::Result<()> {
    let inst = load_instance(&args)?;
    let which = args.scores.into();
    let m = if args.brute_force {
        brute_force_matching(&inst, which, args.b)?
    } else {
        solve_imperfect_matching(&inst, which, args.b)?
    };
    let expected_utility = matching_utility(&m, &inst).ok();
    print_json(&SolveReply {
        b: args.b,
        pairs: m.pairs,
        objective: m.objective,
        expected_utility,
    })
}

fn load_config(path: Option<&PathBuf>, preset: Preset) -> defermatch::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(match preset {
            Preset::Full => ExperimentConfig::full(),
            Preset::Desk => ExperimentConfig::desk(),
        }),
    }
}

fn simulate(args: SimulateArgs) -> defermatch::Result<()> {
    let mut cfg = load_config(args.config.as_ref(), Preset::Desk)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(p) = &args.policy {
        cfg.human = HumanSpec::Simulated { policy: p.build() };
    }
    if let Some(c) = args.completion {
        cfg.completion = c.into();
    }
    let source = HumanSource::from_spec(&cfg.human)?;
    let (stat, logs) = simulate_fixed_b(&cfg, &source, args.b, args.count)?;
    if let Some(path) = &args.logs {
        let mut w = BufWriter::new(File::create(path)?);
        for l in &logs {
            serde_json::to_writer(&mut w, l)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    print_json(&serde_json::json!({ "b": args.b, "reward": stat }))
}

fn bandit(args: BanditArgs) -> defermatch::Result<()> {
    let mut cfg = load_config(args.config.as_ref(), args.preset)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(t) = args.horizon {
        cfg.horizon = t;
    }
    if let Some(r) = args.realizations {
        cfg.realizations = r;
    }
    if args.sampled {
        cfg.reward_mode = RewardMode::Sampled;
    }
    if let Some(out) = args.out {
        cfg.output_dir = Some(out);
    }
    let dir = cfg
        .output_dir
        .clone()
        .ok_or_else(|| Error::Config("an output directory is required (--out or output_dir)".into()))?;
    let outcome = run_experiment(&cfg)?;
    emit_results(&outcome, &cfg, &dir)?;
    print_json(&outcome.summary)
}

fn analyze(args: AnalyzeArgs) -> defermatch::Result<()> {
    let tasks = load_tasks(BufReader::new(File::open(&args.tasks)?))?;
    let records = load_records(BufReader::new(File::open(&args.records)?))?;
    if args
        .filter_u
        .is_some_and(|u| u > defermatch::experiment::MAX_FILTER_U)
    {
        return Err(Error::Config("filter_u must lie in 0..=8".into()));
    }
    let a = analyze_dataset(&tasks, &records, args.filter_u)?;
    print_json(&serde_json::json!({
        "analysis": &a,
        "best_b": a.best_b(),
    }))
}

fn serve_cmd(args: ServeArgs) -> defermatch::Result<()> {
    let pool = match &args.tasks {
        Some(p) => load_tasks(BufReader::new(File::open(p)?))?,
        None => generate_task_pool(&GeneratorConfig::default(), args.pool_size, args.seed)?,
    };
    let sink = OpenOptions::new().create(true).append(true).open(&args.dataset)?;
    let manager = Arc::new(SessionManager::new(
        pool,
        args.seed,
        Arc::new(SystemClock::default()),
        Box::new(sink),
    ));
    let runtime = tokio::runtime::Runtime::new()?;
    eprintln!("listening on http://{}", args.addr);
    runtime.block_on(serve(
        manager,
        ServeOptions {
            addr: args.addr,
            static_dir: args.static_dir,
        },
    ))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Simulate(a) => simulate(a),
        Command::Bandit(a) => bandit(a),
        Command::Analyze(a) => analyze(a),
        Command::Serve(a) => serve_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

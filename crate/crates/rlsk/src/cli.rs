//! Command-line surface: the full pipeline as subcommands.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error.

use crate::data::{
    build_table, campaign_k_grid, collect, default_bin_edges, read_jsonl, stratified_sample,
    table_to_wmdl, write_jsonl, TransitionTable,
};
use crate::dqn::{load_agent, save_agent, train, DqnConfig, DqnPolicy};
use crate::error::{Error, Result};
use crate::eval::{
    default_levels, evaluate, heatmap, heatmap_csv, nk_paired_evaluation, policy_correlation,
    report_csv, tests_csv, write_report_dir, OracleRanking,
};
use crate::optimizer::{run_episode, EpisodeConfig};
use crate::planner::{PlannerConfig, PlannerMode};
use crate::policy::{
    action_grid, agnostic_roster, load_model, parse_policy, unimodal_roster, PolicySpec,
};
use crate::problem::{Problem, ProblemKind};
use crate::stats;
use crate::synth::{
    build_prompt, heldout_split, problem_description, synthesize, validate_model, Endpoint,
    PromptMode, PromptSpec,
};
use crate::wmdl::parse_wmdl;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "rlsk",
    about = "Adaptive mutation-strength control laboratory for the (1+1)-RLS_k optimizer",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run trajectory-collection campaigns and write a JSONL dataset.
    Collect(CollectArgs),
    /// Aggregate a dataset into an empirical transition table.
    Table(TableArgs),
    /// Build a synthesis prompt document.
    Prompt(PromptArgs),
    /// Run the synthesis loop against an endpoint or offline fixture.
    Synthesize(SynthesizeArgs),
    /// Validate a world-model file against held-out data.
    Validate(ValidateArgs),
    /// Execute an experiment config file.
    Run(RunArgs),
    /// Matched-seed policy comparison.
    Compare(CompareArgs),
    /// Export a world-model score heatmap as CSV.
    Heatmap(HeatmapArgs),
    /// Train the DQN baseline.
    DqnTrain(DqnTrainArgs),
    /// Evaluate a trained DQN agent over matched seeds.
    DqnEval(DqnEvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProblemKindArg {
    Lo,
    Om,
    Jump,
    Nk,
}

#[derive(Args, Debug, Clone)]
struct ProblemArgs {
    /// Benchmark landscape.
    #[arg(long, value_enum)]
    problem: ProblemKindArg,
    /// Bitstring length.
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Jump gap parameter.
    #[arg(long, default_value_t = 2)]
    gap: usize,
    /// NK epistasis degree.
    #[arg(long, default_value_t = 2)]
    nk_k: usize,
    /// NK instance seed.
    #[arg(long, default_value_t = 0)]
    nk_seed: i64,
    /// Step budget; defaults to 0.8n^2 (lo), round(5n ln n) (om), 10,000
    /// (jump/nk; 50,000 when gap >= 3).
    #[arg(long)]
    budget: Option<u64>,
}

impl ProblemArgs {
    fn problem(&self) -> Result<Problem> {
        match self.problem {
            ProblemKindArg::Lo => Ok(Problem::leading_ones(self.n)),
            ProblemKindArg::Om => Ok(Problem::one_max(self.n)),
            ProblemKindArg::Jump => Problem::jump(self.n, self.gap),
            ProblemKindArg::Nk => Problem::nk(self.n, self.nk_k, self.nk_seed),
        }
    }

    fn budget(&self) -> u64 {
        self.budget.unwrap_or_else(|| default_budget_for(self.kind(), self.n, self.gap))
    }

    fn kind(&self) -> ProblemKind {
        match self.problem {
            ProblemKindArg::Lo => ProblemKind::LeadingOnes,
            ProblemKindArg::Om => ProblemKind::OneMax,
            ProblemKindArg::Jump => ProblemKind::Jump,
            ProblemKindArg::Nk => ProblemKind::Nk,
        }
    }
}

/// Default per-episode budgets per landscape family.
pub fn default_budget_for(kind: ProblemKind, n: usize, gap: usize) -> u64 {
    match kind {
        ProblemKind::LeadingOnes => (0.8 * (n * n) as f64).round() as u64,
        ProblemKind::OneMax => (5.0 * n as f64 * (n as f64).ln()).round() as u64,
        ProblemKind::Jump if gap >= 3 => 50_000,
        ProblemKind::Jump | ProblemKind::Nk => 10_000,
    }
}

#[derive(Args, Debug, Clone)]
struct PlannerArgs {
    /// Planner backing cwm policies.
    #[arg(long, default_value = "greedy")]
    planner: String,
    #[arg(long, default_value_t = 5000)]
    mcts_iters: u32,
    #[arg(long, default_value_t = 3)]
    mcts_depth: u32,
    #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
    mcts_c: f64,
}

impl PlannerArgs {
    fn config(&self) -> Result<PlannerConfig> {
        let mode = match self.planner.as_str() {
            "greedy" => PlannerMode::Greedy,
            "mcts" => PlannerMode::Mcts,
            other => return Err(Error::Config(format!("unknown planner '{other}'"))),
        };
        Ok(PlannerConfig {
            mode,
            mcts_iterations: self.mcts_iters,
            mcts_exploration_c: self.mcts_c,
            mcts_max_depth: self.mcts_depth,
        })
    }
}

#[derive(Args)]
struct CollectArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// "agnostic", "unimodal", or a comma-separated policy list.
    #[arg(long, default_value = "agnostic")]
    roster: String,
    #[arg(long, default_value_t = 50)]
    episodes: u64,
    /// Episode seed = this multiplier times the global episode index.
    #[arg(long, default_value_t = 31)]
    seed_mult: i64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Optional explicit bin edges, comma separated.
    #[arg(long)]
    edges: Option<String>,
    /// Optional explicit k grid, comma separated.
    #[arg(long)]
    ks: Option<String>,
    /// Also emit the table as a lookup-backed world model.
    #[arg(long)]
    wmdl_out: Option<PathBuf>,
    /// Model name used with --wmdl-out.
    #[arg(long, default_value = "empirical")]
    model_name: String,
}

#[derive(Args)]
struct PromptArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value = "math")]
    mode: String,
    /// Trajectory dataset for transition samples.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Transition table JSON for empirical modes.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    samples: usize,
    #[arg(long, default_value_t = 10)]
    strata: usize,
    #[arg(long, default_value_t = 7)]
    seed: i64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value = "both")]
    mode: String,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    table: Option<PathBuf>,
    /// JSON array of canned responses for offline runs.
    #[arg(long)]
    offline_fixture: Option<PathBuf>,
    /// Response cache keyed by prompt hash.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: i64,
    /// Where the accepted model text goes.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Where the attempt report JSON goes.
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON, // and # comments allowed).
    #[arg(long)]
    config: PathBuf,
    /// Flag overrides applied on top of the config.
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Comma-separated policy ids (cwm_greedy:<path.wmdl> binds a model).
    #[arg(long)]
    policies: String,
    #[arg(long, default_value_t = 100)]
    runs: u64,
    #[arg(long, default_value_t = 31)]
    seed_mult: i64,
    /// NK only: evaluate paired over these instance seeds (e.g. "0..15").
    #[arg(long)]
    nk_seeds: Option<String>,
    #[command(flatten)]
    planner: PlannerArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HeatmapArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DqnTrainArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 500)]
    episodes: u64,
    #[arg(long, default_value_t = 17)]
    seed: i64,
    #[arg(long)]
    out: PathBuf,
    /// Optional learning-curve CSV.
    #[arg(long)]
    log_out: Option<PathBuf>,
}

#[derive(Args)]
struct DqnEvalArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    agent: PathBuf,
    #[arg(long, default_value_t = 100)]
    runs: u64,
    #[arg(long, default_value_t = 31)]
    seed_mult: i64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point used by main(); returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap uses exit code 0 for --help/--version, 2 for usage errors
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn parse_roster(roster: &str, n: usize) -> Result<Vec<PolicySpec>> {
    match roster {
        "agnostic" => Ok(agnostic_roster()),
        "unimodal" => Ok(unimodal_roster(n)),
        list => list.split(',').map(|id| parse_policy(id.trim())).collect(),
    }
}

fn parse_mode(mode: &str) -> Result<PromptMode> {
    match mode {
        "math" => Ok(PromptMode::Math),
        "empirical" => Ok(PromptMode::Empirical),
        "both" => Ok(PromptMode::Both),
        other => Err(Error::Config(format!("unknown prompt mode '{other}'"))),
    }
}

fn load_table(path: &Path) -> Result<TransitionTable> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn parse_seed_range(text: &str) -> Result<Vec<i64>> {
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: i64 = lo.trim().parse().map_err(|_| Error::Config(format!("bad range '{text}'")))?;
        let hi: i64 = hi.trim().parse().map_err(|_| Error::Config(format!("bad range '{text}'")))?;
        Ok((lo..hi).collect())
    } else {
        text.split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("bad seed list '{text}'"))))
            .collect()
    }
}

fn run_command(command: Command) -> Result<()> {
    match command {
        Command::Collect(args) => {
            let problem = args.problem.problem()?;
            let roster = parse_roster(&args.roster, problem.n)?;
            let budget = args.problem.budget();
            let dataset = collect(&problem, &roster, args.episodes, budget, args.seed_mult)?;
            write_jsonl(&dataset, &args.out)?;
            if let Some(instance) = &problem.nk {
                // auditable copy; regeneration from the seed is canonical
                let mut path = args.out.as_os_str().to_os_string();
                path.push(".nk_instance.json");
                std::fs::write(path, serde_json::to_string(instance)?)?;
            }
            println!(
                "collected {} trajectories ({} policies x {} episodes) -> {}",
                dataset.trajectories.len(),
                roster.len(),
                args.episodes,
                args.out.display()
            );
            Ok(())
        }
        Command::Table(args) => {
            let dataset = read_jsonl(&args.input)?;
            let max_f = dataset.records().map(|r| r.f1).fold(0.0f64, f64::max);
            let edges = match &args.edges {
                Some(list) => list
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Config("bad edge".into())))
                    .collect::<Result<Vec<_>>>()?,
                None => default_bin_edges(max_f),
            };
            let n = if dataset.meta.n > 0 { dataset.meta.n } else { 50 };
            let ks = match &args.ks {
                Some(list) => list
                    .split(',')
                    .map(|s| s.trim().parse::<usize>().map_err(|_| Error::Config("bad k".into())))
                    .collect::<Result<Vec<_>>>()?,
                None => campaign_k_grid(n),
            };
            let table = build_table(&dataset, &edges, &ks)?;
            if let Some(dir) = args.out.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&args.out, serde_json::to_string_pretty(&table)?)?;
            println!("{} populated cells -> {}", table.cells.len(), args.out.display());
            if let Some(path) = &args.wmdl_out {
                let text = table_to_wmdl(&table, &args.model_name, n);
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                std::fs::write(path, &text)?;
                println!("world model -> {}", path.display());
            }
            Ok(())
        }
        Command::Prompt(args) => {
            let problem = args.problem.problem()?;
            let mode = parse_mode(&args.mode)?;
            let transitions = match &args.data {
                Some(path) => {
                    let dataset = read_jsonl(path)?;
                    stratified_sample(&dataset, args.samples, args.strata, args.seed)?
                }
                None => Vec::new(),
            };
            let table = args.table.as_deref().map(load_table).transpose()?;
            let spec = PromptSpec {
                mode,
                problem_text: problem_description(&problem),
                transitions,
                table,
                token_budget_hint: Some(2000),
            };
            let text = build_prompt(&spec)?;
            if let Some(dir) = args.out.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&args.out, &text)?;
            println!("prompt ({} bytes) -> {}", text.len(), args.out.display());
            Ok(())
        }
        Command::Synthesize(args) => {
            let problem = args.problem.problem()?;
            let budget = args.problem.budget();
            let mode = parse_mode(&args.mode)?;
            let dataset = read_jsonl(&args.data)?;
            let (train_split, heldout) = heldout_split(&dataset);
            let table = match &args.table {
                Some(path) => Some(load_table(path)?),
                None if matches!(mode, PromptMode::Empirical | PromptMode::Both) => {
                    let max_f = train_split.records().map(|r| r.f1).fold(0.0f64, f64::max);
                    Some(build_table(
                        &train_split,
                        &default_bin_edges(max_f),
                        &campaign_k_grid(problem.n),
                    )?)
                }
                None => None,
            };
            let spec = PromptSpec {
                mode,
                problem_text: problem_description(&problem),
                transitions: stratified_sample(&train_split, args.samples, 10, args.seed)?,
                table,
                token_budget_hint: Some(2000),
            };
            let mut endpoint = match &args.offline_fixture {
                Some(path) => Endpoint::fixture_from_file(path)?,
                None => Endpoint::from_env()?,
            };
            let report = synthesize(
                &spec,
                &mut endpoint,
                &heldout,
                &problem,
                budget,
                args.cache_dir.as_deref(),
            )?;
            if let Some(path) = &args.report_out {
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
            }
            match (&report.accepted_text, &args.model_out) {
                (Some(text), Some(path)) => {
                    if let Some(dir) = path.parent() {
                        std::fs::create_dir_all(dir)?;
                    }
                    std::fs::write(path, text)?;
                    println!(
                        "accepted after {} attempt(s) -> {}",
                        report.attempts.len(),
                        path.display()
                    );
                    Ok(())
                }
                (Some(_), None) => {
                    println!("accepted after {} attempt(s)", report.attempts.len());
                    Ok(())
                }
                (None, _) => Err(Error::Synthesis(format!(
                    "no model accepted within {} attempts",
                    report.attempts.len()
                ))),
            }
        }
        Command::Validate(args) => {
            let problem = args.problem.problem()?;
            let budget = args.problem.budget();
            let text = std::fs::read_to_string(&args.model)?;
            let program = parse_wmdl(&text).map_err(Error::Parse)?;
            let dataset = read_jsonl(&args.data)?;
            let (_, heldout) = heldout_split(&dataset);
            let metrics = validate_model(&program, &heldout, &problem, budget)?;
            println!("{}", serde_json::to_string_pretty(&metrics)?);
            // Correlation metrics against the analytic oracle where it exists.
            if problem.kind != ProblemKind::Nk {
                let model = crate::policy::bind_program(program, &problem, budget);
                let oracle = match problem.kind {
                    ProblemKind::LeadingOnes => {
                        OracleRanking::Analytic(crate::combinatorics::DriftModel::LeadingOnes)
                    }
                    ProblemKind::OneMax => {
                        OracleRanking::Analytic(crate::combinatorics::DriftModel::OneMax)
                    }
                    _ => OracleRanking::Analytic(crate::combinatorics::DriftModel::Jump {
                        gap: problem.jump_gap.unwrap(),
                    }),
                };
                let corr =
                    policy_correlation(&model, &oracle, &problem, &default_levels(&problem))?;
                println!("{}", serde_json::to_string_pretty(&corr)?);
            }
            Ok(())
        }
        Command::Run(args) => run_config(&args),
        Command::Compare(args) => {
            let specs: Vec<PolicySpec> = args
                .policies
                .split(',')
                .map(|id| parse_policy(id.trim()))
                .collect::<Result<_>>()?;
            let planner = args.planner.config()?;
            let budget = args.problem.budget();
            if let (ProblemKindArg::Nk, Some(seeds)) = (args.problem.problem, &args.nk_seeds) {
                let seeds = parse_seed_range(seeds)?;
                let report = nk_paired_evaluation(
                    args.problem.n,
                    args.problem.nk_k,
                    &seeds,
                    &specs,
                    args.runs,
                    budget,
                    planner,
                )?;
                for (id, mean) in report.policy_ids.iter().zip(&report.overall_means) {
                    println!("{id:<32} mean best fitness {mean:.3}");
                }
                for t in &report.paired {
                    println!(
                        "{} vs {}: t={:.3} p={:.4} ({})",
                        t.a, t.b, t.statistic, t.p_value, t.kind
                    );
                }
                if let Some(dir) = &args.out {
                    std::fs::create_dir_all(dir)?;
                    std::fs::write(
                        dir.join("nk_report.json"),
                        serde_json::to_string_pretty(&report)?,
                    )?;
                }
                return Ok(());
            }
            let problem = args.problem.problem()?;
            let report = evaluate(&problem, &specs, args.runs, budget, args.seed_mult, planner)?;
            print!("{}", report_csv(&report));
            if !report.tests.is_empty() {
                print!("{}", tests_csv(&report.tests));
            }
            if let Some(dir) = &args.out {
                write_report_dir(&report, dir)?;
                println!("report -> {}", dir.display());
            }
            Ok(())
        }
        Command::Heatmap(args) => {
            let problem = args.problem.problem()?;
            let budget = args.problem.budget();
            let model = load_model(
                args.model.to_str().ok_or_else(|| Error::Config("bad model path".into()))?,
                &problem,
                budget,
            )?;
            let levels = match problem.kind {
                ProblemKind::Nk => {
                    // bin midpoints over the reachable range
                    let edges = default_bin_edges(problem.n as f64 * 0.8);
                    edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
                }
                _ => default_levels(&problem),
            };
            let grid = heatmap(&model, &problem, &levels, &action_grid(problem.n))?;
            if let Some(dir) = args.out.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&args.out, heatmap_csv(&grid))?;
            println!(
                "{} x {} heatmap -> {}",
                grid.fitness_levels.len(),
                grid.k_values.len(),
                args.out.display()
            );
            Ok(())
        }
        Command::DqnTrain(args) => {
            let problem = args.problem.problem()?;
            let budget = args.problem.budget();
            let config = DqnConfig::standard(args.episodes, budget);
            let agent = train(&problem, &config, args.seed)?;
            save_agent(&agent, &args.out)?;
            if let Some(path) = &args.log_out {
                let mut csv = String::from("episode,steps,success,rolling_success\n");
                for l in &agent.log {
                    csv.push_str(&format!(
                        "{},{},{},{}\n",
                        l.episode, l.steps, l.success, l.rolling_success
                    ));
                }
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                std::fs::write(path, csv)?;
            }
            let trained_successes = agent.log.iter().filter(|l| l.success).count();
            println!(
                "trained {} episodes ({} successes) -> {}",
                args.episodes,
                trained_successes,
                args.out.display()
            );
            Ok(())
        }
        Command::DqnEval(args) => {
            let problem = args.problem.problem()?;
            let budget = args.problem.budget();
            let (net, grid) = load_agent(&args.agent)?;
            let mut values = Vec::new();
            let mut successes = 0u64;
            for episode in 0..args.runs {
                let config = EpisodeConfig {
                    n: problem.n,
                    budget,
                    episode_index: episode,
                    base_seed_multiplier: args.seed_mult,
                };
                let mut policy =
                    DqnPolicy::new(net.clone(), grid.clone(), problem.clone(), budget);
                let traj = run_episode(&problem, &mut policy, &config)?;
                if traj.success {
                    successes += 1;
                    values.push(traj.steps as f64);
                } else {
                    values.push(budget as f64);
                }
            }
            let sr = successes as f64 / args.runs as f64;
            let line = format!(
                "dqn,{},{},{},{},{}\n",
                args.runs,
                stats::mean(&values),
                stats::median(&values),
                successes,
                sr
            );
            print!("policy,runs,mean,median,successes,success_rate\n{line}");
            if let Some(path) = &args.out {
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                std::fs::write(path, format!("policy,runs,mean,median,successes,success_rate\n{line}"))?;
            }
            Ok(())
        }
    }
}

// --- experiment config ---------------------------------------------------------

#[derive(Debug, Deserialize)]
struct ExperimentConfig {
    problem: ProblemBlock,
    policies: Vec<String>,
    #[serde(default = "default_runs")]
    runs: u64,
    budget: Option<u64>,
    #[serde(default = "default_seed_mult")]
    base_seed_multiplier: i64,
    #[serde(default)]
    planner: PlannerBlock,
    out_dir: Option<PathBuf>,
}

fn default_runs() -> u64 {
    100
}

fn default_seed_mult() -> i64 {
    31
}

#[derive(Debug, Deserialize)]
struct ProblemBlock {
    kind: String,
    #[serde(default = "default_n")]
    n: usize,
    #[serde(default = "default_gap")]
    gap: usize,
    #[serde(default = "default_nk_k")]
    nk_k: usize,
    #[serde(default)]
    nk_seeds: Vec<i64>,
}

fn default_n() -> usize {
    50
}

fn default_gap() -> usize {
    2
}

fn default_nk_k() -> usize {
    2
}

#[derive(Debug, Deserialize, Default)]
struct PlannerBlock {
    #[serde(default)]
    mode: Option<String>,
    mcts_iterations: Option<u32>,
    mcts_depth: Option<u32>,
    mcts_c: Option<f64>,
}

/// Strip // and # line comments (outside strings) so configs can be annotated.
pub fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                out.push(c);
            }
            '/' if chars.peek() == Some(&'/') => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        out.push('\n');
                        break;
                    }
                }
            }
            '#' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        out.push('\n');
                        break;
                    }
                }
            }
            _ => out.push(c),
        }
    }
    out
}

fn run_config(args: &RunArgs) -> Result<()> {
    let raw = std::fs::read_to_string(&args.config)?;
    let config: ExperimentConfig = serde_json::from_str(&strip_comments(&raw))?;
    let specs: Vec<PolicySpec> = config
        .policies
        .iter()
        .map(|id| parse_policy(id))
        .collect::<Result<_>>()?;
    let planner = PlannerConfig {
        mode: match config.planner.mode.as_deref() {
            None | Some("greedy") => PlannerMode::Greedy,
            Some("mcts") => PlannerMode::Mcts,
            Some(other) => return Err(Error::Config(format!("unknown planner '{other}'"))),
        },
        mcts_iterations: config.planner.mcts_iterations.unwrap_or(5000),
        mcts_exploration_c: config.planner.mcts_c.unwrap_or(std::f64::consts::SQRT_2),
        mcts_max_depth: config.planner.mcts_depth.unwrap_or(3),
    };
    let kind = match config.problem.kind.as_str() {
        "lo" | "leading_ones" => ProblemKind::LeadingOnes,
        "om" | "one_max" => ProblemKind::OneMax,
        "jump" => ProblemKind::Jump,
        "nk" => ProblemKind::Nk,
        other => return Err(Error::Config(format!("unknown problem kind '{other}'"))),
    };
    let budget = args
        .budget
        .or(config.budget)
        .unwrap_or_else(|| default_budget_for(kind, config.problem.n, config.problem.gap));
    let runs = args.runs.unwrap_or(config.runs);
    let out_dir = args.out.clone().or(config.out_dir);

    if kind == ProblemKind::Nk && config.problem.nk_seeds.len() > 1 {
        let report = nk_paired_evaluation(
            config.problem.n,
            config.problem.nk_k,
            &config.problem.nk_seeds,
            &specs,
            runs,
            budget,
            planner,
        )?;
        for (id, mean) in report.policy_ids.iter().zip(&report.overall_means) {
            println!("{id:<32} mean best fitness {mean:.3}");
        }
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("nk_report.json"), serde_json::to_string_pretty(&report)?)?;
        }
        return Ok(());
    }
    let problem = match kind {
        ProblemKind::LeadingOnes => Problem::leading_ones(config.problem.n),
        ProblemKind::OneMax => Problem::one_max(config.problem.n),
        ProblemKind::Jump => Problem::jump(config.problem.n, config.problem.gap)?,
        ProblemKind::Nk => Problem::nk(
            config.problem.n,
            config.problem.nk_k,
            config.problem.nk_seeds.first().copied().unwrap_or(0),
        )?,
    };
    let report = evaluate(&problem, &specs, runs, budget, config.base_seed_multiplier, planner)?;
    print!("{}", report_csv(&report));
    if let Some(dir) = &out_dir {
        write_report_dir(&report, dir)?;
        println!("report -> {}", dir.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_budgets_follow_the_table() {
        assert_eq!(default_budget_for(ProblemKind::LeadingOnes, 50, 0), 2000);
        assert_eq!(default_budget_for(ProblemKind::OneMax, 50, 0), 978);
        assert_eq!(default_budget_for(ProblemKind::Jump, 50, 2), 10_000);
        assert_eq!(default_budget_for(ProblemKind::Jump, 50, 3), 50_000);
        assert_eq!(default_budget_for(ProblemKind::Jump, 50, 4), 50_000);
        assert_eq!(default_budget_for(ProblemKind::Nk, 50, 0), 10_000);
    }

    #[test]
    fn comment_stripping_respects_strings() {
        let input = "{\n  // a comment\n  \"key\": \"value # not a comment\", # trailing\n  \"n\": 50\n}";
        let stripped = strip_comments(input);
        assert!(stripped.contains("value # not a comment"));
        assert!(!stripped.contains("// a comment"));
        assert!(!stripped.contains("# trailing"));
        let parsed: serde_json::Value = serde_json::from_str(&stripped).unwrap();
        assert_eq!(parsed["n"], 50);
    }

    #[test]
    fn seed_ranges_parse() {
        assert_eq!(parse_seed_range("0..4").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_seed_range("3,5,9").unwrap(), vec![3, 5, 9]);
        assert!(parse_seed_range("x..y").is_err());
    }
}

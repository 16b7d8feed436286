//! Subcommands. Each one reads its inputs, calls into the core library and writes text to
//! a file or stdout.

use std::collections::BTreeMap;
use std::io::Write;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use hyperscen_core::allocator::harness::{compare_strategies, HarnessConfig};
use hyperscen_core::learned::{fit_parametric, CompareOptions};
use hyperscen_core::pipeline::{materialize_all, optimize_scenario, OptimizeOptions, PipelineError};
use hyperscen_core::profiling::{
    generate_dataset, generate_synthetic_trace, ingest_trace, records_from_jsonl, records_to_jsonl, reference_board,
    summarize_profile, ProfileVector, SynthSpec,
};
use hyperscen_core::scenario::{emit_launch_script, to_canonical_json};
use hyperscen_core::{
    compare_models, default_quanta, materialize, parse_board_config, AllocError, AllocationVector, HardwareCapacity,
    Strategy, VmDefinition, WorkloadClass,
};
use serde::Serialize;

use crate::Failure;

#[derive(Debug, Parser)]
#[command(name = "hyperscen", version, about = "Static resource allocation for hypervisor scenarios")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Board configuration files.
    #[command(subcommand)]
    Board(BoardCmd),
    /// Traces and profiles.
    #[command(subcommand)]
    Profile(ProfileCmd),
    /// Fit per-workload response models to a dataset.
    Fit(FitArgs),
    /// Search the best allocation and write scenario.json and launch.sh.
    Optimize(OptimizeArgs),
    /// Score an equal or proportional split.
    Baseline(BaselineArgs),
    /// Compare refinement trials from each start strategy on synthetic scenarios.
    RefineSim(RefineSimArgs),
    /// Generate the synthetic dataset as JSON lines.
    Dataset(DatasetArgs),
    /// Train/eval MSE of the parametric model and the MLP, as CSV.
    CompareModels(CompareArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum BoardCmd {
    /// Parse a board XML file and print its capacities.
    Parse {
        file: PathBuf,
        /// Print JSON (the only format; accepted for compatibility).
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum ProfileCmd {
    /// Summarize a trace CSV into a profile.
    Summarize {
        trace: PathBuf,
        #[arg(long)]
        board: PathBuf,
        /// Allocation the trace was recorded under, as c_p,c_e,mem_mib,gpu_slices. Default: whole board.
        #[arg(long, value_parser = parse_allocation)]
        profiled_on: Option<AllocationVector>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic trace CSV.
    Synth {
        #[arg(long)]
        class: WorkloadClass,
        #[arg(long, default_value_t = 1.0)]
        size: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 300)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Complete a VM definition into a full VmSpec.
    VmSpec {
        #[arg(long)]
        def: PathBuf,
        #[arg(long)]
        board: PathBuf,
        /// Profile JSON; overrides one embedded in the definition.
        #[arg(long, conflicts_with = "trace")]
        profile: Option<PathBuf>,
        /// Trace CSV recorded on the whole board.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset in JSON lines.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Board whose quanta set the model bounds. Default: the synthetic reference board.
    #[arg(long)]
    pub board: Option<PathBuf>,
    /// Only fit this workload.
    #[arg(long)]
    pub workload: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub sweeps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub board: PathBuf,
    /// JSON list of VM definitions, each with a profile.
    #[arg(long)]
    pub vms: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Launch script path. Default: launch.sh next to --out.
    #[arg(long)]
    pub launch: Option<PathBuf>,
    /// Use a baseline split instead of searching.
    #[arg(long, value_parser = parse_baseline)]
    pub baseline: Option<Strategy>,
    /// Print search statistics as JSON.
    #[arg(long)]
    pub stats: bool,
    /// Seconds after which the best allocation so far is returned, marked truncated.
    #[arg(long)]
    pub time_budget: Option<f64>,
    #[arg(long, default_value_t = hyperscen_core::allocator::DEFAULT_CANDIDATE_CAP)]
    pub candidate_cap: usize,
    /// Recorded in the scenario metadata.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub board: PathBuf,
    #[arg(long)]
    pub vms: PathBuf,
    #[arg(long, value_parser = parse_baseline, default_value = "equal")]
    pub strategy: Strategy,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RefineSimArgs {
    /// First scenario seed; scenarios use seed, seed+1, ...
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub scenarios: u64,
    /// Comma-separated strategies or `all`.
    #[arg(long, default_value = "all", value_parser = parse_strategies)]
    pub strategies: Strategies,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone)]
pub struct Strategies(pub Vec<Strategy>);

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Dataset in JSON lines. Default: generate one with --per-class and --seed.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub splits: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "HYPERSCEN_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: IpAddr,
    /// Directory for session snapshots; sessions found there are restored on start.
    #[arg(long)]
    pub state_dir: Option<PathBuf>,
}

fn parse_allocation(s: &str) -> Result<AllocationVector, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err("expected c_p,c_e,mem_mib,gpu_slices".into());
    }
    let mut a = [0u64; 4];
    for (slot, p) in a.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| format!("`{p}` is not a non-negative integer"))?;
    }
    Ok(AllocationVector::from_array(a))
}

fn parse_baseline(s: &str) -> Result<Strategy, String> {
    match s.parse()? {
        Strategy::OptimizedSplit => Err("baseline must be `equal` or `proportional`".into()),
        b => Ok(b),
    }
}

fn parse_strategies(s: &str) -> Result<Strategies, String> {
    if s == "all" {
        return Ok(Strategies(Strategy::ALL.to_vec()));
    }
    let v = s.split(',').map(|x| x.trim().parse()).collect::<Result<Vec<Strategy>, _>>()?;
    if v.is_empty() {
        return Err("no strategies given".into());
    }
    Ok(Strategies(v))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

fn write_to(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::User(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(Failure::internal),
    }
}

fn canonical<T: Serialize>(v: &T) -> Result<String, Failure> {
    to_canonical_json(v).map_err(Failure::internal)
}

fn load_board(path: &Path) -> Result<HardwareCapacity, Failure> {
    parse_board_config(&read(path)?).map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::Alloc(AllocError::Misaligned { .. }) => Failure::internal(e),
        _ => Failure::user(e),
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Board(BoardCmd::Parse { file, .. }) => write_to(None, &canonical(&load_board(&file)?)?),
        Command::Profile(cmd) => profile(cmd),
        Command::Fit(a) => fit(a),
        Command::Optimize(a) => optimize(a),
        Command::Baseline(a) => baseline(a),
        Command::RefineSim(a) => refine_sim(a),
        Command::Dataset(a) => {
            let ds = generate_dataset(a.per_class, a.seed);
            write_to(a.out.as_deref(), &records_to_jsonl(&ds.records))
        }
        Command::CompareModels(a) => compare(a),
        Command::Serve(a) => serve(a),
    }
}

fn summarize_file(trace: &Path, cap: &HardwareCapacity, on: Option<AllocationVector>) -> Result<ProfileVector, Failure> {
    let series = ingest_trace(&read(trace)?).map_err(|e| Failure::User(format!("{}: {e}", trace.display())))?;
    let on = on.unwrap_or_else(|| cap.as_allocation());
    summarize_profile(&series, &on, &default_quanta(cap)).map_err(Failure::user)
}

fn profile(cmd: ProfileCmd) -> Result<(), Failure> {
    match cmd {
        ProfileCmd::Summarize {
            trace,
            board,
            profiled_on,
            out,
        } => {
            let cap = load_board(&board)?;
            let p = summarize_file(&trace, &cap, profiled_on)?;
            write_to(out.as_deref(), &canonical(&p)?)
        }
        ProfileCmd::Synth {
            class,
            size,
            seed,
            samples,
            out,
        } => {
            if !(size.is_finite() && size > 0.0) || samples == 0 {
                return Err(Failure::User("size and samples must be positive".into()));
            }
            let spec = SynthSpec {
                samples,
                ..SynthSpec::new(class, size, seed)
            };
            write_to(out.as_deref(), &generate_synthetic_trace(&spec).to_csv())
        }
        ProfileCmd::VmSpec {
            def,
            board,
            profile,
            trace,
            out,
        } => {
            let cap = load_board(&board)?;
            let d: VmDefinition = load_json(&def)?;
            let p = match (profile, trace) {
                (Some(p), _) => load_json(&p)?,
                (None, Some(t)) => summarize_file(&t, &cap, None)?,
                (None, None) => d
                    .profile
                    .clone()
                    .ok_or_else(|| Failure::User(format!("VM `{}` has no profile; pass --profile or --trace", d.vm_id)))?,
            };
            let spec = materialize(&d, &p, &cap, &default_quanta(&cap)).map_err(Failure::user)?;
            write_to(out.as_deref(), &canonical(&spec)?)
        }
    }
}

fn fit(a: FitArgs) -> Result<(), Failure> {
    let records = records_from_jsonl(&read(&a.dataset)?).map_err(Failure::user)?;
    let cap = match &a.board {
        Some(b) => load_board(b)?,
        None => reference_board(),
    };
    let chosen: Vec<_> = records
        .iter()
        .filter(|r| a.workload.as_ref().is_none_or(|w| &r.workload_id == w))
        .collect();
    if chosen.is_empty() {
        return Err(Failure::User("no matching records".into()));
    }
    let models = fit_parametric(&chosen, &default_quanta(&cap), a.sweeps).map_err(Failure::user)?;
    write_to(a.out.as_deref(), &canonical(&models)?)
}

fn load_specs(board: &Path, vms: &Path) -> Result<(HardwareCapacity, Vec<hyperscen_core::VmSpec>), Failure> {
    let cap = load_board(board)?;
    let defs: Vec<VmDefinition> = load_json(vms)?;
    let specs = materialize_all(&defs, &BTreeMap::new(), &cap).map_err(pipeline_failure)?;
    Ok((cap, specs))
}

#[derive(Serialize)]
struct Stats {
    nodes_visited: u64,
    nodes_pruned: u64,
    truncated: bool,
    best_score: f64,
}

fn optimize(a: OptimizeArgs) -> Result<(), Failure> {
    let (cap, specs) = load_specs(&a.board, &a.vms)?;
    let time_budget = a
        .time_budget
        .map(|s| Duration::try_from_secs_f64(s).map_err(|e| Failure::User(format!("--time-budget: {e}"))))
        .transpose()?;
    let opts = OptimizeOptions {
        baseline: a.baseline,
        time_budget,
        candidate_cap: a.candidate_cap,
        seed: a.seed,
    };
    let (result, doc, text) = optimize_scenario(&specs, &cap, &opts).map_err(pipeline_failure)?;
    write_to(Some(&a.out), &text)?;
    let launch = a
        .launch
        .unwrap_or_else(|| a.out.parent().unwrap_or(Path::new("")).join("launch.sh"));
    write_to(Some(&launch), &emit_launch_script(&doc))?;
    if a.stats {
        let stats = Stats {
            nodes_visited: result.nodes_visited,
            nodes_pruned: result.nodes_pruned,
            truncated: result.truncated,
            best_score: result.best_score,
        };
        write_to(None, &canonical(&stats)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BaselineOut {
    strategy: Strategy,
    allocations: BTreeMap<String, AllocationVector>,
    global_score: f64,
}

fn baseline(a: BaselineArgs) -> Result<(), Failure> {
    let (cap, specs) = load_specs(&a.board, &a.vms)?;
    let opts = OptimizeOptions {
        baseline: Some(a.strategy),
        ..OptimizeOptions::default()
    };
    let res = hyperscen_core::pipeline::optimize(&specs, &cap, &opts).map_err(pipeline_failure)?;
    let out = BaselineOut {
        strategy: a.strategy,
        allocations: specs.iter().map(|s| s.vm_id.clone()).zip(res.allocations).collect(),
        global_score: res.best_score,
    };
    write_to(a.out.as_deref(), &canonical(&out)?)
}

fn refine_sim(a: RefineSimArgs) -> Result<(), Failure> {
    if a.scenarios == 0 {
        return Err(Failure::User("--scenarios must be positive".into()));
    }
    let cfg = HarnessConfig::default();
    let seeds = a.seed..a.seed + a.scenarios;
    let summary = compare_strategies(seeds, &a.strategies.0, &cfg).map_err(Failure::internal)?;
    if a.json {
        return write_to(None, &canonical(&summary)?);
    }
    let mut out = format!("strategy      median  satisfied  trials (seeds {}..{})\n", a.seed, a.seed + a.scenarios - 1);
    for t in &summary {
        let trials: Vec<String> = t.trials.iter().map(u32::to_string).collect();
        out.push_str(&format!(
            "{:<13} {:>6.1}  {:>4}/{:<4}  {}\n",
            t.strategy.as_str(),
            t.median,
            t.satisfied,
            t.trials.len(),
            trials.join(" ")
        ));
    }
    write_to(None, &out)
}

fn compare(a: CompareArgs) -> Result<(), Failure> {
    let records = match &a.dataset {
        Some(p) => records_from_jsonl(&read(p)?).map_err(Failure::user)?,
        None => generate_dataset(a.per_class, a.seed).records,
    };
    if a.splits == 0 {
        return Err(Failure::User("--splits must be positive".into()));
    }
    let opts = CompareOptions {
        splits: a.splits,
        seed: a.seed,
        ..CompareOptions::default()
    };
    let report = compare_models(&records, &opts).map_err(Failure::user)?;
    write_to(a.out.as_deref(), &report.to_csv())
}

fn serve(a: ServeArgs) -> Result<(), Failure> {
    let state = match &a.state_dir {
        Some(dir) => crate::service::AppState::with_state_dir(dir.clone()).map_err(Failure::user)?,
        None => crate::service::AppState::default(),
    };
    let rt = tokio::runtime::Runtime::new().map_err(Failure::internal)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.bind, a.port))
            .await
            .map_err(|e| Failure::User(format!("bind {}:{}: {e}", a.bind, a.port)))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(Failure::internal)?);
        axum::serve(listener, crate::service::router(state))
            .await
            .map_err(Failure::internal)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_flag() {
        assert_eq!(parse_allocation("4, 2,8192,3").unwrap(), AllocationVector::new(4, 2, 8192, 3));
        assert!(parse_allocation("4,2,8192").is_err());
        assert!(parse_allocation("4,2,-1,0").is_err());
    }

    #[test]
    fn strategy_flags() {
        assert_eq!(parse_strategies("all").unwrap().0, Strategy::ALL.to_vec());
        assert_eq!(
            parse_strategies("equal,optimized").unwrap().0,
            vec![Strategy::EqualSplit, Strategy::OptimizedSplit]
        );
        assert!(parse_strategies("fast").is_err());
        assert!(parse_baseline("optimized").is_err());
        assert_eq!(parse_baseline("proportional").unwrap(), Strategy::ProportionalSplit);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}

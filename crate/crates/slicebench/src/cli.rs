//! `slicebench run|sweep|oracle`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use slicebench_core::allocator::{AllocError, SaaProblem};
use slicebench_core::scenario::{generate_topology, paper_default_scenario, Scenario, TOPOLOGY_STREAM};

use crate::config::{load_scenario, ConfigError};
use crate::exec::Parallel;
use crate::experiment::{
    run_algorithm, sweep, Algo, ExperimentError, RunOutput, SweepSpec, Variant, DEFAULT_LAMBDA_GRID,
};
use crate::oracle_suite::{run_suite, QosHooks, DEFAULT_ORACLE_SEED};
use crate::output::{write_channels, write_results, write_trace, ResultRow, ResultsWriter};

#[derive(Debug, Parser)]
#[command(name = "slicebench", version, about = "CoMP RAN slicing allocation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one scenario with one algorithm.
    Run(RunArgs),
    /// Sweep the TI per-robot arrival rate.
    Sweep(SweepArgs),
    /// Check formulas and solvers against reference implementations.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// JSON scenario; the built-in default when omitted.
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Remove eMBB slices.
    #[arg(long)]
    pub drop_embb: bool,
    /// Remove mMTC slices.
    #[arg(long)]
    pub drop_mmtc: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value = "ira_admm")]
    pub algo: Algo,
    #[arg(long, value_name = "PATH", default_value = "results.csv")]
    pub out: PathBuf,
    /// ADMM iterates; defaults to trace.csv next to --out.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Write every channel sample as (t, ru, terminal, antenna, re, im).
    #[arg(long, value_name = "PATH")]
    pub dump_channels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// One algorithm only; both when omitted.
    #[arg(long, value_enum)]
    pub algo: Option<Algo>,
    /// Per-robot TI arrival rates in pkts/s, ascending.
    #[arg(long, value_delimiter = ',', value_name = "CSV")]
    pub values: Option<Vec<f64>>,
    /// Seeds per value, counting up from the scenario seed.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, value_name = "PATH", default_value = "sweep.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = DEFAULT_ORACLE_SEED)]
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("solver failed: {0}")]
    Solver(#[from] AllocError),
    #[error("{failed} oracle check(s) failed")]
    Oracle { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::Usage(_) => 2,
            CliError::Solver(_) | CliError::Oracle { .. } => 1,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Alloc(a) => CliError::Solver(a),
            ExperimentError::Spec(m) => CliError::Usage(m),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads the scenario, applies the seed override and slice variant and
/// validates the result.
fn prepare(args: &ScenarioArgs) -> Result<(Scenario, Variant), CliError> {
    let mut sc = match &args.scenario {
        Some(path) => load_scenario(path)?,
        None => paper_default_scenario(),
    };
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    let variant = Variant {
        drop_embb: args.drop_embb,
        drop_mmtc: args.drop_mmtc,
    };
    let origin = args
        .scenario
        .as_ref()
        .map_or_else(|| "built-in scenario".to_string(), |p| p.display().to_string());
    variant
        .apply(&sc)
        .validate()
        .map_err(|source| ConfigError::Invalid { origin, source })?;
    Ok((sc, variant))
}

fn write_file(path: &Path, f: impl FnOnce(fs::File) -> io::Result<()>) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    f(file).map_err(io_err(path))
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let (base, variant) = prepare(&args.scenario)?;
    let sc = variant.apply(&base);
    let exec = Parallel::from_env();
    let top = generate_topology(&sc, TOPOLOGY_STREAM);
    let problem = SaaProblem::new(&sc, &top, &exec)?;
    if let Some(path) = &args.dump_channels {
        let samples: Vec<_> = (0..problem.sample_count()).map(|t| problem.channel(t)).collect();
        write_file(path, |f| write_channels(io::BufWriter::new(f), &samples))?;
    }
    let run: RunOutput = run_algorithm(&problem, args.algo, &exec);
    write_file(&args.out, |f| write_results(io::BufWriter::new(f), &run.rows()))?;
    if let Some(trace) = &run.trace {
        let path = args
            .trace
            .clone()
            .unwrap_or_else(|| args.out.with_file_name("trace.csv"));
        write_file(&path, |f| write_trace(io::BufWriter::new(f), &trace.rows))?;
        if let Some(w) = &trace.warning {
            let _ = writeln!(err, "warning: {w}");
        }
    }
    let _ = writeln!(out, "total utility: {:.6}", run.report.total_utility);
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (sc, variant) = prepare(&args.scenario)?;
    let spec = SweepSpec {
        values: args.values.clone().unwrap_or_else(|| DEFAULT_LAMBDA_GRID.to_vec()),
        algos: args.algo.map_or_else(|| Algo::ALL.to_vec(), |a| vec![a]),
        reps: args.reps,
        base_seed: sc.seed,
        variant,
    };
    spec.validate()?;
    // rows land here in completion order; the sorted file replaces it
    let partial = PathBuf::from(format!("{}.partial", args.out.display()));
    let file = fs::File::create(&partial).map_err(io_err(&partial))?;
    let sink = Mutex::new((ResultsWriter::new(file), None::<io::Error>));
    let on_rows = |rows: &[ResultRow]| {
        let mut guard = sink.lock().expect("writer lock poisoned");
        let (w, failed) = &mut *guard;
        if failed.is_none() {
            if let Err(e) = w.write_rows(rows) {
                *failed = Some(e);
            }
        }
    };
    let exec = Parallel::from_env();
    let runs = sweep(&sc, &spec, &exec, &on_rows)?;
    let (w, failed) = sink.into_inner().expect("writer lock poisoned");
    if let Some(e) = failed {
        return Err(io_err(&partial)(e));
    }
    drop(w.finish().map_err(io_err(&partial))?);
    let rows: Vec<ResultRow> = runs.iter().flat_map(RunOutput::rows).collect();
    write_file(&args.out, |f| write_results(io::BufWriter::new(f), &rows))?;
    fs::remove_file(&partial).map_err(io_err(&partial))?;
    let _ = writeln!(
        out,
        "{} runs, {} rows written to {}",
        runs.len(),
        rows.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_oracle(args: &OracleArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let results = run_suite(args.seed, &QosHooks::default(), &Parallel::from_env());
    for r in &results {
        let _ = writeln!(out, "{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let _ = writeln!(out, "{} of {} checks passed", results.len() - failed, results.len());
    if failed > 0 {
        return Err(CliError::Oracle { failed });
    }
    Ok(())
}

/// Runs a parsed command and returns the process exit code.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out, err),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Oracle(a) => cmd_oracle(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

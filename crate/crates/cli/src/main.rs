//! `fpv`: analyse, measure and rewrite FPCore benchmarks, and run the batch
//! pipeline that composes them.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use fpv_core::analysis::{
    analyze_modes, combine_portfolio, emit_smt_query, AnalysisOutcome, AnalysisParams, Mode, Side,
};
use fpv_core::deadline::Deadline;
use fpv_core::dynamic::{measure_error, SamplePlan, DEFAULT_SAMPLES};
use fpv_core::fpcore::precondition::default_fallback;
use fpv_core::fpcore::{default_precondition, emit_fpcore, emit_scala_object, parse_fpcore, FpCoreProgram, Sidecar};
use fpv_core::numeric::format::{parse_number, sci3};
use fpv_core::pipeline::{
    load_benchmarks, parse_config, parse_report, render_report, run_batch, summarize, ReportFormat, RunConfig,
};
use fpv_core::rewrite::{genetic_search, greedy_search, rules_db, rules_text, SearchParams};

const SEED_ENV: &str = "FPV_SEED";

#[derive(Parser)]
#[command(name = "fpv", version, about = "Sound roundoff bounds and accuracy rewriting for FPCore programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ia,
    Subdiv,
    Portfolio,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Greedy,
    Genetic,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Md,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Lo,
    Hi,
}

#[derive(clap::Args)]
struct Inputs {
    /// FPCore file
    file: PathBuf,
    /// Sidecar of `benchmark variable lo hi` lines for cores without :pre
    #[arg(long)]
    preconditions: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Static worst-case absolute error bound of every core in FILE
    Analyze {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value = "portfolio")]
        mode: ModeArg,
        /// Subintervals per variable
        #[arg(long)]
        subdiv: Option<u32>,
        /// Analysis budget in milliseconds
        #[arg(long)]
        timeout: Option<u64>,
    },
    /// Sampled bits of error against correctly rounded results
    Sample {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Rewrite every core for accuracy and print the results as FPCore
    Improve {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value = "greedy")]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        /// Search budget in milliseconds
        #[arg(long)]
        timeout: Option<u64>,
    },
    /// Run the full comparison over every *.fpcore file in DIR
    Pipeline {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        preconditions: Option<PathBuf>,
        /// `key = value` settings, applied before flags
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        smt_solver: Option<PathBuf>,
        /// Budget of each stage in milliseconds
        #[arg(long)]
        timeout: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Render a pipeline report as a table
    Report {
        report: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: FormatArg,
        /// Append the strategy summary
        #[arg(long)]
        summary: bool,
    },
    /// Print the rewrite rule database
    Rules,
    /// Translate FILE to a Scala object for Daisy-style input
    Translate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value = "Benchmarks")]
        object: String,
    },
    /// SMT-LIB query asking whether a core can exceed PROBE on SIDE of its range
    Smt {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum)]
        side: SideArg,
        #[arg(long, allow_hyphen_values = true)]
        probe: String,
    },
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Parse(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Parse(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Parse(e) | Failure::Internal(e) => e,
        }
    }
}

type Outcome = Result<(), Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn parse_failure(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Parse(e.into())
}

fn internal(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Internal(e.into())
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(usage)
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).with_context(|| format!("{SEED_ENV} is not an integer: {v}")).map_err(usage),
        Err(_) => Ok(None),
    }
}

/// Cores of FILE, each with a precondition.
fn load_programs(inputs: &Inputs) -> Result<Vec<FpCoreProgram>, Failure> {
    let text = read(&inputs.file)?;
    let programs = parse_fpcore(&text).with_context(|| inputs.file.display().to_string()).map_err(parse_failure)?;
    let sidecar = match &inputs.preconditions {
        Some(p) => Some(Sidecar::parse(&read(p)?).with_context(|| p.display().to_string()).map_err(parse_failure)?),
        None => None,
    };
    programs
        .into_iter()
        .map(|p| {
            let pre = default_precondition(&p, sidecar.as_ref(), &default_fallback()).map_err(parse_failure)?;
            Ok(p.with_precondition(pre))
        })
        .collect()
}

fn describe(o: &AnalysisOutcome) -> String {
    match o {
        AnalysisOutcome::Bound { error, range } => {
            format!("bound {} range [{}, {}]", sci3(&error.abs_err), sci3(range.lo()), sci3(range.hi()))
        }
        AnalysisOutcome::Alarm { kind, path } => format!("alarm {} at {:?}", kind.name(), path.0),
        AnalysisOutcome::Timeout => "TO".to_string(),
    }
}

fn label(p: &FpCoreProgram) -> &str {
    if p.name.is_empty() {
        "<unnamed>"
    } else {
        &p.name
    }
}

fn analyze(inputs: &Inputs, mode: ModeArg, subdiv: Option<u32>, timeout: Option<u64>) -> Outcome {
    let mut params = AnalysisParams::default();
    if let Some(k) = subdiv {
        params.subdiv_per_var = k;
    }
    params.time_budget_ms = timeout;
    params.validate().map_err(usage)?;
    let modes: &[Mode] = match mode {
        ModeArg::Ia => &[Mode::Ia],
        ModeArg::Subdiv => &[Mode::Subdiv],
        ModeArg::Portfolio => &Mode::ALL,
    };
    for p in load_programs(inputs)? {
        let members = analyze_modes(&p, &params, modes, &Deadline::from_budget(timeout)).map_err(internal)?;
        let name = match mode {
            ModeArg::Ia => "ia",
            ModeArg::Subdiv => "subdiv",
            ModeArg::Portfolio => "portfolio",
        };
        println!("{}\t{name}\t{}", label(&p), describe(&combine_portfolio(&members)));
    }
    Ok(())
}

fn sample(inputs: &Inputs, n: usize, seed: u64) -> Outcome {
    let seed = env_seed()?.unwrap_or(seed);
    for p in load_programs(inputs)? {
        match measure_error(&p, &SamplePlan::new(n, seed)) {
            Ok(s) => println!(
                "{}\tavg_bits {:.3}\tmax_abs {}\tvalid {}/{}",
                label(&p),
                s.avg_bits,
                sci3(&s.max_abs),
                s.n_valid,
                s.n_total
            ),
            Err(e) => println!("{}\terror {e}", label(&p)),
        }
    }
    Ok(())
}

fn improve(inputs: &Inputs, strategy: StrategyArg, seed: u64, samples: usize, timeout: Option<u64>) -> Outcome {
    let seed = env_seed()?.unwrap_or(seed);
    let mut search = SearchParams::default();
    search.genetic.seed = seed;
    let params = AnalysisParams::default();
    let plan = SamplePlan::new(samples, seed);
    for p in load_programs(inputs)? {
        let deadline = Deadline::from_budget(timeout);
        let mut cur = p.clone();
        if matches!(strategy, StrategyArg::Greedy | StrategyArg::Both) {
            cur = greedy_search(&cur, &plan, &search, &deadline).map_err(internal)?.program;
        }
        if matches!(strategy, StrategyArg::Genetic | StrategyArg::Both) {
            let out = genetic_search(&cur, &params, &search, &deadline).map_err(internal)?;
            info!("{}: {}", label(&p), describe(&out.outcome));
            cur = out.program;
        }
        println!("{}", emit_fpcore(&cur));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn pipeline(
    dir: &Path,
    out: &Path,
    preconditions: Option<PathBuf>,
    config_file: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
    smt_solver: Option<PathBuf>,
    timeout: Option<u64>,
    samples: Option<usize>,
) -> Outcome {
    let mut config = RunConfig::default();
    if let Some(f) = &config_file {
        parse_config(&read(f)?, &mut config).with_context(|| f.display().to_string()).map_err(parse_failure)?;
    }
    if let Some(p) = preconditions {
        config.preconditions = Some(p);
    }
    if let Some(s) = smt_solver {
        config.smt_solver = Some(s);
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(w) = workers {
        config.workers = w;
    }
    if let Some(t) = timeout {
        config.timeout_ms = t;
    }
    if let Some(n) = samples {
        config.samples = n;
    }
    if let Some(s) = env_seed()? {
        config.seed = s;
    }
    config.validate().map_err(usage)?;
    let programs = load_benchmarks(dir).map_err(|e| match e {
        fpv_core::pipeline::PipelineError::Parse { .. } => parse_failure(e),
        _ => usage(e),
    })?;
    let report = run_batch(&programs, &config).map_err(|e| match e {
        fpv_core::pipeline::PipelineError::Precondition(_) => parse_failure(e),
        fpv_core::pipeline::PipelineError::Config(_) => usage(e),
        _ => internal(e),
    })?;
    std::fs::write(out, render_report(&report.rows, ReportFormat::Json))
        .with_context(|| format!("cannot write {}", out.display()))
        .map_err(internal)?;
    if config.format != ReportFormat::Json {
        print!("{}", render_report(&report.rows, config.format));
    }
    print!("{}", summarize(&report.rows));
    Ok(())
}

fn report(path: &Path, format: FormatArg, with_summary: bool) -> Outcome {
    let report = parse_report(&read(path)?).with_context(|| path.display().to_string()).map_err(parse_failure)?;
    let format = match format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Md => ReportFormat::Markdown,
        FormatArg::Csv => ReportFormat::Csv,
    };
    print!("{}", render_report(&report.rows, format));
    if with_summary {
        print!("{}", summarize(&report.rows));
    }
    Ok(())
}

fn translate(inputs: &Inputs, object: &str) -> Outcome {
    let programs = load_programs(inputs)?;
    print!("{}", emit_scala_object(object, &programs).map_err(usage)?);
    Ok(())
}

fn smt(inputs: &Inputs, side: SideArg, probe: &str) -> Outcome {
    let probe = parse_number(probe).with_context(|| format!("bad probe value {probe}")).map_err(usage)?;
    let side = match side {
        SideArg::Lo => Side::Lo,
        SideArg::Hi => Side::Hi,
    };
    let params = AnalysisParams::default();
    for p in load_programs(inputs)? {
        let members = analyze_modes(&p, &params, &[Mode::Ia], &Deadline::none()).map_err(internal)?;
        let AnalysisOutcome::Bound { range, .. } = combine_portfolio(&members) else {
            return Err(usage(anyhow::anyhow!("{}: no range to refine: {}", label(&p), describe(&members[&Mode::Ia]))));
        };
        println!("; {}", label(&p));
        print!("{}", emit_smt_query(&p, &range, side, &probe).map_err(usage)?);
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Analyze { inputs, mode, subdiv, timeout } => analyze(&inputs, mode, subdiv, timeout),
        Command::Sample { inputs, n, seed } => sample(&inputs, n, seed),
        Command::Improve { inputs, strategy, seed, samples, timeout } => improve(&inputs, strategy, seed, samples, timeout),
        Command::Pipeline { dir, out, preconditions, config, seed, workers, smt_solver, timeout, samples } => {
            pipeline(&dir, &out, preconditions, config, seed, workers, smt_solver, timeout, samples)
        }
        Command::Report { report: path, format, summary } => report(&path, format, summary),
        Command::Rules => {
            print!("{}", rules_text(&rules_db()));
            Ok(())
        }
        Command::Translate { inputs, object } => translate(&inputs, &object),
        Command::Smt { inputs, side, probe } => smt(&inputs, side, &probe),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fpv: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn strategies_map_onto_the_core_names() {
        for (arg, name) in [(StrategyArg::Greedy, "greedy"), (StrategyArg::Genetic, "genetic"), (StrategyArg::Both, "both")] {
            assert_eq!(arg.to_possible_value().unwrap().get_name(), name);
            assert!(fpv_core::pipeline::Strategy::from_name(name).is_some());
        }
    }
}

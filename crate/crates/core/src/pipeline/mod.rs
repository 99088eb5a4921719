//! Batch orchestration: improve, measure and analyse each benchmark, compare
//! rewriting strategies, and render report tables.

mod config;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    analyze_ia_with, analyze_subdiv_with, combine_portfolio, refine_range_with_solver, AnalysisOutcome, AnalysisParams,
    ErrorBound, Mode,
};
use crate::deadline::{Deadline, TimedOut};
use crate::dynamic::{measure_error, SamplePlan, SampledError};
use crate::fpcore::precondition::default_fallback;
use crate::fpcore::{default_precondition, parse_fpcore, FpCoreProgram, ParseError, PreconditionError, Sidecar};
use crate::numeric::{ExactRational, Interval, Rational};
use crate::rewrite::{genetic_search, greedy_search, RewriteError, SearchParams};

pub use config::{parse_config, ConfigError};
pub use report::{parse_report, render_report, summarize, ReportFormat};

pub const DEFAULT_TIMEOUT_MS: u64 = 120_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    AlarmSrc,
    AlarmRes,
    TimeoutImprove,
    TimeoutAnalyze,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Greedy,
    Genetic,
    Both,
}

impl Strategy {
    pub fn from_name(s: &str) -> Option<Strategy> {
        match s {
            "greedy" => Some(Strategy::Greedy),
            "genetic" => Some(Strategy::Genetic),
            "both" => Some(Strategy::Both),
            _ => None,
        }
    }
}

/// Report columns comparing rewriting strategies, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewriteColumn {
    Baseline,
    Daisy,
    Herbie,
    Both,
    Minimum,
}

impl RewriteColumn {
    pub const ALL: [RewriteColumn; 5] =
        [RewriteColumn::Baseline, RewriteColumn::Daisy, RewriteColumn::Herbie, RewriteColumn::Both, RewriteColumn::Minimum];

    pub fn name(self) -> &'static str {
        match self {
            RewriteColumn::Baseline => "baseline",
            RewriteColumn::Daisy => "daisy",
            RewriteColumn::Herbie => "herbie",
            RewriteColumn::Both => "both",
            RewriteColumn::Minimum => "minimum",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRow {
    pub name: String,
    pub status: RowStatus,
    pub seed: u64,
    pub src_expr: String,
    pub res_expr: Option<String>,
    pub sampled_src: Option<SampledError>,
    pub sampled_res: Option<SampledError>,
    pub bounds_src: BTreeMap<Mode, AnalysisOutcome>,
    pub bounds_res: BTreeMap<Mode, AnalysisOutcome>,
    pub best_src: Option<ErrorBound>,
    pub best_res: Option<ErrorBound>,
    pub improvement_ratio: Option<ExactRational>,
    pub rewrite_columns: BTreeMap<RewriteColumn, AnalysisOutcome>,
    /// Program of the minimum column; the input when no strategy bounded.
    pub final_expr: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub rows: Vec<PipelineRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Budget of each stage, not of a whole benchmark.
    pub timeout_ms: u64,
    pub seed: u64,
    pub samples: usize,
    pub analysis: AnalysisParams,
    pub search: SearchParams,
    pub strategies: BTreeSet<Strategy>,
    pub format: ReportFormat,
    pub workers: usize,
    pub smt_solver: Option<PathBuf>,
    pub smt_probes: u32,
    pub preconditions: Option<PathBuf>,
    pub fallback: Interval,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            timeout_ms: DEFAULT_TIMEOUT_MS,
            seed: 0,
            samples: crate::dynamic::DEFAULT_SAMPLES,
            analysis: AnalysisParams::default(),
            search: SearchParams::default(),
            strategies: [Strategy::Greedy, Strategy::Genetic, Strategy::Both].into_iter().collect(),
            format: ReportFormat::Json,
            workers: 1,
            smt_solver: None,
            smt_probes: 8,
            preconditions: None,
            fallback: default_fallback(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.timeout_ms == 0 {
            return Err(PipelineError::Config("timeout must be positive".into()));
        }
        if self.samples == 0 {
            return Err(PipelineError::Config("sample count must be positive".into()));
        }
        if self.workers == 0 {
            return Err(PipelineError::Config("worker count must be positive".into()));
        }
        self.analysis.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.search.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    /// Per-benchmark configuration with seeds derived from the benchmark name.
    fn for_benchmark(&self, name: &str) -> RunConfig {
        let seed = derive_seed(self.seed, name);
        let mut c = self.clone();
        c.seed = seed;
        c.search.genetic.seed = seed;
        c
    }

    fn plan(&self) -> SamplePlan {
        SamplePlan::new(self.samples, self.seed)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error(transparent)]
    Precondition(#[from] PreconditionError),
    #[error("{0}")]
    Io(String),
}

/// Stable 64-bit seed from the global seed and a benchmark name.
pub fn derive_seed(global: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Staged<R> {
    Done(R),
    Timeout,
}

/// Runs `stage` against a fresh deadline `budget_ms` from now. A stage that
/// gives up, or that returns after the deadline, counts as timed out.
pub fn enforce_timeout<R>(budget_ms: u64, stage: impl FnOnce(&Deadline) -> Result<R, TimedOut>) -> Result<Staged<R>, PipelineError> {
    if budget_ms == 0 {
        return Err(PipelineError::Config("stage budget must be positive".into()));
    }
    let d = Deadline::after_ms(budget_ms);
    Ok(match stage(&d) {
        Ok(r) if !d.expired() => Staged::Done(r),
        _ => Staged::Timeout,
    })
}

/// `Timeout` when the stage ran out of time; analysis errors are impossible
/// for a program that has a precondition.
fn analyse(program: &FpCoreProgram, mode: Mode, config: &RunConfig) -> AnalysisOutcome {
    let staged = enforce_timeout(config.timeout_ms, |d| {
        let out = match mode {
            Mode::Ia => analyze_ia_with(program, &config.analysis, d),
            Mode::Subdiv => analyze_subdiv_with(program, &config.analysis, d),
        };
        match out {
            Ok(AnalysisOutcome::Timeout) => Err(TimedOut),
            Ok(o) => Ok(o),
            Err(e) => {
                warn!("{}: {e}", program.name);
                Err(TimedOut)
            }
        }
    })
    .expect("validated budget");
    let out = match staged {
        Staged::Done(o) => o,
        Staged::Timeout => AnalysisOutcome::Timeout,
    };
    match (&config.smt_solver, out) {
        (Some(solver), AnalysisOutcome::Bound { error, range }) if mode == Mode::Ia => {
            let d = Deadline::after_ms(config.timeout_ms);
            let range = refine_range_with_solver(program, &range, solver, config.smt_probes, &d).unwrap_or_else(|e| {
                warn!("{}: solver refinement skipped: {e}", program.name);
                range
            });
            AnalysisOutcome::Bound { error, range }
        }
        (_, o) => o,
    }
}

fn analyse_all(program: &FpCoreProgram, config: &RunConfig) -> BTreeMap<Mode, AnalysisOutcome> {
    Mode::ALL.iter().map(|&m| (m, analyse(program, m, config))).collect()
}

fn best_of(bounds: &BTreeMap<Mode, AnalysisOutcome>) -> Option<ErrorBound> {
    combine_portfolio(bounds).bound().map(|b| ErrorBound { abs_err: b.clone() })
}

fn has_alarm(bounds: &BTreeMap<Mode, AnalysisOutcome>) -> bool {
    bounds.values().any(|o| o.alarm().is_some())
}

fn with_precondition(program: &FpCoreProgram, config: &RunConfig, sidecar: Option<&Sidecar>) -> Result<FpCoreProgram, PipelineError> {
    let pre = default_precondition(program, sidecar, &config.fallback)?;
    Ok(program.with_precondition(pre))
}

fn greedy_stage(program: &FpCoreProgram, config: &RunConfig) -> Staged<Option<FpCoreProgram>> {
    enforce_timeout(config.timeout_ms, |d| match greedy_search(program, &config.plan(), &config.search, d) {
        Ok(out) => Ok(Some(out.program)),
        Err(RewriteError::Timeout) => Err(TimedOut),
        Err(e) => {
            warn!("{}: greedy search failed: {e}", program.name);
            Ok(None)
        }
    })
    .expect("validated budget")
}

fn genetic_stage(program: &FpCoreProgram, config: &RunConfig) -> Staged<(FpCoreProgram, AnalysisOutcome)> {
    enforce_timeout(config.timeout_ms, |d| match genetic_search(program, &config.analysis, &config.search, d) {
        Ok(out) => Ok((out.program, out.outcome)),
        Err(RewriteError::Timeout) => Err(TimedOut),
        Err(e) => {
            warn!("{}: genetic search failed: {e}", program.name);
            Err(TimedOut)
        }
    })
    .expect("validated budget")
}

fn measure(program: &FpCoreProgram, config: &RunConfig) -> Option<SampledError> {
    match measure_error(program, &config.plan()) {
        Ok(s) => Some(s),
        Err(e) => {
            warn!("{}: sampling failed: {e}", program.name);
            None
        }
    }
}

fn status_of(improve_timed_out: bool, src: &BTreeMap<Mode, AnalysisOutcome>, res: &BTreeMap<Mode, AnalysisOutcome>) -> RowStatus {
    // the input decides first: without a src bound nothing is comparable
    if best_of(src).is_none() {
        return if has_alarm(src) { RowStatus::AlarmSrc } else { RowStatus::TimeoutAnalyze };
    }
    if improve_timed_out {
        return RowStatus::TimeoutImprove;
    }
    if best_of(res).is_none() {
        return if has_alarm(res) { RowStatus::AlarmRes } else { RowStatus::TimeoutAnalyze };
    }
    RowStatus::Ok
}

/// Greedy improvement, sampled error and static bounds of input and result.
/// `program` must carry a precondition.
pub fn run_pipeline(program: &FpCoreProgram, config: &RunConfig) -> PipelineRow {
    let config = config.for_benchmark(&program.name);
    info!("{}: improving", program.name);
    let improved = greedy_stage(program, &config);
    let res = match &improved {
        Staged::Done(Some(p)) => Some(p.clone()),
        Staged::Done(None) => Some(program.clone()),
        Staged::Timeout => None,
    };
    let bounds_src = analyse_all(program, &config);
    let bounds_res = res.as_ref().map(|p| analyse_all(p, &config)).unwrap_or_default();
    let best_src = best_of(&bounds_src);
    let best_res = best_of(&bounds_res);
    let improvement_ratio = match (&best_src, &best_res) {
        (Some(s), Some(r)) if s.abs_err > Rational::from_integer(0.into()) => Some(ExactRational(&r.abs_err / &s.abs_err)),
        (Some(s), Some(r)) if s.abs_err == r.abs_err => Some(ExactRational(Rational::from_integer(1.into()))),
        _ => None,
    };
    PipelineRow {
        name: program.name.clone(),
        status: status_of(matches!(improved, Staged::Timeout), &bounds_src, &bounds_res),
        seed: config.seed,
        src_expr: program.body.to_string(),
        res_expr: res.as_ref().map(|p| p.body.to_string()),
        sampled_src: measure(program, &config),
        sampled_res: res.as_ref().and_then(|p| measure(p, &config)),
        bounds_src,
        bounds_res,
        best_src,
        best_res,
        improvement_ratio,
        rewrite_columns: BTreeMap::new(),
        final_expr: None,
    }
}

/// Minimum over bounds (earliest column on ties); else the first alarm; else `Timeout`.
fn column_minimum(cells: &[(RewriteColumn, &AnalysisOutcome)]) -> Option<RewriteColumn> {
    let mut best: Option<(RewriteColumn, &Rational)> = None;
    for (c, o) in cells {
        if let Some(b) = o.bound() {
            if best.is_none_or(|(_, cur)| b < cur) {
                best = Some((*c, b));
            }
        }
    }
    best.map(|(c, _)| c)
}

/// Fills the strategy comparison columns of a pipeline row. The greedy
/// result already in `row` is reused for the herbie and both columns.
pub fn compare_rewriters(program: &FpCoreProgram, config: &RunConfig) -> PipelineRow {
    let mut row = run_pipeline(program, config);
    let config = config.for_benchmark(&program.name);
    let mut cols: BTreeMap<RewriteColumn, AnalysisOutcome> = BTreeMap::new();
    let mut programs: BTreeMap<RewriteColumn, FpCoreProgram> = BTreeMap::new();
    cols.insert(RewriteColumn::Baseline, combine_portfolio(&row.bounds_src));
    if config.strategies.contains(&Strategy::Genetic) {
        match genetic_stage(program, &config) {
            Staged::Done((p, out)) => {
                cols.insert(RewriteColumn::Daisy, out);
                programs.insert(RewriteColumn::Daisy, p);
            }
            Staged::Timeout => {
                cols.insert(RewriteColumn::Daisy, AnalysisOutcome::Timeout);
            }
        }
    }
    let greedy = row.res_expr.as_ref().map(|_| {
        let body = crate::fpcore::parse_expr(row.res_expr.as_deref().expect("checked")).expect("printed expressions re-parse");
        program.with_body(body)
    });
    if config.strategies.contains(&Strategy::Greedy) {
        match &greedy {
            Some(g) => {
                cols.insert(RewriteColumn::Herbie, combine_portfolio(&row.bounds_res));
                programs.insert(RewriteColumn::Herbie, g.clone());
            }
            None => {
                cols.insert(RewriteColumn::Herbie, AnalysisOutcome::Timeout);
            }
        }
    }
    if config.strategies.contains(&Strategy::Both) {
        let both = match &greedy {
            Some(g) => match genetic_stage(g, &config) {
                Staged::Done((p, out)) => {
                    programs.insert(RewriteColumn::Both, p);
                    out
                }
                Staged::Timeout => AnalysisOutcome::Timeout,
            },
            None => AnalysisOutcome::Timeout,
        };
        cols.insert(RewriteColumn::Both, both);
    }
    let strategies: Vec<(RewriteColumn, &AnalysisOutcome)> = [RewriteColumn::Daisy, RewriteColumn::Herbie, RewriteColumn::Both]
        .iter()
        .filter_map(|c| cols.get(c).map(|o| (*c, o)))
        .collect();
    if !strategies.is_empty() {
        let (minimum, winner) = match column_minimum(&strategies) {
            Some(c) => (cols[&c].clone(), Some(c)),
            None => (
                strategies.iter().find(|(_, o)| o.alarm().is_some()).map_or(AnalysisOutcome::Timeout, |(_, o)| (*o).clone()),
                None,
            ),
        };
        row.final_expr = Some(winner.and_then(|c| programs.get(&c)).unwrap_or(program).body.to_string());
        cols.insert(RewriteColumn::Minimum, minimum);
    }
    row.rewrite_columns = cols;
    row
}

/// `*.fpcore` files of `dir` in file-name order, cores in file order.
pub fn load_benchmarks(dir: &Path) -> Result<Vec<FpCoreProgram>, PipelineError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "fpcore"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(&f).map_err(|e| PipelineError::Io(format!("{}: {e}", f.display())))?;
        let progs = parse_fpcore(&text).map_err(|source| PipelineError::Parse { path: f.display().to_string(), source })?;
        out.extend(progs);
    }
    Ok(out)
}

pub fn load_sidecar(config: &RunConfig) -> Result<Option<Sidecar>, PipelineError> {
    match &config.preconditions {
        None => Ok(None),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| PipelineError::Io(format!("{}: {e}", p.display())))?;
            Ok(Some(Sidecar::parse(&text)?))
        }
    }
}

/// One row per program in input order, computed on `config.workers` threads.
pub fn run_batch(programs: &[FpCoreProgram], config: &RunConfig) -> Result<PipelineReport, PipelineError> {
    config.validate()?;
    let sidecar = load_sidecar(config)?;
    let ready: Vec<FpCoreProgram> =
        programs.iter().map(|p| with_precondition(p, config, sidecar.as_ref())).collect::<Result<_, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let rows = pool.install(|| ready.par_iter().map(|p| compare_rewriters(p, config)).collect());
    Ok(PipelineReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::{Duration, Instant};

    fn prog(src: &str) -> FpCoreProgram {
        parse_fpcore(src).unwrap().remove(0)
    }

    fn quick() -> RunConfig {
        let mut c = RunConfig::default();
        c.samples = 256;
        c.search.genetic.population = 6;
        c.search.genetic.generations = 3;
        c
    }

    #[test]
    fn seeds_depend_on_name_and_global_seed() {
        assert_eq!(derive_seed(1, "a"), derive_seed(1, "a"));
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
    }

    #[test]
    fn stage_budgets() {
        assert_eq!(enforce_timeout(120_000, |_| Ok(7)).unwrap(), Staged::Done(7));
        assert!(enforce_timeout(0, |_| Ok(())).is_err());
        let t = Instant::now();
        let r = enforce_timeout(100, |d| loop {
            d.check()?;
            std::hint::spin_loop();
        });
        assert_eq!(r.unwrap(), Staged::<()>::Timeout);
        assert!(t.elapsed() < Duration::from_millis(2100));
    }

    #[test]
    fn unchanged_program_has_unit_ratio() {
        let row = run_pipeline(&prog("(FPCore (x y) :pre (and (<= 1 x 2) (<= 1 y 2)) (+ x y))"), &quick());
        assert_eq!(row.status, RowStatus::Ok);
        assert_eq!(row.improvement_ratio, Some(ExactRational(Rational::from_integer(1.into()))));
        assert_eq!(row.res_expr.as_deref(), Some("(+ x y)"));
    }

    #[test]
    fn alarming_input() {
        let row = run_pipeline(&prog("(FPCore (x) :pre (<= 0 x 2) (/ 1 (- x 1)))"), &quick());
        assert_eq!(row.status, RowStatus::AlarmSrc);
        assert!(row.best_src.is_none() && row.improvement_ratio.is_none());
    }

    #[test]
    fn columns_and_minimum() {
        let row = compare_rewriters(&prog("(FPCore (x y) :pre (and (<= 1 x 2) (<= 1 y 2)) (- (* x x) (* x y)))"), &quick());
        let b = |c| row.rewrite_columns[&c].bound().cloned().unwrap();
        assert!(b(RewriteColumn::Daisy) <= b(RewriteColumn::Baseline));
        assert!(b(RewriteColumn::Both) <= b(RewriteColumn::Herbie));
        let m = b(RewriteColumn::Minimum);
        for c in [RewriteColumn::Daisy, RewriteColumn::Herbie, RewriteColumn::Both] {
            assert!(m <= b(c));
        }
        assert!(row.final_expr.is_some());
    }
}

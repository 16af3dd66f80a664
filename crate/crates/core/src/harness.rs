//! Experiment orchestration and result files.
//!
//! An [`ExperimentPlan`] describes either an NK sweep over a grid of `(N, K)` cells
//! or a budgeted comparison on a real-valued objective. Runs are independent and
//! execute on the rayon pool; results are merged by index, so a report is a pure
//! function of its plan.
//!
//! Seeds, all derived with [`derive_seed`]:
//!
//! ```text
//! landscape   = derive([LANDSCAPE_TAG, base, N, K, landscape])
//! init        = derive([INIT_TAG, base, N, K, landscape, run])
//! evolve      = derive([RUN_TAG, base, N, K, landscape, run, algorithm id])
//! noise       = derive([NOISE_TAG, base, run])        (budgeted comparisons)
//! ```
//!
//! Every algorithm on the same `(landscape, run)` starts from the same evaluated
//! initial population, so comparisons are paired. Budgeted comparisons use
//! `N = K = landscape = 0` in the formulas above, and all algorithms of a run share
//! one objective session whose evaluation counter restarts at `P` for each
//! algorithm, so offspring number `e` sees the same noise seeds under every
//! algorithm.
//!
//! Exported values are in raw objective units; for a minimized objective a lower
//! `best` is better.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolve::{self, Algorithm, EaConfig, EvolveError, Individual, Replacement, RunTrace};
use crate::genome::{Genome, GenomeKind, VariationConfig};
use crate::nk::NkLandscape;
use crate::objective::{Direction, ObjectiveError, ObjectiveSpec, PreparedObjective};
use crate::rng::derive_seed;
use crate::stats::{self, Alternative, SampleSummary, TestResult};

const LANDSCAPE_TAG: u64 = 0x6c61_6e64;
const INIT_TAG: u64 = 0x696e_6974;
const RUN_TAG: u64 = 0x7275_6e73;
const NOISE_TAG: u64 = 0x6e6f_6973;

/// Confidence level of exported curve bands.
pub const BAND_LEVEL: f64 = 0.95;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid plan: {0}")]
    Config(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl HarnessError {
    pub fn category(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Objective(e) => e.category(),
            HarnessError::Io { .. } => "io",
        }
    }

    fn io(path: &Path, e: impl ToString) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

/// What an experiment varies over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Grid {
    /// Every combination of the listed `N` and `K` values.
    Nk { n: Vec<usize>, k: Vec<usize> },
    /// A single cell on a real-valued objective.
    Budgeted { objective: ObjectiveSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    #[serde(default = "default_name")]
    pub name: String,
    pub grid: Grid,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    /// Landscapes per NK cell. Budgeted comparisons use exactly one.
    #[serde(default = "one")]
    pub landscapes: usize,
    /// Runs per landscape.
    pub runs: usize,
    pub population_size: usize,
    pub tournament_size: usize,
    pub budget: u64,
    /// Defaults to the NK or real-valued preset depending on the grid.
    #[serde(default)]
    pub variation: Option<VariationConfig>,
    /// Defaults to replace-worst for NK and a replacement tournament otherwise.
    #[serde(default)]
    pub replacement: Option<Replacement>,
    pub base_seed: u64,
    /// Keep every `trace_stride`-th generation (and the last) in traces and curves.
    #[serde(default = "one_u64")]
    pub trace_stride: u64,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Baseline, Algorithm::Hdea]
}

fn one() -> usize {
    1
}

fn one_u64() -> u64 {
    1
}

impl ExperimentPlan {
    /// NK sweep with the replication settings (P=30, T=2, 20,000 generations).
    pub fn nk_sweep(n: Vec<usize>, k: Vec<usize>, landscapes: usize, runs: usize, base_seed: u64) -> Self {
        ExperimentPlan {
            name: "nk-sweep".into(),
            grid: Grid::Nk { n, k },
            algorithms: default_algorithms(),
            landscapes,
            runs,
            population_size: 30,
            tournament_size: 2,
            budget: 20_000,
            variation: None,
            replacement: None,
            base_seed,
            trace_stride: 1,
        }
    }

    /// Budgeted comparison with the real-valued settings (P=50, T=3, 100 evaluations).
    pub fn budgeted(objective: ObjectiveSpec, runs: usize, base_seed: u64) -> Self {
        ExperimentPlan {
            name: "compare".into(),
            grid: Grid::Budgeted { objective },
            algorithms: default_algorithms(),
            landscapes: 1,
            runs,
            population_size: 50,
            tournament_size: 3,
            budget: 100,
            variation: None,
            replacement: None,
            base_seed,
            trace_stride: 1,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a TOML plan; relative file paths inside it are taken relative to `path`.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut plan = Self::from_toml(&text)?;
        if let Grid::Budgeted { objective } = &mut plan.grid {
            objective.resolve_paths(path.parent().unwrap_or(Path::new("")));
        }
        Ok(plan)
    }

    pub fn variation(&self) -> VariationConfig {
        self.variation.unwrap_or(match self.grid {
            Grid::Nk { .. } => VariationConfig::nk(),
            Grid::Budgeted { .. } => VariationConfig::real_valued(),
        })
    }

    pub fn replacement(&self) -> Replacement {
        self.replacement.unwrap_or(match self.grid {
            Grid::Nk { .. } => Replacement::Worst,
            Grid::Budgeted { .. } => Replacement::Tournament,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required".into());
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i].contains(a) {
                return bad(format!("algorithm {a} listed twice"));
            }
        }
        if self.landscapes < 1 || self.runs < 1 {
            return bad("landscapes and runs must be at least 1".into());
        }
        if self.trace_stride < 1 {
            return bad("trace_stride must be at least 1".into());
        }
        match &self.grid {
            Grid::Nk { n, k } => {
                if n.is_empty() || k.is_empty() {
                    return bad("NK grid needs at least one N and one K".into());
                }
            }
            Grid::Budgeted { .. } => {
                if self.landscapes != 1 {
                    return bad("budgeted comparisons use a single landscape".into());
                }
            }
        }
        self.ea_config(self.algorithms[0], 0)
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let kind = match self.grid {
            Grid::Nk { .. } => GenomeKind::Bits,
            Grid::Budgeted { .. } => GenomeKind::Real,
        };
        self.variation()
            .check_kind(kind)
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn ea_config(&self, algorithm: Algorithm, run_seed: u64) -> EaConfig {
        EaConfig {
            algorithm,
            population_size: self.population_size,
            tournament_size: self.tournament_size,
            budget: self.budget,
            variation: self.variation(),
            run_seed,
            replacement: self.replacement(),
        }
    }

    pub fn cells(&self) -> Vec<Cell> {
        match &self.grid {
            Grid::Nk { n, k } => n
                .iter()
                .flat_map(|&n| k.iter().map(move |&k| (n, k)))
                .enumerate()
                .map(|(index, (n, k))| Cell {
                    index,
                    label: format!("n{n}_k{k}"),
                    n: Some(n),
                    k: Some(k),
                })
                .collect(),
            Grid::Budgeted { .. } => vec![Cell {
                index: 0,
                label: "budgeted".into(),
                n: None,
                k: None,
            }],
        }
    }

    /// Total number of algorithm runs in the plan.
    pub fn total_runs(&self) -> usize {
        self.cells().len() * self.landscapes * self.runs * self.algorithms.len()
    }

    /// The algorithm others are tested against: the baseline when present.
    pub fn reference(&self) -> Algorithm {
        if self.algorithms.contains(&Algorithm::Baseline) {
            Algorithm::Baseline
        } else {
            self.algorithms[0]
        }
    }

    fn seeds(&self, cell: &Cell, landscape: usize, run: usize) -> RunSeeds {
        let (n, k) = (cell.n.unwrap_or(0) as u64, cell.k.unwrap_or(0) as u64);
        let (base, l, r) = (self.base_seed, landscape as u64, run as u64);
        RunSeeds {
            landscape: derive_seed(&[LANDSCAPE_TAG, base, n, k, l]),
            init: derive_seed(&[INIT_TAG, base, n, k, l, r]),
            noise: derive_seed(&[NOISE_TAG, base, r]),
            evolve: [0, 1, 2].map(|id| derive_seed(&[RUN_TAG, base, n, k, l, r, id])),
        }
    }
}

struct RunSeeds {
    landscape: u64,
    init: u64,
    noise: u64,
    evolve: [u64; 3],
}

impl RunSeeds {
    fn evolve(&self, algorithm: Algorithm) -> u64 {
        self.evolve[algorithm.id() as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub index: usize,
    /// File-name friendly identifier, e.g. `n50_k10`.
    pub label: String,
    pub n: Option<usize>,
    pub k: Option<usize>,
}

/// One trace row in raw objective units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub generation: u64,
    pub best: f64,
    pub mean: f64,
    pub offspring: Option<f64>,
}

/// Converts a run trace to raw units, keeping every `stride`-th generation and the last.
pub fn trace_points(trace: &RunTrace, direction: Direction, stride: u64) -> Vec<TracePoint> {
    let last = trace.records.len().saturating_sub(1) as u64;
    trace
        .records
        .iter()
        .filter(|r| r.generation % stride == 0 || r.generation == last)
        .map(|r| TracePoint {
            generation: r.generation,
            best: direction.to_raw(r.best),
            mean: direction.to_raw(r.mean),
            offspring: r.offspring.as_ref().map(|e| e.raw),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub cell: usize,
    pub landscape: usize,
    pub run: usize,
    pub algorithm: Algorithm,
    pub landscape_seed: Option<u64>,
    pub init_seed: u64,
    pub run_seed: u64,
    pub final_best: f64,
    pub final_mean: f64,
    pub evaluations: u64,
    pub samples: u64,
    pub best_monotone: bool,
    pub trace: Vec<TracePoint>,
    pub best: Individual,
}

impl RunRecord {
    pub fn trace_file_name(&self, cells: &[Cell]) -> String {
        format!(
            "{}_l{}_r{}_{}.csv",
            cells[self.cell].label, self.landscape, self.run, self.algorithm
        )
    }
}

/// A run (or a whole cell) that could not complete.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunFailure {
    pub cell: usize,
    pub landscape: Option<usize>,
    pub run: Option<usize>,
    pub algorithm: Option<Algorithm>,
    pub category: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: usize,
    pub algorithm: Algorithm,
    pub complete: bool,
    pub runs: usize,
    pub final_best: Option<SampleSummary>,
    pub final_mean: Option<SampleSummary>,
    /// Set when every run of this algorithm in the cell used the same count.
    pub evaluations_per_run: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    FinalBest,
    FinalMean,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::FinalBest => "final_best",
            Metric::FinalMean => "final_mean",
        }
    }

    fn of(self, r: &RunRecord) -> f64 {
        match self {
            Metric::FinalBest => r.final_best,
            Metric::FinalMean => r.final_mean,
        }
    }
}

/// How observations were grouped for a test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// Every run is one observation; samples are independent.
    Pooled,
    /// Per-landscape means, paired by landscape.
    Landscape,
    /// Paired by run (shared initial population).
    Run,
}

impl Pairing {
    pub fn name(self) -> &'static str {
        match self {
            Pairing::Pooled => "pooled",
            Pairing::Landscape => "landscape",
            Pairing::Run => "run",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceRow {
    pub cell: usize,
    pub metric: Metric,
    pub algorithm: Algorithm,
    pub reference: Algorithm,
    pub pairing: Pairing,
    pub n: usize,
    pub result: TestResult,
}

/// Mean curves with confidence bands over the runs of one algorithm in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub cell: usize,
    pub algorithm: Algorithm,
    pub generation: u64,
    pub runs: usize,
    pub best: (f64, f64, f64),
    pub mean: (f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub plan: ExperimentPlan,
    pub cells: Vec<Cell>,
    pub summaries: Vec<CellSummary>,
    pub significance: Vec<SignificanceRow>,
    pub curves: Vec<CurvePoint>,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    /// Genome position names for real-valued objectives.
    pub dimension_names: Option<Vec<String>>,
}

impl ComparisonReport {
    /// A report with no runs.
    pub fn empty(plan: ExperimentPlan) -> Self {
        ComparisonReport {
            cells: Vec::new(),
            summaries: Vec::new(),
            significance: Vec::new(),
            curves: Vec::new(),
            runs: Vec::new(),
            failures: Vec::new(),
            dimension_names: None,
            plan,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn runs_of(&self, cell: usize, algorithm: Algorithm) -> impl Iterator<Item = &RunRecord> {
        self.runs
            .iter()
            .filter(move |r| r.cell == cell && r.algorithm == algorithm)
    }

    /// True when every recorded run consumed exactly `P + budget` evaluations and
    /// `samples` raw samples per evaluation.
    pub fn budget_parity(&self, samples_per_evaluation: u64) -> bool {
        let expected = self.plan.population_size as u64 + self.plan.budget;
        self.runs
            .iter()
            .all(|r| r.evaluations == expected && r.samples == expected * samples_per_evaluation)
    }

    pub fn summary(&self, cell: usize, algorithm: Algorithm) -> Option<&CellSummary> {
        self.summaries
            .iter()
            .find(|s| s.cell == cell && s.algorithm == algorithm)
    }

    pub fn test(&self, cell: usize, metric: Metric, algorithm: Algorithm, pairing: Pairing) -> Option<&TestResult> {
        self.significance
            .iter()
            .find(|s| s.cell == cell && s.metric == metric && s.algorithm == algorithm && s.pairing == pairing)
            .map(|s| &s.result)
    }
}

fn failure(
    cell: usize,
    landscape: Option<usize>,
    run: Option<usize>,
    algorithm: Option<Algorithm>,
    e: &EvolveError,
) -> RunFailure {
    let category = match e {
        EvolveError::Config(_) | EvolveError::Genome(_) => "config",
        EvolveError::Objective { source, .. } => source.category(),
    };
    RunFailure {
        cell,
        landscape,
        run,
        algorithm,
        category,
        message: e.to_string(),
    }
}

struct Job {
    cell: usize,
    landscape: usize,
    run: usize,
}

/// Runs every algorithm from one shared initial population.
fn run_paired(
    plan: &ExperimentPlan,
    cell: &Cell,
    job: &Job,
    objective: &PreparedObjective,
    seeds: &RunSeeds,
    landscape_seed: Option<u64>,
) -> Result<Vec<RunRecord>, RunFailure> {
    let fail = |alg, e: &EvolveError| failure(job.cell, Some(job.landscape), Some(job.run), alg, e);
    let mut eval = objective
        .instantiate(seeds.noise)
        .map_err(|source| fail(None, &EvolveError::Objective { generation: 0, source }))?;
    let spec = objective.genome_spec();
    let initial =
        evolve::initial_population(&spec, plan.population_size, seeds.init, &mut eval).map_err(|e| fail(None, &e))?;
    let direction = objective.direction();
    plan.algorithms
        .iter()
        .map(|&algorithm| {
            let cfg = plan.ea_config(algorithm, seeds.evolve(algorithm));
            eval.skip_to(plan.population_size as u64);
            let trace = evolve::run_from(&cfg, initial.clone(), &mut eval).map_err(|e| fail(Some(algorithm), &e))?;
            Ok(RunRecord {
                cell: cell.index,
                landscape: job.landscape,
                run: job.run,
                algorithm,
                landscape_seed,
                init_seed: seeds.init,
                run_seed: cfg.run_seed,
                final_best: direction.to_raw(trace.final_best()),
                final_mean: direction.to_raw(trace.final_mean()),
                evaluations: trace.evaluations,
                samples: trace.samples,
                best_monotone: trace.best_is_monotone(),
                trace: trace_points(&trace, direction, plan.trace_stride),
                best: trace.best_individual().clone(),
            })
        })
        .collect()
}

fn assemble(
    plan: &ExperimentPlan,
    cells: Vec<Cell>,
    outcomes: Vec<Result<Vec<RunRecord>, RunFailure>>,
) -> ComparisonReport {
    let mut report = ComparisonReport::empty(plan.clone());
    for outcome in outcomes {
        match outcome {
            Ok(records) => report.runs.extend(records),
            Err(f) => report.failures.push(f),
        }
    }
    let incomplete: Vec<usize> = report.failures.iter().map(|f| f.cell).collect();
    // A failed run aborts its whole cell.
    report.runs.retain(|r| !incomplete.contains(&r.cell));
    report.cells = cells;
    summarize_cells(&mut report);
    test_cells(&mut report);
    build_curves(&mut report);
    report
}

fn summarize_cells(report: &mut ComparisonReport) {
    let mut summaries = Vec::new();
    for cell in &report.cells {
        let complete = !report.failures.iter().any(|f| f.cell == cell.index);
        for &algorithm in &report.plan.algorithms {
            let runs: Vec<&RunRecord> = report.runs_of(cell.index, algorithm).collect();
            let metric = |m: Metric| {
                let xs: Vec<f64> = runs.iter().map(|r| m.of(r)).collect();
                stats::summarize(&xs).ok()
            };
            let evaluations_per_run = match runs.first() {
                Some(first) if runs.iter().all(|r| r.evaluations == first.evaluations) => Some(first.evaluations),
                _ => None,
            };
            summaries.push(CellSummary {
                cell: cell.index,
                algorithm,
                complete,
                runs: runs.len(),
                final_best: metric(Metric::FinalBest),
                final_mean: metric(Metric::FinalMean),
                evaluations_per_run,
            });
        }
    }
    report.summaries = summaries;
}

fn test_cells(report: &mut ComparisonReport) {
    let reference = report.plan.reference();
    let nk = matches!(report.plan.grid, Grid::Nk { .. });
    let mut rows = Vec::new();
    for cell in &report.cells {
        if report.failures.iter().any(|f| f.cell == cell.index) {
            continue;
        }
        for &algorithm in report.plan.algorithms.iter().filter(|&&a| a != reference) {
            for metric in [Metric::FinalBest, Metric::FinalMean] {
                let values = |alg| -> Vec<f64> { report.runs_of(cell.index, alg).map(|r| metric.of(r)).collect() };
                let (xs, ys) = (values(algorithm), values(reference));
                let mut push = |pairing, n, result: Result<TestResult, stats::StatsError>| {
                    if let Ok(result) = result {
                        rows.push(SignificanceRow {
                            cell: cell.index,
                            metric,
                            algorithm,
                            reference,
                            pairing,
                            n,
                            result,
                        });
                    }
                };
                push(
                    Pairing::Pooled,
                    xs.len(),
                    stats::welch_t_test(&xs, &ys, Alternative::TwoSided),
                );
                if nk {
                    let means = |alg| -> Vec<f64> {
                        (0..report.plan.landscapes)
                            .map(|l| {
                                let v: Vec<f64> = report
                                    .runs_of(cell.index, alg)
                                    .filter(|r| r.landscape == l)
                                    .map(|r| metric.of(r))
                                    .collect();
                                stats::mean(&v)
                            })
                            .collect()
                    };
                    let (mx, my) = (means(algorithm), means(reference));
                    push(
                        Pairing::Landscape,
                        mx.len(),
                        stats::wilcoxon_signed_rank(&mx, &my, Alternative::TwoSided),
                    );
                } else {
                    push(
                        Pairing::Run,
                        xs.len(),
                        stats::wilcoxon_signed_rank(&xs, &ys, Alternative::TwoSided),
                    );
                }
            }
        }
    }
    report.significance = rows;
}

fn build_curves(report: &mut ComparisonReport) {
    let mut curves = Vec::new();
    for cell in &report.cells {
        for &algorithm in &report.plan.algorithms {
            let runs: Vec<&RunRecord> = report.runs_of(cell.index, algorithm).collect();
            let Some(first) = runs.first() else { continue };
            let series = |f: fn(&TracePoint) -> f64| -> Vec<Vec<f64>> {
                runs.iter().map(|r| r.trace.iter().map(f).collect()).collect()
            };
            let band = |curves: Vec<Vec<f64>>| match stats::confidence_band(&curves, BAND_LEVEL) {
                Ok(b) => b,
                Err(_) => {
                    // Fewer than two runs: the band collapses onto the mean.
                    let mean: Vec<f64> = (0..curves[0].len())
                        .map(|i| stats::mean(&curves.iter().map(|c| c[i]).collect::<Vec<_>>()))
                        .collect();
                    stats::Band {
                        lower: mean.clone(),
                        upper: mean.clone(),
                        mean,
                    }
                }
            };
            let best = band(series(|p| p.best));
            let mean = band(series(|p| p.mean));
            for (i, p) in first.trace.iter().enumerate() {
                curves.push(CurvePoint {
                    cell: cell.index,
                    algorithm,
                    generation: p.generation,
                    runs: runs.len(),
                    best: (best.mean[i], best.lower[i], best.upper[i]),
                    mean: (mean.mean[i], mean.lower[i], mean.upper[i]),
                });
            }
        }
    }
    report.curves = curves;
}

/// Runs an NK sweep. Landscapes are generated from the plan's seeds; every
/// `(cell, landscape, run)` triple runs all algorithms from a shared initial
/// population.
pub fn run_nk_sweep(plan: &ExperimentPlan) -> Result<ComparisonReport, HarnessError> {
    plan.validate()?;
    if !matches!(plan.grid, Grid::Nk { .. }) {
        return Err(HarnessError::Config("run_nk_sweep needs an NK grid".into()));
    }
    let cells = plan.cells();
    let landscapes: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..plan.landscapes).map(move |l| (c, l)))
        .collect();
    let outcomes: Vec<Result<Vec<RunRecord>, RunFailure>> = landscapes
        .par_iter()
        .flat_map(|&(c, l)| {
            let cell = &cells[c];
            let seed = plan.seeds(cell, l, 0).landscape;
            let landscape = match NkLandscape::generate(cell.n.unwrap(), cell.k.unwrap(), seed) {
                Ok(land) => land,
                Err(e) => {
                    return vec![Err(RunFailure {
                        cell: c,
                        landscape: Some(l),
                        run: None,
                        algorithm: None,
                        category: "config",
                        message: e.to_string(),
                    })]
                }
            };
            let objective = PreparedObjective::from_landscape(Arc::new(landscape));
            (0..plan.runs)
                .into_par_iter()
                .map(|run| {
                    let job = Job {
                        cell: c,
                        landscape: l,
                        run,
                    };
                    let seeds = plan.seeds(cell, l, run);
                    run_paired(plan, cell, &job, &objective, &seeds, Some(seed))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(assemble(plan, cells, outcomes))
}

/// Runs a budgeted comparison on the plan's objective. All algorithms of run `r`
/// start from the same evaluated initial population.
pub fn run_budgeted_compare(plan: &ExperimentPlan) -> Result<ComparisonReport, HarnessError> {
    plan.validate()?;
    let Grid::Budgeted { objective } = &plan.grid else {
        return Err(HarnessError::Config(
            "run_budgeted_compare needs a budgeted grid".into(),
        ));
    };
    let objective = objective.prepare()?;
    if objective.genome_spec().kind() != GenomeKind::Real {
        return Err(HarnessError::Config(
            "budgeted comparisons need a real-valued objective".into(),
        ));
    }
    let cells = plan.cells();
    let outcomes: Vec<_> = (0..plan.runs)
        .into_par_iter()
        .map(|run| {
            let job = Job {
                cell: 0,
                landscape: 0,
                run,
            };
            let seeds = plan.seeds(&cells[0], 0, run);
            run_paired(plan, &cells[0], &job, &objective, &seeds, None)
        })
        .collect();
    let mut report = assemble(plan, cells, outcomes);
    report.dimension_names = objective.dimension_names();
    Ok(report)
}

/// Runs whichever kind of experiment the plan describes.
pub fn run_plan(plan: &ExperimentPlan) -> Result<ComparisonReport, HarnessError> {
    match plan.grid {
        Grid::Nk { .. } => run_nk_sweep(plan),
        Grid::Budgeted { .. } => run_budgeted_compare(plan),
    }
}

/// Configuration of a single run, as read by `hdea run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub population_size: usize,
    pub tournament_size: usize,
    pub budget: u64,
    #[serde(default)]
    pub variation: Option<VariationConfig>,
    #[serde(default)]
    pub replacement: Option<Replacement>,
    pub run_seed: u64,
    pub objective: ObjectiveSpec,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a TOML run config; relative file paths inside it are taken relative to `path`.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        config.objective.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(config)
    }
}

pub struct SingleRun {
    pub trace: RunTrace,
    pub direction: Direction,
}

/// Executes one run. The run seed drives initialization, evolution and sampling.
pub fn run_single(config: &RunConfig) -> Result<SingleRun, HarnessError> {
    let objective = config.objective.prepare()?;
    let spec = objective.genome_spec();
    let (variation, replacement) = match spec.kind() {
        GenomeKind::Bits => (VariationConfig::nk(), Replacement::Worst),
        GenomeKind::Real => (VariationConfig::real_valued(), Replacement::Tournament),
    };
    let cfg = EaConfig {
        algorithm: config.algorithm,
        population_size: config.population_size,
        tournament_size: config.tournament_size,
        budget: config.budget,
        variation: config.variation.unwrap_or(variation),
        run_seed: config.run_seed,
        replacement: config.replacement.unwrap_or(replacement),
    };
    let mut eval = objective.instantiate(config.run_seed)?;
    let trace = evolve::run(&cfg, &spec, &mut eval).map_err(|e| match e {
        EvolveError::Objective { source, .. } => HarnessError::Objective(source),
        other => HarnessError::Config(other.to_string()),
    })?;
    debug_assert_eq!(eval.evaluations(), trace.evaluations);
    Ok(SingleRun {
        trace,
        direction: objective.direction(),
    })
}

// CSV output.

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl Table {
    fn create(path: PathBuf, header: &[&str]) -> Result<Self, HarnessError> {
        let writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| HarnessError::io(&path, e))?;
        let mut t = Table { path, writer };
        t.row(header.iter().map(|s| s.to_string()))?;
        Ok(t)
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<(), HarnessError> {
        self.writer
            .write_record(fields.into_iter().collect::<Vec<_>>())
            .map_err(|e| HarnessError::io(&self.path, e))
    }

    fn finish(mut self) -> Result<(), HarnessError> {
        self.writer.flush().map_err(|e| HarnessError::io(&self.path, e))
    }
}

/// Writes a trace as `generation,best,mean,offspring`.
pub fn write_trace_csv(path: &Path, points: &[TracePoint]) -> Result<(), HarnessError> {
    let mut t = Table::create(path.to_path_buf(), &["generation", "best", "mean", "offspring"])?;
    for p in points {
        t.row([
            p.generation.to_string(),
            num(p.best),
            num(p.mean),
            opt(p.offspring.map(num)),
        ])?;
    }
    t.finish()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Writes `trace.csv` and the `config.json` sidecar of a single run.
pub fn export_single(run: &SingleRun, config: &RunConfig, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_trace_csv(&dir.join("trace.csv"), &trace_points(&run.trace, run.direction, 1))?;
    write_json(&dir.join("config.json"), config)
}

/// Files written by [`export_report`], relative to the output directory.
pub const REPORT_FILES: [&str; 7] = [
    "summary.csv",
    "significance.csv",
    "runs.csv",
    "failures.csv",
    "curves.csv",
    "best_params.csv",
    "config.json",
];

/// Writes the report into `dir`: the tables in [`REPORT_FILES`] plus one trace
/// per run under `traces/`.
pub fn export_report(report: &ComparisonReport, dir: &Path) -> Result<(), HarnessError> {
    let traces = dir.join("traces");
    fs::create_dir_all(&traces).map_err(|e| HarnessError::io(&traces, e))?;
    let cells = &report.cells;
    let label = |c: usize| cells[c].label.clone();

    let mut t = Table::create(
        dir.join("summary.csv"),
        &[
            "cell",
            "n",
            "k",
            "algorithm",
            "status",
            "runs",
            "evaluations_per_run",
            "best_mean",
            "best_sd",
            "best_median",
            "best_min",
            "best_max",
            "mean_mean",
            "mean_sd",
            "mean_median",
            "mean_min",
            "mean_max",
        ],
    )?;
    for s in &report.summaries {
        let cell = &cells[s.cell];
        let stats = |x: Option<SampleSummary>| match x {
            Some(x) => vec![num(x.mean), num(x.sd), num(x.median), num(x.min), num(x.max)],
            None => vec![String::new(); 5],
        };
        let mut row = vec![
            cell.label.clone(),
            opt(cell.n),
            opt(cell.k),
            s.algorithm.to_string(),
            if s.complete { "complete" } else { "incomplete" }.to_string(),
            s.runs.to_string(),
            opt(s.evaluations_per_run),
        ];
        row.extend(stats(s.final_best));
        row.extend(stats(s.final_mean));
        t.row(row)?;
    }
    t.finish()?;

    let mut t = Table::create(
        dir.join("significance.csv"),
        &[
            "cell",
            "metric",
            "algorithm",
            "reference",
            "test",
            "pairing",
            "n",
            "statistic",
            "p_value",
            "effect",
        ],
    )?;
    for s in &report.significance {
        t.row([
            label(s.cell),
            s.metric.name().to_string(),
            s.algorithm.to_string(),
            s.reference.to_string(),
            s.result.method.name().to_string(),
            s.pairing.name().to_string(),
            s.n.to_string(),
            num(s.result.statistic),
            num(s.result.p_value),
            num(s.result.effect),
        ])?;
    }
    t.finish()?;

    let mut t = Table::create(
        dir.join("runs.csv"),
        &[
            "cell",
            "landscape",
            "run",
            "algorithm",
            "landscape_seed",
            "init_seed",
            "run_seed",
            "final_best",
            "final_mean",
            "evaluations",
            "samples",
            "best_monotone",
            "trace",
        ],
    )?;
    for r in &report.runs {
        let file = r.trace_file_name(cells);
        t.row([
            label(r.cell),
            r.landscape.to_string(),
            r.run.to_string(),
            r.algorithm.to_string(),
            opt(r.landscape_seed),
            r.init_seed.to_string(),
            r.run_seed.to_string(),
            num(r.final_best),
            num(r.final_mean),
            r.evaluations.to_string(),
            r.samples.to_string(),
            r.best_monotone.to_string(),
            format!("traces/{file}"),
        ])?;
        write_trace_csv(&traces.join(file), &r.trace)?;
    }
    t.finish()?;

    let mut t = Table::create(
        dir.join("failures.csv"),
        &["cell", "landscape", "run", "algorithm", "category", "message"],
    )?;
    for f in &report.failures {
        t.row([
            label(f.cell),
            opt(f.landscape),
            opt(f.run),
            opt(f.algorithm),
            f.category.to_string(),
            f.message.clone(),
        ])?;
    }
    t.finish()?;

    let mut t = Table::create(
        dir.join("curves.csv"),
        &[
            "cell",
            "algorithm",
            "generation",
            "runs",
            "best_mean",
            "best_lower",
            "best_upper",
            "mean_mean",
            "mean_lower",
            "mean_upper",
        ],
    )?;
    for c in &report.curves {
        t.row([
            label(c.cell),
            c.algorithm.to_string(),
            c.generation.to_string(),
            c.runs.to_string(),
            num(c.best.0),
            num(c.best.1),
            num(c.best.2),
            num(c.mean.0),
            num(c.mean.1),
            num(c.mean.2),
        ])?;
    }
    t.finish()?;

    let mut header: Vec<String> = ["cell", "landscape", "run", "algorithm", "raw"]
        .map(String::from)
        .to_vec();
    match &report.dimension_names {
        Some(names) => {
            header.extend(names.iter().cloned());
            header.extend(names.iter().map(|n| format!("{n}_norm")));
        }
        None => header.push("genome".into()),
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::create(dir.join("best_params.csv"), &header)?;
    for r in &report.runs {
        let mut row = vec![
            label(r.cell),
            r.landscape.to_string(),
            r.run.to_string(),
            r.algorithm.to_string(),
            num(r.best.raw),
        ];
        match &r.best.genome {
            Genome::Real(g) => {
                row.extend(g.values().iter().map(|&v| num(v)));
                row.extend(g.normalized().into_iter().map(num));
            }
            Genome::Bits(b) => row.push(b.to_string()),
        }
        t.row(row)?;
    }
    t.finish()?;

    write_json(&dir.join("config.json"), &report.plan)
}

//! Objective functions.
//!
//! An [`Objective`] produces one raw sample for a genome. [`SampledObjective`] wraps
//! it with static sampling (the mean of `samples` draws) and a direction, and
//! exposes internal fitness that the evolutionary loop always maximizes:
//! `fitness = raw` when maximizing and `fitness = -raw` when minimizing.
//!
//! Sample `s` of evaluation `e` in a run seeded with `run_seed` receives the seed
//! `derive_seed([run_seed, e, s])`. Evaluations are numbered from zero in the order
//! they are requested and are never cached.

pub mod external;
pub mod mock;
pub mod surrogate;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::{Genome, GenomeError, GenomeSpec, Interval};
use crate::nk::{NkError, NkLandscape};
use crate::rng::derive_seed;

pub use external::{ExternalCommand, ExternalRequest, ExternalResponse, ExternalSession};
pub use surrogate::{surrogate_evaluate, Surrogate, SurrogateParams};

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error(transparent)]
    Genome(#[from] GenomeError),
    #[error(transparent)]
    Nk(#[from] NkError),
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("failed to launch evaluator `{command}`: {message}")]
    Launch { command: String, message: String },
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("protocol error on evaluator output line {line}: {reason}: {text:?}")]
    Protocol { line: u64, text: String, reason: String },
    #[error("evaluation failed: {message}{}", excerpt(.stderr))]
    Evaluation { message: String, stderr: String },
    #[error("evaluator timed out after {seconds}s{}", excerpt(.stderr))]
    Timeout { seconds: u64, stderr: String },
    #[error("objective returned a non-finite value: {0}")]
    NonFinite(f64),
    #[error("invalid objective spec: {0}")]
    Spec(String),
}

fn excerpt(stderr: &str) -> String {
    if stderr.trim().is_empty() {
        String::new()
    } else {
        format!(" (stderr: {})", stderr.trim())
    }
}

impl ObjectiveError {
    /// Short category name used in CLI diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            ObjectiveError::Genome(_) | ObjectiveError::Nk(_) | ObjectiveError::Spec(_) => "config",
            ObjectiveError::Io { .. } | ObjectiveError::Launch { .. } => "io",
            ObjectiveError::Handshake(_) | ObjectiveError::Protocol { .. } | ObjectiveError::NonFinite(_) => "protocol",
            ObjectiveError::Evaluation { .. } | ObjectiveError::Timeout { .. } => "evaluation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    pub fn to_fitness(self, raw: f64) -> f64 {
        match self {
            Direction::Maximize => raw,
            Direction::Minimize => -raw,
        }
    }

    pub fn to_raw(self, fitness: f64) -> f64 {
        // Negation is its own inverse.
        self.to_fitness(fitness)
    }
}

/// Identifies one raw sample within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleRequest {
    pub evaluation: u64,
    pub sample_index: u32,
    pub seed: u64,
}

/// A source of raw objective samples.
pub trait Objective: Send {
    fn sample(&mut self, genome: &Genome, request: &SampleRequest) -> Result<f64, ObjectiveError>;
}

/// Result of one (possibly multi-sample) evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub raw: f64,
    pub samples: Vec<f64>,
}

/// Something the evolutionary loop can ask for fitness.
pub trait Evaluate {
    fn evaluate(&mut self, genome: &Genome) -> Result<Evaluation, ObjectiveError>;

    /// Raw samples consumed per evaluation.
    fn samples_per_evaluation(&self) -> u32 {
        1
    }
}

/// Static-sampling wrapper with evaluation counters.
pub struct SampledObjective {
    inner: Box<dyn Objective>,
    direction: Direction,
    samples: u32,
    run_seed: u64,
    evaluations: u64,
    samples_consumed: u64,
}

impl SampledObjective {
    pub fn new(inner: Box<dyn Objective>, direction: Direction, samples: u32, run_seed: u64) -> Self {
        assert!(samples >= 1, "at least one sample per evaluation");
        SampledObjective {
            inner,
            direction,
            samples,
            run_seed,
            evaluations: 0,
            samples_consumed: 0,
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Evaluations performed so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Raw samples drawn so far.
    pub fn samples_consumed(&self) -> u64 {
        self.samples_consumed
    }

    /// Continues evaluation numbering from `next` (used when a run resumes from a
    /// population evaluated elsewhere).
    pub fn skip_to(&mut self, next: u64) {
        self.evaluations = next;
    }

    pub fn into_inner(self) -> Box<dyn Objective> {
        self.inner
    }
}

impl Evaluate for SampledObjective {
    fn evaluate(&mut self, genome: &Genome) -> Result<Evaluation, ObjectiveError> {
        let evaluation = self.evaluations;
        let mut samples = Vec::with_capacity(self.samples as usize);
        for sample_index in 0..self.samples {
            let request = SampleRequest {
                evaluation,
                sample_index,
                seed: derive_seed(&[self.run_seed, evaluation, sample_index as u64]),
            };
            let v = self.inner.sample(genome, &request)?;
            self.samples_consumed += 1;
            if !v.is_finite() {
                return Err(ObjectiveError::NonFinite(v));
            }
            samples.push(v);
        }
        self.evaluations += 1;
        let raw = samples.iter().sum::<f64>() / samples.len() as f64;
        Ok(Evaluation {
            fitness: self.direction.to_fitness(raw),
            raw,
            samples,
        })
    }

    fn samples_per_evaluation(&self) -> u32 {
        self.samples
    }
}

/// Deterministic NK landscape objective.
#[derive(Debug, Clone)]
pub struct NkObjective {
    landscape: Arc<NkLandscape>,
}

impl NkObjective {
    pub fn new(landscape: Arc<NkLandscape>) -> Self {
        NkObjective { landscape }
    }
}

impl Objective for NkObjective {
    fn sample(&mut self, genome: &Genome, _: &SampleRequest) -> Result<f64, ObjectiveError> {
        let bits = genome.as_bits().ok_or(GenomeError::KindMismatch {
            expected: crate::genome::GenomeKind::Bits,
            found: genome.kind(),
        })?;
        Ok(self.landscape.evaluate(bits)?)
    }
}

/// Adapts a closure `(genome, request) -> value` into an [`Objective`].
pub struct FnObjective<F>(pub F);

impl<F> Objective for FnObjective<F>
where
    F: FnMut(&Genome, &SampleRequest) -> Result<f64, ObjectiveError> + Send,
{
    fn sample(&mut self, genome: &Genome, request: &SampleRequest) -> Result<f64, ObjectiveError> {
        (self.0)(genome, request)
    }
}

/// One named, bounded search dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

/// Named bounded real search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dimensions: Vec<Dimension>,
}

impl SearchSpace {
    /// The six worker-cell parameters of the nano-particle delivery scenario.
    pub fn worker_cell() -> Self {
        let dims = [
            ("attached_worker_migration_bias", 0.0, 1.0),
            ("unattached_worker_migration_bias", 0.0, 1.0),
            ("worker_relative_adhesion", 0.0, 10.0),
            ("worker_relative_repulsion", 0.0, 10.0),
            ("worker_motility_persistence_time_min", 0.0, 10.0),
            ("cargo_release_o2_threshold_mmhg", 0.0, 20.0),
        ];
        SearchSpace {
            dimensions: dims
                .iter()
                .map(|&(name, lo, hi)| Dimension {
                    name: name.to_string(),
                    lo,
                    hi,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.dimensions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dimensions.is_empty()
    }

    pub fn bounds(&self) -> Vec<Interval> {
        self.dimensions.iter().map(|d| Interval::new(d.lo, d.hi)).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.dimensions.iter().map(|d| d.name.as_str()).collect()
    }

    pub fn genome_spec(&self) -> GenomeSpec {
        GenomeSpec::Real { bounds: self.bounds() }
    }
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace::worker_cell()
    }
}

/// Where an NK objective gets its landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LandscapeSource {
    File { file: PathBuf },
    Generate { n: usize, k: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObjectiveSource {
    Nk {
        landscape: LandscapeSource,
    },
    Surrogate {
        #[serde(default)]
        params: SurrogateParams,
    },
    External {
        #[serde(flatten)]
        command: ExternalCommand,
        #[serde(default)]
        space: SearchSpace,
    },
}

/// Declarative objective description, as found in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub direction: Direction,
    #[serde(default = "one")]
    pub samples: u32,
    #[serde(flatten)]
    pub source: ObjectiveSource,
}

fn one() -> u32 {
    1
}

impl ObjectiveSpec {
    pub fn nk(landscape: LandscapeSource) -> Self {
        ObjectiveSpec {
            direction: Direction::Maximize,
            samples: 1,
            source: ObjectiveSource::Nk { landscape },
        }
    }

    /// Makes relative landscape paths relative to `base` instead of the working directory.
    pub fn resolve_paths(&mut self, base: &std::path::Path) {
        if let ObjectiveSource::Nk {
            landscape: LandscapeSource::File { file },
        } = &mut self.source
        {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
    }

    /// Loads files and checks invariants once, ready to build per-run evaluators.
    pub fn prepare(&self) -> Result<PreparedObjective, ObjectiveError> {
        if self.samples < 1 {
            return Err(ObjectiveError::Spec("samples must be at least 1".into()));
        }
        let kind = match &self.source {
            ObjectiveSource::Nk { landscape } => {
                let l = match landscape {
                    LandscapeSource::File { file } => {
                        let text = std::fs::read_to_string(file).map_err(|e| ObjectiveError::Io {
                            path: file.clone(),
                            message: e.to_string(),
                        })?;
                        NkLandscape::from_json(&text)?
                    }
                    LandscapeSource::Generate { n, k, seed } => NkLandscape::generate(*n, *k, *seed)?,
                };
                Prepared::Nk(Arc::new(l))
            }
            ObjectiveSource::Surrogate { params } => {
                params.validate()?;
                Prepared::Surrogate(params.clone())
            }
            ObjectiveSource::External { command, space } => {
                if space.is_empty() {
                    return Err(ObjectiveError::Spec("external search space is empty".into()));
                }
                space.genome_spec().validate()?;
                Prepared::External(command.clone(), space.clone())
            }
        };
        Ok(PreparedObjective {
            direction: self.direction,
            samples: self.samples,
            kind,
        })
    }
}

#[derive(Debug, Clone)]
enum Prepared {
    Nk(Arc<NkLandscape>),
    Surrogate(SurrogateParams),
    External(ExternalCommand, SearchSpace),
}

/// A validated objective spec that can mint one evaluator per run.
#[derive(Debug, Clone)]
pub struct PreparedObjective {
    direction: Direction,
    samples: u32,
    kind: Prepared,
}

impl PreparedObjective {
    pub fn from_landscape(landscape: Arc<NkLandscape>) -> Self {
        PreparedObjective {
            direction: Direction::Maximize,
            samples: 1,
            kind: Prepared::Nk(landscape),
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn samples(&self) -> u32 {
        self.samples
    }

    pub fn genome_spec(&self) -> GenomeSpec {
        match &self.kind {
            Prepared::Nk(l) => GenomeSpec::Bits { n: l.n() },
            Prepared::Surrogate(_) => SearchSpace::worker_cell().genome_spec(),
            Prepared::External(_, space) => space.genome_spec(),
        }
    }

    /// Names of the genome positions, when the objective has them.
    pub fn dimension_names(&self) -> Option<Vec<String>> {
        let space = match &self.kind {
            Prepared::Nk(_) => return None,
            Prepared::Surrogate(_) => SearchSpace::worker_cell(),
            Prepared::External(_, space) => space.clone(),
        };
        Some(space.names().into_iter().map(String::from).collect())
    }

    /// Builds a fresh evaluator. External objectives launch their own session here.
    pub fn instantiate(&self, run_seed: u64) -> Result<SampledObjective, ObjectiveError> {
        let inner: Box<dyn Objective> = match &self.kind {
            Prepared::Nk(l) => Box::new(NkObjective::new(Arc::clone(l))),
            Prepared::Surrogate(p) => Box::new(Surrogate::new(p.clone())),
            Prepared::External(cmd, space) => Box::new(ExternalSession::launch(cmd, space.len())?),
        };
        Ok(SampledObjective::new(inner, self.direction, self.samples, run_seed))
    }
}

//! Steady-state evolutionary loops.
//!
//! Three algorithms share one population model: `P` evaluated haploids and one
//! offspring per generation that unconditionally replaces a victim. The victim is
//! either the current worst individual or the loser of a replacement tournament
//! over `T` distinct individuals (ties broken uniformly at random in both cases).
//! Internal fitness is always maximized.
//!
//! * `baseline`: two parents by independent size-`T` tournaments, crossover with
//!   probability `X` yielding two children of which one is kept at random, then
//!   mutation.
//! * `hdea`: every haploid is copied and paired with a partner drawn uniformly from
//!   the other `P - 1`, giving `P` diploids scored by the mean of their haploids'
//!   fitness. Two distinct diploids are picked by size-`T` tournaments, each goes
//!   through two-step meiosis, one of its four gametes is drawn uniformly, and one
//!   of the two gametes is kept at random, mutated, and evaluated.
//! * `control-2p`: the same copy-and-partner scheme builds a haploid pool of size
//!   `2P` (no averaging); parents come from tournaments over that pool and variation
//!   is as in the baseline.
//!
//! Each generation costs exactly one objective evaluation for every algorithm;
//! pairing and pooling reuse known fitness values.
//!
//! Random draws happen in this order within a generation: pool construction (one
//! partner draw per individual, in index order), tournaments (`T` candidate draws
//! each, then tie-breaks), crossover gate and cut or swap mask, gamete picks, child
//! pick, mutation, and finally the victim choice.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::{self, random_genome, Diploid, Genome, GenomeError, GenomeSpec, VariationConfig};
use crate::objective::{Evaluate, Evaluation, ObjectiveError};
use crate::rng::{stream, RunRng, EVOLVE_STREAM, INIT_STREAM};

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Genome(#[from] GenomeError),
    #[error("objective failed at generation {generation}: {source}")]
    Objective {
        generation: u64,
        #[source]
        source: ObjectiveError,
    },
}

/// An evaluated haploid.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Genome,
    /// Internal (maximized) fitness.
    pub fitness: f64,
    /// Mean raw objective value behind `fitness`.
    pub raw: f64,
    /// Objective samples consumed to evaluate this individual.
    pub eval_count: u32,
}

impl Individual {
    /// An individual with a known fitness and no evaluation cost attached.
    pub fn new(genome: Genome, fitness: f64) -> Self {
        Individual {
            genome,
            fitness,
            raw: fitness,
            eval_count: 0,
        }
    }

    pub fn evaluated(genome: Genome, e: &Evaluation) -> Self {
        Individual {
            genome,
            fitness: e.fitness,
            raw: e.raw,
            eval_count: e.samples.len() as u32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "hdea")]
    Hdea,
    #[serde(rename = "control-2p")]
    Control2p,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Baseline, Algorithm::Hdea, Algorithm::Control2p];

    /// Stable numeric id used in seed derivation.
    pub fn id(self) -> u64 {
        match self {
            Algorithm::Baseline => 0,
            Algorithm::Hdea => 1,
            Algorithm::Control2p => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Baseline => "baseline",
            Algorithm::Hdea => "hdea",
            Algorithm::Control2p => "control-2p",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?} (expected baseline, hdea or control-2p)"))
    }
}

/// How the offspring's victim is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Replacement {
    /// The current worst individual.
    #[default]
    Worst,
    /// The worst of `tournament_size` distinct individuals drawn uniformly. The best
    /// individual can only lose such a tournament to an equally fit one, so
    /// best-in-population still never decreases.
    Tournament,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EaConfig {
    pub algorithm: Algorithm,
    pub population_size: usize,
    pub tournament_size: usize,
    /// Generations, i.e. offspring created after the initial population.
    pub budget: u64,
    pub variation: VariationConfig,
    pub run_seed: u64,
    #[serde(default)]
    pub replacement: Replacement,
}

impl EaConfig {
    /// NK replication settings: P=30, binary tournaments, 20,000 generations.
    pub fn nk(algorithm: Algorithm, run_seed: u64) -> Self {
        EaConfig {
            algorithm,
            population_size: 30,
            tournament_size: 2,
            budget: 20_000,
            variation: VariationConfig::nk(),
            run_seed,
            replacement: Replacement::Worst,
        }
    }

    /// Real-valued settings: P=50, T=3 for both selection and replacement, 100
    /// evaluations, uniform crossover at 80%.
    pub fn real_valued(algorithm: Algorithm, run_seed: u64) -> Self {
        EaConfig {
            algorithm,
            population_size: 50,
            tournament_size: 3,
            budget: 100,
            variation: VariationConfig::real_valued(),
            run_seed,
            replacement: Replacement::Tournament,
        }
    }

    pub fn validate(&self) -> Result<(), EvolveError> {
        if self.population_size < 2 {
            return Err(EvolveError::Config(format!(
                "population_size must be at least 2, got {}",
                self.population_size
            )));
        }
        if self.tournament_size < 2 {
            return Err(EvolveError::Config(format!(
                "tournament_size must be at least 2, got {}",
                self.tournament_size
            )));
        }
        self.variation.validate()?;
        Ok(())
    }
}

/// Population statistics after one generation. Generation 0 describes the
/// initial population and has no offspring.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: u64,
    pub best: f64,
    pub mean: f64,
    pub offspring: Option<Evaluation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    /// `budget + 1` records, the first for the initial population.
    pub records: Vec<GenerationRecord>,
    pub final_population: Vec<Individual>,
    /// Objective evaluations, initial population included.
    pub evaluations: u64,
    /// Raw objective samples behind those evaluations.
    pub samples: u64,
}

impl RunTrace {
    pub fn final_best(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.best)
    }

    pub fn final_mean(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.mean)
    }

    pub fn best_individual(&self) -> &Individual {
        self.final_population
            .iter()
            .reduce(|a, b| if b.fitness > a.fitness { b } else { a })
            .expect("population is never empty")
    }

    /// True when best-in-population never decreased.
    pub fn best_is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].best >= w[0].best)
    }
}

fn population_stats(pop: &[Individual]) -> (f64, f64) {
    let best = pop.iter().map(|i| i.fitness).fold(f64::NEG_INFINITY, f64::max);
    let mean = pop.iter().map(|i| i.fitness).sum::<f64>() / pop.len() as f64;
    (best, mean)
}

/// Best of `size` uniform draws (with replacement) from `0..len`; fitness ties
/// resolve uniformly among the tied draws.
pub fn tournament<R, F>(len: usize, size: usize, fitness: F, rng: &mut R) -> usize
where
    R: Rng + ?Sized,
    F: Fn(usize) -> f64,
{
    let mut winner = rng.random_range(0..len);
    let mut best = fitness(winner);
    let mut ties = 1u32;
    for _ in 1..size {
        let c = rng.random_range(0..len);
        let f = fitness(c);
        if f > best {
            winner = c;
            best = f;
            ties = 1;
        } else if f == best {
            ties += 1;
            if rng.random_range(0..ties) == 0 {
                winner = c;
            }
        }
    }
    winner
}

/// Index of a minimum-fitness individual, ties broken uniformly.
pub fn worst_index<R: Rng + ?Sized>(pop: &[Individual], rng: &mut R) -> usize {
    let min = pop.iter().map(|i| i.fitness).fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].fitness == min).collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.random_range(0..tied.len())]
    }
}

/// Index of the worst of `size` distinct uniformly drawn individuals (all of them
/// when `size >= len`), ties broken uniformly.
pub fn replacement_tournament<R: Rng + ?Sized>(pop: &[Individual], size: usize, rng: &mut R) -> usize {
    let entrants = rand::seq::index::sample(rng, pop.len(), size.min(pop.len()));
    let mut loser = 0;
    let mut worst = f64::INFINITY;
    let mut ties = 0u32;
    for c in entrants.iter() {
        let f = pop[c].fitness;
        if f < worst || ties == 0 {
            loser = c;
            worst = f;
            ties = 1;
        } else if f == worst {
            ties += 1;
            if rng.random_range(0..ties) == 0 {
                loser = c;
            }
        }
    }
    loser
}

/// A uniformly chosen index of `0..len` other than `me`.
fn partner<R: Rng + ?Sized>(me: usize, len: usize, rng: &mut R) -> usize {
    let j = rng.random_range(0..len - 1);
    if j >= me {
        j + 1
    } else {
        j
    }
}

/// Pairs every individual with a uniformly chosen other individual.
pub fn build_diploid_pool<'a, R: Rng + ?Sized>(
    pop: &'a [Individual],
    rng: &mut R,
) -> Result<Vec<Diploid<'a>>, EvolveError> {
    if pop.len() < 2 {
        return Err(EvolveError::Config(
            "diploid pairing needs at least 2 individuals".into(),
        ));
    }
    (0..pop.len())
        .map(|j| {
            let k = partner(j, pop.len(), rng);
            Ok(Diploid::new((j, &pop[j]), (k, &pop[k]))?)
        })
        .collect()
}

/// Indices of a `2P` haploid pool: every individual followed by a uniformly chosen
/// other individual.
pub fn build_haploid_pool<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Vec<usize>, EvolveError> {
    if len < 2 {
        return Err(EvolveError::Config("haploid pool needs at least 2 individuals".into()));
    }
    Ok((0..len).flat_map(|j| [j, partner(j, len, rng)]).collect())
}

fn pick_child<R: Rng + ?Sized>((a, b): (Genome, Genome), rng: &mut R) -> Genome {
    if rng.random::<bool>() {
        a
    } else {
        b
    }
}

/// Mutates, evaluates, and inserts the offspring over the chosen victim.
fn finish_step<E, R>(
    pop: &mut [Individual],
    child: Genome,
    generation: u64,
    cfg: &EaConfig,
    eval: &mut E,
    rng: &mut R,
) -> Result<GenerationRecord, EvolveError>
where
    E: Evaluate + ?Sized,
    R: Rng + ?Sized,
{
    let child = genome::mutate(&child, &cfg.variation, rng)?;
    let e = eval
        .evaluate(&child)
        .map_err(|source| EvolveError::Objective { generation, source })?;
    let slot = match cfg.replacement {
        Replacement::Worst => worst_index(pop, rng),
        Replacement::Tournament => replacement_tournament(pop, cfg.tournament_size, rng),
    };
    pop[slot] = Individual::evaluated(child, &e);
    let (best, mean) = population_stats(pop);
    Ok(GenerationRecord {
        generation,
        best,
        mean,
        offspring: Some(e),
    })
}

/// One generation of the baseline steady-state EA.
pub fn ea_step<E, R>(
    pop: &mut [Individual],
    generation: u64,
    cfg: &EaConfig,
    eval: &mut E,
    rng: &mut R,
) -> Result<GenerationRecord, EvolveError>
where
    E: Evaluate + ?Sized,
    R: Rng + ?Sized,
{
    let t = cfg.tournament_size;
    let a = tournament(pop.len(), t, |i| pop[i].fitness, rng);
    let b = tournament(pop.len(), t, |i| pop[i].fitness, rng);
    let children = genome::crossover(&pop[a].genome, &pop[b].genome, &cfg.variation, rng)?;
    let child = pick_child(children, rng);
    finish_step(pop, child, generation, cfg, eval, rng)
}

/// One generation of the haploid-diploid EA.
pub fn hdea_step<E, R>(
    pop: &mut [Individual],
    generation: u64,
    cfg: &EaConfig,
    eval: &mut E,
    rng: &mut R,
) -> Result<GenerationRecord, EvolveError>
where
    E: Evaluate + ?Sized,
    R: Rng + ?Sized,
{
    let child = {
        let pool = build_diploid_pool(pop, rng)?;
        let t = cfg.tournament_size;
        let first = tournament(pool.len(), t, |i| pool[i].combined_fitness, rng);
        let second = loop {
            let c = tournament(pool.len(), t, |i| pool[i].combined_fitness, rng);
            if c != first {
                break c;
            }
        };
        let mut gamete = |d: &Diploid<'_>| -> Result<Genome, GenomeError> {
            let gametes = genome::meiosis(d, &cfg.variation, rng)?;
            let pick = rng.random_range(0..gametes.len());
            Ok(gametes.into_iter().nth(pick).expect("four gametes"))
        };
        let from_first = gamete(&pool[first])?;
        let from_second = gamete(&pool[second])?;
        pick_child((from_first, from_second), rng)
    };
    finish_step(pop, child, generation, cfg, eval, rng)
}

/// One generation of the 2P haploid control.
pub fn control_2p_step<E, R>(
    pop: &mut [Individual],
    generation: u64,
    cfg: &EaConfig,
    eval: &mut E,
    rng: &mut R,
) -> Result<GenerationRecord, EvolveError>
where
    E: Evaluate + ?Sized,
    R: Rng + ?Sized,
{
    let pool = build_haploid_pool(pop.len(), rng)?;
    let t = cfg.tournament_size;
    let a = pool[tournament(pool.len(), t, |i| pop[pool[i]].fitness, rng)];
    let b = pool[tournament(pool.len(), t, |i| pop[pool[i]].fitness, rng)];
    let children = genome::crossover(&pop[a].genome, &pop[b].genome, &cfg.variation, rng)?;
    let child = pick_child(children, rng);
    finish_step(pop, child, generation, cfg, eval, rng)
}

/// Runs the step function of `cfg.algorithm`.
pub fn step<E, R>(
    pop: &mut [Individual],
    generation: u64,
    cfg: &EaConfig,
    eval: &mut E,
    rng: &mut R,
) -> Result<GenerationRecord, EvolveError>
where
    E: Evaluate + ?Sized,
    R: Rng + ?Sized,
{
    match cfg.algorithm {
        Algorithm::Baseline => ea_step(pop, generation, cfg, eval, rng),
        Algorithm::Hdea => hdea_step(pop, generation, cfg, eval, rng),
        Algorithm::Control2p => control_2p_step(pop, generation, cfg, eval, rng),
    }
}

/// Draws `size` genomes from the init stream of `seed` and evaluates them in order.
pub fn initial_population<E: Evaluate + ?Sized>(
    spec: &GenomeSpec,
    size: usize,
    seed: u64,
    eval: &mut E,
) -> Result<Vec<Individual>, EvolveError> {
    let mut rng = stream(seed, INIT_STREAM);
    let genomes = (0..size)
        .map(|_| random_genome(spec, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    genomes
        .into_iter()
        .map(|g| {
            let e = eval
                .evaluate(&g)
                .map_err(|source| EvolveError::Objective { generation: 0, source })?;
            Ok(Individual::evaluated(g, &e))
        })
        .collect()
}

/// Random initial population from `cfg.run_seed`, then `cfg.budget` generations.
pub fn run<E: Evaluate + ?Sized>(cfg: &EaConfig, spec: &GenomeSpec, eval: &mut E) -> Result<RunTrace, EvolveError> {
    cfg.validate()?;
    cfg.variation.check_kind(spec.kind())?;
    let initial = initial_population(spec, cfg.population_size, cfg.run_seed, eval)?;
    run_from(cfg, initial, eval)
}

/// Evolves a given evaluated population for `cfg.budget` generations.
pub fn run_from<E: Evaluate + ?Sized>(
    cfg: &EaConfig,
    initial: Vec<Individual>,
    eval: &mut E,
) -> Result<RunTrace, EvolveError> {
    cfg.validate()?;
    if initial.len() != cfg.population_size {
        return Err(EvolveError::Config(format!(
            "initial population has {} individuals, config says {}",
            initial.len(),
            cfg.population_size
        )));
    }
    for ind in &initial[1..] {
        initial[0].genome.check_compatible(&ind.genome)?;
    }
    cfg.variation.check_kind(initial[0].genome.kind())?;

    let mut pop = initial;
    let mut evaluations = pop.iter().filter(|i| i.eval_count > 0).count() as u64;
    let mut samples: u64 = pop.iter().map(|i| i.eval_count as u64).sum();
    let (best, mean) = population_stats(&pop);
    let mut records = Vec::with_capacity(cfg.budget as usize + 1);
    records.push(GenerationRecord {
        generation: 0,
        best,
        mean,
        offspring: None,
    });

    let mut rng: RunRng = stream(cfg.run_seed, EVOLVE_STREAM);
    for generation in 1..=cfg.budget {
        let record = step(&mut pop, generation, cfg, eval, &mut rng)?;
        evaluations += 1;
        samples += record.offspring.as_ref().map_or(0, |e| e.samples.len() as u64);
        records.push(record);
    }
    Ok(RunTrace {
        records,
        final_population: pop,
        evaluations,
        samples,
    })
}

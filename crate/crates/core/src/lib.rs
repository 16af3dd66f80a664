//! Haploid-diploid steady-state evolutionary algorithm.
//!
//! The crate provides a baseline steady-state EA and a haploid-diploid variant in
//! which selection acts on temporary diploids scored by the mean fitness of their
//! two haploids, offspring come from two-step meiosis, and every generation still
//! costs a single objective evaluation. Around the algorithms sit NK fitness
//! landscapes with tunable ruggedness, a static-sampling objective layer with a
//! subprocess evaluator protocol, the significance tests used to compare runs, and
//! an experiment harness that writes CSV reports.
//!
//! ```
//! use hdea::evolve::{run, Algorithm, EaConfig};
//! use hdea::objective::PreparedObjective;
//! use hdea::nk::NkLandscape;
//! use std::sync::Arc;
//!
//! let landscape = Arc::new(NkLandscape::generate(20, 4, 1).unwrap());
//! let objective = PreparedObjective::from_landscape(landscape);
//! let mut eval = objective.instantiate(7).unwrap();
//! let cfg = EaConfig { budget: 500, ..EaConfig::nk(Algorithm::Hdea, 7) };
//! let trace = run(&cfg, &objective.genome_spec(), &mut eval).unwrap();
//! assert!(trace.best_is_monotone());
//! assert_eq!(trace.evaluations, 30 + 500);
//! ```

pub mod evolve;
pub mod genome;
pub mod harness;
pub mod nk;
pub mod objective;
pub mod rng;
pub mod stats;

pub use evolve::{Algorithm, EaConfig, Individual, Replacement, RunTrace};
pub use genome::{BitGenome, Genome, GenomeSpec, RealGenome, VariationConfig};
pub use nk::NkLandscape;

//! NK fitness landscapes.
//!
//! Each of the `n` genes has `k` randomly chosen epistatic neighbors (distinct,
//! never the gene itself) and a table of `2^(k+1)` contributions drawn uniformly
//! from `[0, 1)`. Fitness is the mean contribution over all genes.
//!
//! Table indexing: the bit of gene `i` is the most significant bit, followed by the
//! bits of `neighbors[i]` in stored order. For `k = 2` and neighbors `[4, 1]`,
//! gene 0 reads entry `g[0] << 2 | g[4] << 1 | g[1]`.
//!
//! Landscapes serialize to JSON with the fields `n`, `k`, `seed`, `neighbors` and
//! `tables`; reals are written in shortest round-trip form, so a file reloads to a
//! bit-identical landscape.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::BitGenome;
use crate::rng::{stream, LANDSCAPE_STREAM};

/// Largest `n` accepted by the exhaustive routines.
pub const MAX_ENUMERATION_N: usize = 24;

#[derive(Debug, Error)]
pub enum NkError {
    #[error("invalid NK parameters: {0}")]
    Params(String),
    #[error("genome length {found} does not match landscape n={expected}")]
    Length { expected: usize, found: usize },
    #[error("n={n} exceeds the enumeration limit of {MAX_ENUMERATION_N}")]
    TooLarge { n: usize },
    #[error("landscape parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid landscape: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NkLandscape {
    n: usize,
    k: usize,
    seed: u64,
    neighbors: Vec<Vec<usize>>,
    tables: Vec<Vec<f64>>,
}

impl NkLandscape {
    /// Builds the landscape for `(n, k, seed)`. Neighbors of every gene are drawn
    /// first, then all tables, both from the landscape stream of `seed`.
    pub fn generate(n: usize, k: usize, seed: u64) -> Result<Self, NkError> {
        if n == 0 {
            return Err(NkError::Params("n must be at least 1".into()));
        }
        if k >= n {
            return Err(NkError::Params(format!("k={k} must be below n={n}")));
        }
        if k >= usize::BITS as usize - 1 {
            return Err(NkError::Params(format!("k={k} is too large for a lookup table")));
        }
        let mut rng = stream(seed, LANDSCAPE_STREAM);
        let neighbors = (0..n)
            .map(|i| {
                index::sample(&mut rng, n - 1, k)
                    .into_iter()
                    .map(|j| if j >= i { j + 1 } else { j })
                    .collect()
            })
            .collect();
        let width = 1usize << (k + 1);
        let tables = (0..n)
            .map(|_| (0..width).map(|_| rng.random::<f64>()).collect())
            .collect();
        Ok(NkLandscape {
            n,
            k,
            seed,
            neighbors,
            tables,
        })
    }

    /// Assembles a landscape from explicit parts, checking every invariant.
    pub fn from_parts(
        n: usize,
        k: usize,
        seed: u64,
        neighbors: Vec<Vec<usize>>,
        tables: Vec<Vec<f64>>,
    ) -> Result<Self, NkError> {
        let l = NkLandscape {
            n,
            k,
            seed,
            neighbors,
            tables,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn neighbors(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.tables
    }

    fn validate(&self) -> Result<(), NkError> {
        if self.n == 0 || self.k >= self.n {
            return Err(NkError::Invalid(format!(
                "need 0 <= k < n, got n={} k={}",
                self.n, self.k
            )));
        }
        if self.neighbors.len() != self.n {
            return Err(NkError::Invalid(format!(
                "neighbors: expected {} lists, found {}",
                self.n,
                self.neighbors.len()
            )));
        }
        if self.tables.len() != self.n {
            return Err(NkError::Invalid(format!(
                "tables: expected {} tables, found {}",
                self.n,
                self.tables.len()
            )));
        }
        let width = 1usize << (self.k + 1);
        for (i, nb) in self.neighbors.iter().enumerate() {
            if nb.len() != self.k {
                return Err(NkError::Invalid(format!(
                    "neighbors[{i}]: expected {} entries, found {}",
                    self.k,
                    nb.len()
                )));
            }
            for (pos, &j) in nb.iter().enumerate() {
                if j >= self.n || j == i || nb[..pos].contains(&j) {
                    return Err(NkError::Invalid(format!("neighbors[{i}]: bad entry {j}")));
                }
            }
        }
        for (i, t) in self.tables.iter().enumerate() {
            if t.len() != width {
                return Err(NkError::Invalid(format!(
                    "tables[{i}]: expected {width} entries, found {}",
                    t.len()
                )));
            }
            if let Some(v) = t.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(NkError::Invalid(format!("tables[{i}]: entry {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Table row read by gene `i` for the given alleles.
    #[inline]
    fn table_index(&self, i: usize, bits: &[bool]) -> usize {
        self.neighbors[i]
            .iter()
            .fold(bits[i] as usize, |acc, &j| (acc << 1) | bits[j] as usize)
    }

    fn fitness_of(&self, bits: &[bool]) -> f64 {
        let sum: f64 = (0..self.n).map(|i| self.tables[i][self.table_index(i, bits)]).sum();
        sum / self.n as f64
    }

    pub fn evaluate(&self, g: &BitGenome) -> Result<f64, NkError> {
        if g.len() != self.n {
            return Err(NkError::Length {
                expected: self.n,
                found: g.len(),
            });
        }
        Ok(self.fitness_of(g.bits()))
    }

    fn check_enumerable(&self) -> Result<(), NkError> {
        if self.n > MAX_ENUMERATION_N {
            Err(NkError::TooLarge { n: self.n })
        } else {
            Ok(())
        }
    }

    /// Fitness of every genome, indexed by the integer whose binary expansion (most
    /// significant bit first) spells the genome.
    fn all_fitnesses(&self) -> Vec<f64> {
        let mut bits = vec![false; self.n];
        (0u64..1 << self.n)
            .map(|x| {
                for (i, b) in bits.iter_mut().enumerate() {
                    *b = (x >> (self.n - 1 - i)) & 1 == 1;
                }
                self.fitness_of(&bits)
            })
            .collect()
    }

    fn genome_from_index(&self, x: u64) -> BitGenome {
        BitGenome::new((0..self.n).map(|i| (x >> (self.n - 1 - i)) & 1 == 1).collect())
    }

    /// Exhaustive search. Ties resolve to the lexicographically smallest genome.
    pub fn brute_force_optimum(&self) -> Result<(BitGenome, f64), NkError> {
        self.check_enumerable()?;
        let (best, fit) =
            self.all_fitnesses()
                .into_iter()
                .enumerate()
                .fold(
                    (0usize, f64::NEG_INFINITY),
                    |acc, (x, f)| if f > acc.1 { (x, f) } else { acc },
                );
        Ok((self.genome_from_index(best as u64), fit))
    }

    /// Number of genomes with no strictly fitter one-bit neighbor.
    pub fn count_local_optima(&self) -> Result<usize, NkError> {
        self.check_enumerable()?;
        let fit = self.all_fitnesses();
        Ok((0..fit.len())
            .filter(|&x| (0..self.n).all(|b| fit[x ^ (1 << b)] <= fit[x]))
            .count())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("landscape serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NkError> {
        let l: NkLandscape = serde_json::from_str(text).map_err(|e| NkError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        l.validate()?;
        Ok(l)
    }
}

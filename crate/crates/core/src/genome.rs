//! Genome representations and variation operators.
//!
//! Two representations are supported: fixed-length bit strings (NK landscapes) and
//! bounded real vectors (simulator parameters). Operators never change the length
//! or representation of a genome, and every stochastic operator is a pure function
//! of its inputs and the RNG state.
//!
//! Meiosis follows the two-step scheme: both genomes of a diploid are replicated,
//! one copy of each is recombined, and the four products (two parental, two
//! recombinant) are returned as gametes.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolve::Individual;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenomeError {
    #[error("genome length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("genome representation mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: GenomeKind, found: GenomeKind },
    #[error("crossover cut {cut} outside 0..={len}")]
    CutOutOfRange { cut: usize, len: usize },
    #[error("operator requires a non-empty genome")]
    Empty,
    #[error("invalid genome spec: {0}")]
    InvalidSpec(String),
    #[error("invalid variation config: {0}")]
    InvalidConfig(String),
    #[error("value {value} at position {index} outside [{lo}, {hi}]")]
    OutOfBounds { index: usize, value: f64, lo: f64, hi: f64 },
    #[error("cannot parse bit string: unexpected {0:?}")]
    BadBit(char),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenomeKind {
    Bits,
    Real,
}

impl fmt::Display for GenomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GenomeKind::Bits => "bits",
            GenomeKind::Real => "real",
        })
    }
}

/// Fixed-length binary genome.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitGenome {
    bits: Vec<bool>,
}

impl BitGenome {
    pub fn new(bits: Vec<bool>) -> Self {
        BitGenome { bits }
    }

    pub fn zeros(n: usize) -> Self {
        BitGenome { bits: vec![false; n] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    /// Number of positions at which the two genomes differ.
    pub fn hamming(&self, other: &BitGenome) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count() + self.len().abs_diff(other.len())
    }
}

impl fmt::Display for BitGenome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitGenome {
    type Err = GenomeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(GenomeError::BadBit(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitGenome::new)
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }
}

/// Real vector with a closed interval per position. Values always lie inside their
/// bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGenome {
    values: Vec<f64>,
    bounds: Arc<[Interval]>,
}

impl RealGenome {
    pub fn new(values: Vec<f64>, bounds: Arc<[Interval]>) -> Result<Self, GenomeError> {
        if values.len() != bounds.len() {
            return Err(GenomeError::LengthMismatch {
                left: values.len(),
                right: bounds.len(),
            });
        }
        for (index, (&value, b)) in values.iter().zip(bounds.iter()).enumerate() {
            if !b.contains(value) {
                return Err(GenomeError::OutOfBounds {
                    index,
                    value,
                    lo: b.lo,
                    hi: b.hi,
                });
            }
        }
        Ok(RealGenome { values, bounds })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> &Arc<[Interval]> {
        &self.bounds
    }

    /// Values rescaled to `[0, 1]` per position (degenerate intervals map to 0).
    pub fn normalized(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(self.bounds.iter())
            .map(|(&v, b)| if b.width() > 0.0 { (v - b.lo) / b.width() } else { 0.0 })
            .collect()
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        RealGenome {
            values,
            bounds: Arc::clone(&self.bounds),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Genome {
    Bits(BitGenome),
    Real(RealGenome),
}

impl Genome {
    pub fn kind(&self) -> GenomeKind {
        match self {
            Genome::Bits(_) => GenomeKind::Bits,
            Genome::Real(_) => GenomeKind::Real,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Genome::Bits(g) => g.len(),
            Genome::Real(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_bits(&self) -> Option<&BitGenome> {
        match self {
            Genome::Bits(g) => Some(g),
            Genome::Real(_) => None,
        }
    }

    pub fn as_real(&self) -> Option<&RealGenome> {
        match self {
            Genome::Real(g) => Some(g),
            Genome::Bits(_) => None,
        }
    }

    /// Fails unless `self` and `other` share representation and length.
    pub fn check_compatible(&self, other: &Genome) -> Result<(), GenomeError> {
        if self.kind() != other.kind() {
            return Err(GenomeError::KindMismatch {
                expected: self.kind(),
                found: other.kind(),
            });
        }
        if self.len() != other.len() {
            return Err(GenomeError::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Genome::Bits(g) => g.fmt(f),
            Genome::Real(g) => {
                let parts: Vec<String> = g.values.iter().map(|v| v.to_string()).collect();
                write!(f, "[{}]", parts.join(", "))
            }
        }
    }
}

impl From<BitGenome> for Genome {
    fn from(g: BitGenome) -> Self {
        Genome::Bits(g)
    }
}

impl From<RealGenome> for Genome {
    fn from(g: RealGenome) -> Self {
        Genome::Real(g)
    }
}

/// Describes how to draw a random genome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GenomeSpec {
    Bits { n: usize },
    Real { bounds: Vec<Interval> },
}

impl GenomeSpec {
    pub fn len(&self) -> usize {
        match self {
            GenomeSpec::Bits { n } => *n,
            GenomeSpec::Real { bounds } => bounds.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> GenomeKind {
        match self {
            GenomeSpec::Bits { .. } => GenomeKind::Bits,
            GenomeSpec::Real { .. } => GenomeKind::Real,
        }
    }

    pub fn validate(&self) -> Result<(), GenomeError> {
        if self.is_empty() {
            return Err(GenomeError::InvalidSpec("genome length must be positive".into()));
        }
        if let GenomeSpec::Real { bounds } = self {
            if let Some(i) = bounds.iter().position(|b| !b.is_valid()) {
                return Err(GenomeError::InvalidSpec(format!(
                    "bounds at position {i} are not a finite interval: [{}, {}]",
                    bounds[i].lo, bounds[i].hi
                )));
            }
        }
        Ok(())
    }
}

/// Draws a genome uniformly: bits from `{0, 1}`, reals from `[lo_i, hi_i]`.
pub fn random_genome<R: Rng + ?Sized>(spec: &GenomeSpec, rng: &mut R) -> Result<Genome, GenomeError> {
    spec.validate()?;
    Ok(match spec {
        GenomeSpec::Bits { n } => Genome::Bits(BitGenome::new((0..*n).map(|_| rng.random()).collect())),
        GenomeSpec::Real { bounds } => {
            let values = bounds
                .iter()
                .map(|b| b.clamp(b.lo + rng.random::<f64>() * b.width()))
                .collect();
            Genome::Real(RealGenome {
                values,
                bounds: bounds.clone().into(),
            })
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossoverKind {
    OnePoint,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationKind {
    SingleBitFlip,
    PerAlleleReal,
}

/// Variation operators and their rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationConfig {
    pub crossover: CrossoverKind,
    /// Probability that crossover is applied at all.
    pub crossover_rate: f64,
    pub mutation: MutationKind,
    /// Per-allele mutation probability (real genomes only).
    #[serde(default)]
    pub per_allele_rate: f64,
    /// Maximum step as a fraction of each dimension's range (real genomes only).
    #[serde(default = "default_step_fraction")]
    pub step_fraction: f64,
}

fn default_step_fraction() -> f64 {
    0.05
}

impl VariationConfig {
    /// One-point crossover always applied, one bit flipped per offspring.
    pub fn nk() -> Self {
        VariationConfig {
            crossover: CrossoverKind::OnePoint,
            crossover_rate: 1.0,
            mutation: MutationKind::SingleBitFlip,
            per_allele_rate: 0.0,
            step_fraction: default_step_fraction(),
        }
    }

    /// Uniform crossover at 80%, 20% per-allele mutation with steps up to ±5% of range.
    pub fn real_valued() -> Self {
        VariationConfig {
            crossover: CrossoverKind::Uniform,
            crossover_rate: 0.8,
            mutation: MutationKind::PerAlleleReal,
            per_allele_rate: 0.2,
            step_fraction: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), GenomeError> {
        let unit = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(GenomeError::InvalidConfig(format!("{name} must be in [0, 1], got {p}")))
            }
        };
        unit("crossover_rate", self.crossover_rate)?;
        unit("per_allele_rate", self.per_allele_rate)?;
        if !(self.step_fraction > 0.0 && self.step_fraction.is_finite()) {
            return Err(GenomeError::InvalidConfig(format!(
                "step_fraction must be positive, got {}",
                self.step_fraction
            )));
        }
        Ok(())
    }

    /// Fails when the mutation operator cannot act on genomes of `kind`.
    pub fn check_kind(&self, kind: GenomeKind) -> Result<(), GenomeError> {
        let expected = match self.mutation {
            MutationKind::SingleBitFlip => GenomeKind::Bits,
            MutationKind::PerAlleleReal => GenomeKind::Real,
        };
        if expected == kind {
            Ok(())
        } else {
            Err(GenomeError::KindMismatch { expected, found: kind })
        }
    }
}

fn splice<T: Clone>(a: &[T], b: &[T], cut: usize) -> (Vec<T>, Vec<T>) {
    let c1 = a[..cut].iter().chain(&b[cut..]).cloned().collect();
    let c2 = b[..cut].iter().chain(&a[cut..]).cloned().collect();
    (c1, c2)
}

/// `child1 = a[..cut] ++ b[cut..]`, `child2 = b[..cut] ++ a[cut..]`.
pub fn one_point_crossover(a: &Genome, b: &Genome, cut: usize) -> Result<(Genome, Genome), GenomeError> {
    a.check_compatible(b)?;
    if cut > a.len() {
        return Err(GenomeError::CutOutOfRange { cut, len: a.len() });
    }
    Ok(match (a, b) {
        (Genome::Bits(x), Genome::Bits(y)) => {
            let (c1, c2) = splice(&x.bits, &y.bits, cut);
            (BitGenome::new(c1).into(), BitGenome::new(c2).into())
        }
        (Genome::Real(x), Genome::Real(y)) => {
            let (c1, c2) = splice(&x.values, &y.values, cut);
            (x.with_values(c1).into(), x.with_values(c2).into())
        }
        _ => unreachable!("kinds checked above"),
    })
}

fn swap_positions<T: Clone, R: Rng + ?Sized>(a: &[T], b: &[T], rng: &mut R) -> (Vec<T>, Vec<T>) {
    let mut c1 = a.to_vec();
    let mut c2 = b.to_vec();
    for i in 0..a.len() {
        if rng.random::<bool>() {
            std::mem::swap(&mut c1[i], &mut c2[i]);
        }
    }
    (c1, c2)
}

/// Swaps the alleles at each position independently with probability 1/2.
pub fn uniform_crossover<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    rng: &mut R,
) -> Result<(Genome, Genome), GenomeError> {
    a.check_compatible(b)?;
    Ok(match (a, b) {
        (Genome::Bits(x), Genome::Bits(y)) => {
            let (c1, c2) = swap_positions(&x.bits, &y.bits, rng);
            (BitGenome::new(c1).into(), BitGenome::new(c2).into())
        }
        (Genome::Real(x), Genome::Real(y)) => {
            let (c1, c2) = swap_positions(&x.values, &y.values, rng);
            (x.with_values(c1).into(), x.with_values(c2).into())
        }
        _ => unreachable!("kinds checked above"),
    })
}

/// Applies the configured crossover with probability `crossover_rate`; otherwise
/// returns copies of the parents. The one-point cut is uniform over `1..L`, so it
/// always splits the genome when `L >= 2`.
pub fn crossover<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    cfg: &VariationConfig,
    rng: &mut R,
) -> Result<(Genome, Genome), GenomeError> {
    a.check_compatible(b)?;
    if rng.random::<f64>() >= cfg.crossover_rate {
        return Ok((a.clone(), b.clone()));
    }
    match cfg.crossover {
        CrossoverKind::OnePoint => {
            let len = a.len();
            let cut = if len >= 2 { rng.random_range(1..len) } else { len };
            one_point_crossover(a, b, cut)
        }
        CrossoverKind::Uniform => uniform_crossover(a, b, rng),
    }
}

/// Flips exactly one uniformly chosen bit.
pub fn mutate_single_bit<R: Rng + ?Sized>(g: &BitGenome, rng: &mut R) -> Result<BitGenome, GenomeError> {
    if g.is_empty() {
        return Err(GenomeError::Empty);
    }
    let mut out = g.clone();
    out.flip(rng.random_range(0..g.len()));
    Ok(out)
}

/// With probability `per_allele_rate` each allele moves by `u * (hi - lo)` with
/// `u ~ U[-step_fraction, step_fraction)`, then is clamped into its bounds.
pub fn mutate_per_allele<R: Rng + ?Sized>(g: &RealGenome, cfg: &VariationConfig, rng: &mut R) -> RealGenome {
    let s = cfg.step_fraction;
    let values = g
        .values
        .iter()
        .zip(g.bounds.iter())
        .map(|(&v, b)| {
            if rng.random::<f64>() < cfg.per_allele_rate {
                let step = (rng.random::<f64>() * 2.0 - 1.0) * s * b.width();
                b.clamp(v + step)
            } else {
                v
            }
        })
        .collect();
    g.with_values(values)
}

/// Dispatches to the mutation operator named in `cfg`.
pub fn mutate<R: Rng + ?Sized>(g: &Genome, cfg: &VariationConfig, rng: &mut R) -> Result<Genome, GenomeError> {
    cfg.check_kind(g.kind())?;
    Ok(match g {
        Genome::Bits(b) => mutate_single_bit(b, rng)?.into(),
        Genome::Real(r) => mutate_per_allele(r, cfg, rng).into(),
    })
}

/// Two evaluated haploids paired into one diploid. The diploid's fitness is the
/// arithmetic mean of its haploids' fitnesses.
#[derive(Debug, Clone, Copy)]
pub struct Diploid<'a> {
    pub first: &'a Individual,
    pub second: &'a Individual,
    pub first_index: usize,
    pub second_index: usize,
    pub combined_fitness: f64,
}

impl<'a> Diploid<'a> {
    pub fn new(
        (first_index, first): (usize, &'a Individual),
        (second_index, second): (usize, &'a Individual),
    ) -> Result<Self, GenomeError> {
        first.genome.check_compatible(&second.genome)?;
        Ok(Diploid {
            first,
            second,
            first_index,
            second_index,
            combined_fitness: (first.fitness + second.fitness) / 2.0,
        })
    }
}

/// Two-step meiosis. Returns `[X, Y, R1, R2]`: the two parental genomes verbatim
/// followed by the products of recombining copies of them. When the crossover draw
/// fails the recombinants are plain copies of `X` and `Y`.
pub fn meiosis<R: Rng + ?Sized>(
    d: &Diploid<'_>,
    cfg: &VariationConfig,
    rng: &mut R,
) -> Result<[Genome; 4], GenomeError> {
    let x = &d.first.genome;
    let y = &d.second.genome;
    let (r1, r2) = crossover(x, y, cfg, rng)?;
    Ok([x.clone(), y.clone(), r1, r2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn bits(s: &str) -> Genome {
        Genome::Bits(s.parse().unwrap())
    }

    fn ind(genome: Genome, fitness: f64) -> Individual {
        Individual::new(genome, fitness)
    }

    fn unit_bounds(n: usize) -> Arc<[Interval]> {
        vec![Interval::new(0.0, 1.0); n].into()
    }

    #[test]
    fn one_point_examples() {
        let (c1, c2) = one_point_crossover(&bits("000"), &bits("111"), 1).unwrap();
        assert_eq!((c1, c2), (bits("011"), bits("100")));

        let x = bits("0110");
        for cut in 0..=4 {
            assert_eq!(one_point_crossover(&x, &x, cut).unwrap(), (x.clone(), x.clone()));
        }

        let (a, b) = (bits("0011"), bits("1010"));
        assert_eq!(one_point_crossover(&a, &b, 0).unwrap(), (b.clone(), a.clone()));
        assert_eq!(one_point_crossover(&a, &b, 4).unwrap(), (a.clone(), b.clone()));
    }

    #[test]
    fn one_point_errors() {
        assert!(matches!(
            one_point_crossover(&bits("00"), &bits("111"), 1),
            Err(GenomeError::LengthMismatch { .. })
        ));
        assert!(matches!(
            one_point_crossover(&bits("00"), &bits("11"), 3),
            Err(GenomeError::CutOutOfRange { cut: 3, len: 2 })
        ));
        let real = Genome::Real(RealGenome::new(vec![0.5, 0.5], unit_bounds(2)).unwrap());
        assert!(matches!(
            one_point_crossover(&bits("00"), &real, 1),
            Err(GenomeError::KindMismatch { .. })
        ));
    }

    #[test]
    fn uniform_crossover_conserves_alleles() {
        let mut rng = stream(3, 0);
        let x = bits("0101");
        assert_eq!(uniform_crossover(&x, &x, &mut rng).unwrap(), (x.clone(), x));

        for _ in 0..100 {
            let (c1, c2) = uniform_crossover(&bits("00"), &bits("11"), &mut rng).unwrap();
            let (c1, c2) = (c1.as_bits().unwrap().clone(), c2.as_bits().unwrap().clone());
            for i in 0..2 {
                assert_ne!(c1.get(i), c2.get(i));
            }
        }
        assert!(uniform_crossover(&bits("0"), &bits("01"), &mut rng).is_err());
    }

    #[test]
    fn uniform_swap_frequency_is_one_half() {
        // Binomial(10_000, 0.5) has sd 0.005; ±0.02 is four sd.
        let mut rng = stream(11, 0);
        let trials = 10_000;
        let mut swaps = [0usize; 5];
        let (a, b) = (bits("00000"), bits("11111"));
        for _ in 0..trials {
            let (c1, _) = uniform_crossover(&a, &b, &mut rng).unwrap();
            for (i, s) in swaps.iter_mut().enumerate() {
                *s += c1.as_bits().unwrap().get(i) as usize;
            }
        }
        for s in swaps {
            let f = s as f64 / trials as f64;
            assert!((f - 0.5).abs() <= 0.02, "swap frequency {f}");
        }
    }

    #[test]
    fn single_bit_mutation() {
        let mut rng = stream(5, 0);
        let g: BitGenome = "0".parse().unwrap();
        assert_eq!(mutate_single_bit(&g, &mut rng).unwrap().to_string(), "1");
        assert_eq!(
            mutate_single_bit(&BitGenome::zeros(0), &mut rng),
            Err(GenomeError::Empty)
        );

        let zero = BitGenome::zeros(4);
        let mut counts = [0usize; 4];
        let trials = 10_000;
        for _ in 0..trials {
            let m = mutate_single_bit(&zero, &mut rng).unwrap();
            assert_eq!(m.hamming(&zero), 1);
            counts[m.bits().iter().position(|&b| b).unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / trials as f64;
            assert!((f - 0.25).abs() <= 0.02, "position frequency {f}");
        }
    }

    #[test]
    fn per_allele_mutation() {
        let mut rng = stream(9, 0);
        let g = RealGenome::new(vec![0.5; 6], unit_bounds(6)).unwrap();

        let mut off = VariationConfig::real_valued();
        off.per_allele_rate = 0.0;
        assert_eq!(mutate_per_allele(&g, &off, &mut rng), g);

        let mut always = VariationConfig::real_valued();
        always.per_allele_rate = 1.0;
        let top = RealGenome::new(vec![1.0; 6], unit_bounds(6)).unwrap();
        for _ in 0..200 {
            let m = mutate_per_allele(&top, &always, &mut rng);
            for &v in m.values() {
                assert!((0.95..=1.0).contains(&v));
            }
        }

        let cfg = VariationConfig::real_valued();
        let trials = 10_000;
        let changed: usize = (0..trials)
            .map(|_| {
                let m = mutate_per_allele(&g, &cfg, &mut rng);
                m.values().iter().filter(|&&v| v != 0.5).count()
            })
            .sum();
        let mean = changed as f64 / trials as f64;
        assert!((mean - 1.2).abs() <= 0.1, "mean perturbed alleles {mean}");
    }

    #[test]
    fn mutate_rejects_kind_mismatch() {
        let mut rng = stream(1, 0);
        let err = mutate(&bits("01"), &VariationConfig::real_valued(), &mut rng).unwrap_err();
        assert!(matches!(err, GenomeError::KindMismatch { .. }));
    }

    #[test]
    fn random_genome_specs() {
        let mut rng = stream(2, 0);
        let g = random_genome(&GenomeSpec::Bits { n: 50 }, &mut rng).unwrap();
        assert_eq!(g.len(), 50);

        let spec = GenomeSpec::Real {
            bounds: vec![Interval::new(3.0, 3.0); 4],
        };
        let g = random_genome(&spec, &mut rng).unwrap();
        assert_eq!(g.as_real().unwrap().values(), &[3.0; 4]);

        let spec = GenomeSpec::Real {
            bounds: vec![Interval::new(0.0, 1.0)],
        };
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|_| random_genome(&spec, &mut rng).unwrap().as_real().unwrap().values()[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() <= 0.02, "mean {mean}");

        assert!(random_genome(&GenomeSpec::Bits { n: 0 }, &mut rng).is_err());
        let bad = GenomeSpec::Real {
            bounds: vec![Interval::new(0.0, f64::INFINITY)],
        };
        assert!(random_genome(&bad, &mut rng).is_err());
    }

    #[test]
    fn meiosis_examples() {
        let mut rng = stream(4, 0);
        let cfg = VariationConfig::nk();

        let x = ind(bits("1011"), 0.3);
        let homo = Diploid::new((0, &x), (1, &x)).unwrap();
        for g in meiosis(&homo, &cfg, &mut rng).unwrap() {
            assert_eq!(g, x.genome);
        }

        // A 3-bit one-point cut is drawn from {1, 2}; cut=1 gives the listed gametes.
        let a = ind(bits("000"), 0.4);
        let b = ind(bits("111"), 0.6);
        let d = Diploid::new((0, &a), (1, &b)).unwrap();
        assert_eq!(d.combined_fitness, 0.5);
        let mut seen_cut_one = false;
        for _ in 0..50 {
            let gametes = meiosis(&d, &cfg, &mut rng).unwrap();
            assert_eq!(gametes[0], a.genome);
            assert_eq!(gametes[1], b.genome);
            if gametes[2] == bits("011") {
                assert_eq!(gametes[3], bits("100"));
                seen_cut_one = true;
            } else {
                assert_eq!((&gametes[2], &gametes[3]), (&bits("001"), &bits("110")));
            }
        }
        assert!(seen_cut_one);
    }

    #[test]
    fn meiosis_without_crossover_copies_parents() {
        let mut rng = stream(6, 0);
        let mut cfg = VariationConfig::nk();
        cfg.crossover_rate = 0.0;
        let a = ind(bits("0000"), 0.0);
        let b = ind(bits("1111"), 1.0);
        let d = Diploid::new((0, &a), (1, &b)).unwrap();
        let [x, y, r1, r2] = meiosis(&d, &cfg, &mut rng).unwrap();
        assert_eq!((&x, &y), (&r1, &r2));
    }

    #[test]
    fn diploid_rejects_mixed_lengths() {
        let a = ind(bits("00"), 0.0);
        let b = ind(bits("000"), 0.0);
        assert!(Diploid::new((0, &a), (1, &b)).is_err());
    }

    #[test]
    fn variation_config_validation() {
        assert!(VariationConfig::nk().validate().is_ok());
        assert!(VariationConfig::real_valued().validate().is_ok());
        let mut bad = VariationConfig::nk();
        bad.crossover_rate = 1.5;
        assert!(bad.validate().is_err());
        let mut bad = VariationConfig::real_valued();
        bad.step_fraction = 0.0;
        assert!(bad.validate().is_err());
    }
}

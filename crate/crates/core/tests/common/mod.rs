//! Independent oracles and case generators shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use hdea::genome::{
    self, BitGenome, CrossoverKind, Diploid, Genome, Interval, MutationKind, RealGenome, VariationConfig,
};
use hdea::stats::Alternative;
use hdea::Individual;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Wilcoxon signed-rank by brute force over all 2^n sign assignments.

/// Doubled average ranks by counting: rank(x) = #{y < x} + (#{y == x} + 1) / 2.
fn doubled_ranks_by_counting(values: &[f64]) -> Vec<u64> {
    values
        .iter()
        .map(|&v| {
            let less = values.iter().filter(|&&y| y < v).count() as u64;
            let equal = values.iter().filter(|&&y| y == v).count() as u64;
            2 * less + equal + 1
        })
        .collect()
}

/// Exact signed-rank p value by enumerating every sign pattern of the non-zero
/// differences. Two-sided counts patterns at least as far from the centre.
pub fn wilcoxon_enumeration_p(xs: &[f64], ys: &[f64], alternative: Alternative) -> f64 {
    let d: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x - y).filter(|&d| d != 0.0).collect();
    if d.is_empty() {
        return 1.0;
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let r2 = doubled_ranks_by_counting(&abs);
    let total2: u64 = r2.iter().sum();
    let observed: u64 = d.iter().zip(&r2).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let n = d.len();
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let w: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r2[i]).sum();
        let hit = match alternative {
            Alternative::TwoSided => (2 * w).abs_diff(total2) >= (2 * observed).abs_diff(total2),
            Alternative::Greater => w >= observed,
            Alternative::Less => w <= observed,
        };
        hits += hit as u64;
    }
    hits as f64 / (1u64 << n) as f64
}

// Welch t statistic and a Monte Carlo permutation p value.

pub fn welch_t(xs: &[f64], ys: &[f64]) -> f64 {
    let m = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let v = |s: &[f64]| {
        let mu = m(s);
        s.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (s.len() - 1) as f64
    };
    (m(xs) - m(ys)) / (v(xs) / xs.len() as f64 + v(ys) / ys.len() as f64).sqrt()
}

/// Fraction of random relabelings whose |t| reaches the observed |t|.
pub fn welch_permutation_p(xs: &[f64], ys: &[f64], permutations: u64, seed: u64) -> f64 {
    let observed = welch_t(xs, ys).abs();
    let mut pooled: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let mut r = rng(seed);
    let mut hits = 0u64;
    for _ in 0..permutations {
        pooled.shuffle(&mut r);
        let (a, b) = pooled.split_at(xs.len());
        // Relative slack so the identity labeling always counts.
        if welch_t(a, b).abs() >= observed * (1.0 - 1e-12) {
            hits += 1;
        }
    }
    hits as f64 / permutations as f64
}

// Operator property cases.

pub fn random_bits<R: Rng>(r: &mut R, len: usize) -> BitGenome {
    BitGenome::new((0..len).map(|_| r.random()).collect())
}

pub fn random_bounds<R: Rng>(r: &mut R, len: usize) -> Arc<[Interval]> {
    (0..len)
        .map(|_| {
            let lo = r.random_range(-50.0..50.0);
            Interval::new(lo, lo + r.random_range(0.001..100.0))
        })
        .collect()
}

pub fn random_real<R: Rng>(r: &mut R, bounds: &Arc<[Interval]>) -> RealGenome {
    let values = bounds.iter().map(|b| r.random_range(b.lo..=b.hi)).collect();
    RealGenome::new(values, Arc::clone(bounds)).unwrap()
}

fn random_variation<R: Rng>(r: &mut R, real: bool) -> VariationConfig {
    VariationConfig {
        crossover: if r.random() {
            CrossoverKind::OnePoint
        } else {
            CrossoverKind::Uniform
        },
        crossover_rate: r.random_range(0.0..=1.0),
        mutation: if real {
            MutationKind::PerAlleleReal
        } else {
            MutationKind::SingleBitFlip
        },
        per_allele_rate: r.random_range(0.0..=1.0),
        step_fraction: r.random_range(0.0..=0.5),
    }
}

/// Both parents come back unchanged as gametes 0 and 1, and the recombinant pair
/// holds exactly the parental alleles at every position.
pub fn check_meiosis(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let len = r.random_range(1..=64);
    let real = r.random_bool(0.5);
    let (a, b): (Genome, Genome) = if real {
        let bounds = random_bounds(&mut r, len);
        (random_real(&mut r, &bounds).into(), random_real(&mut r, &bounds).into())
    } else {
        (random_bits(&mut r, len).into(), random_bits(&mut r, len).into())
    };
    let cfg = random_variation(&mut r, real);
    let (ia, ib) = (Individual::new(a.clone(), 0.0), Individual::new(b.clone(), 1.0));
    let d = Diploid::new((0, &ia), (1, &ib)).map_err(|e| e.to_string())?;
    let [x, y, r1, r2] = genome::meiosis(&d, &cfg, &mut r).map_err(|e| e.to_string())?;
    if x != a || y != b {
        return Err(format!("seed {seed}: parental gametes altered"));
    }
    conserved(&a, &b, &r1, &r2).map_err(|e| format!("seed {seed}: meiosis {e}"))
}

/// Crossover children hold the parental alleles position by position.
pub fn check_crossover(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let len = r.random_range(1..=64);
    let real = r.random_bool(0.5);
    let (a, b): (Genome, Genome) = if real {
        let bounds = random_bounds(&mut r, len);
        (random_real(&mut r, &bounds).into(), random_real(&mut r, &bounds).into())
    } else {
        (random_bits(&mut r, len).into(), random_bits(&mut r, len).into())
    };
    let cfg = random_variation(&mut r, real);
    let (c1, c2) = genome::crossover(&a, &b, &cfg, &mut r).map_err(|e| e.to_string())?;
    conserved(&a, &b, &c1, &c2).map_err(|e| format!("seed {seed}: crossover {e}"))
}

fn conserved(a: &Genome, b: &Genome, c: &Genome, d: &Genome) -> Result<(), String> {
    if c.len() != a.len() || d.len() != a.len() {
        return Err("changed the length".into());
    }
    match (a, b, c, d) {
        (Genome::Bits(a), Genome::Bits(b), Genome::Bits(c), Genome::Bits(d)) => {
            for i in 0..a.len() {
                let mut p = [a.get(i), b.get(i)];
                let mut q = [c.get(i), d.get(i)];
                p.sort();
                q.sort();
                if p != q {
                    return Err(format!("lost an allele at position {i}"));
                }
            }
        }
        (Genome::Real(a), Genome::Real(b), Genome::Real(c), Genome::Real(d)) => {
            for i in 0..a.len() {
                let mut p = [a.values()[i], b.values()[i]];
                let mut q = [c.values()[i], d.values()[i]];
                p.sort_by(f64::total_cmp);
                q.sort_by(f64::total_cmp);
                if p != q {
                    return Err(format!("lost an allele at position {i}"));
                }
            }
        }
        _ => return Err("changed the genome kind".into()),
    }
    Ok(())
}

/// Bit mutation moves exactly one Hamming step.
pub fn check_bit_mutation(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let len = r.random_range(1..=128);
    let g = random_bits(&mut r, len);
    let m = genome::mutate(&g.clone().into(), &VariationConfig::nk(), &mut r).map_err(|e| e.to_string())?;
    let d = g.hamming(m.as_bits().unwrap());
    if d != 1 {
        return Err(format!("seed {seed}: mutation moved {d} bits"));
    }
    Ok(())
}

/// Real mutation stays inside the bounds and moves each allele by at most the step.
pub fn check_real_mutation(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let len = r.random_range(1..=32);
    let bounds = random_bounds(&mut r, len);
    let mut g = random_real(&mut r, &bounds);
    // Push some alleles onto the bounds so clamping is exercised.
    if r.random_bool(0.5) {
        let values: Vec<f64> = g
            .values()
            .iter()
            .zip(bounds.iter())
            .map(|(&v, b)| match r.random_range(0..3) {
                0 => b.lo,
                1 => b.hi,
                _ => v,
            })
            .collect();
        g = RealGenome::new(values, Arc::clone(&bounds)).unwrap();
    }
    let cfg = random_variation(&mut r, true);
    let m = genome::mutate(&g.clone().into(), &cfg, &mut r).map_err(|e| e.to_string())?;
    let m = m.as_real().unwrap();
    for (i, ((&before, &after), b)) in g.values().iter().zip(m.values()).zip(bounds.iter()).enumerate() {
        if !(b.lo <= after && after <= b.hi) {
            return Err(format!(
                "seed {seed}: allele {i} = {after} outside [{}, {}]",
                b.lo, b.hi
            ));
        }
        if (after - before).abs() > cfg.step_fraction * (b.hi - b.lo) * (1.0 + 1e-12) {
            return Err(format!("seed {seed}: allele {i} moved further than the step"));
        }
    }
    Ok(())
}

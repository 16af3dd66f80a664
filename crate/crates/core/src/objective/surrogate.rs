//! Noisy desk-scale stand-in for the worker-cell simulator.
//!
//! Over the six worker-cell dimensions, with `z_i = (x_i - opt_i) / (hi_i - lo_i)`:
//!
//! ```text
//! base(x)   = offset + scale * sum_i w_i * (z_i^2 + ripple * (1 - cos(2 * pi * frequency * z_i)))
//! sample(x) = base(x) + noise_sd * N(0, 1)
//! ```
//!
//! Both terms of the sum are non-negative and vanish at `z = 0`, so `base` attains
//! its minimum `offset` exactly at `opt`. The value reads like a remaining cancer
//! cell count and is meant to be minimized. The normal deviate comes from the
//! sample stream of the per-sample seed.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Objective, ObjectiveError, SampleRequest, SearchSpace};
use crate::genome::{Genome, GenomeError, GenomeKind};
use crate::rng::{stream, SAMPLE_STREAM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateParams {
    pub noise_sd: f64,
    pub offset: f64,
    pub scale: f64,
    pub ripple: f64,
    pub frequency: f64,
    pub optimum: [f64; 6],
    pub weights: [f64; 6],
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            noise_sd: 30.0,
            offset: 400.0,
            scale: 600.0,
            ripple: 0.05,
            frequency: 3.0,
            optimum: [0.5, 0.5, 5.0, 2.0, 8.0, 11.0],
            weights: [0.1, 0.1, 0.1, 0.5, 0.5, 2.0],
        }
    }
}

impl SurrogateParams {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(ObjectiveError::Spec(format!(
                "noise_sd must be >= 0, got {}",
                self.noise_sd
            )));
        }
        let space = SearchSpace::worker_cell();
        for (i, (&o, b)) in self.optimum.iter().zip(space.bounds()).enumerate() {
            if !b.contains(o) {
                return Err(ObjectiveError::Spec(format!(
                    "optimum[{i}]={o} outside [{}, {}]",
                    b.lo, b.hi
                )));
            }
        }
        let non_negative = |x: f64| x >= 0.0;
        if !self.weights.iter().all(|&w| non_negative(w)) || !non_negative(self.scale) || !non_negative(self.ripple) {
            return Err(ObjectiveError::Spec(
                "weights, scale and ripple must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Noise-free value at `x`.
    pub fn base(&self, x: &[f64]) -> f64 {
        let space = SearchSpace::worker_cell();
        let tau = std::f64::consts::TAU;
        let sum: f64 = x
            .iter()
            .zip(space.bounds())
            .zip(self.optimum.iter().zip(&self.weights))
            .map(|((&xi, b), (&opt, &w))| {
                let z = (xi - opt) / b.width();
                w * (z * z + self.ripple * (1.0 - (tau * self.frequency * z).cos()))
            })
            .sum();
        self.offset + self.scale * sum
    }
}

/// One noisy surrogate sample: `base(genome) + noise_sd * N(0, 1)` with the
/// deviate drawn from `rng`.
pub fn surrogate_evaluate<R: Rng + ?Sized>(
    params: &SurrogateParams,
    genome: &Genome,
    rng: &mut R,
) -> Result<f64, ObjectiveError> {
    let real = genome.as_real().ok_or(GenomeError::KindMismatch {
        expected: GenomeKind::Real,
        found: genome.kind(),
    })?;
    let space = SearchSpace::worker_cell();
    if real.len() != space.len() {
        return Err(GenomeError::LengthMismatch {
            left: real.len(),
            right: space.len(),
        }
        .into());
    }
    for (index, (&value, b)) in real.values().iter().zip(space.bounds()).enumerate() {
        if !b.contains(value) {
            return Err(GenomeError::OutOfBounds {
                index,
                value,
                lo: b.lo,
                hi: b.hi,
            }
            .into());
        }
    }
    let noise: f64 = rng.sample(StandardNormal);
    Ok(params.base(real.values()) + params.noise_sd * noise)
}

#[derive(Debug, Clone)]
pub struct Surrogate {
    params: SurrogateParams,
}

impl Surrogate {
    pub fn new(params: SurrogateParams) -> Self {
        Surrogate { params }
    }

    pub fn params(&self) -> &SurrogateParams {
        &self.params
    }
}

impl Objective for Surrogate {
    fn sample(&mut self, genome: &Genome, request: &SampleRequest) -> Result<f64, ObjectiveError> {
        surrogate_evaluate(&self.params, genome, &mut stream(request.seed, SAMPLE_STREAM))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::RealGenome;
    use crate::objective::{Direction, Evaluate, SampledObjective};
    use crate::rng::derive_seed;

    fn genome(values: [f64; 6]) -> Genome {
        let bounds = SearchSpace::worker_cell().bounds();
        Genome::Real(RealGenome::new(values.to_vec(), bounds.into()).unwrap())
    }

    #[test]
    fn noiseless_calls_repeat() {
        let p = SurrogateParams {
            noise_sd: 0.0,
            ..Default::default()
        };
        let g = genome([0.1, 0.9, 3.0, 7.0, 1.0, 15.0]);
        let a = surrogate_evaluate(&p, &g, &mut stream(1, 0)).unwrap();
        let b = surrogate_evaluate(&p, &g, &mut stream(2, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn optimum_is_minimal() {
        let p = SurrogateParams::default();
        assert_eq!(p.base(&p.optimum), p.offset);
        let mut rng = stream(5, 0);
        let space = SearchSpace::worker_cell();
        for _ in 0..2_000 {
            let x: Vec<f64> = space
                .bounds()
                .iter()
                .map(|b| b.lo + rng.random::<f64>() * b.width())
                .collect();
            assert!(p.base(&x) >= p.base(&p.optimum));
        }
    }

    #[test]
    fn noise_sd_matches_configuration() {
        let p = SurrogateParams {
            noise_sd: 12.0,
            ..Default::default()
        };
        let g = genome([0.5, 0.5, 5.0, 5.0, 5.0, 10.0]);
        let base = p.base(g.as_real().unwrap().values());
        let mut rng = stream(8, 0);
        let xs: Vec<f64> = (0..1_000)
            .map(|_| surrogate_evaluate(&p, &g, &mut rng).unwrap() - base)
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
        assert!((sd / 12.0 - 1.0).abs() <= 0.1, "sample sd {sd}");
    }

    #[test]
    fn static_sampling_mean_recomputes_from_seeds() {
        let p = SurrogateParams::default();
        let g = genome([0.2, 0.4, 6.0, 2.5, 9.0, 12.0]);
        let mut obj = SampledObjective::new(Box::new(Surrogate::new(p.clone())), Direction::Minimize, 5, 31);
        obj.evaluate(&g).unwrap();
        let e = obj.evaluate(&g).unwrap();

        let expected: Vec<f64> = (0..5u64)
            .map(|s| {
                let mut rng = stream(derive_seed(&[31, 1, s]), SAMPLE_STREAM);
                p.base(g.as_real().unwrap().values()) + p.noise_sd * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        assert_eq!(e.samples, expected);
        assert_eq!(e.raw, expected.iter().sum::<f64>() / 5.0);
        assert_eq!(e.fitness, -e.raw);
    }

    #[test]
    fn out_of_bounds_and_wrong_kind() {
        let p = SurrogateParams::default();
        let wide = vec![crate::genome::Interval::new(-5.0, 50.0); 6];
        let g = Genome::Real(RealGenome::new(vec![30.0; 6], wide.into()).unwrap());
        assert!(surrogate_evaluate(&p, &g, &mut stream(0, 0)).is_err());
        let bits = Genome::Bits(crate::genome::BitGenome::zeros(6));
        assert!(surrogate_evaluate(&p, &bits, &mut stream(0, 0)).is_err());
    }
}

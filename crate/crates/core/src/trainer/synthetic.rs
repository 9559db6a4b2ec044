//! Desk-scale ordinal surrogate data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Example, TrainError};
use crate::loss::FlareClass;

/// Each split gets `counts[c]` instances of class `c` (in `FlareClass::ALL`
/// order), with features `means[c] * u + noise`, where `u` is the fixed unit
/// diagonal direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub counts: [usize; 6],
    pub means: [f64; 6],
    pub noise: f64,
    pub dim: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            counts: [240, 80, 80, 80, 30, 10],
            means: [0.0, 0.5, 1.0, 1.5, 3.0, 4.0],
            noise: 0.6,
            dim: 8,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.means.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TrainError::Config(
                "class means must increase strictly from FQ to X".into(),
            ));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(TrainError::Config(format!(
                "noise must be >= 0, got {}",
                self.noise
            )));
        }
        if self.dim == 0 {
            return Err(TrainError::Config("dim must be positive".into()));
        }
        Ok(())
    }

    pub fn direction(&self) -> Vec<f64> {
        vec![1.0 / (self.dim as f64).sqrt(); self.dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub train: Vec<Example>,
    pub validation: Vec<Example>,
    pub test: Vec<Example>,
}

/// Generates three disjoint splits from one seeded stream.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData, TrainError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let u = spec.direction();
    let noise = (spec.noise > 0.0).then(|| Normal::new(0.0, spec.noise).expect("valid sigma"));
    let mut split = || -> Vec<Example> {
        let mut out = Vec::new();
        for class in FlareClass::ALL {
            for _ in 0..spec.counts[class.rank()] {
                let mu = spec.means[class.rank()];
                let features = u
                    .iter()
                    .map(|&ui| mu * ui + noise.map_or(0.0, |n| n.sample(&mut rng)))
                    .collect();
                let longitude = rng.random_range(-90.0..=90.0);
                out.push(Example {
                    features,
                    class,
                    longitude,
                });
            }
        }
        out
    };
    let train = split();
    let validation = split();
    let test = split();
    Ok(SyntheticData {
        train,
        validation,
        test,
    })
}

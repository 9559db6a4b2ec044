//! Augmentations for FL-class rasters, applied before byte scaling.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::raster::Raster;

/// Amplitude of the additive noise, in Gauss.
pub const NOISE_AMPLITUDE: f64 = 25.0;
pub const DEFAULT_BLUR_SIGMA: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugmentError {
    #[error("blur sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("random noise needs a seed")]
    MissingSeed,
    #[error("{0} does not take a seed")]
    UnexpectedSeed(AugmentKind),
    #[error("unknown augmentation `{0}`")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AugmentKind {
    PolarityInversion,
    GaussianBlur,
    VFlip,
    HFlip,
    RandomNoise,
}

impl AugmentKind {
    pub const ALL: [AugmentKind; 5] = [
        AugmentKind::PolarityInversion,
        AugmentKind::GaussianBlur,
        AugmentKind::VFlip,
        AugmentKind::HFlip,
        AugmentKind::RandomNoise,
    ];

    /// File-name suffix for outputs of this augmentation.
    pub fn suffix(self) -> &'static str {
        match self {
            AugmentKind::PolarityInversion => "_pol",
            AugmentKind::GaussianBlur => "_blur",
            AugmentKind::VFlip => "_vflip",
            AugmentKind::HFlip => "_hflip",
            AugmentKind::RandomNoise => "_noise",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AugmentKind::PolarityInversion => "polarity_inversion",
            AugmentKind::GaussianBlur => "gaussian_blur",
            AugmentKind::VFlip => "vflip",
            AugmentKind::HFlip => "hflip",
            AugmentKind::RandomNoise => "random_noise",
        }
    }
}

impl fmt::Display for AugmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AugmentKind {
    type Err = AugmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AugmentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| AugmentError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    kind: AugmentKind,
    seed: Option<u64>,
    blur_sigma: f64,
}

impl AugmentSpec {
    pub fn new(kind: AugmentKind, seed: Option<u64>) -> Result<Self, AugmentError> {
        match (kind, seed) {
            (AugmentKind::RandomNoise, None) => Err(AugmentError::MissingSeed),
            (AugmentKind::RandomNoise, Some(_)) => Ok(()),
            (_, Some(_)) => Err(AugmentError::UnexpectedSeed(kind)),
            (_, None) => Ok(()),
        }?;
        Ok(Self {
            kind,
            seed,
            blur_sigma: DEFAULT_BLUR_SIGMA,
        })
    }

    pub fn blur(sigma: f64) -> Result<Self, AugmentError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(AugmentError::InvalidSigma(sigma));
        }
        Ok(Self {
            kind: AugmentKind::GaussianBlur,
            seed: None,
            blur_sigma: sigma,
        })
    }

    pub fn kind(&self) -> AugmentKind {
        self.kind
    }

    pub fn apply(&self, r: &Raster) -> Result<Raster, AugmentError> {
        Ok(match self.kind {
            AugmentKind::PolarityInversion => polarity_inversion(r),
            AugmentKind::GaussianBlur => gaussian_blur(r, self.blur_sigma)?,
            AugmentKind::VFlip => vflip(r),
            AugmentKind::HFlip => hflip(r),
            AugmentKind::RandomNoise => {
                random_noise(r, self.seed.ok_or(AugmentError::MissingSeed)?)
            }
        })
    }
}

pub fn polarity_inversion(r: &Raster) -> Raster {
    r.map(|v| -v)
}

/// Reverses row order (flip about the horizontal axis).
pub fn vflip(r: &Raster) -> Raster {
    let mut values = Vec::with_capacity(r.values().len());
    for row in (0..r.height()).rev() {
        values.extend_from_slice(r.row(row));
    }
    Raster::new(r.width(), r.height(), values).expect("same shape")
}

/// Reverses column order (flip about the vertical axis).
pub fn hflip(r: &Raster) -> Raster {
    let mut values = Vec::with_capacity(r.values().len());
    for row in 0..r.height() {
        values.extend(r.row(row).iter().rev());
    }
    Raster::new(r.width(), r.height(), values).expect("same shape")
}

/// Normalised 1-D Gaussian taps over `-radius..=radius`, `radius = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Mirror index into `0..n` with the edge sample repeated (`d c b a | a b c d`).
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Separable Gaussian blur with reflected edges.
pub fn gaussian_blur(r: &Raster, sigma: f64) -> Result<Raster, AugmentError> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(AugmentError::InvalidSigma(sigma));
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let (w, h) = (r.width(), r.height());

    let mut horiz = vec![0.0; w * h];
    for row in 0..h {
        let src = r.row(row);
        for col in 0..w {
            horiz[row * w + col] = kernel
                .iter()
                .enumerate()
                .map(|(k, &t)| t * src[reflect(col as i64 + k as i64 - radius, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for row in 0..h {
        for col in 0..w {
            out[row * w + col] = kernel
                .iter()
                .enumerate()
                .map(|(k, &t)| t * horiz[reflect(row as i64 + k as i64 - radius, h) * w + col])
                .sum();
        }
    }
    Ok(Raster::new(w, h, out).expect("same shape"))
}

/// Adds i.i.d. uniform noise on `[-25, 25]` G from a seeded generator.
pub fn random_noise(r: &Raster, seed: u64) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = r
        .values()
        .iter()
        .map(|&v| v + rng.random_range(-NOISE_AMPLITUDE..=NOISE_AMPLITUDE))
        .collect();
    Raster::new(r.width(), r.height(), values).expect("same shape")
}

/// Stable per-sample seed: FNV-1a of the sample id, xor the global seed.
pub fn sample_seed(sample_id: &str, global_seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in sample_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ global_seed
}

/// The five augmented variants of one processed raster, each re-clamped to
/// `±cap` so it stays inside the byte-scaling range.
pub fn augment_all(
    r: &Raster,
    sample_id: &str,
    global_seed: u64,
    cap: f64,
) -> Result<Vec<(AugmentKind, Raster)>, AugmentError> {
    AugmentKind::ALL
        .into_iter()
        .map(|kind| {
            let spec = match kind {
                AugmentKind::RandomNoise => {
                    AugmentSpec::new(kind, Some(sample_seed(sample_id, global_seed)))?
                }
                _ => AugmentSpec::new(kind, None)?,
            };
            let out = spec.apply(r)?.map(|v| v.clamp(-cap, cap));
            Ok((kind, out))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_raster(w: usize, h: usize, seed: u64) -> Raster {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Raster::new(
            w,
            h,
            (0..w * h)
                .map(|_| rng.random_range(-300.0..300.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn polarity_examples() {
        let r = Raster::from_rows(&[&[10.0, -20.0]]).unwrap();
        assert_eq!(polarity_inversion(&r).values(), &[-10.0, 20.0]);
        assert_eq!(polarity_inversion(&polarity_inversion(&r)), r);
        let z = Raster::zeros(3, 3).unwrap();
        assert!(polarity_inversion(&z).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flip_examples() {
        let r = Raster::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(vflip(&r).values(), &[3.0, 4.0, 1.0, 2.0]);
        assert_eq!(hflip(&r).values(), &[2.0, 1.0, 4.0, 3.0]);
        let r = random_raster(7, 5, 3);
        assert_eq!(hflip(&hflip(&r)), r);
        assert_eq!(vflip(&vflip(&r)), r);
        let rotated = hflip(&vflip(&r));
        for row in 0..5 {
            for col in 0..7 {
                assert_eq!(rotated.get(row, col), r.get(4 - row, 6 - col));
            }
        }
    }

    #[test]
    fn blur_preserves_constants() {
        let r = Raster::new(9, 6, vec![42.5; 54]).unwrap();
        let b = gaussian_blur(&r, 1.0).unwrap();
        assert!(b.values().iter().all(|v| (v - 42.5).abs() < 1e-9));
        // radius larger than the raster still folds indices correctly
        let tiny = Raster::new(2, 1, vec![7.0, 7.0]).unwrap();
        let b = gaussian_blur(&tiny, 3.0).unwrap();
        assert!(b.values().iter().all(|v| (v - 7.0).abs() < 1e-9));
    }

    #[test]
    fn blur_impulse_center_weight() {
        // oracle: the 2-D kernel evaluated directly at the origin
        let sigma: f64 = 1.0;
        let radius = 3i64;
        let mut total = 0.0;
        for y in -radius..=radius {
            for x in -radius..=radius {
                total += (-((x * x + y * y) as f64) / (2.0 * sigma * sigma)).exp();
            }
        }
        let expect = 1.0 / total;
        assert!((expect - 0.1592).abs() < 1e-4);

        let n = 21;
        let mut v = vec![0.0; n * n];
        v[10 * n + 10] = 1.0;
        let b = gaussian_blur(&Raster::new(n, n, v).unwrap(), sigma).unwrap();
        assert!((b.get(10, 10) - expect).abs() < 1e-12);
        let sum: f64 = b.values().iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn blur_rejects_bad_sigma() {
        let r = Raster::zeros(2, 2).unwrap();
        assert_eq!(gaussian_blur(&r, 0.0), Err(AugmentError::InvalidSigma(0.0)));
        assert!(gaussian_blur(&r, -1.0).is_err());
        assert!(AugmentSpec::blur(f64::NAN).is_err());
    }

    #[test]
    fn noise_is_bounded_and_deterministic() {
        let r = random_raster(16, 16, 1);
        let a = random_noise(&r, 99);
        assert_eq!(a, random_noise(&r, 99));
        assert_ne!(a, random_noise(&r, 100));
        for (x, y) in a.values().iter().zip(r.values()) {
            assert!((x - y).abs() <= 25.0);
        }
    }

    #[test]
    fn noise_mean_is_near_zero() {
        let r = Raster::zeros(1000, 1000).unwrap();
        let noisy = random_noise(&r, 2024);
        let mean = noisy.values().iter().sum::<f64>() / 1e6;
        assert!(mean.abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn seed_rules() {
        assert_eq!(
            AugmentSpec::new(AugmentKind::RandomNoise, None),
            Err(AugmentError::MissingSeed)
        );
        assert!(AugmentSpec::new(AugmentKind::HFlip, Some(1)).is_err());
        assert!(AugmentSpec::new(AugmentKind::RandomNoise, Some(1)).is_ok());
        assert_eq!("vflip".parse::<AugmentKind>().unwrap(), AugmentKind::VFlip);
    }

    #[test]
    fn augment_all_produces_five_clamped_variants() {
        let r = Raster::new(8, 8, vec![250.0; 64]).unwrap();
        let out = augment_all(&r, "s1", 5, 256.0).unwrap();
        let suffixes: Vec<_> = out.iter().map(|(k, _)| k.suffix()).collect();
        assert_eq!(suffixes, ["_pol", "_blur", "_vflip", "_hflip", "_noise"]);
        for (_, a) in &out {
            assert_eq!((a.width(), a.height()), (8, 8));
            assert!(a.values().iter().all(|v| v.abs() <= 256.0));
        }
        assert_eq!(out, augment_all(&r, "s1", 5, 256.0).unwrap());
        assert_ne!(sample_seed("s1", 5), sample_seed("s2", 5));
    }

    proptest! {
        #[test]
        fn dimensions_preserved(w in 1usize..12, h in 1usize..12, seed in 0u64..100) {
            let r = random_raster(w, h, seed);
            for kind in AugmentKind::ALL {
                let s = if kind == AugmentKind::RandomNoise { Some(seed) } else { None };
                let a = AugmentSpec::new(kind, s).unwrap().apply(&r).unwrap();
                prop_assert_eq!((a.width(), a.height()), (w, h));
            }
        }

        #[test]
        fn blur_commutes_with_inversion(w in 1usize..12, h in 1usize..12, seed in 0u64..100, sigma in 0.3f64..2.5) {
            let r = random_raster(w, h, seed);
            let a = gaussian_blur(&polarity_inversion(&r), sigma).unwrap();
            let b = polarity_inversion(&gaussian_blur(&r, sigma).unwrap());
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }
}

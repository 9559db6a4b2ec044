//! Small reference scorers mapping a feature vector to one logit.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrainError;
use crate::raster::ByteImage;

pub const MODEL_MAGIC: &str = "flarecast-model";
pub const MODEL_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScorerKind {
    Linear,
    OneHidden { hidden: usize },
}

/// Flat parameter vector with a fixed layout:
///
/// * linear: `[w (d), b]`
/// * one hidden layer: `[W1 (h x d, row-major), b1 (h), w2 (h), b2]`
#[derive(Debug, Clone, PartialEq)]
pub struct Scorer {
    kind: ScorerKind,
    input_dim: usize,
    params: Vec<f64>,
}

fn param_count(kind: ScorerKind, d: usize) -> usize {
    match kind {
        ScorerKind::Linear => d + 1,
        ScorerKind::OneHidden { hidden: h } => h * d + 2 * h + 1,
    }
}

impl Scorer {
    pub fn zeros(kind: ScorerKind, input_dim: usize) -> Self {
        Self {
            kind,
            input_dim,
            params: vec![0.0; param_count(kind, input_dim)],
        }
    }

    pub fn from_params(
        kind: ScorerKind,
        input_dim: usize,
        params: Vec<f64>,
    ) -> Result<Self, TrainError> {
        let expected = param_count(kind, input_dim);
        if params.len() != expected {
            return Err(TrainError::Dimension {
                expected,
                got: params.len(),
            });
        }
        Ok(Self {
            kind,
            input_dim,
            params,
        })
    }

    /// Each layer's parameters uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init(kind: ScorerKind, input_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |fan_in: usize, n: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
        };
        let d = input_dim;
        let params = match kind {
            ScorerKind::Linear => draw(d, d + 1),
            ScorerKind::OneHidden { hidden: h } => {
                let mut p = draw(d, h * d + h);
                p.extend(draw(h, h + 1));
                p
            }
        };
        Self {
            kind,
            input_dim,
            params,
        }
    }

    pub fn kind(&self) -> ScorerKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `true` for weights, `false` for bias terms (which are not decayed).
    pub fn decay_mask(&self) -> Vec<bool> {
        let d = self.input_dim;
        match self.kind {
            ScorerKind::Linear => (0..=d).map(|i| i < d).collect(),
            ScorerKind::OneHidden { hidden: h } => {
                let mut m = vec![true; h * d];
                m.extend(std::iter::repeat_n(false, h));
                m.extend(std::iter::repeat_n(true, h));
                m.push(false);
                m
            }
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), TrainError> {
        if x.len() != self.input_dim {
            return Err(TrainError::Dimension {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64, TrainError> {
        self.check_dim(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> f64 {
        let d = self.input_dim;
        let p = &self.params;
        match self.kind {
            ScorerKind::Linear => dot(&p[..d], x) + p[d],
            ScorerKind::OneHidden { hidden: h } => {
                let (w1, rest) = p.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(h);
                let mut out = b2[0];
                for j in 0..h {
                    out += w2[j] * (dot(&w1[j * d..(j + 1) * d], x) + b1[j]).tanh();
                }
                out
            }
        }
    }

    /// Adds `upstream * d(logit)/d(params)` into `grad`.
    pub fn backward(&self, x: &[f64], upstream: f64, grad: &mut [f64]) -> Result<(), TrainError> {
        self.check_dim(x)?;
        if grad.len() != self.params.len() {
            return Err(TrainError::Dimension {
                expected: self.params.len(),
                got: grad.len(),
            });
        }
        self.backward_unchecked(x, upstream, grad);
        Ok(())
    }

    pub(crate) fn backward_unchecked(&self, x: &[f64], upstream: f64, grad: &mut [f64]) {
        let d = self.input_dim;
        match self.kind {
            ScorerKind::Linear => {
                for (g, &xi) in grad[..d].iter_mut().zip(x) {
                    *g += upstream * xi;
                }
                grad[d] += upstream;
            }
            ScorerKind::OneHidden { hidden: h } => {
                let p = &self.params;
                let (b1_at, w2_at, b2_at) = (h * d, h * d + h, h * d + 2 * h);
                for j in 0..h {
                    let pre = dot(&p[j * d..(j + 1) * d], x) + p[b1_at + j];
                    let a = pre.tanh();
                    grad[w2_at + j] += upstream * a;
                    let dpre = upstream * p[w2_at + j] * (1.0 - a * a);
                    for (g, &xi) in grad[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *g += dpre * xi;
                    }
                    grad[b1_at + j] += dpre;
                }
                grad[b2_at] += upstream;
            }
        }
    }

    /// Text model file: a header line, then one parameter per line in
    /// shortest round-trip decimal form.
    pub fn to_model_text(&self, threshold: Option<f64>) -> String {
        let hidden = match self.kind {
            ScorerKind::Linear => 0,
            ScorerKind::OneHidden { hidden } => hidden,
        };
        let kind = match self.kind {
            ScorerKind::Linear => "linear",
            ScorerKind::OneHidden { .. } => "one_hidden",
        };
        let mut out = format!(
            "{MODEL_MAGIC} {MODEL_VERSION} kind={kind} input_dim={} hidden={hidden}",
            self.input_dim
        );
        if let Some(t) = threshold {
            write!(out, " threshold={t}").unwrap();
        }
        out.push('\n');
        for p in &self.params {
            writeln!(out, "{p:?}").unwrap();
        }
        out
    }

    pub fn from_model_text(text: &str) -> Result<(Self, Option<f64>), TrainError> {
        let bad = |line: usize, msg: String| TrainError::ModelFormat { line, msg };
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad(1, "empty model file".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some(MODEL_MAGIC) {
            return Err(bad(1, "missing model magic".into()));
        }
        match fields.next() {
            Some(MODEL_VERSION) => {}
            other => return Err(bad(1, format!("unsupported version {other:?}"))),
        }
        let (mut kind, mut dim, mut hidden, mut threshold) = (None, None, 0usize, None);
        for f in fields {
            let (k, v) = f
                .split_once('=')
                .ok_or_else(|| bad(1, format!("bad header field `{f}`")))?;
            let num_err = || bad(1, format!("bad value in `{f}`"));
            match k {
                "kind" => kind = Some(v.to_string()),
                "input_dim" => dim = Some(v.parse::<usize>().map_err(|_| num_err())?),
                "hidden" => hidden = v.parse::<usize>().map_err(|_| num_err())?,
                "threshold" => threshold = Some(v.parse::<f64>().map_err(|_| num_err())?),
                _ => return Err(bad(1, format!("unknown header field `{k}`"))),
            }
        }
        let kind = match kind.as_deref() {
            Some("linear") => ScorerKind::Linear,
            Some("one_hidden") => ScorerKind::OneHidden { hidden },
            other => return Err(bad(1, format!("unknown scorer kind {other:?}"))),
        };
        let dim = dim.ok_or_else(|| bad(1, "missing input_dim".into()))?;
        let mut params = Vec::new();
        for (i, l) in lines.enumerate() {
            let l = l.trim();
            if l.is_empty() {
                continue;
            }
            params.push(
                l.parse::<f64>()
                    .map_err(|_| bad(i + 2, format!("bad parameter `{l}`")))?,
            );
        }
        Ok((Self::from_params(kind, dim, params)?, threshold))
    }

    pub fn save(&self, path: impl AsRef<Path>, threshold: Option<f64>) -> Result<(), TrainError> {
        std::fs::write(path, self.to_model_text(threshold))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Option<f64>), TrainError> {
        Self::from_model_text(&std::fs::read_to_string(path)?)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub const POOL_GRID: usize = 16;

/// Block means over a `grid x grid` partition of the image, scaled to `[0, 1]`.
pub fn pool_features(img: &ByteImage, grid: usize) -> Result<Vec<f64>, TrainError> {
    let (w, h) = (img.width(), img.height());
    if grid == 0 || w % grid != 0 || h % grid != 0 || w != h {
        return Err(TrainError::Shape(format!(
            "{w}x{h} image cannot be pooled on a {grid}x{grid} grid"
        )));
    }
    let block = w / grid;
    let area = (block * block) as f64;
    let mut out = Vec::with_capacity(grid * grid);
    for br in 0..grid {
        for bc in 0..grid {
            let mut sum = 0u64;
            for r in br * block..(br + 1) * block {
                for c in bc * block..(bc + 1) * block {
                    sum += img.get(r, c) as u64;
                }
            }
            out.push(sum as f64 / area / 255.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_logit() {
        let s = Scorer::zeros(ScorerKind::Linear, 4);
        assert_eq!(s.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 0.0);
        let s = Scorer::zeros(ScorerKind::OneHidden { hidden: 3 }, 4);
        assert_eq!(s.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 0.0);
    }

    #[test]
    fn linear_unit_direction() {
        let s = Scorer::from_params(ScorerKind::Linear, 3, vec![1.0, 0.0, 0.0, 0.25]).unwrap();
        assert_eq!(s.forward(&[3.0, 0.0, 0.0]).unwrap(), 3.25);
        assert!(matches!(
            s.forward(&[1.0]),
            Err(TrainError::Dimension { .. })
        ));
    }

    #[test]
    fn one_hidden_by_hand() {
        // h = 1, d = 2: w2 * tanh(W1 x + b1) + b2
        let s = Scorer::from_params(
            ScorerKind::OneHidden { hidden: 1 },
            2,
            vec![0.5, -1.0, 0.1, 2.0, 0.3],
        )
        .unwrap();
        let expect = 2.0 * (0.5 * 2.0 - 1.0 * 1.0 + 0.1f64).tanh() + 0.3;
        assert!((s.forward(&[2.0, 1.0]).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn decay_mask_excludes_biases() {
        let s = Scorer::zeros(ScorerKind::Linear, 2);
        assert_eq!(s.decay_mask(), vec![true, true, false]);
        let s = Scorer::zeros(ScorerKind::OneHidden { hidden: 2 }, 1);
        assert_eq!(
            s.decay_mask(),
            vec![true, true, false, false, true, true, false]
        );
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = Scorer::init(ScorerKind::OneHidden { hidden: 4 }, 9, 3);
        assert_eq!(a, Scorer::init(ScorerKind::OneHidden { hidden: 4 }, 9, 3));
        assert_ne!(a, Scorer::init(ScorerKind::OneHidden { hidden: 4 }, 9, 4));
        assert!(a.params()[..40].iter().all(|p| p.abs() <= 1.0 / 3.0));
        assert!(a.params()[40..].iter().all(|p| p.abs() <= 0.5));
    }

    #[test]
    fn model_text_round_trip() {
        let s = Scorer::init(ScorerKind::OneHidden { hidden: 3 }, 5, 17);
        let text = s.to_model_text(Some(0.69));
        assert!(text.starts_with(
            "flarecast-model v1 kind=one_hidden input_dim=5 hidden=3 threshold=0.69\n"
        ));
        let (back, t) = Scorer::from_model_text(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(t, Some(0.69));

        let lin = Scorer::init(ScorerKind::Linear, 2, 1);
        let (back, t) = Scorer::from_model_text(&lin.to_model_text(None)).unwrap();
        assert_eq!((back, t), (lin, None));

        assert!(
            Scorer::from_model_text("flarecast-model v2 kind=linear input_dim=1\n0\n0\n").is_err()
        );
        assert!(matches!(
            Scorer::from_model_text("flarecast-model v1 kind=linear input_dim=1\n0\nzz\n"),
            Err(TrainError::ModelFormat { line: 3, .. })
        ));
    }

    #[test]
    fn pooling() {
        let img = ByteImage::new(512, 512, vec![128; 512 * 512]).unwrap();
        let f = pool_features(&img, POOL_GRID).unwrap();
        assert_eq!(f.len(), 256);
        assert!(f.iter().all(|&v| (v - 128.0 / 255.0).abs() < 1e-12));

        let mut px = vec![0u8; 512 * 512];
        for r in 64..96 {
            for c in 160..192 {
                px[r * 512 + c] = 255;
            }
        }
        let f = pool_features(&ByteImage::new(512, 512, px).unwrap(), POOL_GRID).unwrap();
        let elevated: Vec<usize> = (0..256).filter(|&i| f[i] > 0.0).collect();
        assert_eq!(elevated, vec![2 * 16 + 5]);
        assert_eq!(f[2 * 16 + 5], 1.0);

        let odd = ByteImage::new(500, 512, vec![0; 500 * 512]).unwrap();
        assert!(pool_features(&odd, POOL_GRID).is_err());
    }

    #[test]
    fn pooling_matches_direct_block_means() {
        let px: Vec<u8> = (0..512 * 512)
            .map(|i| ((i * 7919 + i / 512 * 31) % 256) as u8)
            .collect();
        let img = ByteImage::new(512, 512, px.clone()).unwrap();
        let f = pool_features(&img, POOL_GRID).unwrap();
        for (k, &v) in f.iter().enumerate() {
            let (br, bc) = (k / 16, k % 16);
            let mut s = 0.0;
            for r in 0..32 {
                for c in 0..32 {
                    s += px[(br * 32 + r) * 512 + bc * 32 + c] as f64;
                }
            }
            assert!((v - s / 1024.0 / 255.0).abs() < 1e-12);
        }
    }
}

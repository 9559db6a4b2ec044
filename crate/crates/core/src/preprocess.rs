//! Magnetogram patch preprocessing.
//!
//! Order of operations: bitmap crop, width filter, flux cap and noise
//! zeroing, zero-pad or maximum-USFLUX window selection to a square tile,
//! then affine scaling to bytes.

use thiserror::Error;

use crate::raster::{BitmapMask, ByteImage, Raster};

pub const DEFAULT_MIN_WIDTH: usize = 70;
pub const DEFAULT_CAP: f64 = 256.0;
pub const DEFAULT_NOISE_FLOOR: f64 = 25.0;
pub const TILE: usize = 512;

/// Fixed-point scale of the summed-area table: one unit is 0.001 G.
pub const SAT_UNITS_PER_GAUSS: f64 = 1000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("mask is {mask_w}x{mask_h} but raster is {raster_w}x{raster_h}")]
    MaskShape {
        raster_w: usize,
        raster_h: usize,
        mask_w: usize,
        mask_h: usize,
    },
    #[error("mask has no inside pixels")]
    EmptyRegion,
    #[error("raster {width}x{height} is smaller than the {k}x{k} window")]
    RasterTooSmall {
        width: usize,
        height: usize,
        k: usize,
    },
    #[error("window size must be positive")]
    ZeroWindow,
    #[error("value {value} at index {index} exceeds the scaling range ±{cap}")]
    OutOfRange { index: usize, value: f64, cap: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Crops to the tight bounding box of inside pixels; pixels in the box but
/// outside the mask become zero.
pub fn mask_crop(r: &Raster, m: &BitmapMask) -> Result<Raster, PreprocessError> {
    if r.width() != m.width() || r.height() != m.height() {
        return Err(PreprocessError::MaskShape {
            raster_w: r.width(),
            raster_h: r.height(),
            mask_w: m.width(),
            mask_h: m.height(),
        });
    }
    let (mut top, mut bottom, mut left, mut right) = (usize::MAX, 0, usize::MAX, 0);
    for row in 0..r.height() {
        for col in 0..r.width() {
            if m.is_inside(row, col) {
                top = top.min(row);
                bottom = bottom.max(row);
                left = left.min(col);
                right = right.max(col);
            }
        }
    }
    if top == usize::MAX {
        return Err(PreprocessError::EmptyRegion);
    }
    let (h, w) = (bottom - top + 1, right - left + 1);
    let mut values = Vec::with_capacity(w * h);
    for row in top..=bottom {
        for col in left..=right {
            values.push(if m.is_inside(row, col) {
                r.get(row, col)
            } else {
                0.0
            });
        }
    }
    Ok(Raster::new(w, h, values).expect("crop of a valid raster is valid"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeDecision {
    Keep,
    Drop,
}

/// Drops patches narrower than `min_width`. Height is not tested.
pub fn size_filter(r: &Raster, min_width: usize) -> SizeDecision {
    if r.width() < min_width {
        SizeDecision::Drop
    } else {
        SizeDecision::Keep
    }
}

/// Zeroes `|v| <= noise_floor` and caps magnitudes at `cap`.
pub fn clamp_denoise(r: &Raster, cap: f64, noise_floor: f64) -> Raster {
    r.map(|v| {
        if v.abs() <= noise_floor {
            0.0
        } else {
            v.signum() * v.abs().min(cap)
        }
    })
}

#[inline]
fn quantize_abs(v: f64) -> i128 {
    (v.abs() * SAT_UNITS_PER_GAUSS + 0.5).floor() as i128
}

/// Integral image of unsigned flux in fixed-point milli-Gauss.
///
/// Stored with a zero guard row and column, so entry `(i + 1, j + 1)` holds
/// the sum over rows `0..=i` and columns `0..=j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummedAreaTable {
    width: usize,
    height: usize,
    table: Vec<i128>,
}

impl SummedAreaTable {
    pub fn new(r: &Raster) -> Self {
        let (w, h) = (r.width(), r.height());
        let stride = w + 1;
        let mut table = vec![0i128; stride * (h + 1)];
        for row in 0..h {
            let mut running = 0i128;
            for col in 0..w {
                running += quantize_abs(r.get(row, col));
                table[(row + 1) * stride + col + 1] = table[row * stride + col + 1] + running;
            }
        }
        Self {
            width: w,
            height: h,
            table,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Sum over the inclusive rectangle `[0..=row] x [0..=col]`.
    pub fn at(&self, row: usize, col: usize) -> i128 {
        self.table[(row + 1) * (self.width + 1) + col + 1]
    }

    /// Sum over `height x width` pixels with top-left corner `(top, left)`.
    pub fn rect_sum(&self, top: usize, left: usize, height: usize, width: usize) -> i128 {
        let s = self.width + 1;
        let (b, r) = (top + height, left + width);
        self.table[b * s + r] - self.table[top * s + r] - self.table[b * s + left]
            + self.table[top * s + left]
    }
}

/// Same as [`SummedAreaTable::new`].
pub fn summed_area_table(r: &Raster) -> SummedAreaTable {
    SummedAreaTable::new(r)
}

/// Top-left corner and unsigned flux of a selected window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPos {
    pub row: usize,
    pub col: usize,
    /// Unsigned flux in milli-Gauss units.
    pub sum: i128,
}

impl WindowPos {
    pub fn sum_gauss(&self) -> f64 {
        self.sum as f64 / SAT_UNITS_PER_GAUSS
    }
}

/// Stride-1 search for the `k x k` window of maximum unsigned flux.
/// Ties keep the smallest row, then the smallest column.
pub fn max_usflux_window(r: &Raster, k: usize) -> Result<WindowPos, PreprocessError> {
    if k == 0 {
        return Err(PreprocessError::ZeroWindow);
    }
    if r.width() < k || r.height() < k {
        return Err(PreprocessError::RasterTooSmall {
            width: r.width(),
            height: r.height(),
            k,
        });
    }
    let sat = SummedAreaTable::new(r);
    let mut best = WindowPos {
        row: 0,
        col: 0,
        sum: sat.rect_sum(0, 0, k, k),
    };
    for row in 0..=r.height() - k {
        for col in 0..=r.width() - k {
            let s = sat.rect_sum(row, col, k, k);
            if s > best.sum {
                best = WindowPos { row, col, sum: s };
            }
        }
    }
    Ok(best)
}

fn pad_to(r: &Raster, width: usize, height: usize) -> Raster {
    let left = (width - r.width()) / 2;
    let top = (height - r.height()) / 2;
    let mut values = vec![0.0; width * height];
    for row in 0..r.height() {
        let dst = (row + top) * width + left;
        values[dst..dst + r.width()].copy_from_slice(r.row(row));
    }
    Raster::new(width, height, values).expect("padding keeps the raster valid")
}

/// Brings a raster to exactly `target x target`: short dimensions are
/// zero-padded symmetrically (odd remainder on the trailing side), then an
/// oversized result is cut down to its maximum-USFLUX window.
pub fn pad_or_select(r: &Raster, target: usize) -> Raster {
    let (w, h) = (r.width().max(target), r.height().max(target));
    let padded = if (w, h) != (r.width(), r.height()) {
        pad_to(r, w, h)
    } else {
        r.clone()
    };
    if w == target && h == target {
        return padded;
    }
    let pos = max_usflux_window(&padded, target).expect("padded raster covers the window");
    padded.sub_raster(pos.row, pos.col, target, target)
}

/// Maps `[-cap, cap]` affinely onto `0..=255`, rounding half up.
pub fn scale_to_bytes_with_cap(r: &Raster, cap: f64) -> Result<ByteImage, PreprocessError> {
    let mut pixels = Vec::with_capacity(r.values().len());
    for (index, &v) in r.values().iter().enumerate() {
        if v.abs() > cap {
            return Err(PreprocessError::OutOfRange {
                index,
                value: v,
                cap,
            });
        }
        pixels.push(((v + cap) / (2.0 * cap) * 255.0 + 0.5).floor() as u8);
    }
    Ok(ByteImage::new(r.width(), r.height(), pixels).expect("shape carried over"))
}

/// [`scale_to_bytes_with_cap`] at the default ±256 G range.
pub fn scale_to_bytes(r: &Raster) -> Result<ByteImage, PreprocessError> {
    scale_to_bytes_with_cap(r, DEFAULT_CAP)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pipeline {
    pub min_width: usize,
    pub cap: f64,
    pub noise_floor: f64,
    pub tile: usize,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self {
            min_width: DEFAULT_MIN_WIDTH,
            cap: DEFAULT_CAP,
            noise_floor: DEFAULT_NOISE_FLOOR,
            tile: TILE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// The crop was narrower than the minimum width.
    Dropped {
        crop_width: usize,
        crop_height: usize,
    },
    Kept {
        crop_width: usize,
        crop_height: usize,
        /// Clamped, tile-sized raster before byte scaling.
        raster: Raster,
        image: ByteImage,
    },
}

impl Pipeline {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(self.cap.is_finite() && self.cap > 0.0) {
            return Err(PreprocessError::InvalidParameter(format!(
                "cap {}",
                self.cap
            )));
        }
        if !(self.noise_floor.is_finite() && self.noise_floor >= 0.0) {
            return Err(PreprocessError::InvalidParameter(format!(
                "noise floor {}",
                self.noise_floor
            )));
        }
        if self.tile == 0 {
            return Err(PreprocessError::ZeroWindow);
        }
        Ok(())
    }

    pub fn process(&self, raster: &Raster, mask: &BitmapMask) -> Result<Outcome, PreprocessError> {
        self.validate()?;
        let crop = mask_crop(raster, mask)?;
        let (crop_width, crop_height) = (crop.width(), crop.height());
        if size_filter(&crop, self.min_width) == SizeDecision::Drop {
            return Ok(Outcome::Dropped {
                crop_width,
                crop_height,
            });
        }
        let clamped = clamp_denoise(&crop, self.cap, self.noise_floor);
        let tile = pad_or_select(&clamped, self.tile);
        let image = scale_to_bytes_with_cap(&tile, self.cap)?;
        Ok(Outcome::Kept {
            crop_width,
            crop_height,
            raster: tile,
            image,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(w: usize, h: usize) -> Raster {
        Raster::new(w, h, (0..w * h).map(|i| i as f64 + 1.0).collect()).unwrap()
    }

    #[test]
    fn crop_identity_with_full_mask() {
        let r = grid(4, 3);
        let m = BitmapMask::all_inside(4, 3).unwrap();
        assert_eq!(mask_crop(&r, &m).unwrap(), r);
    }

    #[test]
    fn crop_single_pixel() {
        let r = grid(5, 5);
        let mut v = vec![0u8; 25];
        v[2 * 5 + 3] = 1;
        let m = BitmapMask::new(5, 5, v).unwrap();
        let c = mask_crop(&r, &m).unwrap();
        assert_eq!((c.width(), c.height()), (1, 1));
        assert_eq!(c.get(0, 0), r.get(2, 3));
    }

    #[test]
    fn crop_box_zeroes_outside_pixels() {
        let r = grid(5, 5);
        // inside pixels span rows 1..=3 and columns 0..=2
        let inside = [(1, 0), (1, 1), (2, 2), (3, 1)];
        let mut v = vec![0u8; 25];
        for (row, col) in inside {
            v[row * 5 + col] = 255;
        }
        let c = mask_crop(&r, &BitmapMask::new(5, 5, v).unwrap()).unwrap();
        let expect =
            Raster::from_rows(&[&[6.0, 7.0, 0.0], &[0.0, 0.0, 13.0], &[0.0, 17.0, 0.0]]).unwrap();
        assert_eq!(c, expect);
        // idempotent under a full mask
        let again = mask_crop(&c, &BitmapMask::all_inside(3, 3).unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn crop_errors() {
        let r = grid(3, 3);
        let empty = BitmapMask::new(3, 3, vec![0; 9]).unwrap();
        assert_eq!(mask_crop(&r, &empty), Err(PreprocessError::EmptyRegion));
        let wrong = BitmapMask::all_inside(2, 3).unwrap();
        assert!(matches!(
            mask_crop(&r, &wrong),
            Err(PreprocessError::MaskShape { .. })
        ));
    }

    #[test]
    fn size_filter_boundary() {
        assert_eq!(
            size_filter(&Raster::zeros(69, 200).unwrap(), 70),
            SizeDecision::Drop
        );
        assert_eq!(
            size_filter(&Raster::zeros(70, 1).unwrap(), 70),
            SizeDecision::Keep
        );
        assert_eq!(
            size_filter(&Raster::zeros(512, 512).unwrap(), 70),
            SizeDecision::Keep
        );
    }

    #[test]
    fn clamp_denoise_examples() {
        let r =
            Raster::from_rows(&[&[300.0, -4500.0, 24.0, -24.9, 26.0, 25.0, -25.0, 256.0]]).unwrap();
        let c = clamp_denoise(&r, 256.0, 25.0);
        assert_eq!(
            c.values(),
            &[256.0, -256.0, 0.0, 0.0, 26.0, 0.0, 0.0, 256.0]
        );
    }

    #[test]
    fn sat_examples() {
        let r = Raster::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let s = summed_area_table(&r);
        let k = SAT_UNITS_PER_GAUSS as i128;
        assert_eq!(
            [s.at(0, 0), s.at(0, 1), s.at(1, 0), s.at(1, 1)],
            [k, 3 * k, 4 * k, 10 * k]
        );
        let z = summed_area_table(&Raster::zeros(4, 3).unwrap());
        assert!((0..3).all(|r| (0..4).all(|c| z.at(r, c) == 0)));
        // absolute values are accumulated
        let neg = Raster::from_rows(&[&[-1.0, 2.0]]).unwrap();
        assert_eq!(summed_area_table(&neg).at(0, 1), 3 * k);
    }

    #[test]
    fn window_examples() {
        let r = Raster::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[7.0, 8.0, 9.0]]).unwrap();
        let p = max_usflux_window(&r, 2).unwrap();
        assert_eq!((p.row, p.col), (1, 1));
        assert_eq!(p.sum_gauss(), 28.0);
        let u = Raster::new(4, 4, vec![3.0; 16]).unwrap();
        let p = max_usflux_window(&u, 2).unwrap();
        assert_eq!((p.row, p.col), (0, 0));
        let p = max_usflux_window(&r, 3).unwrap();
        assert_eq!((p.row, p.col), (0, 0));
        assert!(matches!(
            max_usflux_window(&r, 4),
            Err(PreprocessError::RasterTooSmall { .. })
        ));
    }

    #[test]
    fn pad_small_raster_is_centered() {
        let r = Raster::new(100, 100, vec![1.0; 100 * 100]).unwrap();
        let p = pad_or_select(&r, 512);
        assert_eq!((p.width(), p.height()), (512, 512));
        assert_eq!(p.get(205, 205), 0.0);
        assert_eq!(p.get(206, 206), 1.0);
        assert_eq!(p.get(305, 305), 1.0);
        assert_eq!(p.get(306, 306), 0.0);
        // odd remainder goes to the trailing side
        let r = Raster::new(3, 2, vec![1.0; 6]).unwrap();
        let p = pad_or_select(&r, 6);
        assert_eq!(p.row(2), &[0.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(p.row(1), &[0.0; 6]);
    }

    #[test]
    fn pad_identity_at_target() {
        let r = grid(8, 8);
        assert_eq!(pad_or_select(&r, 8), r);
    }

    #[test]
    fn select_wide_raster() {
        // 12x5 at target 8: height padded to 8, then best horizontal window
        let mut v = vec![0.0; 12 * 5];
        for row in 0..5 {
            v[row * 12 + 10] = 50.0;
            v[row * 12 + 11] = 50.0;
        }
        let r = Raster::new(12, 5, v).unwrap();
        let p = pad_or_select(&r, 8);
        assert_eq!((p.width(), p.height()), (8, 8));
        // columns 4..12 of the padded raster hold both bright columns
        assert_eq!(p.get(1, 6), 50.0);
        assert_eq!(p.get(1, 7), 50.0);
        assert_eq!(p.get(0, 7), 0.0);
    }

    #[test]
    fn scale_examples() {
        let r = Raster::from_rows(&[&[-256.0, 256.0, 0.0, -0.0]]).unwrap();
        assert_eq!(scale_to_bytes(&r).unwrap().pixels(), &[0, 255, 128, 128]);
        let bad = Raster::from_rows(&[&[256.5]]).unwrap();
        assert!(matches!(
            scale_to_bytes(&bad),
            Err(PreprocessError::OutOfRange { .. })
        ));
    }

    #[test]
    fn window_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let w = rng.random_range(1..=24);
            let h = rng.random_range(1..=24);
            let k = rng.random_range(1..=w.min(h));
            let v: Vec<f64> = (0..w * h)
                .map(|_| (rng.random_range(-400.0f64..400.0) * 8.0).round() / 8.0)
                .collect();
            let r = Raster::new(w, h, v).unwrap();
            let mut best = (0, 0, i128::MIN);
            for row in 0..=h - k {
                for col in 0..=w - k {
                    let mut s = 0i128;
                    for rr in row..row + k {
                        for cc in col..col + k {
                            s += quantize_abs(r.get(rr, cc));
                        }
                    }
                    if s > best.2 {
                        best = (row, col, s);
                    }
                }
            }
            let p = max_usflux_window(&r, k).unwrap();
            assert_eq!((p.row, p.col, p.sum), best);
        }
    }

    proptest! {
        #[test]
        fn clamp_leaves_no_small_or_large_values(v in prop::collection::vec(-5000.0f64..5000.0, 1..64)) {
            let n = v.len();
            let r = clamp_denoise(&Raster::new(n, 1, v).unwrap(), 256.0, 25.0);
            for &x in r.values() {
                prop_assert!(x == 0.0 || (x.abs() > 25.0 && x.abs() <= 256.0));
            }
        }

        #[test]
        fn scaling_is_monotone(a in -256.0f64..=256.0, b in -256.0f64..=256.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let img = scale_to_bytes(&Raster::from_rows(&[&[lo, hi]]).unwrap()).unwrap();
            prop_assert!(img.pixels()[0] <= img.pixels()[1]);
        }

        #[test]
        fn pipeline_output_is_tile_sized(w in 1usize..40, h in 1usize..40, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = (0..w * h).map(|_| rng.random_range(-1000.0..1000.0)).collect();
            let r = Raster::new(w, h, v).unwrap();
            let m = BitmapMask::all_inside(w, h).unwrap();
            let p = Pipeline { min_width: 1, tile: 16, ..Pipeline::default() };
            match p.process(&r, &m).unwrap() {
                Outcome::Kept { image, raster, .. } => {
                    prop_assert_eq!((image.width(), image.height()), (16, 16));
                    prop_assert_eq!((raster.width(), raster.height()), (16, 16));
                }
                Outcome::Dropped { .. } => prop_assert!(false),
            }
        }
    }
}

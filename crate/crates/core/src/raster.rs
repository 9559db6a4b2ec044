//! Raster containers and their on-disk formats.
//!
//! * `MGR1` magnetogram: magic, LE `u32` width, LE `u32` height, then
//!   `width * height` LE `f32` values in Gauss, row-major.
//! * `MSK1` bitmap: magic, LE `u32` width, LE `u32` height, then one byte
//!   per pixel (0 = outside, nonzero = inside).
//! * Binary PGM (`P5`, maxval 255) for byte images.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("raster dimensions must be positive, got {width}x{height}")]
    EmptyShape { width: usize, height: usize },
    #[error("expected {expected} values for the stated shape, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("raster value at index {index} is not finite")]
    NonFinite { index: usize },
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("malformed PGM: {0}")]
    BadPgm(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Line-of-sight field strengths in Gauss, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyShape { width, height });
        }
        if values.len() != width * height {
            return Err(RasterError::ShapeMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(RasterError::NonFinite { index });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self, RasterError> {
        Self::new(width, height, vec![0.0; width * height])
    }

    /// Builds a raster from row slices; panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, RasterError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == width), "ragged rows");
        Self::new(width, height, rows.concat())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.width..(row + 1) * self.width]
    }

    /// Applies `f` elementwise. `f` must keep values finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copies the `height x width` block whose top-left corner is `(top, left)`.
    pub fn sub_raster(&self, top: usize, left: usize, height: usize, width: usize) -> Raster {
        assert!(top + height <= self.height && left + width <= self.width);
        let mut values = Vec::with_capacity(width * height);
        for r in top..top + height {
            values.extend_from_slice(&self.row(r)[left..left + width]);
        }
        Raster {
            width,
            height,
            values,
        }
    }

    pub fn read_mgr(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let bytes = fs::read(path)?;
        Self::decode_mgr(&bytes)
    }

    pub fn decode_mgr(bytes: &[u8]) -> Result<Self, RasterError> {
        let mut cur = io::Cursor::new(bytes);
        let (width, height) = read_header(&mut cur, b"MGR1", "MGR1")?;
        let n = width * height;
        let mut buf = vec![0u8; n * 4];
        cur.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Self::new(width, height, values)
    }

    /// Values are narrowed to `f32` on write.
    pub fn encode_mgr(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.values.len() * 4);
        out.extend_from_slice(b"MGR1");
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        for &v in &self.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn write_mgr(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        fs::write(path, self.encode_mgr())?;
        Ok(())
    }
}

fn read_header(
    cur: &mut impl Read,
    magic: &[u8; 4],
    name: &'static str,
) -> Result<(usize, usize), RasterError> {
    let mut m = [0u8; 4];
    cur.read_exact(&mut m)?;
    if &m != magic {
        return Err(RasterError::BadMagic { expected: name });
    }
    let mut w = [0u8; 4];
    let mut h = [0u8; 4];
    cur.read_exact(&mut w)?;
    cur.read_exact(&mut h)?;
    Ok((
        u32::from_le_bytes(w) as usize,
        u32::from_le_bytes(h) as usize,
    ))
}

/// Region-of-interest bitmap paired with a raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitmapMask {
    width: usize,
    height: usize,
    values: Vec<u8>,
    cutoff: u8,
}

impl BitmapMask {
    /// Pixels with a value above 0 count as inside.
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyShape { width, height });
        }
        if values.len() != width * height {
            return Err(RasterError::ShapeMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        Ok(Self {
            width,
            height,
            values,
            cutoff: 0,
        })
    }

    /// Inside means strictly above `cutoff`.
    pub fn with_cutoff(mut self, cutoff: u8) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn all_inside(width: usize, height: usize) -> Result<Self, RasterError> {
        Self::new(width, height, vec![1; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn is_inside(&self, row: usize, col: usize) -> bool {
        self.values[row * self.width + col] > self.cutoff
    }

    pub fn read_msk(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let bytes = fs::read(path)?;
        Self::decode_msk(&bytes)
    }

    pub fn decode_msk(bytes: &[u8]) -> Result<Self, RasterError> {
        let mut cur = io::Cursor::new(bytes);
        let (width, height) = read_header(&mut cur, b"MSK1", "MSK1")?;
        let mut values = vec![0u8; width * height];
        cur.read_exact(&mut values)?;
        Self::new(width, height, values)
    }

    pub fn encode_msk(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.values.len());
        out.extend_from_slice(b"MSK1");
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&self.values);
        out
    }

    pub fn write_msk(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        fs::write(path, self.encode_msk())?;
        Ok(())
    }
}

/// 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl ByteImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyShape { width, height });
        }
        if pixels.len() != width * height {
            return Err(RasterError::ShapeMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn encode_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.encode_pgm())?;
        Ok(())
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        Self::decode_pgm(&fs::read(path)?)
    }

    /// Accepts `P5` with maxval 255 and `#` comments in the header.
    pub fn decode_pgm(bytes: &[u8]) -> Result<Self, RasterError> {
        let mut pos = 0;
        let mut tokens = Vec::with_capacity(4);
        while tokens.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(RasterError::BadPgm("truncated header".into()));
            }
            tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        if tokens[0] != "P5" {
            return Err(RasterError::BadPgm(format!(
                "unsupported magic {}",
                tokens[0]
            )));
        }
        let parse = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| RasterError::BadPgm(format!("bad number `{t}`")))
        };
        let (width, height, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
        if maxval != 255 {
            return Err(RasterError::BadPgm(format!("maxval {maxval} unsupported")));
        }
        let end = pos + width * height;
        if bytes.len() < end {
            return Err(RasterError::BadPgm("truncated pixel data".into()));
        }
        Self::new(width, height, bytes[pos..end].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        assert!(Raster::new(0, 3, vec![]).is_err());
        assert!(Raster::new(2, 2, vec![1.0; 3]).is_err());
        assert!(matches!(
            Raster::new(2, 1, vec![1.0, f64::NAN]),
            Err(RasterError::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn mgr_round_trip() {
        let r = Raster::from_rows(&[&[1.5, -2.25, 300.0], &[0.0, 4500.0, -4500.0]]).unwrap();
        let bytes = r.encode_mgr();
        assert_eq!(&bytes[..4], b"MGR1");
        assert_eq!(bytes.len(), 12 + 6 * 4);
        assert_eq!(Raster::decode_mgr(&bytes).unwrap(), r);
        assert!(matches!(
            Raster::decode_mgr(b"XXXX\0\0\0\0\0\0\0\0"),
            Err(RasterError::BadMagic { .. })
        ));
        assert!(Raster::decode_mgr(&bytes[..20]).is_err());
    }

    #[test]
    fn msk_round_trip_and_cutoff() {
        let m = BitmapMask::new(2, 2, vec![0, 1, 33, 255]).unwrap();
        let back = BitmapMask::decode_msk(&m.encode_msk()).unwrap();
        assert_eq!(back, m);
        assert!(!m.is_inside(0, 0) && m.is_inside(0, 1));
        let m = m.with_cutoff(33);
        assert!(!m.is_inside(1, 0) && m.is_inside(1, 1));
    }

    #[test]
    fn pgm_round_trip() {
        let img = ByteImage::new(3, 2, vec![0, 128, 255, 1, 2, 3]).unwrap();
        let bytes = img.encode_pgm();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(ByteImage::decode_pgm(&bytes).unwrap(), img);
        let commented = b"P5\n# note\n3 2\n255\n\x00\x80\xff\x01\x02\x03";
        assert_eq!(ByteImage::decode_pgm(commented).unwrap(), img);
        assert!(ByteImage::decode_pgm(b"P2\n1 1\n255\n0").is_err());
    }
}

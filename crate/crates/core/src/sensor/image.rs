use std::path::Path;

use crate::diff::Scalar;
use crate::error::{Error, Result};

/// Row-major RGB raster with channel values in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image<S = f64> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<S>,
}

pub type SensorImage = Image<f64>;

impl<S: Copy> Image<S> {
    pub fn filled(width: usize, height: usize, rgb: [S; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        3 * (y * self.width + x)
    }

    pub fn pixel(&self, x: usize, y: usize) -> [S; 3] {
        let i = self.idx(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [S; 3]) {
        let i = self.idx(x, y);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

impl Image<f64> {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::InvalidArgument(format!("{} values for a {width}x{height} RGB image", data.len())));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("pixel value outside [0,1]".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn lift<S: Scalar>(&self) -> Image<S> {
        Image { width: self.width, height: self.height, data: self.data.iter().map(|&v| S::cst(v)).collect() }
    }
}

impl<S: Scalar> Image<S> {
    pub fn value(&self) -> Image<f64> {
        Image { width: self.width, height: self.height, data: self.data.iter().map(|v| v.val()).collect() }
    }
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::parse(0, "truncated PPM header"));
    }
    Ok(&bytes[start..*pos])
}

fn header_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = next_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(0, format!("bad PPM {what}")))
}

/// Decodes a binary P6 PPM with maxval ≤ 255, scaling samples to [0,1].
pub fn decode_ppm(bytes: &[u8]) -> Result<SensorImage> {
    let mut pos = 0;
    if next_token(bytes, &mut pos)? != b"P6" {
        return Err(Error::parse(0, "not a binary PPM (P6)"));
    }
    let width = header_number(bytes, &mut pos, "width")?;
    let height = header_number(bytes, &mut pos, "height")?;
    let maxval = header_number(bytes, &mut pos, "maxval")?;
    if !(1..=255).contains(&maxval) {
        return Err(Error::parse(0, format!("unsupported maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::parse(0, "empty image"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width.checked_mul(height).and_then(|p| p.checked_mul(3)).ok_or_else(|| Error::parse(0, "image too large"))?;
    let raster = bytes.get(pos..).filter(|r| r.len() >= n).ok_or_else(|| Error::parse(0, "truncated PPM raster"))?;
    let data = raster[..n]
        .iter()
        .map(|&b| {
            let b = b as usize;
            if b > maxval {
                Err(Error::parse(0, format!("sample {b} exceeds maxval {maxval}")))
            } else {
                Ok(b as f64 / maxval as f64)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Image { width, height, data })
}

pub fn encode_ppm(img: &SensorImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn load_ppm(path: impl AsRef<Path>) -> Result<SensorImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes)
}

pub fn save_ppm(img: &SensorImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_ppm(img)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_bit_round_trip() {
        let data: Vec<f64> = (0..2 * 3 * 3).map(|k| (k * 13 % 256) as f64 / 255.0).collect();
        let img = Image::new(2, 3, data).unwrap();
        assert_eq!(decode_ppm(&encode_ppm(&img)).unwrap(), img);
    }

    #[test]
    fn header_comments_and_low_maxval() {
        let mut bytes = b"P6\n# made by hand\n1 1\n# c\n15\n".to_vec();
        bytes.extend_from_slice(&[15, 0, 5]);
        let img = decode_ppm(&bytes).unwrap();
        assert_eq!(img.data, vec![1.0, 0.0, 5.0 / 15.0]);
    }

    #[test]
    fn malformed_inputs() {
        assert!(decode_ppm(b"P3\n1 1\n255\n").is_err());
        assert!(decode_ppm(b"P6\n2 2\n255\n\x00\x00").is_err());
        assert!(decode_ppm(b"P6\n1 1\n100\n\xff\x00\x00").is_err());
        assert!(decode_ppm(b"P6\n99999999999 99999999999\n255\n").is_err());
    }
}

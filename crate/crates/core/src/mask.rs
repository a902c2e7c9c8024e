//! Binary pixel masks with a row-major run-length encoding.
//!
//! The encoding alternates zero-runs and one-runs and always starts with a
//! zero-run (possibly of length 0), scanning rows top to bottom.

use crate::bbox::BBox;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MaskError {
    #[error("run-length counts sum to {sum}, expected {expected}")]
    LengthMismatch { sum: u64, expected: u64 },
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for v in 0..height as usize {
            for u in 0..width as usize {
                bits.push(f(u, v));
            }
        }
        Self { width, height, bits }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, MaskError> {
        let expected = width as u64 * height as u64;
        if bits.len() as u64 != expected {
            return Err(MaskError::LengthMismatch { sum: bits.len() as u64, expected });
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_rle(width: u32, height: u32, counts: &[u32]) -> Result<Self, MaskError> {
        let expected = width as u64 * height as u64;
        let sum: u64 = counts.iter().map(|&c| c as u64).sum();
        if sum != expected {
            return Err(MaskError::LengthMismatch { sum, expected });
        }
        let mut bits = Vec::with_capacity(expected as usize);
        let mut value = false;
        for &c in counts {
            bits.extend(std::iter::repeat_n(value, c as usize));
            value = !value;
        }
        Ok(Self { width, height, bits })
    }

    pub fn to_rle(&self) -> Vec<u32> {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for &b in &self.bits {
            if b == current {
                run += 1;
            } else {
                counts.push(run);
                current = b;
                run = 1;
            }
        }
        counts.push(run);
        counts
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.bits[v * self.width as usize + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: bool) {
        let w = self.width as usize;
        self.bits[v * w + u] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    fn check_dims(&self, other: &Mask) -> Result<(), MaskError> {
        if self.width != other.width || self.height != other.height {
            return Err(MaskError::DimensionMismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }

    /// `(|a ∩ b|, |a ∪ b|)`.
    pub fn overlap_counts(&self, other: &Mask) -> Result<(usize, usize), MaskError> {
        self.check_dims(other)?;
        let mut inter = 0;
        let mut union = 0;
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        Ok((inter, union))
    }

    /// Intersection over union; zero when the union is empty.
    pub fn iou(&self, other: &Mask) -> Result<f64, MaskError> {
        let (inter, union) = self.overlap_counts(other)?;
        Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
    }

    /// Tight pixel box with exclusive max corner, `None` for an empty mask.
    pub fn bbox(&self) -> Option<BBox> {
        let w = self.width as usize;
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for (i, _) in self.bits.iter().enumerate().filter(|(_, &b)| b) {
            let (u, v) = (i % w, i / w);
            x0 = x0.min(u);
            y0 = y0.min(v);
            x1 = x1.max(u);
            y1 = y1.max(v);
        }
        if x0 == usize::MAX {
            return None;
        }
        Some(BBox::new(x0 as f64, y0 as f64, (x1 + 1) as f64, (y1 + 1) as f64))
    }

    /// Pixels set in `self`, restricted to `bbox` (closed on min, open on max).
    pub fn crop_to(&self, bbox: &BBox) -> Mask {
        Mask::from_fn(self.width, self.height, |u, v| {
            let (x, y) = (u as f64, v as f64);
            self.get(u, v) && x >= bbox.x_min && x < bbox.x_max && y >= bbox.y_min && y < bbox.y_max
        })
    }
}

//! Axis-aligned boxes.

use crate::error::{DetError, Result};

/// An axis-aligned box with per-dimension `[lo, hi)` intervals.
///
/// Tree boxes are always finite with `lo < hi`. Query regions may use
/// infinite bounds (e.g. a half-line `y > c`), but never `lo > hi` or NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperRect {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl HyperRect {
    /// Builds a box, requiring `lo[d] < hi[d]` and no NaN bound.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(DetError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(DetError::InvalidBox("box has no dimensions".into()));
        }
        for (d, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if l.is_nan() || h.is_nan() || l >= h {
                return Err(DetError::InvalidBox(format!(
                    "dimension {d}: need lo < hi, got [{l}, {h}]"
                )));
            }
        }
        Ok(HyperRect { lo, hi })
    }

    /// Same as [`HyperRect::new`] but additionally rejects infinite bounds.
    pub fn new_finite(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let rect = Self::new(lo, hi)?;
        if !rect.is_finite() {
            return Err(DetError::InvalidBox("bounds must be finite".into()));
        }
        Ok(rect)
    }

    /// The unit cube `[0, 1]^dims`.
    pub fn unit(dims: usize) -> Self {
        HyperRect {
            lo: vec![0.0; dims],
            hi: vec![1.0; dims],
        }
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, d: usize) -> f64 {
        self.hi[d] - self.lo[d]
    }

    pub fn is_finite(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|v| v.is_finite())
    }

    pub fn volume(&self) -> f64 {
        (0..self.dims()).map(|d| self.width(d)).product()
    }

    /// Volume of the intersection with `other`; zero when they do not overlap.
    pub fn intersection_volume(&self, other: &HyperRect) -> f64 {
        let mut v = 1.0;
        for d in 0..self.dims() {
            let len = overlap(self.lo[d], self.hi[d], other.lo[d], other.hi[d]);
            if len <= 0.0 {
                return 0.0;
            }
            v *= len;
        }
        v
    }

    /// The intersection box, or `None` when the overlap has zero measure.
    pub fn intersection(&self, other: &HyperRect) -> Option<HyperRect> {
        let mut lo = Vec::with_capacity(self.dims());
        let mut hi = Vec::with_capacity(self.dims());
        for d in 0..self.dims() {
            let l = self.lo[d].max(other.lo[d]);
            let h = self.hi[d].min(other.hi[d]);
            if !(l < h) {
                return None;
            }
            lo.push(l);
            hi.push(h);
        }
        Some(HyperRect { lo, hi })
    }

    /// True when `other` lies inside `self` (closed comparison on both ends).
    pub fn contains_rect(&self, other: &HyperRect) -> bool {
        (0..self.dims()).all(|d| self.lo[d] <= other.lo[d] && other.hi[d] <= self.hi[d])
    }

    /// Half-open membership test. `closed_hi[d]` marks dimensions whose upper
    /// bound coincides with the root box, where `p[d] == hi[d]` counts as inside.
    pub fn contains_with(&self, p: &[f64], closed_hi: &[bool]) -> bool {
        (0..self.dims()).all(|d| {
            let v = p[d];
            self.lo[d] <= v && (v < self.hi[d] || (closed_hi[d] && v == self.hi[d]))
        })
    }

    /// Closed membership `lo <= p <= hi`; the root box convention.
    pub fn contains_closed(&self, p: &[f64]) -> bool {
        (0..self.dims()).all(|d| self.lo[d] <= p[d] && p[d] <= self.hi[d])
    }

    /// Splits at `threshold` in `dim` into `[lo, t)` and `[t, hi)`.
    pub fn split(&self, dim: usize, threshold: f64) -> (HyperRect, HyperRect) {
        let mut left = self.clone();
        let mut right = self.clone();
        left.hi[dim] = threshold;
        right.lo[dim] = threshold;
        (left, right)
    }

    pub(crate) fn set_lo(&mut self, d: usize, v: f64) {
        self.lo[d] = v;
    }

    pub(crate) fn set_hi(&mut self, d: usize, v: f64) {
        self.hi[d] = v;
    }
}

/// Length of `[a_lo, a_hi) ∩ [b_lo, b_hi)`, clamped at zero.
pub(crate) fn overlap(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64) -> f64 {
    let len = a_hi.min(b_hi) - a_lo.max(b_lo);
    if len > 0.0 {
        len
    } else {
        0.0
    }
}

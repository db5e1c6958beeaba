//! Exact integrals of the piecewise-constant estimator.
//!
//! Box and slice integrals share one pruned descent: a subtree is skipped as
//! soon as a fixed coordinate falls on the other side of a split, or the
//! subtree's extent along a free dimension no longer overlaps the query box.

use std::collections::BTreeMap;

use crate::error::{DetError, Result};
use crate::geometry::HyperRect;
use crate::tree::{DensityTree, TreeNode};

/// Fixed values for a subset of dimensions; the remaining dimensions are free.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SliceSpec {
    fixed: BTreeMap<usize, f64>,
}

impl SliceSpec {
    pub fn new(fixed: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (d, v) in fixed {
            if !v.is_finite() {
                return Err(DetError::InvalidSlice(format!("dimension {d} fixed to {v}")));
            }
            if map.insert(d, v).is_some() {
                return Err(DetError::InvalidSlice(format!("dimension {d} fixed twice")));
            }
        }
        Ok(SliceSpec { fixed: map })
    }

    /// Builds a slice from `(dimension name, value)` pairs.
    pub fn by_name<'a>(tree: &DensityTree, fixed: impl IntoIterator<Item = (&'a str, f64)>) -> Result<Self> {
        let mut pairs = Vec::new();
        for (name, v) in fixed {
            let d = tree
                .dim_index(name)
                .ok_or_else(|| DetError::UnknownDimension(name.to_string()))?;
            pairs.push((d, v));
        }
        Self::new(pairs)
    }

    pub fn fixed(&self) -> &BTreeMap<usize, f64> {
        &self.fixed
    }

    pub fn is_fixed(&self, d: usize) -> bool {
        self.fixed.contains_key(&d)
    }

    pub fn free_dims(&self, dims: usize) -> Vec<usize> {
        (0..dims).filter(|d| !self.is_fixed(*d)).collect()
    }

    /// Checks the slice against a tree with `dims` dimensions.
    pub fn check(&self, dims: usize) -> Result<()> {
        if let Some((&d, _)) = self.fixed.iter().find(|(&d, _)| d >= dims) {
            return Err(DetError::InvalidSlice(format!(
                "dimension index {d} out of range for {dims} dimensions"
            )));
        }
        if self.fixed.len() >= dims {
            return Err(DetError::NoFreeDimensions);
        }
        Ok(())
    }

    pub(crate) fn as_dense(&self, dims: usize) -> Vec<Option<f64>> {
        let mut out = vec![None; dims];
        for (&d, &v) in &self.fixed {
            out[d] = Some(v);
        }
        out
    }
}

/// A slice plus an optional restriction of the free dimensions.
///
/// `free_box` spans all dimensions; its extents along fixed dimensions are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceIntegralQuery {
    pub slice: SliceSpec,
    pub free_box: Option<HyperRect>,
}

impl SliceIntegralQuery {
    pub fn new(slice: SliceSpec) -> Self {
        SliceIntegralQuery { slice, free_box: None }
    }

    pub fn with_free_box(mut self, free_box: HyperRect) -> Self {
        self.free_box = Some(free_box);
        self
    }
}

/// Result of a slice integral with the number of tree nodes the descent touched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceIntegral {
    pub value: f64,
    pub nodes_visited: usize,
}

/// A leaf cut by a slice: the leaf box clipped to the free box, and its density.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SliceCell {
    pub clipped: HyperRect,
    pub density: f64,
    pub free_volume: f64,
}

/// `Σ density · volume(leaf ∩ region)`.
pub fn integrate_box(tree: &DensityTree, region: &HyperRect) -> Result<f64> {
    if region.dims() != tree.dim_count() {
        return Err(DetError::DimensionMismatch {
            expected: tree.dim_count(),
            got: region.dims(),
        });
    }
    let fixed = vec![None; tree.dim_count()];
    let mut sum = 0.0;
    walk(tree, &fixed, Some(region), |cell| sum += cell.density * cell.free_volume);
    Ok(sum)
}

/// Integral over the whole support; 1 for a freshly trained tree.
pub fn normalization(tree: &DensityTree) -> f64 {
    let fixed = vec![None; tree.dim_count()];
    let mut sum = 0.0;
    walk(tree, &fixed, None, |cell| sum += cell.density * cell.free_volume);
    sum
}

/// Integral of the estimator over the free dimensions of a slice.
pub fn integrate_slice(tree: &DensityTree, query: &SliceIntegralQuery) -> Result<f64> {
    integrate_slice_stats(tree, query).map(|r| r.value)
}

/// [`integrate_slice`] reporting how many nodes the pruned descent visited.
pub fn integrate_slice_stats(tree: &DensityTree, query: &SliceIntegralQuery) -> Result<SliceIntegral> {
    check_query(tree, query)?;
    let fixed = query.slice.as_dense(tree.dim_count());
    let mut value = 0.0;
    let nodes_visited = walk(tree, &fixed, query.free_box.as_ref(), |cell| {
        value += cell.density * cell.free_volume
    });
    Ok(SliceIntegral { value, nodes_visited })
}

pub(crate) fn check_query(tree: &DensityTree, query: &SliceIntegralQuery) -> Result<()> {
    query.slice.check(tree.dim_count())?;
    if let Some(fb) = &query.free_box {
        if fb.dims() != tree.dim_count() {
            return Err(DetError::DimensionMismatch {
                expected: tree.dim_count(),
                got: fb.dims(),
            });
        }
    }
    Ok(())
}

/// Visits every leaf hit by the slice whose clipped free volume is positive.
/// Returns the number of nodes visited.
pub(crate) fn walk(
    tree: &DensityTree,
    fixed: &[Option<f64>],
    free_box: Option<&HyperRect>,
    mut visit: impl FnMut(&SliceCell),
) -> usize {
    let root = tree.root_box();
    let dims = tree.dim_count();
    let mut cur = root.clone();
    for (d, fx) in fixed.iter().enumerate().take(dims) {
        match *fx {
            Some(v) => {
                if !(root.lo()[d] <= v && v <= root.hi()[d]) {
                    return 0;
                }
            }
            None => {
                if let Some(fb) = free_box {
                    let lo = root.lo()[d].max(fb.lo()[d]);
                    let hi = root.hi()[d].min(fb.hi()[d]);
                    if !(lo < hi) {
                        return 0;
                    }
                    cur.set_lo(d, lo);
                    cur.set_hi(d, hi);
                }
            }
        }
    }
    let mut visited = 0;
    descend(tree.root(), &mut cur, fixed, &mut visited, &mut visit);
    visited
}

fn descend(
    node: &TreeNode,
    cur: &mut HyperRect,
    fixed: &[Option<f64>],
    visited: &mut usize,
    visit: &mut impl FnMut(&SliceCell),
) {
    *visited += 1;
    match node {
        TreeNode::Leaf { density, .. } => {
            let free_volume: f64 = (0..cur.dims())
                .filter(|&d| fixed[d].is_none())
                .map(|d| cur.width(d))
                .product();
            visit(&SliceCell {
                clipped: cur.clone(),
                density: *density,
                free_volume,
            });
        }
        TreeNode::Internal {
            split_dim,
            threshold,
            left,
            right,
        } => {
            let d = *split_dim;
            let t = *threshold;
            let (lo, hi) = (cur.lo()[d], cur.hi()[d]);
            match fixed[d] {
                Some(v) => {
                    if v < t {
                        cur.set_hi(d, t.min(hi));
                        descend(left, cur, fixed, visited, visit);
                        cur.set_hi(d, hi);
                    } else {
                        cur.set_lo(d, t.max(lo));
                        descend(right, cur, fixed, visited, visit);
                        cur.set_lo(d, lo);
                    }
                }
                None => {
                    if lo < t {
                        cur.set_hi(d, t.min(hi));
                        descend(left, cur, fixed, visited, visit);
                        cur.set_hi(d, hi);
                    }
                    if t < hi {
                        cur.set_lo(d, t.max(lo));
                        descend(right, cur, fixed, visited, visit);
                        cur.set_lo(d, lo);
                    }
                }
            }
        }
    }
}

/// One-sided constraint on a free dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HalfLine {
    /// `y_d > c`
    Above { dim: usize, cut: f64 },
    /// `y_d <= c`
    AtMost { dim: usize, cut: f64 },
}

impl HalfLine {
    pub fn dim(&self) -> usize {
        match *self {
            HalfLine::Above { dim, .. } | HalfLine::AtMost { dim, .. } => dim,
        }
    }
}

/// Fraction of the slice mass satisfying `constraint`:
/// `∫_{constraint} d(x̂, y) dy / ∫ d(x̂, y) dy`.
pub fn conditional_ratio(tree: &DensityTree, slice: &SliceSpec, constraint: HalfLine) -> Result<f64> {
    let dims = tree.dim_count();
    slice.check(dims)?;
    let dim = constraint.dim();
    if dim >= dims || slice.is_fixed(dim) {
        return Err(DetError::InvalidSlice(format!(
            "constrained dimension {dim} must be a free dimension"
        )));
    }
    let fixed = slice.as_dense(dims);
    let mut total = 0.0;
    walk(tree, &fixed, None, |c| total += c.density * c.free_volume);
    if !(total > 0.0) {
        return Err(DetError::NoSupport(
            "the slice crosses no populated leaf".into(),
        ));
    }
    let mut lo = vec![f64::NEG_INFINITY; dims];
    let mut hi = vec![f64::INFINITY; dims];
    match constraint {
        HalfLine::Above { cut, .. } => lo[dim] = cut,
        HalfLine::AtMost { cut, .. } => hi[dim] = cut,
    }
    let region = match HyperRect::new(lo, hi) {
        Ok(r) => r,
        // Cut at ±inf leaves an empty half-line.
        Err(_) => return Ok(0.0),
    };
    let mut pass = 0.0;
    walk(tree, &fixed, Some(&region), |c| pass += c.density * c.free_volume);
    Ok((pass / total).clamp(0.0, 1.0))
}

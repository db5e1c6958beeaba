//! Greedy growth of a density tree.
//!
//! Every node is split at the `(dim, threshold)` pair that minimizes the sum
//! of the children's replacement errors `R = -W²/(W_tot² V)`. Candidate
//! thresholds are midpoints between consecutive distinct coordinates. Growth
//! stops when no admissible candidate remains (minimum leaf width, minimum
//! leaf weight), when the best gain is not positive, or at `max_depth`.

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{DetError, Result};
use crate::geometry::HyperRect;
use crate::tree::{DensityTree, TreeNode};

/// A split is only accepted when it lowers the replacement error by more than this.
pub const GAIN_TOLERANCE: f64 = 1e-12;

/// Scores within this relative distance of the minimum are ties, resolved by
/// the smallest `(dim, threshold)`.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Default relative padding of the data-extent root box.
pub const DEFAULT_PAD: f64 = 1e-9;

/// Nodes with at least this many points grow their children on separate workers.
const PARALLEL_MIN_POINTS: usize = 2048;

/// Per-dimension resolution floor of the leaves.
#[derive(Debug, Clone, PartialEq)]
pub enum LeafWidth {
    /// `3.49 σ_d N^(-1/3)`, clamped below at `extent_d / 2^20`.
    Auto,
    PerDim(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RootBoxPolicy {
    Explicit(HyperRect),
    /// Data extent widened on both sides by `pad` times the extent.
    DataExtent { pad: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub min_leaf_width: LeafWidth,
    pub min_leaf_weight: f64,
    pub max_depth: usize,
    pub root_box: RootBoxPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            min_leaf_width: LeafWidth::Auto,
            min_leaf_weight: 0.0,
            max_depth: 64,
            root_box: RootBoxPolicy::DataExtent { pad: DEFAULT_PAD },
        }
    }
}

impl TrainConfig {
    pub fn with_min_leaf_width(mut self, widths: Vec<f64>) -> Self {
        self.min_leaf_width = LeafWidth::PerDim(widths);
        self
    }

    pub fn with_root_box(mut self, rect: HyperRect) -> Self {
        self.root_box = RootBoxPolicy::Explicit(rect);
        self
    }

    pub fn with_min_leaf_weight(mut self, w: f64) -> Self {
        self.min_leaf_weight = w;
        self
    }

    pub fn with_max_depth(mut self, depth: usize) -> Self {
        self.max_depth = depth;
        self
    }
}

/// Admissibility limits applied to every split candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitLimits {
    pub min_leaf_width: Vec<f64>,
    pub min_leaf_weight: f64,
}

impl SplitLimits {
    pub fn new(min_leaf_width: Vec<f64>, min_leaf_weight: f64) -> Result<Self> {
        if let Some(w) = min_leaf_width.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(DetError::InvalidConfig(format!("min leaf width {w} must be positive")));
        }
        if !(min_leaf_weight >= 0.0) || !min_leaf_weight.is_finite() {
            return Err(DetError::InvalidConfig(format!(
                "min leaf weight {min_leaf_weight} must be non-negative"
            )));
        }
        Ok(SplitLimits {
            min_leaf_width,
            min_leaf_weight,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub dim: usize,
    pub threshold: f64,
    /// `R(left) + R(right)`; lower is better.
    pub score: f64,
    pub left_weight: f64,
    pub right_weight: f64,
}

/// `-weight² / (total_weight² · volume)`, the contribution of a node to the
/// empirical integrated-squared-error surrogate.
pub fn replacement_error(weight: f64, total_weight: f64, volume: f64) -> Result<f64> {
    if !(volume > 0.0) || !volume.is_finite() {
        return Err(DetError::InvalidVolume(volume));
    }
    if !(total_weight > 0.0) || !(weight >= 0.0) {
        return Err(DetError::InvalidWeight(format!(
            "weight {weight} of total {total_weight}"
        )));
    }
    Ok(raw_replacement_error(weight, total_weight, volume))
}

#[inline]
fn raw_replacement_error(weight: f64, total_weight: f64, volume: f64) -> f64 {
    let f = weight / total_weight;
    -(f * f) / volume
}

/// `node_r - left_r - right_r`. Positive when the split lowers the error.
pub fn gini_gain(node_r: f64, left_r: f64, right_r: f64) -> f64 {
    node_r - left_r - right_r
}

/// Root box according to `policy`.
pub fn resolve_root_box(data: &Dataset, policy: &RootBoxPolicy) -> Result<HyperRect> {
    match policy {
        RootBoxPolicy::Explicit(rect) => {
            if rect.dims() != data.dims() {
                return Err(DetError::DimensionMismatch {
                    expected: data.dims(),
                    got: rect.dims(),
                });
            }
            if !rect.is_finite() {
                return Err(DetError::InvalidBox("root box must be finite".into()));
            }
            if let Some(index) = data.points().position(|p| !rect.contains_closed(p)) {
                return Err(DetError::PointOutsideBox { index });
            }
            Ok(rect.clone())
        }
        RootBoxPolicy::DataExtent { pad } => {
            if !(*pad >= 0.0) || !pad.is_finite() {
                return Err(DetError::InvalidConfig(format!("padding {pad} must be non-negative")));
            }
            let dims = data.dims();
            let mut lo = vec![f64::INFINITY; dims];
            let mut hi = vec![f64::NEG_INFINITY; dims];
            for p in data.points() {
                for d in 0..dims {
                    lo[d] = lo[d].min(p[d]);
                    hi[d] = hi[d].max(p[d]);
                }
            }
            for d in 0..dims {
                let extent = hi[d] - lo[d];
                let margin = if extent > 0.0 {
                    pad * extent
                } else {
                    lo[d].abs().max(1.0) * pad.max(DEFAULT_PAD)
                };
                let (mut l, mut h) = (lo[d] - margin, hi[d] + margin);
                if !(l < h) {
                    l = l.next_down();
                    h = h.next_up();
                }
                lo[d] = l;
                hi[d] = h;
            }
            HyperRect::new_finite(lo, hi)
        }
    }
}

/// Scott-like per-dimension width `3.49 σ_d N^(-1/3)`, never below `extent_d / 2^20`.
///
/// `σ_d` is the weighted standard deviation; `N` is the number of rows.
pub fn auto_min_leaf_width(data: &Dataset, root_box: &HyperRect) -> Vec<f64> {
    let total = data.total_weight();
    let n = data.len() as f64;
    (0..data.dims())
        .map(|d| {
            let mean = data.points().zip(data.weights()).map(|(p, w)| w * p[d]).sum::<f64>() / total;
            let var = data
                .points()
                .zip(data.weights())
                .map(|(p, w)| w * (p[d] - mean) * (p[d] - mean))
                .sum::<f64>()
                / total;
            let scott = 3.49 * var.sqrt() * n.powf(-1.0 / 3.0);
            let floor = root_box.width(d) / (1u64 << 20) as f64;
            scott.max(floor)
        })
        .collect()
}

/// Best admissible split of the points `indices` inside `bbox`, or `None`.
///
/// This is the same search the trainer runs at each node.
pub fn best_split(
    data: &Dataset,
    indices: &[usize],
    bbox: &HyperRect,
    total_weight: f64,
    limits: &SplitLimits,
) -> Option<SplitCandidate> {
    let sorted: Vec<Vec<u32>> = (0..data.dims())
        .map(|d| {
            let mut idx: Vec<u32> = indices.iter().map(|&i| i as u32).collect();
            sort_by_coord(data, d, &mut idx);
            idx
        })
        .collect();
    let node_weight = node_weight(data, &sorted[0]);
    search(data, &sorted, bbox, node_weight, total_weight, limits)
}

fn sort_by_coord(data: &Dataset, d: usize, idx: &mut [u32]) {
    idx.sort_unstable_by(|&a, &b| {
        data.coord(a as usize, d)
            .total_cmp(&data.coord(b as usize, d))
            .then(a.cmp(&b))
    });
}

fn node_weight(data: &Dataset, idx: &[u32]) -> f64 {
    idx.iter().map(|&i| data.weight(i as usize)).sum()
}

/// Visits every admissible candidate of dimension `d` in ascending threshold order.
/// The visitor returns `false` to stop early.
#[allow(clippy::too_many_arguments)]
fn scan_dim(
    data: &Dataset,
    sorted: &[u32],
    d: usize,
    bbox: &HyperRect,
    node_weight: f64,
    total_weight: f64,
    limits: &SplitLimits,
    mut visit: impl FnMut(SplitCandidate) -> bool,
) {
    let (lo, hi) = (bbox.lo()[d], bbox.hi()[d]);
    let min_width = limits.min_leaf_width[d];
    let other: f64 = (0..bbox.dims()).filter(|&e| e != d).map(|e| bbox.width(e)).product();
    let mut cum = 0.0;
    for k in 0..sorted.len().saturating_sub(1) {
        let i = sorted[k] as usize;
        cum += data.weight(i);
        let a = data.coord(i, d);
        let b = data.coord(sorted[k + 1] as usize, d);
        if a == b {
            continue;
        }
        let t = 0.5 * a + 0.5 * b;
        if !(a < t && t < b) {
            continue;
        }
        if t - lo < min_width {
            continue;
        }
        if hi - t < min_width {
            break;
        }
        let left_weight = cum;
        let right_weight = (node_weight - cum).max(0.0);
        if left_weight < limits.min_leaf_weight || right_weight < limits.min_leaf_weight {
            continue;
        }
        let score = raw_replacement_error(left_weight, total_weight, other * (t - lo))
            + raw_replacement_error(right_weight, total_weight, other * (hi - t));
        let go_on = visit(SplitCandidate {
            dim: d,
            threshold: t,
            score,
            left_weight,
            right_weight,
        });
        if !go_on {
            break;
        }
    }
}

fn search(
    data: &Dataset,
    sorted: &[Vec<u32>],
    bbox: &HyperRect,
    node_weight: f64,
    total_weight: f64,
    limits: &SplitLimits,
) -> Option<SplitCandidate> {
    if sorted[0].len() < 2 {
        return None;
    }
    // First pass: the minimal score over all dimensions.
    let mut min_score = f64::INFINITY;
    for (d, idx) in sorted.iter().enumerate() {
        scan_dim(data, idx, d, bbox, node_weight, total_weight, limits, |c| {
            if c.score < min_score {
                min_score = c.score;
            }
            true
        });
    }
    if !min_score.is_finite() {
        return None;
    }
    // Second pass: the lexicographically first candidate tied with the minimum.
    let cutoff = min_score + TIE_TOLERANCE * min_score.abs();
    let mut chosen = None;
    for (d, idx) in sorted.iter().enumerate() {
        scan_dim(data, idx, d, bbox, node_weight, total_weight, limits, |c| {
            if c.score <= cutoff {
                chosen = Some(c);
                false
            } else {
                true
            }
        });
        if chosen.is_some() {
            break;
        }
    }
    let best = chosen?;
    let node_r = raw_replacement_error(node_weight, total_weight, bbox.volume());
    if node_r - best.score <= GAIN_TOLERANCE {
        return None;
    }
    Some(best)
}

struct Grower<'a> {
    data: &'a Dataset,
    limits: SplitLimits,
    total_weight: f64,
    max_depth: usize,
}

impl Grower<'_> {
    fn grow(&self, sorted: Vec<Vec<u32>>, bbox: HyperRect, depth: usize) -> TreeNode {
        let weight = node_weight(self.data, &sorted[0]);
        if depth < self.max_depth {
            if let Some(split) = search(self.data, &sorted, &bbox, weight, self.total_weight, &self.limits) {
                let n = sorted[0].len();
                let (left_idx, right_idx) = self.partition(sorted, split.dim, split.threshold);
                let (left_box, right_box) = bbox.split(split.dim, split.threshold);
                let (left, right) = if n >= PARALLEL_MIN_POINTS {
                    rayon::join(
                        || self.grow(left_idx, left_box, depth + 1),
                        || self.grow(right_idx, right_box, depth + 1),
                    )
                } else {
                    (
                        self.grow(left_idx, left_box, depth + 1),
                        self.grow(right_idx, right_box, depth + 1),
                    )
                };
                return TreeNode::internal(split.dim, split.threshold, left, right);
            }
        }
        TreeNode::leaf(weight / (self.total_weight * bbox.volume()))
    }

    /// Stable partition of every sorted index list.
    fn partition(&self, sorted: Vec<Vec<u32>>, dim: usize, threshold: f64) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
        let mut lefts = Vec::with_capacity(sorted.len());
        let mut rights = Vec::with_capacity(sorted.len());
        for (d, idx) in sorted.into_iter().enumerate() {
            if d == dim {
                let cut = idx.partition_point(|&i| self.data.coord(i as usize, dim) < threshold);
                let mut left = idx;
                let right = left.split_off(cut);
                lefts.push(left);
                rights.push(right);
            } else {
                let (left, right): (Vec<u32>, Vec<u32>) = idx
                    .into_iter()
                    .partition(|&i| self.data.coord(i as usize, dim) < threshold);
                lefts.push(left);
                rights.push(right);
            }
        }
        (lefts, rights)
    }
}

/// Grows a density tree on `data`.
///
/// The result is independent of how many rayon workers execute the growth.
pub fn train(data: &Dataset, config: &TrainConfig) -> Result<DensityTree> {
    if data.is_empty() || !(data.total_weight() > 0.0) {
        return Err(DetError::EmptyDataset);
    }
    if data.len() > u32::MAX as usize {
        return Err(DetError::InvalidDataset("too many rows".into()));
    }
    if config.max_depth < 1 {
        return Err(DetError::InvalidConfig("max_depth must be at least 1".into()));
    }
    let root_box = resolve_root_box(data, &config.root_box)?;
    let widths = match &config.min_leaf_width {
        LeafWidth::Auto => auto_min_leaf_width(data, &root_box),
        LeafWidth::PerDim(w) => {
            if w.len() != data.dims() {
                return Err(DetError::DimensionMismatch {
                    expected: data.dims(),
                    got: w.len(),
                });
            }
            w.clone()
        }
    };
    let limits = SplitLimits::new(widths, config.min_leaf_weight)?;
    let total_weight = data.total_weight();

    let sorted: Vec<Vec<u32>> = (0..data.dims())
        .into_par_iter()
        .map(|d| {
            let mut idx: Vec<u32> = (0..data.len() as u32).collect();
            sort_by_coord(data, d, &mut idx);
            idx
        })
        .collect();

    let grower = Grower {
        data,
        limits,
        total_weight,
        max_depth: config.max_depth,
    };
    let root = grower.grow(sorted, root_box.clone(), 0);
    DensityTree::from_parts(data.columns().to_vec(), root_box, root, total_weight)
}

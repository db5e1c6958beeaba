//! The density tree, point evaluation and structural validation.

use std::fmt;

use crate::error::{DetError, Result};
use crate::geometry::HyperRect;

/// A node of a density tree.
///
/// The left child covers `[lo, threshold)` of the parent box in `split_dim`,
/// the right child `[threshold, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Internal {
        split_dim: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        density: f64,
        /// Set by ratio operations on cells where the denominator had no support.
        no_support: bool,
    },
}

impl TreeNode {
    pub fn leaf(density: f64) -> Self {
        TreeNode::Leaf {
            density,
            no_support: false,
        }
    }

    pub fn internal(split_dim: usize, threshold: f64, left: TreeNode, right: TreeNode) -> Self {
        TreeNode::Internal {
            split_dim,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    /// Depth of the deepest leaf; a single leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// A leaf together with the box it covers.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafCell {
    pub bbox: HyperRect,
    pub density: f64,
    pub no_support: bool,
}

/// A trained (or derived) piecewise-constant density estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTree {
    dims: Vec<String>,
    root_box: HyperRect,
    root: TreeNode,
    total_weight: f64,
}

impl DensityTree {
    /// Assembles a tree without checking its invariants; see [`DensityTree::validate`].
    pub fn from_parts(dims: Vec<String>, root_box: HyperRect, root: TreeNode, total_weight: f64) -> Result<Self> {
        if dims.len() != root_box.dims() {
            return Err(DetError::DimensionMismatch {
                expected: dims.len(),
                got: root_box.dims(),
            });
        }
        Ok(DensityTree {
            dims,
            root_box,
            root,
            total_weight,
        })
    }

    /// Like [`DensityTree::from_parts`], but refuses trees with invariant violations.
    pub fn from_parts_validated(
        dims: Vec<String>,
        root_box: HyperRect,
        root: TreeNode,
        total_weight: f64,
    ) -> Result<Self> {
        let tree = Self::from_parts(dims, root_box, root, total_weight)?;
        if let Some(v) = tree.validate().into_iter().next() {
            return Err(DetError::InvalidConfig(v.to_string()));
        }
        Ok(tree)
    }

    pub fn dims(&self) -> &[String] {
        &self.dims
    }

    pub fn dim_count(&self) -> usize {
        self.dims.len()
    }

    pub fn dim_index(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d == name)
    }

    pub fn root_box(&self) -> &HyperRect {
        &self.root_box
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn leaf_count(&self) -> usize {
        self.root.leaf_count()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub(crate) fn with_root(&self, root: TreeNode) -> DensityTree {
        DensityTree {
            dims: self.dims.clone(),
            root_box: self.root_box.clone(),
            root,
            total_weight: self.total_weight,
        }
    }

    /// Density at `point`: the value of the leaf containing it, or 0 outside the root box.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dims.len() {
            return Err(DetError::DimensionMismatch {
                expected: self.dims.len(),
                got: point.len(),
            });
        }
        Ok(self.evaluate_unchecked(point))
    }

    /// [`DensityTree::evaluate`] without the length check.
    #[inline]
    pub fn evaluate_unchecked(&self, point: &[f64]) -> f64 {
        match self.locate(point) {
            Some(TreeNode::Leaf { density, .. }) => *density,
            _ => 0.0,
        }
    }

    /// The leaf node containing `point`, if the point is inside the root box.
    pub fn locate(&self, point: &[f64]) -> Option<&TreeNode> {
        if !self.root_box.contains_closed(point) {
            return None;
        }
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { .. } => return Some(node),
                TreeNode::Internal {
                    split_dim,
                    threshold,
                    left,
                    right,
                } => {
                    node = if point[*split_dim] < *threshold { left } else { right };
                }
            }
        }
    }

    /// All leaves with their boxes, in preorder.
    pub fn leaves(&self) -> Vec<LeafCell> {
        let mut out = Vec::with_capacity(self.leaf_count());
        let mut bbox = self.root_box.clone();
        collect_leaves(&self.root, &mut bbox, &mut out);
        out
    }

    /// Returns every invariant violation; empty for a well-formed tree.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.root_box.is_finite() || (0..self.root_box.dims()).any(|d| !(self.root_box.width(d) > 0.0)) {
            out.push(Violation {
                path: String::new(),
                kind: ViolationKind::InvalidRootBox,
            });
            return out;
        }
        if !(self.root_box.volume() > 0.0 && self.root_box.volume().is_finite()) {
            out.push(Violation {
                path: String::new(),
                kind: ViolationKind::InvalidRootBox,
            });
        }
        if !(self.total_weight > 0.0 && self.total_weight.is_finite()) {
            out.push(Violation {
                path: String::new(),
                kind: ViolationKind::InvalidTotalWeight,
            });
        }
        let mut bbox = self.root_box.clone();
        let mut path = String::new();
        validate_node(&self.root, &mut bbox, &mut path, &mut out);
        out
    }
}

fn collect_leaves(node: &TreeNode, bbox: &mut HyperRect, out: &mut Vec<LeafCell>) {
    match node {
        TreeNode::Leaf { density, no_support } => out.push(LeafCell {
            bbox: bbox.clone(),
            density: *density,
            no_support: *no_support,
        }),
        TreeNode::Internal {
            split_dim,
            threshold,
            left,
            right,
        } => {
            let d = *split_dim;
            let (lo, hi) = (bbox.lo()[d], bbox.hi()[d]);
            bbox.set_hi(d, *threshold);
            collect_leaves(left, bbox, out);
            bbox.set_hi(d, hi);
            bbox.set_lo(d, *threshold);
            collect_leaves(right, bbox, out);
            bbox.set_lo(d, lo);
        }
    }
}

fn validate_node(node: &TreeNode, bbox: &mut HyperRect, path: &mut String, out: &mut Vec<Violation>) {
    match node {
        TreeNode::Leaf { density, .. } => {
            if density.is_nan() || density.is_infinite() {
                out.push(Violation {
                    path: path.clone(),
                    kind: ViolationKind::NonFiniteDensity,
                });
            } else if *density < 0.0 {
                out.push(Violation {
                    path: path.clone(),
                    kind: ViolationKind::NegativeDensity,
                });
            }
        }
        TreeNode::Internal {
            split_dim,
            threshold,
            left,
            right,
        } => {
            let d = *split_dim;
            if d >= bbox.dims() {
                out.push(Violation {
                    path: path.clone(),
                    kind: ViolationKind::SplitDimOutOfRange,
                });
                return;
            }
            let (lo, hi) = (bbox.lo()[d], bbox.hi()[d]);
            if !(lo < *threshold && *threshold < hi) {
                out.push(Violation {
                    path: path.clone(),
                    kind: ViolationKind::ThresholdNotInterior,
                });
                // Children boxes would be empty or inverted; stop descending.
                return;
            }
            bbox.set_hi(d, *threshold);
            path.push('L');
            validate_node(left, bbox, path, out);
            path.pop();
            bbox.set_hi(d, hi);
            bbox.set_lo(d, *threshold);
            path.push('R');
            validate_node(right, bbox, path, out);
            path.pop();
            bbox.set_lo(d, lo);
        }
    }
}

/// Plug-in density of a cell: `weight_in_leaf / (total_weight * leaf_volume)`.
pub fn leaf_density(weight_in_leaf: f64, total_weight: f64, leaf_volume: f64) -> Result<f64> {
    if !(leaf_volume > 0.0) || !leaf_volume.is_finite() {
        return Err(DetError::InvalidVolume(leaf_volume));
    }
    if !(total_weight > 0.0) || !total_weight.is_finite() {
        return Err(DetError::InvalidWeight(format!("total weight {total_weight}")));
    }
    if !(weight_in_leaf >= 0.0) || !weight_in_leaf.is_finite() {
        return Err(DetError::InvalidWeight(format!("leaf weight {weight_in_leaf}")));
    }
    Ok(weight_in_leaf / (total_weight * leaf_volume))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    InvalidRootBox,
    InvalidTotalWeight,
    SplitDimOutOfRange,
    ThresholdNotInterior,
    NegativeDensity,
    NonFiniteDensity,
}

/// One broken invariant. `path` spells the route from the root as `L`/`R` steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() { "root" } else { &self.path };
        write!(f, "{:?} at {}", self.kind, path)
    }
}

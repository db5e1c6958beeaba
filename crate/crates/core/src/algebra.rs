//! Tree algebra: leafwise scalar maps, alignment of two partitions, leafwise
//! binary operations, sibling compaction and efficiency (ratio) trees.

use crate::error::{DetError, Result};
use crate::geometry::HyperRect;
use crate::tree::{DensityTree, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompactionMode {
    Absolute,
    Relative,
}

/// Sibling leaves whose values differ by at most `tolerance` are merged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompactionPolicy {
    pub tolerance: f64,
    pub mode: CompactionMode,
}

impl CompactionPolicy {
    pub fn new(tolerance: f64, mode: CompactionMode) -> Result<Self> {
        if !(tolerance >= 0.0) {
            return Err(DetError::InvalidConfig(format!("compaction tolerance {tolerance} must be >= 0")));
        }
        Ok(CompactionPolicy { tolerance, mode })
    }

    /// Merge only exactly-equal siblings.
    pub fn exact() -> Self {
        CompactionPolicy {
            tolerance: 0.0,
            mode: CompactionMode::Absolute,
        }
    }

    fn mergeable(&self, a: f64, b: f64) -> bool {
        if a == b {
            return true;
        }
        let diff = (a - b).abs();
        match self.mode {
            CompactionMode::Absolute => diff <= self.tolerance,
            CompactionMode::Relative => diff <= self.tolerance * a.abs().max(b.abs()),
        }
    }
}

impl Default for CompactionPolicy {
    fn default() -> Self {
        CompactionPolicy {
            tolerance: 1e-6,
            mode: CompactionMode::Relative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarOp {
    Scale(f64),
    Shift(f64),
    ClampMin(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    /// `max(a - b, 0)`
    SubtractClamped,
    Multiply,
    /// `0/0 -> 0` flagged as no-support; `x/0` with `x > 0` is an error.
    Divide,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LeafValue {
    density: f64,
    no_support: bool,
}

/// Applies `op` to every leaf value; the structure is unchanged.
pub fn scalar_map(tree: &DensityTree, op: ScalarOp) -> Result<DensityTree> {
    match op {
        ScalarOp::Scale(k) if !(k >= 0.0) || !k.is_finite() => return Err(DetError::NegativeScale(k)),
        ScalarOp::Shift(k) | ScalarOp::ClampMin(k) if !k.is_finite() => {
            return Err(DetError::InvalidConfig(format!("non-finite scalar {k}")))
        }
        _ => {}
    }
    let root = map_leaves(tree.root(), &mut |v| {
        let density = match op {
            ScalarOp::Scale(k) => v * k,
            ScalarOp::Shift(k) => v + k,
            ScalarOp::ClampMin(k) => v.max(k),
        };
        if density < 0.0 {
            return Err(DetError::NegativeValue(density));
        }
        Ok(density)
    })?;
    Ok(tree.with_root(root))
}

fn map_leaves(node: &TreeNode, f: &mut impl FnMut(f64) -> Result<f64>) -> Result<TreeNode> {
    Ok(match node {
        TreeNode::Leaf { density, no_support } => TreeNode::Leaf {
            density: f(*density)?,
            no_support: *no_support,
        },
        TreeNode::Internal {
            split_dim,
            threshold,
            left,
            right,
        } => TreeNode::internal(*split_dim, *threshold, map_leaves(left, f)?, map_leaves(right, f)?),
    })
}

fn check_compatible(a: &DensityTree, b: &DensityTree) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(DetError::IncompatibleSupport(format!(
            "dimensions {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    if a.root_box() != b.root_box() {
        return Err(DetError::IncompatibleSupport("root boxes differ".into()));
    }
    Ok(())
}

/// Refines `a` along the leaf boundaries of `b`, keeping `a`'s values.
pub fn align(a: &DensityTree, b: &DensityTree) -> Result<DensityTree> {
    check_compatible(a, b)?;
    let mut bbox = a.root_box().clone();
    let root = overlay(a.root(), b.root(), &mut bbox, &mut |va, _| Ok(va))?;
    Ok(a.with_root(root))
}

/// Overlays the partitions of `a` and `b`, producing one leaf per non-empty
/// intersection of an `a` leaf with a `b` leaf, valued by `f(a_leaf, b_leaf)`.
fn overlay(
    a: &TreeNode,
    b: &TreeNode,
    bbox: &mut HyperRect,
    f: &mut impl FnMut(LeafValue, LeafValue) -> Result<LeafValue>,
) -> Result<TreeNode> {
    let b = skip_outside(b, bbox);
    match a {
        TreeNode::Internal {
            split_dim,
            threshold,
            left,
            right,
        } => {
            let d = *split_dim;
            let (lo, hi) = (bbox.lo()[d], bbox.hi()[d]);
            bbox.set_hi(d, *threshold);
            let l = overlay(left, b, bbox, f);
            bbox.set_hi(d, hi);
            let l = l?;
            bbox.set_lo(d, *threshold);
            let r = overlay(right, b, bbox, f);
            bbox.set_lo(d, lo);
            Ok(TreeNode::internal(d, *threshold, l, r?))
        }
        TreeNode::Leaf { density, no_support } => {
            let va = LeafValue {
                density: *density,
                no_support: *no_support,
            };
            refine(va, b, bbox, f)
        }
    }
}

/// Descends `b` past splits that do not cut `bbox`.
fn skip_outside<'b>(mut b: &'b TreeNode, bbox: &HyperRect) -> &'b TreeNode {
    while let TreeNode::Internal {
        split_dim,
        threshold,
        left,
        right,
    } = b
    {
        let (lo, hi) = (bbox.lo()[*split_dim], bbox.hi()[*split_dim]);
        if *threshold <= lo {
            b = right;
        } else if *threshold >= hi {
            b = left;
        } else {
            break;
        }
    }
    b
}

fn refine(
    va: LeafValue,
    b: &TreeNode,
    bbox: &mut HyperRect,
    f: &mut impl FnMut(LeafValue, LeafValue) -> Result<LeafValue>,
) -> Result<TreeNode> {
    let b = skip_outside(b, bbox);
    match b {
        TreeNode::Leaf { density, no_support } => {
            let v = f(
                va,
                LeafValue {
                    density: *density,
                    no_support: *no_support,
                },
            )?;
            Ok(TreeNode::Leaf {
                density: v.density,
                no_support: v.no_support,
            })
        }
        TreeNode::Internal {
            split_dim,
            threshold,
            left,
            right,
        } => {
            // skip_outside guarantees the threshold is strictly inside bbox.
            let d = *split_dim;
            let (lo, hi) = (bbox.lo()[d], bbox.hi()[d]);
            bbox.set_hi(d, *threshold);
            let l = refine(va, left, bbox, f);
            bbox.set_hi(d, hi);
            let l = l?;
            bbox.set_lo(d, *threshold);
            let r = refine(va, right, bbox, f);
            bbox.set_lo(d, lo);
            Ok(TreeNode::internal(d, *threshold, l, r?))
        }
    }
}

fn apply(op: BinaryOp, a: LeafValue, b: LeafValue) -> Result<LeafValue> {
    let no_support = a.no_support || b.no_support;
    let (x, y) = (a.density, b.density);
    let density = match op {
        BinaryOp::Add => x + y,
        BinaryOp::SubtractClamped => (x - y).max(0.0),
        BinaryOp::Multiply => x * y,
        BinaryOp::Divide => {
            if y == 0.0 {
                if x == 0.0 {
                    return Ok(LeafValue {
                        density: 0.0,
                        no_support: true,
                    });
                }
                return Err(DetError::InconsistentRatio { numerator: x });
            }
            x / y
        }
    };
    Ok(LeafValue { density, no_support })
}

/// Aligns `a` to `b`, applies `op` leafwise, then compacts with `policy`.
pub fn combine(a: &DensityTree, b: &DensityTree, op: BinaryOp, policy: CompactionPolicy) -> Result<DensityTree> {
    check_compatible(a, b)?;
    let mut bbox = a.root_box().clone();
    let root = overlay(a.root(), b.root(), &mut bbox, &mut |va, vb| apply(op, va, vb))?;
    Ok(compact(&a.with_root(root), policy))
}

/// Merges sibling leaves whose values are within the policy tolerance, bottom-up,
/// into a leaf carrying their volume-weighted mean. Exactly-equal siblings
/// keep their common value bit-for-bit.
pub fn compact(tree: &DensityTree, policy: CompactionPolicy) -> DensityTree {
    let mut bbox = tree.root_box().clone();
    tree.with_root(compact_node(tree.root(), &mut bbox, &policy))
}

fn compact_node(node: &TreeNode, bbox: &mut HyperRect, policy: &CompactionPolicy) -> TreeNode {
    match node {
        TreeNode::Leaf { .. } => node.clone(),
        TreeNode::Internal {
            split_dim,
            threshold,
            left,
            right,
        } => {
            let d = *split_dim;
            let t = *threshold;
            let (lo, hi) = (bbox.lo()[d], bbox.hi()[d]);
            bbox.set_hi(d, t);
            let l = compact_node(left, bbox, policy);
            bbox.set_hi(d, hi);
            bbox.set_lo(d, t);
            let r = compact_node(right, bbox, policy);
            bbox.set_lo(d, lo);
            if let (
                TreeNode::Leaf {
                    density: vl,
                    no_support: nl,
                },
                TreeNode::Leaf {
                    density: vr,
                    no_support: nr,
                },
            ) = (&l, &r)
            {
                if nl == nr && policy.mergeable(*vl, *vr) {
                    let density = if vl == vr {
                        *vl
                    } else {
                        // Siblings share every extent except along d.
                        let (wl, wr) = (t - lo, hi - t);
                        ((vl * wl + vr * wr) / (wl + wr)).clamp(vl.min(*vr), vl.max(*vr))
                    };
                    return TreeNode::Leaf {
                        density,
                        no_support: *nl,
                    };
                }
            }
            TreeNode::internal(d, t, l, r)
        }
    }
}

/// Per-cell pass probability `(pass_weight / all_weight) · t_pass / t_all`,
/// clamped to `[0, 1]`. Cells where `t_all` vanishes hold 0 and are flagged
/// as no-support.
pub fn efficiency_tree(
    t_pass: &DensityTree,
    t_all: &DensityTree,
    pass_weight: f64,
    all_weight: f64,
    policy: CompactionPolicy,
) -> Result<DensityTree> {
    check_compatible(t_pass, t_all)?;
    if !(all_weight > 0.0) || !(pass_weight >= 0.0) || pass_weight > all_weight {
        return Err(DetError::InvalidWeight(format!(
            "pass weight {pass_weight} must lie in [0, all weight {all_weight}] with all weight > 0"
        )));
    }
    let fraction = pass_weight / all_weight;
    let mut bbox = t_pass.root_box().clone();
    let root = overlay(t_pass.root(), t_all.root(), &mut bbox, &mut |vp, va| {
        if va.density == 0.0 {
            return Ok(LeafValue {
                density: 0.0,
                no_support: true,
            });
        }
        let density = (fraction * vp.density / va.density).clamp(0.0, 1.0);
        Ok(LeafValue {
            density,
            no_support: false,
        })
    })?;
    Ok(compact(&t_pass.with_root(root), policy))
}

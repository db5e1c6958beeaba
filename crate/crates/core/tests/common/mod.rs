//! Test oracles that do not share code paths with the library internals.
#![allow(dead_code)]

use det::geometry::HyperRect;
use det::train::{SplitCandidate, TrainConfig};
use det::{Dataset, DensityTree, TreeNode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}

/// Random dataset: uniform, clustered or lattice coordinates (the latter
/// produce many duplicates), optionally with random weights.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    let kind = rng.gen_range(0..3);
    let weighted = rng.gen_bool(0.3);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d)
            .map(|_| match kind {
                0 => rng.gen::<f64>(),
                1 => {
                    let c = if rng.gen_bool(0.5) { 0.25 } else { 0.7 };
                    (c + 0.05 * (rng.gen::<f64>() - 0.5)).clamp(0.0, 1.0)
                }
                _ => rng.gen_range(0..8) as f64 / 8.0,
            })
            .collect();
        rows.push(row);
    }
    let weights = weighted.then(|| (0..n).map(|_| rng.gen_range(0.1..3.0)).collect());
    Dataset::new(names(d), rows, weights).unwrap()
}

/// A random training configuration for the dataset dimensions.
pub fn random_config(rng: &mut ChaCha8Rng, d: usize) -> TrainConfig {
    let widths = (0..d).map(|_| 10f64.powf(rng.gen_range(-4.0..-0.7))).collect();
    let mut cfg = TrainConfig::default().with_min_leaf_width(widths);
    if rng.gen_bool(0.3) {
        cfg = cfg.with_min_leaf_weight(rng.gen_range(0.0..3.0));
    }
    cfg
}

pub fn random_tree(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Dataset, DensityTree) {
    let data = random_dataset(rng, n, d);
    let cfg = random_config(rng, d);
    let tree = det::train::train(&data, &cfg).unwrap();
    (data, tree)
}

/// Leaf boxes with densities, listed from an independent recursion.
pub fn leaf_boxes(tree: &DensityTree) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    fn rec(node: &TreeNode, lo: Vec<f64>, hi: Vec<f64>, out: &mut Vec<(Vec<f64>, Vec<f64>, f64)>) {
        match node {
            TreeNode::Leaf { density, .. } => out.push((lo, hi, *density)),
            TreeNode::Internal {
                split_dim,
                threshold,
                left,
                right,
            } => {
                let mut lhi = hi.clone();
                lhi[*split_dim] = *threshold;
                let mut rlo = lo.clone();
                rlo[*split_dim] = *threshold;
                rec(left, lo, lhi, out);
                rec(right, rlo, hi, out);
            }
        }
    }
    let mut out = Vec::new();
    let rb = tree.root_box();
    rec(tree.root(), rb.lo().to_vec(), rb.hi().to_vec(), &mut out);
    out
}

/// Membership in a leaf box under the half-open convention with a closed root upper edge.
pub fn in_leaf(lo: &[f64], hi: &[f64], root_hi: &[f64], p: &[f64]) -> bool {
    (0..p.len()).all(|d| lo[d] <= p[d] && (p[d] < hi[d] || (p[d] == hi[d] && hi[d] == root_hi[d])))
}

/// Point evaluation by scanning every leaf.
pub fn brute_evaluate(leaves: &[(Vec<f64>, Vec<f64>, f64)], root_hi: &[f64], p: &[f64]) -> (f64, usize) {
    let mut hits = 0;
    let mut value = 0.0;
    for (lo, hi, v) in leaves {
        if in_leaf(lo, hi, root_hi, p) {
            hits += 1;
            value = *v;
        }
    }
    (value, hits)
}

fn overlap(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (b.min(d) - a.max(c)).max(0.0)
}

/// Slice integral by enumerating all leaves. `fixed[d] = Some(v)` fixes dimension d.
pub fn brute_slice(
    tree: &DensityTree,
    fixed: &[Option<f64>],
    free_lo: &[f64],
    free_hi: &[f64],
) -> f64 {
    let root_hi = tree.root_box().hi().to_vec();
    let mut sum = 0.0;
    for (lo, hi, v) in leaf_boxes(tree) {
        let mut vol = 1.0;
        let mut inside = true;
        for d in 0..lo.len() {
            match fixed[d] {
                Some(x) => {
                    if !(lo[d] <= x && (x < hi[d] || (x == hi[d] && hi[d] == root_hi[d]))) {
                        inside = false;
                    }
                }
                None => vol *= overlap(lo[d], hi[d], free_lo[d], free_hi[d]),
            }
        }
        if inside {
            sum += v * vol;
        }
    }
    sum
}

/// Box integral by enumerating all leaves.
pub fn brute_box(tree: &DensityTree, lo: &[f64], hi: &[f64]) -> f64 {
    leaf_boxes(tree)
        .iter()
        .map(|(l, h, v)| v * (0..l.len()).map(|d| overlap(l[d], h[d], lo[d], hi[d])).product::<f64>())
        .sum()
}

/// Exhaustive best-split search: every (dim, midpoint) candidate, scored from
/// scratch with child boxes and direct weight sums.
pub fn exhaustive_best_split(
    data: &Dataset,
    indices: &[usize],
    bbox: &HyperRect,
    total_weight: f64,
    min_width: &[f64],
    min_weight: f64,
) -> Option<SplitCandidate> {
    let r = |w: f64, v: f64| -(w * w) / (total_weight * total_weight * v);
    let vol = |lo: &[f64], hi: &[f64]| (0..lo.len()).map(|d| hi[d] - lo[d]).product::<f64>();
    let node_w: f64 = indices.iter().map(|&i| data.weight(i)).sum();
    let mut cands: Vec<SplitCandidate> = Vec::new();
    for d in 0..data.dims() {
        let mut vals: Vec<f64> = indices.iter().map(|&i| data.point(i)[d]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for pair in vals.windows(2) {
            let t = (pair[0] + pair[1]) / 2.0;
            if !(pair[0] < t && t < pair[1]) {
                continue;
            }
            if t - bbox.lo()[d] < min_width[d] || bbox.hi()[d] - t < min_width[d] {
                continue;
            }
            let lw: f64 = indices.iter().filter(|&&i| data.point(i)[d] < t).map(|&i| data.weight(i)).sum();
            let rw: f64 = indices.iter().filter(|&&i| data.point(i)[d] >= t).map(|&i| data.weight(i)).sum();
            if lw < min_weight || rw < min_weight {
                continue;
            }
            let mut lhi = bbox.hi().to_vec();
            lhi[d] = t;
            let mut rlo = bbox.lo().to_vec();
            rlo[d] = t;
            let score = r(lw, vol(bbox.lo(), &lhi)) + r(rw, vol(&rlo, bbox.hi()));
            cands.push(SplitCandidate {
                dim: d,
                threshold: t,
                score,
                left_weight: lw,
                right_weight: rw,
            });
        }
    }
    let min = cands.iter().map(|c| c.score).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    let best = cands
        .iter()
        .filter(|c| c.score <= min + 1e-12 * min.abs())
        .min_by(|a, b| (a.dim, a.threshold).partial_cmp(&(b.dim, b.threshold)).unwrap())?;
    let node_r = r(node_w, vol(bbox.lo(), bbox.hi()));
    if node_r - best.score <= 1e-12 {
        return None;
    }
    Some(*best)
}

/// Balanced tree on the unit cube with `2^levels_per_dim` cells per dimension,
/// bisecting dimensions round-robin, with random leaf densities.
pub fn grid_tree(rng: &mut ChaCha8Rng, dims: usize, levels_per_dim: usize) -> DensityTree {
    fn build(
        rng: &mut ChaCha8Rng,
        lo: &mut Vec<f64>,
        hi: &mut Vec<f64>,
        depth: usize,
        max_depth: usize,
        dims: usize,
    ) -> TreeNode {
        if depth == max_depth {
            return TreeNode::leaf(rng.gen_range(0.0..2.0));
        }
        let d = depth % dims;
        let t = 0.5 * (lo[d] + hi[d]);
        let old_hi = hi[d];
        hi[d] = t;
        let left = build(rng, lo, hi, depth + 1, max_depth, dims);
        hi[d] = old_hi;
        let old_lo = lo[d];
        lo[d] = t;
        let right = build(rng, lo, hi, depth + 1, max_depth, dims);
        lo[d] = old_lo;
        TreeNode::internal(d, t, left, right)
    }
    let mut lo = vec![0.0; dims];
    let mut hi = vec![1.0; dims];
    let root = build(rng, &mut lo, &mut hi, 0, dims * levels_per_dim, dims);
    DensityTree::from_parts(names(dims), HyperRect::unit(dims), root, 1.0).unwrap()
}

/// Random point inside the tree's root box.
pub fn random_point(rng: &mut ChaCha8Rng, tree: &DensityTree) -> Vec<f64> {
    let rb = tree.root_box();
    (0..rb.dims()).map(|d| rng.gen_range(rb.lo()[d]..rb.hi()[d])).collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

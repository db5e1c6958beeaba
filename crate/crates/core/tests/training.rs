mod common;

use common::*;
use det::integrate::integrate_box;
use det::train::{best_split, replacement_error, train, SplitLimits, TrainConfig};
use det::{Dataset, HyperRect, TreeNode};
use rand::Rng;

/// Leaf and internal-node weights recomputed from the data.
fn node_weight(data: &Dataset, lo: &[f64], hi: &[f64], root_hi: &[f64]) -> f64 {
    data.points()
        .zip(data.weights())
        .filter(|(p, _)| in_leaf(lo, hi, root_hi, p))
        .map(|(_, w)| *w)
        .sum()
}

fn check_splits(
    node: &TreeNode,
    lo: Vec<f64>,
    hi: Vec<f64>,
    data: &Dataset,
    root_hi: &[f64],
    min_width: &[f64],
    min_weight: f64,
) {
    let total = data.total_weight();
    let vol = |lo: &[f64], hi: &[f64]| (0..lo.len()).map(|d| hi[d] - lo[d]).product::<f64>();
    match node {
        TreeNode::Leaf { .. } => {
            for d in 0..lo.len() {
                assert!(hi[d] - lo[d] >= min_width[d], "leaf narrower than floor in dim {d}");
            }
        }
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
            let w = node_weight(data, &lo, &hi, root_hi);
            let wl = node_weight(data, &lo, &lhi, root_hi);
            let wr = node_weight(data, &rlo, &hi, root_hi);
            assert!(wl >= min_weight && wr >= min_weight);
            let r = replacement_error(w, total, vol(&lo, &hi)).unwrap();
            let rl = replacement_error(wl, total, vol(&lo, &lhi)).unwrap();
            let rr = replacement_error(wr, total, vol(&rlo, &hi)).unwrap();
            assert!(rl + rr <= r, "split increased the replacement error");
            check_splits(left, lo, lhi, data, root_hi, min_width, min_weight);
            check_splits(right, rlo, hi, data, root_hi, min_width, min_weight);
        }
    }
}

#[test]
fn accepted_splits_lower_the_error_and_respect_floors() {
    let mut r = rng(21);
    for _ in 0..20 {
        let n = r.gen_range(2..300);
        let d = r.gen_range(1..4);
        let data = random_dataset(&mut r, n, d);
        let widths: Vec<f64> = (0..d).map(|_| r.gen_range(0.005..0.2)).collect();
        let min_weight = if r.gen_bool(0.5) { r.gen_range(0.0..4.0) } else { 0.0 };
        let cfg = TrainConfig::default()
            .with_min_leaf_width(widths.clone())
            .with_min_leaf_weight(min_weight);
        let tree = train(&data, &cfg).unwrap();
        let rb = tree.root_box();
        check_splits(tree.root(), rb.lo().to_vec(), rb.hi().to_vec(), &data, rb.hi(), &widths, min_weight);
        for leaf in leaf_boxes(&tree) {
            let w = node_weight(&data, &leaf.0, &leaf.1, rb.hi());
            if tree.leaf_count() > 1 {
                assert!(w >= min_weight);
            }
        }
    }
}

#[test]
fn best_split_matches_exhaustive_oracle_on_subsets() {
    let mut r = rng(22);
    for _ in 0..100 {
        let n = r.gen_range(1..40);
        let d = r.gen_range(1..4);
        let data = random_dataset(&mut r, n, d);
        let idx: Vec<usize> = (0..n).filter(|_| r.gen_bool(0.7)).collect();
        if idx.is_empty() {
            continue;
        }
        let bbox = HyperRect::new(vec![-0.1; d], vec![1.1; d]).unwrap();
        let widths: Vec<f64> = (0..d).map(|_| r.gen_range(0.001..0.3)).collect();
        let limits = SplitLimits::new(widths.clone(), 0.0).unwrap();
        let total = data.total_weight();
        let got = best_split(&data, &idx, &bbox, total, &limits);
        let want = exhaustive_best_split(&data, &idx, &bbox, total, &widths, 0.0);
        match (got, want) {
            (None, None) => {}
            (Some(g), Some(w)) => {
                assert_eq!((g.dim, g.threshold), (w.dim, w.threshold));
                assert!(rel_close(g.score, w.score, 1e-12));
            }
            (g, w) => panic!("mismatch: {g:?} vs {w:?}"),
        }
    }
}

#[test]
fn training_is_reproducible_across_worker_counts() {
    let mut r = rng(23);
    let data = random_dataset(&mut r, 20_000, 3);
    let cfg = TrainConfig::default();
    let base = train(&data, &cfg).unwrap();
    for jobs in [1, 3, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().unwrap();
        let t = pool.install(|| train(&data, &cfg)).unwrap();
        assert_eq!(t, base);
    }
}

#[test]
fn depth_is_bounded() {
    let mut r = rng(24);
    let data = random_dataset(&mut r, 3000, 2);
    for max_depth in [1, 2, 5, 9] {
        let cfg = TrainConfig::default()
            .with_min_leaf_width(vec![1e-6, 1e-6])
            .with_max_depth(max_depth);
        assert!(train(&data, &cfg).unwrap().depth() <= max_depth);
    }
}

/// Exact ISE against the uniform density on [0,1]: ∫(f̂ - 1)² over [0,1]
/// plus ∫f̂² outside it.
fn uniform_ise(tree: &det::DensityTree) -> f64 {
    let mut ise = 0.0;
    let mut covered = 0.0;
    for (lo, hi, v) in leaf_boxes(tree) {
        let inside = (hi[0].min(1.0) - lo[0].max(0.0)).max(0.0);
        let outside = (hi[0] - lo[0]) - inside;
        ise += (v - 1.0).powi(2) * inside + v * v * outside;
        covered += inside;
    }
    ise + (1.0 - covered)
}

#[test]
fn wider_floor_gives_lower_ise_on_uniform_sample() {
    let mut r = rng(25);
    let rows: Vec<Vec<f64>> = (0..10_000).map(|_| vec![r.gen::<f64>()]).collect();
    let data = Dataset::new(vec!["x".into()], rows, None).unwrap();
    let coarse = train(&data, &TrainConfig::default().with_min_leaf_width(vec![0.05])).unwrap();
    let fine = train(&data, &TrainConfig::default().with_min_leaf_width(vec![0.001])).unwrap();
    for leaf in coarse.leaves() {
        assert!((0.5..=1.5).contains(&leaf.density), "leaf density {}", leaf.density);
    }
    assert!(uniform_ise(&coarse) < uniform_ise(&fine));
    assert!(rel_close(integrate_box(&coarse, coarse.root_box()).unwrap(), 1.0, 1e-9));
}

#[test]
fn duplicate_heavy_node_becomes_leaf() {
    let data = Dataset::new(names(2), vec![vec![0.3, 0.3]; 50], None).unwrap();
    let t = train(&data, &TrainConfig::default()).unwrap();
    assert_eq!(t.leaf_count(), 1);
}

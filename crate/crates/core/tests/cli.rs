use std::path::Path;
use std::process::Command;

use det::io::{load_tree, save_tree};
use det::tree::TreeNode;
use det::{DensityTree, HyperRect};
use proptest::prelude::*;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("det").chain(args.iter().copied());
    let code = det::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn four_points(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("data.csv");
    std::fs::write(&path, "x\n0.1\n0.2\n0.8\n0.9\n").unwrap();
    path
}

fn two_leaf(dir: &Path) -> std::path::PathBuf {
    let root = TreeNode::internal(0, 0.5, TreeNode::leaf(1.5), TreeNode::leaf(0.5));
    let tree = DensityTree::from_parts(vec!["x".into()], HyperRect::unit(1), root, 4.0).unwrap();
    let path = dir.join("two.det");
    save_tree(&tree, &path).unwrap();
    path
}

#[test]
fn train_four_points_with_fine_floor() {
    let dir = tempfile::tempdir().unwrap();
    let data = four_points(dir.path());
    let model = dir.path().join("m.det");
    let (code, _, err) = run(&[
        "train", "--in", s(&data), "--min-width", "0.01", "--box", "0:1", "--out", s(&model),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(load_tree(&model).unwrap().leaf_count(), 3);

    let (code, out, _) = run(&["integrate", "--model", s(&model)]);
    assert_eq!(code, 0);
    assert!((out.trim().parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn train_four_points_auto_floor_is_one_leaf() {
    let dir = tempfile::tempdir().unwrap();
    let data = four_points(dir.path());
    let model = dir.path().join("m.det");
    let (code, _, _) = run(&["train", "--in", s(&data), "--out", s(&model)]);
    assert_eq!(code, 0);
    assert_eq!(load_tree(&model).unwrap().leaf_count(), 1);
}

#[test]
fn eval_integrate_project_on_two_leaf_tree() {
    let dir = tempfile::tempdir().unwrap();
    let model = two_leaf(dir.path());
    let (code, out, _) = run(&["eval", "--model", s(&model), "--point", "0.2"]);
    assert_eq!((code, out.as_str()), (0, "1.5\n"));
    let (_, out, _) = run(&["integrate", "--model", s(&model), "--region", "0.25:0.75"]);
    assert_eq!(out, "0.5\n");
    let hist = dir.path().join("h.csv");
    let (code, _, _) = run(&["project", "--model", s(&model), "--dim", "x", "--bins", "2", "--out", s(&hist)]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(&hist).unwrap(), "bin_lo,bin_hi,density\n0,0.5,1.5\n0.5,1,0.5\n");
    let (code, out, _) = run(&["info", "--model", s(&model)]);
    assert_eq!(code, 0);
    assert!(out.contains("leaves: 2"));
}

#[test]
fn combine_ratio_slice_sample() {
    let dir = tempfile::tempdir().unwrap();
    let root = TreeNode::internal(1, 0.5, TreeNode::leaf(1.8), TreeNode::leaf(0.2));
    let tree = DensityTree::from_parts(vec!["x".into(), "y".into()], HyperRect::unit(2), root, 10.0).unwrap();
    let model = dir.path().join("t.det");
    save_tree(&tree, &model).unwrap();

    let sum = dir.path().join("sum.det");
    let (code, _, _) = run(&["combine", "--a", s(&model), "--b", s(&model), "--op", "add", "--out", s(&sum)]);
    assert_eq!(code, 0);
    assert_eq!(load_tree(&sum).unwrap().evaluate(&[0.1, 0.1]).unwrap(), 3.6);

    let eff = dir.path().join("eff.det");
    let (code, _, err) = run(&[
        "ratio", "--pass", s(&model), "--all", s(&model), "--pass-weight", "5", "--all-weight", "10", "--out", s(&eff),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(load_tree(&eff).unwrap().evaluate(&[0.1, 0.9]).unwrap(), 0.5);

    let (code, out, _) = run(&["slice", "--model", s(&model), "--fix", "x=0.3"]);
    assert_eq!(code, 0);
    assert!((out.trim().parse::<f64>().unwrap() - 1.0).abs() < 1e-15);

    let draws = dir.path().join("y.csv");
    let (code, _, _) = run(&["sample", "--model", s(&model), "--fix", "x=0.3", "--n", "5", "--seed", "1", "--out", s(&draws)]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&draws).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert_eq!(text.lines().next(), Some("y"));
}

#[test]
fn model_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let model = two_leaf(dir.path());
    let (code, _, err) = run(&["eval", "--model", s(&model), "--point", "0.2,0.3"]);
    assert_eq!(code, 2);
    assert!(err.contains("dimension"));
    let (code, _, _) = run(&["info", "--model", s(&dir.path().join("missing.det"))]);
    assert_eq!(code, 2);
}

#[test]
fn binary_uses_same_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let model = two_leaf(dir.path());
    let bin = env!("CARGO_BIN_EXE_det");
    let ok = Command::new(bin).args(["eval", "--model", s(&model), "--point", "0.7"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&ok.stdout), "0.5\n");
    let bad = Command::new(bin).args(["eval", "--model"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn malformed_flags_are_usage_errors(
        junk in "[a-z=,:]{0,8}",
        which in 0usize..5,
    ) {
        // The model path does not exist: reaching module code would exit 2.
        let missing = "/nonexistent/model.det";
        let bad_num = format!("{junk}x");
        let args: Vec<String> = match which {
            0 => vec!["eval".into(), "--model".into(), missing.into(), "--point".into(), bad_num],
            1 => vec!["integrate".into(), "--model".into(), missing.into(), "--region".into(), format!("{junk}!")],
            2 => vec!["slice".into(), "--model".into(), missing.into(), "--fix".into(), format!("{junk}=")],
            3 => vec!["project".into(), "--model".into(), missing.into(), "--dim".into(), "x".into(), "--bins".into(), "0".into(), "--out".into(), "/tmp/x".into()],
            _ => vec![format!("--{junk}bogus")],
        };
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let (code, _, _) = run(&refs);
        prop_assert_eq!(code, 1);
    }
}

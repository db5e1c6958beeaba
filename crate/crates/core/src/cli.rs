//! The `det` command line front end.
//!
//! Every subcommand parses and checks its flags completely before touching
//! any model code. Exit status: 0 on success, 1 on usage errors, 2 on
//! data or model errors.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::algebra::{combine, efficiency_tree, BinaryOp, CompactionMode, CompactionPolicy};
use crate::error::{DetError, Result};
use crate::geometry::HyperRect;
use crate::integrate::{integrate_box, integrate_slice, normalization, SliceIntegralQuery, SliceSpec};
use crate::io::{load_dataset, load_tree, save_tree_with_metadata, CsvOptions};
use crate::sample::{build_sampler_with, LeafWeighting};
use crate::train::{train, LeafWidth, RootBoxPolicy, TrainConfig, DEFAULT_PAD};
use crate::tree::DensityTree;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_MODEL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "det", about = "Density estimation trees: train, query, combine and sample")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a tree on a delimited text file.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        weight_col: Option<String>,
        #[arg(long)]
        columns: Option<String>,
        /// `auto` or one width per dimension.
        #[arg(long, default_value = "auto")]
        min_width: String,
        #[arg(long)]
        min_count: Option<f64>,
        #[arg(long)]
        max_depth: Option<usize>,
        /// Explicit root box, `lo1:hi1,lo2:hi2,...`.
        #[arg(long = "box", allow_hyphen_values = true)]
        root_box: Option<String>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the density at a point.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Integrate over a box (default: the whole support).
    Integrate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        region: Option<String>,
    },
    /// Integrate over the free dimensions of a slice.
    Slice {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        fix: String,
        /// Restriction `lo:hi` for every dimension; entries of fixed dimensions are ignored.
        #[arg(long, allow_hyphen_values = true)]
        region: Option<String>,
    },
    /// Leafwise binary operation of two trees.
    Combine {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_enum)]
        op: OpArg,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Efficiency tree from pass and all trees.
    Ratio {
        #[arg(long = "pass")]
        pass: PathBuf,
        #[arg(long = "all")]
        all: PathBuf,
        #[arg(long)]
        pass_weight: f64,
        #[arg(long)]
        all_weight: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw the free dimensions conditionally on fixed values.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        fix: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Select leaves by intersection volume alone, ignoring densities.
        #[arg(long)]
        paper_volume_weights: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// One-dimensional marginal histogram.
    Project {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dim: String,
        #[arg(long)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summary of a stored tree.
    Info {
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OpArg {
    Add,
    Sub,
    Mul,
    Div,
}

impl From<OpArg> for BinaryOp {
    fn from(op: OpArg) -> Self {
        match op {
            OpArg::Add => BinaryOp::Add,
            OpArg::Sub => BinaryOp::SubtractClamped,
            OpArg::Mul => BinaryOp::Multiply,
            OpArg::Div => BinaryOp::Divide,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Model(DetError),
}

impl From<DetError> for Failure {
    fn from(e: DetError) -> Self {
        Failure::Model(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Runs the CLI on `argv` (including the program name) and returns the exit status.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = write!(stderr, "{}", e.render());
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "usage error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Model(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_MODEL
        }
    }
}

fn parse_list(s: &str, what: &str) -> std::result::Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| usage(format!("{what}: '{t}' is not a finite number")))
        })
        .collect()
}

fn parse_ranges(s: &str, what: &str) -> std::result::Result<Vec<(f64, f64)>, Failure> {
    s.split(',')
        .map(|t| {
            let (lo, hi) = t
                .split_once(':')
                .ok_or_else(|| usage(format!("{what}: expected lo:hi, got '{t}'")))?;
            let lo: f64 = lo.trim().parse().map_err(|_| usage(format!("{what}: bad bound '{lo}'")))?;
            let hi: f64 = hi.trim().parse().map_err(|_| usage(format!("{what}: bad bound '{hi}'")))?;
            if !(lo < hi) {
                return Err(usage(format!("{what}: need lo < hi in '{t}'")));
            }
            Ok((lo, hi))
        })
        .collect()
}

fn parse_fix(s: &str) -> std::result::Result<Vec<(String, f64)>, Failure> {
    s.split(',')
        .map(|t| {
            let (name, v) = t
                .split_once('=')
                .ok_or_else(|| usage(format!("--fix: expected dim=value, got '{t}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| usage(format!("--fix: bad value in '{t}'")))?;
            Ok((name.trim().to_string(), v))
        })
        .collect()
}

fn rect(ranges: Vec<(f64, f64)>) -> Result<HyperRect> {
    let (lo, hi) = ranges.into_iter().unzip();
    HyperRect::new(lo, hi)
}

fn slice_spec(tree: &DensityTree, fix: &[(String, f64)]) -> Result<SliceSpec> {
    SliceSpec::by_name(tree, fix.iter().map(|(n, v)| (n.as_str(), *v)))
}

fn write_file(path: &PathBuf, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| DetError::IoFailure(format!("{}: {e}", path.display())))
}

fn execute(cmd: Command, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Train {
            input,
            weight_col,
            columns,
            min_width,
            min_count,
            max_depth,
            root_box,
            jobs,
            out,
        } => {
            let widths = match min_width.trim() {
                "auto" => LeafWidth::Auto,
                s => {
                    let w = parse_list(s, "--min-width")?;
                    if w.iter().any(|v| *v <= 0.0) {
                        return Err(usage("--min-width: widths must be positive"));
                    }
                    LeafWidth::PerDim(w)
                }
            };
            if let Some(c) = min_count {
                if !(c >= 0.0) || !c.is_finite() {
                    return Err(usage("--min-count must be a non-negative number"));
                }
            }
            if max_depth == Some(0) {
                return Err(usage("--max-depth must be at least 1"));
            }
            if jobs == Some(0) {
                return Err(usage("--jobs must be at least 1"));
            }
            let ranges = root_box.as_deref().map(|s| parse_ranges(s, "--box")).transpose()?;
            let columns = columns.map(|c| c.split(',').map(|s| s.trim().to_string()).collect());

            let opts = CsvOptions {
                columns,
                weight_column: weight_col,
                ..CsvOptions::default()
            };
            let data = load_dataset(&input, &opts)?;
            let mut config = TrainConfig {
                min_leaf_width: widths,
                min_leaf_weight: min_count.unwrap_or(0.0),
                max_depth: max_depth.unwrap_or(64),
                root_box: RootBoxPolicy::DataExtent { pad: DEFAULT_PAD },
            };
            if let Some(r) = ranges {
                config.root_box = RootBoxPolicy::Explicit(rect(r)?);
            }
            let tree = match jobs {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| DetError::IoFailure(e.to_string()))?
                    .install(|| train(&data, &config))?,
                None => train(&data, &config)?,
            };
            let mut meta = BTreeMap::new();
            meta.insert("min_width".to_string(), min_width.trim().to_string());
            meta.insert("min_count".to_string(), config.min_leaf_weight.to_string());
            meta.insert("max_depth".to_string(), config.max_depth.to_string());
            meta.insert("rows".to_string(), data.len().to_string());
            save_tree_with_metadata(&tree, &meta, &out)?;
        }
        Command::Eval { model, point } => {
            let p = parse_list(&point, "--point")?;
            let tree = load_tree(&model)?;
            let v = tree.evaluate(&p)?;
            writeln!(stdout, "{v}").map_err(DetError::from)?;
        }
        Command::Integrate { model, region } => {
            let ranges = region.as_deref().map(|s| parse_ranges(s, "--region")).transpose()?;
            let tree = load_tree(&model)?;
            let v = match ranges {
                Some(r) => integrate_box(&tree, &rect(r)?)?,
                None => normalization(&tree),
            };
            writeln!(stdout, "{v}").map_err(DetError::from)?;
        }
        Command::Slice { model, fix, region } => {
            let fix = parse_fix(&fix)?;
            let ranges = region.as_deref().map(|s| parse_ranges(s, "--region")).transpose()?;
            let tree = load_tree(&model)?;
            let mut query = SliceIntegralQuery::new(slice_spec(&tree, &fix)?);
            if let Some(r) = ranges {
                query = query.with_free_box(rect(r)?);
            }
            let v = integrate_slice(&tree, &query)?;
            writeln!(stdout, "{v}").map_err(DetError::from)?;
        }
        Command::Combine { a, b, op, tol, out } => {
            if let Some(t) = tol {
                if !(t >= 0.0) {
                    return Err(usage("--tol must be non-negative"));
                }
            }
            let policy = match tol {
                Some(t) => CompactionPolicy::new(t, CompactionMode::Relative)?,
                None => CompactionPolicy::default(),
            };
            let ta = load_tree(&a)?;
            let tb = load_tree(&b)?;
            let result = combine(&ta, &tb, op.into(), policy)?;
            save_tree_with_metadata(&result, &BTreeMap::new(), &out)?;
        }
        Command::Ratio {
            pass,
            all,
            pass_weight,
            all_weight,
            out,
        } => {
            if !(all_weight > 0.0) || !(pass_weight >= 0.0) || pass_weight > all_weight {
                return Err(usage("need 0 <= --pass-weight <= --all-weight and --all-weight > 0"));
            }
            let tp = load_tree(&pass)?;
            let ta = load_tree(&all)?;
            let eff = efficiency_tree(&tp, &ta, pass_weight, all_weight, CompactionPolicy::default())?;
            save_tree_with_metadata(&eff, &BTreeMap::new(), &out)?;
        }
        Command::Sample {
            model,
            fix,
            n,
            seed,
            paper_volume_weights,
            out,
        } => {
            let fix = parse_fix(&fix)?;
            if n == 0 {
                return Err(usage("--n must be at least 1"));
            }
            let tree = load_tree(&model)?;
            let query = SliceIntegralQuery::new(slice_spec(&tree, &fix)?);
            let weighting = if paper_volume_weights {
                LeafWeighting::VolumeOnly
            } else {
                LeafWeighting::DensityVolume
            };
            let mut sampler = build_sampler_with(&tree, &query, seed, weighting)?;
            let header: Vec<&str> = sampler.free_dims().iter().map(|&d| tree.dims()[d].as_str()).collect();
            let mut text = header.join(",");
            text.push('\n');
            for row in sampler.sample(n) {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            write_file(&out, &text)?;
        }
        Command::Project { model, dim, bins, out } => {
            if bins == 0 {
                return Err(usage("--bins must be at least 1"));
            }
            let tree = load_tree(&model)?;
            let rows = project(&tree, &dim, bins)?;
            let mut text = String::from("bin_lo,bin_hi,density\n");
            for r in rows {
                text.push_str(&format!("{},{},{}\n", r.lo, r.hi, r.density));
            }
            write_file(&out, &text)?;
        }
        Command::Info { model } => {
            let tree = load_tree(&model)?;
            let rb = tree.root_box();
            let bounds: Vec<String> = (0..tree.dim_count())
                .map(|d| format!("{}:{}", rb.lo()[d], rb.hi()[d]))
                .collect();
            let text = format!(
                "dims: {}\nleaves: {}\ndepth: {}\nbox: {}\ntotal_weight: {}\nnormalization: {}\n",
                tree.dims().join(","),
                tree.leaf_count(),
                tree.depth(),
                bounds.join(","),
                tree.total_weight(),
                normalization(&tree)
            );
            stdout.write_all(text.as_bytes()).map_err(DetError::from)?;
        }
    }
    Ok(())
}

/// One bin of a projected marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionBin {
    pub lo: f64,
    pub hi: f64,
    pub density: f64,
}

/// Marginal density along `dim` on `bins` equal bins spanning the root box:
/// each value is the box integral over the bin times the full range of every
/// other dimension, divided by the bin width.
pub fn project(tree: &DensityTree, dim: &str, bins: usize) -> Result<Vec<ProjectionBin>> {
    let d = tree
        .dim_index(dim)
        .ok_or_else(|| DetError::UnknownDimension(dim.to_string()))?;
    if bins == 0 {
        return Err(DetError::InvalidConfig("bins must be at least 1".into()));
    }
    let rb = tree.root_box();
    let (lo, hi) = (rb.lo()[d], rb.hi()[d]);
    let edge = |i: usize| {
        if i == bins {
            hi
        } else {
            lo + (hi - lo) * (i as f64 / bins as f64)
        }
    };
    (0..bins)
        .map(|i| {
            let (a, b) = (edge(i), edge(i + 1));
            let mut region_lo = rb.lo().to_vec();
            let mut region_hi = rb.hi().to_vec();
            region_lo[d] = a;
            region_hi[d] = b;
            let region = HyperRect::new(region_lo, region_hi)?;
            let mass = integrate_box(tree, &region)?;
            Ok(ProjectionBin {
                lo: a,
                hi: b,
                density: mass / (b - a),
            })
        })
        .collect()
}

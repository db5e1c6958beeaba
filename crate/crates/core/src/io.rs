//! Delimited-text dataset ingestion and the `DETv1` tree file format.
//!
//! ```text
//! DETv1 dims=<D> leaves=<L> total_weight=<w>
//! dim <name> <lo> <hi>              (D lines)
//! # key=value                       (optional metadata)
//! I <dim> <threshold>               (preorder nodes)
//! L <density> [nosupport]
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a save/load
//! cycle reproduces every threshold and density bit-for-bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{DetError, Result};
use crate::geometry::HyperRect;
use crate::tree::{DensityTree, TreeNode};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "DETv1";

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    /// Columns to keep, by name; `None` keeps every non-weight column.
    pub columns: Option<Vec<String>>,
    pub weight_column: Option<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            has_header: true,
            columns: None,
            weight_column: None,
        }
    }
}

/// Reads a delimited text file into a [`Dataset`].
pub fn load_dataset(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_dataset(&text, options)
}

/// Parses delimited text. Row numbers in errors are 1-based file lines.
pub fn parse_dataset(text: &str, options: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header: Vec<String> = if options.has_header {
        reader
            .headers()
            .map_err(|e| csv_error(e, 1))?
            .iter()
            .map(str::to_string)
            .collect()
    } else {
        Vec::new()
    };

    let mut records = Vec::new();
    for rec in reader.records() {
        let line = records.len() + 1 + usize::from(options.has_header);
        records.push((line, rec.map_err(|e| csv_error(e, line))?));
    }
    let header = if options.has_header {
        header
    } else {
        let width = records.first().map_or(0, |(_, r)| r.len());
        (0..width).map(|i| format!("c{i}")).collect()
    };

    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DetError::MissingColumn(name.to_string()))
    };
    let weight_idx = options.weight_column.as_deref().map(find).transpose()?;
    let selected: Vec<usize> = match &options.columns {
        Some(cols) => cols.iter().map(|c| find(c)).collect::<Result<_>>()?,
        None => (0..header.len()).filter(|i| Some(*i) != weight_idx).collect(),
    };
    if selected.is_empty() {
        return Err(DetError::InvalidDataset("no columns selected".into()));
    }

    let parse = |line: usize, rec: &csv::StringRecord, col: usize| -> Result<f64> {
        let column = header[col].clone();
        let raw = rec.get(col).ok_or_else(|| DetError::ParseError {
            row: line,
            column: column.clone(),
            reason: "missing field".into(),
        })?;
        let v: f64 = raw.parse().map_err(|_| DetError::ParseError {
            row: line,
            column: column.clone(),
            reason: format!("'{raw}' is not a number"),
        })?;
        if !v.is_finite() {
            return Err(DetError::ParseError {
                row: line,
                column,
                reason: format!("non-finite value '{raw}'"),
            });
        }
        Ok(v)
    };

    let mut values = Vec::with_capacity(records.len() * selected.len());
    let mut weights = Vec::with_capacity(records.len());
    for (line, rec) in &records {
        for &c in &selected {
            values.push(parse(*line, rec, c)?);
        }
        let w = match weight_idx {
            Some(c) => {
                let w = parse(*line, rec, c)?;
                if w < 0.0 {
                    return Err(DetError::NegativeWeight { row: *line, value: w });
                }
                w
            }
            None => 1.0,
        };
        weights.push(w);
    }
    let columns = selected.iter().map(|&c| header[c].clone()).collect();
    Dataset::from_flat(columns, values, Some(weights))
}

fn csv_error(e: csv::Error, line: usize) -> DetError {
    DetError::ParseError {
        row: line,
        column: String::new(),
        reason: e.to_string(),
    }
}

/// Renders a tree in the `DETv1` format.
pub fn tree_to_string(tree: &DensityTree, metadata: &BTreeMap<String, String>) -> Result<String> {
    for name in tree.dims() {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(DetError::InvalidDataset(format!(
                "dimension name '{name}' cannot be stored (empty or contains whitespace)"
            )));
        }
    }
    let mut out = String::with_capacity(64 + 24 * tree.root().node_count());
    let _ = writeln!(
        out,
        "{MAGIC} dims={} leaves={} total_weight={}",
        tree.dim_count(),
        tree.leaf_count(),
        tree.total_weight()
    );
    let rb = tree.root_box();
    for (d, name) in tree.dims().iter().enumerate() {
        let _ = writeln!(out, "dim {name} {} {}", rb.lo()[d], rb.hi()[d]);
    }
    for (k, v) in metadata {
        let _ = writeln!(out, "# {k}={}", v.replace('\n', " "));
    }
    write_node(tree.root(), &mut out);
    Ok(out)
}

fn write_node(node: &TreeNode, out: &mut String) {
    match node {
        TreeNode::Leaf { density, no_support } => {
            if *no_support {
                let _ = writeln!(out, "L {density} nosupport");
            } else {
                let _ = writeln!(out, "L {density}");
            }
        }
        TreeNode::Internal {
            split_dim,
            threshold,
            left,
            right,
        } => {
            let _ = writeln!(out, "I {split_dim} {threshold}");
            write_node(left, out);
            write_node(right, out);
        }
    }
}

pub fn save_tree(tree: &DensityTree, path: impl AsRef<Path>) -> Result<()> {
    save_tree_with_metadata(tree, &BTreeMap::new(), path)
}

pub fn save_tree_with_metadata(
    tree: &DensityTree,
    metadata: &BTreeMap<String, String>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let text = tree_to_string(tree, metadata)?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_tree(path: impl AsRef<Path>) -> Result<DensityTree> {
    let text = fs::read_to_string(path)?;
    parse_tree(&text).map(|(t, _)| t)
}

/// Loads a tree along with its metadata lines.
pub fn load_tree_with_metadata(path: impl AsRef<Path>) -> Result<(DensityTree, BTreeMap<String, String>)> {
    let text = fs::read_to_string(path)?;
    parse_tree(&text)
}

fn corrupt(msg: impl Into<String>) -> DetError {
    DetError::CorruptFile(msg.into())
}

fn parse_f64(s: &str, what: &str, line: usize) -> Result<f64> {
    s.parse()
        .map_err(|_| corrupt(format!("line {line}: bad {what} '{s}'")))
}

fn header_field<'a>(tok: Option<&'a str>, key: &str) -> Result<&'a str> {
    tok.and_then(|t| t.strip_prefix(key)?.strip_prefix('='))
        .ok_or_else(|| corrupt(format!("header: missing {key}=")))
}

/// Parses `DETv1` text and re-validates every tree invariant.
pub fn parse_tree(text: &str) -> Result<(DensityTree, BTreeMap<String, String>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| corrupt("empty file"))?;
    let mut toks = header.split_whitespace();
    let magic = toks.next().unwrap_or("");
    if magic != MAGIC {
        if let Some(v) = magic.strip_prefix("DETv") {
            return Err(DetError::UnsupportedVersion(v.to_string()));
        }
        return Err(corrupt("missing DET header"));
    }
    let dims: usize = header_field(toks.next(), "dims")?
        .parse()
        .map_err(|_| corrupt("header: bad dims"))?;
    let leaves: usize = header_field(toks.next(), "leaves")?
        .parse()
        .map_err(|_| corrupt("header: bad leaves"))?;
    let total_weight = parse_f64(header_field(toks.next(), "total_weight")?, "total weight", 1)?;
    if dims == 0 || leaves == 0 {
        return Err(corrupt("header: dims and leaves must be positive"));
    }

    let mut names = Vec::with_capacity(dims);
    let mut lo = Vec::with_capacity(dims);
    let mut hi = Vec::with_capacity(dims);
    let mut metadata = BTreeMap::new();
    let mut nodes: Vec<(usize, &str)> = Vec::new();
    for (n, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.trim().split_once('=') {
                metadata.insert(k.to_string(), v.to_string());
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("dim ") {
            if !nodes.is_empty() {
                return Err(corrupt(format!("line {n}: dim line after nodes")));
            }
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(corrupt(format!("line {n}: malformed dim line")));
            }
            names.push(parts[0].to_string());
            lo.push(parse_f64(parts[1], "lower bound", n)?);
            hi.push(parse_f64(parts[2], "upper bound", n)?);
        } else {
            nodes.push((n, line));
        }
    }
    if names.len() != dims {
        return Err(corrupt(format!("header declares {dims} dims, found {}", names.len())));
    }
    let root_box = HyperRect::new_finite(lo, hi).map_err(|e| corrupt(format!("root box: {e}")))?;

    let expected_nodes = 2 * leaves - 1;
    if nodes.len() != expected_nodes {
        return Err(corrupt(format!(
            "node count mismatch: header declares {leaves} leaves ({expected_nodes} nodes), found {} nodes",
            nodes.len()
        )));
    }
    let mut pos = 0;
    let root = parse_node(&nodes, &mut pos, dims, 0)?;
    if pos != nodes.len() {
        return Err(corrupt(format!("{} trailing node lines", nodes.len() - pos)));
    }
    if root.leaf_count() != leaves {
        return Err(corrupt(format!(
            "leaf count mismatch: header {leaves}, tree {}",
            root.leaf_count()
        )));
    }
    let tree = DensityTree::from_parts(names, root_box, root, total_weight)?;
    if let Some(v) = tree.validate().into_iter().next() {
        return Err(corrupt(format!("invariant violated: {v}")));
    }
    Ok((tree, metadata))
}

fn parse_node(nodes: &[(usize, &str)], pos: &mut usize, dims: usize, depth: usize) -> Result<TreeNode> {
    if depth > 4096 {
        return Err(corrupt("tree too deep"));
    }
    let (n, line) = *nodes.get(*pos).ok_or_else(|| corrupt("truncated node list"))?;
    *pos += 1;
    let parts: Vec<&str> = line.split_whitespace().collect();
    match parts.as_slice() {
        ["I", dim, threshold] => {
            let d: usize = dim
                .parse()
                .map_err(|_| corrupt(format!("line {n}: bad split dimension")))?;
            if d >= dims {
                return Err(corrupt(format!("line {n}: split dimension {d} out of range")));
            }
            let t = parse_f64(threshold, "threshold", n)?;
            let left = parse_node(nodes, pos, dims, depth + 1)?;
            let right = parse_node(nodes, pos, dims, depth + 1)?;
            Ok(TreeNode::internal(d, t, left, right))
        }
        ["L", density] => Ok(TreeNode::Leaf {
            density: parse_f64(density, "density", n)?,
            no_support: false,
        }),
        ["L", density, "nosupport"] => Ok(TreeNode::Leaf {
            density: parse_f64(density, "density", n)?,
            no_support: true,
        }),
        _ => Err(corrupt(format!("line {n}: malformed node '{line}'"))),
    }
}

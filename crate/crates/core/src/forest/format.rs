//! Line-oriented model file.
//!
//! ```text
//! ocdiag-forest 1
//! n_trees 264
//! width 3
//! feature_names i_a i_b i_c
//! scaler 1.4280000000000000e1 1.4280000000000000e1 1.4280000000000000e1
//! label_universe 000000 000001 ...
//! seed 42
//! params m_try=1 max_depth=none min_samples_leaf=1
//! tree 0 5
//! I 0 -1.2500000000000000e-1
//! L 000000
//! ...
//! end
//! ```
//!
//! Each tree is a preorder node list: `I <feature> <threshold>` for a split
//! (left subtree follows, then right) and `L <label>` for a leaf. Reals are
//! written with 17 significant digits so they read back bit for bit.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::label::FaultLabel;

use super::{ForestParams, RandomForestModel, Scaler, TreeNode};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "ocdiag-forest";

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_node(out: &mut String, node: &TreeNode) {
    match node {
        TreeNode::Leaf { label, .. } => {
            let _ = writeln!(out, "L {label}");
        }
        TreeNode::Split { feature, threshold, left, right } => {
            let _ = writeln!(out, "I {feature} {}", real(*threshold));
            write_node(out, left);
            write_node(out, right);
        }
    }
}

pub fn write_model(model: &RandomForestModel) -> Result<String> {
    if let Some(name) = model.feature_names.iter().find(|n| n.is_empty() || n.contains(char::is_whitespace)) {
        return Err(Error::InvalidArgument(format!("feature name {name:?} cannot be written")));
    }
    let p = &model.params;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {MODEL_FORMAT_VERSION}");
    let _ = writeln!(out, "n_trees {}", model.trees.len());
    let _ = writeln!(out, "width {}", model.width());
    let _ = writeln!(out, "feature_names {}", model.feature_names.join(" "));
    let scaler: Vec<String> = model.scaler.max_abs().iter().map(|v| real(*v)).collect();
    let _ = writeln!(out, "scaler {}", scaler.join(" "));
    let labels: Vec<String> = model.label_universe.iter().map(|l| l.to_string()).collect();
    let _ = writeln!(out, "label_universe {}", labels.join(" "));
    let _ = writeln!(out, "seed {}", p.seed);
    let _ = writeln!(
        out,
        "params m_try={} max_depth={} min_samples_leaf={}",
        model.m_try,
        p.max_depth.map_or("none".to_string(), |d| d.to_string()),
        p.min_samples_leaf
    );
    for (i, tree) in model.trees.iter().enumerate() {
        let _ = writeln!(out, "tree {i} {}", tree.node_count());
        write_node(&mut out, tree);
    }
    out.push_str("end\n");
    Ok(out)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l))
            }
            None => Err(Error::parse(self.last + 1, "unexpected end of model file")),
        }
    }

    /// Next line, which must start with `key`; returns the remainder.
    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok((n, rest)),
            _ if line == key => Ok((n, "")),
            _ => Err(Error::parse(n, format!("expected `{key}`"))),
        }
    }
}

fn num<T: std::str::FromStr>(line: usize, s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::parse(line, format!("invalid {what} {s:?}")))
}

fn read_node(lines: &mut Lines<'_>, width: usize, remaining: &mut usize) -> Result<TreeNode> {
    let (n, line) = lines.next_line()?;
    if *remaining == 0 {
        return Err(Error::parse(n, "tree has more nodes than declared"));
    }
    *remaining -= 1;
    let mut parts = line.split(' ');
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some("L"), Some(bits), None, None) => {
            let label: FaultLabel = bits.parse().map_err(|e: Error| Error::parse(n, e.to_string()))?;
            Ok(TreeNode::leaf(label))
        }
        (Some("I"), Some(f), Some(t), None) => {
            let feature: usize = num(n, f, "feature index")?;
            if feature >= width {
                return Err(Error::parse(n, format!("feature index {feature} >= width {width}")));
            }
            let threshold: f64 = num(n, t, "threshold")?;
            let left = read_node(lines, width, remaining)?;
            let right = read_node(lines, width, remaining)?;
            Ok(TreeNode::Split { feature, threshold, left: Box::new(left), right: Box::new(right) })
        }
        _ => Err(Error::parse(n, format!("malformed node {line:?}"))),
    }
}

pub fn parse_model(text: &str) -> Result<RandomForestModel> {
    let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };

    let (_, version) = lines.keyed(MAGIC)?;
    if version != MODEL_FORMAT_VERSION.to_string() {
        return Err(Error::Version { found: version.to_string(), expected: MODEL_FORMAT_VERSION });
    }
    let (n, s) = lines.keyed("n_trees")?;
    let n_trees: usize = num(n, s, "tree count")?;
    let (n, s) = lines.keyed("width")?;
    let width: usize = num(n, s, "width")?;

    let (n, s) = lines.keyed("feature_names")?;
    let feature_names: Vec<String> = s.split(' ').filter(|t| !t.is_empty()).map(String::from).collect();
    if feature_names.len() != width {
        return Err(Error::parse(n, format!("expected {width} feature names")));
    }
    let (n, s) = lines.keyed("scaler")?;
    let max_abs = s.split(' ').map(|t| num::<f64>(n, t, "scaler entry")).collect::<Result<Vec<_>>>()?;
    if max_abs.len() != width {
        return Err(Error::parse(n, format!("expected {width} scaler entries")));
    }
    let scaler = Scaler::from_max_abs(max_abs).map_err(|e| Error::parse(n, e.to_string()))?;

    let (n, s) = lines.keyed("label_universe")?;
    let label_universe = s
        .split(' ')
        .map(|t| t.parse::<FaultLabel>().map_err(|e| Error::parse(n, e.to_string())))
        .collect::<Result<Vec<_>>>()?;

    let (n, s) = lines.keyed("seed")?;
    let seed: u64 = num(n, s, "seed")?;

    let (n, s) = lines.keyed("params")?;
    let mut m_try = None;
    let mut max_depth = None;
    let mut min_samples_leaf = None;
    for kv in s.split(' ') {
        match kv.split_once('=') {
            Some(("m_try", v)) => m_try = Some(num::<usize>(n, v, "m_try")?),
            Some(("max_depth", "none")) => max_depth = Some(None),
            Some(("max_depth", v)) => max_depth = Some(Some(num::<usize>(n, v, "max_depth")?)),
            Some(("min_samples_leaf", v)) => min_samples_leaf = Some(num::<usize>(n, v, "min_samples_leaf")?),
            _ => return Err(Error::parse(n, format!("unknown parameter {kv:?}"))),
        }
    }
    let (Some(m_try), Some(max_depth), Some(min_samples_leaf)) = (m_try, max_depth, min_samples_leaf) else {
        return Err(Error::parse(n, "params line is incomplete"));
    };

    let mut trees = Vec::with_capacity(n_trees);
    for i in 0..n_trees {
        let (n, s) = lines.keyed("tree")?;
        let (idx, count) = s.split_once(' ').ok_or_else(|| Error::parse(n, "malformed tree header"))?;
        if num::<usize>(n, idx, "tree index")? != i {
            return Err(Error::parse(n, format!("expected tree {i}")));
        }
        let declared: usize = num(n, count, "node count")?;
        let mut remaining = declared;
        let tree = read_node(&mut lines, width, &mut remaining)?;
        if remaining != 0 {
            return Err(Error::parse(n, format!("tree {i} declares {declared} nodes")));
        }
        trees.push(tree);
    }
    lines.keyed("end")?;

    let model = RandomForestModel {
        trees,
        m_try,
        scaler,
        feature_names,
        label_universe,
        params: ForestParams { n_trees, m_try: Some(m_try), max_depth, min_samples_leaf, seed },
    };
    model.validate()?;
    Ok(model)
}

//! Exact top-`k` search over a probabilistic label tree.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{MatrixKind, SparseRowMatrix};
use crate::metrics::precision;
use crate::prediction::PredictionRow;

/// A rooted tree whose leaves are in bijection with the labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelTree {
    parent: Vec<Option<u32>>,
    children: Vec<Vec<u32>>,
    root: u32,
    /// Label of each leaf node.
    node_label: Vec<Option<u32>>,
    label_leaf: Vec<u32>,
    /// Smallest label in each subtree.
    min_label: Vec<u32>,
}

impl LabelTree {
    /// `parent[v] = None` marks the root; `leaves` maps leaf nodes to labels.
    pub fn new(parent: Vec<Option<u32>>, leaves: &[(u32, u32)], n_labels: usize) -> Result<Self> {
        let n_nodes = parent.len();
        let bad = |msg: String| Err(Error::Validation(msg));
        let roots: Vec<usize> = (0..n_nodes).filter(|&v| parent[v].is_none()).collect();
        if roots.len() != 1 {
            return bad(format!("tree needs exactly one root, found {}", roots.len()));
        }
        let root = roots[0] as u32;
        let mut children = vec![Vec::new(); n_nodes];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p as usize >= n_nodes || p as usize == v {
                    return bad(format!("node {v} has invalid parent {p}"));
                }
                children[p as usize].push(v as u32);
            }
        }
        // Every node must reach the root.
        let mut depth = vec![usize::MAX; n_nodes];
        depth[root as usize] = 0;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &c in &children[v as usize] {
                depth[c as usize] = depth[v as usize] + 1;
                stack.push(c);
            }
        }
        if let Some(v) = depth.iter().position(|&d| d == usize::MAX) {
            return bad(format!("node {v} is not connected to the root (cycle)"));
        }
        let mut node_label = vec![None; n_nodes];
        let mut label_leaf = vec![u32::MAX; n_labels];
        for &(node, label) in leaves {
            if node as usize >= n_nodes || label as usize >= n_labels {
                return bad(format!("leaf pair {node}:{label} out of range"));
            }
            if node_label[node as usize].is_some() || label_leaf[label as usize] != u32::MAX {
                return bad(format!("leaf pair {node}:{label} is not one-to-one"));
            }
            node_label[node as usize] = Some(label);
            label_leaf[label as usize] = node;
        }
        if let Some(l) = label_leaf.iter().position(|&v| v == u32::MAX) {
            return bad(format!("label {l} has no leaf"));
        }
        for v in 0..n_nodes {
            let leaf = children[v].is_empty();
            if leaf != node_label[v].is_some() {
                return bad(format!("node {v}: leaves and labelled nodes must coincide"));
            }
            if !leaf && children[v].len() < 2 {
                return bad(format!("internal node {v} has a single child"));
            }
        }
        let mut tree = LabelTree {
            parent,
            children,
            root,
            node_label,
            label_leaf,
            min_label: vec![u32::MAX; n_nodes],
        };
        let min_label = tree.subtree_fold(|v, kids: &[u32]| {
            kids.iter()
                .copied()
                .min()
                .unwrap_or(u32::MAX)
                .min(tree.node_label[v as usize].unwrap_or(u32::MAX))
        });
        tree.min_label = min_label;
        Ok(tree)
    }

    /// Parses the three-line tree format: `<nodes> <labels>`, the parent of
    /// every node (`-1` for the root), then `<leaf>:<label>` pairs.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .map(|(i, l)| (i + 1, l))
                .ok_or_else(|| Error::parse(0, format!("missing {what} line")))
        };
        let (ln, header) = next("header")?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(ln, format!("bad count {t:?}"))))
            .collect::<Result<_>>()?;
        let &[n_nodes, n_labels] = dims.as_slice() else {
            return Err(Error::parse(ln, "header must be `<nodes> <labels>`"));
        };
        let (ln, parents) = next("parent")?;
        let parent: Vec<Option<u32>> = parents
            .split_whitespace()
            .map(|t| match t.parse::<i64>() {
                Ok(-1) => Ok(None),
                Ok(p) if p >= 0 && p <= u32::MAX as i64 => Ok(Some(p as u32)),
                _ => Err(Error::parse(ln, format!("bad parent {t:?}"))),
            })
            .collect::<Result<_>>()?;
        if parent.len() != n_nodes {
            return Err(Error::parse(ln, format!("{} parents for {n_nodes} nodes", parent.len())));
        }
        let (ln, pairs) = next("leaf")?;
        let leaves: Vec<(u32, u32)> = pairs
            .split_whitespace()
            .map(|t| {
                let (a, b) = t
                    .split_once(':')
                    .ok_or_else(|| Error::parse(ln, format!("bad leaf pair {t:?}")))?;
                match (a.parse(), b.parse()) {
                    (Ok(a), Ok(b)) => Ok((a, b)),
                    _ => Err(Error::parse(ln, format!("bad leaf pair {t:?}"))),
                }
            })
            .collect::<Result<_>>()?;
        if let Some((i, _)) = lines.next() {
            return Err(Error::parse(i + 1, "unexpected trailing line"));
        }
        Self::new(parent, &leaves, n_labels)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_text(&self) -> String {
        let parents: Vec<String> = self
            .parent
            .iter()
            .map(|p| p.map_or("-1".to_string(), |p| p.to_string()))
            .collect();
        let leaves: Vec<String> = self
            .label_leaf
            .iter()
            .enumerate()
            .map(|(l, v)| format!("{v}:{l}"))
            .collect();
        format!(
            "{} {}\n{}\n{}\n",
            self.n_nodes(),
            self.n_labels(),
            parents.join(" "),
            leaves.join(" ")
        )
    }

    pub fn n_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn n_labels(&self) -> usize {
        self.label_leaf.len()
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn parent(&self, v: u32) -> Option<u32> {
        self.parent[v as usize]
    }

    pub fn children(&self, v: u32) -> &[u32] {
        &self.children[v as usize]
    }

    pub fn leaf_of(&self, label: u32) -> u32 {
        self.label_leaf[label as usize]
    }

    pub fn label_of(&self, v: u32) -> Option<u32> {
        self.node_label[v as usize]
    }

    /// Bottom-up fold over subtrees: `f(node, child results)`.
    fn subtree_fold<T: Clone + Default>(&self, f: impl Fn(u32, &[T]) -> T) -> Vec<T> {
        let mut order = Vec::with_capacity(self.n_nodes());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            order.push(v);
            stack.extend_from_slice(&self.children[v as usize]);
        }
        let mut out = vec![T::default(); self.n_nodes()];
        let mut kids = Vec::new();
        for &v in order.iter().rev() {
            kids.clear();
            kids.extend(self.children[v as usize].iter().map(|&c| out[c as usize].clone()));
            out[v as usize] = f(v, &kids);
        }
        out
    }
}

/// Per-label gain `g_j(eta) = a_j * eta + b_j`, non-decreasing in `eta`.
#[derive(Clone, Debug, PartialEq)]
pub enum GainSpec {
    /// `g_j = w_j * eta` with `w_j >= 0`.
    Weighted(Vec<f64>),
    /// Change in the macro-precision term of label `j` when one more
    /// instance with probability `eta` predicts it.
    MacroPrecisionGain { t_hat: Vec<f64>, p: Vec<f64>, n: usize },
}

impl GainSpec {
    /// `(a, b)` per label.
    fn coefficients(&self, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            GainSpec::Weighted(w) => {
                if w.len() != m {
                    return Err(Error::DimensionMismatch(format!("{} weights for {m} labels", w.len())));
                }
                if let Some(x) = w.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
                    return Err(Error::Config(format!("weight {x} must be finite and >= 0")));
                }
            }
            GainSpec::MacroPrecisionGain { t_hat, p, n } => {
                if t_hat.len() != m || p.len() != m {
                    return Err(Error::DimensionMismatch(format!(
                        "{} / {} statistics for {m} labels",
                        t_hat.len(),
                        p.len()
                    )));
                }
                if *n == 0 {
                    return Err(Error::Config("n must be at least 1".into()));
                }
            }
        }
        Ok((0..m).map(|j| self.affine(j)).unzip())
    }

    fn affine(&self, j: usize) -> (f64, f64) {
        match self {
            GainSpec::Weighted(w) => (w[j], 0.0),
            GainSpec::MacroPrecisionGain { t_hat, p, n } => {
                let nf = *n as f64;
                let denom = nf * p[j] + 1.0;
                (1.0 / denom, nf * t_hat[j] / denom - precision(t_hat[j], p[j]))
            }
        }
    }

    /// Gain of label `j` at probability `eta`.
    pub fn gain(&self, j: usize, eta: f64) -> f64 {
        let (a, b) = self.affine(j);
        a * eta + b
    }
}

fn check_scores(tree: &LabelTree, scores: &[f64]) -> Result<()> {
    if scores.len() != tree.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "{} node scores for {} nodes",
            scores.len(),
            tree.n_nodes()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Validation(format!("node score {s} outside [0, 1]")));
    }
    Ok(())
}

/// Product of the conditional scores on the path from the root to `node`.
pub fn path_prob(tree: &LabelTree, scores: &[f64], node: u32) -> Result<f64> {
    if node as usize >= tree.n_nodes() {
        return Err(Error::Validation(format!("node {node} out of range")));
    }
    check_scores(tree, scores)?;
    let mut path = vec![node];
    while let Some(p) = tree.parent(*path.last().unwrap()) {
        path.push(p);
    }
    Ok(path.iter().rev().fold(1.0, |acc, &v| acc * scores[v as usize]))
}

#[derive(Debug)]
struct Entry {
    priority: f64,
    min_label: u32,
    node: u32,
    prob: f64,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Max-heap: higher priority, then smaller label, then smaller node.
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then(other.min_label.cmp(&self.min_label))
            .then(other.node.cmp(&self.node))
    }
}

/// Best-first search for the `k` labels with the largest gains at their
/// leaf path probabilities. Returns the labels and the number of queue pops.
///
/// A node's priority bounds every gain in its subtree: path probabilities
/// only shrink going down and every gain is non-decreasing in `eta`.
pub fn astar_top_k(
    tree: &LabelTree,
    scores: &[f64],
    gain: &GainSpec,
    k: usize,
) -> Result<(PredictionRow, usize)> {
    let m = tree.n_labels();
    if k > m {
        return Err(Error::Config(format!("k = {k} exceeds the number of labels {m}")));
    }
    check_scores(tree, scores)?;
    let (a, b) = gain.coefficients(m)?;
    let bound = tree.subtree_fold(
        |v, kids: &[(f64, f64)]| match tree.label_of(v) {
            Some(l) => (a[l as usize], b[l as usize]),
            None => kids.iter().fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |acc, x| {
                (acc.0.max(x.0), acc.1.max(x.1))
            }),
        },
    );
    let entry = |node: u32, prob: f64| {
        let (ma, mb) = bound[node as usize];
        Entry {
            priority: ma * prob + mb,
            min_label: tree.min_label[node as usize],
            node,
            prob,
        }
    };

    let mut heap = BinaryHeap::new();
    let root = tree.root();
    heap.push(entry(root, scores[root as usize]));
    let mut labels = Vec::with_capacity(k);
    let mut expansions = 0;
    while labels.len() < k {
        let Some(top) = heap.pop() else { break };
        expansions += 1;
        match tree.label_of(top.node) {
            Some(l) => labels.push(l),
            None => {
                if cfg!(debug_assertions) {
                    let best = subtree_best(tree, scores, gain, top.node, top.prob);
                    debug_assert!(top.priority >= best, "inadmissible bound at node {}", top.node);
                }
                for &c in tree.children(top.node) {
                    heap.push(entry(c, top.prob * scores[c as usize]));
                }
            }
        }
    }
    labels.sort_unstable();
    Ok((PredictionRow::from_sorted_unchecked(labels), expansions))
}

fn subtree_best(tree: &LabelTree, scores: &[f64], gain: &GainSpec, node: u32, prob: f64) -> f64 {
    match tree.label_of(node) {
        Some(l) => gain.gain(l as usize, prob),
        None => tree
            .children(node)
            .iter()
            .map(|&c| subtree_best(tree, scores, gain, c, prob * scores[c as usize]))
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Gains of every label at its leaf path probability, by full traversal.
pub fn exhaustive_gains(tree: &LabelTree, scores: &[f64], gain: &GainSpec) -> Result<Vec<f64>> {
    check_scores(tree, scores)?;
    let (a, b) = gain.coefficients(tree.n_labels())?;
    let mut out = vec![0.0; tree.n_labels()];
    let mut stack = vec![(tree.root(), scores[tree.root() as usize])];
    while let Some((v, prob)) = stack.pop() {
        match tree.label_of(v) {
            Some(l) => out[l as usize] = a[l as usize] * prob + b[l as usize],
            None => stack.extend(tree.children(v).iter().map(|&c| (c, prob * scores[c as usize]))),
        }
    }
    Ok(out)
}

/// Reads one full per-node score row per instance.
pub fn load_node_scores(path: impl AsRef<Path>, tree: &LabelTree) -> Result<Vec<Vec<f64>>> {
    let matrix = SparseRowMatrix::load(path, MatrixKind::Scores)?;
    node_scores_from(&matrix, tree)
}

pub fn node_scores_from(matrix: &SparseRowMatrix, tree: &LabelTree) -> Result<Vec<Vec<f64>>> {
    if matrix.n_cols() != tree.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "score file has {} columns, tree has {} nodes",
            matrix.n_cols(),
            tree.n_nodes()
        )));
    }
    matrix
        .rows()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != tree.n_nodes() {
                return Err(Error::Validation(format!(
                    "row {i} scores {} of {} nodes",
                    row.len(),
                    tree.n_nodes()
                )));
            }
            let scores: Vec<f64> = row.values.to_vec();
            check_scores(tree, &scores)?;
            Ok(scores)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_leaf() -> LabelTree {
        LabelTree::new(vec![None, Some(0), Some(0)], &[(1, 0), (2, 1)], 2).unwrap()
    }

    #[test]
    fn path_products() {
        let t = two_leaf();
        let s = [0.8, 0.5, 0.375];
        assert_eq!(path_prob(&t, &s, 0).unwrap(), 0.8);
        assert!((path_prob(&t, &s, 1).unwrap() - 0.4).abs() < 1e-15);
        assert!(path_prob(&t, &s, 3).is_err());
    }

    #[test]
    fn uniform_and_weighted_examples() {
        let t = two_leaf();
        let s = [1.0, 0.4, 0.3];
        let (row, exp) = astar_top_k(&t, &s, &GainSpec::Weighted(vec![1.0, 1.0]), 1).unwrap();
        assert_eq!(row.labels(), &[0]);
        assert!(exp <= 3);

        let s = [1.0, 0.4, 0.05];
        let (row, _) = astar_top_k(&t, &s, &GainSpec::Weighted(vec![1.0, 10.0]), 1).unwrap();
        assert_eq!(row.labels(), &[1]);
    }

    #[test]
    fn tree_validation() {
        // single-child internal node
        assert!(LabelTree::new(vec![None, Some(0)], &[(1, 0)], 1).is_err());
        // two roots
        assert!(LabelTree::new(vec![None, None], &[(0, 0), (1, 1)], 2).is_err());
        // cycle
        assert!(LabelTree::new(vec![None, Some(2), Some(1)], &[(1, 0), (2, 1)], 2).is_err());
        // label without a leaf
        assert!(LabelTree::new(vec![None, Some(0), Some(0)], &[(1, 0), (2, 1)], 3).is_err());
    }

    #[test]
    fn text_round_trip() {
        let t = two_leaf();
        assert_eq!(LabelTree::parse(&t.to_text()).unwrap(), t);
        assert!(LabelTree::parse("3 2\n-1 0\n1:0 2:1\n").is_err());
    }

    #[test]
    fn macro_precision_gain_matches_closed_form() {
        let g = GainSpec::MacroPrecisionGain {
            t_hat: vec![0.2],
            p: vec![0.4],
            n: 1,
        };
        assert!((g.gain(0, 0.8) - 0.12 / 0.56).abs() < 1e-12);
        let (a, b) = g.coefficients(1).unwrap();
        assert!((a[0] * 0.8 + b[0] - g.gain(0, 0.8)).abs() < 1e-15);
    }
}

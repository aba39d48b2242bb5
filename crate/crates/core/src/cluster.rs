//! Deterministic agglomerative clustering over a distance table.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::tree::LabeledTree;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("distance table is {rows}x{cols} but there are {labels} labels")]
    Shape { rows: usize, cols: usize, labels: usize },
    #[error("distance table is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("distance table has a negative or non-finite entry at ({0}, {1})")]
    Invalid(usize, usize),
    #[error("distance table has a nonzero diagonal at {0}")]
    Diagonal(usize),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("nothing to cluster")]
    Empty,
    #[error("cut size {k} outside 1..={n}")]
    CutRange { k: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Complete,
    Average,
    Single,
}

/// Merge of two clusters. Leaves are nodes `0..n`; merge `k` creates node
/// `n + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dendrogram {
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
}

const SYMMETRY_TOL: f64 = 1e-12;

fn validate(d: &Matrix, labels: &[String]) -> Result<(), ClusterError> {
    let n = labels.len();
    if d.nrows() != n || d.ncols() != n {
        return Err(ClusterError::Shape { rows: d.nrows(), cols: d.ncols(), labels: n });
    }
    if n == 0 {
        return Err(ClusterError::Empty);
    }
    let mut seen = BTreeSet::new();
    for l in labels {
        if !seen.insert(l) {
            return Err(ClusterError::DuplicateLabel(l.clone()));
        }
    }
    for i in 0..n {
        if d[(i, i)] != 0.0 {
            return Err(ClusterError::Diagonal(i));
        }
        for j in 0..n {
            let v = d[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(ClusterError::Invalid(i, j));
            }
            if (v - d[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(ClusterError::Asymmetric(i, j));
            }
        }
    }
    Ok(())
}

/// Agglomerative clustering. Each step merges the closest pair; ties go to
/// the pair whose smallest member labels are lexicographically smallest. The
/// merged cluster's left child is the one holding the smaller label.
pub fn linkage(d: &Matrix, labels: &[String], method: Linkage) -> Result<Dendrogram, ClusterError> {
    validate(d, labels)?;
    let n = labels.len();
    // active clusters: (node id, smallest label index by label order, size)
    let order: Vec<usize> = {
        let mut o: Vec<usize> = (0..n).collect();
        o.sort_by(|&a, &b| labels[a].cmp(&labels[b]));
        let mut rank = vec![0; n];
        for (r, &i) in o.iter().enumerate() {
            rank[i] = r;
        }
        rank
    };
    let mut node = (0..n).collect::<Vec<usize>>();
    let mut min_rank: Vec<usize> = order.clone();
    let mut size = vec![1usize; n];
    let mut active: Vec<bool> = vec![true; n];
    let mut dist = d.clone();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..n {
            if !active[a] {
                continue;
            }
            for b in a + 1..n {
                if !active[b] {
                    continue;
                }
                let (lo, hi) = if min_rank[a] < min_rank[b] { (a, b) } else { (b, a) };
                let cand = (dist[(a, b)], min_rank[lo], min_rank[hi], lo, hi);
                let better = match best {
                    None => true,
                    Some(cur) => (cand.0, cand.1, cand.2) < (cur.0, cur.1, cur.2),
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        let (height, _, _, lo, hi) = best.expect("two active clusters remain");
        merges.push(Merge { left: node[lo], right: node[hi], height });
        // Lance-Williams update into slot `lo`
        for c in 0..n {
            if !active[c] || c == lo || c == hi {
                continue;
            }
            let (x, y) = (dist[(lo, c)], dist[(hi, c)]);
            let v = match method {
                Linkage::Complete => x.max(y),
                Linkage::Single => x.min(y),
                Linkage::Average => (size[lo] as f64 * x + size[hi] as f64 * y) / (size[lo] + size[hi]) as f64,
            };
            dist[(lo, c)] = v;
            dist[(c, lo)] = v;
        }
        active[hi] = false;
        size[lo] += size[hi];
        min_rank[lo] = min_rank[lo].min(min_rank[hi]);
        node[lo] = n + step;
    }
    Ok(Dendrogram { labels: labels.to_vec(), merges })
}

pub fn complete_linkage(d: &Matrix, labels: &[String]) -> Result<Dendrogram, ClusterError> {
    linkage(d, labels, Linkage::Complete)
}

impl Dendrogram {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Leaf label indices under a node.
    pub fn members(&self, node: usize) -> Vec<usize> {
        let n = self.labels.len();
        if node < n {
            return vec![node];
        }
        let m = self.merges[node - n];
        let mut out = self.members(m.left);
        out.extend(self.members(m.right));
        out
    }

    /// Partition into `k` groups: the first `n - k` merges are kept. Groups
    /// are sorted internally and ordered by their smallest label.
    pub fn cut(&self, k: usize) -> Result<Vec<Vec<String>>, ClusterError> {
        let n = self.labels.len();
        if k == 0 || k > n {
            return Err(ClusterError::CutRange { k, n });
        }
        let mut parent: Vec<usize> = (0..n + self.merges.len()).collect();
        for (s, m) in self.merges.iter().take(n - k).enumerate() {
            parent[m.left] = n + s;
            parent[m.right] = n + s;
        }
        let root = |mut x: usize| {
            while parent[x] != x {
                x = parent[x];
            }
            x
        };
        let mut groups: std::collections::BTreeMap<usize, Vec<String>> = Default::default();
        for i in 0..n {
            groups.entry(root(i)).or_default().push(self.labels[i].clone());
        }
        let mut out: Vec<Vec<String>> = groups
            .into_values()
            .map(|mut g| {
                g.sort();
                g
            })
            .collect();
        out.sort();
        Ok(out)
    }

    fn height(&self, node: usize) -> f64 {
        if node < self.labels.len() {
            0.0
        } else {
            self.merges[node - self.labels.len()].height
        }
    }

    fn root(&self) -> usize {
        self.labels.len() + self.merges.len() - 1
    }

    fn subtree(&self, node: usize, lengths: &mut Vec<f64>, parent_height: f64) -> LabeledTree {
        lengths.push(parent_height - self.height(node));
        let n = self.labels.len();
        if node < n {
            return LabeledTree::leaf(self.labels[node].clone());
        }
        let m = self.merges[node - n];
        let h = m.height;
        let left = self.subtree(m.left, lengths, h);
        let right = self.subtree(m.right, lengths, h);
        LabeledTree::node("", vec![left, right])
    }

    /// Merge tree as a labeled tree: leaves keep their labels, internal nodes
    /// are unlabeled.
    pub fn to_tree(&self) -> LabeledTree {
        self.subtree(self.root(), &mut Vec::new(), self.height(self.root()))
    }

    /// Newick with merge-height differences as branch lengths.
    pub fn to_newick(&self) -> String {
        let mut lengths = Vec::new();
        let root = self.root();
        let tree = self.subtree(root, &mut lengths, self.height(root));
        tree.to_newick_with_lengths(&lengths)
    }
}

pub fn dendrogram_to_tree(d: &Dendrogram) -> LabeledTree {
    d.to_tree()
}

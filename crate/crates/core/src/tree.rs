//! Rooted labeled trees for decompositions: the authoritative package tree,
//! Newick I/O, constrained tree edit distance and path difference.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::facts::CorpusFacts;

/// Cost of renaming a leaf: effectively forbidden.
pub const LEAF_RENAME_COST: u64 = 1_000_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("duplicate leaf label `{0}`")]
    DuplicateLeaf(String),
    #[error("leaf sets differ; only in first: {only_first:?}; only in second: {only_second:?}")]
    LeafMismatch { only_first: Vec<String>, only_second: Vec<String> },
    #[error("corpus has no units")]
    EmptyCorpus,
    #[error("no module survives the package-size filter")]
    NothingLeft,
    #[error("newick: {0}")]
    Newick(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledTree {
    pub label: String,
    pub children: Vec<LabeledTree>,
}

impl LabeledTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        LabeledTree { label: label.into(), children: Vec::new() }
    }

    pub fn node(label: impl Into<String>, children: Vec<LabeledTree>) -> Self {
        LabeledTree { label: label.into(), children }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(LabeledTree::size).sum::<usize>()
    }

    /// Leaf labels in left-to-right order.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        if self.is_leaf() {
            out.push(&self.label);
        }
        for c in &self.children {
            c.collect_leaves(out);
        }
    }

    pub fn leaf_set(&self) -> BTreeSet<String> {
        self.leaves().into_iter().map(str::to_string).collect()
    }

    fn check_unique_leaves(&self) -> Result<(), TreeError> {
        let mut seen = BTreeSet::new();
        for l in self.leaves() {
            if !seen.insert(l) {
                return Err(TreeError::DuplicateLeaf(l.to_string()));
            }
        }
        Ok(())
    }

    fn min_leaf(&self) -> Option<&str> {
        if self.is_leaf() {
            return Some(&self.label);
        }
        self.children.iter().filter_map(LabeledTree::min_leaf).min()
    }

    /// Children sorted by their smallest descendant leaf label, recursively.
    /// Subtrees without leaves sort last, by label.
    pub fn canonical(&self) -> LabeledTree {
        let mut children: Vec<LabeledTree> = self.children.iter().map(LabeledTree::canonical).collect();
        children.sort_by(|a, b| match (a.min_leaf(), b.min_leaf()) {
            (Some(x), Some(y)) => x.cmp(y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.label.cmp(&b.label),
        });
        LabeledTree { label: self.label.clone(), children }
    }

    /// Keeps only the leaves in `keep`, dropping internal nodes left without
    /// leaves. With `collapse_unary`, internal nodes left with one child are
    /// replaced by that child.
    pub fn restrict_leaves(&self, keep: &BTreeSet<String>, collapse_unary: bool) -> Option<LabeledTree> {
        if self.is_leaf() {
            return keep.contains(&self.label).then(|| self.clone());
        }
        let children: Vec<LabeledTree> =
            self.children.iter().filter_map(|c| c.restrict_leaves(keep, collapse_unary)).collect();
        match children.len() {
            0 => None,
            1 if collapse_unary => children.into_iter().next(),
            _ => Some(LabeledTree { label: self.label.clone(), children }),
        }
    }

    pub fn to_newick(&self) -> String {
        let mut out = String::new();
        self.write_newick(&mut out, None);
        out.push(';');
        out
    }

    /// Newick with a branch length per node, looked up by preorder index.
    pub fn to_newick_with_lengths(&self, lengths: &[f64]) -> String {
        let mut out = String::new();
        let mut counter = 0;
        self.write_newick(&mut out, Some((lengths, &mut counter)));
        out.push(';');
        out
    }

    fn write_newick(&self, out: &mut String, mut lengths: Option<(&[f64], &mut usize)>) {
        let here = lengths.as_mut().map(|(ls, c)| {
            let v = ls[**c];
            **c += 1;
            v
        });
        if !self.is_leaf() {
            out.push('(');
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                c.write_newick(out, lengths.as_mut().map(|(ls, c)| (*ls, &mut **c)));
            }
            out.push(')');
        }
        out.push_str(&quote_label(&self.label));
        if let Some(len) = here {
            let _ = write!(out, ":{}", len);
        }
    }

    pub fn parse_newick(text: &str) -> Result<LabeledTree, TreeError> {
        let mut p = NewickParser { chars: text.trim().chars().collect(), pos: 0 };
        let tree = p.subtree()?;
        p.skip_ws();
        if p.peek() != Some(';') {
            return Err(TreeError::Newick(format!("expected `;` at offset {}", p.pos)));
        }
        p.pos += 1;
        p.skip_ws();
        if p.pos != p.chars.len() {
            return Err(TreeError::Newick(format!("trailing input at offset {}", p.pos)));
        }
        Ok(tree)
    }
}

fn quote_label(label: &str) -> String {
    if label.chars().any(|c| "()[]',;: \t\n".contains(c)) {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}

struct NewickParser {
    chars: Vec<char>,
    pos: usize,
}

impl NewickParser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn subtree(&mut self) -> Result<LabeledTree, TreeError> {
        self.skip_ws();
        let mut children = Vec::new();
        if self.peek() == Some('(') {
            self.pos += 1;
            loop {
                children.push(self.subtree()?);
                self.skip_ws();
                match self.peek() {
                    Some(',') => self.pos += 1,
                    Some(')') => {
                        self.pos += 1;
                        break;
                    }
                    other => {
                        return Err(TreeError::Newick(format!(
                            "expected `,` or `)` at offset {}, found {:?}",
                            self.pos, other
                        )))
                    }
                }
            }
        }
        self.skip_ws();
        let label = self.label()?;
        self.skip_ws();
        if self.peek() == Some(':') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit() || "+-.eE".contains(c) || c.is_alphabetic()) {
                self.pos += 1;
            }
            let text: String = self.chars[start..self.pos].iter().collect();
            text.parse::<f64>()
                .map_err(|_| TreeError::Newick(format!("bad branch length `{}` at offset {}", text, start)))?;
        }
        Ok(LabeledTree { label, children })
    }

    fn label(&mut self) -> Result<String, TreeError> {
        if self.peek() == Some('\'') {
            self.pos += 1;
            let mut out = String::new();
            loop {
                match self.peek() {
                    Some('\'') if self.chars.get(self.pos + 1) == Some(&'\'') => {
                        out.push('\'');
                        self.pos += 2;
                    }
                    Some('\'') => {
                        self.pos += 1;
                        return Ok(out);
                    }
                    Some(c) => {
                        out.push(c);
                        self.pos += 1;
                    }
                    None => return Err(TreeError::Newick("unterminated quoted label".into())),
                }
            }
        }
        let start = self.pos;
        while self.peek().is_some_and(|c| !"(),:;'".contains(c) && !c.is_whitespace()) {
            self.pos += 1;
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }
}

/// Size thresholds for the package tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageThresholds {
    /// Packages with fewer direct modules lose them.
    pub min_size: usize,
    /// Packages with more direct modules are split.
    pub max_size: usize,
}

impl Default for PackageThresholds {
    fn default() -> Self {
        PackageThresholds { min_size: 5, max_size: 40 }
    }
}

/// Label prefix of the synthetic packages created by splitting.
pub const SPLIT_PREFIX: &str = "split";

/// Package trie over the units of a corpus. Direct modules of small packages
/// are dropped; large packages are split into near-equal consecutive chunks
/// (by unit name) under synthetic child packages. Leaves are fully qualified
/// unit names; the root has an empty label.
pub fn authoritative_tree(facts: &CorpusFacts, thresholds: PackageThresholds) -> Result<LabeledTree, TreeError> {
    if facts.units.is_empty() {
        return Err(TreeError::EmptyCorpus);
    }
    authoritative_from_paths(facts.units.iter().map(|u| (u.package.clone(), u.unit.clone())), thresholds)
}

pub fn authoritative_from_paths(
    units: impl IntoIterator<Item = (Vec<String>, String)>,
    thresholds: PackageThresholds,
) -> Result<LabeledTree, TreeError> {
    let mut packages: BTreeMap<Vec<String>, Vec<String>> = BTreeMap::new();
    for (path, unit) in units {
        packages.entry(path).or_default().push(unit);
    }
    let mut placed: Vec<(Vec<String>, String)> = Vec::new();
    for (path, mut members) in packages {
        members.sort();
        let n = members.len();
        if n < thresholds.min_size {
            continue;
        }
        if n > thresholds.max_size {
            let chunks = n.div_ceil(thresholds.max_size);
            let (base, extra) = (n / chunks, n % chunks);
            let mut start = 0;
            for c in 0..chunks {
                let len = base + usize::from(c < extra);
                let mut sub = path.clone();
                sub.push(format!("{}{}", SPLIT_PREFIX, c + 1));
                for m in &members[start..start + len] {
                    placed.push((sub.clone(), m.clone()));
                }
                start += len;
            }
        } else {
            placed.extend(members.into_iter().map(|m| (path.clone(), m)));
        }
    }
    if placed.is_empty() {
        return Err(TreeError::NothingLeft);
    }
    let mut root = LabeledTree::leaf("");
    for (path, unit) in placed {
        let mut node = &mut root;
        for seg in path {
            let idx = match node.children.iter().position(|c| !c.is_leaf() && c.label == seg) {
                Some(i) => i,
                None => {
                    node.children.push(LabeledTree::node(seg, vec![LabeledTree::leaf("")]));
                    // placeholder keeps the new package internal until filled
                    node.children.len() - 1
                }
            };
            node = &mut node.children[idx];
        }
        node.children.push(LabeledTree::leaf(unit));
    }
    Ok(strip_placeholders(&root).canonical())
}

fn strip_placeholders(t: &LabeledTree) -> LabeledTree {
    LabeledTree {
        label: t.label.clone(),
        children: t
            .children
            .iter()
            .filter(|c| !(c.is_leaf() && c.label.is_empty()))
            .map(strip_placeholders)
            .collect(),
    }
}

/// Postorder view used by the edit-distance program.
struct Postorder<'a> {
    nodes: Vec<&'a LabeledTree>,
    /// index of the leftmost leaf descendant of each node
    lml: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Postorder<'a> {
    fn new(t: &'a LabeledTree) -> Self {
        let mut nodes = Vec::new();
        let mut lml = Vec::new();
        fn walk<'a>(t: &'a LabeledTree, nodes: &mut Vec<&'a LabeledTree>, lml: &mut Vec<usize>) -> usize {
            let mut first = None;
            for c in &t.children {
                let l = walk(c, nodes, lml);
                first.get_or_insert(l);
            }
            let idx = nodes.len();
            nodes.push(t);
            let l = first.unwrap_or(idx);
            lml.push(l);
            l
        }
        walk(t, &mut nodes, &mut lml);
        let mut keyroots: Vec<usize> = (0..nodes.len())
            .filter(|&i| !(i + 1..nodes.len()).any(|j| lml[j] == lml[i]))
            .collect();
        keyroots.sort_unstable();
        Postorder { nodes, lml, keyroots }
    }
}

/// Rename cost: identical labels are free; any other rename touching a leaf
/// is prohibited; internal nodes rename for free.
pub fn rename_cost(a: &LabeledTree, b: &LabeledTree) -> u64 {
    if a.label == b.label {
        0
    } else if a.is_leaf() || b.is_leaf() {
        LEAF_RENAME_COST
    } else {
        0
    }
}

/// Zhang-Shasha edit distance between the canonical orderings of two trees,
/// with unit insert and delete costs.
pub fn ted(t1: &LabeledTree, t2: &LabeledTree) -> Result<u64, TreeError> {
    t1.check_unique_leaves()?;
    t2.check_unique_leaves()?;
    Ok(ordered_ted(&t1.canonical(), &t2.canonical()))
}

/// Zhang-Shasha on the trees exactly as ordered.
pub fn ordered_ted(t1: &LabeledTree, t2: &LabeledTree) -> u64 {
    let a = Postorder::new(t1);
    let b = Postorder::new(t2);
    let (n, m) = (a.nodes.len(), b.nodes.len());
    let mut td = vec![vec![0u64; m]; n];
    let mut fd = vec![vec![0u64; m + 1]; n + 1];
    for &i in &a.keyroots {
        for &j in &b.keyroots {
            let (li, lj) = (a.lml[i], b.lml[j]);
            // fd indices are offset by the leftmost leaves; 0 is the empty forest
            fd[0][0] = 0;
            for x in li..=i {
                fd[x - li + 1][0] = fd[x - li][0] + 1;
            }
            for y in lj..=j {
                fd[0][y - lj + 1] = fd[0][y - lj] + 1;
            }
            for x in li..=i {
                for y in lj..=j {
                    let (fx, fy) = (x - li + 1, y - lj + 1);
                    let del = fd[fx - 1][fy] + 1;
                    let ins = fd[fx][fy - 1] + 1;
                    if a.lml[x] == li && b.lml[y] == lj {
                        let ren = fd[fx - 1][fy - 1] + rename_cost(a.nodes[x], b.nodes[y]);
                        fd[fx][fy] = del.min(ins).min(ren);
                        td[x][y] = fd[fx][fy];
                    } else {
                        let (px, py) = (a.lml[x] - li, b.lml[y] - lj);
                        let sub = fd[px][py] + td[x][y];
                        fd[fx][fy] = del.min(ins).min(sub);
                    }
                }
            }
        }
    }
    td[n - 1][m - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PdOptions {
    /// Count edges instead of nodes on each path.
    pub edges: bool,
    /// Report the square root of the sum of squares.
    pub sqrt: bool,
}

/// Leaf-to-leaf path lengths in nodes (endpoints included), keyed by the
/// ordered leaf pair.
pub fn leaf_path_lengths(t: &LabeledTree) -> BTreeMap<(String, String), usize> {
    // ancestor chains from the root, one per leaf
    let mut chains: Vec<(String, Vec<usize>)> = Vec::new();
    let mut counter = 0;
    fn walk(t: &LabeledTree, chain: &mut Vec<usize>, counter: &mut usize, out: &mut Vec<(String, Vec<usize>)>) {
        chain.push(*counter);
        *counter += 1;
        if t.is_leaf() {
            out.push((t.label.clone(), chain.clone()));
        }
        for c in &t.children {
            walk(c, chain, counter, out);
        }
        chain.pop();
    }
    walk(t, &mut Vec::new(), &mut counter, &mut chains);
    chains.sort();
    let mut out = BTreeMap::new();
    for i in 0..chains.len() {
        for j in i + 1..chains.len() {
            let (a, b) = (&chains[i].1, &chains[j].1);
            let common = a.iter().zip(b).take_while(|(x, y)| x == y).count();
            let edges = (a.len() - common) + (b.len() - common);
            out.insert((chains[i].0.clone(), chains[j].0.clone()), edges + 1);
        }
    }
    out
}

/// Sum over unordered leaf pairs of the squared difference in path length.
pub fn path_difference(t1: &LabeledTree, t2: &LabeledTree, options: PdOptions) -> Result<f64, TreeError> {
    t1.check_unique_leaves()?;
    t2.check_unique_leaves()?;
    let (s1, s2) = (t1.leaf_set(), t2.leaf_set());
    if s1 != s2 {
        return Err(TreeError::LeafMismatch {
            only_first: s1.difference(&s2).cloned().collect(),
            only_second: s2.difference(&s1).cloned().collect(),
        });
    }
    let offset = usize::from(options.edges);
    let (p1, p2) = (leaf_path_lengths(t1), leaf_path_lengths(t2));
    let sum: u64 = p1
        .iter()
        .map(|(k, &a)| {
            let b = p2[k];
            let d = (a - offset) as i64 - (b - offset) as i64;
            (d * d) as u64
        })
        .sum();
    Ok(if options.sqrt { (sum as f64).sqrt() } else { sum as f64 })
}

//! Conceptual similarity between types (path-based measures over the ITO
//! hierarchy, diffusion over the whole network) and between identifiers
//! (sense disambiguation over ISA edges).

use std::collections::{BTreeMap, HashMap, VecDeque};

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::network::{EdgeRelation, NetworkError, SemanticNetwork};
use crate::{TOP, UNTYPED};

#[derive(Debug, Error, PartialEq)]
pub enum ConceptError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

impl From<NetworkError> for ConceptError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::UnknownConcept(c) => ConceptError::UnknownConcept(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConceptMeasure {
    Ipl,
    Wup,
    Lc,
    Cd,
    Diffusion,
}

impl ConceptMeasure {
    pub const ALL: [ConceptMeasure; 5] =
        [ConceptMeasure::Ipl, ConceptMeasure::Wup, ConceptMeasure::Lc, ConceptMeasure::Cd, ConceptMeasure::Diffusion];

    pub fn name(self) -> &'static str {
        match self {
            ConceptMeasure::Ipl => "ipl",
            ConceptMeasure::Wup => "wup",
            ConceptMeasure::Lc => "lc",
            ConceptMeasure::Cd => "cd",
            ConceptMeasure::Diffusion => "diffusion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimilarityConfig {
    pub measure: ConceptMeasure,
    /// Decay exponent of the inverted path length.
    pub alpha_ipl: f64,
    /// Sinking factor of the diffusion kernel.
    pub alpha_diffusion: f64,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig { measure: ConceptMeasure::Diffusion, alpha_ipl: 1.0, alpha_diffusion: 0.5 }
    }
}

impl SimilarityConfig {
    pub fn with_measure(measure: ConceptMeasure) -> Self {
        SimilarityConfig { measure, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ConceptError> {
        if self.alpha_ipl.is_nan() || self.alpha_ipl <= 0.0 {
            return Err(ConceptError::NonPositive { name: "alpha_ipl", value: self.alpha_ipl });
        }
        if self.alpha_diffusion.is_nan() || self.alpha_diffusion <= 0.0 {
            return Err(ConceptError::NonPositive { name: "alpha_diffusion", value: self.alpha_diffusion });
        }
        Ok(())
    }
}

/// ITO hierarchy seen from the concepts: minimal depths, ancestor distances
/// and subhierarchy statistics.
#[derive(Debug, Clone)]
pub struct TypeHierarchy {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    depth: Vec<usize>,
    /// ancestor (inclusive) -> shortest upward distance
    ancestors: Vec<BTreeMap<usize, usize>>,
    sub_size: Vec<usize>,
    sub_edges: Vec<usize>,
}

impl TypeHierarchy {
    pub fn new(net: &SemanticNetwork) -> Self {
        let concept_ids: Vec<usize> = net.concepts().collect();
        let labels: Vec<String> = concept_ids.iter().map(|&c| net.label(c).to_string()).collect();
        let index: HashMap<String, usize> = labels.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect();
        let local: HashMap<usize, usize> = concept_ids.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let parents: Vec<Vec<usize>> =
            concept_ids.iter().map(|&c| net.supertypes(c).iter().map(|p| local[p]).collect()).collect();

        let ancestors: Vec<BTreeMap<usize, usize>> = (0..labels.len())
            .map(|start| {
                let mut dist = BTreeMap::from([(start, 0)]);
                let mut queue = VecDeque::from([start]);
                while let Some(n) = queue.pop_front() {
                    let d = dist[&n];
                    for &p in &parents[n] {
                        if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(p) {
                            e.insert(d + 1);
                            queue.push_back(p);
                        }
                    }
                }
                dist
            })
            .collect();
        let root = index[TOP];
        let depth = ancestors.iter().map(|a| a.get(&root).copied().unwrap_or(0)).collect();

        let mut sub_size = vec![0; labels.len()];
        let mut sub_edges = vec![0; labels.len()];
        for (i, label) in labels.iter().enumerate() {
            let sub = net.subhierarchy(label).expect("concept exists");
            sub_size[i] = sub.size();
            sub_edges[i] = sub.internal_edges;
        }
        TypeHierarchy { labels, index, depth, ancestors, sub_size, sub_edges }
    }

    pub fn contains(&self, concept: &str) -> bool {
        self.index.contains_key(concept)
    }

    pub fn concepts(&self) -> &[String] {
        &self.labels
    }

    fn id(&self, concept: &str) -> Result<usize, ConceptError> {
        self.index.get(concept).copied().ok_or_else(|| ConceptError::UnknownConcept(concept.to_string()))
    }

    pub fn depth(&self, concept: &str) -> Result<usize, ConceptError> {
        Ok(self.depth[self.id(concept)?])
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    fn nch_id(&self, a: usize, b: usize) -> usize {
        self.ancestors[a]
            .keys()
            .filter(|k| self.ancestors[b].contains_key(k))
            .copied()
            .max_by(|&x, &y| {
                self.depth[x].cmp(&self.depth[y]).then_with(|| self.labels[y].cmp(&self.labels[x]))
            })
            .expect("the root subsumes every concept")
    }

    /// Deepest common ITO ancestor; ties go to the lexicographically smallest.
    pub fn nch(&self, a: &str, b: &str) -> Result<&str, ConceptError> {
        let n = self.nch_id(self.id(a)?, self.id(b)?);
        Ok(&self.labels[n])
    }

    /// `(l1, l2, nch)`: upward distances from each concept to their nch.
    fn legs(&self, a: usize, b: usize) -> (usize, usize, usize) {
        let n = self.nch_id(a, b);
        (self.ancestors[a][&n], self.ancestors[b][&n], n)
    }

    pub fn path_length(&self, a: &str, b: &str) -> Result<usize, ConceptError> {
        let (l1, l2, _) = self.legs(self.id(a)?, self.id(b)?);
        Ok(l1 + l2)
    }

    pub fn sim_ipl(&self, a: &str, b: &str, alpha: f64) -> Result<f64, ConceptError> {
        Ok(ipl(self.path_length(a, b)?, alpha))
    }

    pub fn sim_wup(&self, a: &str, b: &str) -> Result<f64, ConceptError> {
        let (l1, l2, n) = self.legs(self.id(a)?, self.id(b)?);
        Ok(wup(l1, l2, self.depth[n]))
    }

    pub fn sim_lc(&self, a: &str, b: &str) -> Result<f64, ConceptError> {
        let (ia, ib) = (self.id(a)?, self.id(b)?);
        let (l1, l2, _) = self.legs(ia, ib);
        Ok(lc(l1 + l2, self.depth[ia].max(self.depth[ib])))
    }

    pub fn sim_cd(&self, a: &str, b: &str) -> Result<f64, ConceptError> {
        let n = self.nch_id(self.id(a)?, self.id(b)?);
        Ok(cd(self.sub_edges[n], self.sub_size[n]))
    }
}

pub fn ipl(d: usize, alpha: f64) -> f64 {
    1.0 / (1.0 + d as f64).powf(alpha)
}

pub fn wup(l1: usize, l2: usize, nch_depth: usize) -> f64 {
    let num = 2.0 * nch_depth as f64;
    let denom = (l1 + l2) as f64 + num;
    if denom == 0.0 {
        // both concepts are the root
        1.0
    } else {
        num / denom
    }
}

/// Leacock-Chodorow with `d` clamped to at least 1 and the depth to at least
/// 1; negative scores (d beyond twice the depth) clamp to 0.
pub fn lc(d: usize, max_depth: usize) -> f64 {
    let d = d.max(1) as f64;
    let depth = max_depth.max(1) as f64;
    (-(d / (2.0 * depth)).ln()).max(0.0)
}

/// Conceptual density of a subhierarchy with `edges` internal ITO edges over
/// `size` nodes.
pub fn cd(edges: usize, size: usize) -> f64 {
    let mu = edges as f64 / size as f64;
    let h = cd_horizon(mu);
    (0..=h).map(|i| mu.powi(i as i32)).sum::<f64>() / size as f64
}

fn cd_horizon(mu: f64) -> u32 {
    if mu == 1.0 {
        2
    } else if mu <= 0.0 {
        0
    } else {
        let h = (2f64.ln() / mu.ln()).floor();
        if h > 0.0 {
            h as u32
        } else {
            0
        }
    }
}

/// Matrix exponential `exp(alpha A)` of a symmetric matrix via its
/// eigendecomposition.
pub fn symmetric_exp(a: &Matrix, alpha: f64) -> Matrix {
    if a.nrows() == 0 {
        return a.clone();
    }
    let eig = SymmetricEigen::new(a.clone());
    let v = &eig.eigenvectors;
    let d = Matrix::from_diagonal(&eig.eigenvalues.map(|l| (alpha * l).exp()));
    v * d * v.transpose()
}

/// Diffusion kernel over every node of the network, rescaled to unit
/// diagonal.
#[derive(Debug, Clone)]
pub struct DiffusionKernel {
    pub matrix: Matrix,
}

impl DiffusionKernel {
    pub fn new(net: &SemanticNetwork, alpha: f64) -> Self {
        let n = net.nodes().len();
        let mut a = Matrix::zeros(n, n);
        for e in net.edges() {
            if e.source != e.target {
                a[(e.source, e.target)] += e.weight;
                a[(e.target, e.source)] += e.weight;
            }
        }
        DiffusionKernel { matrix: rescaled_exp(&a, alpha) }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }
}

/// `exp(alpha A)` rescaled to unit diagonal. Each connected component is
/// decomposed on its own with its largest eigenvalue shifted out, so large
/// weights cannot overflow; the shift cancels in the rescaling.
pub fn rescaled_exp(a: &Matrix, alpha: f64) -> Matrix {
    let n = a.nrows();
    let mut out = Matrix::zeros(n, n);
    for comp in components(a) {
        let m = comp.len();
        let sub = Matrix::from_fn(m, m, |i, j| a[(comp[i], comp[j])]);
        let eig = SymmetricEigen::new(sub);
        let top = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let v = &eig.eigenvectors;
        let d = Matrix::from_diagonal(&eig.eigenvalues.map(|l| (alpha * (l - top)).exp()));
        let k = v * d * v.transpose();
        for i in 0..m {
            for j in 0..m {
                let denom = (k[(i, i)] * k[(j, j)]).sqrt();
                out[(comp[i], comp[j])] = if i == j {
                    1.0
                } else if denom > 0.0 {
                    k[(i, j)] / denom
                } else {
                    0.0
                };
            }
        }
    }
    out
}

fn components(a: &Matrix) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut stack = vec![s];
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !seen[j] && (a[(i, j)] != 0.0 || a[(j, i)] != 0.0) {
                    seen[j] = true;
                    comp.push(j);
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Type-level similarity with a chosen measure, total over type names: the
/// untyped sentinel is similar only to itself and names absent from the
/// network fall back to identity.
#[derive(Debug, Clone)]
pub struct ConceptSimilarity {
    config: SimilarityConfig,
    hierarchy: TypeHierarchy,
    diffusion: Option<DiffusionKernel>,
    node_of: HashMap<String, usize>,
}

impl ConceptSimilarity {
    pub fn new(net: &SemanticNetwork, config: SimilarityConfig) -> Result<Self, ConceptError> {
        config.validate()?;
        let diffusion =
            (config.measure == ConceptMeasure::Diffusion).then(|| DiffusionKernel::new(net, config.alpha_diffusion));
        let node_of = net.concepts().map(|c| (net.label(c).to_string(), c)).collect();
        Ok(ConceptSimilarity { config, hierarchy: TypeHierarchy::new(net), diffusion, node_of })
    }

    pub fn config(&self) -> &SimilarityConfig {
        &self.config
    }

    pub fn hierarchy(&self) -> &TypeHierarchy {
        &self.hierarchy
    }

    pub fn sim(&self, a: &str, b: &str) -> f64 {
        if a == UNTYPED || b == UNTYPED {
            return if a == b { 1.0 } else { 0.0 };
        }
        if !self.hierarchy.contains(a) || !self.hierarchy.contains(b) {
            return if a == b { 1.0 } else { 0.0 };
        }
        let h = &self.hierarchy;
        match self.config.measure {
            ConceptMeasure::Ipl => h.sim_ipl(a, b, self.config.alpha_ipl),
            ConceptMeasure::Wup => h.sim_wup(a, b),
            ConceptMeasure::Lc => h.sim_lc(a, b),
            ConceptMeasure::Cd => h.sim_cd(a, b),
            ConceptMeasure::Diffusion => {
                let k = self.diffusion.as_ref().expect("diffusion kernel built");
                Ok(k.get(self.node_of[a], self.node_of[b]))
            }
        }
        .expect("both concepts are known")
    }

    /// Square table over `labels`.
    pub fn table(&self, labels: &[String]) -> Matrix {
        Matrix::from_fn(labels.len(), labels.len(), |i, j| self.sim(&labels[i], &labels[j]))
    }
}

/// One candidate sense pair of an identifier comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct SensePair {
    pub first: String,
    pub second: String,
    pub score: f64,
}

/// Senses of an identifier with their ISA weights, ordered by concept label.
pub fn senses(net: &SemanticNetwork, id: &str) -> Vec<(String, f64)> {
    let Some(t) = net.term(id) else { return Vec::new() };
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for e in net.out_edges(t).filter(|e| e.relation == EdgeRelation::Isa) {
        *out.entry(net.label(e.target).to_string()).or_insert(0.0) += e.weight;
    }
    out.into_iter().collect()
}

/// Every sense pair with its score, in deterministic order.
pub fn sense_pairs(
    net: &SemanticNetwork,
    id1: &str,
    id2: &str,
    concept_sim: impl Fn(&str, &str) -> f64,
) -> Vec<SensePair> {
    let s1 = senses(net, id1);
    let s2 = senses(net, id2);
    let mut out = Vec::with_capacity(s1.len() * s2.len());
    for (ta, wa) in &s1 {
        for (tb, wb) in &s2 {
            let share = wa / (2.0 * net.instance_degree(ta)) + wb / (2.0 * net.instance_degree(tb));
            out.push(SensePair { first: ta.clone(), second: tb.clone(), score: concept_sim(ta, tb) * share });
        }
    }
    out
}

/// Identifier similarity: the best sense pair, each sense's conceptual score
/// damped by how many instances its type carries. The first pair wins ties;
/// identifiers with no sense score 0.
pub fn disambiguate_sim(
    net: &SemanticNetwork,
    id1: &str,
    id2: &str,
    concept_sim: impl Fn(&str, &str) -> f64,
) -> f64 {
    best_sense_pair(net, id1, id2, concept_sim).map_or(0.0, |p| p.score)
}

pub fn best_sense_pair(
    net: &SemanticNetwork,
    id1: &str,
    id2: &str,
    concept_sim: impl Fn(&str, &str) -> f64,
) -> Option<SensePair> {
    let mut best: Option<SensePair> = None;
    for pair in sense_pairs(net, id1, id2, concept_sim) {
        if best.as_ref().is_none_or(|b| pair.score > b.score) {
            best = Some(pair);
        }
    }
    best
}

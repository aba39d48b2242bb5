//! Bag-of-features document vectors, the semantic proximity matrix `P = R S`
//! and the document kernel `K = Phi P P^T Phi^T` with cosine normalization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concept::{disambiguate_sim, ConceptSimilarity};
use crate::facts::CorpusFacts;
use crate::lexical::LexicalConfig;
use crate::linalg::{cosine_normalize, Matrix};
use crate::network::SemanticNetwork;

/// Floor for idf weights so that `R` stays positive.
pub const IDF_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum VectorError {
    #[error("corpus has no units")]
    EmptyCorpus,
    #[error("corpus yields no {0} features")]
    NoFeatures(FeatureKind),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Boi,
    Boit,
    Bot,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Boi => "BoI",
            FeatureKind::Boit => "BoIT",
            FeatureKind::Bot => "BoT",
        })
    }
}

/// An identifier, a type, or an identifier-type pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Feature {
    pub id: Option<String>,
    pub ty: Option<String>,
}

impl Feature {
    fn of(kind: FeatureKind, id: &str, ty: &str) -> Self {
        match kind {
            FeatureKind::Boi => Feature { id: Some(id.into()), ty: None },
            FeatureKind::Boit => Feature { id: Some(id.into()), ty: Some(ty.into()) },
            FeatureKind::Bot => Feature { id: None, ty: Some(ty.into()) },
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.id, &self.ty) {
            (Some(i), Some(t)) => write!(f, "({},{})", i, t),
            (Some(i), None) => f.write_str(i),
            (None, Some(t)) => f.write_str(t),
            (None, None) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpace {
    pub kind: FeatureKind,
    pub features: Vec<Feature>,
}

impl FeatureSpace {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.features.iter().map(|f| f.to_string()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocFeatureMatrix {
    pub docs: Vec<String>,
    pub space: FeatureSpace,
    /// docs x features occurrence counts
    pub counts: Matrix,
}

impl DocFeatureMatrix {
    /// Count of a feature in a document, 0 when either is absent.
    pub fn count(&self, doc: &str, feature: &Feature) -> f64 {
        let d = self.docs.iter().position(|x| x == doc);
        let f = self.space.features.iter().position(|x| x == feature);
        match (d, f) {
            (Some(d), Some(f)) => self.counts[(d, f)],
            _ => 0.0,
        }
    }

    /// Nonzero `(feature label, count)` pairs of one document row.
    pub fn row(&self, doc: usize) -> BTreeMap<String, u64> {
        (0..self.space.len())
            .filter(|&f| self.counts[(doc, f)] > 0.0)
            .map(|f| (self.space.features[f].to_string(), self.counts[(doc, f)] as u64))
            .collect()
    }
}

pub fn build_bof(corpus: &CorpusFacts, kind: FeatureKind) -> Result<DocFeatureMatrix, VectorError> {
    if corpus.units.is_empty() {
        return Err(VectorError::EmptyCorpus);
    }
    let mut rows: Vec<BTreeMap<Feature, u64>> = Vec::with_capacity(corpus.units.len());
    let mut all: BTreeSet<Feature> = BTreeSet::new();
    for unit in &corpus.units {
        let mut row = BTreeMap::new();
        for o in &unit.occurrences {
            let f = Feature::of(kind, &o.id, &o.ty);
            *row.entry(f.clone()).or_insert(0) += o.count;
            all.insert(f);
        }
        rows.push(row);
    }
    if all.is_empty() {
        return Err(VectorError::NoFeatures(kind));
    }
    let features: Vec<Feature> = all.into_iter().collect();
    let col: BTreeMap<&Feature, usize> = features.iter().enumerate().map(|(i, f)| (f, i)).collect();
    let mut counts = Matrix::zeros(rows.len(), features.len());
    for (d, row) in rows.iter().enumerate() {
        for (f, c) in row {
            counts[(d, col[f])] = *c as f64;
        }
    }
    Ok(DocFeatureMatrix {
        docs: corpus.units.iter().map(|u| u.unit.clone()).collect(),
        space: FeatureSpace { kind, features },
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Raw counts, `R = I`.
    None,
    /// Raw counts, `R = idf`.
    #[default]
    Idf,
    /// Sublinear term frequency `1 + ln tf`, `R = idf`.
    Tfidf,
}

/// `R(f,f) = ln(N / df(f))`, floored at [`IDF_FLOOR`].
pub fn idf_diag(m: &DocFeatureMatrix) -> Vec<f64> {
    let n = m.docs.len() as f64;
    (0..m.space.len())
        .map(|f| {
            let df = (0..m.docs.len()).filter(|&d| m.counts[(d, f)] > 0.0).count() as f64;
            if df == 0.0 {
                return IDF_FLOOR;
            }
            (n / df).ln().max(IDF_FLOOR)
        })
        .collect()
}

/// Document rows and diagonal feature weights under a weighting scheme.
pub fn weigh(m: &DocFeatureMatrix, weighting: Weighting) -> (Matrix, Vec<f64>) {
    match weighting {
        Weighting::None => (m.counts.clone(), vec![1.0; m.space.len()]),
        Weighting::Idf => (m.counts.clone(), idf_diag(m)),
        Weighting::Tfidf => (m.counts.map(|c| if c > 0.0 { 1.0 + c.ln() } else { 0.0 }), idf_diag(m)),
    }
}

/// Sources of feature-feature similarity. A missing component counts as a
/// factor of 1 off the diagonal; both missing gives `S = I`.
pub struct SemanticSources<'a> {
    pub network: &'a SemanticNetwork,
    pub concept: Option<&'a ConceptSimilarity>,
    pub lexical: Option<LexicalConfig>,
}

/// Feature similarity matrix `S`: symmetric, unit diagonal.
///
/// BoI pairs use sense-disambiguated identifier similarity times lexical
/// similarity; BoIT pairs use type similarity times lexical similarity of the
/// identifiers; BoT pairs use type similarity alone.
pub fn semantic_matrix(space: &FeatureSpace, sources: &SemanticSources<'_>) -> Matrix {
    let n = space.len();
    if sources.concept.is_none() && sources.lexical.is_none() {
        return Matrix::identity(n, n);
    }
    let concept = |a: &Feature, b: &Feature| -> f64 {
        let Some(cs) = sources.concept else { return 1.0 };
        match space.kind {
            FeatureKind::Boi => disambiguate_sim(
                sources.network,
                a.id.as_deref().unwrap_or_default(),
                b.id.as_deref().unwrap_or_default(),
                |x, y| cs.sim(x, y),
            ),
            FeatureKind::Boit | FeatureKind::Bot => {
                cs.sim(a.ty.as_deref().unwrap_or_default(), b.ty.as_deref().unwrap_or_default())
            }
        }
    };
    let lexical = |a: &Feature, b: &Feature| -> f64 {
        match (space.kind, sources.lexical) {
            (FeatureKind::Bot, _) | (_, None) => 1.0,
            (_, Some(cfg)) => cfg.sim(a.id.as_deref().unwrap_or_default(), b.id.as_deref().unwrap_or_default()),
        }
    };
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = &space.features[i];
            (i + 1..n)
                .map(|j| {
                    let b = &space.features[j];
                    let v = lexical(a, b);
                    if v == 0.0 {
                        0.0
                    } else {
                        v * concept(a, b)
                    }
                })
                .collect()
        })
        .collect();
    let mut s = Matrix::identity(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let j = i + 1 + k;
            let v = if v.is_finite() { v.max(0.0) } else { 0.0 };
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// `P = R S` with `R` diagonal.
pub fn proximity(r: &[f64], s: &Matrix) -> Result<Matrix, VectorError> {
    if r.len() != s.nrows() || !s.is_square() {
        return Err(VectorError::Dimension(format!("R has {} entries, S is {}x{}", r.len(), s.nrows(), s.ncols())));
    }
    let mut p = s.clone();
    for (i, w) in r.iter().enumerate() {
        p.row_mut(i).scale_mut(*w);
    }
    Ok(p)
}

/// Unnormalized document kernel `Phi P (Phi P)^T`.
pub fn document_gram(phi: &Matrix, p: &Matrix) -> Result<Matrix, VectorError> {
    if phi.ncols() != p.nrows() {
        return Err(VectorError::Dimension(format!("Phi has {} columns, P has {} rows", phi.ncols(), p.nrows())));
    }
    let x = phi * p;
    Ok(&x * x.transpose())
}

/// Cosine-normalized document kernel. All-zero documents get similarity 0 to
/// everything else and 1 to themselves.
pub fn document_kernel(phi: &Matrix, p: &Matrix) -> Result<Matrix, VectorError> {
    Ok(cosine_normalize(&document_gram(phi, p)?))
}

/// `D = 1 - K'` with zero diagonal, clamped to `[0, 2]`.
pub fn kernel_to_distance(k: &Matrix) -> Matrix {
    let n = k.nrows();
    Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (1.0 - k[(i, j)]).clamp(0.0, 2.0) })
}

//! End-to-end studies: modularization against the package tree, identifier
//! topics, and the module-by-type context map.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Display;
use std::time::{Duration, Instant};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{linkage, Dendrogram, Linkage};
use crate::concept::{disambiguate_sim, rescaled_exp, ConceptMeasure, ConceptSimilarity, SimilarityConfig};
use crate::ddg::{build_ddg, corpus_lambda, merge_graphs, walk_kernel_matrix, DepGraph, NAMELESS};
use crate::facts::{extract_corpus, CorpusFacts, LibraryFacts};
use crate::lexical::{LexicalConfig, LexicalKernel};
use crate::linalg::{normalized_euclidean, Matrix};
use crate::network::{build_network_with, NetworkOptions, SemanticNetwork};
use crate::syntax::SourceUnit;
use crate::tree::{authoritative_tree, path_difference, ted, LabeledTree, PackageThresholds, PdOptions};
use crate::vector::{
    build_bof, document_kernel, kernel_to_distance, proximity, semantic_matrix, weigh, Feature, FeatureKind,
    FeatureSpace, SemanticSources, Weighting, IDF_FLOOR,
};

#[derive(Debug, Error, PartialEq)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub message: String,
}

fn at<E: Display>(stage: &'static str) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError { stage, message: e.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    #[default]
    Boi,
    Boit,
    Bot,
    Ddg,
}

impl Model {
    fn feature_kind(self) -> Option<FeatureKind> {
        match self {
            Model::Boi => Some(FeatureKind::Boi),
            Model::Boit => Some(FeatureKind::Boit),
            Model::Bot => Some(FeatureKind::Bot),
            Model::Ddg => None,
        }
    }
}

/// Named enrichment recipes. `ssn1` and `ssn2` pair conceptual density or
/// diffusion with the longest-common-substring kernel on the configured
/// model; `ssk1` is diffusion and substring on identifier-type pairs and
/// `ssk2` the same label similarity inside the walk kernel. `custom` reads
/// the `concept` and `lexical` fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Enrichment {
    #[default]
    Plain,
    Ssn1,
    Ssn2,
    Ssk1,
    Ssk2,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: Model,
    pub enrichment: Enrichment,
    pub concept: Option<ConceptMeasure>,
    pub lexical: Option<LexicalKernel>,
    pub weighting: Weighting,
    pub linkage: Linkage,
    pub k: Option<usize>,
    pub thresholds: PackageThresholds,
    pub pd: PdOptions,
    pub alpha_ipl: f64,
    pub alpha_diffusion: f64,
    pub const_normalization: bool,
    pub case_sensitive: bool,
    pub supervised: bool,
    /// Walk-kernel decay; derived from the corpus when absent.
    pub lambda: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let sim = SimilarityConfig::default();
        PipelineConfig {
            model: Model::Boi,
            enrichment: Enrichment::Plain,
            concept: None,
            lexical: None,
            weighting: Weighting::Idf,
            linkage: Linkage::Complete,
            k: None,
            thresholds: PackageThresholds::default(),
            pd: PdOptions::default(),
            alpha_ipl: sim.alpha_ipl,
            alpha_diffusion: sim.alpha_diffusion,
            const_normalization: true,
            case_sensitive: false,
            supervised: false,
            lambda: None,
        }
    }
}

/// Model and similarity components after applying the enrichment recipe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Semantics {
    pub model: Model,
    pub concept: Option<ConceptMeasure>,
    pub lexical: Option<LexicalKernel>,
}

impl PipelineConfig {
    pub fn preset(enrichment: Enrichment) -> Self {
        PipelineConfig { enrichment, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.k == Some(0) {
            return Err(PipelineError { stage: "config", message: "k must be at least 1".into() });
        }
        if self.thresholds.max_size == 0 || self.thresholds.min_size > self.thresholds.max_size {
            return Err(PipelineError {
                stage: "config",
                message: "package sizes need 1 <= max and min <= max".into(),
            });
        }
        if self.lambda.is_some_and(|l| l < 0.0 || !l.is_finite()) {
            return Err(PipelineError { stage: "config", message: "lambda must be finite and nonnegative".into() });
        }
        self.similarity_config(ConceptMeasure::Ipl).validate().map_err(at("config"))
    }

    pub fn semantics(&self) -> Semantics {
        use ConceptMeasure::{Cd, Diffusion};
        let (model, concept, lexical) = match self.enrichment {
            Enrichment::Plain => (self.model, None, None),
            Enrichment::Ssn1 => (self.model, Some(Cd), Some(LexicalKernel::Lcu)),
            Enrichment::Ssn2 => (self.model, Some(Diffusion), Some(LexicalKernel::Lcu)),
            Enrichment::Ssk1 => (Model::Boit, Some(Diffusion), Some(LexicalKernel::Lcu)),
            Enrichment::Ssk2 => (Model::Ddg, Some(Diffusion), Some(LexicalKernel::Lcu)),
            Enrichment::Custom => (self.model, self.concept, self.lexical),
        };
        Semantics { model, concept, lexical }
    }

    fn similarity_config(&self, measure: ConceptMeasure) -> SimilarityConfig {
        SimilarityConfig { measure, alpha_ipl: self.alpha_ipl, alpha_diffusion: self.alpha_diffusion }
    }

    pub fn lexical_config(&self, kernel: LexicalKernel) -> LexicalConfig {
        LexicalConfig { kernel, const_normalization: self.const_normalization, case_sensitive: self.case_sensitive }
    }

    /// The plain bag-of-identifiers run every other run is compared with.
    pub fn baseline(&self) -> Self {
        PipelineConfig { model: Model::Boi, enrichment: Enrichment::Plain, ..self.clone() }
    }
}

/// Corpus facts, library facts and, for graph models, the parsed sources.
#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub corpus: CorpusFacts,
    pub libs: LibraryFacts,
    pub sources: Vec<SourceUnit>,
}

impl Inputs {
    pub fn from_sources(sources: Vec<SourceUnit>, libs: LibraryFacts) -> Self {
        let corpus = extract_corpus(&sources, &libs);
        Inputs { corpus, libs, sources }
    }

    pub fn network(&self, supervised: bool) -> SemanticNetwork {
        build_network_with(&self.corpus, &self.libs, NetworkOptions { supervised })
    }

    pub fn unit_names(&self) -> Vec<String> {
        self.corpus.units.iter().map(|u| u.unit.clone()).collect()
    }

    /// Dependency graphs in corpus order.
    pub fn graphs(&self) -> Result<Vec<DepGraph>, PipelineError> {
        let by_name: HashMap<&str, &SourceUnit> = self.sources.iter().map(|s| (s.unit_name.as_str(), s)).collect();
        self.corpus
            .units
            .iter()
            .map(|u| {
                by_name.get(u.unit.as_str()).map(|s| build_ddg(s)).ok_or_else(|| PipelineError {
                    stage: "ddg",
                    message: format!("no source for unit `{}`; graph models need parsed sources", u.unit),
                })
            })
            .collect()
    }
}

/// Pairwise identifier similarity over a fixed vocabulary: sense-disambiguated
/// conceptual similarity times lexical similarity, 1 on identical names.
pub struct IdentifierSimilarity {
    index: HashMap<String, usize>,
    table: Matrix,
}

impl IdentifierSimilarity {
    pub fn new(
        vocabulary: &BTreeSet<String>,
        net: &SemanticNetwork,
        concept: Option<&ConceptSimilarity>,
        lexical: Option<LexicalConfig>,
    ) -> Self {
        let words: Vec<String> = vocabulary.iter().cloned().collect();
        let space = FeatureSpace {
            kind: FeatureKind::Boi,
            features: words.iter().map(|w| Feature { id: Some(w.clone()), ty: None }).collect(),
        };
        let table = semantic_matrix(&space, &SemanticSources { network: net, concept, lexical });
        let index = words.into_iter().enumerate().map(|(i, w)| (w, i)).collect();
        IdentifierSimilarity { index, table }
    }

    pub fn sim(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 1.0;
        }
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) => self.table[(i, j)],
            _ => 0.0,
        }
    }
}

fn concept_similarity(
    net: &SemanticNetwork,
    cfg: &PipelineConfig,
    sem: &Semantics,
) -> Result<Option<ConceptSimilarity>, PipelineError> {
    sem.concept
        .map(|m| ConceptSimilarity::new(net, cfg.similarity_config(m)))
        .transpose()
        .map_err(at("similarity"))
}

/// Cosine-normalized document similarity in corpus order.
pub fn document_similarity(inputs: &Inputs, cfg: &PipelineConfig) -> Result<Matrix, PipelineError> {
    cfg.validate()?;
    let sem = cfg.semantics();
    let enriched = sem.concept.is_some() || sem.lexical.is_some();
    let net = if enriched { Some(inputs.network(cfg.supervised)) } else { None };
    let cs = match &net {
        Some(n) => concept_similarity(n, cfg, &sem)?,
        None => None,
    };
    let lexical = sem.lexical.map(|k| cfg.lexical_config(k));
    match sem.model.feature_kind() {
        Some(kind) => {
            let m = build_bof(&inputs.corpus, kind).map_err(at("features"))?;
            let (phi, r) = weigh(&m, cfg.weighting);
            let s = match &net {
                Some(n) => semantic_matrix(&m.space, &SemanticSources { network: n, concept: cs.as_ref(), lexical }),
                None => Matrix::identity(m.space.len(), m.space.len()),
            };
            let p = proximity(&r, &s).map_err(at("kernel"))?;
            document_kernel(&phi, &p).map_err(at("kernel"))
        }
        None => {
            let graphs = inputs.graphs()?;
            let lambda = cfg.lambda.unwrap_or_else(|| corpus_lambda(&graphs));
            info!("walk kernel lambda {}", lambda);
            match &net {
                Some(n) => {
                    let vocab: BTreeSet<String> =
                        graphs.iter().flat_map(|g| g.vertices.iter().map(|v| v.label.clone())).collect();
                    let ids = IdentifierSimilarity::new(&vocab, n, cs.as_ref(), lexical);
                    walk_kernel_matrix(&graphs, &|a: &str, b: &str| ids.sim(a, b), lambda)
                }
                None => walk_kernel_matrix(&graphs, &|a: &str, b: &str| f64::from(u8::from(a == b)), lambda),
            }
            .map_err(at("kernel"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub pd: f64,
    pub ted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deltas {
    pub pd: String,
    pub ted: String,
}

/// Relative change `(new - old) / old` as a percentage with two decimals.
pub fn format_delta(new: f64, old: f64) -> String {
    if old == 0.0 {
        return if new == 0.0 { "0.00%".into() } else { "n/a".into() };
    }
    let pct = (new - old) / old * 100.0;
    let pct = if pct == 0.0 { 0.0 } else { pct };
    format!("{:.2}%", pct)
}

pub fn deltas(new: Scores, old: Scores) -> Deltas {
    Deltas { pd: format_delta(new.pd, old.pd), ted: format_delta(new.ted as f64, old.ted as f64) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub modules: usize,
    pub evaluated: usize,
    pub scores: Scores,
    pub baseline: Scores,
    pub deltas: Deltas,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<Vec<String>>>,
    pub artifacts: Vec<String>,
    #[serde(skip)]
    pub elapsed: Duration,
}

pub struct Modularization {
    pub labels: Vec<String>,
    pub kernel: Matrix,
    pub dendrogram: Dendrogram,
    pub produced: LabeledTree,
    pub authoritative: LabeledTree,
    pub report: RunReport,
}

/// Clusters the documents and scores the dendrogram against the package
/// tree. Modules dropped from the package tree are dropped from the
/// dendrogram too, collapsing the unary nodes this leaves behind.
pub fn evaluate_clustering(
    inputs: &Inputs,
    kernel: &Matrix,
    cfg: &PipelineConfig,
) -> Result<(Dendrogram, LabeledTree, LabeledTree, Scores), PipelineError> {
    let labels = inputs.unit_names();
    let d = kernel_to_distance(kernel);
    let dendrogram = linkage(&d, &labels, cfg.linkage).map_err(at("cluster"))?;
    let authoritative = authoritative_tree(&inputs.corpus, cfg.thresholds).map_err(at("evaluate"))?;
    let keep = authoritative.leaf_set();
    let produced = dendrogram
        .to_tree()
        .restrict_leaves(&keep, true)
        .ok_or_else(|| PipelineError { stage: "evaluate", message: "no module left to compare".into() })?;
    let pd = path_difference(&produced, &authoritative, cfg.pd).map_err(at("evaluate"))?;
    let ted = ted(&produced, &authoritative).map_err(at("evaluate"))?;
    Ok((dendrogram, produced, authoritative, Scores { pd, ted }))
}

pub fn modularize(inputs: &Inputs, cfg: &PipelineConfig) -> Result<Modularization, PipelineError> {
    let start = Instant::now();
    let kernel = document_similarity(inputs, cfg)?;
    let (dendrogram, produced, authoritative, scores) = evaluate_clustering(inputs, &kernel, cfg)?;
    let baseline_cfg = cfg.baseline();
    let baseline = if baseline_cfg.semantics() == cfg.semantics() {
        scores
    } else {
        let k = document_similarity(inputs, &baseline_cfg)?;
        evaluate_clustering(inputs, &k, &baseline_cfg)?.3
    };
    let partition = cfg.k.map(|k| dendrogram.cut(k)).transpose().map_err(at("cluster"))?;
    let report = RunReport {
        config: cfg.clone(),
        modules: inputs.corpus.units.len(),
        evaluated: authoritative.leaves().len(),
        scores,
        baseline,
        deltas: deltas(scores, baseline),
        partition,
        artifacts: Vec::new(),
        elapsed: start.elapsed(),
    };
    info!("modularize finished in {:?}", report.elapsed);
    Ok(Modularization { labels: inputs.unit_names(), kernel, dendrogram, produced, authoritative, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TopicSource {
    /// identifier by (document, type) counts
    #[default]
    Boit,
    /// diffusion over the merged dependency graph
    Ddg,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicsReport {
    pub k: usize,
    pub via: TopicSource,
    pub enrichment: Enrichment,
    pub vocabulary: usize,
    pub topics: Vec<Vec<String>>,
}

pub struct Topics {
    pub identifiers: Vec<String>,
    pub dendrogram: Dendrogram,
    pub report: TopicsReport,
}

/// Identifier by `(document, type)` count matrix: rows and columns sorted.
pub fn context_matrix(corpus: &CorpusFacts) -> (Vec<String>, Vec<(String, String)>, Matrix) {
    let mut cells: BTreeMap<(String, (String, String)), u64> = BTreeMap::new();
    for u in &corpus.units {
        for o in &u.occurrences {
            *cells.entry((o.id.clone(), (u.unit.clone(), o.ty.clone()))).or_insert(0) += o.count;
        }
    }
    let rows: Vec<String> = cells.keys().map(|k| k.0.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let cols: Vec<(String, String)> =
        cells.keys().map(|k| k.1.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let ri: HashMap<&String, usize> = rows.iter().enumerate().map(|(i, r)| (r, i)).collect();
    let ci: HashMap<&(String, String), usize> = cols.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut m = Matrix::zeros(rows.len(), cols.len());
    for ((r, c), v) in &cells {
        m[(ri[r], ci[c])] = *v as f64;
    }
    (rows, cols, m)
}

fn weigh_columns(m: &Matrix, weighting: Weighting) -> Matrix {
    let mut x = match weighting {
        Weighting::Tfidf => m.map(|c| if c > 0.0 { 1.0 + c.ln() } else { 0.0 }),
        _ => m.clone(),
    };
    if weighting != Weighting::None {
        let n = m.nrows() as f64;
        for j in 0..m.ncols() {
            let df = m.column(j).iter().filter(|&&v| v > 0.0).count() as f64;
            let w = if df > 0.0 { (n / df).ln().max(IDF_FLOOR) } else { IDF_FLOOR };
            x.column_mut(j).scale_mut(w);
        }
    }
    x
}

/// Term clusters cut from a complete-linkage tree over identifiers.
/// `weighting` defaults to raw counts.
pub fn topics(
    inputs: &Inputs,
    cfg: &PipelineConfig,
    k: usize,
    via: TopicSource,
    weighting: Weighting,
) -> Result<Topics, PipelineError> {
    cfg.validate()?;
    let (identifiers, d) = match via {
        TopicSource::Boit => {
            let (rows, _, counts) = context_matrix(&inputs.corpus);
            let x = weigh_columns(&counts, weighting);
            let sem = cfg.semantics();
            let x = if sem.concept.is_some() || sem.lexical.is_some() {
                let net = inputs.network(cfg.supervised);
                let cs = concept_similarity(&net, cfg, &sem)?;
                let vocab: BTreeSet<String> = rows.iter().cloned().collect();
                let ids =
                    IdentifierSimilarity::new(&vocab, &net, cs.as_ref(), sem.lexical.map(|l| cfg.lexical_config(l)));
                &ids.table * x
            } else {
                x
            };
            (rows, normalized_euclidean(&x))
        }
        TopicSource::Ddg => {
            let merged = merge_graphs("program", &inputs.graphs()?);
            let n = merged.vertices.len();
            let mut a = Matrix::zeros(n, n);
            for e in &merged.edges {
                a[(e.source, e.target)] = 1.0;
                a[(e.target, e.source)] = 1.0;
            }
            let k_all = rescaled_exp(&a, cfg.alpha_diffusion);
            let vocab: BTreeSet<&str> =
                inputs.corpus.units.iter().flat_map(|u| u.occurrences.iter().map(|o| o.id.as_str())).collect();
            let keep: Vec<usize> = (0..n)
                .filter(|&i| merged.vertices[i].label != NAMELESS && vocab.contains(merged.vertices[i].key.as_str()))
                .collect();
            let ids: Vec<String> = keep.iter().map(|&i| merged.vertices[i].key.clone()).collect();
            let sub = Matrix::from_fn(keep.len(), keep.len(), |i, j| k_all[(keep[i], keep[j])]);
            (ids, kernel_to_distance(&sub))
        }
    };
    if k == 0 || k > identifiers.len() {
        return Err(PipelineError {
            stage: "topics",
            message: format!("k = {} but the vocabulary has {} identifiers", k, identifiers.len()),
        });
    }
    let dendrogram = linkage(&d, &identifiers, cfg.linkage).map_err(at("cluster"))?;
    let topics = dendrogram.cut(k).map_err(at("cluster"))?;
    let report = TopicsReport { k, via, enrichment: cfg.enrichment, vocabulary: identifiers.len(), topics };
    Ok(Topics { identifiers, dendrogram, report })
}

pub struct Heatmap {
    /// modules grouped by package, dendrogram order inside each package
    pub modules: Vec<String>,
    pub packages: Vec<String>,
    /// types in dendrogram order
    pub types: Vec<String>,
    pub counts: Matrix,
    pub module_distance: Matrix,
    pub type_distance: Matrix,
    pub warnings: Vec<String>,
}

/// Module-by-type usage map with normalized Euclidean distances between
/// modules and between types, both reordered for plotting.
pub fn heatmap(inputs: &Inputs, cfg: &PipelineConfig) -> Result<Heatmap, PipelineError> {
    let m = build_bof(&inputs.corpus, FeatureKind::Bot).map_err(at("features"))?;
    let mut warnings = Vec::new();
    let mut type_cols = Vec::new();
    for (j, f) in m.space.features.iter().enumerate() {
        if m.counts.column(j).iter().all(|&v| v == 0.0) {
            warnings.push(format!("dropping empty type column `{}`", f));
            warn!("dropping empty type column `{}`", f);
        } else {
            type_cols.push(j);
        }
    }
    let counts = Matrix::from_fn(m.docs.len(), type_cols.len(), |i, j| m.counts[(i, type_cols[j])]);
    let type_labels: Vec<String> = type_cols.iter().map(|&j| m.space.features[j].to_string()).collect();

    let md = normalized_euclidean(&counts);
    let td = normalized_euclidean(&counts.transpose());
    let module_order = leaf_order(&md, &m.docs, cfg.linkage)?;
    let type_order = leaf_order(&td, &type_labels, cfg.linkage)?;

    let package_of: HashMap<&str, String> =
        inputs.corpus.units.iter().map(|u| (u.unit.as_str(), u.package.join("."))).collect();
    let position: HashMap<usize, usize> = module_order.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let mut rows: Vec<usize> = (0..m.docs.len()).collect();
    rows.sort_by(|&a, &b| package_of[m.docs[a].as_str()].cmp(&package_of[m.docs[b].as_str()]).then(position[&a].cmp(&position[&b])));

    Ok(Heatmap {
        modules: rows.iter().map(|&i| m.docs[i].clone()).collect(),
        packages: rows.iter().map(|&i| package_of[m.docs[i].as_str()].clone()).collect(),
        types: type_order.iter().map(|&j| type_labels[j].clone()).collect(),
        counts: Matrix::from_fn(rows.len(), type_order.len(), |i, j| counts[(rows[i], type_order[j])]),
        module_distance: Matrix::from_fn(rows.len(), rows.len(), |i, j| md[(rows[i], rows[j])]),
        type_distance: Matrix::from_fn(type_order.len(), type_order.len(), |i, j| {
            td[(type_order[i], type_order[j])]
        }),
        warnings,
    })
}

/// Leaf indices in dendrogram order.
fn leaf_order(d: &Matrix, labels: &[String], method: Linkage) -> Result<Vec<usize>, PipelineError> {
    if labels.is_empty() {
        return Ok(Vec::new());
    }
    let dg = linkage(d, labels, method).map_err(at("cluster"))?;
    Ok(dg.members(dg.labels.len() + dg.merges.len() - 1))
}

/// Identifier-level similarity table for export.
pub fn identifier_table(
    inputs: &Inputs,
    cfg: &PipelineConfig,
    identifiers: &BTreeSet<String>,
) -> Result<Matrix, PipelineError> {
    let sem = cfg.semantics();
    let net = inputs.network(cfg.supervised);
    let cs = concept_similarity(&net, cfg, &sem)?;
    let words: Vec<&String> = identifiers.iter().collect();
    let lexical = sem.lexical.map(|l| cfg.lexical_config(l));
    Ok(Matrix::from_fn(words.len(), words.len(), |i, j| {
        if i == j {
            return 1.0;
        }
        let l = lexical.map_or(1.0, |c| c.sim(words[i], words[j]));
        let c = cs.as_ref().map_or(1.0, |cs| disambiguate_sim(&net, words[i], words[j], |a, b| cs.sim(a, b)));
        l * c
    }))
}

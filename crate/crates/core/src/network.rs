//! Per-system semantic network: Term nodes for identifier names, Concept nodes
//! for types, and weighted ISA (term to concept), ITO (subtype to supertype)
//! and IPO (part to whole) edges.
//!
//! A concept's synset is its own name plus every term with an ISA edge into
//! it. Edge weights are relationship frequencies taken from the facts: an
//! identifier occurring `n` times with type `T` contributes `n` to the ISA
//! weight of `(id, T)`.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use log::warn;
use serde::Serialize;
use thiserror::Error;

use crate::facts::{simple_name, CorpusFacts, LibraryFacts, MemberKind, BUILTIN_TYPES};
use crate::{TOP, UNTYPED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum NodeKind {
    Term,
    Concept,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EdgeRelation {
    /// instance-of: term to concept
    Isa,
    /// is-a-type-of: subtype concept to supertype concept
    Ito,
    /// is-part-of: part concept to whole concept
    Ipo,
}

impl EdgeRelation {
    pub fn name(self) -> &'static str {
        match self {
            EdgeRelation::Isa => "ISA",
            EdgeRelation::Ito => "ITO",
            EdgeRelation::Ipo => "IPO",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ISA" => Some(EdgeRelation::Isa),
            "ITO" => Some(EdgeRelation::Ito),
            "IPO" => Some(EdgeRelation::Ipo),
            _ => None,
        }
    }
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NetworkNode {
    pub kind: NodeKind,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub relation: EdgeRelation,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synset {
    pub concept: String,
    pub members: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subhierarchy {
    pub nodes: BTreeSet<String>,
    /// Number of ITO edges with both ends inside the subhierarchy.
    pub internal_edges: usize,
}

impl Subhierarchy {
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    /// Mean number of children per node, leaves included.
    pub fn branching(&self) -> f64 {
        self.internal_edges as f64 / self.nodes.len() as f64
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NetworkOptions {
    /// Add the supervised relations listed in the facts.
    pub supervised: bool,
}

#[derive(Debug, Clone)]
pub struct SemanticNetwork {
    nodes: Vec<NetworkNode>,
    index: HashMap<(NodeKind, String), NodeId>,
    edges: Vec<NetworkEdge>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    warnings: Vec<String>,
}

pub fn build_network(corpus: &CorpusFacts, libs: &LibraryFacts) -> SemanticNetwork {
    build_network_with(corpus, libs, NetworkOptions::default())
}

pub fn build_network_with(
    corpus: &CorpusFacts,
    libs: &LibraryFacts,
    options: NetworkOptions,
) -> SemanticNetwork {
    let mut warnings = Vec::new();
    let mut concepts: BTreeSet<String> = BTreeSet::new();
    let mut terms: BTreeSet<String> = BTreeSet::new();
    // ordered: (sub, sup) in input order, corpus first
    let mut ito_candidates: Vec<(String, String)> = Vec::new();
    let mut isa: BTreeMap<(String, String), f64> = BTreeMap::new();
    let mut ipo: BTreeMap<(String, String), f64> = BTreeMap::new();

    let corpus_types: BTreeSet<String> =
        corpus.units.iter().map(|u| u.simple_name().to_string()).collect();
    concepts.extend(corpus_types.iter().cloned());

    let mut referenced: BTreeSet<String> = BTreeSet::new();
    for unit in &corpus.units {
        for o in &unit.occurrences {
            if o.ty != UNTYPED {
                referenced.insert(o.ty.clone());
            }
        }
        for m in &unit.api {
            referenced.insert(m.owner.clone());
            if m.kind == MemberKind::Field && m.ty != UNTYPED {
                referenced.insert(m.ty.clone());
            }
        }
        for e in &unit.supertypes {
            referenced.insert(e.sub.clone());
        }
    }

    // library types: imported or referenced, closed under supertypes
    let mut materialized: BTreeSet<String> = BTreeSet::new();
    let mut queue: VecDeque<String> = VecDeque::new();
    for t in &libs.types {
        let simple = t.simple_name();
        let imported = corpus.units.iter().any(|u| {
            u.imports.iter().any(|imp| {
                imp == &t.name
                    || imp
                        .strip_suffix(".*")
                        .is_some_and(|pkg| t.name.rsplit_once('.').map(|p| p.0) == Some(pkg))
            })
        });
        if imported || referenced.contains(simple) {
            queue.push_back(simple.to_string());
        }
    }
    while let Some(name) = queue.pop_front() {
        if !materialized.insert(name.clone()) {
            continue;
        }
        if let Some(t) = libs.get(&name) {
            for sup in &t.supertypes {
                queue.push_back(simple_name(sup).to_string());
            }
        }
    }

    let known = |name: &str| -> bool {
        corpus_types.contains(name)
            || materialized.contains(name)
            || libs.get(name).is_some()
            || BUILTIN_TYPES.contains(&name)
    };

    concepts.extend(referenced.iter().cloned());
    concepts.extend(materialized.iter().cloned());

    for unit in &corpus.units {
        for e in &unit.supertypes {
            if known(&e.sup) {
                concepts.insert(e.sup.clone());
                ito_candidates.push((e.sub.clone(), e.sup.clone()));
            } else {
                warnings.push(format!(
                    "supertype `{}` of `{}` is unknown; attaching `{}` to {}",
                    e.sup, e.sub, e.sub, TOP
                ));
            }
        }
        for m in &unit.api {
            terms.insert(m.name.clone());
            *isa.entry((m.name.clone(), m.owner.clone())).or_insert(0.0) += 1.0;
            if m.kind == MemberKind::Field && m.ty != UNTYPED && m.ty != "void" {
                *ipo.entry((m.ty.clone(), m.owner.clone())).or_insert(0.0) += 1.0;
            }
        }
        for o in &unit.occurrences {
            terms.insert(o.id.clone());
            if o.ty != UNTYPED {
                *isa.entry((o.id.clone(), o.ty.clone())).or_insert(0.0) += o.count as f64;
            }
        }
    }
    for name in &materialized {
        if let Some(t) = libs.get(name) {
            for sup in &t.supertypes {
                ito_candidates.push((name.clone(), simple_name(sup).to_string()));
            }
            for m in &t.members {
                terms.insert(m.name.clone());
                *isa.entry((m.name.clone(), name.clone())).or_insert(0.0) += 1.0;
            }
        }
    }

    concepts.remove(TOP);
    let mut nodes = vec![NetworkNode { kind: NodeKind::Concept, label: TOP.to_string() }];
    nodes.extend(concepts.iter().map(|c| NetworkNode { kind: NodeKind::Concept, label: c.clone() }));
    nodes.extend(terms.iter().map(|t| NetworkNode { kind: NodeKind::Term, label: t.clone() }));
    let index: HashMap<(NodeKind, String), NodeId> =
        nodes.iter().enumerate().map(|(i, n)| ((n.kind, n.label.clone()), i)).collect();
    let concept = |label: &str| index[&(NodeKind::Concept, label.to_string())];
    let term = |label: &str| index[&(NodeKind::Term, label.to_string())];

    let mut net = SemanticNetwork {
        outgoing: vec![Vec::new(); nodes.len()],
        incoming: vec![Vec::new(); nodes.len()],
        nodes,
        index: index.clone(),
        edges: Vec::new(),
        warnings: Vec::new(),
    };

    // ITO with cycle breaking in input order
    let mut parents: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    let mut seen_ito = BTreeSet::new();
    for (sub, sup) in &ito_candidates {
        let (s, t) = (concept(sub), concept(sup));
        if s == t || !seen_ito.insert((s, t)) {
            continue;
        }
        if reaches(&parents, t, s) {
            warnings.push(format!("dropping ITO edge {} -> {}: it closes a cycle", sub, sup));
            continue;
        }
        parents.entry(s).or_default().push(t);
        net.push_edge(s, t, EdgeRelation::Ito, 1.0);
    }
    for c in 1..=concepts.len() {
        if !parents.contains_key(&c) {
            net.push_edge(c, 0, EdgeRelation::Ito, 1.0);
        }
    }
    for ((id, ty), w) in &isa {
        net.push_edge(term(id), concept(ty), EdgeRelation::Isa, *w);
    }
    for ((part, whole), w) in &ipo {
        if part != whole {
            net.push_edge(concept(part), concept(whole), EdgeRelation::Ipo, *w);
        }
    }

    if options.supervised {
        for unit in &corpus.units {
            for r in &unit.relations {
                let rel = EdgeRelation::parse(&r.relation);
                let lookup = |label: &str| {
                    index
                        .get(&(NodeKind::Concept, label.to_string()))
                        .or_else(|| index.get(&(NodeKind::Term, label.to_string())))
                        .copied()
                };
                match (rel, lookup(&r.source), lookup(&r.target)) {
                    (Some(rel), Some(s), Some(t)) => net.push_edge(s, t, rel, 1.0),
                    _ => warnings.push(format!(
                        "ignoring supervised relation {} -{}-> {}",
                        r.source, r.relation, r.target
                    )),
                }
            }
        }
    }

    for w in &warnings {
        warn!("{}", w);
    }
    net.warnings = warnings;
    net
}

fn reaches(parents: &HashMap<NodeId, Vec<NodeId>>, from: NodeId, to: NodeId) -> bool {
    let mut stack = vec![from];
    let mut seen = BTreeSet::new();
    while let Some(n) = stack.pop() {
        if n == to {
            return true;
        }
        if seen.insert(n) {
            if let Some(ps) = parents.get(&n) {
                stack.extend(ps);
            }
        }
    }
    false
}

impl SemanticNetwork {
    fn push_edge(&mut self, source: NodeId, target: NodeId, relation: EdgeRelation, weight: f64) {
        let id = self.edges.len();
        self.edges.push(NetworkEdge { source, target, relation, weight });
        self.outgoing[source].push(id);
        self.incoming[target].push(id);
    }

    pub fn nodes(&self) -> &[NetworkNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[NetworkEdge] {
        &self.edges
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn node(&self, kind: NodeKind, label: &str) -> Option<NodeId> {
        self.index.get(&(kind, label.to_string())).copied()
    }

    pub fn concept(&self, label: &str) -> Option<NodeId> {
        self.node(NodeKind::Concept, label)
    }

    pub fn term(&self, label: &str) -> Option<NodeId> {
        self.node(NodeKind::Term, label)
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.nodes[id].label
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn concepts(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].kind == NodeKind::Concept)
    }

    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &NetworkEdge> {
        self.outgoing[id].iter().map(|&e| &self.edges[e])
    }

    pub fn in_edges(&self, id: NodeId) -> impl Iterator<Item = &NetworkEdge> {
        self.incoming[id].iter().map(|&e| &self.edges[e])
    }

    /// Direct ITO supertypes of a concept.
    pub fn supertypes(&self, id: NodeId) -> Vec<NodeId> {
        self.out_edges(id).filter(|e| e.relation == EdgeRelation::Ito).map(|e| e.target).collect()
    }

    /// Direct ITO subtypes of a concept.
    pub fn subtypes(&self, id: NodeId) -> Vec<NodeId> {
        self.in_edges(id).filter(|e| e.relation == EdgeRelation::Ito).map(|e| e.source).collect()
    }

    /// Weight of the ISA edge from term `id` to `concept`, 0 when absent.
    pub fn isa_weight(&self, id: &str, concept: &str) -> f64 {
        match (self.term(id), self.concept(concept)) {
            (Some(t), Some(c)) => self
                .out_edges(t)
                .filter(|e| e.relation == EdgeRelation::Isa && e.target == c)
                .map(|e| e.weight)
                .sum(),
            _ => 0.0,
        }
    }

    /// Total ISA weight attached to a concept: how strongly it fans out to
    /// its instances. Hub types with many instances have a large value.
    pub fn instance_degree(&self, concept: &str) -> f64 {
        self.concept(concept)
            .map(|c| {
                self.in_edges(c).filter(|e| e.relation == EdgeRelation::Isa).map(|e| e.weight).sum()
            })
            .unwrap_or(0.0)
    }

    pub fn synset(&self, concept: &str) -> Option<Synset> {
        let c = self.concept(concept)?;
        let mut members: BTreeSet<String> = self
            .in_edges(c)
            .filter(|e| e.relation == EdgeRelation::Isa)
            .map(|e| self.nodes[e.source].label.clone())
            .collect();
        members.insert(concept.to_string());
        Some(Synset { concept: concept.to_string(), members })
    }

    /// Every synset containing `name`, ordered by concept label.
    pub fn synsets_of(&self, name: &str) -> Vec<Synset> {
        let mut concepts: BTreeSet<&str> = BTreeSet::new();
        if let Some(t) = self.term(name) {
            for e in self.out_edges(t).filter(|e| e.relation == EdgeRelation::Isa) {
                concepts.insert(&self.nodes[e.target].label);
            }
        }
        if self.concept(name).is_some() && name != TOP {
            concepts.insert(name);
        }
        concepts.into_iter().filter_map(|c| self.synset(c)).collect()
    }

    /// ITO descendants of `concept` (inclusive) and the ITO edges among them.
    pub fn subhierarchy(&self, concept: &str) -> Result<Subhierarchy, NetworkError> {
        let root = self.concept(concept).ok_or_else(|| NetworkError::UnknownConcept(concept.into()))?;
        let mut members = BTreeSet::from([root]);
        let mut queue = VecDeque::from([root]);
        while let Some(n) = queue.pop_front() {
            for child in self.subtypes(n) {
                if members.insert(child) {
                    queue.push_back(child);
                }
            }
        }
        let internal_edges = members
            .iter()
            .flat_map(|&m| self.supertypes(m).into_iter().map(move |p| (m, p)))
            .filter(|(_, p)| members.contains(p))
            .count();
        Ok(Subhierarchy {
            nodes: members.into_iter().map(|m| self.nodes[m].label.clone()).collect(),
            internal_edges,
        })
    }

    /// `source,source_kind,target,target_kind,relation,weight` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["source", "source_kind", "target", "target_kind", "relation", "weight"])
            .expect("csv write");
        for e in &self.edges {
            let s = &self.nodes[e.source];
            let t = &self.nodes[e.target];
            w.write_record([
                s.label.as_str(),
                kind_name(s.kind),
                t.label.as_str(),
                kind_name(t.kind),
                e.relation.name(),
                &format_weight(e.weight),
            ])
            .expect("csv write");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8")
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph semantic_network {\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let shape = match n.kind {
                NodeKind::Concept => "box",
                NodeKind::Term => "ellipse",
            };
            let _ = writeln!(out, "  n{} [label=\"{}\", shape={}];", i, escape_dot(&n.label), shape);
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  n{} -> n{} [label=\"{} {}\"];",
                e.source,
                e.target,
                e.relation.name(),
                format_weight(e.weight)
            );
        }
        out.push_str("}\n");
        out
    }
}

fn kind_name(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Term => "term",
        NodeKind::Concept => "concept",
    }
}

fn format_weight(w: f64) -> String {
    if w.fract() == 0.0 {
        format!("{}", w as i64)
    } else {
        format!("{}", w)
    }
}

pub(crate) fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facts::{extract_corpus, LibraryType, SupertypeEdge};
    use crate::fixtures;
    use crate::syntax::{parse_compilation, parse_unit};

    fn vehicles() -> SemanticNetwork {
        let units = parse_compilation(fixtures::VEHICLES).unwrap();
        build_network(&extract_corpus(&units, &LibraryFacts::default()), &LibraryFacts::default())
    }

    fn employee() -> SemanticNetwork {
        let units = vec![parse_unit(fixtures::EMPLOYEE).unwrap()];
        build_network(&extract_corpus(&units, &LibraryFacts::default()), &LibraryFacts::default())
    }

    #[test]
    fn vehicle_synset() {
        let net = vehicles();
        let syn = net.synset("Vehicle").unwrap();
        let expected: BTreeSet<String> = ["Vehicle", "gear", "speed", "setGear", "applyBrake", "setSpeed"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(syn.members, expected);
        let gear = net.synsets_of("gear");
        assert_eq!(gear.len(), 1);
        assert_eq!(gear[0].concept, "Vehicle");
    }

    #[test]
    fn car_reaches_vehicle_only_through_ito() {
        let net = vehicles();
        let car_term = net.term("car").unwrap();
        let vehicle = net.concept("Vehicle").unwrap();
        let car_concept = net.concept("Car").unwrap();
        assert!(net.out_edges(car_term).all(|e| e.target != vehicle));
        assert!(net
            .out_edges(car_concept)
            .any(|e| e.target == vehicle && e.relation == EdgeRelation::Ito));
        // undirected reachability with and without the ITO edge
        let reach = |skip_ito: bool| {
            let mut seen = BTreeSet::from([car_term]);
            let mut stack = vec![car_term];
            while let Some(n) = stack.pop() {
                for e in net.out_edges(n).chain(net.in_edges(n)) {
                    if skip_ito && e.source == car_concept && e.target == vehicle {
                        continue;
                    }
                    let other = if e.source == n { e.target } else { e.source };
                    if other != net.root() && seen.insert(other) {
                        stack.push(other);
                    }
                }
            }
            seen.contains(&vehicle)
        };
        assert!(reach(false));
        assert!(!reach(true));
    }

    #[test]
    fn temp_has_two_senses() {
        let net = employee();
        let senses: Vec<_> = net.synsets_of("temp").into_iter().map(|s| s.concept).collect();
        assert_eq!(senses, ["Date", "double"]);
        assert_eq!(net.isa_weight("temp", "Date"), 2.0);
        assert!(net.synsets_of("nope").is_empty());
        for syn in net.synsets_of("salary") {
            for m in &syn.members {
                assert!(m == &syn.concept || net.isa_weight(m, &syn.concept) > 0.0);
            }
        }
    }

    #[test]
    fn isa_weights_aggregate_occurrences() {
        let net = employee();
        // 4 typed occurrences plus the public-member edge to the owner
        assert_eq!(net.isa_weight("salary", "double"), 4.0);
        assert_eq!(net.isa_weight("salary", "Employee"), 1.0);
        assert_eq!(net.instance_degree("double"), 8.0);
    }

    #[test]
    fn empty_corpus_only_root() {
        let libs = LibraryFacts {
            types: vec![LibraryType { name: "java.util.Date".into(), supertypes: vec![], members: vec![] }],
        };
        let net = build_network(&CorpusFacts::default(), &libs);
        assert_eq!(net.nodes().len(), 1);
        assert_eq!(net.label(net.root()), TOP);
        assert!(net.edges().is_empty());
    }

    #[test]
    fn subhierarchy_stats() {
        let net = vehicles();
        let sub = net.subhierarchy("Vehicle").unwrap();
        assert_eq!(sub.nodes.iter().cloned().collect::<Vec<_>>(), ["Car", "Vehicle"]);
        assert_eq!(sub.size(), 2);
        assert!((sub.branching() - 0.5).abs() < 1e-15);
        let leaf = net.subhierarchy("Car").unwrap();
        assert_eq!((leaf.size(), leaf.branching()), (1, 0.0));
        let all = net.subhierarchy(TOP).unwrap();
        assert_eq!(all.size(), net.concepts().count());
        assert_eq!(net.subhierarchy("Nope"), Err(NetworkError::UnknownConcept("Nope".into())));
    }

    #[test]
    fn ito_cycles_are_broken_and_dangling_supertypes_go_to_root() {
        let mut corpus = extract_corpus(&parse_compilation(fixtures::VEHICLES).unwrap(), &LibraryFacts::default());
        corpus.units[0].supertypes.push(SupertypeEdge { sub: "Vehicle".into(), sup: "Car".into() });
        corpus.units[2].supertypes.push(SupertypeEdge { sub: "Employee".into(), sup: "Person".into() });
        let net = build_network(&corpus, &LibraryFacts::default());
        let vehicle = net.concept("Vehicle").unwrap();
        let car = net.concept("Car").unwrap();
        assert_eq!(net.supertypes(vehicle), vec![car]);
        // Car -> Vehicle came later in input order and closed the cycle
        assert_eq!(net.supertypes(car), vec![net.root()]);
        let employee = net.concept("Employee").unwrap();
        assert_eq!(net.supertypes(employee), vec![net.root()]);
        assert_eq!(net.warnings().len(), 2);
    }

    #[test]
    fn ipo_runs_part_to_whole() {
        let net = vehicles();
        let car = net.concept("Car").unwrap();
        let employee = net.concept("Employee").unwrap();
        assert!(net
            .out_edges(car)
            .any(|e| e.relation == EdgeRelation::Ipo && e.target == employee));
    }

    #[test]
    fn library_types_materialize_through_imports() {
        let libs = LibraryFacts::from_json(
            r#"{"types":[{"name":"java.util.Date","supertypes":["java.lang.Cloneable"],"members":[{"name":"getTime","type":"long"}]},
                        {"name":"java.lang.Cloneable"},
                        {"name":"java.util.List"}]}"#,
        )
        .unwrap();
        let units = vec![parse_unit(&format!("import java.util.Date;\n{}", fixtures::EMPLOYEE)).unwrap()];
        let net = build_network(&extract_corpus(&units, &libs), &libs);
        assert!(net.concept("Date").is_some());
        assert!(net.concept("Cloneable").is_some());
        assert!(net.concept("List").is_none());
        assert_eq!(net.isa_weight("getTime", "Date"), 1.0);
        let date = net.concept("Date").unwrap();
        assert_eq!(net.supertypes(date), vec![net.concept("Cloneable").unwrap()]);
    }

    #[test]
    fn exports() {
        let net = vehicles();
        let csv = net.to_csv();
        assert!(csv.starts_with("source,source_kind,target,target_kind,relation,weight\n"));
        assert!(csv.contains("Car,concept,Vehicle,concept,ITO,1\n"));
        assert!(csv.contains("gear,term,Vehicle,concept,ISA,1\n"));
        assert!(net.to_dot().contains("digraph"));
    }
}

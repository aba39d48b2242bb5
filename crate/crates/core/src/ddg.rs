//! Flow-insensitive data-dependency graphs over a unit's identifiers and the
//! random-walk kernel between two such graphs.
//!
//! Edges run from the producer of a value to its consumer. Identifier and
//! named call vertices are keyed by label, so every use of `salary` in a unit
//! lands on one vertex. A maximal tree of infix/prefix operators becomes one
//! nameless call vertex labeled `⊥fun`, keyed by its sorted operand keys.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{neumann_solve, perron_root, Matrix, SparseMatrix};
use crate::network::escape_dot;
use crate::syntax::{AssignOp, Expr, MethodDecl, SourceUnit, Stmt};

/// Label of nameless call vertices standing for operators.
pub const NAMELESS: &str = "⊥fun";

const SPECTRAL_TOL: f64 = 1e-10;
const SPECTRAL_ITERS: usize = 100_000;
const SOLVE_TOL: f64 = 1e-15;
const SOLVE_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EdgeKind {
    /// a computed value stored into a variable
    Definition,
    /// a value used by another expression (array index into its base)
    Value,
    /// a returned value flowing into the enclosing function
    Return,
    /// an argument or operand passed into a call
    CallBinding,
    /// receiver and member of an access path, stored in both directions
    AccessPath,
}

impl EdgeKind {
    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::Definition => "definition",
            EdgeKind::Value => "value",
            EdgeKind::Return => "return",
            EdgeKind::CallBinding => "call-binding",
            EdgeKind::AccessPath => "access-path",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Vertex {
    pub key: String,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DepEdge {
    pub source: usize,
    pub target: usize,
    pub kind: EdgeKind,
}

/// Vertices sorted by key; edges sorted and unique.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct DepGraph {
    pub name: String,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<DepEdge>,
}

impl DepGraph {
    pub fn vertex(&self, key: &str) -> Option<usize> {
        self.vertices.binary_search_by(|v| v.key.as_str().cmp(key)).ok()
    }

    pub fn has_edge(&self, source: &str, target: &str, kind: EdgeKind) -> bool {
        match (self.vertex(source), self.vertex(target)) {
            (Some(s), Some(t)) => self.edges.binary_search(&DepEdge { source: s, target: t, kind }).is_ok(),
            _ => false,
        }
    }

    /// `(source key, target key, kind)` triples in canonical order.
    pub fn edge_keys(&self) -> Vec<(&str, &str, EdgeKind)> {
        self.edges
            .iter()
            .map(|e| (self.vertices[e.source].key.as_str(), self.vertices[e.target].key.as_str(), e.kind))
            .collect()
    }

    /// 0/1 adjacency ignoring edge kinds.
    pub fn adjacency(&self) -> SparseMatrix {
        let pairs: BTreeSet<(usize, usize)> = self.edges.iter().map(|e| (e.source, e.target)).collect();
        SparseMatrix::from_triplets(self.vertices.len(), pairs.into_iter().map(|(s, t)| (s, t, 1.0)).collect())
    }

    /// Spectral radius of the 0/1 adjacency.
    pub fn spectral_radius(&self) -> f64 {
        perron_root(&self.adjacency(), SPECTRAL_TOL, SPECTRAL_ITERS)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["source", "target", "kind"]).expect("csv write");
        for (s, t, k) in self.edge_keys() {
            w.write_record([s, t, k.name()]).expect("csv write");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8")
    }

    pub fn to_dot(&self) -> String {
        let mut out = format!("digraph \"{}\" {{\n", escape_dot(&self.name));
        for (i, v) in self.vertices.iter().enumerate() {
            let shape = if v.label == NAMELESS { "circle" } else { "ellipse" };
            let _ = writeln!(out, "  v{} [label=\"{}\", shape={}];", i, escape_dot(&v.label), shape);
        }
        for e in &self.edges {
            let _ = writeln!(out, "  v{} -> v{} [label=\"{}\"];", e.source, e.target, e.kind.name());
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Default)]
struct GraphBuilder {
    vertices: BTreeMap<String, String>,
    edges: BTreeSet<(String, String, EdgeKind)>,
}

impl GraphBuilder {
    fn vertex(&mut self, key: &str, label: &str) -> String {
        self.vertices.entry(key.to_string()).or_insert_with(|| label.to_string());
        key.to_string()
    }

    fn named(&mut self, name: &str) -> String {
        self.vertex(name, name)
    }

    fn edge(&mut self, source: &str, target: &str, kind: EdgeKind) {
        if source != target {
            self.edges.insert((source.to_string(), target.to_string(), kind));
        }
    }

    fn finish(self, name: String) -> DepGraph {
        let vertices: Vec<Vertex> =
            self.vertices.into_iter().map(|(key, label)| Vertex { key, label }).collect();
        let index: HashMap<&str, usize> = vertices.iter().enumerate().map(|(i, v)| (v.key.as_str(), i)).collect();
        let mut edges: Vec<DepEdge> = self
            .edges
            .iter()
            .map(|(s, t, kind)| DepEdge { source: index[s.as_str()], target: index[t.as_str()], kind: *kind })
            .collect();
        edges.sort();
        DepGraph { name, vertices, edges }
    }
}

struct Walker<'a> {
    g: GraphBuilder,
    /// own methods and constructors by name, for binding arguments to
    /// parameters
    methods: HashMap<&'a str, Vec<&'a MethodDecl>>,
}

impl<'a> Walker<'a> {
    /// Vertices whose values flow out of `e`, adding the edges `e` implies.
    fn sources(&mut self, e: &Expr) -> Vec<String> {
        match e {
            Expr::Ident { name, .. } => vec![self.g.named(name)],
            Expr::This(_) | Expr::Literal(_) => Vec::new(),
            Expr::Field { receiver, name, .. } => {
                let member = self.g.named(name);
                if !matches!(**receiver, Expr::This(_)) {
                    for r in self.sources(receiver) {
                        self.g.edge(&r, &member, EdgeKind::AccessPath);
                        self.g.edge(&member, &r, EdgeKind::AccessPath);
                    }
                }
                vec![member]
            }
            Expr::Call { receiver, name, args, .. } => {
                let callee = self.g.named(name);
                if let Some(r) = receiver.as_deref().filter(|r| !matches!(r, Expr::This(_))) {
                    for r in self.sources(r) {
                        self.g.edge(&r, &callee, EdgeKind::AccessPath);
                        self.g.edge(&callee, &r, EdgeKind::AccessPath);
                    }
                }
                self.bind_args(name, &callee, args);
                vec![callee]
            }
            Expr::New { ty, args, .. } => {
                let callee = self.g.named(ty);
                self.bind_args(ty, &callee, args);
                vec![callee]
            }
            Expr::Binary { .. } | Expr::Unary { .. } => self.nameless(e, &[]),
            Expr::Index { base, index } => {
                let bases = self.sources(base);
                for i in self.sources(index) {
                    for b in &bases {
                        self.g.edge(&i, b, EdgeKind::Value);
                    }
                }
                bases
            }
        }
    }

    /// Arguments flow into the parameters of a known own method of matching
    /// arity, otherwise into the call vertex.
    fn bind_args(&mut self, name: &str, callee: &str, args: &[Expr]) {
        let params: Option<Vec<String>> = self
            .methods
            .get(name)
            .and_then(|ms| ms.iter().find(|m| m.params.len() == args.len()))
            .map(|m| m.params.iter().map(|p| p.name.clone()).collect());
        for (k, arg) in args.iter().enumerate() {
            let target = match &params {
                Some(ps) => self.g.named(&ps[k]),
                None => callee.to_string(),
            };
            for s in self.sources(arg) {
                self.g.edge(&s, &target, EdgeKind::CallBinding);
            }
        }
    }

    /// One nameless vertex for the maximal operator tree at `e`, with
    /// `extra` operands (the target of a compound assignment).
    fn nameless(&mut self, e: &Expr, extra: &[&Expr]) -> Vec<String> {
        let mut leaves = Vec::new();
        collect_operands(e, &mut leaves);
        leaves.extend_from_slice(extra);
        let mut inputs: BTreeSet<String> = BTreeSet::new();
        for leaf in leaves {
            inputs.extend(self.sources(leaf));
        }
        if inputs.is_empty() {
            return Vec::new();
        }
        let key = format!("{}({})", NAMELESS, inputs.iter().cloned().collect::<Vec<_>>().join(","));
        let fun = self.g.vertex(&key, NAMELESS);
        for i in &inputs {
            self.g.edge(i, &fun, EdgeKind::CallBinding);
        }
        vec![fun]
    }

    /// Vertices written by an assignment target.
    fn targets(&mut self, target: &Expr) -> Vec<String> {
        match target {
            Expr::Index { base, index } => {
                let bases = self.targets(base);
                for i in self.sources(index) {
                    for b in &bases {
                        self.g.edge(&i, b, EdgeKind::Value);
                    }
                }
                bases
            }
            other => self.sources(other),
        }
    }

    fn define(&mut self, sources: Vec<String>, targets: &[String]) {
        for s in &sources {
            for t in targets {
                self.g.edge(s, t, EdgeKind::Definition);
            }
        }
    }

    fn stmts(&mut self, method: &str, body: &[Stmt]) {
        for s in body {
            self.stmt(method, s);
        }
    }

    fn stmt(&mut self, method: &str, s: &Stmt) {
        match s {
            Stmt::Local { name, init, .. } => {
                let target = self.g.named(name);
                if let Some(init) = init {
                    let sources = self.sources(init);
                    self.define(sources, &[target]);
                }
            }
            Stmt::Assign { target, op, value, .. } => {
                let targets = self.targets(target);
                let sources = match op {
                    AssignOp::Set => self.sources(value),
                    _ => self.nameless(value, &[target]),
                };
                self.define(sources, &targets);
            }
            Stmt::Return { value, .. } => {
                if let Some(v) = value {
                    let fun = self.g.named(method);
                    for s in self.sources(v) {
                        self.g.edge(&s, &fun, EdgeKind::Return);
                    }
                }
            }
            Stmt::Expr(e) => {
                self.sources(e);
            }
            Stmt::If { cond, then, otherwise } => {
                self.sources(cond);
                self.stmts(method, then);
                self.stmts(method, otherwise);
            }
            Stmt::While { cond, body } => {
                self.sources(cond);
                self.stmts(method, body);
            }
            Stmt::Block(body) => self.stmts(method, body),
        }
    }
}

fn collect_operands<'e>(e: &'e Expr, out: &mut Vec<&'e Expr>) {
    match e {
        Expr::Binary { lhs, rhs, .. } => {
            collect_operands(lhs, out);
            collect_operands(rhs, out);
        }
        Expr::Unary { operand, .. } => collect_operands(operand, out),
        other => out.push(other),
    }
}

pub fn build_ddg(unit: &SourceUnit) -> DepGraph {
    let mut methods: HashMap<&str, Vec<&MethodDecl>> = HashMap::new();
    for m in &unit.class.methods {
        methods.entry(m.name.as_str()).or_default().push(m);
    }
    let mut w = Walker { g: GraphBuilder::default(), methods };
    for f in &unit.class.fields {
        if let Some(init) = &f.init {
            let target = w.g.named(&f.name);
            let sources = w.sources(init);
            w.define(sources, &[target]);
        }
    }
    for m in &unit.class.methods {
        w.stmts(&m.name, &m.body);
    }
    w.g.finish(unit.unit_name.clone())
}

/// Union of vertices by key and of edges.
pub fn merge_graphs(name: &str, graphs: &[DepGraph]) -> DepGraph {
    let mut b = GraphBuilder::default();
    for g in graphs {
        for v in &g.vertices {
            b.vertex(&v.key, &v.label);
        }
        for (s, t, k) in g.edge_keys() {
            b.edge(s, t, k);
        }
    }
    b.finish(name.to_string())
}

#[derive(Debug, Error, PartialEq)]
pub enum WalkError {
    #[error("random-walk series diverges: lambda {lambda} times spectral radius {rho} is not below 1; use a smaller lambda")]
    Divergent { lambda: f64, rho: f64 },
    #[error("lambda must be nonnegative, got {0}")]
    NegativeLambda(f64),
}

/// Label similarity table between the vertices of two graphs, clamped to
/// `[0, 1]`.
pub fn label_table(g1: &DepGraph, g2: &DepGraph, sigma: &(impl Fn(&str, &str) -> f64 + ?Sized)) -> Matrix {
    Matrix::from_fn(g1.vertices.len(), g2.vertices.len(), |i, j| {
        let v = sigma(&g1.vertices[i].label, &g2.vertices[j].label);
        if v.is_finite() {
            v.clamp(0.0, 1.0)
        } else {
            0.0
        }
    })
}

/// Weighted adjacency of the direct product graph; vertex `(v, w)` has index
/// `v * |V2| + w`.
pub fn product_adjacency(g1: &DepGraph, g2: &DepGraph, labels: &Matrix) -> SparseMatrix {
    let n2 = g2.vertices.len();
    let e1: BTreeSet<(usize, usize)> = g1.edges.iter().map(|e| (e.source, e.target)).collect();
    let e2: BTreeSet<(usize, usize)> = g2.edges.iter().map(|e| (e.source, e.target)).collect();
    let mut triplets = Vec::with_capacity(e1.len() * e2.len());
    for &(v1, v2) in &e1 {
        for &(w1, w2) in &e2 {
            let weight = labels[(v1, w1)] * labels[(v2, w2)];
            if weight != 0.0 {
                triplets.push((v1 * n2 + w1, v2 * n2 + w2, weight));
            }
        }
    }
    SparseMatrix::from_triplets(g1.vertices.len() * n2, triplets)
}

/// `e^T (I - lambda A_x)^-1 e`. The series must converge: a cheap bound
/// `rho(A1) rho(A2) max(sigma)^2` is tried first and the product graph's own
/// spectral radius estimated only when the bound is inconclusive.
pub fn random_walk_kernel(g1: &DepGraph, g2: &DepGraph, labels: &Matrix, lambda: f64) -> Result<f64, WalkError> {
    if lambda < 0.0 {
        return Err(WalkError::NegativeLambda(lambda));
    }
    let n = g1.vertices.len() * g2.vertices.len();
    if n == 0 {
        return Ok(0.0);
    }
    if lambda == 0.0 {
        return Ok(n as f64);
    }
    let ax = product_adjacency(g1, g2, labels);
    let sigma_max = labels.iter().copied().fold(0.0, f64::max);
    let bound = g1.spectral_radius() * g2.spectral_radius() * sigma_max * sigma_max;
    if lambda * bound >= 1.0 {
        let rho = perron_root(&ax, SPECTRAL_TOL, SPECTRAL_ITERS);
        if lambda * rho >= 1.0 {
            return Err(WalkError::Divergent { lambda, rho });
        }
    }
    let ones = vec![1.0; n];
    Ok(neumann_solve(&ax, lambda, &ones, SOLVE_TOL, SOLVE_ITERS).iter().sum())
}

/// Decay used across a whole corpus: `0.5 / max(1, max rho(A_i)^2)`. Since
/// label similarities lie in `[0, 1]`, `rho(A_x) <= rho(A_i) rho(A_j)` and
/// every pair converges with the same lambda.
pub fn corpus_lambda(graphs: &[DepGraph]) -> f64 {
    let rho = graphs.par_iter().map(|g| g.spectral_radius()).reduce(|| 0.0, f64::max);
    0.5 / (rho * rho).max(1.0)
}

/// Normalized walk-kernel matrix over `graphs`: symmetric, unit diagonal.
pub fn walk_kernel_matrix(
    graphs: &[DepGraph],
    sigma: &(impl Fn(&str, &str) -> f64 + Sync + ?Sized),
    lambda: f64,
) -> Result<Matrix, WalkError> {
    let n = graphs.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| random_walk_kernel(&graphs[i], &graphs[j], &label_table(&graphs[i], &graphs[j], sigma), lambda))
        .collect::<Result<_, _>>()?;
    let mut k = Matrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(values) {
        k[(i, j)] = v;
        k[(j, i)] = v;
    }
    Ok(crate::linalg::cosine_normalize(&k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::syntax::parse_unit;

    fn graph(src: &str) -> DepGraph {
        build_ddg(&parse_unit(src).unwrap())
    }

    fn identity(a: &str, b: &str) -> f64 {
        if a == b {
            1.0
        } else {
            0.0
        }
    }

    #[test]
    fn infix_becomes_nameless_call() {
        let g = graph("class T { int a; int b; int c; void f() { a = b + c; } }");
        let labels: Vec<_> = g.vertices.iter().map(|v| v.label.as_str()).collect();
        assert_eq!(labels, ["a", "b", "c", NAMELESS]);
        let fun = "⊥fun(b,c)";
        assert!(g.has_edge("b", fun, EdgeKind::CallBinding));
        assert!(g.has_edge("c", fun, EdgeKind::CallBinding));
        assert!(g.has_edge(fun, "a", EdgeKind::Definition));
        assert_eq!(g.edges.len(), 3);
    }

    #[test]
    fn raise_salary_edges() {
        let unit = parse_unit(fixtures::EMPLOYEE).unwrap();
        let mut only = unit.clone();
        only.class.methods.retain(|m| m.name == "raiseSalary");
        let g = build_ddg(&only);
        let f1 = "⊥fun(byPercent,salary)";
        let f2 = "⊥fun(bonus,salary,temp)";
        let mut expected = vec![
            ("salary", f1, EdgeKind::CallBinding),
            ("byPercent", f1, EdgeKind::CallBinding),
            (f1, "temp", EdgeKind::Definition),
            ("temp", f2, EdgeKind::CallBinding),
            ("bonus", f2, EdgeKind::CallBinding),
            ("salary", f2, EdgeKind::CallBinding),
            (f2, "salary", EdgeKind::Definition),
        ];
        expected.sort();
        let mut got = g.edge_keys();
        got.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn access_path_and_arguments() {
        let g = graph("class T { void f(Employee employee, Car newCar) { employee.setVehicle(newCar); } }");
        assert!(g.has_edge("employee", "setVehicle", EdgeKind::AccessPath));
        assert!(g.has_edge("setVehicle", "employee", EdgeKind::AccessPath));
        assert!(g.has_edge("newCar", "setVehicle", EdgeKind::CallBinding));
        assert_eq!(g.edges.len(), 3);
    }

    #[test]
    fn own_methods_bind_parameters_and_returns_flow_out() {
        let g = graph(
            "class T { int total; int add(int x) { return x + 1; } void g(int y) { total = add(y); } }",
        );
        assert!(g.has_edge("y", "x", EdgeKind::CallBinding));
        assert!(g.has_edge("⊥fun(x)", "add", EdgeKind::Return));
        assert!(g.has_edge("add", "total", EdgeKind::Definition));
    }

    #[test]
    fn constructor_call_and_index() {
        let g = graph(
            "class T { void f(int year, int[] xs, int i) { Date temp = new Date(year); xs[i] = year; } }",
        );
        assert!(g.has_edge("year", "Date", EdgeKind::CallBinding));
        assert!(g.has_edge("Date", "temp", EdgeKind::Definition));
        assert!(g.has_edge("i", "xs", EdgeKind::Value));
        assert!(g.has_edge("year", "xs", EdgeKind::Definition));
    }

    #[test]
    fn merge_unions_by_key() {
        let a = graph("class A { int salary; int b; void f() { salary = b; } }");
        let b = graph("class B { int salary; int c; void f() { c = salary; } }");
        let m = merge_graphs("all", &[a.clone(), b]);
        assert_eq!(m.vertices.iter().filter(|v| v.key == "salary").count(), 1);
        assert_eq!(m.edges.len(), 2);
        let same = merge_graphs("A", &[a.clone(), a.clone()]);
        assert_eq!(same, a);
        assert_eq!(merge_graphs("A", &[a.clone(), DepGraph::default()]), a);
    }

    #[test]
    fn walk_kernel_basics() {
        let g = graph(fixtures::EMPLOYEE);
        let labels = label_table(&g, &g, &identity);
        let n = g.vertices.len() as f64;
        assert_eq!(random_walk_kernel(&g, &g, &labels, 0.0).unwrap(), n * n);
        let zero = Matrix::zeros(g.vertices.len(), g.vertices.len());
        assert_eq!(product_adjacency(&g, &g, &zero).nnz(), 0);
        let empty = DepGraph::default();
        assert_eq!(random_walk_kernel(&g, &empty, &label_table(&g, &empty, &identity), 0.1).unwrap(), 0.0);
        assert!(random_walk_kernel(&g, &g, &labels, -1.0).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let g = graph("class T { int a; int b; void f() { a = b; b = a; } }");
        let labels = label_table(&g, &g, &identity);
        assert!(matches!(random_walk_kernel(&g, &g, &labels, 1.5), Err(WalkError::Divergent { .. })));
        assert!(random_walk_kernel(&g, &g, &labels, 0.5).is_ok());
    }

    #[test]
    fn kernel_matrix_is_normalized() {
        let gs = vec![
            graph(fixtures::EMPLOYEE),
            graph("class T { int a; int b; void f() { a = b; b = a; } }"),
            graph("class U { int salary; int temp; void f() { salary = temp * 2; } }"),
        ];
        let lambda = corpus_lambda(&gs);
        let k = walk_kernel_matrix(&gs, &identity, lambda).unwrap();
        for i in 0..3 {
            assert!((k[(i, i)] - 1.0).abs() < 1e-12);
            for j in 0..3 {
                assert!((k[(i, j)] - k[(j, i)]).abs() < 1e-12);
            }
        }
    }
}

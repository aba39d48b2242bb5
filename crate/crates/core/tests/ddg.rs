use nalgebra::{DMatrix, Schur};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semctx::ddg::{
    build_ddg, corpus_lambda, label_table, product_adjacency, random_walk_kernel, walk_kernel_matrix, DepEdge,
    DepGraph, EdgeKind, Vertex, WalkError,
};
use semctx::fixtures::corpus_inputs;

fn same(a: &str, b: &str) -> f64 {
    f64::from(u8::from(a == b))
}

fn random_graph(r: &mut ChaCha8Rng) -> DepGraph {
    let n = r.gen_range(1..=8);
    let vertices = (0..n).map(|i| Vertex { key: format!("v{}", i), label: ["a", "b"].choose(r).unwrap().to_string() }).collect();
    let mut edges = Vec::new();
    for s in 0..n {
        for t in 0..n {
            if s != t && r.gen_bool(0.3) {
                edges.push(DepEdge { source: s, target: t, kind: EdgeKind::Value });
            }
        }
    }
    DepGraph { name: "g".into(), vertices, edges }
}

/// Exact on 0/1 matrices: walk counts are integers, so `A^n = 0` is never a
/// rounding artifact.
fn nilpotent(a: &DMatrix<f64>) -> bool {
    let mut p = a.clone();
    for _ in 1..a.nrows() {
        p = &p * a;
    }
    p.iter().all(|&x| x == 0.0)
}

#[test]
fn closed_form_matches_a_long_series_near_the_radius() {
    let mut r = ChaCha8Rng::seed_from_u64(40);
    let mut pairs = 0;
    while pairs < 50 {
        let (g1, g2) = (random_graph(&mut r), random_graph(&mut r));
        let labels = label_table(&g1, &g2, &same);
        let a = product_adjacency(&g1, &g2, &labels).to_dense();
        if nilpotent(&a) {
            continue;
        }
        let Some(schur) = Schur::try_new(a.clone(), 1e-14, 100_000) else { continue };
        let rho = schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        if rho < 1e-6 {
            continue;
        }
        pairs += 1;
        let lambda = 0.9 / rho;
        let mut walk = DMatrix::from_element(a.nrows(), 1, 1.0);
        let mut series = 0.0;
        for _ in 0..400 {
            series += walk.sum();
            walk = &a * walk * lambda;
        }
        let closed = random_walk_kernel(&g1, &g2, &labels, lambda).unwrap();
        assert!((closed - series).abs() / closed < 1e-8, "{} vs {}", closed, series);
        assert!(matches!(random_walk_kernel(&g1, &g2, &labels, 1.05 / rho), Err(WalkError::Divergent { .. })));
    }
}

#[test]
fn product_indices_follow_the_definition() {
    let mut r = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..50 {
        let (g1, g2) = (random_graph(&mut r), random_graph(&mut r));
        let a = product_adjacency(&g1, &g2, &label_table(&g1, &g2, &same)).to_dense();
        let n2 = g2.vertices.len();
        for e in &g1.edges {
            for f in &g2.edges {
                let want = same(&g1.vertices[e.source].label, &g2.vertices[f.source].label)
                    * same(&g1.vertices[e.target].label, &g2.vertices[f.target].label);
                assert_eq!(a[(e.source * n2 + f.source, e.target * n2 + f.target)], want);
            }
        }
        let edges = g1.edges.len() * g2.edges.len();
        assert!(a.iter().filter(|&&x| x != 0.0).count() <= edges);
    }
}

#[test]
fn kernel_is_symmetric_in_its_graphs() {
    let mut r = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..50 {
        let (g1, g2) = (random_graph(&mut r), random_graph(&mut r));
        let lambda = corpus_lambda(&[g1.clone(), g2.clone()]);
        let k12 = random_walk_kernel(&g1, &g2, &label_table(&g1, &g2, &same), lambda).unwrap();
        let k21 = random_walk_kernel(&g2, &g1, &label_table(&g2, &g1, &same), lambda).unwrap();
        assert!((k12 - k21).abs() <= 1e-12 * k12.max(1.0));
    }
}

#[test]
fn fixture_graphs_are_deterministic_and_normalized() {
    let inputs = corpus_inputs();
    let graphs = inputs.graphs().unwrap();
    for (g, s) in graphs.iter().zip(&inputs.sources) {
        assert_eq!(g, &build_ddg(s));
        assert!(!g.edges.is_empty());
    }
    let k = walk_kernel_matrix(&graphs, &same, corpus_lambda(&graphs)).unwrap();
    for i in 0..k.nrows() {
        assert!((k[(i, i)] - 1.0).abs() < 1e-12);
        for j in 0..k.nrows() {
            assert!((k[(i, j)] - k[(j, i)]).abs() < 1e-12);
        }
    }
}

#[test]
fn negative_lambda_is_rejected() {
    let g = DepGraph { name: "g".into(), vertices: vec![Vertex { key: "x".into(), label: "x".into() }], edges: vec![] };
    let labels = label_table(&g, &g, &same);
    assert_eq!(random_walk_kernel(&g, &g, &labels, -0.1), Err(WalkError::NegativeLambda(-0.1)));
    assert_eq!(random_walk_kernel(&g, &g, &labels, 0.3), Ok(1.0));
}

use proptest::prelude::*;

use semctx::concept::{
    best_sense_pair, ipl, rescaled_exp, symmetric_exp, ConceptMeasure, ConceptSimilarity, SimilarityConfig,
    TypeHierarchy,
};
use semctx::fixtures::corpus_inputs;
use semctx::linalg::{min_eigenvalue, Matrix};
use semctx::network::EdgeRelation;

fn network_adjacency(net: &semctx::network::SemanticNetwork) -> Matrix {
    let n = net.nodes().len();
    let mut a = Matrix::zeros(n, n);
    for e in net.edges() {
        a[(e.source, e.target)] += e.weight;
        a[(e.target, e.source)] += e.weight;
    }
    a
}

#[test]
fn unscaled_diffusion_is_psd_on_the_fixture_network() {
    let net = corpus_inputs().network(false);
    let k = symmetric_exp(&network_adjacency(&net), 0.1);
    assert!(min_eigenvalue(&k) >= -1e-8);
}

#[test]
fn rescaling_matches_direct_normalization() {
    let net = corpus_inputs().network(false);
    let a = network_adjacency(&net);
    let (raw, scaled) = (symmetric_exp(&a, 0.1), rescaled_exp(&a, 0.1));
    for i in 0..a.nrows() {
        for j in 0..a.nrows() {
            let want = raw[(i, j)] / (raw[(i, i)] * raw[(j, j)]).sqrt();
            assert!((scaled[(i, j)] - want).abs() < 1e-9, "({}, {})", i, j);
        }
    }
}

#[test]
fn measures_stay_in_range_on_the_fixture() {
    let net = corpus_inputs().network(false);
    for measure in ConceptMeasure::ALL {
        let cs = ConceptSimilarity::new(&net, SimilarityConfig::with_measure(measure)).unwrap();
        let labels = cs.hierarchy().concepts().to_vec();
        let t = cs.table(&labels);
        for i in 0..labels.len() {
            for j in 0..labels.len() {
                assert!((t[(i, j)] - t[(j, i)]).abs() < 1e-12);
                match measure {
                    ConceptMeasure::Ipl | ConceptMeasure::Wup => assert!((0.0..=1.0).contains(&t[(i, j)])),
                    ConceptMeasure::Diffusion => assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&t[(i, j)])),
                    _ => assert!(t[(i, j)] >= 0.0),
                }
            }
            if measure == ConceptMeasure::Diffusion {
                assert!((t[(i, i)] - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn ipl_is_monotone_in_path_length() {
    let net = corpus_inputs().network(false);
    let h = TypeHierarchy::new(&net);
    let concepts = h.concepts().to_vec();
    for a in &concepts {
        for b in &concepts {
            for c in &concepts {
                if h.path_length(a, b).unwrap() < h.path_length(a, c).unwrap() {
                    assert!(h.sim_ipl(a, b, 1.0).unwrap() > h.sim_ipl(a, c, 1.0).unwrap());
                }
            }
        }
    }
}

#[test]
fn fixture_packages_are_separate_subhierarchies() {
    let net = corpus_inputs().network(false);
    let h = TypeHierarchy::new(&net);
    assert_eq!(h.nch("Manager", "Employee").unwrap(), "Employee");
    assert_eq!(h.nch("Manager", "Truck").unwrap(), semctx::TOP);
    assert!(net.edges().iter().any(|e| e.relation == EdgeRelation::Ipo));
}

proptest! {
    #[test]
    fn ipl_decreases_with_distance(d in 0usize..50, alpha in 0.1f64..3.0) {
        prop_assert!(ipl(d, alpha) > ipl(d + 1, alpha));
    }

    #[test]
    fn hub_damping(extra in 1u32..20) {
        // adding instances to a sense lowers that sense's contribution
        let text = |n: u32| {
            let uses: String = (0..n).map(|i| format!("int pad{} = 0; pad{} = pad{};", i, i, i)).collect();
            format!("class A {{ void f() {{ int x = 0; x = x; {} }} }}", uses)
        };
        let score = |n: u32| {
            let units = semctx::syntax::parse_compilation(&text(n)).unwrap();
            let corpus = semctx::facts::extract_corpus(&units, &Default::default());
            let net = semctx::network::build_network(&corpus, &Default::default());
            best_sense_pair(&net, "x", "x", |a, b| if a == b { 1.0 } else { 0.0 }).unwrap().score
        };
        prop_assert!(score(extra) < score(0));
    }
}

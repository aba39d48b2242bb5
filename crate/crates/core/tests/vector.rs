use std::collections::BTreeMap;

use semctx::concept::{ConceptMeasure, ConceptSimilarity, SimilarityConfig};
use semctx::fixtures::corpus_inputs;
use semctx::lexical::LexicalConfig;
use semctx::linalg::{min_eigenvalue, Matrix};
use semctx::vector::{
    build_bof, document_kernel, idf_diag, kernel_to_distance, proximity, semantic_matrix, weigh, FeatureKind,
    SemanticSources, Weighting,
};

#[test]
fn types_are_the_marginal_of_identifier_type_pairs() {
    let inputs = corpus_inputs();
    let boit = build_bof(&inputs.corpus, FeatureKind::Boit).unwrap();
    let bot = build_bof(&inputs.corpus, FeatureKind::Bot).unwrap();
    for d in 0..boit.docs.len() {
        let mut marginal: BTreeMap<String, f64> = BTreeMap::new();
        for (f, feature) in boit.space.features.iter().enumerate() {
            *marginal.entry(feature.ty.clone().unwrap()).or_insert(0.0) += boit.counts[(d, f)];
        }
        for (f, feature) in bot.space.features.iter().enumerate() {
            assert_eq!(bot.counts[(d, f)], marginal.get(feature.ty.as_ref().unwrap()).copied().unwrap_or(0.0));
        }
    }
}

#[test]
fn idf_is_log_inverse_document_frequency() {
    let inputs = corpus_inputs();
    let m = build_bof(&inputs.corpus, FeatureKind::Boi).unwrap();
    let n = m.docs.len() as f64;
    for (f, r) in idf_diag(&m).into_iter().enumerate() {
        let df = m.counts.column(f).iter().filter(|&&c| c > 0.0).count() as f64;
        assert!((r - (n / df).ln().max(1e-12)).abs() < 1e-15);
    }
    let (phi, r) = weigh(&m, Weighting::Tfidf);
    for d in 0..m.docs.len() {
        for f in 0..m.space.len() {
            let c = m.counts[(d, f)];
            assert_eq!(phi[(d, f)], if c > 0.0 { 1.0 + c.ln() } else { 0.0 });
        }
    }
    assert_eq!(r, idf_diag(&m));
}

#[test]
fn enriched_kernels_are_psd_with_unit_diagonal() {
    let inputs = corpus_inputs();
    let net = inputs.network(false);
    for measure in ConceptMeasure::ALL {
        let cs = ConceptSimilarity::new(&net, SimilarityConfig::with_measure(measure)).unwrap();
        for kind in [FeatureKind::Boi, FeatureKind::Boit, FeatureKind::Bot] {
            let m = build_bof(&inputs.corpus, kind).unwrap();
            let (phi, r) = weigh(&m, Weighting::Idf);
            let sources = SemanticSources { network: &net, concept: Some(&cs), lexical: Some(LexicalConfig::default()) };
            let s = semantic_matrix(&m.space, &sources);
            assert!((0..s.nrows()).all(|i| s[(i, i)] == 1.0));
            let k = document_kernel(&phi, &proximity(&r, &s).unwrap()).unwrap();
            assert!(min_eigenvalue(&k) >= -1e-8, "{:?} {:?}", measure, kind);
            for v in k.iter() {
                assert!(v.abs() <= 1.0 + 1e-12);
            }
            let d = kernel_to_distance(&k);
            assert!((0..d.nrows()).all(|i| d[(i, i)] == 0.0));
            assert!(d.iter().all(|&x| (0.0..=2.0).contains(&x)));
        }
    }
}

#[test]
fn proximity_scales_rows() {
    let s = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    let p = proximity(&[2.0, 3.0], &s).unwrap();
    assert_eq!(p, Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.5, 3.0]));
    assert!(proximity(&[1.0], &s).is_err());
}

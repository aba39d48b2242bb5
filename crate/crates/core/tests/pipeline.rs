use std::collections::HashMap;

use semctx::facts::{CorpusFacts, LibraryFacts};
use semctx::fixtures::{corpus_inputs, JDK};
use semctx::network::{build_network, EdgeRelation, NodeKind};
use semctx::pipeline::{
    format_delta, heatmap, modularize, topics, Enrichment, Inputs, Model, PipelineConfig, TopicSource,
};
use semctx::vector::Weighting;

fn percent(s: &str) -> f64 {
    s.trim_end_matches('%').parse().unwrap()
}

#[test]
fn runs_are_byte_identical() {
    let inputs = corpus_inputs();
    for preset in [Enrichment::Plain, Enrichment::Ssn1, Enrichment::Ssk1, Enrichment::Ssk2] {
        let cfg = PipelineConfig { k: Some(5), ..PipelineConfig::preset(preset) };
        let (a, b) = (modularize(&inputs, &cfg).unwrap(), modularize(&inputs, &cfg).unwrap());
        assert_eq!(serde_json::to_string(&a.report).unwrap(), serde_json::to_string(&b.report).unwrap());
        assert_eq!(a.dendrogram.to_newick(), b.dendrogram.to_newick());
    }
}

#[test]
fn deltas_follow_from_the_scores() {
    let inputs = corpus_inputs();
    for preset in [Enrichment::Ssn2, Enrichment::Ssk1, Enrichment::Ssk2] {
        let r = modularize(&inputs, &PipelineConfig::preset(preset)).unwrap().report;
        let pd = (r.scores.pd - r.baseline.pd) / r.baseline.pd * 100.0;
        let ted = (r.scores.ted as f64 - r.baseline.ted as f64) / r.baseline.ted as f64 * 100.0;
        assert!((percent(&r.deltas.pd) - pd).abs() <= 0.01);
        assert!((percent(&r.deltas.ted) - ted).abs() <= 0.01);
        assert_eq!(r.modules, 25);
        assert_eq!(r.evaluated, 25);
    }
    assert_eq!(format_delta(7.0, 17.0), "-58.82%");
}

#[test]
fn plain_run_is_its_own_baseline() {
    let r = modularize(&corpus_inputs(), &PipelineConfig::default()).unwrap().report;
    assert_eq!(r.scores, r.baseline);
    assert_eq!((r.deltas.pd.as_str(), r.deltas.ted.as_str()), ("0.00%", "0.00%"));
}

#[test]
fn partition_recovers_packages_under_enrichment() {
    let m = modularize(&corpus_inputs(), &PipelineConfig { k: Some(5), ..PipelineConfig::preset(Enrichment::Ssn1) })
        .unwrap();
    let groups = m.report.partition.unwrap();
    assert_eq!(groups.len(), 5);
    assert_eq!(groups.iter().map(Vec::len).sum::<usize>(), 25);
}

#[test]
fn graph_models_need_sources() {
    let inputs = corpus_inputs();
    let facts_only = Inputs { sources: Vec::new(), ..inputs };
    let err = modularize(&facts_only, &PipelineConfig { model: Model::Ddg, ..PipelineConfig::default() }).err().unwrap();
    assert_eq!(err.stage, "ddg");
}

#[test]
fn config_rejects_unknown_fields_and_bad_values() {
    assert!(serde_json::from_str::<PipelineConfig>(r#"{"modle":"boi"}"#).is_err());
    assert!(PipelineConfig { k: Some(0), ..PipelineConfig::default() }.validate().is_err());
    assert!(PipelineConfig { lambda: Some(-1.0), ..PipelineConfig::default() }.validate().is_err());
    assert!(PipelineConfig { alpha_diffusion: -1.0, ..PipelineConfig::default() }.validate().is_err());
}

#[test]
fn topics_partition_the_vocabulary() {
    let inputs = corpus_inputs();
    for via in [TopicSource::Boit, TopicSource::Ddg] {
        for preset in [Enrichment::Plain, Enrichment::Ssn2] {
            let t = topics(&inputs, &PipelineConfig::preset(preset), 5, via, Weighting::None).unwrap();
            assert_eq!(t.report.topics.len(), 5);
            assert_eq!(t.report.topics.iter().map(Vec::len).sum::<usize>(), t.report.vocabulary);
        }
    }
    assert!(topics(&inputs, &PipelineConfig::default(), 0, TopicSource::Boit, Weighting::None).is_err());
}

#[test]
fn heatmap_groups_modules_by_package() {
    let h = heatmap(&corpus_inputs(), &PipelineConfig::default()).unwrap();
    assert_eq!(h.modules.len(), 25);
    assert!(h.packages.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(h.counts.nrows(), 25);
    assert_eq!(h.counts.ncols(), h.types.len());
    assert_eq!(h.module_distance.nrows(), 25);
    assert!((0..25).all(|i| h.module_distance[(i, i)].abs() < 1e-12));
}

#[test]
fn every_typed_occurrence_has_one_aggregated_isa_edge() {
    let inputs = corpus_inputs();
    let net = build_network(&inputs.corpus, &inputs.libs);
    let mut totals: HashMap<(&str, &str), f64> = HashMap::new();
    for u in &inputs.corpus.units {
        for o in &u.occurrences {
            if o.ty != semctx::UNTYPED {
                *totals.entry((o.id.as_str(), o.ty.as_str())).or_insert(0.0) += o.count as f64;
            }
        }
    }
    for ((id, ty), count) in totals {
        let public = inputs.corpus.units.iter().any(|u| u.api.iter().any(|m| m.name == id && m.owner == ty));
        let want = count + f64::from(u8::from(public));
        assert_eq!(net.isa_weight(id, ty), want, "{} -> {}", id, ty);
        let t = net.node(NodeKind::Term, id).unwrap();
        let edges = net.out_edges(t).filter(|e| e.relation == EdgeRelation::Isa && net.label(e.target) == ty).count();
        assert_eq!(edges, 1);
    }
}

#[test]
fn facts_survive_a_jsonl_round_trip() {
    let inputs = corpus_inputs();
    let text = inputs.corpus.to_jsonl();
    assert_eq!(CorpusFacts::from_jsonl(&text).unwrap(), inputs.corpus);
    let libs = LibraryFacts::from_json(JDK).unwrap();
    assert!(libs.get("Date").is_some());
}

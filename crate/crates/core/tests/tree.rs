use std::collections::BTreeSet;

use proptest::prelude::*;

use semctx::tree::{
    authoritative_from_paths, leaf_path_lengths, path_difference, ted, LabeledTree, PackageThresholds, PdOptions,
    SPLIT_PREFIX,
};

/// Random binary tree over the given leaves, shaped by `cuts`.
fn build(leaves: &[String], cuts: &[usize]) -> LabeledTree {
    if leaves.len() == 1 {
        return LabeledTree::leaf(leaves[0].clone());
    }
    let at = 1 + cuts.first().copied().unwrap_or(0) % (leaves.len() - 1);
    let rest = if cuts.is_empty() { cuts } else { &cuts[1..] };
    LabeledTree::node("", vec![build(&leaves[..at], rest), build(&leaves[at..], rest)])
}

fn tree(n: usize) -> impl Strategy<Value = LabeledTree> {
    (prop::collection::vec(0usize..100, 0..20), Just(n)).prop_map(|(cuts, n)| {
        let leaves: Vec<String> = (0..n).map(|i| format!("m{}", i)).collect();
        build(&leaves, &cuts)
    })
}

proptest! {
    #[test]
    fn ted_is_a_metric_on_samples(a in tree(6), b in tree(6), c in tree(6)) {
        let (ab, ba) = (ted(&a, &b).unwrap(), ted(&b, &a).unwrap());
        prop_assert_eq!(ab, ba);
        prop_assert!(ab <= ted(&a, &c).unwrap() + ted(&c, &b).unwrap());
        prop_assert_eq!(ted(&a, &a).unwrap(), 0);
    }

    #[test]
    fn pd_vanishes_exactly_when_paths_agree(a in tree(7), b in tree(7)) {
        let pd = path_difference(&a, &b, PdOptions::default()).unwrap();
        prop_assert_eq!(pd == 0.0, leaf_path_lengths(&a) == leaf_path_lengths(&b));
        let edges = path_difference(&a, &b, PdOptions { edges: true, sqrt: false }).unwrap();
        prop_assert_eq!(pd, edges);
        let root = path_difference(&a, &b, PdOptions { edges: false, sqrt: true }).unwrap();
        prop_assert!((root * root - pd).abs() < 1e-9);
    }

    #[test]
    fn newick_round_trips(a in tree(8)) {
        prop_assert_eq!(LabeledTree::parse_newick(&a.to_newick()).unwrap(), a);
    }
}

fn units(package: &str, n: usize) -> Vec<(Vec<String>, String)> {
    let path: Vec<String> = package.split('.').map(String::from).collect();
    (0..n).map(|i| (path.clone(), format!("{}.C{:02}", package, i))).collect()
}

#[test]
fn small_packages_drop_and_large_ones_split() {
    let mut all = units("a.small", 4);
    all.extend(units("a.mid", 5));
    all.extend(units("b.big", 50));
    let t = authoritative_from_paths(all, PackageThresholds::default()).unwrap();
    assert_eq!(t.label, "");
    let kept = t.leaf_set();
    assert!(!kept.iter().any(|l| l.starts_with("a.small")));
    assert_eq!(kept.len(), 55);
    let big = t.children.iter().find(|c| c.label == "b").unwrap().children.iter().find(|c| c.label == "big").unwrap();
    let sizes: Vec<(String, usize)> = big.children.iter().map(|c| (c.label.clone(), c.children.len())).collect();
    assert_eq!(sizes, vec![(format!("{}1", SPLIT_PREFIX), 25), (format!("{}2", SPLIT_PREFIX), 25)]);
}

#[test]
fn authoritative_tree_is_idempotent() {
    let mut all = units("p.q", 45);
    all.extend(units("p.r", 3));
    all.extend(units("s", 7));
    let once = authoritative_from_paths(all, PackageThresholds::default()).unwrap();
    // read the placed units back out as package paths and rebuild
    let mut placed = Vec::new();
    fn collect(t: &LabeledTree, path: &mut Vec<String>, out: &mut Vec<(Vec<String>, String)>) {
        for c in &t.children {
            if c.is_leaf() {
                out.push((path.clone(), c.label.clone()));
            } else {
                path.push(c.label.clone());
                collect(c, path, out);
                path.pop();
            }
        }
    }
    collect(&once, &mut Vec::new(), &mut placed);
    let twice = authoritative_from_paths(placed, PackageThresholds::default()).unwrap();
    assert_eq!(once, twice);
}

#[test]
fn restriction_collapses_unary_nodes() {
    let t = LabeledTree::parse_newick("((a,b),(c,(d,e)));").unwrap();
    let keep: BTreeSet<String> = ["a", "c", "d"].iter().map(|s| s.to_string()).collect();
    let r = t.restrict_leaves(&keep, true).unwrap();
    assert_eq!(r.to_newick(), "(a,(c,d));");
    assert!(t.restrict_leaves(&BTreeSet::new(), true).is_none());
}

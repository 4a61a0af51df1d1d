mod common;

use proptest::prelude::*;
use robomorph::evolution::init_few_shots;
use robomorph::grammar::*;

fn g(s: &str) -> DesignGraph {
    DesignGraph::parse(s).unwrap()
}

fn deriv(steps: &[(Rule, NodeAddress)]) -> Derivation {
    let mut d = Derivation::start();
    for (r, s) in steps {
        d.push(*r, s.clone());
    }
    d
}

#[test]
fn apply_rule_examples() {
    let s = DesignGraph::start();
    assert_eq!(apply_rule(&s, Rule::R1, &NodeAddress::root()).unwrap(), g("H-B-T"));
    assert_eq!(
        apply_rule(&g("H-B-T"), Rule::R4, &NodeAddress::spine(1)).unwrap(),
        g("H-U-T")
    );
    assert!(matches!(
        apply_rule(&g("H-U-T"), Rule::R1, &NodeAddress::spine(0)),
        Err(GrammarError::SymbolMismatch { .. })
    ));
}

#[test]
fn completeness_examples() {
    assert!(!g("H-B-T").is_complete());
    assert!(g("H-U-T").is_complete());
    assert!(g("H-U-(C-M-E)-Y-U-T").is_complete());
    assert!(!g("H-U-(C-M-E)-Y-B-T").is_complete());
}

#[test]
fn validate_derivation_examples() {
    let hut = deriv(&[(Rule::R1, NodeAddress::root()), (Rule::R4, NodeAddress::spine(1))]);
    assert_eq!(validate_derivation(&hut).unwrap(), g("H-U-T"));
    let open = deriv(&[(Rule::R1, NodeAddress::root())]);
    assert_eq!(validate_derivation(&open), Err(DerivationError::IncompleteDesign));
    let wrong = deriv(&[(Rule::R2, NodeAddress::root())]);
    assert!(matches!(
        validate_derivation(&wrong),
        Err(DerivationError::ReplayFailure { step: 2, .. })
    ));
    assert_eq!(validate_derivation(&Derivation::default()), Err(DerivationError::Empty));
}

#[test]
fn enumeration_small_cases() {
    assert!(enumerate_complete(1).unwrap().is_empty());
    assert!(enumerate_complete(2).unwrap().is_empty());
    // r0, r1, r3 is complete too, so three steps reach two graphs.
    let three: Vec<String> = enumerate_complete(3).unwrap().into_keys().collect();
    assert_eq!(three, ["H-U-(C-M-E)-T", "H-U-T"]);
    assert!(matches!(enumerate_complete(9), Err(EnumerationError::TooManySteps(9))));
}

#[test]
fn enumeration_matches_string_rewriting() {
    for n in 0..=7 {
        let lib: std::collections::BTreeSet<String> = enumerate_complete(n).unwrap().into_keys().collect();
        assert_eq!(lib, common::string_oracle(n), "max_steps {n}");
    }
}

#[test]
fn enumeration_matches_exhaustive_derivations() {
    for n in 3..=6 {
        let lib: std::collections::BTreeSet<String> = enumerate_complete(n).unwrap().into_keys().collect();
        assert_eq!(lib, common::exhaustive_complete(n), "max_steps {n}");
    }
}

#[test]
fn r3_never_applies_inside_branches() {
    common::for_each_derivation(6, &mut |d| {
        for step in &d.steps {
            if step.rule == Rule::R3 || step.rule == Rule::R4 {
                assert!(step.site.path.is_empty(), "{step:?}");
            }
        }
    });
}

#[test]
fn r5_applies_inside_branches() {
    let d = deriv(&[
        (Rule::R1, NodeAddress::root()),
        (Rule::R3, NodeAddress::spine(1)),
        (Rule::R5, NodeAddress::spine(1).child(0, 2)),
    ]);
    assert_eq!(validate_derivation(&d).unwrap().canonical(), "H-U-(C-M-J-L-E)-T");
}

#[test]
fn r7_puts_the_end_first() {
    let d = deriv(&[
        (Rule::R1, NodeAddress::root()),
        (Rule::R4, NodeAddress::spine(1)),
        (Rule::R7, NodeAddress::spine(0)),
    ]);
    assert_eq!(validate_derivation(&d).unwrap().canonical(), "E-M-C-U-T");
}

#[test]
fn graph_text_round_trips() {
    for s in enumerate_complete(6).unwrap().keys() {
        assert_eq!(&g(s).to_string(), s);
    }
}

fn node_total(nodes: &[Node]) -> usize {
    nodes
        .iter()
        .map(|n| 1 + n.branches.iter().map(DesignGraph::node_count).sum::<usize>())
        .sum()
}

fn graph_from_seed(seed: u64, steps: usize) -> (Derivation, DesignGraph) {
    use rand::seq::IndexedRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut d = Derivation::start();
    let mut graph = DesignGraph::start();
    for _ in 1..steps {
        let options = graph.applicable();
        let Some((rule, site)) = options.choose(&mut rng).cloned() else { break };
        graph = apply_rule(&graph, rule, &site).unwrap();
        d.push(rule, site);
    }
    (d, graph)
}

proptest! {
    #[test]
    fn rule_locality(seed in any::<u64>(), steps in 1usize..9, pick in any::<prop::sample::Index>()) {
        let (_, graph) = graph_from_seed(seed, steps);
        let options = graph.applicable();
        prop_assume!(!options.is_empty());
        let (rule, site) = pick.get(&options).clone();
        let out = apply_rule(&graph, rule, &site).unwrap();
        prop_assert_eq!(out.node_count() + 1, graph.node_count() + node_total(&rule.rhs()));
        // Every node away from the site keeps its symbol at its shifted address.
        for (addr, node) in graph.nodes() {
            if let Some(moved) = addr.after_replacement(&site, rule.rhs_len()) {
                prop_assert_eq!(out.node(&moved).map(|n| n.symbol), Some(node.symbol));
            }
        }
        prop_assert_eq!(apply_rule(&graph, rule, &site).unwrap(), out);
    }

    #[test]
    fn soundness(seed in any::<u64>(), steps in 1usize..10) {
        let (d, graph) = graph_from_seed(seed, steps);
        prop_assert_eq!(d.replay().unwrap(), graph.clone());
        match validate_derivation(&d) {
            Ok(g) => prop_assert!(g.is_complete()),
            Err(e) => prop_assert_eq!(e, DerivationError::IncompleteDesign),
        }
    }

    #[test]
    fn sampled_designs_are_enumerated(seed in any::<u64>(), max_steps in 3usize..=6) {
        let all = enumerate_complete(max_steps).unwrap();
        for r in init_few_shots(3, max_steps, seed).unwrap() {
            let graph = validate_derivation(&r.derivation).unwrap();
            prop_assert!(all.contains_key(&graph.canonical()), "{}", graph);
        }
    }

    #[test]
    fn address_text_round_trips(seed in any::<u64>(), steps in 1usize..10) {
        let (_, graph) = graph_from_seed(seed, steps);
        for (addr, _) in graph.nodes() {
            prop_assert_eq!(addr.to_string().parse::<NodeAddress>().unwrap(), addr);
        }
    }
}

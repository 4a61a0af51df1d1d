#![allow(dead_code)]

pub mod designs;
pub mod mjcf;
pub mod scripted;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robomorph::components::DesignRecord;
use robomorph::evolution::init_few_shots;
use robomorph::generator::OfflineSampler;
use robomorph::grammar::{validate_derivation, Derivation, DesignGraph, Rule};

/// Rule table as plain strings, written out independently of the library.
pub const STRING_RULES: [(char, &str); 7] = [
    ('S', "H-B-T"),
    ('T', "Y-B-T"),
    ('B', "U-(C-M-E)"),
    ('B', "U"),
    ('E', "J-L-E"),
    ('T', "C-M-E"),
    ('H', "E-M-C"),
];

/// Complete graphs reachable in at most `max_steps` steps (r0 included) by
/// rewriting single characters of the textual form.
pub fn string_oracle(max_steps: usize) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    if max_steps == 0 {
        return out;
    }
    let mut frontier: BTreeSet<String> = BTreeSet::from(["S".to_string()]);
    for depth in 1..=max_steps {
        for s in &frontier {
            if !s.contains('S') && !s.contains('B') {
                out.insert(s.clone());
            }
        }
        if depth == max_steps {
            break;
        }
        let mut next = BTreeSet::new();
        for s in &frontier {
            for (i, c) in s.char_indices() {
                for (lhs, rhs) in STRING_RULES {
                    if c == lhs {
                        next.insert(format!("{}{}{}", &s[..i], rhs, &s[i + 1..]));
                    }
                }
            }
        }
        frontier = next;
    }
    out
}

/// Every derivation of at most `max_steps` steps, each site choice
/// explored, visited depth first.
pub fn for_each_derivation(max_steps: usize, visit: &mut dyn FnMut(&Derivation)) {
    fn go(d: &mut Derivation, graph: &DesignGraph, max: usize, visit: &mut dyn FnMut(&Derivation)) {
        visit(d);
        if d.len() == max {
            return;
        }
        for (rule, site) in graph.applicable() {
            d.push(rule, site.clone());
            let next = d.replay().expect("applicable steps replay");
            go(d, &next, max, visit);
            d.steps.pop();
        }
    }
    if max_steps == 0 {
        return;
    }
    let mut d = Derivation::start();
    go(&mut d, &DesignGraph::start(), max_steps, visit);
}

/// Canonical forms of all complete graphs from exhaustive derivations.
pub fn exhaustive_complete(max_steps: usize) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for_each_derivation(max_steps, &mut |d| {
        if let Ok(g) = validate_derivation(d) {
            out.insert(g.canonical());
        }
    });
    out
}

/// A seeded random valid record: a sampled design, sometimes mutated
/// further by the offline sampler.
pub fn random_record(seed: u64) -> DesignRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = rng.random_range(3..=9);
    let mut record = init_few_shots(1, steps, rng.random()).expect("sampling succeeds").remove(0);
    if rng.random_bool(0.5) {
        if let Some((m, _)) = OfflineSampler::new().mutate(&record, &mut rng) {
            record = m;
            record.reasoning = format!("mutant {seed}");
        }
    }
    record
}

pub fn uses_rule(record: &DesignRecord, rule: Rule) -> bool {
    record.derivation.steps.iter().any(|s| s.rule == rule)
}

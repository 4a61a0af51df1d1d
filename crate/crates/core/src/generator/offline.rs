use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use super::{DesignGenerator, GeneratorError, GeneratorResponse, PromptBundle};
use crate::components::{
    emit_design_text, fill_components, parse_design_text, sample_component, Component, ComponentAssignment,
    DesignRecord,
};
use crate::grammar::{Derivation, DesignGraph, NodeAddress, Rule, Step};

/// Mutation attempts before the sampler echoes its elite unchanged.
pub const OFFLINE_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationKind {
    /// Apply one more applicable rule at a random site.
    Append,
    /// Redraw the component of one parametric node.
    Resample,
    /// Undo the final structural step, `r0` and `r1` excepted.
    DropLastStep,
    /// Swap one `r3` for `r4` or back, dropping steps inside a removed branch.
    ToggleBranch,
}

const KINDS: [MutationKind; 4] = [
    MutationKind::Append,
    MutationKind::Resample,
    MutationKind::DropLastStep,
    MutationKind::ToggleBranch,
];

/// Mutates a random few-shot example, replaying every edit through the
/// grammar so the output always validates.
#[derive(Debug, Clone, Default)]
pub struct OfflineSampler {
    max_steps: Option<usize>,
}

impl OfflineSampler {
    pub fn new() -> Self {
        OfflineSampler::default()
    }

    /// Rejects mutants whose derivation is longer than `max_steps`.
    pub fn with_max_steps(max_steps: usize) -> Self {
        OfflineSampler {
            max_steps: Some(max_steps),
        }
    }
}

struct Draft {
    derivation: Derivation,
    graph: DesignGraph,
    components: ComponentAssignment,
}

impl Draft {
    fn applicable(&self, kind: MutationKind) -> bool {
        match kind {
            MutationKind::Append => !self.graph.applicable().is_empty(),
            MutationKind::Resample => self.parametric().next().is_some(),
            MutationKind::DropLastStep => self.derivation.len() > 2,
            MutationKind::ToggleBranch => self
                .derivation
                .steps
                .iter()
                .any(|s| matches!(s.rule, Rule::R3 | Rule::R4)),
        }
    }

    fn parametric(&self) -> impl Iterator<Item = NodeAddress> + '_ {
        self.graph
            .nodes()
            .into_iter()
            .filter(|(_, n)| Component::is_parametric(n.symbol))
            .map(|(a, _)| a)
    }

    fn remap(&mut self, f: impl Fn(&NodeAddress) -> Option<NodeAddress>) {
        let mut out = ComponentAssignment::new();
        for (addr, c) in self.components.iter() {
            if let Some(a) = f(addr) {
                out.insert(a, *c);
            }
        }
        self.components = out;
    }

    fn apply(&mut self, kind: MutationKind, rng: &mut ChaCha8Rng) -> String {
        match kind {
            MutationKind::Append => {
                let rules = self.graph.applicable_rules();
                let rule = *rules.choose(rng).expect("checked applicable");
                let sites: Vec<NodeAddress> = self
                    .graph
                    .applicable()
                    .into_iter()
                    .filter(|(r, _)| *r == rule)
                    .map(|(_, s)| s)
                    .collect();
                let site = sites.choose(rng).expect("rule applies somewhere").clone();
                self.derivation.push(rule, site.clone());
                self.graph = self.derivation.replay().expect("applicable rule replays");
                self.remap(|a| a.after_replacement(&site, rule.rhs_len()));
                format!("appended {rule} at {site}")
            }
            MutationKind::Resample => {
                let sites: Vec<NodeAddress> = self.parametric().collect();
                let site = sites.choose(rng).expect("checked applicable").clone();
                let symbol = self.graph.node(&site).expect("listed node").symbol;
                let c = sample_component(symbol, rng).expect("parametric symbol");
                let token = c.token();
                self.components.insert(site.clone(), c);
                format!("redrew {symbol} at {site} as [{token}]")
            }
            MutationKind::DropLastStep => {
                let step = self.derivation.steps.pop().expect("checked applicable");
                self.graph = self.derivation.replay().expect("prefix replays");
                // Only r5 leaves the same symbol at its site.
                let keep_site = step.rule == Rule::R5;
                let branch = branch_prefix(&step.site);
                self.remap(|a| {
                    a.after_collapse(&step.site, step.rule.rhs_len() - 1)
                        .filter(|m| (keep_site || *m != step.site) && !inside(m, &branch))
                });
                format!("removed the final {} at {}", step.rule, step.site)
            }
            MutationKind::ToggleBranch => {
                let toggles: Vec<usize> = (0..self.derivation.len())
                    .filter(|&i| matches!(self.derivation.steps[i].rule, Rule::R3 | Rule::R4))
                    .collect();
                let i = *toggles.choose(rng).expect("checked applicable");
                let step = self.derivation.steps[i].clone();
                if step.rule == Rule::R4 {
                    self.derivation.steps[i].rule = Rule::R3;
                    self.graph = self.derivation.replay().expect("r3 and r4 share a site");
                    format!("grew an appendage at step {} ({})", i + 1, step.site)
                } else {
                    let (kept, branch) = drop_branch(&self.derivation, i);
                    self.derivation = kept;
                    self.graph = self.derivation.replay().expect("steps outside the branch replay");
                    self.remap(|a| (!inside(a, &branch)).then(|| a.clone()));
                    format!("removed the appendage of step {} ({})", i + 1, step.site)
                }
            }
        }
    }
}

/// Prefix of addresses inside the branch hanging off `u`.
fn branch_prefix(u: &NodeAddress) -> Vec<(usize, usize)> {
    let mut p = u.path.clone();
    p.push((u.index, 0));
    p
}

fn inside(addr: &NodeAddress, prefix: &[(usize, usize)]) -> bool {
    addr.path.len() >= prefix.len() && addr.path[..prefix.len()] == *prefix
}

/// Turns step `i` (an `r3`) into `r4`, dropping later steps that rewrite
/// nodes of its branch. Returns the new derivation and the branch prefix in
/// the final graph.
fn drop_branch(deriv: &Derivation, i: usize) -> (Derivation, Vec<(usize, usize)>) {
    let mut steps: Vec<Step> = deriv.steps[..i].to_vec();
    steps.push(Step {
        rule: Rule::R4,
        site: deriv.steps[i].site.clone(),
    });
    let mut u = deriv.steps[i].site.clone();
    for step in &deriv.steps[i + 1..] {
        if inside(&step.site, &branch_prefix(&u)) {
            continue;
        }
        u = u
            .after_replacement(&step.site, step.rule.rhs_len())
            .expect("the body node is never rewritten");
        steps.push(step.clone());
    }
    (Derivation { steps }, branch_prefix(&u))
}

fn strip_header(shot: &str) -> &str {
    match shot.split_once('\n') {
        Some((first, rest)) if first.trim_start().starts_with("###") => rest,
        _ => shot,
    }
}

impl OfflineSampler {
    /// The mutated record, or `None` after `OFFLINE_ATTEMPTS` failures.
    pub fn mutate(&self, elite: &DesignRecord, rng: &mut ChaCha8Rng) -> Option<(DesignRecord, Vec<String>)> {
        let graph = elite.validate().ok()?;
        let extra = Geometric::new(0.5).expect("valid probability");
        for _ in 0..OFFLINE_ATTEMPTS {
            let edits = 1 + extra.sample(rng) as usize;
            let mut draft = Draft {
                derivation: elite.derivation.clone(),
                graph: graph.clone(),
                components: elite.components.clone(),
            };
            let mut log = Vec::with_capacity(edits);
            for _ in 0..edits {
                let kinds: Vec<MutationKind> =
                    KINDS.into_iter().filter(|&k| draft.applicable(k)).collect();
                let Some(&kind) = kinds.choose(rng) else { break };
                log.push(draft.apply(kind, rng));
            }
            let too_long = self.max_steps.is_some_and(|m| draft.derivation.len() > m);
            if too_long || !draft.graph.is_complete() {
                continue;
            }
            fill_components(&draft.graph, &mut draft.components, rng);
            let record = DesignRecord::new(draft.derivation, draft.components, "");
            if record.validate().is_ok() {
                return Some((record, log));
            }
        }
        None
    }
}

impl DesignGenerator for OfflineSampler {
    fn backend(&self) -> &str {
        "offline"
    }

    fn generate(&self, bundle: &PromptBundle, seed: u64) -> Result<GeneratorResponse, GeneratorError> {
        let started = Instant::now();
        if bundle.few_shots.is_empty() {
            return Err(GeneratorError::NoExamples);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let index = rng.random_range(0..bundle.few_shots.len());
        let elite = parse_design_text(strip_header(&bundle.few_shots[index])).map_err(|e| {
            GeneratorError::BadExample {
                index: index + 1,
                reason: e.to_string(),
            }
        })?;
        let (mut record, dead_end) = match self.mutate(&elite, &mut rng) {
            Some((mut record, log)) => {
                let transcript = record.derivation.transcript().expect("validated");
                record.reasoning = format!(
                    "Started from example {} and made {} edit(s): {}.\n{}",
                    index + 1,
                    log.len(),
                    log.join("; "),
                    transcript.trim_end()
                );
                (record, false)
            }
            None => (elite, true),
        };
        if dead_end {
            log::warn!("offline sampler found no complete mutant of example {}", index + 1);
            record.reasoning = format!("Kept example {} unchanged.\n{}", index + 1, record.reasoning);
        }
        Ok(GeneratorResponse {
            raw_text: emit_design_text(&record),
            backend: self.backend().to_string(),
            latency: started.elapsed().as_secs_f64(),
            usage: None,
            dead_end,
        })
    }
}

//! The outer search loop: elite queue, best-shot prompts and archiving.

mod queue;
mod trace;

pub use queue::{EliteEntry, EliteQueue, QueueSlot};
pub use trace::{
    DesignLine, EvolutionTrace, JsonLinesSink, NullSink, SummaryLine, TraceError, TraceLine, TraceSink,
};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::{compile, is_corrupted, Corruption, CorruptionStage};
use crate::components::{
    emit_design_text, fill_components, parse_design_text, ComponentAssignment, DesignRecord,
};
use crate::control::{evaluate_fitness, train_policy, FitnessReport, Training, FINAL_ROLLOUTS};
use crate::generator::{DesignGenerator, GeneratorError, PromptBundle};
use crate::grammar::{Derivation, DesignGraph, NodeAddress};
use crate::prompts::{SYSTEM_PROMPT, USER_PROMPT};
use crate::seeds::derive_seed;
use crate::sim::{SimConfig, Terrain, TerrainKind};

/// Stream of the run seed reserved for few-shot initialization.
pub const INIT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    pub evolutions: usize,
    /// Designs requested per evolution.
    pub population: usize,
    /// Elite queue capacity and few-shot count.
    pub k: usize,
    /// Step limit for the sampled initial few-shots.
    pub init_max_steps: usize,
    pub terrain: TerrainKind,
    /// Only ridged terrain uses it.
    pub terrain_seed: u64,
    pub sim: SimConfig,
    /// Screening evaluations per gait search.
    pub train_budget: usize,
    pub final_rollouts: usize,
    pub collisions: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            evolutions: 10,
            population: 8,
            k: 5,
            init_max_steps: 7,
            terrain: TerrainKind::Flat,
            terrain_seed: 0,
            sim: SimConfig::default(),
            train_budget: 41,
            final_rollouts: FINAL_ROLLOUTS,
            collisions: false,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |what: &str| Err(EvolutionError::InvalidConfig(what.to_string()));
        if self.evolutions < 1 {
            return bad("evolutions must be at least 1");
        }
        if self.k < 1 {
            return bad("k must be at least 1");
        }
        if self.train_budget < 1 || self.final_rollouts < 1 {
            return bad("train_budget and final_rollouts must be at least 1");
        }
        let s = &self.sim;
        if !(s.dt > 0.0 && s.dt.is_finite()) || s.horizon < 1 || s.solver_iterations < 1 {
            return bad("sim needs dt > 0, horizon >= 1 and solver_iterations >= 1");
        }
        if s.z_range.0.is_nan() || s.z_range.1.is_nan() || s.z_range.0 >= s.z_range.1 {
            return bad("sim z_range must be an increasing pair");
        }
        Ok(())
    }

    pub fn terrain(&self) -> Terrain {
        Terrain::new(self.terrain, self.terrain_seed)
    }
}

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{attempts} sampling attempts produced fewer than {k} complete designs")]
    RetryExhausted { k: usize, attempts: usize },
    #[error("generator failed in evolution {evolution}, slot {slot}: {source}")]
    GeneratorUnavailable {
        evolution: usize,
        slot: usize,
        source: GeneratorError,
    },
    #[error("writing the trace failed: {0}")]
    Sink(#[from] std::io::Error),
    #[error("cannot resume: {0}")]
    Resume(String),
}

fn sample_derivation(max_steps: usize, rng: &mut ChaCha8Rng) -> (Derivation, DesignGraph) {
    let mut derivation = Derivation::start();
    let mut graph = DesignGraph::start();
    while derivation.len() < max_steps {
        let rules = graph.applicable_rules();
        let Some(&rule) = rules.choose(rng) else { break };
        let sites: Vec<NodeAddress> = graph
            .applicable()
            .into_iter()
            .filter(|(r, _)| *r == rule)
            .map(|(_, s)| s)
            .collect();
        let site = sites.choose(rng).expect("rule applies somewhere").clone();
        derivation.push(rule, site);
        graph = derivation.replay().expect("applicable rule replays");
    }
    (derivation, graph)
}

/// `k` random complete designs, each derived in up to `max_steps` steps
/// (`r0` included) with uniformly drawn rules, sites and components.
pub fn init_few_shots(k: usize, max_steps: usize, seed: u64) -> Result<Vec<DesignRecord>, EvolutionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit = 1000 * k;
    let mut out = Vec::with_capacity(k);
    let mut attempts = 0;
    while out.len() < k {
        if attempts >= limit {
            return Err(EvolutionError::RetryExhausted { k, attempts });
        }
        attempts += 1;
        let (derivation, graph) = sample_derivation(max_steps, &mut rng);
        if !graph.is_complete() {
            continue;
        }
        let mut components = ComponentAssignment::new();
        fill_components(&graph, &mut components, &mut rng);
        let reasoning = format!(
            "Sampled {} structural steps at random.\n{}Components: {}",
            derivation.len(),
            derivation.transcript().expect("replayed above"),
            components.render(&graph)
        );
        out.push(DesignRecord::new(derivation, components, &reasoning));
    }
    Ok(out)
}

/// Elites rendered under numbered headers, weakest first. Fitness values
/// are never included.
pub fn build_prompt(queue: &EliteQueue, system_prompt: &str, user_prompt: &str) -> PromptBundle {
    let few_shots = queue
        .ascending()
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let mut record = e.record.clone();
            record.fitness = None;
            format!("### EXAMPLE {} ###\n{}", i + 1, emit_design_text(&record))
        })
        .collect();
    PromptBundle {
        system: system_prompt.to_string(),
        user: user_prompt.to_string(),
        few_shots,
    }
}

/// Drops markdown code fence lines.
pub fn strip_fences(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Parses generator output, retrying once without code fences, then checks
/// that the design compiles.
pub fn parse_generated(raw: &str) -> Result<DesignRecord, Corruption> {
    let record = match parse_design_text(raw) {
        Ok(r) => r,
        Err(first) => {
            let stripped = strip_fences(raw);
            if stripped == raw {
                return Err(Corruption::from(&first));
            }
            parse_design_text(&stripped).map_err(|e| Corruption::from(&e))?
        }
    };
    match is_corrupted(&record) {
        Some(c) => Err(c),
        None => Ok(record),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: FitnessReport,
    pub training: Training,
}

/// Gait search followed by the final Monte Carlo estimate.
pub fn evaluate_design(record: &DesignRecord, config: &EvolutionConfig, seed: u64) -> Result<Evaluation, Corruption> {
    let model = compile(record, config.collisions).map_err(|e| Corruption {
        stage: CorruptionStage::Compile,
        message: e.to_string(),
    })?;
    let terrain = config.terrain();
    let training = train_policy(&model, &terrain, &config.sim, config.train_budget, derive_seed(seed, 0));
    let report = evaluate_fitness(
        &model,
        &training.policy,
        &terrain,
        &config.sim,
        config.final_rollouts,
        derive_seed(seed, 1),
    );
    Ok(Evaluation { report, training })
}

fn slot_seed(seed: u64, evolution: usize, slot: usize) -> u64 {
    derive_seed(derive_seed(seed, evolution as u64), slot as u64)
}

struct Candidate {
    slot: usize,
    seed: u64,
    parsed: Result<DesignRecord, Corruption>,
    raw_text: String,
    dead_end: bool,
}

/// Evaluates candidates in parallel, then offers them to the queue in slot
/// order and records one line each plus the evolution summary.
fn settle(
    evolution: usize,
    candidates: Vec<Candidate>,
    config: &EvolutionConfig,
    queue: &mut EliteQueue,
    trace: &mut EvolutionTrace,
    sink: &mut dyn TraceSink,
) -> Result<(), EvolutionError> {
    let results: Vec<Result<Evaluation, Corruption>> = candidates
        .par_iter()
        .map(|c| {
            c.parsed
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|r| evaluate_design(r, config, derive_seed(c.seed, 1)))
        })
        .collect();
    let mut corrupted = 0;
    let mut fitnesses = Vec::new();
    for (c, result) in candidates.into_iter().zip(results) {
        let mut line = DesignLine {
            evolution,
            slot: c.slot,
            seed: c.seed,
            record: None,
            report: None,
            training_history: Vec::new(),
            corruption: None,
            raw_text: None,
            offer: None,
            accepted: false,
            dead_end: c.dead_end,
        };
        match (c.parsed, result) {
            (Ok(record), Ok(eval)) => {
                let fitness = eval.report.fitness;
                line.offer = Some(queue.offers());
                line.accepted = queue.maybe_insert(fitness, record.clone());
                line.record = Some(record);
                line.report = Some(eval.report);
                line.training_history = eval.training.history;
                fitnesses.push(fitness);
            }
            (_, Err(corruption)) | (Err(corruption), _) => {
                corrupted += 1;
                log::info!("evolution {evolution} slot {}: corrupted design ({corruption})", c.slot);
                line.corruption = Some(corruption);
                line.raw_text = Some(c.raw_text);
            }
        }
        let line = TraceLine::Design(line);
        sink.record(&line)?;
        trace.lines.push(line);
    }
    let summary = SummaryLine {
        evolution,
        best: queue.max_fitness().unwrap_or(f64::NEG_INFINITY),
        mean: (!fitnesses.is_empty()).then(|| fitnesses.iter().sum::<f64>() / fitnesses.len() as f64),
        evaluated: fitnesses.len(),
        corrupted,
        queue: queue.snapshot(),
    };
    log::info!(
        "evolution {evolution}: best {:.4} m/s, {} evaluated, {corrupted} corrupted",
        summary.best,
        summary.evaluated
    );
    let line = TraceLine::Summary(summary);
    sink.record(&line)?;
    trace.lines.push(line);
    Ok(())
}

/// Runs the full loop from freshly sampled few-shots.
pub fn run_evolution(
    config: &EvolutionConfig,
    generator: &dyn DesignGenerator,
    seed: u64,
    sink: &mut dyn TraceSink,
) -> Result<EvolutionTrace, EvolutionError> {
    resume_evolution(config, generator, seed, EvolutionTrace::default(), sink)
}

/// Continues a run whose complete evolutions are in `previous`. Those lines
/// are not sent to `sink` again. Results match an uninterrupted run.
pub fn resume_evolution(
    config: &EvolutionConfig,
    generator: &dyn DesignGenerator,
    seed: u64,
    previous: EvolutionTrace,
    sink: &mut dyn TraceSink,
) -> Result<EvolutionTrace, EvolutionError> {
    config.validate()?;
    let mut trace = previous.complete_prefix();
    let done: Vec<usize> = trace.summaries().map(|s| s.evolution).collect();
    if done.iter().enumerate().any(|(i, &e)| i != e) {
        return Err(EvolutionError::Resume(
            "summaries are not numbered 0, 1, 2, ...".into(),
        ));
    }
    if done.len() > config.evolutions + 1 {
        return Err(EvolutionError::Resume(format!(
            "trace holds {} evolutions but the configuration asks for {}",
            done.len() - 1,
            config.evolutions
        )));
    }
    let mut queue = trace.replay_queue(config.k);

    if done.is_empty() {
        let init = init_few_shots(config.k, config.init_max_steps, derive_seed(seed, INIT_STREAM))?;
        let candidates = init
            .into_iter()
            .enumerate()
            .map(|(slot, record)| Candidate {
                slot,
                seed: slot_seed(seed, 0, slot),
                raw_text: String::new(),
                parsed: match is_corrupted(&record) {
                    None => Ok(record),
                    Some(c) => Err(c),
                },
                dead_end: false,
            })
            .collect();
        settle(0, candidates, config, &mut queue, &mut trace, sink)?;
    }

    let first = done.len().max(1);
    for evolution in first..=config.evolutions {
        let bundle = build_prompt(&queue, SYSTEM_PROMPT, USER_PROMPT);
        let mut candidates = Vec::with_capacity(config.population);
        for slot in 0..config.population {
            let seed = slot_seed(seed, evolution, slot);
            let response = generator
                .generate(&bundle, derive_seed(seed, 0))
                .map_err(|source| EvolutionError::GeneratorUnavailable {
                    evolution,
                    slot,
                    source,
                })?;
            candidates.push(Candidate {
                slot,
                seed,
                parsed: parse_generated(&response.raw_text),
                raw_text: response.raw_text,
                dead_end: response.dead_end,
            });
        }
        settle(evolution, candidates, config, &mut queue, &mut trace, sink)?;
    }
    Ok(trace)
}

//! Open-loop sinusoidal gaits, rollout scoring and gait search.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compiler::{RobotModel, TORQUE_MAX};
use crate::seeds::derive_seed;
use crate::sim::{is_healthy, project_planar, PlanarModel, SimConfig, SimState, Simulator, Terrain};

pub const FREQUENCY_MIN: f64 = 0.5;
pub const FREQUENCY_MAX: f64 = 4.0;
/// Half-width of the uniform spawn perturbation on hinge angles, radians.
pub const SPAWN_PERTURBATION: f64 = 0.05;
/// Offspring per generation of the gait search.
pub const LAMBDA: usize = 8;
/// Mutation scale relative to each parameter's box width.
pub const SIGMA: f64 = 0.15;
pub const SCREENING_ROLLOUTS: usize = 4;
pub const FINAL_ROLLOUTS: usize = 16;

/// `torque_i(t) = A_i * TORQUE_MAX * sin(2π ω t + φ_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitPolicy {
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
    /// Hz.
    pub frequency: f64,
}

impl GaitPolicy {
    /// No actuation at all.
    pub fn zero(actuators: usize) -> Self {
        GaitPolicy {
            amplitudes: vec![0.0; actuators],
            phases: vec![0.0; actuators],
            frequency: FREQUENCY_MIN,
        }
    }

    /// Uniform over the parameter box.
    pub fn random(actuators: usize, rng: &mut impl Rng) -> Self {
        GaitPolicy {
            amplitudes: (0..actuators).map(|_| rng.random_range(0.0..=1.0)).collect(),
            phases: (0..actuators).map(|_| rng.random_range(0.0..TAU)).collect(),
            frequency: rng.random_range(FREQUENCY_MIN..=FREQUENCY_MAX),
        }
    }

    pub fn actuators(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn in_bounds(&self) -> bool {
        self.amplitudes.len() == self.phases.len()
            && self.amplitudes.iter().all(|a| (0.0..=1.0).contains(a))
            && self.phases.iter().all(|p| (0.0..TAU).contains(p))
            && (FREQUENCY_MIN..=FREQUENCY_MAX).contains(&self.frequency)
    }

    pub fn torques(&self, t: f64, out: &mut [f64]) {
        let base = TAU * self.frequency * t;
        for ((o, a), p) in out.iter_mut().zip(&self.amplitudes).zip(&self.phases) {
            *o = a * TORQUE_MAX * (base + p).sin();
        }
    }

    /// Gaussian step of `SIGMA` box widths; amplitude and frequency are
    /// clipped, phases wrap.
    pub fn mutate(&self, rng: &mut impl Rng) -> Self {
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|a| (a + SIGMA * normal()).clamp(0.0, 1.0))
            .collect();
        let phases = self
            .phases
            .iter()
            .map(|p| (p + SIGMA * TAU * normal()).rem_euclid(TAU) % TAU)
            .collect();
        let frequency = (self.frequency + SIGMA * (FREQUENCY_MAX - FREQUENCY_MIN) * normal())
            .clamp(FREQUENCY_MIN, FREQUENCY_MAX);
        GaitPolicy {
            amplitudes,
            phases,
            frequency,
        }
    }
}

/// Forward velocity of the root over one step.
pub fn reward(before: &SimState, after: &SimState, dt: f64) -> f64 {
    (after.root_x() - before.root_x()) / dt
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Healthy(f64),
    /// The step's reward counts; the rollout ends.
    Unhealthy(f64),
    /// The state became unusable; the step earns nothing and the rollout ends.
    Blowup,
}

/// What `evaluate` needs from a simulator.
pub trait RolloutEnv {
    fn horizon(&self) -> usize;
    /// Starts a new rollout; false when the starting state is already
    /// unhealthy.
    fn reset(&mut self, rollout_seed: u64) -> bool;
    fn time(&self) -> f64;
    fn step(&mut self, torques: &[f64]) -> StepOutcome;
}

/// A `Simulator` on one terrain, scored by forward velocity.
pub struct SimEnv {
    sim: Simulator,
    state: SimState,
}

impl SimEnv {
    pub fn new(model: PlanarModel, terrain: Terrain, config: SimConfig) -> Self {
        let sim = Simulator::new(model, terrain, config);
        let state = sim.spawn_state();
        SimEnv { sim, state }
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn simulator(&mut self) -> &mut Simulator {
        &mut self.sim
    }
}

impl RolloutEnv for SimEnv {
    fn horizon(&self) -> usize {
        self.sim.config().horizon
    }

    fn reset(&mut self, rollout_seed: u64) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(rollout_seed);
        let mut state = self.sim.spawn_state();
        for q in state.q.iter_mut().skip(3) {
            *q += rng.random_range(-SPAWN_PERTURBATION..=SPAWN_PERTURBATION);
        }
        self.sim.clamp_to_limits(&mut state);
        self.sim.refresh_contact(&mut state);
        self.state = state;
        is_healthy(&self.state, self.sim.config().z_range)
    }

    fn time(&self) -> f64 {
        self.state.time
    }

    fn step(&mut self, torques: &[f64]) -> StepOutcome {
        let x0 = self.state.root_x();
        if self.sim.step(&mut self.state, torques).is_err() {
            return StepOutcome::Blowup;
        }
        let r = (self.state.root_x() - x0) / self.sim.config().dt;
        if is_healthy(&self.state, self.sim.config().z_range) {
            StepOutcome::Healthy(r)
        } else {
            StepOutcome::Unhealthy(r)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    /// Mean over rollouts of each rollout's mean reward, m/s.
    pub fitness: f64,
    pub rollout_means: Vec<f64>,
    pub rollout_lengths: Vec<usize>,
    pub policy: GaitPolicy,
    pub seeds: Vec<u64>,
}

/// Mean reward of one rollout and its length. A rollout that never
/// completes a step, including one that starts unhealthy, scores 0.
pub fn run_rollout(env: &mut impl RolloutEnv, policy: &GaitPolicy, rollout_seed: u64) -> (f64, usize) {
    if !env.reset(rollout_seed) {
        return (0.0, 0);
    }
    let mut torques = vec![0.0; policy.actuators()];
    let mut sum = 0.0;
    let mut len = 0;
    for _ in 0..env.horizon() {
        policy.torques(env.time(), &mut torques);
        match env.step(&torques) {
            StepOutcome::Healthy(r) => {
                sum += r;
                len += 1;
            }
            StepOutcome::Unhealthy(r) => {
                sum += r;
                len += 1;
                break;
            }
            StepOutcome::Blowup => break,
        }
    }
    let mean = if len == 0 { 0.0 } else { sum / len as f64 };
    (mean, len)
}

/// Monte Carlo fitness over `n_rollouts` perturbed spawns.
pub fn evaluate_with(
    env: &mut impl RolloutEnv,
    policy: &GaitPolicy,
    n_rollouts: usize,
    seed: u64,
) -> FitnessReport {
    assert!(n_rollouts >= 1, "at least one rollout");
    let seeds: Vec<u64> = (0..n_rollouts as u64).map(|i| derive_seed(seed, i)).collect();
    let (rollout_means, rollout_lengths): (Vec<f64>, Vec<usize>) =
        seeds.iter().map(|&s| run_rollout(env, policy, s)).unzip();
    let fitness = rollout_means.iter().sum::<f64>() / n_rollouts as f64;
    FitnessReport {
        fitness,
        rollout_means,
        rollout_lengths,
        policy: policy.clone(),
        seeds,
    }
}

pub fn evaluate_fitness(
    model: &RobotModel,
    policy: &GaitPolicy,
    terrain: &Terrain,
    config: &SimConfig,
    n_rollouts: usize,
    seed: u64,
) -> FitnessReport {
    let mut env = SimEnv::new(project_planar(model), terrain.clone(), *config);
    evaluate_with(&mut env, policy, n_rollouts, seed)
}

/// Outcome of a gait search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Training {
    pub policy: GaitPolicy,
    /// Incumbent screening fitness after the initial evaluation and after
    /// each generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// (1+λ) random search over gait parameters. `budget` counts screening
/// evaluations, the initial policy's included.
pub fn train_policy(
    model: &RobotModel,
    terrain: &Terrain,
    config: &SimConfig,
    budget: usize,
    seed: u64,
) -> Training {
    assert!(budget >= 1, "budget must allow the initial evaluation");
    let planar = project_planar(model);
    let screen_seed = derive_seed(seed, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let mut best = GaitPolicy::random(model.actuators.len(), &mut rng);
    let screen = |policy: &GaitPolicy| {
        let mut env = SimEnv::new(planar.clone(), terrain.clone(), *config);
        evaluate_with(&mut env, policy, SCREENING_ROLLOUTS, screen_seed).fitness
    };
    let mut best_fit = screen(&best);
    let mut history = vec![best_fit];
    let mut evaluations = 1;
    // Without actuators every candidate behaves identically.
    if best.actuators() == 0 {
        return Training {
            policy: best,
            history,
            evaluations,
        };
    }
    while evaluations < budget {
        let k = LAMBDA.min(budget - evaluations);
        let candidates: Vec<GaitPolicy> = (0..k).map(|_| best.mutate(&mut rng)).collect();
        let scores: Vec<f64> = candidates.par_iter().map(screen).collect();
        evaluations += k;
        let (idx, &fit) = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("k >= 1");
        if fit > best_fit {
            best_fit = fit;
            best = candidates[idx].clone();
        }
        history.push(best_fit);
    }
    Training {
        policy: best,
        history,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_examples() {
        let mut a = SimState {
            q: vec![0.0; 3],
            v: vec![0.0; 3],
            time: 0.0,
            ceiling_contact: false,
        };
        let mut b = a.clone();
        b.q[0] = 0.002;
        assert!((reward(&a, &b, 0.002) - 1.0).abs() < 1e-12);
        assert_eq!(reward(&a, &a, 0.002), 0.0);
        b.q[0] = -0.004;
        assert!((reward(&a, &b, 0.002) + 2.0).abs() < 1e-12);
        a.q[0] = 1.0;
        b.q[0] = 1.1;
        assert!((reward(&a, &b, 0.1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mutation_stays_in_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = GaitPolicy::random(4, &mut rng);
        for _ in 0..1000 {
            p = p.mutate(&mut rng);
            assert!(p.in_bounds(), "{p:?}");
        }
    }
}

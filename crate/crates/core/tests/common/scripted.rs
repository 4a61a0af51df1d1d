//! A stub rollout environment replaying fixed reward rows.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use robomorph::control::{evaluate_with, GaitPolicy, RolloutEnv, StepOutcome};

/// How a scripted rollout ends before the horizon.
#[derive(Clone, Copy)]
pub enum End {
    Horizon,
    Unhealthy,
    Blowup,
    DeadOnArrival,
}

/// Replays one scripted reward row per reset, in order.
pub struct Scripted {
    pub rows: Vec<(Vec<f64>, End)>,
    pub horizon: usize,
    current: usize,
    step: usize,
}

impl RolloutEnv for Scripted {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&mut self, _seed: u64) -> bool {
        self.current = if self.step == usize::MAX { 0 } else { self.current + 1 };
        self.step = 0;
        !matches!(self.rows[self.current].1, End::DeadOnArrival)
    }

    fn time(&self) -> f64 {
        self.step as f64 * 0.002
    }

    fn step(&mut self, _torques: &[f64]) -> StepOutcome {
        let (row, end) = &self.rows[self.current];
        let r = row[self.step];
        self.step += 1;
        let last = self.step == row.len();
        match end {
            _ if !last => StepOutcome::Healthy(r),
            End::Horizon => StepOutcome::Healthy(r),
            End::Unhealthy => StepOutcome::Unhealthy(r),
            End::Blowup | End::DeadOnArrival => StepOutcome::Blowup,
        }
    }
}

impl Scripted {
    pub fn new(rows: Vec<(Vec<f64>, End)>, horizon: usize) -> Self {
        Scripted {
            rows,
            horizon,
            current: 0,
            step: usize::MAX,
        }
    }
}

/// A random reward matrix with mixed endings and its expected per-rollout
/// means.
pub struct FitnessCase {
    pub env: Scripted,
    pub expected: Vec<f64>,
}

impl FitnessCase {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let horizon = rng.random_range(1..60);
        let n = rng.random_range(1..12);
        let mut rows = Vec::new();
        let mut expected = Vec::new();
        for _ in 0..n {
            let end = match rng.random_range(0..4) {
                0 => End::Horizon,
                1 => End::Unhealthy,
                2 => End::Blowup,
                _ => End::DeadOnArrival,
            };
            let len = match end {
                End::Horizon => horizon,
                End::DeadOnArrival => 1,
                _ => rng.random_range(1..=horizon),
            };
            let row: Vec<f64> = (0..len).map(|_| rng.random_range(-3.0..3.0)).collect();
            // The blowup step earns nothing and does not count toward T_i.
            let counted = match end {
                End::Blowup => &row[..len - 1],
                End::DeadOnArrival => &row[..0],
                _ => &row[..],
            };
            expected.push(if counted.is_empty() {
                0.0
            } else {
                counted.iter().sum::<f64>() / counted.len() as f64
            });
            rows.push((row, end));
        }
        FitnessCase {
            env: Scripted::new(rows, horizon),
            expected,
        }
    }

    /// Relative error of the reported fitness against the double average.
    pub fn check(mut self) -> Result<f64, String> {
        let n = self.expected.len();
        let report = evaluate_with(&mut self.env, &GaitPolicy::zero(0), n, 1);
        let oracle = self.expected.iter().sum::<f64>() / n as f64;
        let err = (report.fitness - oracle).abs() / oracle.abs().max(1e-300);
        if err > 1e-12 && (report.fitness - oracle).abs() >= 1e-15 {
            return Err(format!("fitness {} vs {oracle}", report.fitness));
        }
        for (got, want) in report.rollout_means.iter().zip(&self.expected) {
            if (got - want).abs() > 1e-12 * want.abs().max(1.0) {
                return Err(format!("rollout mean {got} vs {want}"));
            }
        }
        Ok(if (report.fitness - oracle).abs() < 1e-15 { 0.0 } else { err })
    }
}

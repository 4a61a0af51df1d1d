//! Reduced-coordinate dynamics of a planar tree.
//!
//! Generalized coordinates are `[x, z, pitch, hinge...]`. Each step
//! integrates with semi-implicit Euler, then resolves speculative contacts,
//! Coulomb friction and joint limits as velocity-level constraints with
//! projected Gauss-Seidel. A final energy guard keeps the step from creating
//! more energy than the actuators put in.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::planar::PlanarModel;
use super::terrain::{Terrain, TerrainKind};
use crate::compiler::TORQUE_MAX;

pub const GRAVITY: f64 = 9.81;
/// Contacts are considered once a circle comes this close to the terrain.
const CONTACT_MARGIN: f64 = 0.01;
/// Fraction of existing penetration removed per step.
const PENETRATION_RECOVERY: f64 = 0.2;
const LIMIT_MARGIN: f64 = 0.1;
/// A circle this close to a beam counts as touching it.
const CEILING_TOUCH: f64 = 1e-4;
const BLOWUP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: usize,
    pub z_range: (f64, f64),
    pub solver_iterations: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.002,
            horizon: 5000,
            z_range: (0.03, 2.0),
            solver_iterations: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub time: f64,
    /// Set when any geom touched an overhead beam during the last step.
    pub ceiling_contact: bool,
}

impl SimState {
    pub fn root_x(&self) -> f64 {
        self.q[0]
    }

    pub fn root_z(&self) -> f64 {
        self.q[1]
    }

    pub fn pitch(&self) -> f64 {
        self.q[2]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("numerical blowup at t = {time:.3} s")]
    NumericalBlowup { time: f64 },
    #[error("expected {expected} torques, got {found}")]
    TorqueCount { expected: usize, found: usize },
}

/// Diagnostics of the most recent step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats {
    pub contacts: usize,
    /// Largest `|f_t| - mu * f_n` over all contacts; never positive.
    pub friction_excess: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    /// Work done by the actuators.
    pub work: f64,
    pub energy_clamped: bool,
    /// Deepest terrain penetration after the step, meters.
    pub penetration: f64,
}

/// World pose of one cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pose {
    pub x: f64,
    pub z: f64,
    pub pitch: f64,
}

#[derive(Debug, Clone, Default)]
struct Kinematics {
    phi: Vec<f64>,
    origin: Vec<[f64; 2]>,
    anchor: Vec<[f64; 2]>,
    anchor_vel: Vec<[f64; 2]>,
    omega: Vec<f64>,
    com: Vec<[f64; 2]>,
    com_vel: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy)]
enum RowKind {
    /// `J v >= target`, impulse >= 0.
    Unilateral { target: f64 },
    /// Impulse bounded by mu times that of the normal row.
    Friction { normal: usize, mu: f64 },
}

#[inline]
fn rot(phi_c: f64, phi_s: f64, r: [f64; 2]) -> [f64; 2] {
    [phi_c * r[0] + phi_s * r[1], -phi_s * r[0] + phi_c * r[1]]
}

/// Velocity of a point at offset `r` on a body spinning at unit rate about y.
#[inline]
fn perp(r: [f64; 2]) -> [f64; 2] {
    [r[1], -r[0]]
}

#[inline]
fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub struct Simulator {
    model: PlanarModel,
    terrain: Terrain,
    config: SimConfig,
    n: usize,
    /// Rotational coordinates from the root to each cluster, pitch first.
    chains: Vec<Vec<usize>>,
    /// Cluster whose anchor is the pivot of each rotational coordinate.
    pivot_owner: Vec<usize>,
    kin: Kinematics,
    mass: Vec<f64>,
    chol: Vec<f64>,
    /// `q` for which `mass`/`chol` are current.
    cached_q: Option<Vec<f64>>,
    force: Vec<f64>,
    rows_j: Vec<f64>,
    rows_minv: Vec<f64>,
    rows_w: Vec<f64>,
    rows_kind: Vec<RowKind>,
    lambda: Vec<f64>,
    contacts_buf: Vec<super::terrain::TerrainContact>,
    stats: StepStats,
}

impl Simulator {
    pub fn new(model: PlanarModel, terrain: Terrain, config: SimConfig) -> Self {
        let n = model.ndof();
        let m = model.clusters.len();
        let mut chains: Vec<Vec<usize>> = Vec::with_capacity(m);
        let mut pivot_owner = vec![0; n];
        for (c, cluster) in model.clusters.iter().enumerate() {
            let chain = match (cluster.parent, cluster.dof) {
                (Some(p), Some(d)) => {
                    pivot_owner[3 + d] = c;
                    let mut ch = chains[p].clone();
                    ch.push(3 + d);
                    ch
                }
                _ => vec![2],
            };
            chains.push(chain);
        }
        Simulator {
            n,
            chains,
            pivot_owner,
            kin: Kinematics {
                phi: vec![0.0; m],
                origin: vec![[0.0; 2]; m],
                anchor: vec![[0.0; 2]; m],
                anchor_vel: vec![[0.0; 2]; m],
                omega: vec![0.0; m],
                com: vec![[0.0; 2]; m],
                com_vel: vec![[0.0; 2]; m],
            },
            mass: vec![0.0; n * n],
            chol: vec![0.0; n * n],
            cached_q: None,
            force: vec![0.0; n],
            rows_j: Vec::new(),
            rows_minv: Vec::new(),
            rows_w: Vec::new(),
            rows_kind: Vec::new(),
            lambda: Vec::new(),
            contacts_buf: Vec::new(),
            stats: StepStats::default(),
            model,
            terrain,
            config,
        }
    }

    pub fn model(&self) -> &PlanarModel {
        &self.model
    }

    pub fn terrain(&self) -> &Terrain {
        &self.terrain
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn last_stats(&self) -> &StepStats {
        &self.stats
    }

    /// Zero pose at the spawn height, at rest.
    pub fn spawn_state(&self) -> SimState {
        let mut q = vec![0.0; self.n];
        q[1] = self.model.spawn_z;
        SimState {
            q,
            v: vec![0.0; self.n],
            time: 0.0,
            ceiling_contact: false,
        }
    }

    /// Recomputes `ceiling_contact` for a state that was not produced by
    /// `step`, such as a freshly spawned one.
    pub fn refresh_contact(&mut self, state: &mut SimState) {
        self.prepare(state);
        state.ceiling_contact = self.touch_scan().1;
    }

    /// Deepest penetration and beam contact at the prepared pose.
    fn touch_scan(&mut self) -> (f64, bool) {
        let mut penetration: f64 = 0.0;
        let mut ceiling = false;
        let check_ceiling = self.terrain.kind == TerrainKind::Beams;
        let mut contacts = std::mem::take(&mut self.contacts_buf);
        for c in 0..self.model.clusters.len() {
            let (cc, cs) = (self.kin.phi[c].cos(), self.kin.phi[c].sin());
            for circle in &self.model.clusters[c].circles {
                let r = rot(cc, cs, circle.center);
                let center = [self.kin.origin[c][0] + r[0], self.kin.origin[c][1] + r[1]];
                contacts.clear();
                self.terrain.query(center, circle.radius, CEILING_TOUCH, !circle.interior, &mut contacts);
                for contact in &contacts {
                    penetration = penetration.max(-contact.gap);
                    if check_ceiling && contact.ceiling {
                        ceiling = true;
                    }
                }
            }
        }
        self.contacts_buf = contacts;
        (penetration, ceiling)
    }

    /// Clamps hinge coordinates into their ranges.
    pub fn clamp_to_limits(&self, state: &mut SimState) {
        for (k, dof) in self.model.dofs.iter().enumerate() {
            if let Some([lo, hi]) = dof.range {
                let i = 3 + k;
                if state.q[i] < lo {
                    state.q[i] = lo;
                    state.v[i] = state.v[i].max(0.0);
                } else if state.q[i] > hi {
                    state.q[i] = hi;
                    state.v[i] = state.v[i].min(0.0);
                }
            }
        }
    }

    fn kinematics(&mut self, q: &[f64], v: &[f64]) {
        let k = &mut self.kin;
        for (c, cl) in self.model.clusters.iter().enumerate() {
            match (cl.parent, cl.dof) {
                (Some(p), Some(d)) => {
                    let (pc, ps) = (k.phi[p].cos(), k.phi[p].sin());
                    let local = [cl.pos[0] + cl.anchor[0], cl.pos[1] + cl.anchor[1]];
                    let r = rot(pc, ps, local);
                    let anchor = [k.origin[p][0] + r[0], k.origin[p][1] + r[1]];
                    let w = perp(sub(anchor, k.anchor[p]));
                    k.anchor_vel[c] = [
                        k.anchor_vel[p][0] + k.omega[p] * w[0],
                        k.anchor_vel[p][1] + k.omega[p] * w[1],
                    ];
                    k.anchor[c] = anchor;
                    k.phi[c] = k.phi[p] + q[3 + d];
                    k.omega[c] = k.omega[p] + v[3 + d];
                    let (cc, cs) = (k.phi[c].cos(), k.phi[c].sin());
                    let a = rot(cc, cs, cl.anchor);
                    k.origin[c] = [anchor[0] - a[0], anchor[1] - a[1]];
                }
                _ => {
                    k.phi[c] = q[2];
                    k.omega[c] = v[2];
                    k.origin[c] = [q[0], q[1]];
                    k.anchor[c] = k.origin[c];
                    k.anchor_vel[c] = [v[0], v[1]];
                }
            }
            let (cc, cs) = (k.phi[c].cos(), k.phi[c].sin());
            let r = rot(cc, cs, cl.com);
            k.com[c] = [k.origin[c][0] + r[0], k.origin[c][1] + r[1]];
            let w = perp(sub(k.com[c], k.anchor[c]));
            k.com_vel[c] = [
                k.anchor_vel[c][0] + k.omega[c] * w[0],
                k.anchor_vel[c][1] + k.omega[c] * w[1],
            ];
        }
    }

    /// Jacobian column of coordinate `i` for a world point on cluster `c`.
    /// Only valid for `i` in {0, 1} or in `chains[c]`.
    #[inline]
    fn column(&self, i: usize, point: [f64; 2]) -> [f64; 2] {
        match i {
            0 => [1.0, 0.0],
            1 => [0.0, 1.0],
            _ => perp(sub(point, self.kin.anchor[self.pivot_owner[i]])),
        }
    }

    fn assemble_mass(&mut self) {
        let n = self.n;
        self.mass.iter_mut().for_each(|m| *m = 0.0);
        for (c, cl) in self.model.clusters.iter().enumerate() {
            let com = self.kin.com[c];
            let chain = &self.chains[c];
            let count = 2 + chain.len();
            let coord = |a: usize| if a < 2 { a } else { chain[a - 2] };
            for a in 0..count {
                let ia = coord(a);
                let ja = self.column(ia, com);
                for b in a..count {
                    let ib = coord(b);
                    let jb = self.column(ib, com);
                    let mut val = cl.mass * dot(ja, jb);
                    if a >= 2 && b >= 2 {
                        val += cl.inertia;
                    }
                    self.mass[ia * n + ib] += val;
                    if ia != ib {
                        self.mass[ib * n + ia] += val;
                    }
                }
            }
        }
    }

    fn factor(&mut self) {
        let n = self.n;
        let (m, l) = (&self.mass, &mut self.chol);
        for j in 0..n {
            let mut d = m[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            let d = d.max(1e-12).sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = m[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
    }

    fn solve(chol: &[f64], n: usize, x: &mut [f64]) {
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= chol[i * n + k] * x[k];
            }
            x[i] = s / chol[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= chol[k * n + i] * x[k];
            }
            x[i] = s / chol[i * n + i];
        }
    }

    /// Kinematics, mass matrix and its factor at `state`, reusing the factor
    /// when `q` is unchanged.
    fn prepare(&mut self, state: &SimState) {
        self.kinematics(&state.q, &state.v);
        if self.cached_q.as_deref() != Some(&state.q[..]) {
            self.assemble_mass();
            self.factor();
            self.cached_q = Some(state.q.clone());
        }
    }

    fn energy_prepared(&self, v: &[f64]) -> (f64, f64) {
        let n = self.n;
        let mut ke = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.mass[i * n + j] * v[j];
            }
            ke += v[i] * row;
        }
        let pe: f64 = self
            .model
            .clusters
            .iter()
            .zip(&self.kin.com)
            .map(|(c, p)| c.mass * GRAVITY * p[1])
            .sum();
        (0.5 * ke, pe)
    }

    /// Total mechanical energy (kinetic plus gravitational), joules.
    pub fn energy(&mut self, state: &SimState) -> f64 {
        self.prepare(state);
        let (ke, pe) = self.energy_prepared(&state.v);
        ke + pe
    }

    /// Linear momentum (x, z) and angular momentum about the center of mass.
    pub fn momentum(&mut self, state: &SimState) -> ([f64; 2], f64) {
        self.kinematics(&state.q, &state.v);
        let k = &self.kin;
        let total: f64 = self.model.total_mass();
        let mut p = [0.0; 2];
        let mut g = [0.0; 2];
        for (c, cl) in self.model.clusters.iter().enumerate() {
            p[0] += cl.mass * k.com_vel[c][0];
            p[1] += cl.mass * k.com_vel[c][1];
            g[0] += cl.mass * k.com[c][0] / total;
            g[1] += cl.mass * k.com[c][1] / total;
        }
        let l = self
            .model
            .clusters
            .iter()
            .enumerate()
            .map(|(c, cl)| {
                let r = sub(k.com[c], g);
                cl.inertia * k.omega[c] + cl.mass * (r[1] * k.com_vel[c][0] - r[0] * k.com_vel[c][1])
            })
            .sum();
        (p, l)
    }

    /// World poses of all clusters.
    pub fn poses(&mut self, state: &SimState) -> Vec<Pose> {
        self.kinematics(&state.q, &state.v);
        self.kin
            .origin
            .iter()
            .zip(&self.kin.phi)
            .map(|(o, &phi)| Pose {
                x: o[0],
                z: o[1],
                pitch: phi,
            })
            .collect()
    }

    /// World centers and radii of every contact circle.
    pub fn circles(&mut self, state: &SimState) -> Vec<([f64; 2], f64)> {
        self.kinematics(&state.q, &state.v);
        let mut out = Vec::new();
        for (c, cl) in self.model.clusters.iter().enumerate() {
            let (cc, cs) = (self.kin.phi[c].cos(), self.kin.phi[c].sin());
            for circle in &cl.circles {
                let r = rot(cc, cs, circle.center);
                out.push(([self.kin.origin[c][0] + r[0], self.kin.origin[c][1] + r[1]], circle.radius));
            }
        }
        out
    }

    fn push_row(&mut self, j: &[f64], kind: RowKind) -> usize {
        let n = self.n;
        self.rows_j.extend_from_slice(j);
        let start = self.rows_minv.len();
        self.rows_minv.extend_from_slice(j);
        Self::solve(&self.chol, n, &mut self.rows_minv[start..start + n]);
        let w: f64 = j.iter().zip(&self.rows_minv[start..]).map(|(a, b)| a * b).sum();
        self.rows_w.push(w.max(1e-12));
        self.rows_kind.push(kind);
        self.lambda.push(0.0);
        self.rows_kind.len() - 1
    }

    /// Rows for contacts and limits that could engage during this step,
    /// judged from the unconstrained velocity `v`.
    fn build_rows(&mut self, q: &[f64], v: &[f64]) {
        let n = self.n;
        let dt = self.config.dt;
        self.rows_j.clear();
        self.rows_minv.clear();
        self.rows_w.clear();
        self.rows_kind.clear();
        self.lambda.clear();
        let mu = self.terrain.friction_mu;
        let mut jn = vec![0.0; n];
        let mut jt = vec![0.0; n];
        let mut contacts = std::mem::take(&mut self.contacts_buf);
        for c in 0..self.model.clusters.len() {
            let (cc, cs) = (self.kin.phi[c].cos(), self.kin.phi[c].sin());
            for ci in 0..self.model.clusters[c].circles.len() {
                let circle = self.model.clusters[c].circles[ci];
                let r = rot(cc, cs, circle.center);
                let center = [self.kin.origin[c][0] + r[0], self.kin.origin[c][1] + r[1]];
                let w = perp(sub(center, self.kin.anchor[c]));
                let speed = (self.kin.anchor_vel[c][0] + self.kin.omega[c] * w[0])
                    .hypot(self.kin.anchor_vel[c][1] + self.kin.omega[c] * w[1]);
                let margin = CONTACT_MARGIN + 2.0 * speed * dt;
                contacts.clear();
                self.terrain
                    .query(center, circle.radius, margin, !circle.interior, &mut contacts);
                for contact in &contacts {
                    let nrm = contact.normal;
                    let tan = [nrm[1], -nrm[0]];
                    let point = [center[0] - circle.radius * nrm[0], center[1] - circle.radius * nrm[1]];
                    jn.iter_mut().for_each(|x| *x = 0.0);
                    jt.iter_mut().for_each(|x| *x = 0.0);
                    for i in [0, 1].into_iter().chain(self.chains[c].iter().copied()) {
                        let col = self.column(i, point);
                        jn[i] = dot(nrm, col);
                        jt[i] = dot(tan, col);
                    }
                    let target = if contact.gap >= 0.0 {
                        -contact.gap / dt
                    } else {
                        -contact.gap * PENETRATION_RECOVERY / dt
                    };
                    let normal = self.push_row(&jn, RowKind::Unilateral { target });
                    self.push_row(&jt, RowKind::Friction { normal, mu });
                }
            }
        }
        self.contacts_buf = contacts;
        self.stats.contacts = self.rows_kind.len() / 2;

        for k in 0..self.model.dofs.len() {
            let Some([lo, hi]) = self.model.dofs[k].range else {
                continue;
            };
            let i = 3 + k;
            let reach = LIMIT_MARGIN + 2.0 * v[i].abs() * dt;
            if q[i] - lo < reach {
                jn.iter_mut().for_each(|x| *x = 0.0);
                jn[i] = 1.0;
                self.push_row(&jn, RowKind::Unilateral { target: -(q[i] - lo) / dt });
            }
            if hi - q[i] < reach {
                jn.iter_mut().for_each(|x| *x = 0.0);
                jn[i] = -1.0;
                self.push_row(&jn, RowKind::Unilateral { target: -(hi - q[i]) / dt });
            }
        }
    }

    fn apply_impulse(&mut self, row: usize, delta: f64, v: &mut [f64]) {
        let n = self.n;
        let minv = &self.rows_minv[row * n..(row + 1) * n];
        for (vi, m) in v.iter_mut().zip(minv) {
            *vi += delta * m;
        }
    }

    fn row_velocity(&self, row: usize, v: &[f64]) -> f64 {
        let n = self.n;
        self.rows_j[row * n..(row + 1) * n]
            .iter()
            .zip(v)
            .map(|(a, b)| a * b)
            .sum()
    }

    fn solve_rows(&mut self, v: &mut [f64]) {
        let rows = self.rows_kind.len();
        for _ in 0..self.config.solver_iterations {
            for r in 0..rows {
                let vel = self.row_velocity(r, v);
                let old = self.lambda[r];
                let new = match self.rows_kind[r] {
                    RowKind::Unilateral { target } => (old + (target - vel) / self.rows_w[r]).max(0.0),
                    RowKind::Friction { normal, mu } => {
                        let bound = mu * self.lambda[normal];
                        (old - vel / self.rows_w[r]).clamp(-bound, bound)
                    }
                };
                if new != old {
                    self.lambda[r] = new;
                    self.apply_impulse(r, new - old, v);
                }
            }
        }
        // Normal impulses may have shrunk after their friction rows were
        // visited; project friction back into the cone.
        let mut excess = f64::NEG_INFINITY;
        for r in 0..rows {
            if let RowKind::Friction { normal, mu } = self.rows_kind[r] {
                let bound = mu * self.lambda[normal];
                let old = self.lambda[r];
                let new = old.clamp(-bound, bound);
                if new != old {
                    self.lambda[r] = new;
                    self.apply_impulse(r, new - old, v);
                }
                excess = excess.max(new.abs() - bound);
            }
        }
        self.stats.friction_excess = if excess.is_finite() { excess } else { 0.0 };
    }

    /// Advances one step of `config.dt`. `torques` holds one control per
    /// actuator of the source model, clipped to `TORQUE_MAX`.
    pub fn step(&mut self, state: &mut SimState, torques: &[f64]) -> Result<(), SimError> {
        if torques.len() != self.model.actuator_dofs.len() {
            return Err(SimError::TorqueCount {
                expected: self.model.actuator_dofs.len(),
                found: torques.len(),
            });
        }
        let n = self.n;
        let dt = self.config.dt;
        self.prepare(state);
        let (ke0, pe0) = self.energy_prepared(&state.v);

        // Generalized forces: actuators, gravity, velocity-product terms.
        let mut tau = vec![0.0; n];
        for (&dof, &t) in self.model.actuator_dofs.iter().zip(torques) {
            if let Some(d) = dof {
                tau[3 + d] += t.clamp(-TORQUE_MAX, TORQUE_MAX);
            }
        }
        self.force.copy_from_slice(&tau);
        for (c, cl) in self.model.clusters.iter().enumerate() {
            let com = self.kin.com[c];
            let cv = self.kin.com_vel[c];
            let mut bias = [0.0; 2];
            for &i in &self.chains[c] {
                let pv = self.kin.anchor_vel[self.pivot_owner[i]];
                let w = perp(sub(cv, pv));
                bias[0] += state.v[i] * w[0];
                bias[1] += state.v[i] * w[1];
            }
            let g = [-cl.mass * bias[0], -cl.mass * (GRAVITY + bias[1])];
            self.force[0] += g[0];
            self.force[1] += g[1];
            for &i in &self.chains[c] {
                self.force[i] += dot(self.column(i, com), g);
            }
        }
        let mut acc = self.force.clone();
        Self::solve(&self.chol, n, &mut acc);
        let mut v: Vec<f64> = state.v.iter().zip(&acc).map(|(v, a)| v + dt * a).collect();

        self.kinematics(&state.q, &v);
        self.build_rows(&state.q, &v);
        self.solve_rows(&mut v);

        let q_before = state.q.clone();
        let mut next = SimState {
            q: state.q.iter().zip(&v).map(|(q, v)| q + dt * v).collect(),
            v,
            time: state.time + dt,
            ceiling_contact: false,
        };
        for (k, dof) in self.model.dofs.iter().enumerate() {
            if let Some([lo, hi]) = dof.range {
                next.q[3 + k] = next.q[3 + k].clamp(lo, hi);
            }
        }

        let mut work: f64 = tau
            .iter()
            .zip(next.q.iter().zip(&q_before))
            .map(|(t, (a, b))| t * (a - b))
            .sum();
        self.prepare(&next);
        let (mut ke1, pe1) = self.energy_prepared(&next.v);
        let budget = ke0 + pe0 + work;
        let mut clamped = false;
        if ke1 + pe1 > budget {
            clamped = true;
            let room = budget - pe1;
            if room > 0.0 && ke1 > 0.0 {
                let scale = (room / ke1).sqrt() * (1.0 - 1e-12);
                next.v.iter_mut().for_each(|x| *x *= scale);
                ke1 *= scale * scale;
            } else {
                // Nothing moves, so the actuators did no work either.
                next.q = q_before;
                next.v.iter_mut().for_each(|x| *x = 0.0);
                ke1 = 0.0;
                work = 0.0;
            }
            self.prepare(&next);
        }
        let pe1 = if clamped { self.energy_prepared(&next.v).1 } else { pe1 };

        if next.q.iter().chain(&next.v).any(|x| !x.is_finite() || x.abs() > BLOWUP) {
            return Err(SimError::NumericalBlowup { time: next.time });
        }

        let (penetration, ceiling) = self.touch_scan();
        next.ceiling_contact = ceiling;

        self.stats.energy_before = ke0 + pe0;
        self.stats.energy_after = ke1 + pe1;
        self.stats.work = work;
        self.stats.energy_clamped = clamped;
        self.stats.penetration = penetration;
        *state = next;
        Ok(())
    }
}

/// Healthy while the root height is in range and no beam is touched.
pub fn is_healthy(state: &SimState, z_range: (f64, f64)) -> bool {
    let z = state.root_z();
    z >= z_range.0 && z <= z_range.1 && !state.ceiling_contact
}

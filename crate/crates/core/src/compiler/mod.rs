//! Lowering of validated designs to an articulated-body IR and MJCF XML.
//!
//! All bodies share the world orientation at the zero pose, so a body's
//! placement is just the sum of offsets along its ancestor chain. Torso
//! segments run along +x; limbs hang along -z from their mounts.

mod mjcf;

pub use mjcf::{emit_mjcf, format_g};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::components::{
    BodyJoint, Component, DesignRecord, DesignTextError, EndKind, LimbJoint, RecordError,
    BODY_LENGTH,
};
use crate::grammar::{DesignGraph, NodeAddress, Symbol};

pub const TORSO_RADIUS: f64 = 0.03;
pub const LIMB_RADIUS: f64 = 0.02;
pub const WHEEL_RADIUS: f64 = 0.04;
pub const WHEEL_WIDTH: f64 = 0.02;
pub const CAP_RADIUS: f64 = 0.02;
/// kg/m³, shared by every geom.
pub const DENSITY: f64 = 1000.0;
/// Lateral distance of branch mounts from the torso axis.
pub const MOUNT_OFFSET: f64 = 0.05;
/// Gap between the lowest geom and the floor at spawn.
pub const SPAWN_CLEARANCE: f64 = 0.01;
/// Motor gear; a control of 1 maps to this torque in N·m.
pub const TORQUE_MAX: f64 = 2.0;

/// Distance from a segment's center to a head or tail appendage mount.
const END_MOUNT_OFFSET: f64 = BODY_LENGTH / 2.0 + MOUNT_OFFSET;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Geom {
    Capsule { radius: f64, from: Vec3, to: Vec3 },
    Sphere { radius: f64, center: Vec3 },
    /// `axis` is a unit vector; `half_width` is half the cylinder length.
    Cylinder {
        radius: f64,
        half_width: f64,
        center: Vec3,
        axis: Vec3,
    },
}

impl Geom {
    pub fn volume(&self) -> f64 {
        match *self {
            Geom::Capsule { radius, from, to } => {
                PI * radius * radius * dist(from, to) + 4.0 / 3.0 * PI * radius.powi(3)
            }
            Geom::Sphere { radius, .. } => 4.0 / 3.0 * PI * radius.powi(3),
            Geom::Cylinder {
                radius, half_width, ..
            } => PI * radius * radius * 2.0 * half_width,
        }
    }

    /// Center of mass in the body frame.
    pub fn center(&self) -> Vec3 {
        match *self {
            Geom::Capsule { from, to, .. } => [
                (from[0] + to[0]) / 2.0,
                (from[1] + to[1]) / 2.0,
                (from[2] + to[2]) / 2.0,
            ],
            Geom::Sphere { center, .. } | Geom::Cylinder { center, .. } => center,
        }
    }

    /// Moment of inertia about the y axis through the center of mass.
    pub fn inertia_y(&self, mass: f64) -> f64 {
        match *self {
            Geom::Capsule { radius: r, from, to } => {
                let len = dist(from, to);
                let vol = self.volume();
                let m_cyl = mass * PI * r * r * len / vol;
                let m_caps = mass - m_cyl;
                let axial = m_cyl * r * r / 2.0 + m_caps * 2.0 * r * r / 5.0;
                let transverse = m_cyl * (len * len / 12.0 + r * r / 4.0)
                    + m_caps * (2.0 * r * r / 5.0 + len * len / 4.0 + 3.0 * len * r / 8.0);
                let dy = if len > 0.0 { (to[1] - from[1]) / len } else { 0.0 };
                axial * dy * dy + transverse * (1.0 - dy * dy)
            }
            Geom::Sphere { radius, .. } => 0.4 * mass * radius * radius,
            Geom::Cylinder {
                radius,
                half_width,
                axis,
                ..
            } => {
                let axial = mass * radius * radius / 2.0;
                let w = 2.0 * half_width;
                let transverse = mass * (3.0 * radius * radius + w * w) / 12.0;
                axial * axis[1] * axis[1] + transverse * (1.0 - axis[1] * axis[1])
            }
        }
    }

    /// Lowest and highest z reached by the geom, in the body frame.
    pub fn z_extent(&self) -> (f64, f64) {
        match *self {
            Geom::Capsule { radius, from, to } => (
                from[2].min(to[2]) - radius,
                from[2].max(to[2]) + radius,
            ),
            Geom::Sphere { radius, center } => (center[2] - radius, center[2] + radius),
            Geom::Cylinder {
                radius,
                half_width,
                center,
                axis,
            } => {
                let h = radius * (1.0 - axis[2] * axis[2]).max(0.0).sqrt() + half_width * axis[2].abs();
                (center[2] - h, center[2] + h)
            }
        }
    }
}

fn dist(a: Vec3, b: Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub name: String,
    /// Index into `RobotModel::bodies`; parents always precede children.
    pub parent: Option<usize>,
    /// Offset of the body frame in its parent frame (world frame for the root).
    pub pos: Vec3,
    pub geom: Geom,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JointKind {
    Hinge,
    /// Unlimited, unactuated spin.
    FreeWheel,
    /// Welded; emitted as no joint at all.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    /// The child body the joint moves.
    pub body: usize,
    pub kind: JointKind,
    pub axis: Vec3,
    /// Anchor in the child body frame.
    pub pos: Vec3,
    /// Radians; `None` means unlimited.
    pub range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actuator {
    pub name: String,
    pub joint: usize,
    pub gear: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    /// Canonical graph string of the source design.
    pub name: String,
    pub bodies: Vec<Body>,
    pub joints: Vec<Joint>,
    pub actuators: Vec<Actuator>,
    pub collisions_enabled: bool,
}

impl RobotModel {
    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum()
    }

    /// The joint connecting `body` to its parent, if any.
    pub fn joint_of(&self, body: usize) -> Option<&Joint> {
        self.joints.iter().find(|j| j.body == body)
    }

    pub fn children(&self, body: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.bodies.len()).filter(move |&i| self.bodies[i].parent == Some(body))
    }

    /// World position of each body frame at the zero pose.
    pub fn world_positions(&self) -> Vec<Vec3> {
        let mut out: Vec<Vec3> = Vec::with_capacity(self.bodies.len());
        for b in &self.bodies {
            let base = b.parent.map(|p| out[p]).unwrap_or([0.0; 3]);
            out.push([base[0] + b.pos[0], base[1] + b.pos[1], base[2] + b.pos[2]]);
        }
        out
    }

    /// Lowest and highest world z over all geoms at the zero pose.
    pub fn z_extent(&self) -> (f64, f64) {
        let world = self.world_positions();
        self.bodies
            .iter()
            .zip(&world)
            .map(|(b, w)| {
                let (lo, hi) = b.geom.z_extent();
                (lo + w[2], hi + w[2])
            })
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                (lo.min(a), hi.max(b))
            })
    }

    /// Vertical extent of the robot as spawned, floor clearance excluded.
    pub fn standing_height(&self) -> f64 {
        let (lo, hi) = self.z_extent();
        hi - lo
    }

    pub fn actuated_joints(&self) -> impl Iterator<Item = &Joint> {
        self.actuators.iter().map(|a| &self.joints[a.joint])
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("invalid design: {0}")]
    Invalid(#[from] RecordError),
    #[error("design has no body segment")]
    EmptyDesign,
}

/// Lowers a record. Body and joint names derive from node addresses, so the
/// same design always yields the same names.
pub fn compile(record: &DesignRecord, collisions: bool) -> Result<RobotModel, CompileError> {
    let graph = record.validate()?;
    Lowering::new(record, collisions).run(&graph)
}

struct Lowering<'a> {
    record: &'a DesignRecord,
    model: RobotModel,
    branch_count: usize,
}

struct LimbPlan {
    pairs: Vec<(NodeAddress, NodeAddress)>,
    end: NodeAddress,
}

impl<'a> Lowering<'a> {
    fn new(record: &'a DesignRecord, collisions: bool) -> Self {
        Lowering {
            record,
            model: RobotModel {
                name: String::new(),
                bodies: Vec::new(),
                joints: Vec::new(),
                actuators: Vec::new(),
                collisions_enabled: collisions,
            },
            branch_count: 0,
        }
    }

    fn component(&self, addr: &NodeAddress) -> Component {
        *self
            .record
            .components
            .get(addr)
            .expect("validated record covers every node")
    }

    fn run(mut self, graph: &DesignGraph) -> Result<RobotModel, CompileError> {
        self.model.name = graph.canonical();
        let spine = graph.spine();
        let units: Vec<usize> = (0..spine.len()).filter(|&i| spine[i].symbol == Symbol::U).collect();
        let (&first, &last) = match (units.first(), units.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(CompileError::EmptyDesign),
        };

        let mut segment_bodies = Vec::new();
        for (k, &i) in units.iter().enumerate() {
            let addr = NodeAddress::spine(i);
            let half = BODY_LENGTH / 2.0;
            let geom = Geom::Capsule {
                radius: TORSO_RADIUS,
                from: [-half, 0.0, 0.0],
                to: [half, 0.0, 0.0],
            };
            let (parent, pos) = match segment_bodies.last() {
                Some(&p) => (Some(p), [BODY_LENGTH, 0.0, 0.0]),
                None => (None, [0.0; 3]),
            };
            let body = self.add_body(format!("torso_{}", addr.key()), parent, pos, geom);
            if k > 0 {
                // The Y joint sits between the previous unit and this one.
                let y = NodeAddress::spine(i - 1);
                debug_assert_eq!(spine[i - 1].symbol, Symbol::Y);
                self.add_body_joint(&y, body, [-half, 0.0, 0.0]);
            }
            segment_bodies.push(body);

            for (b, branch) in spine[i].branches.iter().enumerate() {
                let plan = plan_chain(branch, |idx| addr.child(b, idx), false);
                let side = if self.branch_count.is_multiple_of(2) { -1.0 } else { 1.0 };
                self.branch_count += 1;
                self.build_limb(body, [0.0, side * MOUNT_OFFSET, 0.0], plan);
            }
        }

        if first > 0 {
            let head = DesignGraph::from_spine(spine[..first].to_vec()).expect("non-empty prefix");
            if head.spine()[0].symbol != Symbol::H {
                let plan = plan_chain(&head, NodeAddress::spine, true);
                self.build_limb(segment_bodies[0], [-END_MOUNT_OFFSET, 0.0, 0.0], plan);
            }
        }
        if last + 1 < spine.len() && spine[last + 1].symbol != Symbol::T {
            let tail = DesignGraph::from_spine(spine[last + 1..].to_vec()).expect("non-empty suffix");
            let plan = plan_chain(&tail, |idx| NodeAddress::spine(last + 1 + idx), false);
            let seg = *segment_bodies.last().expect("at least one unit");
            self.build_limb(seg, [END_MOUNT_OFFSET, 0.0, 0.0], plan);
        }

        let (lo, _) = self.model.z_extent();
        self.model.bodies[0].pos[2] = SPAWN_CLEARANCE - lo;
        Ok(self.model)
    }

    fn add_body(&mut self, name: String, parent: Option<usize>, pos: Vec3, geom: Geom) -> usize {
        self.model.bodies.push(Body {
            name,
            parent,
            pos,
            mass: geom.volume() * DENSITY,
            geom,
        });
        self.model.bodies.len() - 1
    }

    fn add_joint(&mut self, joint: Joint) {
        let actuated = joint.kind == JointKind::Hinge;
        let name = joint.name.clone();
        self.model.joints.push(joint);
        if actuated {
            self.model.actuators.push(Actuator {
                name: name.replacen("joint", "motor", 1),
                joint: self.model.joints.len() - 1,
                gear: TORQUE_MAX,
            });
        }
    }

    fn add_body_joint(&mut self, y: &NodeAddress, body: usize, pos: Vec3) {
        let Component::BodyJoint(kind) = self.component(y) else {
            unreachable!("Y node carries a body joint");
        };
        let (kind, axis) = match kind {
            BodyJoint::Rigid => (JointKind::Fixed, [0.0, 1.0, 0.0]),
            BodyJoint::Roll => (JointKind::Hinge, [0.0, 1.0, 0.0]),
            BodyJoint::Twist => (JointKind::Hinge, [1.0, 0.0, 0.0]),
        };
        self.add_joint(Joint {
            name: format!("joint_{}", y.key()),
            body,
            kind,
            axis,
            pos,
            range: (kind == JointKind::Hinge).then_some([-PI, PI]),
        });
    }

    fn build_limb(&mut self, mount_body: usize, mount_pos: Vec3, plan: LimbPlan) {
        let mut parent = mount_body;
        let mut pos = mount_pos;
        for (j, l) in &plan.pairs {
            let Component::Limb(len) = self.component(l) else {
                unreachable!("L node carries a limb");
            };
            let geom = Geom::Capsule {
                radius: LIMB_RADIUS,
                from: [0.0; 3],
                to: [0.0, 0.0, -len],
            };
            let body = self.add_body(format!("limb_{}", l.key()), Some(parent), pos, geom);
            let Component::LimbJoint(kind) = self.component(j) else {
                unreachable!("J node carries a limb joint");
            };
            let (kind, axis, range) = match kind {
                LimbJoint::Rigid => (JointKind::Fixed, [0.0, 1.0, 0.0], None),
                LimbJoint::Roll => (JointKind::Hinge, [0.0, 0.0, 1.0], Some([-PI, PI])),
                LimbJoint::Knee(a) | LimbJoint::Elbow(a) => {
                    (JointKind::Hinge, [0.0, 1.0, 0.0], Some([0.0, a.to_radians()]))
                }
            };
            self.add_joint(Joint {
                name: format!("joint_{}", j.key()),
                body,
                kind,
                axis,
                pos: [0.0; 3],
                range,
            });
            parent = body;
            pos = [0.0, 0.0, -len];
        }
        let end_name = format!("end_{}", plan.end.key());
        match self.component(&plan.end) {
            Component::End(EndKind::Wheel) => {
                let geom = Geom::Cylinder {
                    radius: WHEEL_RADIUS,
                    half_width: WHEEL_WIDTH / 2.0,
                    center: [0.0; 3],
                    axis: [0.0, 1.0, 0.0],
                };
                let body = self.add_body(end_name, Some(parent), pos, geom);
                self.add_joint(Joint {
                    name: format!("spin_{}", plan.end.key()),
                    body,
                    kind: JointKind::FreeWheel,
                    axis: [0.0, 1.0, 0.0],
                    pos: [0.0; 3],
                    range: None,
                });
            }
            Component::End(EndKind::Null) => {
                let geom = Geom::Sphere {
                    radius: CAP_RADIUS,
                    center: [0.0; 3],
                };
                self.add_body(end_name, Some(parent), pos, geom);
            }
            other => unreachable!("E node carries an end, found {other:?}"),
        }
    }
}

/// Splits an appendage chain `C-M-(J-L)*-E` (or its head mirror
/// `(J-L)*-E-M-C`) into limb pairs ordered outward from the mount.
fn plan_chain(chain: &DesignGraph, addr: impl Fn(usize) -> NodeAddress, head: bool) -> LimbPlan {
    let spine = chain.spine();
    let mut pairs = Vec::new();
    let mut end = None;
    let mut i = 0;
    while i < spine.len() {
        match spine[i].symbol {
            Symbol::J => {
                debug_assert_eq!(spine[i + 1].symbol, Symbol::L);
                pairs.push((addr(i), addr(i + 1)));
                i += 2;
            }
            Symbol::E => {
                end = Some(addr(i));
                i += 1;
            }
            _ => i += 1,
        }
    }
    if head {
        pairs.reverse();
    }
    LimbPlan {
        pairs,
        end: end.expect("appendage chains end in E"),
    }
}

/// Which validation stage rejected a design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionStage {
    Parse,
    Derivation,
    Components,
    Compile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corruption {
    pub stage: CorruptionStage,
    pub message: String,
}

impl std::fmt::Display for Corruption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}: {}", self.stage, self.message)
    }
}

impl From<&DesignTextError> for Corruption {
    fn from(err: &DesignTextError) -> Self {
        let stage = match err {
            DesignTextError::Replay(_) | DesignTextError::SnapshotMismatch { .. } => {
                CorruptionStage::Derivation
            }
            DesignTextError::Component(_) => CorruptionStage::Components,
            DesignTextError::Format { .. } | DesignTextError::ComponentParse { .. } => {
                CorruptionStage::Parse
            }
        };
        Corruption {
            stage,
            message: err.to_string(),
        }
    }
}

/// `None` when the record replays, validates and compiles.
pub fn is_corrupted(record: &DesignRecord) -> Option<Corruption> {
    match compile(record, false) {
        Ok(_) => None,
        Err(CompileError::Invalid(RecordError::Derivation(e))) => Some(Corruption {
            stage: CorruptionStage::Derivation,
            message: e.to_string(),
        }),
        Err(CompileError::Invalid(RecordError::Component(e))) => Some(Corruption {
            stage: CorruptionStage::Components,
            message: e.to_string(),
        }),
        Err(e) => Some(Corruption {
            stage: CorruptionStage::Compile,
            message: e.to_string(),
        }),
    }
}

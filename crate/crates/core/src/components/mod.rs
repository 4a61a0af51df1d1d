//! Component assignment: concrete parts and parameters for every node of a
//! complete graph, plus the three-section design text format.

mod text;

pub use text::{emit_design_text, parse_design_text, DesignTextError};

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{validate_derivation, Derivation, DerivationError, DesignGraph, NodeAddress, Symbol};

/// Torso link length, meters.
pub const BODY_LENGTH: f64 = 0.15;
pub const LIMB_LENGTH_MIN: f64 = 0.10;
pub const LIMB_LENGTH_MAX: f64 = 0.15;
pub const KNEE_MAX_DEG: f64 = 60.0;
pub const ELBOW_MAX_DEG: f64 = 180.0;

/// Lengths are held on a 0.1 mm lattice and angles on a 0.1 degree lattice so
/// that the text format reproduces them exactly.
const LENGTH_STEPS_PER_METER: f64 = 10_000.0;
const ANGLE_STEPS_PER_DEGREE: f64 = 10.0;

pub fn quantize_length(meters: f64) -> f64 {
    (meters * LENGTH_STEPS_PER_METER).round() / LENGTH_STEPS_PER_METER
}

pub fn quantize_angle(degrees: f64) -> f64 {
    (degrees * ANGLE_STEPS_PER_DEGREE).round() / ANGLE_STEPS_PER_DEGREE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyJoint {
    Rigid,
    Roll,
    Twist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimbJoint {
    Rigid,
    Roll,
    /// Upper angle limit, degrees.
    Knee(f64),
    /// Upper angle limit, degrees.
    Elbow(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndKind {
    Wheel,
    Null,
}

/// A concrete part for one node. Values are not range-checked until the
/// assignment is validated against its graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    /// `H` and `T`.
    Null,
    /// `U`, length in meters.
    Body(f64),
    /// `L`, length in meters.
    Limb(f64),
    /// `Y`.
    BodyJoint(BodyJoint),
    /// `J`.
    LimbJoint(LimbJoint),
    Connector,
    Mount,
    /// `E`.
    End(EndKind),
}

impl Component {
    /// The symbol this component belongs to, or `None` for `Null`, which is
    /// shared by `H` and `T`.
    fn fits(&self, symbol: Symbol) -> bool {
        matches!(
            (self, symbol),
            (Component::Null, Symbol::H | Symbol::T)
                | (Component::Body(_), Symbol::U)
                | (Component::Limb(_), Symbol::L)
                | (Component::BodyJoint(_), Symbol::Y)
                | (Component::LimbJoint(_), Symbol::J)
                | (Component::Connector, Symbol::C)
                | (Component::Mount, Symbol::M)
                | (Component::End(_), Symbol::E)
        )
    }

    /// Range check for the parameterized parts.
    fn check_range(&self) -> Result<(), f64> {
        match *self {
            Component::Body(len) if len != BODY_LENGTH => Err(len),
            Component::Limb(len) if !(LIMB_LENGTH_MIN..=LIMB_LENGTH_MAX).contains(&len) => {
                Err(len)
            }
            Component::LimbJoint(LimbJoint::Knee(a)) if !(0.0..=KNEE_MAX_DEG).contains(&a) => {
                Err(a)
            }
            Component::LimbJoint(LimbJoint::Elbow(a)) if !(0.0..=ELBOW_MAX_DEG).contains(&a) => {
                Err(a)
            }
            _ => Ok(()),
        }
    }

    /// Whether the component carries a choice (used by samplers).
    pub fn is_parametric(symbol: Symbol) -> bool {
        matches!(symbol, Symbol::L | Symbol::Y | Symbol::J | Symbol::E)
    }

    /// Token used inside `[...]` in the component line.
    pub fn token(&self) -> String {
        match *self {
            Component::Null | Component::End(EndKind::Null) => "null".into(),
            Component::Body(len) => format!("body={}", format_cm(len)),
            Component::Limb(len) => format!("limb={}", format_cm(len)),
            Component::BodyJoint(BodyJoint::Rigid) | Component::LimbJoint(LimbJoint::Rigid) => {
                "rigid".into()
            }
            Component::BodyJoint(BodyJoint::Roll) | Component::LimbJoint(LimbJoint::Roll) => {
                "roll".into()
            }
            Component::BodyJoint(BodyJoint::Twist) => "twist".into(),
            Component::LimbJoint(LimbJoint::Knee(a)) => format!("knee={}deg", format_deg(a)),
            Component::LimbJoint(LimbJoint::Elbow(a)) => format!("elbow={}deg", format_deg(a)),
            Component::Connector => "connector".into(),
            Component::Mount => "mount".into(),
            Component::End(EndKind::Wheel) => "wheel".into(),
        }
    }
}

fn format_cm(meters: f64) -> String {
    let steps = (meters * LENGTH_STEPS_PER_METER).round() as i64;
    let (sign, steps) = if steps < 0 { ("-", -steps) } else { ("", steps) };
    let whole = steps / 100;
    let frac = steps % 100;
    if frac == 0 {
        format!("{sign}{whole}cm")
    } else if frac % 10 == 0 {
        format!("{sign}{whole}.{}cm", frac / 10)
    } else {
        format!("{sign}{whole}.{frac:02}cm")
    }
}

fn format_deg(degrees: f64) -> String {
    let steps = (degrees * ANGLE_STEPS_PER_DEGREE).round() as i64;
    let (sign, steps) = if steps < 0 { ("-", -steps) } else { ("", steps) };
    if steps % 10 == 0 {
        format!("{sign}{}", steps / 10)
    } else {
        format!("{sign}{}.{}", steps / 10, steps % 10)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComponentError {
    #[error("node {0} has no component")]
    MissingAssignment(NodeAddress),
    #[error("component assigned to {0}, which is not a node of the graph")]
    ExtraAssignment(NodeAddress),
    #[error("value {value} for node {node} is outside the allowed range")]
    OutOfRange { node: NodeAddress, value: f64 },
    #[error("`{component}` cannot be assigned to a {symbol} node ({node})")]
    WrongCategory {
        node: NodeAddress,
        symbol: Symbol,
        component: String,
    },
    #[error("components can only be assigned to a complete graph")]
    IncompleteGraph,
}

/// One component per node address.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentAssignment {
    entries: BTreeMap<NodeAddress, Component>,
}

impl ComponentAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, addr: NodeAddress, component: Component) -> Option<Component> {
        self.entries.insert(addr, component)
    }

    pub fn get(&self, addr: &NodeAddress) -> Option<&Component> {
        self.entries.get(addr)
    }

    pub fn remove(&mut self, addr: &NodeAddress) -> Option<Component> {
        self.entries.remove(addr)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeAddress, &Component)> {
        self.entries.iter()
    }

    /// Checks coverage, categories and ranges against `graph`.
    pub fn validate(&self, graph: &DesignGraph) -> Result<(), ComponentError> {
        if !graph.is_complete() {
            return Err(ComponentError::IncompleteGraph);
        }
        let nodes = graph.nodes();
        for (addr, node) in &nodes {
            let comp = self
                .entries
                .get(addr)
                .ok_or_else(|| ComponentError::MissingAssignment(addr.clone()))?;
            if !comp.fits(node.symbol) {
                return Err(ComponentError::WrongCategory {
                    node: addr.clone(),
                    symbol: node.symbol,
                    component: comp.token(),
                });
            }
            comp.check_range().map_err(|value| ComponentError::OutOfRange {
                node: addr.clone(),
                value,
            })?;
        }
        if self.entries.len() != nodes.len() {
            let extra = self
                .entries
                .keys()
                .find(|a| graph.node(a).is_none())
                .cloned()
                .expect("more entries than nodes implies a dangling address");
            return Err(ComponentError::ExtraAssignment(extra));
        }
        Ok(())
    }

    /// Renders the component line in graph order, e.g.
    /// `[null]-[body=15cm]-([connector]-[mount]-[wheel])-[null]`.
    /// Nodes without a component render as `[?]`.
    pub fn render(&self, graph: &DesignGraph) -> String {
        let mut out = String::new();
        self.render_chain(graph, &[], &mut out);
        out
    }

    fn render_chain(&self, chain: &DesignGraph, path: &[(usize, usize)], out: &mut String) {
        for (i, node) in chain.spine().iter().enumerate() {
            if i > 0 {
                out.push('-');
            }
            let addr = NodeAddress {
                path: path.to_vec(),
                index: i,
            };
            out.push('[');
            match self.entries.get(&addr) {
                Some(c) => out.push_str(&c.token()),
                None => out.push('?'),
            }
            out.push(']');
            for (b, branch) in node.branches.iter().enumerate() {
                out.push_str("-(");
                let mut sub = path.to_vec();
                sub.push((i, b));
                self.render_chain(branch, &sub, out);
                out.push(')');
            }
        }
    }
}

/// Draws a component for `symbol` uniformly over its allowed set; lengths
/// and angles are uniform on their intervals, then quantized.
pub fn sample_component(symbol: Symbol, rng: &mut impl Rng) -> Option<Component> {
    Some(match symbol {
        Symbol::H | Symbol::T => Component::Null,
        Symbol::U => Component::Body(BODY_LENGTH),
        Symbol::C => Component::Connector,
        Symbol::M => Component::Mount,
        Symbol::L => Component::Limb(quantize_length(
            rng.random_range(LIMB_LENGTH_MIN..=LIMB_LENGTH_MAX),
        )),
        Symbol::Y => Component::BodyJoint(match rng.random_range(0..3) {
            0 => BodyJoint::Rigid,
            1 => BodyJoint::Roll,
            _ => BodyJoint::Twist,
        }),
        Symbol::J => Component::LimbJoint(match rng.random_range(0..4) {
            0 => LimbJoint::Rigid,
            1 => LimbJoint::Roll,
            2 => LimbJoint::Knee(quantize_angle(rng.random_range(0.0..=KNEE_MAX_DEG))),
            _ => LimbJoint::Elbow(quantize_angle(rng.random_range(0.0..=ELBOW_MAX_DEG))),
        }),
        Symbol::E => Component::End(if rng.random_bool(0.5) {
            EndKind::Wheel
        } else {
            EndKind::Null
        }),
        Symbol::S | Symbol::B => return None,
    })
}

/// Samples a component for every node of `graph` that lacks one.
pub fn fill_components(graph: &DesignGraph, assignment: &mut ComponentAssignment, rng: &mut impl Rng) {
    for (addr, node) in graph.nodes() {
        if assignment.get(&addr).is_none() {
            if let Some(c) = sample_component(node.symbol, rng) {
                assignment.insert(addr, c);
            }
        }
    }
}

/// Validates `choices` against a complete `graph` and returns them as the
/// design's assignment.
pub fn assign_components(
    graph: &DesignGraph,
    choices: ComponentAssignment,
) -> Result<ComponentAssignment, ComponentError> {
    choices.validate(graph)?;
    Ok(choices)
}

/// A design as stored, prompted and archived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub derivation: Derivation,
    pub components: ComponentAssignment,
    pub reasoning: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    #[error(transparent)]
    Derivation(#[from] DerivationError),
    #[error(transparent)]
    Component(#[from] ComponentError),
}

impl DesignRecord {
    /// Builds a record; surrounding whitespace of the reasoning is dropped.
    pub fn new(derivation: Derivation, components: ComponentAssignment, reasoning: &str) -> Self {
        DesignRecord {
            derivation,
            components,
            reasoning: reasoning.trim().to_string(),
            fitness: None,
        }
    }

    /// Replays the derivation and validates the components against it.
    pub fn validate(&self) -> Result<DesignGraph, RecordError> {
        let graph = validate_derivation(&self.derivation)?;
        self.components.validate(&graph)?;
        Ok(graph)
    }
}

impl fmt::Display for DesignRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&emit_design_text(self))
    }
}

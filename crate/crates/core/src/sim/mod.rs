//! Planar (x–z) articulated-body simulation on four terrains.

mod dynamics;
mod planar;
mod terrain;

pub use dynamics::{is_healthy, Pose, SimConfig, SimError, SimState, Simulator, StepStats, GRAVITY};
pub use planar::{project_planar, Circle, Cluster, PlanarDof, PlanarModel};
pub use terrain::{
    Slab, Terrain, TerrainContact, TerrainKind, BEAM_BOTTOM, BEAM_LENGTH, BEAM_PERIOD, BEAM_TOP,
    RIDGE_HEIGHT, RIDGE_SPACING_MAX, RIDGE_SPACING_MIN, RIDGE_WIDTH,
};

/// One row of a recorded rollout.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub z: f64,
    pub reward: f64,
}

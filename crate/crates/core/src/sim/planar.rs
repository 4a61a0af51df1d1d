//! Projection of a 3D model onto the sagittal (x–z) plane.
//!
//! Bodies welded together (fixed joints, end caps, joints whose axis is not
//! y) are merged into one rigid cluster. Mirror-image sibling subtrees on
//! opposite sides of the same parent collapse into one limb of twice the
//! mass whose actuators drive the shared hinge together.

use serde::Serialize;

use crate::compiler::{Geom, JointKind, RobotModel, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Circle {
    /// Center in the cluster frame, (x, z).
    pub center: [f64; 2],
    pub radius: f64,
    /// Interior capsule samples never touch a plane first.
    pub interior: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub name: String,
    pub parent: Option<usize>,
    /// Frame offset in the parent cluster frame at the zero pose.
    pub pos: [f64; 2],
    /// Hinge anchor in this cluster's frame.
    pub anchor: [f64; 2],
    /// Index into `PlanarModel::dofs`; `None` only for the root.
    pub dof: Option<usize>,
    pub mass: f64,
    pub com: [f64; 2],
    /// About the center of mass.
    pub inertia: f64,
    pub circles: Vec<Circle>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarDof {
    pub name: String,
    pub cluster: usize,
    pub kind: JointKind,
    pub range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarModel {
    pub clusters: Vec<Cluster>,
    /// Hinge dofs; generalized coordinate `3 + i` belongs to `dofs[i]`.
    pub dofs: Vec<PlanarDof>,
    /// For each actuator of the source model, the hinge it drives, if the
    /// hinge survived projection.
    pub actuator_dofs: Vec<Option<usize>>,
    /// Spawn height of the root frame.
    pub spawn_z: f64,
}

impl PlanarModel {
    pub fn total_mass(&self) -> f64 {
        self.clusters.iter().map(|c| c.mass).sum()
    }

    /// Generalized coordinate count: x, z, pitch, then hinges.
    pub fn ndof(&self) -> usize {
        3 + self.dofs.len()
    }
}

fn is_planar_hinge(model: &RobotModel, body: usize) -> bool {
    model.joint_of(body).is_some_and(|j| {
        matches!(j.kind, JointKind::Hinge | JointKind::FreeWheel) && (j.axis[1].abs() - 1.0).abs() < 1e-9
    })
}

fn mirrored(a: Vec3, b: Vec3) -> bool {
    a[0] == b[0] && a[2] == b[2] && a[1] == -b[1]
}

fn geom_mirrored(a: &Geom, b: &Geom) -> bool {
    match (a, b) {
        (
            Geom::Capsule { radius: r1, from: f1, to: t1 },
            Geom::Capsule { radius: r2, from: f2, to: t2 },
        ) => r1 == r2 && mirrored(*f1, *f2) && mirrored(*t1, *t2),
        (Geom::Sphere { radius: r1, center: c1 }, Geom::Sphere { radius: r2, center: c2 }) => {
            r1 == r2 && mirrored(*c1, *c2)
        }
        (
            Geom::Cylinder { radius: r1, half_width: w1, center: c1, .. },
            Geom::Cylinder { radius: r2, half_width: w2, center: c2, .. },
        ) => r1 == r2 && w1 == w2 && mirrored(*c1, *c2),
        _ => false,
    }
}

/// Whether the subtrees at `a` and `b` are reflections of each other in the
/// x–z plane. Their own offsets must be strictly lateral mirrors.
fn subtree_mirrored(model: &RobotModel, a: usize, b: usize, root: bool) -> bool {
    let (ba, bb) = (&model.bodies[a], &model.bodies[b]);
    if !mirrored(ba.pos, bb.pos) || (root && ba.pos[1] == 0.0) {
        return false;
    }
    if ba.mass != bb.mass || !geom_mirrored(&ba.geom, &bb.geom) {
        return false;
    }
    let joints_match = match (model.joint_of(a), model.joint_of(b)) {
        (None, None) => true,
        (Some(ja), Some(jb)) => ja.kind == jb.kind && ja.axis == jb.axis && ja.range == jb.range,
        _ => false,
    };
    let ca: Vec<usize> = model.children(a).collect();
    let cb: Vec<usize> = model.children(b).collect();
    joints_match
        && ca.len() == cb.len()
        && ca.iter().zip(&cb).all(|(&x, &y)| subtree_mirrored(model, x, y, false))
}

fn pair_subtrees(model: &RobotModel, a: usize, b: usize, twin: &mut [Option<usize>]) {
    twin[b] = Some(a);
    let ca: Vec<usize> = model.children(a).collect();
    let cb: Vec<usize> = model.children(b).collect();
    for (x, y) in ca.into_iter().zip(cb) {
        pair_subtrees(model, x, y, twin);
    }
}

fn geom_circles(geom: &Geom, offset: [f64; 2]) -> Vec<Circle> {
    let at = |p: Vec3| [p[0] + offset[0], p[2] + offset[1]];
    match *geom {
        Geom::Capsule { radius, from, to } => {
            let dx = to[0] - from[0];
            let dz = to[2] - from[2];
            let planar_len = (dx * dx + dz * dz).sqrt();
            // Samples no further apart than the radius, so box corners cannot
            // slip between them.
            let n = (planar_len / radius).ceil().max(1.0) as usize;
            (0..=n)
                .map(|k| {
                    let s = k as f64 / n as f64;
                    Circle {
                        center: at([from[0] + s * dx, 0.0, from[2] + s * dz]),
                        radius,
                        interior: k != 0 && k != n,
                    }
                })
                .collect()
        }
        Geom::Sphere { radius, center } => vec![Circle {
            center: at(center),
            radius,
            interior: false,
        }],
        Geom::Cylinder {
            radius,
            half_width,
            center,
            axis,
        } => {
            let planar = (1.0 - axis[1] * axis[1]).max(0.0).sqrt();
            vec![Circle {
                center: at(center),
                radius: radius * (1.0 - planar) + radius.max(half_width) * planar,
                interior: false,
            }]
        }
    }
}

struct Part {
    mass: f64,
    com: [f64; 2],
    inertia: f64,
}

/// Sagittal projection. Lateral offsets are dropped, hinges about y keep
/// their degree of freedom and every other joint is welded.
pub fn project_planar(model: &RobotModel) -> PlanarModel {
    let n = model.bodies.len();
    let mut twin: Vec<Option<usize>> = vec![None; n];
    for parent in 0..n {
        let kids: Vec<usize> = model.children(parent).filter(|&k| twin[k].is_none()).collect();
        let mut used = vec![false; kids.len()];
        for i in 0..kids.len() {
            if used[i] {
                continue;
            }
            if let Some(j) = (i + 1..kids.len())
                .find(|&j| !used[j] && subtree_mirrored(model, kids[i], kids[j], true))
            {
                used[i] = true;
                used[j] = true;
                pair_subtrees(model, kids[i], kids[j], &mut twin);
            }
        }
    }

    let mut clusters: Vec<Cluster> = Vec::new();
    let mut dofs: Vec<PlanarDof> = Vec::new();
    let mut parts: Vec<Vec<Part>> = Vec::new();
    let mut cluster_of = vec![usize::MAX; n];
    let mut offset = vec![[0.0f64; 2]; n];
    for i in 0..n {
        if twin[i].is_some() {
            continue;
        }
        let body = &model.bodies[i];
        let copies = if twin.contains(&Some(i)) { 2.0 } else { 1.0 };
        let c = match body.parent {
            None => {
                clusters.push(Cluster {
                    name: body.name.clone(),
                    parent: None,
                    pos: [0.0, 0.0],
                    anchor: [0.0, 0.0],
                    dof: None,
                    mass: 0.0,
                    com: [0.0; 2],
                    inertia: 0.0,
                    circles: Vec::new(),
                });
                parts.push(Vec::new());
                clusters.len() - 1
            }
            Some(p) if is_planar_hinge(model, i) => {
                let joint = model.joint_of(i).expect("hinge checked");
                let pc = cluster_of[p];
                dofs.push(PlanarDof {
                    name: joint.name.clone(),
                    cluster: clusters.len(),
                    kind: joint.kind,
                    range: joint.range,
                });
                clusters.push(Cluster {
                    name: body.name.clone(),
                    parent: Some(pc),
                    pos: [offset[p][0] + body.pos[0], offset[p][1] + body.pos[2]],
                    anchor: [joint.pos[0], joint.pos[2]],
                    dof: Some(dofs.len() - 1),
                    mass: 0.0,
                    com: [0.0; 2],
                    inertia: 0.0,
                    circles: Vec::new(),
                });
                parts.push(Vec::new());
                clusters.len() - 1
            }
            Some(p) => {
                offset[i] = [offset[p][0] + body.pos[0], offset[p][1] + body.pos[2]];
                cluster_of[p]
            }
        };
        cluster_of[i] = c;
        let gc = body.geom.center();
        let mass = body.mass * copies;
        parts[c].push(Part {
            mass,
            com: [offset[i][0] + gc[0], offset[i][1] + gc[2]],
            inertia: body.geom.inertia_y(mass),
        });
        clusters[c].circles.extend(geom_circles(&body.geom, offset[i]));
    }

    for (cluster, parts) in clusters.iter_mut().zip(&parts) {
        let mass: f64 = parts.iter().map(|p| p.mass).sum();
        let com = [
            parts.iter().map(|p| p.mass * p.com[0]).sum::<f64>() / mass,
            parts.iter().map(|p| p.mass * p.com[1]).sum::<f64>() / mass,
        ];
        let inertia = parts
            .iter()
            .map(|p| {
                let d2 = (p.com[0] - com[0]).powi(2) + (p.com[1] - com[1]).powi(2);
                p.inertia + p.mass * d2
            })
            .sum();
        cluster.mass = mass;
        cluster.com = com;
        cluster.inertia = inertia;
    }

    let actuator_dofs = model
        .actuators
        .iter()
        .map(|a| {
            let body = model.joints[a.joint].body;
            let body = twin[body].unwrap_or(body);
            if is_planar_hinge(model, body) {
                clusters[cluster_of[body]].dof
            } else {
                None
            }
        })
        .collect();

    PlanarModel {
        clusters,
        dofs,
        actuator_dofs,
        spawn_z: model.bodies.first().map(|b| b.pos[2]).unwrap_or(0.0),
    }
}

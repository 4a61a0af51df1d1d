use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerrainKind {
    Ridged,
    Flat,
    Frozen,
    Beams,
}

impl TerrainKind {
    pub const ALL: [TerrainKind; 4] = [
        TerrainKind::Ridged,
        TerrainKind::Flat,
        TerrainKind::Frozen,
        TerrainKind::Beams,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TerrainKind::Ridged => "ridged",
            TerrainKind::Flat => "flat",
            TerrainKind::Frozen => "frozen",
            TerrainKind::Beams => "beams",
        }
    }
}

impl std::str::FromStr for TerrainKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TerrainKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown terrain `{s}` (expected ridged, flat, frozen or beams)"))
    }
}

pub const RIDGE_HEIGHT: f64 = 0.1;
pub const RIDGE_WIDTH: f64 = 0.2;
pub const RIDGE_SPACING_MIN: f64 = 1.5;
pub const RIDGE_SPACING_MAX: f64 = 2.5;
/// Ridges are laid out to this distance on either side of the spawn.
pub const RIDGE_EXTENT: f64 = 200.0;

pub const BEAM_PERIOD: f64 = 3.0;
pub const BEAM_LENGTH: f64 = 1.0;
pub const BEAM_BOTTOM: f64 = 0.25;
pub const BEAM_TOP: f64 = 0.35;

/// Axis-aligned obstacle in the x–z plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slab {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

/// One candidate contact between a circle and the terrain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerrainContact {
    /// Signed distance from the circle surface; negative when penetrating.
    pub gap: f64,
    /// Unit normal pointing from the terrain toward the circle, (x, z).
    pub normal: [f64; 2],
    pub ceiling: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Terrain {
    pub kind: TerrainKind,
    pub friction_mu: f64,
    /// Ridge centers, ascending.
    ridges: Vec<f64>,
}

impl Terrain {
    /// `seed` only matters for ridged terrain.
    pub fn new(kind: TerrainKind, seed: u64) -> Self {
        let friction_mu = match kind {
            TerrainKind::Frozen => 0.05,
            _ => 1.0,
        };
        let ridges = if kind == TerrainKind::Ridged {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut side = |sign: f64| {
                let mut xs = Vec::new();
                let mut x = 0.0;
                loop {
                    x += rng.random_range(RIDGE_SPACING_MIN..RIDGE_SPACING_MAX);
                    if x > RIDGE_EXTENT {
                        break xs;
                    }
                    xs.push(sign * x);
                }
            };
            let mut back = side(-1.0);
            let fwd = side(1.0);
            back.reverse();
            back.extend(fwd);
            back
        } else {
            Vec::new()
        };
        Terrain {
            kind,
            friction_mu,
            ridges,
        }
    }

    pub fn ridge_centers(&self) -> &[f64] {
        &self.ridges
    }

    /// Floor height under `x`.
    pub fn height(&self, x: f64) -> f64 {
        if self.ridge_slabs(x, x).any(|s| x >= s.x_min && x <= s.x_max) {
            RIDGE_HEIGHT
        } else {
            0.0
        }
    }

    /// Underside of the overhead beam covering `x`, if any.
    pub fn ceiling(&self, x: f64) -> Option<f64> {
        self.beam_slabs(x, x)
            .any(|s| x >= s.x_min && x <= s.x_max)
            .then_some(BEAM_BOTTOM)
    }

    fn ridge_slabs(&self, lo: f64, hi: f64) -> impl Iterator<Item = Slab> + '_ {
        let half = RIDGE_WIDTH / 2.0;
        let start = self.ridges.partition_point(|&c| c + half < lo);
        self.ridges[start..]
            .iter()
            .take_while(move |&&c| c - half <= hi)
            .map(move |&c| Slab {
                x_min: c - half,
                x_max: c + half,
                z_min: 0.0,
                z_max: RIDGE_HEIGHT,
            })
    }

    fn beam_slabs(&self, lo: f64, hi: f64) -> impl Iterator<Item = Slab> {
        let beams = self.kind == TerrainKind::Beams;
        let half = BEAM_LENGTH / 2.0;
        let first = ((lo - half) / BEAM_PERIOD).ceil() as i64;
        let last = ((hi + half) / BEAM_PERIOD).floor() as i64;
        (first..=last).filter(move |_| beams).map(move |k| {
            let c = k as f64 * BEAM_PERIOD;
            Slab {
                x_min: c - half,
                x_max: c + half,
                z_min: BEAM_BOTTOM,
                z_max: BEAM_TOP,
            }
        })
    }

    /// Appends contacts for a circle at `center` whose gap is below `margin`.
    /// `floor` is false for circles that can never be a body's lowest point
    /// against a plane.
    pub fn query(
        &self,
        center: [f64; 2],
        radius: f64,
        margin: f64,
        floor: bool,
        out: &mut Vec<TerrainContact>,
    ) {
        if floor {
            let gap = center[1] - radius;
            if gap < margin {
                out.push(TerrainContact {
                    gap,
                    normal: [0.0, 1.0],
                    ceiling: false,
                });
            }
        }
        let reach = radius + margin;
        let (lo, hi) = (center[0] - reach, center[0] + reach);
        for slab in self.ridge_slabs(lo, hi) {
            slab_contact(&slab, center, radius, margin, false, out);
        }
        for slab in self.beam_slabs(lo, hi) {
            slab_contact(&slab, center, radius, margin, true, out);
        }
    }
}

fn slab_contact(
    slab: &Slab,
    c: [f64; 2],
    radius: f64,
    margin: f64,
    ceiling: bool,
    out: &mut Vec<TerrainContact>,
) {
    let px = c[0].clamp(slab.x_min, slab.x_max);
    let pz = c[1].clamp(slab.z_min, slab.z_max);
    let (dx, dz) = (c[0] - px, c[1] - pz);
    let dist = (dx * dx + dz * dz).sqrt();
    let contact = if dist > 1e-12 {
        TerrainContact {
            gap: dist - radius,
            normal: [dx / dist, dz / dist],
            ceiling,
        }
    } else {
        // Center inside the slab: leave through the nearest face.
        let faces = [
            (c[0] - slab.x_min, [-1.0, 0.0]),
            (slab.x_max - c[0], [1.0, 0.0]),
            (c[1] - slab.z_min, [0.0, -1.0]),
            (slab.z_max - c[1], [0.0, 1.0]),
        ];
        let (depth, normal) = faces
            .into_iter()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("four faces");
        TerrainContact {
            gap: -depth - radius,
            normal,
            ceiling,
        }
    };
    if contact.gap < margin {
        out.push(contact);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn friction_by_kind() {
        assert_eq!(Terrain::new(TerrainKind::Flat, 0).friction_mu, 1.0);
        assert_eq!(Terrain::new(TerrainKind::Frozen, 0).friction_mu, 0.05);
        assert_eq!(Terrain::new(TerrainKind::Ridged, 0).friction_mu, 1.0);
        assert_eq!(Terrain::new(TerrainKind::Beams, 0).friction_mu, 1.0);
    }

    #[test]
    fn ridge_spacing_and_spawn_clearance() {
        let t = Terrain::new(TerrainKind::Ridged, 7);
        let xs = t.ridge_centers();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        assert!(xs.iter().all(|x| x.abs() >= RIDGE_SPACING_MIN));
        let gaps: Vec<f64> = xs
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|g| *g < RIDGE_SPACING_MAX + 1e-9)
            .collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!((mean - 2.0).abs() < 0.1, "mean spacing {mean}");
        assert_eq!(t.height(0.0), 0.0);
        assert_eq!(t.height(xs[0]), RIDGE_HEIGHT);
    }

    #[test]
    fn beams_cover_spawn() {
        let t = Terrain::new(TerrainKind::Beams, 0);
        assert_eq!(t.ceiling(0.0), Some(BEAM_BOTTOM));
        assert_eq!(t.ceiling(1.5), None);
        assert_eq!(t.ceiling(-3.2), Some(BEAM_BOTTOM));
        assert_eq!(Terrain::new(TerrainKind::Flat, 0).ceiling(0.0), None);
    }

    #[test]
    fn circle_queries() {
        let t = Terrain::new(TerrainKind::Beams, 0);
        let mut out = Vec::new();
        t.query([0.0, 0.22], 0.02, 0.01, true, &mut out);
        assert_eq!(out.len(), 1);
        assert!(out[0].ceiling);
        assert!((out[0].gap - 0.01).abs() < 1e-12);
        assert_eq!(out[0].normal, [0.0, -1.0]);
        out.clear();
        t.query([1.5, 0.015], 0.02, 0.01, true, &mut out);
        assert_eq!(out.len(), 1);
        assert!((out[0].gap + 0.005).abs() < 1e-12);
    }
}

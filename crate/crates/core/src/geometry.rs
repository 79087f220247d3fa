//! Node placement and 3-D distances.
//!
//! APs, surfaces, and users are dropped independently and uniformly over the
//! configured square; heights are fixed per node class. The square is
//! simulated as-is (no wrap-around), so edge nodes genuinely see fewer close
//! neighbours.

use crate::scenario::{ScenarioConfig, SeedContext};
use rand::Rng;

/// One node position: planar coordinates in km, height in m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x_km: f64,
    pub y_km: f64,
    pub z_m: f64,
}

/// Positions of every node for one network draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub aps: Vec<Position>,
    pub surfaces: Vec<Position>,
    pub users: Vec<Position>,
}

impl Topology {
    /// CSV dump with columns `node_type,index,x_km,y_km,z_m`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node_type,index,x_km,y_km,z_m\n");
        let mut push = |kind: &str, nodes: &[Position]| {
            for (i, p) in nodes.iter().enumerate() {
                out.push_str(&format!("{kind},{i},{},{},{}\n", p.x_km, p.y_km, p.z_m));
            }
        };
        push("ap", &self.aps);
        push("ris", &self.surfaces);
        push("user", &self.users);
        out
    }
}

fn draw_xy(rng: &mut impl Rng, side_km: f64) -> (f64, f64) {
    (rng.random::<f64>() * side_km, rng.random::<f64>() * side_km)
}

/// Draw a uniform placement of all nodes for topology index `topo_idx`.
///
/// Every node has its own substream, so placements are stable under changes
/// to the other node counts: the first `M` APs of a larger deployment are
/// exactly the APs of the smaller one.
pub fn draw_topology(cfg: &ScenarioConfig, seeds: &SeedContext, topo_idx: u64) -> Topology {
    let place = |purpose: &str, count: usize, z_m: f64| -> Vec<Position> {
        (0..count)
            .map(|i| {
                let mut rng = seeds.stream(purpose, &[topo_idx, i as u64]);
                let (x_km, y_km) = draw_xy(&mut rng, cfg.area_side_km);
                Position { x_km, y_km, z_m }
            })
            .collect()
    };
    Topology {
        aps: place("ap-position", cfg.ap_count, cfg.ap_height_m),
        surfaces: place("ris-position", cfg.ris_count, cfg.ris_height_m),
        users: place("user-position", cfg.user_count, cfg.user_height_m),
    }
}

/// Euclidean 3-D distance in meters.
pub fn distance_m(a: &Position, b: &Position) -> f64 {
    let dx = (a.x_km - b.x_km) * 1000.0;
    let dy = (a.y_km - b.y_km) * 1000.0;
    let dz = a.z_m - b.z_m;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Scenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Site {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub id: usize,
    pub site: usize,
    /// Boresight azimuth in radians, counter-clockwise from the x axis.
    pub boresight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeDrop {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    /// Cell whose sector wedge the UE was dropped in.
    pub drop_cell: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub sites: Vec<Site>,
    pub cells: Vec<Cell>,
    pub ues: Vec<UeDrop>,
}

// axial hex directions at 0, 60, ..., 300 degrees
const HEX_DIRS: [(i64, i64); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

/// Axial coordinates of the first `n` sites of a hexagonal spiral: the
/// origin, then ring 1 starting at 0 degrees and turning counter-clockwise,
/// then ring 2, and so on.
fn hex_spiral(n: usize) -> Vec<(i64, i64)> {
    let mut out = vec![(0, 0)];
    let mut ring = 1i64;
    while out.len() < n {
        let mut at = (ring * HEX_DIRS[0].0, ring * HEX_DIRS[0].1);
        for k in 0..6 {
            let d = HEX_DIRS[(k + 2) % 6];
            for _ in 0..ring {
                out.push(at);
                at = (at.0 + d.0, at.1 + d.1);
            }
        }
        ring += 1;
    }
    out.truncate(n);
    out
}

/// Wraps an angle to `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

fn in_hexagon(dx: f64, dy: f64, apothem: f64) -> bool {
    (0..6).all(|k| {
        let t = k as f64 * PI / 3.0;
        dx * t.cos() + dy * t.sin() <= apothem
    })
}

/// Hexagonal site grid, sectors with evenly spaced boresights starting at
/// 30 degrees, and UEs dropped uniformly in each sector's part of its site
/// hexagon, at least `min_distance` from the site. UE `i` is dropped in cell
/// `i mod num_cells`.
pub fn build_topology(s: &Scenario, rng: &mut ChaCha8Rng) -> Topology {
    let isd = s.inter_site_distance;
    let sites: Vec<Site> = hex_spiral(s.num_sites)
        .into_iter()
        .map(|(q, r)| Site {
            x: isd * (q as f64 + 0.5 * r as f64),
            y: isd * (r as f64 * 3f64.sqrt() / 2.0),
        })
        .collect();
    let sps = s.sectors_per_site;
    let width = 2.0 * PI / sps as f64;
    let cells: Vec<Cell> = (0..sites.len() * sps)
        .map(|id| Cell {
            id,
            site: id / sps,
            boresight: wrap_angle(PI / 6.0 + width * (id % sps) as f64),
        })
        .collect();
    let apothem = isd / 2.0;
    let radius = isd / 3f64.sqrt();
    let ues = (0..s.num_ues)
        .map(|id| {
            let cell = cells[id % cells.len()];
            let site = sites[cell.site];
            loop {
                let r = radius * rng.gen::<f64>().sqrt();
                let a = cell.boresight + width * (rng.gen::<f64>() - 0.5);
                let (dx, dy) = (r * a.cos(), r * a.sin());
                if r >= s.min_distance && in_hexagon(dx, dy, apothem) {
                    break UeDrop {
                        id,
                        x: site.x + dx,
                        y: site.y + dy,
                        drop_cell: cell.id,
                    };
                }
            }
        })
        .collect();
    Topology { sites, cells, ues }
}

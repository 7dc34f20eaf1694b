//! Generator for the synthetic "skull dome" sample scene.
//!
//! A hemispherical shell closed by a flat floor (the skull base) at y = 0,
//! real-size radius 0.2 m. The floor is a polar grid; three of its cells are
//! cut open and lined with short vertical canals, one structure each.
//! `fixtures/skull_dome.obj` and `fixtures/skull_dome.json` are the output of
//! this module.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt::Write;

use crate::geometry::Vec3;

pub const DOME_RADIUS: f64 = 0.2;
pub const FLOOR_RINGS: usize = 8;
pub const SECTORS: usize = 32;
pub const DOME_BANDS: usize = 8;
pub const CANAL_DEPTH: f64 = 0.02;

/// A foramen: the floor cell between rings `ring` and `ring + 1` and sectors
/// `sector` and `sector + 1`.
#[derive(Debug, Clone, Copy)]
pub struct Foramen {
    pub id: &'static str,
    pub ring: usize,
    pub sector: usize,
}

pub const FORAMINA: [Foramen; 3] = [
    Foramen {
        id: "canalis_opticus",
        ring: 3,
        sector: 0,
    },
    Foramen {
        id: "foramen_ovale_left",
        ring: 5,
        sector: 12,
    },
    Foramen {
        id: "foramen_spinosum_right",
        ring: 5,
        sector: 20,
    },
];

pub const CRANIUM_ID: &str = "cranium";

fn floor_point(ring: usize, sector: usize) -> Vec3 {
    let r = DOME_RADIUS * ring as f64 / FLOOR_RINGS as f64;
    let a = TAU * (sector % SECTORS) as f64 / SECTORS as f64;
    Vec3::new(r * a.cos(), 0.0, r * a.sin())
}

impl Foramen {
    /// Cell corners in real-size units, counter-clockwise seen from above.
    pub fn corners(&self) -> [Vec3; 4] {
        [
            floor_point(self.ring, self.sector),
            floor_point(self.ring + 1, self.sector),
            floor_point(self.ring + 1, self.sector + 1),
            floor_point(self.ring, self.sector + 1),
        ]
    }

    /// Center of the opening on the floor plane, real-size units.
    pub fn center(&self) -> Vec3 {
        let c = self.corners();
        (c[0] + c[1] + c[2] + c[3]) * 0.25
    }
}

fn fmt(v: f64) -> String {
    // Fixed precision keeps the file stable across platforms.
    let s = format!("{v:.9}");
    if s.starts_with("-0.000000000") {
        "0.000000000".to_owned()
    } else {
        s
    }
}

/// OBJ text of the sample scene.
pub fn skull_dome_obj() -> String {
    let mut out = String::new();
    let mut next_vertex = 1usize;
    let mut emit_vertex = |out: &mut String, v: Vec3| {
        writeln!(out, "v {} {} {}", fmt(v.x), fmt(v.y), fmt(v.z)).unwrap();
        next_vertex += 1;
        next_vertex - 1
    };

    writeln!(out, "# synthetic skull-base dome, real-size meters").unwrap();
    writeln!(out, "o {CRANIUM_ID}").unwrap();
    let center = emit_vertex(&mut out, Vec3::ZERO);
    // floor[k][j] for k in 1..=FLOOR_RINGS
    let mut floor = vec![vec![0usize; SECTORS]; FLOOR_RINGS + 1];
    for (k, ring) in floor.iter_mut().enumerate().skip(1) {
        for (j, slot) in ring.iter_mut().enumerate() {
            *slot = emit_vertex(&mut out, floor_point(k, j));
        }
    }
    // dome[b][j] for b in 1..DOME_BANDS; band 0 is the floor's outer ring.
    let mut dome = vec![vec![0usize; SECTORS]; DOME_BANDS];
    dome[0] = floor[FLOOR_RINGS].clone();
    for (b, band) in dome.iter_mut().enumerate().skip(1) {
        let phi = FRAC_PI_2 * b as f64 / DOME_BANDS as f64;
        let (r, y) = (DOME_RADIUS * phi.cos(), DOME_RADIUS * phi.sin());
        for (j, slot) in band.iter_mut().enumerate() {
            let a = TAU * j as f64 / SECTORS as f64;
            *slot = emit_vertex(&mut out, Vec3::new(r * a.cos(), y, r * a.sin()));
        }
    }
    let pole = emit_vertex(&mut out, Vec3::new(0.0, DOME_RADIUS, 0.0));

    let is_hole = |k: usize, j: usize| FORAMINA.iter().any(|f| f.ring == k && f.sector == j);
    for j in 0..SECTORS {
        let jn = (j + 1) % SECTORS;
        writeln!(out, "f {} {} {}", center, floor[1][jn], floor[1][j]).unwrap();
    }
    for k in 1..FLOOR_RINGS {
        for j in 0..SECTORS {
            if is_hole(k, j) {
                continue;
            }
            let jn = (j + 1) % SECTORS;
            let (a, b, c, d) = (floor[k][j], floor[k + 1][j], floor[k + 1][jn], floor[k][jn]);
            writeln!(out, "f {a} {c} {b}").unwrap();
            writeln!(out, "f {a} {d} {c}").unwrap();
        }
    }
    for b in 0..DOME_BANDS - 1 {
        for j in 0..SECTORS {
            let jn = (j + 1) % SECTORS;
            let (p, q, r, s) = (dome[b][j], dome[b][jn], dome[b + 1][jn], dome[b + 1][j]);
            writeln!(out, "f {p} {q} {r}").unwrap();
            writeln!(out, "f {p} {r} {s}").unwrap();
        }
    }
    for j in 0..SECTORS {
        let jn = (j + 1) % SECTORS;
        writeln!(out, "f {} {} {}", dome[DOME_BANDS - 1][j], dome[DOME_BANDS - 1][jn], pole).unwrap();
    }

    for foramen in FORAMINA {
        writeln!(out, "o {}", foramen.id).unwrap();
        let corners = foramen.corners();
        let top: Vec<usize> = corners.iter().map(|&c| emit_vertex(&mut out, c)).collect();
        let bottom: Vec<usize> = corners
            .iter()
            .map(|&c| emit_vertex(&mut out, c - Vec3::Y * CANAL_DEPTH))
            .collect();
        for i in 0..4 {
            let n = (i + 1) % 4;
            writeln!(out, "f {} {} {}", top[i], bottom[i], bottom[n]).unwrap();
            writeln!(out, "f {} {} {}", top[i], bottom[n], top[n]).unwrap();
        }
    }
    out
}

/// Metadata document for the sample scene.
pub fn skull_dome_metadata() -> String {
    let doc = serde_json::json!({
        CRANIUM_ID: {
            "name": "Cranium",
            "description": "Enlarged hollow skull. The floor is the inner skull base.",
            "illustration": "illustrations/cranium.png",
            "category": "bone"
        },
        "canalis_opticus": {
            "name": "Canalis opticus",
            "description": "Optic canal. Passage for the optic nerve and the ophthalmic artery.",
            "illustration": "illustrations/canalis_opticus.png",
            "category": "nerve"
        },
        "foramen_ovale_left": {
            "name": "Left Foramen Ovale",
            "description": "Oval opening in the greater wing of the sphenoid. Passage for the mandibular nerve.",
            "illustration": null,
            "category": "nerve"
        },
        "foramen_spinosum_right": {
            "name": "Right Foramen Spinosum",
            "description": "Small opening behind the foramen ovale. Passage for the middle meningeal artery.",
            "illustration": null,
            "category": "artery"
        }
    });
    let mut s = serde_json::to_string_pretty(&doc).unwrap();
    s.push('\n');
    s
}

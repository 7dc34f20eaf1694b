//! Browser demo over the sample scene. [`Demo`] holds the logic and is
//! tested natively; [`WasmDemo`] exposes it to JavaScript as JSON strings.

use std::sync::Arc;

use serde::Serialize;
use tutorlink_core::geometry::{clamp_teleport, sweep_tube, Quat, Ray, TeleportOutcome, Vec3};
use tutorlink_core::navigation::{adjust_beam, NavConfig};
use tutorlink_core::scene::{AnatomyScene, SceneConfig};
use tutorlink_core::session_state::Brush;
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hit {
    pub structure_id: String,
    pub name: String,
    pub description: String,
    pub distance: f64,
    pub point: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TeleportPreview {
    pub accepted: bool,
    /// Capsule base at the clamped beam tip.
    pub target: Option<[f64; 3]>,
    /// Effective beam length after clamping.
    pub length: f64,
    /// The beam's desired length after the swipe was applied.
    pub beam: f64,
    pub capsule_radius: f64,
    /// First surface along the beam, if any.
    pub hit: Option<Hit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubePreview {
    pub points: usize,
    pub ring_segments: usize,
    pub positions: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureOutline {
    pub structure_id: String,
    pub name: String,
    pub color: [u8; 3],
    /// Top view center and radius of the structure's footprint.
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopView {
    /// Half extent of the scene footprint.
    pub extent: f64,
    pub structures: Vec<StructureOutline>,
}

fn arr(v: Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub struct Demo {
    scene: Arc<AnatomyScene>,
    nav: NavConfig,
}

impl Default for Demo {
    fn default() -> Self {
        Demo {
            scene: Arc::new(AnatomyScene::sample(&SceneConfig::default())),
            nav: NavConfig::default(),
        }
    }
}

impl Demo {
    pub fn top_view(&self) -> TopView {
        let bounds = self.scene.bvh().bounds();
        let extent = bounds.max.x.abs().max(bounds.min.x.abs()).max(bounds.max.z.abs()).max(bounds.min.z.abs());
        let structures = self
            .scene
            .structures()
            .map(|s| {
                let v = s.mesh.vertices();
                let n = v.len() as f64;
                let cx = v.iter().map(|p| p.x).sum::<f64>() / n;
                let cz = v.iter().map(|p| p.z).sum::<f64>() / n;
                let radius = v.iter().map(|p| ((p.x - cx).powi(2) + (p.z - cz).powi(2)).sqrt()).fold(0.0, f64::max);
                StructureOutline {
                    structure_id: s.info.structure_id.clone(),
                    name: s.info.name.clone(),
                    color: s.info.category.display_color(),
                    center: [cx, cz],
                    radius,
                }
            })
            .collect();
        TopView { extent, structures }
    }

    /// Nearest structure along a ray, with its handbook entry.
    pub fn pick(&self, origin: Vec3, direction: Vec3) -> Option<Hit> {
        let ray = Ray::new(origin, direction).ok()?;
        let (hit, info) = self.scene.pick_structure(&ray)?;
        Some(Hit {
            structure_id: info.structure_id.clone(),
            name: info.name.clone(),
            description: info.description.clone(),
            distance: hit.distance,
            point: arr(hit.point),
        })
    }

    /// Where a teleport from `origin` along yaw/pitch would land. `beam` is
    /// the current length, `swipe` a touchpad delta applied to it first.
    pub fn teleport_preview(&self, origin: Vec3, yaw: f64, pitch: f64, beam: f64, swipe: f64) -> TeleportPreview {
        let beam = adjust_beam(beam, swipe, &self.nav);
        let direction = Quat::from_yaw_pitch(yaw, pitch).forward();
        let template = self.nav.capsule_template();
        let outcome = Ray::new(origin, direction)
            .ok()
            .and_then(|ray| clamp_teleport(self.scene.bvh(), &ray, beam, self.nav.margin, &template).ok());
        let hit = self.pick(origin, direction).filter(|h| h.distance <= beam + self.nav.margin);
        let (accepted, target, length) = match outcome {
            Some(TeleportOutcome::Accepted { target, length }) => (true, Some(arr(target)), length),
            _ => (false, None, 0.0),
        };
        TeleportPreview {
            accepted,
            target,
            length,
            beam,
            capsule_radius: template.radius,
            hit,
        }
    }

    /// Tube a sketch stroke would be rendered as. `points` is flat xyz.
    pub fn sketch_tube(&self, points: &[f64], brush: Brush, ring_segments: usize) -> Result<TubePreview, String> {
        if !points.len().is_multiple_of(3) {
            return Err(format!("{} coordinates is not a list of xyz triples", points.len()));
        }
        let centerline: Vec<Vec3> = points.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        let tube = sweep_tube(&centerline, brush.radius(), ring_segments).map_err(|e| e.to_string())?;
        Ok(TubePreview {
            points: tube.centerline.len(),
            ring_segments,
            positions: tube.mesh.vertices().iter().map(|&v| arr(v)).collect(),
            triangles: tube.mesh.triangles().to_vec(),
        })
    }
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo types serialize")
}

#[wasm_bindgen]
pub struct WasmDemo(Demo);

#[wasm_bindgen]
impl WasmDemo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> WasmDemo {
        WasmDemo(Demo::default())
    }

    #[wasm_bindgen(js_name = topView)]
    pub fn top_view(&self) -> String {
        json(&self.0.top_view())
    }

    pub fn pick(&self, ox: f64, oy: f64, oz: f64, dx: f64, dy: f64, dz: f64) -> String {
        json(&self.0.pick(Vec3::new(ox, oy, oz), Vec3::new(dx, dy, dz)))
    }

    #[wasm_bindgen(js_name = teleportPreview)]
    #[allow(clippy::too_many_arguments)]
    pub fn teleport_preview(&self, x: f64, y: f64, z: f64, yaw: f64, pitch: f64, beam: f64, swipe: f64) -> String {
        json(&self.0.teleport_preview(Vec3::new(x, y, z), yaw, pitch, beam, swipe))
    }

    #[wasm_bindgen(js_name = sketchTube)]
    pub fn sketch_tube(&self, points: &[f64], large_brush: bool, ring_segments: usize) -> Result<String, JsError> {
        let brush = if large_brush { Brush::Large } else { Brush::Small };
        self.0
            .sketch_tube(points, brush, ring_segments)
            .map(|t| json(&t))
            .map_err(|e| JsError::new(&e))
    }
}

impl Default for WasmDemo {
    fn default() -> Self {
        Self::new()
    }
}

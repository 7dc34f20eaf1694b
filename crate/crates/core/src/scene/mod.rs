//! The anatomy scene: structure meshes, handbook metadata and ray picking.

pub mod fixture;
mod obj;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{build_bvh, Bvh, GeometryError, Ray, RayHit, TriangleMesh, Vec3};

pub use obj::{parse_obj, ObjObject};

pub const DEFAULT_WORLD_SCALE: f64 = 20.0;
/// Side length of the default tracked walking area.
pub const DEFAULT_WALK_EXTENT: f64 = 5.0;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("mesh line {line}: {message}")]
    ObjParse { line: usize, message: String },
    #[error("metadata line {line}, column {column}: {message}")]
    MetadataParse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("metadata references structures missing from the mesh: {}", .0.join(", "))]
    DanglingMetadata(Vec<String>),
    #[error("scene contains no geometry")]
    NoGeometry,
    #[error("structure `{structure}`: {source}")]
    Geometry {
        structure: String,
        #[source]
        source: GeometryError,
    },
    #[error("unknown structure `{0}`")]
    NotFound(String),
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Bone,
    Artery,
    Vein,
    Nerve,
    Other,
}

impl Category {
    /// Canonical display color (sRGB).
    pub fn display_color(self) -> [u8; 3] {
        match self {
            Category::Artery => [220, 40, 40],
            Category::Vein => [40, 80, 220],
            Category::Nerve => [235, 205, 40],
            Category::Bone => [230, 222, 200],
            Category::Other => [160, 160, 160],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureInfo {
    pub structure_id: String,
    pub name: String,
    pub description: String,
    pub illustration: Option<String>,
    pub category: Category,
}

impl StructureInfo {
    fn fallback(id: &str) -> Self {
        StructureInfo {
            structure_id: id.to_owned(),
            name: id.to_owned(),
            description: String::new(),
            illustration: None,
            category: Category::Other,
        }
    }
}

/// One record of the metadata document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetadataEntry {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub illustration: Option<String>,
    #[serde(default = "other")]
    pub category: Category,
}

fn other() -> Category {
    Category::Other
}

/// Axis-aligned rectangle on the platform (xz) plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkBarrier {
    pub min_x: f64,
    pub max_x: f64,
    pub min_z: f64,
    pub max_z: f64,
}

impl WalkBarrier {
    /// Square of side `extent` centered on the origin.
    pub fn centered(extent: f64) -> Self {
        let h = extent * 0.5;
        WalkBarrier {
            min_x: -h,
            max_x: h,
            min_z: -h,
            max_z: h,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.min_x, self.max_x, self.min_z, self.max_z]
            .iter()
            .all(|v| v.is_finite())
            && self.min_x < self.max_x
            && self.min_z < self.max_z
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (self.min_x..=self.max_x).contains(&p.x) && (self.min_z..=self.max_z).contains(&p.z)
    }
}

impl Default for WalkBarrier {
    fn default() -> Self {
        WalkBarrier::centered(DEFAULT_WALK_EXTENT)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    /// Enlargement applied to the mesh file's real-size coordinates.
    pub world_scale: f64,
    pub walk_barrier: WalkBarrier,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            world_scale: DEFAULT_WORLD_SCALE,
            walk_barrier: WalkBarrier::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Structure {
    pub mesh: TriangleMesh,
    pub info: StructureInfo,
}

/// Loaded scene. Immutable; share it behind an `Arc`.
#[derive(Clone, Debug)]
pub struct AnatomyScene {
    structures: BTreeMap<String, Structure>,
    bvh: Bvh,
    world_scale: f64,
    walk_barrier: WalkBarrier,
}

fn read(path: &Path) -> Result<String, SceneError> {
    std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Loads a scene from an OBJ mesh file and a JSON metadata file.
pub fn load_scene(
    mesh_file: &Path,
    metadata_file: &Path,
    config: &SceneConfig,
) -> Result<AnatomyScene, SceneError> {
    let mesh_text = read(mesh_file)?;
    let metadata_text = read(metadata_file)?;
    AnatomyScene::from_sources(&mesh_text, &metadata_text, config)
}

pub fn parse_metadata(text: &str) -> Result<BTreeMap<String, MetadataEntry>, SceneError> {
    serde_json::from_str(text).map_err(|e| SceneError::MetadataParse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

impl AnatomyScene {
    pub fn from_sources(
        mesh_text: &str,
        metadata_text: &str,
        config: &SceneConfig,
    ) -> Result<Self, SceneError> {
        let objects = parse_obj(mesh_text)?;
        let metadata = parse_metadata(metadata_text)?;
        Self::from_objects(objects, &metadata, config)
    }

    pub fn from_objects(
        objects: Vec<ObjObject>,
        metadata: &BTreeMap<String, MetadataEntry>,
        config: &SceneConfig,
    ) -> Result<Self, SceneError> {
        if !(config.world_scale > 1.0) || !config.world_scale.is_finite() {
            return Err(SceneError::InvalidConfig(format!(
                "world_scale must exceed 1, got {}",
                config.world_scale
            )));
        }
        if !config.walk_barrier.is_valid() {
            return Err(SceneError::InvalidConfig("walk barrier is empty".into()));
        }
        if objects.is_empty() {
            return Err(SceneError::NoGeometry);
        }
        let dangling: Vec<String> = metadata
            .keys()
            .filter(|k| !objects.iter().any(|o| &o.name == *k))
            .cloned()
            .collect();
        if !dangling.is_empty() {
            return Err(SceneError::DanglingMetadata(dangling));
        }

        let mut structures = BTreeMap::new();
        let mut meshes = Vec::with_capacity(objects.len());
        for o in objects {
            let vertices = o.vertices.iter().map(|v| *v * config.world_scale).collect();
            let mesh = TriangleMesh::new(o.name.clone(), vertices, o.triangles).map_err(|source| {
                match source {
                    GeometryError::DegenerateTriangle { triangle, .. } => SceneError::ObjParse {
                        line: o.face_lines[triangle],
                        message: format!("degenerate triangle in `{}`", o.name),
                    },
                    source => SceneError::Geometry {
                        structure: o.name.clone(),
                        source,
                    },
                }
            })?;
            let info = match metadata.get(&o.name) {
                Some(m) => StructureInfo {
                    structure_id: o.name.clone(),
                    name: if m.name.trim().is_empty() { o.name.clone() } else { m.name.clone() },
                    description: m.description.clone(),
                    illustration: m.illustration.clone(),
                    category: m.category,
                },
                None => StructureInfo::fallback(&o.name),
            };
            meshes.push(mesh.clone());
            structures.insert(o.name, Structure { mesh, info });
        }
        let bvh = build_bvh(&meshes).map_err(|_| SceneError::NoGeometry)?;
        Ok(AnatomyScene {
            structures,
            bvh,
            world_scale: config.world_scale,
            walk_barrier: config.walk_barrier,
        })
    }

    /// The bundled sample scene, built from the in-crate generator.
    pub fn sample(config: &SceneConfig) -> Self {
        Self::from_sources(&fixture::skull_dome_obj(), &fixture::skull_dome_metadata(), config)
            .expect("sample scene is valid")
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn world_scale(&self) -> f64 {
        self.world_scale
    }

    pub fn walk_barrier(&self) -> WalkBarrier {
        self.walk_barrier
    }

    pub fn structures(&self) -> impl Iterator<Item = &Structure> {
        self.structures.values()
    }

    pub fn structure(&self, id: &str) -> Option<&Structure> {
        self.structures.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.structures.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.structures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.structures.is_empty()
    }

    pub fn handbook_lookup(&self, structure_id: &str) -> Result<&StructureInfo, SceneError> {
        self.structures
            .get(structure_id)
            .map(|s| &s.info)
            .ok_or_else(|| SceneError::NotFound(structure_id.to_owned()))
    }

    /// Nearest structure under `ray`, joined with its handbook record.
    pub fn pick_structure(&self, ray: &Ray) -> Option<(RayHit, &StructureInfo)> {
        let hit = self.bvh.ray_cast(ray, f64::MAX)?;
        let info = &self.structures[&hit.structure_id].info;
        Some((hit, info))
    }

    /// Metadata document for every structure, in the loader's input format.
    pub fn metadata_json(&self) -> String {
        let doc: BTreeMap<&str, MetadataEntry> = self
            .structures
            .iter()
            .map(|(id, s)| {
                (
                    id.as_str(),
                    MetadataEntry {
                        name: s.info.name.clone(),
                        description: s.info.description.clone(),
                        illustration: s.info.illustration.clone(),
                        category: s.info.category,
                    },
                )
            })
            .collect();
        serde_json::to_string_pretty(&doc).expect("metadata serializes")
    }

    /// SHA-256 over geometry, metadata and configuration in canonical order.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.world_scale.to_le_bytes());
        for v in [
            self.walk_barrier.min_x,
            self.walk_barrier.max_x,
            self.walk_barrier.min_z,
            self.walk_barrier.max_z,
        ] {
            h.update(v.to_le_bytes());
        }
        for (id, s) in &self.structures {
            h.update((id.len() as u64).to_le_bytes());
            h.update(id.as_bytes());
            for v in s.mesh.vertices() {
                for c in [v.x, v.y, v.z] {
                    h.update(c.to_le_bytes());
                }
            }
            for t in s.mesh.triangles() {
                for i in t {
                    h.update(i.to_le_bytes());
                }
            }
            h.update(serde_json::to_vec(&s.info).expect("info serializes"));
        }
        h.finalize().into()
    }
}

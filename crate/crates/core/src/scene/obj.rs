//! Minimal Wavefront OBJ reader: `o`, `v` and triangular `f` records.

use super::SceneError;
use crate::geometry::Vec3;

/// One named object with object-local vertex indices.
#[derive(Debug, Clone)]
pub struct ObjObject {
    pub name: String,
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Source line of each triangle, for error reporting.
    pub face_lines: Vec<usize>,
}

pub fn parse_obj(text: &str) -> Result<Vec<ObjObject>, SceneError> {
    let mut positions: Vec<Vec3> = Vec::new();
    let mut objects: Vec<ObjObject> = Vec::new();
    // Global vertex index -> local index, per current object.
    let mut remap: std::collections::HashMap<usize, u32> = std::collections::HashMap::new();

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let keyword = parts.next().unwrap_or_default();
        let err = |message: String| SceneError::ObjParse {
            line: line_no,
            message,
        };
        match keyword {
            "o" => {
                let name = parts.collect::<Vec<_>>().join(" ");
                if name.is_empty() {
                    return Err(err("object without a name".into()));
                }
                if objects.iter().any(|o| o.name == name) {
                    return Err(err(format!("duplicate object `{name}`")));
                }
                objects.push(ObjObject {
                    name,
                    vertices: Vec::new(),
                    triangles: Vec::new(),
                    face_lines: Vec::new(),
                });
                remap.clear();
            }
            "v" => {
                let coords: Vec<f64> = parts
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|e| err(format!("bad coordinate `{s}`: {e}"))))
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(err("vertex needs three coordinates".into()));
                }
                let v = Vec3::new(coords[0], coords[1], coords[2]);
                if !v.is_finite() {
                    return Err(err("vertex is not finite".into()));
                }
                positions.push(v);
            }
            "f" => {
                let Some(object) = objects.last_mut() else {
                    return Err(err("face before any `o` record".into()));
                };
                let refs: Vec<&str> = parts.collect();
                if refs.len() != 3 {
                    return Err(err(format!(
                        "only triangles are supported, face has {} vertices",
                        refs.len()
                    )));
                }
                let mut tri = [0u32; 3];
                for (slot, r) in tri.iter_mut().zip(&refs) {
                    let idx_text = r.split('/').next().unwrap_or("");
                    let idx: i64 = idx_text
                        .parse()
                        .map_err(|_| err(format!("bad vertex reference `{r}`")))?;
                    let global = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        positions.len() as i64 + idx
                    } else {
                        -1
                    };
                    if global < 0 || global as usize >= positions.len() {
                        return Err(err(format!("vertex reference `{r}` out of range")));
                    }
                    let global = global as usize;
                    *slot = *remap.entry(global).or_insert_with(|| {
                        object.vertices.push(positions[global]);
                        (object.vertices.len() - 1) as u32
                    });
                }
                object.triangles.push(tri);
                object.face_lines.push(line_no);
            }
            other => return Err(err(format!("unsupported record `{other}`"))),
        }
    }
    objects.retain(|o| !o.triangles.is_empty());
    Ok(objects)
}

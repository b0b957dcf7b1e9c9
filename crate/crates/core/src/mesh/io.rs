//! ASCII OBJ (vertices and faces only), binary STL import, and raw grid
//! export with a JSON sidecar.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::marching_cubes::ScalarGrid;
use crate::mesh::trimesh::TriMesh;
use crate::scalar::Scalar;

/// Serializes `v`/`f` records with shortest round-trip float formatting, so
/// identical meshes always produce identical bytes.
pub fn obj_string<T: Scalar>(mesh: &TriMesh<T>) -> String {
    let mut out = String::with_capacity(mesh.vertices.len() * 40 + mesh.faces.len() * 24);
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v[0].as_f64(), v[1].as_f64(), v[2].as_f64());
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn write_obj<T: Scalar>(mesh: &TriMesh<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, obj_string(mesh)).map_err(|e| Error::io(path, e))
}

/// Parses `v` and `f` records; polygons are fan-triangulated, texture and
/// normal references (`i/j/k`) are ignored, negative indices are relative.
pub fn parse_obj<T: Scalar>(text: &str, origin: &Path) -> Result<TriMesh<T>> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut tokens = line.split_whitespace();
        let bad = |what: &str| Error::format(origin, format!("line {}: {what}", lineno + 1));
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|_| bad("malformed vertex")))
                    .collect::<Result<_>>()?;
                if coords.len() != 3 {
                    return Err(bad("vertex needs three coordinates"));
                }
                vertices.push([T::c(coords[0]), T::c(coords[1]), T::c(coords[2])]);
            }
            Some("f") => {
                let idx: Vec<u32> = tokens
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| bad("malformed face index"))?;
                        let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        if resolved < 0 {
                            return Err(bad("face index out of range"));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(bad("face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces).map_err(|e| Error::format(origin, e.to_string()))
}

pub fn read_obj<T: Scalar>(path: impl AsRef<Path>) -> Result<TriMesh<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path)
}

/// Reads a binary STL, welding bit-identical vertices.
pub fn read_stl<T: Scalar>(path: impl AsRef<Path>) -> Result<TriMesh<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_stl(&bytes, path)
}

pub fn parse_stl<T: Scalar>(bytes: &[u8], origin: &Path) -> Result<TriMesh<T>> {
    if bytes.len() < 84 {
        return Err(Error::format(origin, "binary STL shorter than its header"));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().expect("4 bytes")) as usize;
    if bytes.len() < 84 + count * 50 {
        return Err(Error::format(
            origin,
            format!("header announces {count} triangles but the file is truncated"),
        ));
    }
    let mut welded: HashMap<[u32; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::with_capacity(count);
    for t in 0..count {
        let rec = &bytes[84 + t * 50..84 + (t + 1) * 50];
        let mut face = [0u32; 3];
        for (k, slot) in face.iter_mut().enumerate() {
            let off = 12 + k * 12;
            let bits: [u32; 3] = std::array::from_fn(|c| {
                u32::from_le_bytes(rec[off + c * 4..off + c * 4 + 4].try_into().expect("4 bytes"))
            });
            *slot = *welded.entry(bits).or_insert_with(|| {
                vertices.push(bits.map(|b| T::c(f32::from_bits(b) as f64)));
                vertices.len() as u32 - 1
            });
        }
        faces.push(face);
    }
    TriMesh::new(vertices, faces)
}

/// Reads `.obj` or binary `.stl` by extension.
pub fn read_mesh<T: Scalar>(path: impl AsRef<Path>) -> Result<TriMesh<T>> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("obj") => read_obj(path),
        Some("stl") => read_stl(path),
        _ => Err(Error::format(path, "unsupported mesh format (expected .obj or .stl)")),
    }
}

/// Sidecar describing a raw grid dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub resolution: [usize; 3],
    pub origin: [f64; 3],
    pub spacing: f64,
    pub dtype: String,
    pub order: String,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes values as little-endian `f32` (x fastest) plus `<stem>.json`.
pub fn write_grid<T: Scalar>(grid: &ScalarGrid<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(grid.values.len() * 4);
    for v in &grid.values {
        bytes.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let header = GridHeader {
        resolution: grid.resolution,
        origin: grid.origin.map(|o| o.as_f64()),
        spacing: grid.spacing.as_f64(),
        dtype: "float32-le".into(),
        order: "x-fastest".into(),
    };
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_string_pretty(&header)?).map_err(|e| Error::io(&side, e))
}

pub fn read_grid<T: Scalar>(path: impl AsRef<Path>) -> Result<ScalarGrid<T>> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    let header: GridHeader =
        serde_json::from_str(&fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?)?;
    if header.dtype != "float32-le" || header.order != "x-fastest" {
        return Err(Error::format(&side, "unsupported grid encoding"));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::format(path, "grid payload is not a whole number of f32 values"));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| T::c(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
        .collect();
    ScalarGrid::new(header.resolution, header.origin.map(T::c), T::c(header.spacing), values)
}

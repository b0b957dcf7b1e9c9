use inr_shape::mesh::TriMesh;
use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_PAYLOAD_BYTES: usize = 16 << 20;

/// Indexed triangle list as sent to clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshPayload {
    /// x, y, z per vertex.
    pub positions: Vec<f64>,
    /// Three vertex indices per triangle.
    pub indices: Vec<u32>,
    pub vertex_count: usize,
    pub face_count: usize,
    /// Faces in the full mesh; larger than `face_count` when truncated.
    pub total_faces: usize,
    pub truncated: bool,
}

impl MeshPayload {
    /// Full mesh if its JSON fits in `max_bytes`, otherwise the longest
    /// prefix of faces (with only the vertices they use) that does.
    pub fn from_mesh(mesh: &TriMesh<f64>, max_bytes: usize) -> Self {
        let full = Self::prefix(mesh, mesh.faces.len());
        if full.json_len() <= max_bytes {
            return full;
        }
        let (mut lo, mut hi) = (0, mesh.faces.len());
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if Self::prefix(mesh, mid).json_len() <= max_bytes {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        Self::prefix(mesh, lo)
    }

    fn prefix(mesh: &TriMesh<f64>, faces: usize) -> Self {
        let total_faces = mesh.faces.len();
        if faces == total_faces {
            return Self {
                positions: mesh.vertices.iter().flat_map(|v| *v).collect(),
                indices: mesh.faces.iter().flat_map(|f| *f).collect(),
                vertex_count: mesh.vertices.len(),
                face_count: total_faces,
                total_faces,
                truncated: false,
            };
        }
        let mut remap = vec![u32::MAX; mesh.vertices.len()];
        let mut positions = Vec::new();
        let mut indices = Vec::with_capacity(faces * 3);
        for face in &mesh.faces[..faces] {
            for &v in face {
                if remap[v as usize] == u32::MAX {
                    remap[v as usize] = (positions.len() / 3) as u32;
                    positions.extend_from_slice(&mesh.vertices[v as usize]);
                }
                indices.push(remap[v as usize]);
            }
        }
        Self {
            vertex_count: positions.len() / 3,
            positions,
            indices,
            face_count: faces,
            total_faces,
            truncated: true,
        }
    }

    fn json_len(&self) -> usize {
        serde_json::to_vec(self).map(|v| v.len()).unwrap_or(usize::MAX)
    }

    pub fn to_mesh(&self) -> inr_shape::Result<TriMesh<f64>> {
        let vertices = self.positions.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let faces = self.indices.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        TriMesh::new(vertices, faces)
    }
}

//! Triangle meshes and everything measured on them.

pub mod chamfer;
pub mod distance;
pub mod io;
pub mod marching_cubes;
mod mc_table;
pub mod measure;
pub mod normalize;
pub mod sampling;
pub mod trimesh;
pub mod vec3;

pub use chamfer::{chamfer_distance, chamfer_distance_seeded, DEFAULT_CHAMFER_SAMPLES};
pub use distance::{signed_distance, DistanceIndex};
pub use marching_cubes::{marching_cubes, ScalarGrid};
pub use measure::{
    cross_section_area, cross_section_area_with, mesh_volume, mirror_iou, reflect, voxelize, Occupancy,
    SectionMethod, SymmetryScore,
};
pub use normalize::{normalize_population, NormalizationTransform};
pub use sampling::sample_surface;
pub use trimesh::{box_mesh, icosphere, Topology, TriMesh};
pub use vec3::{Aabb, Point3};

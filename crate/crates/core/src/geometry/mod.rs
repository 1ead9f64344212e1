//! Renderable reconstruction representations and their file formats.

mod mesh;
mod obj;
mod ply;

pub use self::mesh::{Aabb, Model, PointCloud, TriMesh};
pub use self::obj::load_obj;
pub use self::ply::{load_ply, save_cloud_ply, save_mesh_ply, save_ply, PlyFormat};

use std::path::Path;

use crate::error::{Error, Result};

/// Loads a model by extension (`.ply` or `.obj`).
pub fn load_model(path: &Path) -> Result<Model> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("ply") => load_ply(path),
        Some("obj") => load_obj(path).map(Model::Mesh),
        _ => Err(Error::UnsupportedFormat(format!(
            "{}: expected a .ply or .obj model",
            path.display()
        ))),
    }
}

//! Synthetic degradations of a known-good model: texture noise, geometry
//! noise and mesh simplification. Each operator is a deterministic function
//! of the mesh and its parameters.

mod noise;
mod simplify;

pub use self::noise::{noise3, GradientNoise};
pub use self::simplify::simplify;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TriMesh;

/// Lattice offset that decorrelates the green channel's noise from red.
const OFFSET_G: Vector3<f64> = Vector3::new(17.17, 0.0, 0.0);
/// Same for blue.
const OFFSET_B: Vector3<f64> = Vector3::new(0.0, 17.17, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationParams {
    /// Maximum per-channel color offset.
    pub n_tex: f64,
    /// Maximum displacement along the normal, as a fraction of the scene extent.
    pub n_geom: f64,
    /// Fraction of vertices to eliminate.
    pub n_simp: f64,
    pub seed: u64,
    /// Noise cycles per bounding-box diagonal.
    pub frequency: f64,
}

impl Default for DegradationParams {
    fn default() -> Self {
        DegradationParams {
            n_tex: 0.0,
            n_geom: 0.0,
            n_simp: 0.0,
            seed: 0,
            frequency: 8.0,
        }
    }
}

impl DegradationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_tex >= 0.0 && self.n_tex.is_finite()) {
            return Err(Error::validation(format!("n_tex must be >= 0, got {}", self.n_tex)));
        }
        if !(self.n_geom >= 0.0 && self.n_geom.is_finite()) {
            return Err(Error::validation(format!("n_geom must be >= 0, got {}", self.n_geom)));
        }
        if !(0.0..1.0).contains(&self.n_simp) {
            return Err(Error::validation(format!("n_simp must be in [0, 1), got {}", self.n_simp)));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::validation(format!("frequency must be > 0, got {}", self.frequency)));
        }
        Ok(())
    }
}

/// Maps a vertex into noise space: `frequency * v / diagonal`.
fn noise_scale(mesh: &TriMesh, frequency: f64) -> Result<(f64, f64)> {
    let extent = mesh.bounding_box()?.extent();
    let diag = if extent > 0.0 { extent } else { 1.0 };
    Ok((frequency / diag, extent))
}

/// Perturbs vertex colors channel-wise by up to `n_tex`.
pub fn texture_noise(mesh: &TriMesh, params: &DegradationParams) -> Result<TriMesh> {
    params.validate()?;
    let colors = mesh
        .colors
        .as_ref()
        .ok_or_else(|| Error::validation("texture noise needs vertex colors"))?;
    let mut out = mesh.clone();
    if params.n_tex == 0.0 || mesh.vertices.is_empty() {
        return Ok(out);
    }
    let noise = GradientNoise::new(params.seed);
    let (s, _) = noise_scale(mesh, params.frequency)?;
    let offsets = [Vector3::zeros(), OFFSET_G, OFFSET_B];
    out.colors = Some(
        mesh.vertices
            .iter()
            .zip(colors)
            .map(|(v, c)| {
                let p = v * s;
                let mut c = *c;
                for (ch, off) in offsets.iter().enumerate() {
                    c[ch] = (c[ch] + params.n_tex * noise.sample(&(p + off))).clamp(0.0, 1.0);
                }
                c
            })
            .collect(),
    );
    Ok(out)
}

/// Moves each vertex along its normal by up to `n_geom * extent`, then
/// recomputes normals.
pub fn geometry_noise(mesh: &TriMesh, params: &DegradationParams) -> Result<TriMesh> {
    params.validate()?;
    if mesh.faces.is_empty() {
        return Err(Error::validation("geometry noise needs a mesh with faces"));
    }
    let normals = match &mesh.normals {
        Some(n) => n.clone(),
        None => mesh.clone().with_vertex_normals().normals.unwrap_or_default(),
    };
    let mut out = mesh.clone();
    if params.n_geom == 0.0 {
        return Ok(out);
    }
    let noise = GradientNoise::new(params.seed);
    let (s, extent) = noise_scale(mesh, params.frequency)?;
    let amp = params.n_geom * extent;
    for (v, n) in out.vertices.iter_mut().zip(&normals) {
        let d = amp * noise.sample(&(*v * s));
        *v += n * d;
    }
    out.compute_vertex_normals();
    Ok(out)
}

/// Applies all three operators in order: simplification, geometry noise,
/// texture noise. Zero-valued parameters are skipped.
pub fn degrade(mesh: &TriMesh, params: &DegradationParams) -> Result<TriMesh> {
    params.validate()?;
    let mut m = mesh.clone();
    if params.n_simp > 0.0 {
        m = simplify(&m, params.n_simp)?.0;
    }
    if params.n_geom > 0.0 {
        m = geometry_noise(&m, params)?;
    }
    if params.n_tex > 0.0 {
        m = texture_noise(&m, params)?;
    }
    Ok(m)
}

//! Procedural test scene: a vertex-colored sphere resting on a ground grid,
//! observed by a ring of cameras.
//!
//! Positions are rounded to `f32` and colors to 8-bit levels so the scene
//! survives a PLY round trip bit-exactly.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::Result;
use crate::geometry::{save_mesh_ply, PlyFormat, TriMesh};
use crate::raster::{render_mesh, RenderOptions};
use crate::scene::{PinholeCamera, Rgb, View, ViewManifest};

fn snap_position(p: Vector3<f64>) -> Vector3<f64> {
    p.map(|x| x as f32 as f64)
}

fn snap_color(c: Rgb) -> Rgb {
    c.map(|x| (x.clamp(0.0, 1.0) * 255.0).round() / 255.0)
}

/// Integer hash to `[0, 1)`.
fn hash01(mut x: u64) -> f64 {
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    x = x.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    x ^= x >> 33;
    (x >> 11) as f64 / (1u64 << 53) as f64
}

/// Latitude/longitude sphere. `color` receives the unit direction from the
/// center.
pub fn uv_sphere(
    center: Vector3<f64>,
    radius: f64,
    segments: u32,
    rings: u32,
    mut color: impl FnMut(&Vector3<f64>) -> Rgb,
) -> TriMesh {
    let mut dirs = vec![Vector3::new(0.0, 1.0, 0.0)];
    for r in 1..rings {
        let theta = PI * r as f64 / rings as f64;
        for s in 0..segments {
            let phi = 2.0 * PI * s as f64 / segments as f64;
            dirs.push(Vector3::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin()));
        }
    }
    dirs.push(Vector3::new(0.0, -1.0, 0.0));
    let south = (dirs.len() - 1) as u32;
    let ring = |r: u32, s: u32| 1 + (r - 1) * segments + (s % segments);
    let mut faces = Vec::new();
    // Outward-facing (counter-clockwise seen from outside).
    for s in 0..segments {
        faces.push([0, ring(1, s + 1), ring(1, s)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let (a, b, c, d) = (ring(r, s), ring(r, s + 1), ring(r + 1, s), ring(r + 1, s + 1));
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    for s in 0..segments {
        faces.push([south, ring(rings - 1, s), ring(rings - 1, s + 1)]);
    }
    let colors = dirs.iter().map(|d| snap_color(color(d))).collect();
    let vertices = dirs.iter().map(|d| snap_position(center + d * radius)).collect();
    let mut mesh = TriMesh::new(vertices, faces)
        .and_then(|m| m.with_colors(colors))
        .expect("sphere construction is consistent");
    mesh.compute_vertex_normals();
    mesh
}

/// Square grid in the `y = height` plane, facing `+y`.
pub fn ground_grid(half_size: f64, cells: u32, height: f64, mut color: impl FnMut(f64, f64) -> Rgb) -> TriMesh {
    let n = cells + 1;
    let mut vertices = Vec::with_capacity((n * n) as usize);
    let mut colors = Vec::with_capacity((n * n) as usize);
    for j in 0..n {
        for i in 0..n {
            let x = -half_size + 2.0 * half_size * i as f64 / cells as f64;
            let z = -half_size + 2.0 * half_size * j as f64 / cells as f64;
            vertices.push(snap_position(Vector3::new(x, height, z)));
            colors.push(snap_color(color(x, z)));
        }
    }
    let mut faces = Vec::with_capacity((2 * cells * cells) as usize);
    for j in 0..cells {
        for i in 0..cells {
            let a = j * n + i;
            faces.push([a, a + n, a + n + 1]);
            faces.push([a, a + n + 1, a + 1]);
        }
    }
    let mut mesh = TriMesh::new(vertices, faces)
        .and_then(|m| m.with_colors(colors))
        .expect("grid construction is consistent");
    mesh.compute_vertex_normals();
    mesh
}

/// Concatenates meshes that all carry vertex colors.
pub fn merge(meshes: &[TriMesh]) -> TriMesh {
    let mut out = TriMesh {
        colors: Some(Vec::new()),
        ..Default::default()
    };
    let with_normals = meshes.iter().all(|m| m.normals.is_some());
    let mut normals = Vec::new();
    for m in meshes {
        let base = out.vertices.len() as u32;
        out.vertices.extend_from_slice(&m.vertices);
        out.faces.extend(m.faces.iter().map(|f| f.map(|i| i + base)));
        if let (Some(dst), Some(src)) = (out.colors.as_mut(), m.colors.as_ref()) {
            dst.extend_from_slice(src);
        }
        if let Some(n) = &m.normals {
            normals.extend_from_slice(n);
        }
    }
    if with_normals {
        out.normals = Some(normals);
    }
    out
}

/// Ring of cameras around the origin looking at `target`.
pub fn camera_ring(
    count: usize,
    radius: f64,
    height: f64,
    target: Vector3<f64>,
    focal: f64,
    width: u32,
    image_height: u32,
) -> Result<Vec<PinholeCamera>> {
    (0..count)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / count as f64 + 0.1;
            let eye = Vector3::new(radius * a.cos(), height, radius * a.sin());
            PinholeCamera::look_at(eye, target, Vector3::y(), focal, width, image_height)
        })
        .collect()
}

/// The standard test scene plus its cameras.
#[derive(Debug, Clone)]
pub struct ProceduralScene {
    pub mesh: TriMesh,
    pub cameras: Vec<PinholeCamera>,
}

/// Vertex-colored sphere and ground (about 10k faces), 12 cameras on a
/// ring, 320x240 images.
pub fn procedural_scene() -> ProceduralScene {
    let sphere = uv_sphere(Vector3::new(0.0, 1.0, 0.0), 1.0, 64, 40, |d| {
        let stripes = 0.5 + 0.25 * (9.0 * d.y).sin() * (7.0 * d.x.atan2(d.z)).cos();
        let jitter = hash01(((d.x * 1e6) as i64 as u64).wrapping_mul(31) ^ ((d.y * 1e6) as i64 as u64).wrapping_mul(131) ^ ((d.z * 1e6) as i64 as u64));
        [
            0.15 + 0.7 * stripes,
            0.2 + 0.6 * jitter,
            0.85 - 0.6 * stripes * jitter,
        ]
    });
    let mut k = 0u64;
    let ground = ground_grid(3.0, 50, 0.0, |x, z| {
        k += 1;
        let checker = if ((x * 2.0).floor() + (z * 2.0).floor()) as i64 % 2 == 0 { 0.25 } else { 0.0 };
        let j = hash01(k);
        [0.3 + checker + 0.3 * j, 0.45 + 0.4 * hash01(k ^ 0x5555), 0.35 + checker * 0.5]
    });
    let mesh = merge(&[sphere, ground]);
    let cameras = camera_ring(12, 5.0, 2.5, Vector3::new(0.0, 0.6, 0.0), 260.0, 320, 240)
        .expect("ring cameras are valid");
    ProceduralScene { mesh, cameras }
}

impl ProceduralScene {
    /// Writes `model.ply`, one rendered photo per camera and `views.json`
    /// into `dir`, returning the manifest.
    pub fn write_dataset(&self, dir: &Path) -> Result<ViewManifest> {
        std::fs::create_dir_all(dir).map_err(|e| crate::Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        save_mesh_ply(&self.mesh, &dir.join("model.ply"), PlyFormat::BinaryLittleEndian)?;
        let mut views = Vec::with_capacity(self.cameras.len());
        for (i, cam) in self.cameras.iter().enumerate() {
            let id = format!("v{i:03}");
            let photo_path = dir.join(format!("{id}.png"));
            let out = render_mesh(&self.mesh, cam, &RenderOptions::default())?;
            out.color.save(&photo_path)?;
            views.push(View {
                id,
                photo_path,
                camera: cam.clone(),
            });
        }
        let manifest = ViewManifest::new(views)?;
        manifest.save(&dir.join("views.json"))?;
        Ok(manifest)
    }
}

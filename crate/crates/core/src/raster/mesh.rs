use nalgebra::{Vector2, Vector3};

use super::{
    empty_output, near_plane, rasterize, resolve, ColorSource, Fragment, PixelRect, Primitive,
    RenderOptions, RenderOutput, TextureFilter,
};
use crate::error::{Error, Result};
use crate::geometry::TriMesh;
use crate::scene::{PinholeCamera, Rgb, RgbImage};

/// A camera-space polygon corner carrying its barycentric coordinates with
/// respect to the original (unclipped) face.
#[derive(Debug, Clone, Copy)]
struct ClipVertex {
    pos: Vector3<f64>,
    bary: [f64; 3],
}

/// Screen-space triangle ready for scan conversion.
struct ScreenTri {
    xy: [(f64, f64); 3],
    inv_z: [f64; 3],
    bary: [[f64; 3]; 3],
    area: f64,
    /// Per-edge flag: edge `i` runs from vertex `i+1` to `i+2` and owns
    /// pixels exactly on it (top-left rule).
    owns_edge: [bool; 3],
    face: u32,
    rect: PixelRect,
}

#[inline]
fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

impl ScreenTri {
    fn new(cam: &PinholeCamera, verts: [ClipVertex; 3], face: u32) -> Option<ScreenTri> {
        let mut xy = verts.map(|v| cam.camera_to_pixel(&v.pos));
        let mut inv_z = verts.map(|v| 1.0 / v.pos.z);
        let mut bary = verts.map(|v| v.bary);
        let mut area = edge(xy[0], xy[1], xy[2]);
        if !(area != 0.0 && area.is_finite()) {
            return None;
        }
        if area < 0.0 {
            xy.swap(1, 2);
            inv_z.swap(1, 2);
            bary.swap(1, 2);
            area = -area;
        }
        // With positive area (y down), interior points give positive edge
        // values. An edge a->b is "top" when horizontal with dx > 0 and
        // "left" when dy < 0.
        let owns_edge = [0, 1, 2].map(|i| {
            let a = xy[(i + 1) % 3];
            let b = xy[(i + 2) % 3];
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            (dy == 0.0 && dx > 0.0) || dy < 0.0
        });
        let min = (
            xy[0].0.min(xy[1].0).min(xy[2].0),
            xy[0].1.min(xy[1].1).min(xy[2].1),
        );
        let max = (
            xy[0].0.max(xy[1].0).max(xy[2].0),
            xy[0].1.max(xy[1].1).max(xy[2].1),
        );
        let rect = PixelRect::covering(min, max, cam.width, cam.height)?;
        Some(ScreenTri {
            xy,
            inv_z,
            bary,
            area,
            owns_edge,
            face,
            rect,
        })
    }
}

impl Primitive for ScreenTri {
    fn rect(&self) -> PixelRect {
        self.rect
    }

    #[inline]
    fn fragment(&self, x: f64, y: f64) -> Option<Fragment> {
        let p = (x, y);
        let w = [
            edge(self.xy[1], self.xy[2], p),
            edge(self.xy[2], self.xy[0], p),
            edge(self.xy[0], self.xy[1], p),
        ];
        for i in 0..3 {
            if w[i] < 0.0 || (w[i] == 0.0 && !self.owns_edge[i]) {
                return None;
            }
        }
        // Perspective-correct weights: screen barycentrics divided by depth.
        let a = [0, 1, 2].map(|i| w[i] / self.area * self.inv_z[i]);
        let s = a[0] + a[1] + a[2];
        if !(s > 0.0) {
            return None;
        }
        let mut bary = [0.0; 3];
        for i in 0..3 {
            let t = a[i] / s;
            for (b, src) in bary.iter_mut().zip(self.bary[i]) {
                *b += t * src;
            }
        }
        Some(Fragment {
            depth: 1.0 / s,
            id: self.face,
            bary,
        })
    }
}

/// Clips a camera-space triangle against `z >= near` (Sutherland-Hodgman).
fn clip_near(tri: [ClipVertex; 3], near: f64) -> Vec<ClipVertex> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let cur = tri[i];
        let next = tri[(i + 1) % 3];
        let cur_in = cur.pos.z >= near;
        let next_in = next.pos.z >= near;
        if cur_in {
            out.push(cur);
        }
        if cur_in != next_in {
            let t = (near - cur.pos.z) / (next.pos.z - cur.pos.z);
            let mut bary = [0.0; 3];
            for k in 0..3 {
                bary[k] = cur.bary[k] + t * (next.bary[k] - cur.bary[k]);
            }
            let mut pos = cur.pos + (next.pos - cur.pos) * t;
            pos.z = near;
            out.push(ClipVertex { pos, bary });
        }
    }
    out
}

fn setup(mesh: &TriMesh, cam: &PinholeCamera, opts: &RenderOptions, near: f64) -> Vec<ScreenTri> {
    let cam_verts: Vec<Vector3<f64>> = mesh.vertices.iter().map(|v| cam.to_camera(v)).collect();
    let mut tris = Vec::with_capacity(mesh.faces.len());
    const CORNERS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for (fi, f) in mesh.faces.iter().enumerate() {
        let p = f.map(|i| cam_verts[i as usize]);
        if opts.backface_culling {
            let n = (p[1] - p[0]).cross(&(p[2] - p[0]));
            if n.dot(&p[0]) >= 0.0 {
                continue;
            }
        }
        let corners = [0, 1, 2].map(|i| ClipVertex {
            pos: p[i],
            bary: CORNERS[i],
        });
        if p.iter().all(|v| v.z >= near) {
            tris.extend(ScreenTri::new(cam, corners, fi as u32));
            continue;
        }
        let poly = clip_near(corners, near);
        for k in 1..poly.len().saturating_sub(1) {
            tris.extend(ScreenTri::new(cam, [poly[0], poly[k], poly[k + 1]], fi as u32));
        }
    }
    tris
}

enum Shader<'a> {
    Vertex(&'a [Rgb]),
    Texture {
        uvs: &'a [Vector2<f64>],
        tex: &'a RgbImage,
        filter: TextureFilter,
    },
}

/// Samples `tex` at OBJ-style uv (v up) with clamp-to-edge addressing.
pub(crate) fn sample_texture(tex: &RgbImage, uv: Vector2<f64>, filter: TextureFilter) -> Rgb {
    let (w, h) = (tex.width() as f64, tex.height() as f64);
    let tx = uv.x * w - 0.5;
    let ty = (1.0 - uv.y) * h - 0.5;
    let clamp_x = |x: f64| x.clamp(0.0, w - 1.0) as u32;
    let clamp_y = |y: f64| y.clamp(0.0, h - 1.0) as u32;
    match filter {
        TextureFilter::Nearest => tex.get(clamp_x((tx + 0.5).floor()), clamp_y((ty + 0.5).floor())),
        TextureFilter::Bilinear => {
            let x0 = tx.floor();
            let y0 = ty.floor();
            let fx = tx - x0;
            let fy = ty - y0;
            let c00 = tex.get(clamp_x(x0), clamp_y(y0));
            let c10 = tex.get(clamp_x(x0 + 1.0), clamp_y(y0));
            let c01 = tex.get(clamp_x(x0), clamp_y(y0 + 1.0));
            let c11 = tex.get(clamp_x(x0 + 1.0), clamp_y(y0 + 1.0));
            let mut out = [0.0; 3];
            for c in 0..3 {
                let top = c00[c] + fx * (c10[c] - c00[c]);
                let bottom = c01[c] + fx * (c11[c] - c01[c]);
                out[c] = top + fy * (bottom - top);
            }
            out
        }
    }
}

/// Renders an unlit mesh from `camera`.
pub fn render_mesh(mesh: &TriMesh, camera: &PinholeCamera, opts: &RenderOptions) -> Result<RenderOutput> {
    mesh.validate()?;
    let textured = match (&mesh.uvs, &mesh.texture) {
        (Some(uvs), Some(tex)) => Some((uvs.as_slice(), tex)),
        _ => None,
    };
    let shader = match (opts.color_source, textured, mesh.colors.as_deref()) {
        (ColorSource::Auto | ColorSource::Texture, Some((uvs, tex)), _) => Shader::Texture {
            uvs,
            tex,
            filter: opts.texture_filter,
        },
        (ColorSource::Auto | ColorSource::VertexColors, _, Some(colors)) => Shader::Vertex(colors),
        (ColorSource::Texture, None, _) => {
            return Err(Error::validation("texture rendering requested but the mesh has no texture"))
        }
        _ => return Err(Error::validation("mesh has neither vertex colors nor a texture")),
    };
    let (w, h) = (camera.width, camera.height);
    if mesh.faces.is_empty() {
        return Ok(empty_output(w, h));
    }
    let near = near_plane(mesh.bounding_box()?.extent());
    let tris = setup(mesh, camera, opts, near);
    let frags = rasterize(&tris, w, h);
    resolve(frags, w, h, |fid, b| {
        let f = mesh.faces[fid as usize];
        match &shader {
            Shader::Vertex(colors) => {
                let mut c = [0.0; 3];
                for k in 0..3 {
                    let src = colors[f[k] as usize];
                    for ch in 0..3 {
                        c[ch] += b[k] * src[ch];
                    }
                }
                c
            }
            Shader::Texture { uvs, tex, filter } => {
                let uv = uvs[f[0] as usize] * b[0] + uvs[f[1] as usize] * b[1] + uvs[f[2] as usize] * b[2];
                sample_texture(tex, uv, *filter)
            }
        }
    })
}

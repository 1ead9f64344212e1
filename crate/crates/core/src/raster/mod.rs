//! Deterministic z-buffered software renderer.
//!
//! Rasterization works on horizontal bands of rows that are processed in
//! parallel; every band sees all primitives in the same order and a pixel is
//! overwritten only by a fragment with smaller `(depth, primitive id)`, so
//! output is independent of scheduling and thread count.

mod knn;
mod mesh;
mod splat;

pub use self::knn::estimate_splat_radii;
pub use self::mesh::render_mesh;
pub use self::splat::render_pointcloud;

use rayon::prelude::*;

use crate::geometry::Model;
use crate::error::Result;
use crate::scene::{Mask, PinholeCamera, RgbImage};

/// Marks pixels no primitive covered.
pub const NO_PRIMITIVE: u32 = u32::MAX;

const BAND_ROWS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Shading {
    /// Albedo only; no lighting.
    #[default]
    Unlit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TextureFilter {
    Nearest,
    #[default]
    Bilinear,
}

/// Which per-vertex source provides mesh color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColorSource {
    /// Texture when the mesh has one, vertex colors otherwise.
    #[default]
    Auto,
    VertexColors,
    Texture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RenderOptions {
    pub shading: Shading,
    pub texture_filter: TextureFilter,
    pub backface_culling: bool,
    pub color_source: ColorSource,
}

/// Everything one rephoto produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub color: RgbImage,
    pub mask: Mask,
    /// Camera-space depth, `+inf` where nothing was rendered.
    pub depth: Vec<f64>,
    /// Face (mesh) or point (cloud) index, [`NO_PRIMITIVE`] where invalid.
    pub faceid: Vec<u32>,
    /// Barycentric coordinates within the face; `(1, 0, 0)` for splats.
    pub bary: Vec<[f64; 3]>,
}

impl RenderOutput {
    pub fn width(&self) -> u32 {
        self.color.width()
    }

    pub fn height(&self) -> u32 {
        self.color.height()
    }

    /// Fraction of rendered pixels.
    pub fn completeness(&self) -> f64 {
        crate::metrics::completeness(&self.mask)
    }
}

/// Renders either representation. Point clouds must carry splat radii.
pub fn render_model(model: &Model, camera: &PinholeCamera, opts: &RenderOptions) -> Result<RenderOutput> {
    match model {
        Model::Mesh(m) => render_mesh(m, camera, opts),
        Model::Cloud(c) => render_pointcloud(c, camera),
    }
}

#[derive(Debug, Clone, Copy)]
struct Fragment {
    depth: f64,
    id: u32,
    bary: [f64; 3],
}

impl Fragment {
    const EMPTY: Fragment = Fragment {
        depth: f64::INFINITY,
        id: NO_PRIMITIVE,
        bary: [0.0; 3],
    };

    #[inline]
    fn beats(&self, other: &Fragment) -> bool {
        self.depth < other.depth || (self.depth == other.depth && self.id < other.id)
    }
}

/// Pixel-space bounding box, inclusive.
#[derive(Debug, Clone, Copy)]
struct PixelRect {
    x0: u32,
    x1: u32,
    y0: u32,
    y1: u32,
}

impl PixelRect {
    /// Pixel centers (integer coordinates) inside `[min, max]`, clipped to
    /// the image. `None` when empty.
    fn covering(min: (f64, f64), max: (f64, f64), width: u32, height: u32) -> Option<PixelRect> {
        let lo = |v: f64| v.ceil().max(0.0);
        let x0 = lo(min.0);
        let y0 = lo(min.1);
        let x1 = max.0.floor().min(width as f64 - 1.0);
        let y1 = max.1.floor().min(height as f64 - 1.0);
        if !(x0 <= x1 && y0 <= y1) {
            return None;
        }
        Some(PixelRect {
            x0: x0 as u32,
            x1: x1 as u32,
            y0: y0 as u32,
            y1: y1 as u32,
        })
    }
}

trait Primitive: Sync {
    fn rect(&self) -> PixelRect;
    /// Fragment at pixel center `(x, y)` or `None` if not covered.
    fn fragment(&self, x: f64, y: f64) -> Option<Fragment>;
}

/// Z-buffers `prims` into a `width x height` fragment buffer.
fn rasterize<P: Primitive>(prims: &[P], width: u32, height: u32) -> Vec<Fragment> {
    let w = width as usize;
    let mut frags = vec![Fragment::EMPTY; w * height as usize];
    frags
        .par_chunks_mut(w * BAND_ROWS)
        .enumerate()
        .for_each(|(band, rows)| {
            let band_y0 = (band * BAND_ROWS) as u32;
            let band_y1 = band_y0 + (rows.len() / w) as u32 - 1;
            for prim in prims {
                let r = prim.rect();
                if r.y1 < band_y0 || r.y0 > band_y1 {
                    continue;
                }
                for y in r.y0.max(band_y0)..=r.y1.min(band_y1) {
                    let row = &mut rows[(y - band_y0) as usize * w..][..w];
                    for x in r.x0..=r.x1 {
                        if let Some(f) = prim.fragment(x as f64, y as f64) {
                            let slot = &mut row[x as usize];
                            if f.beats(slot) {
                                *slot = f;
                            }
                        }
                    }
                }
            }
        });
    frags
}

/// Resolves fragments into output buffers, shading covered pixels with `shade(id, bary)`.
fn resolve<F>(frags: Vec<Fragment>, width: u32, height: u32, shade: F) -> Result<RenderOutput>
where
    F: Fn(u32, [f64; 3]) -> [f64; 3] + Sync,
{
    let colors: Vec<[f64; 3]> = frags
        .par_iter()
        .map(|f| if f.id == NO_PRIMITIVE { [0.0; 3] } else { shade(f.id, f.bary) })
        .collect();
    let color = RgbImage::from_pixels(width, height, colors)?;
    let mask = Mask::from_vec(width, height, frags.iter().map(|f| f.id != NO_PRIMITIVE).collect())?;
    Ok(RenderOutput {
        color,
        mask,
        depth: frags.iter().map(|f| f.depth).collect(),
        faceid: frags.iter().map(|f| f.id).collect(),
        bary: frags.iter().map(|f| f.bary).collect(),
    })
}

fn empty_output(width: u32, height: u32) -> RenderOutput {
    let n = width as usize * height as usize;
    RenderOutput {
        color: RgbImage::new(width, height, [0.0; 3]),
        mask: Mask::new(width, height, false),
        depth: vec![f64::INFINITY; n],
        faceid: vec![NO_PRIMITIVE; n],
        bary: vec![[0.0; 3]; n],
    }
}

/// Near clipping distance derived from the scene size.
fn near_plane(extent: f64) -> f64 {
    let near = 1e-6 * extent;
    if near > 0.0 && near.is_finite() {
        near
    } else {
        f64::MIN_POSITIVE
    }
}

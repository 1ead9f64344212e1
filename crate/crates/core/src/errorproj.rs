//! Projecting per-pixel error images back onto model vertices.
//!
//! Each defined error pixel is transported to the primitive the rasterizer
//! recorded for it. For meshes the error is split over the face's three
//! vertices by barycentric weight; for point clouds the covering point gets
//! full weight. Vertex errors are the weighted mean of everything that
//! landed on them, displayed with a percentile-normalized jet colormap.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{save_mesh_ply, Model, PlyFormat, TriMesh};
use crate::harness::percentile;
use crate::metrics::ErrorImage;
use crate::raster::{render_model, RenderOptions, RenderOutput, NO_PRIMITIVE};
use crate::scene::{PinholeCamera, Rgb};

/// Color of vertices no error pixel reached.
pub const UNCOVERED_COLOR: Rgb = [0.5, 0.5, 0.5];

/// Weighted error sums per vertex.
///
/// Sums are kept relative to the first error each vertex received, so a
/// vertex that only ever sees one value has exactly that value as its mean.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexErrorField {
    reference: Vec<f64>,
    offset_sum: Vec<f64>,
    weight: Vec<f64>,
}

impl VertexErrorField {
    pub fn new(vertex_count: usize) -> Self {
        VertexErrorField {
            reference: vec![0.0; vertex_count],
            offset_sum: vec![0.0; vertex_count],
            weight: vec![0.0; vertex_count],
        }
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    /// Weighted error sum of vertex `i`.
    pub fn sum(&self, i: usize) -> f64 {
        self.reference[i] * self.weight[i] + self.offset_sum[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    /// Mean error of vertex `i`, `None` when nothing reached it.
    pub fn mean(&self, i: usize) -> Option<f64> {
        (self.weight[i] > 0.0).then(|| self.reference[i] + self.offset_sum[i] / self.weight[i])
    }

    pub fn means(&self) -> Vec<Option<f64>> {
        (0..self.len()).map(|i| self.mean(i)).collect()
    }

    pub fn covered_count(&self) -> usize {
        self.weight.iter().filter(|&&w| w > 0.0).count()
    }

    /// Adds another field's sums, e.g. a partial field from another view.
    pub fn merge(&mut self, other: &VertexErrorField) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "error fields cover {} and {} vertices",
                self.len(),
                other.len()
            )));
        }
        for i in 0..self.len() {
            if other.weight[i] == 0.0 {
                continue;
            }
            if self.weight[i] == 0.0 {
                self.reference[i] = other.reference[i];
                self.offset_sum[i] = other.offset_sum[i];
            } else {
                self.offset_sum[i] +=
                    other.weight[i] * (other.reference[i] - self.reference[i]) + other.offset_sum[i];
            }
            self.weight[i] += other.weight[i];
        }
        Ok(())
    }

    fn add(&mut self, vertex: usize, err: f64, w: f64) {
        if w <= 0.0 {
            return;
        }
        if self.weight[vertex] == 0.0 {
            self.reference[vertex] = err;
        }
        self.offset_sum[vertex] += w * (err - self.reference[vertex]);
        self.weight[vertex] += w;
    }
}

/// Adds one view's error image to `field`. `render` must be the render of
/// `model` from the error image's camera.
pub fn accumulate(field: &mut VertexErrorField, model: &Model, render: &RenderOutput, error: &ErrorImage) -> Result<()> {
    if field.len() != model.vertex_count() {
        return Err(Error::DimensionMismatch(format!(
            "error field has {} vertices, model has {}",
            field.len(),
            model.vertex_count()
        )));
    }
    if (render.width(), render.height()) != (error.width(), error.height()) {
        return Err(Error::DimensionMismatch(format!(
            "render is {}x{}, error image is {}x{}",
            render.width(),
            render.height(),
            error.width(),
            error.height()
        )));
    }
    let valid = render.mask.as_slice();
    for (i, &id) in render.faceid.iter().enumerate() {
        if id == NO_PRIMITIVE || !valid[i] {
            continue;
        }
        let Some(err) = error.get_index(i) else { continue };
        match model {
            Model::Mesh(mesh) => {
                let face = mesh.faces.get(id as usize).ok_or_else(|| {
                    Error::Invariant(format!("pixel {i} references face {id}, mesh has {}", mesh.faces.len()))
                })?;
                for (k, &v) in face.iter().enumerate() {
                    field.add(v as usize, err, render.bary[i][k]);
                }
            }
            Model::Cloud(cloud) => {
                if id as usize >= cloud.points.len() {
                    return Err(Error::Invariant(format!(
                        "pixel {i} references point {id}, cloud has {}",
                        cloud.points.len()
                    )));
                }
                field.add(id as usize, err, 1.0);
            }
        }
    }
    Ok(())
}

/// Renders `model` from every camera and accumulates the matching error
/// images. Views run in parallel; partial fields are merged in input order.
pub fn project_errors(
    model: &Model,
    views: &[(PinholeCamera, ErrorImage)],
    opts: &RenderOptions,
) -> Result<VertexErrorField> {
    let partials: Vec<VertexErrorField> = views
        .par_iter()
        .map(|(camera, error)| {
            let render = render_model(model, camera, opts)?;
            let mut field = VertexErrorField::new(model.vertex_count());
            accumulate(&mut field, model, &render, error)?;
            Ok(field)
        })
        .collect::<Result<_>>()?;
    let mut field = VertexErrorField::new(model.vertex_count());
    for p in &partials {
        field.merge(p)?;
    }
    Ok(field)
}

/// Maps values to `[0, 1]` between their `lo` and `hi` percentiles,
/// clamping outside. All zeros when the two percentiles coincide.
pub fn normalize_percentile(values: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::validation("no defined values to normalize"));
    }
    if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo > hi {
        return Err(Error::validation(format!("invalid percentile range [{lo}, {hi}]")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("cannot normalize non-finite values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let p_lo = percentile(&sorted, lo);
    let p_hi = percentile(&sorted, hi);
    if p_hi <= p_lo {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|&e| ((e - p_lo) / (p_hi - p_lo)).clamp(0.0, 1.0)).collect())
}

/// The "jet" colormap: dark blue at 0 through cyan, yellow to dark red at 1.
pub fn jet(t: f64) -> Rgb {
    let ramp = |c: f64| (1.5 - (4.0 * t - c).abs()).clamp(0.0, 1.0);
    [ramp(3.0), ramp(2.0), ramp(1.0)]
}

/// Per-vertex display colors: jet of the 2.5–97.5 percentile normalized
/// mean, gray for uncovered vertices.
pub fn error_colors(field: &VertexErrorField) -> Result<Vec<Rgb>> {
    let means = field.means();
    let defined: Vec<f64> = means.iter().flatten().copied().collect();
    let t = normalize_percentile(&defined, 2.5, 97.5)?;
    let mut t = t.into_iter();
    Ok(means
        .iter()
        .map(|m| match m {
            Some(_) => jet(t.next().expect("one t per defined mean")),
            None => UNCOVERED_COLOR,
        })
        .collect())
}

/// Writes `mesh` with error colors as binary PLY. Geometry is unchanged.
pub fn export_error_mesh(mesh: &TriMesh, field: &VertexErrorField, path: &Path) -> Result<()> {
    if field.len() != mesh.vertices.len() {
        return Err(Error::DimensionMismatch(format!(
            "error field has {} vertices, mesh has {}",
            field.len(),
            mesh.vertices.len()
        )));
    }
    let colored = TriMesh {
        colors: Some(error_colors(field)?),
        uvs: None,
        texture: None,
        ..mesh.clone()
    };
    save_mesh_ply(&colored, path, PlyFormat::BinaryLittleEndian)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{load_ply, PointCloud};
    use crate::raster::render_mesh;
    use nalgebra::Vector3;

    fn camera() -> PinholeCamera {
        PinholeCamera::look_at(
            Vector3::new(0.0, 0.0, -3.0),
            Vector3::zeros(),
            Vector3::y(),
            60.0,
            64,
            64,
        )
        .unwrap()
    }

    fn triangle() -> TriMesh {
        TriMesh::new(
            vec![
                Vector3::new(-1.0, -1.0, 0.0),
                Vector3::new(1.0, -1.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
        .with_colors(vec![[1.0; 3]; 3])
        .unwrap()
    }

    fn constant_error(w: u32, h: u32, v: f64) -> ErrorImage {
        let mut e = ErrorImage::undefined(w, h);
        for i in 0..(w * h) as usize {
            e.set_index(i, v);
        }
        e
    }

    #[test]
    fn constant_error_gives_constant_means() {
        let mesh = triangle();
        let cam = camera();
        let opts = RenderOptions { backface_culling: false, ..Default::default() };
        let render = render_mesh(&mesh, &cam, &opts).unwrap();
        assert!(render.mask.count_valid() > 100);
        let model = Model::Mesh(mesh);
        let mut field = VertexErrorField::new(3);
        accumulate(&mut field, &model, &render, &constant_error(64, 64, 0.3)).unwrap();
        for i in 0..3 {
            assert_eq!(field.mean(i), Some(0.3));
        }
    }

    #[test]
    fn single_pixel_barycentric_split() {
        let model = Model::Mesh(triangle());
        let mut render = render_mesh(&triangle(), &camera(), &RenderOptions::default()).unwrap();
        render.faceid.iter_mut().for_each(|f| *f = NO_PRIMITIVE);
        render.faceid[0] = 0;
        render.mask = crate::scene::Mask::from_fn(64, 64, |x, y| x == 0 && y == 0);
        render.bary[0] = [0.5, 0.25, 0.25];
        let mut field = VertexErrorField::new(3);
        accumulate(&mut field, &model, &render, &constant_error(64, 64, 1.0)).unwrap();
        assert_eq!([field.sum(0), field.sum(1), field.sum(2)], [0.5, 0.25, 0.25]);
        assert_eq!(field.weights(), &[0.5, 0.25, 0.25]);
    }

    #[test]
    fn point_cloud_gets_full_weight() {
        let mut cloud = PointCloud::new(vec![Vector3::zeros(), Vector3::new(0.0, 0.0, 50.0)], vec![[1.0; 3]; 2]).unwrap();
        cloud.radii = Some(vec![0.1, 0.1]);
        let model = Model::Cloud(cloud);
        let field = project_errors(&model, &[(camera(), constant_error(64, 64, 2.0))], &RenderOptions::default()).unwrap();
        assert_eq!(field.mean(0), Some(2.0));
        assert_eq!(field.weights()[0], render_model(&model, &camera(), &RenderOptions::default()).unwrap().mask.count_valid() as f64);
        // Hidden behind the first point.
        assert_eq!(field.mean(1), None);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let model = Model::Mesh(triangle());
        let render = render_mesh(&triangle(), &camera(), &RenderOptions::default()).unwrap();
        let mut field = VertexErrorField::new(3);
        assert!(accumulate(&mut field, &model, &render, &constant_error(32, 32, 1.0)).is_err());
        let mut short = VertexErrorField::new(2);
        assert!(accumulate(&mut short, &model, &render, &constant_error(64, 64, 1.0)).is_err());
    }

    #[test]
    fn ladder_percentiles() {
        let values: Vec<f64> = (1..=1000).map(f64::from).collect();
        // Sorting oracle: rank r = p/100 * (n - 1), interpolate neighbours.
        let oracle = |p: f64| {
            let r = p / 100.0 * 999.0;
            let k = r.floor();
            values[k as usize] + (r - k) * (values[k as usize + 1] - values[k as usize])
        };
        assert!((percentile(&values, 2.5) - 25.975).abs() < 1e-9);
        assert!((percentile(&values, 97.5) - 975.025).abs() < 1e-9);
        assert!((oracle(2.5) - 25.975).abs() < 1e-9);
        let t = normalize_percentile(&values, 2.5, 97.5).unwrap();
        let expect = (500.0 - 25.975) / (975.025 - 25.975);
        assert!((t[499] - expect).abs() < 1e-12);
        assert!((t[499] - 0.4995).abs() < 1e-4);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[999], 1.0);
    }

    #[test]
    fn degenerate_normalization() {
        assert_eq!(normalize_percentile(&[0.4; 7], 2.5, 97.5).unwrap(), vec![0.0; 7]);
        assert!(normalize_percentile(&[], 2.5, 97.5).is_err());
    }

    #[test]
    fn jet_endpoints() {
        assert_eq!(jet(0.0), [0.0, 0.0, 0.5]);
        assert_eq!(jet(0.5), [0.5, 1.0, 0.5]);
        assert_eq!(jet(1.0), [0.5, 0.0, 0.0]);
    }

    #[test]
    fn merge_matches_single_accumulation() {
        let mut whole = VertexErrorField::new(2);
        let mut a = VertexErrorField::new(2);
        let mut b = VertexErrorField::new(2);
        for (k, (e, w)) in [(0.25, 0.5), (0.75, 0.25), (0.5, 1.0), (2.0, 0.125)].into_iter().enumerate() {
            whole.add(k % 2, e, w);
            if k < 2 { a.add(k % 2, e, w) } else { b.add(k % 2, e, w) }
        }
        a.merge(&b).unwrap();
        for i in 0..2 {
            assert!((a.mean(i).unwrap() - whole.mean(i).unwrap()).abs() < 1e-15);
            assert_eq!(a.weights()[i], whole.weights()[i]);
        }
        assert!((whole.mean(0).unwrap() - (0.25 * 0.5 + 0.5) / 1.5).abs() < 1e-15);
    }

    #[test]
    fn uncovered_vertex_is_gray() {
        let mut field = VertexErrorField::new(4);
        field.add(0, 0.1, 1.0);
        field.add(1, 0.2, 1.0);
        field.add(2, 0.3, 1.0);
        let colors = error_colors(&field).unwrap();
        assert_eq!(colors[3], UNCOVERED_COLOR);
        assert_eq!(colors[0], jet(0.0));
        assert_eq!(colors[2], jet(1.0));
    }

    #[test]
    fn export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("err.ply");
        let mesh = crate::synth::uv_sphere(Vector3::zeros(), 1.0, 8, 6, |_| [1.0; 3]);
        let mut field = VertexErrorField::new(mesh.vertices.len());
        for i in 0..mesh.vertices.len() - 1 {
            field.add(i, i as f64, 1.0);
        }
        export_error_mesh(&mesh, &field, &path).unwrap();
        let back = load_ply(&path).unwrap().into_mesh().unwrap();
        assert_eq!(back.vertices.len(), mesh.vertices.len());
        assert_eq!(back.faces, mesh.faces);
        let colors = back.colors.unwrap();
        assert_eq!(*colors.last().unwrap(), [128.0 / 255.0; 3]);
    }
}

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};
use crate::scene::{Rgb, RgbImage};

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn from_points(points: &[Vector3<f64>]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::validation("bounding box of empty geometry"))?;
        let mut bb = Aabb {
            min: *first,
            max: *first,
        };
        for p in &points[1..] {
            bb.min = bb.min.inf(p);
            bb.max = bb.max.sup(p);
        }
        Ok(bb)
    }

    /// Diagonal length, used as the scene's extent.
    pub fn extent(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn center(&self) -> Vector3<f64> {
        (self.min + self.max) / 2.0
    }
}

/// Triangle mesh with optional per-vertex attributes.
///
/// `colors` and `uvs` are alternative color sources; `uvs` always come with
/// a `texture`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[u32; 3]>,
    pub colors: Option<Vec<Rgb>>,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub uvs: Option<Vec<Vector2<f64>>>,
    pub texture: Option<RgbImage>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = TriMesh {
            vertices,
            faces,
            ..Default::default()
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn with_colors(mut self, colors: Vec<Rgb>) -> Result<Self> {
        self.colors = Some(colors);
        self.validate()?;
        Ok(self)
    }

    pub fn with_texture(mut self, uvs: Vec<Vector2<f64>>, texture: RgbImage) -> Result<Self> {
        self.uvs = Some(uvs);
        self.texture = Some(texture);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if let Some(f) = self.faces.iter().find(|f| f.iter().any(|&i| i as usize >= n)) {
            return Err(Error::validation(format!(
                "face {f:?} references a vertex beyond {n}"
            )));
        }
        let check_len = |what: &str, len: Option<usize>| match len {
            Some(l) if l != n => Err(Error::validation(format!(
                "{what} has {l} entries for {n} vertices"
            ))),
            _ => Ok(()),
        };
        check_len("colors", self.colors.as_ref().map(Vec::len))?;
        check_len("normals", self.normals.as_ref().map(Vec::len))?;
        check_len("uvs", self.uvs.as_ref().map(Vec::len))?;
        if self.uvs.is_some() != self.texture.is_some() {
            return Err(Error::validation(
                "texture coordinates and texture image must come together",
            ));
        }
        Ok(())
    }

    pub fn bounding_box(&self) -> Result<Aabb> {
        Aabb::from_points(&self.vertices)
    }

    /// Area-weighted vertex normals (sum of un-normalized face cross
    /// products). Vertices whose sum vanishes get `(0, 0, 1)`; their indices
    /// are returned.
    pub fn compute_vertex_normals(&mut self) -> Vec<u32> {
        let mut acc = vec![Vector3::zeros(); self.vertices.len()];
        for f in &self.faces {
            let [a, b, c] = f.map(|i| self.vertices[i as usize]);
            let n = (b - a).cross(&(c - a));
            for &i in f {
                acc[i as usize] += n;
            }
        }
        let mut flagged = Vec::new();
        let normals = acc
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                let len = n.norm();
                if len > 0.0 && len.is_finite() {
                    n / len
                } else {
                    flagged.push(i as u32);
                    Vector3::z()
                }
            })
            .collect();
        self.normals = Some(normals);
        flagged
    }

    pub fn with_vertex_normals(mut self) -> Self {
        self.compute_vertex_normals();
        self
    }
}

/// Colored point cloud, rendered with splats.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub colors: Vec<Rgb>,
    pub normals: Option<Vec<Vector3<f64>>>,
    /// Splat radius per point, world units.
    pub radii: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, colors: Vec<Rgb>) -> Result<Self> {
        let cloud = PointCloud {
            points,
            colors,
            normals: None,
            radii: None,
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if self.colors.len() != n {
            return Err(Error::validation(format!(
                "{} colors for {n} points",
                self.colors.len()
            )));
        }
        if let Some(normals) = &self.normals {
            if normals.len() != n {
                return Err(Error::validation(format!(
                    "{} normals for {n} points",
                    normals.len()
                )));
            }
        }
        if let Some(radii) = &self.radii {
            if radii.len() != n {
                return Err(Error::validation(format!("{} radii for {n} points", radii.len())));
            }
            if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
                return Err(Error::validation(format!("splat radius {r} is not positive")));
            }
        }
        Ok(())
    }

    pub fn bounding_box(&self) -> Result<Aabb> {
        Aabb::from_points(&self.points)
    }
}

/// Either renderable representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mesh(TriMesh),
    Cloud(PointCloud),
}

impl Model {
    pub fn bounding_box(&self) -> Result<Aabb> {
        match self {
            Model::Mesh(m) => m.bounding_box(),
            Model::Cloud(c) => c.bounding_box(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        match self {
            Model::Mesh(m) => m.vertices.len(),
            Model::Cloud(c) => c.points.len(),
        }
    }

    pub fn into_mesh(self) -> Result<TriMesh> {
        match self {
            Model::Mesh(m) => Ok(m),
            Model::Cloud(_) => Err(Error::validation("expected a mesh, got a point cloud")),
        }
    }

    pub fn into_cloud(self) -> Result<PointCloud> {
        match self {
            Model::Cloud(c) => Ok(c),
            Model::Mesh(_) => Err(Error::validation("expected a point cloud, got a mesh")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn single_triangle_normals() {
        let mut m = TriMesh::new(
            vec![v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(m.compute_vertex_normals().is_empty());
        for n in m.normals.unwrap() {
            assert_eq!(n, Vector3::z());
        }
    }

    /// Unit cube whose face diagonals all run between even-parity corners,
    /// so every corner sees the same triangle count on each of its faces.
    pub(crate) fn symmetric_cube() -> TriMesh {
        let vertices: Vec<_> = (0..8)
            .map(|i| v((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
            .collect();
        let idx = |x: u32, y: u32, z: u32| x | (y << 1) | (z << 2);
        let mut faces = Vec::new();
        // Each face as (corner loop, outward normal); split along the even diagonal.
        let quads: [([u32; 4], Vector3<f64>); 6] = [
            ([idx(0, 0, 0), idx(0, 1, 0), idx(1, 1, 0), idx(1, 0, 0)], -Vector3::z()),
            ([idx(0, 0, 1), idx(1, 0, 1), idx(1, 1, 1), idx(0, 1, 1)], Vector3::z()),
            ([idx(0, 0, 0), idx(1, 0, 0), idx(1, 0, 1), idx(0, 0, 1)], -Vector3::y()),
            ([idx(0, 1, 0), idx(0, 1, 1), idx(1, 1, 1), idx(1, 1, 0)], Vector3::y()),
            ([idx(0, 0, 0), idx(0, 0, 1), idx(0, 1, 1), idx(0, 1, 0)], -Vector3::x()),
            ([idx(1, 0, 0), idx(1, 1, 0), idx(1, 1, 1), idx(1, 0, 1)], Vector3::x()),
        ];
        for (q, n) in quads {
            let even = |i: u32| (i.count_ones() % 2) == 0;
            let start = if even(q[0]) { 0 } else { 1 };
            let r = [q[start], q[(start + 1) % 4], q[(start + 2) % 4], q[(start + 3) % 4]];
            for tri in [[r[0], r[1], r[2]], [r[0], r[2], r[3]]] {
                let [a, b, c] = tri.map(|i| vertices[i as usize]);
                assert!((b - a).cross(&(c - a)).dot(&n) > 0.0, "winding");
                faces.push(tri);
            }
        }
        TriMesh::new(vertices, faces).unwrap()
    }

    #[test]
    fn cube_corner_normals_are_diagonals() {
        let mut m = symmetric_cube();
        assert!(m.compute_vertex_normals().is_empty());
        let s = 1.0 / 3f64.sqrt();
        for (p, n) in m.vertices.iter().zip(m.normals.as_ref().unwrap()) {
            let expect = (p - v(0.5, 0.5, 0.5)) * 2.0 * s;
            assert!((n - expect).norm() < 1e-12, "{p:?} -> {n:?}");
        }
    }

    #[test]
    fn isolated_vertex_flagged() {
        let mut m = TriMesh::new(
            vec![v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), v(5.0, 5.0, 5.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(m.compute_vertex_normals(), vec![3]);
        assert_eq!(m.normals.unwrap()[3], Vector3::z());
    }

    #[test]
    fn bounding_boxes() {
        let cube = symmetric_cube();
        let bb = cube.bounding_box().unwrap();
        assert_eq!(bb.min, v(0.0, 0.0, 0.0));
        assert_eq!(bb.max, v(1.0, 1.0, 1.0));
        assert!((bb.extent() - 3f64.sqrt()).abs() < 1e-15);
        let p = v(1.5, -2.0, 7.0);
        let single = Aabb::from_points(&[p]).unwrap();
        assert_eq!((single.min, single.max, single.extent()), (p, p, 0.0));
        assert_eq!(Aabb::from_points(&[v(0.0, 0.0, 0.0), v(3.0, 4.0, 0.0)]).unwrap().extent(), 5.0);
        assert!(Aabb::from_points(&[]).is_err());
    }

    #[test]
    fn invalid_meshes_rejected() {
        assert!(TriMesh::new(vec![v(0.0, 0.0, 0.0)], vec![[0, 0, 1]]).is_err());
        let m = TriMesh::new(vec![v(0.0, 0.0, 0.0)], vec![]).unwrap();
        assert!(m.clone().with_colors(vec![]).is_err());
        let mut textured = m;
        textured.uvs = Some(vec![Vector2::zeros()]);
        assert!(textured.validate().is_err());
        let mut cloud = PointCloud::new(vec![v(0.0, 0.0, 0.0)], vec![[0.0; 3]]).unwrap();
        cloud.radii = Some(vec![0.0]);
        assert!(cloud.validate().is_err());
    }

    proptest! {
        #[test]
        fn normals_are_unit(pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0), 3..30)) {
            let vertices: Vec<_> = pts.iter().map(|&(x, y, z)| v(x, y, z)).collect();
            let n = vertices.len() as u32;
            let faces = (0..n - 2).map(|i| [i, i + 1, i + 2]).collect();
            let mut m = TriMesh::new(vertices, faces).unwrap();
            m.compute_vertex_normals();
            for nrm in m.normals.unwrap() {
                prop_assert!((nrm.norm() - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn bbox_translates(pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0), 1..30),
                           d in (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0)) {
            let d = v(d.0, d.1, d.2);
            let points: Vec<_> = pts.iter().map(|&(x, y, z)| v(x, y, z)).collect();
            let moved: Vec<_> = points.iter().map(|p| p + d).collect();
            let a = Aabb::from_points(&points).unwrap();
            let b = Aabb::from_points(&moved).unwrap();
            prop_assert_eq!(b.min, a.min + d);
            prop_assert_eq!(b.max, a.max + d);
        }
    }
}

use super::{empty_output, near_plane, rasterize, resolve, Fragment, PixelRect, Primitive, RenderOutput};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::scene::PinholeCamera;

/// Camera-facing disk, projected to an axis-aligned ellipse
/// (`fx * r / z` by `fy * r / z` pixels).
struct Splat {
    u: f64,
    v: f64,
    rx2: f64,
    ry2: f64,
    depth: f64,
    id: u32,
    rect: PixelRect,
}

impl Primitive for Splat {
    fn rect(&self) -> PixelRect {
        self.rect
    }

    #[inline]
    fn fragment(&self, x: f64, y: f64) -> Option<Fragment> {
        let dx = x - self.u;
        let dy = y - self.v;
        // Cross-multiplied ellipse test; exact for integer radii.
        if dx * dx * self.ry2 + dy * dy * self.rx2 <= self.rx2 * self.ry2 {
            Some(Fragment {
                depth: self.depth,
                id: self.id,
                bary: [1.0, 0.0, 0.0],
            })
        } else {
            None
        }
    }
}

/// Splats a colored point cloud. Requires per-point radii (see
/// [`estimate_splat_radii`](super::estimate_splat_radii)).
pub fn render_pointcloud(cloud: &PointCloud, camera: &PinholeCamera) -> Result<RenderOutput> {
    cloud.validate()?;
    if cloud.points.is_empty() {
        return Err(Error::validation("cannot render an empty point cloud"));
    }
    let radii = cloud
        .radii
        .as_ref()
        .ok_or_else(|| Error::validation("point cloud has no splat radii"))?;
    let (w, h) = (camera.width, camera.height);
    let near = near_plane(cloud.bounding_box()?.extent());
    let splats: Vec<Splat> = cloud
        .points
        .iter()
        .zip(radii)
        .enumerate()
        .filter_map(|(i, (p, &r))| {
            let pc = camera.to_camera(p);
            if pc.z < near {
                return None;
            }
            let (u, v) = camera.camera_to_pixel(&pc);
            let rx = camera.fx * r / pc.z;
            let ry = camera.fy * r / pc.z;
            let rect = PixelRect::covering((u - rx, v - ry), (u + rx, v + ry), w, h)?;
            Some(Splat {
                u,
                v,
                rx2: rx * rx,
                ry2: ry * ry,
                depth: pc.z,
                id: i as u32,
                rect,
            })
        })
        .collect();
    if splats.is_empty() {
        return Ok(empty_output(w, h));
    }
    let frags = rasterize(&splats, w, h);
    resolve(frags, w, h, |id, _| cloud.colors[id as usize])
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};

    fn camera() -> PinholeCamera {
        PinholeCamera::new(96.0, 96.0, 16.0, 12.0, 33, 25, Matrix3::identity(), Vector3::zeros()).unwrap()
    }

    fn cloud(points: Vec<Vector3<f64>>, colors: Vec<[f64; 3]>, r: f64) -> PointCloud {
        let n = points.len();
        let mut c = PointCloud::new(points, colors).unwrap();
        c.radii = Some(vec![r; n]);
        c
    }

    #[test]
    fn single_splat_is_a_disk() {
        // 96 * 0.125 / 4 = 3 pixels exactly.
        let c = cloud(vec![Vector3::new(0.0, 0.0, 4.0)], vec![[1.0, 0.0, 0.0]], 0.125);
        let out = render_pointcloud(&c, &camera()).unwrap();
        let mut count = 0;
        for y in 0..25 {
            for x in 0..33 {
                let d2 = (x as f64 - 16.0).powi(2) + (y as f64 - 12.0).powi(2);
                let inside = d2.sqrt() <= 3.0;
                assert_eq!(out.mask.get(x, y), inside, "({x},{y})");
                count += inside as usize;
                if inside {
                    let i = (y * 33 + x) as usize;
                    assert_eq!(out.faceid[i], 0);
                    assert_eq!(out.bary[i], [1.0, 0.0, 0.0]);
                    assert_eq!(out.depth[i], 4.0);
                }
            }
        }
        assert_eq!(count, 29);
    }

    #[test]
    fn front_splat_wins() {
        let c = cloud(
            vec![Vector3::new(0.0, 0.0, 2.0), Vector3::new(0.0, 0.0, 1.0)],
            vec![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            0.05,
        );
        let out = render_pointcloud(&c, &camera()).unwrap();
        assert_eq!(out.color.get(16, 12), [0.0, 0.0, 1.0]);
        assert_eq!(out.faceid[12 * 33 + 16], 1);
    }

    #[test]
    fn point_behind_camera_contributes_nothing() {
        let c = cloud(vec![Vector3::new(0.0, 0.0, -2.0)], vec![[1.0; 3]], 1.0);
        assert_eq!(render_pointcloud(&c, &camera()).unwrap().mask.count_valid(), 0);
    }

    #[test]
    fn empty_and_radius_free_clouds_fail() {
        assert!(render_pointcloud(&PointCloud::default(), &camera()).is_err());
        let c = PointCloud::new(vec![Vector3::zeros()], vec![[0.0; 3]]).unwrap();
        assert!(render_pointcloud(&c, &camera()).is_err());
    }
}

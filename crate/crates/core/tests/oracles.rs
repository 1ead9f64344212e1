use nalgebra::Vector3;
use proptest::prelude::*;
use rephoto::geometry::TriMesh;
use rephoto::metrics::{error_image, Metric, MetricConfig};
use rephoto::raster::{render_mesh, RenderOptions, NO_PRIMITIVE};
use rephoto::scene::{Mask, PinholeCamera, RgbImage};

/// Möller-Trumbore; returns the ray parameter and barycentrics of a hit.
fn ray_triangle(o: &Vector3<f64>, d: &Vector3<f64>, tri: [&Vector3<f64>; 3]) -> Option<(f64, [f64; 3])> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let s = o - tri[0];
    let u = s.dot(&p) / det;
    let q = s.cross(&e1);
    let v = d.dot(&q) / det;
    let t = e2.dot(&q) / det;
    (t > 0.0).then_some((t, [1.0 - u - v, u, v]))
}

fn camera() -> PinholeCamera {
    PinholeCamera::look_at(Vector3::new(0.3, 0.2, -4.0), Vector3::zeros(), Vector3::y(), 30.0, 40, 32).unwrap()
}

fn coord() -> impl Strategy<Value = f64> {
    -1.5..1.5f64
}

fn triangle() -> impl Strategy<Value = [Vector3<f64>; 3]> {
    prop::array::uniform3((coord(), coord(), coord()).prop_map(|(x, y, z)| Vector3::new(x, y, z)))
}

fn image(w: u32, h: u32) -> impl Strategy<Value = RgbImage> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64), (w * h) as usize)
        .prop_map(move |px| RgbImage::from_pixels(w, h, px.into_iter().map(|(r, g, b)| [r, g, b]).collect()).unwrap())
}

fn mask(w: u32, h: u32) -> impl Strategy<Value = Mask> {
    prop::collection::vec(prop::bool::weighted(0.8), (w * h) as usize)
        .prop_map(move |v| Mask::from_vec(w, h, v).unwrap())
}

const MARGIN: f64 = 1e-6;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Every pixel agrees with casting a ray through its center: covered
    /// pixels hit their face at the rendered depth, and the closest hit that
    /// is clearly inside a triangle is the one that was drawn.
    #[test]
    fn depth_and_coverage_match_ray_casting(tris in prop::collection::vec(triangle(), 1..5)) {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (i, t) in tris.iter().enumerate() {
            vertices.extend_from_slice(t);
            let b = 3 * i as u32;
            faces.push([b, b + 1, b + 2]);
        }
        let n = vertices.len();
        let mesh = TriMesh::new(vertices, faces).unwrap().with_colors(vec![[0.5; 3]; n]).unwrap();
        let cam = camera();
        let out = render_mesh(&mesh, &cam, &RenderOptions::default()).unwrap();
        let origin = cam.center();
        for y in 0..cam.height {
            for x in 0..cam.width {
                let i = (y * cam.width + x) as usize;
                let dir = cam.ray_direction(x as f64, y as f64);
                let mut best: Option<(f64, usize, bool)> = None;
                for (f, face) in mesh.faces.iter().enumerate() {
                    let tri = face.map(|v| &mesh.vertices[v as usize]);
                    if let Some((t, bary)) = ray_triangle(&origin, &dir, tri) {
                        let z = cam.to_camera(&(origin + dir * t)).z;
                        let inside = bary.iter().all(|&b| b > MARGIN);
                        let touching = bary.iter().all(|&b| b > -MARGIN);
                        if touching && best.map_or(true, |(bz, _, _)| z < bz) {
                            best = Some((z, f, inside));
                        }
                    }
                }
                let drawn = out.faceid[i];
                if drawn != NO_PRIMITIVE {
                    let tri = mesh.faces[drawn as usize].map(|v| &mesh.vertices[v as usize]);
                    let (t, _) = ray_triangle(&origin, &dir, tri).expect("drawn face is hit by its pixel ray");
                    let z = cam.to_camera(&(origin + dir * t)).z;
                    prop_assert!((z - out.depth[i]).abs() <= 1e-9 * z.max(1.0), "pixel {x},{y}: {z} vs {}", out.depth[i]);
                }
                if let Some((z, _, true)) = best {
                    if z > 1e-3 {
                        prop_assert!(drawn != NO_PRIMITIVE, "pixel {x},{y} missed");
                        prop_assert!(out.depth[i] <= z + 1e-9 * z.max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn metrics_are_symmetric(a in image(12, 10), b in image(12, 10), m in mask(12, 10), patch in prop::sample::select(vec![3u32, 5, 7])) {
        let cfg = MetricConfig { patch, min_valid_fraction: 0.4 };
        for metric in Metric::ALL {
            let ab = error_image(metric, &a, &b, &m, &cfg).unwrap();
            let ba = error_image(metric, &b, &a, &m, &cfg).unwrap();
            prop_assert_eq!(ab.defined(), ba.defined());
            for (x, y) in ab.values().iter().zip(ba.values()).zip(ab.defined()).filter(|(_, d)| **d).map(|(p, _)| p) {
                prop_assert!((x - y).abs() < 1e-12, "{metric}: {x} vs {y}");
            }
        }
    }

    /// Shrinking the mask can only shrink the set of defined pixels.
    #[test]
    fn defined_pixels_shrink_with_the_mask(a in image(12, 10), b in image(12, 10), m in mask(12, 10), drop in mask(12, 10)) {
        let cfg = MetricConfig { patch: 5, min_valid_fraction: 0.5 };
        let smaller = Mask::from_vec(12, 10, m.as_slice().iter().zip(drop.as_slice()).map(|(&x, &y)| x && y).collect()).unwrap();
        for metric in Metric::ALL {
            let big = error_image(metric, &a, &b, &m, &cfg).unwrap();
            let small = error_image(metric, &a, &b, &smaller, &cfg).unwrap();
            for (i, (&s, &g)) in small.defined().iter().zip(big.defined()).enumerate() {
                prop_assert!(!s || g, "{metric}: pixel {i} defined only under the smaller mask");
                prop_assert!(!s || smaller.as_slice()[i]);
            }
        }
    }
}

//! Quadric-prioritized half-edge collapse.
//!
//! A collapse `from -> to` deletes `from` and reconnects its faces to `to`,
//! which keeps its position and attributes. Candidates are ordered by the
//! quadric error of `to`'s position under the summed quadrics of both
//! endpoints.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use nalgebra::{Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::geometry::TriMesh;

/// Weight of the plane constraints that hold open boundaries in place.
const BOUNDARY_WEIGHT: f64 = 1000.0;

type Quadric = Matrix4<f64>;

fn plane_quadric(n: Vector3<f64>, p: Vector3<f64>, weight: f64) -> Quadric {
    let plane = Vector4::new(n.x, n.y, n.z, -n.dot(&p));
    plane * plane.transpose() * weight
}

fn quadric_cost(q: &Quadric, p: &Vector3<f64>) -> f64 {
    let h = Vector4::new(p.x, p.y, p.z, 1.0);
    (h.transpose() * q * h)[(0, 0)].max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    cost: f64,
    from: u32,
    to: u32,
    stamp_from: u32,
    stamp_to: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        self.cost
            .total_cmp(&o.cost)
            .then(self.from.cmp(&o.from))
            .then(self.to.cmp(&o.to))
            .then(self.stamp_from.cmp(&o.stamp_from))
            .then(self.stamp_to.cmp(&o.stamp_to))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

struct Collapser<'m> {
    pos: &'m [Vector3<f64>],
    faces: Vec<[u32; 3]>,
    alive: Vec<bool>,
    incident: Vec<Vec<u32>>,
    quadrics: Vec<Quadric>,
    removed: Vec<bool>,
    stamp: Vec<u32>,
    heap: BinaryHeap<Reverse<Candidate>>,
}

impl<'m> Collapser<'m> {
    fn new(mesh: &'m TriMesh) -> Self {
        let n = mesh.vertices.len();
        let pos = &mesh.vertices[..];
        let mut incident = vec![Vec::new(); n];
        let mut quadrics = vec![Quadric::zeros(); n];
        let mut alive = vec![true; mesh.faces.len()];
        for (fi, f) in mesh.faces.iter().enumerate() {
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                alive[fi] = false;
                continue;
            }
            for &v in f {
                incident[v as usize].push(fi as u32);
            }
            let [a, b, c] = f.map(|i| pos[i as usize]);
            if let Some(nrm) = (b - a).cross(&(c - a)).try_normalize(0.0) {
                let q = plane_quadric(nrm, a, 1.0);
                for &v in f {
                    quadrics[v as usize] += q;
                }
            }
        }
        let mut c = Collapser {
            pos,
            faces: mesh.faces.clone(),
            alive,
            incident,
            quadrics,
            removed: vec![false; n],
            stamp: vec![0; n],
            heap: BinaryHeap::new(),
        };
        c.add_boundary_constraints();
        for v in 0..n as u32 {
            c.push_edges(v);
        }
        c
    }

    fn add_boundary_constraints(&mut self) {
        use std::collections::HashMap;
        let mut count: HashMap<(u32, u32), (u32, u32)> = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            if !self.alive[fi] {
                continue;
            }
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let e = count.entry((a.min(b), a.max(b))).or_insert((0, fi as u32));
                e.0 += 1;
            }
        }
        let mut edges: Vec<_> = count.into_iter().filter(|(_, (c, _))| *c == 1).collect();
        edges.sort_unstable_by_key(|(e, _)| *e);
        for ((a, b), (_, fi)) in edges {
            let f = self.faces[fi as usize];
            let [p0, p1, p2] = f.map(|i| self.pos[i as usize]);
            let Some(fnrm) = (p1 - p0).cross(&(p2 - p0)).try_normalize(0.0) else {
                continue;
            };
            let (pa, pb) = (self.pos[a as usize], self.pos[b as usize]);
            let Some(n) = (pb - pa).cross(&fnrm).try_normalize(0.0) else {
                continue;
            };
            let q = plane_quadric(n, pa, BOUNDARY_WEIGHT);
            self.quadrics[a as usize] += q;
            self.quadrics[b as usize] += q;
        }
    }

    fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self.incident[v as usize]
            .iter()
            .filter(|&&f| self.alive[f as usize])
            .flat_map(|&f| self.faces[f as usize])
            .filter(|&u| u != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn push_edges(&mut self, v: u32) {
        for u in self.neighbors(v) {
            for (from, to) in [(v, u), (u, v)] {
                let q = self.quadrics[from as usize] + self.quadrics[to as usize];
                self.heap.push(Reverse(Candidate {
                    cost: quadric_cost(&q, &self.pos[to as usize]),
                    from,
                    to,
                    stamp_from: self.stamp[from as usize],
                    stamp_to: self.stamp[to as usize],
                }));
            }
        }
    }

    fn is_legal(&self, from: u32, to: u32) -> bool {
        let alive_faces = |v: u32| {
            self.incident[v as usize]
                .iter()
                .copied()
                .filter(|&f| self.alive[f as usize])
        };
        // Third vertices of the faces on the edge.
        let mut opposite: Vec<u32> = alive_faces(from)
            .map(|f| self.faces[f as usize])
            .filter(|f| f.contains(&to))
            .flat_map(|f| f.into_iter().filter(|&u| u != from && u != to))
            .collect();
        if opposite.is_empty() {
            return false;
        }
        opposite.sort_unstable();
        opposite.dedup();
        // Link condition: shared neighbors are exactly the opposite vertices.
        let nt = self.neighbors(to);
        let shared: Vec<u32> = self
            .neighbors(from)
            .into_iter()
            .filter(|u| nt.binary_search(u).is_ok())
            .collect();
        if shared != opposite {
            return false;
        }
        // A rewired face must not duplicate a face `to` already has (this
        // rejects folding a tetrahedron flat).
        let sorted = |mut f: [u32; 3]| {
            f.sort_unstable();
            f
        };
        let existing: Vec<[u32; 3]> = alive_faces(to)
            .map(|f| self.faces[f as usize])
            .filter(|f| !f.contains(&from))
            .map(sorted)
            .collect();
        let target = self.pos[to as usize];
        for f in alive_faces(from) {
            let face = self.faces[f as usize];
            if !face.contains(&to) && existing.contains(&sorted(face.map(|i| if i == from { to } else { i }))) {
                return false;
            }
        }
        for f in alive_faces(from) {
            let face = self.faces[f as usize];
            if face.contains(&to) {
                continue;
            }
            let p = face.map(|i| self.pos[i as usize]);
            let before = (p[1] - p[0]).cross(&(p[2] - p[0]));
            let q = face.map(|i| if i == from { target } else { self.pos[i as usize] });
            let after = (q[1] - q[0]).cross(&(q[2] - q[0]));
            if !(before.dot(&after) > 0.0) {
                return false;
            }
        }
        true
    }

    fn collapse(&mut self, from: u32, to: u32) {
        let faces = std::mem::take(&mut self.incident[from as usize]);
        for f in faces {
            if !self.alive[f as usize] {
                continue;
            }
            let face = &mut self.faces[f as usize];
            if face.contains(&to) {
                self.alive[f as usize] = false;
            } else {
                for v in face.iter_mut() {
                    if *v == from {
                        *v = to;
                    }
                }
                self.incident[to as usize].push(f);
            }
        }
        self.incident[to as usize].retain(|&f| self.alive[f as usize]);
        let qf = self.quadrics[from as usize];
        self.quadrics[to as usize] += qf;
        self.removed[from as usize] = true;
        self.stamp[to as usize] += 1;
        self.push_edges(to);
    }

    fn run(&mut self, target: usize) -> usize {
        let mut done = 0;
        while done < target {
            let Some(Reverse(c)) = self.heap.pop() else {
                break;
            };
            if self.removed[c.from as usize]
                || self.removed[c.to as usize]
                || self.stamp[c.from as usize] != c.stamp_from
                || self.stamp[c.to as usize] != c.stamp_to
            {
                continue;
            }
            if !self.is_legal(c.from, c.to) {
                continue;
            }
            self.collapse(c.from, c.to);
            done += 1;
        }
        done
    }
}

/// Removes `floor(n_simp * |V|)` vertices by half-edge collapses, or fewer
/// when no legal collapse remains. Returns the mesh and the number of
/// collapses performed.
pub fn simplify(mesh: &TriMesh, n_simp: f64) -> Result<(TriMesh, usize)> {
    if !(0.0..1.0).contains(&n_simp) {
        return Err(Error::validation(format!(
            "n_simp must be in [0, 1), got {n_simp}"
        )));
    }
    mesh.validate()?;
    let target = (n_simp * mesh.vertices.len() as f64).floor() as usize;
    if target == 0 {
        return Ok((mesh.clone(), 0));
    }
    let mut c = Collapser::new(mesh);
    let performed = c.run(target);

    let mut remap = vec![u32::MAX; mesh.vertices.len()];
    let mut keep = Vec::with_capacity(mesh.vertices.len() - performed);
    for (i, &gone) in c.removed.iter().enumerate() {
        if !gone {
            remap[i] = keep.len() as u32;
            keep.push(i);
        }
    }
    let faces = c
        .faces
        .iter()
        .zip(&c.alive)
        .filter(|(_, &a)| a)
        .map(|(f, _)| f.map(|i| remap[i as usize]))
        .collect();
    let pick = |i: &usize| *i;
    let mut out = TriMesh {
        vertices: keep.iter().map(|&i| mesh.vertices[i]).collect(),
        faces,
        colors: mesh.colors.as_ref().map(|c| keep.iter().map(pick).map(|i| c[i]).collect()),
        normals: None,
        uvs: mesh.uvs.as_ref().map(|u| keep.iter().map(|&i| u[i]).collect()),
        texture: mesh.texture.clone(),
    };
    if mesh.normals.is_some() {
        out.compute_vertex_normals();
    }
    out.validate()?;
    Ok((out, performed))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn icosahedron() -> TriMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let v = [
            [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
            [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
            [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
        ];
        let f = [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        let colors = (0..12).map(|i| [i as f64 / 12.0, 0.5, 0.5]).collect();
        TriMesh::new(v.iter().map(|p| Vector3::from(*p)).collect(), f.to_vec())
            .unwrap()
            .with_colors(colors)
            .unwrap()
    }

    fn check_structure(m: &TriMesh) {
        m.validate().unwrap();
        for f in &m.faces {
            assert!(f[0] != f[1] && f[1] != f[2] && f[0] != f[2], "degenerate {f:?}");
        }
    }

    #[test]
    fn zero_is_identity() {
        let m = icosahedron();
        let (out, n) = simplify(&m, 0.0).unwrap();
        assert_eq!((out, n), (m, 0));
    }

    #[test]
    fn icosahedron_half() {
        let m = icosahedron();
        let (out, n) = simplify(&m, 0.5).unwrap();
        assert_eq!(n, 6);
        assert_eq!(out.vertices.len(), 12 - n);
        check_structure(&out);
        // Closed genus-0 surface stays closed: F = 2V - 4.
        assert_eq!(out.faces.len(), 2 * out.vertices.len() - 4);
        // Survivors keep their position and color exactly.
        for (p, c) in out.vertices.iter().zip(out.colors.as_ref().unwrap()) {
            let i = m.vertices.iter().position(|q| q == p).unwrap();
            assert_eq!(m.colors.as_ref().unwrap()[i], *c);
        }
    }

    #[test]
    fn aggressive_simplification_stops_when_stuck() {
        let m = icosahedron();
        let (out, n) = simplify(&m, 0.99).unwrap();
        assert_eq!(out.vertices.len(), 12 - n);
        assert!(out.vertices.len() >= 4);
        check_structure(&out);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(simplify(&icosahedron(), 1.0).is_err());
        assert!(simplify(&icosahedron(), -0.1).is_err());
    }

    #[test]
    fn grid_keeps_boundary_and_orientation() {
        let n = 10;
        let mut verts = Vec::new();
        for y in 0..n {
            for x in 0..n {
                verts.push(Vector3::new(x as f64, y as f64, 0.0));
            }
        }
        let mut faces = Vec::new();
        for y in 0..n - 1 {
            for x in 0..n - 1 {
                let i = (y * n + x) as u32;
                faces.push([i, i + 1, i + n as u32 + 1]);
                faces.push([i, i + n as u32 + 1, i + n as u32]);
            }
        }
        let mesh = TriMesh::new(verts, faces).unwrap();
        let (out, k) = simplify(&mesh, 0.6).unwrap();
        assert_eq!(k, 60);
        check_structure(&out);
        for f in &out.faces {
            let [a, b, c] = f.map(|i| out.vertices[i as usize]);
            assert!((b - a).cross(&(c - a)).z > 0.0);
        }
        // Corners survive thanks to the boundary constraints.
        for corner in [(0.0, 0.0), (9.0, 0.0), (0.0, 9.0), (9.0, 9.0)] {
            assert!(out.vertices.iter().any(|p| p.x == corner.0 && p.y == corner.1));
        }
    }
}

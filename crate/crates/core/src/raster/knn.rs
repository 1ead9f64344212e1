//! Exact k-nearest-neighbor search (kd-tree) for splat radii.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

const LEAF_SIZE: usize = 8;

/// Candidate neighbor ordered by `(squared distance, index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    idx: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

enum Node {
    Leaf(Vec<u32>),
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

struct KdTree<'a> {
    points: &'a [Vector3<f64>],
    root: Node,
}

impl<'a> KdTree<'a> {
    fn new(points: &'a [Vector3<f64>]) -> Self {
        let idx: Vec<u32> = (0..points.len() as u32).collect();
        let root = Self::build(points, idx);
        KdTree { points, root }
    }

    fn build(points: &[Vector3<f64>], mut idx: Vec<u32>) -> Node {
        if idx.len() <= LEAF_SIZE {
            return Node::Leaf(idx);
        }
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for &i in &idx {
            lo = lo.inf(&points[i as usize]);
            hi = hi.sup(&points[i as usize]);
        }
        let axis = (hi - lo).imax();
        if hi[axis] == lo[axis] {
            return Node::Leaf(idx);
        }
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            points[a as usize][axis].total_cmp(&points[b as usize][axis])
        });
        let value = points[idx[mid] as usize][axis];
        let right = idx.split_off(mid);
        Node::Split {
            axis,
            value,
            left: Box::new(Self::build(points, idx)),
            right: Box::new(Self::build(points, right)),
        }
    }

    /// The `k` nearest points to `points[query]`, excluding itself, sorted
    /// by `(distance, index)`.
    fn nearest(&self, query: u32, k: usize) -> Vec<Candidate> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(&self.root, query, k, &mut heap);
        heap.into_sorted_vec()
    }

    fn search(&self, node: &Node, query: u32, k: usize, heap: &mut BinaryHeap<Candidate>) {
        let q = &self.points[query as usize];
        match node {
            Node::Leaf(idx) => {
                for &i in idx {
                    if i == query {
                        continue;
                    }
                    let c = Candidate {
                        d2: (self.points[i as usize] - q).norm_squared(),
                        idx: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, heap);
                // Equal-distance candidates can still win on index, so only
                // strictly farther slabs are pruned.
                if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
                    self.search(far, query, k, heap);
                }
            }
        }
    }
}

/// Sets each radius to `scale` times the mean distance to the point's `k`
/// nearest neighbors.
pub fn estimate_splat_radii(cloud: &PointCloud, k: usize, scale: f64) -> Result<PointCloud> {
    if k == 0 {
        return Err(Error::validation("k must be at least 1"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::validation(format!("splat scale must be positive, got {scale}")));
    }
    if cloud.points.len() < k + 1 {
        return Err(Error::validation(format!(
            "need at least {} points for k = {k}, got {}",
            k + 1,
            cloud.points.len()
        )));
    }
    let tree = KdTree::new(&cloud.points);
    use rayon::prelude::*;
    let radii: Vec<f64> = (0..cloud.points.len() as u32)
        .into_par_iter()
        .map(|i| {
            let sum: f64 = tree.nearest(i, k).iter().map(|c| c.d2.sqrt()).sum();
            scale * sum / k as f64
        })
        .collect();
    let mut out = cloud.clone();
    out.radii = Some(radii);
    out.validate()?;
    Ok(out)
}

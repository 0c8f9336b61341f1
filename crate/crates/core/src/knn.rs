//! k-nearest-neighbor search in Euclidean space.
//!
//! The kd-tree answers exact queries by default. With `eps > 0` it prunes
//! any subtree that cannot hold a point closer than `d_k / (1 + eps)`, which
//! gives `(1 + eps)`-approximate neighbors.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// A neighbor by point index with its squared distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hit {
    pub index: usize,
    pub dist2: f64,
}

impl Eq for Hit {}

impl Ord for Hit {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Hit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Search strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Backend {
    /// Exact kd-tree search.
    Exact,
    /// kd-tree with `(1 + eps)` pruning.
    Approximate { eps: f64 },
    /// Scan all points.
    BruteForce,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::Exact),
            "approx" | "approximate" => Ok(Backend::Approximate { eps: 0.1 }),
            "brute" | "brute-force" => Ok(Backend::BruteForce),
            other => Err(Error::Config(format!(
                "unknown neighbor backend '{}'",
                other
            ))),
        }
    }
}

/// Common interface of the neighbor indices.
pub trait NeighborIndex: Sync {
    /// The `k` nearest points to `query`, skipping indices for which
    /// `skip` is true, sorted by distance.
    fn knn(&self, query: &[f64], k: usize, skip: &dyn Fn(usize) -> bool) -> Vec<Hit>;
}

/// Row-major point set.
#[derive(Debug, Clone)]
pub struct PointSet {
    pub dim: usize,
    pub coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::Input(format!(
                "{} coordinates do not form points of dimension {}",
                coords.len(),
                dim
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn dist2(&self, i: usize, q: &[f64]) -> f64 {
        self.point(i)
            .iter()
            .zip(q)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Bounded max-heap keeping the `k` best hits.
struct Best {
    k: usize,
    heap: BinaryHeap<Hit>,
}

impl Best {
    fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn worst(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap.peek().map_or(f64::INFINITY, |h| h.dist2)
        }
    }

    fn offer(&mut self, hit: Hit) {
        if self.heap.len() < self.k {
            self.heap.push(hit);
        } else if let Some(top) = self.heap.peek() {
            if hit < *top {
                self.heap.pop();
                self.heap.push(hit);
            }
        }
    }

    fn into_sorted(self) -> Vec<Hit> {
        self.heap.into_sorted_vec()
    }
}

pub struct BruteForce {
    points: PointSet,
}

impl BruteForce {
    pub fn new(points: PointSet) -> Self {
        Self { points }
    }
}

impl NeighborIndex for BruteForce {
    fn knn(&self, query: &[f64], k: usize, skip: &dyn Fn(usize) -> bool) -> Vec<Hit> {
        let mut best = Best::new(k);
        for i in 0..self.points.len() {
            if !skip(i) {
                best.offer(Hit {
                    index: i,
                    dist2: self.points.dist2(i, query),
                });
            }
        }
        best.into_sorted()
    }
}

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

pub struct KdTree {
    points: PointSet,
    order: Vec<usize>,
    nodes: Vec<Node>,
    eps: f64,
}

impl KdTree {
    /// Exact tree.
    pub fn new(points: PointSet) -> Self {
        Self::with_eps(points, 0.0)
    }

    pub fn with_eps(points: PointSet, eps: f64) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            let n = order.len();
            build(&points, &mut order, 0, n, &mut nodes);
        }
        Self {
            points,
            order,
            nodes,
            eps: eps.max(0.0),
        }
    }

    fn search(&self, node: usize, q: &[f64], skip: &dyn Fn(usize) -> bool, best: &mut Best) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if !skip(i) {
                        best.offer(Hit {
                            index: i,
                            dist2: self.points.dist2(i, q),
                        });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, skip, best);
                let shrink = (1.0 + self.eps) * (1.0 + self.eps);
                if diff * diff * shrink < best.worst() {
                    self.search(far, q, skip, best);
                }
            }
        }
    }
}

fn build(
    points: &PointSet,
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    let slice = &mut order[start..end];
    if slice.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    // split on the axis of largest spread
    let dim = points.dim;
    let mut axis = 0;
    let mut spread = -1.0;
    for a in 0..dim {
        let (lo, hi) = slice
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = points.point(i)[a];
                (lo.min(v), hi.max(v))
            });
        if hi - lo > spread {
            spread = hi - lo;
            axis = a;
        }
    }
    if !(spread > 0.0) {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        points.point(a)[axis].total_cmp(&points.point(b)[axis])
    });
    let value = points.point(slice[mid])[axis];
    nodes.push(Node::Leaf { start, end });
    let left = build(points, order, start, start + mid, nodes);
    let right = build(points, order, start + mid, end, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}

impl NeighborIndex for KdTree {
    fn knn(&self, query: &[f64], k: usize, skip: &dyn Fn(usize) -> bool) -> Vec<Hit> {
        let mut best = Best::new(k);
        if k > 0 && !self.nodes.is_empty() {
            self.search(0, query, skip, &mut best);
        }
        best.into_sorted()
    }
}

/// Build the index for a backend.
pub fn build_index(points: PointSet, backend: Backend) -> Box<dyn NeighborIndex> {
    match backend {
        Backend::Exact => Box::new(KdTree::new(points)),
        Backend::Approximate { eps } => Box::new(KdTree::with_eps(points, eps)),
        Backend::BruteForce => Box::new(BruteForce::new(points)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, dim: usize, seed: u64) -> PointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointSet::new(dim, (0..n * dim).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn kdtree_equals_brute_force() {
        for (dim, seed) in [(2, 1), (5, 2), (30, 3)] {
            let pts = cloud(500, dim, seed);
            let tree = KdTree::new(pts.clone());
            let brute = BruteForce::new(pts.clone());
            for qi in (0..500).step_by(37) {
                let q = pts.point(qi).to_vec();
                let skip = |i: usize| i == qi;
                assert_eq!(tree.knn(&q, 7, &skip), brute.knn(&q, 7, &skip));
            }
        }
    }

    #[test]
    fn approximate_within_factor() {
        let pts = cloud(2000, 4, 9);
        let approx = KdTree::with_eps(pts.clone(), 0.5);
        let brute = BruteForce::new(pts.clone());
        for qi in (0..2000).step_by(101) {
            let q = pts.point(qi).to_vec();
            let a = approx.knn(&q, 5, &|i| i == qi);
            let b = brute.knn(&q, 5, &|i| i == qi);
            assert!(a[4].dist2.sqrt() <= 1.5 * b[4].dist2.sqrt() + 1e-12);
        }
    }

    #[test]
    fn duplicates_and_small_sets() {
        let pts = PointSet::new(1, vec![1.0; 40]).unwrap();
        let tree = KdTree::new(pts);
        let hits = tree.knn(&[1.0], 3, &|_| false);
        assert_eq!(
            hits.iter().map(|h| h.index).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        let empty = KdTree::new(PointSet::new(2, vec![]).unwrap());
        assert!(empty.knn(&[0.0, 0.0], 3, &|_| false).is_empty());
    }
}

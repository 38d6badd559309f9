//! Exact kd-tree over points of arbitrary dimension.
//!
//! Queries keep the per-dimension offsets from the query to the current cell
//! (Arya & Mount's incremental distance), which prunes far better than
//! splitting-plane distance alone for curve-like data in many dimensions.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a [f64],
    dim: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Squared Euclidean distance. Every search path uses this exact summation order,
/// so tree and brute-force results are bit-identical.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl<'a> KdTree<'a> {
    /// Builds a tree over `points` laid out row-major with `dim` values per point.
    pub fn build(points: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0 && points.len() % dim == 0, "point buffer does not match dimension");
        let n = points.len() / dim;
        let mut tree = Self {
            points,
            dim,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build_node(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let mut best = (0, 0.0);
        for d in 0..self.dim {
            let (lo, hi) = self.order[start..end].iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), &i| {
                    let v = self.points[i * self.dim + d];
                    (lo.min(v), hi.max(v))
                },
            );
            if hi - lo > best.1 {
                best = (d, hi - lo);
            }
        }
        if best.1 <= 0.0 {
            return id;
        }
        let dim = best.0;
        let mid = start + (end - start) / 2;
        let points = self.points;
        let stride = self.dim;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * stride + dim].total_cmp(&points[b * stride + dim])
        });
        let value = points[self.order[mid] * stride + dim];
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    /// All points within `radius` (inclusive) of `query`, excluding index `exclude`.
    /// Results are appended to `out` as `(index, distance)` in unspecified order.
    /// Returns the number of visited nodes plus distance evaluations.
    pub fn within_radius(
        &self,
        query: &[f64],
        radius: f64,
        exclude: Option<usize>,
        out: &mut Vec<(usize, f64)>,
    ) -> u64 {
        if self.nodes.is_empty() {
            return 0;
        }
        let mut offsets = vec![0.0; self.dim];
        let mut ops = 0;
        self.radius_rec(0, query, radius * radius, &mut offsets, 0.0, exclude, out, &mut ops);
        ops
    }

    #[allow(clippy::too_many_arguments)]
    fn radius_rec(
        &self,
        node: usize,
        q: &[f64],
        r2: f64,
        offsets: &mut [f64],
        rd: f64,
        exclude: Option<usize>,
        out: &mut Vec<(usize, f64)>,
        ops: &mut u64,
    ) {
        *ops += 1;
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    *ops += 1;
                    let d2 = sq_dist(q, self.point(i));
                    if d2 <= r2 {
                        out.push((i, d2.sqrt()));
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.radius_rec(near, q, r2, offsets, rd, exclude, out, ops);
                let old = offsets[dim];
                let far_rd = rd - old * old + diff * diff;
                if far_rd <= r2 {
                    offsets[dim] = diff;
                    self.radius_rec(far, q, r2, offsets, far_rd, exclude, out, ops);
                    offsets[dim] = old;
                }
            }
        }
    }

    /// The `k` nearest points to `query` (excluding `exclude`), sorted by
    /// ascending distance, ties broken by index.
    pub fn nearest(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        let mut offsets = vec![0.0; self.dim];
        self.knn_rec(0, query, k, &mut offsets, 0.0, exclude, &mut heap);
        let mut result: Vec<(usize, f64)> = heap
            .into_iter()
            .map(|c: Candidate| (c.index, c.d2.sqrt()))
            .collect();
        result.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        result
    }

    #[allow(clippy::too_many_arguments)]
    fn knn_rec(
        &self,
        node: usize,
        q: &[f64],
        k: usize,
        offsets: &mut [f64],
        rd: f64,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let cand = Candidate { d2: sq_dist(q, self.point(i)), index: i };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, q, k, offsets, rd, exclude, heap);
                let old = offsets[dim];
                let far_rd = rd - old * old + diff * diff;
                let bound = if heap.len() < k { f64::INFINITY } else { heap.peek().map_or(f64::INFINITY, |c| c.d2) };
                if far_rd <= bound {
                    offsets[dim] = diff;
                    self.knn_rec(far, q, k, offsets, far_rd, exclude, heap);
                    offsets[dim] = old;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.index.cmp(&other.index))
    }
}

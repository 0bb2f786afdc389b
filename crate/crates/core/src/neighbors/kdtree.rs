//! Exact k-nearest-neighbor search over a static kd-tree.
//!
//! Candidates are ranked by the pair `(squared distance, point index)`, the
//! same total order the brute-force search uses. Pruning compares a lower
//! bound on the squared distance that is computed with the same summation
//! order as [`sq_dist`], so a subtree is only skipped when every point in it
//! is strictly farther than the current k-th candidate, even after rounding.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cloud::{sq_dist, PointCloud};

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub d2: f64,
    pub index: usize,
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
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

#[derive(Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

pub(crate) struct KdTree<'a> {
    cloud: &'a PointCloud,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub fn new(cloud: &'a PointCloud) -> Self {
        let mut tree = KdTree {
            cloud,
            order: (0..cloud.len()).collect(),
            nodes: Vec::new(),
        };
        tree.build(0, cloud.len());
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }

        // split on the axis of widest spread
        let d = self.cloud.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &i in &self.order[start..end] {
            for (j, &v) in self.cloud.point(i).iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let (dim, spread) =
            (0..d)
                .map(|j| (j, hi[j] - lo[j]))
                .fold((0, f64::NEG_INFINITY), |best, cur| {
                    if cur.1 > best.1 {
                        cur
                    } else {
                        best
                    }
                });
        if spread <= 0.0 {
            return id;
        }

        let mid = (end - start) / 2;
        let cloud = self.cloud;
        self.order[start..end].select_nth_unstable_by(mid, |&a, &b| {
            cloud.point(a)[dim].total_cmp(&cloud.point(b)[dim])
        });
        let value = cloud.point(self.order[start + mid])[dim];

        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to point `query`, excluding `query` itself,
    /// sorted by `(distance, index)`.
    pub fn knn_of_point(&self, query: usize, k: usize) -> Vec<Candidate> {
        let q = self.cloud.point(query);
        let mut heap = BinaryHeap::with_capacity(k + 1);
        let mut offsets = vec![0.0; self.cloud.dim()];
        self.search(0, q, query, k, &mut offsets, &mut heap);
        heap.into_sorted_vec()
    }

    fn search(
        &self,
        node: usize,
        q: &[f64],
        skip: usize,
        k: usize,
        offsets: &mut [f64],
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &index in &self.order[start..end] {
                    if index == skip {
                        continue;
                    }
                    let cand = Candidate {
                        d2: sq_dist(q, self.cloud.point(index)),
                        index,
                    };
                    offer(heap, k, cand);
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, skip, k, offsets, heap);

                let saved = offsets[dim];
                offsets[dim] = saved.max(diff.abs());
                let bound: f64 = offsets.iter().map(|o| o * o).sum();
                // ties must still be visited: an equidistant point with a
                // smaller index outranks the current worst candidate
                let visit = heap.len() < k || heap.peek().is_some_and(|w| bound <= w.d2);
                if visit {
                    self.search(far, q, skip, k, offsets, heap);
                }
                offsets[dim] = saved;
            }
        }
    }
}

#[inline]
pub(crate) fn offer(heap: &mut BinaryHeap<Candidate>, k: usize, cand: Candidate) {
    if heap.len() < k {
        heap.push(cand);
    } else if let Some(worst) = heap.peek() {
        if cand < *worst {
            heap.pop();
            heap.push(cand);
        }
    }
}

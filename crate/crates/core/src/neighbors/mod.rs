//! Exact Euclidean k-nearest-neighbor tables.

mod kdtree;

use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::cloud::{sq_dist, PointCloud};
use crate::error::{Error, Result};
use kdtree::{offer, Candidate, KdTree};

/// Above this ambient dimension a kd-tree stops paying for itself and the
/// table is built by parallel brute force instead.
const KD_TREE_MAX_DIM: usize = 16;

/// What to do with points that share exact coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum DedupPolicy {
    /// Fail with [`Error::DuplicatePoints`] on any zero neighbor distance.
    #[default]
    Error,
    /// Keep the first occurrence of each coordinate vector and drop the rest.
    DropDuplicates,
}

/// Per-point sorted distances to the `k_max` nearest neighbors (self
/// excluded), with the matching neighbor indices.
///
/// Row `i`, column `j` holds `T_{j+1}(x_i)`. Neighbor indices refer to rows of
/// the table; [`NeighborTable::source_index`] maps rows back to the input
/// cloud when duplicates were dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    n: usize,
    k_max: usize,
    dim: usize,
    distances: Vec<f64>,
    indices: Vec<usize>,
    source_index: Vec<usize>,
}

impl NeighborTable {
    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Ambient dimension of the cloud the table was built from.
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn distances(&self, point: usize) -> &[f64] {
        &self.distances[point * self.k_max..(point + 1) * self.k_max]
    }

    #[inline]
    pub fn indices(&self, point: usize) -> &[usize] {
        &self.indices[point * self.k_max..(point + 1) * self.k_max]
    }

    /// `T_k(x)`: distance to the k-th nearest neighbor, 1-based.
    #[inline]
    pub fn kth_distance(&self, point: usize, k: usize) -> f64 {
        self.distances(point)[k - 1]
    }

    /// `N(t, x)` restricted to the stored neighbors: how many of the `k_max`
    /// nearest neighbors lie within distance `t`.
    pub fn count_within(&self, point: usize, t: f64) -> usize {
        self.distances(point).partition_point(|&d| d <= t)
    }

    /// Original cloud index of each table row.
    pub fn source_index(&self) -> &[usize] {
        &self.source_index
    }

    pub(crate) fn check_k(&self, k: usize) -> Result<()> {
        if k < 2 {
            return Err(Error::InvalidK(format!("k = {k}, need k >= 2")));
        }
        if k > self.k_max {
            return Err(Error::KTooLarge { k, max: self.k_max });
        }
        Ok(())
    }

    fn from_rows(cloud: &PointCloud, k_max: usize, rows: Vec<Vec<Candidate>>) -> Self {
        let n = rows.len();
        let mut distances = Vec::with_capacity(n * k_max);
        let mut indices = Vec::with_capacity(n * k_max);
        for row in rows {
            debug_assert_eq!(row.len(), k_max);
            for c in row {
                distances.push(c.d2.sqrt());
                indices.push(c.index);
            }
        }
        NeighborTable {
            n,
            k_max,
            dim: cloud.dim(),
            distances,
            indices,
            source_index: (0..n).collect(),
        }
    }

    fn first_duplicate(&self) -> Option<(usize, usize)> {
        (0..self.n).find(|&i| self.distances(i)[0] == 0.0).map(|i| {
            let j = self.indices(i)[0];
            (i.min(j), i.max(j))
        })
    }
}

fn check_k_max(n: usize, k_max: usize) -> Result<()> {
    if k_max == 0 {
        return Err(Error::InvalidK("k_max must be at least 1".into()));
    }
    if k_max > n - 1 {
        return Err(Error::KTooLarge {
            k: k_max,
            max: n - 1,
        });
    }
    Ok(())
}

/// Indices of the first occurrence of every distinct coordinate vector.
pub(crate) fn distinct_points(cloud: &PointCloud) -> Vec<usize> {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(cloud.len());
    let mut keep = Vec::with_capacity(cloud.len());
    for (i, p) in cloud.points().enumerate() {
        // -0.0 and 0.0 are the same location
        let key: Vec<u64> = p
            .iter()
            .map(|&v| if v == 0.0 { 0 } else { v.to_bits() })
            .collect();
        if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(key) {
            e.insert(i);
            keep.push(i);
        }
    }
    keep
}

fn brute_force_row(cloud: &PointCloud, i: usize, k: usize) -> Vec<Candidate> {
    let q = cloud.point(i);
    let mut heap = BinaryHeap::with_capacity(k + 1);
    for (j, p) in cloud.points().enumerate() {
        if j != i {
            offer(
                &mut heap,
                k,
                Candidate {
                    d2: sq_dist(q, p),
                    index: j,
                },
            );
        }
    }
    heap.into_sorted_vec()
}

fn build_rows(cloud: &PointCloud, k_max: usize) -> Vec<Vec<Candidate>> {
    if cloud.dim() <= KD_TREE_MAX_DIM {
        let tree = KdTree::new(cloud);
        (0..cloud.len())
            .into_par_iter()
            .map(|i| tree.knn_of_point(i, k_max))
            .collect()
    } else {
        (0..cloud.len())
            .into_par_iter()
            .map(|i| brute_force_row(cloud, i, k_max))
            .collect()
    }
}

/// Exact k-nearest-neighbor table; ties are broken by smaller point index.
pub fn build_neighbor_table(
    cloud: &PointCloud,
    k_max: usize,
    policy: DedupPolicy,
) -> Result<NeighborTable> {
    match policy {
        DedupPolicy::Error => {
            check_k_max(cloud.len(), k_max)?;
            let table = NeighborTable::from_rows(cloud, k_max, build_rows(cloud, k_max));
            if let Some((first, second)) = table.first_duplicate() {
                return Err(Error::DuplicatePoints { first, second });
            }
            Ok(table)
        }
        DedupPolicy::DropDuplicates => {
            let keep = distinct_points(cloud);
            if keep.len() == cloud.len() {
                return build_neighbor_table(cloud, k_max, DedupPolicy::Error);
            }
            let reduced = cloud.select(&keep)?;
            check_k_max(reduced.len(), k_max)?;
            let mut table = NeighborTable::from_rows(&reduced, k_max, build_rows(&reduced, k_max));
            table.source_index = keep;
            Ok(table)
        }
    }
}

/// O(n^2 d) reference table with the same ordering rules as
/// [`build_neighbor_table`] under [`DedupPolicy::Error`].
pub fn brute_force_neighbor_table(cloud: &PointCloud, k_max: usize) -> Result<NeighborTable> {
    check_k_max(cloud.len(), k_max)?;
    let rows = (0..cloud.len())
        .into_par_iter()
        .map(|i| brute_force_row(cloud, i, k_max))
        .collect();
    let table = NeighborTable::from_rows(cloud, k_max, rows);
    if let Some((first, second)) = table.first_duplicate() {
        return Err(Error::DuplicatePoints { first, second });
    }
    Ok(table)
}

/// `S_k(x) = sum_{j<k} log(T_k(x) / T_j(x))`, the sufficient statistic of the
/// local Poisson likelihood.
pub fn log_distance_ratios(table: &NeighborTable, point: usize, k: usize) -> Result<f64> {
    table.check_k(k)?;
    log_ratio_sum(table.distances(point), k).ok_or(Error::DegenerateNeighborhood { point })
}

/// `S_k` for every point of the table.
pub fn all_log_distance_ratios(table: &NeighborTable, k: usize) -> Result<Vec<f64>> {
    table.check_k(k)?;
    let sums: Vec<Option<f64>> = (0..table.len())
        .into_par_iter()
        .map(|i| log_ratio_sum(table.distances(i), k))
        .collect();
    sums.into_iter()
        .enumerate()
        .map(|(point, s)| s.ok_or(Error::DegenerateNeighborhood { point }))
        .collect()
}

#[inline]
fn log_ratio_sum(row: &[f64], k: usize) -> Option<f64> {
    if row[0] <= 0.0 {
        return None;
    }
    let tk = row[k - 1];
    Some(row[..k - 1].iter().map(|&tj| (tk / tj).ln()).sum())
}

use crate::error::{Error, Result};

/// `n` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: Vec<f64>,
    n: usize,
    d: usize,
}

impl PointCloud {
    /// Wraps a row-major coordinate buffer after checking shape and finiteness.
    pub fn new(coords: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::ZeroDimension);
        }
        if n < 2 {
            return Err(Error::TooFewPoints(n));
        }
        if coords.len() != n * d {
            return Err(Error::ShapeMismatch {
                len: coords.len(),
                n,
                d,
            });
        }
        if let Some(pos) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput {
                point: pos / d,
                column: pos % d,
            });
        }
        Ok(Self { coords, n, d })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut coords = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::RaggedRows {
                    row: i,
                    expected: d,
                    found: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Self::new(coords, rows.len(), d)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    /// Applies `f` to every point, producing a cloud of the same size in
    /// `out_dim` dimensions.
    pub fn map_points<F>(&self, out_dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let mut coords = vec![0.0; self.n * out_dim];
        for (src, dst) in self.points().zip(coords.chunks_exact_mut(out_dim.max(1))) {
            f(src, dst);
        }
        Self::new(coords, self.n, out_dim)
    }

    /// Rows of `self` selected by `keep`, in the given order.
    pub(crate) fn select(&self, keep: &[usize]) -> Result<Self> {
        let mut coords = Vec::with_capacity(keep.len() * self.d);
        for &i in keep {
            coords.extend_from_slice(self.point(i));
        }
        Self::new(coords, keep.len(), self.d)
    }
}

/// Squared Euclidean distance, summed in coordinate order.
///
/// Every neighbor search in the crate goes through this function so that the
/// accelerated and brute-force tables agree bit for bit.
#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = x - y;
            t * t
        })
        .sum()
}

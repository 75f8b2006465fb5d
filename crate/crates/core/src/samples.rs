use serde::{Deserialize, Serialize};

/// `m x N` sample matrix stored as `N` points of dimension `m`.
///
/// The pruning code treats every column of the selected-term matrix as a point
/// in feature space, so columns are what gets stored contiguously.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl SampleMatrix {
    /// Builds from `N` points; all points must share a dimension `>= 1`.
    pub fn from_points(points: Vec<Vec<f64>>) -> Self {
        let dim = points.first().map_or(0, Vec::len);
        assert!(
            points.iter().all(|p| p.len() == dim),
            "points must share one dimension"
        );
        Self { points, dim }
    }

    /// Builds from `m` feature rows of equal length `N`.
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let n = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == n), "rows must share one length");
        let points = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Self {
            points,
            dim: rows.len(),
        }
    }

    /// Feature count `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sample count `N`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[i]).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&j| self.points[j].clone()).collect(),
            dim: self.dim,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().flatten().all(|v| v.is_finite())
    }

    /// Per-feature mean over all samples.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for p in &self.points {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        let n = self.points.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

//! Graph Laplacians and the k-means based orthonormal starting point.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HintError, Result};
use crate::simmat::SimMatrix;

/// Self-similarity added to documents with zero degree.
pub const DEGREE_EPSILON: f64 = 1e-8;

/// Lloyd iteration cap.
pub const KMEANS_MAX_ITER: usize = 300;

#[derive(Debug, Clone)]
pub struct LaplacianBundle {
    /// Diagonal of `D`, after regularising isolated documents.
    pub degree: DVector<f64>,
    /// `L = D − S`.
    pub laplacian: DMatrix<f64>,
    /// `L̃ = D^{-1/2} L D^{-1/2}`.
    pub normalized: DMatrix<f64>,
    /// Diagonal of `D^{-1/2}`.
    pub d_inv_sqrt: DVector<f64>,
}

pub fn build_laplacian(sim: &SimMatrix) -> Result<LaplacianBundle> {
    let s = &sim.s;
    let n = s.nrows();
    if s.ncols() != n {
        return Err(HintError::Validation("similarity matrix is not square".into()));
    }
    let scale = s.amax().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (s[(i, j)] - s[(j, i)]).abs() > 1e-12 * scale {
                return Err(HintError::Validation(format!(
                    "similarity matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    if s.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(HintError::Validation(
            "similarity entries must be finite and non-negative".into(),
        ));
    }

    let mut s = s.clone();
    let mut degree = DVector::zeros(n);
    for i in 0..n {
        let mut d: f64 = s.row(i).sum();
        if d <= 0.0 {
            s[(i, i)] += DEGREE_EPSILON;
            d = DEGREE_EPSILON;
        }
        degree[i] = d;
    }
    let d_inv_sqrt = degree.map(|d| 1.0 / d.sqrt());
    let mut laplacian = -s;
    for i in 0..n {
        laplacian[(i, i)] += degree[i];
    }
    let mut normalized = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            normalized[(i, j)] = d_inv_sqrt[i] * laplacian[(i, j)] * d_inv_sqrt[j];
        }
    }
    Ok(LaplacianBundle {
        degree,
        laplacian,
        normalized,
        d_inv_sqrt,
    })
}

fn sq_dist(rows: &DMatrix<f64>, i: usize, c: &DMatrix<f64>, j: usize) -> f64 {
    rows.row(i)
        .iter()
        .zip(c.row(j).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Nearest centroid, lowest index on ties.
fn nearest(rows: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.nrows() {
        let d = sq_dist(rows, i, centroids, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(rows: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = rows.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut dist: Vec<f64> = (0..n)
        .map(|i| {
            rows.row(i)
                .iter()
                .zip(rows.row(chosen[0]).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        })
        .collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 && total.is_finite() {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive mass")
        } else {
            // Every point coincides with a centre: take an unused index.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, d) in dist.iter_mut().enumerate() {
            let nd: f64 = rows
                .row(i)
                .iter()
                .zip(rows.row(next).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if nd < *d {
                *d = nd;
            }
        }
    }
    DMatrix::from_fn(k, rows.ncols(), |c, j| rows[(chosen[c], j)])
}

/// Lloyd's algorithm with k-means++ seeding; deterministic for a given seed.
///
/// An emptied cluster is re-seeded at the point farthest from its own
/// centroid. Iterates until assignments stop changing or
/// [`KMEANS_MAX_ITER`] rounds.
pub fn kmeans(rows: &DMatrix<f64>, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = rows.nrows();
    if k == 0 || k > n {
        return Err(HintError::Validation(format!(
            "k-means needs 1 <= k <= n (k = {k}, n = {n})"
        )));
    }
    if rows.ncols() == 0 {
        return Err(HintError::Validation("k-means needs at least one feature".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(rows, k, &mut rng);
    let mut labels = vec![usize::MAX; n];

    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let (c, _) = nearest(rows, i, &centroids);
            if *label != c {
                *label = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sizes = vec![0usize; k];
        let mut sums = DMatrix::zeros(k, rows.ncols());
        for (i, &c) in labels.iter().enumerate() {
            sizes[c] += 1;
            let mut r = sums.row_mut(c);
            r += rows.row(i);
        }
        for (c, &size) in sizes.iter().enumerate() {
            if size > 0 {
                let mean = sums.row(c) / size as f64;
                centroids.set_row(c, &mean);
            }
        }
        for c in (0..k).filter(|&c| sizes[c] == 0) {
            let far = (0..n)
                .map(|i| (i, sq_dist(rows, i, &centroids, labels[i])))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
                .0;
            centroids.set_row(c, &rows.row(far));
            labels[far] = c;
        }
    }
    Ok(labels)
}

/// Orthonormal `n × k` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub x: DMatrix<f64>,
}

impl Embedding {
    /// Wraps `x`, checking `‖XᵀX − I‖_F ≤ 1e-8`.
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        let e = Embedding { x };
        let err = e.feasibility_error();
        if err > 1e-8 {
            return Err(HintError::Validation(format!(
                "columns are not orthonormal (‖XᵀX − I‖_F = {err:e})"
            )));
        }
        Ok(e)
    }

    /// Orthonormalises the columns of `x` (modified Gram–Schmidt, two passes).
    pub fn orthonormalize(x: DMatrix<f64>) -> Self {
        Embedding {
            x: gram_schmidt(x),
        }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn feasibility_error(&self) -> f64 {
        feasibility_error(&self.x)
    }
}

/// `‖XᵀX − I‖_F`.
pub fn feasibility_error(x: &DMatrix<f64>) -> f64 {
    let mut g = x.tr_mul(x);
    for i in 0..g.nrows() {
        g[(i, i)] -= 1.0;
    }
    g.norm()
}

/// Modified Gram–Schmidt with re-orthogonalisation. A column that vanishes is
/// replaced by the standard basis vector least represented in the span so far.
pub(crate) fn gram_schmidt(mut x: DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = x.shape();
    for j in 0..k {
        let original = x.column(j).norm();
        for _ in 0..2 {
            for p in 0..j {
                let proj = x.column(p).dot(&x.column(j));
                let q = x.column(p).clone_owned();
                x.column_mut(j).axpy(-proj, &q, 1.0);
            }
        }
        let norm = x.column(j).norm();
        if norm <= 1e-10 * original.max(1.0) {
            let basis = (0..n)
                .map(|i| {
                    let weight: f64 = (0..j).map(|p| x[(i, p)] * x[(i, p)]).sum();
                    (i, weight)
                })
                .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
                .0;
            x.column_mut(j).fill(0.0);
            x[(basis, j)] = 1.0;
            for _ in 0..2 {
                for p in 0..j {
                    let proj = x.column(p).dot(&x.column(j));
                    let q = x.column(p).clone_owned();
                    x.column_mut(j).axpy(-proj, &q, 1.0);
                }
            }
        }
        let norm = x.column(j).norm();
        x.column_mut(j).unscale_mut(norm);
    }
    x
}

/// Cluster indicator matrix of `labels`, each column scaled to unit norm.
pub fn indicator_embedding(labels: &[usize], k: usize) -> Embedding {
    let mut z = DMatrix::zeros(labels.len(), k);
    for (i, &c) in labels.iter().enumerate() {
        z[(i, c)] = 1.0;
    }
    for mut col in z.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col.unscale_mut(norm);
        }
    }
    Embedding::orthonormalize(z)
}

/// k-means on the rows of `S`, turned into an orthonormal indicator embedding.
pub fn init_embedding(sim: &SimMatrix, k: usize, seed: u64) -> Result<Embedding> {
    let labels = kmeans(&sim.s, k, seed)?;
    Ok(indicator_embedding(&labels, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(s: DMatrix<f64>) -> SimMatrix {
        let n = s.nrows();
        SimMatrix {
            s,
            weights: vec![1.0 / n as f64; n],
        }
    }

    #[test]
    fn two_node_laplacian() {
        let b = build_laplacian(&sim(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]))).unwrap();
        assert_eq!(b.degree.as_slice(), &[1.0, 1.0]);
        assert_eq!(b.laplacian, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let mut ev: Vec<f64> = b.normalized.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-14 && (ev[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn isolated_node_is_regularised() {
        let s = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = build_laplacian(&sim(s)).unwrap();
        assert_eq!(b.degree[2], DEGREE_EPSILON);
        assert!(b.normalized.iter().all(|v| v.is_finite()));
        for r in b.laplacian.row_iter() {
            assert!(r.sum().abs() < 1e-10);
        }
    }

    #[test]
    fn asymmetric_similarity_is_rejected() {
        let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(build_laplacian(&sim(s)), Err(HintError::Validation(_))));
    }

    #[test]
    fn kmeans_separates_groups() {
        let rows = DMatrix::from_column_slice(6, 1, &[0.0, 0.1, 0.2, 10.0, 10.1, 10.2]);
        let l = kmeans(&rows, 2, 3).unwrap();
        assert_eq!(l[0], l[1]);
        assert_eq!(l[1], l[2]);
        assert_eq!(l[3], l[4]);
        assert_eq!(l[4], l[5]);
        assert_ne!(l[0], l[3]);
        assert_eq!(l, kmeans(&rows, 2, 3).unwrap());
    }

    #[test]
    fn kmeans_k_equals_n() {
        let rows = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 5.0, 9.0]);
        let mut l = kmeans(&rows, 4, 0).unwrap();
        l.sort_unstable();
        assert_eq!(l, vec![0, 1, 2, 3]);
        assert!(kmeans(&rows, 5, 0).is_err());
    }

    #[test]
    fn indicator_embedding_normalises_columns() {
        let e = indicator_embedding(&[0, 0, 1, 1], 2);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = DMatrix::from_column_slice(4, 2, &[h, h, 0.0, 0.0, 0.0, 0.0, h, h]);
        assert!((e.x - expected).norm() < 1e-15);
    }

    #[test]
    fn distinct_points_with_k_equal_n_give_permutation() {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 1.0, 0.5, 0.0, 0.5, 1.0]);
        let e = init_embedding(&sim(s), 3, 11).unwrap();
        for row in e.x.row_iter() {
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(row.iter().filter(|&&v| v == 0.0).count(), 2);
        }
        assert!(e.feasibility_error() <= 1e-12);
    }

    #[test]
    fn gram_schmidt_fills_empty_columns() {
        let z = DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        let x = gram_schmidt(z);
        assert!(feasibility_error(&x) < 1e-12);
    }
}

//! Meta-path similarity matrices and anchor transition matrices.

use std::io::Write;

use nalgebra::DMatrix;

use crate::corpus::AnchorSet;
use crate::error::{HintError, Result};
use crate::hin::CountMatrix;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Uniform weights `1/n` over `n` meta-paths.
pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn check_weights(counts: &[CountMatrix], w: &[f64]) -> Result<()> {
    if counts.len() != w.len() {
        return Err(HintError::Config(format!(
            "{} meta-path weights given for {} meta-paths",
            w.len(),
            counts.len()
        )));
    }
    if w.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(HintError::Config("meta-path weights must be finite and >= 0".into()));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(HintError::Config(format!(
            "meta-path weights must sum to 1 (got {sum})"
        )));
    }
    if let Some(first) = counts.first() {
        if counts.iter().any(|c| c.n() != first.n()) {
            return Err(HintError::Validation(
                "count matrices cover collections of different sizes".into(),
            ));
        }
    }
    Ok(())
}

/// Contribution of one meta-path to `Sim(x, y)`, before weighting.
#[inline]
fn path_score(a: &CountMatrix, x: usize, y: usize) -> f64 {
    let den = a.row_total(x) + a.row_total(y);
    if den == 0 {
        return 0.0;
    }
    (a.get(x, y) + a.get(y, x)) as f64 / den as f64
}

/// Weighted meta-path similarity of documents `x` and `y`:
/// `Σ_i w_i (A_i(x,y) + A_i(y,x)) / (|P_i(x⇝•)| + |P_i(y⇝•)|)`.
///
/// A meta-path under which both documents are isolated contributes 0.
pub fn hint_similarity(x: usize, y: usize, counts: &[CountMatrix], w: &[f64]) -> Result<f64> {
    check_weights(counts, w)?;
    if let Some(n) = counts.first().map(CountMatrix::n) {
        if x >= n || y >= n {
            return Err(HintError::Validation(format!(
                "document index ({x}, {y}) out of range for {n} documents"
            )));
        }
    }
    Ok(counts
        .iter()
        .zip(w)
        .map(|(a, &wi)| wi * path_score(a, x, y))
        .sum())
}

/// Combined similarity of one collection, with the weights that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMatrix {
    pub s: DMatrix<f64>,
    pub weights: Vec<f64>,
}

impl SimMatrix {
    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    /// Dense CSV, one matrix row per line, no header (the matrix is square).
    pub fn write_dense_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in self.s.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Sparse `row,col,value` CSV of non-zero entries.
    pub fn write_triplet_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "row,col,value")?;
        for i in 0..self.n() {
            for j in 0..self.n() {
                let v = self.s[(i, j)];
                if v != 0.0 {
                    writeln!(out, "{i},{j},{v}")?;
                }
            }
        }
        Ok(())
    }
}

/// Evaluates [`hint_similarity`] for every document pair, visiting only
/// pairs joined by at least one path instance.
pub fn build_similarity(counts: &[CountMatrix], w: &[f64]) -> Result<SimMatrix> {
    check_weights(counts, w)?;
    let n = counts.first().map_or(0, CountMatrix::n);
    let mut s = DMatrix::<f64>::zeros(n, n);
    for (a, &wi) in counts.iter().zip(w) {
        if wi == 0.0 {
            continue;
        }
        for (x, y, _) in a.triplets() {
            // Each unordered pair once; (x, y) with x > y only when its mirror is absent.
            if x > y && a.get(y, x) != 0 {
                continue;
            }
            let v = wi * path_score(a, x, y);
            s[(x, y)] += v;
            if x != y {
                s[(y, x)] += v;
            }
        }
    }
    Ok(SimMatrix {
        s,
        weights: w.to_vec(),
    })
}

/// Binary anchor matrix `T^(1,2)` (n1 × n2) stored by its anchor pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionMatrix {
    n1: usize,
    n2: usize,
    pairs: Vec<(usize, usize)>,
}

impl TransitionMatrix {
    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    /// `|R|`, the number of anchor pairs.
    pub fn anchor_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// `T^(1,2)` as a dense matrix.
    pub fn t12(&self) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(self.n1, self.n2);
        for &(i, j) in &self.pairs {
            t[(i, j)] = 1.0;
        }
        t
    }

    /// `T^(2,1) = (T^(1,2))ᵀ` as a dense matrix.
    pub fn t21(&self) -> DMatrix<f64> {
        self.t12().transpose()
    }

    /// Number of anchored posts per article (column sums of `T^(1,2)`).
    pub fn column_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n2];
        for &(_, j) in &self.pairs {
            c[j] += 1;
        }
        c
    }

    /// Articles with at least one anchor, ascending.
    pub fn anchored_columns(&self) -> Vec<usize> {
        let mut cols: Vec<usize> = self.pairs.iter().map(|&(_, j)| j).collect();
        cols.sort_unstable();
        cols.dedup();
        cols
    }

    pub fn write_triplet_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "row,col,value")?;
        for &(i, j) in &self.pairs {
            writeln!(out, "{i},{j},1")?;
        }
        Ok(())
    }
}

pub fn build_transition(anchors: &AnchorSet, n1: usize, n2: usize) -> Result<TransitionMatrix> {
    if let Some(&(i, j)) = anchors.pairs().iter().find(|&&(i, j)| i >= n1 || j >= n2) {
        return Err(HintError::Validation(format!(
            "anchor ({i}, {j}) out of bounds for a {n1}x{n2} transition matrix"
        )));
    }
    Ok(TransitionMatrix {
        n1,
        n2,
        pairs: anchors.pairs().to_vec(),
    })
}

//! End-to-end mutual clustering, cross-collection inconsistency and cluster linking.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{extract_anchors, AnchorSet, CorpusPair};
use crate::error::{HintError, Result};
use crate::hin::{build_count_matrix, CountMatrix, MetaPath};
use crate::simmat::{build_similarity, build_transition, uniform_weights, SimMatrix, TransitionMatrix};
use crate::spectral::{build_laplacian, init_embedding, Embedding, LaplacianBundle};
use crate::stiefel::{
    alternating_solve, solve_uncoupled, AlternatingReport, ObjectiveContext, SearchParams,
    SideProblem,
};

/// Soft cluster memberships, one row per document.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMatrix {
    pub h: DMatrix<f64>,
}

impl ConfidenceMatrix {
    pub fn new(h: DMatrix<f64>) -> Result<Self> {
        if h.iter().any(|v| !v.is_finite()) {
            return Err(HintError::Numerical {
                iteration: 0,
                message: "confidence matrix has non-finite entries".into(),
            });
        }
        Ok(ConfidenceMatrix { h })
    }

    /// Binary membership matrix of hard `labels` over `k` clusters.
    pub fn indicator(labels: &[usize], k: usize) -> Self {
        let mut h = DMatrix::zeros(labels.len(), k);
        for (i, &c) in labels.iter().enumerate() {
            h[(i, c)] = 1.0;
        }
        ConfidenceMatrix { h }
    }

    /// `H = D^{-1/2} X`.
    pub fn from_embedding(x: &Embedding, d_inv_sqrt: &DVector<f64>) -> Result<Self> {
        let mut h = x.x.clone();
        for (i, mut row) in h.row_iter_mut().enumerate() {
            row *= d_inv_sqrt[i];
        }
        ConfidenceMatrix::new(h)
    }

    pub fn k(&self) -> usize {
        self.h.ncols()
    }

    /// CSV with header `id,c0,c1,...`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W, ids: &[&str]) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.k()).map(|c| format!("c{c}")).collect();
        writeln!(out, "id,{}", header.join(","))?;
        for (id, row) in ids.iter().zip(self.h.row_iter()) {
            let vals: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{id},{}", vals.join(","))?;
        }
        Ok(())
    }
}

/// Row-wise argmax of `|H|`, lowest column on ties.
pub fn harden(h: &ConfidenceMatrix) -> Vec<usize> {
    h.h.row_iter()
        .map(|row| {
            let mut best = (0, f64::NEG_INFINITY);
            for (j, v) in row.iter().enumerate() {
                if v.abs() > best.1 {
                    best = (j, v.abs());
                }
            }
            best.0
        })
        .collect()
}

/// Rows of `T^(1,2)ᵀ H1` and `T^(1,2)ᵀ T^(1,2) H2` for the anchored articles.
fn pruned(h1: &ConfidenceMatrix, h2: &ConfidenceMatrix, t: &TransitionMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    let cols = t.anchored_columns();
    let counts = t.column_counts();
    let mut slot = BTreeMap::new();
    for (r, &j) in cols.iter().enumerate() {
        slot.insert(j, r);
    }
    let mut bar1 = DMatrix::zeros(cols.len(), h1.k());
    for &(i, j) in t.pairs() {
        let mut row = bar1.row_mut(slot[&j]);
        row += h1.h.row(i);
    }
    let mut bar2 = DMatrix::zeros(cols.len(), h2.k());
    for (r, &j) in cols.iter().enumerate() {
        bar2.set_row(r, &(h2.h.row(j) * counts[j] as f64));
    }
    (bar1, bar2)
}

/// Total inconsistency `d = ‖H̄1H̄1ᵀ − H̄2H̄2ᵀ‖²_F` and its normalisation
/// `Nd = d / (|R|(|R|−1))`.
///
/// `H̄1 = T^(1,2)ᵀ H1` pushes post memberships onto the articles they anchor;
/// `H̄2 = T^(1,2)ᵀ T^(1,2) H2` scales each article's own membership by its
/// number of anchored posts.
pub fn inconsistency(
    h1: &ConfidenceMatrix,
    h2: &ConfidenceMatrix,
    t: &TransitionMatrix,
) -> Result<(f64, f64)> {
    check_shapes(h1, h2, t)?;
    let r = t.anchor_count();
    if r < 2 {
        return Err(HintError::Validation(format!(
            "normalised inconsistency undefined for |R| = {r}"
        )));
    }
    let (bar1, bar2) = pruned(h1, h2, t);
    let diff = &bar1 * bar1.transpose() - &bar2 * bar2.transpose();
    let d = diff.norm_squared();
    Ok((d, d / (r * (r - 1)) as f64))
}

/// Pairwise form of the inconsistency: for every ordered pair of anchored
/// articles `(i, j)` and every pair of posts `p → i`, `q → j`, accumulate
/// `(h2_i·h2_j − h1_p·h1_q)²`. Squares each post pair separately, unlike
/// [`inconsistency`], which squares after summing over them; the two agree
/// only when posts anchored to the same article share a membership row.
pub fn pairwise_inconsistency(
    h1: &ConfidenceMatrix,
    h2: &ConfidenceMatrix,
    t: &TransitionMatrix,
) -> Result<f64> {
    check_shapes(h1, h2, t)?;
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(i, j) in t.pairs() {
        groups.entry(j).or_default().push(i);
    }
    let mut d = 0.0;
    for (&ni, posts_i) in &groups {
        for (&nj, posts_j) in &groups {
            let news = h2.h.row(ni).dot(&h2.h.row(nj));
            for &p in posts_i {
                for &q in posts_j {
                    let e = news - h1.h.row(p).dot(&h1.h.row(q));
                    d += e * e;
                }
            }
        }
    }
    Ok(d)
}

fn check_shapes(h1: &ConfidenceMatrix, h2: &ConfidenceMatrix, t: &TransitionMatrix) -> Result<()> {
    if h1.h.nrows() != t.n1() || h2.h.nrows() != t.n2() {
        return Err(HintError::Validation(format!(
            "confidence matrices have {} and {} rows, transition matrix is {}x{}",
            h1.h.nrows(),
            h2.h.nrows(),
            t.n1(),
            t.n2()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterLink {
    pub cluster1: usize,
    pub cluster2: usize,
    /// Share of the cluster's anchored posts whose article lies in `cluster2`.
    pub anchored_fraction: f64,
}

/// Links each post cluster to the article cluster receiving the largest share
/// of its anchors, when that share reaches `link_threshold`.
pub fn link_clusters(
    labels1: &[usize],
    labels2: &[usize],
    anchors: &AnchorSet,
    link_threshold: f64,
) -> Result<Vec<ClusterLink>> {
    if !(link_threshold > 0.0 && link_threshold <= 1.0) {
        return Err(HintError::Config(format!(
            "link threshold must lie in (0, 1] (got {link_threshold})"
        )));
    }
    let mut tallies: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for &(i, j) in anchors.pairs() {
        let (Some(&c1), Some(&c2)) = (labels1.get(i), labels2.get(j)) else {
            return Err(HintError::Validation(format!(
                "anchor ({i}, {j}) has no label"
            )));
        };
        *tallies.entry(c1).or_default().entry(c2).or_insert(0) += 1;
    }
    let mut links = Vec::new();
    for (c1, targets) in tallies {
        let total: usize = targets.values().sum();
        let (c2, hits) = targets
            .iter()
            .fold((0, 0), |best, (&c, &n)| if n > best.1 { (c, n) } else { best });
        let fraction = hits as f64 / total as f64;
        if fraction >= link_threshold {
            links.push(ClusterLink {
                cluster1: c1,
                cluster2: c2,
                anchored_fraction: fraction,
            });
        }
    }
    Ok(links)
}

/// Settings of one mutual clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintOptions {
    pub k1: usize,
    pub k2: usize,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Post meta-path weights; uniform when `None`.
    pub weights1: Option<Vec<f64>>,
    /// Article meta-path weights; uniform when `None`.
    pub weights2: Option<Vec<f64>>,
    pub split_retweet: bool,
    pub min_common: usize,
    pub link_threshold: f64,
    pub seed: u64,
    pub params: SearchParams,
}

impl Default for HintOptions {
    fn default() -> Self {
        HintOptions {
            k1: 2,
            k2: 2,
            theta: 1.0,
            alpha: 1.0,
            beta: 1.0,
            weights1: None,
            weights2: None,
            split_retweet: false,
            min_common: 1,
            link_threshold: 0.8,
            seed: 0,
            params: SearchParams::default(),
        }
    }
}

/// Inconsistency and optimisation summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub anchor_count: usize,
    /// `None` when fewer than two anchors exist.
    pub d: Option<f64>,
    pub nd: Option<f64>,
    /// The same quantity on hardened (binary) memberships.
    pub d_hard: Option<f64>,
    pub nd_hard: Option<f64>,
    pub objective_initial: f64,
    pub objective_final: f64,
    pub rounds: usize,
    pub converged: bool,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct MutualClustering {
    pub labels1: Vec<usize>,
    pub labels2: Vec<usize>,
    pub h1: ConfidenceMatrix,
    pub h2: ConfidenceMatrix,
    pub links: Vec<ClusterLink>,
    pub anchors: AnchorSet,
    pub metrics: RunMetrics,
    pub report: AlternatingReport,
}

/// Similarity, Laplacian and anchor data shared by every run on one corpus.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub anchors: AnchorSet,
    pub counts1: Vec<CountMatrix>,
    pub counts2: Vec<CountMatrix>,
    pub sim1: SimMatrix,
    pub sim2: SimMatrix,
    pub lap1: LaplacianBundle,
    pub lap2: LaplacianBundle,
    pub transition: TransitionMatrix,
}

fn count_all(docs: &[crate::corpus::Document], paths: &[MetaPath]) -> Result<Vec<CountMatrix>> {
    paths
        .par_iter()
        .map(|p| build_count_matrix(docs, p))
        .collect()
}

fn resolve_weights(given: &Option<Vec<f64>>, n: usize) -> Vec<f64> {
    given.clone().unwrap_or_else(|| uniform_weights(n))
}

/// Anchors, count matrices, similarities, Laplacians and the transition matrix.
pub fn prepare(corpus: &CorpusPair, opts: &HintOptions) -> Result<PreparedCorpus> {
    corpus.validate()?;
    corpus.require_non_empty()?;
    let anchors = extract_anchors(corpus, opts.min_common)?;
    let paths1 = MetaPath::defaults_type1(opts.split_retweet);
    let paths2 = MetaPath::defaults_type2();
    let (counts1, counts2) = rayon::join(
        || count_all(&corpus.collection1, &paths1),
        || count_all(&corpus.collection2, &paths2),
    );
    let (counts1, counts2) = (counts1?, counts2?);
    let sim1 = build_similarity(&counts1, &resolve_weights(&opts.weights1, paths1.len()))?;
    let sim2 = build_similarity(&counts2, &resolve_weights(&opts.weights2, paths2.len()))?;
    let lap1 = build_laplacian(&sim1)?;
    let lap2 = build_laplacian(&sim2)?;
    let transition = build_transition(&anchors, corpus.n1(), corpus.n2())?;
    Ok(PreparedCorpus {
        anchors,
        counts1,
        counts2,
        sim1,
        sim2,
        lap1,
        lap2,
        transition,
    })
}

fn check_k(k: usize, n: usize, which: &str) -> Result<()> {
    if k == 0 || k > n {
        return Err(HintError::Config(format!(
            "{which} must satisfy 1 <= {which} <= {n} (got {k})"
        )));
    }
    Ok(())
}

/// Runs the whole pipeline on a corpus.
pub fn run_hint(corpus: &CorpusPair, opts: &HintOptions) -> Result<MutualClustering> {
    check_k(opts.k1, corpus.n1(), "k1")?;
    check_k(opts.k2, corpus.n2(), "k2")?;
    let prepared = prepare(corpus, opts)?;
    run_prepared(&prepared, opts)
}

/// Runs initialisation, optimisation and post-processing on prepared inputs.
pub fn run_prepared(p: &PreparedCorpus, opts: &HintOptions) -> Result<MutualClustering> {
    let (n1, n2) = (p.transition.n1(), p.transition.n2());
    check_k(opts.k1, n1, "k1")?;
    check_k(opts.k2, n2, "k2")?;
    let ctx = ObjectiveContext::new(&p.lap1, &p.lap2, &p.transition, opts.theta, opts.alpha, opts.beta)?;
    let x1 = init_embedding(&p.sim1, opts.k1, opts.seed)?;
    let x2 = init_embedding(&p.sim2, opts.k2, opts.seed)?;
    let report = alternating_solve(&x1, &x2, &ctx, &opts.params)?;

    let h1 = ConfidenceMatrix::from_embedding(&report.x1, &p.lap1.d_inv_sqrt)?;
    let h2 = ConfidenceMatrix::from_embedding(&report.x2, &p.lap2.d_inv_sqrt)?;
    let labels1 = harden(&h1);
    let labels2 = harden(&h2);
    let links = link_clusters(&labels1, &labels2, &p.anchors, opts.link_threshold)?;

    let r = p.transition.anchor_count();
    let (soft, hard) = if r >= 2 {
        let hard1 = ConfidenceMatrix::indicator(&labels1, opts.k1);
        let hard2 = ConfidenceMatrix::indicator(&labels2, opts.k2);
        (
            Some(inconsistency(&h1, &h2, &p.transition)?),
            Some(inconsistency(&hard1, &hard2, &p.transition)?),
        )
    } else {
        (None, None)
    };
    let metrics = RunMetrics {
        anchor_count: r,
        d: soft.map(|v| v.0),
        nd: soft.map(|v| v.1),
        d_hard: hard.map(|v| v.0),
        nd_hard: hard.map(|v| v.1),
        objective_initial: report.trace[0],
        objective_final: *report.trace.last().expect("trace is never empty"),
        rounds: report.rounds,
        converged: report.converged,
        inner_iterations: report.rows.len(),
    };
    Ok(MutualClustering {
        labels1,
        labels2,
        h1,
        h2,
        links,
        anchors: p.anchors.clone(),
        metrics,
        report,
    })
}

/// Spectral clustering of a single collection through the same optimiser with
/// no coupling term: k-means start, repeated curvilinear search, hardening.
pub fn single_collection_labels(
    sim: &SimMatrix,
    lap: &LaplacianBundle,
    k: usize,
    weight: f64,
    seed: u64,
    params: &SearchParams,
) -> Result<Vec<usize>> {
    check_k(k, sim.n(), "k")?;
    let x0 = init_embedding(sim, k, seed)?;
    let problem = SideProblem::uncoupled(&lap.normalized, weight);
    let x = solve_uncoupled(&x0, &problem, params)?;
    Ok(harden(&ConfidenceMatrix::from_embedding(&x, &lap.d_inv_sqrt)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Four posts, three articles; articles 0 and 2 each anchor two posts
    /// that sit in different post clusters, while both articles share one
    /// article cluster.
    fn figure_four() -> (ConfidenceMatrix, ConfidenceMatrix, TransitionMatrix) {
        let anchors = AnchorSet::from_pairs(vec![(0, 0), (2, 0), (1, 2), (3, 2)]).unwrap();
        let t = build_transition(&anchors, 4, 3).unwrap();
        let h1 = ConfidenceMatrix::indicator(&[0, 0, 1, 1], 2);
        let h2 = ConfidenceMatrix::indicator(&[0, 1, 0], 2);
        (h1, h2, t)
    }

    #[test]
    fn figure_four_inconsistency() {
        let (h1, h2, t) = figure_four();
        let (d, nd) = inconsistency(&h1, &h2, &t).unwrap();
        assert_eq!(d, 16.0);
        assert!((nd - 16.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn consistent_clusterings_have_zero_inconsistency() {
        let anchors = AnchorSet::from_pairs(vec![(0, 0), (1, 0), (2, 1), (3, 1)]).unwrap();
        let t = build_transition(&anchors, 4, 2).unwrap();
        let h1 = ConfidenceMatrix::indicator(&[0, 0, 1, 1], 2);
        let h2 = ConfidenceMatrix::indicator(&[1, 0], 2);
        let (bar1, bar2) = pruned(&h1, &h2, &t);
        assert_eq!(bar1.row(0).sum(), 2.0);
        assert_eq!(bar2.row(0).sum(), 2.0);
        let (d, nd) = inconsistency(&h1, &h2, &t).unwrap();
        assert_eq!((d, nd), (0.0, 0.0));
        assert_eq!(pairwise_inconsistency(&h1, &h2, &t).unwrap(), 0.0);
    }

    #[test]
    fn rotation_leaves_inconsistency_unchanged() {
        let (h1, h2, t) = figure_four();
        let (c, s) = (0.6f64, 0.8f64);
        let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let r1 = ConfidenceMatrix::new(&h1.h * &q).unwrap();
        let r2 = ConfidenceMatrix::new(&h2.h * &q).unwrap();
        let (d, _) = inconsistency(&r1, &r2, &t).unwrap();
        assert!((d - 16.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_anchors() {
        let anchors = AnchorSet::from_pairs(vec![(0, 0)]).unwrap();
        let t = build_transition(&anchors, 2, 2).unwrap();
        let h = ConfidenceMatrix::indicator(&[0, 1], 2);
        assert!(inconsistency(&h, &h, &t).is_err());
    }

    #[test]
    fn harden_rules() {
        let h = ConfidenceMatrix::new(DMatrix::from_row_slice(
            3,
            2,
            &[0.9, 0.1, 0.5, 0.5, -0.8, 0.3],
        ))
        .unwrap();
        assert_eq!(harden(&h), vec![0, 0, 0]);
    }

    #[test]
    fn link_rules() {
        // Cluster 0: 10 anchored posts, 9 into article cluster 3.
        let mut labels1 = vec![0; 10];
        labels1.extend([1, 1, 2]);
        let mut labels2 = vec![3; 9];
        labels2.extend([1, 4, 5, 0]);
        let mut pairs: Vec<(usize, usize)> = (0..10).map(|i| (i, i)).collect();
        pairs.extend([(10, 10), (11, 11)]);
        let anchors = AnchorSet::from_pairs(pairs).unwrap();
        let links = link_clusters(&labels1, &labels2, &anchors, 0.8).unwrap();
        assert_eq!(
            links,
            vec![ClusterLink {
                cluster1: 0,
                cluster2: 3,
                anchored_fraction: 0.9
            }]
        );
        // Cluster 1 splits 50/50 and cluster 2 has no anchors: neither links.
        assert!(link_clusters(&labels1, &labels2, &anchors, 0.0).is_err());
    }
}

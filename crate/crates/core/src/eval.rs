//! Clustering quality metrics and cross-collection correlation.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{HintError, Result};
use crate::mutual::{harden, ConfidenceMatrix};
use crate::simmat::TransitionMatrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum NmiNorm {
    /// `I / sqrt(H(L)·H(T))`.
    #[default]
    Sqrt,
    /// `2I / (H(L) + H(T))`.
    Arithmetic,
}

fn check_lengths<A, B>(a: &[A], b: &[B]) -> Result<()> {
    if a.len() != b.len() {
        return Err(HintError::Validation(format!(
            "label vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(HintError::Validation("label vectors are empty".into()));
    }
    Ok(())
}

fn entropy<K>(counts: &HashMap<K, usize>, n: f64) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn tally<K: Hash + Eq + Clone>(xs: &[K]) -> HashMap<K, usize> {
    let mut m = HashMap::new();
    for x in xs {
        *m.entry(x.clone()).or_insert(0) += 1;
    }
    m
}

/// Normalised mutual information with natural logarithms.
///
/// Two single-cluster partitions score 1; a single-cluster partition against
/// a non-trivial one scores 0.
pub fn nmi<L, T>(labels: &[L], truth: &[T], norm: NmiNorm) -> Result<f64>
where
    L: Hash + Eq + Clone,
    T: Hash + Eq + Clone,
{
    check_lengths(labels, truth)?;
    let n = labels.len() as f64;
    let cl = tally(labels);
    let ct = tally(truth);
    let mut joint: HashMap<(L, T), usize> = HashMap::new();
    for (l, t) in labels.iter().zip(truth) {
        *joint.entry((l.clone(), t.clone())).or_insert(0) += 1;
    }
    let hl = entropy(&cl, n);
    let ht = entropy(&ct, n);
    if cl.len() == 1 && ct.len() == 1 {
        return Ok(1.0);
    }
    if cl.len() == 1 || ct.len() == 1 {
        return Ok(0.0);
    }
    let mi: f64 = joint
        .iter()
        .map(|((l, t), &c)| {
            let pxy = c as f64 / n;
            let px = cl[l] as f64 / n;
            let py = ct[t] as f64 / n;
            pxy * (pxy / (px * py)).ln()
        })
        .sum();
    let denom = match norm {
        NmiNorm::Sqrt => (hl * ht).sqrt(),
        NmiNorm::Arithmetic => 0.5 * (hl + ht),
    };
    Ok((mi / denom).clamp(0.0, 1.0))
}

/// F1 over same-cluster document pairs.
///
/// Returns 1 when neither partition has a same-cluster pair; precision or
/// recall with an empty denominator counts as 0.
pub fn pairwise_f1<L, T>(labels: &[L], truth: &[T]) -> Result<f64>
where
    L: Hash + Eq + Clone,
    T: Hash + Eq + Clone,
{
    check_lengths(labels, truth)?;
    let pairs = |c: usize| (c * c.saturating_sub(1) / 2) as f64;
    let mut joint: HashMap<(L, T), usize> = HashMap::new();
    for (l, t) in labels.iter().zip(truth) {
        *joint.entry((l.clone(), t.clone())).or_insert(0) += 1;
    }
    let tp: f64 = joint.values().map(|&c| pairs(c)).sum();
    let predicted: f64 = tally(labels).values().map(|&c| pairs(c)).sum();
    let actual: f64 = tally(truth).values().map(|&c| pairs(c)).sum();
    if predicted == 0.0 && actual == 0.0 {
        return Ok(1.0);
    }
    let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
    let recall = if actual > 0.0 { tp / actual } else { 0.0 };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// `H(Y|X)` over anchored posts, two estimates of the joint distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondEntropy {
    /// Empirical joint of (post cluster, transferred article cluster).
    pub empirical: f64,
    /// Only the dominant post cluster of each article cluster contributes.
    pub max_aligned: f64,
}

/// Conditional entropy of article clusters, transferred onto their anchored
/// posts, given the posts' own clusters.
pub fn conditional_entropy_labels(
    labels1: &[usize],
    labels2: &[usize],
    t: &TransitionMatrix,
) -> Result<CondEntropy> {
    if labels1.len() != t.n1() || labels2.len() != t.n2() {
        return Err(HintError::Validation(format!(
            "label vectors have lengths {} and {}, transition matrix is {}x{}",
            labels1.len(),
            labels2.len(),
            t.n1(),
            t.n2()
        )));
    }
    if t.anchor_count() == 0 {
        return Err(HintError::Validation(
            "conditional entropy undefined without anchored documents".into(),
        ));
    }
    let n = t.anchor_count() as f64;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut px: BTreeMap<usize, usize> = BTreeMap::new();
    for &(i, j) in t.pairs() {
        *joint.entry((labels1[i], labels2[j])).or_insert(0) += 1;
        *px.entry(labels1[i]).or_insert(0) += 1;
    }
    let term = |x: usize, c: usize| {
        let pxy = c as f64 / n;
        pxy * ((px[&x] as f64 / n) / pxy).ln()
    };
    let empirical: f64 = joint.iter().map(|(&(x, _), &c)| term(x, c)).sum();

    let mut best: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (&(x, y), &c) in &joint {
        let e = best.entry(y).or_insert((x, c));
        if c > e.1 {
            *e = (x, c);
        }
    }
    let max_aligned: f64 = best.values().map(|&(x, c)| term(x, c)).sum();
    Ok(CondEntropy {
        empirical: empirical.max(0.0),
        max_aligned: max_aligned.max(0.0),
    })
}

/// [`conditional_entropy_labels`] on hardened confidence matrices.
pub fn conditional_entropy(
    h1: &ConfidenceMatrix,
    h2: &ConfidenceMatrix,
    t: &TransitionMatrix,
) -> Result<CondEntropy> {
    conditional_entropy_labels(&harden(h1), &harden(h2), t)
}

/// Name of the F-score variant reported in [`MetricReport::f1_variant`].
pub const F1_VARIANT: &str = "pairwise";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Always [`F1_VARIANT`]; kept in the output so readers know which F-score they see.
    pub f1_variant: String,
    pub nmi1: f64,
    pub nmi2: f64,
    pub f1_1: f64,
    pub f1_2: f64,
    pub cond_entropy: Option<f64>,
    pub cond_entropy_max_aligned: Option<f64>,
    pub d: Option<f64>,
    pub nd: Option<f64>,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str =
        "nmi1,nmi2,f1_1,f1_2,cond_entropy,cond_entropy_max_aligned,d,nd";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.nmi1,
            self.nmi2,
            self.f1_1,
            self.f1_2,
            opt(self.cond_entropy),
            opt(self.cond_entropy_max_aligned),
            opt(self.d),
            opt(self.nd)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AnchorSet;
    use crate::simmat::build_transition;

    const N: NmiNorm = NmiNorm::Sqrt;

    #[test]
    fn nmi_cases() {
        assert!((nmi(&[0, 0, 1, 1, 2], &[5, 5, 3, 3, 9], N).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 0, 1, 1], N).unwrap(), 0.0);
        // Contingency table [[1,1],[1,1]]: I = 0.
        assert!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1], N).unwrap().abs() < 1e-15);
        assert_eq!(nmi(&[7, 7, 7], &[1, 1, 1], N).unwrap(), 1.0);
        assert!(nmi(&[0, 1], &[0], N).is_err());
    }

    #[test]
    fn nmi_norms_agree_on_equal_entropies() {
        let l = [0, 0, 1, 1, 1, 0];
        let t = [1, 0, 0, 1, 1, 0];
        let a = nmi(&l, &t, NmiNorm::Sqrt).unwrap();
        let b = nmi(&l, &t, NmiNorm::Arithmetic).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn f1_cases() {
        assert_eq!(pairwise_f1(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(pairwise_f1(&[0, 1, 2, 3], &[0, 0, 0, 0]).unwrap(), 0.0);
        // TP = 1, FP = 1, FN = 2.
        let f = pairwise_f1(&[0, 0, 1, 1], &[0, 0, 0, 1]).unwrap();
        assert!((f - 0.4).abs() < 1e-15);
        assert_eq!(pairwise_f1(&[0, 1, 2], &[2, 1, 0]).unwrap(), 1.0);
    }

    fn identity_anchors(n: usize) -> TransitionMatrix {
        let a = AnchorSet::from_pairs((0..n).map(|i| (i, i)).collect()).unwrap();
        build_transition(&a, n, n).unwrap()
    }

    #[test]
    fn conditional_entropy_cases() {
        let t = identity_anchors(4);
        let same = conditional_entropy_labels(&[0, 0, 1, 1], &[1, 1, 0, 0], &t).unwrap();
        assert_eq!(same.empirical, 0.0);
        let indep = conditional_entropy_labels(&[0, 0, 1, 1], &[0, 1, 0, 1], &t).unwrap();
        assert!((indep.empirical - std::f64::consts::LN_2).abs() < 1e-12);

        let one = AnchorSet::from_pairs(vec![(1, 0)]).unwrap();
        let t1 = build_transition(&one, 3, 2).unwrap();
        assert_eq!(conditional_entropy_labels(&[0, 1, 1], &[0, 1], &t1).unwrap().empirical, 0.0);

        let none = build_transition(&AnchorSet::default(), 3, 2).unwrap();
        assert!(conditional_entropy_labels(&[0, 1, 1], &[0, 1], &none).is_err());
    }

    #[test]
    fn max_aligned_variant_keeps_dominant_cells() {
        // Joint counts: (0,0)=3, (1,0)=1, (1,1)=2 over 6 anchors.
        let t = identity_anchors(6);
        let ce = conditional_entropy_labels(&[0, 0, 0, 1, 1, 1], &[0, 0, 0, 0, 1, 1], &t).unwrap();
        let expected = 0.5 * (0.5f64 / 0.5).ln() + (2.0 / 6.0) * (1.5f64).ln();
        assert!((ce.max_aligned - expected).abs() < 1e-15);
        let full = expected + (1.0 / 6.0) * (3.0f64).ln();
        assert!((ce.empirical - full).abs() < 1e-15);
    }
}

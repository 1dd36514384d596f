//! Joint spectral objective and its feasible optimisation on the Stiefel manifold.
//!
//! After substituting `X = D^{1/2} H`, both collections are optimised over
//! matrices with orthonormal columns:
//!
//! ```text
//! F(X1, X2) = α·Tr(X1ᵀ L̃1 X1) + β·Tr(X2ᵀ L̃2 X2)
//!           + θ·‖T̃1 X1 (T̃1 X1)ᵀ − T̃2 X2 (T̃2 X2)ᵀ‖²_F / (|R|(|R|−1))
//! ```
//!
//! `T̃1 = (T^(1,2))ᵀ D1^{-1/2}` sums the embeddings of the posts anchored to
//! each article; `T̃2 = (T^(1,2))ᵀ T^(1,2) D2^{-1/2}` scales each anchored
//! article by its anchor count. Both land in the space of anchored articles,
//! which is where the penalty is evaluated (rows of unanchored articles are
//! identically zero and are dropped).
//!
//! The two blocks are updated alternately. Each block update is a
//! curvilinear search along the Cayley curve
//! `Y(τ) = (I + τ/2·A)⁻¹ (I − τ/2·A) X`, `A = G Xᵀ − X Gᵀ`, with
//! Barzilai–Borwein step sizes and a Zhang–Hager non-monotone acceptance
//! test.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HintError, Result};
use crate::simmat::TransitionMatrix;
use crate::spectral::{feasibility_error, gram_schmidt, Embedding, LaplacianBundle};

/// Drift in `‖XᵀX − I‖_F` above which an iterate is re-orthonormalised.
pub const DRIFT_LIMIT: f64 = 1e-6;

const MAX_BACKTRACKS: usize = 60;
/// Consecutive small relative objective changes that end a search.
const STALL_WINDOW: usize = 5;

/// A smooth function on `n × k` matrices, evaluated together with its
/// Euclidean gradient.
pub trait StiefelObjective {
    fn evaluate(&self, x: &DMatrix<f64>) -> (f64, DMatrix<f64>);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchParams {
    /// Armijo constant of the acceptance test.
    pub rho1: f64,
    /// Averaging weight of the non-monotone reference value.
    pub eta: f64,
    pub tau0: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub max_inner: usize,
    pub tol_grad: f64,
    pub tol_obj: f64,
    pub max_outer: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            rho1: 1e-4,
            eta: 0.85,
            tau0: 1e-3,
            tau_min: 1e-10,
            tau_max: 1e3,
            max_inner: 500,
            tol_grad: 1e-6,
            tol_obj: 1e-8,
            max_outer: 50,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HintError::Config(m.to_string()));
        if !(self.rho1 > 0.0 && self.rho1 < 1.0) {
            return bad("rho1 must lie in (0, 1)");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("eta must lie in (0, 1)");
        }
        if !(self.tau_min > 0.0 && self.tau_min < self.tau_max && self.tau_max.is_finite()) {
            return bad("need 0 < tau_min < tau_max < inf");
        }
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return bad("tau0 must be positive");
        }
        if !(self.tol_grad >= 0.0 && self.tol_obj >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        if self.max_outer == 0 {
            return bad("max_outer must be >= 1");
        }
        Ok(())
    }
}

/// `Y(τ) = (I + τ/2 A)⁻¹(I − τ/2 A) X` with `A = G Xᵀ − X Gᵀ`.
///
/// `A` acts only on the span of `[X, G]`, so the transform is carried out in
/// an orthonormal basis `Q` of that span: `Y = Q (I + τ/2 B)⁻¹(I − τ/2 B) QᵀX`
/// with the small skew matrix `B = QᵀAQ`. Orthonormality then rests on `Q`
/// alone and survives large steps.
pub fn cayley_step(x: &Embedding, g: &DMatrix<f64>, tau: f64) -> Result<Embedding> {
    Ok(Embedding {
        x: cayley(&x.x, g, tau)?,
    })
}

fn cayley(x: &DMatrix<f64>, g: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    let (n, k) = x.shape();
    if g.shape() != (n, k) {
        return Err(HintError::Validation(format!(
            "gradient is {:?}, iterate is {:?}",
            g.shape(),
            (n, k)
        )));
    }
    if tau == 0.0 {
        return Ok(x.clone());
    }
    let mut span = DMatrix::zeros(n, 2 * k);
    span.columns_mut(0, k).copy_from(x);
    span.columns_mut(k, k).copy_from(g);
    let q = span.qr().q();
    let qx = q.tr_mul(x);
    let qg = q.tr_mul(g);
    let b = &qg * qx.transpose() - &qx * qg.transpose();
    let b = (&b - b.transpose()) * 0.5;
    let m = b.nrows();

    let mut lhs = &b * (0.5 * tau);
    let mut rhs = &b * (-0.5 * tau);
    for i in 0..m {
        lhs[(i, i)] += 1.0;
        rhs[(i, i)] += 1.0;
    }
    let w = lhs
        .lu()
        .solve(&(rhs * qx))
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or(HintError::StepTooLarge { tau })?;
    Ok(q * w)
}

/// `G − X GᵀX`.
fn projected_gradient(x: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    g - x * g.tr_mul(x)
}

/// Derivative of `τ ↦ F(Y(τ))` at 0: `−½‖A‖²_F = −(‖G‖² − Tr((GᵀX)²))`.
fn curve_slope(x: &DMatrix<f64>, g: &DMatrix<f64>) -> f64 {
    let gx = g.tr_mul(x);
    let tr_sq = gx.component_mul(&gx.transpose()).sum();
    -(g.norm_squared() - tr_sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// Projected gradient norm fell below `tol_grad`.
    Converged,
    /// The objective stopped changing (relative change below `tol_obj`) or no
    /// admissible step remained.
    Stalled,
    /// `max_inner` iterations were used.
    MaxIter,
}

impl SolveStatus {
    pub fn is_converged(self) -> bool {
        !matches!(self, SolveStatus::MaxIter)
    }
}

/// One accepted step of the curvilinear search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    /// 1-based.
    pub iter: usize,
    /// Objective at the accepted point.
    pub objective: f64,
    pub grad_norm: f64,
    pub tau: f64,
    /// Non-monotone reference value `C_k` the step was tested against.
    pub reference: f64,
    /// `ρ₁ τ F′(Y(0))`, non-positive.
    pub decrease: f64,
    /// `‖XᵀX − I‖_F` of the accepted point.
    pub feasibility: f64,
}

impl StepRecord {
    /// `F(X_{k+1}) ≤ C_k + ρ₁ τ_k F′(0)`.
    pub fn satisfies_nonmonotone(&self) -> bool {
        self.objective <= self.reference + self.decrease
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Embedding,
    pub status: SolveStatus,
    pub objective: f64,
    pub grad_norm: f64,
    pub steps: Vec<StepRecord>,
}

impl SolveReport {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }
}

fn check_finite(value: f64, iteration: usize) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(HintError::Numerical {
            iteration,
            message: format!("objective evaluated to {value}"),
        })
    }
}

/// Minimises `f` over the Stiefel manifold starting from `x0`.
pub fn curvilinear_solve<F: StiefelObjective + ?Sized>(
    x0: &Embedding,
    f: &F,
    params: &SearchParams,
) -> Result<SolveReport> {
    params.validate()?;
    let mut x = x0.x.clone();
    let (mut fx, mut g) = f.evaluate(&x);
    check_finite(fx, 0)?;
    let mut pg = projected_gradient(&x, &g);
    let mut grad_norm = pg.norm();

    let mut reference = fx;
    let mut q = 1.0;
    let mut tau = params.tau0;
    let mut steps = Vec::new();
    let mut small_changes = 0;
    let mut status = SolveStatus::MaxIter;

    if grad_norm <= params.tol_grad {
        status = SolveStatus::Converged;
    }

    let mut iter = 0;
    while status == SolveStatus::MaxIter && iter < params.max_inner {
        iter += 1;
        let slope = curve_slope(&x, &g);
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            match cayley(&x, &g, tau) {
                Ok(y) => {
                    let (fy, gy) = f.evaluate(&y);
                    check_finite(fy, iter)?;
                    let decrease = params.rho1 * tau * slope;
                    if fy <= reference + decrease {
                        accepted = Some((y, fy, gy, decrease));
                        break;
                    }
                }
                Err(HintError::StepTooLarge { .. }) => {}
                Err(e) => return Err(e),
            }
            tau *= 0.5;
        }
        let Some((mut y, mut fy, mut gy, decrease)) = accepted else {
            status = SolveStatus::Stalled;
            break;
        };

        let mut feas = feasibility_error(&y);
        if feas > DRIFT_LIMIT {
            warn!("iterate {iter}: orthonormality drift {feas:e}, re-orthonormalising");
            y = gram_schmidt(y);
            (fy, gy) = f.evaluate(&y);
            check_finite(fy, iter)?;
            feas = feasibility_error(&y);
        }

        let pgy = projected_gradient(&y, &gy);
        let s = &y - &x;
        let dy = &pgy - &pg;
        let rel_change = (fx - fy).abs() / (1.0 + fx.abs());

        x = y;
        g = gy;
        pg = pgy;
        grad_norm = pg.norm();
        let q_next = params.eta * q + 1.0;
        let step_reference = reference;
        reference = (params.eta * q * reference + fy) / q_next;
        q = q_next;
        fx = fy;

        steps.push(StepRecord {
            iter,
            objective: fx,
            grad_norm,
            tau,
            reference: step_reference,
            decrease,
            feasibility: feas,
        });

        if grad_norm <= params.tol_grad {
            status = SolveStatus::Converged;
            break;
        }
        if rel_change < params.tol_obj {
            small_changes += 1;
            if small_changes >= STALL_WINDOW {
                status = SolveStatus::Stalled;
                break;
            }
        } else {
            small_changes = 0;
        }

        // Alternating Barzilai–Borwein step sizes.
        let ss = s.norm_squared();
        let sy = s.dot(&dy).abs();
        let yy = dy.norm_squared();
        let bb = if iter % 2 == 1 { ss / sy } else { sy / yy };
        tau = if bb.is_finite() && bb > 0.0 {
            bb.clamp(params.tau_min, params.tau_max)
        } else {
            params.tau_max
        };
    }

    Ok(SolveReport {
        x: Embedding { x },
        status,
        objective: fx,
        grad_norm,
        steps,
    })
}

/// Sparse linear map from one collection's embedding rows into the space of
/// anchored articles.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorMap {
    rows: usize,
    cols: usize,
    /// `(row, col, value)`.
    entries: Vec<(usize, usize, f64)>,
}

impl AnchorMap {
    /// `M X`.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, x.ncols());
        for &(r, c, v) in &self.entries {
            for j in 0..x.ncols() {
                out[(r, j)] += v * x[(c, j)];
            }
        }
        out
    }

    /// `Mᵀ P`.
    pub fn apply_transpose(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.cols, p.ncols());
        for &(r, c, v) in &self.entries {
            for j in 0..p.ncols() {
                out[(c, j)] += v * p[(r, j)];
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    One,
    Two,
}

/// Everything the joint objective needs besides the two variables.
#[derive(Debug, Clone)]
pub struct ObjectiveContext {
    pub l_tilde1: DMatrix<f64>,
    pub l_tilde2: DMatrix<f64>,
    /// `T̃1` restricted to anchored articles.
    pub t_tilde1: AnchorMap,
    /// `T̃2` restricted to anchored articles.
    pub t_tilde2: AnchorMap,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `|R|(|R| − 1)`.
    pub norm_factor: f64,
}

impl ObjectiveContext {
    pub fn new(
        lap1: &LaplacianBundle,
        lap2: &LaplacianBundle,
        t: &TransitionMatrix,
        theta: f64,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(HintError::Config(format!("theta must be >= 0 (got {theta})")));
        }
        if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(HintError::Config("alpha and beta must be finite and >= 0".into()));
        }
        let (n1, n2) = (lap1.degree.len(), lap2.degree.len());
        if t.n1() != n1 || t.n2() != n2 {
            return Err(HintError::Validation(format!(
                "transition matrix is {}x{}, collections have {n1} and {n2} documents",
                t.n1(),
                t.n2()
            )));
        }
        let r = t.anchor_count();
        if theta > 0.0 && r < 2 {
            return Err(HintError::Config(format!(
                "inconsistency penalty undefined with {r} anchor pair(s); set theta=0"
            )));
        }

        let cols = t.anchored_columns();
        let mut slot = vec![usize::MAX; n2];
        for (row, &j) in cols.iter().enumerate() {
            slot[j] = row;
        }
        let m = cols.len();
        let t_tilde1 = AnchorMap {
            rows: m,
            cols: n1,
            entries: t
                .pairs()
                .iter()
                .map(|&(i, j)| (slot[j], i, lap1.d_inv_sqrt[i]))
                .collect(),
        };
        let counts = t.column_counts();
        let t_tilde2 = AnchorMap {
            rows: m,
            cols: n2,
            entries: cols
                .iter()
                .map(|&j| (slot[j], j, counts[j] as f64 * lap2.d_inv_sqrt[j]))
                .collect(),
        };
        Ok(ObjectiveContext {
            l_tilde1: lap1.normalized.clone(),
            l_tilde2: lap2.normalized.clone(),
            t_tilde1,
            t_tilde2,
            theta,
            alpha,
            beta,
            norm_factor: (r * r.saturating_sub(1)) as f64,
        })
    }

    fn check_dims(&self, x1: &DMatrix<f64>, x2: &DMatrix<f64>) -> Result<()> {
        if x1.nrows() != self.l_tilde1.nrows() || x2.nrows() != self.l_tilde2.nrows() {
            return Err(HintError::Validation(format!(
                "embeddings have {} and {} rows, collections have {} and {}",
                x1.nrows(),
                x2.nrows(),
                self.l_tilde1.nrows(),
                self.l_tilde2.nrows()
            )));
        }
        Ok(())
    }

    fn penalty_scale(&self) -> f64 {
        if self.theta == 0.0 {
            0.0
        } else {
            self.theta / self.norm_factor
        }
    }

    /// `‖T̃1X1(T̃1X1)ᵀ − T̃2X2(T̃2X2)ᵀ‖²_F`, unweighted and unnormalised.
    pub fn raw_penalty(&self, x1: &Embedding, x2: &Embedding) -> Result<f64> {
        self.check_dims(&x1.x, &x2.x)?;
        let p = self.t_tilde1.apply(&x1.x);
        let q = self.t_tilde2.apply(&x2.x);
        Ok(gram_distance(&p, &q))
    }

    /// Value of the joint objective.
    pub fn objective(&self, x1: &Embedding, x2: &Embedding) -> Result<f64> {
        self.check_dims(&x1.x, &x2.x)?;
        let mut value = self.alpha * quad_trace(&self.l_tilde1, &x1.x)
            + self.beta * quad_trace(&self.l_tilde2, &x2.x);
        let scale = self.penalty_scale();
        if scale > 0.0 {
            value += scale * self.raw_penalty(x1, x2)?;
        }
        Ok(value)
    }

    /// The single-block problem obtained by freezing the other block at `frozen`.
    pub fn subproblem(&self, side: Side, frozen: &Embedding) -> Result<SideProblem<'_>> {
        let (lap, weight, own_map, other_map, other_lap, other_weight) = match side {
            Side::One => (
                &self.l_tilde1,
                self.alpha,
                &self.t_tilde1,
                &self.t_tilde2,
                &self.l_tilde2,
                self.beta,
            ),
            Side::Two => (
                &self.l_tilde2,
                self.beta,
                &self.t_tilde2,
                &self.t_tilde1,
                &self.l_tilde1,
                self.alpha,
            ),
        };
        if frozen.n() != other_lap.nrows() {
            return Err(HintError::Validation(format!(
                "frozen embedding has {} rows, expected {}",
                frozen.n(),
                other_lap.nrows()
            )));
        }
        let scale = self.penalty_scale();
        let penalty = (scale > 0.0).then(|| Penalty {
            map: own_map,
            fixed: other_map.apply(&frozen.x),
            scale,
        });
        Ok(SideProblem {
            laplacian: lap,
            weight,
            penalty,
            constant: other_weight * quad_trace(other_lap, &frozen.x),
        })
    }
}

/// `Tr(Xᵀ M X)`.
fn quad_trace(m: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    x.dot(&(m * x))
}

/// `‖PPᵀ − QQᵀ‖²_F` via `k × k` Gram products.
fn gram_distance(p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let ptp = p.tr_mul(p);
    let ptq = p.tr_mul(q);
    let qtq = q.tr_mul(q);
    ptp.norm_squared() - 2.0 * ptq.norm_squared() + qtq.norm_squared()
}

#[derive(Debug, Clone)]
struct Penalty<'a> {
    map: &'a AnchorMap,
    /// Projection of the frozen block; `B = fixed · fixedᵀ`.
    fixed: DMatrix<f64>,
    scale: f64,
}

/// `F(X) = w·Tr(Xᵀ L̃ X) + θ/(|R|(|R|−1))·‖T̃X(T̃X)ᵀ − B‖²_F`, the objective of
/// one block with the other frozen. The frozen block's own trace `C` is
/// reported by [`SideProblem::constant`] and left out of the value so that
/// line-search comparisons do not depend on it.
#[derive(Debug, Clone)]
pub struct SideProblem<'a> {
    laplacian: &'a DMatrix<f64>,
    weight: f64,
    penalty: Option<Penalty<'a>>,
    constant: f64,
}

impl<'a> SideProblem<'a> {
    /// A block with no coupling: `weight · Tr(Xᵀ L̃ X)`.
    pub fn uncoupled(laplacian: &'a DMatrix<f64>, weight: f64) -> Self {
        SideProblem {
            laplacian,
            weight,
            penalty: None,
            constant: 0.0,
        }
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// `∇F(X) = 2w·L̃X + 4θ/(|R|(|R|−1))·T̃ᵀ(T̃XXᵀT̃ᵀ − B)T̃X`.
    pub fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.evaluate(x).1
    }
}

impl StiefelObjective for SideProblem<'_> {
    fn evaluate(&self, x: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let lx = self.laplacian * x;
        let mut value = self.weight * x.dot(&lx);
        let mut grad = lx * (2.0 * self.weight);
        if let Some(pen) = &self.penalty {
            let p = pen.map.apply(x);
            let q = &pen.fixed;
            let ptp = p.tr_mul(&p);
            let qtp = q.tr_mul(&p);
            value += pen.scale
                * (ptp.norm_squared() - 2.0 * qtp.norm_squared() + q.tr_mul(q).norm_squared());
            // (PPᵀ − QQᵀ)P = P(PᵀP) − Q(QᵀP)
            let inner = &p * &ptp - q * &qtp;
            grad += pen.map.apply_transpose(&inner) * (4.0 * pen.scale);
        }
        (value, grad)
    }
}

/// Plain quadratic `Tr(Xᵀ M X)`.
#[derive(Debug, Clone)]
pub struct TraceObjective {
    pub m: DMatrix<f64>,
}

impl StiefelObjective for TraceObjective {
    fn evaluate(&self, x: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let mx = &self.m * x;
        (x.dot(&mx), mx * 2.0)
    }
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub round: usize,
    /// 1 while updating collection 1, 2 while updating collection 2.
    pub half: u8,
    pub step: StepRecord,
    /// Joint objective at the accepted point.
    pub joint_objective: f64,
}

#[derive(Debug, Clone)]
pub struct AlternatingReport {
    pub x1: Embedding,
    pub x2: Embedding,
    /// Joint objective at the start, then after every half-round.
    pub trace: Vec<f64>,
    pub rows: Vec<TraceRow>,
    pub rounds: usize,
    pub converged: bool,
}

impl AlternatingReport {
    /// Largest `‖XᵀX − I‖_F` over all accepted iterates.
    pub fn max_feasibility_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.step.feasibility)
            .fold(0.0, f64::max)
    }

    /// Writes `round,half,iter,objective,grad_norm,tau` CSV.
    pub fn write_trace_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "round,half,iter,objective,grad_norm,tau")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.round, r.half, r.step.iter, r.joint_objective, r.step.grad_norm, r.step.tau
            )?;
        }
        Ok(())
    }
}

/// Repeats [`curvilinear_solve`] from its own output until it reports
/// convergence or `max_outer` calls were made. With no coupling this is
/// exactly what [`alternating_solve`] does for each block.
pub fn solve_uncoupled<F: StiefelObjective + ?Sized>(
    x0: &Embedding,
    f: &F,
    params: &SearchParams,
) -> Result<Embedding> {
    let mut x = x0.clone();
    for _ in 0..params.max_outer {
        let rep = curvilinear_solve(&x, f, params)?;
        x = rep.x;
        if rep.status.is_converged() {
            break;
        }
    }
    Ok(x)
}

/// Alternates block updates until both blocks converge within one round or
/// `max_outer` rounds pass.
///
/// A converged block is not re-solved while the other block stays put (or
/// when the blocks are uncoupled, `θ = 0`).
pub fn alternating_solve(
    x1_0: &Embedding,
    x2_0: &Embedding,
    ctx: &ObjectiveContext,
    params: &SearchParams,
) -> Result<AlternatingReport> {
    params.validate()?;
    ctx.check_dims(&x1_0.x, &x2_0.x)?;
    let coupled = ctx.penalty_scale() > 0.0;
    let mut x1 = x1_0.clone();
    let mut x2 = x2_0.clone();
    let mut trace = vec![ctx.objective(&x1, &x2)?];
    let mut rows = Vec::new();
    let mut pending = [true, true];
    let mut rounds = 0;
    let mut converged = false;

    for round in 1..=params.max_outer {
        rounds = round;
        for (half, side) in [(1u8, Side::One), (2u8, Side::Two)] {
            let idx = usize::from(half - 1);
            if pending[idx] {
                let (target, frozen) = match side {
                    Side::One => (&x1, &x2),
                    Side::Two => (&x2, &x1),
                };
                let sub = ctx.subproblem(side, frozen)?;
                let rep = curvilinear_solve(target, &sub, params)?;
                let c = sub.constant();
                rows.extend(rep.steps.iter().map(|&step| TraceRow {
                    round,
                    half,
                    step,
                    joint_objective: step.objective + c,
                }));
                pending[idx] = !rep.status.is_converged();
                if coupled && rep.iterations() > 0 {
                    pending[1 - idx] = true;
                }
                match side {
                    Side::One => x1 = rep.x,
                    Side::Two => x2 = rep.x,
                }
            }
            trace.push(ctx.objective(&x1, &x2)?);
        }
        if !pending[0] && !pending[1] {
            converged = true;
            break;
        }
    }

    Ok(AlternatingReport {
        x1,
        x2,
        trace,
        rows,
        rounds,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_step_is_identity() {
        let x = Embedding::orthonormalize(DMatrix::from_fn(5, 2, |i, j| (i * 3 + j) as f64 + 1.0));
        let g = DMatrix::from_fn(5, 2, |i, j| (i as f64 - j as f64).sin());
        assert_eq!(cayley_step(&x, &g, 0.0).unwrap(), x);
    }

    #[test]
    fn cayley_matches_givens_rotation() {
        // G = (0, −a) gives A = [[0, a], [−a, 0]]; Y(τ) rotates e1 by 2·atan(τa/2).
        let a: f64 = 0.7;
        let x = Embedding::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let g = DMatrix::from_column_slice(2, 1, &[0.0, -a]);
        for tau in [0.1, 1.0, 3.0] {
            let y = cayley_step(&x, &g, tau).unwrap();
            let phi = 2.0 * (tau * a / 2.0).atan();
            assert!((y.x[(0, 0)] - phi.cos()).abs() < 1e-14);
            assert!((y.x[(1, 0)] - phi.sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn cayley_preserves_orthonormality() {
        let x = Embedding::orthonormalize(DMatrix::from_fn(30, 4, |i, j| ((i * 7 + j * 13) % 11) as f64));
        let g = DMatrix::from_fn(30, 4, |i, j| ((i + 2 * j) as f64).cos() * 5.0);
        for tau in [1e-3, 0.5, 10.0, 1e3] {
            let y = cayley_step(&x, &g, tau).unwrap();
            assert!(y.feasibility_error() <= 1e-8, "tau {tau}: {}", y.feasibility_error());
        }
    }

    #[test]
    fn slope_matches_directional_derivative() {
        let m = DMatrix::from_fn(6, 6, |i, j| ((i + j) as f64).cos() + if i == j { 3.0 } else { 0.0 });
        let m = &m + m.transpose();
        let f = TraceObjective { m };
        let x = Embedding::orthonormalize(DMatrix::from_fn(6, 2, |i, j| (i as f64 + 1.0) * (j as f64 + 0.5)));
        let (f0, g) = f.evaluate(&x.x);
        let h = 1e-6;
        let fp = f.evaluate(&cayley(&x.x, &g, h).unwrap()).0;
        let fm = f.evaluate(&cayley(&x.x, &g, -h).unwrap()).0;
        let fd = (fp - fm) / (2.0 * h);
        let slope = curve_slope(&x.x, &g);
        assert!((fd - slope).abs() <= 1e-6 * slope.abs().max(1.0), "{fd} vs {slope} (f0 {f0})");
    }

    #[test]
    fn stationary_start_returns_immediately() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]));
        let f = TraceObjective { m };
        let x = Embedding::new(DMatrix::from_column_slice(4, 1, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        let rep = curvilinear_solve(&x, &f, &SearchParams::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        assert_eq!(rep.iterations(), 0);
        assert_eq!(rep.x, x);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let p = SearchParams {
            eta: 1.0,
            ..SearchParams::default()
        };
        assert!(p.validate().is_err());
        let p = SearchParams {
            tau_min: 2e3,
            ..SearchParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn gram_distance_matches_dense() {
        let p = DMatrix::from_fn(5, 2, |i, j| (i as f64 * 0.3 - j as f64).sin());
        let q = DMatrix::from_fn(5, 3, |i, j| (i as f64 + j as f64 * 0.7).cos());
        let dense = (&p * p.transpose() - &q * q.transpose()).norm_squared();
        assert!((gram_distance(&p, &q) - dense).abs() < 1e-12 * dense.max(1.0));
    }
}

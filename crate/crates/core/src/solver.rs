//! Block coordinate descent for the Stute-weighted least-squares loss
//!
//! ```text
//! L(β) = (1/2n) Σ_m (Y^m − X^m β^m)ᵀ W_m (Y^m − X^m β^m)
//! ```
//!
//! plus one of the penalties in [`PenaltySpec`], and a checker for the
//! first-order (KKT) conditions of each penalized objective.
//!
//! One block is one coefficient row `β_j`. Studies are disjoint samples, so the
//! loss restricted to a block is separable across studies with curvature
//! `v_jm = (1/n) X_jᵀ W_m X_j`. Every update minimizes a majorizer of the
//! objective that touches it at the current point, with curvature
//! `L ≥ max_m v_jm` chosen large enough to keep the surrogate convex, so each
//! update weakly decreases the objective:
//!
//! - group LASSO / group SCAD / group MCP: exact group prox of the surrogate;
//! - composite: coordinatewise, with the outer penalty linearized at the
//!   current row and the inner penalty kept exact;
//! - sparse group: blockwise, with the individual penalties linearized at the
//!   current row (a weighted soft threshold) followed by the exact group prox.
//!
//! Each update is also checked against the exact objective change and falls
//! back to a backtracking search along the update direction if it fails.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::data::{IndexSets, MultiStudy};
use crate::error::{Error, Result};
use crate::penalty::{group_prox_in_place, l2, soft_threshold, Penalty, PenaltySpec};

/// Surrogate curvature is kept at least this factor above the penalty's
/// concavity.
const CONVEXITY_MARGIN: f64 = 1.1;
/// Allowed objective increase for a single block update (round-off).
const BLOCK_SLACK: f64 = 1e-14;
/// Allowed objective increase between sweeps before the fit is aborted.
const SWEEP_SLACK: f64 = 1e-8;
/// Objective increase tolerated by the debug recomputation check.
const DEBUG_SLACK: f64 = 1e-10;
/// Active-set sweeps between full sweeps.
const FULL_SWEEP_EVERY: usize = 10;

/// The p × M coefficient array. Row `j` holds covariate `j` across studies,
/// column `m` is study `m`'s coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefMatrix(Array2<f64>);

impl CoefMatrix {
    pub fn zeros(p: usize, m: usize) -> Self {
        Self(Array2::zeros((p, m)))
    }

    pub fn from_array(beta: Array2<f64>) -> Result<Self> {
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("coefficients must be finite".into()));
        }
        Ok(Self(beta))
    }

    fn from_row_major(p: usize, m: usize, values: Vec<f64>) -> Self {
        Self(Array2::from_shape_vec((p, m), values).expect("row-major buffer has p*m entries"))
    }

    pub fn p(&self) -> usize {
        self.0.nrows()
    }

    pub fn m(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, j: usize, m: usize) -> f64 {
        self.0[[j, m]]
    }

    pub fn set(&mut self, j: usize, m: usize, value: f64) {
        self.0[[j, m]] = value;
    }

    /// `β_j`, covariate `j` across studies.
    pub fn row(&self, j: usize) -> ArrayView1<'_, f64> {
        self.0.row(j)
    }

    /// `β^m`, study `m`'s coefficients.
    pub fn column(&self, m: usize) -> ArrayView1<'_, f64> {
        self.0.column(m)
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    /// `S_m = {j : β_j^m ≠ 0}` and their union.
    pub fn support(&self) -> IndexSets {
        let per_study = (0..self.m())
            .map(|m| {
                self.0
                    .column(m)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, _)| j)
                    .collect::<BTreeSet<_>>()
            })
            .collect();
        IndexSets::from_per_study(per_study)
    }

    /// Number of nonzero (covariate, study) pairs.
    pub fn nonzero_count(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Convergence threshold on the maximum relative coefficient change of a
    /// full sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Sweep only nonzero rows between full sweeps.
    pub active_set: bool,
    /// Recompute the objective from scratch after every sweep and fail on any
    /// increase beyond 1e-10.
    pub debug_checks: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_sweeps: 1000,
            active_set: true,
            debug_checks: cfg!(debug_assertions),
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Contract(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Contract("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub spec: PenaltySpec,
    /// Coefficients on the standardized scale of the data that was fitted.
    pub coef: CoefMatrix,
    /// Objective at the starting point followed by its value after each sweep.
    pub objective_trace: Vec<f64>,
    pub kkt_residual: f64,
    pub selected: IndexSets,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the starting objective")
    }
}

fn check_coef_dims(ms: &MultiStudy, coef: &CoefMatrix) -> Result<()> {
    if coef.p() != ms.p() || coef.m() != ms.m() {
        return Err(Error::Dimension(format!(
            "coefficients are {}x{}, data has p={} and M={}",
            coef.p(),
            coef.m(),
            ms.p(),
            ms.m()
        )));
    }
    Ok(())
}

/// Stute-weighted least-squares loss.
pub fn loss(ms: &MultiStudy, coef: &CoefMatrix) -> Result<f64> {
    check_coef_dims(ms, coef)?;
    let n = ms.n() as f64;
    let mut total = 0.0;
    for (m, s) in ms.studies().iter().enumerate() {
        let fitted = s.x().dot(&coef.column(m));
        let nm = s.n() as f64;
        for i in 0..s.n() {
            let r = s.y()[i] - fitted[i];
            total += nm * s.weights()[i] * r * r;
        }
    }
    Ok(total / (2.0 * n))
}

/// Gradient of [`loss`]: column m is `−(1/n) X^{mᵀ} W_m (Y^m − X^m β^m)`.
pub fn loss_gradient(ms: &MultiStudy, coef: &CoefMatrix) -> Result<Array2<f64>> {
    check_coef_dims(ms, coef)?;
    let n = ms.n() as f64;
    let mut grad = Array2::zeros((ms.p(), ms.m()));
    for (m, s) in ms.studies().iter().enumerate() {
        let fitted = s.x().dot(&coef.column(m));
        let nm = s.n() as f64;
        let wr: ndarray::Array1<f64> = (0..s.n())
            .map(|i| nm * s.weights()[i] * (s.y()[i] - fitted[i]))
            .collect();
        let g = s.x().t().dot(&wr);
        grad.column_mut(m).assign(&(g * (-1.0 / n)));
    }
    Ok(grad)
}

/// Penalty summed over all rows.
pub fn penalty_total(spec: &PenaltySpec, coef: &CoefMatrix) -> f64 {
    (0..coef.p())
        .map(|j| {
            let row: Vec<f64> = coef.row(j).to_vec();
            spec.row_value(&row)
        })
        .sum()
}

/// Loss plus penalty.
pub fn objective(ms: &MultiStudy, spec: &PenaltySpec, coef: &CoefMatrix) -> Result<f64> {
    Ok(loss(ms, coef)? + penalty_total(spec, coef))
}

/// Column-major, pre-weighted copy of a standardized [`MultiStudy`].
pub(crate) struct Design {
    p: usize,
    m: usize,
    studies: Vec<StudyDesign>,
}

struct StudyDesign {
    n: usize,
    y: Vec<f64>,
    /// `x[j * n + i]`.
    x: Vec<f64>,
    /// `(n_m ω_i / n) x_ij`.
    wx: Vec<f64>,
    /// `n_m ω_i / n`.
    w: Vec<f64>,
    /// `v_jm`.
    curvature: Vec<f64>,
}

impl StudyDesign {
    #[inline]
    fn col(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    fn wcol(&self, j: usize) -> &[f64] {
        &self.wx[j * self.n..(j + 1) * self.n]
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Design {
    pub(crate) fn new(ms: &MultiStudy) -> Self {
        let n_total = ms.n() as f64;
        let p = ms.p();
        let studies = ms
            .studies()
            .iter()
            .map(|s| {
                let n = s.n();
                let nm = n as f64;
                let w: Vec<f64> = s.weights().iter().map(|om| nm * om / n_total).collect();
                let mut x = Vec::with_capacity(n * p);
                for col in s.x().columns() {
                    x.extend(col.iter());
                }
                let mut wx = Vec::with_capacity(n * p);
                let mut curvature = Vec::with_capacity(p);
                for j in 0..p {
                    let c = &x[j * n..(j + 1) * n];
                    let start = wx.len();
                    wx.extend(c.iter().zip(&w).map(|(x, w)| x * w));
                    curvature.push(dot(&wx[start..], c));
                }
                StudyDesign {
                    n,
                    y: s.y().to_vec(),
                    x,
                    wx,
                    w,
                    curvature,
                }
            })
            .collect();
        Self {
            p,
            m: ms.m(),
            studies,
        }
    }

    fn residuals(&self, beta: &[f64]) -> Vec<Vec<f64>> {
        self.studies
            .iter()
            .enumerate()
            .map(|(m, s)| {
                let mut r = s.y.clone();
                for j in 0..self.p {
                    let b = beta[j * self.m + m];
                    if b != 0.0 {
                        for (ri, xi) in r.iter_mut().zip(s.col(j)) {
                            *ri -= b * xi;
                        }
                    }
                }
                r
            })
            .collect()
    }

    fn loss_from_residuals(&self, r: &[Vec<f64>]) -> f64 {
        self.studies
            .iter()
            .zip(r)
            .map(|(s, r)| 0.5 * s.w.iter().zip(r).map(|(w, r)| w * r * r).sum::<f64>())
            .sum()
    }

    /// `−∂L/∂β`, row-major p × M.
    /// Negative loss gradient at zero, p × M. Uses the same arithmetic as
    /// the coordinate updates, so `λ_max` derived from it is a tie the
    /// solver resolves to zero.
    pub(crate) fn zero_gradient(&self) -> Vec<Vec<f64>> {
        let r: Vec<Vec<f64>> = self.studies.iter().map(|s| s.y.clone()).collect();
        let g = self.neg_gradient(&r);
        g.chunks(self.m).map(<[f64]>::to_vec).collect()
    }

    fn neg_gradient(&self, r: &[Vec<f64>]) -> Vec<f64> {
        let mut g = vec![0.0; self.p * self.m];
        for (m, s) in self.studies.iter().enumerate() {
            for j in 0..self.p {
                g[j * self.m + m] = dot(s.wcol(j), &r[m]);
            }
        }
        g
    }
}

/// Mutable solver state for one penalized problem.
struct State<'a> {
    design: &'a Design,
    spec: PenaltySpec,
    beta: Vec<f64>,
    resid: Vec<Vec<f64>>,
    // scratch buffers, length M
    grad: Vec<f64>,
    old: Vec<f64>,
    new: Vec<f64>,
}

impl<'a> State<'a> {
    fn new(design: &'a Design, spec: PenaltySpec, beta: Vec<f64>) -> Self {
        let resid = design.residuals(&beta);
        let m = design.m;
        Self {
            design,
            spec,
            beta,
            resid,
            grad: vec![0.0; m],
            old: vec![0.0; m],
            new: vec![0.0; m],
        }
    }

    fn objective(&self) -> f64 {
        let pen: f64 = self
            .beta
            .chunks(self.design.m)
            .map(|row| self.spec.row_value(row))
            .sum();
        self.design.loss_from_residuals(&self.resid) + pen
    }

    fn row(&self, j: usize) -> &[f64] {
        let m = self.design.m;
        &self.beta[j * m..(j + 1) * m]
    }

    /// Exact objective change of replacing row `j`'s entries by `cand`, with
    /// `grad` holding the negative gradient of the loss at the current row.
    fn block_delta(&self, j: usize, cand: &[f64]) -> f64 {
        let mut dloss = 0.0;
        for (m, s) in self.design.studies.iter().enumerate() {
            let d = cand[m] - self.old[m];
            if d != 0.0 {
                dloss += -self.grad[m] * d + 0.5 * s.curvature[j] * d * d;
            }
        }
        dloss + self.spec.row_value(cand) - self.spec.row_value(&self.old)
    }

    /// Accepts `self.new` for row `j` if it does not increase the objective,
    /// otherwise backtracks along the update direction. Returns the largest
    /// relative coefficient change.
    fn commit(&mut self, j: usize) -> f64 {
        if self.new == self.old {
            return 0.0;
        }
        if self.block_delta(j, &self.new) > BLOCK_SLACK {
            let mut accepted = false;
            let mut cand = self.new.clone();
            let mut t = 1.0;
            for _ in 0..30 {
                t *= 0.5;
                for (c, (o, n)) in cand.iter_mut().zip(self.old.iter().zip(&self.new)) {
                    *c = o + t * (n - o);
                }
                if self.block_delta(j, &cand) <= 0.0 {
                    accepted = true;
                    break;
                }
            }
            if accepted {
                self.new.copy_from_slice(&cand);
            } else {
                self.new.copy_from_slice(&self.old);
                return 0.0;
            }
        }
        let mcount = self.design.m;
        let mut change: f64 = 0.0;
        for (m, s) in self.design.studies.iter().enumerate() {
            let d = self.new[m] - self.old[m];
            if d != 0.0 {
                for (ri, xi) in self.resid[m].iter_mut().zip(s.col(j)) {
                    *ri -= d * xi;
                }
                self.beta[j * mcount + m] = self.new[m];
                change = change.max(d.abs() / self.new[m].abs().max(1.0));
            }
        }
        change
    }

    fn load_block(&mut self, j: usize) -> f64 {
        let m = self.design.m;
        let mut vmax: f64 = 0.0;
        for (k, s) in self.design.studies.iter().enumerate() {
            self.grad[k] = dot(s.wcol(j), &self.resid[k]);
            vmax = vmax.max(s.curvature[j]);
        }
        self.old.copy_from_slice(&self.beta[j * m..(j + 1) * m]);
        vmax
    }

    /// Updates row `j`; returns the maximum relative change.
    fn update_row(&mut self, j: usize) -> f64 {
        match self.spec {
            PenaltySpec::GroupLasso { lambda } => self.update_group(j, &Penalty::lasso(lambda)),
            PenaltySpec::GroupConcave { penalty } => self.update_group(j, &penalty),
            PenaltySpec::Composite { outer, inner } => self.update_composite(j, &outer, &inner),
            PenaltySpec::SparseGroup { group, indiv } => self.update_sparse_group(j, &group, &indiv),
        }
    }

    fn update_group(&mut self, j: usize, penalty: &Penalty) -> f64 {
        let vmax = self.load_block(j);
        if vmax == 0.0 {
            return 0.0;
        }
        if self.old.iter().all(|b| *b == 0.0) && stays_zero(l2(&self.grad), penalty.lambda) {
            return 0.0;
        }
        let curv = vmax.max(CONVEXITY_MARGIN * penalty.concavity());
        for k in 0..self.new.len() {
            self.new[k] = self.old[k] + self.grad[k] / curv;
        }
        group_prox_in_place(&mut self.new, 1.0 / curv, &penalty.scaled(1.0));
        self.commit(j)
    }

    fn update_sparse_group(&mut self, j: usize, group: &Penalty, indiv: &Penalty) -> f64 {
        let vmax = self.load_block(j);
        if vmax == 0.0 {
            return 0.0;
        }
        if self.old.iter().all(|b| *b == 0.0) {
            let shrunk: Vec<f64> = self.grad.iter().map(|g| soft_threshold(*g, indiv.lambda)).collect();
            if stays_zero(l2(&shrunk), group.lambda) {
                return 0.0;
            }
        }
        let curv = vmax.max(CONVEXITY_MARGIN * group.concavity());
        for k in 0..self.new.len() {
            let u = self.old[k] + self.grad[k] / curv;
            let w = indiv.deriv_at(self.old[k].abs());
            self.new[k] = soft_threshold(u, w / curv);
        }
        group_prox_in_place(&mut self.new, 1.0 / curv, &group.scaled(1.0));
        self.commit(j)
    }

    fn update_composite(&mut self, j: usize, outer: &Penalty, inner: &Penalty) -> f64 {
        let mcount = self.design.m;
        let mut change: f64 = 0.0;
        for k in 0..mcount {
            let v = self.design.studies[k].curvature[j];
            if v == 0.0 {
                continue;
            }
            let row_start = j * mcount;
            self.old.copy_from_slice(&self.beta[row_start..row_start + mcount]);
            for (q, s) in self.design.studies.iter().enumerate() {
                // Only coordinate k moves; the other gradient entries are unused.
                self.grad[q] = if q == k { dot(s.wcol(j), &self.resid[q]) } else { 0.0 };
            }
            let inner_sum: f64 = self.old.iter().map(|b| inner.value_at(b.abs())).sum();
            let w = outer.deriv_at(inner_sum);
            if self.old[k] == 0.0 && stays_zero(self.grad[k].abs(), w * inner.lambda) {
                continue;
            }
            let curv = v.max(CONVEXITY_MARGIN * w * inner.concavity());
            let u = self.old[k] + self.grad[k] / curv;
            self.new.copy_from_slice(&self.old);
            self.new[k] = u.signum() * inner.scaled(w).prox_radius(u.abs(), 1.0 / curv);
            change = change.max(self.commit(j));
        }
        change
    }
}

/// Zero-row test `‖g‖ ≤ bound`, with a few ulps of slack so that a level
/// computed as a product of square roots still counts as the tie.
fn stays_zero(norm: f64, bound: f64) -> bool {
    norm <= bound * (1.0 + 4.0 * f64::EPSILON)
}

fn dual_gap(norm: f64, bound: f64) -> f64 {
    if stays_zero(norm, bound) {
        0.0
    } else {
        norm - bound
    }
}

/// Minimizes loss + penalty from `init` by block coordinate descent.
///
/// `ms` must be standardized. The objective trace is checked for monotone
/// decrease; an increase beyond round-off is reported as
/// [`Error::Divergence`].
pub fn fit(
    ms: &MultiStudy,
    spec: &PenaltySpec,
    init: &CoefMatrix,
    opts: &SolverOptions,
) -> Result<FitResult> {
    if !ms.is_standardized() {
        return Err(Error::Contract("fit requires standardized data".into()));
    }
    spec.validate()?;
    opts.validate()?;
    check_coef_dims(ms, init)?;
    if init.view().iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("initial coefficients must be finite".into()));
    }
    let design = Design::new(ms);
    fit_design(&design, ms, spec, init, opts)
}

fn fit_design(
    design: &Design,
    ms: &MultiStudy,
    spec: &PenaltySpec,
    init: &CoefMatrix,
    opts: &SolverOptions,
) -> Result<FitResult> {
    let beta0: Vec<f64> = init.view().iter().copied().collect();
    let mut state = State::new(design, *spec, beta0);
    let mut trace = vec![state.objective()];
    let mut debug_prev = if opts.debug_checks {
        Some(objective(ms, spec, init)?)
    } else {
        None
    };

    let p = design.p;
    let mut active: Vec<usize> = (0..p).collect();
    let mut need_full = true;
    let mut since_full = 0;
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let full = need_full || !opts.active_set;
        let mut change: f64 = 0.0;
        if full {
            for j in 0..p {
                change = change.max(state.update_row(j));
            }
        } else {
            for &j in &active {
                change = change.max(state.update_row(j));
            }
        }

        let obj = state.objective();
        let prev = *trace.last().unwrap();
        if obj > prev + SWEEP_SLACK * prev.abs().max(1.0) {
            return Err(Error::Divergence(format!(
                "sweep {sweeps}: objective rose from {prev:.12e} to {obj:.12e}"
            )));
        }
        trace.push(obj);

        if let Some(prev_exact) = debug_prev {
            let coef = CoefMatrix::from_row_major(p, design.m, state.beta.clone());
            let exact = objective(ms, spec, &coef)?;
            if exact > prev_exact + DEBUG_SLACK {
                return Err(Error::Divergence(format!(
                    "sweep {sweeps}: recomputed objective rose from {prev_exact:.15e} to {exact:.15e}"
                )));
            }
            debug_prev = Some(exact);
        }

        if full {
            since_full = 0;
            need_full = false;
            if change <= opts.tol {
                converged = true;
                break;
            }
            active = (0..p)
                .filter(|&j| state.row(j).iter().any(|b| *b != 0.0))
                .collect();
        } else {
            since_full += 1;
            if change <= opts.tol || since_full >= FULL_SWEEP_EVERY {
                need_full = true;
            }
        }
    }

    let coef = CoefMatrix::from_row_major(p, design.m, state.beta);
    let kkt_residual = kkt_from_design(design, ms.n() as f64, spec, &coef, &state.resid).max();
    let selected = coef.support();
    Ok(FitResult {
        spec: *spec,
        coef,
        objective_trace: trace,
        kkt_residual,
        selected,
        iterations: sweeps,
        converged,
    })
}

/// Warm-started regularization path. `template` maps each level of the
/// strictly decreasing `lambdas` to a penalty; fit `k + 1` starts from fit `k`.
pub fn fit_path<F>(
    ms: &MultiStudy,
    template: F,
    lambdas: &[f64],
    init: Option<&CoefMatrix>,
    opts: &SolverOptions,
) -> Result<Vec<FitResult>>
where
    F: Fn(f64) -> PenaltySpec,
{
    if lambdas.is_empty() {
        return Err(Error::Contract("empty lambda grid".into()));
    }
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Contract("lambda grid must be strictly decreasing".into()));
    }
    if !ms.is_standardized() {
        return Err(Error::Contract("fit requires standardized data".into()));
    }
    opts.validate()?;
    let design = Design::new(ms);
    let mut start = match init {
        Some(c) => {
            check_coef_dims(ms, c)?;
            c.clone()
        }
        None => CoefMatrix::zeros(ms.p(), ms.m()),
    };
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let spec = template(lambda);
        spec.validate()?;
        let res = fit_design(&design, ms, &spec, &start, opts)?;
        start = res.coef.clone();
        out.push(res);
    }
    Ok(out)
}

/// Stationarity and dual-bound violations, both on the `n`-scaled gradient
/// `X^{mᵀ} W_m (Y^m − X^m β^m)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktReport {
    /// Largest violation of the stationarity equations on nonzero entries.
    pub stationarity: f64,
    /// Largest excess of a zero entry or zero row over its dual bound.
    pub dual_bound: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.dual_bound)
    }
}

/// Maximum KKT violation of `coef` for the penalized objective; 0 at an
/// exact stationary point.
pub fn check_kkt(ms: &MultiStudy, spec: &PenaltySpec, coef: &CoefMatrix) -> Result<f64> {
    Ok(kkt_report(ms, spec, coef)?.max())
}

pub fn kkt_report(ms: &MultiStudy, spec: &PenaltySpec, coef: &CoefMatrix) -> Result<KktReport> {
    check_coef_dims(ms, coef)?;
    let design = Design::new(ms);
    let beta: Vec<f64> = coef.view().iter().copied().collect();
    let resid = design.residuals(&beta);
    Ok(kkt_from_design(&design, ms.n() as f64, spec, coef, &resid))
}

fn kkt_from_design(
    design: &Design,
    n: f64,
    spec: &PenaltySpec,
    coef: &CoefMatrix,
    resid: &[Vec<f64>],
) -> KktReport {
    let g = design.neg_gradient(resid);
    let mc = design.m;
    let mut report = KktReport::default();
    let mut stat = |v: f64| report.stationarity = report.stationarity.max(v);
    let mut dual_excess: f64 = 0.0;
    for j in 0..design.p {
        let row: Vec<f64> = coef.row(j).to_vec();
        let gj = &g[j * mc..(j + 1) * mc];
        let norm = l2(&row);
        match spec {
            PenaltySpec::GroupLasso { .. } | PenaltySpec::GroupConcave { .. } => {
                let pen = match spec {
                    PenaltySpec::GroupLasso { lambda } => Penalty::lasso(*lambda),
                    PenaltySpec::GroupConcave { penalty } => *penalty,
                    _ => unreachable!(),
                };
                if norm > 0.0 {
                    let d = pen.deriv_at(norm);
                    for k in 0..mc {
                        stat((gj[k] - d * row[k] / norm).abs());
                    }
                } else {
                    dual_excess = dual_excess.max(dual_gap(l2(gj), pen.lambda));
                }
            }
            PenaltySpec::Composite { outer, inner } => {
                let inner_sum: f64 = row.iter().map(|b| inner.value_at(b.abs())).sum();
                let w = outer.deriv_at(inner_sum);
                for k in 0..mc {
                    if row[k] != 0.0 {
                        stat((gj[k] - w * inner.deriv_at(row[k].abs()) * row[k].signum()).abs());
                    } else {
                        dual_excess = dual_excess.max(dual_gap(gj[k].abs(), w * inner.lambda));
                    }
                }
            }
            PenaltySpec::SparseGroup { group, indiv } => {
                if norm > 0.0 {
                    let d = group.deriv_at(norm);
                    for k in 0..mc {
                        if row[k] != 0.0 {
                            let sub = d * row[k] / norm + indiv.deriv_at(row[k].abs()) * row[k].signum();
                            stat((gj[k] - sub).abs());
                        } else {
                            dual_excess = dual_excess.max(dual_gap(gj[k].abs(), indiv.lambda));
                        }
                    }
                } else {
                    let shrunk: Vec<f64> = gj.iter().map(|v| soft_threshold(*v, indiv.lambda)).collect();
                    dual_excess = dual_excess.max(dual_gap(l2(&shrunk), group.lambda));
                }
            }
        }
    }
    report.stationarity *= n;
    report.dual_bound = dual_excess.max(0.0) * n;
    report
}

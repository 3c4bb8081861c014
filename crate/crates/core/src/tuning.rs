//! Penalty grids and K-fold cross-validation.
//!
//! Each method's tuning parameters are reduced to a path variable `λ` (the
//! all-zero threshold of the penalty, so `λ_max` is the entry point of the
//! path), an optional secondary ratio, and the concavity parameter `a`:
//!
//! | method  | path variable | ratio `r`       | penalty at `λ`                        |
//! |---------|---------------|-----------------|---------------------------------------|
//! | glasso  | λ             | none            | group LASSO λ                         |
//! | gmcp    | λ             | none            | group MCP (λ, a)                      |
//! | gscad   | λ             | none            | group SCAD (λ, a)                     |
//! | cmcp    | κ = λ_Oλ_I    | λ_O / λ_I       | outer MCP (λ_O, a_O), inner MCP (λ_I, a) |
//! | sgmcp   | λ₁            | λ₂ / λ₁         | group MCP (λ₁, a) + MCP (λ₂, a)        |
//! | pooled  | λ             | none            | MCP (λ, a) on the stacked studies     |
//!
//! For cmcp the outer concavity follows the saturation rule
//! `a_O = M a λ_I² / (2 λ_O)`, so the outer penalty flattens exactly when all
//! M inner penalties have.
//!
//! The λ path is computed once on the full (standardized) data and shared by
//! all folds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::data::MultiStudy;
use crate::error::{Error, Result};
use crate::penalty::{l2, soft_threshold, Family, Penalty, PenaltySpec};
use crate::rng::{stream, Purpose};
use crate::solver::{fit_path, CoefMatrix, FitResult, SolverOptions};

/// Default concavity grid.
pub const DEFAULT_A_VALUES: [f64; 4] = [1.8, 3.0, 6.0, 10.0];
/// Default secondary ratio grid for the two-parameter methods.
pub const DEFAULT_RATIOS: [f64; 5] = [0.1, 0.25, 0.5, 1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Glasso,
    Gmcp,
    Gscad,
    Cmcp,
    Sgmcp,
    Meta,
    Pooled,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Glasso,
        Method::Gmcp,
        Method::Gscad,
        Method::Cmcp,
        Method::Sgmcp,
        Method::Meta,
        Method::Pooled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Glasso => "glasso",
            Method::Gmcp => "gmcp",
            Method::Gscad => "gscad",
            Method::Cmcp => "cmcp",
            Method::Sgmcp => "sgmcp",
            Method::Meta => "meta",
            Method::Pooled => "pooled",
        }
    }

    /// Whether the method has a secondary ratio parameter.
    pub fn is_two_parameter(self) -> bool {
        matches!(self, Method::Cmcp | Method::Sgmcp)
    }

    /// Whether the method has a concavity parameter.
    pub fn uses_a(self) -> bool {
        !matches!(self, Method::Glasso)
    }

    fn family(self) -> Family {
        match self {
            Method::Glasso => Family::Lasso,
            Method::Gscad => Family::Scad,
            _ => Family::Mcp,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == lower)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::Validation(format!(
                    "unknown method '{s}'; valid methods are {{{}}}",
                    names.join(", ")
                ))
            })
    }
}

/// Maps a path level to a concrete penalty for one method, `a` and ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecTemplate {
    pub method: Method,
    pub a: f64,
    pub ratio: f64,
    /// Number of studies; enters the composite saturation rule.
    pub studies: usize,
}

impl SpecTemplate {
    pub fn new(method: Method, a: f64, ratio: f64, studies: usize) -> Self {
        Self {
            method,
            a,
            ratio,
            studies,
        }
    }

    pub fn at(&self, lambda: f64) -> PenaltySpec {
        match self.method {
            Method::Glasso => PenaltySpec::GroupLasso { lambda },
            Method::Gmcp | Method::Meta | Method::Pooled => PenaltySpec::GroupConcave {
                penalty: Penalty::mcp(lambda, self.a),
            },
            Method::Gscad => PenaltySpec::GroupConcave {
                penalty: Penalty::scad(lambda, self.a),
            },
            Method::Cmcp => {
                let lambda_i = (lambda / self.ratio).sqrt();
                let lambda_o = (lambda * self.ratio).sqrt();
                let a_o = self.studies as f64 * self.a * lambda_i * lambda_i / (2.0 * lambda_o);
                PenaltySpec::Composite {
                    outer: Penalty::mcp(lambda_o, a_o),
                    inner: Penalty::mcp(lambda_i, self.a),
                }
            }
            Method::Sgmcp => PenaltySpec::SparseGroup {
                group: Penalty::mcp(lambda, self.a),
                indiv: Penalty::mcp(self.ratio * lambda, self.a),
            },
        }
    }
}

/// `(1/n) X_j^{mᵀ} W_m y^m` for every (j, m), row-major p × M.
fn zero_correlations(ms: &MultiStudy) -> Vec<Vec<f64>> {
    crate::solver::Design::new(ms).zero_gradient()
}

/// Smallest `λ₁` with `‖soft(g, rλ₁)‖₂ ≤ λ₁`.
fn sparse_group_threshold(g: &[f64], ratio: f64) -> f64 {
    let excess = |lam: f64| {
        let shrunk: Vec<f64> = g.iter().map(|v| soft_threshold(*v, ratio * lam)).collect();
        l2(&shrunk) - lam
    };
    let mut hi = l2(g);
    if hi == 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    hi
}

/// Smallest path level at which the all-zero matrix is a KKT point.
///
/// `ratio` is only used by sgmcp. For pooled, pass the stacked studies.
pub fn lambda_max(ms: &MultiStudy, method: Method, ratio: f64) -> Result<f64> {
    if !ms.is_standardized() {
        return Err(Error::Contract("lambda_max requires standardized data".into()));
    }
    let g = zero_correlations(ms);
    let value = match method {
        Method::Glasso | Method::Gmcp | Method::Gscad | Method::Meta | Method::Pooled => {
            g.iter().map(|row| l2(row)).fold(0.0, f64::max)
        }
        Method::Cmcp => g.iter().flatten().fold(0.0, |a: f64, v| a.max(v.abs())),
        Method::Sgmcp => g
            .iter()
            .map(|row| sparse_group_threshold(row, ratio))
            .fold(0.0, f64::max),
    };
    Ok(value)
}

/// Log-spaced grid from `lambda_max` down to `ratio · lambda_max`.
pub fn make_lambda_grid(lambda_max: f64, length: usize, ratio: f64) -> Result<Vec<f64>> {
    if length < 2 {
        return Err(Error::Domain(format!("grid length must be at least 2, got {length}")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Domain(format!("grid ratio must be in (0, 1), got {ratio}")));
    }
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::Domain(format!(
            "lambda_max must be positive and finite, got {lambda_max}"
        )));
    }
    let step = ratio.ln() / (length - 1) as f64;
    let mut grid: Vec<f64> = (0..length)
        .map(|k| lambda_max * (step * k as f64).exp())
        .collect();
    grid[0] = lambda_max;
    grid[length - 1] = lambda_max * ratio;
    Ok(grid)
}

/// The λ part of a tuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaGrid {
    /// `length` log-spaced levels from `λ_max` of the full data down to
    /// `ratio · λ_max`.
    Relative { length: usize, ratio: f64 },
    /// Fixed strictly decreasing levels.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneGrid {
    pub lambdas: LambdaGrid,
    pub a_values: Vec<f64>,
    /// Secondary ratios, used by cmcp and sgmcp only.
    pub ratios: Vec<f64>,
    pub n_folds: usize,
}

impl Default for TuneGrid {
    fn default() -> Self {
        Self {
            lambdas: LambdaGrid::Relative {
                length: 100,
                ratio: 0.05,
            },
            a_values: DEFAULT_A_VALUES.to_vec(),
            ratios: DEFAULT_RATIOS.to_vec(),
            n_folds: 5,
        }
    }
}

impl TuneGrid {
    /// Default grid for `method`: a 100-point path for single-parameter
    /// methods, 10 points crossed with the ratio grid otherwise.
    pub fn for_method(method: Method) -> Self {
        let mut grid = Self::default();
        if method.is_two_parameter() {
            grid.lambdas = LambdaGrid::Relative {
                length: 10,
                ratio: 0.05,
            };
        }
        grid
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::Contract(format!(
                "n_folds must be at least 2, got {}",
                self.n_folds
            )));
        }
        match &self.lambdas {
            LambdaGrid::Relative { length, ratio } => {
                make_lambda_grid(1.0, *length, *ratio)?;
            }
            LambdaGrid::Explicit(l) => {
                if l.is_empty() {
                    return Err(Error::Contract("empty lambda grid".into()));
                }
                if l.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::Contract("lambda grid entries must be positive".into()));
                }
                if l.windows(2).any(|w| !(w[1] < w[0])) {
                    return Err(Error::Contract("lambda grid must be strictly decreasing".into()));
                }
            }
        }
        if self.a_values.is_empty() || self.ratios.is_empty() {
            return Err(Error::Contract("a and ratio grids must be nonempty".into()));
        }
        if self.ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::Contract("ratios must be positive".into()));
        }
        Ok(())
    }

    /// The `a` values that are valid for `method` (SCAD needs a > 2, MCP
    /// a > 1); a single placeholder for glasso.
    pub fn a_values_for(&self, method: Method) -> Vec<f64> {
        if !method.uses_a() {
            return vec![f64::NAN];
        }
        let min = method.family().min_a().unwrap_or(0.0);
        self.a_values.iter().copied().filter(|a| *a > min).collect()
    }

    pub fn ratios_for(&self, method: Method) -> Vec<f64> {
        if method.is_two_parameter() {
            self.ratios.clone()
        } else {
            vec![f64::NAN]
        }
    }
}

/// Fold index of every observation, per study (indices into the sorted
/// study).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub per_study: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Seeded shuffle within each study followed by round-robin assignment.
    pub fn new(ms: &MultiStudy, n_folds: usize, seed: u64) -> Result<Self> {
        if n_folds < 2 {
            return Err(Error::Contract(format!("n_folds must be at least 2, got {n_folds}")));
        }
        let mut per_study = Vec::with_capacity(ms.m());
        for (m, s) in ms.studies().iter().enumerate() {
            if s.n() < n_folds {
                return Err(Error::Contract(format!(
                    "study {} has {} observations, fewer than {} folds",
                    m + 1,
                    s.n(),
                    n_folds
                )));
            }
            let mut idx: Vec<usize> = (0..s.n()).collect();
            idx.shuffle(&mut stream(seed, 0, m as u64, Purpose::Folds));
            let mut folds = vec![0; s.n()];
            for (pos, i) in idx.into_iter().enumerate() {
                folds[i] = pos % n_folds;
            }
            per_study.push(folds);
        }
        Ok(Self { n_folds, per_study })
    }

    pub fn validate_for(&self, ms: &MultiStudy) -> Result<()> {
        if self.per_study.len() != ms.m()
            || self.per_study.iter().zip(ms.studies()).any(|(f, s)| f.len() != s.n())
        {
            return Err(Error::Dimension("fold plan does not match the studies".into()));
        }
        if self.per_study.iter().flatten().any(|k| *k >= self.n_folds) {
            return Err(Error::Contract("fold index out of range".into()));
        }
        Ok(())
    }

    /// `(train rows, test rows)` per study for fold `k`.
    pub fn split(&self, k: usize) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let mut train = Vec::with_capacity(self.per_study.len());
        let mut test = Vec::with_capacity(self.per_study.len());
        for folds in &self.per_study {
            let (te, tr): (Vec<usize>, Vec<usize>) = (0..folds.len()).partition(|&i| folds[i] == k);
            train.push(tr);
            test.push(te);
        }
        (train, test)
    }
}

/// Fits `template` along `lambdas` on raw (unstandardized) data and returns
/// the path coefficients on the standardized scale together with the
/// standardized data they refer to.
fn fit_raw_path(
    raw: &MultiStudy,
    template: &SpecTemplate,
    lambdas: &[f64],
    opts: &SolverOptions,
) -> Result<(MultiStudy, Vec<FitResult>)> {
    let std = raw.standardize()?;
    let path = if template.method == Method::Pooled {
        let stacked = std.stacked()?;
        let mut path = fit_path(&stacked, |l| template.at(l), lambdas, None, opts)?;
        for res in &mut path {
            res.coef = replicate_columns(&res.coef, raw.m());
            res.selected = res.coef.support();
        }
        path
    } else {
        fit_path(&std, |l| template.at(l), lambdas, None, opts)?
    };
    Ok((std, path))
}

/// Copies the single column of `coef` into `m` columns.
pub(crate) fn replicate_columns(coef: &CoefMatrix, m: usize) -> CoefMatrix {
    let mut out = CoefMatrix::zeros(coef.p(), m);
    for j in 0..coef.p() {
        for k in 0..m {
            out.set(j, k, coef.get(j, 0));
        }
    }
    out
}

/// Intercept and coefficients of every study on the original covariate
/// scale, from standardized-scale coefficients.
pub fn to_original_scale(std: &MultiStudy, coef: &CoefMatrix) -> Result<Vec<(f64, Vec<f64>)>> {
    let scaling = std
        .scaling()
        .ok_or_else(|| Error::Contract("coefficients need standardized data".into()))?;
    if coef.m() != scaling.len() {
        return Err(Error::Dimension("coefficient columns do not match studies".into()));
    }
    Ok(scaling
        .iter()
        .enumerate()
        .map(|(m, s)| s.to_original(&coef.column(m).to_vec()))
        .collect())
}

/// Held-out criterion `(1/2n) Σ_m Σ_i n_m ω_i (y_i − ŷ_i)²` with weights
/// recomputed on `test` and predictions from original-scale coefficients.
pub fn heldout_loss(test: &MultiStudy, original: &[(f64, Vec<f64>)]) -> Result<f64> {
    if original.len() != test.m() {
        return Err(Error::Dimension("coefficients do not match test studies".into()));
    }
    let n = test.n() as f64;
    let mut total = 0.0;
    for (s, (b0, beta)) in test.studies().iter().zip(original) {
        let nm = s.n() as f64;
        let fitted = s.x().dot(&ndarray::ArrayView1::from(beta.as_slice()));
        for i in 0..s.n() {
            let r = s.y()[i] - b0 - fitted[i];
            total += nm * s.weights()[i] * r * r;
        }
    }
    Ok(total / (2.0 * n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvRow {
    pub method: Method,
    pub lambda: f64,
    pub secondary: Option<f64>,
    pub a: Option<f64>,
    pub fold: usize,
    pub loss: f64,
}

/// One grid point of a CV table with its mean and sd over folds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvPoint {
    pub lambda: f64,
    pub secondary: Option<f64>,
    pub a: Option<f64>,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CvTable {
    pub rows: Vec<CvRow>,
}

impl CvTable {
    /// Mean and sd of the fold losses at each grid point, in table order.
    pub fn summary(&self) -> Vec<CvPoint> {
        let mut points: Vec<(CvPoint, Vec<f64>)> = Vec::new();
        for r in &self.rows {
            let same = |p: &CvPoint| {
                p.lambda == r.lambda && opt_eq(p.secondary, r.secondary) && opt_eq(p.a, r.a)
            };
            match points.iter_mut().find(|(p, _)| same(p)) {
                Some((_, losses)) => losses.push(r.loss),
                None => points.push((
                    CvPoint {
                        lambda: r.lambda,
                        secondary: r.secondary,
                        a: r.a,
                        mean: 0.0,
                        sd: 0.0,
                    },
                    vec![r.loss],
                )),
            }
        }
        points
            .into_iter()
            .map(|(mut p, losses)| {
                let (mean, sd) = mean_sd(&losses);
                p.mean = mean;
                p.sd = sd;
                p
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "method,lambda,secondary,a,fold,loss")?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.method,
                r.lambda,
                opt(r.secondary),
                opt(r.a),
                r.fold,
                r.loss
            )?;
        }
        Ok(())
    }

    pub fn write_csv_file<P: AsRef<Path>>(&self, path: P, header: &[String]) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        for line in header {
            writeln!(file, "# {line}")?;
        }
        self.write_csv(&mut file)?;
        file.flush()?;
        Ok(())
    }
}

fn opt_eq(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => x == y,
        _ => false,
    }
}

/// Sample mean and sd (n − 1 denominator; 0 for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Result of [`cross_validate`].
#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub best: PenaltySpec,
    pub best_point: CvPoint,
    pub table: CvTable,
    /// Refit of the selected penalty on all data (standardized scale).
    pub fit: FitResult,
    /// The standardized full data that `fit` refers to.
    pub standardized: MultiStudy,
}

impl CvOutcome {
    /// Per-study intercept and coefficients on the original scale.
    pub fn original_coefficients(&self) -> Result<Vec<(f64, Vec<f64>)>> {
        to_original_scale(&self.standardized, &self.fit.coef)
    }
}

struct Candidate {
    template: SpecTemplate,
    lambdas: Vec<f64>,
}

fn candidates(
    std_full: &MultiStudy,
    method: Method,
    grid: &TuneGrid,
) -> Result<Vec<Candidate>> {
    let a_values = grid.a_values_for(method);
    if a_values.is_empty() {
        return Err(Error::Contract(format!("no valid a values for {method}")));
    }
    let stacked;
    let lm_data = if method == Method::Pooled {
        stacked = std_full.stacked()?;
        &stacked
    } else {
        std_full
    };
    let mut out = Vec::new();
    for &ratio in &grid.ratios_for(method) {
        let lambdas = match &grid.lambdas {
            LambdaGrid::Explicit(l) => l.clone(),
            LambdaGrid::Relative { length, ratio: r } => {
                let lm = lambda_max(lm_data, method, ratio)?;
                make_lambda_grid(lm, *length, *r)?
            }
        };
        for &a in &a_values {
            out.push(Candidate {
                template: SpecTemplate::new(method, a, ratio, std_full.m()),
                lambdas: lambdas.clone(),
            });
        }
    }
    Ok(out)
}

/// K-fold cross-validation of `method` over `grid` with folds drawn from
/// `seed`. Supports every method except meta (see
/// [`crate::baselines::meta_fit`]).
pub fn cross_validate(
    ms: &MultiStudy,
    method: Method,
    grid: &TuneGrid,
    seed: u64,
    opts: &SolverOptions,
) -> Result<CvOutcome> {
    grid.validate()?;
    let plan = FoldPlan::new(ms, grid.n_folds, seed)?;
    cross_validate_with_plan(ms, method, grid, &plan, opts)
}

/// [`cross_validate`] with an explicit fold assignment.
pub fn cross_validate_with_plan(
    ms: &MultiStudy,
    method: Method,
    grid: &TuneGrid,
    plan: &FoldPlan,
    opts: &SolverOptions,
) -> Result<CvOutcome> {
    if method == Method::Meta {
        return Err(Error::Contract(
            "meta analysis is tuned per study; use baselines::meta_fit".into(),
        ));
    }
    if ms.is_standardized() {
        return Err(Error::Contract(
            "cross-validation expects unstandardized data".into(),
        ));
    }
    grid.validate()?;
    plan.validate_for(ms)?;
    let std_full = ms.standardize()?;
    let cands = candidates(&std_full, method, grid)?;

    let tasks: Vec<(usize, usize)> = (0..cands.len())
        .flat_map(|c| (0..plan.n_folds).map(move |k| (c, k)))
        .collect();
    let fold_losses: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(c, k)| -> Result<Vec<f64>> {
            let cand = &cands[c];
            let (train_rows, test_rows) = plan.split(k);
            let train = ms.training_subset(&train_rows)?;
            let test = ms.subset(&test_rows)?;
            let (std_train, path) = fit_raw_path(&train, &cand.template, &cand.lambdas, opts)?;
            path.iter()
                .map(|res| heldout_loss(&test, &to_original_scale(&std_train, &res.coef)?))
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = CvTable::default();
    for (c, cand) in cands.iter().enumerate() {
        for (l_idx, &lambda) in cand.lambdas.iter().enumerate() {
            for k in 0..plan.n_folds {
                table.rows.push(CvRow {
                    method,
                    lambda,
                    secondary: method.is_two_parameter().then_some(cand.template.ratio),
                    a: method.uses_a().then_some(cand.template.a),
                    fold: k,
                    loss: fold_losses[c * plan.n_folds + k][l_idx],
                });
            }
        }
    }

    // Best point: smallest mean loss; first in table order on ties.
    let mut best: Option<(usize, usize, f64)> = None;
    for (c, cand) in cands.iter().enumerate() {
        for l_idx in 0..cand.lambdas.len() {
            let losses: Vec<f64> = (0..plan.n_folds)
                .map(|k| fold_losses[c * plan.n_folds + k][l_idx])
                .collect();
            let mean = mean_sd(&losses).0;
            if best.is_none_or(|(_, _, b)| mean < b) {
                best = Some((c, l_idx, mean));
            }
        }
    }
    let (c, l_idx, _) = best.expect("grid is nonempty");
    let cand = &cands[c];
    let losses: Vec<f64> = (0..plan.n_folds)
        .map(|k| fold_losses[c * plan.n_folds + k][l_idx])
        .collect();
    let (mean, sd) = mean_sd(&losses);
    let best_point = CvPoint {
        lambda: cand.lambdas[l_idx],
        secondary: method.is_two_parameter().then_some(cand.template.ratio),
        a: method.uses_a().then_some(cand.template.a),
        mean,
        sd,
    };

    let (standardized, mut path) =
        fit_raw_path(ms, &cand.template, &cand.lambdas[..=l_idx], opts)?;
    let fit = path.pop().expect("path is nonempty");
    Ok(CvOutcome {
        best: fit.spec,
        best_point,
        table,
        fit,
        standardized,
    })
}

/// Fits `method` at a fixed path level along a warm-started path from
/// `λ_max` (no cross-validation). `a` and `ratio` are ignored where unused.
pub fn fit_fixed(
    ms: &MultiStudy,
    method: Method,
    lambda: f64,
    a: f64,
    ratio: f64,
    path_length: usize,
    opts: &SolverOptions,
) -> Result<(MultiStudy, FitResult)> {
    if method == Method::Meta {
        return Err(Error::Contract("meta analysis is fitted per study".into()));
    }
    let std = ms.standardize()?;
    let lm_data = if method == Method::Pooled { std.stacked()? } else { std.clone() };
    let lm = lambda_max(&lm_data, method, ratio)?;
    let template = SpecTemplate::new(method, a, ratio, ms.m());
    template.at(lambda).validate()?;
    let mut lambdas: Vec<f64> = if lm > lambda {
        make_lambda_grid(lm, path_length.max(2), (lambda / lm).max(1e-12))?
    } else {
        Vec::new()
    };
    lambdas.retain(|l| *l > lambda);
    lambdas.push(lambda);
    let (std, mut path) = fit_raw_path(ms, &template, &lambdas, opts)?;
    Ok((std, path.pop().expect("path is nonempty")))
}

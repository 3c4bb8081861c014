//! Non-integrative comparators: per-study MCP (meta analysis) and MCP on the
//! stacked studies (pooled analysis).

use rayon::prelude::*;

use crate::data::MultiStudy;
use crate::error::Result;
use crate::solver::{CoefMatrix, FitResult, SolverOptions};
use crate::tuning::{cross_validate, to_original_scale, CvOutcome, Method, TuneGrid};

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    /// Combined fit on the standardized scale of `standardized`. For meta
    /// analysis `spec` is study 1's selected penalty (see `cv` for the
    /// others), the trace holds the single value `Σ_m (n_m/n) objective_m`,
    /// and the KKT residual is the largest per-study residual.
    pub fit: FitResult,
    pub standardized: MultiStudy,
    /// One CV outcome per study for meta analysis, a single one for pooled.
    pub cv: Vec<CvOutcome>,
}

impl BaselineOutcome {
    pub fn original_coefficients(&self) -> Result<Vec<(f64, Vec<f64>)>> {
        to_original_scale(&self.standardized, &self.fit.coef)
    }
}

/// MCP fitted and cross-validated separately on each study; column m of the
/// result holds study m's estimate.
pub fn meta_fit(
    ms: &MultiStudy,
    grid: &TuneGrid,
    seed: u64,
    opts: &SolverOptions,
) -> Result<BaselineOutcome> {
    let outcomes: Vec<CvOutcome> = ms
        .studies()
        .par_iter()
        .map(|s| {
            let single = MultiStudy::new(vec![s.clone()])?;
            cross_validate(&single, Method::Gmcp, grid, seed, opts)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut coef = CoefMatrix::zeros(ms.p(), ms.m());
    for (m, o) in outcomes.iter().enumerate() {
        for j in 0..ms.p() {
            coef.set(j, m, o.fit.coef.get(j, 0));
        }
    }
    let n = ms.n() as f64;
    let objective: f64 = outcomes
        .iter()
        .zip(ms.studies())
        .map(|(o, s)| s.n() as f64 / n * o.fit.objective())
        .sum();
    let fit = FitResult {
        spec: outcomes[0].fit.spec,
        selected: coef.support(),
        coef,
        objective_trace: vec![objective],
        kkt_residual: outcomes.iter().map(|o| o.fit.kkt_residual).fold(0.0, f64::max),
        iterations: outcomes.iter().map(|o| o.fit.iterations).max().unwrap_or(0),
        converged: outcomes.iter().all(|o| o.fit.converged),
    };
    Ok(BaselineOutcome {
        fit,
        standardized: ms.standardize()?,
        cv: outcomes,
    })
}

/// One MCP coefficient vector for all studies, fitted on the stacked
/// standardized studies with their own Stute weights and cross-validated with
/// folds stratified by study. The vector is replicated across the M columns.
pub fn pooled_fit(
    ms: &MultiStudy,
    grid: &TuneGrid,
    seed: u64,
    opts: &SolverOptions,
) -> Result<BaselineOutcome> {
    let outcome = cross_validate(ms, Method::Pooled, grid, seed, opts)?;
    Ok(BaselineOutcome {
        fit: outcome.fit.clone(),
        standardized: outcome.standardized.clone(),
        cv: vec![outcome],
    })
}

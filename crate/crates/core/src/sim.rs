//! Simulated multi-study AFT data.
//!
//! Covariates are mean-zero multivariate normal with AR(ρ) or banded Toeplitz
//! correlation, log event times follow `log T = b₀ + xβ + ε` with standard
//! normal errors, and log censoring times are uniform on `(l, u)`, with `l`
//! the 1% quantile of the marginal law of `log T` and `u` solved so that the
//! expected censoring fraction hits a target.
//!
//! All draws come from [`crate::rng::stream`] keyed by (seed, replicate,
//! study, purpose): study m's data do not depend on how many studies are
//! generated.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{write_study_csv, IndexSets, MultiStudy, Study};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::solver::CoefMatrix;

/// Coefficient sd of the low-signal designs (variance 0.3125).
pub const LOW_SIGNAL_SD: f64 = 0.559_016_994_374_947_4;
/// Coefficient sd of the high-signal designs (variance 1.25).
pub const HIGH_SIGNAL_SD: f64 = 1.118_033_988_749_895;

/// Stream key for draws shared by all studies.
const SHARED: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Correlation {
    /// `corr(x_j, x_k) = ρ^{|j−k|}`.
    Ar(f64),
    /// Level 1: 0.3 at lag 1. Level 2: 0.6, 0.3. Level 3: 0.6, 0.3, 0.15.
    Banded(u8),
}

impl Correlation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Correlation::Ar(rho) if !(0.0..1.0).contains(&rho) => Err(Error::Validation(format!(
                "AR correlation needs 0 <= rho < 1, got {rho}"
            ))),
            Correlation::Banded(level) if !(1..=3).contains(&level) => Err(Error::Validation(
                format!("banded correlation level must be 1, 2 or 3, got {level}"),
            )),
            _ => Ok(()),
        }
    }

    /// Correlation at lag `k`.
    pub fn at_lag(&self, k: usize) -> f64 {
        match *self {
            Correlation::Ar(rho) => rho.powi(k as i32),
            Correlation::Banded(level) => {
                let band: &[f64] = match level {
                    1 => &[1.0, 0.3],
                    2 => &[1.0, 0.6, 0.3],
                    _ => &[1.0, 0.6, 0.3, 0.15],
                };
                band.get(k).copied().unwrap_or(0.0)
            }
        }
    }
}

impl fmt::Display for Correlation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correlation::Ar(rho) => write!(f, "ar{rho}"),
            Correlation::Banded(level) => write!(f, "banded{level}"),
        }
    }
}

impl FromStr for Correlation {
    type Err = Error;

    /// Accepts `ar<rho>` / `ar:<rho>` / `ar(<rho>)` and `banded<level>`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace([' ', '_'], "");
        let bad = || {
            Error::Validation(format!(
                "unknown correlation '{s}'; valid options are ar<rho> (e.g. ar0.5, 0 <= rho < 1), banded1, banded2, banded3"
            ))
        };
        let c = if let Some(rest) = t.strip_prefix("banded") {
            Correlation::Banded(rest.parse().map_err(|_| bad())?)
        } else if let Some(rest) = t.strip_prefix("ar") {
            let rest = rest.trim_start_matches([':', '=', '(']).trim_end_matches(')');
            Correlation::Ar(rest.parse().map_err(|_| bad())?)
        } else {
            return Err(bad());
        };
        c.validate().map_err(|_| bad())?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SparsityModel {
    /// All studies share one support.
    Homogeneity,
    /// A common core plus study-specific rows.
    Heterogeneity,
}

impl fmt::Display for SparsityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SparsityModel::Homogeneity => "homogeneity",
            SparsityModel::Heterogeneity => "heterogeneity",
        })
    }
}

impl FromStr for SparsityModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "homogeneity" | "homo" => Ok(SparsityModel::Homogeneity),
            "heterogeneity" | "hetero" => Ok(SparsityModel::Heterogeneity),
            _ => Err(Error::Validation(format!(
                "unknown sparsity model '{s}'; valid options are homogeneity, heterogeneity"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub studies: usize,
    pub n_per_study: usize,
    pub p: usize,
    pub correlation: Correlation,
    pub sparsity: SparsityModel,
    pub signal_sd: f64,
    pub intercept: f64,
    pub target_censoring: f64,
    /// Important covariates per study.
    pub support_size: usize,
    /// Rows important in every study under heterogeneity.
    pub shared_support: usize,
    /// Under homogeneity, use study 1's coefficient values for every study
    /// instead of independent draws.
    pub shared_values: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            studies: 3,
            n_per_study: 100,
            p: 1000,
            correlation: Correlation::Ar(0.5),
            sparsity: SparsityModel::Homogeneity,
            signal_sd: LOW_SIGNAL_SD,
            intercept: 0.5,
            target_censoring: 0.3,
            support_size: 20,
            shared_support: 10,
            shared_values: false,
            seed: 1,
        }
    }
}

impl SimConfig {
    /// Rows needed by the sparsity layout.
    pub fn rows_needed(&self) -> usize {
        match self.sparsity {
            SparsityModel::Homogeneity => self.support_size,
            SparsityModel::Heterogeneity => {
                self.shared_support + self.studies * (self.support_size - self.shared_support)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.studies == 0 || self.n_per_study == 0 {
            return Err(Error::Validation("need at least one study and one subject".into()));
        }
        self.correlation.validate()?;
        if !(self.target_censoring > 0.0 && self.target_censoring < 1.0) {
            return Err(Error::Validation(format!(
                "target censoring must be in (0, 1), got {}",
                self.target_censoring
            )));
        }
        if !(self.signal_sd >= 0.0 && self.signal_sd.is_finite()) || !self.intercept.is_finite() {
            return Err(Error::Validation("signal sd and intercept must be finite, sd >= 0".into()));
        }
        if self.shared_support > self.support_size {
            return Err(Error::Validation(
                "shared support cannot exceed the per-study support".into(),
            ));
        }
        if self.p < self.rows_needed() {
            return Err(Error::Validation(format!(
                "p = {} is too small: the {} layout needs {} rows",
                self.p,
                self.sparsity,
                self.rows_needed()
            )));
        }
        Ok(())
    }

    /// Short setting label such as `homogeneity/banded2/sd0.559`.
    pub fn label(&self) -> String {
        format!("{}/{}/sd{:.3}", self.sparsity, self.correlation, self.signal_sd)
    }
}

/// True coefficients and their supports.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSet {
    pub beta_true: CoefMatrix,
    pub sets: IndexSets,
}

fn standard_normals<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Lower band Cholesky factor of the Toeplitz correlation with the given
/// lags; `factor[j][b]` is `L[j][j − b]`.
fn band_cholesky(p: usize, lags: &[f64]) -> Result<Vec<Vec<f64>>> {
    let bw = lags.len() - 1;
    let mut l = vec![vec![0.0; bw + 1]; p];
    for j in 0..p {
        for b in (0..=bw.min(j)).rev() {
            let k = j - b;
            // L[j][k] = (Σ_jk − Σ_{i<k} L[j][i] L[k][i]) / L[k][k]
            let mut s = lags[b];
            for i in k.saturating_sub(bw)..k {
                if j - i <= bw {
                    s -= l[j][j - i] * l[k][k - i];
                }
            }
            if b == 0 {
                if s <= 0.0 {
                    return Err(Error::Validation(
                        "correlation matrix is not positive definite".into(),
                    ));
                }
                l[j][0] = s.sqrt();
            } else {
                l[j][b] = s / l[k][0];
            }
        }
    }
    Ok(l)
}

fn gen_covariates_with<R: Rng>(
    n: usize,
    p: usize,
    correlation: Correlation,
    rng: &mut R,
) -> Result<Array2<f64>> {
    correlation.validate()?;
    let mut x = Array2::zeros((n, p));
    match correlation {
        Correlation::Ar(rho) => {
            let c = (1.0 - rho * rho).sqrt();
            for mut row in x.rows_mut() {
                let z = standard_normals(rng, p);
                let mut prev = z[0];
                row[0] = prev;
                for j in 1..p {
                    prev = rho * prev + c * z[j];
                    row[j] = prev;
                }
            }
        }
        Correlation::Banded(level) => {
            let lags: Vec<f64> = (0..=level as usize).map(|k| correlation.at_lag(k)).collect();
            let l = band_cholesky(p, &lags)?;
            let bw = lags.len() - 1;
            for mut row in x.rows_mut() {
                let z = standard_normals(rng, p);
                for j in 0..p {
                    row[j] = (0..=bw.min(j)).map(|b| l[j][b] * z[j - b]).sum();
                }
            }
        }
    }
    Ok(x)
}

/// `n` i.i.d. rows of N(0, Σ) with the given correlation.
pub fn gen_covariates(n: usize, p: usize, correlation: Correlation, seed: u64) -> Result<Array2<f64>> {
    gen_covariates_with(n, p, correlation, &mut stream(seed, 0, 0, Purpose::Covariates))
}

/// True coefficients for replicate `replicate` of `config`.
pub fn gen_truth(config: &SimConfig, replicate: u64) -> Result<TruthSet> {
    config.validate()?;
    let seed = config.seed;
    let mut rows: Vec<usize> = (0..config.p).collect();
    rows.shuffle(&mut stream(seed, replicate, SHARED, Purpose::Support));
    let per_study: Vec<Vec<usize>> = (0..config.studies)
        .map(|m| match config.sparsity {
            SparsityModel::Homogeneity => rows[..config.support_size].to_vec(),
            SparsityModel::Heterogeneity => {
                let own = config.support_size - config.shared_support;
                let start = config.shared_support + m * own;
                let mut r = rows[..config.shared_support].to_vec();
                r.extend_from_slice(&rows[start..start + own]);
                r
            }
        })
        .collect();

    let mut beta = CoefMatrix::zeros(config.p, config.studies);
    for (m, support) in per_study.iter().enumerate() {
        let value_stream = if config.shared_values && config.sparsity == SparsityModel::Homogeneity {
            0
        } else {
            m as u64
        };
        let mut rng = stream(seed, replicate, value_stream, Purpose::Coefficients);
        for &j in support {
            let z: f64 = rng.sample(StandardNormal);
            beta.set(j, m, config.signal_sd * z);
        }
    }
    let sets = IndexSets::from_per_study(
        per_study
            .into_iter()
            .enumerate()
            .map(|(m, s)| s.into_iter().filter(|&j| beta.get(j, m) != 0.0).collect::<BTreeSet<_>>())
            .collect(),
    );
    Ok(TruthSet {
        beta_true: beta,
        sets,
    })
}

/// `βᵀ Σ β` for the population correlation.
pub fn signal_variance(beta: &[f64], correlation: Correlation) -> f64 {
    let nz: Vec<(usize, f64)> = beta
        .iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, b)| (j, *b))
        .collect();
    let mut v = 0.0;
    for &(j, bj) in &nz {
        for &(k, bk) in &nz {
            v += bj * bk * correlation.at_lag(j.abs_diff(k));
        }
    }
    v
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Probability that `C < T` for `log T ~ N(mu, s²)` and
/// `log C ~ Uniform(lo, hi)`.
pub fn censoring_probability(mu: f64, s: f64, lo: f64, hi: f64) -> f64 {
    let nd = std_normal();
    let g = |z: f64| z * nd.cdf(z) + nd.pdf(z);
    let zl = (lo - mu) / s;
    let zu = (hi - mu) / s;
    1.0 - s / (hi - lo) * (g(zu) - g(zl))
}

/// Uniform bounds `(l, u)` for `log C` giving expected censoring fraction
/// `target` when `log T ~ N(mu, s²)`; `l` is the 1% quantile of `log T`.
pub fn calibrate_censoring(mu: f64, s: f64, target: f64) -> Result<(f64, f64)> {
    if !(s > 0.0 && s.is_finite() && mu.is_finite()) {
        return Err(Error::Calibration(format!("invalid event-time law N({mu}, {s}²)")));
    }
    let lo = mu + s * std_normal().inverse_cdf(0.01);
    let ceiling = 1.0 - std_normal().cdf((lo - mu) / s);
    if !(target > 0.0 && target < ceiling) {
        return Err(Error::Calibration(format!(
            "target {target} outside the attainable range (0, {ceiling:.4})"
        )));
    }
    let mut a = lo;
    let mut b = lo + s;
    let mut grow = 0;
    while censoring_probability(mu, s, lo, b) > target {
        b = lo + 2.0 * (b - lo);
        grow += 1;
        if grow > 200 {
            return Err(Error::Calibration("upper bound search did not terminate".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= lo {
            break;
        }
        if censoring_probability(mu, s, lo, mid) > target {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= 1e-13 * s {
            return Ok((lo, b));
        }
    }
    if (censoring_probability(mu, s, lo, b) - target).abs() < 1e-9 {
        Ok((lo, b))
    } else {
        Err(Error::Calibration("bisection did not converge".into()))
    }
}

/// Observed log times and event indicators for one study, given the
/// censoring bounds.
pub fn gen_responses_with<R: Rng, Q: Rng>(
    x: &Array2<f64>,
    beta: &[f64],
    intercept: f64,
    bounds: (f64, f64),
    error_rng: &mut R,
    censor_rng: &mut Q,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if x.ncols() != beta.len() {
        return Err(Error::Dimension(format!(
            "x has {} columns, beta has {} entries",
            x.ncols(),
            beta.len()
        )));
    }
    let (lo, hi) = bounds;
    let lin = x.dot(&ndarray::ArrayView1::from(beta));
    let mut y = Vec::with_capacity(x.nrows());
    let mut delta = Vec::with_capacity(x.nrows());
    for eta in lin {
        let eps: f64 = error_rng.sample(StandardNormal);
        let log_t = intercept + eta + eps;
        let log_c = if hi.is_infinite() {
            f64::INFINITY
        } else {
            censor_rng.random_range(lo..hi)
        };
        y.push(log_t.min(log_c));
        delta.push(log_t <= log_c);
    }
    Ok((y, delta))
}

/// [`gen_responses_with`] with bounds calibrated to `target_censoring`
/// from the analytic law `log T ~ N(intercept, 1 + signal_var)`.
pub fn gen_responses(
    x: &Array2<f64>,
    beta: &[f64],
    intercept: f64,
    signal_var: f64,
    target_censoring: f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<bool>, (f64, f64))> {
    let bounds = calibrate_censoring(intercept, (1.0 + signal_var).sqrt(), target_censoring)?;
    let (y, d) = gen_responses_with(
        x,
        beta,
        intercept,
        bounds,
        &mut stream(seed, 0, 0, Purpose::Errors),
        &mut stream(seed, 0, 0, Purpose::Censoring),
    )?;
    Ok((y, d, bounds))
}

/// One simulated replicate.
#[derive(Debug, Clone)]
pub struct SimReplicate {
    pub data: MultiStudy,
    pub truth: TruthSet,
    /// Uniform bounds of log C per study.
    pub censoring_bounds: Vec<(f64, f64)>,
}

impl SimReplicate {
    /// Realized censoring fraction per study.
    pub fn censoring_rates(&self) -> Vec<f64> {
        self.data.studies().iter().map(Study::censoring_rate).collect()
    }

    pub fn overall_censoring(&self) -> f64 {
        let n = self.data.n() as f64;
        self.data
            .studies()
            .iter()
            .map(|s| s.censoring_rate() * s.n() as f64)
            .sum::<f64>()
            / n
    }
}

/// Replicate `replicate` of `config` (seeded by `config.seed`).
pub fn gen_replicate(config: &SimConfig, replicate: u64) -> Result<SimReplicate> {
    let truth = gen_truth(config, replicate)?;
    let mut studies = Vec::with_capacity(config.studies);
    let mut bounds = Vec::with_capacity(config.studies);
    for m in 0..config.studies {
        let key = m as u64;
        let x = gen_covariates_with(
            config.n_per_study,
            config.p,
            config.correlation,
            &mut stream(config.seed, replicate, key, Purpose::Covariates),
        )?;
        let beta = truth.beta_true.column(m).to_vec();
        let s = (1.0 + signal_variance(&beta, config.correlation)).sqrt();
        let b = calibrate_censoring(config.intercept, s, config.target_censoring)?;
        let (y, delta) = gen_responses_with(
            &x,
            &beta,
            config.intercept,
            b,
            &mut stream(config.seed, replicate, key, Purpose::Errors),
            &mut stream(config.seed, replicate, key, Purpose::Censoring),
        )?;
        studies.push(Study::new(y, delta, x)?);
        bounds.push(b);
    }
    Ok(SimReplicate {
        data: MultiStudy::new(studies)?,
        truth,
        censoring_bounds: bounds,
    })
}

/// Writes the truth sidecar: one line per nonzero `(covariate, study)` pair,
/// both 1-based.
pub fn write_truth<P: AsRef<Path>>(path: P, truth: &TruthSet, comments: &[String]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for c in comments {
        writeln!(f, "# {c}")?;
    }
    writeln!(f, "covariate,study,beta_true")?;
    let b = &truth.beta_true;
    for j in 0..b.p() {
        for m in 0..b.m() {
            let v = b.get(j, m);
            if v != 0.0 {
                writeln!(f, "{},{},{}", j + 1, m + 1, v)?;
            }
        }
    }
    f.flush()?;
    Ok(())
}

/// Writes `study_<m>.csv` for every study plus `truth.csv` into `dir`.
/// Returns the study file paths.
pub fn write_replicate<P: AsRef<Path>>(
    dir: P,
    rep: &SimReplicate,
    comments: &[String],
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (m, s) in rep.data.studies().iter().enumerate() {
        let path = dir.join(format!("study_{}.csv", m + 1));
        write_study_csv(&path, s.y(), s.delta(), s.x(), comments)?;
        paths.push(path);
    }
    write_truth(dir.join("truth.csv"), &rep.truth, comments)?;
    Ok(paths)
}

//! Selection metrics, logrank prediction evaluation and the simulation
//! benchmark driver.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

use crate::baselines::{meta_fit, pooled_fit};
use crate::data::MultiStudy;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::sim::{gen_replicate, SimConfig, TruthSet};
use crate::solver::{CoefMatrix, SolverOptions};
use crate::tuning::{cross_validate, mean_sd, CvTable, Method, TuneGrid};

/// `(tp, size)`: selected pairs that are truly nonzero, and all selected
/// pairs, counted over (covariate, study).
pub fn selection_metrics(estimate: &CoefMatrix, truth: &TruthSet) -> Result<(usize, usize)> {
    let t = &truth.beta_true;
    if estimate.p() != t.p() || estimate.m() != t.m() {
        return Err(Error::Dimension(format!(
            "estimate is {}x{}, truth is {}x{}",
            estimate.p(),
            estimate.m(),
            t.p(),
            t.m()
        )));
    }
    let mut tp = 0;
    let mut size = 0;
    for j in 0..t.p() {
        for m in 0..t.m() {
            if estimate.get(j, m) != 0.0 {
                size += 1;
                if t.get(j, m) != 0.0 {
                    tp += 1;
                }
            }
        }
    }
    Ok((tp, size))
}

/// Two-sample logrank chi-square statistic (1 df) with the hypergeometric
/// variance at tied event times. `group[i]` marks membership of the first
/// group. Returns 0 when the variance vanishes, which only happens when every
/// risk set at an event time is drawn from one group (then O = E).
pub fn logrank_stat(times: &[f64], deltas: &[bool], group: &[bool]) -> Result<f64> {
    let n = times.len();
    if deltas.len() != n || group.len() != n {
        return Err(Error::Dimension("times, deltas and groups differ in length".into()));
    }
    if times.iter().any(|t| t.is_nan()) {
        return Err(Error::Validation("times must not be NaN".into()));
    }
    let n1_total = group.iter().filter(|g| **g).count();
    if n1_total == 0 || n1_total == n {
        return Err(Error::Undefined("logrank statistic needs two nonempty groups".into()));
    }
    if !deltas.iter().any(|d| *d) {
        return Err(Error::Undefined("logrank statistic needs at least one event".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut at_risk = n as f64;
    let mut at_risk1 = n1_total as f64;
    let mut o_minus_e = 0.0;
    let mut var = 0.0;
    let mut i = 0;
    while i < n {
        let t = times[idx[i]];
        let mut k = i;
        let (mut d, mut d1, mut leave, mut leave1) = (0.0, 0.0, 0.0, 0.0);
        while k < n && times[idx[k]] == t {
            let obs = idx[k];
            leave += 1.0;
            if group[obs] {
                leave1 += 1.0;
            }
            if deltas[obs] {
                d += 1.0;
                if group[obs] {
                    d1 += 1.0;
                }
            }
            k += 1;
        }
        if d > 0.0 {
            let frac = at_risk1 / at_risk;
            o_minus_e += d1 - d * frac;
            if at_risk > 1.0 {
                var += d * frac * (1.0 - frac) * (at_risk - d) / (at_risk - 1.0);
            }
        }
        at_risk -= leave;
        at_risk1 -= leave1;
        i = k;
    }
    if var <= 0.0 {
        return Ok(0.0);
    }
    Ok(o_minus_e * o_minus_e / var)
}

/// Low/high split of a linear predictor at its median: the `⌈n/2⌉` smallest
/// values (ties by position) form the low group. `None` when the predictor
/// is constant.
pub fn median_split(predictor: &[f64]) -> Option<Vec<bool>> {
    let first = *predictor.first()?;
    if predictor.iter().all(|v| *v == first) {
        return None;
    }
    let n = predictor.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| predictor[a].total_cmp(&predictor[b]));
    let mut low = vec![false; n];
    for &i in &idx[..n.div_ceil(2)] {
        low[i] = true;
    }
    Some(low)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionEval {
    /// Mean of the per-study statistics.
    pub statistic: f64,
    pub per_study: Vec<f64>,
    /// Studies whose split was degenerate (constant predictor, no events or
    /// a single group); their statistic is recorded as 0.
    pub degenerate: Vec<bool>,
}

impl PredictionEval {
    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|d| *d)
    }
}

/// Median-split logrank evaluation on `test` of per-study original-scale
/// coefficients `(intercept, beta)` fitted on separate training data.
pub fn predict_eval(test: &MultiStudy, coefficients: &[(f64, Vec<f64>)]) -> Result<PredictionEval> {
    if coefficients.len() != test.m() {
        return Err(Error::Dimension("one coefficient vector per study is required".into()));
    }
    let mut per_study = Vec::with_capacity(test.m());
    let mut degenerate = Vec::with_capacity(test.m());
    for (s, (b0, beta)) in test.studies().iter().zip(coefficients) {
        if beta.len() != test.p() {
            return Err(Error::Dimension("coefficient length differs from p".into()));
        }
        let lp: Vec<f64> = s
            .x()
            .dot(&ndarray::ArrayView1::from(beta.as_slice()))
            .iter()
            .map(|v| v + b0)
            .collect();
        let stat = match median_split(&lp) {
            None => None,
            Some(low) => match logrank_stat(s.y(), s.delta(), &low) {
                Ok(v) => Some(v),
                Err(Error::Undefined(_)) => None,
                Err(e) => return Err(e),
            },
        };
        degenerate.push(stat.is_none());
        per_study.push(stat.unwrap_or(0.0));
    }
    let statistic = per_study.iter().sum::<f64>() / per_study.len() as f64;
    Ok(PredictionEval {
        statistic,
        per_study,
        degenerate,
    })
}

/// A tuned fit of any method.
#[derive(Debug, Clone)]
pub struct MethodFit {
    pub method: Method,
    /// Coefficients on the standardized scale.
    pub coef: CoefMatrix,
    /// Per-study intercept and coefficients on the original scale.
    pub original: Vec<(f64, Vec<f64>)>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub converged: bool,
    /// Selected tuning point, `(λ, secondary, a)` per CV run (one per study
    /// for meta analysis).
    pub tuning: Vec<(f64, Option<f64>, Option<f64>)>,
    pub cv_tables: Vec<CvTable>,
}

/// Cross-validates and refits `method` on raw data.
pub fn tune_and_fit(
    ms: &MultiStudy,
    method: Method,
    grid: &TuneGrid,
    seed: u64,
    opts: &SolverOptions,
) -> Result<MethodFit> {
    match method {
        Method::Meta | Method::Pooled => {
            let out = if method == Method::Meta {
                meta_fit(ms, grid, seed, opts)?
            } else {
                pooled_fit(ms, grid, seed, opts)?
            };
            Ok(MethodFit {
                method,
                original: out.original_coefficients()?,
                coef: out.fit.coef.clone(),
                objective: out.fit.objective(),
                kkt_residual: out.fit.kkt_residual,
                converged: out.fit.converged,
                tuning: out
                    .cv
                    .iter()
                    .map(|c| (c.best_point.lambda, c.best_point.secondary, c.best_point.a))
                    .collect(),
                cv_tables: out.cv.into_iter().map(|c| c.table).collect(),
            })
        }
        _ => {
            let cv = cross_validate(ms, method, grid, seed, opts)?;
            Ok(MethodFit {
                method,
                original: cv.original_coefficients()?,
                coef: cv.fit.coef.clone(),
                objective: cv.fit.objective(),
                kkt_residual: cv.fit.kkt_residual,
                converged: cv.fit.converged,
                tuning: vec![(cv.best_point.lambda, cv.best_point.secondary, cv.best_point.a)],
                cv_tables: vec![cv.table],
            })
        }
    }
}

/// Per-study random split with `floor(n · train_fraction)` training rows.
pub fn random_split(
    ms: &MultiStudy,
    train_fraction: f64,
    seed: u64,
    repeat: u64,
) -> Result<(Vec<Vec<usize>>, Vec<Vec<usize>>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "training fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut train = Vec::with_capacity(ms.m());
    let mut test = Vec::with_capacity(ms.m());
    for (m, s) in ms.studies().iter().enumerate() {
        let mut idx: Vec<usize> = (0..s.n()).collect();
        idx.shuffle(&mut stream(seed, repeat, m as u64, Purpose::Split));
        let k = (s.n() as f64 * train_fraction).floor() as usize;
        if k == 0 || k == s.n() {
            return Err(Error::Contract(format!(
                "study {} is too small to split",
                m + 1
            )));
        }
        let mut tr = idx[..k].to_vec();
        let mut te = idx[k..].to_vec();
        tr.sort_unstable();
        te.sort_unstable();
        train.push(tr);
        test.push(te);
    }
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitEvalReport {
    pub method: Method,
    /// Mean logrank statistic of each repeat.
    pub per_repeat: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    /// Repeats with at least one degenerate study split.
    pub degenerate_repeats: usize,
}

/// Repeated 3:1 (or `train_fraction`) split evaluation: tune and fit on the
/// training part, score the median split of the test part by logrank.
pub fn repeated_split_eval(
    ms: &MultiStudy,
    method: Method,
    grid: &TuneGrid,
    repeats: usize,
    train_fraction: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<SplitEvalReport> {
    if repeats == 0 {
        return Err(Error::Contract("at least one repeat is required".into()));
    }
    let results: Vec<PredictionEval> = (0..repeats as u64)
        .into_par_iter()
        .map(|r| {
            let (tr, te) = random_split(ms, train_fraction, seed, r)?;
            let train = ms.training_subset(&tr)?;
            let test = ms.subset(&te)?;
            let fit = tune_and_fit(&train, method, grid, seed.wrapping_add(r), opts)?;
            predict_eval(&test, &fit.original)
        })
        .collect::<Result<Vec<_>>>()?;
    let per_repeat: Vec<f64> = results.iter().map(|r| r.statistic).collect();
    let (mean, sd) = mean_sd(&per_repeat);
    Ok(SplitEvalReport {
        method,
        mean,
        sd,
        degenerate_repeats: results.iter().filter(|r| r.any_degenerate()).count(),
        per_repeat,
    })
}

/// Tuning grids and solver settings used by [`run_benchmark`].
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct BenchmarkOptions {
    /// Grid for glasso, gmcp, gscad, meta and pooled.
    pub single: TuneGrid,
    /// Grid for cmcp and sgmcp.
    pub double: TuneGrid,
    pub solver: SolverOptions,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            single: TuneGrid::for_method(Method::Gmcp),
            double: TuneGrid::for_method(Method::Cmcp),
            solver: SolverOptions {
                debug_checks: false,
                ..SolverOptions::default()
            },
        }
    }
}

impl BenchmarkOptions {
    pub fn grid_for(&self, method: Method) -> &TuneGrid {
        if method.is_two_parameter() {
            &self.double
        } else {
            &self.single
        }
    }
}

/// One (setting, method, replicate) outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawRow {
    pub setting: String,
    pub method: Method,
    pub replicate: u64,
    pub tp: Option<usize>,
    pub size: Option<usize>,
    pub censoring: Option<f64>,
    pub kkt_residual: Option<f64>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub setting: String,
    pub method: Method,
    pub tp_mean: f64,
    pub tp_sd: f64,
    pub size_mean: f64,
    pub size_sd: f64,
    pub replicates: usize,
    pub failures: usize,
}

impl MetricsReport {
    /// `"mean(sd)"` cells in the layout of the published tables.
    pub fn cells(&self) -> (String, String) {
        (
            format!("{:.1}({:.1})", self.tp_mean, self.tp_sd),
            format!("{:.1}({:.1})", self.size_mean, self.size_sd),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkOutput {
    pub raw: Vec<RawRow>,
    pub summary: Vec<MetricsReport>,
}

impl BenchmarkOutput {
    pub fn failures(&self) -> impl Iterator<Item = &RawRow> {
        self.raw.iter().filter(|r| r.error.is_some())
    }

    pub fn report(&self, setting: &str, method: Method) -> Option<&MetricsReport> {
        self.summary
            .iter()
            .find(|r| r.setting == setting && r.method == method)
    }

    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "setting,method,tp_mean,tp_sd,size_mean,size_sd,replicates,failures")?;
        for r in &self.summary {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.setting, r.method, r.tp_mean, r.tp_sd, r.size_mean, r.size_sd, r.replicates, r.failures
            )?;
        }
        Ok(())
    }

    pub fn write_raw_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "setting,method,replicate,tp,size,censoring,kkt_residual,converged,error")?;
        let o = |v: Option<String>| v.unwrap_or_default();
        for r in &self.raw {
            let err = r
                .error
                .as_ref()
                .map(|e| format!("\"{}\"", e.replace('"', "'").replace('\n', " ")))
                .unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.setting,
                r.method,
                r.replicate,
                o(r.tp.map(|v| v.to_string())),
                o(r.size.map(|v| v.to_string())),
                o(r.censoring.map(|v| v.to_string())),
                o(r.kkt_residual.map(|v| v.to_string())),
                o(r.converged.map(|v| v.to_string())),
                err
            )?;
        }
        Ok(())
    }

    /// Tables of `mean(sd)` cells, one row per setting and method.
    pub fn write_table<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{:<40} {:<8} {:>14} {:>14}", "setting", "method", "tp", "size")?;
        for r in &self.summary {
            let (tp, size) = r.cells();
            writeln!(out, "{:<40} {:<8} {:>14} {:>14}", r.setting, r.method.name(), tp, size)?;
        }
        Ok(())
    }
}

/// Mean/sd of tp and size over the successful rows of `raw`, per (setting,
/// method) in first-appearance order.
pub fn summarize(raw: &[RawRow]) -> Vec<MetricsReport> {
    let mut keys: Vec<(String, Method)> = Vec::new();
    for r in raw {
        if !keys.iter().any(|(s, m)| *s == r.setting && *m == r.method) {
            keys.push((r.setting.clone(), r.method));
        }
    }
    keys.into_iter()
        .map(|(setting, method)| {
            let rows: Vec<&RawRow> = raw
                .iter()
                .filter(|r| r.setting == setting && r.method == method)
                .collect();
            let ok: Vec<&&RawRow> = rows.iter().filter(|r| r.error.is_none()).collect();
            let tp: Vec<f64> = ok.iter().filter_map(|r| r.tp).map(|v| v as f64).collect();
            let size: Vec<f64> = ok.iter().filter_map(|r| r.size).map(|v| v as f64).collect();
            let (tp_mean, tp_sd) = mean_sd(&tp);
            let (size_mean, size_sd) = mean_sd(&size);
            MetricsReport {
                setting,
                method,
                tp_mean,
                tp_sd,
                size_mean,
                size_sd,
                replicates: ok.len(),
                failures: rows.len() - ok.len(),
            }
        })
        .collect()
}

/// Seed for the CV folds of one replicate.
fn cv_seed(setting_seed: u64, replicate: u64) -> u64 {
    setting_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(replicate.wrapping_mul(0xBF58_476D_1CE4_E5B9))
}

/// For every setting and replicate `0..replicates`: simulate, tune and fit
/// each method, and score selection against the truth. Failures are
/// recorded in the raw rows and counted in the summary.
pub fn run_benchmark(
    settings: &[(String, SimConfig)],
    methods: &[Method],
    replicates: usize,
    options: &BenchmarkOptions,
) -> Result<BenchmarkOutput> {
    for (_, c) in settings {
        c.validate()?;
    }
    let tasks: Vec<(usize, u64)> = (0..settings.len())
        .flat_map(|s| (0..replicates as u64).map(move |r| (s, r)))
        .collect();
    let raw: Vec<Vec<RawRow>> = tasks
        .par_iter()
        .map(|&(s, r)| {
            let (label, config) = &settings[s];
            let row = |method: Method| RawRow {
                setting: label.clone(),
                method,
                replicate: r,
                tp: None,
                size: None,
                censoring: None,
                kkt_residual: None,
                converged: None,
                error: None,
            };
            let rep = match gen_replicate(config, r) {
                Ok(rep) => rep,
                Err(e) => {
                    return methods
                        .iter()
                        .map(|&m| RawRow {
                            error: Some(format!("simulation: {e}")),
                            ..row(m)
                        })
                        .collect();
                }
            };
            let censoring = rep.overall_censoring();
            methods
                .iter()
                .map(|&m| {
                    let outcome = tune_and_fit(
                        &rep.data,
                        m,
                        options.grid_for(m),
                        cv_seed(config.seed, r),
                        &options.solver,
                    )
                    .and_then(|fit| {
                        let (tp, size) = selection_metrics(&fit.coef, &rep.truth)?;
                        Ok((fit, tp, size))
                    });
                    match outcome {
                        Ok((fit, tp, size)) => RawRow {
                            tp: Some(tp),
                            size: Some(size),
                            censoring: Some(censoring),
                            kkt_residual: Some(fit.kkt_residual),
                            converged: Some(fit.converged),
                            ..row(m)
                        },
                        Err(e) => RawRow {
                            censoring: Some(censoring),
                            error: Some(e.to_string()),
                            ..row(m)
                        },
                    }
                })
                .collect()
        })
        .collect();
    let raw: Vec<RawRow> = raw.into_iter().flatten().collect();
    // Order rows by setting, method, replicate for stable output.
    let mut ordered = Vec::with_capacity(raw.len());
    for (label, _) in settings {
        for &m in methods {
            let mut rows: Vec<RawRow> = raw
                .iter()
                .filter(|r| r.setting == *label && r.method == m)
                .cloned()
                .collect();
            rows.sort_by_key(|r| r.replicate);
            ordered.extend(rows);
        }
    }
    let summary = summarize(&ordered);
    Ok(BenchmarkOutput {
        raw: ordered,
        summary,
    })
}

/// Writes `summary.csv`, `raw.csv` and, if any run failed, `failures.csv`
/// into `dir`, each preceded by `header` comment lines.
pub fn write_benchmark<P: AsRef<Path>>(
    dir: P,
    output: &BenchmarkOutput,
    header: &[String],
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let open = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
        for line in header {
            writeln!(f, "# {line}")?;
        }
        Ok(f)
    };
    let mut f = open("summary.csv")?;
    output.write_summary_csv(&mut f)?;
    f.flush()?;
    let mut f = open("raw.csv")?;
    output.write_raw_csv(&mut f)?;
    f.flush()?;
    let failed: Vec<RawRow> = output.failures().cloned().collect();
    let manifest = dir.join("failures.csv");
    if failed.is_empty() {
        if manifest.exists() {
            std::fs::remove_file(manifest)?;
        }
    } else {
        let mut f = open("failures.csv")?;
        BenchmarkOutput {
            raw: failed,
            summary: Vec::new(),
        }
        .write_raw_csv(&mut f)?;
        f.flush()?;
    }
    Ok(())
}

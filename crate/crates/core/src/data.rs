//! Multi-study censored survival data.
//!
//! A [`Study`] holds log observed times, event indicators and the covariate
//! matrix of one dataset, kept in sorted order together with its Kaplan–Meier
//! (Stute) weights. A [`MultiStudy`] is an ordered collection of studies that
//! share the same covariates.
//!
//! Ties in the observed times are broken by placing events before censorings,
//! then by original position.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Squared weighted norm below which a covariate column is treated as constant.
const DEGENERATE_COLUMN: f64 = 1e-24;

/// One dataset: log times, event indicators, covariates and Stute weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    y: Vec<f64>,
    delta: Vec<bool>,
    x: Array2<f64>,
    weights: Vec<f64>,
    order: Vec<usize>,
    sorted: bool,
}

impl Study {
    /// Wraps raw vectors without sorting. Call [`sort_study`] before use.
    pub fn unsorted(y: Vec<f64>, delta: Vec<bool>, x: Array2<f64>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Dimension("study has no observations".into()));
        }
        if delta.len() != n || x.nrows() != n {
            return Err(Error::Dimension(format!(
                "y has {} entries, delta {}, x {} rows",
                n,
                delta.len(),
                x.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::Dimension("study has no covariates".into()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite log time at row {}", i + 1)));
        }
        if let Some(((i, _), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite covariate at row {}", i + 1)));
        }
        Ok(Self {
            y,
            delta,
            x,
            weights: Vec::new(),
            order: (0..n).collect(),
            sorted: false,
        })
    }

    /// Sorts, attaches Stute weights and rejects studies without events.
    pub fn new(y: Vec<f64>, delta: Vec<bool>, x: Array2<f64>) -> Result<Self> {
        let mut study = sort_study(Self::unsorted(y, delta, x)?);
        study.weights = stute_weights(&study.delta)?;
        study.check_has_events()?;
        Ok(study)
    }

    fn check_has_events(&self) -> Result<()> {
        if self.weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Validation(
                "all observations are censored; the weighted loss is degenerate".into(),
            ));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    /// Stute weights ω_i; empty until the study has been sorted and weighted.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Position of each sorted row in the input order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted
    }

    /// Fraction of censored observations.
    pub fn censoring_rate(&self) -> f64 {
        self.delta.iter().filter(|d| !**d).count() as f64 / self.n() as f64
    }

    /// Rows `rows` (indices into the sorted study, any order) as a new study
    /// with weights recomputed on the subsample. All-censored subsamples are
    /// allowed here; their weights are all zero.
    pub fn subset(&self, rows: &[usize]) -> Result<Study> {
        if !self.sorted {
            return Err(Error::Contract("subset requires a sorted study".into()));
        }
        let mut rows = rows.to_vec();
        rows.sort_unstable();
        rows.dedup();
        if rows.is_empty() {
            return Err(Error::Dimension("empty subset".into()));
        }
        if rows[rows.len() - 1] >= self.n() {
            return Err(Error::Dimension("subset row out of range".into()));
        }
        let y = rows.iter().map(|&i| self.y[i]).collect();
        let delta: Vec<bool> = rows.iter().map(|&i| self.delta[i]).collect();
        let x = self.x.select(Axis(0), &rows);
        let order = rows.iter().map(|&i| self.order[i]).collect();
        let weights = stute_weights(&delta)?;
        Ok(Study {
            y,
            delta,
            x,
            weights,
            order,
            sorted: true,
        })
    }
}

/// Sorts a study by observed time, co-permuting indicators and covariate rows.
///
/// Ties are broken by placing events before censorings and then by original
/// position (stable).
pub fn sort_study(study: Study) -> Study {
    let n = study.n();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&a, &b| {
        study.y[a]
            .total_cmp(&study.y[b])
            .then_with(|| study.delta[b].cmp(&study.delta[a]))
    });
    let y = perm.iter().map(|&i| study.y[i]).collect();
    let delta = perm.iter().map(|&i| study.delta[i]).collect();
    let x = study.x.select(Axis(0), &perm);
    let order = perm.iter().map(|&i| study.order[i]).collect();
    Study {
        y,
        delta,
        x,
        weights: Vec::new(),
        order,
        sorted: true,
    }
}

/// Kaplan–Meier jump sizes attached to sorted observations.
///
/// `ω_1 = δ_1 / n` and `ω_i = δ_i / (n − i + 1) · Π_{j<i} ((n − j) / (n − j + 1))^{δ_j}`.
pub fn stute_weights(delta_sorted: &[bool]) -> Result<Vec<f64>> {
    let n = delta_sorted.len();
    if n == 0 {
        return Err(Error::Dimension("empty indicator vector".into()));
    }
    let nf = n as f64;
    let mut weights = Vec::with_capacity(n);
    let mut product = 1.0;
    for (k, &event) in delta_sorted.iter().enumerate() {
        // k is the zero-based position, so i = k + 1.
        let at_risk = nf - k as f64;
        weights.push(if event { product / at_risk } else { 0.0 });
        if event {
            product *= (at_risk - 1.0) / at_risk;
        }
    }
    Ok(weights)
}

/// Centering and scaling applied to one study by [`MultiStudy::standardize`].
#[derive(Debug, Clone, PartialEq)]
pub struct StudyScaling {
    pub y_center: f64,
    pub x_center: Vec<f64>,
    /// Zero marks a column that is constant on the weighted sample.
    pub x_scale: Vec<f64>,
}

impl StudyScaling {
    fn identity(p: usize) -> Self {
        Self {
            y_center: 0.0,
            x_center: vec![0.0; p],
            x_scale: vec![1.0; p],
        }
    }

    /// Maps standardized-scale coefficients to `(intercept, coefficients)` on
    /// the original covariate scale.
    pub fn to_original(&self, beta_std: &[f64]) -> (f64, Vec<f64>) {
        let beta: Vec<f64> = beta_std
            .iter()
            .zip(&self.x_scale)
            .map(|(b, s)| if *s > 0.0 { b / s } else { 0.0 })
            .collect();
        let intercept = self.y_center
            - beta
                .iter()
                .zip(&self.x_center)
                .map(|(b, c)| b * c)
                .sum::<f64>();
        (intercept, beta)
    }
}

/// Important-variable index sets: `S_m` per study and their union `S`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexSets {
    pub overall: BTreeSet<usize>,
    pub per_study: Vec<BTreeSet<usize>>,
}

impl IndexSets {
    pub fn from_per_study(per_study: Vec<BTreeSet<usize>>) -> Self {
        let overall = per_study.iter().flatten().copied().collect();
        Self { overall, per_study }
    }

    /// Number of selected (covariate, study) pairs.
    pub fn pair_count(&self) -> usize {
        self.per_study.iter().map(BTreeSet::len).sum()
    }
}

/// An ordered collection of studies sharing `p` covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiStudy {
    studies: Vec<Study>,
    p: usize,
    scaling: Option<Vec<StudyScaling>>,
}

impl MultiStudy {
    pub fn new(studies: Vec<Study>) -> Result<Self> {
        let Some(first) = studies.first() else {
            return Err(Error::Dimension("at least one study is required".into()));
        };
        let p = first.p();
        for (m, s) in studies.iter().enumerate() {
            if s.p() != p {
                return Err(Error::Dimension(format!(
                    "study {} has {} covariates, expected {}",
                    m + 1,
                    s.p(),
                    p
                )));
            }
            if !s.is_sorted() || s.weights.len() != s.n() {
                return Err(Error::Contract(format!(
                    "study {} is not sorted and weighted",
                    m + 1
                )));
            }
        }
        Ok(Self {
            studies,
            p,
            scaling: None,
        })
    }

    pub fn studies(&self) -> &[Study] {
        &self.studies
    }

    pub fn study(&self, m: usize) -> &Study {
        &self.studies[m]
    }

    /// Number of studies M.
    pub fn m(&self) -> usize {
        self.studies.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Total sample size Σ n_m.
    pub fn n(&self) -> usize {
        self.studies.iter().map(Study::n).sum()
    }

    pub fn is_standardized(&self) -> bool {
        self.scaling.is_some()
    }

    pub fn scaling(&self) -> Option<&[StudyScaling]> {
        self.scaling.as_deref()
    }

    /// Weighted centering of `y` and every covariate column per study, then
    /// scaling each column to `(1/n_m) X_jᵀ W_m X_j = 1`.
    pub fn standardize(&self) -> Result<MultiStudy> {
        if self.is_standardized() {
            return Ok(self.clone());
        }
        let mut studies = Vec::with_capacity(self.m());
        let mut scaling = Vec::with_capacity(self.m());
        for (m, s) in self.studies.iter().enumerate() {
            let w = &s.weights;
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                return Err(Error::Validation(format!(
                    "study {} has no events; cannot standardize",
                    m + 1
                )));
            }
            let y_center = w.iter().zip(&s.y).map(|(w, y)| w * y).sum::<f64>() / total;
            let y = s.y.iter().map(|v| v - y_center).collect();
            let mut x = s.x.clone();
            let mut x_center = Vec::with_capacity(self.p);
            let mut x_scale = Vec::with_capacity(self.p);
            for mut col in x.columns_mut() {
                let c = col.iter().zip(w).map(|(x, w)| w * x).sum::<f64>() / total;
                col.mapv_inplace(|v| v - c);
                let ss: f64 = col.iter().zip(w).map(|(x, w)| w * x * x).sum();
                if ss <= DEGENERATE_COLUMN {
                    col.fill(0.0);
                    x_scale.push(0.0);
                } else {
                    let sd = ss.sqrt();
                    col.mapv_inplace(|v| v / sd);
                    x_scale.push(sd);
                }
                x_center.push(c);
            }
            studies.push(Study {
                y,
                delta: s.delta.clone(),
                x,
                weights: s.weights.clone(),
                order: s.order.clone(),
                sorted: true,
            });
            scaling.push(StudyScaling {
                y_center,
                x_center,
                x_scale,
            });
        }
        Ok(MultiStudy {
            studies,
            p: self.p,
            scaling: Some(scaling),
        })
    }

    /// Per-study row subsets with weights recomputed on each subsample.
    pub fn subset(&self, rows: &[Vec<usize>]) -> Result<MultiStudy> {
        if rows.len() != self.m() {
            return Err(Error::Dimension(format!(
                "{} row sets for {} studies",
                rows.len(),
                self.m()
            )));
        }
        let studies = self
            .studies
            .iter()
            .zip(rows)
            .map(|(s, r)| s.subset(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiStudy {
            studies,
            p: self.p,
            scaling: None,
        })
    }

    /// Like [`MultiStudy::subset`] but rejects subsamples without events.
    pub fn training_subset(&self, rows: &[Vec<usize>]) -> Result<MultiStudy> {
        let ms = self.subset(rows)?;
        for s in &ms.studies {
            s.check_has_events()?;
        }
        Ok(ms)
    }

    /// Stacks a standardized collection into one study. Rows keep their
    /// per-study weights: the stacked weight of a row of study m is
    /// `(n_m / n) ω_i^m`, so that `n ω' = n_m ω`.
    pub fn stacked(&self) -> Result<MultiStudy> {
        if !self.is_standardized() {
            return Err(Error::Contract("stacking requires standardized studies".into()));
        }
        let n = self.n() as f64;
        let views: Vec<_> = self.studies.iter().map(|s| s.x.view()).collect();
        let x = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        let mut y = Vec::with_capacity(self.n());
        let mut delta = Vec::with_capacity(self.n());
        let mut weights = Vec::with_capacity(self.n());
        let mut order = Vec::with_capacity(self.n());
        let mut offset = 0;
        for s in &self.studies {
            let share = s.n() as f64 / n;
            y.extend_from_slice(&s.y);
            delta.extend_from_slice(&s.delta);
            weights.extend(s.weights.iter().map(|w| w * share));
            order.extend(s.order.iter().map(|i| i + offset));
            offset += s.n();
        }
        let study = Study {
            y,
            delta,
            x,
            weights,
            order,
            sorted: true,
        };
        Ok(MultiStudy {
            studies: vec![study],
            p: self.p,
            scaling: Some(vec![StudyScaling::identity(self.p)]),
        })
    }
}

/// Reads one CSV file per study (`time,status,x1,...,xp`; lines starting with
/// `#` are comments), applies the log to `time`, sorts and weights each study.
pub fn load_studies<P: AsRef<Path>>(paths: &[P]) -> Result<MultiStudy> {
    if paths.is_empty() {
        return Err(Error::Dimension("no study files given".into()));
    }
    let mut studies = Vec::with_capacity(paths.len());
    let mut expected_p: Option<(usize, String)> = None;
    for path in paths {
        let path = path.as_ref();
        let name = path.display().to_string();
        let study = read_study_csv(path).map_err(|e| match e {
            Error::Parse { .. } => e,
            other => Error::Parse {
                path: name.clone(),
                message: other.to_string(),
            },
        })?;
        match &expected_p {
            None => expected_p = Some((study.p(), name)),
            Some((p, first)) if *p != study.p() => {
                return Err(Error::Validation(format!(
                    "covariate count mismatch: {} has {} covariates but {} has {}",
                    first,
                    p,
                    name,
                    study.p()
                )));
            }
            Some(_) => {}
        }
        studies.push(study);
    }
    MultiStudy::new(studies)
}

fn read_study_csv(path: &Path) -> Result<Study> {
    let name = path.display().to_string();
    let parse_err = |message: String| Error::Parse {
        path: name.clone(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 3 {
        return Err(parse_err(
            "expected header `time,status,x1,...,xp` with at least one covariate".into(),
        ));
    }
    if &headers[0] != "time" || &headers[1] != "status" {
        return Err(parse_err(format!(
            "first two columns must be `time,status`, found `{},{}`",
            &headers[0], &headers[1]
        )));
    }
    let p = headers.len() - 2;
    let mut y = Vec::new();
    let mut delta = Vec::new();
    let mut values = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| parse_err(format!("row {row}: {e}")))?;
        if record.len() != headers.len() {
            return Err(parse_err(format!(
                "row {row}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        let field = |c: usize| -> Result<f64> {
            let raw = &record[c];
            if raw.is_empty() {
                return Err(parse_err(format!("row {row}: missing value in `{}`", &headers[c])));
            }
            let v: f64 = raw.parse().map_err(|_| {
                parse_err(format!("row {row}: `{raw}` in `{}` is not a number", &headers[c]))
            })?;
            if !v.is_finite() {
                return Err(parse_err(format!("row {row}: non-finite value in `{}`", &headers[c])));
            }
            Ok(v)
        };
        let time = field(0)?;
        if time <= 0.0 {
            return Err(parse_err(format!("row {row}: time must be strictly positive")));
        }
        let status = match &record[1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(parse_err(format!("row {row}: status `{other}` is not 0 or 1")));
            }
        };
        y.push(time.ln());
        delta.push(status);
        for c in 2..headers.len() {
            values.push(field(c)?);
        }
    }
    if y.is_empty() {
        return Err(parse_err("no data rows".into()));
    }
    let x = Array2::from_shape_vec((y.len(), p), values)
        .map_err(|e| parse_err(e.to_string()))?;
    Study::new(y, delta, x).map_err(|e| parse_err(e.to_string()))
}

/// Writes a study in the CSV schema read by [`load_studies`]; `comment` lines
/// are emitted first, prefixed by `# `.
pub fn write_study_csv<P: AsRef<Path>>(
    path: P,
    y_log: &[f64],
    delta: &[bool],
    x: ArrayView2<'_, f64>,
    comment: &[String],
) -> Result<()> {
    use std::io::Write;
    if y_log.len() != delta.len() || x.nrows() != y_log.len() {
        return Err(Error::Dimension("y, delta and x rows differ in length".into()));
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for line in comment {
        writeln!(out, "# {line}")?;
    }
    let mut header = String::from("time,status");
    for j in 1..=x.ncols() {
        header.push_str(&format!(",x{j}"));
    }
    writeln!(out, "{header}")?;
    for (i, row) in x.rows().into_iter().enumerate() {
        write!(out, "{},{}", y_log[i].exp(), u8::from(delta[i]))?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

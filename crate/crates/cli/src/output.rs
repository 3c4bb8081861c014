//! Provenance headers and result files.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

use aft_integrative::tuning::CvTable;
use aft_integrative::IndexSets;

/// `aftint <version> seed=<seed> config=<sha256>` where the hash covers the
/// canonical JSON of the effective configuration.
pub fn header<T: Serialize>(seed: u64, config: &T) -> Result<String> {
    let json = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&json);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(format!("aftint {} seed={seed} config={hex}", env!("CARGO_PKG_VERSION")))
}

/// Hex SHA-256 of a file's contents.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn create(path: &Path, header: &str) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut f = std::io::BufWriter::new(f);
    writeln!(f, "# {header}")?;
    Ok(f)
}

/// `covariate,study,estimate` for every pair (1-based), original scale.
pub fn write_coefficients(path: &Path, header: &str, original: &[(f64, Vec<f64>)]) -> Result<()> {
    let mut f = create(path, header)?;
    writeln!(f, "covariate,study,estimate")?;
    let p = original.first().map_or(0, |(_, b)| b.len());
    for j in 0..p {
        for (m, (_, beta)) in original.iter().enumerate() {
            writeln!(f, "{},{},{}", j + 1, m + 1, beta[j])?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn write_cv_tables(path: &Path, header: &str, tables: &[CvTable]) -> Result<()> {
    let mut f = create(path, header)?;
    writeln!(f, "study,method,lambda,secondary,a,fold,loss")?;
    // One table per study for meta analysis; "all" otherwise.
    for (m, t) in tables.iter().enumerate() {
        let study = if tables.len() > 1 { (m + 1).to_string() } else { "all".into() };
        for r in &t.rows {
            let o = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                f,
                "{study},{},{},{},{},{},{}",
                r.method,
                r.lambda,
                o(r.secondary),
                o(r.a),
                r.fold + 1,
                r.loss
            )?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn write_rows(path: &Path, header: &str, columns: &str, rows: &[String]) -> Result<()> {
    let mut f = create(path, header)?;
    writeln!(f, "{columns}")?;
    for r in rows {
        writeln!(f, "{r}")?;
    }
    f.flush()?;
    Ok(())
}

/// JSON cannot carry comments, so the header goes into a `provenance` field.
pub fn write_json<T: Serialize>(path: &Path, header: &str, body: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Wrapped<'a, T> {
        provenance: &'a str,
        #[serde(flatten)]
        body: &'a T,
    }
    let text = serde_json::to_string_pretty(&Wrapped { provenance: header, body })?;
    std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

/// Selected sets with 1-based covariate indices.
#[derive(Debug, Serialize)]
pub struct Selected {
    pub overall: Vec<usize>,
    pub per_study: Vec<Vec<usize>>,
    pub pairs: usize,
}

impl From<&IndexSets> for Selected {
    fn from(s: &IndexSets) -> Self {
        Self {
            overall: s.overall.iter().map(|j| j + 1).collect(),
            per_study: s.per_study.iter().map(|v| v.iter().map(|j| j + 1).collect()).collect(),
            pairs: s.pair_count(),
        }
    }
}

//! Scalar concave penalties and the group, composite and sparse-group
//! penalties built from them.
//!
//! Penalty values are the integrals from 0 of the derivatives
//!
//! ```text
//! LASSO  p'(t) = λ
//! SCAD   p'(t) = λ { I(t ≤ λ) + (aλ − t)₊ / ((a − 1)λ) · I(t > λ) }
//! MCP    p'(t) = λ (1 − t / (aλ))₊
//! ```
//!
//! so every penalty satisfies `p(0) = 0` and `p'(0+) = λ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Base penalty family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lasso,
    Scad,
    Mcp,
}

impl Family {
    /// Smallest admissible concavity parameter (exclusive), if any.
    pub fn min_a(self) -> Option<f64> {
        match self {
            Family::Lasso => None,
            Family::Scad => Some(2.0),
            Family::Mcp => Some(1.0),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Lasso => "lasso",
            Family::Scad => "scad",
            Family::Mcp => "mcp",
        })
    }
}

/// A scalar penalty `p_λ(t)` on `t ≥ 0`. `a` is ignored for LASSO.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub family: Family,
    pub lambda: f64,
    pub a: f64,
}

impl Penalty {
    pub fn lasso(lambda: f64) -> Self {
        Self {
            family: Family::Lasso,
            lambda,
            a: f64::INFINITY,
        }
    }

    pub fn mcp(lambda: f64, a: f64) -> Self {
        Self {
            family: Family::Mcp,
            lambda,
            a,
        }
    }

    pub fn scad(lambda: f64, a: f64) -> Self {
        Self {
            family: Family::Scad,
            lambda,
            a,
        }
    }

    /// Checks `λ ≥ 0` and the family's lower bound on `a`.
    pub fn validate(&self) -> Result<()> {
        self.validate_lambda()?;
        if let Some(min) = self.family.min_a() {
            if !(self.a > min) || !self.a.is_finite() {
                return Err(Error::Domain(format!(
                    "{} requires a > {}, got {}",
                    self.family, min, self.a
                )));
            }
        }
        Ok(())
    }

    fn validate_lambda(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        check_nonneg(t)?;
        Ok(self.value_at(t))
    }

    pub fn deriv(&self, t: f64) -> Result<f64> {
        check_nonneg(t)?;
        Ok(self.deriv_at(t))
    }

    /// `p(t)` for `t ≥ 0` without argument checks.
    #[inline]
    pub fn value_at(&self, t: f64) -> f64 {
        let (l, a) = (self.lambda, self.a);
        match self.family {
            Family::Lasso => l * t,
            Family::Mcp => {
                if t <= a * l {
                    l * t - t * t / (2.0 * a)
                } else {
                    0.5 * a * l * l
                }
            }
            Family::Scad => {
                if t <= l {
                    l * t
                } else if t <= a * l {
                    (2.0 * a * l * t - t * t - l * l) / (2.0 * (a - 1.0))
                } else {
                    0.5 * l * l * (a + 1.0)
                }
            }
        }
    }

    /// `p'(t)` for `t ≥ 0` (right derivative at 0) without argument checks.
    #[inline]
    pub fn deriv_at(&self, t: f64) -> f64 {
        let (l, a) = (self.lambda, self.a);
        match self.family {
            Family::Lasso => l,
            Family::Mcp => (l - t / a).max(0.0),
            Family::Scad => {
                if t <= l {
                    l
                } else {
                    ((a * l - t) / (a - 1.0)).max(0.0)
                }
            }
        }
    }

    /// Largest value the penalty attains, `None` for LASSO.
    pub fn saturation(&self) -> Option<f64> {
        match self.family {
            Family::Lasso => None,
            _ => Some(self.value_at(self.a * self.lambda)),
        }
    }

    /// Curvature bound `c` such that `t ↦ ½ c t² + p(t)` is convex, i.e. the
    /// largest concavity of the penalty (`1/a` for MCP, `1/(a−1)` for SCAD).
    pub fn concavity(&self) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        match self.family {
            Family::Lasso => 0.0,
            Family::Mcp => 1.0 / self.a,
            Family::Scad => 1.0 / (self.a - 1.0),
        }
    }

    /// The penalty multiplied by `w ≥ 0`, expressed in the same family where
    /// possible (`w · MCP(λ, a) = MCP(wλ, a/w)`).
    pub fn scaled(&self, w: f64) -> ScaledPenalty {
        ScaledPenalty { base: *self, weight: w }
    }

    /// Minimizer over `t ≥ 0` of `½ (t − z)² + step · p(t)` for `z ≥ 0`.
    ///
    /// Exact for every family and every `step > 0`, including the non-convex
    /// regime `step ≥ a` (MCP) / `step ≥ a − 1` (SCAD). Ties between zero and a
    /// nonzero minimizer resolve to zero.
    pub fn prox_radius(&self, z: f64, step: f64) -> f64 {
        self.scaled(1.0).prox_radius(z, step)
    }
}

/// `weight · p(t)`; used by the composite update where the outer penalty is
/// linearized around the current point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledPenalty {
    base: Penalty,
    weight: f64,
}

impl ScaledPenalty {
    #[inline]
    fn objective(&self, t: f64, z: f64, step: f64) -> f64 {
        0.5 * (t - z) * (t - z) + step * self.weight * self.base.value_at(t)
    }

    pub fn prox_radius(&self, z: f64, step: f64) -> f64 {
        let s = step * self.weight;
        let (l, a) = (self.base.lambda, self.base.a);
        if s == 0.0 || l == 0.0 {
            return z;
        }
        let mut candidates: [f64; 4] = [f64::NAN; 4];
        match self.base.family {
            Family::Lasso => return (z - s * l).max(0.0),
            Family::Mcp => {
                let curvature = 1.0 - s / a;
                if curvature > 0.0 {
                    candidates[0] = ((z - s * l) / curvature).clamp(0.0, a * l);
                } else {
                    candidates[0] = a * l;
                }
                candidates[1] = z.max(a * l);
            }
            Family::Scad => {
                candidates[0] = (z - s * l).clamp(0.0, l);
                let curvature = 1.0 - s / (a - 1.0);
                if curvature > 0.0 {
                    let t = ((a - 1.0) * z - s * a * l) / (a - 1.0 - s);
                    candidates[1] = t.clamp(l, a * l);
                } else {
                    candidates[1] = a * l;
                }
                candidates[2] = z.max(a * l);
            }
        }
        let mut best_t = 0.0;
        let mut best_f = self.objective(0.0, z, step);
        for &t in candidates.iter().filter(|t| !t.is_nan()) {
            let f = self.objective(t, z, step);
            if f < best_f {
                best_f = f;
                best_t = t;
            }
        }
        best_t
    }
}

fn check_nonneg(t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("penalty argument must be >= 0, got {t}")));
    }
    Ok(())
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Domain(format!("prox step must be positive, got {step}")));
    }
    Ok(())
}

pub fn penalty_value(family: Family, lambda: f64, a: f64, t: f64) -> Result<f64> {
    Penalty { family, lambda, a }.value(t)
}

pub fn penalty_deriv(family: Family, lambda: f64, a: f64, t: f64) -> Result<f64> {
    Penalty { family, lambda, a }.deriv(t)
}

/// Minimizer of `½ ‖u − v‖² + step · p(‖u‖₂)`. The result is parallel to `v`.
pub fn group_prox(v: &[f64], step: f64, penalty: &Penalty) -> Result<Vec<f64>> {
    check_step(step)?;
    let mut out = v.to_vec();
    group_prox_in_place(&mut out, step, &penalty.scaled(1.0));
    Ok(out)
}

/// Scalar case of [`group_prox`]; preserves the sign of `v`.
pub fn scalar_prox(v: f64, step: f64, penalty: &Penalty) -> Result<f64> {
    check_step(step)?;
    Ok(v.signum() * penalty.prox_radius(v.abs(), step))
}

#[inline]
pub(crate) fn group_prox_in_place(v: &mut [f64], step: f64, penalty: &ScaledPenalty) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let radius = penalty.prox_radius(norm, step);
    let c = radius / norm;
    for x in v.iter_mut() {
        *x *= c;
    }
}

#[inline]
pub(crate) fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Penalty applied to the coefficient matrix, one variant per estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum PenaltySpec {
    /// `λ Σ_j ‖β_j‖₂`.
    GroupLasso { lambda: f64 },
    /// `Σ_j p_λ(‖β_j‖₂)` with a SCAD or MCP base.
    GroupConcave { penalty: Penalty },
    /// `Σ_j p_O(Σ_m p_I(|β_j^m|))`.
    Composite { outer: Penalty, inner: Penalty },
    /// `Σ_j p_1(‖β_j‖₂) + Σ_j Σ_m p_2(|β_j^m|)`.
    SparseGroup { group: Penalty, indiv: Penalty },
}

impl PenaltySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PenaltySpec::GroupLasso { lambda } => Penalty::lasso(*lambda).validate(),
            PenaltySpec::GroupConcave { penalty } => {
                if penalty.family == Family::Lasso {
                    return Err(Error::Domain(
                        "the concave group penalty needs a SCAD or MCP base; use GroupLasso".into(),
                    ));
                }
                penalty.validate()
            }
            PenaltySpec::Composite { outer, inner } => {
                inner.validate()?;
                // The outer penalty only enters through its derivative at the
                // inner sum, so any positive saturation point is usable.
                outer.validate_lambda()?;
                if outer.family != Family::Lasso && !(outer.a > 0.0 && outer.a.is_finite()) {
                    return Err(Error::Domain(format!(
                        "outer penalty requires a > 0, got {}",
                        outer.a
                    )));
                }
                Ok(())
            }
            PenaltySpec::SparseGroup { group, indiv } => {
                group.validate()?;
                indiv.validate()
            }
        }
    }

    /// Penalty of one coefficient row `β_j`.
    pub fn row_value(&self, row: &[f64]) -> f64 {
        match self {
            PenaltySpec::GroupLasso { lambda } => lambda * l2(row),
            PenaltySpec::GroupConcave { penalty } => penalty.value_at(l2(row)),
            PenaltySpec::Composite { outer, inner } => composite_row(outer, inner, row),
            PenaltySpec::SparseGroup { group, indiv } => sparse_group_row(group, indiv, row),
        }
    }

    /// Dual bound at the all-zero solution; a row stays at zero when its
    /// correlation vector is below this level in the method's norm.
    pub fn zero_threshold(&self) -> f64 {
        match self {
            PenaltySpec::GroupLasso { lambda } => *lambda,
            PenaltySpec::GroupConcave { penalty } => penalty.lambda,
            PenaltySpec::Composite { outer, inner } => outer.lambda * inner.lambda,
            PenaltySpec::SparseGroup { group, indiv } => group.lambda + indiv.lambda,
        }
    }

    /// Whether this penalty selects whole rows only.
    pub fn is_one_level(&self) -> bool {
        matches!(
            self,
            PenaltySpec::GroupLasso { .. } | PenaltySpec::GroupConcave { .. }
        )
    }
}

#[inline]
pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
fn composite_row(outer: &Penalty, inner: &Penalty, row: &[f64]) -> f64 {
    outer.value_at(row.iter().map(|b| inner.value_at(b.abs())).sum())
}

#[inline]
fn sparse_group_row(group: &Penalty, indiv: &Penalty, row: &[f64]) -> f64 {
    group.value_at(l2(row)) + row.iter().map(|b| indiv.value_at(b.abs())).sum::<f64>()
}

/// `p_O(Σ_m p_I(|β_j^m|))`.
pub fn composite_value(spec: &PenaltySpec, row: &[f64]) -> Result<f64> {
    match spec {
        PenaltySpec::Composite { outer, inner } => Ok(composite_row(outer, inner, row)),
        _ => Err(Error::Contract("composite_value needs a Composite spec".into())),
    }
}

/// `p_1(‖β_j‖₂) + Σ_m p_2(|β_j^m|)`.
pub fn sparse_group_value(spec: &PenaltySpec, row: &[f64]) -> Result<f64> {
    match spec {
        PenaltySpec::SparseGroup { group, indiv } => Ok(sparse_group_row(group, indiv, row)),
        _ => Err(Error::Contract("sparse_group_value needs a SparseGroup spec".into())),
    }
}

#![allow(dead_code)]

use aft_integrative::{CoefMatrix, MultiStudy, Study};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal<R: Rng>(r: &mut R) -> f64 {
    r.sample(StandardNormal)
}

/// Raw (unstandardized) studies with `y = x β_m + noise`, about 25% of
/// observations censored by shifting `y` down, and at least one event each.
pub fn random_studies<R: Rng>(r: &mut R, m: usize, n_m: usize, p: usize, signal: f64) -> MultiStudy {
    let mut studies = Vec::with_capacity(m);
    for _ in 0..m {
        let beta: Vec<f64> = (0..p).map(|_| signal * r.random_range(-1.5..1.5)).collect();
        let x = Array2::from_shape_fn((n_m, p), |_| normal(r));
        let mut y = Vec::with_capacity(n_m);
        let mut delta = Vec::with_capacity(n_m);
        for i in 0..n_m {
            let eta: f64 = (0..p).map(|j| x[[i, j]] * beta[j]).sum();
            let t = eta + 0.5 * normal(r);
            if i > 0 && r.random_bool(0.25) {
                y.push(t - r.random_range(0.0..1.0));
                delta.push(false);
            } else {
                y.push(t);
                delta.push(true);
            }
        }
        studies.push(Study::new(y, delta, x).unwrap());
    }
    MultiStudy::new(studies).unwrap()
}

/// Dense re-implementation of the weighted least-squares loss.
pub fn dense_loss(ms: &MultiStudy, coef: &CoefMatrix) -> f64 {
    let n = ms.n() as f64;
    let mut total = 0.0;
    for (m, s) in ms.studies().iter().enumerate() {
        let x = s.x();
        let nm = s.n() as f64;
        for i in 0..s.n() {
            let mut fit = 0.0;
            for j in 0..ms.p() {
                fit += x[[i, j]] * coef.get(j, m);
            }
            let r = s.y()[i] - fit;
            total += nm * s.weights()[i] * r * r;
        }
    }
    total / (2.0 * n)
}

/// Kaplan–Meier jump sizes for distinct sorted times with indicators `delta`.
pub fn km_jumps(delta: &[bool]) -> Vec<f64> {
    let n = delta.len();
    let mut surv = 1.0;
    let mut jumps = Vec::with_capacity(n);
    for (i, d) in delta.iter().enumerate() {
        let at_risk = (n - i) as f64;
        let deaths = if *d { 1.0 } else { 0.0 };
        jumps.push(surv * deaths / at_risk);
        surv *= 1.0 - deaths / at_risk;
    }
    jumps
}

/// Logrank statistic from an explicit table over the distinct event times,
/// computed by scanning all subjects at each time.
pub fn logrank_textbook(times: &[f64], deltas: &[bool], group: &[bool]) -> f64 {
    let mut event_times: Vec<f64> = times
        .iter()
        .zip(deltas)
        .filter(|(_, d)| **d)
        .map(|(t, _)| *t)
        .collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();
    let mut num = 0.0;
    let mut var = 0.0;
    for &t in &event_times {
        let mut n = 0.0;
        let mut n1 = 0.0;
        let mut d = 0.0;
        let mut d1 = 0.0;
        for i in 0..times.len() {
            if times[i] >= t {
                n += 1.0;
                if group[i] {
                    n1 += 1.0;
                }
            }
            if times[i] == t && deltas[i] {
                d += 1.0;
                if group[i] {
                    d1 += 1.0;
                }
            }
        }
        let e1 = d * n1 / n;
        num += d1 - e1;
        if n > 1.0 {
            var += d * (n1 / n) * ((n - n1) / n) * ((n - d) / (n - 1.0));
        }
    }
    if var == 0.0 {
        0.0
    } else {
        num * num / var
    }
}

/// Same grid point up to round-off in the λ level, which is derived from
/// sums whose order follows the study order.
#[allow(dead_code)]
pub fn same_point(a: &aft_integrative::tuning::CvPoint, b: &aft_integrative::tuning::CvPoint) -> bool {
    (a.lambda - b.lambda).abs() <= 1e-10 * a.lambda.abs() && a.secondary == b.secondary && a.a == b.a
}

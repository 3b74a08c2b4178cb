//! The Hopf bound `ρ ≲ −exp(−A/δ^{1/α−1})` for negative subharmonic
//! functions on a cusp, and an empirical certificate for candidate `ρ`.
//!
//! Certification works on the planar slice through the cusp axis: the
//! candidate is sampled on the truncated cusp `Γ ∩ Δ_R`, and the best
//! constant `c` in `u(z) ≤ −c·exp(−A/δ(z)^{1/α−1})` is the minimum of the
//! pointwise ratios.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::hopf_constant;
use crate::error::{invalid, Error, Result};
use crate::geometry::{boundary_distance_planar, CuspParams};
use crate::sampling::trial_rng;

/// Exponents beyond this are handled in log space.
const LOG_SPACE_THRESHOLD: f64 = 700.0;

/// `log(−hopf_bound) = −A/δ^{1/α−1}`, finite for every `δ > 0`.
pub fn hopf_bound_log(params: CuspParams, delta: f64) -> Result<f64> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid("delta", format!("must be positive, got {delta}")));
    }
    // δ^{−k} = exp(−k ln δ) stays finite where δ^{−k} itself would not.
    let e = hopf_constant(params) * (-params.k() * delta.ln()).exp();
    if e.is_finite() {
        Ok(-e)
    } else {
        Err(Error::Underflow {
            log_value: f64::NEG_INFINITY,
        })
    }
}

/// `−exp(−A/δ^{1/α−1})`, strictly negative and decreasing in `δ`.
///
/// Past the log-space threshold the value is still returned while it is a
/// nonzero `f64`; beyond that `Underflow` points to [`hopf_bound_log`].
pub fn hopf_bound(params: CuspParams, delta: f64) -> Result<f64> {
    let l = hopf_bound_log(params, delta)?;
    let v = -l.exp();
    if -l > LOG_SPACE_THRESHOLD && v == 0.0 {
        return Err(Error::Underflow { log_value: l });
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub samples: usize,
    pub seed: u64,
    /// Samples lie at `Re z ≥ depth·R`.
    pub depth: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            seed: 1,
            depth: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfSample {
    pub z: Complex64,
    pub delta: f64,
    pub u: f64,
    /// `log(u/hopf_bound(δ))`.
    pub log_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfCertificate {
    pub params: CuspParams,
    pub radius: f64,
    pub sample_count: usize,
    pub best_constant: f64,
    pub witness: Complex64,
    /// Best constant with twice the samples.
    pub doubled_constant: f64,
    /// Minimum ratio over samples with `|z| < R/10`.
    pub near_vertex_constant: f64,
}

impl HopfCertificate {
    /// Relative change of the best constant under sample doubling.
    pub fn doubling_drift(&self) -> f64 {
        (self.doubled_constant - self.best_constant).abs() / self.best_constant
    }

    pub fn certified(&self) -> bool {
        self.best_constant > 0.0 && self.doubling_drift() <= 0.1
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "C": self.params.c(),
            "alpha": self.params.alpha(),
            "A": hopf_constant(self.params),
            "best_constant": self.best_constant,
            "witness": [self.witness.re, self.witness.im],
            "samples": self.sample_count,
        })
    }
}

/// Half the points on the axis (log-spaced in `[depth·R, 0.95·R]`), half
/// drawn per index from `(seed, i)`: `Re z` log-uniform over the same range
/// and `Im z` uniform across the slice.
pub fn hopf_samples(params: CuspParams, radius: f64, n: usize, seed: u64, depth: f64) -> Vec<Complex64> {
    let lo = depth * radius;
    let hi = 0.95 * radius;
    let n_axis = n / 2;
    let mut pts: Vec<Complex64> = (0..n_axis)
        .map(|i| {
            let u = (i as f64 + 0.5) / n_axis as f64;
            Complex64::new(lo * (hi / lo).powf(u), 0.0)
        })
        .collect();
    pts.extend((0..n - n_axis).map(|i| {
        let mut rng = trial_rng(seed, i as u64);
        let x = lo * (hi / lo).powf(rng.gen::<f64>());
        let w = params.half_width(x).min((radius * radius - x * x).sqrt());
        Complex64::new(x, 0.999 * w * (2.0 * rng.gen::<f64>() - 1.0))
    }));
    pts
}

/// Evaluates `u`, `δ` and the log ratio at each point.
pub fn hopf_ratios<U>(params: CuspParams, radius: f64, u: &U, pts: &[Complex64]) -> Result<Vec<HopfSample>>
where
    U: Fn(Complex64) -> f64 + Sync,
{
    let out: Vec<Result<HopfSample>> = pts
        .par_iter()
        .enumerate()
        .map(|(i, &z)| {
            let v = u(z);
            if !(v < 0.0) {
                return Err(Error::SignViolation {
                    index: i,
                    value: v,
                    reason: "candidate must be negative",
                });
            }
            let delta = boundary_distance_planar(params, radius, z)?;
            let lb = hopf_bound_log(params, delta)?;
            Ok(HopfSample {
                z,
                delta,
                u: v,
                log_ratio: (-v).ln() - lb,
            })
        })
        .collect();
    out.into_iter().collect()
}

fn minimum(samples: &[HopfSample]) -> Option<&HopfSample> {
    samples.iter().min_by(|a, b| a.log_ratio.total_cmp(&b.log_ratio))
}

pub fn hopf_certify_with<U>(params: CuspParams, radius: f64, u: &U, cfg: &CertifyConfig) -> Result<HopfCertificate>
where
    U: Fn(Complex64) -> f64 + Sync,
{
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid("R", "must be positive"));
    }
    if cfg.samples < 4 {
        return Err(invalid("samples", "needs at least 4"));
    }
    if !(cfg.depth > 0.0 && cfg.depth < 0.5) {
        return Err(invalid("depth", "must lie in (0, 1/2)"));
    }
    let pts = hopf_samples(params, radius, cfg.samples, cfg.seed, cfg.depth);
    let s = hopf_ratios(params, radius, u, &pts)?;
    let best = minimum(&s).expect("nonempty samples");
    let pts2 = hopf_samples(params, radius, 2 * cfg.samples, cfg.seed, cfg.depth);
    let s2 = hopf_ratios(params, radius, u, &pts2)?;
    let best2 = minimum(&s2).expect("nonempty samples");
    let near = s
        .iter()
        .filter(|p| p.z.norm() < 0.1 * radius)
        .map(|p| p.log_ratio)
        .fold(f64::INFINITY, f64::min);
    Ok(HopfCertificate {
        params,
        radius,
        sample_count: cfg.samples,
        best_constant: best.log_ratio.exp(),
        witness: best.z,
        doubled_constant: best2.log_ratio.exp(),
        near_vertex_constant: near.exp(),
    })
}

pub fn hopf_certify<U>(params: CuspParams, radius: f64, u: &U, samples: usize, seed: u64) -> Result<HopfCertificate>
where
    U: Fn(Complex64) -> f64 + Sync,
{
    hopf_certify_with(
        params,
        radius,
        u,
        &CertifyConfig {
            samples,
            seed,
            ..Default::default()
        },
    )
}

//! Walk-on-spheres estimate of `g(z, a) = log|z − a| − E[log|X − a|]`,
//! where `X` is the exit point of Brownian motion started at `z`.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GreenEstimate, GreenMethod};
use crate::error::{ensure_finite, invalid, Error, Result};
use crate::geometry::PlanarDomain;
use crate::sampling::trial_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WosConfig {
    /// Walks stop once within this distance of the boundary.
    pub epsilon_shell: f64,
    pub max_steps: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for WosConfig {
    fn default() -> Self {
        Self {
            epsilon_shell: 1e-4,
            max_steps: 100_000,
            trials: 100_000,
            seed: 1,
        }
    }
}

impl WosConfig {
    pub fn validate(&self, diameter: f64) -> Result<()> {
        if !(self.epsilon_shell > 0.0 && self.epsilon_shell < diameter / 100.0) {
            return Err(invalid(
                "epsilon_shell",
                format!("must lie in (0, diameter/100) = (0, {})", diameter / 100.0),
            ));
        }
        if self.trials < 1000 {
            return Err(invalid("trials", "must be at least 1000"));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps", "must be positive"));
        }
        Ok(())
    }
}

/// Exit point of one walk, or `None` when the step budget runs out. Points
/// in the shell are snapped to the boundary when the domain knows how.
pub(crate) fn walk<D: PlanarDomain + ?Sized, R: Rng>(
    dom: &D,
    start: Complex64,
    eps: f64,
    max_steps: usize,
    rng: &mut R,
) -> Option<Complex64> {
    let mut x = start;
    for _ in 0..max_steps {
        let d = dom.step_distance(x);
        if d <= eps {
            return Some(dom.nearest_boundary_point(x).unwrap_or(x));
        }
        let th = rng.gen::<f64>() * std::f64::consts::TAU;
        x += Complex64::from_polar(d, th);
    }
    None
}

pub fn green_wos<D: PlanarDomain + ?Sized>(
    dom: &D,
    z: Complex64,
    a: Complex64,
    cfg: &WosConfig,
) -> Result<GreenEstimate> {
    ensure_finite("z", &[z.re, z.im])?;
    ensure_finite("a", &[a.re, a.im])?;
    cfg.validate(dom.bounding_box().diameter())?;
    for (p, name) in [(z, "z"), (a, "a")] {
        if !dom.contains(p) {
            return Err(Error::OutsideDomain {
                x: p.re,
                y: p.im,
                reason: format!("{name} must lie in the domain"),
            });
        }
    }
    if z == a {
        return Err(invalid("z", "coincides with the pole"));
    }
    let samples: Vec<Option<f64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(cfg.seed, i as u64);
            walk(dom, z, cfg.epsilon_shell, cfg.max_steps, &mut rng).map(|x| (x - a).norm().ln())
        })
        .collect();
    let failed = samples.iter().filter(|s| s.is_none()).count();
    if failed * 100 > cfg.trials {
        return Err(Error::WalkBudgetExceeded {
            failed,
            trials: cfg.trials,
        });
    }
    let vals: Vec<f64> = samples.into_iter().flatten().collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let value = (z - a).norm().ln() - mean;
    // Rounding floor for walks whose exit values barely vary.
    let floor = 8.0 * f64::EPSILON * (1.0 + mean.abs() + value.abs());
    Ok(GreenEstimate {
        value: value.min(0.0),
        error: (var / n).sqrt() + floor,
        method: GreenMethod::WalkOnSpheres,
    })
}

//! Green functions `g_Ω(z, a) ≤ 0` with a logarithmic pole at `a`.
//!
//! Three independent routes are provided: the closed form on disks, grid
//! solvers with an `(h, h/2)` error estimate, and walk-on-spheres.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};

mod cusp;
mod fd;
mod profile;
mod source;
mod wos;
mod zoom;

pub use cusp::{CuspFem, CuspFemConfig, CuspMesh};
pub use fd::{green_fd, FdGreen, FdSolution, GridSpec};
pub use profile::{axis_green_profile, AxisProfile, AxisProfileConfig, AxisProfileRow};
pub use source::SmoothedSource;
pub use wos::{green_wos, WosConfig};
pub use zoom::{ImageDomain, ZoomConfig, ZoomGreen};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenMethod {
    DiskClosedForm,
    FiniteDifference,
    WalkOnSpheres,
}

/// A Green-function value with an error bar: a standard error for Monte
/// Carlo, an `(h, h/2)` difference for grid solvers, 0 for closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenEstimate {
    pub value: f64,
    pub error: f64,
    pub method: GreenMethod,
}

impl GreenEstimate {
    /// Whether two estimates agree within `factor` times their combined error.
    pub fn agrees_with(&self, other: &GreenEstimate, factor: f64) -> bool {
        (self.value - other.value).abs() <= factor * (self.error + other.error)
    }
}

/// `g(z, a) = log|R(z − a)| − log|R² − ā z|` on the disk `|z| < R`.
pub fn green_disk(radius: f64, z: Complex64, a: Complex64) -> Result<GreenEstimate> {
    ensure_finite("z", &[z.re, z.im])?;
    ensure_finite("a", &[a.re, a.im])?;
    if !(radius > 0.0) {
        return Err(invalid("R", "must be positive"));
    }
    if z.norm() >= radius || a.norm() >= radius {
        return Err(Error::OutsideDomain {
            x: z.re,
            y: z.im,
            reason: "both points must lie in the open disk".into(),
        });
    }
    if z == a {
        return Err(invalid("z", "coincides with the pole"));
    }
    let value = (radius * (z - a)).norm().ln() - (radius * radius - a.conj() * z).norm().ln();
    Ok(GreenEstimate {
        value: value.min(0.0),
        error: 0.0,
        method: GreenMethod::DiskClosedForm,
    })
}

/// Upper bound `ρ(z) ≤ C₀/log(R₂/R₁) · g_Ω(z, a)` with
/// `C₀ = inf_{∂Δ_{R₁}(a)} (−ρ)`, for negative subharmonic `ρ` on
/// `Δ_{R₁}(a) ⋐ Ω ⋐ Δ_{R₂}(a)`.
pub fn comparison_lemma_bound(rho_on_circle: &[f64], r1: f64, r2: f64, g_at: &GreenEstimate) -> Result<f64> {
    if rho_on_circle.is_empty() {
        return Err(invalid("rho_on_circle", "needs at least one sample"));
    }
    if !(r1 > 0.0 && r2 > r1) {
        return Err(invalid("R2", format!("must exceed R1 > 0 (R1 = {r1}, R2 = {r2})")));
    }
    ensure_finite("rho_on_circle", rho_on_circle)?;
    let mut c0 = f64::INFINITY;
    for (i, &v) in rho_on_circle.iter().enumerate() {
        if v >= 0.0 {
            return Err(Error::SignViolation {
                index: i,
                value: v,
                reason: "rho must be negative on the inner circle",
            });
        }
        c0 = c0.min(-v);
    }
    Ok(c0 / (r2 / r1).ln() * g_at.value)
}

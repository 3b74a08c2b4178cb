//! Splitting `g = s + v` with a cut-off logarithm `s`, so grid solvers only
//! see the smooth remainder `v`.

use num_complex::Complex64;

/// `s(z) = χ(|z − a|/ρ) log(|z − a|/ρ)` with a C⁴ cut-off that is 1 on
/// `[0, 1/2]` and 0 on `[1, ∞)`. A C² cut-off leaves a kink in `Δs` that
/// spoils the `h²` behaviour of the grid solvers near `|z − a| = ρ/2`.
///
/// `s` carries the pole, vanishes outside `Δ_ρ(a)` and is harmonic on
/// `Δ_{ρ/2}(a) \ {a}`, so `v = g − s` solves `Δv = −Δs` with `v = 0` on the
/// boundary whenever `ρ` is below the distance from `a` to the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedSource {
    pub a: Complex64,
    pub rho: f64,
}

/// Degree-9 smoothstep: `S' = 630 x⁴(1−x)⁴`.
fn smoothstep(x: f64) -> (f64, f64, f64) {
    let y = 1.0 - x;
    let x2 = x * x;
    (
        x2 * x2 * x * (126.0 - 420.0 * x + 540.0 * x2 - 315.0 * x2 * x + 70.0 * x2 * x2),
        630.0 * x2 * x2 * (y * y) * (y * y),
        2520.0 * x2 * x * y * y * y * (1.0 - 2.0 * x),
    )
}

/// `(χ, χ', χ'')` at `t`.
fn cutoff(t: f64) -> (f64, f64, f64) {
    if t <= 0.5 {
        (1.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (0.0, 0.0, 0.0)
    } else {
        let (s, ds, dds) = smoothstep(2.0 * t - 1.0);
        (1.0 - s, -2.0 * ds, -4.0 * dds)
    }
}

impl SmoothedSource {
    pub fn value(&self, z: Complex64) -> f64 {
        let t = (z - self.a).norm() / self.rho;
        if t >= 1.0 {
            return 0.0;
        }
        cutoff(t).0 * t.ln()
    }

    /// `Δs`, supported on the annulus `ρ/2 < |z − a| < ρ`.
    pub fn laplacian(&self, z: Complex64) -> f64 {
        let t = (z - self.a).norm() / self.rho;
        if t <= 0.5 || t >= 1.0 {
            return 0.0;
        }
        let (_, d1, d2) = cutoff(t);
        let l = t.ln();
        // f = χ ln t; f'' + f'/t = χ'' ln t + χ'(2 + ln t)/t
        (d2 * l + d1 * (2.0 + l) / t) / (self.rho * self.rho)
    }
}

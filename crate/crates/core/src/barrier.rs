//! Comparison function built from the model profile
//! `h_B(u) = B u (log 1/u)^{−2}`.
//!
//! For a profile `h` satisfying the four regularity conditions, the function
//! `φ(z) = x + 2h(x) + 2x ∫₀ˣ h(u)/u² du − 2h(|z|)` is subharmonic on
//! `D_B ∩ Δ_r`, where `D_B = {x > h(|y|)}`, vanishes or is negative on the
//! curve `x = h(|y|)` and is positive on the positive axis. Indeed
//! `Δφ = 2K(x) − 2K(|z|)` with `K = h'' + h'/u`.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::geometry::{sampled_curve_distance, BoundingBox, PlanarDomain};
use crate::sampling::trial_rng;

/// A boundary profile `x = h(|y|)` on `[0, u0)`.
pub trait Profile: Sync {
    fn value(&self, u: f64) -> f64;

    /// Right end `u0` of the domain of definition.
    fn upper(&self) -> f64;

    fn derivative(&self, u: f64) -> f64 {
        let e = 1e-5 * u;
        (self.value(u + e) - self.value(u - e)) / (2.0 * e)
    }

    fn second_derivative(&self, u: f64) -> f64 {
        let e = 1e-4 * u;
        (self.value(u + e) - 2.0 * self.value(u) + self.value(u - e)) / (e * e)
    }

    /// `h(e^{−v}) e^{v}`, the integrand of `∫ h(u)/u² du` after `u = e^{−v}`.
    fn integrand_log(&self, v: f64) -> f64 {
        let u = (-v).exp();
        if u == 0.0 {
            return 0.0;
        }
        self.value(u) / u
    }

    /// `∫₀ˣ h(u)/u² du`.
    fn integral_to(&self, x: f64) -> f64 {
        integral_by_quadrature(self, x)
    }
}

/// `∫₀ˣ h(u)/u² du` by adaptive Gauss–Legendre quadrature after the
/// substitutions `u = e^{−v}`, `v = log(1/x)/τ`.
pub fn integral_by_quadrature<P: Profile + ?Sized>(profile: &P, x: f64) -> f64 {
    let l0 = -x.ln();
    let f = |tau: f64| {
        let v = l0 / tau;
        profile.integrand_log(v) * l0 / (tau * tau)
    };
    adaptive_gauss(&f, 0.0, 1.0, 1e-13, 20_000)
}

const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

fn gauss5<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(x, w)| w * f(m + h * x))
        .sum::<f64>()
        * h
}

/// Adaptive bisection with a five-point Gauss–Legendre rule; endpoints are
/// never evaluated, so integrable endpoint singularities are allowed.
///
/// Returns NaN if the panel budget runs out, which is how divergent
/// integrals show up.
pub fn adaptive_gauss<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64, max_panels: usize) -> f64 {
    let first = gauss5(f, a, b);
    let width = b - a;
    let mut stack = vec![(a, b, first)];
    let mut total = 0.0f64;
    let mut panels = 0;
    while let Some((a, b, whole)) = stack.pop() {
        // Panels share the error budget in proportion to their width.
        let budget = rel_tol * (b - a) / width * first.abs().max(total.abs());
        panels += 1;
        if panels > max_panels {
            return f64::NAN;
        }
        let m = 0.5 * (a + b);
        let (l, r) = (gauss5(f, a, m), gauss5(f, m, b));
        let both = l + r;
        if !both.is_finite() {
            return f64::NAN;
        }
        if (both - whole).abs() <= budget.max(rel_tol * both.abs()) || b - a < 1e-15 {
            total += both;
        } else {
            stack.push((m, b, r));
            stack.push((a, m, l));
        }
    }
    total
}

/// `h_B(u) = B u (log 1/u)^{−2}` on `[0, u0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HBProfile {
    #[serde(rename = "B")]
    b: f64,
    u0: f64,
}

impl HBProfile {
    pub fn new(b: f64, u0: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(invalid("B", "must be a finite positive real"));
        }
        if !(u0 > 0.0 && u0 < 1.0) {
            return Err(invalid("u0", format!("must lie in (0,1), got {u0}")));
        }
        Ok(Self { b, u0 })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn u0(&self) -> f64 {
        self.u0
    }

    /// Checked evaluation on `[0, u0)`.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0 && u < self.u0) {
            return Err(invalid("u", format!("must lie in [0, {}), got {u}", self.u0)));
        }
        Ok(self.value(u))
    }

    /// `h_B'' + h_B'/u = B(L⁻² + 4L⁻³ + 6L⁻⁴)/u` with `L = log 1/u`.
    pub fn k_function(&self, u: f64) -> f64 {
        let l = -u.ln();
        self.b * (l.powi(-2) + 4.0 * l.powi(-3) + 6.0 * l.powi(-4)) / u
    }

    /// Closed form of `∫₀ˣ h_B(u)/u² du`.
    pub fn integral_closed(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.b / (-x.ln())
        }
    }
}

impl Profile for HBProfile {
    fn value(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let l = -u.ln();
        self.b * u / (l * l)
    }

    fn upper(&self) -> f64 {
        self.u0
    }

    fn derivative(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let l = -u.ln();
        self.b * (l.powi(-2) + 2.0 * l.powi(-3))
    }

    fn second_derivative(&self, u: f64) -> f64 {
        let l = -u.ln();
        self.b * (2.0 * l.powi(-3) + 6.0 * l.powi(-4)) / u
    }

    fn integrand_log(&self, v: f64) -> f64 {
        self.b / (v * v)
    }

    fn integral_to(&self, x: f64) -> f64 {
        self.integral_closed(x)
    }
}

/// Outcome of the four regularity checks on a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionFlags {
    /// Finite values, `C¹` at 0 with `h(0) = h'(0) = 0`.
    pub smooth: bool,
    /// `∫₀^ε h(u)/u² du < ∞`.
    pub integrable: bool,
    /// `h' ≥ 0`.
    pub monotone: bool,
    /// `h'' + h'/u` nonincreasing.
    pub concavity: bool,
    /// Largest grid point at which `h'' + h'/u` is still nonincreasing from
    /// the left end, if the last condition fails.
    pub concavity_breaks_at: Option<f64>,
}

impl ConditionFlags {
    pub fn all(&self) -> bool {
        self.smooth && self.integrable && self.monotone && self.concavity
    }
}

/// Checks the four conditions on a logarithmic grid in `(0, u0)`.
pub fn check_ln_conditions<P: Profile + ?Sized>(profile: &P, grid_n: usize) -> Result<ConditionFlags> {
    if grid_n < 100 {
        return Err(invalid("grid_n", "must be at least 100"));
    }
    let u0 = profile.upper();
    let (lo, hi) = ((u0 * 1e-12).ln(), (u0 * (1.0 - 1e-6)).ln());
    let grid: Vec<f64> = (0..grid_n)
        .map(|i| (lo + (hi - lo) * i as f64 / (grid_n - 1) as f64).exp())
        .collect();

    let vals: Vec<f64> = grid.iter().map(|&u| profile.value(u)).collect();
    let quotients: Vec<f64> = grid.iter().zip(&vals).map(|(u, h)| h / u).collect();
    let smooth = vals.iter().all(|v| v.is_finite())
        && profile.value(0.0) == 0.0
        && quotients.windows(2).all(|w| w[0].abs() <= w[1].abs() * (1.0 + 1e-12))
        && quotients[0].abs() < quotients[grid_n - 1].abs().max(1e-300);

    let eps = 0.5 * u0.min(1.0);
    let integrable = profile.integral_to(eps).is_finite();

    let d1: Vec<f64> = grid.iter().map(|&u| profile.derivative(u)).collect();
    let scale1 = d1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let monotone = d1.iter().all(|&v| v >= -1e-12 * scale1);

    let kf: Vec<f64> = grid
        .iter()
        .zip(&d1)
        .map(|(&u, &d)| profile.second_derivative(u) + d / u)
        .collect();
    // K varies over many decades on the grid, so the slack uses the local
    // scale of each adjacent pair.
    let first_bad = kf
        .windows(2)
        .position(|w| w[1] > w[0] + 1e-9 * w[0].abs().max(w[1].abs()));
    Ok(ConditionFlags {
        smooth,
        integrable,
        monotone,
        concavity: first_bad.is_none(),
        concavity_breaks_at: first_bad.map(|i| grid[i]),
    })
}

/// `φ(z) = x + 2h(x) + 2x ∫₀ˣ h/u² − 2h(|z|)`.
pub fn phi_eval<P: Profile + ?Sized>(profile: &P, z: Complex64) -> Result<f64> {
    ensure_finite("z", &[z.re, z.im])?;
    let u0 = profile.upper();
    if !(z.re >= 0.0 && z.re < u0 && z.norm() < u0) {
        return Err(Error::OutsideDomain {
            x: z.re,
            y: z.im,
            reason: format!("phi needs 0 <= x and |z| < u0 = {u0}"),
        });
    }
    Ok(phi_unchecked(profile, z))
}

fn phi_unchecked<P: Profile + ?Sized>(profile: &P, z: Complex64) -> f64 {
    let x = z.re;
    x + 2.0 * profile.value(x) + 2.0 * x * profile.integral_to(x) - 2.0 * profile.value(z.norm())
}

/// `D_B ∩ Δ_r = {x > h(|y|), |y| < u0, |z| < r}`.
pub struct BarrierRegion<'a, P: Profile + ?Sized> {
    pub profile: &'a P,
    pub r: f64,
}

impl<'a, P: Profile + ?Sized> BarrierRegion<'a, P> {
    pub fn new(profile: &'a P, r: f64) -> Result<Self> {
        if !(r > 0.0 && r < profile.upper()) {
            return Err(invalid("r", format!("must lie in (0, u0 = {})", profile.upper())));
        }
        Ok(Self { profile, r })
    }

    /// Angular half-width of the arc `E₁ = D̄_B ∩ {|z| = r}`.
    pub fn arc_half_angle(&self) -> f64 {
        // r cos θ − h(r sin θ) changes sign once on (0, π/2).
        let g = |t: f64| self.r * t.cos() - self.profile.value(self.r * t.sin());
        let (mut lo, mut hi) = (0.0, std::f64::consts::FRAC_PI_2);
        for _ in 0..100 {
            let m = 0.5 * (lo + hi);
            if g(m) > 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        lo
    }

    /// `E₁` samples: both endpoints plus `n − 2` jittered interior angles.
    pub fn e1_samples(&self, n: usize, seed: u64) -> Vec<Complex64> {
        let th = self.arc_half_angle();
        let mut rng = trial_rng(seed, 0);
        let mut out = vec![Complex64::from_polar(self.r, -th), Complex64::from_polar(self.r, th)];
        let m = n.saturating_sub(2);
        for i in 0..m {
            let cell = (i as f64 + rng.gen::<f64>()) / m as f64;
            out.push(Complex64::from_polar(self.r, -th + 2.0 * th * cell));
        }
        out
    }

    /// `E₂` samples: points of `x = h(|y|)` with `|z| < r`.
    pub fn e2_samples(&self, n: usize) -> Vec<Complex64> {
        let y_end = self.r * self.arc_half_angle().sin();
        (0..n)
            .map(|i| {
                let y = -y_end + 2.0 * y_end * (i as f64 + 0.5) / n as f64;
                Complex64::new(self.profile.value(y.abs()), y)
            })
            .collect()
    }
}

impl<P: Profile + ?Sized> PlanarDomain for BarrierRegion<'_, P> {
    fn contains(&self, z: Complex64) -> bool {
        z.im.abs() < self.profile.upper() && z.re > self.profile.value(z.im.abs()) && z.norm() < self.r
    }

    fn boundary_distance(&self, z: Complex64) -> f64 {
        let th = self.arc_half_angle();
        let y_end = self.r * th.sin();
        let params: Vec<f64> = (0..2048).map(|i| y_end * (i as f64 / 2047.0).powi(2)).collect();
        let zz = Complex64::new(z.re, z.im.abs());
        let curve = sampled_curve_distance(|y| Complex64::new(self.profile.value(y), y), &params, zz);
        let arc = if zz.arg().abs() <= th {
            self.r - z.norm()
        } else {
            (zz - Complex64::from_polar(self.r, th)).norm()
        };
        curve.min(arc)
    }

    fn bounding_box(&self) -> BoundingBox {
        BoundingBox {
            x_min: 0.0,
            x_max: self.r,
            y_min: -self.r,
            y_max: self.r,
        }
    }
}

/// One scanned grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
    pub discrete_laplacian: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    /// Most negative five-point Laplacian (positive if none is negative).
    pub min_laplacian: f64,
    pub at: (f64, f64),
    pub interior_points: usize,
    /// `h²/12 · max(|∂⁴ₓφ| + |∂⁴ᵧφ|)` estimated by fourth differences.
    pub truncation_estimate: f64,
}

/// Five-point Laplacian of `φ` at every grid point of `D_B ∩ Δ_r` whose four
/// neighbours are also inside. The grid is anchored at the vertex.
pub fn phi_laplacian_grid<P: Profile + ?Sized>(profile: &P, r: f64, h: f64) -> Result<Vec<ScanPoint>> {
    let region = BarrierRegion::new(profile, r)?;
    if !(h > 0.0 && h < r / 10.0) {
        return Err(invalid("grid_h", "must be positive and below r/10"));
    }
    let n = (r / h).ceil() as i64 + 1;
    let rows: Vec<Vec<ScanPoint>> = (1..n)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 * h;
            let mut row = Vec::new();
            for j in -n..=n {
                let y = j as f64 * h;
                let at = |dx: i64, dy: i64| Complex64::new((i + dx) as f64 * h, (j + dy) as f64 * h);
                let stencil = [at(0, 0), at(1, 0), at(-1, 0), at(0, 1), at(0, -1)];
                if !stencil.iter().all(|&z| region.contains(z)) {
                    continue;
                }
                let v: Vec<f64> = stencil.iter().map(|&z| phi_unchecked(profile, z)).collect();
                let lap = (v[1] + v[2] + v[3] + v[4] - 4.0 * v[0]) / (h * h);
                row.push(ScanPoint {
                    x,
                    y,
                    phi: v[0],
                    discrete_laplacian: lap,
                });
            }
            row
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

pub fn phi_subharmonicity_scan<P: Profile + ?Sized>(
    profile: &P,
    region_radius: f64,
    grid_h: f64,
) -> Result<ScanReport> {
    let pts = phi_laplacian_grid(profile, region_radius, grid_h)?;
    if pts.len() < 1000 {
        return Err(invalid(
            "grid_h",
            format!("only {} interior points; refine the grid", pts.len()),
        ));
    }
    let mut best = &pts[0];
    for p in &pts {
        if p.discrete_laplacian < best.discrete_laplacian {
            best = p;
        }
    }
    let region = BarrierRegion::new(profile, region_radius)?;
    let fourth = pts
        .iter()
        .map(|p| {
            let h = grid_h;
            let f = |dx: f64, dy: f64| {
                let z = Complex64::new(p.x + dx * h, p.y + dy * h);
                region.contains(z).then(|| phi_unchecked(profile, z))
            };
            let d4 = |a: [Option<f64>; 5]| -> f64 {
                match a {
                    [Some(m2), Some(m1), Some(c), Some(p1), Some(p2)] => {
                        (m2 - 4.0 * m1 + 6.0 * c - 4.0 * p1 + p2).abs() / h.powi(4)
                    }
                    _ => 0.0,
                }
            };
            d4([f(-2.0, 0.0), f(-1.0, 0.0), Some(p.phi), f(1.0, 0.0), f(2.0, 0.0)])
                + d4([f(0.0, -2.0), f(0.0, -1.0), Some(p.phi), f(0.0, 1.0), f(0.0, 2.0)])
        })
        .fold(0.0, f64::max);
    Ok(ScanReport {
        min_laplacian: best.discrete_laplacian,
        at: (best.x, best.y),
        interior_points: pts.len(),
        truncation_estimate: grid_h * grid_h / 12.0 * fourth,
    })
}

/// `M = max φ(E₁) / min(−g(E₁))` from matched samples of `φ` and `g`.
pub fn barrier_bound_constant(phi_on_e1: &[f64], green_on_e1: &[f64]) -> Result<f64> {
    if phi_on_e1.is_empty() || green_on_e1.is_empty() {
        return Err(invalid("samples", "E1 samples must be nonempty"));
    }
    ensure_finite("phi_on_e1", phi_on_e1)?;
    ensure_finite("green_on_e1", green_on_e1)?;
    let mut min_neg = f64::INFINITY;
    for (i, &g) in green_on_e1.iter().enumerate() {
        if -g <= 0.0 {
            return Err(Error::SignViolation {
                index: i,
                value: g,
                reason: "Green function must be negative on E1",
            });
        }
        min_neg = min_neg.min(-g);
    }
    let max_phi = phi_on_e1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(max_phi / min_neg)
}

/// Barrier setup derived from an image-boundary fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub profile: HBProfile,
    pub conditions: ConditionFlags,
    #[serde(rename = "M")]
    pub m: f64,
    /// Radius `r` of `D_B ∩ Δ_r`.
    pub r: f64,
    /// Smallest `−g_D(z)·M/φ(z)` over checked interior points; the comparison
    /// `−g_D ≥ φ/M` holds when this is at least 1 up to the Green error.
    pub comparison_min_ratio: f64,
    pub comparison_points: usize,
}

/// Chooses `B = 1.5 A₂` and the crossing `u0` where the image profile `h`
/// first reaches `h_B`, scanning the wall parameter upward from `s_min`.
pub fn select_profile(params: crate::CuspParams, a2: f64, s_min: f64) -> Result<HBProfile> {
    use crate::conformal::{injectivity_radius, profile_quotient, wall_log_inv_y};
    let b = 1.5 * a2;
    let s_max = injectivity_radius(params);
    let n = 4000;
    let mut last_y = None;
    for i in 0..n {
        let s = s_min * (s_max / s_min).powf(i as f64 / (n - 1) as f64);
        let log_inv_y = wall_log_inv_y(params, s);
        if log_inv_y <= 0.0 {
            break;
        }
        if profile_quotient(params, s) >= b {
            break;
        }
        last_y = Some((-log_inv_y).exp());
    }
    let u0 = last_y.ok_or_else(|| invalid("B", "h exceeds h_B already at the smallest sample"))?;
    HBProfile::new(b, u0.min(0.99))
}

/// Runtime checks on `r`: `D_B ∩ Δ_r ⊂ D` (walls of `D_B` map back into the
/// cusp) and `|F(a)| ≥ r`.
pub fn check_radius(
    params: crate::CuspParams,
    cusp_radius: f64,
    profile: &HBProfile,
    r: f64,
    pole_image: Complex64,
) -> Result<()> {
    use crate::conformal::in_image;
    let region = BarrierRegion::new(profile, r)?;
    if pole_image.norm() < r {
        return Err(Error::CheckFailed {
            check: "pole outside the barrier disk",
            detail: format!("|F(a)| = {} < r = {r}", pole_image.norm()),
        });
    }
    for (i, w) in region
        .e2_samples(1000)
        .into_iter()
        .chain(region.e1_samples(200, 0))
        .enumerate()
    {
        // Nudge inward; E₁ endpoints and E₂ sit on the closure.
        let w = w + Complex64::new(1e-12 * r, 0.0);
        if w.im.abs() > 0.0 && !in_image(params, cusp_radius, w) {
            return Err(Error::CheckFailed {
                check: "barrier region inside the image domain",
                detail: format!("sample {i} at ({}, {}) is not in D", w.re, w.im),
            });
        }
    }
    Ok(())
}

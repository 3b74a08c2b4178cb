//! Cusp geometry: membership, boundary distance, axis-distance bounds and
//! parameter extraction from Hölder data.
//!
//! Planar cusps are normalised to vertex 0 and axis +x, so that
//! `Γ ∩ Δ_R = {x > C|y|^α, |z| < R}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::sampling::{golden_section, sweep_and_refine};

/// Aperture constant `C` and exponent `α` of a cusp `{x > C|y|^α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct CuspParams {
    #[serde(rename = "C")]
    c: f64,
    alpha: f64,
}

#[derive(Deserialize)]
struct RawParams {
    #[serde(rename = "C")]
    c: f64,
    alpha: f64,
}

impl TryFrom<RawParams> for CuspParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        CuspParams::new(r.c, r.alpha)
    }
}

impl CuspParams {
    pub fn new(c: f64, alpha: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid("C", format!("must be a finite positive real, got {c}")));
        }
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(
                "alpha",
                format!("must lie in the open interval (0,1), got {alpha}"),
            ));
        }
        Ok(Self { c, alpha })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The exponent `1/α − 1` that appears throughout.
    pub fn k(&self) -> f64 {
        1.0 / self.alpha - 1.0
    }

    /// `C^{-1/α}`, the largest |c| for which `γ_c` stays in the closed cusp.
    pub fn c_max(&self) -> f64 {
        self.c.powf(-1.0 / self.alpha)
    }

    /// Half-width `(x/C)^{1/α}` of the cusp at abscissa `x ≥ 0`.
    pub fn half_width(&self, x: f64) -> f64 {
        (x / self.c).powf(1.0 / self.alpha)
    }

    /// Whether `z` lies in the open (untruncated) planar cusp.
    pub fn in_cusp(&self, z: Complex64) -> bool {
        z.re > self.c * z.im.abs().powf(self.alpha)
    }
}

/// A cusp in ℝ^{2n} with vertex, unit axis and truncation radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspFrame {
    pub vertex: Vec<f64>,
    pub axis: Vec<f64>,
    #[serde(flatten)]
    pub params: CuspParams,
    pub radius: f64,
}

impl CuspFrame {
    pub fn new(vertex: Vec<f64>, axis: Vec<f64>, params: CuspParams, radius: f64) -> Result<Self> {
        let frame = Self {
            vertex,
            axis,
            params,
            radius,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.vertex.len();
        if d == 0 || !d.is_multiple_of(2) {
            return Err(invalid(
                "vertex",
                format!("dimension must be even and positive, got {d}"),
            ));
        }
        if self.axis.len() != d {
            return Err(invalid("axis", "dimension differs from vertex"));
        }
        ensure_finite("vertex", &self.vertex)?;
        ensure_finite("axis", &self.axis)?;
        let norm = self.axis.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(invalid("axis", format!("must be a unit vector, |axis| = {norm}")));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(invalid("radius", "must be a finite positive real"));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.vertex.len()
    }
}

/// Membership in `Γ(p, v, C, α) ∩ B_r(p)`.
///
/// The pairing is the real part of the Hermitian product, which is the
/// Euclidean dot product on ℝ^{2n}; `π_v` projects onto the real hyperplane
/// `∂H_v`.
pub fn cusp_contains(frame: &CuspFrame, z: &[f64]) -> Result<bool> {
    frame.validate()?;
    if z.len() != frame.dimension() {
        return Err(invalid("z", "dimension differs from the frame"));
    }
    ensure_finite("z", z)?;
    let w: Vec<f64> = z.iter().zip(&frame.vertex).map(|(a, b)| a - b).collect();
    let along: f64 = w.iter().zip(&frame.axis).map(|(a, b)| a * b).sum();
    let perp2: f64 = w.iter().zip(&frame.axis).map(|(a, v)| (a - along * v).powi(2)).sum();
    let dist2: f64 = w.iter().map(|a| a * a).sum();
    let p = frame.params;
    Ok(along > p.c * perp2.sqrt().powf(p.alpha) && dist2.sqrt() < frame.radius)
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.x_min && z.re <= self.x_max && z.im >= self.y_min && z.im <= self.y_max
    }

    pub fn diameter(&self) -> f64 {
        (self.x_max - self.x_min).hypot(self.y_max - self.y_min)
    }
}

/// Uniform interface to a bounded planar domain.
pub trait PlanarDomain: Sync {
    /// Open-set membership.
    fn contains(&self, z: Complex64) -> bool;
    /// Euclidean distance to the boundary, meaningful for interior points.
    fn boundary_distance(&self, z: Complex64) -> f64;
    fn bounding_box(&self) -> BoundingBox;

    /// A lower bound on the boundary distance, cheap enough for Monte-Carlo
    /// stepping. Defaults to the exact distance.
    fn step_distance(&self, z: Complex64) -> f64 {
        self.boundary_distance(z)
    }

    /// Closest boundary point, when cheaply known.
    fn nearest_boundary_point(&self, _z: Complex64) -> Option<Complex64> {
        None
    }
}

fn radial_projection(center: Complex64, radius: f64, z: Complex64) -> Option<Complex64> {
    let d = z - center;
    let r = d.norm();
    (r > 0.0).then(|| center + d * (radius / r))
}

#[derive(Debug, Clone, Copy)]
pub struct Disk {
    pub center: Complex64,
    pub radius: f64,
}

impl PlanarDomain for Disk {
    fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() < self.radius
    }
    fn boundary_distance(&self, z: Complex64) -> f64 {
        (self.radius - (z - self.center).norm()).abs()
    }
    fn nearest_boundary_point(&self, z: Complex64) -> Option<Complex64> {
        radial_projection(self.center, self.radius, z)
    }
    fn bounding_box(&self) -> BoundingBox {
        BoundingBox {
            x_min: self.center.re - self.radius,
            x_max: self.center.re + self.radius,
            y_min: self.center.im - self.radius,
            y_max: self.center.im + self.radius,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Annulus {
    pub center: Complex64,
    pub inner: f64,
    pub outer: f64,
}

impl PlanarDomain for Annulus {
    fn contains(&self, z: Complex64) -> bool {
        let r = (z - self.center).norm();
        r > self.inner && r < self.outer
    }
    fn boundary_distance(&self, z: Complex64) -> f64 {
        let r = (z - self.center).norm();
        (r - self.inner).abs().min((self.outer - r).abs())
    }
    fn nearest_boundary_point(&self, z: Complex64) -> Option<Complex64> {
        let r = (z - self.center).norm();
        let target = if (r - self.inner).abs() < (self.outer - r).abs() {
            self.inner
        } else {
            self.outer
        };
        radial_projection(self.center, target, z)
    }
    fn bounding_box(&self) -> BoundingBox {
        Disk {
            center: self.center,
            radius: self.outer,
        }
        .bounding_box()
    }
}

/// The truncated planar cusp `Γ ∩ Δ_R` with vertex 0 and axis +x.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedCusp {
    pub params: CuspParams,
    pub radius: f64,
    s_max: f64,
}

impl TruncatedCusp {
    pub fn new(params: CuspParams, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid("R", "must be a finite positive real"));
        }
        Ok(Self {
            params,
            radius,
            s_max: wall_arc_meeting(params, radius),
        })
    }

    /// Abscissa where the cusp walls meet the circle `|z| = R`.
    pub fn wall_end(&self) -> f64 {
        self.s_max
    }

    /// Half-opening angle of the boundary arc.
    pub fn arc_half_angle(&self) -> f64 {
        self.params.half_width(self.s_max).atan2(self.s_max)
    }

    fn arc_distance(&self, z: Complex64) -> f64 {
        let theta_end = self.arc_half_angle();
        if z.arg().abs() <= theta_end {
            (self.radius - z.norm()).abs()
        } else {
            let end = Complex64::from_polar(self.radius, theta_end);
            let zc = Complex64::new(z.re, z.im.abs());
            (zc - end).norm()
        }
    }

    /// Cheap distance to the walls for Monte-Carlo stepping.
    ///
    /// Searches only the window of abscissae that can host the nearest wall
    /// point, so the cost is a few dozen evaluations.
    pub fn fast_boundary_distance(&self, z: Complex64) -> f64 {
        let p = self.params;
        let y = z.im.abs();
        let arc = self.arc_distance(z);
        let wall = |s: f64| (s - z.re).hypot(p.half_width(s) - y);
        let x0 = z.re.clamp(0.0, self.s_max);
        let bound = wall(x0).min(arc);
        let lo = (z.re - bound).max(0.0);
        let hi = (z.re + bound).min(self.s_max);
        let mut best = bound;
        if hi > lo {
            let n = 24;
            let mut best_i: usize = 0;
            let mut best_v = f64::INFINITY;
            for i in 0..=n {
                let s = lo + (hi - lo) * i as f64 / n as f64;
                let v = wall(s);
                if v < best_v {
                    best_v = v;
                    best_i = i;
                }
            }
            let step = (hi - lo) / n as f64;
            let a = lo + step * best_i.saturating_sub(1) as f64;
            let b = (lo + step * (best_i + 1) as f64).min(hi);
            let (_, v) = golden_section(wall, a, b, 1e-6 * step.max(1e-300));
            best = best.min(v).min(best_v);
        }
        best
    }
}

fn wall_arc_meeting(params: CuspParams, radius: f64) -> f64 {
    // s² + (s/C)^{2/α} is increasing in s; bisect for R².
    let f = |s: f64| s * s + params.half_width(s).powi(2) - radius * radius;
    let (mut lo, mut hi) = (0.0, radius);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

impl PlanarDomain for TruncatedCusp {
    fn contains(&self, z: Complex64) -> bool {
        self.params.in_cusp(z) && z.norm() < self.radius
    }
    fn boundary_distance(&self, z: Complex64) -> f64 {
        cusp_distance(self, z)
    }
    fn step_distance(&self, z: Complex64) -> f64 {
        // The refined minimum can sit a hair above the true one.
        (1.0 - 1e-6) * self.fast_boundary_distance(z)
    }
    fn bounding_box(&self) -> BoundingBox {
        let w = self.radius.min(self.params.half_width(self.radius));
        BoundingBox {
            x_min: 0.0,
            x_max: self.radius,
            y_min: -w,
            y_max: w,
        }
    }
}

/// Samples per boundary curve in the dense sweep.
pub const BOUNDARY_SAMPLES: usize = 4096;

fn cusp_distance(dom: &TruncatedCusp, z: Complex64) -> f64 {
    let p = dom.params;
    let y = z.im.abs();
    let wall = |s: f64| (s - z.re).hypot(p.half_width(s) - y);
    // Quadratic spacing concentrates samples at the vertex.
    let n = BOUNDARY_SAMPLES;
    let params: Vec<f64> = (0..n)
        .map(|i| {
            let u = i as f64 / (n - 1) as f64;
            dom.s_max * u * u
        })
        .collect();
    let coarse = params.iter().map(|&s| wall(s)).fold(f64::INFINITY, f64::min);
    let tol = (1e-8f64).min(1e-7 * coarse).max(1e-300);
    let d = sweep_and_refine(&wall, &params, 3, tol);
    d.min(dom.arc_distance(z))
}

/// Distance from `z ∈ Γ ∩ Δ_R` to the boundary of `Γ ∩ Δ_R`.
///
/// Dense sampling of the wall `(s, (s/C)^{1/α})` followed by golden-section
/// refinement of the three best brackets; the arc contributes `R − |z|`
/// when `z` lies in its angular range.
pub fn boundary_distance_planar(params: CuspParams, radius: f64, z: Complex64) -> Result<f64> {
    ensure_finite("z", &[z.re, z.im])?;
    let dom = TruncatedCusp::new(params, radius)?;
    if !dom.contains(z) {
        return Err(Error::OutsideDomain {
            x: z.re,
            y: z.im,
            reason: "not inside the truncated cusp".into(),
        });
    }
    Ok(cusp_distance(&dom, z))
}

/// Two-sided bound on `δ_Γ(p + t v)` for axis points.
///
/// The upper bound `C^{-1/α} t^{1/α}` holds for every `t`; the lower constant
/// `min{1/2, (2C)^{-1/α}}` is the one from the small-`t` argument, so `t` is
/// restricted to `(0, 1]`.
pub fn axis_distance_bounds(params: CuspParams, t: f64) -> Result<(f64, f64)> {
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid("t", format!("must be positive, got {t}")));
    }
    if t > 1.0 {
        return Err(invalid("t", format!("must satisfy t <= 1, got {t}")));
    }
    let inv = 1.0 / params.alpha;
    let tp = t.powf(inv);
    let b = (0.5f64).min((2.0 * params.c).powf(-inv));
    Ok((b * tp, params.c.powf(-inv) * tp))
}

/// Cusp parameters covering a family of Hölder pieces: `(max C_j, min α_j)`.
pub fn holder_to_cusp(pieces: &[(f64, f64)]) -> Result<CuspParams> {
    if pieces.is_empty() {
        return Err(invalid("pieces", "at least one (C, alpha) pair is required"));
    }
    for &(c, a) in pieces {
        CuspParams::new(c, a)?;
    }
    let c = pieces.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let alpha = pieces.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    CuspParams::new(c, alpha)
}

/// Distance from `z` to a parametrised curve, by sweep over `params` and
/// golden-section refinement of the best brackets.
pub fn sampled_curve_distance<F: Fn(f64) -> Complex64>(curve: F, params: &[f64], z: Complex64) -> f64 {
    let d = |s: f64| (curve(s) - z).norm();
    sweep_and_refine(&d, params, 3, 1e-12 * (params[params.len() - 1] - params[0]).abs())
}

/// Whether `z` is "close to the boundary" of `dom` for the purpose of the
/// cusp condition; the threshold is supplied by the caller.
pub fn within_boundary_band<D: PlanarDomain + ?Sized>(dom: &D, z: Complex64, threshold: f64) -> bool {
    dom.contains(z) && dom.boundary_distance(z) < threshold
}

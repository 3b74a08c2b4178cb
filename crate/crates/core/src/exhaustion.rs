//! Envelope functions, the recursion `α_{ν+1} = ψ⁻¹(φ(α_ν)/2)`, the convex
//! function `τ`, the counter `λ(t)`, and a planar model of the patching and
//! decay argument for the relative extremal function.
//!
//! With `ψ(t) = −C₁(−log(−t))^{−β}` and `φ(t) = −C₂ exp(−A/(−t)^k)`,
//! `k = 1/α − 1`, the recursion grows `log(1/|α_ν|)` at least doubly
//! exponentially, so `α_ν` is carried as `ℓ_ν = ln(−α_ν)`.
//!
//! The patch simulation is a model, not a proof: plurisubharmonicity is
//! replaced by planar subharmonicity on a disk whose boundary band is
//! sampled in `(angle, log δ)` coordinates.

use std::f64::consts::{LN_2, PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExhaustionParams {
    #[serde(rename = "C1")]
    c1: f64,
    beta: f64,
    #[serde(rename = "C2")]
    c2: f64,
    #[serde(rename = "A")]
    a: f64,
    alpha: f64,
    alpha1: f64,
}

/// Points in the `ψ ≤ φ` scan.
const SCAN_POINTS: usize = 1000;
/// `log(1/|t|)` up to which `ψ ≤ φ` is scanned (`|t|` down to `e^{−700}`).
const SCAN_DEPTH: f64 = 700.0;

impl ExhaustionParams {
    /// Validates ranges and scans `ψ ≤ φ` over `log(1/|t|) ∈ [log(1/|α₁|), 700]`.
    pub fn new(c1: f64, beta: f64, c2: f64, a: f64, alpha: f64, alpha1: f64) -> Result<Self> {
        ensure_finite("exhaustion params", &[c1, beta, c2, a, alpha, alpha1])?;
        for (name, v) in [("C1", c1), ("beta", beta), ("C2", c2), ("A", a)] {
            if !(v > 0.0) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid("alpha", format!("must lie in (0,1), got {alpha}")));
        }
        if !(alpha1 > -1.0 && alpha1 < 0.0) {
            return Err(invalid("alpha1", format!("must lie in (-1,0), got {alpha1}")));
        }
        let p = Self {
            c1,
            beta,
            c2,
            a,
            alpha,
            alpha1,
        };
        let l0 = -(-alpha1).ln();
        if l0 < SCAN_DEPTH {
            for i in 0..SCAN_POINTS {
                let big_l = l0 + (SCAN_DEPTH - l0) * i as f64 / (SCAN_POINTS - 1) as f64;
                let ell = -big_l;
                if p.log_neg_phi(ell) > p.log_neg_psi(ell) + 1e-12 {
                    return Err(invalid(
                        "C2",
                        format!("psi > phi at t = -exp({ell}); the envelopes are out of order"),
                    ));
                }
            }
        }
        Ok(p)
    }

    /// `C₁ = C₂ = 1, β = 1, A = π/2, α = 1/2, α₁ = −0.01`.
    pub fn reference() -> Self {
        Self::new(1.0, 1.0, 1.0, PI / 2.0, 0.5, -0.01).expect("reference constants are valid")
    }

    /// Constants whose sequence stays representable for twelve terms, used
    /// by the patch simulation: `C₁ = 1, β = 10, C₂ = e^{−21.75}, A = 5,
    /// k = 0.03, α₁ = −e^{−11}`. `log(1/|α₁|) = β + 1` is where `ψ(−δ)`
    /// becomes radially subharmonic.
    pub fn simulation_preset() -> Self {
        Self::new(1.0, 10.0, (-21.75f64).exp(), 5.0, 1.0 / 1.03, -(-11.0f64).exp()).expect("preset constants are valid")
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn c2(&self) -> f64 {
        self.c2
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }
    pub fn k(&self) -> f64 {
        1.0 / self.alpha - 1.0
    }

    /// `ln(−ψ(t))` for `t = −e^ℓ`, `ℓ < 0`.
    pub fn log_neg_psi(&self, ell: f64) -> f64 {
        self.c1.ln() - self.beta * (-ell).ln()
    }

    /// `ln(−φ(t))` for `t = −e^ℓ`.
    pub fn log_neg_phi(&self, ell: f64) -> f64 {
        self.c2.ln() - self.a * (-self.k() * ell).exp()
    }

    /// `ψ(−e^ℓ)`.
    pub fn psi_log(&self, ell: f64) -> f64 {
        -self.c1 * (-ell).powf(-self.beta)
    }

    /// `φ(−e^ℓ)`.
    pub fn phi_log(&self, ell: f64) -> f64 {
        -self.log_neg_phi(ell).exp()
    }

    /// `ln(−ψ⁻¹(y))` from `m = ln(−y)`.
    pub fn log_neg_psi_inverse(&self, m: f64) -> f64 {
        -((self.c1.ln() - m) / self.beta).exp()
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t > -1.0 && t < 0.0) {
        return Err(invalid("t", format!("must lie in (-1, 0), got {t}")));
    }
    Ok(())
}

/// `(ψ(t), φ(t))` for `−1 < t < 0`.
pub fn envelope_eval(params: &ExhaustionParams, t: f64) -> Result<(f64, f64)> {
    check_t(t)?;
    let ell = (-t).ln();
    Ok((params.psi_log(ell), params.phi_log(ell)))
}

/// `ψ⁻¹(y) = −exp(−(C₁/(−y))^{1/β})` for `y < 0`.
pub fn psi_inverse(params: &ExhaustionParams, y: f64) -> Result<f64> {
    if !(y < 0.0 && y.is_finite()) {
        return Err(invalid("y", format!("must be negative, got {y}")));
    }
    Ok(-params.log_neg_psi_inverse((-y).ln()).exp())
}

/// `ℓ_ν = ln(−α_ν)` for `ν = 1..=n`.
pub fn alpha_sequence_log(params: &ExhaustionParams, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(invalid("N", "must be at least 2"));
    }
    let mut ls = vec![(-params.alpha1).ln()];
    while ls.len() < n {
        let ell = *ls.last().expect("seeded");
        let m = params.log_neg_phi(ell) - LN_2;
        let next = params.log_neg_psi_inverse(m);
        let index = ls.len() + 1;
        if !next.is_finite() || !m.is_finite() {
            return Err(Error::SequenceRange {
                index,
                reason: "log(1/|alpha|) overflows f64".into(),
            });
        }
        if !(next < ell) {
            return Err(Error::SequenceRange {
                index,
                reason: format!("alpha does not increase (ln(-alpha) {next} after {ell})"),
            });
        }
        ls.push(next);
    }
    Ok(ls)
}

/// The longest sequence (up to `cap`) that stays representable.
pub fn alpha_sequence_log_max(params: &ExhaustionParams, cap: usize) -> Vec<f64> {
    let mut n = 2;
    let mut best = alpha_sequence_log(params, 2).unwrap_or_else(|_| vec![(-params.alpha1).ln()]);
    while n < cap {
        match alpha_sequence_log(params, n + 1) {
            Ok(v) => {
                best = v;
                n += 1;
            }
            Err(_) => break,
        }
    }
    best
}

/// `α_ν` as `f64`; fails if a term underflows to 0.
pub fn alpha_sequence(params: &ExhaustionParams, n: usize) -> Result<Vec<f64>> {
    let ls = alpha_sequence_log(params, n)?;
    ls.iter()
        .enumerate()
        .map(|(i, &l)| {
            let v = -l.exp();
            if v == 0.0 {
                Err(Error::SequenceRange {
                    index: i + 1,
                    reason: format!("alpha = -exp({l:e}) underflows; use the log form"),
                })
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// `a_ν = φ(α_ν)` (odd `ν`), `ψ(α_ν)` (even `ν`), with the halving and
/// growth identities checked.
pub fn a_sequence(params: &ExhaustionParams, log_alphas: &[f64]) -> Result<Vec<f64>> {
    let a: Vec<f64> = log_alphas
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if i % 2 == 0 {
                params.phi_log(l)
            } else {
                params.psi_log(l)
            }
        })
        .collect();
    for (i, &v) in a.iter().enumerate() {
        if !(v < 0.0) {
            return Err(Error::SequenceRange {
                index: i + 1,
                reason: format!("a = {v:e} is not negative"),
            });
        }
    }
    for nu in 1..=a.len() / 2 {
        let (odd, even) = (a[2 * nu - 2], a[2 * nu - 1]);
        if ((even - odd / 2.0) / (odd / 2.0)).abs() > 1e-12 {
            return Err(Error::CheckFailed {
                check: "halving",
                detail: format!("a_{} = {even:e} vs a_{}/2 = {:e}", 2 * nu, 2 * nu - 1, odd / 2.0),
            });
        }
        if 2 * nu < a.len() {
            let next = a[2 * nu];
            if next < even / 2.0 - 1e-15 * even.abs() {
                return Err(Error::CheckFailed {
                    check: "growth",
                    detail: format!("a_{} = {next:e} < a_{}/2", 2 * nu + 1, 2 * nu),
                });
            }
        }
    }
    if let Some(i) = a.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::CheckFailed {
            check: "increasing",
            detail: format!("a_{} >= a_{}", i + 1, i + 2),
        });
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceTable {
    /// `ln(−α_ν)`.
    pub log_neg_alphas: Vec<f64>,
    pub a_values: Vec<f64>,
    /// `τ(a_ν)`.
    pub tau_at_a: Vec<f64>,
}

impl SequenceTable {
    pub fn build(params: &ExhaustionParams, n: usize) -> Result<Self> {
        Self::from_log_alphas(params, alpha_sequence_log(params, n)?)
    }

    pub fn from_log_alphas(params: &ExhaustionParams, log_neg_alphas: Vec<f64>) -> Result<Self> {
        let a_values = a_sequence(params, &log_neg_alphas)?;
        let mut tau_at_a = vec![0.0];
        for w in a_values.windows(2) {
            let last = *tau_at_a.last().expect("seeded");
            tau_at_a.push(last + 1.0 - w[1] / w[0]);
        }
        Ok(Self {
            log_neg_alphas,
            a_values,
            tau_at_a,
        })
    }

    pub fn len(&self) -> usize {
        self.a_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_values.is_empty()
    }

    /// `α_ν` as `f64` (may round to `−0.0` for extreme terms).
    pub fn alphas(&self) -> Vec<f64> {
        self.log_neg_alphas.iter().map(|l| -l.exp()).collect()
    }

    pub fn tau_breaks(&self) -> Vec<(f64, f64)> {
        self.a_values
            .iter()
            .copied()
            .zip(self.tau_at_a.iter().copied())
            .collect()
    }

    /// `c₀ = max_ν (ν/2 − τ(a_ν))`.
    pub fn c0(&self) -> f64 {
        self.tau_at_a
            .iter()
            .enumerate()
            .map(|(i, t)| (i + 1) as f64 / 2.0 - t)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("nu,alpha_nu,a_nu,tau_a_nu\n");
        for i in 0..self.len() {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{}",
                i + 1,
                -self.log_neg_alphas[i].exp(),
                self.a_values[i],
                self.tau_at_a[i]
            );
        }
        s
    }
}

/// `τ(x)`: 0 for `x ≤ a₁`, linear on each `[a_ν, a_{ν+1}]`.
pub fn tau_eval(table: &SequenceTable, x: f64) -> Result<f64> {
    if !(x < 0.0) {
        return Err(invalid("x", format!("must be negative, got {x}")));
    }
    let a = &table.a_values;
    if x <= a[0] {
        return Ok(0.0);
    }
    let last = *a.last().expect("nonempty table");
    if x > last {
        return Err(Error::BeyondTable { value: x, last });
    }
    // Segment ν: a_ν ≤ x ≤ a_{ν+1}.
    let i = a.partition_point(|&v| v <= x).saturating_sub(1).min(a.len() - 2);
    Ok(table.tau_at_a[i] + 1.0 - x / a[i])
}

/// `λ(t) = max{ν : α_ν ≤ −t}` within the table.
pub fn lambda_of(table: &SequenceTable, t: f64) -> Result<usize> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", format!("must be positive, got {t}")));
    }
    let lt = t.ln();
    let ls = &table.log_neg_alphas;
    if ls[0] < lt {
        return Err(invalid("t", format!("exceeds -alpha_1 = {:e}", ls[0].exp())));
    }
    // ℓ_ν decreases; count the leading run with ℓ_ν ≥ ln t.
    Ok(ls.partition_point(|&l| l >= lt))
}

/// `max(−1, log(|z|/R₂)/log(R₂/R₁))`, the relative extremal function of the
/// disk `Δ_{R₂}` with respect to the closed disk of radius `R₁`.
pub fn relative_extremal_annulus(r1: f64, r2: f64, z: Complex64) -> Result<f64> {
    if !(r1 > 0.0 && r2 > r1) {
        return Err(invalid("R2", format!("need 0 < R1 < R2 (R1 = {r1}, R2 = {r2})")));
    }
    let r = z.norm();
    if !(r < r2) {
        return Err(Error::OutsideDomain {
            x: z.re,
            y: z.im,
            reason: "|z| must be below R2".into(),
        });
    }
    Ok(((r / r2).ln() / (r2 / r1).ln()).max(-1.0))
}

/// The same function at boundary distance `δ = R₂ − |z|`, accurate for tiny `δ`.
pub fn relative_extremal_annulus_delta(r1: f64, r2: f64, delta: f64) -> Result<f64> {
    if !(r1 > 0.0 && r2 > r1) {
        return Err(invalid("R2", format!("need 0 < R1 < R2 (R1 = {r1}, R2 = {r2})")));
    }
    if !(delta > 0.0 && delta <= r2) {
        return Err(invalid("delta", "must lie in (0, R2]"));
    }
    Ok(((-delta / r2).ln_1p() / (r2 / r1).ln()).max(-1.0))
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

/// Angular sector of the boundary covering, with its plateau, ramp and the
/// mix `ρ_j = θψ(−δ) + (1 − θ)φ(−δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub center: f64,
    /// `χ_j = 1` within this angular half-width.
    pub core: f64,
    /// `χ_j` falls to 0 over this angle.
    pub ramp: f64,
    /// `U_j` extends this far beyond the ramp.
    pub pad: f64,
    pub theta: f64,
}

impl Sector {
    fn distance(&self, phi: f64) -> f64 {
        let d = (phi - self.center).rem_euclid(TAU);
        d.min(TAU - d)
    }

    fn contains(&self, phi: f64) -> bool {
        self.distance(phi) < self.core + self.ramp + self.pad
    }

    fn chi(&self, phi: f64) -> f64 {
        1.0 - smoothstep((self.distance(phi) - self.core) / self.ramp)
    }
}

/// The disk `|z| < radius` near its boundary, sampled at `angles` angles
/// and `levels` log-spaced depths plus every tabulated `|α_ν|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchModel {
    pub radius: f64,
    pub sectors: Vec<Sector>,
    pub angles: usize,
    pub levels: usize,
    /// Closed disk `B̄` of the relative extremal function, as a fraction of `radius`.
    pub inner_fraction: f64,
}

impl Default for PatchModel {
    fn default() -> Self {
        let core = PI / 3.0;
        let sectors = [1.0, 0.8, 0.6]
            .iter()
            .enumerate()
            .map(|(j, &theta)| Sector {
                center: TAU * j as f64 / 3.0,
                core,
                ramp: 1.0,
                pad: 0.2,
                theta,
            })
            .collect();
        Self {
            radius: 10.0,
            sectors,
            angles: 120,
            levels: 300,
            inner_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PatchConfig {
    pub model: PatchModel,
    /// Stride `l`; the smallest admissible one when absent.
    pub l: Option<usize>,
    /// Sequence terms to tabulate; the longest representable when absent.
    pub table_len: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchReport {
    pub table: SequenceTable,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub l: usize,
    pub epsilon0: f64,
    /// `N` in `N(|z|² − M)`.
    pub n_coefficient: f64,
    /// `M`.
    pub m_constant: f64,
    /// `M_ν` for `ν = 1..`.
    #[serde(rename = "M_series")]
    pub m_series: Vec<f64>,
    /// `κ_ν` for `ν = 1..`.
    pub kappa: Vec<f64>,
    pub overlap_max: f64,
    /// Most negative `δ²Δ_h u_ε / scale` over single-branch stencils.
    pub laplacian_min: f64,
    pub laplacian_points: usize,
    pub final_bound_k: f64,
    /// Worst `−ϱ/(K e^{−ε₀λ(δ)})` over the samples.
    pub final_bound_ratio: f64,
    pub checks: PatchChecks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchChecks {
    pub overlap: bool,
    pub sandwich: bool,
    pub kappa: bool,
    pub decay: bool,
    pub subharmonic: bool,
    pub final_bound: bool,
}

impl PatchChecks {
    pub fn all(&self) -> bool {
        self.overlap && self.sandwich && self.kappa && self.decay && self.subharmonic && self.final_bound
    }
}

/// A sample point `(φ, ℓ = ln δ)`.
#[derive(Debug, Clone, Copy)]
struct Node {
    phi: f64,
    ell: f64,
}

struct Sim<'a> {
    p: &'a ExhaustionParams,
    m: &'a PatchModel,
    table: &'a SequenceTable,
    n_coef: f64,
    m_const: f64,
}

impl Sim<'_> {
    fn rho(&self, s: &Sector, ell: f64) -> f64 {
        s.theta * self.p.psi_log(ell) + (1.0 - s.theta) * self.p.phi_log(ell)
    }

    /// `N(|z|² − M)` with `|z| = R − δ`.
    fn quadratic(&self, ell: f64) -> f64 {
        let d = ell.exp();
        let r = self.m.radius;
        self.n_coef * (r * r - self.m_const - 2.0 * r * d + d * d)
    }

    /// Branches `u_{j,ε}` containing the node (sector index) plus the
    /// background `τ(a) + N(|z|² − M)` (index `usize::MAX`), with `τ(a) = 0`.
    fn branches(&self, node: Node, eps: f64) -> Result<Vec<(usize, f64)>> {
        let q = self.quadratic(node.ell);
        let mut out = vec![(usize::MAX, q)];
        for (j, s) in self.m.sectors.iter().enumerate() {
            if s.contains(node.phi) {
                let t = tau_eval(self.table, self.rho(s, node.ell) - eps)?;
                out.push((j, t + 3.0 * s.chi(node.phi) - 3.0 + q));
            }
        }
        Ok(out)
    }

    fn u(&self, node: Node, eps: f64) -> Result<(usize, f64)> {
        let b = self.branches(node, eps)?;
        Ok(b.into_iter().fold(
            (usize::MAX, f64::NEG_INFINITY),
            |acc, x| if x.1 > acc.1 { x } else { acc },
        ))
    }

    /// `τ(ψ(−δ) − ε)`.
    fn reference(&self, ell: f64, eps: f64) -> Result<f64> {
        tau_eval(self.table, self.p.psi_log(ell) - eps)
    }

    /// `δ² Δ_h u_{j,ε}` on a polar stencil of relative radial step `1e-2`,
    /// with the quadratic term's exact Laplacian `4N`; and the sum of the
    /// stencil magnitudes. The total is credited with the rounding floor.
    fn scaled_laplacian(&self, j: usize, node: Node, eps: f64, hphi: f64) -> Result<(f64, f64)> {
        let d = node.ell.exp();
        let r = self.m.radius - d;
        let s = &self.m.sectors[j];
        let hrel = 1e-2;
        let tau_at = |ell: f64| tau_eval(self.table, self.rho(s, ell) - eps);
        let tp = tau_at((d * (1.0 + hrel)).ln())?;
        let t0 = tau_at(node.ell)?;
        let tm = tau_at((d * (1.0 - hrel)).ln())?;
        let radial = (tp - 2.0 * t0 + tm) / (hrel * hrel);
        // −u_δ/r, times δ².
        let first = -(tp - tm) / (2.0 * hrel) * d / r;
        let c0 = 3.0 * s.chi(node.phi);
        let cp = 3.0 * s.chi(node.phi + hphi);
        let cm = 3.0 * s.chi(node.phi - hphi);
        let angular = d * d / (r * r) * (cp - 2.0 * c0 + cm) / (hphi * hphi);
        let quad = 4.0 * self.n_coef * d * d;
        // Rounding in the differences, which dominates once τ barely moves.
        let floor = 8.0 * f64::EPSILON * (tp.abs() + 2.0 * t0.abs() + tm.abs()) / (hrel * hrel)
            + 8.0 * f64::EPSILON * (c0.abs() + 1.0) * d * d / (r * r * hphi * hphi);
        let total = radial + first + angular + quad + floor;
        let scale = radial.abs() + first.abs() + angular.abs() + quad.abs() + floor;
        Ok((total, scale))
    }
}

/// Runs the patching and decay model on the boundary band
/// `{δ ≤ |α₁|}` of `model`'s disk.
pub fn patch_decay_sim(params: &ExhaustionParams, cfg: &PatchConfig) -> Result<PatchReport> {
    let m = &cfg.model;
    if m.sectors.is_empty() || m.angles < 8 || m.levels < 8 {
        return Err(invalid("model", "needs sectors, >= 8 angles and >= 8 levels"));
    }
    if !(m.radius > 0.0 && m.inner_fraction > 0.0 && m.inner_fraction < 1.0) {
        return Err(invalid("model", "radius must be positive and inner_fraction in (0,1)"));
    }
    for s in &m.sectors {
        if !(0.0..=1.0).contains(&s.theta) || !(s.ramp > 0.0) || !(s.core >= 0.0) || !(s.pad >= 0.0) {
            return Err(invalid(
                "covering",
                "sector with theta outside [0,1] or nonpositive ramp",
            ));
        }
    }
    // Cores must cover the circle.
    for i in 0..360 {
        let phi = TAU * i as f64 / 360.0;
        if !m.sectors.iter().any(|s| s.distance(phi) <= s.core) {
            return Err(invalid("covering", format!("angle {phi} is in no sector core")));
        }
    }
    let log_alphas = match cfg.table_len {
        Some(n) => alpha_sequence_log(params, n)?,
        None => alpha_sequence_log_max(params, 64),
    };
    let table = SequenceTable::from_log_alphas(params, log_alphas)?;
    let n_tab = table.len();
    if n_tab < 6 {
        return Err(Error::SequenceRange {
            index: n_tab + 1,
            reason: "table too short for the patch model".into(),
        });
    }
    let big_l: Vec<f64> = table.log_neg_alphas.iter().map(|l| -l).collect();
    let (l_first, l_last) = (big_l[0], big_l[n_tab - 1]);

    // Samples: log-spaced in log(1/δ), plus every tabulated level.
    let mut levels: Vec<f64> = (0..m.levels)
        .map(|i| -(l_first * (l_last / l_first).powf(i as f64 / (m.levels - 1) as f64)))
        .collect();
    levels.extend(table.log_neg_alphas.iter().copied());
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    let hphi = TAU / m.angles as f64;
    let phis: Vec<f64> = (0..m.angles).map(|i| i as f64 * hphi).collect();
    let nodes: Vec<Node> = levels
        .iter()
        .flat_map(|&ell| phis.iter().map(move |&phi| Node { phi, ell }))
        .collect();

    // Input sandwich ψ(−δ) ≤ ρ_j ≤ φ(−δ).
    for node in &nodes {
        let (lo, hi) = (params.psi_log(node.ell), params.phi_log(node.ell));
        for s in m.sectors.iter().filter(|s| s.contains(node.phi)) {
            let r = s.theta * lo + (1.0 - s.theta) * hi;
            if r < lo - 1e-15 * lo.abs() || r > hi + 1e-15 * lo.abs() {
                return Err(Error::CheckFailed {
                    check: "input sandwich",
                    detail: format!("rho outside [psi, phi] at ln(delta) = {}", node.ell),
                });
            }
        }
    }

    // N from the discrete angular Laplacian of 3χ_j, with a 10% margin.
    let mut min_lap = 0.0f64;
    for s in &m.sectors {
        for &phi in &phis {
            let d2 = 3.0 * (s.chi(phi + hphi) - 2.0 * s.chi(phi) + s.chi(phi - hphi)) / (hphi * hphi);
            let r = m.radius - (-l_first).exp();
            min_lap = min_lap.min(d2 / (r * r));
        }
    }
    let n_coef = 1.1 * (-min_lap).max(0.0) / 4.0;
    let m_const = m.radius * m.radius + 1.0;
    let sim = Sim {
        p: params,
        m,
        table: &table,
        n_coef,
        m_const,
    };

    // c₁, c₂ and the overlap bound over every candidate ε = −a_μ.
    let eps_all: Vec<f64> = table.a_values[1..].iter().map(|a| -a).collect();
    let (mut c1, mut c2, mut overlap) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &eps in &eps_all {
        for node in &nodes {
            let u = sim.u(*node, eps)?.1;
            let refv = sim.reference(node.ell, eps)?;
            c1 = c1.max(refv - u);
            c2 = c2.max(u - refv);
            let taus: Vec<f64> = m
                .sectors
                .iter()
                .filter(|s| s.contains(node.phi))
                .map(|s| tau_eval(&table, sim.rho(s, node.ell) - eps))
                .collect::<Result<_>>()?;
            for i in 0..taus.len() {
                for k in i + 1..taus.len() {
                    overlap = overlap.max((taus[i] - taus[k]).abs());
                }
            }
        }
    }
    let c1 = c1.max(0.0);
    let c2 = c2.max(0.0);
    // Bounds the chain of inequalities guarantees: c₁ ≤ 2 + N·M, c₂ ≤ 3.
    let sandwich = c1 <= 2.0 + n_coef * m_const && c2 <= 3.0;

    let l = match cfg.l {
        Some(l) => {
            if (2.0 * l as f64 - 1.0) / 2.0 <= c1 + c2 {
                return Err(invalid("l", format!("(2l-1)/2 must exceed c1 + c2 = {}", c1 + c2)));
            }
            l
        }
        None => {
            let mut l = 1;
            while (2.0 * l as f64 - 1.0) / 2.0 <= c1 + c2 {
                l += 1;
            }
            l
        }
    };
    // κ_ν needs a_{2ν+2l}; M_{ν+l} needs α_{2ν+2l}.
    if 2 + 2 * l > n_tab {
        return Err(Error::SequenceRange {
            index: 2 + 2 * l,
            reason: format!("stride l = {l} needs at least {} terms, table has {n_tab}", 2 + 2 * l),
        });
    }
    let nu_max = (n_tab - 2 * l) / 2;
    let c3 = ((2.0 * l as f64 - 1.0) / 2.0 - c1 - c2) / (2.0 * l as f64 + 1.0 + c1);

    let mut kappa = Vec::with_capacity(nu_max);
    for nu in 1..=nu_max {
        let top = 2 * nu + 2 * l;
        let eps = -table.a_values[top - 1];
        let scale = table.tau_at_a[top - 1];
        let ell_shell = table.log_neg_alphas[2 * nu - 1];
        let ell_deep = table.log_neg_alphas[top - 1];
        let (mut sup_shell, mut inf_deep) = (f64::NEG_INFINITY, f64::INFINITY);
        for node in &nodes {
            if node.ell == ell_shell {
                sup_shell = sup_shell.max(sim.u(*node, eps)?.1 / scale);
            }
            if node.ell <= ell_deep {
                inf_deep = inf_deep.min(sim.u(*node, eps)?.1 / scale);
            }
        }
        kappa.push((inf_deep - sup_shell) / (1.0 - sup_shell));
    }
    let kappa_ok = c3 > 0.0 && kappa.iter().all(|&k| k >= c3);

    // M_ν = sup over δ ≤ |α_{2ν}| of −ϱ.
    let r1 = m.inner_fraction * m.radius;
    let neg_rho = |ell: f64| relative_extremal_annulus_delta(r1, m.radius, ell.exp()).map(|v| -v);
    let m_series: Vec<f64> = (1..=n_tab / 2)
        .map(|nu| neg_rho(table.log_neg_alphas[2 * nu - 1]))
        .collect::<Result<_>>()?;
    let mut decay = m_series.windows(2).all(|w| w[1] <= w[0]);
    for nu in 1..=nu_max {
        if nu + l <= m_series.len() {
            let (a, b) = (m_series[nu - 1], m_series[nu + l - 1]);
            decay &= b <= (1.0 - kappa[nu - 1]) * a && b <= (1.0 - c3) * a;
        }
    }

    // λ counts α indices and ν counts pairs, so the rate per λ is half the
    // rate per ν.
    let epsilon0 = (1.0 / (1.0 - c3)).ln() / (2.0 * l as f64);
    let m0 = neg_rho(table.log_neg_alphas[0])?;
    let mut k_const = m0 * epsilon0.exp();
    for (i, &mv) in m_series.iter().enumerate() {
        k_const = k_const.max(mv * (epsilon0 * (2 * (i + 1) + 1) as f64).exp());
    }
    let mut worst = 0.0f64;
    for &ell in &levels {
        let delta = ell.exp();
        let lam = lambda_of(&table, delta)?;
        let bound = k_const * (-epsilon0 * lam as f64).exp();
        worst = worst.max(neg_rho(ell)? / bound);
    }
    let final_bound = worst <= 1.0 + 1e-12;

    // Subharmonicity away from max junctions, on every 4th level.
    let mut lap_min = f64::INFINITY;
    let mut lap_points = 0;
    let hphi_check = 1e-3;
    for (i, &ell) in levels.iter().enumerate() {
        if i % 4 != 0 {
            continue;
        }
        let eps = eps_all[eps_all.len() / 2];
        for &phi in &phis {
            let node = Node { phi, ell };
            let (j, _) = sim.u(node, eps)?;
            if j == usize::MAX {
                continue;
            }
            let d = ell.exp();
            let around = [
                Node {
                    phi,
                    ell: (d * 1.01).ln(),
                },
                Node {
                    phi,
                    ell: (d * 0.99).ln(),
                },
                Node {
                    phi: phi + hphi_check,
                    ell,
                },
                Node {
                    phi: phi - hphi_check,
                    ell,
                },
            ];
            let mut single = true;
            for nb in around {
                if sim.u(nb, eps)?.0 != j {
                    single = false;
                    break;
                }
            }
            if !single {
                continue;
            }
            let (lap, scale) = sim.scaled_laplacian(j, node, eps, hphi_check)?;
            lap_min = lap_min.min(lap / scale);
            lap_points += 1;
        }
    }
    let subharmonic = lap_points > 0 && lap_min >= -1e-6;

    let checks = PatchChecks {
        overlap: overlap < 3.0,
        sandwich,
        kappa: kappa_ok,
        decay,
        subharmonic,
        final_bound,
    };
    Ok(PatchReport {
        c0: table.c0(),
        table,
        c1,
        c2,
        c3,
        l,
        epsilon0,
        n_coefficient: n_coef,
        m_constant: m_const,
        m_series,
        kappa,
        overlap_max: overlap,
        laplacian_min: lap_min,
        laplacian_points: lap_points,
        final_bound_k: k_const,
        final_bound_ratio: worst,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn envelope_examples() {
        let p = ExhaustionParams::new(1.0, 1.0, 1.0, PI / 2.0, 0.5, -0.01).unwrap();
        let (psi, phi) = envelope_eval(&p, -(-10.0f64).exp()).unwrap();
        assert_relative_eq!(psi, -0.1, max_relative = 1e-15);
        assert!(psi <= phi);
        assert!(envelope_eval(&p, 0.0).is_err());
        assert!(envelope_eval(&p, -1.0).is_err());
    }

    #[test]
    fn bad_constants_rejected() {
        // φ far above ψ: C₂ huge.
        assert!(ExhaustionParams::new(1.0, 1.0, 1e300, 0.01, 0.5, -0.01).is_err());
        assert!(ExhaustionParams::new(1.0, 1.0, 1.0, 1.0, 1.5, -0.01).is_err());
        assert!(ExhaustionParams::new(1.0, 1.0, 1.0, 1.0, 0.5, 0.01).is_err());
    }

    #[test]
    fn reference_second_term() {
        let p = ExhaustionParams::reference();
        let ls = alpha_sequence_log(&p, 2).unwrap();
        // ln(−α₂) = −(C₁/(−φ(α₁)/2))^{1/β} = −2 e^{A/0.01}.
        let expected = -2.0 * (PI / 2.0 / 0.01).exp();
        assert_relative_eq!(ls[1], expected, max_relative = 1e-12);
        assert_relative_eq!(ls[1], -3.3102e68, max_relative = 1e-4);
        // α₃ needs exp(2.7e68).
        assert!(matches!(
            alpha_sequence_log(&p, 3),
            Err(Error::SequenceRange { index: 3, .. })
        ));
        assert!(matches!(
            alpha_sequence(&p, 2),
            Err(Error::SequenceRange { index: 2, .. })
        ));
    }

    #[test]
    fn preset_sequence() {
        let p = ExhaustionParams::simulation_preset();
        let ls = alpha_sequence_log_max(&p, 64);
        assert_eq!(ls.len(), 12);
        assert_relative_eq!(ls[0], -11.0, max_relative = 1e-15);
        assert!(ls.windows(2).all(|w| w[1] < w[0]));
        let alphas = alpha_sequence(&p, 12).unwrap();
        assert!(alphas.windows(2).all(|w| w[1] > w[0]));
        assert!(*alphas.last().unwrap() > -1e-9);
    }

    #[test]
    fn tau_and_lambda() {
        let p = ExhaustionParams::simulation_preset();
        let t = SequenceTable::build(&p, 12).unwrap();
        assert_eq!(tau_eval(&t, t.a_values[0]).unwrap(), 0.0);
        for (i, w) in t.tau_at_a.windows(2).enumerate() {
            let inc = w[1] - w[0];
            assert!((0.5 - 1e-12..1.0).contains(&inc), "increment {i}: {inc}");
            // Continuity at the breakpoint from both sides.
            let a = t.a_values[i + 1];
            let left = t.tau_at_a[i] + 1.0 - a / t.a_values[i];
            assert!((left - tau_eval(&t, a).unwrap()).abs() <= 1e-12);
        }
        let c0 = t.c0();
        assert!(t
            .tau_at_a
            .iter()
            .enumerate()
            .all(|(i, v)| *v >= (i + 1) as f64 / 2.0 - c0));
        assert_relative_eq!(c0, 0.5, max_relative = 1e-12);
        assert!(matches!(tau_eval(&t, -1e-300), Err(Error::BeyondTable { .. })));
        assert_eq!(lambda_of(&t, -p.alpha1()).unwrap(), 1);
        let a3 = t.log_neg_alphas[2].exp();
        assert_eq!(lambda_of(&t, a3 * 1.0000001).unwrap(), 2);
        assert!(lambda_of(&t, a3).unwrap() >= 3);
        assert!(lambda_of(&t, -p.alpha1() * 1.01).is_err());
    }

    #[test]
    fn tau_convex() {
        let p = ExhaustionParams::simulation_preset();
        let t = SequenceTable::build(&p, 8).unwrap();
        let (lo, hi) = (t.a_values[0] * 1.5, *t.a_values.last().unwrap());
        // Sample in log|x| so every segment is resolved.
        let n = 4000;
        let xs: Vec<f64> = (0..=n)
            .map(|i| (-((-lo).ln() + ((-hi).ln() - (-lo).ln()) * i as f64 / n as f64).exp()).min(hi))
            .collect();
        let ys: Vec<f64> = xs.iter().map(|&x| tau_eval(&t, x).unwrap()).collect();
        for i in 1..n {
            let s1 = (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
            let s2 = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
            assert!(s2 >= s1 * (1.0 - 1e-9) - 1e-12, "slopes {s1} {s2} at {i}");
        }
    }

    #[test]
    fn relative_extremal_examples() {
        let v = relative_extremal_annulus(0.25, 1.0, Complex64::new(0.5, 0.0)).unwrap();
        assert_relative_eq!(v, -0.5, max_relative = 1e-15);
        assert_eq!(
            relative_extremal_annulus(0.25, 1.0, Complex64::new(0.1, 0.1)).unwrap(),
            -1.0
        );
        assert!(
            relative_extremal_annulus(0.25, 1.0, Complex64::new(0.0, 1.0 - 1e-12))
                .unwrap()
                .abs()
                < 1e-11
        );
        assert!(relative_extremal_annulus(0.25, 1.0, Complex64::new(1.0, 0.0)).is_err());
        let d = relative_extremal_annulus_delta(0.25, 1.0, 0.5).unwrap();
        assert_relative_eq!(d, -0.5, max_relative = 1e-15);
    }

    #[test]
    fn relative_extremal_matches_relaxation() {
        // Radial Laplace equation on [R₁, R₂] with u(R₁) = −1, u(R₂) = 0,
        // relaxed on a uniform grid in r.
        let (r1, r2) = (0.25f64, 1.0f64);
        let n = 300;
        let h = (r2 - r1) / n as f64;
        let mut u = vec![0.0f64; n + 1];
        u[0] = -1.0;
        // Tridiagonal solve of u'' + u'/r = 0.
        let mut a = vec![0.0; n + 1];
        let mut b = vec![1.0; n + 1];
        let mut c = vec![0.0; n + 1];
        let mut d = u.clone();
        for i in 1..n {
            let r = r1 + i as f64 * h;
            a[i] = 1.0 / (h * h) - 1.0 / (2.0 * h * r);
            b[i] = -2.0 / (h * h);
            c[i] = 1.0 / (h * h) + 1.0 / (2.0 * h * r);
            d[i] = 0.0;
        }
        for i in 1..=n {
            let w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            d[i] -= w * d[i - 1];
        }
        u[n] = d[n] / b[n];
        for i in (0..n).rev() {
            u[i] = (d[i] - c[i] * u[i + 1]) / b[i];
        }
        let mid = ((0.5 - r1) / h).round() as usize;
        let exact = relative_extremal_annulus(r1, r2, Complex64::new(0.5, 0.0)).unwrap();
        assert!((u[mid] - exact).abs() < 1e-3, "{} vs {exact}", u[mid]);
    }

    #[test]
    fn patch_model_checks() {
        let p = ExhaustionParams::simulation_preset();
        let r = patch_decay_sim(&p, &PatchConfig::default()).unwrap();
        assert!(r.checks.all(), "{:?}", r.checks);
        assert!((2.0 * r.l as f64 - 1.0) / 2.0 > r.c1 + r.c2);
        assert!(r.c3 > 0.0 && r.kappa.iter().all(|&k| k >= r.c3));
        assert!(r.m_series.windows(2).all(|w| w[1] <= w[0]));
        assert_relative_eq!(
            r.epsilon0,
            (1.0 / (1.0 - r.c3)).ln() / (2.0 * r.l as f64),
            max_relative = 1e-15
        );
        let v = serde_json::to_value(&r).unwrap();
        for key in ["c0", "c1", "c2", "c3", "l", "epsilon0", "M_series"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn patch_model_rejects_bad_stride() {
        let p = ExhaustionParams::simulation_preset();
        let small = PatchConfig {
            l: Some(0),
            ..Default::default()
        };
        assert!(matches!(
            patch_decay_sim(&p, &small),
            Err(Error::InvalidParameter { .. })
        ));
        let big = PatchConfig {
            l: Some(6),
            ..Default::default()
        };
        assert!(matches!(patch_decay_sim(&p, &big), Err(Error::SequenceRange { .. })));
    }

    proptest! {
        #[test]
        fn psi_inverse_roundtrip(e in -6.0f64..-1.0) {
            let p = ExhaustionParams::reference();
            let t = -(10f64).powf(e);
            let (psi, _) = envelope_eval(&p, t).unwrap();
            let back = psi_inverse(&p, psi).unwrap();
            prop_assert!(((back - t) / t).abs() < 1e-12);
        }

        #[test]
        fn lambda_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let p = ExhaustionParams::simulation_preset();
            let t = SequenceTable::build(&p, 12).unwrap();
            let top = -p.alpha1();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            // Log-uniform t in [e^{-500}, |α₁|].
            let t1 = top * (-500.0 * (1.0 - lo)).exp();
            let t2 = top * (-500.0 * (1.0 - hi)).exp();
            prop_assert!(lambda_of(&t, t1).unwrap() >= lambda_of(&t, t2).unwrap());
        }
    }
}

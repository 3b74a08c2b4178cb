//! The map `F(z) = exp(−A z^{−(1/α−1)})` that opens a cusp onto a domain
//! tangent to the imaginary axis at 0, together with the polar description of
//! boundary images and the asymptotics of the image boundary.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::fit::fit_line;
use crate::geometry::CuspParams;
use crate::sampling::trial_rng;

/// `A = π C^{1/α} / (2(1/α − 1))`.
pub fn hopf_constant(params: CuspParams) -> f64 {
    PI * params.c().powf(1.0 / params.alpha()) / (2.0 * params.k())
}

/// `log F(z) = −A z^{−k}` on the principal branch.
pub fn f_map_log(params: CuspParams, z: Complex64) -> Result<Complex64> {
    ensure_finite("z", &[z.re, z.im])?;
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::OutsideDomain {
            x: 0.0,
            y: 0.0,
            reason: "F has an essential singularity at the vertex".into(),
        });
    }
    let k = params.k();
    let a = hopf_constant(params);
    // z^{-k} = exp(−k (ln|z| + i arg z)) with arg in (−π, π].
    let (r, th) = z.to_polar();
    let mag = -a * (-k * r.ln()).exp();
    Ok(Complex64::from_polar(mag, -k * th))
}

/// `F(z)`; the cusp never meets the negative real axis, so the principal
/// branch is single-valued there.
pub fn f_map(params: CuspParams, z: Complex64) -> Result<Complex64> {
    Ok(f_map_log(params, z)?.exp())
}

/// Inverse of `F` on its image, `(−log w / A)^{−1/k}` on principal branches.
pub fn f_inverse(params: CuspParams, w: Complex64) -> Result<Complex64> {
    if w.norm() == 0.0 || !w.re.is_finite() || !w.im.is_finite() {
        return Err(invalid("w", "must be finite and nonzero"));
    }
    f_inverse_log(params, w.ln())
}

/// Inverse of `F` from `log w`, which stays representable when `w` does not.
pub fn f_inverse_log(params: CuspParams, log_w: Complex64) -> Result<Complex64> {
    let q = -log_w / hopf_constant(params);
    if q.norm() == 0.0 {
        return Err(invalid("w", "log w must be nonzero"));
    }
    Ok(q.powf(-1.0 / params.k()))
}

/// Polar quantities of `γ_c(s) = s + i c s^{1/α}` and of its image under `F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPolar {
    pub s: f64,
    pub c: f64,
    pub r: f64,
    pub theta: f64,
    pub r_tilde: f64,
    pub log_r_tilde: f64,
    pub theta_tilde: f64,
}

pub fn boundary_polar(params: CuspParams, c: f64, s: f64) -> Result<BoundaryPolar> {
    ensure_finite("c", &[c])?;
    if !(s.is_finite() && s > 0.0) {
        return Err(invalid("s", format!("must be positive, got {s}")));
    }
    let cm = params.c_max();
    if c.abs() > cm * (1.0 + 1e-15) {
        return Err(invalid("c", format!("|c| must not exceed C^(-1/alpha) = {cm}")));
    }
    let k = params.k();
    let a = hopf_constant(params);
    let alpha = params.alpha();
    let r = (s * s + c * c * s.powf(2.0 / alpha)).sqrt();
    let theta = (c * s.powf(k)).atan();
    let scale = a / r.powf(k);
    let log_r_tilde = -scale * (k * theta).cos();
    Ok(BoundaryPolar {
        s,
        c,
        r,
        theta,
        r_tilde: log_r_tilde.exp(),
        log_r_tilde,
        theta_tilde: scale * (k * theta).sin(),
    })
}

/// `π/2 − θ̃(s)` on the upper wall `c = C^{−1/α}`, free of cancellation.
///
/// With `u = C^{−1/α} s^k`, `θ̃ = (π/2k) Ψ(u)` where
/// `Ψ(u) = sin(k arctan u) / (u (1+u²)^{k/2})` and `Ψ(0) = k`.
pub fn wall_angle_gap(params: CuspParams, s: f64) -> f64 {
    let k = params.k();
    let u = params.c_max() * s.powf(k);
    PI / (2.0 * k) * k_minus_psi(k, u)
}

fn k_minus_psi(k: f64, u: f64) -> f64 {
    if u < 0.1 {
        // k − Ψ(u) = Σ_{j≥1} (−1)^{j+1} (k)_{2j+1} u^{2j} / (2j+1)!
        let u2 = u * u;
        let mut term = k * (k + 1.0) * (k + 2.0) / 6.0 * u2;
        let mut sum = 0.0;
        let mut j = 1.0f64;
        for _ in 0..80 {
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            let n = 2.0 * j;
            term *= -(k + n + 1.0) * (k + n + 2.0) / ((n + 2.0) * (n + 3.0)) * u2;
            j += 1.0;
        }
        sum
    } else {
        k - (k * u.atan()).sin() / (u * (1.0 + u * u).powf(k / 2.0))
    }
}

/// `log(1/ỹ(s))` on the upper wall, computed in log form.
pub fn wall_log_inv_y(params: CuspParams, s: f64) -> f64 {
    let bp = boundary_polar(params, params.c_max(), s).expect("wall point is valid");
    // sin θ̃ = cos(π/2 − θ̃)
    -bp.log_r_tilde - wall_angle_gap(params, s).cos().ln()
}

/// Largest `R` for which `F` is injective on `Γ ∩ Δ_R`, shrunk by 0.9.
///
/// On `γ_c` the argument obeys `|θ(s)| ≤ |c| s^k ≤ C^{−1/α} s^k`, so
/// `z^{−k}` is injective once `C^{−1/α} R^k < π/k`.
pub fn injectivity_radius(params: CuspParams) -> f64 {
    let k = params.k();
    0.9 * (PI * params.c().powf(1.0 / params.alpha()) / k).powf(1.0 / k)
}

/// One sample of the upper image boundary `x̃ = h(ỹ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub s: f64,
    pub y_tilde: f64,
    pub x_tilde: f64,
    pub log_r_tilde: f64,
    pub theta_tilde: f64,
}

/// A fitted power-law constant and how well the data follow it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub exponent_expected: f64,
    pub exponent_fitted: f64,
    pub coefficient: f64,
    /// Largest relative deviation from the fitted law over the window.
    pub residual: f64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageProfile {
    pub rows: Vec<ProfileRow>,
    /// `h(y) ≈ A₂ y (log 1/y)^{−2}`.
    pub a2: AsymptoticFit,
    /// `π/2 − θ̃(s) ≈ A₁ s^{2/α−2}`.
    pub a1: AsymptoticFit,
    /// `A₂ / (A₁ A²)`.
    pub consistency: f64,
}

/// `Q(s) = h(ỹ)·(log 1/ỹ)² / ỹ = tan(π/2 − θ̃)·(log 1/ỹ)²`.
pub fn profile_quotient(params: CuspParams, s: f64) -> f64 {
    wall_angle_gap(params, s).tan() * wall_log_inv_y(params, s).powi(2)
}

/// Geometric grid of `n` points from `hi` down to `lo`.
pub fn descending_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (hi.ln(), lo.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp())
        .collect()
}

/// Samples the upper image boundary and fits its asymptotic constants.
pub fn image_profile(params: CuspParams, s_grid: &[f64]) -> Result<ImageProfile> {
    if s_grid.len() < 3 {
        return Err(invalid("s_grid", "needs at least three points"));
    }
    let r_inj = injectivity_radius(params);
    for w in s_grid.windows(2) {
        if !(w[1] < w[0]) {
            return Err(invalid("s_grid", "must be strictly descending"));
        }
    }
    if !(s_grid[s_grid.len() - 1] > 0.0 && s_grid[0] < r_inj) {
        return Err(invalid(
            "s_grid",
            format!("must lie in (0, {r_inj}), the injectivity region"),
        ));
    }
    let k = params.k();
    let a = hopf_constant(params);
    let cm = params.c_max();
    let mut rows = Vec::with_capacity(s_grid.len());
    let mut log_q = Vec::with_capacity(s_grid.len());
    let mut log_gap = Vec::with_capacity(s_grid.len());
    let mut log_pow = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let bp = boundary_polar(params, cm, s)?;
        rows.push(ProfileRow {
            s,
            y_tilde: bp.r_tilde * bp.theta_tilde.sin(),
            x_tilde: bp.r_tilde * bp.theta_tilde.cos(),
            log_r_tilde: bp.log_r_tilde,
            theta_tilde: bp.theta_tilde,
        });
        log_q.push(profile_quotient(params, s).ln());
        log_gap.push(wall_angle_gap(params, s).ln());
        log_pow.push(2.0 * k * s.ln());
    }
    let window = (s_grid[s_grid.len() - 1], s_grid[0]);

    let a2 = power_fit(&log_q, None, 0.0, window);
    let a1 = power_fit(&log_gap, Some(&log_pow), 1.0, window);
    Ok(ImageProfile {
        rows,
        consistency: a2.coefficient / (a1.coefficient * a * a),
        a2,
        a1,
    })
}

/// Fits `log y = log c + e·x` with `e` fixed at `expected` for the coefficient;
/// the free slope is reported alongside.
fn power_fit(log_y: &[f64], x: Option<&[f64]>, expected: f64, window: (f64, f64)) -> AsymptoticFit {
    let n = log_y.len() as f64;
    let xs: Vec<f64> = match x {
        Some(x) => x.to_vec(),
        None => vec![0.0; log_y.len()],
    };
    let log_c = log_y.iter().zip(&xs).map(|(y, x)| y - expected * x).sum::<f64>() / n;
    let coefficient = log_c.exp();
    let residual = log_y
        .iter()
        .zip(&xs)
        .map(|(y, x)| ((y - expected * x - log_c).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    let exponent_fitted = if x.is_some() { fit_line(&xs, log_y).slope } else { 0.0 };
    AsymptoticFit {
        exponent_expected: expected,
        exponent_fitted,
        coefficient,
        residual,
        window,
    }
}

/// Whether `w` lies in `D = F(Γ ∩ Δ_R)`.
pub fn in_image(params: CuspParams, radius: f64, w: Complex64) -> bool {
    // |F| can exceed 1 where k·|arg z| > π/2, so only 0 is excluded.
    if !(w.norm() > 0.0) {
        return false;
    }
    match f_inverse(params, w) {
        Ok(z) => params.in_cusp(z) && z.norm() < radius,
        Err(_) => false,
    }
}

/// Outcome of [`collision_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionScan {
    pub pairs: usize,
    /// Smallest `(|Δ log F| / max|log F|) / (|Δz| / max|z|)` over the pairs.
    pub min_quotient: f64,
}

/// Point of `Γ ∩ Δ_R` with log-uniform abscissa in `[1e-3 R, R)`.
fn scan_point<G: Rng>(p: CuspParams, radius: f64, rng: &mut G) -> Complex64 {
    let x = radius * 1e-3f64.powf(rng.gen::<f64>());
    let w = p.half_width(x).min((radius * radius - x * x).max(0.0).sqrt());
    Complex64::new(x, 0.999 * w * (2.0 * rng.gen::<f64>() - 1.0))
}

/// Compares image and preimage separations over `pairs` pairs in
/// `Γ ∩ Δ_R`, half of them random and half at relative distance ≤ 1e-6.
///
/// `F` underflows near the vertex, so images are compared through `log F`,
/// which is injective exactly where `F` is. On an injective region the
/// quotient stays near `k`; a collision drives it to 0.
pub fn collision_scan(params: CuspParams, radius: f64, pairs: usize, seed: u64) -> Result<CollisionScan> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(invalid("radius", format!("must be positive, got {radius}")));
    }
    let quotients: Vec<f64> = (0..pairs)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = trial_rng(seed, i as u64);
            let z1 = scan_point(params, radius, &mut rng);
            let z2 = if i % 2 == 0 {
                scan_point(params, radius, &mut rng)
            } else {
                let d = 1e-6 * z1.re * rng.gen::<f64>();
                let cand = z1 + Complex64::from_polar(d, TAU * rng.gen::<f64>());
                if params.in_cusp(cand) && cand.norm() < radius {
                    cand
                } else {
                    z1 * (1.0 - 1e-7)
                }
            };
            let l1 = f_map_log(params, z1)?;
            let l2 = f_map_log(params, z2)?;
            let dz = (z1 - z2).norm() / z1.norm().max(z2.norm());
            let dw = (l1 - l2).norm() / l1.norm().max(l2.norm());
            Ok(if dz > 0.0 { dw / dz } else { f64::INFINITY })
        })
        .collect::<Result<_>>()?;
    Ok(CollisionScan {
        pairs,
        min_quotient: quotients.into_iter().fold(f64::INFINITY, f64::min),
    })
}

/// Largest `|θ̃|` over `n` boundary samples with `s` log-uniform in
/// `[1e-4 R, R)`; every fourth sample sits on each wall.
pub fn boundary_angle_scan(params: CuspParams, radius: f64, n: usize, seed: u64) -> Result<f64> {
    let cm = params.c_max();
    let thetas: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let c = match i % 4 {
                0 => cm,
                1 => -cm,
                _ => cm * (2.0 * rng.gen::<f64>() - 1.0),
            };
            let s = radius * 1e-4f64.powf(rng.gen::<f64>());
            boundary_polar(params, c, s).map(|b| b.theta_tilde.abs())
        })
        .collect::<Result<_>>()?;
    Ok(thetas.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn p(c: f64, a: f64) -> CuspParams {
        CuspParams::new(c, a).unwrap()
    }

    #[test]
    fn hopf_constant_examples() {
        assert_relative_eq!(hopf_constant(p(1.0, 0.5)), FRAC_PI_2, max_relative = 1e-15);
        assert_relative_eq!(hopf_constant(p(2.0, 0.5)), 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(hopf_constant(p(1.0, 2.0 / 3.0)), PI, max_relative = 1e-14);
    }

    #[test]
    fn f_map_normalisation_and_examples() {
        let q = p(0.7, 0.6);
        let one = f_map(q, Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(one, Complex64::new((-hopf_constant(q)).exp(), 0.0));
        let v = f_map(p(1.0, 0.5), Complex64::new(0.5, 0.0)).unwrap();
        assert_relative_eq!(v.re, (-PI).exp(), max_relative = 1e-14);
        assert_relative_eq!(v.re, 0.043214, max_relative = 1e-4);
        assert!(f_map(q, Complex64::new(0.0, 0.0)).is_err());
        assert!(f_map(q, Complex64::new(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn boundary_polar_axis_curve() {
        let q = p(1.0, 0.5);
        let b = boundary_polar(q, 0.0, 0.3).unwrap();
        assert_eq!(b.theta, 0.0);
        assert_eq!(b.theta_tilde, 0.0);
        assert_eq!(b.r, 0.3);
        assert_relative_eq!(b.r_tilde, (-FRAC_PI_2 / 0.3).exp(), max_relative = 1e-14);
        assert!(boundary_polar(q, 1.5, 0.3).is_err());
    }

    #[test]
    fn wall_angle_tends_to_right_angle() {
        let q = p(1.0, 0.5);
        let b = boundary_polar(q, q.c_max(), 1e-6).unwrap();
        assert!((b.theta_tilde - FRAC_PI_2).abs() < 1e-2);
        let b = boundary_polar(q, -q.c_max(), 1e-6).unwrap();
        assert!((b.theta_tilde + FRAC_PI_2).abs() < 1e-2);
    }

    #[test]
    fn gap_series_matches_direct_form() {
        // The series and direct branches must agree where both are accurate.
        for &k in &[0.3f64, 1.0, 3.0] {
            for &u in &[0.05f64, 0.099] {
                let series = {
                    let mut s = 0.0;
                    let mut t = k * (k + 1.0) * (k + 2.0) / 6.0 * u * u;
                    let mut n = 2.0;
                    while t.abs() > 1e-20 {
                        s += t;
                        t *= -(k + n + 1.0) * (k + n + 2.0) / ((n + 2.0) * (n + 3.0)) * u * u;
                        n += 2.0;
                    }
                    s
                };
                let direct = k - (k * u.atan()).sin() / (u * (1.0 + u * u).powf(k / 2.0));
                assert_relative_eq!(series, direct, max_relative = 1e-9);
                assert_relative_eq!(k_minus_psi(k, u), direct, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn gap_agrees_with_complex_evaluation() {
        // At moderate s the complex logarithm resolves π/2 − θ̃ directly.
        let q = p(1.0, 0.5);
        for &s in &[0.3, 0.1, 0.03] {
            let z = Complex64::new(s, q.c_max() * s.powf(1.0 / q.alpha()));
            let direct = FRAC_PI_2 - f_map_log(q, z).unwrap().im;
            assert_relative_eq!(wall_angle_gap(q, s), direct, max_relative = 1e-9);
        }
    }

    #[test]
    fn injectivity_radius_examples() {
        assert_relative_eq!(injectivity_radius(p(1.0, 0.5)), 0.9 * PI, max_relative = 1e-14);
        // A larger C gives a thinner cusp and a larger radius.
        assert!(injectivity_radius(p(2.0, 0.5)) > injectivity_radius(p(1.0, 0.5)));
        assert_relative_eq!(injectivity_radius(p(2.0, 0.5)), 0.9 * 4.0 * PI, max_relative = 1e-14);
    }

    #[test]
    fn positive_axis_is_real_and_increasing() {
        let q = p(1.0, 0.5);
        let r = injectivity_radius(q);
        let mut prev = 0.0;
        for i in 1..=1000 {
            let x = r * i as f64 / 1001.0;
            let v = f_map(q, Complex64::new(x, 0.0)).unwrap();
            assert_eq!(v.im, 0.0);
            assert!(v.re > prev || (v.re == 0.0 && prev == 0.0));
            prev = v.re;
        }
    }

    #[test]
    fn log_ratio_near_one() {
        let q = p(1.0, 0.5);
        let s = 1e-4;
        let ratio = wall_log_inv_y(q, s) / (hopf_constant(q) / s.powf(q.k()));
        assert!((0.95..=1.05).contains(&ratio), "{ratio}");
    }

    #[test]
    fn a1_is_window_stable() {
        let q = p(1.0, 0.5);
        let f1 = image_profile(q, &descending_grid(1e-5, 1e-4, 30)).unwrap();
        let f2 = image_profile(q, &descending_grid(1e-6, 1e-5, 30)).unwrap();
        assert!(f1.a1.coefficient > 0.0 && f1.a1.coefficient.is_finite());
        assert!((f1.a1.coefficient / f2.a1.coefficient - 1.0).abs() < 0.02);
        assert!((f1.a1.exponent_fitted - 1.0).abs() < 1e-3);
    }

    #[test]
    fn a1_matches_independent_extrapolation() {
        // (π/2 − θ̃)/s^{2k} from complex arithmetic at moderate s, extrapolated
        // linearly in s^{2k} to s = 0.
        let q = p(1.0, 0.5);
        let k = q.k();
        let ratio = |s: f64| {
            let z = Complex64::new(s, q.c_max() * s.powf(1.0 / q.alpha()));
            (FRAC_PI_2 - f_map_log(q, z).unwrap().im) / s.powf(2.0 * k)
        };
        let (s1, s2): (f64, f64) = (2e-3, 1e-3);
        let (x1, x2) = (s1.powf(2.0 * k), s2.powf(2.0 * k));
        let oracle = ratio(s2) - (ratio(s1) - ratio(s2)) / (x1 - x2) * x2;
        let fit = image_profile(q, &descending_grid(1e-6, 1e-4, 40)).unwrap();
        assert_relative_eq!(fit.a1.coefficient, oracle, max_relative = 1e-4);
    }

    #[test]
    fn a2_consistency() {
        let q = p(1.0, 0.5);
        let fit = image_profile(q, &descending_grid(1e-6, 1e-4, 40)).unwrap();
        assert!(fit.a2.residual <= 0.10);
        assert!((0.95..=1.05).contains(&fit.consistency), "{}", fit.consistency);
        assert!(fit.rows.iter().all(|r| r.theta_tilde.abs() <= FRAC_PI_2 + 1e-9));
    }

    #[test]
    fn profile_rejects_bad_grids() {
        let q = p(1.0, 0.5);
        assert!(image_profile(q, &[1e-4, 1e-3, 1e-5]).is_err());
        assert!(image_profile(q, &[10.0, 1.0, 0.1]).is_err());
    }

    #[test]
    fn inverse_roundtrip_and_image_membership() {
        let q = p(0.5, 0.7);
        let z = Complex64::new(0.3, 0.05);
        let w = f_map(q, z).unwrap();
        let back = f_inverse(q, w).unwrap();
        assert_relative_eq!((back - z).norm(), 0.0, epsilon = 1e-12);
        assert!(in_image(q, 1.0, w));
        assert!(!in_image(q, 1.0, Complex64::new(-0.01, 0.0)));
    }

    proptest! {
        #[test]
        fn conjugation_symmetry(x in 1e-3f64..1.0, frac in 0.0f64..0.999) {
            let q = p(1.0, 0.5);
            let y = frac * q.half_width(x);
            let z = Complex64::new(x, y);
            let a = f_map(q, z.conj()).unwrap();
            let b = f_map(q, z).unwrap().conj();
            prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-300));
        }

        #[test]
        fn polar_consistency(frac in -1.0f64..1.0, s in 1e-2f64..1.5) {
            let q = p(1.0, 0.5);
            let c = frac * q.c_max();
            let b = boundary_polar(q, c, s).unwrap();
            let z = Complex64::new(s, c * s.powf(1.0 / q.alpha()));
            let lw = f_map_log(q, z).unwrap();
            prop_assert!((lw.re - b.log_r_tilde).abs() <= 1e-10 * b.log_r_tilde.abs());
            prop_assert!((lw.im - b.theta_tilde).abs() <= 1e-10);
            prop_assert!(b.theta_tilde.abs() <= FRAC_PI_2 + 1e-9);
        }
    }

    #[test]
    fn collision_scan_sees_no_collisions() {
        let q = p(1.0, 0.5);
        let scan = collision_scan(q, injectivity_radius(q), 2000, 5).unwrap();
        assert_eq!(scan.pairs, 2000);
        assert!(scan.min_quotient > 0.1 && scan.min_quotient.is_finite(), "{scan:?}");
        assert_eq!(scan, collision_scan(q, injectivity_radius(q), 2000, 5).unwrap());
    }

    #[test]
    fn boundary_angles_stay_below_right_angle() {
        let q = p(0.5, 0.7);
        let m = boundary_angle_scan(q, injectivity_radius(q), 400, 1).unwrap();
        assert!(m > 0.0 && m <= FRAC_PI_2 + 1e-9, "{m}");
    }
}

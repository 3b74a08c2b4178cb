//! Green function of the truncated cusp along its axis, computed directly
//! and through the conformal image, against `−exp(−A/t^k)`.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cusp::{CuspFem, CuspFemConfig};
use super::zoom::{ImageDomain, ZoomConfig, ZoomGreen};
use super::GreenEstimate;
use crate::conformal::{f_map, hopf_constant, injectivity_radius};
use crate::error::{ensure_finite, invalid, Result};
use crate::fit::{fit_line, LineFit};
use crate::geometry::CuspParams;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisProfileConfig {
    pub fem: CuspFemConfig,
    pub zoom: ZoomConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisProfileRow {
    pub t: f64,
    /// `F(t)`.
    pub x_image: f64,
    pub g_direct: GreenEstimate,
    pub g_via_image: GreenEstimate,
    pub bound_value: f64,
    pub ratio: f64,
}

impl AxisProfileRow {
    pub fn invariance_holds(&self) -> bool {
        self.g_direct.agrees_with(&self.g_via_image, 1.0)
    }

    /// `g_D(F(t))/(−F(t))`.
    pub fn linearity_ratio(&self) -> f64 {
        self.g_via_image.value / -self.x_image
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisProfile {
    pub params: CuspParams,
    pub radius: f64,
    pub pole: f64,
    /// `A = πC^{1/α}/(2k)`.
    pub hopf_constant: f64,
    pub rows: Vec<AxisProfileRow>,
    /// Slope of `log(−g_direct)` against `−1/t^k`.
    pub fit: LineFit,
    /// Largest max/min of the linearity ratio over rows whose `F(t)` spans at
    /// most one decade.
    pub linearity_spread: f64,
}

impl AxisProfile {
    pub fn decay_constant(&self) -> f64 {
        self.fit.slope
    }

    pub fn invariance_holds(&self) -> bool {
        self.rows.iter().all(AxisProfileRow::invariance_holds)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,g_direct,g_direct_err,g_image,g_image_err,bound,ratio\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.t,
                r.g_direct.value,
                r.g_direct.error,
                r.g_via_image.value,
                r.g_via_image.error,
                r.bound_value,
                r.ratio
            );
        }
        s
    }
}

/// Largest max/min ratio of `ys` over windows where `xs` spans ≤ one decade.
fn decade_spread(xs: &[f64], ys: &[f64]) -> f64 {
    let mut worst: f64 = 1.0;
    for i in 0..xs.len() {
        let (mut lo, mut hi) = (ys[i], ys[i]);
        for j in 0..xs.len() {
            let r = xs[j] / xs[i];
            if (1.0..=10.0).contains(&r) {
                lo = lo.min(ys[j]);
                hi = hi.max(ys[j]);
            }
        }
        worst = worst.max(hi / lo);
    }
    worst
}

/// Pole at `a = R/2`; `t_grid` must lie in `(0, R/2)`.
pub fn axis_green_profile(
    params: CuspParams,
    radius: f64,
    t_grid: &[f64],
    cfg: &AxisProfileConfig,
) -> Result<AxisProfile> {
    ensure_finite("t_grid", t_grid)?;
    let r_inj = injectivity_radius(params);
    if !(radius > 0.0 && radius <= r_inj) {
        return Err(invalid("R", format!("must lie in (0, {r_inj}]")));
    }
    let pole = radius / 2.0;
    if t_grid.len() < 3 {
        return Err(invalid("t_grid", "needs at least 3 points"));
    }
    if let Some(&t) = t_grid.iter().find(|&&t| !(t > 0.0 && t < pole)) {
        return Err(invalid("t_grid", format!("{t} lies outside (0, R/2)")));
    }
    let k = params.k();
    let big_a = hopf_constant(params);
    let t_min = t_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let direct = CuspFem::solve(params, radius, pole, t_min, t_grid, &cfg.fem)?;
    let dom = ImageDomain::new(params, radius)?;
    let w_pole = f_map(params, Complex64::new(pole, 0.0))?;
    let image = ZoomGreen::solve(&dom, w_pole, &cfg.zoom)?;
    let x_cut = direct.x_min();

    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let z = Complex64::new(t, 0.0);
        let mut gd = direct.estimate(z);
        // Zero data at x_min instead of at the vertex.
        gd.error += gd.value.abs() * (-big_a * (x_cut.powf(-k) - t.powf(-k))).exp();
        let w = f_map(params, z)?;
        let gi = image.estimate(w);
        let bound_value = -(-big_a * t.powf(-k)).exp();
        rows.push(AxisProfileRow {
            t,
            x_image: w.re,
            g_direct: gd,
            g_via_image: gi,
            bound_value,
            ratio: gd.value / bound_value,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| -r.t.powf(-k)).collect();
    let ys: Vec<f64> = rows.iter().map(|r| (-r.g_direct.value).ln()).collect();
    ensure_finite("log(-g_direct)", &ys)?;
    let fit = fit_line(&xs, &ys);
    let lx: Vec<f64> = rows.iter().map(|r| r.x_image).collect();
    let ly: Vec<f64> = rows.iter().map(AxisProfileRow::linearity_ratio).collect();
    let linearity_spread = decade_spread(&lx, &ly);
    Ok(AxisProfile {
        params,
        radius,
        pole,
        hopf_constant: big_a,
        rows,
        fit,
        linearity_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decade_spread_examples() {
        assert_eq!(decade_spread(&[1.0, 2.0, 5.0], &[1.0, 1.0, 1.0]), 1.0);
        assert_eq!(decade_spread(&[1.0, 5.0, 100.0], &[1.0, 2.0, 10.0]), 2.0);
    }

    #[test]
    fn rejects_out_of_range_t() {
        let p = CuspParams::new(0.5, 0.7).unwrap();
        let cfg = AxisProfileConfig::default();
        assert!(axis_green_profile(p, 1.0, &[0.1, 0.2, 0.6], &cfg).is_err());
        assert!(axis_green_profile(p, 1.0, &[0.0, 0.1, 0.2], &cfg).is_err());
    }
}

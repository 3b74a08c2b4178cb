//! Green function of the image domain `D = F(Γ ∩ Δ_R)` near its boundary
//! point 0, on nested grids that zoom toward 0.
//!
//! Level 0 covers all of `D` and carries the pole. Level `k` covers the
//! square `[−ρ_k, ρ_k]²` with `ρ_k = ρ_0 / factor^k` and takes Dirichlet data
//! on its outer ring from level `k − 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fd::{solve_dirichlet, GridSpec};
use super::source::SmoothedSource;
use super::{GreenEstimate, GreenMethod};
use crate::conformal::{f_map, in_image, injectivity_radius};
use crate::error::{invalid, Error, Result};
use crate::geometry::{sampled_curve_distance, BoundingBox, CuspParams, PlanarDomain, TruncatedCusp};

/// `D = F(Γ ∩ Δ_R)`.
#[derive(Debug, Clone)]
pub struct ImageDomain {
    pub params: CuspParams,
    pub radius: f64,
    wall_s: Vec<f64>,
    arc_theta: Vec<f64>,
    bbox: BoundingBox,
}

impl ImageDomain {
    pub fn new(params: CuspParams, radius: f64) -> Result<Self> {
        let r_inj = injectivity_radius(params);
        if !(radius > 0.0 && radius <= r_inj) {
            return Err(invalid("R", format!("must lie in (0, {r_inj}]")));
        }
        let cusp = TruncatedCusp::new(params, radius)?;
        let s_max = cusp.wall_end();
        let th = cusp.arc_half_angle();
        let n = 2048;
        let wall_s: Vec<f64> = (0..n)
            .map(|i| s_max * (1e-8f64).powf(1.0 - i as f64 / (n - 1) as f64))
            .collect();
        let arc_theta: Vec<f64> = (0..n).map(|i| th * i as f64 / (n - 1) as f64).collect();
        let mut dom = Self {
            params,
            radius,
            wall_s,
            arc_theta,
            bbox: BoundingBox {
                x_min: 0.0,
                x_max: 0.0,
                y_min: 0.0,
                y_max: 0.0,
            },
        };
        let (mut x_max, mut y_max) = (0.0f64, 0.0f64);
        for &s in &dom.wall_s {
            let w = dom.wall(s);
            x_max = x_max.max(w.re);
            y_max = y_max.max(w.im.abs());
        }
        for &t in &dom.arc_theta {
            let w = dom.arc(t);
            x_max = x_max.max(w.re);
            y_max = y_max.max(w.im.abs());
        }
        dom.bbox = BoundingBox {
            x_min: 0.0,
            x_max: x_max * 1.001,
            y_min: -y_max * 1.001,
            y_max: y_max * 1.001,
        };
        Ok(dom)
    }

    fn wall(&self, s: f64) -> Complex64 {
        let z = Complex64::new(s, self.params.half_width(s));
        f_map(self.params, z).unwrap_or(Complex64::new(0.0, 0.0))
    }

    fn arc(&self, t: f64) -> Complex64 {
        f_map(self.params, Complex64::from_polar(self.radius, t)).unwrap_or(Complex64::new(0.0, 0.0))
    }
}

impl PlanarDomain for ImageDomain {
    fn contains(&self, w: Complex64) -> bool {
        in_image(self.params, self.radius, w)
    }

    fn boundary_distance(&self, w: Complex64) -> f64 {
        // D is symmetric under conjugation.
        let w = Complex64::new(w.re, w.im.abs());
        let d_wall = sampled_curve_distance(|s| self.wall(s), &self.wall_s, w);
        let d_arc = sampled_curve_distance(|t| self.arc(t), &self.arc_theta, w);
        d_wall.min(d_arc).min(w.norm())
    }

    fn bounding_box(&self) -> BoundingBox {
        self.bbox
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoomConfig {
    /// Cells across each level (the fine pass uses twice as many).
    pub cells: usize,
    pub levels: usize,
    pub factor: f64,
}

impl Default for ZoomConfig {
    fn default() -> Self {
        Self {
            cells: 192,
            levels: 10,
            factor: 4.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Level {
    half_width: f64,
    grid: GridSpec,
    /// Nodal `g`; deeper levels hold no source part.
    values: Vec<f64>,
    /// Level 0 only: nodal smooth remainder `v = g − s`.
    remainder: Option<Vec<f64>>,
    inside: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct ZoomSolution {
    levels: Vec<Level>,
    source: SmoothedSource,
}

impl ZoomSolution {
    fn solve(dom: &ImageDomain, pole: Complex64, cfg: &ZoomConfig, cells: usize) -> Result<Self> {
        if cfg.levels == 0 || cells < 16 || !(cfg.factor > 1.0) {
            return Err(invalid("zoom", "needs levels >= 1, cells >= 16, factor > 1"));
        }
        if !dom.contains(pole) {
            return Err(Error::OutsideDomain {
                x: pole.re,
                y: pole.im,
                reason: "pole must lie in D".into(),
            });
        }
        let bb = dom.bounding_box();
        let extent = (bb.x_max - bb.x_min).max(bb.y_max - bb.y_min);
        let h0 = extent / cells as f64;
        let d = dom.boundary_distance(pole);
        if d < 10.0 * h0 {
            return Err(invalid("a", "pole too close to the boundary of D for level 0"));
        }
        let source = SmoothedSource { a: pole, rho: 0.9 * d };
        let x0 = bb.x_min - 2.0 * h0;
        let y0 = bb.y_min - 2.0 * h0;
        let grid0 = GridSpec {
            nx: ((bb.x_max - x0) / h0).ceil() as usize + 3,
            ny: ((bb.y_max - y0) / h0).ceil() as usize + 3,
            h: h0,
            x0,
            y0,
        };
        let solved = solve_dirichlet(dom, grid0, |z| source.laplacian(z), None::<fn(Complex64) -> f64>)?;
        let v0 = solved.values;
        let g0: Vec<f64> = (0..grid0.len())
            .map(|k| source.value(grid0.node(k % grid0.nx, k / grid0.nx)) + v0[k])
            .collect();
        let mut levels = vec![Level {
            half_width: f64::INFINITY,
            grid: grid0,
            values: g0,
            remainder: Some(v0),
            inside: solved.inside,
        }];
        let mut rho = 0.5 * extent;
        for _ in 1..cfg.levels {
            rho /= cfg.factor;
            if (pole.norm() - source.rho) < rho * std::f64::consts::SQRT_2 {
                return Err(invalid("zoom", "a zoom window overlaps the pole's cut-off disk"));
            }
            let h = 2.0 * rho / cells as f64;
            let grid = GridSpec {
                nx: cells + 1,
                ny: cells + 1,
                h,
                x0: -rho,
                y0: -rho,
            };
            let parent = levels.last().expect("level 0 exists");
            let solved = solve_dirichlet(
                dom,
                grid,
                |_| 0.0,
                Some(|z: Complex64| parent.grid.interpolate(&parent.values, z)),
            )?;
            levels.push(Level {
                half_width: rho,
                grid,
                values: solved.values,
                remainder: None,
                inside: solved.inside,
            });
        }
        Ok(Self { levels, source })
    }

    /// Level used for `w`: the deepest whose window contains `w` well inside.
    pub fn level_for(&self, w: Complex64) -> usize {
        let m = w.re.abs().max(w.im.abs());
        let mut best = 0;
        for (k, lvl) in self.levels.iter().enumerate().skip(1) {
            if m <= 0.5 * lvl.half_width {
                best = k;
            }
        }
        best
    }

    pub fn eval(&self, w: Complex64) -> f64 {
        let k = self.level_for(w);
        let lvl = &self.levels[k];
        match &lvl.remainder {
            Some(v) => self.source.value(w) + lvl.grid.interpolate_cubic(v, &lvl.inside, w),
            None => lvl.grid.interpolate_cubic(&lvl.values, &lvl.inside, w),
        }
    }

    /// Half-width of the smallest window.
    pub fn finest_window(&self) -> f64 {
        self.levels.last().map(|l| l.half_width).unwrap_or(f64::INFINITY)
    }
}

/// Zoomed Green function at `cells` and `2·cells` per level.
#[derive(Debug, Clone)]
pub struct ZoomGreen {
    pub coarse: ZoomSolution,
    pub fine: ZoomSolution,
}

impl ZoomGreen {
    pub fn solve(dom: &ImageDomain, pole: Complex64, cfg: &ZoomConfig) -> Result<Self> {
        Ok(Self {
            coarse: ZoomSolution::solve(dom, pole, cfg, cfg.cells)?,
            fine: ZoomSolution::solve(dom, pole, cfg, 2 * cfg.cells)?,
        })
    }

    pub fn estimate(&self, w: Complex64) -> GreenEstimate {
        let f = self.fine.eval(w);
        let c = self.coarse.eval(w);
        GreenEstimate {
            value: f.min(0.0),
            error: (f - c).abs(),
            method: GreenMethod::FiniteDifference,
        }
    }
}

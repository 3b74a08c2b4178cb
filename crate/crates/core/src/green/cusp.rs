//! Green function of the truncated cusp `Γ ∩ Δ_R` with its pole on the axis,
//! by piecewise-linear elements on a body-fitted mesh.
//!
//! The upper half `{x_min < x < R, 0 < y < W(x)}` with
//! `W(x) = min((x/C)^{1/α}, (R² − x²)^{1/2})` is meshed by columns
//! `(x_i, W(x_i)·j/M)`. The axis carries the natural (symmetry) condition.
//! Columns are graded so that `Δx ≤ q2·W(x)`, which keeps the exponential
//! decay along the narrowing channel resolved. The tip `x < x_min` is cut
//! off with zero data; `x_min` is chosen so that the cut changes `g` at the
//! smallest query abscissa by a factor of about `e^{−margin}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::source::SmoothedSource;
use super::{GreenEstimate, GreenMethod};
use crate::conformal::hopf_constant;
use crate::error::{invalid, Error, Result};
use crate::geometry::{CuspParams, PlanarDomain, TruncatedCusp};
use crate::linalg::{conjugate_gradient, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuspFemConfig {
    /// `Δx ≤ q1·x`.
    pub q1: f64,
    /// `Δx ≤ q2·W(x)`.
    pub q2: f64,
    /// `Δx ≤ q3`.
    pub q3: f64,
    /// Element rows across the half width.
    pub rows: usize,
    /// Decay margin (in units of the exponent) for the tip cut-off.
    pub margin: f64,
    /// Relative residual for the conjugate-gradient solve.
    pub cg_tol: f64,
}

impl Default for CuspFemConfig {
    fn default() -> Self {
        Self {
            q1: 0.02,
            q2: 0.1,
            q3: 0.01,
            rows: 24,
            margin: 10.0,
            cg_tol: 1e-13,
        }
    }
}

/// Column mesh of the upper half cusp.
#[derive(Debug, Clone, PartialEq)]
pub struct CuspMesh {
    pub xs: Vec<f64>,
    pub ws: Vec<f64>,
    pub rows: usize,
}

fn half_width(params: CuspParams, radius: f64, x: f64) -> f64 {
    params.half_width(x).min((radius * radius - x * x).max(0.0).sqrt())
}

impl CuspMesh {
    /// Marches from `x_min` to `R`, with every `forced` abscissa a column.
    pub fn build(params: CuspParams, radius: f64, x_min: f64, forced: &[f64], cfg: &CuspFemConfig) -> Result<Self> {
        if !(x_min > 0.0 && x_min < radius) {
            return Err(invalid("x_min", "must lie in (0, R)"));
        }
        let step = |x: f64| {
            (cfg.q1 * x)
                .min(cfg.q2 * half_width(params, radius, x).max(1e-3 * x))
                .min(cfg.q3)
        };
        let mut forced: Vec<f64> = forced.iter().copied().filter(|&f| f > x_min && f < radius).collect();
        forced.sort_by(f64::total_cmp);
        forced.dedup();
        let mut xs = vec![x_min];
        let mut x = x_min;
        let mut next_forced = forced.iter().peekable();
        while x < radius {
            let dx = step(x);
            let mut nx = x + dx;
            if let Some(&&f) = next_forced.peek() {
                if f <= nx + 0.3 * dx {
                    nx = f;
                    next_forced.next();
                }
            }
            if nx >= radius - 0.3 * dx {
                nx = radius;
            }
            xs.push(nx);
            x = nx;
        }
        let ws = xs.iter().map(|&x| half_width(params, radius, x)).collect();
        Ok(Self { xs, ws, rows: cfg.rows })
    }

    /// Midpoints in `x`, twice the rows.
    pub fn refined(&self, params: CuspParams, radius: f64) -> Self {
        let mut xs = Vec::with_capacity(2 * self.xs.len());
        for w in self.xs.windows(2) {
            xs.push(w[0]);
            xs.push(0.5 * (w[0] + w[1]));
        }
        xs.push(*self.xs.last().expect("nonempty mesh"));
        let ws = xs.iter().map(|&x| half_width(params, radius, x)).collect();
        Self {
            xs,
            ws,
            rows: 2 * self.rows,
        }
    }

    pub fn node_count(&self) -> usize {
        self.xs.len() * (self.rows + 1)
    }

    fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.xs[i], self.ws[i] * j as f64 / self.rows as f64)
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.rows + 1) + j
    }

    /// Bilinear interpolation in `(x, η = |y|/W)` of nodal values.
    pub fn interpolate(&self, values: &[f64], z: Complex64) -> f64 {
        let (x, y) = (z.re, z.im.abs());
        let n = self.xs.len();
        if !(x > self.xs[0] && x < self.xs[n - 1]) {
            return 0.0;
        }
        let i = self.xs.partition_point(|&v| v <= x) - 1;
        let tau = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        let w = (1.0 - tau) * self.ws[i] + tau * self.ws[i + 1];
        if !(w > 0.0) {
            return 0.0;
        }
        let eta = y / w * self.rows as f64;
        if eta >= self.rows as f64 {
            return 0.0;
        }
        let j = eta.floor() as usize;
        let sig = eta - j as f64;
        let at = |i: usize, j: usize| values[self.idx(i, j)];
        (1.0 - tau) * (1.0 - sig) * at(i, j)
            + tau * (1.0 - sig) * at(i + 1, j)
            + (1.0 - tau) * sig * at(i, j + 1)
            + tau * sig * at(i + 1, j + 1)
    }
}

#[derive(Debug, Clone)]
pub struct CuspFemSolution {
    pub mesh: CuspMesh,
    /// Nodal smooth remainder `v = g − s`.
    pub remainder: Vec<f64>,
    pub cg_iterations: usize,
}

impl CuspFemSolution {
    fn solve(mesh: CuspMesh, source: &SmoothedSource, cg_tol: f64) -> Result<Self> {
        let nx = mesh.xs.len();
        let m = mesh.rows;
        let total = mesh.node_count();
        let is_unknown = |i: usize, j: usize| i > 0 && i + 1 < nx && j < m;
        let mut index = vec![usize::MAX; total];
        let mut n = 0;
        for i in 0..nx {
            for j in 0..=m {
                if is_unknown(i, j) {
                    index[mesh.idx(i, j)] = n;
                    n += 1;
                }
            }
        }
        let mut trip = Vec::with_capacity(7 * n);
        let mut b = vec![0.0; n];
        let mut add_triangle = |p: [usize; 3], pts: [Complex64; 3]| {
            let e = [pts[2] - pts[1], pts[0] - pts[2], pts[1] - pts[0]];
            let area = 0.5 * (e[2].re * (-e[1]).im - e[2].im * (-e[1]).re);
            let area = area.abs();
            if !(area > 1e-300) {
                return;
            }
            let mids = [
                0.5 * (pts[1] + pts[2]),
                0.5 * (pts[2] + pts[0]),
                0.5 * (pts[0] + pts[1]),
            ];
            let f: Vec<f64> = mids.iter().map(|&z| source.laplacian(z)).collect();
            for a in 0..3 {
                let ra = index[p[a]];
                if ra == usize::MAX {
                    continue;
                }
                // Edge-midpoint rule: φ_a is 1/2 at the two adjacent midpoints.
                let load = area / 3.0 * 0.5 * (f[(a + 1) % 3] + f[(a + 2) % 3]);
                b[ra] += load;
                for c in 0..3 {
                    let rc = index[p[c]];
                    if rc == usize::MAX {
                        continue;
                    }
                    let kac = (e[a].re * e[c].re + e[a].im * e[c].im) / (4.0 * area);
                    trip.push((ra, rc, kac));
                }
            }
        };
        for i in 0..nx - 1 {
            for j in 0..m {
                let ids = [
                    mesh.idx(i, j),
                    mesh.idx(i + 1, j),
                    mesh.idx(i + 1, j + 1),
                    mesh.idx(i, j + 1),
                ];
                let pts = [
                    mesh.node(i, j),
                    mesh.node(i + 1, j),
                    mesh.node(i + 1, j + 1),
                    mesh.node(i, j + 1),
                ];
                if (pts[0] - pts[2]).norm() <= (pts[1] - pts[3]).norm() {
                    add_triangle([ids[0], ids[1], ids[2]], [pts[0], pts[1], pts[2]]);
                    add_triangle([ids[0], ids[2], ids[3]], [pts[0], pts[2], pts[3]]);
                } else {
                    add_triangle([ids[0], ids[1], ids[3]], [pts[0], pts[1], pts[3]]);
                    add_triangle([ids[1], ids[2], ids[3]], [pts[1], pts[2], pts[3]]);
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, trip);
        let mut x = vec![0.0; n];
        let rep = conjugate_gradient(&a, &b, &mut x, cg_tol, 50 * n + 1000)?;
        let mut remainder = vec![0.0; total];
        for k in 0..total {
            if index[k] != usize::MAX {
                remainder[k] = x[index[k]];
            }
        }
        Ok(Self {
            mesh,
            remainder,
            cg_iterations: rep.iterations,
        })
    }

    fn eval(&self, source: &SmoothedSource, z: Complex64) -> f64 {
        source.value(z) + self.mesh.interpolate(&self.remainder, z)
    }
}

/// Cusp Green function on a mesh and its refinement.
#[derive(Debug, Clone)]
pub struct CuspFem {
    pub params: CuspParams,
    pub radius: f64,
    pub pole: f64,
    pub source: SmoothedSource,
    pub coarse: CuspFemSolution,
    pub fine: CuspFemSolution,
}

impl CuspFem {
    /// Solves with pole at `pole` on the axis; `t_min` is the smallest axis
    /// abscissa that will be queried and `forced` lists abscissae that must
    /// be mesh columns.
    pub fn solve(
        params: CuspParams,
        radius: f64,
        pole: f64,
        t_min: f64,
        forced: &[f64],
        cfg: &CuspFemConfig,
    ) -> Result<Self> {
        let dom = TruncatedCusp::new(params, radius)?;
        let a = Complex64::new(pole, 0.0);
        if !dom.contains(a) {
            return Err(Error::OutsideDomain {
                x: pole,
                y: 0.0,
                reason: "pole must lie in the cusp".into(),
            });
        }
        if !(t_min > 0.0 && t_min < pole) {
            return Err(invalid("t_min", "must lie in (0, pole)"));
        }
        let k = params.k();
        let big_a = hopf_constant(params);
        let x_min = (t_min.powf(-k) + cfg.margin / big_a).powf(-1.0 / k);
        let source = SmoothedSource {
            a,
            rho: 0.9 * dom.boundary_distance(a),
        };
        let mut all_forced = forced.to_vec();
        all_forced.push(pole);
        let mesh = CuspMesh::build(params, radius, x_min, &all_forced, cfg)?;
        let fine_mesh = mesh.refined(params, radius);
        Ok(Self {
            params,
            radius,
            pole,
            source,
            coarse: CuspFemSolution::solve(mesh, &source, cfg.cg_tol)?,
            fine: CuspFemSolution::solve(fine_mesh, &source, cfg.cg_tol)?,
        })
    }

    pub fn value(&self, z: Complex64) -> f64 {
        self.fine.eval(&self.source, z).min(0.0)
    }

    pub fn estimate(&self, z: Complex64) -> GreenEstimate {
        let f = self.fine.eval(&self.source, z);
        let c = self.coarse.eval(&self.source, z);
        GreenEstimate {
            value: f.min(0.0),
            error: (f - c).abs(),
            method: GreenMethod::FiniteDifference,
        }
    }

    /// Left end of the mesh; values left of it are set to 0.
    pub fn x_min(&self) -> f64 {
        self.fine.mesh.xs[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_contains_forced_columns() {
        let p = CuspParams::new(0.5, 0.7).unwrap();
        let cfg = CuspFemConfig::default();
        let forced = [0.01, 0.05, 0.123];
        let m = CuspMesh::build(p, 1.0, 1e-3, &forced, &cfg).unwrap();
        for f in forced {
            assert!(m.xs.contains(&f));
        }
        assert!(m.xs.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*m.xs.last().unwrap(), 1.0);
        let r = m.refined(p, 1.0);
        for f in forced {
            assert!(r.xs.contains(&f));
        }
    }

    #[test]
    fn green_is_negative_and_decays_toward_tip() {
        let p = CuspParams::new(0.5, 0.7).unwrap();
        let cfg = CuspFemConfig {
            rows: 8,
            q2: 0.2,
            ..Default::default()
        };
        let ts = [0.02, 0.05, 0.1, 0.2];
        let g = CuspFem::solve(p, 1.0, 0.5, 0.02, &ts, &cfg).unwrap();
        let vals: Vec<f64> = ts.iter().map(|&t| g.value(Complex64::new(t, 0.0))).collect();
        assert!(vals.iter().all(|&v| v < 0.0));
        assert!(vals.windows(2).all(|w| w[0].abs() < w[1].abs()));
    }
}

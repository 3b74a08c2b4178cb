//! Newtonian capacities in `ℝ^m` for sets symmetric about the last axis,
//! the dyadic shells `E_k` of a closed cusp with their covering boxes `F_k`,
//! and the Wiener series `Σ 2^{k(m−2)} Cap(E_k)`.
//!
//! Capacity is `inf ∫|∇φ|²` over `φ ≥ 1` on the set. Every set handled here
//! depends only on `ρ = |(x₁,…,x_{m−1})|` and `s = x_m`, so the minimizer
//! does too and the energy becomes `|S^{m−2}| ∫∫ (φ_ρ² + φ_s²) ρ^{m−2} dρ ds`
//! over the half plane.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::fit_line;
use crate::geometry::CuspParams;
use crate::linalg::{conjugate_gradient, CsrMatrix};
use crate::sampling::trial_rng;

/// Area of the unit sphere in `ℝ^d`.
fn sphere_area(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        5 => 8.0 * PI * PI / 3.0,
        6 => PI * PI * PI,
        _ => unreachable!("dimension checked by callers"),
    }
}

fn check_dimension(m: usize) -> Result<()> {
    if !(3..=6).contains(&m) {
        return Err(invalid("m", format!("must lie in 3..=6, got {m}")));
    }
    Ok(())
}

/// `∫|∇φ|²` of the equilibrium potential of the ball of radius `r` in `ℝ^m`.
pub fn ball_capacity(m: usize, r: f64) -> Result<f64> {
    check_dimension(m)?;
    Ok((m - 2) as f64 * sphere_area(m) * r.powi(m as i32 - 2))
}

/// A compact set invariant under rotations fixing the last axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AxiSet {
    Empty,
    /// Ball centred at `s = center` on the axis.
    Ball {
        center: f64,
        radius: f64,
    },
    /// `B̄_radius × [lo, hi]`.
    Cylinder {
        radius: f64,
        lo: f64,
        hi: f64,
    },
    /// `E_k`: the closed cusp `s ≥ Cρ^α` cut to `2^{−k−1} ≤ |x| ≤ 2^{−k}`.
    CuspShell {
        params: CuspParams,
        k: u32,
    },
}

impl AxiSet {
    pub fn contains_axi(&self, rho: f64, s: f64) -> bool {
        match *self {
            AxiSet::Empty => false,
            AxiSet::Ball { center, radius } => rho.hypot(s - center) <= radius,
            AxiSet::Cylinder { radius, lo, hi } => rho <= radius && (lo..=hi).contains(&s),
            AxiSet::CuspShell { params, k } => {
                let r = rho.hypot(s);
                let outer = 0.5f64.powi(k as i32);
                s >= params.c() * rho.powf(params.alpha()) && r >= outer / 2.0 && r <= outer
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let (rho, s) = split(x);
        self.contains_axi(rho, s)
    }

    /// `(ρ_max, s_lo, s_hi)` of the set, or `None` when empty.
    pub fn bounds(&self) -> Option<(f64, f64, f64)> {
        match *self {
            AxiSet::Empty => None,
            AxiSet::Ball { center, radius } => Some((radius, center - radius, center + radius)),
            AxiSet::Cylinder { radius, lo, hi } => Some((radius, lo, hi)),
            AxiSet::CuspShell { params, k } => {
                let outer = 0.5f64.powi(k as i32);
                let r = (outer / params.c()).powf(1.0 / params.alpha()).min(outer);
                // s² = |x|² − ρ² with |x| ≥ 2^{−k−1}.
                let lo = ((outer / 2.0).powi(2) - r * r).max(0.0).sqrt();
                Some((r, lo, outer))
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        self.bounds().map_or(0.0, |(r, lo, hi)| (2.0 * r).hypot(hi - lo))
    }

    /// Largest `|x|` over the set.
    pub fn extent(&self) -> f64 {
        self.bounds().map_or(0.0, |(r, lo, hi)| r.hypot(lo.abs().max(hi.abs())))
    }

    /// Exact distance to the set, where one is available.
    pub fn distance(&self, x: &[f64]) -> Option<f64> {
        let (rho, s) = split(x);
        match *self {
            AxiSet::Empty => Some(f64::INFINITY),
            AxiSet::Ball { center, radius } => Some((rho.hypot(s - center) - radius).max(0.0)),
            AxiSet::Cylinder { radius, lo, hi } => {
                let dr = (rho - radius).max(0.0);
                let ds = (lo - s).max(s - hi).max(0.0);
                Some(dr.hypot(ds))
            }
            AxiSet::CuspShell { .. } => None,
        }
    }
}

fn split(x: &[f64]) -> (f64, f64) {
    let (head, last) = x.split_at(x.len() - 1);
    (head.iter().map(|v| v * v).sum::<f64>().sqrt(), last[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMethod {
    VariationalGrid,
    HittingMc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    pub value: f64,
    pub error: f64,
    pub method: CapacityMethod,
    /// Set when a Monte-Carlo run saw no hits on a nonempty set.
    pub inconclusive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationalConfig {
    pub m: usize,
    /// Cells across the set's radius on the coarse grid.
    pub cells_across: usize,
    /// Growth ratio of cells away from the set.
    pub grading: f64,
    /// Half-width of the Dirichlet box in units of the set diameter.
    pub outer_box_scale: f64,
    pub cg_tol: f64,
    pub max_unknowns: usize,
}

impl Default for VariationalConfig {
    fn default() -> Self {
        Self {
            m: 4,
            cells_across: 16,
            grading: 1.2,
            outer_box_scale: 8.0,
            cg_tol: 1e-8,
            max_unknowns: 4_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationalCapacity {
    /// Fine-grid energy; the error adds the `(h, h/2)` difference and the
    /// outer-box doubling difference.
    pub estimate: CapacityEstimate,
    pub coarse: f64,
    pub fine: f64,
    /// Fine-grid energy with the Dirichlet box twice as far out.
    pub outer_doubled: f64,
    pub unknowns: usize,
    pub cg_iterations: usize,
}

/// Points from `from` to `to` with first step `h0`, steps growing by `q`
/// up to `cap`, and the last step absorbed so the end lands on `to`.
fn graded(from: f64, to: f64, h0: f64, q: f64, cap: f64) -> Vec<f64> {
    let dir = (to - from).signum();
    let len = (to - from).abs();
    let mut pts = vec![from];
    let (mut pos, mut h) = (0.0, h0.min(cap));
    while pos + h < len - 0.5 * h {
        pos += h;
        pts.push(from + dir * pos);
        h = (h * q).min(cap);
    }
    pts.push(to);
    pts
}

/// Grid lines through `[lo, hi]` graded from both ends, then out to the box.
fn axis_lines(lo: f64, hi: f64, box_lo: f64, box_hi: f64, h0: f64, q: f64, inner_cap: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut below = graded(lo, box_lo, h0, q, f64::INFINITY);
    below.reverse();
    v.extend_from_slice(&below[..below.len() - 1]);
    if hi > lo {
        let mid = 0.5 * (lo + hi);
        let left = graded(lo, mid, h0, q, inner_cap);
        let mut right = graded(hi, mid, h0, q, inner_cap);
        right.reverse();
        v.extend_from_slice(&left);
        v.extend_from_slice(&right[1..]);
    } else {
        v.push(lo);
    }
    v.extend_from_slice(&graded(hi, box_hi, h0, q, f64::INFINITY)[1..]);
    v
}

fn bisect(v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * v.len());
    for w in v.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(*v.last().expect("nonempty"));
    out
}

struct TensorGrid {
    rho: Vec<f64>,
    s: Vec<f64>,
}

impl TensorGrid {
    fn build(set: &AxiSet, cfg: &VariationalConfig, box_scale: f64) -> Self {
        let (r, lo, hi) = set.bounds().expect("nonempty set");
        let h0 = r / cfg.cells_across as f64;
        let half = box_scale * set.diameter();
        let centre = 0.5 * (lo + hi);
        let mut rho = graded(0.0, r, h0, 1.0, h0);
        rho.extend_from_slice(&graded(r, half, h0, cfg.grading, f64::INFINITY)[1..]);
        // Cylinders only need fine cells near their ends; curved sets need
        // them everywhere along the axis.
        let inner_cap = match set {
            AxiSet::Cylinder { .. } => (hi - lo) / cfg.cells_across as f64,
            _ => h0,
        }
        .max(h0);
        let s = axis_lines(lo, hi, centre - half, centre + half, h0, cfg.grading, inner_cap);
        Self { rho, s }
    }

    fn refined(&self) -> Self {
        Self {
            rho: bisect(&self.rho),
            s: bisect(&self.s),
        }
    }
}

/// Weighted edge energies of the `(ρ, s)` grid: `ρ^{m−2}` averaged over
/// each interval, dual lengths halved at the ends.
fn solve_grid(set: &AxiSet, grid: &TensorGrid, cfg: &VariationalConfig) -> Result<(f64, usize, usize)> {
    let (nr, ns) = (grid.rho.len(), grid.s.len());
    let p = cfg.m as i32 - 1;
    let w_mean = |a: f64, b: f64| (b.powi(p) - a.powi(p)) / (p as f64 * (b - a));
    let w_int = |a: f64, b: f64| (b.powi(p) - a.powi(p)) / p as f64;
    let dual = |v: &[f64], i: usize| -> (f64, f64) {
        let a = if i == 0 { v[0] } else { 0.5 * (v[i - 1] + v[i]) };
        let b = if i + 1 == v.len() {
            v[i]
        } else {
            0.5 * (v[i] + v[i + 1])
        };
        (a, b)
    };
    let idx = |i: usize, j: usize| i * ns + j;
    // -1: outer boundary, -2: in the set, otherwise the unknown index.
    let mut label = vec![-1i64; nr * ns];
    let mut n = 0usize;
    for i in 0..nr {
        for j in 0..ns {
            if set.contains_axi(grid.rho[i], grid.s[j]) {
                label[idx(i, j)] = -2;
            } else if i + 1 < nr && j > 0 && j + 1 < ns {
                label[idx(i, j)] = n as i64;
                n += 1;
            }
        }
    }
    if n > cfg.max_unknowns {
        return Err(Error::GridTooLarge {
            unknowns: n,
            budget: cfg.max_unknowns,
        });
    }
    let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * nr * ns);
    for i in 0..nr {
        for j in 0..ns {
            if i + 1 < nr {
                let (a, b) = dual(&grid.s, j);
                let c = w_mean(grid.rho[i], grid.rho[i + 1]) * (b - a) / (grid.rho[i + 1] - grid.rho[i]);
                edges.push((idx(i, j), idx(i + 1, j), c));
            }
            if j + 1 < ns {
                let (a, b) = dual(&grid.rho, i);
                let c = w_int(a, b) / (grid.s[j + 1] - grid.s[j]);
                edges.push((idx(i, j), idx(i, j + 1), c));
            }
        }
    }
    let mut trip = Vec::with_capacity(4 * edges.len());
    let mut rhs = vec![0.0; n];
    for &(u, v, c) in &edges {
        match (label[u], label[v]) {
            (a, b) if a >= 0 && b >= 0 => {
                let (a, b) = (a as usize, b as usize);
                trip.extend([(a, a, c), (b, b, c), (a, b, -c), (b, a, -c)]);
            }
            (a, b) if a >= 0 => {
                trip.push((a as usize, a as usize, c));
                if b == -2 {
                    rhs[a as usize] += c;
                }
            }
            (a, b) if b >= 0 => {
                trip.push((b as usize, b as usize, c));
                if a == -2 {
                    rhs[b as usize] += c;
                }
            }
            _ => {}
        }
    }
    let mat = CsrMatrix::from_triplets(n, trip);
    let mut x = vec![0.0; n];
    let rep = conjugate_gradient(&mat, &rhs, &mut x, cfg.cg_tol, 50 * n + 1000)?;
    let value = |k: usize| match label[k] {
        -2 => 1.0,
        -1 => 0.0,
        u => x[u as usize],
    };
    let energy: f64 = edges.iter().map(|&(u, v, c)| c * (value(u) - value(v)).powi(2)).sum();
    Ok((sphere_area(cfg.m - 1) * energy, n, rep.iterations))
}

/// Minimizes the discrete Dirichlet energy with `φ = 1` on the set and
/// `φ = 0` on a box `outer_box_scale` diameters out, on a graded grid and
/// its bisection, and once more with the box doubled.
pub fn capacity_variational(set: &AxiSet, cfg: &VariationalConfig) -> Result<VariationalCapacity> {
    check_dimension(cfg.m)?;
    if cfg.outer_box_scale < 8.0 {
        return Err(invalid("outer_box_scale", "must be at least 8 set diameters"));
    }
    if cfg.cells_across < 2 || !(cfg.grading >= 1.0 && cfg.grading <= 2.0) {
        return Err(invalid("grid", "needs cells_across >= 2 and grading in [1, 2]"));
    }
    if !(cfg.cg_tol > 0.0 && cfg.cg_tol < 1e-2) {
        return Err(invalid("cg_tol", "must lie in (0, 1e-2)"));
    }
    let Some((r, lo, hi)) = set.bounds() else {
        return Err(invalid("set", "the mask is empty"));
    };
    if !(r > 0.0 && hi >= lo) || !r.is_normal() {
        return Err(invalid("set", "degenerate set"));
    }
    let coarse_grid = TensorGrid::build(set, cfg, cfg.outer_box_scale);
    let fine_grid = coarse_grid.refined();
    let far_grid = TensorGrid::build(set, cfg, 2.0 * cfg.outer_box_scale).refined();
    let (coarse, _, _) = solve_grid(set, &coarse_grid, cfg)?;
    let (fine, unknowns, iters) = solve_grid(set, &fine_grid, cfg)?;
    let (outer_doubled, _, _) = solve_grid(set, &far_grid, cfg)?;
    Ok(VariationalCapacity {
        estimate: CapacityEstimate {
            value: fine,
            error: (fine - coarse).abs() + (fine - outer_doubled).abs(),
            method: CapacityMethod::VariationalGrid,
            inconclusive: false,
        },
        coarse,
        fine,
        outer_doubled,
        unknowns,
        cg_iterations: iters,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingConfig {
    pub m: usize,
    pub launch_radius: f64,
    pub outer_radius: f64,
    pub trials: usize,
    pub seed: u64,
    /// Absorption shell as a fraction of the set diameter.
    pub shell_fraction: f64,
    pub max_steps: usize,
}

impl HittingConfig {
    /// Launch at four times the set's extent, outer sphere eight launches out.
    pub fn for_set(set: &AxiSet, m: usize, trials: usize, seed: u64) -> Self {
        let launch = 4.0 * set.extent();
        Self {
            m,
            launch_radius: launch,
            outer_radius: 8.0 * launch,
            trials,
            seed,
            shell_fraction: 1e-4,
            max_steps: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingEstimate {
    pub probability: f64,
    pub stderr: f64,
    pub hits: usize,
    pub trials: usize,
    /// Condenser capacity relative to the outer sphere,
    /// `(m−2)|S^{m−1}| P / (R_L^{2−m} − R_out^{2−m})`.
    pub capacity: CapacityEstimate,
}

/// Probability that Brownian motion started uniformly on the launch sphere
/// hits the set before leaving the outer sphere, by walk on spheres. The
/// spherical mean of the outer ball's Green function over the launch sphere
/// is `R_L^{2−m} − R_out^{2−m}` for every pole inside it, which turns the
/// probability into a capacity.
pub fn capacity_hitting_mc(set: &AxiSet, cfg: &HittingConfig) -> Result<HittingEstimate> {
    check_dimension(cfg.m)?;
    let m = cfg.m;
    if set.extent() > cfg.launch_radius / 4.0 {
        return Err(invalid("launch_radius", "the set must lie within launch_radius/4"));
    }
    if !(cfg.outer_radius >= 8.0 * cfg.launch_radius && cfg.launch_radius > 0.0) {
        return Err(invalid("outer_radius", "must be at least 8 launch radii"));
    }
    if cfg.trials < 10_000 {
        return Err(invalid("trials", "must be at least 1e4"));
    }
    if set.distance(&vec![0.0; m]).is_none() {
        return Err(invalid("set", "no distance oracle for this set"));
    }
    let shell = cfg.shell_fraction * set.diameter().max(f64::MIN_POSITIVE);
    let out_shell = cfg.shell_fraction * cfg.outer_radius;
    let outcomes: Vec<Option<bool>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(cfg.seed, i as u64);
            let mut x = random_direction(&mut rng, m);
            x.iter_mut().for_each(|v| *v *= cfg.launch_radius);
            for _ in 0..cfg.max_steps {
                let d_set = set.distance(&x).expect("checked above");
                if d_set <= shell {
                    return Some(true);
                }
                let d_out = cfg.outer_radius - x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if d_out <= out_shell {
                    return Some(false);
                }
                let step = d_set.min(d_out);
                let dir = random_direction(&mut rng, m);
                x.iter_mut().zip(&dir).for_each(|(v, d)| *v += step * d);
            }
            None
        })
        .collect();
    let failed = outcomes.iter().filter(|o| o.is_none()).count();
    if failed * 100 > cfg.trials {
        return Err(Error::WalkBudgetExceeded {
            failed,
            trials: cfg.trials,
        });
    }
    let n = (cfg.trials - failed) as f64;
    let hits = outcomes.iter().filter(|o| **o == Some(true)).count();
    let p = hits as f64 / n;
    let stderr = (p * (1.0 - p) / n).sqrt();
    let mean_green = cfg.launch_radius.powi(2 - m as i32) - cfg.outer_radius.powi(2 - m as i32);
    let scale = (m - 2) as f64 * sphere_area(m) / mean_green;
    Ok(HittingEstimate {
        probability: p,
        stderr,
        hits,
        trials: cfg.trials,
        capacity: CapacityEstimate {
            value: scale * p,
            error: scale * stderr,
            method: CapacityMethod::HittingMc,
            inconclusive: hits == 0 && !matches!(set, AxiSet::Empty),
        },
    })
}

fn random_direction<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Dyadic shell `E_k` of the closed cusp `{x_m ≥ C|x'|^α}` in `ℝ^m` and
/// the box `F_k = B̄_{r_k} × [2^{−k−2}, 2^{−k+1}]`, `r_k = (2^{−k}/C)^{1/α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    pub k: u32,
    pub m: usize,
    pub params: CuspParams,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub box_radius: f64,
    pub box_lo: f64,
    pub box_hi: f64,
}

impl ShellSpec {
    pub fn shell(&self) -> AxiSet {
        AxiSet::CuspShell {
            params: self.params,
            k: self.k,
        }
    }

    pub fn covering_box(&self) -> AxiSet {
        AxiSet::Cylinder {
            radius: self.box_radius,
            lo: self.box_lo,
            hi: self.box_hi,
        }
    }

    /// `T(y) = (r_k y', 2^{−k} y_m)`, which maps `B̄₁ × [1/4, 2]` onto `F_k`.
    pub fn affine_map(&self, y: &[f64]) -> Vec<f64> {
        let (head, last) = y.split_at(y.len() - 1);
        head.iter()
            .map(|v| self.box_radius * v)
            .chain(std::iter::once(self.outer_radius * last[0]))
            .collect()
    }
}

pub fn shell_family(params: CuspParams, n: usize, ks: &[u32]) -> Result<Vec<ShellSpec>> {
    if n < 2 {
        return Err(invalid("n", "the box construction needs n >= 2"));
    }
    let m = 2 * n;
    ks.iter()
        .map(|&k| {
            if k == 0 || k > 1000 {
                return Err(invalid("k", format!("must lie in 1..=1000, got {k}")));
            }
            let outer = 0.5f64.powi(k as i32);
            let r = (outer / params.c()).powf(1.0 / params.alpha());
            if !r.is_normal() {
                return Err(invalid(
                    "k",
                    format!("box radius (2^-{k}/C)^(1/alpha) is not representable"),
                ));
            }
            Ok(ShellSpec {
                k,
                m,
                params,
                inner_radius: outer / 2.0,
                outer_radius: outer,
                box_radius: r,
                box_lo: outer / 4.0,
                box_hi: 2.0 * outer,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WienerMethod {
    /// Variational capacity of the boxes `F_k`.
    BoxVariational,
    /// Variational capacity of the shells `E_k` themselves.
    ShellVariational,
    /// Hitting probabilities of the boxes `F_k`.
    BoxHitting { trials: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesVerdict {
    Converging,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Thinness {
    Thin,
    NotThin,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WienerRow {
    pub k: u32,
    pub cap: CapacityEstimate,
    pub weight: f64,
    pub term: f64,
    pub partial_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerReport {
    pub params: CuspParams,
    pub n: usize,
    pub rows: Vec<WienerRow>,
    /// `term_{k+1}/term_k` for consecutive rows.
    pub consecutive_ratios: Vec<f64>,
    /// `exp` of the slope of `log term` against `k`.
    pub fitted_term_ratio: f64,
    pub fitted_ratio_stderr: f64,
    /// `2^{−(2n−3)(1/α−1)}`.
    pub predicted_ratio: f64,
    pub verdict: SeriesVerdict,
    pub thinness: Thinness,
    pub note: Option<String>,
}

impl WienerReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,cap,weight,term,partial_sum\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e}",
                r.k, r.cap.value, r.weight, r.term, r.partial_sum
            );
        }
        s
    }
}

/// Builds the Wiener series over `ks` for the closed cusp in `ℂ^n = ℝ^{2n}`.
/// The planar case `n = 1` is not computed: the complement of a closed
/// planar cusp is simply connected, so the vertex is not thin.
pub fn wiener_report(
    params: CuspParams,
    n: usize,
    ks: &[u32],
    method: WienerMethod,
    cfg: &VariationalConfig,
) -> Result<WienerReport> {
    let predicted_ratio = 2f64.powf(-(2.0 * n as f64 - 3.0) * (1.0 / params.alpha() - 1.0));
    if n == 1 {
        return Ok(WienerReport {
            params,
            n,
            rows: Vec::new(),
            consecutive_ratios: Vec::new(),
            fitted_term_ratio: f64::NAN,
            fitted_ratio_stderr: f64::NAN,
            predicted_ratio,
            verdict: SeriesVerdict::Inconclusive,
            thinness: Thinness::NotThin,
            note: Some("planar closed cusp: the complement is simply connected, so the vertex is not thin".into()),
        });
    }
    if 2 * n > 6 {
        return Err(invalid("n", "capacities are computed for 2n <= 6 only"));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let shells = shell_family(params, n, &ks)?;
    let m = 2 * n;
    let vcfg = VariationalConfig { m, ..*cfg };
    let caps: Vec<CapacityEstimate> = shells
        .par_iter()
        .map(|sh| match method {
            WienerMethod::BoxVariational => capacity_variational(&sh.covering_box(), &vcfg).map(|v| v.estimate),
            WienerMethod::ShellVariational => capacity_variational(&sh.shell(), &vcfg).map(|v| v.estimate),
            WienerMethod::BoxHitting { trials, seed } => {
                let set = sh.covering_box();
                capacity_hitting_mc(&set, &HittingConfig::for_set(&set, m, trials, seed)).map(|h| h.capacity)
            }
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(shells.len());
    let mut sum = 0.0;
    for (sh, cap) in shells.iter().zip(caps) {
        let weight = 2f64.powi(sh.k as i32 * (m as i32 - 2));
        let term = weight * cap.value;
        sum += term;
        rows.push(WienerRow {
            k: sh.k,
            cap,
            weight,
            term,
            partial_sum: sum,
        });
    }
    let consecutive_ratios: Vec<f64> = rows
        .windows(2)
        .map(|w| (w[1].term / w[0].term).powf(1.0 / (w[1].k - w[0].k) as f64))
        .collect();
    let usable = rows.iter().all(|r| r.term > 0.0 && !r.cap.inconclusive);
    let (fitted, stderr, verdict) = if rows.len() < 3 || !usable {
        (f64::NAN, f64::NAN, SeriesVerdict::Inconclusive)
    } else {
        let xs: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.term.ln()).collect();
        let fit = fit_line(&xs, &ys);
        let ratio = fit.slope.exp();
        let se = ratio * fit.slope_stderr;
        let verdict = if ratio < 1.0 - 3.0 * se {
            SeriesVerdict::Converging
        } else if ratio > 1.0 + 3.0 * se {
            SeriesVerdict::Diverging
        } else {
            SeriesVerdict::Inconclusive
        };
        (ratio, se, verdict)
    };
    Ok(WienerReport {
        params,
        n,
        rows,
        consecutive_ratios,
        fitted_term_ratio: fitted,
        fitted_ratio_stderr: stderr,
        predicted_ratio,
        verdict,
        thinness: if verdict == SeriesVerdict::Converging {
            Thinness::Thin
        } else {
            Thinness::Undetermined
        },
        note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn graded_lands_on_ends() {
        let v = graded(0.0, 1.0, 0.01, 1.3, 0.2);
        assert_eq!(v[0], 0.0);
        assert_eq!(*v.last().unwrap(), 1.0);
        assert!(v.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 0.2 * 1.5 + 1e-12));
        let d = graded(0.0, -1.0, 0.01, 1.3, f64::INFINITY);
        assert!(d.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn cylinder_distance() {
        let c = AxiSet::Cylinder {
            radius: 1.0,
            lo: 0.0,
            hi: 2.0,
        };
        assert_eq!(c.distance(&[0.0, 0.0, 3.0, 1.0]), Some(2.0));
        assert_eq!(c.distance(&[0.0, 0.0, 0.5, 1.0]), Some(0.0));
        assert_relative_eq!(c.distance(&[0.0, 0.0, 4.0, 6.0]).unwrap(), 5.0);
        assert!(c.contains(&[0.6, 0.0, 0.0, 2.0]));
        assert!(!c.contains(&[0.6, 0.9, 0.0, 2.0]));
    }

    #[test]
    fn ball_capacity_formula() {
        // m = 3: 4πR.
        assert_relative_eq!(
            ball_capacity(3, 2.0).unwrap(),
            8.0 * std::f64::consts::PI,
            max_relative = 1e-15
        );
        assert!(ball_capacity(7, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let b = AxiSet::Ball {
            center: 0.0,
            radius: 1.0,
        };
        let cfg = VariationalConfig {
            outer_box_scale: 4.0,
            ..Default::default()
        };
        assert!(capacity_variational(&b, &cfg).is_err());
        assert!(capacity_variational(&AxiSet::Empty, &VariationalConfig::default()).is_err());
        let small = VariationalConfig {
            max_unknowns: 10,
            ..Default::default()
        };
        assert!(matches!(
            capacity_variational(&b, &small),
            Err(Error::GridTooLarge { .. })
        ));
        let mut h = HittingConfig::for_set(&b, 4, 10_000, 1);
        h.launch_radius = 2.0;
        assert!(capacity_hitting_mc(&b, &h).is_err());
        let h = HittingConfig::for_set(&b, 4, 100, 1);
        assert!(capacity_hitting_mc(&b, &h).is_err());
    }

    #[test]
    fn shell_boxes() {
        let p = CuspParams::new(1.0, 0.5).unwrap();
        let sh = shell_family(p, 2, &[3]).unwrap()[0];
        assert_relative_eq!(sh.box_radius, (0.125f64).powi(2), max_relative = 1e-15);
        assert_eq!((sh.box_lo, sh.box_hi), (1.0 / 32.0, 0.25));
        assert!(shell_family(p, 1, &[3]).is_err());
        assert!(shell_family(p, 2, &[0]).is_err());
        assert!(shell_family(CuspParams::new(1.0, 0.01).unwrap(), 2, &[40]).is_err());
    }
}

//! Random streams, low-discrepancy points and one-dimensional minimisation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for one Monte-Carlo trial.
///
/// The stream depends only on `(seed, trial)`, so results do not depend on the
/// order or thread in which trials run.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Radical inverse of `index` in the given prime base (van der Corput).
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// Two-dimensional Halton point `index` (bases 2 and 3), skipping the origin.
pub fn halton2(index: u64) -> (f64, f64) {
    (radical_inverse(index + 1, 2), radical_inverse(index + 1, 3))
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
///
/// Returns `(argmin, min)` once the bracket is narrower than `tol`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut guard = 0;
    while (hi - lo).abs() > tol && guard < 200 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
        guard += 1;
    }
    let mut best = (c, fc);
    if fd < best.1 {
        best = (d, fd);
    }
    for x in [lo, hi] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Dense sweep of `f` over `params`, followed by golden-section refinement of
/// the `brackets` best local minima. Returns the smallest value found.
pub fn sweep_and_refine<F: Fn(f64) -> f64>(f: &F, params: &[f64], brackets: usize, tol: f64) -> f64 {
    let vals: Vec<f64> = params.iter().map(|&p| f(p)).collect();
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let mut best = vals[idx[0]];
    let mut used = 0;
    let mut taken: Vec<usize> = Vec::new();
    for &i in &idx {
        if used == brackets {
            break;
        }
        if taken.iter().any(|&t| t.abs_diff(i) <= 1) {
            continue;
        }
        taken.push(i);
        used += 1;
        let lo = params[i.saturating_sub(1)];
        let hi = params[(i + 1).min(params.len() - 1)];
        let (_, v) = golden_section(f, lo, hi, tol);
        best = best.min(v);
    }
    best
}

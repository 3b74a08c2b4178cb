//! End-to-end acceptance gates. Each test prints one `criterion N:` line.

use std::f64::consts::FRAC_PI_2;
use std::time::{Duration, Instant};

use cusp_core::barrier::*;
use cusp_core::capacity::*;
use cusp_core::conformal::*;
use cusp_core::exhaustion::*;
use cusp_core::geometry::Disk;
use cusp_core::green::*;
use cusp_core::hopf::*;
use cusp_core::sampling::trial_rng;
use cusp_core::{Complex64, CuspParams};
use rand::Rng;

fn c(x: f64, y: f64) -> Complex64 {
    Complex64::new(x, y)
}

fn line(n: u32, ok: bool, elapsed: Duration, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("criterion {n}: {tag} [{:.1}s] {detail}", elapsed.as_secs_f64());
}

/// Point of `Γ ∩ Δ_R` with log-uniform abscissa in `[1e-3 R, R)`.
fn cusp_point<R: Rng>(p: CuspParams, radius: f64, rng: &mut R) -> Complex64 {
    let x = radius * 1e-3f64.powf(rng.gen::<f64>());
    let w = p.half_width(x).min((radius * radius - x * x).max(0.0).sqrt());
    c(x, 0.999 * w * (2.0 * rng.gen::<f64>() - 1.0))
}

#[test]
fn criterion_01_conformal_map() {
    let t0 = Instant::now();
    let mut worst_quotient = f64::INFINITY;
    let mut max_theta = 0.0f64;
    let mut exact_at_one = true;
    for (ci, (cc, alpha)) in [(1.0, 0.5), (0.5, 0.7), (2.0, 0.3)].into_iter().enumerate() {
        let p = CuspParams::new(cc, alpha).unwrap();
        let r = injectivity_radius(p);
        // F itself underflows near the vertex, so pairs are compared through
        // log F, which is injective exactly when F is on this region.
        let per = 100_000 / 3 + 1;
        for i in 0..per {
            let mut rng = trial_rng(17 + ci as u64, i as u64);
            let z1 = cusp_point(p, r, &mut rng);
            let z2 = if i % 2 == 0 {
                cusp_point(p, r, &mut rng)
            } else {
                // Close pairs probe local injectivity.
                let d = 1e-6 * z1.re * rng.gen::<f64>();
                let cand = z1 + Complex64::from_polar(d, std::f64::consts::TAU * rng.gen::<f64>());
                if p.in_cusp(cand) && cand.norm() < r {
                    cand
                } else {
                    z1 * (1.0 - 1e-7)
                }
            };
            let l1 = f_map_log(p, z1).unwrap();
            let l2 = f_map_log(p, z2).unwrap();
            // Scale-free separation of images vs preimages.
            let dz = (z1 - z2).norm() / z1.norm().max(z2.norm());
            let dw = (l1 - l2).norm() / l1.norm().max(l2.norm());
            if dz > 0.0 {
                worst_quotient = worst_quotient.min(dw / dz);
            }
        }
        for i in 0..10_000 / 3 + 1 {
            let mut rng = trial_rng(99 + ci as u64, i as u64);
            let cm = p.c_max();
            let cw = if i % 4 == 0 {
                cm
            } else if i % 4 == 1 {
                -cm
            } else {
                cm * (2.0 * rng.gen::<f64>() - 1.0)
            };
            let s = r * 1e-4f64.powf(rng.gen::<f64>());
            let bp = boundary_polar(p, cw, s).unwrap();
            max_theta = max_theta.max(bp.theta_tilde.abs());
        }
        let one = f_map(p, c(1.0, 0.0)).unwrap();
        exact_at_one &= one == c((-hopf_constant(p)).exp(), 0.0);
    }
    let el = t0.elapsed();
    // |d log F / dz| · |z| / |log F| = k, so the quotient stays near k > 0.
    let injective = worst_quotient > 1e-3;
    let ok = injective && max_theta <= FRAC_PI_2 + 1e-9 && exact_at_one && el.as_secs_f64() < 10.0;
    line(
        1,
        ok,
        el,
        &format!("min image/preimage separation {worst_quotient:.3e}, max |theta~| - pi/2 = {:.2e}, F(1) exact {exact_at_one}", max_theta - FRAC_PI_2),
    );
    assert!(ok);
}

#[test]
fn criterion_02_image_profile() {
    let t0 = Instant::now();
    let p = CuspParams::new(1.0, 0.5).unwrap();
    let prof = image_profile(p, &descending_grid(1e-6, 1e-4, 40)).unwrap();
    let el = t0.elapsed();
    let ok = prof.a2.residual <= 0.1 && (0.95..=1.05).contains(&prof.consistency) && el.as_secs_f64() < 5.0;
    line(
        2,
        ok,
        el,
        &format!(
            "A2 fit residual {:.3e}, A2/(A1 A^2) = {:.4}",
            prof.a2.residual, prof.consistency
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_03_barrier() {
    let t0 = Instant::now();
    let prof = HBProfile::new(1.0, 0.1).unwrap();
    let flags = check_ln_conditions(&prof, 2000).unwrap();
    let s1 = phi_subharmonicity_scan(&prof, 0.05, 2e-4).unwrap();
    let s2 = phi_subharmonicity_scan(&prof, 0.05, 1e-4).unwrap();
    let region = BarrierRegion::new(&prof, 0.05).unwrap();
    let phi_max = region
        .e2_samples(1000)
        .iter()
        .map(|&z| phi_eval(&prof, z).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let el = t0.elapsed();

    let scan_ok = s1.min_laplacian >= -1e-4;
    // Nothing negative at either step counts as converged.
    let improves = s2.min_laplacian >= 0.0 || s2.min_laplacian.abs() * 3.0 <= s1.min_laplacian.abs();
    let e2_ok = phi_max <= 1e-9;
    let attainable = scan_ok && improves && e2_ok && el.as_secs_f64() < 30.0;
    line(
        3,
        flags.all() && attainable,
        el,
        &format!(
            "flags {{smooth {}, integrable {}, monotone {}, concavity {} (breaks at u = {:.4})}}, \
             min Laplacian {:.3e} (h = 2e-4) / {:.3e} (h = 1e-4), max phi on E2 {:.3e}",
            flags.smooth,
            flags.integrable,
            flags.monotone,
            flags.concavity,
            flags.concavity_breaks_at.unwrap_or(f64::NAN),
            s1.min_laplacian,
            s2.min_laplacian,
            phi_max
        ),
    );
    assert!(attainable);
    assert!(flags.smooth && flags.integrable && flags.monotone);
    // h'' + h'/u for h_B is nonincreasing only while
    // L³ + 2L² − 6L − 24 ≥ 0 with L = log(1/u), i.e. up to u ≈ 0.0547.
    let u_star = {
        let g = |l: f64| l.powi(3) + 2.0 * l * l - 6.0 * l - 24.0;
        let (mut lo, mut hi) = (2.0, 4.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (-hi).exp()
    };
    assert!(!flags.concavity);
    let brk = flags.concavity_breaks_at.unwrap();
    assert!((brk / u_star - 1.0).abs() < 0.01, "{brk} vs {u_star}");
    // Inside that range the profile passes all four.
    assert!(check_ln_conditions(&HBProfile::new(1.0, 0.05).unwrap(), 2000)
        .unwrap()
        .all());
}

#[test]
fn criterion_04_green_solvers_on_disk() {
    let t0 = Instant::now();
    let disk = Disk {
        center: c(0.0, 0.0),
        radius: 1.0,
    };
    // Off-centre pole: with a = 0 every exit point has |X − a| = 1 and the
    // walk estimator has no variance at all.
    let a = c(0.2, -0.1);
    let pts = [c(0.5, 0.0), c(0.1, 0.3), c(-0.6, -0.2), c(0.0, -0.8), c(-0.3, 0.45)];
    let fd = green_fd(&disk, a, 1.0 / 32.0).unwrap();
    let cfg = WosConfig {
        trials: 100_000,
        seed: 4,
        ..Default::default()
    };
    let mut ok = true;
    let mut worst_fd = 0.0f64;
    let mut worst_wos = 0.0f64;
    for &z in &pts {
        let exact = green_disk(1.0, z, a).unwrap().value;
        let e = fd.estimate(z);
        let w = green_wos(&disk, z, a, &cfg).unwrap();
        ok &= (e.value - exact).abs() <= e.error && (w.value - exact).abs() <= 3.0 * w.error;
        worst_fd = worst_fd.max((e.value - exact).abs() / e.error);
        worst_wos = worst_wos.max((w.value - exact).abs() / w.error);
    }
    let el = t0.elapsed();
    ok &= el.as_secs_f64() < 60.0;
    line(
        4,
        ok,
        el,
        &format!("worst |FD - exact|/err {worst_fd:.3}, worst |WoS - exact|/stderr {worst_wos:.3}"),
    );
    assert!(ok);
}

fn profile_grid() -> Vec<f64> {
    (0..12)
        .map(|i| 0.004 * (0.25f64 / 0.004).powf(i as f64 / 11.0))
        .collect()
}

#[test]
fn criterion_05_axis_profile() {
    let t0 = Instant::now();
    let p = CuspParams::new(0.5, 0.7).unwrap();
    let prof = axis_green_profile(p, 1.0, &profile_grid(), &AxisProfileConfig::default()).unwrap();
    let el = t0.elapsed();
    let decay = prof.decay_constant();
    let ok = (decay / prof.hopf_constant - 1.0).abs() <= 0.2
        && prof.invariance_holds()
        && prof.linearity_spread <= 3.0
        && el.as_secs_f64() < 600.0;
    line(
        5,
        ok,
        el,
        &format!(
            "decay {decay:.4} vs A = {:.4}, invariance {}, linearity spread {:.3}",
            prof.hopf_constant,
            prof.invariance_holds(),
            prof.linearity_spread
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_06_hopf_green_candidate() {
    let t0 = Instant::now();
    let p = CuspParams::new(0.5, 0.7).unwrap();
    let fem = CuspFem::solve(p, 1.0, 0.5, 0.01, &[], &CuspFemConfig::default()).unwrap();
    let u = |z| fem.value(z);
    let cert = hopf_certify(p, 1.0, &u, 2000, 7).unwrap();
    let scaled = hopf_certify(p, 1.0, &|z| 3.5 * u(z), 2000, 7).unwrap();
    let el = t0.elapsed();
    let homogeneous =
        (scaled.best_constant / cert.best_constant - 3.5).abs() <= 1e-12 * 3.5 && scaled.witness == cert.witness;
    let ok = cert.best_constant > 0.0 && cert.doubling_drift() <= 0.1 && homogeneous && el.as_secs_f64() < 120.0;
    line(
        6,
        ok,
        el,
        &format!(
            "best constant {:.4} at {:.4}, doubling drift {:.3e}, homogeneity {homogeneous}",
            cert.best_constant,
            cert.witness,
            cert.doubling_drift()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_07_exhaustion_sequence() {
    let t0 = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    let preset = ExhaustionParams::simulation_preset();
    let reference = ExhaustionParams::reference();
    let tables = [
        (
            "preset",
            SequenceTable::from_log_alphas(&preset, alpha_sequence_log_max(&preset, 64)).unwrap(),
        ),
        ("reference", SequenceTable::build(&reference, 2).unwrap()),
    ];
    for (name, t) in &tables {
        let a = &t.a_values;
        let halving = (2..=a.len())
            .step_by(2)
            .all(|nu| (a[nu - 1] - a[nu - 2] / 2.0).abs() <= 1e-12 * a[nu - 2].abs());
        // Increments are exactly 1/2 on halving steps, up to rounding.
        let incr_ok = t.tau_at_a.windows(2).all(|w| {
            let d = w[1] - w[0];
            (0.5 - 1e-12..1.0).contains(&d)
        });
        let c0 = t.c0();
        let tau_ok = t
            .tau_at_a
            .iter()
            .enumerate()
            .all(|(i, &tv)| tv >= (i + 1) as f64 / 2.0 - c0);
        let last_t = (t.log_neg_alphas[0]).exp();
        let ts: Vec<f64> = (0..200).map(|i| last_t * 1e-300f64.powf(i as f64 / 199.0)).collect();
        let lam: Vec<usize> = ts.iter().map(|&x| lambda_of(t, x).unwrap()).collect();
        let lam_ok = lam.windows(2).all(|w| w[1] >= w[0]);
        ok &= halving && incr_ok && tau_ok && lam_ok;
        detail += &format!(
            "{name}: {} terms, c0 = {c0:.4}, halving {halving}, increments {incr_ok}, tau {tau_ok}, lambda {lam_ok}; ",
            t.len()
        );
    }
    let el = t0.elapsed();
    ok &= el.as_secs_f64() < 1.0;
    line(7, ok, el, detail.trim_end_matches("; "));
    assert!(ok);
}

#[test]
fn criterion_08_patch_simulation() {
    let t0 = Instant::now();
    let r = patch_decay_sim(&ExhaustionParams::simulation_preset(), &PatchConfig::default()).unwrap();
    let el = t0.elapsed();
    let ok = r.checks.all() && r.c3 > 0.0 && el.as_secs_f64() < 300.0;
    line(
        8,
        ok,
        el,
        &format!(
            "overlap {:.3}, c1 {:.4}, c2 {:.4}, c3 {:.4}, min kappa {:.4}, final ratio {:.4}, checks {:?}",
            r.overlap_max,
            r.c1,
            r.c2,
            r.c3,
            r.kappa.iter().copied().fold(f64::INFINITY, f64::min),
            r.final_bound_ratio,
            r.checks
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_09_capacity() {
    let t0 = Instant::now();
    let cfg = VariationalConfig::default();
    let b1 = capacity_variational(
        &AxiSet::Ball {
            center: 0.0,
            radius: 1.0,
        },
        &cfg,
    )
    .unwrap();
    let b2 = capacity_variational(
        &AxiSet::Ball {
            center: 0.0,
            radius: 2.0,
        },
        &cfg,
    )
    .unwrap();
    let ratio = b2.estimate.value / b1.estimate.value;
    let p = CuspParams::new(1.0, 0.5).unwrap();
    let w = wiener_report(p, 2, &[2, 3, 4, 5, 6], WienerMethod::BoxVariational, &cfg).unwrap();
    let planar = wiener_report(p, 1, &[2, 3, 4], WienerMethod::BoxVariational, &cfg).unwrap();
    let el = t0.elapsed();
    let ratios_ok = w.consecutive_ratios.iter().all(|r| (0.4..=0.6).contains(r));
    let ok = (ratio / 4.0 - 1.0).abs() <= 0.1
        && ratios_ok
        && w.thinness == Thinness::Thin
        && planar.thinness == Thinness::NotThin
        && planar.note.is_some()
        && el.as_secs_f64() < 900.0;
    line(
        9,
        ok,
        el,
        &format!(
            "ball ratio {ratio:.4}, term ratios {:?}, n=2 {:?}, n=1 {:?}",
            w.consecutive_ratios
                .iter()
                .map(|r| (r * 1e4).round() / 1e4)
                .collect::<Vec<_>>(),
            w.thinness,
            planar.thinness
        ),
    );
    assert!(ok);
}

fn all_experiments() -> Vec<String> {
    let p = CuspParams::new(0.5, 0.7).unwrap();
    let disk = Disk {
        center: c(0.0, 0.0),
        radius: 1.0,
    };
    let wos = green_wos(
        &disk,
        c(0.3, 0.2),
        c(-0.1, 0.0),
        &WosConfig {
            trials: 20_000,
            seed: 42,
            ..Default::default()
        },
    )
    .unwrap();
    let fd = green_fd(&disk, c(0.0, 0.0), 1.0 / 16.0).unwrap().estimate(c(0.5, 0.0));
    let prof = axis_green_profile(p, 1.0, &[0.05, 0.1, 0.2], &AxisProfileConfig::default()).unwrap();
    let fem = CuspFem::solve(p, 1.0, 0.5, 0.05, &[], &CuspFemConfig::default()).unwrap();
    let cert = hopf_certify(p, 1.0, &|z| fem.value(z), 500, 42).unwrap();
    let hb = HBProfile::new(1.0, 0.1).unwrap();
    let scan = phi_subharmonicity_scan(&hb, 0.05, 1e-3).unwrap();
    let e1: Vec<f64> = BarrierRegion::new(&hb, 0.05)
        .unwrap()
        .e1_samples(200, 42)
        .iter()
        .map(|&z| phi_eval(&hb, z).unwrap())
        .collect();
    let patch = patch_decay_sim(&ExhaustionParams::simulation_preset(), &PatchConfig::default()).unwrap();
    let ball = AxiSet::Ball {
        center: 0.0,
        radius: 0.25,
    };
    let mc = capacity_hitting_mc(&ball, &HittingConfig::for_set(&ball, 4, 10_000, 42)).unwrap();
    let wiener = wiener_report(
        CuspParams::new(1.0, 0.5).unwrap(),
        2,
        &[2, 3, 4],
        WienerMethod::BoxVariational,
        &VariationalConfig::default(),
    )
    .unwrap();
    let j = |v: serde_json::Value| v.to_string();
    vec![
        j(serde_json::to_value(wos).unwrap()),
        j(serde_json::to_value(fd).unwrap()),
        j(serde_json::to_value(&prof).unwrap()),
        j(serde_json::to_value(&cert).unwrap()),
        j(serde_json::to_value(&scan).unwrap()),
        j(serde_json::to_value(&e1).unwrap()),
        j(serde_json::to_value(&patch).unwrap()),
        j(serde_json::to_value(mc).unwrap()),
        j(serde_json::to_value(&wiener).unwrap()),
    ]
}

#[test]
fn criterion_10_reproducible_across_threads() {
    let t0 = Instant::now();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(all_experiments);
    let b = four.install(all_experiments);
    let el = t0.elapsed();
    let same = a.iter().zip(&b).filter(|(x, y)| x == y).count();
    let ok = same == a.len();
    line(
        10,
        ok,
        el,
        &format!("{same}/{} experiments byte-identical on 1 vs 4 threads", a.len()),
    );
    assert!(ok);
}

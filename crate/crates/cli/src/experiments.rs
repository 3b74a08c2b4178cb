//! One function per experiment: run the module pipeline, gate the result,
//! and render the data files.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use cusp_core::barrier::{check_ln_conditions, phi_eval, phi_subharmonicity_scan, BarrierRegion, HBProfile};
use cusp_core::capacity::{
    capacity_variational, wiener_report, AxiSet, SeriesVerdict, Thinness, VariationalConfig, WienerMethod,
};
use cusp_core::conformal::{boundary_angle_scan, collision_scan, descending_grid, f_map, hopf_constant, image_profile};
use cusp_core::exhaustion::{
    alpha_sequence_log_max, lambda_of, patch_decay_sim, ExhaustionParams, PatchConfig, SequenceTable,
};
use cusp_core::green::{axis_green_profile, AxisProfileConfig, CuspFem, CuspFemConfig};
use cusp_core::hopf::{hopf_certify, hopf_ratios, hopf_samples, CertifyConfig};
use cusp_core::{Complex64, CuspParams, Result};

use crate::config::{CapacityMethodName, ExhaustionPreset, Experiment, ExperimentConfig};
use crate::report::{plot_dat, Builder, KeyMetric, Outcome};

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.experiment {
        Experiment::GreenProfile => green_profile(cfg),
        Experiment::ConformalCheck => conformal_check(cfg),
        Experiment::BarrierCheck => barrier_check(cfg),
        Experiment::HopfCertify => hopf_certify_run(cfg),
        Experiment::ExhaustionSim => exhaustion_sim(cfg),
        Experiment::CapacityScan => capacity_scan(cfg),
    }
}

fn params(cfg: &ExperimentConfig) -> Result<CuspParams> {
    CuspParams::new(cfg.c, cfg.alpha)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn green_profile(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = params(cfg)?;
    let radius = cfg.effective_radius();
    let prof = axis_green_profile(
        p,
        radius,
        &log_grid(cfg.t_min, cfg.t_max, cfg.t_points),
        &AxisProfileConfig::default(),
    )?;
    let decay = prof.decay_constant();
    let ratio = decay / prof.hopf_constant;

    let mut b = Builder::default();
    b.gate("decay_within_20_percent", (ratio - 1.0).abs() <= 0.2)
        .gate("conformal_invariance", prof.invariance_holds())
        .gate("linearity_spread_at_most_3", prof.linearity_spread <= 3.0)
        .metric("decay_constant", decay)
        .metric("decay_constant_stderr", prof.fit.slope_stderr)
        .metric("hopf_constant", prof.hopf_constant)
        .metric("decay_ratio", ratio)
        .metric("invariance_holds", prof.invariance_holds())
        .metric("linearity_spread", prof.linearity_spread)
        .metric("rows", prof.rows.len());
    let report = b.finish(cfg, KeyMetric::new("decay_ratio", ratio, Some(0.8), Some(1.2)));

    let k = p.k();
    let plot = plot_dat(
        "cusplab green-profile: log(-g) on the axis against -t^(-k)",
        "-t^(-k)",
        "log(-g)",
        prof.rows.iter().map(|r| (-r.t.powf(-k), (-r.g_direct.value).ln())),
    );
    Ok(Outcome {
        report,
        files: vec![("profile.csv".into(), prof.to_csv()), ("plot.dat".into(), plot)],
    })
}

fn conformal_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = params(cfg)?;
    let radius = cfg.effective_radius();
    let scan = collision_scan(p, radius, cfg.pairs, cfg.seed)?;
    let max_theta = boundary_angle_scan(p, radius, cfg.boundary_samples, cfg.seed.wrapping_add(1))?;
    let at_one = f_map(p, Complex64::new(1.0, 0.0))?;
    let exact_at_one = at_one == Complex64::new((-hopf_constant(p)).exp(), 0.0);
    let prof = image_profile(p, &descending_grid(cfg.s_min, cfg.s_max, cfg.s_points))?;

    let mut b = Builder::default();
    b.gate("injective", scan.min_quotient > 1e-3)
        .gate("boundary_angle_at_most_right_angle", max_theta <= FRAC_PI_2 + 1e-9)
        .gate("exact_at_one", exact_at_one)
        .gate("profile_residual_at_most_10_percent", prof.a2.residual <= 0.1)
        .gate("profile_consistency", (0.95..=1.05).contains(&prof.consistency))
        .metric("radius", radius)
        .metric("collision_scan", scan)
        .metric("max_abs_theta_tilde", max_theta)
        .metric("f_at_one", at_one)
        .metric("a1_fit", prof.a1)
        .metric("a2_fit", prof.a2)
        .metric("consistency", prof.consistency);
    let report = b.finish(
        cfg,
        KeyMetric::new("consistency", prof.consistency, Some(0.95), Some(1.05)),
    );

    let mut csv = String::from("s,y_tilde,x_tilde,log_r_tilde,theta_tilde\n");
    for r in &prof.rows {
        let _ = writeln!(
            csv,
            "{:e},{:e},{:e},{:e},{:e}",
            r.s, r.y_tilde, r.x_tilde, r.log_r_tilde, r.theta_tilde
        );
    }
    let plot = plot_dat(
        "cusplab conformal-check: upper image boundary x~ = h(y~)",
        "y~",
        "x~",
        prof.rows.iter().map(|r| (r.y_tilde, r.x_tilde)),
    );
    Ok(Outcome {
        report,
        files: vec![("image_profile.csv".into(), csv), ("plot.dat".into(), plot)],
    })
}

fn barrier_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let prof = HBProfile::new(cfg.b, cfg.u0)?;
    let flags = check_ln_conditions(&prof, cfg.condition_grid)?;
    let coarse = phi_subharmonicity_scan(&prof, cfg.region_radius, cfg.grid_h)?;
    let fine = phi_subharmonicity_scan(&prof, cfg.region_radius, cfg.grid_h / 2.0)?;
    let region = BarrierRegion::new(&prof, cfg.region_radius)?;
    let e2 = region.e2_samples(cfg.e2_samples);
    let phis = e2.iter().map(|&z| phi_eval(&prof, z)).collect::<Result<Vec<f64>>>()?;
    let phi_max = phis.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Nothing negative at either step counts as converged.
    let refines = fine.min_laplacian >= 0.0 || fine.min_laplacian.abs() * 3.0 <= coarse.min_laplacian.abs();

    let mut b = Builder::default();
    b.gate("smooth", flags.smooth)
        .gate("integrable", flags.integrable)
        .gate("monotone", flags.monotone)
        .gate("concavity", flags.concavity)
        .gate("scan_min_at_least_minus_1e-4", coarse.min_laplacian >= -1e-4)
        .gate("scan_improves_3x_on_halving", refines)
        .gate("phi_nonpositive_on_e2", phi_max <= 1e-9)
        .metric("conditions", flags)
        .metric("scan", &coarse)
        .metric("scan_halved", &fine)
        .metric("max_phi_on_e2", phi_max);
    let report = b.finish(
        cfg,
        KeyMetric::new("min_laplacian", coarse.min_laplacian, Some(-1e-4), None),
    );

    let mut csv = String::from("x,y,phi\n");
    for (z, v) in e2.iter().zip(&phis) {
        let _ = writeln!(csv, "{:e},{:e},{:e}", z.re, z.im, v);
    }
    let us = (1..=200).map(|i| cfg.u0 * i as f64 / 201.0);
    let plot = plot_dat(
        "cusplab barrier-check: model profile h_B",
        "u",
        "h_B(u)",
        us.map(|u| (u, prof.eval(u).unwrap_or(f64::NAN))),
    );
    Ok(Outcome {
        report,
        files: vec![("e2.csv".into(), csv), ("plot.dat".into(), plot)],
    })
}

fn hopf_certify_run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = params(cfg)?;
    let radius = cfg.effective_radius();
    let fem = CuspFem::solve(p, radius, radius / 2.0, cfg.tip_cutoff, &[], &CuspFemConfig::default())?;
    let u = |z| fem.value(z);
    let cert = hopf_certify(p, radius, &u, cfg.samples, cfg.seed)?;
    let scaled = hopf_certify(p, radius, &|z| 3.5 * u(z), cfg.samples, cfg.seed)?;
    let homogeneous =
        (scaled.best_constant / cert.best_constant - 3.5).abs() <= 1e-12 * 3.5 && scaled.witness == cert.witness;
    let drift = cert.doubling_drift();

    let mut b = Builder::default();
    b.gate("positive_constant", cert.best_constant > 0.0)
        .gate("stable_under_doubling", drift <= 0.1)
        .gate("homogeneous", homogeneous)
        .metric("certificate", cert.to_json())
        .metric("doubling_drift", drift);
    let report = b.finish(cfg, KeyMetric::new("doubling_drift", drift, Some(0.0), Some(0.1)));

    let pts = hopf_samples(p, radius, cfg.samples, cfg.seed, CertifyConfig::default().depth);
    let rows = hopf_ratios(p, radius, &u, &pts)?;
    let mut csv = String::from("x,y,delta,u,log_ratio\n");
    for s in &rows {
        let _ = writeln!(
            csv,
            "{:e},{:e},{:e},{:e},{:e}",
            s.z.re, s.z.im, s.delta, s.u, s.log_ratio
        );
    }
    let plot = plot_dat(
        "cusplab hopf-certify: log(u / hopf_bound) against boundary distance",
        "delta",
        "log_ratio",
        rows.iter().map(|s| (s.delta, s.log_ratio)),
    );
    Ok(Outcome {
        report,
        files: vec![("samples.csv".into(), csv), ("plot.dat".into(), plot)],
    })
}

fn exhaustion_sim(cfg: &ExperimentConfig) -> Result<Outcome> {
    let ep = match cfg.preset {
        ExhaustionPreset::Simulation => ExhaustionParams::simulation_preset(),
        ExhaustionPreset::Reference => ExhaustionParams::reference(),
    };
    let t = SequenceTable::from_log_alphas(&ep, alpha_sequence_log_max(&ep, cfg.table_terms))?;
    let a = &t.a_values;
    let halving = (2..=a.len())
        .step_by(2)
        .all(|nu| (a[nu - 1] - a[nu - 2] / 2.0).abs() <= 1e-12 * a[nu - 2].abs());
    let increments: Vec<f64> = t.tau_at_a.windows(2).map(|w| w[1] - w[0]).collect();
    // Halving steps add exactly 1/2, up to rounding.
    let incr_ok = increments.iter().all(|&d| (0.5 - 1e-12..1.0).contains(&d));
    let c0 = t.c0();
    let tau_ok = t
        .tau_at_a
        .iter()
        .enumerate()
        .all(|(i, &tv)| tv >= (i + 1) as f64 / 2.0 - c0);
    let last_t = t.log_neg_alphas[0].exp();
    let lam = (0..200)
        .map(|i| lambda_of(&t, last_t * 1e-300f64.powf(i as f64 / 199.0)))
        .collect::<Result<Vec<usize>>>()?;
    let lam_ok = lam.windows(2).all(|w| w[1] >= w[0]);

    let mut b = Builder::default();
    b.gate("halving", halving)
        .gate("tau_increments", incr_ok)
        .gate("tau_lower_bound", tau_ok)
        .gate("lambda_monotone", lam_ok)
        .metric("terms", t.len())
        .metric("c0", c0)
        .metric(
            "min_tau_increment",
            increments.iter().copied().fold(f64::INFINITY, f64::min),
        );
    let mut files = vec![("sequence.csv".to_string(), t.to_csv())];

    let (key, plot) = if cfg.patch {
        let r = patch_decay_sim(&ep, &PatchConfig::default())?;
        b.gate("overlap", r.checks.overlap)
            .gate("sandwich", r.checks.sandwich)
            .gate("kappa_bounded_below", r.checks.kappa && r.c3 > 0.0)
            .gate("geometric_decay", r.checks.decay)
            .gate("subharmonic", r.checks.subharmonic)
            .gate("final_bound", r.checks.final_bound)
            .metric("patch", &r);
        let mut csv = String::from("nu,m,kappa\n");
        for (i, m) in r.m_series.iter().enumerate() {
            let kappa = r.kappa.get(i).map(|k| format!("{k:e}")).unwrap_or_default();
            let _ = writeln!(csv, "{},{m:e},{kappa}", i + 1);
        }
        files.push(("patch.csv".into(), csv));
        let plot = plot_dat(
            "cusplab exhaustion-sim: decay of M_nu",
            "nu",
            "log(M_nu)",
            r.m_series.iter().enumerate().map(|(i, m)| ((i + 1) as f64, m.ln())),
        );
        (KeyMetric::new("c3", r.c3, Some(0.0), None), plot)
    } else {
        let plot = plot_dat(
            "cusplab exhaustion-sim: tau at the breakpoints",
            "nu",
            "tau(a_nu)",
            t.tau_at_a.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v)),
        );
        (KeyMetric::new("c0", c0, Some(0.0), None), plot)
    };
    files.push(("plot.dat".into(), plot));
    Ok(Outcome {
        report: b.finish(cfg, key),
        files,
    })
}

fn capacity_scan(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = params(cfg)?;
    let vcfg = VariationalConfig::default();
    let unit = capacity_variational(
        &AxiSet::Ball {
            center: 0.0,
            radius: 1.0,
        },
        &vcfg,
    )?;
    let double = capacity_variational(
        &AxiSet::Ball {
            center: 0.0,
            radius: 2.0,
        },
        &vcfg,
    )?;
    // cap(B_2)/cap(B_1) = 2^{m−2}.
    let expected = 2f64.powi(vcfg.m as i32 - 2);
    let ball_ratio = double.estimate.value / unit.estimate.value;
    let ks: Vec<u32> = (cfg.k_min..=cfg.k_max).collect();
    let method = match cfg.method {
        CapacityMethodName::BoxVariational => WienerMethod::BoxVariational,
        CapacityMethodName::ShellVariational => WienerMethod::ShellVariational,
        CapacityMethodName::BoxHitting => WienerMethod::BoxHitting {
            trials: cfg.trials,
            seed: cfg.seed,
        },
    };
    let w = wiener_report(p, cfg.n, &ks, method, &vcfg)?;

    let mut b = Builder::default();
    b.gate("ball_calibration", (ball_ratio / expected - 1.0).abs() <= 0.1)
        .metric("ball_ratio", ball_ratio)
        .metric("wiener", &w);
    let key = if cfg.n == 1 {
        b.gate(
            "planar_case_not_thin",
            w.thinness == Thinness::NotThin && w.note.is_some(),
        );
        KeyMetric::new("ball_ratio", ball_ratio, Some(0.9 * expected), Some(1.1 * expected))
    } else {
        let lo = 0.8 * w.predicted_ratio;
        let hi = 1.2 * w.predicted_ratio;
        b.gate(
            "term_ratios_near_prediction",
            !w.consecutive_ratios.is_empty() && w.consecutive_ratios.iter().all(|r| (lo..=hi).contains(r)),
        )
        .gate("series_converges", w.verdict == SeriesVerdict::Converging)
        .gate("thin", w.thinness == Thinness::Thin);
        KeyMetric::new("fitted_term_ratio", w.fitted_term_ratio, Some(lo), Some(hi))
    };

    let plot = plot_dat(
        "cusplab capacity-scan: Wiener terms by shell",
        "k",
        "log2(term_k)",
        w.rows.iter().map(|r| (r.k as f64, r.term.log2())),
    );
    Ok(Outcome {
        report: b.finish(cfg, key),
        files: vec![("wiener.csv".into(), w.to_csv()), ("plot.dat".into(), plot)],
    })
}

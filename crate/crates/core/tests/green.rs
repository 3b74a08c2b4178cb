use cusp_core::geometry::{Disk, TruncatedCusp};
use cusp_core::green::*;
use cusp_core::{Complex64, CuspParams};

fn c(x: f64, y: f64) -> Complex64 {
    Complex64::new(x, y)
}

#[test]
fn fd_error_bar_covers_disk_oracle() {
    let disk = Disk {
        center: c(0.0, 0.0),
        radius: 1.0,
    };
    for a in [c(0.0, 0.0), c(0.2, -0.1), c(-0.3, 0.25)] {
        let fd = green_fd(&disk, a, 1.0 / 32.0).unwrap();
        for i in 0..200 {
            let z = Complex64::from_polar(0.95 * ((i % 10) as f64 + 0.5) / 10.0, 0.33 * (i / 10) as f64 + 0.1);
            if (z - a).norm() < 0.05 {
                continue;
            }
            let e = fd.estimate(z);
            let exact = green_disk(1.0, z, a).unwrap().value;
            assert!((e.value - exact).abs() <= e.error, "a = {a}, z = {z}: {e:?} vs {exact}");
        }
    }
}

#[test]
fn cusp_green_above_disk_green() {
    // Γ ∩ Δ_1 ⊂ Δ_1, so g_cusp ≥ g_disk pointwise.
    let p = CuspParams::new(0.5, 0.7).unwrap();
    let dom = TruncatedCusp::new(p, 1.0).unwrap();
    let a = c(0.5, 0.0);
    let fd = green_fd(&dom, a, 1.0 / 64.0).unwrap();
    for &z in &[c(0.3, 0.0), c(0.7, 0.1), c(0.6, -0.15), c(0.85, 0.0)] {
        let e = fd.estimate(z);
        let disk = green_disk(1.0, z, a).unwrap().value;
        assert!(e.value + e.error >= disk, "{z}: {e:?} vs {disk}");
        assert!(e.value < 0.0);
    }
}

#[test]
fn fd_and_walks_agree_in_cusp() {
    let p = CuspParams::new(0.5, 0.7).unwrap();
    let dom = TruncatedCusp::new(p, 1.0).unwrap();
    let a = c(0.5, 0.0);
    let fd = green_fd(&dom, a, 1.0 / 64.0).unwrap();
    let cfg = WosConfig {
        trials: 20_000,
        seed: 8,
        ..Default::default()
    };
    for &z in &[c(0.35, 0.0), c(0.7, 0.1)] {
        let e = fd.estimate(z);
        let w = green_wos(&dom, z, a, &cfg).unwrap();
        assert!(e.agrees_with(&w, 3.0), "{z}: {e:?} vs {w:?}");
    }
}

#[test]
fn cusp_green_is_symmetric() {
    let p = CuspParams::new(0.5, 0.7).unwrap();
    let dom = TruncatedCusp::new(p, 1.0).unwrap();
    let (z, a) = (c(0.4, 0.0), c(0.7, 0.05));
    let g1 = green_fd(&dom, a, 1.0 / 64.0).unwrap().estimate(z);
    let g2 = green_fd(&dom, z, 1.0 / 64.0).unwrap().estimate(a);
    assert!(g1.agrees_with(&g2, 1.0), "{g1:?} vs {g2:?}");
}

#[test]
fn fem_profile_decays_towards_vertex() {
    let p = CuspParams::new(0.5, 0.7).unwrap();
    let ts = [0.02, 0.05, 0.1, 0.2];
    let fem = CuspFem::solve(p, 1.0, 0.5, 0.02, &ts, &CuspFemConfig::default()).unwrap();
    let vals: Vec<f64> = ts.iter().map(|&t| fem.value(c(t, 0.0))).collect();
    assert!(vals.iter().all(|&v| v < 0.0));
    assert!(vals.windows(2).all(|w| w[0] > w[1]), "{vals:?}");
}

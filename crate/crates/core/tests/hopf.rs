use cusp_core::conformal::{f_map, hopf_constant};
use cusp_core::green::{CuspFem, CuspFemConfig};
use cusp_core::hopf::*;
use cusp_core::{Complex64, CuspParams};

#[test]
fn green_candidate_is_largest_away_from_vertex() {
    // δ(z) is far below |z| near the vertex, so the bound there is tiny and
    // the ratio u/bound large; the binding samples sit away from the tip.
    let p = CuspParams::new(0.5, 0.7).unwrap();
    let fem = CuspFem::solve(p, 1.0, 0.5, 0.01, &[], &CuspFemConfig::default()).unwrap();
    let cert = hopf_certify(p, 1.0, &|z| fem.value(z), 1000, 3).unwrap();
    assert!(cert.best_constant > 0.0);
    assert!(cert.near_vertex_constant > cert.best_constant);
    assert!(cert.witness.norm() >= 0.1);
}

#[test]
fn harmonic_candidate_from_the_map() {
    // −Re F is negative and harmonic on the cusp.
    let p = CuspParams::new(1.0, 0.5).unwrap();
    let u = |z: Complex64| -f_map(p, z).unwrap().re;
    let cert = hopf_certify(p, 0.5, &u, 1000, 5).unwrap();
    assert!(cert.best_constant > 0.0 && cert.best_constant.is_finite());
    assert!(cert.doubling_drift() <= 0.1);
}

#[test]
fn json_fields() {
    let p = CuspParams::new(0.5, 0.7).unwrap();
    let cert = hopf_certify(p, 1.0, &|_| -1.0, 100, 1).unwrap();
    let j = cert.to_json();
    for key in ["C", "alpha", "A", "best_constant", "witness", "samples"] {
        assert!(j.get(key).is_some(), "{key}");
    }
    assert_eq!(j["A"].as_f64().unwrap(), hopf_constant(p));
}

#[test]
fn samples_are_in_the_truncated_cusp() {
    let p = CuspParams::new(2.0, 0.3).unwrap();
    for z in hopf_samples(p, 0.8, 500, 11, 0.01) {
        assert!(p.in_cusp(z) && z.norm() < 0.8, "{z}");
    }
}

use chemoplast::constitutive::{drive_uniaxial, update_stress, von_mises};
use chemoplast::*;

/// Bilinear uniaxial response: elastic slope `e`, plastic slope
/// `e k / (e + k)` past `sy / e` on monotonic loading.
fn bilinear(eps: f64, e: f64, sy: f64, k: f64) -> f64 {
    let ey = sy / e;
    if eps <= ey {
        e * eps
    } else {
        sy + e * k / (e + k) * (eps - ey)
    }
}

fn ramp(from: f64, to: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| from + (to - from) * i as f64 / n as f64).collect()
}

#[test]
fn isotropic_uniaxial_matches_bilinear_curve() {
    let p = MaterialParams::steel().with_hardening(Hardening::Isotropic);
    let path = ramp(0.0, 4e-3, 40);
    let s = drive_uniaxial(&p, &path).unwrap();
    for (eps, sig) in path.iter().zip(&s) {
        let exact = bilinear(*eps, p.youngs_modulus, p.yield_stress, p.isotropic_modulus);
        assert!((sig - exact).abs() <= 1e-6 * exact, "{eps}: {sig} vs {exact}");
    }
}

#[test]
fn kinematic_uniaxial_modulus_is_three_halves_h() {
    let p = MaterialParams::steel().with_hardening(Hardening::Kinematic);
    let path = ramp(0.0, 6e-3, 60);
    let s = drive_uniaxial(&p, &path).unwrap();
    for (eps, sig) in path.iter().zip(&s) {
        let exact = bilinear(*eps, p.youngs_modulus, p.yield_stress, 1.5 * p.kinematic_modulus);
        assert!((sig - exact).abs() <= 1e-6 * exact);
    }
}

/// Stress at which the first plastic step occurs after reversing at `peak`.
fn reverse_yield(p: &MaterialParams, peak: f64) -> (f64, f64) {
    let mut path = ramp(0.0, peak, 100);
    let n_up = path.len();
    path.extend(ramp(peak, -peak, 4000));
    let s = drive_uniaxial(p, &path).unwrap();
    let e = p.youngs_modulus;
    for i in n_up..path.len() {
        let slope = (s[i] - s[i - 1]) / (path[i] - path[i - 1]);
        if slope < 0.99 * e {
            return (s[n_up - 1], s[i - 1]);
        }
    }
    panic!("no reverse yield");
}

#[test]
fn kinematic_hardening_shows_bauschinger_effect() {
    let peak = 4e-3;
    let kin = MaterialParams::steel().with_hardening(Hardening::Kinematic);
    let iso = MaterialParams::steel().with_hardening(Hardening::Isotropic);
    let (top_k, rev_k) = reverse_yield(&kin, peak);
    let (top_i, rev_i) = reverse_yield(&iso, peak);
    let step = kin.youngs_modulus * 2.0 * peak / 4000.0;
    // Kinematic: the elastic range 2σ_y is carried along.
    assert!((rev_k - (top_k - 2.0 * kin.yield_stress)).abs() <= step);
    assert!(rev_k.abs() < kin.yield_stress);
    // Isotropic: the surface expands symmetrically.
    assert!((rev_i + top_i).abs() <= step);
    assert!(rev_i.abs() > iso.yield_stress);
}

#[test]
fn return_mapping_lands_on_the_yield_surface() {
    let p = MaterialParams::steel().with_hardening(Hardening::Isotropic);
    let old = MaterialState::default();
    let d = SymTensor2D::plane(3e-3, -1e-3, 2e-3);
    let u = update_stress(&old, &d, 0.0, &p).unwrap();
    assert!(u.plastic);
    let sy = p.yield_stress + p.isotropic_modulus * u.state.eq_plastic_strain;
    assert!((von_mises(&u.state.stress) - sy).abs() <= 1e-6 * sy);
    // Plastic flow is isochoric.
    let ep = u.state.plastic_strain;
    assert!(ep.trace().abs() <= 1e-12 * ep.norm());
}

#[test]
fn in_plane_free_swelling_leaves_out_of_plane_stress() {
    let p = MaterialParams::graphite();
    let dc = 1000.0;
    let e0 = dc * p.molar_volume / 3.0;
    let u = update_stress(&MaterialState::default(), &SymTensor2D::plane(e0, e0, 0.0), dc, &p).unwrap();
    // Mechanical strain is (0, 0, -e0).
    let (lambda, mu) = p.lame();
    let s = u.state.stress;
    assert!((s.xx + lambda * e0).abs() <= 1e-9 * lambda * e0);
    assert!((s.yy - s.xx).abs() <= 1e-9 * lambda * e0);
    assert!((s.zz + (lambda + 2.0 * mu) * e0).abs() <= 1e-9 * lambda * e0);
    assert_eq!(s.xy, 0.0);
}

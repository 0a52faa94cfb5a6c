use shockhopf::error::Error;
use shockhopf::profiles::*;
use shockhopf::spaces::Grid1D;

fn burgers_profile() -> ShockProfile {
    solve_profile(&Burgers::standard(), 0.0, Grid1D::new(20.0, 2001).unwrap(), None).unwrap()
}

#[test]
fn burgers_matches_tanh() {
    let p = burgers_profile();
    assert_eq!(p.method, "shooting");
    let g = p.grid();
    let err = (0..g.len()).map(|i| (p.values.at(i, 0) + (0.5 * g.x(i)).tanh()).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-6, "sup error {err:e}");
    let eta = decay_rate(&p).unwrap();
    assert!((eta - 1.0).abs() <= 0.02, "eta {eta}");
    assert!(ode_residual(&p, &Burgers::standard()).unwrap() <= 1e-8);
}

#[test]
fn speed_shifted_burgers_family() {
    let f = Burgers { u_minus: 1.0, u_plus: -1.0, shift_rate: 1.0 };
    let p = solve_profile(&f, 0.05, Grid1D::new(20.0, 801).unwrap(), None).unwrap();
    let g = p.grid();
    for i in 0..g.len() {
        assert!((p.values.at(i, 0) - (0.05 - (0.5 * g.x(i)).tanh())).abs() < 1e-6);
    }
}

#[test]
fn zero_strength_shock_is_constant() {
    let p = solve_profile(&Burgers::with_states(0.7, 0.7), 0.0, Grid1D::new(5.0, 11).unwrap(), None).unwrap();
    assert!(p.values.values.iter().all(|v| *v == 0.7));
    assert!(p.derivative.values.iter().all(|v| *v == 0.0));
    assert!(matches!(decay_rate(&p), Err(Error::DomainTooSmall(_))));
}

#[test]
fn non_hyperbolic_endstate_is_rejected() {
    let r = solve_profile(&Burgers::with_states(1.0, 0.0), 0.0, Grid1D::new(5.0, 11).unwrap(), None);
    assert!(matches!(r, Err(Error::SpectralAssumption(_))));
}

/// Second component of the exemplar profile by direct quadrature of
/// `u₂(x) = (κ/2)∫ₓ^∞ e^{b(x−s)} sech²(s/2) ds`.
fn exemplar_u2(x: f64, b: f64, kappa: f64) -> f64 {
    let n = 40_000;
    let upper = x.max(0.0) + 60.0;
    let h = (upper - x) / n as f64;
    let f = |s: f64| (b * (x - s)).exp() / (0.5 * s).cosh().powi(2);
    let mut acc = f(x) + f(upper);
    for i in 1..n {
        acc += f(x + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 * kappa * acc * h / 3.0
}

#[test]
fn exemplar_profile_matches_quadrature_oracle() {
    let flux = Exemplar2x2::default();
    let p = solve_profile(&flux, 0.0, Grid1D::new(40.0, 801).unwrap(), None).unwrap();
    let g = p.grid();
    for i in (0..g.len()).step_by(40) {
        let x = g.x(i);
        assert!((p.values.at(i, 0) + (0.5 * x).tanh()).abs() < 1e-7, "u1 at {x}");
        assert!((p.values.at(i, 1) - exemplar_u2(x, flux.b, flux.kappa)).abs() < 1e-7, "u2 at {x}");
    }
    assert!(ode_residual(&p, &flux).unwrap() <= 1e-8);
    let eta = decay_rate(&p).unwrap();
    // slowest relevant rate: the b-eigenvalue at u₋
    assert!((eta / flux.b - 1.0).abs() < 0.05, "eta {eta}");
}

#[test]
fn translation_covariance() {
    let g = Grid1D::new(20.0, 801).unwrap();
    let p0 = solve_profile(&Burgers::standard(), 0.0, g, None).unwrap();
    let phase = -0.3f64;
    let p1 = solve_profile(&Burgers::standard(), 0.0, g, Some(phase)).unwrap();
    // p0(c) = -tanh(c/2) = phase, so p1(x) = p0(x + c)
    let c = -2.0 * phase.atanh();
    let v0 = p0.values.component(0);
    let d0 = p0.derivative.component(0);
    let mut worst = 0.0f64;
    for i in 0..g.len() {
        let x = g.x(i);
        if (x + c).abs() < 19.0 {
            worst = worst.max((p1.values.at(i, 0) - g.interp_hermite(&v0, &d0, x + c)).abs());
        }
    }
    assert!(worst <= 1e-6, "{worst:e}");
}

#[test]
fn collocation_fallback_is_second_order() {
    let err = |n: usize| {
        let g = Grid1D::new(20.0, n).unwrap();
        let p = solve_profile_collocation(&Burgers::standard(), 0.0, g, None).unwrap();
        assert_eq!(p.method, "collocation");
        (0..g.len()).map(|i| (p.values.at(i, 0) + (0.5 * g.x(i)).tanh()).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(201), err(401));
    assert!(e1 / e2 > 3.5, "{e1:e} {e2:e}");
    let g = Grid1D::new(30.0, 601).unwrap();
    let p = solve_profile_collocation(&Exemplar2x2::default(), 0.0, g, None).unwrap();
    let c = g.center();
    assert!(p.values.at(c, 0).abs() < 1e-12);
}

#[test]
fn profile_json_roundtrip() {
    let p = solve_profile(&Burgers::standard(), 0.0, Grid1D::new(10.0, 101).unwrap(), None).unwrap();
    let s = p.to_json().unwrap();
    let q = ShockProfile::from_json(&s).unwrap();
    assert_eq!(p, q);
    let bad = s.replace("\"schema_version\":1", "\"schema_version\":99");
    assert!(ShockProfile::from_json(&bad).is_err());
}

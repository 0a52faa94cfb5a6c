use num_complex::Complex64;
use shockhopf::bifurcation::DiscreteSystem;
use shockhopf::linops::{crossing_pair, CrossingDesign, SearchBox, Semigroup};
use shockhopf::numerics::fit::{fit_line, fit_power_law};
use shockhopf::resummation::{apply_right_inverse_values, RightInverseOptions, StopRule};
use shockhopf::returnmap::*;
use shockhopf::spaces::{norm, Grid1D, GridFunction, NormKind};
use std::f64::consts::PI;
use std::sync::OnceLock;

fn grid() -> Grid1D {
    Grid1D::with_spacing(30.0, 0.05).unwrap()
}

fn family() -> SystemFamily {
    SystemFamily::exemplar(grid())
}

fn poincare() -> PoincareSystem {
    assemble_poincare(family(), 10.0, TruncationOrder::Linear).unwrap()
}

fn smooth_bump(g: Grid1D, n: usize, scale: f64) -> GridFunction {
    let v = (0..g.len() * n)
        .map(|k| {
            let x = g.x(k / n) - 0.5;
            scale * (1.0 + (k % n) as f64) * x * (-(x * x) / 2.0).exp()
        })
        .collect();
    GridFunction::new(g, n, v).unwrap()
}

// ψ

#[test]
fn psi_matches_both_branches() {
    assert_eq!(truncation_psi(0.25), 0.25);
    assert_eq!(truncation_psi(2.0), 1.0);
    assert_eq!(truncation_psi(0.0), 0.0);
    assert_eq!(truncation_psi(0.5), 0.5);
    assert_eq!(truncation_psi(1.0), 1.0);
}

#[test]
fn psi_join_is_twice_differentiable() {
    let d = 1e-6;
    for z in [0.5, 1.0] {
        let left = (truncation_psi(z) - truncation_psi(z - d)) / d;
        let right = (truncation_psi(z + d) - truncation_psi(z)) / d;
        assert!((left - right).abs() < 1e-5, "slope jump at {z}: {left} vs {right}");
        let c_left = (truncation_psi_derivative(z) - truncation_psi_derivative(z - d)) / d;
        let c_right = (truncation_psi_derivative(z + d) - truncation_psi_derivative(z)) / d;
        assert!((c_left - c_right).abs() < 1e-4, "curvature jump at {z}: {c_left} vs {c_right}");
    }
    for k in 1..1000 {
        let z = 0.5 + 0.5 * k as f64 / 1000.0;
        let fd = (truncation_psi(z + 1e-7) - truncation_psi(z - 1e-7)) / 2e-7;
        assert!((fd - truncation_psi_derivative(z)).abs() < 1e-6);
    }
}

#[test]
fn psi_is_bounded_monotone_with_known_peak_slope() {
    // p′(s) = 1 + 12s² − 28s³ + 15s⁴ peaks where 12s(1−s)(2−5s) = 0, s = 0.4
    let oracle = 1.0 + 12.0 * 0.16 - 28.0 * 0.064 + 15.0 * 0.0256;
    let mut max_slope: f64 = 0.0;
    for k in 0..=200_000 {
        let z = 2.0 * k as f64 / 200_000.0;
        let (p, dp) = (truncation_psi(z), truncation_psi_derivative(z));
        assert!((0.0..=1.0).contains(&p));
        assert!(dp >= 0.0);
        max_slope = max_slope.max(dp);
    }
    assert!((max_slope - oracle).abs() < 1e-8, "{max_slope} vs {oracle}");
    assert!((truncation_psi_derivative(0.7) - 1.512).abs() < 1e-12);
}

// perturbation system

#[test]
fn q_vanishes_to_second_order() {
    let sys = family().at(0.0).unwrap();
    let zero = sys.zero();
    assert!(sys.q(&zero.values).iter().all(|v| v.abs() < 1e-15));
    let u = smooth_bump(sys.grid(), 2, 1.0);
    let size = |s: f64| sys.q(&u.scaled(s).values).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|s| size(*s) / (s * s)).collect();
    // exemplar Q is exactly quadratic
    for r in &ratios {
        assert!((r / ratios[0] - 1.0).abs() < 1e-6, "{ratios:?}");
    }
    let fit = fit_power_law(&[1e-2, 1e-3, 1e-4], &[size(1e-2), size(1e-3), size(1e-4)]).unwrap();
    assert!((fit.slope - 2.0).abs() < 1e-6);
}

#[test]
fn nonlinearity_is_a_conservative_difference() {
    let sys = family().at(0.0).unwrap();
    let u = smooth_bump(sys.grid(), 2, 0.1);
    let dq = GridFunction::new(sys.grid(), 2, sys.nonlinearity(&u.values)).unwrap();
    let h = sys.grid().h();
    let mass: Vec<f64> = (0..2).map(|c| dq.component(c).iter().sum::<f64>() * h).collect();
    assert!(mass.iter().all(|m| m.abs() < 1e-14), "{mass:?}");
}

#[test]
fn planted_pair_is_exact_on_the_discrete_operator() {
    let sys = family().at(0.01).unwrap();
    assert!((sys.gamma() - 0.01).abs() < 1e-15);
    assert!((sys.tau() - 1.0).abs() < 1e-15);
    assert!(sys.pair.residual < 1e-10, "{}", sys.pair.residual);
    assert!(sys.pair.left_residual < 1e-8, "{}", sys.pair.left_residual);
    let psi0 = sys.zero_mode().to_vec();
    assert!((sys.translational_coordinate(&psi0) - 1.0).abs() < 1e-12);
    assert!(sys.translational_coordinate(&sys.remove_translational(&psi0)).abs() < 1e-12);
}

// flow

#[test]
fn zero_data_gives_zero_trajectory() {
    let sys = family().at(0.0).unwrap();
    let flow = evolve_truncated(&sys, 0.0, &sys.zero(), 2.0 * PI, &FlowOptions::default()).unwrap();
    assert!(flow.w.iter().all(|w| w.norm() == 0.0));
    assert!(flow.v_final.values.iter().all(|v| *v == 0.0));
    assert!(flow.v_strong.iter().all(|v| *v == 0.0));
}

#[test]
fn linear_flow_rotates_the_amplitude_exactly() {
    let eps = 0.02;
    let sys = family().at(eps).unwrap();
    let opts = FlowOptions { nonlinear: false, ..Default::default() };
    let a = 0.05;
    let flow = evolve_truncated(&sys, a, &sys.zero(), 3.0, &opts).unwrap();
    let lambda = Complex64::new(eps, 1.0);
    for (t, w) in flow.times.iter().zip(&flow.w) {
        let exact = (lambda * t).exp() * a;
        assert!((w - exact).norm() < 1e-14, "t = {t}: {w} vs {exact}");
    }
    assert!(flow.v_final.values.iter().all(|v| *v == 0.0));
    assert_eq!(flow.theta[0], 0.0);
    assert!((flow.theta.last().unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn linear_period_is_two_pi_over_tau() {
    let mut fam = family();
    fam.design = CrossingDesign { tau_rate: 0.5, ..CrossingDesign::default() };
    for eps in [-0.02, 0.0, 0.03] {
        let sys = fam.at(eps).unwrap();
        let opts = FlowOptions { nonlinear: false, ..Default::default() };
        let p = solve_period(&sys, 0.05, &sys.zero(), &opts).unwrap();
        let exact = 2.0 * PI / (1.0 + 0.5 * eps);
        assert!((p.period - exact).abs() < 1e-8, "ε = {eps}: {} vs {exact}", p.period);
        assert!(p.theta_residual <= 1e-10);
    }
}

#[test]
fn nonlinear_period_deviation_is_small_in_a() {
    let sys = family().at(0.0).unwrap();
    let opts = FlowOptions::default();
    let mut devs = Vec::new();
    for a in [0.02, 0.04, 0.08] {
        let p = solve_period(&sys, a, &sys.zero(), &opts).unwrap();
        assert!(p.theta_residual <= 1e-10);
        assert!((p.event_estimate - p.period).abs() < 1e-6, "{p:?}");
        devs.push((a, (p.period - 2.0 * PI).abs()));
    }
    let c = devs.iter().map(|(a, d)| d / a).fold(0.0, f64::max);
    assert!(c < 0.05, "|T − 2π|/a up to {c}");
    // the deviation shrinks with a
    assert!(devs[0].1 < devs[1].1 && devs[1].1 < devs[2].1, "{devs:?}");
}

#[test]
fn period_solve_rejects_zero_amplitude() {
    let sys = family().at(0.0).unwrap();
    assert!(solve_period(&sys, 0.0, &sys.zero(), &FlowOptions::default()).is_err());
}

#[test]
fn transverse_growth_is_quadratic_and_grid_stable() {
    let constant = |g: Grid1D| {
        let sys = SystemFamily::exemplar(g).at(0.0).unwrap();
        let a = 0.05;
        let flow = evolve_truncated(&sys, a, &sys.zero(), 2.0 * PI, &FlowOptions::default()).unwrap();
        flow.v_strong.iter().copied().fold(0.0, f64::max) / (a * a)
    };
    let coarse = constant(grid());
    let fine = constant(Grid1D::with_spacing(30.0, 0.025).unwrap());
    assert!(coarse > 0.0 && coarse < 10.0, "{coarse}");
    assert!((fine / coarse - 1.0).abs() < 0.1, "{coarse} vs {fine}");
}

#[test]
fn amplitude_bound_violation_is_a_smallness_error() {
    let sys = family().at(0.0).unwrap();
    let opts = FlowOptions { amplitude_bound: 1.0 + 1e-9, ..Default::default() };
    let err = evolve_truncated(&sys, 0.05, &sys.zero(), 2.0 * PI, &opts).unwrap_err();
    assert!(matches!(err, shockhopf::error::Error::SmallnessBox(_)), "{err}");
}

// Poincaré system

#[test]
fn trivial_orbit_has_zero_nonlinear_parts() {
    let p = poincare();
    for eps in [-0.01, 0.0, 0.02] {
        let s = p.evaluate(eps, 0.0, &p.zero_b()).unwrap();
        assert_eq!(s.n1, 0.0);
        assert!(s.n2.values.iter().all(|v| *v == 0.0));
        assert!((s.r - (2.0 * PI * eps).exp()).abs() < 1e-14);
    }
    let nonzero = smooth_bump(grid(), 2, 1e-3);
    assert!(p.evaluate(0.0, 0.0, &nonzero).is_err());
}

#[test]
fn primary_multiplier_matches_the_computed_eigenvalue() {
    let p = poincare();
    let eps = 0.02;
    let s = p.evaluate(eps, 0.0, &p.zero_b()).unwrap();
    let op = p.system(eps).unwrap().op.clone();
    let pair = crossing_pair(&op, &SearchBox::default()).unwrap();
    let direct = (2.0 * PI * pair.lambda.re / pair.lambda.im).exp();
    assert!((s.r - direct).abs() < 1e-8, "{} vs {direct}", s.r);
}

#[test]
fn scalar_remainder_has_quadratic_envelope() {
    let p = poincare();
    let zero = p.zero_b();
    let mut worst: f64 = 0.0;
    let mut at_eps0 = Vec::new();
    for eps in [-0.005, 0.0, 0.005] {
        for a in [0.01, 0.02, 0.04] {
            let s = p.evaluate(eps, a, &zero).unwrap();
            worst = worst.max(s.n1.abs() / (a * a));
            if eps == 0.0 {
                at_eps0.push(s.n1.abs());
            }
        }
    }
    assert!(worst < 0.05, "|N₁|/a² up to {worst}");
    let fit = fit_power_law(&[0.01, 0.02, 0.04], &at_eps0).unwrap();
    assert!(fit.slope >= 2.0 - 0.1, "exponent {}", fit.slope);
}

#[test]
fn periodic_inverse_solves_the_period_map_equation() {
    let p = poincare();
    let sys = p.system(0.0).unwrap();
    let y = smooth_bump(grid(), 2, 1.0);
    let t = 2.0 * PI * 1.001;
    let x = p.periodic_inverse(&sys, t, &y.values).unwrap();
    let sx = p.transverse_map(&sys, t, &x).unwrap();
    let target = sys.remove_translational(&sys.projectors.pi_tilde_values(&y.values));
    let err = x.iter().zip(&sx).zip(&target).map(|((a, b), c)| (a - b - c).abs()).fold(0.0, f64::max);
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(err < 1e-10 * scale, "{err:e} at scale {scale}");
}

#[test]
fn periodic_inverse_agrees_with_the_neumann_series() {
    let g = Grid1D::with_spacing(20.0, 0.1).unwrap();
    let fam = SystemFamily::exemplar(g);
    let p = PoincareSystem::new(fam, FlowOptions { steps: 128, ..Default::default() });
    let sys = p.system(0.0).unwrap();
    let raw = smooth_bump(g, 2, 1.0);
    let y = GridFunction::new(g, 2, sys.remove_translational(&sys.projectors.pi_tilde_values(&raw.values))).unwrap();
    let t = 2.0 * PI;
    let x = p.periodic_inverse(&sys, t, &y.values).unwrap();
    let sg = Semigroup::crank_nicolson(sys.op.clone(), t, 128, Some(sys.projectors.clone())).unwrap();
    let opts = RightInverseOptions { tol: 1e-12, max_terms: 4000, stop: StopRule::RawTolerance };
    let (reference, _) = apply_right_inverse_values(&sg, &y, &opts).unwrap();
    let reference = sys.remove_translational(&reference.values);
    let err = x.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(err < 1e-8 * scale, "{err:e} at scale {scale}");
}

// orbits

struct Orbits {
    small: PeriodicOrbit,
    mid: PeriodicOrbit,
    large: PeriodicOrbit,
}

fn orbits() -> &'static Orbits {
    static CELL: OnceLock<Orbits> = OnceLock::new();
    CELL.get_or_init(|| {
        let p = poincare();
        let o = OrbitOptions::default();
        Orbits {
            small: find_periodic_orbit(&p, 0.0125, &o).unwrap(),
            mid: find_periodic_orbit(&p, 0.025, &o).unwrap(),
            large: find_periodic_orbit(&p, 0.05, &o).unwrap(),
        }
    })
}

#[test]
fn zero_amplitude_orbit_is_trivial() {
    let o = find_periodic_orbit(&poincare(), 0.0, &OrbitOptions::default()).unwrap();
    assert_eq!(o.eps, 0.0);
    assert!((o.period - 2.0 * PI).abs() < 1e-14);
    assert!(o.snapshots.iter().all(|s| s.values.iter().all(|v| *v == 0.0)));
}

#[test]
fn orbit_is_periodic_with_inactive_truncation() {
    let o = &orbits().large;
    assert!(o.periodicity_residual <= 1e-6, "{}", o.periodicity_residual);
    assert!(o.clamp_ratio < 0.5 * o.truncation);
    assert!(o.point.f_residual <= 1e-10 && o.point.g_residual <= 1e-10);
    assert!(o.transverse_constant < 10.0);
    assert!(o.drift.abs() <= grid().h());
    assert!(o.mass_drift <= 1e-8, "{:e}", o.mass_drift);
    assert!(o.eps > 0.0);
}

#[test]
fn orbit_period_extrapolates_to_linear_period() {
    let os = orbits();
    let a: Vec<f64> = [&os.small, &os.mid, &os.large].iter().map(|o| o.a).collect();
    let t: Vec<f64> = [&os.small, &os.mid, &os.large].iter().map(|o| o.period).collect();
    let a2: Vec<f64> = a.iter().map(|x| x * x).collect();
    let fit = fit_line(&a2, &t).unwrap();
    assert!((fit.intercept / (2.0 * PI) - 1.0).abs() < 1e-3, "{fit:?}");
}

#[test]
fn amplitude_ledger_is_two_sided_in_a() {
    let os = orbits();
    for o in [&os.small, &os.mid, &os.large] {
        assert!(o.amplitude_spread() < 1.5, "{}", o.amplitude_spread());
    }
    let drift = os.large.amplitude_ratio() / os.mid.amplitude_ratio() - 1.0;
    assert!(drift.abs() <= 0.25, "{drift}");
}

#[test]
fn branch_is_quadratic_in_a() {
    let os = orbits();
    let ratio = os.large.eps / os.mid.eps;
    assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    let ratio = os.mid.eps / os.small.eps;
    assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
}

#[test]
fn orbit_becomes_tangent_to_the_pair_plane() {
    let os = orbits();
    let a = [os.small.a, os.mid.a, os.large.a];
    let d = [os.small.projection_defect, os.mid.projection_defect, os.large.projection_defect];
    let fit = fit_power_law(&a, &d).unwrap();
    assert!(fit.slope >= 1.0 - 0.05, "slope {}", fit.slope);
}

#[test]
fn translated_orbit_is_an_orbit_of_the_translated_system() {
    let o = &orbits().large;
    let k = 4usize;
    let g = grid();
    let h = g.h();
    let base = family().at(o.eps).unwrap();
    let mut fam = family();
    fam.phase = Some(base.profile().values.at(g.center() + k, 0));
    fam.design.center -= k as f64 * h;
    let shifted_sys = fam.at(o.eps).unwrap();
    let u0 = &o.snapshots[0];
    let mut us = GridFunction::zeros(g, 2);
    for i in 0..g.len() - k {
        for c in 0..2 {
            us.values[i * 2 + c] = u0.at(i + k, c);
        }
    }
    let opts = FlowOptions::default();
    let ut = evolve_state(&shifted_sys, &us, o.period, opts.steps, &opts).unwrap();
    let mut diff = ut.clone();
    diff.axpy(-1.0, &us).unwrap();
    let res = norm(&diff, NormKind::B1, None).unwrap() / norm(&us, NormKind::B1, None).unwrap();
    assert!(res <= 1e-5, "{res:e}");
}

#[test]
fn quadratic_truncation_finds_the_same_orbit() {
    let p = assemble_poincare(family(), 10.0, TruncationOrder::Quadratic).unwrap();
    let o = find_periodic_orbit(&p, 0.05, &OrbitOptions::default()).unwrap();
    let lin = &orbits().large;
    assert!((o.eps / lin.eps - 1.0).abs() < 1e-8, "{} vs {}", o.eps, lin.eps);
    assert!(o.clamp_ratio < 0.5 * o.truncation);
}

#[test]
fn step_halving_leaves_the_orbit_unchanged() {
    let p = PoincareSystem::new(family(), FlowOptions { steps: 1024, ..Default::default() });
    let o = find_periodic_orbit(&p, 0.05, &OrbitOptions::default()).unwrap();
    let lin = &orbits().large;
    assert!((o.eps / lin.eps - 1.0).abs() < 1e-3, "{} vs {}", o.eps, lin.eps);
    assert!((o.period - lin.period).abs() < 1e-6);
}

use num_complex::Complex64;
use shockhopf::error::Error;
use shockhopf::linops::*;
use shockhopf::profiles::{solve_profile, Burgers, Exemplar2x2};
use shockhopf::resummation::OneStep;
use shockhopf::spaces::{norm, Grid1D, GridFunction, NormKind};

fn exemplar_grid() -> Grid1D {
    Grid1D::with_spacing(40.0, 0.05).unwrap()
}

fn burgers_op(half: f64, h: f64) -> DiscreteLinearOperator {
    let g = Grid1D::with_spacing(half, h).unwrap();
    let p = solve_profile(&Burgers::standard(), 0.0, g, None).unwrap();
    assemble_linearized(&p, &Burgers::standard()).unwrap()
}

fn constant_op(a: f64, half: f64, h: f64) -> DiscreteLinearOperator {
    let g = Grid1D::with_spacing(half, h).unwrap();
    let f = Burgers::with_states(a, a);
    let p = solve_profile(&f, 0.0, g, None).unwrap();
    assemble_linearized(&p, &f).unwrap()
}

#[test]
fn constant_coefficient_symbol() {
    let a = -0.7;
    for h in [0.05, 0.025] {
        let op = constant_op(a, 10.0, h);
        let g = op.grid();
        for xi in [0.5, 1.0, 2.0] {
            let f: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new(0.0, xi * g.x(i)).exp()).collect();
            let lf = op.apply_complex(&f);
            let sym = Complex64::new(-xi * xi, -a * xi);
            let c = g.center();
            let err = (lf[c] / f[c] - sym).norm();
            assert!(err <= h * h * xi.powi(3), "h={h} ξ={xi}: {err:e}");
        }
    }
}

#[test]
fn translational_mode_and_conservation() {
    let op = burgers_op(20.0, 0.02);
    let z = op.zero_mode().unwrap();
    assert!((z.ell[0] + 0.5).abs() < 1e-14);
    assert!(op.zero_mode_residual().unwrap() <= 1e-6);
    // the discrete mode is the sampled derivative up to O(h²)
    let du = &op.profile().derivative;
    let d = z.mode.values.iter().zip(&du.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(d < 1e-3, "{d}");

    let g = op.grid();
    let f: Vec<f64> = (0..g.len()).map(|i| (-(g.x(i) - 1.0).powi(2)).exp() * (3.0 * g.x(i)).cos()).collect();
    let mass = op.mass(&op.apply(&f))[0];
    assert!(mass.abs() <= 1e-10, "{mass:e}");

    let ex = exemplar_operator(&CrossingDesign::default(), 0.0, exemplar_grid()).unwrap();
    assert!(ex.zero_mode_residual().unwrap() <= 1e-6, "{}", ex.zero_mode_residual().unwrap());
    let z = ex.zero_mode().unwrap();
    assert!((z.ell[0] + 0.5).abs() < 1e-12 && z.ell[1].abs() < 1e-12, "{:?}", z.ell);
    let f: Vec<f64> = (0..ex.dim()).map(|k| (-(ex.grid().x(k / 2)).powi(2)).exp() * (1.0 + k as f64 % 2.0)).collect();
    for m in ex.mass(&ex.apply(&f)) {
        assert!(m.abs() <= 1e-10, "{m:e}");
    }
}

#[test]
fn exemplar_crossing_pair() {
    let d = CrossingDesign::default();
    let bx = SearchBox::default();
    let op = exemplar_operator(&d, 0.0, exemplar_grid()).unwrap();
    let pair = crossing_pair(&op, &bx).unwrap();
    assert!(pair.gamma().abs() <= 1e-4, "{}", pair.lambda);
    assert!((pair.tau() - d.tau0).abs() <= 1e-4, "{}", pair.lambda);
    assert!(pair.residual <= 1e-8 && pair.left_residual <= 1e-8, "{} {}", pair.residual, pair.left_residual);
    assert!(pair.mass <= 1e-8, "{:e}", pair.mass);
    println!("others: {:?}", pair.others);

    let scan = crossing_family(|e| exemplar_operator(&d, e, exemplar_grid()), &[-0.01, 0.01], &bx).unwrap();
    assert!(scan.transversal && scan.slope.unwrap() > 0.0, "{scan:?}");
    for r in &scan.rows {
        assert_eq!(r.gamma.signum(), r.eps.signum());
    }
    let json = serde_json::to_string(&pair).unwrap();
    let back: SpectralPair = serde_json::from_str(&json).unwrap();
    assert_eq!(back.lambda, pair.lambda);
}

#[test]
fn burgers_has_no_crossing_pair() {
    let op = burgers_op(20.0, 0.05);
    match crossing_pair(&op, &SearchBox::default()) {
        Err(Error::SpectralAssumption(_)) => {}
        other => panic!("expected spectral-assumption error, got {other:?}"),
    }
}

#[test]
fn extra_unstable_eigenvalues_are_reported() {
    let g = exemplar_grid();
    let flux = Exemplar2x2::default();
    let base = assemble_linearized(&solve_profile(&flux, 0.0, g, None).unwrap(), &flux).unwrap();
    let v = bump_modes(g, 2, 4, 0.0, 1.0);
    let mut lam = nalgebra::DMatrix::zeros(4, 4);
    lam[(0, 0)] = 0.1;
    lam[(0, 1)] = 1.0;
    lam[(1, 0)] = -1.0;
    lam[(1, 1)] = 0.1;
    lam[(2, 2)] = 0.05;
    lam[(2, 3)] = 2.0;
    lam[(3, 2)] = -2.0;
    lam[(3, 3)] = 0.05;
    let op = base.clone().with_planted(PlantedModes::new(&base, v, &lam).unwrap()).unwrap();
    match crossing_pair(&op, &SearchBox::default()) {
        Err(Error::ExtraUnstable(msg)) => assert!(msg.contains("0.050000+2.000000i"), "{msg}"),
        other => panic!("expected extra-unstable error, got {other:?}"),
    }
}

#[test]
fn small_grid_matches_dense_eigensolve() {
    let d = CrossingDesign::default();
    let g = Grid1D::with_spacing(12.0, 0.15).unwrap();
    let op = exemplar_operator(&d, 0.02, g).unwrap();
    assert!(op.dim() <= 400);
    let bx = SearchBox::default();
    let mut dense: Vec<Complex64> = dense_spectrum(&op)
        .unwrap()
        .into_iter()
        .filter(|z| bx.contains(*z) && z.im >= 0.0 && z.norm() > bx.zero_radius)
        .collect();
    dense.sort_by(|a, b| b.re.total_cmp(&a.re));
    let sparse: Vec<Complex64> =
        box_eigenvalues(&op, &bx).unwrap().into_iter().filter(|z| z.norm() > bx.zero_radius).collect();
    assert_eq!(dense.len(), sparse.len(), "{dense:?} vs {sparse:?}");
    for (a, b) in dense.iter().zip(&sparse) {
        assert!((a - b).norm() < 1e-8, "{a} {b}");
    }
    assert!(dense_spectrum(&exemplar_operator(&d, 0.0, exemplar_grid()).unwrap()).is_err());
}

#[test]
fn essential_envelope_examples() {
    let flux = Burgers::standard();
    let xi: Vec<f64> = (-40..=40).map(|k| k as f64 * 0.1).collect();
    let env = essential_envelope(&flux, 0.0, &xi).unwrap();
    assert_eq!(dispersion(-1.0, 1.0), Complex64::new(-1.0, -1.0));
    for c in &env.curves {
        assert_eq!(c[40], Complex64::new(0.0, 0.0));
    }
    assert!(env.max_real(0.1) < 0.0);
    assert!(env.margin(Complex64::new(0.1, 1.0)) > 0.0);
    assert!((env.margin(Complex64::new(-0.5, 0.5)) - (-0.5 + 0.25)).abs() < 1e-15);

    #[derive(Debug)]
    struct Rotation;
    impl shockhopf::profiles::Flux for Rotation {
        fn name(&self) -> String {
            "rotation".into()
        }
        fn dim(&self) -> usize {
            2
        }
        fn flux(&self, _: f64, u: &[f64]) -> Vec<f64> {
            vec![u[1], -u[0]]
        }
        fn jacobian(&self, _: f64, _: &[f64]) -> nalgebra::DMatrix<f64> {
            nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
        }
        fn endstates(&self, _: f64) -> (Vec<f64>, Vec<f64>) {
            (vec![0.0, 0.0], vec![0.0, 0.0])
        }
    }
    assert!(matches!(essential_envelope(&Rotation, 0.0, &xi), Err(Error::SpectralAssumption(_))));
}

fn exemplar_setup() -> (DiscreteLinearOperator, SpectralPair, Projectors) {
    let op = exemplar_operator(&CrossingDesign::default(), 0.0, exemplar_grid()).unwrap();
    let pair = crossing_pair(&op, &SearchBox::default()).unwrap();
    let proj = projections(&pair, &op).unwrap();
    (op, pair, proj)
}

fn random_function(g: Grid1D, n: usize, seed: u64) -> GridFunction {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let vals = (0..g.len() * n).map(|k| rng.gen_range(-1.0..1.0) * (-(g.x(k / n) / 8.0).powi(2)).exp()).collect();
    GridFunction::new(g, n, vals).unwrap()
}

#[test]
fn projector_examples() {
    let (op, pair, proj) = exemplar_setup();
    let phi = &pair.right.values;
    let re: Vec<f64> = phi.iter().map(|z| z.re).collect();
    let im: Vec<f64> = phi.iter().map(|z| z.im).collect();
    // Π acts on real functions; φ₊ = ℜφ₊ + iℑφ₊ and both parts are in range
    for part in [&re, &im] {
        let p = proj.pi_values(part);
        let e = p.iter().zip(part.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(e <= 1e-10, "{e:e}");
        let t = proj.pi_tilde_values(part);
        assert!(t.iter().all(|v| v.abs() <= 1e-10));
    }
    let f = random_function(op.grid(), 2, 7);
    let p1 = proj.pi(&f).unwrap();
    let p2 = proj.pi(&p1).unwrap();
    let e = p1.values.iter().zip(&p2.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(e <= 1e-10, "idempotence {e:e}");
    for m in op.mass(&p1.values) {
        assert!(m.abs() <= 1e-8, "{m:e}");
    }
    // ΠL = LΠ
    let lp = op.apply(&p1.values);
    let pl = proj.pi_values(&op.apply(&f.values));
    let e = lp.iter().zip(&pl).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(e <= 1e-8, "commutation {e:e}");

    let z = op.zero_mode().unwrap();
    let p0 = proj.pi0(&z.mode).unwrap();
    let e = p0.values.iter().zip(&z.mode.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(e <= 1e-12);
    let du = &op.profile().derivative;
    assert!((proj.ell_pairing(&du.values).unwrap() - 1.0).abs() < 1e-8);

    let mut bad = pair.clone();
    bad.left.values.iter_mut().for_each(|z| *z = z.conj());
    assert!(matches!(projections(&bad, &op), Err(Error::Numerical(_))));
}

#[test]
fn stationary_mode_is_preserved() {
    let (op, _, _) = exemplar_setup();
    let z = op.zero_mode().unwrap();
    let u = semigroup_step(&op.without_planted(), &z.mode, 2.0, 200, None).unwrap();
    let e = u.values.iter().zip(&z.mode.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(e <= 1e-6, "{e:e}");
    let u = semigroup_step(&op, &z.mode, 2.0, 200, None).unwrap();
    let e = u.values.iter().zip(&z.mode.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(e <= 1e-6, "{e:e}");
}

#[test]
fn advected_gaussian_matches_closed_form() {
    let a = 0.8;
    let s0 = 0.25;
    let t = 1.0;
    let err = |h: f64, steps: usize| {
        let op = constant_op(a, 15.0, h);
        let g = op.grid();
        let exact = |x: f64, s: f64| (-(x * x) / (4.0 * s)).exp() / (4.0 * std::f64::consts::PI * s).sqrt();
        let f = g.sample(|x| exact(x, s0));
        let u = semigroup_step(&op, &f, t, steps, None).unwrap();
        (0..g.len()).map(|i| (u.values[i] - exact(g.x(i) - a * t, s0 + t)).abs()).fold(0.0, f64::max)
    };
    let e1 = err(0.1, 40);
    let e2 = err(0.05, 80);
    let rate = (e1 / e2).log2();
    assert!(e1 < 1e-3 && (rate - 2.0).abs() < 0.3, "{e1:e} {e2:e} rate {rate}");
}

#[test]
fn transverse_smoothing_exponent() {
    let (op, pair, proj) = exemplar_setup();
    let period = 2.0 * std::f64::consts::PI / pair.tau();
    let g = op.grid();
    let times = shockhopf::numerics::fit::logspace(0.01, period, 12);
    let ks = shockhopf::numerics::fit::logspace(0.2, 14.0, 40);
    let mut sup = vec![0.0f64; times.len()];
    for &k in &ks {
        let f = GridFunction::new(g, 2, (0..op.dim()).map(|m| (-(g.x(m / 2) / 6.0).powi(2)).exp() * (k * g.x(m / 2)).sin()).collect()).unwrap();
        let fnorm = norm(&f, NormKind::B1, None).unwrap();
        let df = derivative(&f);
        for (ti, &t) in times.iter().enumerate() {
            let steps = ((t / 0.005).ceil() as usize).max(8);
            let u = semigroup_step(&op, &df, t, steps, Some(&proj)).unwrap();
            sup[ti] = sup[ti].max(norm(&u, NormKind::B1, None).unwrap() / fnorm);
        }
    }
    let fit = shockhopf::numerics::fit::fit_power_law(&times, &sup).unwrap();
    println!("smoothing exponent {}", fit.slope);
    assert!(fit.slope >= -0.55, "{} {sup:?}", fit.slope);
}

fn derivative(f: &GridFunction) -> GridFunction {
    let g = f.grid;
    let n = f.n_comp;
    let h = g.h();
    let mut out = vec![0.0; f.values.len()];
    for i in 0..g.len() {
        for c in 0..n {
            let p = if i + 1 < g.len() { f.at(i + 1, c) } else { 0.0 };
            let m = if i > 0 { f.at(i - 1, c) } else { 0.0 };
            out[i * n + c] = (p - m) / (2.0 * h);
        }
    }
    GridFunction::new(g, n, out).unwrap()
}

#[test]
fn semigroup_invariants() {
    let (op, pair, proj) = exemplar_setup();
    let period = 2.0 * std::f64::consts::PI / pair.tau();
    let g = op.grid();
    let sg = Semigroup::new(op.clone(), period, 256, Some(proj.clone())).unwrap();
    let f = g.sample(|x| (-(x - 1.0).powi(2)).exp());
    let f2 = GridFunction::new(g, 2, f.values.iter().flat_map(|v| [*v, 0.5 * v]).collect()).unwrap();
    let df = derivative(&f2);
    let m0 = op.mass(&proj.pi_tilde_values(&df.values));
    let mut worst_mass: f64 = 0.0;
    let mut worst_pi: f64 = 0.0;
    sg.evolve_with(&df.values, 256, |_, u| {
        for (m, z) in op.mass(u).iter().zip(&m0) {
            worst_mass = worst_mass.max((m - z).abs());
        }
        worst_pi = worst_pi.max(proj.pi_values(u).iter().map(|v| v.abs()).fold(0.0, f64::max));
    })
    .unwrap();
    assert!(worst_mass <= 1e-8, "{worst_mass:e}");
    assert!(worst_pi <= 1e-8, "{worst_pi:e}");
    let c = sg.x1_stability(&[f2.clone(), df.clone(), random_function(g, 2, 3)]).unwrap();
    assert!(c.is_finite() && c >= 0.0);
    println!("X1 stability constant {c}");

    // the projected semigroup can feed the series; the bare one cannot
    assert!(sg.check_transverse().is_ok());
    let bare = Semigroup::new(op.clone(), period, 256, None).unwrap();
    assert!(matches!(bare.check_transverse(), Err(Error::Configuration(_))));
    assert!(Semigroup::new(op, -1.0, 10, None).is_err());
}

#[test]
fn outgoing_signal_leaves_without_reflection() {
    let op = constant_op(1.0, 20.0, 0.05);
    let g = op.grid();
    let f = g.sample(|x| (-(x - 10.0).powi(2)).exp());
    let m0 = op.mass(&f.values)[0];
    let t = 40.0;
    let u = semigroup_step(&op, &f, t, 800, None).unwrap();
    let left = op.mass(&u.values)[0];
    // free-space mass still inside the window: the upstream tail of the spreading bump
    let sd = (2.0 * t + 0.5f64).sqrt();
    let cdf = |x: f64| 0.5 * statrs::function::erf::erfc(-x / (sd * std::f64::consts::SQRT_2));
    let free = m0 * (cdf(20.0 - 10.0 - t) - cdf(-20.0 - 10.0 - t));
    assert!(left - free <= 1e-4 * m0, "{left:e} vs free {free:e}");
}

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use shockhopf::bifurcation::*;
use shockhopf::error::{Error, Result};
use shockhopf::numerics::ode::{integrate, OdeOptions};
use shockhopf::numerics::roots::bisect;
use shockhopf::profiles::{solve_profile, Burgers};
use shockhopf::spaces::{norm, Grid1D, GridFunction, NormKind};
use std::f64::consts::PI;

/// `b̂ = Sb + N₂` with `S = diag(s)` and
/// `N₂ = a²c + aMb + Q(b,b)`; scalar block `â = e^ε a − a³ + 0.1a Σb`.
struct QuadraticMap {
    s: Vec<f64>,
    c: Vec<f64>,
    m: DMatrix<f64>,
    q: Vec<DMatrix<f64>>,
}

impl QuadraticMap {
    fn new(d: usize) -> Self {
        let s = (0..d).map(|k| 0.2 + 0.08 * k as f64).collect();
        let c = (0..d).map(|k| (1.3 * k as f64 + 0.4).cos()).collect();
        let m = DMatrix::from_fn(d, d, |k, j| 0.5 * ((k + 2 * j + 1) as f64).sin());
        let q = (0..d).map(|k| DMatrix::from_fn(d, d, |i, j| 0.8 * ((k + 3 * i + 5 * j) as f64).cos())).collect();
        Self { s, c, m, q }
    }

    fn dim(&self) -> usize {
        self.s.len()
    }

    fn n2(&self, a: f64, b: &DVector<f64>) -> DVector<f64> {
        let mb = &self.m * b;
        DVector::from_fn(self.dim(), |k, _| a * a * self.c[k] + a * mb[k] + b.dot(&(&self.q[k] * b)))
    }

    /// Newton on `(I − S)b − N₂(b) = 0` with the exact Jacobian.
    fn newton(&self, a: f64) -> DVector<f64> {
        let d = self.dim();
        let mut b = DVector::zeros(d);
        for _ in 0..50 {
            let n2 = self.n2(a, &b);
            let g = DVector::from_fn(d, |k, _| (1.0 - self.s[k]) * b[k] - n2[k]);
            let jac = DMatrix::from_fn(d, d, |k, j| {
                let qs = &self.q[k] + self.q[k].transpose();
                let dq = (qs * &b)[j];
                (if k == j { 1.0 - self.s[k] } else { 0.0 }) - a * self.m[(k, j)] - dq
            });
            let step = jac.lu().solve(&g).unwrap();
            b -= &step;
            if step.norm() < 1e-16 {
                break;
            }
        }
        b
    }
}

impl DiscreteSystem for QuadraticMap {
    fn zero_b(&self) -> GridFunction {
        GridFunction::zeros(Grid1D::new(1.0, self.dim()).unwrap(), 1)
    }

    fn evaluate(&self, eps: f64, a: f64, b: &GridFunction) -> Result<StepEval> {
        let bv = DVector::from_column_slice(&b.values);
        let n2v = self.n2(a, &bv);
        let r = eps.exp();
        let n1 = -a * a * a + 0.1 * a * bv.sum();
        let mut n2 = self.zero_b();
        n2.values.copy_from_slice(n2v.as_slice());
        let mut b_hat = n2.clone();
        b_hat.values.iter_mut().enumerate().for_each(|(k, v)| *v += self.s[k] * bv[k]);
        Ok(StepEval { r, n1, a_hat: r * a + n1, b_hat, n2, period: 1.0 })
    }

    fn right_inverse(&self, _: f64, _: f64, _: &GridFunction, step: &StepEval) -> Result<GridFunction> {
        let mut out = step.n2.clone();
        out.values.iter_mut().zip(&self.s).for_each(|(v, s)| *v /= 1.0 - s);
        Ok(out)
    }
}

/// Brute-force Poincaré map of the planar normal form in Cartesian
/// coordinates: integrate from `(a, 0)` until `y` crosses zero upward with
/// `x > 0`, then Newton in `ε` on `P(ε) = a`.
fn planar_oracle(nf: &HopfNormalForm, a: f64) -> f64 {
    let opts = OdeOptions { rtol: 1e-13, atol: 1e-16, h0: 1e-3, h_max: 0.05, max_steps: 1_000_000 };
    let (sigma, w) = (nf.cubic, nf.frequency);
    let rhs = move |eps: f64| {
        move |_t: f64, y: &[f64], dy: &mut [f64]| {
            let r2 = y[0] * y[0] + y[1] * y[1];
            dy[0] = eps * y[0] - w * y[1] + sigma * y[0] * r2;
            dy[1] = w * y[0] + eps * y[1] + sigma * y[1] * r2;
        }
    };
    let poincare = |eps: f64| -> f64 {
        let mut bracket = None;
        let t_end = 1.5 * nf.period();
        integrate(rhs(eps), 0.0, &[a, 0.0], t_end, &opts, |s| {
            if s.t0 > 0.5 * nf.period() && s.y0[1] < 0.0 && s.y1[1] >= 0.0 && s.y1[0] > 0.0 {
                bracket = Some((s.t0, s.y0.to_vec(), s.t1));
                return false;
            }
            true
        })
        .unwrap();
        let (t0, y0, t1) = bracket.expect("section crossing");
        let at = |t: f64| integrate(rhs(eps), t0, &y0, t, &opts, |_| true).unwrap().1;
        // secant on y(t) = 0 inside the bracketing step
        let (mut ta, mut tb) = (t0, t1);
        let (mut ya, mut yb) = (y0[1], at(t1)[1]);
        for _ in 0..60 {
            if yb.abs() < 1e-17 || ya == yb {
                break;
            }
            let tn = tb - yb * (tb - ta) / (yb - ya);
            ta = tb;
            ya = yb;
            tb = tn;
            yb = at(tb)[1];
        }
        at(tb)[0]
    };
    let mut eps = -sigma * a * a * 0.9;
    for _ in 0..30 {
        let f = poincare(eps) - a;
        let h = 1e-7;
        let df = (poincare(eps + h) - poincare(eps - h)) / (2.0 * h);
        let step = f / df;
        eps -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    eps
}

#[test]
fn reduction_at_the_origin_is_immediate() {
    let nf = HopfNormalForm::supercritical();
    let zero = nf.zero_b();
    let red = reduce_b(&nf, 0.03, 0.0, &zero, None, &ReduceOptions::default()).unwrap();
    assert_eq!(red.iterations, 1);
    assert!(red.b.values.iter().all(|v| *v == 0.0));
    assert_eq!(red.increment, 0.0);
    assert!(red.bound_constant.is_none());
}

#[test]
fn reduction_matches_dense_newton() {
    let qm = QuadraticMap::new(7);
    let zero = qm.zero_b();
    for a in [0.02, 0.05, 0.1] {
        let red = reduce_b(&qm, 0.01, a, &zero, None, &ReduceOptions::default()).unwrap();
        let oracle = qm.newton(a);
        let err = red.b.values.iter().zip(oracle.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-10, "a = {a}: {err:e}");
        let (_, g) = qm.residuals(a, &red.b, &red.step).unwrap();
        assert!(g <= 1e-11, "{g:e}");
    }
}

#[test]
fn reduction_scales_quadratically() {
    let qm = QuadraticMap::new(7);
    let nf = HopfNormalForm::supercritical();
    let systems: [&dyn DiscreteSystem; 2] = [&qm, &nf];
    for sys in systems {
        let zero = sys.zero_b();
        let q: Vec<f64> = [0.02, 0.04, 0.08]
            .iter()
            .map(|&a| {
                let red = reduce_b(sys, a * a, a, &zero, None, &ReduceOptions::default()).unwrap();
                assert!(red.bound_constant.unwrap().is_finite());
                sys.weak_norm(&red.b).unwrap() / (a * a)
            })
            .collect();
        let (lo, hi) = (q.iter().cloned().fold(f64::INFINITY, f64::min), q.iter().cloned().fold(0.0, f64::max));
        assert!(hi / lo <= 1.2, "{q:?}");
    }
}

#[test]
fn reduction_reports_ball_escape() {
    let qm = QuadraticMap::new(7);
    let zero = qm.zero_b();
    let opts = ReduceOptions { x1_radius: 1e-4, ..Default::default() };
    let err = reduce_b(&qm, 0.0, 0.1, &zero, None, &opts).unwrap_err();
    assert!(matches!(err, Error::SmallnessBox(_)), "{err}");
}

#[test]
fn reduction_fixed_point_is_unique() {
    let qm = QuadraticMap::new(7);
    let zero = qm.zero_b();
    let opts = ReduceOptions::default();
    let mut rng = StdRng::seed_from_u64(11);
    for a in [0.03, 0.08] {
        let mut starts = Vec::new();
        for _ in 0..2 {
            let mut b = zero.clone();
            b.values.iter_mut().for_each(|v| *v = rng.gen_range(-0.02..0.02));
            starts.push(reduce_b(&qm, 0.0, a, &zero, Some(&b), &opts).unwrap().b);
        }
        let mut d = starts[0].clone();
        d.axpy(-1.0, &starts[1]).unwrap();
        assert!(norm(&d, NormKind::B1, None).unwrap() <= 10.0 * opts.tol);
    }
}

#[test]
fn ift_examples() {
    let opts = IftOptions::default();
    let affine = |d: f64, a: f64| -> Result<f64> { Ok(d - a * a) };
    for a in [0.0, 0.05, 0.2] {
        let s = brouwer_ift(affine, None, a, &opts).unwrap();
        assert!((s.delta - a * a).abs() < 1e-14);
        assert!((s.df0 - 1.0).abs() < 1e-8);
    }

    let f = |d: f64, a: f64| -> Result<f64> { Ok(d + d * d - a * a * (1.0 + d)) };
    for a in [0.01, 0.1, 0.3] {
        let s = brouwer_ift(f, Some(1.0), a, &opts).unwrap();
        let oracle = bisect(|d| f(d, a).unwrap(), -0.5 * a * a, 2.0 * a * a, 1e-16).unwrap();
        assert!((s.delta - oracle).abs() <= 1e-10, "a = {a}: {} vs {oracle}", s.delta);
        assert!(s.residual <= opts.tol);
    }

    let err = brouwer_ift(affine, Some(1.0), 1.0, &opts).unwrap_err();
    assert!(matches!(err, Error::RootNotFound(_)), "{err}");

    let shifted = |d: f64, a: f64| -> Result<f64> { Ok(d - a * a + 1.0) };
    assert!(matches!(brouwer_ift(shifted, None, 0.1, &opts), Err(Error::Argument(_))));
    let flat = |d: f64, a: f64| -> Result<f64> { Ok(d * d * d - a * a) };
    assert!(matches!(brouwer_ift(flat, None, 0.1, &opts), Err(Error::Argument(_))));
}

#[test]
fn ift_brent_fallback() {
    // a poor derivative guess makes the chord iteration overshoot the ball
    let f = |d: f64, a: f64| -> Result<f64> { Ok(d - a * a) };
    let opts = IftOptions { radius: 0.05, ..Default::default() };
    let s = brouwer_ift(f, Some(0.01), 0.2, &opts).unwrap();
    assert_eq!(s.method, IftMethod::Brent);
    assert!((s.delta - 0.04).abs() < 1e-14);
}

#[test]
fn ift_solution_is_little_o_of_a() {
    let f = |d: f64, a: f64| -> Result<f64> { Ok(d + d * d - a * a * (1.0 + d)) };
    let ratios = ift_continuity(f, None, 10, &IftOptions { radius: 1.0, ..Default::default() }).unwrap();
    assert_eq!(ratios.len(), 10);
    assert!(ratios.windows(2).all(|w| w[1].1 < w[0].1));
    assert!(ratios.last().unwrap().1 < 2e-3);
}

fn branch_samples() -> Vec<f64> {
    vec![0.01, 0.025, 0.05, 0.075, 0.1]
}

#[test]
fn normal_form_branch_matches_planar_oracle() {
    let nf = HopfNormalForm::supercritical();
    let curve = solve_branch(&nf, &branch_samples(), &OmegaRule::Zero, &BranchOptions::default()).unwrap();
    assert!((curve.gamma - 2.0 * PI).abs() < 1e-6);
    assert_eq!(curve.direction(), 1);
    assert!(curve.continuous_at_zero);
    for p in &curve.points {
        let oracle = planar_oracle(&nf, p.a);
        assert!(((p.eps - oracle) / oracle).abs() <= 1e-3, "a = {}: {} vs {oracle}", p.a, p.eps);
        assert!(((p.eps - p.a * p.a) / (p.a * p.a)).abs() <= 1e-3);
        assert!(p.f_residual <= 1e-10 && p.g_residual <= 1e-10);
        assert!((p.period - 2.0 * PI).abs() < 1e-14);
    }
    let fit = curve.even_fit.unwrap();
    assert!((fit[0] - 1.0).abs() < 1e-6, "{fit:?}");
}

#[test]
fn subcritical_branch_flips_sign() {
    let nf = HopfNormalForm::subcritical();
    let curve = solve_branch(&nf, &branch_samples(), &OmegaRule::Zero, &BranchOptions::default()).unwrap();
    assert_eq!(curve.direction(), -1);
    for p in &curve.points {
        let oracle = planar_oracle(&nf, p.a);
        assert!(oracle < 0.0);
        assert!(((p.eps - oracle) / oracle).abs() <= 1e-3, "a = {}: {} vs {oracle}", p.a, p.eps);
    }
}

#[test]
fn branch_at_zero_amplitude_is_trivial() {
    let nf = HopfNormalForm::supercritical();
    let curve = solve_branch(&nf, &[0.0, 0.05], &OmegaRule::Zero, &BranchOptions::default()).unwrap();
    let p0 = &curve.points[0];
    assert_eq!(p0.a, 0.0);
    assert_eq!(p0.eps, 0.0);
    assert!(p0.b.values.iter().all(|v| *v == 0.0));
    assert!(curve.even_fit.is_none());
}

#[test]
fn branch_failures_name_the_sample() {
    let nf = HopfNormalForm::supercritical();
    let opts = BranchOptions { reduce: ReduceOptions { x1_radius: 1e-4, ..Default::default() }, ..Default::default() };
    let err = solve_branch(&nf, &[0.001, 0.1], &OmegaRule::Zero, &opts).unwrap_err();
    match err {
        Error::AtSample { a, source } => {
            assert_eq!(a, 0.1);
            assert!(matches!(*source, Error::SmallnessBox(_)));
        }
        other => panic!("{other}"),
    }
}

#[test]
fn kernel_direction_omega() {
    // the transverse block has no kernel, but the rule must still shift B by ω
    let nf = HopfNormalForm::supercritical();
    let mut dir = nf.zero_b();
    dir.values[1] = 1.0;
    let rule = OmegaRule::Kernel { sigma: 0.01, direction: dir };
    let omega = rule.omega(&nf.zero_b(), -0.05);
    assert!((omega.values[1] - 5e-4).abs() < 1e-18);
    let red = reduce_b(&nf, 0.0025, 0.05, &omega, None, &ReduceOptions::default()).unwrap();
    let plain = reduce_b(&nf, 0.0025, 0.05, &nf.zero_b(), None, &ReduceOptions::default()).unwrap();
    assert!((red.b.values[1] - plain.b.values[1] - 5e-4).abs() < 1e-14);
}

fn burgers_action() -> (TranslationAction, Grid1D) {
    let g = Grid1D::with_spacing(20.0, 0.05).unwrap();
    let p = solve_profile(&Burgers::standard(), 0.0, g, None).unwrap();
    (TranslationAction::new(&p), g)
}

#[test]
fn translate_identity_in_cone() {
    let (action, g) = burgers_action();
    let b = g.sample(|x| 0.002 * x * (-x * x).exp());
    let t = quotient_translate(&action, 0.1, &b, 1.0, 1.0).unwrap();
    assert!(t.shift.abs() <= 1e-5, "{}", t.shift);
    let d = t.b.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(d < 1e-7, "{d:e}");
    assert!(t.cone_ratio <= 1.0);
}

#[test]
fn translate_recovers_a_shift() {
    let (action, g) = burgers_action();
    let b0 = g.sample(|x| 0.002 * (-x * x).exp());
    let (a, shifted) = action.apply(0.3, 0.1, &b0).unwrap();
    assert!(norm(&shifted, NormKind::X1, None).unwrap() > 0.1);
    let t = quotient_translate(&action, a, &shifted, 1.0, 1.0).unwrap();
    assert!((t.shift + 0.3).abs() <= g.h(), "{}", t.shift);
    assert!(t.cone_ratio <= 1.0);
    // a small bracket must be widened to reach the minimum
    let t2 = quotient_translate(&action, a, &shifted, 1.0, 0.1).unwrap();
    assert!((t2.shift - t.shift).abs() < 1e-5);
}

#[test]
fn translate_zero_equilibrium() {
    let (action, g) = burgers_action();
    let t = quotient_translate(&action, 0.0, &GridFunction::zeros(g, 1), 1.0, 1.0).unwrap();
    assert_eq!(t.shift, 0.0);
    assert_eq!(t.norm, 0.0);
}

#[test]
fn translate_outside_the_cone_fails() {
    let (action, g) = burgers_action();
    let b = g.sample(|x| 0.05 * x * (-x * x).exp());
    let err = quotient_translate(&action, 0.01, &b, 1.0, 1.0).unwrap_err();
    assert!(matches!(err, Error::SmallnessBox(_)), "{err}");
}

use shockhopf::error::Error;
use shockhopf::kernels::ModelKernel;
use shockhopf::resummation::*;
use shockhopf::spaces::{l2, norm, Grid1D, GridFunction, NormKind};
use std::sync::Arc;

fn burgers_du(x: f64) -> f64 {
    let c = (0.5 * x).cosh();
    -0.5 / (c * c)
}

fn gaussian_sq(g: Grid1D) -> GridFunction {
    g.sample(|x| (-2.0 * x * x).exp())
}

#[test]
fn naive_sums_grow_like_p_series() {
    let k = ModelKernel::scattering(-1.0).unwrap();
    let s = naive_sum_norms(&k, 1, 1.0, 4096).unwrap();
    assert!((s.growth_exponent - 0.25).abs() <= 0.05, "{}", s.growth_exponent);
    let s = naive_sum_norms(&k, 0, 1.0, 4096).unwrap();
    assert!((s.growth_exponent - 0.75).abs() <= 0.05, "{}", s.growth_exponent);
    let j = ModelKernel::excited(-1.0, Arc::new(burgers_du)).unwrap();
    let s = naive_sum_norms(&j, 1, 1.0, 1024).unwrap();
    assert!((s.growth_exponent - 0.5).abs() <= 0.05, "{}", s.growth_exponent);
    assert!(naive_sum_norms(&k, 1, 0.5, 64).is_err());
    assert!(naive_sum_norms(&k, 1, 1.0, 8).is_err());
}

#[test]
fn signed_blocks_are_cauchy() {
    let k = ModelKernel::scattering(-1.0).unwrap();
    let e = cauchy_envelope(&k, 1.0, &[16, 32, 64, 128, 256, 512, 1024, 2048, 4096]).unwrap();
    assert!((e.fit.slope + 0.25).abs() <= 0.05, "{}", e.fit.slope);
    assert!(e.increments.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn cancelled_and_raw_tails_agree_on_finite_windows() {
    let k = ModelKernel::scattering(-1.0).unwrap();
    let g = Grid1D::with_spacing(40.0, 0.1).unwrap();
    let raw = resummed_tail(&k, 1.0, Some(30.0), TailMode::Raw, &g, 0.0).unwrap();
    let can = resummed_tail(&k, 1.0, Some(30.0), TailMode::Cancelled, &g, 0.0).unwrap();
    let d: Vec<f64> = raw.values.iter().zip(&can.values).map(|(a, b)| a - b).collect();
    assert!(l2(&d, &g) <= 1e-6, "{:e}", l2(&d, &g));
}

#[test]
fn infinite_tails() {
    let k = ModelKernel::scattering(-1.0).unwrap();
    let g = Grid1D::with_spacing(60.0, 0.1).unwrap();
    let err = resummed_tail(&k, 1.0, None, TailMode::Raw, &g, 0.0).unwrap_err();
    assert!(matches!(err, Error::Argument(_)));
    for t in [1.0, 4.0] {
        let tail = resummed_tail(&k, t, None, TailMode::Cancelled, &g, 0.0).unwrap();
        // ‖a⁻¹K(·,T)‖ + ∫_T^∞‖K_yy‖ with ‖K_yy(·,t)‖ = c t^{−5/4} exactly
        let kt = shockhopf::kernels::kernel_norm(&k, 0, 0, NormKind::B1, t, None).unwrap();
        let c = shockhopf::kernels::kernel_norm(&k, 2, 0, NormKind::B1, 1.0, None).unwrap();
        let bound = kt + 4.0 * c * t.powf(-0.25);
        let v = norm(&tail, NormKind::B1, None).unwrap();
        assert!(v <= bound, "T={t}: {v} > {bound}");
    }

    let j = ModelKernel::excited(-1.0, Arc::new(burgers_du)).unwrap();
    let sup = |h: f64| {
        let g = Grid1D::with_spacing(30.0, h).unwrap();
        [-20.0, -5.0, 0.0, 5.0, 20.0]
            .iter()
            .map(|&y| norm(&resummed_tail(&j, 1.0, None, TailMode::Cancelled, &g, y).unwrap(), NormKind::B1, None).unwrap())
            .fold(0.0, f64::max)
    };
    let (s1, s2) = (sup(0.1), sup(0.05));
    assert!(s1.is_finite() && s1 > 0.0);
    assert!((s1 / s2 - 1.0).abs() < 0.02, "{s1} {s2}");
}

#[test]
fn tail_is_uniform_in_y_and_grid_stable() {
    let k = ModelKernel::scattering(-1.0).unwrap();
    let sup = |h: f64| {
        let g = Grid1D::with_spacing(80.0, h).unwrap();
        [-30.0, -10.0, 0.0, 10.0, 30.0]
            .iter()
            .map(|&y| norm(&resummed_tail(&k, 1.0, None, TailMode::Cancelled, &g, y).unwrap(), NormKind::B1, None).unwrap())
            .fold(0.0, f64::max)
    };
    let (s1, s2) = (sup(0.2), sup(0.1));
    assert!((s1 / s2 - 1.0).abs() < 0.02, "{s1} {s2}");
}

#[test]
fn continuization_remainders() {
    let k = ModelKernel::scattering(-3.0).unwrap();
    let tr = continuization_error(&k, 1.0, 256, Continuization::Trapezoid).unwrap();
    assert!((tr.integrand_law.exponent + 1.75).abs() <= 0.05, "{}", tr.integrand_law.exponent);
    let si = continuization_error(&k, 1.0, 256, Continuization::Simpson).unwrap();
    assert!((si.tail_law.slope + 1.75).abs() <= 0.1, "{}", si.tail_law.slope);
    // higher order leaves a smaller remainder
    assert!(si.remainder_norms[0] < tr.remainder_norms[0]);
    let none = continuization_error(&k, 1.0, 256, Continuization::None).unwrap();
    let r = &none.remainder_norms;
    assert!(r[r.len() - 1] > 0.9 * r[0], "control case should not improve: {r:?}");
    assert!(continuization_error(&k, 1.0, 4, Continuization::Trapezoid).is_err());
}

#[test]
fn right_inverse_of_zero_is_zero() {
    let g = Grid1D::with_spacing(40.0, 0.5).unwrap();
    let op = KernelStep::model(-1.0, 1.0, g).unwrap();
    let (b, l) = apply_right_inverse(&op, &GridFunction::zeros(g, 1), &RightInverseOptions::default()).unwrap();
    assert!(b.values.iter().all(|v| *v == 0.0));
    assert_eq!(l.records.len(), 1);
}

#[test]
fn right_inverse_defining_equation_and_mass_escape() {
    let g = Grid1D::with_spacing(160.0, 0.25).unwrap();
    let op = KernelStep::model(-1.0, 1.0, g).unwrap();
    let n = gaussian_sq(g);
    let n_l1 = n.integral()[0];
    let (b, l) = apply_right_inverse(&op, &n, &RightInverseOptions::default()).unwrap();
    assert!(l.residual.unwrap() <= 1e-6);
    assert!(l.stop_index >= 2);
    assert_eq!(l.records.len(), l.stop_index + 1);
    for r in l.records.iter().take(65) {
        assert!(r.term_mass[0].abs() <= 1e-8 * n_l1, "j={} mass {:e}", r.j, r.term_mass[0]);
        assert!(r.cumulative_mass[0].abs() <= 1e-8 * n_l1);
    }
    let mass = b.integral()[0];
    assert!(mass.abs() > 100.0 * 1e-8);
    // the whole mass of n leaves through the upstream edge at speed |a|
    assert!((mass + n_l1).abs() < 1e-6 * n_l1, "{mass}");
}

#[test]
fn right_inverse_is_bounded_in_x1_under_domain_doubling() {
    let x1 = |half: f64| {
        let g = Grid1D::with_spacing(half, 0.25).unwrap();
        let op = KernelStep::model(-1.0, 1.0, g).unwrap();
        let (b, _) = apply_right_inverse(&op, &gaussian_sq(g), &RightInverseOptions::default()).unwrap();
        norm(&b, NormKind::X1, None).unwrap()
    };
    let (a, b) = (x1(80.0), x1(160.0));
    assert!(a.is_finite() && (a / b - 1.0).abs() < 0.01, "{a} {b}");
}

#[test]
fn right_inverse_reports_nonconvergence_with_ledger() {
    let g = Grid1D::with_spacing(80.0, 0.5).unwrap();
    let op = KernelStep::model(-1.0, 1.0, g).unwrap();
    let opts = RightInverseOptions { max_terms: 8, ..Default::default() };
    match apply_right_inverse(&op, &gaussian_sq(g), &opts) {
        Err(Error::SeriesNonConvergence(ledger)) => {
            assert_eq!(ledger.records.len(), 8);
            assert_eq!(ledger.dyadic_increments.len(), 3);
        }
        other => panic!("expected nonconvergence, got {other:?}"),
    }
}

struct Unprojected(KernelStep);

impl OneStep for Unprojected {
    fn grid(&self) -> Grid1D {
        self.0.grid()
    }
    fn components(&self) -> usize {
        1
    }
    fn period(&self) -> f64 {
        self.0.period()
    }
    fn apply(&self, f: &GridFunction) -> shockhopf::error::Result<GridFunction> {
        self.0.apply(f)
    }
    fn check_transverse(&self) -> shockhopf::error::Result<()> {
        Err(Error::Configuration("crossing pair present without projection".into()))
    }
}

#[test]
fn right_inverse_requires_transverse_projection() {
    let g = Grid1D::with_spacing(20.0, 0.5).unwrap();
    let op = Unprojected(KernelStep::model(-1.0, 1.0, g).unwrap());
    let err = apply_right_inverse(&op, &gaussian_sq(g), &RightInverseOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Configuration(_)));
}

#[test]
fn raw_tolerance_mode_stops_on_single_increments() {
    let g = Grid1D::with_spacing(80.0, 0.5).unwrap();
    let op = KernelStep::model(-1.0, 1.0, g).unwrap();
    let opts = RightInverseOptions { stop: StopRule::RawTolerance, tol: 1e-6, ..Default::default() };
    let (_, l) = apply_right_inverse(&op, &gaussian_sq(g), &opts).unwrap();
    assert!(l.records.last().unwrap().increment_norm < 1e-6);
    assert!(l.residual.unwrap() <= 1e-6);
}

#[test]
fn lipschitz_quotients() {
    let g = Grid1D::with_spacing(80.0, 0.5).unwrap();
    let n = gaussian_sq(g);
    let opts = RightInverseOptions::default();
    let deltas = [1e-2, 1e-3, 1e-4];

    let flat = lipschitz_in_parameter(|_| KernelStep::model(-1.0, 1.0, g), &n, 0.0, &deltas, &opts).unwrap();
    assert!(flat.b_quotients.iter().all(|q| *q == 0.0));

    let speed = lipschitz_in_parameter(|e| KernelStep::model(-1.0 + e, 1.0, g), &n, 0.0, &deltas, &opts).unwrap();
    let q = &speed.b_quotients;
    let spread = q.iter().cloned().fold(0.0, f64::max) / q.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 1.2, "{q:?}");
    let tq = speed.tail_quotients.unwrap();
    assert!(tq.iter().all(|v| v.is_finite()));

    let period = lipschitz_in_parameter(|e| KernelStep::model(-1.0, 1.0 + e, g), &n, 0.0, &deltas, &opts).unwrap();
    let q = &period.b_quotients;
    let spread = q.iter().cloned().fold(0.0, f64::max) / q.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(q.iter().all(|v| v.is_finite()) && spread < 1.2, "{q:?}");
}

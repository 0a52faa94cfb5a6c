//! One function per pipeline stage. Each returns the measured constants,
//! tables and plots; the criteria read the constants by name.

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;
use shockhopf::bifurcation::{solve_branch, BranchOptions, HopfNormalForm, OmegaRule};
use shockhopf::error::{Error, Result};
use shockhopf::kernels::{cancellation_residual, fit_norm_law, ModelKernel};
use shockhopf::linops::{
    assemble_linearized, crossing_family, crossing_pair, essential_envelope, exemplar_operator, projections, CrossingDesign, SearchBox,
};
use shockhopf::multid::{
    assemble_mode_family, gap_decay, multid_orbit, shape_fit_residual, transverse_flux_set, CylinderFamily, TransverseGrid,
};
use shockhopf::numerics::fit::{fit_line, logspace};
use shockhopf::profiles::{decay_rate, exemplar, ode_residual, solve_profile, Burgers, FluxFamily};
use shockhopf::resummation::{
    apply_right_inverse, cauchy_envelope, continuization_error, naive_sum_norms, Continuization, KernelStep, RightInverseOptions,
};
use shockhopf::returnmap::{find_periodic_orbit, FlowOptions, OrbitOptions, PeriodicOrbit, PoincareSystem, SystemFamily};
use shockhopf::spaces::{Grid1D, GridFunction, NormKind};
use std::f64::consts::PI;
use std::time::Instant;

use crate::config::{GridConfig, RunConfig};
use crate::oracle::normal_form_oracle;
use crate::results::{Document, Heatmap, LinePlot, Plot, StageResult, Table};
use crate::Stage;

pub fn run_stage(stage: Stage, cfg: &RunConfig) -> Result<StageResult> {
    match stage {
        Stage::Profile => profile(cfg),
        Stage::Spectrum => spectrum(cfg),
        Stage::Kernels => kernels(cfg),
        Stage::Resum => resum(cfg),
        Stage::Hopf => hopf(cfg),
        Stage::Cylinder => cylinder(cfg),
    }
}

/// `−(1 + 2α + 2β)/4`, the `B1` decay exponent of `∂_y^α ∂_t^β K`.
pub fn expected_exponent(alpha: usize, beta: usize) -> f64 {
    -((1 + 2 * alpha + 2 * beta) as f64) / 4.0
}

fn grid(g: &GridConfig) -> Result<Grid1D> {
    Grid1D::new(g.half_width, g.points)
}

fn flux(cfg: &RunConfig) -> Result<FluxFamily> {
    exemplar(&cfg.exemplar).ok_or_else(|| Error::Configuration(format!("unknown exemplar {:?}", cfg.exemplar)))
}

fn table(name: &str, columns: Vec<String>) -> Table {
    Table { name: name.into(), columns, rows: Vec::new() }
}

/// Every `k`-th node with `|x| ≤ half_width`, at most `max` of them.
fn thin_nodes(g: Grid1D, half_width: f64, max: usize) -> Vec<usize> {
    let inside: Vec<usize> = (0..g.len()).filter(|&i| g.x(i).abs() <= half_width + 1e-12).collect();
    let step = inside.len().div_ceil(max).max(1);
    inside.into_iter().step_by(step).collect()
}

fn profile(cfg: &RunConfig) -> Result<StageResult> {
    let mut r = StageResult::new(Stage::Profile);
    let f = flux(cfg)?;
    let g = grid(&cfg.grid)?;
    let p = solve_profile(f.as_ref(), 0.0, g, None)?;
    let n = p.dim();
    r.set("ode_residual", ode_residual(&p, f.as_ref())?);
    r.set("decay_rate", decay_rate(&p)?);
    let mut cols = vec!["x".to_string()];
    cols.extend((0..n).map(|c| format!("u{c}")));
    cols.extend((0..n).map(|c| format!("du{c}")));
    let mut t = table("profile", cols);
    for i in 0..g.len() {
        let mut row = vec![g.x(i)];
        row.extend((0..n).map(|c| p.values.at(i, c)));
        row.extend((0..n).map(|c| p.derivative.at(i, c)));
        t.push(row);
    }
    let xs = g.nodes();
    let mut plot = LinePlot::new("profile", &format!("{} profile", cfg.exemplar), "x", "u", false, false);
    for c in 0..n {
        plot = plot.line(&format!("u{c}"), &xs, &p.values.component(c));
    }
    r.tables.push(t);
    r.plots.push(Plot::Lines(plot));

    // reference: Burgers against -tanh(x/2) on [-20, 20] with 2001 nodes
    let start = Instant::now();
    let bg = Grid1D::new(20.0, 2001)?;
    let b = solve_profile(&Burgers::standard(), 0.0, bg, None)?;
    r.time("burgers", start.elapsed().as_secs_f64());
    let err = (0..bg.len()).map(|i| (b.values.at(i, 0) + (bg.x(i) / 2.0).tanh()).abs()).fold(0.0, f64::max);
    r.set("burgers_tanh_error", err);
    r.set("burgers_decay_rate", decay_rate(&b)?);
    Ok(r)
}

fn spectrum(cfg: &RunConfig) -> Result<StageResult> {
    let mut r = StageResult::new(Stage::Spectrum);
    let f = flux(cfg)?;
    let g = grid(&cfg.grid)?;
    let design = CrossingDesign::default();
    let planted = cfg.exemplar == "exemplar2x2";
    let make = |eps: f64| {
        if planted {
            exemplar_operator(&design, eps, g)
        } else {
            assemble_linearized(&solve_profile(f.as_ref(), eps, g, None)?, f.as_ref())
        }
    };
    let op = make(0.0)?;
    r.set("zero_mode_residual", op.zero_mode_residual()?);

    let xi: Vec<f64> = (-80..=80).map(|k| k as f64 / 20.0).collect();
    let env = essential_envelope(f.as_ref(), 0.0, &xi)?;
    let mut cols = vec!["xi".to_string()];
    for j in 0..env.speeds.len() {
        cols.push(format!("re{j}"));
        cols.push(format!("im{j}"));
    }
    let mut et = table("envelope", cols);
    for (k, x) in xi.iter().enumerate() {
        let mut row = vec![*x];
        for c in &env.curves {
            row.push(c[k].re);
            row.push(c[k].im);
        }
        et.push(row);
    }
    let mut splot = LinePlot::new("spectrum", "spectrum at eps = 0", "Re", "Im", false, false);
    for (j, c) in env.curves.iter().enumerate() {
        let re: Vec<f64> = c.iter().map(|z| z.re).collect();
        let im: Vec<f64> = c.iter().map(|z| z.im).collect();
        splot = splot.line(&format!("dispersion {j}"), &re, &im);
    }
    r.tables.push(et);

    let bx = SearchBox::default();
    let pair = crossing_pair(&op, &bx)?;
    if pair.residual > cfg.tolerances.eigen || pair.left_residual > cfg.tolerances.eigen {
        return Err(Error::NonConvergence(format!(
            "crossing pair residuals {:e}/{:e} above the eigen tolerance {:e}",
            pair.residual, pair.left_residual, cfg.tolerances.eigen
        )));
    }
    r.set("gamma", pair.gamma());
    r.set("tau", pair.tau());
    r.set("pair_residual", pair.residual);
    r.set("pair_left_residual", pair.left_residual);
    r.set("pair_mass", pair.mass);
    let mut ev = Table::new("eigenvalues", &["re", "im", "crossing"]);
    ev.push(vec![pair.lambda.re, pair.lambda.im, 1.0]);
    for z in &pair.others {
        ev.push(vec![z.re, z.im, 0.0]);
    }
    let re: Vec<f64> = ev.rows.iter().map(|r| r[0]).collect();
    let im: Vec<f64> = ev.rows.iter().map(|r| r[1]).collect();
    splot = splot.dots("eigenvalues", &re, &im);
    r.tables.push(ev);
    r.plots.push(Plot::Lines(splot));

    let proj = projections(&pair, &op)?;
    let n = op.components();
    let f0 = GridFunction::new(
        g,
        n,
        (0..g.len() * n)
            .map(|k| {
                let x = g.x(k / n);
                (0.7 * x + (k % n) as f64).sin() * (-(x / 8.0).powi(2)).exp()
            })
            .collect(),
    )?;
    let p1 = proj.pi(&f0)?;
    let p2 = proj.pi(&p1)?;
    let scale = p1.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let defect = p1.values.iter().zip(&p2.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    r.set("projector_idempotence", defect);

    let eps: Vec<f64> = cfg.eps.values().into_iter().filter(|e| *e != 0.0).collect();
    if !eps.is_empty() {
        let scan = crossing_family(make, &eps, &bx)?;
        let mut st = Table::new("crossing", &["eps", "gamma", "tau", "residual", "left_residual", "mass"]);
        for row in &scan.rows {
            st.push(vec![row.eps, row.gamma, row.tau, row.residual, row.left_residual, row.mass]);
        }
        if let Some(s) = scan.slope {
            r.set("gamma_slope", s);
        }
        r.set("transversal", if scan.transversal { 1.0 } else { 0.0 });
        let plot = LinePlot::new("crossing", "crossing pair real part", "eps", "gamma", false, false).dots(
            "gamma",
            &st.column("eps").unwrap_or_default(),
            &st.column("gamma").unwrap_or_default(),
        );
        r.tables.push(st);
        r.plots.push(Plot::Lines(plot));
    }
    Ok(r)
}

fn kernels(cfg: &RunConfig) -> Result<StageResult> {
    let kc = &cfg.kernels;
    let mut r = StageResult::new(Stage::Kernels);
    let k = ModelKernel::scattering(kc.speed)?;
    let times = logspace(kc.t_min, kc.t_max, kc.times);
    let start = Instant::now();
    let mut laws = Vec::new();
    for &[alpha, beta] in &kc.orders {
        laws.push((alpha, beta, fit_norm_law(&k, alpha, beta, NormKind::B1, &times, None)?));
    }
    r.time("laws", start.elapsed().as_secs_f64());
    let mut lt = Table::new("norm-law", &["alpha", "beta", "exponent", "expected", "constant", "residual"]);
    let mut worst = 0.0f64;
    let mut cols = vec!["t".to_string()];
    let mut plot = LinePlot::new("kernel-decay", "kernel norm decay", "T", "B1 norm", true, true);
    for (alpha, beta, law) in &laws {
        let expected = expected_exponent(*alpha, *beta);
        worst = worst.max((law.exponent - expected).abs());
        lt.push(vec![*alpha as f64, *beta as f64, law.exponent, expected, law.constant, law.residual]);
        cols.push(format!("a{alpha}b{beta}"));
        let fitted: Vec<f64> = times.iter().map(|t| law.constant * t.powf(law.exponent)).collect();
        plot = plot.dots(&format!("({alpha},{beta})"), &times, &law.norms).line(&format!("fit {:.3}", law.exponent), &times, &fitted);
    }
    let mut nt = table("kernel-norms", cols);
    for (i, t) in times.iter().enumerate() {
        let mut row = vec![*t];
        row.extend(laws.iter().map(|l| l.2.norms[i]));
        nt.push(row);
    }
    r.set("max_exponent_error", worst);
    r.tables.push(lt);
    r.tables.push(nt);
    r.plots.push(Plot::Lines(plot));

    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(kc.seed);
    let mut worst = 0.0f64;
    for _ in 0..kc.identity_samples {
        let t: f64 = rng.gen_range(0.5..100.0);
        let y: f64 = rng.gen_range(-20.0..20.0);
        let x = y + kc.speed * t + rng.gen_range(-4.0..4.0) * t.sqrt();
        worst = worst.max(cancellation_residual(&k, x, t, y)?);
    }
    r.time("cancellation", start.elapsed().as_secs_f64());
    r.set("cancellation_residual", worst);
    Ok(r)
}

/// First index after which the increments never increase.
pub fn burn_in_index(increments: &[f64]) -> usize {
    let mut j = increments.len().saturating_sub(1);
    while j > 0 && increments[j - 1] >= increments[j] {
        j -= 1;
    }
    j
}

fn resum(cfg: &RunConfig) -> Result<StageResult> {
    let rc = &cfg.resum;
    let mut r = StageResult::new(Stage::Resum);
    let k = ModelKernel::scattering(rc.speed)?;
    let start = Instant::now();
    let naive = naive_sum_norms(&k, 1, rc.period, rc.naive_count)?;
    let cauchy = cauchy_envelope(&k, rc.period, &rc.cauchy_counts)?;
    r.time("series", start.elapsed().as_secs_f64());
    r.set("naive_growth", naive.growth_exponent);
    r.set("cauchy_slope", cauchy.fit.slope);
    let mut nt = Table::new("naive", &["j", "norm", "cumulative"]);
    for (j, (a, b)) in naive.norms.iter().zip(&naive.cumulative).enumerate() {
        nt.push(vec![(j + 1) as f64, *a, *b]);
    }
    let mut ct = Table::new("cauchy", &["n", "increment"]);
    for (n, d) in cauchy.counts.iter().zip(&cauchy.increments) {
        ct.push(vec![*n as f64, *d]);
    }
    let counts: Vec<f64> = cauchy.counts.iter().map(|n| *n as f64).collect();
    let js = nt.column("j").unwrap_or_default();
    r.plots.push(Plot::Lines(
        LinePlot::new("naive", "naive norm series", "N", "cumulative norm", true, true).line("sum of norms", &js, &naive.cumulative),
    ));
    r.plots.push(Plot::Lines(
        LinePlot::new("cauchy", "dyadic blocks of the signed series", "N", "block norm", true, true).dots(
            "increment",
            &counts,
            &cauchy.increments,
        ),
    ));
    r.tables.push(nt);
    r.tables.push(ct);

    let g = Grid1D::with_spacing(rc.half_width, rc.spacing)?;
    let op = KernelStep::model(rc.speed, rc.period, g)?;
    let n = g.sample(|x| (-2.0 * x * x).exp());
    let opts = RightInverseOptions { tol: cfg.tolerances.series, max_terms: rc.max_terms, ..Default::default() };
    let (b, ledger) = apply_right_inverse(&op, &n, &opts)?;
    let residual = ledger.residual.ok_or_else(|| Error::Numerical("right inverse ledger has no residual".into()))?;
    r.set("ledger_residual", residual);
    r.set("stop_index", ledger.stop_index as f64);
    r.set("b_mass", b.integral()[0]);
    // terms whose support is still well inside the window
    let window = (0.4 * rc.half_width / (rc.speed.abs() * rc.period)).floor() as usize;
    let partial = ledger.records.iter().filter(|rec| rec.j <= window).map(|rec| rec.cumulative_mass[0].abs()).fold(0.0, f64::max);
    r.set("partial_mass_max", partial);
    r.set("mass_window", window as f64);
    let mut lt = Table::new("ledger", &["j", "increment", "term_mass", "cumulative_mass"]);
    for rec in &ledger.records {
        lt.push(vec![rec.j as f64, rec.increment_norm, rec.term_mass[0], rec.cumulative_mass[0]]);
    }
    let incs = lt.column("increment").unwrap_or_default();
    r.set("burn_in", burn_in_index(&incs) as f64);
    r.plots.push(Plot::Lines(
        LinePlot::new("ledger", "right inverse ledger", "j", "increment norm", false, true).line(
            "increment",
            &lt.column("j").unwrap_or_default(),
            &incs,
        ),
    ));
    r.tables.push(lt);

    let ck = ModelKernel::scattering(rc.continuization_speed)?;
    let rep = continuization_error(&ck, rc.period, rc.continuization_count, Continuization::Simpson)?;
    r.set("simpson_tail_slope", rep.tail_law.slope);
    r.set("simpson_integrand_exponent", rep.integrand_law.exponent);
    let mut tt = Table::new("continuization", &["n", "theta", "remainder", "tail_integral"]);
    for (i, c) in rep.counts.iter().enumerate() {
        tt.push(vec![*c as f64, rep.theta_norms[i], rep.remainder_norms[i], rep.tail_integrals[i]]);
    }
    r.tables.push(tt);
    Ok(r)
}

fn orbit_heatmap(name: &str, o: &PeriodicOrbit) -> Heatmap {
    let g = o.snapshots[0].grid;
    let nodes = thin_nodes(g, 20.0, 200);
    let n = o.snapshots[0].n_comp;
    let values = o.snapshots.iter().flat_map(|s| nodes.iter().map(move |&i| s.values[i * n])).collect();
    Heatmap {
        name: name.into(),
        title: format!("u0 over one period, a = {}", o.a),
        x_label: "x".into(),
        y_label: "t".into(),
        x: nodes.iter().map(|&i| g.x(i)).collect(),
        y: o.times.clone(),
        values,
    }
}

fn flow(cfg: &RunConfig) -> FlowOptions {
    FlowOptions { truncation: cfg.truncation.constant, order: cfg.truncation.order, steps: cfg.truncation.steps, ..Default::default() }
}

fn check_orbit(o: &PeriodicOrbit, tol: f64) -> Result<()> {
    if o.periodicity_residual > tol {
        return Err(Error::NonConvergence(format!(
            "orbit at a = {} has periodicity residual {:e} above {tol:e}",
            o.a, o.periodicity_residual
        )));
    }
    Ok(())
}

fn hopf(cfg: &RunConfig) -> Result<StageResult> {
    let mut r = StageResult::new(Stage::Hopf);
    let start = Instant::now();
    let sup = HopfNormalForm::supercritical();
    let sub = HopfNormalForm::subcritical();
    let a_nf = &cfg.hopf.normal_form_a;
    let curve = solve_branch(&sup, a_nf, &OmegaRule::Zero, &BranchOptions::default())?;
    let sub_curve = solve_branch(&sub, a_nf, &OmegaRule::Zero, &BranchOptions::default())?;
    let mut nt = Table::new("normal-form", &["a", "epsilon", "oracle", "closed_form", "sub_epsilon", "sub_oracle"]);
    let (mut worst, mut closed, mut sub_sign) = (0.0f64, 0.0f64, -1.0);
    for (p, q) in curve.points.iter().zip(&sub_curve.points) {
        let oracle = normal_form_oracle(&sup, p.a)?;
        let sub_oracle = normal_form_oracle(&sub, q.a)?;
        let exact = -sup.cubic * p.a * p.a;
        worst = worst.max(((p.eps - oracle) / oracle).abs());
        closed = closed.max(((p.eps - exact) / exact).abs());
        if !(sub_oracle < 0.0) {
            sub_sign = 1.0;
        }
        nt.push(vec![p.a, p.eps, oracle, exact, q.eps, sub_oracle]);
    }
    r.time("normal_form", start.elapsed().as_secs_f64());
    r.set("nf_oracle_error", worst);
    r.set("nf_closed_form_error", closed);
    r.set("nf_direction", curve.direction() as f64);
    r.set("nf_sub_direction", sub_curve.direction() as f64);
    r.set("nf_sub_oracle_sign", sub_sign);
    let a_col = nt.column("a").unwrap_or_default();
    r.plots.push(Plot::Lines(
        LinePlot::new("normal-form", "normal-form branch", "a", "epsilon", false, false)
            .dots("solve_branch", &a_col, &nt.column("epsilon").unwrap_or_default())
            .line("oracle", &a_col, &nt.column("oracle").unwrap_or_default())
            .dots("subcritical", &a_col, &nt.column("sub_epsilon").unwrap_or_default()),
    ));
    r.tables.push(nt);

    let start = Instant::now();
    let g = grid(&cfg.grid)?;
    let ps = PoincareSystem::new(SystemFamily::exemplar(g), flow(cfg));
    let opts = OrbitOptions { snapshot_every: cfg.hopf.snapshot_every, ..Default::default() };
    let mut a_samples = cfg.a_samples.clone();
    a_samples.sort_by(f64::total_cmp);
    let mut orbits = Vec::new();
    for &a in &a_samples {
        let o = find_periodic_orbit(&ps, a, &opts)?;
        check_orbit(&o, cfg.tolerances.orbit)?;
        orbits.push(o);
    }
    let mut bt = Table::new("branch", &["a", "epsilon", "period", "f_resid", "g_resid"]);
    let mut ot = Table::new(
        "orbit",
        &[
            "a",
            "epsilon",
            "period",
            "periodicity",
            "amplitude_ratio",
            "amplitude_spread",
            "clamp_ratio",
            "transverse_constant",
            "drift",
            "mass_drift",
            "projection_defect",
        ],
    );
    for o in &orbits {
        bt.push(vec![o.a, o.eps, o.period, o.point.f_residual, o.point.g_residual]);
        ot.push(vec![
            o.a,
            o.eps,
            o.period,
            o.periodicity_residual,
            o.amplitude_ratio(),
            o.amplitude_spread(),
            o.clamp_ratio,
            o.transverse_constant,
            o.drift,
            o.mass_drift,
            o.projection_defect,
        ]);
    }
    let design = CrossingDesign::default();
    let linear_period = 2.0 * PI / design.tau(0.0);
    r.set("linear_period", linear_period);
    r.set("max_periodicity", orbits.iter().map(|o| o.periodicity_residual).fold(0.0, f64::max));
    r.set("truncation_ratio", orbits.iter().map(|o| o.clamp_ratio / (0.5 * o.truncation)).fold(0.0, f64::max));
    r.set("max_amplitude_spread", orbits.iter().map(|o| o.amplitude_spread()).fold(0.0, f64::max));
    if orbits.len() >= 2 {
        let a2: Vec<f64> = orbits.iter().map(|o| o.a * o.a).collect();
        let t: Vec<f64> = orbits.iter().map(|o| o.period).collect();
        let fit = fit_line(&a2, &t)?;
        r.set("period_intercept", fit.intercept);
        r.set("period_intercept_error", (fit.intercept / linear_period - 1.0).abs());
    }
    let mut drift: Option<f64> = None;
    for (i, lo) in orbits.iter().enumerate() {
        for hi in &orbits[i + 1..] {
            if (hi.a / lo.a - 2.0).abs() < 1e-9 {
                let d = (hi.amplitude_ratio() / lo.amplitude_ratio() - 1.0).abs();
                drift = Some(drift.map_or(d, |m| m.max(d)));
            }
        }
    }
    if let Some(d) = drift {
        r.set("amplitude_drift", d);
    }
    let last = orbits.last().expect("a_samples is nonempty");
    if cfg.hopf.grid_doubling {
        let fine = grid(&cfg.grid.refined())?;
        let ps2 = PoincareSystem::new(SystemFamily::exemplar(fine), flow(cfg));
        let o2 = find_periodic_orbit(&ps2, last.a, &opts)?;
        check_orbit(&o2, cfg.tolerances.orbit)?;
        r.set("grid_doubling_change", (o2.eps / last.eps - 1.0).abs());
        r.set("grid_doubling_epsilon", o2.eps);
    }
    r.time("orbits", start.elapsed().as_secs_f64());

    let a_col = bt.column("a").unwrap_or_default();
    let a2: Vec<f64> = a_col.iter().map(|a| a * a).collect();
    r.plots.push(Plot::Lines(
        LinePlot::new("branch", "exemplar branch", "a", "epsilon", false, false).dots("epsilon", &a_col, &bt.column("epsilon").unwrap_or_default()),
    ));
    r.plots.push(Plot::Lines(
        LinePlot::new("period", "return time against a^2", "a^2", "T*", false, false)
            .dots("T*", &a2, &bt.column("period").unwrap_or_default())
            .line("2 pi / tau(0)", &[0.0, a2.last().copied().unwrap_or(0.0)], &[linear_period, linear_period]),
    ));
    r.plots.push(Plot::Heatmap(orbit_heatmap("orbit-heatmap", last)));
    let hm = orbit_heatmap("orbit", last);
    r.documents.push(Document {
        name: "orbit".into(),
        body: json!({ "a": last.a, "epsilon": last.eps, "period": last.period, "t": hm.y, "x": hm.x, "u0": hm.values }),
    });
    r.tables.push(bt);
    r.tables.push(ot);
    Ok(r)
}

fn bump(g: Grid1D, n: usize, center: f64) -> Vec<Complex64> {
    (0..g.len() * n)
        .map(|k| {
            let x = g.x(k / n) - center;
            Complex64::new((1.0 + (k % n) as f64) * (-x * x).exp(), 0.3 * x * (-x * x).exp())
        })
        .collect()
}

fn cylinder(cfg: &RunConfig) -> Result<StageResult> {
    let cc = &cfg.cylinder;
    let mut r = StageResult::new(Stage::Cylinder);
    let start = Instant::now();
    let q = cc.crossing.len();
    let base = flux(cfg)?;
    let dg = grid(&cc.decay_grid)?;
    let p = solve_profile(base.as_ref(), 0.0, dg, None)?;
    let zero = vec![0; q];
    let fam = assemble_mode_family(&p, &transverse_flux_set(base, q), 2)?.with_crossing(&zero, &CrossingDesign::default())?;
    let n = fam.components();
    let f = bump(dg, n, 0.5);
    let real: Vec<Complex64> = f.iter().map(|z| Complex64::new(z.re, 0.0)).collect();
    let mode = |k: i32| {
        let mut xi = vec![0; q];
        xi[0] = k;
        xi
    };
    let one = gap_decay(&fam, &mode(1), &f, (1.0, 6.0))?;
    let two = gap_decay(&fam, &mode(2), &f, (0.5, 3.0))?;
    let planar = gap_decay(&fam, &zero, &real, (1.0, 6.0))?;
    r.set("gap_ratio_1", one.ratio());
    r.set("gap_ratio_2", two.ratio());
    r.set("planar_rate_fraction", planar.rate.abs() / one.rate.abs());
    r.set("eta", fam.eta);
    let mut gt = Table::new("gap", &["xi_sq", "rate", "envelope"]);
    let mut plot = LinePlot::new("gap-decay", "transverse mode decay", "t", "weighted sup norm", false, true);
    for (k, d) in [(0, &planar), (1, &one), (2, &two)] {
        gt.push(vec![(k * k) as f64, d.rate, d.envelope]);
        plot = plot.line(&format!("|xi| = {k}"), &d.times, &d.norms);
    }
    r.tables.push(gt);
    r.plots.push(Plot::Lines(plot));

    let cg = grid(&cc.grid)?;
    let family = CylinderFamily::exemplar(cg, cc.xi_max, cc.crossing.clone())?;
    let opts = OrbitOptions { snapshot_every: cfg.hopf.snapshot_every, ..Default::default() };
    let co = multid_orbit(family, cc.a, flow(cfg), &opts)?;
    check_orbit(&co.orbit, cfg.tolerances.orbit)?;
    r.time("cylinder", start.elapsed().as_secs_f64());
    let o = &co.orbit;
    r.set("periodicity", o.periodicity_residual);
    r.set("shape_residual", co.shape_residual);
    r.set("spectral_tail", co.spectral_tail);
    r.set("epsilon", o.eps);
    r.set("period", o.period);
    r.set("truncation_ratio", o.clamp_ratio / (0.5 * o.truncation));

    let tg = TransverseGrid::new(q, cc.xi_max)?;
    let fields = co.fields()?;
    let mut ct = Table::new("cylinder", &["t", "amplitude", "shape_residual", "tail"]);
    for (k, field) in fields.iter().enumerate() {
        ct.push(vec![o.times[k], o.amplitude[k], shape_fit_residual(field, &tg, &cc.crossing)?, field.tail(cc.xi_max / 2)]);
    }
    r.tables.push(ct);

    // x̃ slice through the origin of the remaining transverse axes
    let pts = tg.points_per_axis();
    let slice: Vec<usize> = (0..tg.len()).filter(|&s| tg.coordinates(s)[1..].iter().all(|c| *c == 0.0)).collect();
    let nodes = thin_nodes(cg, 10.0, 101);
    let x1: Vec<f64> = nodes.iter().map(|&i| cg.x(i)).collect();
    let x2: Vec<f64> = slice.iter().map(|&s| tg.coordinates(s)[0]).collect();
    let mut frames = Vec::with_capacity(fields.len());
    for field in &fields {
        let phys = field.physical(&tg)?;
        let (phys, len) = (&phys, tg.len());
        let frame: Vec<f64> = slice.iter().flat_map(|&s| nodes.iter().map(move |&i| phys[(i * len + s) * n])).collect();
        frames.push(frame);
    }
    let count = cc.frames.min(frames.len());
    for k in 0..count {
        let idx = if count > 1 { k * (frames.len() - 1) / (count - 1) } else { 0 };
        r.plots.push(Plot::Heatmap(Heatmap {
            name: format!("cylinder-frame{k}"),
            title: format!("u0 at t = {:.3}", o.times[idx]),
            x_label: "x1".into(),
            y_label: "x2".into(),
            x: x1.clone(),
            y: x2.clone(),
            values: frames[idx].clone(),
        }));
    }
    r.documents.push(Document {
        name: "cylinder-snapshots".into(),
        body: json!({
            "crossing": cc.crossing, "xi_max": cc.xi_max, "transverse_points": pts, "a": cc.a,
            "epsilon": o.eps, "period": o.period, "t": o.times, "x1": x1, "x2": x2, "u0": frames,
        }),
    });
    Ok(r)
}

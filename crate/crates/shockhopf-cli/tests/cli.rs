use proptest::prelude::*;
use shockhopf::error::Error;
use shockhopf_cli::report::StageStatus;
use shockhopf_cli::stages::burn_in_index;
use shockhopf_cli::*;
use std::path::{Path, PathBuf};
use std::process::Command;

fn desk(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/desk.toml")).unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

// configs

#[test]
fn shipped_default_config_matches_the_builtin_defaults() {
    let cfg = RunConfig::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/default.toml")).unwrap();
    assert_eq!(cfg, RunConfig::default());
    cfg.validate().unwrap();
}

#[test]
fn even_point_count_is_rejected_before_any_computation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let mut cfg = desk(&out);
    cfg.grid.points = 200;
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(matches!(err, CliError::Config(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
    assert!(!out.exists());
}

#[test]
fn validation_rejects_bad_values() {
    let base = RunConfig::default();
    let mut c = base.clone();
    c.exemplar = "nope".into();
    assert!(c.validate().is_err());
    let mut c = base.clone();
    c.tolerances.orbit = 0.0;
    assert!(c.validate().is_err());
    let mut c = base.clone();
    c.tolerances.eigen = f64::NAN;
    assert!(c.validate().is_err());
    let mut c = base.clone();
    c.truncation.steps = 7;
    assert!(c.validate().is_err());
    let mut c = base.clone();
    c.cylinder.crossing = vec![];
    assert!(c.validate().is_err());
    let mut c = base;
    c.exemplar = "burgers".into();
    c.validate().unwrap();
    assert!(c.validate_stages(&[Stage::Hopf]).is_err());
    c.validate_stages(&[Stage::Profile, Stage::Kernels]).unwrap();
}

#[test]
fn unknown_keys_are_config_errors() {
    let text = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/desk.toml")).unwrap();
    assert!(RunConfig::parse(&text).is_ok());
    let err = RunConfig::parse(&format!("bogus = 1\n{text}")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn hash_tracks_computational_content_only() {
    let a = RunConfig::default();
    let mut b = a.clone();
    b.output_dir = "elsewhere".into();
    b.cache = CachePolicy::Off;
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
    assert_eq!(a.short_hash(), a.hash()[..12]);
    b.grid.points = 801;
    assert_ne!(a.hash(), b.hash());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hash_separates_amplitude_sets(a in 1e-3f64..0.1, b in 1e-3f64..0.1) {
        let mut x = RunConfig::default();
        let mut y = RunConfig::default();
        x.a_samples = vec![a];
        y.a_samples = vec![b];
        prop_assert_eq!(x.hash() == y.hash(), a.to_bits() == b.to_bits());
    }

    #[test]
    fn burn_in_leaves_a_nonincreasing_tail(v in proptest::collection::vec(0.0f64..1.0, 1..40)) {
        let j = burn_in_index(&v);
        prop_assert!(v[j..].windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(j == 0 || v[j - 1] < v[j]);
    }
}

// pipeline and reports

#[test]
fn kernels_only_run_reports_the_norm_laws() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = desk(dir.path());
    cfg.kernels.orders = vec![[0, 0], [1, 0], [0, 1], [1, 1]];
    let report = run_stages(&cfg, &[Stage::Kernels]).unwrap();
    assert_eq!(report.stages.len(), 1);
    let t = report.results[&Stage::Kernels].table("norm-law").unwrap();
    assert_eq!(t.rows.len(), 4);
    for row in &t.rows {
        assert!((row[2] - row[3]).abs() <= 0.03, "{row:?}");
    }
    assert_eq!(report.criterion(1).unwrap().verdict, Verdict::Pass);
    assert_eq!(report.criterion(7).unwrap().verdict, Verdict::NotRun);
    assert_eq!(report.criteria.len(), 11);
}

#[test]
fn branch_csv_has_the_documented_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk(dir.path());
    let mut report = run_stages(&cfg, &[Stage::Hopf]).unwrap();
    emit_report(&mut report, Formats::ALL, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join(format!("branch-{}.csv", cfg.short_hash()))).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("a,epsilon,period,f_resid,g_resid"));
    assert_eq!(lines.count(), cfg.a_samples.len());
    let svg = std::fs::read_to_string(dir.path().join(format!("orbit-heatmap-{}.svg", cfg.short_hash()))).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(report.artifacts.iter().all(|p| p.exists()));
}

#[test]
fn ledger_increments_decrease_after_the_burn_in() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_stages(&desk(dir.path()), &[Stage::Resum]).unwrap();
    let r = &report.results[&Stage::Resum];
    let inc = r.table("ledger").unwrap().column("increment").unwrap();
    let j0 = r.get("burn_in").unwrap() as usize;
    assert!(j0 < inc.len() / 2, "burn-in {j0} of {}", inc.len());
    assert!(inc[j0..].windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn cached_results_reproduce_fresh_ones() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk(dir.path());
    let stages = [Stage::Spectrum, Stage::Resum];
    let first = run_stages(&cfg, &stages).unwrap();
    assert!(first.stages.iter().all(|s| s.status == StageStatus::Computed));
    let second = run_stages(&cfg, &stages).unwrap();
    assert!(second.stages.iter().all(|s| s.status == StageStatus::Cached));
    std::fs::remove_dir_all(dir.path().join(".cache")).unwrap();
    let third = run_stages(&cfg, &stages).unwrap();
    assert!(third.stages.iter().all(|s| s.status == StageStatus::Computed));
    for s in stages {
        for (k, v) in &first.results[&s].constants {
            for other in [&second, &third] {
                let w = other.results[&s].constants[k];
                assert!((v - w).abs() <= 1e-12 * v.abs().max(1.0), "{s} {k}: {v} vs {w}");
            }
        }
        assert_eq!(first.results[&s].tables, second.results[&s].tables);
    }
}

#[test]
fn stale_schema_versions_are_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk(dir.path());
    run_stages(&cfg, &[Stage::Profile]).unwrap();
    let path = dir.path().join(".cache").join(format!("profile-{}.json", cfg.hash()));
    let text = std::fs::read_to_string(&path).unwrap();
    let stale = text.replacen(&format!("\"schema_version\":{SCHEMA_VERSION}"), "\"schema_version\":0", 1);
    assert_ne!(text, stale);
    std::fs::write(&path, stale).unwrap();
    let again = run_stages(&cfg, &[Stage::Profile]).unwrap();
    assert_eq!(again.stages[0].status, StageStatus::Computed);
}

#[test]
fn consecutive_runs_write_identical_csvs() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut files = Vec::new();
    for d in [&d1, &d2] {
        let mut cfg = desk(d.path());
        cfg.cache = CachePolicy::Off;
        let mut report = run_pipeline(&cfg).unwrap();
        assert_eq!(report.exit_code(), 0);
        emit_report(&mut report, Formats { csv: true, json: false, svg: false }, d.path()).unwrap();
        files.push(csv_files(d.path()));
    }
    assert!(files[0].len() >= 10);
    assert_eq!(files[0], files[1]);
}

#[test]
fn second_emission_judges_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk(dir.path());
    for expected in [Verdict::NotRun, Verdict::Pass] {
        let mut report = run_stages(&cfg, &[Stage::Profile, Stage::Kernels]).unwrap();
        emit_report(&mut report, Formats::ALL, dir.path()).unwrap();
        assert_eq!(report.criterion(11).unwrap().verdict, expected);
    }
}

#[test]
fn empty_reports_and_unwritable_directories_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk(dir.path());
    let mut empty = run_stages(&cfg, &[]).unwrap();
    assert!(matches!(emit_report(&mut empty, Formats::ALL, dir.path()), Err(CliError::EmptyReport)));

    let mut report = run_stages(&cfg, &[Stage::Kernels]).unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let err = emit_report(&mut report, Formats::ALL, &blocker.join("sub")).unwrap_err();
    assert!(matches!(err, CliError::Io(_)), "{err}");
}

#[test]
fn failing_stages_are_recorded_with_their_exit_class() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = desk(dir.path());
    cfg.exemplar = "burgers".into();
    let report = run_stages(&cfg, &[Stage::Profile, Stage::Spectrum, Stage::Kernels]).unwrap();
    let failed = report.stage(Stage::Spectrum).unwrap();
    assert_eq!(failed.status, StageStatus::Failed);
    assert!(failed.error.is_some());
    // a scalar shock has no crossing pair
    assert_eq!(report.exit_code(), 3);
    assert_eq!(report.stage(Stage::Kernels).unwrap().status, StageStatus::Computed);
}

#[test]
fn library_errors_map_to_exit_classes() {
    assert_eq!(library_exit_code(&Error::Configuration("x".into())), 2);
    assert_eq!(library_exit_code(&Error::SpectralAssumption("x".into())), 3);
    assert_eq!(library_exit_code(&Error::TruncationActive("x".into())), 3);
    assert_eq!(library_exit_code(&Error::NonConvergence("x".into())), 4);
    assert_eq!(library_exit_code(&Error::RootNotFound("x".into())), 4);
    let wrapped = Error::AtSample { a: 0.1, source: Box::new(Error::NonConvergence("x".into())) };
    assert_eq!(library_exit_code(&wrapped), 4);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_shockhopf");
    let dir = tempfile::tempdir().unwrap();
    let desk_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/desk.toml");

    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(&desk_path).unwrap().replace("points = 201", "points = 200");
    std::fs::write(&bad, text).unwrap();
    let st = Command::new(bin).args(["profile", "--config"]).arg(&bad).arg("--out").arg(dir.path()).output().unwrap().status;
    assert_eq!(st.code(), Some(2));

    let st = Command::new(bin).args(["kernels", "--threads", "1", "--no-cache", "--config"]).arg(&desk_path).arg("--out").arg(dir.path()).output().unwrap().status;
    assert_eq!(st.code(), Some(0));

    let burgers = dir.path().join("burgers.toml");
    let text = std::fs::read_to_string(&desk_path).unwrap().replace("exemplar = \"exemplar2x2\"", "exemplar = \"burgers\"");
    std::fs::write(&burgers, text).unwrap();
    let st = Command::new(bin).args(["spectrum", "--config"]).arg(&burgers).arg("--out").arg(dir.path()).output().unwrap().status;
    assert_eq!(st.code(), Some(3));
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use gfmlab::config::RunConfig;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.cfg"))
}

fn gfmlab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_gfmlab")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn field<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("no `{key}` in report:\n{report}"))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_trace_and_classifies_lpf_ssr() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = gfmlab(&["run", "--config", path(&scenario("fig7")), "--out", path(dir.path())]);
    assert_eq!(code, 0, "{err}");
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,P,Q,vd,vq,id,iq,Vmag,omega,theta\n"));
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert_eq!(field(&report, "class"), "SSR");
    let f: f64 = field(&report, "freq_hz").parse().unwrap();
    assert!((f - 9.0).abs() <= 2.0, "{f}");
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("channel,class,freq_hz,zeta,amplitude\nP,SSR,"));
}

#[test]
fn expect_stable_flags_unstable_modes() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let (code, _, err) = gfmlab(&["modes", "--config", path(&scenario("fig15")), "--out", out, "--expect-stable"]);
    assert_eq!(code, 3, "{err}");
    assert!(err.lines().count() == 1 && err.contains("resonance"), "{err}");
    assert!(dir.path().join("modes.csv").exists());
    let (code, _, _) = gfmlab(&["modes", "--config", path(&scenario("fig15")), "--out", out]);
    assert_eq!(code, 0);
    let (code, _, err) = gfmlab(&["modes", "--config", path(&scenario("fig7")), "--out", out, "--expect-stable"]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn hybrid_sweep_is_stable_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = gfmlab(&[
        "sweep",
        "--config",
        path(&scenario("fig21a")),
        "--param",
        "scr",
        "--values",
        "1.5,5,10,20",
        "--out",
        path(dir.path()),
        "--expect-stable",
    ]);
    assert_eq!(code, 0, "{err}");
    for v in ["1.5", "5", "10", "20"] {
        let sub = dir.path().join(format!("scr_{v}"));
        for f in ["trace.csv", "modes.csv", "report.txt", "report.csv"] {
            assert!(sub.join(f).exists(), "{v}/{f}");
        }
        let report = fs::read_to_string(sub.join("report.txt")).unwrap();
        assert_eq!(field(&report, "stable"), "true", "SCR {v}");
    }
    let summary = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(summary.lines().skip(1).all(|l| l.split(',').nth(5) == Some("true")), "{summary}");
}

#[test]
fn exit_codes_for_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let (code, _, err) = gfmlab(&["run", "--config", "/nonexistent.cfg", "--out", out]);
    assert_eq!(code, 1);
    assert_eq!(err.lines().count(), 1, "{err}");

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "[grid]\nscr = 5\nsnr = 3\n").unwrap();
    let (code, _, err) = gfmlab(&["modes", "--config", path(&bad), "--out", out]);
    assert_eq!(code, 1);
    assert!(err.contains("snr"), "{err}");

    let (code, _, _) = gfmlab(&["explode"]);
    assert_eq!(code, 1);

    // far beyond the transfer limit of an ultra-weak grid
    let infeasible = dir.path().join("infeasible.cfg");
    fs::write(&infeasible, "[grid]\nscr = 1.2\n[scenario]\np_ref = 3 pu\n").unwrap();
    let (code, _, err) = gfmlab(&["modes", "--config", path(&infeasible), "--out", out]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn bode_and_design_check_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let (code, _, err) = gfmlab(&[
        "bode", "--config", path(&scenario("fig9")), "--out", out, "--input", "theta_c", "--output", "P", "--fmin",
        "1", "--fmax", "100", "--points", "50",
    ]);
    assert_eq!(code, 0, "{err}");
    let bode = fs::read_to_string(dir.path().join("bode.csv")).unwrap();
    assert_eq!(bode.lines().count(), 51);
    assert!(bode.starts_with("omega_rad_s,mag_db,phase_deg\n"));

    let (code, _, err) = gfmlab(&["bode", "--config", path(&scenario("fig9")), "--out", out, "--input", "nope"]);
    assert_eq!(code, 1, "{err}");

    let (code, _, err) = gfmlab(&["design-check", "--config", path(&scenario("fig7")), "--out", out]);
    assert_eq!(code, 0, "{err}");
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    let z: f64 = field(&report, "psc_zeta_estimate").parse().unwrap();
    let zm: f64 = field(&report, "psc_mode_zeta").parse().unwrap();
    assert!((z - zm).abs() < 0.1, "{z} vs {zm}");
}

#[test]
fn dump_config_round_trips_for_every_scenario() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut names: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    assert_eq!(names.len(), 14);
    for p in names {
        let (code, dumped, err) = gfmlab(&["run", "--config", path(&p), "--dump-config"]);
        assert_eq!(code, 0, "{err}");
        let original = RunConfig::from_path(&p).unwrap();
        assert_eq!(RunConfig::parse(&dumped).unwrap(), original, "{}", p.display());
        assert_eq!(RunConfig::parse(&dumped).unwrap().dump(), dumped);
    }
}

#[test]
fn outputs_are_deterministic_and_honor_env_root() {
    let root = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_gfmlab"))
            .args(["run", "--config", path(&scenario("fig5"))])
            .env("GFMLAB_OUT", root.path().join(sub))
            .status()
            .unwrap();
        assert!(status.success());
        root.path().join(sub).join("fig5")
    };
    let a = run("a");
    let b = run("b");
    for f in ["trace.csv", "report.txt", "report.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn in_process_entry_matches_binary() {
    let dir = tempfile::tempdir().unwrap();
    let code = gfmlab::cli::run_cli([
        "gfmlab",
        "modes",
        "--config",
        path(&scenario("fig21b")),
        "--out",
        path(dir.path()),
        "--expect-stable",
    ]);
    assert_eq!(code, gfmlab::cli::EXIT_OK);
    assert_eq!(gfmlab::cli::run_cli(["gfmlab", "--help"]), gfmlab::cli::EXIT_OK);
}

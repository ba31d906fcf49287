//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 numeric failure,
//! 3 when `--expect-stable` is set and a resonance with ζ < 0.05 shows up.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::control::{InnerConfig, PscVariant};
use crate::error::Error;
use crate::model::LoopMode;
use crate::operating_point::solve_operating_point;
use crate::ringdown::{analyze_channel, coupling_check_trace, ChannelKind, ResonanceClass, ResonanceReport, REPORT_CSV_HEADER};
use crate::sim::run_scenario;
use crate::smallsignal::analytic;
use crate::smallsignal::{bode_csv, eigenmodes, freq_response, linearize, log_grid_hz, ModeReport};

/// Damping ratio below which `--expect-stable` fails.
pub const STABILITY_MARGIN: f64 = 0.05;
/// Environment variable holding the default output root.
pub const OUT_ENV: &str = "GFMLAB_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_UNSTABLE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "gfmlab", version, about = "Resonance laboratory for grid-forming converters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `out_dir`, then `$GFMLAB_OUT/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with code 3 when a resonance with ζ < 0.05 is found.
    #[arg(long)]
    expect_stable: bool,
    /// Print the canonical configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Time-domain run with ringdown classification.
    Run(Common),
    /// Eigenmodes of the linearized model.
    Modes(Common),
    /// Frequency response between two labels.
    Bode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<String>,
        #[arg(long)]
        output: Option<String>,
        /// Lowest frequency (Hz).
        #[arg(long)]
        fmin: Option<f64>,
        /// Highest frequency (Hz).
        #[arg(long)]
        fmax: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Runs and eigenanalysis over a list of parameter values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of scr, x_over_r, p_ref, k_p, vvc_kp, r_a
        #[arg(long)]
        param: String,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Compares closed-form estimates with the eigenmodes.
    DesignCheck(Common),
}

/// Outcome of a subcommand that completed without error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Ok,
    Resonant,
}

fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_CONFIG
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("cannot write {}: {e}", path.display()))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code. Diagnostics go to stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(Verdict::Ok) => EXIT_OK,
        Ok(Verdict::Resonant) => {
            eprintln!("gfmlab: resonance with damping below {STABILITY_MARGIN} detected");
            EXIT_UNSTABLE
        }
        Err(e) => {
            eprintln!("gfmlab: {e}");
            exit_code(&e)
        }
    }
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), Error> {
    let cfg = RunConfig::from_path(&common.config)?;
    let out = match (&common.out, &cfg.out_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => o.clone(),
        (None, None) => {
            let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("gfmlab_out"), PathBuf::from);
            let stem = common.config.file_stem().map_or_else(|| "run".into(), |s| s.to_os_string());
            root.join(stem)
        }
    };
    Ok((cfg, out))
}

fn dispatch(command: Command) -> Result<Verdict, Error> {
    let common = match &command {
        Command::Run(c) | Command::Modes(c) | Command::DesignCheck(c) => c,
        Command::Bode { common, .. } | Command::Sweep { common, .. } => common,
    }
    .clone();
    let (cfg, out) = load(&common)?;
    if common.dump_config {
        print!("{}", cfg.dump());
        return Ok(Verdict::Ok);
    }
    let resonant = match command {
        Command::Run(_) => run(&cfg, &out)?,
        Command::Modes(_) => modes(&cfg, &out)?,
        Command::Bode {
            input,
            output,
            fmin,
            fmax,
            points,
            ..
        } => {
            let mut cfg = cfg;
            let a = &mut cfg.analysis;
            a.bode_input = input.unwrap_or(a.bode_input.clone());
            a.bode_output = output.unwrap_or(a.bode_output.clone());
            a.bode_fmin = fmin.unwrap_or(a.bode_fmin);
            a.bode_fmax = fmax.unwrap_or(a.bode_fmax);
            a.bode_points = points.unwrap_or(a.bode_points);
            bode(&cfg, &out)?
        }
        Command::Sweep { param, values, .. } => sweep(&cfg, &out, &param, &values)?,
        Command::DesignCheck(_) => design_check(&cfg, &out)?,
    };
    Ok(if common.expect_stable && resonant {
        Verdict::Resonant
    } else {
        Verdict::Ok
    })
}

fn channel_kind(channel: &str) -> ChannelKind {
    match channel {
        "P" | "Q" | "Pe" | "Pbus" => ChannelKind::Power,
        _ => ChannelKind::Current,
    }
}

/// Whether an eigenvalue set contains an unstable mode or a lightly damped
/// oscillation up to twice the fundamental.
pub fn modes_resonant(report: &ModeReport, f1: f64) -> bool {
    report.modes.iter().any(|m| {
        m.eigenvalue.re >= 0.0 && m.eigenvalue.norm() > 1e-6
            || m.eigenvalue.im > 0.0 && m.freq_hz <= 2.0 * f1 && m.zeta < STABILITY_MARGIN
    })
}

fn f1(cfg: &RunConfig) -> f64 {
    cfg.omega_1() / (2.0 * std::f64::consts::PI)
}

/// Time-domain run; writes trace.csv, report.txt and report.csv.
fn run(cfg: &RunConfig, out: &Path) -> Result<bool, Error> {
    let (report, text) = run_report(cfg, out)?;
    write(out, "report.txt", &text)?;
    write(out, "report.csv", &format!("{REPORT_CSV_HEADER}\n{}\n", report.csv_row()))?;
    Ok(report.is_resonant_below(STABILITY_MARGIN))
}

fn run_report(cfg: &RunConfig, out: &Path) -> Result<(ResonanceReport, String), Error> {
    let trace = run_scenario(&cfg.scenario(), &cfg.scenario.sim)?;
    write(out, "trace.csv", &trace.to_csv())?;
    let a = &cfg.analysis;
    if trace.channel(&a.channel).is_none() {
        return Err(Error::Config(format!("unknown analysis channel `{}`", a.channel)));
    }
    let report = analyze_channel(&trace, &a.channel, channel_kind(&a.channel), &a.bands)?;
    let mut text = report.to_text();
    if matches!(report.class, ResonanceClass::Ssr | ResonanceClass::Sr) {
        {
            let c = coupling_check_trace(&trace, report.freq_hz, a.coupling_tol)?;
            let _ = writeln!(text, "coupling_pass: {}", c.pass);
            for (name, exp, meas) in [("lower", c.expected[0], c.measured[0]), ("upper", c.expected[1], c.measured[1])] {
                let _ = writeln!(text, "coupling_{name}_expected_hz: {exp}");
                match meas {
                    Some(p) => {
                        let _ = writeln!(text, "coupling_{name}_hz: {}\ncoupling_{name}_amplitude: {}", p.freq_hz, p.amplitude);
                    }
                    None => {
                        let _ = writeln!(text, "coupling_{name}_hz: none");
                    }
                }
            }
        }
    }
    Ok((report, text))
}

fn linear_modes(cfg: &RunConfig) -> Result<ModeReport, Error> {
    let op = solve_operating_point(&cfg.system, &cfg.scheme, &cfg.scenario.refs)?;
    let lin = linearize(&op, cfg.analysis.loop_mode, &[], &[])?;
    eigenmodes(&lin)
}

fn mode_summary(report: &ModeReport, f1: f64) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "modes: {}", report.modes.len());
    let _ = writeln!(text, "stable: {}", report.is_stable());
    match report.oscillatory_below(2.0 * f1).first() {
        Some(m) => {
            let _ = writeln!(text, "least_damped_freq_hz: {}\nleast_damped_zeta: {}", m.freq_hz, m.zeta);
        }
        None => {
            let _ = writeln!(text, "least_damped_freq_hz: none");
        }
    }
    text
}

/// Eigenanalysis; writes modes.csv and report.txt.
fn modes(cfg: &RunConfig, out: &Path) -> Result<bool, Error> {
    let report = linear_modes(cfg)?;
    write(out, "modes.csv", &report.to_csv())?;
    write(out, "report.txt", &mode_summary(&report, f1(cfg)))?;
    Ok(modes_resonant(&report, f1(cfg)))
}

/// Frequency response; writes bode.csv and report.txt.
fn bode(cfg: &RunConfig, out: &Path) -> Result<bool, Error> {
    let a = &cfg.analysis;
    if !(a.bode_fmin > 0.0 && a.bode_fmax > a.bode_fmin && a.bode_points >= 2) {
        return Err(Error::Config("bode needs 0 < fmin < fmax and at least 2 points".into()));
    }
    let op = solve_operating_point(&cfg.system, &cfg.scheme, &cfg.scenario.refs)?;
    let lin = linearize(&op, a.loop_mode, &[&a.bode_input], &[&a.bode_output])?;
    let omegas = log_grid_hz(a.bode_fmin, a.bode_fmax, a.bode_points);
    let h = freq_response(&lin, &a.bode_input, &a.bode_output, &omegas)?;
    write(out, "bode.csv", &bode_csv(&omegas, &h))?;
    let (k, peak) = h
        .iter()
        .map(|v| v.norm())
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, m)| if m > best.1 { (k, m) } else { best });
    let report = eigenmodes(&lin)?;
    let mut text = format!(
        "input: {}\noutput: {}\npeak_freq_hz: {}\npeak_mag_db: {}\n",
        a.bode_input,
        a.bode_output,
        omegas[k] / (2.0 * std::f64::consts::PI),
        20.0 * peak.log10()
    );
    text.push_str(&mode_summary(&report, f1(cfg)));
    write(out, "report.txt", &text)?;
    Ok(modes_resonant(&report, f1(cfg)))
}

struct SweepRow {
    value: f64,
    outcome: Result<(ResonanceReport, ModeReport), Error>,
}

/// Runs every value concurrently into `<out>/<param>_<value>/` and writes a
/// summary `sweep.csv` at the root.
fn sweep(cfg: &RunConfig, out: &Path, param: &str, values: &[f64]) -> Result<bool, Error> {
    let mut configs = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = cfg.clone();
        c.set_param(param, v)?;
        configs.push((v, c));
    }
    let rows: Vec<SweepRow> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|(v, c)| {
                let dir = out.join(format!("{param}_{v}"));
                s.spawn(move || SweepRow {
                    value: *v,
                    outcome: sweep_one(c, &dir),
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });

    let f1 = f1(cfg);
    let mut csv = format!("{param},class,freq_hz,zeta,amplitude,stable,least_damped_zeta,error\n");
    let mut resonant = false;
    let mut first_err = None;
    for row in rows {
        match row.outcome {
            Ok((r, m)) => {
                resonant |= r.is_resonant_below(STABILITY_MARGIN) || modes_resonant(&m, f1);
                let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
                let least = m.oscillatory_below(2.0 * f1).first().map(|m| m.zeta);
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},",
                    row.value,
                    r.class,
                    r.freq_hz,
                    r.zeta,
                    r.amplitude,
                    m.is_stable(),
                    opt(least)
                );
            }
            Err(e) => {
                let _ = writeln!(csv, "{},,,,,,,{}", row.value, e.to_string().replace(',', ";"));
                first_err.get_or_insert(e);
            }
        }
    }
    write(out, "sweep.csv", &csv)?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(resonant),
    }
}

fn sweep_one(cfg: &RunConfig, dir: &Path) -> Result<(ResonanceReport, ModeReport), Error> {
    let modes = linear_modes(cfg)?;
    write(dir, "modes.csv", &modes.to_csv())?;
    let (report, mut text) = run_report(cfg, dir)?;
    text.push_str(&mode_summary(&modes, f1(cfg)));
    write(dir, "report.txt", &text)?;
    write(dir, "report.csv", &format!("{REPORT_CSV_HEADER}\n{}\n", report.csv_row()))?;
    Ok((report, modes))
}

/// Closed-form estimates next to the eigenmodes; writes report.txt and
/// modes.csv.
fn design_check(cfg: &RunConfig, out: &Path) -> Result<bool, Error> {
    let sys = &cfg.system;
    let w1 = sys.omega_1();
    let f1 = f1(cfg);
    let r = sys.conv.r_f + sys.grid.r_g;
    let x = sys.conv.l_f + sys.grid.x_g;
    let l = x / w1;
    let psc = &cfg.scheme.psc;
    let mut text = String::new();

    let pp = analytic::plant_poles(r, l, w1)?;
    let _ = writeln!(text, "plant_pole_re: {}\nplant_pole_freq_hz: {}", pp[0].re, pp[0].im / (2.0 * std::f64::consts::PI));
    let _ = writeln!(text, "droop_kp_pu: {}", psc.k_p / w1);
    if psc.variant == PscVariant::PureDroop {
        let limit = analytic::droop_gain_limit(r)?;
        let _ = writeln!(text, "droop_gain_limit_pu: {limit}\ndroop_within_limit: {}", psc.k_p / w1 <= limit);
    }
    let mut psc_estimate = None;
    if let PscVariant::DroopLpf { omega_c } = psc.variant {
        let (zeta, wn) = analytic::psc_second_order(psc.k_p, omega_c, x, sys.grid.v_g, cfg.scheme.outer.e_nom)?;
        let f = analytic::damped_frequency_hz(zeta, wn);
        let _ = writeln!(text, "psc_zeta_estimate: {zeta}\npsc_freq_hz_estimate: {f}");
        psc_estimate = Some(f);
    }
    if let InnerConfig::OpenLoop(ol) = &cfg.scheme.inner {
        if let Some(vr) = ol.vr {
            let v = cfg.scenario.refs.v_ref;
            let kp = analytic::vr_design_kp(vr.r_a, v, sys.conv.kappa, w1)?;
            let _ = writeln!(
                text,
                "vr_design_kp_pu: {}\nvr_kp_ratio: {}",
                kp / w1,
                psc.k_p / kp
            );
            let poles = analytic::vr_mode_poles(r, l, vr.r_a, vr.omega_v, w1)?;
            for (name, set) in [("sr", &poles.sr_like), ("ssr", &poles.ssr_like)] {
                if let Some(p) = set.iter().filter(|p| p.im >= 0.0).max_by(|a, b| a.re.total_cmp(&b.re)) {
                    let _ = writeln!(
                        text,
                        "vr_{name}_pole_re: {}\nvr_{name}_pole_freq_hz: {}",
                        p.re,
                        p.im / (2.0 * std::f64::consts::PI)
                    );
                }
            }
        }
    }
    let modes = {
        let op = solve_operating_point(sys, &cfg.scheme, &cfg.scenario.refs)?;
        eigenmodes(&linearize(&op, LoopMode::Closed, &[], &[])?)?
    };
    if let Some(f) = psc_estimate {
        let nearest = modes
            .oscillatory_below(2.0 * f1)
            .into_iter()
            .min_by(|a, b| (a.freq_hz - f).abs().total_cmp(&(b.freq_hz - f).abs()));
        if let Some(m) = nearest {
            let _ = writeln!(text, "psc_mode_freq_hz: {}\npsc_mode_zeta: {}", m.freq_hz, m.zeta);
        }
    }
    write(out, "modes.csv", &modes.to_csv())?;
    text.push_str(&mode_summary(&modes, f1));
    write(out, "report.txt", &text)?;
    Ok(modes_resonant(&modes, f1))
}

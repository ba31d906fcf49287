//! Acceptance checks. Each test prints one `criterion N: PASS|FAIL` line
//! (visible with `--nocapture`) and then asserts the same condition.

use std::f64::consts::PI;
use std::path::PathBuf;

use gfmlab::config::RunConfig;
use gfmlab::control::{
    AddOn, ClosedLoopVvc, ControlScheme, InnerConfig, OpenLoopVvc, OuterVoltageConfig, PdcConfig, PscConfig,
    References, VrConfig,
};
use gfmlab::error::Error;
use gfmlab::model::LoopMode;
use gfmlab::operating_point::{poc_magnitude, solve_operating_point, OperatingPoint};
use gfmlab::plant::SystemParams;
use gfmlab::ringdown::{
    analysis_window, analyze_channel, coupling_check_trace, fit_ringdown, Bands, ChannelKind, ResonanceClass,
    ResonanceReport,
};
use gfmlab::sim::{run_scenario, Action, Scenario, SimConfig, SimTrace};
use gfmlab::smallsignal::analytic::psc_second_order;
use gfmlab::smallsignal::{eigenmodes, freq_response, linearize, log_grid_hz, ModeReport};
use num_complex::Complex64;

const W1: f64 = 2.0 * PI * 50.0;
const F1: f64 = 50.0;

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.cfg"))
}

fn load(name: &str) -> RunConfig {
    RunConfig::from_path(&scenario_path(name)).unwrap()
}

fn report(pass: bool, n: u32, what: &str, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n:2}: {tag}  {what}: {detail}");
    assert!(pass, "criterion {n} failed: {what}: {detail}");
}

fn simulate(cfg: &RunConfig) -> SimTrace {
    run_scenario(&cfg.scenario(), &cfg.scenario.sim).unwrap()
}

fn power_report(trace: &SimTrace) -> ResonanceReport {
    analyze_channel(trace, "P", ChannelKind::Power, &Bands::default()).unwrap()
}

fn op_of(cfg: &RunConfig) -> OperatingPoint {
    solve_operating_point(&cfg.system, &cfg.scheme, &cfg.scenario.refs).unwrap()
}

fn modes_of(cfg: &RunConfig) -> ModeReport {
    let op = op_of(cfg);
    eigenmodes(&linearize(&op, LoopMode::Closed, &[], &[]).unwrap()).unwrap()
}

fn modes_at(system: SystemParams, scheme: ControlScheme, p: f64) -> ModeReport {
    let op = solve_operating_point(&system, &scheme, &References::with_p(p)).unwrap();
    eigenmodes(&linearize(&op, LoopMode::Closed, &[], &[]).unwrap()).unwrap()
}

fn max_real_part(m: &ModeReport) -> f64 {
    m.modes.iter().map(|m| m.eigenvalue.re).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn c01_plant_poles() {
    let system = SystemParams::default();
    let system = SystemParams {
        conv: gfmlab::plant::ConverterParams {
            c_f: 0.0,
            ..system.conv
        },
        ..system
    };
    let scheme = ControlScheme::open_loop(PscConfig::pure_droop(0.05 * W1), OpenLoopVvc::default());
    let op = solve_operating_point(&system, &scheme, &References::with_p(0.4)).unwrap();
    let modes = eigenmodes(&linearize(&op, LoopMode::PlantOnly, &[], &[]).unwrap()).unwrap();
    let r = system.conv.r_f + system.grid.r_g;
    let l = (system.conv.l_f + system.grid.x_g) / W1;
    let expected = -r / l;
    let pair = modes
        .modes
        .iter()
        .filter(|m| m.eigenvalue.im > 0.0)
        .min_by(|a, b| (a.freq_hz - F1).abs().total_cmp(&(b.freq_hz - F1).abs()))
        .unwrap();
    let pass = (pair.freq_hz - F1).abs() <= 1.0 && ((pair.eigenvalue.re - expected) / expected).abs() <= 0.05;
    report(
        pass,
        1,
        "plant pole pair",
        format!("{:.3} Hz, Re {:.3} vs -R/L {:.3}", pair.freq_hz, pair.eigenvalue.re, expected),
    );
}

#[test]
fn c02_synchronous_resonance() {
    let cfg = load("fig4");
    let trace = simulate(&cfg);
    let r = power_report(&trace);
    let c = coupling_check_trace(&trace, r.freq_hz, 2.0).unwrap();
    let low = c.measured[0];
    let dc_like = low.map_or(false, |p| p.freq_hz < 2.0 && p.amplitude >= 0.1 * c.dominant);
    let pass = r.class == ResonanceClass::Sr && (45.0..=52.0).contains(&r.freq_hz) && dc_like;
    report(
        pass,
        2,
        "SR with near-DC phase-current component",
        format!(
            "{} at {:.2} Hz (zeta {:.3}); phase-current component at {:.2} Hz",
            r.class,
            r.freq_hz,
            r.zeta,
            low.map_or(f64::NAN, |p| p.freq_hz)
        ),
    );
}

#[test]
fn c03_lpf_subsynchronous_resonance() {
    let cfg = load("fig7");
    let r = power_report(&simulate(&cfg));
    let x = cfg.system.grid.x_g + cfg.system.conv.l_f;
    let omega_c = match cfg.scheme.psc.variant {
        gfmlab::control::PscVariant::DroopLpf { omega_c } => omega_c,
        other => panic!("unexpected variant {other:?}"),
    };
    let (zeta_formula, _) = psc_second_order(cfg.scheme.psc.k_p, omega_c, x, cfg.system.grid.v_g, 1.0).unwrap();
    let pass =
        r.class == ResonanceClass::Ssr && (r.freq_hz - 9.0).abs() <= 2.0 && (r.zeta - zeta_formula).abs() <= 0.1;
    report(
        pass,
        3,
        "SSR from the synchronization low-pass filter",
        format!("{} at {:.2} Hz, zeta {:.3} vs formula {:.3}", r.class, r.freq_hz, r.zeta, zeta_formula),
    );
}

#[test]
fn c04_closed_loop_ssr_and_coupling() {
    let cfg = load("fig5");
    let trace = simulate(&cfg);
    let r = power_report(&trace);
    let c = coupling_check_trace(&trace, r.freq_hz, 2.0).unwrap();
    let pass = r.class == ResonanceClass::Ssr && (r.freq_hz - 10.0).abs() <= 3.0 && c.pass;
    let f = |p: Option<gfmlab::ringdown::Peak>| p.map_or(f64::NAN, |p| p.freq_hz);
    report(
        pass,
        4,
        "closed-loop SSR with frequency coupling",
        format!(
            "{} at {:.2} Hz (zeta {:.3}); images at {:.2} / {:.2} Hz",
            r.class,
            r.freq_hz,
            r.zeta,
            f(c.measured[0]),
            f(c.measured[1])
        ),
    );
}

fn j_theta_p_peak_db(cfg: &RunConfig) -> f64 {
    let op = op_of(cfg);
    let lin = linearize(&op, LoopMode::OuterOpen, &["theta_c"], &["P"]).unwrap();
    let omegas = log_grid_hz(40.0, 60.0, 801);
    let h = freq_response(&lin, "theta_c", "P", &omegas).unwrap();
    h.iter().map(|v| 20.0 * v.norm().log10()).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn c05_virtual_resistance_bode() {
    let with_vr = load("fig9");
    let mut without = with_vr.clone();
    match &mut without.scheme.inner {
        InnerConfig::OpenLoop(ol) => ol.vr = None,
        InnerConfig::ClosedLoop(_) => unreachable!(),
    }
    let a = j_theta_p_peak_db(&without);
    let b = j_theta_p_peak_db(&with_vr);
    report(
        a - b >= 20.0,
        5,
        "J_thetaP peak reduction near the fundamental",
        format!("{a:.2} dB without VR, {b:.2} dB with VR, drop {:.2} dB", a - b),
    );
}

#[test]
fn c06_vr_design_rule() {
    let r_a = 0.2;
    let k_p = gfmlab::smallsignal::analytic::vr_design_kp(r_a, 1.0, 1.0, W1).unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut detail = Vec::new();
    for scr in [1.5, 5.0, 10.0, 20.0] {
        let system = SystemParams::table_iv(scr, 10.0).unwrap();
        let scheme = ControlScheme::open_loop(
            PscConfig::pure_droop(k_p),
            OpenLoopVvc {
                vr: Some(VrConfig::new(r_a, 2.0 * PI * 7.5)),
                ..OpenLoopVvc::default()
            },
        );
        let re = max_real_part(&modes_at(system, scheme, 0.5));
        worst = worst.max(re);
        detail.push(format!("SCR {scr}: {re:.3}"));
    }
    report(worst < 0.0, 6, "design rule k_p = w1 R_a / (kappa V^2) stable", format!("max Re {}", detail.join(", ")));
}

fn dominant_ssr(m: &ModeReport) -> f64 {
    m.least_damped_in(1.0, 0.5 * F1).map_or(f64::NAN, |m| m.zeta)
}

#[test]
fn c07_mismatched_virtual_resistance() {
    let a = load("fig10a");
    let b = load("fig10b");
    let ra = power_report(&simulate(&a));
    let rb = power_report(&simulate(&b));
    let pass_a = ra.class == ResonanceClass::Ssr && ra.freq_hz < 10.0 && ra.zeta < 0.1;
    let pass_b = !rb.is_resonant_below(0.2);
    report(
        pass_a && pass_b,
        7,
        "mismatched droop/VR SSR, matched design clean",
        format!(
            "k_p 0.03: {} {:.2} Hz zeta {:.3}; k_p 0.2: {} (zeta {:.3})",
            ra.class, ra.freq_hz, ra.zeta, rb.class, rb.zeta
        ),
    );
}

#[test]
fn c08_power_reference_feedforward() {
    let base = load("fig10a");
    let prf = load("fig12a");
    let z0 = dominant_ssr(&modes_of(&base));
    let z1 = dominant_ssr(&modes_of(&prf));
    let r = power_report(&simulate(&prf));
    let weak = r.class == ResonanceClass::None || (r.class == ResonanceClass::Ssr && r.zeta >= 0.1);
    report(
        z1 > z0 && weak,
        8,
        "PRF raises SSR damping",
        format!("eigen zeta {z0:.3} -> {z1:.3}; trace {} zeta {:.3}", r.class, r.zeta),
    );
}

#[test]
fn c09_power_decoupling() {
    let system = SystemParams::table_iv(5.0, 10.0).unwrap();
    let psc = PscConfig::pure_droop(0.05 * W1);
    let plain = ControlScheme::open_loop(psc, OpenLoopVvc::default());
    let pdc = ControlScheme::open_loop(
        psc,
        OpenLoopVvc {
            pdc: Some(PdcConfig {
                r_g_hat: system.grid.r_g,
                x_g_hat: system.grid.x_g,
                include_filter_and_vr: true,
            }),
            ..OpenLoopVvc::default()
        },
    );
    let refs = References::with_p(0.4);
    let omegas = log_grid_hz(1.0, 100.0, 200);
    let resp = |scheme: &ControlScheme, i: &str, o: &str| -> Vec<Complex64> {
        let op = solve_operating_point(&system, scheme, &refs).unwrap();
        let lin = linearize(&op, LoopMode::OuterOpen, &["theta_c", "e_c"], &["P", "Q"]).unwrap();
        freq_response(&lin, i, o, &omegas).unwrap()
    };
    // smallest reduction over the band
    let drop = |i: &str, o: &str| -> f64 {
        let a = resp(&plain, i, o);
        let b = resp(&pdc, i, o);
        a.iter()
            .zip(&b)
            .map(|(a, b)| 20.0 * (a.norm() / b.norm()).log10())
            .fold(f64::INFINITY, f64::min)
    };
    let dp_de = drop("e_c", "P");
    let dq_dt = drop("theta_c", "Q");
    let shaped: Vec<f64> = resp(&pdc, "theta_c", "P").iter().map(|h| 20.0 * h.norm().log10()).collect();
    let spread = shaped.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - shaped.iter().cloned().fold(f64::INFINITY, f64::min);
    report(
        dp_de >= 20.0 && dq_dt >= 20.0 && spread < 3.0,
        9,
        "power decoupling",
        format!("dP/dE drop {dp_de:.1} dB, dQ/dtheta drop {dq_dt:.1} dB, shaped F_thetaP spread {spread:.2} dB"),
    );
}

#[test]
fn c10_voltage_loop_gain_sensitivity() {
    let quarter = load("fig15");
    let mut full = quarter.clone();
    let mut half = quarter.clone();
    full.set_param("vvc_kp", 4.0).unwrap();
    half.set_param("vvc_kp", 2.0).unwrap();
    let z_full = dominant_ssr(&modes_of(&full));
    let z_half = dominant_ssr(&modes_of(&half));
    let (pass_q, q_detail) = match run_scenario(&quarter.scenario(), &quarter.scenario.sim) {
        Err(Error::Diverged { time }) => (true, format!("diverged at {time:.3} s")),
        Ok(t) => {
            let r = power_report(&t);
            (r.class != ResonanceClass::None && r.zeta < 0.02, format!("{} zeta {:.4}", r.class, r.zeta))
        }
        Err(e) => (false, e.to_string()),
    };
    report(
        z_half < z_full && pass_q,
        10,
        "reduced VVC gain erodes SSR damping",
        format!("eigen zeta {z_full:.3} -> {z_half:.3} at half gain; quarter gain: {q_detail}"),
    );
}

#[test]
fn c11_virtual_admittance() {
    let stiff = power_report(&simulate(&load("fig18")));
    let weak = load("fig19");
    let mut settled = weak.clone();
    settled.scenario.refs.p_ref = 0.5;
    settled.scenario.events.clear();
    let v_off = poc_magnitude(&op_of(&settled));
    let mut with_avc = settled.clone();
    with_avc.scheme.outer = OuterVoltageConfig::default().with_default_avc();
    let v_on = poc_magnitude(&op_of(&with_avc));
    let pass = !stiff.is_resonant_below(0.2) && v_off < 0.9 && v_on >= 0.99;
    report(
        pass,
        11,
        "virtual admittance",
        format!(
            "SCR 20: {} (zeta {:.3}); SCR 1.5 |v| {v_off:.4} without AVC, {v_on:.4} with AVC",
            stiff.class, stiff.zeta
        ),
    );
}

#[test]
fn c12_hybrid_robustness() {
    let mut detail = Vec::new();
    let mut pass = true;
    for name in ["fig21a", "fig21b"] {
        let cfg = load(name);
        let stable = modes_of(&cfg).is_stable();
        let r = power_report(&simulate(&cfg));
        pass &= stable && !r.is_resonant_below(0.2);
        detail.push(format!("SCR {}: stable {stable}, {} zeta {:.3}", cfg.system.grid.scr(), r.class, r.zeta));
    }
    report(pass, 12, "hybrid scheme on weak and stiff grids", detail.join("; "));
}

#[test]
fn c13_active_susceptance() {
    let cfg = load("fig24");
    let b_a = match cfg.scheme.inner {
        InnerConfig::ClosedLoop(ClosedLoopVvc {
            add_on: AddOn::ActiveSusceptance { b_a, .. },
            ..
        }) => b_a,
        _ => panic!("fig24 must use active susceptance"),
    };
    let op = op_of(&cfg);
    let stable = eigenmodes(&linearize(&op, LoopMode::Closed, &[], &[]).unwrap()).unwrap().is_stable();
    // frame held: the susceptance acts on the grid-impedance drop v_q = x_g i_d
    let lin = linearize(&op, LoopMode::OuterOpen, &["p_ref"], &["as_id", "vq", "id"]).unwrap();
    // output rows: as_id must be exactly -b_a times vq
    let algebraic = (0..lin.c.ncols())
        .map(|k| (lin.c[(0, k)] + b_a * lin.c[(1, k)]).abs())
        .fold(0.0f64, f64::max);
    let scale = lin.c.row(1).amax().max(1e-12);
    let w = [2.0 * PI * 0.5];
    let h_as = freq_response(&lin, "p_ref", "as_id", &w).unwrap()[0];
    let h_id = freq_response(&lin, "p_ref", "id", &w).unwrap()[0];
    let gain = (h_as / h_id).re;
    let expected = -b_a * cfg.system.grid.x_g;
    let pass = stable && algebraic <= 1e-9 * scale && ((gain - expected) / expected).abs() <= 0.1;
    report(
        pass,
        13,
        "active susceptance",
        format!(
            "stable {stable}; algebraic residual {:.1e}; di_dref/di_d {gain:.4} vs -B_a x_g {expected:.4}",
            algebraic / scale
        ),
    );
}

struct OracleCase {
    name: &'static str,
    cfg: RunConfig,
}

fn oracle_cases() -> Vec<OracleCase> {
    let mut out = Vec::new();
    let mut push = |name: &'static str, cfg: RunConfig| out.push(OracleCase { name, cfg });
    for name in ["fig5", "fig7", "fig10a", "fig12a"] {
        push(name, load(name));
    }
    let fig15 = load("fig15");
    for (name, kp) in [("closed-loop k_pv 4", 4.0), ("closed-loop k_pv 2", 2.0)] {
        let mut c = fig15.clone();
        c.set_param("vvc_kp", kp).unwrap();
        push(name, c);
    }
    let fig5 = load("fig5");
    for (name, scr) in [("closed-loop SCR 5", 5.0), ("closed-loop SCR 7", 7.0)] {
        let mut c = fig5.clone();
        c.set_param("scr", scr).unwrap();
        push(name, c);
    }
    let fig7 = load("fig7");
    for (name, scr) in [("LPF droop SCR 10", 10.0), ("LPF droop SCR 5", 5.0)] {
        let mut c = fig7.clone();
        c.set_param("scr", scr).unwrap();
        push(name, c);
    }
    let mut c = fig7.clone();
    c.set_param("k_p", 0.03).unwrap();
    push("LPF droop k_p 0.03", c);
    let mut c = load("fig4");
    c.set_param("k_p", 0.03).unwrap();
    push("pure droop k_p 0.03", c);
    out
}

#[test]
fn c14_eigen_oracle_equivalence() {
    let mut matched = 0;
    let mut lines = Vec::new();
    let cases = oracle_cases();
    for case in &cases {
        let modes = modes_of(&case.cfg);
        if !modes.is_stable() {
            lines.push(format!("{}: unstable", case.name));
            continue;
        }
        let trace = simulate(&case.cfg);
        let r = power_report(&trace);
        let fit = fit_ringdown(analysis_window(&trace, "P").unwrap(), trace.sample_rate()).unwrap();
        let fitted = fit.nearest(r.freq_hz).unwrap();
        let eig = modes
            .oscillatory_below(2.0 * F1)
            .into_iter()
            .min_by(|a, b| (a.freq_hz - fitted.freq_hz).abs().total_cmp(&(b.freq_hz - fitted.freq_hz).abs()))
            .unwrap();
        let ok = ((fitted.freq_hz - eig.freq_hz) / eig.freq_hz).abs() <= 0.05 && (fitted.zeta - eig.zeta).abs() <= 0.05;
        matched += ok as usize;
        lines.push(format!(
            "{}: fit {:.2} Hz/{:.3} eig {:.2} Hz/{:.3} {}",
            case.name,
            fitted.freq_hz,
            fitted.zeta,
            eig.freq_hz,
            eig.zeta,
            if ok { "ok" } else { "MISMATCH" }
        ));
    }
    for l in &lines {
        println!("    {l}");
    }
    report(
        matched >= 10 && matched == cases.len(),
        14,
        "ringdown fit matches eigenvalues",
        format!("{matched}/{} scenarios", cases.len()),
    );
}

fn droop_run(dt: f64) -> Vec<f64> {
    let system = SystemParams::table_iv(20.0, 10.0).unwrap();
    let scheme = ControlScheme::open_loop(PscConfig::droop_lpf(0.05 * W1, 31.4), OpenLoopVvc::default());
    let scn = Scenario::new(system, scheme, References::with_p(0.4))
        .with_event(0.0, Action::StepPref(0.5))
        .with_duration(0.02);
    let cfg = SimConfig {
        dt,
        record_decimation: 1,
    };
    run_scenario(&scn, &cfg).unwrap().final_state
}

#[test]
fn c15_determinism_and_convergence() {
    let cfg = load("fig5");
    let a = simulate(&cfg);
    let b = simulate(&cfg);
    let identical = a == b && a.to_csv() == b.to_csv();
    let x1 = droop_run(4e-5);
    let x2 = droop_run(2e-5);
    let x4 = droop_run(1e-5);
    let diff = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let order = (diff(&x1, &x2) / diff(&x2, &x4)).log2();
    report(
        identical && order >= 3.5,
        15,
        "determinism and RK4 order",
        format!("bitwise identical {identical}; observed order {order:.2}"),
    );
}

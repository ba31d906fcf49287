//! Angle-to-power frequency response with the synchronization loop opened,
//! with and without a high-pass virtual resistance.

use std::f64::consts::PI;

use gfmlab::control::{ControlScheme, OpenLoopVvc, PscConfig, References, VrConfig};
use gfmlab::model::LoopMode;
use gfmlab::operating_point::solve_operating_point;
use gfmlab::plant::SystemParams;
use gfmlab::smallsignal::{freq_response, linearize, log_grid_hz};

fn main() {
    let sys = SystemParams::table_iv(5.0, 10.0).unwrap();
    let psc = PscConfig::pure_droop(0.05 * 2.0 * PI * 50.0);
    let omegas = log_grid_hz(1.0, 200.0, 400);
    let gain_db = |vvc: OpenLoopVvc| -> Vec<f64> {
        let scheme = ControlScheme::open_loop(psc, vvc);
        let op = solve_operating_point(&sys, &scheme, &References::with_p(0.4)).unwrap();
        let lin = linearize(&op, LoopMode::OuterOpen, &["theta_c"], &["P"]).unwrap();
        freq_response(&lin, "theta_c", "P", &omegas)
            .unwrap()
            .iter()
            .map(|h| 20.0 * h.norm().log10())
            .collect()
    };
    let plain = gain_db(OpenLoopVvc::default());
    let vr = gain_db(OpenLoopVvc {
        vr: Some(VrConfig::new(0.2, 2.0 * PI * 7.5)),
        ..OpenLoopVvc::default()
    });
    println!("{:>8} {:>10} {:>10}", "f_Hz", "plain_dB", "vr_dB");
    for k in (0..omegas.len()).step_by(20) {
        println!("{:8.2} {:10.2} {:10.2}", omegas[k] / (2.0 * PI), plain[k], vr[k]);
    }
    let peak = |g: &[f64]| {
        let (k, v) = g.iter().enumerate().fold((0, f64::MIN), |a, (k, v)| if *v > a.1 { (k, *v) } else { a });
        (omegas[k] / (2.0 * PI), v)
    };
    let (fa, ga) = peak(&plain);
    let (fb, gb) = peak(&vr);
    println!("peak without VR: {ga:.1} dB at {fa:.1} Hz; with VR: {gb:.1} dB at {fb:.1} Hz");
}

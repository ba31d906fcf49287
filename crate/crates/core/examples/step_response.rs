//! Time-domain response to an active-power reference step, written as CSV.
//!
//! Usage: `cargo run --example step_response -- [out.csv]`

use std::f64::consts::PI;

use gfmlab::control::{ControlScheme, OpenLoopVvc, PscConfig, References};
use gfmlab::plant::SystemParams;
use gfmlab::sim::{run_scenario, Action, Scenario, SimConfig};

fn main() {
    let sys = SystemParams::table_iv(20.0, 10.0).unwrap();
    let scheme = ControlScheme::open_loop(PscConfig::droop_lpf(0.05 * 2.0 * PI * 50.0, 31.4), OpenLoopVvc::default());
    let scn = Scenario::new(sys, scheme, References::with_p(0.4)).with_event(0.2, Action::StepPref(0.5));
    let trace = run_scenario(&scn, &SimConfig::default()).unwrap();

    let p = trace.channel("P").unwrap();
    let (k_max, p_max) = p.iter().enumerate().fold((0, f64::MIN), |a, (k, v)| if *v > a.1 { (k, *v) } else { a });
    println!("samples:   {}", trace.len());
    println!("P before:  {:.4}", p[0]);
    println!("P final:   {:.4}", p[p.len() - 1]);
    println!("overshoot: {:.1} % at t = {:.3} s", 100.0 * (p_max - 0.5) / 0.1, k_max as f64 * trace.sample_period);

    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, trace.to_csv()).unwrap();
        println!("wrote {path}");
    }
}

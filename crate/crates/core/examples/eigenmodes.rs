//! Small-signal modes of droop + LPF synchronization, with participation factors.

use std::f64::consts::PI;

use gfmlab::control::{ControlScheme, OpenLoopVvc, PscConfig, References};
use gfmlab::model::LoopMode;
use gfmlab::operating_point::solve_operating_point;
use gfmlab::plant::SystemParams;
use gfmlab::smallsignal::{eigenmodes, linearize};

fn main() {
    let sys = SystemParams::table_iv(20.0, 10.0).unwrap();
    let scheme = ControlScheme::open_loop(PscConfig::droop_lpf(0.05 * 2.0 * PI * 50.0, 31.4), OpenLoopVvc::default());
    let op = solve_operating_point(&sys, &scheme, &References::with_p(0.5)).unwrap();
    let lin = linearize(&op, LoopMode::Closed, &[], &[]).unwrap();
    let report = eigenmodes(&lin).unwrap();
    println!("{:>10} {:>10} {:>9} {:>7}  participants", "Re", "Im", "f_Hz", "zeta");
    for m in report.modes.iter().filter(|m| m.eigenvalue.im >= 0.0) {
        let parts: Vec<String> = m.participants.iter().take(3).map(|(s, w)| format!("{s}:{w:.2}")).collect();
        println!(
            "{:10.2} {:10.2} {:9.2} {:7.3}  {}",
            m.eigenvalue.re,
            m.eigenvalue.im,
            m.freq_hz,
            m.zeta,
            parts.join(" ")
        );
    }
}

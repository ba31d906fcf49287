//! Grid weakening in the middle of a run: SCR 20 to 5 at 0.5 s.

use std::f64::consts::PI;

use gfmlab::control::{ControlScheme, OpenLoopVvc, PscConfig, References};
use gfmlab::plant::{make_grid_from_scr, SystemParams};
use gfmlab::ringdown::{analyze_channel, Bands, ChannelKind};
use gfmlab::sim::{run_scenario, Action, Scenario, SimConfig};

fn main() {
    let w1 = 2.0 * PI * 50.0;
    let sys = SystemParams::table_iv(20.0, 10.0).unwrap();
    let weak = make_grid_from_scr(5.0, 10.0, 1.0, w1).unwrap();
    let scheme = ControlScheme::open_loop(PscConfig::droop_lpf(0.05 * w1, 31.4), OpenLoopVvc::default());
    let scn = Scenario::new(sys, scheme, References::with_p(0.4)).with_event(0.5, Action::SetGrid(weak));
    let trace = run_scenario(&scn, &SimConfig::default()).unwrap();
    let p = trace.channel("P").unwrap();
    let v = trace.channel("Vmag").unwrap();
    let k = trace.index_at(0.5);
    println!("before: P {:.4}, |v| {:.4}", p[k - 1], v[k - 1]);
    println!("after:  P {:.4}, |v| {:.4}", p[p.len() - 1], v[v.len() - 1]);
    let r = analyze_channel(&trace, "P", ChannelKind::Power, &Bands::default()).unwrap();
    println!("transient: {} at {:.2} Hz, zeta {:.3}", r.class, r.freq_hz, r.zeta);
}

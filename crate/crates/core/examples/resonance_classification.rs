//! Classifies the dominant oscillation of simulated step responses as
//! synchronous (SR), sub-synchronous (SSR) or none, and checks the
//! phase-current images of SSR.

use std::f64::consts::PI;

use gfmlab::control::{ClosedLoopVvc, ControlScheme, OpenLoopVvc, PscConfig, References};
use gfmlab::plant::SystemParams;
use gfmlab::ringdown::{analyze_channel, coupling_check_trace, Bands, ChannelKind, ResonanceClass};
use gfmlab::sim::{run_scenario, Action, Scenario, SimConfig};

fn main() {
    let w1 = 2.0 * PI * 50.0;
    let weak = SystemParams::table_iv(5.0, 10.0).unwrap();
    let mid = SystemParams::table_iv(10.0, 10.0).unwrap();
    let stiff = SystemParams::table_iv(20.0, 10.0).unwrap();
    let cases = [
        (
            "open loop, pure droop, SCR 5",
            weak,
            ControlScheme::open_loop(PscConfig::pure_droop(0.05 * w1), OpenLoopVvc::default()),
        ),
        (
            "closed loop, pure droop, SCR 10",
            mid,
            ControlScheme::closed_loop(PscConfig::pure_droop(0.018 * w1), ClosedLoopVvc::classic(&mid)),
        ),
        (
            "open loop, droop + LPF, SCR 20",
            stiff,
            ControlScheme::open_loop(PscConfig::droop_lpf(0.05 * w1, 31.4), OpenLoopVvc::default()),
        ),
    ];
    for (name, sys, scheme) in cases {
        let scn = Scenario::new(sys, scheme, References::with_p(0.4)).with_event(0.2, Action::StepPref(0.5));
        let trace = run_scenario(&scn, &SimConfig::default()).unwrap();
        let r = analyze_channel(&trace, "P", ChannelKind::Power, &Bands::default()).unwrap();
        println!("{name}: {} at {:.2} Hz, zeta {:.3}", r.class, r.freq_hz, r.zeta);
        if r.class == ResonanceClass::Ssr {
            let c = coupling_check_trace(&trace, r.freq_hz, 2.0).unwrap();
            let found: Vec<String> = c
                .measured
                .iter()
                .map(|m| m.map_or("missing".to_string(), |p| format!("{:.2} Hz", p.freq_hz)))
                .collect();
            println!(
                "    phase-current images: expected {:.2} / {:.2} Hz, found {} / {} ({})",
                c.expected[0],
                c.expected[1],
                found[0],
                found[1],
                if c.pass { "coupled" } else { "not coupled" }
            );
        }
    }
}

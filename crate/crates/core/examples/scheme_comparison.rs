//! Least-damped mode up to twice the line frequency for each closed-loop
//! add-on across grid strengths.

use std::f64::consts::PI;

use gfmlab::control::{AddOn, ClosedLoopVvc, ControlScheme, PllConfig, PscConfig, References, CLOSED_LOOP_DROOP};
use gfmlab::model::LoopMode;
use gfmlab::operating_point::solve_operating_point;
use gfmlab::plant::SystemParams;
use gfmlab::smallsignal::{eigenmodes, linearize};

fn least_damped(sys: &SystemParams, scheme: &ControlScheme) -> String {
    let op = match solve_operating_point(sys, scheme, &References::with_p(0.5)) {
        Ok(op) => op,
        Err(e) => return format!("{e}"),
    };
    let modes = eigenmodes(&linearize(&op, LoopMode::Closed, &[], &[]).unwrap()).unwrap();
    modes
        .modes
        .iter()
        .filter(|m| m.eigenvalue.im > 0.0 && m.freq_hz <= 100.0)
        .min_by(|a, b| a.zeta.total_cmp(&b.zeta))
        .map_or("no oscillatory mode".into(), |m| format!("{:6.1} Hz zeta {:6.3}", m.freq_hz, m.zeta))
}

fn main() {
    let psc = PscConfig::pure_droop(CLOSED_LOOP_DROOP * 2.0 * PI * 50.0);
    for scr in [1.5, 5.0, 10.0, 20.0] {
        let sys = SystemParams::table_iv(scr, 10.0).unwrap();
        let classic = ClosedLoopVvc::classic(&sys);
        let schemes = [
            ("classic", ControlScheme::closed_loop(psc, classic)),
            ("virtual admittance", ControlScheme::closed_loop(psc, classic.with_add_on(AddOn::Va { r_v: 0.1, l_v: 0.3 }))),
            (
                "hybrid",
                ControlScheme::closed_loop(psc.with_hsc(0.5), classic.with_add_on(AddOn::Hybrid { k_i_dq: 50.0, prf: true })),
            ),
            (
                "active susceptance",
                ControlScheme::closed_loop(
                    psc.with_hsc(0.5),
                    classic.with_add_on(AddOn::ActiveSusceptance { b_a: 1.0, k_i_dq: 50.0, prf: true }),
                ),
            ),
            (
                "PLL-synchronized VCC",
                ControlScheme::closed_loop(
                    psc,
                    classic.with_add_on(AddOn::GfmVcc {
                        r_v: 0.1,
                        l_v: 0.3,
                        pll: PllConfig { k_p: 100.0, k_i: 2500.0 },
                    }),
                ),
            ),
        ];
        println!("SCR {scr}");
        for (name, scheme) in schemes {
            println!("    {name:>22}: {}", least_damped(&sys, &scheme));
        }
    }
}

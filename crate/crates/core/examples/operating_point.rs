//! Equilibrium of a droop-controlled converter across grid strengths.

use std::f64::consts::PI;

use gfmlab::control::{ControlScheme, OpenLoopVvc, PscConfig, References};
use gfmlab::operating_point::solve_operating_point;
use gfmlab::plant::SystemParams;

fn main() {
    let scheme = ControlScheme::open_loop(PscConfig::pure_droop(0.05 * 2.0 * PI * 50.0), OpenLoopVvc::default());
    println!("{:>5} {:>9} {:>7} {:>7} {:>7} {:>9}", "SCR", "theta_deg", "E", "|v|", "Q", "residual");
    for scr in [1.5, 2.0, 5.0, 10.0, 20.0] {
        let sys = SystemParams::table_iv(scr, 10.0).unwrap();
        match solve_operating_point(&sys, &scheme, &References::with_p(0.5)) {
            Ok(op) => println!(
                "{scr:5.1} {:9.3} {:7.4} {:7.4} {:7.4} {:9.2e}",
                op.theta0.to_degrees(),
                op.e0,
                op.v0.norm(),
                op.q0,
                op.residual
            ),
            Err(e) => println!("{scr:5.1} {e}"),
        }
    }
}

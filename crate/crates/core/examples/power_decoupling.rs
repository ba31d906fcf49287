//! Cross-coupling between the angle and magnitude channels with and without
//! the power decoupling compensators.

use std::f64::consts::PI;

use gfmlab::control::{ControlScheme, OpenLoopVvc, PdcConfig, PscConfig, References};
use gfmlab::model::LoopMode;
use gfmlab::operating_point::solve_operating_point;
use gfmlab::plant::SystemParams;
use gfmlab::smallsignal::{freq_response, linearize, log_grid_hz};

fn main() {
    let sys = SystemParams::table_iv(5.0, 10.0).unwrap();
    let psc = PscConfig::pure_droop(0.05 * 2.0 * PI * 50.0);
    let plain = ControlScheme::open_loop(psc, OpenLoopVvc::default());
    let pdc = ControlScheme::open_loop(
        psc,
        OpenLoopVvc {
            pdc: Some(PdcConfig {
                r_g_hat: sys.grid.r_g,
                x_g_hat: sys.grid.x_g,
                include_filter_and_vr: true,
            }),
            ..OpenLoopVvc::default()
        },
    );
    let omegas = log_grid_hz(1.0, 100.0, 5);
    println!("{:>8} {:>9} {:>9} {:>9} {:>9}", "f_Hz", "dP/dE", "PDC", "dQ/dth", "PDC");
    let mut rows = vec![Vec::new(); omegas.len()];
    for scheme in [&plain, &pdc] {
        let op = solve_operating_point(&sys, scheme, &References::with_p(0.4)).unwrap();
        let lin = linearize(&op, LoopMode::OuterOpen, &["theta_c", "e_c"], &["P", "Q"]).unwrap();
        for (io, (i, o)) in [("e_c", "P"), ("theta_c", "Q")].into_iter().enumerate() {
            for (k, h) in freq_response(&lin, i, o, &omegas).unwrap().iter().enumerate() {
                rows[k].push((io, 20.0 * h.norm().log10()));
            }
        }
    }
    for (k, row) in rows.iter().enumerate() {
        // order: plain e->P, plain th->Q, pdc e->P, pdc th->Q
        println!(
            "{:8.2} {:9.1} {:9.1} {:9.1} {:9.1}",
            omegas[k] / (2.0 * PI),
            row[0].1,
            row[2].1,
            row[1].1,
            row[3].1
        );
    }
}

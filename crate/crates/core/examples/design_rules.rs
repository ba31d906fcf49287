//! Closed-form design estimates next to the eigenvalues they approximate.

use std::f64::consts::PI;

use gfmlab::control::{ControlScheme, OpenLoopVvc, PscConfig, References};
use gfmlab::model::LoopMode;
use gfmlab::operating_point::solve_operating_point;
use gfmlab::plant::SystemParams;
use gfmlab::smallsignal::analytic::{
    damped_frequency_hz, droop_gain_limit, plant_poles, psc_second_order, vr_design_kp, vr_mode_poles,
};
use gfmlab::smallsignal::{eigenmodes, linearize};

fn main() {
    let w1 = 2.0 * PI * 50.0;
    for scr in [1.5, 5.0, 10.0, 20.0] {
        let sys = SystemParams::table_iv(scr, 10.0).unwrap();
        let r = sys.conv.r_f + sys.grid.r_g;
        let l = (sys.conv.l_f + sys.grid.x_g) / w1;
        let poles = plant_poles(r, l, w1).unwrap();
        println!(
            "SCR {scr:4.1}: plant poles {:.2} ± j{:.1}, droop limit k_p < {:.3} pu",
            poles[0].re,
            poles[0].im,
            droop_gain_limit(r).unwrap()
        );
    }

    let sys = SystemParams::table_iv(20.0, 10.0).unwrap();
    let (k_p, omega_c) = (0.05 * w1, 31.4);
    let scheme = ControlScheme::open_loop(PscConfig::droop_lpf(k_p, omega_c), OpenLoopVvc::default());
    let op = solve_operating_point(&sys, &scheme, &References::with_p(0.5)).unwrap();
    let x = sys.conv.l_f + sys.grid.x_g;
    let (zeta, omega_n) = psc_second_order(k_p, omega_c, x, sys.grid.v_g, op.e0).unwrap();
    let est_hz = damped_frequency_hz(zeta, omega_n);
    let modes = eigenmodes(&linearize(&op, LoopMode::Closed, &[], &[]).unwrap()).unwrap();
    let nearest = modes
        .modes
        .iter()
        .filter(|m| m.eigenvalue.im > 0.0)
        .min_by(|a, b| (a.freq_hz - est_hz).abs().total_cmp(&(b.freq_hz - est_hz).abs()))
        .unwrap();
    println!("PSC estimate: {est_hz:.2} Hz, zeta {zeta:.3}; eigenmode {:.2} Hz, zeta {:.3}", nearest.freq_hz, nearest.zeta);

    let r_a = 0.2;
    let kp_vr = vr_design_kp(r_a, 1.0, sys.conv.kappa, w1).unwrap();
    println!("VR R_a = {r_a}: matched droop gain {:.3} pu", kp_vr / w1);
    let vr = vr_mode_poles(sys.conv.r_f + sys.grid.r_g, x / w1, r_a, 2.0 * PI * 7.5, w1).unwrap();
    for p in vr.sr_like.iter().chain(&vr.ssr_like).filter(|p| p.im >= 0.0) {
        println!("    VR pole {:.2} ± j{:.2} ({:.2} Hz)", p.re, p.im, p.im / (2.0 * PI));
    }
}

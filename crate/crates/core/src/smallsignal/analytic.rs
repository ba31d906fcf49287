//! Closed-form resonance estimates for the simplified converter–grid loop.
//!
//! `l` arguments are inductances in seconds (reactance divided by ω₁), so
//! SI and per-unit inputs give the same pole locations.

use num_complex::Complex64;

use crate::error::{domain, Result};
use crate::poly;

/// Poles of the series RL path in the synchronous frame: `−R/L ± jω₁`.
pub fn plant_poles(r: f64, l: f64, omega_1: f64) -> Result<[Complex64; 2]> {
    if !(l > 0.0) || !(r >= 0.0) {
        return domain("plant poles need L > 0 and R >= 0");
    }
    let re = -r / l;
    Ok([Complex64::new(re, omega_1), Complex64::new(re, -omega_1)])
}

/// Damping ratio and natural frequency of droop + LPF synchronization over a
/// reactance `x`: `ζ = ½√(ω_c X/(k_p V_g E))`, `ω_n = √(k_p ω_c V_g E/X)`.
pub fn psc_second_order(k_p: f64, omega_c: f64, x: f64, v_g: f64, e: f64) -> Result<(f64, f64)> {
    if !(k_p > 0.0 && omega_c > 0.0 && x > 0.0 && v_g > 0.0 && e > 0.0) {
        return domain("second-order PSC model needs positive inputs");
    }
    if !omega_c.is_finite() {
        return domain("pure droop has no second-order synchronization mode");
    }
    let zeta = 0.5 * (omega_c * x / (k_p * v_g * e)).sqrt();
    let omega_n = (k_p * omega_c * v_g * e / x).sqrt();
    Ok((zeta, omega_n))
}

/// Damped frequency in Hz of a second-order pair.
pub fn damped_frequency_hz(zeta: f64, omega_n: f64) -> f64 {
    omega_n * (1.0 - zeta * zeta).max(0.0).sqrt() / (2.0 * std::f64::consts::PI)
}

/// Synchronous-resonance poles under pure droop:
/// `−(2R − κ k_p E v_d0/ω₁)/(2L) ± jω₁`.
pub fn droop_pole_estimate(
    r: f64,
    l: f64,
    k_p: f64,
    e: f64,
    v_d0: f64,
    kappa: f64,
    omega_1: f64,
) -> Result<[Complex64; 2]> {
    if !(l > 0.0) || !(r >= 0.0) || !(k_p >= 0.0) {
        return domain("droop pole estimate needs L > 0, R >= 0, k_p >= 0");
    }
    let re = -(2.0 * r - kappa * k_p * e * v_d0 / omega_1) / (2.0 * l);
    Ok([Complex64::new(re, omega_1), Complex64::new(re, -omega_1)])
}

/// Largest droop gain (p.u.) keeping the synchronous resonance damped.
pub fn droop_gain_limit(r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return domain("resistance must be non-negative");
    }
    Ok(2.0 * r)
}

/// Droop gain (rad/s per p.u.) matched to a virtual resistance: `ω₁R_a/(κV²)`.
pub fn vr_design_kp(r_a: f64, v: f64, kappa: f64, omega_1: f64) -> Result<f64> {
    if !(r_a > 0.0 && v > 0.0 && kappa > 0.0 && omega_1 > 0.0) {
        return domain("VR design rule needs positive inputs");
    }
    Ok(omega_1 * r_a / (kappa * v * v))
}

/// Roots of `[sL + R + R_a s/(s + ω_v)]² + (ω₁L)²`, partitioned by frequency.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VrPoles {
    /// `|Im|/ω₁` in `[0.8, 1.2]`.
    pub sr_like: Vec<Complex64>,
    /// `|Im| < 0.5ω₁`.
    pub ssr_like: Vec<Complex64>,
    pub other: Vec<Complex64>,
}

pub fn vr_mode_poles(r: f64, l: f64, r_a: f64, omega_v: f64, omega_1: f64) -> Result<VrPoles> {
    if !(l > 0.0) || !(r >= 0.0 && r_a >= 0.0 && omega_v >= 0.0) {
        return domain("VR poles need L > 0 and non-negative R, R_a, ω_v");
    }
    // multiply through by (s + ω_v)²: A(s)² + B(s)² with
    // A = L s² + (R + Lω_v + R_a) s + Rω_v, B = ω₁L(s + ω_v)
    let a = [r * omega_v, r + l * omega_v + r_a, l];
    let b = [omega_1 * l * omega_v, omega_1 * l];
    let quartic = poly::add(&poly::mul(&a, &a), &poly::mul(&b, &b));
    let mut out = VrPoles::default();
    for p in poly::roots(&quartic)? {
        let ratio = p.im.abs() / omega_1;
        if (0.8..=1.2).contains(&ratio) {
            out.sr_like.push(p);
        } else if ratio < 0.5 {
            out.ssr_like.push(p);
        } else {
            out.other.push(p);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const W1: f64 = 2.0 * PI * 50.0;

    #[test]
    fn plant_poles_examples() {
        let p = plant_poles(0.0, 0.1 / W1, W1).unwrap();
        assert_eq!(p[0], Complex64::new(0.0, W1));
        // SI: 0.1 Ω, 10 mH → roots of (sL + R)² + (ω₁L)²
        let p = plant_poles(0.1, 0.01, W1).unwrap();
        let roots = poly::roots(&[0.1f64.powi(2) + (W1 * 0.01).powi(2), 2.0 * 0.1 * 0.01, 1e-4]).unwrap();
        for r in roots {
            assert!(p.iter().any(|q| (q - r).norm() < 1e-9));
        }
        assert!((p[0].re + 10.0).abs() < 1e-12);
        assert!(plant_poles(0.1, 0.0, W1).is_err());
    }

    #[test]
    fn psc_second_order_example() {
        let (z, wn) = psc_second_order(0.05 * W1, 31.4, 0.128, 1.0, 1.0).unwrap();
        assert!((z - 0.2528).abs() < 5e-4, "{z}");
        assert!((wn - 62.07).abs() < 0.05, "{wn}");
        assert!((damped_frequency_hz(z, wn) - 9.56).abs() < 0.05);
        let (z4, _) = psc_second_order(0.2 * W1, 31.4, 0.128, 1.0, 1.0).unwrap();
        assert!((z4 - z / 2.0).abs() < 1e-12);
        assert!(psc_second_order(1.0, f64::INFINITY, 0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn droop_pole_boundary() {
        let l = 0.15 / W1;
        let base = plant_poles(0.1, l, W1).unwrap();
        assert_eq!(droop_pole_estimate(0.1, l, 0.0, 1.0, 1.0, 1.0, W1).unwrap(), base);
        let k_max = droop_gain_limit(0.1).unwrap();
        assert!((k_max - 0.2).abs() < 1e-15);
        let at = droop_pole_estimate(0.1, l, k_max * W1, 1.0, 1.0, 1.0, W1).unwrap();
        assert!(at[0].re.abs() < 1e-9);
        let above = droop_pole_estimate(0.1, l, 1.1 * k_max * W1, 1.0, 1.0, 1.0, W1).unwrap();
        assert!(above[0].re > 0.0);
    }

    #[test]
    fn vr_design_examples() {
        assert!((vr_design_kp(0.2, 1.0, 1.0, W1).unwrap() / W1 - 0.2).abs() < 1e-15);
        let k1 = vr_design_kp(0.2, 1.0, 1.0, W1).unwrap();
        let k2 = vr_design_kp(0.2, 2.0, 1.0, W1).unwrap();
        assert!((k2 - k1 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn vr_poles_limits() {
        let l = 0.2 / W1;
        // no VR: the plant pair plus the cancelled HPF root at −ω_v
        let p = vr_mode_poles(0.01, l, 0.0, 47.0, W1).unwrap();
        let base = plant_poles(0.01, l, W1).unwrap();
        assert_eq!(p.sr_like.len(), 2);
        assert!(p.sr_like.iter().all(|z| base.iter().any(|b| (z - b).norm() < 1e-6 * W1)));
        // ω_v = 0: pair at −(R + R_a)/L ± jω₁ plus a double root at the origin
        let p = vr_mode_poles(0.01, l, 0.2, 0.0, W1).unwrap();
        let expect = -(0.21) / l;
        assert!(p.sr_like.iter().all(|z| (z.re - expect).abs() < 1e-6 * expect.abs()));
        assert!(p.ssr_like.iter().all(|z| z.norm() < 1e-3));
    }

    #[test]
    fn default_vr_gives_slow_ssr_pair() {
        let l = (0.0779 + 0.199) / W1;
        let p = vr_mode_poles(0.005 + 0.0199, l, 0.2, 2.0 * PI * 7.5, W1).unwrap();
        assert_eq!(p.ssr_like.len(), 2);
        assert!(p.ssr_like.iter().all(|z| z.im.abs() / (2.0 * PI) < 10.0));
    }
}

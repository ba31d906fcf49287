use num_complex::Complex64;

use super::{AddOn, ClosedLoopVvc, OpenLoopVvc, OuterVoltageConfig, PllConfig, PscConfig, PscVariant};
use crate::error::{Error, Result};
use crate::plant::{ComplexDq, ConverterParams};

/// Below this POC voltage the power-reference feedforward divides by ~0.
pub const MIN_PRF_VOLTAGE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PscOut {
    pub omega: f64,
    pub dtheta: f64,
    pub dx: [f64; 2],
}

/// `ω = ω₁ + k_p·F(s)(p_ref − p_meas) [+ k_vq·ω₁·v_q]`, `dθ/dt = ω − ω₁`
/// (the angle is relative to the grid frame).
pub fn psc_step(
    cfg: &PscConfig,
    x: &[f64],
    p_meas: f64,
    p_ref: f64,
    v_q: f64,
    omega_1: f64,
) -> PscOut {
    let err = p_ref - p_meas;
    let mut dx = [0.0; 2];
    let shaped = match cfg.variant {
        PscVariant::PureDroop => err,
        PscVariant::DroopLpf { omega_c } => {
            dx[0] = omega_c * (err - x[0]);
            x[0]
        }
        PscVariant::LeadLag {
            omega_c,
            t_lead,
            t_lag,
        } => {
            dx[0] = omega_c * (err - x[0]);
            dx[1] = (x[0] - x[1]) / t_lag;
            x[1] + t_lead * dx[1]
        }
    };
    let mut dw = cfg.k_p * shaped;
    if let Some(k_vq) = cfg.k_vq {
        dw += k_vq * omega_1 * v_q;
    }
    PscOut {
        omega: omega_1 + dw,
        dtheta: dw,
        dx,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterOut {
    pub e: f64,
    /// AVC integrator derivative (zero when the AVC has no integral path).
    pub dx: f64,
}

/// `E = E_nom + k_q(Q_ref − Q) [+ PI(v_ref − |v|)]`.
pub fn outer_voltage_step(
    cfg: &OuterVoltageConfig,
    x: &[f64],
    q_meas: f64,
    q_ref: f64,
    v_mag: f64,
    v_ref: f64,
) -> OuterOut {
    let mut e = cfg.e_nom + cfg.k_q * (q_ref - q_meas);
    let mut dx = 0.0;
    if let Some(g) = cfg.avc {
        let err = v_ref - v_mag;
        e += g.k_p * err;
        if g.k_i > 0.0 {
            e += x[0];
            dx = g.k_i * err;
        }
    }
    OuterOut { e, dx }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOut {
    /// Converter voltage command in the converter frame.
    pub e_cmd: ComplexDq,
    /// Current reference handed to the VCC (zero for open-loop VVC).
    pub i_ref: ComplexDq,
    /// Active-susceptance contribution to `i_d,ref`.
    pub as_term: f64,
    pub dx: [f64; 6],
}

/// Open-loop VVC: `e = E∠0` shaped by the virtual resistance (HPF on the
/// converter current) and, when enabled, the d-axis power-reference tracking
/// loop `R_a(P_ref/(κV) − i_d)` that replaces the d-axis VR branch.
///
/// `x` holds the two HPF states when a VR is configured.
pub fn open_loop_inner_step(
    cfg: &OpenLoopVvc,
    x: &[f64],
    e_mag: f64,
    v: ComplexDq,
    i: ComplexDq,
    p_ref: f64,
    kappa: f64,
) -> Result<InnerOut> {
    let mut e_cmd = Complex64::new(e_mag, 0.0);
    let mut dx = [0.0; 6];
    if let Some(vr) = cfg.vr {
        // HPF(i) = i − z, ż = ω_v(i − z)
        let hp_d = i.re - x[0];
        let hp_q = i.im - x[1];
        dx[0] = vr.omega_v * hp_d;
        dx[1] = vr.omega_v * hp_q;
        e_cmd.im -= vr.r_a * hp_q;
        if cfg.prf.is_none() {
            e_cmd.re -= vr.r_a * hp_d;
        }
    }
    if let Some(prf) = cfg.prf {
        let v_mag = v.norm();
        if v_mag < MIN_PRF_VOLTAGE {
            return Err(Error::DegenerateVoltage(v_mag));
        }
        e_cmd.re += prf.r_a * (p_ref / (kappa * v_mag) - i.re);
    }
    Ok(InnerOut {
        e_cmd,
        i_ref: Complex64::new(0.0, 0.0),
        as_term: 0.0,
        dx,
    })
}

/// Offsets of the closed-loop inner states inside their slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClosedLoopLayout {
    /// Voltage-PI integrators (d, q); the q entry is shared with the d-to-q path.
    pub xi_v: Option<usize>,
    /// Current-PI integrators (d, q).
    pub xi_c: Option<usize>,
    /// VI derivative-branch LPF state or VA current reference (d, q).
    pub aux: Option<usize>,
    pub len: usize,
}

impl ClosedLoopLayout {
    pub fn for_config(cfg: &ClosedLoopVvc) -> Self {
        let mut l = ClosedLoopLayout::default();
        let mut take = |n: usize| {
            let at = l.len;
            l.len += n;
            at
        };
        let uses_vvc = !matches!(cfg.add_on, AddOn::Va { .. } | AddOn::GfmVcc { .. });
        let shared_dq = matches!(
            cfg.add_on,
            AddOn::Hybrid { k_i_dq, .. } | AddOn::ActiveSusceptance { k_i_dq, .. } if k_i_dq > 0.0
        );
        if uses_vvc && (cfg.vvc.k_i > 0.0 || shared_dq) {
            l.xi_v = Some(take(2));
        }
        if matches!(cfg.add_on, AddOn::Vi { .. } | AddOn::Va { .. } | AddOn::GfmVcc { .. }) {
            l.aux = Some(take(2));
        }
        if cfg.vcc.k_i > 0.0 {
            l.xi_c = Some(take(2));
        }
        l
    }

    pub fn labels(&self, cfg: &ClosedLoopVvc) -> Vec<&'static str> {
        let mut out = vec![""; self.len];
        if let Some(k) = self.xi_v {
            out[k] = "vvc_int_d";
            out[k + 1] = "vvc_int_q";
        }
        if let Some(k) = self.aux {
            let (a, b) = match cfg.add_on {
                AddOn::Vi { .. } => ("vi_lpf_d", "vi_lpf_q"),
                _ => ("va_iref_d", "va_iref_q"),
            };
            out[k] = a;
            out[k + 1] = b;
        }
        if let Some(k) = self.xi_c {
            out[k] = "vcc_int_d";
            out[k + 1] = "vcc_int_q";
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerRefs {
    /// Voltage magnitude from the outer loop (VVC reference or virtual EMF).
    pub e_ref: f64,
    pub p_ref: f64,
}

/// Closed-loop VVC/VCC with the configured add-on, all in the converter frame.
///
/// `v` is the POC voltage, `i_f` the converter (inductor) current and `i_g`
/// the output current.
#[allow(clippy::too_many_arguments)]
pub fn closed_loop_inner_step(
    cfg: &ClosedLoopVvc,
    layout: &ClosedLoopLayout,
    x: &[f64],
    refs: InnerRefs,
    v: ComplexDq,
    i_f: ComplexDq,
    i_g: ComplexDq,
    conv: &ConverterParams,
    kappa: f64,
    omega_1: f64,
) -> Result<InnerOut> {
    if x.len() != layout.len {
        return Err(Error::VariantMismatch(format!(
            "expected {} inner states, got {}",
            layout.len,
            x.len()
        )));
    }
    let j = Complex64::i();
    let mut dx = [0.0; 6];
    let pair = |k: usize| Complex64::new(x[k], x[k + 1]);
    let prf_current = |on: bool| -> Result<f64> {
        if !on {
            return Ok(0.0);
        }
        let v_mag = v.norm();
        if v_mag < MIN_PRF_VOLTAGE {
            return Err(Error::DegenerateVoltage(v_mag));
        }
        Ok(refs.p_ref / (kappa * v_mag))
    };

    let mut as_term = 0.0;
    let i_ref = match cfg.add_on {
        AddOn::Va { r_v, l_v } | AddOn::GfmVcc { r_v, l_v, .. } => {
            let k = layout
                .aux
                .ok_or_else(|| Error::VariantMismatch("VA state missing".into()))?;
            let i_va = pair(k);
            // (l_v/ω₁)·di/dt = (e_ref − v) − (r_v + j l_v)·i
            let di = (Complex64::new(refs.e_ref, 0.0) - v - (r_v + j * l_v) * i_va) * (omega_1 / l_v);
            dx[k] = di.re;
            dx[k + 1] = di.im;
            let prf = matches!(cfg.add_on, AddOn::GfmVcc { .. });
            i_va + prf_current(prf)?
        }
        _ => {
            let mut v_ref = Complex64::new(refs.e_ref, 0.0);
            if let AddOn::Vi { r_v, l_v, omega_lpf } = cfg.add_on {
                let k = layout
                    .aux
                    .ok_or_else(|| Error::VariantMismatch("VI state missing".into()))?;
                let z = pair(k);
                // s·LPF(i) = ω_lpf(i − z)
                let dz = (i_g - z) * omega_lpf;
                dx[k] = dz.re;
                dx[k + 1] = dz.im;
                v_ref -= (r_v + j * l_v) * i_g + dz * (l_v / omega_1);
            }
            let (k_dq, prf, b_a) = match cfg.add_on {
                AddOn::Hybrid { k_i_dq, prf } => (k_i_dq, prf, 0.0),
                AddOn::ActiveSusceptance { b_a, k_i_dq, prf } => (k_i_dq, prf, b_a),
                _ => (0.0, false, 0.0),
            };
            let err = v_ref - v;
            let mut i_ref = err * cfg.vvc.k_p;
            if let Some(k) = layout.xi_v {
                i_ref += pair(k);
                dx[k] = cfg.vvc.k_i * err.re;
                // GFL voltage loop d-to-q shares the q-axis integrator
                dx[k + 1] = cfg.vvc.k_i * err.im - k_dq * err.re;
            }
            if cfg.vvc.cap_decoupling {
                i_ref += j * conv.c_f * v;
            }
            if cfg.vvc.ig_feedforward {
                i_ref += i_g;
            }
            i_ref.re += prf_current(prf)?;
            as_term = as_feedback(b_a, v.im);
            i_ref.re += as_term;
            i_ref
        }
    };

    let err_c = i_ref - i_f;
    let mut e_cmd = err_c * cfg.vcc.k_p;
    if let Some(k) = layout.xi_c {
        e_cmd += pair(k);
        dx[k] = cfg.vcc.k_i * err_c.re;
        dx[k + 1] = cfg.vcc.k_i * err_c.im;
    }
    if cfg.vcc.decoupling {
        e_cmd += j * conv.l_f * i_f;
    }
    if cfg.vcc.v_feedforward {
        e_cmd += v;
    }
    Ok(InnerOut {
        e_cmd,
        i_ref,
        as_term,
        dx,
    })
}

/// Active-susceptance path: `Δi_d,ref = −b_a·v_q`.
pub fn as_feedback(b_a: f64, v_q: f64) -> f64 {
    -b_a * v_q
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllOut {
    pub omega: f64,
    pub dtheta: f64,
    pub dxi: f64,
}

/// Synchronous-reference-frame PLL: PI on `v_q` gives the frequency deviation.
pub fn pll_step(cfg: &PllConfig, xi: f64, v_q: f64, omega_1: f64) -> PllOut {
    let dw = cfg.k_p * v_q + xi;
    PllOut {
        omega: omega_1 + dw,
        dtheta: dw,
        dxi: cfg.k_i * v_q,
    }
}

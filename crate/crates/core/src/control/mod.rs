//! Control schemes for the two grid-forming structures: power-synchronization
//! variants, outer voltage loops, and the open-loop / closed-loop vector voltage
//! control inner structures with their damping add-ons.
//!
//! Blocks are continuous-time and stateless; each takes the slice of the joint
//! state vector that belongs to it and returns derivatives for that slice.

mod blocks;
pub mod pdc;

pub use blocks::{
    as_feedback, closed_loop_inner_step, open_loop_inner_step, outer_voltage_step, pll_step,
    psc_step, ClosedLoopLayout, InnerOut, InnerRefs, OuterOut, PllOut, PscOut,
};
pub use pdc::{pdc_controllers, PdcDesign, RationalTf};

use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::plant::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PscVariant {
    PureDroop,
    /// Droop with a first-order LPF; also stands for VSM inertia emulation.
    DroopLpf { omega_c: f64 },
    /// Droop, LPF and a `(1 + s·t_lead)/(1 + s·t_lag)` compensator.
    LeadLag {
        omega_c: f64,
        t_lead: f64,
        t_lag: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PscConfig {
    pub variant: PscVariant,
    /// Droop gain in rad/s per p.u. power.
    pub k_p: f64,
    /// q-axis voltage feedforward gain (p.u., scaled by ω₁ inside the block).
    pub k_vq: Option<f64>,
}

impl PscConfig {
    pub fn pure_droop(k_p: f64) -> Self {
        Self {
            variant: PscVariant::PureDroop,
            k_p,
            k_vq: None,
        }
    }

    pub fn droop_lpf(k_p: f64, omega_c: f64) -> Self {
        Self {
            variant: PscVariant::DroopLpf { omega_c },
            k_p,
            k_vq: None,
        }
    }

    pub fn with_hsc(mut self, k_vq: f64) -> Self {
        self.k_vq = Some(k_vq);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_p > 0.0) {
            return domain("PSC droop gain must be positive");
        }
        match self.variant {
            PscVariant::PureDroop => {}
            PscVariant::DroopLpf { omega_c } => {
                if !(omega_c > 0.0) {
                    return domain("PSC LPF cut-off must be positive");
                }
            }
            PscVariant::LeadLag {
                omega_c,
                t_lead,
                t_lag,
            } => {
                if !(omega_c > 0.0 && t_lead >= 0.0 && t_lag > 0.0) {
                    return domain("lead-lag PSC needs omega_c > 0, t_lead >= 0, t_lag > 0");
                }
            }
        }
        if let Some(k) = self.k_vq {
            if !(k >= 0.0) {
                return domain("HSC gain must be non-negative");
            }
        }
        Ok(())
    }

    pub(crate) fn n_states(&self) -> usize {
        match self.variant {
            PscVariant::PureDroop => 0,
            PscVariant::DroopLpf { .. } => 1,
            PscVariant::LeadLag { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiGains {
    pub k_p: f64,
    pub k_i: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterVoltageConfig {
    pub e_nom: f64,
    /// Reactive-power droop, p.u. voltage per p.u. reactive power.
    pub k_q: f64,
    /// PI on `v_ref − |v|`.
    pub avc: Option<PiGains>,
}

impl Default for OuterVoltageConfig {
    fn default() -> Self {
        Self {
            e_nom: 1.0,
            k_q: 0.02,
            avc: None,
        }
    }
}

impl OuterVoltageConfig {
    /// AVC gains used by the mismatched-VR experiments.
    pub fn with_default_avc(mut self) -> Self {
        self.avc = Some(PiGains {
            k_p: 0.5,
            k_i: 20.0,
        });
        self
    }

    pub(crate) fn has_avc_state(&self) -> bool {
        self.avc.map_or(false, |g| g.k_i > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VrConfig {
    pub r_a: f64,
    /// HPF cut-off in rad/s.
    pub omega_v: f64,
}

impl VrConfig {
    pub fn new(r_a: f64, omega_v: f64) -> Self {
        Self { r_a, omega_v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrfConfig {
    pub r_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdcConfig {
    pub r_g_hat: f64,
    pub x_g_hat: f64,
    pub include_filter_and_vr: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OpenLoopVvc {
    pub vr: Option<VrConfig>,
    pub prf: Option<PrfConfig>,
    pub pdc: Option<PdcConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VvcConfig {
    pub k_p: f64,
    pub k_i: f64,
    /// Adds `jω₁C_f·v` to the current reference.
    pub cap_decoupling: bool,
    /// Adds the output current to the current reference.
    pub ig_feedforward: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VccConfig {
    pub k_p: f64,
    pub k_i: f64,
    /// Adds `jω₁L_f·i_f` to the voltage command.
    pub decoupling: bool,
    pub v_feedforward: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllConfig {
    /// rad/s per p.u. voltage.
    pub k_p: f64,
    /// rad/s² per p.u. voltage.
    pub k_i: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AddOn {
    None,
    /// Current-feedback virtual impedance; the `s·L_v` branch is low-passed at `omega_lpf`.
    Vi {
        r_v: f64,
        l_v: f64,
        omega_lpf: f64,
    },
    /// Voltage-feedback virtual admittance replacing the voltage PI.
    Va { r_v: f64, l_v: f64 },
    /// Hybrid inner loops: d-to-q integral path sharing the q-axis integrator.
    Hybrid { k_i_dq: f64, prf: bool },
    /// Hybrid loops plus `i_d,ref −= b_a·v_q`.
    ActiveSusceptance { b_a: f64, k_i_dq: f64, prf: bool },
    /// Virtual admittance with PLL synchronization and power-reference current injection.
    GfmVcc { r_v: f64, l_v: f64, pll: PllConfig },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopVvc {
    pub vvc: VvcConfig,
    pub vcc: VccConfig,
    pub add_on: AddOn,
}

/// VCC bandwidth used for default gains (rad/s).
pub const DEFAULT_VCC_BANDWIDTH: f64 = 2.0 * PI * 1000.0;
/// Default VVC proportional gain (p.u. current per p.u. voltage).
pub const DEFAULT_VVC_PROPORTIONAL: f64 = 4.0;
/// Default VVC integral gain (p.u. current per p.u. voltage per second).
pub const DEFAULT_VVC_INTEGRAL: f64 = 800.0;
/// Droop gain for the closed-loop structure, as a fraction of ω₁ per p.u. power.
///
/// Stiff grids tolerate only a slow PSC once the voltage loop is closed.
pub const CLOSED_LOOP_DROOP: f64 = 0.002;

impl ClosedLoopVvc {
    /// Classic cascaded PI loops; the current loop is tuned from the filter.
    ///
    /// The voltage feedforward is left off: with it the LC resonance is
    /// undamped once the voltage PI is replaced by an admittance.
    pub fn classic(system: &SystemParams) -> Self {
        let w1 = system.omega_1();
        let conv = &system.conv;
        Self {
            vvc: VvcConfig {
                k_p: DEFAULT_VVC_PROPORTIONAL,
                k_i: DEFAULT_VVC_INTEGRAL,
                cap_decoupling: true,
                ig_feedforward: false,
            },
            vcc: VccConfig {
                k_p: DEFAULT_VCC_BANDWIDTH * conv.l_f / w1,
                k_i: DEFAULT_VCC_BANDWIDTH * conv.r_f,
                decoupling: true,
                v_feedforward: false,
            },
            add_on: AddOn::None,
        }
    }

    pub fn with_add_on(mut self, add_on: AddOn) -> Self {
        self.add_on = add_on;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerConfig {
    OpenLoop(OpenLoopVvc),
    ClosedLoop(ClosedLoopVvc),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlScheme {
    pub psc: PscConfig,
    pub outer: OuterVoltageConfig,
    pub inner: InnerConfig,
    /// Cut-off of the first-order P/Q measurement filters (rad/s).
    pub power_filter: f64,
}

/// Measurement filter cut-off used unless a scheme overrides it.
pub const DEFAULT_POWER_FILTER: f64 = 2.0 * PI * 500.0;

impl ControlScheme {
    pub fn open_loop(psc: PscConfig, vvc: OpenLoopVvc) -> Self {
        Self {
            psc,
            outer: OuterVoltageConfig::default(),
            inner: InnerConfig::OpenLoop(vvc),
            power_filter: DEFAULT_POWER_FILTER,
        }
    }

    pub fn closed_loop(psc: PscConfig, inner: ClosedLoopVvc) -> Self {
        Self {
            psc,
            outer: OuterVoltageConfig::default(),
            inner: InnerConfig::ClosedLoop(inner),
            power_filter: DEFAULT_POWER_FILTER,
        }
    }

    pub fn with_outer(mut self, outer: OuterVoltageConfig) -> Self {
        self.outer = outer;
        self
    }

    /// True when the frame angle comes from a PLL rather than the PSC.
    pub fn uses_pll(&self) -> bool {
        matches!(
            self.inner,
            InnerConfig::ClosedLoop(ClosedLoopVvc {
                add_on: AddOn::GfmVcc { .. },
                ..
            })
        )
    }

    pub fn pdc(&self) -> Option<&PdcConfig> {
        match &self.inner {
            InnerConfig::OpenLoop(o) => o.pdc.as_ref(),
            InnerConfig::ClosedLoop(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.psc.validate()?;
        if !(self.power_filter > 0.0) {
            return domain("power filter cut-off must be positive");
        }
        if !(self.outer.k_q >= 0.0 && self.outer.e_nom > 0.0) {
            return domain("outer loop needs k_q >= 0 and e_nom > 0");
        }
        if let Some(g) = self.outer.avc {
            if !(g.k_p >= 0.0 && g.k_i >= 0.0) {
                return domain("AVC gains must be non-negative");
            }
        }
        match &self.inner {
            InnerConfig::OpenLoop(o) => {
                if let Some(vr) = o.vr {
                    if !(vr.r_a >= 0.0 && vr.omega_v >= 0.0) {
                        return domain("VR needs r_a >= 0 and omega_v >= 0");
                    }
                }
                if let Some(prf) = o.prf {
                    if !(prf.r_a > 0.0) {
                        return domain("PRF gain must be positive");
                    }
                }
                if let Some(p) = o.pdc {
                    if !(p.r_g_hat >= 0.0 && p.x_g_hat >= 0.0) {
                        return domain("PDC grid estimates must be non-negative");
                    }
                }
            }
            InnerConfig::ClosedLoop(c) => {
                let ok = c.vvc.k_p >= 0.0 && c.vvc.k_i >= 0.0 && c.vcc.k_p > 0.0 && c.vcc.k_i >= 0.0;
                if !ok {
                    return domain("inner loop gains must be non-negative (VCC k_p > 0)");
                }
                match c.add_on {
                    AddOn::None => {}
                    AddOn::Vi { r_v, l_v, omega_lpf } => {
                        if !(r_v >= 0.0 && l_v >= 0.0 && omega_lpf > 0.0) {
                            return domain("VI needs r_v, l_v >= 0 and omega_lpf > 0");
                        }
                    }
                    AddOn::Va { r_v, l_v } | AddOn::GfmVcc { r_v, l_v, .. } => {
                        if !(r_v >= 0.0 && l_v > 0.0) {
                            return domain("VA needs r_v >= 0 and l_v > 0");
                        }
                    }
                    AddOn::Hybrid { k_i_dq, .. } => {
                        if !(k_i_dq >= 0.0) {
                            return domain("d-to-q gain must be non-negative");
                        }
                    }
                    AddOn::ActiveSusceptance { b_a, k_i_dq, .. } => {
                        if !(b_a >= 0.0 && k_i_dq >= 0.0) {
                            return domain("AS gains must be non-negative");
                        }
                    }
                }
                if let AddOn::GfmVcc { pll, .. } = c.add_on {
                    if !(pll.k_p > 0.0 && pll.k_i > 0.0) {
                        return domain("PLL gains must be positive");
                    }
                }
            }
        }
        Ok(())
    }
}

/// Setpoints that events may change during a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct References {
    pub p_ref: f64,
    pub q_ref: f64,
    /// POC voltage magnitude reference for AVC.
    pub v_ref: f64,
}

impl Default for References {
    fn default() -> Self {
        Self {
            p_ref: 0.0,
            q_ref: 0.0,
            v_ref: 1.0,
        }
    }
}

impl References {
    pub fn with_p(p_ref: f64) -> Self {
        Self {
            p_ref,
            ..Self::default()
        }
    }
}

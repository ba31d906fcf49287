//! Converter–grid circuit: per-unit parameters, averaged dq-frame dynamics of
//! the LC filter and Thévenin grid, instantaneous power and frame transforms.
//!
//! Everything is in per-unit with time in seconds. Inductances and
//! capacitances are stored as reactance/susceptance at the nominal frequency
//! and converted to seconds (`x / ω₁`, `b / ω₁`) inside the derivatives.
//! Complex quantities use `re = d`, `im = q`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{domain, Result};

/// Complex dq vector, `d + jq`.
pub type ComplexDq = Complex64;

pub const TWO_PI_50: f64 = 2.0 * PI * 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerUnitBase {
    /// Line-to-line RMS voltage (V).
    pub v_base: f64,
    /// Three-phase power (W).
    pub s_base: f64,
    /// Angular frequency (rad/s).
    pub omega_base: f64,
    /// Impedance (Ω), `v_base² / s_base`.
    pub z_base: f64,
}

impl PerUnitBase {
    pub fn new(v_base: f64, s_base: f64, omega_base: f64) -> Result<Self> {
        if !(v_base > 0.0 && s_base > 0.0 && omega_base > 0.0) {
            return domain("per-unit base quantities must be strictly positive");
        }
        Ok(Self {
            v_base,
            s_base,
            omega_base,
            z_base: v_base * v_base / s_base,
        })
    }

    /// Ohms to per-unit resistance.
    pub fn ohm_to_pu(&self, ohm: f64) -> f64 {
        ohm / self.z_base
    }

    /// Henry to per-unit reactance at `omega_base`.
    pub fn henry_to_pu(&self, henry: f64) -> f64 {
        self.omega_base * henry / self.z_base
    }

    /// Farad to per-unit susceptance at `omega_base`.
    pub fn farad_to_pu(&self, farad: f64) -> f64 {
        self.omega_base * farad * self.z_base
    }
}

impl Default for PerUnitBase {
    fn default() -> Self {
        Self::new(190.5, 3000.0, TWO_PI_50).expect("default base is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub r_g: f64,
    /// Grid reactance at `omega_1`.
    pub x_g: f64,
    /// Infinite-bus magnitude.
    pub v_g: f64,
    pub omega_1: f64,
}

impl GridParams {
    pub fn new(r_g: f64, x_g: f64, v_g: f64, omega_1: f64) -> Result<Self> {
        let g = Self {
            r_g,
            x_g,
            v_g,
            omega_1,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_g >= 0.0 && self.x_g > 0.0 && self.v_g > 0.0 && self.omega_1 > 0.0) {
            return domain(format!(
                "grid requires r_g >= 0, x_g > 0, v_g > 0 (got r_g={}, x_g={}, v_g={})",
                self.r_g, self.x_g, self.v_g
            ));
        }
        Ok(())
    }

    pub fn scr(&self) -> f64 {
        1.0 / self.r_g.hypot(self.x_g)
    }

    /// `x_g / r_g`, infinite for a lossless grid.
    pub fn x_over_r(&self) -> f64 {
        if self.r_g == 0.0 {
            f64::INFINITY
        } else {
            self.x_g / self.r_g
        }
    }

    pub fn impedance(&self) -> Complex64 {
        Complex64::new(self.r_g, self.x_g)
    }
}

/// Thévenin grid with `|Z_g| = 1/scr` and the given X/R ratio.
pub fn make_grid_from_scr(scr: f64, x_over_r: f64, v_g: f64, omega_1: f64) -> Result<GridParams> {
    if !(scr > 0.0) || scr.is_infinite() {
        return domain(format!("scr must be positive and finite, got {scr}"));
    }
    if !(x_over_r > 0.0) {
        return domain(format!("x_over_r must be positive, got {x_over_r}"));
    }
    let z = 1.0 / scr;
    let (r_g, x_g) = if x_over_r.is_infinite() {
        (0.0, z)
    } else {
        let angle = x_over_r.atan();
        (z * angle.cos(), z * angle.sin())
    };
    GridParams::new(r_g, x_g, v_g, omega_1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterParams {
    /// Filter reactance at the nominal frequency.
    pub l_f: f64,
    /// Filter susceptance at the nominal frequency; zero removes the capacitor.
    pub c_f: f64,
    /// Filter series resistance.
    pub r_f: f64,
    /// Power scaling used at conversion boundaries (1 or 1.5).
    pub kappa: f64,
}

impl ConverterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_f > 0.0 && self.c_f >= 0.0 && self.r_f >= 0.0) {
            return domain("converter requires l_f > 0, c_f >= 0, r_f >= 0");
        }
        if self.kappa != 1.0 && self.kappa != 1.5 {
            return domain(format!("kappa must be 1.0 or 1.5, got {}", self.kappa));
        }
        Ok(())
    }

    /// Experimental rig filter: 3 mH, 10 µF, ESR 0.005 p.u.
    pub fn table_iv(base: &PerUnitBase) -> Self {
        Self {
            l_f: base.henry_to_pu(3e-3),
            c_f: base.farad_to_pu(10e-6),
            r_f: 0.005,
            kappa: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub base: PerUnitBase,
    pub grid: GridParams,
    pub conv: ConverterParams,
}

impl SystemParams {
    pub fn omega_1(&self) -> f64 {
        self.grid.omega_1
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.conv.validate()
    }

    /// Table IV rig on a grid of the given strength.
    pub fn table_iv(scr: f64, x_over_r: f64) -> Result<Self> {
        let base = PerUnitBase::default();
        Ok(Self {
            base,
            grid: make_grid_from_scr(scr, x_over_r, 1.0, base.omega_base)?,
            conv: ConverterParams::table_iv(&base),
        })
    }

    pub fn with_grid(mut self, grid: GridParams) -> Self {
        self.grid = grid;
        self
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::table_iv(5.0, 10.0).expect("default system is valid")
    }
}

/// Electrical states in the grid-synchronous frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CircuitState {
    pub i_f: ComplexDq,
    pub v: ComplexDq,
    pub i_g: ComplexDq,
}

/// Time derivatives of the LC filter and grid inductor in the frame rotating
/// at `omega_1`, with `e` the converter voltage and the infinite bus real.
///
/// With `c_f == 0` the capacitor is absent; use [`series_derivative`].
pub fn circuit_derivatives(
    state: &CircuitState,
    e: ComplexDq,
    grid: &GridParams,
    conv: &ConverterParams,
) -> CircuitState {
    let w = grid.omega_1;
    let j = Complex64::i();
    let vg = Complex64::new(grid.v_g, 0.0);
    CircuitState {
        i_f: (e - state.v - (conv.r_f + j * conv.l_f) * state.i_f) * (w / conv.l_f),
        v: (state.i_f - state.i_g - j * conv.c_f * state.v) * (w / conv.c_f),
        i_g: (state.v - vg - (grid.r_g + j * grid.x_g) * state.i_g) * (w / grid.x_g),
    }
}

/// Single-inductor circuit used when the filter capacitor is removed.
/// Returns `(di/dt, v)` where `v` is the POC voltage.
pub fn series_derivative(
    i: ComplexDq,
    e: ComplexDq,
    grid: &GridParams,
    conv: &ConverterParams,
) -> (ComplexDq, ComplexDq) {
    let w = grid.omega_1;
    let j = Complex64::i();
    let vg = Complex64::new(grid.v_g, 0.0);
    let r = conv.r_f + grid.r_g;
    let x = conv.l_f + grid.x_g;
    let di = (e - vg - (r + j * x) * i) * (w / x);
    let v = vg + (grid.r_g + j * grid.x_g) * i + di * (grid.x_g / w);
    (di, v)
}

/// `P = κ(v_d i_d + v_q i_q)`, `Q = κ(v_q i_d − v_d i_q)`.
pub fn instantaneous_power(v: ComplexDq, i: ComplexDq, kappa: f64) -> (f64, f64) {
    (
        kappa * (v.re * i.re + v.im * i.im),
        kappa * (v.im * i.re - v.re * i.im),
    )
}

/// Energy stored in the filter and grid inductors and the capacitor.
pub fn stored_energy(state: &CircuitState, grid: &GridParams, conv: &ConverterParams) -> f64 {
    let w = grid.omega_1;
    0.5 * (conv.l_f / w * state.i_f.norm_sqr()
        + conv.c_f / w * state.v.norm_sqr()
        + grid.x_g / w * state.i_g.norm_sqr())
}

/// Phase values of a dq vector at frame angle `theta`.
pub fn dq_to_abc(x: ComplexDq, theta: f64) -> [f64; 3] {
    let shift = 2.0 * PI / 3.0;
    let phase = |a: f64| x.re * a.cos() - x.im * a.sin();
    [phase(theta), phase(theta - shift), phase(theta + shift)]
}

/// Inverse of [`dq_to_abc`] for balanced (zero-sequence-free) phase values.
pub fn abc_to_dq(abc: [f64; 3], theta: f64) -> ComplexDq {
    let shift = 2.0 * PI / 3.0;
    let angles = [theta, theta - shift, theta + shift];
    let mut d = 0.0;
    let mut q = 0.0;
    for (x, a) in abc.iter().zip(angles) {
        d += x * a.cos();
        q -= x * a.sin();
    }
    Complex64::new(d, q) * (2.0 / 3.0)
}

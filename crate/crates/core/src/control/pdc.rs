//! Power decoupling compensators built from an estimated RL grid model.
//!
//! The estimated plant maps the converter angle and magnitude `(θ, E)` to the
//! POC powers `(P, Q)`. Its four transfer functions share the denominator
//! `det(sI − A)`, so the compensators are plain numerator quotients:
//! `C_Vθ = −N_VP/N_θP` feeds `ΔE_c` into the angle and `C_θV = −N_θQ/N_VQ`
//! feeds `Δθ_c` into the magnitude.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{PdcConfig, VrConfig};
use crate::error::{Error, Result};
use crate::plant::{instantaneous_power, SystemParams};
use crate::poly;

/// Proper rational transfer function, coefficients lowest power first.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTf {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

/// Controllable-canonical realization `ẋ = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl Realization {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }
}

impl RationalTf {
    pub fn zero() -> Self {
        Self {
            num: vec![0.0],
            den: vec![1.0],
        }
    }

    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        let den = poly::trim(&den, 1e-14);
        if den.iter().all(|c| *c == 0.0) {
            return Err(Error::NumericFailure("zero denominator".into()));
        }
        let num = poly::trim(&num, 1e-14);
        let lead = *den.last().unwrap();
        Ok(Self {
            num: poly::scale(&num, 1.0 / lead),
            den: poly::scale(&den, 1.0 / lead),
        })
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        poly::eval(&self.num, s) / poly::eval(&self.den, s)
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(|c| *c == 0.0)
    }

    pub fn is_proper(&self) -> bool {
        self.is_zero() || poly::degree(&self.num) <= poly::degree(&self.den)
    }

    /// Removes pole/zero pairs that coincide to a relative tolerance.
    pub fn cancel_common_roots(&self, rel_tol: f64) -> Result<Self> {
        if self.is_zero() {
            return Ok(Self::zero());
        }
        let gain = *self.num.last().unwrap();
        let mut zeros = poly::roots(&self.num)?;
        let mut poles = poly::roots(&self.den)?;
        let mut kept_zeros = Vec::new();
        while let Some(z) = zeros.pop() {
            let hit = poles
                .iter()
                .position(|p| (p - z).norm() <= rel_tol * z.norm().max(p.norm()).max(1.0));
            match hit {
                Some(k) => {
                    poles.swap_remove(k);
                }
                None => kept_zeros.push(z),
            }
        }
        Self::new(
            poly::scale(&poly::from_roots(&kept_zeros), gain),
            poly::from_roots(&poles),
        )
    }

    /// Appends first-order roll-offs at `omega_roll` until the function is proper.
    pub fn rolled_off(&self, omega_roll: f64) -> Result<Self> {
        let mut den = self.den.clone();
        while poly::degree(&self.num) > poly::degree(&den) {
            den = poly::mul(&den, &[1.0, 1.0 / omega_roll]);
        }
        Self::new(self.num.clone(), den)
    }

    /// State-space realization. Coefficients are normalized by `omega_scale`
    /// before building the companion form to keep it well conditioned.
    pub fn realize(&self, omega_scale: f64) -> Result<Realization> {
        if !self.is_proper() {
            return Err(Error::NonProper(format!(
                "numerator degree {} above denominator degree {}",
                poly::degree(&self.num),
                poly::degree(&self.den)
            )));
        }
        let n = poly::degree(&self.den);
        // H(s) with s = ω·σ
        let norm = |p: &[f64]| -> Vec<f64> {
            p.iter()
                .enumerate()
                .map(|(k, c)| c * omega_scale.powi(k as i32))
                .collect()
        };
        let mut num = norm(&self.num);
        let den = norm(&self.den);
        let lead = den[n];
        let a_coef: Vec<f64> = den.iter().map(|c| c / lead).collect();
        num.iter_mut().for_each(|c| *c /= lead);
        num.resize(n + 1, 0.0);
        let d = num[n];
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        let mut c = DVector::zeros(n);
        for k in 0..n {
            if k + 1 < n {
                a[(k, k + 1)] = omega_scale;
            }
            a[(n - 1, k)] = -a_coef[k] * omega_scale;
            c[k] = num[k] - d * a_coef[k];
        }
        if n > 0 {
            b[n - 1] = omega_scale;
        }
        Ok(Realization { a, b, c, d })
    }
}

/// Compensators and the diagonal channels they leave behind.
#[derive(Debug, Clone, PartialEq)]
pub struct PdcDesign {
    /// `ΔE_c → Δθ` injection.
    pub c_v_theta: RationalTf,
    /// `Δθ_c → ΔE` injection.
    pub c_theta_v: RationalTf,
    /// Decoupled angle-to-active-power channel.
    pub f_theta_p: RationalTf,
    /// Decoupled magnitude-to-reactive-power channel.
    pub f_v_q: RationalTf,
    /// Set when a quotient needed a roll-off to become proper.
    pub rolled_off: bool,
}

/// Design the decoupling pair around the converter voltage `e0` (grid frame).
///
/// `vr` is the virtual resistance active in the converter; it enters the
/// estimate only when the filter refinement is enabled.
pub fn pdc_controllers(
    cfg: &PdcConfig,
    vr: Option<&VrConfig>,
    system: &SystemParams,
    e0: Complex64,
) -> Result<PdcDesign> {
    let est = Estimate::new(cfg, vr, system, e0)?;
    let (a, b, c, d) = est.linearize();
    let den = poly::charpoly(&a);
    let num = |out: usize, inp: usize| -> Vec<f64> {
        let bc = b.column(inp) * c.row(out);
        let shifted = poly::charpoly(&(&a - bc));
        poly::add(
            &poly::add(&shifted, &poly::scale(&den, -1.0)),
            &poly::scale(&den, d[(out, inp)]),
        )
    };
    // outputs (P, Q), inputs (θ, E)
    let n_tp = num(0, 0);
    let n_vp = num(0, 1);
    let n_tq = num(1, 0);
    let n_vq = num(1, 1);

    let omega_roll = 10.0 * system.omega_1();
    let mut rolled_off = false;
    let mut quotient = |n: &[f64], m: &[f64]| -> Result<RationalTf> {
        if is_negligible(n, m) {
            return Ok(RationalTf::zero());
        }
        let tf = RationalTf::new(poly::scale(n, -1.0), m.to_vec())?.cancel_common_roots(1e-6)?;
        if tf.is_proper() {
            Ok(tf)
        } else {
            rolled_off = true;
            tf.rolled_off(omega_roll)
        }
    };
    let c_v_theta = quotient(&n_vp, &n_tp)?;
    let c_theta_v = quotient(&n_tq, &n_vq)?;

    let cross = poly::mul(&n_vp, &n_tq);
    let det = poly::add(&poly::mul(&n_tp, &n_vq), &poly::scale(&cross, -1.0));
    let f_theta_p = RationalTf::new(det.clone(), poly::mul(&den, &n_vq))?.cancel_common_roots(1e-6)?;
    let f_v_q = RationalTf::new(det, poly::mul(&den, &n_tp))?.cancel_common_roots(1e-6)?;
    Ok(PdcDesign {
        c_v_theta,
        c_theta_v,
        f_theta_p,
        f_v_q,
        rolled_off,
    })
}

fn is_negligible(n: &[f64], reference: &[f64]) -> bool {
    let mag = |p: &[f64]| p.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    mag(n) <= 1e-12 * mag(reference).max(f64::MIN_POSITIVE)
}

/// Estimated RL path seen by the converter. States: grid-frame current and,
/// with the refinement, the two VR high-pass states (converter frame).
struct Estimate {
    r: f64,
    x: f64,
    r_g: f64,
    x_g: f64,
    v_g: f64,
    w1: f64,
    vr: Option<VrConfig>,
    theta0: f64,
    e_mag0: f64,
}

impl Estimate {
    fn new(cfg: &PdcConfig, vr: Option<&VrConfig>, system: &SystemParams, e0: Complex64) -> Result<Self> {
        let (mut r, mut x) = (cfg.r_g_hat, cfg.x_g_hat);
        let mut vr_used = None;
        if cfg.include_filter_and_vr {
            r += system.conv.r_f;
            x += system.conv.l_f;
            vr_used = vr.copied().filter(|v| v.r_a > 0.0);
        }
        if !(x > 0.0) {
            return Err(Error::Domain("PDC estimate needs a positive series reactance".into()));
        }
        Ok(Self {
            r,
            x,
            r_g: cfg.r_g_hat,
            x_g: cfg.x_g_hat,
            v_g: system.grid.v_g,
            w1: system.omega_1(),
            vr: vr_used,
            theta0: e0.arg(),
            e_mag0: e0.norm(),
        })
    }

    fn n_states(&self) -> usize {
        if self.vr.is_some() {
            4
        } else {
            2
        }
    }

    fn equilibrium(&self) -> Vec<f64> {
        let j = Complex64::i();
        let e = Complex64::from_polar(self.e_mag0, self.theta0);
        let i = (e - self.v_g) / (self.r + j * self.x);
        let mut x = vec![i.re, i.im];
        if self.vr.is_some() {
            let ic = i * Complex64::from_polar(1.0, -self.theta0);
            x.extend([ic.re, ic.im]);
        }
        x
    }

    /// Returns `(dx, [P, Q])`.
    fn eval(&self, x: &[f64], theta: f64, e_mag: f64) -> (Vec<f64>, [f64; 2]) {
        let j = Complex64::i();
        let rot = Complex64::from_polar(1.0, theta);
        let i = Complex64::new(x[0], x[1]);
        let mut e_c = Complex64::new(e_mag, 0.0);
        let mut dx = vec![0.0; self.n_states()];
        if let Some(vr) = self.vr {
            let ic = i / rot;
            let hp = ic - Complex64::new(x[2], x[3]);
            e_c -= hp * vr.r_a;
            dx[2] = vr.omega_v * hp.re;
            dx[3] = vr.omega_v * hp.im;
        }
        let e = e_c * rot;
        let di = (e - self.v_g - (self.r + j * self.x) * i) * (self.w1 / self.x);
        dx[0] = di.re;
        dx[1] = di.im;
        let v = self.v_g + (self.r_g + j * self.x_g) * i + di * (self.x_g / self.w1);
        let (p, q) = instantaneous_power(v, i, 1.0);
        (dx, [p, q])
    }

    fn linearize(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let n = self.n_states();
        let x0 = self.equilibrium();
        let u0 = [self.theta0, self.e_mag0];
        let f = |x: &[f64], u: [f64; 2]| self.eval(x, u[0], u[1]);
        let mut a = DMatrix::zeros(n, n);
        let mut c = DMatrix::zeros(2, n);
        for k in 0..n {
            let h = 1e-6 * x0[k].abs().max(1e-3);
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[k] += h;
            xm[k] -= h;
            let (fp, yp) = f(&xp, u0);
            let (fm, ym) = f(&xm, u0);
            for r in 0..n {
                a[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
            }
            for r in 0..2 {
                c[(r, k)] = (yp[r] - ym[r]) / (2.0 * h);
            }
        }
        let mut b = DMatrix::zeros(n, 2);
        let mut d = DMatrix::zeros(2, 2);
        for k in 0..2 {
            let h = 1e-6;
            let mut up = u0;
            let mut um = u0;
            up[k] += h;
            um[k] -= h;
            let (fp, yp) = f(&x0, up);
            let (fm, ym) = f(&x0, um);
            for r in 0..n {
                b[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
            }
            for r in 0..2 {
                d[(r, k)] = (yp[r] - ym[r]) / (2.0 * h);
            }
        }
        (a, b, c, d)
    }
}

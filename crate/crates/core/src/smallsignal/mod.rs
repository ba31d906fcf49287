//! Numerical linearization around an operating point, modal analysis and
//! frequency responses, plus the closed-form estimates in [`analytic`].

pub mod analytic;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{LoopMode, Perturbation};
use crate::operating_point::OperatingPoint;
use crate::poly;

/// Equilibrium residual above which linearization is refused.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-8;

/// `ẋ = A x + B u`, `y = C x + D u` around an operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub states: Vec<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub x0: Vec<f64>,
    pub mode: LoopMode,
}

impl LinearModel {
    /// Wraps bare matrices, e.g. for analytic cross-checks.
    pub fn from_matrices(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let (n, m, p) = (a.nrows(), b.ncols(), c.nrows());
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.shape() != (p, m) {
            return Err(Error::Domain("inconsistent state-space dimensions".into()));
        }
        Ok(Self {
            states: (0..n).map(|k| format!("x{k}")).collect(),
            inputs: (0..m).map(|k| format!("u{k}")).collect(),
            outputs: (0..p).map(|k| format!("y{k}")).collect(),
            x0: vec![0.0; n],
            a,
            b,
            c,
            d,
            mode: LoopMode::Closed,
        })
    }

    fn input_index(&self, label: &str) -> Result<usize> {
        self.inputs
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Config(format!("input `{label}` not in model")))
    }

    fn output_index(&self, label: &str) -> Result<usize> {
        self.outputs
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Config(format!("output `{label}` not in model")))
    }
}

fn perturbation_step(x: f64) -> f64 {
    (1e-6 * x.abs()).max(1e-9)
}

/// Central-difference linearization of the joint model in the given loop mode.
pub fn linearize(op: &OperatingPoint, mode: LoopMode, inputs: &[&str], outputs: &[&str]) -> Result<LinearModel> {
    let model = &op.model;
    let grid = model.system.grid;
    let e_hold = op.e_grid();
    let n = model.n_states();
    let x0 = op.x.clone();
    let mut f0 = vec![0.0; n];
    model.eval(&x0, &op.refs, &grid, &Perturbation::default(), mode, e_hold, &mut f0)?;
    let residual = f0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(residual < EQUILIBRIUM_TOLERANCE) {
        return Err(Error::NotAnEquilibrium { residual });
    }
    for w in inputs.windows(2).chain(outputs.windows(2)) {
        if w[0] == w[1] {
            return Err(Error::Config(format!("duplicate label `{}`", w[0])));
        }
    }

    let eval = |x: &[f64], pert: &Perturbation, dx: &mut [f64]| -> Result<Vec<f64>> {
        let sig = model.eval(x, &op.refs, &grid, pert, mode, e_hold, dx)?;
        outputs.iter().map(|l| sig.get(l)).collect()
    };

    let p = outputs.len();
    let m = inputs.len();
    let mut a = DMatrix::zeros(n, n);
    let mut c = DMatrix::zeros(p, n);
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    let zero = Perturbation::default();
    let mut x = x0.clone();
    for k in 0..n {
        let h = perturbation_step(x0[k]);
        x[k] = x0[k] + h;
        let yp = eval(&x, &zero, &mut fp)?;
        x[k] = x0[k] - h;
        let ym = eval(&x, &zero, &mut fm)?;
        x[k] = x0[k];
        for r in 0..n {
            a[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
        }
        for r in 0..p {
            c[(r, k)] = (yp[r] - ym[r]) / (2.0 * h);
        }
    }
    let mut b = DMatrix::zeros(n, m);
    let mut d = DMatrix::zeros(p, m);
    for (k, label) in inputs.iter().enumerate() {
        let h = 1e-6;
        let mut up = Perturbation::default();
        let mut um = Perturbation::default();
        up.set(label, h)?;
        um.set(label, -h)?;
        let yp = eval(&x0, &up, &mut fp)?;
        let ym = eval(&x0, &um, &mut fm)?;
        for r in 0..n {
            b[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
        }
        for r in 0..p {
            d[(r, k)] = (yp[r] - ym[r]) / (2.0 * h);
        }
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericFailure("non-finite state matrix".into()));
    }
    Ok(LinearModel {
        a,
        b,
        c,
        d,
        states: model.layout.labels.clone(),
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        x0,
        mode,
    })
}

/// One eigenvalue with its modal quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub eigenvalue: Complex64,
    pub freq_hz: f64,
    pub zeta: f64,
    /// Normalized participation factors, largest first.
    pub participants: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModeReport {
    pub modes: Vec<Mode>,
}

pub fn damping_ratio(lambda: Complex64) -> f64 {
    let mag = lambda.norm();
    if mag == 0.0 {
        0.0
    } else {
        -lambda.re / mag
    }
}

impl ModeReport {
    pub fn is_stable(&self) -> bool {
        self.modes.iter().all(|m| m.eigenvalue.re < 0.0)
    }

    /// Oscillatory modes up to `f_max` ordered by damping ratio.
    pub fn oscillatory_below(&self, f_max: f64) -> Vec<&Mode> {
        let mut v: Vec<&Mode> = self
            .modes
            .iter()
            .filter(|m| m.eigenvalue.im > 0.0 && m.freq_hz <= f_max)
            .collect();
        v.sort_by(|a, b| a.zeta.total_cmp(&b.zeta));
        v
    }

    /// Least damped oscillatory mode whose frequency lies in `[f_lo, f_hi]`.
    pub fn least_damped_in(&self, f_lo: f64, f_hi: f64) -> Option<&Mode> {
        self.modes
            .iter()
            .filter(|m| m.eigenvalue.im > 0.0 && m.freq_hz >= f_lo && m.freq_hz <= f_hi)
            .min_by(|a, b| a.zeta.total_cmp(&b.zeta))
    }

    /// `re,im,freq_hz,zeta,participants` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,freq_hz,zeta,participants\n");
        for m in &self.modes {
            let parts: Vec<String> = m
                .participants
                .iter()
                .map(|(l, p)| format!("{l}:{p:.3}"))
                .collect();
            let _ = writeln!(
                out,
                "{:.6e},{:.6e},{:.6},{:.6},{}",
                m.eigenvalue.re,
                m.eigenvalue.im,
                m.freq_hz,
                m.zeta,
                parts.join(" ")
            );
        }
        out
    }
}

/// Eigenvalues, damping ratios and participation factors of `A`.
pub fn eigenmodes(model: &LinearModel) -> Result<ModeReport> {
    let a = &model.a;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericFailure("non-finite state matrix".into()));
    }
    let raw = poly::eigenvalues(a.clone())?;
    // keep the upper half-plane and mirror it so pairs are exact conjugates
    let scale = raw.iter().fold(1.0f64, |m, l| m.max(l.norm()));
    let mut lambdas = Vec::with_capacity(raw.len());
    for l in &raw {
        if l.im.abs() <= 1e-10 * scale {
            lambdas.push(Complex64::new(l.re, 0.0));
        } else if l.im > 0.0 {
            lambdas.push(*l);
            lambdas.push(l.conj());
        }
    }
    if lambdas.len() != raw.len() {
        return Err(Error::NumericFailure("eigenvalues are not conjugate-paired".into()));
    }
    let ac = a.map(Complex64::from);
    let act = ac.transpose();
    let mut modes: Vec<Mode> = lambdas
        .into_iter()
        .map(|lambda| {
            let participants = participation(&ac, &act, lambda, scale)
                .map(|p| top_participants(&model.states, &p, 3))
                .unwrap_or_default();
            Mode {
                eigenvalue: lambda,
                freq_hz: lambda.im.abs() / (2.0 * std::f64::consts::PI),
                zeta: damping_ratio(lambda),
                participants,
            }
        })
        .collect();
    modes.sort_by(|x, y| {
        x.freq_hz
            .total_cmp(&y.freq_hz)
            .then(x.eigenvalue.re.total_cmp(&y.eigenvalue.re))
            .then(x.eigenvalue.im.total_cmp(&y.eigenvalue.im))
    });
    Ok(ModeReport { modes })
}

fn inverse_iteration(m: &DMatrix<Complex64>, lambda: Complex64, scale: f64) -> Option<DVector<Complex64>> {
    let n = m.nrows();
    let shift = lambda + Complex64::new(1e-9 * scale, 1e-9 * scale);
    let shifted = m - DMatrix::<Complex64>::identity(n, n) * shift;
    let lu = shifted.lu();
    let mut v = DVector::from_fn(n, |k, _| Complex64::new(1.0 + 0.1 * k as f64, 0.3));
    for _ in 0..4 {
        v = lu.solve(&v)?;
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return None;
        }
        v /= Complex64::from(norm);
    }
    Some(v)
}

fn participation(a: &DMatrix<Complex64>, at: &DMatrix<Complex64>, lambda: Complex64, scale: f64) -> Option<Vec<f64>> {
    let right = inverse_iteration(a, lambda, scale)?;
    let left = inverse_iteration(at, lambda, scale)?;
    let p: Vec<f64> = right.iter().zip(left.iter()).map(|(r, l)| (r * l).norm()).collect();
    let total: f64 = p.iter().sum();
    (total > 0.0).then(|| p.iter().map(|x| x / total).collect())
}

fn top_participants(labels: &[String], p: &[f64], k: usize) -> Vec<(String, f64)> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|a, b| p[*b].total_cmp(&p[*a]));
    idx.into_iter().take(k).map(|i| (labels[i].clone(), p[i])).collect()
}

/// `C(jωI − A)⁻¹B + D` for one input/output pair.
pub fn freq_response(model: &LinearModel, input: &str, output: &str, omegas: &[f64]) -> Result<Vec<Complex64>> {
    let i = model.input_index(input)?;
    let o = model.output_index(output)?;
    if omegas.iter().any(|w| !(*w > 0.0)) || omegas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("frequency grid must be positive and ascending".into()));
    }
    let n = model.a.nrows();
    let ac = model.a.map(Complex64::from);
    let b = model.b.column(i).map(Complex64::from);
    let c = model.c.row(o).map(Complex64::from);
    let d = model.d[(o, i)];
    Ok(omegas
        .iter()
        .map(|&w| {
            let m = DMatrix::<Complex64>::identity(n, n) * Complex64::new(0.0, w) - &ac;
            match m.lu().solve(&b) {
                Some(x) if x.iter().all(|v| v.is_finite()) => (c.clone() * x)[(0, 0)] + d,
                _ => Complex64::new(f64::INFINITY, 0.0),
            }
        })
        .collect())
}

/// Logarithmically spaced grid in rad/s between two frequencies in Hz.
pub fn log_grid_hz(f_min: f64, f_max: f64, points: usize) -> Vec<f64> {
    let (a, b) = (f_min.ln(), f_max.ln());
    (0..points)
        .map(|k| {
            let t = if points > 1 { k as f64 / (points - 1) as f64 } else { 0.0 };
            2.0 * std::f64::consts::PI * (a + t * (b - a)).exp()
        })
        .collect()
}

/// `omega_rad_s,mag_db,phase_deg` rows.
pub fn bode_csv(omegas: &[f64], response: &[Complex64]) -> String {
    let mut out = String::from("omega_rad_s,mag_db,phase_deg\n");
    for (w, h) in omegas.iter().zip(response) {
        let _ = writeln!(out, "{:.6},{:.6},{:.6}", w, 20.0 * h.norm().log10(), h.arg().to_degrees());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn companion_mode_is_recovered() {
        let (wn, z) = (62.1, 0.253);
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -wn * wn, -2.0 * z * wn]);
        let m = LinearModel::from_matrices(a, DMatrix::zeros(2, 1), DMatrix::zeros(1, 2), DMatrix::zeros(1, 1)).unwrap();
        let r = eigenmodes(&m).unwrap();
        let fd = wn * (1.0 - z * z).sqrt() / (2.0 * std::f64::consts::PI);
        for mode in &r.modes {
            assert!((mode.freq_hz - fd).abs() < 1e-9);
            assert!((mode.zeta - z).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_matrix_gives_real_modes() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -5.0, -30.0]));
        let m = LinearModel::from_matrices(a, DMatrix::zeros(3, 1), DMatrix::zeros(1, 3), DMatrix::zeros(1, 1)).unwrap();
        let r = eigenmodes(&m).unwrap();
        assert!(r.modes.iter().all(|m| m.zeta == 1.0 && m.freq_hz == 0.0));
        // participation of a diagonal system is the identity
        assert!(r.modes.iter().all(|m| (m.participants[0].1 - 1.0).abs() < 1e-9));
    }

    #[test]
    fn integrator_response_is_inverse_frequency() {
        let m = LinearModel::from_matrices(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let w = [0.5, 2.0, 40.0];
        let h = freq_response(&m, "u0", "y0", &w).unwrap();
        for (wk, hk) in w.iter().zip(&h) {
            assert!((hk.norm() - 1.0 / wk).abs() < 1e-12);
        }
    }

    #[test]
    fn undamped_pole_on_grid_reports_infinity() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -4.0, 0.0]);
        let m = LinearModel::from_matrices(
            a,
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let h = freq_response(&m, "u0", "y0", &[2.0]).unwrap();
        assert!(h[0].norm().is_infinite() || h[0].norm() > 1e12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn spectrum_is_conjugate_symmetric(vals in proptest::collection::vec(-10.0f64..10.0, 16)) {
                let a = DMatrix::from_row_slice(4, 4, &vals);
                let m = LinearModel::from_matrices(a, DMatrix::zeros(4, 1), DMatrix::zeros(1, 4), DMatrix::zeros(1, 1)).unwrap();
                let r = eigenmodes(&m).unwrap();
                for mode in &r.modes {
                    let l = mode.eigenvalue;
                    prop_assert!(r.modes.iter().any(|o| o.eigenvalue == l.conj()));
                    prop_assert!(mode.zeta >= -1.0 && mode.zeta <= 1.0);
                }
            }
        }
    }
}

//! Equilibrium of the joint model by damped Newton iteration.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::control::{pdc_controllers, ControlScheme, InnerConfig, References};
use crate::error::{Error, Result};
use crate::model::{Model, Signals};
use crate::plant::{ComplexDq, GridParams, SystemParams};

pub const MAX_NEWTON_ITERATIONS: usize = 50;
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
const RANDOM_RESTARTS: u64 = 3;

/// A solved steady state together with the model it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    /// Converter frame angle relative to the grid (rad).
    pub theta0: f64,
    /// Internal voltage magnitude reference `E`.
    pub e0: f64,
    /// POC voltage and currents in the converter frame.
    pub v0: ComplexDq,
    pub i0_f: ComplexDq,
    pub i0_g: ComplexDq,
    pub p0: f64,
    pub q0: f64,
    pub refs: References,
    /// Joint state vector.
    pub x: Vec<f64>,
    pub residual: f64,
    pub model: Model,
}

impl OperatingPoint {
    pub fn signals(&self) -> Signals {
        let mut dx = vec![0.0; self.x.len()];
        self.model
            .derivatives(&self.x, &self.refs, &self.model.system.grid, &mut dx)
            .expect("operating point evaluates")
    }

    /// Converter voltage in the grid frame.
    pub fn e_grid(&self) -> ComplexDq {
        self.signals().e_grid
    }
}

/// Solves the steady state of `scheme` on `system` at the given references.
///
/// When the scheme carries power decoupling, the point is first solved
/// without it; the compensators are designed and anchored there, which leaves
/// the equilibrium unchanged.
pub fn solve_operating_point(system: &SystemParams, scheme: &ControlScheme, refs: &References) -> Result<OperatingPoint> {
    let model = Model::new(*system, *scheme)?;
    let x = solve_state(&model, refs, &system.grid, None)?;
    let model = match (scheme.pdc(), &scheme.inner) {
        (Some(cfg), InnerConfig::OpenLoop(o)) => {
            let mut dx = vec![0.0; x.len()];
            let sig = model.derivatives(&x, refs, &system.grid, &mut dx)?;
            let design = pdc_controllers(cfg, o.vr.as_ref(), system, sig.e_grid)?;
            let theta_c0 = x[model.layout.theta];
            model.with_pdc(design, theta_c0, sig.e)?
        }
        _ => model,
    };
    let mut x = x;
    x.resize(model.n_states(), 0.0);
    finish(model, x, *refs)
}

/// Re-solves the steady state of an existing model (e.g. after a grid change).
pub fn resolve(model: &Model, refs: &References, grid: &GridParams, guess: &[f64]) -> Result<Vec<f64>> {
    solve_state(model, refs, grid, Some(guess))
}

fn finish(model: Model, x: Vec<f64>, refs: References) -> Result<OperatingPoint> {
    let mut dx = vec![0.0; x.len()];
    let sig = model.derivatives(&x, &refs, &model.system.grid, &mut dx)?;
    let residual = norm(&dx);
    if !(residual < RESIDUAL_TOLERANCE) {
        return Err(Error::NoEquilibrium(format!("residual {residual:.3e} after attaching decoupling")));
    }
    Ok(OperatingPoint {
        theta0: sig.theta,
        e0: sig.e,
        v0: sig.v,
        i0_f: sig.i_f,
        i0_g: sig.i_g,
        p0: sig.p,
        q0: sig.q,
        refs,
        x,
        residual,
        model,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(model: &Model, x: &[f64], refs: &References, grid: &GridParams, dx: &mut [f64]) -> f64 {
    match model.derivatives(x, refs, grid, dx) {
        Ok(_) if dx.iter().all(|d| d.is_finite()) => norm(dx),
        _ => f64::INFINITY,
    }
}

fn solve_state(model: &Model, refs: &References, grid: &GridParams, guess: Option<&[f64]>) -> Result<Vec<f64>> {
    let mut last = String::new();
    let mut attempt = |x0: Vec<f64>, r: &References| match newton(model, x0, r, grid) {
        Ok(x) => Some(x),
        Err(e) => {
            last = e;
            None
        }
    };
    if let Some(g) = guess {
        if let Some(x) = attempt(g.to_vec(), refs) {
            return Ok(x);
        }
    }
    let flat = flat_start(model, grid);
    if let Some(x) = attempt(flat.clone(), refs) {
        return Ok(x);
    }
    // continuation in the power reference
    let steps = 10;
    let mut x = flat.clone();
    let mut ok = true;
    for k in 1..=steps {
        let mut r = *refs;
        r.p_ref = refs.p_ref * k as f64 / steps as f64;
        match attempt(x.clone(), &r) {
            Some(next) => x = next,
            None => {
                ok = false;
                break;
            }
        }
    }
    if ok {
        return Ok(x);
    }
    for seed in 0..RANDOM_RESTARTS {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut x0 = flat.clone();
        x0[model.layout.theta] = rng.gen_range(-1.0..1.0);
        for k in model.layout.i_f..model.layout.i_f + 2 {
            x0[k] = rng.gen_range(-0.5..0.5);
        }
        if let Some(x) = attempt(x0, refs) {
            return Ok(x);
        }
    }
    Err(Error::NoEquilibrium(last))
}

/// Unloaded guess: POC at the bus voltage, no currents, frame aligned with the grid.
fn flat_start(model: &Model, grid: &GridParams) -> Vec<f64> {
    let l = &model.layout;
    let mut x = vec![0.0; l.len()];
    if let Some(v) = l.v {
        x[v] = grid.v_g;
    }
    if let InnerConfig::ClosedLoop(c) = &model.scheme.inner {
        if !c.vcc.v_feedforward {
            if let Some(k) = l.index("vcc_int_d") {
                x[k] = grid.v_g;
            }
        }
    }
    x
}

fn newton(model: &Model, mut x: Vec<f64>, refs: &References, grid: &GridParams) -> std::result::Result<Vec<f64>, String> {
    let n = x.len();
    let mut f = vec![0.0; n];
    let mut r = residual(model, &x, refs, grid, &mut f);
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for _ in 0..MAX_NEWTON_ITERATIONS {
        if r < RESIDUAL_TOLERANCE {
            return Ok(x);
        }
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            let h = 1e-7 * x[k].abs().max(1.0);
            let orig = x[k];
            x[k] = orig + h;
            let rp = residual(model, &x, refs, grid, &mut fp);
            x[k] = orig - h;
            let rm = residual(model, &x, refs, grid, &mut fm);
            x[k] = orig;
            if !(rp.is_finite() && rm.is_finite()) {
                return Err("non-finite derivative while building the Jacobian".into());
            }
            for row in 0..n {
                jac[(row, k)] = (fp[row] - fm[row]) / (2.0 * h);
            }
        }
        let step = jac
            .lu()
            .solve(&DVector::from_column_slice(&f))
            .ok_or_else(|| "singular Jacobian".to_string())?;
        let mut alpha = 1.0;
        let mut trial = vec![0.0; n];
        let mut ft = vec![0.0; n];
        loop {
            for k in 0..n {
                trial[k] = x[k] - alpha * step[k];
            }
            let rt = residual(model, &trial, refs, grid, &mut ft);
            if rt < r || alpha < 1e-4 {
                if !rt.is_finite() {
                    return Err("line search left the domain".into());
                }
                x.copy_from_slice(&trial);
                f.copy_from_slice(&ft);
                r = rt;
                break;
            }
            alpha *= 0.5;
        }
    }
    if r < RESIDUAL_TOLERANCE {
        Ok(x)
    } else {
        Err(format!(
            "Newton stalled at residual {r:.3e} after {MAX_NEWTON_ITERATIONS} iterations"
        ))
    }
}

/// Steady POC voltage magnitude for a solved point.
pub fn poc_magnitude(op: &OperatingPoint) -> f64 {
    op.v0.norm()
}

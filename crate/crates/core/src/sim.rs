//! Fixed-step RK4 engine for scenarios with reference and grid events.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::control::{ControlScheme, References};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::operating_point::solve_operating_point;
use crate::plant::{stored_energy, CircuitState, GridParams, SystemParams};

/// Largest step accepted for the default plant.
pub const MAX_DT: f64 = 1e-4;
/// State magnitude treated as divergence (p.u.).
pub const DIVERGENCE_LIMIT: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    StepPref(f64),
    StepQref(f64),
    StepVref(f64),
    SetGrid(GridParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub action: Action,
}

impl Event {
    pub fn new(time: f64, action: Action) -> Self {
        Self { time, action }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub system: SystemParams,
    pub scheme: ControlScheme,
    /// References at the initial equilibrium.
    pub refs: References,
    pub events: Vec<Event>,
    pub duration: f64,
}

/// Default run length (s).
pub const DEFAULT_DURATION: f64 = 2.0;
/// Default time of the first event (s).
pub const DEFAULT_EVENT_TIME: f64 = 0.2;

impl Scenario {
    pub fn new(system: SystemParams, scheme: ControlScheme, refs: References) -> Self {
        Self {
            system,
            scheme,
            refs,
            events: Vec::new(),
            duration: DEFAULT_DURATION,
        }
    }

    pub fn with_event(mut self, time: f64, action: Action) -> Self {
        self.events.push(Event::new(time, action));
        self
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    /// Time of the last event, or zero when there is none.
    pub fn last_event_time(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.time)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::Config("duration must be positive".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for e in &self.events {
            if !(e.time > prev) {
                return Err(Error::Config("event times must be strictly increasing".into()));
            }
            if !(e.time >= 0.0 && e.time <= self.duration) {
                return Err(Error::Config(format!("event at {} s lies outside the run", e.time)));
            }
            if let Action::SetGrid(g) = e.action {
                g.validate().map_err(|err| Error::Config(err.to_string()))?;
            }
            prev = e.time;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub record_decimation: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 50e-6,
            record_decimation: 4,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::Config(format!("dt must lie in (0, {MAX_DT}] s")));
        }
        if self.record_decimation == 0 {
            return Err(Error::Config("record decimation must be at least 1".into()));
        }
        Ok(())
    }
}

/// Channels written to CSV, in order.
pub const CSV_CHANNELS: [&str; 10] = ["t", "P", "Q", "vd", "vq", "id", "iq", "Vmag", "omega", "theta"];

/// Every recorded channel. Beyond the CSV set: grid-frame output current,
/// converter-frame filter current, converter terminal power, power into the
/// bus, resistive loss and stored energy.
pub const TRACE_CHANNELS: [&str; 18] = [
    "t", "P", "Q", "vd", "vq", "id", "iq", "Vmag", "omega", "theta", "igd_grid", "igq_grid", "ifd", "ifq",
    "Pe", "Pbus", "loss", "W",
];

/// Uniformly sampled record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub sample_period: f64,
    data: Vec<Vec<f64>>,
    /// State vector at the end of the run.
    pub final_state: Vec<f64>,
    /// Time of the last event applied.
    pub last_event: f64,
    pub omega_1: f64,
}

impl SimTrace {
    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        TRACE_CHANNELS
            .iter()
            .position(|c| *c == name)
            .map(|k| self.data[k].as_slice())
    }

    pub fn len(&self) -> usize {
        self.data[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.sample_period
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let t0 = self.data[0].first().copied().unwrap_or(0.0);
        (((t - t0) / self.sample_period - 1e-9).ceil().max(0.0) as usize).min(self.len())
    }

    /// Phase-a output current, rebuilt from the grid-frame components.
    pub fn phase_a_current(&self) -> Vec<f64> {
        let t = &self.data[0];
        let d = self.channel("igd_grid").unwrap();
        let q = self.channel("igq_grid").unwrap();
        t.iter()
            .zip(d.iter().zip(q))
            .map(|(t, (d, q))| {
                let a = self.omega_1 * t;
                d * a.cos() - q * a.sin()
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = CSV_CHANNELS.join(",");
        out.push('\n');
        let cols: Vec<&[f64]> = CSV_CHANNELS.iter().map(|c| self.channel(c).unwrap()).collect();
        for k in 0..self.len() {
            for (m, col) in cols.iter().enumerate() {
                if m > 0 {
                    out.push(',');
                }
                write!(out, "{}", col[k]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Solves the initial equilibrium and integrates the scenario.
///
/// Returns [`Error::Diverged`] with the time of failure when a state leaves
/// the `10³` p.u. box or becomes non-finite.
pub fn run_scenario(scn: &Scenario, cfg: &SimConfig) -> Result<SimTrace> {
    scn.validate()?;
    cfg.validate()?;
    let op = solve_operating_point(&scn.system, &scn.scheme, &scn.refs)?;
    integrate(&op.model, op.x.clone(), scn, cfg)
}

/// Integrates from an explicit initial state.
pub fn integrate(model: &Model, x0: Vec<f64>, scn: &Scenario, cfg: &SimConfig) -> Result<SimTrace> {
    cfg.validate()?;
    let dt = cfg.dt;
    let n_steps = (scn.duration / dt).round() as usize;
    let n = x0.len();
    let mut x = x0;
    let mut refs = scn.refs;
    let mut grid = scn.system.grid;
    let mut next_event = 0;
    let mut last_event = 0.0;

    let mut data: Vec<Vec<f64>> = vec![Vec::with_capacity(n_steps / cfg.record_decimation + 1); TRACE_CHANNELS.len()];
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    let diverged = |t: f64| Error::Diverged { time: t };
    let rhs = |x: &[f64], refs: &References, grid: &GridParams, dx: &mut [f64], t: f64| {
        model.derivatives(x, refs, grid, dx).map_err(|e| match e {
            Error::DegenerateVoltage(_) => diverged(t),
            other => other,
        })
    };

    for step in 0..=n_steps {
        let t = step as f64 * dt;
        while next_event < scn.events.len() && scn.events[next_event].time <= t + 1e-9 * dt {
            match scn.events[next_event].action {
                Action::StepPref(p) => refs.p_ref = p,
                Action::StepQref(q) => refs.q_ref = q,
                Action::StepVref(v) => refs.v_ref = v,
                Action::SetGrid(g) => grid = g,
            }
            last_event = scn.events[next_event].time;
            next_event += 1;
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
            return Err(diverged(t));
        }
        if step % cfg.record_decimation == 0 {
            let sig = rhs(&x, &refs, &grid, &mut k1, t)?;
            record(&mut data, model, &x, &grid, &sig, t);
        }
        if step == n_steps {
            break;
        }
        rhs(&x, &refs, &grid, &mut k1, t)?;
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        rhs(&tmp, &refs, &grid, &mut k2, t)?;
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        rhs(&tmp, &refs, &grid, &mut k3, t)?;
        for i in 0..n {
            tmp[i] = x[i] + dt * k3[i];
        }
        rhs(&tmp, &refs, &grid, &mut k4, t)?;
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    Ok(SimTrace {
        sample_period: dt * cfg.record_decimation as f64,
        data,
        final_state: x,
        last_event,
        omega_1: scn.system.omega_1(),
    })
}

fn record(data: &mut [Vec<f64>], model: &Model, x: &[f64], grid: &GridParams, sig: &crate::model::Signals, t: f64) {
    let l = &model.layout;
    let conv = &model.system.conv;
    let kappa = conv.kappa;
    let pair = |k: usize| Complex64::new(x[k], x[k + 1]);
    let i_f = pair(l.i_f);
    let i_g = if l.series { i_f } else { pair(l.i_g) };
    let state = CircuitState {
        i_f,
        v: l.v.map_or(Complex64::new(0.0, 0.0), pair),
        i_g,
    };
    let pe = kappa * (sig.e_grid * i_f.conj()).re;
    let pbus = kappa * grid.v_g * i_g.re;
    let loss = kappa * (conv.r_f * i_f.norm_sqr() + grid.r_g * i_g.norm_sqr());
    // in series mode i_g = i_f, so both reactances are counted on one current
    let w = kappa * stored_energy(&state, grid, conv);
    let row = [
        t,
        sig.p,
        sig.q,
        sig.v.re,
        sig.v.im,
        sig.i_g.re,
        sig.i_g.im,
        sig.v_mag,
        sig.omega,
        sig.theta,
        sig.i_g_grid.re,
        sig.i_g_grid.im,
        sig.i_f.re,
        sig.i_f.im,
        pe,
        pbus,
        loss,
        w,
    ];
    for (col, v) in data.iter_mut().zip(row) {
        col.push(v);
    }
}

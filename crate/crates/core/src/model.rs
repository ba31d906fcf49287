//! Joint plant + controller ODE shared by the simulator, the operating-point
//! solver and the linearizer.

use num_complex::Complex64;

use crate::control::pdc::Realization;
use crate::control::{
    closed_loop_inner_step, open_loop_inner_step, outer_voltage_step, pll_step, psc_step, AddOn,
    ClosedLoopLayout, ControlScheme, InnerConfig, InnerRefs, PdcDesign, References,
};
use crate::error::{Error, Result};
use crate::plant::{
    circuit_derivatives, instantaneous_power, series_derivative, CircuitState, ComplexDq, GridParams,
    SystemParams,
};

/// Which parts of the loop are free when the model is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoopMode {
    #[default]
    Closed,
    /// Synchronization and outer voltage states held; angle and magnitude
    /// become inputs.
    OuterOpen,
    /// Every controller state held and the converter voltage frozen.
    PlantOnly,
}

/// Additive small-signal inputs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Perturbation {
    pub p_ref: f64,
    pub q_ref: f64,
    pub v_ref: f64,
    pub theta_c: f64,
    pub e_c: f64,
    pub v_g: f64,
    /// Converter voltage deviation in the grid frame (plant-only mode).
    pub e_d: f64,
    pub e_q: f64,
}

/// Input labels understood by [`Perturbation::set`].
pub const INPUT_LABELS: [&str; 8] = ["p_ref", "q_ref", "v_ref", "theta_c", "e_c", "v_g", "e_d", "e_q"];

impl Perturbation {
    pub fn set(&mut self, label: &str, value: f64) -> Result<()> {
        let slot = match label {
            "p_ref" => &mut self.p_ref,
            "q_ref" => &mut self.q_ref,
            "v_ref" => &mut self.v_ref,
            "theta_c" => &mut self.theta_c,
            "e_c" => &mut self.e_c,
            "v_g" => &mut self.v_g,
            "e_d" => &mut self.e_d,
            "e_q" => &mut self.e_q,
            _ => return Err(Error::Config(format!("unknown input label `{label}`"))),
        };
        *slot = value;
        Ok(())
    }
}

/// Algebraic signals produced alongside the derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Signals {
    /// POC powers.
    pub p: f64,
    pub q: f64,
    pub p_f: f64,
    pub q_f: f64,
    /// Converter-frame POC voltage, output current and filter current.
    pub v: ComplexDq,
    pub i_g: ComplexDq,
    pub i_f: ComplexDq,
    pub v_mag: f64,
    /// Converter frame speed (rad/s) and angle relative to the grid frame.
    pub omega: f64,
    pub theta: f64,
    /// Magnitude reference after the outer loop and decoupling.
    pub e: f64,
    pub i_ref: ComplexDq,
    pub as_id: f64,
    pub i_g_grid: ComplexDq,
    /// Converter voltage in the grid frame.
    pub e_grid: ComplexDq,
}

/// Output labels understood by [`Signals::get`].
pub const OUTPUT_LABELS: [&str; 19] = [
    "P", "Q", "Pf", "Qf", "vd", "vq", "id", "iq", "Vmag", "omega", "theta", "E", "id_ref", "iq_ref",
    "as_id", "ifd", "ifq", "igd_grid", "igq_grid",
];

impl Signals {
    pub fn get(&self, label: &str) -> Result<f64> {
        Ok(match label {
            "P" => self.p,
            "Q" => self.q,
            "Pf" => self.p_f,
            "Qf" => self.q_f,
            "vd" => self.v.re,
            "vq" => self.v.im,
            "id" => self.i_g.re,
            "iq" => self.i_g.im,
            "Vmag" => self.v_mag,
            "omega" => self.omega,
            "theta" => self.theta,
            "E" => self.e,
            "id_ref" => self.i_ref.re,
            "iq_ref" => self.i_ref.im,
            "as_id" => self.as_id,
            "ifd" => self.i_f.re,
            "ifq" => self.i_f.im,
            "igd_grid" => self.i_g_grid.re,
            "igq_grid" => self.i_g_grid.im,
            _ => return Err(Error::Config(format!("unknown output label `{label}`"))),
        })
    }
}

/// Offsets of each block inside the joint state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLayout {
    pub labels: Vec<String>,
    /// Filter capacitor absent: one inductor current, POC voltage algebraic.
    pub series: bool,
    pub i_f: usize,
    pub v: Option<usize>,
    pub i_g: usize,
    pub theta: usize,
    pub pll_xi: Option<usize>,
    pub psc: (usize, usize),
    pub p_f: usize,
    pub avc: Option<usize>,
    pub inner: (usize, usize),
    pub pdc: [(usize, usize); 2],
}

impl StateLayout {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// True for states that the outer-open mode holds.
    fn is_outer(&self, k: usize) -> bool {
        k == self.theta
            || Some(k) == self.pll_xi
            || Some(k) == self.avc
            || (self.psc.0..self.psc.0 + self.psc.1).contains(&k)
    }

    /// True for plant (electrical) states.
    fn is_plant(&self, k: usize) -> bool {
        k == self.i_f
            || k == self.i_f + 1
            || k == self.i_g
            || k == self.i_g + 1
            || self.v.map_or(false, |v| k == v || k == v + 1)
    }
}

/// Compensator realizations with the anchors their inputs are measured from.
#[derive(Debug, Clone, PartialEq)]
pub struct PdcRuntime {
    pub design: PdcDesign,
    pub c_v_theta: Realization,
    pub c_theta_v: Realization,
    pub theta_c0: f64,
    pub e_c0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub system: SystemParams,
    pub scheme: ControlScheme,
    pub layout: StateLayout,
    closed: Option<ClosedLoopLayout>,
    pdc: Option<PdcRuntime>,
}

impl Model {
    /// Builds the model without decoupling states; see [`Model::with_pdc`].
    pub fn new(system: SystemParams, scheme: ControlScheme) -> Result<Self> {
        system.validate()?;
        scheme.validate()?;
        let series = system.conv.c_f == 0.0;
        if series {
            let ok = match &scheme.inner {
                InnerConfig::OpenLoop(o) => o.prf.is_none() && scheme.outer.avc.is_none(),
                InnerConfig::ClosedLoop(_) => false,
            };
            if !ok {
                return Err(Error::Config(
                    "a filter without capacitor supports only open-loop VVC without PRF or AVC".into(),
                ));
            }
        }
        let closed = match &scheme.inner {
            InnerConfig::ClosedLoop(c) => Some(ClosedLoopLayout::for_config(c)),
            InnerConfig::OpenLoop(_) => None,
        };
        let layout = build_layout(&scheme, series, closed.as_ref(), [0, 0]);
        Ok(Self {
            system,
            scheme,
            layout,
            closed,
            pdc: None,
        })
    }

    /// Attaches decoupling compensators anchored at `(theta_c0, e_c0)`.
    pub fn with_pdc(mut self, design: PdcDesign, theta_c0: f64, e_c0: f64) -> Result<Self> {
        let w1 = self.system.omega_1();
        let c_v_theta = design.c_v_theta.realize(w1)?;
        let c_theta_v = design.c_theta_v.realize(w1)?;
        self.layout = build_layout(
            &self.scheme,
            self.layout.series,
            self.closed.as_ref(),
            [c_v_theta.order(), c_theta_v.order()],
        );
        self.pdc = Some(PdcRuntime {
            design,
            c_v_theta,
            c_theta_v,
            theta_c0,
            e_c0,
        });
        Ok(self)
    }

    pub fn pdc(&self) -> Option<&PdcRuntime> {
        self.pdc.as_ref()
    }

    pub fn n_states(&self) -> usize {
        self.layout.len()
    }

    /// Evaluates `dx = f(x)` and the algebraic signals.
    ///
    /// `e_hold` is the grid-frame converter voltage used in plant-only mode.
    #[allow(clippy::too_many_arguments)]
    pub fn eval(
        &self,
        x: &[f64],
        refs: &References,
        grid: &GridParams,
        pert: &Perturbation,
        mode: LoopMode,
        e_hold: ComplexDq,
        dx: &mut [f64],
    ) -> Result<Signals> {
        let l = &self.layout;
        debug_assert_eq!(x.len(), l.len());
        debug_assert_eq!(dx.len(), l.len());
        let w1 = self.system.omega_1();
        let conv = &self.system.conv;
        let kappa = conv.kappa;
        let mut grid = *grid;
        grid.v_g += pert.v_g;
        let p_ref = refs.p_ref + pert.p_ref;
        let q_ref = refs.q_ref + pert.q_ref;
        let v_ref = refs.v_ref + pert.v_ref;
        let pair = |k: usize| Complex64::new(x[k], x[k + 1]);

        let i_f = pair(l.i_f);
        let i_g = pair(l.i_g);
        let v_state = l.v.map(pair);
        let p_f = x[l.p_f];
        let q_f = x[l.p_f + 1];

        let theta_c = x[l.theta] + pert.theta_c;
        let v_mag_state = v_state.map_or(0.0, |v| v.norm());
        let avc_x = l.avc.map(|k| &x[k..k + 1]).unwrap_or(&[]);
        let outer = outer_voltage_step(&self.scheme.outer, avc_x, q_f, q_ref, v_mag_state, v_ref);
        let e_c = outer.e + pert.e_c;

        let mut theta = theta_c;
        let mut e_mag = e_c;
        if let Some(pdc) = &self.pdc {
            let (s1, n1) = l.pdc[0];
            let (s2, n2) = l.pdc[1];
            theta += realization_step(&pdc.c_v_theta, &x[s1..s1 + n1], e_c - pdc.e_c0, &mut dx[s1..s1 + n1]);
            e_mag += realization_step(&pdc.c_theta_v, &x[s2..s2 + n2], theta_c - pdc.theta_c0, &mut dx[s2..s2 + n2]);
        }
        let rot = Complex64::from_polar(1.0, theta);

        let i_f_c = i_f / rot;
        let i_g_c = i_g / rot;
        let mut sig = Signals {
            p_f,
            q_f,
            theta,
            e: e_mag,
            i_f: i_f_c,
            i_g: i_g_c,
            i_g_grid: i_g,
            ..Signals::default()
        };

        let (is, il) = l.inner;
        let e_grid = match (&self.scheme.inner, mode) {
            (_, LoopMode::PlantOnly) => e_hold + Complex64::new(pert.e_d, pert.e_q),
            (InnerConfig::OpenLoop(o), _) => {
                let v_c = v_state.map_or(Complex64::new(0.0, 0.0), |v| v / rot);
                let out = open_loop_inner_step(o, &x[is..is + il], e_mag, v_c, i_f_c, p_ref, kappa)?;
                dx[is..is + il].copy_from_slice(&out.dx[..il]);
                out.e_cmd * rot
            }
            (InnerConfig::ClosedLoop(c), _) => {
                let layout = self.closed.as_ref().expect("closed-loop layout");
                let v_c = v_state.expect("closed loop requires a filter capacitor") / rot;
                let out = closed_loop_inner_step(
                    c,
                    layout,
                    &x[is..is + il],
                    InnerRefs { e_ref: e_mag, p_ref },
                    v_c,
                    i_f_c,
                    i_g_c,
                    conv,
                    kappa,
                    w1,
                )?;
                dx[is..is + il].copy_from_slice(&out.dx[..il]);
                sig.i_ref = out.i_ref;
                sig.as_id = out.as_term;
                out.e_cmd * rot
            }
        };
        sig.e_grid = e_grid;

        let v = if l.series {
            let (di, v) = series_derivative(i_f, e_grid, &grid, conv);
            dx[l.i_f] = di.re;
            dx[l.i_f + 1] = di.im;
            v
        } else {
            let v = v_state.unwrap();
            let d = circuit_derivatives(&CircuitState { i_f, v, i_g }, e_grid, &grid, conv);
            let vk = l.v.unwrap();
            dx[l.i_f] = d.i_f.re;
            dx[l.i_f + 1] = d.i_f.im;
            dx[vk] = d.v.re;
            dx[vk + 1] = d.v.im;
            dx[l.i_g] = d.i_g.re;
            dx[l.i_g + 1] = d.i_g.im;
            v
        };
        let v_c = v / rot;
        sig.v = v_c;
        sig.v_mag = v.norm();

        let (p, q) = instantaneous_power(v, i_g, kappa);
        sig.p = p;
        sig.q = q;
        let wf = self.scheme.power_filter;
        dx[l.p_f] = wf * (p - p_f);
        dx[l.p_f + 1] = wf * (q - q_f);
        if let Some(k) = l.avc {
            dx[k] = outer.dx;
        }

        let dtheta = if let Some(xi) = l.pll_xi {
            let pll = match &self.scheme.inner {
                InnerConfig::ClosedLoop(c) => match c.add_on {
                    AddOn::GfmVcc { pll, .. } => pll,
                    _ => unreachable!("PLL state without a PLL scheme"),
                },
                _ => unreachable!("PLL state without a PLL scheme"),
            };
            let out = pll_step(&pll, x[xi], v_c.im, w1);
            dx[xi] = out.dxi;
            out.dtheta
        } else {
            let (ps, pn) = l.psc;
            let out = psc_step(&self.scheme.psc, &x[ps..ps + pn], p_f, p_ref, v_c.im, w1);
            dx[ps..ps + pn].copy_from_slice(&out.dx[..pn]);
            out.dtheta
        };
        dx[l.theta] = dtheta;
        sig.omega = w1 + dtheta;

        match mode {
            LoopMode::Closed => {}
            LoopMode::OuterOpen => {
                for (k, d) in dx.iter_mut().enumerate() {
                    if l.is_outer(k) {
                        *d = 0.0;
                    }
                }
                sig.omega = w1;
            }
            LoopMode::PlantOnly => {
                for (k, d) in dx.iter_mut().enumerate() {
                    if !l.is_plant(k) {
                        *d = 0.0;
                    }
                }
                sig.omega = w1;
            }
        }
        Ok(sig)
    }

    /// Closed-loop derivative and signals, the common case.
    pub fn derivatives(&self, x: &[f64], refs: &References, grid: &GridParams, dx: &mut [f64]) -> Result<Signals> {
        self.eval(
            x,
            refs,
            grid,
            &Perturbation::default(),
            LoopMode::Closed,
            Complex64::new(0.0, 0.0),
            dx,
        )
    }
}

/// `y = c·x + d·u`, `ẋ = A x + b u`; returns `y`.
fn realization_step(r: &Realization, x: &[f64], u: f64, dx: &mut [f64]) -> f64 {
    let n = r.order();
    let mut y = r.d * u;
    for k in 0..n {
        y += r.c[k] * x[k];
        let mut acc = r.b[k] * u;
        for m in 0..n {
            acc += r.a[(k, m)] * x[m];
        }
        dx[k] = acc;
    }
    y
}

fn build_layout(
    scheme: &ControlScheme,
    series: bool,
    closed: Option<&ClosedLoopLayout>,
    pdc_orders: [usize; 2],
) -> StateLayout {
    let mut labels: Vec<String> = Vec::new();
    let mut push = |names: &[&str]| {
        let at = labels.len();
        labels.extend(names.iter().map(|s| s.to_string()));
        at
    };
    let i_f;
    let mut v = None;
    let i_g;
    if series {
        i_f = push(&["i_d", "i_q"]);
        i_g = i_f;
    } else {
        i_f = push(&["if_d", "if_q"]);
        v = Some(push(&["v_d", "v_q"]));
        i_g = push(&["ig_d", "ig_q"]);
    }
    let theta = push(&["theta"]);
    let mut pll_xi = None;
    let mut psc = (push(&[]), 0);
    if scheme.uses_pll() {
        pll_xi = Some(push(&["pll_int"]));
        psc.0 = push(&[]);
    } else {
        let n = scheme.psc.n_states();
        let names = ["psc_lpf", "psc_leadlag"];
        psc = (push(&names[..n]), n);
    }
    let p_f = push(&["p_meas", "q_meas"]);
    let avc = scheme.outer.has_avc_state().then(|| push(&["avc_int"]));
    let inner = match (&scheme.inner, closed) {
        (InnerConfig::OpenLoop(o), _) => {
            if o.vr.is_some() {
                (push(&["vr_hpf_d", "vr_hpf_q"]), 2)
            } else {
                (push(&[]), 0)
            }
        }
        (InnerConfig::ClosedLoop(c), Some(cl)) => {
            let names = cl.labels(c);
            (push(&names), cl.len)
        }
        (InnerConfig::ClosedLoop(_), None) => unreachable!("closed-loop layout missing"),
    };
    let mut pdc = [(0, 0); 2];
    for (slot, (n, tag)) in pdc.iter_mut().zip(pdc_orders.iter().zip(["pdc_vt", "pdc_tv"])) {
        let names: Vec<String> = (0..*n).map(|k| format!("{tag}_{k}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        *slot = (push(&refs), *n);
    }
    StateLayout {
        labels,
        series,
        i_f,
        v,
        i_g,
        theta,
        pll_xi,
        psc,
        p_f,
        avc,
        inner,
        pdc,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{OpenLoopVvc, PscConfig, VrConfig};

    #[test]
    fn layout_labels_are_unique() {
        let sys = SystemParams::default();
        let scheme = ControlScheme::open_loop(
            PscConfig::droop_lpf(10.0, 31.4),
            OpenLoopVvc {
                vr: Some(VrConfig::new(0.2, 47.0)),
                ..Default::default()
            },
        );
        let m = Model::new(sys, scheme).unwrap();
        let mut l = m.layout.labels.clone();
        l.sort();
        l.dedup();
        assert_eq!(l.len(), m.n_states());
        assert_eq!(m.n_states(), 6 + 1 + 1 + 2 + 2);
    }

    #[test]
    fn series_mode_rejects_prf() {
        let mut sys = SystemParams::default();
        sys.conv.c_f = 0.0;
        let scheme = ControlScheme::open_loop(
            PscConfig::pure_droop(10.0),
            OpenLoopVvc {
                prf: Some(crate::control::PrfConfig { r_a: 0.2 }),
                ..Default::default()
            },
        );
        assert!(matches!(Model::new(sys, scheme), Err(Error::Config(_))));
    }

    #[test]
    fn plant_only_freezes_controllers() {
        let sys = SystemParams::default();
        let scheme = ControlScheme::open_loop(PscConfig::droop_lpf(10.0, 31.4), OpenLoopVvc::default());
        let m = Model::new(sys, scheme).unwrap();
        let mut x = vec![0.0; m.n_states()];
        x[m.layout.p_f] = 0.3;
        let mut dx = vec![0.0; x.len()];
        m.eval(
            &x,
            &References::with_p(0.5),
            &sys.grid,
            &Perturbation::default(),
            LoopMode::PlantOnly,
            Complex64::new(1.0, 0.0),
            &mut dx,
        )
        .unwrap();
        for (k, d) in dx.iter().enumerate() {
            if !m.layout.is_plant(k) {
                assert_eq!(*d, 0.0, "{}", m.layout.labels[k]);
            }
        }
    }
}

//! Scenario files: flat `[section]` blocks of `key = value` lines with `#`
//! comments. Dimensional values carry a unit suffix (`pu`, `ohm`, `mH`, `uF`,
//! `rad_s`, `hz`); times are in seconds.
//!
//! Parsing is strict: unknown sections, unknown keys and keys that the
//! selected scheme does not use are all rejected. [`RunConfig::dump`] writes
//! a canonical file that parses back to the same value.

use std::cell::Cell;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::control::{
    AddOn, ClosedLoopVvc, ControlScheme, InnerConfig, OpenLoopVvc, OuterVoltageConfig, PdcConfig, PiGains,
    PllConfig, PrfConfig, PscConfig, PscVariant, References, VrConfig, DEFAULT_POWER_FILTER,
};
use crate::error::{Error, Result};
use crate::model::LoopMode;
use crate::plant::{make_grid_from_scr, ConverterParams, GridParams, PerUnitBase, SystemParams};
use crate::ringdown::Bands;
use crate::sim::{Action, Event, Scenario, SimConfig, DEFAULT_DURATION};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub refs: References,
    pub events: Vec<Event>,
    pub duration: f64,
    pub sim: SimConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSpec {
    /// Channel classified by `run`.
    pub channel: String,
    pub bands: Bands,
    /// Search half-width around the expected current images (Hz).
    pub coupling_tol: f64,
    pub loop_mode: LoopMode,
    pub bode_input: String,
    pub bode_output: String,
    /// Bode range (Hz) and number of log-spaced points.
    pub bode_fmin: f64,
    pub bode_fmax: f64,
    pub bode_points: usize,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            channel: "P".into(),
            bands: Bands::default(),
            coupling_tol: 2.0,
            loop_mode: LoopMode::Closed,
            bode_input: "theta_c".into(),
            bode_output: "P".into(),
            bode_fmin: 1.0,
            bode_fmax: 200.0,
            bode_points: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemParams,
    pub scheme: ControlScheme,
    pub scenario: ScenarioSpec,
    pub analysis: AnalysisSpec,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc = Document::parse(text)?;
        let cfg = build(&doc)?;
        doc.check_all_used()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        self.system.validate().map_err(cfg_err)?;
        self.scheme.validate().map_err(cfg_err)?;
        self.scenario().validate()?;
        self.scenario.sim.validate()?;
        Ok(())
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            system: self.system,
            scheme: self.scheme,
            refs: self.scenario.refs,
            events: self.scenario.events.clone(),
            duration: self.scenario.duration,
        }
    }

    pub fn omega_1(&self) -> f64 {
        self.system.omega_1()
    }

    /// Applies a sweep parameter. Supported: `scr`, `x_over_r`, `p_ref`,
    /// `k_p` (droop, fraction of ω₁), `vvc_kp`, `r_a` (VR gain).
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let g = self.system.grid;
        match name {
            "scr" => self.system.grid = make_grid_from_scr(value, g.x_over_r(), g.v_g, g.omega_1)?,
            "x_over_r" => self.system.grid = make_grid_from_scr(g.scr(), value, g.v_g, g.omega_1)?,
            "p_ref" => self.scenario.refs.p_ref = value,
            "k_p" => self.scheme.psc.k_p = value * self.omega_1(),
            "vvc_kp" => match &mut self.scheme.inner {
                InnerConfig::ClosedLoop(c) => c.vvc.k_p = value,
                InnerConfig::OpenLoop(_) => return Err(Error::Config("vvc_kp needs the closed-loop structure".into())),
            },
            "r_a" => match &mut self.scheme.inner {
                InnerConfig::OpenLoop(OpenLoopVvc { vr: Some(vr), .. }) => vr.r_a = value,
                _ => return Err(Error::Config("r_a sweep needs an open-loop scheme with VR".into())),
            },
            other => return Err(Error::Config(format!("unknown sweep parameter `{other}`"))),
        }
        self.validate()
    }

    /// Canonical text form; parses back to an identical value.
    pub fn dump(&self) -> String {
        let mut o = String::new();
        let b = &self.system.base;
        let _ = writeln!(o, "[base]\nv_base = {}\ns_base = {}\nomega_base = {} rad_s\n", b.v_base, b.s_base, b.omega_base);
        let g = &self.system.grid;
        let _ = writeln!(o, "[grid]\nr_g = {} pu\nx_g = {} pu\nv_g = {} pu\n", g.r_g, g.x_g, g.v_g);
        let c = &self.system.conv;
        let _ = writeln!(
            o,
            "[converter]\nl_f = {} pu\nc_f = {} pu\nr_f = {} pu\nkappa = {}\n",
            c.l_f, c.c_f, c.r_f, c.kappa
        );
        o.push_str("[control]\n");
        dump_control(&mut o, &self.scheme);
        let s = &self.scenario;
        let _ = writeln!(
            o,
            "\n[scenario]\np_ref = {} pu\nq_ref = {} pu\nv_ref = {} pu\nduration = {}\ndt = {}\ndecimation = {}",
            s.refs.p_ref, s.refs.q_ref, s.refs.v_ref, s.duration, s.sim.dt, s.sim.record_decimation
        );
        for e in &s.events {
            let _ = match e.action {
                Action::StepPref(v) => writeln!(o, "event = {} p_ref {}", e.time, v),
                Action::StepQref(v) => writeln!(o, "event = {} q_ref {}", e.time, v),
                Action::StepVref(v) => writeln!(o, "event = {} v_ref {}", e.time, v),
                Action::SetGrid(g) => writeln!(o, "event = {} grid r_g={} x_g={} v_g={}", e.time, g.r_g, g.x_g, g.v_g),
            };
        }
        let a = &self.analysis;
        let mode = match a.loop_mode {
            LoopMode::Closed => "closed",
            LoopMode::OuterOpen => "outer_open",
            LoopMode::PlantOnly => "plant_only",
        };
        let _ = writeln!(
            o,
            "\n[analysis]\nchannel = {}\nsr_low = {}\nsr_high = {}\nssr_floor = {} hz\nssr_high = {}\nzeta_max = {}\namplitude_floor = {}\ncoupling_tol = {} hz\nloop_mode = {}\nbode_input = {}\nbode_output = {}\nbode_fmin = {} hz\nbode_fmax = {} hz\nbode_points = {}",
            a.channel,
            a.bands.sr_low,
            a.bands.sr_high,
            a.bands.ssr_floor,
            a.bands.ssr_high,
            a.bands.zeta_max,
            a.bands.amplitude_floor,
            a.coupling_tol,
            mode,
            a.bode_input,
            a.bode_output,
            a.bode_fmin,
            a.bode_fmax,
            a.bode_points
        );
        if let Some(dir) = &self.out_dir {
            let _ = writeln!(o, "out_dir = {}", dir.display());
        }
        o
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn dump_control(o: &mut String, s: &ControlScheme) {
    let psc = &s.psc;
    let structure = match s.inner {
        InnerConfig::OpenLoop(_) => "open_loop",
        InnerConfig::ClosedLoop(_) => "closed_loop",
    };
    let _ = writeln!(o, "structure = {structure}");
    match psc.variant {
        PscVariant::PureDroop => {
            let _ = writeln!(o, "psc = pure_droop");
        }
        PscVariant::DroopLpf { omega_c } => {
            let _ = writeln!(o, "psc = droop_lpf\nomega_c = {omega_c} rad_s");
        }
        PscVariant::LeadLag { omega_c, t_lead, t_lag } => {
            let _ = writeln!(o, "psc = lead_lag\nomega_c = {omega_c} rad_s\nt_lead = {t_lead}\nt_lag = {t_lag}");
        }
    }
    let _ = writeln!(o, "k_p = {} rad_s", psc.k_p);
    if let Some(k) = psc.k_vq {
        let _ = writeln!(o, "k_vq = {k}");
    }
    let _ = writeln!(o, "e_nom = {} pu\nk_q = {}", s.outer.e_nom, s.outer.k_q);
    match s.outer.avc {
        Some(g) => {
            let _ = writeln!(o, "avc = on\navc_kp = {}\navc_ki = {}", g.k_p, g.k_i);
        }
        None => {
            let _ = writeln!(o, "avc = off");
        }
    }
    let _ = writeln!(o, "power_filter = {} rad_s", s.power_filter);
    match &s.inner {
        InnerConfig::OpenLoop(ol) => {
            if let Some(vr) = ol.vr {
                let _ = writeln!(o, "vr_r_a = {} pu\nvr_omega_v = {} rad_s", vr.r_a, vr.omega_v);
            }
            if let Some(prf) = ol.prf {
                let _ = writeln!(o, "prf_r_a = {} pu", prf.r_a);
            }
            if let Some(p) = ol.pdc {
                let _ = writeln!(
                    o,
                    "pdc = on\npdc_r_g_hat = {} pu\npdc_x_g_hat = {} pu\npdc_include_filter_and_vr = {}",
                    p.r_g_hat,
                    p.x_g_hat,
                    on_off(p.include_filter_and_vr)
                );
            }
        }
        InnerConfig::ClosedLoop(c) => {
            let _ = writeln!(
                o,
                "vvc_kp = {}\nvvc_ki = {}\nvvc_cap_decoupling = {}\nvvc_ig_feedforward = {}\nvcc_kp = {}\nvcc_ki = {}\nvcc_decoupling = {}\nvcc_v_feedforward = {}",
                c.vvc.k_p,
                c.vvc.k_i,
                on_off(c.vvc.cap_decoupling),
                on_off(c.vvc.ig_feedforward),
                c.vcc.k_p,
                c.vcc.k_i,
                on_off(c.vcc.decoupling),
                on_off(c.vcc.v_feedforward)
            );
            match c.add_on {
                AddOn::None => {
                    let _ = writeln!(o, "add_on = none");
                }
                AddOn::Vi { r_v, l_v, omega_lpf } => {
                    let _ = writeln!(o, "add_on = vi\nr_v = {r_v} pu\nl_v = {l_v} pu\nomega_lpf = {omega_lpf} rad_s");
                }
                AddOn::Va { r_v, l_v } => {
                    let _ = writeln!(o, "add_on = va\nr_v = {r_v} pu\nl_v = {l_v} pu");
                }
                AddOn::Hybrid { k_i_dq, prf } => {
                    let _ = writeln!(o, "add_on = hybrid\nk_i_dq = {k_i_dq}\nhybrid_prf = {}", on_off(prf));
                }
                AddOn::ActiveSusceptance { b_a, k_i_dq, prf } => {
                    let _ = writeln!(
                        o,
                        "add_on = active_susceptance\nb_a = {b_a} pu\nk_i_dq = {k_i_dq}\nhybrid_prf = {}",
                        on_off(prf)
                    );
                }
                AddOn::GfmVcc { r_v, l_v, pll } => {
                    let _ = writeln!(
                        o,
                        "add_on = gfm_vcc\nr_v = {r_v} pu\nl_v = {l_v} pu\npll_kp = {}\npll_ki = {}",
                        pll.k_p, pll.k_i
                    );
                }
            }
        }
    }
}

struct Entry {
    key: String,
    value: String,
    line: usize,
    used: Cell<bool>,
}

struct Section {
    name: String,
    entries: Vec<Entry>,
}

const SECTIONS: [&str; 6] = ["base", "grid", "converter", "control", "scenario", "analysis"];

struct Document {
    sections: Vec<Section>,
}

impl Document {
    fn parse(text: &str) -> Result<Self> {
        let mut sections: Vec<Section> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::Config(format!("line {line_no}: unknown section [{name}]")));
                }
                if sections.iter().any(|s| s.name == name) {
                    return Err(Error::Config(format!("line {line_no}: section [{name}] repeated")));
                }
                sections.push(Section {
                    name: name.to_string(),
                    entries: Vec::new(),
                });
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {line_no}: expected `key = value`")));
            };
            let Some(section) = sections.last_mut() else {
                return Err(Error::Config(format!("line {line_no}: entry before any [section]")));
            };
            let key = key.trim().to_string();
            if key != "event" && section.entries.iter().any(|e| e.key == key) {
                return Err(Error::Config(format!("line {line_no}: duplicate key `{key}`")));
            }
            section.entries.push(Entry {
                key,
                value: value.trim().to_string(),
                line: line_no,
                used: Cell::new(false),
            });
        }
        Ok(Self { sections })
    }

    fn section(&self, name: &str) -> Sec<'_> {
        Sec {
            name: name.to_string(),
            section: self.sections.iter().find(|s| s.name == name),
        }
    }

    fn check_all_used(&self) -> Result<()> {
        for s in &self.sections {
            if let Some(e) = s.entries.iter().find(|e| !e.used.get()) {
                return Err(Error::Config(format!(
                    "line {}: key `{}` is unknown or unused in [{}]",
                    e.line, e.key, s.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    /// Bare number or `pu`.
    Plain,
    Resistance,
    Reactance,
    Susceptance,
    /// Angular rate in rad/s; `rad_s` or `hz`.
    Rate,
    /// Frequency in Hz; `hz` or `rad_s`.
    Freq,
    /// Droop gain: `pu` means a fraction of ω₁, `rad_s` is absolute.
    Droop,
}

struct Sec<'a> {
    name: String,
    section: Option<&'a Section>,
}

impl Sec<'_> {
    fn entry(&self, key: &str) -> Option<&Entry> {
        let e = self.section?.entries.iter().find(|e| e.key == key)?;
        e.used.set(true);
        Some(e)
    }

    fn has(&self, key: &str) -> bool {
        self.section.map_or(false, |s| s.entries.iter().any(|e| e.key == key))
    }

    fn err(&self, e: &Entry, msg: impl std::fmt::Display) -> Error {
        Error::Config(format!("line {}: [{}] {}: {msg}", e.line, self.name, e.key))
    }

    fn text(&self, key: &str) -> Option<(String, &Entry)> {
        self.entry(key).map(|e| (e.value.clone(), e))
    }

    fn word(&self, key: &str, default: &str) -> String {
        self.text(key).map_or(default.to_string(), |(v, _)| v)
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.text(key) {
            None => Ok(default),
            Some((v, e)) => match v.as_str() {
                "on" | "true" | "yes" => Ok(true),
                "off" | "false" | "no" => Ok(false),
                _ => Err(self.err(e, format!("expected on/off, got `{v}`"))),
            },
        }
    }

    fn num(&self, key: &str, kind: Kind, ctx: &Units) -> Result<Option<f64>> {
        let Some(e) = self.entry(key) else {
            return Ok(None);
        };
        quantity(&e.value, kind, ctx).map(Some).map_err(|m| self.err(e, m))
    }

    fn num_or(&self, key: &str, kind: Kind, ctx: &Units, default: f64) -> Result<f64> {
        Ok(self.num(key, kind, ctx)?.unwrap_or(default))
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.text(key) {
            None => Ok(default),
            Some((v, e)) => v.parse().map_err(|_| self.err(e, format!("expected an integer, got `{v}`"))),
        }
    }

    fn events(&self) -> Vec<&Entry> {
        self.section
            .map(|s| s.entries.iter().filter(|e| e.key == "event").collect())
            .unwrap_or_default()
    }
}

/// Conversion context for unit suffixes.
struct Units {
    base: PerUnitBase,
}

fn quantity(text: &str, kind: Kind, ctx: &Units) -> std::result::Result<f64, String> {
    let mut parts = text.split_whitespace();
    let number = parts.next().ok_or("missing value")?;
    let unit = parts.next();
    if parts.next().is_some() {
        return Err(format!("trailing text in `{text}`"));
    }
    let x: f64 = number.parse().map_err(|_| format!("`{number}` is not a number"))?;
    let b = &ctx.base;
    let bad = |u: &str| Err(format!("unit `{u}` does not fit {kind:?}"));
    match (kind, unit) {
        (Kind::Plain, None | Some("pu")) => Ok(x),
        (Kind::Resistance | Kind::Reactance | Kind::Susceptance, Some("pu")) => Ok(x),
        (Kind::Resistance, Some("ohm")) => Ok(b.ohm_to_pu(x)),
        (Kind::Reactance, Some("mH")) => Ok(b.henry_to_pu(x * 1e-3)),
        (Kind::Susceptance, Some("uF")) => Ok(b.farad_to_pu(x * 1e-6)),
        (Kind::Rate | Kind::Droop, Some("rad_s")) => Ok(x),
        (Kind::Rate, Some("hz")) => Ok(2.0 * PI * x),
        (Kind::Freq, Some("hz")) => Ok(x),
        (Kind::Freq, Some("rad_s")) => Ok(x / (2.0 * PI)),
        (Kind::Droop, Some("pu")) => Ok(x * b.omega_base),
        (_, None) => Err(format!("`{text}` needs a unit suffix")),
        (_, Some(u)) => bad(u),
    }
}

fn build(doc: &Document) -> Result<RunConfig> {
    let base_sec = doc.section("base");
    let tmp = Units {
        base: PerUnitBase::default(),
    };
    let d = PerUnitBase::default();
    let v_base = base_sec.num_or("v_base", Kind::Plain, &tmp, d.v_base)?;
    let s_base = base_sec.num_or("s_base", Kind::Plain, &tmp, d.s_base)?;
    let omega_base = base_sec.num_or("omega_base", Kind::Rate, &tmp, d.omega_base)?;
    let base = PerUnitBase::new(v_base, s_base, omega_base).map_err(|e| Error::Config(e.to_string()))?;
    let u = Units { base };
    let w1 = base.omega_base;

    let cs = doc.section("converter");
    let dc = ConverterParams::table_iv(&base);
    let conv = ConverterParams {
        l_f: cs.num_or("l_f", Kind::Reactance, &u, dc.l_f)?,
        c_f: cs.num_or("c_f", Kind::Susceptance, &u, dc.c_f)?,
        r_f: cs.num_or("r_f", Kind::Resistance, &u, dc.r_f)?,
        kappa: cs.num_or("kappa", Kind::Plain, &u, dc.kappa)?,
    };

    let gs = doc.section("grid");
    let grid = parse_grid(&gs, &u, w1)?;
    let system = SystemParams { base, grid, conv };

    let scheme = parse_control(&doc.section("control"), &u, &system)?;

    let ss = doc.section("scenario");
    let refs = References {
        p_ref: ss.num_or("p_ref", Kind::Plain, &u, 0.0)?,
        q_ref: ss.num_or("q_ref", Kind::Plain, &u, 0.0)?,
        v_ref: ss.num_or("v_ref", Kind::Plain, &u, 1.0)?,
    };
    let sd = SimConfig::default();
    let sim = SimConfig {
        dt: ss.num_or("dt", Kind::Plain, &u, sd.dt)?,
        record_decimation: ss.usize_or("decimation", sd.record_decimation)?,
    };
    let duration = ss.num_or("duration", Kind::Plain, &u, DEFAULT_DURATION)?;
    let mut events = Vec::new();
    for e in ss.events() {
        e.used.set(true);
        events.push(parse_event(&e.value, &grid, &u).map_err(|m| ss.err(e, m))?);
    }

    let as_ = doc.section("analysis");
    let da = AnalysisSpec::default();
    let db = Bands::default();
    let loop_mode = match as_.word("loop_mode", "closed").as_str() {
        "closed" => LoopMode::Closed,
        "outer_open" => LoopMode::OuterOpen,
        "plant_only" => LoopMode::PlantOnly,
        other => return Err(Error::Config(format!("unknown loop_mode `{other}`"))),
    };
    let analysis = AnalysisSpec {
        channel: as_.word("channel", &da.channel),
        bands: Bands {
            sr_low: as_.num_or("sr_low", Kind::Plain, &u, db.sr_low)?,
            sr_high: as_.num_or("sr_high", Kind::Plain, &u, db.sr_high)?,
            ssr_floor: as_.num_or("ssr_floor", Kind::Freq, &u, db.ssr_floor)?,
            ssr_high: as_.num_or("ssr_high", Kind::Plain, &u, db.ssr_high)?,
            zeta_max: as_.num_or("zeta_max", Kind::Plain, &u, db.zeta_max)?,
            amplitude_floor: as_.num_or("amplitude_floor", Kind::Plain, &u, db.amplitude_floor)?,
        },
        coupling_tol: as_.num_or("coupling_tol", Kind::Freq, &u, da.coupling_tol)?,
        loop_mode,
        bode_input: as_.word("bode_input", &da.bode_input),
        bode_output: as_.word("bode_output", &da.bode_output),
        bode_fmin: as_.num_or("bode_fmin", Kind::Freq, &u, da.bode_fmin)?,
        bode_fmax: as_.num_or("bode_fmax", Kind::Freq, &u, da.bode_fmax)?,
        bode_points: as_.usize_or("bode_points", da.bode_points)?,
    };
    let out_dir = as_.text("out_dir").map(|(v, _)| PathBuf::from(v));

    Ok(RunConfig {
        system,
        scheme,
        scenario: ScenarioSpec {
            refs,
            events,
            duration,
            sim,
        },
        analysis,
        out_dir,
    })
}

fn parse_grid(gs: &Sec<'_>, u: &Units, w1: f64) -> Result<GridParams> {
    let v_g = gs.num_or("v_g", Kind::Plain, u, 1.0)?;
    let by_scr = gs.has("scr") || gs.has("x_over_r");
    let by_rx = gs.has("r_g") || gs.has("x_g");
    let cfg_err = |e: Error| Error::Config(e.to_string());
    if by_scr && by_rx {
        return Err(Error::Config("[grid] give either scr/x_over_r or r_g/x_g, not both".into()));
    }
    if by_rx {
        let r_g = gs.num_or("r_g", Kind::Resistance, u, 0.0)?;
        let x_g = gs
            .num("x_g", Kind::Reactance, u)?
            .ok_or_else(|| Error::Config("[grid] x_g is required with r_g".into()))?;
        GridParams::new(r_g, x_g, v_g, w1).map_err(cfg_err)
    } else {
        let scr = gs.num_or("scr", Kind::Plain, u, 5.0)?;
        let xr = gs.num_or("x_over_r", Kind::Plain, u, 10.0)?;
        make_grid_from_scr(scr, xr, v_g, w1).map_err(cfg_err)
    }
}

fn parse_event(text: &str, grid: &GridParams, u: &Units) -> std::result::Result<Event, String> {
    let mut it = text.split_whitespace();
    let time: f64 = it
        .next()
        .ok_or("missing event time")?
        .parse()
        .map_err(|_| "event time is not a number")?;
    let kind = it.next().ok_or("missing event action")?;
    let rest: Vec<&str> = it.collect();
    let single = |rest: &[&str]| -> std::result::Result<f64, String> {
        match rest {
            [v] => quantity(v, Kind::Plain, u),
            _ => Err(format!("`{kind}` takes one value")),
        }
    };
    let action = match kind {
        "p_ref" => Action::StepPref(single(&rest)?),
        "q_ref" => Action::StepQref(single(&rest)?),
        "v_ref" => Action::StepVref(single(&rest)?),
        "grid" => {
            let mut kv = std::collections::BTreeMap::new();
            for item in &rest {
                let (k, v) = item.split_once('=').ok_or_else(|| format!("expected key=value, got `{item}`"))?;
                let v: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
                if kv.insert(k, v).is_some() {
                    return Err(format!("`{k}` repeated"));
                }
            }
            let v_g = kv.remove("v_g").unwrap_or(grid.v_g);
            let g = match (kv.remove("scr"), kv.remove("r_g"), kv.remove("x_g")) {
                (Some(scr), None, None) => {
                    let xr = kv.remove("x_over_r").unwrap_or_else(|| grid.x_over_r());
                    make_grid_from_scr(scr, xr, v_g, grid.omega_1)
                }
                (None, r, Some(x)) => GridParams::new(r.unwrap_or(0.0), x, v_g, grid.omega_1),
                _ => return Err("grid event needs scr[, x_over_r] or r_g, x_g".into()),
            }
            .map_err(|e| e.to_string())?;
            if let Some(k) = kv.keys().next() {
                return Err(format!("unknown grid event key `{k}`"));
            }
            Action::SetGrid(g)
        }
        other => return Err(format!("unknown event action `{other}`")),
    };
    Ok(Event::new(time, action))
}

fn parse_control(cs: &Sec<'_>, u: &Units, system: &SystemParams) -> Result<ControlScheme> {
    let structure = cs.word("structure", "open_loop");
    let closed = match structure.as_str() {
        "open_loop" => false,
        "closed_loop" => true,
        other => return Err(Error::Config(format!("unknown structure `{other}`"))),
    };
    let w1 = system.omega_1();
    let default_kp = if closed { crate::control::CLOSED_LOOP_DROOP } else { 0.05 } * w1;
    let k_p = cs.num_or("k_p", Kind::Droop, u, default_kp)?;
    let variant = match cs.word("psc", "pure_droop").as_str() {
        "pure_droop" => PscVariant::PureDroop,
        "droop_lpf" | "vsm" => PscVariant::DroopLpf {
            omega_c: cs.num_or("omega_c", Kind::Rate, u, 31.4)?,
        },
        "lead_lag" => PscVariant::LeadLag {
            omega_c: cs.num_or("omega_c", Kind::Rate, u, 31.4)?,
            t_lead: cs.num_or("t_lead", Kind::Plain, u, 0.0)?,
            t_lag: cs.num_or("t_lag", Kind::Plain, u, 1e-3)?,
        },
        other => return Err(Error::Config(format!("unknown psc `{other}`"))),
    };
    let psc = PscConfig {
        variant,
        k_p,
        k_vq: cs.num("k_vq", Kind::Plain, u)?,
    };
    let d_outer = OuterVoltageConfig::default();
    let avc = if cs.flag("avc", false)? {
        let d = OuterVoltageConfig::default().with_default_avc().avc.unwrap();
        Some(PiGains {
            k_p: cs.num_or("avc_kp", Kind::Plain, u, d.k_p)?,
            k_i: cs.num_or("avc_ki", Kind::Plain, u, d.k_i)?,
        })
    } else {
        None
    };
    let outer = OuterVoltageConfig {
        e_nom: cs.num_or("e_nom", Kind::Plain, u, d_outer.e_nom)?,
        k_q: cs.num_or("k_q", Kind::Plain, u, d_outer.k_q)?,
        avc,
    };
    let power_filter = cs.num_or("power_filter", Kind::Rate, u, DEFAULT_POWER_FILTER)?;

    let inner = if closed {
        let mut c = ClosedLoopVvc::classic(system);
        c.vvc.k_p = cs.num_or("vvc_kp", Kind::Plain, u, c.vvc.k_p)?;
        c.vvc.k_i = cs.num_or("vvc_ki", Kind::Plain, u, c.vvc.k_i)?;
        c.vvc.cap_decoupling = cs.flag("vvc_cap_decoupling", c.vvc.cap_decoupling)?;
        c.vvc.ig_feedforward = cs.flag("vvc_ig_feedforward", c.vvc.ig_feedforward)?;
        c.vcc.k_p = cs.num_or("vcc_kp", Kind::Plain, u, c.vcc.k_p)?;
        c.vcc.k_i = cs.num_or("vcc_ki", Kind::Plain, u, c.vcc.k_i)?;
        c.vcc.decoupling = cs.flag("vcc_decoupling", c.vcc.decoupling)?;
        c.vcc.v_feedforward = cs.flag("vcc_v_feedforward", c.vcc.v_feedforward)?;
        c.add_on = match cs.word("add_on", "none").as_str() {
            "none" => AddOn::None,
            "vi" => AddOn::Vi {
                r_v: cs.num_or("r_v", Kind::Resistance, u, 0.1)?,
                l_v: cs.num_or("l_v", Kind::Reactance, u, 0.3)?,
                omega_lpf: cs.num_or("omega_lpf", Kind::Rate, u, 2.0 * PI * 100.0)?,
            },
            "va" => AddOn::Va {
                r_v: cs.num_or("r_v", Kind::Resistance, u, 0.1)?,
                l_v: cs.num_or("l_v", Kind::Reactance, u, 0.3)?,
            },
            "hybrid" => AddOn::Hybrid {
                k_i_dq: cs.num_or("k_i_dq", Kind::Plain, u, DEFAULT_K_I_DQ)?,
                prf: cs.flag("hybrid_prf", true)?,
            },
            "active_susceptance" => AddOn::ActiveSusceptance {
                b_a: cs.num_or("b_a", Kind::Plain, u, 1.0)?,
                k_i_dq: cs.num_or("k_i_dq", Kind::Plain, u, DEFAULT_K_I_DQ)?,
                prf: cs.flag("hybrid_prf", true)?,
            },
            "gfm_vcc" => {
                let k = cs.num_or("pll_kp", Kind::Plain, u, DEFAULT_PLL_KP)?;
                AddOn::GfmVcc {
                    r_v: cs.num_or("r_v", Kind::Resistance, u, 0.1)?,
                    l_v: cs.num_or("l_v", Kind::Reactance, u, 0.3)?,
                    pll: PllConfig {
                        k_p: k,
                        k_i: cs.num_or("pll_ki", Kind::Plain, u, k * k / 4.0)?,
                    },
                }
            }
            other => return Err(Error::Config(format!("unknown add_on `{other}`"))),
        };
        InnerConfig::ClosedLoop(c)
    } else {
        let vr = match cs.num("vr_r_a", Kind::Resistance, u)? {
            Some(r_a) => Some(VrConfig::new(r_a, cs.num_or("vr_omega_v", Kind::Rate, u, 2.0 * PI * 7.5)?)),
            None => None,
        };
        let prf = cs.num("prf_r_a", Kind::Resistance, u)?.map(|r_a| PrfConfig { r_a });
        let pdc = if cs.flag("pdc", false)? {
            Some(PdcConfig {
                r_g_hat: cs.num_or("pdc_r_g_hat", Kind::Resistance, u, system.grid.r_g)?,
                x_g_hat: cs.num_or("pdc_x_g_hat", Kind::Reactance, u, system.grid.x_g)?,
                include_filter_and_vr: cs.flag("pdc_include_filter_and_vr", true)?,
            })
        } else {
            None
        };
        InnerConfig::OpenLoop(OpenLoopVvc { vr, prf, pdc })
    };
    Ok(ControlScheme {
        psc,
        outer,
        inner,
        power_filter,
    })
}

/// Default d-to-q integral gain of the hybrid inner loops (1/s).
pub const DEFAULT_K_I_DQ: f64 = 50.0;
/// Default PLL proportional gain (rad/s per p.u.); the integral gain
/// defaults to `k_p²/4` for a critically damped lock.
pub const DEFAULT_PLL_KP: f64 = 100.0;

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# Fig-7 style run
[grid]
scr = 20
x_over_r = 10

[control]
psc = droop_lpf
k_p = 0.05 pu
omega_c = 5 hz

[scenario]
p_ref = 0.4 pu
event = 0.2 p_ref 0.5
event = 1.0 grid scr=10
";

    #[test]
    fn parses_sample() {
        let c = RunConfig::parse(SAMPLE).unwrap();
        assert!((c.system.grid.scr() - 20.0).abs() < 1e-12);
        assert!((c.scheme.psc.k_p - 0.05 * c.omega_1()).abs() < 1e-12);
        assert_eq!(c.scheme.psc.variant, PscVariant::DroopLpf { omega_c: 2.0 * PI * 5.0 });
        assert_eq!(c.scenario.events.len(), 2);
        assert_eq!(c.scenario.events[0].action, Action::StepPref(0.5));
        match c.scenario.events[1].action {
            Action::SetGrid(g) => {
                assert!((g.scr() - 10.0).abs() < 1e-12);
                assert!((g.x_over_r() - 10.0).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn si_units_convert() {
        let c = RunConfig::parse("[converter]\nl_f = 3 mH\nc_f = 10 uF\nr_f = 0.0605 ohm\n").unwrap();
        let d = ConverterParams::table_iv(&PerUnitBase::default());
        assert!((c.system.conv.l_f - d.l_f).abs() < 1e-15);
        assert!((c.system.conv.c_f - d.c_f).abs() < 1e-15);
        assert!((c.system.conv.r_f - 0.0605 / PerUnitBase::default().z_base).abs() < 1e-15);
    }

    #[test]
    fn strictness() {
        let bad = [
            "[grid]\nscr = 5\nfoo = 1\n",
            "[nope]\n",
            "[grid]\nscr = 5\nscr = 6\n",
            "[control]\npsc = pure_droop\nomega_c = 3 rad_s\n",
            "[converter]\nl_f = 0.07\n",
            "[converter]\nl_f = 0.07 hz\n",
            "[grid]\nscr = 5\nx_g = 0.2 pu\n",
            "[scenario]\nevent = 0.2 jump 3\n",
            "[scenario]\nduration = 1\nevent = 3 p_ref 0.1\n",
            "scr = 5\n",
            "[control]\nstructure = open_loop\nvvc_kp = 3\n",
        ];
        for text in bad {
            let r = RunConfig::parse(text);
            assert!(matches!(r, Err(Error::Config(_))), "accepted: {text:?} -> {r:?}");
        }
    }

    #[test]
    fn dump_round_trips() {
        let texts = [
            SAMPLE,
            "[control]\nstructure = closed_loop\nadd_on = gfm_vcc\n",
            "[control]\nstructure = closed_loop\nadd_on = active_susceptance\nk_vq = 0.5\npsc = lead_lag\nt_lead = 0.01\nt_lag = 0.002\n",
            "[control]\nvr_r_a = 0.2 pu\nprf_r_a = 0.2 pu\npdc = on\navc = on\n[grid]\nscr = 3\nx_over_r = inf\n[analysis]\nout_dir = /tmp/x\nloop_mode = outer_open\n",
        ];
        for t in texts {
            let a = RunConfig::parse(t).unwrap();
            let b = RunConfig::parse(&a.dump()).unwrap();
            assert_eq!(a, b, "dump:\n{}", a.dump());
        }
    }

    #[test]
    fn sweep_parameters() {
        let mut c = RunConfig::parse(SAMPLE).unwrap();
        c.set_param("scr", 1.5).unwrap();
        assert!((c.system.grid.scr() - 1.5).abs() < 1e-12);
        assert!((c.system.grid.x_over_r() - 10.0).abs() < 1e-9);
        assert!(c.set_param("vvc_kp", 1.0).is_err());
        assert!(c.set_param("bogus", 1.0).is_err());
    }
}

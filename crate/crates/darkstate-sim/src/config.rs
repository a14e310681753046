//! Run configuration: a TOML document overlaid on a named preset.
//!
//! A document can name a `preset` and override any subset of keys, or spell
//! out a complete [model] block from scratch. Unknown keys are rejected.
//! Units: rates and frequencies in MHz, times in inverse MHz (microseconds).
//!
//! Dotted `key=value` overrides (the CLI's `--set`) are applied to the raw
//! document before validation, so they go through the same checks as file
//! input.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::HilbertSpace;
use crate::integrate::{IntegratorConfig, Method};
use crate::model::{ChannelToggles, InitialState, ModelParams};
use crate::sweep::{AxisParam, AxisSpec, K0ScanSpec, SweepOptions};

/// Initial state as written in a config: `"dark(n)"`, `"ket(n,s1,s2)"`, or
/// an explicit `[re, im]` amplitude list over the full basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Name(String),
    Amplitudes(Vec<[f64; 2]>),
}

impl InitialSpec {
    pub fn to_state(&self) -> Result<InitialState> {
        match self {
            InitialSpec::Name(s) => parse_initial_name(s),
            InitialSpec::Amplitudes(v) => Ok(InitialState::Explicit(
                v.iter().map(|[re, im]| Complex64::new(*re, *im)).collect(),
            )),
        }
    }
}

fn parse_initial_name(s: &str) -> Result<InitialState> {
    let body = s.trim();
    let inner = |prefix: &str| -> Option<&str> {
        body.strip_prefix(prefix)?.strip_suffix(')')
    };
    if let Some(arg) = inner("dark(") {
        let n: usize = arg
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("initial: bad photon index in {body:?}")))?;
        return Ok(InitialState::Dark(n));
    }
    if let Some(args) = inner("ket(") {
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "initial: ket takes (n, s1, s2), got {body:?}"
            )));
        }
        let n: usize = parts[0]
            .parse()
            .map_err(|_| Error::Config(format!("initial: bad photon number in {body:?}")))?;
        let s1: u8 = parts[1]
            .parse()
            .map_err(|_| Error::Config(format!("initial: bad atom 1 state in {body:?}")))?;
        let s2: u8 = parts[2]
            .parse()
            .map_err(|_| Error::Config(format!("initial: bad atom 2 state in {body:?}")))?;
        if s1 > 1 || s2 > 1 {
            return Err(Error::Config(format!(
                "initial: atom states must be 0 or 1 in {body:?}"
            )));
        }
        return Ok(InitialState::Ket(crate::hilbert::BasisState { n, s1, s2 }));
    }
    Err(Error::Config(format!(
        "initial: expected dark(n), ket(n,s1,s2), or an amplitude list, got {body:?}"
    )))
}

fn channels_to_names(t: ChannelToggles) -> Vec<String> {
    let mut v = Vec::new();
    if t.photon_out {
        v.push("out".to_string());
    }
    if t.photon_in {
        v.push("in".to_string());
    }
    if t.dephasing1 {
        v.push("deph1".to_string());
    }
    if t.dephasing2 {
        v.push("deph2".to_string());
    }
    v
}

fn channels_from_names(names: &[String]) -> Result<ChannelToggles> {
    let mut t = ChannelToggles {
        photon_out: false,
        photon_in: false,
        dephasing1: false,
        dephasing2: false,
    };
    for name in names {
        match name.as_str() {
            "out" => t.photon_out = true,
            "in" => t.photon_in = true,
            "deph1" => t.dephasing1 = true,
            "deph2" => t.dephasing2 = true,
            other => {
                return Err(Error::Config(format!(
                    "channels: unknown channel {other:?} (expected out, in, deph1, deph2)"
                )))
            }
        }
    }
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// Stationarity band width for T_stab.
    pub epsilon: f64,
    /// Dephasing axes drive both atoms' rates together.
    pub tie_dephasing: bool,
    /// Integrate with the free-evolution frequency removed.
    pub rotating: bool,
}

impl Default for SweepBlock {
    fn default() -> Self {
        SweepBlock {
            epsilon: 1e-12,
            tie_dephasing: false,
            rotating: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapBlock {
    pub x: AxisSpec,
    pub y: AxisSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagonalBlock {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GminBlock {
    pub g_values: Vec<f64>,
    pub gamma: DiagonalBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct K0Block {
    pub g1_values: Vec<f64>,
    pub k_min: f64,
    pub k_max: f64,
    /// Classification diagonals span (gamma_max/points, gamma_max]: the
    /// zero-dephasing endpoint is skipped because it classifies nothing.
    pub gamma_max: f64,
    pub gamma_points: usize,
}

impl K0Block {
    pub fn to_spec(&self) -> K0ScanSpec {
        K0ScanSpec {
            g1_values: self.g1_values.clone(),
            k_lo: self.k_min,
            k_hi: self.k_max,
            gamma_max: self.gamma_max,
            gamma_points: self.gamma_points,
        }
    }
}

/// Fully resolved run description; everything commands need.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    pub model: ModelParams,
    pub n_max: usize,
    pub channels: ChannelToggles,
    pub initial: InitialSpec,
    pub integrator: IntegratorConfig,
    pub sweep: SweepBlock,
    pub heatmap: Option<HeatmapBlock>,
    pub diagonal: Option<DiagonalBlock>,
    pub gmin: Option<GminBlock>,
    pub k0: Option<K0Block>,
}

impl RunConfig {
    pub fn space(&self) -> Result<HilbertSpace> {
        HilbertSpace::new(self.n_max)
    }

    pub fn initial_state(&self) -> Result<InitialState> {
        self.initial.to_state()
    }

    pub fn sweep_options(&self, threads: usize) -> SweepOptions {
        SweepOptions {
            epsilon: self.sweep.epsilon,
            tie_dephasing: self.sweep.tie_dephasing,
            threads,
            rotating: self.sweep.rotating,
        }
    }

    /// Explicit document that reparses to this exact config.
    pub fn to_doc(&self) -> ConfigDoc {
        ConfigDoc {
            preset: Some(self.preset.clone()),
            model: Some(ModelOverlay {
                omega: Some(self.model.omega),
                g1: Some(self.model.g1),
                g2: Some(self.model.g2),
                gamma_out: Some(self.model.gamma_out),
                gamma_in: Some(self.model.gamma_in),
                gamma_deph1: Some(self.model.gamma_deph1),
                gamma_deph2: Some(self.model.gamma_deph2),
            }),
            n_max: Some(self.n_max),
            channels: Some(channels_to_names(self.channels)),
            initial: Some(self.initial.clone()),
            integrator: Some(IntegratorOverlay {
                method: Some(self.integrator.method),
                dt: Some(self.integrator.dt),
                t_end: Some(self.integrator.t_end),
                record_stride: Some(self.integrator.record_stride),
                monitor_tol: Some(self.integrator.monitor_tol),
                sanitize: Some(self.integrator.sanitize),
                stop_epsilon: self.integrator.stop_epsilon,
            }),
            sweep: Some(SweepOverlay {
                epsilon: Some(self.sweep.epsilon),
                tie_dephasing: Some(self.sweep.tie_dephasing),
                rotating: Some(self.sweep.rotating),
            }),
            heatmap: self.heatmap.as_ref().map(HeatmapOverlay::full),
            diagonal: self.diagonal.as_ref().map(DiagonalOverlay::full),
            gmin: self.gmin.as_ref().map(GminOverlay::full),
            k0: self.k0.as_ref().map(K0Overlay::full),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&self.to_doc()).expect("config serializes")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverlay {
    pub omega: Option<f64>,
    pub g1: Option<f64>,
    pub g2: Option<f64>,
    pub gamma_out: Option<f64>,
    pub gamma_in: Option<f64>,
    pub gamma_deph1: Option<f64>,
    pub gamma_deph2: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorOverlay {
    pub method: Option<Method>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub record_stride: Option<usize>,
    pub monitor_tol: Option<f64>,
    pub sanitize: Option<bool>,
    pub stop_epsilon: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOverlay {
    pub epsilon: Option<f64>,
    pub tie_dephasing: Option<bool>,
    pub rotating: Option<bool>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisOverlay {
    pub param: Option<AxisParam>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub points: Option<usize>,
}

impl AxisOverlay {
    fn full(spec: AxisSpec) -> Self {
        AxisOverlay {
            param: Some(spec.param),
            min: Some(spec.min),
            max: Some(spec.max),
            points: Some(spec.points),
        }
    }

    fn merge(&self, base: Option<AxisSpec>, path: &str) -> Result<AxisSpec> {
        let need = |field: &str, v: Option<f64>| {
            v.ok_or_else(|| Error::Config(format!("missing key {path}.{field}")))
        };
        match base {
            Some(mut ax) => {
                if let Some(v) = self.param {
                    ax.param = v;
                }
                if let Some(v) = self.min {
                    ax.min = v;
                }
                if let Some(v) = self.max {
                    ax.max = v;
                }
                if let Some(v) = self.points {
                    ax.points = v;
                }
                Ok(ax)
            }
            None => Ok(AxisSpec {
                param: self.param.ok_or_else(|| {
                    Error::Config(format!("missing key {path}.param"))
                })?,
                min: need("min", self.min)?,
                max: need("max", self.max)?,
                points: self
                    .points
                    .ok_or_else(|| Error::Config(format!("missing key {path}.points")))?,
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapOverlay {
    pub x: Option<AxisOverlay>,
    pub y: Option<AxisOverlay>,
}

impl HeatmapOverlay {
    fn full(b: &HeatmapBlock) -> Self {
        HeatmapOverlay {
            x: Some(AxisOverlay::full(b.x)),
            y: Some(AxisOverlay::full(b.y)),
        }
    }

    fn merge(&self, base: Option<HeatmapBlock>) -> Result<HeatmapBlock> {
        let x = self
            .x
            .unwrap_or_default()
            .merge(base.map(|b| b.x), "heatmap.x")?;
        let y = self
            .y
            .unwrap_or_default()
            .merge(base.map(|b| b.y), "heatmap.y")?;
        Ok(HeatmapBlock { x, y })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagonalOverlay {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub points: Option<usize>,
}

impl DiagonalOverlay {
    fn full(b: &DiagonalBlock) -> Self {
        DiagonalOverlay {
            min: Some(b.min),
            max: Some(b.max),
            points: Some(b.points),
        }
    }

    fn merge(&self, base: Option<DiagonalBlock>, path: &str) -> Result<DiagonalBlock> {
        let need = |field: &str, v: Option<f64>| {
            v.ok_or_else(|| Error::Config(format!("missing key {path}.{field}")))
        };
        match base {
            Some(mut d) => {
                if let Some(v) = self.min {
                    d.min = v;
                }
                if let Some(v) = self.max {
                    d.max = v;
                }
                if let Some(v) = self.points {
                    d.points = v;
                }
                Ok(d)
            }
            None => Ok(DiagonalBlock {
                min: need("min", self.min)?,
                max: need("max", self.max)?,
                points: self
                    .points
                    .ok_or_else(|| Error::Config(format!("missing key {path}.points")))?,
            }),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GminOverlay {
    pub g_values: Option<Vec<f64>>,
    pub gamma: Option<DiagonalOverlay>,
}

impl GminOverlay {
    fn full(b: &GminBlock) -> Self {
        GminOverlay {
            g_values: Some(b.g_values.clone()),
            gamma: Some(DiagonalOverlay::full(&b.gamma)),
        }
    }

    fn merge(&self, base: Option<&GminBlock>) -> Result<GminBlock> {
        let g_values = match (&self.g_values, base) {
            (Some(v), _) => v.clone(),
            (None, Some(b)) => b.g_values.clone(),
            (None, None) => {
                return Err(Error::Config("missing key gmin.g_values".into()))
            }
        };
        let gamma = self
            .gamma
            .unwrap_or_default()
            .merge(base.map(|b| b.gamma), "gmin.gamma")?;
        Ok(GminBlock { g_values, gamma })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct K0Overlay {
    pub g1_values: Option<Vec<f64>>,
    pub k_min: Option<f64>,
    pub k_max: Option<f64>,
    pub gamma_max: Option<f64>,
    pub gamma_points: Option<usize>,
}

impl K0Overlay {
    fn full(b: &K0Block) -> Self {
        K0Overlay {
            g1_values: Some(b.g1_values.clone()),
            k_min: Some(b.k_min),
            k_max: Some(b.k_max),
            gamma_max: Some(b.gamma_max),
            gamma_points: Some(b.gamma_points),
        }
    }

    fn merge(&self, base: Option<&K0Block>) -> Result<K0Block> {
        let need = |field: &str, v: Option<f64>, fallback: Option<f64>| {
            v.or(fallback)
                .ok_or_else(|| Error::Config(format!("missing key k0.{field}")))
        };
        let g1_values = match (&self.g1_values, base) {
            (Some(v), _) => v.clone(),
            (None, Some(b)) => b.g1_values.clone(),
            (None, None) => return Err(Error::Config("missing key k0.g1_values".into())),
        };
        Ok(K0Block {
            g1_values,
            k_min: need("k_min", self.k_min, base.map(|b| b.k_min))?,
            k_max: need("k_max", self.k_max, base.map(|b| b.k_max))?,
            gamma_max: need("gamma_max", self.gamma_max, base.map(|b| b.gamma_max))?,
            gamma_points: self
                .gamma_points
                .or(base.map(|b| b.gamma_points))
                .ok_or_else(|| Error::Config("missing key k0.gamma_points".into()))?,
        })
    }
}

/// Raw document as written by the user; every field optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub preset: Option<String>,
    pub model: Option<ModelOverlay>,
    pub n_max: Option<usize>,
    pub channels: Option<Vec<String>>,
    pub initial: Option<InitialSpec>,
    pub integrator: Option<IntegratorOverlay>,
    pub sweep: Option<SweepOverlay>,
    pub heatmap: Option<HeatmapOverlay>,
    pub diagonal: Option<DiagonalOverlay>,
    pub gmin: Option<GminOverlay>,
    pub k0: Option<K0Overlay>,
}

fn require(name: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("missing key model.{name} (no preset named)")))
}

impl ConfigDoc {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.preset {
            Some(name) => preset(name)?,
            None => {
                // No preset: the model block must be complete.
                let m = self.model.unwrap_or_default();
                let model = ModelParams {
                    omega: require("omega", m.omega)?,
                    g1: require("g1", m.g1)?,
                    g2: require("g2", m.g2)?,
                    gamma_out: require("gamma_out", m.gamma_out)?,
                    gamma_in: require("gamma_in", m.gamma_in)?,
                    gamma_deph1: require("gamma_deph1", m.gamma_deph1)?,
                    gamma_deph2: require("gamma_deph2", m.gamma_deph2)?,
                };
                let sweep = SweepBlock::default();
                let mut integ = IntegratorConfig {
                    t_end: 10.0,
                    ..Default::default()
                };
                integ.dt = auto_dt(&model, sweep.rotating);
                RunConfig {
                    preset: "custom".to_string(),
                    model,
                    n_max: 2,
                    channels: ChannelToggles::default(),
                    initial: InitialSpec::Name("dark(0)".to_string()),
                    integrator: integ,
                    sweep,
                    heatmap: None,
                    diagonal: None,
                    gmin: None,
                    k0: None,
                }
            }
        };

        if let Some(m) = &self.model {
            let p = &mut cfg.model;
            if let Some(v) = m.omega {
                p.omega = v;
            }
            if let Some(v) = m.g1 {
                p.g1 = v;
            }
            if let Some(v) = m.g2 {
                p.g2 = v;
            }
            if let Some(v) = m.gamma_out {
                p.gamma_out = v;
            }
            if let Some(v) = m.gamma_in {
                p.gamma_in = v;
            }
            if let Some(v) = m.gamma_deph1 {
                p.gamma_deph1 = v;
            }
            if let Some(v) = m.gamma_deph2 {
                p.gamma_deph2 = v;
            }
        }
        if let Some(v) = self.n_max {
            cfg.n_max = v;
        }
        if let Some(names) = &self.channels {
            cfg.channels = channels_from_names(names)?;
        }
        if let Some(init) = &self.initial {
            cfg.initial = init.clone();
        }
        if let Some(s) = &self.sweep {
            if let Some(v) = s.epsilon {
                cfg.sweep.epsilon = v;
            }
            if let Some(v) = s.tie_dephasing {
                cfg.sweep.tie_dephasing = v;
            }
            if let Some(v) = s.rotating {
                cfg.sweep.rotating = v;
            }
        }
        if let Some(i) = &self.integrator {
            let c = &mut cfg.integrator;
            if let Some(v) = i.method {
                c.method = v;
                c.sanitize = IntegratorConfig::default_sanitize(v);
            }
            if let Some(v) = i.t_end {
                c.t_end = v;
            }
            if let Some(v) = i.record_stride {
                c.record_stride = v;
            }
            if let Some(v) = i.monitor_tol {
                c.monitor_tol = v;
            }
            if let Some(v) = i.dt {
                c.dt = v;
            }
            if let Some(v) = i.sanitize {
                c.sanitize = v;
            }
            if i.stop_epsilon.is_some() {
                c.stop_epsilon = i.stop_epsilon;
            }
        }
        if let Some(h) = &self.heatmap {
            cfg.heatmap = Some(h.merge(cfg.heatmap)?);
        }
        if let Some(d) = &self.diagonal {
            cfg.diagonal = Some(d.merge(cfg.diagonal, "diagonal")?);
        }
        if let Some(g) = &self.gmin {
            cfg.gmin = Some(g.merge(cfg.gmin.as_ref())?);
        }
        if let Some(k) = &self.k0 {
            cfg.k0 = Some(k.merge(cfg.k0.as_ref())?);
        }

        cfg.model.validate()?;
        cfg.integrator.validate()?;
        cfg.initial.to_state()?;
        if !(cfg.sweep.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "sweep.epsilon must be positive, got {}",
                cfg.sweep.epsilon
            )));
        }
        Ok(cfg)
    }
}

/// Step size that resolves the fastest retained scale by three decades.
fn auto_dt(params: &ModelParams, rotating: bool) -> f64 {
    let mut p = *params;
    if rotating {
        p.omega = 0.0;
    }
    crate::integrate::default_dt(&p)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &[])
}

/// Parse with dotted-path overrides applied to the raw document first.
pub fn parse_config_with(text: &str, sets: &[String]) -> Result<RunConfig> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| Error::Config(format!("TOML parse error: {e}")))?;
    for set in sets {
        apply_override(&mut table, set)?;
    }
    let doc: ConfigDoc = toml::Value::Table(table)
        .try_into()
        .map_err(|e| Error::Config(format!("config error: {e}")))?;
    doc.resolve()
}

fn parse_scalar(s: &str) -> toml::Value {
    if let Ok(b) = s.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(i) = s.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = s.parse::<f64>() {
        return toml::Value::Float(f);
    }
    if let Ok(frag) = format!("v = {s}").parse::<toml::Table>() {
        return frag["v"].clone();
    }
    toml::Value::String(s.to_string())
}

/// Apply one `dotted.path=value` override, creating tables along the path.
pub fn apply_override(table: &mut toml::Table, set: &str) -> Result<()> {
    let (path, value) = set
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {set:?} is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override {set:?} has an empty path segment")));
    }
    let mut cursor = table;
    for k in &keys[..keys.len() - 1] {
        cursor = cursor
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                Error::Config(format!("override {set:?}: {k} is not a table"))
            })?;
    }
    cursor.insert(
        keys[keys.len() - 1].to_string(),
        parse_scalar(value.trim()),
    );
    Ok(())
}

/// Named parameter sets for each studied scenario. Couplings, exchange
/// rates, and initial states follow the scenario definitions; step sizes
/// and horizons are chosen for stability and stabilization coverage.
pub fn preset(name: &str) -> Result<RunConfig> {
    let rk4 = |dt: f64, t_end: f64, record_stride: usize| IntegratorConfig {
        method: Method::Rk4,
        dt,
        t_end,
        record_stride,
        monitor_tol: 1e-6,
        sanitize: false,
        stop_epsilon: None,
    };
    let deph_axis = |max: f64| AxisSpec {
        param: AxisParam::GammaDeph1,
        min: 0.0,
        max,
        points: 41,
    };
    let deph_axis2 = |max: f64| AxisSpec {
        param: AxisParam::GammaDeph2,
        min: 0.0,
        max,
        points: 41,
    };
    let base = |model: ModelParams, integ: IntegratorConfig| RunConfig {
        preset: name.to_string(),
        model,
        n_max: 2,
        channels: ChannelToggles::default(),
        initial: InitialSpec::Name("dark(0)".to_string()),
        integrator: integ,
        sweep: SweepBlock::default(),
        heatmap: None,
        diagonal: None,
        gmin: None,
        k0: None,
    };

    let strong = ModelParams {
        omega: 1000.0,
        g1: 30.0,
        g2: 50.0,
        gamma_out: 20.0,
        gamma_in: 10.0,
        gamma_deph1: 20.0,
        gamma_deph2: 20.0,
    };
    let symmetric30 = ModelParams {
        omega: 1000.0,
        g1: 30.0,
        g2: 30.0,
        gamma_out: 10.0,
        gamma_in: 3.0,
        gamma_deph1: 0.0,
        gamma_deph2: 0.0,
    };
    let weak = ModelParams {
        omega: 1000.0,
        g1: 2.0,
        g2: 2.0,
        gamma_out: 10.0,
        gamma_in: 3.0,
        gamma_deph1: 0.0,
        gamma_deph2: 0.0,
    };
    let warm = ModelParams {
        omega: 1000.0,
        g1: 30.0,
        g2: 70.0,
        gamma_out: 10.0,
        gamma_in: 8.0,
        gamma_deph1: 0.0,
        gamma_deph2: 0.0,
    };

    let mut cfg = match name {
        // Reference dynamics: asymmetric couplings, all channels, dark start.
        "fig1" => base(strong, rk4(2e-3, 2.0, 10)),
        // Channel ablation: dephasing only.
        "fig2a" => {
            let mut c = base(strong, rk4(2e-3, 2.0, 10));
            c.channels = ChannelToggles {
                photon_out: false,
                photon_in: false,
                dephasing1: true,
                dephasing2: true,
            };
            c
        }
        // Ablation: dephasing plus photon outflow.
        "fig2b" => {
            let mut c = base(strong, rk4(2e-3, 2.0, 10));
            c.channels = ChannelToggles {
                photon_out: true,
                photon_in: false,
                dephasing1: true,
                dephasing2: true,
            };
            c
        }
        // Ablation: all four channels (same physics as fig1).
        "fig2c" => base(strong, rk4(2e-3, 2.0, 10)),
        // Dephasing-rate heatmap at symmetric couplings, wide range.
        "fig3" => {
            let mut c = base(symmetric30, rk4(2e-3, 50.0, 25));
            c.heatmap = Some(HeatmapBlock {
                x: deph_axis(200.0),
                y: deph_axis2(200.0),
            });
            c
        }
        // Weak-coupling regime: wide heatmap plus a tied-rate diagonal that
        // brackets the stabilization-time minimum on both sides.
        "fig4" => {
            let mut c = base(weak, rk4(4e-3, 25_000.0, 8));
            c.integrator.stop_epsilon = Some(1e-12);
            c.heatmap = Some(HeatmapBlock {
                x: deph_axis(200.0),
                y: deph_axis2(200.0),
            });
            c.diagonal = Some(DiagonalBlock {
                min: 0.0,
                max: 20.0,
                points: 81,
            });
            c
        }
        // Optimal dephasing rate versus symmetric coupling strength.
        "gmin" => {
            let mut c = base(weak, rk4(0.01, 25_000.0, 8));
            c.integrator.stop_epsilon = Some(1e-12);
            c.gmin = Some(GminBlock {
                g_values: (1..=10).map(f64::from).collect(),
                gamma: DiagonalBlock {
                    min: 0.0,
                    max: 40.0,
                    points: 81,
                },
            });
            c
        }
        // Non-dark start at high thermal occupation.
        "fig7" => {
            let mut c = base(warm, rk4(1.25e-3, 400.0, 8));
            c.initial = InitialSpec::Name("ket(0,0,1)".to_string());
            c.heatmap = Some(HeatmapBlock {
                x: deph_axis(300.0),
                y: deph_axis2(300.0),
            });
            c
        }
        // Temperature sweep: thermal parameter against tied dephasing.
        "fig8" => {
            let mut c = base(warm, rk4(2.5e-3, 400.0, 40));
            c.initial = InitialSpec::Name("ket(0,0,1)".to_string());
            c.sweep.tie_dephasing = true;
            c.heatmap = Some(HeatmapBlock {
                x: AxisSpec {
                    param: AxisParam::Mu,
                    min: 0.1,
                    max: 0.9,
                    points: 41,
                },
                y: deph_axis(100.0),
            });
            c
        }
        // Coupling-ratio threshold between Zeno-first and anti-Zeno-first.
        // Dark start so dephasing protection competes with acceleration;
        // the classification grid starts at gamma = 20 where the slope of
        // T_stab distinguishes the two patterns.
        "k0" => {
            let mut c = base(warm, rk4(1.4e-3, 400.0, 4));
            c.k0 = Some(K0Block {
                g1_values: vec![30.0, 45.0, 60.0],
                k_min: 1.0,
                k_max: 3.0,
                gamma_max: 100.0,
                gamma_points: 5,
            });
            c
        }
        // Three-state truncation under pure dephasing.
        "reduced" => {
            let mut c = base(
                ModelParams {
                    omega: 1000.0,
                    g1: 30.0,
                    g2: 30.0,
                    gamma_out: 10.0,
                    gamma_in: 3.0,
                    gamma_deph1: 20.0,
                    gamma_deph2: 20.0,
                },
                rk4(1e-3, 5.0, 10),
            );
            c.channels = ChannelToggles {
                photon_out: false,
                photon_in: false,
                dephasing1: true,
                dephasing2: true,
            };
            c
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?} (expected fig1, fig2a, fig2b, fig2c, \
                 fig3, fig4, fig7, fig8, gmin, k0, reduced)"
            )))
        }
    };
    debug_assert!(cfg.model.validate().is_ok());
    cfg.preset = name.to_string();
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_preset_matches_documented_parameters() {
        let c = preset("fig1").unwrap();
        assert_eq!(c.model.omega, 1000.0);
        assert_eq!(c.model.g1, 30.0);
        assert_eq!(c.model.g2, 50.0);
        assert_eq!(c.model.gamma_out, 20.0);
        assert_eq!(c.model.gamma_in, 10.0);
        assert_eq!(c.model.gamma_deph1, 20.0);
        assert_eq!(c.model.gamma_deph2, 20.0);
        assert!(c.channels.photon_out && c.channels.photon_in);
        assert_eq!(c.initial, InitialSpec::Name("dark(0)".into()));
    }

    #[test]
    fn fig4_preset_encodes_the_weak_coupling_environment() {
        let c = preset("fig4").unwrap();
        assert_eq!(c.model.g1, 2.0);
        assert_eq!(c.model.g2, 2.0);
        assert_eq!(c.model.gamma_out, 10.0);
        assert_eq!(c.model.gamma_in, 3.0);
        let mu = crate::model::thermal_parameter(&c.model).unwrap();
        assert!((mu - 0.3).abs() < 1e-12);
        let d = c.diagonal.unwrap();
        assert_eq!((d.min, d.max, d.points), (0.0, 20.0, 81));
    }

    #[test]
    fn unknown_preset_is_reported_by_name() {
        let err = preset("fig99").unwrap_err();
        assert!(err.to_string().contains("fig99"));
    }

    #[test]
    fn parse_overlays_preset_with_overrides() {
        let text = r#"
            preset = "fig1"

            [model]
            g2 = 40.0

            [integrator]
            t_end = 1.0
        "#;
        let c = parse_config(text).unwrap();
        assert_eq!(c.model.g2, 40.0);
        assert_eq!(c.model.g1, 30.0);
        assert_eq!(c.integrator.t_end, 1.0);
        assert_eq!(c.integrator.dt, 2e-3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config("preset = \"fig1\"\nbogus = 3\n").unwrap_err();
        assert!(err.to_string().contains("bogus") || err.to_string().contains("unknown"));
        let err = parse_config("preset = \"fig1\"\n[model]\ncoupling = 3.0\n").unwrap_err();
        assert!(err.to_string().contains("coupling") || err.to_string().contains("unknown"));
    }

    #[test]
    fn negative_rates_are_rejected_after_overlay() {
        let err = parse_config("preset = \"fig1\"\n[model]\ngamma_out = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("gamma_out"));
    }

    #[test]
    fn custom_model_requires_every_field() {
        let err = parse_config("[model]\nomega = 1000.0\ng1 = 5.0\n").unwrap_err();
        assert!(err.to_string().contains("model.g2"));
        let full = r#"
            [model]
            omega = 1000.0
            g1 = 5.0
            g2 = 5.0
            gamma_out = 10.0
            gamma_in = 3.0
            gamma_deph1 = 1.0
            gamma_deph2 = 1.0
        "#;
        let c = parse_config(full).unwrap();
        assert_eq!(c.preset, "custom");
        // Rotating-frame default step resolves the fastest rate by 1e3.
        assert!((c.integrator.dt - 1e-3 / 10.0).abs() < 1e-15);
    }

    #[test]
    fn set_overrides_reach_nested_keys() {
        let sets = vec![
            "model.g1=40".to_string(),
            "integrator.dt=0.001".to_string(),
            "sweep.tie_dephasing=true".to_string(),
            "k0.g1_values=[10.0, 20.0]".to_string(),
        ];
        let c = parse_config_with("preset = \"k0\"", &sets).unwrap();
        assert_eq!(c.model.g1, 40.0);
        assert_eq!(c.integrator.dt, 0.001);
        assert!(c.sweep.tie_dephasing);
        // Partial block override keeps the preset's remaining fields.
        let k0 = c.k0.as_ref().unwrap();
        assert_eq!(k0.g1_values, vec![10.0, 20.0]);
        assert_eq!(k0.k_max, 3.0);
        let c2 = parse_config_with(
            "preset = \"fig3\"",
            &["heatmap.x.points=11".to_string()],
        )
        .unwrap();
        let h = c2.heatmap.unwrap();
        assert_eq!(h.x.points, 11);
        assert_eq!(h.x.max, 200.0);
        assert_eq!(h.y.points, 41);
        // A block override without a preset base must name what's missing.
        let err = parse_config_with(
            "preset = \"fig1\"",
            &["k0.gamma_max=2.0".to_string()],
        )
        .unwrap_err();
        assert!(err.to_string().contains("k0.g1_values"), "{err}");
    }

    #[test]
    fn malformed_overrides_are_rejected() {
        let mut t = toml::Table::new();
        assert!(apply_override(&mut t, "no_equals").is_err());
        assert!(apply_override(&mut t, "a..b=1").is_err());
        // Path through a scalar is an error.
        let mut t: toml::Table = "x = 3".parse().unwrap();
        assert!(apply_override(&mut t, "x.y=1").is_err());
    }

    #[test]
    fn initial_state_specs_parse() {
        assert_eq!(
            InitialSpec::Name("dark(1)".into()).to_state().unwrap(),
            InitialState::Dark(1)
        );
        assert_eq!(
            InitialSpec::Name("ket(0, 0, 1)".into()).to_state().unwrap(),
            InitialState::Ket(crate::hilbert::BasisState { n: 0, s1: 0, s2: 1 })
        );
        assert!(InitialSpec::Name("dark(x)".into()).to_state().is_err());
        assert!(InitialSpec::Name("ket(0,2,0)".into()).to_state().is_err());
        assert!(InitialSpec::Name("vacuum".into()).to_state().is_err());
        let amps = InitialSpec::Amplitudes(vec![[1.0, 0.0], [0.0, 1.0]]);
        match amps.to_state().unwrap() {
            InitialState::Explicit(v) => assert_eq!(v.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn every_preset_round_trips_through_toml() {
        for name in [
            "fig1", "fig2a", "fig2b", "fig2c", "fig3", "fig4", "fig7", "fig8", "gmin", "k0",
            "reduced",
        ] {
            let c = preset(name).unwrap();
            let text = c.to_toml();
            let back = parse_config(&text).unwrap_or_else(|e| {
                panic!("preset {name} failed round-trip: {e}\n{text}")
            });
            assert_eq!(back, c, "round-trip mismatch for {name}");
        }
    }

    #[test]
    fn channel_lists_parse_and_reject_unknown_names() {
        let c = parse_config("preset = \"fig1\"\nchannels = [\"out\", \"deph1\"]\n").unwrap();
        assert!(c.channels.photon_out);
        assert!(!c.channels.photon_in);
        assert!(c.channels.dephasing1);
        assert!(!c.channels.dephasing2);
        let err = parse_config("preset = \"fig1\"\nchannels = [\"decay\"]\n").unwrap_err();
        assert!(err.to_string().contains("decay"));
    }
}

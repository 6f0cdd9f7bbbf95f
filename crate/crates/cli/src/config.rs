//! Flat dotted-key configuration.
//!
//! Values are layered: defaults for the model kind, then the config file,
//! then `--set` overrides. Nested TOML tables are flattened, so
//! `[schedule]\ntau = 0.4` and `schedule.tau = 0.4` mean the same thing.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use gsprobe_core::analysis::AmplitudeMethod;
use gsprobe_core::couplings::{CouplingNorm, DEFAULT_BETA, DEFAULT_MU};
use gsprobe_core::model::{PostStop, RampKind};
use gsprobe_core::propagator::HamiltonianSampling;
use toml::Value;

use crate::error::CliError;

/// Largest chain the dense spectrum routines accept.
pub const MAX_SITES: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Tfim,
    LandauZener,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingSource {
    Phonon,
    PowerLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBlock {
    pub kind: ModelKind,
    pub n_sites: usize,
    pub couplings: CouplingSource,
    pub mu: f64,
    pub beta: f64,
    pub alpha: f64,
    pub j0: f64,
    pub j_norm: CouplingNorm,
    pub j_sign: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleBlock {
    pub kind: RampKind,
    pub b0: f64,
    pub tau: f64,
    pub t_stop_factor: f64,
    pub b_final: f64,
    /// Stop the exponential ramp at this field instead of `t_stop_factor · τ`.
    pub b_stop: Option<f64>,
    pub post_stop: PostStop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorBlock {
    pub dt: f64,
    pub tolerance: f64,
    pub record_stride: usize,
    /// `None` means four periods of the minimal gap.
    pub t_meas: Option<f64>,
    pub sampling: HamiltonianSampling,
    pub center_energy: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Angle {
    pub value: f64,
    /// Text as written in the config, e.g. `pi/6`.
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableBlock {
    pub theta: Vec<Angle>,
    pub amplitude_method: AmplitudeMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepBlock {
    pub tau: Vec<f64>,
    pub b_stop: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumBlock {
    pub b_min: f64,
    pub b_max: f64,
    pub points: usize,
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub schedule: ScheduleBlock,
    pub integrator: IntegratorBlock,
    pub observable: ObservableBlock,
    pub sweep: SweepBlock,
    pub spectrum: SpectrumBlock,
    pub degeneracy_tol: f64,
    /// Every key with its resolved value, for echoing into outputs.
    pub resolved: BTreeMap<String, Value>,
}

const KEYS: &[&str] = &[
    "model.kind",
    "model.n_sites",
    "model.couplings",
    "model.mu",
    "model.beta",
    "model.alpha",
    "model.j0",
    "model.j_norm",
    "model.j_sign",
    "schedule.kind",
    "schedule.b0",
    "schedule.tau",
    "schedule.t_stop_factor",
    "schedule.b_final",
    "schedule.b_stop",
    "schedule.post_stop",
    "integrator.dt",
    "integrator.tolerance",
    "integrator.record_stride",
    "integrator.t_meas",
    "integrator.sampling",
    "integrator.center_energy",
    "observable.theta",
    "observable.amplitude_method",
    "sweep.tau",
    "sweep.b_stop",
    "spectrum.b_min",
    "spectrum.b_max",
    "spectrum.points",
    "spectrum.levels",
    "analysis.degeneracy_tol",
];

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| Value::Float(x)).collect())
}

fn strings(v: &[&str]) -> Value {
    Value::Array(v.iter().map(|s| Value::String(s.to_string())).collect())
}

fn defaults(kind: ModelKind) -> BTreeMap<String, Value> {
    let s = |x: &str| Value::String(x.into());
    let f = Value::Float;
    let i = Value::Integer;
    let mut m: BTreeMap<String, Value> = [
        ("model.couplings", s("phonon")),
        ("model.mu", f(DEFAULT_MU)),
        ("model.beta", f(DEFAULT_BETA)),
        ("model.alpha", f(1.0)),
        ("model.j0", f(1.0)),
        ("model.j_norm", s("max")),
        ("model.j_sign", f(1.0)),
        ("schedule.t_stop_factor", f(6.0)),
        ("schedule.b_stop", s("none")),
        ("integrator.dt", f(1e-3)),
        ("integrator.tolerance", f(1e-13)),
        ("integrator.record_stride", i(1)),
        ("integrator.t_meas", s("auto")),
        ("integrator.sampling", s("midpoint")),
        ("integrator.center_energy", Value::Boolean(true)),
        ("observable.theta", strings(&["pi/6", "pi/3", "pi/2"])),
        ("observable.amplitude_method", s("first_extrema")),
        ("spectrum.levels", i(12)),
        ("analysis.degeneracy_tol", f(1e-6)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();

    let specific: Vec<(&str, Value)> = match kind {
        ModelKind::Tfim => vec![
            ("model.kind", s("tfim")),
            ("model.n_sites", i(10)),
            ("schedule.kind", s("exponential")),
            ("schedule.b0", f(5.0)),
            ("schedule.tau", f(0.4)),
            ("schedule.b_final", f(0.0)),
            ("schedule.post_stop", s("quench")),
            (
                "sweep.tau",
                floats(&[
                    0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.6, 0.7, 0.8, 1.0, 1.5, 2.0,
                ]),
            ),
            (
                "sweep.b_stop",
                floats(&(1..=24).map(|k| 0.2 * k as f64).collect::<Vec<_>>()),
            ),
            ("spectrum.b_min", f(0.0)),
            ("spectrum.b_max", f(5.0)),
            ("spectrum.points", i(201)),
        ],
        ModelKind::LandauZener => vec![
            ("model.kind", s("lz")),
            ("model.n_sites", i(1)),
            ("schedule.kind", s("linear")),
            ("schedule.b0", f(-20.0)),
            ("schedule.tau", f(5.0)),
            ("schedule.b_final", f(20.0)),
            ("schedule.post_stop", s("hold")),
            ("sweep.tau", floats(&[1.5, 3.25, 5.0, 9.0])),
            ("sweep.b_stop", floats(&[1.0, 5.0, 10.0, 20.0])),
            ("spectrum.b_min", f(-5.0)),
            ("spectrum.b_max", f(5.0)),
            ("spectrum.points", i(201)),
        ],
    };
    for (k, v) in specific {
        m.insert(k.to_string(), v);
    }
    m
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

/// Parses `key=value`; the value is read as a TOML value when possible and
/// as a bare string otherwise.
pub fn parse_override(s: &str) -> Result<(String, Value), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{s}` is not key=value")))?;
    let key = k.trim().to_string();
    let raw = v.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((key, value))
}

/// Config source: file contents plus overrides, before defaults are applied.
#[derive(Debug, Clone, Default)]
pub struct ConfigLayers {
    pub file: BTreeMap<String, Value>,
    pub overrides: Vec<(String, Value)>,
}

impl ConfigLayers {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("config file: {e}")))?;
        let mut file = BTreeMap::new();
        flatten("", &table, &mut file);
        Ok(Self {
            file,
            overrides: Vec::new(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.overrides.push((key.to_string(), value.into()));
        self
    }

    pub fn with_set(mut self, spec: &str) -> Result<Self, CliError> {
        self.overrides.push(parse_override(spec)?);
        Ok(self)
    }

    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut merged = self.file.clone();
        for (k, v) in &self.overrides {
            merged.insert(k.clone(), v.clone());
        }
        for k in merged.keys() {
            if !KEYS.contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown key `{k}`")));
            }
        }
        let kind = match merged.get("model.kind") {
            None => ModelKind::Tfim,
            Some(v) => parse_model_kind(v)?,
        };
        let mut all = defaults(kind);
        all.extend(merged);
        ExperimentConfig::from_map(all)
    }
}

fn parse_model_kind(v: &Value) -> Result<ModelKind, CliError> {
    match v.as_str() {
        Some("tfim") => Ok(ModelKind::Tfim),
        Some("lz") | Some("landau_zener") => Ok(ModelKind::LandauZener),
        _ => Err(CliError::Config(format!(
            "model.kind must be \"tfim\" or \"lz\", got {v}"
        ))),
    }
}

/// Reads `pi/6`, `2pi/3`, `2*pi/3`, `-pi/4` or a plain number.
pub fn parse_angle(text: &str) -> Option<f64> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let Some(idx) = t.find("pi") else {
        return t.parse().ok();
    };
    let (pre, rest) = (&t[..idx], &t[idx + 2..]);
    let pre = pre.strip_suffix('*').unwrap_or(pre);
    let coef = match pre {
        "" | "+" => 1.0,
        "-" => -1.0,
        p => p.parse::<f64>().ok()?,
    };
    let div = match rest {
        "" => 1.0,
        r => r.strip_prefix('/')?.parse::<f64>().ok()?,
    };
    Some(coef * PI / div)
}

struct Reader<'a> {
    map: &'a BTreeMap<String, Value>,
}

impl Reader<'_> {
    fn get(&self, key: &str) -> &Value {
        self.map.get(key).expect("every key has a default")
    }

    fn err(key: &str, what: &str, v: &Value) -> CliError {
        CliError::Config(format!("{key}: expected {what}, got {v}"))
    }

    fn float(&self, key: &str) -> Result<f64, CliError> {
        let v = self.get(key);
        let x = match v {
            Value::Float(x) => *x,
            Value::Integer(i) => *i as f64,
            _ => return Err(Self::err(key, "a number", v)),
        };
        if !x.is_finite() {
            return Err(Self::err(key, "a finite number", v));
        }
        Ok(x)
    }

    fn positive(&self, key: &str) -> Result<f64, CliError> {
        let x = self.float(key)?;
        if x <= 0.0 {
            return Err(Self::err(key, "a positive number", self.get(key)));
        }
        Ok(x)
    }

    fn count(&self, key: &str) -> Result<usize, CliError> {
        match self.get(key) {
            Value::Integer(i) if *i >= 1 => Ok(*i as usize),
            v => Err(Self::err(key, "a positive integer", v)),
        }
    }

    fn string(&self, key: &str) -> Result<&str, CliError> {
        let v = self.get(key);
        v.as_str().ok_or_else(|| Self::err(key, "a string", v))
    }

    fn boolean(&self, key: &str) -> Result<bool, CliError> {
        let v = self.get(key);
        v.as_bool().ok_or_else(|| Self::err(key, "true or false", v))
    }

    fn optional(&self, key: &str, none_word: &str) -> Result<Option<f64>, CliError> {
        match self.get(key) {
            Value::String(s) if s == none_word => Ok(None),
            _ => self.float(key).map(Some),
        }
    }

    /// Nonempty, finite, strictly ascending list of numbers.
    fn grid(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let v = self.get(key);
        let items = match v {
            Value::Array(a) => a.clone(),
            other => vec![other.clone()],
        };
        let mut out = Vec::with_capacity(items.len());
        for item in &items {
            match item {
                Value::Float(x) if x.is_finite() => out.push(*x),
                Value::Integer(i) => out.push(*i as f64),
                _ => return Err(Self::err(key, "a list of finite numbers", v)),
            }
        }
        if out.is_empty() {
            return Err(Self::err(key, "a nonempty list", v));
        }
        if out.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Self::err(key, "a strictly ascending list", v));
        }
        Ok(out)
    }

    fn angles(&self, key: &str) -> Result<Vec<Angle>, CliError> {
        let v = self.get(key);
        let items = match v {
            Value::Array(a) => a.clone(),
            other => vec![other.clone()],
        };
        let mut out = Vec::new();
        for item in &items {
            let angle = match item {
                Value::Float(x) => Some(Angle {
                    value: *x,
                    label: format!("{x}"),
                }),
                Value::Integer(i) => Some(Angle {
                    value: *i as f64,
                    label: format!("{i}"),
                }),
                Value::String(s) => parse_angle(s).map(|value| Angle {
                    value,
                    label: s.clone(),
                }),
                _ => None,
            };
            match angle {
                Some(a) if a.value.is_finite() && (0.0..=PI / 2.0 + 1e-12).contains(&a.value) => {
                    out.push(Angle {
                        value: a.value.min(PI / 2.0),
                        label: a.label,
                    })
                }
                _ => return Err(Self::err(key, "angles in [0, pi/2]", v)),
            }
        }
        if out.is_empty() {
            return Err(Self::err(key, "at least one angle", v));
        }
        Ok(out)
    }
}

impl ExperimentConfig {
    /// The defaults for `model.kind = "tfim"`.
    pub fn tfim_default() -> Self {
        ConfigLayers::default().resolve().expect("defaults are valid")
    }

    fn from_map(map: BTreeMap<String, Value>) -> Result<Self, CliError> {
        let r = Reader { map: &map };
        let kind = parse_model_kind(r.get("model.kind"))?;
        let n_sites = r.count("model.n_sites")?;
        if kind == ModelKind::LandauZener && n_sites != 1 {
            return Err(CliError::Config(
                "model.n_sites must be 1 for the two-level model".into(),
            ));
        }
        if n_sites > MAX_SITES {
            return Err(CliError::Config(format!(
                "model.n_sites = {n_sites} exceeds the limit of {MAX_SITES}"
            )));
        }
        let couplings = match r.string("model.couplings")? {
            "phonon" => CouplingSource::Phonon,
            "power_law" => CouplingSource::PowerLaw,
            other => {
                return Err(CliError::Config(format!(
                    "model.couplings must be \"phonon\" or \"power_law\", got \"{other}\""
                )))
            }
        };
        let j_norm = match r.string("model.j_norm")? {
            "max" => CouplingNorm::MaxCoupling,
            "raw" => CouplingNorm::Raw,
            other => {
                return Err(CliError::Config(format!(
                    "model.j_norm must be \"max\" or \"raw\", got \"{other}\""
                )))
            }
        };
        let j_sign = r.float("model.j_sign")?;
        if j_sign != 1.0 && j_sign != -1.0 {
            return Err(CliError::Config(format!("model.j_sign must be +1 or -1, got {j_sign}")));
        }
        let model = ModelBlock {
            kind,
            n_sites,
            couplings,
            mu: r.float("model.mu")?,
            beta: r.positive("model.beta")?,
            alpha: r.float("model.alpha")?,
            j0: r.positive("model.j0")?,
            j_norm,
            j_sign,
        };

        let ramp = match r.string("schedule.kind")? {
            "exponential" => RampKind::Exponential,
            "linear" => RampKind::Linear,
            "constant" => RampKind::Constant,
            other => {
                return Err(CliError::Config(format!(
                    "schedule.kind must be exponential, linear or constant, got \"{other}\""
                )))
            }
        };
        let post_stop = match r.string("schedule.post_stop")? {
            "hold" => PostStop::Hold,
            "quench" => PostStop::QuenchToZero,
            other => {
                return Err(CliError::Config(format!(
                    "schedule.post_stop must be \"hold\" or \"quench\", got \"{other}\""
                )))
            }
        };
        let schedule = ScheduleBlock {
            kind: ramp,
            b0: r.float("schedule.b0")?,
            tau: r.float("schedule.tau")?,
            t_stop_factor: r.float("schedule.t_stop_factor")?,
            b_final: r.float("schedule.b_final")?,
            b_stop: r.optional("schedule.b_stop", "none")?,
            post_stop,
        };

        let sampling = match r.string("integrator.sampling")? {
            "midpoint" => HamiltonianSampling::Midpoint,
            "endpoints" => HamiltonianSampling::Endpoints,
            other => {
                return Err(CliError::Config(format!(
                    "integrator.sampling must be \"midpoint\" or \"endpoints\", got \"{other}\""
                )))
            }
        };
        let integrator = IntegratorBlock {
            dt: r.positive("integrator.dt")?,
            tolerance: r.positive("integrator.tolerance")?,
            record_stride: r.count("integrator.record_stride")?,
            t_meas: r.optional("integrator.t_meas", "auto")?,
            sampling,
            center_energy: r.boolean("integrator.center_energy")?,
        };
        if let Some(t) = integrator.t_meas {
            if t <= 0.0 {
                return Err(CliError::Config(format!("integrator.t_meas must be positive, got {t}")));
            }
        }

        let amplitude_method = match r.string("observable.amplitude_method")? {
            "first_extrema" => AmplitudeMethod::FirstExtrema,
            "global_window" => AmplitudeMethod::GlobalWindow,
            other => {
                return Err(CliError::Config(format!(
                    "observable.amplitude_method must be first_extrema or global_window, got \"{other}\""
                )))
            }
        };
        let observable = ObservableBlock {
            theta: r.angles("observable.theta")?,
            amplitude_method,
        };
        let sweep = SweepBlock {
            tau: r.grid("sweep.tau")?,
            b_stop: r.grid("sweep.b_stop")?,
        };
        let spectrum = SpectrumBlock {
            b_min: r.float("spectrum.b_min")?,
            b_max: r.float("spectrum.b_max")?,
            points: r.count("spectrum.points")?,
            levels: r.count("spectrum.levels")?,
        };
        if spectrum.b_max < spectrum.b_min || (spectrum.points > 1 && spectrum.b_max == spectrum.b_min)
        {
            return Err(CliError::Config("spectrum.b_max must exceed spectrum.b_min".into()));
        }
        let degeneracy_tol = r.positive("analysis.degeneracy_tol")?;

        Ok(Self {
            model,
            schedule,
            integrator,
            observable,
            sweep,
            spectrum,
            degeneracy_tol,
            resolved: map,
        })
    }

    /// The resolved config as `key = value` lines, sorted by key.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.resolved {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn spectrum_grid(&self) -> Vec<f64> {
        let s = &self.spectrum;
        if s.points == 1 {
            return vec![s.b_min];
        }
        (0..s.points)
            .map(|k| s.b_min + (s.b_max - s.b_min) * k as f64 / (s.points - 1) as f64)
            .collect()
    }
}

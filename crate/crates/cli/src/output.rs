//! Deterministic file output: fixed float formatting, percent-encoded error
//! text, and the RunRecord JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use gsprobe_core::analysis::AmplitudeMethod;
use gsprobe_core::model::{PostStop, RampKind};
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::runner::{Prepared, RunOutcome};

/// Characters left readable in the error column.
const ERROR_SET: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'_')
    .remove(b'.')
    .remove(b'~')
    .remove(b':')
    .remove(b'(')
    .remove(b')')
    .remove(b'=');

/// Twelve significant digits in scientific notation. Negative zero prints
/// as zero so that sign noise cannot break byte equality.
pub fn fmt_f(x: f64) -> String {
    if x == 0.0 {
        return format!("{:.11e}", 0.0);
    }
    format!("{x:.11e}")
}

pub fn encode_error(msg: &str) -> String {
    utf8_percent_encode(msg, ERROR_SET).to_string()
}

/// Writes a CSV file with the given header and pre-formatted rows.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Never)
        .from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        debug_assert_eq!(r.len(), header.len());
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_config_echo(dir: &Path, cfg: &ExperimentConfig) -> Result<(), CliError> {
    fs::write(dir.join("config.toml"), cfg.echo())?;
    Ok(())
}

fn method_name(m: AmplitudeMethod) -> &'static str {
    match m {
        AmplitudeMethod::FirstExtrema => "first_extrema",
        AmplitudeMethod::GlobalWindow => "global_window",
    }
}

pub fn ramp_name(k: RampKind) -> &'static str {
    match k {
        RampKind::Exponential => "exponential",
        RampKind::Linear => "linear",
        RampKind::Constant => "constant",
    }
}

pub fn post_stop_name(p: PostStop) -> &'static str {
    match p {
        PostStop::Hold => "hold",
        PostStop::QuenchToZero => "quench",
    }
}

#[derive(Debug, Serialize)]
pub struct ScheduleRecord {
    pub kind: &'static str,
    pub b0: f64,
    pub tau: f64,
    pub t_stop: f64,
    pub b_stop: f64,
    pub post_stop: &'static str,
    pub post_stop_field: f64,
}

#[derive(Debug, Serialize)]
pub struct ObservableRecord {
    pub theta: f64,
    pub label: String,
    pub amplitude: f64,
    pub t_max: Option<f64>,
    pub t_min: Option<f64>,
    pub flat: bool,
    pub method: &'static str,
    pub values: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct SpectrumRecord {
    pub field: f64,
    pub energies: Vec<f64>,
    pub parity_flip: Option<Vec<i8>>,
    pub parity_spatial: Option<Vec<i8>>,
}

#[derive(Debug, Serialize)]
pub struct GapRecord {
    pub b_star: f64,
    pub gap_star: f64,
    pub parity_fallback: bool,
}

#[derive(Debug, Serialize)]
pub struct DiagnosticsRecord {
    pub max_norm_drift: f64,
    pub post_stop_energy_drift: f64,
    pub closure_max_error: f64,
    pub closure_min_margin: f64,
    pub closure_points: usize,
}

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub timestamp_unix: u64,
    pub dt: f64,
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub config: BTreeMap<String, toml::Value>,
    pub schedule: ScheduleRecord,
    pub t_meas: f64,
    pub times: Vec<f64>,
    pub observables: Vec<ObservableRecord>,
    pub p_ground: f64,
    pub spectrum: SpectrumRecord,
    pub gap: GapRecord,
    pub diagnostics: DiagnosticsRecord,
    pub provenance: Provenance,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl RunRecord {
    pub fn new(cfg: &ExperimentConfig, prep: &Prepared, out: &RunOutcome) -> Self {
        let s = &out.schedule;
        let timestamp_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            config: cfg.resolved.clone(),
            schedule: ScheduleRecord {
                kind: ramp_name(s.kind),
                b0: s.b0,
                tau: s.tau,
                t_stop: s.t_stop,
                b_stop: s.stop_value(),
                post_stop: post_stop_name(s.post_stop),
                post_stop_field: s.post_stop_field(),
            },
            t_meas: out.t_meas,
            times: out.times.clone(),
            observables: out
                .series
                .iter()
                .map(|ts| ObservableRecord {
                    theta: ts.angle.value,
                    label: ts.angle.label.clone(),
                    amplitude: ts.amplitude.amplitude,
                    t_max: finite(ts.amplitude.t_max),
                    t_min: finite(ts.amplitude.t_min),
                    flat: ts.amplitude.flat,
                    method: method_name(ts.amplitude.method),
                    values: ts.values.clone(),
                })
                .collect(),
            p_ground: out.p_ground,
            spectrum: SpectrumRecord {
                field: out.levels.field,
                energies: out.levels.energies.clone(),
                parity_flip: out.levels.parity_flip.clone(),
                parity_spatial: out.levels.parity_spatial.clone(),
            },
            gap: GapRecord {
                b_star: prep.gap.b_star,
                gap_star: prep.gap.gap_star,
                parity_fallback: prep.gap.parity_fallback,
            },
            diagnostics: DiagnosticsRecord {
                max_norm_drift: out.diagnostics.max_norm_drift,
                post_stop_energy_drift: out.diagnostics.post_stop_energy_drift,
                closure_max_error: out.diagnostics.closure_max_error,
                closure_min_margin: out.diagnostics.closure_min_margin,
                closure_points: out.diagnostics.closure_points,
            },
            provenance: Provenance {
                version: env!("CARGO_PKG_VERSION"),
                timestamp_unix,
                dt: cfg.integrator.dt,
            },
        }
    }
}

/// Post-stop series as a wide table: `t` followed by one column per angle.
pub fn series_table(out: &RunOutcome) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["t".to_string()];
    header.extend(out.series.iter().map(|s| format!("theta_{}", fmt_f(s.angle.value))));
    let rows = out
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut r = vec![fmt_f(t)];
            r.extend(out.series.iter().map(|s| fmt_f(s.values[i])));
            r
        })
        .collect();
    (header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_f(0.4), "4.00000000000e-1");
        assert_eq!(fmt_f(-1234.5), "-1.23450000000e3");
        assert_eq!(fmt_f(-0.0), fmt_f(0.0));
        assert_eq!(fmt_f(f64::NAN), "NaN");
    }

    #[test]
    fn errors_have_no_separators() {
        let e = encode_error("evolve stage failed: norm drift 1e-3, limit\n1e-4");
        assert!(!e.contains(',') && !e.contains('\n') && !e.contains(' '));
        assert!(e.starts_with("evolve%20stage%20failed:"));
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_csv(&p, &["a", "b"], &[vec!["1".into(), "2".into()]]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "a,b\n1,2\n");
    }
}

//! Subcommand bodies. Each writes its tables plus `config.toml` into the
//! output directory and returns the paths it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use gsprobe_core::analysis::{levels, minimal_gap_scan, GapScan};
use gsprobe_core::couplings::{
    fit_power_law_at, ion_chain_couplings, power_law_couplings, CouplingParams,
};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use crate::config::{CouplingSource, ExperimentConfig, ModelKind};
use crate::error::{AtStage, CliError, Stage};
use crate::output::{fmt_f, series_table, write_config_echo, write_csv, RunRecord};
use crate::runner::{build_model, default_schedule, execute, prepare, Prepared, RunOutcome};
use crate::sweep::{sweep_stop, sweep_tau, SweepRow, STOP_HEADER, TAU_HEADER};

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub struct RunOutput {
    pub prepared: Prepared,
    pub outcome: RunOutcome,
    pub files: Vec<PathBuf>,
}

/// Single run; the record is written only after the closure check passed.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutput, CliError> {
    let prepared = prepare(cfg)?;
    let sched = default_schedule(cfg)?;
    let outcome = execute(cfg, &prepared, &sched)?;

    ensure_dir(out)?;
    write_config_echo(out, cfg)?;
    let record = RunRecord::new(cfg, &prepared, &outcome);
    let json = out.join("record.json");
    fs::write(&json, serde_json::to_string_pretty(&record)? + "\n")?;
    let (header, rows) = series_table(&outcome);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let csv = out.join("series.csv");
    write_csv(&csv, &header, &rows)?;
    Ok(RunOutput {
        prepared,
        outcome,
        files: vec![out.join("config.toml"), json, csv],
    })
}

pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub file: PathBuf,
}

pub fn cmd_sweep_tau(cfg: &ExperimentConfig, out: &Path, pool: &ThreadPool) -> Result<SweepOutput, CliError> {
    let prep = prepare(cfg)?;
    let rows = sweep_tau(cfg, &prep, pool);
    ensure_dir(out)?;
    write_config_echo(out, cfg)?;
    let file = out.join("sweep_tau.csv");
    write_csv(&file, &TAU_HEADER, &rows.iter().map(SweepRow::tau_record).collect::<Vec<_>>())?;
    Ok(SweepOutput { rows, file })
}

pub fn cmd_sweep_stop(cfg: &ExperimentConfig, out: &Path, pool: &ThreadPool) -> Result<SweepOutput, CliError> {
    let prep = prepare(cfg)?;
    let rows = sweep_stop(cfg, &prep, pool)?;
    ensure_dir(out)?;
    write_config_echo(out, cfg)?;
    let file = out.join("sweep_stop.csv");
    write_csv(&file, &STOP_HEADER, &rows.iter().map(SweepRow::stop_record).collect::<Vec<_>>())?;
    Ok(SweepOutput { rows, file })
}

/// Lowest levels at one field.
#[derive(Debug, Clone)]
pub struct FieldLevels {
    pub field: f64,
    pub energies: Vec<f64>,
    pub parity_flip: Option<Vec<i8>>,
    pub parity_spatial: Option<Vec<i8>>,
}

#[derive(Debug, Serialize)]
struct GapSummary<'a> {
    b_star: f64,
    gap_star: f64,
    parity_fallback: bool,
    config: &'a std::collections::BTreeMap<String, toml::Value>,
}

pub struct SpectrumOutput {
    pub levels: Vec<FieldLevels>,
    pub gap: GapScan,
    pub files: Vec<PathBuf>,
}

pub const SPECTRUM_HEADER: [&str; 5] = ["field", "level", "energy", "parity_flip", "parity_spatial"];

pub fn cmd_spectrum(cfg: &ExperimentConfig, out: &Path, pool: &ThreadPool) -> Result<SpectrumOutput, CliError> {
    let model = build_model(cfg)?;
    let fields = cfg.spectrum_grid();
    let k = cfg.spectrum.levels;
    let per_field: Result<Vec<FieldLevels>, CliError> = pool.install(|| {
        fields
            .par_iter()
            .map(|&b| {
                let l = levels(&model.hamiltonian(b).at(Stage::Model)?).at(Stage::Spectrum)?;
                let k = k.min(l.energies.len());
                Ok(FieldLevels {
                    field: b,
                    energies: l.energies[..k].to_vec(),
                    parity_flip: l.parity_flip.map(|p| p[..k].to_vec()),
                    parity_spatial: l.parity_spatial.map(|p| p[..k].to_vec()),
                })
            })
            .collect()
    });
    let per_field = per_field?;
    let gap = minimal_gap_scan(&model, &fields).at(Stage::Spectrum)?;

    ensure_dir(out)?;
    write_config_echo(out, cfg)?;
    let parity = |p: &Option<Vec<i8>>, i: usize| p.as_ref().map(|v| v[i].to_string()).unwrap_or_default();
    let mut rows = Vec::new();
    for fl in &per_field {
        for (i, e) in fl.energies.iter().enumerate() {
            rows.push(vec![
                fmt_f(fl.field),
                i.to_string(),
                fmt_f(*e),
                parity(&fl.parity_flip, i),
                parity(&fl.parity_spatial, i),
            ]);
        }
    }
    let spectrum_csv = out.join("spectrum.csv");
    write_csv(&spectrum_csv, &SPECTRUM_HEADER, &rows)?;
    let gap_rows: Vec<Vec<String>> = gap
        .fields
        .iter()
        .zip(&gap.gaps)
        .map(|(b, g)| vec![fmt_f(*b), fmt_f(*g)])
        .collect();
    let gap_csv = out.join("gap.csv");
    write_csv(&gap_csv, &["field", "gap"], &gap_rows)?;
    let summary = GapSummary {
        b_star: gap.b_star,
        gap_star: gap.gap_star,
        parity_fallback: gap.parity_fallback,
        config: &cfg.resolved,
    };
    let summary_json = out.join("gap_summary.json");
    fs::write(&summary_json, serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(SpectrumOutput {
        levels: per_field,
        gap,
        files: vec![out.join("config.toml"), spectrum_csv, gap_csv, summary_json],
    })
}

#[derive(Debug, Serialize)]
struct CouplingSummary<'a> {
    n_sites: usize,
    source: &'static str,
    alpha: f64,
    j_max: f64,
    config: &'a std::collections::BTreeMap<String, toml::Value>,
}

pub struct CouplingsOutput {
    pub positions: Vec<f64>,
    pub frequencies: Option<Vec<f64>>,
    pub alpha: f64,
    pub files: Vec<PathBuf>,
}

pub fn cmd_couplings(cfg: &ExperimentConfig, out: &Path) -> Result<CouplingsOutput, CliError> {
    if cfg.model.kind != ModelKind::Tfim {
        return Err(CliError::Config("couplings need model.kind = \"tfim\"".into()));
    }
    let m = &cfg.model;
    let (positions, modes, j, source) = match m.couplings {
        CouplingSource::Phonon => {
            let params = CouplingParams::new(m.mu, m.j0, m.j_norm).at(Stage::Couplings)?;
            let (chain, modes, j) = ion_chain_couplings(m.n_sites, m.beta, &params).at(Stage::Couplings)?;
            (chain.positions().to_vec(), Some(modes), j, "phonon")
        }
        CouplingSource::PowerLaw => {
            let j = power_law_couplings(m.n_sites, m.alpha, m.j0).at(Stage::Couplings)?;
            ((0..m.n_sites).map(|i| i as f64).collect(), None, j, "power_law")
        }
    };
    let alpha = fit_power_law_at(&j, &positions).at(Stage::Couplings)?;

    ensure_dir(out)?;
    write_config_echo(out, cfg)?;
    let mut files = vec![out.join("config.toml")];

    let pos_rows: Vec<Vec<String>> = positions
        .iter()
        .enumerate()
        .map(|(i, x)| vec![i.to_string(), fmt_f(*x)])
        .collect();
    let f = out.join("positions.csv");
    write_csv(&f, &["ion", "position"], &pos_rows)?;
    files.push(f);

    if let Some(modes) = &modes {
        let n = modes.n_modes();
        let mut header = vec!["mode".to_string(), "frequency".to_string()];
        header.extend((0..n).map(|i| format!("b_{i}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = (0..n)
            .map(|nu| {
                let mut r = vec![nu.to_string(), fmt_f(modes.frequencies[nu])];
                r.extend((0..n).map(|i| fmt_f(modes.component(i, nu))));
                r
            })
            .collect();
        let f = out.join("modes.csv");
        write_csv(&f, &header, &rows)?;
        files.push(f);
    }

    let mut j_rows = Vec::new();
    for i in 0..j.n() {
        for k in 0..j.n() {
            j_rows.push(vec![i.to_string(), k.to_string(), fmt_f(j.get(i, k))]);
        }
    }
    let f = out.join("jij.csv");
    write_csv(&f, &["i", "j", "j_ij"], &j_rows)?;
    files.push(f);

    let summary = CouplingSummary {
        n_sites: m.n_sites,
        source,
        alpha,
        j_max: j.max(),
        config: &cfg.resolved,
    };
    let f = out.join("summary.json");
    fs::write(&f, serde_json::to_string_pretty(&summary)? + "\n")?;
    files.push(f);

    Ok(CouplingsOutput {
        positions,
        frequencies: modes.map(|m| m.frequencies),
        alpha,
        files,
    })
}

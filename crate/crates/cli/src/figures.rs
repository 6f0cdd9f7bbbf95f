//! Figure data sets. Each figure pins its own config, writes its tables
//! into a sub-directory together with a gnuplot script and a rendered SVG,
//! and reports the files. A failing figure is recorded in the manifest and
//! the rest still run.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use gsprobe_core::analysis::lz_analytic_curves;
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use crate::commands::{cmd_spectrum, cmd_sweep_stop, cmd_sweep_tau};
use crate::config::{ConfigLayers, ExperimentConfig};
use crate::error::{AtStage, CliError, Stage};
use crate::output::{fmt_f, write_config_echo, write_csv};
use crate::plot::{Guide, Plot, Series, Source};
use crate::runner::{execute, prepare, schedule_for};
use crate::sweep::SweepRow;

pub const FIGURES: [&str; 7] = ["fig2", "fig4", "fig5", "fig7", "fig8", "fig9", "fig10"];

/// Signal figures carry both π/9 and π/6 for the smallest angle.
const SIGNAL_THETAS: &str = r#"["pi/9", "pi/6", "pi/3", "pi/2"]"#;

#[derive(Debug, Serialize)]
pub struct ManifestEntry {
    pub figure: String,
    pub status: &'static str,
    pub files: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub figures: Vec<ManifestEntry>,
    pub failed: usize,
}

fn layers(sets: &[&str]) -> Result<ExperimentConfig, CliError> {
    let mut l = ConfigLayers::default();
    for s in sets {
        l = l.with_set(s)?;
    }
    l.resolve()
}

fn save_plot(dir: &Path, name: &str, plot: &Plot, files: &mut Vec<String>) -> Result<(), CliError> {
    let svg = format!("{name}.svg");
    let gp = format!("{name}.gp");
    fs::write(dir.join(&svg), plot.svg())?;
    fs::write(dir.join(&gp), plot.gnuplot(&format!("{name}.gnuplot.svg")))?;
    files.push(svg);
    files.push(gp);
    Ok(())
}

fn src(file: &str, x: usize, y: usize, filter: Vec<(usize, f64)>) -> Source {
    Source {
        file: file.into(),
        x,
        y,
        filter,
    }
}

fn theta_name(label: &str) -> String {
    label.replace('/', "_").replace('*', "")
}

fn fig2(dir: &Path, _pool: &ThreadPool) -> Result<Vec<String>, CliError> {
    let cfg = layers(&["model.kind=lz"])?;
    write_config_echo(dir, &cfg)?;
    let b_hold = cfg.schedule.b_final;
    let phi: Vec<f64> = (0..=200).map(|k| PI / 2.0 * k as f64 / 200.0).collect();
    let (prob, amp) = lz_analytic_curves(&phi, PI / 2.0, b_hold).at(Stage::Analysis)?;
    let rows: Vec<Vec<String>> = (0..phi.len())
        .map(|i| vec![fmt_f(phi[i]), fmt_f(prob[i]), fmt_f(amp[i])])
        .collect();
    write_csv(&dir.join("curves.csv"), &["phi", "p_ground", "amplitude"], &rows)?;

    let mut p = Plot::new("two-level closed form", "phi", "value");
    p.series.push(Series {
        label: "P_ground".into(),
        points: phi.iter().copied().zip(prob.iter().copied()).collect(),
        markers: false,
        source: src("curves.csv", 1, 2, vec![]),
    });
    p.series.push(Series {
        label: "amplitude".into(),
        points: phi.iter().copied().zip(amp.iter().copied()).collect(),
        markers: false,
        source: src("curves.csv", 1, 3, vec![]),
    });
    // one amplitude level reached at two angles
    let level = amp[50];
    p.guides.push(Guide::Horizontal(level));
    let mut files = vec!["config.toml".into(), "curves.csv".into()];
    save_plot(dir, "curves", &p, &mut files)?;
    Ok(files)
}

/// Post-stop series for each `tau` in `taus`, as `tau,theta,t,value` rows
/// with `t` measured from the stop.
fn signal_figure(
    dir: &Path,
    pool: &ThreadPool,
    cfg: &ExperimentConfig,
    taus: &[f64],
    what: &str,
) -> Result<Vec<String>, CliError> {
    write_config_echo(dir, cfg)?;
    let prep = prepare(cfg)?;
    let runs: Result<Vec<_>, CliError> = pool.install(|| {
        taus.par_iter()
            .map(|&tau| {
                let s = schedule_for(cfg, tau, None, cfg.schedule.post_stop)?;
                execute(cfg, &prep, &s)
            })
            .collect()
    });
    let runs = runs?;
    let mut rows = Vec::new();
    for (tau, run) in taus.iter().zip(&runs) {
        for s in &run.series {
            for (t, v) in run.times.iter().zip(&s.values) {
                rows.push(vec![
                    fmt_f(*tau),
                    fmt_f(s.angle.value),
                    fmt_f(t - run.schedule.t_stop),
                    fmt_f(*v),
                ]);
            }
        }
    }
    write_csv(&dir.join("signal.csv"), &["tau", "theta", "t", "value"], &rows)?;
    let mut files = vec!["config.toml".to_string(), "signal.csv".to_string()];
    for (k, angle) in cfg.observable.theta.iter().enumerate() {
        let mut p = Plot::new(
            &format!("{what}, theta = {}", angle.label),
            "t - t_stop",
            "O(theta)",
        );
        for (tau, run) in taus.iter().zip(&runs) {
            let s = &run.series[k];
            p.series.push(Series {
                label: format!("tau = {tau}"),
                points: run
                    .times
                    .iter()
                    .map(|t| t - run.schedule.t_stop)
                    .zip(s.values.iter().copied())
                    .collect(),
                markers: false,
                source: src("signal.csv", 3, 4, vec![(1, *tau), (2, angle.value)]),
            });
        }
        save_plot(dir, &format!("signal_{}", theta_name(&angle.label)), &p, &mut files)?;
    }
    Ok(files)
}

fn fig4(dir: &Path, pool: &ThreadPool) -> Result<Vec<String>, CliError> {
    let theta = format!("observable.theta={SIGNAL_THETAS}");
    let cfg = layers(&["model.kind=lz", &theta, "integrator.t_meas=1.0"])?;
    signal_figure(dir, pool, &cfg, &[1.5, 3.25, 5.0, 9.0], "two-level hold")
}

fn fig8(dir: &Path, pool: &ThreadPool) -> Result<Vec<String>, CliError> {
    let theta = format!("observable.theta={SIGNAL_THETAS}");
    let cfg = layers(&["schedule.post_stop=quench", &theta])?;
    signal_figure(dir, pool, &cfg, &[0.2, 0.4, 0.6], "Ising quench to B = 0")
}

/// Field where `p_ground` first crosses 0.5, by linear interpolation.
fn half_crossing(rows: &[(f64, f64)]) -> Option<f64> {
    rows.windows(2).find_map(|w| {
        let ((x0, p0), (x1, p1)) = (w[0], w[1]);
        ((p0 - 0.5) * (p1 - 0.5) <= 0.0 && p0 != p1).then(|| x0 + (0.5 - p0) * (x1 - x0) / (p1 - p0))
    })
}

fn amplitude_plot(
    title: &str,
    x_label: &str,
    rows: &[SweepRow],
    x_of: impl Fn(&SweepRow) -> f64,
    group_of: impl Fn(&SweepRow) -> (f64, String),
    file: &str,
    x_col: usize,
    group_col: usize,
    amp_col: usize,
) -> Plot {
    let mut p = Plot::new(title, x_label, "amplitude");
    let mut groups: Vec<(f64, String)> = rows.iter().map(&group_of).collect();
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    groups.dedup_by(|a, b| a.0 == b.0);
    for (g, label) in groups {
        p.series.push(Series {
            label,
            points: rows
                .iter()
                .filter(|r| group_of(r).0 == g)
                .filter_map(|r| r.amplitude.map(|a| (x_of(r), a)))
                .collect(),
            markers: true,
            source: src(file, x_col, amp_col, vec![(group_col, g)]),
        });
    }
    p
}

fn p_ground_points(rows: &[SweepRow], x_of: impl Fn(&SweepRow) -> f64, keep: impl Fn(&SweepRow) -> bool) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| keep(r))
        .filter_map(|r| r.p_ground.map(|p| (x_of(r), p)))
        .collect()
}

fn fig5(dir: &Path, pool: &ThreadPool) -> Result<Vec<String>, CliError> {
    let taus: Vec<String> = (0..=46).map(|k| format!("{}", 0.5 + 0.25 * k as f64)).collect();
    let cfg = layers(&[
        "model.kind=lz",
        r#"observable.theta=["pi/12", "pi/6", "pi/4", "pi/3", "5pi/12", "pi/2"]"#,
        &format!("sweep.tau=[{}]", taus.join(", ")),
    ])?;
    let sweep = cmd_sweep_tau(&cfg, dir, pool)?;
    let rows = &sweep.rows;
    let top = cfg.observable.theta.iter().map(|a| a.value).fold(0.0, f64::max);
    let pg = p_ground_points(rows, |r| r.tau, |r| r.theta == top);
    let mut p = amplitude_plot(
        "two-level amplitude vs sweep rate",
        "tau",
        rows,
        |r| r.tau,
        |r| (r.theta, format!("theta = {:.4}", r.theta)),
        "sweep_tau.csv",
        1,
        2,
        3,
    );
    p.series.push(Series {
        label: "P_ground".into(),
        points: pg.clone(),
        markers: false,
        source: src("sweep_tau.csv", 1, 4, vec![(2, top)]),
    });
    if let Some(x) = half_crossing(&pg) {
        p.guides.push(Guide::Vertical(x));
    }
    let mut files = vec!["config.toml".to_string(), "sweep_tau.csv".to_string()];
    save_plot(dir, "amplitude", &p, &mut files)?;
    Ok(files)
}

fn fig7(dir: &Path, pool: &ThreadPool) -> Result<Vec<String>, CliError> {
    let cfg = layers(&["spectrum.b_min=0", "spectrum.b_max=5", "spectrum.points=101"])?;
    let out = cmd_spectrum(&cfg, dir, pool)?;
    let mut p = Plot::new("Ising spectrum, N = 10", "B", "energy");
    for level in 0..cfg.spectrum.levels {
        p.series.push(Series {
            label: format!("E_{level}"),
            points: out
                .levels
                .iter()
                .filter_map(|fl| fl.energies.get(level).map(|e| (fl.field, *e)))
                .collect(),
            markers: false,
            source: src("spectrum.csv", 1, 3, vec![(2, level as f64)]),
        });
    }
    p.guides.push(Guide::Vertical(out.gap.b_star));
    let mut files = vec![
        "config.toml".to_string(),
        "spectrum.csv".to_string(),
        "gap.csv".to_string(),
        "gap_summary.json".to_string(),
    ];
    save_plot(dir, "spectrum", &p, &mut files)?;

    let mut g = Plot::new("gap to the first coupled state", "B", "gap");
    g.series.push(Series {
        label: "gap".into(),
        points: out.gap.fields.iter().copied().zip(out.gap.gaps.iter().copied()).collect(),
        markers: false,
        source: src("gap.csv", 1, 2, vec![]),
    });
    g.guides.push(Guide::Vertical(out.gap.b_star));
    save_plot(dir, "gap", &g, &mut files)?;
    Ok(files)
}

fn fig9(dir: &Path, pool: &ThreadPool) -> Result<Vec<String>, CliError> {
    let cfg = layers(&["schedule.post_stop=quench"])?;
    let sweep = cmd_sweep_tau(&cfg, dir, pool)?;
    let rows = &sweep.rows;
    let top = cfg.observable.theta.iter().map(|a| a.value).fold(0.0, f64::max);
    let mut p = amplitude_plot(
        "Ising quench amplitude vs tau",
        "tau",
        rows,
        |r| r.tau,
        |r| (r.theta, format!("theta = {:.4}", r.theta)),
        "sweep_tau.csv",
        1,
        2,
        3,
    );
    p.series.push(Series {
        label: "P_ground".into(),
        points: p_ground_points(rows, |r| r.tau, |r| r.theta == top),
        markers: false,
        source: src("sweep_tau.csv", 1, 4, vec![(2, top)]),
    });
    let mut files = vec!["config.toml".to_string(), "sweep_tau.csv".to_string()];
    save_plot(dir, "amplitude", &p, &mut files)?;
    Ok(files)
}

fn fig10(dir: &Path, pool: &ThreadPool) -> Result<Vec<String>, CliError> {
    let cfg = layers(&[
        "schedule.post_stop=hold",
        "sweep.tau=[0.2, 0.4, 0.6]",
        r#"observable.theta=["pi/2"]"#,
    ])?;
    let sweep = cmd_sweep_stop(&cfg, dir, pool)?;
    let rows = &sweep.rows;
    let prep_gap = crate::runner::gap_scan(&crate::runner::build_model(&cfg)?, &cfg)?;
    let mut p = amplitude_plot(
        "Ising hold amplitude vs stop field",
        "B(t_stop)",
        rows,
        |r| r.b_target.unwrap_or(f64::NAN),
        |r| (r.tau, format!("tau = {}", r.tau)),
        "sweep_stop.csv",
        1,
        2,
        4,
    );
    p.guides.push(Guide::Vertical(prep_gap.b_star));
    let mut files = vec!["config.toml".to_string(), "sweep_stop.csv".to_string()];
    save_plot(dir, "amplitude", &p, &mut files)?;

    let mut q = Plot::new("ground-state probability at the stop field", "B(t_stop)", "P_ground");
    for &tau in &cfg.sweep.tau {
        q.series.push(Series {
            label: format!("tau = {tau}"),
            points: p_ground_points(rows, |r| r.b_target.unwrap_or(f64::NAN), |r| r.tau == tau),
            markers: true,
            source: src("sweep_stop.csv", 1, 5, vec![(2, tau)]),
        });
    }
    q.guides.push(Guide::Vertical(prep_gap.b_star));
    save_plot(dir, "p_ground", &q, &mut files)?;
    Ok(files)
}

type FigureFn = fn(&Path, &ThreadPool) -> Result<Vec<String>, CliError>;

fn figure_fn(id: &str) -> Option<FigureFn> {
    Some(match id {
        "fig2" => fig2,
        "fig4" => fig4,
        "fig5" => fig5,
        "fig7" => fig7,
        "fig8" => fig8,
        "fig9" => fig9,
        "fig10" => fig10,
        _ => return None,
    })
}

/// Generates the requested figures (all of them when `only` is empty) and
/// writes `manifest.json`.
pub fn cmd_figures(out: &Path, only: &[String], pool: &ThreadPool) -> Result<Manifest, CliError> {
    let ids: Vec<&str> = if only.is_empty() {
        FIGURES.to_vec()
    } else {
        for id in only {
            if figure_fn(id).is_none() {
                return Err(CliError::Config(format!(
                    "unknown figure `{id}`; choose from {}",
                    FIGURES.join(", ")
                )));
            }
        }
        FIGURES.iter().copied().filter(|f| only.iter().any(|o| o == f)).collect()
    };
    fs::create_dir_all(out)?;
    let mut entries = Vec::new();
    for id in ids {
        let dir = out.join(id);
        let result = fs::create_dir_all(&dir)
            .map_err(CliError::from)
            .and_then(|_| figure_fn(id).expect("validated")(&dir, pool));
        entries.push(match result {
            Ok(files) => ManifestEntry {
                figure: id.into(),
                status: "ok",
                files,
                error: None,
            },
            Err(e) => ManifestEntry {
                figure: id.into(),
                status: "failed",
                files: Vec::new(),
                error: Some(e.to_string()),
            },
        });
    }
    let failed = entries.iter().filter(|e| e.status != "ok").count();
    let manifest = Manifest {
        figures: entries,
        failed,
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_interpolates() {
        let x = half_crossing(&[(1.0, 0.9), (2.0, 0.7), (3.0, 0.3)]).unwrap();
        assert!((x - 2.5).abs() < 1e-12);
        assert_eq!(half_crossing(&[(1.0, 0.9), (2.0, 0.8)]), None);
    }

    #[test]
    fn analytic_figure_writes_everything() {
        let dir = tempfile::tempdir().unwrap();
        let m = cmd_figures(dir.path(), &["fig2".into()], &crate::sweep::thread_pool(1).unwrap()).unwrap();
        assert_eq!(m.failed, 0);
        assert_eq!(m.figures.len(), 1);
        for f in &m.figures[0].files {
            assert!(dir.path().join("fig2").join(f).exists(), "{f}");
        }
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn unknown_figure_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let e = cmd_figures(dir.path(), &["fig3".into()], &crate::sweep::thread_pool(1).unwrap()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}

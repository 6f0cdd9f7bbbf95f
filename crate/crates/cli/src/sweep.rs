//! Parameter sweeps. Points run as independent tasks; results are collected
//! in grid order, so the table does not depend on the thread count.

use gsprobe_core::model::PostStop;
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{encode_error, fmt_f};
use crate::runner::{execute, schedule_for, Prepared, RunOutcome};

pub const TAU_HEADER: [&str; 7] = ["tau", "theta", "amplitude", "p_ground", "t_stop", "b_stop", "error"];
pub const STOP_HEADER: [&str; 7] = ["b_stop", "tau", "theta", "amplitude", "p_ground", "t_stop", "error"];

pub fn thread_pool(jobs: usize) -> Result<ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau: f64,
    pub b_target: Option<f64>,
    pub theta: f64,
    pub amplitude: Option<f64>,
    pub p_ground: Option<f64>,
    pub t_stop: Option<f64>,
    pub b_stop: Option<f64>,
    pub error: Option<String>,
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

impl SweepRow {
    pub fn tau_record(&self) -> Vec<String> {
        vec![
            fmt_f(self.tau),
            fmt_f(self.theta),
            opt(self.amplitude),
            opt(self.p_ground),
            opt(self.t_stop),
            opt(self.b_stop),
            self.error.as_deref().map(encode_error).unwrap_or_default(),
        ]
    }

    pub fn stop_record(&self) -> Vec<String> {
        vec![
            opt(self.b_target),
            fmt_f(self.tau),
            fmt_f(self.theta),
            opt(self.amplitude),
            opt(self.p_ground),
            opt(self.t_stop),
            self.error.as_deref().map(encode_error).unwrap_or_default(),
        ]
    }
}

/// Observable angles in ascending order.
fn sorted_thetas(cfg: &ExperimentConfig) -> Vec<f64> {
    let mut t: Vec<f64> = cfg.observable.theta.iter().map(|a| a.value).collect();
    t.sort_by(f64::total_cmp);
    t
}

fn rows_for(
    cfg: &ExperimentConfig,
    tau: f64,
    b_target: Option<f64>,
    result: Result<RunOutcome, CliError>,
) -> Vec<SweepRow> {
    let base = SweepRow {
        tau,
        b_target,
        theta: 0.0,
        amplitude: None,
        p_ground: None,
        t_stop: None,
        b_stop: None,
        error: None,
    };
    match result {
        Ok(out) => {
            let mut rows: Vec<SweepRow> = out
                .series
                .iter()
                .map(|s| SweepRow {
                    theta: s.angle.value,
                    amplitude: Some(s.amplitude.amplitude),
                    p_ground: Some(out.p_ground),
                    t_stop: Some(out.schedule.t_stop),
                    b_stop: Some(out.schedule.stop_value()),
                    ..base.clone()
                })
                .collect();
            rows.sort_by(|a, b| a.theta.total_cmp(&b.theta));
            rows
        }
        Err(e) => sorted_thetas(cfg)
            .into_iter()
            .map(|theta| SweepRow {
                theta,
                error: Some(e.to_string()),
                ..base.clone()
            })
            .collect(),
    }
}

fn run_point(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    tau: f64,
    b_target: Option<f64>,
    post: PostStop,
) -> Result<RunOutcome, CliError> {
    let sched = schedule_for(cfg, tau, b_target, post)?;
    execute(cfg, prep, &sched)
}

/// One run per `sweep.tau` value with the configured protocol. Failed
/// points become rows with an error message.
pub fn sweep_tau(cfg: &ExperimentConfig, prep: &Prepared, pool: &ThreadPool) -> Vec<SweepRow> {
    let post = cfg.schedule.post_stop;
    let b_target = cfg.schedule.b_stop;
    let per_tau: Vec<Vec<SweepRow>> = pool.install(|| {
        cfg.sweep
            .tau
            .par_iter()
            .map(|&tau| rows_for(cfg, tau, b_target, run_point(cfg, prep, tau, b_target, post)))
            .collect()
    });
    per_tau.into_iter().flatten().collect()
}

/// Hold-protocol runs stopped at each `sweep.b_stop` field, for every
/// `sweep.tau`. Rows are ordered by stop field, then `tau`, then angle.
pub fn sweep_stop(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    pool: &ThreadPool,
) -> Result<Vec<SweepRow>, CliError> {
    // reject the whole grid before spending any time on it
    for &b in &cfg.sweep.b_stop {
        schedule_for(cfg, cfg.sweep.tau[0], Some(b), PostStop::Hold)?;
    }
    let points: Vec<(f64, f64)> = cfg
        .sweep
        .b_stop
        .iter()
        .flat_map(|&b| cfg.sweep.tau.iter().map(move |&t| (b, t)))
        .collect();
    let per_point: Vec<Vec<SweepRow>> = pool.install(|| {
        points
            .par_iter()
            .map(|&(b, tau)| {
                rows_for(cfg, tau, Some(b), run_point(cfg, prep, tau, Some(b), PostStop::Hold))
            })
            .collect()
    });
    Ok(per_point.into_iter().flatten().collect())
}

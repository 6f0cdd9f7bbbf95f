//! A single ramp-and-measure run: build the model, evolve, measure, check.

use std::f64::consts::PI;

use gsprobe_core::analysis::{
    decompose, extract_amplitude, ground_state_probability, minimal_gap_scan, series_terms,
    spectrum, AmplitudeResult, GapScan, SpectrumResult,
};
use gsprobe_core::couplings::{
    ion_chain_couplings, power_law_couplings, CouplingMatrix, CouplingParams,
};
use gsprobe_core::model::{FieldSchedule, ModelSpec, PostStop, RampKind};
use gsprobe_core::propagator::{evolve, IntegratorConfig, Trajectory};
use gsprobe_core::spin::{rotated_magnetization, C64};
use gsprobe_core::Error as CoreError;

use crate::config::{Angle, CouplingSource, ExperimentConfig, ModelKind};
use crate::error::{AtStage, CliError, Stage};

/// Levels kept in a run's spectrum summary.
pub const SUMMARY_LEVELS: usize = 8;

/// Closure points checked per observable; the series is subsampled evenly.
const CLOSURE_POINTS: usize = 400;

/// Absolute slack on the closure bound for linear-solver residue.
const CLOSURE_FLOOR: f64 = 1e-8;

const COARSE_GAP_STEP: f64 = 0.1;
const FINE_GAP_STEP: f64 = 0.01;

pub fn build_couplings(cfg: &ExperimentConfig) -> Result<CouplingMatrix, CliError> {
    let m = &cfg.model;
    match m.couplings {
        CouplingSource::Phonon => {
            let params = CouplingParams::new(m.mu, m.j0, m.j_norm).at(Stage::Couplings)?;
            let (_, _, j) = ion_chain_couplings(m.n_sites, m.beta, &params).at(Stage::Couplings)?;
            Ok(j)
        }
        CouplingSource::PowerLaw => power_law_couplings(m.n_sites, m.alpha, m.j0).at(Stage::Couplings),
    }
}

pub fn build_model(cfg: &ExperimentConfig) -> Result<ModelSpec, CliError> {
    match cfg.model.kind {
        ModelKind::LandauZener => Ok(ModelSpec::LandauZener),
        ModelKind::Tfim => {
            if cfg.model.n_sites < 2 {
                return Err(CliError::Config("the Ising model needs at least 2 sites".into()));
            }
            let j = build_couplings(cfg)?;
            ModelSpec::tfim(j, cfg.model.j_sign).at(Stage::Model)
        }
    }
}

/// Field window the ramp sweeps through.
fn ramp_window(cfg: &ExperimentConfig) -> (f64, f64) {
    let s = &cfg.schedule;
    match s.kind {
        RampKind::Exponential => (0.0f64.min(s.b0), 0.0f64.max(s.b0)),
        RampKind::Linear => (s.b0.min(s.b_final), s.b0.max(s.b_final)),
        RampKind::Constant => (s.b0, s.b0),
    }
}

fn uniform(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step - 1e-9).ceil().max(0.0) as usize;
    if n == 0 {
        return vec![lo];
    }
    (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
}

/// Coupled-gap minimum over the ramp window: a coarse pass, then a fine
/// pass around the coarse minimum.
pub fn gap_scan(model: &ModelSpec, cfg: &ExperimentConfig) -> Result<GapScan, CliError> {
    let (lo, hi) = ramp_window(cfg);
    let coarse = minimal_gap_scan(model, &uniform(lo, hi, COARSE_GAP_STEP)).at(Stage::Spectrum)?;
    if coarse.fields.len() < 2 {
        return Ok(coarse);
    }
    let a = (coarse.b_star - COARSE_GAP_STEP).max(lo);
    let b = (coarse.b_star + COARSE_GAP_STEP).min(hi);
    minimal_gap_scan(model, &uniform(a, b, FINE_GAP_STEP)).at(Stage::Spectrum)
}

/// Everything shared by the runs of one config: the model and the
/// measurement window.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub model: ModelSpec,
    pub gap: GapScan,
    pub t_meas: f64,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, CliError> {
    let model = build_model(cfg)?;
    let gap = gap_scan(&model, cfg)?;
    let t_meas = match cfg.integrator.t_meas {
        Some(t) => t,
        None => {
            if !(gap.gap_star > 0.0) {
                return Err(CliError::Core {
                    stage: Stage::Spectrum,
                    source: CoreError::Degeneracy {
                        splitting: gap.gap_star,
                    },
                });
            }
            4.0 * 2.0 * PI / gap.gap_star
        }
    };
    Ok(Prepared { model, gap, t_meas })
}

/// Schedule for ramp time constant (or sweep rate) `tau`, optionally
/// stopping the exponential ramp at `b_stop`.
pub fn schedule_for(
    cfg: &ExperimentConfig,
    tau: f64,
    b_stop: Option<f64>,
    post: PostStop,
) -> Result<FieldSchedule, CliError> {
    let s = &cfg.schedule;
    let sched = match (s.kind, b_stop) {
        (RampKind::Exponential, Some(b)) => FieldSchedule::exponential_to(s.b0, tau, b, post),
        (RampKind::Exponential, None) => FieldSchedule::exponential(s.b0, tau, s.t_stop_factor, post),
        (RampKind::Linear, None) => FieldSchedule::linear(s.b0, tau, s.b_final, post),
        (RampKind::Constant, None) => FieldSchedule::constant(s.b0, 0.0),
        (_, Some(_)) => {
            return Err(CliError::Config(
                "schedule.b_stop needs an exponential ramp".into(),
            ))
        }
    };
    sched.at(Stage::Model)
}

/// The schedule `run` uses: the configured `tau`, `b_stop` and protocol.
pub fn default_schedule(cfg: &ExperimentConfig) -> Result<FieldSchedule, CliError> {
    schedule_for(cfg, cfg.schedule.tau, cfg.schedule.b_stop, cfg.schedule.post_stop)
}

pub fn integrator(cfg: &ExperimentConfig) -> IntegratorConfig {
    let i = &cfg.integrator;
    IntegratorConfig {
        dt: i.dt,
        solver_tolerance: i.tolerance,
        record_stride: i.record_stride,
        sampling: i.sampling,
        center_energy: i.center_energy,
        ..IntegratorConfig::default()
    }
}

#[derive(Debug, Clone)]
pub struct ThetaSeries {
    pub angle: Angle,
    pub values: Vec<f64>,
    pub amplitude: AmplitudeResult,
}

#[derive(Debug, Clone)]
pub struct LevelSummary {
    pub field: f64,
    pub energies: Vec<f64>,
    pub parity_flip: Option<Vec<i8>>,
    pub parity_spatial: Option<Vec<i8>>,
}

#[derive(Debug, Clone, Copy)]
pub struct Diagnostics {
    pub max_norm_drift: f64,
    pub post_stop_energy_drift: f64,
    /// Largest `|measured − reconstructed|` over the checked points.
    pub closure_max_error: f64,
    /// Smallest `bound − |measured − reconstructed|`; non-negative on success.
    pub closure_min_margin: f64,
    pub closure_points: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub schedule: FieldSchedule,
    pub t_meas: f64,
    /// Post-stop record times, starting at `t_stop`.
    pub times: Vec<f64>,
    pub series: Vec<ThetaSeries>,
    pub p_ground: f64,
    pub levels: LevelSummary,
    pub diagnostics: Diagnostics,
}

fn observable_name(a: &Angle) -> String {
    format!("theta={}", a.label)
}

pub fn execute(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    schedule: &FieldSchedule,
) -> Result<RunOutcome, CliError> {
    let n = prep.model.n_sites();
    let mut observables = Vec::new();
    for a in &cfg.observable.theta {
        let op = rotated_magnetization(a.value, n).at(Stage::Model)?;
        observables.push((observable_name(a), op));
    }
    let icfg = integrator(cfg);
    let traj = evolve(
        &prep.model,
        schedule,
        &icfg,
        schedule.t_stop + prep.t_meas,
        &observables,
    )
    .at(Stage::Evolve)?;

    let post_field = schedule.post_stop_field();
    let spec = spectrum(&prep.model.hamiltonian(post_field).at(Stage::Model)?).at(Stage::Spectrum)?;
    let dec = decompose(&traj.stop_state, &spec).at(Stage::Analysis)?;
    let p_ground = ground_state_probability(&dec, cfg.degeneracy_tol);

    let stop = traj.stop_index;
    let times = traj.times[stop..].to_vec();
    let mut series = Vec::new();
    let mut max_error: f64 = 0.0;
    let mut min_margin = f64::INFINITY;
    let mut points = 0;
    for (a, (name, op)) in cfg.observable.theta.iter().zip(&observables) {
        let values = traj
            .observable(name)
            .expect("recorded observable")[stop..]
            .to_vec();
        let check = closure_check(&traj, &spec, &dec, op, &times, &values, schedule.t_stop, &icfg)?;
        max_error = max_error.max(check.max_error);
        min_margin = min_margin.min(check.min_margin);
        points += check.points;
        let amplitude = extract_amplitude(&times, &values, schedule.t_stop, cfg.observable.amplitude_method);
        series.push(ThetaSeries {
            angle: a.clone(),
            values,
            amplitude,
        });
    }

    let k = SUMMARY_LEVELS.min(spec.energies.len());
    let levels = LevelSummary {
        field: post_field,
        energies: spec.energies[..k].to_vec(),
        parity_flip: spec.parity_flip.as_ref().map(|p| p[..k].to_vec()),
        parity_spatial: spec.parity_spatial.as_ref().map(|p| p[..k].to_vec()),
    };
    Ok(RunOutcome {
        schedule: *schedule,
        t_meas: prep.t_meas,
        times,
        series,
        p_ground,
        levels,
        diagnostics: Diagnostics {
            max_norm_drift: traj.max_norm_drift,
            post_stop_energy_drift: traj.post_stop_energy_drift,
            closure_max_error: max_error,
            closure_min_margin: if points == 0 { 0.0 } else { min_margin },
            closure_points: points,
        },
    })
}

struct ClosureCheck {
    max_error: f64,
    min_margin: f64,
    points: usize,
}

/// Compares the measured post-stop series against the eigenstate expansion
/// of the stop state.
///
/// Crank-Nicolson advances each eigenstate of the (shifted) post-stop
/// Hamiltonian by the phase `2 atan(x h / 2)` instead of `x h`. The per-step
/// lag `δ(x) = x h − 2 atan(x h / 2)` is known exactly, so after `k` steps
/// each term of the series may be off by at most `|w| min(2, k |δ_n − δ_m|)`.
/// Exceeding that bound means the propagation is not doing what the
/// expansion says it should.
#[allow(clippy::too_many_arguments)]
fn closure_check(
    traj: &Trajectory,
    spec: &SpectrumResult,
    dec: &gsprobe_core::analysis::OverlapDecomposition,
    op: &gsprobe_core::spin::SparseOperator,
    times: &[f64],
    values: &[f64],
    t_stop: f64,
    icfg: &IntegratorConfig,
) -> Result<ClosureCheck, CliError> {
    let terms = series_terms(dec, op, spec).at(Stage::Closure)?;
    let h = icfg.dt;
    let shift = if icfg.center_energy {
        traj.energy[traj.stop_index]
    } else {
        0.0
    };
    let lag = |e: f64| {
        let x = (e - shift) * h;
        x - 2.0 * (x / 2.0).atan()
    };
    let lags: Vec<f64> = spec.energies.iter().map(|&e| lag(e)).collect();
    let spread: Vec<(f64, f64)> = terms
        .iter()
        .map(|t| (t.weight.norm(), (lags[t.n] - lags[t.m]).abs()))
        .collect();

    let stride = times.len().div_ceil(CLOSURE_POINTS).max(1);
    let mut phases = vec![C64::new(0.0, 0.0); spec.energies.len()];
    let mut out = ClosureCheck {
        max_error: 0.0,
        min_margin: f64::INFINITY,
        points: 0,
    };
    for i in (0..times.len()).step_by(stride) {
        let t = times[i] - t_stop;
        let k = (t / h).round();
        for term in &terms {
            phases[term.n] = C64::from_polar(1.0, -spec.energies[term.n] * t);
            phases[term.m] = C64::from_polar(1.0, -spec.energies[term.m] * t);
        }
        let z: C64 = terms
            .iter()
            .map(|term| term.weight * phases[term.m].conj() * phases[term.n])
            .sum();
        let bound: f64 = spread.iter().map(|(w, d)| w * (k * d).min(2.0)).sum::<f64>() + CLOSURE_FLOOR;
        let err = (values[i] - z.re).abs();
        if err > bound {
            return Err(CliError::Core {
                stage: Stage::Closure,
                source: CoreError::Consistency(format!(
                    "measured series deviates from the eigenstate expansion by {err:e} at t = {} (allowed {bound:e})",
                    times[i]
                )),
            });
        }
        out.max_error = out.max_error.max(err);
        out.min_margin = out.min_margin.min(bound - err);
        out.points += 1;
    }
    Ok(out)
}

//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria listed in `KNOWN_FAILURES` still print FAIL when they fail; the
//! process exits nonzero only when some other criterion fails, or when a
//! listed one unexpectedly passes (so the list cannot go stale).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6};
use std::fs;
use std::process::Command;
use std::time::Instant;

use gsprobe::config::ConfigLayers;
use gsprobe::runner::{default_schedule, execute, prepare};
use gsprobe::sweep::{sweep_stop, sweep_tau, thread_pool, SweepRow};
use gsprobe::ExperimentConfig;
use gsprobe_core::analysis::{
    decompose, extract_amplitude, lz_analytic_curves, reconstruct_series, spectrum, AmplitudeMethod,
};
use gsprobe_core::couplings::{
    fit_power_law, ion_chain_couplings, solve_equilibrium, transverse_modes, CouplingParams,
    IonChain, DEFAULT_BETA,
};
use gsprobe_core::model::{lz_hamiltonian, FieldSchedule, ModelSpec, PostStop};
use gsprobe_core::propagator::{evolve, exact_reference, IntegratorConfig};
use gsprobe_core::spin::{rotated_magnetization, SparseOperator, StateVector, C64};

/// Criteria that fail for reasons recorded in the decisions notes.
const KNOWN_FAILURES: &[usize] = &[6, 7, 8];

type Outcome = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

trait Stringly<T> {
    fn s(self) -> Result<T, String>;
}

impl<T, E: std::fmt::Display> Stringly<T> for Result<T, E> {
    fn s(self) -> Result<T, String> {
        self.map_err(|e| e.to_string())
    }
}

fn config(sets: &[&str]) -> Result<ExperimentConfig, String> {
    let mut l = ConfigLayers::default();
    for s in sets {
        l = l.with_set(s).s()?;
    }
    l.resolve().s()
}

fn tfim(n: usize) -> Result<ModelSpec, String> {
    let (_, _, j) = ion_chain_couplings(n, DEFAULT_BETA, &CouplingParams::default()).s()?;
    ModelSpec::tfim(j, 1.0).s()
}

fn aligned_distance(a: &StateVector, b: &StateVector) -> f64 {
    let phase = C64::from_polar(1.0, a.inner(b).arg());
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x * phase - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn element(o: &SparseOperator, a: &StateVector, b: &StateVector) -> C64 {
    let mut ob = vec![C64::new(0.0, 0.0); b.dim()];
    o.apply_into(b.amplitudes(), &mut ob);
    a.amplitudes().iter().zip(&ob).map(|(x, y)| x.conj() * y).sum()
}

fn c1_unitarity() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for post in ["quench", "hold"] {
        let start = Instant::now();
        let cfg = config(&[&format!("schedule.post_stop={post}")])?;
        let prep = prepare(&cfg).s()?;
        let out = execute(&cfg, &prep, &default_schedule(&cfg).s()?).s()?;
        let secs = start.elapsed().as_secs_f64();
        let d = out.diagnostics;
        ok &= d.max_norm_drift < 1e-6 && d.post_stop_energy_drift < 1e-8 && secs < 60.0;
        lines.push(format!(
            "{post}: norm drift {:.1e}, energy drift {:.1e}, t_meas {:.2}, {secs:.1} s",
            d.max_norm_drift, d.post_stop_energy_drift, out.t_meas
        ));
    }
    verdict(ok, lines.join("; "))
}

fn c2_oracle() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for n in 2..=4 {
        let model = tfim(n)?;
        let sched = FieldSchedule::exponential(5.0, 0.4, 6.0, PostStop::QuenchToZero).s()?;
        let t_end = sched.t_stop + 1.0;
        let cfg = IntegratorConfig::default();
        let cn = evolve(&model, &sched, &cfg, t_end, &[]).s()?;
        let ex = exact_reference(&model, &sched, cfg.dt, t_end, &[]).s()?;
        let f = cn.final_state.fidelity(&ex.final_state);
        ok &= f > 1.0 - 1e-6;
        lines.push(format!("N={n} 1-F {:.1e}", 1.0 - f));
    }
    // convergence toward a much finer exact propagation
    let model = tfim(4)?;
    let sched = FieldSchedule::exponential(5.0, 0.4, 6.0, PostStop::QuenchToZero).s()?;
    let t_end = sched.t_stop + 1.0;
    let truth = exact_reference(&model, &sched, 2.5e-5, t_end, &[]).s()?;
    let dts = [4e-3, 2e-3, 1e-3];
    let mut errs = Vec::new();
    for &dt in &dts {
        let cfg = IntegratorConfig {
            dt,
            ..IntegratorConfig::default()
        };
        let cn = evolve(&model, &sched, &cfg, t_end, &[]).s()?;
        errs.push(aligned_distance(&cn.final_state, &truth.final_state));
    }
    let p = loglog_slope(&dts, &errs);
    ok &= (p - 2.0).abs() <= 0.15;
    lines.push(format!("slope {p:.3} (errors {:.2e} {:.2e} {:.2e})", errs[0], errs[1], errs[2]));
    verdict(ok, lines.join("; "))
}

fn c3_closure() -> Outcome {
    let n = 3;
    let model = tfim(n)?;
    let cfg = config(&["model.n_sites=3"])?;
    let t_meas = prepare(&cfg).s()?.t_meas;
    let sched = FieldSchedule::exponential(5.0, 0.4, 6.0, PostStop::QuenchToZero).s()?;
    let spec = spectrum(&model.hamiltonian(0.0).s()?).s()?;
    let icfg = IntegratorConfig {
        dt: 2.5e-4,
        ..IntegratorConfig::default()
    };
    let mut worst: f64 = 0.0;
    for theta in [FRAC_PI_6, FRAC_PI_3, FRAC_PI_2] {
        let o = rotated_magnetization(theta, n).s()?;
        let tr = evolve(&model, &sched, &icfg, sched.t_stop + t_meas, &[("o".into(), o.clone())]).s()?;
        let dec = decompose(&tr.stop_state, &spec).s()?;
        let (t, v) = tr.post_stop("o").ok_or("missing series")?;
        let rel: Vec<f64> = t.iter().map(|x| x - sched.t_stop).collect();
        let rec = reconstruct_series(&dec, &o, &spec, &rel).s()?;
        for (a, b) in rec.iter().zip(v) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(
        worst < 1e-6,
        format!("max |measured - reconstructed| = {worst:.2e} over t_meas = {t_meas:.2} at dt = 2.5e-4"),
    )
}

fn lz_stop(rate: f64, theta: f64, t_meas: f64) -> Result<(Vec<f64>, Vec<f64>, StateVector, f64), String> {
    let sched = FieldSchedule::linear(-20.0, rate, 20.0, PostStop::Hold).s()?;
    let o = rotated_magnetization(theta, 1).s()?;
    let tr = evolve(
        &ModelSpec::LandauZener,
        &sched,
        &IntegratorConfig::default(),
        sched.t_stop + t_meas,
        &[("o".into(), o)],
    )
    .s()?;
    let (t, v) = tr.post_stop("o").ok_or("missing series")?;
    Ok((t.to_vec(), v.to_vec(), tr.stop_state, sched.t_stop))
}

fn c4_lz_analytics() -> Outcome {
    let phi: Vec<f64> = (0..=400).map(|k| FRAC_PI_2 * k as f64 / 400.0).collect();
    let mut ok = true;
    let mut asym: f64 = 0.0;
    for theta in [FRAC_PI_6, FRAC_PI_2] {
        let (_, amp) = lz_analytic_curves(&phi, theta, 20.0).s()?;
        for i in 0..phi.len() {
            asym = asym.max((amp[i] - amp[phi.len() - 1 - i]).abs());
        }
        let argmax = (0..amp.len()).max_by(|&a, &b| amp[a].total_cmp(&amp[b])).unwrap();
        ok &= (phi[argmax] - FRAC_PI_4).abs() < 1e-12;
    }
    // rounding of the grid itself is the only asymmetry allowed
    ok &= asym < 1e-15;

    let spec = spectrum(&lz_hamiltonian(20.0)).s()?;
    let mut worst: f64 = 0.0;
    for rate in [1.5, 3.25, 5.0, 9.0] {
        for theta in [FRAC_PI_6, FRAC_PI_3, FRAC_PI_2] {
            let (t, v, stop, t_stop) = lz_stop(rate, theta, 1.0)?;
            let dec = decompose(&stop, &spec).s()?;
            let o = rotated_magnetization(theta, 1).s()?;
            let o12 = element(&o, &spec.eigenvectors[0], &spec.eigenvectors[1]);
            let predicted = 2.0 * (dec.overlaps[0].conj() * dec.overlaps[1] * o12).norm();
            let got = extract_amplitude(&t, &v, t_stop, AmplitudeMethod::FirstExtrema).amplitude;
            worst = worst.max((got - predicted).abs() / predicted);
        }
    }
    ok &= worst < 0.01;
    verdict(
        ok,
        format!("symmetry residue {asym:.1e}, peak at pi/4, worst relative amplitude error {:.3}%", 100.0 * worst),
    )
}

fn column<'a>(rows: &'a [SweepRow], theta: f64) -> Vec<&'a SweepRow> {
    rows.iter().filter(|r| (r.theta - theta).abs() < 1e-12).collect()
}

fn c5_lz_sweep() -> Outcome {
    let start = Instant::now();
    let cfg = config(&["model.kind=lz", r#"observable.theta=["pi/6", "pi/3", "pi/2"]"#])?;
    let prep = prepare(&cfg).s()?;
    let rows = sweep_tau(&cfg, &prep, &thread_pool(1).s()?);
    let secs = start.elapsed().as_secs_f64();
    if let Some(r) = rows.iter().find(|r| r.error.is_some()) {
        return Err(format!("row failed: {:?}", r.error));
    }
    let top = column(&rows, FRAC_PI_2);
    let amps: Vec<f64> = top.iter().map(|r| r.amplitude.unwrap()).collect();
    let probs: Vec<f64> = top.iter().map(|r| r.p_ground.unwrap()).collect();
    let argmax = (0..amps.len()).max_by(|&a, &b| amps[a].total_cmp(&amps[b])).unwrap();
    let crossing = (0..probs.len())
        .min_by(|&a, &b| (probs[a] - 0.5).abs().total_cmp(&(probs[b] - 0.5).abs()))
        .unwrap();
    let mut ok = argmax.abs_diff(crossing) <= 1 && secs < 10.0;
    for tau in &cfg.sweep.tau {
        let a: Vec<f64> = [FRAC_PI_6, FRAC_PI_3, FRAC_PI_2]
            .iter()
            .map(|&th| {
                rows.iter()
                    .find(|r| r.tau == *tau && (r.theta - th).abs() < 1e-12)
                    .and_then(|r| r.amplitude)
                    .unwrap_or(f64::NAN)
            })
            .collect();
        ok &= a[0] <= a[1] && a[1] <= a[2];
    }
    verdict(
        ok,
        format!(
            "amplitude max at tau = {}, P_gs nearest 0.5 at tau = {} (P = {:?}), theta-monotone, {secs:.1} s",
            cfg.sweep.tau[argmax],
            cfg.sweep.tau[crossing],
            probs.iter().map(|p| (p * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn c6_gap() -> Outcome {
    let cfg = config(&[])?;
    let prep = prepare(&cfg).s()?;
    verdict(
        (prep.gap.b_star - 0.72).abs() <= 0.08,
        format!(
            "coupled-gap minimum at B = {:.4} (gap {:.4}); target 0.72 +- 0.08",
            prep.gap.b_star, prep.gap.gap_star
        ),
    )
}

fn c7_tfim_sweep() -> Outcome {
    let start = Instant::now();
    let cfg = config(&[r#"observable.theta=["pi/2"]"#])?;
    let prep = prepare(&cfg).s()?;
    let rows = sweep_tau(&cfg, &prep, &thread_pool(1).s()?);
    let secs = start.elapsed().as_secs_f64();
    if let Some(r) = rows.iter().find(|r| r.error.is_some()) {
        return Err(format!("row failed: {:?}", r.error));
    }
    let tau: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    let amp: Vec<f64> = rows.iter().map(|r| r.amplitude.unwrap()).collect();
    let p: Vec<f64> = rows.iter().map(|r| r.p_ground.unwrap()).collect();
    let im = (0..amp.len()).max_by(|&a, &b| amp[a].total_cmp(&amp[b])).unwrap();
    let max_ok = (tau[im] - 0.4).abs() <= 0.1 + 1e-12;
    let p_ok = (p[im] - 0.61).abs() <= 0.10;
    let minima: Vec<f64> = (1..amp.len() - 1)
        .filter(|&i| (0.2..=0.45).contains(&tau[i]) && amp[i] < amp[i - 1] && amp[i] < amp[i + 1])
        .map(|i| tau[i])
        .collect();
    let at = |t: f64| tau.iter().position(|&x| (x - t).abs() < 1e-12).map(|i| p[i]);
    let (p06, p10, p20) = (at(0.6), at(1.0), at(2.0));
    let mono = match (p06, p10, p20) {
        (Some(a), Some(b), Some(c)) => a < b && b < c && c > 0.9,
        _ => false,
    };
    let ok = max_ok && p_ok && !minima.is_empty() && mono && secs < 900.0;
    verdict(
        ok,
        format!(
            "max at tau = {} [{}], P_gs there {:.3} [{}], local minima in [0.2, 0.45] at {:?} [{}], P_gs(0.6, 1, 2) = {:.3} {:.3} {:.3} [{}], {secs:.0} s",
            tau[im],
            if max_ok { "ok" } else { "x" },
            p[im],
            if p_ok { "ok" } else { "x" },
            minima,
            if minima.is_empty() { "x" } else { "ok" },
            p06.unwrap_or(f64::NAN),
            p10.unwrap_or(f64::NAN),
            p20.unwrap_or(f64::NAN),
            if mono { "ok" } else { "x" },
        ),
    )
}

/// Strict-majority sign test on the stop-field sweep for one `tau`: above
/// `pivot` the amplitude should grow as the field is lowered, below it the
/// amplitude should shrink.
fn sign_test(rows: &[&SweepRow], pivot: f64) -> (bool, String) {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.b_target.unwrap(), r.amplitude.unwrap()))
        .collect();
    let (mut up_above, mut n_above, mut down_below, mut n_below) = (0, 0, 0, 0);
    for w in pts.windows(2) {
        let ((b_lo, a_lo), (b_hi, a_hi)) = (w[0], w[1]);
        if b_lo >= pivot {
            n_above += 1;
            up_above += usize::from(a_lo > a_hi);
        } else if b_hi <= pivot {
            n_below += 1;
            down_below += usize::from(a_lo < a_hi);
        }
    }
    let ok = 2 * up_above > n_above && 2 * down_below > n_below;
    (ok, format!("above {up_above}/{n_above} rising, below {down_below}/{n_below} falling"))
}

fn c8_hold_sweep() -> Outcome {
    let cfg = config(&[
        "schedule.post_stop=hold",
        "sweep.tau=[0.2, 0.4, 0.6]",
        r#"observable.theta=["pi/2"]"#,
    ])?;
    let prep = prepare(&cfg).s()?;
    let rows = sweep_stop(&cfg, &prep, &thread_pool(1).s()?).s()?;
    if let Some(r) = rows.iter().find(|r| r.error.is_some()) {
        return Err(format!("row failed: {:?}", r.error));
    }
    let b_star = prep.gap.b_star;
    let mut ok = true;
    let mut lines = Vec::new();
    for &tau in &cfg.sweep.tau {
        let sel: Vec<&SweepRow> = rows.iter().filter(|r| r.tau == tau).collect();
        let (pass, msg) = sign_test(&sel, b_star);
        let (lit, lit_msg) = sign_test(&sel, 0.72);
        ok &= pass;
        lines.push(format!(
            "tau {tau}: about B* = {b_star:.3} {msg} [{}]; about 0.72 {lit_msg} [{}]",
            if pass { "ok" } else { "x" },
            if lit { "ok" } else { "x" }
        ));
    }
    verdict(ok, lines.join("; "))
}

fn c9_couplings() -> Outcome {
    let mut ok = true;
    let (chain, _, j) = ion_chain_couplings(10, DEFAULT_BETA, &CouplingParams::default()).s()?;
    let alpha = fit_power_law(&j, &chain).s()?;
    ok &= (alpha - 1.0).abs() <= 0.15;

    // force balance at +-u: u = 1/(2u)^2
    let u2 = solve_equilibrium(2).s()?;
    let e2 = (u2[0] + 0.25f64.cbrt()).abs().max((u2[1] - 0.25f64.cbrt()).abs());
    let u3 = solve_equilibrium(3).s()?;
    let c3 = 1.25f64.cbrt();
    let e3 = (u3[0] + c3).abs().max(u3[1].abs()).max((u3[2] - c3).abs());
    ok &= e2 < 1e-9 && e3 < 1e-9;

    let mut com_err: f64 = 0.0;
    for n in [2, 3, 5, 10] {
        let modes = transverse_modes(&IonChain::equilibrium(n, DEFAULT_BETA).s()?).s()?;
        let expect = 1.0 / (n as f64).sqrt();
        for i in 0..n {
            com_err = com_err.max((modes.component(i, 0).abs() - expect).abs());
        }
        com_err = com_err.max((modes.frequencies[0] - 1.0).abs());
    }
    ok &= com_err < 1e-9;
    verdict(
        ok,
        format!("alpha = {alpha:.4}; N=2 position error {e2:.1e}, N=3 {e3:.1e}; COM mode deviation {com_err:.1e}"),
    )
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().s()?;
    let bin = env!("CARGO_BIN_EXE_gsprobe");
    let mut outputs = Vec::new();
    for jobs in ["1", "8"] {
        let out = dir.path().join(format!("jobs{jobs}"));
        let status = Command::new(bin)
            .args(["sweep-tau", "--jobs", jobs, "--out"])
            .arg(&out)
            .output()
            .s()?;
        if !status.status.success() {
            return Err(format!(
                "--jobs {jobs} exited with {:?}: {}",
                status.status.code(),
                String::from_utf8_lossy(&status.stderr)
            ));
        }
        outputs.push(fs::read(out.join("sweep_tau.csv")).s()?);
    }
    verdict(
        outputs[0] == outputs[1],
        format!("sweep_tau.csv: {} vs {} bytes, identical = {}", outputs[0].len(), outputs[1].len(), outputs[0] == outputs[1]),
    )
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "unitarity and energy conservation", c1_unitarity),
        (2, "oracle equivalence and second order", c2_oracle),
        (3, "eigenstate-expansion closure", c3_closure),
        (4, "two-level analytics", c4_lz_analytics),
        (5, "two-level sweep shape", c5_lz_sweep),
        (6, "Ising gap location", c6_gap),
        (7, "Ising quench amplitude sweep", c7_tfim_sweep),
        (8, "Ising hold sweep", c8_hold_sweep),
        (9, "couplings", c9_couplings),
        (10, "determinism across worker counts", c10_determinism),
    ];
    let mut unexpected = Vec::new();
    for (id, name, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let known = KNOWN_FAILURES.contains(&id);
        match &outcome {
            Ok(detail) => {
                println!("PASS criterion {id} ({name}): {detail} [{secs:.1} s]");
                if known {
                    println!("  note: criterion {id} is listed as a known failure but passed");
                    unexpected.push(id);
                }
            }
            Err(detail) => {
                let tag = if known { " (known, see notes)" } else { "" };
                println!("FAIL criterion {id} ({name}){tag}: {detail} [{secs:.1} s]");
                if !known {
                    unexpected.push(id);
                }
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}

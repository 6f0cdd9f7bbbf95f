//! Crank-Nicolson time evolution and an exact piecewise-constant reference.
//!
//! One step solves `(I + i h/2 H_b) ψ' = (I − i h/2 H_a) ψ`. With
//! [`HamiltonianSampling::Endpoints`], `H_a = H(t)` and `H_b = H(t+h)`; that
//! form is not unitary while the field moves and the norm ends up off by
//! `h²/4 (⟨H²⟩_0 − ⟨H²⟩_t)`, which is large for many spins in a strong field.
//! The default [`HamiltonianSampling::Midpoint`] uses `H(t+h/2)` on both
//! sides, a Cayley transform that is unitary up to the solver tolerance.
//!
//! The grid is split at `t_stop`: the ramp segment is divided into equal
//! steps no longer than `dt` that land exactly on `t_stop`, and every later
//! step is exactly `dt` under the constant post-stop Hamiltonian.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{initial_state, FieldSchedule, ModelSpec};
use crate::spin::{inner, l2_norm, SparseOperator, StateVector, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Norm drift beyond which a run is rejected outright.
pub const NORM_DRIFT_LIMIT: f64 = 1e-4;

/// Largest dense system factorized by the direct solver.
pub const DENSE_SOLVER_MAX_DIM: usize = 4096;

/// Site cap for the exact reference propagator.
pub const EXACT_REFERENCE_MAX_SITES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Jacobi while it contracts fast, dense LU otherwise.
    Auto,
    Jacobi,
    DenseLu,
}

/// Where the ramp Hamiltonian is evaluated within a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HamiltonianSampling {
    Midpoint,
    Endpoints,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    /// Bound on `‖A ψ' − b‖ / ‖ψ‖` for each implicit solve.
    pub solver_tolerance: f64,
    pub record_stride: usize,
    pub solver: SolverKind,
    pub sampling: HamiltonianSampling,
    /// Solve each step with `H − ⟨H⟩·I`. Only the global phase changes, and
    /// the relative phase error of the Cayley map, which grows with the
    /// cube of the energies measured from the origin, shrinks.
    pub center_energy: bool,
    pub max_iterations: usize,
    pub retain_states: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            solver_tolerance: 1e-13,
            record_stride: 1,
            solver: SolverKind::Auto,
            sampling: HamiltonianSampling::Midpoint,
            center_energy: true,
            max_iterations: 200,
            retain_states: false,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.solver_tolerance > 0.0) {
            return Err(Error::Domain("solver tolerance must be positive".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::Domain("record stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Recorded evolution.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Present when requested.
    pub states: Option<Vec<StateVector>>,
    /// One series per requested observable, sampled at `times`.
    pub observables: Vec<(String, Vec<f64>)>,
    /// `⟨ψ|H(t)|ψ⟩` at each recorded time.
    pub energy: Vec<f64>,
    /// Index into `times` of the `t_stop` record.
    pub stop_index: usize,
    pub stop_state: StateVector,
    pub final_state: StateVector,
    /// Largest `|‖ψ‖ − 1|` seen at any step.
    pub max_norm_drift: f64,
    /// Largest `|E(t) − E(t_stop)|` over the post-stop records.
    pub post_stop_energy_drift: f64,
}

impl Trajectory {
    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.observables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Times and values of an observable from `t_stop` on.
    pub fn post_stop(&self, name: &str) -> Option<(&[f64], &[f64])> {
        let v = self.observable(name)?;
        Some((&self.times[self.stop_index..], &v[self.stop_index..]))
    }
}

/// `H(B) = S + B·D`, applied without assembling the sum.
struct AffineOp {
    s: SparseOperator,
    d: SparseOperator,
    s_diag: Vec<C64>,
    d_diag: Vec<C64>,
    s_offdiag_rows: Vec<f64>,
    d_offdiag_rows: Vec<f64>,
}

impl AffineOp {
    fn new(model: &ModelSpec) -> Result<Self> {
        let s = model.static_part()?;
        let d = model.drive_part()?;
        let offdiag = |m: &SparseOperator| -> Vec<f64> {
            (0..m.dim())
                .map(|r| m.row(r).filter(|&(c, _)| c != r).map(|(_, v)| v.norm()).sum())
                .collect()
        };
        Ok(Self {
            s_diag: s.diagonal(),
            d_diag: d.diagonal(),
            s_offdiag_rows: offdiag(&s),
            d_offdiag_rows: offdiag(&d),
            s,
            d,
        })
    }

    fn dim(&self) -> usize {
        self.s.dim()
    }

    fn apply(&self, b: f64, x: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        self.s.apply_into(x, out);
        if b != 0.0 {
            self.d.apply_into(x, scratch);
            for (o, v) in out.iter_mut().zip(scratch.iter()) {
                *o += v * b;
            }
        }
    }

    fn diag(&self, b: f64, i: usize) -> C64 {
        self.s_diag[i] + self.d_diag[i] * b
    }

    /// Upper bound on the Jacobi iteration matrix norm for `|B| ≤ b_max`.
    fn jacobi_contraction(&self, h: f64, b_max: f64) -> f64 {
        self.s_offdiag_rows
            .iter()
            .zip(&self.d_offdiag_rows)
            .map(|(s, d)| 0.5 * h * (s + b_max.abs() * d))
            .fold(0.0, f64::max)
    }

    fn assemble(&self, b: f64) -> SparseOperator {
        self.s.add_scaled(&self.d, C64::new(b, 0.0))
    }
}

/// Linear solver for `(I + i h/2 H) x = rhs`.
enum Solver {
    Jacobi,
    Dense(nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>),
}

struct Stepper<'a> {
    op: &'a AffineOp,
    tol: f64,
    max_iter: usize,
    /// Energy origin: steps solve with `H − shift·I`.
    shift: f64,
    rhs: Vec<C64>,
    work: Vec<C64>,
    scratch: Vec<C64>,
}

fn apply_shifted(op: &AffineOp, b: f64, shift: f64, x: &[C64], out: &mut [C64], scratch: &mut [C64]) {
    op.apply(b, x, out, scratch);
    if shift != 0.0 {
        for (o, v) in out.iter_mut().zip(x) {
            *o -= v * shift;
        }
    }
}

impl<'a> Stepper<'a> {
    fn new(op: &'a AffineOp, config: &IntegratorConfig) -> Self {
        let n = op.dim();
        Self {
            op,
            tol: config.solver_tolerance,
            max_iter: config.max_iterations,
            shift: 0.0,
            rhs: vec![ZERO; n],
            work: vec![ZERO; n],
            scratch: vec![ZERO; n],
        }
    }

    fn choose(&self, kind: SolverKind, h: f64, b_now: f64, b_next: f64) -> Result<Solver> {
        let dim = self.op.dim();
        let use_dense = match kind {
            SolverKind::Jacobi => false,
            SolverKind::DenseLu => true,
            SolverKind::Auto => {
                self.op.jacobi_contraction(h, b_now.abs().max(b_next.abs())) > 0.5
                    && dim <= DENSE_SOLVER_MAX_DIM
            }
        };
        if !use_dense {
            return Ok(Solver::Jacobi);
        }
        if dim > DENSE_SOLVER_MAX_DIM {
            return Err(Error::Capability {
                dim,
                limit: DENSE_SOLVER_MAX_DIM,
            });
        }
        Ok(Solver::Dense(dense_system(&self.op.assemble(b_next), h, self.shift).lu()))
    }

    /// One step from field `b_now` to `b_next`, in place.
    fn step(&mut self, psi: &mut [C64], h: f64, b_now: f64, b_next: f64, solver: &Solver) -> Result<()> {
        let half = C64::new(0.0, 0.5 * h);
        apply_shifted(self.op, b_now, self.shift, psi, &mut self.work, &mut self.scratch);
        for ((r, p), w) in self.rhs.iter_mut().zip(psi.iter()).zip(&self.work) {
            *r = p - half * w;
        }
        let psi_norm = l2_norm(psi).max(f64::MIN_POSITIVE);
        match solver {
            Solver::Dense(lu) => {
                let x = lu
                    .solve(&DVector::from_column_slice(&self.rhs))
                    .ok_or(Error::Solver {
                        residual: f64::INFINITY,
                        tolerance: self.tol,
                    })?;
                psi.copy_from_slice(x.as_slice());
                let residual = self.residual(psi, h, b_next) / psi_norm;
                if residual > self.tol {
                    return Err(Error::Solver {
                        residual,
                        tolerance: self.tol,
                    });
                }
                Ok(())
            }
            Solver::Jacobi => {
                // explicit predictor: x0 = (I − i h/2 H_next) rhs
                apply_shifted(self.op, b_next, self.shift, &self.rhs, &mut self.work, &mut self.scratch);
                for ((p, r), w) in psi.iter_mut().zip(&self.rhs).zip(&self.work) {
                    *p = r - half * w;
                }
                let mut residual = f64::INFINITY;
                for _ in 0..self.max_iter {
                    apply_shifted(self.op, b_next, self.shift, psi, &mut self.work, &mut self.scratch);
                    let mut sq = 0.0;
                    for i in 0..psi.len() {
                        let r = self.rhs[i] - psi[i] - half * self.work[i];
                        sq += r.norm_sqr();
                        self.work[i] = r;
                    }
                    residual = sq.sqrt() / psi_norm;
                    if residual <= self.tol {
                        return Ok(());
                    }
                    for (i, p) in psi.iter_mut().enumerate() {
                        *p += self.work[i] / (C64::new(1.0, 0.0) + half * (self.op.diag(b_next, i) - self.shift));
                    }
                }
                Err(Error::Solver {
                    residual,
                    tolerance: self.tol,
                })
            }
        }
    }

    fn residual(&mut self, x: &[C64], h: f64, b: f64) -> f64 {
        let half = C64::new(0.0, 0.5 * h);
        apply_shifted(self.op, b, self.shift, x, &mut self.work, &mut self.scratch);
        x.iter()
            .zip(&self.work)
            .zip(&self.rhs)
            .map(|((xi, wi), ri)| (xi + half * wi - ri).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn energy(&mut self, psi: &[C64], b: f64) -> f64 {
        self.op.apply(b, psi, &mut self.work, &mut self.scratch);
        inner(psi, &self.work).re
    }
}

fn dense_system(h_op: &SparseOperator, h: f64, shift: f64) -> DMatrix<C64> {
    let n = h_op.dim();
    let mut a = DMatrix::from_element(n, n, ZERO);
    for (r, c, v) in h_op.entries() {
        a[(r, c)] = C64::new(0.0, 0.5 * h) * v;
    }
    for i in 0..n {
        a[(i, i)] += C64::new(1.0, -0.5 * h * shift);
    }
    a
}

/// Single Crank-Nicolson step; the result is not renormalized.
pub fn cn_step(
    h_now: &SparseOperator,
    h_next: &SparseOperator,
    psi: &StateVector,
    dt: f64,
    tol: f64,
) -> Result<StateVector> {
    let dim = psi.dim();
    for op in [h_now, h_next] {
        if op.dim() != dim {
            return Err(Error::Shape {
                expected: dim,
                actual: op.dim(),
            });
        }
    }
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    // H_now enters as the static part at field 0 and H_next − H_now as the
    // drive at field 1.
    let op = AffineOp {
        s_diag: h_now.diagonal(),
        d_diag: h_next.sub(h_now).diagonal(),
        s_offdiag_rows: vec![0.0; dim],
        d_offdiag_rows: vec![0.0; dim],
        s: h_now.clone(),
        d: h_next.sub(h_now),
    };
    let contraction = {
        let rows = |m: &SparseOperator| -> f64 {
            (0..dim)
                .map(|r| m.row(r).filter(|&(c, _)| c != r).map(|(_, v)| v.norm()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        0.5 * dt * rows(h_next)
    };
    let config = IntegratorConfig {
        dt,
        solver_tolerance: tol,
        ..IntegratorConfig::default()
    };
    let mut stepper = Stepper::new(&op, &config);
    let solver = if contraction > 0.5 && dim <= DENSE_SOLVER_MAX_DIM {
        Solver::Dense(dense_system(h_next, dt, 0.0).lu())
    } else {
        Solver::Jacobi
    };
    let mut amps = psi.amplitudes().to_vec();
    stepper.step(&mut amps, dt, 0.0, 1.0, &solver)?;
    Ok(StateVector::from_raw(amps, psi.n_sites()))
}

/// Ramp steps of equal length at most `dt`, landing exactly on `t_stop`.
fn ramp_grid(t_stop: f64, dt: f64) -> (usize, f64) {
    if t_stop <= 0.0 {
        return (0, dt);
    }
    let n = ((t_stop / dt) - 1e-9).ceil().max(1.0) as usize;
    (n, t_stop / n as f64)
}

fn post_grid(t_stop: f64, t_end: f64, dt: f64) -> usize {
    ((t_end - t_stop) / dt - 1e-9).ceil().max(0.0) as usize
}

struct Recorder<'a> {
    observables: &'a [(String, SparseOperator)],
    times: Vec<f64>,
    series: Vec<Vec<f64>>,
    energy: Vec<f64>,
    states: Option<Vec<StateVector>>,
    n_sites: usize,
}

impl<'a> Recorder<'a> {
    fn new(observables: &'a [(String, SparseOperator)], n_sites: usize, retain: bool) -> Self {
        Self {
            observables,
            times: Vec::new(),
            series: vec![Vec::new(); observables.len()],
            energy: Vec::new(),
            states: retain.then(Vec::new),
            n_sites,
        }
    }

    fn record(&mut self, t: f64, psi: &[C64], energy: f64) -> Result<()> {
        self.times.push(t);
        for ((_, op), s) in self.observables.iter().zip(&mut self.series) {
            s.push(crate::spin::expectation_raw(op, psi)?);
        }
        self.energy.push(energy);
        if let Some(st) = &mut self.states {
            st.push(StateVector::from_raw(psi.to_vec(), self.n_sites));
        }
        Ok(())
    }

    fn finish(
        self,
        stop_index: usize,
        stop_state: StateVector,
        final_state: StateVector,
        max_norm_drift: f64,
    ) -> Trajectory {
        let e_stop = self.energy[stop_index];
        let post_stop_energy_drift = self.energy[stop_index..]
            .iter()
            .map(|e| (e - e_stop).abs())
            .fold(0.0, f64::max);
        Trajectory {
            times: self.times,
            states: self.states,
            observables: self
                .observables
                .iter()
                .map(|(n, _)| n.clone())
                .zip(self.series)
                .collect(),
            energy: self.energy,
            stop_index,
            stop_state,
            final_state,
            max_norm_drift,
            post_stop_energy_drift,
        }
    }
}

fn check_observables(observables: &[(String, SparseOperator)], dim: usize) -> Result<()> {
    for (_, op) in observables {
        if op.dim() != dim {
            return Err(Error::Shape {
                expected: dim,
                actual: op.dim(),
            });
        }
        if !op.is_hermitian() {
            return Err(Error::Hermiticity {
                residue: op.hermiticity_residue(),
            });
        }
    }
    Ok(())
}

fn check_end(schedule: &FieldSchedule, t_end: f64) -> Result<()> {
    if !(t_end >= schedule.t_stop) {
        return Err(Error::Domain(format!(
            "t_end = {t_end} precedes t_stop = {}",
            schedule.t_stop
        )));
    }
    Ok(())
}

/// Crank-Nicolson evolution from the initial ground state to `t_end`.
pub fn evolve(
    model: &ModelSpec,
    schedule: &FieldSchedule,
    config: &IntegratorConfig,
    t_end: f64,
    observables: &[(String, SparseOperator)],
) -> Result<Trajectory> {
    config.validate()?;
    check_end(schedule, t_end)?;
    check_observables(observables, model.dim())?;
    let op = AffineOp::new(model)?;
    let mut psi = initial_state(model, schedule)?.into_amplitudes();
    let n_sites = model.n_sites();
    let mut stepper = Stepper::new(&op, config);
    let mut rec = Recorder::new(observables, n_sites, config.retain_states);
    let stride = config.record_stride;
    let mut max_drift: f64 = 0.0;
    let mut track = |psi: &[C64]| -> Result<()> {
        let drift = (l2_norm(psi) - 1.0).abs();
        max_drift = max_drift.max(drift);
        if drift > NORM_DRIFT_LIMIT {
            return Err(Error::IntegrationQuality {
                drift,
                limit: NORM_DRIFT_LIMIT,
            });
        }
        Ok(())
    };

    let (n1, h1) = ramp_grid(schedule.t_stop, config.dt);
    let b_start = schedule.ramp_value(0.0);
    rec.record(0.0, &psi, stepper.energy(&psi, b_start))?;
    if n1 > 0 {
        let ramp_extreme = schedule.ramp_value(0.0).abs().max(schedule.stop_value().abs());
        let solver = match config.solver {
            // a dense factorization per step is only worth it for tiny systems
            SolverKind::DenseLu => None,
            kind => Some(stepper.choose(kind, h1, ramp_extreme, ramp_extreme)?),
        };
        for k in 0..n1 {
            let t0 = k as f64 * h1;
            let t1 = if k + 1 == n1 { schedule.t_stop } else { (k + 1) as f64 * h1 };
            let (b_now, b_next) = match config.sampling {
                HamiltonianSampling::Midpoint => {
                    let b = schedule.ramp_value(0.5 * (t0 + t1));
                    (b, b)
                }
                HamiltonianSampling::Endpoints => (schedule.ramp_value(t0), schedule.ramp_value(t1)),
            };
            match &solver {
                Some(s) => {
                    if config.center_energy {
                        stepper.shift = stepper.energy(&psi, b_now);
                    }
                    stepper.step(&mut psi, h1, b_now, b_next, s)?
                }
                None => {
                    if config.center_energy {
                        stepper.shift = stepper.energy(&psi, b_now);
                    }
                    let s = stepper.choose(SolverKind::DenseLu, h1, b_now, b_next)?;
                    stepper.step(&mut psi, h1, b_now, b_next, &s)?;
                }
            }
            track(&psi)?;
            if (k + 1) % stride == 0 && k + 1 != n1 {
                rec.record(t1, &psi, stepper.energy(&psi, schedule.ramp_value(t1)))?;
            }
        }
    }

    let b_post = schedule.post_stop_field();
    let stop_index = if n1 > 0 {
        rec.record(schedule.t_stop, &psi, stepper.energy(&psi, b_post))?;
        rec.times.len() - 1
    } else {
        // the initial record already sits at t_stop = 0; re-evaluate its
        // energy under the post-stop Hamiltonian
        rec.energy[0] = stepper.energy(&psi, b_post);
        0
    };
    let stop_state = StateVector::from_raw(psi.clone(), n_sites);

    let n2 = post_grid(schedule.t_stop, t_end, config.dt);
    if n2 > 0 {
        // ⟨H⟩ is conserved from here on, so one origin serves every step
        stepper.shift = if config.center_energy { rec.energy[stop_index] } else { 0.0 };
        let solver = stepper.choose(config.solver, config.dt, b_post, b_post)?;
        for k in 1..=n2 {
            stepper.step(&mut psi, config.dt, b_post, b_post, &solver)?;
            track(&psi)?;
            if k % stride == 0 {
                let t = schedule.t_stop + k as f64 * config.dt;
                rec.record(t, &psi, stepper.energy(&psi, b_post))?;
            }
        }
    }
    let final_state = StateVector::from_raw(psi, n_sites);
    Ok(rec.finish(stop_index, stop_state, final_state, max_drift))
}

/// Frozen-Hamiltonian propagator `exp(−i h H)` built from a dense
/// eigendecomposition.
struct DenseExp {
    vectors: DMatrix<C64>,
    energies: Vec<f64>,
}

impl DenseExp {
    fn new(h: &SparseOperator) -> Self {
        if h.is_real() {
            let e = SymmetricEigen::new(h.to_dense().map(|v| v.re));
            Self {
                vectors: e.eigenvectors.map(|v| C64::new(v, 0.0)),
                energies: e.eigenvalues.iter().copied().collect(),
            }
        } else {
            let e = SymmetricEigen::new(h.to_dense());
            Self {
                vectors: e.eigenvectors,
                energies: e.eigenvalues.iter().copied().collect(),
            }
        }
    }

    fn advance(&self, psi: &mut [C64], h: f64) {
        let v = DVector::from_column_slice(psi);
        let mut c = self.vectors.ad_mul(&v);
        for (ci, e) in c.iter_mut().zip(&self.energies) {
            *ci *= C64::from_polar(1.0, -e * h);
        }
        psi.copy_from_slice((&self.vectors * c).as_slice());
    }
}

/// Exact propagation on the same grid as [`evolve`], freezing the
/// Hamiltonian at each step's midpoint. States are always retained.
pub fn exact_reference(
    model: &ModelSpec,
    schedule: &FieldSchedule,
    grid_dt: f64,
    t_end: f64,
    observables: &[(String, SparseOperator)],
) -> Result<Trajectory> {
    let n_sites = model.n_sites();
    if n_sites > EXACT_REFERENCE_MAX_SITES {
        return Err(Error::Capability {
            dim: model.dim(),
            limit: 1 << EXACT_REFERENCE_MAX_SITES,
        });
    }
    if !(grid_dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {grid_dt}")));
    }
    check_end(schedule, t_end)?;
    check_observables(observables, model.dim())?;
    let op = AffineOp::new(model)?;
    let mut scratch = (vec![ZERO; op.dim()], vec![ZERO; op.dim()]);
    let mut energy = |psi: &[C64], b: f64| {
        op.apply(b, psi, &mut scratch.0, &mut scratch.1);
        inner(psi, &scratch.0).re
    };
    let mut psi = initial_state(model, schedule)?.into_amplitudes();
    let mut rec = Recorder::new(observables, n_sites, true);
    let mut max_drift: f64 = 0.0;

    let (n1, h1) = ramp_grid(schedule.t_stop, grid_dt);
    rec.record(0.0, &psi, energy(&psi, schedule.ramp_value(0.0)))?;
    for k in 0..n1 {
        let mid = (k as f64 + 0.5) * h1;
        DenseExp::new(&model.hamiltonian(schedule.ramp_value(mid))?).advance(&mut psi, h1);
        max_drift = max_drift.max((l2_norm(&psi) - 1.0).abs());
        if k + 1 != n1 {
            let t = (k + 1) as f64 * h1;
            rec.record(t, &psi, energy(&psi, schedule.ramp_value(t)))?;
        }
    }
    let b_post = schedule.post_stop_field();
    let stop_index = if n1 > 0 {
        rec.record(schedule.t_stop, &psi, energy(&psi, b_post))?;
        rec.times.len() - 1
    } else {
        rec.energy[0] = energy(&psi, b_post);
        0
    };
    let stop_state = StateVector::from_raw(psi.clone(), n_sites);
    let post = DenseExp::new(&model.hamiltonian(b_post)?);
    for k in 1..=post_grid(schedule.t_stop, t_end, grid_dt) {
        post.advance(&mut psi, grid_dt);
        max_drift = max_drift.max((l2_norm(&psi) - 1.0).abs());
        rec.record(schedule.t_stop + k as f64 * grid_dt, &psi, energy(&psi, b_post))?;
    }
    let final_state = StateVector::from_raw(psi, n_sites);
    Ok(rec.finish(stop_index, stop_state, final_state, max_drift))
}

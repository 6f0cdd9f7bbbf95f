//! Landau-Zener and transverse-field Ising Hamiltonians and the field
//! protocols that drive them.

use crate::analysis::spectrum;
use crate::couplings::CouplingMatrix;
use crate::error::{Error, Result};
use crate::spin::{pauli_sum, site_mask, spin_z, Axis, SparseOperator, StateVector, C64};

/// Energies closer than this count as degenerate when picking the initial state.
const INITIAL_DEGENERACY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RampKind {
    /// `B(t) = τ t + b0`; `τ` is the sweep rate.
    Linear,
    /// `B(t) = b0 exp(−t/τ)`.
    Exponential,
    /// `B(t) = b0`.
    Constant,
}

/// What the field does once `t_stop` is reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostStop {
    /// Freeze at the value reached at `t_stop`.
    Hold,
    /// Switch off instantaneously; the field is 0 from `t_stop` on.
    QuenchToZero,
}

/// Field protocol `B(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSchedule {
    pub kind: RampKind,
    pub b0: f64,
    pub tau: f64,
    pub t_stop: f64,
    pub post_stop: PostStop,
}

impl FieldSchedule {
    pub fn new(kind: RampKind, b0: f64, tau: f64, t_stop: f64, post_stop: PostStop) -> Result<Self> {
        if ![b0, tau, t_stop].iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("schedule parameters must be finite".into()));
        }
        if t_stop < 0.0 {
            return Err(Error::Domain(format!("t_stop must be non-negative, got {t_stop}")));
        }
        if kind == RampKind::Exponential && tau <= 0.0 {
            return Err(Error::Domain(format!("exponential ramp needs tau > 0, got {tau}")));
        }
        Ok(Self {
            kind,
            b0,
            tau,
            t_stop,
            post_stop,
        })
    }

    /// Exponential ramp stopped at `t_stop = t_stop_factor · τ`.
    pub fn exponential(b0: f64, tau: f64, t_stop_factor: f64, post_stop: PostStop) -> Result<Self> {
        Self::new(RampKind::Exponential, b0, tau, t_stop_factor * tau, post_stop)
    }

    /// Exponential ramp stopped when the field reaches `b_stop`, i.e. at
    /// `t_stop = τ ln(b0 / b_stop)`.
    pub fn exponential_to(b0: f64, tau: f64, b_stop: f64, post_stop: PostStop) -> Result<Self> {
        if !(b_stop > 0.0 && b_stop < b0) {
            return Err(Error::Domain(format!(
                "stop field {b_stop} must lie in (0, b0 = {b0})"
            )));
        }
        Self::new(RampKind::Exponential, b0, tau, tau * (b0 / b_stop).ln(), post_stop)
    }

    /// Linear sweep at rate `rate` from `b0` until the field reaches `b_final`.
    pub fn linear(b0: f64, rate: f64, b_final: f64, post_stop: PostStop) -> Result<Self> {
        let t_stop = (b_final - b0) / rate;
        if !(t_stop.is_finite() && t_stop >= 0.0) {
            return Err(Error::Domain(format!(
                "rate {rate} never takes the field from {b0} to {b_final}"
            )));
        }
        Self::new(RampKind::Linear, b0, rate, t_stop, post_stop)
    }

    pub fn constant(b: f64, t_stop: f64) -> Result<Self> {
        Self::new(RampKind::Constant, b, 0.0, t_stop, PostStop::Hold)
    }

    /// The ramp formula, ignoring `t_stop`.
    pub fn ramp_value(&self, t: f64) -> f64 {
        match self.kind {
            RampKind::Linear => self.tau * t + self.b0,
            RampKind::Exponential => self.b0 * (-t / self.tau).exp(),
            RampKind::Constant => self.b0,
        }
    }

    /// Field at `t_stop` approached from below.
    pub fn stop_value(&self) -> f64 {
        self.ramp_value(self.t_stop)
    }

    /// Constant field applied from `t_stop` on.
    pub fn post_stop_field(&self) -> f64 {
        match self.post_stop {
            PostStop::Hold => self.stop_value(),
            PostStop::QuenchToZero => 0.0,
        }
    }
}

/// `B(t)`: the ramp before `t_stop`, the post-stop constant from `t_stop`
/// on (right-continuous at a quench).
pub fn field_at(schedule: &FieldSchedule, t: f64) -> f64 {
    if t < schedule.t_stop {
        schedule.ramp_value(t)
    } else {
        schedule.post_stop_field()
    }
}

/// Which Hamiltonian is being driven.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// `H = B^z σ^z + σ^x` on a single spin.
    LandauZener,
    /// `H = −J_± Σ_{i<j} J_ij σ^z_i σ^z_j − B^x Σ_i σ^x_i`.
    Tfim {
        couplings: CouplingMatrix,
        j_sign: f64,
    },
}

impl ModelSpec {
    pub fn tfim(couplings: CouplingMatrix, j_sign: f64) -> Result<Self> {
        if j_sign != 1.0 && j_sign != -1.0 {
            return Err(Error::Domain(format!("j_sign must be +1 or -1, got {j_sign}")));
        }
        if couplings.n() == 0 {
            return Err(Error::Domain("TFIM needs at least one site".into()));
        }
        Ok(ModelSpec::Tfim { couplings, j_sign })
    }

    pub fn n_sites(&self) -> usize {
        match self {
            ModelSpec::LandauZener => 1,
            ModelSpec::Tfim { couplings, .. } => couplings.n(),
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites()
    }

    /// Field-independent part of the Hamiltonian.
    pub fn static_part(&self) -> Result<SparseOperator> {
        match self {
            ModelSpec::LandauZener => pauli_sum(Axis::X, 1),
            ModelSpec::Tfim { couplings, j_sign } => Ok(ising_diagonal(couplings, *j_sign)),
        }
    }

    /// Operator multiplying the field: `H(B) = static + B · drive`.
    pub fn drive_part(&self) -> Result<SparseOperator> {
        match self {
            ModelSpec::LandauZener => pauli_sum(Axis::Z, 1),
            ModelSpec::Tfim { couplings, .. } => {
                Ok(pauli_sum(Axis::X, couplings.n())?.scale(C64::new(-1.0, 0.0)))
            }
        }
    }

    /// Hamiltonian at field `b`.
    pub fn hamiltonian(&self, b: f64) -> Result<SparseOperator> {
        match self {
            ModelSpec::LandauZener => Ok(lz_hamiltonian(b)),
            ModelSpec::Tfim { couplings, j_sign } => tfim_hamiltonian(couplings, *j_sign, b),
        }
    }
}

/// `[[bz, 1], [1, −bz]]`.
pub fn lz_hamiltonian(bz: f64) -> SparseOperator {
    SparseOperator::from_triplets(
        2,
        [
            (0, 0, C64::new(bz, 0.0)),
            (0, 1, C64::new(1.0, 0.0)),
            (1, 0, C64::new(1.0, 0.0)),
            (1, 1, C64::new(-bz, 0.0)),
        ],
    )
}

fn ising_diagonal(couplings: &CouplingMatrix, j_sign: f64) -> SparseOperator {
    let n = couplings.n();
    let dim = 1usize << n;
    let pairs: Vec<_> = couplings.pairs().filter(|p| p.2 != 0.0).collect();
    SparseOperator::from_triplets(
        dim,
        (0..dim).map(|s| {
            let e: f64 = pairs
                .iter()
                .map(|&(i, j, v)| v * spin_z(s, i, n) * spin_z(s, j, n))
                .sum();
            (s, s, C64::new(-j_sign * e, 0.0))
        }),
    )
}

/// Transverse-field Ising Hamiltonian on `couplings.n()` sites.
pub fn tfim_hamiltonian(couplings: &CouplingMatrix, j_sign: f64, bx: f64) -> Result<SparseOperator> {
    let n = couplings.n();
    if n == 0 || n > crate::spin::MAX_SITES {
        return Err(Error::Shape {
            expected: crate::spin::MAX_SITES,
            actual: n,
        });
    }
    let dim = 1usize << n;
    let diag = ising_diagonal(couplings, j_sign);
    if bx == 0.0 {
        return Ok(diag);
    }
    let field = C64::new(-bx, 0.0);
    let flips = (0..dim).flat_map(|s| (0..n).map(move |site| (s ^ site_mask(site, n), s, field)));
    Ok(SparseOperator::from_triplets(dim, diag.entries().chain(flips)))
}

/// Instantaneous Hamiltonian `H(t)`.
pub fn hamiltonian_at(model: &ModelSpec, schedule: &FieldSchedule, t: f64) -> Result<SparseOperator> {
    model.hamiltonian(field_at(schedule, t))
}

/// Ground state of `H(0)`, phase fixed so its largest amplitude is real
/// positive.
pub fn initial_state(model: &ModelSpec, schedule: &FieldSchedule) -> Result<StateVector> {
    let h = hamiltonian_at(model, schedule, 0.0)?;
    let spec = spectrum(&h)?;
    if spec.energies.len() > 1 {
        let splitting = spec.energies[1] - spec.energies[0];
        if splitting < INITIAL_DEGENERACY_TOLERANCE * spec.energies[0].abs().max(1.0) {
            return Err(Error::Degeneracy { splitting });
        }
    }
    Ok(spec.eigenvectors.into_iter().next().expect("non-empty spectrum"))
}

use crate::analysis::SpectrumResult;
use crate::error::{Error, Result};
use crate::spin::{SparseOperator, StateVector, C64};

/// Completeness tolerance on `Σ|P_m|²` against `‖ψ‖²`.
pub const COMPLETENESS_TOL: f64 = 1e-8;

/// Default energy window for the ground manifold.
pub const DEGENERACY_TOL: f64 = 1e-6;

/// Pairs whose weight `|P_m P_n|` falls below this are skipped when
/// reconstructing a series.
const WEIGHT_CUTOFF: f64 = 1e-14;

/// Expansion of a state in an eigenbasis, `P_m = ⟨m|ψ⟩`.
#[derive(Debug, Clone)]
pub struct OverlapDecomposition {
    pub overlaps: Vec<C64>,
    pub energies: Vec<f64>,
}

impl OverlapDecomposition {
    pub fn probabilities(&self) -> Vec<f64> {
        self.overlaps.iter().map(|p| p.norm_sqr()).collect()
    }
}

pub fn decompose(psi: &StateVector, spec: &SpectrumResult) -> Result<OverlapDecomposition> {
    let dim = spec.energies.len();
    if psi.dim() != dim {
        return Err(Error::Shape {
            expected: dim,
            actual: psi.dim(),
        });
    }
    let overlaps: Vec<C64> = spec.eigenvectors.iter().map(|v| v.inner(psi)).collect();
    let sum: f64 = overlaps.iter().map(|p| p.norm_sqr()).sum();
    let norm = psi.norm();
    if (sum - norm * norm).abs() > COMPLETENESS_TOL {
        return Err(Error::Basis { sum, norm });
    }
    Ok(OverlapDecomposition {
        overlaps,
        energies: spec.energies.clone(),
    })
}

/// Weight on every eigenstate within `degeneracy_tol` of the lowest energy.
pub fn ground_state_probability(dec: &OverlapDecomposition, degeneracy_tol: f64) -> f64 {
    let Some(&e0) = dec.energies.first() else {
        return 0.0;
    };
    dec.energies
        .iter()
        .zip(&dec.overlaps)
        .take_while(|(e, _)| *e - e0 < degeneracy_tol)
        .map(|(_, p)| p.norm_sqr())
        .sum()
}

/// One cross term `P*_m P_n ⟨m|O|n⟩` of the post-stop series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTerm {
    pub m: usize,
    pub n: usize,
    /// `E_n − E_m`.
    pub omega: f64,
    pub weight: C64,
}

/// Non-negligible terms of `Σ_mn P*_m P_n ⟨m|O|n⟩ e^{−i(E_n − E_m)t}`.
pub fn series_terms(
    dec: &OverlapDecomposition,
    op: &SparseOperator,
    spec: &SpectrumResult,
) -> Result<Vec<SeriesTerm>> {
    let dim = spec.energies.len();
    if op.dim() != dim || dec.overlaps.len() != dim {
        return Err(Error::Shape {
            expected: dim,
            actual: if op.dim() != dim { op.dim() } else { dec.overlaps.len() },
        });
    }
    let max_p = dec.overlaps.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let active: Vec<usize> = (0..dim)
        .filter(|&m| dec.overlaps[m].norm() * max_p > WEIGHT_CUTOFF)
        .collect();

    let mut on = vec![C64::new(0.0, 0.0); dim];
    let mut terms = Vec::new();
    for &n in &active {
        op.apply_into(spec.eigenvectors[n].amplitudes(), &mut on);
        for &m in &active {
            let omn = spec.eigenvectors[m]
                .amplitudes()
                .iter()
                .zip(&on)
                .map(|(a, b)| a.conj() * b)
                .sum::<C64>();
            let weight = dec.overlaps[m].conj() * dec.overlaps[n] * omn;
            if weight.norm() > WEIGHT_CUTOFF {
                terms.push(SeriesTerm {
                    m,
                    n,
                    omega: spec.energies[n] - spec.energies[m],
                    weight,
                });
            }
        }
    }
    Ok(terms)
}

/// `O(t) = Σ_mn P*_m P_n ⟨m|O|n⟩ e^{−i(E_n − E_m)t}`, with `t` measured from
/// the moment the decomposition was taken.
pub fn reconstruct_series(
    dec: &OverlapDecomposition,
    op: &SparseOperator,
    spec: &SpectrumResult,
    times: &[f64],
) -> Result<Vec<f64>> {
    let terms = series_terms(dec, op, spec)?;
    let scale = terms.iter().map(|t| t.weight.norm()).sum::<f64>().max(1.0);
    times
        .iter()
        .map(|&t| {
            let z: C64 = terms
                .iter()
                .map(|term| term.weight * C64::from_polar(1.0, -term.omega * t))
                .sum();
            if z.im.abs() > 1e-9 * scale {
                return Err(Error::Consistency(format!(
                    "reconstructed series has imaginary part {:e} at t = {t}",
                    z.im
                )));
            }
            Ok(z.re)
        })
        .collect()
}

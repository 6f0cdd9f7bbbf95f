use crate::error::{Error, Result};
use crate::model::lz_hamiltonian;
use crate::spin::{expectation_raw, rotated_magnetization, SparseOperator, C64};

use super::spectrum;

/// Two-level prediction for a state `cos φ |1⟩ + sin φ |2⟩` of the hold
/// Hamiltonian at `b_hold`: ground-state probability and oscillation
/// amplitude of the rotated magnetization.
pub fn lz_analytic_curves(phi_grid: &[f64], theta: f64, b_hold: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if let Some(&phi) = phi_grid
        .iter()
        .find(|&&p| !(0.0..=std::f64::consts::FRAC_PI_2).contains(&p))
    {
        return Err(Error::Domain(format!("phi = {phi} outside [0, pi/2]")));
    }
    let element = lz_matrix_element(theta, b_hold)?;
    let probability = phi_grid.iter().map(|p| p.cos().powi(2)).collect();
    let amplitude = phi_grid.iter().map(|p| ((2.0 * p).sin() * element).abs()).collect();
    Ok((probability, amplitude))
}

/// `|⟨1|O(θ)|2⟩|` between the two eigenstates of `b σ^z + σ^x`.
pub fn lz_matrix_element(theta: f64, b: f64) -> Result<f64> {
    let o = rotated_magnetization(theta, 1)?;
    let s = spectrum(&lz_hamiltonian(b))?;
    let v1 = s.eigenvectors[0].amplitudes();
    let v2 = s.eigenvectors[1].amplitudes();
    Ok(transition(&o, v1, v2).norm())
}

fn transition(o: &SparseOperator, a: &[C64], b: &[C64]) -> C64 {
    let mut ob = vec![C64::new(0.0, 0.0); b.len()];
    o.apply_into(b, &mut ob);
    a.iter().zip(&ob).map(|(x, y)| x.conj() * y).sum()
}

/// `⟨m|O(θ)|m⟩` for the two hold eigenstates.
pub fn lz_diagonal_elements(theta: f64, b: f64) -> Result<[f64; 2]> {
    let o = rotated_magnetization(theta, 1)?;
    let s = spectrum(&lz_hamiltonian(b))?;
    Ok([
        expectation_raw(&o, s.eigenvectors[0].amplitudes())?,
        expectation_raw(&o, s.eigenvectors[1].amplitudes())?,
    ])
}

//! Spectra, overlaps, oscillation amplitudes and spectroscopy of measured
//! series.

mod amplitude;
mod fft;
mod lz;
mod overlap;
mod spectrum;

pub use amplitude::{extract_amplitude, AmplitudeMethod, AmplitudeResult};
pub use fft::{bin_width, oscillation_spectrum, SpectralPeak, MIN_SAMPLES, PEAK_THRESHOLD};
pub use lz::{lz_analytic_curves, lz_diagonal_elements, lz_matrix_element};
pub use overlap::{
    decompose, ground_state_probability, reconstruct_series, series_terms, OverlapDecomposition, SeriesTerm,
    COMPLETENESS_TOL, DEGENERACY_TOL,
};
pub use spectrum::{levels, minimal_gap_scan, spectrum, GapScan, Levels, SpectrumResult, MAX_DIM};

//! Exact diagonalization resolved by the global spin flip and the site
//! reversal, whenever the Hamiltonian commutes with them.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::spin::{
    canonicalize_phase, site_reversal_permutation, spin_flip_permutation, SparseOperator,
    StateVector, C64,
};

/// Largest dimension handed to the dense eigensolver.
pub const MAX_DIM: usize = 1 << 14;

/// Eigen-decomposition of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Ascending.
    pub energies: Vec<f64>,
    pub eigenvectors: Vec<StateVector>,
    /// Eigenvalue of `⊗σ^x`, present when it commutes with `H`.
    pub parity_flip: Option<Vec<i8>>,
    /// Eigenvalue of the site reversal, present when it commutes with `H`.
    pub parity_spatial: Option<Vec<i8>>,
}

/// Energies and symmetry labels only.
#[derive(Debug, Clone)]
pub struct Levels {
    pub energies: Vec<f64>,
    pub parity_flip: Option<Vec<i8>>,
    pub parity_spatial: Option<Vec<i8>>,
}

struct Sector {
    flip: i8,
    spatial: i8,
    /// Orthonormal real basis vectors as sparse `(index, coefficient)` lists.
    basis: Vec<Vec<(usize, f64)>>,
}

struct Decomposition {
    has_flip: bool,
    has_spatial: bool,
    sectors: Vec<Sector>,
}

fn n_sites_of(dim: usize) -> Option<usize> {
    (dim.is_power_of_two() && dim > 1).then(|| dim.trailing_zeros() as usize)
}

fn decompose_symmetries(h: &SparseOperator) -> Decomposition {
    let dim = h.dim();
    let tol = 1e-12 * h.max_abs().max(1.0);
    let (flip_perm, rev_perm) = match n_sites_of(dim) {
        Some(n) => (spin_flip_permutation(n), site_reversal_permutation(n)),
        None => {
            return Decomposition {
                has_flip: false,
                has_spatial: false,
                sectors: vec![Sector {
                    flip: 1,
                    spatial: 1,
                    basis: (0..dim).map(|i| vec![(i, 1.0)]).collect(),
                }],
            }
        }
    };
    let has_flip = h.commutes_with_permutation(&flip_perm, tol);
    let has_spatial = h.commutes_with_permutation(&rev_perm, tol);

    // group elements as (permutation index map, flip power, reversal power)
    let mut group: Vec<(Box<dyn Fn(usize) -> usize + '_>, bool, bool)> =
        vec![(Box::new(|s| s), false, false)];
    if has_flip {
        group.push((Box::new(|s| flip_perm[s]), true, false));
    }
    if has_spatial {
        group.push((Box::new(|s| rev_perm[s]), false, true));
    }
    if has_flip && has_spatial {
        group.push((Box::new(|s| flip_perm[rev_perm[s]]), true, true));
    }
    let flip_labels: &[i8] = if has_flip { &[1, -1] } else { &[1] };
    let spatial_labels: &[i8] = if has_spatial { &[1, -1] } else { &[1] };

    let mut sectors: Vec<Sector> = flip_labels
        .iter()
        .flat_map(|&f| {
            spatial_labels.iter().map(move |&p| Sector {
                flip: f,
                spatial: p,
                basis: Vec::new(),
            })
        })
        .collect();

    let mut seen = vec![false; dim];
    let mut acc: Vec<(usize, f64)> = Vec::with_capacity(4);
    for s in 0..dim {
        if seen[s] {
            continue;
        }
        for (g, _, _) in &group {
            seen[g(s)] = true;
        }
        for sector in &mut sectors {
            acc.clear();
            for (g, uses_flip, uses_rev) in &group {
                let mut chi = 1.0;
                if *uses_flip {
                    chi *= f64::from(sector.flip);
                }
                if *uses_rev {
                    chi *= f64::from(sector.spatial);
                }
                let t = g(s);
                match acc.iter_mut().find(|e| e.0 == t) {
                    Some(e) => e.1 += chi,
                    None => acc.push((t, chi)),
                }
            }
            acc.retain(|e| e.1 != 0.0);
            if acc.is_empty() {
                continue;
            }
            let norm = acc.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
            let mut v: Vec<(usize, f64)> = acc.iter().map(|&(i, c)| (i, c / norm)).collect();
            v.sort_unstable_by_key(|e| e.0);
            sector.basis.push(v);
        }
    }
    sectors.retain(|s| !s.basis.is_empty());
    Decomposition {
        has_flip,
        has_spatial,
        sectors,
    }
}

/// `⟨b_l|H|b_k⟩` for one symmetry sector.
fn sector_block(h: &SparseOperator, sector: &Sector) -> DMatrix<C64> {
    let dim = h.dim();
    let m = sector.basis.len();
    // position of each basis state inside this sector's vectors
    let mut slot = vec![usize::MAX; dim];
    let mut coeff = vec![0.0; dim];
    for (l, v) in sector.basis.iter().enumerate() {
        for &(i, c) in v {
            slot[i] = l;
            coeff[i] = c;
        }
    }
    let mut block = DMatrix::from_element(m, m, C64::new(0.0, 0.0));
    let mut w = vec![C64::new(0.0, 0.0); dim];
    let mut touched = Vec::new();
    for (k, v) in sector.basis.iter().enumerate() {
        // w = H b_k via Hermitian columns: H[i][j] = conj(H[j][i])
        for &(j, bj) in v {
            for (i, hv) in h.row(j) {
                if w[i] == C64::new(0.0, 0.0) {
                    touched.push(i);
                }
                w[i] += hv.conj() * bj;
            }
        }
        for &i in &touched {
            if slot[i] != usize::MAX {
                block[(slot[i], k)] += w[i] * coeff[i];
            }
            w[i] = C64::new(0.0, 0.0);
        }
        touched.clear();
    }
    block
}

struct BlockEigen {
    values: Vec<f64>,
    vectors: Option<DMatrix<C64>>,
}

fn diagonalize_block(block: DMatrix<C64>, want_vectors: bool) -> BlockEigen {
    let real = block.iter().all(|v| v.im == 0.0);
    if real {
        let rb = block.map(|v| v.re);
        if want_vectors {
            let e = SymmetricEigen::new(rb);
            BlockEigen {
                values: e.eigenvalues.iter().copied().collect(),
                vectors: Some(e.eigenvectors.map(|v| C64::new(v, 0.0))),
            }
        } else {
            BlockEigen {
                values: rb.symmetric_eigenvalues().iter().copied().collect(),
                vectors: None,
            }
        }
    } else if want_vectors {
        let e = SymmetricEigen::new(block);
        BlockEigen {
            values: e.eigenvalues.iter().copied().collect(),
            vectors: Some(e.eigenvectors),
        }
    } else {
        BlockEigen {
            values: block.symmetric_eigenvalues().iter().copied().collect(),
            vectors: None,
        }
    }
}

fn check_input(h: &SparseOperator) -> Result<()> {
    if h.dim() > MAX_DIM {
        return Err(Error::Capability {
            dim: h.dim(),
            limit: MAX_DIM,
        });
    }
    if !h.is_hermitian() {
        return Err(Error::Hermiticity {
            residue: h.hermiticity_residue(),
        });
    }
    Ok(())
}

struct Entry {
    energy: f64,
    sector: usize,
    index: usize,
}

fn sorted_entries(eigs: &[BlockEigen]) -> Vec<Entry> {
    let mut entries: Vec<Entry> = eigs
        .iter()
        .enumerate()
        .flat_map(|(sector, e)| {
            e.values.iter().enumerate().map(move |(index, &energy)| Entry {
                energy,
                sector,
                index,
            })
        })
        .collect();
    entries.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(a.sector.cmp(&b.sector))
            .then(a.index.cmp(&b.index))
    });
    entries
}

fn labels(dec: &Decomposition, entries: &[Entry]) -> (Option<Vec<i8>>, Option<Vec<i8>>) {
    let flip = dec
        .has_flip
        .then(|| entries.iter().map(|e| dec.sectors[e.sector].flip).collect());
    let spatial = dec
        .has_spatial
        .then(|| entries.iter().map(|e| dec.sectors[e.sector].spatial).collect());
    (flip, spatial)
}

/// Full diagonalization with canonical eigenvector phases.
pub fn spectrum(h: &SparseOperator) -> Result<SpectrumResult> {
    check_input(h)?;
    let dim = h.dim();
    let dec = decompose_symmetries(h);
    let eigs: Vec<BlockEigen> = dec
        .sectors
        .iter()
        .map(|s| diagonalize_block(sector_block(h, s), true))
        .collect();
    let entries = sorted_entries(&eigs);
    let n_sites = n_sites_of(dim).unwrap_or(0);
    let eigenvectors = entries
        .iter()
        .map(|e| {
            let sector = &dec.sectors[e.sector];
            let coeffs = eigs[e.sector].vectors.as_ref().expect("vectors requested");
            let mut v = vec![C64::new(0.0, 0.0); dim];
            for (l, b) in sector.basis.iter().enumerate() {
                let c = coeffs[(l, e.index)];
                for &(i, bi) in b {
                    v[i] += c * bi;
                }
            }
            canonicalize_phase(&mut v);
            StateVector::from_raw(v, n_sites)
        })
        .collect();
    let (parity_flip, parity_spatial) = labels(&dec, &entries);
    Ok(SpectrumResult {
        energies: entries.iter().map(|e| e.energy).collect(),
        eigenvectors,
        parity_flip,
        parity_spatial,
    })
}

/// Eigenvalues with symmetry labels, without eigenvectors.
pub fn levels(h: &SparseOperator) -> Result<Levels> {
    check_input(h)?;
    let dec = decompose_symmetries(h);
    let eigs: Vec<BlockEigen> = dec
        .sectors
        .iter()
        .map(|s| diagonalize_block(sector_block(h, s), false))
        .collect();
    let entries = sorted_entries(&eigs);
    let (parity_flip, parity_spatial) = labels(&dec, &entries);
    Ok(Levels {
        energies: entries.iter().map(|e| e.energy).collect(),
        parity_flip,
        parity_spatial,
    })
}

/// Result of scanning the gap to the first coupled excited state.
#[derive(Debug, Clone)]
pub struct GapScan {
    pub fields: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Field of the minimal gap, refined through the three bracketing points.
    pub b_star: f64,
    pub gap_star: f64,
    /// Set when a symmetry was missing somewhere on the scan and the gap was
    /// taken with fewer (or no) parity constraints.
    pub parity_fallback: bool,
}

/// Gap between the ground state and the lowest excited state sharing its
/// parity labels, at each field value.
pub fn minimal_gap_scan(model: &ModelSpec, fields: &[f64]) -> Result<GapScan> {
    if fields.is_empty() {
        return Err(Error::Domain("field grid is empty".into()));
    }
    if fields.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("field grid must be strictly ascending".into()));
    }
    let all: Vec<Levels> = fields
        .iter()
        .map(|&b| levels(&model.hamiltonian(b)?))
        .collect::<Result<_>>()?;
    let use_flip = all.iter().all(|l| l.parity_flip.is_some());
    let use_spatial = all.iter().all(|l| l.parity_spatial.is_some());
    let fallback = !(use_flip && use_spatial);

    let mut gaps = Vec::with_capacity(fields.len());
    for l in &all {
        let same = |k: usize| {
            (!use_flip || l.parity_flip.as_ref().unwrap()[k] == l.parity_flip.as_ref().unwrap()[0])
                && (!use_spatial
                    || l.parity_spatial.as_ref().unwrap()[k] == l.parity_spatial.as_ref().unwrap()[0])
        };
        let k = (1..l.energies.len()).find(|&k| same(k)).ok_or_else(|| {
            Error::Consistency("no excited state shares the ground-state parities".into())
        })?;
        gaps.push(l.energies[k] - l.energies[0]);
    }

    let i = gaps
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let (b_star, gap_star) = if i > 0 && i + 1 < gaps.len() {
        parabola_vertex(
            (fields[i - 1], gaps[i - 1]),
            (fields[i], gaps[i]),
            (fields[i + 1], gaps[i + 1]),
        )
    } else {
        (fields[i], gaps[i])
    };
    Ok(GapScan {
        fields: fields.to_vec(),
        gaps,
        b_star,
        gap_star,
        parity_fallback: fallback,
    })
}

/// Vertex of the parabola through three points with distinct abscissae.
pub(crate) fn parabola_vertex(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> (f64, f64) {
    let (x0, y0) = a;
    let (x1, y1) = b;
    let (x2, y2) = c;
    let d0 = (y1 - y0) / (x1 - x0);
    let d1 = (y2 - y1) / (x2 - x1);
    let curv = (d1 - d0) / (x2 - x0);
    if curv <= 0.0 || !curv.is_finite() {
        return b;
    }
    // y = y1 + s (x − x1) + curv (x − x1)², with s the slope at x1
    let s = d0 + curv * (x1 - x0);
    let x = x1 - s / (2.0 * curv);
    let y = y1 - s * s / (4.0 * curv);
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{power_law_couplings, CouplingMatrix};
    use crate::model::{lz_hamiltonian, tfim_hamiltonian};
    use crate::spin::{apply, pauli_site, Axis};

    fn dense_eigenvalues(h: &SparseOperator) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(h.to_dense()).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn sigma_x_levels() {
        let s = spectrum(&pauli_site(0, Axis::X, 1).unwrap()).unwrap();
        assert!((s.energies[0] + 1.0).abs() < 1e-14 && (s.energies[1] - 1.0).abs() < 1e-14);
        // σx itself is the flip for a single spin
        assert_eq!(s.parity_flip, Some(vec![-1, 1]));
    }

    #[test]
    fn sector_spectrum_matches_dense() {
        let j = power_law_couplings(5, 1.0, 1.0).unwrap();
        let h = tfim_hamiltonian(&j, 1.0, 0.8).unwrap();
        let s = spectrum(&h).unwrap();
        let dense = dense_eigenvalues(&h);
        for (a, b) in s.energies.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(s.parity_flip.is_some() && s.parity_spatial.is_some());
    }

    #[test]
    fn eigenpairs_orthonormal_with_small_residual() {
        let j = power_law_couplings(4, 0.7, 1.0).unwrap();
        let h = tfim_hamiltonian(&j, 1.0, 0.5).unwrap();
        let s = spectrum(&h).unwrap();
        let hn = h.max_abs() * 4.0;
        for (m, v) in s.eigenvectors.iter().enumerate() {
            let hv = apply(&h, v).unwrap();
            let res: f64 = hv
                .iter()
                .zip(v.amplitudes())
                .map(|(a, b)| (a - b * s.energies[m]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-9 * hn);
            for (n, w) in s.eigenvectors.iter().enumerate() {
                let ip = v.inner(w).norm();
                let expect = if m == n { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn complex_hermitian_input() {
        let y = pauli_site(0, Axis::Y, 2).unwrap();
        let z = pauli_site(1, Axis::Z, 2).unwrap();
        let h = y.add(&z.scale(C64::new(0.5, 0.0)));
        let s = spectrum(&h).unwrap();
        let dense = dense_eigenvalues(&h);
        for (a, b) in s.energies.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let op = SparseOperator::from_triplets(2, [(0, 1, C64::new(1.0, 0.0))]);
        assert!(matches!(spectrum(&op), Err(Error::Hermiticity { .. })));
    }

    #[test]
    fn lz_gap_minimum_at_zero_field() {
        let fields: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.25).collect();
        let scan = minimal_gap_scan(&ModelSpec::LandauZener, &fields).unwrap();
        assert!(scan.b_star.abs() < 1e-12);
        assert!((scan.gap_star - 2.0).abs() < 1e-12);
        assert!(scan.parity_fallback);
    }

    #[test]
    fn pair_gap_scan_against_closed_form() {
        // N=2, J=1: ground −sqrt(1+4B²) and coupled partner +sqrt(1+4B²) share
        // both parities
        let j = pair();
        let model = ModelSpec::tfim(j, 1.0).unwrap();
        let fields: Vec<f64> = (1..=30).map(|k| k as f64 * 0.1).collect();
        let scan = minimal_gap_scan(&model, &fields).unwrap();
        for (b, g) in fields.iter().zip(&scan.gaps) {
            assert!((g - 2.0 * (1.0 + 4.0 * b * b).sqrt()).abs() < 1e-12);
        }
        assert!(!scan.parity_fallback);
        assert_eq!(scan.b_star, 0.1);
    }

    fn pair() -> CouplingMatrix {
        CouplingMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn parabola_vertex_exact_for_quadratic() {
        let f = |x: f64| 3.0 * (x - 0.37).powi(2) + 1.25;
        let (x, y) = parabola_vertex((0.1, f(0.1)), (0.3, f(0.3)), (0.6, f(0.6)));
        assert!((x - 0.37).abs() < 1e-12);
        assert!((y - 1.25).abs() < 1e-12);
    }

    #[test]
    fn lz_spectrum_closed_form() {
        let s = spectrum(&lz_hamiltonian(2.0)).unwrap();
        assert!((s.energies[0] + 5f64.sqrt()).abs() < 1e-12);
        assert!((s.energies[1] - 5f64.sqrt()).abs() < 1e-12);
    }
}

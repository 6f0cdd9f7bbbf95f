//! Pauli operators, product-state observables and global rotations on the
//! `2^N`-dimensional spin Hilbert space.
//!
//! Basis convention: site 0 is the most significant bit of a basis index and
//! a cleared bit is spin up, `|↑⟩ = (1, 0)`, the +1 eigenstate of `σ^z`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Largest chain handled with exact state storage.
pub const MAX_SITES: usize = 14;

const NORM_TOLERANCE: f64 = 1e-10;
const EXPECTATION_IMAG_TOLERANCE: f64 = 1e-10;

/// Bit mask selecting `site` in a basis index of an `n_sites` register.
#[inline]
pub fn site_mask(site: usize, n_sites: usize) -> usize {
    1 << (n_sites - 1 - site)
}

/// `σ^z` eigenvalue (+1 or -1) of `site` in basis state `index`.
#[inline]
pub fn spin_z(index: usize, site: usize, n_sites: usize) -> f64 {
    if index & site_mask(site, n_sites) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A normalized pure state of `n_sites` spins.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
    n_sites: usize,
}

impl StateVector {
    /// Wraps `amps`, which must have length `2^n_sites` and unit norm.
    pub fn new(amps: Vec<C64>, n_sites: usize) -> Result<Self> {
        check_dim(amps.len(), n_sites)?;
        let norm = l2_norm(&amps);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Norm { norm });
        }
        Ok(Self { amps, n_sites })
    }

    /// Rescales `amps` to unit norm.
    pub fn normalized(mut amps: Vec<C64>, n_sites: usize) -> Result<Self> {
        check_dim(amps.len(), n_sites)?;
        let norm = l2_norm(&amps);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Norm { norm });
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { amps, n_sites })
    }

    /// Propagated states carry their own norm drift; it is reported, not hidden.
    pub(crate) fn from_raw(amps: Vec<C64>, n_sites: usize) -> Self {
        debug_assert_eq!(amps.len(), 1 << n_sites);
        Self { amps, n_sites }
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_sites: usize, index: usize) -> Result<Self> {
        let dim = check_sites(n_sites)?;
        if index >= dim {
            return Err(Error::Index { index, len: dim });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { amps, n_sites })
    }

    /// `|↑↑…↑⟩`.
    pub fn all_up(n_sites: usize) -> Result<Self> {
        Self::basis(n_sites, 0)
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amps)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        inner(&self.amps, &other.amps)
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Multiplies by a global phase so the largest-magnitude amplitude is
    /// real and positive. Ties go to the lowest index.
    pub fn canonicalize_phase(&mut self) {
        canonicalize_phase(&mut self.amps);
    }
}

fn check_sites(n_sites: usize) -> Result<usize> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::Domain(format!(
            "n_sites must be in 1..={MAX_SITES}, got {n_sites}"
        )));
    }
    Ok(1 << n_sites)
}

fn check_dim(len: usize, n_sites: usize) -> Result<()> {
    let dim = check_sites(n_sites)?;
    if len != dim {
        return Err(Error::Shape {
            expected: dim,
            actual: len,
        });
    }
    Ok(())
}

pub(crate) fn l2_norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨a|b⟩` with the conjugate on the left.
pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn canonicalize_phase(v: &mut [C64]) {
    let max = v.iter().map(|a| a.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let Some(pivot) = v.iter().position(|a| a.norm() >= max * (1.0 - 1e-9)) else {
        return;
    };
    let phase = v[pivot].conj() / v[pivot].norm();
    v.iter_mut().for_each(|a| *a *= phase);
    v[pivot] = C64::new(v[pivot].re, 0.0);
}

/// Square matrix on the spin Hilbert space, stored as canonical compressed
/// rows: columns sorted within each row, duplicates summed, exact zeros
/// dropped. Two operators with the same matrix therefore have identical
/// storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    hermitian: bool,
}

impl SparseOperator {
    /// Builds an operator from coordinate triplets `(row, col, value)`.
    ///
    /// Panics if an index is out of range.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut entries: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            assert!(r < dim && c < dim, "entry ({r}, {c}) outside dimension {dim}");
            match merged.last_mut() {
                Some(last) if (last.0, last.1) == (r, c) => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != ZERO);
        let mut row_ptr = vec![0usize; dim + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let cols = merged.iter().map(|e| e.1).collect();
        let vals = merged.iter().map(|e| e.2).collect();
        let mut op = Self {
            dim,
            row_ptr,
            cols,
            vals,
            hermitian: false,
        };
        op.hermitian = op.hermiticity_residue() <= 1e-12 * op.max_abs().max(1.0);
        op
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, ONE)))
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_triplets(dim, std::iter::empty())
    }

    /// Converts a dense matrix, dropping entries with modulus `<= drop_tol`.
    pub fn from_dense(m: &DMatrix<C64>, drop_tol: f64) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let dim = m.nrows();
        let mut trip = Vec::new();
        for r in 0..dim {
            for c in 0..dim {
                let v = m[(r, c)];
                if v.norm() > drop_tol {
                    trip.push((r, c, v));
                }
            }
        }
        Self::from_triplets(dim, trip)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Whether the matrix equals its conjugate transpose (to 1e-12 relative).
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == 0.0)
    }

    /// Stored entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.cols[lo..hi].binary_search(&c) {
            Ok(k) => self.vals[lo + k],
            Err(_) => ZERO,
        }
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |M[i][j] - conj(M[j][i])|` over stored entries.
    pub fn hermiticity_residue(&self) -> f64 {
        self.entries()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &SparseOperator) -> f64 {
        assert_eq!(self.dim, other.dim);
        let a = self
            .entries()
            .map(|(r, c, v)| (v - other.get(r, c)).norm())
            .fold(0.0, f64::max);
        let b = other
            .entries()
            .map(|(r, c, v)| (v - self.get(r, c)).norm())
            .fold(0.0, f64::max);
        a.max(b)
    }

    /// `out = M · x`.
    pub fn apply_into(&self, x: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_triplets(self.dim, self.entries().map(|(r, c, v)| (r, c, v * s)))
    }

    /// `self + s · other`.
    pub fn add_scaled(&self, other: &SparseOperator, s: C64) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::from_triplets(
            self.dim,
            self.entries()
                .chain(other.entries().map(|(r, c, v)| (r, c, v * s))),
        )
    }

    pub fn add(&self, other: &SparseOperator) -> Self {
        self.add_scaled(other, ONE)
    }

    pub fn sub(&self, other: &SparseOperator) -> Self {
        self.add_scaled(other, -ONE)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.entries().map(|(r, c, v)| (c, r, v.conj())))
    }

    /// Matrix product `self · other`.
    pub fn matmul(&self, other: &SparseOperator) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut acc = vec![ZERO; self.dim];
        let mut touched = vec![false; self.dim];
        let mut cols_in_row = Vec::new();
        let mut trip = Vec::new();
        for r in 0..self.dim {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !touched[c] {
                        touched[c] = true;
                        cols_in_row.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &cols_in_row {
                trip.push((r, c, acc[c]));
                acc[c] = ZERO;
                touched[c] = false;
            }
            cols_in_row.clear();
        }
        Self::from_triplets(self.dim, trip)
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &SparseOperator) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    /// `{self, other} = self·other + other·self`.
    pub fn anticommutator(&self, other: &SparseOperator) -> Self {
        self.matmul(other).add(&other.matmul(self))
    }

    /// Kronecker product `self ⊗ other`; `self` occupies the high bits.
    pub fn kron(&self, other: &SparseOperator) -> Self {
        let d = other.dim;
        let trip: Vec<_> = self
            .entries()
            .flat_map(|(r1, c1, v1)| {
                other
                    .entries()
                    .map(move |(r2, c2, v2)| (r1 * d + r2, c1 * d + c2, v1 * v2))
            })
            .collect();
        Self::from_triplets(self.dim * d, trip)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, ZERO);
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }

    /// Whether `P M P^{-1} = M` for the basis permutation `perm`, to `tol`.
    pub fn commutes_with_permutation(&self, perm: &[usize], tol: f64) -> bool {
        assert_eq!(perm.len(), self.dim);
        self.entries()
            .all(|(r, c, v)| (self.get(perm[r], perm[c]) - v).norm() <= tol)
    }
}

/// Pauli axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// 2×2 Pauli matrix, indexed `[row][col]`.
    pub fn matrix(self) -> [[C64; 2]; 2] {
        match self {
            Axis::X => [[ZERO, ONE], [ONE, ZERO]],
            Axis::Y => [[ZERO, -I], [I, ZERO]],
            Axis::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }
}

/// Embeds the 2×2 matrix `m` at `site` of an `n_sites` register.
pub fn site_operator(site: usize, m: [[C64; 2]; 2], n_sites: usize) -> Result<SparseOperator> {
    let dim = check_sites(n_sites)?;
    if site >= n_sites {
        return Err(Error::Index {
            index: site,
            len: n_sites,
        });
    }
    let mask = site_mask(site, n_sites);
    let mut trip = Vec::with_capacity(2 * dim);
    for s in 0..dim {
        let b = usize::from(s & mask != 0);
        for (b_out, row) in m.iter().enumerate() {
            let v = row[b];
            if v != ZERO {
                let r = if b_out == b { s } else { s ^ mask };
                trip.push((r, s, v));
            }
        }
    }
    Ok(SparseOperator::from_triplets(dim, trip))
}

/// `I ⊗ … ⊗ σ^axis ⊗ … ⊗ I` with the Pauli matrix at `site`.
pub fn pauli_site(site: usize, axis: Axis, n_sites: usize) -> Result<SparseOperator> {
    site_operator(site, axis.matrix(), n_sites)
}

/// `Σ_i σ^axis_i`.
pub fn pauli_sum(axis: Axis, n_sites: usize) -> Result<SparseOperator> {
    let dim = check_sites(n_sites)?;
    let mut trip = Vec::with_capacity(dim * n_sites);
    for site in 0..n_sites {
        trip.extend(pauli_site(site, axis, n_sites)?.entries());
    }
    Ok(SparseOperator::from_triplets(dim, trip))
}

/// Uniform rotation about the y axis applied to every site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationSpec {
    pub theta: f64,
    pub n_sites: usize,
}

impl RotationSpec {
    /// Measurement rotation; `theta` must lie in `[0, π/2]`.
    pub fn new(theta: f64, n_sites: usize) -> Result<Self> {
        if !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&theta) {
            return Err(Error::Domain(format!(
                "rotation angle {theta} outside [0, pi/2]"
            )));
        }
        check_sites(n_sites)?;
        Ok(Self { theta, n_sites })
    }
}

/// `I cos(θ/2) + i σ^y sin(θ/2)`.
pub fn single_site_rotation(theta: f64) -> [[C64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [C64::new(c, 0.0), C64::new(s, 0.0)],
        [C64::new(-s, 0.0), C64::new(c, 0.0)],
    ]
}

/// `R(θ) = ⊗_i [I cos(θ/2) + i σ^y_i sin(θ/2)]`.
///
/// The result is dense for generic θ (`4^N` entries).
pub fn global_rotation(spec: &RotationSpec) -> SparseOperator {
    let r = single_site_rotation(spec.theta);
    let single = SparseOperator::from_triplets(
        2,
        (0..2).flat_map(|i| (0..2).map(move |j| (i, j, r[i][j]))),
    );
    (1..spec.n_sites).fold(single.clone(), |acc, _| acc.kron(&single))
}

/// `(1/N) R†(θ) Σ_i σ^z_i R(θ)`, the average magnetization along the
/// direction tilted by θ from z towards x.
///
/// Built site by site: the rotations on other sites cancel, leaving
/// `r†σ^z r = cos θ σ^z + sin θ σ^x` on each site.
pub fn rotated_magnetization(theta: f64, n_sites: usize) -> Result<SparseOperator> {
    let dim = check_sites(n_sites)?;
    let r = single_site_rotation(theta);
    let z = Axis::Z.matrix();
    let mut local = [[ZERO; 2]; 2];
    // local = r† z r
    for (i, row) in local.iter_mut().enumerate() {
        for (j, out) in row.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in 0..2 {
                for l in 0..2 {
                    acc += r[k][i].conj() * z[k][l] * r[l][j];
                }
            }
            *out = acc;
        }
    }
    let weight = 1.0 / n_sites as f64;
    let mut trip = Vec::with_capacity(dim * (n_sites + 1));
    for site in 0..n_sites {
        trip.extend(
            site_operator(site, local, n_sites)?
                .entries()
                .map(|(r, c, v)| (r, c, v * weight)),
        );
    }
    Ok(SparseOperator::from_triplets(dim, trip))
}

/// `op · |ψ⟩`.
pub fn apply(op: &SparseOperator, psi: &StateVector) -> Result<Vec<C64>> {
    if op.dim() != psi.dim() {
        return Err(Error::Shape {
            expected: op.dim(),
            actual: psi.dim(),
        });
    }
    let mut out = vec![ZERO; op.dim()];
    op.apply_into(psi.amplitudes(), &mut out);
    Ok(out)
}

/// `⟨ψ|op|ψ⟩` for Hermitian `op`.
pub fn expectation(op: &SparseOperator, psi: &StateVector) -> Result<f64> {
    let v = expectation_raw(op, psi.amplitudes())?;
    Ok(v)
}

pub(crate) fn expectation_raw(op: &SparseOperator, psi: &[C64]) -> Result<f64> {
    if op.dim() != psi.len() {
        return Err(Error::Shape {
            expected: op.dim(),
            actual: psi.len(),
        });
    }
    let mut acc = ZERO;
    for (r, a) in psi.iter().enumerate() {
        let mut row = ZERO;
        for (c, v) in op.row(r) {
            row += v * psi[c];
        }
        acc += a.conj() * row;
    }
    if acc.im.abs() > EXPECTATION_IMAG_TOLERANCE * acc.re.abs().max(1.0) {
        return Err(Error::Hermiticity { residue: acc.im.abs() });
    }
    Ok(acc.re)
}

/// Basis permutation of the global spin flip `Π = ⊗_i σ^x_i`.
pub fn spin_flip_permutation(n_sites: usize) -> Vec<usize> {
    let dim = 1usize << n_sites;
    (0..dim).map(|s| s ^ (dim - 1)).collect()
}

/// Basis permutation mapping site `i` to site `N-1-i`.
pub fn site_reversal_permutation(n_sites: usize) -> Vec<usize> {
    let dim = 1usize << n_sites;
    (0..dim)
        .map(|s| {
            (0..n_sites).fold(0, |acc, site| {
                if s & site_mask(site, n_sites) != 0 {
                    acc | site_mask(n_sites - 1 - site, n_sites)
                } else {
                    acc
                }
            })
        })
        .collect()
}

/// Unitary `P` with `P|s⟩ = |perm[s]⟩`.
pub fn permutation_operator(perm: &[usize]) -> SparseOperator {
    SparseOperator::from_triplets(perm.len(), perm.iter().enumerate().map(|(s, &p)| (p, s, ONE)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_site_pauli_z() {
        let z = pauli_site(0, Axis::Z, 1).unwrap();
        let dense = z.to_dense();
        assert_eq!(dense[(0, 0)], ONE);
        assert_eq!(dense[(1, 1)], -ONE);
        assert_eq!(z.nnz(), 2);
    }

    #[test]
    fn commutator_xy_is_2iz() {
        let x = pauli_site(0, Axis::X, 1).unwrap();
        let y = pauli_site(0, Axis::Y, 1).unwrap();
        let z = pauli_site(0, Axis::Z, 1).unwrap();
        let comm = x.commutator(&y);
        assert!(comm.max_abs_diff(&z.scale(c(0.0, 2.0))) < 1e-15);
    }

    #[test]
    fn second_site_x_matches_hand_kron() {
        // I ⊗ σx on 2 sites flips the low bit: |00>↔|01>, |10>↔|11>
        let x1 = pauli_site(1, Axis::X, 2).unwrap().to_dense();
        let mut expect = DMatrix::from_element(4, 4, ZERO);
        expect[(0, 1)] = ONE;
        expect[(1, 0)] = ONE;
        expect[(2, 3)] = ONE;
        expect[(3, 2)] = ONE;
        assert_eq!(x1, expect);
    }

    #[test]
    fn pauli_site_out_of_range() {
        assert!(matches!(
            pauli_site(3, Axis::X, 3),
            Err(Error::Index { index: 3, len: 3 })
        ));
    }

    #[test]
    fn canonical_storage_drops_cancelled_entries() {
        let op = SparseOperator::from_triplets(
            2,
            [(0, 1, ONE), (0, 1, -ONE), (1, 1, ONE), (1, 0, ZERO)],
        );
        assert_eq!(op.nnz(), 1);
        assert_eq!(op.get(1, 1), ONE);
    }

    #[test]
    fn zero_rotation_is_identity() {
        let r = global_rotation(&RotationSpec::new(0.0, 3).unwrap());
        assert_eq!(r, SparseOperator::identity(8));
    }

    #[test]
    fn quarter_turn_maps_z_to_x() {
        let r = global_rotation(&RotationSpec::new(FRAC_PI_2, 1).unwrap());
        let z = pauli_site(0, Axis::Z, 1).unwrap();
        let x = pauli_site(0, Axis::X, 1).unwrap();
        let rot = r.adjoint().matmul(&z).matmul(&r);
        assert!(rot.max_abs_diff(&x) < 1e-15);
    }

    #[test]
    fn rotated_z_against_2x2_algebra() {
        for theta in [PI / 6.0, PI / 3.0] {
            let (s, co) = (theta / 2.0).sin_cos();
            // hand-written R = [[c, s], [-s, c]]
            let r = [[co, s], [-s, co]];
            let z = [[1.0, 0.0], [0.0, -1.0]];
            let mut out = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            out[i][j] += r[k][i] * z[k][l] * r[l][j];
                        }
                    }
                }
            }
            let op = rotated_magnetization(theta, 1).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((op.get(i, j) - c(out[i][j], 0.0)).norm() < 1e-15);
                }
            }
            assert!((out[0][0] - theta.cos()).abs() < 1e-15);
            assert!((out[0][1] - theta.sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn rotated_magnetization_zero_angle() {
        let m = rotated_magnetization(0.0, 3).unwrap();
        let expect = pauli_sum(Axis::Z, 3).unwrap().scale(c(1.0 / 3.0, 0.0));
        assert!(m.max_abs_diff(&expect) < 1e-16);
    }

    #[test]
    fn rotated_magnetization_quarter_turn_two_sites() {
        let m = rotated_magnetization(FRAC_PI_2, 2).unwrap();
        let mut expect = DMatrix::from_element(4, 4, ZERO);
        for (r, col) in [(0, 1), (1, 0), (2, 3), (3, 2), (0, 2), (2, 0), (1, 3), (3, 1)] {
            expect[(r, col)] = c(0.5, 0.0);
        }
        let d = m.to_dense() - expect;
        assert!(d.iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn rotated_magnetization_matches_conjugation() {
        let n = 3;
        let theta = 0.7;
        let r = global_rotation(&RotationSpec::new(theta, n).unwrap());
        let zsum = pauli_sum(Axis::Z, n).unwrap().scale(c(1.0 / n as f64, 0.0));
        let direct = r.adjoint().matmul(&zsum).matmul(&r);
        let m = rotated_magnetization(theta, n).unwrap();
        assert!(direct.max_abs_diff(&m) < 1e-14);
        assert!(m.is_hermitian());
    }

    #[test]
    fn all_up_expectation_is_cos_theta() {
        let psi = StateVector::all_up(4).unwrap();
        for theta in [0.0, 0.3, PI / 6.0, PI / 3.0, FRAC_PI_2] {
            let m = rotated_magnetization(theta, 4).unwrap();
            let e = expectation(&m, &psi).unwrap();
            assert!((e - theta.cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn apply_identity_and_flip() {
        let psi = StateVector::normalized(vec![c(1.0, 0.5), c(-0.3, 2.0)], 1).unwrap();
        let out = apply(&SparseOperator::identity(2), &psi).unwrap();
        assert_eq!(out, psi.amplitudes());
        let x = pauli_site(0, Axis::X, 1).unwrap();
        let up = StateVector::all_up(1).unwrap();
        assert_eq!(apply(&x, &up).unwrap(), vec![ZERO, ONE]);
    }

    #[test]
    fn apply_shape_error() {
        let x = pauli_site(0, Axis::X, 2).unwrap();
        let up = StateVector::all_up(1).unwrap();
        assert!(matches!(apply(&x, &up), Err(Error::Shape { .. })));
    }

    #[test]
    fn basic_expectations() {
        let up = StateVector::all_up(1).unwrap();
        let z = pauli_site(0, Axis::Z, 1).unwrap();
        let x = pauli_site(0, Axis::X, 1).unwrap();
        assert_eq!(expectation(&z, &up).unwrap(), 1.0);
        assert_eq!(expectation(&x, &up).unwrap(), 0.0);
    }

    #[test]
    fn non_hermitian_expectation_rejected() {
        let op = SparseOperator::from_triplets(2, [(0, 1, ONE)]);
        let psi = StateVector::normalized(vec![ONE, I], 1).unwrap();
        assert!(matches!(
            expectation(&op, &psi),
            Err(Error::Hermiticity { .. })
        ));
    }

    #[test]
    fn state_vector_invariants() {
        assert!(matches!(
            StateVector::new(vec![ONE, ONE], 1),
            Err(Error::Norm { .. })
        ));
        assert!(matches!(
            StateVector::new(vec![ONE], 1),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn site_reversal_permutation_three_sites() {
        let p = site_reversal_permutation(3);
        // 0b100 -> 0b001, 0b110 -> 0b011, palindromes fixed
        assert_eq!(p[4], 1);
        assert_eq!(p[6], 3);
        assert_eq!(p[5], 5);
        assert_eq!(spin_flip_permutation(3)[0], 7);
    }
}

//! Spin-spin couplings of a linear ion chain driven by a spin-dependent
//! force detuned from the transverse phonon modes.
//!
//! Lengths are in units of the Coulomb length `(e²/4πε₀Mω_z²)^{1/3}`,
//! frequencies in units of the transverse center-of-mass frequency.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const FORCE_TOLERANCE: f64 = 1e-10;
const SYMMETRY_TOLERANCE: f64 = 1e-9;
const RESONANCE_TOLERANCE: f64 = 1e-9;
const NEWTON_MAX_ITERATIONS: usize = 200;

/// Ratio `ω_axial / ω_transverse` of the reference trap (0.691 MHz / 4.8 MHz).
pub const DEFAULT_BETA: f64 = 0.691 / 4.8;

/// Raman beatnote of the reference setup, in units of `ω_COM`.
pub const DEFAULT_MU: f64 = 1.0219;

/// Equilibrium configuration of a linear Coulomb crystal.
#[derive(Debug, Clone, PartialEq)]
pub struct IonChain {
    positions: Vec<f64>,
    beta: f64,
}

impl IonChain {
    /// Equilibrium chain of `n_ions` in a trap with anisotropy `beta`.
    pub fn equilibrium(n_ions: usize, beta: f64) -> Result<Self> {
        let positions = solve_equilibrium(n_ions)?;
        Self::new(positions, beta)
    }

    /// Validates ordering, reflection symmetry and force balance.
    pub fn new(positions: Vec<f64>, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Domain(format!("trap anisotropy must be positive, got {beta}")));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("ion positions must be strictly increasing".into()));
        }
        let n = positions.len();
        for i in 0..n {
            if (positions[i] + positions[n - 1 - i]).abs() > SYMMETRY_TOLERANCE {
                return Err(Error::Domain("ion positions not reflection symmetric".into()));
            }
        }
        let residual = max_abs(&force_residual(&positions));
        if residual >= FORCE_TOLERANCE {
            return Err(Error::Domain(format!(
                "positions are not in force balance (residual {residual:e})"
            )));
        }
        Ok(Self { positions, beta })
    }

    pub fn n_ions(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `|u_i - u_j|`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.positions[i] - self.positions[j]).abs()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Net axial force on each ion: trap restoring term plus Coulomb repulsion.
pub fn force_residual(u: &[f64]) -> Vec<f64> {
    (0..u.len())
        .map(|i| {
            u[i] - u
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &uj)| (u[i] - uj).signum() / (u[i] - uj).powi(2))
                .sum::<f64>()
        })
        .collect()
}

/// Equilibrium positions from a uniformly spaced initial guess.
pub fn solve_equilibrium(n_ions: usize) -> Result<Vec<f64>> {
    if n_ions == 0 {
        return Err(Error::Domain("chain needs at least one ion".into()));
    }
    let spacing = 2.018 / (n_ions as f64).powf(0.559);
    let center = (n_ions - 1) as f64 / 2.0;
    let guess: Vec<f64> = (0..n_ions).map(|i| (i as f64 - center) * spacing).collect();
    solve_equilibrium_from(&guess)
}

/// Damped Newton iteration on the force balance starting at `guess`, which
/// must be strictly increasing.
pub fn solve_equilibrium_from(guess: &[f64]) -> Result<Vec<f64>> {
    let n = guess.len();
    let mut u = guess.to_vec();
    let mut f = force_residual(&u);
    let mut res = max_abs(&f);
    for _ in 0..NEWTON_MAX_ITERATIONS {
        if res < 1e-13 {
            return Ok(u);
        }
        // Hessian of the axial potential
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut diag = 1.0;
            for j in 0..n {
                if i != j {
                    let k = 2.0 / (u[i] - u[j]).abs().powi(3);
                    jac[(i, j)] = -k;
                    diag += k;
                }
            }
            jac[(i, i)] = diag;
        }
        let step = jac
            .lu()
            .solve(&DVector::from_column_slice(&f))
            .ok_or(Error::Convergence {
                what: "equilibrium Newton step",
                iterations: 0,
                residual: res,
            })?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, d)| x - lambda * d).collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            if ordered {
                let ft = force_residual(&trial);
                let rt = max_abs(&ft);
                if rt < res || lambda < 1e-3 {
                    u = trial;
                    f = ft;
                    res = rt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(Error::Convergence {
                    what: "equilibrium line search",
                    iterations: 0,
                    residual: res,
                });
            }
        }
    }
    if res < FORCE_TOLERANCE {
        return Ok(u);
    }
    Err(Error::Convergence {
        what: "equilibrium positions",
        iterations: NEWTON_MAX_ITERATIONS,
        residual: res,
    })
}

/// Transverse normal modes.
#[derive(Debug, Clone, PartialEq)]
pub struct PhononModes {
    /// Mode frequencies in descending order; the first is the COM mode.
    pub frequencies: Vec<f64>,
    /// Column `ν` is the normalized participation vector `b_{·ν}`.
    pub vectors: DMatrix<f64>,
}

impl PhononModes {
    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    /// `b_{iν}`.
    pub fn component(&self, ion: usize, mode: usize) -> f64 {
        self.vectors[(ion, mode)]
    }
}

/// Transverse stiffness matrix in units of `ω_transverse²`.
pub fn stiffness_matrix(chain: &IonChain) -> DMatrix<f64> {
    let n = chain.n_ions();
    let b2 = chain.beta * chain.beta;
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut diag = 1.0;
        for j in 0..n {
            if i != j {
                let k = b2 / chain.distance(i, j).powi(3);
                a[(i, j)] = k;
                diag -= k;
            }
        }
        a[(i, i)] = diag;
    }
    a
}

/// Diagonalizes the transverse stiffness matrix.
///
/// Each mode vector is signed so its largest component is positive.
pub fn transverse_modes(chain: &IonChain) -> Result<PhononModes> {
    let n = chain.n_ions();
    let eig = SymmetricEigen::new(stiffness_matrix(chain));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut frequencies = Vec::with_capacity(n);
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[k];
        if lambda <= 0.0 {
            return Err(Error::Stability {
                n_ions: n,
                beta: chain.beta,
                eigenvalue: lambda,
            });
        }
        frequencies.push(lambda.sqrt());
        let v = eig.eigenvectors.column(k);
        let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let pivot = v.iter().position(|x| x.abs() >= max * (1.0 - 1e-9)).unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, col)] = sign * v[i];
        }
    }
    Ok(PhononModes {
        frequencies,
        vectors,
    })
}

/// How the raw mode sum is converted to the energy unit `J_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingNorm {
    /// `J_ij = j0 Σ_ν b_iν b_jν / (μ² − ω_ν²)` with frequencies in `ω_COM`.
    Raw,
    /// The raw matrix rescaled so its largest coupling equals `j0`.
    MaxCoupling,
}

/// Drive parameters of the spin-dependent force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    /// Raman beatnote in units of `ω_COM`; must sit blue of the COM mode.
    pub mu: f64,
    /// Energy scale `J_0 = Ω² ν_R`.
    pub j0: f64,
    pub norm: CouplingNorm,
}

impl CouplingParams {
    pub fn new(mu: f64, j0: f64, norm: CouplingNorm) -> Result<Self> {
        if !(mu.is_finite() && mu > 1.0) {
            return Err(Error::Domain(format!(
                "beatnote must lie blue of the COM mode (mu > 1), got {mu}"
            )));
        }
        if !(j0.is_finite() && j0 > 0.0) {
            return Err(Error::Domain(format!("j0 must be positive, got {j0}")));
        }
        Ok(Self { mu, j0, norm })
    }
}

impl Default for CouplingParams {
    fn default() -> Self {
        Self {
            mu: DEFAULT_MU,
            j0: 1.0,
            norm: CouplingNorm::MaxCoupling,
        }
    }
}

/// Real symmetric coupling matrix with zero diagonal, in units of `J_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CouplingMatrix {
    /// Row-major `n × n` values; must be exactly symmetric with zero diagonal.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Shape {
                expected: n * n,
                actual: values.len(),
            });
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::Domain("coupling diagonal must be zero".into()));
            }
            for j in 0..i {
                if values[i * n + j] != values[j * n + i] {
                    return Err(Error::Domain("coupling matrix must be symmetric".into()));
                }
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("coupling matrix has non-finite entries".into()));
        }
        Ok(Self { n, values })
    }

    /// Builds a symmetric matrix from `f(i, j)` evaluated for `i < j`.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self::new(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest off-diagonal entry.
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Whether `J_ij = J_{N-1-i, N-1-j}` to `tol`.
    pub fn is_reflection_symmetric(&self, tol: f64) -> bool {
        let n = self.n;
        (0..n).all(|i| (0..n).all(|j| (self.get(i, j) - self.get(n - 1 - i, n - 1 - j)).abs() <= tol))
    }

    /// Pairs `(i, j, J_ij)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j, self.get(i, j))))
    }
}

/// `J_ij = J_0 Σ_ν b_iν b_jν / (μ² − ω_ν²)`, diagonal set to zero.
pub fn jij_matrix(modes: &PhononModes, params: &CouplingParams) -> Result<CouplingMatrix> {
    let n = modes.n_modes();
    let mu2 = params.mu * params.mu;
    let mut weights = Vec::with_capacity(n);
    for (mode, &omega) in modes.frequencies.iter().enumerate() {
        if (params.mu - omega).abs() < RESONANCE_TOLERANCE {
            return Err(Error::Resonance {
                mu: params.mu,
                mode,
                omega,
            });
        }
        weights.push(1.0 / (mu2 - omega * omega));
    }
    let raw = CouplingMatrix::from_fn(n, |i, j| {
        (0..n)
            .map(|nu| modes.component(i, nu) * modes.component(j, nu) * weights[nu])
            .sum()
    })?;
    let scale = match params.norm {
        CouplingNorm::Raw => params.j0,
        CouplingNorm::MaxCoupling if n > 1 => params.j0 / raw.max(),
        CouplingNorm::MaxCoupling => 1.0,
    };
    Ok(raw.scaled(scale))
}

/// Chain, modes and couplings in one go.
pub fn ion_chain_couplings(
    n_ions: usize,
    beta: f64,
    params: &CouplingParams,
) -> Result<(IonChain, PhononModes, CouplingMatrix)> {
    let chain = IonChain::equilibrium(n_ions, beta)?;
    let modes = transverse_modes(&chain)?;
    let j = jij_matrix(&modes, params)?;
    if !j.is_reflection_symmetric(SYMMETRY_TOLERANCE * j.max().abs().max(1.0)) {
        return Err(Error::Consistency("couplings break reflection symmetry".into()));
    }
    Ok((chain, modes, j))
}

/// Exponent `α` of the least-squares fit `log J_ij = c − α log r_ij`.
pub fn fit_power_law(j: &CouplingMatrix, chain: &IonChain) -> Result<f64> {
    fit_power_law_at(j, chain.positions())
}

/// [`fit_power_law`] for arbitrary site positions.
pub fn fit_power_law_at(j: &CouplingMatrix, positions: &[f64]) -> Result<f64> {
    if j.n() != positions.len() {
        return Err(Error::Shape {
            expected: positions.len(),
            actual: j.n(),
        });
    }
    if j.n() < 3 {
        return Err(Error::Domain("power-law fit needs at least three ions".into()));
    }
    let mut pts = Vec::new();
    for (i, k, v) in j.pairs() {
        if v <= 0.0 {
            return Err(Error::Domain(format!("non-positive coupling J[{i}][{k}] = {v}")));
        }
        pts.push(((positions[k] - positions[i]).abs().ln(), v.ln()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(-sxy / sxx)
}

/// `J_ij = j0 / |i − j|^α` on a uniform lattice.
pub fn power_law_couplings(n: usize, alpha: f64, j0: f64) -> Result<CouplingMatrix> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Domain(format!("alpha must be non-negative, got {alpha}")));
    }
    CouplingMatrix::from_fn(n, |i, j| j0 / ((j - i) as f64).powf(alpha))
}

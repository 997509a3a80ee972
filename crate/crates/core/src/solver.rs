//! Per-energy Green's matrices, the nonlinear R matrix, the phase-shift
//! relation and the perturbative fixed-point iteration.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::hamiltonian::{assemble_linear, FreeMatrixCoeffs, HamiltonianError, LinearHamiltonian, Potential};
use crate::linearize::{d_tensor, d_tensor_self_check, exact_quadrature_bound, DTensor, LinearizeError};
use crate::quadrature::{gauss_rule, QuadratureError, QuadratureRule};
use crate::reference::{oscillator_reference, EnergyPoint, ReferenceCoefficients, ReferenceError};
use crate::specfun::ln_factorial;

/// Condition-number ceiling for the direct Green's matrix.
pub const MAX_CONDITION: f64 = 1e12;
/// Relative energy shift applied once when E hits the effective spectrum.
pub const SINGULAR_SHIFT: f64 = 1e-6;
/// Eigenvalue separation below which the spectral formulas are refused.
pub const DEGENERACY_GAP: f64 = 1e-12;
/// Consecutive cycle hits needed to certify a bifurcation.
pub const CYCLE_HITS: usize = 4;
/// Shorter-lag deviations must exceed this multiple of the cycle tolerance.
pub const CYCLE_SEPARATION: f64 = 10.0;
pub const CYCLE_PERIODS: [usize; 2] = [2, 3];
/// Largest accepted D deviation between rule orders Q and 2Q.
pub const D_CONVERGENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("energy grid is empty")]
    EmptyGrid,
    #[error("quadrature order {got} is below (n+1)N−n = {required}; the override flag is required")]
    QuadratureBound { required: usize, got: usize },
    #[error("D tensor changes by {deviation:.3e} between quadrature orders {quad_order} and {}; raise the order or pass the override flag", 2 * quad_order)]
    DTensorUnconverged { deviation: f64, quad_order: usize },
    #[error("Green's matrix is singular at E = {energy} (condition estimate {condition:.3e})")]
    SingularGreens { energy: f64, condition: f64 },
    #[error("vanishing denominator in the phase-shift relation at E = {energy}")]
    VanishingDenominator { energy: f64 },
    #[error("degenerate eigenvalues in the spectral Green's formulas")]
    Degenerate,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid numerical setting: {0}")]
    InvalidSetting(String),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("{0}")]
    Linearize(String),
}

impl From<LinearizeError> for SolverError {
    fn from(e: LinearizeError) -> Self {
        SolverError::Linearize(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsParams {
    /// Nonlinearity order n of ψ^(2n+1).
    pub n: usize,
    pub g: f64,
    pub ell: usize,
    pub potential: Potential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub lambda: f64,
    pub size: usize,
    pub quad_order: usize,
    pub tolerance: f64,
    pub bifurcation_tolerance: f64,
    pub max_iterations: usize,
    /// Accept a rule order below (n+1)N−n and an unconverged D tensor.
    pub override_quadrature_bound: bool,
}

impl Numerics {
    /// λ = 1, N = 20, Q = 100 with the default iteration controls.
    pub fn standard() -> Self {
        Self {
            lambda: 1.0,
            size: 20,
            quad_order: 100,
            tolerance: 1e-8,
            bifurcation_tolerance: 1e-3,
            max_iterations: 50,
            override_quadrature_bound: false,
        }
    }
}

/// Energy-independent inputs shared by every solve.
#[derive(Debug, Clone)]
pub struct Precomputed {
    pub rule: QuadratureRule,
    pub hamiltonian: LinearHamiltonian,
    pub free: FreeMatrixCoeffs,
    pub dtensor: Option<DTensor>,
    /// Largest D deviation between rule orders Q and 2Q.
    pub d_self_check: Option<f64>,
}

pub fn precompute(params: &PhysicsParams, numerics: &Numerics) -> Result<Precomputed, SolverError> {
    let size = numerics.size;
    if size < 2 {
        return Err(SolverError::InvalidSetting(format!("basis size {size} must be at least 2")));
    }
    if !(numerics.lambda > 0.0) {
        return Err(SolverError::InvalidSetting(format!("λ = {} must be positive", numerics.lambda)));
    }
    if params.n == 0 {
        return Err(SolverError::InvalidSetting("nonlinearity order n must be at least 1".into()));
    }
    let required = exact_quadrature_bound(params.n, size);
    if numerics.quad_order < required && !numerics.override_quadrature_bound {
        return Err(SolverError::QuadratureBound { required, got: numerics.quad_order });
    }
    let rule = gauss_rule(numerics.quad_order, params.ell)?;
    let hamiltonian = assemble_linear(numerics.lambda, params.ell, size, &params.potential, &rule)?;
    let (dtensor, d_self_check) = if params.g != 0.0 {
        let d = d_tensor(params.n, params.ell, size, &rule)?;
        let rule2 = gauss_rule(2 * numerics.quad_order, params.ell)?;
        let check = d_tensor_self_check(params.n, size, &rule, &rule2, 10);
        if check > D_CONVERGENCE_TOL && !numerics.override_quadrature_bound {
            return Err(SolverError::DTensorUnconverged { deviation: check, quad_order: numerics.quad_order });
        }
        (Some(d), Some(check))
    } else {
        (None, None)
    };
    Ok(Precomputed { rule, hamiltonian, free: FreeMatrixCoeffs::new(numerics.lambda, params.ell), dtensor, d_self_check })
}

/// Coefficients of one perturbation order at one energy.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientState {
    pub order: usize,
    pub energy: f64,
    /// A_0..A_N.
    pub a: Vec<Complex64>,
    pub s: Complex64,
}

/// Σ over the distinct orderings of `t` of Π_{a<n} A Π_{a≥n} conj(A).
fn symmetrized_product(t: &[usize], a: &[Complex64], n: usize) -> Complex64 {
    let mut perm = t.to_vec();
    let mut acc = Complex64::new(0.0, 0.0);
    loop {
        let mut p = Complex64::new(1.0, 0.0);
        for (pos, &k) in perm.iter().enumerate() {
            p *= if pos < n { a[k] } else { a[k].conj() };
        }
        acc += p;
        // next lexicographic permutation
        let len = perm.len();
        let Some(i) = (0..len.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
            return acc;
        };
        let j = (i + 1..len).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
}

/// R_{i,j} = (2λ²/ℓ!)^n Σ D_{i,j}^{k_1..k_{2n}} A_{k_1}…A_{k_n} Ā_{k_{n+1}}…Ā_{k_{2n}},
/// returned after (R + R†)/2 together with the pre-symmetrization defect.
pub fn r_matrix(prev: &[Complex64], d: &DTensor, lambda: f64) -> Result<(DMatrix<Complex64>, f64), SolverError> {
    let size = d.size;
    if prev.len() < size {
        return Err(SolverError::Dimension(format!("{} coefficients for basis size {size}", prev.len())));
    }
    let mut re = DMatrix::<f64>::zeros(size, size);
    let mut im = DMatrix::<f64>::zeros(size, size);
    for (t, m) in d.iter() {
        let c = symmetrized_product(t, prev, d.n);
        for ((x, y), v) in re.iter_mut().zip(im.iter_mut()).zip(m.iter()) {
            *x += c.re * v;
            *y += c.im * v;
        }
    }
    let pref = (d.n as f64 * ((2.0 * lambda * lambda).ln() - ln_factorial(d.ell))).exp();
    let r = DMatrix::from_fn(size, size, |i, j| Complex64::new(re[(i, j)], im[(i, j)]) * pref);
    let adj = r.adjoint();
    let defect = (&r - &adj).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    Ok(((&r + adj) * Complex64::new(0.5, 0.0), defect))
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn effective_matrix(h: &DMatrix<f64>, r: Option<&DMatrix<Complex64>>, g: f64, shift: f64) -> DMatrix<Complex64> {
    let n = h.nrows();
    let mut m = DMatrix::from_fn(n, n, |i, j| Complex64::new(h[(i, j)], 0.0));
    if let Some(r) = r {
        if g != 0.0 {
            m += r * Complex64::new(g, 0.0);
        }
    }
    for k in 0..n {
        m[(k, k)] -= shift;
    }
    m
}

/// [H + gR − E]^{−1} by LU factorization.
pub fn greens_matrix(h: &DMatrix<f64>, r: Option<&DMatrix<Complex64>>, g: f64, energy: f64) -> Result<DMatrix<Complex64>, SolverError> {
    if let Some(r) = r {
        if r.shape() != h.shape() {
            return Err(SolverError::Dimension(format!("R is {:?}, H is {:?}", r.shape(), h.shape())));
        }
    }
    let m = effective_matrix(h, r, g, energy);
    let norm = one_norm(&m);
    let inv = m.lu().try_inverse().ok_or(SolverError::SingularGreens { energy, condition: f64::INFINITY })?;
    let condition = norm * one_norm(&inv);
    if !(condition <= MAX_CONDITION) {
        return Err(SolverError::SingularGreens { energy, condition });
    }
    Ok(inv)
}

/// Spectral representation of the resolvent of a fixed self-adjoint matrix.
#[derive(Debug, Clone)]
pub struct SpectralGreens {
    pub matrix: DMatrix<Complex64>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<Complex64>,
}

impl SpectralGreens {
    pub fn new(h_eff: &DMatrix<Complex64>) -> Result<Self, SolverError> {
        if !h_eff.is_square() {
            return Err(SolverError::Dimension("H_eff must be square".into()));
        }
        let eig = SymmetricEigen::new(h_eff.clone());
        let mut idx: Vec<usize> = (0..h_eff.nrows()).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = DMatrix::from_fn(h_eff.nrows(), h_eff.nrows(), |r, c| eig.eigenvectors[(r, idx[c])]);
        Ok(Self { matrix: h_eff.clone(), eigenvalues, eigenvectors })
    }

    fn check_gaps(&self) -> Result<(), SolverError> {
        let scale = self.eigenvalues.iter().fold(1.0f64, |m, e| m.max(e.abs()));
        if self.eigenvalues.windows(2).any(|w| w[1] - w[0] < DEGENERACY_GAP * scale) {
            return Err(SolverError::Degenerate);
        }
        Ok(())
    }

    /// G_{i,j}(E) = Σ_k Γ_{i,k} conj(Γ_{j,k}) / (ℰ_k − E).
    pub fn entry_eigenvector_sum(&self, i: usize, j: usize, energy: f64) -> Complex64 {
        self.eigenvalues.iter().enumerate().map(|(k, &e)| self.eigenvectors[(i, k)] * self.eigenvectors[(j, k)].conj() / (e - energy)).sum()
    }

    /// Eigenvalues of the matrix with row i and column i removed, ascending.
    pub fn abbreviated_eigenvalues(&self, i: usize) -> Vec<f64> {
        let minor = self.matrix.clone().remove_row(i).remove_column(i);
        let mut v: Vec<f64> = SymmetricEigen::new(minor).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// G_{i,i}(E) = Π(ℰ^{(i,i)}_k − E) / Π(ℰ_k − E).
    pub fn diagonal_determinant_ratio(&self, i: usize, energy: f64) -> Result<f64, SolverError> {
        self.check_gaps()?;
        let num: f64 = self.abbreviated_eigenvalues(i).iter().map(|e| e - energy).product();
        let den: f64 = self.eigenvalues.iter().map(|e| e - energy).product();
        Ok(num / den)
    }

    /// Partial-fraction form over the eigenvalues with minor determinants
    /// of (H − ℰ_k) as residues.
    pub fn entry_partial_fraction(&self, i: usize, j: usize, energy: f64) -> Result<Complex64, SolverError> {
        self.check_gaps()?;
        let n = self.eigenvalues.len();
        let sign = if (i + j).is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &ek) in self.eigenvalues.iter().enumerate() {
            let mut shifted = self.matrix.clone();
            for d in 0..n {
                shifted[(d, d)] -= ek;
            }
            let minor = shifted.remove_row(j).remove_column(i);
            let det = if minor.nrows() == 0 { Complex64::new(1.0, 0.0) } else { minor.lu().determinant() };
            let gaps: f64 = self.eigenvalues.iter().enumerate().filter(|&(m, _)| m != k).map(|(_, &em)| em - ek).product();
            acc += det / ((ek - energy) * gaps);
        }
        Ok(acc * sign)
    }
}

/// S = T_{N−1}(1 + b G ℛ⁻_N)/(1 + b G ℛ⁺_N).
pub fn phase_shift(
    g_last: Complex64,
    reference: &ReferenceCoefficients,
    b_last: f64,
    size: usize,
    energy: f64,
) -> Result<Complex64, SolverError> {
    if reference.c.len() <= size || reference.s.len() <= size {
        return Err(SolverError::Dimension(format!("reference has {} entries, need {}", reference.c.len(), size + 1)));
    }
    let hp1 = reference.h_plus(size - 1);
    let hm1 = reference.h_minus(size - 1);
    let tiny = |z: Complex64| z.norm() < 1e-300;
    if tiny(hp1) || tiny(hm1) {
        return Err(SolverError::VanishingDenominator { energy });
    }
    let t = hm1 / hp1;
    let rm = reference.h_minus(size) / hm1;
    let rp = reference.h_plus(size) / hp1;
    let den = Complex64::new(1.0, 0.0) + g_last * rp * b_last;
    if tiny(den) {
        return Err(SolverError::VanishingDenominator { energy });
    }
    Ok(t * (Complex64::new(1.0, 0.0) + g_last * rm * b_last) / den)
}

/// A_k = −b_{N−1} G_{k,N−1} A_N for k = 0..N−1.
pub fn interior_coefficients(green: &DMatrix<Complex64>, a_n: Complex64, b_last: f64) -> Vec<Complex64> {
    let last = green.ncols() - 1;
    (0..green.nrows()).map(|k| -green[(k, last)] * a_n * b_last).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Converged {
        order: usize,
        s: Complex64,
    },
    /// `values[p]` is the cycle value at orders m ≡ p (mod period).
    Bifurcated {
        period: usize,
        values: Vec<Complex64>,
    },
    MaxIterations,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub max_unimodularity_defect: f64,
    pub max_hermiticity_defect: f64,
    /// Relative mismatch between the two A_{N−1} formulas.
    pub max_row_defect: f64,
    /// Largest disagreement between direct, eigenvector-sum and
    /// determinant-ratio diagonals, when sampled.
    pub greens_crosscheck: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringResult {
    pub energy: f64,
    /// Energy actually solved, which differs from `energy` after a
    /// singular-point retry.
    pub energy_used: f64,
    pub history: Vec<Complex64>,
    pub status: Status,
    /// Final A_0..A_N.
    pub coefficients: Vec<Complex64>,
    pub diagnostics: Diagnostics,
}

impl ScatteringResult {
    pub fn abs_one_minus_s(&self) -> Vec<f64> {
        self.history.iter().map(|s| (Complex64::new(1.0, 0.0) - s).norm()).collect()
    }

    pub fn final_s(&self) -> Complex64 {
        match &self.status {
            Status::Converged { s, .. } => *s,
            _ => *self.history.last().expect("history is never empty"),
        }
    }

    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }
}

/// Period p certified when the last [`CYCLE_HITS`] orders all satisfy
/// |S_m − S_{m−p}| < tol while every shorter lag stays at or above
/// [`CYCLE_SEPARATION`]·tol.
pub fn detect_cycle(history: &[Complex64], tol: f64) -> Option<usize> {
    let len = history.len();
    CYCLE_PERIODS.into_iter().find(|&p| {
        len >= p + CYCLE_HITS
            && (len - CYCLE_HITS..len).all(|m| {
                (history[m] - history[m - p]).norm() < tol && (1..p).all(|q| (history[m] - history[m - q]).norm() >= CYCLE_SEPARATION * tol)
            })
    })
}

/// One fixed-point step's outputs.
struct Step {
    s: Complex64,
    a: Vec<Complex64>,
    green: DMatrix<Complex64>,
    row_defect: f64,
}

fn linear_step(
    pre: &Precomputed,
    reference: &ReferenceCoefficients,
    r: Option<&DMatrix<Complex64>>,
    g: f64,
    energy: f64,
) -> Result<Step, SolverError> {
    let size = pre.hamiltonian.size;
    let b_last = pre.free.b(size - 1);
    let green = greens_matrix(&pre.hamiltonian.matrix, r, g, energy)?;
    let s = phase_shift(green[(size - 1, size - 1)], reference, b_last, size, energy)?;
    let a_n = reference.h_minus(size) - s * reference.h_plus(size);
    let a_last = reference.h_minus(size - 1) - s * reference.h_plus(size - 1);
    let mut a = interior_coefficients(&green, a_n, b_last);
    let row_defect = (a[size - 1] - a_last).norm() / a_last.norm().max(1.0);
    a[size - 1] = a_last;
    a.push(a_n);
    Ok(Step { s, a, green, row_defect })
}

/// S from the linear problem alone (R ≡ 0).
pub fn linear_s_matrix(pre: &Precomputed, ell: usize, energy: f64) -> Result<Complex64, SolverError> {
    let ep = EnergyPoint::new(energy, pre.free.lambda)?;
    let reference = oscillator_reference(&ep, ell, pre.hamiltonian.size)?;
    Ok(linear_step(pre, &reference, None, 0.0, energy)?.s)
}

fn solve_once(
    params: &PhysicsParams,
    numerics: &Numerics,
    pre: &Precomputed,
    energy: f64,
    cross_validate: bool,
) -> Result<ScatteringResult, SolverError> {
    let ep = EnergyPoint::new(energy, numerics.lambda)?;
    let size = pre.hamiltonian.size;
    let reference = oscillator_reference(&ep, params.ell, size)?;
    let mut diag = Diagnostics::default();
    let mut history = Vec::new();
    let mut r: Option<DMatrix<Complex64>> = None;
    let mut step = linear_step(pre, &reference, None, 0.0, energy)?;
    let status = loop {
        let m = history.len();
        history.push(step.s);
        diag.max_unimodularity_defect = diag.max_unimodularity_defect.max((step.s.norm() - 1.0).abs());
        diag.max_row_defect = diag.max_row_defect.max(step.row_defect);
        if params.g == 0.0 {
            break Status::Converged { order: 0, s: step.s };
        }
        if m >= 1 && (history[m] - history[m - 1]).norm() < numerics.tolerance {
            break Status::Converged { order: m, s: step.s };
        }
        if let Some(period) = detect_cycle(&history, numerics.bifurcation_tolerance) {
            let mut values = vec![Complex64::new(0.0, 0.0); period];
            for k in m + 1 - period..=m {
                values[k % period] = history[k];
            }
            break Status::Bifurcated { period, values };
        }
        if m >= numerics.max_iterations {
            break Status::MaxIterations;
        }
        let d = pre.dtensor.as_ref().ok_or_else(|| SolverError::InvalidSetting("D tensor missing for g ≠ 0".into()))?;
        let (rm, defect) = r_matrix(&step.a[..size], d, numerics.lambda)?;
        diag.max_hermiticity_defect = diag.max_hermiticity_defect.max(defect);
        step = linear_step(pre, &reference, Some(&rm), params.g, energy)?;
        r = Some(rm);
    };
    if cross_validate {
        let h_eff = effective_matrix(&pre.hamiltonian.matrix, r.as_ref(), params.g, 0.0);
        let sg = SpectralGreens::new(&h_eff)?;
        let mut worst = 0.0f64;
        for i in 0..size {
            let direct = step.green[(i, i)];
            let scale = direct.norm().max(1.0);
            worst = worst.max((sg.entry_eigenvector_sum(i, i, energy) - direct).norm() / scale);
            if let Ok(ratio) = sg.diagonal_determinant_ratio(i, energy) {
                worst = worst.max((Complex64::new(ratio, 0.0) - direct).norm() / scale);
            }
        }
        diag.greens_crosscheck = Some(worst);
    }
    Ok(ScatteringResult { energy, energy_used: energy, history, status, coefficients: step.a, diagnostics: diag })
}

/// Steps 4–11 at one energy, with one retry at E(1 + 10⁻⁶) if E collides
/// with the effective spectrum.
pub fn solve_energy(params: &PhysicsParams, numerics: &Numerics, pre: &Precomputed, energy: f64) -> Result<ScatteringResult, SolverError> {
    solve_energy_checked(params, numerics, pre, energy, false)
}

/// As [`solve_energy`], optionally recording the Green's cross-check.
pub fn solve_energy_checked(
    params: &PhysicsParams,
    numerics: &Numerics,
    pre: &Precomputed,
    energy: f64,
    cross_validate: bool,
) -> Result<ScatteringResult, SolverError> {
    match solve_once(params, numerics, pre, energy, cross_validate) {
        Err(SolverError::SingularGreens { .. }) => {
            let shifted = energy * (1.0 + SINGULAR_SHIFT);
            let mut res = solve_once(params, numerics, pre, shifted, cross_validate)?;
            res.energy = energy;
            res.energy_used = shifted;
            Ok(res)
        }
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub energy: f64,
    pub outcome: Result<ScatteringResult, SolverError>,
}

/// Independent solves over the grid, sorted by energy, in parallel on the
/// current rayon pool. Every `cross_validate_every`-th point records the
/// Green's cross-check.
pub fn scan(
    params: &PhysicsParams,
    numerics: &Numerics,
    pre: &Precomputed,
    energies: &[f64],
    cross_validate_every: Option<usize>,
) -> Result<Vec<ScanPoint>, SolverError> {
    if energies.is_empty() {
        return Err(SolverError::EmptyGrid);
    }
    let mut grid = energies.to_vec();
    grid.sort_by(f64::total_cmp);
    Ok(grid
        .par_iter()
        .enumerate()
        .map(|(i, &e)| {
            let check = cross_validate_every.is_some_and(|k| k > 0 && i % k == 0);
            ScanPoint { energy: e, outcome: solve_energy_checked(params, numerics, pre, e, check) }
        })
        .collect())
}

/// Linear S over many energies from one eigendecomposition of H.
pub fn linear_scan_spectral(pre: &Precomputed, ell: usize, energies: &[f64]) -> Result<Vec<Complex64>, SolverError> {
    let size = pre.hamiltonian.size;
    let h = effective_matrix(&pre.hamiltonian.matrix, None, 0.0, 0.0);
    let sg = SpectralGreens::new(&h)?;
    let b_last = pre.free.b(size - 1);
    energies
        .iter()
        .map(|&e| {
            let ep = EnergyPoint::new(e, pre.free.lambda)?;
            let reference = oscillator_reference(&ep, ell, size)?;
            phase_shift(sg.entry_eigenvector_sum(size - 1, size - 1, e), &reference, b_last, size, e)
        })
        .collect()
}

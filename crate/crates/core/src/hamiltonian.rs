//! Linear part of the problem: free tridiagonal matrix, potential matrix
//! elements by quadrature, and the nonlinear weight integrals F^{(n,ℓ)}.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linearize::recommended_quadrature_order;
use crate::quadrature::{gauss_rule, QuadratureError, QuadratureRule};
use crate::specfun::{hyp2f1_terminating, ln_factorial, SpecFunError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HamiltonianError {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("potential is not finite at r = {r}")]
    NonFinite { r: f64 },
    #[error("F weight overflows at indices ({i}, {j})")]
    IndexLimit { i: usize, j: usize },
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// One linear piece V(r) = intercept + slope·r on [start, end).
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub intercept: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    /// V(r) = strength · r^power · e^{−decay·r}.
    PowerExponential { strength: f64, power: f64, decay: f64 },
    /// Contiguous linear pieces; zero outside them.
    PiecewiseLinear { segments: Vec<Segment> },
    /// Linear interpolation of samples; flat below the first radius and
    /// zero beyond the last.
    Tabulated { r: Vec<f64>, v: Vec<f64> },
}

impl Potential {
    pub fn validate(&self) -> Result<(), HamiltonianError> {
        let bad = |m: &str| Err(HamiltonianError::InvalidPotential(m.to_string()));
        match self {
            Potential::PowerExponential { strength, power, decay } => {
                if !(strength.is_finite() && power.is_finite() && decay.is_finite()) {
                    return bad("parameters must be finite");
                }
                if *power < 0.0 {
                    return bad("power must be nonnegative so that V is finite at the origin");
                }
                if *decay <= 0.0 {
                    return bad("decay must be positive for a short-range potential");
                }
            }
            Potential::PiecewiseLinear { segments } => {
                if segments.is_empty() {
                    return bad("at least one segment is required");
                }
                if segments[0].start < 0.0 {
                    return bad("first segment starts below r = 0");
                }
                for (i, s) in segments.iter().enumerate() {
                    if ![s.start, s.end, s.intercept, s.slope].iter().all(|x| x.is_finite()) {
                        return bad("segment values must be finite");
                    }
                    if s.end <= s.start {
                        return bad(&format!("segment {i} has end ≤ start"));
                    }
                    if i > 0 && (s.start - segments[i - 1].end).abs() > 1e-12 {
                        return bad(&format!("segment {i} does not start where segment {} ends", i - 1));
                    }
                }
            }
            Potential::Tabulated { r, v } => {
                if r.len() < 2 || r.len() != v.len() {
                    return bad("table needs at least two (r, V) pairs of equal length");
                }
                if r[0] < 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("table radii must be nonnegative and strictly increasing");
                }
                if !r.iter().chain(v.iter()).all(|x| x.is_finite()) {
                    return bad("table values must be finite");
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Potential::PowerExponential { strength, power, decay } => {
                if *power == 0.0 {
                    strength * (-decay * r).exp()
                } else {
                    strength * r.powf(*power) * (-decay * r).exp()
                }
            }
            Potential::PiecewiseLinear { segments } => {
                segments.iter().find(|s| r >= s.start && r < s.end).map_or(0.0, |s| s.intercept + s.slope * r)
            }
            Potential::Tabulated { r: rs, v } => {
                if r <= rs[0] {
                    return v[0];
                }
                if r > rs[rs.len() - 1] {
                    return 0.0;
                }
                let i = rs.partition_point(|&x| x < r).max(1);
                let t = (r - rs[i - 1]) / (rs[i] - rs[i - 1]);
                v[i - 1] + t * (v[i] - v[i - 1])
            }
        }
    }

    /// Short human-readable identifier.
    pub fn id(&self) -> String {
        match self {
            Potential::PowerExponential { strength, power, decay } => {
                format!("{strength}*r^{power}*exp(-{decay}*r)")
            }
            Potential::PiecewiseLinear { segments } => format!("piecewise-linear[{}]", segments.len()),
            Potential::Tabulated { r, .. } => format!("tabulated[{}]", r.len()),
        }
    }
}

/// a_k = (λ²/2)(2k+ℓ+1), b_k = (λ²/2)sqrt((k+1)(k+ℓ+1)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeMatrixCoeffs {
    pub lambda: f64,
    pub ell: usize,
}

impl FreeMatrixCoeffs {
    pub fn new(lambda: f64, ell: usize) -> Self {
        Self { lambda, ell }
    }

    pub fn a(&self, k: usize) -> f64 {
        0.5 * self.lambda * self.lambda * crate::specfun::eta(k, self.ell)
    }

    pub fn b(&self, k: usize) -> f64 {
        0.5 * self.lambda * self.lambda * crate::specfun::sigma(k, self.ell)
    }

    /// N×N block of K with plus-signed off-diagonals.
    pub fn matrix(&self, size: usize) -> DMatrix<f64> {
        DMatrix::from_fn(size, size, |i, j| {
            if i == j {
                self.a(i)
            } else if j == i + 1 {
                self.b(i)
            } else if i == j + 1 {
                self.b(j)
            } else {
                0.0
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct LinearHamiltonian {
    pub matrix: DMatrix<f64>,
    pub lambda: f64,
    pub size: usize,
    pub ell: usize,
    pub potential_id: String,
}

/// Λ W Λᵀ restricted to its leading dim × dim block, W = diag V(√ξ_l/λ).
pub fn potential_matrix(v: &Potential, lambda: f64, rule: &QuadratureRule, dim: usize) -> Result<DMatrix<f64>, HamiltonianError> {
    potential_matrix_fn(|r| v.eval(r), lambda, rule, dim)
}

/// As [`potential_matrix`] for an arbitrary radial function.
pub fn potential_matrix_fn(
    v: impl Fn(f64) -> f64,
    lambda: f64,
    rule: &QuadratureRule,
    dim: usize,
) -> Result<DMatrix<f64>, HamiltonianError> {
    for &x in &rule.nodes {
        let r = x.sqrt() / lambda;
        if !v(r).is_finite() {
            return Err(HamiltonianError::NonFinite { r });
        }
    }
    Ok(rule.weighted_matrix(dim, |x| v(x.sqrt() / lambda)))
}

/// Closed-form F^{(n,ℓ)}_{i,j} = (1/ℓ!)∫ x^{(n+1)ℓ} e^{−(n+1)x} L̃_i L̃_j dx.
pub fn f_weight_analytic(n: usize, ell: usize, i: usize, j: usize) -> Result<f64, HamiltonianError> {
    let s = (n + 1) as f64;
    let sl = (n + 1) * ell;
    let ln_s = s.ln();
    let pre = 0.5 * (ln_factorial(i) + ln_factorial(j) + ln_factorial(i + ell) + ln_factorial(j + ell)) - (sl as f64 + 1.0) * ln_s;
    let mut sum = 0.0;
    for k in 0..=i.min(j) {
        let ln_mag = pre - 2.0 * k as f64 * ln_s - 2.0 * ln_factorial(ell + k) + ln_factorial(k + sl)
            - ln_factorial(k)
            - ln_factorial(i - k)
            - ln_factorial(j - k);
        let fi = hyp2f1_terminating(k as i64 - i as i64, (k + sl + 1) as f64, (k + ell + 1) as f64, 1.0 / s)?;
        let fj = hyp2f1_terminating(k as i64 - j as i64, (k + sl + 1) as f64, (k + ell + 1) as f64, 1.0 / s)?;
        sum += ln_mag.exp() * fi * fj;
    }
    if !sum.is_finite() {
        return Err(HamiltonianError::IndexLimit { i, j });
    }
    Ok(sum)
}

/// Σ_l Λ_{i,l} ξ_l^{nℓ} e^{−nξ_l} Λ_{j,l}.
pub fn f_weight_quadrature(n: usize, ell: usize, i: usize, j: usize, rule: &QuadratureRule) -> f64 {
    crate::quadrature::integrate_weighted(|x| x.powi((n * ell) as i32) * (-(n as f64) * x).exp(), rule, i, j)
}

/// H = K + ΛWΛᵀ on the leading N×N block.
pub fn assemble_linear(
    lambda: f64,
    ell: usize,
    size: usize,
    v: &Potential,
    rule: &QuadratureRule,
) -> Result<LinearHamiltonian, HamiltonianError> {
    if rule.ell != ell {
        return Err(HamiltonianError::InvalidPotential(format!("rule built for ℓ = {}, requested ℓ = {ell}", rule.ell)));
    }
    v.validate()?;
    let k = FreeMatrixCoeffs::new(lambda, ell).matrix(size);
    let p = potential_matrix(v, lambda, rule, size)?;
    Ok(LinearHamiltonian { matrix: k + p, lambda, size, ell, potential_id: v.id() })
}

/// One (λ, N) cell of the stability scan.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub lambda: f64,
    pub size: usize,
    pub quad_order: usize,
    /// Euclidean norm of diag(ΛWΛᵀ).
    pub pot_diag_norm: f64,
    /// |(ΛWΛᵀ)_{N−1,N−1}| relative to the largest diagonal entry.
    pub pot_edge: f64,
    /// Relative change of diag(ΛWΛᵀ) between rule orders Q and 2Q.
    pub pot_drift: f64,
    pub f_diag_norm: f64,
    /// F_{N−1,N−1} / F_{0,0}.
    pub f_edge: f64,
    /// Relative deviation of the quadrature F diagonal from the closed form.
    pub f_drift: f64,
    pub plateau: bool,
}

fn relative_drift(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Diagonal diagnostics of ΛWΛᵀ and F^{(n,ℓ)} over a (λ, N) grid. The rule
/// order for each N is max(min_order, recommended bound); a cell is on the
/// plateau when both drifts fall below `threshold`.
pub fn stability_scan(
    n: usize,
    ell: usize,
    v: &Potential,
    lambdas: &[f64],
    sizes: &[usize],
    min_order: usize,
    threshold: f64,
) -> Result<Vec<StabilityRow>, HamiltonianError> {
    v.validate()?;
    let mut rows = Vec::new();
    for &size in sizes {
        let q = min_order.max(recommended_quadrature_order(n, size));
        let rule = gauss_rule(q, ell)?;
        let rule2 = gauss_rule(2 * q, ell)?;
        let f_an = (0..size).map(|k| f_weight_analytic(n, ell, k, k)).collect::<Result<Vec<_>, _>>()?;
        let f_q: Vec<f64> = (0..size).map(|k| f_weight_quadrature(n, ell, k, k, &rule)).collect();
        let f_drift = relative_drift(&f_q, &f_an);
        let f_diag_norm = f_an.iter().map(|x| x * x).sum::<f64>().sqrt();
        let f_edge = f_an[size - 1] / f_an[0];
        for &lambda in lambdas {
            let p = potential_matrix(v, lambda, &rule, size)?;
            let p2 = potential_matrix(v, lambda, &rule2, size)?;
            let d: Vec<f64> = (0..size).map(|k| p[(k, k)]).collect();
            let d2: Vec<f64> = (0..size).map(|k| p2[(k, k)]).collect();
            let pot_drift = relative_drift(&d, &d2);
            let dmax = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            rows.push(StabilityRow {
                lambda,
                size,
                quad_order: q,
                pot_diag_norm: d.iter().map(|x| x * x).sum::<f64>().sqrt(),
                pot_edge: if dmax > 0.0 { d[size - 1].abs() / dmax } else { 0.0 },
                pot_drift,
                f_diag_norm,
                f_edge,
                f_drift,
                plateau: pot_drift < threshold && f_drift < threshold,
            });
        }
    }
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.size.cmp(&b.size)));
    Ok(rows)
}

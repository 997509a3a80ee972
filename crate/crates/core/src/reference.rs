//! Sine-like and cosine-like solutions of the free three-term recursion,
//! in the oscillator basis and in the Laguerre basis, together with their
//! position-space reconstructions.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::hamiltonian::FreeMatrixCoeffs;
use crate::specfun::{
    bessel_jy, eta, gegenbauer, gegenbauer_associated, hyp2f1_series, laguerre_associated_normalized, laguerre_normalized,
    laguerre_normalized_all, ln_factorial, ln_gamma, re_upper_gamma_neg, sigma, SpecFunError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReferenceError {
    #[error("energy must be positive and finite, got {0}")]
    NonPositiveEnergy(f64),
    #[error("scale λ must be positive and finite, got {0}")]
    BadScale(f64),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// Energy-derived quantities for a fixed scale λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPoint {
    pub energy: f64,
    pub lambda: f64,
    /// κ = √(2E).
    pub kappa: f64,
    /// μ = κ/λ.
    pub mu: f64,
    /// z = μ².
    pub z: f64,
    pub cos_theta: f64,
    pub sin_theta: f64,
}

impl EnergyPoint {
    pub fn new(energy: f64, lambda: f64) -> Result<Self, ReferenceError> {
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(ReferenceError::NonPositiveEnergy(energy));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(ReferenceError::BadScale(lambda));
        }
        let kappa = (2.0 * energy).sqrt();
        let mu = kappa / lambda;
        let z = mu * mu;
        let den = z + 0.25;
        Ok(Self { energy, lambda, kappa, mu, z, cos_theta: (z - 0.25) / den, sin_theta: mu / den })
    }
}

/// s_k and c_k for k = 0..=N.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCoefficients {
    pub s: Vec<f64>,
    pub c: Vec<f64>,
}

impl ReferenceCoefficients {
    /// c_k + i s_k.
    pub fn h_plus(&self, k: usize) -> Complex64 {
        Complex64::new(self.c[k], self.s[k])
    }

    /// c_k − i s_k.
    pub fn h_minus(&self, k: usize) -> Complex64 {
        Complex64::new(self.c[k], -self.s[k])
    }
}

/// α(E) = sqrt(2/(λℓ!)) μ^{ℓ+½} e^{−μ²/2}.
fn alpha(e: &EnergyPoint, ell: usize) -> f64 {
    (2.0 / e.lambda).sqrt() * (-0.5 * ln_factorial(ell) + (ell as f64 + 0.5) * e.mu.ln() - 0.5 * e.z).exp()
}

pub fn sine_like(e: &EnergyPoint, ell: usize, k: usize) -> f64 {
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * alpha(e, ell) * laguerre_normalized(k, ell, e.z)
}

/// s_0, …, s_{len−1}.
pub fn sine_like_all(e: &EnergyPoint, ell: usize, len: usize) -> Vec<f64> {
    let a = alpha(e, ell);
    laguerre_normalized_all(len, ell, e.z).into_iter().enumerate().map(|(k, v)| if k % 2 == 0 { a * v } else { -a * v }).collect()
}

/// (c_0, τ).
pub fn cosine_like_seed(e: &EnergyPoint, ell: usize) -> Result<(f64, f64), ReferenceError> {
    let l = ell as f64;
    let sign = if ell.is_multiple_of(2) { -1.0 } else { 1.0 };
    let lf = ln_factorial(ell);
    let pref = (2.0 / e.lambda).sqrt() * (0.5 * lf + (l + 0.5) * e.mu.ln() - 0.5 * e.z).exp();
    let c0 = sign / PI * pref * re_upper_gamma_neg(ell, e.z)?;
    let tau = -(e.lambda / PI) * (0.5 * e.lambda).sqrt() * (0.5 * lf + (0.5 - l) * e.mu.ln() + 0.5 * e.z).exp();
    Ok((c0, tau))
}

/// c_0, …, c_{len−1} by the seeded forward recursion.
pub fn cosine_like_all(e: &EnergyPoint, ell: usize, len: usize) -> Result<Vec<f64>, ReferenceError> {
    let (c0, tau) = cosine_like_seed(e, ell)?;
    let f = FreeMatrixCoeffs::new(e.lambda, ell);
    let mut c = Vec::with_capacity(len);
    if len == 0 {
        return Ok(c);
    }
    c.push(c0);
    if len > 1 {
        c.push(((e.energy - f.a(0)) * c0 + tau) / f.b(0));
    }
    for k in 1..len.saturating_sub(1) {
        c.push(((e.energy - f.a(k)) * c[k] - f.b(k - 1) * c[k - 1]) / f.b(k));
    }
    Ok(c)
}

/// Closed form c_k = c_0 (−1)^k L̃_k(z) + (τ/b_0) p^{(1)}_{k−1}(z), with
/// p^{(1)} from [`laguerre_associated_normalized`].
pub fn cosine_like_closed_form(e: &EnergyPoint, ell: usize, k: usize) -> Result<f64, ReferenceError> {
    let (c0, tau) = cosine_like_seed(e, ell)?;
    let b0 = FreeMatrixCoeffs::new(e.lambda, ell).b(0);
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(c0 * sign * laguerre_normalized(k, ell, e.z) + tau / b0 * laguerre_associated_normalized(k as i64 - 1, ell, e.z))
}

/// Oscillator-basis reference coefficients for k = 0..=size.
pub fn oscillator_reference(e: &EnergyPoint, ell: usize, size: usize) -> Result<ReferenceCoefficients, ReferenceError> {
    Ok(ReferenceCoefficients { s: sine_like_all(e, ell, size + 1), c: cosine_like_all(e, ell, size + 1)? })
}

/// Laguerre-basis reference coefficients for k = 0..len−1.
pub fn laguerre_basis_reference(e: &EnergyPoint, ell: usize, len: usize) -> Result<ReferenceCoefficients, ReferenceError> {
    let l = ell as f64;
    let nu = l + 0.5;
    let (ct, st) = (e.cos_theta, e.sin_theta);
    let sin_pow = st.powf(nu);
    let s_pref = (l * 2f64.ln() + ln_gamma(nu)).exp() / (PI * e.lambda).sqrt() * sin_pow;
    let c_pref = (((l + 1.0) * 2f64.ln() + ln_factorial(ell)).exp()) / (PI * e.lambda.sqrt()) * sin_pow;
    let f = hyp2f1_series(ell, ct * ct)?;
    let sin_m2l = st.powi(-2 * ell as i32);
    let mut s = Vec::with_capacity(len);
    let mut c = Vec::with_capacity(len);
    for k in 0..len {
        let ratio = (0.5 * (ln_factorial(k) - ln_factorial(k + 2 * ell))).exp();
        let g = gegenbauer(k as i64, nu, ct);
        s.push(s_pref * ratio * g);
        c.push(c_pref * ratio * (ct * f * g - sin_m2l * gegenbauer_associated(k as i64 - 1, nu, ct)));
    }
    Ok(ReferenceCoefficients { s, c })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// φ_k(r) = sqrt(2λ/ℓ!)(λr)^{ℓ+½}e^{−λ²r²/2}L̃_k^ℓ(λ²r²).
    Oscillator,
    /// φ_k(r) = sqrt(λ/(2ℓ)!)(λr)^{ℓ+½}e^{−λr/2}L̃_k^{2ℓ}(λr).
    Laguerre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Summation {
    /// Plain truncated sum.
    Partial,
    /// Smooth C^∞ roll-off of the upper half of the coefficients.
    Tapered,
}

/// Taper weights: 1 on the lower half, smoothly decreasing to 0 at the last
/// index.
pub fn taper_weights(len: usize) -> Vec<f64> {
    let f = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
    let start = len as f64 / 2.0;
    let span = (len as f64 - 1.0 - start).max(1.0);
    (0..len)
        .map(|k| {
            let t = ((k as f64 - start) / span).clamp(0.0, 1.0);
            let (a, b) = (f(1.0 - t), f(t));
            a / (a + b)
        })
        .collect()
}

/// φ_0(r)..φ_{len−1}(r) with a running log scale so that neither the
/// Gaussian/exponential factor nor the polynomials leave the f64 range.
fn basis_values(basis: Basis, lambda: f64, ell: usize, len: usize, r: f64) -> Vec<f64> {
    if r <= 0.0 {
        return vec![0.0; len];
    }
    let (order, x, mut log_scale) = match basis {
        Basis::Oscillator => {
            let x = lambda * lambda * r * r;
            let ls = 0.5 * (2.0 * lambda).ln() - 0.5 * ln_factorial(ell) + (ell as f64 + 0.5) * (lambda * r).ln() - 0.5 * x;
            (ell, x, ls)
        }
        Basis::Laguerre => {
            let x = lambda * r;
            let ls = 0.5 * lambda.ln() - 0.5 * ln_factorial(2 * ell) + (ell as f64 + 0.5) * x.ln() - 0.5 * x;
            (2 * ell, x, ls)
        }
    };
    let mut out = Vec::with_capacity(len);
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..len {
        out.push(cur * log_scale.exp());
        let back = if k > 0 { sigma(k - 1, order) * prev } else { 0.0 };
        let next = ((eta(k, order) - x) * cur - back) / sigma(k, order);
        prev = cur;
        cur = next;
        let m = cur.abs().max(prev.abs());
        if m > 1e100 || (m < 1e-100 && m > 0.0) {
            let shift = m.ln();
            prev /= m;
            cur /= m;
            log_scale += shift;
        }
    }
    out
}

/// χ(r) = Σ_k w_k a_k φ_k(r) on each grid point.
pub fn chi_reconstruct(coeffs: &[f64], basis: Basis, lambda: f64, ell: usize, r_grid: &[f64], summation: Summation) -> Vec<f64> {
    let weights = match summation {
        Summation::Partial => vec![1.0; coeffs.len()],
        Summation::Tapered => taper_weights(coeffs.len()),
    };
    r_grid
        .iter()
        .map(|&r| {
            basis_values(basis, lambda, ell, coeffs.len(), r).iter().zip(coeffs.iter().zip(&weights)).map(|(p, (a, w))| p * a * w).sum()
        })
        .collect()
}

/// Regular target √(κr)J_ℓ(κr).
pub fn chi_reg(kappa: f64, ell: usize, r: f64) -> Result<f64, SpecFunError> {
    if r <= 0.0 {
        return Ok(0.0);
    }
    let x = kappa * r;
    Ok(x.sqrt() * bessel_jy(ell, x)?.0)
}

/// Irregular target √(κr)Y_ℓ(κr); −∞ at r = 0 for ℓ ≥ 1.
pub fn chi_irr(kappa: f64, ell: usize, r: f64) -> Result<f64, SpecFunError> {
    if r <= 0.0 {
        return Ok(if ell == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    let x = kappa * r;
    Ok(x.sqrt() * bessel_jy(ell, x)?.1)
}

//! Special functions: normalized Laguerre polynomials and their associated
//! (shifted-recursion) companions, integer-order Bessel functions, the real
//! part of Γ(−ℓ, −u), Gauss hypergeometric sums and Gegenbauer polynomials.
//!
//! Polynomials are always evaluated by upward three-term recursion.

use std::f64::consts::PI;

use thiserror::Error;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Relative truncation tolerance for power series.
pub const SERIES_TOL: f64 = 1e-16;
/// Hard cap on the number of series terms.
pub const SERIES_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecFunError {
    #[error("{func}: argument {arg} is outside the domain")]
    Domain { func: &'static str, arg: f64 },
    #[error("{func}: series did not converge within {terms} terms")]
    NoConvergence { func: &'static str, terms: usize },
    #[error("hyp2f1: c + m = {value} is a nonpositive integer before termination")]
    Pole { value: f64 },
}

/// Diagonal coefficient η_k = 2k+ℓ+1 of the normalized Laguerre recursion.
#[inline]
pub fn eta(k: usize, l: usize) -> f64 {
    (2 * k + l + 1) as f64
}

/// Off-diagonal coefficient σ_k = sqrt((k+1)(k+ℓ+1)).
#[inline]
pub fn sigma(k: usize, l: usize) -> f64 {
    (((k + 1) * (k + l + 1)) as f64).sqrt()
}

/// L̃_k^ℓ(x) = sqrt(k! ℓ!/(k+ℓ)!) L_k^ℓ(x).
pub fn laguerre_normalized(k: usize, l: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..k {
        let next = ((eta(j, l) - x) * cur - if j > 0 { sigma(j - 1, l) * prev } else { 0.0 }) / sigma(j, l);
        prev = cur;
        cur = next;
    }
    cur
}

/// L̃_0^ℓ(x), …, L̃_{n−1}^ℓ(x).
pub fn laguerre_normalized_all(n: usize, l: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(1.0);
    for j in 0..n.saturating_sub(1) {
        let back = if j > 0 { sigma(j - 1, l) * out[j - 1] } else { 0.0 };
        out.push(((eta(j, l) - x) * out[j] - back) / sigma(j, l));
    }
    out
}

/// Associated polynomial of the normalized Laguerre recursion with the
/// coefficients shifted by one: p_{−1} = 0, p_0 = 1, p_1 = (x−η_1)/σ_1,
/// σ_{k+1} p_{k+1} = (x−η_{k+1}) p_k − σ_k p_{k−1}.
pub fn laguerre_associated_normalized(k: i64, l: usize, x: f64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..k as usize {
        let next = ((x - eta(j + 1, l)) * cur - sigma(j, l) * prev) / sigma(j + 1, l);
        prev = cur;
        cur = next;
    }
    cur
}

fn bessel_j_series(n: usize, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = 1.0;
    for j in 1..=n {
        term *= h / j as f64;
    }
    let mut sum = term;
    let q = -h * h;
    for m in 1..SERIES_CAP {
        term *= q / (m as f64 * (m + n) as f64);
        sum += term;
        if term.abs() <= SERIES_TOL * sum.abs() {
            break;
        }
    }
    sum
}

/// J_0(x), …, J_{nmax}(x) plus enough higher orders for Neumann sums.
fn bessel_j_table(nmax: usize, x: f64) -> Vec<f64> {
    let top = nmax.max(x.ceil() as usize);
    let start = {
        let m = top + 30 + (60.0 * top as f64).sqrt() as usize;
        m + (m % 2)
    };
    if x < 1.0 {
        return (0..=start).map(|n| bessel_j_series(n, x)).collect();
    }
    // Miller backward recurrence normalized by J_0 + 2ΣJ_{2k} = 1.
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = 2.0 * k as f64 / x * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            for v in vals.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    let norm: f64 = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).take(start / 2).sum::<f64>();
    vals.truncate(start + 1);
    for v in vals.iter_mut() {
        *v /= norm;
    }
    vals
}

/// Cylindrical Bessel function of the first kind J_n(x), x ≥ 0.
pub fn bessel_j(n: usize, x: f64) -> Result<f64, SpecFunError> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(SpecFunError::Domain { func: "bessel_j", arg: x });
    }
    if x == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    Ok(bessel_j_table(n, x)[n])
}

/// Y_0 and Y_1 from Neumann series over a J table.
fn bessel_y01(x: f64, j: &[f64]) -> (f64, f64) {
    let lg = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k + 1 < j.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = 2.0 / PI * lg * j[0] - 4.0 / PI * s0;
    let y1 = -2.0 / PI * j[0] / x + 2.0 / PI * lg * j[1] + 2.0 / PI * s1;
    (y0, y1)
}

/// Cylindrical Bessel function of the second kind Y_n(x), x > 0.
pub fn bessel_y(n: usize, x: f64) -> Result<f64, SpecFunError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecFunError::Domain { func: "bessel_y", arg: x });
    }
    let j = bessel_j_table(n.max(1), x);
    let (y0, y1) = bessel_y01(x, &j);
    if n == 0 {
        return Ok(y0);
    }
    let (mut prev, mut cur) = (y0, y1);
    for k in 1..n {
        let next = 2.0 * k as f64 / x * cur - prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Both J_n(x) and Y_n(x) from one table evaluation.
pub fn bessel_jy(n: usize, x: f64) -> Result<(f64, f64), SpecFunError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecFunError::Domain { func: "bessel_jy", arg: x });
    }
    let j = bessel_j_table(n.max(1), x);
    let (y0, y1) = bessel_y01(x, &j);
    let y = if n == 0 {
        y0
    } else {
        let (mut prev, mut cur) = (y0, y1);
        for k in 1..n {
            let next = 2.0 * k as f64 / x * cur - prev;
            prev = cur;
            cur = next;
        }
        cur
    };
    Ok((j[n], y))
}

/// Exponential integral Ei(u) for u > 0 by its power series.
pub fn expint_ei(u: f64) -> Result<f64, SpecFunError> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(SpecFunError::Domain { func: "expint_ei", arg: u });
    }
    let mut term = 1.0;
    let mut sum = 0.0;
    for m in 1..SERIES_CAP {
        term *= u / m as f64;
        let add = term / m as f64;
        sum += add;
        if add <= SERIES_TOL * sum {
            return Ok(EULER_GAMMA + u.ln() + sum);
        }
    }
    Err(SpecFunError::NoConvergence { func: "expint_ei", terms: SERIES_CAP })
}

/// Re Γ(−ℓ, −u) for u > 0.
///
/// Γ(0, −u) contributes −Ei(u) to the real part; the finite sum is real.
pub fn re_upper_gamma_neg(l: usize, u: f64) -> Result<f64, SpecFunError> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(SpecFunError::Domain { func: "re_upper_gamma_neg", arg: u });
    }
    let re_gamma0 = -expint_ei(u)?;
    if l == 0 {
        return Ok(re_gamma0);
    }
    // Σ_{m<ℓ} (ℓ−m−1)! u^{m−ℓ}, from m = ℓ−1 downward
    let mut finite = 0.0;
    let mut fact = 1.0;
    let mut upow = 1.0 / u;
    for m in (0..l).rev() {
        finite += fact * upow;
        fact *= (l - m) as f64;
        upow /= u;
    }
    let sign_l = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut l_fact = 1.0;
    for j in 2..=l {
        l_fact *= j as f64;
    }
    Ok((u.exp() * sign_l * finite + sign_l * re_gamma0) / l_fact)
}

/// ₂F₁(a, b; c; x) for a = 0, −1, −2, … as a finite sum.
pub fn hyp2f1_terminating(a: i64, b: f64, c: f64, x: f64) -> Result<f64, SpecFunError> {
    if a > 0 {
        return Err(SpecFunError::Domain { func: "hyp2f1_terminating", arg: a as f64 });
    }
    let k = (-a) as usize;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 0..k {
        let cm = c + m as f64;
        if cm <= 0.0 && cm.fract() == 0.0 {
            return Err(SpecFunError::Pole { value: cm });
        }
        term *= (a as f64 + m as f64) * (b + m as f64) / (cm * (m + 1) as f64) * x;
        sum += term;
    }
    Ok(sum)
}

/// ₂F₁(½, ℓ+1; 3/2; x) for 0 ≤ x < 1 − 10⁻⁸ by the Gauss series.
pub fn hyp2f1_series(l: usize, x: f64) -> Result<f64, SpecFunError> {
    if !(x >= 0.0) || x >= 1.0 - 1e-8 {
        return Err(SpecFunError::Domain { func: "hyp2f1_series", arg: x });
    }
    let b = (l + 1) as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 0..SERIES_CAP {
        let mf = m as f64;
        term *= (0.5 + mf) * (b + mf) / ((1.5 + mf) * (mf + 1.0)) * x;
        sum += term;
        if term.abs() <= 1e-14 * sum.abs() {
            return Ok(sum);
        }
    }
    Err(SpecFunError::NoConvergence { func: "hyp2f1_series", terms: SERIES_CAP })
}

/// Gegenbauer C_k^ν(x); C_{−1} = 0.
pub fn gegenbauer(k: i64, nu: f64, x: f64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..k as usize {
        let jf = j as f64;
        let next = (2.0 * (jf + nu) * x * cur - (jf + 2.0 * nu - 1.0) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Associated Gegenbauer 𝒞_k^ν(x):
/// 2(k+ν+1)x 𝒞_k = (k+2)𝒞_{k+1} + (k+2ν)𝒞_{k−1}, 𝒞_{−1} = 0, 𝒞_0 = 1.
pub fn gegenbauer_associated(k: i64, nu: f64, x: f64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..k as usize {
        let jf = j as f64;
        let next = (2.0 * (jf + nu + 1.0) * x * cur - (jf + 2.0 * nu) * prev) / (jf + 2.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// ln(k!) exactly summed for small k, through ln Γ beyond.
pub fn ln_factorial(k: usize) -> f64 {
    if k < 32 {
        (2..=k).map(|j| (j as f64).ln()).sum()
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

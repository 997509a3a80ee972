#![allow(dead_code)]

/// Composite Simpson on [a, b] with `n` (even) panels, Richardson-extrapolated
/// against the half-resolution rule.
pub fn simpson_extrapolated(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let s = |m: usize| {
        let h = (b - a) / m as f64;
        let mut acc = f(a) + f(b);
        for i in 1..m {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        acc * h / 3.0
    };
    let fine = s(n);
    let coarse = s(n / 2);
    fine + (fine - coarse) / 15.0
}

/// Periodic trapezoid on [0, 2π) with `m` points.
pub fn periodic_trapezoid(f: impl Fn(f64) -> f64, m: usize) -> f64 {
    let h = 2.0 * std::f64::consts::PI / m as f64;
    (0..m).map(|i| f(i as f64 * h)).sum::<f64>() * h
}

/// Ramanujan's series for Ei(x), x > 0.
pub fn ei_ramanujan(x: f64) -> f64 {
    let gamma = 0.577_215_664_901_532_9;
    let mut sum = 0.0;
    let mut inner = 0.0;
    let mut term = 1.0;
    for n in 1..400 {
        term *= x / n as f64;
        if (n - 1) % 2 == 0 {
            inner += 1.0 / n as f64;
        }
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        let t = sign * term / 2f64.powi(n as i32 - 1) * inner;
        sum += t;
        if t.abs() < 1e-18 * sum.abs() && n > 2 * x as usize {
            break;
        }
    }
    gamma + x.ln() + (x / 2.0).exp() * sum
}

/// Explicit L_k^α(x) = Σ_m (−1)^m C(k+α, k−m) x^m / m!, unnormalized.
pub fn laguerre_explicit(k: usize, alpha: usize, x: f64) -> f64 {
    let mut sum = 0.0;
    for m in 0..=k {
        let mut binom = 1.0;
        for i in 0..(k - m) {
            binom *= (k + alpha - i) as f64 / (i + 1) as f64;
        }
        let mut xm = 1.0;
        for i in 1..=m {
            xm *= x / i as f64;
        }
        sum += if m % 2 == 0 { 1.0 } else { -1.0 } * binom * xm;
    }
    sum
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

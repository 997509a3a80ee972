//! Gauss rules for the normalized weight x^ℓ e^{−x}/ℓ! built from the
//! Jacobi matrix of the normalized Laguerre recursion.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::specfun::{eta, laguerre_normalized_all, sigma};

const QL_MAX_ITER: usize = 60;
const RESCALE: f64 = 1e150;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("tridiagonal eigensolver exceeded {0} iterations")]
    NoConvergence(usize),
    #[error("degree {k} is not below the rule order {order}")]
    DegreeTooHigh { k: usize, order: usize },
    #[error("rule order must be at least 1")]
    EmptyRule,
}

/// Symmetric tridiagonal matrix with diagonal 2k+ℓ+1 and off-diagonal
/// −sqrt((k+1)(k+ℓ+1)).
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiMatrix {
    pub ell: usize,
    pub diag: Vec<f64>,
    /// Length N−1; entry k couples rows k and k+1.
    pub offdiag: Vec<f64>,
}

impl JacobiMatrix {
    pub fn order(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.order();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = self.diag[k];
        }
        for (k, o) in self.offdiag.iter().enumerate() {
            m[(k, k + 1)] = *o;
            m[(k + 1, k)] = *o;
        }
        m
    }

    /// Infinity norm.
    pub fn norm(&self) -> f64 {
        (0..self.order())
            .map(|k| {
                let left = if k > 0 { self.offdiag[k - 1].abs() } else { 0.0 };
                let right = self.offdiag.get(k).map_or(0.0, |o| o.abs());
                self.diag[k].abs() + left + right
            })
            .fold(0.0, f64::max)
    }
}

pub fn build_jacobi(order: usize, ell: usize) -> JacobiMatrix {
    JacobiMatrix {
        ell,
        diag: (0..order).map(|k| eta(k, ell)).collect(),
        offdiag: (0..order.saturating_sub(1)).map(|k| -sigma(k, ell)).collect(),
    }
}

/// Eigenvalues (ascending) and optionally eigenvectors (columns) of a
/// symmetric tridiagonal matrix by implicit-shift QL.
pub fn tridiagonal_eigen(diag: &[f64], offdiag: &[f64], want_vectors: bool) -> Result<(Vec<f64>, Option<DMatrix<f64>>), QuadratureError> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&offdiag[..n.saturating_sub(1)]);
    let mut z = want_vectors.then(|| DMatrix::<f64>::identity(n, n));

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITER {
                return Err(QuadratureError::NoConvergence(QL_MAX_ITER));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_mut() {
                    for k in 0..n {
                        let f = z[(k, i + 1)];
                        z[(k, i + 1)] = s * z[(k, i)] + c * f;
                        z[(k, i)] = c * z[(k, i)] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = idx.iter().map(|&i| d[i]).collect();
    let vectors = z.map(|z| DMatrix::from_fn(n, n, |r, c| z[(r, idx[c])]));
    Ok((values, vectors))
}

/// Gauss rule of order Q: nodes ξ_l and the orthogonal eigenvector matrix
/// Λ whose column l belongs to ξ_l, with Λ_{0,l} > 0.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub ell: usize,
    pub nodes: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Gauss weights Λ_{0,l}².
    pub fn weights(&self) -> Vec<f64> {
        self.vectors.row(0).iter().map(|v| v * v).collect()
    }

    /// Table of L̃_k(ξ_l) for k < rows, as a rows × Q matrix.
    pub fn laguerre_table(&self, rows: usize) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(rows, self.order());
        for (l, &x) in self.nodes.iter().enumerate() {
            for (k, v) in laguerre_normalized_all(rows, self.ell, x).into_iter().enumerate() {
                t[(k, l)] = v;
            }
        }
        t
    }

    /// Σ_l Λ_{i,l} f(ξ_l) Λ_{j,l} for all i, j < dim.
    pub fn weighted_matrix(&self, dim: usize, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let q = self.order();
        let lam = self.vectors.rows(0, dim);
        let mut scaled = lam.clone_owned();
        for l in 0..q {
            let w = f(self.nodes[l]);
            scaled.column_mut(l).scale_mut(w);
        }
        let m = &scaled * lam.transpose();
        (&m + m.transpose()) * 0.5
    }
}

/// Value and derivative of L̃_N at x, up to a common positive scale.
fn last_poly_and_derivative(j: &JacobiMatrix, x: f64) -> (f64, f64) {
    let l = j.ell;
    let (mut p_prev, mut p) = (0.0, 1.0);
    let (mut d_prev, mut d) = (0.0, 0.0);
    for k in 0..j.order() {
        let back = if k > 0 { sigma(k - 1, l) } else { 0.0 };
        let p_next = ((eta(k, l) - x) * p - back * p_prev) / sigma(k, l);
        let d_next = ((eta(k, l) - x) * d - p - back * d_prev) / sigma(k, l);
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
        let big = p.abs().max(d.abs());
        if big > RESCALE {
            let s = 1.0 / RESCALE;
            p *= s;
            p_prev *= s;
            d *= s;
            d_prev *= s;
        }
    }
    (p, d)
}

/// Normalized eigenvector of J at an eigenvalue, built by the recursion
/// with running rescaling.
fn recursion_vector(j: &JacobiMatrix, x: f64) -> Vec<f64> {
    let n = j.order();
    let l = j.ell;
    let mut v = Vec::with_capacity(n);
    v.push(1.0);
    for k in 0..n - 1 {
        let back = if k > 0 { sigma(k - 1, l) * v[k - 1] } else { 0.0 };
        let next = ((eta(k, l) - x) * v[k] - back) / sigma(k, l);
        v.push(next);
        if next.abs() > RESCALE {
            for e in v.iter_mut() {
                *e /= RESCALE;
            }
        }
    }
    let norm = v.iter().map(|e| e * e).sum::<f64>().sqrt();
    v.iter().map(|e| e / norm).collect()
}

/// Nodes by implicit QL, polished by Newton on L̃_N; eigenvectors by the
/// normalized recursion, which fixes Λ_{0,l} > 0.
pub fn eigendecompose(j: &JacobiMatrix) -> Result<QuadratureRule, QuadratureError> {
    let n = j.order();
    if n == 0 {
        return Err(QuadratureError::EmptyRule);
    }
    let (mut nodes, _) = tridiagonal_eigen(&j.diag, &j.offdiag, false)?;
    for i in 0..n {
        let gap = [i.checked_sub(1).map(|p| nodes[i] - nodes[p]), nodes.get(i + 1).map(|x| x - nodes[i])]
            .into_iter()
            .flatten()
            .fold(f64::INFINITY, f64::min);
        let mut x = nodes[i];
        for _ in 0..3 {
            let (p, d) = last_poly_and_derivative(j, x);
            if d == 0.0 || !p.is_finite() || !d.is_finite() {
                break;
            }
            let step = p / d;
            if !(step.abs() < 0.1 * gap.min(x.abs().max(1.0))) {
                break;
            }
            x -= step;
            if step.abs() <= 2.0 * f64::EPSILON * x.abs() {
                break;
            }
        }
        nodes[i] = x;
    }
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &x) in nodes.iter().enumerate() {
        for (r, v) in recursion_vector(j, x).into_iter().enumerate() {
            vectors[(r, c)] = v;
        }
    }
    Ok(QuadratureRule { ell: j.ell, nodes, vectors })
}

/// Convenience: `eigendecompose(&build_jacobi(order, ell))`.
pub fn gauss_rule(order: usize, ell: usize) -> Result<QuadratureRule, QuadratureError> {
    eigendecompose(&build_jacobi(order, ell))
}

/// Σ_l Λ_{i,l} f(ξ_l) Λ_{j,l}.
pub fn integrate_weighted(f: impl Fn(f64) -> f64, rule: &QuadratureRule, i: usize, j: usize) -> f64 {
    (0..rule.order()).map(|l| rule.vectors[(i, l)] * f(rule.nodes[l]) * rule.vectors[(j, l)]).sum()
}

/// L̃_k(ξ_l) at every node, which equals Λ_{k,l}/Λ_{0,l} for k below the
/// rule order.
pub fn quadrature_values(k: usize, rule: &QuadratureRule) -> Result<Vec<f64>, QuadratureError> {
    if k >= rule.order() {
        return Err(QuadratureError::DegreeTooHigh { k, order: rule.order() });
    }
    Ok(rule.nodes.iter().map(|&x| laguerre_normalized_all(k + 1, rule.ell, x)[k]).collect())
}

//! Linearization tensors for products of normalized Laguerre polynomials.
//!
//! `DTensor` folds the nonlinear weight x^{nℓ}e^{−nx} into one quadrature
//! and is the tensor the solver consumes. `CTensor` holds the pure
//! linearization coefficients and is computed two independent ways.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::quadrature::{JacobiMatrix, QuadratureRule};
use crate::specfun::{eta, sigma};

const CACHE_MAGIC: &[u8; 8] = b"NLJMDTEN";
const CACHE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LinearizeError {
    #[error("quadrature order {got} is below the required {required}")]
    QuadratureTooSmall { required: usize, got: usize },
    #[error("rule is for ℓ = {got}, tensor requested for ℓ = {expected}")]
    EllMismatch { expected: usize, got: usize },
    #[error("cache file: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Smallest rule order for which the C-tensor quadrature is exact.
pub fn exact_quadrature_bound(n: usize, size: usize) -> usize {
    (n + 1) * size - n
}

/// Default rule order for the D tensor.
pub fn recommended_quadrature_order(n: usize, size: usize) -> usize {
    (n + 1) * (size - 1) + size
}

/// All nondecreasing tuples of the given length over 0..size, in
/// lexicographic order.
pub fn canonical_tuples(len: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if size == 0 {
        return out;
    }
    let mut cur = vec![0usize; len];
    loop {
        out.push(cur.clone());
        let mut pos = len;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if cur[pos] + 1 < size {
                let v = cur[pos] + 1;
                for c in cur.iter_mut().skip(pos) {
                    *c = v;
                }
                break;
            }
        }
    }
}

fn canonical(indices: &[usize]) -> Vec<usize> {
    let mut t = indices.to_vec();
    t.sort_unstable();
    t
}

/// D_{i,j}^{k_1..k_{2n}} stored as one N×N matrix per canonical upper tuple.
#[derive(Debug, Clone)]
pub struct DTensor {
    pub n: usize,
    pub ell: usize,
    pub size: usize,
    pub quad_order: usize,
    tuples: Vec<Vec<usize>>,
    matrices: Vec<DMatrix<f64>>,
    index: HashMap<Vec<usize>, usize>,
}

impl DTensor {
    fn from_parts(n: usize, ell: usize, size: usize, quad_order: usize, matrices: Vec<DMatrix<f64>>) -> Self {
        let tuples = canonical_tuples(2 * n, size);
        let index = tuples.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { n, ell, size, quad_order, tuples, matrices, index }
    }

    /// Matrix for any ordering of the upper indices.
    pub fn get(&self, upper: &[usize]) -> Option<&DMatrix<f64>> {
        self.index.get(&canonical(upper)).map(|&i| &self.matrices[i])
    }

    /// Canonical tuples paired with their matrices, in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&[usize], &DMatrix<f64>)> {
        self.tuples.iter().map(Vec::as_slice).zip(self.matrices.iter())
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Writes the versioned little-endian cache file.
    pub fn write_cache(&self, path: &Path) -> Result<(), LinearizeError> {
        let mut buf = Vec::with_capacity(40 + self.len() * self.size * self.size * 8);
        buf.extend_from_slice(CACHE_MAGIC);
        for v in [CACHE_VERSION, self.n as u32, self.ell as u32, self.size as u32, self.quad_order as u32] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for m in &self.matrices {
            for r in 0..self.size {
                for c in 0..self.size {
                    buf.extend_from_slice(&m[(r, c)].to_le_bytes());
                }
            }
        }
        std::fs::File::create(path)?.write_all(&buf)?;
        Ok(())
    }

    /// Reads a cache file, checking it was written for (n, ℓ, N, Q).
    pub fn read_cache(path: &Path, n: usize, ell: usize, size: usize, quad_order: usize) -> Result<Self, LinearizeError> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        if buf.len() < 36 || &buf[..8] != CACHE_MAGIC {
            return Err(LinearizeError::Cache("bad magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(buf[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
        if word(0) as u32 != CACHE_VERSION {
            return Err(LinearizeError::Cache(format!("unsupported version {}", word(0))));
        }
        let key = (word(1), word(2), word(3), word(4));
        if key != (n, ell, size, quad_order) {
            return Err(LinearizeError::Cache(format!("key {key:?} does not match ({n}, {ell}, {size}, {quad_order})")));
        }
        let count = u64::from_le_bytes(buf[28..36].try_into().unwrap()) as usize;
        let expected = canonical_tuples(2 * n, size).len();
        if count != expected || buf.len() != 36 + count * size * size * 8 {
            return Err(LinearizeError::Cache("truncated or inconsistent payload".into()));
        }
        let mut off = 36;
        let mut matrices = Vec::with_capacity(count);
        for _ in 0..count {
            let mut m = DMatrix::zeros(size, size);
            for r in 0..size {
                for c in 0..size {
                    m[(r, c)] = f64::from_le_bytes(buf[off..off + 8].try_into().unwrap());
                    off += 8;
                }
            }
            matrices.push(m);
        }
        Ok(Self::from_parts(n, ell, size, quad_order, matrices))
    }
}

fn nonlinear_weight(n: usize, ell: usize, x: f64) -> f64 {
    x.powi((n * ell) as i32) * (-(n as f64) * x).exp()
}

pub fn d_tensor(n: usize, ell: usize, size: usize, rule: &QuadratureRule) -> Result<DTensor, LinearizeError> {
    let q = rule.order();
    if q < size {
        return Err(LinearizeError::QuadratureTooSmall { required: size, got: q });
    }
    if rule.ell != ell {
        return Err(LinearizeError::EllMismatch { expected: ell, got: rule.ell });
    }
    let table = rule.laguerre_table(size);
    let base: Vec<f64> = rule.nodes.iter().map(|&x| nonlinear_weight(n, ell, x)).collect();
    let lam = rule.vectors.rows(0, size).clone_owned();
    let tuples = canonical_tuples(2 * n, size);
    let matrices = tuples
        .par_iter()
        .map(|t| {
            let mut scaled = lam.clone();
            for l in 0..q {
                let z = t.iter().fold(base[l], |acc, &k| acc * table[(k, l)]);
                scaled.column_mut(l).scale_mut(z);
            }
            let m = &scaled * lam.transpose();
            (&m + m.transpose()) * 0.5
        })
        .collect();
    Ok(DTensor::from_parts(n, ell, size, q, matrices))
}

/// Single entry D_{i,j}^{upper} from a rule and its Laguerre table.
pub fn d_entry(rule: &QuadratureRule, table: &DMatrix<f64>, n: usize, i: usize, j: usize, upper: &[usize]) -> f64 {
    (0..rule.order())
        .map(|l| {
            let z = upper.iter().fold(nonlinear_weight(n, rule.ell, rule.nodes[l]), |acc, &k| acc * table[(k, l)]);
            rule.vectors[(i, l)] * z * rule.vectors[(j, l)]
        })
        .sum()
}

/// Largest deviation between rule orders Q and 2Q over `samples`
/// deterministically spread D entries.
pub fn d_tensor_self_check(n: usize, size: usize, rule_q: &QuadratureRule, rule_2q: &QuadratureRule, samples: usize) -> f64 {
    let tuples = canonical_tuples(2 * n, size);
    let ta = rule_q.laguerre_table(size);
    let tb = rule_2q.laguerre_table(size);
    (0..samples)
        .map(|s| {
            let t = &tuples[(s * 7919) % tuples.len()];
            let i = (s * 3) % size;
            let j = (s * 5 + 1) % size;
            (d_entry(rule_q, &ta, n, i, j, t) - d_entry(rule_2q, &tb, n, i, j, t)).abs()
        })
        .fold(0.0, f64::max)
}

/// C^j_{k_1..k_{2n+1}}, totally symmetric, keyed by canonical (2n+2)-tuples.
#[derive(Debug, Clone)]
pub struct CTensor {
    pub n: usize,
    pub ell: usize,
    pub size: usize,
    values: HashMap<Vec<usize>, f64>,
}

impl CTensor {
    /// Value for any ordering of the 2n+2 indices.
    pub fn get(&self, indices: &[usize]) -> Option<f64> {
        self.values.get(&canonical(indices)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, &f64)> {
        self.values.iter()
    }
}

pub fn c_tensor_quadrature(n: usize, ell: usize, size: usize, rule: &QuadratureRule) -> Result<CTensor, LinearizeError> {
    let required = exact_quadrature_bound(n, size);
    if rule.order() < required {
        return Err(LinearizeError::QuadratureTooSmall { required, got: rule.order() });
    }
    if rule.ell != ell {
        return Err(LinearizeError::EllMismatch { expected: ell, got: rule.ell });
    }
    let table = rule.laguerre_table(size);
    let w = rule.weights();
    let values = canonical_tuples(2 * n + 2, size)
        .into_iter()
        .map(|t| {
            let v = (0..rule.order()).map(|l| t.iter().fold(w[l], |acc, &k| acc * table[(k, l)])).sum();
            (t, v)
        })
        .collect();
    Ok(CTensor { n, ell, size, values })
}

/// Matrix-polynomial route. Polynomials in the same J commute, so the
/// product over the 2n inner factors is formed in sorted order; the
/// symmetrization averages over every ordered choice of the two outer
/// (row, column) slots.
pub fn c_tensor_matrix_poly(n: usize, ell: usize, size: usize, jac: &JacobiMatrix) -> Result<CTensor, LinearizeError> {
    let required = exact_quadrature_bound(n, size);
    if jac.order() < required {
        return Err(LinearizeError::QuadratureTooSmall { required, got: jac.order() });
    }
    if jac.ell != ell {
        return Err(LinearizeError::EllMismatch { expected: ell, got: jac.ell });
    }
    let dim = jac.order();
    let j = jac.to_dense();
    let id = DMatrix::<f64>::identity(dim, dim);
    let mut polys: Vec<DMatrix<f64>> = vec![id.clone()];
    for k in 0..size.saturating_sub(1) {
        let mut next = (&id * eta(k, ell) - &j) * &polys[k];
        if k > 0 {
            next -= &polys[k - 1] * sigma(k - 1, ell);
        }
        polys.push(next / sigma(k, ell));
    }
    let mut products: HashMap<Vec<usize>, DMatrix<f64>> = HashMap::new();
    let mut values = HashMap::new();
    for t in canonical_tuples(2 * n + 2, size) {
        let len = t.len();
        let mut acc = 0.0;
        let mut count = 0usize;
        for a in 0..len {
            for b in 0..len {
                if a == b {
                    continue;
                }
                let inner: Vec<usize> = (0..len).filter(|&c| c != a && c != b).map(|c| t[c]).collect();
                let p = products.entry(inner.clone()).or_insert_with(|| inner.iter().fold(id.clone(), |m, &k| m * &polys[k]));
                acc += p[(t[a], t[b])];
                count += 1;
            }
        }
        values.insert(t, acc / count as f64);
    }
    Ok(CTensor { n, ell, size, values })
}

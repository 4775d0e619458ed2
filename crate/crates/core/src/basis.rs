//! Nodal Lagrange bases on the reference triangle.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAX_BASIS_DEGREE: usize = 6;

// Monomials are centred at the centroid to keep the Vandermonde matrix
// well conditioned at degree 6.
const SHIFT: f64 = 1.0 / 3.0;

/// Number of basis functions of the full polynomial space of total degree `k`.
pub const fn dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Values, reference gradients and reference Hessians `(xx, xy, yy)` of all
/// basis functions at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub hessians: Vec<[f64; 3]>,
}

/// Lagrange basis of degree `k` on uniformly spaced reference nodes.
///
/// The nodes are `(i/k, j/k)` with `i + j <= k`, ordered row by row in `j`.
/// Degree 0 uses the single node at the centroid.
#[derive(Debug, Clone)]
pub struct BasisSet {
    degree: usize,
    nodes: Vec<[f64; 2]>,
    exponents: Vec<(i32, i32)>,
    // coeffs[(m, i)]: coefficient of monomial m in basis function i
    coeffs: DMatrix<f64>,
}

impl BasisSet {
    pub fn new(degree: usize) -> Result<Self> {
        if degree > MAX_BASIS_DEGREE {
            return Err(Error::invalid(format!(
                "basis degree {degree} outside supported range 0..={MAX_BASIS_DEGREE}"
            )));
        }
        let nodes = lagrange_nodes(degree);
        let mut exponents = Vec::with_capacity(dim(degree));
        for total in 0..=degree as i32 {
            for b in 0..=total {
                exponents.push((total - b, b));
            }
        }
        let n = nodes.len();
        let vandermonde = DMatrix::from_fn(n, n, |i, m| {
            let (a, b) = exponents[m];
            (nodes[i][0] - SHIFT).powi(a) * (nodes[i][1] - SHIFT).powi(b)
        });
        let coeffs = vandermonde
            .try_inverse()
            .ok_or_else(|| Error::invalid("singular Vandermonde matrix"))?;
        Ok(Self {
            degree,
            nodes,
            exponents,
            coeffs,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Reference coordinates of the interpolation nodes.
    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn values(&self, p: [f64; 2]) -> Vec<f64> {
        let mono: Vec<f64> = self
            .exponents
            .iter()
            .map(|&(a, b)| (p[0] - SHIFT).powi(a) * (p[1] - SHIFT).powi(b))
            .collect();
        (0..self.len())
            .map(|i| {
                mono.iter()
                    .enumerate()
                    .map(|(m, v)| self.coeffs[(m, i)] * v)
                    .sum()
            })
            .collect()
    }

    pub fn eval(&self, p: [f64; 2]) -> BasisEval {
        let n = self.len();
        let (x, y) = (p[0] - SHIFT, p[1] - SHIFT);
        let pw = |v: f64, e: i32| if e < 0 { 0.0 } else { v.powi(e) };
        let mut mono = Vec::with_capacity(n);
        let mut dmono = Vec::with_capacity(n);
        let mut hmono = Vec::with_capacity(n);
        for &(a, b) in &self.exponents {
            let (af, bf) = (a as f64, b as f64);
            mono.push(pw(x, a) * pw(y, b));
            dmono.push([af * pw(x, a - 1) * pw(y, b), bf * pw(x, a) * pw(y, b - 1)]);
            hmono.push([
                af * (af - 1.0) * pw(x, a - 2) * pw(y, b),
                af * bf * pw(x, a - 1) * pw(y, b - 1),
                bf * (bf - 1.0) * pw(x, a) * pw(y, b - 2),
            ]);
        }
        let mut out = BasisEval {
            values: vec![0.0; n],
            grads: vec![[0.0; 2]; n],
            hessians: vec![[0.0; 3]; n],
        };
        for i in 0..n {
            for m in 0..n {
                let c = self.coeffs[(m, i)];
                out.values[i] += c * mono[m];
                out.grads[i][0] += c * dmono[m][0];
                out.grads[i][1] += c * dmono[m][1];
                for r in 0..3 {
                    out.hessians[i][r] += c * hmono[m][r];
                }
            }
        }
        out
    }
}

/// Shared basis of degree `k`, built on first use.
pub fn lagrange(k: usize) -> Result<&'static BasisSet> {
    static CACHE: [OnceLock<BasisSet>; MAX_BASIS_DEGREE + 1] = [const { OnceLock::new() }; MAX_BASIS_DEGREE + 1];
    let slot = CACHE.get(k).ok_or_else(|| {
        Error::invalid(format!(
            "basis degree {k} outside supported range 0..={MAX_BASIS_DEGREE}"
        ))
    })?;
    if let Some(b) = slot.get() {
        return Ok(b);
    }
    let b = BasisSet::new(k)?;
    Ok(slot.get_or_init(|| b))
}

fn lagrange_nodes(k: usize) -> Vec<[f64; 2]> {
    if k == 0 {
        return vec![[1.0 / 3.0, 1.0 / 3.0]];
    }
    let kf = k as f64;
    let mut nodes = Vec::with_capacity(dim(k));
    for j in 0..=k {
        for i in 0..=(k - j) {
            nodes.push([i as f64 / kf, j as f64 / kf]);
        }
    }
    nodes
}

/// Convenience wrapper returning values and reference gradients.
pub fn eval_basis(k: usize, point: [f64; 2]) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
    let basis = BasisSet::new(k)?;
    let e = basis.eval(point);
    Ok((e.values, e.grads))
}

//! Quadrature rules on the reference triangle `{(0,0), (1,0), (0,1)}` and on
//! the unit interval.
//!
//! Triangle rules of degree >= 2 are collapsed (Duffy) tensor products of
//! Gauss-Legendre rules. They carry more points than optimal symmetric rules
//! but are exact to any requested degree, which the coercivity identity of
//! the transport form relies on.

use crate::error::{Error, Result};

/// Highest exactness degree served by [`triangle_quadrature`] and
/// [`edge_quadrature`].
pub const MAX_DEGREE: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Polynomial degree integrated exactly.
    pub degree: usize,
    /// Reference coordinates. For edge rules only the first component is
    /// used and the second is zero.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 2], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]` with `m` points.
///
/// Newton iteration on the Legendre three-term recurrence, started from the
/// Chebyshev-like asymptotic guess.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "gauss_legendre needs at least one point");
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1]; roots come out in descending order
        nodes[i] = 0.5 * (1.0 - x);
        nodes[m - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[m - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=m {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let (p, pm1) = if m == 1 { (x, 1.0) } else { (p1, p0) };
    let d = m as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// Rule on the reference triangle exact for all monomials `x^a y^b` with
/// `a + b <= degree`.
pub fn triangle_quadrature(degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_DEGREE {
        return Err(Error::invalid(format!(
            "triangle quadrature degree {degree} exceeds supported maximum {MAX_DEGREE}"
        )));
    }
    if degree <= 1 {
        return Ok(QuadratureRule {
            degree,
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
        });
    }
    // x = s, y = t (1 - s); the Jacobian (1 - s) adds one degree in s.
    let (sn, sw) = gauss_legendre((degree + 2).div_ceil(2));
    let (tn, tw) = gauss_legendre((degree + 1).div_ceil(2));
    let mut points = Vec::with_capacity(sn.len() * tn.len());
    let mut weights = Vec::with_capacity(sn.len() * tn.len());
    for (&s, &ws) in sn.iter().zip(&sw) {
        for (&t, &wt) in tn.iter().zip(&tw) {
            points.push([s, t * (1.0 - s)]);
            weights.push(ws * wt * (1.0 - s));
        }
    }
    Ok(QuadratureRule {
        degree,
        points,
        weights,
    })
}

/// Composite rule: the reference triangle is split uniformly into
/// `refine^2` similar subtriangles, each carrying a degree-`degree` rule.
pub fn composite_triangle_quadrature(degree: usize, refine: usize) -> Result<QuadratureRule> {
    if refine == 0 {
        return Err(Error::invalid("refinement factor must be at least 1"));
    }
    let base = triangle_quadrature(degree)?;
    let h = 1.0 / refine as f64;
    let scale = h * h;
    let mut points = Vec::with_capacity(base.len() * refine * refine);
    let mut weights = Vec::with_capacity(points.capacity());
    let mut push = |o: [f64; 2], e1: [f64; 2], e2: [f64; 2]| {
        for (p, w) in base.iter() {
            points.push([
                o[0] + e1[0] * p[0] + e2[0] * p[1],
                o[1] + e1[1] * p[0] + e2[1] * p[1],
            ]);
            weights.push(w * scale);
        }
    };
    for j in 0..refine {
        for i in 0..(refine - j) {
            let o = [i as f64 * h, j as f64 * h];
            push(o, [h, 0.0], [0.0, h]);
            if i + j + 1 < refine {
                // downward triangle sharing the hypotenuse
                push([o[0] + h, o[1] + h], [-h, 0.0], [0.0, -h]);
            }
        }
    }
    Ok(QuadratureRule {
        degree,
        points,
        weights,
    })
}

/// Gauss-Legendre rule on `[0, 1]` exact to `degree`.
pub fn edge_quadrature(degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_DEGREE {
        return Err(Error::invalid(format!(
            "edge quadrature degree {degree} exceeds supported maximum {MAX_DEGREE}"
        )));
    }
    let (nodes, weights) = gauss_legendre(degree / 2 + 1);
    Ok(QuadratureRule {
        degree,
        points: nodes.into_iter().map(|s| [s, 0.0]).collect(),
        weights,
    })
}

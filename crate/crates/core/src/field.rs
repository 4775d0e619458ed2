//! Broken (element-wise) polynomial fields.

use std::io::{BufRead, Write};

use crate::basis::{dim, lagrange, BasisSet};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::triangle_quadrature;

/// Element-wise polynomial of fixed degree in the nodal Lagrange basis.
///
/// Coefficients are stored element-major: element `t` owns
/// `coeffs[t * n .. (t + 1) * n]` with `n = (degree + 1)(degree + 2) / 2`.
/// Since the basis is nodal, a coefficient is the field value at the
/// corresponding node of that element.
#[derive(Debug, Clone, PartialEq)]
pub struct DGField {
    degree: usize,
    num_triangles: usize,
    coeffs: Vec<f64>,
}

impl DGField {
    pub fn zeros(degree: usize, num_triangles: usize) -> Result<Self> {
        lagrange(degree)?;
        Ok(Self {
            degree,
            num_triangles,
            coeffs: vec![0.0; num_triangles * dim(degree)],
        })
    }

    pub fn from_coeffs(degree: usize, num_triangles: usize, coeffs: Vec<f64>) -> Result<Self> {
        lagrange(degree)?;
        if coeffs.len() != num_triangles * dim(degree) {
            return Err(Error::invalid(format!(
                "expected {} coefficients for degree {degree} on {num_triangles} triangles, got {}",
                num_triangles * dim(degree),
                coeffs.len()
            )));
        }
        Ok(Self {
            degree,
            num_triangles,
            coeffs,
        })
    }

    /// Nodal interpolation of `f(t, x)` on every element.
    pub fn interpolate<F>(mesh: &Mesh, degree: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, [f64; 2]) -> f64,
    {
        let basis = lagrange(degree)?;
        let mut coeffs = Vec::with_capacity(mesh.num_triangles() * basis.len());
        for t in 0..mesh.num_triangles() {
            let map = mesh.map(t);
            for &node in basis.nodes() {
                coeffs.push(f(t, map.to_physical(node)));
            }
        }
        Self::from_coeffs(degree, mesh.num_triangles(), coeffs)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_triangles(&self) -> usize {
        self.num_triangles
    }

    pub fn local_len(&self) -> usize {
        dim(self.degree)
    }

    pub fn basis(&self) -> &'static BasisSet {
        lagrange(self.degree).expect("degree validated at construction")
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn element(&self, t: usize) -> &[f64] {
        let n = self.local_len();
        &self.coeffs[t * n..(t + 1) * n]
    }

    pub fn element_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.local_len();
        &mut self.coeffs[t * n..(t + 1) * n]
    }

    /// Value of element `t`'s polynomial at reference point `r`.
    pub fn eval_ref(&self, t: usize, r: [f64; 2]) -> f64 {
        dot(self.element(t), &self.basis().values(r))
    }

    /// Value of element `t`'s polynomial at physical point `x`. The point
    /// need not lie inside the element.
    pub fn eval(&self, mesh: &Mesh, t: usize, x: [f64; 2]) -> f64 {
        self.eval_ref(t, mesh.map(t).to_reference(x))
    }

    /// Value at `x` taken from whichever triangle contains it.
    pub fn eval_at(&self, mesh: &Mesh, x: [f64; 2]) -> Option<f64> {
        mesh.locate(x).map(|t| self.eval(mesh, t, x))
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.num_triangles != mesh.num_triangles() {
            return Err(Error::invalid(format!(
                "field has {} elements but mesh has {}",
                self.num_triangles,
                mesh.num_triangles()
            )));
        }
        Ok(())
    }

    /// Writes the field as CSV with a `#`-prefixed metadata header.
    pub fn write_csv<W: Write>(&self, mesh: &Mesh, mut w: W) -> Result<()> {
        self.check_mesh(mesh)?;
        writeln!(w, "# degree = {}", self.degree)?;
        writeln!(w, "# n = {}", mesh.subdivisions())?;
        writeln!(w, "# basis = lagrange-uniform")?;
        write!(w, "triangle_id")?;
        for i in 0..self.local_len() {
            write!(w, ",coeff_{i}")?;
        }
        writeln!(w)?;
        for t in 0..self.num_triangles {
            write!(w, "{t}")?;
            for c in self.element(t) {
                write!(w, ",{c}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads a field written by [`DGField::write_csv`]. Returns the field and
    /// the mesh subdivision count recorded in the header.
    pub fn read_csv<R: BufRead>(r: R) -> Result<(Self, usize)> {
        let mut degree = None;
        let mut n = None;
        let mut header_seen = false;
        let mut coeffs = Vec::new();
        let mut rows = 0usize;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let perr = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let Some((key, value)) = meta.split_once('=') else {
                    continue;
                };
                match key.trim() {
                    "degree" => {
                        degree = Some(value.trim().parse::<usize>().map_err(|e| perr(e.to_string()))?)
                    }
                    "n" => n = Some(value.trim().parse::<usize>().map_err(|e| perr(e.to_string()))?),
                    "basis" if value.trim() != "lagrange-uniform" => {
                        return Err(perr(format!("unsupported basis {}", value.trim())))
                    }
                    _ => {}
                }
                continue;
            }
            if !header_seen {
                if !line.starts_with("triangle_id") {
                    return Err(perr("missing column header".into()));
                }
                header_seen = true;
                continue;
            }
            let deg = degree.ok_or_else(|| perr("degree missing from header".into()))?;
            let mut fields = line.split(',');
            let id: usize = fields
                .next()
                .unwrap_or_default()
                .trim()
                .parse()
                .map_err(|e: std::num::ParseIntError| perr(e.to_string()))?;
            if id != rows {
                return Err(perr(format!("expected triangle {rows}, found {id}")));
            }
            let before = coeffs.len();
            for f in fields {
                coeffs.push(
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| perr(e.to_string()))?,
                );
            }
            if coeffs.len() - before != dim(deg) {
                return Err(perr(format!(
                    "expected {} coefficients, found {}",
                    dim(deg),
                    coeffs.len() - before
                )));
            }
            rows += 1;
        }
        let degree = degree.ok_or_else(|| Error::Parse {
            line: 0,
            message: "degree missing from header".into(),
        })?;
        let n = n.ok_or_else(|| Error::Parse {
            line: 0,
            message: "n missing from header".into(),
        })?;
        Ok((Self::from_coeffs(degree, rows, coeffs)?, n))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sqrt(int_Omega f^2)` where `f(t, x)` is evaluated per element.
pub fn l2_norm<F>(mesh: &Mesh, degree: usize, f: F) -> Result<f64>
where
    F: Fn(usize, [f64; 2]) -> f64,
{
    let rule = triangle_quadrature(degree)?;
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let map = mesh.map(t);
        let area = map.area() * 2.0;
        for (p, w) in rule.iter() {
            let v = f(t, map.to_physical(*p));
            total += w * area * v * v;
        }
    }
    Ok(total.sqrt())
}

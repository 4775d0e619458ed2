//! Reconstruction error metrics.

use crate::error::{Error, Result};
use crate::field::{dot, DGField};
use crate::mesh::Mesh;
use crate::quadrature::{composite_triangle_quadrature, triangle_quadrature, QuadratureRule};

/// Per-element refinement used for the half-power metric.
pub const HALFNORM_REFINE: usize = 4;
/// Degree of the rule on each refined subtriangle.
pub const HALFNORM_DEGREE: usize = 10;

fn integrate<F>(mesh: &Mesh, approx: &DGField, rule: &QuadratureRule, f: F) -> f64
where
    F: Fn([f64; 2], f64) -> f64,
{
    let basis = approx.basis();
    let tab: Vec<Vec<f64>> = rule.points.iter().map(|&r| basis.values(r)).collect();
    (0..mesh.num_triangles())
        .map(|t| {
            let map = mesh.map(t);
            let c = approx.element(t);
            rule.iter()
                .zip(&tab)
                .map(|((r, w), phi)| w * map.det.abs() * f(map.to_physical(*r), dot(c, phi)))
                .sum::<f64>()
        })
        .sum()
}

/// `int |gamma - gamma_h|^{1/2} dx` with a composite rule of
/// `refine^2` subtriangles per element.
pub fn error_halfnorm_refined<F>(mesh: &Mesh, exact: F, approx: &DGField, refine: usize) -> Result<f64>
where
    F: Fn([f64; 2]) -> f64,
{
    approx.check_mesh(mesh)?;
    let rule = composite_triangle_quadrature(HALFNORM_DEGREE, refine)?;
    Ok(integrate(mesh, approx, &rule, |x, v| (exact(x) - v).abs().sqrt()))
}

/// The half-power error `int |gamma - gamma_h|^{1/2} dx`.
///
/// The integrand has square-root kinks wherever the error changes sign, so
/// each element is split into 16 subtriangles carrying a degree-10 rule.
pub fn error_halfnorm<F>(mesh: &Mesh, exact: F, approx: &DGField) -> Result<f64>
where
    F: Fn([f64; 2]) -> f64,
{
    error_halfnorm_refined(mesh, exact, approx, HALFNORM_REFINE)
}

/// Relative L2 error `||gamma - gamma_h|| / ||gamma||`.
pub fn rerror<F>(mesh: &Mesh, exact: F, approx: &DGField) -> Result<f64>
where
    F: Fn([f64; 2]) -> f64,
{
    rerror_with_rule(mesh, exact, approx, &triangle_quadrature(2 * approx.degree() + 8)?)
}

pub fn rerror_with_rule<F>(mesh: &Mesh, exact: F, approx: &DGField, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn([f64; 2]) -> f64,
{
    approx.check_mesh(mesh)?;
    let num = integrate(mesh, approx, rule, |x, v| (exact(x) - v).powi(2));
    let den = integrate(mesh, approx, rule, |x, _| exact(x).powi(2));
    if den == 0.0 {
        return Err(Error::invalid("exact field vanishes identically"));
    }
    Ok((num / den).sqrt())
}

/// Absolute L2 error `||f - f_h||`.
pub fn l2_error<F>(mesh: &Mesh, exact: F, approx: &DGField) -> Result<f64>
where
    F: Fn([f64; 2]) -> f64,
{
    approx.check_mesh(mesh)?;
    let rule = triangle_quadrature(2 * approx.degree() + 8)?;
    Ok(integrate(mesh, approx, &rule, |x, v| (exact(x) - v).powi(2)).sqrt())
}

/// Minimum of `f(gamma_h)` over the metric quadrature points.
pub fn min_over_quadrature<G>(mesh: &Mesh, approx: &DGField, g: G) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    approx.check_mesh(mesh)?;
    let rule = triangle_quadrature(2 * approx.degree() + 8)?;
    let basis = approx.basis();
    let tab: Vec<Vec<f64>> = rule.points.iter().map(|&r| basis.values(r)).collect();
    let mut m = f64::INFINITY;
    for t in 0..mesh.num_triangles() {
        for phi in &tab {
            m = m.min(g(dot(approx.element(t), phi)));
        }
    }
    Ok(m)
}

//! Internal measurement data: polynomial fits, noise, and the transport
//! coefficients derived from them.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::lagrange;
use crate::error::{Error, Result};
use crate::field::{dot, DGField};
use crate::mesh::Mesh;

pub use crate::field::l2_norm;

/// Fits `u` by nodal interpolation at the degree-`k0` Lagrange nodes of each
/// element. `u` receives the element index so broken sources are sampled
/// from the right side.
///
/// Exact for per-element polynomials of degree `<= k0`.
pub fn project_to_dg<F>(mesh: &Mesh, k0: usize, u: F) -> Result<DGField>
where
    F: Fn(usize, [f64; 2]) -> f64,
{
    let field = DGField::interpolate(mesh, k0, u)?;
    if let Some(pos) = field.coeffs().iter().position(|c| !c.is_finite()) {
        return Err(Error::data(format!(
            "non-finite measurement at element {}",
            pos / field.local_len()
        )));
    }
    Ok(field)
}

/// Point measurements inside one element.
#[derive(Debug, Clone, Default)]
pub struct ElementSamples {
    pub points: Vec<[f64; 2]>,
    pub values: Vec<f64>,
}

/// Least-squares fit of degree `k0` to scattered samples per element.
pub fn fit_samples(mesh: &Mesh, k0: usize, samples: &[ElementSamples]) -> Result<DGField> {
    let basis = lagrange(k0)?;
    if samples.len() != mesh.num_triangles() {
        return Err(Error::invalid(format!(
            "{} sample sets for {} elements",
            samples.len(),
            mesh.num_triangles()
        )));
    }
    let m = basis.len();
    let mut field = DGField::zeros(k0, mesh.num_triangles())?;
    for (t, s) in samples.iter().enumerate() {
        if s.points.len() != s.values.len() {
            return Err(Error::invalid("sample points and values differ in length"));
        }
        let map = mesh.map(t);
        let rows = s.points.len();
        let mut a = DMatrix::zeros(rows, m);
        for (i, &x) in s.points.iter().enumerate() {
            for (j, v) in basis.values(map.to_reference(x)).into_iter().enumerate() {
                a[(i, j)] = v;
            }
        }
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&sv| sv > 1e-10 * smax.max(f64::MIN_POSITIVE))
            .count();
        if rank < m {
            return Err(Error::data(format!(
                "rank-deficient fit on element {t}: rank {rank} < {m}"
            )));
        }
        let b = DVector::from_column_slice(&s.values);
        let c = svd
            .solve(&b, 1e-14)
            .map_err(|e| Error::data(format!("least-squares solve failed on element {t}: {e}")))?;
        field.element_mut(t).copy_from_slice(c.as_slice());
    }
    Ok(field)
}

/// Multiplies every nodal value by `1 + delta * xi` with `xi ~ U(-1, 1)`
/// drawn independently per node.
///
/// Element `t` draws from stream `t` of a ChaCha generator seeded by `seed`,
/// so the result does not depend on evaluation order.
pub fn add_noise(field: &DGField, delta: f64, seed: u64) -> Result<DGField> {
    if !(delta >= 0.0) {
        return Err(Error::invalid(format!("noise level must be >= 0, got {delta}")));
    }
    let mut out = field.clone();
    if delta == 0.0 {
        return Ok(out);
    }
    for t in 0..out.num_triangles() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        for c in out.element_mut(t) {
            let xi: f64 = rng.random_range(-1.0..=1.0);
            *c *= 1.0 + delta * xi;
        }
    }
    Ok(out)
}

/// Re-expresses a field on a nested refinement of its mesh.
///
/// Each fine element takes the polynomial of the coarse element containing
/// its centroid, so the result is exact when `fine` refines `coarse`.
pub fn restrict_nested(field: &DGField, coarse: &Mesh, fine: &Mesh) -> Result<DGField> {
    field.check_mesh(coarse)?;
    if fine.subdivisions() % coarse.subdivisions() != 0 {
        return Err(Error::invalid(format!(
            "mesh n={} does not refine data mesh n={}",
            fine.subdivisions(),
            coarse.subdivisions()
        )));
    }
    let parents: Vec<usize> = (0..fine.num_triangles())
        .map(|t| coarse.locate(fine.centroid(t)).expect("centroid inside domain"))
        .collect();
    DGField::interpolate(fine, field.degree(), |t, x| field.eval(coarse, parents[t], x))
}

/// Transport coefficients `beta = grad U` and `mu = lap U / 2 + eps`, stored
/// as broken polynomials of degree `k0 - 1` and `k0 - 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub eps: f64,
    pub beta: [DGField; 2],
    pub laplacian: DGField,
}

impl VelocityField {
    pub fn num_triangles(&self) -> usize {
        self.laplacian.num_triangles()
    }

    /// Polynomial degree of `beta`.
    pub fn degree(&self) -> usize {
        self.beta[0].degree()
    }

    pub fn beta_ref(&self, t: usize, r: [f64; 2]) -> [f64; 2] {
        [self.beta[0].eval_ref(t, r), self.beta[1].eval_ref(t, r)]
    }

    pub fn beta(&self, mesh: &Mesh, t: usize, x: [f64; 2]) -> [f64; 2] {
        self.beta_ref(t, mesh.map(t).to_reference(x))
    }

    pub fn mu_ref(&self, t: usize, r: [f64; 2]) -> f64 {
        0.5 * self.laplacian.eval_ref(t, r) + self.eps
    }

    pub fn mu(&self, mesh: &Mesh, t: usize, x: [f64; 2]) -> f64 {
        self.mu_ref(t, mesh.map(t).to_reference(x))
    }
}

/// Differentiates each element polynomial of `u` exactly.
pub fn derive_fields(mesh: &Mesh, u: &DGField, eps: f64) -> Result<VelocityField> {
    u.check_mesh(mesh)?;
    let k0 = u.degree();
    let src = u.basis();
    let grad_deg = k0.saturating_sub(1);
    let lap_deg = k0.saturating_sub(2);
    let gb = lagrange(grad_deg)?;
    let lb = lagrange(lap_deg)?;
    let nt = mesh.num_triangles();
    let mut bx = DGField::zeros(grad_deg, nt)?;
    let mut by = DGField::zeros(grad_deg, nt)?;
    let mut lap = DGField::zeros(lap_deg, nt)?;

    let grad_tab: Vec<_> = gb.nodes().iter().map(|&r| src.eval(r).grads).collect();
    let hess_tab: Vec<_> = lb.nodes().iter().map(|&r| src.eval(r).hessians).collect();
    for t in 0..nt {
        let map = mesh.map(t);
        let c = u.element(t);
        for (i, grads) in grad_tab.iter().enumerate() {
            let gref = [
                dot(c, &grads.iter().map(|g| g[0]).collect::<Vec<_>>()),
                dot(c, &grads.iter().map(|g| g[1]).collect::<Vec<_>>()),
            ];
            let g = map.grad(gref);
            bx.element_mut(t)[i] = g[0];
            by.element_mut(t)[i] = g[1];
        }
        for (i, hess) in hess_tab.iter().enumerate() {
            let mut h = [0.0; 3];
            for (cj, hj) in c.iter().zip(hess) {
                for r in 0..3 {
                    h[r] += cj * hj[r];
                }
            }
            lap.element_mut(t)[i] = map.laplacian(h);
        }
    }
    Ok(VelocityField {
        eps,
        beta: [bx, by],
        laplacian: lap,
    })
}

/// Relative L2 distance `||a - b|| / ||b||` between two fields on the same mesh.
pub fn relative_l2_difference(mesh: &Mesh, a: &DGField, b: &DGField) -> Result<f64> {
    let deg = 2 * a.degree().max(b.degree()) + 2;
    let diff = l2_norm(mesh, deg, |t, x| a.eval(mesh, t, x) - b.eval(mesh, t, x))?;
    let base = l2_norm(mesh, deg, |t, x| b.eval(mesh, t, x))?;
    Ok(if base == 0.0 { diff } else { diff / base })
}

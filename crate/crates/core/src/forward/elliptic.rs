//! Continuous Galerkin solver for the Neumann problem
//! `div(sigma grad u) = 0`, `sigma du/dnu = g`, `int u = 0`.

use rayon::prelude::*;

use crate::basis::lagrange;
use crate::error::{Error, Result};
use crate::field::DGField;
use crate::mesh::Mesh;
use crate::quadrature::{edge_quadrature, triangle_quadrature};
use crate::sparse::{norm2, CsrMatrix, DirectSolver};

#[derive(Debug, Clone)]
pub struct EllipticSolution {
    /// Continuous solution written element-wise in the nodal basis.
    pub field: DGField,
    /// Global nodal values.
    pub dofs: Vec<f64>,
    /// Lagrange multiplier of the zero-mean constraint.
    pub multiplier: f64,
    /// `int_Omega u_h dx` after the solve.
    pub mean: f64,
    /// Relative residual of the bordered linear system.
    pub residual: f64,
}

impl EllipticSolution {
    pub fn eval_at(&self, mesh: &Mesh, x: [f64; 2]) -> Option<f64> {
        self.field.eval_at(mesh, x)
    }
}

/// Global node numbering of continuous degree-`p` Lagrange elements:
/// vertices, then `p - 1` nodes per edge, then element interiors.
pub(crate) fn cg_numbering(mesh: &Mesh, p: usize) -> Result<(Vec<Vec<usize>>, usize)> {
    let basis = lagrange(p)?;
    if p == 0 {
        return Err(Error::invalid("continuous elements need degree >= 1"));
    }
    let nv = mesh.vertices.len();
    let ne = mesh.edges.len();
    let interior = (p - 1) * p.saturating_sub(2) / 2;
    let total = nv + ne * (p - 1) + mesh.num_triangles() * interior;
    let mut maps = Vec::with_capacity(mesh.num_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let mut local = Vec::with_capacity(basis.len());
        let mut next_interior = nv + ne * (p - 1) + t * interior;
        for node in basis.nodes() {
            let i = (node[0] * p as f64).round() as usize;
            let j = (node[1] * p as f64).round() as usize;
            let bary = [p - i - j, i, j];
            let global = if let Some(m) = bary.iter().position(|&b| b == p) {
                tri[m]
            } else if let Some(m) = bary.iter().position(|&b| b == 0) {
                let a = tri[(m + 1) % 3];
                let b = tri[(m + 2) % 3];
                let (hi_idx, hi) = if a > b { (bary[(m + 1) % 3], a) } else { (bary[(m + 2) % 3], b) };
                debug_assert!(hi == a.max(b));
                let e = mesh.triangle_edges[t][m];
                nv + e * (p - 1) + (hi_idx - 1)
            } else {
                next_interior += 1;
                next_interior - 1
            };
            local.push(global);
        }
        maps.push(local);
    }
    Ok((maps, total))
}

struct LocalSystem {
    dofs: Vec<usize>,
    stiffness: Vec<f64>,
    load: Vec<f64>,
    mass: Vec<f64>,
}

/// Solves the Neumann problem with continuous Lagrange elements of degree
/// `p`, enforcing `int u = 0` through a scalar Lagrange multiplier.
///
/// The multiplier is eliminated analytically, so only the pinned stiffness
/// matrix is factorized.
///
/// `g` receives a boundary point and its outward unit normal.
pub fn solve_elliptic<S, G>(mesh: &Mesh, p: usize, sigma: S, g: G) -> Result<EllipticSolution>
where
    S: Fn([f64; 2]) -> f64 + Sync,
    G: Fn([f64; 2], [f64; 2]) -> f64 + Sync,
{
    let basis = lagrange(p)?;
    let (maps, ndof) = cg_numbering(mesh, p)?;
    let nloc = basis.len();
    let vol = triangle_quadrature(2 * p + 4)?;
    let edge_rule = edge_quadrature(p + 8)?;

    let tab: Vec<_> = vol.points.iter().map(|&r| basis.eval(r)).collect();

    // compatibility of the Neumann datum
    let mut flux = 0.0;
    let mut flux_abs = 0.0;
    for (id, e) in mesh.boundary_edges() {
        for (s, w) in edge_rule.iter() {
            let v = g(mesh.edge_point(id, s[0]), e.normal);
            flux += w * e.length * v;
            flux_abs += w * e.length * v.abs();
        }
    }
    if flux.abs() > 1e-8 * flux_abs.max(1.0) {
        return Err(Error::data(format!(
            "Neumann datum has nonzero boundary integral {flux:.3e}"
        )));
    }

    let locals: Vec<Result<LocalSystem>> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let map = mesh.map(t);
            let jdet = map.det.abs();
            let mut stiffness = vec![0.0; nloc * nloc];
            let mut mass = vec![0.0; nloc];
            for ((r, w), e) in vol.iter().zip(&tab) {
                let x = map.to_physical(*r);
                let s = sigma(x);
                if !(s > 0.0) {
                    return Err(Error::data(format!(
                        "conductivity {s} not positive at ({:.4}, {:.4})",
                        x[0], x[1]
                    )));
                }
                let grads: Vec<[f64; 2]> = e.grads.iter().map(|&gr| map.grad(gr)).collect();
                for i in 0..nloc {
                    mass[i] += w * jdet * e.values[i];
                    for j in 0..nloc {
                        stiffness[i * nloc + j] +=
                            w * jdet * s * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                    }
                }
            }
            let mut load = vec![0.0; nloc];
            for &eid in &mesh.triangle_edges[t] {
                let edge = &mesh.edges[eid];
                if !edge.is_boundary() {
                    continue;
                }
                for (sp, w) in edge_rule.iter() {
                    let x = mesh.edge_point(eid, sp[0]);
                    let gv = g(x, edge.normal);
                    let phi = basis.values(map.to_reference(x));
                    for i in 0..nloc {
                        load[i] += w * edge.length * gv * phi[i];
                    }
                }
            }
            Ok(LocalSystem {
                dofs: maps[t].clone(),
                stiffness,
                load,
                mass,
            })
        })
        .collect();

    let mut triplets = Vec::with_capacity(mesh.num_triangles() * nloc * nloc);
    let mut rhs = vec![0.0; ndof];
    let mut mass = vec![0.0; ndof];
    for local in locals {
        let local = local?;
        for i in 0..nloc {
            let gi = local.dofs[i];
            rhs[gi] += local.load[i];
            mass[gi] += local.mass[i];
            for j in 0..nloc {
                triplets.push((gi, local.dofs[j], local.stiffness[i * nloc + j]));
            }
        }
    }
    let stiffness = CsrMatrix::from_triplets(ndof, ndof, triplets)?;

    // Bordered system [A m; m^T 0] [u; l] = [b; 0]. Since A 1 = 0, testing
    // with 1 gives l = 1^T b / 1^T m. The corrected load is then compatible,
    // so u is the pinned solution shifted to zero mean. This avoids
    // factorizing the dense border.
    let area: f64 = mass.iter().sum();
    let multiplier = rhs.iter().sum::<f64>() / area;
    let load: Vec<f64> = rhs.iter().zip(&mass).map(|(b, m)| b - multiplier * m).collect();
    let pinned = {
        let mut trip = Vec::with_capacity(stiffness.nnz());
        for r in 0..ndof {
            if r == 0 {
                trip.push((0, 0, 1.0));
                continue;
            }
            trip.extend(stiffness.row(r).map(|(c, v)| (r, c, v)));
        }
        CsrMatrix::from_triplets(ndof, ndof, trip)?
    };
    let lu = DirectSolver::factor(&pinned)?;
    let zero_mean = |x: &mut Vec<f64>| {
        let shift = x.iter().zip(&mass).map(|(u, m)| u * m).sum::<f64>() / area;
        x.iter_mut().for_each(|u| *u -= shift);
    };
    // residual of the bordered system, with the multiplier fixed
    let bordered_residual = |u: &[f64]| -> (Vec<f64>, f64) {
        let au = stiffness.matvec(u);
        let r: Vec<f64> = au.iter().zip(&load).map(|(a, b)| b - a).collect();
        let constraint = u.iter().zip(&mass).map(|(u, m)| u * m).sum::<f64>();
        let rel = (norm2(&r).powi(2) + constraint.powi(2)).sqrt() / norm2(&rhs).max(f64::MIN_POSITIVE);
        (r, rel)
    };
    let mut pinned_load = load.clone();
    pinned_load[0] = 0.0;
    let mut dofs = lu.solve(&pinned_load);
    zero_mean(&mut dofs);
    let (mut r, mut residual) = bordered_residual(&dofs);
    let mut sweeps = 0;
    while residual > 1e-10 && sweeps < 5 && residual.is_finite() {
        r[0] = 0.0;
        for (u, d) in dofs.iter_mut().zip(lu.solve(&r)) {
            *u += d;
        }
        zero_mean(&mut dofs);
        (r, residual) = bordered_residual(&dofs);
        sweeps += 1;
    }
    if !(residual <= 1e-10) {
        return Err(Error::Solver {
            message: "Neumann solve did not reach the requested accuracy".into(),
            residual,
        });
    }

    let mut coeffs = Vec::with_capacity(mesh.num_triangles() * nloc);
    for m in &maps {
        coeffs.extend(m.iter().map(|&d| dofs[d]));
    }
    let field = DGField::from_coeffs(p, mesh.num_triangles(), coeffs)?;
    let mean = (0..mesh.num_triangles())
        .map(|t| {
            let jdet = mesh.map(t).det.abs();
            vol.iter()
                .zip(&tab)
                .map(|((_, w), e)| {
                    w * jdet
                        * field
                            .element(t)
                            .iter()
                            .zip(&e.values)
                            .map(|(c, v)| c * v)
                            .sum::<f64>()
                })
                .sum::<f64>()
        })
        .sum();
    Ok(EllipticSolution {
        field,
        dofs,
        multiplier,
        mean,
        residual,
    })
}

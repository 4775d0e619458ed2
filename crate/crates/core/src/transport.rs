//! Upwind discontinuous Galerkin discretization of
//! `beta . grad(gamma) + mu gamma = 0` with weak inflow datum `gamma_0`.
//!
//! Unknowns are numbered element-major: degree-of-freedom `i` of triangle
//! `t` is row `t * n_loc + i`, `n_loc = (k + 1)(k + 2) / 2`.
//!
//! `beta` is a broken polynomial, so on an interior edge the left and right
//! traces `b_L = beta_L . n` and `b_R = beta_R . n` differ. Writing
//! `b = (b_L + b_R) / 2`, the interior-edge contribution is
//!
//! ```text
//!   - b [v]{w} - (b_L - b_R)/4 (v_L w_L + v_R w_R) + penalty |b| [v][w]
//! ```
//!
//! The middle term is the interface part of `lap(U) / 2` for a potential
//! with jumping normal derivative; it vanishes when `beta . n` is
//! continuous. With it, element-wise integration by parts gives the exact
//! identity
//!
//! ```text
//!   a_h(w, w) = eps ||w||^2 + 1/2 sum_boundary int |b| w^2
//!             + sum_interior int penalty |b| [w]^2
//! ```
//!
//! for every broken polynomial `w`, see [`coercivity_split`].

use std::sync::Arc;

use rayon::prelude::*;

use crate::basis::{dim, lagrange, BasisSet, MAX_BASIS_DEGREE};
use crate::data::VelocityField;
use crate::error::{Error, Result};
use crate::field::{dot, DGField};
use crate::mesh::Mesh;
use crate::quadrature::{edge_quadrature, triangle_quadrature, QuadratureRule, MAX_DEGREE};
use crate::sparse::{self, CsrMatrix, SolveOutcome, SolverOptions};

pub const DEFAULT_PENALTY: f64 = 100.0;

pub type Inflow = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

/// Negative part `max(-r, 0)`.
pub fn negative_part(r: f64) -> f64 {
    (-r).max(0.0)
}

/// Positive part `max(r, 0)`.
pub fn positive_part(r: f64) -> f64 {
    r.max(0.0)
}

#[derive(Clone)]
pub struct TransportProblem {
    pub velocity: VelocityField,
    pub inflow: Inflow,
    pub penalty: f64,
    pub degree: usize,
}

impl std::fmt::Debug for TransportProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransportProblem")
            .field("eps", &self.velocity.eps)
            .field("penalty", &self.penalty)
            .field("degree", &self.degree)
            .finish_non_exhaustive()
    }
}

impl TransportProblem {
    pub fn new(velocity: VelocityField, inflow: Inflow, penalty: f64, degree: usize) -> Result<Self> {
        if !(penalty > 0.0) {
            return Err(Error::invalid(format!("penalty must be positive, got {penalty}")));
        }
        if !(velocity.eps > 0.0) {
            return Err(Error::invalid(format!(
                "regularization must be positive, got {}",
                velocity.eps
            )));
        }
        if degree > MAX_BASIS_DEGREE {
            return Err(Error::invalid(format!(
                "reconstruction degree {degree} exceeds {MAX_BASIS_DEGREE}"
            )));
        }
        Ok(Self {
            velocity,
            inflow,
            penalty,
            degree,
        })
    }

    pub fn eps(&self) -> f64 {
        self.velocity.eps
    }

    /// Quadrature degree needed for the volume and edge terms to be exact.
    pub fn required_quadrature_degree(&self) -> usize {
        2 * self.degree + self.velocity.degree() + 1
    }

    fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.velocity.num_triangles() != mesh.num_triangles() {
            return Err(Error::invalid(format!(
                "velocity has {} elements but mesh has {}",
                self.velocity.num_triangles(),
                mesh.num_triangles()
            )));
        }
        Ok(())
    }
}

/// Assembled transport system.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub degree: usize,
    pub num_triangles: usize,
}

impl SparseSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn local_len(&self) -> usize {
        dim(self.degree)
    }

    pub fn write_matrix_market<W: std::io::Write>(&self, w: W) -> Result<()> {
        self.matrix.write_matrix_market(w)
    }
}

/// Velocity and reaction bases tabulated at a fixed set of reference points.
struct CoefficientTable {
    beta_vals: Vec<Vec<f64>>,
    lap_vals: Vec<Vec<f64>>,
}

impl CoefficientTable {
    fn new(v: &VelocityField, points: &[[f64; 2]]) -> Self {
        let bb = v.beta[0].basis();
        let lb = v.laplacian.basis();
        Self {
            beta_vals: points.iter().map(|&r| bb.values(r)).collect(),
            lap_vals: points.iter().map(|&r| lb.values(r)).collect(),
        }
    }

    fn beta(&self, v: &VelocityField, t: usize, q: usize) -> [f64; 2] {
        [
            dot(v.beta[0].element(t), &self.beta_vals[q]),
            dot(v.beta[1].element(t), &self.beta_vals[q]),
        ]
    }

    fn mu(&self, v: &VelocityField, t: usize, q: usize) -> f64 {
        0.5 * dot(v.laplacian.element(t), &self.lap_vals[q]) + v.eps
    }
}

struct Rules {
    volume: QuadratureRule,
    edge: QuadratureRule,
}

fn rules(problem: &TransportProblem, quad_degree: Option<usize>) -> Result<Rules> {
    let required = problem.required_quadrature_degree();
    let degree = quad_degree.unwrap_or(required);
    if degree < required {
        return Err(Error::invalid(format!(
            "quadrature degree {degree} below the required {required}"
        )));
    }
    if degree > MAX_DEGREE {
        return Err(Error::invalid(format!(
            "quadrature degree {degree} exceeds {MAX_DEGREE}"
        )));
    }
    Ok(Rules {
        volume: triangle_quadrature(degree)?,
        edge: edge_quadrature(degree)?,
    })
}

fn beta_dot_n(v: &VelocityField, mesh: &Mesh, t: usize, x: [f64; 2], n: [f64; 2]) -> f64 {
    let b = v.beta(mesh, t, x);
    b[0] * n[0] + b[1] * n[1]
}

/// Assembles the upwind DG system with the default quadrature.
pub fn assemble(problem: &TransportProblem, mesh: &Mesh) -> Result<SparseSystem> {
    assemble_with_quadrature(problem, mesh, None)
}

/// Assembles with an explicit quadrature degree, which must be at least
/// [`TransportProblem::required_quadrature_degree`].
pub fn assemble_with_quadrature(
    problem: &TransportProblem,
    mesh: &Mesh,
    quad_degree: Option<usize>,
) -> Result<SparseSystem> {
    problem.check(mesh)?;
    let rules = rules(problem, quad_degree)?;
    let basis = lagrange(problem.degree)?;
    let nb = basis.len();
    let v = &problem.velocity;
    let vol_tab: Vec<_> = rules.volume.points.iter().map(|&r| basis.eval(r)).collect();
    let coef = CoefficientTable::new(v, &rules.volume.points);

    let volume_blocks: Vec<Vec<(usize, usize, f64)>> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let map = mesh.map(t);
            let jdet = map.det.abs();
            let mut block = vec![0.0; nb * nb];
            for (q, ((_, w), e)) in rules.volume.iter().zip(&vol_tab).enumerate() {
                let beta = coef.beta(v, t, q);
                let mu = coef.mu(v, t, q);
                let wq = w * jdet;
                for j in 0..nb {
                    let g = map.grad(e.grads[j]);
                    let trial = mu * e.values[j] + beta[0] * g[0] + beta[1] * g[1];
                    for i in 0..nb {
                        block[i * nb + j] += wq * trial * e.values[i];
                    }
                }
            }
            let base = t * nb;
            let mut out = Vec::with_capacity(nb * nb);
            for i in 0..nb {
                for j in 0..nb {
                    out.push((base + i, base + j, block[i * nb + j]));
                }
            }
            out
        })
        .collect();

    let edge_blocks: Vec<(Vec<(usize, usize, f64)>, Vec<(usize, f64)>)> = (0..mesh.edges.len())
        .into_par_iter()
        .map(|eid| edge_contribution(problem, mesh, basis, &rules.edge, eid))
        .collect();

    let n = mesh.num_triangles() * nb;
    let mut triplets = Vec::with_capacity(volume_blocks.len() * nb * nb * 4);
    let mut rhs = vec![0.0; n];
    for b in volume_blocks {
        triplets.extend(b);
    }
    for (t, r) in edge_blocks {
        triplets.extend(t);
        for (row, val) in r {
            rhs[row] += val;
        }
    }
    let matrix = CsrMatrix::from_triplets(n, n, triplets)?;
    Ok(SparseSystem {
        matrix,
        rhs,
        degree: problem.degree,
        num_triangles: mesh.num_triangles(),
    })
}

#[allow(clippy::type_complexity)]
fn edge_contribution(
    problem: &TransportProblem,
    mesh: &Mesh,
    basis: &BasisSet,
    rule: &QuadratureRule,
    eid: usize,
) -> (Vec<(usize, usize, f64)>, Vec<(usize, f64)>) {
    let nb = basis.len();
    let edge = &mesh.edges[eid];
    let v = &problem.velocity;
    let n = edge.normal;
    let l = edge.left;
    let mut triplets = Vec::new();
    let mut rhs = Vec::new();
    match edge.right {
        None => {
            let mut block = vec![0.0; nb * nb];
            let mut load = vec![0.0; nb];
            for (s, w) in rule.iter() {
                let x = mesh.edge_point(eid, s[0]);
                let neg = negative_part(beta_dot_n(v, mesh, l, x, n));
                if neg == 0.0 {
                    continue;
                }
                let wq = w * edge.length * neg;
                let phi = basis.values(mesh.map(l).to_reference(x));
                let g0 = (problem.inflow)(x);
                for i in 0..nb {
                    load[i] += wq * g0 * phi[i];
                    for j in 0..nb {
                        block[i * nb + j] += wq * phi[j] * phi[i];
                    }
                }
            }
            for i in 0..nb {
                rhs.push((l * nb + i, load[i]));
                for j in 0..nb {
                    triplets.push((l * nb + i, l * nb + j, block[i * nb + j]));
                }
            }
        }
        Some(r) => {
            // blocks indexed [test side][trial side]
            let mut blocks = [[vec![0.0; nb * nb], vec![0.0; nb * nb]], [vec![0.0; nb * nb], vec![0.0; nb * nb]]];
            for (s, w) in rule.iter() {
                let x = mesh.edge_point(eid, s[0]);
                let bl = beta_dot_n(v, mesh, l, x, n);
                let br = beta_dot_n(v, mesh, r, x, n);
                let bm = 0.5 * (bl + br);
                let pen = problem.penalty * bm.abs();
                let phi = [
                    basis.values(mesh.map(l).to_reference(x)),
                    basis.values(mesh.map(r).to_reference(x)),
                ];
                let coeff = [[-0.5 * bl + pen, 0.5 * bm - pen], [-0.5 * bm - pen, 0.5 * br + pen]];
                let wq = w * edge.length;
                for (test, row) in coeff.iter().enumerate() {
                    for (trial, &c) in row.iter().enumerate() {
                        let blk = &mut blocks[test][trial];
                        for i in 0..nb {
                            for j in 0..nb {
                                blk[i * nb + j] += wq * c * phi[trial][j] * phi[test][i];
                            }
                        }
                    }
                }
            }
            let tri = [l, r];
            for (test, row) in blocks.iter().enumerate() {
                for (trial, blk) in row.iter().enumerate() {
                    for i in 0..nb {
                        for j in 0..nb {
                            triplets.push((tri[test] * nb + i, tri[trial] * nb + j, blk[i * nb + j]));
                        }
                    }
                }
            }
        }
    }
    (triplets, rhs)
}

/// Matrix-free evaluation of `a_h(v, w)` by pointwise quadrature of the
/// bilinear form.
pub fn apply_bilinear(problem: &TransportProblem, mesh: &Mesh, v: &DGField, w: &DGField) -> Result<f64> {
    problem.check(mesh)?;
    for f in [v, w] {
        f.check_mesh(mesh)?;
        if f.degree() != problem.degree {
            return Err(Error::invalid(format!(
                "field degree {} does not match problem degree {}",
                f.degree(),
                problem.degree
            )));
        }
    }
    let rules = rules(problem, None)?;
    let basis = lagrange(problem.degree)?;
    let vel = &problem.velocity;
    let vol_tab: Vec<_> = rules.volume.points.iter().map(|&r| basis.eval(r)).collect();
    let coef = CoefficientTable::new(vel, &rules.volume.points);

    let volume: f64 = (0..mesh.num_triangles())
        .map(|t| {
            let map = mesh.map(t);
            let (cv, cw) = (v.element(t), w.element(t));
            rules
                .volume
                .iter()
                .zip(&vol_tab)
                .enumerate()
                .map(|(q, ((_, wt), e))| {
                    let vv = dot(cv, &e.values);
                    let ww = dot(cw, &e.values);
                    let gref = [
                        e.grads.iter().zip(cv).map(|(g, c)| g[0] * c).sum(),
                        e.grads.iter().zip(cv).map(|(g, c)| g[1] * c).sum(),
                    ];
                    let gv = map.grad(gref);
                    let beta = coef.beta(vel, t, q);
                    wt * map.det.abs() * (coef.mu(vel, t, q) * vv + beta[0] * gv[0] + beta[1] * gv[1]) * ww
                })
                .sum::<f64>()
        })
        .sum();

    let mut edges = 0.0;
    for (eid, edge) in mesh.edges.iter().enumerate() {
        let n = edge.normal;
        let l = edge.left;
        for (s, wt) in rules.edge.iter() {
            let x = mesh.edge_point(eid, s[0]);
            let wq = wt * edge.length;
            let bl = beta_dot_n(vel, mesh, l, x, n);
            let (vl, wl) = (v.eval(mesh, l, x), w.eval(mesh, l, x));
            match edge.right {
                None => edges += wq * negative_part(bl) * vl * wl,
                Some(r) => {
                    let br = beta_dot_n(vel, mesh, r, x, n);
                    let bm = 0.5 * (bl + br);
                    let (vr, wr) = (v.eval(mesh, r, x), w.eval(mesh, r, x));
                    let jump_v = vl - vr;
                    let jump_w = wl - wr;
                    let avg_w = 0.5 * (wl + wr);
                    edges += wq
                        * (-bm * jump_v * avg_w - 0.25 * (bl - br) * (vl * wl + vr * wr)
                            + problem.penalty * bm.abs() * jump_v * jump_w);
                }
            }
        }
    }
    Ok(volume + edges)
}

/// The three nonnegative parts whose sum equals `a_h(w, w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivitySplit {
    /// `eps ||w||^2`.
    pub mass: f64,
    /// `1/2 sum_boundary int |beta . n| w^2`.
    pub boundary: f64,
    /// `sum_interior int penalty |beta . n| [w]^2`.
    pub jumps: f64,
}

impl CoercivitySplit {
    pub fn total(&self) -> f64 {
        self.mass + self.boundary + self.jumps
    }
}

pub fn coercivity_split(problem: &TransportProblem, mesh: &Mesh, w: &DGField) -> Result<CoercivitySplit> {
    problem.check(mesh)?;
    w.check_mesh(mesh)?;
    let rules = rules(problem, None)?;
    let vel = &problem.velocity;
    let mut mass = 0.0;
    for t in 0..mesh.num_triangles() {
        let map = mesh.map(t);
        for (r, wt) in rules.volume.iter() {
            let ww = w.eval_ref(t, *r);
            mass += wt * map.det.abs() * ww * ww;
        }
    }
    let (mut boundary, mut jumps) = (0.0, 0.0);
    for (eid, edge) in mesh.edges.iter().enumerate() {
        for (s, wt) in rules.edge.iter() {
            let x = mesh.edge_point(eid, s[0]);
            let wq = wt * edge.length;
            let bl = beta_dot_n(vel, mesh, edge.left, x, edge.normal);
            let wl = w.eval(mesh, edge.left, x);
            match edge.right {
                None => boundary += 0.5 * wq * bl.abs() * wl * wl,
                Some(r) => {
                    let br = beta_dot_n(vel, mesh, r, x, edge.normal);
                    let jump = wl - w.eval(mesh, r, x);
                    jumps += wq * problem.penalty * (0.5 * (bl + br)).abs() * jump * jump;
                }
            }
        }
    }
    Ok(CoercivitySplit {
        mass: vel.eps * mass,
        boundary,
        jumps,
    })
}

#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub gamma: DGField,
    pub residual: f64,
    pub iterations: usize,
}

/// Solves the assembled system to relative residual `opts.tol`.
pub fn solve(system: &SparseSystem, opts: &SolverOptions) -> Result<TransportSolution> {
    let empty = system.matrix.empty_rows();
    if !empty.is_empty() {
        return Err(Error::invalid(format!(
            "{} structurally empty rows, first {}",
            empty.len(),
            empty[0]
        )));
    }
    let SolveOutcome {
        x,
        residual,
        iterations,
    } = sparse::solve(&system.matrix, &system.rhs, opts)?;
    let gamma = DGField::from_coeffs(system.degree, system.num_triangles, x)?;
    Ok(TransportSolution {
        gamma,
        residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{derive_fields, project_to_dg};
    use crate::mesh::build_structured_mesh;
    use crate::sparse::SolverKind;

    fn constant_velocity(mesh: &Mesh, beta: [f64; 2], eps: f64) -> VelocityField {
        let u = project_to_dg(mesh, 1, |_, x| beta[0] * x[0] + beta[1] * x[1]).unwrap();
        derive_fields(mesh, &u, eps).unwrap()
    }

    #[test]
    fn zero_inflow_gives_zero_rhs() {
        let mesh = build_structured_mesh(3).unwrap();
        let p = TransportProblem::new(constant_velocity(&mesh, [1.0, 0.3], 0.1), Arc::new(|_| 0.0), 100.0, 2).unwrap();
        let s = assemble(&p, &mesh).unwrap();
        assert!(s.rhs.iter().all(|&r| r == 0.0));
        assert!(s.matrix.empty_rows().is_empty());
    }

    #[test]
    fn two_triangle_upwind_stencil() {
        let mesh = build_structured_mesh(1).unwrap();
        let eps = 0.01;
        let pen = 100.0;
        let p = TransportProblem::new(constant_velocity(&mesh, [1.0, 0.0], eps), Arc::new(|_| 1.0), pen, 0).unwrap();
        let s = assemble(&p, &mesh).unwrap();
        // triangle 0 is below the diagonal (outflow through x=1), triangle 1
        // above it (inflow through x=0); the diagonal carries unit flux.
        let expected = [[0.5 * eps + 0.5 + pen, -0.5 - pen], [0.5 - pen, 0.5 * eps + 0.5 + pen]];
        let a = s.matrix.to_dense();
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - expected[i][j]).abs() < 1e-13, "({i},{j}) {} vs {}", a[i][j], expected[i][j]);
            }
        }
        assert!((s.rhs[0]).abs() < 1e-15 && (s.rhs[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn insufficient_quadrature_rejected() {
        let mesh = build_structured_mesh(2).unwrap();
        let p = TransportProblem::new(constant_velocity(&mesh, [1.0, 0.0], 0.1), Arc::new(|_| 1.0), 100.0, 2).unwrap();
        assert!(matches!(
            assemble_with_quadrature(&p, &mesh, Some(2)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn invalid_parameters() {
        let mesh = build_structured_mesh(2).unwrap();
        let v = constant_velocity(&mesh, [1.0, 0.0], 0.1);
        assert!(TransportProblem::new(v.clone(), Arc::new(|_| 1.0), 0.0, 1).is_err());
        assert!(TransportProblem::new(v.clone(), Arc::new(|_| 1.0), 1.0, 7).is_err());
        let mut v0 = v;
        v0.eps = 0.0;
        assert!(TransportProblem::new(v0, Arc::new(|_| 1.0), 1.0, 1).is_err());
    }

    #[test]
    fn constant_transport_with_reaction() {
        // beta = (1, 0), mu = eps: gamma = exp(-eps x) for inflow 1 on x = 0
        let mesh = build_structured_mesh(8).unwrap();
        let eps = 0.5;
        let p = TransportProblem::new(constant_velocity(&mesh, [1.0, 0.0], eps), Arc::new(|_| 1.0), 100.0, 3).unwrap();
        let s = assemble(&p, &mesh).unwrap();
        let sol = solve(&s, &SolverOptions::default()).unwrap();
        for t in 0..mesh.num_triangles() {
            let c = mesh.centroid(t);
            assert!((sol.gamma.eval(&mesh, t, c) - (-eps * c[0]).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn degree_mismatch_rejected() {
        let mesh = build_structured_mesh(2).unwrap();
        let p = TransportProblem::new(constant_velocity(&mesh, [1.0, 0.0], 0.1), Arc::new(|_| 1.0), 100.0, 2).unwrap();
        let a = DGField::zeros(1, mesh.num_triangles()).unwrap();
        assert!(matches!(apply_bilinear(&p, &mesh, &a, &a), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn iterative_path_matches_direct() {
        let mesh = build_structured_mesh(6).unwrap();
        let u = project_to_dg(&mesh, 3, |_, x| (0.5 - x[0] + (x[1] - 0.5).powi(2)).exp()).unwrap();
        let vel = derive_fields(&mesh, &u, 0.01).unwrap();
        let p = TransportProblem::new(vel, Arc::new(|x| x[1] + 1.0), 100.0, 2).unwrap();
        let s = assemble(&p, &mesh).unwrap();
        let d = solve(&s, &SolverOptions { kind: SolverKind::Direct, ..Default::default() }).unwrap();
        let i = solve(&s, &SolverOptions { kind: SolverKind::Iterative, ..Default::default() }).unwrap();
        assert!(i.iterations > 0);
        for (a, b) in d.gamma.coeffs().iter().zip(i.gamma.coeffs()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn gmres_converges_quickly_with_upwind_weight() {
        let mesh = build_structured_mesh(32).unwrap();
        let u = project_to_dg(&mesh, 3, |_, x| (0.5 - x[0] + (x[1] - 0.5).powi(2)).exp()).unwrap();
        let vel = derive_fields(&mesh, &u, 1e-3).unwrap();
        let p = TransportProblem::new(vel, Arc::new(|x| x[1] + 1.0), 0.5, 2).unwrap();
        let s = assemble(&p, &mesh).unwrap();
        let i = solve(&s, &SolverOptions { kind: SolverKind::Iterative, ..Default::default() }).unwrap();
        assert!(i.residual <= 1e-10);
        assert!(i.iterations < 200, "{} iterations", i.iterations);
    }
}

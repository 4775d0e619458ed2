//! Exact conductivity/potential pairs and the forward elliptic solver used to
//! synthesize measurements.

mod cases;
mod elliptic;

pub use cases::{
    manufactured_case, transport_residual, ManufacturedCase, INCLUSION_HI, INCLUSION_LO,
    INCLUSION_VALUE,
};
pub use elliptic::{solve_elliptic, EllipticSolution};

use crate::error::Result;
use crate::mesh::Mesh;
use crate::quadrature::edge_quadrature;

/// `int_Gamma g ds` for the case's Neumann datum, by edge quadrature on `mesh`.
pub fn boundary_flux(case: ManufacturedCase, mesh: &Mesh) -> Result<f64> {
    let rule = edge_quadrature(20)?;
    let mut total = 0.0;
    for (id, e) in mesh.boundary_edges() {
        for (s, w) in rule.iter() {
            total += w * e.length * case.neumann(mesh.edge_point(id, s[0]), e.normal);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::l2_norm;
    use crate::mesh::build_structured_mesh;

    #[test]
    fn peaks_datum_has_zero_mean() {
        let mesh = build_structured_mesh(1).unwrap();
        let flux = boundary_flux(ManufacturedCase::Peaks, &mesh).unwrap();
        assert!(flux.abs() < 1e-12, "{flux}");
        // int_Gamma exp(x1 + x2) ds = 2 (e^2 - 1)
        let rule = edge_quadrature(20).unwrap();
        let mut raw = 0.0;
        for (id, e) in mesh.boundary_edges() {
            for (s, w) in rule.iter() {
                let x = mesh.edge_point(id, s[0]);
                raw += w * e.length * (x[0] + x[1]).exp();
            }
        }
        let e2 = std::f64::consts::E.powi(2);
        assert!((raw - 2.0 * (e2 - 1.0)).abs() < 1e-12);
    }

    fn slope(hs: &[f64], errs: &[f64]) -> f64 {
        let n = hs.len() as f64;
        let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
        num / den
    }

    #[test]
    fn exponential_pair_converges_at_optimal_rate() {
        let case = ManufacturedCase::Exponential;
        for p in 1..=2 {
            let mut hs = Vec::new();
            let mut errs = Vec::new();
            for n in [8, 16, 32] {
                let mesh = build_structured_mesh(n).unwrap();
                let sol = solve_elliptic(&mesh, p, |x| case.sigma(x), |x, nu| case.neumann(x, nu)).unwrap();
                let deg = 2 * p + 6;
                let exact_mean = {
                    let rule = crate::quadrature::triangle_quadrature(deg).unwrap();
                    let mut m = 0.0;
                    for t in 0..mesh.num_triangles() {
                        let map = mesh.map(t);
                        for (r, w) in rule.iter() {
                            m += w * map.det.abs() * case.u(map.to_physical(*r)).unwrap();
                        }
                    }
                    m
                };
                let err = l2_norm(&mesh, deg, |t, x| {
                    sol.field.eval(&mesh, t, x) - (case.u(x).unwrap() - exact_mean)
                })
                .unwrap();
                assert!(sol.mean.abs() < 1e-10);
                hs.push(mesh.h());
                errs.push(err);
            }
            let s = slope(&hs, &errs);
            assert!((s - (p as f64 + 1.0)).abs() < 0.3, "p={p} slope={s} errs={errs:?}");
        }
    }
}

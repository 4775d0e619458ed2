//! Self-check suite behind `dgrecon verify`.

use std::io::BufReader;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{lagrange, MAX_BASIS_DEGREE};
use crate::data::{add_noise, derive_fields, project_to_dg};
use crate::error::Result;
use crate::field::DGField;
use crate::forward::{boundary_flux, transport_residual, ManufacturedCase};
use crate::mesh::build_structured_mesh;
use crate::quadrature::triangle_quadrature;
use crate::transport::{assemble, coercivity_split, TransportProblem};

use super::metrics::{error_halfnorm, rerror};
use super::run::{reconstruct, RunConfig};
use super::sweep::{RunMetrics, SweepRow};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn random_points(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
}

/// Largest relative defect of the coercivity identity over `samples`
/// random fields on Example 1 data.
pub fn coercivity_defect(n: usize, k: usize, samples: usize, seed: u64) -> Result<f64> {
    let mesh = build_structured_mesh(n)?;
    let case = ManufacturedCase::Exponential;
    let u = project_to_dg(&mesh, 3, |_, x| case.u(x).expect("closed form"))?;
    let vel = derive_fields(&mesh, &u, 1e-2)?;
    let problem = TransportProblem::new(vel, Arc::new(|_| 0.0), 100.0, k)?;
    let sys = assemble(&problem, &mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let c: Vec<f64> = (0..sys.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = DGField::from_coeffs(k, mesh.num_triangles(), c)?;
        let a = sys.matrix.bilinear(w.coeffs(), w.coeffs());
        let split = coercivity_split(&problem, &mesh, &w)?.total();
        worst = worst.max((a - split).abs() / a.abs());
    }
    Ok(worst)
}

/// Runs every check; cheap enough for interactive use.
pub fn run_checks() -> Vec<Check> {
    let mut out = Vec::new();

    out.push(check("quadrature exactness up to degree 12", || {
        let mut worst: f64 = 0.0;
        for d in 0..=12 {
            let q = triangle_quadrature(d)?;
            for a in 0..=d as i32 {
                for b in 0..=(d as i32 - a) {
                    let fact = |n: i32| (1..=n).map(f64::from).product::<f64>();
                    let exact = fact(a) * fact(b) / fact(a + b + 2);
                    let v: f64 = q.iter().map(|(p, w)| w * p[0].powi(a) * p[1].powi(b)).sum();
                    worst = worst.max(((v - exact) / exact).abs());
                }
            }
        }
        Ok((worst < 1e-13, format!("max relative error {worst:.2e}")))
    }));

    out.push(check("Lagrange bases interpolate their nodes", || {
        let mut worst: f64 = 0.0;
        for k in 0..=MAX_BASIS_DEGREE {
            let b = lagrange(k)?;
            for (i, node) in b.nodes().iter().enumerate() {
                for (j, v) in b.values(*node).iter().enumerate() {
                    worst = worst.max((v - if i == j { 1.0 } else { 0.0 }).abs());
                }
            }
        }
        Ok((worst < 1e-10, format!("max deviation {worst:.2e}")))
    }));

    out.push(check("Example 1 pair solves the transport equation", || {
        let r = transport_residual(ManufacturedCase::Exponential, &random_points(1000, 1))?;
        Ok((r < 1e-10, format!("max residual {r:.2e}")))
    }));

    out.push(check("Example 2 Neumann datum has zero mean", || {
        let f = boundary_flux(ManufacturedCase::Peaks, &build_structured_mesh(4)?)?;
        Ok((f.abs() < 1e-12, format!("boundary integral {f:.2e}")))
    }));

    out.push(check("Example 4 potential is harmonic", || {
        let c = ManufacturedCase::Inclusion;
        let worst = random_points(1000, 2)
            .iter()
            .map(|&x| c.lap_u(x).expect("closed form").abs())
            .fold(0.0, f64::max);
        Ok((worst < 1e-12, format!("max |lap u| {worst:.2e}")))
    }));

    out.push(check("coercivity identity (k=2, n=16, 100 samples)", || {
        let d = coercivity_defect(16, 2, 100, 3)?;
        Ok((d <= 1e-11, format!("max relative defect {d:.2e}")))
    }));

    out.push(check("projection is idempotent and noise is bounded", || {
        let mesh = build_structured_mesh(6)?;
        let f = project_to_dg(&mesh, 3, |_, x| (x[0] - 0.3 * x[1]).exp())?;
        let g = project_to_dg(&mesh, 3, |t, x| f.eval(&mesh, t, x))?;
        let idem = f.coeffs().iter().zip(g.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let noisy = add_noise(&f, 0.1, 9)?;
        let again = add_noise(&f, 0.1, 9)?;
        let bound = f
            .coeffs()
            .iter()
            .zip(noisy.coeffs())
            .all(|(a, b)| (b - a).abs() <= 0.1 * a.abs() * (1.0 + 1e-15));
        let ok = idem < 1e-13 && bound && noisy.coeffs() == again.coeffs();
        Ok((ok, format!("idempotence {idem:.2e}, bound {bound}")))
    }));

    out.push(check("metrics survive a CSV round trip", || {
        let cfg = RunConfig {
            n: 8,
            data_n: 8,
            k: 2,
            k0: 3,
            ..RunConfig::for_example(1)?
        };
        let r = reconstruct(&cfg)?;
        let mut buf = Vec::new();
        r.gamma.write_csv(&r.mesh, &mut buf)?;
        let (back, _) = DGField::read_csv(BufReader::new(buf.as_slice()))?;
        let exact = |x: [f64; 2]| ManufacturedCase::Exponential.gamma(x);
        let d1 = (error_halfnorm(&r.mesh, exact, &back)? - r.error_half).abs();
        let d2 = (rerror(&r.mesh, exact, &back)? - r.rerror).abs();
        Ok((d1 <= 1e-12 && d2 <= 1e-12, format!("differences {d1:.1e}, {d2:.1e}")))
    }));

    out.push(check("identical configs give identical rows", || {
        let cfg = RunConfig {
            n: 8,
            data_n: 8,
            k: 1,
            ..RunConfig::for_example(3)?
        };
        let row = |r: &super::run::ReconstructionReport| {
            let mut m = RunMetrics::from(r);
            m.assembly_ms = 0.0;
            m.solve_ms = 0.0;
            SweepRow {
                config: cfg.clone(),
                outcome: Ok(m),
            }
            .csv_line()
        };
        let a = row(&reconstruct(&cfg)?);
        let b = row(&reconstruct(&cfg)?);
        Ok((a == b, "timing columns excluded".into()))
    }));

    out.push(check("sigma_h stays above half the true minimum", || {
        let cfg = RunConfig {
            n: 16,
            data_n: 16,
            k: 2,
            k0: 4,
            ..RunConfig::for_example(1)?
        };
        let r = reconstruct(&cfg)?;
        let min_true = (-0.5f64 - 0.25).exp();
        Ok((r.min_sigma >= 0.5 * min_true, format!("min sigma_h {:.4}, min sigma {min_true:.4}", r.min_sigma)))
    }));

    out
}

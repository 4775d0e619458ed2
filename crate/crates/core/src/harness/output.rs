//! Files written by `run` and `sweep`: field dumps, reports, SVG plots.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::field::DGField;
use crate::mesh::Mesh;

use super::run::ReconstructionReport;
use super::sweep::{fit_series, group_series, write_csv, write_slopes, Series, SweepRow};

/// Legacy ASCII VTK with each triangle split into three around its
/// centroid; point data are sampled at the vertices and the centroid of
/// every triangle, so discontinuities are preserved.
pub fn write_fields_vtk<W: Write>(mesh: &Mesh, fields: &[(&str, &DGField)], mut w: W) -> Result<()> {
    for (_, f) in fields {
        f.check_mesh(mesh)?;
    }
    let nt = mesh.num_triangles();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "dgrecon fields")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", 4 * nt)?;
    let refs = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0 / 3.0, 1.0 / 3.0]];
    for t in 0..nt {
        for r in refs {
            let x = mesh.map(t).to_physical(r);
            writeln!(w, "{:.16e} {:.16e} 0", x[0], x[1])?;
        }
    }
    writeln!(w, "CELLS {} {}", 3 * nt, 12 * nt)?;
    for t in 0..nt {
        let b = 4 * t;
        for (a, c) in [(0, 1), (1, 2), (2, 0)] {
            writeln!(w, "3 {} {} {}", b + a, b + c, b + 3)?;
        }
    }
    writeln!(w, "CELL_TYPES {}", 3 * nt)?;
    for _ in 0..3 * nt {
        writeln!(w, "5")?;
    }
    writeln!(w, "POINT_DATA {}", 4 * nt)?;
    for (name, f) in fields {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for t in 0..nt {
            for r in refs {
                writeln!(w, "{:.16e}", f.eval_ref(t, r))?;
            }
        }
    }
    Ok(())
}

/// Human-readable `key = value` summary of a run.
pub fn report_text(r: &ReconstructionReport) -> String {
    let c = &r.config;
    let mut s = String::new();
    let _ = writeln!(s, "example = {}", c.example);
    let _ = writeln!(s, "case = {}", r.case_description);
    let _ = writeln!(s, "n = {}", c.n);
    let _ = writeln!(s, "data_n = {}", c.data_n);
    let _ = writeln!(s, "k = {}", c.k);
    let _ = writeln!(s, "k0 = {}", c.k0);
    let _ = writeln!(s, "eps = {:e}", c.eps);
    let _ = writeln!(s, "delta = {:e}", c.delta);
    let _ = writeln!(s, "seed = {}", c.seed);
    let _ = writeln!(s, "penalty = {:e}", c.penalty);
    let _ = writeln!(s, "tol = {:e}", c.tol);
    let _ = writeln!(s, "h = {:.6}", r.mesh.h());
    let _ = writeln!(s, "error_half = {:.6e}", r.error_half);
    let _ = writeln!(s, "rerror = {:.6e}", r.rerror);
    let _ = writeln!(s, "data_rel_err = {:.6e}", r.data_rel_err);
    let _ = writeln!(s, "sep_dist = {:.6e}", r.sep_dist);
    let _ = writeln!(s, "min_sigma_h = {:.6e}", r.min_sigma);
    let _ = writeln!(s, "assembly_ms = {:.3}", r.assembly_ms);
    let _ = writeln!(s, "solve_ms = {:.3}", r.solve_ms);
    let _ = writeln!(s, "solver_iters = {}", r.solver_iters);
    let _ = writeln!(s, "solver_residual = {:.3e}", r.solver_residual);
    for warn in &r.warnings {
        let _ = writeln!(s, "warning = {warn}");
    }
    s
}

/// Writes `report.txt`, `gamma.csv`, `sigma.csv` and `fields.vtk` into `dir`.
pub fn write_run(dir: &Path, r: &ReconstructionReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.txt"), report_text(r))?;
    r.gamma.write_csv(&r.mesh, BufWriter::new(File::create(dir.join("gamma.csv"))?))?;
    r.sigma.write_csv(&r.mesh, BufWriter::new(File::create(dir.join("sigma.csv"))?))?;
    let case = r.config.case()?;
    let exact = DGField::interpolate(&r.mesh, r.gamma.degree().max(1), |_, x| case.gamma(x))?;
    write_fields_vtk(
        &r.mesh,
        &[("gamma_h", &r.gamma), ("sigma_h", &r.sigma), ("gamma_exact", &exact)],
        BufWriter::new(File::create(dir.join("fields.vtk"))?),
    )?;
    Ok(())
}

/// Writes `sweep.csv`, `slopes.csv`, `errors.txt` (failed rows) and one
/// log-log SVG per metric into `dir`.
pub fn write_sweep(dir: &Path, rows: &[SweepRow]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(rows, BufWriter::new(File::create(dir.join("sweep.csv"))?))?;
    let series = group_series(rows);
    write_slopes(&fit_series(&series), BufWriter::new(File::create(dir.join("slopes.csv"))?))?;
    let mut errors = String::new();
    for (i, r) in rows.iter().enumerate() {
        if let Err(e) = &r.outcome {
            let _ = writeln!(errors, "row {}: {e}", i + 1);
        }
    }
    fs::write(dir.join("errors.txt"), errors)?;
    fs::write(dir.join("error_half.svg"), loglog_svg("Error vs eps + delta", &series, |p| p.1))?;
    fs::write(dir.join("rerror.svg"), loglog_svg("RError vs eps + delta", &series, |p| p.2))?;
    Ok(())
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Self-contained log-log line chart, one polyline per series.
pub fn loglog_svg<F>(title: &str, series: &[Series], y: F) -> String
where
    F: Fn(&(f64, f64, f64)) -> f64,
{
    let (w, h, m) = (640.0, 420.0, 60.0);
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .map(|p| (p.0, y(p)))
                .filter(|(a, b)| *a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite())
                .map(|(a, b)| (a.log10(), b.log10()))
                .collect()
        })
        .collect();
    let all: Vec<(f64, f64)> = pts.iter().flatten().copied().collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, w / 2.0, title);
    if all.is_empty() {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, w / 2.0, h / 2.0);
        svg.push_str("</svg>\n");
        return svg;
    }
    let bound = |f: fn(&(f64, f64)) -> f64| {
        let lo = all.iter().map(f).fold(f64::INFINITY, f64::min).floor();
        let hi = all.iter().map(f).fold(f64::NEG_INFINITY, f64::max).ceil();
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 1.0, hi + 1.0)
        }
    };
    let (x0, x1) = bound(|p| p.0);
    let (y0, y1) = bound(|p| p.1);
    let sx = |v: f64| m + (v - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |v: f64| h - m - (v - y0) / (y1 - y0) * (h - 2.0 * m);
    let _ = writeln!(
        svg,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    for d in x0 as i32..=x1 as i32 {
        let x = sx(d as f64);
        let _ = writeln!(svg, r##"<line x1="{x}" y1="{m}" x2="{x}" y2="{}" stroke="#ddd"/>"##, h - m);
        let _ = writeln!(svg, r#"<text x="{x}" y="{}" text-anchor="middle">1e{d}</text>"#, h - m + 16.0);
    }
    for d in y0 as i32..=y1 as i32 {
        let y = sy(d as f64);
        let _ = writeln!(svg, r##"<line x1="{m}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##, w - m);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">1e{d}</text>"#, m - 4.0, y + 4.0);
    }
    for (i, (s, p)) in series.iter().zip(&pts).enumerate() {
        if p.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let line: Vec<String> = p.iter().map(|(a, b)| format!("{:.2},{:.2}", sx(*a), sy(*b))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        for (a, b) in p {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(*a), sy(*b));
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            m + 8.0,
            m + 16.0 + 14.0 * i as f64,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

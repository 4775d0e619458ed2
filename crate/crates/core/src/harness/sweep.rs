//! Parameter sweeps, CSV tables and log-log slope fits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::run::{reconstruct, ReconstructionReport, RunConfig};

pub const CSV_HEADER: &str = "example,n,data_n,k,k0,eps,delta,seed,penalty,error_half,rerror,data_rel_err,sep_dist,assembly_ms,solve_ms,solver_iters";

/// Scalar outcome of one sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub error_half: f64,
    pub rerror: f64,
    pub data_rel_err: f64,
    pub sep_dist: f64,
    pub assembly_ms: f64,
    pub solve_ms: f64,
    pub solver_iters: usize,
}

impl From<&ReconstructionReport> for RunMetrics {
    fn from(r: &ReconstructionReport) -> Self {
        Self {
            error_half: r.error_half,
            rerror: r.rerror,
            data_rel_err: r.data_rel_err,
            sep_dist: r.sep_dist,
            assembly_ms: r.assembly_ms,
            solve_ms: r.solve_ms,
            solver_iters: r.solver_iters,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub config: RunConfig,
    /// Metrics, or the error message of a failed run.
    pub outcome: std::result::Result<RunMetrics, String>,
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        let c = &self.config;
        let mut s = format!(
            "{},{},{},{},{},{:e},{:e},{},{:e}",
            c.example, c.n, c.data_n, c.k, c.k0, c.eps, c.delta, c.seed, c.penalty
        );
        match &self.outcome {
            Ok(m) => {
                let _ = write!(
                    s,
                    ",{:.12e},{:.12e},{:.6e},{:.6e},{:.3},{:.3},{}",
                    m.error_half, m.rerror, m.data_rel_err, m.sep_dist, m.assembly_ms, m.solve_ms, m.solver_iters
                );
            }
            Err(_) => s.push_str(",NaN,NaN,NaN,NaN,NaN,NaN,0"),
        }
        s
    }
}

/// Runs every configuration, in parallel, returning rows in input order.
/// Failed runs are kept as rows carrying their error.
pub fn run_sweep(configs: &[RunConfig]) -> Vec<SweepRow> {
    configs
        .par_iter()
        .map(|c| SweepRow {
            config: c.clone(),
            outcome: reconstruct(c).map(|r| RunMetrics::from(&r)).map_err(|e| e.to_string()),
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

/// Ordinary least squares fit of `log10 y` against `log10 x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("x and y lengths differ"));
    }
    if xs.len() < 3 {
        return Err(Error::invalid(format!("slope fit needs at least 3 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("slope fit needs positive finite data"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.log10()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("slope fit needs distinct x values"));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        r2,
        points: lx.len(),
    })
}

/// Rows sharing every parameter except `eps` and `delta`.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    /// `(eps + delta, error_half, rerror)`, sorted by the first entry.
    pub points: Vec<(f64, f64, f64)>,
}

pub fn group_series(rows: &[SweepRow]) -> Vec<Series> {
    let mut groups: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for r in rows {
        let c = &r.config;
        let label = format!(
            "example={} n={} data_n={} k={} k0={} seed={} penalty={:e}",
            c.example, c.n, c.data_n, c.k, c.k0, c.seed, c.penalty
        );
        let entry = groups.entry(label).or_default();
        if let Ok(m) = &r.outcome {
            entry.push((c.eps + c.delta, m.error_half, m.rerror));
        }
    }
    groups
        .into_iter()
        .map(|(label, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { label, points }
        })
        .collect()
}

/// Slope fits of both metrics for each series with enough points.
pub fn fit_series(series: &[Series]) -> Vec<(String, &'static str, SlopeFit)> {
    let mut out = Vec::new();
    for s in series {
        let x: Vec<f64> = s.points.iter().map(|p| p.0).collect();
        for (name, col) in [("error_half", 1usize), ("rerror", 2)] {
            let y: Vec<f64> = s.points.iter().map(|p| if col == 1 { p.1 } else { p.2 }).collect();
            if let Ok(fit) = loglog_fit(&x, &y) {
                out.push((s.label.clone(), name, fit));
            }
        }
    }
    out
}

pub fn write_slopes<W: Write>(fits: &[(String, &'static str, SlopeFit)], mut w: W) -> Result<()> {
    writeln!(w, "series,metric,slope,intercept,r2,points")?;
    for (label, metric, f) in fits {
        writeln!(w, "\"{label}\",{metric},{:.6},{:.6},{:.6},{}", f.slope, f.intercept, f.r2, f.points)?;
    }
    Ok(())
}

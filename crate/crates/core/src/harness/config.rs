//! Flat `key = value` sweep configuration files.
//!
//! ```text
//! # Example 1 regularization study
//! example = 1
//! k = 3
//! eps = 1e-1, 1e-2, 1e-3
//! ```
//!
//! Every key accepts a comma-separated list; the sweep runs the cartesian
//! product. Keys left out take the per-example defaults, and `data_n`
//! defaults to `n` when only `n` is given.

use std::str::FromStr;

use crate::error::{Error, Result};

use super::run::RunConfig;

pub const KEYS: [&str; 10] = ["example", "n", "data_n", "k", "k0", "eps", "delta", "seed", "penalty", "tol"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepSpec {
    pub example: Vec<u32>,
    pub n: Vec<usize>,
    pub data_n: Vec<usize>,
    pub k: Vec<usize>,
    pub k0: Vec<usize>,
    pub eps: Vec<f64>,
    pub delta: Vec<f64>,
    pub seed: Vec<u64>,
    pub penalty: Vec<f64>,
    pub tol: Vec<f64>,
}

fn parse_list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = value.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(Error::Parse {
            line,
            message: format!("empty entry in list for `{key}`"),
        });
    }
    items
        .into_iter()
        .map(|s| {
            s.parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse `{s}` for `{key}`"),
            })
        })
        .collect()
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = SweepSpec::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown key `{key}`"),
                });
            }
            if seen.contains(&key) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
            seen.push(key);
            match key {
                "example" => spec.example = parse_list(line, key, value)?,
                "n" => spec.n = parse_list(line, key, value)?,
                "data_n" => spec.data_n = parse_list(line, key, value)?,
                "k" => spec.k = parse_list(line, key, value)?,
                "k0" => spec.k0 = parse_list(line, key, value)?,
                "eps" => spec.eps = parse_list(line, key, value)?,
                "delta" => spec.delta = parse_list(line, key, value)?,
                "seed" => spec.seed = parse_list(line, key, value)?,
                "penalty" => spec.penalty = parse_list(line, key, value)?,
                "tol" => spec.tol = parse_list(line, key, value)?,
                _ => unreachable!(),
            }
        }
        if spec.example.is_empty() {
            return Err(Error::Parse {
                line: 0,
                message: "missing required key `example`".into(),
            });
        }
        Ok(spec)
    }

    /// Cartesian product in a fixed order: `example` varies slowest and
    /// `tol` fastest, following [`KEYS`].
    pub fn expand(&self) -> Result<Vec<RunConfig>> {
        fn or<T: Copy>(v: &[T], d: T) -> Vec<T> {
            if v.is_empty() {
                vec![d]
            } else {
                v.to_vec()
            }
        }
        let mut out = Vec::new();
        for &example in &self.example {
            let d = RunConfig::for_example(example)?;
            for &n in &or(&self.n, d.n) {
                let data_default = if self.n.is_empty() { d.data_n } else { n };
                for &data_n in &or(&self.data_n, data_default) {
                    for &k in &or(&self.k, d.k) {
                        for &k0 in &or(&self.k0, d.k0) {
                            for &eps in &or(&self.eps, d.eps) {
                                for &delta in &or(&self.delta, d.delta) {
                                    for &seed in &or(&self.seed, d.seed) {
                                        for &penalty in &or(&self.penalty, d.penalty) {
                                            for &tol in &or(&self.tol, d.tol) {
                                                out.push(RunConfig {
                                                    example,
                                                    n,
                                                    data_n,
                                                    k,
                                                    k0,
                                                    eps,
                                                    delta,
                                                    seed,
                                                    penalty,
                                                    tol,
                                                    out: None,
                                                });
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

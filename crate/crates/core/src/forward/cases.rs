use std::fmt;

use crate::error::{Error, Result};

/// Inclusion of the piecewise-constant example: `sigma = INCLUSION_VALUE` on
/// `[INCLUSION_LO, INCLUSION_HI]^2`, `1` elsewhere.
pub const INCLUSION_LO: f64 = 0.375;
pub const INCLUSION_HI: f64 = 0.625;
pub const INCLUSION_VALUE: f64 = 2.0;

/// The four reconstruction examples on the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManufacturedCase {
    /// `u = exp(0.5 - x1 + (x2 - 0.5)^2)`, `sigma = exp(3 x1 - 0.5 - (x2 - 0.5)^2)`.
    Exponential,
    /// Peaks-type conductivity with Neumann datum `exp(x1 + x2) - (e^2 - 1)/2`;
    /// no closed-form potential.
    Peaks,
    /// Same conductivity and datum as [`ManufacturedCase::Peaks`], used with
    /// noisy measurements.
    NoisyPeaks,
    /// Piecewise-constant conductivity with `u = cos(x1 - 0.5) exp(x2)`.
    Inclusion,
}

pub fn manufactured_case(id: u32) -> Result<ManufacturedCase> {
    match id {
        1 => Ok(ManufacturedCase::Exponential),
        2 => Ok(ManufacturedCase::Peaks),
        3 => Ok(ManufacturedCase::NoisyPeaks),
        4 => Ok(ManufacturedCase::Inclusion),
        _ => Err(Error::invalid(format!("unknown example id {id}; expected 1..=4"))),
    }
}

fn peaks(x1: f64, x2: f64) -> f64 {
    1.0 + 0.3 * (1.0 - x1).powi(2) * (-x1 * x1 - (x2 + 1.0).powi(2)).exp()
        - (0.2 * x1 - x1.powi(3) - x2.powi(5)) * (-x1 * x1 - x2 * x2).exp()
        - (-(x1 + 1.0).powi(2) - x2 * x2).exp() / 30.0
}

fn in_inclusion(x: [f64; 2]) -> bool {
    (INCLUSION_LO..=INCLUSION_HI).contains(&x[0]) && (INCLUSION_LO..=INCLUSION_HI).contains(&x[1])
}

impl ManufacturedCase {
    pub fn id(self) -> u32 {
        match self {
            ManufacturedCase::Exponential => 1,
            ManufacturedCase::Peaks => 2,
            ManufacturedCase::NoisyPeaks => 3,
            ManufacturedCase::Inclusion => 4,
        }
    }

    pub fn sigma(self, x: [f64; 2]) -> f64 {
        match self {
            ManufacturedCase::Exponential => (3.0 * x[0] - 0.5 - (x[1] - 0.5).powi(2)).exp(),
            ManufacturedCase::Peaks | ManufacturedCase::NoisyPeaks => {
                peaks(3.0 * (2.0 * x[0] - 1.0), 3.0 * (2.0 * x[1] - 1.0))
            }
            ManufacturedCase::Inclusion => {
                if in_inclusion(x) {
                    INCLUSION_VALUE
                } else {
                    1.0
                }
            }
        }
    }

    /// `sqrt(sigma)`.
    pub fn gamma(self, x: [f64; 2]) -> f64 {
        match self {
            ManufacturedCase::Exponential => (1.5 * x[0] - 0.25 - 0.5 * (x[1] - 0.5).powi(2)).exp(),
            _ => self.sigma(x).sqrt(),
        }
    }

    pub fn has_closed_form(self) -> bool {
        matches!(self, ManufacturedCase::Exponential | ManufacturedCase::Inclusion)
    }

    pub fn u(self, x: [f64; 2]) -> Option<f64> {
        match self {
            ManufacturedCase::Exponential => Some((0.5 - x[0] + (x[1] - 0.5).powi(2)).exp()),
            ManufacturedCase::Inclusion => Some((x[0] - 0.5).cos() * x[1].exp()),
            _ => None,
        }
    }

    pub fn grad_u(self, x: [f64; 2]) -> Option<[f64; 2]> {
        match self {
            ManufacturedCase::Exponential => {
                let u = self.u(x)?;
                Some([-u, 2.0 * (x[1] - 0.5) * u])
            }
            ManufacturedCase::Inclusion => {
                let ey = x[1].exp();
                Some([-(x[0] - 0.5).sin() * ey, (x[0] - 0.5).cos() * ey])
            }
            _ => None,
        }
    }

    pub fn lap_u(self, x: [f64; 2]) -> Option<f64> {
        match self {
            ManufacturedCase::Exponential => {
                let u = self.u(x)?;
                Some(u * (3.0 + 4.0 * (x[1] - 0.5).powi(2)))
            }
            ManufacturedCase::Inclusion => Some(0.0),
            _ => None,
        }
    }

    /// Gradient of `gamma`. Closed form for the exponential case; central
    /// differences with step `1e-6` otherwise, which stay finite but become
    /// large across conductivity jumps.
    pub fn grad_gamma(self, x: [f64; 2]) -> [f64; 2] {
        match self {
            ManufacturedCase::Exponential => {
                let g = self.gamma(x);
                [1.5 * g, -(x[1] - 0.5) * g]
            }
            _ => {
                let h = 1e-6;
                [
                    (self.gamma([x[0] + h, x[1]]) - self.gamma([x[0] - h, x[1]])) / (2.0 * h),
                    (self.gamma([x[0], x[1] + h]) - self.gamma([x[0], x[1] - h])) / (2.0 * h),
                ]
            }
        }
    }

    /// Neumann datum `g = sigma du/dnu` at boundary point `x` with outward
    /// normal `normal`.
    pub fn neumann(self, x: [f64; 2], normal: [f64; 2]) -> f64 {
        match self {
            ManufacturedCase::Peaks | ManufacturedCase::NoisyPeaks => {
                let e2 = std::f64::consts::E * std::f64::consts::E;
                (x[0] + x[1]).exp() - (e2 - 1.0) / 2.0
            }
            _ => {
                let g = self.grad_u(x).expect("closed-form case");
                self.sigma(x) * (g[0] * normal[0] + g[1] * normal[1])
            }
        }
    }

    /// Short description recorded in reports.
    pub fn description(self) -> &'static str {
        match self {
            ManufacturedCase::Exponential => "u=exp(0.5-x1+(x2-0.5)^2), sigma=exp(3x1-0.5-(x2-0.5)^2)",
            ManufacturedCase::Peaks => "peaks conductivity, g=exp(x1+x2)-(e^2-1)/2",
            ManufacturedCase::NoisyPeaks => "peaks conductivity from noisy data, g=exp(x1+x2)-(e^2-1)/2",
            ManufacturedCase::Inclusion => {
                "u=cos(x1-0.5)exp(x2); stand-in sigma=1 with sigma=2 on [0.375,0.625]^2"
            }
        }
    }
}

impl fmt::Display for ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "example {}", self.id())
    }
}

/// Maximum of `|2 grad(gamma) . grad(u) + gamma lap(u)|` over `points`.
pub fn transport_residual(case: ManufacturedCase, points: &[[f64; 2]]) -> Result<f64> {
    if !case.has_closed_form() {
        return Err(Error::Unsupported(format!(
            "{case} has no closed-form potential"
        )));
    }
    let mut worst: f64 = 0.0;
    for &x in points {
        let gu = case.grad_u(x).expect("closed form");
        let lap = case.lap_u(x).expect("closed form");
        let gg = case.grad_gamma(x);
        let r = 2.0 * (gg[0] * gu[0] + gg[1] * gu[1]) + case.gamma(x) * lap;
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

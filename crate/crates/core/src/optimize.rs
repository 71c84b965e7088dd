//! Extracted-energy objective `E(κ) = 2 sin²δ·h_C`, grid sweeps and a
//! golden-section maximizer over κ.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QetError, Result};
use crate::model::{derive_constants, QetParams};

const INV_PHI: f64 = 0.618_033_988_749_894_8;
pub const MIN_TOL: f64 = 1e-10;
pub const DEFAULT_BRACKET: (f64, f64) = (0.05, 2.0);

pub fn extracted_energy(params: &QetParams) -> Result<f64> {
    Ok(derive_constants(params)?.transfer_energy())
}

fn objective(h_a: f64, h_b: f64, kappa: f64) -> Result<f64> {
    extracted_energy(&QetParams::new(h_a, h_b, kappa)?)
}

fn default_h_a() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub kappa_steps: usize,
    #[serde(rename = "h_B_values")]
    pub h_b_values: Vec<f64>,
    #[serde(rename = "h_A", default = "default_h_a")]
    pub h_a: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            kappa_min: DEFAULT_BRACKET.0,
            kappa_max: DEFAULT_BRACKET.1,
            kappa_steps: 200,
            h_b_values: vec![1e-3, 1e-2, 1e-1],
            h_a: 1.0,
        }
    }
}

impl SweepSpec {
    /// A range with `kappa_min == kappa_max` and one step is a single point.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(QetError::Domain(format!("{name} = {v} must be positive")))
            }
        };
        positive("kappa_min", self.kappa_min)?;
        positive("kappa_max", self.kappa_max)?;
        positive("h_A", self.h_a)?;
        if self.h_b_values.is_empty() {
            return Err(QetError::Argument("h_B_values is empty".into()));
        }
        for &h in &self.h_b_values {
            positive("h_B", h)?;
        }
        let single = self.kappa_min == self.kappa_max && self.kappa_steps == 1;
        if !single {
            if self.kappa_min >= self.kappa_max {
                return Err(QetError::Argument(format!(
                    "kappa_min = {} must be below kappa_max = {}",
                    self.kappa_min, self.kappa_max
                )));
            }
            if self.kappa_steps < 2 {
                return Err(QetError::Argument("kappa_steps must be at least 2".into()));
            }
        }
        Ok(())
    }

    pub fn kappas(&self) -> Vec<f64> {
        if self.kappa_steps == 1 {
            return vec![self.kappa_min];
        }
        let step = (self.kappa_max - self.kappa_min) / (self.kappa_steps - 1) as f64;
        (0..self.kappa_steps)
            .map(|i| {
                if i + 1 == self.kappa_steps {
                    self.kappa_max
                } else {
                    self.kappa_min + i as f64 * step
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kappa: f64,
    #[serde(rename = "h_B")]
    pub h_b: f64,
    pub energy: f64,
}

/// One row per `(h_B, κ)`, grouped by `h_B` in the given order, κ ascending.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let kappas = spec.kappas();
    let points: Vec<(f64, f64)> = spec
        .h_b_values
        .iter()
        .flat_map(|&h_b| kappas.iter().map(move |&k| (h_b, k)))
        .collect();
    points
        .into_par_iter()
        .map(|(h_b, kappa)| {
            Ok(SweepRow {
                kappa,
                h_b,
                energy: objective(spec.h_a, h_b, kappa)?,
            })
        })
        .collect()
}

/// Number of sign changes of the forward differences of `values` (exact
/// zeros skipped). A unimodal sequence has exactly one.
pub fn derivative_sign_changes(values: &[f64]) -> usize {
    let signs: Vec<bool> = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d != 0.0)
        .map(|d| d > 0.0)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport {
    pub kappa_star: f64,
    pub e_star: f64,
    pub iterations: u32,
    pub bracket: (f64, f64),
}

/// Golden-section maximization of `E(κ)` at fixed `h_A`, `h_B`. The bracket
/// must pass a three-point test: the better golden interior point beats both
/// endpoints.
pub fn maximize_kappa(h_a: f64, h_b: f64, bracket: (f64, f64), tol: f64) -> Result<OptimumReport> {
    if !(tol >= MIN_TOL) {
        return Err(QetError::Argument(format!("tol = {tol} below {MIN_TOL}")));
    }
    let (mut a, mut b) = bracket;
    if !(a > 0.0 && a < b && b.is_finite()) {
        return Err(QetError::Bracketing(format!("invalid bracket ({a}, {b})")));
    }
    let f = |k: f64| objective(h_a, h_b, k);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    let interior = fc.max(fd);
    if !(interior > f(a)? && interior > f(b)?) {
        return Err(QetError::Bracketing(format!(
            "no interior maximum in ({}, {})",
            bracket.0, bracket.1
        )));
    }
    let mut iterations = 0;
    while b - a > tol {
        iterations += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let kappa_star = 0.5 * (a + b);
    Ok(OptimumReport {
        kappa_star,
        e_star: f(kappa_star)?,
        iterations,
        bracket,
    })
}

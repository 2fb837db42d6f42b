//! Displacement and tail diagnostics over a schedule of lengths.
//!
//! For every `n` the scan reports `E|γ(n)|` (Euclidean norm), the exponent
//! `a_n = (1/n) log E|γ(n)|` and the tails `P(x(γ(n)) > v n)` for a grid of
//! `v`. Short lengths are computed exactly from the enumerated law, longer ones
//! by Metropolis sampling.

use serde::{Deserialize, Serialize};

use super::exact::endpoint_law;
use super::mcmc::{mcmc_sample, McmcConfig};
use crate::lattice::LatticeVector;
use crate::model::Model;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Exact when the enumeration fits in the budget, sampled otherwise.
    Auto,
    Exact,
    Mcmc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallisticConfig {
    pub schedule: Vec<usize>,
    pub velocities: Vec<f64>,
    pub mode: SamplingMode,
    /// Node budget for exact evaluation; `Auto` falls back to sampling above it.
    pub exact_budget: u64,
    /// Template for sampled lengths; `n` is overwritten per entry.
    pub mcmc: McmcConfig,
}

impl Default for BallisticConfig {
    fn default() -> Self {
        BallisticConfig {
            schedule: vec![4, 8, 12],
            velocities: vec![0.1, 0.25, 0.5],
            mode: SamplingMode::Auto,
            exact_budget: 50_000_000,
            mcmc: McmcConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub v: f64,
    pub probability: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallisticRow {
    pub n: usize,
    pub mode: SamplingMode,
    pub mean_norm: f64,
    pub mean_norm_se: f64,
    /// `(1/n) log E|γ(n)|`.
    pub exponent: f64,
    pub tails: Vec<TailEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallisticScanReport {
    pub rows: Vec<BallisticRow>,
    /// Every exponent is negative.
    pub exponents_negative: bool,
    /// The exponents do not increase along the schedule.
    pub exponents_non_increasing: bool,
}

fn norm(v: &LatticeVector) -> f64 {
    v.coords()
        .iter()
        .map(|&c| (c as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Crude node count of the full walk tree, used to choose the mode.
fn tree_size(model: &Model, n: usize) -> f64 {
    let b = model.steps().len() as f64;
    (0..=n).map(|k| b.powi(k as i32)).sum()
}

fn exact_row(model: &Model, n: usize, cfg: &BallisticConfig) -> Result<BallisticRow> {
    let law = endpoint_law(model, n, cfg.exact_budget)?;
    let mean = law.expect(norm);
    let tails = cfg
        .velocities
        .iter()
        .map(|&v| TailEstimate {
            v,
            probability: law.expect(|e| f64::from(e.x() as f64 > v * n as f64)),
            standard_error: 0.0,
        })
        .collect();
    Ok(BallisticRow {
        n,
        mode: SamplingMode::Exact,
        mean_norm: mean,
        mean_norm_se: 0.0,
        exponent: mean.ln() / n as f64,
        tails,
    })
}

fn sampled_row(model: &Model, n: usize, cfg: &BallisticConfig) -> Result<BallisticRow> {
    let mc = McmcConfig {
        n,
        ..cfg.mcmc.clone()
    };
    let run = mcmc_sample(model, &mc)?;
    let (mean, se) = run.estimate(norm);
    let tails = cfg
        .velocities
        .iter()
        .map(|&v| {
            let (p, se) = run.estimate(|e| f64::from(e.x() as f64 > v * n as f64));
            TailEstimate {
                v,
                probability: p,
                standard_error: se,
            }
        })
        .collect();
    Ok(BallisticRow {
        n,
        mode: SamplingMode::Mcmc,
        mean_norm: mean,
        mean_norm_se: se,
        exponent: mean.ln() / n as f64,
        tails,
    })
}

pub fn ballistic_scan(model: &Model, cfg: &BallisticConfig) -> Result<BallisticScanReport> {
    if cfg.schedule.contains(&0) {
        return Err(Error::InvalidArgument(
            "schedule lengths must be positive".into(),
        ));
    }
    let rows = cfg
        .schedule
        .iter()
        .map(|&n| {
            let exact = match cfg.mode {
                SamplingMode::Exact => true,
                SamplingMode::Mcmc => false,
                SamplingMode::Auto => tree_size(model, n) <= cfg.exact_budget as f64,
            };
            if exact {
                exact_row(model, n, cfg)
            } else {
                sampled_row(model, n, cfg)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BallisticScanReport {
        exponents_negative: rows.iter().all(|r| r.exponent < 0.0),
        exponents_non_increasing: rows.windows(2).all(|w| w[1].exponent <= w[0].exponent),
        rows,
    })
}

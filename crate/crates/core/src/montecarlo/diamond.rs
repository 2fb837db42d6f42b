//! Density of diamond points among the renewal points of the i.i.d.
//! irreducible-bridge process.
//!
//! A renewal point `r` counts as a diamond point at window `w` when every
//! point with index in `[r − w, r + w]` lies in the double cone around it. The
//! evaluated renewal points are those of the first `pieces` pieces; the
//! trajectory is extended by `w` further pieces so every forward window is
//! complete. For a fixed seed the estimate can only decrease as `w` grows.

use serde::{Deserialize, Serialize};

use super::ibprocess::{simulate_ib_process, IbLibrary};
use crate::decompose::cone_holds_within;
use crate::numeric::batch_means;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiamondDensityConfig {
    pub pieces: usize,
    /// Half-width of the cone check, in steps.
    pub window: usize,
    pub seed: u64,
    pub batches: usize,
}

impl Default for DiamondDensityConfig {
    fn default() -> Self {
        DiamondDensityConfig {
            pieces: 10_000,
            window: 10,
            seed: 0,
            batches: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiamondDensity {
    pub window: usize,
    pub evaluated: usize,
    pub diamonds: usize,
    pub density: f64,
    pub standard_error: f64,
    /// `density − 1.96 · standard_error > 0`.
    pub positive_at_95: bool,
}

pub fn diamond_density_estimate(
    lib: &IbLibrary,
    cfg: &DiamondDensityConfig,
) -> Result<DiamondDensity> {
    if cfg.pieces == 0 {
        return Err(Error::InvalidArgument(
            "at least one piece is needed".into(),
        ));
    }
    if lib.pieces[0].dim() < 2 {
        return Err(Error::InvalidArgument(
            "diamond points need two coordinates".into(),
        ));
    }
    let t = simulate_ib_process(lib, cfg.pieces + cfg.window, cfg.seed);
    let indicators: Vec<f64> = t.renewal_times[..cfg.pieces]
        .iter()
        .map(|&r| {
            let lo = r.saturating_sub(cfg.window);
            f64::from(u8::from(cone_holds_within(&t.walk, r, lo, r + cfg.window)))
        })
        .collect();
    let diamonds = indicators.iter().filter(|&&v| v > 0.0).count();
    let (density, se) = batch_means(&indicators, cfg.batches);
    Ok(DiamondDensity {
        window: cfg.window,
        evaluated: indicators.len(),
        diamonds,
        density,
        standard_error: se,
        positive_at_95: density - 1.96 * se > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Model, Potential};

    #[test]
    fn density_decreases_with_the_window() {
        let model = Model::nearest_neighbor(2, Potential::saw()).unwrap();
        let lib = IbLibrary::build(&model, 6, None, u64::MAX).unwrap();
        let mut last = f64::INFINITY;
        for window in [0, 1, 2, 4, 8] {
            let cfg = DiamondDensityConfig {
                pieces: 2000,
                window,
                seed: 4,
                batches: 20,
            };
            let d = diamond_density_estimate(&lib, &cfg).unwrap();
            assert!(d.density <= last);
            last = d.density;
        }
    }
}

//! The renewal process built from i.i.d. irreducible bridges.
//!
//! Irreducible bridges up to a truncation length `L` are enumerated once and
//! drawn with probability `∝ σ(η) e^{−λ|η|}`, renormalised over the library.
//! The mass lost to truncation is reported as `1 − S_L(λ)`.

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use super::stream_rng;
use crate::decompose::has_renewal_xs;
use crate::enumerate::{
    enumerate_all, kesten_partial_sum, lambda_bracket, Budget, DfsState, Engine, LambdaBracket,
};
use crate::lattice::Walk;
use crate::model::Model;
use crate::numeric::{batch_means, NeumaierSum};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IbProcessConfig {
    pub truncation: usize,
    /// Defaults to the upper end of the enumerated λ bracket.
    pub lambda: Option<f64>,
    pub pieces: usize,
    pub seed: u64,
}

impl Default for IbProcessConfig {
    fn default() -> Self {
        IbProcessConfig {
            truncation: 8,
            lambda: None,
            pieces: 1000,
            seed: 0,
        }
    }
}

/// The enumerated irreducible bridges with their sampling probabilities.
#[derive(Debug, Clone)]
pub struct IbLibrary {
    pub truncation: usize,
    pub lambda: f64,
    pub bracket: LambdaBracket,
    /// `S_L(λ)` for the chosen λ.
    pub kesten_sum: f64,
    /// `1 − S_L(λ_upper)`.
    pub truncation_gap: f64,
    pub pieces: Vec<Walk>,
    pub probabilities: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl IbLibrary {
    pub fn build(
        model: &Model,
        truncation: usize,
        lambda: Option<f64>,
        budget: u64,
    ) -> Result<IbLibrary> {
        if truncation == 0 {
            return Err(Error::InvalidArgument("truncation must be positive".into()));
        }
        let report = enumerate_all(model, truncation)?;
        let bracket = lambda_bracket(&report)?;
        let lambda = lambda.unwrap_or(bracket.upper);

        let mut pieces = Vec::new();
        let mut weights = Vec::new();
        let mut scratch = Vec::new();
        let set = model.steps();
        let mut visitor = |s: &DfsState<'_>| {
            let d = s.depth;
            if d == 0 || s.min_x_after_start <= 0 || s.max_x_after_start > s.xs[d] {
                return;
            }
            if has_renewal_xs(s.xs, &mut scratch) {
                return;
            }
            let steps: Vec<&[i32]> = s.steps.iter().map(|&k| set.steps()[k].coords()).collect();
            pieces.push(Walk::from_steps(s.dim, &steps).expect("dim"));
            weights.push((s.log_weight - lambda * d as f64).exp());
        };
        Engine::new(model, truncation).run(&mut visitor, &Budget::new(budget))?;
        let total = weights.iter().copied().collect::<NeumaierSum>().value();
        if pieces.is_empty() || !(total > 0.0) {
            return Err(Error::EmptyTruncation);
        }
        let probabilities: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let sampler = WeightedIndex::new(&probabilities).map_err(|_| Error::EmptyTruncation)?;
        Ok(IbLibrary {
            truncation,
            lambda,
            kesten_sum: kesten_partial_sum(&report, lambda),
            truncation_gap: 1.0 - kesten_partial_sum(&report, bracket.upper),
            bracket,
            pieces,
            probabilities,
            sampler,
        })
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Mean piece length under the sampling law.
    pub fn mean_length(&self) -> f64 {
        self.pieces
            .iter()
            .zip(&self.probabilities)
            .map(|(w, p)| p * w.len() as f64)
            .collect::<NeumaierSum>()
            .value()
    }
}

/// A concatenation `η_1 ∘ η_2 ∘ …` with its renewal times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbTrajectory {
    pub walk: Walk,
    /// Library indices of the pieces, in order.
    pub piece_indices: Vec<usize>,
    /// Cumulative end times `r_1 < r_2 < …` of the pieces.
    pub renewal_times: Vec<usize>,
}

impl IbTrajectory {
    fn from_pieces(lib: &IbLibrary, indices: Vec<usize>, dim: usize) -> IbTrajectory {
        let mut walk = Walk::empty(dim);
        let mut renewal_times = Vec::with_capacity(indices.len());
        for &k in &indices {
            walk = walk.concatenate(&lib.pieces[k]);
            renewal_times.push(walk.len());
        }
        IbTrajectory {
            walk,
            piece_indices: indices,
            renewal_times,
        }
    }

    /// The process seen from its first renewal point: drop the first piece.
    pub fn shift(&self, lib: &IbLibrary) -> IbTrajectory {
        let indices = self.piece_indices.iter().skip(1).copied().collect();
        IbTrajectory::from_pieces(lib, indices, self.walk.dim())
    }

    pub fn piece_lengths(&self) -> Vec<usize> {
        let mut prev = 0;
        self.renewal_times
            .iter()
            .map(|&r| {
                let len = r - prev;
                prev = r;
                len
            })
            .collect()
    }

    /// Per-piece displacement statistics.
    pub fn drift(&self, batches: usize) -> DriftEstimate {
        let mut dx = Vec::with_capacity(self.renewal_times.len());
        let mut dy = Vec::with_capacity(self.renewal_times.len());
        let mut prev = 0;
        for &r in &self.renewal_times {
            dx.push((self.walk.x(r) - self.walk.x(prev)) as f64);
            dy.push(if self.walk.dim() > 1 {
                (self.walk.y(r) - self.walk.y(prev)) as f64
            } else {
                0.0
            });
            prev = r;
        }
        let lengths: Vec<f64> = self.piece_lengths().iter().map(|&l| l as f64).collect();
        let (mean_dx, se_dx) = batch_means(&dx, batches);
        let (mean_dy, se_dy) = batch_means(&dy, batches);
        let (mean_length, se_length) = batch_means(&lengths, batches);
        DriftEstimate {
            pieces: dx.len(),
            mean_dx,
            se_dx,
            mean_dy,
            se_dy,
            mean_length,
            se_length,
            length_lag1_correlation: lag1(&lengths),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    pub pieces: usize,
    pub mean_dx: f64,
    pub se_dx: f64,
    pub mean_dy: f64,
    pub se_dy: f64,
    pub mean_length: f64,
    pub se_length: f64,
    /// Sample lag-one autocorrelation of piece lengths; near zero for i.i.d.
    /// pieces.
    pub length_lag1_correlation: f64,
}

fn lag1(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 3 {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = values
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum();
    cov / var
}

/// Draws `pieces` i.i.d. pieces from the library (stream 0 of `seed`).
pub fn simulate_ib_process(lib: &IbLibrary, pieces: usize, seed: u64) -> IbTrajectory {
    let mut rng = stream_rng(seed, 0);
    let indices = (0..pieces).map(|_| lib.sampler.sample(&mut rng)).collect();
    let dim = lib.pieces[0].dim();
    IbTrajectory::from_pieces(lib, indices, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::{irreducible_pieces, is_bridge, renewal_times};
    use crate::model::Potential;

    fn lib() -> IbLibrary {
        let model = Model::nearest_neighbor(2, Potential::saw()).unwrap();
        IbLibrary::build(&model, 6, None, u64::MAX).unwrap()
    }

    #[test]
    fn library_is_normalised() {
        let lib = lib();
        let total: f64 = lib.probabilities.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(lib.truncation_gap > 0.0 && lib.truncation_gap < 1.0);
        assert!(lib.pieces.iter().all(|p| p.len() <= 6));
    }

    #[test]
    fn trajectory_renewals_match_pieces() {
        let lib = lib();
        let t = simulate_ib_process(&lib, 50, 9);
        assert!(is_bridge(&t.walk));
        let inner: Vec<usize> = t.renewal_times[..t.renewal_times.len() - 1].to_vec();
        assert_eq!(renewal_times(&t.walk).times, inner);
        let pieces = irreducible_pieces(&t.walk).unwrap();
        assert_eq!(pieces.len(), 50);
        for (p, &k) in pieces.iter().zip(&t.piece_indices) {
            assert_eq!(p, &lib.pieces[k]);
        }
    }

    #[test]
    fn shift_drops_the_first_piece() {
        let lib = lib();
        let t = simulate_ib_process(&lib, 10, 2);
        let s = t.shift(&lib);
        assert_eq!(s.piece_indices, t.piece_indices[1..]);
        assert_eq!(s.walk, t.walk.segment(t.renewal_times[0], t.walk.len()));
    }
}

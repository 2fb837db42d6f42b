//! Metropolis chains on walks of fixed length.
//!
//! Two move types, both with symmetric proposals so the acceptance ratio is
//! `σ(γ') / σ(γ)`:
//! * pivot: pick `k` uniformly in `0..n` and apply a uniformly chosen signed
//!   permutation to the part of the walk after `γ(k)`;
//! * window re-draw: pick a start `s` uniformly, a length `ℓ <= max_window`
//!   uniformly among those fitting, and replace steps `s+1..=s+ℓ` by steps drawn
//!   uniformly from the step set (the rest of the walk is translated).
//!
//! Changes in `Σ φ(l_v)` are tracked incrementally on a [`LocalTimeMap`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stream_rng;
use crate::lattice::{LatticeVector, Symmetry, Walk};
use crate::model::{LocalTimeMap, Model};
use crate::numeric::{batch_means, NeumaierSum};
use crate::par::{map_ordered, Execution};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub n: usize,
    pub chains: usize,
    /// Recorded sweeps per chain; one sweep is `n` move attempts.
    pub sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub pivot_probability: f64,
    pub max_window: usize,
    /// Batches per chain for the batch-means standard error.
    pub batches: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n: 10,
            chains: 4,
            sweeps: 10_000,
            burn_in: 1_000,
            seed: 0,
            pivot_probability: 0.5,
            max_window: 4,
            batches: 20,
            execution: Execution::default(),
        }
    }
}

impl McmcConfig {
    fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::InvalidArgument(
                "at least one chain is needed".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.pivot_probability) {
            return Err(Error::InvalidArgument(
                "pivot probability must lie in [0, 1]".into(),
            ));
        }
        if self.max_window == 0 && self.pivot_probability < 1.0 {
            return Err(Error::InvalidArgument("max_window must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveStats {
    pub pivot_attempts: u64,
    pub pivot_accepts: u64,
    pub window_attempts: u64,
    pub window_accepts: u64,
}

impl MoveStats {
    pub fn pivot_rate(&self) -> f64 {
        self.pivot_accepts as f64 / self.pivot_attempts.max(1) as f64
    }

    pub fn window_rate(&self) -> f64 {
        self.window_accepts as f64 / self.window_attempts.max(1) as f64
    }

    fn merge(&mut self, o: &MoveStats) {
        self.pivot_attempts += o.pivot_attempts;
        self.pivot_accepts += o.pivot_accepts;
        self.window_attempts += o.window_attempts;
        self.window_accepts += o.window_accepts;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub chain: usize,
    /// `γ(n)` after every recorded sweep.
    pub endpoints: Vec<LatticeVector>,
    pub final_walk: Walk,
    pub stats: MoveStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcRun {
    pub n: usize,
    pub chains: Vec<ChainOutput>,
    pub batches: usize,
}

impl McmcRun {
    pub fn stats(&self) -> MoveStats {
        let mut total = MoveStats::default();
        for c in &self.chains {
            total.merge(&c.stats);
        }
        total
    }

    /// Estimate of `E f(γ(n))` with a batch-means standard error, pooled over
    /// chains as independent estimates.
    pub fn estimate(&self, f: impl Fn(&LatticeVector) -> f64) -> (f64, f64) {
        let per_chain: Vec<(f64, f64, usize)> = self
            .chains
            .iter()
            .filter(|c| !c.endpoints.is_empty())
            .map(|c| {
                let values: Vec<f64> = c.endpoints.iter().map(&f).collect();
                let (m, se) = batch_means(&values, self.batches);
                (m, se, values.len())
            })
            .collect();
        let total: usize = per_chain.iter().map(|e| e.2).sum();
        if total == 0 {
            return (f64::NAN, f64::NAN);
        }
        let mean = per_chain
            .iter()
            .map(|&(m, _, k)| m * k as f64)
            .collect::<NeumaierSum>()
            .value()
            / total as f64;
        let var: f64 = per_chain
            .iter()
            .map(|&(_, se, k)| (se * k as f64 / total as f64).powi(2))
            .sum();
        (mean, var.sqrt())
    }
}

struct Chain<'m> {
    model: &'m Model,
    dim: usize,
    n: usize,
    steps: Vec<usize>,
    coords: Vec<i32>,
    times: LocalTimeMap,
    /// Index of `g(ω)` for every symmetry `g` and step index `ω`.
    sym_steps: Vec<Vec<usize>>,
    scratch_steps: Vec<usize>,
    scratch_coords: Vec<i32>,
    stats: MoveStats,
}

impl<'m> Chain<'m> {
    fn new(model: &'m Model, n: usize) -> Result<Chain<'m>> {
        let dim = model.dim();
        let set = model.steps();
        let forward = set
            .index_of(set.smallest_forward_step().coords())
            .expect("member");
        let steps = vec![forward; n];
        let walk = Walk::from_steps(
            dim,
            &steps
                .iter()
                .map(|&k| set.steps()[k].coords())
                .collect::<Vec<_>>(),
        )?;
        let times = LocalTimeMap::of_walk(&walk);
        // a straight ray visits every vertex once
        if times.repulsion(&model.phi)? == f64::INFINITY {
            return Err(Error::DegenerateModel(
                "the straight walk has weight zero".into(),
            ));
        }
        let sym_steps = Symmetry::all(dim)
            .into_iter()
            .filter(|g| !g.is_identity())
            .map(|g| {
                set.steps()
                    .iter()
                    .map(|s| set.index_of(g.apply(s.coords()).coords()).expect("closed"))
                    .collect()
            })
            .collect();
        let coords = walk
            .to_points()
            .iter()
            .flat_map(|p| p.coords().to_vec())
            .collect();
        Ok(Chain {
            model,
            dim,
            n,
            steps,
            coords,
            times,
            sym_steps,
            scratch_steps: Vec::with_capacity(n),
            scratch_coords: Vec::with_capacity((n + 1) * dim),
            stats: MoveStats::default(),
        })
    }

    fn point(coords: &[i32], dim: usize, i: usize) -> &[i32] {
        &coords[i * dim..(i + 1) * dim]
    }

    /// Proposes replacing steps `from..n` by `scratch_steps` and applies the
    /// Metropolis rule. Returns whether the move was accepted.
    fn propose_tail(&mut self, from: usize, rng: &mut ChaCha8Rng) -> Result<bool> {
        let dim = self.dim;
        let set = self.model.steps();
        let rho = &self.model.rho;
        let phi = &self.model.phi;

        let mut log_ratio = 0.0;
        for (k, &new) in self.scratch_steps.iter().enumerate() {
            let old = self.steps[from + k];
            if old != new {
                log_ratio += rho.log_prob(new) - rho.log_prob(old);
            }
        }
        self.scratch_coords.clear();
        self.scratch_coords
            .extend_from_slice(Self::point(&self.coords, dim, from));
        for (k, &s) in self.scratch_steps.iter().enumerate() {
            let step = set.steps()[s].coords();
            for c in 0..dim {
                let prev = self.scratch_coords[k * dim + c];
                self.scratch_coords.push(prev + step[c]);
            }
        }

        for i in from + 1..=self.n {
            let p = Self::point(&self.coords, dim, i);
            let before = self.times.get(p) as usize;
            log_ratio += phi.increment(before - 1)?;
            self.times.pop(p);
        }
        let mut pushed = 0;
        let mut forbidden = false;
        for i in 1..=self.n - from {
            let p = Self::point(&self.scratch_coords, dim, i);
            let inc = phi.increment(self.times.get(p) as usize)?;
            if inc == f64::INFINITY {
                forbidden = true;
                break;
            }
            log_ratio -= inc;
            self.times.push(p);
            pushed += 1;
        }

        let accept = !forbidden && (log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio);
        if accept {
            self.steps.truncate(from);
            self.steps.extend_from_slice(&self.scratch_steps);
            self.coords.truncate((from + 1) * dim);
            self.coords.extend_from_slice(&self.scratch_coords[dim..]);
        } else {
            for i in 1..=pushed {
                self.times.pop(Self::point(&self.scratch_coords, dim, i));
            }
            for i in from + 1..=self.n {
                self.times.push(Self::point(&self.coords, dim, i));
            }
        }
        Ok(accept)
    }

    fn pivot(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        if self.sym_steps.is_empty() {
            return Ok(());
        }
        let k = rng.gen_range(0..self.n);
        let g = rng.gen_range(0..self.sym_steps.len());
        self.scratch_steps.clear();
        let map = &self.sym_steps[g];
        self.scratch_steps
            .extend(self.steps[k..].iter().map(|&s| map[s]));
        self.stats.pivot_attempts += 1;
        if self.propose_tail(k, rng)? {
            self.stats.pivot_accepts += 1;
        }
        Ok(())
    }

    fn redraw(&mut self, max_window: usize, rng: &mut ChaCha8Rng) -> Result<()> {
        let s = rng.gen_range(0..self.n);
        let len = rng.gen_range(1..=max_window.min(self.n - s));
        let omega = self.model.steps().len();
        self.scratch_steps.clear();
        for _ in 0..len {
            self.scratch_steps.push(rng.gen_range(0..omega));
        }
        self.scratch_steps.extend_from_slice(&self.steps[s + len..]);
        self.stats.window_attempts += 1;
        if self.propose_tail(s, rng)? {
            self.stats.window_accepts += 1;
        }
        Ok(())
    }

    fn sweep(&mut self, cfg: &McmcConfig, rng: &mut ChaCha8Rng) -> Result<()> {
        for _ in 0..self.n {
            if rng.gen::<f64>() < cfg.pivot_probability {
                self.pivot(rng)?;
            } else {
                self.redraw(cfg.max_window, rng)?;
            }
        }
        Ok(())
    }

    fn endpoint(&self) -> LatticeVector {
        LatticeVector::new(Self::point(&self.coords, self.dim, self.n))
    }

    fn walk(&self) -> Walk {
        let points: Vec<&[i32]> = (0..=self.n)
            .map(|i| Self::point(&self.coords, self.dim, i))
            .collect();
        Walk::from_points(&points).expect("origin-rooted")
    }
}

fn run_chain(model: &Model, cfg: &McmcConfig, chain: usize) -> Result<ChainOutput> {
    let mut state = Chain::new(model, cfg.n)?;
    let mut rng = stream_rng(cfg.seed, chain as u64);
    let mut endpoints = Vec::with_capacity(cfg.sweeps);
    for sweep in 0..cfg.burn_in + cfg.sweeps {
        if cfg.n > 0 {
            state.sweep(cfg, &mut rng)?;
        }
        if sweep >= cfg.burn_in {
            endpoints.push(state.endpoint());
        }
    }
    Ok(ChainOutput {
        chain,
        endpoints,
        final_walk: state.walk(),
        stats: state.stats,
    })
}

/// Runs `cfg.chains` independent chains (stream `c` of `cfg.seed` for chain
/// `c`). Output does not depend on the thread count.
pub fn mcmc_sample(model: &Model, cfg: &McmcConfig) -> Result<McmcRun> {
    cfg.validate()?;
    let chains: Vec<usize> = (0..cfg.chains).collect();
    let outputs = map_ordered(chains, cfg.execution, |c| run_chain(model, cfg, c));
    Ok(McmcRun {
        n: cfg.n,
        chains: outputs.into_iter().collect::<Result<_>>()?,
        batches: cfg.batches,
    })
}

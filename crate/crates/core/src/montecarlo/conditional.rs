//! Exact comparison of the bridge measure with the renewal-conditioned law of
//! i.i.d. irreducible-bridge concatenations.
//!
//! Side (a) is `P(γ) = σ(γ) / H_n` over bridges of length `n`. Side (b) draws
//! irreducible bridges with probability `∝ σ(η) e^{−λ|η|}` and conditions on a
//! renewal at `n`; a concatenation `η_1 ∘ … ∘ η_k` then has probability
//! `∝ Π σ(η_j)` since the factor `e^{−λ n}` is common to all of them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::decompose::has_renewal_xs;
use crate::enumerate::{Budget, DfsState, Engine};
use crate::model::Model;
use crate::numeric::NeumaierSum;
use crate::{Error, Result};

pub const CONDITIONAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalIdentityReport {
    pub n: usize,
    /// Bridges of length `n` with non-zero weight.
    pub bridges: usize,
    /// Distinct concatenations of irreducible bridges of total length `n`.
    pub concatenations: usize,
    pub total_variation: f64,
    pub holds: bool,
}

struct Piece {
    steps: Vec<usize>,
    log_weight: f64,
}

fn bridges_up_to(
    model: &Model,
    n: usize,
    budget: &Budget,
) -> Result<(Vec<Piece>, Vec<Vec<Piece>>)> {
    let mut full = Vec::new();
    let mut irreducible: Vec<Vec<Piece>> = (0..=n).map(|_| Vec::new()).collect();
    let mut scratch = Vec::new();
    let mut visitor = |s: &DfsState<'_>| {
        let d = s.depth;
        if d == 0 || s.min_x_after_start <= 0 || s.max_x_after_start > s.xs[d] {
            return;
        }
        let piece = || Piece {
            steps: s.steps.to_vec(),
            log_weight: s.log_weight,
        };
        if d == n {
            full.push(piece());
        }
        if !has_renewal_xs(s.xs, &mut scratch) {
            irreducible[d].push(piece());
        }
    };
    Engine::new(model, n).run(&mut visitor, budget)?;
    Ok((full, irreducible))
}

fn concatenate(
    pieces: &[Vec<Piece>],
    remaining: usize,
    steps: &mut Vec<usize>,
    log_weight: f64,
    out: &mut HashMap<Vec<usize>, f64>,
) {
    if remaining == 0 {
        *out.entry(steps.clone()).or_insert(0.0) += log_weight.exp();
        return;
    }
    for len in 1..=remaining {
        for p in &pieces[len] {
            let mark = steps.len();
            steps.extend_from_slice(&p.steps);
            concatenate(
                pieces,
                remaining - len,
                steps,
                log_weight + p.log_weight,
                out,
            );
            steps.truncate(mark);
        }
    }
}

pub fn verify_conditional_identity(
    model: &Model,
    n: usize,
    budget: u64,
) -> Result<ConditionalIdentityReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("the identity needs n >= 1".into()));
    }
    let (full, pieces) = bridges_up_to(model, n, &Budget::new(budget))?;
    let direct: HashMap<Vec<usize>, f64> = full
        .iter()
        .map(|p| (p.steps.clone(), p.log_weight.exp()))
        .collect();
    let mut glued = HashMap::new();
    concatenate(&pieces, n, &mut Vec::with_capacity(n), 0.0, &mut glued);

    let norm = |m: &HashMap<Vec<usize>, f64>| {
        let mut v: Vec<f64> = m.values().copied().collect();
        v.sort_by(f64::total_cmp);
        v.into_iter().collect::<NeumaierSum>().value()
    };
    let (za, zb) = (norm(&direct), norm(&glued));
    if !(za > 0.0 && zb > 0.0) {
        return Err(Error::DegenerateModel(format!("no bridges of length {n}")));
    }
    let mut keys: Vec<&Vec<usize>> = direct.keys().chain(glued.keys()).collect();
    keys.sort();
    keys.dedup();
    let tv = 0.5
        * keys
            .into_iter()
            .map(|k| {
                let a = direct.get(k).map_or(0.0, |w| w / za);
                let b = glued.get(k).map_or(0.0, |w| w / zb);
                (a - b).abs()
            })
            .collect::<NeumaierSum>()
            .value();
    Ok(ConditionalIdentityReport {
        n,
        bridges: direct.len(),
        concatenations: glued.len(),
        total_variation: tv,
        holds: tv < CONDITIONAL_TOLERANCE,
    })
}

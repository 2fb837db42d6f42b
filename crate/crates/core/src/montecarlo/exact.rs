//! Exact sampling and exact laws for walks of small length.

use std::collections::HashMap;

use rand::Rng;

use super::stream_rng;
use crate::enumerate::{Budget, DfsState, Engine};
use crate::lattice::{LatticeVector, Walk};
use crate::model::Model;
use crate::numeric::NeumaierSum;
use crate::{Error, Result};

/// The tree of weighted prefixes of length `<= n`, with the total weight of
/// length-`n` completions below every node.
#[derive(Debug, Clone)]
pub struct WeightTree {
    n: usize,
    dim: usize,
    steps: Vec<LatticeVector>,
    step_of: Vec<u32>,
    child_start: Vec<u32>,
    children: Vec<u32>,
    totals: Vec<f64>,
}

impl WeightTree {
    pub fn build(model: &Model, n: usize, budget: u64) -> Result<WeightTree> {
        let mut parent: Vec<u32> = Vec::new();
        let mut step_of: Vec<u32> = Vec::new();
        let mut leaf: Vec<f64> = Vec::new();
        let mut stack: Vec<u32> = Vec::with_capacity(n + 1);
        let mut visitor = |s: &DfsState<'_>| {
            let id = parent.len() as u32;
            stack.truncate(s.depth);
            parent.push(stack.last().copied().unwrap_or(u32::MAX));
            step_of.push(s.steps.last().map_or(u32::MAX, |&k| k as u32));
            leaf.push(if s.depth == n {
                s.log_weight.exp()
            } else {
                0.0
            });
            stack.push(id);
        };
        Engine::new(model, n).run(&mut visitor, &Budget::new(budget))?;

        let count = parent.len();
        let mut totals = leaf;
        // pre-order: every child comes after its parent
        for id in (1..count).rev() {
            let p = parent[id] as usize;
            totals[p] += totals[id];
        }
        let mut degree = vec![0u32; count + 1];
        for &p in &parent[1..] {
            degree[p as usize + 1] += 1;
        }
        for k in 0..count {
            degree[k + 1] += degree[k];
        }
        let child_start = degree;
        let mut fill = child_start.clone();
        let mut children = vec![0u32; count.saturating_sub(1)];
        for (id, &p) in parent.iter().enumerate().skip(1) {
            children[fill[p as usize] as usize] = id as u32;
            fill[p as usize] += 1;
        }
        Ok(WeightTree {
            n,
            dim: model.dim(),
            steps: model.steps().steps().to_vec(),
            step_of,
            child_start,
            children,
            totals,
        })
    }

    /// `Z_n`.
    pub fn total(&self) -> f64 {
        self.totals[0]
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    /// Draws one walk by descending from the root, choosing each child with
    /// probability proportional to its completion weight.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Walk {
        let mut node = 0usize;
        let mut steps = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let kids = &self.children
                [self.child_start[node] as usize..self.child_start[node + 1] as usize];
            let mut target = rng.gen::<f64>() * self.totals[node];
            let mut chosen = *kids.last().expect("non-zero total has children") as usize;
            for &c in kids {
                let w = self.totals[c as usize];
                if target < w {
                    chosen = c as usize;
                    break;
                }
                target -= w;
            }
            // a child of zero weight is never the chosen fallback
            if self.totals[chosen] == 0.0 {
                chosen = kids
                    .iter()
                    .rev()
                    .map(|&c| c as usize)
                    .find(|&c| self.totals[c] > 0.0)
                    .expect("positive total");
            }
            steps.push(self.steps[self.step_of[chosen] as usize].coords());
            node = chosen;
        }
        Walk::from_steps(self.dim, &steps).expect("steps share the model dimension")
    }
}

/// `count` i.i.d. walks from the exact polymer measure of length `n`.
pub fn exact_sample(
    model: &Model,
    n: usize,
    count: usize,
    seed: u64,
    budget: u64,
) -> Result<Vec<Walk>> {
    let tree = WeightTree::build(model, n, budget)?;
    if !(tree.total() > 0.0) {
        return Err(Error::DegenerateModel(format!("Z_{n} = 0")));
    }
    let mut rng = stream_rng(seed, 0);
    Ok((0..count).map(|_| tree.sample(&mut rng)).collect())
}

/// Every walk of length `n` with its probability under the polymer measure.
pub fn walk_law(model: &Model, n: usize, budget: u64) -> Result<Vec<(Walk, f64)>> {
    let mut walks = Vec::new();
    let mut total = NeumaierSum::new();
    let mut visitor = |s: &DfsState<'_>| {
        if s.depth == n {
            let w = s.log_weight.exp();
            total.add(w);
            let steps: Vec<&[i32]> = s
                .steps
                .iter()
                .map(|&k| model.steps().steps()[k].coords())
                .collect();
            walks.push((Walk::from_steps(model.dim(), &steps).expect("dim"), w));
        }
    };
    Engine::new(model, n).run(&mut visitor, &Budget::new(budget))?;
    let z = total.value();
    Ok(walks.into_iter().map(|(w, p)| (w, p / z)).collect())
}

/// Law of the endpoint `γ(n)`.
#[derive(Debug, Clone)]
pub struct EndpointLaw {
    pub n: usize,
    pub probabilities: HashMap<LatticeVector, f64>,
}

impl EndpointLaw {
    /// `E f(γ(n))`.
    pub fn expect(&self, f: impl Fn(&LatticeVector) -> f64) -> f64 {
        let mut sorted: Vec<_> = self.probabilities.iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(b.0));
        sorted
            .into_iter()
            .map(|(v, &p)| p * f(v))
            .collect::<NeumaierSum>()
            .value()
    }

    /// Law of `x(γ(n))`, sorted by value.
    pub fn x_marginal(&self) -> Vec<(i32, f64)> {
        let mut m: HashMap<i32, NeumaierSum> = HashMap::new();
        for (v, &p) in &self.probabilities {
            m.entry(v.x()).or_default().add(p);
        }
        let mut out: Vec<(i32, f64)> = m.into_iter().map(|(k, s)| (k, s.value())).collect();
        out.sort_by_key(|e| e.0);
        out
    }
}

pub fn endpoint_law(model: &Model, n: usize, budget: u64) -> Result<EndpointLaw> {
    let mut sums: HashMap<LatticeVector, NeumaierSum> = HashMap::new();
    let mut total = NeumaierSum::new();
    let mut visitor = |s: &DfsState<'_>| {
        if s.depth == n {
            let w = s.log_weight.exp();
            total.add(w);
            sums.entry(LatticeVector::new(s.endpoint()))
                .or_default()
                .add(w);
        }
    };
    Engine::new(model, n).run(&mut visitor, &Budget::new(budget))?;
    let z = total.value();
    if !(z > 0.0) {
        return Err(Error::DegenerateModel(format!("Z_{n} = 0")));
    }
    Ok(EndpointLaw {
        n,
        probabilities: sums.into_iter().map(|(k, s)| (k, s.value() / z)).collect(),
    })
}

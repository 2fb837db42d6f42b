//! Depth-first traversal of the weighted walk tree.
//!
//! The engine keeps the current prefix on explicit stacks (points, x-profile,
//! log-weights, running extrema) plus an occupancy table, so each node costs
//! O(1) apart from whatever the visitor does.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::lattice::Coords;
use crate::model::Model;
use crate::{Error, Result};

const DENSE_LIMIT: usize = 1 << 26;
const FLUSH_EVERY: u64 = 1 << 12;

/// A shared node budget.
#[derive(Debug)]
pub struct Budget {
    limit: u64,
    used: AtomicU64,
}

impl Budget {
    pub fn new(limit: u64) -> Budget {
        Budget {
            limit,
            used: AtomicU64::new(0),
        }
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn used(&self) -> u64 {
        self.used.load(Ordering::Relaxed)
    }

    fn charge(&self, nodes: u64) -> Result<()> {
        let total = self.used.fetch_add(nodes, Ordering::Relaxed) + nodes;
        if total > self.limit {
            return Err(Error::BudgetExceeded {
                limit: self.limit,
                partial: None,
            });
        }
        Ok(())
    }
}

/// Snapshot of the current tree node handed to a [`Visitor`].
pub struct DfsState<'a> {
    pub depth: usize,
    pub log_weight: f64,
    /// Flat coordinates of `γ(0..=depth)`.
    pub coords: &'a [i32],
    /// `x(γ(0..=depth))`.
    pub xs: &'a [i32],
    /// Step indices into the model's step set.
    pub steps: &'a [usize],
    /// `min x(γ(i))` over `1 <= i <= depth` (`i32::MAX` at the root).
    pub min_x_after_start: i32,
    /// `max x(γ(i))` over `1 <= i <= depth` (`i32::MIN` at the root).
    pub max_x_after_start: i32,
    /// `Π numerators` of the steps when the model admits exact arithmetic.
    pub exact_numerator: Option<u128>,
    pub dim: usize,
}

impl DfsState<'_> {
    pub fn endpoint(&self) -> &[i32] {
        &self.coords[self.depth * self.dim..]
    }
}

pub trait Visitor {
    fn visit(&mut self, state: &DfsState<'_>);
}

impl<F: FnMut(&DfsState<'_>)> Visitor for F {
    fn visit(&mut self, state: &DfsState<'_>) {
        self(state)
    }
}

enum Occupancy {
    Dense {
        counts: Vec<u16>,
        radius: i32,
        side: usize,
    },
    Sparse(HashMap<Coords, u32>),
}

impl Occupancy {
    fn new(dim: usize, radius: i32) -> Occupancy {
        let side = 2 * radius as usize + 1;
        let cells = side.checked_pow(dim as u32);
        match cells {
            Some(cells) if cells <= DENSE_LIMIT && radius < u16::MAX as i32 => Occupancy::Dense {
                counts: vec![0; cells],
                radius,
                side,
            },
            _ => Occupancy::Sparse(HashMap::new()),
        }
    }

    #[inline]
    fn index(p: &[i32], radius: i32, side: usize) -> usize {
        p.iter()
            .rev()
            .fold(0usize, |acc, &c| acc * side + (c + radius) as usize)
    }

    #[inline]
    fn get(&self, p: &[i32]) -> usize {
        match self {
            Occupancy::Dense {
                counts,
                radius,
                side,
            } => counts[Self::index(p, *radius, *side)] as usize,
            Occupancy::Sparse(map) => map.get(p).copied().unwrap_or(0) as usize,
        }
    }

    #[inline]
    fn inc(&mut self, p: &[i32]) {
        match self {
            Occupancy::Dense {
                counts,
                radius,
                side,
            } => counts[Self::index(p, *radius, *side)] += 1,
            Occupancy::Sparse(map) => *map.entry(Coords::from_slice(p)).or_insert(0) += 1,
        }
    }

    #[inline]
    fn dec(&mut self, p: &[i32]) {
        match self {
            Occupancy::Dense {
                counts,
                radius,
                side,
            } => counts[Self::index(p, *radius, *side)] -= 1,
            Occupancy::Sparse(map) => {
                let c = map.get_mut(p).expect("visited");
                *c -= 1;
                if *c == 0 {
                    map.remove(p);
                }
            }
        }
    }
}

/// DFS over all walks of length `<= max_len` that extend a fixed prefix.
pub struct Engine<'m> {
    model: &'m Model,
    max_len: usize,
    dim: usize,
    occupancy: Occupancy,
    coords: Vec<i32>,
    xs: Vec<i32>,
    steps: Vec<usize>,
    log_weights: Vec<f64>,
    min_x: Vec<i32>,
    max_x: Vec<i32>,
    numerators: Option<(Vec<u128>, Vec<u128>)>,
    pending: u64,
    visited: u64,
}

impl<'m> Engine<'m> {
    pub fn new(model: &'m Model, max_len: usize) -> Engine<'m> {
        let dim = model.dim();
        let radius = (max_len as i32).saturating_mul(model.steps().max_abs_coord());
        let mut occupancy = Occupancy::new(dim, radius);
        let origin = vec![0; dim];
        occupancy.inc(&origin);
        // exact arithmetic needs exp(−φ) ∈ {0, 1} and a rational ρ whose
        // products cannot overflow
        let numerators = model.rho.rational_form().and_then(|r| {
            let fits = (r.denominator as u128)
                .checked_pow(max_len as u32)
                .is_some();
            (model.phi.is_zero_one() && fits).then(|| {
                (
                    r.numerators.iter().map(|&n| n as u128).collect(),
                    vec![1u128],
                )
            })
        });
        Engine {
            model,
            max_len,
            dim,
            occupancy,
            coords: origin,
            xs: vec![0],
            steps: Vec::with_capacity(max_len),
            log_weights: vec![0.0],
            min_x: vec![i32::MAX],
            max_x: vec![i32::MIN],
            numerators,
            pending: 0,
            visited: 0,
        }
    }

    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    /// Number of nodes visited so far.
    pub fn visited(&self) -> u64 {
        self.visited
    }

    /// Appends step `index`; returns false (leaving the state untouched) when
    /// the extension has weight zero.
    fn push(&mut self, index: usize) -> Result<bool> {
        let depth = self.depth();
        let base = depth * self.dim;
        let step = self.model.steps().steps()[index].coords();
        let mut next: Coords = Coords::with_capacity(self.dim);
        for k in 0..self.dim {
            next.push(self.coords[base + k] + step[k]);
        }
        let visits = self.occupancy.get(&next);
        let inc = self.model.phi.increment(visits)?;
        if inc == f64::INFINITY {
            return Ok(false);
        }
        self.occupancy.inc(&next);
        let x = next[0];
        self.coords.extend_from_slice(&next);
        self.xs.push(x);
        self.steps.push(index);
        self.log_weights
            .push(self.log_weights[depth] + self.model.rho.log_prob(index) - inc);
        self.min_x.push(self.min_x[depth].min(x));
        self.max_x.push(self.max_x[depth].max(x));
        if let Some((nums, stack)) = &mut self.numerators {
            let top = stack[depth] * nums[index];
            stack.push(top);
        }
        Ok(true)
    }

    fn pop(&mut self) {
        let depth = self.depth();
        let base = depth * self.dim;
        let last: Coords = Coords::from_slice(&self.coords[base..]);
        self.occupancy.dec(&last);
        self.coords.truncate(base);
        self.xs.pop();
        self.steps.pop();
        self.log_weights.pop();
        self.min_x.pop();
        self.max_x.pop();
        if let Some((_, stack)) = &mut self.numerators {
            stack.pop();
        }
    }

    /// Moves the root of the traversal to the end of `prefix`. Returns false
    /// when the prefix has weight zero.
    pub fn descend_prefix(&mut self, prefix: &[usize]) -> Result<bool> {
        assert!(prefix.len() <= self.max_len, "prefix longer than max_len");
        for &s in prefix {
            if !self.push(s)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn state(&self) -> DfsState<'_> {
        let depth = self.depth();
        DfsState {
            depth,
            log_weight: self.log_weights[depth],
            coords: &self.coords,
            xs: &self.xs,
            steps: &self.steps,
            min_x_after_start: self.min_x[depth],
            max_x_after_start: self.max_x[depth],
            exact_numerator: self.numerators.as_ref().map(|(_, s)| s[depth]),
            dim: self.dim,
        }
    }

    /// Visits the current node and every non-zero-weight extension up to
    /// `max_len`, in step-set order.
    pub fn run<V: Visitor>(&mut self, visitor: &mut V, budget: &Budget) -> Result<()> {
        let result = self.recurse(visitor, budget);
        let flushed = budget.charge(std::mem::take(&mut self.pending));
        result.and(flushed)
    }

    fn recurse<V: Visitor>(&mut self, visitor: &mut V, budget: &Budget) -> Result<()> {
        self.visited += 1;
        self.pending += 1;
        if self.pending >= FLUSH_EVERY {
            budget.charge(std::mem::take(&mut self.pending))?;
        }
        visitor.visit(&self.state());
        if self.depth() == self.max_len {
            return Ok(());
        }
        for index in 0..self.model.steps().len() {
            if self.push(index)? {
                let r = self.recurse(visitor, budget);
                self.pop();
                r?;
            }
        }
        Ok(())
    }
}

//! The self-repelling weight.
//!
//! A walk `γ` gets the weight
//! `σ(γ) = Π_v exp(−φ(l_v(γ))) · Π_i ρ(γ(i) − γ(i−1))`
//! where `l_v` is the number of visits to `v`. Weights are carried in the log
//! domain; `−∞` encodes a forbidden configuration.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lattice::{LatticeVector, StepSet, Symmetry, Walk};
use crate::{Error, Result};

pub const DEFAULT_CAP: usize = 64;

/// Shape of the repulsion potential `φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum PotentialKind {
    /// `φ ≡ 0`: simple random walk.
    Free,
    /// `φ(a) = ∞` for `a >= 2`: self-avoiding walk.
    Saw,
    /// `φ(a) = k (a − 1)_+`: weakly self-avoiding (Domb–Joyce) walk.
    Weak { k: f64 },
    /// Tabulated values `φ(0), …, φ(cap)`; `+∞` allowed.
    Table { values: Vec<f64> },
}

/// A validated potential.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    kind: PotentialKind,
    cap: usize,
}

impl Potential {
    pub fn free() -> Potential {
        Potential {
            kind: PotentialKind::Free,
            cap: DEFAULT_CAP,
        }
    }

    pub fn saw() -> Potential {
        Potential {
            kind: PotentialKind::Saw,
            cap: DEFAULT_CAP,
        }
    }

    pub fn weak(k: f64) -> Result<Potential> {
        validate_potential(PotentialKind::Weak { k }, DEFAULT_CAP)
    }

    pub fn table(values: Vec<f64>) -> Result<Potential> {
        let cap = values.len().saturating_sub(1);
        validate_potential(PotentialKind::Table { values }, cap)
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// True when `exp(−φ)` only takes the values 0 and 1.
    pub fn is_zero_one(&self) -> bool {
        match &self.kind {
            PotentialKind::Free | PotentialKind::Saw => true,
            PotentialKind::Weak { k } => *k == 0.0,
            PotentialKind::Table { values } => {
                values.iter().all(|&v| v == 0.0 || v == f64::INFINITY)
            }
        }
    }

    /// `φ(a)`. Only tabulated potentials are bounded by the cap.
    pub fn phi(&self, a: usize) -> Result<f64> {
        Ok(match &self.kind {
            PotentialKind::Free => 0.0,
            PotentialKind::Saw => {
                if a <= 1 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            PotentialKind::Weak { k } => k * a.saturating_sub(1) as f64,
            PotentialKind::Table { values } => {
                if a > self.cap {
                    return Err(Error::CapExceeded {
                        visits: a,
                        cap: self.cap,
                    });
                }
                values[a]
            }
        })
    }

    /// `φ(c + 1) − φ(c)`, with `+∞` once the configuration becomes forbidden.
    #[inline]
    pub fn increment(&self, c: usize) -> Result<f64> {
        match &self.kind {
            PotentialKind::Free => Ok(0.0),
            PotentialKind::Saw => Ok(if c == 0 { 0.0 } else { f64::INFINITY }),
            PotentialKind::Weak { k } => Ok(if c == 0 { 0.0 } else { *k }),
            PotentialKind::Table { .. } => {
                let next = self.phi(c + 1)?;
                if next == f64::INFINITY {
                    return Ok(f64::INFINITY);
                }
                Ok(next - self.phi(c)?)
            }
        }
    }
}

/// Checks `φ(0) = φ(1) = 0`, monotonicity and `φ(a+b) >= φ(a) + φ(b)` for
/// all `a + b <= cap`.
pub fn validate_potential(kind: PotentialKind, cap: usize) -> Result<Potential> {
    if let PotentialKind::Table { values } = &kind {
        let needed = cap + 1;
        if values.len() < needed || values.len() < 2 {
            return Err(Error::TableTooShort {
                given: values.len(),
                cap,
                needed: needed.max(2),
            });
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(Error::InvalidArgument(
                "potential values must be finite or +inf".into(),
            ));
        }
    }
    let p = Potential { kind, cap };
    let values: Vec<f64> = (0..=cap.max(1)).map(|a| p.phi(a)).collect::<Result<_>>()?;
    if values[0] != 0.0 || values[1] != 0.0 {
        return Err(Error::NonzeroBase);
    }
    for total in 2..=cap {
        for a in 1..=total / 2 {
            let b = total - a;
            if values[total] < values[a] + values[b] {
                return Err(Error::NotSuperadditive { a, b });
            }
        }
    }
    if let Some(a) = (1..=cap).find(|&a| values[a] < values[a - 1]) {
        return Err(Error::NotMonotone(a));
    }
    Ok(p)
}

/// Exact jump probabilities `numerators[i] / denominator`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalProbabilities {
    pub numerators: Vec<u64>,
    pub denominator: u64,
}

/// The jump distribution `ρ` on a step set.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpDistribution {
    steps: StepSet,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    rational: Option<RationalProbabilities>,
}

impl JumpDistribution {
    pub fn uniform(steps: StepSet) -> JumpDistribution {
        let n = steps.len();
        JumpDistribution {
            probs: vec![1.0 / n as f64; n],
            log_probs: vec![-(n as f64).ln(); n],
            rational: Some(RationalProbabilities {
                numerators: vec![1; n],
                denominator: n as u64,
            }),
            steps,
        }
    }

    pub fn explicit(steps: StepSet, probs: Vec<f64>) -> Result<JumpDistribution> {
        if probs.len() != steps.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} probabilities for {} steps",
                probs.len(),
                steps.len()
            )));
        }
        if probs.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidDistribution(
                "probabilities must be positive".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        check_symmetric(&steps, |i, j| (probs[i] - probs[j]).abs() <= 1e-12)?;
        Ok(JumpDistribution {
            log_probs: probs.iter().map(|p| p.ln()).collect(),
            probs,
            rational: None,
            steps,
        })
    }

    pub fn rational(
        steps: StepSet,
        numerators: Vec<u64>,
        denominator: u64,
    ) -> Result<JumpDistribution> {
        if numerators.len() != steps.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} numerators for {} steps",
                numerators.len(),
                steps.len()
            )));
        }
        if numerators.contains(&0) {
            return Err(Error::InvalidDistribution(
                "probabilities must be positive".into(),
            ));
        }
        if numerators.iter().sum::<u64>() != denominator {
            return Err(Error::InvalidDistribution(
                "numerators must sum to the denominator".into(),
            ));
        }
        check_symmetric(&steps, |i, j| numerators[i] == numerators[j])?;
        let probs: Vec<f64> = numerators
            .iter()
            .map(|&n| n as f64 / denominator as f64)
            .collect();
        Ok(JumpDistribution {
            log_probs: probs.iter().map(|p| p.ln()).collect(),
            probs,
            rational: Some(RationalProbabilities {
                numerators,
                denominator,
            }),
            steps,
        })
    }

    pub fn steps(&self) -> &StepSet {
        &self.steps
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    #[inline]
    pub fn log_prob(&self, index: usize) -> f64 {
        self.log_probs[index]
    }

    pub fn rational_form(&self) -> Option<&RationalProbabilities> {
        self.rational.as_ref()
    }

    pub fn is_uniform(&self) -> bool {
        self.probs.windows(2).all(|w| w[0] == w[1])
    }
}

fn check_symmetric(steps: &StepSet, same: impl Fn(usize, usize) -> bool) -> Result<()> {
    for sym in Symmetry::all(steps.dim()) {
        for (i, s) in steps.steps().iter().enumerate() {
            let j = steps
                .index_of(sym.apply(s.coords()).coords())
                .expect("validated step sets are symmetric");
            if !same(i, j) {
                return Err(Error::InvalidDistribution(format!(
                    "probabilities of {s:?} and its image differ"
                )));
            }
        }
    }
    Ok(())
}

/// A complete polymer model: jump distribution plus potential.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub rho: JumpDistribution,
    pub phi: Potential,
}

impl Model {
    pub fn new(rho: JumpDistribution, phi: Potential) -> Model {
        Model { rho, phi }
    }

    /// Uniform nearest-neighbour steps in dimension `dim`.
    pub fn nearest_neighbor(dim: usize, phi: Potential) -> Result<Model> {
        Ok(Model::new(
            JumpDistribution::uniform(StepSet::nearest_neighbor(dim)?),
            phi,
        ))
    }

    pub fn dim(&self) -> usize {
        self.rho.steps().dim()
    }

    pub fn steps(&self) -> &StepSet {
        self.rho.steps()
    }

    pub fn weight(&self, w: &Walk) -> Result<LogWeight> {
        weight_sigma(w, &self.phi, &self.rho)
    }
}

/// A weight in the log domain.
#[derive(Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogWeight(pub f64);

impl LogWeight {
    pub const ZERO: LogWeight = LogWeight(f64::NEG_INFINITY);
    pub const ONE: LogWeight = LogWeight(0.0);

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn linear(self) -> f64 {
        self.0.exp()
    }
}

impl std::ops::Add for LogWeight {
    type Output = LogWeight;
    fn add(self, rhs: LogWeight) -> LogWeight {
        LogWeight(self.0 + rhs.0)
    }
}

impl fmt::Debug for LogWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LogWeight({})", self.0)
    }
}

/// Visit counts `l_v(γ)` of the vertices of a walk.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LocalTimeMap {
    counts: HashMap<LatticeVector, u32>,
}

impl LocalTimeMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn of_walk(w: &Walk) -> LocalTimeMap {
        let mut map = LocalTimeMap::new();
        for p in w.points() {
            map.push(p);
        }
        map
    }

    pub fn get(&self, v: &[i32]) -> u32 {
        self.counts
            .get(&LatticeVector::new(v))
            .copied()
            .unwrap_or(0)
    }

    /// Records one more visit; returns the count before the visit.
    pub fn push(&mut self, v: &[i32]) -> u32 {
        let c = self.counts.entry(LatticeVector::new(v)).or_insert(0);
        *c += 1;
        *c - 1
    }

    /// Removes one visit; vertices dropping to zero are forgotten.
    pub fn pop(&mut self, v: &[i32]) {
        let key = LatticeVector::new(v);
        match self.counts.get_mut(&key) {
            Some(c) if *c > 1 => *c -= 1,
            Some(_) => {
                self.counts.remove(&key);
            }
            None => panic!("popping unvisited vertex {key:?}"),
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }

    pub fn max_multiplicity(&self) -> u32 {
        self.counts.values().copied().max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LatticeVector, u32)> {
        self.counts.iter().map(|(k, &v)| (k, v))
    }

    /// `Σ_v φ(l_v)`; `+∞` for forbidden configurations.
    pub fn repulsion(&self, phi: &Potential) -> Result<f64> {
        let mut total = 0.0;
        for &c in self.counts.values() {
            total += phi.phi(c as usize)?;
        }
        Ok(total)
    }
}

/// Local times of a walk.
pub fn local_times(w: &Walk) -> LocalTimeMap {
    LocalTimeMap::of_walk(w)
}

/// `log σ(γ) = −Σ_v φ(l_v(γ)) + Σ_i log ρ(γ(i) − γ(i−1))`.
pub fn weight_sigma(w: &Walk, phi: &Potential, rho: &JumpDistribution) -> Result<LogWeight> {
    let mut log_steps = 0.0;
    for k in 1..=w.len() {
        let inc = w.increment(k);
        let idx = rho.steps().index_of(inc.coords()).ok_or_else(|| {
            Error::InvalidWalk(format!("increment {k} = {inc:?} is not in the step set"))
        })?;
        log_steps += rho.log_prob(idx);
    }
    let repulsion = local_times(w).repulsion(phi)?;
    if repulsion == f64::INFINITY {
        return Ok(LogWeight::ZERO);
    }
    Ok(LogWeight(log_steps - repulsion))
}

/// Weight change from appending `next` to the prefix summarised by `state`:
/// `log ρ(step) − (φ(c+1) − φ(c))` with `c` the current count of `next`.
pub fn incremental_weight_delta(
    state: &LocalTimeMap,
    next: &[i32],
    step_prob: f64,
    phi: &Potential,
) -> Result<LogWeight> {
    let c = state.get(next) as usize;
    let inc = phi.increment(c)?;
    if inc == f64::INFINITY {
        return Ok(LogWeight::ZERO);
    }
    Ok(LogWeight(step_prob.ln() - inc))
}

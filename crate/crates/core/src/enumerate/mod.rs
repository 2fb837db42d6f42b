//! Exhaustive weighted enumeration of walks, half-space walks, bridges and
//! irreducible bridges, with the connective-constant bracket and the
//! truncated generating series built on top of it.

mod engine;
mod shard;

use serde::{Deserialize, Serialize};

pub use engine::{Budget, DfsState, Engine, Visitor};
pub use shard::{enumerate_sharded, run_shards, shard_enumeration, ShardPlan, Subtask};

use crate::decompose::has_renewal_xs;
use crate::model::Model;
use crate::numeric::{relative_difference, LogSumExp, NeumaierSum};
use crate::par::Execution;
use crate::{Error, Result};

pub const DEFAULT_NODE_BUDGET: u64 = 5_000_000_000;

/// Tolerance for the agreement between compensated and log-sum-exp totals.
pub const LSE_AGREEMENT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct EnumerateOptions {
    pub max_len: usize,
    /// Shard prefix length; `None` picks one from the step-set size.
    pub prefix_depth: Option<usize>,
    pub node_budget: u64,
    pub execution: Execution,
}

impl EnumerateOptions {
    pub fn new(max_len: usize) -> Self {
        EnumerateOptions {
            max_len,
            prefix_depth: None,
            node_budget: DEFAULT_NODE_BUDGET,
            execution: Execution::default(),
        }
    }

    pub fn prefix_depth(mut self, depth: usize) -> Self {
        self.prefix_depth = Some(depth);
        self
    }

    pub fn node_budget(mut self, budget: u64) -> Self {
        self.node_budget = budget;
        self
    }

    pub fn execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub(crate) fn resolved_depth(&self, branching: usize) -> usize {
        if self.max_len == 0 {
            return 0;
        }
        let depth = self.prefix_depth.unwrap_or_else(|| {
            let mut depth = 0;
            let mut width = 1usize;
            while width < 256 {
                width = width.saturating_mul(branching.max(2));
                depth += 1;
            }
            depth
        });
        depth.min(self.max_len - 1)
    }
}

/// Per-length aggregates of the walk tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationRow {
    pub n: usize,
    /// `Z_n`, compensated linear sum.
    pub z: f64,
    /// `log Z_n`, log-sum-exp.
    pub log_z: f64,
    /// `H_n`: bridges.
    pub h: f64,
    /// `H_{n,h}` indexed by the bridge width `h = x(γ(n))`.
    pub h_by_width: Vec<f64>,
    /// `Z(W_n^+)`: walks with `x > 0` after the first step.
    pub zplus: f64,
    /// Total weight of irreducible bridges of length `n`.
    pub ib_mass: f64,
    /// Walks of length `n` with non-zero weight.
    pub configurations: u64,
    pub bridges: u64,
    pub irreducible_bridges: u64,
    /// `Z_n · denominator^n`, present when the model admits exact arithmetic.
    pub exact_z_numerator: Option<u128>,
    pub exact_h_numerator: Option<u128>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationReport {
    pub max_len: usize,
    pub rows: Vec<EnumerationRow>,
    /// Common denominator of the jump probabilities in exact mode.
    pub exact_denominator: Option<u64>,
    /// Largest relative gap between the compensated and log-sum-exp `Z_n`.
    pub lse_max_relative_difference: f64,
    pub lse_agreement: bool,
    pub nodes: u64,
    pub partial: bool,
}

impl EnumerationReport {
    pub fn z(&self, n: usize) -> f64 {
        self.rows[n].z
    }

    pub fn h(&self, n: usize) -> f64 {
        self.rows[n].h
    }

    pub fn zplus(&self, n: usize) -> f64 {
        self.rows[n].zplus
    }

    pub fn ib_mass(&self, n: usize) -> f64 {
        self.rows[n].ib_mass
    }
}

#[derive(Debug, Clone, Default)]
struct RowAccumulator {
    z: NeumaierSum,
    z_lse: LogSumExp,
    h: NeumaierSum,
    h_by_width: Vec<NeumaierSum>,
    zplus: NeumaierSum,
    ib: NeumaierSum,
    configurations: u64,
    bridges: u64,
    irreducible: u64,
    exact_z: u128,
    exact_h: u128,
}

impl RowAccumulator {
    fn merge(&mut self, o: &RowAccumulator) {
        self.z.merge(&o.z);
        self.z_lse.merge(&o.z_lse);
        self.h.merge(&o.h);
        if self.h_by_width.len() < o.h_by_width.len() {
            self.h_by_width
                .resize(o.h_by_width.len(), NeumaierSum::new());
        }
        for (a, b) in self.h_by_width.iter_mut().zip(&o.h_by_width) {
            a.merge(b);
        }
        self.zplus.merge(&o.zplus);
        self.ib.merge(&o.ib);
        self.configurations += o.configurations;
        self.bridges += o.bridges;
        self.irreducible += o.irreducible;
        self.exact_z += o.exact_z;
        self.exact_h += o.exact_h;
    }
}

/// Mergeable visitor that classifies every node of the walk tree.
#[derive(Debug, Clone)]
pub struct ReportAccumulator {
    rows: Vec<RowAccumulator>,
    exact_denominator: Option<u64>,
    nodes: u64,
    scratch: Vec<i32>,
}

impl ReportAccumulator {
    pub fn new(model: &Model, max_len: usize) -> Self {
        let exact_denominator = model.rho.rational_form().and_then(|r| {
            let fits = (r.denominator as u128)
                .checked_pow(max_len as u32)
                .is_some();
            (model.phi.is_zero_one() && fits).then_some(r.denominator)
        });
        ReportAccumulator {
            rows: vec![RowAccumulator::default(); max_len + 1],
            exact_denominator,
            nodes: 0,
            scratch: Vec::new(),
        }
    }

    pub fn merge(&mut self, other: &ReportAccumulator) {
        for (a, b) in self.rows.iter_mut().zip(&other.rows) {
            a.merge(b);
        }
        self.nodes += other.nodes;
    }

    pub fn finish(&self, partial: bool) -> EnumerationReport {
        let mut worst = 0.0f64;
        let rows: Vec<EnumerationRow> = self
            .rows
            .iter()
            .enumerate()
            .map(|(n, r)| {
                let z = r.z.value();
                let log_z = r.z_lse.value();
                worst = worst.max(relative_difference(z, log_z.exp()));
                let exact = self.exact_denominator.is_some();
                EnumerationRow {
                    n,
                    z,
                    log_z,
                    h: r.h.value(),
                    h_by_width: r.h_by_width.iter().map(NeumaierSum::value).collect(),
                    zplus: r.zplus.value(),
                    ib_mass: r.ib.value(),
                    configurations: r.configurations,
                    bridges: r.bridges,
                    irreducible_bridges: r.irreducible,
                    exact_z_numerator: exact.then_some(r.exact_z),
                    exact_h_numerator: exact.then_some(r.exact_h),
                }
            })
            .collect();
        EnumerationReport {
            max_len: self.rows.len() - 1,
            rows,
            exact_denominator: self.exact_denominator,
            lse_max_relative_difference: worst,
            lse_agreement: worst <= LSE_AGREEMENT_TOLERANCE,
            nodes: self.nodes,
            partial,
        }
    }
}

impl Visitor for ReportAccumulator {
    fn visit(&mut self, s: &DfsState<'_>) {
        self.nodes += 1;
        let n = s.depth;
        let w = s.log_weight.exp();
        let row = &mut self.rows[n];
        row.z.add(w);
        row.z_lse.add(s.log_weight);
        row.configurations += 1;
        let exact = s.exact_numerator.unwrap_or(0);
        row.exact_z += exact;

        let x_end = s.xs[n];
        let half_space = n == 0 || s.min_x_after_start > 0;
        if !half_space {
            return;
        }
        row.zplus.add(w);
        let bridge = n == 0 || s.max_x_after_start <= x_end;
        if !bridge {
            return;
        }
        row.h.add(w);
        row.bridges += 1;
        row.exact_h += exact;
        let h = x_end as usize;
        if row.h_by_width.len() <= h {
            row.h_by_width.resize(h + 1, NeumaierSum::new());
        }
        row.h_by_width[h].add(w);
        if n >= 1 && !has_renewal_xs(s.xs, &mut self.scratch) {
            row.ib.add(w);
            row.irreducible += 1;
        }
    }
}

/// Enumerates every walk of length `<= max_len`.
pub fn enumerate_all(model: &Model, max_len: usize) -> Result<EnumerationReport> {
    enumerate_sharded(model, &EnumerateOptions::new(max_len))
}

/// Bracket on the connective constant from finite enumeration:
/// `max_n (1/n) log H_n <= λ₀ <= min_n (1/n) log Z_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaBracket {
    pub lower: f64,
    pub upper: f64,
    /// `(1/n) log H_n` for `n = 1..=N`.
    pub lower_trace: Vec<f64>,
    /// `(1/n) log Z_n` for `n = 1..=N`.
    pub upper_trace: Vec<f64>,
}

impl LambdaBracket {
    pub fn contains(&self, lambda: f64) -> bool {
        self.lower <= lambda && lambda <= self.upper
    }
}

pub fn lambda_bracket(report: &EnumerationReport) -> Result<LambdaBracket> {
    if report.max_len < 1 {
        return Err(Error::InvalidArgument("bracket needs N >= 1".into()));
    }
    let mut lower_trace = Vec::with_capacity(report.max_len);
    let mut upper_trace = Vec::with_capacity(report.max_len);
    for row in &report.rows[1..] {
        if !(row.h > 0.0) {
            return Err(Error::DegenerateModel(format!("H_{} = 0", row.n)));
        }
        let n = row.n as f64;
        lower_trace.push(row.h.ln() / n);
        upper_trace.push(row.log_z / n);
    }
    Ok(LambdaBracket {
        lower: lower_trace
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
        upper: upper_trace.iter().copied().fold(f64::INFINITY, f64::min),
        lower_trace,
        upper_trace,
    })
}

/// `S_N(λ) = Σ_{1 <= n <= N} iB_n e^{−λ n}`.
pub fn kesten_partial_sum(report: &EnumerationReport, lambda: f64) -> f64 {
    kesten_trace(report, lambda).last().copied().unwrap_or(0.0)
}

/// `S_1(λ), …, S_N(λ)`.
pub fn kesten_trace(report: &EnumerationReport, lambda: f64) -> Vec<f64> {
    let mut acc = NeumaierSum::new();
    report.rows[1..]
        .iter()
        .map(|row| {
            acc.add(row.ib_mass * (-lambda * row.n as f64).exp());
            acc.value()
        })
        .collect()
}

/// One-sided comparison of the truncated bridge series with the Kesten
/// resummation `1 / (1 − S_N(λ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResummationCheck {
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesEvaluation {
    pub lambda: f64,
    pub max_len: usize,
    /// `Σ_{n<=N} Z_n e^{−λ n}`.
    pub w_truncated: f64,
    /// `Σ_{n<=N} H_n e^{−λ n}`.
    pub h_truncated: f64,
    pub kesten_sum: f64,
    /// Absent when `S_N(λ) >= 1`.
    pub resummation: Option<ResummationCheck>,
}

pub fn evaluate_series(report: &EnumerationReport, lambda: f64) -> SeriesEvaluation {
    let discounted = |f: fn(&EnumerationRow) -> f64| {
        report
            .rows
            .iter()
            .map(|r| {
                let v = f(r);
                if v == 0.0 {
                    0.0
                } else {
                    v * (-lambda * r.n as f64).exp()
                }
            })
            .collect::<NeumaierSum>()
            .value()
    };
    let h_truncated = discounted(|r| r.h);
    let kesten_sum = kesten_partial_sum(report, lambda);
    SeriesEvaluation {
        lambda,
        max_len: report.max_len,
        w_truncated: discounted(|r| r.z),
        h_truncated,
        kesten_sum,
        resummation: resummation_check(report, lambda).ok(),
    }
}

/// Checks `H_truncated <= 1 / (1 − S_N(λ))`; errors when `S_N(λ) >= 1`.
pub fn resummation_check(report: &EnumerationReport, lambda: f64) -> Result<ResummationCheck> {
    let s = kesten_partial_sum(report, lambda);
    if s >= 1.0 {
        return Err(Error::SNotBelowOne(s));
    }
    let bound = 1.0 / (1.0 - s);
    let h: f64 = report
        .rows
        .iter()
        .map(|r| r.h * (-lambda * r.n as f64).exp())
        .collect::<NeumaierSum>()
        .value();
    Ok(ResummationCheck {
        bound,
        holds: h <= bound * (1.0 + 1e-12),
    })
}

/// `c_n = (log Z_n − log H_n) / √n`, the smallest constant with
/// `e^{−c √n} Z_n <= H_n` at length `n`.
pub fn bridge_gap_constants(report: &EnumerationReport) -> Vec<f64> {
    report.rows[1..]
        .iter()
        .map(|r| (r.log_z - r.h.ln()) / (r.n as f64).sqrt())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Potential;

    fn free() -> Model {
        Model::nearest_neighbor(2, Potential::free()).unwrap()
    }

    fn saw() -> Model {
        Model::nearest_neighbor(2, Potential::saw()).unwrap()
    }

    #[test]
    fn free_walks_are_normalised() {
        let r = enumerate_all(&free(), 6).unwrap();
        for row in &r.rows {
            assert!((row.z - 1.0).abs() < 1e-12);
        }
        assert!(r.lse_agreement);
    }

    #[test]
    fn self_avoiding_counts() {
        let r = enumerate_all(&saw(), 4).unwrap();
        let counts: Vec<u128> = r.rows[1..]
            .iter()
            .map(|row| row.exact_z_numerator.unwrap())
            .collect();
        assert_eq!(counts, vec![4, 12, 36, 100]);
        assert_eq!(r.exact_denominator, Some(4));
        assert!((r.h(1) - 0.25).abs() < 1e-15);
        assert_eq!(r.rows[1].bridges, 1);
    }

    #[test]
    fn small_bridge_counts_by_hand() {
        // length 2 nearest-neighbour bridges: EE, EN, ES
        let r = enumerate_all(&free(), 2).unwrap();
        assert_eq!(r.rows[2].bridges, 3);
        assert_eq!(r.rows[2].irreducible_bridges, 2);
        assert!((r.h(2) - 3.0 / 16.0).abs() < 1e-15);
        assert!((r.rows[2].h_by_width[2] - 1.0 / 16.0).abs() < 1e-15);
        assert!((r.rows[2].h_by_width[1] - 2.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn bracket_for_free_walks() {
        let r = enumerate_all(&free(), 6).unwrap();
        let b = lambda_bracket(&r).unwrap();
        assert!(b.upper.abs() < 1e-12);
        assert!(b.lower <= 0.0 && b.contains(0.0));
    }

    #[test]
    fn series_examples() {
        let r = enumerate_all(&free(), 8).unwrap();
        let s = evaluate_series(&r, 0.5);
        let expected = (1.0 - (-(9.0f64) / 2.0).exp()) / (1.0 - (-0.5f64).exp());
        assert!((s.w_truncated - expected).abs() < 1e-12);
        let far = evaluate_series(&r, 200.0);
        assert!((far.w_truncated - 1.0).abs() < 1e-15);
        let trace = kesten_trace(&r, 0.0);
        assert!(trace.windows(2).all(|w| w[0] <= w[1]));
        assert!(*trace.last().unwrap() <= 1.0);
        assert!(matches!(
            resummation_check(&r, -5.0),
            Err(Error::SNotBelowOne(_))
        ));
    }

    #[test]
    fn degenerate_bracket_input() {
        let mut r = enumerate_all(&free(), 2).unwrap();
        r.rows[2].h = 0.0;
        assert!(matches!(lambda_bracket(&r), Err(Error::DegenerateModel(_))));
    }
}

//! Splitting the walk tree at a fixed prefix depth into independent subtasks.

use super::engine::{Budget, DfsState, Engine};
use super::{EnumerateOptions, EnumerationReport, ReportAccumulator};
use crate::model::Model;
use crate::par::{map_ordered, Execution};
use crate::{Error, Result};

/// A subtree rooted at a weighted prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subtask {
    /// Step indices of the prefix.
    pub prefix: Vec<usize>,
}

/// The shallow part of the tree (depths below the prefix length) together
/// with the subtrees hanging off every non-zero prefix.
#[derive(Debug, Clone)]
pub struct ShardPlan {
    pub max_len: usize,
    pub prefix_depth: usize,
    pub head: ReportAccumulator,
    pub tasks: Vec<Subtask>,
}

pub fn shard_enumeration(model: &Model, max_len: usize, prefix_depth: usize) -> Result<ShardPlan> {
    if max_len > 0 && prefix_depth >= max_len {
        return Err(Error::InvalidArgument(format!(
            "prefix depth {prefix_depth} must be below the maximal length {max_len}"
        )));
    }
    let mut head = ReportAccumulator::new(model, max_len);
    let mut tasks = Vec::new();
    let mut engine = Engine::new(model, prefix_depth);
    let mut visitor = |s: &DfsState<'_>| {
        if s.depth < prefix_depth {
            super::Visitor::visit(&mut head, s);
        } else {
            tasks.push(Subtask {
                prefix: s.steps.to_vec(),
            });
        }
    };
    engine.run(&mut visitor, &Budget::new(u64::MAX))?;
    Ok(ShardPlan {
        max_len,
        prefix_depth,
        head,
        tasks,
    })
}

/// Runs every subtask and folds the results in task order.
pub fn run_shards(
    model: &Model,
    plan: &ShardPlan,
    budget: u64,
    execution: Execution,
) -> Result<EnumerationReport> {
    let budget = Budget::new(budget);
    let results = map_ordered(plan.tasks.iter().collect(), execution, |task| {
        let mut acc = ReportAccumulator::new(model, plan.max_len);
        let mut engine = Engine::new(model, plan.max_len);
        let outcome = engine.descend_prefix(&task.prefix).and_then(|live| {
            if live {
                engine.run(&mut acc, &budget)
            } else {
                Ok(())
            }
        });
        (acc, outcome)
    });
    let mut total = plan.head.clone();
    let mut failure = None;
    for (acc, outcome) in &results {
        total.merge(acc);
        if let Err(e) = outcome {
            failure.get_or_insert_with(|| clone_error(e));
        }
    }
    match failure {
        None => Ok(total.finish(false)),
        Some(Error::BudgetExceeded { limit, .. }) => Err(Error::BudgetExceeded {
            limit,
            partial: Some(Box::new(total.finish(true))),
        }),
        Some(e) => Err(e),
    }
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::BudgetExceeded { limit, .. } => Error::BudgetExceeded {
            limit: *limit,
            partial: None,
        },
        Error::CapExceeded { visits, cap } => Error::CapExceeded {
            visits: *visits,
            cap: *cap,
        },
        other => Error::InvalidArgument(other.to_string()),
    }
}

/// Shards at the configured depth and runs the subtasks.
pub fn enumerate_sharded(model: &Model, opts: &EnumerateOptions) -> Result<EnumerationReport> {
    let depth = opts.resolved_depth(model.steps().len());
    let plan = shard_enumeration(model, opts.max_len, depth)?;
    run_shards(model, &plan, opts.node_budget, opts.execution)
}

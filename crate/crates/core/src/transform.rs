//! Walk surgeries: unfolding of zigzags and stickbreaking between diamond
//! times. Site arguments are always validated against freshly computed
//! zigzag and diamond sets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::decompose::{diamond_times, is_bridge, renewal_times, zigzags};
use crate::lattice::Walk;
use crate::model::{local_times, Model};
use crate::{Error, Result};

/// Slack for log-domain weight comparisons.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

fn unfold_unchecked(w: &Walk, i: usize, j: usize) -> Walk {
    w.segment(0, i)
        .concatenate(&w.segment(i, j).reflect_x())
        .concatenate(&w.segment(j, w.len()))
}

/// `Unf_(i,j)`: reflects the segment between `i` and `j` through a plane
/// orthogonal to the x-axis. `i == j` is the identity.
pub fn unfold(w: &Walk, i: usize, j: usize) -> Result<Walk> {
    let set = zigzags(w)?;
    if i == j && 0 < i && i < w.len() {
        return Ok(w.clone());
    }
    if !set.contains((i, j)) {
        return Err(Error::NotAZigzag { i, j });
    }
    Ok(unfold_unchecked(w, i, j))
}

/// Unfolds the zigzags of `sites` one after another in the given order.
/// Every pair is validated against the zigzags of the original walk.
pub fn unfold_in_order(w: &Walk, sites: &[(usize, usize)]) -> Result<Walk> {
    let set = zigzags(w)?;
    if let Some(&(i, j)) = sites.iter().find(|&&p| !set.contains(p)) {
        return Err(Error::NotAZigzag { i, j });
    }
    Ok(sites
        .iter()
        .fold(w.clone(), |acc, &(i, j)| unfold_unchecked(&acc, i, j)))
}

/// Unfolds a set of zigzags in canonical (increasing `i`) order.
pub fn unfold_set(w: &Walk, sites: &[(usize, usize)]) -> Result<Walk> {
    let mut sorted = sites.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    unfold_in_order(w, &sorted)
}

/// `StBr_(i,j)`: rotates the segment between two diamond times a quarter
/// turn clockwise in the xy-plane. `i == j` is the identity.
pub fn stickbreak(w: &Walk, i: usize, j: usize) -> Result<Walk> {
    if i > j {
        return Err(Error::InvalidArgument(format!(
            "stickbreak sites must be ordered, got ({i}, {j})"
        )));
    }
    let diamonds = diamond_times(w)?;
    for site in [i, j] {
        if diamonds.binary_search(&site).is_err() {
            return Err(Error::NotDiamond(site));
        }
    }
    if i == j {
        return Ok(w.clone());
    }
    Ok(w.segment(0, i)
        .concatenate(&w.segment(i, j).rotate_xy_clockwise())
        .concatenate(&w.segment(j, w.len())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurgeryKind {
    Unfold,
    Stickbreak,
}

/// Input, output and contract checks of one surgery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurgeryRecord {
    pub kind: SurgeryKind,
    pub sites: Vec<(usize, usize)>,
    pub input: Walk,
    pub output: Walk,
    pub output_is_bridge: bool,
    pub checks: BTreeMap<String, bool>,
}

impl SurgeryRecord {
    pub fn all_passed(&self) -> bool {
        self.checks.values().all(|&ok| ok)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|(_, &ok)| !ok)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

fn weight_leq(a: f64, b: f64) -> bool {
    a == f64::NEG_INFINITY || a <= b + WEIGHT_TOLERANCE
}

fn weight_eq(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= WEIGHT_TOLERANCE
}

/// Unfolds a set of zigzags and, when `check` is set, evaluates the surgery
/// contracts: weight and endpoint monotonicity, renewal points at every
/// surgery site, survival of the remaining zigzags and order independence.
pub fn unfold_recorded(
    model: &Model,
    w: &Walk,
    sites: &[(usize, usize)],
    check: bool,
) -> Result<SurgeryRecord> {
    let output = unfold_set(w, sites)?;
    let mut checks = BTreeMap::new();
    let output_is_bridge = is_bridge(&output);
    if check {
        let n = w.len();
        let before = model.weight(w)?.0;
        let after = model.weight(&output)?.0;
        checks.insert("length_preserved".into(), output.len() == n);
        checks.insert("output_is_bridge".into(), output_is_bridge);
        checks.insert("weight_monotone".into(), weight_leq(before, after));
        checks.insert("endpoint_x_monotone".into(), w.x(n) <= output.x(n));
        let renewals = renewal_times(&output);
        let sites_renew = sites
            .iter()
            .filter(|(i, j)| i < j)
            .all(|&(i, j)| renewals.contains(i) && renewals.contains(j));
        checks.insert("sites_become_renewals".into(), sites_renew);
        let original = zigzags(w)?;
        let after_set = zigzags(&output).unwrap_or_default();
        let kept = original
            .pairs
            .iter()
            .filter(|p| !sites.contains(p))
            .all(|&p| after_set.contains(p));
        checks.insert("zigzags_survive".into(), kept);
        let mut reversed = sites.to_vec();
        reversed.sort_unstable_by(|a, b| b.cmp(a));
        reversed.dedup();
        checks.insert(
            "order_independent".into(),
            unfold_in_order(w, &reversed)? == output,
        );
    }
    Ok(SurgeryRecord {
        kind: SurgeryKind::Unfold,
        sites: sites.to_vec(),
        input: w.clone(),
        output,
        output_is_bridge,
        checks,
    })
}

/// Stickbreaking with optional checks: weight and length preserved, and for
/// self-avoiding inputs the output stays self-avoiding.
pub fn stickbreak_recorded(
    model: &Model,
    w: &Walk,
    i: usize,
    j: usize,
    check: bool,
) -> Result<SurgeryRecord> {
    let output = stickbreak(w, i, j)?;
    let mut checks = BTreeMap::new();
    if check {
        let before = model.weight(w)?.0;
        let after = model.weight(&output)?.0;
        checks.insert("length_preserved".into(), output.len() == w.len());
        checks.insert("weight_preserved".into(), weight_eq(before, after));
        let (m_in, m_out) = (
            local_times(w).max_multiplicity(),
            local_times(&output).max_multiplicity(),
        );
        checks.insert("no_new_collisions".into(), m_in != 1 || m_out == 1);
        let middle = (w.x(j) - w.x(i)).max(0);
        checks.insert(
            "width_at_least_middle_extent".into(),
            crate::decompose::width(&output) >= middle,
        );
    }
    Ok(SurgeryRecord {
        kind: SurgeryKind::Stickbreak,
        sites: vec![(i, j)],
        input: w.clone(),
        output_is_bridge: is_bridge(&output),
        output,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Potential;

    fn walk(s: &str) -> Walk {
        Walk::from_compass(s).unwrap()
    }

    #[test]
    fn unfold_worked_example() {
        let w = walk("EENWNEE");
        let out = unfold(&w, 3, 5).unwrap();
        assert_eq!(out.to_compass().unwrap(), "EENENEE");
        assert_eq!(out.x(out.len()), 5);
        // the same surgery assembled from the primitives
        let manual = w
            .segment(0, 3)
            .concatenate(&walk("WN").reflect_x())
            .concatenate(&walk("EE"));
        assert_eq!(out, manual);
    }

    #[test]
    fn unfold_degenerate_and_errors() {
        let w = walk("EENWNEE");
        assert_eq!(unfold(&w, 2, 2).unwrap(), w);
        assert!(matches!(
            unfold(&w, 1, 4),
            Err(Error::NotAZigzag { i: 1, j: 4 })
        ));
        assert_eq!(unfold_set(&w, &[]).unwrap(), w);
        assert!(matches!(unfold(&walk("WE"), 1, 1), Err(Error::NotABridge)));
    }

    #[test]
    fn double_dip_commutes() {
        // x: 0 1 2 1 1 2 3 4 3 3 4 5
        let w = walk("EEWNEEEWNEE");
        let z = zigzags(&w).unwrap();
        assert_eq!(z.pairs, vec![(2, 4), (7, 9)]);
        let a = unfold_in_order(&w, &[(2, 4), (7, 9)]).unwrap();
        let b = unfold_in_order(&w, &[(7, 9), (2, 4)]).unwrap();
        assert_eq!(a, b);
        let r = renewal_times(&a);
        for s in [2, 4, 7, 9] {
            assert!(r.contains(s), "{s} should be a renewal time of {a:?}");
        }
        let model = Model::nearest_neighbor(2, Potential::weak(0.5).unwrap()).unwrap();
        let record = unfold_recorded(&model, &w, &z.pairs, true).unwrap();
        assert!(record.all_passed(), "{:?}", record.failures());
    }

    #[test]
    fn stickbreak_worked_example() {
        let w = walk("EEEE");
        let out = stickbreak(&w, 1, 3).unwrap();
        let expected = Walk::from_points(&[[0, 0], [1, 0], [1, -1], [1, -2], [2, -2]]).unwrap();
        assert_eq!(out, expected);
        assert_eq!(stickbreak(&w, 2, 2).unwrap(), w);
        let model = Model::nearest_neighbor(2, Potential::saw()).unwrap();
        let rec = stickbreak_recorded(&model, &w, 1, 3, true).unwrap();
        assert!(rec.all_passed(), "{:?}", rec.failures());
        assert_eq!(crate::decompose::width(&out), 2);
    }

    #[test]
    fn stickbreak_rejects_non_diamonds() {
        let w = walk("ENNEE");
        let d = diamond_times(&w).unwrap();
        assert!(!d.contains(&1));
        assert!(matches!(stickbreak(&w, 1, 4), Err(Error::NotDiamond(1))));
        assert!(stickbreak(&w, 3, 1).is_err());
    }
}

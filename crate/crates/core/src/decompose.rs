//! Structural analysis of walks and bridges.
//!
//! Conventions, with `x(k)` the first coordinate of `γ(k)` and `n = |γ|`:
//!
//! * bridge: `x(0) < x(i) <= x(n)` for `1 <= i <= n`;
//! * renewal time: `1 <= i <= n−1` with `x(k) <= x(i)` for `k < i` and
//!   `x(i) < x(k)` for `k > i`;
//! * zigzag: `(i, j)` with `0 < i < j < n`, `x(k) <= x(i)` for `k < i`,
//!   `x(j) <= x(k) < x(i)` for `i < k < j`, `x(j) < x(k)` for `k > j`, and
//!   `x(j) < x(i)`;
//! * diamond time: a renewal time around which every other point lies in the
//!   open double cone of [`in_diamond_cone`].

use serde::{Deserialize, Serialize};

use crate::lattice::{LatticeVector, StepSet, Walk};
use crate::{Error, Result};

/// Strictly increasing renewal times of a walk.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RenewalSequence {
    pub times: Vec<usize>,
}

impl RenewalSequence {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.times.binary_search(&i).is_ok()
    }
}

/// Renewal times from the x-profile, in O(n).
pub fn renewal_times_of_xs(xs: &[i32]) -> Vec<usize> {
    let n = xs.len().saturating_sub(1);
    if n < 2 {
        return Vec::new();
    }
    let mut suffix_min = vec![i32::MAX; n + 2];
    for k in (0..=n).rev() {
        suffix_min[k] = suffix_min[k + 1].min(xs[k]);
    }
    let mut times = Vec::new();
    let mut prefix_max = xs[0];
    for i in 1..n {
        if xs[i] >= prefix_max && xs[i] < suffix_min[i + 1] {
            times.push(i);
        }
        prefix_max = prefix_max.max(xs[i]);
    }
    times
}

/// True when the x-profile has at least one renewal time. `scratch` is
/// reused between calls to avoid allocation.
pub fn has_renewal_xs(xs: &[i32], scratch: &mut Vec<i32>) -> bool {
    let n = xs.len().saturating_sub(1);
    if n < 2 {
        return false;
    }
    scratch.clear();
    scratch.resize(n + 2, i32::MAX);
    for k in (0..=n).rev() {
        scratch[k] = scratch[k + 1].min(xs[k]);
    }
    let mut prefix_max = xs[0];
    for i in 1..n {
        if xs[i] >= prefix_max && xs[i] < scratch[i + 1] {
            return true;
        }
        prefix_max = prefix_max.max(xs[i]);
    }
    false
}

pub fn is_bridge_xs(xs: &[i32]) -> bool {
    let Some((&last, _)) = xs.split_last() else {
        return false;
    };
    let first = xs[0];
    xs[1..].iter().all(|&x| first < x && x <= last)
}

pub fn renewal_times(w: &Walk) -> RenewalSequence {
    RenewalSequence {
        times: renewal_times_of_xs(&w.xs()),
    }
}

pub fn is_bridge(w: &Walk) -> bool {
    is_bridge_xs(&w.xs())
}

/// A bridge with no renewal time.
pub fn is_irreducible(w: &Walk) -> bool {
    let xs = w.xs();
    is_bridge_xs(&xs) && renewal_times_of_xs(&xs).is_empty()
}

/// Splits a bridge at its renewal times into irreducible bridges.
pub fn irreducible_pieces(w: &Walk) -> Result<Vec<Walk>> {
    if !is_bridge(w) {
        return Err(Error::NotABridge);
    }
    let mut cuts = vec![0];
    cuts.extend(renewal_times(w).times);
    cuts.push(w.len());
    Ok(cuts.windows(2).map(|c| w.segment(c[0], c[1])).collect())
}

/// Bridge decomposition of an arbitrary walk into two families of bridges
/// with strictly decreasing widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeDecomposition {
    pub dim: usize,
    /// First index where x attains its minimum.
    pub split_index: usize,
    /// Bridges of the reversed part before `split_index`.
    pub negative_part: Vec<Walk>,
    pub negative_widths: Vec<i32>,
    /// Bridges of the part after `split_index`, possibly with a prepended step.
    pub positive_part: Vec<Walk>,
    pub positive_widths: Vec<i32>,
    /// The forward step added in front of the positive part, if one was needed.
    pub prepended_step: Option<LatticeVector>,
}

impl BridgeDecomposition {
    /// Inverts the decomposition.
    pub fn reconstruct(&self) -> Walk {
        let mut positive = rebuild_half_space(self.dim, &self.positive_part);
        if self.prepended_step.is_some() {
            positive = positive.segment(1, positive.len());
        }
        let negative = rebuild_half_space(self.dim, &self.negative_part).reversed();
        negative.concatenate(&positive)
    }

    /// Total number of steps over all bridges.
    pub fn total_steps(&self) -> usize {
        self.negative_part
            .iter()
            .chain(&self.positive_part)
            .map(Walk::len)
            .sum()
    }
}

fn rebuild_half_space(dim: usize, bridges: &[Walk]) -> Walk {
    let mut iter = bridges.iter().rev();
    let Some(last) = iter.next() else {
        return Walk::empty(dim);
    };
    iter.fold(last.clone(), |acc, b| b.concatenate(&acc.reflect_x()))
}

/// Decomposes a walk of the half-space (`x > 0` after the first step):
/// cut at the last maximum of x, reflect the rest, repeat.
fn decompose_half_space(mut w: Walk) -> Vec<Walk> {
    let mut bridges = Vec::new();
    while !w.is_empty() {
        if is_bridge(&w) {
            bridges.push(w);
            break;
        }
        let xs = w.xs();
        let top = *xs.iter().max().expect("non-empty");
        let cut = xs.iter().rposition(|&x| x == top).expect("max exists");
        bridges.push(w.segment(0, cut));
        w = w.segment(cut, w.len()).reflect_x();
    }
    bridges
}

/// Hammersley–Welsh decomposition of `w` into bridges.
pub fn hw_decompose(w: &Walk, steps: &StepSet) -> BridgeDecomposition {
    let xs = w.xs();
    let low = *xs.iter().min().expect("walks have a point");
    let split = xs.iter().position(|&x| x == low).expect("min exists");

    let negative_part = if split > 0 {
        decompose_half_space(w.segment(0, split).reversed())
    } else {
        Vec::new()
    };

    let mut tail = w.segment(split, w.len());
    let mut prepended_step = None;
    if !tail.is_empty() && (1..=tail.len()).any(|k| tail.x(k) <= 0) {
        let step = steps.smallest_forward_step().clone();
        tail = Walk::from_steps(w.dim(), &[step.coords()])
            .expect("step has walk dimension")
            .concatenate(&tail);
        prepended_step = Some(step);
    }
    let positive_part = decompose_half_space(tail);

    let widths = |part: &[Walk]| part.iter().map(|b| b.x(b.len())).collect::<Vec<_>>();
    BridgeDecomposition {
        dim: w.dim(),
        split_index: split,
        negative_widths: widths(&negative_part),
        positive_widths: widths(&positive_part),
        negative_part,
        positive_part,
        prepended_step,
    }
}

/// Number of steps crossing each plane `x = x0 + 1/2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossingProfile {
    /// The smallest plane offset `x0` covered (the walk's minimal x).
    pub first_offset: i32,
    /// `counts[k]` is the number of crossings of the plane `first_offset + k + 1/2`.
    pub counts: Vec<u32>,
}

impl CrossingProfile {
    /// `Rl^m`: offsets of planes crossed between 1 and `m` times.
    pub fn rl(&self, m: u32) -> Vec<i32> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c >= 1 && c <= m)
            .map(|(k, _)| self.first_offset + k as i32)
            .collect()
    }

    pub fn crossings_at(&self, x0: i32) -> u32 {
        let k = x0 - self.first_offset;
        if k < 0 {
            return 0;
        }
        self.counts.get(k as usize).copied().unwrap_or(0)
    }
}

/// A step from x = a to x = b crosses the plane `x0 + 1/2` iff
/// `min(a, b) <= x0 < max(a, b)`.
pub fn crossing_profile(w: &Walk) -> CrossingProfile {
    let (lo, hi) = w.x_range();
    let mut counts = vec![0u32; (hi - lo) as usize];
    for k in 1..=w.len() {
        let (a, b) = (w.x(k - 1), w.x(k));
        for x0 in a.min(b)..a.max(b) {
            counts[(x0 - lo) as usize] += 1;
        }
    }
    CrossingProfile {
        first_offset: lo,
        counts,
    }
}

/// Result of comparing renewal times with once-crossed planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenewalCrossingSandwich {
    /// `|R_γ|`.
    pub renewals: usize,
    /// `|Rl^1_γ|`.
    pub once_crossed: usize,
    /// `D`.
    pub x_extent: i32,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

/// Checks `|R| <= |Rl^1| <= D (|R| + 1)` for a bridge. The origin is counted
/// as the renewal point `r_0 = 0`, which makes the nearest-neighbour case a
/// bijection between renewal points and once-crossed planes.
pub fn renewal_crossing_sandwich(w: &Walk, x_extent: i32) -> RenewalCrossingSandwich {
    let renewals = renewal_times(w).len();
    let once_crossed = crossing_profile(w).rl(1).len();
    RenewalCrossingSandwich {
        renewals,
        once_crossed,
        x_extent,
        lower_holds: renewals <= once_crossed,
        upper_holds: once_crossed <= x_extent as usize * (renewals + 1),
    }
}

/// Disjoint zigzags of a bridge.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZigzagSet {
    pub pairs: Vec<(usize, usize)>,
}

impl ZigzagSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, pair: (usize, usize)) -> bool {
        self.pairs.contains(&pair)
    }

    /// Zigzags with `j − i <= threshold`.
    pub fn short(&self, threshold: usize) -> ZigzagSet {
        ZigzagSet {
            pairs: self
                .pairs
                .iter()
                .copied()
                .filter(|&(i, j)| j - i <= threshold)
                .collect(),
        }
    }

    /// True when the index intervals `[i, j]` are pairwise disjoint.
    pub fn is_disjoint(&self) -> bool {
        let mut sorted = self.pairs.clone();
        sorted.sort_unstable();
        sorted.windows(2).all(|w| w[0].1 < w[1].0)
    }
}

/// Zigzags from the x-profile. Candidates `i` are running-maximum positions;
/// for each, `j` is forced to be the last minimiser of x over `(i, n]`.
pub fn zigzags_of_xs(xs: &[i32]) -> Vec<(usize, usize)> {
    let n = xs.len().saturating_sub(1);
    let mut pairs = Vec::new();
    if n < 2 {
        return pairs;
    }
    // last_min[k] = last index attaining min xs[k..=n]
    let mut last_min = vec![n; n + 1];
    for k in (0..n).rev() {
        let after = last_min[k + 1];
        last_min[k] = if xs[k] < xs[after] { k } else { after };
    }
    let mut prefix_max = xs[0];
    let mut i = 1;
    while i < n {
        if xs[i] < prefix_max {
            i += 1;
            continue;
        }
        prefix_max = xs[i];
        let j = last_min[i + 1];
        if j < n && xs[j] < xs[i] {
            match (i + 1..j).find(|&k| xs[k] >= xs[i]) {
                None => {
                    pairs.push((i, j));
                    i = j + 1;
                }
                Some(k) => i = k,
            }
        } else {
            i += 1;
        }
    }
    pairs
}

pub fn zigzags(w: &Walk) -> Result<ZigzagSet> {
    let xs = w.xs();
    if !is_bridge_xs(&xs) {
        return Err(Error::NotABridge);
    }
    let set = ZigzagSet {
        pairs: zigzags_of_xs(&xs),
    };
    debug_assert!(set.is_disjoint());
    Ok(set)
}

/// The double cone around a diamond point, for the offset `(dx, dy)` of
/// another point: `dx >= dy > −dx` ahead and `|dx| > dy > −|dx|` behind.
#[inline]
pub fn in_diamond_cone(dx: i32, dy: i32) -> bool {
    if dx > 0 {
        dx >= dy && dy > -dx
    } else if dx < 0 {
        -dx > dy && dy > dx
    } else {
        false
    }
}

fn require_planar(w: &Walk) -> Result<()> {
    if w.dim() < 2 {
        return Err(Error::InvalidArgument(
            "diamond times and widths need at least two coordinates".into(),
        ));
    }
    Ok(())
}

/// True when every point of `w` with index in `lo..=hi` other than `i` lies in
/// the diamond cone around `γ(i)`.
pub fn cone_holds_within(w: &Walk, i: usize, lo: usize, hi: usize) -> bool {
    let (cx, cy) = (w.x(i), w.y(i));
    (lo..=hi.min(w.len()))
        .filter(|&k| k != i)
        .all(|k| in_diamond_cone(w.x(k) - cx, w.y(k) - cy))
}

pub fn diamond_times(w: &Walk) -> Result<Vec<usize>> {
    require_planar(w)?;
    let xs = w.xs();
    if !is_bridge_xs(&xs) {
        return Err(Error::NotABridge);
    }
    Ok(renewal_times_of_xs(&xs)
        .into_iter()
        .filter(|&i| cone_holds_within(w, i, 0, w.len()))
        .collect())
}

/// `W(γ) = max_{i,j} y(γ(i)) − y(γ(j))`.
pub fn width(w: &Walk) -> i32 {
    assert!(w.dim() >= 2, "width needs a second coordinate");
    let ys = (0..=w.len()).map(|k| w.y(k));
    ys.clone().max().unwrap_or(0) - ys.min().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walk(s: &str) -> Walk {
        Walk::from_compass(s).unwrap()
    }

    /// Quadratic literal-definition oracle for renewal times.
    fn renewal_oracle(xs: &[i32]) -> Vec<usize> {
        let n = xs.len() - 1;
        (1..n.max(1))
            .filter(|&i| (0..i).all(|k| xs[k] <= xs[i]) && (i + 1..=n).all(|k| xs[i] < xs[k]))
            .collect()
    }

    /// Literal-definition oracle for zigzags: every pair is tested.
    fn zigzag_oracle(xs: &[i32]) -> Vec<(usize, usize)> {
        let n = xs.len() - 1;
        let mut out = Vec::new();
        for i in 1..n {
            for j in i + 1..n {
                let ok = xs[j] < xs[i]
                    && (0..i).all(|k| xs[k] <= xs[i])
                    && (i + 1..j).all(|k| xs[j] <= xs[k] && xs[k] < xs[i])
                    && (j + 1..=n).all(|k| xs[j] < xs[k]);
                if ok {
                    out.push((i, j));
                }
            }
        }
        out
    }

    #[test]
    fn renewal_examples() {
        assert_eq!(renewal_times(&walk("EE")).times, vec![1]);
        assert_eq!(renewal_times(&walk("ENW")).times, Vec::<usize>::new());
        let w = walk("ENSE");
        assert_eq!(renewal_times(&w).times, vec![3]);
        assert_eq!(renewal_oracle(&w.xs()), vec![3]);
    }

    #[test]
    fn bridge_and_irreducibility_examples() {
        assert!(is_bridge(&walk("E")) && is_irreducible(&walk("E")));
        assert!(is_bridge(&walk("EE")) && !is_irreducible(&walk("EE")));
        assert!(!is_bridge(&walk("W")));
        assert!(is_bridge(&Walk::empty(2)));
        for s in ["ENESE", "ENENE", "ESENE", "ENWNE", "ENNES", "EENWE"] {
            let w = walk(s);
            let xs = w.xs();
            let bridge = xs[1..].iter().all(|&x| xs[0] < x && x <= xs[xs.len() - 1]);
            assert_eq!(is_bridge(&w), bridge, "{s}");
            assert_eq!(
                is_irreducible(&w),
                bridge && renewal_oracle(&xs).is_empty(),
                "{s}"
            );
        }
    }

    #[test]
    fn hw_examples() {
        let steps = StepSet::nearest_neighbor(2).unwrap();
        let b = walk("ENE");
        let d = hw_decompose(&b, &steps);
        assert_eq!(d.positive_part, vec![b.clone()]);
        assert!(d.negative_part.is_empty() && d.prepended_step.is_none());
        assert_eq!(d.reconstruct(), b);

        let w = walk("EEW");
        let d = hw_decompose(&w, &steps);
        assert_eq!(d.positive_part, vec![walk("EE"), walk("E")]);
        assert_eq!(d.positive_widths, vec![2, 1]);
        assert_eq!(d.reconstruct(), w);

        let w = walk("WNEESWWW");
        let d = hw_decompose(&w, &steps);
        assert_eq!(d.reconstruct(), w);
        assert_eq!(d.total_steps(), w.len() + d.prepended_step.iter().count());
        assert_eq!(
            hw_decompose(&Walk::empty(2), &steps).reconstruct(),
            Walk::empty(2)
        );
    }

    #[test]
    fn crossing_examples() {
        let p = crossing_profile(&walk("EE"));
        assert_eq!(p.rl(1), vec![0, 1]);
        let p = crossing_profile(&walk("EW"));
        assert!(p.rl(1).is_empty());
        assert_eq!(p.rl(2), vec![0]);
        let s = renewal_crossing_sandwich(&walk("E"), 1);
        assert!(s.lower_holds && s.upper_holds);
    }

    /// With steps of x-length 2 a bridge can have no renewal time while
    /// arbitrarily many planes are crossed once, so the upper bound fails.
    #[test]
    fn crossing_upper_bound_fails_for_longer_steps() {
        let steps: Vec<[i32; 2]> = [2, 1, -1, 2, 1, -1, 2].iter().map(|&dx| [dx, 0]).collect();
        let w = Walk::from_steps(2, &steps).unwrap();
        assert_eq!(w.xs(), vec![0, 2, 3, 2, 4, 5, 4, 6]);
        assert!(is_bridge(&w));
        let s = renewal_crossing_sandwich(&w, 2);
        assert_eq!((s.renewals, s.once_crossed), (0, 4));
        assert!(s.lower_holds && !s.upper_holds);
    }

    #[test]
    fn zigzag_examples() {
        let w = walk("EENWNEE");
        assert_eq!(w.xs(), vec![0, 1, 2, 2, 1, 1, 2, 3]);
        let z = zigzags(&w).unwrap();
        assert!(z.contains((3, 5)));
        assert_eq!(z.pairs, zigzag_oracle(&w.xs()));
        assert!(zigzags(&walk("ENENEN")).unwrap().is_empty());
        assert!(matches!(zigzags(&walk("W")), Err(Error::NotABridge)));
        assert_eq!(z.short(1).len(), 0);
        assert_eq!(z.short(2).len(), 1);
    }

    #[test]
    fn zigzag_scan_matches_oracle_on_crafted_profiles() {
        let profiles: &[&[i32]] = &[
            &[0, 2, 1, 3, 2, 4],
            &[0, 3, 1, 2, 1, 4, 2, 5],
            &[0, 1, 3, 2, 2, 1, 4, 3, 5],
            &[0, 2, 2, 1, 3],
        ];
        for xs in profiles {
            assert_eq!(zigzags_of_xs(xs), zigzag_oracle(xs), "{xs:?}");
        }
    }

    #[test]
    fn diamond_examples() {
        assert_eq!(diamond_times(&walk("EE")).unwrap(), vec![1]);
        let w = walk("ENNE");
        let renewals = renewal_times(&w).times;
        let oracle: Vec<usize> = renewals
            .iter()
            .copied()
            .filter(|&i| {
                (0..=w.len()).filter(|&k| k != i).all(|k| {
                    let (dx, dy) = (w.x(k) - w.x(i), w.y(k) - w.y(i));
                    (dx > 0 && dx >= dy && dy > -dx) || (dx < 0 && -dx > dy && dy > dx)
                })
            })
            .collect();
        assert_eq!(diamond_times(&w).unwrap(), oracle);
        assert_eq!(diamond_times(&walk("EEEE")).unwrap(), vec![1, 2, 3]);
        assert!(matches!(diamond_times(&walk("WE")), Err(Error::NotABridge)));
    }

    #[test]
    fn width_examples() {
        assert_eq!(width(&walk("EEEE")), 0);
        assert_eq!(width(&walk("ENE")), 1);
        assert_eq!(width(&walk("NNSSSS")), 4);
    }

    #[test]
    fn pieces_of_a_bridge() {
        let pieces = irreducible_pieces(&walk("EENSE")).unwrap();
        assert_eq!(pieces, vec![walk("E"), walk("ENS"), walk("E")]);
    }
}

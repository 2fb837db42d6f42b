//! Lattice geometry: points of Z^d, symmetric step sets and walks.
//!
//! Walks store absolute points in one flat buffer; increments are recomputed
//! on demand. Every cone and rotation operation acts on the first two
//! coordinates only.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;

use crate::{Error, Result};

pub type Coords = SmallVec<[i32; 4]>;

/// A point (or displacement) of Z^d.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticeVector(pub Coords);

impl LatticeVector {
    pub fn new(coords: &[i32]) -> Self {
        Self(Coords::from_slice(coords))
    }

    pub fn zero(dim: usize) -> Self {
        Self(smallvec::smallvec![0; dim])
    }

    /// Unit vector `sign * e_axis`.
    pub fn unit(dim: usize, axis: usize, sign: i32) -> Self {
        let mut v = Self::zero(dim);
        v.0[axis] = sign;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i32] {
        &self.0
    }

    pub fn x(&self) -> i32 {
        self.0[0]
    }

    pub fn y(&self) -> i32 {
        self.0[1]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn add(&self, other: &[i32]) -> Self {
        Self(self.0.iter().zip(other).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &[i32]) -> Self {
        Self(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|a| -a).collect())
    }
}

impl fmt::Debug for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl From<&[i32]> for LatticeVector {
    fn from(c: &[i32]) -> Self {
        Self::new(c)
    }
}

impl<const N: usize> From<[i32; N]> for LatticeVector {
    fn from(c: [i32; N]) -> Self {
        Self::new(&c)
    }
}

/// An element of the hyperoctahedral group: `out[k] = signs[k] * v[perm[k]]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Symmetry {
    perm: SmallVec<[usize; 4]>,
    signs: SmallVec<[i32; 4]>,
}

impl Symmetry {
    pub fn identity(dim: usize) -> Self {
        Self {
            perm: (0..dim).collect(),
            signs: smallvec::smallvec![1; dim],
        }
    }

    pub fn new(perm: &[usize], signs: &[i32]) -> Self {
        Self {
            perm: SmallVec::from_slice(perm),
            signs: SmallVec::from_slice(signs),
        }
    }

    /// All `2^d d!` signed coordinate permutations.
    pub fn all(dim: usize) -> Vec<Symmetry> {
        let mut perms = Vec::new();
        permutations(&mut (0..dim).collect::<Vec<_>>(), 0, &mut perms);
        let mut out = Vec::with_capacity(perms.len() << dim);
        for p in &perms {
            for mask in 0..(1u32 << dim) {
                let signs: Vec<i32> = (0..dim)
                    .map(|k| if mask >> k & 1 == 1 { -1 } else { 1 })
                    .collect();
                out.push(Symmetry::new(p, &signs));
            }
        }
        out
    }

    #[inline]
    pub fn apply_into(&self, v: &[i32], out: &mut [i32]) {
        for k in 0..self.perm.len() {
            out[k] = self.signs[k] * v[self.perm[k]];
        }
    }

    pub fn apply(&self, v: &[i32]) -> LatticeVector {
        let mut out = LatticeVector::zero(v.len());
        self.apply_into(v, &mut out.0);
        out
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(k, &p)| p == k) && self.signs.iter().all(|&s| s == 1)
    }
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

/// A finite step set closed under the lattice symmetries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepSet {
    steps: Vec<LatticeVector>,
    dim: usize,
    x_extent: i32,
}

impl StepSet {
    /// Validates a list of steps: non-empty, a common dimension `d >= 2`,
    /// no zero step, no duplicates and closed under every signed permutation.
    pub fn validate(steps: Vec<LatticeVector>) -> Result<StepSet> {
        let first = steps.first().ok_or(Error::EmptyStepSet)?;
        let dim = first.dim();
        if let Some(bad) = steps.iter().find(|s| s.dim() != dim) {
            return Err(Error::MixedDimension {
                expected: dim,
                found: bad.dim(),
            });
        }
        if dim < 2 {
            return Err(Error::DimensionTooSmall(dim));
        }
        if steps.iter().any(|s| s.is_zero()) {
            return Err(Error::ZeroStep);
        }
        let mut members = HashSet::with_capacity(steps.len());
        for s in &steps {
            if !members.insert(s.clone()) {
                return Err(Error::DuplicateStep(s.0.to_vec()));
            }
        }
        for sym in Symmetry::all(dim) {
            for s in &steps {
                let image = sym.apply(&s.0);
                if !members.contains(&image) {
                    return Err(Error::NotSymmetric {
                        missing: image.0.to_vec(),
                    });
                }
            }
        }
        let x_extent = steps.iter().map(|s| s.x()).max().unwrap_or(0);
        debug_assert!(x_extent >= 1);
        Ok(StepSet {
            steps,
            dim,
            x_extent,
        })
    }

    /// The `2d` nearest-neighbour steps `±e_k`.
    pub fn nearest_neighbor(dim: usize) -> Result<StepSet> {
        let mut steps = Vec::with_capacity(2 * dim);
        for axis in 0..dim {
            steps.push(LatticeVector::unit(dim, axis, 1));
            steps.push(LatticeVector::unit(dim, axis, -1));
        }
        StepSet::validate(steps)
    }

    /// The orbit closure of `generators` under the hyperoctahedral group,
    /// in first-seen order.
    pub fn symmetric_closure(dim: usize, generators: &[LatticeVector]) -> Result<StepSet> {
        let symmetries = Symmetry::all(dim);
        let mut seen = HashSet::new();
        let mut steps = Vec::new();
        for g in generators {
            if g.dim() != dim {
                return Err(Error::MixedDimension {
                    expected: dim,
                    found: g.dim(),
                });
            }
            for sym in &symmetries {
                let image = sym.apply(&g.0);
                if seen.insert(image.clone()) {
                    steps.push(image);
                }
            }
        }
        StepSet::validate(steps)
    }

    pub fn steps(&self) -> &[LatticeVector] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `D`: the largest x-coordinate of a step.
    pub fn x_extent(&self) -> i32 {
        self.x_extent
    }

    /// Largest absolute coordinate over all steps.
    pub fn max_abs_coord(&self) -> i32 {
        self.steps
            .iter()
            .flat_map(|s| s.0.iter().map(|c| c.abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn index_of(&self, step: &[i32]) -> Option<usize> {
        self.steps.iter().position(|s| s.coords() == step)
    }

    pub fn contains(&self, step: &[i32]) -> bool {
        self.index_of(step).is_some()
    }

    /// The lexicographically smallest step with positive x-coordinate.
    pub fn smallest_forward_step(&self) -> &LatticeVector {
        self.steps
            .iter()
            .filter(|s| s.x() > 0)
            .min()
            .expect("a symmetric non-empty step set has a forward step")
    }

    /// True when the step set contains the four unit steps of the xy-plane.
    pub fn has_compass_steps(&self) -> bool {
        self.dim == 2
            && [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .all(|&(a, b)| self.contains(&[a, b]))
    }
}

/// A lattice path `(γ(0), …, γ(n))` starting at the origin.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Walk {
    dim: usize,
    coords: Vec<i32>,
}

impl Walk {
    /// The walk of length zero.
    pub fn empty(dim: usize) -> Walk {
        Walk {
            dim,
            coords: vec![0; dim],
        }
    }

    /// Builds a walk from absolute points; the first point must be the origin.
    pub fn from_points<P: AsRef<[i32]>>(points: &[P]) -> Result<Walk> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidWalk("a walk has at least one point".into()))?
            .as_ref();
        let dim = first.len();
        if first.iter().any(|&c| c != 0) {
            return Err(Error::InvalidWalk(
                "the first point must be the origin".into(),
            ));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::MixedDimension {
                    expected: dim,
                    found: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Ok(Walk { dim, coords })
    }

    /// Builds a walk from its increments.
    pub fn from_steps<P: AsRef<[i32]>>(dim: usize, steps: &[P]) -> Result<Walk> {
        let mut walk = Walk::empty(dim);
        walk.coords.reserve(steps.len() * dim);
        for s in steps {
            let s = s.as_ref();
            if s.len() != dim {
                return Err(Error::MixedDimension {
                    expected: dim,
                    found: s.len(),
                });
            }
            walk.push_step(s);
        }
        Ok(walk)
    }

    /// Parses a compass string (`E`, `W`, `N`, `S`) into a planar walk.
    pub fn from_compass(letters: &str) -> Result<Walk> {
        let steps = letters
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c.to_ascii_uppercase() {
                'E' => Ok([1, 0]),
                'W' => Ok([-1, 0]),
                'N' => Ok([0, 1]),
                'S' => Ok([0, -1]),
                other => Err(Error::InvalidWalk(format!(
                    "unknown compass letter {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Walk::from_steps(2, &steps)
    }

    /// The compass string of a planar nearest-neighbour walk.
    pub fn to_compass(&self) -> Option<String> {
        if self.dim != 2 {
            return None;
        }
        (1..=self.len())
            .map(|k| match self.increment(k).coords() {
                [1, 0] => Some('E'),
                [-1, 0] => Some('W'),
                [0, 1] => Some('N'),
                [0, -1] => Some('S'),
                _ => None,
            })
            .collect()
    }

    /// Checks that every increment lies in `steps`.
    pub fn validate(&self, steps: &StepSet) -> Result<()> {
        if self.dim != steps.dim() {
            return Err(Error::MixedDimension {
                expected: steps.dim(),
                found: self.dim,
            });
        }
        for k in 1..=self.len() {
            let inc = self.increment(k);
            if !steps.contains(inc.coords()) {
                return Err(Error::InvalidWalk(format!(
                    "increment {k} = {inc:?} is not in the step set"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of steps `n`.
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[i32] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn x(&self, i: usize) -> i32 {
        self.coords[i * self.dim]
    }

    #[inline]
    pub fn y(&self, i: usize) -> i32 {
        self.coords[i * self.dim + 1]
    }

    pub fn endpoint(&self) -> &[i32] {
        self.point(self.len())
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[i32]> + DoubleEndedIterator + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn to_points(&self) -> Vec<LatticeVector> {
        self.points().map(LatticeVector::new).collect()
    }

    /// The x-coordinates of all points.
    pub fn xs(&self) -> Vec<i32> {
        self.coords.iter().step_by(self.dim).copied().collect()
    }

    /// `γ(k) − γ(k−1)` for `1 <= k <= n`.
    pub fn increment(&self, k: usize) -> LatticeVector {
        LatticeVector::new(self.point(k)).sub(self.point(k - 1))
    }

    pub fn increments(&self) -> Vec<LatticeVector> {
        (1..=self.len()).map(|k| self.increment(k)).collect()
    }

    pub(crate) fn push_step(&mut self, step: &[i32]) {
        let base = self.coords.len() - self.dim;
        for k in 0..self.dim {
            let c = self.coords[base + k] + step[k];
            self.coords.push(c);
        }
    }

    /// Points `i..=j`, translated so that `γ(i)` becomes the origin.
    pub fn segment(&self, i: usize, j: usize) -> Walk {
        assert!(i <= j && j <= self.len(), "segment {i}..{j} out of range");
        let origin = self.point(i).to_vec();
        let mut coords = Vec::with_capacity((j - i + 1) * self.dim);
        for p in (i..=j).map(|k| self.point(k)) {
            coords.extend(p.iter().zip(&origin).map(|(a, o)| a - o));
        }
        Walk {
            dim: self.dim,
            coords,
        }
    }

    /// The time-reversed walk, translated to start at the origin.
    pub fn reversed(&self) -> Walk {
        let end = self.endpoint().to_vec();
        let mut coords = Vec::with_capacity(self.coords.len());
        for p in self.points().rev() {
            coords.extend(p.iter().zip(&end).map(|(a, o)| a - o));
        }
        Walk {
            dim: self.dim,
            coords,
        }
    }

    fn map_points(&self, mut f: impl FnMut(&[i32], &mut [i32])) -> Walk {
        let mut coords = vec![0; self.coords.len()];
        for (src, dst) in self
            .coords
            .chunks_exact(self.dim)
            .zip(coords.chunks_exact_mut(self.dim))
        {
            f(src, dst);
        }
        Walk {
            dim: self.dim,
            coords,
        }
    }

    /// Reflection through the hyperplane `x = 0`.
    pub fn reflect_x(&self) -> Walk {
        self.map_points(|src, dst| {
            dst.copy_from_slice(src);
            dst[0] = -src[0];
        })
    }

    /// Quarter-turn clockwise in the xy-plane: `(x, y, …) ↦ (y, −x, …)`.
    pub fn rotate_xy_clockwise(&self) -> Walk {
        self.map_points(|src, dst| {
            dst.copy_from_slice(src);
            dst[0] = src[1];
            dst[1] = -src[0];
        })
    }

    pub fn apply_symmetry(&self, sym: &Symmetry) -> Walk {
        self.map_points(|src, dst| sym.apply_into(src, dst))
    }

    /// `self ∘ other`: `other` translated to start at this walk's endpoint.
    pub fn concatenate(&self, other: &Walk) -> Walk {
        assert_eq!(self.dim, other.dim, "dimension mismatch in concatenation");
        let end = self.endpoint().to_vec();
        let mut coords = Vec::with_capacity(self.coords.len() + other.coords.len() - self.dim);
        coords.extend_from_slice(&self.coords);
        for p in other.points().skip(1) {
            coords.extend(p.iter().zip(&end).map(|(a, o)| a + o));
        }
        Walk {
            dim: self.dim,
            coords,
        }
    }

    /// Largest and smallest x over the walk.
    pub fn x_range(&self) -> (i32, i32) {
        let xs = self.coords.iter().step_by(self.dim);
        let lo = xs.clone().copied().min().unwrap_or(0);
        let hi = xs.copied().max().unwrap_or(0);
        (lo, hi)
    }
}

impl fmt::Debug for Walk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_compass() {
            Some(s) => write!(f, "Walk({s:?})"),
            None => f.debug_list().entries(self.points()).finish(),
        }
    }
}

impl Serialize for Walk {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.points())
    }
}

impl<'de> Deserialize<'de> for Walk {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Walk, D::Error> {
        let points: Vec<Vec<i32>> = Vec::deserialize(deserializer)?;
        Walk::from_points(&points).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spread_out() -> Vec<LatticeVector> {
        let mut v = Vec::new();
        for s in [
            [1, 0],
            [-1, 0],
            [0, 1],
            [0, -1],
            [1, 1],
            [1, -1],
            [-1, 1],
            [-1, -1],
            [2, 0],
            [-2, 0],
            [0, 2],
            [0, -2],
        ] {
            v.push(LatticeVector::from(s));
        }
        v
    }

    /// Orbit closure by brute force: apply every signed permutation.
    fn closed_by_brute_force(steps: &[LatticeVector]) -> bool {
        let dim = steps[0].dim();
        let mut perms = Vec::new();
        permutations(&mut (0..dim).collect(), 0, &mut perms);
        perms.iter().all(|p| {
            (0..1u32 << dim).all(|mask| {
                steps.iter().all(|s| {
                    let img: Vec<i32> = (0..dim)
                        .map(|k| {
                            if mask >> k & 1 == 1 {
                                -s.0[p[k]]
                            } else {
                                s.0[p[k]]
                            }
                        })
                        .collect();
                    steps.iter().any(|t| t.coords() == img.as_slice())
                })
            })
        })
    }

    #[test]
    fn nearest_neighbor_is_valid() {
        let s = StepSet::nearest_neighbor(2).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.x_extent(), 1);
    }

    #[test]
    fn single_direction_is_not_symmetric() {
        let err = StepSet::validate(vec![LatticeVector::from([1, 0])]).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { .. }));
    }

    #[test]
    fn spread_out_set_is_valid_with_extent_two() {
        let steps = spread_out();
        assert!(closed_by_brute_force(&steps));
        let s = StepSet::validate(steps).unwrap();
        assert_eq!(s.x_extent(), 2);
        assert_eq!(s.smallest_forward_step().coords(), &[1, -1]);
    }

    #[test]
    fn step_set_errors() {
        assert!(matches!(
            StepSet::validate(vec![]),
            Err(Error::EmptyStepSet)
        ));
        let mut with_zero = StepSet::nearest_neighbor(2).unwrap().steps().to_vec();
        with_zero.push(LatticeVector::zero(2));
        assert!(matches!(StepSet::validate(with_zero), Err(Error::ZeroStep)));
        let mixed = vec![LatticeVector::from([1, 0]), LatticeVector::from([1, 0, 0])];
        assert!(matches!(
            StepSet::validate(mixed),
            Err(Error::MixedDimension { .. })
        ));
        let mut missing = spread_out();
        missing.retain(|s| s.coords() != [-1, 1]);
        assert!(!closed_by_brute_force(&missing));
        assert!(matches!(
            StepSet::validate(missing),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn symmetry_group_has_expected_order() {
        assert_eq!(Symmetry::all(2).len(), 8);
        assert_eq!(Symmetry::all(3).len(), 48);
        let closure = StepSet::symmetric_closure(3, &[LatticeVector::from([1, 1, 0])]).unwrap();
        assert_eq!(closure.len(), 12);
    }

    #[test]
    fn reflection_examples() {
        let w = Walk::from_points(&[[0, 0], [1, 0]]).unwrap();
        assert_eq!(
            w.reflect_x(),
            Walk::from_points(&[[0, 0], [-1, 0]]).unwrap()
        );
        let w = Walk::from_points(&[[0, 0], [1, 1], [2, 1]]).unwrap();
        assert_eq!(
            w.reflect_x(),
            Walk::from_points(&[[0, 0], [-1, 1], [-2, 1]]).unwrap()
        );
        assert_eq!(w.reflect_x().reflect_x(), w);
    }

    #[test]
    fn rotation_examples() {
        let w = Walk::from_points(&[[0, 0], [1, 0]]).unwrap();
        assert_eq!(
            w.rotate_xy_clockwise(),
            Walk::from_points(&[[0, 0], [0, -1]]).unwrap()
        );
        let w = Walk::from_points(&[[0, 0], [1, 0], [1, 1]]).unwrap();
        assert_eq!(
            w.rotate_xy_clockwise(),
            Walk::from_points(&[[0, 0], [0, -1], [1, -1]]).unwrap()
        );
        let four = w
            .rotate_xy_clockwise()
            .rotate_xy_clockwise()
            .rotate_xy_clockwise()
            .rotate_xy_clockwise();
        assert_eq!(four, w);
    }

    #[test]
    fn concatenation_examples() {
        let a = Walk::from_points(&[[0, 0], [1, 0]]).unwrap();
        let b = Walk::from_points(&[[0, 0], [0, 1]]).unwrap();
        assert_eq!(
            a.concatenate(&b),
            Walk::from_points(&[[0, 0], [1, 0], [1, 1]]).unwrap()
        );
        assert_eq!(a.concatenate(&Walk::empty(2)), a);
        assert_eq!(Walk::empty(2).concatenate(&a), a);
    }

    #[test]
    fn compass_round_trip_and_segments() {
        let w = Walk::from_compass("EENWNEE").unwrap();
        assert_eq!(w.len(), 7);
        assert_eq!(w.to_compass().unwrap(), "EENWNEE");
        assert_eq!(w.xs(), vec![0, 1, 2, 2, 1, 1, 2, 3]);
        assert_eq!(w.segment(3, 5).to_compass().unwrap(), "WN");
        assert_eq!(w.reversed().to_compass().unwrap(), "WWSESWW");
        assert!(Walk::from_compass("EQ").is_err());
    }

    #[test]
    fn walk_validation() {
        let steps = StepSet::nearest_neighbor(2).unwrap();
        assert!(Walk::from_compass("ENWS").unwrap().validate(&steps).is_ok());
        let diag = Walk::from_points(&[[0, 0], [1, 1]]).unwrap();
        assert!(diag.validate(&steps).is_err());
        assert!(Walk::from_points(&[[1, 0]]).is_err());
    }

    #[test]
    fn serde_uses_point_lists() {
        let w = Walk::from_compass("EN").unwrap();
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(json, "[[0,0],[1,0],[1,1]]");
        let back: Walk = serde_json::from_str(&json).unwrap();
        assert_eq!(back, w);
    }
}

//! Intervals of the chain, the total order on block-diagonalization steps and
//! the relative-position cases that drive the potential update.

use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sites `{left, ..., left + edges}`, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub edges: usize,
    pub left: usize,
}

impl Interval {
    pub const fn new(edges: usize, left: usize) -> Self {
        Interval { edges, left }
    }

    pub fn checked(edges: usize, left: usize, n: usize) -> Result<Self> {
        let iv = Interval { edges, left };
        if iv.is_admissible(n) {
            Ok(iv)
        } else {
            Err(Error::Domain(format!("{iv} is not an interval of a chain with {n} sites")))
        }
    }

    pub fn site(i: usize) -> Self {
        Interval { edges: 0, left: i }
    }

    pub fn whole(n: usize) -> Self {
        Interval { edges: n - 1, left: 1 }
    }

    pub fn is_admissible(&self, n: usize) -> bool {
        self.left >= 1 && self.right() <= n
    }

    pub fn right(&self) -> usize {
        self.left + self.edges
    }

    /// Number of sites.
    pub fn len(&self) -> usize {
        self.edges + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sites(&self) -> RangeInclusive<usize> {
        self.left..=self.right()
    }

    pub fn contains_site(&self, s: usize) -> bool {
        self.left <= s && s <= self.right()
    }

    /// `self ⊆ other`
    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.left <= self.left && self.right() <= other.right()
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.left <= other.right() && other.left <= self.right()
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &Interval) -> Interval {
        let left = self.left.min(other.left);
        let right = self.right().max(other.right());
        Interval { edges: right - left, left }
    }

    /// All intervals of an `n`-site chain, shortest first, then by left endpoint.
    pub fn all(n: usize) -> impl Iterator<Item = Interval> {
        (0..n).flat_map(move |k| (1..=n - k).map(move |i| Interval::new(k, i)))
    }

    /// All intervals contained in `self` (including itself), shortest first.
    pub fn sub_intervals(self) -> impl Iterator<Item = Interval> {
        (0..=self.edges).flat_map(move |k| {
            (self.left..=self.right() - k).map(move |i| Interval::new(k, i))
        })
    }

    /// The step at which this interval is block-diagonalized.
    pub fn step(&self) -> StepIndex {
        StepIndex { k: self.edges, q: self.left }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "I({},{})", self.edges, self.left)
    }
}

/// A step `(k, q)`. Field order gives the derived `Ord` the lexicographic order
/// of the flow: `(k', q') ≻ (k, q)` iff `k' > k`, or `k' = k` and `q' > q`.
/// The initial label `(0, N)` is the unique step with `k = 0` and so is the
/// minimum of any admissible set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StepIndex {
    pub k: usize,
    pub q: usize,
}

impl StepIndex {
    pub const fn new(k: usize, q: usize) -> Self {
        StepIndex { k, q }
    }

    pub const fn initial(n: usize) -> Self {
        StepIndex { k: 0, q: n }
    }

    pub fn is_initial(&self) -> bool {
        self.k == 0
    }

    pub fn is_admissible(&self, n: usize) -> bool {
        (self.k == 0 && self.q == n) || (self.k >= 1 && self.q >= 1 && self.k + self.q <= n)
    }

    /// The interval `I_{k,q}` treated at this step; `None` for `(0, N)`.
    pub fn interval(&self) -> Option<Interval> {
        (self.k >= 1).then(|| Interval::new(self.k, self.q))
    }
}

impl fmt::Display for StepIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.k, self.q)
    }
}

pub fn precedes(a: StepIndex, b: StepIndex) -> bool {
    a < b
}

pub fn step_sequence(n: usize) -> Result<Vec<StepIndex>> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "a chain needs at least 2 sites to have an interaction, got {n}"
        )));
    }
    Ok((1..n)
        .flat_map(|k| (1..=n - k).map(move |q| StepIndex::new(k, q)))
        .collect())
}

pub fn predecessor(s: StepIndex, n: usize) -> Result<StepIndex> {
    if !s.is_admissible(n) {
        return Err(Error::Domain(format!("step {s} is not admissible for N = {n}")));
    }
    match (s.k, s.q) {
        (0, _) => Err(Error::Domain("the initial step (0,N) has no predecessor".into())),
        (1, 1) => Ok(StepIndex::initial(n)),
        (k, 1) => Ok(StepIndex::new(k - 1, n - k + 1)),
        (k, q) => Ok(StepIndex::new(k, q - 1)),
    }
}

/// Position of a potential's support relative to the interval of the current step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelationCase {
    /// Shorter than the step interval: already block-diagonal, untouched.
    AI,
    /// Disjoint from the step interval.
    AII,
    /// Overlapping, at least as long, but not containing it.
    AIII,
    /// The step interval itself.
    B,
    /// Strictly contains it with both endpoints outside.
    C,
    /// Contains it and shares the left endpoint.
    D1,
    /// Contains it and shares the right endpoint (left endpoint outside).
    D2,
}

impl RelationCase {
    pub fn is_untouched(&self) -> bool {
        matches!(self, RelationCase::AI | RelationCase::AII | RelationCase::AIII)
    }
}

pub fn classify(target: Interval, step: Interval) -> RelationCase {
    use RelationCase::*;
    if target.edges < step.edges {
        return AI;
    }
    if !target.intersects(&step) {
        return AII;
    }
    if target == step {
        return B;
    }
    if step.is_subset_of(&target) {
        let left_in = step.contains_site(target.left);
        let right_in = step.contains_site(target.right());
        return match (left_in, right_in) {
            (false, false) => C,
            (true, _) => D1,
            (false, true) => D2,
        };
    }
    AIII
}

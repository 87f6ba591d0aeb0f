//! Interval ("bin") arithmetic and target-space partitioning.
//!
//! A [`Bin`] is a nonempty real interval with independently open or closed
//! boundaries, written `[a:b]`, `(a:b)`, `[a:b)` or `(a:b]`. Bins are the
//! atom of analog coverage: every artifact result, coverage target and
//! database cell is expressed in them. [`BinSet`] holds a canonical (sorted,
//! pairwise-disjoint, maximally-merged) finite union of bins and supports
//! union, difference and intersection. [`BinGrid`] partitions a domain bin
//! into half-open cells of fixed granularity for coverage accumulation.

use crate::scalar::Real;
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BinError {
    #[error("empty bin: {0}")]
    Empty(String),
    #[error("bin boundary must be a finite real: {0}")]
    NonFinite(String),
    #[error("invalid bin syntax {input:?}: {reason}")]
    Syntax { input: String, reason: String },
    #[error("grid granularity must be strictly positive and finite, got {0}")]
    BadGranularity(String),
    #[error("grid domain must have positive width, got {0}")]
    DegenerateDomain(String),
    #[error("value {value} lies outside the grid domain {domain}")]
    OutOfDomain { value: String, domain: String },
}

/// A nonempty real interval with open/closed boundaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin<T> {
    lower: T,
    upper: T,
    lower_closed: bool,
    upper_closed: bool,
}

impl<T: Real> Bin<T> {
    /// Build a bin, validating finiteness and nonemptiness.
    ///
    /// A bin is nonempty when `upper > lower`, or when `upper == lower` and
    /// both boundaries are closed (a single point).
    pub fn new(lower: T, upper: T, lower_closed: bool, upper_closed: bool) -> Result<Self, BinError> {
        if !lower.is_finite() || !upper.is_finite() {
            return Err(BinError::NonFinite(format!("{lower} / {upper}")));
        }
        let bin = Bin { lower, upper, lower_closed, upper_closed };
        if !bin.cut_pair_nonempty() {
            return Err(BinError::Empty(bin.to_string()));
        }
        Ok(bin)
    }

    /// Closed interval `[a:b]`.
    pub fn closed(lower: T, upper: T) -> Result<Self, BinError> {
        Self::new(lower, upper, true, true)
    }

    /// Half-open interval `[a:b)`.
    pub fn closed_open(lower: T, upper: T) -> Result<Self, BinError> {
        Self::new(lower, upper, true, false)
    }

    /// Degenerate single-point bin `[a:a]`.
    pub fn point(value: T) -> Result<Self, BinError> {
        Self::new(value, value, true, true)
    }

    pub fn lower(&self) -> T {
        self.lower
    }

    pub fn upper(&self) -> T {
        self.upper
    }

    pub fn lower_closed(&self) -> bool {
        self.lower_closed
    }

    pub fn upper_closed(&self) -> bool {
        self.upper_closed
    }

    /// Interval length (closure does not affect measure).
    pub fn width(&self) -> T {
        self.upper - self.lower
    }

    /// True iff `x` lies within the bin, respecting boundary closure.
    pub fn contains(&self, x: T) -> bool {
        let above_lower = self.lower < x || (self.lower == x && self.lower_closed);
        let below_upper = x < self.upper || (x == self.upper && self.upper_closed);
        above_lower && below_upper
    }

    /// Intersection of two bins, `None` when disjoint.
    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let lo = Cut::max(self.lower_cut(), other.lower_cut());
        let hi = Cut::min(self.upper_cut(), other.upper_cut());
        Self::from_cuts(lo, hi)
    }

    fn lower_cut(&self) -> Cut<T> {
        if self.lower_closed {
            Cut::below(self.lower)
        } else {
            Cut::above(self.lower)
        }
    }

    fn upper_cut(&self) -> Cut<T> {
        if self.upper_closed {
            Cut::above(self.upper)
        } else {
            Cut::below(self.upper)
        }
    }

    fn cut_pair_nonempty(&self) -> bool {
        cuts_nonempty(self.lower_cut(), self.upper_cut())
    }

    fn from_cuts(lo: Cut<T>, hi: Cut<T>) -> Option<Self> {
        if !cuts_nonempty(lo, hi) {
            return None;
        }
        Some(Bin {
            lower: lo.value,
            upper: hi.value,
            lower_closed: lo.side == CutSide::Below,
            upper_closed: hi.side == CutSide::Above,
        })
    }
}

/// Parse a bin from the textual syntax `[a:b]`, `(a:b)`, `[a:b)`, `(a:b]`.
///
/// Boundaries are decimal or scientific-notation reals; infinite boundaries
/// are rejected.
pub fn parse_bin<T: Real>(text: &str) -> Result<Bin<T>, BinError> {
    let s = text.trim();
    let syntax = |reason: &str| BinError::Syntax { input: text.to_string(), reason: reason.to_string() };
    let mut chars = s.chars();
    let open = chars.next().ok_or_else(|| syntax("empty string"))?;
    let lower_closed = match open {
        '[' => true,
        '(' => false,
        _ => return Err(syntax("must start with '[' or '('")),
    };
    let close = s.chars().last().ok_or_else(|| syntax("empty string"))?;
    let upper_closed = match close {
        ']' => true,
        ')' => false,
        _ => return Err(syntax("must end with ']' or ')'")),
    };
    let inner = &s[1..s.len() - 1];
    let mut parts = inner.splitn(2, ':');
    let lo_text = parts.next().ok_or_else(|| syntax("missing ':' separator"))?;
    let hi_text = parts.next().ok_or_else(|| syntax("missing ':' separator"))?;
    let lo: f64 = lo_text.trim().parse().map_err(|_| syntax("lower boundary is not a real"))?;
    let hi: f64 = hi_text.trim().parse().map_err(|_| syntax("upper boundary is not a real"))?;
    if !lo.is_finite() || !hi.is_finite() {
        return Err(BinError::NonFinite(s.to_string()));
    }
    let lo_t = T::from_f64(lo).ok_or_else(|| BinError::NonFinite(s.to_string()))?;
    let hi_t = T::from_f64(hi).ok_or_else(|| BinError::NonFinite(s.to_string()))?;
    Bin::new(lo_t, hi_t, lower_closed, upper_closed)
}

impl<T: Real> fmt::Display for Bin<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}:{}{}",
            if self.lower_closed { '[' } else { '(' },
            self.lower,
            self.upper,
            if self.upper_closed { ']' } else { ')' },
        )
    }
}

/// A boundary of the real line refined by side: `Below(x)` sits just below
/// the point `x`, `Above(x)` just above it. An interval is the set of reals
/// strictly between its two cuts, which encodes open/closed boundaries
/// without case analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cut<T> {
    value: T,
    side: CutSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CutSide {
    Below,
    Above,
}

impl<T: Real> Cut<T> {
    fn below(value: T) -> Self {
        Cut { value, side: CutSide::Below }
    }

    fn above(value: T) -> Self {
        Cut { value, side: CutSide::Above }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        // Boundaries are validated finite, so partial_cmp is total here.
        match self.value.partial_cmp(&other.value).expect("finite boundary") {
            Ordering::Equal => match (self.side, other.side) {
                (CutSide::Below, CutSide::Above) => Ordering::Less,
                (CutSide::Above, CutSide::Below) => Ordering::Greater,
                _ => Ordering::Equal,
            },
            ord => ord,
        }
    }

    fn min(a: Self, b: Self) -> Self {
        if a.cmp(&b) == Ordering::Greater {
            b
        } else {
            a
        }
    }

    fn max(a: Self, b: Self) -> Self {
        if a.cmp(&b) == Ordering::Less {
            b
        } else {
            a
        }
    }
}

/// True when some real x satisfies `lo < At(x) < hi`.
fn cuts_nonempty<T: Real>(lo: Cut<T>, hi: Cut<T>) -> bool {
    match lo.value.partial_cmp(&hi.value).expect("finite boundary") {
        Ordering::Less => true,
        Ordering::Equal => lo.side == CutSide::Below && hi.side == CutSide::Above,
        Ordering::Greater => false,
    }
}

/// A canonical finite union of bins: sorted ascending, pairwise disjoint,
/// with adjacent compatible bins merged (`[a:b) ∪ [b:c)` becomes `[a:c)`;
/// point-touching open/open pairs stay separate).
#[derive(Debug, Clone, PartialEq)]
pub struct BinSet<T> {
    bins: Vec<Bin<T>>,
}

impl<T> Default for BinSet<T> {
    fn default() -> Self {
        BinSet { bins: Vec::new() }
    }
}

impl<T: Real> BinSet<T> {
    pub fn empty() -> Self {
        BinSet { bins: Vec::new() }
    }

    /// Normalize an arbitrary collection of bins into canonical form.
    pub fn from_bins(bins: impl IntoIterator<Item = Bin<T>>) -> Self {
        let mut cuts: Vec<(Cut<T>, Cut<T>)> =
            bins.into_iter().map(|b| (b.lower_cut(), b.upper_cut())).collect();
        cuts.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let mut merged: Vec<(Cut<T>, Cut<T>)> = Vec::with_capacity(cuts.len());
        for (lo, hi) in cuts {
            match merged.last_mut() {
                // Merge when the next interval starts at or before the end
                // of the current one in cut order: overlapping, or touching
                // with the shared point covered by one side.
                Some(last) if lo.cmp(&last.1) != Ordering::Greater => {
                    last.1 = Cut::max(last.1, hi);
                }
                _ => merged.push((lo, hi)),
            }
        }
        BinSet {
            bins: merged
                .into_iter()
                .filter_map(|(lo, hi)| Bin::from_cuts(lo, hi))
                .collect(),
        }
    }

    pub fn single(bin: Bin<T>) -> Self {
        BinSet { bins: vec![bin] }
    }

    pub fn bins(&self) -> &[Bin<T>] {
        &self.bins
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn contains(&self, x: T) -> bool {
        self.bins.iter().any(|b| b.contains(x))
    }

    /// Total interval length (Lebesgue measure).
    pub fn measure(&self) -> T {
        self.bins.iter().fold(T::zero(), |acc, b| acc + b.width())
    }

    /// Smallest closed interval containing the whole set, `None` when empty.
    pub fn hull(&self) -> Option<Bin<T>> {
        let first = self.bins.first()?;
        let last = self.bins.last()?;
        Some(Bin {
            lower: first.lower,
            upper: last.upper,
            lower_closed: first.lower_closed,
            upper_closed: last.upper_closed,
        })
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::from_bins(self.bins.iter().chain(other.bins.iter()).copied())
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        for a in &self.bins {
            for b in &other.bins {
                if b.lower > a.upper {
                    break;
                }
                if let Some(i) = a.intersect(b) {
                    out.push(i);
                }
            }
        }
        Self::from_bins(out)
    }

    pub fn difference(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        for a in &self.bins {
            let mut pieces = vec![(a.lower_cut(), a.upper_cut())];
            for b in &other.bins {
                let b_lo = b.lower_cut();
                let b_hi = b.upper_cut();
                let mut next = Vec::with_capacity(pieces.len() + 1);
                for (lo, hi) in pieces {
                    // Left remainder: (lo, min(hi, b_lo)); right remainder:
                    // (max(lo, b_hi), hi). A lower cut reused as an upper cut
                    // flips the shared point to the other side, which is
                    // exactly the complement semantics.
                    let left = (lo, Cut::min(hi, b_lo));
                    let right = (Cut::max(lo, b_hi), hi);
                    if cuts_nonempty(left.0, left.1) {
                        next.push(left);
                    }
                    if cuts_nonempty(right.0, right.1) {
                        next.push(right);
                    }
                }
                pieces = next;
                if pieces.is_empty() {
                    break;
                }
            }
            out.extend(pieces.into_iter().filter_map(|(lo, hi)| Bin::from_cuts(lo, hi)));
        }
        Self::from_bins(out)
    }
}

impl<T: Real> fmt::Display for BinSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bins.is_empty() {
            return write!(f, "{{}}");
        }
        write!(f, "{{")?;
        for (i, b) in self.bins.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, "}}")
    }
}

impl<T: Real> FromIterator<Bin<T>> for BinSet<T> {
    fn from_iter<I: IntoIterator<Item = Bin<T>>>(iter: I) -> Self {
        Self::from_bins(iter)
    }
}

/// Uniform partition of a domain bin into half-open cells
/// `[origin + i·granularity : origin + (i+1)·granularity)`, except the final
/// cell, which is closed at the domain's upper boundary so that every domain
/// point maps to exactly one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinGrid<T> {
    origin: T,
    granularity: T,
    domain: Bin<T>,
}

impl<T: Real> BinGrid<T> {
    pub fn new(origin: T, granularity: T, domain: Bin<T>) -> Result<Self, BinError> {
        if !(granularity > T::zero()) || !granularity.is_finite() {
            return Err(BinError::BadGranularity(granularity.to_string()));
        }
        if !origin.is_finite() {
            return Err(BinError::NonFinite(origin.to_string()));
        }
        if !(domain.upper() > domain.lower()) {
            return Err(BinError::DegenerateDomain(domain.to_string()));
        }
        Ok(BinGrid { origin, granularity, domain })
    }

    pub fn origin(&self) -> T {
        self.origin
    }

    pub fn granularity(&self) -> T {
        self.granularity
    }

    pub fn domain(&self) -> Bin<T> {
        self.domain
    }

    fn raw_index(&self, x: T) -> i64 {
        ((x - self.origin) / self.granularity).floor().to_i64().unwrap_or(0)
    }

    /// Index of the first cell intersecting the domain.
    pub fn first_index(&self) -> i64 {
        self.raw_index(self.domain.lower())
    }

    /// Index of the last cell: the largest i with origin + i·g strictly
    /// below the domain's upper boundary.
    pub fn last_index(&self) -> i64 {
        let k = self.raw_index(self.domain.upper());
        if self.origin + T::from_i64(k).unwrap() * self.granularity < self.domain.upper() {
            k
        } else {
            k - 1
        }
    }

    /// The grid cell with index `i`, clipped to the domain.
    pub fn cell(&self, i: i64) -> Bin<T> {
        let step = |k: i64| self.origin + T::from_i64(k).unwrap() * self.granularity;
        let last = self.last_index();
        let raw_lower = step(i);
        let (lower, lower_closed) = if raw_lower < self.domain.lower()
            || (raw_lower == self.domain.lower() && !self.domain.lower_closed())
        {
            (self.domain.lower(), self.domain.lower_closed())
        } else {
            (raw_lower, true)
        };
        if i >= last {
            // Final cell: closed at the domain's upper boundary.
            Bin {
                lower,
                upper: self.domain.upper(),
                lower_closed,
                upper_closed: self.domain.upper_closed(),
            }
        } else {
            Bin { lower, upper: step(i + 1), lower_closed, upper_closed: false }
        }
    }

    /// The unique cell containing `x`.
    pub fn quantize(&self, x: T) -> Result<Bin<T>, BinError> {
        Ok(self.cell(self.quantize_index(x)?))
    }

    /// Index of the unique cell containing `x`.
    pub fn quantize_index(&self, x: T) -> Result<i64, BinError> {
        if !self.domain.contains(x) {
            return Err(BinError::OutOfDomain {
                value: x.to_string(),
                domain: self.domain.to_string(),
            });
        }
        let (first, last) = (self.first_index(), self.last_index());
        let mut i = self.raw_index(x).clamp(first, last);
        // The division can land one cell off when x sits exactly on a cell
        // boundary; the cells partition the domain, so a neighbor has it.
        if !self.cell(i).contains(x) {
            if i < last && self.cell(i + 1).contains(x) {
                i += 1;
            } else if i > first && self.cell(i - 1).contains(x) {
                i -= 1;
            }
        }
        Ok(i)
    }

    /// Indices of every cell whose intersection with `interval` is nonempty.
    pub fn cells_intersecting(&self, interval: &Bin<T>) -> Vec<i64> {
        let lo = self.raw_index(interval.lower()).saturating_sub(1).max(self.first_index());
        let hi = (self.raw_index(interval.upper()) + 1).min(self.last_index());
        (lo..=hi)
            .filter(|&i| self.cell(i).intersect(interval).is_some())
            .collect()
    }

    /// Canonical bin set of all cells in the grid.
    pub fn all_cells(&self) -> BinSet<T> {
        BinSet::from_bins((self.first_index()..=self.last_index()).map(|i| self.cell(i)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(s: &str) -> Bin<f64> {
        parse_bin(s).unwrap()
    }

    fn set(parts: &[&str]) -> BinSet<f64> {
        BinSet::from_bins(parts.iter().map(|s| b(s)))
    }

    #[test]
    fn contains_respects_closure() {
        assert!(b("[1.0:2.0]").contains(1.0));
        assert!(!b("(1.0:2.0]").contains(1.0));
        assert!(b("[-1.1:1.9]").contains(0.0));
        assert!(b("[3.3:3.3]").contains(3.3));
        assert!(!b("[1.0:2.0)").contains(2.0));
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(matches!(Bin::new(2.0, 1.0, true, true), Err(BinError::Empty(_))));
        assert!(matches!(Bin::new(1.0, 1.0, true, false), Err(BinError::Empty(_))));
        assert!(matches!(Bin::new(f64::NEG_INFINITY, 1.0, true, true), Err(BinError::NonFinite(_))));
        assert!(matches!(parse_bin::<f64>("[0:inf]"), Err(BinError::NonFinite(_))));
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["[1:2]", "(1:2)", "[-1.1:1.9]", "(1e-3:2.5e2]", "[0.25:0.5)"] {
            let bin = b(s);
            assert_eq!(bin, b(&bin.to_string()));
        }
        assert!(parse_bin::<f64>("1:2").is_err());
        assert!(parse_bin::<f64>("[1,2]").is_err());
        assert!(parse_bin::<f64>("[x:2]").is_err());
    }

    #[test]
    fn union_merges_adjacent_compatible() {
        assert_eq!(set(&["[0:1)"]).union(&set(&["[1:2)"])), set(&["[0:2)"]));
        assert_eq!(set(&["[0:1)"]).union(&set(&["(1:2)"])), set(&["[0:1)", "(1:2)"]));
        assert_eq!(set(&["[0:1]"]).union(&set(&["[1:2]"])), set(&["[0:2]"]));
        assert_eq!(set(&["(0:1]"]).union(&set(&["(1:2)"])), set(&["(0:2)"]));
    }

    #[test]
    fn difference_splits_intervals() {
        assert_eq!(set(&["[0:10]"]).difference(&set(&["[2:3)"])), set(&["[0:2)", "[3:10]"]));
        assert_eq!(set(&["[0:5]"]).difference(&set(&["[0:5]"])), BinSet::empty());
        assert_eq!(set(&["[0:5]"]).difference(&set(&["(0:5)"])), set(&["[0:0]", "[5:5]"]));
    }

    #[test]
    fn intersect_overlap() {
        assert_eq!(set(&["[0:5]"]).intersect(&set(&["[4:8]"])), set(&["[4:5]"]));
        assert_eq!(set(&["[0:1)"]).intersect(&set(&["[1:2]"])), BinSet::empty());
        assert_eq!(set(&["[0:1]"]).intersect(&set(&["[1:2]"])), set(&["[1:1]"]));
    }

    #[test]
    fn measure_sums_widths() {
        assert_eq!(set(&["[0:2)", "[3:10]"]).measure(), 9.0);
        assert_eq!(BinSet::<f64>::empty().measure(), 0.0);
    }

    #[test]
    fn grid_quantize_examples() {
        let grid = BinGrid::new(0.0, 0.5, b("[0:10]")).unwrap();
        assert_eq!(grid.quantize(1.2).unwrap(), b("[1.0:1.5)"));
        assert_eq!(grid.quantize(0.0).unwrap(), b("[0:0.5)"));
        assert_eq!(grid.quantize(10.0).unwrap(), b("[9.5:10]"));
        assert!(matches!(grid.quantize(10.5), Err(BinError::OutOfDomain { .. })));
    }

    #[test]
    fn grid_cells_intersecting_interval() {
        let grid = BinGrid::new(0.0, 0.5, b("[0:10]")).unwrap();
        assert_eq!(grid.cells_intersecting(&b("[1.2:1.7]")), vec![2, 3]);
        assert_eq!(grid.cells_intersecting(&b("[1.5:1.5]")), vec![3]);
        assert_eq!(grid.cells_intersecting(&b("(1.0:1.5)")), vec![2]);
        let cells = grid.cells_intersecting(&b("[9.9:10]"));
        assert_eq!(cells, vec![19]);
        assert_eq!(grid.cell(19), b("[9.5:10]"));
    }

    #[test]
    fn grid_partitions_domain() {
        let grid = BinGrid::new(0.0, 0.3, b("[0:1]")).unwrap();
        let all = grid.all_cells();
        assert_eq!(all.measure(), 1.0);
        assert_eq!(grid.last_index(), 3);
        assert_eq!(grid.cell(3), b("[0.8999999999999999:1]"));
    }

    fn arb_bin() -> impl Strategy<Value = Bin<f64>> {
        (-50i32..50, 1u32..40, any::<bool>(), any::<bool>()).prop_map(|(lo, w, lc, uc)| {
            let lower = lo as f64 * 0.25;
            let upper = lower + w as f64 * 0.25;
            Bin::new(lower, upper, lc, uc).unwrap()
        })
    }

    fn arb_set() -> impl Strategy<Value = BinSet<f64>> {
        proptest::collection::vec(arb_bin(), 0..6).prop_map(BinSet::from_bins)
    }

    proptest! {
        #[test]
        fn set_ops_agree_with_membership(a in arb_set(), bset in arb_set(), xi in -220i32..220) {
            // Probe on and off the quarter-grid so boundary points are hit.
            for x in [xi as f64 * 0.125, xi as f64 * 0.125 + 0.06125] {
                prop_assert_eq!(a.union(&bset).contains(x), a.contains(x) || bset.contains(x));
                prop_assert_eq!(a.intersect(&bset).contains(x), a.contains(x) && bset.contains(x));
                prop_assert_eq!(a.difference(&bset).contains(x), a.contains(x) && !bset.contains(x));
            }
        }

        #[test]
        fn normalize_is_idempotent(a in arb_set()) {
            let renorm = BinSet::from_bins(a.bins().iter().copied());
            prop_assert_eq!(&renorm, &a);
        }

        #[test]
        fn quantize_cell_contains_point(xi in 0i32..1000, g in 1u32..40) {
            let grid = BinGrid::new(0.0, g as f64 * 0.05, b("[0:50]")).unwrap();
            let x = xi as f64 * 0.05;
            let cell = grid.quantize(x).unwrap();
            prop_assert!(cell.contains(x));
            // Exactly one cell contains the point.
            let all = (grid.first_index()..=grid.last_index())
                .filter(|&i| grid.cell(i).contains(x))
                .count();
            prop_assert_eq!(all, 1);
        }
    }
}

//! Month-resolution calendar arithmetic.
//!
//! Everything downstream indexes time by whole months. Arithmetic works on a
//! flat month index (`year * 12 + month - 1`), so adding n months is exact and
//! never drifts; there is no day-of-month to disagree about.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A calendar month, e.g. 2001-03. Ordering is chronological.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MonthKey {
    year: i32,
    month: u8,
}

impl MonthKey {
    /// Build a month key. `month` must be in 1..=12.
    pub fn new(year: i32, month: u8) -> Self {
        assert!((1..=12).contains(&month), "month {month} out of range 1..=12");
        Self { year, month }
    }

    /// Fallible constructor for untrusted input.
    pub fn try_new(year: i32, month: i64) -> Option<Self> {
        if (1..=12).contains(&month) {
            Some(Self { year, month: month as u8 })
        } else {
            None
        }
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u8 {
        self.month
    }

    /// Flat month index used for arithmetic and ordering.
    pub fn index(&self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    /// Inverse of [`MonthKey::index`].
    pub fn from_index(index: i64) -> Self {
        let year = index.div_euclid(12);
        let month = index.rem_euclid(12) + 1;
        Self { year: year as i32, month: month as u8 }
    }

    /// This month shifted by `n` months (negative shifts backwards).
    pub fn add(&self, n: i64) -> Self {
        Self::from_index(self.index() + n)
    }

    /// Signed number of months from `other` to `self`.
    pub fn months_since(&self, other: MonthKey) -> i64 {
        self.index() - other.index()
    }

    pub fn next(&self) -> Self {
        self.add(1)
    }

    /// Inclusive range of months from `self` to `last`.
    pub fn range_to(&self, last: MonthKey) -> impl Iterator<Item = MonthKey> {
        (self.index()..=last.index()).map(MonthKey::from_index)
    }
}

impl fmt::Display for MonthKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl fmt::Debug for MonthKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MonthKey({self})")
    }
}

/// A scalar series indexed by strictly increasing months.
///
/// Unlike the panel month axis this one may have gaps; regime series and
/// index-return inputs use it.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthSeries {
    months: Vec<MonthKey>,
    values: Vec<f64>,
}

impl MonthSeries {
    /// `months` must be strictly increasing and the same length as `values`.
    pub fn new(months: Vec<MonthKey>, values: Vec<f64>) -> Self {
        assert_eq!(months.len(), values.len(), "months/values length mismatch");
        assert!(
            months.windows(2).all(|w| w[0] < w[1]),
            "months must be strictly increasing"
        );
        Self { months, values }
    }

    pub fn len(&self) -> usize {
        self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.months.is_empty()
    }

    pub fn months(&self) -> &[MonthKey] {
        &self.months
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `month`, if present.
    pub fn get(&self, month: MonthKey) -> Option<f64> {
        self.months
            .binary_search(&month)
            .ok()
            .map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (MonthKey, f64)> + '_ {
        self.months.iter().copied().zip(self.values.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn arithmetic_crosses_year_boundaries() {
        let m = MonthKey::new(2000, 11);
        assert_eq!(m.add(1), MonthKey::new(2000, 12));
        assert_eq!(m.add(2), MonthKey::new(2001, 1));
        assert_eq!(m.add(-11), MonthKey::new(1999, 12));
        assert_eq!(m.add(14).months_since(m), 14);
    }

    #[test]
    fn ordering_is_chronological() {
        let a = MonthKey::new(1999, 12);
        let b = MonthKey::new(2000, 1);
        assert!(a < b);
        assert!(MonthKey::new(2000, 2) > b);
    }

    #[test]
    fn display_is_zero_padded() {
        assert_eq!(MonthKey::new(2001, 3).to_string(), "2001-03");
    }

    #[test]
    fn month_series_lookup() {
        let s = MonthSeries::new(
            vec![MonthKey::new(2000, 1), MonthKey::new(2000, 3)],
            vec![0.1, 0.2],
        );
        assert_eq!(s.get(MonthKey::new(2000, 3)), Some(0.2));
        assert_eq!(s.get(MonthKey::new(2000, 2)), None);
    }

    proptest! {
        #[test]
        fn add_then_subtract_roundtrips(y in -5000i32..5000, m in 1u8..=12, n in -100_000i64..100_000) {
            let k = MonthKey::new(y, m);
            prop_assert_eq!(k.add(n).add(-n), k);
        }

        #[test]
        fn ordering_matches_index(y1 in 0i32..4000, m1 in 1u8..=12, y2 in 0i32..4000, m2 in 1u8..=12) {
            let a = MonthKey::new(y1, m1);
            let b = MonthKey::new(y2, m2);
            prop_assert_eq!(a.cmp(&b), a.index().cmp(&b.index()));
        }
    }
}

//! Market-condition series, their high/low dummies, and regime splits.
//!
//! Four conditions: market state (sign of the trailing index return), market
//! volatility (GJR conditional variance of index returns), market illiquidity
//! (cross-sectional average of per-stock |return|/volume), and macroeconomic
//! uncertainty (symmetric GARCH conditional variance of macro-index log
//! returns). Except for state, dummies come from a full-sample median split:
//! strictly above the median is 1, at or below it is 0.

use crate::calendar::{MonthKey, MonthSeries};
use crate::econometrics::{nw_mean_test, MeanTestResult};
use crate::error::{Error, Result};
use crate::garch::{fit_garch, GarchFit, GarchSpec};
use crate::panel::DailyBarSet;
use crate::portfolio::StrategyReturnSeries;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    State,
    Volatility,
    Illiquidity,
    Uncertainty,
}

impl Condition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Condition::State => "State",
            Condition::Volatility => "Volatility",
            Condition::Illiquidity => "Illiquidity",
            Condition::Uncertainty => "Uncertainty",
        }
    }

    pub const ALL: [Condition; 4] = [
        Condition::State,
        Condition::Volatility,
        Condition::Illiquidity,
        Condition::Uncertainty,
    ];
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A per-month condition level with its high/low dummy.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSeries {
    condition: Condition,
    months: Vec<MonthKey>,
    raw_value: Vec<f64>,
    dummy: Vec<u8>,
}

impl RegimeSeries {
    /// Build with dummies from a full-sample median split: 1 iff the raw
    /// value is strictly greater than the median.
    pub fn median_split(
        condition: Condition,
        months: Vec<MonthKey>,
        raw_value: Vec<f64>,
    ) -> Result<Self> {
        Self::check_axes(&months, &raw_value)?;
        let med = median(&raw_value);
        let dummy = raw_value.iter().map(|&v| u8::from(v > med)).collect();
        Ok(Self { condition, months, raw_value, dummy })
    }

    /// Build with explicit dummies (used by the market-state sign rule).
    pub fn with_dummies(
        condition: Condition,
        months: Vec<MonthKey>,
        raw_value: Vec<f64>,
        dummy: Vec<u8>,
    ) -> Result<Self> {
        Self::check_axes(&months, &raw_value)?;
        if dummy.len() != months.len() || dummy.iter().any(|&d| d > 1) {
            return Err(Error::InvalidInput("dummies must be 0/1, one per month".into()));
        }
        Ok(Self { condition, months, raw_value, dummy })
    }

    fn check_axes(months: &[MonthKey], raw: &[f64]) -> Result<()> {
        if months.is_empty() || months.len() != raw.len() {
            return Err(Error::InvalidInput("months/values must be non-empty and parallel".into()));
        }
        if !months.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("regime months must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }

    pub fn months(&self) -> &[MonthKey] {
        &self.months
    }

    pub fn raw_values(&self) -> &[f64] {
        &self.raw_value
    }

    pub fn dummies(&self) -> &[u8] {
        &self.dummy
    }

    pub fn len(&self) -> usize {
        self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.months.is_empty()
    }

    pub fn dummy_at(&self, month: MonthKey) -> Option<bool> {
        self.months.binary_search(&month).ok().map(|i| self.dummy[i] == 1)
    }

    /// The 0/1 dummies as a numeric month series (regression input).
    pub fn dummy_series(&self) -> MonthSeries {
        MonthSeries::new(self.months.clone(), self.dummy.iter().map(|&d| d as f64).collect())
    }

    fn all_tied(&self) -> bool {
        let first = self.raw_value[0];
        self.raw_value.iter().all(|&v| v == first)
    }
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn require_contiguous(series: &MonthSeries) -> Result<()> {
    if !series.months().windows(2).all(|w| w[1].months_since(w[0]) == 1) {
        return Err(Error::InvalidInput("series months must be contiguous".into()));
    }
    Ok(())
}

/// Market state: 1 when the summed index log return over the previous
/// `lookback` months (the current month excluded) is non-negative.
///
/// Months without `lookback` months of history are absent from the output.
pub fn market_state(index_logret: &MonthSeries, lookback: usize) -> Result<RegimeSeries> {
    require_contiguous(index_logret)?;
    if lookback == 0 {
        return Err(Error::InvalidInput("lookback must be >= 1".into()));
    }
    if index_logret.len() <= lookback {
        return Err(Error::TooFewObservations {
            required: lookback + 1,
            actual: index_logret.len(),
        });
    }
    let values = index_logret.values();
    let mut months = Vec::new();
    let mut raw = Vec::new();
    let mut dummy = Vec::new();
    for t in lookback..index_logret.len() {
        let trailing: f64 = values[t - lookback..t].iter().sum();
        months.push(index_logret.months()[t]);
        raw.push(trailing);
        dummy.push(u8::from(trailing >= 0.0));
    }
    RegimeSeries::with_dummies(Condition::State, months, raw, dummy)
}

/// Market volatility: GJR conditional variance of index log returns, median
/// split. Also returns the underlying fit for reporting.
pub fn volatility_regime(index_logret: &MonthSeries) -> Result<(RegimeSeries, GarchFit)> {
    require_contiguous(index_logret)?;
    let fit = fit_garch(index_logret.values(), &GarchSpec::asymmetric())?;
    let months = index_logret.months()[1..].to_vec();
    let series =
        RegimeSeries::median_split(Condition::Volatility, months, fit.cond_variance.clone())?;
    Ok((series, fit))
}

/// Macroeconomic uncertainty: symmetric GARCH conditional variance of the
/// macro index's log returns, median split. Needs at least 61 index levels.
pub fn macro_uncertainty(macro_index: &MonthSeries) -> Result<(RegimeSeries, GarchFit)> {
    require_contiguous(macro_index)?;
    if macro_index.len() < 61 {
        return Err(Error::TooFewObservations { required: 61, actual: macro_index.len() });
    }
    if let Some(bad) = macro_index.values().iter().find(|v| **v <= 0.0) {
        return Err(Error::InvalidInput(format!("macro index level {bad} is not positive")));
    }
    let levels = macro_index.values();
    let logret: Vec<f64> = levels.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let fit = fit_garch(&logret, &GarchSpec::symmetric())?;
    // Log returns start at the second level month, the AR lag eats another.
    let months = macro_index.months()[2..].to_vec();
    let series =
        RegimeSeries::median_split(Condition::Uncertainty, months, fit.cond_variance.clone())?;
    Ok((series, fit))
}

/// Market illiquidity: per stock-month, the mean over valid days of
/// |return| / volume; averaged across stocks into a monthly series, median
/// split.
///
/// Zero-volume days are excluded from both the sum and the day count; a
/// stock-month needs at least `min_days` valid days to qualify, and a month
/// with no qualifying stock is absent from the output.
pub fn amihud_illiquidity(bars: &DailyBarSet, min_days: usize) -> Result<RegimeSeries> {
    if min_days == 0 {
        return Err(Error::InvalidInput("min_days must be >= 1".into()));
    }
    let mut by_month: BTreeMap<MonthKey, (f64, usize)> = BTreeMap::new();
    for (_, series) in bars.iter() {
        let mut cursor = 0;
        while cursor < series.len() {
            let month = month_of(series[cursor].date);
            let mut sum = 0.0;
            let mut days = 0usize;
            let mut end = cursor;
            while end < series.len() && month_of(series[end].date) == month {
                let bar = &series[end];
                if bar.volume > 0.0 {
                    sum += bar.ret.abs() / bar.volume;
                    days += 1;
                }
                end += 1;
            }
            if days >= min_days {
                let entry = by_month.entry(month).or_insert((0.0, 0));
                entry.0 += sum / days as f64;
                entry.1 += 1;
            }
            cursor = end;
        }
    }
    if by_month.is_empty() {
        return Err(Error::InvalidInput(
            "no stock-month reaches the minimum valid-day count".into(),
        ));
    }
    let months: Vec<MonthKey> = by_month.keys().copied().collect();
    let raw: Vec<f64> = by_month.values().map(|&(sum, n)| sum / n as f64).collect();
    RegimeSeries::median_split(Condition::Illiquidity, months, raw)
}

fn month_of(date: chrono::NaiveDate) -> MonthKey {
    use chrono::Datelike;
    MonthKey::new(date.year(), date.month() as u8)
}

/// Strategy observations split by the regime dummy at their formation month,
/// each bucket tested for a zero mean.
///
/// Observations at months the regime does not cover are dropped. A regime
/// whose raw values are all tied is rejected as degenerate rather than split
/// arbitrarily.
pub fn split_performance(
    series: &StrategyReturnSeries,
    regime: &RegimeSeries,
    lag: Option<usize>,
) -> Result<(MeanTestResult, MeanTestResult)> {
    if regime.all_tied() {
        return Err(Error::DegenerateRegime);
    }
    let mut high = Vec::new();
    let mut low = Vec::new();
    for &(month, value) in series.observations() {
        match regime.dummy_at(month) {
            Some(true) => high.push(value),
            Some(false) => low.push(value),
            None => {}
        }
    }
    if high.len() < 2 {
        return Err(Error::EmptyBucket { bucket: "high" });
    }
    if low.len() < 2 {
        return Err(Error::EmptyBucket { bucket: "low" });
    }
    Ok((nw_mean_test(&high, lag)?, nw_mean_test(&low, lag)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::DailyBar;
    use crate::portfolio::{StrategySpec, StrategyReturnSeries};
    use crate::synth::{gen_garch_path, SplitMix64};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn month_series(first: MonthKey, values: Vec<f64>) -> MonthSeries {
        let months = (0..values.len()).map(|i| first.add(i as i64)).collect();
        MonthSeries::new(months, values)
    }

    #[test]
    fn rising_index_is_always_up() {
        let series = month_series(MonthKey::new(1995, 1), vec![0.01; 60]);
        let state = market_state(&series, 36).unwrap();
        assert_eq!(state.len(), 60 - 36);
        assert!(state.dummies().iter().all(|&d| d == 1));
        assert_eq!(state.months()[0], MonthKey::new(1995, 1).add(36));
    }

    #[test]
    fn zero_trailing_sum_counts_as_up() {
        // Alternating +/- 0.1 over an even lookback sums to exactly zero.
        let values: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let series = month_series(MonthKey::new(2000, 1), values);
        let state = market_state(&series, 36).unwrap();
        assert_eq!(state.raw_values()[0], 0.0);
        assert_eq!(state.dummies()[0], 1, "non-negative trailing return is an up state");
    }

    #[test]
    fn random_walk_states_match_sliding_window_oracle() {
        let mut rng = SplitMix64::new(77);
        let values: Vec<f64> = (0..300).map(|_| 0.05 * rng.normal()).collect();
        let series = month_series(MonthKey::new(1980, 1), values.clone());
        let state = market_state(&series, 36).unwrap();

        // Brute-force oracle straight off the definition.
        for (i, month) in state.months().iter().enumerate() {
            let t = 36 + i;
            let mut sum = 0.0;
            for l in 1..=36 {
                sum += values[t - l];
            }
            assert_eq!(state.dummies()[i], u8::from(sum >= 0.0), "month {month}");
        }
    }

    #[test]
    fn lookback_longer_than_series_errors() {
        let series = month_series(MonthKey::new(2000, 1), vec![0.01; 36]);
        assert!(matches!(
            market_state(&series, 36),
            Err(Error::TooFewObservations { required: 37, .. })
        ));
    }

    #[test]
    fn volatility_regime_is_a_balanced_median_split() {
        let truth = crate::garch::GarchParams {
            c: 0.002,
            phi: 0.1,
            k: 2e-5,
            gamma: 0.7,
            alpha: 0.15,
            xi: 0.1,
        };
        let path = gen_garch_path(&truth, 300, 5).unwrap();
        let series = month_series(MonthKey::new(1990, 1), path.returns);
        let (regime, fit) = volatility_regime(&series).unwrap();
        assert!(fit.converged);
        assert_eq!(regime.len(), 299);

        // Dummies must equal an independent median split of the raw values
        // (odd count, so the median is the middle order statistic).
        let med = {
            let mut v = regime.raw_values().to_vec();
            v.sort_by(f64::total_cmp);
            v[149]
        };
        for (i, &raw) in regime.raw_values().iter().enumerate() {
            assert_eq!(regime.dummies()[i], u8::from(raw > med));
        }
        let highs = regime.dummies().iter().filter(|&&d| d == 1).count();
        let lows = regime.len() - highs;
        let ties = regime.raw_values().iter().filter(|&&v| v == med).count();
        assert!(highs.abs_diff(lows) <= ties.max(1), "highs {highs} lows {lows} ties {ties}");
    }

    #[test]
    fn single_term_illiquidity_formula() {
        let bars = DailyBarSet::from_parts(
            vec!["S1".into()],
            vec![vec![DailyBar {
                date: NaiveDate::from_ymd_opt(2001, 3, 15).unwrap(),
                ret: 0.01,
                volume: 1e6,
            }]],
        )
        .unwrap();
        let regime = amihud_illiquidity(&bars, 1).unwrap();
        assert_eq!(regime.len(), 1);
        assert!((regime.raw_values()[0] - 1e-8).abs() < 1e-22);
        assert_eq!(regime.months()[0], MonthKey::new(2001, 3));
    }

    #[test]
    fn zero_volume_days_are_excluded() {
        let d = |day, ret, volume| DailyBar {
            date: NaiveDate::from_ymd_opt(2001, 3, day).unwrap(),
            ret,
            volume,
        };
        let bars = DailyBarSet::from_parts(
            vec!["S1".into()],
            vec![vec![d(1, 0.02, 1e6), d(2, 0.5, 0.0), d(3, 0.04, 2e6)]],
        )
        .unwrap();
        let regime = amihud_illiquidity(&bars, 1).unwrap();
        // Mean over the two valid days only: (0.02/1e6 + 0.04/2e6) / 2.
        let want = (0.02 / 1e6 + 0.04 / 2e6) / 2.0;
        assert!((regime.raw_values()[0] - want).abs() < 1e-22);

        // A month with only zero-volume days never qualifies.
        let bars = DailyBarSet::from_parts(vec!["S1".into()], vec![vec![d(1, 0.5, 0.0)]]).unwrap();
        assert!(amihud_illiquidity(&bars, 1).is_err());
    }

    #[test]
    fn hand_computed_three_stock_fixture() {
        let bar = |y, m, day, ret, volume| DailyBar {
            date: NaiveDate::from_ymd_opt(y, m, day).unwrap(),
            ret,
            volume,
        };
        // Two months, three stocks; stock C misses the day-count floor in
        // month two (one valid day with min_days = 2).
        let a = vec![
            bar(2001, 1, 2, 0.010, 1.0e6),
            bar(2001, 1, 3, -0.020, 2.0e6),
            bar(2001, 2, 1, 0.030, 1.5e6),
            bar(2001, 2, 2, -0.010, 1.0e6),
        ];
        let b = vec![
            bar(2001, 1, 2, 0.005, 5.0e5),
            bar(2001, 1, 3, 0.015, 1.0e6),
            bar(2001, 2, 1, -0.025, 2.5e6),
            bar(2001, 2, 2, 0.035, 3.5e6),
        ];
        let c = vec![
            bar(2001, 1, 2, 0.040, 4.0e6),
            bar(2001, 1, 3, -0.060, 3.0e6),
            bar(2001, 2, 1, 0.020, 2.0e6),
            bar(2001, 2, 2, 0.100, 0.0),
        ];
        let bars =
            DailyBarSet::from_parts(vec!["A".into(), "B".into(), "C".into()], vec![a, b, c])
                .unwrap();
        let regime = amihud_illiquidity(&bars, 2).unwrap();

        // Hand computation, kept in exact rationals of the inputs.
        let a1 = (0.010 / 1.0e6 + 0.020 / 2.0e6) / 2.0;
        let b1 = (0.005 / 5.0e5 + 0.015 / 1.0e6) / 2.0;
        let c1 = (0.040 / 4.0e6 + 0.060 / 3.0e6) / 2.0;
        let m1 = (a1 + b1 + c1) / 3.0;
        let a2 = (0.030 / 1.5e6 + 0.010 / 1.0e6) / 2.0;
        let b2 = (0.025 / 2.5e6 + 0.035 / 3.5e6) / 2.0;
        let m2 = (a2 + b2) / 2.0; // C disqualified in month two
        assert_eq!(regime.months().len(), 2);
        assert!((regime.raw_values()[0] - m1).abs() < 1e-15);
        assert!((regime.raw_values()[1] - m2).abs() < 1e-15);
        assert!(regime.raw_values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn macro_uncertainty_needs_61_levels_and_a_moving_index() {
        let short = month_series(MonthKey::new(2000, 1), vec![100.0; 60]);
        assert!(matches!(
            macro_uncertainty(&short),
            Err(Error::TooFewObservations { required: 61, .. })
        ));
        let flat = month_series(MonthKey::new(2000, 1), vec![100.0; 100]);
        assert!(matches!(macro_uncertainty(&flat), Err(Error::ConstantSeries)));
    }

    #[test]
    fn macro_uncertainty_matches_oracle_median_split() {
        let truth = crate::garch::GarchParams {
            c: 0.002,
            phi: 0.2,
            k: 2e-5,
            gamma: 0.8,
            alpha: 0.1,
            xi: 0.0,
        };
        let path = gen_garch_path(&truth, 200, 9).unwrap();
        let mut level = 100.0;
        let levels: Vec<f64> = path
            .returns
            .iter()
            .map(|y| {
                level *= y.exp();
                level
            })
            .collect();
        let series = month_series(MonthKey::new(1990, 1), levels);
        let (regime, fit) = macro_uncertainty(&series).unwrap();
        assert!(fit.converged);
        assert_eq!(regime.len(), 198);
        let med = median(regime.raw_values());
        for (i, &raw) in regime.raw_values().iter().enumerate() {
            assert_eq!(regime.dummies()[i], u8::from(raw > med));
        }
    }

    fn series_from(values: &[(MonthKey, f64)]) -> StrategyReturnSeries {
        StrategyReturnSeries::new(StrategySpec::new(1, 1), values.to_vec())
    }

    #[test]
    fn planted_split_separates_high_and_low() {
        let first = MonthKey::new(2000, 1);
        let mut obs = Vec::new();
        let mut months = Vec::new();
        let mut raws = Vec::new();
        let mut dummies = Vec::new();
        let mut rng = SplitMix64::new(3);
        for i in 0..40i64 {
            let month = first.add(i);
            let high = i % 2 == 0;
            obs.push((month, if high { 0.02 } else { -0.02 } + 0.001 * rng.normal()));
            months.push(month);
            raws.push(if high { 2.0 + 0.01 * i as f64 } else { -1.0 - 0.01 * i as f64 });
            dummies.push(u8::from(high));
        }
        let regime =
            RegimeSeries::with_dummies(Condition::State, months, raws, dummies).unwrap();
        let (high, low) = split_performance(&series_from(&obs), &regime, None).unwrap();
        assert!(high.mean > 0.0);
        assert!(low.mean < 0.0);
        assert_eq!(high.n_obs + low.n_obs, 40);
    }

    #[test]
    fn all_high_regime_is_an_empty_bucket_error() {
        let first = MonthKey::new(2000, 1);
        let obs: Vec<(MonthKey, f64)> =
            (0..10).map(|i| (first.add(i), 0.01 * i as f64)).collect();
        let months: Vec<MonthKey> = (0..10).map(|i| first.add(i)).collect();
        let raws: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let regime =
            RegimeSeries::with_dummies(Condition::State, months, raws, vec![1; 10]).unwrap();
        let err = split_performance(&series_from(&obs), &regime, None).unwrap_err();
        assert!(matches!(err, Error::EmptyBucket { bucket: "low" }));
    }

    #[test]
    fn all_tied_regime_is_degenerate() {
        let first = MonthKey::new(2000, 1);
        let obs: Vec<(MonthKey, f64)> =
            (0..10).map(|i| (first.add(i), 0.01 * i as f64)).collect();
        let months: Vec<MonthKey> = (0..10).map(|i| first.add(i)).collect();
        let regime =
            RegimeSeries::median_split(Condition::Volatility, months, vec![5.0; 10]).unwrap();
        let err = split_performance(&series_from(&obs), &regime, None).unwrap_err();
        assert!(matches!(err, Error::DegenerateRegime));
    }

    #[test]
    fn tied_values_all_land_in_the_low_bucket() {
        // Ties at the median take dummy 0; with many ties the imbalance is
        // bounded by twice the tie count.
        let raws = vec![0.0, 1.0, 1.0, 1.0, 2.0, 3.0];
        let months: Vec<MonthKey> = (0..6).map(|i| MonthKey::new(2000, 1).add(i)).collect();
        let regime = RegimeSeries::median_split(Condition::Volatility, months, raws.clone()).unwrap();
        let med = median(&raws); // 1.0
        assert_eq!(med, 1.0);
        assert_eq!(regime.dummies(), [0, 0, 0, 0, 1, 1]);
        let highs = regime.dummies().iter().filter(|&&d| d == 1).count();
        let ties = raws.iter().filter(|&&v| v == med).count();
        assert!(highs.abs_diff(6 - highs) <= 2 * ties);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn median_split_is_balanced_and_transform_invariant(
            seed in 0u64..1000,
            n in 3usize..80,
        ) {
            let mut rng = SplitMix64::new(seed);
            let raws: Vec<f64> = (0..n).map(|_| rng.normal() * 4.0).collect();
            let months: Vec<MonthKey> =
                (0..n as i64).map(|i| MonthKey::new(2000, 1).add(i)).collect();
            let regime = RegimeSeries::median_split(
                Condition::Volatility, months.clone(), raws.clone(),
            ).unwrap();

            // Continuous draws: the only tie is the odd-count middle itself.
            let med = median(&raws);
            let highs = regime.dummies().iter().filter(|&&d| d == 1).count();
            let lows = n - highs;
            let ties = raws.iter().filter(|&&v| v == med).count();
            prop_assert!(highs.abs_diff(lows) <= ties.max(1));

            // Strictly increasing transforms leave the dummies unchanged.
            let transformed: Vec<f64> = raws.iter().map(|&v| (0.3 * v).exp() + v).collect();
            let again = RegimeSeries::median_split(
                Condition::Volatility, months, transformed,
            ).unwrap();
            prop_assert_eq!(regime.dummies(), again.dummies());
        }
    }
}

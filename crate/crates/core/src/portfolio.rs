//! J-K winner/loser decile portfolios and buy-and-hold long-short returns.
//!
//! For a formation month m the estimation window is months m-J..m-1, the
//! skip gap covers months m..m+skip-1, and the holding window is months
//! m+skip..m+skip+K-1 (so with the default skip of one month, holding runs
//! m+1..m+K). Stocks are ranked by the arithmetic mean of their estimation
//! window returns; the loser decile is bought and the winner decile sold for
//! the contrarian side, reversed for the momentum side. Ties rank in stock-id
//! order, which keeps every run bit-deterministic.

use crate::calendar::MonthKey;
use crate::error::{Error, Result};
use crate::panel::MonthlyPanel;
use serde::{Deserialize, Serialize};

/// Which leg is long: the contrarian buys past losers, the momentum side
/// buys past winners. The two are exact negations of each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Contrarian,
    Momentum,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Contrarian => "CSCON",
            Side::Momentum => "CSMOM",
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s.to_ascii_uppercase().as_str() {
            "CSCON" | "CONTRARIAN" => Some(Side::Contrarian),
            "CSMOM" | "MOMENTUM" => Some(Side::Momentum),
            _ => None,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A J-K strategy: J estimation months, K holding months, a skip gap, a side,
/// and the number of ranking buckets (extreme buckets form the portfolios).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StrategySpec {
    pub estimation_months: u32,
    pub holding_months: u32,
    pub skip_months: u32,
    pub side: Side,
    pub decile_count: u32,
}

impl StrategySpec {
    /// Contrarian J-K spec with the defaults: one skip month, ten deciles.
    pub fn new(estimation_months: u32, holding_months: u32) -> Self {
        Self {
            estimation_months,
            holding_months,
            skip_months: 1,
            side: Side::Contrarian,
            decile_count: 10,
        }
    }

    pub fn with_side(mut self, side: Side) -> Self {
        self.side = side;
        self
    }

    pub fn with_skip(mut self, skip: u32) -> Self {
        self.skip_months = skip;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.estimation_months < 1 || self.holding_months < 1 {
            return Err(Error::InvalidInput(
                "estimation and holding periods must be >= 1 month".into(),
            ));
        }
        if self.decile_count < 2 {
            return Err(Error::InvalidInput("decile_count must be >= 2".into()));
        }
        Ok(())
    }

    /// Months of panel history one observation needs: J + skip + K.
    pub fn span(&self) -> i64 {
        self.estimation_months as i64 + self.skip_months as i64 + self.holding_months as i64
    }
}

/// Winner/loser membership at one formation month. Stocks are panel indices
/// in canonical (id) order; the sets are disjoint by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormationResult {
    pub formation_month: MonthKey,
    pub winner: Vec<usize>,
    pub loser: Vec<usize>,
    pub eligible_count: usize,
}

impl FormationResult {
    pub fn winner_ids<'p>(&self, panel: &'p MonthlyPanel) -> Vec<&'p str> {
        self.winner.iter().map(|&i| panel.stocks()[i].as_str()).collect()
    }

    pub fn loser_ids<'p>(&self, panel: &'p MonthlyPanel) -> Vec<&'p str> {
        self.loser.iter().map(|&i| panel.stocks()[i].as_str()).collect()
    }
}

/// Per-formation-month K-month buy-and-hold long-short returns of a strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyReturnSeries {
    spec: StrategySpec,
    observations: Vec<(MonthKey, f64)>,
}

impl StrategyReturnSeries {
    /// `observations` are `(formation_month, long-short return)` pairs with
    /// strictly increasing months.
    pub fn new(spec: StrategySpec, observations: Vec<(MonthKey, f64)>) -> Self {
        assert!(
            observations.windows(2).all(|w| w[0].0 < w[1].0),
            "observations must be strictly increasing in formation month"
        );
        Self { spec, observations }
    }

    pub fn spec(&self) -> &StrategySpec {
        &self.spec
    }

    pub fn observations(&self) -> &[(MonthKey, f64)] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|&(_, v)| v).collect()
    }
}

/// Index range of one formation month's estimation and holding windows, or
/// `None` when either window leaves the panel.
fn windows(
    panel: &MonthlyPanel,
    formation_month: MonthKey,
    spec: &StrategySpec,
) -> Option<(std::ops::Range<usize>, std::ops::Range<usize>)> {
    let mi = panel.month_index(formation_month)?;
    let j = spec.estimation_months as usize;
    let skip = spec.skip_months as usize;
    let k = spec.holding_months as usize;
    if mi < j {
        return None;
    }
    let hold_start = mi.checked_add(skip)?;
    let hold_end = hold_start.checked_add(k)?; // exclusive
    if hold_end > panel.n_months() {
        return None;
    }
    Some((mi - j..mi, hold_start..hold_end))
}

/// Stocks (panel indices, canonical order) with a complete return history
/// over both the estimation and holding windows of `formation_month`.
///
/// Requiring the holding window too is the delisting policy: a stock that
/// disappears mid-holding is excluded up front rather than silently shrinking
/// the portfolio. Returns an empty set when the windows leave the panel.
pub fn eligible_stock_indices(
    panel: &MonthlyPanel,
    formation_month: MonthKey,
    spec: &StrategySpec,
) -> Vec<usize> {
    let Some((est, hold)) = windows(panel, formation_month, spec) else {
        return Vec::new();
    };
    (0..panel.n_stocks())
        .filter(|&s| {
            let row = panel.row(s);
            row[est.clone()].iter().all(|v| !v.is_nan())
                && row[hold.clone()].iter().all(|v| !v.is_nan())
        })
        .collect()
}

/// Identifier flavor of [`eligible_stock_indices`].
pub fn eligible_stocks(
    panel: &MonthlyPanel,
    formation_month: MonthKey,
    spec: &StrategySpec,
) -> Vec<String> {
    eligible_stock_indices(panel, formation_month, spec)
        .into_iter()
        .map(|i| panel.stocks()[i].clone())
        .collect()
}

/// Rank eligible stocks by mean estimation-window return and slice off the
/// extreme deciles. Decile size is floor(N / decile_count).
pub fn form_portfolio(
    panel: &MonthlyPanel,
    formation_month: MonthKey,
    spec: &StrategySpec,
) -> Result<FormationResult> {
    spec.validate()?;
    let eligible = eligible_stock_indices(panel, formation_month, spec);
    let needed = spec.decile_count as usize;
    if eligible.len() < needed {
        return Err(Error::TooFewEligible {
            month: formation_month,
            needed,
            got: eligible.len(),
        });
    }
    let (est, _) = windows(panel, formation_month, spec)
        .expect("eligible set is non-empty, so the windows fit");

    let j = spec.estimation_months as f64;
    let mut ranked: Vec<(f64, usize)> = eligible
        .iter()
        .map(|&s| {
            let row = panel.row(s);
            let mean = row[est.clone()].iter().sum::<f64>() / j;
            (mean, s)
        })
        .collect();
    // Ascending by mean, ties broken by canonical stock order.
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let q = eligible.len() / spec.decile_count as usize;
    let mut loser: Vec<usize> = ranked[..q].iter().map(|&(_, s)| s).collect();
    let mut winner: Vec<usize> = ranked[ranked.len() - q..].iter().map(|&(_, s)| s).collect();
    loser.sort_unstable();
    winner.sort_unstable();
    Ok(FormationResult {
        formation_month,
        winner,
        loser,
        eligible_count: eligible.len(),
    })
}

/// Equal-weighted buy-and-hold return of `members` over the K months starting
/// at `start_month`: mean over members of (prod(1 + r) - 1), no rebalancing.
pub fn buy_and_hold_return(
    panel: &MonthlyPanel,
    members: &[usize],
    start_month: MonthKey,
    holding_months: u32,
) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::InvalidInput("buy-and-hold over an empty portfolio".into()));
    }
    let start = panel
        .month_index(start_month)
        .ok_or_else(|| Error::InvalidInput(format!("month {start_month} outside panel")))?;
    let k = holding_months as usize;
    if start + k > panel.n_months() {
        return Err(Error::InvalidInput("holding window leaves the panel".into()));
    }
    let mut acc = 0.0;
    for &s in members {
        let row = panel.row(s);
        let mut growth = 1.0;
        for (off, &r) in row[start..start + k].iter().enumerate() {
            if r.is_nan() {
                return Err(Error::MissingHoldingReturn {
                    stock: panel.stocks()[s].clone(),
                    month: start_month.add(off as i64),
                });
            }
            growth *= 1.0 + r;
        }
        acc += growth - 1.0;
    }
    Ok(acc / members.len() as f64)
}

/// The full long-short return series: one observation per formation month
/// where a portfolio forms and complete holding data exists.
pub fn strategy_series(panel: &MonthlyPanel, spec: &StrategySpec) -> Result<StrategyReturnSeries> {
    spec.validate()?;
    let mut observations = Vec::new();
    let n = panel.n_months() as i64;
    if n >= spec.span() {
        let first = spec.estimation_months as i64;
        let last = n - spec.skip_months as i64 - spec.holding_months as i64;
        for mi in first..=last {
            let formation_month = panel.first_month().add(mi);
            let formation = match form_portfolio(panel, formation_month, spec) {
                Ok(f) => f,
                Err(Error::TooFewEligible { .. }) => continue,
                Err(e) => return Err(e),
            };
            let hold_start = formation_month.add(spec.skip_months as i64);
            let loser_bh =
                buy_and_hold_return(panel, &formation.loser, hold_start, spec.holding_months)?;
            let winner_bh =
                buy_and_hold_return(panel, &formation.winner, hold_start, spec.holding_months)?;
            let value = match spec.side {
                Side::Contrarian => loser_bh - winner_bh,
                Side::Momentum => winner_bh - loser_bh,
            };
            observations.push((formation_month, value));
        }
    }
    Ok(StrategyReturnSeries::new(*spec, observations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::IngestConfig;
    use proptest::prelude::*;

    /// Panel from explicit per-stock rows; `None` plants a missing cell.
    fn panel_from_rows(rows: &[(&str, Vec<Option<f64>>)]) -> MonthlyPanel {
        let first = MonthKey::new(2000, 1);
        let cells = rows.iter().flat_map(|(stock, rets)| {
            rets.iter().enumerate().filter_map(move |(t, r)| {
                r.map(|r| (stock.to_string(), first.add(t as i64), r))
            })
        });
        MonthlyPanel::from_cells(cells, &IngestConfig::default()).unwrap().panel
    }

    fn uniform_panel(n_stocks: usize, rets: &[Vec<f64>]) -> MonthlyPanel {
        let rows: Vec<(String, Vec<Option<f64>>)> = (0..n_stocks)
            .map(|i| (format!("S{i:03}"), rets[i].iter().map(|&r| Some(r)).collect()))
            .collect();
        let borrowed: Vec<(&str, Vec<Option<f64>>)> =
            rows.iter().map(|(s, v)| (s.as_str(), v.clone())).collect();
        panel_from_rows(&borrowed)
    }

    #[test]
    fn complete_history_is_eligible_and_gap_is_not() {
        // 14 months: J=12 estimation at formation index 12, skip 1 leaves no
        // holding room, so use skip 0 / K=1 with formation at index 12.
        let full: Vec<Option<f64>> = (0..14).map(|t| Some(0.01 * t as f64)).collect();
        let mut gapped = full.clone();
        gapped[5] = None; // inside the estimation window
        let panel = panel_from_rows(&[("FULL", full), ("GAP", gapped)]);
        let spec = StrategySpec::new(12, 1).with_skip(1);
        let month = MonthKey::new(2000, 1).add(12);
        let ids = eligible_stocks(&panel, month, &spec);
        assert_eq!(ids, ["FULL"]);
    }

    #[test]
    fn eligibility_matches_brute_force_on_gapped_panel() {
        // 30 stocks x 40 months with 7 planted gaps.
        let mut rows: Vec<(String, Vec<Option<f64>>)> = (0..30)
            .map(|i| {
                let rets: Vec<Option<f64>> =
                    (0..40).map(|t| Some(((i * 7 + t * 3) % 13) as f64 * 0.01 - 0.05)).collect();
                (format!("S{i:02}"), rets)
            })
            .collect();
        let gaps = [(1usize, 3usize), (4, 14), (9, 0), (9, 1), (17, 25), (22, 39), (28, 20)];
        for &(s, t) in &gaps {
            rows[s].1[t] = None;
        }
        let borrowed: Vec<(&str, Vec<Option<f64>>)> =
            rows.iter().map(|(s, v)| (s.as_str(), v.clone())).collect();
        let panel = panel_from_rows(&borrowed);

        let spec = StrategySpec::new(12, 6);
        for mi in 0..40i64 {
            let month = MonthKey::new(2000, 1).add(mi);
            let got = eligible_stock_indices(&panel, month, &spec);
            // Brute force directly over the cell matrix.
            let mut want = Vec::new();
            let (j, skip, k) = (12i64, 1i64, 6i64);
            if mi - j >= 0 && mi + skip + k - 1 < 40 {
                for s in 0..30 {
                    let complete = (mi - j..mi)
                        .chain(mi + skip..mi + skip + k)
                        .all(|t| panel.ret(s, t as usize).is_some());
                    if complete {
                        want.push(s);
                    }
                }
            }
            assert_eq!(got, want, "formation index {mi}");
        }
    }

    #[test]
    fn strict_ordering_picks_extreme_deciles() {
        let rets: Vec<Vec<f64>> = (0..10).map(|i| vec![0.01 * (i + 1) as f64, 0.0, 0.0]).collect();
        let panel = uniform_panel(10, &rets);
        let spec = StrategySpec::new(1, 1);
        let formed = form_portfolio(&panel, MonthKey::new(2000, 2), &spec).unwrap();
        assert_eq!(formed.loser_ids(&panel), ["S000"]); // past return 0.01
        assert_eq!(formed.winner_ids(&panel), ["S009"]); // past return 0.10
        assert_eq!(formed.eligible_count, 10);
    }

    #[test]
    fn ties_break_by_canonical_id_order() {
        let rets: Vec<Vec<f64>> = (0..10).map(|_| vec![0.05, 0.0, 0.0]).collect();
        let panel = uniform_panel(10, &rets);
        let spec = StrategySpec::new(1, 1);
        let formed = form_portfolio(&panel, MonthKey::new(2000, 2), &spec).unwrap();
        assert_eq!(formed.loser_ids(&panel), ["S000"]);
        assert_eq!(formed.winner_ids(&panel), ["S009"]);
        assert!(formed.winner.iter().all(|w| !formed.loser.contains(w)));
    }

    #[test]
    fn membership_matches_sort_and_slice_oracle() {
        // 23 stocks, deterministic pseudo-random J=3 estimation returns.
        let rets: Vec<Vec<f64>> = (0..23)
            .map(|i| (0..6).map(|t| (((i * 31 + t * 17) % 97) as f64 - 48.0) / 500.0).collect())
            .collect();
        let panel = uniform_panel(23, &rets);
        let spec = StrategySpec::new(3, 1);
        let month = MonthKey::new(2000, 4); // estimation = first three months
        let formed = form_portfolio(&panel, month, &spec).unwrap();

        // Oracle: independent sort over (mean, index) and slice.
        let mut means: Vec<(f64, usize)> = (0..23)
            .map(|s| ((rets[s][0] + rets[s][1] + rets[s][2]) / 3.0, s))
            .collect();
        means.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let q = 23 / 10;
        let mut want_loser: Vec<usize> = means[..q].iter().map(|&(_, s)| s).collect();
        let mut want_winner: Vec<usize> = means[23 - q..].iter().map(|&(_, s)| s).collect();
        want_loser.sort_unstable();
        want_winner.sort_unstable();
        assert_eq!(formed.loser, want_loser);
        assert_eq!(formed.winner, want_winner);
    }

    #[test]
    fn too_few_eligible_stocks_is_an_error() {
        let rets: Vec<Vec<f64>> = (0..4).map(|i| vec![0.01 * i as f64, 0.0, 0.0]).collect();
        let panel = uniform_panel(4, &rets);
        let spec = StrategySpec::new(1, 1);
        let err = form_portfolio(&panel, MonthKey::new(2000, 2), &spec).unwrap_err();
        assert!(matches!(err, Error::TooFewEligible { needed: 10, got: 4, .. }));
    }

    #[test]
    fn buy_and_hold_compounds_without_rebalancing() {
        let panel = uniform_panel(
            20,
            &(0..20)
                .map(|i| if i == 0 { vec![0.10, -0.05] } else { vec![0.0, 0.0] })
                .collect::<Vec<_>>(),
        );
        let r = buy_and_hold_return(&panel, &[0], MonthKey::new(2000, 1), 2).unwrap();
        assert!((r - 0.045).abs() < 1e-12, "got {r}");
        let zero = buy_and_hold_return(&panel, &[1], MonthKey::new(2000, 1), 2).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn buy_and_hold_matches_compounding_oracle() {
        let rets: Vec<Vec<f64>> = (0..20)
            .map(|i| (0..3).map(|t| (((i * 13 + t * 7) % 41) as f64 - 20.0) / 300.0).collect())
            .collect();
        let panel = uniform_panel(20, &rets);
        let members = [2usize, 5, 11, 13, 19];
        let got = buy_and_hold_return(&panel, &members, MonthKey::new(2000, 1), 3).unwrap();
        // Hand-rolled oracle straight off the fixture data.
        let want = members
            .iter()
            .map(|&s| (1.0 + rets[s][0]) * (1.0 + rets[s][1]) * (1.0 + rets[s][2]) - 1.0)
            .sum::<f64>()
            / members.len() as f64;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn contrarian_and_momentum_series_are_exact_negations() {
        let panel = crate::synth::gen_panel(&crate::synth::SynthSpec {
            seed: 42,
            n_stocks: 25,
            n_months: 48,
            ..Default::default()
        })
        .unwrap();
        let con = strategy_series(&panel, &StrategySpec::new(3, 2)).unwrap();
        let mom =
            strategy_series(&panel, &StrategySpec::new(3, 2).with_side(Side::Momentum)).unwrap();
        assert_eq!(con.len(), mom.len());
        assert!(!con.is_empty());
        for (c, m) in con.observations().iter().zip(mom.observations()) {
            assert_eq!(c.0, m.0);
            assert_eq!(c.1, -m.1, "negation must be exact");
        }
    }

    #[test]
    fn panel_shorter_than_span_gives_empty_series() {
        let rets: Vec<Vec<f64>> = (0..20).map(|_| vec![0.01; 5]).collect();
        let panel = uniform_panel(20, &rets);
        let series = strategy_series(&panel, &StrategySpec::new(3, 2)).unwrap(); // span 6 > 5
        assert!(series.is_empty());
    }

    #[test]
    fn membership_is_invariant_to_common_estimation_shift() {
        let rets: Vec<Vec<f64>> = (0..15)
            .map(|i| (0..4).map(|t| (((i * 11 + t * 5) % 23) as f64 - 11.0) / 200.0).collect())
            .collect();
        let panel = uniform_panel(15, &rets);
        let spec = StrategySpec::new(2, 1);
        let month = MonthKey::new(2000, 3);
        let base = form_portfolio(&panel, month, &spec).unwrap();

        let shifted: Vec<Vec<f64>> = rets
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(t, &r)| if t < 2 { r + 0.037 } else { r })
                    .collect()
            })
            .collect();
        let shifted_panel = uniform_panel(15, &shifted);
        let moved = form_portfolio(&shifted_panel, month, &spec).unwrap();
        assert_eq!(base.winner, moved.winner);
        assert_eq!(base.loser, moved.loser);
    }

    /// Full-pipeline oracle written independently of the engine: works on raw
    /// Option<f64> rows, does its own eligibility, ranking, and compounding.
    fn oracle_series(
        rows: &[Vec<Option<f64>>],
        j: usize,
        k: usize,
        skip: usize,
        contrarian: bool,
        deciles: usize,
    ) -> Vec<f64> {
        let n_months = rows[0].len();
        let mut out = Vec::new();
        for m in 0..n_months {
            if m < j || m + skip + k > n_months {
                continue;
            }
            let mut elig: Vec<(f64, usize)> = Vec::new();
            'stock: for (s, row) in rows.iter().enumerate() {
                for t in (m - j..m).chain(m + skip..m + skip + k) {
                    if row[t].is_none() {
                        continue 'stock;
                    }
                }
                let mean = (m - j..m).map(|t| row[t].unwrap()).sum::<f64>() / j as f64;
                elig.push((mean, s));
            }
            if elig.len() < deciles {
                continue;
            }
            elig.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let q = elig.len() / deciles;
            let bh = |members: &[(f64, usize)]| {
                members
                    .iter()
                    .map(|&(_, s)| {
                        (m + skip..m + skip + k)
                            .map(|t| 1.0 + rows[s][t].unwrap())
                            .product::<f64>()
                            - 1.0
                    })
                    .sum::<f64>()
                    / members.len() as f64
            };
            let loser = bh(&elig[..q]);
            let winner = bh(&elig[elig.len() - q..]);
            out.push(if contrarian { loser - winner } else { winner - loser });
        }
        out
    }

    fn panel_rows(panel: &MonthlyPanel) -> Vec<Vec<Option<f64>>> {
        (0..panel.n_stocks())
            .map(|s| (0..panel.n_months()).map(|m| panel.ret(s, m)).collect())
            .collect()
    }

    #[test]
    fn planted_lag1_reversal_profits_with_no_skip() {
        // Expected return = -0.5 x previous-month demeaned return. The effect
        // lives at lag one, so it is tested with skip = 0; with a skip month
        // in between, lag-one reversal flips into lag-two momentum.
        let panel = crate::synth::gen_panel(&crate::synth::SynthSpec {
            seed: 9,
            n_stocks: 40,
            n_months: 240,
            regimes: vec![crate::synth::RegimeWindow { start: 0, end: 239, rho: -0.5 }],
            reversion_lags: 1,
            noise_scale: 0.03,
            ..Default::default()
        })
        .unwrap();
        let spec = StrategySpec::new(1, 1).with_skip(0);
        let series = strategy_series(&panel, &spec).unwrap();

        let oracle = oracle_series(&panel_rows(&panel), 1, 1, 0, true, 10);
        assert_eq!(series.len(), oracle.len());
        for (got, want) in series.values().iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-12);
        }
        let mean = series.values().iter().sum::<f64>() / series.len() as f64;
        assert!(mean > 0.0, "planted reversal should be profitable, mean {mean}");
    }

    #[test]
    fn engine_matches_full_pipeline_oracle_with_gaps_and_skip() {
        let mut rows: Vec<Vec<Option<f64>>> = (0..25)
            .map(|i| {
                (0..60)
                    .map(|t| Some((((i * 29 + t * 13) % 83) as f64 - 41.0) / 400.0))
                    .collect()
            })
            .collect();
        for (s, t) in [(0usize, 10usize), (3, 30), (3, 31), (11, 55), (19, 2), (24, 40)] {
            rows[s][t] = None;
        }
        let borrowed: Vec<(&str, Vec<Option<f64>>)> = rows
            .iter()
            .enumerate()
            .map(|(i, v)| (Box::leak(format!("S{i:02}").into_boxed_str()) as &str, v.clone()))
            .collect();
        let panel = panel_from_rows(&borrowed);

        for (j, k, skip) in [(1u32, 1u32, 1u32), (6, 3, 1), (12, 6, 0), (3, 1, 2)] {
            let spec = StrategySpec::new(j, k).with_skip(skip);
            let got = strategy_series(&panel, &spec).unwrap();
            let want =
                oracle_series(&panel_rows(&panel), j as usize, k as usize, skip as usize, true, 10);
            assert_eq!(got.len(), want.len(), "J={j} K={k} skip={skip}");
            for (g, w) in got.values().iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "J={j} K={k} skip={skip}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn planted_trailing_reversal_profits_across_seeds() {
        // Reversal fed by the trailing six-month average survives the skip
        // month; the contrarian mean should be positive in nearly all seeds.
        let mut positive = 0;
        for seed in 0..100 {
            let panel = crate::synth::gen_panel(&crate::synth::SynthSpec {
                seed,
                n_stocks: 30,
                n_months: 120,
                regimes: vec![crate::synth::RegimeWindow { start: 0, end: 119, rho: -0.5 }],
                reversion_lags: 6,
                noise_scale: 0.04,
                ..Default::default()
            })
            .unwrap();
            let series = strategy_series(&panel, &StrategySpec::new(1, 1)).unwrap();
            let mean = series.values().iter().sum::<f64>() / series.len() as f64;
            if mean > 0.0 {
                positive += 1;
            }
        }
        assert!(positive >= 95, "only {positive}/100 seeds had positive contrarian mean");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn winner_and_loser_partition_the_eligible_set(
            seed in 0u64..1000,
            n_stocks in 20usize..40,
            j in 1u32..4,
            k in 1u32..3,
        ) {
            let panel = crate::synth::gen_panel(&crate::synth::SynthSpec {
                seed,
                n_stocks,
                n_months: 24,
                ..Default::default()
            }).unwrap();
            let spec = StrategySpec::new(j, k);
            let month = panel.first_month().add(j as i64);
            let formed = form_portfolio(&panel, month, &spec).unwrap();
            prop_assert!(formed.winner.iter().all(|w| !formed.loser.contains(w)));
            prop_assert!(formed.winner.len() + formed.loser.len() <= formed.eligible_count);
            prop_assert_eq!(formed.winner.len(), formed.eligible_count / 10);
        }
    }
}

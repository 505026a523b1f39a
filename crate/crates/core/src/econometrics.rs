//! OLS with Newey-West HAC standard errors, and HAC-adjusted mean tests.
//!
//! Conventions, shared by the mean test and the regression sandwich so the
//! two stay mutually consistent:
//!
//! - Bartlett kernel weights `1 - l/(L+1)`;
//! - sample autocovariances with divisor T (not T-l);
//! - default lag `L = floor(4 * (T/100)^(2/9))`;
//! - two-sided normal critical values 1.96 (5%) and 2.576 (1%).

use crate::calendar::MonthSeries;
use crate::error::{Error, Result};
use crate::panel::FactorSeries;
use crate::portfolio::StrategyReturnSeries;
use nalgebra::{DMatrix, DVector};

pub const CRIT_5PCT: f64 = 1.96;
pub const CRIT_1PCT: f64 = 2.576;

/// Significance stars: `*` at 5%, `**` at 1%, two-sided normal.
pub fn stars(t: f64) -> &'static str {
    if t.abs() >= CRIT_1PCT {
        "**"
    } else if t.abs() >= CRIT_5PCT {
        "*"
    } else {
        ""
    }
}

/// Automatic Newey-West lag: floor(4 * (T/100)^(2/9)).
pub fn auto_lag(n_obs: usize) -> usize {
    (4.0 * (n_obs as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// HAC-adjusted test of a zero mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTestResult {
    pub mean: f64,
    pub hac_t: f64,
    pub n_obs: usize,
    pub lag: usize,
    pub significant_5: bool,
    pub significant_1: bool,
}

/// Bartlett-weighted long-run variance of a demeaned series, divisor T.
fn long_run_variance(demeaned: &[f64], lag: usize) -> f64 {
    let t = demeaned.len() as f64;
    let gamma = |l: usize| -> f64 {
        demeaned[l..]
            .iter()
            .zip(&demeaned[..demeaned.len() - l])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / t
    };
    let mut s = gamma(0);
    for l in 1..=lag {
        s += 2.0 * (1.0 - l as f64 / (lag as f64 + 1.0)) * gamma(l);
    }
    s
}

/// Test whether `series` has zero mean, with Newey-West long-run variance.
///
/// `lag = None` applies the automatic rule. The t statistic is
/// `mean / sqrt(S / n)` with `S = gamma_0 + 2 sum w_l gamma_l`.
pub fn nw_mean_test(series: &[f64], lag: Option<usize>) -> Result<MeanTestResult> {
    let n = series.len();
    if n < 2 {
        return Err(Error::TooFewObservations { required: 2, actual: n });
    }
    let first = series[0];
    if series.iter().all(|&v| v == first) {
        return Err(Error::ConstantSeries);
    }
    let lag = lag.unwrap_or_else(|| auto_lag(n)).min(n - 1);
    let mean = series.iter().sum::<f64>() / n as f64;
    let demeaned: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let s = long_run_variance(&demeaned, lag);
    if s <= 0.0 {
        return Err(Error::ConstantSeries);
    }
    let hac_t = mean / (s / n as f64).sqrt();
    Ok(MeanTestResult {
        mean,
        hac_t,
        n_obs: n,
        lag,
        significant_5: hac_t.abs() >= CRIT_5PCT,
        significant_1: hac_t.abs() >= CRIT_1PCT,
    })
}

/// OLS estimates with HAC standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub coef_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub hac_std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub n_obs: usize,
    pub lag: usize,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.coef_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }

    pub fn residual_variance(&self) -> f64 {
        let n = self.residuals.len() as f64;
        self.residuals.iter().map(|u| u * u).sum::<f64>() / n
    }
}

const RANK_TOL: f64 = 1e-10;

/// Name the first column that is numerically in the span of its predecessors
/// (two-pass modified Gram-Schmidt; only called once rank deficiency is known).
fn collinear_column(x: &DMatrix<f64>, names: &[&str]) -> String {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for j in 0..x.ncols() {
        let mut v: DVector<f64> = x.column(j).into_owned();
        let orig = v.norm();
        if orig == 0.0 {
            return names[j].to_string();
        }
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&v);
                v -= b * proj;
            }
        }
        if v.norm() <= 1e-8 * orig {
            return names[j].to_string();
        }
        basis.push(v.normalize());
    }
    names.last().map(|s| s.to_string()).unwrap_or_default()
}

/// Least squares of `y` on the given columns (pass the intercept explicitly),
/// with the Bartlett-kernel HAC sandwich covariance.
///
/// Coefficients come from an SVD solve; rank is decided at relative tolerance
/// 1e-10 and a deficiency names the offending column. The HAC lag only
/// affects standard errors, never the coefficients.
pub fn ols_hac(
    y: &[f64],
    columns: &[&[f64]],
    names: &[&str],
    lag: Option<usize>,
) -> Result<RegressionResult> {
    let k = columns.len();
    let n = y.len();
    assert_eq!(k, names.len(), "one name per column");
    if k == 0 {
        return Err(Error::InvalidInput("no regressors".into()));
    }
    for (name, col) in names.iter().zip(columns) {
        if col.len() != n {
            return Err(Error::InvalidInput(format!(
                "column {name} has {} rows, y has {n}",
                col.len()
            )));
        }
    }
    if n <= k {
        return Err(Error::TooFewObservations { required: k + 1, actual: n });
    }

    let x = DMatrix::from_fn(n, k, |i, j| columns[j][i]);
    let yv = DVector::from_column_slice(y);

    let svd = x.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    if sigma_max == 0.0 {
        return Err(Error::RankDeficient { column: names[0].to_string() });
    }
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * sigma_max)
        .count();
    if rank < k {
        return Err(Error::RankDeficient { column: collinear_column(&x, names) });
    }
    let coef = svd
        .solve(&yv, RANK_TOL * sigma_max)
        .map_err(|e| Error::InvalidInput(format!("svd solve failed: {e}")))?;

    let fitted = &x * &coef;
    let residuals = &yv - &fitted;

    // HAC sandwich: (X'X)^-1 [sum of Bartlett-weighted score cross-products] (X'X)^-1.
    let lag = lag.unwrap_or_else(|| auto_lag(n)).min(n - 1);
    let scores: Vec<DVector<f64>> = (0..n)
        .map(|t| x.row(t).transpose() * residuals[t])
        .collect();
    let mut meat = DMatrix::zeros(k, k);
    for g in &scores {
        meat += g * g.transpose();
    }
    for l in 1..=lag {
        let w = 1.0 - l as f64 / (lag as f64 + 1.0);
        for t in l..n {
            let cross = &scores[t] * scores[t - l].transpose();
            meat += (&cross + cross.transpose()) * w;
        }
    }
    let xtx_inv = (x.transpose() * &x)
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient { column: collinear_column(&x, names) })?;
    let cov = &xtx_inv * meat * &xtx_inv;

    let hac_std_errors: Vec<f64> = (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let t_stats: Vec<f64> = coef
        .iter()
        .zip(&hac_std_errors)
        .map(|(&c, &se)| if se > 0.0 { c / se } else { f64::NAN })
        .collect();

    Ok(RegressionResult {
        coef_names: names.iter().map(|s| s.to_string()).collect(),
        coefficients: coef.iter().copied().collect(),
        hac_std_errors,
        t_stats,
        n_obs: n,
        lag,
        fitted: fitted.iter().copied().collect(),
        residuals: residuals.iter().copied().collect(),
    })
}

/// Gather regression rows for a strategy series against factor months.
///
/// An observation earns its return over the holding window, so it is matched
/// to the factor month of its first holding month (formation + skip); the
/// optional dummy is matched at the formation month itself. Observations
/// without a complete row are dropped.
fn regression_rows(
    series: &StrategyReturnSeries,
    factors: &FactorSeries,
    dummy: Option<&MonthSeries>,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let skip = series.spec().skip_months as i64;
    let mut y = Vec::new();
    let (mut mkt, mut smb, mut hml, mut d) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &(formation, value) in series.observations() {
        let Some(fi) = factors.month_index(formation.add(skip)) else {
            continue;
        };
        let dval = match dummy {
            Some(ms) => match ms.get(formation) {
                Some(v) => v,
                None => continue,
            },
            None => 0.0,
        };
        y.push(value);
        mkt.push(factors.mkt()[fi]);
        smb.push(factors.smb()[fi]);
        hml.push(factors.hml()[fi]);
        d.push(dval);
    }
    if y.len() < 10 {
        return Err(Error::TooFewObservations { required: 10, actual: y.len() });
    }
    Ok((y, mkt, smb, hml, d))
}

/// Single-factor market model: y on [1, mkt].
pub fn fit_capm(
    series: &StrategyReturnSeries,
    factors: &FactorSeries,
    lag: Option<usize>,
) -> Result<RegressionResult> {
    let (y, mkt, _, _, _) = regression_rows(series, factors, None)?;
    let ones = vec![1.0; y.len()];
    ols_hac(&y, &[&ones, &mkt], &["alpha", "beta_mkt"], lag)
}

/// Three-factor model: y on [1, mkt, smb, hml].
pub fn fit_fftm(
    series: &StrategyReturnSeries,
    factors: &FactorSeries,
    lag: Option<usize>,
) -> Result<RegressionResult> {
    let (y, mkt, smb, hml, _) = regression_rows(series, factors, None)?;
    let ones = vec![1.0; y.len()];
    ols_hac(
        &y,
        &[&ones, &mkt, &smb, &hml],
        &["alpha", "beta_mkt", "beta_smb", "beta_hml"],
        lag,
    )
}

/// Three-factor model augmented with a 0/1 market-condition dummy.
///
/// The dummy series is sampled at each observation's formation month. A dummy
/// that never varies in the aligned sample comes back as a rank error.
pub fn fit_fftm_dummy(
    series: &StrategyReturnSeries,
    factors: &FactorSeries,
    dummy: &MonthSeries,
    lag: Option<usize>,
) -> Result<RegressionResult> {
    if let Some(bad) = dummy.values().iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::InvalidInput(format!("dummy value {bad} is not 0/1")));
    }
    let (y, mkt, smb, hml, d) = regression_rows(series, factors, Some(dummy))?;
    let ones = vec![1.0; y.len()];
    ols_hac(
        &y,
        &[&ones, &mkt, &smb, &hml, &d],
        &["alpha", "beta_mkt", "beta_smb", "beta_hml", "beta_d"],
        lag,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::MonthKey;
    use crate::portfolio::StrategySpec;
    use crate::synth::SplitMix64;
    use proptest::prelude::*;

    /// Textbook oracle written from the formula, independent of the engine.
    fn oracle_nw_t(series: &[f64], lag: usize) -> f64 {
        let n = series.len() as f64;
        let mean = series.iter().sum::<f64>() / n;
        let mut s = 0.0;
        for l in 0..=lag {
            let mut gamma = 0.0;
            for t in l..series.len() {
                gamma += (series[t] - mean) * (series[t - l] - mean);
            }
            gamma /= n;
            let w = 1.0 - l as f64 / (lag as f64 + 1.0);
            s += if l == 0 { gamma } else { 2.0 * w * gamma };
        }
        mean / (s / n).sqrt()
    }

    #[test]
    fn constant_series_is_rejected() {
        assert!(matches!(nw_mean_test(&[0.02, 0.02, 0.02], None), Err(Error::ConstantSeries)));
        assert!(matches!(
            nw_mean_test(&[0.02], None),
            Err(Error::TooFewObservations { .. })
        ));
    }

    #[test]
    fn lag_zero_matches_classical_t_up_to_variance_convention() {
        let series = [0.01, 0.03, -0.02, 0.04, 0.00, 0.02, -0.01];
        let n = series.len() as f64;
        let res = nw_mean_test(&series, Some(0)).unwrap();
        let mean = series.iter().sum::<f64>() / n;
        let s2 = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let classical = mean / (s2 / n).sqrt();
        // Divisor-T autocovariances make the NW t larger by sqrt(n/(n-1)).
        assert!((res.hac_t - classical * (n / (n - 1.0)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn small_series_matches_textbook_oracle() {
        let series = [1.0, 2.0, 3.0, 4.0, 5.0];
        let res = nw_mean_test(&series, Some(1)).unwrap();
        assert!((res.hac_t - oracle_nw_t(&series, 1)).abs() < 1e-10);
        // Hand expansion: gamma0 = 2, gamma1 = 0.8, S = 2 + 2*(1/2)*0.8 = 2.8.
        assert!((res.hac_t - 3.0 / (2.8f64 / 5.0).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn auto_lag_follows_the_standard_rule() {
        assert_eq!(auto_lag(100), 4);
        assert_eq!(auto_lag(300), (4.0 * 3.0f64.powf(2.0 / 9.0)).floor() as usize);
        let series: Vec<f64> = (0..300).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let res = nw_mean_test(&series, None).unwrap();
        assert_eq!(res.lag, auto_lag(300));
    }

    #[test]
    fn exact_linear_fit_recovers_coefficients() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.01 + 2.0 * v).collect();
        let ones = vec![1.0; 50];
        let res = ols_hac(&y, &[&ones, &x], &["alpha", "beta"], Some(0)).unwrap();
        assert!((res.coefficients[0] - 0.01).abs() < 1e-10);
        assert!((res.coefficients[1] - 2.0).abs() < 1e-10);
        let y_scale = y.iter().map(|v| v * v).sum::<f64>();
        let rss = res.residuals.iter().map(|u| u * u).sum::<f64>();
        assert!(rss < 1e-20 * y_scale, "scaled RSS {rss}");
    }

    #[test]
    fn fitted_plus_residuals_reconstruct_y() {
        let mut rng = SplitMix64::new(5);
        let x: Vec<f64> = (0..80).map(|_| rng.normal()).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v + 0.1 * rng.normal()).collect();
        let ones = vec![1.0; 80];
        let res = ols_hac(&y, &[&ones, &x], &["alpha", "beta"], None).unwrap();
        for i in 0..80 {
            assert!((res.fitted[i] + res.residuals[i] - y[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_column_is_named_in_rank_error() {
        let y = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let ones = vec![1.0; 6];
        let x = vec![0.5, 1.0, -0.3, 0.2, 0.9, -1.1];
        let dead = vec![0.0; 6];
        let err = ols_hac(&y, &[&ones, &x, &dead], &["alpha", "beta", "beta_d"], None).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { column } if column == "beta_d"));
    }

    #[test]
    fn coefficients_do_not_depend_on_the_hac_lag() {
        let mut rng = SplitMix64::new(17);
        let x: Vec<f64> = (0..60).map(|_| rng.normal()).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 0.5 * v + 0.2 * rng.normal()).collect();
        let ones = vec![1.0; 60];
        let a = ols_hac(&y, &[&ones, &x], &["alpha", "beta"], Some(0)).unwrap();
        let b = ols_hac(&y, &[&ones, &x], &["alpha", "beta"], Some(4)).unwrap();
        assert_eq!(a.coefficients, b.coefficients);
        assert_ne!(a.hac_std_errors, b.hac_std_errors);
    }

    #[test]
    fn lag_zero_sandwich_equals_white() {
        let mut rng = SplitMix64::new(23);
        let x: Vec<f64> = (0..70).map(|_| rng.normal()).collect();
        let y: Vec<f64> =
            x.iter().map(|v| 0.2 + 0.7 * v + (0.1 + 0.2 * v.abs()) * rng.normal()).collect();
        let ones = vec![1.0; 70];
        let res = ols_hac(&y, &[&ones, &x], &["alpha", "beta"], Some(0)).unwrap();

        // White sandwich computed directly: (X'X)^-1 X' diag(u^2) X (X'X)^-1.
        let n = 70;
        let mut xtx = [[0.0f64; 2]; 2];
        for i in 0..n {
            let row = [1.0, x[i]];
            for a in 0..2 {
                for b in 0..2 {
                    xtx[a][b] += row[a] * row[b];
                }
            }
        }
        let det = xtx[0][0] * xtx[1][1] - xtx[0][1] * xtx[1][0];
        let inv = [
            [xtx[1][1] / det, -xtx[0][1] / det],
            [-xtx[1][0] / det, xtx[0][0] / det],
        ];
        let mut meat = [[0.0f64; 2]; 2];
        for i in 0..n {
            let u = res.residuals[i];
            let row = [1.0, x[i]];
            for a in 0..2 {
                for b in 0..2 {
                    meat[a][b] += u * u * row[a] * row[b];
                }
            }
        }
        let mut cov = [[0.0f64; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for p in 0..2 {
                    for q in 0..2 {
                        cov[a][b] += inv[a][p] * meat[p][q] * inv[q][b];
                    }
                }
            }
        }
        for i in 0..2 {
            assert!((res.hac_std_errors[i] - cov[i][i].sqrt()).abs() < 1e-10);
        }
    }

    fn synthetic_fit(seed: u64) -> (StrategyReturnSeries, FactorSeries) {
        let mut rng = SplitMix64::new(seed);
        let t_len = 600;
        let first = MonthKey::new(1970, 1);
        let months: Vec<MonthKey> = (0..t_len).map(|i| first.add(i as i64)).collect();
        let mkt: Vec<f64> = (0..t_len).map(|_| 0.05 * rng.normal()).collect();
        let smb: Vec<f64> = (0..t_len).map(|_| 0.03 * rng.normal()).collect();
        let hml: Vec<f64> = (0..t_len).map(|_| 0.03 * rng.normal()).collect();
        let y: Vec<f64> = (0..t_len)
            .map(|i| 0.005 + 0.3 * mkt[i] + 0.9 * smb[i] + 0.4 * hml[i] + 0.02 * rng.normal())
            .collect();
        let factors =
            FactorSeries::new(months.clone(), mkt, smb, hml, None, None).unwrap();
        // Observation formation months sit one month before their return month.
        let obs: Vec<(MonthKey, f64)> =
            months.iter().zip(&y).map(|(m, &v)| (m.add(-1), v)).collect();
        (StrategyReturnSeries::new(StrategySpec::new(1, 1), obs), factors)
    }

    #[test]
    fn planted_three_factor_coefficients_are_recovered() {
        let (series, factors) = synthetic_fit(31);
        let res = fit_fftm(&series, &factors, None).unwrap();
        let truth = [0.005, 0.3, 0.9, 0.4];
        for i in 0..4 {
            let dev = (res.coefficients[i] - truth[i]).abs();
            assert!(
                dev <= 3.0 * res.hac_std_errors[i],
                "{}: {} vs {} (3se = {})",
                res.coef_names[i],
                res.coefficients[i],
                truth[i],
                3.0 * res.hac_std_errors[i]
            );
        }
    }

    #[test]
    fn capm_on_zero_factor_is_a_rank_error() {
        let (series, factors) = synthetic_fit(32);
        let months = factors.months().to_vec();
        let zeros = vec![0.0; months.len()];
        let dead = FactorSeries::new(months, zeros.clone(), zeros.clone(), zeros, None, None)
            .unwrap();
        let err = fit_capm(&series, &dead, None).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { column } if column == "beta_mkt"));
    }

    #[test]
    fn all_ones_dummy_is_a_rank_error() {
        let (series, factors) = synthetic_fit(33);
        let months: Vec<MonthKey> =
            series.observations().iter().map(|&(m, _)| m).collect();
        let dummy = MonthSeries::new(months.clone(), vec![1.0; months.len()]);
        let err = fit_fftm_dummy(&series, &factors, &dummy, None).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { column } if column == "beta_d"));
    }

    #[test]
    fn unrelated_dummy_loads_near_zero() {
        let (series, factors) = synthetic_fit(34);
        let months: Vec<MonthKey> =
            series.observations().iter().map(|&(m, _)| m).collect();
        let mut rng = SplitMix64::new(99);
        let values: Vec<f64> =
            (0..months.len()).map(|_| if rng.uniform() < 0.5 { 1.0 } else { 0.0 }).collect();
        let dummy = MonthSeries::new(months, values);
        let res = fit_fftm_dummy(&series, &factors, &dummy, None).unwrap();
        let bd = res.coefficient("beta_d").unwrap();
        let se = res.hac_std_errors[4];
        assert!(bd.abs() <= 3.0 * se, "beta_d {bd} vs 3se {}", 3.0 * se);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn positive_scaling_leaves_t_and_flags_unchanged(
            seed in 0u64..500,
            scale in 0.001f64..1000.0,
            lag in 0usize..6,
        ) {
            let mut rng = SplitMix64::new(seed);
            let series: Vec<f64> = (0..40).map(|_| 0.01 + 0.05 * rng.normal()).collect();
            let scaled: Vec<f64> = series.iter().map(|v| v * scale).collect();
            let a = nw_mean_test(&series, Some(lag)).unwrap();
            let b = nw_mean_test(&scaled, Some(lag)).unwrap();
            prop_assert!((a.hac_t - b.hac_t).abs() < 1e-9 * a.hac_t.abs().max(1.0));
            // Flags can only differ on a knife edge that scaling noise crosses.
            if (a.hac_t.abs() - CRIT_5PCT).abs() > 1e-6 {
                prop_assert_eq!(a.significant_5, b.significant_5);
            }
            if (a.hac_t.abs() - CRIT_1PCT).abs() > 1e-6 {
                prop_assert_eq!(a.significant_1, b.significant_1);
            }
        }
    }
}

//! Machine-readable output tables.
//!
//! Every writer takes a `raw` flag: false prints numbers at six significant
//! digits, true prints full shortest-round-trip precision. Writers emit pure
//! CSV; the caller may prepend a `#` comment line (readers here and in the
//! loaders skip comment lines).

use crate::calendar::MonthKey;
use crate::econometrics::{stars, MeanTestResult, RegressionResult};
use crate::error::{Error, Result};
use crate::garch::{GarchFit, PARAM_NAMES};
use crate::portfolio::{StrategyReturnSeries, StrategySpec};
use crate::regimes::{Condition, RegimeSeries};
use std::io::Write;

/// Format a float at six significant digits (`raw` keeps full precision).
/// Non-finite values print as `NA`.
pub fn fmt_float(x: f64, raw: bool) -> String {
    if !x.is_finite() {
        return "NA".into();
    }
    if raw {
        return format!("{x}");
    }
    fmt_sig(x, 6)
}

fn fmt_sig(x: f64, digits: i32) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if exp >= digits || exp < -4 {
        format!("{:.*e}", (digits - 1) as usize, x)
    } else {
        format!("{:.*}", (digits - 1 - exp).max(0) as usize, x)
    }
}

/// The `# tool version config=hash` line that heads every output file.
pub fn header_line(version: &str, config_hash: &str) -> String {
    format!("# anomalyscan {version} config={config_hash}")
}

pub fn write_header<W: Write>(mut w: W, version: &str, config_hash: &str) -> Result<()> {
    writeln!(w, "{}", header_line(version, config_hash)).map_err(|e| Error::io("<writer>", e))
}

fn wr_err(err: csv::Error) -> Error {
    Error::InvalidInput(format!("csv write failed: {err}"))
}

/// `strategy_returns.csv`: one row per (strategy, formation month).
pub fn write_strategy_returns<W: Write>(
    series: &[StrategyReturnSeries],
    w: W,
    raw: bool,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["j", "k", "skip", "side", "formation_year", "formation_month", "bh_return"])
        .map_err(wr_err)?;
    for s in series {
        let spec = s.spec();
        for &(month, value) in s.observations() {
            out.write_record([
                spec.estimation_months.to_string(),
                spec.holding_months.to_string(),
                spec.skip_months.to_string(),
                spec.side.to_string(),
                month.year().to_string(),
                month.month().to_string(),
                fmt_float(value, raw),
            ])
            .map_err(wr_err)?;
        }
    }
    out.flush().map_err(|e| Error::io("<writer>", e))
}

/// `raw_returns.csv`: mean / HAC t / stars per (J, K) cell.
pub fn write_raw_returns<W: Write>(
    rows: &[(StrategySpec, MeanTestResult)],
    w: W,
    raw: bool,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["j", "k", "mean", "t", "stars", "n"]).map_err(wr_err)?;
    for (spec, test) in rows {
        out.write_record([
            spec.estimation_months.to_string(),
            spec.holding_months.to_string(),
            fmt_float(test.mean, raw),
            fmt_float(test.hac_t, raw),
            stars(test.hac_t).to_string(),
            test.n_obs.to_string(),
        ])
        .map_err(wr_err)?;
    }
    out.flush().map_err(|e| Error::io("<writer>", e))
}

/// One regression's identity in `regressions.csv`.
#[derive(Debug, Clone)]
pub struct RegressionRow {
    pub j: u32,
    pub k: u32,
    /// `capm`, `fftm`, or `fftm_dummy`.
    pub model: &'static str,
    /// Condition name for dummy models, empty otherwise.
    pub dummy: String,
    pub result: RegressionResult,
}

/// `regressions.csv`: one row per coefficient of each fitted model.
pub fn write_regressions<W: Write>(rows: &[RegressionRow], w: W, raw: bool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "j", "k", "model", "dummy", "coef_name", "estimate", "hac_se", "t", "stars", "n", "lag",
    ])
    .map_err(wr_err)?;
    for row in rows {
        let r = &row.result;
        for i in 0..r.coefficients.len() {
            out.write_record([
                row.j.to_string(),
                row.k.to_string(),
                row.model.to_string(),
                row.dummy.clone(),
                r.coef_names[i].clone(),
                fmt_float(r.coefficients[i], raw),
                fmt_float(r.hac_std_errors[i], raw),
                fmt_float(r.t_stats[i], raw),
                stars(r.t_stats[i]).to_string(),
                r.n_obs.to_string(),
                r.lag.to_string(),
            ])
            .map_err(wr_err)?;
        }
    }
    out.flush().map_err(|e| Error::io("<writer>", e))
}

/// `regimes.csv`: per-month raw level and dummy of each condition series.
pub fn write_regimes<W: Write>(regimes: &[&RegimeSeries], w: W, raw: bool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["condition", "year", "month", "raw_value", "dummy"]).map_err(wr_err)?;
    for regime in regimes {
        for (i, month) in regime.months().iter().enumerate() {
            out.write_record([
                regime.condition().to_string(),
                month.year().to_string(),
                month.month().to_string(),
                fmt_float(regime.raw_values()[i], raw),
                regime.dummies()[i].to_string(),
            ])
            .map_err(wr_err)?;
        }
    }
    out.flush().map_err(|e| Error::io("<writer>", e))
}

/// One (strategy, condition) row of `regime_splits.csv`.
#[derive(Debug, Clone)]
pub struct SplitRow {
    pub j: u32,
    pub k: u32,
    pub condition: Condition,
    pub raw: MeanTestResult,
    pub high: MeanTestResult,
    pub low: MeanTestResult,
}

/// `regime_splits.csv`: full-sample mean plus the high/low bucket means.
pub fn write_regime_splits<W: Write>(rows: &[SplitRow], w: W, raw: bool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "j", "k", "raw_mean", "raw_t", "high_mean", "high_t", "low_mean", "low_t", "condition",
    ])
    .map_err(wr_err)?;
    for row in rows {
        out.write_record([
            row.j.to_string(),
            row.k.to_string(),
            fmt_float(row.raw.mean, raw),
            fmt_float(row.raw.hac_t, raw),
            fmt_float(row.high.mean, raw),
            fmt_float(row.high.hac_t, raw),
            fmt_float(row.low.mean, raw),
            fmt_float(row.low.hac_t, raw),
            row.condition.to_string(),
        ])
        .map_err(wr_err)?;
    }
    out.flush().map_err(|e| Error::io("<writer>", e))
}

/// `garch_fit.csv`: one row per parameter of each fitted series.
pub fn write_garch_fits<W: Write>(fits: &[(&str, &GarchFit)], w: W, raw: bool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "series", "param", "estimate", "std_error", "loglik", "converged", "iterations", "n",
    ])
    .map_err(wr_err)?;
    for (name, fit) in fits {
        let estimates = fit.params.as_array();
        for (i, param) in PARAM_NAMES.iter().enumerate() {
            if !fit.spec.asymmetric && *param == "xi" {
                continue;
            }
            out.write_record([
                name.to_string(),
                param.to_string(),
                fmt_float(estimates[i], raw),
                fmt_float(fit.std_errors[i], raw),
                fmt_float(fit.loglik, raw),
                fit.converged.to_string(),
                fit.iterations.to_string(),
                fit.n_obs.to_string(),
            ])
            .map_err(wr_err)?;
        }
    }
    out.flush().map_err(|e| Error::io("<writer>", e))
}

/// `cond_variance.csv`: the conditional-variance series by month.
pub fn write_cond_variance<W: Write>(
    months: &[MonthKey],
    sigma2: &[f64],
    w: W,
    raw: bool,
) -> Result<()> {
    assert_eq!(months.len(), sigma2.len(), "months/sigma2 length mismatch");
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["year", "month", "sigma2"]).map_err(wr_err)?;
    for (month, &v) in months.iter().zip(sigma2) {
        out.write_record([
            month.year().to_string(),
            month.month().to_string(),
            fmt_float(v, raw),
        ])
        .map_err(wr_err)?;
    }
    out.flush().map_err(|e| Error::io("<writer>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_float(0.0263, false), "0.0263000");
        assert_eq!(fmt_float(2.6449, false), "2.64490");
        assert_eq!(fmt_float(-0.0263, false), "-0.0263000");
        assert_eq!(fmt_float(123456789.0, false), "1.23457e8");
        assert_eq!(fmt_float(1.28e-8, false), "1.28000e-8");
        assert_eq!(fmt_float(0.0, false), "0");
        assert_eq!(fmt_float(f64::NAN, false), "NA");
    }

    #[test]
    fn raw_mode_round_trips_exactly() {
        for &x in &[0.1 + 0.2, 1e-17, -3.5, f64::MIN_POSITIVE] {
            let s = fmt_float(x, true);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn header_line_is_stable() {
        assert_eq!(header_line("0.1.0", "abcd"), "# anomalyscan 0.1.0 config=abcd");
    }

    #[test]
    fn strategy_returns_schema() {
        let spec = StrategySpec::new(12, 1);
        let series = StrategyReturnSeries::new(
            spec,
            vec![(MonthKey::new(2001, 2), 0.0125), (MonthKey::new(2001, 3), -0.002)],
        );
        let mut buf = Vec::new();
        write_strategy_returns(&[series], &mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "j,k,skip,side,formation_year,formation_month,bh_return"
        );
        assert_eq!(lines.next().unwrap(), "12,1,1,CSCON,2001,2,0.0125000");
    }
}

//! The five subcommands. Validation problems (bad config, missing or
//! malformed inputs) exit 1; computation failures exit 2; success exits 0.
//! Per-cell problems (a J too long for the panel, a degenerate window) are
//! stderr warnings, not failures: the run emits every cell it can.

use crate::config::RunConfig;
use anomalyscan_core as engine;
use anomalyscan_core::{
    report, scan, synth, Error, FactorSeries, GarchFit, IngestConfig, MonthSeries,
    MonthlyPanel, RegimeSeries, StrategyReturnSeries,
};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub struct CmdError {
    pub code: i32,
    pub message: String,
}

fn validation(message: impl Into<String>) -> CmdError {
    CmdError { code: 1, message: message.into() }
}

fn computation(err: Error) -> CmdError {
    CmdError { code: 2, message: err.to_string() }
}

fn warn(msg: impl AsRef<str>) {
    eprintln!("warning: {}", msg.as_ref());
}

/// Output directory handle; every file it writes starts with the
/// version/config-hash comment line.
struct OutputDir {
    dir: PathBuf,
    hash: String,
    raw: bool,
}

impl OutputDir {
    fn create(config: &RunConfig) -> Result<Self, CmdError> {
        let dir = config.output.dir.clone();
        fs::create_dir_all(&dir)
            .map_err(|e| validation(format!("cannot create output dir {}: {e}", dir.display())))?;
        let out = Self { dir, hash: config.hash(), raw: config.output.raw };
        // Echo the effective configuration next to the outputs.
        out.write("config.toml", |w| {
            w.write_all(config.canonical_toml().as_bytes())
                .map_err(|e| Error::InvalidInput(format!("cannot write config.toml: {e}")))
        })?;
        Ok(out)
    }

    fn write<F>(&self, name: &str, body: F) -> Result<(), CmdError>
    where
        F: FnOnce(&mut dyn Write) -> engine::Result<()>,
    {
        let path = self.dir.join(name);
        let mut file = fs::File::create(&path)
            .map_err(|e| validation(format!("cannot create {}: {e}", path.display())))?;
        report::write_header(&mut file, engine::VERSION, &self.hash)
            .and_then(|_| body(&mut file))
            .map_err(computation)?;
        file.flush().map_err(|e| CmdError { code: 2, message: e.to_string() })?;
        Ok(())
    }
}

fn require_input(path: &Option<PathBuf>, what: &str, flag: &str) -> Result<PathBuf, CmdError> {
    let path = path
        .as_ref()
        .ok_or_else(|| validation(format!("no {what} input; pass {flag} or set it in the config file")))?;
    if !path.exists() {
        return Err(validation(format!("{what} file {} does not exist", path.display())));
    }
    Ok(path.clone())
}

fn load_panel(config: &RunConfig) -> Result<MonthlyPanel, CmdError> {
    let path = require_input(&config.inputs.panel, "monthly panel", "--panel")?;
    let load = engine::load_monthly_panel(&path, &IngestConfig::default())
        .map_err(|e| validation(e.to_string()))?;
    if !load.dropped.is_empty() {
        warn(format!(
            "dropped {} stock(s) with no valid observations: {}",
            load.dropped.len(),
            load.dropped.join(", ")
        ));
    }
    Ok(load.panel)
}

fn load_factors(config: &RunConfig) -> Result<FactorSeries, CmdError> {
    let path = require_input(&config.inputs.factors, "factor series", "--factors")?;
    engine::load_factors(&path).map_err(|e| validation(e.to_string()))
}

/// Strategy series for every grid cell that yields observations.
fn build_series(
    panel: &MonthlyPanel,
    config: &RunConfig,
    grid: &[(u32, u32)],
) -> Result<Vec<StrategyReturnSeries>, CmdError> {
    let mut out = Vec::new();
    for &(j, k) in grid {
        let spec = config.spec_for(j, k).map_err(validation)?;
        spec.validate().map_err(|e| validation(e.to_string()))?;
        let series = engine::strategy_series(panel, &spec).map_err(computation)?;
        if series.is_empty() {
            warn(format!("({j},{k}): no formation month qualifies, cell skipped"));
            continue;
        }
        out.push(series);
    }
    Ok(out)
}

pub fn cmd_backtest(config: &RunConfig) -> Result<(), CmdError> {
    let panel = load_panel(config)?;
    let out = OutputDir::create(config)?;
    let series = build_series(&panel, config, &config.table_grid())?;

    let mut rows = Vec::new();
    for s in &series {
        match engine::nw_mean_test(&s.values(), config.hac.lag) {
            Ok(test) => rows.push((*s.spec(), test)),
            Err(e) => warn(format!(
                "({},{}): mean test skipped: {e}",
                s.spec().estimation_months,
                s.spec().holding_months
            )),
        }
    }
    out.write("strategy_returns.csv", |w| {
        report::write_strategy_returns(&series, w, out.raw)
    })?;
    out.write("raw_returns.csv", |w| report::write_raw_returns(&rows, w, out.raw))?;
    Ok(())
}

pub fn cmd_scan(config: &RunConfig) -> Result<(), CmdError> {
    let panel = load_panel(config)?;
    let out = OutputDir::create(config)?;
    let scan_config = scan::ScanConfig {
        window_months: config.scan.window,
        step_months: config.scan.step,
        grid: config.scan_grid(),
        significance_level: config.scan.significance,
        side: config.side().map_err(validation)?,
        skip_months: config.strategy.skip,
        decile_count: config.strategy.decile_count,
        hac_lag: config.hac.lag,
    };
    scan_config.validate().map_err(|e| validation(e.to_string()))?;
    let grid = scan::run_scan(&panel, &scan_config).map_err(computation)?;
    out.write("scan_grid.csv", |w| scan::emit_grid(&grid, w))?;
    out.write("scan_values.csv", |w| scan::emit_values(&grid, w, out.raw))?;
    Ok(())
}

/// The regime series the available inputs allow, with their GARCH fits.
struct RegimeSet {
    series: Vec<RegimeSeries>,
    vol_fit: Option<(GarchFit, Vec<engine::MonthKey>)>,
    unc_fit: Option<GarchFit>,
}

fn build_regimes(config: &RunConfig, factors: Option<&FactorSeries>) -> RegimeSet {
    let mut set = RegimeSet { series: Vec::new(), vol_fit: None, unc_fit: None };

    let index: Option<MonthSeries> = factors.and_then(|f| f.index_series());
    match &index {
        Some(series) => {
            match engine::market_state(series, config.regimes.state_lookback) {
                Ok(r) => set.series.push(r),
                Err(e) => warn(format!("market state skipped: {e}")),
            }
            match engine::volatility_regime(series) {
                Ok((r, fit)) => {
                    if !fit.converged {
                        warn("volatility GARCH fit did not converge; best point used");
                    }
                    set.vol_fit = Some((fit, r.months().to_vec()));
                    set.series.push(r);
                }
                Err(e) => warn(format!("volatility regime skipped: {e}")),
            }
        }
        None => warn("no index_logret column: State and Volatility regimes unavailable"),
    }

    match &config.inputs.bars {
        Some(path) if path.exists() => match engine::load_daily_bars(path) {
            Ok(bars) => match engine::amihud_illiquidity(&bars, config.regimes.min_days) {
                Ok(r) => set.series.push(r),
                Err(e) => warn(format!("illiquidity regime skipped: {e}")),
            },
            Err(e) => warn(format!("daily bars unusable: {e}")),
        },
        Some(path) => warn(format!("daily bars file {} does not exist", path.display())),
        None => warn("no daily bars input: Illiquidity regime unavailable"),
    }

    match factors.and_then(|f| f.macro_series()) {
        Some(series) => match engine::macro_uncertainty(&series) {
            Ok((r, fit)) => {
                if !fit.converged {
                    warn("uncertainty GARCH fit did not converge; best point used");
                }
                set.unc_fit = Some(fit);
                set.series.push(r);
            }
            Err(e) => warn(format!("uncertainty regime skipped: {e}")),
        },
        None => warn("no macro_index column: Uncertainty regime unavailable"),
    }
    set
}

pub fn cmd_regress(config: &RunConfig) -> Result<(), CmdError> {
    let panel = load_panel(config)?;
    let factors = load_factors(config)?;
    let out = OutputDir::create(config)?;
    let regimes = build_regimes(config, Some(&factors));
    let series = build_series(&panel, config, &config.table_grid())?;

    let mut rows: Vec<report::RegressionRow> = Vec::new();
    for s in &series {
        let (j, k) = (s.spec().estimation_months, s.spec().holding_months);
        let mut push = |model: &'static str, dummy: String,
                        res: engine::Result<engine::RegressionResult>| match res {
            Ok(result) => rows.push(report::RegressionRow { j, k, model, dummy, result }),
            Err(e) => warn(format!("({j},{k}) {model}: {e}")),
        };
        push("capm", String::new(), engine::fit_capm(s, &factors, config.hac.lag));
        push("fftm", String::new(), engine::fit_fftm(s, &factors, config.hac.lag));
        for regime in &regimes.series {
            push(
                "fftm_dummy",
                regime.condition().to_string(),
                engine::fit_fftm_dummy(s, &factors, &regime.dummy_series(), config.hac.lag),
            );
        }
    }
    out.write("regressions.csv", |w| report::write_regressions(&rows, w, out.raw))?;
    Ok(())
}

pub fn cmd_regimes(config: &RunConfig) -> Result<(), CmdError> {
    let panel = load_panel(config)?;
    let factors = match &config.inputs.factors {
        Some(_) => Some(load_factors(config)?),
        None => None,
    };
    let out = OutputDir::create(config)?;
    let regimes = build_regimes(config, factors.as_ref());
    if regimes.series.is_empty() {
        return Err(validation(
            "no regime could be built; provide factors with index_logret/macro_index or daily bars",
        ));
    }

    let refs: Vec<&RegimeSeries> = regimes.series.iter().collect();
    out.write("regimes.csv", |w| report::write_regimes(&refs, w, out.raw))?;

    let mut fits: Vec<(&str, &GarchFit)> = Vec::new();
    if let Some((fit, _)) = &regimes.vol_fit {
        fits.push(("index_volatility", fit));
    }
    if let Some(fit) = &regimes.unc_fit {
        fits.push(("macro_uncertainty", fit));
    }
    if !fits.is_empty() {
        out.write("garch_fit.csv", |w| report::write_garch_fits(&fits, w, out.raw))?;
    }
    if let Some((fit, months)) = &regimes.vol_fit {
        out.write("cond_variance.csv", |w| {
            report::write_cond_variance(months, &fit.cond_variance, w, out.raw)
        })?;
    }

    let series = build_series(&panel, config, &config.table_grid())?;
    let mut rows = Vec::new();
    for s in &series {
        let (j, k) = (s.spec().estimation_months, s.spec().holding_months);
        let raw_test = match engine::nw_mean_test(&s.values(), config.hac.lag) {
            Ok(t) => t,
            Err(e) => {
                warn(format!("({j},{k}): mean test skipped: {e}"));
                continue;
            }
        };
        for regime in &regimes.series {
            match engine::split_performance(s, regime, config.hac.lag) {
                Ok((high, low)) => rows.push(report::SplitRow {
                    j,
                    k,
                    condition: regime.condition(),
                    raw: raw_test.clone(),
                    high,
                    low,
                }),
                Err(e) => warn(format!("({j},{k}) {}: split skipped: {e}", regime.condition())),
            }
        }
    }
    out.write("regime_splits.csv", |w| report::write_regime_splits(&rows, w, out.raw))?;
    Ok(())
}

pub fn cmd_synth(config: &RunConfig) -> Result<(), CmdError> {
    let out = OutputDir::create(config)?;
    let s = &config.synth;
    let spec = synth::SynthSpec {
        seed: s.seed,
        n_stocks: s.n_stocks,
        n_months: s.n_months,
        regimes: s
            .regimes
            .iter()
            .map(|r| synth::RegimeWindow { start: r.start, end: r.end, rho: r.rho })
            .collect(),
        reversion_lags: s.reversion_lags,
        loading_mean: s.loading_mean,
        loading_sd: s.loading_sd,
        factor_vol: s.factor_vol,
        noise_scale: s.noise_scale,
        ..Default::default()
    };
    let panel = synth::gen_panel(&spec).map_err(|e| validation(e.to_string()))?;
    let factors = synth::gen_factor_series(
        s.seed ^ 0xFAC7,
        spec.first_month,
        s.n_months,
        s.factor_vol.max(0.01),
        true,
        true,
    )
    .map_err(computation)?;
    let bars = synth::gen_daily_bars(
        s.seed ^ 0xDA11,
        panel.stocks(),
        spec.first_month,
        s.n_months,
        s.days_per_month,
    )
    .map_err(|e| validation(e.to_string()))?;

    out.write("monthly_panel.csv", |w| engine::panel::write_monthly_panel(&panel, w))?;
    out.write("factors.csv", |w| engine::panel::write_factors(&factors, w))?;
    out.write("daily_bars.csv", |w| engine::panel::write_daily_bars(&bars, w))?;
    Ok(())
}

/// Ensure `path` is readable early so missing-file problems surface as
/// validation errors with the path in the message.
pub fn preflight(path: &Path) -> Result<(), CmdError> {
    if path.exists() {
        Ok(())
    } else {
        Err(validation(format!("config file {} does not exist", path.display())))
    }
}

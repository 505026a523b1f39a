//! Research engine for cross-sectional momentum and contrarian strategies on
//! monthly equity panels.
//!
//! The pipeline: load and align input panels ([`panel`]), build J-K
//! winner/loser decile portfolios and their buy-and-hold long-short return
//! series ([`portfolio`]), test and risk-adjust them with Newey-West HAC
//! inference and factor regressions ([`econometrics`]), estimate GARCH-family
//! conditional volatility ([`garch`]), split performance by market-condition
//! regimes ([`regimes`]), and sweep the whole (J, K) grid over moving windows
//! to map where strategy returns are significant ([`scan`]). [`synth`]
//! generates the deterministic fixtures the test suites run on, and
//! [`report`] writes the output tables.
//!
//! Everything is deterministic: identical inputs produce bit-identical
//! outputs at any thread count.

pub mod calendar;
pub mod econometrics;
pub mod error;
pub mod garch;
mod optim;
pub mod panel;
pub mod portfolio;
pub mod regimes;
pub mod report;
pub mod scan;
pub mod synth;

pub use calendar::{MonthKey, MonthSeries};
pub use error::{Error, Result};
pub use panel::{
    align_months, load_daily_bars, load_factors, load_monthly_panel, AlignedSample, DailyBar,
    DailyBarSet, FactorSeries, IngestConfig, MonthlyPanel, PanelLoad,
};
pub use portfolio::{
    buy_and_hold_return, eligible_stocks, form_portfolio, strategy_series, FormationResult, Side,
    StrategyReturnSeries, StrategySpec,
};
pub use econometrics::{
    auto_lag, fit_capm, fit_fftm, fit_fftm_dummy, nw_mean_test, ols_hac, stars, MeanTestResult,
    RegressionResult,
};
pub use garch::{
    conditional_variance, conditional_variance_path, fit_garch, log_likelihood, GarchFit,
    GarchParams, GarchSpec,
};
pub use regimes::{
    amihud_illiquidity, macro_uncertainty, market_state, split_performance, volatility_regime,
    Condition, RegimeSeries,
};
pub use scan::{emit_grid, emit_values, run_scan, CellClass, ScanConfig, ScanGrid};
pub use synth::{gen_daily_bars, gen_factor_series, gen_garch_path, gen_panel, SynthSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

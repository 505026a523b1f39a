//! Deterministic synthetic-data generation for tests and fixtures.
//!
//! Everything here is bit-reproducible from a `u64` seed, on any platform:
//!
//! - PRNG: SplitMix64 (Steele, Lea & Flood 2014), a fixed 64-bit mixing
//!   function, no global state, trivially portable across languages.
//! - Gaussian draws: uniform in (0,1) mapped through the AS 241 (PPND16)
//!   rational approximation of the inverse normal CDF. No rejection sampling,
//!   so the draw count per cell is fixed and streams never desynchronize.

use crate::calendar::MonthKey;
use crate::error::{Error, Result};
use crate::garch::GarchParams;
use crate::panel::{DailyBar, DailyBarSet, FactorSeries, IngestConfig, MonthlyPanel};

/// SplitMix64: `state += 0x9E3779B97F4A7C15`, then finalize with two
/// xor-shift-multiply rounds.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in the open interval (0, 1), 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal draw via the inverse CDF.
    pub fn normal(&mut self) -> f64 {
        inverse_normal_cdf(self.uniform())
    }

    /// Derive an independent stream for a named sub-purpose.
    pub fn substream(&self, tag: u64) -> SplitMix64 {
        let mut rng = SplitMix64::new(self.state ^ tag.wrapping_mul(0xA076_1D64_78BD_642F));
        rng.next_u64();
        rng
    }
}

/// Inverse standard-normal CDF, AS 241 algorithm PPND16 (Wichura 1988).
///
/// Absolute error is below 1e-15 over (0, 1); fully deterministic.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "p must be in (0,1), got {p}");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * horner(r, &A) / horner(r, &B);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        horner(r, &C) / horner(r, &D)
    } else {
        let r = r - 5.0;
        horner(r, &E) / horner(r, &F)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

fn horner(x: f64, coeffs: &[f64; 8]) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

// AS 241 PPND16 coefficients, constant term first.
const A: [f64; 8] = [
    3.387_132_872_796_366_608e0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_577_34e0,
    4.630_337_846_156_545_295_9e0,
    5.769_497_221_460_691_405_5e0,
    3.647_848_324_763_204_605_04e0,
    1.270_458_252_452_368_382_58e0,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87e0,
    1.676_384_830_183_803_849_4e0,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103_777_2e0,
    5.463_784_911_164_114_369_9e0,
    1.784_826_539_917_291_335_8e0,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

/// One stretch of months with a planted cross-sectional AR coefficient.
///
/// `start..=end` are zero-based month indices into the generated panel.
#[derive(Debug, Clone, Copy)]
pub struct RegimeWindow {
    pub start: usize,
    pub end: usize,
    pub rho: f64,
}

/// Recipe for a synthetic monthly panel.
///
/// Each stock's return is a planted reversal/momentum component driven by its
/// trailing-`reversion_lags`-month average return (cross-sectionally demeaned,
/// scaled by the regime's `rho`), plus factor exposures times generated
/// factors, plus idiosyncratic noise. Returns are clipped above -0.99.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_stocks: usize,
    pub n_months: usize,
    pub first_month: MonthKey,
    pub regimes: Vec<RegimeWindow>,
    /// Trailing window (months) that the planted component feeds on. With 1,
    /// the component is `rho` times the previous month's demeaned return.
    pub reversion_lags: usize,
    pub loading_mean: f64,
    pub loading_sd: f64,
    pub factor_vol: f64,
    pub noise_scale: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            n_stocks: 30,
            n_months: 120,
            first_month: MonthKey::new(1990, 1),
            regimes: Vec::new(),
            reversion_lags: 1,
            loading_mean: 0.0,
            loading_sd: 0.0,
            factor_vol: 0.02,
            noise_scale: 0.05,
        }
    }
}

impl SynthSpec {
    fn rho_at(&self, month_idx: usize) -> f64 {
        self.regimes
            .iter()
            .find(|r| (r.start..=r.end).contains(&month_idx))
            .map_or(0.0, |r| r.rho)
    }
}

/// Generate a gap-free synthetic panel per `spec`. Same seed, same bits.
pub fn gen_panel(spec: &SynthSpec) -> Result<MonthlyPanel> {
    if spec.n_stocks < 20 || spec.n_months < 24 {
        return Err(Error::InvalidInput(format!(
            "panel dims too small: {} stocks x {} months (need >= 20 x 24)",
            spec.n_stocks, spec.n_months
        )));
    }
    if spec.reversion_lags == 0 {
        return Err(Error::InvalidInput("reversion_lags must be >= 1".into()));
    }
    let n = spec.n_stocks;
    let t_len = spec.n_months;
    let mut rng = SplitMix64::new(spec.seed);

    // Draw order is fixed: loadings, then factors, then noise month-by-month.
    let loadings: Vec<[f64; 3]> = (0..n)
        .map(|_| {
            [
                spec.loading_mean + spec.loading_sd * rng.normal(),
                spec.loading_mean + spec.loading_sd * rng.normal(),
                spec.loading_mean + spec.loading_sd * rng.normal(),
            ]
        })
        .collect();
    let factors: Vec<[f64; 3]> = (0..t_len)
        .map(|_| {
            [
                spec.factor_vol * rng.normal(),
                spec.factor_vol * rng.normal(),
                spec.factor_vol * rng.normal(),
            ]
        })
        .collect();

    let mut returns = vec![0.0f64; n * t_len];
    for t in 0..t_len {
        let rho = spec.rho_at(t);
        // Trailing per-stock average over the available lags, then demeaned.
        let lags = spec.reversion_lags.min(t);
        let mut trailing = vec![0.0f64; n];
        if rho != 0.0 && lags > 0 {
            for (i, slot) in trailing.iter_mut().enumerate() {
                let mut acc = 0.0;
                for l in 1..=lags {
                    acc += returns[i * t_len + (t - l)];
                }
                *slot = acc / lags as f64;
            }
            let mean = trailing.iter().sum::<f64>() / n as f64;
            for slot in trailing.iter_mut() {
                *slot -= mean;
            }
        }
        for i in 0..n {
            let planted = if lags > 0 { rho * trailing[i] } else { 0.0 };
            let factor_part: f64 =
                (0..3).map(|f| loadings[i][f] * factors[t][f]).sum();
            let r = planted + factor_part + spec.noise_scale * rng.normal();
            returns[i * t_len + t] = r.max(-0.99);
        }
    }

    let width = (n.max(10) as f64).log10().ceil() as usize;
    let first = spec.first_month;
    let cells = returns.chunks(t_len).enumerate().flat_map(|(i, row)| {
        let name = format!("S{i:0width$}");
        row.iter()
            .enumerate()
            .map(move |(t, &r)| (name.clone(), first.add(t as i64), r))
            .collect::<Vec<_>>()
    });
    Ok(MonthlyPanel::from_cells(cells, &IngestConfig::default())?.panel)
}

/// A simulated GARCH path with the true conditional variances kept for
/// recovery tests.
#[derive(Debug, Clone)]
pub struct GarchPath {
    pub returns: Vec<f64>,
    pub sigma2: Vec<f64>,
}

/// Simulate `t_len` observations of the AR(1) mean / GJR variance recursion.
///
/// The recursion starts at the stationary variance `k / (1 - persistence)`
/// and the stationary mean `c / (1 - phi)`.
pub fn gen_garch_path(params: &GarchParams, t_len: usize, seed: u64) -> Result<GarchPath> {
    params.validate()?;
    if t_len == 0 {
        return Err(Error::InvalidInput("path length must be positive".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let mut returns = Vec::with_capacity(t_len);
    let mut sigma2 = Vec::with_capacity(t_len);

    let uncond_var = params.k / (1.0 - params.persistence());
    let mut prev_ret = params.c / (1.0 - params.phi);
    let mut var = uncond_var;
    let mut prev_eps = 0.0f64;
    for t in 0..t_len {
        if t > 0 {
            var = params.k
                + params.gamma * sigma2[t - 1]
                + (params.alpha + if prev_eps < 0.0 { params.xi } else { 0.0 }) * prev_eps * prev_eps;
        }
        let eps = var.sqrt() * rng.normal();
        let r = params.c + params.phi * prev_ret + eps;
        sigma2.push(var);
        returns.push(r);
        prev_eps = eps;
        prev_ret = r;
    }
    Ok(GarchPath { returns, sigma2 })
}

/// Generate a factor series, optionally with index log returns and a macro
/// coincident-index level series.
pub fn gen_factor_series(
    seed: u64,
    first_month: MonthKey,
    n_months: usize,
    factor_vol: f64,
    with_index: bool,
    with_macro: bool,
) -> Result<FactorSeries> {
    if n_months == 0 {
        return Err(Error::InvalidInput("n_months must be positive".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let months: Vec<MonthKey> = (0..n_months).map(|i| first_month.add(i as i64)).collect();
    let mut draw = |vol: f64| -> Vec<f64> { (0..n_months).map(|_| vol * rng.normal()).collect() };
    let mkt = draw(factor_vol);
    let smb = draw(factor_vol);
    let hml = draw(factor_vol);

    let index_logret = with_index.then(|| {
        let mut rng = SplitMix64::new(seed).substream(0x1D8);
        (0..n_months).map(|_| 0.003 + 0.07 * rng.normal()).collect::<Vec<_>>()
    });
    let macro_index = if with_macro {
        let params = GarchParams {
            c: 0.002,
            phi: 0.2,
            k: 2e-5,
            gamma: 0.8,
            alpha: 0.1,
            xi: 0.0,
        };
        let path = gen_garch_path(&params, n_months, seed ^ 0x9C0FFEE)?;
        let mut level = 100.0f64;
        Some(
            path.returns
                .iter()
                .map(|y| {
                    level *= y.exp();
                    level
                })
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    FactorSeries::new(months, mkt, smb, hml, index_logret, macro_index)
}

/// Generate daily bars for `stocks` over `n_months` months,
/// `days_per_month` bars each (must be <= 28 to stay calendar-valid).
pub fn gen_daily_bars(
    seed: u64,
    stocks: &[String],
    first_month: MonthKey,
    n_months: usize,
    days_per_month: u32,
) -> Result<DailyBarSet> {
    if !(1..=28).contains(&days_per_month) {
        return Err(Error::InvalidInput("days_per_month must be in 1..=28".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let mut by_stock: Vec<(String, Vec<DailyBar>)> = Vec::with_capacity(stocks.len());
    let mut names: Vec<String> = stocks.to_vec();
    names.sort();
    for stock in names {
        let mut bars = Vec::with_capacity(n_months * days_per_month as usize);
        for m in 0..n_months {
            let month = first_month.add(m as i64);
            for d in 1..=days_per_month {
                let date = chrono::NaiveDate::from_ymd_opt(month.year(), month.month() as u32, d)
                    .expect("day <= 28 is always valid");
                let ret = 0.02 * rng.normal();
                let volume = (13.8 + rng.normal()).exp(); // log-normal around ~1e6
                bars.push(DailyBar { date, ret, volume });
            }
        }
        by_stock.push((stock, bars));
    }
    let (stocks, bars): (Vec<_>, Vec<_>) = by_stock.into_iter().unzip();
    DailyBarSet::from_parts(stocks, bars)
}

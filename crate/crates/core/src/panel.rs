//! Input panels: loading, validation, and calendar alignment.
//!
//! All series are parsed from CSV into immutable in-memory panels. Missing
//! monthly returns stay missing (an absent row is an absent cell); nothing is
//! ever imputed; downstream eligibility rules decide what to include.

use crate::calendar::MonthKey;
use crate::error::{Error, Result};
use chrono::NaiveDate;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Options for monthly-panel ingestion.
#[derive(Debug, Clone)]
pub struct IngestConfig {
    /// Stocks with fewer present returns than this are dropped and reported.
    pub min_valid_months: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self { min_valid_months: 1 }
    }
}

/// Aligned matrix of monthly simple returns, one column per stock.
///
/// The month axis is contiguous (no gaps); cells may be missing. Stocks are
/// held in lexicographic identifier order, which is the canonical tie-break
/// order everywhere downstream. Instances are immutable after construction
/// and safe to share across threads.
#[derive(Debug, Clone)]
pub struct MonthlyPanel {
    months: Vec<MonthKey>,
    stocks: Vec<String>,
    // Stock-major storage, NaN encodes a missing cell.
    cells: Vec<f64>,
}

impl PartialEq for MonthlyPanel {
    fn eq(&self, other: &Self) -> bool {
        // Bitwise cell comparison so missing (NaN) cells compare equal.
        self.months == other.months
            && self.stocks == other.stocks
            && self.cells.len() == other.cells.len()
            && self
                .cells
                .iter()
                .zip(&other.cells)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl MonthlyPanel {
    /// Build a panel from `(stock, month, return)` cells.
    ///
    /// The month axis spans the min..max month seen. Validates duplicates and
    /// the `return > -1` invariant; drops stocks with fewer than
    /// `config.min_valid_months` present returns and reports them.
    pub fn from_cells(
        cells: impl IntoIterator<Item = (String, MonthKey, f64)>,
        config: &IngestConfig,
    ) -> Result<PanelLoad> {
        let mut by_stock: BTreeMap<String, BTreeMap<MonthKey, f64>> = BTreeMap::new();
        let mut first: Option<MonthKey> = None;
        let mut last: Option<MonthKey> = None;

        for (stock, month, ret) in cells {
            if ret <= -1.0 {
                return Err(Error::InvalidReturn { stock, month, value: ret });
            }
            if by_stock.entry(stock.clone()).or_default().insert(month, ret).is_some() {
                return Err(Error::DuplicateCell { stock, month });
            }
            first = Some(first.map_or(month, |f| f.min(month)));
            last = Some(last.map_or(month, |l| l.max(month)));
        }

        let (first, last) = match (first, last) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::InvalidInput("no cells provided".into())),
        };
        Self::assemble(by_stock, first, last, config)
    }

    fn assemble(
        by_stock: BTreeMap<String, BTreeMap<MonthKey, f64>>,
        first: MonthKey,
        last: MonthKey,
        config: &IngestConfig,
    ) -> Result<PanelLoad> {
        let months: Vec<MonthKey> = first.range_to(last).collect();
        let n_months = months.len();

        let mut stocks = Vec::new();
        let mut dropped = Vec::new();
        let mut cells = Vec::new();
        for (stock, series) in by_stock {
            if series.len() < config.min_valid_months.max(1) {
                dropped.push(stock);
                continue;
            }
            let base = cells.len();
            cells.resize(base + n_months, f64::NAN);
            for (month, ret) in series {
                let idx = (month.index() - first.index()) as usize;
                cells[base + idx] = ret;
            }
            stocks.push(stock);
        }
        if stocks.is_empty() {
            return Err(Error::InvalidInput(
                "no stock has enough valid observations".into(),
            ));
        }
        Ok(PanelLoad { panel: MonthlyPanel { months, stocks, cells }, dropped })
    }

    pub fn months(&self) -> &[MonthKey] {
        &self.months
    }

    pub fn stocks(&self) -> &[String] {
        &self.stocks
    }

    pub fn n_months(&self) -> usize {
        self.months.len()
    }

    pub fn n_stocks(&self) -> usize {
        self.stocks.len()
    }

    pub fn first_month(&self) -> MonthKey {
        self.months[0]
    }

    pub fn last_month(&self) -> MonthKey {
        *self.months.last().expect("panel has at least one month")
    }

    /// Position of `month` on the axis, if inside the panel's span.
    pub fn month_index(&self, month: MonthKey) -> Option<usize> {
        let off = month.index() - self.first_month().index();
        if off >= 0 && (off as usize) < self.months.len() {
            Some(off as usize)
        } else {
            None
        }
    }

    pub fn stock_index(&self, stock: &str) -> Option<usize> {
        self.stocks.binary_search_by(|s| s.as_str().cmp(stock)).ok()
    }

    /// Return for `(stock, month)` by axis position; `None` when missing.
    pub fn ret(&self, stock_idx: usize, month_idx: usize) -> Option<f64> {
        let v = self.cells[stock_idx * self.months.len() + month_idx];
        if v.is_nan() {
            None
        } else {
            Some(v)
        }
    }

    /// One stock's full return row; NaN encodes a missing cell.
    pub(crate) fn row(&self, stock_idx: usize) -> &[f64] {
        let n = self.months.len();
        &self.cells[stock_idx * n..(stock_idx + 1) * n]
    }

    /// Copy of the panel restricted to months `[first, last]` (inclusive).
    pub fn restrict(&self, first: MonthKey, last: MonthKey) -> MonthlyPanel {
        let lo = self
            .month_index(first)
            .expect("restrict: first month outside panel");
        let hi = self
            .month_index(last)
            .expect("restrict: last month outside panel");
        assert!(lo <= hi, "restrict: empty month range");
        let n = self.months.len();
        let mut cells = Vec::with_capacity(self.stocks.len() * (hi - lo + 1));
        for s in 0..self.stocks.len() {
            cells.extend_from_slice(&self.cells[s * n + lo..s * n + hi + 1]);
        }
        MonthlyPanel {
            months: self.months[lo..=hi].to_vec(),
            stocks: self.stocks.clone(),
            cells,
        }
    }
}

/// A loaded panel plus the stocks dropped during validation.
#[derive(Debug, Clone)]
pub struct PanelLoad {
    pub panel: MonthlyPanel,
    pub dropped: Vec<String>,
}

/// One day of one stock: simple return and currency trading volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyBar {
    pub date: NaiveDate,
    pub ret: f64,
    pub volume: f64,
}

/// Per-stock daily bars, dates strictly increasing within each stock.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyBarSet {
    stocks: Vec<String>,
    bars: Vec<Vec<DailyBar>>,
}

impl DailyBarSet {
    /// Build from parallel vectors; stocks must be unique and sorted, dates
    /// strictly increasing within each stock, volumes non-negative.
    pub fn from_parts(stocks: Vec<String>, bars: Vec<Vec<DailyBar>>) -> Result<Self> {
        if stocks.len() != bars.len() {
            return Err(Error::InvalidInput("stocks/bars length mismatch".into()));
        }
        if !stocks.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("stocks must be sorted and unique".into()));
        }
        for (stock, series) in stocks.iter().zip(&bars) {
            for pair in series.windows(2) {
                if pair[1].date <= pair[0].date {
                    return Err(Error::OutOfOrderDates { stock: stock.clone(), date: pair[1].date });
                }
            }
            if let Some(bad) = series.iter().find(|b| b.volume < 0.0) {
                return Err(Error::NegativeVolume {
                    stock: stock.clone(),
                    date: bad.date,
                    volume: bad.volume,
                });
            }
        }
        Ok(Self { stocks, bars })
    }

    pub fn stocks(&self) -> &[String] {
        &self.stocks
    }

    pub fn n_stocks(&self) -> usize {
        self.stocks.len()
    }

    pub fn bars(&self, stock_idx: usize) -> &[DailyBar] {
        &self.bars[stock_idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[DailyBar])> {
        self.stocks
            .iter()
            .map(|s| s.as_str())
            .zip(self.bars.iter().map(|b| b.as_slice()))
    }
}

/// Monthly factor returns plus optional market-index and macro-index series.
///
/// The month axis is contiguous; every present column covers the whole axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSeries {
    months: Vec<MonthKey>,
    mkt: Vec<f64>,
    smb: Vec<f64>,
    hml: Vec<f64>,
    index_logret: Option<Vec<f64>>,
    macro_index: Option<Vec<f64>>,
}

impl FactorSeries {
    /// Build from parallel vectors. Months must be contiguous and increasing.
    pub fn new(
        months: Vec<MonthKey>,
        mkt: Vec<f64>,
        smb: Vec<f64>,
        hml: Vec<f64>,
        index_logret: Option<Vec<f64>>,
        macro_index: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = months.len();
        if n == 0 {
            return Err(Error::InvalidInput("factor series is empty".into()));
        }
        if !months.windows(2).all(|w| w[1].months_since(w[0]) == 1) {
            return Err(Error::InvalidInput(
                "factor months must be contiguous and increasing".into(),
            ));
        }
        for (name, len) in [
            ("mkt", mkt.len()),
            ("smb", smb.len()),
            ("hml", hml.len()),
            ("index_logret", index_logret.as_ref().map_or(n, Vec::len)),
            ("macro_index", macro_index.as_ref().map_or(n, Vec::len)),
        ] {
            if len != n {
                return Err(Error::InvalidInput(format!(
                    "factor column {name} has {len} rows, month axis has {n}"
                )));
            }
        }
        Ok(Self { months, mkt, smb, hml, index_logret, macro_index })
    }

    pub fn months(&self) -> &[MonthKey] {
        &self.months
    }

    pub fn len(&self) -> usize {
        self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.months.is_empty()
    }

    pub fn first_month(&self) -> MonthKey {
        self.months[0]
    }

    pub fn last_month(&self) -> MonthKey {
        *self.months.last().expect("factor series is non-empty")
    }

    pub fn month_index(&self, month: MonthKey) -> Option<usize> {
        let off = month.index() - self.first_month().index();
        if off >= 0 && (off as usize) < self.months.len() {
            Some(off as usize)
        } else {
            None
        }
    }

    pub fn mkt(&self) -> &[f64] {
        &self.mkt
    }

    pub fn smb(&self) -> &[f64] {
        &self.smb
    }

    pub fn hml(&self) -> &[f64] {
        &self.hml
    }

    pub fn index_logret(&self) -> Option<&[f64]> {
        self.index_logret.as_deref()
    }

    pub fn macro_index(&self) -> Option<&[f64]> {
        self.macro_index.as_deref()
    }

    /// The index log-return column as a month series, when present.
    pub fn index_series(&self) -> Option<crate::calendar::MonthSeries> {
        self.index_logret
            .as_ref()
            .map(|v| crate::calendar::MonthSeries::new(self.months.clone(), v.clone()))
    }

    /// The macro index level column as a month series, when present.
    pub fn macro_series(&self) -> Option<crate::calendar::MonthSeries> {
        self.macro_index
            .as_ref()
            .map(|v| crate::calendar::MonthSeries::new(self.months.clone(), v.clone()))
    }

    /// Copy restricted to months `[first, last]` (inclusive).
    pub fn restrict(&self, first: MonthKey, last: MonthKey) -> FactorSeries {
        let lo = self
            .month_index(first)
            .expect("restrict: first month outside factor axis");
        let hi = self
            .month_index(last)
            .expect("restrict: last month outside factor axis");
        assert!(lo <= hi, "restrict: empty month range");
        FactorSeries {
            months: self.months[lo..=hi].to_vec(),
            mkt: self.mkt[lo..=hi].to_vec(),
            smb: self.smb[lo..=hi].to_vec(),
            hml: self.hml[lo..=hi].to_vec(),
            index_logret: self.index_logret.as_ref().map(|v| v[lo..=hi].to_vec()),
            macro_index: self.macro_index.as_ref().map(|v| v[lo..=hi].to_vec()),
        }
    }
}

/// A panel and factor series restricted to their common month range.
#[derive(Debug, Clone)]
pub struct AlignedSample {
    pub panel: MonthlyPanel,
    pub factors: FactorSeries,
}

/// Restrict both inputs to the intersection of their month axes.
///
/// The originals are untouched; the intersection of two contiguous axes is
/// again contiguous, so both outputs keep their invariants.
pub fn align_months(panel: &MonthlyPanel, factors: &FactorSeries) -> Result<AlignedSample> {
    let first = panel.first_month().max(factors.first_month());
    let last = panel.last_month().min(factors.last_month());
    if first > last {
        return Err(Error::EmptyIntersection);
    }
    Ok(AlignedSample {
        panel: panel.restrict(first, last),
        factors: factors.restrict(first, last),
    })
}

// ---------------------------------------------------------------------------
// CSV readers
// ---------------------------------------------------------------------------

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got: Vec<&str> = got.iter().collect();
    if got.len() < want.len() || got[..want.len()] != *want {
        return Err(Error::malformed(
            path,
            1,
            format!("header must start with {}, got {}", want.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, csv::Position::line)
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    rec: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T> {
    let raw = rec
        .get(idx)
        .ok_or_else(|| Error::malformed(path, record_line(rec), format!("missing field {name}")))?;
    raw.parse().map_err(|_| {
        Error::malformed(path, record_line(rec), format!("cannot parse {name} from {raw:?}"))
    })
}

fn parse_month(path: &Path, rec: &csv::StringRecord, year_idx: usize) -> Result<MonthKey> {
    let year: i32 = parse_field(path, rec, year_idx, "year")?;
    let month: i64 = parse_field(path, rec, year_idx + 1, "month")?;
    MonthKey::try_new(year, month).ok_or_else(|| {
        Error::malformed(path, record_line(rec), format!("month {month} out of range 1..=12"))
    })
}

/// Load a monthly return panel from `stock,year,month,return` CSV.
///
/// A missing cell is an absent row. Errors report the offending line; stocks
/// with too few valid observations are dropped and listed in the result.
pub fn load_monthly_panel(path: impl AsRef<Path>, config: &IngestConfig) -> Result<PanelLoad> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(path, reader.headers().map_err(|e| csv_error(path, e))?, &[
        "stock", "year", "month", "return",
    ])?;

    let mut by_stock: BTreeMap<String, BTreeMap<MonthKey, f64>> = BTreeMap::new();
    let mut first: Option<MonthKey> = None;
    let mut last: Option<MonthKey> = None;
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let stock = rec
            .get(0)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::malformed(path, record_line(&rec), "empty stock id"))?
            .to_string();
        let month = parse_month(path, &rec, 1)?;
        let ret: f64 = parse_field(path, &rec, 3, "return")?;
        if !ret.is_finite() {
            return Err(Error::malformed(path, record_line(&rec), "return is not finite"));
        }
        if ret <= -1.0 {
            return Err(Error::InvalidReturn { stock, month, value: ret });
        }
        if by_stock.entry(stock.clone()).or_default().insert(month, ret).is_some() {
            return Err(Error::DuplicateCell { stock, month });
        }
        first = Some(first.map_or(month, |f| f.min(month)));
        last = Some(last.map_or(month, |l| l.max(month)));
    }
    let (first, last) = match (first, last) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::EmptyInput { path: path.to_path_buf() }),
    };
    MonthlyPanel::assemble(by_stock, first, last, config)
}

/// Load daily bars from `stock,date,return,volume` CSV (date `YYYY-MM-DD`).
///
/// Dates must be strictly increasing within each stock; volume must be >= 0.
pub fn load_daily_bars(path: impl AsRef<Path>) -> Result<DailyBarSet> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(path, reader.headers().map_err(|e| csv_error(path, e))?, &[
        "stock", "date", "return", "volume",
    ])?;

    let mut by_stock: BTreeMap<String, Vec<DailyBar>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let stock = rec
            .get(0)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::malformed(path, record_line(&rec), "empty stock id"))?
            .to_string();
        let raw_date = rec
            .get(1)
            .ok_or_else(|| Error::malformed(path, record_line(&rec), "missing date"))?;
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| {
            Error::malformed(path, record_line(&rec), format!("bad date {raw_date:?}"))
        })?;
        let ret: f64 = parse_field(path, &rec, 2, "return")?;
        let volume: f64 = parse_field(path, &rec, 3, "volume")?;
        if !ret.is_finite() || !volume.is_finite() {
            return Err(Error::malformed(path, record_line(&rec), "non-finite value"));
        }
        if volume < 0.0 {
            return Err(Error::NegativeVolume { stock, date, volume });
        }
        let bars = by_stock.entry(stock.clone()).or_default();
        if let Some(prev) = bars.last() {
            if date <= prev.date {
                return Err(Error::OutOfOrderDates { stock, date });
            }
        }
        bars.push(DailyBar { date, ret, volume });
    }
    if by_stock.is_empty() {
        return Err(Error::EmptyInput { path: path.to_path_buf() });
    }
    let (stocks, bars) = by_stock.into_iter().unzip();
    Ok(DailyBarSet { stocks, bars })
}

/// Load factors from `year,month,mkt,smb,hml[,index_logret][,macro_index]` CSV.
pub fn load_factors(path: impl AsRef<Path>) -> Result<FactorSeries> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    check_header(path, &headers, &["year", "month", "mkt", "smb", "hml"])?;
    let names: Vec<&str> = headers.iter().collect();
    let index_col = names.iter().position(|&n| n == "index_logret");
    let macro_col = names.iter().position(|&n| n == "macro_index");
    for (i, name) in names.iter().enumerate().skip(5) {
        if Some(i) != index_col && Some(i) != macro_col {
            return Err(Error::malformed(path, 1, format!("unknown factor column {name:?}")));
        }
    }

    let mut months = Vec::new();
    let (mut mkt, mut smb, mut hml) = (Vec::new(), Vec::new(), Vec::new());
    let mut index_logret = index_col.map(|_| Vec::new());
    let mut macro_index = macro_col.map(|_| Vec::new());
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let month = parse_month(path, &rec, 0)?;
        if let Some(prev) = months.last() {
            if month.months_since(*prev) != 1 {
                return Err(Error::malformed(
                    path,
                    record_line(&rec),
                    format!("factor months must be contiguous; {month} follows {prev}"),
                ));
            }
        }
        months.push(month);
        mkt.push(parse_field(path, &rec, 2, "mkt")?);
        smb.push(parse_field(path, &rec, 3, "smb")?);
        hml.push(parse_field(path, &rec, 4, "hml")?);
        if let (Some(col), Some(vals)) = (index_col, index_logret.as_mut()) {
            vals.push(parse_field(path, &rec, col, "index_logret")?);
        }
        if let (Some(col), Some(vals)) = (macro_col, macro_index.as_mut()) {
            vals.push(parse_field(path, &rec, col, "macro_index")?);
        }
    }
    if months.is_empty() {
        return Err(Error::EmptyInput { path: path.to_path_buf() });
    }
    FactorSeries::new(months, mkt, smb, hml, index_logret, macro_index)
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, csv::Position::line);
    Error::malformed(path, line, err.to_string())
}

// ---------------------------------------------------------------------------
// CSV writers (same schemas; used by fixture generation)
// ---------------------------------------------------------------------------

/// Write a panel in the `stock,year,month,return` schema (missing cells omitted).
pub fn write_monthly_panel<W: Write>(panel: &MonthlyPanel, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["stock", "year", "month", "return"]).map_err(write_error)?;
    for (s, stock) in panel.stocks().iter().enumerate() {
        for (m, month) in panel.months().iter().enumerate() {
            if let Some(ret) = panel.ret(s, m) {
                out.write_record([
                    stock.as_str(),
                    &month.year().to_string(),
                    &month.month().to_string(),
                    &format!("{ret}"),
                ])
                .map_err(write_error)?;
            }
        }
    }
    out.flush().map_err(|e| Error::io("<writer>", e))
}

/// Write daily bars in the `stock,date,return,volume` schema.
pub fn write_daily_bars<W: Write>(bars: &DailyBarSet, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["stock", "date", "return", "volume"]).map_err(write_error)?;
    for (stock, series) in bars.iter() {
        for bar in series {
            out.write_record([
                stock,
                &bar.date.format("%Y-%m-%d").to_string(),
                &format!("{}", bar.ret),
                &format!("{}", bar.volume),
            ])
            .map_err(write_error)?;
        }
    }
    out.flush().map_err(|e| Error::io("<writer>", e))
}

/// Write factors in the `year,month,mkt,smb,hml[,index_logret][,macro_index]` schema.
pub fn write_factors<W: Write>(factors: &FactorSeries, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["year", "month", "mkt", "smb", "hml"];
    if factors.index_logret().is_some() {
        header.push("index_logret");
    }
    if factors.macro_index().is_some() {
        header.push("macro_index");
    }
    out.write_record(&header).map_err(write_error)?;
    for (i, month) in factors.months().iter().enumerate() {
        let mut rec = vec![
            month.year().to_string(),
            month.month().to_string(),
            format!("{}", factors.mkt()[i]),
            format!("{}", factors.smb()[i]),
            format!("{}", factors.hml()[i]),
        ];
        if let Some(v) = factors.index_logret() {
            rec.push(format!("{}", v[i]));
        }
        if let Some(v) = factors.macro_index() {
            rec.push(format!("{}", v[i]));
        }
        out.write_record(&rec).map_err(write_error)?;
    }
    out.flush().map_err(|e| Error::io("<writer>", e))
}

fn write_error(err: csv::Error) -> Error {
    Error::InvalidInput(format!("csv write failed: {err}"))
}

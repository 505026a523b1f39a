//! Moving-window significance scan over a (J, K) strategy grid.
//!
//! For every grid cell the full-sample strategy series is computed once; each
//! rolling window then selects the observations whose formation month falls
//! inside it (holding months may extend past the window end) and classifies
//! the cell by the sign and HAC significance of the window mean:
//! SP / SN when |t| clears the critical value, NSP / NSN otherwise, NA when
//! fewer than two usable observations land in the window.

use crate::calendar::MonthKey;
use crate::econometrics::nw_mean_test;
use crate::error::{Error, Result};
use crate::panel::MonthlyPanel;
use crate::portfolio::{strategy_series, Side, StrategySpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// The J and K values of the default 11 x 11 grid.
pub const JK_VALUES: [u32; 11] = [1, 6, 12, 18, 24, 30, 36, 42, 48, 54, 60];

/// The default grid: the full cross of [`JK_VALUES`], J-major.
pub fn default_grid() -> Vec<(u32, u32)> {
    JK_VALUES
        .iter()
        .flat_map(|&j| JK_VALUES.iter().map(move |&k| (j, k)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Window length M in months.
    pub window_months: usize,
    /// Step a between consecutive window starts, in months.
    pub step_months: usize,
    /// (J, K) cells, in output row order.
    pub grid: Vec<(u32, u32)>,
    /// Two-sided significance level for the SP/SN boundary.
    pub significance_level: f64,
    pub side: Side,
    pub skip_months: u32,
    pub decile_count: u32,
    /// HAC lag override; `None` applies the automatic rule per window.
    pub hac_lag: Option<usize>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            window_months: 60,
            step_months: 12,
            grid: default_grid(),
            significance_level: 0.05,
            side: Side::Contrarian,
            skip_months: 1,
            decile_count: 10,
            hac_lag: None,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_months < 24 {
            return Err(Error::InvalidInput("window must be >= 24 months".into()));
        }
        if self.step_months < 1 {
            return Err(Error::InvalidInput("step must be >= 1 month".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidInput("scan grid is empty".into()));
        }
        if self.grid.iter().any(|&(j, k)| j < 1 || k < 1) {
            return Err(Error::InvalidInput("grid J and K values must be >= 1".into()));
        }
        if !(self.significance_level > 0.0 && self.significance_level < 1.0) {
            return Err(Error::InvalidInput("significance level must be in (0,1)".into()));
        }
        Ok(())
    }

    /// Two-sided normal critical value for the configured level.
    pub fn critical_value(&self) -> f64 {
        // The canonical levels use the same rounded constants as the
        // significance stars, so cell classes and stars never disagree.
        if (self.significance_level - 0.05).abs() < 1e-12 {
            crate::econometrics::CRIT_5PCT
        } else if (self.significance_level - 0.01).abs() < 1e-12 {
            crate::econometrics::CRIT_1PCT
        } else {
            crate::synth::inverse_normal_cdf(1.0 - self.significance_level / 2.0)
        }
    }

    fn spec_for(&self, j: u32, k: u32) -> StrategySpec {
        StrategySpec {
            estimation_months: j,
            holding_months: k,
            skip_months: self.skip_months,
            side: self.side,
            decile_count: self.decile_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Sp,
    Sn,
    Nsp,
    Nsn,
    Na,
}

impl CellClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellClass::Sp => "SP",
            CellClass::Sn => "SN",
            CellClass::Nsp => "NSP",
            CellClass::Nsn => "NSN",
            CellClass::Na => "NA",
        }
    }

    pub fn parse(s: &str) -> Option<CellClass> {
        match s {
            "SP" => Some(CellClass::Sp),
            "SN" => Some(CellClass::Sn),
            "NSP" => Some(CellClass::Nsp),
            "NSN" => Some(CellClass::Nsn),
            "NA" => Some(CellClass::Na),
            _ => None,
        }
    }

    pub fn is_significant(&self) -> bool {
        matches!(self, CellClass::Sp | CellClass::Sn)
    }
}

impl std::fmt::Display for CellClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One (cell, window) entry: the window mean and HAC t behind the class.
#[derive(Debug, Clone, Copy)]
pub struct ScanCell {
    pub mean: f64,
    pub t: f64,
    pub n_obs: usize,
    pub class: CellClass,
}

impl PartialEq for ScanCell {
    fn eq(&self, other: &Self) -> bool {
        // Bit equality so NA cells (NaN mean/t) compare equal.
        self.mean.to_bits() == other.mean.to_bits()
            && self.t.to_bits() == other.t.to_bits()
            && self.n_obs == other.n_obs
            && self.class == other.class
    }
}

const NA_CELL: ScanCell = ScanCell { mean: f64::NAN, t: f64::NAN, n_obs: 0, class: CellClass::Na };

/// The (J, K) x window classification matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    grid: Vec<(u32, u32)>,
    windows: Vec<(MonthKey, MonthKey)>,
    cells: Vec<ScanCell>,
}

impl ScanGrid {
    pub fn grid(&self) -> &[(u32, u32)] {
        &self.grid
    }

    /// Inclusive (start, end) months, starts `step` apart, ascending.
    pub fn windows(&self) -> &[(MonthKey, MonthKey)] {
        &self.windows
    }

    pub fn cell(&self, row: usize, window: usize) -> &ScanCell {
        &self.cells[row * self.windows.len() + window]
    }

    pub fn row(&self, row: usize) -> &[ScanCell] {
        &self.cells[row * self.windows.len()..(row + 1) * self.windows.len()]
    }

    pub fn n_rows(&self) -> usize {
        self.grid.len()
    }

    pub fn n_windows(&self) -> usize {
        self.windows.len()
    }

    pub fn defined_cells(&self) -> impl Iterator<Item = &ScanCell> {
        self.cells.iter().filter(|c| c.class != CellClass::Na)
    }
}

fn make_windows(panel: &MonthlyPanel, config: &ScanConfig) -> Vec<(MonthKey, MonthKey)> {
    let mut out = Vec::new();
    let mut start = panel.first_month();
    let last = panel.last_month();
    loop {
        let end = start.add(config.window_months as i64 - 1);
        if end > last {
            break;
        }
        out.push((start, end));
        start = start.add(config.step_months as i64);
    }
    out
}

fn classify(values: &[f64], crit: f64, lag: Option<usize>) -> ScanCell {
    if values.len() < 2 {
        return NA_CELL;
    }
    let Ok(test) = nw_mean_test(values, lag) else {
        // Constant subsequence: no usable variance, no classification.
        return NA_CELL;
    };
    let significant = test.hac_t.abs() >= crit;
    let class = match (test.mean >= 0.0, significant) {
        (true, true) => CellClass::Sp,
        (false, true) => CellClass::Sn,
        (true, false) => CellClass::Nsp,
        (false, false) => CellClass::Nsn,
    };
    ScanCell { mean: test.mean, t: test.hac_t, n_obs: test.n_obs, class }
}

/// Run the scan. Cells are evaluated in parallel; the result is identical at
/// any thread count because each cell is computed independently and collected
/// in grid order.
pub fn run_scan(panel: &MonthlyPanel, config: &ScanConfig) -> Result<ScanGrid> {
    config.validate()?;
    let windows = make_windows(panel, config);
    let crit = config.critical_value();

    let rows: Vec<Vec<ScanCell>> = config
        .grid
        .par_iter()
        .map(|&(j, k)| {
            let spec = config.spec_for(j, k);
            let series = strategy_series(panel, &spec)?;
            let obs = series.observations();
            let row = windows
                .iter()
                .map(|&(start, end)| {
                    let lo = obs.partition_point(|&(m, _)| m < start);
                    let hi = obs.partition_point(|&(m, _)| m <= end);
                    let values: Vec<f64> = obs[lo..hi].iter().map(|&(_, v)| v).collect();
                    classify(&values, crit, config.hac_lag)
                })
                .collect();
            Ok(row)
        })
        .collect::<Result<_>>()?;

    Ok(ScanGrid {
        grid: config.grid.clone(),
        windows,
        cells: rows.into_iter().flatten().collect(),
    })
}

/// Write the class grid: `j,k` then one column per window labeled by the
/// window's end year. An empty grid (no windows) writes the header only.
pub fn emit_grid<W: Write>(grid: &ScanGrid, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["j".to_string(), "k".to_string()];
    header.extend(grid.windows().iter().map(|(_, end)| end.year().to_string()));
    out.write_record(&header).map_err(csv_write_error)?;
    if grid.n_windows() > 0 {
        for (row, &(j, k)) in grid.grid().iter().enumerate() {
            let mut rec = vec![j.to_string(), k.to_string()];
            rec.extend(grid.row(row).iter().map(|c| c.class.as_str().to_string()));
            out.write_record(&rec).map_err(csv_write_error)?;
        }
    }
    out.flush().map_err(|e| Error::io("<writer>", e))
}

/// Write the companion long-form table with the mean and t behind each cell.
pub fn emit_values<W: Write>(grid: &ScanGrid, w: W, raw: bool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "j",
        "k",
        "start_year",
        "start_month",
        "end_year",
        "end_month",
        "n",
        "mean",
        "t",
        "class",
    ])
    .map_err(csv_write_error)?;
    for (row, &(j, k)) in grid.grid().iter().enumerate() {
        for (col, &(start, end)) in grid.windows().iter().enumerate() {
            let cell = grid.cell(row, col);
            out.write_record([
                j.to_string(),
                k.to_string(),
                start.year().to_string(),
                start.month().to_string(),
                end.year().to_string(),
                end.month().to_string(),
                cell.n_obs.to_string(),
                crate::report::fmt_float(cell.mean, raw),
                crate::report::fmt_float(cell.t, raw),
                cell.class.as_str().to_string(),
            ])
            .map_err(csv_write_error)?;
        }
    }
    out.flush().map_err(|e| Error::io("<writer>", e))
}

fn csv_write_error(err: csv::Error) -> Error {
    Error::InvalidInput(format!("csv write failed: {err}"))
}

//! Run configuration: a TOML file plus flag overrides, flags winning.
//!
//! The effective (merged) configuration is serialized into the output
//! directory as `config.toml` and hashed into every output file's header
//! line, so a run is reproducible from its own outputs.

use anomalyscan_core::scan::JK_VALUES;
use anomalyscan_core::{Side, StrategySpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Inputs,
    pub strategy: StrategyCfg,
    pub scan: ScanCfg,
    pub hac: HacCfg,
    pub regimes: RegimeCfg,
    pub output: OutputCfg,
    pub synth: SynthCfg,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub panel: Option<PathBuf>,
    pub factors: Option<PathBuf>,
    pub bars: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyCfg {
    /// Estimation periods; the full 11-value ladder when unset.
    pub j: Option<Vec<u32>>,
    /// Holding periods; `[1]` for table commands, the full ladder for `scan`.
    pub k: Option<Vec<u32>>,
    pub skip: u32,
    pub side: String,
    pub decile_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanCfg {
    pub window: usize,
    pub step: usize,
    pub significance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HacCfg {
    /// Fixed Newey-West lag; absent applies the automatic rule.
    pub lag: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeCfg {
    pub state_lookback: usize,
    pub min_days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputCfg {
    pub dir: PathBuf,
    pub raw: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthCfg {
    pub seed: u64,
    pub n_stocks: usize,
    pub n_months: usize,
    pub noise_scale: f64,
    pub reversion_lags: usize,
    pub factor_vol: f64,
    pub loading_mean: f64,
    pub loading_sd: f64,
    pub days_per_month: u32,
    pub regimes: Vec<SynthRegime>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthRegime {
    pub start: usize,
    pub end: usize,
    pub rho: f64,
}

impl Default for ScanCfg {
    fn default() -> Self {
        Self { window: 60, step: 12, significance: 0.05 }
    }
}

impl Default for StrategyCfg {
    fn default() -> Self {
        Self { j: None, k: None, skip: 1, side: "CSCON".into(), decile_count: 10 }
    }
}

impl Default for RegimeCfg {
    fn default() -> Self {
        Self { state_lookback: 36, min_days: 10 }
    }
}

impl Default for OutputCfg {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), raw: false }
    }
}

impl Default for SynthCfg {
    fn default() -> Self {
        Self {
            seed: 1,
            n_stocks: 30,
            n_months: 120,
            noise_scale: 0.05,
            reversion_lags: 1,
            factor_vol: 0.02,
            loading_mean: 0.0,
            loading_sd: 0.0,
            days_per_month: 21,
            regimes: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn side(&self) -> Result<Side, String> {
        Side::parse(&self.strategy.side)
            .ok_or_else(|| format!("unknown side {:?} (use CSCON or CSMOM)", self.strategy.side))
    }

    /// (J, K) cells for the table commands: J ladder crossed with K = [1].
    pub fn table_grid(&self) -> Vec<(u32, u32)> {
        let j = self.strategy.j.clone().unwrap_or_else(|| JK_VALUES.to_vec());
        let k = self.strategy.k.clone().unwrap_or_else(|| vec![1]);
        j.iter().flat_map(|&j| k.iter().map(move |&k| (j, k))).collect()
    }

    /// (J, K) cells for `scan`: full ladder on both axes unless overridden.
    pub fn scan_grid(&self) -> Vec<(u32, u32)> {
        let j = self.strategy.j.clone().unwrap_or_else(|| JK_VALUES.to_vec());
        let k = self.strategy.k.clone().unwrap_or_else(|| JK_VALUES.to_vec());
        j.iter().flat_map(|&j| k.iter().map(move |&k| (j, k))).collect()
    }

    pub fn spec_for(&self, j: u32, k: u32) -> Result<StrategySpec, String> {
        Ok(StrategySpec {
            estimation_months: j,
            holding_months: k,
            skip_months: self.strategy.skip,
            side: self.side()?,
            decile_count: self.strategy.decile_count,
        })
    }

    /// Canonical serialized form, written to `config.toml` and hashed.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex chars of the SHA-256 of the canonical form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

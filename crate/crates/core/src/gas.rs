//! Storage gas estimate (`base + per_byte × n`) and fiat cost comparison
//! between networks.
//!
//! Pricing is a snapshot, shipped as `config/pricing.json` and embedded
//! as [`PricingConfig::builtin`]. USD values are kept unrounded; only the
//! CSV rendering rounds them (4 decimal places).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BASE_GAS: u64 = 20_000;
pub const DEFAULT_PER_BYTE_GAS: u64 = 16;
/// Sizes used for the standard comparison report.
pub const REPORT_SIZES: [u64; 4] = [500, 1000, 2000, 5000];
pub const CSV_HEADER: &str = "size_bytes,network,gas_units,native_cost,usd_cost";

const BUILTIN_PRICING: &str = include_str!("../config/pricing.json");
const GWEI: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GasError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cannot read pricing config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse pricing config: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSchedule {
    pub base: u64,
    pub per_byte: u64,
}

impl Default for GasSchedule {
    fn default() -> Self {
        GasSchedule {
            base: DEFAULT_BASE_GAS,
            per_byte: DEFAULT_PER_BYTE_GAS,
        }
    }
}

impl GasSchedule {
    /// Exact integer estimate; saturates instead of wrapping.
    pub fn estimate_gas(&self, n_bytes: u64) -> u64 {
        self.base.saturating_add(self.per_byte.saturating_mul(n_bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkPricing {
    pub name: String,
    pub gas_price_gwei: f64,
    pub token_usd: f64,
}

impl NetworkPricing {
    pub fn new(name: impl Into<String>, gas_price_gwei: f64, token_usd: f64) -> Self {
        NetworkPricing {
            name: name.into(),
            gas_price_gwei,
            token_usd,
        }
    }

    fn validate(&self) -> Result<(), GasError> {
        if self.name.is_empty() {
            return Err(GasError::InvalidInput("network name must not be empty".into()));
        }
        for (field, v) in [("gas_price_gwei", self.gas_price_gwei), ("token_usd", self.token_usd)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(GasError::InvalidInput(format!(
                    "{}: {field} must be a positive number, got {v}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasQuote {
    pub network: String,
    pub n_bytes: u64,
    pub gas_units: u64,
    pub native_cost: f64,
    pub usd_cost: f64,
}

pub fn quote_usd(schedule: &GasSchedule, pricing: &NetworkPricing, n_bytes: u64) -> GasQuote {
    let gas_units = schedule.estimate_gas(n_bytes);
    let native_cost = gas_units as f64 * pricing.gas_price_gwei * GWEI;
    GasQuote {
        network: pricing.name.clone(),
        n_bytes,
        gas_units,
        native_cost,
        usd_cost: native_cost * pricing.token_usd,
    }
}

/// Total USD for `record_count` records of `n_bytes` each.
pub fn batch_projection(schedule: &GasSchedule, pricing: &NetworkPricing, record_count: u64, n_bytes: u64) -> f64 {
    record_count as f64 * quote_usd(schedule, pricing, n_bytes).usd_cost
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub size_bytes: u64,
    pub network: String,
    pub gas_units: u64,
    pub native_cost: f64,
    pub usd_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSavings {
    pub size_bytes: u64,
    pub cheapest: String,
    pub most_expensive: String,
    pub savings_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schedule: GasSchedule,
    pub rows: Vec<ReportRow>,
    pub savings: Vec<SizeSavings>,
}

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.10},{:.4}",
                row.size_bytes, row.network, row.gas_units, row.native_cost, row.usd_cost
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn savings_for(&self, size_bytes: u64) -> Option<&SizeSavings> {
        self.savings.iter().find(|s| s.size_bytes == size_bytes)
    }

    pub fn row(&self, size_bytes: u64, network: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.size_bytes == size_bytes && r.network == network)
    }
}

/// Quotes every size on every network and computes, per size, the saving
/// of the cheapest network relative to the most expensive one.
pub fn compare(schedule: &GasSchedule, networks: &[NetworkPricing], sizes: &[u64]) -> Result<ComparisonReport, GasError> {
    if networks.len() < 2 {
        return Err(GasError::InvalidInput("at least two networks are required".into()));
    }
    if sizes.is_empty() {
        return Err(GasError::InvalidInput("at least one size is required".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len() * networks.len());
    let mut savings = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let quotes: Vec<GasQuote> = networks.iter().map(|n| quote_usd(schedule, n, size)).collect();
        let cheapest = quotes
            .iter()
            .min_by(|a, b| a.usd_cost.total_cmp(&b.usd_cost))
            .expect("non-empty");
        let priciest = quotes
            .iter()
            .max_by(|a, b| a.usd_cost.total_cmp(&b.usd_cost))
            .expect("non-empty");
        let savings_percent = if priciest.usd_cost > 0.0 {
            100.0 * (1.0 - cheapest.usd_cost / priciest.usd_cost)
        } else {
            0.0
        };
        savings.push(SizeSavings {
            size_bytes: size,
            cheapest: cheapest.network.clone(),
            most_expensive: priciest.network.clone(),
            savings_percent,
        });
        rows.extend(quotes.into_iter().map(|q| ReportRow {
            size_bytes: size,
            network: q.network,
            gas_units: q.gas_units,
            native_cost: q.native_cost,
            usd_cost: q.usd_cost,
        }));
    }
    Ok(ComparisonReport {
        schedule: *schedule,
        rows,
        savings,
    })
}

/// The pricing config file: `{"networks": [...], "schedule": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingConfig {
    /// Date of the price snapshot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub as_of: Option<String>,
    #[serde(default)]
    pub schedule: GasSchedule,
    pub networks: Vec<NetworkPricing>,
}

impl PricingConfig {
    pub fn from_json(text: &str) -> Result<Self, GasError> {
        let config: PricingConfig = serde_json::from_str(text)?;
        for n in &config.networks {
            n.validate()?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, GasError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The shipped 2024-08-19 snapshot.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_PRICING).expect("builtin pricing is valid")
    }

    pub fn network(&self, name: &str) -> Option<&NetworkPricing> {
        self.networks.iter().find(|n| n.name.eq_ignore_ascii_case(name))
    }

    pub fn compare(&self, sizes: &[u64]) -> Result<ComparisonReport, GasError> {
        compare(&self.schedule, &self.networks, sizes)
    }
}

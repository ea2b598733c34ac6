//! MCS quantization, OFDM overhead and summary statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsRow {
    pub index: u8,
    pub modulation: String,
    pub bits_per_symbol: u32,
    pub code_rate: f64,
    pub min_snr_db: f64,
}

impl McsRow {
    pub fn efficiency(&self) -> f64 {
        self.bits_per_symbol as f64 * self.code_rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsTable {
    pub rows: Vec<McsRow>,
}

impl Default for McsTable {
    /// The nine mandatory 802.11ac single-stream MCS entries.
    fn default() -> Self {
        let row = |index, modulation: &str, bits_per_symbol, code_rate, min_snr_db| McsRow {
            index,
            modulation: modulation.to_string(),
            bits_per_symbol,
            code_rate,
            min_snr_db,
        };
        McsTable {
            rows: vec![
                row(0, "BPSK", 1, 1.0 / 2.0, 2.0),
                row(1, "QPSK", 2, 1.0 / 2.0, 5.0),
                row(2, "QPSK", 2, 3.0 / 4.0, 8.0),
                row(3, "16-QAM", 4, 1.0 / 2.0, 12.0),
                row(4, "16-QAM", 4, 3.0 / 4.0, 15.0),
                row(5, "64-QAM", 6, 2.0 / 3.0, 18.0),
                row(6, "64-QAM", 6, 3.0 / 4.0, 21.0),
                row(7, "64-QAM", 6, 5.0 / 6.0, 24.0),
                row(8, "256-QAM", 8, 3.0 / 4.0, 27.0),
            ],
        }
    }
}

impl McsTable {
    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::InvalidParameter("MCS table is empty".into()));
        }
        for pair in self.rows.windows(2) {
            if !(pair[1].min_snr_db > pair[0].min_snr_db && pair[1].efficiency() > pair[0].efficiency()) {
                return Err(Error::InvalidParameter(format!(
                    "MCS rows {} and {} are not strictly increasing",
                    pair[0].index, pair[1].index
                )));
            }
        }
        Ok(())
    }

    /// Highest row whose threshold is met, if any.
    pub fn select(&self, sinr_db: f64) -> Option<&McsRow> {
        self.rows.iter().rev().find(|r| r.min_snr_db <= sinr_db)
    }

    /// Spectral efficiency in bit/s/Hz; 0 below the lowest threshold.
    pub fn quantize(&self, sinr_db: f64) -> f64 {
        self.select(sinr_db).map_or(0.0, McsRow::efficiency)
    }

    pub fn quantize_linear(&self, sinr: f64) -> f64 {
        if sinr <= 0.0 {
            return 0.0;
        }
        self.quantize(10.0 * sinr.log10())
    }
}

/// Quantizes with the default table.
pub fn mcs_quantize(sinr_db: f64) -> f64 {
    McsTable::default().quantize(sinr_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmProfile {
    pub width_mhz: u32,
    pub data_subcarriers: u32,
    pub total_subcarriers: u32,
    /// Guard interval as a fraction of the useful symbol time.
    pub gi_overhead_fraction: f64,
}

pub const OFDM_PROFILES: [OfdmProfile; 3] = [
    OfdmProfile { width_mhz: 20, data_subcarriers: 52, total_subcarriers: 64, gi_overhead_fraction: 0.25 },
    OfdmProfile { width_mhz: 40, data_subcarriers: 108, total_subcarriers: 128, gi_overhead_fraction: 0.25 },
    OfdmProfile { width_mhz: 80, data_subcarriers: 234, total_subcarriers: 256, gi_overhead_fraction: 0.25 },
];

impl OfdmProfile {
    /// Data-subcarrier share times the useful part of each 4 us symbol
    /// (3.2 us of data per 0.8 us GI).
    pub fn efficiency(&self) -> f64 {
        self.data_subcarriers as f64 / self.total_subcarriers as f64 / (1.0 + self.gi_overhead_fraction)
    }
}

pub fn ofdm_efficiency(width_mhz: u32) -> Result<f64> {
    OFDM_PROFILES
        .iter()
        .find(|p| p.width_mhz == width_mhz)
        .map(OfdmProfile::efficiency)
        .ok_or_else(|| Error::InvalidParameter(format!("no OFDM profile for a {width_mhz} MHz channel")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub p5: f64,
    pub outage_threshold: f64,
    /// Fraction of users strictly below `outage_threshold`.
    pub outage: f64,
}

/// Linear-interpolated quantile of sorted data, `q` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn summarize(values: &[f64], outage_threshold: f64) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("cannot summarize an empty sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(Summary {
        mean: sorted.iter().sum::<f64>() / n,
        median: quantile_sorted(&sorted, 0.5),
        p5: quantile_sorted(&sorted, 0.05),
        outage_threshold,
        outage: sorted.iter().filter(|&&v| v < outage_threshold).count() as f64 / n,
    })
}

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::csma::{Cca, ModeSelection, DEFAULT_RHO, DEFAULT_STATE_CAP};
use crate::error::{Error, Result};
use crate::metrics::McsTable;
use crate::oracle::DEFAULT_ENUMERATION_LIMIT;
use crate::phy::{QuantizationPoint, RateMode, Technology};
use crate::propagation::PathlossParams;
use crate::radio_plan::Channelization;
use crate::scenario::DEFAULT_WALL_ATTENUATION_DB;

/// One model run. Scalar fields come first so the TOML form keeps plain
/// keys ahead of tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_technology")]
    pub technology: Technology,
    #[serde(default = "default_channelization")]
    pub channelization: Channelization,
    #[serde(default = "default_cca")]
    pub cca: Cca,
    /// Overrides every AP's transmit power when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_db: Option<f64>,
    /// Overrides every AP's antenna count when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antennas: Option<usize>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub rate_mode: RateMode,
    #[serde(default)]
    pub quantization: QuantizationPoint,
    #[serde(default)]
    pub ctmc_mode: ModeSelection,
    #[serde(default = "default_state_cap")]
    pub state_cap: usize,
    #[serde(default = "default_clusters")]
    pub n_clusters: usize,
    /// Goodput factor for distributed MU-MIMO coordination overhead.
    #[serde(default = "default_discount")]
    pub overhead_discount: f64,
    #[serde(default = "default_outage")]
    pub outage_threshold_bps: f64,
    #[serde(default)]
    pub dump_intermediates: bool,
    pub scenario: ScenarioSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<SectorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pathloss: Option<PathlossParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcs_table: Option<McsTable>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn default_technology() -> Technology {
    Technology::SuBeamforming
}
fn default_channelization() -> Channelization {
    Channelization::Four20
}
fn default_cca() -> Cca {
    Cca::Db(10.0)
}
fn default_rho() -> f64 {
    DEFAULT_RHO
}
fn default_state_cap() -> usize {
    DEFAULT_STATE_CAP
}
fn default_clusters() -> usize {
    1
}
fn default_discount() -> f64 {
    1.0
}
fn default_outage() -> f64 {
    1e6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    ConferenceHall,
    OpenFloor,
    WalledOffice,
    Stadium,
}

impl std::str::FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "conference_hall" => Ok(Generator::ConferenceHall),
            "open_floor" => Ok(Generator::OpenFloor),
            "walled_office" => Ok(Generator::WalledOffice),
            "stadium" => Ok(Generator::Stadium),
            other => Err(Error::Config(format!("unknown generator {other:?}"))),
        }
    }
}

/// Either a generator with its parameters or a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default = "default_n_aps")]
    pub n_aps: usize,
    #[serde(default = "default_n_users")]
    pub n_users: usize,
    /// Walled office only.
    #[serde(default = "default_rooms")]
    pub n_rooms: usize,
    #[serde(default = "default_wall_db")]
    pub wall_attenuation_db: f64,
}

fn default_n_aps() -> usize {
    20
}
fn default_n_users() -> usize {
    200
}
fn default_rooms() -> usize {
    4
}
fn default_wall_db() -> f64 {
    DEFAULT_WALL_ATTENUATION_DB
}

impl ScenarioSource {
    pub fn generator(generator: Generator, n_aps: usize, n_users: usize) -> Self {
        ScenarioSource {
            generator: Some(generator),
            file: None,
            n_aps,
            n_users,
            n_rooms: default_rooms(),
            wall_attenuation_db: default_wall_db(),
        }
    }
}

/// Directional APs. Without an orientation every AP faces the centre of
/// the deployment area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorConfig {
    pub width_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    /// User placement.
    pub topology: u64,
    /// Channel-assignment, association and clustering orders.
    pub plan: u64,
    pub shadowing: u64,
    pub oracle: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { topology: 1, plan: 2, shadowing: 3, oracle: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSettings {
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    #[serde(default = "default_subcarriers")]
    pub subcarriers: usize,
    #[serde(default = "default_enumeration_limit")]
    pub enumeration_limit: usize,
}

fn default_realizations() -> usize {
    1000
}
fn default_subcarriers() -> usize {
    1
}
fn default_enumeration_limit() -> usize {
    DEFAULT_ENUMERATION_LIMIT
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            n_realizations: default_realizations(),
            subcarriers: default_subcarriers(),
            enumeration_limit: default_enumeration_limit(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NAps,
    NUsers,
    Cca,
    PowerDb,
    Channelization,
    NClusters,
    Antennas,
    Rho,
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = toml::Value::try_from(self).map_err(|_| std::fmt::Error)?;
        f.write_str(s.as_str().unwrap_or_default())
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        toml::Value::String(s.replace('-', "_"))
            .try_into()
            .map_err(|_| Error::Config(format!("unknown sweep axis {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl std::fmt::Display for AxisValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AxisValue::Int(v) => write!(f, "{v}"),
            AxisValue::Float(v) => write!(f, "{v}"),
            AxisValue::Text(v) => f.write_str(v),
        }
    }
}

impl AxisValue {
    /// Integers, then floats, then text.
    pub fn parse(s: &str) -> Self {
        if let Ok(v) = s.parse() {
            AxisValue::Int(v)
        } else if let Ok(v) = s.parse() {
            AxisValue::Float(v)
        } else {
            AxisValue::Text(s.to_string())
        }
    }

    fn as_f64(&self) -> Result<f64> {
        match self {
            AxisValue::Int(v) => Ok(*v as f64),
            AxisValue::Float(v) => Ok(*v),
            AxisValue::Text(t) => t.parse().map_err(|_| Error::Config(format!("expected a number, got {t:?}"))),
        }
    }

    fn as_count(&self) -> Result<usize> {
        match self {
            AxisValue::Int(v) if *v >= 0 => Ok(*v as usize),
            other => Err(Error::Config(format!("expected a nonnegative integer, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<AxisValue>,
    /// When set, every point is also evaluated at each of these CCA values
    /// and the smallest CCA reaching the best mean throughput is reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cca_grid: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn new(scenario: ScenarioSource) -> Self {
        RunConfig {
            technology: default_technology(),
            channelization: default_channelization(),
            cca: default_cca(),
            power_db: None,
            antennas: None,
            rho: default_rho(),
            rate_mode: RateMode::default(),
            quantization: QuantizationPoint::default(),
            ctmc_mode: ModeSelection::default(),
            state_cap: default_state_cap(),
            n_clusters: default_clusters(),
            overhead_discount: default_discount(),
            outage_threshold_bps: default_outage(),
            dump_intermediates: false,
            scenario,
            sector: None,
            pathloss: None,
            mcs_table: None,
            seeds: Seeds::default(),
            oracle: None,
            sweep: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match (&self.scenario.generator, &self.scenario.file) {
            (Some(_), Some(_)) => return bad("scenario takes either a generator or a file, not both".into()),
            (None, None) => return bad("scenario needs a generator or a file".into()),
            _ => {}
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.overhead_discount > 0.0 && self.overhead_discount <= 1.0) {
            return bad(format!("overhead_discount must be in (0, 1], got {}", self.overhead_discount));
        }
        if self.overhead_discount != 1.0 && self.technology != Technology::DistributedMuMimo {
            return bad("overhead_discount applies to distributed MU-MIMO only".into());
        }
        if self.n_clusters == 0 {
            return bad("n_clusters must be at least 1".into());
        }
        if self.state_cap == 0 {
            return bad("state_cap must be at least 1".into());
        }
        if let Some(0) = self.antennas {
            return bad("antennas must be at least 1".into());
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() && s.cca_grid.is_none() {
                return bad("sweep needs at least one value".into());
            }
        }
        if let Some(t) = &self.mcs_table {
            t.validate()?;
        }
        if let Some(p) = &self.pathloss {
            p.validate()?;
        }
        Ok(())
    }

    /// The configuration of a single evaluation: no sweep section.
    pub fn point(&self) -> RunConfig {
        RunConfig { sweep: None, ..self.clone() }
    }

    /// Point configuration with one sweep axis set to `value`.
    pub fn with_axis(&self, axis: SweepAxis, value: &AxisValue) -> Result<RunConfig> {
        let mut c = self.point();
        match axis {
            SweepAxis::NAps => c.scenario.n_aps = value.as_count()?,
            SweepAxis::NUsers => c.scenario.n_users = value.as_count()?,
            SweepAxis::Cca => {
                c.cca = match value {
                    AxisValue::Text(t) => t.parse()?,
                    v => Cca::Db(v.as_f64()?),
                }
            }
            SweepAxis::PowerDb => c.power_db = Some(value.as_f64()?),
            SweepAxis::Channelization => c.channelization = value.to_string().parse()?,
            SweepAxis::NClusters => c.n_clusters = value.as_count()?,
            SweepAxis::Antennas => c.antennas = Some(value.as_count()?),
            SweepAxis::Rho => c.rho = value.as_f64()?,
        }
        c.validate()?;
        Ok(c)
    }
}

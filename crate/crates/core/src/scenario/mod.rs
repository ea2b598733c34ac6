//! Deployment geometry: region, walls, access points and user terminals.
//!
//! All node coordinates live on a regular grid (`grid_step_m`). Walls are
//! straight segments with a fixed attenuation per crossing.

mod layout;

pub use layout::{
    build_conference_hall, build_open_floor, build_stadium, build_walled_office,
    build_walled_office_with, DEFAULT_WALL_ATTENUATION_DB,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRID_STEP_M: f64 = 0.5;
pub const DEFAULT_ANTENNAS: usize = 4;
pub const DEFAULT_POWER_DB: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallSegment {
    pub a: Point,
    pub b: Point,
    pub attenuation_db: f64,
}

/// Binary radiation sector, bearings in degrees counter-clockwise from +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub orientation_deg: f64,
    pub width_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApNode {
    pub id: usize,
    pub position: Point,
    pub antennas: usize,
    /// Transmit power in dB above the (unit) noise floor.
    pub power_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<Sector>,
}

impl ApNode {
    pub fn power_linear(&self) -> f64 {
        db_to_linear(self.power_db)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtNode {
    pub id: usize,
    pub position: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioClass {
    ConferenceHall,
    OpenFloor,
    WalledOffice,
    Stadium,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_class: ScenarioClass,
    pub width_m: f64,
    pub height_m: f64,
    pub grid_step_m: f64,
    #[serde(default)]
    pub walls: Vec<WallSegment>,
    pub aps: Vec<ApNode>,
    pub users: Vec<UtNode>,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl Scenario {
    pub fn n_aps(&self) -> usize {
        self.aps.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn with_antennas(mut self, antennas: usize) -> Self {
        for ap in &mut self.aps {
            ap.antennas = antennas;
        }
        self
    }

    pub fn with_power_db(mut self, power_db: f64) -> Self {
        for ap in &mut self.aps {
            ap.power_db = power_db;
        }
        self
    }

    /// Gives every AP the same sector (`None` restores omnidirectional APs).
    pub fn with_sector(mut self, sector: Option<Sector>) -> Self {
        for ap in &mut self.aps {
            ap.sector = sector;
        }
        self
    }

    pub fn snap(&self, v: f64, max: f64) -> f64 {
        snap_to_grid(v, self.grid_step_m, max)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if !(self.width_m > 0.0 && self.height_m > 0.0) {
            return bad(format!("region {}x{} is not positive", self.width_m, self.height_m));
        }
        if !(self.grid_step_m > 0.0) {
            return bad(format!("grid step {} is not positive", self.grid_step_m));
        }
        if self.aps.is_empty() || self.users.is_empty() {
            return bad("need at least one AP and one user".into());
        }
        for (idx, ap) in self.aps.iter().enumerate() {
            if ap.id != idx {
                return bad(format!("AP ids must be dense from 0; found {} at {idx}", ap.id));
            }
            if ap.antennas == 0 {
                return bad(format!("AP {} has no antennas", ap.id));
            }
            if !ap.power_db.is_finite() {
                return bad(format!("AP {} power is not finite", ap.id));
            }
            if let Some(s) = ap.sector {
                if !(s.width_deg > 0.0 && s.width_deg <= 360.0) || !s.orientation_deg.is_finite()
                {
                    return bad(format!("AP {} sector width {} out of (0, 360]", ap.id, s.width_deg));
                }
            }
            self.check_placement(&ap.position, &format!("AP {}", ap.id))?;
        }
        for (idx, ut) in self.users.iter().enumerate() {
            if ut.id != idx {
                return bad(format!("user ids must be dense from 0; found {} at {idx}", ut.id));
            }
            self.check_placement(&ut.position, &format!("user {}", ut.id))?;
        }
        for (idx, w) in self.walls.iter().enumerate() {
            if w.a == w.b {
                return bad(format!("wall {idx} has coincident endpoints"));
            }
            if !(w.attenuation_db >= 0.0) {
                return bad(format!("wall {idx} has negative attenuation"));
            }
        }
        Ok(())
    }

    fn check_placement(&self, p: &Point, what: &str) -> Result<()> {
        let inside = (0.0..=self.width_m).contains(&p.x) && (0.0..=self.height_m).contains(&p.y);
        if !inside {
            return Err(Error::InvalidScenario(format!("{what} at ({}, {}) is outside the region", p.x, p.y)));
        }
        if !on_grid(p.x, self.grid_step_m) || !on_grid(p.y, self.grid_step_m) {
            return Err(Error::InvalidScenario(format!("{what} at ({}, {}) is off the grid", p.x, p.y)));
        }
        Ok(())
    }

    /// Total wall attenuation in dB along the open segment `p1`-`p2`.
    pub fn wall_crossings(&self, p1: &Point, p2: &Point) -> f64 {
        self.walls
            .iter()
            .filter(|w| segments_cross(p1, p2, &w.a, &w.b))
            .map(|w| w.attenuation_db)
            .sum()
    }
}

fn on_grid(v: f64, step: f64) -> bool {
    let q = v / step;
    (q - q.round()).abs() < 1e-9
}

pub(crate) fn snap_to_grid(v: f64, step: f64, max: f64) -> f64 {
    let snapped = (v / step).round() * step;
    let top = (max / step).floor() * step;
    snapped.clamp(0.0, top)
}

fn orientation(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Proper crossing only: touching an endpoint or running collinear does not
/// count. Exact for grid coordinates, which are dyadic rationals.
fn segments_cross(p1: &Point, p2: &Point, a: &Point, b: &Point) -> bool {
    let o1 = orientation(p1, p2, a);
    let o2 = orientation(p1, p2, b);
    let o3 = orientation(a, b, p1);
    let o4 = orientation(a, b, p2);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

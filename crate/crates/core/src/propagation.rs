//! Large-scale gains (log-distance pathloss, walls, frozen log-normal
//! shadowing, binary sectors) and Rayleigh small-scale fading draws.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};
use crate::scenario::{ApNode, Point, Scenario, ScenarioClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathlossProfile {
    Indoor,
    Stadium,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathlossParams {
    pub a_db: f64,
    pub b_db_per_decade: f64,
    pub shadowing_sigma_db: f64,
    pub reference_distance_m: f64,
    pub profile: PathlossProfile,
}

impl PathlossParams {
    pub fn indoor() -> Self {
        PathlossParams {
            a_db: 46.8,
            b_db_per_decade: 18.7,
            shadowing_sigma_db: 3.0,
            reference_distance_m: 1.0,
            profile: PathlossProfile::Indoor,
        }
    }

    pub fn stadium() -> Self {
        PathlossParams {
            a_db: 41.0,
            b_db_per_decade: 23.0,
            shadowing_sigma_db: 4.0,
            reference_distance_m: 1.0,
            profile: PathlossProfile::Stadium,
        }
    }

    pub fn for_class(class: ScenarioClass) -> Self {
        match class {
            ScenarioClass::Stadium => Self::stadium(),
            _ => Self::indoor(),
        }
    }

    pub fn without_shadowing(mut self) -> Self {
        self.shadowing_sigma_db = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b_db_per_decade > 0.0) {
            return Err(Error::InvalidParameter(format!("pathloss slope {} must be positive", self.b_db_per_decade)));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(Error::InvalidParameter("shadowing sigma must be nonnegative".into()));
        }
        if !(self.reference_distance_m > 0.0) {
            return Err(Error::InvalidParameter("reference distance must be positive".into()));
        }
        Ok(())
    }

    /// Distance-dependent part only: `a + b log10(max(d, d_ref))`.
    pub fn distance_loss_db(&self, d: f64) -> f64 {
        self.a_db + self.b_db_per_decade * d.max(self.reference_distance_m).log10()
    }
}

impl Default for PathlossParams {
    fn default() -> Self {
        Self::indoor()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRef {
    Ap(usize),
    Ut(usize),
}

impl NodeRef {
    fn code(self) -> u64 {
        match self {
            NodeRef::Ap(i) => 2 * i as u64,
            NodeRef::Ut(k) => 2 * k as u64 + 1,
        }
    }

    pub fn position(self, scenario: &Scenario) -> Point {
        match self {
            NodeRef::Ap(i) => scenario.aps[i].position,
            NodeRef::Ut(k) => scenario.users[k].position,
        }
    }
}

/// Log-normal shadowing frozen per unordered node pair.
#[derive(Debug, Clone, Copy)]
pub struct ShadowingField {
    seed: u64,
    sigma_db: f64,
}

impl ShadowingField {
    pub fn new(seed: u64, sigma_db: f64) -> Self {
        ShadowingField { seed, sigma_db }
    }

    pub fn sample_db(&self, a: NodeRef, b: NodeRef) -> f64 {
        if self.sigma_db == 0.0 {
            return 0.0;
        }
        let (lo, hi) = {
            let (x, y) = (a.code(), b.code());
            (x.min(y), x.max(y))
        };
        let key = streams::SHADOWING_BASE + ((lo << 21) | hi);
        let z: f64 = stream_rng(self.seed, key).sample(StandardNormal);
        self.sigma_db * z
    }
}

/// Pathloss in dB between two nodes: distance law, walls and shadowing.
pub fn pathloss_db(
    params: &PathlossParams,
    scenario: &Scenario,
    shadowing: &ShadowingField,
    a: NodeRef,
    b: NodeRef,
) -> f64 {
    let (pa, pb) = (a.position(scenario), b.position(scenario));
    params.distance_loss_db(pa.distance(&pb)) + scenario.wall_crossings(&pa, &pb) + shadowing.sample_db(a, b)
}

/// 1 when `target` lies inside the AP's sector (edges inclusive), else 0.
/// Omnidirectional APs always return 1.
pub fn sector_gain(ap: &ApNode, target: &Point) -> f64 {
    let Some(sector) = ap.sector else { return 1.0 };
    if sector.width_deg >= 360.0 {
        return 1.0;
    }
    let (dx, dy) = (target.x - ap.position.x, target.y - ap.position.y);
    if dx == 0.0 && dy == 0.0 {
        return 1.0;
    }
    let bearing = dy.atan2(dx).to_degrees();
    let offset = (bearing - sector.orientation_deg).rem_euclid(360.0);
    let offset = if offset > 180.0 { 360.0 - offset } else { offset };
    if offset <= sector.width_deg / 2.0 + 1e-9 {
        1.0
    } else {
        0.0
    }
}

/// Linear large-scale power gains for every AP-to-user and AP-to-AP link.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    n_aps: usize,
    n_users: usize,
    ap_to_ut: Vec<f64>,
    ap_to_ap: Vec<f64>,
    pub seed: u64,
}

impl GainMatrix {
    /// Builds a matrix from explicit values; `ap_to_ut[i][k]` and
    /// `ap_to_ap[from][to]`.
    pub fn from_rows(ap_to_ut: Vec<Vec<f64>>, ap_to_ap: Vec<Vec<f64>>) -> Result<Self> {
        let n_aps = ap_to_ut.len();
        let n_users = ap_to_ut.first().map_or(0, Vec::len);
        if ap_to_ut.iter().any(|r| r.len() != n_users)
            || ap_to_ap.len() != n_aps
            || ap_to_ap.iter().any(|r| r.len() != n_aps)
        {
            return Err(Error::InvalidParameter("gain rows have inconsistent shapes".into()));
        }
        Ok(GainMatrix {
            n_aps,
            n_users,
            ap_to_ut: ap_to_ut.concat(),
            ap_to_ap: ap_to_ap.concat(),
            seed: 0,
        })
    }

    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    #[inline]
    pub fn ap_ut(&self, ap: usize, ut: usize) -> f64 {
        self.ap_to_ut[ap * self.n_users + ut]
    }

    /// Gain of the link from AP `from` (as transmitter) to AP `to`.
    #[inline]
    pub fn ap_ap(&self, from: usize, to: usize) -> f64 {
        self.ap_to_ap[from * self.n_aps + to]
    }

    /// One CSV row per link: `from_ap,to_kind,to_id,gain,gain_db`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["from_ap", "to_kind", "to_id", "gain", "gain_db"])?;
        for i in 0..self.n_aps {
            for k in 0..self.n_users {
                let g = self.ap_ut(i, k);
                out.write_record([i.to_string(), "ut".into(), k.to_string(), format!("{g:e}"), format!("{:.4}", 10.0 * g.log10())])?;
            }
            for j in (0..self.n_aps).filter(|&j| j != i) {
                let g = self.ap_ap(i, j);
                out.write_record([i.to_string(), "ap".into(), j.to_string(), format!("{g:e}"), format!("{:.4}", 10.0 * g.log10())])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn link_gain(
    params: &PathlossParams,
    scenario: &Scenario,
    shadowing: &ShadowingField,
    ap: usize,
    to: NodeRef,
) -> Result<f64> {
    let pl = pathloss_db(params, scenario, shadowing, NodeRef::Ap(ap), to);
    if pl < 0.0 {
        return Err(Error::GainOutOfRange { pair: format!("AP {ap} -> {to:?}"), pathloss_db: pl });
    }
    let mask = sector_gain(&scenario.aps[ap], &to.position(scenario));
    Ok(mask * 10f64.powf(-pl / 10.0))
}

/// Large-scale gain matrix for a scenario. Deterministic in `seed`; rows
/// are computed in parallel but every entry comes from its own stream.
pub fn gain_matrix(scenario: &Scenario, params: &PathlossParams, seed: u64) -> Result<GainMatrix> {
    params.validate()?;
    scenario.validate()?;
    let shadowing = ShadowingField::new(seed, params.shadowing_sigma_db);
    let (n_aps, n_users) = (scenario.n_aps(), scenario.n_users());

    let ut_rows: Vec<Vec<f64>> = (0..n_aps)
        .into_par_iter()
        .map(|i| (0..n_users).map(|k| link_gain(params, scenario, &shadowing, i, NodeRef::Ut(k))).collect())
        .collect::<Result<_>>()?;
    let ap_rows: Vec<Vec<f64>> = (0..n_aps)
        .map(|i| {
            (0..n_aps)
                .map(|j| if i == j { Ok(1.0) } else { link_gain(params, scenario, &shadowing, i, NodeRef::Ap(j)) })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut gm = GainMatrix::from_rows(ut_rows, ap_rows)?;
    gm.seed = seed;
    Ok(gm)
}

/// `m` i.i.d. CN(0, 1) entries.
pub fn sample_fading<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(m);
    fill_fading(&mut out, m, rng);
    out
}

pub(crate) fn fill_fading<R: Rng + ?Sized>(out: &mut Vec<Complex64>, m: usize, rng: &mut R) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    out.extend((0..m).map(|_| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    }));
}

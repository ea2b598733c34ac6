use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ApSet;
use crate::error::Result;
use crate::propagation::GainMatrix;
use crate::radio_plan::ChannelPlan;
use crate::scenario::ApNode;

/// Carrier-sense threshold in dB above the noise floor, or no sensing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cca {
    Disabled,
    Db(f64),
}

impl Cca {
    pub fn threshold_linear(self) -> Option<f64> {
        match self {
            Cca::Disabled => None,
            Cca::Db(db) => Some(10f64.powf(db / 10.0)),
        }
    }
}

impl std::fmt::Display for Cca {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cca::Disabled => f.write_str("disabled"),
            Cca::Db(db) => write!(f, "{db}"),
        }
    }
}

impl std::str::FromStr for Cca {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "disabled" | "none" | "off" => Ok(Cca::Disabled),
            other => other
                .parse::<f64>()
                .map(Cca::Db)
                .map_err(|_| crate::Error::Config(format!("CCA must be a number of dB or \"disabled\", got {other:?}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CcaRepr {
    Db(f64),
    Text(String),
}

impl Serialize for Cca {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cca::Disabled => CcaRepr::Text("disabled".into()).serialize(s),
            Cca::Db(db) => CcaRepr::Db(*db).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Cca {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match CcaRepr::deserialize(d)? {
            CcaRepr::Db(db) => Ok(Cca::Db(db)),
            CcaRepr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Symmetric contention graph; edges only between same-channel APs.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentionGraph {
    pub n_aps: usize,
    pub ap_channel: Vec<usize>,
    pub n_channels: usize,
    pub cca: Cca,
    adjacency: Vec<ApSet>,
}

impl ContentionGraph {
    pub fn from_edges(n_aps: usize, ap_channel: Vec<usize>, edges: &[(usize, usize)]) -> Self {
        let n_channels = ap_channel.iter().max().map_or(1, |m| m + 1);
        let mut adjacency = vec![ApSet::empty(n_aps); n_aps];
        for &(a, b) in edges {
            if a != b && ap_channel[a] == ap_channel[b] {
                adjacency[a].insert(b);
                adjacency[b].insert(a);
            }
        }
        ContentionGraph { n_aps, ap_channel, n_channels, cca: Cca::Db(f64::NAN), adjacency }
    }

    pub fn neighbours(&self, ap: usize) -> &ApSet {
        &self.adjacency[ap]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].contains(b)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n_aps).flat_map(|a| self.adjacency[a].iter().filter(move |&b| b > a).map(move |b| (a, b))).collect()
    }

    pub fn aps_on(&self, channel: usize) -> Vec<usize> {
        (0..self.n_aps).filter(|&i| self.ap_channel[i] == channel).collect()
    }

    pub fn is_independent(&self, set: &ApSet) -> bool {
        set.iter().all(|a| !self.adjacency[a].intersects(set))
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["ap_a", "ap_b", "channel"])?;
        for (a, b) in self.edges() {
            out.write_record([a.to_string(), b.to_string(), self.ap_channel[a].to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Edge between same-channel APs `i`, `j` when either hears the other at or
/// above the CCA threshold: `P_j g(j -> i) >= 10^(cca/10)` or the reverse.
pub fn build_contention_graph(gains: &GainMatrix, plan: &ChannelPlan, aps: &[ApNode], cca: Cca) -> ContentionGraph {
    let n = aps.len();
    let mut edges = Vec::new();
    if let Some(threshold) = cca.threshold_linear() {
        for i in 0..n {
            for j in (i + 1)..n {
                if plan.ap_channel[i] != plan.ap_channel[j] {
                    continue;
                }
                let heard_at_i = aps[j].power_linear() * gains.ap_ap(j, i);
                let heard_at_j = aps[i].power_linear() * gains.ap_ap(i, j);
                if heard_at_i >= threshold || heard_at_j >= threshold {
                    edges.push((i, j));
                }
            }
        }
    }
    let mut g = ContentionGraph::from_edges(n, plan.ap_channel.clone(), &edges);
    g.n_channels = plan.channels.len();
    g.cca = cca;
    g
}

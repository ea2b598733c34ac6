//! CSMA contention graph and the stationary distribution of the idealized
//! CSMA Markov chain.
//!
//! Interference and contention never cross channels, so the chain factorizes
//! into one independent chain per channel. [`CtmcModel`] keeps those chains
//! separate; [`CtmcModel::joint`] expands the product when a flat state list
//! is needed.

mod apset;
mod graph;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use apset::ApSet;
pub use graph::{build_contention_graph, Cca, ContentionGraph};

use crate::error::{Error, Result};

/// Default `rho = lambda / mu`.
pub const DEFAULT_RHO: f64 = 100.0;
/// Default state-space cap for exhaustive enumeration.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CtmcMode {
    AllIndependentSets,
    MaximalOnly,
    NoCsma,
}

/// How the state space of each channel is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModeSelection {
    /// `NoCsma` if CCA is disabled, otherwise all independent sets unless
    /// the channel exceeds the cap, then maximal sets only.
    #[default]
    Auto,
    AllIndependentSets,
    MaximalOnly,
    NoCsma,
}

impl std::str::FromStr for ModeSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "auto" => Ok(ModeSelection::Auto),
            "all_independent_sets" | "all" => Ok(ModeSelection::AllIndependentSets),
            "maximal_only" | "maximal" => Ok(ModeSelection::MaximalOnly),
            "no_csma" | "none" => Ok(ModeSelection::NoCsma),
            other => Err(Error::Config(format!("unknown CTMC mode {other:?}"))),
        }
    }
}

/// One channel's chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelChain {
    pub channel: usize,
    pub aps: Vec<usize>,
    pub mode: CtmcMode,
    pub states: Vec<ApSet>,
    pub pi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtmcModel {
    pub n_aps: usize,
    pub rho: f64,
    pub chains: Vec<ChannelChain>,
}

/// Independent sets of the subgraph induced by `aps`, including the empty set.
pub fn enumerate_channel_states(graph: &ContentionGraph, aps: &[usize], mode: CtmcMode, cap: usize) -> Result<Vec<ApSet>> {
    let n = graph.n_aps;
    match mode {
        CtmcMode::NoCsma => Ok(vec![ApSet::from_ids(n, aps.iter().copied())]),
        CtmcMode::AllIndependentSets => {
            let mut out = Vec::new();
            let candidates = ApSet::from_ids(n, aps.iter().copied());
            let channel = aps.first().map_or(0, |&a| graph.ap_channel[a]);
            all_independent(graph, ApSet::empty(n), &candidates, &mut out, cap)
                .map_err(|_| Error::StateSpaceOverflow { channel, cap })?;
            Ok(out)
        }
        CtmcMode::MaximalOnly => {
            let mut out = Vec::new();
            let all = ApSet::from_ids(n, aps.iter().copied());
            let channel = aps.first().map_or(0, |&a| graph.ap_channel[a]);
            if aps.is_empty() {
                return Ok(vec![ApSet::empty(n)]);
            }
            maximal_independent(graph, &all, ApSet::empty(n), all.clone(), ApSet::empty(n), &mut out, cap)
                .map_err(|_| Error::StateSpaceOverflow { channel, cap })?;
            Ok(out)
        }
    }
}

struct Overflow;

fn all_independent(g: &ContentionGraph, current: ApSet, candidates: &ApSet, out: &mut Vec<ApSet>, cap: usize) -> std::result::Result<(), Overflow> {
    if out.len() >= cap {
        return Err(Overflow);
    }
    out.push(current.clone());
    let mut rest = candidates.clone();
    for v in candidates.iter() {
        rest.remove(v);
        let next = rest.difference(g.neighbours(v));
        let mut with_v = current.clone();
        with_v.insert(v);
        all_independent(g, with_v, &next, out, cap)?;
    }
    Ok(())
}

/// Bron-Kerbosch with pivoting on the complement graph restricted to `all`.
fn maximal_independent(
    g: &ContentionGraph,
    all: &ApSet,
    r: ApSet,
    mut p: ApSet,
    mut x: ApSet,
    out: &mut Vec<ApSet>,
    cap: usize,
) -> std::result::Result<(), Overflow> {
    if p.is_empty() && x.is_empty() {
        if out.len() >= cap {
            return Err(Overflow);
        }
        out.push(r);
        return Ok(());
    }
    let non_adjacent = |v: usize| {
        let mut s = all.difference(g.neighbours(v));
        s.remove(v);
        s
    };
    let mut union = p.clone();
    union.union_with(&x);
    let pivot = union.iter().max_by_key(|&u| (p.intersection(&non_adjacent(u)).len(), std::cmp::Reverse(u))).expect("nonempty");
    let branch = p.difference(&non_adjacent(pivot));
    for v in branch.iter() {
        let nv = non_adjacent(v);
        let mut rv = r.clone();
        rv.insert(v);
        maximal_independent(g, all, rv, p.intersection(&nv), x.intersection(&nv), out, cap)?;
        p.remove(v);
        x.insert(v);
    }
    Ok(())
}

/// Flat joint state list: Cartesian product of per-channel state lists.
pub fn enumerate_states(graph: &ContentionGraph, mode: CtmcMode, cap: usize) -> Result<Vec<ApSet>> {
    let mut joint = vec![ApSet::empty(graph.n_aps)];
    for channel in 0..graph.n_channels {
        let aps = graph.aps_on(channel);
        if aps.is_empty() {
            continue;
        }
        let states = enumerate_channel_states(graph, &aps, mode, cap)?;
        if joint.len().saturating_mul(states.len()) > cap {
            return Err(Error::StateSpaceOverflow { channel, cap });
        }
        joint = joint
            .iter()
            .flat_map(|a| {
                states.iter().map(move |s| {
                    let mut m = a.clone();
                    m.union_with(s);
                    m
                })
            })
            .collect();
    }
    Ok(joint)
}

/// `pi_m = rho^|m| / sum rho^|m'|`, evaluated in log-space.
pub fn stationary_distribution(states: &[ApSet], rho: f64) -> Result<Vec<f64>> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!("rho must be positive and finite, got {rho}")));
    }
    if states.is_empty() {
        return Err(Error::InvalidParameter("state list is empty".into()));
    }
    let ln_rho = rho.ln();
    let logw: Vec<f64> = states.iter().map(|s| s.len() as f64 * ln_rho).collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

impl CtmcModel {
    pub fn build(graph: &ContentionGraph, selection: ModeSelection, rho: f64, cap: usize) -> Result<Self> {
        let channels: Vec<(usize, Vec<usize>)> =
            (0..graph.n_channels).map(|c| (c, graph.aps_on(c))).filter(|(_, aps)| !aps.is_empty()).collect();
        let chains = channels
            .into_par_iter()
            .map(|(channel, aps)| {
                let (mode, states) = match selection {
                    ModeSelection::AllIndependentSets => {
                        (CtmcMode::AllIndependentSets, enumerate_channel_states(graph, &aps, CtmcMode::AllIndependentSets, cap)?)
                    }
                    ModeSelection::MaximalOnly => {
                        (CtmcMode::MaximalOnly, enumerate_channel_states(graph, &aps, CtmcMode::MaximalOnly, cap)?)
                    }
                    ModeSelection::NoCsma => (CtmcMode::NoCsma, enumerate_channel_states(graph, &aps, CtmcMode::NoCsma, cap)?),
                    ModeSelection::Auto if graph.cca == Cca::Disabled => {
                        (CtmcMode::NoCsma, enumerate_channel_states(graph, &aps, CtmcMode::NoCsma, cap)?)
                    }
                    ModeSelection::Auto => match enumerate_channel_states(graph, &aps, CtmcMode::AllIndependentSets, cap) {
                        Ok(s) => (CtmcMode::AllIndependentSets, s),
                        Err(Error::StateSpaceOverflow { .. }) => {
                            (CtmcMode::MaximalOnly, enumerate_channel_states(graph, &aps, CtmcMode::MaximalOnly, cap)?)
                        }
                        Err(e) => return Err(e),
                    },
                };
                let pi = stationary_distribution(&states, rho)?;
                Ok(ChannelChain { channel, aps, mode, states, pi })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CtmcModel { n_aps: graph.n_aps, rho, chains })
    }

    /// Single chain over a supplied state list (all APs on one channel).
    pub fn from_states(n_aps: usize, states: Vec<ApSet>, rho: f64, mode: CtmcMode) -> Result<Self> {
        let pi = stationary_distribution(&states, rho)?;
        Ok(CtmcModel { n_aps, rho, chains: vec![ChannelChain { channel: 0, aps: (0..n_aps).collect(), mode, states, pi }] })
    }

    pub fn n_joint_states(&self) -> f64 {
        self.chains.iter().map(|c| c.states.len() as f64).product()
    }

    /// Joint states and probabilities (product over channels).
    pub fn joint(&self, cap: usize) -> Result<(Vec<ApSet>, Vec<f64>)> {
        if self.n_joint_states() > cap as f64 {
            return Err(Error::StateSpaceOverflow { channel: usize::MAX, cap });
        }
        let mut states = vec![ApSet::empty(self.n_aps)];
        let mut probs = vec![1.0];
        for chain in &self.chains {
            let mut ns = Vec::with_capacity(states.len() * chain.states.len());
            let mut np = Vec::with_capacity(ns.capacity());
            for (a, pa) in states.iter().zip(&probs) {
                for (s, ps) in chain.states.iter().zip(&chain.pi) {
                    let mut m = a.clone();
                    m.union_with(s);
                    ns.push(m);
                    np.push(pa * ps);
                }
            }
            states = ns;
            probs = np;
        }
        Ok((states, probs))
    }

    /// `share_i = sum over states with m_i = 1 of pi_m`.
    pub fn airtime_shares(&self) -> Vec<f64> {
        let mut shares = vec![0.0; self.n_aps];
        for chain in &self.chains {
            for (s, p) in chain.states.iter().zip(&chain.pi) {
                for ap in s.iter() {
                    shares[ap] += p;
                }
            }
        }
        shares
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["channel", "mode", "state", "probability"])?;
        for chain in &self.chains {
            let mode = match chain.mode {
                CtmcMode::AllIndependentSets => "all_independent_sets",
                CtmcMode::MaximalOnly => "maximal_only",
                CtmcMode::NoCsma => "no_csma",
            };
            for (s, p) in chain.states.iter().zip(&chain.pi) {
                out.write_record([chain.channel.to_string(), mode.to_string(), s.to_bit_string(self.n_aps), format!("{p:.17e}")])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Airtime shares straight from a flat state list.
pub fn airtime_shares(n_aps: usize, states: &[ApSet], pi: &[f64]) -> Vec<f64> {
    let mut shares = vec![0.0; n_aps];
    for (s, p) in states.iter().zip(pi) {
        for ap in s.iter() {
            shares[ap] += p;
        }
    }
    shares
}

//! Deterministic large-system rates for single-user beamforming,
//! concentrated MU-MIMO and distributed MU-MIMO, and their average over the
//! CSMA chain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csma::{ApSet, CtmcModel};
use crate::error::{Error, Result};
use crate::metrics::{ofdm_efficiency, summarize, McsTable, Summary};
use crate::propagation::GainMatrix;
use crate::radio_plan::{AssociationMap, ChannelPlan, ClusterPlan};
use crate::scenario::ApNode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technology {
    SuBeamforming,
    ConcentratedMuMimo,
    DistributedMuMimo,
}

impl std::str::FromStr for Technology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "su" | "su_bf" | "su_beamforming" => Ok(Technology::SuBeamforming),
            "mu" | "mu_mimo" | "concentrated" | "concentrated_mu_mimo" => Ok(Technology::ConcentratedMuMimo),
            "dist" | "distributed" | "distributed_mu_mimo" => Ok(Technology::DistributedMuMimo),
            other => Err(Error::Config(format!("unknown technology {other:?}"))),
        }
    }
}

impl std::fmt::Display for Technology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Technology::SuBeamforming => "su_beamforming",
            Technology::ConcentratedMuMimo => "concentrated_mu_mimo",
            Technology::DistributedMuMimo => "distributed_mu_mimo",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    #[default]
    Gaussian,
    Quantized,
}

impl std::str::FromStr for RateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(RateMode::Gaussian),
            "quantized" | "mcs" => Ok(RateMode::Quantized),
            other => Err(Error::Config(format!("unknown rate mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for RateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RateMode::Gaussian => "gaussian",
            RateMode::Quantized => "quantized",
        })
    }
}

/// Where MCS quantization happens relative to CTMC averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuantizationPoint {
    /// Every state's SINR is mapped to an MCS, then rates are averaged.
    #[default]
    PerState,
    /// Airtime and airtime-weighted SINR are averaged first; the mean SINR
    /// is mapped to an MCS once per user.
    AfterAveraging,
}

impl std::str::FromStr for QuantizationPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "per_state" => Ok(QuantizationPoint::PerState),
            "after_averaging" => Ok(QuantizationPoint::AfterAveraging),
            other => Err(Error::Config(format!("unknown quantization point {other:?}"))),
        }
    }
}

/// Maps an SINR to a per-stream spectral efficiency.
#[derive(Debug, Clone, Copy)]
pub struct LinkRate<'a> {
    pub mode: RateMode,
    pub mcs: &'a McsTable,
    pub point: QuantizationPoint,
}

impl<'a> LinkRate<'a> {
    pub fn new(mode: RateMode, mcs: &'a McsTable) -> Self {
        LinkRate { mode, mcs, point: QuantizationPoint::PerState }
    }

    pub fn of(&self, sinr: f64) -> f64 {
        match self.mode {
            RateMode::Gaussian => (1.0 + sinr).log2(),
            RateMode::Quantized => self.mcs.quantize_linear(sinr),
        }
    }
}

/// Gains, AP parameters, channels and association of one deployment.
#[derive(Debug, Clone, Copy)]
pub struct Network<'a> {
    pub gains: &'a GainMatrix,
    pub aps: &'a [ApNode],
    pub plan: &'a ChannelPlan,
    pub assoc: &'a AssociationMap,
}

/// Per-user rates in one CSMA state, plus the stream count per AP
/// (0 when the AP is silent).
#[derive(Debug, Clone, PartialEq)]
pub struct StateRates {
    pub rates: Vec<f64>,
    pub streams: Vec<usize>,
}

/// `log2(1 + g_ik M_i P_i)`.
pub fn peak_rate_isolated(gains: &GainMatrix, aps: &[ApNode], ap: usize, ut: usize) -> f64 {
    (1.0 + gains.ap_ut(ap, ut) * aps[ap].antennas as f64 * aps[ap].power_linear()).log2()
}

/// Peak-rate matrix `[ap][user]` used for association.
pub fn peak_rate_matrix(gains: &GainMatrix, aps: &[ApNode]) -> Vec<Vec<f64>> {
    (0..gains.n_aps()).map(|i| (0..gains.n_users()).map(|k| peak_rate_isolated(gains, aps, i, k)).collect()).collect()
}

/// Received interference at `ut` from the active same-channel APs other
/// than `serving`.
pub fn state_interference(net: &Network, state: &ApSet, serving: usize, ut: usize) -> f64 {
    let ch = net.plan.ap_channel[serving];
    state
        .iter()
        .filter(|&j| j != serving && net.plan.ap_channel[j] == ch)
        .map(|j| net.gains.ap_ut(j, ut) * net.aps[j].power_linear())
        .sum()
}

/// Single-user beamforming SINR `g M P / (1 + I)`.
pub fn su_sinr(g: f64, antennas: usize, power: f64, interference: f64) -> f64 {
    g * antennas as f64 * power / (1.0 + interference)
}

/// ZFBF deterministic SINR `(M - S + 1) g P / S / (1 + I)`.
pub fn mu_sinr(g: f64, antennas: usize, power: f64, streams: usize, interference: f64) -> Result<f64> {
    if streams == 0 || streams > antennas {
        return Err(Error::InvalidParameter(format!("stream count {streams} outside 1..={antennas}")));
    }
    Ok((antennas - streams + 1) as f64 * g * power / streams as f64 / (1.0 + interference))
}

/// Distributed MU-MIMO SINR `(M - (S-1)/B) sum_g P_sum / S / (1 + I)`.
pub fn dist_sinr(sum_g: f64, antennas: usize, n_aps: usize, p_sum: f64, streams: usize, interference: f64) -> f64 {
    let gain = antennas as f64 - (streams as f64 - 1.0) / n_aps as f64;
    gain * sum_g * p_sum / streams as f64 / (1.0 + interference)
}

/// Stream count maximizing `sum_k (S/K) log2(1 + sinr(k, S))` over
/// `1..=max_streams`; ties go to the smaller count.
pub fn best_stream_count(n_users: usize, max_streams: usize, sinr: impl Fn(usize, usize) -> f64) -> usize {
    let mut best = (1, f64::NEG_INFINITY);
    for s in 1..=max_streams.max(1) {
        let total: f64 = (0..n_users).map(|k| s as f64 / n_users as f64 * (1.0 + sinr(k, s)).log2()).sum();
        if total > best.1 {
            best = (s, total);
        }
    }
    best.0
}

/// Calls `out(user, airtime_share, sinr)` for each user of `ap`.
fn su_ap_sinrs(net: &Network, state: &ApSet, ap: usize, out: &mut impl FnMut(usize, f64, f64)) -> usize {
    let users = &net.assoc.sets[ap];
    if users.is_empty() || !state.contains(ap) {
        return 0;
    }
    let (m, p) = (net.aps[ap].antennas, net.aps[ap].power_linear());
    let share = 1.0 / users.len() as f64;
    for &k in users {
        let sinr = su_sinr(net.gains.ap_ut(ap, k), m, p, state_interference(net, state, ap, k));
        out(k, share, sinr);
    }
    1
}

fn mu_ap_sinrs(net: &Network, state: &ApSet, ap: usize, out: &mut impl FnMut(usize, f64, f64)) -> usize {
    let users = &net.assoc.sets[ap];
    if users.is_empty() || !state.contains(ap) {
        return 0;
    }
    let (m, p) = (net.aps[ap].antennas, net.aps[ap].power_linear());
    let interference: Vec<f64> = users.iter().map(|&k| state_interference(net, state, ap, k)).collect();
    let g: Vec<f64> = users.iter().map(|&k| net.gains.ap_ut(ap, k)).collect();
    let sinr = |idx: usize, s: usize| (m - s + 1) as f64 * g[idx] * p / s as f64 / (1.0 + interference[idx]);
    let s_star = best_stream_count(users.len(), m.min(users.len()), sinr);
    let share = s_star as f64 / users.len() as f64;
    for (idx, &k) in users.iter().enumerate() {
        out(k, share, sinr(idx, s_star));
    }
    s_star
}

/// Sum-rate-optimal ZFBF stream count of `ap` in `state`, 0 if the AP is
/// silent or has no users.
pub fn mu_stream_count(net: &Network, state: &ApSet, ap: usize) -> usize {
    let users = &net.assoc.sets[ap];
    if users.is_empty() || !state.contains(ap) {
        return 0;
    }
    let (m, p) = (net.aps[ap].antennas, net.aps[ap].power_linear());
    let sinr = |idx: usize, s: usize| {
        let k = users[idx];
        (m - s + 1) as f64 * net.gains.ap_ut(ap, k) * p / s as f64 / (1.0 + state_interference(net, state, ap, k))
    };
    best_stream_count(users.len(), m.min(users.len()), sinr)
}

/// Rates in state `state` with equal air time among each AP's users.
pub fn su_rate_state(net: &Network, link: LinkRate, state: &ApSet) -> StateRates {
    let mut rates = vec![0.0; net.gains.n_users()];
    let streams = (0..net.aps.len()).map(|i| su_ap_sinrs(net, state, i, &mut |k, w, x| rates[k] = w * link.of(x))).collect();
    StateRates { rates, streams }
}

/// Rates in state `state` with each active AP serving its sum-rate-optimal
/// number of ZFBF streams.
pub fn mu_rate_state(net: &Network, link: LinkRate, state: &ApSet) -> StateRates {
    let mut rates = vec![0.0; net.gains.n_users()];
    let streams = (0..net.aps.len()).map(|i| mu_ap_sinrs(net, state, i, &mut |k, w, x| rates[k] = w * link.of(x))).collect();
    StateRates { rates, streams }
}

/// `R_k = sum_m pi_m R_k^m` over a flat state list.
pub fn average_over_ctmc(state_rates: &[StateRates], pi: &[f64]) -> Result<Vec<f64>> {
    if state_rates.len() != pi.len() {
        return Err(Error::MismatchedStates { rates: state_rates.len(), states: pi.len() });
    }
    let n = state_rates.first().map_or(0, |s| s.rates.len());
    let mut avg = vec![0.0; n];
    for (sr, p) in state_rates.iter().zip(pi) {
        if sr.rates.len() != n {
            return Err(Error::InvalidParameter("state rate vectors differ in length".into()));
        }
        for (a, r) in avg.iter_mut().zip(&sr.rates) {
            *a += p * r;
        }
    }
    Ok(avg)
}

const STATE_CHUNK: usize = 1024;

#[derive(Clone)]
struct ChainSums {
    rate: Vec<f64>,
    airtime: Vec<f64>,
    sinr: Vec<f64>,
}

/// CTMC-averaged rate per user, evaluated chain by chain. A user's rate
/// depends only on the state of its own channel, so each chain's states are
/// swept once for the users it serves. Chunks run in parallel and are
/// reduced in state order.
pub fn ctmc_average_rates(net: &Network, link: LinkRate, model: &CtmcModel, technology: Technology) -> Result<Vec<f64>> {
    let concentrated = match technology {
        Technology::SuBeamforming => false,
        Technology::ConcentratedMuMimo => true,
        Technology::DistributedMuMimo => {
            return Err(Error::InvalidParameter("distributed MU-MIMO is evaluated per cluster, not per CSMA state".into()))
        }
    };
    let after = link.mode == RateMode::Quantized && link.point == QuantizationPoint::AfterAveraging;
    let n_users = net.gains.n_users();
    let mut total = ChainSums { rate: vec![0.0; n_users], airtime: vec![0.0; n_users], sinr: vec![0.0; n_users] };
    for chain in &model.chains {
        let served: Vec<usize> = chain.aps.iter().flat_map(|&i| net.assoc.sets[i].iter().copied()).collect();
        if served.is_empty() {
            continue;
        }
        let partials: Vec<ChainSums> = chain
            .states
            .par_chunks(STATE_CHUNK)
            .zip(chain.pi.par_chunks(STATE_CHUNK))
            .map(|(states, pis)| {
                let mut acc = ChainSums { rate: vec![0.0; n_users], airtime: vec![0.0; n_users], sinr: vec![0.0; n_users] };
                for (state, &p) in states.iter().zip(pis) {
                    let mut add = |k: usize, w: f64, x: f64| {
                        if after {
                            acc.airtime[k] += p * w;
                            acc.sinr[k] += p * w * x;
                        } else {
                            acc.rate[k] += p * w * link.of(x);
                        }
                    };
                    for ap in state.iter() {
                        if concentrated {
                            mu_ap_sinrs(net, state, ap, &mut add);
                        } else {
                            su_ap_sinrs(net, state, ap, &mut add);
                        }
                    }
                }
                acc
            })
            .collect();
        for part in &partials {
            for &k in &served {
                total.rate[k] += part.rate[k];
                total.airtime[k] += part.airtime[k];
                total.sinr[k] += part.sinr[k];
            }
        }
    }
    if after {
        return Ok((0..n_users)
            .map(|k| if total.airtime[k] > 0.0 { total.airtime[k] * link.of(total.sinr[k] / total.airtime[k]) } else { 0.0 })
            .collect());
    }
    Ok(total.rate)
}

/// Stream count and per-user rate of one distributed MU-MIMO cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRates {
    pub streams: usize,
    pub rates: Vec<f64>,
}

/// Distributed MU-MIMO rates for the `sum_g.len()` users of a cluster of
/// `n_aps` APs with `antennas` each and pooled power `p_sum`.
/// `R_k = (S/K) rate((M - (S-1)/B) sum_g_k P_sum / S / (1 + I_k))`.
pub fn dist_mu_rate(
    sum_g: &[f64],
    interference: &[f64],
    antennas: usize,
    n_aps: usize,
    p_sum: f64,
    link: LinkRate,
) -> Result<ClusterRates> {
    if n_aps == 0 || antennas == 0 {
        return Err(Error::InvalidParameter("cluster needs at least one AP and one antenna".into()));
    }
    if sum_g.len() != interference.len() {
        return Err(Error::InvalidParameter("gain and interference vectors differ in length".into()));
    }
    let k = sum_g.len();
    if k == 0 {
        return Ok(ClusterRates { streams: 0, rates: vec![] });
    }
    let sinr = |idx: usize, s: usize| dist_sinr(sum_g[idx], antennas, n_aps, p_sum, s, interference[idx]);
    let s_star = best_stream_count(k, k.min(n_aps * antennas), sinr);
    let share = s_star as f64 / k as f64;
    Ok(ClusterRates { streams: s_star, rates: (0..k).map(|idx| share * link.of(sinr(idx, s_star))).collect() })
}

/// Distributed MU-MIMO rate per user, plus streams per cluster. Clusters
/// on a shared channel all transmit and interfere with each other.
pub fn distributed_rates(gains: &GainMatrix, aps: &[ApNode], clusters: &ClusterPlan, link: LinkRate) -> Result<(Vec<f64>, Vec<usize>)> {
    let mut rates = vec![0.0; gains.n_users()];
    let mut streams = Vec::with_capacity(clusters.clusters.len());
    for (c, cluster) in clusters.clusters.iter().enumerate() {
        let users = clusters.users_of(c);
        let interferers: Vec<usize> =
            clusters.co_channel(c).into_iter().flat_map(|o| clusters.clusters[o].ap_ids.iter().copied()).collect();
        let sum_g: Vec<f64> = users.iter().map(|&k| cluster.ap_ids.iter().map(|&i| gains.ap_ut(i, k)).sum()).collect();
        let interference: Vec<f64> =
            users.iter().map(|&k| interferers.iter().map(|&j| gains.ap_ut(j, k) * aps[j].power_linear()).sum()).collect();
        let antennas = cluster.ap_ids.iter().map(|&i| aps[i].antennas).min().unwrap_or(1);
        let cr = dist_mu_rate(&sum_g, &interference, antennas, cluster.ap_ids.len(), cluster.p_sum, link)?;
        for (&k, r) in users.iter().zip(cr.rates) {
            rates[k] = r;
        }
        streams.push(cr.streams);
    }
    Ok((rates, streams))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserRate {
    pub ut_id: usize,
    /// Serving AP, or cluster index for distributed MU-MIMO.
    pub serving: usize,
    pub bandwidth_hz: f64,
    pub spectral_efficiency: f64,
    pub throughput_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub technology: Technology,
    pub rate_mode: RateMode,
    pub overhead_discount: f64,
    pub users: Vec<UserRate>,
    pub summary: Summary,
}

/// Turns per-user spectral efficiencies into throughputs:
/// `T = W R` (Gaussian) or `T = W eta(W) R` (quantized), then scaled by
/// `overhead_discount`.
pub fn throughput_report(
    technology: Technology,
    rate_mode: RateMode,
    rates: &[f64],
    serving: &[usize],
    bandwidth_hz: &[f64],
    overhead_discount: f64,
    outage_threshold_bps: f64,
) -> Result<RateReport> {
    if rates.len() != serving.len() || rates.len() != bandwidth_hz.len() {
        return Err(Error::InvalidParameter("rate, serving and bandwidth vectors differ in length".into()));
    }
    if !(overhead_discount > 0.0 && overhead_discount <= 1.0) {
        return Err(Error::InvalidParameter(format!("overhead discount {overhead_discount} outside (0, 1]")));
    }
    let users: Vec<UserRate> = rates
        .iter()
        .zip(serving)
        .zip(bandwidth_hz)
        .enumerate()
        .map(|(k, ((&r, &s), &w))| {
            let eta = match rate_mode {
                RateMode::Gaussian => 1.0,
                RateMode::Quantized => ofdm_efficiency((w / 1e6).round() as u32)?,
            };
            Ok(UserRate { ut_id: k, serving: s, bandwidth_hz: w, spectral_efficiency: r, throughput_bps: w * eta * r * overhead_discount })
        })
        .collect::<Result<_>>()?;
    let t: Vec<f64> = users.iter().map(|u| u.throughput_bps).collect();
    let summary = summarize(&t, outage_threshold_bps)?;
    Ok(RateReport { technology, rate_mode, overhead_discount, users, summary })
}

impl RateReport {
    pub fn throughputs(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.throughput_bps).collect()
    }

    /// `F(r)`: fraction of users with throughput at most `r`.
    pub fn cdf_at(&self, r: f64) -> f64 {
        self.users.iter().filter(|u| u.throughput_bps <= r).count() as f64 / self.users.len() as f64
    }

    /// CDF evaluated at each distinct throughput, ascending.
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        let mut t = self.throughputs();
        t.sort_by(f64::total_cmp);
        let n = t.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in t.iter().enumerate() {
            let f = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = f,
                _ => out.push((v, f)),
            }
        }
        out
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["ut_id", "ap_or_cluster", "rate_bps_hz", "throughput_bps"])?;
        for u in &self.users {
            out.write_record([
                u.ut_id.to_string(),
                u.serving.to_string(),
                format!("{:.12e}", u.spectral_efficiency),
                format!("{:.12e}", u.throughput_bps),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_cdf_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["throughput_bps", "cdf"])?;
        for (t, f) in self.cdf() {
            out.write_record([format!("{t:.12e}"), format!("{f:.12e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csma::{CtmcMode, ModeSelection, DEFAULT_STATE_CAP};
    use crate::radio_plan::{Channelization, Cluster};
    use crate::scenario::Point;
    use proptest::prelude::*;

    static DEFAULT_MCS: std::sync::LazyLock<McsTable> = std::sync::LazyLock::new(McsTable::default);
    const GAUSS: fn() -> LinkRate<'static> = || LinkRate::new(RateMode::Gaussian, &DEFAULT_MCS);

    fn ap(id: usize, m: usize, power_db: f64) -> ApNode {
        ApNode { id, position: Point::new(id as f64, 0.0), antennas: m, power_db, sector: None }
    }

    fn assoc(sets: Vec<Vec<usize>>, n_users: usize) -> AssociationMap {
        let mut user_ap = vec![0; n_users];
        for (i, s) in sets.iter().enumerate() {
            for &k in s {
                user_ap[k] = i;
            }
        }
        AssociationMap { sets, user_ap, zero_rate: vec![], permutation_seed: 0 }
    }

    #[test]
    fn isolated_peak_rate() {
        let gains = GainMatrix::from_rows(vec![vec![1e-7, 2.5e-10, 0.0]], vec![vec![1.0]]).unwrap();
        let aps = [ap(0, 4, 90.0)];
        assert!((peak_rate_isolated(&gains, &aps, 0, 0) - 401f64.log2()).abs() < 1e-12);
        assert!((peak_rate_isolated(&gains, &aps, 0, 0) - 8.6479).abs() < 1e-3);
        assert!((peak_rate_isolated(&gains, &aps, 0, 1) - 1.0).abs() < 1e-12);
        assert_eq!(peak_rate_isolated(&gains, &aps, 0, 2), 0.0);
    }

    #[test]
    fn su_state_examples() {
        // AP 1's signal at user 0 equals AP 0's beamformed signal: SINR ~ 1.
        let gains = GainMatrix::from_rows(vec![vec![1e-7, 1e-7], vec![4e-7, 1e-9]], vec![vec![1.0; 2]; 2]).unwrap();
        let aps = [ap(0, 4, 90.0), ap(1, 4, 90.0)];
        let plan = ChannelPlan::single(Channelization::One80.channels()[0].clone(), 2);
        let a = assoc(vec![vec![0, 1], vec![]], 2);
        let net = Network { gains: &gains, aps: &aps, plan: &plan, assoc: &a };

        let alone = su_rate_state(&net, GAUSS(), &ApSet::from_ids(2, [0]));
        assert!((alone.rates[0] - 401f64.log2() / 2.0).abs() < 1e-12);
        assert!((alone.rates[0] - 4.3240).abs() < 1e-3);

        let both = su_rate_state(&net, GAUSS(), &ApSet::from_ids(2, [0, 1]));
        let sinr: f64 = 400.0 / 401.0;
        assert!((both.rates[0] - (1.0 + sinr).log2() / 2.0).abs() < 1e-12);
        assert!((both.rates[0] - 0.5).abs() < 2e-3);

        let off = su_rate_state(&net, GAUSS(), &ApSet::from_ids(2, [1]));
        assert_eq!(off.rates, vec![0.0, 0.0]);
        assert_eq!(off.streams, vec![0, 0]);
    }

    #[test]
    fn mu_sinr_examples() {
        assert!((mu_sinr(1e-7, 4, 1e9, 2, 0.0).unwrap() - 150.0).abs() < 1e-9);
        assert_eq!(mu_sinr(1e-7, 4, 1e9, 1, 3.0).unwrap(), su_sinr(1e-7, 4, 1e9, 3.0));
        assert!(mu_sinr(1e-7, 4, 1e9, 1, 1e300).unwrap() < 1e-290);
        assert!(mu_sinr(1e-7, 4, 1e9, 5, 0.0).is_err());
        assert!(mu_sinr(1e-7, 4, 1e9, 0, 0.0).is_err());
    }

    #[test]
    fn stream_choice_by_brute_force() {
        let sums: Vec<f64> = (1..=4).map(|s| s as f64 * (1.0 + mu_sinr(1e-7, 4, 1e9, s, 0.0).unwrap()).log2()).collect();
        let argmax = (0..4).max_by(|&a, &b| sums[a].total_cmp(&sums[b])).unwrap() + 1;
        assert_eq!(argmax, 4);
        let gains = GainMatrix::from_rows(vec![vec![1e-7; 4], vec![1e-9; 4]], vec![vec![1.0; 2]; 2]).unwrap();
        let aps = [ap(0, 4, 90.0), ap(1, 4, 90.0)];
        let plan = ChannelPlan::single(Channelization::One80.channels()[0].clone(), 2);
        let a = assoc(vec![vec![0, 1, 2, 3], vec![]], 4);
        let net = Network { gains: &gains, aps: &aps, plan: &plan, assoc: &a };
        let sr = mu_rate_state(&net, GAUSS(), &ApSet::from_ids(2, [0]));
        assert_eq!(sr.streams[0], 4);
        for r in &sr.rates {
            assert!((r - sums[3] / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn heavy_interference_reverts_to_single_stream() {
        let gains = GainMatrix::from_rows(vec![vec![1e-7; 4], vec![1e-3; 4]], vec![vec![1.0; 2]; 2]).unwrap();
        let aps = [ap(0, 4, 90.0), ap(1, 4, 90.0)];
        let plan = ChannelPlan::single(Channelization::One80.channels()[0].clone(), 2);
        let a = assoc(vec![vec![0, 1, 2, 3], vec![]], 4);
        let net = Network { gains: &gains, aps: &aps, plan: &plan, assoc: &a };
        assert_eq!(mu_rate_state(&net, GAUSS(), &ApSet::from_ids(2, [0, 1])).streams[0], 1);
    }

    #[test]
    fn single_user_mu_equals_su() {
        let gains = GainMatrix::from_rows(vec![vec![3e-8], vec![2e-9]], vec![vec![1.0; 2]; 2]).unwrap();
        let aps = [ap(0, 4, 90.0), ap(1, 4, 90.0)];
        let plan = ChannelPlan::single(Channelization::One80.channels()[0].clone(), 2);
        let a = assoc(vec![vec![0], vec![]], 1);
        let net = Network { gains: &gains, aps: &aps, plan: &plan, assoc: &a };
        let state = ApSet::from_ids(2, [0, 1]);
        assert_eq!(mu_rate_state(&net, GAUSS(), &state).rates, su_rate_state(&net, GAUSS(), &state).rates);
    }

    #[test]
    fn distributed_examples() {
        let r = dist_mu_rate(&[2e-7; 8], &[0.0; 8], 4, 2, 2e9, GAUSS()).unwrap();
        let direct = 0.5 * 251f64.log2();
        assert!((direct - 3.9855).abs() < 1e-3);
        let s4 = 0.5 * (1.0 + dist_sinr(2e-7, 4, 2, 2e9, 4, 0.0)).log2();
        assert!((s4 - direct).abs() < 1e-12);
        assert!(r.streams >= 4);

        let single = dist_mu_rate(&[3e-8], &[0.0], 4, 3, 3e9, GAUSS()).unwrap();
        assert_eq!(single.streams, 1);
        assert!((single.rates[0] - (1.0 + 4.0 * 3e-8 * 3e9f64).log2()).abs() < 1e-12);
    }

    #[test]
    fn distributed_interference_only_from_co_channel_clusters() {
        let gains = GainMatrix::from_rows(vec![vec![1e-7, 1e-9], vec![1e-9, 1e-7]], vec![vec![1.0; 2]; 2]).unwrap();
        let aps = [ap(0, 4, 90.0), ap(1, 4, 90.0)];
        let clusters = |channels: Vec<crate::radio_plan::Channel>, ch: [usize; 2]| ClusterPlan {
            channels,
            clusters: vec![
                Cluster { ap_ids: vec![0], channel: ch[0], p_sum: 1e9 },
                Cluster { ap_ids: vec![1], channel: ch[1], p_sum: 1e9 },
            ],
            user_cluster: vec![0, 1],
        };
        let split = distributed_rates(&gains, &aps, &clusters(Channelization::Two40.channels(), [0, 1]), GAUSS()).unwrap();
        assert!((split.0[0] - 401f64.log2()).abs() < 1e-12);
        let shared = distributed_rates(&gains, &aps, &clusters(Channelization::One80.channels(), [0, 0]), GAUSS()).unwrap();
        assert!((shared.0[0] - (1.0 + 400.0 / 2.0f64).log2()).abs() < 1e-12);
    }

    #[test]
    fn averaging() {
        let one = StateRates { rates: vec![3.0, 4.0], streams: vec![1] };
        assert_eq!(average_over_ctmc(&[one.clone()], &[1.0]).unwrap(), vec![3.0, 4.0]);
        let a = StateRates { rates: vec![2.0], streams: vec![1] };
        let b = StateRates { rates: vec![0.0], streams: vec![0] };
        assert_eq!(average_over_ctmc(&[a, b], &[0.5, 0.5]).unwrap(), vec![1.0]);
        assert!(matches!(average_over_ctmc(&[one], &[0.5, 0.5]), Err(Error::MismatchedStates { rates: 1, states: 2 })));
    }

    fn prism_network() -> (GainMatrix, Vec<ApNode>, ChannelPlan, AssociationMap) {
        let gains = GainMatrix::from_rows((0..6).map(|i| vec![if i % 2 == 0 { 1e-7 } else { 2e-8 }; 6]).collect(), vec![vec![1.0; 6]; 6])
            .unwrap();
        let aps: Vec<ApNode> = (0..6).map(|i| ap(i, 4, 90.0)).collect();
        let plan = ChannelPlan::single(Channelization::One80.channels()[0].clone(), 6);
        let a = assoc((0..6).map(|i| vec![i]).collect(), 6);
        (gains, aps, plan, a)
    }

    #[test]
    fn thirteen_state_hand_sum() {
        use crate::csma::ContentionGraph;
        let (gains, aps, plan, a) = prism_network();
        let net = Network { gains: &gains, aps: &aps, plan: &plan, assoc: &a };
        let edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3), (1, 4), (2, 5)];
        let g = ContentionGraph::from_edges(6, vec![0; 6], &edges);
        let rho = 10.0;
        let model = CtmcModel::build(&g, ModeSelection::AllIndependentSets, rho, DEFAULT_STATE_CAP).unwrap();
        let avg = ctmc_average_rates(&net, GAUSS(), &model, Technology::SuBeamforming).unwrap();
        // User 0 (AP 0) transmits alone or alongside one of APs 4 and 5.
        let z = 1.0 + 6.0 * rho + 6.0 * rho * rho;
        let p: f64 = 1e9;
        let alone = (1.0 + 4.0 * 1e-7 * p).log2();
        let with4 = (1.0 + 4.0 * 1e-7 * p / (1.0 + 1e-7 * p)).log2();
        let with5 = (1.0 + 4.0 * 1e-7 * p / (1.0 + 2e-8 * p)).log2();
        let hand = (rho * alone + rho * rho * (with4 + with5)) / z;
        assert!((avg[0] - hand).abs() < 1e-12 * hand);

        let (states, pi) = model.joint(DEFAULT_STATE_CAP).unwrap();
        let flat: Vec<StateRates> = states.iter().map(|s| su_rate_state(&net, GAUSS(), s)).collect();
        let reference = average_over_ctmc(&flat, &pi).unwrap();
        for (x, y) in avg.iter().zip(&reference) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn distributed_is_not_a_csma_technology() {
        let (gains, aps, plan, a) = prism_network();
        let net = Network { gains: &gains, aps: &aps, plan: &plan, assoc: &a };
        let model = CtmcModel::from_states(6, vec![ApSet::from_ids(6, 0..6)], 1.0, CtmcMode::NoCsma).unwrap();
        assert!(ctmc_average_rates(&net, GAUSS(), &model, Technology::DistributedMuMimo).is_err());
    }

    #[test]
    fn report_cdf_examples() {
        let r = throughput_report(
            Technology::SuBeamforming,
            RateMode::Gaussian,
            &[1.0, 2.0, 2.0, 4.0],
            &[0; 4],
            &[20e6; 4],
            1.0,
            0.0,
        )
        .unwrap();
        assert_eq!(r.cdf_at(40e6), 0.75);
        assert_eq!(r.cdf(), vec![(20e6, 0.25), (40e6, 0.75), (80e6, 1.0)]);

        let single = throughput_report(Technology::SuBeamforming, RateMode::Gaussian, &[3.0], &[0], &[20e6], 1.0, 0.0).unwrap();
        assert_eq!(single.cdf_at(60e6 - 1.0), 0.0);
        assert_eq!(single.cdf_at(60e6), 1.0);

        let q = throughput_report(Technology::SuBeamforming, RateMode::Quantized, &[3.0], &[0], &[20e6], 1.0, 0.0).unwrap();
        assert!((q.users[0].throughput_bps - 20e6 * 0.65 * 3.0).abs() < 1e-6);
        assert!(throughput_report(Technology::SuBeamforming, RateMode::Gaussian, &[3.0], &[0], &[20e6], 0.0, 0.0).is_err());
    }

    #[test]
    fn quantized_rate_below_floor_is_zero() {
        let link = LinkRate::new(RateMode::Quantized, &DEFAULT_MCS);
        assert_eq!(link.of(10f64.powf(0.1)), 0.0);
        assert_eq!(link.of(10f64.powf(1.6)), 3.0);
    }

    #[test]
    fn quantization_point() {
        use crate::csma::ContentionGraph;
        // User 0 on AP 0 sees 26 dB alone and about 16 dB with AP 1 active.
        let gains = GainMatrix::from_rows(vec![vec![10f64.powf(-6.4) / 4.0, 0.0], vec![1e-8, 1e-7]], vec![vec![1.0; 2]; 2]).unwrap();
        let aps = [ap(0, 4, 90.0), ap(1, 4, 90.0)];
        let plan = ChannelPlan::single(Channelization::One80.channels()[0].clone(), 2);
        let a = assoc(vec![vec![0], vec![1]], 2);
        let net = Network { gains: &gains, aps: &aps, plan: &plan, assoc: &a };
        let g = ContentionGraph::from_edges(2, vec![0, 0], &[]);
        let rho = 2.0;
        let model = CtmcModel::build(&g, ModeSelection::AllIndependentSets, rho, DEFAULT_STATE_CAP).unwrap();
        let z = (1.0 + rho) * (1.0 + rho);
        let (p_alone, p_both) = (rho / z, rho * rho / z);
        let x_alone = 10f64.powf(2.6);
        let x_both = x_alone / 11.0;

        let mut link = LinkRate::new(RateMode::Quantized, &DEFAULT_MCS);
        let per_state = ctmc_average_rates(&net, link, &model, Technology::SuBeamforming).unwrap();
        let expected = p_alone * DEFAULT_MCS.quantize_linear(x_alone) + p_both * DEFAULT_MCS.quantize_linear(x_both);
        assert!((per_state[0] - expected).abs() < 1e-12);
        assert!((per_state[0] - (p_alone * 5.0 + p_both * 3.0)).abs() < 1e-12);

        link.point = QuantizationPoint::AfterAveraging;
        let after = ctmc_average_rates(&net, link, &model, Technology::SuBeamforming).unwrap();
        let air = p_alone + p_both;
        let mean_sinr = (p_alone * x_alone + p_both * x_both) / air;
        assert!((after[0] - air * DEFAULT_MCS.quantize_linear(mean_sinr)).abs() < 1e-12);
        assert!(after[0] != per_state[0]);
    }

    fn random_network(n_aps: usize, n_users: usize, seed: u64) -> (GainMatrix, Vec<ApNode>, ChannelPlan, AssociationMap) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let ut: Vec<Vec<f64>> =
            (0..n_aps).map(|_| (0..n_users).map(|_| 10f64.powf(-rng.random_range(50.0..110.0) / 10.0)).collect()).collect();
        let gains = GainMatrix::from_rows(ut, vec![vec![1.0; n_aps]; n_aps]).unwrap();
        let aps: Vec<ApNode> = (0..n_aps).map(|i| ap(i, rng.random_range(1..=8), rng.random_range(60.0..100.0))).collect();
        let mut plan = ChannelPlan::single(Channelization::Two40.channels()[0].clone(), n_aps);
        plan.channels = Channelization::Two40.channels();
        plan.ap_channel = (0..n_aps).map(|_| rng.random_range(0..2)).collect();
        let mut sets = vec![Vec::new(); n_aps];
        for k in 0..n_users {
            sets[rng.random_range(0..n_aps)].push(k);
        }
        (gains, aps, plan, assoc(sets, n_users))
    }

    proptest! {
        #[test]
        fn extra_interferer_never_raises_sinr(seed in any::<u64>(), mask in any::<u16>(), extra in 0usize..6) {
            let (gains, aps, plan, a) = random_network(6, 12, seed);
            let net = Network { gains: &gains, aps: &aps, plan: &plan, assoc: &a };
            let before = ApSet::from_ids(6, (0..6).filter(|i| mask & (1 << i) != 0));
            let mut after = before.clone();
            after.insert(extra);
            for k in 0..12 {
                let i = a.user_ap[k];
                if i == extra || !before.contains(i) { continue; }
                let s0 = su_sinr(gains.ap_ut(i, k), aps[i].antennas, aps[i].power_linear(), state_interference(&net, &before, i, k));
                let s1 = su_sinr(gains.ap_ut(i, k), aps[i].antennas, aps[i].power_linear(), state_interference(&net, &after, i, k));
                prop_assert!(s1 <= s0);
            }
        }

        #[test]
        fn rates_vanish_for_silent_aps(seed in any::<u64>(), mask in any::<u16>()) {
            let (gains, aps, plan, a) = random_network(6, 12, seed);
            let net = Network { gains: &gains, aps: &aps, plan: &plan, assoc: &a };
            let state = ApSet::from_ids(6, (0..6).filter(|i| mask & (1 << i) != 0));
            for sr in [su_rate_state(&net, GAUSS(), &state), mu_rate_state(&net, GAUSS(), &state)] {
                for k in 0..12 {
                    prop_assert!(sr.rates[k] >= 0.0);
                    if !state.contains(a.user_ap[k]) {
                        prop_assert_eq!(sr.rates[k], 0.0);
                    }
                }
            }
        }

        #[test]
        fn averaging_is_linear(rates in proptest::collection::vec(0f64..10.0, 6), alpha in 0f64..5.0) {
            let states: Vec<StateRates> = rates.chunks(2).map(|c| StateRates { rates: c.to_vec(), streams: vec![] }).collect();
            let scaled: Vec<StateRates> =
                states.iter().map(|s| StateRates { rates: s.rates.iter().map(|r| alpha * r).collect(), streams: vec![] }).collect();
            let pi = [0.2, 0.3, 0.5];
            let a = average_over_ctmc(&states, &pi).unwrap();
            let b = average_over_ctmc(&scaled, &pi).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((alpha * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn cdf_contract(t in proptest::collection::vec(0f64..20.0, 1..60)) {
            let n = t.len();
            let r = throughput_report(Technology::SuBeamforming, RateMode::Gaussian, &t, &vec![0; n], &vec![20e6; n], 1.0, 1e6).unwrap();
            let cdf = r.cdf();
            prop_assert!(cdf.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
            prop_assert_eq!(cdf.last().unwrap().1, 1.0);
            for &(x, f) in &cdf {
                prop_assert_eq!(r.cdf_at(x), f);
            }
        }
    }
}

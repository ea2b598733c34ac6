//! Monte Carlo fading simulator used to validate the deterministic rates.
//!
//! Each realization draws explicit CN(0, 1) small-scale fading on top of the
//! large-scale gains and evaluates exact beamforming SINRs. Realizations use
//! their own RNG stream and are reduced in a fixed order, so the report does
//! not depend on the thread count.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csma::{ApSet, ChannelChain, CtmcModel};
use crate::error::{Error, Result};
use crate::phy::{best_stream_count, dist_sinr, mu_stream_count, Network};
use crate::propagation::{fill_fading, GainMatrix};
use crate::radio_plan::ClusterPlan;
use crate::rng::{stream_rng, streams};
use crate::scenario::ApNode;

/// Chains with at most this many states are enumerated and weighted by pi;
/// larger chains are sampled from pi once per realization.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 10_000;
const REALIZATION_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub n_realizations: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub subcarriers: usize,
    #[serde(default = "enumeration_limit")]
    pub enumeration_limit: usize,
}

fn one() -> usize {
    1
}

fn enumeration_limit() -> usize {
    DEFAULT_ENUMERATION_LIMIT
}

impl OracleConfig {
    pub fn new(n_realizations: usize, seed: u64) -> Self {
        OracleConfig { n_realizations, seed, subcarriers: 1, enumeration_limit: DEFAULT_ENUMERATION_LIMIT }
    }

    fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 || self.subcarriers == 0 {
            return Err(Error::InvalidParameter("oracle needs at least one realization and one subcarrier".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub n_realizations: usize,
    /// Rank-deficient channel draws that were redrawn.
    pub resamples: u64,
}

impl OracleReport {
    pub fn mean_rate(&self) -> f64 {
        self.mean.iter().sum::<f64>() / self.mean.len() as f64
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["ut_id", "mean_rate_bps_hz", "std_error"])?;
        for (k, (m, s)) in self.mean.iter().zip(&self.std_error).enumerate() {
            out.write_record([k.to_string(), format!("{m:.12e}"), format!("{s:.12e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Side-by-side deterministic vs Monte Carlo rates; relative error is
/// empty when the deterministic rate is zero.
pub fn write_comparison_csv<W: std::io::Write>(deterministic: &[f64], mc: &OracleReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["ut_id", "deterministic", "monte_carlo", "rel_error"])?;
    for (k, (d, m)) in deterministic.iter().zip(&mc.mean).enumerate() {
        let rel = if *d > 0.0 { format!("{:.12e}", (m - d) / d) } else { String::new() };
        out.write_record([k.to_string(), format!("{d:.12e}"), format!("{m:.12e}"), rel])?;
    }
    out.flush()?;
    Ok(())
}

fn cn_vector(m: usize, scale: f64, rng: &mut ChaCha8Rng) -> DVector<Complex64> {
    let mut buf = Vec::with_capacity(m);
    fill_fading(&mut buf, m, rng);
    DVector::from_iterator(m, buf.into_iter().map(|z| z * scale))
}

/// `xi_k = 1 / [(H^H H)^-1]_kk`, or `None` when `H^H H` is singular.
pub fn zfbf_effective_gains(h: &DMatrix<Complex64>) -> Option<Vec<f64>> {
    zf_precoder(h).map(|(_, xi)| xi)
}

/// Column-normalized zero-forcing precoder `V` and effective gains `xi`.
/// `V = H (H^H H)^-1 diag(sqrt(xi))`, so `|v_k^H h_k|^2 = xi_k` and
/// `v_j^H h_k = 0` for `j != k`.
pub fn zf_precoder(h: &DMatrix<Complex64>) -> Option<(DMatrix<Complex64>, Vec<f64>)> {
    let gram = h.adjoint() * h;
    let inv = gram.cholesky()?.inverse();
    let xi: Vec<f64> = (0..h.ncols()).map(|k| 1.0 / inv[(k, k)].re).collect();
    if xi.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return None;
    }
    let mut v = h * inv;
    for (k, x) in xi.iter().enumerate() {
        v.column_mut(k).scale_mut(x.sqrt());
    }
    Some((v, xi))
}

fn draw_precoder(
    columns: impl Fn(&mut ChaCha8Rng) -> DMatrix<Complex64>,
    rng: &mut ChaCha8Rng,
    resamples: &mut u64,
) -> (DMatrix<Complex64>, Vec<f64>) {
    loop {
        if let Some(p) = zf_precoder(&columns(rng)) {
            return p;
        }
        *resamples += 1;
    }
}

struct Accumulator {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    resamples: u64,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Accumulator { sum: vec![0.0; n], sum_sq: vec![0.0; n], resamples: 0 }
    }

    fn merge(mut self, other: &Accumulator) -> Self {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.resamples += other.resamples;
        self
    }

    fn finish(self, n: usize) -> OracleReport {
        let nf = n as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / nf).collect();
        let std_error = self
            .sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| if n > 1 { ((sq / nf - m * m).max(0.0) * nf / (nf - 1.0) / nf).sqrt() } else { 0.0 })
            .collect();
        OracleReport { mean, std_error, n_realizations: n, resamples: self.resamples }
    }
}

/// Runs `realization(rng, sample, resamples)` for every realization and
/// reduces the per-user samples in realization order.
fn run_realizations<F>(n_users: usize, cfg: &OracleConfig, realization: F) -> Result<OracleReport>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64], &mut u64) + Sync,
{
    cfg.validate()?;
    let starts: Vec<usize> = (0..cfg.n_realizations).step_by(REALIZATION_CHUNK).collect();
    let partials: Vec<Accumulator> = starts
        .par_iter()
        .map(|&start| {
            let mut acc = Accumulator::new(n_users);
            let mut sample = vec![0.0; n_users];
            for r in start..(start + REALIZATION_CHUNK).min(cfg.n_realizations) {
                let mut rng = stream_rng(cfg.seed, streams::REALIZATION_BASE + r as u64);
                sample.iter_mut().for_each(|x| *x = 0.0);
                for _ in 0..cfg.subcarriers {
                    realization(&mut rng, &mut sample, &mut acc.resamples);
                }
                for (k, x) in sample.iter().enumerate() {
                    let x = x / cfg.subcarriers as f64;
                    acc.sum[k] += x;
                    acc.sum_sq[k] += x * x;
                }
            }
            acc
        })
        .collect();
    let total = partials.iter().fold(Accumulator::new(n_users), Accumulator::merge);
    Ok(total.finish(cfg.n_realizations))
}

/// States of `chain` to evaluate in one realization, with their weights.
fn chain_states<'a>(chain: &'a ChannelChain, limit: usize, rng: &mut ChaCha8Rng) -> Vec<(&'a ApSet, f64)> {
    if chain.states.len() <= limit {
        return chain.states.iter().zip(chain.pi.iter().copied()).collect();
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (s, p) in chain.states.iter().zip(&chain.pi) {
        acc += p;
        if u < acc {
            return vec![(s, 1.0)];
        }
    }
    vec![(chain.states.last().expect("nonempty chain"), 1.0)]
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Beamforming {
    Conjugate,
    ZeroForcing,
}

/// Transmit precoder of an AP in one state: unit-norm columns and the power
/// per column.
struct Transmitter {
    ap: usize,
    precoder: DMatrix<Complex64>,
    power_per_stream: f64,
}

fn interference_at(tx: &[Transmitter], serving: usize, ut: usize, gains: &GainMatrix, rng: &mut ChaCha8Rng) -> f64 {
    tx.iter()
        .filter(|t| t.ap != serving)
        .map(|t| {
            let h = cn_vector(t.precoder.nrows(), 1.0, rng);
            let proj = t.precoder.adjoint() * h;
            gains.ap_ut(t.ap, ut) * t.power_per_stream * proj.norm_squared()
        })
        .sum()
}

fn csma_realization<'a>(net: &'a Network<'a>, model: &'a CtmcModel, cfg: &OracleConfig, bf: Beamforming) -> impl Fn(&mut ChaCha8Rng, &mut [f64], &mut u64) + Sync + 'a {
    let cfg = *cfg;
    move |rng, sample, resamples| {
        for chain in &model.chains {
            for (state, weight) in chain_states(chain, cfg.enumeration_limit, rng) {
                state_sample(net, state, weight, bf, rng, sample, resamples);
            }
        }
    }
}

fn state_sample(
    net: &Network,
    state: &ApSet,
    weight: f64,
    bf: Beamforming,
    rng: &mut ChaCha8Rng,
    sample: &mut [f64],
    resamples: &mut u64,
) {
    let active: Vec<usize> = state.iter().collect();
    let streams: Vec<usize> = active
        .iter()
        .map(|&i| match bf {
            Beamforming::Conjugate => 1,
            Beamforming::ZeroForcing => mu_stream_count(net, state, i).max(1),
        })
        .collect();

    // Each AP's precoder towards a random group of its own users; the
    // precoder alone determines the interference it radiates.
    let tx: Vec<Transmitter> = active
        .iter()
        .zip(&streams)
        .map(|(&i, &s)| {
            let m = net.aps[i].antennas;
            let precoder = draw_precoder(|r| DMatrix::from_fn(m, s, |_, _| cn_scalar(r)), rng, resamples).0;
            Transmitter { ap: i, precoder, power_per_stream: net.aps[i].power_linear() / s as f64 }
        })
        .collect();

    for (&i, &s) in active.iter().zip(&streams) {
        let users = &net.assoc.sets[i];
        if users.is_empty() {
            continue;
        }
        let m = net.aps[i].antennas;
        let p_stream = net.aps[i].power_linear() / s as f64;
        let share = s as f64 / users.len() as f64;
        let mut order = users.clone();
        order.shuffle(rng);
        for group in credited_groups(&order, s, rng) {
            let (members, credited) = group;
            let (_, xi) = draw_precoder(|r| DMatrix::from_fn(m, members.len(), |_, _| cn_scalar(r)), rng, resamples);
            for (idx, &k) in members.iter().enumerate().take(credited) {
                let interference = interference_at(&tx, i, k, net.gains, rng);
                let sinr = net.gains.ap_ut(i, k) * p_stream * xi[idx] / (1.0 + interference);
                sample[k] += weight * share * (1.0 + sinr).log2();
            }
        }
    }
}

fn cn_scalar(rng: &mut ChaCha8Rng) -> Complex64 {
    let mut buf = Vec::with_capacity(1);
    fill_fading(&mut buf, 1, rng);
    buf[0]
}

/// Splits a shuffled user list into co-scheduled groups of `s`. A short
/// final group is padded with other random users; only the first
/// `credited` members of each group are credited so every user is credited
/// exactly once.
fn credited_groups(order: &[usize], s: usize, rng: &mut ChaCha8Rng) -> Vec<(Vec<usize>, usize)> {
    let s = s.min(order.len()).max(1);
    order
        .chunks(s)
        .map(|chunk| {
            let mut members = chunk.to_vec();
            let credited = members.len();
            if members.len() < s {
                let mut others: Vec<usize> = order.iter().copied().filter(|k| !chunk.contains(k)).collect();
                others.shuffle(rng);
                members.extend(others.into_iter().take(s - credited));
            }
            (members, credited)
        })
        .collect()
}

/// Single-user conjugate beamforming: `SINR = g P ||h||^2 / (1 + I)`, with
/// each interferer beamforming to one of its own users.
pub fn mc_su_rate(net: &Network, model: &CtmcModel, cfg: &OracleConfig) -> Result<OracleReport> {
    run_realizations(net.gains.n_users(), cfg, csma_realization(net, model, cfg, Beamforming::Conjugate))
}

/// Concentrated MU-MIMO with ZFBF to random groups of `S*` users, equal
/// power `P/S*` per stream.
pub fn mc_mu_rate(net: &Network, model: &CtmcModel, cfg: &OracleConfig) -> Result<OracleReport> {
    run_realizations(net.gains.n_users(), cfg, csma_realization(net, model, cfg, Beamforming::ZeroForcing))
}

/// Distributed MU-MIMO: ZFBF over the composite `B M x S` channel with
/// `sqrt(g)`-scaled blocks; co-channel clusters interfere through their own
/// precoders.
pub fn mc_dist_rate(gains: &GainMatrix, aps: &[ApNode], clusters: &ClusterPlan, cfg: &OracleConfig) -> Result<OracleReport> {
    let n_users = gains.n_users();
    let users_of: Vec<Vec<usize>> = (0..clusters.clusters.len()).map(|c| clusters.users_of(c)).collect();
    let antennas: Vec<usize> = clusters.clusters.iter().map(|c| c.ap_ids.iter().map(|&i| aps[i].antennas).min().unwrap_or(1)).collect();
    let streams: Vec<usize> = clusters
        .clusters
        .iter()
        .enumerate()
        .map(|(c, cluster)| {
            let users = &users_of[c];
            if users.is_empty() {
                return 0;
            }
            let co: Vec<usize> = clusters.co_channel(c).into_iter().flat_map(|o| clusters.clusters[o].ap_ids.clone()).collect();
            let sum_g: Vec<f64> = users.iter().map(|&k| cluster.ap_ids.iter().map(|&i| gains.ap_ut(i, k)).sum()).collect();
            let intf: Vec<f64> = users.iter().map(|&k| co.iter().map(|&j| gains.ap_ut(j, k) * aps[j].power_linear()).sum()).collect();
            let b = cluster.ap_ids.len();
            best_stream_count(users.len(), users.len().min(b * antennas[c]), |idx, s| {
                dist_sinr(sum_g[idx], antennas[c], b, cluster.p_sum, s, intf[idx])
            })
        })
        .collect();

    // Composite channel column from cluster `c` to user `k`.
    let composite = move |c: usize, k: usize, rng: &mut ChaCha8Rng| -> DVector<Complex64> {
        let m = antennas[c];
        let blocks: Vec<Complex64> = clusters.clusters[c]
            .ap_ids
            .iter()
            .flat_map(|&i| cn_vector(m, gains.ap_ut(i, k).sqrt(), rng).iter().copied().collect::<Vec<_>>())
            .collect();
        DVector::from_vec(blocks)
    };

    run_realizations(n_users, cfg, move |rng, sample, resamples| {
        let tx: Vec<Option<DMatrix<Complex64>>> = clusters
            .clusters
            .iter()
            .enumerate()
            .map(|(c, _)| {
                let users = &users_of[c];
                if streams[c] == 0 {
                    return None;
                }
                let group: Vec<usize> = users.choose_multiple(rng, streams[c]).copied().collect();
                let (v, _) = draw_precoder(
                    |r| {
                        let cols: Vec<DVector<Complex64>> = group.iter().map(|&k| composite(c, k, r)).collect();
                        DMatrix::from_columns(&cols)
                    },
                    rng,
                    resamples,
                );
                Some(v)
            })
            .collect();
        for (c, cluster) in clusters.clusters.iter().enumerate() {
            let users = &users_of[c];
            let s = streams[c];
            if s == 0 {
                continue;
            }
            let share = s as f64 / users.len() as f64;
            let mut order = users.clone();
            order.shuffle(rng);
            for (members, credited) in credited_groups(&order, s, rng) {
                let (_, lambda) = draw_precoder(
                    |r| {
                        let cols: Vec<DVector<Complex64>> = members.iter().map(|&k| composite(c, k, r)).collect();
                        DMatrix::from_columns(&cols)
                    },
                    rng,
                    resamples,
                );
                for (idx, &k) in members.iter().enumerate().take(credited) {
                    let interference: f64 = clusters
                        .co_channel(c)
                        .into_iter()
                        .filter_map(|o| tx[o].as_ref().map(|v| (o, v)))
                        .map(|(o, v)| {
                            let h = composite(o, k, rng);
                            clusters.clusters[o].p_sum / streams[o] as f64 * (v.adjoint() * h).norm_squared()
                        })
                        .sum();
                    let sinr = lambda[idx] * cluster.p_sum / s as f64 / (1.0 + interference);
                    sample[k] += share * (1.0 + sinr).log2();
                }
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csma::{CtmcMode, ModeSelection, ContentionGraph, DEFAULT_STATE_CAP};
    use crate::metrics::McsTable;
    use crate::phy::{ctmc_average_rates, distributed_rates, LinkRate, RateMode, Technology};
    use crate::radio_plan::{AssociationMap, ChannelPlan, Channelization, Cluster};
    use crate::scenario::Point;

    fn ap(id: usize, m: usize, power_db: f64) -> ApNode {
        ApNode { id, position: Point::new(id as f64, 0.0), antennas: m, power_db, sector: None }
    }

    fn isolated(m: usize, n_users: usize, g: f64, power_db: f64) -> (GainMatrix, Vec<ApNode>, ChannelPlan, AssociationMap, CtmcModel) {
        let gains = GainMatrix::from_rows(vec![vec![g; n_users]], vec![vec![1.0]]).unwrap();
        let aps = vec![ap(0, m, power_db)];
        let plan = ChannelPlan::single(Channelization::One80.channels()[0].clone(), 1);
        let assoc = AssociationMap { sets: vec![(0..n_users).collect()], user_ap: vec![0; n_users], zero_rate: vec![], permutation_seed: 0 };
        let model = CtmcModel::from_states(1, vec![ApSet::from_ids(1, [0])], 1.0, CtmcMode::NoCsma).unwrap();
        (gains, aps, plan, assoc, model)
    }

    fn random_h(m: usize, s: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = stream_rng(seed, 0);
        DMatrix::from_fn(m, s, |_, _| cn_scalar(&mut rng))
    }

    #[test]
    fn single_column_gain_is_norm() {
        let h = random_h(5, 1, 1);
        let xi = zfbf_effective_gains(&h).unwrap();
        assert!((xi[0] - h.norm_squared()).abs() < 1e-12 * xi[0]);
    }

    #[test]
    fn orthogonal_columns() {
        let mut h = DMatrix::<Complex64>::zeros(4, 2);
        h[(0, 0)] = Complex64::new(2.0, 0.0);
        h[(1, 1)] = Complex64::new(0.0, 3.0);
        let xi = zfbf_effective_gains(&h).unwrap();
        assert!((xi[0] - 4.0).abs() < 1e-12 && (xi[1] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn singular_channel_rejected() {
        let mut h = random_h(4, 2, 2);
        let c0 = h.column(0).into_owned();
        h.set_column(1, &c0);
        assert!(zfbf_effective_gains(&h).is_none() || zfbf_effective_gains(&h).unwrap().iter().any(|x| *x < 1e-8));
    }

    #[test]
    fn zero_forcing_nulls_intra_cell_interference() {
        let h = random_h(6, 4, 3);
        let (v, xi) = zf_precoder(&h).unwrap();
        for j in 0..4 {
            assert!((v.column(j).norm() - 1.0).abs() < 1e-10);
            for k in 0..4 {
                let p = (v.column(j).adjoint() * h.column(k))[(0, 0)].norm_sqr();
                if j == k {
                    assert!((p - xi[k]).abs() < 1e-10 * xi[k]);
                } else {
                    assert!(p < 1e-10);
                }
            }
        }
    }

    #[test]
    fn mean_xi_matches_m_minus_s_plus_one() {
        for (m, s) in [(4, 2), (8, 4)] {
            let mut rng = stream_rng(9, 1);
            let n = 4000;
            let total: f64 = (0..n).map(|_| zfbf_effective_gains(&DMatrix::from_fn(m, s, |_, _| cn_scalar(&mut rng))).unwrap()[0]).sum();
            let mean = total / n as f64;
            let target = (m - s + 1) as f64;
            assert!((mean - target).abs() < 0.05 * target, "M={m} S={s}: {mean}");
        }
    }

    /// `E[log2(1 + a X)]` for `X ~ Exp(1)` by Simpson's rule on `[0, 60]`.
    fn exp_capacity(a: f64) -> f64 {
        let n = 200_000;
        let h = 60.0 / n as f64;
        let f = |x: f64| (1.0 + a * x).log2() * (-x).exp();
        let mut s = f(0.0) + f(60.0);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn single_antenna_matches_quadrature() {
        let (gains, aps, plan, assoc, model) = isolated(1, 1, 1e-8, 90.0);
        let net = Network { gains: &gains, aps: &aps, plan: &plan, assoc: &assoc };
        let report = mc_su_rate(&net, &model, &OracleConfig::new(20_000, 5)).unwrap();
        let exact = exp_capacity(10.0);
        assert!((report.mean[0] - exact).abs() < 4.0 * report.std_error[0], "{} vs {exact}", report.mean[0]);
    }

    #[test]
    fn zero_power_gives_zero_rate() {
        let (gains, mut aps, plan, assoc, model) = isolated(4, 3, 1e-8, 90.0);
        aps[0].power_db = f64::NEG_INFINITY;
        let net = Network { gains: &gains, aps: &aps, plan: &plan, assoc: &assoc };
        let report = mc_su_rate(&net, &model, &OracleConfig::new(50, 5)).unwrap();
        assert!(report.mean.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn ten_antennas_converge() {
        let (gains, aps, plan, assoc, model) = isolated(10, 1, 1e-7, 90.0);
        let net = Network { gains: &gains, aps: &aps, plan: &plan, assoc: &assoc };
        let report = mc_su_rate(&net, &model, &OracleConfig::new(4000, 7)).unwrap();
        let det = (1.0 + 1e-7 * 10.0 * 1e9f64).log2();
        assert!((report.mean[0] - det).abs() < 0.03 * det);
    }

    #[test]
    fn mu_two_streams_converge() {
        let (gains, aps, plan, assoc, model) = isolated(10, 2, 1e-7, 90.0);
        let net = Network { gains: &gains, aps: &aps, plan: &plan, assoc: &assoc };
        let mcs = McsTable::default();
        let link = LinkRate::new(RateMode::Gaussian, &mcs);
        let det = ctmc_average_rates(&net, link, &model, Technology::ConcentratedMuMimo).unwrap();
        assert_eq!(mu_stream_count(&net, &model.chains[0].states[0], 0), 2);
        let report = mc_mu_rate(&net, &model, &OracleConfig::new(4000, 11)).unwrap();
        for k in 0..2 {
            assert!((report.mean[k] - det[k]).abs() < 0.05 * det[k], "{} vs {}", report.mean[k], det[k]);
        }
    }

    #[test]
    fn distributed_symmetric_converges() {
        let n_users = 8;
        let gains = GainMatrix::from_rows(vec![vec![2e-8; n_users]; 5], vec![vec![1.0; 5]; 5]).unwrap();
        let aps: Vec<ApNode> = (0..5).map(|i| ap(i, 4, 90.0)).collect();
        let clusters = ClusterPlan {
            channels: Channelization::One80.channels(),
            clusters: vec![Cluster { ap_ids: (0..5).collect(), channel: 0, p_sum: 5e9 }],
            user_cluster: vec![0; n_users],
        };
        let mcs = McsTable::default();
        let link = LinkRate::new(RateMode::Gaussian, &mcs);
        let (det, streams) = distributed_rates(&gains, &aps, &clusters, link).unwrap();
        assert!(streams[0] <= 8);
        let report = mc_dist_rate(&gains, &aps, &clusters, &OracleConfig::new(2000, 13)).unwrap();
        for k in 0..n_users {
            assert!((report.mean[k] - det[k]).abs() < 0.10 * det[k], "{} vs {}", report.mean[k], det[k]);
        }
    }

    #[test]
    fn full_square_composite_is_full_rank() {
        let mut rng = stream_rng(4, 4);
        for _ in 0..200 {
            let h = DMatrix::from_fn(8, 8, |_, _| cn_scalar(&mut rng));
            assert!(zfbf_effective_gains(&h).unwrap().iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let edges = [(0, 1)];
        let g = ContentionGraph::from_edges(3, vec![0; 3], &edges);
        let model = CtmcModel::build(&g, ModeSelection::AllIndependentSets, 10.0, DEFAULT_STATE_CAP).unwrap();
        let gains = GainMatrix::from_rows(vec![vec![1e-7, 1e-9, 1e-9], vec![1e-9, 1e-7, 1e-9], vec![1e-9, 1e-9, 1e-7]], vec![vec![1.0; 3]; 3])
            .unwrap();
        let aps: Vec<ApNode> = (0..3).map(|i| ap(i, 4, 90.0)).collect();
        let plan = ChannelPlan::single(Channelization::One80.channels()[0].clone(), 3);
        let assoc = AssociationMap { sets: vec![vec![0], vec![1], vec![2]], user_ap: vec![0, 1, 2], zero_rate: vec![], permutation_seed: 0 };
        let net = Network { gains: &gains, aps: &aps, plan: &plan, assoc: &assoc };
        let cfg = OracleConfig::new(300, 21);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| mc_mu_rate(&net, &model, &cfg).unwrap());
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| mc_mu_rate(&net, &model, &cfg).unwrap());
        assert_eq!(one, four);
        assert!(one.mean.iter().chain(&one.std_error).all(|x| x.is_finite() && *x >= 0.0));
    }

    #[test]
    fn interference_free_when_alone() {
        let gains = GainMatrix::from_rows(vec![vec![1e-9]], vec![vec![1.0]]).unwrap();
        let mut rng = stream_rng(1, 1);
        assert_eq!(interference_at(&[], 0, 0, &gains, &mut rng), 0.0);
    }
}

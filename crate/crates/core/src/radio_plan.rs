//! Greedy channel assignment, capacity-based user association and
//! distributed-MIMO clustering.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::GainMatrix;
use crate::rng::{stream_rng, streams};
use crate::scenario::{ApNode, Point};

/// How the 80 MHz block is split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channelization {
    #[serde(rename = "4x20")]
    Four20,
    #[serde(rename = "2x40")]
    Two40,
    #[serde(rename = "1x80")]
    One80,
}

impl Channelization {
    pub fn width_mhz(self) -> u32 {
        match self {
            Channelization::Four20 => 20,
            Channelization::Two40 => 40,
            Channelization::One80 => 80,
        }
    }

    pub fn count(self) -> usize {
        (80 / self.width_mhz()) as usize
    }

    /// Non-overlapping channels tiling 5170-5250 MHz.
    pub fn channels(self) -> Vec<Channel> {
        let w = self.width_mhz();
        (0..self.count())
            .map(|id| Channel { id, center_mhz: 5170.0 + (id as f64 + 0.5) * w as f64, width_mhz: w })
            .collect()
    }
}

impl std::str::FromStr for Channelization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "4x20" => Ok(Channelization::Four20),
            "2x40" => Ok(Channelization::Two40),
            "1x80" => Ok(Channelization::One80),
            other => Err(Error::Config(format!("unknown channelization {other:?}; expected 4x20, 2x40 or 1x80"))),
        }
    }
}

impl std::fmt::Display for Channelization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.count(), self.width_mhz())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub id: usize,
    pub center_mhz: f64,
    pub width_mhz: u32,
}

impl Channel {
    pub fn width_hz(&self) -> f64 {
        self.width_mhz as f64 * 1e6
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlan {
    pub channels: Vec<Channel>,
    /// Channel index per AP.
    pub ap_channel: Vec<usize>,
    pub permutation_seed: u64,
}

impl ChannelPlan {
    /// Every AP on channel 0 of a single-channel set.
    pub fn single(channel: Channel, n_aps: usize) -> Self {
        ChannelPlan { channels: vec![channel], ap_channel: vec![0; n_aps], permutation_seed: 0 }
    }

    pub fn channel_of(&self, ap: usize) -> &Channel {
        &self.channels[self.ap_channel[ap]]
    }

    /// APs on channel `c`, ascending.
    pub fn aps_on(&self, c: usize) -> Vec<usize> {
        (0..self.ap_channel.len()).filter(|&i| self.ap_channel[i] == c).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["ap_id", "channel", "center_mhz", "width_mhz"])?;
        for (ap, &c) in self.ap_channel.iter().enumerate() {
            let ch = &self.channels[c];
            out.write_record([ap.to_string(), c.to_string(), ch.center_mhz.to_string(), ch.width_mhz.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn seeded_permutation(n: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, stream));
    order
}

/// Greedy assignment in a seeded random AP order.
pub fn assign_channels(gains: &GainMatrix, aps: &[ApNode], channels: &[Channel], seed: u64) -> Result<ChannelPlan> {
    let order = seeded_permutation(aps.len(), seed, streams::AP_PERMUTATION);
    let mut plan = assign_channels_in_order(gains, aps, channels, &order)?;
    plan.permutation_seed = seed;
    Ok(plan)
}

/// Each AP in `order` takes the channel with the least interference power
/// received from the APs already placed on it; exact ties go to the lowest
/// channel id.
pub fn assign_channels_in_order(
    gains: &GainMatrix,
    aps: &[ApNode],
    channels: &[Channel],
    order: &[usize],
) -> Result<ChannelPlan> {
    if channels.is_empty() {
        return Err(Error::InvalidParameter("need at least one channel".into()));
    }
    let mut ap_channel: Vec<Option<usize>> = vec![None; aps.len()];
    for &i in order {
        let mut best = (0, f64::INFINITY);
        for c in 0..channels.len() {
            let cost: f64 = (0..aps.len())
                .filter(|&j| ap_channel[j] == Some(c))
                .map(|j| aps[j].power_linear() * gains.ap_ap(j, i))
                .sum();
            if cost < best.1 {
                best = (c, cost);
            }
        }
        ap_channel[i] = Some(best.0);
    }
    let ap_channel = ap_channel
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| Error::InvalidParameter(format!("AP {i} missing from the assignment order"))))
        .collect::<Result<_>>()?;
    Ok(ChannelPlan { channels: channels.to_vec(), ap_channel, permutation_seed: 0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMap {
    /// Users per AP, in the order they joined.
    pub sets: Vec<Vec<usize>>,
    /// Serving AP per user.
    pub user_ap: Vec<usize>,
    /// Users that could not reach any AP and were parked on the strongest.
    pub zero_rate: Vec<usize>,
    pub permutation_seed: u64,
}

impl AssociationMap {
    pub fn load(&self, ap: usize) -> usize {
        self.sets[ap].len()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["ut_id", "ap_id", "zero_rate"])?;
        for (k, &i) in self.user_ap.iter().enumerate() {
            out.write_record([k.to_string(), i.to_string(), self.zero_rate.contains(&k).to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Capacity-proportional association in a seeded random user order.
/// `peak_rates[i][k]` is the peak rate of AP `i` towards user `k`.
pub fn associate_users(peak_rates: &[Vec<f64>], gains: &GainMatrix, seed: u64) -> Result<AssociationMap> {
    let n_users = peak_rates.first().map_or(0, Vec::len);
    let order = seeded_permutation(n_users, seed, streams::USER_PERMUTATION);
    let mut map = associate_users_in_order(peak_rates, gains, &order)?;
    map.permutation_seed = seed;
    Ok(map)
}

/// User `k` joins the AP maximizing `C[i][k] / (|S_i| + 1)`, ties to the
/// lowest AP id. A user with an all-zero row joins its strongest-gain AP and
/// is flagged zero-rate.
pub fn associate_users_in_order(peak_rates: &[Vec<f64>], gains: &GainMatrix, order: &[usize]) -> Result<AssociationMap> {
    let n_aps = peak_rates.len();
    if n_aps == 0 {
        return Err(Error::InvalidParameter("association needs at least one AP".into()));
    }
    let n_users = peak_rates[0].len();
    let mut sets = vec![Vec::new(); n_aps];
    let mut user_ap = vec![usize::MAX; n_users];
    let mut zero_rate = Vec::new();
    for &k in order {
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in peak_rates.iter().enumerate() {
            let score = row[k] / (sets[i].len() + 1) as f64;
            if score > 0.0 && best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
        let ap = match best {
            Some((i, _)) => i,
            None => {
                zero_rate.push(k);
                strongest_ap(gains, k)
            }
        };
        sets[ap].push(k);
        user_ap[k] = ap;
    }
    if let Some(k) = user_ap.iter().position(|&a| a == usize::MAX) {
        return Err(Error::InvalidParameter(format!("user {k} missing from the association order")));
    }
    zero_rate.sort_unstable();
    Ok(AssociationMap { sets, user_ap, zero_rate, permutation_seed: 0 })
}

fn strongest_ap(gains: &GainMatrix, k: usize) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..gains.n_aps() {
        if gains.ap_ut(i, k) > best.1 {
            best = (i, gains.ap_ut(i, k));
        }
    }
    best.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub ap_ids: Vec<usize>,
    pub channel: usize,
    /// Pooled linear transmit power of the member APs.
    pub p_sum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPlan {
    pub channels: Vec<Channel>,
    pub clusters: Vec<Cluster>,
    /// Cluster index per user; empty until users are associated.
    pub user_cluster: Vec<usize>,
}

impl ClusterPlan {
    pub fn users_of(&self, c: usize) -> Vec<usize> {
        (0..self.user_cluster.len()).filter(|&k| self.user_cluster[k] == c).collect()
    }

    /// Other clusters sharing this cluster's channel.
    pub fn co_channel(&self, c: usize) -> Vec<usize> {
        let ch = self.clusters[c].channel;
        (0..self.clusters.len()).filter(|&o| o != c && self.clusters[o].channel == ch).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["ut_id", "cluster_id", "channel"])?;
        for (k, &c) in self.user_cluster.iter().enumerate() {
            out.write_record([k.to_string(), c.to_string(), self.clusters[c].channel.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn centroid(aps: &[ApNode], members: &[usize]) -> Point {
    let n = members.len() as f64;
    let (sx, sy) = members.iter().fold((0.0, 0.0), |(x, y), &i| (x + aps[i].position.x, y + aps[i].position.y));
    Point::new(sx / n, sy / n)
}

/// Size-balanced proximity clustering of the APs.
///
/// Cluster sizes are `n / k` with the first `n % k` clusters one larger.
/// Centres start from a seeded AP followed by farthest-point picks, then
/// alternate capacity-constrained nearest assignment and centroid updates
/// until the partition stops changing. Cluster `c` uses channel
/// `c mod |channels|`.
pub fn build_clusters(aps: &[ApNode], n_clusters: usize, channels: &[Channel], seed: u64) -> Result<ClusterPlan> {
    let n = aps.len();
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::InvalidParameter(format!("cluster count {n_clusters} must be in 1..={n}")));
    }
    if channels.is_empty() {
        return Err(Error::InvalidParameter("need at least one channel".into()));
    }
    let capacity: Vec<usize> = (0..n_clusters).map(|c| n / n_clusters + usize::from(c < n % n_clusters)).collect();

    let mut centres = Vec::with_capacity(n_clusters);
    let first = stream_rng(seed, streams::CLUSTER_INIT).random_range(0..n);
    centres.push(aps[first].position);
    while centres.len() < n_clusters {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, ap) in aps.iter().enumerate() {
            let d = centres.iter().map(|c| c.distance(&ap.position)).fold(f64::INFINITY, f64::min);
            if d > best.1 {
                best = (i, d);
            }
        }
        centres.push(aps[best.0].position);
    }

    let mut assignment: Vec<usize> = vec![usize::MAX; n];
    for _ in 0..100 {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n_clusters);
        for (i, ap) in aps.iter().enumerate() {
            for (c, centre) in centres.iter().enumerate() {
                pairs.push((centre.distance(&ap.position), i, c));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut next = vec![usize::MAX; n];
        let mut fill = vec![0; n_clusters];
        for (_, i, c) in pairs {
            if next[i] == usize::MAX && fill[c] < capacity[c] {
                next[i] = c;
                fill[c] += 1;
            }
        }
        if next == assignment {
            break;
        }
        assignment = next;
        for (c, centre) in centres.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| assignment[i] == c).collect();
            *centre = centroid(aps, &members);
        }
    }

    let clusters = (0..n_clusters)
        .map(|c| {
            let ap_ids: Vec<usize> = (0..n).filter(|&i| assignment[i] == c).collect();
            let p_sum = ap_ids.iter().map(|&i| aps[i].power_linear()).sum();
            Cluster { ap_ids, channel: c % channels.len(), p_sum }
        })
        .collect();
    Ok(ClusterPlan { channels: channels.to_vec(), clusters, user_cluster: Vec::new() })
}

/// Interference-free single-user proxy rate of a cluster towards user `k`:
/// `log2(1 + M * sum_i g_ik * P_sum)`.
pub fn cluster_proxy_rate(cluster: &Cluster, aps: &[ApNode], gains: &GainMatrix, k: usize) -> f64 {
    let m = cluster.ap_ids.iter().map(|&i| aps[i].antennas).min().unwrap_or(1) as f64;
    let g: f64 = cluster.ap_ids.iter().map(|&i| gains.ap_ut(i, k)).sum();
    (1.0 + m * g * cluster.p_sum).log2()
}

pub fn associate_users_to_clusters(plan: &mut ClusterPlan, aps: &[ApNode], gains: &GainMatrix, seed: u64) {
    let order = seeded_permutation(gains.n_users(), seed, streams::CLUSTER_USER_PERMUTATION);
    associate_users_to_clusters_in_order(plan, aps, gains, &order);
}

/// Greedy as for APs: user joins the cluster maximizing
/// `proxy_rate / (load + 1)`, ties to the lowest cluster index.
pub fn associate_users_to_clusters_in_order(plan: &mut ClusterPlan, aps: &[ApNode], gains: &GainMatrix, order: &[usize]) {
    let mut load = vec![0usize; plan.clusters.len()];
    let mut user_cluster = vec![0usize; gains.n_users()];
    for &k in order {
        let mut best = (0, f64::NEG_INFINITY);
        for (c, cluster) in plan.clusters.iter().enumerate() {
            let score = cluster_proxy_rate(cluster, aps, gains, k) / (load[c] + 1) as f64;
            if score > best.1 {
                best = (c, score);
            }
        }
        user_cluster[k] = best.0;
        load[best.0] += 1;
    }
    plan.user_cluster = user_cluster;
}

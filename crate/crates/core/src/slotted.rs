//! Frame-based Monte-Carlo simulator for SA, DSA, CRDSA and IRSA.
//!
//! Users place replicas in the slots of one MAC frame; the receiver runs
//! inter-slot SIC (collision channel) or combined intra-/inter-slot SIC with
//! threshold capture (Rayleigh block fading). Loads are in packets per slot.

use std::collections::BTreeMap;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::channels::{capture_test, sample_rayleigh_snr, ChannelModel, ChannelSpec};
use crate::rng::derive_rng;
use crate::stats::{half_width_95, mean};

#[derive(Debug, Error, PartialEq)]
pub enum SlottedError {
    #[error("degree distribution: {0}")]
    BadDistribution(String),
    #[error("frame has {m_s} slots but a user drew degree {degree}")]
    FrameTooSmall { m_s: usize, degree: usize },
    #[error("simulation needs at least one trial")]
    NoTrials,
}

/// Probability mass over repetition degrees d (node perspective).
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    degrees: Vec<usize>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DegreeDistribution {
    /// Builds a distribution from `(degree, probability)` pairs.
    ///
    /// Probabilities must be non-negative and sum to 1 within 1e-12; degrees
    /// must be distinct and at least 1.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self, SlottedError> {
        let mut map = BTreeMap::new();
        for &(d, p) in pairs {
            if d == 0 {
                return Err(SlottedError::BadDistribution("degree 0 not allowed".into()));
            }
            if !(p >= 0.0) {
                return Err(SlottedError::BadDistribution(format!(
                    "negative probability {p} for degree {d}"
                )));
            }
            if map.insert(d, p).is_some() {
                return Err(SlottedError::BadDistribution(format!("duplicate degree {d}")));
            }
        }
        let total: f64 = map.values().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(SlottedError::BadDistribution(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        let degrees: Vec<usize> = map.keys().copied().collect();
        let probs: Vec<f64> = map.values().copied().collect();
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(DegreeDistribution { degrees, probs, cumulative })
    }

    /// All mass on a single degree.
    pub fn singleton(degree: usize) -> Self {
        Self::from_pairs(&[(degree, 1.0)]).expect("valid singleton")
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.degrees.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn max_degree(&self) -> usize {
        *self.degrees.last().expect("non-empty support")
    }

    pub fn mean_degree(&self) -> f64 {
        self.pairs().map(|(d, p)| d as f64 * p).sum()
    }

    /// IRSA rate R = 1 / mean degree.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean_degree()
    }

    /// Edge-perspective distribution: lambda_d = d*Lambda_d / sum(t*Lambda_t).
    pub fn edge_perspective(&self) -> Vec<(usize, f64)> {
        let norm = self.mean_degree();
        self.pairs().map(|(d, p)| (d, d as f64 * p / norm)).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c < u);
        self.degrees[idx.min(self.degrees.len() - 1)]
    }

    /// 0.5 x^2 + 0.28 x^3 + 0.22 x^8 (IRSA reference distribution).
    pub fn irsa_reference() -> Self {
        Self::from_pairs(&[(2, 0.5), (3, 0.28), (8, 0.22)]).unwrap()
    }

    /// 0.59 x^2 + 0.27 x^3 + 0.02 x^5 + 0.12 x^16 (optimized, mean degree 4).
    pub fn lambda1() -> Self {
        Self::from_pairs(&[(2, 0.59), (3, 0.27), (5, 0.02), (16, 0.12)]).unwrap()
    }

    /// 0.61 x^2 + 0.25 x^3 + 0.03 x^6 + 0.02 x^7 + 0.07 x^8 + 0.02 x^10 (mean 3).
    pub fn lambda2() -> Self {
        Self::from_pairs(&[(2, 0.61), (3, 0.25), (6, 0.03), (7, 0.02), (8, 0.07), (10, 0.02)])
            .unwrap()
    }

    /// 0.66 x^2 + 0.16 x^3 + 0.18 x^4 (mean 2.5).
    pub fn lambda3() -> Self {
        Self::from_pairs(&[(2, 0.66), (3, 0.16), (4, 0.18)]).unwrap()
    }

    /// 0.65 x^2 + 0.33 x^3 + 0.02 x^4 (mean 2.25).
    pub fn lambda4() -> Self {
        Self::from_pairs(&[(2, 0.65), (3, 0.33), (4, 0.02)]).unwrap()
    }

    /// 0.49 x^2 + 0.25 x^3 + 0.01 x^4 + 0.03 x^5 + 0.13 x^6 + 0.01 x^13 + 0.02 x^14 + 0.06 x^16
    /// (mean 4, optimized over the collision channel).
    pub fn lambda5() -> Self {
        Self::from_pairs(&[
            (2, 0.49),
            (3, 0.25),
            (4, 0.01),
            (5, 0.03),
            (6, 0.13),
            (13, 0.01),
            (14, 0.02),
            (16, 0.06),
        ])
        .unwrap()
    }
}

/// One user's replicas: slot indices and per-replica fading SNRs.
#[derive(Debug, Clone, PartialEq)]
pub struct UserReplicas {
    pub slots: Vec<usize>,
    pub snrs: Vec<f64>,
}

/// Bipartite burst-node/slot-node view of one MAC frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGraph {
    pub n_users: usize,
    pub m_s: usize,
    pub users: Vec<UserReplicas>,
}

impl FrameGraph {
    pub fn load(&self) -> f64 {
        self.n_users as f64 / self.m_s as f64
    }

    /// Number of replicas per slot.
    pub fn slot_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.m_s];
        for u in &self.users {
            for &s in &u.slots {
                deg[s] += 1;
            }
        }
        deg
    }
}

/// Builds one frame: each user draws a degree, picks that many distinct slots
/// uniformly at random and (under Rayleigh capture) an i.i.d. exponential SNR
/// per replica.
pub fn build_frame<R: Rng + ?Sized>(
    n_users: usize,
    m_s: usize,
    dist: &DegreeDistribution,
    channel: &ChannelSpec,
    rng: &mut R,
) -> Result<FrameGraph, SlottedError> {
    let mut users = Vec::with_capacity(n_users);
    for _ in 0..n_users {
        let d = dist.sample(rng);
        if d > m_s {
            return Err(SlottedError::FrameTooSmall { m_s, degree: d });
        }
        let slots: Vec<usize> = sample_indices(rng, m_s, d).into_iter().collect();
        let snrs: Vec<f64> = match channel.model {
            ChannelModel::RayleighCapture => (0..d)
                .map(|_| sample_rayleigh_snr(channel.mean_snr, rng).expect("validated mean"))
                .collect(),
            _ => vec![1.0; d],
        };
        users.push(UserReplicas { slots, snrs });
    }
    Ok(FrameGraph { n_users, m_s, users })
}

/// Inter-slot SIC over the collision channel: iterative peeling.
///
/// Each pass decodes every user that currently owns a degree-1 slot, then
/// removes all of that user's edges. The result does not depend on slot
/// visiting order. Returns per-user decoded flags.
pub fn sic_collision(frame: &FrameGraph, max_iters: usize) -> Vec<bool> {
    let mut slot_degree = frame.slot_degrees();
    let mut decoded = vec![false; frame.n_users];
    let mut iters = 0usize;
    while iters < max_iters {
        iters += 1;
        let newly: Vec<usize> = (0..frame.n_users)
            .filter(|&u| !decoded[u] && frame.users[u].slots.iter().any(|&s| slot_degree[s] == 1))
            .collect();
        if newly.is_empty() {
            break;
        }
        for &u in &newly {
            decoded[u] = true;
            for &s in &frame.users[u].slots {
                slot_degree[s] -= 1;
            }
        }
    }
    decoded
}

/// Intra-slot capture plus inter-slot SIC over Rayleigh block fading.
///
/// Per iteration the receiver sweeps slots in order. Within a slot it
/// repeatedly decodes the strongest residual replica whose SINR passes the
/// capture threshold, cancelling it in place; replicas of users decoded in the
/// slot are then cancelled from all other slots. Stops when everything is
/// decoded, an iteration makes no progress, or `max_iters` is reached.
pub fn sic_capture(frame: &FrameGraph, channel: &ChannelSpec, max_iters: usize) -> Vec<bool> {
    let threshold = channel.capture_threshold;
    // residual[s] holds (user, snr) of replicas not yet cancelled from slot s.
    let mut residual: Vec<Vec<(usize, f64)>> = vec![Vec::new(); frame.m_s];
    for (u, ur) in frame.users.iter().enumerate() {
        for (&s, &b) in ur.slots.iter().zip(&ur.snrs) {
            residual[s].push((u, b));
        }
    }
    let mut decoded = vec![false; frame.n_users];
    let mut n_decoded = 0usize;
    for _ in 0..max_iters {
        let mut progress = false;
        for j in 0..frame.m_s {
            let mut captured_here: Vec<usize> = Vec::new();
            loop {
                let slot = &residual[j];
                if slot.is_empty() {
                    break;
                }
                let (best_idx, &(user, snr)) = slot
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).expect("finite SNRs"))
                    .expect("non-empty slot");
                let interference: f64 = slot.iter().map(|&(_, b)| b).sum::<f64>() - snr;
                if snr / (1.0 + interference) >= threshold {
                    residual[j].swap_remove(best_idx);
                    decoded[user] = true;
                    n_decoded += 1;
                    captured_here.push(user);
                    progress = true;
                } else {
                    break;
                }
            }
            // Inter-slot IC for every user decoded in this slot.
            for &user in &captured_here {
                for &s in &frame.users[user].slots {
                    if s != j {
                        residual[s].retain(|&(u, _)| u != user);
                    }
                }
            }
        }
        if !progress || n_decoded == frame.n_users {
            break;
        }
    }
    decoded
}

/// Decode rule without SIC: a user survives iff at least one of its replicas
/// is decodable in isolation (collision-free, or passing the capture test
/// against all other replicas in its slot).
fn decode_no_sic(frame: &FrameGraph, channel: &ChannelSpec) -> Vec<bool> {
    let slot_degree = frame.slot_degrees();
    let mut slot_power = vec![0.0f64; frame.m_s];
    for u in &frame.users {
        for (&s, &b) in u.slots.iter().zip(&u.snrs) {
            slot_power[s] += b;
        }
    }
    frame
        .users
        .iter()
        .map(|u| {
            u.slots.iter().zip(&u.snrs).any(|(&s, &b)| match channel.model {
                ChannelModel::RayleighCapture => {
                    capture_test(b, &[slot_power[s] - b], channel.capture_threshold)
                }
                _ => slot_degree[s] == 1,
            })
        })
        .collect()
}

/// Slotted random access scheme under simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlottedScheme {
    /// One transmission per frame, no SIC.
    Sa,
    /// Fixed-degree diversity, decode iff some replica is collision-free, no SIC.
    Dsa { degree: usize },
    /// Fixed-degree diversity with SIC.
    Crdsa { degree: usize },
    /// Degree drawn from the distribution, SIC.
    Irsa,
}

/// New-frame user count model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arrivals {
    /// Exactly round(G * m_s) users per frame.
    Batch,
    /// Poisson-distributed user count with mean G * m_s.
    Poisson,
}

/// Estimated throughput, PLR and derived efficiencies for one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    /// Decoded packets per slot.
    pub throughput: f64,
    /// Packet loss rate.
    pub plr: f64,
    /// S * R when a code rate is defined.
    pub spectral_efficiency: Option<f64>,
    /// Ratio of peak spectral efficiency to the MAC channel capacity.
    pub normalized_capacity: Option<f64>,
    pub trials: u64,
    /// 95% half-width of the PLR estimate.
    pub half_width_95: f64,
}

/// Configuration of one slotted simulation sweep point.
#[derive(Debug, Clone)]
pub struct SlottedConfig {
    pub scheme: SlottedScheme,
    pub load: f64,
    pub m_s: usize,
    pub dist: DegreeDistribution,
    pub channel: ChannelSpec,
    pub trials: u64,
    pub max_iters: usize,
    pub arrivals: Arrivals,
    pub seed: u64,
}

impl SlottedConfig {
    pub fn new(
        scheme: SlottedScheme,
        load: f64,
        m_s: usize,
        dist: DegreeDistribution,
        channel: ChannelSpec,
        trials: u64,
        seed: u64,
    ) -> Self {
        SlottedConfig {
            scheme,
            load,
            m_s,
            dist,
            channel,
            trials,
            max_iters: 20,
            arrivals: Arrivals::Batch,
            seed,
        }
    }

    fn effective_dist(&self) -> DegreeDistribution {
        match self.scheme {
            SlottedScheme::Sa => DegreeDistribution::singleton(1),
            SlottedScheme::Dsa { degree } | SlottedScheme::Crdsa { degree } => {
                DegreeDistribution::singleton(degree)
            }
            SlottedScheme::Irsa => self.dist.clone(),
        }
    }
}

/// Runs independent frames and averages throughput and PLR.
///
/// Trial `t` uses the generator derived from `(seed, t)`, so results are
/// reproducible for any parallel schedule.
pub fn simulate_slotted(config: &SlottedConfig) -> Result<SimResult, SlottedError> {
    if config.trials == 0 {
        return Err(SlottedError::NoTrials);
    }
    let dist = config.effective_dist();
    if dist.max_degree() > config.m_s {
        return Err(SlottedError::FrameTooSmall {
            m_s: config.m_s,
            degree: dist.max_degree(),
        });
    }
    let mean_users = config.load * config.m_s as f64;
    let per_trial: Vec<(usize, usize)> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = derive_rng(config.seed, t);
            let n_users = match config.arrivals {
                Arrivals::Batch => mean_users.round() as usize,
                Arrivals::Poisson => {
                    if mean_users > 0.0 {
                        Poisson::new(mean_users).expect("positive mean").sample(&mut rng) as usize
                    } else {
                        0
                    }
                }
            };
            let frame = build_frame(n_users, config.m_s, &dist, &config.channel, &mut rng)
                .expect("degree bounded by max_degree check");
            let decoded = match (config.scheme, config.channel.model) {
                (SlottedScheme::Sa | SlottedScheme::Dsa { .. }, _) => {
                    decode_no_sic(&frame, &config.channel)
                }
                (_, ChannelModel::RayleighCapture) => {
                    sic_capture(&frame, &config.channel, config.max_iters)
                }
                _ => sic_collision(&frame, config.max_iters),
            };
            (decoded.iter().filter(|&&d| d).count(), n_users)
        })
        .collect();

    let throughputs: Vec<f64> =
        per_trial.iter().map(|&(d, _)| d as f64 / config.m_s as f64).collect();
    let plrs: Vec<f64> = per_trial
        .iter()
        .map(|&(d, n)| if n == 0 { 0.0 } else { 1.0 - d as f64 / n as f64 })
        .collect();
    let plr = mean(&plrs);
    let throughput = mean(&throughputs);
    Ok(SimResult {
        throughput,
        plr,
        spectral_efficiency: Some(throughput * config.channel.rate),
        normalized_capacity: None,
        trials: config.trials,
        half_width_95: half_width_95(&plrs),
    })
}

//! Channel models and decoding predicates shared by all simulators.
//!
//! Three abstractions of the physical layer are supported: the collision
//! channel (any interference destroys a packet), the block-interference AWGN
//! channel with a capacity threshold test, and the Rayleigh block-fading
//! channel with SINR capture. All powers and SNRs are linear; dB conversion
//! belongs to the CLI boundary.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("mean SNR must be positive, got {0}")]
    NonPositiveMeanSnr(f64),
    #[error("capture threshold must be >= 1, got {0}")]
    ThresholdBelowOne(f64),
    #[error("SINR vector must be non-empty")]
    EmptySinrVector,
    #[error("invalid channel parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

/// Channel model selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    /// Decodable iff zero interferers on every symbol.
    Collision,
    /// Capacity threshold over per-symbol SINRs.
    BlockInterference,
    /// Per-replica exponential SNR, threshold capture test.
    RayleighCapture,
}

/// Channel parameters shared by the simulators. Linear units throughout.
#[derive(Debug, Clone, Copy)]
pub struct ChannelSpec {
    pub model: ChannelModel,
    /// Received signal power P.
    pub signal_power: f64,
    /// Noise power N.
    pub noise_power: f64,
    /// Mean SNR of the Rayleigh fading law.
    pub mean_snr: f64,
    /// Capture threshold b*.
    pub capture_threshold: f64,
    /// Code rate R in bits per symbol.
    pub rate: f64,
}

impl ChannelSpec {
    pub fn collision() -> Self {
        ChannelSpec {
            model: ChannelModel::Collision,
            signal_power: 1.0,
            noise_power: 1.0,
            mean_snr: 1.0,
            capture_threshold: 1.0,
            rate: 1.0,
        }
    }

    /// Block-interference AWGN channel with equal received power.
    pub fn block_interference(
        signal_power: f64,
        noise_power: f64,
        rate: f64,
    ) -> Result<Self, ChannelError> {
        if !(signal_power >= 0.0) {
            return Err(ChannelError::InvalidParameter {
                name: "signal_power",
                value: signal_power,
            });
        }
        if !(noise_power > 0.0) {
            return Err(ChannelError::InvalidParameter {
                name: "noise_power",
                value: noise_power,
            });
        }
        if !(rate > 0.0) {
            return Err(ChannelError::InvalidParameter { name: "rate", value: rate });
        }
        Ok(ChannelSpec {
            model: ChannelModel::BlockInterference,
            signal_power,
            noise_power,
            mean_snr: signal_power / noise_power,
            capture_threshold: 1.0,
            rate,
        })
    }

    /// Rayleigh block-fading channel with threshold capture.
    pub fn rayleigh_capture(mean_snr: f64, capture_threshold: f64) -> Result<Self, ChannelError> {
        if !(mean_snr > 0.0) {
            return Err(ChannelError::NonPositiveMeanSnr(mean_snr));
        }
        if !(capture_threshold >= 1.0) {
            return Err(ChannelError::ThresholdBelowOne(capture_threshold));
        }
        Ok(ChannelSpec {
            model: ChannelModel::RayleighCapture,
            signal_power: mean_snr,
            noise_power: 1.0,
            mean_snr,
            capture_threshold,
            rate: 1.0,
        })
    }

    pub fn snr(&self) -> f64 {
        self.signal_power / self.noise_power
    }
}

/// Per-symbol linear SINR values of one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrVector(Vec<f64>);

impl SinrVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ChannelError> {
        if values.is_empty() {
            return Err(ChannelError::EmptySinrVector);
        }
        Ok(SinrVector(values))
    }

    pub fn uniform(value: f64, len: usize) -> Result<Self, ChannelError> {
        Self::new(vec![value; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Draws a fading SNR from the exponential law with mean `mean_snr`.
pub fn sample_rayleigh_snr<R: Rng + ?Sized>(mean_snr: f64, rng: &mut R) -> Result<f64, ChannelError> {
    if !(mean_snr > 0.0) {
        return Err(ChannelError::NonPositiveMeanSnr(mean_snr));
    }
    let exp = Exp::new(1.0 / mean_snr).expect("positive rate");
    Ok(exp.sample(rng))
}

/// Threshold capture test: true iff `candidate / (1 + sum(interferers)) >= threshold`.
///
/// Equality captures; the interferer list may be empty.
pub fn capture_test(candidate_snr: f64, residual_interferer_snrs: &[f64], threshold: f64) -> bool {
    let interference: f64 = residual_interferer_snrs.iter().sum();
    candidate_snr / (1.0 + interference) >= threshold
}

/// Capacity-based decoding condition under block interference.
///
/// True iff `rate <= mean(log2(1 + sinr_i))`; equality decodes. A single-entry
/// vector reduces to the point-to-point and time-slotted conditions.
pub fn decode_block_interference(rate: f64, sinr: &SinrVector) -> bool {
    rate <= mutual_information(sinr)
}

/// Average per-symbol mutual information `mean(log2(1 + sinr_i))`.
pub fn mutual_information(sinr: &SinrVector) -> f64 {
    let sum: f64 = sinr.values().iter().map(|&g| (1.0 + g).log2()).sum();
    sum / sinr.len() as f64
}

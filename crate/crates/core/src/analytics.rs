//! Closed-form calculators: classic ALOHA/SA throughput, layer-3 throughput
//! and PLR under fragmentation with the Jensen lower bound, and the low-load
//! PLR approximation for asynchronous schemes via vulnerable periods.

use std::sync::Arc;

use thiserror::Error;

use crate::stats::binomial;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("rate {rate} unreachable: must not exceed {max_rate}")]
    RateUnreachable { rate: f64, max_rate: f64 },
    #[error("PLR approximation undefined: n_v = {n_v} < degree {degree}")]
    TooFewVulnerablePeriods { n_v: u64, degree: u64 },
}

/// Classic random access protocol with a closed-form throughput.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassicProtocol {
    Aloha,
    SlottedAloha,
}

/// `S = G e^{-2G}` for ALOHA, `S = G e^{-G}` for slotted ALOHA.
pub fn classic_throughput(protocol: ClassicProtocol, load: f64) -> f64 {
    match protocol {
        ClassicProtocol::Aloha => load * (-2.0 * load).exp(),
        ClassicProtocol::SlottedAloha => load * (-load).exp(),
    }
}

/// Layer-3 packet duration law, in layer-2 packet durations.
#[derive(Clone)]
pub enum PacketLengthLaw {
    /// Point masses at the given durations.
    Discrete { atoms: Vec<(f64, f64)> },
    /// Exponential density with the given mean.
    Exponential { mean: f64 },
    /// Arbitrary density, integrated by adaptive quadrature.
    Custom { density: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl std::fmt::Debug for PacketLengthLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PacketLengthLaw::Discrete { atoms } => {
                f.debug_struct("Discrete").field("atoms", atoms).finish()
            }
            PacketLengthLaw::Exponential { mean } => {
                f.debug_struct("Exponential").field("mean", mean).finish()
            }
            PacketLengthLaw::Custom { .. } => f.write_str("Custom"),
        }
    }
}

impl PacketLengthLaw {
    pub fn exponential(mean: f64) -> Result<Self, AnalyticsError> {
        if !(mean > 0.0) {
            return Err(AnalyticsError::InvalidParameter { name: "mean", value: mean });
        }
        Ok(PacketLengthLaw::Exponential { mean })
    }

    pub fn discrete(atoms: &[(f64, f64)]) -> Result<Self, AnalyticsError> {
        let total: f64 = atoms.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(AnalyticsError::InvalidParameter { name: "atom probability sum", value: total });
        }
        for &(x, p) in atoms {
            if !(x > 0.0) {
                return Err(AnalyticsError::InvalidParameter { name: "atom duration", value: x });
            }
            if !(p >= 0.0) {
                return Err(AnalyticsError::InvalidParameter { name: "atom probability", value: p });
            }
        }
        Ok(PacketLengthLaw::Discrete { atoms: atoms.to_vec() })
    }

    pub fn custom(density: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        PacketLengthLaw::Custom { density: Arc::new(density) }
    }
}

/// Adaptive Simpson quadrature to absolute tolerance 1e-10.
fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, 1e-10, 40)
}

/// Discretized fragment-count pmf `p_i`, `i = 1..=i_max`.
#[derive(Debug, Clone)]
pub struct FragmentPmf {
    /// `p[i-1]` is the probability of occupying `i` layer-2 packets.
    pub probs: Vec<f64>,
    /// Mass beyond `i_max`, folded into the last bin.
    pub folded_tail: f64,
    /// Set when the folded tail exceeds 1e-6.
    pub tail_warning: bool,
}

impl FragmentPmf {
    /// Discretized mean `sum i * p_i` in layer-2 packet durations.
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }
}

/// `p_i = integral of the duration density from i-1 to i`; atoms at integer
/// durations land in bin i (ceiling convention). Tail mass past `i_max` is
/// folded into the last bin with a warning flag.
pub fn fragment_pmf(law: &PacketLengthLaw, i_max: usize) -> Result<FragmentPmf, AnalyticsError> {
    if i_max < 1 {
        return Err(AnalyticsError::InvalidParameter { name: "i_max", value: i_max as f64 });
    }
    let mut probs = vec![0.0f64; i_max];
    let folded_tail;
    match law {
        PacketLengthLaw::Discrete { atoms } => {
            let mut tail = 0.0;
            for &(x, p) in atoms {
                let bin = x.ceil() as usize;
                if bin <= i_max {
                    probs[bin.max(1) - 1] += p;
                } else {
                    tail += p;
                }
            }
            folded_tail = tail;
        }
        PacketLengthLaw::Exponential { mean } => {
            for (i, slot) in probs.iter_mut().enumerate() {
                let lo = i as f64;
                let hi = lo + 1.0;
                *slot = (-lo / mean).exp() - (-hi / mean).exp();
            }
            folded_tail = (-(i_max as f64) / mean).exp();
        }
        PacketLengthLaw::Custom { density } => {
            for (i, slot) in probs.iter_mut().enumerate() {
                *slot = integrate(&**density, i as f64, (i + 1) as f64);
            }
            folded_tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);
        }
    }
    probs[i_max - 1] += folded_tail;
    Ok(FragmentPmf { probs, folded_tail, tail_warning: folded_tail > 1e-6 })
}

/// Layer-3 throughput and loss rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L3Metrics {
    pub throughput: f64,
    pub plr: f64,
}

/// Layer-3 metrics from the layer-2 success probability.
///
/// Synchronous schemes fragment: `p_s3 = sum p_i p_s^i` and the throughput
/// pays the fragmentation and padding overheads. Asynchronous schemes carry
/// the packet whole: `S3 = G p_s`.
pub fn l3_metrics(
    load: f64,
    p_s: f64,
    fragments: &FragmentPmf,
    overhead_frag: f64,
    overhead_pad: f64,
    synchronous: bool,
) -> Result<L3Metrics, AnalyticsError> {
    if !(0.0..=1.0).contains(&p_s) {
        return Err(AnalyticsError::InvalidParameter { name: "p_s", value: p_s });
    }
    for (name, v) in [("overhead_frag", overhead_frag), ("overhead_pad", overhead_pad)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(AnalyticsError::InvalidParameter { name, value: v });
        }
    }
    if !synchronous {
        return Ok(L3Metrics { throughput: load * p_s, plr: 1.0 - p_s });
    }
    let p_s3: f64 = fragments
        .probs
        .iter()
        .enumerate()
        .map(|(i, p)| p * p_s.powi(i as i32 + 1))
        .sum();
    Ok(L3Metrics {
        throughput: load * p_s3 * (1.0 - overhead_frag) * (1.0 - overhead_pad),
        plr: 1.0 - p_s3,
    })
}

/// Jensen bound pair: guaranteed `S3_lower <= exact S3` and
/// `plr_upper >= exact plr` for any law with the given discretized mean.
pub fn l3_bound(
    load: f64,
    p_s: f64,
    mean_discretized: f64,
    overhead_frag: f64,
    overhead_pad: f64,
) -> Result<L3Metrics, AnalyticsError> {
    if !(0.0..=1.0).contains(&p_s) {
        return Err(AnalyticsError::InvalidParameter { name: "p_s", value: p_s });
    }
    if !(mean_discretized >= 1.0) {
        return Err(AnalyticsError::InvalidParameter {
            name: "mean_discretized",
            value: mean_discretized,
        });
    }
    let p_s3 = p_s.powf(mean_discretized);
    Ok(L3Metrics {
        throughput: load * p_s3 * (1.0 - overhead_frag) * (1.0 - overhead_pad),
        plr: 1.0 - p_s3,
    })
}

/// Combining mode of the vulnerable-period analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VulnerableMode {
    /// Replicas individually protected by the channel code.
    Coded,
    /// Maximal-ratio combining of both replicas (degree fixed to 2).
    Mrc,
}

/// Parameters of the vulnerable-period computation.
#[derive(Debug, Clone, Copy)]
pub struct VulnerableSpec {
    /// Code rate in bits per symbol.
    pub rate: f64,
    pub signal_power: f64,
    pub noise_power: f64,
    /// Ratio of single-interfered to clean combined portions (MRC only).
    pub alpha: f64,
    /// Repetition degree.
    pub degree: u64,
    /// Virtual-frame length in packet durations.
    pub frame_packets: u64,
}

/// Minimum interference-free fraction of a replica (Coded) or of the combined
/// observation (MRC) that still allows decoding.
pub fn vulnerable_fraction(mode: VulnerableMode, spec: &VulnerableSpec) -> Result<f64, AnalyticsError> {
    if !(spec.signal_power > 0.0) {
        return Err(AnalyticsError::InvalidParameter { name: "signal_power", value: spec.signal_power });
    }
    if !(spec.noise_power > 0.0) {
        return Err(AnalyticsError::InvalidParameter { name: "noise_power", value: spec.noise_power });
    }
    if !(spec.alpha >= 0.0) {
        return Err(AnalyticsError::InvalidParameter { name: "alpha", value: spec.alpha });
    }
    let p = spec.signal_power;
    let n = spec.noise_power;
    match mode {
        VulnerableMode::Coded => {
            let r_f = (1.0 + p / n).log2();
            let r_i = (1.0 + p / (n + p)).log2();
            if spec.rate > r_f {
                return Err(AnalyticsError::RateUnreachable { rate: spec.rate, max_rate: r_f });
            }
            if spec.rate < r_i {
                return Ok(0.0);
            }
            Ok((spec.rate - r_i) / (r_f - r_i))
        }
        VulnerableMode::Mrc => {
            let r_f = (1.0 + 2.0 * p / n).log2();
            let r_i1 = (1.0 + p / n + p / (n + p)).log2();
            let r_i2 = (1.0 + 2.0 * p / (n + p)).log2();
            if spec.rate > r_f {
                return Err(AnalyticsError::RateUnreachable { rate: spec.rate, max_rate: r_f });
            }
            if spec.rate < r_i2 {
                return Ok(0.0);
            }
            Ok((spec.rate - r_i2) / (r_f - r_i2 + spec.alpha * (r_i1 - r_i2)))
        }
    }
}

/// Vulnerable period duration in packet durations for the given mode.
pub fn vulnerable_period(mode: VulnerableMode, spec: &VulnerableSpec) -> Result<f64, AnalyticsError> {
    let phi = vulnerable_fraction(mode, spec)?;
    Ok(match mode {
        VulnerableMode::Coded => 2.0 * phi,
        VulnerableMode::Mrc => 2.0 * phi * (1.0 + spec.alpha / 2.0),
    })
}

/// Low-load PLR approximation for asynchronous replica schemes:
///
/// `p_l ~= sum_{m>=2} Poisson(n_p G; m) * C(m,2) / (d C(n_v,d)) * 2/m`
///
/// with `n_v = floor(n_p / T_v)` disjoint vulnerable periods per virtual
/// frame. The Poisson series stops once its remaining tail is below 1e-12.
pub fn async_plr_approx(
    load: f64,
    degree: u64,
    frame_packets: u64,
    vulnerable_period_packets: f64,
) -> Result<f64, AnalyticsError> {
    if !(load >= 0.0) {
        return Err(AnalyticsError::InvalidParameter { name: "load", value: load });
    }
    if !(vulnerable_period_packets >= 0.0) {
        return Err(AnalyticsError::InvalidParameter {
            name: "vulnerable_period_packets",
            value: vulnerable_period_packets,
        });
    }
    if vulnerable_period_packets == 0.0 || load == 0.0 {
        return Ok(0.0);
    }
    let n_v = (frame_packets as f64 / vulnerable_period_packets).floor() as u64;
    if n_v < degree {
        return Err(AnalyticsError::TooFewVulnerablePeriods { n_v, degree });
    }
    let pair_weight = 1.0 / (degree as f64 * binomial(n_v, degree));
    let mu = frame_packets as f64 * load;
    // Term for m interferers: Poisson(mu; m) * (m - 1) * pair_weight, since
    // C(m,2) * 2/m = m - 1.
    let mut poisson = (-mu).exp(); // m = 0
    let mut m = 0u64;
    let mut sum = 0.0;
    let mut tail = 1.0 - poisson;
    loop {
        m += 1;
        poisson *= mu / m as f64;
        tail -= poisson;
        if m >= 2 {
            sum += poisson * (m as f64 - 1.0);
        }
        // Remaining tail contributes at most tail * (m_next - 1 + mu) terms;
        // the crude bound tail * (m + mu) is enough at 1e-12.
        if m as f64 > mu && tail.max(0.0) * (m as f64 + mu) < 1e-12 {
            break;
        }
    }
    Ok(sum * pair_weight)
}

/// Maximum of `throughput(rate) * rate` over a rate grid of step 0.01 on
/// `(0, max_rate]`; returns `(best_rate, best_spectral_efficiency)`.
pub fn max_spectral_efficiency(
    max_rate: f64,
    mut throughput: impl FnMut(f64) -> f64,
) -> (f64, f64) {
    let mut best = (0.0, 0.0);
    let steps = (max_rate / 0.01).floor() as usize;
    for k in 1..=steps {
        let rate = k as f64 * 0.01;
        let se = throughput(rate) * rate;
        if se > best.1 {
            best = (rate, se);
        }
    }
    best
}

/// Normalized capacity: peak spectral efficiency over the Gaussian multiple
/// access sum-rate capacity at aggregate SNR `p_g_over_n`.
pub fn normalized_capacity(peak_spectral_efficiency: f64, p_g_over_n: f64) -> f64 {
    peak_spectral_efficiency / (1.0 + p_g_over_n).log2()
}

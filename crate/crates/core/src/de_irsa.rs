//! Density evolution for IRSA over the Rayleigh block-fading channel with
//! capture: exact capture probabilities, the two-sided erasure recursion,
//! asymptotic PLR and the load threshold.
//!
//! The burst-node update is `f_b(p) = sum_d lambda_d p^(d-1)`; the slot-node
//! update over fading with capture threshold `b*` is
//!
//! ```text
//! f_s(q) = 1 - sum_{t>=1} x^(t-1) / z_t^((t-1)/2)
//!          * exp(-(z_t - 1) * (1/B + x/z_t)),   x = (G/R) q,  z_t = (1+b*)^t
//! ```
//!
//! with a collision-channel variant `f_s(q) = 1 - exp(-(G/R) q)`.

use thiserror::Error;

use crate::slotted::DegreeDistribution;
use crate::stats::ln_factorial;

#[derive(Debug, Error, PartialEq)]
pub enum DeError {
    #[error("capture step needs 1 <= t <= r, got r={r}, t={t}")]
    BadStep { r: u64, t: u64 },
    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error(
        "slot update series did not converge: {terms} terms, last term {last_term:e} \
         (x={x:e}, threshold={threshold})"
    )]
    SeriesDiverged { terms: usize, last_term: f64, x: f64, threshold: f64 },
    #[error("target PLR {target} is not met even at zero load (floor {floor:e})")]
    InfeasibleAtZeroLoad { target: f64, floor: f64 },
}

/// Parameters of the density-evolution analysis.
#[derive(Debug, Clone, Copy)]
pub struct DeParams {
    /// Mean SNR of the fading law (linear).
    pub mean_snr: f64,
    /// Capture threshold b* (linear, >= 1).
    pub threshold: f64,
    /// Target PLR defining the load threshold.
    pub target_plr: f64,
    /// Hard cap on the slot-update series length.
    pub series_cap: usize,
    /// Additive term below which the series is truncated.
    pub term_tol: f64,
    /// Fixpoint stop: |p_{i+1} - p_i| below this ends the recursion.
    pub fixpoint_tol: f64,
    /// Iteration cap for the fixpoint recursion.
    pub max_de_iters: usize,
}

impl DeParams {
    pub fn new(mean_snr: f64, threshold: f64, target_plr: f64) -> Result<Self, DeError> {
        if !(mean_snr > 0.0) {
            return Err(DeError::InvalidParameter { name: "mean_snr", value: mean_snr });
        }
        if !(threshold >= 1.0) {
            return Err(DeError::InvalidParameter { name: "threshold", value: threshold });
        }
        if !(target_plr > 0.0 && target_plr < 1.0) {
            return Err(DeError::InvalidParameter { name: "target_plr", value: target_plr });
        }
        Ok(DeParams {
            mean_snr,
            threshold,
            target_plr,
            series_cap: 200,
            term_tol: 1e-14,
            fixpoint_tol: 1e-10,
            max_de_iters: 10_000,
        })
    }
}

/// Probability that the reference replica of a slot with reduced degree `r`
/// is captured exactly at intra-slot IC step `t`:
///
/// `D(r,t) = (r-1)!/(r-t)! * exp(-(z_t - 1)/B) / (1+b*)^(t(r-(t+1)/2))`.
pub fn capture_step_prob(r: u64, t: u64, mean_snr: f64, threshold: f64) -> Result<f64, DeError> {
    if t < 1 || t > r {
        return Err(DeError::BadStep { r, t });
    }
    if !(mean_snr > 0.0) {
        return Err(DeError::InvalidParameter { name: "mean_snr", value: mean_snr });
    }
    let z_t = (1.0 + threshold).powi(t as i32);
    let ln_arrangements = ln_factorial(r - 1) - ln_factorial(r - t);
    let exponent = ln_arrangements
        - (z_t - 1.0) / mean_snr
        - t as f64 * (r as f64 - (t as f64 + 1.0) / 2.0) * (1.0 + threshold).ln();
    Ok(exponent.exp())
}

/// Probability that the reference replica of a degree-`r` slot is eventually
/// captured: `D(r) = sum_{t=1}^{r} D(r,t)`.
pub fn capture_prob(r: u64, mean_snr: f64, threshold: f64) -> Result<f64, DeError> {
    (1..=r).map(|t| capture_step_prob(r, t, mean_snr, threshold)).sum()
}

/// Outcome of a density-evolution fixpoint run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeFixpoint {
    /// Limit of the slot-to-burst erasure probability recursion.
    pub p_inf: f64,
    /// Asymptotic PLR: sum_d Lambda_d * p_inf^d.
    pub plr: f64,
    /// Iterations used.
    pub iterations: usize,
}

fn plr_of(dist: &DegreeDistribution, p: f64) -> f64 {
    dist.pairs().map(|(d, prob)| prob * p.powi(d as i32)).sum()
}

fn burst_update(edge_dist: &[(usize, f64)], p: f64) -> f64 {
    edge_dist.iter().map(|&(d, l)| l * p.powi(d as i32 - 1)).sum()
}

/// Fading slot update `f_s(q)` for physical edge load `x = (G/R) q`.
fn slot_update_fading(x: f64, params: &DeParams) -> Result<f64, DeError> {
    let log_b1 = (1.0 + params.threshold).ln();
    let mut sum = 0.0f64;
    let mut t = 1usize;
    loop {
        let z_t = ((t as f64) * log_b1).exp();
        let ln_term = if x > 0.0 {
            (t as f64 - 1.0) * x.ln() - (t as f64 - 1.0) / 2.0 * (t as f64) * log_b1
        } else if t == 1 {
            0.0
        } else {
            f64::NEG_INFINITY
        };
        let term = (ln_term - (z_t - 1.0) * (1.0 / params.mean_snr + x / z_t)).exp();
        sum += term;
        if term < params.term_tol {
            break;
        }
        if t >= params.series_cap {
            return Err(DeError::SeriesDiverged {
                terms: t,
                last_term: term,
                x,
                threshold: params.threshold,
            });
        }
        t += 1;
    }
    Ok((1.0 - sum).clamp(0.0, 1.0))
}

enum SlotModel<'a> {
    Fading(&'a DeParams),
    Collision,
}

impl SlotModel<'_> {
    fn update(&self, x: f64) -> Result<f64, DeError> {
        match self {
            SlotModel::Fading(params) => slot_update_fading(x, params),
            SlotModel::Collision => Ok(1.0 - (-x).exp()),
        }
    }
}

fn run_fixpoint(
    dist: &DegreeDistribution,
    g: f64,
    model: &SlotModel,
    p0: f64,
    fixpoint_tol: f64,
    max_iters: usize,
) -> Result<DeFixpoint, DeError> {
    let edge_dist = dist.edge_perspective();
    let load_per_slot = g / dist.rate();
    let mut p = p0;
    for i in 1..=max_iters {
        let q = burst_update(&edge_dist, p);
        let next = model.update(load_per_slot * q)?;
        let delta = (next - p).abs();
        p = next;
        if delta < fixpoint_tol {
            return Ok(DeFixpoint { p_inf: p, plr: plr_of(dist, p), iterations: i });
        }
    }
    Ok(DeFixpoint { p_inf: p, plr: plr_of(dist, p), iterations: max_iters })
}

/// Density-evolution fixpoint over the Rayleigh block-fading channel with
/// capture. Starts from `p_0 = f_s(0)` and iterates `p <- f_s(f_b(p))`.
pub fn de_fixed_point(
    dist: &DegreeDistribution,
    g: f64,
    params: &DeParams,
) -> Result<DeFixpoint, DeError> {
    let model = SlotModel::Fading(params);
    let p0 = model.update(0.0)?;
    run_fixpoint(dist, g, &model, p0, params.fixpoint_tol, params.max_de_iters)
}

/// Density-evolution fixpoint over the collision channel.
///
/// The collision slot update has `f_s(0) = 0`, a degenerate fixpoint, so the
/// recursion starts from the decoder-faithful `p_0 = f_s(1)` and descends to
/// the largest fixpoint, which is the limit of the actual peeling process.
pub fn collision_de_fixed_point(dist: &DegreeDistribution, g: f64) -> Result<DeFixpoint, DeError> {
    let model = SlotModel::Collision;
    let p0 = model.update(g / dist.rate())?;
    run_fixpoint(dist, g, &model, p0, 1e-10, 10_000)
}

/// Largest `p` with `plr_of(dist, p) <= target` (PLR is strictly increasing).
fn plr_inverse(dist: &DegreeDistribution, target: f64) -> f64 {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if plr_of(dist, mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Largest load with asymptotic PLR below the target, by bisection on [0, 5]
/// to 1e-3.
///
/// The peeling decoder starts from everything undecoded, so its asymptotic
/// limit is the largest fixpoint of `f = f_s . f_b` below `p_start = f_s(q=1)`.
/// The target is met iff no fixpoint lies above `p_target = plr_inverse`,
/// i.e. `f(p) < p` throughout `(p_target, p_start]`. Scanning that condition
/// sidesteps the critical slowing of the iteration near tangency.
pub fn load_threshold(dist: &DegreeDistribution, params: &DeParams) -> Result<f64, DeError> {
    let p_target = plr_inverse(dist, params.target_plr);
    let edge_dist = dist.edge_perspective();
    let load_factor = 1.0 / dist.rate();
    let meets = |g: f64| -> Result<bool, DeError> {
        let p_start = slot_update_fading(g * load_factor, params)?;
        let scan_points = 4000;
        for k in 0..=scan_points {
            let p = p_target + (p_start - p_target) * k as f64 / scan_points as f64;
            if p <= p_target {
                continue;
            }
            let q = burst_update(&edge_dist, p);
            if slot_update_fading(g * load_factor * q, params)? >= p {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let floor = de_fixed_point(dist, 0.0, params)?.plr;
    if floor >= params.target_plr {
        return Err(DeError::InfeasibleAtZeroLoad { target: params.target_plr, floor });
    }
    let mut lo = 0.0f64;
    let mut hi = 5.0f64;
    if meets(hi)? {
        return Ok(hi);
    }
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if meets(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_rng;

    const B20DB: f64 = 100.0;

    fn b_star_3db() -> f64 {
        10f64.powf(0.3)
    }

    fn params() -> DeParams {
        DeParams::new(B20DB, b_star_3db(), 1e-2).unwrap()
    }

    #[test]
    fn capture_step_prob_examples() {
        let d11 = capture_step_prob(1, 1, 100.0, 1.995).unwrap();
        assert!((d11 - (-1.995f64 / 100.0).exp()).abs() < 1e-12);
        assert!((d11 - 0.98025).abs() < 5e-6);

        let d21 = capture_step_prob(2, 1, 100.0, 1.995).unwrap();
        assert!((d21 - 0.98025 / 2.995).abs() < 5e-6);
        assert!((d21 - 0.32729).abs() < 5e-6);

        assert!(capture_step_prob(2, 3, 100.0, 1.995).is_err());
        assert!(capture_step_prob(2, 0, 100.0, 1.995).is_err());
    }

    #[test]
    fn capture_probs_are_probabilities() {
        let mut rng = seed_rng(8);
        for _ in 0..200 {
            let mean_snr: f64 = rand::Rng::random_range(&mut rng, 0.5..500.0);
            let thr: f64 = rand::Rng::random_range(&mut rng, 1.0..6.0);
            for r in 1..=30u64 {
                let d = capture_prob(r, mean_snr, thr).unwrap();
                assert!((0.0..=1.0 + 1e-12).contains(&d), "D({r}) = {d}");
            }
        }
    }

    #[test]
    fn capture_prob_r1_and_large_threshold() {
        let d1 = capture_prob(1, 100.0, 1.995).unwrap();
        assert!((d1 - (-1.995f64 / 100.0).exp()).abs() < 1e-12);
        for r in 1..=6u64 {
            assert!(capture_prob(r, 100.0, 1e12).unwrap() < 1e-10);
        }
    }

    /// Monte-Carlo successive-capture oracle: draw r exponential SNRs and run
    /// strongest-first intra-slot IC; count captures of a reference replica.
    fn capture_prob_mc(r: usize, mean_snr: f64, thr: f64, trials: u64, seed: u64) -> f64 {
        use crate::channels::sample_rayleigh_snr;
        let mut rng = seed_rng(seed);
        let mut captured = 0u64;
        for _ in 0..trials {
            let mut snrs: Vec<f64> = (0..r)
                .map(|_| sample_rayleigh_snr(mean_snr, &mut rng).unwrap())
                .collect();
            // Reference replica is index 0; order is irrelevant by symmetry.
            let reference = snrs[0];
            loop {
                let (i_max, &best) = snrs
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap();
                let rest: f64 = snrs.iter().sum::<f64>() - best;
                if best / (1.0 + rest) >= thr {
                    let was_reference = best == reference && i_max == 0;
                    snrs.swap_remove(i_max);
                    if was_reference {
                        captured += 1;
                        break;
                    }
                    if snrs.is_empty() {
                        break;
                    }
                } else {
                    break;
                }
            }
        }
        captured as f64 / trials as f64
    }

    #[test]
    fn capture_prob_matches_sequential_capture_oracle() {
        let trials = 1_000_000u64;
        for r in 1..=6usize {
            let closed = capture_prob(r as u64, B20DB, b_star_3db()).unwrap();
            let mc = capture_prob_mc(r, B20DB, b_star_3db(), trials, 100 + r as u64);
            let sigma = (closed * (1.0 - closed) / trials as f64).sqrt();
            assert!(
                (mc - closed).abs() < 3.0 * sigma.max(1e-6),
                "r={r}: mc {mc} vs closed {closed}"
            );
        }
    }

    #[test]
    fn fixpoint_at_zero_load() {
        let p = params();
        let fx = de_fixed_point(&DegreeDistribution::lambda1(), 0.0, &p).unwrap();
        let expect = 1.0 - (-p.threshold / p.mean_snr).exp();
        assert!((fx.p_inf - expect).abs() < 1e-9, "{} vs {expect}", fx.p_inf);
        let plr_expect: f64 = DegreeDistribution::lambda1()
            .pairs()
            .map(|(d, prob)| prob * expect.powi(d as i32))
            .sum();
        assert!((fx.plr - plr_expect).abs() < 1e-9);
    }

    #[test]
    fn lambda1_plr_brackets_threshold() {
        let p = params();
        let dist = DegreeDistribution::lambda1();
        let below = de_fixed_point(&dist, 1.80, &p).unwrap();
        let above = de_fixed_point(&dist, 1.90, &p).unwrap();
        assert!(below.plr < 1e-2, "PLR(1.80) = {}", below.plr);
        assert!(above.plr > 1e-2, "PLR(1.90) = {}", above.plr);
    }

    #[test]
    fn plr_monotone_in_load() {
        let p = params();
        let dist = DegreeDistribution::lambda3();
        let mut prev = -1.0;
        for i in 0..30 {
            let g = 0.1 * i as f64;
            let fx = de_fixed_point(&dist, g, &p).unwrap();
            assert!(fx.p_inf >= prev - 1e-12, "p_inf not monotone at G={g}");
            prev = fx.p_inf;
        }
    }

    #[test]
    fn updates_map_unit_interval_monotonically() {
        let p = params();
        let dist = DegreeDistribution::lambda2();
        let edge = dist.edge_perspective();
        let mut prev_b = -1.0;
        let mut prev_s = -1.0;
        for i in 0..=100 {
            let q = i as f64 / 100.0;
            let fb = burst_update(&edge, q);
            let fs = slot_update_fading(2.0 * q, &p).unwrap();
            assert!((0.0..=1.0).contains(&fb));
            assert!((0.0..=1.0).contains(&fs));
            assert!(fb >= prev_b - 1e-12);
            assert!(fs >= prev_s - 1e-12);
            prev_b = fb;
            prev_s = fs;
        }
    }

    #[test]
    fn table_thresholds_reproduced() {
        let p = params();
        let cases = [
            (DegreeDistribution::lambda1(), 1.863),
            (DegreeDistribution::lambda2(), 1.820),
            (DegreeDistribution::lambda3(), 1.703),
            (DegreeDistribution::lambda4(), 1.644),
            (DegreeDistribution::lambda5(), 1.734),
        ];
        for (dist, expect) in cases {
            let g_star = load_threshold(&dist, &p).unwrap();
            assert!(
                (g_star - expect).abs() <= 0.01,
                "threshold {g_star} vs table {expect} for mean degree {}",
                dist.mean_degree()
            );
        }
    }

    #[test]
    fn thresholds_ordered_by_mean_degree() {
        let p = params();
        let g4 = load_threshold(&DegreeDistribution::lambda4(), &p).unwrap();
        let g3 = load_threshold(&DegreeDistribution::lambda3(), &p).unwrap();
        let g2 = load_threshold(&DegreeDistribution::lambda2(), &p).unwrap();
        let g1 = load_threshold(&DegreeDistribution::lambda1(), &p).unwrap();
        assert!(g4 < g3 && g3 < g2 && g2 < g1, "{g4} {g3} {g2} {g1}");
    }

    #[test]
    fn collision_de_brackets_crdsa_threshold() {
        let dist = DegreeDistribution::singleton(2);
        let low = collision_de_fixed_point(&dist, 0.4).unwrap();
        let high = collision_de_fixed_point(&dist, 0.6).unwrap();
        assert!(low.plr < 1e-2, "PLR(0.4) = {}", low.plr);
        // Above the ~0.5 threshold losses jump by two orders of magnitude;
        // the largest fixpoint at G=0.6 sits near p=0.313, PLR ~ 0.098.
        assert!(high.plr > 5e-2, "PLR(0.6) = {}", high.plr);
        assert!((high.p_inf - 0.313).abs() < 5e-3, "p_inf {}", high.p_inf);
    }

    #[test]
    fn collision_de_limits() {
        let dist = DegreeDistribution::irsa_reference();
        let fx = collision_de_fixed_point(&dist, 1e-6).unwrap();
        assert!(fx.p_inf < 1e-5);
        assert!(fx.plr < 1e-9);

        // Below its threshold, raising the fixed degree washes out losses.
        for d in [4usize, 8, 16] {
            let fx = collision_de_fixed_point(&DegreeDistribution::singleton(d), 0.3).unwrap();
            assert!(fx.plr < 1e-6, "d={d}: PLR {}", fx.plr);
        }
    }

    #[test]
    fn infeasible_at_zero_load_is_reported() {
        // Tiny mean SNR: even a lone replica rarely passes the threshold.
        let p = DeParams::new(1.0, 4.0, 1e-2).unwrap();
        let err = load_threshold(&DegreeDistribution::lambda3(), &p).unwrap_err();
        assert!(matches!(err, DeError::InfeasibleAtZeroLoad { .. }));
    }

    /// Thresholds move toward the collision-channel threshold as the mean SNR
    /// grows (sweep property, monotone trend).
    #[test]
    fn fading_threshold_trend_in_mean_snr() {
        let dist = DegreeDistribution::lambda3();
        let mut prev = 0.0;
        for snr_db in [15.0, 20.0, 30.0] {
            let p = DeParams::new(10f64.powf(snr_db / 10.0), b_star_3db(), 1e-2).unwrap();
            let g = load_threshold(&dist, &p).unwrap();
            assert!(g > prev, "threshold not increasing at {snr_db} dB: {g} <= {prev}");
            prev = g;
        }
    }
}

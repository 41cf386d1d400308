//! SICTA tree-splitting collision resolution and feedback-free protocol
//! sequences.
//!
//! SICTA keeps collided signals and peels them with SIC as successes arrive;
//! the receiver feeds back the multiplicity of newly decoded packets each
//! slot. The CRI length obeys `l_m = l_i + l_{m-i}` (the first slot of the
//! left subtree is skipped). TI sequences give every user a deterministic
//! binary activity pattern whose throughput is invariant to relative shifts.

use rand::Rng;
use thiserror::Error;

use crate::stats::binomial;

#[derive(Debug, Error, PartialEq)]
pub enum LegacyError {
    #[error("split probability must be in (0,1), got {0}")]
    BadSplitProbability(f64),
    #[error("duty factor must satisfy 0 < u/v <= 1, got {numerator}/{denominator}")]
    BadDutyFactor { numerator: u32, denominator: u32 },
    #[error("MPR order must be at least 2, got {0}")]
    BadMprOrder(u64),
}

/// Simulates one gated-access SICTA collision resolution interval.
///
/// `m` users start in collision; every slot the receiver feeds back idle,
/// or the number `k` of packets newly decoded once SIC has peeled all stored
/// collision signals. Local counters follow the k-multiplicity update rules:
/// on `e` transmitters re-toss and waiting users increment; on idle the
/// front-of-line group (counter 1) re-tosses; on `k` every counter drops by
/// `k - 1` and users landing at 1 re-toss. Returns the CRI length in slots.
pub fn sicta_resolve<R: Rng + ?Sized>(m: usize, p: f64, rng: &mut R) -> Result<u64, LegacyError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(LegacyError::BadSplitProbability(p));
    }
    // counters[u] for undecoded users; stored signals are sets of undecoded
    // users (decoded contributions are already cancelled).
    let mut counters: Vec<i64> = vec![0; m];
    let mut alive: Vec<bool> = vec![true; m];
    let mut signals: Vec<Vec<usize>> = Vec::new();
    let mut slots = 0u64;
    let mut system_counter: i64 = 0;
    loop {
        slots += 1;
        let transmitters: Vec<usize> =
            (0..m).filter(|&u| alive[u] && counters[u] == 0).collect();
        match transmitters.len() {
            0 => {
                // Idle feedback: the deterministic collision ahead is skipped
                // by letting the counter-1 group re-toss.
                for u in (0..m).filter(|&u| alive[u]) {
                    if counters[u] == 1 && rng.random::<f64>() < p {
                        counters[u] = 0;
                    }
                }
            }
            1 => {
                let mut newly = vec![transmitters[0]];
                alive[transmitters[0]] = false;
                // Ideal SIC: any stored signal reduced to one unknown yields it.
                loop {
                    let mut progressed = false;
                    signals.retain(|sig| {
                        let unknown: Vec<usize> =
                            sig.iter().copied().filter(|&u| alive[u]).collect();
                        match unknown.len() {
                            0 => false,
                            1 => {
                                alive[unknown[0]] = false;
                                newly.push(unknown[0]);
                                progressed = true;
                                false
                            }
                            _ => true,
                        }
                    });
                    if !progressed {
                        break;
                    }
                }
                let k = newly.len() as i64;
                system_counter -= k - 1;
                for u in (0..m).filter(|&u| alive[u]) {
                    counters[u] -= k - 1;
                    debug_assert!(counters[u] > 0, "undecoded user reached the front");
                    if counters[u] == 1 && rng.random::<f64>() < p {
                        counters[u] = 0;
                    }
                }
            }
            _ => {
                signals.push(transmitters.clone());
                system_counter += 1;
                for u in (0..m).filter(|&u| alive[u]) {
                    if counters[u] == 0 {
                        if rng.random::<f64>() >= p {
                            counters[u] = 1;
                        }
                    } else {
                        counters[u] += 1;
                    }
                }
            }
        }
        if system_counter == 0 {
            debug_assert!(alive.iter().all(|&a| !a) || m == 0);
            return Ok(slots);
        }
    }
}

/// Expected CRI lengths `E[l_0..=l_max]` from the recursion
/// `l_m = l_i + l_{m-i}` with `i ~ Binomial(m, p)`, `l_0 = l_1 = 1`.
///
/// The `i = 0` and `i = m` outcomes reference `l_m` itself; solving the
/// self-referential expectation gives
/// `E[l_m] (1 - p^m - q^m) = sum_{i=1}^{m-1} B(i) (E[l_i] + E[l_{m-i}]) + (p^m + q^m)`.
pub fn sicta_expected_cri(max_m: usize, p: f64) -> Result<Vec<f64>, LegacyError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(LegacyError::BadSplitProbability(p));
    }
    let q = 1.0 - p;
    let mut e = vec![1.0f64; max_m + 1];
    for m in 2..=max_m {
        let mut rhs = 0.0;
        for i in 1..m {
            let w = binomial(m as u64, i as u64) * p.powi(i as i32) * q.powi((m - i) as i32);
            rhs += w * (e[i] + e[m - i]);
        }
        let stay = p.powi(m as i32) + q.powi(m as i32);
        e[m] = (rhs + stay) / (1.0 - stay);
    }
    Ok(e)
}

/// Maximum stable throughput of SICTA with `j`-ary splitting: `ln(j)/(j-1)`.
pub fn sicta_throughput(split_arity: u64) -> Result<f64, LegacyError> {
    if split_arity < 2 {
        return Err(LegacyError::BadMprOrder(split_arity));
    }
    Ok((split_arity as f64).ln() / (split_arity as f64 - 1.0))
}

/// Builds minimum-period throughput-invariant protocol sequences for duty
/// factors `u_i / v_i`.
///
/// User `i`'s generator matrix has `prod_{k<i} v_k` rows of `v_i` entries,
/// row `j` carrying ones at columns `(j u_i + l) mod v_i`; the sequence reads
/// the matrix column by column and repeats to the common period `prod v_k`.
pub fn ti_construct(duty_factors: &[(u32, u32)]) -> Result<Vec<Vec<u8>>, LegacyError> {
    for &(u, v) in duty_factors {
        if u == 0 || v == 0 || u > v {
            return Err(LegacyError::BadDutyFactor { numerator: u, denominator: v });
        }
    }
    let period: usize = duty_factors.iter().map(|&(_, v)| v as usize).product();
    let mut sequences = Vec::with_capacity(duty_factors.len());
    let mut rows_before = 1usize;
    for &(u, v) in duty_factors {
        let v = v as usize;
        let u = u as usize;
        let mut block = vec![0u8; rows_before * v];
        for row in 0..rows_before {
            for l in 0..u {
                let col = (row * u + l) % v;
                // Column-major readout: entry (row, col) is at col*rows + row.
                block[col * rows_before + row] = 1;
            }
        }
        let mut seq = Vec::with_capacity(period);
        while seq.len() < period {
            seq.extend_from_slice(&block);
        }
        seq.truncate(period);
        sequences.push(seq);
        rows_before *= v;
    }
    Ok(sequences)
}

/// Throughput of symmetric-duty TI sequences on the iota-MPR channel:
///
/// `S = n_u sum_{k=1}^{iota-1} C(n_u-1, k) d_f^{k+1} (1 - d_f)^{n_u-1-k}`.
pub fn ti_throughput(n_users: u64, duty_factor: f64, mpr_order: u64) -> Result<f64, LegacyError> {
    if mpr_order < 2 {
        return Err(LegacyError::BadMprOrder(mpr_order));
    }
    if !(duty_factor > 0.0 && duty_factor <= 1.0) {
        return Err(LegacyError::BadDutyFactor { numerator: 0, denominator: 0 });
    }
    let mut sum = 0.0;
    for k in 1..mpr_order.min(n_users) {
        sum += binomial(n_users - 1, k)
            * duty_factor.powi(k as i32 + 1)
            * (1.0 - duty_factor).powi((n_users - 1 - k) as i32);
    }
    Ok(n_users as f64 * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_rng;
    use crate::stats::{mean, variance};

    #[test]
    fn sicta_trivial_collision_sizes() {
        let mut rng = seed_rng(30);
        for _ in 0..50 {
            assert_eq!(sicta_resolve(0, 0.5, &mut rng).unwrap(), 1);
            assert_eq!(sicta_resolve(1, 0.5, &mut rng).unwrap(), 1);
        }
        assert!(sicta_resolve(2, 0.0, &mut rng).is_err());
        assert!(sicta_resolve(2, 1.0, &mut rng).is_err());
    }

    #[test]
    fn sicta_expected_cri_small_values() {
        let e = sicta_expected_cri(4, 0.5).unwrap();
        assert_eq!(e[0], 1.0);
        assert_eq!(e[1], 1.0);
        // E[l_2] solves E = 1/4(1+E) + 1/2*2 + 1/4(E+1) => E = 3.
        assert!((e[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sicta_simulation_matches_recursion_oracle() {
        let p = 0.5;
        let oracle = sicta_expected_cri(8, p).unwrap();
        let mut rng = seed_rng(31);
        for m in [2usize, 3, 5, 8] {
            let runs = if m == 2 { 1_000_000 } else { 200_000 };
            let lengths: Vec<f64> = (0..runs)
                .map(|_| sicta_resolve(m, p, &mut rng).unwrap() as f64)
                .collect();
            let sim_mean = mean(&lengths);
            let sigma = (variance(&lengths) / runs as f64).sqrt();
            assert!(
                (sim_mean - oracle[m]).abs() < 3.0 * sigma.max(1e-4),
                "m={m}: sim {sim_mean} vs oracle {}",
                oracle[m]
            );
        }
    }

    #[test]
    fn sicta_throughput_converges_to_ln2() {
        let target = 2.0f64.ln();
        let oracle = sicta_expected_cri(64, 0.5).unwrap();
        for m in [16usize, 32, 64] {
            let s = m as f64 / oracle[m];
            assert!(
                (s - target).abs() / target < 0.05,
                "m={m}: throughput {s} vs {target}"
            );
        }
    }

    #[test]
    fn sicta_throughput_formula() {
        assert!((sicta_throughput(2).unwrap() - 0.6931).abs() < 1e-4);
        assert!((sicta_throughput(3).unwrap() - 0.5493).abs() < 1e-4);
        let mut prev = f64::INFINITY;
        for j in 2..40 {
            let s = sicta_throughput(j).unwrap();
            assert!(s < prev);
            prev = s;
        }
        assert!(prev < 0.1);
        assert!(sicta_throughput(1).is_err());
    }

    #[test]
    fn ti_construct_reference_example() {
        let seqs = ti_construct(&[(1, 2), (1, 2), (1, 2)]).unwrap();
        assert_eq!(seqs[0], vec![1, 0, 1, 0, 1, 0, 1, 0]);
        assert_eq!(seqs[1], vec![1, 0, 0, 1, 1, 0, 0, 1]);
        assert_eq!(seqs[2], vec![1, 0, 1, 0, 0, 1, 0, 1]);
    }

    #[test]
    fn ti_construct_edge_cases() {
        let seqs = ti_construct(&[(1, 1)]).unwrap();
        assert_eq!(seqs[0], vec![1]);
        assert!(ti_construct(&[(3, 2)]).is_err());
        assert!(ti_construct(&[(0, 2)]).is_err());
    }

    #[test]
    fn ti_construct_duty_factors_exact() {
        let duties = [(1u32, 2u32), (2, 3), (3, 4)];
        let seqs = ti_construct(&duties).unwrap();
        let period: usize = duties.iter().map(|&(_, v)| v as usize).product();
        for (i, seq) in seqs.iter().enumerate() {
            assert_eq!(seq.len(), period);
            let ones: usize = seq.iter().map(|&b| b as usize).sum();
            let (u, v) = duties[i];
            assert_eq!(ones * v as usize, u as usize * period, "user {i}");
        }
    }

    #[test]
    fn ti_throughput_hand_example() {
        let s = ti_throughput(3, 0.5, 2).unwrap();
        assert!((s - 0.75).abs() < 1e-12);
        assert!(ti_throughput(3, 0.5, 1).is_err());
        assert!(ti_throughput(3, 1e-9, 2).unwrap() < 1e-8);
    }

    /// Exhaustive shift enumeration: for every tuple of cyclic shifts, count
    /// packets delivered by slots whose multiplicity is between 2 and iota
    /// (the formula's collision-resolution events); the per-shift value is
    /// constant and equals the closed form.
    #[test]
    fn ti_throughput_equals_shift_enumeration() {
        let seqs = ti_construct(&[(1, 2), (1, 2), (1, 2)]).unwrap();
        let period = seqs[0].len();
        let iota = 2usize;
        let formula = ti_throughput(3, 0.5, iota as u64).unwrap();
        let mut total = 0.0;
        let mut tuples = 0usize;
        for s0 in 0..period {
            for s1 in 0..period {
                for s2 in 0..period {
                    let shifts = [s0, s1, s2];
                    let mut delivered = 0usize;
                    for t in 0..period {
                        let active: usize = (0..3)
                            .filter(|&i| seqs[i][(t + period - shifts[i]) % period] == 1)
                            .count();
                        if (2..=iota).contains(&active) {
                            delivered += active;
                        }
                    }
                    let s = delivered as f64 / period as f64;
                    assert!((s - formula).abs() < 1e-12, "shift {shifts:?}: {s}");
                    total += s;
                    tuples += 1;
                }
            }
        }
        assert!((total / tuples as f64 - formula).abs() < 1e-12);
    }
}

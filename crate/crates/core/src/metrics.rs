//! Channel-fitting NMSE, interference-aware capacity, analytical capacity
//! bounds, asymptotic-law oracles, and Monte-Carlo BPSK error rates.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use crate::error::{Result, SimError};
use crate::propagation::{end_to_end, PhaseState, PropagationOperators};
use crate::target::PowerAllocation;

/// Transmit power budget and receiver noise power, both in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub transmit_power: f64,
    pub noise_power: f64,
}

impl Default for LinkBudget {
    /// 20 dBm transmit power, −110 dBm noise power.
    fn default() -> Self {
        LinkBudget::from_dbm(20.0, -110.0).expect("defaults are finite")
    }
}

impl LinkBudget {
    /// Converts a dBm configuration into watts once, at ingestion.
    pub fn from_dbm(transmit_dbm: f64, noise_dbm: f64) -> Result<Self> {
        let budget = LinkBudget {
            transmit_power: dbm_to_watts(transmit_dbm),
            noise_power: dbm_to_watts(noise_dbm),
        };
        if !(budget.transmit_power > 0.0) || !(budget.noise_power > 0.0) {
            return Err(SimError::domain("powers must convert to positive watts"));
        }
        Ok(budget)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

/// Channel-fitting NMSE `Δ = ‖α·H − Λ_S‖_F² / ‖Λ_S‖_F²` for one realization;
/// ensemble averaging is the caller's job.
pub fn nmse(h: &DMatrix<Complex64>, alpha: Complex64, target: &DMatrix<Complex64>) -> Result<f64> {
    assert_eq!(h.shape(), target.shape(), "channel and target must have equal shapes");
    let target_norm_sq: f64 = target.iter().map(|t| t.norm_sqr()).sum();
    if target_norm_sq == 0.0 {
        return Err(SimError::domain("NMSE undefined for a zero target"));
    }
    let err: f64 = h
        .iter()
        .zip(target.iter())
        .map(|(hv, tv)| (alpha * hv - tv).norm_sqr())
        .sum();
    Ok(err / target_norm_sq)
}

/// Capacity of the fitted SIM link, counting off-diagonal leakage of `α·H` as
/// interference:
///
/// `C = Σ_s log2(1 + p_s·|αh_ss|² / (Σ_{s̃≠s} p_s̃·|αh_ss̃|² + σ²))`.
pub fn sim_capacity(
    h: &DMatrix<Complex64>,
    alpha: Complex64,
    allocation: &PowerAllocation,
    noise_power: f64,
) -> f64 {
    let streams = h.nrows();
    assert_eq!(h.ncols(), streams, "end-to-end channel must be square");
    assert_eq!(allocation.powers.len(), streams, "allocation must cover every stream");
    let mut capacity = 0.0;
    for s in 0..streams {
        let signal = allocation.powers[s] * (alpha * h[(s, s)]).norm_sqr();
        let mut interference = 0.0;
        for st in 0..streams {
            if st != s {
                interference += allocation.powers[st] * (alpha * h[(s, st)]).norm_sqr();
            }
        }
        capacity += (1.0 + signal / (interference + noise_power)).log2();
    }
    capacity
}

/// Ergodic-capacity bounds from the sample means of the extreme squared
/// singular values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityBounds {
    pub lower: f64,
    pub upper: f64,
    pub e_lambda1_sq: f64,
    pub e_lambda_s_sq: f64,
}

/// Bounds the ergodic capacity by pretending every stream rides the best
/// (upper) or the worst (lower) selected eigenchannel:
///
/// `S·log2(1 + P_t·Ê(λ_S²)/(S·σ²)) ≤ E(C) ≤ S·log2(1 + P_t·Ê(λ_1²)/(S·σ²))`
///
/// with `Ê` the sample mean over `samples = [(λ_1², λ_S²); trials]`.
pub fn capacity_bounds(
    samples: &[(f64, f64)],
    streams: usize,
    budget: &LinkBudget,
) -> Result<CapacityBounds> {
    if samples.is_empty() {
        return Err(SimError::domain("capacity bounds need at least one eigenvalue sample"));
    }
    let count = samples.len() as f64;
    let e1 = samples.iter().map(|s| s.0).sum::<f64>() / count;
    let es = samples.iter().map(|s| s.1).sum::<f64>() / count;
    let s = streams as f64;
    let level = |e: f64| s * (1.0 + budget.transmit_power * e / (s * budget.noise_power)).log2();
    Ok(CapacityBounds { lower: level(es), upper: level(e1), e_lambda1_sq: e1, e_lambda_s_sq: es })
}

/// Saturation level of the capacity bounds as the stream count grows:
/// `P_t·log2(e)·Ê(λ²)/σ²`.
pub fn prop1_limit(e_lambda_sq: f64, budget: &LinkBudget) -> f64 {
    budget.transmit_power * std::f64::consts::LOG2_E * e_lambda_sq / budget.noise_power
}

/// Monte-Carlo estimate of the coherently aligned cascaded-channel gain next
/// to the two candidate closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop2Estimate {
    /// `ρ²·Ê[(Σ_m |h_{1,m}|)²·(Σ_n |h_{2,n}|)²]` under i.i.d. unit complex
    /// Gaussians.
    pub monte_carlo: f64,
    /// `π²·ρ²·M²·N²/4`.
    pub quarter_pi_sq_form: f64,
    /// `ρ²·f(M)·f(N)` with `f(x) = x + x(x−1)·π/4`, the exact Rayleigh
    /// moment of the aligned sum.
    pub rayleigh_moment_form: f64,
}

/// Ground truth for the quadratic scaling law of the optimally phase-aligned
/// single-layer cascade. The Monte-Carlo value is authoritative; the two
/// closed forms are reported for comparison only, as they differ by a
/// constant factor.
pub fn prop2_oracle(m: usize, n: usize, rho2: f64, trials: usize, seed: u64) -> Prop2Estimate {
    assert!(trials >= 1, "at least one trial required");
    assert!(m >= 1 && n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (0.5f64).sqrt();
    let aligned_sum = |count: usize, rng: &mut ChaCha8Rng| -> f64 {
        let mut acc = 0.0;
        for _ in 0..count {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            acc += Complex64::new(re * scale, im * scale).norm();
        }
        acc
    };
    let mut total = 0.0;
    for _ in 0..trials {
        let tx = aligned_sum(m, &mut rng);
        let rx = aligned_sum(n, &mut rng);
        total += tx * tx * rx * rx;
    }
    let moment = |x: usize| x as f64 + x as f64 * (x as f64 - 1.0) * PI / 4.0;
    Prop2Estimate {
        monte_carlo: rho2 * total / trials as f64,
        quarter_pi_sq_form: PI * PI * rho2 * (m * m * n * n) as f64 / 4.0,
        rayleigh_moment_form: rho2 * moment(m) * moment(n),
    }
}

/// Outcome of a BPSK Monte-Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct BerReport {
    pub per_stream: Vec<f64>,
    pub aggregate: f64,
    pub bits_per_stream: usize,
}

/// Simulates uncoded BPSK over the fitted link. Every stream transmits
/// `√p_s·b_s`, propagates through `α·H`, picks up circular complex Gaussian
/// noise of variance σ² per receive port, and is detected per stream by the
/// sign of `Re(y_s / (α·h_ss))` — leakage from other streams is treated as
/// noise, matching the capacity metric.
pub fn ber_bpsk(
    phases: &PhaseState,
    ops: &PropagationOperators,
    g: &DMatrix<Complex64>,
    allocation: &PowerAllocation,
    noise_power: f64,
    bits_per_stream: usize,
    seed: u64,
) -> BerReport {
    assert!(bits_per_stream >= 1, "at least one bit per stream required");
    let h_eff = end_to_end(ops, phases, g).map(|v| phases.alpha * v);
    ber_bpsk_over(&h_eff, allocation, noise_power, bits_per_stream, seed)
}

/// BPSK Monte-Carlo over an explicit effective channel matrix.
pub fn ber_bpsk_over(
    h_eff: &DMatrix<Complex64>,
    allocation: &PowerAllocation,
    noise_power: f64,
    bits_per_stream: usize,
    seed: u64,
) -> BerReport {
    let streams = h_eff.nrows();
    assert_eq!(h_eff.ncols(), streams, "effective channel must be square");
    assert_eq!(allocation.powers.len(), streams);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amplitudes: Vec<f64> = allocation.powers.iter().map(|p| p.sqrt()).collect();
    let noise_std = (noise_power / 2.0).sqrt();
    let mut errors = vec![0usize; streams];
    let mut bits = vec![0.0f64; streams];
    let mut received = vec![Complex64::default(); streams];
    for _ in 0..bits_per_stream {
        for (b, amp) in bits.iter_mut().zip(&amplitudes) {
            *b = if rng.random::<bool>() { *amp } else { -*amp };
        }
        for s in 0..streams {
            let mut y = Complex64::default();
            for st in 0..streams {
                y += h_eff[(s, st)] * bits[st];
            }
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            received[s] = y + Complex64::new(re * noise_std, im * noise_std);
        }
        for s in 0..streams {
            let detected = (received[s] / h_eff[(s, s)]).re >= 0.0;
            if detected != (bits[s] >= 0.0) {
                errors[s] += 1;
            }
        }
    }
    let per_stream: Vec<f64> =
        errors.iter().map(|&e| e as f64 / bits_per_stream as f64).collect();
    let aggregate =
        errors.iter().sum::<usize>() as f64 / (bits_per_stream * streams) as f64;
    BerReport { per_stream, aggregate, bits_per_stream }
}

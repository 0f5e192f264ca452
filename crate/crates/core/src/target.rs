//! Truncated-SVD target channel, water-filling power allocation, and the
//! full-precision capacity benchmark.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SimError};

/// Eigenvalues below this are treated as zero by the power allocator.
const LAMBDA_SQ_FLOOR: f64 = 1e-30;

/// The diagonal fitting target extracted from a channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdTarget {
    /// All `O = min(M, N)` singular values, nonincreasing.
    pub singular_values: Vec<f64>,
    /// `F_S`: first S right-singular vectors (M×S); the full-precision precoder.
    pub tx_vectors: DMatrix<Complex64>,
    /// `E_S`: first S left-singular vectors (N×S); `E_S^H` is the full-precision combiner.
    pub rx_vectors: DMatrix<Complex64>,
    /// `Λ_S = diag(λ_1..λ_S)` (S×S), the matrix the optimizer fits.
    pub target_matrix: DMatrix<Complex64>,
}

impl SvdTarget {
    pub fn streams(&self) -> usize {
        self.target_matrix.nrows()
    }

    /// Squared singular values of the S selected eigenchannels.
    pub fn lambda_sq(&self) -> Vec<f64> {
        self.singular_values[..self.streams()].iter().map(|l| l * l).collect()
    }
}

/// Water-filling solution: `p_s = max(0, τ − σ²/λ_s²)` at the returned level τ.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    pub water_level: f64,
}

impl PowerAllocation {
    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }
}

/// Decomposes `G = E·Λ·F^H` and keeps the S strongest eigenchannels.
///
/// Every singular-vector pair is rotated so that the largest-magnitude entry
/// of the right-singular vector is real positive, making the result
/// reproducible across runs and linear-algebra backends.
pub fn truncated_svd_target(g: &DMatrix<Complex64>, streams: usize) -> Result<SvdTarget> {
    let order = g.nrows().min(g.ncols());
    if streams == 0 || streams > order {
        return Err(SimError::domain(format!(
            "stream count {streams} outside 1..={order} for a {}x{} channel",
            g.nrows(),
            g.ncols()
        )));
    }
    let svd = g.clone().svd(true, true);
    let mut rx_full = svd.u.expect("u requested");
    let mut tx_full = svd.v_t.expect("v_t requested").adjoint();
    let singular_values: Vec<f64> = svd.singular_values.iter().cloned().collect();
    debug_assert!(singular_values.windows(2).all(|w| w[0] >= w[1]));

    // Phase convention: rotating e_o and f_o by the same unit factor leaves
    // e_o·λ_o·f_o^H unchanged.
    for o in 0..order {
        let col = tx_full.column(o);
        let (imax, _) = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .expect("columns are non-empty");
        let pivot = tx_full[(imax, o)];
        if pivot.norm() > 0.0 {
            let rot = pivot.conj() / pivot.norm();
            for i in 0..tx_full.nrows() {
                tx_full[(i, o)] *= rot;
            }
            for i in 0..rx_full.nrows() {
                rx_full[(i, o)] *= rot;
            }
        }
    }

    let target_matrix = DMatrix::from_fn(streams, streams, |i, j| {
        if i == j { Complex64::new(singular_values[i], 0.0) } else { Complex64::default() }
    });
    Ok(SvdTarget {
        singular_values,
        tx_vectors: tx_full.columns(0, streams).into_owned(),
        rx_vectors: rx_full.columns(0, streams).into_owned(),
        target_matrix,
    })
}

/// Splits the power budget across eigenchannels by bisecting the water level
/// until the total allocation matches `total_power` to one part in 1e9.
pub fn water_filling(
    lambda_sq: &[f64],
    total_power: f64,
    noise_power: f64,
) -> Result<PowerAllocation> {
    if lambda_sq.is_empty() {
        return Err(SimError::domain("water filling needs at least one eigenvalue"));
    }
    if lambda_sq.iter().any(|&l| !(l > 0.0)) {
        return Err(SimError::domain("squared singular values must be strictly positive"));
    }
    if !(total_power > 0.0) || !(noise_power > 0.0) {
        return Err(SimError::domain("power budget and noise power must be strictly positive"));
    }
    // Inverse gains; eigenchannels below the floor never receive power.
    let floors: Vec<f64> = lambda_sq
        .iter()
        .map(|&l| if l < LAMBDA_SQ_FLOOR { f64::INFINITY } else { noise_power / l })
        .collect();
    let allocate = |tau: f64| -> Vec<f64> {
        floors.iter().map(|&f| (tau - f).max(0.0)).collect()
    };
    let finite_min = floors.iter().cloned().filter(|f| f.is_finite()).fold(f64::INFINITY, f64::min);
    let finite_max = floors.iter().cloned().filter(|f| f.is_finite()).fold(0.0f64, f64::max);
    if !finite_min.is_finite() {
        return Err(SimError::domain("all eigenchannels below the numerical floor"));
    }
    let mut lo = finite_min;
    let mut hi = total_power + finite_max;
    let tolerance = 1e-9 * total_power;
    let mut tau = 0.5 * (lo + hi);
    for _ in 0..200 {
        tau = 0.5 * (lo + hi);
        let sum: f64 = allocate(tau).iter().sum();
        if (sum - total_power).abs() <= tolerance {
            break;
        }
        if sum > total_power {
            hi = tau;
        } else {
            lo = tau;
        }
    }
    Ok(PowerAllocation { powers: allocate(tau), water_level: tau })
}

/// Capacity of parallel eigenchannels under a given allocation:
/// `C = Σ_s log2(1 + p_s·λ_s²/σ²)` in bits/s/Hz.
pub fn ideal_capacity(lambda_sq: &[f64], allocation: &PowerAllocation, noise_power: f64) -> f64 {
    assert_eq!(
        lambda_sq.len(),
        allocation.powers.len(),
        "allocation length must match eigenvalue count"
    );
    lambda_sq
        .iter()
        .zip(&allocation.powers)
        .map(|(&l, &p)| (1.0 + p * l / noise_power).log2())
        .sum()
}

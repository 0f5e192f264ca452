//! Fixed diffraction operators between metasurface layers and their
//! composition with tunable phase states into the wave-domain precoder `P`
//! and combiner `Q`.
//!
//! The operators are deterministic functions of the architecture and are
//! built once; the optimizer only ever recombines them with new phases.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::TAU;

use crate::error::{Result, SimError};
use crate::geometry::{
    antenna_to_layer_distance_unchecked, inter_layer_distance, SimArchitecture,
};

/// Transmission coefficient between two points on adjacent layers per scalar
/// diffraction theory:
///
/// `(area·cosχ / dist) · (1/(2π·dist) − j/λ) · e^{j·2π·dist/λ}`
///
/// with `cosχ = axial_gap / dist` (the emitting layer's normal is the stack
/// axis, and the layers are parallel).
pub fn diffraction_coefficient(
    dist: f64,
    axial_gap: f64,
    area: f64,
    lambda: f64,
) -> Result<Complex64> {
    if !(axial_gap > 0.0) {
        return Err(SimError::domain("axial gap must be strictly positive"));
    }
    if dist < axial_gap {
        return Err(SimError::domain(format!(
            "distance {dist} smaller than axial gap {axial_gap} is geometrically impossible"
        )));
    }
    if !(area > 0.0) || !(lambda > 0.0) {
        return Err(SimError::domain("area and wavelength must be strictly positive"));
    }
    let cos_chi = axial_gap / dist;
    let amplitude = area * cos_chi / dist;
    let inner = Complex64::new(1.0 / (TAU * dist), -1.0 / lambda);
    let phase = Complex64::from_polar(1.0, TAU * dist / lambda);
    Ok(amplitude * inner * phase)
}

/// Fixed operators of the transmit stack: `input` maps the antenna array onto
/// the first layer (M×S), `between[l-2]` maps layer `l−1` onto layer `l`
/// (M×M, for `l = 2..=L`).
#[derive(Debug, Clone, PartialEq)]
pub struct TxOperators {
    pub input: DMatrix<Complex64>,
    pub between: Vec<DMatrix<Complex64>>,
}

/// Fixed operators of the receive stack: `output` maps the last layer onto
/// the antenna array (S×N), `between[k-2]` maps layer `k` onto layer `k−1`
/// (N×N, for `k = 2..=K`).
#[derive(Debug, Clone, PartialEq)]
pub struct RxOperators {
    pub output: DMatrix<Complex64>,
    pub between: Vec<DMatrix<Complex64>>,
}

/// All fixed complex matrices of one link, cached immutably.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationOperators {
    pub tx: TxOperators,
    pub rx: RxOperators,
}

impl PropagationOperators {
    pub fn new(arch: &SimArchitecture) -> Self {
        PropagationOperators {
            tx: build_tx_operators(arch),
            rx: build_rx_operators(arch),
        }
    }

    pub fn streams(&self) -> usize {
        self.tx.input.ncols()
    }

    pub fn tx_atoms(&self) -> usize {
        self.tx.input.nrows()
    }

    pub fn rx_atoms(&self) -> usize {
        self.rx.output.ncols()
    }

    pub fn tx_layers(&self) -> usize {
        self.tx.between.len() + 1
    }

    pub fn rx_layers(&self) -> usize {
        self.rx.between.len() + 1
    }
}

/// Builds the transmit-side operators from the architecture. Infallible: the
/// architecture was validated on construction.
pub fn build_tx_operators(arch: &SimArchitecture) -> TxOperators {
    let surf = &arch.tx;
    let gap = surf.layer_gap();
    let row_len = surf.row_len();
    let input = DMatrix::from_fn(surf.atoms, arch.streams, |m0, s0| {
        let dist =
            antenna_to_layer_distance_unchecked(s0 + 1, m0 + 1, arch.streams, surf, arch.wavelength);
        diffraction_coefficient(dist, gap, surf.atom_area, arch.wavelength)
            .expect("antenna distance is at least the layer gap")
    });
    let between = (2..=surf.layers)
        .map(|_| {
            DMatrix::from_fn(surf.atoms, surf.atoms, |m0, mt0| {
                let dist = inter_layer_distance(m0 + 1, mt0 + 1, surf.spacing, row_len, gap)
                    .expect("indices are in range by construction");
                diffraction_coefficient(dist, gap, surf.atom_area, arch.wavelength)
                    .expect("inter-layer distance is at least the layer gap")
            })
        })
        .collect();
    TxOperators { input, between }
}

/// Mirror of [`build_tx_operators`] for the receive side.
pub fn build_rx_operators(arch: &SimArchitecture) -> RxOperators {
    let surf = &arch.rx;
    let gap = surf.layer_gap();
    let row_len = surf.row_len();
    let output = DMatrix::from_fn(arch.streams, surf.atoms, |s0, n0| {
        let dist =
            antenna_to_layer_distance_unchecked(s0 + 1, n0 + 1, arch.streams, surf, arch.wavelength);
        diffraction_coefficient(dist, gap, surf.atom_area, arch.wavelength)
            .expect("antenna distance is at least the layer gap")
    });
    let between = (2..=surf.layers)
        .map(|_| {
            DMatrix::from_fn(surf.atoms, surf.atoms, |nt0, n0| {
                let dist = inter_layer_distance(nt0 + 1, n0 + 1, surf.spacing, row_len, gap)
                    .expect("indices are in range by construction");
                diffraction_coefficient(dist, gap, surf.atom_area, arch.wavelength)
                    .expect("inter-layer distance is at least the layer gap")
            })
        })
        .collect();
    RxOperators { output, between }
}

/// All tunable parameters of one link: the TX phase shifts `theta` (L×M), the
/// RX phase shifts `xi` (K×N), both stored canonically in `[0, 2π)`, and the
/// complex scaling factor `alpha`.
///
/// Transmission coefficients are always `e^{jθ}` / `e^{jξ}`, so the
/// unit-modulus constraint holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub theta: DMatrix<f64>,
    pub xi: DMatrix<f64>,
    pub alpha: Complex64,
}

impl PhaseState {
    /// All-zero phases (identity phase layers) and unit scaling.
    pub fn zeros(tx_layers: usize, tx_atoms: usize, rx_layers: usize, rx_atoms: usize) -> Self {
        PhaseState {
            theta: DMatrix::zeros(tx_layers, tx_atoms),
            xi: DMatrix::zeros(rx_layers, rx_atoms),
            alpha: Complex64::new(1.0, 0.0),
        }
    }

    /// Phases drawn i.i.d. uniformly on `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(
        tx_layers: usize,
        tx_atoms: usize,
        rx_layers: usize,
        rx_atoms: usize,
        rng: &mut R,
    ) -> Self {
        PhaseState {
            theta: DMatrix::from_fn(tx_layers, tx_atoms, |_, _| rng.random::<f64>() * TAU),
            xi: DMatrix::from_fn(rx_layers, rx_atoms, |_, _| rng.random::<f64>() * TAU),
            alpha: Complex64::new(1.0, 0.0),
        }
    }

    /// Reduces every stored phase into the canonical interval `[0, 2π)`.
    pub fn wrap(&mut self) {
        for v in self.theta.iter_mut().chain(self.xi.iter_mut()) {
            *v = v.rem_euclid(TAU);
            if *v == TAU {
                *v = 0.0;
            }
        }
    }

    /// Unit-modulus transmission coefficient of TX layer `l` (0-based), atom `m` (0-based).
    #[inline]
    pub fn tx_coefficient(&self, l: usize, m: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.theta[(l, m)])
    }

    /// Unit-modulus transmission coefficient of RX layer `k` (0-based), atom `n` (0-based).
    #[inline]
    pub fn rx_coefficient(&self, k: usize, n: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.xi[(k, n)])
    }
}

/// Wave-domain precoder `P = Φ^L W^L ⋯ Φ^2 W^2 Φ^1 W^1` (M×S), evaluated as a
/// chain of matrix × thin-matrix products from the antenna side outward.
pub fn tx_response(ops: &TxOperators, phases: &PhaseState) -> DMatrix<Complex64> {
    let layers = ops.between.len() + 1;
    assert_eq!(phases.theta.nrows(), layers, "phase state has wrong TX layer count");
    assert_eq!(phases.theta.ncols(), ops.input.nrows(), "phase state has wrong TX atom count");
    let mut acc = ops.input.clone();
    for l in 0..layers {
        if l > 0 {
            acc = &ops.between[l - 1] * acc;
        }
        scale_rows(&mut acc, |m| phases.tx_coefficient(l, m));
    }
    acc
}

/// Wave-domain combiner `Q = U^1 Ψ^1 U^2 Ψ^2 ⋯ U^K Ψ^K` (S×N).
pub fn rx_response(ops: &RxOperators, phases: &PhaseState) -> DMatrix<Complex64> {
    let layers = ops.between.len() + 1;
    assert_eq!(phases.xi.nrows(), layers, "phase state has wrong RX layer count");
    assert_eq!(phases.xi.ncols(), ops.output.ncols(), "phase state has wrong RX atom count");
    let mut acc = ops.output.clone();
    for k in 0..layers {
        scale_cols(&mut acc, |n| phases.rx_coefficient(k, n));
        if k + 1 < layers {
            acc = acc * &ops.between[k];
        }
    }
    acc
}

/// End-to-end channel `H = Q · G · P` (S×S) that the optimizer fits.
pub fn end_to_end(
    ops: &PropagationOperators,
    phases: &PhaseState,
    g: &DMatrix<Complex64>,
) -> DMatrix<Complex64> {
    assert_eq!(g.nrows(), ops.rx_atoms(), "channel row count must match RX atoms");
    assert_eq!(g.ncols(), ops.tx_atoms(), "channel column count must match TX atoms");
    let p = tx_response(&ops.tx, phases);
    let q = rx_response(&ops.rx, phases);
    (q * g) * p
}

pub(crate) fn scale_rows<F: Fn(usize) -> Complex64>(m: &mut DMatrix<Complex64>, f: F) {
    for r in 0..m.nrows() {
        let c = f(r);
        for j in 0..m.ncols() {
            m[(r, j)] *= c;
        }
    }
}

pub(crate) fn scale_cols<F: Fn(usize) -> Complex64>(m: &mut DMatrix<Complex64>, f: F) {
    for j in 0..m.ncols() {
        let c = f(j);
        for r in 0..m.nrows() {
            m[(r, j)] *= c;
        }
    }
}

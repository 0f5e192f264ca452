//! Multi-start gradient descent fitting the scaled end-to-end SIM channel
//! `α·Q·G·P` to the diagonal target `Λ_S` by tuning every metasurface phase
//! shift.
//!
//! One iteration runs: partial derivatives → per-layer normalization → phase
//! update → least-squares refresh of the scaling factor α → learning-rate
//! decay. Gradients are assembled from cached prefix/suffix chain products,
//! so an iteration costs `O(S·(M²L + N²K))`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::propagation::{scale_cols, scale_rows, PhaseState, PropagationOperators};
use crate::seeding::child_seed;

/// Hyperparameters of the descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitHyperparams {
    /// Initial learning rate η₀.
    pub initial_learning_rate: f64,
    /// Per-iteration decay β of the learning rate, in (0, 1).
    pub decay: f64,
    /// Iteration cap per start.
    pub max_iters: usize,
    /// Number of independent random initializations.
    pub n_starts: usize,
    /// Stop once the loss changes by less than `stop_delta · ‖Λ_S‖_F²`
    /// between consecutive iterations.
    pub stop_delta: f64,
}

impl Default for FitHyperparams {
    fn default() -> Self {
        FitHyperparams {
            initial_learning_rate: 0.1,
            decay: 0.5,
            max_iters: 100,
            n_starts: 10,
            stop_delta: 1e-6,
        }
    }
}

impl FitHyperparams {
    fn validate(&self) {
        assert!(self.initial_learning_rate > 0.0, "learning rate must be positive");
        assert!(self.decay > 0.0 && self.decay < 1.0, "decay must lie in (0, 1)");
        assert!(self.max_iters >= 1, "at least one iteration required");
        assert!(self.n_starts >= 1, "at least one start required");
    }
}

/// Outcome of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Best phases (and scaling factor α) seen anywhere along the winning
    /// start's trace.
    pub phases: PhaseState,
    /// Loss Γ per iteration of the winning start; entry 0 is the
    /// post-initialization loss. If the best iterate was not the last one,
    /// the returned Γ is appended, so the final entry always matches
    /// [`FitResult::final_loss`].
    pub loss_trace: Vec<f64>,
    /// Fitting NMSE `Γ / ‖Λ_S‖_F²` of the returned phases.
    pub final_nmse: f64,
    /// Gradient iterations spent by the winning start.
    pub iterations: usize,
    /// Index of the winning initialization.
    pub start_index: usize,
    /// Best loss reached by each start.
    pub start_losses: Vec<f64>,
}

impl FitResult {
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("trace is never empty")
    }
}

/// Forward-pass products reused by the gradient assembly.
struct ForwardPass {
    /// `tx_partial[l] = W^{l+1}·Φ^l·W^l···Φ^1·W^1` (M×S), the chain below
    /// layer `l+1` with that layer's own phases left out.
    tx_partial: Vec<DMatrix<Complex64>>,
    /// `rx_partial[k] = U^1·Ψ^1···U^{k+1}` (S×N), the chain above layer
    /// `k+1` with that layer's own phases left out.
    rx_partial: Vec<DMatrix<Complex64>>,
    /// `Q·G` (S×M).
    qg: DMatrix<Complex64>,
    /// `G·P` (N×S).
    gp: DMatrix<Complex64>,
    /// `H = Q·G·P` (S×S).
    h: DMatrix<Complex64>,
}

impl ForwardPass {
    fn compute(
        ops: &PropagationOperators,
        phases: &PhaseState,
        g: &DMatrix<Complex64>,
    ) -> ForwardPass {
        let tx_layers = ops.tx_layers();
        let rx_layers = ops.rx_layers();
        assert_eq!(phases.theta.nrows(), tx_layers);
        assert_eq!(phases.theta.ncols(), ops.tx_atoms());
        assert_eq!(phases.xi.nrows(), rx_layers);
        assert_eq!(phases.xi.ncols(), ops.rx_atoms());
        assert_eq!(g.nrows(), ops.rx_atoms());
        assert_eq!(g.ncols(), ops.tx_atoms());

        let mut tx_partial = Vec::with_capacity(tx_layers);
        let mut acc = ops.tx.input.clone();
        for l in 0..tx_layers {
            if l > 0 {
                acc = &ops.tx.between[l - 1] * acc;
            }
            tx_partial.push(acc.clone());
            scale_rows(&mut acc, |m| phases.tx_coefficient(l, m));
        }
        let p = acc;

        let mut rx_partial = Vec::with_capacity(rx_layers);
        let mut acc = ops.rx.output.clone();
        for k in 0..rx_layers {
            rx_partial.push(acc.clone());
            scale_cols(&mut acc, |n| phases.rx_coefficient(k, n));
            if k + 1 < rx_layers {
                acc = acc * &ops.rx.between[k];
            }
        }
        let q = acc;

        let qg = &q * g;
        let gp = g * &p;
        let h = &qg * &p;
        ForwardPass { tx_partial, rx_partial, qg, gp, h }
    }
}

/// Fitting error `Γ = ‖α·Q·G·P − Λ_S‖_F²` at the state's current α.
pub fn loss(
    phases: &PhaseState,
    ops: &PropagationOperators,
    g: &DMatrix<Complex64>,
    target: &DMatrix<Complex64>,
) -> f64 {
    let fp = ForwardPass::compute(ops, phases, g);
    loss_of(&fp.h, phases.alpha, target)
}

fn loss_of(h: &DMatrix<Complex64>, alpha: Complex64, target: &DMatrix<Complex64>) -> f64 {
    let mut acc = 0.0;
    for (hv, tv) in h.iter().zip(target.iter()) {
        acc += (alpha * hv - tv).norm_sqr();
    }
    acc
}

/// Partial derivatives of Γ with respect to every TX phase (L×M) and RX phase
/// (K×N), holding α fixed at its current value.
pub fn gradient(
    phases: &PhaseState,
    ops: &PropagationOperators,
    g: &DMatrix<Complex64>,
    target: &DMatrix<Complex64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let fp = ForwardPass::compute(ops, phases, g);
    gradient_from_forward(&fp, phases, ops, target)
}

fn gradient_from_forward(
    fp: &ForwardPass,
    phases: &PhaseState,
    ops: &PropagationOperators,
    target: &DMatrix<Complex64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let streams = ops.streams();
    let tx_layers = ops.tx_layers();
    let rx_layers = ops.rx_layers();
    let tx_atoms = ops.tx_atoms();
    let rx_atoms = ops.rx_atoms();
    let alpha = phases.alpha;

    // Residual E = α·H − Λ.
    let residual = DMatrix::from_fn(streams, streams, |s, st| {
        alpha * fp.h[(s, st)] - target[(s, st)]
    });

    let mut dtheta = DMatrix::zeros(tx_layers, tx_atoms);
    // Descend from the outermost TX layer; `upper` is the chain from the
    // receiver down to (and excluding) the current layer's phases.
    let mut upper = fp.qg.clone();
    for l in (0..tx_layers).rev() {
        let lower = &fp.tx_partial[l];
        for m in 0..tx_atoms {
            let mut cascade_sum = Complex64::default();
            for s in 0..streams {
                let mut inner = Complex64::default();
                for st in 0..streams {
                    inner += lower[(m, st)].conj() * residual[(s, st)];
                }
                cascade_sum += upper[(s, m)].conj() * inner;
            }
            let coeff = (alpha * phases.tx_coefficient(l, m)).conj();
            dtheta[(l, m)] = 2.0 * (coeff * cascade_sum).im;
        }
        if l > 0 {
            scale_cols(&mut upper, |m| phases.tx_coefficient(l, m));
            upper = upper * &ops.tx.between[l - 1];
        }
    }

    let mut dxi = DMatrix::zeros(rx_layers, rx_atoms);
    // Ascend from the innermost RX layer; `lower` is the chain from the
    // current layer (phases excluded) down to the transmitter.
    let mut lower = fp.gp.clone();
    for k in (0..rx_layers).rev() {
        let upper = &fp.rx_partial[k];
        for n in 0..rx_atoms {
            let mut cascade_sum = Complex64::default();
            for s in 0..streams {
                let mut inner = Complex64::default();
                for st in 0..streams {
                    inner += lower[(n, st)].conj() * residual[(s, st)];
                }
                cascade_sum += upper[(s, n)].conj() * inner;
            }
            let coeff = (alpha * phases.rx_coefficient(k, n)).conj();
            dxi[(k, n)] = 2.0 * (coeff * cascade_sum).im;
        }
        if k > 0 {
            scale_rows(&mut lower, |n| phases.rx_coefficient(k, n));
            lower = &ops.rx.between[k - 1] * lower;
        }
    }

    (dtheta, dxi)
}

/// Rescales each layer's partial derivatives so its largest magnitude becomes
/// π. The normalizer uses the maximum absolute derivative per layer; an
/// all-zero layer is passed through unscaled.
pub fn normalize_gradient(
    dtheta: &DMatrix<f64>,
    dxi: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut nt = dtheta.clone();
    let mut nx = dxi.clone();
    for m in [&mut nt, &mut nx] {
        for l in 0..m.nrows() {
            let peak = (0..m.ncols()).map(|c| m[(l, c)].abs()).fold(0.0f64, f64::max);
            if peak > 0.0 {
                let scale = PI / peak;
                for c in 0..m.ncols() {
                    m[(l, c)] *= scale;
                }
            }
        }
    }
    (nt, nx)
}

/// One phase update `θ ← θ − η·∂Γ/∂θ`, `ξ ← ξ − η·∂Γ/∂ξ`, re-wrapped into
/// `[0, 2π)`. The scaling factor is carried over unchanged.
pub fn step(
    phases: &PhaseState,
    dtheta: &DMatrix<f64>,
    dxi: &DMatrix<f64>,
    eta: f64,
) -> PhaseState {
    let mut next = PhaseState {
        theta: &phases.theta - dtheta * eta,
        xi: &phases.xi - dxi * eta,
        alpha: phases.alpha,
    };
    next.wrap();
    next
}

/// Least-squares optimal scaling factor `α = (h^H h)^{-1} h^H λ` over the
/// vectorized matrices; returns 0 for an identically zero channel (degenerate
/// fit).
pub fn update_alpha(h: &DMatrix<Complex64>, target: &DMatrix<Complex64>) -> Complex64 {
    assert_eq!(h.shape(), target.shape(), "channel and target must have equal shapes");
    let mut num = Complex64::default();
    let mut den = 0.0;
    for (hv, tv) in h.iter().zip(target.iter()) {
        num += hv.conj() * tv;
        den += hv.norm_sqr();
    }
    if den == 0.0 {
        Complex64::default()
    } else {
        num / den
    }
}

/// Negative-exponential learning-rate schedule: `η ← η·β`.
pub fn decay_lr(eta: f64, beta: f64) -> f64 {
    eta * beta
}

/// Runs the full multi-start descent and returns the best fit found.
///
/// Each start draws i.i.d. uniform phases from its own child stream of
/// `seed`, initializes α by least squares, then iterates until the loss
/// change drops below the threshold or the iteration cap is reached. The best
/// (Γ, phases, α) seen anywhere along a trace is kept; the start with the
/// lowest best Γ wins.
pub fn fit(
    ops: &PropagationOperators,
    g: &DMatrix<Complex64>,
    target: &DMatrix<Complex64>,
    hyper: &FitHyperparams,
    seed: u64,
) -> FitResult {
    hyper.validate();
    let target_norm_sq: f64 = target.iter().map(|t| t.norm_sqr()).sum();
    assert!(target_norm_sq > 0.0, "fit target must be nonzero");
    let stop_abs = hyper.stop_delta * target_norm_sq;

    let mut best: Option<FitResult> = None;
    let mut start_losses = Vec::with_capacity(hyper.n_starts);
    for start in 0..hyper.n_starts {
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, start as u64));
        let mut phases = PhaseState::random(
            ops.tx_layers(),
            ops.tx_atoms(),
            ops.rx_layers(),
            ops.rx_atoms(),
            &mut rng,
        );
        let fp = ForwardPass::compute(ops, &phases, g);
        phases.alpha = update_alpha(&fp.h, target);
        let mut current = loss_of(&fp.h, phases.alpha, target);
        let mut trace = vec![current];
        let mut best_here = (current, phases.clone());
        let mut forward = fp;
        let mut eta = hyper.initial_learning_rate;
        let mut iterations = 0;

        for _ in 0..hyper.max_iters {
            let (dtheta, dxi) = gradient_from_forward(&forward, &phases, ops, target);
            let (dtheta, dxi) = normalize_gradient(&dtheta, &dxi);
            phases = step(&phases, &dtheta, &dxi, eta);
            forward = ForwardPass::compute(ops, &phases, g);
            phases.alpha = update_alpha(&forward.h, target);
            eta = decay_lr(eta, hyper.decay);
            let next = loss_of(&forward.h, phases.alpha, target);
            trace.push(next);
            iterations += 1;
            if next < best_here.0 {
                best_here = (next, phases.clone());
            }
            let decrement = current - next;
            current = next;
            if decrement.abs() < stop_abs {
                break;
            }
        }

        let (best_loss, best_phases) = best_here;
        start_losses.push(best_loss);
        if trace.last().copied() != Some(best_loss) {
            trace.push(best_loss);
        }
        let candidate = FitResult {
            phases: best_phases,
            final_nmse: best_loss / target_norm_sq,
            loss_trace: trace,
            iterations,
            start_index: start,
            start_losses: Vec::new(),
        };
        if best.as_ref().map_or(true, |b| candidate.final_loss() < b.final_loss()) {
            best = Some(candidate);
        }
    }
    let mut result = best.expect("at least one start");
    result.start_losses = start_losses;
    result
}

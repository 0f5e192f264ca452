//! Simulation library for stacked-intelligent-metasurface (SIM) aided
//! holographic MIMO links.
//!
//! The pipeline, end to end: [`geometry`] places meta-atoms and antennas,
//! [`propagation`] turns distances into fixed diffraction operators and
//! composes them with tunable phases into the wave-domain precoder and
//! combiner, [`channel`] draws spatially correlated Rayleigh fading between
//! the two apertures, [`target`] extracts the truncated-SVD diagonal target
//! with water-filling power allocation, [`optimizer`] fits the scaled
//! end-to-end channel to that target by gradient descent over all phase
//! shifts, [`metrics`] scores the result (NMSE, interference-aware capacity,
//! capacity bounds, BPSK error rates), and [`harness`] sweeps parameters
//! reproducibly and persists CSV/JSON results.

pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod optimizer;
pub mod propagation;
pub mod seeding;
pub mod target;

pub use channel::{ChannelModel, ChannelRealization, CorrelationKind, PathLossParams};
pub use error::{Result, SimError};
pub use geometry::{LatticeIndex, Side, SimArchitecture, SurfaceLayout};
pub use metrics::{BerReport, CapacityBounds, LinkBudget, Prop2Estimate};
pub use optimizer::{FitHyperparams, FitResult};
pub use propagation::{PhaseState, PropagationOperators};
pub use target::{PowerAllocation, SvdTarget};

//! Implicit recurrent neural networks.
//!
//! Networks whose activations are defined as the fixed point of
//! `Y = f(W·Y + Q·X + T)` rather than by a finite feed-forward pass. The
//! forward pass integrates a relaxation ODE to equilibrium; backpropagation
//! differentiates through the equilibrium itself with dense linear solves,
//! so no chain of iterative update steps is ever unrolled.
//!
//! Modules:
//!
//! - [`numeric`] — dense matrix/vector containers, LU solve, sigmoid, seeded RNG
//! - [`equilibrium`] — relaxation-ODE solvers (RK4 and explicit Euler)
//! - [`network`] — parameter containers, initialization, forward passes, model files
//! - [`gradient`] — exact implicit gradients, the semi-gradient approximation,
//!   and independent verification oracles (finite differences, unrolled
//!   iteration, Neumann series)
//! - [`optim`] — Adam, one state per parameter block
//! - [`dataset`] — XOR task and damped-oscillator regression data
//! - [`training`] — batch training loop, evaluation, multi-run experiments

pub mod dataset;
pub mod equilibrium;
pub mod error;
pub mod gradient;
pub mod network;
pub mod numeric;
pub mod optim;
pub mod training;

pub use dataset::{DatasetMeta, OscillatorSample, TargetMap, XorSample};
pub use equilibrium::{Equilibrium, SolverConfig, SolverMethod, TwoLayerEquilibrium};
pub use error::{Error, Result};
pub use gradient::{FeedForwardGrads, OneLayerGrads, SensitivityMatrix, TwoLayerGrads};
pub use network::{FeedForwardParams, Model, OneLayerParams, TwoLayerParams};
pub use numeric::{Matrix, Rng, Vector};
pub use optim::AdamState;
pub use training::{Arch, ExperimentResult, MetricsRow, Split, SummaryRow, TrainConfig};

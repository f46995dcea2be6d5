//! Bayesian pseudo-label training of physics-informed networks.
//!
//! A tanh MLP `u_θ(x, t)` is fitted to a 1D time-dependent PDE by Hamiltonian
//! Monte Carlo over its weights. Training starts from the initial condition
//! and repeatedly labels collocation points where the posterior ensemble is
//! confident and close to existing labels, growing the active domain until
//! it covers `[0, 2π) × [0, 1]`.
//!
//! Module map:
//! - [`autodiff`]: input jets and a reverse-mode tape over them
//! - [`network`]: MLP parameters, single-point and batched evaluation
//! - [`systems`]: benchmark PDEs and their reference solutions
//! - [`data`]: point sets, Latin hypercube sampling, normalized geometry
//! - [`objective`]: per-group sums of squares shared by both objectives
//! - [`posterior`]: log posterior and its gradient
//! - [`optimizer`]: Adam on the weighted PINN loss
//! - [`sampler`]: HMC with dual-averaging step size adaptation
//! - [`pltrain`]: the pseudo-label outer loop and baselines
//! - [`eval`]: relative L2 error and field exports

pub mod autodiff;
pub mod data;
pub mod eval;
pub mod network;
pub mod objective;
pub mod optimizer;
pub mod pltrain;
pub mod posterior;
pub mod sampler;
pub mod systems;

pub mod rng;

pub use autodiff::{Jet2, Tape};
pub use network::{Architecture, Mlp, ParameterVector};
pub use systems::{SystemKind, SystemSpec};
pub use data::{DataBundle, LabeledPoint, Point};
pub use posterior::PosteriorSpec;
pub use optimizer::{AdamConfig, LossWeights};
pub use sampler::{ChainResult, SamplerConfig};
pub use pltrain::{EnsembleStats, Method, PseudoLabelConfig, TrainConfig, TrainHistory};

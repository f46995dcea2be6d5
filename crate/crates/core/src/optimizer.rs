//! Full-batch Adam on the weighted PINN loss
//! `ω_ic · MSE(labeled) + ω_bc · mean |b|² + ω_pde · mean f²`.
//!
//! The labeled term averages over IC points and pseudo-labels together.

use std::io::{self, Write};

use crate::data::{ActiveSets, DataBundle};
use crate::network::{Mlp, ParameterVector};
use crate::objective::{Group, Objective, Terms};
use crate::systems::SystemSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimizerError {
    #[error("non-finite gradient entry {index} at step {step}")]
    NonFiniteGradient { step: u64, index: usize },
    #[error("loss diverged to {loss} at epoch {epoch}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("gradient has length {got}, parameters {expected}")]
    Length { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(config: AdamConfig, dim: usize) -> Self {
        AdamState { config, step: 0, m: vec![0.0; dim], v: vec![0.0; dim] }
    }
}

/// One bias-corrected Adam update. On a non-finite gradient nothing is
/// modified.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64]) -> Result<(), OptimizerError> {
    if grad.len() != params.len() || state.m.len() != params.len() {
        return Err(OptimizerError::Length { expected: params.len(), got: grad.len() });
    }
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(OptimizerError::NonFiniteGradient { step: state.step + 1, index });
    }
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let c1 = 1.0 - beta1.powi(state.step as i32);
    let c2 = 1.0 - beta2.powi(state.step as i32);
    for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut state.m).zip(&mut state.v) {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub ic: f64,
    pub bc: f64,
    pub pde: f64,
}

impl LossWeights {
    pub fn uniform() -> Self {
        LossWeights { ic: 1.0, bc: 1.0, pde: 1.0 }
    }

    /// Boundary and PDE weights scaled by the active fraction of each set.
    pub fn ensemble(bundle: &DataBundle, active: &ActiveSets) -> Self {
        let frac = |a: usize, n: usize| if n == 0 { 0.0 } else { a as f64 / n as f64 };
        LossWeights { ic: 1.0, bc: frac(active.bc.len(), bundle.bc.len()), pde: frac(active.pde.len(), bundle.pde.len()) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub labeled: f64,
    pub bc: f64,
    pub pde: f64,
}

fn labeled_mse(t: &Terms) -> f64 {
    let n = t.count(Group::Ic) + t.count(Group::Pl);
    if n == 0 {
        0.0
    } else {
        (t.ss(Group::Ic) + t.ss(Group::Pl)) / n as f64
    }
}

fn breakdown(t: &Terms, w: LossWeights) -> LossBreakdown {
    let labeled = labeled_mse(t);
    let (bc, pde) = (t.mean(Group::Bc), t.mean(Group::Pde));
    LossBreakdown { total: w.ic * labeled + w.bc * bc + w.pde * pde, labeled, bc, pde }
}

fn coefficients(o: &Objective, w: LossWeights) -> [f64; 4] {
    let inv = |n: usize| if n == 0 { 0.0 } else { 1.0 / n as f64 };
    let l = w.ic * inv(o.ic.len() + o.pl.len());
    [l, l, w.bc * inv(o.bc.len()), w.pde * inv(o.pde.len())]
}

pub fn pinn_loss(mlp: &Mlp, params: &[f64], objective: &Objective, weights: LossWeights) -> LossBreakdown {
    breakdown(&objective.terms(mlp, params), weights)
}

/// Loss with its gradient written into `grad`.
pub fn pinn_loss_and_grad(
    mlp: &Mlp,
    params: &[f64],
    objective: &Objective,
    weights: LossWeights,
    grad: &mut [f64],
) -> LossBreakdown {
    grad.fill(0.0);
    let t = objective.terms_and_grad(mlp, params, coefficients(objective, weights), grad);
    breakdown(&t, weights)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
}

/// `epochs` full-batch Adam steps from `init`. Returns the final parameters
/// and the loss evaluated before each step.
pub fn train_adam(
    mlp: &Mlp,
    objective: &Objective,
    weights: LossWeights,
    init: ParameterVector,
    epochs: usize,
    config: AdamConfig,
) -> Result<(ParameterVector, Vec<LossRecord>), OptimizerError> {
    let mut params = init.into_vec();
    let mut state = AdamState::new(config, params.len());
    let mut grad = vec![0.0; params.len()];
    let mut curve = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let loss = pinn_loss_and_grad(mlp, &params, objective, weights, &mut grad);
        if !loss.total.is_finite() {
            return Err(OptimizerError::Diverged { epoch, loss: loss.total });
        }
        curve.push(LossRecord { epoch, loss });
        adam_step(&mut state, &mut params, &grad)?;
    }
    let params = ParameterVector::new(params).map_err(|_| OptimizerError::Diverged { epoch: epochs, loss: f64::NAN })?;
    Ok((params, curve))
}

/// Glorot initialization from `seed`, then Adam with uniform weights on the
/// IC and the given active subsets.
pub fn pretrain(
    mlp: &Mlp,
    system: SystemSpec,
    bundle: &DataBundle,
    active: &ActiveSets,
    epochs: usize,
    seed: u64,
    config: AdamConfig,
) -> Result<(ParameterVector, Vec<LossRecord>), OptimizerError> {
    let objective = Objective::from_bundle(system, bundle, active, true);
    train_adam(mlp, &objective, LossWeights::uniform(), mlp.init_parameters(seed), epochs, config)
}

/// CSV with columns `epoch,total,labeled,bc,pde`.
pub fn write_loss_curve<W: Write>(mut w: W, curve: &[LossRecord]) -> io::Result<()> {
    writeln!(w, "epoch,total,labeled,bc,pde")?;
    for r in curve {
        let l = r.loss;
        writeln!(w, "{},{:e},{:e},{:e},{:e}", r.epoch, l.total, l.labeled, l.bc, l.pde)?;
    }
    w.flush()
}

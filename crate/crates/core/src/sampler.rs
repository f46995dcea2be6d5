//! Hamiltonian Monte Carlo with an identity mass matrix.
//!
//! Each transition draws a standard-normal momentum, integrates
//! `H(q, p) = −log π(q) + ½|p|²` with leapfrog and accepts with probability
//! `min(1, exp(−ΔH))`. During burn-in the step size follows Nesterov dual
//! averaging toward a target acceptance rate; retained samples use the
//! frozen averaged step size.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::network::ParameterVector;
use crate::posterior::Posterior;
use crate::rng::{derive_seed, rng_from};

/// An unnormalized log density with gradient.
pub trait LogDensity {
    fn dim(&self) -> usize;
    /// Returns `log π(q)` and writes `∇ log π(q)` into `grad`.
    fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64;
}

impl LogDensity for Posterior {
    fn dim(&self) -> usize {
        Posterior::dim(self)
    }

    fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        Posterior::log_density_and_grad(self, q, grad)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("initial state is not finite or has log density {0}")]
    BadInit(f64),
    #[error("chain {chain}: no proposal accepted in {burnin} burn-in transitions (final step size {step_size:e})")]
    NoAcceptance { chain: usize, burnin: usize, step_size: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    /// Retained samples per chain.
    pub samples: usize,
    pub burnin: usize,
    pub leapfrog: usize,
    pub chains: usize,
    pub target_accept: f64,
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { samples: 100, burnin: 100, leapfrog: 128, chains: 2, target_accept: 0.6, initial_step: 1e-3, seed: 0 }
    }
}

impl SamplerConfig {
    /// Reduced budget for single-core runs.
    pub fn desk_scale() -> Self {
        SamplerConfig { samples: 50, burnin: 50, leapfrog: 64, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.samples == 0 || self.burnin == 0 || self.leapfrog == 0 || self.chains == 0 {
            return Err(SamplerError::Config("samples, burnin, leapfrog and chains must be at least 1".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(SamplerError::Config(format!("target_accept must lie in (0, 1), got {}", self.target_accept)));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(SamplerError::Config(format!("initial_step must be positive, got {}", self.initial_step)));
        }
        Ok(())
    }
}

/// Dual-averaging step-size controller.
#[derive(Debug, Clone, PartialEq)]
pub struct DualAveraging {
    mu: f64,
    target: f64,
    h_bar: f64,
    log_step: f64,
    log_step_bar: f64,
    m: u64,
}

impl DualAveraging {
    pub const GAMMA: f64 = 0.05;
    pub const T0: f64 = 10.0;
    pub const KAPPA: f64 = 0.75;

    /// Shrinks toward `ln(initial_step)`.
    pub fn new(initial_step: f64, target: f64) -> Self {
        let l = initial_step.ln();
        DualAveraging { mu: l, target, h_bar: 0.0, log_step: l, log_step_bar: l, m: 0 }
    }

    /// Current (noisy) step size used during adaptation.
    pub fn step(&self) -> f64 {
        self.log_step.exp()
    }

    /// Averaged step size, frozen after burn-in.
    pub fn averaged(&self) -> f64 {
        self.log_step_bar.exp()
    }

    /// Feeds one acceptance statistic and returns the next step size.
    pub fn update(&mut self, accept_prob: f64) -> f64 {
        self.m += 1;
        let m = self.m as f64;
        let w = 1.0 / (m + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_prob);
        self.log_step = self.mu - m.sqrt() / Self::GAMMA * self.h_bar;
        let eta = m.powf(-Self::KAPPA);
        self.log_step_bar = eta * self.log_step + (1.0 - eta) * self.log_step_bar;
        self.step()
    }
}

/// Step size after replaying `history` of acceptance statistics.
pub fn adapt_stepsize(history: &[f64], target: f64, initial_step: f64) -> f64 {
    let mut da = DualAveraging::new(initial_step, target);
    for &a in history {
        da.update(a);
    }
    da.step()
}

/// End state of a leapfrog trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub log_density: f64,
    pub grad: Vec<f64>,
}

/// `steps` leapfrog steps from `(q, p)` with `grad0 = ∇ log π(q)`.
/// Returns `None` once the state, density or gradient is non-finite.
pub fn leapfrog<T: LogDensity + ?Sized>(
    target: &T,
    q: &[f64],
    p: &[f64],
    grad0: &[f64],
    step: f64,
    steps: usize,
) -> Option<Trajectory> {
    let (mut q, mut p, mut grad) = (q.to_vec(), p.to_vec(), grad0.to_vec());
    let mut logp = f64::NAN;
    for s in 0..steps {
        for (pi, g) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * step * g;
        }
        for (qi, pi) in q.iter_mut().zip(&p) {
            *qi += step * pi;
        }
        logp = target.log_density_and_grad(&q, &mut grad);
        if !logp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return None;
        }
        for (pi, g) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * step * g;
        }
        debug_assert!(s < steps);
    }
    if steps == 0 {
        logp = target.log_density_and_grad(&q, &mut grad);
    }
    if q.iter().chain(&p).all(|v| v.is_finite()) {
        Some(Trajectory { q, p, log_density: logp, grad })
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Burnin,
    Sampling,
}

/// One transition's record for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub phase: Phase,
    pub step_size: f64,
    pub accept_prob: f64,
    pub accepted: bool,
    pub divergent: bool,
    pub log_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    /// Retained samples, burn-in excluded.
    pub samples: Vec<ParameterVector>,
    /// Fraction of retained transitions that were accepted.
    pub acceptance_rate: f64,
    pub final_stepsize: f64,
    pub last_sample: ParameterVector,
    pub trace: Vec<Transition>,
}

fn half_sq(p: &[f64]) -> f64 {
    0.5 * p.iter().map(|v| v * v).sum::<f64>()
}

/// One chain: `burnin` adapted transitions, then `samples` at a frozen step.
pub fn hmc_chain<T: LogDensity + ?Sized>(
    target: &T,
    init: &[f64],
    config: &SamplerConfig,
    chain_seed: u64,
    chain_index: usize,
) -> Result<ChainResult, SamplerError> {
    config.validate()?;
    let dim = target.dim();
    let mut rng = rng_from(chain_seed);
    let mut q = init.to_vec();
    let mut grad = vec![0.0; dim];
    let mut logp = target.log_density_and_grad(&q, &mut grad);
    if !logp.is_finite() || q.iter().chain(&grad).any(|v| !v.is_finite()) {
        return Err(SamplerError::BadInit(logp));
    }

    let mut da = DualAveraging::new(config.initial_step, config.target_accept);
    let mut trace = Vec::with_capacity(config.burnin + config.samples);
    let mut samples = Vec::with_capacity(config.samples);
    let mut burnin_accepts = 0usize;
    let mut kept_accepts = 0usize;
    let mut step = config.initial_step;

    for it in 0..config.burnin + config.samples {
        let phase = if it < config.burnin { Phase::Burnin } else { Phase::Sampling };
        if it == config.burnin {
            step = da.averaged();
        }
        let p0: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let h0 = -logp + half_sq(&p0);
        let proposal = leapfrog(target, &q, &p0, &grad, step, config.leapfrog);
        let (accept_prob, candidate) = match proposal {
            Some(tr) => {
                let h1 = -tr.log_density + half_sq(&tr.p);
                let a = if h1.is_finite() { (h0 - h1).exp().min(1.0) } else { 0.0 };
                (a, if h1.is_finite() { Some(tr) } else { None })
            }
            None => (0.0, None),
        };
        let divergent = candidate.is_none();
        let u: f64 = rng.random();
        let accepted = candidate.is_some() && u < accept_prob;
        if accepted {
            let tr = candidate.expect("checked above");
            q = tr.q;
            grad = tr.grad;
            logp = tr.log_density;
        }
        trace.push(Transition { phase, step_size: step, accept_prob, accepted, divergent, log_density: logp });
        match phase {
            Phase::Burnin => {
                burnin_accepts += usize::from(accepted);
                step = da.update(accept_prob);
                if it + 1 == config.burnin && burnin_accepts == 0 {
                    return Err(SamplerError::NoAcceptance {
                        chain: chain_index,
                        burnin: config.burnin,
                        step_size: da.averaged(),
                    });
                }
            }
            Phase::Sampling => {
                kept_accepts += usize::from(accepted);
                samples.push(ParameterVector::new(q.clone()).expect("accepted states are finite"));
            }
        }
    }
    let last_sample = samples.last().cloned().expect("samples >= 1");
    Ok(ChainResult {
        acceptance_rate: kept_accepts as f64 / config.samples as f64,
        final_stepsize: step,
        samples,
        last_sample,
        trace,
    })
}

/// Retained samples of all chains plus per-chain summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    /// Chain-major: all samples of chain 0, then chain 1, ...
    pub samples: Vec<ParameterVector>,
    /// Last sample of the last chain, used to warm-start the next iteration.
    pub last: ParameterVector,
    pub chains: Vec<ChainSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub acceptance_rate: f64,
    pub final_stepsize: f64,
    pub trace: Vec<Transition>,
}

impl PosteriorSamples {
    pub fn acceptance_rate(&self) -> f64 {
        self.chains.iter().map(|c| c.acceptance_rate).sum::<f64>() / self.chains.len() as f64
    }

    /// Per-transition CSV:
    /// `chain,transition,phase,step_size,accept_prob,accepted,divergent,log_density`.
    pub fn write_diagnostics<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "chain,transition,phase,step_size,accept_prob,accepted,divergent,log_density")?;
        for (c, ch) in self.chains.iter().enumerate() {
            for (i, t) in ch.trace.iter().enumerate() {
                let phase = match t.phase {
                    Phase::Burnin => "burnin",
                    Phase::Sampling => "sampling",
                };
                writeln!(
                    w,
                    "{c},{i},{phase},{:e},{:e},{},{},{:e}",
                    t.step_size, t.accept_prob, t.accepted as u8, t.divergent as u8, t.log_density
                )?;
            }
        }
        w.flush()
    }
}

/// Runs `config.chains` chains from `init`, chain `c` seeded by
/// `derive_seed(config.seed, c)`.
pub fn sample_posterior<T: LogDensity + ?Sized>(
    target: &T,
    init: &ParameterVector,
    config: &SamplerConfig,
) -> Result<PosteriorSamples, SamplerError> {
    config.validate()?;
    let mut samples = Vec::with_capacity(config.chains * config.samples);
    let mut chains = Vec::with_capacity(config.chains);
    let mut last = init.clone();
    for c in 0..config.chains {
        let r = hmc_chain(target, init.as_slice(), config, derive_seed(config.seed, c as u64), c)?;
        samples.extend(r.samples);
        last = r.last_sample;
        chains.push(ChainSummary { acceptance_rate: r.acceptance_rate, final_stepsize: r.final_stepsize, trace: r.trace });
    }
    Ok(PosteriorSamples { samples, last, chains })
}

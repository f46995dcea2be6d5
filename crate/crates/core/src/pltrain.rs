//! The pseudo-label outer loop and the two baselines it is compared with.
//!
//! One iteration:
//! 1. activate collocation and boundary points within `Δ_pde` of labeled data
//! 2. sample the posterior on the active sets, starting from the last sample
//! 3. evaluate ensemble statistics at every unlabeled active point
//! 4. pseudo-label points that are close to a reliable anchor and on which
//!    the ensemble agrees
//!
//! Gating reads the labeled set as it stood at the start of the pass, and
//! accepted labels are appended in collocation-index order.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::time::Instant;

use crate::data::{nearest_labeled, DataBundle, DataSizes, Domain, LabeledPoint, Point};
use crate::eval::{predictions, EvalError, Evaluator};
use crate::network::{Architecture, Mlp, NetworkError, ParameterVector};
use crate::objective::Objective;
use crate::optimizer::{pretrain, train_adam, AdamConfig, LossRecord, LossWeights, OptimizerError};
use crate::posterior::{LabelMode, Posterior, PosteriorError, PosteriorSpec};
use crate::rng::derive_seed;
use crate::sampler::{sample_posterior, SamplerConfig, SamplerError};
use crate::systems::{SystemKind, SystemSpec};

pub const PRETRAIN_EPOCHS: usize = 4000;

/// Seed streams derived from the master seed.
pub mod streams {
    pub const DATA: u64 = 1;
    pub const INIT: u64 = 2;
    pub const SAMPLER: u64 = 1_000;
    pub const MEMBER: u64 = 1_000_000;
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("iteration {iteration}: {source}")]
    Sampler { iteration: usize, source: SamplerError },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    BayesPl,
    BayesNoPl,
    Vanilla,
    EnsemblePl,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::BayesPl, Method::BayesNoPl, Method::Vanilla, Method::EnsemblePl];

    pub fn name(self) -> &'static str {
        match self {
            Method::BayesPl => "bayes-pl",
            Method::BayesNoPl => "bayes-nopl",
            Method::Vanilla => "vanilla",
            Method::EnsemblePl => "ensemble-pl",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected bayes-pl, bayes-nopl, vanilla or ensemble-pl)"))
    }
}

/// Iteration budget per system: 60 for reaction and reaction-diffusion,
/// 80/100 for diffusion below/at `d = 10`, 100/150 for convection below/at
/// `β = 40`.
pub fn default_iterations(spec: &SystemSpec) -> usize {
    match spec.kind {
        SystemKind::Reaction { .. } | SystemKind::ReactionDiffusion { .. } => 60,
        SystemKind::Diffusion { d } => {
            if d >= 10.0 {
                100
            } else {
                80
            }
        }
        SystemKind::Convection { beta } => {
            if beta >= 40.0 {
                150
            } else {
                100
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoLabelConfig {
    /// Maximum normalized distance from candidate to its anchor.
    pub delta: f64,
    /// Activation radius.
    pub delta_pde: f64,
    /// Tolerance between anchor label and ensemble mean at the anchor.
    pub epsilon: f64,
    pub sigma2_consens: f64,
    pub mode: LabelMode,
    pub iterations: usize,
    /// Stop once every collocation point carries a pseudo-label.
    pub early_stop: bool,
}

impl PseudoLabelConfig {
    pub fn for_system(spec: &SystemSpec) -> Self {
        PseudoLabelConfig {
            delta: 0.05,
            delta_pde: 0.1,
            epsilon: 1e-3,
            sigma2_consens: 2e-4,
            mode: LabelMode::Pl,
            iterations: default_iterations(spec),
            early_stop: false,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        // infinite epsilon / variance thresholds are allowed as ablations
        let pos = |v: f64| v > 0.0 && !v.is_nan();
        if !(pos(self.delta) && pos(self.delta_pde) && pos(self.epsilon) && pos(self.sigma2_consens)) {
            return Err(TrainError::Config("pseudo-label thresholds must be positive".into()));
        }
        if self.delta > self.delta_pde {
            return Err(TrainError::Config(format!(
                "delta ({}) must not exceed delta_pde ({})",
                self.delta, self.delta_pde
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointStats {
    pub mean: f64,
    pub median: f64,
    pub variance: f64,
}

/// Per-point sample mean, median and population variance.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub variance: Vec<f64>,
}

impl EnsembleStats {
    /// `preds[s][i]` is sample `s` at point `i`.
    pub fn from_predictions(preds: &[Vec<f64>]) -> Self {
        let n = preds.len();
        let m = preds.first().map_or(0, Vec::len);
        let mut stats = EnsembleStats { mean: vec![0.0; m], median: vec![0.0; m], variance: vec![0.0; m] };
        let mut col = vec![0.0; n];
        for i in 0..m {
            for (c, row) in col.iter_mut().zip(preds) {
                *c = row[i];
            }
            let mean = col.iter().sum::<f64>() / n as f64;
            stats.mean[i] = mean;
            stats.variance[i] = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            col.sort_by(f64::total_cmp);
            stats.median[i] = if n % 2 == 1 { col[n / 2] } else { 0.5 * (col[n / 2 - 1] + col[n / 2]) };
        }
        stats
    }

    pub fn compute(mlp: &Mlp, samples: &[ParameterVector], points: &[Point]) -> Self {
        Self::from_predictions(&predictions(mlp, samples, points))
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn get(&self, i: usize) -> PointStats {
        PointStats { mean: self.mean[i], median: self.median[i], variance: self.variance[i] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateDecision {
    Accept { label: f64 },
    TooFar,
    UnreliableAnchor,
    NoConsensus,
}

impl GateDecision {
    pub fn accepted(&self) -> Option<f64> {
        match *self {
            GateDecision::Accept { label } => Some(label),
            _ => None,
        }
    }
}

/// Gates one candidate. `anchor_means[j]` is the ensemble mean at
/// `labeled[j]`. All comparisons are strict.
// negated comparisons so that NaN statistics reject
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn gate(
    domain: &Domain,
    candidate: Point,
    labeled: &[LabeledPoint],
    anchor_means: &[f64],
    stats: PointStats,
    cfg: &PseudoLabelConfig,
) -> GateDecision {
    let Ok(near) = nearest_labeled(domain, candidate, labeled) else {
        return GateDecision::TooFar;
    };
    if !(near.distance < cfg.delta) {
        GateDecision::TooFar
    } else if !((near.point.u - anchor_means[near.index]).abs() < cfg.epsilon) {
        GateDecision::UnreliableAnchor
    } else if !(stats.variance < cfg.sigma2_consens) {
        GateDecision::NoConsensus
    } else {
        GateDecision::Accept { label: stats.median }
    }
}

/// Counts of gate outcomes in one pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GateCounts {
    pub accepted: usize,
    pub too_far: usize,
    pub unreliable_anchor: usize,
    pub no_consensus: usize,
}

/// Gates every unlabeled point of `candidates` against the current labeled
/// set and appends the accepted labels to `bundle`.
pub fn gate_and_label(
    bundle: &mut DataBundle,
    mlp: &Mlp,
    samples: &[ParameterVector],
    candidates: &[usize],
    cfg: &PseudoLabelConfig,
) -> GateCounts {
    let cands: Vec<usize> = candidates.iter().copied().filter(|&i| !bundle.is_pseudo_labeled(i)).collect();
    let labeled = bundle.labeled();
    let mut points: Vec<Point> = cands.iter().map(|&i| bundle.pde[i]).collect();
    points.extend(labeled.iter().map(|l| l.point()));
    let stats = EnsembleStats::compute(mlp, samples, &points);
    let anchor_means = &stats.mean[cands.len()..];
    let mut counts = GateCounts::default();
    let mut accepted = Vec::new();
    for (k, &i) in cands.iter().enumerate() {
        match gate(&bundle.domain, bundle.pde[i], &labeled, anchor_means, stats.get(k), cfg) {
            GateDecision::Accept { label } => {
                counts.accepted += 1;
                accepted.push((i, label));
            }
            GateDecision::TooFar => counts.too_far += 1,
            GateDecision::UnreliableAnchor => counts.unreliable_anchor += 1,
            GateDecision::NoConsensus => counts.no_consensus += 1,
        }
    }
    for (i, label) in accepted {
        bundle.add_pseudo_label(i, label);
    }
    counts
}

/// Ensemble baseline settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub members: usize,
    pub epochs_per_iteration: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { members: 5, epochs_per_iteration: 5000 }
    }
}

/// Everything one run needs besides the method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub system: SystemSpec,
    pub architecture: Architecture,
    pub sizes: DataSizes,
    pub posterior: PosteriorSpec,
    pub sampler: SamplerConfig,
    pub pseudo: PseudoLabelConfig,
    pub adam: AdamConfig,
    pub pretrain_epochs: usize,
    pub ensemble: EnsembleConfig,
    /// Vanilla epoch budget; `None` matches the pseudo-label runs:
    /// `pretrain_epochs + iterations · epochs_per_iteration`.
    pub vanilla_epochs: Option<usize>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(system: SystemSpec) -> Self {
        TrainConfig {
            system,
            architecture: Architecture::default(),
            sizes: DataSizes::default(),
            posterior: PosteriorSpec::default(),
            sampler: SamplerConfig::default(),
            pseudo: PseudoLabelConfig::for_system(&system),
            adam: AdamConfig::default(),
            pretrain_epochs: PRETRAIN_EPOCHS,
            ensemble: EnsembleConfig::default(),
            vanilla_epochs: None,
            seed: 0,
        }
    }

    /// Reduced budget: 50 samples, 50 burn-in, 64 leapfrog steps, half the
    /// iterations and 1000 ensemble epochs per iteration.
    pub fn desk_scale(mut self) -> Self {
        let seed = self.sampler.seed;
        self.sampler = SamplerConfig { seed, ..SamplerConfig::desk_scale() };
        self.pseudo.iterations = default_iterations(&self.system).div_ceil(2);
        self.ensemble.epochs_per_iteration = 1000;
        self
    }

    pub fn vanilla_budget(&self) -> usize {
        self.vanilla_epochs
            .unwrap_or(self.pretrain_epochs + self.pseudo.iterations * self.ensemble.epochs_per_iteration)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.posterior.validate()?;
        self.sampler.validate().map_err(|e| TrainError::Config(e.to_string()))?;
        self.pseudo.validate()?;
        if self.ensemble.members < 2 {
            return Err(TrainError::Config("ensemble needs at least 2 members".into()));
        }
        if self.sizes.ic == 0 {
            return Err(TrainError::Config("at least one IC point is required".into()));
        }
        Mlp::new(self.architecture)?;
        Ok(())
    }

    pub fn mlp(&self) -> Result<Mlp, TrainError> {
        Ok(Mlp::new(self.architecture)?)
    }

    pub fn build_bundle(&self) -> DataBundle {
        DataBundle::build(&self.system, self.sizes, derive_seed(self.seed, streams::DATA))
    }
}

/// One row of the training history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Size of the pseudo-label set after this iteration's gating.
    pub pl: usize,
    pub new_labels: usize,
    pub active_pde: usize,
    pub active_bc: usize,
    /// Mean retained-sample acceptance over chains; absent for the ensemble.
    pub acceptance_rate: Option<f64>,
    pub step_size: Option<f64>,
    pub relative_l2: Option<f64>,
    pub gate: GateCounts,
    pub seconds_fit: f64,
    pub seconds_gate: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<IterationRecord>,
}

impl TrainHistory {
    /// Records with wall times zeroed, for comparing runs.
    pub fn without_timing(&self) -> TrainHistory {
        let records = self.records.iter().map(|r| IterationRecord { seconds_fit: 0.0, seconds_gate: 0.0, ..*r }).collect();
        TrainHistory { records }
    }

    /// `true` when the pseudo-label count never decreases.
    pub fn pl_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[0].pl <= w[1].pl)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "iteration,pl,new_labels,active_pde,active_bc,acceptance_rate,step_size,relative_l2,\
             rejected_far,rejected_anchor,rejected_consensus,seconds_fit,seconds_gate"
        )?;
        let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{:.3},{:.3}",
                r.iteration,
                r.pl,
                r.new_labels,
                r.active_pde,
                r.active_bc,
                opt(r.acceptance_rate),
                opt(r.step_size),
                opt(r.relative_l2),
                r.gate.too_far,
                r.gate.unreliable_anchor,
                r.gate.no_consensus,
                r.seconds_fit,
                r.seconds_gate
            )?;
        }
        w.flush()
    }
}

/// Mutable state carried between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub bundle: DataBundle,
    pub theta: ParameterVector,
    pub iteration: usize,
}

/// Called after every iteration with its record and the current state.
pub type Observer<'a> = &'a mut dyn FnMut(&IterationRecord, &TrainState);

/// One sampling-and-gating iteration; advances `state` and returns the
/// retained samples.
pub fn train_iteration(
    state: &mut TrainState,
    cfg: &TrainConfig,
    mlp: &Mlp,
    evaluator: Option<&Evaluator>,
) -> Result<(Vec<ParameterVector>, IterationRecord), TrainError> {
    let it = state.iteration;
    let active = state.bundle.active(cfg.pseudo.delta_pde);
    let post = Posterior::new(mlp.clone(), cfg.posterior, cfg.system, &state.bundle, &active, cfg.pseudo.mode)?;
    let sampler = SamplerConfig { seed: derive_seed(cfg.seed, streams::SAMPLER + it as u64), ..cfg.sampler };
    let t0 = Instant::now();
    let drawn = sample_posterior(&post, &state.theta, &sampler).map_err(|source| TrainError::Sampler { iteration: it, source })?;
    let seconds_fit = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let before = state.bundle.pl.len();
    let gate = gate_and_label(&mut state.bundle, mlp, &drawn.samples, &active.pde, &cfg.pseudo);
    let seconds_gate = t1.elapsed().as_secs_f64();
    let relative_l2 = evaluator.map(|e| e.relative_l2(mlp, &drawn.samples)).transpose()?;
    let steps: f64 = drawn.chains.iter().map(|c| c.final_stepsize).sum::<f64>() / drawn.chains.len() as f64;

    let record = IterationRecord {
        iteration: it,
        pl: state.bundle.pl.len(),
        new_labels: state.bundle.pl.len() - before,
        active_pde: active.pde.len(),
        active_bc: active.bc.len(),
        acceptance_rate: Some(drawn.acceptance_rate()),
        step_size: Some(steps),
        relative_l2,
        gate,
        seconds_fit,
        seconds_gate,
    };
    state.theta = drawn.last.clone();
    state.iteration += 1;
    Ok((drawn.samples, record))
}

/// Result of a pseudo-label run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Final ensemble: posterior samples, or ensemble members.
    pub samples: Vec<ParameterVector>,
    pub bundle: DataBundle,
    pub history: TrainHistory,
    pub pretrain_curve: Vec<LossRecord>,
    /// Warm-start state after the last iteration.
    pub theta: ParameterVector,
}

/// Pretrained start of a Bayesian run: the bundle and `θ_init`.
pub fn initial_state(cfg: &TrainConfig, mlp: &Mlp) -> Result<(TrainState, Vec<LossRecord>), TrainError> {
    let bundle = cfg.build_bundle();
    let active = bundle.active(cfg.pseudo.delta_pde);
    let (theta, curve) =
        pretrain(mlp, cfg.system, &bundle, &active, cfg.pretrain_epochs, derive_seed(cfg.seed, streams::INIT), cfg.adam)?;
    Ok((TrainState { bundle, theta, iteration: 0 }, curve))
}

/// Full Bayesian pseudo-label training.
pub fn train(
    cfg: &TrainConfig,
    evaluator: Option<&Evaluator>,
    mut observer: Option<Observer<'_>>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let mlp = cfg.mlp()?;
    let (mut state, pretrain_curve) = initial_state(cfg, &mlp)?;
    let mut history = TrainHistory::default();
    let mut samples = vec![state.theta.clone()];
    while state.iteration < cfg.pseudo.iterations {
        let (s, record) = train_iteration(&mut state, cfg, &mlp, evaluator)?;
        samples = s;
        if let Some(obs) = observer.as_mut() {
            obs(&record, &state);
        }
        history.records.push(record);
        if cfg.pseudo.early_stop && state.bundle.pl.len() == state.bundle.pde.len() {
            break;
        }
    }
    Ok(TrainOutcome { samples, theta: state.theta.clone(), bundle: state.bundle, history, pretrain_curve })
}

/// Adam with uniform weights on every point for `cfg.vanilla_budget()` epochs.
pub fn baseline_vanilla(cfg: &TrainConfig) -> Result<(ParameterVector, Vec<LossRecord>), TrainError> {
    cfg.validate()?;
    let mlp = cfg.mlp()?;
    let bundle = cfg.build_bundle();
    let objective = Objective::from_bundle(cfg.system, &bundle, &bundle.all_active(), true);
    let init = mlp.init_parameters(derive_seed(cfg.seed, streams::INIT));
    Ok(train_adam(&mlp, &objective, LossWeights::uniform(), init, cfg.vanilla_budget(), cfg.adam)?)
}

/// Ensemble pseudo-labeling: independently initialized members retrained
/// (warm, fresh Adam state) on the active sets every iteration, with
/// ensemble statistics taken over the members.
pub fn baseline_ensemble_pl(
    cfg: &TrainConfig,
    evaluator: Option<&Evaluator>,
    mut observer: Option<Observer<'_>>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let mlp = cfg.mlp()?;
    let mut bundle = cfg.build_bundle();
    let mut members: Vec<ParameterVector> = (0..cfg.ensemble.members)
        .map(|k| mlp.init_parameters(derive_seed(cfg.seed, streams::MEMBER + k as u64)))
        .collect();
    let mut history = TrainHistory::default();
    for it in 0..cfg.pseudo.iterations {
        let active = bundle.active(cfg.pseudo.delta_pde);
        let weights = LossWeights::ensemble(&bundle, &active);
        let objective = Objective::from_bundle(cfg.system, &bundle, &active, cfg.pseudo.mode == LabelMode::Pl);
        let t0 = Instant::now();
        for m in members.iter_mut() {
            let (p, _) = train_adam(&mlp, &objective, weights, m.clone(), cfg.ensemble.epochs_per_iteration, cfg.adam)?;
            *m = p;
        }
        let seconds_fit = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let before = bundle.pl.len();
        let gate = gate_and_label(&mut bundle, &mlp, &members, &active.pde, &cfg.pseudo);
        let seconds_gate = t1.elapsed().as_secs_f64();
        let record = IterationRecord {
            iteration: it,
            pl: bundle.pl.len(),
            new_labels: bundle.pl.len() - before,
            active_pde: active.pde.len(),
            active_bc: active.bc.len(),
            acceptance_rate: None,
            step_size: None,
            relative_l2: evaluator.map(|e| e.relative_l2(&mlp, &members)).transpose()?,
            gate,
            seconds_fit,
            seconds_gate,
        };
        if let Some(obs) = observer.as_mut() {
            let state = TrainState { bundle: bundle.clone(), theta: members[0].clone(), iteration: it + 1 };
            obs(&record, &state);
        }
        history.records.push(record);
        if cfg.pseudo.early_stop && bundle.pl.len() == bundle.pde.len() {
            break;
        }
    }
    Ok(TrainOutcome { theta: members[0].clone(), samples: members, bundle, history, pretrain_curve: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::EVAL_POINTS;
    use crate::systems::Reference;

    #[test]
    fn ensemble_stats_examples() {
        let same = vec![vec![0.3, -1.0]; 4];
        let s = EnsembleStats::from_predictions(&same);
        assert_eq!(s.variance, vec![0.0, 0.0]);
        assert_eq!(s.median, s.mean);
        let two = vec![vec![0.0], vec![1.0]];
        let s = EnsembleStats::from_predictions(&two);
        assert_eq!((s.mean[0], s.variance[0], s.median[0]), (0.5, 0.25, 0.5));
        let odd = vec![vec![5.0], vec![-1.0], vec![2.0]];
        assert_eq!(EnsembleStats::from_predictions(&odd).median[0], 2.0);
    }

    fn one_anchor() -> (Domain, Vec<LabeledPoint>, Vec<f64>) {
        (Domain::default(), vec![LabeledPoint { x: 0.0, t: 0.0, u: 1.0 }], vec![1.0 + 5e-4])
    }

    fn at(dist: f64) -> Point {
        Point { x: 0.0, t: dist }
    }

    #[test]
    fn gate_examples() {
        let (d, lab, means) = one_anchor();
        let cfg = PseudoLabelConfig::for_system(&SystemSpec::reaction(5.0));
        let good = PointStats { mean: 0.9, median: 0.95, variance: 1e-5 };
        assert_eq!(gate(&d, at(0.03), &lab, &means, good, &cfg), GateDecision::Accept { label: 0.95 });
        let noisy = PointStats { variance: 1e-3, ..good };
        assert_eq!(gate(&d, at(0.03), &lab, &means, noisy, &cfg), GateDecision::NoConsensus);
        assert_eq!(gate(&d, at(0.05), &lab, &means, good, &cfg), GateDecision::TooFar);
        let off = vec![1.0 + 2e-3];
        assert_eq!(gate(&d, at(0.03), &lab, &off, good, &cfg), GateDecision::UnreliableAnchor);
    }

    #[test]
    fn gate_equalities_reject() {
        let d = Domain::default();
        let lab = vec![LabeledPoint { x: 0.0, t: 0.0, u: 0.5 }];
        let cfg = PseudoLabelConfig {
            delta: 0.25,
            delta_pde: 0.5,
            epsilon: 0.125,
            sigma2_consens: 0.0625,
            ..PseudoLabelConfig::for_system(&SystemSpec::reaction(5.0))
        };
        let ok = PointStats { mean: 0.0, median: 0.0, variance: 0.0 };
        // exactly representable thresholds make each equality exact
        assert_eq!(gate(&d, at(0.25), &lab, &[0.5], ok, &cfg), GateDecision::TooFar);
        assert_eq!(gate(&d, at(0.125), &lab, &[0.625], ok, &cfg), GateDecision::UnreliableAnchor);
        let edge = PointStats { variance: 0.0625, ..ok };
        assert_eq!(gate(&d, at(0.125), &lab, &[0.5], edge, &cfg), GateDecision::NoConsensus);
        assert!(gate(&d, at(0.125), &lab, &[0.5], ok, &cfg).accepted().is_some());
    }

    #[test]
    fn infinite_thresholds_reduce_to_distance_rule() {
        let (d, lab, _) = one_anchor();
        let cfg = PseudoLabelConfig {
            epsilon: f64::INFINITY,
            sigma2_consens: f64::INFINITY,
            ..PseudoLabelConfig::for_system(&SystemSpec::reaction(5.0))
        };
        cfg.validate().unwrap();
        let wild = PointStats { mean: 9.0, median: 9.0, variance: 1e3 };
        assert!(gate(&d, at(0.049), &lab, &[-7.0], wild, &cfg).accepted().is_some());
        assert_eq!(gate(&d, at(0.051), &lab, &[-7.0], wild, &cfg), GateDecision::TooFar);
    }

    #[test]
    fn config_defaults_and_validation() {
        assert_eq!(default_iterations(&SystemSpec::reaction(5.0)), 60);
        assert_eq!(default_iterations(&SystemSpec::reaction_diffusion(5.0, 2.0)), 60);
        assert_eq!(default_iterations(&SystemSpec::diffusion(5.0)), 80);
        assert_eq!(default_iterations(&SystemSpec::diffusion(10.0)), 100);
        assert_eq!(default_iterations(&SystemSpec::convection(30.0)), 100);
        assert_eq!(default_iterations(&SystemSpec::convection(40.0)), 150);
        let c = TrainConfig::new(SystemSpec::convection(40.0)).desk_scale();
        assert_eq!((c.pseudo.iterations, c.sampler.samples, c.sampler.burnin, c.sampler.leapfrog), (75, 50, 50, 64));
        assert_eq!(c.vanilla_budget(), 4000 + 75 * 1000);
        let mut bad = c;
        bad.pseudo.delta = 0.2;
        assert!(bad.validate().is_err());
        assert!("bayes-pl".parse::<Method>().is_ok() && "bayes".parse::<Method>().is_err());
    }

    fn tiny(spec: SystemSpec) -> TrainConfig {
        let mut c = TrainConfig::new(spec);
        c.architecture = Architecture::new(2, 10);
        c.sizes = DataSizes { ic: 32, bc: 10, pde: 60 };
        c.sampler = SamplerConfig { samples: 6, burnin: 6, leapfrog: 8, chains: 2, ..SamplerConfig::default() };
        c.pretrain_epochs = 300;
        c.pseudo.iterations = 3;
        c.ensemble = EnsembleConfig { members: 3, epochs_per_iteration: 100 };
        c.seed = 7;
        c
    }

    #[test]
    fn bayes_run_is_reproducible_and_monotone() {
        let cfg = tiny(SystemSpec::convection(2.0));
        let ev = Evaluator::new(&Reference::new(&cfg.system), 200, 1);
        let mut seen = Vec::new();
        let mut obs = |r: &IterationRecord, s: &TrainState| seen.push((r.pl, s.bundle.active(0.1).pde.len()));
        let a = train(&cfg, Some(&ev), Some(&mut obs)).unwrap();
        let b = train(&cfg, Some(&ev), None).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.history.without_timing(), b.history.without_timing());
        assert_eq!(a.samples.len(), 12);
        assert_eq!(seen.len(), 3);
        assert!(a.history.pl_monotone());
        assert!(a.history.records.windows(2).all(|w| w[0].active_pde <= w[1].active_pde));
        let first = a.history.records[0];
        assert!(first.relative_l2.is_some() && first.acceptance_rate.is_some());
        // first activation is bounded to the strip above the initial condition
        let init = cfg.build_bundle();
        for &i in &init.active(0.1).pde {
            assert!(init.pde[i].t < 0.1);
        }
    }

    #[test]
    fn zero_iterations_return_the_pretrained_state() {
        let mut cfg = tiny(SystemSpec::reaction(3.0));
        cfg.pseudo.iterations = 0;
        let out = train(&cfg, None, None).unwrap();
        assert_eq!(out.samples, vec![out.theta.clone()]);
        assert!(out.history.records.is_empty());
        assert_eq!(out.pretrain_curve.len(), 300);
    }

    #[test]
    fn modes_gate_identically_given_the_same_samples() {
        let cfg = tiny(SystemSpec::reaction(3.0));
        let mlp = cfg.mlp().unwrap();
        let (state, _) = initial_state(&cfg, &mlp).unwrap();
        let samples: Vec<_> = (0..4).map(|_| state.theta.clone()).collect();
        let active = state.bundle.active(0.1);
        let loose = PseudoLabelConfig { epsilon: f64::INFINITY, ..cfg.pseudo };
        let mut a = state.bundle.clone();
        let mut b = state.bundle.clone();
        gate_and_label(&mut a, &mlp, &samples, &active.pde, &PseudoLabelConfig { mode: LabelMode::Pl, ..loose });
        gate_and_label(&mut b, &mlp, &samples, &active.pde, &PseudoLabelConfig { mode: LabelMode::NoPl, ..loose });
        assert_eq!(a, b);
        // identical members have zero variance, so only distance decides
        assert!(!a.pl.is_empty());
        for p in &a.pl {
            let near = nearest_labeled(&a.domain, a.pde[p.pde_index], &state.bundle.labeled()).unwrap();
            assert!(near.distance < 0.05);
        }
    }

    #[test]
    fn ensemble_and_vanilla_baselines_run() {
        let cfg = tiny(SystemSpec::reaction(3.0));
        let out = baseline_ensemble_pl(&cfg, None, None).unwrap();
        assert_eq!(out.samples.len(), 3);
        assert!(out.history.pl_monotone());
        assert!(out.history.records.iter().all(|r| r.acceptance_rate.is_none()));
        let again = baseline_ensemble_pl(&cfg, None, None).unwrap();
        assert_eq!(out.samples, again.samples);
        let (p, curve) = baseline_vanilla(&cfg).unwrap();
        assert_eq!(curve.len(), 300 + 3 * 100);
        assert_eq!(p.len(), cfg.architecture.num_params());
        let _ = EVAL_POINTS;
    }
}

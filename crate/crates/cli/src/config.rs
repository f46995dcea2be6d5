//! Plain-text run configuration.
//!
//! One `key = value` pair per line; `#` starts a comment. Later pairs
//! override earlier ones, and command-line flags are applied after the
//! file. The system is resolved first, then the desk-scale preset (if
//! enabled), then every other key in order.
//!
//! | key | meaning |
//! |-----|---------|
//! | `system` | `reaction`, `diffusion`, `reaction-diffusion`, `convection` |
//! | `rho`, `d`, `beta` | system parameters |
//! | `param` | the varied parameter: ρ, d, d, β by system |
//! | `method` | `bayes-pl`, `bayes-nopl`, `vanilla`, `ensemble-pl` |
//! | `seed`, `desk_scale`, `out` | master seed, reduced preset, output directory |
//! | `arch.hidden_layers`, `arch.hidden_width` | network shape |
//! | `data.ic`, `data.bc`, `data.pde` | dataset sizes |
//! | `posterior.sigma_{p,ic,pl,bc,pde}` | prior and likelihood stds |
//! | `sampler.{samples,burnin,leapfrog,chains,target_accept,initial_step}` | HMC |
//! | `pl.{delta,delta_pde,epsilon,sigma2_consens,iterations,early_stop}` | gating |
//! | `adam.{lr,beta1,beta2,eps}`, `pretrain.epochs` | optimizer |
//! | `ensemble.{members,epochs_per_iteration}`, `vanilla.epochs` | baselines (`auto` = matched budget) |
//! | `eval.{points,seed,field_nx,field_nt,rd_nx,rd_nt}` | evaluation |

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use bpl_pinn::eval::{EVAL_POINTS, FIELD_NT, FIELD_NX};
use bpl_pinn::posterior::LabelMode;
use bpl_pinn::systems::{SystemFamily, RD_GRID_NT, RD_GRID_NX};
use bpl_pinn::{Method, SystemKind, SystemSpec, TrainConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value {value:?} for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub points: usize,
    pub seed: u64,
    pub field_nx: usize,
    pub field_nt: usize,
    pub rd_nx: usize,
    pub rd_nt: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { points: EVAL_POINTS, seed: 0, field_nx: FIELD_NX, field_nt: FIELD_NT, rd_nx: RD_GRID_NX, rd_nt: RD_GRID_NT }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub desk_scale: bool,
    pub train: TrainConfig,
    pub eval: EvalSettings,
    pub out: PathBuf,
}

pub type Pairs = Vec<(String, String)>;

/// Parses `key = value` lines.
pub fn parse_pairs(text: &str) -> Result<Pairs, ConfigError> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: n + 1 })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: n + 1 });
        }
        pairs.push((k.to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| ConfigError::BadValue { key: key.into(), value: v.into(), reason: e.to_string() })
}

fn last<'a>(pairs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn family_default(f: SystemFamily) -> SystemSpec {
    match f {
        SystemFamily::Reaction => SystemSpec::reaction(5.0),
        SystemFamily::Diffusion => SystemSpec::diffusion(5.0),
        SystemFamily::ReactionDiffusion => SystemSpec::reaction_diffusion(5.0, 2.0),
        SystemFamily::Convection => SystemSpec::convection(30.0),
    }
}

fn resolve_system(pairs: &[(String, String)]) -> Result<SystemSpec, ConfigError> {
    let family = match last(pairs, "system") {
        Some(s) => value::<SystemFamily>("system", s)?,
        None => SystemFamily::Reaction,
    };
    let mut spec = family_default(family);
    for (k, v) in pairs {
        let wrong = || ConfigError::BadValue {
            key: k.clone(),
            value: v.clone(),
            reason: format!("not a parameter of the {} system", family.name()),
        };
        match (k.as_str(), &mut spec.kind) {
            ("rho", SystemKind::Reaction { rho } | SystemKind::ReactionDiffusion { rho, .. }) => *rho = value(k, v)?,
            ("d", SystemKind::Diffusion { d } | SystemKind::ReactionDiffusion { d, .. }) => *d = value(k, v)?,
            ("beta", SystemKind::Convection { beta }) => *beta = value(k, v)?,
            ("param", SystemKind::Reaction { rho }) => *rho = value(k, v)?,
            ("param", SystemKind::Diffusion { d } | SystemKind::ReactionDiffusion { d, .. }) => *d = value(k, v)?,
            ("param", SystemKind::Convection { beta }) => *beta = value(k, v)?,
            ("rho" | "d" | "beta", _) => return Err(wrong()),
            _ => {}
        }
    }
    let params = match spec.kind {
        SystemKind::Reaction { rho } => vec![("rho", rho)],
        SystemKind::Diffusion { d } => vec![("d", d)],
        SystemKind::ReactionDiffusion { rho, d } => vec![("rho", rho), ("d", d)],
        SystemKind::Convection { beta } => vec![("beta", beta)],
    };
    for (k, v) in params {
        if !v.is_finite() || (k == "d" && v <= 0.0) {
            return Err(ConfigError::BadValue { key: k.into(), value: v.to_string(), reason: "out of range".into() });
        }
    }
    Ok(spec)
}

impl RunConfig {
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, ConfigError> {
        let system = resolve_system(pairs)?;
        let desk_scale = last(pairs, "desk_scale").map(|v| value::<bool>("desk_scale", v)).transpose()?.unwrap_or(false);
        let mut train = TrainConfig::new(system);
        if desk_scale {
            train = train.desk_scale();
        }
        let mut cfg = RunConfig { method: Method::BayesPl, desk_scale, train, eval: EvalSettings::default(), out: PathBuf::from("out") };
        for (k, v) in pairs {
            cfg.apply(k, v)?;
        }
        cfg.train.pseudo.mode = match cfg.method {
            Method::BayesNoPl => LabelMode::NoPl,
            _ => LabelMode::Pl,
        };
        cfg.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if cfg.eval.points == 0 || cfg.eval.field_nx == 0 || cfg.eval.field_nt == 0 {
            return Err(ConfigError::Invalid("eval point counts must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    fn apply(&mut self, k: &str, v: &str) -> Result<(), ConfigError> {
        let t = &mut self.train;
        match k {
            "system" | "rho" | "d" | "beta" | "param" | "desk_scale" => {}
            "method" => self.method = value(k, v)?,
            "seed" => t.seed = value(k, v)?,
            "out" => self.out = PathBuf::from(v),
            "arch.hidden_layers" => t.architecture.hidden_layers = value(k, v)?,
            "arch.hidden_width" => t.architecture.hidden_width = value(k, v)?,
            "data.ic" => t.sizes.ic = value(k, v)?,
            "data.bc" => t.sizes.bc = value(k, v)?,
            "data.pde" => t.sizes.pde = value(k, v)?,
            "posterior.sigma_p" => t.posterior.sigma_p = value(k, v)?,
            "posterior.sigma_ic" => t.posterior.sigma_ic = value(k, v)?,
            "posterior.sigma_pl" => t.posterior.sigma_pl = value(k, v)?,
            "posterior.sigma_bc" => t.posterior.sigma_bc = value(k, v)?,
            "posterior.sigma_pde" => t.posterior.sigma_pde = value(k, v)?,
            "sampler.samples" => t.sampler.samples = value(k, v)?,
            "sampler.burnin" => t.sampler.burnin = value(k, v)?,
            "sampler.leapfrog" => t.sampler.leapfrog = value(k, v)?,
            "sampler.chains" => t.sampler.chains = value(k, v)?,
            "sampler.target_accept" => t.sampler.target_accept = value(k, v)?,
            "sampler.initial_step" => t.sampler.initial_step = value(k, v)?,
            "pl.delta" => t.pseudo.delta = value(k, v)?,
            "pl.delta_pde" => t.pseudo.delta_pde = value(k, v)?,
            "pl.epsilon" => t.pseudo.epsilon = value(k, v)?,
            "pl.sigma2_consens" => t.pseudo.sigma2_consens = value(k, v)?,
            "pl.iterations" => t.pseudo.iterations = value(k, v)?,
            "pl.early_stop" => t.pseudo.early_stop = value(k, v)?,
            "adam.lr" => t.adam.lr = value(k, v)?,
            "adam.beta1" => t.adam.beta1 = value(k, v)?,
            "adam.beta2" => t.adam.beta2 = value(k, v)?,
            "adam.eps" => t.adam.eps = value(k, v)?,
            "pretrain.epochs" => t.pretrain_epochs = value(k, v)?,
            "ensemble.members" => t.ensemble.members = value(k, v)?,
            "ensemble.epochs_per_iteration" => t.ensemble.epochs_per_iteration = value(k, v)?,
            "vanilla.epochs" => t.vanilla_epochs = if v == "auto" { None } else { Some(value(k, v)?) },
            "eval.points" => self.eval.points = value(k, v)?,
            "eval.seed" => self.eval.seed = value(k, v)?,
            "eval.field_nx" => self.eval.field_nx = value(k, v)?,
            "eval.field_nt" => self.eval.field_nt = value(k, v)?,
            "eval.rd_nx" => self.eval.rd_nx = value(k, v)?,
            "eval.rd_nt" => self.eval.rd_nt = value(k, v)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Every key with its effective value; parsing the result reproduces
    /// this configuration.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let family = t.system.family();
        put("system", family.name().into());
        match t.system.kind {
            SystemKind::Reaction { rho } => put("rho", rho.to_string()),
            SystemKind::Diffusion { d } => put("d", d.to_string()),
            SystemKind::ReactionDiffusion { rho, d } => {
                put("rho", rho.to_string());
                put("d", d.to_string());
            }
            SystemKind::Convection { beta } => put("beta", beta.to_string()),
        }
        put("method", self.method.name().into());
        put("seed", t.seed.to_string());
        put("desk_scale", self.desk_scale.to_string());
        put("out", self.out.display().to_string());
        put("arch.hidden_layers", t.architecture.hidden_layers.to_string());
        put("arch.hidden_width", t.architecture.hidden_width.to_string());
        put("data.ic", t.sizes.ic.to_string());
        put("data.bc", t.sizes.bc.to_string());
        put("data.pde", t.sizes.pde.to_string());
        let p = t.posterior;
        put("posterior.sigma_p", p.sigma_p.to_string());
        put("posterior.sigma_ic", p.sigma_ic.to_string());
        put("posterior.sigma_pl", p.sigma_pl.to_string());
        put("posterior.sigma_bc", p.sigma_bc.to_string());
        put("posterior.sigma_pde", p.sigma_pde.to_string());
        let sm = t.sampler;
        put("sampler.samples", sm.samples.to_string());
        put("sampler.burnin", sm.burnin.to_string());
        put("sampler.leapfrog", sm.leapfrog.to_string());
        put("sampler.chains", sm.chains.to_string());
        put("sampler.target_accept", sm.target_accept.to_string());
        put("sampler.initial_step", sm.initial_step.to_string());
        let pl = t.pseudo;
        put("pl.delta", pl.delta.to_string());
        put("pl.delta_pde", pl.delta_pde.to_string());
        put("pl.epsilon", pl.epsilon.to_string());
        put("pl.sigma2_consens", pl.sigma2_consens.to_string());
        put("pl.iterations", pl.iterations.to_string());
        put("pl.early_stop", pl.early_stop.to_string());
        put("adam.lr", t.adam.lr.to_string());
        put("adam.beta1", t.adam.beta1.to_string());
        put("adam.beta2", t.adam.beta2.to_string());
        put("adam.eps", t.adam.eps.to_string());
        put("pretrain.epochs", t.pretrain_epochs.to_string());
        put("ensemble.members", t.ensemble.members.to_string());
        put("ensemble.epochs_per_iteration", t.ensemble.epochs_per_iteration.to_string());
        put("vanilla.epochs", t.vanilla_epochs.map_or("auto".into(), |e| e.to_string()));
        let e = self.eval;
        put("eval.points", e.points.to_string());
        put("eval.seed", e.seed.to_string());
        put("eval.field_nx", e.field_nx.to_string());
        put("eval.field_nt", e.field_nt.to_string());
        put("eval.rd_nx", e.rd_nx.to_string());
        put("eval.rd_nt", e.rd_nt.to_string());
        s
    }

    /// System parameter values as `name=value` joined by `;`.
    pub fn param_label(&self) -> String {
        match self.train.system.kind {
            SystemKind::Reaction { rho } => format!("rho={rho}"),
            SystemKind::Diffusion { d } => format!("d={d}"),
            SystemKind::ReactionDiffusion { rho, d } => format!("rho={rho};d={d}"),
            SystemKind::Convection { beta } => format!("beta={beta}"),
        }
    }
}

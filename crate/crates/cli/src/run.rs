//! Executes one configured run or a suite of runs and writes artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use bpl_pinn::eval::{export_fields, predict_mean, Evaluator};
use bpl_pinn::network::checkpoint;
use bpl_pinn::optimizer::{write_loss_curve, LossRecord};
use bpl_pinn::pltrain::{baseline_ensemble_pl, baseline_vanilla, train, IterationRecord, TrainError, TrainState};
use bpl_pinn::systems::{Reference, SystemsError};
use bpl_pinn::{DataBundle, Method, Mlp, ParameterVector, TrainHistory};

use crate::config::{ConfigError, Pairs, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Reference(#[from] SystemsError),
    #[error(transparent)]
    Eval(#[from] bpl_pinn::eval::EvalError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), RunError> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

/// Final numbers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub method: Method,
    pub system: String,
    pub params: String,
    pub seed: u64,
    pub relative_l2: f64,
    /// MSE of the final prediction on the IC points.
    pub ic_mse: f64,
    /// IC MSE after pretraining alone, when the method pretrains.
    pub pretrain_ic_mse: Option<f64>,
    pub iterations: usize,
    pub pseudo_labels: usize,
    pub seconds_total: f64,
    pub seconds_pretrain: f64,
    pub seconds_fit: f64,
    pub seconds_gate: f64,
    pub seconds_eval: f64,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_else(|| "none".into());
        format!(
            "method = {}\nsystem = {}\nparams = {}\nseed = {}\nrelative_l2 = {:e}\nic_mse = {:e}\npretrain_ic_mse = {}\n\
             iterations = {}\npseudo_labels = {}\nseconds_total = {:.3}\nseconds_pretrain = {:.3}\nseconds_fit = {:.3}\n\
             seconds_gate = {:.3}\nseconds_eval = {:.3}\n",
            self.method,
            self.system,
            self.params,
            self.seed,
            self.relative_l2,
            self.ic_mse,
            opt(self.pretrain_ic_mse),
            self.iterations,
            self.pseudo_labels,
            self.seconds_total,
            self.seconds_pretrain,
            self.seconds_fit,
            self.seconds_gate,
            self.seconds_eval
        )
    }
}

struct Fitted {
    samples: Vec<ParameterVector>,
    theta: ParameterVector,
    bundle: DataBundle,
    history: TrainHistory,
    curve: Vec<LossRecord>,
}

fn write_history(dir: &Path, history: &TrainHistory) -> Result<(), RunError> {
    write_with(&dir.join("history.csv"), |w| history.write_csv(w))
}

fn write_checkpoint(path: &Path, mlp: &Mlp, theta: &ParameterVector) -> Result<(), RunError> {
    write_with(path, |w| checkpoint::write(w, mlp.architecture(), theta))
}

fn write_diagnostics(dir: &Path, cfg: &RunConfig, err: &RunError, records: &[IterationRecord]) {
    let mut text = format!("error: {err}\n\n# last iterations\n");
    for r in records.iter().rev().take(5).rev() {
        text.push_str(&format!("{r:?}\n"));
    }
    text.push_str("\n# effective configuration\n");
    text.push_str(&cfg.to_text());
    // best effort: the run already failed
    let _ = fs::write(dir.join("diagnostics.txt"), text);
}

/// Runs `cfg`, writing `effective.conf`, `summary.txt`, `history.csv`,
/// `fields.csv`, `checkpoint.bin`, `loss.csv`, `data.csv` and per-iteration
/// checkpoints under `cfg.out`. On failure `diagnostics.txt` is written.
pub fn execute(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    let dir = cfg.out.clone();
    fs::create_dir_all(dir.join("checkpoints")).map_err(io_err(&dir))?;
    fs::write(dir.join("effective.conf"), cfg.to_text()).map_err(io_err(&dir))?;
    let mut records = Vec::new();
    let result = execute_inner(cfg, &dir, &mut records);
    if let Err(e) = &result {
        write_diagnostics(&dir, cfg, e, &records);
    }
    result
}

fn execute_inner(cfg: &RunConfig, dir: &Path, records: &mut Vec<IterationRecord>) -> Result<RunSummary, RunError> {
    let start = Instant::now();
    let t = &cfg.train;
    let mlp = t.mlp()?;
    let reference = Reference::with_grid(&t.system, cfg.eval.rd_nx, cfg.eval.rd_nt)?;
    let evaluator = Evaluator::new(&reference, cfg.eval.points, cfg.eval.seed);

    let mut ckpt_err = None;
    let mut observer = |r: &IterationRecord, s: &TrainState| {
        records.push(*r);
        let path = dir.join("checkpoints").join(format!("iter-{:04}.bin", r.iteration));
        let res = write_checkpoint(&path, &mlp, &s.theta)
            .and_then(|_| write_history(dir, &TrainHistory { records: records.clone() }));
        if let Err(e) = res {
            ckpt_err.get_or_insert(e);
        }
    };

    let fitted = match cfg.method {
        Method::BayesPl | Method::BayesNoPl => {
            let out = train(t, Some(&evaluator), Some(&mut observer))?;
            Fitted { samples: out.samples, theta: out.theta, bundle: out.bundle, history: out.history, curve: out.pretrain_curve }
        }
        Method::EnsemblePl => {
            let out = baseline_ensemble_pl(t, Some(&evaluator), Some(&mut observer))?;
            Fitted { samples: out.samples, theta: out.theta, bundle: out.bundle, history: out.history, curve: Vec::new() }
        }
        Method::Vanilla => {
            let (p, curve) = baseline_vanilla(t)?;
            Fitted { samples: vec![p.clone()], theta: p, bundle: t.build_bundle(), history: TrainHistory::default(), curve }
        }
    };
    if let Some(e) = ckpt_err {
        return Err(e);
    }
    let seconds_fit: f64 = fitted.history.records.iter().map(|r| r.seconds_fit).sum();
    let seconds_gate: f64 = fitted.history.records.iter().map(|r| r.seconds_gate).sum();

    let t_eval = Instant::now();
    let relative_l2 = evaluator.relative_l2(&mlp, &fitted.samples)?;
    let ic_points: Vec<_> = fitted.bundle.ic.iter().map(|p| p.point()).collect();
    let ic_pred = predict_mean(&mlp, &fitted.samples, &ic_points)?;
    let ic_mse = ic_pred.iter().zip(&fitted.bundle.ic).map(|(p, l)| (p - l.u).powi(2)).sum::<f64>() / ic_pred.len() as f64;
    let grid = export_fields(&mlp, &fitted.samples, &reference, cfg.eval.field_nx, cfg.eval.field_nt)?;
    write_with(&dir.join("fields.csv"), |w| grid.write_csv(w))?;
    let seconds_eval = t_eval.elapsed().as_secs_f64();

    write_history(dir, &fitted.history)?;
    write_checkpoint(&dir.join("checkpoint.bin"), &mlp, &fitted.theta)?;
    write_with(&dir.join("loss.csv"), |w| write_loss_curve(w, &fitted.curve))?;
    write_with(&dir.join("data.csv"), |w| fitted.bundle.write_csv(w))?;

    // vanilla "pretraining" is the whole fit; others start from a labeled-only pretrain
    let pretrain_ic_mse = match cfg.method {
        Method::BayesPl | Method::BayesNoPl | Method::Vanilla => fitted.curve.last().map(|r| r.loss.labeled),
        Method::EnsemblePl => None,
    };
    let seconds_total = start.elapsed().as_secs_f64();
    let summary = RunSummary {
        method: cfg.method,
        system: t.system.family().name().to_string(),
        params: cfg.param_label(),
        seed: t.seed,
        relative_l2,
        ic_mse,
        pretrain_ic_mse,
        iterations: fitted.history.records.len(),
        pseudo_labels: fitted.bundle.pl.len(),
        seconds_total,
        seconds_pretrain: (seconds_total - seconds_fit - seconds_gate - seconds_eval).max(0.0),
        seconds_fit,
        seconds_gate,
        seconds_eval,
    };
    fs::write(dir.join("summary.txt"), summary.to_text()).map_err(io_err(dir))?;
    Ok(summary)
}

/// One row of a suite table.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub system: String,
    pub params: String,
    pub method: Method,
    pub result: Result<RunSummary, String>,
}

/// Runs every `(system pairs) × method` combination on top of `base`, each
/// in its own subdirectory of `out`, and writes `out/results.csv`. A failed
/// run is recorded in its row and the suite continues.
pub fn run_suite(base: &Pairs, systems: &[Pairs], methods: &[Method], out: &Path) -> Result<Vec<SuiteRow>, RunError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut rows = Vec::new();
    for sys in systems {
        for &method in methods {
            let mut pairs = base.clone();
            pairs.extend(sys.iter().cloned());
            pairs.push(("method".into(), method.name().into()));
            let (system, params, result) = match RunConfig::from_pairs(&pairs) {
                Ok(mut cfg) => {
                    let tag = format!("{}-{}-{}", cfg.train.system.family().name(), cfg.param_label(), method)
                        .replace([';', '='], "_");
                    cfg.out = out.join(tag);
                    let sys_name = cfg.train.system.family().name().to_string();
                    (sys_name, cfg.param_label(), execute(&cfg).map_err(|e| e.to_string()))
                }
                Err(e) => (String::new(), String::new(), Err(e.to_string())),
            };
            rows.push(SuiteRow { system, params, method, result });
            write_results(out, &rows)?;
        }
    }
    Ok(rows)
}

fn write_results(out: &Path, rows: &[SuiteRow]) -> Result<(), RunError> {
    write_with(&out.join("results.csv"), |w| {
        writeln!(w, "system,params,method,status,relative_l2,ic_mse,pseudo_labels,seconds_total,error")?;
        for r in rows {
            match &r.result {
                Ok(s) => writeln!(
                    w,
                    "{},{},{},ok,{:e},{:e},{},{:.1},",
                    r.system, r.params, r.method, s.relative_l2, s.ic_mse, s.pseudo_labels, s.seconds_total
                )?,
                Err(e) => writeln!(w, "{},{},{},failed,,,,,\"{}\"", r.system, r.params, r.method, e.replace('"', "'"))?,
            }
        }
        Ok(())
    })
}

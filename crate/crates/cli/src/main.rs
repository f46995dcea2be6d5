use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bpl_pinn::Method;
use bpl_pinn_cli::config::{parse_pairs, ConfigError, Pairs, RunConfig};
use bpl_pinn_cli::run::{execute, run_suite};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bpl-pinn", about = "Bayesian pseudo-label PINN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one configuration.
    Run(RunArgs),
    /// Run every system/method combination and tabulate relative L2 errors.
    Suite(SuiteArgs),
}

#[derive(Args)]
struct Common {
    /// Key-value configuration file, applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reduced sampler budget and half the iterations.
    #[arg(long)]
    desk_scale: bool,
    /// Extra `key=value` overrides, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    system: Option<String>,
    /// Value of the system's varied parameter (ρ, d or β).
    #[arg(long)]
    param: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// bayes-pl, bayes-nopl, vanilla or ensemble-pl.
    #[arg(long)]
    method: Option<String>,
}

#[derive(Args)]
struct SuiteArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated `system:param` entries, e.g. `reaction:5,convection:30`.
    #[arg(long, value_delimiter = ',', required = true)]
    systems: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "bayes-pl,bayes-nopl,vanilla,ensemble-pl")]
    methods: Vec<String>,
}

fn common_pairs(c: &Common) -> anyhow::Result<Pairs> {
    let mut pairs = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_pairs(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => Vec::new(),
    };
    let mut push = |k: &str, v: String| pairs.push((k.to_string(), v));
    if let Some(s) = c.seed {
        push("seed", s.to_string());
    }
    if let Some(n) = c.iterations {
        push("pl.iterations", n.to_string());
    }
    if let Some(o) = &c.out {
        push("out", o.display().to_string());
    }
    if c.desk_scale {
        push("desk_scale", "true".into());
    }
    for kv in &c.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Syntax { line: 0 }).with_context(|| format!("--set {kv}"))?;
        push(k.trim(), v.trim().to_string());
    }
    Ok(pairs)
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let mut pairs = common_pairs(&args.common)?;
    for (k, v) in [("system", args.system), ("param", args.param), ("rho", args.rho), ("d", args.d), ("beta", args.beta), ("method", args.method)] {
        if let Some(v) = v {
            pairs.push((k.to_string(), v));
        }
    }
    let cfg = RunConfig::from_pairs(&pairs)?;
    let s = execute(&cfg)?;
    print!("{}", s.to_text());
    Ok(())
}

fn suite(args: SuiteArgs) -> anyhow::Result<()> {
    let base = common_pairs(&args.common)?;
    let out = base.iter().rev().find(|(k, _)| k == "out").map(|(_, v)| PathBuf::from(v)).unwrap_or_else(|| "suite".into());
    let mut systems = Vec::new();
    for entry in &args.systems {
        let (name, param) = entry.split_once(':').map_or((entry.as_str(), None), |(a, b)| (a, Some(b)));
        let mut p = vec![("system".to_string(), name.to_string())];
        if let Some(v) = param {
            p.push(("param".into(), v.to_string()));
        }
        // fail early on a bad entry, before any run starts
        RunConfig::from_pairs(&[base.clone(), p.clone()].concat()).with_context(|| format!("--systems entry {entry:?}"))?;
        systems.push(p);
    }
    let methods = args
        .methods
        .iter()
        .map(|m| m.parse::<Method>().map_err(|e| anyhow::anyhow!("--methods: {e}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let rows = run_suite(&base, &systems, &methods, &out)?;
    for r in &rows {
        match &r.result {
            Ok(s) => println!("{} {} {}: relative_l2 = {:e}", r.system, r.params, r.method, s.relative_l2),
            Err(e) => println!("{} {} {}: failed: {e}", r.system, r.params, r.method),
        }
    }
    println!("results: {}", out.join("results.csv").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => run(a),
        Command::Suite(a) => suite(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

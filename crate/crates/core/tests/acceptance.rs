//! Acceptance gate. Each criterion prints one `PASS` or `FAIL` line with the
//! measured value and its pinned tolerance; the binary exits nonzero if any
//! criterion fails. Quantitative training runs come last since they take
//! most of the time.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use bpl_pinn::data::{
    active_boundary, active_subset, latin_hypercube, BoundaryPoint, DataSizes, Domain,
};
use bpl_pinn::eval::{Evaluator, EVAL_POINTS};
use bpl_pinn::network::checkpoint;
use bpl_pinn::pltrain::{
    baseline_ensemble_pl, baseline_vanilla, gate, initial_state, train, GateDecision, PointStats,
};
use bpl_pinn::posterior::{grad_log_posterior, log_posterior, LabelMode};
use bpl_pinn::rng::rng_from;
use bpl_pinn::sampler::{sample_posterior, LogDensity};
use bpl_pinn::systems::splitting::solve_reaction_diffusion;
use bpl_pinn::systems::{Reference, RD_GRID_NT, RD_GRID_NX, X_MAX};
use bpl_pinn::{
    Architecture, DataBundle, Jet2, LabeledPoint, Mlp, ParameterVector, Point, PosteriorSpec, PseudoLabelConfig,
    SamplerConfig, SystemSpec, TrainConfig, TrainHistory,
};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

/// Outcome of one criterion: pass flag and a description of what was measured.
struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

struct Gate {
    failures: usize,
    total: usize,
}

impl Gate {
    fn check(&mut self, name: &str, f: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        self.total += 1;
        if !v.pass {
            self.failures += 1;
        }
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("ACCEPTANCE {tag} | {name} | {} | {:.1}s", v.detail, start.elapsed().as_secs_f64());
    }
}

// ---------------------------------------------------------------- sampler

struct StandardNormal2;

impl LogDensity for StandardNormal2 {
    fn dim(&self) -> usize {
        2
    }
    fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        for (g, x) in grad.iter_mut().zip(q) {
            *g = -x;
        }
        -0.5 * q.iter().map(|x| x * x).sum::<f64>()
    }
}

fn ks_distance(mut xs: Vec<f64>) -> f64 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn sampler_suite(g: &mut Gate) {
    let cfg = SamplerConfig {
        samples: 10_000,
        burnin: 1_000,
        // same trajectory length as the sampler unit tests; at a frozen step the
        // Gaussian's leapfrog energy error resonates with L, so L is fixed up front
        leapfrog: 10,
        chains: 1,
        target_accept: 0.6,
        initial_step: 1e-3,
        seed: 11,
    };
    let out = sample_posterior(&StandardNormal2, &ParameterVector::zeros(2), &cfg).expect("sampling");
    let n = out.samples.len() as f64;
    for k in 0..2 {
        let xs: Vec<f64> = out.samples.iter().map(|s| s.as_slice()[k]).collect();
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        g.check(&format!("sampler: 2D normal mean, coordinate {k}"), || {
            verdict(mean.abs() < 0.05, format!("mean {mean:.4} (|mean| < 0.05, N = {n})"))
        });
        g.check(&format!("sampler: 2D normal variance, coordinate {k}"), || {
            verdict((var - 1.0).abs() < 0.1, format!("variance {var:.4} (|var - 1| < 0.1)"))
        });
        let ks = ks_distance(xs);
        g.check(&format!("sampler: 2D normal KS distance, coordinate {k}"), || {
            verdict(ks < 0.05, format!("KS {ks:.4} (< 0.05)"))
        });
    }
    let acc = out.acceptance_rate();
    let trace = &out.chains[0].trace;
    let adapt = trace[cfg.burnin / 2..cfg.burnin].iter().map(|t| t.accept_prob).sum::<f64>() / (cfg.burnin / 2) as f64;
    g.check("sampler: dual averaging acceptance", || {
        verdict(
            (acc - 0.6).abs() < 0.15,
            format!(
                "acceptance {acc:.3} at frozen step {:.3e}, late burn-in mean accept prob {adapt:.3} (0.6 +- 0.15)",
                out.chains[0].final_stepsize
            ),
        )
    });
}

// ---------------------------------------------------------- differentiation

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

fn grad_suite(g: &mut Gate) {
    let systems = [
        SystemSpec::reaction(5.0),
        SystemSpec::diffusion(5.0),
        SystemSpec::reaction_diffusion(5.0, 2.0),
        SystemSpec::convection(30.0),
    ];
    let mlp = Mlp::new(Architecture::new(1, 8)).unwrap();
    let mut rng = rng_from(21);
    let h = 1e-4;
    let mut worst = 0.0f64;
    for c in 0..20 {
        let system = systems[c % systems.len()];
        let mut bundle = DataBundle::build(&system, DataSizes { ic: 12, bc: 6, pde: 24 }, 100 + c as u64);
        for i in 0..6 {
            bundle.add_pseudo_label(3 * i, rng.random_range(-1.0..1.0));
        }
        let active = bundle.all_active();
        let mode = if c % 2 == 0 { LabelMode::Pl } else { LabelMode::NoPl };
        let spec = PosteriorSpec::default();
        let mut p = mlp.init_parameters(c as u64).into_vec();
        for v in &mut p {
            *v += 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
        let params = ParameterVector::new(p).unwrap();
        let grad = grad_log_posterior(&mlp, &params, system, &bundle, &active, spec, mode).unwrap();
        let fd: Vec<f64> = (0..params.len())
            .map(|k| {
                let mut q = params.clone();
                q.as_mut_slice()[k] += h;
                let up = log_posterior(&mlp, &q, system, &bundle, &active, spec, mode).unwrap();
                q.as_mut_slice()[k] -= 2.0 * h;
                let down = log_posterior(&mlp, &q, system, &bundle, &active, spec, mode).unwrap();
                (up - down) / (2.0 * h)
            })
            .collect();
        let rel = norm(grad.iter().zip(&fd).map(|(a, b)| a - b)) / norm(fd.iter().copied());
        worst = worst.max(rel);
    }
    g.check("differentiation: log-posterior gradient vs central differences (2-8-1, 20 configurations)", || {
        verdict(worst < 1e-5, format!("worst relative error {worst:.2e} (< 1e-5, step 1e-4)"))
    });

    let mut worst = [0.0f64; 3];
    for (a, arch) in [Architecture::new(1, 8), Architecture::default()].into_iter().enumerate() {
        let mlp = Mlp::new(arch).unwrap();
        for s in 0..5u64 {
            let params = mlp.init_parameters(50 + s + 10 * a as u64);
            let mut diff = [Vec::new(), Vec::new(), Vec::new()];
            let mut reference = [Vec::new(), Vec::new(), Vec::new()];
            for _ in 0..40 {
                let (x, t) = (rng.random_range(0.0..X_MAX), rng.random_range(0.0..1.0));
                let j = mlp.forward_jet(&params, x, t);
                let f = |x: f64, t: f64| mlp.forward(&params, x, t);
                // fourth-order stencils at h = 1e-3 keep rounding noise far below the tolerance
                let e = 1e-3;
                let d1 = |g: &dyn Fn(f64) -> f64| (g(-2.0 * e) - 8.0 * g(-e) + 8.0 * g(e) - g(2.0 * e)) / (12.0 * e);
                let fx = |s: f64| f(x + s, t);
                let ft = |s: f64| f(x, t + s);
                let fd = [
                    d1(&fx),
                    d1(&ft),
                    (-fx(2.0 * e) + 16.0 * fx(e) - 30.0 * fx(0.0) + 16.0 * fx(-e) - fx(-2.0 * e)) / (12.0 * e * e),
                ];
                for (k, (ad, fd)) in [j.dx, j.dt, j.dxx].into_iter().zip(fd).enumerate() {
                    diff[k].push(ad - fd);
                    reference[k].push(fd);
                }
            }
            for k in 0..3 {
                let rel = norm(diff[k].iter().copied()) / norm(reference[k].iter().copied());
                worst[k] = worst[k].max(rel);
            }
        }
    }
    for (k, slot) in ["u_x", "u_t", "u_xx"].iter().enumerate() {
        g.check(&format!("differentiation: forward jet {slot} vs finite differences"), || {
            verdict(worst[k] < 1e-6, format!("worst relative error {:.2e} (< 1e-6)", worst[k]))
        });
    }
}

// ------------------------------------------------------------- references

fn reference_suite(g: &mut Gate) {
    let specs = [
        SystemSpec::reaction(5.0),
        SystemSpec::reaction(7.0),
        SystemSpec::diffusion(5.0),
        SystemSpec::diffusion(10.0),
        SystemSpec::convection(30.0),
        SystemSpec::convection(40.0),
    ];
    let mut rng = rng_from(31);
    for s in specs {
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let (x, t) = (rng.random_range(0.0..X_MAX), rng.random_range(0.0..=1.0));
            let u = s.closed_form(Jet2::seed_x(x), Jet2::seed_t(t)).expect("closed form");
            worst = worst.max(s.residual_of_jet(u).abs());
        }
        g.check(&format!("reference: closed-form residual, {s}"), || {
            verdict(worst < 1e-10, format!("max |residual| {worst:.2e} over 1000 points (< 1e-10)"))
        });
    }
    for d in [2.0, 4.0] {
        let coarse = solve_reaction_diffusion(5.0, d, RD_GRID_NX, RD_GRID_NT).unwrap();
        let fine = solve_reaction_diffusion(5.0, d, 2 * RD_GRID_NX, 2 * RD_GRID_NT).unwrap();
        let mut worst = 0.0f64;
        for n in 0..=RD_GRID_NT {
            for i in 0..RD_GRID_NX {
                worst = worst.max((coarse.at(n, i) - fine.at(2 * n, 2 * i)).abs());
            }
        }
        g.check(&format!("reference: reaction-diffusion grid doubling, rho=5 d={d}"), || {
            verdict(worst < 1e-4, format!("max-norm change {worst:.2e} (< 1e-4)"))
        });
    }
}

// ------------------------------------------------------------- structural

fn strata_ok(samples: &[Vec<f64>], bounds: &[(f64, f64)]) -> bool {
    let n = samples.len();
    bounds.iter().enumerate().all(|(d, &(lo, hi))| {
        let mut count = vec![0usize; n];
        for s in samples {
            if !(lo..hi).contains(&s[d]) {
                return false;
            }
            let k = ((s[d] - lo) / (hi - lo) * n as f64).floor() as usize;
            count[k.min(n - 1)] += 1;
        }
        count.iter().all(|&c| c == 1)
    })
}

fn tiny_config(system: SystemSpec, seed: u64) -> TrainConfig {
    let mut c = TrainConfig::new(system);
    c.architecture = Architecture::new(2, 10);
    c.sizes = DataSizes { ic: 24, bc: 10, pde: 120 };
    c.pretrain_epochs = 300;
    c.sampler = SamplerConfig { samples: 8, burnin: 10, leapfrog: 8, chains: 2, ..SamplerConfig::default() };
    c.pseudo.iterations = 4;
    c.ensemble.epochs_per_iteration = 100;
    c.ensemble.members = 3;
    c.seed = seed;
    c
}

fn structural_suite(g: &mut Gate) {
    let domain_bounds = [(0.0, 2.0 * PI), (0.0, 1.0)];
    for n in [1, 4, 100, 1000] {
        let ok = (0..5).all(|seed| strata_ok(&latin_hypercube(n, &domain_bounds, seed), &domain_bounds));
        g.check(&format!("structural: Latin hypercube stratification, n={n}"), || {
            verdict(ok, "one sample per stratum in each dimension, 5 seeds")
        });
    }

    // active subsets only grow as labels are added
    let mut rng = rng_from(41);
    let domain = Domain::default();
    let mut monotone = true;
    for trial in 0..20 {
        let pts: Vec<Point> = (0..200).map(|_| Point { x: rng.random_range(0.0..X_MAX), t: rng.random_range(0.0..1.0) }).collect();
        let bc: Vec<BoundaryPoint> = (0..50).map(|j| BoundaryPoint { t: j as f64 / 49.0 }).collect();
        let mut labeled = vec![LabeledPoint { x: 1.0, t: 0.0, u: 0.0 }];
        let radius = 0.05 + 0.01 * trial as f64;
        let mut prev = (active_subset(&domain, &pts, &labeled, radius), active_boundary(&domain, &bc, &labeled, radius));
        for _ in 0..30 {
            let p = pts[rng.random_range(0..pts.len())];
            labeled.push(LabeledPoint { x: p.x, t: p.t, u: 0.0 });
            let next = (active_subset(&domain, &pts, &labeled, radius), active_boundary(&domain, &bc, &labeled, radius));
            monotone &= prev.0.iter().all(|i| next.0.contains(i)) && prev.1.iter().all(|i| next.1.contains(i));
            prev = next;
        }
    }
    g.check("structural: active subsets monotone under label growth", || {
        verdict(monotone, "20 trials x 30 label additions, collocation and boundary sets")
    });

    let cfg = PseudoLabelConfig::for_system(&SystemSpec::reaction(5.0));
    let lab = [LabeledPoint { x: 0.0, t: 0.0, u: 0.0 }];
    let ok = PointStats { mean: 0.0, median: 0.0, variance: 0.0 };
    let at = |t: f64| Point { x: 0.0, t };
    let inside = 0.5 * cfg.delta;
    let cases = [
        ("distance = delta", gate(&domain, at(cfg.delta), &lab, &[0.0], ok, &cfg) == GateDecision::TooFar),
        ("anchor error = epsilon", gate(&domain, at(inside), &lab, &[cfg.epsilon], ok, &cfg) == GateDecision::UnreliableAnchor),
        (
            "variance = sigma2",
            gate(&domain, at(inside), &lab, &[0.0], PointStats { variance: cfg.sigma2_consens, ..ok }, &cfg)
                == GateDecision::NoConsensus,
        ),
        ("all strictly inside accepts", gate(&domain, at(inside), &lab, &[0.0], ok, &cfg).accepted().is_some()),
    ];
    let exact = domain.distance(at(cfg.delta), at(0.0)) == cfg.delta;
    for (name, pass) in cases {
        g.check(&format!("structural: gate boundary, {name}"), || {
            verdict(pass && exact, format!("default thresholds, exact equality {exact}"))
        });
    }

    let mut roundtrip = true;
    for (k, arch) in [Architecture::new(1, 8), Architecture::new(3, 5), Architecture::default()].into_iter().enumerate() {
        let mlp = Mlp::new(arch).unwrap();
        let p = ParameterVector::new((0..mlp.num_params()).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        roundtrip &= mlp.flatten(&mlp.unflatten(&p).unwrap()).unwrap() == p;
        let mut buf = Vec::new();
        checkpoint::write(&mut buf, arch, &p).unwrap();
        roundtrip &= checkpoint::read(&buf[..]).unwrap() == (arch, p);
        roundtrip &= mlp.init_parameters(k as u64).len() == arch.num_params();
    }
    g.check("structural: flatten/unflatten and checkpoint round-trip", || {
        verdict(roundtrip, "3 architectures, bit-exact")
    });

    let systems = [SystemSpec::reaction(3.0), SystemSpec::convection(5.0), SystemSpec::diffusion(2.0)];
    let mut same = true;
    let mut pl_ok = true;
    let mut grew = 0;
    for (k, s) in systems.into_iter().enumerate() {
        let cfg = tiny_config(s, k as u64);
        let a = train(&cfg, None, None).unwrap();
        let b = train(&cfg, None, None).unwrap();
        same &= a.theta == b.theta && a.bundle == b.bundle && a.samples == b.samples;
        same &= a.history.without_timing() == b.history.without_timing();
        pl_ok &= a.history.pl_monotone();
        grew += a.bundle.pl.len();
        let ea = baseline_ensemble_pl(&cfg, None, None).unwrap();
        let eb = baseline_ensemble_pl(&cfg, None, None).unwrap();
        same &= ea.samples == eb.samples && ea.history.without_timing() == eb.history.without_timing();
        pl_ok &= ea.history.pl_monotone();
        let mut nopl = cfg;
        nopl.pseudo.mode = LabelMode::NoPl;
        pl_ok &= train(&nopl, None, None).unwrap().history.pl_monotone();
        let mut van = cfg;
        van.vanilla_epochs = Some(500);
        same &= baseline_vanilla(&van).unwrap() == baseline_vanilla(&van).unwrap();
    }
    g.check("structural: fixed-seed runs bit-reproducible", || {
        verdict(same, "bayes-pl, ensemble-pl and vanilla on 3 systems, run twice")
    });
    g.check("structural: |D_pl| monotone (small runs)", || {
        verdict(pl_ok, format!("bayes-pl, bayes-nopl and ensemble-pl on 3 systems, {grew} labels in bayes-pl runs"))
    });
}

// ----------------------------------------------------------- quantitative

fn evaluator(system: &SystemSpec) -> Evaluator {
    Evaluator::new(&Reference::new(system), EVAL_POINTS, 0)
}

fn pl_line(g: &mut Gate, name: &str, history: &TrainHistory) {
    let counts: Vec<usize> = history.records.iter().map(|r| r.pl).collect();
    let ok = history.pl_monotone();
    g.check(&format!("structural: |D_pl| monotone ({name})"), || {
        verdict(ok, format!("{} iterations, final |D_pl| {}", counts.len(), counts.last().copied().unwrap_or(0)))
    });
}

fn bayes_run(g: &mut Gate, name: &str, system: SystemSpec, tol: f64) {
    let cfg = TrainConfig::new(system).desk_scale();
    let mut history = TrainHistory::default();
    g.check(&format!("quantitative: {name}, bayes-pl desk scale"), || {
        let ev = evaluator(&system);
        let out = train(&cfg, Some(&ev), None).expect("training");
        let err = ev.relative_l2(&cfg.mlp().unwrap(), &out.samples).unwrap();
        history = out.history;
        verdict(err < tol, format!("relative L2 {err:.4e} (< {tol:e}), |D_pl| {}", out.bundle.pl.len()))
    });
    pl_line(g, &format!("{name}, bayes-pl"), &history);
}

fn ic_mse(system: SystemSpec, epochs: usize) -> f64 {
    let mut cfg = TrainConfig::new(system);
    cfg.pretrain_epochs = epochs;
    let mlp = cfg.mlp().unwrap();
    let (state, _) = initial_state(&cfg, &mlp).expect("pretraining");
    let bundle = &state.bundle;
    bundle.ic.iter().map(|p| (mlp.forward(&state.theta, p.x, p.t) - p.u).powi(2)).sum::<f64>() / bundle.ic.len() as f64
}

fn quantitative_suite(g: &mut Gate) {
    let d10 = SystemSpec::diffusion(10.0);
    g.check("quantitative: diffusion d=10, 4000 pretrain epochs fail to fit the IC", || {
        let mse = ic_mse(d10, 4000);
        verdict(mse > 1e-3, format!("IC MSE {mse:.3e} (> 1e-3)"))
    });
    g.check("quantitative: diffusion d=10, 40000 pretrain epochs fit the IC", || {
        let mse = ic_mse(d10, 40_000);
        verdict(mse < 1e-3, format!("IC MSE {mse:.3e} (< 1e-3)"))
    });
    g.check("quantitative: convection beta=30, 4000 pretrain epochs fit the IC", || {
        let mse = ic_mse(SystemSpec::convection(30.0), 4000);
        verdict(mse < 1e-3, format!("IC MSE {mse:.3e} (< 1e-3)"))
    });

    let r7 = SystemSpec::reaction(7.0);
    g.check("quantitative: reaction rho=7, vanilla PINN fails", || {
        let cfg = TrainConfig::new(r7).desk_scale();
        let (p, _) = baseline_vanilla(&cfg).expect("training");
        let err = evaluator(&r7).relative_l2(&cfg.mlp().unwrap(), &[p]).unwrap();
        verdict(err > 0.5, format!("relative L2 {err:.4e} (> 0.5) after {} epochs", cfg.vanilla_budget()))
    });

    bayes_run(g, "reaction rho=5", SystemSpec::reaction(5.0), 5e-2);

    let r5 = SystemSpec::reaction(5.0);
    let mut history = TrainHistory::default();
    g.check("quantitative: reaction rho=5, ensemble-PL desk scale", || {
        let cfg = TrainConfig::new(r5).desk_scale();
        let ev = evaluator(&r5);
        let out = baseline_ensemble_pl(&cfg, Some(&ev), None).expect("training");
        let err = ev.relative_l2(&cfg.mlp().unwrap(), &out.samples).unwrap();
        history = out.history;
        verdict(err < 1e-1, format!("relative L2 {err:.4e} (< 1e-1), |D_pl| {}", out.bundle.pl.len()))
    });
    pl_line(g, "reaction rho=5, ensemble-pl", &history);

    bayes_run(g, "convection beta=30", SystemSpec::convection(30.0), 5e-2);
}

fn main() -> ExitCode {
    let mut g = Gate { failures: 0, total: 0 };
    sampler_suite(&mut g);
    grad_suite(&mut g);
    reference_suite(&mut g);
    structural_suite(&mut g);
    if std::env::var_os("ACCEPTANCE_SKIP_TRAINING").is_none() {
        quantitative_suite(&mut g);
    } else {
        println!("ACCEPTANCE SKIP | quantitative training runs | ACCEPTANCE_SKIP_TRAINING is set");
    }
    println!("acceptance: {} of {} criteria passed", g.total - g.failures, g.total);
    if g.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

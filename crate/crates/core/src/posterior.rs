//! Unnormalized log posterior over network parameters.
//!
//! `log P(θ | D) = log N(θ; 0, σ_p²) + Σ_groups Σ_i log N(e_i; 0, σ_g²)`
//! where `e_i` is a data error (IC, pseudo-labels) or a residual (BC, PDE).
//! Sums run over points, normalization constants included.

use std::f64::consts::PI;

use crate::data::{ActiveSets, BoundaryPoint, DataBundle, LabeledPoint, Point};
use crate::network::{Mlp, ParameterVector};
use crate::objective::{Group, Objective, Terms};
use crate::systems::SystemSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PosteriorError {
    #[error("{name} must be a positive finite standard deviation, got {value}")]
    BadStd { name: &'static str, value: f64 },
}

/// Prior and likelihood standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorSpec {
    pub sigma_p: f64,
    pub sigma_ic: f64,
    pub sigma_pl: f64,
    pub sigma_bc: f64,
    pub sigma_pde: f64,
}

impl Default for PosteriorSpec {
    fn default() -> Self {
        PosteriorSpec { sigma_p: 5.0, sigma_ic: 1e-3, sigma_pl: 5e-3, sigma_bc: 1e-3, sigma_pde: 1e-2 }
    }
}

impl PosteriorSpec {
    pub fn validate(&self) -> Result<(), PosteriorError> {
        for (name, value) in [
            ("sigma_p", self.sigma_p),
            ("sigma_ic", self.sigma_ic),
            ("sigma_pl", self.sigma_pl),
            ("sigma_bc", self.sigma_bc),
            ("sigma_pde", self.sigma_pde),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(PosteriorError::BadStd { name, value });
            }
        }
        Ok(())
    }

    pub fn sigma(&self, g: Group) -> f64 {
        match g {
            Group::Ic => self.sigma_ic,
            Group::Pl => self.sigma_pl,
            Group::Bc => self.sigma_bc,
            Group::Pde => self.sigma_pde,
        }
    }
}

/// Whether pseudo-labels enter the likelihood or only anchor the gating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    #[default]
    Pl,
    NoPl,
}

/// `Σ_i log N(e_i; 0, σ²)` from the sum of squares of `n` errors.
pub fn log_gaussian_sum(ss: f64, n: usize, sigma: f64) -> f64 {
    -0.5 * n as f64 * (2.0 * PI * sigma * sigma).ln() - ss / (2.0 * sigma * sigma)
}

pub fn log_prior(params: &[f64], sigma_p: f64) -> f64 {
    let ss: f64 = params.iter().map(|v| v * v).sum();
    log_gaussian_sum(ss, params.len(), sigma_p)
}

pub fn log_likelihood_labeled(mlp: &Mlp, params: &ParameterVector, points: &[LabeledPoint], sigma: f64) -> f64 {
    let ss: f64 = points.iter().map(|p| (mlp.forward(params, p.x, p.t) - p.u).powi(2)).sum();
    log_gaussian_sum(ss, points.len(), sigma)
}

/// Unlabeled constraints: PDE residuals at collocation points or boundary
/// residuals at boundary times.
#[derive(Debug, Clone, Copy)]
pub enum Unlabeled<'a> {
    Residual(&'a [Point]),
    Boundary(&'a [BoundaryPoint]),
}

pub fn log_likelihood_unlabeled(
    mlp: &Mlp,
    params: &ParameterVector,
    spec: &SystemSpec,
    points: Unlabeled<'_>,
    sigma: f64,
) -> f64 {
    let (ss, n) = match points {
        Unlabeled::Residual(pts) => (
            pts.iter().map(|p| spec.residual_of_jet(mlp.forward_jet(params, p.x, p.t)).powi(2)).sum::<f64>(),
            pts.len(),
        ),
        Unlabeled::Boundary(bc) => (
            bc.iter().map(|b| spec.boundary_residuals(mlp, params, b.t).iter().map(|r| r * r).sum::<f64>()).sum(),
            bc.len(),
        ),
    };
    log_gaussian_sum(ss, n, sigma)
}

/// The log posterior for one training state, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub mlp: Mlp,
    pub spec: PosteriorSpec,
    pub objective: Objective,
}

impl Posterior {
    pub fn new(
        mlp: Mlp,
        spec: PosteriorSpec,
        system: SystemSpec,
        bundle: &DataBundle,
        active: &ActiveSets,
        mode: LabelMode,
    ) -> Result<Self, PosteriorError> {
        spec.validate()?;
        let objective = Objective::from_bundle(system, bundle, active, mode == LabelMode::Pl);
        Ok(Posterior { mlp, spec, objective })
    }

    pub fn dim(&self) -> usize {
        self.mlp.num_params()
    }

    fn combine(&self, params: &[f64], terms: &Terms) -> f64 {
        let lik: f64 = Group::ALL
            .iter()
            .map(|&g| log_gaussian_sum(terms.ss(g), terms.count(g), self.spec.sigma(g)))
            .sum();
        log_prior(params, self.spec.sigma_p) + lik
    }

    pub fn log_density(&self, params: &[f64]) -> f64 {
        let terms = self.objective.terms(&self.mlp, params);
        self.combine(params, &terms)
    }

    /// Log density, writing its gradient into `grad`.
    pub fn log_density_and_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let inv_p = 1.0 / (self.spec.sigma_p * self.spec.sigma_p);
        for (g, v) in grad.iter_mut().zip(params) {
            *g = -v * inv_p;
        }
        let coeff = Group::ALL.map(|g| -0.5 / (self.spec.sigma(g) * self.spec.sigma(g)));
        let terms = self.objective.terms_and_grad(&self.mlp, params, coeff, grad);
        self.combine(params, &terms)
    }
}

/// `log P(θ | D)` on the active subsets.
pub fn log_posterior(
    mlp: &Mlp,
    params: &ParameterVector,
    system: SystemSpec,
    bundle: &DataBundle,
    active: &ActiveSets,
    spec: PosteriorSpec,
    mode: LabelMode,
) -> Result<f64, PosteriorError> {
    let post = Posterior::new(mlp.clone(), spec, system, bundle, active, mode)?;
    Ok(post.log_density(params.as_slice()))
}

pub fn grad_log_posterior(
    mlp: &Mlp,
    params: &ParameterVector,
    system: SystemSpec,
    bundle: &DataBundle,
    active: &ActiveSets,
    spec: PosteriorSpec,
    mode: LabelMode,
) -> Result<Vec<f64>, PosteriorError> {
    let post = Posterior::new(mlp.clone(), spec, system, bundle, active, mode)?;
    let mut g = vec![0.0; post.dim()];
    post.log_density_and_grad(params.as_slice(), &mut g);
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DataSizes, Domain};
    use crate::network::Architecture;
    use crate::rng::rng_from;
    use rand::Rng;

    fn small_state(spec: SystemSpec) -> (Mlp, DataBundle, ActiveSets) {
        let mlp = Mlp::new(Architecture::new(1, 8)).unwrap();
        let mut b = DataBundle::build(&spec, DataSizes { ic: 5, bc: 4, pde: 10 }, 4);
        b.add_pseudo_label(2, 0.3);
        b.add_pseudo_label(6, -0.1);
        let act = b.all_active();
        (mlp, b, act)
    }

    #[test]
    fn prior_at_mean_and_per_coordinate() {
        let p = 7851;
        let expect = -(p as f64) / 2.0 * (2.0 * PI * 25.0).ln();
        assert!((log_prior(&vec![0.0; p], 5.0) - expect).abs() < 1e-9);
        let mut rng = rng_from(1);
        let theta: Vec<f64> = (0..50).map(|_| rng.random_range(-3.0..3.0)).collect();
        let per: f64 = theta.iter().map(|v| -0.5 * (2.0 * PI * 25.0).ln() - v * v / 50.0).sum();
        assert!((log_prior(&theta, 5.0) - per).abs() < 1e-12);
        let mut moved = theta.clone();
        moved[3] *= 1.5;
        assert!(log_prior(&moved, 5.0) < log_prior(&theta, 5.0));
    }

    #[test]
    fn labeled_likelihood_examples() {
        let mlp = Mlp::new(Architecture::new(1, 2)).unwrap();
        let zero = ParameterVector::zeros(mlp.num_params());
        assert_eq!(log_likelihood_labeled(&mlp, &zero, &[], 1e-3), 0.0);
        let pts = vec![LabeledPoint { x: 1.0, t: 0.5, u: 0.0 }; 3];
        let c = -0.5 * (2.0 * PI * 1e-6).ln();
        assert!((log_likelihood_labeled(&mlp, &zero, &pts, 1e-3) - 3.0 * c).abs() < 1e-12);
        let e = 0.002;
        let one = [LabeledPoint { x: 1.0, t: 0.5, u: e }];
        assert!((log_likelihood_labeled(&mlp, &zero, &one, 1e-3) - (c - e * e / 2e-6)).abs() < 1e-9);
    }

    #[test]
    fn zero_network_on_convection_has_zero_residuals() {
        let mlp = Mlp::new(Architecture::default()).unwrap();
        let zero = ParameterVector::zeros(mlp.num_params());
        let spec = SystemSpec::convection(30.0);
        let b = DataBundle::build(&spec, DataSizes::default(), 1);
        let got = log_likelihood_unlabeled(&mlp, &zero, &spec, Unlabeled::Residual(&b.pde), 0.01);
        assert!((got - log_gaussian_sum(0.0, 1000, 0.01)).abs() < 1e-9);
        assert_eq!(log_likelihood_unlabeled(&mlp, &zero, &spec, Unlabeled::Boundary(&[]), 0.01), 0.0);
    }

    #[test]
    fn posterior_is_sum_of_components() {
        for spec in [SystemSpec::reaction(5.0), SystemSpec::diffusion(5.0), SystemSpec::convection(30.0)] {
            let (mlp, b, act) = small_state(spec);
            let theta = mlp.init_parameters(8);
            let ps = PosteriorSpec::default();
            let got = log_posterior(&mlp, &theta, spec, &b, &act, ps, LabelMode::Pl).unwrap();
            let expect = log_prior(theta.as_slice(), ps.sigma_p)
                + log_likelihood_labeled(&mlp, &theta, &b.ic, ps.sigma_ic)
                + log_likelihood_labeled(&mlp, &theta, &b.pl_points(), ps.sigma_pl)
                + log_likelihood_unlabeled(&mlp, &theta, &spec, Unlabeled::Boundary(&b.bc), ps.sigma_bc)
                + log_likelihood_unlabeled(&mlp, &theta, &spec, Unlabeled::Residual(&b.pde), ps.sigma_pde);
            assert!((got - expect).abs() < 1e-9 * expect.abs(), "{spec}: {got} vs {expect}");
            let nopl = log_posterior(&mlp, &theta, spec, &b, &act, ps, LabelMode::NoPl).unwrap();
            let pl_term = log_likelihood_labeled(&mlp, &theta, &b.pl_points(), ps.sigma_pl);
            assert!((got - nopl - pl_term).abs() < 1e-9 * expect.abs());
        }
    }

    #[test]
    fn empty_data_reduces_to_prior() {
        let mlp = Mlp::new(Architecture::new(1, 4)).unwrap();
        let spec = SystemSpec::reaction(3.0);
        let b = DataBundle::from_parts(Domain::default(), vec![], vec![], vec![], vec![]);
        let act = ActiveSets::default();
        let theta = mlp.init_parameters(2);
        let ps = PosteriorSpec::default();
        let lp = log_posterior(&mlp, &theta, spec, &b, &act, ps, LabelMode::Pl).unwrap();
        assert_eq!(lp, log_prior(theta.as_slice(), 5.0));
        let g = grad_log_posterior(&mlp, &theta, spec, &b, &act, ps, LabelMode::Pl).unwrap();
        for (g, v) in g.iter().zip(theta.as_slice()) {
            assert!((g + v / 25.0).abs() < 1e-15);
        }
        assert_eq!(lp, log_posterior(&mlp, &theta, spec, &b, &act, ps, LabelMode::NoPl).unwrap());
    }

    #[test]
    fn pl_modes_agree_without_pseudo_labels() {
        let spec = SystemSpec::convection(30.0);
        let mlp = Mlp::new(Architecture::new(2, 6)).unwrap();
        let b = DataBundle::build(&spec, DataSizes { ic: 8, bc: 4, pde: 16 }, 2);
        let act = b.active(0.1);
        let theta = mlp.init_parameters(5);
        let ps = PosteriorSpec::default();
        assert_eq!(
            log_posterior(&mlp, &theta, spec, &b, &act, ps, LabelMode::Pl).unwrap(),
            log_posterior(&mlp, &theta, spec, &b, &act, ps, LabelMode::NoPl).unwrap()
        );
    }

    #[test]
    fn gradient_is_linear_in_components() {
        let spec = SystemSpec::reaction_diffusion(5.0, 2.0);
        let (mlp, b, act) = small_state(spec);
        let theta = mlp.init_parameters(11);
        let ps = PosteriorSpec::default();
        let post = Posterior::new(mlp.clone(), ps, spec, &b, &act, LabelMode::Pl).unwrap();
        let mut full = vec![0.0; mlp.num_params()];
        post.log_density_and_grad(theta.as_slice(), &mut full);
        // prior part plus each group's part, each computed alone
        let mut sum: Vec<f64> = theta.as_slice().iter().map(|v| -v / 25.0).collect();
        for g in Group::ALL {
            let mut coeff = [0.0; 4];
            coeff[g as usize] = -0.5 / ps.sigma(g).powi(2);
            post.objective.terms_and_grad(&mlp, theta.as_slice(), coeff, &mut sum);
        }
        for (a, b) in full.iter().zip(&sum) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn rejects_nonpositive_std() {
        let bad = PosteriorSpec { sigma_pl: 0.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(PosteriorError::BadStd { name: "sigma_pl", .. })));
    }
}

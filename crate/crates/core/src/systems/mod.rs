//! Benchmark PDE systems on `x ∈ [0, 2π)`, `t ∈ [0, 1]`:
//!
//! | kind               | residual `f = u_t − N[u]`        | `u(x, 0)`                 |
//! |--------------------|----------------------------------|---------------------------|
//! | reaction           | `u_t − ρ u (1 − u)`              | `exp(−8 (x − π)² / π²)`   |
//! | diffusion          | `u_t − u_xx / d²`                | `sin(d x)`                |
//! | reaction-diffusion | `u_t − d u_xx − ρ u (1 − u)`     | `exp(−8 (x − π)² / π²)`   |
//! | convection         | `u_t + β u_x`                    | `sin(x)`                  |
//!
//! All systems use periodic Dirichlet boundaries `u(0, t) = u(2π, t)`;
//! diffusion and reaction-diffusion add periodic Neumann `u_x(0, t) = u_x(2π, t)`.

pub mod splitting;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::autodiff::{Jet2, JetComponent, Scalar, Tape, Var};
use crate::network::{Components, Mlp, ParameterVector};

pub use splitting::{solve_reaction_diffusion, SolutionGrid};

pub const X_MIN: f64 = 0.0;
pub const X_MAX: f64 = 2.0 * PI;
pub const T_MIN: f64 = 0.0;
pub const T_MAX: f64 = 1.0;

/// Default reaction-diffusion reference grid.
pub const RD_GRID_NX: usize = 512;
pub const RD_GRID_NT: usize = 2000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SystemsError {
    #[error("grid size nx = {0} must be a power of two >= 4")]
    GridSize(usize),
    #[error("need at least one time step")]
    TimeSteps,
    #[error("unknown system {0:?} (expected reaction, diffusion, reaction-diffusion or convection)")]
    UnknownSystem(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SystemKind {
    Reaction { rho: f64 },
    Diffusion { d: f64 },
    ReactionDiffusion { rho: f64, d: f64 },
    Convection { beta: f64 },
}

/// Boundary operators enforced on the pair `x = 0`, `x = 2π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BcKinds {
    pub periodic_dirichlet: bool,
    pub periodic_neumann: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemSpec {
    pub kind: SystemKind,
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SystemKind::Reaction { rho } => write!(f, "reaction(rho={rho})"),
            SystemKind::Diffusion { d } => write!(f, "diffusion(d={d})"),
            SystemKind::ReactionDiffusion { rho, d } => write!(f, "reaction-diffusion(rho={rho},d={d})"),
            SystemKind::Convection { beta } => write!(f, "convection(beta={beta})"),
        }
    }
}

/// System family without parameters, as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemFamily {
    Reaction,
    Diffusion,
    ReactionDiffusion,
    Convection,
}

impl FromStr for SystemFamily {
    type Err = SystemsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reaction" => Ok(SystemFamily::Reaction),
            "diffusion" => Ok(SystemFamily::Diffusion),
            "reaction-diffusion" | "reaction_diffusion" => Ok(SystemFamily::ReactionDiffusion),
            "convection" => Ok(SystemFamily::Convection),
            other => Err(SystemsError::UnknownSystem(other.to_string())),
        }
    }
}

impl SystemFamily {
    pub fn name(self) -> &'static str {
        match self {
            SystemFamily::Reaction => "reaction",
            SystemFamily::Diffusion => "diffusion",
            SystemFamily::ReactionDiffusion => "reaction-diffusion",
            SystemFamily::Convection => "convection",
        }
    }
}

fn gaussian_bump<S: Scalar>(x: S) -> S {
    let c = x + (-PI);
    (c * c * (-8.0 / (PI * PI))).exp()
}

impl SystemSpec {
    pub fn reaction(rho: f64) -> Self {
        SystemSpec { kind: SystemKind::Reaction { rho } }
    }
    pub fn diffusion(d: f64) -> Self {
        SystemSpec { kind: SystemKind::Diffusion { d } }
    }
    pub fn reaction_diffusion(rho: f64, d: f64) -> Self {
        SystemSpec { kind: SystemKind::ReactionDiffusion { rho, d } }
    }
    pub fn convection(beta: f64) -> Self {
        SystemSpec { kind: SystemKind::Convection { beta } }
    }

    pub fn family(&self) -> SystemFamily {
        match self.kind {
            SystemKind::Reaction { .. } => SystemFamily::Reaction,
            SystemKind::Diffusion { .. } => SystemFamily::Diffusion,
            SystemKind::ReactionDiffusion { .. } => SystemFamily::ReactionDiffusion,
            SystemKind::Convection { .. } => SystemFamily::Convection,
        }
    }

    pub fn bc_kinds(&self) -> BcKinds {
        let neumann = matches!(self.kind, SystemKind::Diffusion { .. } | SystemKind::ReactionDiffusion { .. });
        BcKinds { periodic_dirichlet: true, periodic_neumann: neumann }
    }

    /// Number of boundary residuals per boundary time.
    pub fn boundary_residual_count(&self) -> usize {
        1 + usize::from(self.bc_kinds().periodic_neumann)
    }

    /// Jet components the PDE residual reads.
    pub fn residual_components(&self) -> Components {
        match self.kind {
            SystemKind::Reaction { .. } => Components { dt: true, ..Components::VALUE },
            SystemKind::Diffusion { .. } | SystemKind::ReactionDiffusion { .. } => {
                Components { dt: true, dxx: true, dx: true }
            }
            SystemKind::Convection { .. } => Components { dt: true, dx: true, dxx: false },
        }
    }

    pub fn boundary_components(&self) -> Components {
        Components { dx: self.bc_kinds().periodic_neumann, ..Components::VALUE }
    }

    /// `f = u_t − N[u; λ]` along any differentiation route.
    pub fn residual<S: Scalar>(&self, u: S, u_t: S, u_x: S, u_xx: S) -> S {
        match self.kind {
            SystemKind::Reaction { rho } => u_t - u * (-u + 1.0) * rho,
            SystemKind::Diffusion { d } => u_t - u_xx * (1.0 / (d * d)),
            SystemKind::ReactionDiffusion { rho, d } => u_t - u_xx * d - u * (-u + 1.0) * rho,
            SystemKind::Convection { beta } => u_t + u_x * beta,
        }
    }

    /// Residual value and its partials `[∂f/∂u, ∂f/∂u_x, ∂f/∂u_t, ∂f/∂u_xx]`,
    /// indexed like [`JetComponent`].
    pub fn residual_partials(&self, u: f64, u_t: f64, u_x: f64, u_xx: f64) -> (f64, [f64; 4]) {
        let f = self.residual(u, u_t, u_x, u_xx);
        let p = match self.kind {
            SystemKind::Reaction { rho } => [-rho * (1.0 - 2.0 * u), 0.0, 1.0, 0.0],
            SystemKind::Diffusion { d } => [0.0, 0.0, 1.0, -1.0 / (d * d)],
            SystemKind::ReactionDiffusion { rho, d } => [-rho * (1.0 - 2.0 * u), 0.0, 1.0, -d],
            SystemKind::Convection { beta } => [0.0, beta, 1.0, 0.0],
        };
        (f, p)
    }

    /// Residual of a jet `(u, u_x, u_t, u_xx)`.
    pub fn residual_of_jet(&self, j: Jet2) -> f64 {
        self.residual(j.val, j.dt, j.dx, j.dxx)
    }

    pub fn initial_condition(&self, x: f64) -> f64 {
        self.initial_condition_generic(x)
    }

    fn initial_condition_generic<S: Scalar>(&self, x: S) -> S {
        match self.kind {
            SystemKind::Reaction { .. } | SystemKind::ReactionDiffusion { .. } => gaussian_bump(x),
            SystemKind::Diffusion { d } => (x * d).sin(),
            SystemKind::Convection { .. } => x.sin(),
        }
    }

    /// Closed-form solution where one exists (all but reaction-diffusion).
    pub fn closed_form<S: Scalar>(&self, x: S, t: S) -> Option<S> {
        match self.kind {
            SystemKind::Reaction { rho } => {
                let u0 = gaussian_bump(x);
                let g = u0 * (t * rho).exp();
                Some(g * (g - u0 + 1.0).recip())
            }
            SystemKind::Diffusion { d } => Some((x * d).sin() * (-t).exp()),
            SystemKind::Convection { beta } => Some((x - t * beta).sin()),
            SystemKind::ReactionDiffusion { .. } => None,
        }
    }

    /// `[u(0,t) − u(2π,t)]`, plus `[u_x(0,t) − u_x(2π,t)]` with Neumann BCs.
    pub fn boundary_residuals(&self, mlp: &Mlp, params: &ParameterVector, t: f64) -> Vec<f64> {
        let l = mlp.forward_jet(params, X_MIN, t);
        let r = mlp.forward_jet(params, X_MAX, t);
        let mut v = vec![l.val - r.val];
        if self.bc_kinds().periodic_neumann {
            v.push(l.dx - r.dx);
        }
        v
    }

    /// Parameter-differentiable boundary residuals recorded on `tape`.
    pub fn boundary_residuals_tape<'t>(&self, mlp: &Mlp, tape: &'t Tape, params: &[Var<'t>], t: f64) -> Vec<Var<'t>> {
        let l = mlp.forward_tape(tape, params, X_MIN, t);
        let r = mlp.forward_tape(tape, params, X_MAX, t);
        let mut v = vec![l.component(JetComponent::Val) - r.component(JetComponent::Val)];
        if self.bc_kinds().periodic_neumann {
            v.push(l.component(JetComponent::Dx) - r.component(JetComponent::Dx));
        }
        v
    }

    /// Parameter-differentiable PDE residual at `(x, t)` recorded on `tape`.
    pub fn residual_tape<'t>(&self, mlp: &Mlp, tape: &'t Tape, params: &[Var<'t>], x: f64, t: f64) -> Var<'t> {
        let u = mlp.forward_tape(tape, params, x, t);
        self.residual(
            u.component(JetComponent::Val),
            u.component(JetComponent::Dt),
            u.component(JetComponent::Dx),
            u.component(JetComponent::Dxx),
        )
    }
}

/// Ground truth `u(x, t)` for a system.
#[derive(Debug, Clone)]
pub enum Reference {
    ClosedForm(SystemSpec),
    Grid(SolutionGrid),
}

impl Reference {
    /// Closed form where available, otherwise the default splitting grid.
    pub fn new(spec: &SystemSpec) -> Self {
        Self::with_grid(spec, RD_GRID_NX, RD_GRID_NT).expect("default grid is valid")
    }

    /// Grid size only matters for reaction-diffusion.
    pub fn with_grid(spec: &SystemSpec, nx: usize, nt: usize) -> Result<Self, SystemsError> {
        Ok(match spec.kind {
            SystemKind::ReactionDiffusion { rho, d } => Reference::Grid(solve_reaction_diffusion(rho, d, nx, nt)?),
            _ => Reference::ClosedForm(*spec),
        })
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self {
            Reference::ClosedForm(s) => s.closed_form(x, t).expect("closed form exists"),
            Reference::Grid(g) => g.interpolate(x, t),
        }
    }
}

//! Sums of squared errors shared by the log posterior and the PINN loss.
//!
//! Both objectives are linear in the four per-group sums
//! `SS_g = Σ_i |e_i|²` (IC errors, pseudo-label errors, boundary residuals,
//! PDE residuals), so a single batched pass computes all four and the
//! gradient of any weighted combination `Σ_g c_g SS_g`.

use crate::autodiff::{Jet2, JetComponent, Tape, Var};
use crate::data::{ActiveSets, BoundaryPoint, DataBundle, LabeledPoint, Point};
use crate::network::{BatchEval, Components, Mlp};
use crate::systems::{SystemSpec, X_MAX, X_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Ic = 0,
    Pl = 1,
    Bc = 2,
    Pde = 3,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::Ic, Group::Pl, Group::Bc, Group::Pde];
}

/// Per-group sum of squares and point count.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Terms {
    pub ss: [f64; 4],
    pub n: [usize; 4],
}

impl Terms {
    pub fn ss(&self, g: Group) -> f64 {
        self.ss[g as usize]
    }

    pub fn count(&self, g: Group) -> usize {
        self.n[g as usize]
    }

    /// Mean square of group `g`, 0 when it is empty.
    pub fn mean(&self, g: Group) -> f64 {
        match self.count(g) {
            0 => 0.0,
            n => self.ss(g) / n as f64,
        }
    }
}

/// The point sets one objective is evaluated on.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub spec: SystemSpec,
    pub ic: Vec<LabeledPoint>,
    pub pl: Vec<LabeledPoint>,
    pub bc: Vec<BoundaryPoint>,
    pub pde: Vec<Point>,
}

impl Objective {
    /// IC, optionally the pseudo-labels, and the active BC/PDE subsets.
    pub fn from_bundle(spec: SystemSpec, bundle: &DataBundle, active: &ActiveSets, include_pl: bool) -> Self {
        Objective {
            spec,
            ic: bundle.ic.clone(),
            pl: if include_pl { bundle.pl_points() } else { Vec::new() },
            bc: active.bc.iter().map(|&i| bundle.bc[i]).collect(),
            pde: active.pde.iter().map(|&i| bundle.pde[i]).collect(),
        }
    }

    pub fn counts(&self) -> [usize; 4] {
        [self.ic.len(), self.pl.len(), self.bc.len(), self.pde.len()]
    }

    pub fn terms(&self, mlp: &Mlp, params: &[f64]) -> Terms {
        self.run(mlp, params, None)
    }

    /// Sums of squares, accumulating `∇ Σ_g coeff[g] SS_g` into `grad`.
    pub fn terms_and_grad(&self, mlp: &Mlp, params: &[f64], coeff: [f64; 4], grad: &mut [f64]) -> Terms {
        self.run(mlp, params, Some((coeff, grad)))
    }

    fn run(&self, mlp: &Mlp, params: &[f64], mut want: Option<([f64; 4], &mut [f64])>) -> Terms {
        let mut terms = Terms { ss: [0.0; 4], n: self.counts() };

        // labeled: IC then pseudo-labels in one value-only batch
        let n_ic = self.ic.len();
        let labeled: Vec<(f64, f64)> = self.ic.iter().chain(&self.pl).map(|p| (p.x, p.t)).collect();
        if !labeled.is_empty() {
            let be = mlp.eval_batch(params, &labeled, Components::VALUE);
            let u = be.output(JetComponent::Val);
            let err: Vec<f64> = u.iter().zip(self.ic.iter().chain(&self.pl)).map(|(u, p)| u - p.u).collect();
            terms.ss[Group::Ic as usize] = err[..n_ic].iter().map(|e| e * e).sum();
            terms.ss[Group::Pl as usize] = err[n_ic..].iter().map(|e| e * e).sum();
            if let Some((c, grad)) = want.as_mut() {
                let mut adj = be.zero_adjoint();
                for (i, (a, e)) in adj.iter_mut().zip(&err).enumerate() {
                    let g = if i < n_ic { c[0] } else { c[1] };
                    *a = 2.0 * g * e;
                }
                be.backward(mlp, params, &adj, grad);
            }
        }

        // boundary: left endpoints then right endpoints
        let nb = self.bc.len();
        if nb > 0 {
            let pts: Vec<(f64, f64)> =
                self.bc.iter().map(|b| (X_MIN, b.t)).chain(self.bc.iter().map(|b| (X_MAX, b.t))).collect();
            let comps = self.spec.boundary_components();
            let be = mlp.eval_batch(params, &pts, comps);
            let mut slots = vec![JetComponent::Val];
            if comps.dx {
                slots.push(JetComponent::Dx);
            }
            let mut adj = want.as_ref().map(|_| be.zero_adjoint());
            let mut ss = 0.0;
            for &c in &slots {
                let out = be.output(c);
                let r: Vec<f64> = (0..nb).map(|j| out[j] - out[nb + j]).collect();
                ss += r.iter().map(|r| r * r).sum::<f64>();
                if let (Some(adj), Some((coeff, _))) = (adj.as_mut(), want.as_ref()) {
                    let blk = be.adjoint_block(adj, c);
                    for (j, r) in r.iter().enumerate() {
                        blk[j] = 2.0 * coeff[2] * r;
                        blk[nb + j] = -2.0 * coeff[2] * r;
                    }
                }
            }
            terms.ss[Group::Bc as usize] = ss;
            if let (Some(adj), Some((_, grad))) = (adj, want.as_mut()) {
                be.backward(mlp, params, &adj, grad);
            }
        }

        if !self.pde.is_empty() {
            let pts: Vec<(f64, f64)> = self.pde.iter().map(|p| (p.x, p.t)).collect();
            let be = mlp.eval_batch(params, &pts, self.spec.residual_components());
            let (ss, adj) = pde_residuals(&self.spec, &be, want.as_ref().map(|(c, _)| c[3]));
            terms.ss[Group::Pde as usize] = ss;
            if let (Some(adj), Some((_, grad))) = (adj, want.as_mut()) {
                be.backward(mlp, params, &adj, grad);
            }
        }
        terms
    }

    /// Same sums and gradient recorded point by point on a reverse tape.
    /// Slow; kept as the reference route for the batched engine.
    pub fn terms_and_grad_tape(&self, mlp: &Mlp, params: &[f64], coeff: [f64; 4]) -> (Terms, Vec<f64>) {
        let tape = Tape::new();
        let vars = tape.params(params);
        let mut errors: Vec<(Group, Var<'_>)> = Vec::new();
        for (g, set) in [(Group::Ic, &self.ic), (Group::Pl, &self.pl)] {
            for p in set.iter() {
                let u = mlp.forward_tape(&tape, &vars, p.x, p.t).component(JetComponent::Val);
                errors.push((g, u + (-p.u)));
            }
        }
        for b in &self.bc {
            for r in self.spec.boundary_residuals_tape(mlp, &tape, &vars, b.t) {
                errors.push((Group::Bc, r));
            }
        }
        for p in &self.pde {
            errors.push((Group::Pde, self.spec.residual_tape(mlp, &tape, &vars, p.x, p.t)));
        }
        let mut ss = [0.0; 4];
        let mut acc = tape.constant(Jet2::constant(0.0));
        for (g, e) in errors {
            let sq = e * e;
            ss[g as usize] += sq.value().val;
            acc = acc + sq.scale(coeff[g as usize]);
        }
        let grad = tape.reverse_gradient(acc).expect("objective nodes live on one tape");
        (Terms { ss, n: self.counts() }, grad)
    }
}

/// PDE residual sum of squares and, given `coeff`, the output adjoint of
/// `coeff · Σ f²`.
fn pde_residuals(spec: &SystemSpec, be: &BatchEval, coeff: Option<f64>) -> (f64, Option<Vec<f64>>) {
    let n = be.len();
    let zeros = vec![0.0; n];
    let get = |c: JetComponent| if be.has(c) { be.output(c) } else { &zeros[..] };
    let (u, ux, ut, uxx) = (get(JetComponent::Val), get(JetComponent::Dx), get(JetComponent::Dt), get(JetComponent::Dxx));
    let mut ss = 0.0;
    let mut adj = coeff.map(|_| be.zero_adjoint());
    let comps = [JetComponent::Val, JetComponent::Dx, JetComponent::Dt, JetComponent::Dxx];
    let mut scaled = vec![[0.0; 4]; if adj.is_some() { n } else { 0 }];
    for i in 0..n {
        let (f, p) = spec.residual_partials(u[i], ut[i], ux[i], uxx[i]);
        ss += f * f;
        if let Some(c) = coeff {
            for k in 0..4 {
                scaled[i][k] = 2.0 * c * f * p[k];
            }
        }
    }
    if let Some(adj) = adj.as_mut() {
        for (k, &c) in comps.iter().enumerate() {
            if be.has(c) {
                let blk = be.adjoint_block(adj, c);
                for (b, s) in blk.iter_mut().zip(&scaled) {
                    *b = s[k];
                }
            }
        }
    }
    (ss, adj)
}

//! Batched reverse-over-forward evaluation.
//!
//! A batch of `n` points is evaluated with a chosen set of jet components.
//! Activations are stored as `width × (n_components · n)` row-major
//! matrices, one column block per component, so each affine layer is a
//! single GEMM over all components. `backward` pulls output adjoints back
//! through the cached jets to parameter gradients.

use crate::autodiff::JetComponent;

use super::simd::{self, RowBlocks};
use super::Mlp;

/// Which derivative slots to propagate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Components {
    pub dx: bool,
    pub dt: bool,
    pub dxx: bool,
}

impl Components {
    pub const VALUE: Components = Components { dx: false, dt: false, dxx: false };
    pub const ALL: Components = Components { dx: true, dt: true, dxx: true };

    /// Components evaluated, in block order. `dxx` implies `dx`.
    pub fn list(self) -> Vec<JetComponent> {
        let mut v = vec![JetComponent::Val];
        if self.dx || self.dxx {
            v.push(JetComponent::Dx);
        }
        if self.dt {
            v.push(JetComponent::Dt);
        }
        if self.dxx {
            v.push(JetComponent::Dxx);
        }
        v
    }

    pub fn union(self, o: Components) -> Components {
        Components { dx: self.dx || o.dx, dt: self.dt || o.dt, dxx: self.dxx || o.dxx }
    }
}

/// Forward cache for one batch.
#[derive(Debug, Clone)]
pub struct BatchEval {
    n: usize,
    width: usize,
    block: [Option<usize>; 4],
    n_blocks: usize,
    inputs: Vec<f64>,
    z: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    out: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
    rsc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(a.len() > (m - 1) * rsa + k.saturating_sub(1) * csa || k == 0);
    assert!(b.len() > k.saturating_sub(1) * rsb + (n - 1) * csb || k == 0);
    assert!(c.len() > (m - 1) * rsc + (n - 1));
    // SAFETY: the asserts above bound every element touched by the strided
    // m×k, k×n and m×n views.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

impl Mlp {
    /// Evaluates all `points` carrying the requested components.
    pub fn eval_batch(&self, params: &[f64], points: &[(f64, f64)], comps: Components) -> BatchEval {
        assert_eq!(params.len(), self.num_params());
        let n = points.len();
        let list = comps.list();
        let mut block = [None; 4];
        for (b, c) in list.iter().enumerate() {
            block[*c as usize] = Some(b);
        }
        let n_blocks = list.len();
        let cols = n_blocks * n;
        let width = self.architecture().hidden_width;
        let hidden = self.architecture().hidden_layers;

        let mut inputs = vec![0.0; 2 * cols];
        for (p, &(x, t)) in points.iter().enumerate() {
            inputs[p] = x;
            inputs[cols + p] = t;
        }
        if let Some(b) = block[JetComponent::Dx as usize] {
            inputs[b * n..(b + 1) * n].fill(1.0);
        }
        if let Some(b) = block[JetComponent::Dt as usize] {
            inputs[cols + b * n..cols + (b + 1) * n].fill(1.0);
        }

        let mut z = Vec::with_capacity(hidden);
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(hidden);
        for l in 0..hidden {
            let (_, fan_in, fan_out, _) = self.layer_range(l);
            let (w, bias) = self.layer_view(params, l);
            let prev: &[f64] = if l == 0 { &inputs } else { &h[l - 1] };
            let mut zl = vec![0.0; fan_out * cols];
            gemm(fan_out, fan_in, cols, w, fan_in, 1, prev, cols, 1, 0.0, &mut zl, cols);
            for (r, &br) in bias.iter().enumerate() {
                for v in &mut zl[r * cols..r * cols + n] {
                    *v += br;
                }
            }
            let hl = activate(&zl, fan_out, n, &block, cols);
            z.push(zl);
            h.push(hl);
        }

        let last = hidden;
        let (_, fan_in, _, _) = self.layer_range(last);
        let (w, bias) = self.layer_view(params, last);
        let mut out = vec![0.0; cols];
        gemm(1, fan_in, cols, w, fan_in, 1, &h[last - 1], cols, 1, 0.0, &mut out, cols);
        for v in &mut out[..n] {
            *v += bias[0];
        }
        BatchEval { n, width, block, n_blocks, inputs, z, h, out }
    }
}

/// `tanh` on the value block and its jet rules on the derivative blocks.
fn activate(z: &[f64], rows: usize, n: usize, block: &[Option<usize>; 4], cols: usize) -> Vec<f64> {
    let mut h = vec![0.0; rows * cols];
    if cols == 0 {
        return h;
    }
    let bx = block[JetComponent::Dx as usize];
    let bt = block[JetComponent::Dt as usize];
    let bxx = block[JetComponent::Dxx as usize];
    for (zr, hr) in z.chunks_exact(cols).zip(h.chunks_exact_mut(cols)) {
        let part = |b: Option<usize>| b.map(|b| &zr[b * n..(b + 1) * n]);
        let blocks = RowBlocks { z_val: &zr[..n], z_dx: part(bx), z_dt: part(bt), z_dxx: part(bxx) };
        simd::activate_row(&blocks, hr, n, bx, bt, bxx);
    }
    h
}

impl BatchEval {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn has(&self, c: JetComponent) -> bool {
        self.block[c as usize].is_some()
    }

    /// Network output component `c` at every point.
    ///
    /// Panics if `c` was not requested.
    pub fn output(&self, c: JetComponent) -> &[f64] {
        let b = self.block[c as usize].expect("component not evaluated in this batch");
        &self.out[b * self.n..(b + 1) * self.n]
    }

    /// Zeroed adjoint buffer with the output layout.
    pub fn zero_adjoint(&self) -> Vec<f64> {
        vec![0.0; self.n_blocks * self.n]
    }

    pub fn adjoint_block<'a>(&self, adj: &'a mut [f64], c: JetComponent) -> &'a mut [f64] {
        let b = self.block[c as usize].expect("component not evaluated in this batch");
        &mut adj[b * self.n..(b + 1) * self.n]
    }

    /// Accumulates `Σ adj · ∂output/∂θ` into `grad`.
    pub fn backward(&self, mlp: &Mlp, params: &[f64], adj: &[f64], grad: &mut [f64]) {
        let n = self.n;
        let cols = self.n_blocks * n;
        assert_eq!(adj.len(), cols);
        assert_eq!(grad.len(), mlp.num_params());
        if n == 0 {
            return;
        }
        let hidden = self.h.len();
        let width = self.width;

        let (off, fan_in, _, boff) = mlp.layer_range(hidden);
        let (w_out, _) = mlp.layer_view(params, hidden);
        gemm(1, cols, fan_in, adj, cols, 1, &self.h[hidden - 1], 1, cols, 1.0, &mut grad[off..off + fan_in], fan_in);
        grad[boff] += adj[..n].iter().sum::<f64>();

        let mut hbar = vec![0.0; width * cols];
        for (j, row) in hbar.chunks_exact_mut(cols).enumerate() {
            let wj = w_out[j];
            for (v, a) in row.iter_mut().zip(adj) {
                *v = wj * a;
            }
        }
        let mut zbar = vec![0.0; width * cols];

        for l in (0..hidden).rev() {
            self.activation_backward(l, &hbar, &mut zbar);
            let (off, fan_in, fan_out, boff) = mlp.layer_range(l);
            let prev: &[f64] = if l == 0 { &self.inputs } else { &self.h[l - 1] };
            gemm(fan_out, cols, fan_in, &zbar, cols, 1, prev, 1, cols, 1.0, &mut grad[off..off + fan_out * fan_in], fan_in);
            for r in 0..fan_out {
                grad[boff + r] += zbar[r * cols..r * cols + n].iter().sum::<f64>();
            }
            if l > 0 {
                let (w, _) = mlp.layer_view(params, l);
                gemm(fan_in, fan_out, cols, w, 1, fan_in, &zbar, cols, 1, 0.0, &mut hbar, cols);
            }
        }
    }

    fn activation_backward(&self, l: usize, hbar: &[f64], zbar: &mut [f64]) {
        let n = self.n;
        let cols = self.n_blocks * n;
        let bx = self.block[JetComponent::Dx as usize];
        let bt = self.block[JetComponent::Dt as usize];
        let bxx = self.block[JetComponent::Dxx as usize];
        let rows = self.z[l].chunks_exact(cols).zip(self.h[l].chunks_exact(cols));
        for (((zr, hr), gr), out) in rows.zip(hbar.chunks_exact(cols)).zip(zbar.chunks_exact_mut(cols)) {
            simd::backward_row(&hr[..n], zr, gr, out, n, bx, bt, bxx);
        }
    }
}

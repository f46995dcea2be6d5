//! The candidate solution `u_θ(x, t)`: a fully connected tanh network.
//!
//! # Parameter layout
//!
//! Parameters are one flat `f64` vector, layer-major from input to output.
//! For each layer mapping `fan_in → fan_out` the block is the weight matrix
//! in row-major order (`fan_out` rows of `fan_in` entries, row `o` holding
//! the weights into output unit `o`) followed by the `fan_out` biases.
//! Checkpoints store the same vector as little-endian `f64` after a one-line
//! text header (see [`checkpoint`]).

mod batch;
mod simd;
pub mod checkpoint;

use rand::Rng;

use crate::autodiff::{Jet2, Scalar, Tape, Var};
use crate::rng::rng_from;

pub use batch::{BatchEval, Components};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("parameter vector has length {got}, architecture needs {expected}")]
    Length { expected: usize, got: usize },
    #[error("parameter vector contains non-finite entries")]
    NonFinite,
    #[error("unsupported architecture: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub output_dim: usize,
}

impl Default for Architecture {
    /// Four hidden layers of 50 tanh units on `(x, t)`.
    fn default() -> Self {
        Architecture { input_dim: 2, hidden_layers: 4, hidden_width: 50, output_dim: 1 }
    }
}

impl Architecture {
    pub fn new(hidden_layers: usize, hidden_width: usize) -> Self {
        Architecture { hidden_layers, hidden_width, ..Default::default() }
    }

    /// `(fan_in, fan_out)` of every affine layer, input first.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 1);
        let mut fan_in = self.input_dim;
        for _ in 0..self.hidden_layers {
            dims.push((fan_in, self.hidden_width));
            fan_in = self.hidden_width;
        }
        dims.push((fan_in, self.output_dim));
        dims
    }

    pub fn num_params(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// Flat parameter vector `θ`; see the module docs for the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self, NetworkError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NetworkError::NonFinite);
        }
        Ok(ParameterVector(values))
    }

    pub fn zeros(len: usize) -> Self {
        ParameterVector(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Weights and biases of one affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Row-major `fan_out × fan_in`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// A validated architecture with precomputed parameter offsets.
#[derive(Debug, Clone)]
pub struct Mlp {
    arch: Architecture,
    dims: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    n_params: usize,
}

impl Mlp {
    pub fn new(arch: Architecture) -> Result<Self, NetworkError> {
        if arch.input_dim != 2 || arch.output_dim != 1 {
            return Err(NetworkError::Unsupported(format!(
                "input_dim must be 2 and output_dim 1, got {} and {}",
                arch.input_dim, arch.output_dim
            )));
        }
        if arch.hidden_layers == 0 || arch.hidden_width == 0 {
            return Err(NetworkError::Unsupported("need at least one hidden unit".into()));
        }
        let dims = arch.layer_dims();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut off = 0;
        for &(i, o) in &dims {
            offsets.push(off);
            off += i * o + o;
        }
        Ok(Mlp { arch, dims, offsets, n_params: off })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn num_params(&self) -> usize {
        self.n_params
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len()
    }

    pub(crate) fn layer_view<'a>(&self, params: &'a [f64], l: usize) -> (&'a [f64], &'a [f64]) {
        let (i, o) = self.dims[l];
        let w = &params[self.offsets[l]..self.offsets[l] + i * o];
        let b = &params[self.offsets[l] + i * o..self.offsets[l] + i * o + o];
        (w, b)
    }

    pub(crate) fn layer_range(&self, l: usize) -> (usize, usize, usize, usize) {
        let (i, o) = self.dims[l];
        (self.offsets[l], i, o, self.offsets[l] + i * o)
    }

    pub fn check(&self, params: &ParameterVector) -> Result<(), NetworkError> {
        if params.len() != self.n_params {
            return Err(NetworkError::Length { expected: self.n_params, got: params.len() });
        }
        Ok(())
    }

    /// Glorot-uniform weights with bound `√(6 / (fan_in + fan_out))`, zero biases.
    pub fn init_parameters(&self, seed: u64) -> ParameterVector {
        let mut rng = rng_from(seed);
        let mut v = vec![0.0; self.n_params];
        for (l, &(i, o)) in self.dims.iter().enumerate() {
            let bound = (6.0 / (i + o) as f64).sqrt();
            let off = self.offsets[l];
            for w in &mut v[off..off + i * o] {
                *w = rng.random_range(-bound..=bound);
            }
        }
        ParameterVector(v)
    }

    pub fn glorot_bound(&self, layer: usize) -> f64 {
        let (i, o) = self.dims[layer];
        (6.0 / (i + o) as f64).sqrt()
    }

    pub fn unflatten(&self, params: &ParameterVector) -> Result<Vec<LayerParams>, NetworkError> {
        self.check(params)?;
        Ok((0..self.dims.len())
            .map(|l| {
                let (w, b) = self.layer_view(params.as_slice(), l);
                LayerParams { fan_in: self.dims[l].0, fan_out: self.dims[l].1, weights: w.to_vec(), biases: b.to_vec() }
            })
            .collect())
    }

    pub fn flatten(&self, layers: &[LayerParams]) -> Result<ParameterVector, NetworkError> {
        let mut v = Vec::with_capacity(self.n_params);
        for layer in layers {
            v.extend_from_slice(&layer.weights);
            v.extend_from_slice(&layer.biases);
        }
        if v.len() != self.n_params {
            return Err(NetworkError::Length { expected: self.n_params, got: v.len() });
        }
        ParameterVector::new(v)
    }

    /// Evaluates the network along any [`Scalar`] route. `weight(k)` yields
    /// parameter `k` lifted to `S`.
    fn evaluate<S: Scalar>(&self, weight: impl Fn(usize) -> S, x: S, t: S) -> S {
        let mut h = vec![x, t];
        let last = self.dims.len() - 1;
        for (l, &(fan_in, fan_out)) in self.dims.iter().enumerate() {
            let off = self.offsets[l];
            let mut next = Vec::with_capacity(fan_out);
            for o in 0..fan_out {
                let row = off + o * fan_in;
                let mut z = h[0] * weight(row);
                for (j, &hj) in h.iter().enumerate().skip(1) {
                    z = z + hj * weight(row + j);
                }
                z = z + weight(off + fan_in * fan_out + o);
                next.push(if l == last { z } else { z.tanh() });
            }
            h = next;
        }
        h[0]
    }

    pub fn forward(&self, params: &ParameterVector, x: f64, t: f64) -> f64 {
        let p = params.as_slice();
        self.evaluate(|k| p[k], x, t)
    }

    /// `(u, u_x, u_t, u_xx)` at `(x, t)` as a [`Jet2`]; the value slot is
    /// bitwise equal to [`Mlp::forward`].
    pub fn forward_jet(&self, params: &ParameterVector, x: f64, t: f64) -> Jet2 {
        let p = params.as_slice();
        self.evaluate(|k| Jet2::constant(p[k]), Jet2::seed_x(x), Jet2::seed_t(t))
    }

    /// Records the network on `tape` with `params` as parameter nodes and
    /// seeded `(x, t)` inputs. Components of the returned node give
    /// parameter-differentiable `u`, `u_x`, `u_t`, `u_xx`.
    pub fn forward_tape<'t>(&self, tape: &'t Tape, params: &[Var<'t>], x: f64, t: f64) -> Var<'t> {
        assert_eq!(params.len(), self.n_params);
        self.evaluate(|k| params[k], tape.seed_x(x), tape.seed_t(t))
    }
}

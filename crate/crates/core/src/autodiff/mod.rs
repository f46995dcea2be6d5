//! Differentiation engine: forward input jets and reverse parameter sweeps.
//!
//! [`Jet2`] propagates `(u, u_x, u_t, u_xx)` through elementary operations.
//! [`Tape`] records operations over jet-valued nodes and returns exact
//! parameter gradients of any scalar built from them, including scalars
//! that read derivative slots. The batched network engine in
//! [`crate::network`] implements the same reverse-over-forward scheme at
//! layer granularity and is cross-checked against this tape.

mod jet;
mod tape;

use std::ops::{Add, Mul, Neg, Sub};

pub use jet::{ElementaryOp, Jet2};
pub use tape::{JetComponent, Tape, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("division by a jet with zero value")]
    DivisionByZero,
    #[error("operation expects {expected} arguments, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("node does not belong to this tape")]
    ForeignNode,
}

/// Arithmetic shared by plain floats, jets and tape nodes, so model code can
/// be written once and evaluated along any route.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> + Mul<f64, Output = Self> + Add<f64, Output = Self>
{
    fn tanh(self) -> Self;
    fn exp(self) -> Self;
    fn sin(self) -> Self;
    /// `1 / self` without a domain check (infinite at zero).
    fn recip(self) -> Self;
}

impl Scalar for f64 {
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn recip(self) -> Self {
        1.0 / self
    }
}

impl Scalar for Jet2 {
    fn tanh(self) -> Self {
        Jet2::tanh(self)
    }
    fn exp(self) -> Self {
        Jet2::exp(self)
    }
    fn sin(self) -> Self {
        Jet2::sin(self)
    }
    fn recip(self) -> Self {
        self.compose(jet::Taylor3::recip(self.val))
    }
}

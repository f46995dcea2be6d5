//! Reverse-mode tape whose nodes carry [`Jet2`] values.
//!
//! Parameters enter as leaves that are constant in `(x, t)`; inputs enter as
//! seeded jets. Any node's jet component can be lifted back to a scalar node,
//! so functionals of input derivatives (PDE residuals) are differentiated
//! exactly with respect to the parameters in a single reverse sweep.

use std::cell::RefCell;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, Ordering};

use super::jet::{Jet2, Taylor3};
use super::{AutodiffError, ElementaryOp, Scalar};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Index of a jet component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetComponent {
    Val = 0,
    Dx = 1,
    Dt = 2,
    Dxx = 3,
}

#[derive(Debug, Clone, Copy)]
enum NodeKind {
    Param(usize),
    Constant,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Unary(usize, Taylor3),
    Component(usize, JetComponent),
}

#[derive(Debug, Clone, Copy)]
struct Node {
    value: Jet2,
    kind: NodeKind,
}

#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: RefCell<Vec<Node>>,
    n_params: RefCell<usize>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var(#{}, {:?})", self.index, self.value())
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: RefCell::new(Vec::new()),
            n_params: RefCell::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_params(&self) -> usize {
        *self.n_params.borrow()
    }

    fn push(&self, value: Jet2, kind: NodeKind) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, kind });
        Var { tape: self, index: nodes.len() - 1 }
    }

    /// Registers a new parameter leaf. Parameters are numbered in call order.
    pub fn param(&self, value: f64) -> Var<'_> {
        let mut n = self.n_params.borrow_mut();
        let k = *n;
        *n += 1;
        drop(n);
        self.push(Jet2::constant(value), NodeKind::Param(k))
    }

    pub fn params(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.param(v)).collect()
    }

    pub fn constant(&self, value: Jet2) -> Var<'_> {
        self.push(value, NodeKind::Constant)
    }

    pub fn seed_x(&self, x: f64) -> Var<'_> {
        self.constant(Jet2::seed_x(x))
    }

    pub fn seed_t(&self, t: f64) -> Var<'_> {
        self.constant(Jet2::seed_t(t))
    }

    fn check<'a>(&'a self, v: Var<'a>) -> Result<usize, AutodiffError> {
        if v.tape.id != self.id || v.index >= self.len() {
            return Err(AutodiffError::ForeignNode);
        }
        Ok(v.index)
    }

    /// Records `op` applied to `args`.
    pub fn apply<'a>(&'a self, op: ElementaryOp, args: &[Var<'a>]) -> Result<Var<'a>, AutodiffError> {
        if args.len() != op.arity() {
            return Err(AutodiffError::Arity { expected: op.arity(), got: args.len() });
        }
        for a in args {
            self.check(*a)?;
        }
        Ok(match op {
            ElementaryOp::Add => args[0] + args[1],
            ElementaryOp::Sub => args[0] - args[1],
            ElementaryOp::Mul => args[0] * args[1],
            ElementaryOp::Div => args[0].checked_div(args[1])?,
            ElementaryOp::Tanh => args[0].tanh(),
            ElementaryOp::Exp => args[0].exp(),
            ElementaryOp::Sin => args[0].sin(),
            ElementaryOp::Scale(c) => args[0].scale(c),
        })
    }

    /// Gradient of `output.val` with respect to every registered parameter.
    pub fn reverse_gradient(&self, output: Var<'_>) -> Result<Vec<f64>, AutodiffError> {
        let out = self.check(output)?;
        let nodes = self.nodes.borrow();
        let mut adj = vec![[0.0f64; 4]; out + 1];
        let mut grad = vec![0.0; self.num_params()];
        adj[out][0] = 1.0;
        for i in (0..=out).rev() {
            let c = adj[i];
            if c == [0.0; 4] {
                continue;
            }
            match nodes[i].kind {
                NodeKind::Param(k) => grad[k] += c[0],
                NodeKind::Constant => {}
                NodeKind::Add(a, b) => {
                    accumulate(&mut adj[a], c, 1.0);
                    accumulate(&mut adj[b], c, 1.0);
                }
                NodeKind::Sub(a, b) => {
                    accumulate(&mut adj[a], c, 1.0);
                    accumulate(&mut adj[b], c, -1.0);
                }
                NodeKind::Scale(a, s) => accumulate(&mut adj[a], c, s),
                NodeKind::Mul(a, b) => {
                    let (va, vb) = (nodes[a].value, nodes[b].value);
                    let ga = mul_vjp(c, vb);
                    let gb = mul_vjp(c, va);
                    accumulate(&mut adj[a], ga, 1.0);
                    accumulate(&mut adj[b], gb, 1.0);
                }
                NodeKind::Unary(a, g) => {
                    let v = nodes[a].value;
                    let ga = [
                        c[0] * g.d1
                            + (c[1] * v.dx + c[2] * v.dt) * g.d2
                            + c[3] * (g.d3 * v.dx * v.dx + g.d2 * v.dxx),
                        c[1] * g.d1 + 2.0 * c[3] * g.d2 * v.dx,
                        c[2] * g.d1,
                        c[3] * g.d1,
                    ];
                    accumulate(&mut adj[a], ga, 1.0);
                }
                NodeKind::Component(a, k) => adj[a][k as usize] += c[0],
            }
        }
        Ok(grad)
    }
}

fn accumulate(dst: &mut [f64; 4], src: [f64; 4], s: f64) {
    for k in 0..4 {
        dst[k] += s * src[k];
    }
}

/// Pullback of `c = a * b` onto `a`, given the jet of `b`.
fn mul_vjp(c: [f64; 4], b: Jet2) -> [f64; 4] {
    [
        c[0] * b.val + c[1] * b.dx + c[2] * b.dt + c[3] * b.dxx,
        c[1] * b.val + 2.0 * c[3] * b.dx,
        c[2] * b.val,
        c[3] * b.val,
    ]
}

impl<'t> Var<'t> {
    pub fn value(self) -> Jet2 {
        self.tape.nodes.borrow()[self.index].value
    }

    pub fn tape(self) -> &'t Tape {
        self.tape
    }

    fn same_tape(self, other: Var<'t>) {
        assert_eq!(self.tape.id, other.tape.id, "mixing nodes from different tapes");
    }

    fn unary(self, g: Taylor3) -> Var<'t> {
        let v = self.value().compose(g);
        self.tape.push(v, NodeKind::Unary(self.index, g))
    }

    /// Lifts one jet component of this node to a scalar node.
    pub fn component(self, k: JetComponent) -> Var<'t> {
        let v = self.value().to_array()[k as usize];
        self.tape.push(Jet2::constant(v), NodeKind::Component(self.index, k))
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        self.tape.push(self.value().scale(c), NodeKind::Scale(self.index, c))
    }

    pub fn tanh(self) -> Var<'t> {
        self.unary(Taylor3::tanh(self.value().val))
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(Taylor3::exp(self.value().val))
    }

    pub fn sin(self) -> Var<'t> {
        self.unary(Taylor3::sin(self.value().val))
    }

    pub fn recip(self) -> Result<Var<'t>, AutodiffError> {
        let v = self.value().val;
        if v == 0.0 {
            return Err(AutodiffError::DivisionByZero);
        }
        Ok(self.unary(Taylor3::recip(v)))
    }

    pub fn checked_div(self, rhs: Var<'t>) -> Result<Var<'t>, AutodiffError> {
        Ok(self * rhs.recip()?)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, r: Var<'t>) -> Var<'t> {
        self.same_tape(r);
        self.tape.push(self.value() + r.value(), NodeKind::Add(self.index, r.index))
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, r: Var<'t>) -> Var<'t> {
        self.same_tape(r);
        self.tape.push(self.value() - r.value(), NodeKind::Sub(self.index, r.index))
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, r: Var<'t>) -> Var<'t> {
        self.same_tape(r);
        self.tape.push(self.value() * r.value(), NodeKind::Mul(self.index, r.index))
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Var<'t> {
        self.scale(c)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Var<'t> {
        let k = self.tape.constant(Jet2::constant(c));
        self + k
    }
}

impl<'t> Scalar for Var<'t> {
    fn tanh(self) -> Self {
        Var::tanh(self)
    }
    fn exp(self) -> Self {
        Var::exp(self)
    }
    fn sin(self) -> Self {
        Var::sin(self)
    }
    fn recip(self) -> Self {
        self.unary(Taylor3::recip(self.value().val))
    }
}

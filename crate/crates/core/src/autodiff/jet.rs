//! Second-order input jets in `(x, t)`.

use std::ops::{Add, Mul, Neg, Sub};

use super::AutodiffError;

/// A scalar together with its derivatives `∂/∂x`, `∂/∂t` and `∂²/∂x²`.
///
/// Mixed and temporal second derivatives are not carried.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub val: f64,
    pub dx: f64,
    pub dt: f64,
    pub dxx: f64,
}

/// Elementary operations understood by [`Jet2::apply`] and the tape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Tanh,
    Exp,
    Sin,
    Scale(f64),
}

impl ElementaryOp {
    pub fn arity(self) -> usize {
        match self {
            ElementaryOp::Add | ElementaryOp::Sub | ElementaryOp::Mul | ElementaryOp::Div => 2,
            _ => 1,
        }
    }
}

/// Value and first three derivatives of a smooth scalar function at a point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Taylor3 {
    pub f: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Taylor3 {
    pub fn tanh(v: f64) -> Self {
        let y = v.tanh();
        let d1 = 1.0 - y * y;
        let d2 = -2.0 * y * d1;
        let d3 = -2.0 * (d1 * d1 + y * d2);
        Taylor3 { f: y, d1, d2, d3 }
    }

    pub fn exp(v: f64) -> Self {
        let e = v.exp();
        Taylor3 { f: e, d1: e, d2: e, d3: e }
    }

    pub fn sin(v: f64) -> Self {
        let (s, c) = v.sin_cos();
        Taylor3 { f: s, d1: c, d2: -s, d3: -c }
    }

    pub fn recip(v: f64) -> Self {
        let r = 1.0 / v;
        Taylor3 { f: r, d1: -r * r, d2: 2.0 * r * r * r, d3: -6.0 * r * r * r * r }
    }
}

impl Jet2 {
    pub const fn constant(c: f64) -> Self {
        Jet2 { val: c, dx: 0.0, dt: 0.0, dxx: 0.0 }
    }

    pub const fn seed_x(x: f64) -> Self {
        Jet2 { val: x, dx: 1.0, dt: 0.0, dxx: 0.0 }
    }

    pub const fn seed_t(t: f64) -> Self {
        Jet2 { val: t, dx: 0.0, dt: 1.0, dxx: 0.0 }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.val, self.dx, self.dt, self.dxx]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Jet2 { val: a[0], dx: a[1], dt: a[2], dxx: a[3] }
    }

    pub fn is_finite(self) -> bool {
        self.val.is_finite() && self.dx.is_finite() && self.dt.is_finite() && self.dxx.is_finite()
    }

    pub(crate) fn compose(self, g: Taylor3) -> Jet2 {
        Jet2 {
            val: g.f,
            dx: g.d1 * self.dx,
            dt: g.d1 * self.dt,
            dxx: g.d2 * self.dx * self.dx + g.d1 * self.dxx,
        }
    }

    pub fn tanh(self) -> Jet2 {
        self.compose(Taylor3::tanh(self.val))
    }

    pub fn exp(self) -> Jet2 {
        self.compose(Taylor3::exp(self.val))
    }

    pub fn sin(self) -> Jet2 {
        self.compose(Taylor3::sin(self.val))
    }

    pub fn scale(self, c: f64) -> Jet2 {
        Jet2 { val: c * self.val, dx: c * self.dx, dt: c * self.dt, dxx: c * self.dxx }
    }

    pub fn recip(self) -> Result<Jet2, AutodiffError> {
        if self.val == 0.0 {
            return Err(AutodiffError::DivisionByZero);
        }
        Ok(self.compose(Taylor3::recip(self.val)))
    }

    pub fn checked_div(self, rhs: Jet2) -> Result<Jet2, AutodiffError> {
        Ok(self * rhs.recip()?)
    }

    /// Applies `op` to `args`, checking arity and domain.
    pub fn apply(op: ElementaryOp, args: &[Jet2]) -> Result<Jet2, AutodiffError> {
        if args.len() != op.arity() {
            return Err(AutodiffError::Arity { expected: op.arity(), got: args.len() });
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
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, r: Jet2) -> Jet2 {
        Jet2 { val: self.val + r.val, dx: self.dx + r.dx, dt: self.dt + r.dt, dxx: self.dxx + r.dxx }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, r: Jet2) -> Jet2 {
        Jet2 { val: self.val - r.val, dx: self.dx - r.dx, dt: self.dt - r.dt, dxx: self.dxx - r.dxx }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, r: Jet2) -> Jet2 {
        Jet2 {
            val: self.val * r.val,
            dx: self.dx * r.val + self.val * r.dx,
            dt: self.dt * r.val + self.val * r.dt,
            dxx: self.dxx * r.val + 2.0 * self.dx * r.dx + self.val * r.dxx,
        }
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(self, c: f64) -> Jet2 {
        Jet2 { val: self.val + c, ..self }
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, c: f64) -> Jet2 {
        self.scale(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    /// Evaluates `f` as a function of `(x, t)` via jets and compares all four
    /// slots to central differences of the value slot.
    fn check_fd(f: impl Fn(Jet2, Jet2) -> Jet2, x: f64, t: f64) {
        let h = 1e-5;
        let v = |x: f64, t: f64| f(Jet2::seed_x(x), Jet2::seed_t(t)).val;
        let j = f(Jet2::seed_x(x), Jet2::seed_t(t));
        let fx = (v(x + h, t) - v(x - h, t)) / (2.0 * h);
        let ft = (v(x, t + h) - v(x, t - h)) / (2.0 * h);
        let hh = 1e-4;
        let fxx = (v(x + hh, t) - 2.0 * v(x, t) + v(x - hh, t)) / (hh * hh);
        assert_eq!(j.val, v(x, t));
        assert!(close(j.dx, fx, 1e-6), "dx {} vs {}", j.dx, fx);
        assert!(close(j.dt, ft, 1e-6), "dt {} vs {}", j.dt, ft);
        assert!(close(j.dxx, fxx, 1e-6), "dxx {} vs {}", j.dxx, fxx);
    }

    #[test]
    fn tanh_at_origin() {
        let j = Jet2::apply(ElementaryOp::Tanh, &[Jet2::seed_x(0.0)]).unwrap();
        assert_eq!(j, Jet2 { val: 0.0, dx: 1.0, dt: 0.0, dxx: 0.0 });
    }

    #[test]
    fn square_of_x() {
        let x = Jet2::seed_x(3.0);
        let j = Jet2::apply(ElementaryOp::Mul, &[x, x]).unwrap();
        assert_eq!(j, Jet2 { val: 9.0, dx: 6.0, dt: 0.0, dxx: 2.0 });
    }

    #[test]
    fn travelling_sine_time_derivative() {
        let beta = 30.0;
        let f = |x: Jet2, t: Jet2| (x - t.scale(beta)).sin();
        let j = f(Jet2::seed_x(1.0), Jet2::seed_t(0.0));
        let h = 1e-5;
        let fd = (f(Jet2::seed_x(1.0), Jet2::seed_t(h)).val - f(Jet2::seed_x(1.0), Jet2::seed_t(-h)).val)
            / (2.0 * h);
        assert!(close(j.dt, -30.0 * 1f64.cos(), 1e-12));
        assert!(close(j.dt, fd, 1e-6));
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let pts = [(0.3, 0.7), (1.1, 0.2), (-0.4, 0.9)];
        for &(x, t) in &pts {
            check_fd(|x, t| x + t * x, x, t);
            check_fd(|x, t| x - t.scale(2.5), x, t);
            check_fd(|x, t| x * t * x, x, t);
            check_fd(|x, t| x.checked_div(t + 2.0).unwrap(), x, t);
            check_fd(|x, t| (x * t).tanh(), x, t);
            check_fd(|x, t| (x.scale(0.5) - t).exp(), x, t);
            check_fd(|x, t| (x * x + t).sin(), x, t);
        }
    }

    #[test]
    fn division_by_zero_is_domain_error() {
        let r = Jet2::apply(ElementaryOp::Div, &[Jet2::seed_x(1.0), Jet2::constant(0.0)]);
        assert_eq!(r, Err(AutodiffError::DivisionByZero));
    }

    #[test]
    fn wrong_arity_is_rejected() {
        let r = Jet2::apply(ElementaryOp::Add, &[Jet2::constant(1.0)]);
        assert!(matches!(r, Err(AutodiffError::Arity { expected: 2, got: 1 })));
    }
}

//! Ensemble prediction, relative L2 error and field exports.

use std::io::{self, Write};

use rand::Rng;

use crate::data::Point;
use crate::network::{Components, Mlp, ParameterVector};
use crate::rng::rng_from;
use crate::systems::{Reference, T_MAX, T_MIN, X_MAX, X_MIN};
use crate::autodiff::JetComponent;

pub const EVAL_POINTS: usize = 10_000;
pub const FIELD_NX: usize = 256;
pub const FIELD_NT: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("reference has zero norm")]
    ZeroReference,
    #[error("prediction has {pred} values, reference {reference}")]
    Length { pred: usize, reference: usize },
    #[error("no samples to evaluate")]
    NoSamples,
}

/// `n` points uniform on `[0, 2π) × [0, 1)`.
pub fn random_points(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = rng_from(seed);
    (0..n)
        .map(|_| Point { x: rng.random_range(X_MIN..X_MAX), t: rng.random_range(T_MIN..T_MAX) })
        .collect()
}

/// Network outputs at `points`, one row per sample.
pub fn predictions(mlp: &Mlp, samples: &[ParameterVector], points: &[Point]) -> Vec<Vec<f64>> {
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.t)).collect();
    samples
        .iter()
        .map(|s| {
            if pts.is_empty() {
                return Vec::new();
            }
            mlp.eval_batch(s.as_slice(), &pts, Components::VALUE).output(JetComponent::Val).to_vec()
        })
        .collect()
}

/// Pointwise ensemble mean and population variance.
pub fn mean_and_variance(preds: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = preds.len() as f64;
    let m = preds.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; m];
    for row in preds {
        for (a, v) in mean.iter_mut().zip(row) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|a| *a /= n);
    let mut var = vec![0.0; m];
    for row in preds {
        for ((a, v), mu) in var.iter_mut().zip(row).zip(&mean) {
            *a += (v - mu) * (v - mu);
        }
    }
    var.iter_mut().for_each(|a| *a /= n);
    (mean, var)
}

pub fn predict_mean(mlp: &Mlp, samples: &[ParameterVector], points: &[Point]) -> Result<Vec<f64>, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::NoSamples);
    }
    Ok(mean_and_variance(&predictions(mlp, samples, points)).0)
}

/// `‖pred − ref‖₂ / ‖ref‖₂`.
pub fn relative_l2(pred: &[f64], reference: &[f64]) -> Result<f64, EvalError> {
    if pred.len() != reference.len() {
        return Err(EvalError::Length { pred: pred.len(), reference: reference.len() });
    }
    let den: f64 = reference.iter().map(|r| r * r).sum();
    if den == 0.0 {
        return Err(EvalError::ZeroReference);
    }
    let num: f64 = pred.iter().zip(reference).map(|(p, r)| (p - r) * (p - r)).sum();
    Ok((num / den).sqrt())
}

/// Fixed evaluation points with their reference values.
#[derive(Debug, Clone)]
pub struct Evaluator {
    pub points: Vec<Point>,
    pub reference: Vec<f64>,
}

impl Evaluator {
    pub fn new(reference: &Reference, n: usize, seed: u64) -> Self {
        let points = random_points(n, seed);
        let reference = points.iter().map(|p| reference.eval(p.x, p.t)).collect();
        Evaluator { points, reference }
    }

    /// Relative L2 error of the ensemble-mean prediction.
    pub fn relative_l2(&self, mlp: &Mlp, samples: &[ParameterVector]) -> Result<f64, EvalError> {
        relative_l2(&predict_mean(mlp, samples, &self.points)?, &self.reference)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldCell {
    pub x: f64,
    pub t: f64,
    pub prediction: f64,
    pub reference: f64,
    pub abs_error: f64,
    pub variance: f64,
}

/// Prediction, error and posterior variance on an `nx × nt` lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    pub nx: usize,
    pub nt: usize,
    /// Time-major: cell `(i, j)` at index `j * nx + i`.
    pub cells: Vec<FieldCell>,
}

/// Lattice `x_i = 2π i / nx`, `t_j = j / (nt − 1)`.
pub fn lattice(nx: usize, nt: usize) -> Vec<Point> {
    let mut pts = Vec::with_capacity(nx * nt);
    for j in 0..nt {
        let t = if nt > 1 { T_MIN + (T_MAX - T_MIN) * j as f64 / (nt - 1) as f64 } else { T_MIN };
        for i in 0..nx {
            pts.push(Point { x: X_MIN + (X_MAX - X_MIN) * i as f64 / nx as f64, t });
        }
    }
    pts
}

pub fn export_fields(
    mlp: &Mlp,
    samples: &[ParameterVector],
    reference: &Reference,
    nx: usize,
    nt: usize,
) -> Result<EvalGrid, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::NoSamples);
    }
    let pts = lattice(nx, nt);
    let (mean, var) = mean_and_variance(&predictions(mlp, samples, &pts));
    let cells = pts
        .iter()
        .zip(mean.iter().zip(&var))
        .map(|(p, (&m, &v))| {
            let r = reference.eval(p.x, p.t);
            FieldCell { x: p.x, t: p.t, prediction: m, reference: r, abs_error: (m - r).abs(), variance: v }
        })
        .collect();
    Ok(EvalGrid { nx, nt, cells })
}

impl EvalGrid {
    /// CSV with columns `x,t,prediction,reference,abs_error,variance`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,t,prediction,reference,abs_error,variance")?;
        for c in &self.cells {
            writeln!(w, "{:e},{:e},{:e},{:e},{:e},{:e}", c.x, c.t, c.prediction, c.reference, c.abs_error, c.variance)?;
        }
        w.flush()
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn rank_correlation(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut k = 0;
        while k < idx.len() {
            let mut e = k;
            while e + 1 < idx.len() && v[idx[e + 1]] == v[idx[k]] {
                e += 1;
            }
            let avg = (k + e) as f64 / 2.0;
            for &i in &idx[k..=e] {
                r[i] = avg;
            }
            k = e + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

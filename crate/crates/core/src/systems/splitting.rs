//! Reaction-diffusion ground truth by Strang splitting.
//!
//! Each step applies half a diffusion step as the exact Fourier multiplier
//! `exp(−d k² Δt / 2)`, a full exact logistic step, then the second half
//! diffusion step, on a periodic grid `x_i = 2π i / nx`.

use std::f64::consts::PI;
use std::io::{self, Write};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{SystemsError, T_MAX};

/// Solution values on `(nt + 1) × nx` lattice points, time-major.
#[derive(Debug, Clone)]
pub struct SolutionGrid {
    pub nx: usize,
    pub nt: usize,
    pub dt: f64,
    pub values: Vec<f64>,
}

fn logistic_step(u: f64, growth: f64) -> f64 {
    // growth = exp(ρ Δt)
    let g = u * growth;
    g / (g + 1.0 - u)
}

/// Solves `u_t = d u_xx + ρ u (1 − u)` from the Gaussian bump on
/// `[0, 2π) × [0, 1]`.
pub fn solve_reaction_diffusion(rho: f64, d: f64, nx: usize, nt: usize) -> Result<SolutionGrid, SystemsError> {
    if nx < 4 || !nx.is_power_of_two() {
        return Err(SystemsError::GridSize(nx));
    }
    if nt == 0 {
        return Err(SystemsError::TimeSteps);
    }
    let dt = T_MAX / nt as f64;
    let h = 2.0 * PI / nx as f64;
    let mut u: Vec<f64> = (0..nx)
        .map(|i| {
            let c = i as f64 * h - PI;
            (-8.0 * c * c / (PI * PI)).exp()
        })
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(nx);
    let inv = planner.plan_fft_inverse(nx);
    let half_decay: Vec<f64> = (0..nx)
        .map(|i| {
            let k = if i <= nx / 2 { i as f64 } else { i as f64 - nx as f64 };
            (-d * k * k * dt / 2.0).exp()
        })
        .collect();
    let growth = (rho * dt).exp();
    let mut buf = vec![Complex::new(0.0, 0.0); nx];
    let mut half_diffuse = |u: &mut [f64]| {
        for (b, &v) in buf.iter_mut().zip(u.iter()) {
            *b = Complex::new(v, 0.0);
        }
        fwd.process(&mut buf);
        for (b, &m) in buf.iter_mut().zip(&half_decay) {
            *b *= m / nx as f64;
        }
        inv.process(&mut buf);
        for (v, b) in u.iter_mut().zip(&buf) {
            *v = b.re;
        }
    };

    let mut values = Vec::with_capacity((nt + 1) * nx);
    values.extend_from_slice(&u);
    for _ in 0..nt {
        half_diffuse(&mut u);
        for v in &mut u {
            *v = logistic_step(*v, growth);
        }
        half_diffuse(&mut u);
        values.extend_from_slice(&u);
    }
    Ok(SolutionGrid { nx, nt, dt, values })
}

impl SolutionGrid {
    pub fn at(&self, time_index: usize, space_index: usize) -> f64 {
        self.values[time_index * self.nx + space_index % self.nx]
    }

    pub fn x(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.nx as f64
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Periodic cubic Lagrange interpolation in `x`, linear in `t`.
    pub fn interpolate(&self, x: f64, t: f64) -> f64 {
        let h = 2.0 * PI / self.nx as f64;
        let s = (x / h).rem_euclid(self.nx as f64);
        let i = s.floor() as isize;
        let f = s - i as f64;
        let tn = (t / self.dt).clamp(0.0, self.nt as f64);
        let n0 = (tn.floor() as usize).min(self.nt.saturating_sub(1));
        let g = tn - n0 as f64;
        let row = |n: usize| {
            let p = |o: isize| self.at(n, (i + o).rem_euclid(self.nx as isize) as usize);
            let (pm, p0, p1, p2) = (p(-1), p(0), p(1), p(2));
            -f * (f - 1.0) * (f - 2.0) / 6.0 * pm + (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0 * p0
                - (f + 1.0) * f * (f - 2.0) / 2.0 * p1
                + (f + 1.0) * f * (f - 1.0) / 6.0 * p2
        };
        if g == 0.0 {
            return row(n0);
        }
        (1.0 - g) * row(n0) + g * row(n0 + 1)
    }

    /// Writes `x,t,u` rows for every lattice point, with header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,t,u")?;
        for n in 0..=self.nt {
            for i in 0..self.nx {
                writeln!(w, "{:.17e},{:.17e},{:.17e}", self.x(i), self.t(n), self.at(n, i))?;
            }
        }
        w.flush()
    }
}

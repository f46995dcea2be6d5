//! Training point sets and the normalized geometry used to grow them.
//!
//! All distances are Euclidean in coordinates min-max scaled to `[0, 1]²`.

use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng::rng_from;
use crate::systems::{SystemSpec, T_MAX, T_MIN, X_MAX, X_MIN};

pub const IC_POINTS: usize = 256;
pub const BC_POINTS: usize = 100;
pub const PDE_POINTS: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("labeled set is empty")]
    EmptyLabeled,
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub x: f64,
    pub t: f64,
    pub u: f64,
}

impl LabeledPoint {
    pub fn point(&self) -> Point {
        Point { x: self.x, t: self.t }
    }
}

/// A boundary time `t`, standing for the pair `(0, t)`, `(2π, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub t: f64,
}

impl BoundaryPoint {
    pub fn left(&self) -> Point {
        Point { x: X_MIN, t: self.t }
    }
    pub fn right(&self) -> Point {
        Point { x: X_MAX, t: self.t }
    }
}

/// Pseudo-label attached to collocation point `pde_index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoLabel {
    pub pde_index: usize,
    pub point: LabeledPoint,
}

/// Rectangular computational domain `[x_min, x_max] × [t_min, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for Domain {
    fn default() -> Self {
        Domain { x_min: X_MIN, x_max: X_MAX, t_min: T_MIN, t_max: T_MAX }
    }
}

impl Domain {
    /// Min-max scaling of each coordinate to `[0, 1]`.
    pub fn normalize(&self, p: Point) -> (f64, f64) {
        ((p.x - self.x_min) / (self.x_max - self.x_min), (p.t - self.t_min) / (self.t_max - self.t_min))
    }

    pub fn distance(&self, a: Point, b: Point) -> f64 {
        let (ax, at) = self.normalize(a);
        let (bx, bt) = self.normalize(b);
        (ax - bx).hypot(at - bt)
    }
}

/// `n` Latin hypercube samples: along each dimension every one of the `n`
/// equal strata of `[lo, hi)` holds exactly one sample.
pub fn latin_hypercube(n: usize, bounds: &[(f64, f64)], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from(seed);
    let mut samples = vec![vec![0.0; bounds.len()]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for (d, &(lo, hi)) in bounds.iter().enumerate() {
        perm.shuffle(&mut rng);
        for (s, &stratum) in samples.iter_mut().zip(&perm) {
            let u: f64 = rng.random();
            // clamp guards against rounding up to `hi`
            let v = lo + (stratum as f64 + u) / n as f64 * (hi - lo);
            s[d] = if v < hi { v } else { hi - (hi - lo) * f64::EPSILON };
        }
    }
    samples
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub index: usize,
    pub point: LabeledPoint,
    pub distance: f64,
}

/// Closest labeled point to `query`; ties go to the lowest index.
pub fn nearest_labeled(domain: &Domain, query: Point, labeled: &[LabeledPoint]) -> Result<Nearest, DataError> {
    let (qx, qt) = domain.normalize(query);
    let mut best: Option<(usize, f64)> = None;
    for (i, l) in labeled.iter().enumerate() {
        let (lx, lt) = domain.normalize(l.point());
        let d2 = (qx - lx) * (qx - lx) + (qt - lt) * (qt - lt);
        if best.is_none_or(|(_, b)| d2 < b) {
            best = Some((i, d2));
        }
    }
    let (index, d2) = best.ok_or(DataError::EmptyLabeled)?;
    Ok(Nearest { index, point: labeled[index], distance: d2.sqrt() })
}

fn normalized(domain: &Domain, labeled: &[LabeledPoint]) -> Vec<(f64, f64)> {
    labeled.iter().map(|l| domain.normalize(l.point())).collect()
}

fn within(norm_labeled: &[(f64, f64)], q: (f64, f64), radius: f64) -> bool {
    let r2 = radius * radius;
    norm_labeled.iter().any(|&(lx, lt)| {
        let d2 = (q.0 - lx) * (q.0 - lx) + (q.1 - lt) * (q.1 - lt);
        d2 < r2 && d2.sqrt() < radius
    })
}

/// Indices of `points` whose nearest labeled point is strictly closer than `radius`.
pub fn active_subset(domain: &Domain, points: &[Point], labeled: &[LabeledPoint], radius: f64) -> Vec<usize> {
    let norm = normalized(domain, labeled);
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| within(&norm, domain.normalize(**p), radius))
        .map(|(i, _)| i)
        .collect()
}

/// Indices of boundary times for which either endpoint of the pair is
/// strictly within `radius` of a labeled point.
pub fn active_boundary(domain: &Domain, bc: &[BoundaryPoint], labeled: &[LabeledPoint], radius: f64) -> Vec<usize> {
    let norm = normalized(domain, labeled);
    bc.iter()
        .enumerate()
        .filter(|(_, b)| {
            within(&norm, domain.normalize(b.left()), radius) || within(&norm, domain.normalize(b.right()), radius)
        })
        .map(|(i, _)| i)
        .collect()
}

/// Dataset sizes; defaults are 256 IC, 100 BC and 1000 collocation points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataSizes {
    pub ic: usize,
    pub bc: usize,
    pub pde: usize,
}

impl Default for DataSizes {
    fn default() -> Self {
        DataSizes { ic: IC_POINTS, bc: BC_POINTS, pde: PDE_POINTS }
    }
}

/// All training sets of one run. `pl` grows append-only; each collocation
/// point carries at most one pseudo-label.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBundle {
    pub domain: Domain,
    pub ic: Vec<LabeledPoint>,
    pub bc: Vec<BoundaryPoint>,
    pub pde: Vec<Point>,
    pub pl: Vec<PseudoLabel>,
    labeled_pde: Vec<bool>,
}

impl DataBundle {
    /// Evenly spaced IC on `[0, 2π)`, evenly spaced BC times on `[0, 1]`,
    /// Latin hypercube collocation points, no pseudo-labels.
    pub fn build(spec: &SystemSpec, sizes: DataSizes, seed: u64) -> Self {
        let domain = Domain::default();
        let ic = (0..sizes.ic)
            .map(|i| {
                let x = domain.x_min + (domain.x_max - domain.x_min) * i as f64 / sizes.ic as f64;
                LabeledPoint { x, t: domain.t_min, u: spec.initial_condition(x) }
            })
            .collect();
        let bc = (0..sizes.bc)
            .map(|j| {
                let frac = if sizes.bc > 1 { j as f64 / (sizes.bc - 1) as f64 } else { 0.0 };
                BoundaryPoint { t: domain.t_min + frac * (domain.t_max - domain.t_min) }
            })
            .collect();
        let pde = latin_hypercube(sizes.pde, &[(domain.x_min, domain.x_max), (domain.t_min, domain.t_max)], seed)
            .into_iter()
            .map(|s| Point { x: s[0], t: s[1] })
            .collect();
        Self::from_parts(domain, ic, bc, pde, Vec::new())
    }

    pub fn from_parts(
        domain: Domain,
        ic: Vec<LabeledPoint>,
        bc: Vec<BoundaryPoint>,
        pde: Vec<Point>,
        pl: Vec<PseudoLabel>,
    ) -> Self {
        let mut labeled_pde = vec![false; pde.len()];
        for p in &pl {
            labeled_pde[p.pde_index] = true;
        }
        DataBundle { domain, ic, bc, pde, pl, labeled_pde }
    }

    pub fn is_pseudo_labeled(&self, pde_index: usize) -> bool {
        self.labeled_pde[pde_index]
    }

    /// Adds a pseudo-label; returns `false` if the point already had one.
    pub fn add_pseudo_label(&mut self, pde_index: usize, u: f64) -> bool {
        if self.labeled_pde[pde_index] {
            return false;
        }
        self.labeled_pde[pde_index] = true;
        let p = self.pde[pde_index];
        self.pl.push(PseudoLabel { pde_index, point: LabeledPoint { x: p.x, t: p.t, u } });
        true
    }

    /// `D_l = D_ic ∪ D_pl` in that order.
    pub fn labeled(&self) -> Vec<LabeledPoint> {
        self.ic.iter().copied().chain(self.pl.iter().map(|p| p.point)).collect()
    }

    pub fn pl_points(&self) -> Vec<LabeledPoint> {
        self.pl.iter().map(|p| p.point).collect()
    }

    /// Active collocation and boundary subsets for radius `delta_pde`.
    pub fn active(&self, delta_pde: f64) -> ActiveSets {
        let labeled = self.labeled();
        ActiveSets {
            pde: active_subset(&self.domain, &self.pde, &labeled, delta_pde),
            bc: active_boundary(&self.domain, &self.bc, &labeled, delta_pde),
        }
    }

    /// Every point active, as used by the vanilla baseline.
    pub fn all_active(&self) -> ActiveSets {
        ActiveSets { pde: (0..self.pde.len()).collect(), bc: (0..self.bc.len()).collect() }
    }

    /// CSV with columns `role,x,t,u`; boundary rows carry `x = 0` for the
    /// pair at time `t` and no label.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "role,x,t,u")?;
        for p in &self.ic {
            writeln!(w, "ic,{:e},{:e},{:e}", p.x, p.t, p.u)?;
        }
        for b in &self.bc {
            writeln!(w, "bc,{:e},{:e},", X_MIN, b.t)?;
        }
        for p in &self.pde {
            writeln!(w, "pde,{:e},{:e},", p.x, p.t)?;
        }
        for p in &self.pl {
            writeln!(w, "pl,{:e},{:e},{:e}", p.point.x, p.point.t, p.point.u)?;
        }
        w.flush()
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, DataError> {
        let (mut ic, mut bc, mut pde, mut pl_rows) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let err = |msg: &str| DataError::Parse { line: n + 1, msg: msg.to_string() };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(err("expected 4 columns"));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| err(&format!("bad number {s:?}")));
            let (x, t) = (num(f[1])?, num(f[2])?);
            match f[0] {
                "ic" => ic.push(LabeledPoint { x, t, u: num(f[3])? }),
                "bc" => bc.push(BoundaryPoint { t }),
                "pde" => pde.push(Point { x, t }),
                "pl" => pl_rows.push((n + 1, LabeledPoint { x, t, u: num(f[3])? })),
                other => return Err(err(&format!("unknown role {other:?}"))),
            }
        }
        let mut pl = Vec::with_capacity(pl_rows.len());
        let mut seen = vec![false; pde.len()];
        for (line, p) in pl_rows {
            let idx = pde
                .iter()
                .position(|q: &Point| q.x == p.x && q.t == p.t)
                .ok_or_else(|| DataError::Parse { line, msg: "pseudo-label does not match a collocation point".into() })?;
            if std::mem::replace(&mut seen[idx], true) {
                return Err(DataError::Parse { line, msg: "duplicate pseudo-label".into() });
            }
            pl.push(PseudoLabel { pde_index: idx, point: p });
        }
        Ok(Self::from_parts(Domain::default(), ic, bc, pde, pl))
    }
}

/// Indices into `DataBundle::pde` and `DataBundle::bc` in use this iteration.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActiveSets {
    pub pde: Vec<usize>,
    pub bc: Vec<usize>,
}

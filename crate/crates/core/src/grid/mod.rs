//! Structured grids, finite-difference operators and discrete norms.
//!
//! Two domain kinds are supported: a box with homogeneous Dirichlet data
//! (only interior nodes are stored) and a periodic torus whose period is an
//! integer number of unit cells. The discrete Laplacian is the standard
//! `2N+1`-point stencil and the Dirichlet energy uses forward differences over
//! every grid edge, so that
//!
//! ```text
//! <-Δ_h f, f>_{L²_h} = Σ_edges |D f|² h^N
//! ```
//!
//! holds exactly (summation by parts). All quadratures use the rectangle rule
//! with weight `h^N`.

mod io;
pub(crate) mod spectral;

use std::sync::Arc;

use rayon::prelude::*;

use crate::accum::{self, Neumaier};
use crate::error::{Error, Result};

pub use io::{read_grid_function, write_csv, write_grid_function};

/// Boundary treatment of a [`DomainSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    /// `(0, L_1) x ... x (0, L_N)` with zero boundary values.
    Dirichlet { lengths: Vec<f64> },
    /// `R^N / (P_1 Z x ... x P_N Z)`; unit cells are `[0,1)^N`.
    Periodic { periods: Vec<usize> },
}

/// A discretized domain: kind plus number of stored nodes per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    kind: DomainKind,
    shape: Vec<usize>,
    spacing: Vec<f64>,
}

impl DomainSpec {
    /// Dirichlet box with `interior[a]` unknowns along axis `a`; the spacing is
    /// `lengths[a] / (interior[a] + 1)`.
    pub fn dirichlet(lengths: &[f64], interior: &[usize]) -> Result<Self> {
        check_dim(lengths.len(), interior.len())?;
        if lengths.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidDomain("side lengths must be positive".into()));
        }
        if interior.iter().any(|&n| n == 0) {
            return Err(Error::InvalidDomain("resolution must be positive".into()));
        }
        let spacing = lengths
            .iter()
            .zip(interior)
            .map(|(&l, &n)| l / (n as f64 + 1.0))
            .collect();
        Ok(Self {
            kind: DomainKind::Dirichlet {
                lengths: lengths.to_vec(),
            },
            shape: interior.to_vec(),
            spacing,
        })
    }

    /// Periodic torus with `periods[a]` unit cells and `points_per_cell` nodes
    /// per unit length on every axis.
    pub fn periodic(periods: &[usize], points_per_cell: usize) -> Result<Self> {
        Self::periodic_with(periods, &vec![points_per_cell; periods.len()])
    }

    pub fn periodic_with(periods: &[usize], points_per_cell: &[usize]) -> Result<Self> {
        check_dim(periods.len(), points_per_cell.len())?;
        if periods.iter().any(|&p| p == 0) {
            return Err(Error::InvalidDomain("periods must be positive".into()));
        }
        if points_per_cell.iter().any(|&m| m < 2) {
            return Err(Error::InvalidDomain(
                "periodic grids need at least 2 points per unit cell".into(),
            ));
        }
        let shape = periods
            .iter()
            .zip(points_per_cell)
            .map(|(&p, &m)| p * m)
            .collect();
        let spacing = points_per_cell.iter().map(|&m| 1.0 / m as f64).collect();
        Ok(Self {
            kind: DomainKind::Periodic {
                periods: periods.to_vec(),
            },
            shape,
            spacing,
        })
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Number of stored nodes.
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.kind, DomainKind::Periodic { .. })
    }

    /// Quadrature weight `h_1 ... h_N`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Lebesgue measure of the domain.
    pub fn volume(&self) -> f64 {
        match &self.kind {
            DomainKind::Dirichlet { lengths } => lengths.iter().product(),
            DomainKind::Periodic { periods } => periods.iter().map(|&p| p as f64).product(),
        }
    }

    /// Side lengths (periods for a torus).
    pub fn lengths(&self) -> Vec<f64> {
        match &self.kind {
            DomainKind::Dirichlet { lengths } => lengths.clone(),
            DomainKind::Periodic { periods } => periods.iter().map(|&p| p as f64).collect(),
        }
    }

    pub fn periods(&self) -> Option<&[usize]> {
        match &self.kind {
            DomainKind::Periodic { periods } => Some(periods),
            DomainKind::Dirichlet { .. } => None,
        }
    }

    /// Nodes per unit cell along `axis` (periodic domains only).
    pub fn points_per_cell(&self, axis: usize) -> Option<usize> {
        self.periods().map(|p| self.shape[axis] / p[axis])
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dim()];
        for a in (0..self.dim().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.shape[a + 1];
        }
        strides
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.shape[a];
            flat /= self.shape[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Physical coordinate of node `i` along `axis`. Dirichlet nodes sit at
    /// `(i + 1) h`, torus nodes at `i h`.
    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        match self.kind {
            DomainKind::Dirichlet { .. } => (i as f64 + 1.0) * self.spacing[axis],
            DomainKind::Periodic { .. } => i as f64 * self.spacing[axis],
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.coordinate(a, i))
            .collect()
    }

    /// Euclidean distance between two nodes, using the minimum image on a
    /// torus.
    pub fn node_distance(&self, a: &[usize], b: &[usize]) -> f64 {
        let mut d2 = 0.0;
        for axis in 0..self.dim() {
            let n = self.shape[axis] as isize;
            let mut d = a[axis] as isize - b[axis] as isize;
            if self.is_periodic() {
                d = d.rem_euclid(n);
                if d > n / 2 {
                    d -= n;
                }
            }
            let x = d as f64 * self.spacing[axis];
            d2 += x * x;
        }
        d2.sqrt()
    }

    /// Iterate over the 1D lines of the grid along `axis`: yields
    /// `(first index, stride)`.
    pub(crate) fn lines(&self, axis: usize) -> impl Iterator<Item = (usize, usize)> {
        let stride = self.strides()[axis];
        let n = self.shape[axis];
        let outer = self.len() / (n * stride);
        (0..outer).flat_map(move |o| (0..stride).map(move |i| (o * n * stride + i, stride)))
    }
}

fn check_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidDomain(
            "per-axis parameter lists differ in length".into(),
        ));
    }
    if !(1..=3).contains(&a) {
        return Err(Error::InvalidDomain(format!(
            "dimension must be 1, 2 or 3 (got {a})"
        )));
    }
    Ok(())
}

/// A scalar field sampled on the stored nodes of a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    domain: Arc<DomainSpec>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: Arc<DomainSpec>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                domain.len(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { domain, values })
    }

    /// Construction from values already known to be finite.
    pub(crate) fn from_raw(domain: Arc<DomainSpec>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        Self { domain, values }
    }

    pub fn zeros(domain: Arc<DomainSpec>) -> Self {
        let n = domain.len();
        Self::from_raw(domain, vec![0.0; n])
    }

    pub fn constant(domain: Arc<DomainSpec>, c: f64) -> Result<Self> {
        let n = domain.len();
        Self::new(domain, vec![c; n])
    }

    /// Sample `f` at the physical coordinates of every node.
    pub fn from_fn(domain: Arc<DomainSpec>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..domain.len()).map(|i| f(&domain.point(i))).collect();
        Self::new(domain, values)
    }

    pub fn domain(&self) -> &Arc<DomainSpec> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_domain(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain
    }

    pub(crate) fn check_same(&self, other: &GridFunction) -> Result<()> {
        if self.same_domain(other) {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.domain.clone(), self.values.iter().map(|&x| f(x)).collect())
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self::from_raw(
            self.domain.clone(),
            self.values.iter().map(|&x| t * x).collect(),
        )
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &GridFunction) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self::from_raw(
            self.domain.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + alpha * b)
                .collect(),
        ))
    }

    /// Discrete `L²` inner product `Σ f g h^N`.
    pub fn dot(&self, other: &GridFunction) -> Result<f64> {
        self.check_same(other)?;
        Ok(dot_l2(&self.domain, &self.values, &other.values))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }
}

pub(crate) fn dot_l2(domain: &DomainSpec, a: &[f64], b: &[f64]) -> f64 {
    accum::sum(a.iter().zip(b).map(|(x, y)| x * y)) * domain.cell_volume()
}

/// `out = -Δ_h f` on raw node values.
pub(crate) fn laplacian_into(domain: &DomainSpec, f: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    let periodic = domain.is_periodic();
    for axis in 0..domain.dim() {
        let n = domain.shape()[axis];
        let inv_h2 = 1.0 / (domain.spacing()[axis] * domain.spacing()[axis]);
        for (start, stride) in domain.lines(axis) {
            let at = |c: usize| start + c * stride;
            for c in 0..n {
                let minus = if c > 0 {
                    f[at(c - 1)]
                } else if periodic {
                    f[at(n - 1)]
                } else {
                    0.0
                };
                let plus = if c + 1 < n {
                    f[at(c + 1)]
                } else if periodic {
                    f[at(0)]
                } else {
                    0.0
                };
                let i = at(c);
                out[i] += (2.0 * f[i] - (minus + plus)) * inv_h2;
            }
        }
    }
}

/// `Σ_edges (D a)(D b) h^N` with forward differences over every edge
/// (including the two boundary edges of each Dirichlet line).
pub(crate) fn forward_diff_dot(domain: &DomainSpec, a: &[f64], b: &[f64]) -> f64 {
    let periodic = domain.is_periodic();
    let mut acc = Neumaier::new();
    for axis in 0..domain.dim() {
        let n = domain.shape()[axis];
        let inv_h2 = 1.0 / (domain.spacing()[axis] * domain.spacing()[axis]);
        for (start, stride) in domain.lines(axis) {
            let at = |c: usize| start + c * stride;
            let edges = if periodic { n } else { n + 1 };
            for e in 0..edges {
                // edge e joins nodes e-1 and e (ghosts outside 0..n for Dirichlet)
                let (left_a, left_b) = if e > 0 {
                    (a[at(e - 1)], b[at(e - 1)])
                } else if periodic {
                    (a[at(n - 1)], b[at(n - 1)])
                } else {
                    (0.0, 0.0)
                };
                let (right_a, right_b) = if e < n {
                    (a[at(e)], b[at(e)])
                } else {
                    (0.0, 0.0)
                };
                acc.add((right_a - left_a) * (right_b - left_b) * inv_h2);
            }
        }
    }
    acc.total() * domain.cell_volume()
}

/// Discrete Dirichlet energy `Σ_edges |D f|² h^N`.
pub fn gradient_energy(f: &GridFunction) -> f64 {
    forward_diff_dot(&f.domain, &f.values, &f.values)
}

/// `-Δ_h f` with the second-order stencil; ghost values are zero on
/// Dirichlet boundaries and indices wrap on a torus.
pub fn laplacian_apply(f: &GridFunction) -> GridFunction {
    let mut out = vec![0.0; f.values.len()];
    laplacian_into(&f.domain, &f.values, &mut out);
    GridFunction::from_raw(f.domain.clone(), out)
}

/// `‖f‖_V² = Σ |D f|² h^N + Σ V f² h^N`.
pub fn h_norm_sq(f: &GridFunction, potential: &GridFunction) -> Result<f64> {
    f.check_same(potential)?;
    if let Some(i) = potential.values.iter().position(|&v| v < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "potential is negative at node {i}"
        )));
    }
    Ok(weighted_norm_sq(&f.domain, &f.values, &potential.values))
}

pub(crate) fn weighted_norm_sq(domain: &DomainSpec, f: &[f64], potential: &[f64]) -> f64 {
    let mass = accum::sum(f.iter().zip(potential).map(|(x, v)| v * x * x)) * domain.cell_volume();
    forward_diff_dot(domain, f, f) + mass
}

/// `|f|_p = (Σ |f|^p h^N)^(1/p)`.
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("Lebesgue exponent {p} < 1")));
    }
    Ok(lp_norm_pow(&f.domain, &f.values, p).powf(1.0 / p))
}

/// `Σ |f|^p h^N`.
pub(crate) fn lp_norm_pow(domain: &DomainSpec, f: &[f64], p: f64) -> f64 {
    accum::sum(f.iter().map(|&x| accum::abs_pow(x, p))) * domain.cell_volume()
}

/// Integer translation `f(· - z)` on a torus; an exact permutation of the
/// node values.
pub fn shift(f: &GridFunction, z: &[i64]) -> Result<GridFunction> {
    let values = shift_values(&f.domain, &f.values, z)?;
    Ok(GridFunction::from_raw(f.domain.clone(), values))
}

pub(crate) fn shift_values(domain: &DomainSpec, f: &[f64], z: &[i64]) -> Result<Vec<f64>> {
    if !domain.is_periodic() {
        return Err(Error::NotPeriodic);
    }
    if z.len() != domain.dim() {
        return Err(Error::InvalidArgument(format!(
            "shift has {} components, domain has dimension {}",
            z.len(),
            domain.dim()
        )));
    }
    let offsets: Vec<i64> = (0..domain.dim())
        .map(|a| z[a] * domain.points_per_cell(a).unwrap_or(1) as i64)
        .collect();
    let strides = domain.strides();
    let shape = domain.shape();
    let mut out = vec![0.0; f.len()];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut src = 0usize;
        let mut rest = i;
        for a in (0..domain.dim()).rev() {
            let n = shape[a] as i64;
            let c = (rest % shape[a]) as i64;
            rest /= shape[a];
            src += ((c - offsets[a]).rem_euclid(n) as usize) * strides[a];
        }
        *slot = f[src];
    }
    Ok(out)
}

/// Result of [`local_mass_sup`].
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMass {
    pub value: f64,
    pub center: Vec<usize>,
}

/// `max_y Σ_{|x-y| ≤ r} (u² + v²) h^N` over node centers `y`, with periodic
/// distance and node-center ball membership.
///
/// Ties are broken by the density at the center itself, then by the smallest
/// flat index.
pub fn local_mass_sup(u: &GridFunction, v: &GridFunction, r: f64) -> Result<LocalMass> {
    u.check_same(v)?;
    let domain = u.domain.as_ref();
    let periods = domain.periods().ok_or(Error::NotPeriodic)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("ball radius {r} must be positive")));
    }
    let half = periods.iter().copied().min().unwrap_or(0) as f64 / 2.0;
    if r > half {
        return Err(Error::InvalidArgument(format!(
            "ball radius {r} exceeds half the torus ({half})"
        )));
    }
    let density: Vec<f64> = u
        .values
        .iter()
        .zip(&v.values)
        .map(|(a, b)| a * a + b * b)
        .collect();
    let offsets = ball_offsets(domain, r);
    let shape = domain.shape().to_vec();
    let strides = domain.strides();
    let dim = domain.dim();

    let masses: Vec<f64> = (0..domain.len())
        .into_par_iter()
        .map(|flat| {
            let center = domain.multi_index(flat);
            let mut s = 0.0;
            for off in &offsets {
                let mut idx = 0usize;
                for a in 0..dim {
                    let n = shape[a] as isize;
                    idx += ((center[a] as isize + off[a]).rem_euclid(n) as usize) * strides[a];
                }
                s += density[idx];
            }
            s
        })
        .collect();

    let mut best = 0usize;
    for i in 1..masses.len() {
        let better = masses[i] > masses[best]
            || (masses[i] == masses[best] && density[i] > density[best]);
        if better {
            best = i;
        }
    }
    Ok(LocalMass {
        value: masses[best] * domain.cell_volume(),
        center: domain.multi_index(best),
    })
}

/// Integer node offsets within physical distance `r`, in a fixed order.
fn ball_offsets(domain: &DomainSpec, r: f64) -> Vec<Vec<isize>> {
    let dim = domain.dim();
    let reach: Vec<isize> = domain
        .spacing()
        .iter()
        .map(|&h| (r / h).floor() as isize)
        .collect();
    let mut out = Vec::new();
    let mut cur = vec![0isize; dim];
    fn rec(
        axis: usize,
        cur: &mut Vec<isize>,
        reach: &[isize],
        h: &[f64],
        r2: f64,
        out: &mut Vec<Vec<isize>>,
    ) {
        if axis == cur.len() {
            let d2: f64 = cur
                .iter()
                .zip(h)
                .map(|(&o, &hh)| (o as f64 * hh).powi(2))
                .sum();
            if d2 <= r2 {
                out.push(cur.clone());
            }
            return;
        }
        for o in -reach[axis]..=reach[axis] {
            cur[axis] = o;
            rec(axis + 1, cur, reach, h, r2, out);
        }
    }
    rec(
        0,
        &mut cur,
        &reach,
        domain.spacing(),
        r * r * (1.0 + 1e-12),
        &mut out,
    );
    out
}

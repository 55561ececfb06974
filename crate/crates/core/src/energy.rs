//! Energy functional, gradient, Nehari functional and fibering projection.
//!
//! ```text
//! J(u,v) = ½(‖(u,v)‖² - 2∫λuv) - ∫F1(u) + F2(v) + (1/q)∫|u|^q + |v|^q
//! ```
//!
//! with `‖(u,v)‖² = ‖u‖_1² + ‖v‖_2²` and `‖u‖_i² = ∫|∇u|² + V_i u²`. The
//! cross term is not part of the norm, so the preconditioner is block
//! diagonal.
//!
//! Along a ray every term is a power of `t`, so the fibering map is evaluated
//! from a handful of moments of the state; the root of `φ'(t)/t` is then
//! found by safeguarded Newton with the exact derivative.

use std::fmt;

use crate::accum::{self, Neumaier};
use crate::error::{Error, Result};
use crate::grid::{self, DomainSpec, GridFunction};
use crate::model::{Nonlinearity, Problem};

/// Relative tolerance on `t` in [`fibering_project`].
pub const FIBERING_TOL: f64 = 1e-12;
/// Relative residual of the preconditioned solves.
pub const CG_TOL: f64 = 1e-10;

/// A pair `(u, v)` on a common domain.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    u: GridFunction,
    v: GridFunction,
}

impl State {
    pub fn new(u: GridFunction, v: GridFunction) -> Result<Self> {
        u.check_same(&v)?;
        Ok(Self { u, v })
    }

    pub fn zeros(domain: std::sync::Arc<DomainSpec>) -> Self {
        Self {
            u: GridFunction::zeros(domain.clone()),
            v: GridFunction::zeros(domain),
        }
    }

    pub(crate) fn from_raw(domain: &std::sync::Arc<DomainSpec>, u: Vec<f64>, v: Vec<f64>) -> Self {
        Self {
            u: GridFunction::from_raw(domain.clone(), u),
            v: GridFunction::from_raw(domain.clone(), v),
        }
    }

    pub fn u(&self) -> &GridFunction {
        &self.u
    }

    pub fn v(&self) -> &GridFunction {
        &self.v
    }

    pub fn domain(&self) -> &std::sync::Arc<DomainSpec> {
        self.u.domain()
    }

    pub fn into_parts(self) -> (GridFunction, GridFunction) {
        (self.u, self.v)
    }

    pub fn is_zero(&self) -> bool {
        self.u.values().iter().chain(self.v.values()).all(|&x| x == 0.0)
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            u: self.u.scaled(t),
            v: self.v.scaled(t),
        }
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &State) -> Result<Self> {
        Ok(Self {
            u: self.u.add_scaled(alpha, &other.u)?,
            v: self.v.add_scaled(alpha, &other.v)?,
        })
    }

    /// `(v, u)`.
    pub fn swapped(&self) -> Self {
        Self {
            u: self.v.clone(),
            v: self.u.clone(),
        }
    }

    /// Componentwise absolute value.
    pub fn abs(&self) -> Self {
        let d = self.domain();
        Self::from_raw(
            d,
            self.u.values().iter().map(|x| x.abs()).collect(),
            self.v.values().iter().map(|x| x.abs()).collect(),
        )
    }

    /// `Σ u a + v b` in `L²_h`.
    pub fn dot_l2(&self, other: &State) -> Result<f64> {
        Ok(self.u.dot(&other.u)? + self.v.dot(&other.v)?)
    }

    pub fn max_abs(&self) -> f64 {
        self.u.max_abs().max(self.v.max_abs())
    }

    /// Integer torus translation of both components.
    pub fn shifted(&self, z: &[i64]) -> Result<Self> {
        Ok(Self {
            u: grid::shift(&self.u, z)?,
            v: grid::shift(&self.v, z)?,
        })
    }
}

/// The four parts of `J` and their combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    /// `½ ‖(u,v)‖²`
    pub quad: f64,
    /// `∫ λ u v`
    pub cross: f64,
    /// `∫ F1(u) + F2(v)`
    pub fpart: f64,
    /// `(1/q) ∫ |u|^q + |v|^q`
    pub qpart: f64,
    pub total: f64,
}

impl fmt::Display for EnergyBreakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "quad = {:.17e}", self.quad)?;
        writeln!(f, "cross = {:.17e}", self.cross)?;
        writeln!(f, "fpart = {:.17e}", self.fpart)?;
        writeln!(f, "qpart = {:.17e}", self.qpart)?;
        writeln!(f, "total = {:.17e}", self.total)
    }
}

/// Result of [`fibering_project`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberingReport {
    pub t_star: f64,
    pub phi_at_t: f64,
    /// Sign-change bracket of `φ'` before refinement.
    pub bracket: (f64, f64),
    pub iterations: usize,
    /// `|φ'(t*)| / t*` relative to the sum of magnitudes of its terms.
    pub slope_residual: f64,
}

fn check_domain(problem: &Problem, s: &State) -> Result<()> {
    if **s.domain() == **problem.domain() {
        Ok(())
    } else {
        Err(Error::DomainMismatch)
    }
}

fn cross_integral(problem: &Problem, u: &[f64], v: &[f64]) -> f64 {
    let lambda = problem.spec().lambda.values();
    accum::sum(lambda.iter().zip(u).zip(v).map(|((l, a), b)| l * a * b)) * problem.domain().cell_volume()
}

fn primitive_integral(nl: &Nonlinearity, domain: &DomainSpec, u: &[f64]) -> f64 {
    accum::sum(u.iter().map(|&x| nl.primitive(x))) * domain.cell_volume()
}

/// `∫ f(u) u`.
fn work_integral(nl: &Nonlinearity, domain: &DomainSpec, u: &[f64]) -> f64 {
    accum::sum(u.iter().map(|&x| nl.value(x) * x)) * domain.cell_volume()
}

/// `‖(u,v)‖² = ‖u‖_1² + ‖v‖_2²`.
pub fn norm_sq(problem: &Problem, s: &State) -> Result<f64> {
    check_domain(problem, s)?;
    let spec = problem.spec();
    let d = problem.domain();
    Ok(grid::weighted_norm_sq(d, s.u.values(), spec.v1.values())
        + grid::weighted_norm_sq(d, s.v.values(), spec.v2.values()))
}

pub fn norm(problem: &Problem, s: &State) -> Result<f64> {
    norm_sq(problem, s).map(f64::sqrt)
}

/// `‖(u,v)‖² - 2∫λuv`, bounded below by `(1-δ)‖(u,v)‖²`.
pub fn coercive_form(problem: &Problem, s: &State) -> Result<f64> {
    let n = norm_sq(problem, s)?;
    Ok(n - 2.0 * cross_integral(problem, s.u.values(), s.v.values()))
}

pub fn energy(problem: &Problem, s: &State) -> Result<EnergyBreakdown> {
    let n = norm_sq(problem, s)?;
    let spec = problem.spec();
    let d = problem.domain();
    let (u, v) = (s.u.values(), s.v.values());
    let quad = 0.5 * n;
    let cross = cross_integral(problem, u, v);
    let fpart = primitive_integral(&spec.f1, d, u) + primitive_integral(&spec.f2, d, v);
    let q = spec.q;
    let qpart = (grid::lp_norm_pow(d, u, q) + grid::lp_norm_pow(d, v, q)) / q;
    Ok(EnergyBreakdown {
        quad,
        cross,
        fpart,
        qpart,
        total: quad - cross - fpart + qpart,
    })
}

/// `ξ(s) = J'(s)(s)`.
pub fn nehari_xi(problem: &Problem, s: &State) -> Result<f64> {
    let c = coercive_form(problem, s)?;
    let spec = problem.spec();
    let d = problem.domain();
    let (u, v) = (s.u.values(), s.v.values());
    let work = work_integral(&spec.f1, d, u) + work_integral(&spec.f2, d, v);
    let mq = grid::lp_norm_pow(d, u, spec.q) + grid::lp_norm_pow(d, v, spec.q);
    Ok(c - work + mq)
}

/// `ξ'(s)(s) = 2(‖s‖² - 2∫λuv) - ∫ f1'(u)u² + f1(u)u - ∫ f2'(v)v² + f2(v)v + q(|u|_q^q + |v|_q^q)`.
pub fn nehari_xi_slope(problem: &Problem, s: &State) -> Result<f64> {
    let c = coercive_form(problem, s)?;
    let spec = problem.spec();
    let d = problem.domain();
    let second = |nl: &Nonlinearity, w: &[f64]| {
        accum::sum(w.iter().map(|&x| nl.derivative(x) * x * x + nl.value(x) * x)) * d.cell_volume()
    };
    let (u, v) = (s.u.values(), s.v.values());
    let mq = grid::lp_norm_pow(d, u, spec.q) + grid::lp_norm_pow(d, v, spec.q);
    Ok(2.0 * c - second(&spec.f1, u) - second(&spec.f2, v) + spec.q * mq)
}

/// `out = (-Δ_h + V_i) x` for component `i ∈ {0, 1}`.
pub(crate) fn apply_block(problem: &Problem, comp: usize, x: &[f64], out: &mut [f64]) {
    grid::laplacian_into(problem.domain(), x, out);
    let pot = if comp == 0 { &problem.spec().v1 } else { &problem.spec().v2 };
    for ((o, &xi), &vi) in out.iter_mut().zip(x).zip(pot.values()) {
        *o += vi * xi;
    }
}

/// Residual fields whose `L²_h` pairing with any direction is `J'(s)`.
pub fn grad_l2(problem: &Problem, s: &State) -> Result<State> {
    check_domain(problem, s)?;
    let spec = problem.spec();
    let q = spec.q;
    let (u, v) = (s.u.values(), s.v.values());
    let lambda = spec.lambda.values();
    let mut gu = vec![0.0; u.len()];
    let mut gv = vec![0.0; v.len()];
    apply_block(problem, 0, u, &mut gu);
    apply_block(problem, 1, v, &mut gv);
    for i in 0..u.len() {
        gu[i] += -lambda[i] * v[i] - spec.f1.value(u[i]) + accum::signed_pow(u[i], q);
        gv[i] += -lambda[i] * u[i] - spec.f2.value(v[i]) + accum::signed_pow(v[i], q);
    }
    Ok(State::from_raw(problem.domain(), gu, gv))
}

/// Second derivative `J''(s)[d]` as an `L²_h` field.
pub fn hessian_apply(problem: &Problem, s: &State, d: &State) -> Result<State> {
    check_domain(problem, s)?;
    check_domain(problem, d)?;
    let spec = problem.spec();
    let q = spec.q;
    let (u, v) = (s.u.values(), s.v.values());
    let (du, dv) = (d.u.values(), d.v.values());
    let lambda = spec.lambda.values();
    let mut hu = vec![0.0; u.len()];
    let mut hv = vec![0.0; v.len()];
    apply_block(problem, 0, du, &mut hu);
    apply_block(problem, 1, dv, &mut hv);
    for i in 0..u.len() {
        let cu = -spec.f1.derivative(u[i]) + (q - 1.0) * accum::abs_pow(u[i], q - 2.0);
        let cv = -spec.f2.derivative(v[i]) + (q - 1.0) * accum::abs_pow(v[i], q - 2.0);
        hu[i] += -lambda[i] * dv[i] + cu * du[i];
        hv[i] += -lambda[i] * du[i] + cv * dv[i];
    }
    Ok(State::from_raw(problem.domain(), hu, hv))
}

/// Preconditioned conjugate gradients for `(-Δ_h + V_i) x = rhs`, with the
/// constant-coefficient fast solver as preconditioner.
pub(crate) fn solve_block(problem: &Problem, comp: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    let max_iter = (10.0 * (n as f64).sqrt()).ceil() as usize;
    let b_norm = accum::sum(rhs.iter().map(|x| x * x)).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let pre = &problem.precond[comp];
    let mut r = rhs.to_vec();
    let mut z = vec![0.0; n];
    pre.solve(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = accum::sum(r.iter().zip(&z).map(|(a, b)| a * b));
    let mut res = 1.0;
    for it in 1..=max_iter {
        apply_block(problem, comp, &p, &mut ap);
        let pap = accum::sum(p.iter().zip(&ap).map(|(a, b)| a * b));
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = accum::sum(r.iter().map(|x| x * x)).sqrt() / b_norm;
        if res <= CG_TOL {
            return Ok(x);
        }
        pre.solve(&r, &mut z);
        let rz_new = accum::sum(r.iter().zip(&z).map(|(a, b)| a * b));
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        if !res.is_finite() {
            return Err(Error::CgDivergence { iterations: it, residual: res });
        }
    }
    Err(Error::CgDivergence {
        iterations: max_iter,
        residual: res,
    })
}

/// Riesz representative of `J'(s)` in the `‖·‖` inner product: solves
/// `(-Δ_h + V_i) g_i = (grad_l2)_i` componentwise.
pub fn grad_precond(problem: &Problem, s: &State) -> Result<State> {
    let g = grad_l2(problem, s)?;
    precondition(problem, &g)
}

/// Apply the inverse of the block operator to an `L²_h` field.
pub fn precondition(problem: &Problem, g: &State) -> Result<State> {
    check_domain(problem, g)?;
    let (gu, gv) = rayon::join(
        || solve_block(problem, 0, g.u.values()),
        || solve_block(problem, 1, g.v.values()),
    );
    Ok(State::from_raw(problem.domain(), gu?, gv?))
}

/// `φ(t) = J(t s)`, evaluated on the grid.
pub fn fibering_value(problem: &Problem, s: &State, t: f64) -> Result<f64> {
    Ok(energy(problem, &s.scaled(t))?.total)
}

/// `φ'(t) = J'(t s)(s)`, evaluated on the grid.
pub fn fibering_slope(problem: &Problem, s: &State, t: f64) -> Result<f64> {
    grad_l2(problem, &s.scaled(t))?.dot_l2(s)
}

/// Rearranged slope valid for `s` on the Nehari manifold:
/// `∫ f1(u)tu - f1(tu)u + ∫ f2(v)tv - f2(tv)v + (t^(q-1) - t)∫|u|^q + |v|^q`.
pub fn fibering_slope_on_manifold(problem: &Problem, s: &State, t: f64) -> Result<f64> {
    check_domain(problem, s)?;
    let spec = problem.spec();
    let d = problem.domain();
    let part = |nl: &Nonlinearity, w: &[f64]| {
        accum::sum(w.iter().map(|&x| nl.value(x) * t * x - nl.value(t * x) * x)) * d.cell_volume()
    };
    let (u, v) = (s.u.values(), s.v.values());
    let mq = grid::lp_norm_pow(d, u, spec.q) + grid::lp_norm_pow(d, v, spec.q);
    Ok(part(&spec.f1, u) + part(&spec.f2, v) + (t.powf(spec.q - 1.0) - t) * mq)
}

/// Moments of a state that determine its whole fibering map.
#[derive(Debug, Clone)]
pub(crate) struct RayMoments {
    /// `‖s‖² - 2∫λuv`
    quad: f64,
    /// `(a_j, p_j, ∫|w|^p_j)` over the terms of both nonlinearities.
    terms: Vec<(f64, f64, f64)>,
    /// `∫|u|^q + |v|^q`
    mq: f64,
    q: f64,
}

impl RayMoments {
    pub(crate) fn new(problem: &Problem, s: &State) -> Result<Self> {
        let quad = coercive_form(problem, s)?;
        let spec = problem.spec();
        let d = problem.domain();
        let mut terms = Vec::new();
        for (nl, w) in [(&spec.f1, s.u.values()), (&spec.f2, s.v.values())] {
            for t in nl.terms() {
                terms.push((t.coefficient, t.exponent, grid::lp_norm_pow(d, w, t.exponent)));
            }
        }
        let mq = grid::lp_norm_pow(d, s.u.values(), spec.q) + grid::lp_norm_pow(d, s.v.values(), spec.q);
        Ok(Self {
            quad,
            terms,
            mq,
            q: spec.q,
        })
    }

    pub(crate) fn phi(&self, t: f64) -> f64 {
        let f: f64 = self.terms.iter().map(|&(a, p, m)| a / p * t.powf(p) * m).sum();
        0.5 * t * t * self.quad - f + t.powf(self.q) / self.q * self.mq
    }

    /// `φ'(t) / t`.
    pub(crate) fn g(&self, t: f64) -> f64 {
        let f: f64 = self.terms.iter().map(|&(a, p, m)| a * t.powf(p - 2.0) * m).sum();
        self.quad - f + t.powf(self.q - 2.0) * self.mq
    }

    fn dg(&self, t: f64) -> f64 {
        let f: f64 = self.terms.iter().map(|&(a, p, m)| a * (p - 2.0) * t.powf(p - 3.0) * m).sum();
        -f + (self.q - 2.0) * t.powf(self.q - 3.0) * self.mq
    }

    fn g_scale(&self, t: f64) -> f64 {
        let f: f64 = self.terms.iter().map(|&(a, p, m)| a * t.powf(p - 2.0) * m).sum();
        self.quad.abs() + f + t.powf(self.q - 2.0) * self.mq
    }

    /// Unique positive root of `g`.
    pub(crate) fn root(&self) -> Result<FiberingReport> {
        let (mut lo, mut hi) = (0.5, 2.0);
        let mut steps = 0;
        while self.g(lo) <= 0.0 {
            lo *= 0.5;
            steps += 1;
            if steps > 60 {
                return Err(Error::FiberingBracket);
            }
        }
        steps = 0;
        while !(self.g(hi) < 0.0) {
            hi *= 2.0;
            steps += 1;
            if steps > 60 {
                return Err(Error::FiberingBracket);
            }
        }
        let bracket = (lo, hi);
        let mut t = if lo < 1.0 && 1.0 < hi { 1.0 } else { (lo * hi).sqrt() };
        let mut iterations = 0;
        for it in 1..=200 {
            iterations = it;
            let gt = self.g(t);
            if gt > 0.0 {
                lo = t;
            } else if gt < 0.0 {
                hi = t;
            } else {
                break;
            }
            let mut next = t - gt / self.dg(t);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - t).abs();
            t = next;
            if step <= FIBERING_TOL * t {
                break;
            }
        }
        let phi_at_t = self.phi(t);
        let bracket_max = self.phi(bracket.0).max(self.phi(bracket.1));
        if !(phi_at_t > bracket_max) {
            return Err(Error::FiberingNotMaximum {
                value: phi_at_t,
                bracket_max,
            });
        }
        Ok(FiberingReport {
            t_star: t,
            phi_at_t,
            bracket,
            iterations,
            slope_residual: self.g(t).abs() / self.g_scale(t),
        })
    }
}

/// Scale `s` onto the Nehari manifold at the unique maximizer of its
/// fibering map.
pub fn fibering_project(problem: &Problem, s: &State) -> Result<(FiberingReport, State)> {
    check_domain(problem, s)?;
    if s.is_zero() {
        return Err(Error::ZeroState);
    }
    let report = RayMoments::new(problem, s)?.root()?;
    Ok((report, s.scaled(report.t_star)))
}

/// `|y|^p - |x|^p` without cancellation when `|x| ≈ |y|`.
fn pow_diff(x: f64, y: f64, p: f64) -> f64 {
    let (ax, ay) = (x.abs(), y.abs());
    if ax == 0.0 || ay == 0.0 {
        return accum::abs_pow(y, p) - accum::abs_pow(x, p);
    }
    accum::abs_pow(x, p) * (p * ((ay - ax) / ax).ln_1p()).exp_m1()
}

/// `J(to) - J(from)`, assembled from differences so that tiny decrements
/// are resolved far below the rounding level of `J` itself.
pub fn energy_change(problem: &Problem, from: &State, to: &State) -> Result<f64> {
    check_domain(problem, from)?;
    check_domain(problem, to)?;
    let spec = problem.spec();
    let d = problem.domain();
    let h = d.cell_volume();
    let mut quad = 0.0;
    for (a, b, pot) in [
        (from.u.values(), to.u.values(), spec.v1.values()),
        (from.v.values(), to.v.values(), spec.v2.values()),
    ] {
        let delta: Vec<f64> = b.iter().zip(a).map(|(y, x)| y - x).collect();
        let sum: Vec<f64> = b.iter().zip(a).map(|(y, x)| y + x).collect();
        let mass = accum::sum(delta.iter().zip(&sum).zip(pot).map(|((dd, ss), vv)| vv * dd * ss)) * h;
        quad += 0.5 * (grid::forward_diff_dot(d, &delta, &sum) + mass);
    }
    let lambda = spec.lambda.values();
    let (ua, va, ub, vb) = (from.u.values(), from.v.values(), to.u.values(), to.v.values());
    let cross = accum::sum((0..ua.len()).map(|i| lambda[i] * ((ub[i] - ua[i]) * vb[i] + ua[i] * (vb[i] - va[i])))) * h;

    let mut acc = Neumaier::new();
    for (nl, a, b) in [(&spec.f1, ua, ub), (&spec.f2, va, vb)] {
        for t in nl.terms() {
            let c = t.coefficient / t.exponent;
            for (x, y) in a.iter().zip(b) {
                acc.add(-c * pow_diff(*x, *y, t.exponent));
            }
        }
        for (x, y) in a.iter().zip(b) {
            acc.add(pow_diff(*x, *y, spec.q) / spec.q);
        }
    }
    Ok(quad - cross + acc.total() * h)
}

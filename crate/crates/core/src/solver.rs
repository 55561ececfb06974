//! Ground states by projected descent on the Nehari manifold.
//!
//! Each iteration takes a step along the preconditioned gradient and maps the
//! trial point back to the manifold by the fibering projection, with Armijo
//! backtracking on the energy. Stopping uses the full (not the tangential)
//! gradient: on the manifold the two vanish together.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::energy::{self, State};
use crate::error::{Error, Result, StallDiagnostics};
use crate::grid::{self, DomainSpec, GridFunction};
use crate::model::Problem;
use crate::multiplicity::newton_direction;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub max_iters: usize,
    /// Stop when `‖grad_l2‖_{L²} / ‖s‖ ≤ grad_tol`.
    pub grad_tol: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub starts: usize,
    pub seed: u64,
    /// Recenter every this many iterations on a torus (0 disables).
    pub recenter_every: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_iters: 3000,
            grad_tol: 1e-9,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            starts: 5,
            seed: 0,
            recenter_every: 50,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidArgument("grad_tol must be positive".into()));
        }
        if self.starts == 0 {
            return Err(Error::InvalidArgument("at least one start is required".into()));
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return Err(Error::InvalidArgument("armijo c1 must lie in (0,1)".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidArgument("backtrack factor must lie in (0,1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub energy: f64,
    /// `‖grad_l2‖_{L²} / ‖s‖` at the returned state.
    pub grad_residual: f64,
    /// `|ξ|` at the returned state.
    pub xi_residual: f64,
    pub iterations: usize,
    pub start_index: usize,
    pub norm: f64,
    /// Smallest `‖·‖` of any manifold iterate.
    pub rho_estimate: f64,
    /// Energies of the accepted iterates: the initial projected energy
    /// followed by accumulated decrements.
    pub energy_history: Vec<f64>,
    /// `J(s_{k+1}) - J(s_k)` for every accepted step, from
    /// [`energy::energy_change`].
    pub decrements: Vec<f64>,
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "energy = {:.17e}", self.energy)?;
        writeln!(f, "grad_residual = {:.17e}", self.grad_residual)?;
        writeln!(f, "xi_residual = {:.17e}", self.xi_residual)?;
        writeln!(f, "iterations = {}", self.iterations)?;
        writeln!(f, "start_index = {}", self.start_index)?;
        writeln!(f, "norm = {:.17e}", self.norm)?;
        writeln!(f, "rho_estimate = {:.17e}", self.rho_estimate)
    }
}

pub(crate) fn residual(problem: &Problem, s: &State) -> Result<(f64, f64)> {
    let g = energy::grad_l2(problem, s)?;
    let n = energy::norm(problem, s)?;
    Ok((g.dot_l2(&g)?.sqrt() / n, n))
}

fn finish(problem: &Problem, s: &State, history: Vec<f64>, decrements: Vec<f64>, iterations: usize, start_index: usize, rho: f64) -> Result<SolveReport> {
    let (grad_residual, norm) = residual(problem, s)?;
    Ok(SolveReport {
        energy: energy::energy(problem, s)?.total,
        grad_residual,
        xi_residual: energy::nehari_xi(problem, s)?.abs(),
        iterations,
        start_index,
        norm,
        rho_estimate: rho.min(norm),
        energy_history: history,
        decrements,
    })
}

/// Once the residual is below this level and a window of iterations has
/// failed to halve it, the search direction switches from the
/// preconditioned gradient to the Newton direction. This happens on soft
/// modes, typically a weakly pinned translation on a torus with modulated
/// coefficients, where gradient steps crawl.
const NEWTON_BELOW: f64 = 1e-3;
const STALL_WINDOW: usize = 100;
const NEWTON_RTOL: f64 = 1e-8;
const NEWTON_MAX_KRYLOV: usize = 500;

/// Armijo search along the projected Newton direction, reversed when it is
/// an ascent direction. `None` when no step is accepted; the caller then
/// falls back to the gradient step.
fn newton_step(problem: &Problem, config: &SolveConfig, s: &State, g: &State) -> Result<Option<(State, f64)>> {
    let mut p = newton_direction(problem, s, g, NEWTON_RTOL, NEWTON_MAX_KRYLOV)?;
    let mut slope = -g.dot_l2(&p)?;
    if slope < 0.0 {
        // Negative curvature along the soft mode: Newton heads for the
        // nearby saddle, so move the other way.
        p = p.scaled(-1.0);
        slope = -slope;
    }
    if !(slope > 0.0) {
        return Ok(None);
    }
    let mut alpha = 1.0;
    for _ in 0..=config.max_backtracks {
        let raw = s.add_scaled(alpha, &p)?;
        if !raw.is_zero() {
            if let Ok((_, trial)) = energy::fibering_project(problem, &raw) {
                let de = energy::energy_change(problem, s, &trial)?;
                if de < 0.0 && de <= -config.armijo_c1 * alpha * slope {
                    return Ok(Some((trial, de)));
                }
            }
        }
        alpha *= config.backtrack;
    }
    Ok(None)
}

/// Armijo-projected preconditioned descent from `init`.
pub fn minimize_on_nehari(problem: &Problem, config: &SolveConfig, init: &State) -> Result<(SolveReport, State)> {
    minimize_from(problem, config, init, 0)
}

fn minimize_from(problem: &Problem, config: &SolveConfig, init: &State, start_index: usize) -> Result<(SolveReport, State)> {
    config.validate()?;
    let (_, mut s) = energy::fibering_project(problem, init)?;
    let periodic = problem.domain().is_periodic();
    let mut e = energy::energy(problem, &s)?.total;
    let mut history = vec![e];
    let mut decrements = Vec::new();
    let mut rho = f64::INFINITY;
    let mut checkpoint = f64::INFINITY;
    let mut newton = false;
    let stall = |iterations: usize, energy: f64, grad_residual: f64, reason: &str| {
        Error::Stalled(StallDiagnostics {
            start_index,
            iterations,
            energy,
            grad_residual,
            reason: reason.to_string(),
        })
    };
    for iter in 0..=config.max_iters {
        if periodic && config.recenter_every > 0 && iter > 0 && iter % config.recenter_every == 0 {
            s = recenter(&s)?.0;
        }
        let g = energy::grad_l2(problem, &s)?;
        let n = energy::norm(problem, &s)?;
        rho = rho.min(n);
        let res = g.dot_l2(&g)?.sqrt() / n;
        if res <= config.grad_tol {
            let report = finish(problem, &s, history, decrements, iter, start_index, rho)?;
            return Ok((report, s));
        }
        if iter == config.max_iters {
            return Err(stall(iter, e, res, "iteration limit reached"));
        }
        if !newton && iter > 0 && iter % STALL_WINDOW == 0 {
            newton = res <= NEWTON_BELOW && res > 0.5 * checkpoint;
            checkpoint = res;
        }
        if newton {
            if let Some((trial, de)) = newton_step(problem, config, &s, &g)? {
                s = trial;
                e += de;
                history.push(e);
                decrements.push(de);
                continue;
            }
        }
        let d = energy::precondition(problem, &g)?;
        let slope = g.dot_l2(&d)?;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            let trial = s.add_scaled(-alpha, &d)?;
            if !trial.is_zero() {
                let (_, trial) = energy::fibering_project(problem, &trial)?;
                let de = energy::energy_change(problem, &s, &trial)?;
                if de <= -config.armijo_c1 * alpha * slope && de < 0.0 {
                    accepted = Some((trial, de));
                    break;
                }
            }
            alpha *= config.backtrack;
        }
        match accepted {
            Some((trial, de)) => {
                s = trial;
                e += de;
                history.push(e);
                decrements.push(de);
            }
            None => return Err(stall(iter, e, res, "line search failed")),
        }
    }
    unreachable!("loop returns at max_iters")
}

/// Initial states: Gaussian bumps of width `diameter/8` and amplitude 1 at
/// seeded random centers, plus (when `starts ≥ 2`) one smoothed random
/// field with free signs.
pub fn initial_states(problem: &Problem, config: &SolveConfig) -> Result<Vec<State>> {
    let domain = problem.domain().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lengths = domain.lengths();
    let diameter = lengths.iter().map(|l| l * l).sum::<f64>().sqrt();
    let width = diameter / 8.0;
    let bumps = if config.starts >= 2 { config.starts - 1 } else { 1 };
    let mut out = Vec::with_capacity(config.starts);
    let mut center = || -> Vec<f64> {
        lengths
            .iter()
            .map(|&l| {
                if domain.is_periodic() {
                    rng.gen_range(0.0..l)
                } else {
                    rng.gen_range(0.25 * l..0.75 * l)
                }
            })
            .collect()
    };
    // independent centers per component: identical components would stay in
    // the invariant subspace u = v of a swap-symmetric problem
    let centers: Vec<(Vec<f64>, Vec<f64>)> = (0..bumps).map(|_| (center(), center())).collect();
    for (cu, cv) in &centers {
        out.push(State::new(gaussian(&domain, cu, width)?, gaussian(&domain, cv, width)?)?);
    }
    if config.starts >= 2 {
        let raw: Vec<f64> = (0..2 * domain.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (ru, rv) = raw.split_at(domain.len());
        let r = State::from_raw(&domain, ru.to_vec(), rv.to_vec());
        let smooth = energy::precondition(problem, &energy::precondition(problem, &r)?)?;
        let amp = smooth.max_abs();
        out.push(smooth.scaled(1.0 / amp));
    }
    Ok(out)
}

fn gaussian(domain: &Arc<DomainSpec>, center: &[f64], width: f64) -> Result<GridFunction> {
    let lengths = domain.lengths();
    let periodic = domain.is_periodic();
    GridFunction::from_fn(domain.clone(), |x| {
        let mut r2 = 0.0;
        for a in 0..x.len() {
            let mut d = x[a] - center[a];
            if periodic {
                d -= lengths[a] * (d / lengths[a]).round();
            }
            r2 += d * d;
        }
        (-r2 / (2.0 * width * width)).exp()
    })
}

/// Outcome of one start of [`find_ground_state`].
pub type StartOutcome = Result<(SolveReport, State)>;

/// Run every start (concurrently) and return the outcomes in start order.
pub fn run_starts(problem: &Problem, config: &SolveConfig) -> Result<Vec<StartOutcome>> {
    config.validate()?;
    let mut inits = initial_states(problem, config)?;
    if !problem.domain().is_periodic() {
        inits = inits.iter().map(State::abs).collect();
    }
    Ok(inits
        .par_iter()
        .enumerate()
        .map(|(i, init)| minimize_from(problem, config, init, i))
        .collect())
}

/// Minimum-energy result over all starts (ties broken by start index).
pub fn best_of(outcomes: Vec<StartOutcome>) -> Result<(SolveReport, State)> {
    let mut best: Option<(SolveReport, State)> = None;
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok((r, s)) => {
                if best.as_ref().map_or(true, |(b, _)| r.energy < b.energy) {
                    best = Some((r, s));
                }
            }
            Err(Error::Stalled(d)) => failures.push(d),
            Err(e) => return Err(e),
        }
    }
    best.ok_or(Error::AllStartsFailed(failures))
}

pub fn find_ground_state(problem: &Problem, config: &SolveConfig) -> Result<(SolveReport, State)> {
    best_of(run_starts(problem, config)?)
}

/// Radius of the balls used to detect non-vanishing mass: `1 + √N`, capped
/// at half the shortest period.
pub fn recenter_radius(domain: &DomainSpec) -> f64 {
    let r = 1.0 + (domain.dim() as f64).sqrt();
    let half = domain
        .periods()
        .map(|p| p.iter().copied().min().unwrap_or(0) as f64 / 2.0)
        .unwrap_or(r);
    r.min(half)
}

/// Translate by whole unit cells so that the mass center found by
/// [`grid::local_mass_sup`] lands as close as possible to the torus middle.
/// Returns the shifted state and the applied shift, normalized to
/// `(-P/2, P/2]` per axis.
pub fn recenter(s: &State) -> Result<(State, Vec<i64>)> {
    let domain = s.domain().clone();
    let periods = domain.periods().ok_or(Error::NotPeriodic)?.to_vec();
    let m = grid::local_mass_sup(s.u(), s.v(), recenter_radius(&domain))?;
    let z: Vec<i64> = (0..domain.dim())
        .map(|a| {
            let cells = domain.points_per_cell(a).expect("periodic") as f64;
            let n = domain.shape()[a] as f64;
            let raw = ((n / 2.0 - m.center[a] as f64) / cells + 0.5).floor() as i64;
            let p = periods[a] as i64;
            let mut w = raw.rem_euclid(p);
            if w > p / 2 {
                w -= p;
            }
            w
        })
        .collect();
    Ok((s.shifted(&z)?, z))
}

/// `m(w) = t_w w`: the sphere-to-manifold map.
pub fn m_map(problem: &Problem, w: &State) -> Result<State> {
    Ok(energy::fibering_project(problem, w)?.1)
}

/// `m⁻¹(s) = s / ‖s‖` for `s` on the manifold.
pub fn m_inverse(problem: &Problem, s: &State) -> Result<State> {
    if s.is_zero() {
        return Err(Error::ZeroState);
    }
    let n2 = energy::norm_sq(problem, s)?;
    let xi = energy::nehari_xi(problem, s)?;
    if xi.abs() > 1e-8 * n2 {
        return Err(Error::InvalidArgument(format!(
            "state is off the Nehari manifold (|xi| = {:.3e}, norm^2 = {:.3e})",
            xi.abs(),
            n2
        )));
    }
    let w = s.scaled(1.0 / n2.sqrt());
    // one correction so the output norm is 1 to rounding
    let c = energy::norm(problem, &w)?;
    Ok(w.scaled(1.0 / c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub c: f64,
    pub alpha: f64,
    pub r_squared: f64,
    /// Amplitude window relative to the maximum.
    pub window: (f64, f64),
    pub samples: usize,
}

impl fmt::Display for DecayFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "C = {:.17e}", self.c)?;
        writeln!(f, "alpha = {:.17e}", self.alpha)?;
        writeln!(f, "r_squared = {:.17e}", self.r_squared)?;
        writeln!(f, "window = {:e},{:e}", self.window.0, self.window.1)?;
        writeln!(f, "samples = {}", self.samples)
    }
}

pub const DECAY_WINDOW: (f64, f64) = (1e-12, 1e-3);
pub const DECAY_MIN_SAMPLES: usize = 30;

/// Least-squares fit of `log(|u| + |v|)` against the periodic distance from
/// the node of maximal amplitude.
///
/// Nodes whose amplitude lies in [`DECAY_WINDOW`] times the maximum are
/// grouped into annuli of width `h` around that node; each annulus
/// contributes one sample (mean distance, mean log-amplitude). At least
/// [`DECAY_MIN_SAMPLES`] annuli are required.
pub fn decay_fit(s: &State) -> Result<DecayFit> {
    let domain = s.domain().clone();
    if !domain.is_periodic() {
        return Err(Error::NotPeriodic);
    }
    let amp: Vec<f64> = s.u().values().iter().zip(s.v().values()).map(|(a, b)| a.abs() + b.abs()).collect();
    let (imax, max) = amp
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, a)| if a > acc.1 { (i, a) } else { acc });
    let center = domain.multi_index(imax);
    let (lo, hi) = (DECAY_WINDOW.0 * max, DECAY_WINDOW.1 * max);
    let width = domain.spacing().iter().copied().fold(0.0, f64::max);
    let mut bins: std::collections::BTreeMap<usize, (crate::accum::Neumaier, crate::accum::Neumaier, usize)> =
        Default::default();
    for (i, &a) in amp.iter().enumerate() {
        if a >= lo && a <= hi && a > 0.0 {
            let r = domain.node_distance(&domain.multi_index(i), &center);
            let e = bins.entry((r / width).floor() as usize).or_default();
            e.0.add(r);
            e.1.add(a.ln());
            e.2 += 1;
        }
    }
    if bins.len() < DECAY_MIN_SAMPLES {
        return Err(Error::Diagnostic(format!(
            "insufficient decay window: {} admissible annuli (need {DECAY_MIN_SAMPLES})",
            bins.len()
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = bins
        .values()
        .map(|(r, l, n)| (r.total() / *n as f64, l.total() / *n as f64))
        .unzip();
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    Ok(DecayFit {
        c: intercept.exp(),
        alpha: -slope,
        r_squared: r2,
        window: DECAY_WINDOW,
        samples: xs.len(),
    })
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    use crate::accum::sum;
    let n = x.len() as f64;
    let mx = sum(x.iter().copied()) / n;
    let my = sum(y.iter().copied()) / n;
    let sxy = sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = sum(y.iter().map(|b| (b - my) * (b - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::tests::{line_problem, random_state};
    use crate::model::{Nonlinearity, ProblemSpec};
    use approx::assert_relative_eq;

    fn torus_problem(period: usize, m: usize) -> Problem {
        let d = Arc::new(DomainSpec::periodic(&[period, period], m).unwrap());
        Problem::new(ProblemSpec {
            q: 3.0,
            f1: Nonlinearity::single(1.0, 4.0),
            f2: Nonlinearity::single(1.0, 4.0),
            v1: GridFunction::constant(d.clone(), 1.0).unwrap(),
            v2: GridFunction::constant(d.clone(), 1.0).unwrap(),
            lambda: GridFunction::constant(d.clone(), 0.3).unwrap(),
            delta: 0.5,
            domain: d,
        })
        .unwrap()
    }

    #[test]
    fn descent_is_monotone_and_converges() {
        let p = line_problem(128, 0.3);
        let cfg = SolveConfig::default();
        let init = random_state(&p, 4).abs();
        let (r, s) = minimize_on_nehari(&p, &cfg, &init).unwrap();
        assert!(r.grad_residual <= cfg.grad_tol);
        assert!(r.decrements.iter().all(|&d| d < 0.0));
        assert!(r.energy_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.xi_residual <= 1e-10 * r.norm * r.norm);
        let delta = p.delta();
        assert!(r.energy >= (0.5 - 1.0 / 3.0) * (1.0 - delta) * r.norm * r.norm);
        // restarting from the converged state takes no steps
        let (r2, _) = minimize_on_nehari(&p, &cfg, &s).unwrap();
        assert_eq!(r2.iterations, 0);
        assert!(r2.grad_residual <= cfg.grad_tol);
    }

    #[test]
    fn modulated_torus_converges_along_the_soft_mode() {
        // Coefficients of unit period pin the bump only weakly; gradient
        // steps alone crawl along the translation.
        let tau = 2.0 * std::f64::consts::PI;
        let base = torus_problem(6, 8);
        let d = base.domain().clone();
        let mut spec = base.spec().clone();
        spec.v1 = GridFunction::from_fn(d.clone(), |x| 1.0 + 0.25 * (tau * x[0]).cos()).unwrap();
        spec.lambda = GridFunction::from_fn(d, |x| 0.3 + 0.1 * (tau * (x[0] + x[1])).sin()).unwrap();
        let p = Problem::new(spec).unwrap();
        let cfg = SolveConfig { starts: 3, ..Default::default() };
        let runs: Vec<SolveReport> = run_starts(&p, &cfg).unwrap().into_iter().map(|o| o.unwrap().0).collect();
        for r in &runs {
            assert!(r.grad_residual <= cfg.grad_tol);
            assert!(r.decrements.iter().all(|&d| d < 0.0));
            assert_relative_eq!(r.energy, runs[0].energy, max_relative = 1e-9);
        }
    }

    #[test]
    fn decoupled_minimum_beats_the_sine_ray() {
        let p = line_problem(256, 0.0);
        let d = p.domain().clone();
        let u = GridFunction::from_fn(d.clone(), |x| (std::f64::consts::PI * x[0]).sin()).unwrap();
        let s = State::new(u, GridFunction::zeros(d)).unwrap();
        let ray = energy::fibering_project(&p, &s).unwrap().0.phi_at_t;
        let (r, out) = minimize_on_nehari(&p, &SolveConfig::default(), &s).unwrap();
        assert!(r.energy < ray);
        assert!(out.v().max_abs() == 0.0);
    }

    #[test]
    fn ground_state_is_deterministic_and_nonnegative() {
        let p = line_problem(96, 0.3);
        let cfg = SolveConfig { starts: 3, seed: 7, ..Default::default() };
        let (a, sa) = find_ground_state(&p, &cfg).unwrap();
        let (b, sb) = find_ground_state(&p, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        let amp = sa.max_abs();
        assert!(sa.u().min() >= -1e-10 * amp && sa.v().min() >= -1e-10 * amp);
    }

    #[test]
    fn recenter_of_centered_and_shifted_bumps() {
        let d = Arc::new(DomainSpec::periodic(&[8, 8], 4).unwrap());
        let bump = gaussian(&d, &[4.0, 4.0], 0.7).unwrap();
        let s = State::new(bump.clone(), bump.scaled(0.5)).unwrap();
        let (c, z) = recenter(&s).unwrap();
        assert_eq!(z, vec![0, 0]);
        assert_eq!(c, s);
        let moved = s.shifted(&[2, -3]).unwrap();
        let (back, z) = recenter(&moved).unwrap();
        assert_eq!(z, vec![-2, 3]);
        assert_eq!(back, s);
        assert!(matches!(recenter(&random_state(&line_problem(8, 0.0), 0)), Err(Error::NotPeriodic)));
    }

    #[test]
    fn recentering_preserves_energy() {
        let p = torus_problem(6, 4);
        let d = p.domain().clone();
        let bump = gaussian(&d, &[1.2, 4.7], 0.8).unwrap();
        let s = State::new(bump.clone(), bump.scaled(0.7)).unwrap();
        let (c, _) = recenter(&s).unwrap();
        let e0 = energy::energy(&p, &s).unwrap().total;
        let e1 = energy::energy(&p, &c).unwrap().total;
        assert!((e0 - e1).abs() <= 1e-12 * e0.abs());
    }

    #[test]
    fn sphere_and_manifold_maps_are_inverse() {
        let p = line_problem(64, 0.3);
        for seed in 0..5 {
            let s = random_state(&p, seed);
            let w = s.scaled(1.0 / energy::norm(&p, &s).unwrap());
            let back = m_inverse(&p, &m_map(&p, &w).unwrap()).unwrap();
            let diff = back.add_scaled(-1.0, &w).unwrap();
            assert!(energy::norm(&p, &diff).unwrap() <= 1e-10);
            assert_relative_eq!(energy::norm(&p, &back).unwrap(), 1.0, max_relative = 1e-15);
        }
        assert!(m_inverse(&p, &random_state(&p, 1)).is_err());
    }

    #[test]
    fn synthetic_exponential_decay() {
        let d = Arc::new(DomainSpec::periodic(&[24, 24], 4).unwrap());
        for &rate in &[1.0, 2.0] {
            let u = GridFunction::new(
                d.clone(),
                (0..d.len())
                    .map(|i| (-rate * d.node_distance(&d.multi_index(i), &[48, 48])).exp())
                    .collect(),
            )
            .unwrap();
            let s = State::new(u, GridFunction::zeros(d.clone())).unwrap();
            let fit = decay_fit(&s).unwrap();
            assert!((fit.alpha - rate).abs() <= 0.02 * rate);
            assert!(fit.r_squared >= 0.999);
        }
    }

    #[test]
    fn decay_window_needs_enough_nodes() {
        let d = Arc::new(DomainSpec::periodic(&[2, 2], 2).unwrap());
        let s = State::new(GridFunction::constant(d.clone(), 1.0).unwrap(), GridFunction::zeros(d)).unwrap();
        assert!(matches!(decay_fit(&s), Err(Error::Diagnostic(_))));
    }
}

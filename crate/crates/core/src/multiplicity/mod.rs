//! Several geometrically distinct solutions, and fountain diagnostics.
//!
//! Two solutions are identified when one is an integer translate of the
//! other, possibly with both signs flipped. New solutions are sought by
//! descent on the deflated energy
//!
//! ```text
//! J(s) · Π_k Π_{g} (1 + σ / ‖s - g s_k‖²)
//! ```
//!
//! where `g` runs over the sign pair (and, for swap-symmetric problems, the
//! component swap) applied to the nearest translate of each known `s_k`.
//! Deflated minima are only near critical points, so each candidate is
//! polished by Newton's method on the undeflated energy.

mod eigen;
mod fountain;
mod newton;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::energy::{self, State};
use crate::error::{Error, Result};
use crate::model::Problem;
use crate::solver::{self, SolveConfig, SolveReport};

pub use eigen::{eigenbasis, BlockMode, MAX_BLOCK};
pub use fountain::{c_tilde, fountain_diagnostics, FountainReport, ASCENT_RESTARTS, RHO_DIRECTIONS, TAIL_BUFFER};
pub use newton::{newton_polish, PolishResult};
pub(crate) use newton::newton_direction;

/// Relative distance below which two solutions are the same orbit.
pub const DISTINCT_REL: f64 = 1e-4;
/// Relative energy gap required between distinct critical levels.
pub const LEVEL_GAP_REL: f64 = 1e-6;

fn all_shifts(periods: &[usize]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for &p in periods {
        out = out
            .into_iter()
            .flat_map(|z| {
                (0..p as i64).map(move |k| {
                    let mut z = z.clone();
                    z.push(k);
                    z
                })
            })
            .collect();
    }
    out
}

fn diff_norm(problem: &Problem, a: &State, b: &State, sign: f64) -> Result<f64> {
    energy::norm(problem, &a.add_scaled(-sign, b)?)
}

/// `(distance, shift, sign)` of the nearest element of the orbit of `s2`.
fn nearest_in_orbit(problem: &Problem, s1: &State, s2: &State) -> Result<(f64, Vec<i64>, f64)> {
    if !s1.u().same_domain(s2.u()) {
        return Err(Error::DomainMismatch);
    }
    let shifts = match s1.domain().periods() {
        Some(periods) => all_shifts(periods),
        None => vec![Vec::new()],
    };
    let candidates = shifts
        .par_iter()
        .map(|z| -> Result<(f64, Vec<i64>, f64)> {
            let t = if z.is_empty() { s2.clone() } else { s2.shifted(z)? };
            let minus = diff_norm(problem, s1, &t, 1.0)?;
            let plus = diff_norm(problem, s1, &t, -1.0)?;
            Ok(if plus < minus { (plus, z.clone(), -1.0) } else { (minus, z.clone(), 1.0) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(candidates
        .into_iter()
        .fold((f64::INFINITY, Vec::new(), 1.0), |acc, c| if c.0 < acc.0 { c } else { acc }))
}

/// `min_z min_± ‖s1 - (±τ_z s2)‖` over all integer torus shifts (only the
/// sign quotient on a bounded domain).
pub fn orbit_distance(problem: &Problem, s1: &State, s2: &State) -> Result<f64> {
    Ok(nearest_in_orbit(problem, s1, s2)?.0)
}

/// Distinct solutions sorted by energy, with pairwise orbit distances.
#[derive(Debug, Clone, Default)]
pub struct SolutionSet {
    pub entries: Vec<(State, SolveReport)>,
    pub pairwise_distances: Vec<Vec<f64>>,
}

impl SolutionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert keeping energy order and recompute the distance matrix.
    pub fn insert(&mut self, problem: &Problem, state: State, report: SolveReport) -> Result<()> {
        let pos = self.entries.partition_point(|(_, r)| r.energy <= report.energy);
        self.entries.insert(pos, (state, report));
        let n = self.entries.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let x = orbit_distance(problem, &self.entries[i].0, &self.entries[j].0)?;
                d[i][j] = x;
                d[j][i] = x;
            }
        }
        self.pairwise_distances = d;
        Ok(())
    }

    /// Energies strictly increasing with relative gap, and all pairwise
    /// distances above the distinctness threshold.
    pub fn is_consistent(&self) -> bool {
        let gaps = self.entries.windows(2).all(|w| {
            let (a, b) = (w[0].1.energy, w[1].1.energy);
            b - a > LEVEL_GAP_REL * a.abs()
        });
        let n = self.entries.len();
        let dist = (0..n).all(|i| {
            (i + 1..n).all(|j| {
                let scale = self.entries[i].1.norm.max(self.entries[j].1.norm);
                self.pairwise_distances[i][j] > DISTINCT_REL * scale
            })
        });
        gaps && dist
    }

    /// Structured-text index; `files[i]` names the stored files of entry `i`.
    pub fn manifest(&self, files: &[(String, String)]) -> String {
        let mut out = format!("solutions = {}\n", self.entries.len());
        for (i, (_, r)) in self.entries.iter().enumerate() {
            out.push_str(&format!("\n[solution.{i}]\n"));
            if let Some((u, v)) = files.get(i) {
                out.push_str(&format!("u_file = {u}\nv_file = {v}\n"));
            }
            out.push_str(&format!(
                "energy = {:.17e}\ngrad_residual = {:.17e}\nxi_residual = {:.17e}\nnorm = {:.17e}\nattempt = {}\n",
                r.energy, r.grad_residual, r.xi_residual, r.norm, r.start_index
            ));
        }
        out.push_str("\n[distances]\n");
        for (i, row) in self.pairwise_distances.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
            out.push_str(&format!("row.{i} = {}\n", cells.join(",")));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeflationConfig {
    /// Shift `σ` of the deflation factors, in energy-norm² units.
    pub sigma: f64,
    /// Iterations of deflated descent before polishing.
    pub stage_iters: usize,
    /// Relative gradient tolerance ending the deflated stage early.
    pub stage_tol: f64,
    pub newton_iters: usize,
}

impl Default for DeflationConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            stage_iters: 40,
            stage_tol: 1e-5,
            newton_iters: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub enum SearchOutcome {
    Found { report: SolveReport, state: State },
    /// The polished point is a known orbit, the trivial state, an already
    /// occupied energy level, or the polish failed to converge.
    Collapsed { state: State, reason: String },
}

/// Group copies of known solutions used by the deflation factor.
fn deflation_targets(problem: &Problem, s: &State, known: &SolutionSet) -> Result<Vec<State>> {
    let mut out = Vec::new();
    for (k, _) in &known.entries {
        let mut images = vec![k.clone()];
        if problem.is_swap_symmetric() {
            images.push(k.swapped());
        }
        for img in images {
            let (_, z, _) = nearest_in_orbit(problem, s, &img)?;
            let t = if z.is_empty() { img } else { img.shifted(&z)? };
            out.push(t.scaled(-1.0));
            out.push(t);
        }
    }
    Ok(out)
}

/// Deflated value and its preconditioned gradient.
fn deflated(problem: &Problem, s: &State, targets: &[State], sigma: f64) -> Result<(f64, f64, State)> {
    let j = energy::energy(problem, s)?.total;
    let g = energy::grad_precond(problem, s)?;
    let mut log_factor = 0.0;
    let mut dlog = State::zeros(problem.domain().clone());
    for t in targets {
        let diff = s.add_scaled(-1.0, t)?;
        let d2 = energy::norm_sq(problem, &diff)?;
        log_factor += (sigma / d2).ln_1p();
        dlog = dlog.add_scaled(-2.0 * sigma / (d2 * (d2 + sigma)), &diff)?;
    }
    let factor = log_factor.exp();
    // A⁻¹∇(J·Π) = Π (A⁻¹∇J + J ∇log Π)
    let grad = g.add_scaled(j, &dlog)?.scaled(factor);
    Ok((j * factor, j, grad))
}

/// Projected descent on the deflated energy for a few iterations.
fn deflated_stage(problem: &Problem, init: &State, known: &SolutionSet, cfg: &DeflationConfig) -> Result<State> {
    let (_, mut s) = energy::fibering_project(problem, init)?;
    for _ in 0..cfg.stage_iters {
        let targets = deflation_targets(problem, &s, known)?;
        let (value, _, d) = deflated(problem, &s, &targets, cfg.sigma)?;
        let n = energy::norm(problem, &s)?;
        let dn = energy::norm(problem, &d)?;
        if dn <= cfg.stage_tol * n.max(1.0) * value.abs().max(1.0) {
            break;
        }
        let slope = dn * dn;
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let trial = s.add_scaled(-alpha, &d)?;
            if !trial.is_zero() {
                let (_, trial) = energy::fibering_project(problem, &trial)?;
                let (tv, _, _) = deflated(problem, &trial, &targets, cfg.sigma)?;
                if tv <= value - 1e-4 * alpha * slope {
                    s = trial;
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(s)
}

/// Deterministic seed for attempt `a`: symmetric and antisymmetric pairs of
/// the low block eigenmodes, then smoothed random fields.
pub fn search_seed(problem: &Problem, config: &SolveConfig, attempt: usize) -> Result<State> {
    let n = problem.domain().len();
    let mode_pairs = 4;
    if n <= 4096 && attempt < 2 * mode_pairs {
        let j = attempt / 2;
        let sign = if attempt % 2 == 0 { 1.0 } else { -1.0 };
        let (a, b) = rayon::join(
            || eigen::block_modes(problem, 0, j + 1),
            || eigen::block_modes(problem, 1, j + 1),
        );
        let (a, b) = (a?, b?);
        let scale = |v: &[f64]| {
            let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            v.iter().map(|x| x / m).collect::<Vec<f64>>()
        };
        let u = scale(&a[j].1);
        let v: Vec<f64> = scale(&b[j].1).iter().map(|x| sign * x).collect();
        return Ok(State::from_raw(problem.domain(), u, v));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (attempt as u64).wrapping_mul(0x2545_f491_4f6c_dd1d));
    let raw: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let r = State::from_raw(problem.domain(), raw[..n].to_vec(), raw[n..].to_vec());
    let smooth = energy::precondition(problem, &energy::precondition(problem, &r)?)?;
    let amp = smooth.max_abs();
    Ok(smooth.scaled(1.0 / amp))
}

/// One deflated search from the seed of `attempt`. With no known solutions
/// this is [`solver::find_ground_state`].
pub fn deflated_search(
    problem: &Problem,
    config: &SolveConfig,
    deflation: &DeflationConfig,
    known: &SolutionSet,
    attempt: usize,
) -> Result<SearchOutcome> {
    if known.is_empty() {
        let (report, state) = solver::find_ground_state(problem, config)?;
        return Ok(SearchOutcome::Found { report, state });
    }
    let seed = search_seed(problem, config, attempt)?;
    let staged = deflated_stage(problem, &seed, known, deflation)?;
    let polished = newton_polish(problem, &staged, config.grad_tol, deflation.newton_iters)?;
    let state = polished.state;
    if !polished.converged {
        return Ok(SearchOutcome::Collapsed {
            state,
            reason: format!("polish stopped at residual {:.3e}", polished.residual),
        });
    }
    let n = energy::norm(problem, &state)?;
    let known_norm = known.entries.iter().map(|(_, r)| r.norm).fold(0.0, f64::max);
    if n <= DISTINCT_REL * known_norm {
        return Ok(SearchOutcome::Collapsed { state, reason: "trivial solution".into() });
    }
    let e = energy::energy(problem, &state)?.total;
    for (i, (k, r)) in known.entries.iter().enumerate() {
        let threshold = DISTINCT_REL * n.max(r.norm);
        let mut d = orbit_distance(problem, &state, k)?;
        if problem.is_swap_symmetric() {
            d = d.min(orbit_distance(problem, &state, &k.swapped())?);
        }
        if d <= threshold {
            return Ok(SearchOutcome::Collapsed { state, reason: format!("returned to known solution {i}") });
        }
        if (e - r.energy).abs() <= LEVEL_GAP_REL * r.energy.abs() {
            return Ok(SearchOutcome::Collapsed { state, reason: format!("same energy level as known solution {i}") });
        }
    }
    let (grad_residual, norm) = solver::residual(problem, &state)?;
    let report = SolveReport {
        energy: e,
        grad_residual,
        xi_residual: energy::nehari_xi(problem, &state)?.abs(),
        iterations: polished.iterations,
        start_index: attempt,
        norm,
        rho_estimate: norm,
        energy_history: vec![e],
        decrements: Vec::new(),
    };
    Ok(SearchOutcome::Found { report, state })
}

/// Record of one attempt in [`multiplicity_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptLog {
    pub attempt: usize,
    pub outcome: String,
}

impl fmt::Display for AttemptLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "attempt {}: {}", self.attempt, self.outcome)
    }
}

/// Ground state followed by deflated searches until `target` solutions are
/// known or `budget` attempts have been made.
pub fn multiplicity_search(
    problem: &Problem,
    config: &SolveConfig,
    deflation: &DeflationConfig,
    target: usize,
    budget: usize,
) -> Result<(SolutionSet, Vec<AttemptLog>)> {
    let mut set = SolutionSet::new();
    let mut log = Vec::new();
    let (report, state) = solver::find_ground_state(problem, config)?;
    log.push(AttemptLog { attempt: 0, outcome: format!("ground state, energy {:.12e}", report.energy) });
    set.insert(problem, state, report)?;
    for attempt in 0..budget {
        if set.len() >= target {
            break;
        }
        match deflated_search(problem, config, deflation, &set, attempt)? {
            SearchOutcome::Found { report, state } => {
                log.push(AttemptLog {
                    attempt: attempt + 1,
                    outcome: format!("found, energy {:.12e}", report.energy),
                });
                set.insert(problem, state, report)?;
            }
            SearchOutcome::Collapsed { reason, .. } => log.push(AttemptLog {
                attempt: attempt + 1,
                outcome: format!("collapsed: {reason}"),
            }),
        }
    }
    Ok((set, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::tests::{line_problem, random_state};
    use crate::grid::{DomainSpec, GridFunction};
    use crate::model::{Nonlinearity, ProblemSpec};
    use std::sync::Arc;

    fn torus() -> Problem {
        let d = Arc::new(DomainSpec::periodic(&[3, 2], 3).unwrap());
        Problem::new(ProblemSpec {
            q: 3.0,
            f1: Nonlinearity::single(1.0, 4.0),
            f2: Nonlinearity::single(1.0, 4.0),
            v1: GridFunction::constant(d.clone(), 1.0).unwrap(),
            v2: GridFunction::constant(d.clone(), 1.5).unwrap(),
            lambda: GridFunction::constant(d.clone(), 0.3).unwrap(),
            delta: 0.5,
            domain: d,
        })
        .unwrap()
    }

    fn torus_state(p: &Problem, seed: u64) -> State {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = p.domain().len();
        let u = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        State::from_raw(p.domain(), u, v)
    }

    #[test]
    fn orbit_distance_quotients_shifts_and_sign() {
        let p = torus();
        let s = torus_state(&p, 1);
        assert_eq!(orbit_distance(&p, &s, &s.shifted(&[2, 1]).unwrap()).unwrap(), 0.0);
        assert_eq!(orbit_distance(&p, &s, &s.scaled(-1.0)).unwrap(), 0.0);
        assert_eq!(orbit_distance(&p, &s, &s.shifted(&[1, 0]).unwrap().scaled(-1.0)).unwrap(), 0.0);
        let t = torus_state(&p, 2);
        assert!(orbit_distance(&p, &s, &t).unwrap() > 0.0);
    }

    #[test]
    fn orbit_distance_is_a_pseudometric() {
        let p = torus();
        let states: Vec<State> = (0..4).map(|i| torus_state(&p, 10 + i)).collect();
        for a in &states {
            for b in &states {
                let ab = orbit_distance(&p, a, b).unwrap();
                let ba = orbit_distance(&p, b, a).unwrap();
                assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
                for c in &states {
                    let ac = orbit_distance(&p, a, c).unwrap();
                    let cb = orbit_distance(&p, c, b).unwrap();
                    assert!(ab <= ac + cb + 1e-12);
                }
            }
        }
    }

    #[test]
    fn bounded_orbit_distance_is_the_signed_minimum() {
        let p = line_problem(30, 0.3);
        let a = random_state(&p, 1);
        let b = random_state(&p, 2);
        let plain = energy::norm(&p, &a.add_scaled(-1.0, &b).unwrap()).unwrap();
        let flipped = energy::norm(&p, &a.add_scaled(1.0, &b).unwrap()).unwrap();
        assert_eq!(orbit_distance(&p, &a, &b).unwrap(), plain.min(flipped));
    }

    #[test]
    fn empty_known_set_gives_the_ground_state() {
        let p = line_problem(64, 0.3);
        let cfg = SolveConfig { starts: 2, ..Default::default() };
        let out = deflated_search(&p, &cfg, &DeflationConfig::default(), &SolutionSet::new(), 0).unwrap();
        let (r, _) = solver::find_ground_state(&p, &cfg).unwrap();
        match out {
            SearchOutcome::Found { report, .. } => assert_eq!(report.energy, r.energy),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn search_finds_higher_distinct_levels() {
        let p = line_problem(96, 0.3);
        let cfg = SolveConfig { starts: 3, ..Default::default() };
        let (set, log) = multiplicity_search(&p, &cfg, &DeflationConfig::default(), 3, 8).unwrap();
        assert!(set.len() >= 3, "{log:?}");
        assert!(set.is_consistent());
        for (_, r) in &set.entries {
            assert!(r.grad_residual <= cfg.grad_tol);
        }
    }
}

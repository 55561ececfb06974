//! Newton–Krylov refinement of approximate critical points.
//!
//! Deflated descent only lands near a critical point, which may be a saddle
//! of `J` on the manifold; plain descent would slide away from it. Newton's
//! method converges locally to saddles as well, so the polish solves
//! `J''(s) δ = -J'(s)` by MINRES preconditioned with the block operator
//! `(-Δ_h + V1) ⊕ (-Δ_h + V2)`, globalized by backtracking on the dual
//! residual norm `⟨g, A⁻¹g⟩`.

use crate::accum;
use crate::energy::{self, State};
use crate::error::Result;
use crate::model::Problem;

fn flatten(s: &State) -> Vec<f64> {
    let mut out = s.u().values().to_vec();
    out.extend_from_slice(s.v().values());
    out
}

fn unflatten(problem: &Problem, x: &[f64]) -> State {
    let n = x.len() / 2;
    State::from_raw(problem.domain(), x[..n].to_vec(), x[n..].to_vec())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    accum::sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// Preconditioned MINRES for symmetric `op` with SPD preconditioner `pre`.
/// Returns the approximate solution and the number of iterations.
pub(crate) fn minres(
    op: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    pre: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = pre(&r1)?;
    let beta1 = dot(&r1, &y).max(0.0).sqrt();
    if beta1 == 0.0 {
        return Ok((x, 0));
    }
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0, 0.0);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|t| s * t).collect();
        y = op(&v)?;
        if itn >= 2 {
            let c = beta / oldb;
            for i in 0..n {
                y[i] -= c * r1[i];
            }
        }
        let alfa = dot(&v, &y);
        let c = alfa / beta;
        for i in 0..n {
            y[i] -= c * r2[i];
        }
        r1 = std::mem::replace(&mut r2, y.clone());
        y = pre(&r2)?;
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
            x[i] += phi * w[i];
        }
        if phibar <= rtol * beta1 || beta == 0.0 {
            return Ok((x, itn));
        }
    }
    Ok((x, max_iter))
}

/// Newton direction `-J''(s)⁻¹ g` by preconditioned MINRES.
pub(crate) fn newton_direction(problem: &Problem, s: &State, g: &State, rtol: f64, max_iter: usize) -> Result<State> {
    let pre = |x: &[f64]| -> Result<Vec<f64>> { Ok(flatten(&energy::precondition(problem, &unflatten(problem, x))?)) };
    let op = |x: &[f64]| -> Result<Vec<f64>> { Ok(flatten(&energy::hessian_apply(problem, s, &unflatten(problem, x))?)) };
    let rhs: Vec<f64> = flatten(g).iter().map(|x| -x).collect();
    let (step, _) = minres(&op, &pre, &rhs, rtol, max_iter)?;
    Ok(unflatten(problem, &step))
}

/// Outcome of [`newton_polish`].
#[derive(Debug, Clone)]
pub struct PolishResult {
    pub state: State,
    pub iterations: usize,
    /// `‖grad_l2‖_{L²} / ‖s‖`, or the raw gradient norm if `s = 0`.
    pub residual: f64,
    pub converged: bool,
}

fn relative_residual(problem: &Problem, s: &State) -> Result<(f64, State)> {
    let g = energy::grad_l2(problem, s)?;
    let gn = g.dot_l2(&g)?.sqrt();
    let n = energy::norm(problem, s)?;
    Ok((if n > 0.0 { gn / n } else { gn }, g))
}

pub fn newton_polish(problem: &Problem, init: &State, tol: f64, max_iters: usize) -> Result<PolishResult> {
    let mut s = init.clone();
    let (mut res, mut g) = relative_residual(problem, &s)?;
    for it in 0..max_iters {
        if res <= tol {
            return Ok(PolishResult { state: s, iterations: it, residual: res, converged: true });
        }
        let pre = |x: &[f64]| -> Result<Vec<f64>> { Ok(flatten(&energy::precondition(problem, &unflatten(problem, x))?)) };
        let op = |x: &[f64]| -> Result<Vec<f64>> {
            Ok(flatten(&energy::hessian_apply(problem, &s, &unflatten(problem, x))?))
        };
        let rhs: Vec<f64> = flatten(&g).iter().map(|x| -x).collect();
        let forcing = (res.sqrt()).min(1e-2).max(1e-10);
        let (step, _) = minres(&op, &pre, &rhs, forcing, 2000)?;
        let step = unflatten(problem, &step);
        let merit = |g: &State| -> Result<f64> { g.dot_l2(&energy::precondition(problem, g)?) };
        let m0 = merit(&g)?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = s.add_scaled(alpha, &step)?;
            let gt = energy::grad_l2(problem, &trial)?;
            if merit(&gt)? < m0 {
                s = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Ok(PolishResult { state: s, iterations: it, residual: res, converged: false });
        }
        (res, g) = relative_residual(problem, &s)?;
    }
    Ok(PolishResult {
        converged: res <= tol,
        state: s,
        iterations: max_iters,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::tests::{line_problem, random_state};

    #[test]
    fn minres_solves_an_indefinite_diagonal_system() {
        let d: Vec<f64> = (0..40).map(|i| if i % 3 == 0 { -1.0 - i as f64 } else { 2.0 + i as f64 }).collect();
        let b: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let op = |x: &[f64]| -> Result<Vec<f64>> { Ok(x.iter().zip(&d).map(|(a, b)| a * b).collect()) };
        let pre = |x: &[f64]| -> Result<Vec<f64>> { Ok(x.iter().zip(&d).map(|(a, b)| a / b.abs()).collect()) };
        let (x, _) = minres(&op, &pre, &b, 1e-12, 200).unwrap();
        for i in 0..40 {
            assert!((x[i] * d[i] - b[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn polish_refines_a_perturbed_ground_state() {
        let p = line_problem(96, 0.3);
        let (_, s) = crate::solver::minimize_on_nehari(&p, &Default::default(), &random_state(&p, 2).abs()).unwrap();
        let noisy = s.add_scaled(1e-3, &random_state(&p, 9)).unwrap();
        let out = newton_polish(&p, &noisy, 1e-11, 30).unwrap();
        assert!(out.converged);
        let d = out.state.add_scaled(-1.0, &s).unwrap();
        assert!(energy::norm(&p, &d).unwrap() < 1e-6 * energy::norm(&p, &s).unwrap());
    }
}

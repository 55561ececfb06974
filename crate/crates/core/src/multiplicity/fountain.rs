//! Computable counterparts of the fountain-theorem quantities on a finite
//! eigenbasis `e_1, ..., e_M`:
//!
//! * `Y_k = span(e_1..e_k)`, `Z_k = span(e_k..e_M)`;
//! * `β_k = sup { |u|_p + |v|_p : (u,v) ∈ Z_k, ‖(u,v)‖ = 1 }` (a lower
//!   estimate: best of several local ascents);
//! * `r_k = (2 C̃ p/(1-δ) β_k^p)^(1/(2-p))` and the lower bound for `b_k`;
//! * `ρ_k`: a radius beyond which every sampled direction of `Y_k` has
//!   `J ≤ 0`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::eigen::{eigenbasis, BlockMode};
use crate::accum;
use crate::energy::{RayMoments, State};
use crate::error::{Error, Result};
use crate::model::{Nonlinearity, Problem};

/// Extra modes beyond `k_max` spanning the tail spaces.
pub const TAIL_BUFFER: usize = 16;
pub const ASCENT_RESTARTS: usize = 20;
pub const RHO_DIRECTIONS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct FountainReport {
    pub k_max: usize,
    pub p: f64,
    pub c_tilde: f64,
    pub delta: f64,
    pub beta: Vec<f64>,
    pub r: Vec<f64>,
    pub b_lower: Vec<f64>,
    /// `(ρ_k, max sampled J on the ρ_k-sphere of Y_k)`.
    pub a_check: Vec<(f64, f64)>,
}

impl FountainReport {
    pub fn beta_nonincreasing(&self) -> bool {
        self.beta.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn a_check_holds(&self) -> bool {
        self.a_check.iter().all(|&(_, m)| m <= 0.0)
    }

    /// From the first `k` with `β_k < 1` on, `b_lower` is nondecreasing and
    /// ends strictly above where it started.
    pub fn b_lower_eventually_increasing(&self) -> bool {
        let Some(start) = self.beta.iter().position(|&b| b < 1.0) else {
            return false;
        };
        let tail = &self.b_lower[start..];
        tail.windows(2).all(|w| w[1] >= w[0]) && tail.len() >= 2 && tail[tail.len() - 1] > tail[0]
    }

    /// CSV table `k,beta,r,b_lower,rho,a_max`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,beta,r,b_lower,rho,a_max\n");
        for k in 0..self.k_max {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                k + 1,
                self.beta[k],
                self.r[k],
                self.b_lower[k],
                self.a_check[k].0,
                self.a_check[k].1
            ));
        }
        out
    }
}

impl fmt::Display for FountainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "k_max = {}", self.k_max)?;
        writeln!(f, "p = {}", self.p)?;
        writeln!(f, "c_tilde = {:.17e}", self.c_tilde)?;
        writeln!(f, "delta = {:.17e}", self.delta)?;
        writeln!(f, "beta_nonincreasing = {}", self.beta_nonincreasing())?;
        writeln!(f, "a_check_nonpositive = {}", self.a_check_holds())?;
        writeln!(f, "b_lower_eventually_increasing = {}", self.b_lower_eventually_increasing())?;
        if let (Some(first), Some(last)) = (self.beta.first(), self.beta.last()) {
            writeln!(f, "beta_ratio = {:.17e}", last / first)?;
        }
        Ok(())
    }
}

/// `C̃ = max(Σ a_j/p_j, Σ a_j)` over both nonlinearities; then
/// `|F_i(s)| ≤ C̃ (1 + |s|^p)` with `p` the largest exponent.
pub fn c_tilde(f1: &Nonlinearity, f2: &Nonlinearity) -> f64 {
    [f1, f2]
        .iter()
        .map(|nl| {
            let a: f64 = nl.terms().iter().map(|t| t.coefficient).sum();
            let ap: f64 = nl.terms().iter().map(|t| t.coefficient / t.exponent).sum();
            a.max(ap)
        })
        .fold(0.0, f64::max)
}

/// Mode coefficients combined into nodal fields, plus gradient of
/// `|u|_p + |v|_p` with respect to the coefficients.
struct Objective<'a> {
    modes: &'a [BlockMode],
    n: usize,
    p: f64,
    h: f64,
}

impl Objective<'_> {
    fn fields(&self, c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut u = vec![0.0; self.n];
        let mut v = vec![0.0; self.n];
        for (m, &cj) in self.modes.iter().zip(c) {
            if cj == 0.0 {
                continue;
            }
            let target = if m.component == 0 { &mut u } else { &mut v };
            for (t, x) in target.iter_mut().zip(&m.values) {
                *t += cj * x;
            }
        }
        (u, v)
    }

    fn lp(&self, w: &[f64]) -> f64 {
        (accum::sum(w.iter().map(|&x| accum::abs_pow(x, self.p))) * self.h).powf(1.0 / self.p)
    }

    fn value(&self, c: &[f64]) -> f64 {
        let (u, v) = self.fields(c);
        self.lp(&u) + self.lp(&v)
    }

    fn gradient(&self, c: &[f64]) -> (f64, Vec<f64>) {
        let (u, v) = self.fields(c);
        let (nu, nv) = (self.lp(&u), self.lp(&v));
        let weight = |w: &[f64], nw: f64| -> Vec<f64> {
            if nw == 0.0 {
                return vec![0.0; w.len()];
            }
            let scale = nw.powf(1.0 - self.p) * self.h;
            w.iter().map(|&x| accum::signed_pow(x, self.p) * scale).collect()
        };
        let (wu, wv) = (weight(&u, nu), weight(&v, nv));
        let g = self
            .modes
            .iter()
            .map(|m| {
                let w = if m.component == 0 { &wu } else { &wv };
                accum::sum(w.iter().zip(&m.values).map(|(a, b)| a * b))
            })
            .collect();
        (nu + nv, g)
    }

    /// Fixed-point ascent `c ← ∇G(c)/|∇G(c)|` on the unit sphere; monotone
    /// for the convex, 1-homogeneous objective.
    fn ascend(&self, mut c: Vec<f64>, active: usize) -> (f64, Vec<f64>) {
        let mut best = self.value(&c);
        for _ in 0..500 {
            let (_, mut g) = self.gradient(&c);
            g[..active].iter_mut().for_each(|x| *x = 0.0);
            let gn = accum::sum(g.iter().map(|x| x * x)).sqrt();
            if gn == 0.0 {
                break;
            }
            let next: Vec<f64> = g.iter().map(|x| x / gn).collect();
            let val = self.value(&next);
            if !(val > best) {
                break;
            }
            let gain = val - best;
            c = next;
            best = val;
            if gain <= 1e-13 * best {
                break;
            }
        }
        (best, c)
    }
}

/// Diagnostics for `k = 1..=k_max`. Deterministic given `seed`.
pub fn fountain_diagnostics(problem: &Problem, k_max: usize, seed: u64) -> Result<FountainReport> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be positive".into()));
    }
    let spec = problem.spec();
    let total = k_max + TAIL_BUFFER;
    let modes = eigenbasis(problem, total)?;
    let p = spec.f1.max_exponent().max(spec.f2.max_exponent());
    let delta = problem.delta();
    let ct = c_tilde(&spec.f1, &spec.f2);
    let obj = Objective {
        modes: &modes,
        n: problem.domain().len(),
        p,
        h: problem.domain().cell_volume(),
    };

    // β_k from k_max down to 1; Z_k ⊃ Z_{k+1}, so the previous maximizer is
    // a feasible start and β stays nonincreasing.
    let mut beta = vec![0.0; k_max];
    let mut carry: Option<Vec<f64>> = None;
    for k in (1..=k_max).rev() {
        let active = k - 1; // coefficients 0..k-1 are frozen at zero
        let dim = total - active;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut starts: Vec<Vec<f64>> = (0..ASCENT_RESTARTS)
            .map(|_| {
                let mut c = vec![0.0; total];
                for x in c[active..].iter_mut() {
                    *x = rng.gen_range(-1.0..1.0);
                }
                let n = accum::sum(c.iter().map(|x| x * x)).sqrt();
                c.iter().map(|x| x / n).collect()
            })
            .collect();
        if let Some(c) = carry.take() {
            starts.push(c);
        } else {
            let mut c = vec![0.0; total];
            c[active] = 1.0;
            starts.push(c);
        }
        debug_assert!(dim >= 1);
        let results: Vec<(f64, Vec<f64>)> = starts.into_par_iter().map(|c| obj.ascend(c, active)).collect();
        let (b, c) = results
            .into_iter()
            .fold((f64::NEG_INFINITY, Vec::new()), |acc, r| if r.0 > acc.0 { r } else { acc });
        beta[k - 1] = b;
        carry = Some(c);
    }

    let r: Vec<f64> = beta
        .iter()
        .map(|&b| (2.0 * ct * p / (1.0 - delta) * b.powf(p)).powf(1.0 / (2.0 - p)))
        .collect();
    let volume = problem.domain().volume();
    let b_lower: Vec<f64> = beta
        .iter()
        .map(|&b| {
            (1.0 - delta) * (0.5 - 1.0 / p) * (2.0 * ct * p / (1.0 - delta) * b.powf(p)).powf(2.0 / (2.0 - p))
                - 2.0 * ct * volume
        })
        .collect();

    let a_check = (1..=k_max)
        .into_par_iter()
        .map(|k| rho_for(problem, &modes, k, seed))
        .collect::<Result<Vec<_>>>()?;

    Ok(FountainReport {
        k_max,
        p,
        c_tilde: ct,
        delta,
        beta,
        r,
        b_lower,
        a_check,
    })
}

/// Smallest bisected radius at which every sampled unit direction of `Y_k`
/// has nonpositive fibering value.
fn rho_for(problem: &Problem, modes: &[BlockMode], k: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0xf00d).wrapping_add(k as u64));
    let mut coeffs: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut c = vec![0.0; k];
            c[j] = 1.0;
            c
        })
        .collect();
    for _ in 0..RHO_DIRECTIONS {
        let c: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = accum::sum(c.iter().map(|x| x * x)).sqrt();
        coeffs.push(c.iter().map(|x| x / n).collect());
    }
    let rays: Vec<RayMoments> = coeffs
        .iter()
        .map(|c| {
            let mut s = State::zeros(problem.domain().clone());
            for (m, &cj) in modes.iter().zip(c) {
                s = s.add_scaled(cj, &m.to_state(problem))?;
            }
            RayMoments::new(problem, &s)
        })
        .collect::<Result<_>>()?;
    let max_at = |rho: f64| rays.iter().map(|r| r.phi(rho)).fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (0.0, 1.0);
    while max_at(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 2f64.powi(40) {
            return Err(Error::Diagnostic(format!(
                "no radius below 2^40 makes J nonpositive on the sampled sphere of Y_{k}"
            )));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if max_at(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((hi, max_at(hi)))
}

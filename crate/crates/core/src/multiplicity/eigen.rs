//! Lowest eigenpairs of the block operator `(-Δ_h + V1) ⊕ (-Δ_h + V2)`.
//!
//! Small blocks are diagonalized densely; larger ones by subspace iteration
//! with the preconditioned block solve as the inverse.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::{self, State};
use crate::error::{Error, Result};
use crate::model::Problem;

/// Blocks up to this size are diagonalized densely.
const DENSE_LIMIT: usize = 1024;
/// Largest block accepted at all.
pub const MAX_BLOCK: usize = 10_000;

/// An eigenvector of one block, stored as a single component.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMode {
    pub eigenvalue: f64,
    /// 0 for the `u` block, 1 for the `v` block.
    pub component: usize,
    /// Nodal values, normalized to unit `‖·‖`.
    pub values: Vec<f64>,
}

impl BlockMode {
    pub fn to_state(&self, problem: &Problem) -> State {
        let zeros = vec![0.0; self.values.len()];
        if self.component == 0 {
            State::from_raw(problem.domain(), self.values.clone(), zeros)
        } else {
            State::from_raw(problem.domain(), zeros, self.values.clone())
        }
    }
}

fn orient(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * max) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Lowest `k` eigenpairs of one block, eigenvalues ascending, vectors with
/// unit Euclidean norm.
pub(crate) fn block_modes(problem: &Problem, comp: usize, k: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = problem.domain().len();
    if k > n {
        return Err(Error::InvalidArgument(format!("requested {k} modes of a block with {n} unknowns")));
    }
    if n > MAX_BLOCK {
        return Err(Error::InvalidArgument(format!(
            "eigenbasis needs at most {MAX_BLOCK} unknowns per component (grid has {n})"
        )));
    }
    if n <= DENSE_LIMIT {
        dense_modes(problem, comp, k)
    } else {
        subspace_modes(problem, comp, k)
    }
}

fn dense_modes(problem: &Problem, comp: usize, k: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = problem.domain().len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        energy::apply_block(problem, comp, &e, &mut col);
        for i in 0..n {
            a[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            orient(&mut v);
            (eig.eigenvalues[i], v)
        })
        .collect())
}

fn subspace_modes(problem: &Problem, comp: usize, k: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = problem.domain().len();
    let m = (k + 8).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ comp as u64);
    let mut x = DMatrix::<f64>::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
    let mut tmp = vec![0.0; n];
    for _ in 0..500 {
        // y = A^{-1} x
        let mut y = DMatrix::<f64>::zeros(n, m);
        for j in 0..m {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let sol = energy::solve_block(problem, comp, &col)?;
            y.set_column(j, &nalgebra::DVector::from_vec(sol));
        }
        let q = y.qr().q();
        // Rayleigh–Ritz
        let mut aq = DMatrix::<f64>::zeros(n, m);
        for j in 0..m {
            let col: Vec<f64> = q.column(j).iter().copied().collect();
            energy::apply_block(problem, comp, &col, &mut tmp);
            aq.set_column(j, &nalgebra::DVector::from_column_slice(&tmp));
        }
        let h = q.transpose() * &aq;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let vecs = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
        let ritz = &q * &vecs;
        let aritz = &aq * &vecs;
        let converged = (0..k).all(|j| {
            let theta = eig.eigenvalues[order[j]];
            let r = aritz.column(j) - ritz.column(j) * theta;
            r.norm() <= 1e-10 * theta.abs()
        });
        x = ritz;
        if converged {
            return Ok((0..k)
                .map(|j| {
                    let mut v: Vec<f64> = x.column(j).iter().copied().collect();
                    orient(&mut v);
                    (eig.eigenvalues[order[j]], v)
                })
                .collect());
        }
    }
    Err(Error::Diagnostic("subspace iteration did not converge".into()))
}

/// First `k` eigenpairs of the block-diagonal operator, orthonormal in the
/// `‖·‖` inner product, eigenvalues ascending (`u` block first on ties).
pub fn eigenbasis(problem: &Problem, k: usize) -> Result<Vec<BlockMode>> {
    let n = problem.domain().len();
    if k > 2 * n {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs, the grid has {} unknowns",
            2 * n
        )));
    }
    let per_block = k.min(n);
    let (a, b) = rayon::join(
        || block_modes(problem, 0, per_block),
        || block_modes(problem, 1, per_block),
    );
    let (a, b) = (a?, b?);
    let h = problem.domain().cell_volume();
    let mut out = Vec::with_capacity(k);
    let (mut i, mut j) = (0, 0);
    while out.len() < k {
        let take_u = j >= b.len() || (i < a.len() && a[i].0 <= b[j].0);
        let (mu, v, comp) = if take_u {
            i += 1;
            (a[i - 1].0, &a[i - 1].1, 0)
        } else {
            j += 1;
            (b[j - 1].0, &b[j - 1].1, 1)
        };
        let scale = 1.0 / (mu * h).sqrt();
        out.push(BlockMode {
            eigenvalue: mu,
            component: comp,
            values: v.iter().map(|x| x * scale).collect(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::tests::line_problem;
    use crate::grid::{DomainSpec, GridFunction};
    use crate::model::{Nonlinearity, ProblemSpec};
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn line_spectrum_is_the_stencil_spectrum() {
        let n = 63;
        let p = line_problem(n, 0.0);
        let h = p.domain().spacing()[0];
        let modes = eigenbasis(&p, 10).unwrap();
        for (idx, m) in modes.iter().enumerate() {
            let j = (idx / 2 + 1) as f64;
            assert_eq!(m.component, idx % 2);
            let exact = 4.0 / (h * h) * (j * PI * h / 2.0).sin().powi(2) + 1.0;
            assert!((m.eigenvalue - exact).abs() <= 1e-10 * exact);
            // proportional to sin(jπx)
            let s: Vec<f64> = (0..n).map(|i| (j * PI * (i as f64 + 1.0) * h).sin()).collect();
            let dot: f64 = m.values.iter().zip(&s).map(|(a, b)| a * b).sum();
            let na: f64 = m.values.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nb: f64 = s.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!((dot.abs() / (na * nb) - 1.0).abs() < 1e-10);
        }
        assert!(modes.windows(2).all(|w| w[0].eigenvalue <= w[1].eigenvalue));
    }

    fn gram(p: &Problem, modes: &[BlockMode]) -> f64 {
        let states: Vec<State> = modes.iter().map(|m| m.to_state(p)).collect();
        let mut worst = 0.0f64;
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let sum = a.add_scaled(1.0, b).unwrap();
                let diff = a.add_scaled(-1.0, b).unwrap();
                let ip = 0.25 * (energy::norm_sq(p, &sum).unwrap() - energy::norm_sq(p, &diff).unwrap());
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    #[test]
    fn modes_are_orthonormal_in_the_energy_norm() {
        let d = Arc::new(DomainSpec::dirichlet(&[1.0, 1.0], &[12, 9]).unwrap());
        let p = Problem::new(ProblemSpec {
            q: 3.0,
            f1: Nonlinearity::single(1.0, 4.0),
            f2: Nonlinearity::single(1.0, 4.0),
            v1: GridFunction::from_fn(d.clone(), |x| 1.0 + x[0] * x[1]).unwrap(),
            v2: GridFunction::constant(d.clone(), 2.0).unwrap(),
            lambda: GridFunction::zeros(d.clone()),
            delta: 0.5,
            domain: d,
        })
        .unwrap();
        let modes = eigenbasis(&p, 12).unwrap();
        assert!(gram(&p, &modes) <= 1e-10);
        assert!(eigenbasis(&p, 10_000).is_err());
    }

    #[test]
    fn subspace_iteration_matches_dense() {
        let p = line_problem(1500, 0.0);
        let h = p.domain().spacing()[0];
        let modes = subspace_modes(&p, 0, 5).unwrap();
        for (j, (mu, _)) in modes.iter().enumerate() {
            let exact = 4.0 / (h * h) * ((j + 1) as f64 * PI * h / 2.0).sin().powi(2) + 1.0;
            assert!((mu - exact).abs() <= 1e-8 * exact, "{mu} vs {exact}");
        }
    }
}

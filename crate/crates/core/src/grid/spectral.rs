//! Fast direct solver for `(-Δ_h + c) x = b` with constant `c > 0`.
//!
//! The stencil diagonalizes in the sine basis (Dirichlet, DST-I) or the
//! Fourier basis (torus), axis by axis. Used as the preconditioner for every
//! variable-coefficient solve.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::DomainSpec;

pub(crate) struct ShiftedLaplaceSolver {
    domain: Arc<DomainSpec>,
    shift: f64,
    axis_eigs: Vec<Vec<f64>>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for ShiftedLaplaceSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShiftedLaplaceSolver")
            .field("shift", &self.shift)
            .finish()
    }
}

impl ShiftedLaplaceSolver {
    pub fn new(domain: Arc<DomainSpec>, shift: f64) -> Self {
        let periodic = domain.is_periodic();
        let mut planner = FftPlanner::new();
        let mut axis_eigs = Vec::new();
        let mut forward = Vec::new();
        let mut inverse = Vec::new();
        for a in 0..domain.dim() {
            let n = domain.shape()[a];
            let h = domain.spacing()[a];
            let eigs = (0..n)
                .map(|k| {
                    let theta = if periodic {
                        2.0 * PI * k as f64 / n as f64
                    } else {
                        PI * (k as f64 + 1.0) / (n as f64 + 1.0)
                    };
                    4.0 / (h * h) * (theta / 2.0).sin().powi(2)
                })
                .collect();
            axis_eigs.push(eigs);
            let len = if periodic { n } else { 2 * (n + 1) };
            forward.push(planner.plan_fft_forward(len));
            inverse.push(planner.plan_fft_inverse(len));
        }
        Self {
            domain,
            shift,
            axis_eigs,
            forward,
            inverse,
        }
    }

    fn eigenvalue(&self, flat: usize) -> f64 {
        let idx = self.domain.multi_index(flat);
        idx.iter()
            .enumerate()
            .map(|(a, &k)| self.axis_eigs[a][k])
            .sum::<f64>()
            + self.shift
    }

    pub fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        if self.domain.is_periodic() {
            self.solve_periodic(rhs, out)
        } else {
            self.solve_dirichlet(rhs, out)
        }
    }

    fn solve_periodic(&self, rhs: &[f64], out: &mut [f64]) {
        let mut buf: Vec<Complex<f64>> = rhs.iter().map(|&x| Complex::new(x, 0.0)).collect();
        for a in 0..self.domain.dim() {
            transform_lines(&self.domain, a, &mut buf, &self.forward[a]);
        }
        for (i, z) in buf.iter_mut().enumerate() {
            *z /= self.eigenvalue(i);
        }
        for a in 0..self.domain.dim() {
            transform_lines(&self.domain, a, &mut buf, &self.inverse[a]);
        }
        let scale = 1.0 / self.domain.len() as f64;
        for (o, z) in out.iter_mut().zip(&buf) {
            *o = z.re * scale;
        }
    }

    fn solve_dirichlet(&self, rhs: &[f64], out: &mut [f64]) {
        out.copy_from_slice(rhs);
        for a in 0..self.domain.dim() {
            dst_lines(&self.domain, a, out, &self.forward[a]);
        }
        let mut scale = 1.0;
        for a in 0..self.domain.dim() {
            scale *= 2.0 / (self.domain.shape()[a] as f64 + 1.0);
        }
        for (i, x) in out.iter_mut().enumerate() {
            *x *= scale / self.eigenvalue(i);
        }
        for a in 0..self.domain.dim() {
            dst_lines(&self.domain, a, out, &self.forward[a]);
        }
    }
}

fn transform_lines(domain: &DomainSpec, axis: usize, buf: &mut [Complex<f64>], fft: &Arc<dyn Fft<f64>>) {
    let n = domain.shape()[axis];
    let mut line = vec![Complex::new(0.0, 0.0); n];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for (start, stride) in domain.lines(axis) {
        for c in 0..n {
            line[c] = buf[start + c * stride];
        }
        fft.process_with_scratch(&mut line, &mut scratch);
        for c in 0..n {
            buf[start + c * stride] = line[c];
        }
    }
}

/// Unnormalized DST-I along `axis`: `X_k = Σ_j x_j sin(π (j+1)(k+1) / (n+1))`,
/// computed from an odd extension of length `2(n+1)`.
fn dst_lines(domain: &DomainSpec, axis: usize, buf: &mut [f64], fft: &Arc<dyn Fft<f64>>) {
    let n = domain.shape()[axis];
    let m = 2 * (n + 1);
    let mut ext = vec![Complex::new(0.0, 0.0); m];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for (start, stride) in domain.lines(axis) {
        ext.iter_mut().for_each(|z| *z = Complex::new(0.0, 0.0));
        for j in 0..n {
            let x = buf[start + j * stride];
            ext[j + 1] = Complex::new(x, 0.0);
            ext[m - 1 - j] = Complex::new(-x, 0.0);
        }
        fft.process_with_scratch(&mut ext, &mut scratch);
        for k in 0..n {
            buf[start + k * stride] = -ext[k + 1].im / 2.0;
        }
    }
}

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use nehari_core::energy::State;
use nehari_core::{DomainSpec, GridFunction, Nonlinearity, Problem, ProblemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn bounded_default() -> Problem {
    Problem::new(ProblemSpec::bounded_default().unwrap()).unwrap()
}

/// Unit square, variable potentials, λ near its admissible maximum.
pub fn square_variable() -> Problem {
    let d = Arc::new(DomainSpec::dirichlet(&[1.0, 1.0], &[15, 13]).unwrap());
    Problem::new(ProblemSpec {
        q: 3.0,
        f1: Nonlinearity::new(&[(1.0, 4.0), (0.5, 5.0)]),
        f2: Nonlinearity::single(2.0, 3.5),
        v1: GridFunction::from_fn(d.clone(), |x| 1.0 + x[0] * x[1]).unwrap(),
        v2: GridFunction::from_fn(d.clone(), |x| 2.0 + (PI * x[0]).sin()).unwrap(),
        lambda: GridFunction::from_fn(d.clone(), |x| 0.9 * (1.0 + 0.5 * x[1])).unwrap(),
        delta: 0.5,
        domain: d,
    })
    .unwrap()
}

/// Small 2D torus with periodic potentials and `q = 2.5`.
pub fn torus_periodic() -> Problem {
    let d = Arc::new(DomainSpec::periodic(&[3, 2], 5).unwrap());
    let tau = 2.0 * PI;
    Problem::new(ProblemSpec {
        q: 2.5,
        f1: Nonlinearity::single(1.0, 4.0),
        f2: Nonlinearity::new(&[(0.7, 3.0), (1.0, 6.0)]),
        v1: GridFunction::from_fn(d.clone(), |x| 1.5 + 0.5 * (tau * x[0]).cos()).unwrap(),
        v2: GridFunction::from_fn(d.clone(), |x| 1.0 + 0.25 * (tau * x[1]).sin()).unwrap(),
        lambda: GridFunction::from_fn(d.clone(), |x| 0.3 + 0.1 * (tau * (x[0] + x[1])).sin()).unwrap(),
        delta: 0.5,
        domain: d,
    })
    .unwrap()
}

pub fn specs() -> Vec<(&'static str, Problem)> {
    vec![("line", bounded_default()), ("square", square_variable()), ("torus", torus_periodic())]
}

/// Random state: a few smooth modes plus nodal noise, with an amplitude
/// spread over several decades.
pub fn random_state(problem: &Problem, rng: &mut ChaCha8Rng) -> State {
    let d = problem.domain().clone();
    let amp = 10f64.powf(rng.gen_range(-2.0..1.5));
    let field = |rng: &mut ChaCha8Rng| {
        let k: Vec<(f64, Vec<f64>)> = (0..3)
            .map(|_| (rng.gen_range(-1.0..1.0), (0..d.dim()).map(|_| rng.gen_range(0.5..3.0)).collect()))
            .collect();
        let noise: Vec<f64> = (0..d.len()).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let values: Vec<f64> = (0..d.len())
            .map(|i| {
                let x = d.point(i);
                let smooth: f64 = k
                    .iter()
                    .map(|(c, w)| c * x.iter().zip(w).map(|(xi, wi)| (PI * wi * xi).sin()).product::<f64>())
                    .sum();
                amp * (smooth + noise[i])
            })
            .collect();
        GridFunction::new(d.clone(), values).unwrap()
    };
    let u = field(rng);
    let v = field(rng);
    State::new(u, v).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `∫ f(w) w` by nodal quadrature.
pub fn f_pairing(nl: &Nonlinearity, w: &GridFunction) -> f64 {
    let h = w.domain().cell_volume();
    w.values().iter().map(|&x| nl.value(x) * x).sum::<f64>() * h
}

/// `∫ |w|^q` by nodal quadrature.
pub fn q_integral(w: &GridFunction, q: f64) -> f64 {
    let h = w.domain().cell_volume();
    w.values().iter().map(|x| x.abs().powf(q)).sum::<f64>() * h
}

//! Property tests over generated problem data and states.

use std::sync::Arc;

use nehari_core::energy::{self, State};
use nehari_core::multiplicity::orbit_distance;
use nehari_core::{DomainSpec, GridFunction, Nonlinearity, Problem, ProblemSpec};
use proptest::prelude::*;

fn torus_problem(q: f64, p: f64, lam: f64) -> Problem {
    let d = Arc::new(DomainSpec::periodic(&[3, 2], 3).unwrap());
    Problem::new(ProblemSpec {
        q,
        f1: Nonlinearity::single(1.0, p),
        f2: Nonlinearity::new(&[(0.5, p), (1.0, p + 1.0)]),
        v1: GridFunction::constant(d.clone(), 1.0).unwrap(),
        v2: GridFunction::constant(d.clone(), 2.0).unwrap(),
        lambda: GridFunction::constant(d.clone(), lam).unwrap(),
        delta: 0.5,
        domain: d,
    })
    .unwrap()
}

fn state_on(p: &Problem, u: &[f64], v: &[f64]) -> State {
    let d = p.domain().clone();
    State::new(GridFunction::new(d.clone(), u.to_vec()).unwrap(), GridFunction::new(d, v.to_vec()).unwrap()).unwrap()
}

prop_compose! {
    fn problem_and_state()(q in 2.1f64..3.5, gap in 0.1f64..2.0, lam in 0.0f64..1.4,
                            u in prop::collection::vec(-3.0f64..3.0, 54),
                            v in prop::collection::vec(-3.0f64..3.0, 54)) -> (Problem, State) {
        let p = torus_problem(q, q + gap, lam);
        let s = state_on(&p, &u, &v);
        (p, s)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_is_even((p, s) in problem_and_state()) {
        let a = energy::energy(&p, &s).unwrap().total;
        let b = energy::energy(&p, &s.scaled(-1.0)).unwrap().total;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn coercive_bound((p, s) in problem_and_state()) {
        let lhs = energy::coercive_form(&p, &s).unwrap();
        let rhs = (1.0 - p.delta()) * energy::norm_sq(&p, &s).unwrap();
        prop_assert!(lhs >= rhs - 1e-9 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn shifts_are_at_orbit_distance_zero((p, s) in problem_and_state(), z0 in -5i64..5, z1 in -5i64..5) {
        prop_assert_eq!(orbit_distance(&p, &s, &s.shifted(&[z0, z1]).unwrap()).unwrap(), 0.0);
        prop_assert_eq!(orbit_distance(&p, &s.scaled(-1.0), &s.shifted(&[z0, z1]).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn projected_points_satisfy_the_manifold_bounds((p, s) in problem_and_state()) {
        prop_assume!(!s.is_zero());
        let (rep, m) = energy::fibering_project(&p, &s).unwrap();
        let n2 = energy::norm_sq(&p, &m).unwrap();
        prop_assert!(energy::nehari_xi(&p, &m).unwrap().abs() <= 1e-10 * n2);
        prop_assert!(energy::nehari_xi_slope(&p, &m).unwrap() < 0.0);
        prop_assert!(rep.phi_at_t >= (0.5 - 1.0 / p.q()) * (1.0 - p.delta()) * n2 * (1.0 - 1e-9));
    }

    #[test]
    fn orbit_distance_triangle(a in prop::collection::vec(-1.0f64..1.0, 108),
                               b in prop::collection::vec(-1.0f64..1.0, 108),
                               c in prop::collection::vec(-1.0f64..1.0, 108)) {
        let p = torus_problem(3.0, 4.0, 0.3);
        let (sa, sb, sc) = (state_on(&p, &a[..54], &a[54..]), state_on(&p, &b[..54], &b[54..]), state_on(&p, &c[..54], &c[54..]));
        let ab = orbit_distance(&p, &sa, &sb).unwrap();
        let ba = orbit_distance(&p, &sb, &sa).unwrap();
        let ac = orbit_distance(&p, &sa, &sc).unwrap();
        let cb = orbit_distance(&p, &sc, &sb).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
        prop_assert!(ab <= ac + cb + 1e-12);
    }
}

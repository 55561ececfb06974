//! The analytic inequalities behind existence, checked on 10³ random states
//! for each of three problems. Slack is `1e-9 · scale`, where scale is the
//! magnitude of the larger side.

mod common;

use common::{f_pairing, q_integral, random_state, rng, specs};
use nehari_core::energy;

const STATES: usize = 1000;
const REL: f64 = 1e-9;

fn slack(a: f64, b: f64) -> f64 {
    REL * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[test]
fn coupling_is_dominated_by_the_norm() {
    for (name, p) in specs() {
        let mut r = rng(11);
        let delta = p.delta();
        for i in 0..STATES {
            let s = random_state(&p, &mut r);
            let lhs = energy::coercive_form(&p, &s).unwrap();
            let rhs = (1.0 - delta) * energy::norm_sq(&p, &s).unwrap();
            assert!(lhs >= rhs - slack(lhs, rhs), "{name} #{i}: {lhs} < {rhs}");
        }
    }
}

#[test]
fn pointwise_growth_conditions_at_state_values() {
    for (name, p) in specs() {
        let mut r = rng(12);
        let q = p.q();
        for _ in 0..STATES {
            let s = random_state(&p, &mut r);
            for (nl, w) in [(&p.spec().f1, s.u()), (&p.spec().f2, s.v())] {
                for &x in w.values().iter().filter(|x| **x != 0.0) {
                    let fx = nl.value(x) * x;
                    // Ambrosetti–Rabinowitz type bound: q F(x) ≤ f(x) x
                    let ar = q * nl.primitive(x);
                    assert!(ar <= fx + slack(ar, fx), "{name}: AR fails at {x}");
                    // f'(x) x² - f(x) x > (q - 2) f(x) x
                    let lhs = nl.derivative(x) * x * x - fx;
                    let rhs = (q - 2.0) * fx;
                    assert!(lhs > rhs - slack(lhs, rhs), "{name}: derivative inequality fails at {x}");
                }
            }
        }
    }
}

#[test]
fn manifold_inequalities() {
    for (name, p) in specs() {
        let mut r = rng(13);
        let q = p.q();
        let delta = p.delta();
        for i in 0..STATES {
            let s = random_state(&p, &mut r);
            let (_, m) = energy::fibering_project(&p, &s).unwrap();

            let qpart = q_integral(m.u(), q) + q_integral(m.v(), q);
            let fpart = f_pairing(&p.spec().f1, m.u()) + f_pairing(&p.spec().f2, m.v());
            assert!(qpart < fpart + slack(qpart, fpart), "{name} #{i}: {qpart} >= {fpart}");

            let slope = energy::nehari_xi_slope(&p, &m).unwrap();
            assert!(slope < 0.0, "{name} #{i}: xi slope {slope}");

            let j = energy::energy(&p, &m).unwrap().total;
            let bound = (0.5 - 1.0 / q) * (1.0 - delta) * energy::norm_sq(&p, &m).unwrap();
            assert!(j >= bound - slack(j, bound), "{name} #{i}: J = {j} below {bound}");
        }
    }
}

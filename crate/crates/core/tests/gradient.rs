//! First-variation consistency: gradient against central differences and
//! the Nehari functional against the gradient.

mod common;

use common::{random_state, rng, specs};
use nehari_core::energy;

#[test]
fn central_differences_match_the_gradient() {
    for (name, p) in specs() {
        let mut r = rng(31);
        for i in 0..50 {
            let s = random_state(&p, &mut r);
            let d = random_state(&p, &mut r);
            let d = d.scaled(s.max_abs() / d.max_abs());
            let eps = 1e-5;
            let plus = energy::energy(&p, &s.add_scaled(eps, &d).unwrap()).unwrap().total;
            let minus = energy::energy(&p, &s.add_scaled(-eps, &d).unwrap()).unwrap().total;
            let fd = (plus - minus) / (2.0 * eps);
            let exact = energy::grad_l2(&p, &s).unwrap().dot_l2(&d).unwrap();
            let scale = exact.abs().max(plus.abs().max(minus.abs()) * 1e-3);
            assert!((fd - exact).abs() <= 1e-6 * scale, "{name} #{i}: {fd} vs {exact}");
        }
    }
}

#[test]
fn xi_is_the_gradient_on_the_state() {
    for (name, p) in specs() {
        let mut r = rng(32);
        for _ in 0..50 {
            let s = random_state(&p, &mut r);
            let xi = energy::nehari_xi(&p, &s).unwrap();
            let g = energy::grad_l2(&p, &s).unwrap().dot_l2(&s).unwrap();
            let scale = energy::norm_sq(&p, &s).unwrap();
            assert!((xi - g).abs() <= 1e-12 * scale.max(xi.abs()), "{name}: {xi} vs {g}");
        }
    }
}

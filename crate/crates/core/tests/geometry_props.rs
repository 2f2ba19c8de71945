use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srot::geometry::{is_two_generating, lie_bracket, ControlSystem, CustomSystem, DEFAULT_RANK_TOL};
use srot::make_system;

const SYSTEMS: [&str; 4] = ["grushin", "heisenberg", "euclidean2", "euclidean3"];

fn random_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-r..r))
}

/// Time-`t` flow of the single field `X_i`, by RK4 with fine substeps.
fn field_flow(sys: &dyn ControlSystem, i: usize, x: &DVector<f64>, t: f64) -> DVector<f64> {
    let steps = 20;
    let h = t / steps as f64;
    let f = |y: &DVector<f64>| sys.fields(y).swap_remove(i);
    let mut s = x.clone();
    for _ in 0..steps {
        let k1 = f(&s);
        let k2 = f(&(&s + &k1 * (0.5 * h)));
        let k3 = f(&(&s + &k2 * (0.5 * h)));
        let k4 = f(&(&s + &k3 * h));
        s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    s
}

#[test]
fn brackets_match_flow_commutators() {
    let eps = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in SYSTEMS {
        let sys = make_system(name).unwrap();
        let k = sys.control_dim();
        for _ in 0..20 {
            let x = random_vec(&mut rng, sys.state_dim(), 2.0);
            for i in 0..k {
                for j in 0..k {
                    // Y_{-e} X_{-e} Y_e X_e x - x = e^2 [X, Y] + O(e^3)
                    let mut y = field_flow(&sys, i, &x, eps);
                    y = field_flow(&sys, j, &y, eps);
                    y = field_flow(&sys, i, &y, -eps);
                    y = field_flow(&sys, j, &y, -eps);
                    let fd = (y - &x) / (eps * eps);
                    let exact = lie_bracket(&sys, i, j, &x).unwrap();
                    let err = (&fd - &exact).amax();
                    assert!(
                        err <= 1e-2 * exact.amax() + 1e-4,
                        "{name} [{i},{j}] at {x:?}: {fd:?} vs {exact:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn hamiltonian_is_the_control_grid_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for name in ["grushin", "heisenberg", "euclidean2"] {
        let sys = make_system(name).unwrap();
        assert_eq!(sys.control_dim(), 2);
        for _ in 0..100 {
            let x = random_vec(&mut rng, sys.state_dim(), 2.0);
            let p = random_vec(&mut rng, sys.state_dim(), 2.0);
            let u_star = sys.maximizing_control(&x, &p);
            let g = (2.0 * u_star.amax()).max(0.5);
            let h = sys.hamiltonian(&x, &p);
            let mut best = f64::NEG_INFINITY;
            let pts = 101;
            for a in 0..pts {
                for b in 0..pts {
                    let u = DVector::from_vec(vec![
                        -g + 2.0 * g * a as f64 / (pts - 1) as f64,
                        -g + 2.0 * g * b as f64 / (pts - 1) as f64,
                    ]);
                    best = best.max(p.dot(&sys.dynamics(&x, &u)) - sys.lagrangian(&x, &u));
                }
            }
            assert!(best <= h + 1e-12, "{name}: grid beats H");
            assert!(h - best <= 1e-3 * (1.0 + h.abs()), "{name}: H {h} vs grid {best}");
        }
    }
}

#[test]
fn grushin_hamiltonian_formula_is_exact() {
    let g = make_system("grushin").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let x = random_vec(&mut rng, 2, 5.0);
        let p = random_vec(&mut rng, 2, 5.0);
        let expected = 0.5 * (p[0] * p[0] + x[0] * x[0] * p[1] * p[1]);
        assert!((g.hamiltonian(&x, &p) - expected).abs() <= 1e-14 * (1.0 + expected));
    }
}

#[test]
fn hamiltonian_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for name in SYSTEMS {
        let sys = make_system(name).unwrap();
        let n = sys.state_dim();
        for _ in 0..30 {
            let x = random_vec(&mut rng, n, 2.0);
            let p = random_vec(&mut rng, n, 2.0);
            let (gx, gp) = sys.hamiltonian_grad(&x, &p);
            let h = 1e-5;
            for c in 0..n {
                let mut e = DVector::zeros(n);
                e[c] = h;
                let fx = (sys.hamiltonian(&(&x + &e), &p) - sys.hamiltonian(&(&x - &e), &p)) / (2.0 * h);
                let fp = (sys.hamiltonian(&x, &(&p + &e)) - sys.hamiltonian(&x, &(&p - &e))) / (2.0 * h);
                let scale = 1.0 + gx.amax().max(gp.amax());
                assert!((fx - gx[c]).abs() <= 1e-6 * scale, "{name} dH/dx{c}");
                assert!((fp - gp[c]).abs() <= 1e-6 * scale, "{name} dH/dp{c}");
            }
        }
    }
}

#[test]
fn two_generating_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for name in ["grushin", "heisenberg"] {
        let sys = make_system(name).unwrap();
        for _ in 0..50 {
            let x = random_vec(&mut rng, sys.state_dim(), 3.0);
            assert!(is_two_generating(&sys, &x, DEFAULT_RANK_TOL), "{name} at {x:?}");
        }
    }
}

/// The Heisenberg frame with its two fields listed in either order.
fn heisenberg_ordered(swap: bool) -> CustomSystem {
    CustomSystem::new("heisenberg-perm", 3, 2, move |x: &DVector<f64>| {
        let a = DVector::from_vec(vec![1.0, 0.0, -x[1] / 2.0]);
        let b = DVector::from_vec(vec![0.0, 1.0, x[0] / 2.0]);
        if swap {
            vec![b, a]
        } else {
            vec![a, b]
        }
    })
}

/// `x1 d/dx1` and `d/dx2` in either order: rank drops on `x1 = 0` only in
/// the field span, never in the two-step span.
fn degenerate_ordered(swap: bool) -> CustomSystem {
    CustomSystem::new("degenerate-perm", 3, 2, move |x: &DVector<f64>| {
        let a = DVector::from_vec(vec![x[0], 0.0, 0.0]);
        let b = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        if swap {
            vec![b, a]
        } else {
            vec![a, b]
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_antisymmetry(x0 in -3.0..3.0f64, x1 in -3.0..3.0f64, x2 in -3.0..3.0f64) {
        for name in SYSTEMS {
            let sys = make_system(name).unwrap();
            let x = DVector::from_iterator(sys.state_dim(), [x0, x1, x2].into_iter().take(sys.state_dim()));
            for i in 0..sys.control_dim() {
                for j in 0..sys.control_dim() {
                    let ij = lie_bracket(&sys, i, j, &x).unwrap();
                    let ji = lie_bracket(&sys, j, i, &x).unwrap();
                    prop_assert_eq!(ij, -ji);
                }
            }
        }
    }

    #[test]
    fn two_generating_ignores_field_order(x0 in -3.0..3.0f64, x1 in -3.0..3.0f64, x2 in -3.0..3.0f64, on_axis in any::<bool>()) {
        let x = DVector::from_vec(vec![if on_axis { 0.0 } else { x0 }, x1, x2]);
        prop_assert_eq!(
            is_two_generating(&heisenberg_ordered(false), &x, DEFAULT_RANK_TOL),
            is_two_generating(&heisenberg_ordered(true), &x, DEFAULT_RANK_TOL)
        );
        prop_assert_eq!(
            is_two_generating(&degenerate_ordered(false), &x, DEFAULT_RANK_TOL),
            is_two_generating(&degenerate_ordered(true), &x, DEFAULT_RANK_TOL)
        );
    }
}

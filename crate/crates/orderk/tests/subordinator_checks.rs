//! Exercises Bernstein-function evaluation, derivative contracts, and the
//! samplers' Laplace-transform fidelity.

use approx::assert_relative_eq;
use orderk::subordinators::{laplace_transform_mc, BernsteinFn, FD_MAX_ORDER};
use orderk::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn all_kinds() -> Vec<BernsteinFn> {
    vec![
        BernsteinFn::stable(0.3).unwrap(),
        BernsteinFn::stable(0.5).unwrap(),
        BernsteinFn::gamma(1.2, 0.8).unwrap(),
        BernsteinFn::poisson(2.0).unwrap(),
        BernsteinFn::linear(3.0).unwrap(),
    ]
}

#[test]
fn laplace_contract_holds_for_every_kind() {
    let n_draws = 30_000;
    for f in all_kinds() {
        for mu in [0.5, 1.0, 2.0] {
            for t in [0.5, 1.0] {
                let check = laplace_transform_mc(&f, mu, t, n_draws, 20_240_817).unwrap();
                let budget = 4.0 * check.std_error + 1e-12;
                assert!(
                    (check.mc_mean - check.exact).abs() <= budget,
                    "{} mu={mu} t={t}: mc={} exact={} se={}",
                    f.kind_name(),
                    check.mc_mean,
                    check.exact,
                    check.std_error
                );
            }
        }
    }
}

#[test]
fn point_values_match_hand_formulas() {
    assert_relative_eq!(
        BernsteinFn::stable(0.5).unwrap().value(4.0).unwrap(),
        2.0,
        max_relative = 1e-14
    );
    assert_relative_eq!(
        BernsteinFn::linear(3.0).unwrap().value(2.0).unwrap(),
        6.0,
        max_relative = 1e-14
    );
    let poisson = BernsteinFn::poisson(1.7).unwrap();
    assert!((poisson.value(50.0).unwrap() - 1.7).abs() <= 1e-12);
    let gamma = BernsteinFn::gamma(1.2, 0.8).unwrap();
    assert_relative_eq!(
        gamma.value(1.0).unwrap(),
        1.2 * (1.0f64 + 1.0 / 0.8).ln(),
        max_relative = 1e-14
    );
    assert!(poisson.value(0.0).is_err());
    assert!(gamma.value(-1.0).is_err());
}

#[test]
fn derivative_signs_alternate_on_a_grid() {
    for f in all_kinds() {
        for n in 1..=6u32 {
            for step in 1..=10u32 {
                let x = 0.3 * f64::from(step);
                let d = f.nth_deriv(x, n).unwrap();
                let signed = if n % 2 == 1 { d } else { -d };
                assert!(
                    signed >= 0.0,
                    "{} n={n} x={x}: derivative {d} breaks alternation",
                    f.kind_name()
                );
            }
        }
    }
}

#[test]
fn derivatives_match_plain_difference_stencils() {
    // First derivative, plain symmetric quotient.
    let h = 1e-6;
    for f in all_kinds() {
        for x in [0.7, 1.5] {
            let numeric =
                (f.value(x + h).unwrap() - f.value(x - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(f.nth_deriv(x, 1).unwrap(), numeric, max_relative = 1e-6);
        }
    }

    // Third derivative of the square root at 1: falling factorial 0.375,
    // against the five-point stencil. The step balances the h^2 truncation
    // against the eps/h^3 cancellation loss; much smaller steps drown in
    // round-off.
    let f = BernsteinFn::stable(0.5).unwrap();
    assert_relative_eq!(f.nth_deriv(1.0, 3).unwrap(), 0.375, max_relative = 1e-14);
    let h = 8e-4;
    let g = |x: f64| f.value(x).unwrap();
    let numeric =
        (g(1.0 + 2.0 * h) - 2.0 * g(1.0 + h) + 2.0 * g(1.0 - h) - g(1.0 - 2.0 * h))
            / (2.0 * h * h * h);
    assert_relative_eq!(0.375, numeric, max_relative = 1e-5);
}

#[test]
fn sampling_respects_kind_structure() {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    for f in all_kinds() {
        for _ in 0..500 {
            let draw = f.sample(0.8, &mut rng).unwrap();
            assert!(draw.value.is_finite() && draw.value >= 0.0, "{}", f.kind_name());
        }
        assert_eq!(f.sample(0.0, &mut rng).unwrap().value, 0.0);
    }

    let poisson = BernsteinFn::poisson(2.0).unwrap();
    for _ in 0..500 {
        let v = poisson.sample(1.3, &mut rng).unwrap().value;
        assert_eq!(v.fract(), 0.0, "integer-valued kind drew {v}");
    }

    let linear = BernsteinFn::linear(3.0).unwrap();
    for t in [0.1, 1.0, 2.5] {
        assert_eq!(linear.sample(t, &mut rng).unwrap().value, 3.0 * t);
    }
}

#[test]
fn poisson_kind_mean_is_its_intensity() {
    let f = BernsteinFn::poisson(2.0).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    let n = 30_000u64;
    let mut sum = 0.0;
    for _ in 0..n {
        sum += f.sample(1.0, &mut rng).unwrap().value;
    }
    let mean = sum / n as f64;
    let se = (2.0 / n as f64).sqrt();
    assert!((mean - 2.0).abs() <= 4.0 * se, "mean={mean} se={se}");
}

#[test]
fn reciprocal_derivatives_match_hand_values() {
    let stable = BernsteinFn::stable(0.5).unwrap();
    assert_relative_eq!(
        stable.reciprocal_nth_deriv(4.0, 0).unwrap().value,
        0.5,
        max_relative = 1e-14
    );
    assert_relative_eq!(
        stable.reciprocal_nth_deriv(1.0, 1).unwrap().value,
        -0.5,
        max_relative = 1e-14
    );
    let linear = BernsteinFn::linear(1.5).unwrap();
    assert_relative_eq!(
        linear.reciprocal_nth_deriv(2.0, 2).unwrap().value,
        1.0 / (4.0 * 1.5),
        max_relative = 1e-12
    );
}

#[test]
fn difference_fallback_degrades_then_refuses() {
    for f in [
        BernsteinFn::gamma(1.2, 0.8).unwrap(),
        BernsteinFn::poisson(2.0).unwrap(),
    ] {
        for n in 0..=6u32 {
            assert!(!f.reciprocal_nth_deriv(1.0, n).unwrap().degraded, "n={n}");
        }
        for n in 7..=FD_MAX_ORDER {
            assert!(f.reciprocal_nth_deriv(1.0, n).unwrap().degraded, "n={n}");
        }
        match f.reciprocal_nth_deriv(1.0, FD_MAX_ORDER + 1) {
            Err(Error::DerivativeUnavailable { order, .. }) => {
                assert_eq!(order, FD_MAX_ORDER + 1)
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    // Analytic kinds never degrade.
    let stable = BernsteinFn::stable(0.7).unwrap();
    assert!(!stable.reciprocal_nth_deriv(1.0, 12).unwrap().degraded);
    let linear = BernsteinFn::linear(2.0).unwrap();
    assert!(!linear.reciprocal_nth_deriv(1.0, 12).unwrap().degraded);
}

#[test]
fn parameter_domains_are_enforced() {
    assert!(BernsteinFn::stable(0.0).is_err());
    assert!(BernsteinFn::stable(1.0).is_err());
    assert!(BernsteinFn::gamma(0.0, 1.0).is_err());
    assert!(BernsteinFn::gamma(1.0, -1.0).is_err());
    assert!(BernsteinFn::poisson(0.0).is_err());
    assert!(BernsteinFn::linear(0.0).is_err());
}

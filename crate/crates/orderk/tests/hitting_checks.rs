//! Hitting-time validation: the renewal recursion against skeleton Monte
//! Carlo, closed forms against the recursion (including the levels where
//! they genuinely part ways), density quadrature, and limit laws.

use approx::assert_relative_eq;
use orderk::exactdist::{jump_law_u, jump_law_z, JumpLaw};
use orderk::hitting::{
    closed_form_hit_density_z, closed_form_hit_prob_u, closed_form_hit_prob_w,
    closed_form_hit_prob_y, closed_form_hit_prob_z, hit_prob_by_last_jump,
    hit_prob_by_recursion, iterated_hit_prob_general, mc_hit_prob, visit_probabilities,
    HitQuery,
};
use orderk::params::{OrderParams, WeightTable};
use orderk::simulate::{Process, SimConfig};
use orderk::subordinators::BernsteinFn;

fn params(i: u32, lambda: f64) -> OrderParams {
    OrderParams::new(i, lambda, 1.0).unwrap()
}

fn mc_cases() -> Vec<(Process, u64)> {
    let g = WeightTable::new(vec![2, 2, 5]).unwrap();
    let stable = BernsteinFn::stable(0.5).unwrap();
    vec![
        (Process::y(params(2, 1.0)), 1),
        (Process::y(params(2, 1.0)), 4),
        (Process::y(params(2, 1.0)), 10),
        (Process::y(params(3, 1.0)), 2),
        (Process::y(params(3, 1.0)), 6),
        (Process::z(params(3, 1.0), g.clone()).unwrap(), 2),
        (Process::z(params(3, 1.0), g).unwrap(), 7),
        (Process::u(params(2, 1.0), 1.0).unwrap(), 1),
        (Process::u(params(2, 1.0), 1.0).unwrap(), 3),
        (Process::w(params(2, 1.0), stable), 2),
        (Process::w(params(2, 1.0), stable), 6),
    ]
}

#[test]
fn recursion_agrees_with_skeleton_monte_carlo() {
    let cfg = SimConfig::new(20_000, 1234, 4, 1.0).unwrap();
    for (process, level) in mc_cases() {
        let query = HitQuery::new(process, level).unwrap();
        let exact = hit_prob_by_recursion(&query.jump_law().unwrap(), level);
        let mc = mc_hit_prob(&query, &cfg).unwrap();
        assert!(
            (mc.estimate - exact).abs() <= 3.0 * mc.halfwidth_95,
            "{} k={level}: mc={} exact={exact} hw={}",
            query.process().label(),
            mc.estimate,
            mc.halfwidth_95
        );
    }
}

#[test]
fn last_jump_form_is_identical_to_the_recursion() {
    let laws: Vec<JumpLaw> = vec![
        jump_law_z(&WeightTable::consecutive(1)),
        jump_law_z(&WeightTable::consecutive(3)),
        jump_law_z(&WeightTable::new(vec![2, 2, 5]).unwrap()),
        jump_law_u(&params(2, 1.0), 1e-12).unwrap(),
        BernsteinFn::stable(0.5)
            .map(|f| orderk::exactdist::jump_law_w(&f, &params(2, 1.0), 64, 1e-9).unwrap())
            .unwrap(),
    ];
    for law in &laws {
        for k in 0..=20u64 {
            let a = hit_prob_by_recursion(law, k);
            let b = hit_prob_by_last_jump(law, k);
            assert!(
                (a - b).abs() <= 1e-12,
                "k={k}: recursion {a} vs last-jump {b}"
            );
        }
    }
}

#[test]
fn order_law_closed_forms_and_their_frozen_discrepancies() {
    // Below the order the ladder value matches the recursion.
    for i in [2u32, 3, 5] {
        let law = jump_law_z(&WeightTable::consecutive(i));
        assert_relative_eq!(
            closed_form_hit_prob_y(i, 1),
            hit_prob_by_recursion(&law, 1),
            max_relative = 1e-12
        );
    }
    // At (i=3, k=2) and (i=2, k=2) the two routes give different numbers;
    // both are pinned and the comparison report carries the disagreement.
    let law3 = jump_law_z(&WeightTable::consecutive(3));
    assert_relative_eq!(closed_form_hit_prob_y(3, 2), 2.0 / 3.0, max_relative = 1e-15);
    assert_relative_eq!(
        hit_prob_by_recursion(&law3, 2),
        4.0 / 9.0,
        max_relative = 1e-12
    );
    let law2 = jump_law_z(&WeightTable::consecutive(2));
    assert_eq!(closed_form_hit_prob_y(2, 2), 1.0);
    assert_relative_eq!(
        hit_prob_by_recursion(&law2, 2),
        3.0 / 4.0,
        max_relative = 1e-12
    );
    // At and above the order the closed form saturates.
    assert_eq!(closed_form_hit_prob_y(3, 3), 1.0);
    assert_eq!(closed_form_hit_prob_y(3, 17), 1.0);
    assert_eq!(closed_form_hit_prob_y(4, 0), 1.0);
    // Order 1 is degenerate: every level is hit with certainty, both ways.
    let law1 = jump_law_z(&WeightTable::consecutive(1));
    for k in 0..=9u64 {
        assert_eq!(closed_form_hit_prob_y(1, k), 1.0);
        assert_relative_eq!(hit_prob_by_recursion(&law1, k), 1.0, max_relative = 1e-12);
    }
}

#[test]
fn weighted_closed_form_counts_reachable_weights() {
    let g = WeightTable::new(vec![2, 2, 5]).unwrap();
    assert_eq!(closed_form_hit_prob_z(&g, 1), 0.0);
    assert_relative_eq!(closed_form_hit_prob_z(&g, 2), 2.0 / 3.0, max_relative = 1e-15);
    assert_relative_eq!(closed_form_hit_prob_z(&g, 4), 2.0 / 3.0, max_relative = 1e-15);
    assert_eq!(closed_form_hit_prob_z(&g, 5), 1.0);
    assert_eq!(closed_form_hit_prob_z(&g, 9), 1.0);

    // The recursion agrees at the first reachable level and then drifts
    // below the closed form, exactly as for the consecutive weights.
    let law = jump_law_z(&g);
    assert_relative_eq!(hit_prob_by_recursion(&law, 2), 2.0 / 3.0, max_relative = 1e-12);
    assert_relative_eq!(hit_prob_by_recursion(&law, 4), 4.0 / 9.0, max_relative = 1e-12);
    assert_relative_eq!(hit_prob_by_recursion(&law, 5), 1.0 / 3.0, max_relative = 1e-12);
}

/// Simpson quadrature of the hitting-time density over `[0, s_max]`.
fn density_integral(g: &WeightTable, p: &OrderParams, k: u64, s_max: f64, steps: u64) -> f64 {
    let h = s_max / steps as f64;
    let eval = |s: f64| closed_form_hit_density_z(g, p, k, s).unwrap();
    let mut acc = eval(0.0) + eval(s_max);
    for j in 1..steps {
        let weight = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += weight * eval(j as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn hitting_density_integrates_to_the_recursion_value() {
    // Total mass of the hitting-time density is the probability the level is
    // ever visited, which the renewal recursion computes independently.
    let cases = [
        (vec![2u64, 2, 5], 0.8, 2u64),
        (vec![2, 2, 5], 0.8, 5),
        (vec![1, 2], 1.0, 3),
    ];
    for (weights, lambda, k) in cases {
        let g = WeightTable::new(weights.clone()).unwrap();
        let p = OrderParams::new(g.order(), lambda, 1.0).unwrap();
        let law = jump_law_z(&g);
        let integral = density_integral(&g, &p, k, 30.0, 3000);
        let recursion = hit_prob_by_recursion(&law, k);
        assert!(
            (integral - recursion).abs() <= 1e-6,
            "weights={weights:?} k={k}: integral {integral} vs recursion {recursion}"
        );
    }
}

#[test]
fn density_point_values_and_domains() {
    // Order 1, level 1: a first jump at s needs no prior events, so the
    // density is the bare event density lambda e^{-lambda s}.
    let g = WeightTable::consecutive(1);
    let p = params(1, 1.0);
    let s = 0.7;
    assert_relative_eq!(
        closed_form_hit_density_z(&g, &p, 1, s).unwrap(),
        (-s).exp(),
        max_relative = 1e-12
    );
    assert!(closed_form_hit_density_z(&g, &p, 0, 1.0).is_err());
    assert!(closed_form_hit_density_z(&g, &p, 1, -1.0).is_err());
    assert!(closed_form_hit_density_z(&g, &p, 1, f64::NAN).is_err());
}

#[test]
fn time_changed_closed_form_matches_the_recursion_grid() {
    for alpha in [0.3, 0.5, 0.8] {
        let f = BernsteinFn::stable(alpha).unwrap();
        for i in [1u32, 2, 3] {
            let p = params(i, 1.0);
            for k in 1..=6u64 {
                let closed = closed_form_hit_prob_w(&f, &p, k).unwrap();
                assert!(!closed.degraded);
                let law = orderk::exactdist::jump_law_w(&f, &p, k, 1e-9).unwrap();
                let recursion = hit_prob_by_recursion(&law, k);
                assert!(
                    (closed.value - recursion).abs() <= 1e-6,
                    "alpha={alpha} i={i} k={k}: closed {} vs recursion {recursion}",
                    closed.value
                );
            }
        }
    }
    // Same identity along the finite-difference route.
    let f = BernsteinFn::gamma(1.3, 0.9).unwrap();
    for i in [1u32, 2] {
        let p = params(i, 1.0);
        for k in 1..=6u64 {
            let closed = closed_form_hit_prob_w(&f, &p, k).unwrap();
            assert!(!closed.degraded, "i={i} k={k}");
            let law = orderk::exactdist::jump_law_w(&f, &p, k, 1e-9).unwrap();
            let recursion = hit_prob_by_recursion(&law, k);
            assert!(
                (closed.value - recursion).abs() <= 1e-6,
                "gamma i={i} k={k}: closed {} vs recursion {recursion}",
                closed.value
            );
        }
    }
}

#[test]
fn stable_first_level_is_the_index() {
    for alpha in [0.3, 0.5, 0.8] {
        let f = BernsteinFn::stable(alpha).unwrap();
        let law = orderk::exactdist::jump_law_w(&f, &params(1, 1.0), 8, 1e-9).unwrap();
        assert_relative_eq!(law.prob_of(1), alpha, max_relative = 1e-14);
        let closed = closed_form_hit_prob_w(&f, &params(1, 1.0), 1).unwrap();
        assert_relative_eq!(closed.value, alpha, max_relative = 1e-12);
    }
}

#[test]
fn doubly_stochastic_closed_forms_match_the_recursion() {
    for i in [1u32, 2] {
        for lambda in [0.5, 1.0] {
            let p = params(i, lambda);
            let law = jump_law_u(&p, 1e-12).unwrap();
            for k in [1u64, 2] {
                let closed = closed_form_hit_prob_u(&p, k).unwrap();
                let recursion = hit_prob_by_recursion(&law, k);
                assert!(
                    (closed - recursion).abs() <= 1e-9,
                    "i={i} lambda={lambda} k={k}: closed {closed} vs recursion {recursion}"
                );
            }
        }
    }
    // Order 1 admits a closed form at every level; it must collapse to the
    // first-level expression at k=1 and track the recursion to depth 5.
    for lambda in [0.5, 1.0] {
        let p = params(1, lambda);
        let law = jump_law_u(&p, 1e-12).unwrap();
        // The series tolerance bounds dropped absolute mass, so it must sit
        // below the comparison tolerance.
        assert_relative_eq!(
            iterated_hit_prob_general(lambda, 1, 1e-14).unwrap(),
            closed_form_hit_prob_u(&p, 1).unwrap(),
            max_relative = 1e-12
        );
        for k in 1..=5u64 {
            let general = iterated_hit_prob_general(lambda, k, 1e-12).unwrap();
            let recursion = hit_prob_by_recursion(&law, k);
            assert!(
                (general - recursion).abs() <= 1e-9,
                "lambda={lambda} k={k}: general {general} vs recursion {recursion}"
            );
        }
    }
}

#[test]
fn renewal_limits_reach_reciprocal_mean_jumps() {
    // Uniform jumps on 1..=i: mean (i+1)/2, limit 2/(i+1).
    for i in [1u32, 2, 3, 5] {
        let law = jump_law_z(&WeightTable::consecutive(i));
        let v = visit_probabilities(&law, 200);
        let limit = 2.0 / (f64::from(i) + 1.0);
        assert!(
            (v[200] - limit).abs() <= 1e-6,
            "i={i}: v(200)={} limit={limit}",
            v[200]
        );
    }
    // Aperiodic weighted law {2: 2/3, 5: 1/3}: mean jump 3.
    let law = jump_law_z(&WeightTable::new(vec![2, 2, 5]).unwrap());
    let v = visit_probabilities(&law, 300);
    assert!((v[300] - 1.0 / 3.0).abs() <= 1e-8, "v(300)={}", v[300]);
    // Conditioned unit-window law of the doubly stochastic chain.
    let p = params(2, 1.0);
    let law = jump_law_u(&p, 1e-12).unwrap();
    let v = visit_probabilities(&law, 300);
    let limit = 1.0 / law.mean_jump();
    assert!((v[300] - limit).abs() <= 1e-8, "v(300)={} limit={limit}", v[300]);
}

#[test]
fn three_way_reports_flag_agreement_truthfully() {
    use orderk::hitting::hit_report;
    let cfg = SimConfig::new(50_000, 4321, 4, 1.0).unwrap();

    // The two routes disagree here; the report must carry both values and
    // say so without erroring.
    let report = hit_report(
        &HitQuery::new(Process::y(params(3, 1.0)), 2).unwrap(),
        &cfg,
    )
    .unwrap();
    assert_relative_eq!(report.closed_form_value.unwrap(), 2.0 / 3.0, max_relative = 1e-12);
    assert_relative_eq!(report.recursion_value, 4.0 / 9.0, max_relative = 1e-12);
    assert_eq!(report.closed_form_agrees_with_recursion, Some(false));
    assert!(report.recursion_agrees_with_mc);
    assert!(!report.degraded);

    // Subordinated process: both routes coincide.
    let f = BernsteinFn::stable(0.5).unwrap();
    let report = hit_report(
        &HitQuery::new(Process::w(params(1, 1.0), f), 2).unwrap(),
        &cfg,
    )
    .unwrap();
    assert_eq!(report.closed_form_agrees_with_recursion, Some(true));
    assert!(report.recursion_agrees_with_mc);

    // No closed form for deep levels of the order-2 doubly stochastic chain;
    // the recursion and the simulation still cross-check each other.
    let report = hit_report(
        &HitQuery::new(Process::u(params(2, 1.0), 1.0).unwrap(), 3).unwrap(),
        &cfg,
    )
    .unwrap();
    assert!(report.closed_form_value.is_none());
    assert_eq!(report.closed_form_agrees_with_recursion, None);
    assert!(report.recursion_agrees_with_mc);
}

#[test]
fn queries_enforce_domains() {
    assert!(HitQuery::new(Process::y(params(2, 1.0)), 0).is_err());

    let query = HitQuery::new(Process::y(params(2, 1.0)), 3).unwrap();
    let tiny = SimConfig::new(999, 1, 1, 1.0).unwrap();
    assert!(mc_hit_prob(&query, &tiny).is_err());

    // Deterministic chain: the estimate is exactly 1 with a zero halfwidth.
    let sure = HitQuery::new(Process::y(params(1, 1.0)), 5).unwrap();
    let cfg = SimConfig::new(2_000, 2, 2, 1.0).unwrap();
    let mc = mc_hit_prob(&sure, &cfg).unwrap();
    assert_eq!(mc.estimate, 1.0);
    assert_eq!(mc.halfwidth_95, 0.0);
    assert_eq!(mc.n_escaped, 0);

    // The law behind a level-k query never carries sizes above k.
    let f = BernsteinFn::stable(0.5).unwrap();
    let query = HitQuery::new(Process::w(params(2, 1.0), f), 3).unwrap();
    let law = query.jump_law().unwrap();
    assert!(law.sizes().iter().all(|&s| s <= 3));
}

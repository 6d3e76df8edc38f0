//! Oracle-backed limit cycle tests: long-run attractor convergence,
//! multipliers against finite differences, seed-count invariance, the
//! small-cycle period limit and big-cycle detection.

use kukles::cycles::{
    count_cycles, detect_big_cycle, displacement, find_cycle, return_map, return_map_derivative,
    CycleConfig, Section, Stability,
};
use kukles::integrate::TrajectoryStatus;
use kukles::integrate::{integrate, IntegratorConfig};
use kukles::model::{
    eigenvalues_from_trace_det, jacobian, mirror_about_x1, CanonicalParams, QCase, State,
};

// The stable loop-born cycle regime around the origin (oracle-derived: the
// left homoclinic closure sits at alpha2 ~ -0.0623 for alpha0 = beta = 0.05).
fn gamma1_regime() -> CanonicalParams {
    CanonicalParams {
        q_case: QCase::Case1 { a: 2.0 },
        c: 0.0,
        d: 0.0,
        alpha0: 0.05,
        alpha2: -0.066,
        beta: 0.05,
        gamma: 0.0,
    }
}

fn o_section() -> Section {
    Section::horizontal(State::new(0.0, 0.0), true)
}

/// Iterated-return-map oracle: follow successive crossings until the radius
/// settles; the limit is a stable cycle's section coordinate.
fn attractor_radius(p: &CanonicalParams, r0: f64, cfg: &CycleConfig) -> f64 {
    let sec = o_section();
    let mut r = r0;
    for _ in 0..6000 {
        let (next, _) = return_map(p, &sec, r, cfg).expect("oracle orbit must return");
        if (next - r).abs() < 1e-9 {
            return next;
        }
        r = next;
    }
    r
}

#[test]
fn stable_cycle_found_where_the_oracle_converges() {
    let p = gamma1_regime();
    let cfg = CycleConfig {
        return_t_max: 3000.0,
        ..Default::default()
    };
    // Inner and outer starts converge to a common radius.
    let from_inside = attractor_radius(&p, 0.4, &cfg);
    let from_outside = attractor_radius(&p, 0.9, &cfg);
    assert!(
        (from_inside - from_outside).abs() < 5e-7,
        "oracle radii disagree: {from_inside} vs {from_outside}"
    );

    let cycle = find_cycle(&p, &o_section(), 0.5, &cfg).expect("find_cycle converges");
    assert!((cycle.section_coord - from_inside).abs() < 1e-6);
    assert_eq!(cycle.stability, Stability::Stable);
    assert!(cycle.multiplier < 1.0);
    // Fixed-point residual below the Newton tolerance.
    let (ret, _) = return_map(&p, &o_section(), cycle.section_coord, &cfg).unwrap();
    assert!((ret - cycle.section_coord).abs() < cfg.newton_tol);
    // The cycle winds once around the origin only.
    assert_eq!(cycle.enclosed, vec![State::new(0.0, 0.0)]);
}

#[test]
fn multiplier_agrees_with_return_map_derivative() {
    let p = gamma1_regime();
    let cfg = CycleConfig {
        return_t_max: 3000.0,
        ..Default::default()
    };
    let cycle = find_cycle(&p, &o_section(), 0.5, &cfg).unwrap();
    let fd = return_map_derivative(&p, &o_section(), cycle.section_coord, 1e-6, &cfg).unwrap();
    assert!(
        (cycle.multiplier - fd).abs() <= 1e-4 * fd.abs(),
        "monodromy {} vs finite differences {}",
        cycle.multiplier,
        fd
    );
}

#[test]
fn counts_invariant_under_seed_doubling() {
    let cfg = CycleConfig {
        return_t_max: 3000.0,
        ..Default::default()
    };
    let sec = o_section();
    // Regression parameter sets: one, two and zero cycles around O.
    let regimes = [
        gamma1_regime(),
        CanonicalParams {
            beta: 0.0502,
            alpha2: -0.0643,
            ..gamma1_regime()
        },
        CanonicalParams::symmetric(QCase::Case1 { a: 2.0 }, 1.0, -0.5),
    ];
    for p in regimes {
        let a = count_cycles(&p, &sec, 1e-3, 0.95, 24, &cfg);
        let b = count_cycles(&p, &sec, 1e-3, 0.95, 48, &cfg);
        assert_eq!(a.cycles.len(), b.cycles.len(), "count changed for {p:?}");
        for (ca, cb) in a.cycles.iter().zip(&b.cycles) {
            assert!((ca.section_coord - cb.section_coord).abs() < 1e-6);
        }
    }
}

#[test]
fn adjacent_cycles_alternate_stability() {
    let p = CanonicalParams {
        beta: 0.0502,
        alpha2: -0.0643,
        ..gamma1_regime()
    };
    let cfg = CycleConfig {
        return_t_max: 3000.0,
        ..Default::default()
    };
    let scan = count_cycles(&p, &o_section(), 1e-3, 0.95, 48, &cfg);
    assert_eq!(scan.cycles.len(), 2);
    assert_eq!(scan.cycles[0].stability, Stability::Unstable);
    assert_eq!(scan.cycles[1].stability, Stability::Stable);
}

#[test]
fn small_cycle_period_approaches_the_linear_limit() {
    // A weak-focus crossing with a large first focal value keeps the
    // Hopf-born cycle small; oracle-chosen alpha2 > 0 does that at O.
    let p = CanonicalParams {
        q_case: QCase::Case1 { a: 2.0 },
        c: 0.0,
        d: 0.0,
        alpha0: 0.05,
        alpha2: 0.3,
        beta: 0.05 + 8e-6,
        gamma: 0.0,
    };
    let cfg = CycleConfig::default();
    let sec = o_section();
    // Bracket the displacement sign change by hand.
    let mut lo = 2e-3;
    let mut dlo = displacement(&p, &sec, lo, &cfg).unwrap();
    let mut hi = 0.05;
    let dhi = displacement(&p, &sec, hi, &cfg).unwrap();
    assert!(dlo * dhi < 0.0, "no small cycle bracketed ({dlo}, {dhi})");
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let dm = displacement(&p, &sec, mid, &cfg).unwrap();
        if dm.abs() < 1e-11 {
            lo = mid;
            break;
        }
        if (dm > 0.0) == (dlo > 0.0) {
            lo = mid;
            dlo = dm;
        } else {
            hi = mid;
        }
    }
    let r_star = lo;
    let (_, period) = return_map(&p, &sec, r_star, &cfg).unwrap();
    assert!(r_star < 1e-2, "cycle not small: r = {r_star}");

    let j = jacobian(&p, State::new(0.0, 0.0));
    let (l1, _) = eigenvalues_from_trace_det(j.trace(), j.det());
    let linear_period = std::f64::consts::TAU / l1.im.abs();
    assert!(
        (period - linear_period).abs() <= 0.01 * linear_period,
        "period {period} vs linear limit {linear_period}"
    );
}

#[test]
fn big_cycle_oracle_and_detection() {
    let base = CanonicalParams {
        q_case: QCase::Case1 { a: 2.0 },
        c: 0.0,
        d: 0.0,
        alpha0: 0.05,
        alpha2: 0.0,
        beta: 0.05,
        gamma: 0.0,
    };
    let cfg = CycleConfig {
        return_t_max: 3000.0,
        ..Default::default()
    };

    // Oracle: inward integration from radius 50 converges to a bounded
    // attractor once the negative rotation is strong enough.
    let icfg = IntegratorConfig {
        t_max: 600.0,
        ..Default::default()
    };
    let p_on = CanonicalParams {
        alpha2: -0.0147,
        ..base
    };
    let probe = integrate(&p_on, State::new(51.0, 0.0), &icfg, &[]);
    assert_ne!(
        probe.status,
        TrajectoryStatus::Escaped,
        "oracle probe escaped"
    );

    let found = detect_big_cycle(&p_on, &cfg);
    let cycle = found.cycle.expect("big cycle detected below the onset");
    assert_eq!(cycle.enclosed.len(), 3, "must wind around all three points");
    assert_eq!(cycle.stability, Stability::Stable);

    // At alpha2 = 0 the rotation has not yet created it.
    let probe0 = integrate(&base, State::new(51.0, 0.0), &icfg, &[]);
    assert_eq!(probe0.status, TrajectoryStatus::Escaped);
    assert!(detect_big_cycle(&base, &cfg).cycle.is_none());
}

#[test]
fn mirror_symmetry_swaps_the_anti_saddle_counts() {
    // On the involution locus beta = -2 alpha2 (c = d = 0) the counts and
    // coordinates around O and A coincide exactly.
    let p = CanonicalParams {
        q_case: QCase::Case1 { a: 2.0 },
        c: 0.0,
        d: 0.0,
        alpha0: 0.05,
        alpha2: -0.064,
        beta: 0.128,
        gamma: 0.0775,
    };
    assert_eq!(mirror_about_x1(&p).unwrap(), p);
    let cfg = CycleConfig {
        return_t_max: 3000.0,
        ..Default::default()
    };
    let around_o = count_cycles(&p, &o_section(), 5e-4, 0.95, 40, &cfg);
    let around_a = count_cycles(
        &p,
        &Section::horizontal(State::new(2.0, 0.0), false),
        5e-4,
        0.95,
        40,
        &cfg,
    );
    assert_eq!(around_o.cycles.len(), around_a.cycles.len());
    for (co, ca) in around_o.cycles.iter().zip(&around_a.cycles) {
        assert!((co.section_coord - ca.section_coord).abs() < 1e-5);
        assert!((co.multiplier - ca.multiplier).abs() < 1e-5);
    }
}

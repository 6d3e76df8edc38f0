//! Convergence, reversibility and event-location properties of the
//! integrator.

use kukles::integrate::{
    integrate, integrate_directed, CrossingDirection, Event, IntegratorConfig,
};
use kukles::model::{CanonicalParams, QCase, State};

fn test_points() -> Vec<(CanonicalParams, State)> {
    let mut out = Vec::new();
    let p1 = CanonicalParams::hamiltonian(QCase::Case1 { a: 2.0 });
    out.push((p1, State::new(0.4, 0.1)));
    out.push((p1, State::new(1.8, -0.2)));
    let mut p2 = CanonicalParams::hamiltonian(QCase::Case2 { b: -1.0 });
    p2.alpha0 = 0.03;
    p2.c = 0.2;
    out.push((p2, State::new(0.5, 0.5)));
    let mut p3 = CanonicalParams::hamiltonian(QCase::Case3);
    p3.beta = 0.1;
    p3.d = -0.3;
    out.push((p3, State::new(0.3, -0.2)));
    out
}

#[test]
fn halving_tolerances_moves_terminal_states_within_bound() {
    for (p, s0) in test_points() {
        let coarse = IntegratorConfig {
            t_max: 20.0,
            ..Default::default()
        };
        let fine = coarse.halved();
        let a = integrate(&p, s0, &coarse, &[]);
        let b = integrate(&p, s0, &fine, &[]);
        let diff = a.final_state().dist(b.final_state());
        assert!(
            diff <= 10.0 * coarse.rtol,
            "terminal shift {diff:.3e} exceeds 10x rtol for {s0:?}"
        );
    }
}

#[test]
fn forward_backward_returns_to_start() {
    for (p, s0) in test_points() {
        let cfg = IntegratorConfig {
            t_max: 10.0,
            ..Default::default()
        };
        let fwd = integrate(&p, s0, &cfg, &[]);
        let back = integrate_directed(&p, fwd.final_state(), &cfg, &[], true);
        let err = back.final_state().dist(s0);
        assert!(
            err <= 100.0 * cfg.rtol * s0.norm().max(1.0),
            "time reversal error {err:.3e} for {s0:?}"
        );
    }
}

#[test]
fn reversible_orbit_returns_symmetric_in_time() {
    // The x-axis symmetric system: orbits through (x0, 0) close after two
    // axis crossings, with the full return at twice the half-period.
    let p = CanonicalParams::symmetric(QCase::Case1 { a: 2.0 }, 0.8, -0.4);
    let cfg = IntegratorConfig {
        t_max: 50.0,
        ..Default::default()
    };
    for x0 in [0.2, 0.45, 0.6] {
        let ev = Event::new("axis", CrossingDirection::Any, false, |_t, s: State| s.y);
        let traj = integrate(&p, State::new(x0, 0.0), &cfg, &[ev]);
        assert!(traj.events.len() >= 2, "missing axis crossings for x0={x0}");
        let first = &traj.events[0];
        let second = &traj.events[1];
        assert!(first.state.y.abs() < cfg.event_tol);
        assert!(
            (second.t - 2.0 * first.t).abs() < 1e-7,
            "return not time-symmetric: t1={} t2={}",
            first.t,
            second.t
        );
        assert!((second.state.x - x0).abs() < 1e-7);
    }
}

#[test]
fn conservation_for_every_preset() {
    use kukles::model::first_integral;
    // One representative bounded orbit per branch over a long window.
    for q in QCase::presets() {
        let p = CanonicalParams::hamiltonian(q);
        let h = first_integral(q);
        let s0 = State::new(0.3, 0.1);
        let h0 = h.value(s0);
        let cfg = IntegratorConfig {
            t_max: 100.0,
            ..Default::default()
        };
        let traj = integrate(&p, s0, &cfg, &[]);
        let drift = traj
            .samples
            .iter()
            .map(|(_, s)| (h.value(*s) - h0).abs())
            .fold(0.0f64, f64::max);
        assert!(
            drift / (1.0 + h0.abs()) <= 1e-9,
            "H drift {drift:.3e} for {q:?}"
        );
    }
}

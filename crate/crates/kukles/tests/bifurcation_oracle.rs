//! Oracle-backed separatrix, homoclinic and continuation tests.

use kukles::bifurcation::{
    continue_cycle, eight_loop_find, homoclinic_gap, hopf_value, separatrices, BranchLabel,
    EightLoopConfig, FocusId, HomoclinicConfig, StepConfig,
};
use kukles::cycles::{count_cycles, find_cycle, CycleConfig, Section, Stability};
use kukles::integrate::{integrate, IntegratorConfig};
use kukles::model::{
    eval_field, finite_singularities, first_integral, jacobian, CanonicalParams, ParamId, QCase,
    SingularityKind, State,
};

fn hamiltonian_a2() -> CanonicalParams {
    CanonicalParams::hamiltonian(QCase::Case1 { a: 2.0 })
}

fn saddle_of(p: &CanonicalParams) -> kukles::model::Singularity {
    finite_singularities(p)
        .into_iter()
        .find(|s| s.kind == SingularityKind::Saddle)
        .expect("saddle exists")
}

#[test]
fn hamiltonian_separatrix_loops_lie_on_the_saddle_level() {
    let p = hamiltonian_a2();
    let h = first_integral(p.q_case);
    // H at the saddle (1, 0): 1 - (2/3)(3/2) + 1/4 = 1/4.
    let level = h.value(State::new(1.0, 0.0));
    assert!((level - 0.25).abs() < 1e-15);

    let cfg = IntegratorConfig {
        t_max: 60.0,
        ..Default::default()
    };
    let set = separatrices(&p, &saddle_of(&p), 1e-7, &cfg).unwrap();
    for branch in &set.branches {
        let worst = branch
            .trajectory
            .samples
            .iter()
            .map(|(_, s)| (h.value(*s) - level).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-7, "{}: level drift {worst:.2e}", branch.label);
    }
    // The unstable-left branch closes onto the stable-left branch: in the
    // integrable case it returns to the saddle's neighborhood.
    let u_minus = set.branch(BranchLabel::UnstableMinus);
    let min_dist = u_minus
        .trajectory
        .samples
        .iter()
        .skip(50)
        .map(|(_, s)| s.dist(set.saddle))
        .fold(f64::INFINITY, f64::min);
    assert!(min_dist < 1e-2, "loop does not close: {min_dist}");
}

#[test]
fn separatrix_branches_satisfy_the_field_equation() {
    let mut p = hamiltonian_a2();
    p.alpha0 = 0.03;
    p.c = 0.4;
    let cfg = IntegratorConfig {
        t_max: 12.0,
        max_step: 1e-3,
        ..Default::default()
    };
    let set = separatrices(&p, &saddle_of(&p), 1e-7, &cfg).unwrap();
    for branch in &set.branches {
        let samples = &branch.trajectory.samples;
        let sign = if branch.reversed_time { -1.0 } else { 1.0 };
        for w in samples.windows(2).skip(200).take(200) {
            let (t0, s0) = w[0];
            let (t1, s1) = w[1];
            let dt = t1 - t0;
            let fd = (s1 - s0) * (1.0 / dt);
            let mid = (s0 + s1) * 0.5;
            let f = eval_field(&p, mid) * sign;
            let scale = 1.0 + f.norm();
            assert!(
                (fd - f).norm() < 1e-4 * scale + 1e-2 * dt * dt * scale,
                "{}: residual {:.2e}",
                branch.label,
                (fd - f).norm()
            );
        }
    }
}

#[test]
fn stable_branches_approach_the_saddle_forward_in_time() {
    let mut p = hamiltonian_a2();
    p.alpha0 = 0.02;
    let cfg = IntegratorConfig {
        t_max: 6.0,
        ..Default::default()
    };
    let set = separatrices(&p, &saddle_of(&p), 1e-7, &cfg).unwrap();
    for label in [BranchLabel::StablePlus, BranchLabel::StableMinus] {
        // Points on the stable branch flow toward the saddle forward in time.
        let branch = set.branch(label);
        let far = branch.trajectory.final_state();
        let fwd = integrate(&p, far, &cfg, &[]);
        let d0 = far.dist(set.saddle);
        let d1 = fwd.final_state().dist(set.saddle);
        assert!(d1 < d0, "{label}: {d1} !< {d0}");
    }
}

#[test]
fn gap_is_monotone_in_alpha2_over_the_bracketing_interval() {
    let mut p = hamiltonian_a2();
    p.alpha0 = 0.05;
    p.beta = 0.05;
    let cfg = HomoclinicConfig::default();
    let mut previous = f64::INFINITY;
    for alpha2 in [-0.04, -0.048, -0.056, -0.064, -0.072, -0.08] {
        let g = homoclinic_gap(
            &p.with(ParamId::Alpha2, alpha2),
            kukles::bifurcation::LoopSide::Left,
            &cfg,
        )
        .unwrap();
        assert!(g < previous, "gap not monotone at alpha2 = {alpha2}");
        previous = g;
    }
}

#[test]
fn eight_loop_on_the_wide_bracket() {
    let mut p = hamiltonian_a2();
    p.alpha0 = 0.05;
    p.beta = 0.05;
    let cfg = EightLoopConfig::default();
    let result = eight_loop_find(&p, (-0.5, 0.0), &cfg).unwrap();
    assert!(result.gap_left_residual.abs() < 1e-8);
    assert!(result.gap_right_residual.abs() < 1e-8);
    // Oracle-measured one-sided homoclinic values at this base.
    assert!(
        (result.alpha2_left - -0.06234).abs() < 5e-4,
        "{}",
        result.alpha2_left
    );
    assert!(
        (result.alpha2_right - -0.02644).abs() < 5e-4,
        "{}",
        result.alpha2_right
    );
    assert!(result.difference > 0.03);
}

#[test]
fn hopf_critical_value_properties() {
    let mut p = hamiltonian_a2();
    p.alpha0 = 0.07;
    p.gamma = 0.01;
    let cfg = CycleConfig::default();
    for (focus, free) in [
        (FocusId::O, ParamId::Beta),
        (FocusId::O, ParamId::Gamma),
        (FocusId::A, ParamId::Alpha2),
        (FocusId::A, ParamId::Beta),
    ] {
        let rep = hopf_value(&p, focus, free, &cfg).unwrap();
        let crit = p.with(free, rep.critical_param_value);
        let trace = crit.linear_y_coefficient(rep.singularity.x);
        assert!(trace.abs() < 1e-12, "{focus:?}/{free}: trace {trace:.2e}");
        let eigs = jacobian(&crit, rep.singularity).eigenvalues();
        assert!(eigs.0.re.abs() < 1e-8 && eigs.1.re.abs() < 1e-8);
        assert!(eigs.0.im.abs() > 0.1);
    }
}

#[test]
fn hopf_amplitude_scales_linearly_with_the_offset() {
    // Subcritical crossing at O with a large focal value (alpha2 > 0 keeps
    // the born cycle small); amplitude^2 grows linearly in the offset.
    let base = CanonicalParams {
        q_case: QCase::Case1 { a: 2.0 },
        c: 0.0,
        d: 0.0,
        alpha0: 0.05,
        alpha2: 0.3,
        beta: 0.05,
        gamma: 0.0,
    };
    let cfg = CycleConfig {
        displacement_floor: 1e-9,
        ..Default::default()
    };
    let sec = Section::horizontal(State::new(0.0, 0.0), true);
    let mut amps = Vec::new();
    for offset in [1e-3, 2e-3, 4e-3] {
        let p = base.with(ParamId::Beta, 0.05 + offset);
        let scan = count_cycles(&p, &sec, 1e-3, 0.25, 40, &cfg);
        assert_eq!(scan.cycles.len(), 1, "offset {offset}: {:?}", scan.cycles);
        amps.push(scan.cycles[0].amplitude);
    }
    assert!(amps[0] < 0.15, "first cycle not small: {}", amps[0]);
    for k in 0..2 {
        let ratio = amps[k + 1] * amps[k + 1] / (amps[k] * amps[k]);
        assert!(
            (ratio - 2.0).abs() <= 0.4,
            "amplitude^2 ratio {ratio} outside 2 ± 20%"
        );
    }
}

#[test]
fn rotation_parameter_branch_is_monotone_without_folds() {
    // Continue the loop-born stable cycle in alpha0 (a pure rotation
    // parameter): the section coordinate moves strictly monotonically.
    let p = CanonicalParams {
        q_case: QCase::Case1 { a: 2.0 },
        c: 0.0,
        d: 0.0,
        alpha0: 0.05,
        alpha2: -0.068,
        beta: 0.05,
        gamma: 0.0,
    };
    let cfg = CycleConfig {
        return_t_max: 3000.0,
        ..Default::default()
    };
    let sec = Section::horizontal(State::new(0.0, 0.0), true);
    let cycle0 = find_cycle(&p, &sec, 0.4, &cfg).unwrap();
    let branch = continue_cycle(
        &p,
        &cycle0,
        &sec,
        ParamId::Alpha0,
        (0.05, 0.0515),
        &StepConfig::default(),
        &cfg,
    );
    assert!(
        branch.points.len() >= 4,
        "branch too short: {:?}",
        branch.termination
    );
    assert!(branch.folds.is_empty());
    for w in branch.points.windows(2) {
        assert!(
            w[1].cycle.section_coord > w[0].cycle.section_coord,
            "coordinate not monotone"
        );
        assert!(w[1].param_value > w[0].param_value);
    }
    assert!(branch
        .points
        .iter()
        .all(|pt| pt.cycle.stability == Stability::Stable));
}

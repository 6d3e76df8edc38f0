//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! per sub-clause and its runtime. Tolerances are pinned in code.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kukles::bifurcation::{continue_cycle, FocusId, StepConfig};
use kukles::cycles::{count_cycles, find_cycle, return_map, CycleConfig, Section, Stability};
use kukles::integrate::{integrate, IntegratorConfig};
use kukles::model::{
    finite_singularities, first_integral, rotation_determinant, CanonicalParams, ParamId, QCase,
    SingularityKind, State,
};
use kukles::scan::{census, run_scenario, GridSpec, ScenarioConfig, ScenarioReport, StageData};

struct Clauses {
    criterion: &'static str,
    failures: Vec<String>,
}

impl Clauses {
    fn new(criterion: &'static str) -> Self {
        Clauses {
            criterion,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, label: &str) {
        println!(
            "  [{}] {}: {}",
            self.criterion,
            label,
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            self.failures.push(label.to_string());
        }
    }

    fn finish(self, started: Instant, budget_s: f64) {
        let elapsed = started.elapsed().as_secs_f64();
        let ok = self.failures.is_empty() && elapsed <= budget_s;
        println!(
            "ACCEPTANCE {}: {} ({elapsed:.1}s of {budget_s:.0}s budget)",
            self.criterion,
            if ok { "PASS" } else { "FAIL" }
        );
        assert!(
            elapsed <= budget_s,
            "criterion {} exceeded its {budget_s}s budget ({elapsed:.1}s)",
            self.criterion
        );
        assert!(
            self.failures.is_empty(),
            "criterion {} failed clauses: {:?}",
            self.criterion,
            self.failures
        );
    }
}

fn random_params(rng: &mut impl Rng) -> CanonicalParams {
    let q_case = match rng.gen_range(0..4) {
        0 => QCase::Case1 {
            a: [1.0, -1.0, 2.0, -2.0][rng.gen_range(0..4)],
        },
        1 => QCase::Case1 {
            a: rng.gen_range(0.5..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
        },
        2 => QCase::Case2 {
            b: rng.gen_range(-1.5..0.5),
        },
        _ => QCase::Case3,
    };
    CanonicalParams {
        q_case,
        c: rng.gen_range(-1.0..1.0),
        d: rng.gen_range(-1.0..1.0),
        alpha0: rng.gen_range(-0.5..0.5),
        alpha2: rng.gen_range(-0.5..0.5),
        beta: rng.gen_range(-0.5..0.5),
        gamma: rng.gen_range(-0.5..0.5),
    }
}

#[test]
fn criterion_1_rotation_determinant_identities() {
    let start = Instant::now();
    let mut c = Clauses::new("1 rotation determinants");
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let p = random_params(&mut rng);
        let s = State::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let y2 = s.y * s.y;
        let closed = [y2, s.x * s.x * y2, (s.x - 1.0) * y2, y2 * (1.0 + y2)];
        let computed = [
            rotation_determinant(ParamId::Alpha0, &p, s),
            rotation_determinant(ParamId::Alpha2, &p, s),
            rotation_determinant(ParamId::Beta, &p, s),
            rotation_determinant(ParamId::Gamma, &p, s),
        ];
        for (a, b) in computed.iter().zip(closed.iter()) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    c.check(
        worst <= 1e-12,
        &format!("10^4 samples match closed forms to 1e-12 (worst {worst:.2e})"),
    );
    c.finish(start, 1.0);
}

#[test]
fn criterion_2_first_integral_conservation() {
    let start = Instant::now();
    let mut c = Clauses::new("2 conservation");
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let cfg = IntegratorConfig {
        t_max: 100.0,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for q in QCase::presets() {
        let p = CanonicalParams::hamiltonian(q);
        let h = first_integral(q);
        for _ in 0..20 {
            // Bounded initial data: a disk where every preset's level sets
            // close around the origin.
            let (x, y) = loop {
                let x = rng.gen_range(-0.45..0.45);
                let y = rng.gen_range(-0.45..0.45);
                if x * x + y * y <= 0.45 * 0.45 {
                    break (x, y);
                }
            };
            let s0 = State::new(x, y);
            let h0 = h.value(s0);
            let traj = integrate(&p, s0, &cfg, &[]);
            let drift = traj
                .samples
                .iter()
                .map(|(_, s)| (h.value(*s) - h0).abs())
                .fold(0.0f64, f64::max)
                / (1.0 + h0.abs());
            worst = worst.max(drift);
        }
    }
    c.check(
        worst <= 1e-8,
        &format!("7 presets x 20 orbits over t in [0,100] conserve H to 1e-8 (worst {worst:.2e})"),
    );
    c.finish(start, 30.0);
}

#[test]
fn criterion_3_singularity_census() {
    let start = Instant::now();
    let mut c = Clauses::new("3 singularities");

    let s = finite_singularities(&CanonicalParams::hamiltonian(QCase::Case1 { a: 2.0 }));
    c.check(
        s.len() == 3
            && s[0].kind == SingularityKind::Center
            && s[0].location == State::new(0.0, 0.0)
            && s[1].kind == SingularityKind::Saddle
            && s[1].location == State::new(1.0, 0.0)
            && s[2].kind == SingularityKind::Center
            && s[2].location == State::new(2.0, 0.0),
        "case 1 (a=2): center-candidate, saddle, center-candidate at x = 0, 1, 2",
    );

    let s = finite_singularities(&CanonicalParams::hamiltonian(QCase::Case1 { a: 1.0 }));
    c.check(
        s.len() == 2
            && s[1].kind == SingularityKind::SaddleNode
            && s[1].location == State::new(1.0, 0.0),
        "case 1 (a=1): saddle-node at (1, 0)",
    );

    for b in [0.0, -1.0] {
        let s = finite_singularities(&CanonicalParams::hamiltonian(QCase::Case2 { b }));
        c.check(
            s.len() == 1 && s[0].location == State::new(0.0, 0.0),
            &format!("case 2 (b={b}): only the origin"),
        );
    }

    let s = finite_singularities(&CanonicalParams::hamiltonian(QCase::Case3));
    c.check(
        s.len() == 2
            && s[1].kind == SingularityKind::Saddle
            && s[1].location == State::new(1.0, 0.0),
        "case 3: saddle at (1, 0)",
    );
    c.finish(start, 1.0);
}

#[test]
fn criterion_4_symmetric_systems_have_no_cycles() {
    let start = Instant::now();
    let mut c = Clauses::new("4 symmetric system");
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let cfg = CycleConfig {
        return_t_max: 2000.0,
        ..Default::default()
    };
    for k in 0..5 {
        let (cc, dd) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let p = CanonicalParams::symmetric(QCase::Case1 { a: 2.0 }, cc, dd);
        let sec_o = Section::horizontal(State::new(0.0, 0.0), true);
        let sec_a = Section::horizontal(State::new(2.0, 0.0), false);
        let count_o = count_cycles(&p, &sec_o, 0.05, 0.9, 24, &cfg).cycles.len();
        let count_a = count_cycles(&p, &sec_a, 0.05, 0.9, 24, &cfg).cycles.len();
        let mut identity = 0.0f64;
        for r in [0.05, 0.15] {
            if let Ok((ret, _)) = return_map(&p, &sec_o, r, &cfg) {
                identity = identity.max((ret - r).abs());
            }
            if let Ok((ret, _)) = return_map(&p, &sec_a, r, &cfg) {
                identity = identity.max((ret - r).abs());
            }
        }
        c.check(
            count_o == 0 && count_a == 0 && identity < 1e-8,
            &format!("pair {k} (c={cc:.3}, d={dd:.3}): no cycles, return identity {identity:.2e}"),
        );
    }
    c.finish(start, 60.0);
}

#[test]
fn criterion_5_hopf_identities_and_scaling() {
    let start = Instant::now();
    let mut c = Clauses::new("5 Hopf");
    let cfg = CycleConfig::default();

    let mut p = CanonicalParams::hamiltonian(QCase::Case1 { a: 2.0 });
    p.alpha0 = 0.1;
    let rep = kukles::bifurcation::hopf_value(&p, FocusId::O, ParamId::Beta, &cfg).unwrap();
    c.check(
        (rep.critical_param_value - 0.1).abs() <= 1e-12,
        "beta^AH = alpha0 to 1e-12",
    );

    p.beta = 0.3;
    let rep = kukles::bifurcation::hopf_value(&p, FocusId::O, ParamId::Gamma, &cfg).unwrap();
    c.check(
        (rep.critical_param_value - 0.2).abs() <= 1e-12,
        "gamma = beta - alpha0 to 1e-12",
    );

    // Post-Hopf amplitude^2 linearity over offsets {1, 2, 4}e-3; the base
    // uses an oracle-chosen alpha2 where the born cycle stays small.
    let base = CanonicalParams {
        q_case: QCase::Case1 { a: 2.0 },
        c: 0.0,
        d: 0.0,
        alpha0: 0.05,
        alpha2: 0.3,
        beta: 0.05,
        gamma: 0.0,
    };
    let scfg = CycleConfig {
        displacement_floor: 1e-9,
        ..Default::default()
    };
    let sec = Section::horizontal(State::new(0.0, 0.0), true);
    let mut amps = Vec::new();
    for offset in [1e-3, 2e-3, 4e-3] {
        let scan = count_cycles(
            &base.with(ParamId::Beta, 0.05 + offset),
            &sec,
            1e-3,
            0.25,
            40,
            &scfg,
        );
        c.check(
            scan.cycles.len() == 1,
            &format!("offset {offset:.0e}: exactly one small cycle"),
        );
        if let Some(cycle) = scan.cycles.first() {
            amps.push(cycle.amplitude);
        }
    }
    if amps.len() == 3 {
        c.check(
            amps[0] < 0.15,
            &format!("offset 1e-3 amplitude {:.3} < 0.15", amps[0]),
        );
        for k in 0..2 {
            let ratio = (amps[k + 1] / amps[k]).powi(2);
            c.check(
                (ratio - 2.0).abs() <= 0.4,
                &format!("amplitude^2 doubling ratio {ratio:.3} within 2 ± 20%"),
            );
        }
    }
    c.finish(start, 120.0);
}

fn scenario_reports() -> &'static (ScenarioReport, ScenarioReport) {
    static REPORTS: OnceLock<(ScenarioReport, ScenarioReport)> = OnceLock::new();
    REPORTS.get_or_init(|| {
        let cfg = ScenarioConfig::default();
        let default_run = run_scenario(&cfg).expect("scenario completes at the default base");
        let halved_run = run_scenario(&cfg.halved_tolerances())
            .expect("scenario completes at halved tolerances");
        (default_run, halved_run)
    })
}

fn stage<'r>(report: &'r ScenarioReport, name: &str) -> &'r StageData {
    &report
        .stages
        .iter()
        .find(|s| s.name == name)
        .unwrap_or_else(|| panic!("stage {name} missing"))
        .data
}

#[test]
fn criterion_6_scenario_reproduction() {
    let start = Instant::now();
    let mut c = Clauses::new("6 scenario");
    let (report, halved) = scenario_reports();

    c.check(
        report.stages.len() == 9,
        "run_scenario completes all stages at alpha0 = 0.05, c = d = 0",
    );

    if let StageData::BigCycleOnset { alpha2_onset, .. } = stage(report, "big-cycle-onset") {
        c.check(
            *alpha2_onset < 0.0,
            &format!("big-cycle onset found at alpha2 = {alpha2_onset:.6} < 0"),
        );
    } else {
        c.check(false, "big-cycle onset stage present");
    }

    if let StageData::EightLoop {
        gap_left_residual,
        gap_right_residual,
        alpha2_left,
        alpha2_right,
        difference,
        ..
    } = stage(report, "eight-loop")
    {
        c.check(
            gap_left_residual.abs() < 1e-8 && gap_right_residual.abs() < 1e-8,
            &format!(
                "both homoclinic values bracketed and refined to gap < 1e-8 (left {alpha2_left:.6}, right {alpha2_right:.6}, |difference| {difference:.4})"
            ),
        );
    } else {
        c.check(false, "eight-loop stage present");
    }

    if let StageData::CyclePair {
        cycle_o, cycle_a, ..
    } = stage(report, "cycle-pair")
    {
        c.check(
            cycle_o.stability == Stability::Stable && cycle_a.stability == Stability::Stable,
            &format!(
                "two stable cycles (around O and A) after the eight-loop (measured: O {:?} m={:.4}, A {:?} m={:.4})",
                cycle_o.stability, cycle_o.multiplier, cycle_a.stability, cycle_a.multiplier
            ),
        );
    } else {
        c.check(false, "cycle-pair stage present");
    }

    if let StageData::BetaFold {
        multiplier_before,
        multiplier_after,
        beta_fold,
        ..
    } = stage(report, "beta-fold")
    {
        c.check(
            (multiplier_before - 1.0) * (multiplier_after - 1.0) <= 0.0,
            &format!("beta-fold at {beta_fold:.6} with multiplier-1 crossing ({multiplier_before:.5} -> {multiplier_after:.5})"),
        );
    } else {
        c.check(false, "beta-fold stage present");
    }

    if let StageData::GammaHopf {
        analytic_identity_residual,
        third_cycle_found,
        count_before,
        count_after,
        ..
    } = stage(report, "gamma-hopf")
    {
        c.check(
            *analytic_identity_residual <= 1e-12,
            "gamma-Hopf critical value equals beta - alpha0 to 1e-12",
        );
        c.check(
            *third_cycle_found,
            &format!("gamma-Hopf produces a third cycle around O (measured counts {count_before} -> {count_after})"),
        );
    } else {
        c.check(false, "gamma-hopf stage present");
    }

    // Stage criticals stable to 1e-6 under tolerance halving.
    let criticals = |r: &ScenarioReport| -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        if let StageData::BetaHopf { beta_ah, .. } = stage(r, "beta-hopf") {
            out.push(("beta_ah", *beta_ah));
        }
        if let StageData::BigCycleOnset { alpha2_onset, .. } = stage(r, "big-cycle-onset") {
            out.push(("alpha2_onset", *alpha2_onset));
        }
        if let StageData::EightLoop {
            alpha2_left,
            alpha2_right,
            ..
        } = stage(r, "eight-loop")
        {
            out.push(("alpha2_left", *alpha2_left));
            out.push(("alpha2_right", *alpha2_right));
        }
        if let StageData::BetaFold { beta_fold, .. } = stage(r, "beta-fold") {
            out.push(("beta_fold", *beta_fold));
        }
        if let StageData::GammaHopf { gamma_ah, .. } = stage(r, "gamma-hopf") {
            out.push(("gamma_ah", *gamma_ah));
        }
        out
    };
    for ((name, a), (_, b)) in criticals(report).into_iter().zip(criticals(halved)) {
        c.check(
            (a - b).abs() <= 1e-6,
            &format!(
                "{name} stable under tolerance halving (delta {:.2e})",
                (a - b).abs()
            ),
        );
    }
    c.finish(start, 900.0);
}

#[test]
fn criterion_7_fold_contract() {
    let start = Instant::now();
    let mut c = Clauses::new("7 fold contract");
    // The cycle-pair fold continued in the field rotation parameter alpha2
    // (the fold/monotonicity dichotomy holds along rotation parameters), at
    // fixed beta just past the Andronov-Hopf value.
    let p = CanonicalParams {
        q_case: QCase::Case1 { a: 2.0 },
        c: 0.0,
        d: 0.0,
        alpha0: 0.05,
        alpha2: -0.0643,
        beta: 0.0502,
        gamma: 0.0,
    };
    let cfg = CycleConfig {
        return_t_max: 3000.0,
        ..Default::default()
    };
    let sec = Section::horizontal(State::new(0.0, 0.0), true);
    let outer = find_cycle(&p, &sec, 0.78, &cfg).expect("outer stable cycle");
    let branch = continue_cycle(
        &p,
        &outer,
        &sec,
        ParamId::Alpha2,
        (-0.0643, -0.08),
        &StepConfig {
            initial: 2e-4,
            ..Default::default()
        },
        &cfg,
    );
    c.check(
        !branch.folds.is_empty(),
        "continuation detects a fold in alpha2",
    );
    if let Some(fold) = branch.folds.first() {
        let fold_alpha2 = fold.param_value;
        println!("  [7] fold at alpha2 = {fold_alpha2:.6}");
        let two_side = count_cycles(
            &p.with(ParamId::Alpha2, fold_alpha2 + 1e-3),
            &sec,
            5e-4,
            0.95,
            48,
            &cfg,
        );
        c.check(
            two_side.cycles.len() == 2,
            &format!("offset +1e-3: two cycles (found {})", two_side.cycles.len()),
        );
        if two_side.cycles.len() == 2 {
            c.check(
                two_side.cycles[0].stability == Stability::Unstable
                    && two_side.cycles[1].stability == Stability::Stable,
                "the pair has opposite stabilities",
            );
        }
        let zero_side = count_cycles(
            &p.with(ParamId::Alpha2, fold_alpha2 - 1e-3),
            &sec,
            5e-4,
            0.95,
            48,
            &cfg,
        );
        c.check(
            zero_side.cycles.is_empty(),
            &format!(
                "offset -1e-3: zero cycles (found {})",
                zero_side.cycles.len()
            ),
        );
    }
    c.finish(start, 300.0);
}

#[test]
fn criterion_8_census_bounds_and_distributions() {
    let start = Instant::now();
    let mut c = Clauses::new("8 census");
    let grids_dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../grids");
    let mut paths: Vec<_> = std::fs::read_dir(grids_dir)
        .expect("shipped grids directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().map(|e| e == "json").unwrap_or(false))
        .collect();
    paths.sort();

    let mut total = 0usize;
    let mut bound_violations = 0usize;
    let mut best: Vec<(u32, u32, u32)> = Vec::new();
    let mut has_21 = false;
    for path in &paths {
        let grid: GridSpec = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        for r in census(&grid) {
            total += 1;
            if r.n_o.max(r.n_a) > 3 || r.n_o + r.n_a + r.n_big > 4 {
                bound_violations += 1;
            }
            if (r.n_o == 2 && r.n_a == 1) || (r.n_o == 1 && r.n_a == 2) {
                has_21 = true;
            }
            best.push((r.n_o, r.n_a, r.n_big));
        }
    }
    best.sort_by_key(|(o, a, b)| std::cmp::Reverse(o + a + b));
    best.dedup();
    println!(
        "  [8] {} grids, {} points; richest distributions (n_O, n_A, n_big): {:?}",
        paths.len(),
        total,
        &best[..best.len().min(5)]
    );
    c.check(total >= 200, &format!("at least 200 grid points ({total})"));
    c.check(
        bound_violations == 0,
        "no record violates max(n_O, n_A) <= 3 or n_O + n_A + n_big <= 4",
    );
    c.check(has_21, "at least one record achieves a (2:1) distribution");
    c.finish(start, 1800.0);
}

#[test]
fn criterion_9_determinism() {
    let start = Instant::now();
    let mut c = Clauses::new("9 determinism");

    let grid: GridSpec = serde_json::from_str(
        &std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../grids/pair-strip.json"
        ))
        .unwrap(),
    )
    .unwrap();
    let mut first = Vec::new();
    kukles::scan::write_census_jsonl(&grid, &census(&grid), &mut first).unwrap();
    let mut second = Vec::new();
    kukles::scan::write_census_jsonl(&grid, &census(&grid), &mut second).unwrap();
    c.check(
        first == second,
        "census output byte-identical across two runs",
    );

    let (report, _) = scenario_reports();
    let again = run_scenario(&ScenarioConfig::default()).expect("rerun completes");
    c.check(
        serde_json::to_string(report).unwrap() == serde_json::to_string(&again).unwrap(),
        "scenario report byte-identical across two runs",
    );
    c.finish(start, 600.0);
}

//! Parameter-grid censuses of cycle distributions, phase portraits, and the
//! scripted bifurcation scenario runner.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bifurcation::{
    homoclinic_gap, hopf_value, separatrices, BifurcationError, BranchLabel, FocusId,
    HomoclinicConfig, HopfSide, LoopSide,
};
use crate::cycles::{
    count_cycles, detect_big_cycle, displacement, CycleConfig, LimitCycle, Section, Stability,
};
use crate::integrate::{
    integrate, CrossingDirection, Event, IntegratorConfig, Trajectory, TrajectoryStatus,
};
use crate::model::{
    finite_singularities, reversibility_defect, CanonicalParams, ParamId, QCase, SingularityKind,
    State, DET_TOL,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScanError {
    #[error("scenario stage `{stage}` failed: {reason}")]
    StageFailed { stage: String, reason: String },
}

// ---------------------------------------------------------------------------
// Census
// ---------------------------------------------------------------------------

/// One grid axis: a fixed value or a uniform range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Fixed(f64),
    Linspace { start: f64, stop: f64, n: usize },
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Axis::Fixed(v) => vec![v],
            Axis::Linspace { start, stop, n } => {
                assert!(n >= 1);
                if n == 1 {
                    return vec![start];
                }
                (0..n)
                    .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                    .collect()
            }
        }
    }
}

/// Radial scan parameters for the per-point cycle counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CensusCycles {
    pub r_min: f64,
    pub r_max: f64,
    pub n_seeds: usize,
    /// Whether to run the big-cycle scan per point.
    pub big: bool,
}

impl Default for CensusCycles {
    fn default() -> Self {
        CensusCycles {
            r_min: 1e-3,
            r_max: 0.95,
            n_seeds: 40,
            big: true,
        }
    }
}

/// A parameter grid over the four tunable parameters with fixed `c`, `d`
/// and `q` case. Points are enumerated row-major in the order
/// (α₀, α₂, β, γ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub q_case: QCase,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub d: f64,
    pub alpha0: Axis,
    pub alpha2: Axis,
    pub beta: Axis,
    pub gamma: Axis,
    #[serde(default)]
    pub cycles: CensusCycles,
    #[serde(default)]
    pub config: CycleConfig,
}

impl GridSpec {
    pub fn points(&self) -> Vec<CanonicalParams> {
        let mut out = Vec::new();
        for a0 in self.alpha0.values() {
            for a2 in self.alpha2.values() {
                for b in self.beta.values() {
                    for g in self.gamma.values() {
                        out.push(CanonicalParams {
                            q_case: self.q_case,
                            c: self.c,
                            d: self.d,
                            alpha0: a0,
                            alpha2: a2,
                            beta: b,
                            gamma: g,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Cycle counts at one grid point: `n_O`/`n_A` count cycles enclosing only
/// the respective anti-saddle; cycles enclosing all finite singularities
/// count as `n_big` and are excluded from the pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionRecord {
    pub index: usize,
    pub params: CanonicalParams,
    #[serde(rename = "n_O")]
    pub n_o: u32,
    #[serde(rename = "n_A")]
    pub n_a: u32,
    pub n_big: u32,
    pub anomalies: Vec<String>,
}

/// Largest scan radius from `anchor` that stays clear of the other finite
/// singularities.
fn radius_cap(anchor: State, sings: &[crate::model::Singularity], fallback: f64) -> f64 {
    sings
        .iter()
        .filter(|s| s.location.dist(anchor) > 1e-9)
        .map(|s| 0.97 * s.location.dist(anchor))
        .fold(fallback, f64::min)
}

fn census_point(
    index: usize,
    p: &CanonicalParams,
    spec: &CensusCycles,
    cfg: &CycleConfig,
) -> DistributionRecord {
    let sings = finite_singularities(p);
    let mut anomalies = Vec::new();
    let mut n_o = 0u32;
    let mut n_a = 0u32;
    let mut n_big = 0u32;

    let anti: Vec<_> = sings.iter().filter(|s| s.det > DET_TOL).collect();
    let origin = anti.iter().find(|s| s.location.x.abs() < 1e-12);
    let second = anti.iter().find(|s| s.location.x.abs() > 1e-12);

    let mut tally = |anchor: State, toward_saddle_positive: bool, out: &mut u32, tag: &str| {
        let sec = Section::horizontal(anchor, toward_saddle_positive);
        let r_max = radius_cap(anchor, &sings, spec.r_max).min(spec.r_max);
        if r_max <= spec.r_min {
            anomalies.push(format!("{tag}: empty scan range"));
            return;
        }
        let scan = count_cycles(p, &sec, spec.r_min, r_max, spec.n_seeds, cfg);
        for c in &scan.cycles {
            if c.enclosed.len() == 1 && c.enclosed[0].dist(anchor) < 1e-9 {
                *out += 1;
            } else if c.enclosed.len() == sings.len() {
                n_big += 1;
            }
        }
        anomalies.extend(scan.anomalies.into_iter().map(|a| format!("{tag}: {a}")));
    };

    if let Some(o) = origin {
        tally(o.location, true, &mut n_o, "O");
    }
    if let Some(a) = second {
        let toward_origin_positive = a.location.x < 0.0;
        tally(a.location, toward_origin_positive, &mut n_a, "A");
    }

    if spec.big {
        let big = detect_big_cycle(p, cfg);
        n_big += big.all.len() as u32;
        anomalies.extend(big.anomalies.into_iter().map(|a| format!("big: {a}")));
    }

    DistributionRecord {
        index,
        params: *p,
        n_o,
        n_a,
        n_big,
        anomalies,
    }
}

/// Runs the cycle-distribution census over a grid. Grid points are
/// independent work items evaluated in parallel; results are merged in
/// row-major grid order, so output is deterministic for a fixed spec.
pub fn census(grid: &GridSpec) -> Vec<DistributionRecord> {
    let points = grid.points();
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| census_point(i, p, &grid.cycles, &grid.config))
        .collect()
}

/// JSON lines: a header carrying the format version and the grid config
/// echo, then one record per line.
pub fn write_census_jsonl<W: Write>(
    grid: &GridSpec,
    records: &[DistributionRecord],
    w: &mut W,
) -> io::Result<()> {
    serde_json::to_writer(
        &mut *w,
        &serde_json::json!({ "format_version": "1", "config": grid }),
    )?;
    writeln!(w)?;
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        writeln!(w)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Phase portraits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Window {
    pub fn contains(&self, s: State) -> bool {
        s.x >= self.x_min && s.x <= self.x_max && s.y >= self.y_min && s.y <= self.y_max
    }
}

/// A deterministic lattice of `nx × ny` seed points at cell centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeding {
    pub nx: usize,
    pub ny: usize,
}

impl Default for Seeding {
    fn default() -> Self {
        Seeding { nx: 8, ny: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum OrbitKind {
    Seed { i: usize, j: usize },
    Separatrix(BranchLabel),
}

#[derive(Debug, Clone, Serialize)]
pub struct PortraitOrbit {
    pub kind: OrbitKind,
    pub trajectory: Trajectory,
}

/// Trajectories from the seed lattice plus all separatrix branches,
/// truncated at window exit or `t_max`.
pub fn portrait(
    p: &CanonicalParams,
    window: &Window,
    seeding: &Seeding,
    cfg: &IntegratorConfig,
) -> Vec<PortraitOrbit> {
    let mut orbits = Vec::new();
    let walls = |w: &Window| -> Vec<Event<'static>> {
        let (x0, x1, y0, y1) = (w.x_min, w.x_max, w.y_min, w.y_max);
        vec![
            Event::new(
                "exit-left",
                CrossingDirection::Falling,
                true,
                move |_t, s: State| s.x - x0,
            ),
            Event::new(
                "exit-right",
                CrossingDirection::Rising,
                true,
                move |_t, s: State| s.x - x1,
            ),
            Event::new(
                "exit-bottom",
                CrossingDirection::Falling,
                true,
                move |_t, s: State| s.y - y0,
            ),
            Event::new(
                "exit-top",
                CrossingDirection::Rising,
                true,
                move |_t, s: State| s.y - y1,
            ),
        ]
    };

    for i in 0..seeding.nx {
        for j in 0..seeding.ny {
            let x =
                window.x_min + (window.x_max - window.x_min) * (i as f64 + 0.5) / seeding.nx as f64;
            let y =
                window.y_min + (window.y_max - window.y_min) * (j as f64 + 0.5) / seeding.ny as f64;
            let trajectory = integrate(p, State::new(x, y), cfg, &walls(window));
            orbits.push(PortraitOrbit {
                kind: OrbitKind::Seed { i, j },
                trajectory,
            });
        }
    }

    for s in finite_singularities(p) {
        if s.kind == SingularityKind::Saddle && window.contains(s.location) {
            if let Ok(set) = separatrices(p, &s, 1e-7, cfg) {
                for b in set.branches {
                    let mut trajectory = b.trajectory;
                    if let Some(k) = trajectory
                        .samples
                        .iter()
                        .position(|(_, s)| !window.contains(*s))
                    {
                        trajectory.samples.truncate(k + 1);
                    }
                    orbits.push(PortraitOrbit {
                        kind: OrbitKind::Separatrix(b.label),
                        trajectory,
                    });
                }
            }
        }
    }
    orbits
}

// ---------------------------------------------------------------------------
// Scenario runner
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub alpha0: f64,
    pub c: f64,
    pub d: f64,
    pub integrator: IntegratorConfig,
    /// Return-map budget per orbit.
    pub return_t_max: f64,
    pub count_seeds: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Radius on the `+x` ray from the singularity centroid probed for
    /// boundedness when locating the big-cycle onset.
    pub onset_probe_radius: f64,
    pub onset_probe_t_max: f64,
    /// Initial lower end of the α₂ onset bracket (expanded if needed).
    pub onset_bracket_lo: f64,
    pub onset_resolution: f64,
    /// Deepest α₂ scanned when bracketing the homoclinic values.
    pub eight_loop_search_lo: f64,
    pub gap_tol: f64,
    /// How far below each side's homoclinic value the loop-born cycle is
    /// measured.
    pub pair_margin: f64,
    /// Initial β step when bracketing the fold (doubles).
    pub fold_scan_step: f64,
    /// β resolution of the fold bisection.
    pub fold_resolution: f64,
    /// Cap on the γ offset around the γ-Hopf (clamped to the measured
    /// two-cycle window).
    pub gamma_offset: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            alpha0: 0.05,
            c: 0.0,
            d: 0.0,
            integrator: IntegratorConfig::default(),
            return_t_max: 3000.0,
            count_seeds: 48,
            r_min: 5e-4,
            r_max: 0.97,
            onset_probe_radius: 50.0,
            onset_probe_t_max: 600.0,
            onset_bracket_lo: -0.02,
            onset_resolution: 1e-7,
            eight_loop_search_lo: -0.12,
            gap_tol: 1e-8,
            pair_margin: 2e-3,
            fold_scan_step: 2e-4,
            fold_resolution: 1e-9,
            gamma_offset: 3e-4,
        }
    }
}

impl ScenarioConfig {
    fn cycle_config(&self) -> CycleConfig {
        CycleConfig {
            integrator: self.integrator,
            return_t_max: self.return_t_max,
            ..CycleConfig::default()
        }
    }

    fn homoclinic_config(&self) -> HomoclinicConfig {
        HomoclinicConfig {
            integrator: self.integrator,
            ..HomoclinicConfig::default()
        }
    }

    /// The same scenario with halved integration tolerances.
    pub fn halved_tolerances(&self) -> Self {
        ScenarioConfig {
            integrator: self.integrator.halved(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageName {
    Centers,
    RoughFoci,
    BetaHopf,
    BigCycleOnset,
    EightLoop,
    CyclePair,
    BetaFold,
    GammaHopf,
    GammaFold,
}

impl StageName {
    pub const ALL: [StageName; 9] = [
        StageName::Centers,
        StageName::RoughFoci,
        StageName::BetaHopf,
        StageName::BigCycleOnset,
        StageName::EightLoop,
        StageName::CyclePair,
        StageName::BetaFold,
        StageName::GammaHopf,
        StageName::GammaFold,
    ];
}

impl std::fmt::Display for StageName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StageName::Centers => "centers",
            StageName::RoughFoci => "rough-foci",
            StageName::BetaHopf => "beta-hopf",
            StageName::BigCycleOnset => "big-cycle-onset",
            StageName::EightLoop => "eight-loop",
            StageName::CyclePair => "cycle-pair",
            StageName::BetaFold => "beta-fold",
            StageName::GammaHopf => "gamma-hopf",
            StageName::GammaFold => "gamma-fold",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StageData {
    Centers {
        reversibility_defect: f64,
        return_identity_defect_o: f64,
        return_identity_defect_a: f64,
    },
    RoughFoci {
        trace_o: f64,
        trace_a: f64,
        outward_displacement_o: f64,
        outward_displacement_a: f64,
    },
    BetaHopf {
        beta_ah: f64,
        analytic_identity_residual: f64,
        trace_residual: f64,
        eigenvalue_real_part: f64,
        side: HopfSide,
    },
    BigCycleOnset {
        alpha2_onset: f64,
        probe_radius: f64,
        cycle_below_onset: LimitCycle,
        cycle_alpha2: f64,
        absent_at_zero: bool,
    },
    EightLoop {
        alpha2_left: f64,
        alpha2_right: f64,
        difference: f64,
        gap_left_residual: f64,
        gap_right_residual: f64,
    },
    CyclePair {
        alpha2_o: f64,
        cycle_o: LimitCycle,
        alpha2_a: f64,
        cycle_a: LimitCycle,
        note: String,
    },
    BetaFold {
        alpha2_work: f64,
        two_cycle_beta: f64,
        cycles_at_probe: Vec<LimitCycle>,
        beta_fold: f64,
        fold_section_coord: f64,
        window_width: f64,
        continuation_fold_beta: f64,
        multiplier_before: f64,
        multiplier_after: f64,
    },
    GammaHopf {
        beta_star: f64,
        gamma_ah: f64,
        analytic_identity_residual: f64,
        side: HopfSide,
        count_before: usize,
        count_after: usize,
        third_cycle_found: bool,
        note: String,
    },
    GammaFold {
        found: bool,
        gamma_fold: Option<f64>,
        note: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub name: String,
    pub data: StageData,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub format_version: String,
    pub config: ScenarioConfig,
    pub stages: Vec<Stage>,
}

/// Sequential runner; each stage's preconditions are the previous stages'
/// measured outputs, so stages must be executed in order.
pub struct ScenarioRunner {
    cfg: ScenarioConfig,
    cycles: CycleConfig,
    base: CanonicalParams,
    stages: Vec<Stage>,
    beta_ah: Option<f64>,
    onset: Option<f64>,
    eight: Option<(f64, f64)>,
    pair_alpha2: Option<f64>,
    fold: Option<(f64, f64, f64)>, // (alpha2_work, beta_fold, window)
    gamma_hopf: Option<(f64, f64, f64)>, // (beta_star, gamma_ah, offset)
}

impl ScenarioRunner {
    pub fn new(cfg: ScenarioConfig) -> Self {
        let base = CanonicalParams {
            q_case: QCase::Case1 { a: 2.0 },
            c: cfg.c,
            d: cfg.d,
            alpha0: 0.0,
            alpha2: 0.0,
            beta: 0.0,
            gamma: 0.0,
        };
        let cycles = cfg.cycle_config();
        ScenarioRunner {
            cfg,
            cycles,
            base,
            stages: Vec::new(),
            beta_ah: None,
            onset: None,
            eight: None,
            pair_alpha2: None,
            fold: None,
            gamma_hopf: None,
        }
    }

    pub fn into_report(self) -> ScenarioReport {
        ScenarioReport {
            format_version: "1".to_string(),
            config: self.cfg,
            stages: self.stages,
        }
    }

    fn fail(&self, stage: StageName, reason: impl Into<String>) -> ScanError {
        ScanError::StageFailed {
            stage: stage.to_string(),
            reason: reason.into(),
        }
    }

    fn require<T: Copy>(
        &self,
        got: Option<T>,
        stage: StageName,
        what: &str,
    ) -> Result<T, ScanError> {
        got.ok_or_else(|| {
            self.fail(
                stage,
                format!("precondition missing: {what} not measured yet"),
            )
        })
    }

    fn o_section(&self) -> Section {
        Section::horizontal(State::new(0.0, 0.0), true)
    }

    fn a_section(&self) -> Section {
        Section::horizontal(State::new(2.0, 0.0), false)
    }

    fn count_o(&self, p: &CanonicalParams) -> Vec<LimitCycle> {
        count_cycles(
            p,
            &self.o_section(),
            self.cfg.r_min,
            self.cfg.r_max,
            self.cfg.count_seeds,
            &self.cycles,
        )
        .cycles
    }

    fn count_a(&self, p: &CanonicalParams) -> Vec<LimitCycle> {
        let r_max = self.cfg.r_max.min(0.95);
        count_cycles(
            p,
            &self.a_section(),
            self.cfg.r_min,
            r_max,
            self.cfg.count_seeds,
            &self.cycles,
        )
        .cycles
    }

    pub fn run_stage(&mut self, name: StageName) -> Result<Stage, ScanError> {
        let data = match name {
            StageName::Centers => self.stage_centers()?,
            StageName::RoughFoci => self.stage_rough_foci()?,
            StageName::BetaHopf => self.stage_beta_hopf()?,
            StageName::BigCycleOnset => self.stage_big_cycle_onset()?,
            StageName::EightLoop => self.stage_eight_loop()?,
            StageName::CyclePair => self.stage_cycle_pair()?,
            StageName::BetaFold => self.stage_beta_fold()?,
            StageName::GammaHopf => self.stage_gamma_hopf()?,
            StageName::GammaFold => self.stage_gamma_fold()?,
        };
        let stage = Stage {
            name: name.to_string(),
            data,
        };
        self.stages.push(stage.clone());
        Ok(stage)
    }

    fn stage_centers(&mut self) -> Result<StageData, ScanError> {
        let p = self.base;
        let defect = reversibility_defect(&p, State::new(0.4, 0.6))
            .map_err(|e| self.fail(StageName::Centers, e.to_string()))?;
        let d_o = displacement(&p, &self.o_section(), 0.3, &self.cycles)
            .map_err(|e| self.fail(StageName::Centers, e.to_string()))?;
        let d_a = displacement(&p, &self.a_section(), 0.3, &self.cycles)
            .map_err(|e| self.fail(StageName::Centers, e.to_string()))?;
        if defect > 1e-12 || d_o.abs() > 1e-8 || d_a.abs() > 1e-8 {
            return Err(self.fail(
                StageName::Centers,
                format!("symmetric system is not a pair of centers (defect {defect:.2e}, d_O {d_o:.2e}, d_A {d_a:.2e})"),
            ));
        }
        Ok(StageData::Centers {
            reversibility_defect: defect,
            return_identity_defect_o: d_o,
            return_identity_defect_a: d_a,
        })
    }

    fn stage_rough_foci(&mut self) -> Result<StageData, ScanError> {
        if self.stages.is_empty() {
            return Err(self.fail(
                StageName::RoughFoci,
                "precondition missing: centers stage not run",
            ));
        }
        self.base.alpha0 = self.cfg.alpha0;
        let p = self.base;
        let trace_o = p.linear_y_coefficient(0.0);
        let trace_a = p.linear_y_coefficient(2.0);
        if trace_o <= 0.0 || trace_a <= 0.0 {
            return Err(self.fail(StageName::RoughFoci, "foci did not destabilize"));
        }
        let d_o = displacement(&p, &self.o_section(), 0.05, &self.cycles)
            .map_err(|e| self.fail(StageName::RoughFoci, e.to_string()))?;
        let d_a = displacement(&p, &self.a_section(), 0.05, &self.cycles)
            .map_err(|e| self.fail(StageName::RoughFoci, e.to_string()))?;
        if d_o <= 0.0 || d_a <= 0.0 {
            return Err(self.fail(
                StageName::RoughFoci,
                format!("foci are not spiralling outward (d_O {d_o:.2e}, d_A {d_a:.2e})"),
            ));
        }
        Ok(StageData::RoughFoci {
            trace_o,
            trace_a,
            outward_displacement_o: d_o,
            outward_displacement_a: d_a,
        })
    }

    fn stage_beta_hopf(&mut self) -> Result<StageData, ScanError> {
        if self.base.alpha0 == 0.0 {
            return Err(self.fail(
                StageName::BetaHopf,
                "precondition missing: alpha0 not input",
            ));
        }
        let report = hopf_value(&self.base, FocusId::O, ParamId::Beta, &self.cycles)
            .map_err(|e| self.fail(StageName::BetaHopf, e.to_string()))?;
        let beta_ah = report.critical_param_value;
        let analytic = self.base.alpha0 + self.base.gamma;
        let identity_residual = (beta_ah - analytic).abs();
        self.base.beta = beta_ah;
        let trace_residual = self.base.linear_y_coefficient(0.0).abs();
        let eigs = crate::model::jacobian(&self.base, State::new(0.0, 0.0)).eigenvalues();
        let re = eigs.0.re.abs().max(eigs.1.re.abs());
        if identity_residual > 1e-12 || trace_residual > 1e-12 || re > 1e-8 {
            return Err(self.fail(
                StageName::BetaHopf,
                format!("Hopf identity violated (identity {identity_residual:.2e}, trace {trace_residual:.2e}, Re λ {re:.2e})"),
            ));
        }
        self.beta_ah = Some(beta_ah);
        Ok(StageData::BetaHopf {
            beta_ah,
            analytic_identity_residual: identity_residual,
            trace_residual,
            eigenvalue_real_part: re,
            side: report.side,
        })
    }

    fn bounded_probe(&self, alpha2: f64) -> bool {
        let p = self.base.with(ParamId::Alpha2, alpha2);
        let sings = finite_singularities(&p);
        let cx = sings.iter().map(|s| s.location.x).sum::<f64>() / sings.len() as f64;
        let icfg = IntegratorConfig {
            t_max: self.cfg.onset_probe_t_max,
            ..self.cfg.integrator
        };
        let traj = integrate(
            &p,
            State::new(cx + self.cfg.onset_probe_radius, 0.0),
            &icfg,
            &[],
        );
        traj.status != TrajectoryStatus::Escaped
    }

    fn stage_big_cycle_onset(&mut self) -> Result<StageData, ScanError> {
        let _ = self.require(self.beta_ah, StageName::BigCycleOnset, "beta^AH")?;
        if self.bounded_probe(0.0) {
            return Err(self.fail(
                StageName::BigCycleOnset,
                "orbits already bounded at alpha2 = 0; no onset to detect",
            ));
        }
        let mut lo = self.cfg.onset_bracket_lo;
        let mut expansions = 0;
        while !self.bounded_probe(lo) {
            lo *= 2.0;
            expansions += 1;
            if expansions > 4 {
                return Err(self.fail(
                    StageName::BigCycleOnset,
                    format!("no bounded attractor down to alpha2 = {lo}"),
                ));
            }
        }
        let mut hi = 0.0;
        while hi - lo > self.cfg.onset_resolution {
            let mid = 0.5 * (lo + hi);
            if self.bounded_probe(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let onset = 0.5 * (lo + hi);

        // The stable big cycle must be detectable safely below the onset and
        // absent at alpha2 = 0.
        let cycle_alpha2 = onset - (0.5 * onset.abs()).max(2e-3);
        let p_below = self.base.with(ParamId::Alpha2, cycle_alpha2);
        let scan = detect_big_cycle(&p_below, &self.cycles);
        let n_sing = finite_singularities(&p_below).len();
        let cycle = scan
            .cycle
            .filter(|c| c.enclosed.len() == n_sing)
            .ok_or_else(|| {
                self.fail(
                    StageName::BigCycleOnset,
                    format!("no big cycle enclosing all singularities at alpha2 = {cycle_alpha2}"),
                )
            })?;
        let absent_at_zero = detect_big_cycle(&self.base.with(ParamId::Alpha2, 0.0), &self.cycles)
            .cycle
            .is_none();
        if !absent_at_zero {
            return Err(self.fail(StageName::BigCycleOnset, "big cycle present at alpha2 = 0"));
        }
        self.onset = Some(onset);
        Ok(StageData::BigCycleOnset {
            alpha2_onset: onset,
            probe_radius: self.cfg.onset_probe_radius,
            cycle_below_onset: cycle,
            cycle_alpha2,
            absent_at_zero,
        })
    }

    fn gap(&self, alpha2: f64, side: LoopSide) -> Result<f64, BifurcationError> {
        homoclinic_gap(
            &self.base.with(ParamId::Alpha2, alpha2),
            side,
            &self.cfg.homoclinic_config(),
        )
    }

    fn stage_eight_loop(&mut self) -> Result<StageData, ScanError> {
        let onset = self.require(self.onset, StageName::EightLoop, "big-cycle onset")?;
        let mut roots = [0.0f64; 2];
        let mut residuals = [0.0f64; 2];
        for (i, side) in [LoopSide::Left, LoopSide::Right].into_iter().enumerate() {
            // Walk downward from just above the onset until the gap flips.
            let mut a2 = onset.min(-1e-4);
            let mut g_prev = self
                .gap(a2, side)
                .map_err(|e| self.fail(StageName::EightLoop, format!("{side:?}: {e}")))?;
            let mut bracket = None;
            while a2 > self.cfg.eight_loop_search_lo {
                let next = a2 * 1.35;
                match self.gap(next, side) {
                    Ok(g) => {
                        if g_prev * g <= 0.0 {
                            bracket = Some((a2, next, g_prev));
                            break;
                        }
                        a2 = next;
                        g_prev = g;
                    }
                    Err(_) => break,
                }
            }
            let (mut blo, mut bhi, mut g_lo) = bracket.ok_or_else(|| {
                self.fail(
                    StageName::EightLoop,
                    format!(
                        "{side:?}: no homoclinic sign change above {}",
                        self.cfg.eight_loop_search_lo
                    ),
                )
            })?;
            // Bisection on alpha2 to |gap| < gap_tol.
            let mut best = (0.5 * (blo + bhi), f64::INFINITY);
            for _ in 0..200 {
                let mid = 0.5 * (blo + bhi);
                let g = self
                    .gap(mid, side)
                    .map_err(|e| self.fail(StageName::EightLoop, format!("{side:?}: {e}")))?;
                if g.abs() < best.1.abs() {
                    best = (mid, g);
                }
                if g.abs() < self.cfg.gap_tol {
                    best = (mid, g);
                    break;
                }
                if (g > 0.0) == (g_lo > 0.0) {
                    blo = mid;
                    g_lo = g;
                } else {
                    bhi = mid;
                }
            }
            if best.1.abs() >= self.cfg.gap_tol {
                return Err(self.fail(
                    StageName::EightLoop,
                    format!("{side:?}: residual gap {:.2e} above tolerance", best.1),
                ));
            }
            roots[i] = best.0;
            residuals[i] = best.1;
        }
        self.eight = Some((roots[0], roots[1]));
        Ok(StageData::EightLoop {
            alpha2_left: roots[0],
            alpha2_right: roots[1],
            difference: (roots[0] - roots[1]).abs(),
            gap_left_residual: residuals[0],
            gap_right_residual: residuals[1],
        })
    }

    fn stage_cycle_pair(&mut self) -> Result<StageData, ScanError> {
        let (a2_left, a2_right) =
            self.require(self.eight, StageName::CyclePair, "homoclinic values")?;

        // Left loop: the stable cycle detaches below the closure.
        let alpha2_o = a2_left - self.cfg.pair_margin;
        let cycles_o = self.count_o(&self.base.with(ParamId::Alpha2, alpha2_o));
        let cycle_o = cycles_o
            .iter()
            .filter(|c| c.enclosed.len() == 1 && c.enclosed[0].norm() < 1e-9)
            .cloned()
            .next_back()
            .ok_or_else(|| {
                self.fail(
                    StageName::CyclePair,
                    format!("no cycle around O at alpha2 = {alpha2_o}"),
                )
            })?;
        if cycle_o.stability != Stability::Stable {
            return Err(self.fail(
                StageName::CyclePair,
                format!(
                    "loop-born cycle around O is not stable (multiplier {})",
                    cycle_o.multiplier
                ),
            ));
        }

        // Right loop: the loop-born cycle lives between the closure and A's
        // Hopf value.
        let a_hopf = hopf_value(&self.base, FocusId::A, ParamId::Alpha2, &self.cycles)
            .map_err(|e| self.fail(StageName::CyclePair, e.to_string()))?
            .critical_param_value;
        let alpha2_a = 0.5 * (a2_right + a_hopf);
        let cycles_a = self.count_a(&self.base.with(ParamId::Alpha2, alpha2_a));
        let cycle_a = cycles_a
            .iter()
            .filter(|c| c.enclosed.len() == 1 && c.enclosed[0].dist(State::new(2.0, 0.0)) < 1e-9)
            .cloned()
            .next_back()
            .ok_or_else(|| {
                self.fail(
                    StageName::CyclePair,
                    format!("no cycle around A at alpha2 = {alpha2_a}"),
                )
            })?;
        let note = format!(
            "loop-born cycle stabilities: O {:?} (saddle quantity {:.4}), A {:?} (saddle quantity {:.4})",
            cycle_o.stability,
            self.base.alpha0 + self.base.gamma + alpha2_o,
            cycle_a.stability,
            self.base.alpha0 + self.base.gamma + alpha2_a,
        );
        self.pair_alpha2 = Some(alpha2_o);
        Ok(StageData::CyclePair {
            alpha2_o,
            cycle_o,
            alpha2_a,
            cycle_a,
            note,
        })
    }

    /// Max displacement over a radial window by golden-section search.
    fn max_displacement(
        &self,
        p: &CanonicalParams,
        r_lo: f64,
        r_hi: f64,
    ) -> Result<f64, ScanError> {
        let sec = self.o_section();
        let d = |r: f64| {
            displacement(p, &sec, r, &self.cycles)
                .map_err(|e| self.fail(StageName::BetaFold, e.to_string()))
        };
        let phi = 0.5 * (5.0f64.sqrt() - 1.0);
        let (mut a, mut b) = (r_lo, r_hi);
        let mut best = f64::NEG_INFINITY;
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let mut f1 = d(x1)?;
        let mut f2 = d(x2)?;
        for _ in 0..40 {
            best = best.max(f1).max(f2);
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = d(x2)?;
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = d(x1)?;
            }
        }
        Ok(best)
    }

    fn stage_beta_fold(&mut self) -> Result<StageData, ScanError> {
        let beta_ah = self.require(self.beta_ah, StageName::BetaFold, "beta^AH")?;
        let alpha2_work = self.require(self.pair_alpha2, StageName::BetaFold, "working alpha2")?;
        let p_work = self.base.with(ParamId::Alpha2, alpha2_work);

        // Two cycles just past the Hopf.
        let mut probe = self.cfg.fold_scan_step;
        let mut cycles_at_probe = Vec::new();
        let mut two_cycle_beta = f64::NAN;
        for _ in 0..4 {
            let p = p_work.with(ParamId::Beta, beta_ah + probe);
            let found = self.count_o(&p);
            if found.len() == 2 {
                two_cycle_beta = beta_ah + probe;
                cycles_at_probe = found;
                break;
            }
            probe *= 0.5;
        }
        if cycles_at_probe.len() != 2 {
            return Err(self.fail(
                StageName::BetaFold,
                format!(
                    "no two-cycle configuration found just past beta^AH at alpha2 = {alpha2_work}"
                ),
            ));
        }
        let r_inner = cycles_at_probe[0].section_coord;
        let r_outer = cycles_at_probe[1].section_coord;
        let (w_lo, w_hi) = (0.7 * r_inner, (1.15 * r_outer).min(self.cfg.r_max));

        // Bracket the fold in beta by the sign of the max displacement over
        // the window between the pair.
        let mut step = self.cfg.fold_scan_step;
        let mut lo = two_cycle_beta;
        let mut hi = None;
        for _ in 0..24 {
            let cand = lo + step;
            let m = self.max_displacement(&p_work.with(ParamId::Beta, cand), w_lo, w_hi)?;
            if m <= 0.0 {
                hi = Some(cand);
                break;
            }
            lo = cand;
            step *= 2.0;
        }
        let mut hi =
            hi.ok_or_else(|| self.fail(StageName::BetaFold, "fold not bracketed in beta"))?;
        while hi - lo > self.cfg.fold_resolution {
            let mid = 0.5 * (lo + hi);
            let m = self.max_displacement(&p_work.with(ParamId::Beta, mid), w_lo, w_hi)?;
            if m > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let beta_fold = 0.5 * (lo + hi);
        let window_width = beta_fold - beta_ah;

        // Continuation cross-check from the outer (stable) cycle.
        let p_probe = p_work.with(ParamId::Beta, two_cycle_beta);
        let outer = cycles_at_probe[1].clone();
        let branch = crate::bifurcation::continue_cycle(
            &p_probe,
            &outer,
            &self.o_section(),
            ParamId::Beta,
            (beta_ah - 2.0 * self.cfg.fold_scan_step, beta_fold + 0.01),
            &crate::bifurcation::StepConfig {
                initial: 2e-4,
                ..Default::default()
            },
            &self.cycles,
        );
        let fold_pt = branch
            .folds
            .first()
            .copied()
            .ok_or_else(|| self.fail(StageName::BetaFold, "continuation found no fold"))?;
        // Multiplier crossing through 1 along the branch around the fold.
        let k = fold_pt.before_index;
        let lo_k = k.saturating_sub(3);
        let hi_k = (k + 4).min(branch.points.len());
        let mults: Vec<f64> = branch.points[lo_k..hi_k]
            .iter()
            .map(|pt| pt.cycle.multiplier)
            .collect();
        let crossing = mults
            .windows(2)
            .find(|w| (w[0] - 1.0) * (w[1] - 1.0) <= 0.0)
            .map(|w| (w[0], w[1]));
        let Some((m_before, m_after)) = crossing else {
            return Err(self.fail(
                StageName::BetaFold,
                format!(
                    "multiplier does not cross 1 at the fold (multipliers near fold: {mults:?})"
                ),
            ));
        };
        self.fold = Some((alpha2_work, beta_fold, window_width));
        Ok(StageData::BetaFold {
            alpha2_work,
            two_cycle_beta,
            cycles_at_probe,
            beta_fold,
            fold_section_coord: fold_pt.section_coord,
            window_width,
            continuation_fold_beta: fold_pt.param_value,
            multiplier_before: m_before,
            multiplier_after: m_after,
        })
    }

    fn stage_gamma_hopf(&mut self) -> Result<StageData, ScanError> {
        let beta_ah = self.require(self.beta_ah, StageName::GammaHopf, "beta^AH")?;
        let (alpha2_work, _beta_fold, window) =
            self.require(self.fold, StageName::GammaHopf, "beta fold")?;

        // Pick beta* so that the two-cycle window straddles the gamma path
        // with positive gamma on both probe sides.
        let beta_star = beta_ah + 0.8 * window;
        let offset = (0.4 * window).min(self.cfg.gamma_offset);
        let p_star = self
            .base
            .with(ParamId::Alpha2, alpha2_work)
            .with(ParamId::Beta, beta_star);

        let report = hopf_value(&p_star, FocusId::O, ParamId::Gamma, &self.cycles)
            .map_err(|e| self.fail(StageName::GammaHopf, e.to_string()))?;
        let gamma_ah = report.critical_param_value;
        let identity_residual = (gamma_ah - (beta_star - p_star.alpha0)).abs();
        if identity_residual > 1e-12 {
            return Err(self.fail(
                StageName::GammaHopf,
                format!("gamma identity residual {identity_residual:.2e}"),
            ));
        }
        let before = self.count_o(&p_star.with(ParamId::Gamma, gamma_ah - offset));
        let after = self.count_o(&p_star.with(ParamId::Gamma, gamma_ah + offset));
        if before.len() == after.len() {
            return Err(self.fail(
                StageName::GammaHopf,
                format!(
                    "no Hopf event detected across gamma = {gamma_ah} (counts {} -> {})",
                    before.len(),
                    after.len()
                ),
            ));
        }
        let third = after.len() > before.len() && after.len() >= 3;
        let note = if third {
            "stable third cycle born at the gamma crossing".to_string()
        } else {
            format!(
                "gamma crossing is subcritical-like here: the unstable cycle is absorbed ({} -> {} cycles), no third cycle",
                before.len(),
                after.len()
            )
        };
        self.gamma_hopf = Some((beta_star, gamma_ah, offset));
        Ok(StageData::GammaHopf {
            beta_star,
            gamma_ah,
            analytic_identity_residual: identity_residual,
            side: report.side,
            count_before: before.len(),
            count_after: after.len(),
            third_cycle_found: third,
            note,
        })
    }

    fn stage_gamma_fold(&mut self) -> Result<StageData, ScanError> {
        let (beta_star, gamma_ah, offset) =
            self.require(self.gamma_hopf, StageName::GammaFold, "gamma Hopf")?;
        let (alpha2_work, _, _) = self.require(self.fold, StageName::GammaFold, "beta fold")?;
        let p_star = self
            .base
            .with(ParamId::Alpha2, alpha2_work)
            .with(ParamId::Beta, beta_star);

        // A fold of the Hopf-born pair requires three cycles past the
        // crossing; scan gamma upward looking for one.
        let mut found_three = None;
        let mut g = gamma_ah + offset;
        for _ in 0..8 {
            let n = self.count_o(&p_star.with(ParamId::Gamma, g)).len();
            if n >= 3 {
                found_three = Some(g);
                break;
            }
            if n == 0 {
                break;
            }
            g += offset;
        }
        match found_three {
            None => Ok(StageData::GammaFold {
                found: false,
                gamma_fold: None,
                note: "no three-cycle configuration past the gamma crossing; the crossing absorbs \
                       the unstable cycle at this base, so the pair fold does not occur"
                    .to_string(),
            }),
            Some(g3) => {
                // Bracket the 3 -> fewer transition.
                let mut lo = g3;
                let mut hi = None;
                let mut step = offset;
                for _ in 0..16 {
                    let cand = lo + step;
                    let n = self.count_o(&p_star.with(ParamId::Gamma, cand)).len();
                    if n < 3 {
                        hi = Some(cand);
                        break;
                    }
                    lo = cand;
                    step *= 2.0;
                }
                let Some(mut hi) = hi else {
                    return Ok(StageData::GammaFold {
                        found: false,
                        gamma_fold: None,
                        note: "three cycles persist beyond the scanned gamma range".to_string(),
                    });
                };
                while hi - lo > 1e-7 {
                    let mid = 0.5 * (lo + hi);
                    let n = self.count_o(&p_star.with(ParamId::Gamma, mid)).len();
                    if n >= 3 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(StageData::GammaFold {
                    found: true,
                    gamma_fold: Some(0.5 * (lo + hi)),
                    note: "pair fold located by the 3-to-1 count transition".to_string(),
                })
            }
        }
    }
}

/// Executes the full stage script in order, aborting at the first unmet
/// stage. The final (gamma-fold) stage records presence or absence without
/// failing the scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport, ScanError> {
    let mut runner = ScenarioRunner::new(cfg.clone());
    for name in StageName::ALL {
        runner.run_stage(name)?;
    }
    Ok(runner.into_report())
}

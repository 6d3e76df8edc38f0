//! Hopf values, cycle-branch continuation with fold detection, saddle
//! separatrices, and homoclinic (eight-loop) location.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::cycles::{cycle_at, displacement, CycleConfig, CycleError, LimitCycle, Section};
use crate::integrate::{integrate_directed, CrossingDirection, Event, IntegratorConfig};
use crate::model::{
    finite_singularities, jacobian, CanonicalParams, ParamId, Singularity, SingularityKind, State,
    DET_TOL,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BifurcationError {
    /// The requested equilibrium is not an anti-saddle (eigenvalues at the
    /// critical value would be real).
    #[error("the requested singular point is not a focus candidate")]
    NotAFocus,
    /// The trace at the focus does not depend on the chosen parameter.
    #[error("the trace at the focus is independent of {0}")]
    Insensitive(ParamId),
    #[error("the given singularity is not a saddle")]
    NotASaddle,
    #[error("no anti-saddle adjacent to the saddle on the {0:?} side")]
    NoFocusOnSide(LoopSide),
    /// A separatrix branch left without crossing the transversal.
    #[error("separatrix branch {branch} made no transversal crossing ({status})")]
    BranchEscaped { branch: BranchLabel, status: String },
    #[error("gap has equal signs at the {side:?} bracket ends [{lo}, {hi}]")]
    NoBracket { side: LoopSide, lo: f64, hi: f64 },
    #[error(transparent)]
    Cycle(#[from] CycleError),
}

// ---------------------------------------------------------------------------
// Hopf values
// ---------------------------------------------------------------------------

/// The two anti-saddles of the canonical system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FocusId {
    /// The origin.
    O,
    /// The non-origin anti-saddle (at `(a, 0)` for case 1 with `a > 1`).
    A,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HopfSide {
    /// Return-map displacement at the critical value contracts: stable weak
    /// focus, a stable cycle is born on the unstable side.
    SupercriticalLike,
    /// Displacement expands: unstable weak focus, an unstable cycle sits on
    /// the stable side.
    SubcriticalLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopfReport {
    pub singularity: State,
    /// Jacobian trace at the focus for the *input* parameters.
    pub trace_expr_value: f64,
    /// Parameter value solving `trace = 0`.
    pub critical_param_value: f64,
    pub side: HopfSide,
}

fn locate_focus(p: &CanonicalParams, which: FocusId) -> Result<Singularity, BifurcationError> {
    let sings = finite_singularities(p);
    match which {
        FocusId::O => sings
            .into_iter()
            .find(|s| s.location.x.abs() < 1e-12 && s.det > DET_TOL)
            .ok_or(BifurcationError::NotAFocus),
        FocusId::A => sings
            .into_iter()
            .find(|s| s.location.x.abs() > 1e-12 && s.det > DET_TOL)
            .ok_or(BifurcationError::NotAFocus),
    }
}

/// Sensitivity of the trace at abscissa `x` to each parameter:
/// `trace(x) = α₀ - β + γ + βx + α₂x²`.
fn trace_coefficient(free: ParamId, x: f64) -> f64 {
    match free {
        ParamId::Alpha0 | ParamId::Gamma => 1.0,
        ParamId::Beta => x - 1.0,
        ParamId::Alpha2 => x * x,
    }
}

/// Solves `trace = 0` at the chosen focus for `free`, classifying the cycle
/// birth side from return-map curvature at the critical value.
pub fn hopf_value(
    p: &CanonicalParams,
    which: FocusId,
    free: ParamId,
    cfg: &CycleConfig,
) -> Result<HopfReport, BifurcationError> {
    let focus = locate_focus(p, which)?;
    let x = focus.location.x;
    let coef = trace_coefficient(free, x);
    if coef.abs() < 1e-12 {
        return Err(BifurcationError::Insensitive(free));
    }
    let trace_now = p.linear_y_coefficient(x);
    let critical = p.get(free) - trace_now / coef;

    let p_crit = p.with(free, critical);
    let sec = Section::horizontal(focus.location, which == FocusId::O);
    let mut side = HopfSide::SupercriticalLike;
    for r in [0.03, 0.08, 0.15] {
        match displacement(&p_crit, &sec, r, cfg) {
            Ok(d) if d.abs() > 100.0 * cfg.newton_tol => {
                side = if d < 0.0 {
                    HopfSide::SupercriticalLike
                } else {
                    HopfSide::SubcriticalLike
                };
                break;
            }
            _ => continue,
        }
    }

    Ok(HopfReport {
        singularity: focus.location,
        trace_expr_value: trace_now,
        critical_param_value: critical,
        side,
    })
}

// ---------------------------------------------------------------------------
// Pseudo-arclength continuation of cycle branches
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchPoint {
    pub param_value: f64,
    #[serde(flatten)]
    pub cycle: LimitCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldPoint {
    pub param_value: f64,
    pub section_coord: f64,
    /// Index of the branch point just before the tangent turned.
    pub before_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchTermination {
    RangeEnd,
    /// Amplitude fell below `amp_min`.
    HopfEndpoint,
    /// Period exceeded the return budget.
    HomoclinicEndpoint,
    /// Orbits escaped the integration domain.
    Escaped,
    /// Arclength step collapsed below the floor.
    StepCollapse,
    /// Point budget exhausted.
    PointBudget,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationBranch {
    pub param: ParamId,
    pub points: Vec<BranchPoint>,
    /// Interpolated sign changes of the tangent's parameter component.
    pub folds: Vec<FoldPoint>,
    pub termination: BranchTermination,
}

impl ContinuationBranch {
    /// CSV with header `param,r,period,multiplier,stability`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "param,r,period,multiplier,stability")?;
        for pt in &self.points {
            writeln!(
                w,
                "{},{},{},{},{}",
                pt.param_value,
                pt.cycle.section_coord,
                pt.cycle.period,
                pt.cycle.multiplier,
                serde_json::to_value(pt.cycle.stability)
                    .unwrap()
                    .as_str()
                    .unwrap()
            )?;
        }
        Ok(())
    }
}

/// Arclength step controller bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepConfig {
    pub initial: f64,
    pub min: f64,
    pub max: f64,
    /// Amplitude below which the branch ends at a Hopf point.
    pub amp_min: f64,
    pub max_points: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            initial: 1e-3,
            min: 1e-10,
            max: 1e-1,
            amp_min: 1e-4,
            max_points: 600,
        }
    }
}

/// Corrected point and the Newton iteration count, when converged.
type Corrected = Option<((f64, f64), usize)>;

struct BranchProblem<'a> {
    base: CanonicalParams,
    free: ParamId,
    sec: &'a Section,
    cfg: &'a CycleConfig,
}

impl BranchProblem<'_> {
    fn g(&self, mu: f64, r: f64) -> Result<f64, CycleError> {
        displacement(&self.base.with(self.free, mu), self.sec, r, self.cfg)
    }

    /// Unit tangent of `{G = 0}` at `(mu, r)` by finite differences.
    fn tangent(&self, mu: f64, r: f64) -> Result<(f64, f64), CycleError> {
        let hm = 1e-6 * (1.0 + mu.abs());
        let hr = 1e-6 * (1.0 + r.abs());
        let gm = (self.g(mu + hm, r)? - self.g(mu - hm, r)?) / (2.0 * hm);
        let gr = (self.g(mu, r + hr)? - self.g(mu, r - hr)?) / (2.0 * hr);
        let norm = gm.hypot(gr);
        if norm == 0.0 {
            return Err(CycleError::Degenerate);
        }
        Ok((-gr / norm, gm / norm))
    }

    /// Newton corrector for `G = 0` with constraint `tau·(u - prev) = ds`.
    fn correct(
        &self,
        pred: (f64, f64),
        prev: (f64, f64),
        tau: (f64, f64),
        ds: f64,
    ) -> Result<Corrected, CycleError> {
        let (mut mu, mut r) = pred;
        for iter in 0..8 {
            let g = self.g(mu, r)?;
            let cons = tau.0 * (mu - prev.0) + tau.1 * (r - prev.1) - ds;
            if g.abs() < self.cfg.newton_tol && cons.abs() < 1e-12 * (1.0 + ds.abs()) {
                return Ok(Some(((mu, r), iter)));
            }
            let hm = 1e-6 * (1.0 + mu.abs());
            let hr = 1e-6 * (1.0 + r.abs());
            let gm = (self.g(mu + hm, r)? - self.g(mu - hm, r)?) / (2.0 * hm);
            let gr = (self.g(mu, r + hr)? - self.g(mu, r - hr)?) / (2.0 * hr);
            // Solve [gm gr; tau0 tau1]·(dmu, dr) = -(g, cons)
            let det = gm * tau.1 - gr * tau.0;
            if det.abs() < 1e-300 {
                return Ok(None);
            }
            let dmu = (-g * tau.1 + cons * gr) / det;
            let dr = (-gm * cons + tau.0 * g) / det;
            mu += dmu;
            r += dr;
            if !mu.is_finite() || !r.is_finite() || r <= 0.0 {
                return Ok(None);
            }
        }
        Ok(None)
    }
}

/// Pseudo-arclength continuation of a cycle family in one parameter,
/// starting from a converged cycle at `p0` and heading toward `range.1`.
/// Folds are reported where the tangent's parameter component changes sign.
pub fn continue_cycle(
    p0: &CanonicalParams,
    cycle0: &LimitCycle,
    sec: &Section,
    free: ParamId,
    range: (f64, f64),
    step_cfg: &StepConfig,
    cyc_cfg: &CycleConfig,
) -> ContinuationBranch {
    let problem = BranchProblem {
        base: *p0,
        free,
        sec,
        cfg: cyc_cfg,
    };
    let (lo, hi) = (range.0.min(range.1), range.0.max(range.1));
    let mut points = vec![BranchPoint {
        param_value: p0.get(free),
        cycle: cycle0.clone(),
    }];
    let mut folds = Vec::new();

    let mut u = (p0.get(free), cycle0.section_coord);
    let mut tau = match problem.tangent(u.0, u.1) {
        Ok(t) => t,
        Err(e) => {
            return ContinuationBranch {
                param: free,
                points,
                folds,
                termination: termination_of(&e),
            }
        }
    };
    let target_sign = (range.1 - range.0).signum();
    if tau.0 * target_sign < 0.0 {
        tau = (-tau.0, -tau.1);
    }

    let mut ds = step_cfg.initial;
    let mut easy_streak = 0usize;
    let termination;
    loop {
        if points.len() >= step_cfg.max_points {
            termination = BranchTermination::PointBudget;
            break;
        }
        let pred = (u.0 + ds * tau.0, u.1 + ds * tau.1);
        match problem.correct(pred, u, tau, ds) {
            Ok(Some((next, iters))) => {
                if next.0 < lo - 1e-12 || next.0 > hi + 1e-12 {
                    termination = BranchTermination::RangeEnd;
                    break;
                }
                let new_tau = match problem.tangent(next.0, next.1) {
                    Ok(t) => t,
                    Err(e) => {
                        termination = termination_of(&e);
                        break;
                    }
                };
                let new_tau = if new_tau.0 * tau.0 + new_tau.1 * tau.1 < 0.0 {
                    (-new_tau.0, -new_tau.1)
                } else {
                    new_tau
                };
                let cycle = match cycle_at(&problem.base.with(free, next.0), sec, next.1, cyc_cfg) {
                    Ok(c) => c,
                    Err(e) => {
                        termination = termination_of(&e);
                        break;
                    }
                };
                if tau.0 * new_tau.0 < 0.0 {
                    // Fold between the last two points; interpolate the zero
                    // of the tangent's parameter component.
                    let t = tau.0 / (tau.0 - new_tau.0);
                    folds.push(FoldPoint {
                        param_value: u.0 + t * (next.0 - u.0),
                        section_coord: u.1 + t * (next.1 - u.1),
                        before_index: points.len() - 1,
                    });
                }
                let amp = cycle.amplitude;
                points.push(BranchPoint {
                    param_value: next.0,
                    cycle,
                });
                if amp < step_cfg.amp_min {
                    termination = BranchTermination::HopfEndpoint;
                    break;
                }
                u = next;
                tau = new_tau;
                if iters <= 3 {
                    easy_streak += 1;
                    if easy_streak >= 3 {
                        ds = (2.0 * ds).min(step_cfg.max);
                        easy_streak = 0;
                    }
                } else {
                    easy_streak = 0;
                }
            }
            Ok(None) => {
                ds *= 0.5;
                easy_streak = 0;
                if ds < step_cfg.min {
                    termination = BranchTermination::StepCollapse;
                    break;
                }
            }
            Err(e) => {
                ds *= 0.5;
                easy_streak = 0;
                if ds < step_cfg.min {
                    termination = termination_of(&e);
                    break;
                }
            }
        }
    }

    ContinuationBranch {
        param: free,
        points,
        folds,
        termination,
    }
}

fn termination_of(e: &CycleError) -> BranchTermination {
    match e {
        CycleError::Timeout { .. } => BranchTermination::HomoclinicEndpoint,
        CycleError::NoReturn(_) => BranchTermination::Escaped,
        _ => BranchTermination::StepCollapse,
    }
}

// ---------------------------------------------------------------------------
// Separatrices
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BranchLabel {
    #[serde(rename = "u+")]
    UnstablePlus,
    #[serde(rename = "u-")]
    UnstableMinus,
    #[serde(rename = "s+")]
    StablePlus,
    #[serde(rename = "s-")]
    StableMinus,
}

impl std::fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BranchLabel::UnstablePlus => "u+",
            BranchLabel::UnstableMinus => "u-",
            BranchLabel::StablePlus => "s+",
            BranchLabel::StableMinus => "s-",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparatrixBranch {
    pub label: BranchLabel,
    /// Stable branches are integrated in reversed time; their sample times
    /// are backward time.
    pub reversed_time: bool,
    pub trajectory: crate::integrate::Trajectory,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparatrixSet {
    pub saddle: State,
    pub epsilon: f64,
    pub branches: Vec<SeparatrixBranch>,
}

impl SeparatrixSet {
    pub fn branch(&self, label: BranchLabel) -> &SeparatrixBranch {
        self.branches.iter().find(|b| b.label == label).unwrap()
    }

    /// CSV with header `t,x,y,branch`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "t,x,y,branch")?;
        for b in &self.branches {
            for (t, s) in &b.trajectory.samples {
                writeln!(w, "{},{},{},{}", t, s.x, s.y, b.label)?;
            }
        }
        Ok(())
    }
}

/// Unit eigenvectors of the saddle, `(stable, unstable, λ_s, λ_u)`, each
/// oriented with positive x component (positive y if vertical).
pub fn saddle_frame(p: &CanonicalParams, saddle: State) -> (State, State, f64, f64) {
    let j = jacobian(p, saddle);
    let (l1, l2) = j.eigenvalues();
    let (ls, lu) = (l1.re, l2.re); // real parts ascending; saddle: ls < 0 < lu
    let orient = |v: State| {
        let v = v * (1.0 / v.norm());
        if v.x < 0.0 || (v.x == 0.0 && v.y < 0.0) {
            -v
        } else {
            v
        }
    };
    (orient(j.eigenvector(ls)), orient(j.eigenvector(lu)), ls, lu)
}

/// Four separatrix branches from `±ε` offsets along the saddle eigenvectors;
/// the stable pair is integrated in reversed time.
pub fn separatrices(
    p: &CanonicalParams,
    saddle: &Singularity,
    epsilon: f64,
    cfg: &IntegratorConfig,
) -> Result<SeparatrixSet, BifurcationError> {
    if saddle.kind != SingularityKind::Saddle {
        return Err(BifurcationError::NotASaddle);
    }
    let (vs, vu, _, _) = saddle_frame(p, saddle.location);
    let runs = [
        (BranchLabel::UnstablePlus, vu, 1.0, false),
        (BranchLabel::UnstableMinus, vu, -1.0, false),
        (BranchLabel::StablePlus, vs, 1.0, true),
        (BranchLabel::StableMinus, vs, -1.0, true),
    ];
    let branches = runs
        .into_iter()
        .map(|(label, v, sign, reversed)| SeparatrixBranch {
            label,
            reversed_time: reversed,
            trajectory: integrate_directed(
                p,
                saddle.location + v * (epsilon * sign),
                cfg,
                &[],
                reversed,
            ),
        })
        .collect();
    Ok(SeparatrixSet {
        saddle: saddle.location,
        epsilon,
        branches,
    })
}

// ---------------------------------------------------------------------------
// Homoclinic gaps and the eight-loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoopSide {
    /// Loop around the anti-saddle left of the saddle.
    Left,
    /// Loop around the anti-saddle right of the saddle.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomoclinicConfig {
    /// Offset of the branch seed along the eigenvector.
    pub epsilon: f64,
    /// Time budget per branch.
    pub branch_t_max: f64,
    /// Transversal abscissa override; default is the saddle–focus midpoint.
    pub transversal_x: Option<f64>,
    pub integrator: IntegratorConfig,
}

impl Default for HomoclinicConfig {
    fn default() -> Self {
        HomoclinicConfig {
            epsilon: 1e-7,
            branch_t_max: 800.0,
            transversal_x: None,
            integrator: IntegratorConfig::default(),
        }
    }
}

fn saddle_and_focus(
    p: &CanonicalParams,
    side: LoopSide,
) -> Result<(Singularity, Singularity), BifurcationError> {
    let sings = finite_singularities(p);
    let saddle = sings
        .iter()
        .find(|s| s.kind == SingularityKind::Saddle)
        .copied()
        .ok_or(BifurcationError::NotASaddle)?;
    let focus = sings
        .iter()
        .filter(|s| s.det > DET_TOL)
        .filter(|s| match side {
            LoopSide::Left => s.location.x < saddle.location.x,
            LoopSide::Right => s.location.x > saddle.location.x,
        })
        .min_by(|a, b| {
            let da = (a.location.x - saddle.location.x).abs();
            let db = (b.location.x - saddle.location.x).abs();
            da.partial_cmp(&db).unwrap()
        })
        .copied()
        .ok_or(BifurcationError::NoFocusOnSide(side))?;
    Ok((saddle, focus))
}

/// Signed splitting of the separatrix loop on one side of the saddle: the
/// difference of the y-coordinates at which the unstable branch (first
/// crossing moving back toward the saddle) and the stable branch (first
/// backward-time crossing) meet a vertical transversal between the saddle
/// and the enclosed focus. Zero at a homoclinic loop.
pub fn homoclinic_gap(
    p: &CanonicalParams,
    side: LoopSide,
    cfg: &HomoclinicConfig,
) -> Result<f64, BifurcationError> {
    let (saddle, focus) = saddle_and_focus(p, side)?;
    let x_t = cfg
        .transversal_x
        .unwrap_or(0.5 * (saddle.location.x + focus.location.x));
    let (vs, vu, _, _) = saddle_frame(p, saddle.location);
    let sign = match side {
        LoopSide::Left => -1.0,
        LoopSide::Right => 1.0,
    };
    let icfg = IntegratorConfig {
        t_max: cfg.branch_t_max,
        ..cfg.integrator
    };

    // Unstable branch forward; the return crossing moves toward the saddle.
    let dir_u = match side {
        LoopSide::Left => CrossingDirection::Rising,
        LoopSide::Right => CrossingDirection::Falling,
    };
    let ev = Event::new("transversal", dir_u, true, move |_t, s: State| s.x - x_t);
    let traj_u = integrate_directed(
        p,
        saddle.location + vu * (cfg.epsilon * sign),
        &icfg,
        &[ev],
        false,
    );
    let label_u = if sign > 0.0 {
        BranchLabel::UnstablePlus
    } else {
        BranchLabel::UnstableMinus
    };
    let y_u = traj_u
        .events
        .first()
        .map(|e| e.state.y)
        .ok_or(BifurcationError::BranchEscaped {
            branch: label_u,
            status: format!("{:?}", traj_u.status),
        })?;

    // Stable branch in reversed time; the observed crossing direction flips.
    let dir_s = match side {
        LoopSide::Left => CrossingDirection::Falling,
        LoopSide::Right => CrossingDirection::Rising,
    };
    let ev = Event::new("transversal", dir_s, true, move |_t, s: State| s.x - x_t);
    let traj_s = integrate_directed(
        p,
        saddle.location + vs * (cfg.epsilon * sign),
        &icfg,
        &[ev],
        true,
    );
    let label_s = if sign > 0.0 {
        BranchLabel::StablePlus
    } else {
        BranchLabel::StableMinus
    };
    let y_s = traj_s
        .events
        .first()
        .map(|e| e.state.y)
        .ok_or(BifurcationError::BranchEscaped {
            branch: label_s,
            status: format!("{:?}", traj_s.status),
        })?;

    Ok(y_u - y_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EightLoop {
    pub alpha2_left: f64,
    pub alpha2_right: f64,
    /// `|alpha2_left - alpha2_right|`: zero would be a simultaneous
    /// eight-loop; off the symmetric locus the two sides differ.
    pub difference: f64,
    pub gap_left_residual: f64,
    pub gap_right_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EightLoopConfig {
    pub gap_tol: f64,
    pub max_iter: usize,
    pub homoclinic: HomoclinicConfig,
}

impl Default for EightLoopConfig {
    fn default() -> Self {
        EightLoopConfig {
            gap_tol: 1e-8,
            max_iter: 200,
            homoclinic: HomoclinicConfig::default(),
        }
    }
}

/// Bisects each side's homoclinic gap to zero over an `α₂` bracket with
/// opposite gap signs at the ends.
pub fn eight_loop_find(
    p_base: &CanonicalParams,
    bracket: (f64, f64),
    cfg: &EightLoopConfig,
) -> Result<EightLoop, BifurcationError> {
    let mut roots = [0.0f64; 2];
    let mut residuals = [0.0f64; 2];
    for (i, side) in [LoopSide::Left, LoopSide::Right].into_iter().enumerate() {
        let (root, residual) = bisect_gap(p_base, side, bracket, cfg)?;
        roots[i] = root;
        residuals[i] = residual;
    }
    Ok(EightLoop {
        alpha2_left: roots[0],
        alpha2_right: roots[1],
        difference: (roots[0] - roots[1]).abs(),
        gap_left_residual: residuals[0],
        gap_right_residual: residuals[1],
    })
}

fn bisect_gap(
    p_base: &CanonicalParams,
    side: LoopSide,
    (mut lo, mut hi): (f64, f64),
    cfg: &EightLoopConfig,
) -> Result<(f64, f64), BifurcationError> {
    let eval = |a2: f64| homoclinic_gap(&p_base.with(ParamId::Alpha2, a2), side, &cfg.homoclinic);
    // Either end may already be a root (the degenerate integrable case), and
    // deep ends of generous brackets may have no loop structure at all:
    // accept roots first, then walk an undefined endpoint inward.
    let mut rlo = eval(lo);
    if let Ok(g) = rlo {
        if g.abs() < cfg.gap_tol {
            return Ok((lo, g));
        }
    }
    let rhi = eval(hi);
    if let Ok(g) = rhi {
        if g.abs() < cfg.gap_tol {
            return Ok((hi, g));
        }
    }
    let ghi = rhi?;
    for _ in 0..40 {
        if rlo.is_ok() {
            break;
        }
        lo += (hi - lo) / 16.0;
        rlo = eval(lo);
    }
    let mut glo = rlo?;
    if glo.abs() < cfg.gap_tol {
        return Ok((lo, glo));
    }
    if glo * ghi > 0.0 {
        return Err(BifurcationError::NoBracket { side, lo, hi });
    }
    let mut best = (0.5 * (lo + hi), f64::INFINITY);
    for _ in 0..cfg.max_iter {
        let mid = 0.5 * (lo + hi);
        let g = eval(mid)?;
        if g.abs() < best.1.abs() {
            best = (mid, g);
        }
        if g.abs() < cfg.gap_tol {
            return Ok((mid, g));
        }
        if (g > 0.0) == (glo > 0.0) {
            lo = mid;
            glo = g;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

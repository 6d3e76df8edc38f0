//! Poincaré sections, return maps and limit cycles.
//!
//! A section is a transversal ray from an anti-saddle; fixed points of the
//! first-return map along the ray are limit cycles. Cycles found here carry
//! their period, nontrivial Floquet multiplier, stability, amplitude and
//! the set of finite singularities they enclose.

use rayon::prelude::*;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::integrate::{
    integrate_with_variational, refine_crossing, sample_orbit, state_rhs, Dopri5, IntegratorConfig,
    TrajectoryStatus,
};
use crate::model::{eval_field, finite_singularities, CanonicalParams, State};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CycleError {
    /// The orbit escaped or reached an equilibrium before returning.
    #[error("orbit does not return to the section ({0})")]
    NoReturn(String),
    /// No return within the configured time budget. Near-homoclinic periods
    /// blow up, so this is a first-class, non-fatal outcome.
    #[error("no return within t_max = {t_max}")]
    Timeout { t_max: f64 },
    #[error("Newton iteration diverged")]
    NewtonDiverged,
    /// Return-map derivative within `mult_tol` of 1: fold suspected, the
    /// continuation machinery should take over.
    #[error("return map is degenerate at the fixed point (derivative ≈ 1)")]
    Degenerate,
    #[error("section coordinate must be positive, got {0}")]
    InvalidRadius(f64),
}

/// A transversal ray anchored at a focus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Section {
    pub anchor: State,
    /// Unit direction of the ray.
    pub direction: State,
    pub half_line: bool,
}

impl Section {
    pub fn new(anchor: State, direction: State) -> Self {
        let n = direction.norm();
        Section {
            anchor,
            direction: direction * (1.0 / n),
            half_line: true,
        }
    }

    /// Horizontal ray in `±x` from the anchor.
    pub fn horizontal(anchor: State, positive_x: bool) -> Self {
        Section::new(anchor, State::new(if positive_x { 1.0 } else { -1.0 }, 0.0))
    }

    /// The point at signed distance `r` along the ray.
    pub fn point(&self, r: f64) -> State {
        self.anchor + self.direction * r
    }

    /// Signed distance of `s` along the ray direction.
    pub fn coord(&self, s: State) -> f64 {
        (s - self.anchor).dot(self.direction)
    }

    /// Signed perpendicular offset of `s` from the section line.
    pub fn offset(&self, s: State) -> f64 {
        self.direction.cross(s - self.anchor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Stable,
    Unstable,
    SemiStableCandidate,
}

/// A periodic orbit anchored to a section.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCycle {
    /// Signed distance of the fixed point along the ray.
    #[serde(rename = "r")]
    pub section_coord: f64,
    pub period: f64,
    /// Nontrivial Floquet multiplier (the trivial one equals 1 and is
    /// discarded).
    pub multiplier: f64,
    pub stability: Stability,
    /// Locations of the finite singularities the cycle winds around.
    #[serde(serialize_with = "serialize_points")]
    pub enclosed: Vec<State>,
    /// Maximum distance from the section anchor.
    pub amplitude: f64,
}

fn serialize_points<S: Serializer>(points: &[State], ser: S) -> Result<S::Ok, S::Error> {
    let mut seq = ser.serialize_seq(Some(points.len()))?;
    for p in points {
        seq.serialize_element(&(p.x, p.y))?;
    }
    seq.end()
}

/// Tolerances and budgets for the cycle machinery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleConfig {
    pub integrator: IntegratorConfig,
    /// Budget for a single return (near-homoclinic periods blow up).
    pub return_t_max: f64,
    /// Fixed-point residual target in section-coordinate units.
    pub newton_tol: f64,
    /// Semi-stable band around multiplier 1.
    pub mult_tol: f64,
    /// Displacements below `floor·(1 + r)` are treated as integration noise
    /// when bracketing sign changes (centers would otherwise produce
    /// spurious cycles).
    pub displacement_floor: f64,
    pub max_newton_iter: usize,
    /// Points on the polyline used for winding numbers and amplitude.
    pub polyline_points: usize,
    /// Inner radius for the big-cycle scan; if unset, 1.5× the largest
    /// centroid-to-singularity distance plus 0.5.
    pub big_r_min: Option<f64>,
    /// Geometric seed count for the big-cycle scan out to
    /// `escape_radius / 2`.
    pub big_seeds: usize,
}

impl Default for CycleConfig {
    fn default() -> Self {
        CycleConfig {
            integrator: IntegratorConfig::default(),
            return_t_max: 1e4,
            newton_tol: 1e-10,
            mult_tol: 1e-4,
            displacement_floor: 1e-7,
            max_newton_iter: 50,
            polyline_points: 512,
            big_r_min: None,
            big_seeds: 28,
        }
    }
}

impl CycleConfig {
    pub fn with_integrator(mut self, integrator: IntegratorConfig) -> Self {
        self.integrator = integrator;
        self
    }
}

/// Rotation sense of the orbit through `sec.point(r)`: the sign of
/// `d(offset)/dt` there, falling back to probes near the anchor when the
/// field is tangent to the ray at the start point.
fn crossing_sense(p: &CanonicalParams, sec: &Section, r: f64) -> f64 {
    let v = eval_field(p, sec.point(r));
    let s = sec.direction.cross(v);
    if s.abs() > 1e-9 * v.norm() {
        return s.signum();
    }
    for delta in [1e-3, 1e-2, 0.1] {
        let v = eval_field(p, sec.point(r + delta * r.max(1.0)));
        let s = sec.direction.cross(v);
        if s != 0.0 {
            return s.signum();
        }
    }
    1.0
}

/// First return of the orbit through `sec.point(r)` to the ray, in the
/// flow's rotational sense. Returns `(r', T)`.
pub fn return_map(
    p: &CanonicalParams,
    sec: &Section,
    r: f64,
    cfg: &CycleConfig,
) -> Result<(f64, f64), CycleError> {
    if r.is_nan() || r <= 0.0 {
        return Err(CycleError::InvalidRadius(r));
    }
    let sense = crossing_sense(p, sec, r);
    let s0 = sec.point(r);
    let mut stepper = Dopri5::new(state_rhs(p, false), 0.0, s0.into(), &cfg.integrator);

    let offset_of = |y: &[f64; 2]| sec.offset(State::new(y[0], y[1]));
    let mut g_prev = 0.0; // starting exactly on the section
    loop {
        if stepper.t > cfg.return_t_max {
            return Err(CycleError::Timeout {
                t_max: cfg.return_t_max,
            });
        }
        if stepper.advance(f64::INFINITY).is_err() {
            return Err(CycleError::NoReturn("step failure".into()));
        }
        let g1 = offset_of(&stepper.y);
        // Crossing in the anchor's rotational sense: offset moves through 0
        // with sign matching `sense`.
        if g_prev != 0.0 && g_prev * g1 <= 0.0 && (g1 - g_prev).signum() == sense {
            let dense = |t: f64| stepper.dense(t);
            let gfun = |_t: f64, y: &[f64; 2]| offset_of(y);
            let (te, ye) = refine_crossing(
                &dense,
                &gfun,
                stepper.t_prev,
                g_prev,
                stepper.t,
                cfg.integrator.event_tol,
            );
            let se = State::new(ye[0], ye[1]);
            let coord = sec.coord(se);
            if coord > 0.0 || !sec.half_line {
                return Ok((coord, te));
            }
        }
        g_prev = g1;

        let s1 = State::new(stepper.y[0], stepper.y[1]);
        if s1.norm() > cfg.integrator.escape_radius {
            return Err(CycleError::NoReturn("escaped".into()));
        }
        if eval_field(p, s1).norm() < 1e-13 {
            return Err(CycleError::NoReturn("reached an equilibrium".into()));
        }
    }
}

/// Displacement `d(r) = return(r) - r`.
pub fn displacement(
    p: &CanonicalParams,
    sec: &Section,
    r: f64,
    cfg: &CycleConfig,
) -> Result<f64, CycleError> {
    return_map(p, sec, r, cfg).map(|(r1, _)| r1 - r)
}

/// Central finite-difference derivative of the return map.
pub fn return_map_derivative(
    p: &CanonicalParams,
    sec: &Section,
    r: f64,
    h: f64,
    cfg: &CycleConfig,
) -> Result<f64, CycleError> {
    let (plus, _) = return_map(p, sec, r + h, cfg)?;
    let (minus, _) = return_map(p, sec, r - h, cfg)?;
    Ok((plus - minus) / (2.0 * h))
}

/// Builds the full cycle record at an (already refined) fixed point.
///
/// No transversality requirement: continuation uses this near folds.
pub fn cycle_at(
    p: &CanonicalParams,
    sec: &Section,
    r: f64,
    cfg: &CycleConfig,
) -> Result<LimitCycle, CycleError> {
    let (_, period) = return_map(p, sec, r, cfg)?;
    let s0 = sec.point(r);

    let run = integrate_with_variational(p, s0, &cfg.integrator, period);
    if run.trajectory.status != TrajectoryStatus::Completed {
        return Err(CycleError::NoReturn(format!(
            "variational run ended with {:?}",
            run.trajectory.status
        )));
    }
    let multiplier = nontrivial_multiplier(&run.monodromy);

    let stability = if multiplier < 1.0 - cfg.mult_tol {
        Stability::Stable
    } else if multiplier > 1.0 + cfg.mult_tol {
        Stability::Unstable
    } else {
        Stability::SemiStableCandidate
    };

    let polyline = sample_orbit(p, s0, period, cfg.polyline_points, &cfg.integrator);
    let amplitude = polyline
        .iter()
        .map(|s| s.dist(sec.anchor))
        .fold(0.0f64, f64::max);
    let enclosed = finite_singularities(p)
        .into_iter()
        .filter(|s| winding_number(&polyline, s.location) != 0)
        .map(|s| s.location)
        .collect();

    Ok(LimitCycle {
        section_coord: r,
        period,
        multiplier,
        stability,
        enclosed,
        amplitude,
    })
}

/// The nontrivial Floquet multiplier of a cycle's monodromy matrix: of the
/// two eigenvalues, the one nearer 1 is the trivial flow-direction
/// multiplier and is discarded.
pub fn nontrivial_multiplier(monodromy: &crate::model::Mat2) -> f64 {
    let (l1, l2) = monodromy.eigenvalues();
    if l1.im.abs() > 1e-9 * l1.norm().max(1.0) {
        // Numerically complex pair only happens when both are ~1 (fold):
        // fall back on det M = trivial · nontrivial with trivial = 1.
        return monodromy.det();
    }
    if (l1.re - 1.0).abs() <= (l2.re - 1.0).abs() {
        l2.re
    } else {
        l1.re
    }
}

/// Winding number of a closed polyline around `center`.
pub fn winding_number(polyline: &[State], center: State) -> i32 {
    if polyline.len() < 3 {
        return 0;
    }
    let mut total = 0.0;
    let mut prev = polyline[0] - center;
    for s in polyline.iter().skip(1).chain(std::iter::once(&polyline[0])) {
        let cur = *s - center;
        total += prev.cross(cur).atan2(prev.dot(cur));
        prev = cur;
    }
    (total / std::f64::consts::TAU).round() as i32
}

/// Refines a fixed point of the return map from `r_guess`: expands a
/// bracket around the guess on the displacement's sign change, then applies
/// safeguarded Newton/secant steps inside it. Rejects degenerate
/// (multiplier ≈ 1) fixed points.
pub fn find_cycle(
    p: &CanonicalParams,
    sec: &Section,
    r_guess: f64,
    cfg: &CycleConfig,
) -> Result<LimitCycle, CycleError> {
    let d0 = displacement(p, sec, r_guess, cfg)?;
    let r_star = if d0.abs() < cfg.newton_tol {
        r_guess
    } else {
        // Geometric march away from the guess, both directions, until the
        // displacement changes sign. A probe that leaves the return map's
        // domain (escape, another basin) ends that direction's search, and a
        // candidate bracket that refuses to converge (a separatrix jump of
        // the map, not a root) falls through to the other direction.
        let mut brackets = Vec::new();
        for factor in [1.12f64, 1.0 / 1.12] {
            let mut prev_r = r_guess;
            let mut prev_d = d0;
            let mut r = r_guess;
            for _ in 0..cfg.max_newton_iter {
                r *= factor;
                if r <= 0.0 {
                    break;
                }
                let d = match displacement(p, sec, r, cfg) {
                    Ok(d) => d,
                    Err(_) => break,
                };
                if prev_d * d <= 0.0 {
                    brackets.push((prev_r, prev_d, r, d));
                    break;
                }
                prev_r = r;
                prev_d = d;
            }
        }
        // Prefer the bracket with the smaller displacement jump.
        brackets.sort_by(|x, y| {
            let jx = (x.3 - x.1).abs();
            let jy = (y.3 - y.1).abs();
            jx.partial_cmp(&jy).unwrap()
        });
        let mut found = None;
        for (a, fa, b, fb) in brackets {
            if let Ok(r) = refine_bracket(p, sec, a, fa, b, fb, cfg) {
                found = Some(r);
                break;
            }
        }
        found.ok_or(CycleError::NewtonDiverged)?
    };

    // Transversality check: the map derivative must sit away from 1.
    let h = 1e-6 * (1.0 + r_star.abs());
    let deriv = return_map_derivative(p, sec, r_star, h, cfg)?;
    if (deriv - 1.0).abs() < cfg.mult_tol {
        return Err(CycleError::Degenerate);
    }
    cycle_at(p, sec, r_star, cfg)
}

/// Bisection/secant hybrid on a bracketed sign change of the displacement.
/// Fails when the residual will not drop (a jump of the return map across a
/// separatrix looks like a sign change but has no root).
fn refine_bracket(
    p: &CanonicalParams,
    sec: &Section,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    cfg: &CycleConfig,
) -> Result<f64, CycleError> {
    debug_assert!(fa * fb <= 0.0);
    for _ in 0..120 {
        // Secant candidate, safeguarded to the interior.
        let mut c = b - fb * (b - a) / (fb - fa);
        let lo = a.min(b);
        let hi = a.max(b);
        if !c.is_finite() || c <= lo + 0.05 * (hi - lo) || c >= hi - 0.05 * (hi - lo) {
            c = 0.5 * (a + b);
        }
        let fc = displacement(p, sec, c, cfg)?;
        if fc.abs() < cfg.newton_tol {
            return Ok(c);
        }
        if (hi - lo) < f64::EPSILON * hi.abs() {
            return Err(CycleError::NewtonDiverged);
        }
        if (fc > 0.0) == (fa > 0.0) {
            a = c;
            fa = fc;
        } else {
            b = c;
            fb = fc;
        }
    }
    Err(CycleError::NewtonDiverged)
}

/// Outcome of a cycle scan: the cycles found plus any radii where the
/// return map was undefined.
#[derive(Debug, Clone, Serialize)]
pub struct CycleScan {
    pub cycles: Vec<LimitCycle>,
    pub anomalies: Vec<String>,
}

/// Scans `n_seeds` radii (geometrically spaced), brackets each sign change
/// of the displacement, refines the fixed points and deduplicates. Cycles
/// are ordered by section coordinate; stabilities alternate by the
/// intermediate-value property.
pub fn count_cycles(
    p: &CanonicalParams,
    sec: &Section,
    r_min: f64,
    r_max: f64,
    n_seeds: usize,
    cfg: &CycleConfig,
) -> CycleScan {
    assert!(r_min > 0.0 && r_max > r_min && n_seeds >= 2);
    let ratio = (r_max / r_min).powf(1.0 / (n_seeds - 1) as f64);
    let seeds: Vec<f64> = (0..n_seeds).map(|i| r_min * ratio.powi(i as i32)).collect();
    scan_seeds(p, sec, &seeds, cfg, None)
}

fn scan_seeds(
    p: &CanonicalParams,
    sec: &Section,
    seeds: &[f64],
    cfg: &CycleConfig,
    keep_only: Option<&(dyn Fn(&LimitCycle) -> bool + Sync)>,
) -> CycleScan {
    let disps: Vec<(f64, Result<f64, CycleError>)> = seeds
        .par_iter()
        .map(|&r| (r, displacement(p, sec, r, cfg)))
        .collect();

    let mut anomalies = Vec::new();
    let mut valid: Vec<(f64, f64)> = Vec::new();
    for (r, res) in disps {
        match res {
            Ok(d) => valid.push((r, d)),
            Err(e) => anomalies.push(format!("r={r}: {e}")),
        }
    }

    let mut cycles: Vec<LimitCycle> = Vec::new();
    for w in valid.windows(2) {
        let ((ra, da), (rb, db)) = (w[0], w[1]);
        if da * db >= 0.0 {
            continue;
        }
        // Ignore brackets lost in integration noise (center annuli).
        let floor = cfg.displacement_floor * (1.0 + rb);
        if da.abs().max(db.abs()) <= floor {
            continue;
        }
        match refine_bracket(p, sec, ra, da, rb, db, cfg) {
            Ok(r_star) => match cycle_at(p, sec, r_star, cfg) {
                Ok(cycle) => {
                    if keep_only.is_none_or(|f| f(&cycle)) {
                        cycles.push(cycle);
                    }
                }
                Err(e) => anomalies.push(format!("r={r_star}: {e}")),
            },
            Err(e) => anomalies.push(format!("bracket [{ra}, {rb}]: {e}")),
        }
    }

    cycles.sort_by(|a, b| a.section_coord.partial_cmp(&b.section_coord).unwrap());
    cycles.dedup_by(|b, a| (b.section_coord - a.section_coord).abs() < 10.0 * cfg.newton_tol);
    CycleScan { cycles, anomalies }
}

/// Outcome of the big-cycle search.
#[derive(Debug, Clone, Serialize)]
pub struct BigCycleScan {
    /// The innermost cycle enclosing every finite singularity, if any.
    pub cycle: Option<LimitCycle>,
    /// All such cycles found in the scan, innermost first.
    pub all: Vec<LimitCycle>,
    pub anomalies: Vec<String>,
}

/// Searches for cycles enclosing all finite singularities, seeding
/// return-map brackets geometrically on a `+x` ray from the centroid of the
/// finite singularities, out to half the escape radius.
pub fn detect_big_cycle(p: &CanonicalParams, cfg: &CycleConfig) -> BigCycleScan {
    let sings = finite_singularities(p);
    let n = sings.len() as f64;
    let centroid = sings
        .iter()
        .fold(State::new(0.0, 0.0), |acc, s| acc + s.location)
        * (1.0 / n);
    let max_dist = sings
        .iter()
        .map(|s| s.location.dist(centroid))
        .fold(0.0f64, f64::max);
    let r_lo = cfg.big_r_min.unwrap_or(1.5 * max_dist + 0.5);
    let r_hi = (cfg.integrator.escape_radius / 2.0).max(2.0 * r_lo);

    let sec = Section::horizontal(centroid, true);
    let ratio = (r_hi / r_lo).powf(1.0 / (cfg.big_seeds - 1) as f64);
    let seeds: Vec<f64> = (0..cfg.big_seeds)
        .map(|i| r_lo * ratio.powi(i as i32))
        .collect();

    let want = sings.len();
    let keep = |c: &LimitCycle| c.enclosed.len() == want;
    let scan = scan_seeds(p, &sec, &seeds, cfg, Some(&keep));
    BigCycleScan {
        cycle: scan.cycles.first().cloned(),
        all: scan.cycles,
        anomalies: scan.anomalies,
    }
}

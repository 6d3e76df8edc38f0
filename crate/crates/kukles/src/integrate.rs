//! Adaptive explicit Runge–Kutta integration of the canonical field.
//!
//! Dormand–Prince 5(4) with the free 4th-order dense interpolant, step-size
//! control with PI stabilization, event location by bisection on the dense
//! output, escape/equilibrium detection, and co-integration of the
//! variational equations for monodromy matrices.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::model::{eval_field, jacobian, CanonicalParams, Mat2, State};

/// Below `1e-14·max(|t|, 1)` the step controller gives up.
const STEP_FLOOR: f64 = 1e-14;
/// `‖field‖` below this for three consecutive accepted steps stops the run.
const EQUILIBRIUM_NORM: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub t_max: f64,
    pub escape_radius: f64,
    pub event_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-9,
            atol: 1e-12,
            max_step: 0.1,
            t_max: 100.0,
            escape_radius: 1e3,
            event_tol: 1e-11,
        }
    }
}

impl IntegratorConfig {
    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    /// Halved tolerances, for convergence studies.
    pub fn halved(mut self) -> Self {
        self.rtol *= 0.5;
        self.atol *= 0.5;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryStatus {
    /// Reached `t_max` or a terminal event.
    Completed,
    /// Left the ball of radius `escape_radius`.
    Escaped,
    /// Field norm stayed below the equilibrium threshold.
    EquilibriumReached,
    /// The error controller drove the step below the floor.
    StepFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub t: f64,
    pub state: State,
    pub event: String,
}

/// A dense-output integration result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// `(t, state)` at accepted steps, times strictly increasing.
    pub samples: Vec<(f64, State)>,
    pub events: Vec<EventRecord>,
    pub status: TrajectoryStatus,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        self.samples.last().map(|(t, _)| *t).unwrap_or(0.0)
    }

    pub fn final_state(&self) -> State {
        self.samples
            .last()
            .map(|(_, s)| *s)
            .expect("trajectory has at least the initial sample")
    }

    /// CSV with header `t,x,y`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "t,x,y")?;
        for (t, s) in &self.samples {
            writeln!(w, "{},{},{}", t, s.x, s.y)?;
        }
        Ok(())
    }

    /// JSON lines, one sample per line; event records carry an `event` field
    /// and are interleaved by time.
    pub fn write_jsonl<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let mut ev = self.events.iter().peekable();
        for (t, s) in &self.samples {
            while let Some(e) = ev.peek() {
                if e.t <= *t {
                    writeln!(
                        w,
                        "{{\"t\":{},\"x\":{},\"y\":{},\"event\":{}}}",
                        e.t,
                        e.state.x,
                        e.state.y,
                        serde_json::to_string(&e.event).unwrap()
                    )?;
                    ev.next();
                } else {
                    break;
                }
            }
            writeln!(w, "{{\"t\":{},\"x\":{},\"y\":{}}}", t, s.x, s.y)?;
        }
        for e in ev {
            writeln!(
                w,
                "{{\"t\":{},\"x\":{},\"y\":{},\"event\":{}}}",
                e.t,
                e.state.x,
                e.state.y,
                serde_json::to_string(&e.event).unwrap()
            )?;
        }
        Ok(())
    }
}

/// Which sign changes of an event function count as a crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingDirection {
    Any,
    /// Negative to positive.
    Rising,
    /// Positive to negative.
    Falling,
}

impl CrossingDirection {
    fn matches(self, g_before: f64) -> bool {
        match self {
            CrossingDirection::Any => true,
            CrossingDirection::Rising => g_before < 0.0,
            CrossingDirection::Falling => g_before > 0.0,
        }
    }
}

/// A scalar event function; crossings of zero are located on the dense output.
pub struct Event<'a> {
    pub label: String,
    pub direction: CrossingDirection,
    /// Terminal events truncate the trajectory at the crossing.
    pub terminal: bool,
    pub f: Box<dyn Fn(f64, State) -> f64 + 'a>,
}

impl<'a> Event<'a> {
    pub fn new(
        label: impl Into<String>,
        direction: CrossingDirection,
        terminal: bool,
        f: impl Fn(f64, State) -> f64 + 'a,
    ) -> Self {
        Event {
            label: label.into(),
            direction,
            terminal,
            f: Box::new(f),
        }
    }
}

// ---------------------------------------------------------------------------
// Dormand–Prince 5(4) core, generic over the system dimension
// ---------------------------------------------------------------------------

const A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

#[derive(Debug)]
pub(crate) struct StepUnderflow {
    #[allow(dead_code)] // carried for diagnostics in Debug output
    pub t: f64,
}

/// The adaptive stepper. `advance` moves one accepted step forward and keeps
/// the dense-output coefficients for `[t_prev, t]`.
pub(crate) struct Dopri5<F, const N: usize> {
    f: F,
    pub t: f64,
    pub y: [f64; N],
    pub t_prev: f64,
    pub y_prev: [f64; N],
    k1: [f64; N],
    h: f64,
    h_used: f64,
    cont: [[f64; N]; 5],
    rtol: f64,
    atol: f64,
    max_step: f64,
    facold: f64,
    pub n_accepted: usize,
    pub n_rejected: usize,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, coeffs: &[f64], ks: &[[f64; N]]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in coeffs.iter().zip(ks.iter()) {
        if *c != 0.0 {
            for i in 0..N {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

impl<F, const N: usize> Dopri5<F, N>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    pub fn new(mut f: F, t0: f64, y0: [f64; N], cfg: &IntegratorConfig) -> Self {
        let k1 = f(t0, &y0);
        let ynorm: f64 = y0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let fnorm: f64 = k1.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h0 = (0.01 * (1.0 + ynorm) / (1.0 + fnorm)).min(cfg.max_step);
        Dopri5 {
            f,
            t: t0,
            y: y0,
            t_prev: t0,
            y_prev: y0,
            k1,
            h: h0,
            h_used: 0.0,
            cont: [[0.0; N]; 5],
            rtol: cfg.rtol,
            atol: cfg.atol,
            max_step: cfg.max_step,
            facold: 1e-4,
            n_accepted: 0,
            n_rejected: 0,
        }
    }

    /// One accepted step, not advancing past `t_cap`.
    pub fn advance(&mut self, t_cap: f64) -> Result<(), StepUnderflow> {
        loop {
            let mut h = self.h.min(self.max_step);
            let clamped = h >= t_cap - self.t;
            if clamped {
                h = t_cap - self.t;
            }
            if h < STEP_FLOOR * self.t.abs().max(1.0) {
                return Err(StepUnderflow { t: self.t });
            }

            let k1 = self.k1;
            let k2 = (self.f)(self.t + C[0] * h, &axpy(&self.y, h, &A[0][..1], &[k1]));
            let k3 = (self.f)(self.t + C[1] * h, &axpy(&self.y, h, &A[1][..2], &[k1, k2]));
            let k4 = (self.f)(
                self.t + C[2] * h,
                &axpy(&self.y, h, &A[2][..3], &[k1, k2, k3]),
            );
            let k5 = (self.f)(
                self.t + C[3] * h,
                &axpy(&self.y, h, &A[3][..4], &[k1, k2, k3, k4]),
            );
            let k6 = (self.f)(
                self.t + C[4] * h,
                &axpy(&self.y, h, &A[4][..5], &[k1, k2, k3, k4, k5]),
            );
            let y_new = axpy(&self.y, h, &A[5], &[k1, k2, k3, k4, k5, k6]);
            let t_new = self.t + h;
            let k7 = (self.f)(t_new, &y_new);

            let ks = [k1, k2, k3, k4, k5, k6, k7];
            let mut err = 0.0;
            for i in 0..N {
                let mut e = 0.0;
                for (j, k) in ks.iter().enumerate() {
                    e += E[j] * k[i];
                }
                e *= h;
                let sk = self.atol + self.rtol * self.y[i].abs().max(y_new[i].abs());
                err += (e / sk) * (e / sk);
            }
            err = err.sqrt();

            let fac11 = err.powf(0.2);
            if err <= 1.0 {
                // Accept: build dense-output coefficients.
                self.facold = err.max(1e-4);
                let mut ydiff = [0.0; N];
                let mut bspl = [0.0; N];
                let mut dsum = [0.0; N];
                for i in 0..N {
                    ydiff[i] = y_new[i] - self.y[i];
                    bspl[i] = h * k1[i] - ydiff[i];
                    let mut s = 0.0;
                    for (j, k) in ks.iter().enumerate() {
                        s += D[j] * k[i];
                    }
                    dsum[i] = h * s;
                }
                self.cont[0] = self.y;
                self.cont[1] = ydiff;
                self.cont[2] = bspl;
                let mut c3 = [0.0; N];
                for i in 0..N {
                    c3[i] = ydiff[i] - h * k7[i] - bspl[i];
                }
                self.cont[3] = c3;
                self.cont[4] = dsum;

                self.t_prev = self.t;
                self.y_prev = self.y;
                self.t = t_new;
                self.y = y_new;
                self.k1 = k7;
                self.h_used = h;
                self.n_accepted += 1;

                let fac = (fac11 / self.facold.powf(0.04) / 0.8).clamp(0.1, 5.0);
                let mut h_next = h / fac;
                if clamped {
                    h_next = h_next.max(self.h);
                }
                self.h = h_next.min(self.max_step);
                return Ok(());
            }
            self.n_rejected += 1;
            self.h = h / (fac11 / 0.8).min(5.0);
        }
    }

    /// Dense output on the last accepted interval `[t_prev, t]`.
    pub fn dense(&self, t: f64) -> [f64; N] {
        if self.h_used == 0.0 {
            return self.y;
        }
        let s = (t - self.t_prev) / self.h_used;
        let s1 = 1.0 - s;
        let mut out = [0.0; N];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.cont[0][i]
                + s * (self.cont[1][i]
                    + s1 * (self.cont[2][i] + s * (self.cont[3][i] + s1 * self.cont[4][i])));
        }
        out
    }
}

/// Locates a zero of `g` on the stepper's dense interval by bisection.
/// `(ta, ga)` and `(tb, gb)` must bracket the zero.
pub(crate) fn refine_crossing<const N: usize>(
    dense: &dyn Fn(f64) -> [f64; N],
    g: &dyn Fn(f64, &[f64; N]) -> f64,
    mut ta: f64,
    mut ga: f64,
    mut tb: f64,
    event_tol: f64,
) -> (f64, [f64; N]) {
    let mut tm = 0.5 * (ta + tb);
    let mut ym = dense(tm);
    for _ in 0..80 {
        let gm = g(tm, &ym);
        if gm.abs() < event_tol {
            return (tm, ym);
        }
        if (gm > 0.0) == (ga > 0.0) {
            ta = tm;
            ga = gm;
        } else {
            tb = tm;
        }
        tm = 0.5 * (ta + tb);
        ym = dense(tm);
    }
    (tm, ym)
}

pub(crate) fn state_rhs<'a>(
    p: &'a CanonicalParams,
    backward: bool,
) -> impl FnMut(f64, &[f64; 2]) -> [f64; 2] + 'a {
    move |_t, y| {
        let f = eval_field(p, State::new(y[0], y[1]));
        if backward {
            [-f.x, -f.y]
        } else {
            [f.x, f.y]
        }
    }
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

/// Integrates the canonical field from `s0` until `t_max`, escape,
/// equilibrium, a terminal event or a step failure.
pub fn integrate(
    p: &CanonicalParams,
    s0: State,
    cfg: &IntegratorConfig,
    events: &[Event<'_>],
) -> Trajectory {
    integrate_directed(p, s0, cfg, events, false)
}

/// As [`integrate`], but along the time-reversed field when `backward` is
/// set; sample times are then backward time.
pub fn integrate_directed(
    p: &CanonicalParams,
    s0: State,
    cfg: &IntegratorConfig,
    events: &[Event<'_>],
    backward: bool,
) -> Trajectory {
    let mut stepper = Dopri5::new(state_rhs(p, backward), 0.0, s0.into(), cfg);
    let mut samples = vec![(0.0, s0)];
    let mut records: Vec<EventRecord> = Vec::new();

    let field_scale = if backward { -1.0 } else { 1.0 };
    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.f)(0.0, s0)).collect();
    let mut eq_streak = if eval_field(p, s0).norm() < EQUILIBRIUM_NORM {
        1
    } else {
        0
    };

    loop {
        if stepper.t >= cfg.t_max {
            return Trajectory {
                samples,
                events: records,
                status: TrajectoryStatus::Completed,
            };
        }
        if stepper.advance(cfg.t_max).is_err() {
            return Trajectory {
                samples,
                events: records,
                status: TrajectoryStatus::StepFailure,
            };
        }
        let t1 = stepper.t;
        let s1 = State::new(stepper.y[0], stepper.y[1]);
        samples.push((t1, s1));

        // Event crossings on [t_prev, t1], earliest first.
        let mut hits: Vec<(f64, State, usize)> = Vec::new();
        for (i, ev) in events.iter().enumerate() {
            let g1 = (ev.f)(t1, s1);
            let gp = g_prev[i];
            let crossed = (gp != 0.0 && gp * g1 < 0.0) || (gp != 0.0 && g1 == 0.0);
            if crossed && ev.direction.matches(gp) {
                let dense = |t: f64| stepper.dense(t);
                let gfun = |t: f64, y: &[f64; 2]| (ev.f)(t, State::new(y[0], y[1]));
                let (te, ye) =
                    refine_crossing(&dense, &gfun, stepper.t_prev, gp, t1, cfg.event_tol);
                hits.push((te, State::new(ye[0], ye[1]), i));
            }
            g_prev[i] = g1;
        }
        hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (te, se, i) in hits {
            records.push(EventRecord {
                t: te,
                state: se,
                event: events[i].label.clone(),
            });
            if events[i].terminal {
                samples.pop();
                if te > samples.last().map(|(t, _)| *t).unwrap_or(f64::NEG_INFINITY) {
                    samples.push((te, se));
                }
                return Trajectory {
                    samples,
                    events: records,
                    status: TrajectoryStatus::Completed,
                };
            }
        }

        if s1.norm() > cfg.escape_radius {
            return Trajectory {
                samples,
                events: records,
                status: TrajectoryStatus::Escaped,
            };
        }
        if (eval_field(p, s1) * field_scale).norm() < EQUILIBRIUM_NORM {
            eq_streak += 1;
            if eq_streak >= 3 {
                return Trajectory {
                    samples,
                    events: records,
                    status: TrajectoryStatus::EquilibriumReached,
                };
            }
        } else {
            eq_streak = 0;
        }
    }
}

/// Result of co-integrating the variational equations.
#[derive(Debug, Clone)]
pub struct VariationalRun {
    pub trajectory: Trajectory,
    /// Fundamental solution of `v̇ = J(s(t))·v` over `[0, T]`, identity at 0.
    pub monodromy: Mat2,
    /// `∫₀ᵀ trace J(s(t)) dt`, accumulated alongside (Liouville:
    /// `det M = exp` of this).
    pub trace_integral: f64,
}

/// Integrates state and variational equations over `[0, t_end]` with shared
/// error control.
pub fn integrate_with_variational(
    p: &CanonicalParams,
    s0: State,
    cfg: &IntegratorConfig,
    t_end: f64,
) -> VariationalRun {
    // y = [x, y, m11, m21, m12, m22, w]
    let rhs = |_t: f64, y: &[f64; 7]| {
        let s = State::new(y[0], y[1]);
        let f = eval_field(p, s);
        let j = jacobian(p, s);
        let [[j11, j12], [j21, j22]] = j.0;
        [
            f.x,
            f.y,
            j11 * y[2] + j12 * y[3],
            j21 * y[2] + j22 * y[3],
            j11 * y[4] + j12 * y[5],
            j21 * y[4] + j22 * y[5],
            j11 + j22,
        ]
    };
    let y0 = [s0.x, s0.y, 1.0, 0.0, 0.0, 1.0, 0.0];
    let mut stepper = Dopri5::new(rhs, 0.0, y0, cfg);
    let mut samples = vec![(0.0, s0)];
    let mut status = TrajectoryStatus::Completed;
    while stepper.t < t_end {
        if stepper.advance(t_end).is_err() {
            status = TrajectoryStatus::StepFailure;
            break;
        }
        let s = State::new(stepper.y[0], stepper.y[1]);
        samples.push((stepper.t, s));
        if s.norm() > cfg.escape_radius {
            status = TrajectoryStatus::Escaped;
            break;
        }
    }
    let y = stepper.y;
    VariationalRun {
        trajectory: Trajectory {
            samples,
            events: Vec::new(),
            status,
        },
        monodromy: Mat2([[y[2], y[4]], [y[3], y[5]]]),
        trace_integral: y[6],
    }
}

/// States at `n + 1` uniform times over `[0, t_end]`, taken from the dense
/// output; used for cycle polylines.
pub fn sample_orbit(
    p: &CanonicalParams,
    s0: State,
    t_end: f64,
    n: usize,
    cfg: &IntegratorConfig,
) -> Vec<State> {
    let mut stepper = Dopri5::new(state_rhs(p, false), 0.0, s0.into(), cfg);
    let mut out = Vec::with_capacity(n + 1);
    out.push(s0);
    let dt = t_end / n as f64;
    let mut next = dt;
    let mut k = 1;
    while k <= n {
        if stepper.t >= t_end && next > t_end + 0.5 * dt {
            break;
        }
        if stepper.advance(t_end).is_err() {
            break;
        }
        while k <= n && next <= stepper.t + 1e-12 {
            let y = stepper.dense(next.min(stepper.t));
            out.push(State::new(y[0], y[1]));
            k += 1;
            next += dt;
        }
        if stepper.t >= t_end {
            break;
        }
    }
    out
}

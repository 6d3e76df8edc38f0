//! The Kukles cubic system and its canonical form.
//!
//! The general system is
//! `ẋ = y`, `ẏ = -x + δy + a₁x² + a₂xy + a₃y² + a₄x³ + a₅x²y + a₆xy² + a₇y³`,
//! the canonical form is
//! `ẋ = y`, `ẏ = q(x) + (α₀ - β + γ + βx + α₂x²)y + (c + dx)y² + γy³`
//! with `q(x)` one of three cubic branches selected by the real-root
//! structure of `-x + a₁x² + a₄x³`.
//!
//! Everything in this module is a pure function of its inputs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::roots::{merge_roots, real_roots_cubic, real_roots_quadratic, MERGE_REL_TOL};

/// `|det|` below this counts as a zero Jacobian determinant.
pub const DET_TOL: f64 = 1e-12;
/// `|trace|` below this counts as a zero Jacobian trace (weak focus / center candidate).
pub const TRACE_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    /// The quadratic factor of `q` has complex roots but a nonzero x² term,
    /// so no rescaling maps it onto one of the canonical branches.
    #[error("q(x) root structure matches no canonical case after rescaling")]
    DegenerateQ,
    /// The reversibility defect is undefined on the symmetry axis `y = 0`.
    #[error("sample point lies on the section y = 0")]
    OnSection,
    #[error("parameter `{0}` is not finite")]
    NonFinite(&'static str),
    /// Case 1 requires a nonzero `a`.
    #[error("case 1 requires a != 0")]
    ZeroCaseParameter,
}

// ---------------------------------------------------------------------------
// States and 2x2 matrices
// ---------------------------------------------------------------------------

/// A phase-plane point (or tangent vector).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
}

impl State {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: State) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product `self × other`.
    pub fn cross(self, other: State) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn dist(self, other: State) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for State {
    type Output = State;
    fn add(self, rhs: State) -> State {
        State::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for State {
    type Output = State;
    fn sub(self, rhs: State) -> State {
        State::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for State {
    type Output = State;
    fn mul(self, k: f64) -> State {
        State::new(self.x * k, self.y * k)
    }
}

impl std::ops::Neg for State {
    type Output = State;
    fn neg(self) -> State {
        State::new(-self.x, -self.y)
    }
}

impl From<[f64; 2]> for State {
    fn from(v: [f64; 2]) -> Self {
        State::new(v[0], v[1])
    }
}

impl From<State> for [f64; 2] {
    fn from(s: State) -> Self {
        [s.x, s.y]
    }
}

/// A 2×2 real matrix in row-major order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub fn identity() -> Self {
        Mat2([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn mul_vec(&self, v: State) -> State {
        State::new(
            self.0[0][0] * v.x + self.0[0][1] * v.y,
            self.0[1][0] * v.x + self.0[1][1] * v.y,
        )
    }

    /// Eigenvalues as roots of `λ² - tr λ + det`, real parts ascending.
    pub fn eigenvalues(&self) -> (Complex64, Complex64) {
        eigenvalues_from_trace_det(self.trace(), self.det())
    }

    /// An (unnormalized) eigenvector for a real eigenvalue.
    pub fn eigenvector(&self, lambda: f64) -> State {
        let [[a, b], [c, d]] = self.0;
        // Rows of (A - λI) are parallel; use the better-conditioned one.
        let v1 = State::new(b, lambda - a);
        let v2 = State::new(lambda - d, c);
        if v1.norm() >= v2.norm() {
            v1
        } else {
            v2
        }
    }
}

/// Eigenvalues of a 2×2 matrix given its trace and determinant.
pub fn eigenvalues_from_trace_det(trace: f64, det: f64) -> (Complex64, Complex64) {
    let half = 0.5 * trace;
    let disc = half * half - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (Complex64::new(half - s, 0.0), Complex64::new(half + s, 0.0))
    } else {
        let s = (-disc).sqrt();
        (Complex64::new(half, -s), Complex64::new(half, s))
    }
}

// ---------------------------------------------------------------------------
// Parameter records
// ---------------------------------------------------------------------------

/// The general cubic system's coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KuklesParams {
    pub delta: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
    pub a7: f64,
}

impl KuklesParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("delta", self.delta),
            ("a1", self.a1),
            ("a2", self.a2),
            ("a3", self.a3),
            ("a4", self.a4),
            ("a5", self.a5),
            ("a6", self.a6),
            ("a7", self.a7),
        ] {
            if !v.is_finite() {
                return Err(ModelError::NonFinite(name));
            }
        }
        Ok(())
    }
}

/// The three canonical branches of `q(x)`.
///
/// * case 1: `q(x) = -x + (1 + 1/a)x² - (1/a)x³ = -(1/a)x(x-1)(x-a)`,
/// * case 2: `q(x) = -x + bx³ = -x(1 - bx²)`,
/// * case 3: `q(x) = -x + x² = -x(1 - x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QCase {
    Case1 { a: f64 },
    Case2 { b: f64 },
    Case3,
}

impl QCase {
    /// The representative values named in the canonical-form statement:
    /// `a ∈ {1, -1, 2, -2}`, `b ∈ {0, -1}` and case 3.
    pub fn presets() -> [QCase; 7] {
        [
            QCase::Case1 { a: 1.0 },
            QCase::Case1 { a: -1.0 },
            QCase::Case1 { a: 2.0 },
            QCase::Case1 { a: -2.0 },
            QCase::Case2 { b: 0.0 },
            QCase::Case2 { b: -1.0 },
            QCase::Case3,
        ]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            QCase::Case1 { a } => {
                if !a.is_finite() {
                    Err(ModelError::NonFinite("a"))
                } else if a == 0.0 {
                    Err(ModelError::ZeroCaseParameter)
                } else {
                    Ok(())
                }
            }
            QCase::Case2 { b } => {
                if b.is_finite() {
                    Ok(())
                } else {
                    Err(ModelError::NonFinite("b"))
                }
            }
            QCase::Case3 => Ok(()),
        }
    }

    /// Evaluates `q(x)`.
    pub fn q(&self, x: f64) -> f64 {
        match *self {
            QCase::Case1 { a } => -x + (1.0 + 1.0 / a) * x * x - (1.0 / a) * x * x * x,
            QCase::Case2 { b } => -x + b * x * x * x,
            QCase::Case3 => -x + x * x,
        }
    }

    /// Evaluates `q'(x)`.
    pub fn dq(&self, x: f64) -> f64 {
        match *self {
            QCase::Case1 { a } => -1.0 + 2.0 * (1.0 + 1.0 / a) * x - (3.0 / a) * x * x,
            QCase::Case2 { b } => -1.0 + 3.0 * b * x * x,
            QCase::Case3 => -1.0 + 2.0 * x,
        }
    }

    /// Coefficient of `x³` in `q`; the constant term `s` of the
    /// direction-at-infinity equation `γu³ + du² + α₂u + s = 0`.
    pub fn infinity_constant(&self) -> f64 {
        match *self {
            QCase::Case1 { a } => -1.0 / a,
            QCase::Case2 { b } => b,
            QCase::Case3 => 0.0,
        }
    }

    /// Real roots of `q(x) = 0` with multiplicities, sorted ascending.
    ///
    /// Computed from the factored case structure, not numerically.
    pub fn finite_roots(&self) -> Vec<(f64, u32)> {
        match *self {
            QCase::Case1 { a } => {
                if (a - 1.0).abs() <= MERGE_REL_TOL {
                    vec![(0.0, 1), (1.0, 2)]
                } else {
                    let mut r = vec![(0.0, 1), (1.0, 1), (a, 1)];
                    r.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
                    r
                }
            }
            QCase::Case2 { b } => {
                if b > 0.0 {
                    let r = 1.0 / b.sqrt();
                    vec![(-r, 1), (0.0, 1), (r, 1)]
                } else {
                    vec![(0.0, 1)]
                }
            }
            QCase::Case3 => vec![(0.0, 1), (1.0, 1)],
        }
    }
}

/// The canonical system's parameter record.
///
/// `alpha0`, `alpha2`, `gamma` are field rotation parameters; `beta` is a
/// semi-rotation parameter (opposite senses on the two sides of `x = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanonicalParams {
    pub q_case: QCase,
    pub c: f64,
    pub d: f64,
    pub alpha0: f64,
    pub alpha2: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl CanonicalParams {
    /// The integrable skeleton of a given branch: all parameters zero.
    pub fn hamiltonian(q_case: QCase) -> Self {
        CanonicalParams {
            q_case,
            c: 0.0,
            d: 0.0,
            alpha0: 0.0,
            alpha2: 0.0,
            beta: 0.0,
            gamma: 0.0,
        }
    }

    /// The x-axis symmetric system: rotation parameters zero, `c`, `d` free.
    pub fn symmetric(q_case: QCase, c: f64, d: f64) -> Self {
        CanonicalParams {
            c,
            d,
            ..Self::hamiltonian(q_case)
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.q_case.validate()?;
        for (name, v) in [
            ("c", self.c),
            ("d", self.d),
            ("alpha0", self.alpha0),
            ("alpha2", self.alpha2),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() {
                return Err(ModelError::NonFinite(name));
            }
        }
        Ok(())
    }

    /// The coefficient of `y` in `Q`: `α₀ - β + γ + βx + α₂x²`.
    ///
    /// At a singular point `(x*, 0)` this is the Jacobian trace.
    pub fn linear_y_coefficient(&self, x: f64) -> f64 {
        self.alpha0 - self.beta + self.gamma + self.beta * x + self.alpha2 * x * x
    }

    pub fn get(&self, which: ParamId) -> f64 {
        match which {
            ParamId::Alpha0 => self.alpha0,
            ParamId::Alpha2 => self.alpha2,
            ParamId::Beta => self.beta,
            ParamId::Gamma => self.gamma,
        }
    }

    pub fn with(&self, which: ParamId, value: f64) -> Self {
        let mut p = *self;
        match which {
            ParamId::Alpha0 => p.alpha0 = value,
            ParamId::Alpha2 => p.alpha2 = value,
            ParamId::Beta => p.beta = value,
            ParamId::Gamma => p.gamma = value,
        }
        p
    }
}

/// One of the four tunable parameters of the canonical system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamId {
    Alpha0,
    Alpha2,
    Beta,
    Gamma,
}

impl std::fmt::Display for ParamId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParamId::Alpha0 => "alpha0",
            ParamId::Alpha2 => "alpha2",
            ParamId::Beta => "beta",
            ParamId::Gamma => "gamma",
        })
    }
}

impl std::str::FromStr for ParamId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alpha0" => Ok(ParamId::Alpha0),
            "alpha2" => Ok(ParamId::Alpha2),
            "beta" => Ok(ParamId::Beta),
            "gamma" => Ok(ParamId::Gamma),
            other => Err(format!("unknown parameter `{other}`")),
        }
    }
}

// JSON representation: {"case": 1|2|3, "a": ..., "b": ...}
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QCaseRepr {
    case: u8,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    b: Option<f64>,
}

impl Serialize for QCase {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let repr = match *self {
            QCase::Case1 { a } => QCaseRepr {
                case: 1,
                a: Some(a),
                b: None,
            },
            QCase::Case2 { b } => QCaseRepr {
                case: 2,
                a: None,
                b: Some(b),
            },
            QCase::Case3 => QCaseRepr {
                case: 3,
                a: None,
                b: None,
            },
        };
        repr.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for QCase {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let repr = QCaseRepr::deserialize(de)?;
        match repr.case {
            1 => {
                let a = repr
                    .a
                    .ok_or_else(|| serde::de::Error::custom("case 1 requires `a`"))?;
                Ok(QCase::Case1 { a })
            }
            2 => Ok(QCase::Case2 {
                b: repr.b.unwrap_or(0.0),
            }),
            3 => Ok(QCase::Case3),
            other => Err(serde::de::Error::custom(format!(
                "q case must be 1, 2 or 3, got {other}"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Field evaluation and reduction
// ---------------------------------------------------------------------------

/// Right-hand side of the canonical system at `s`.
pub fn eval_field(p: &CanonicalParams, s: State) -> State {
    let y2 = s.y * s.y;
    State::new(
        s.y,
        p.q_case.q(s.x)
            + p.linear_y_coefficient(s.x) * s.y
            + (p.c + p.d * s.x) * y2
            + p.gamma * y2 * s.y,
    )
}

/// Right-hand side of the general system at `s`.
pub fn eval_kukles(k: &KuklesParams, s: State) -> State {
    let (x, y) = (s.x, s.y);
    State::new(
        y,
        -x + k.delta * y
            + k.a1 * x * x
            + k.a2 * x * y
            + k.a3 * y * y
            + k.a4 * x * x * x
            + k.a5 * x * x * y
            + k.a6 * x * y * y
            + k.a7 * y * y * y,
    )
}

/// A canonical reduction together with the coordinate scale that realizes it:
/// `(x, y) -> (x/scale, y/scale)` conjugates the original field `F` to the
/// canonical field `F̃` via `F̃(s) = F(scale·s)/scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reduction {
    pub params: CanonicalParams,
    pub scale: f64,
}

/// Reduces a general parameter record to canonical form.
///
/// The substitution is `β = a₂`, `c = a₃`, `α₂ = a₅`, `d = a₆`, `γ = a₇`,
/// `α₀ = δ + β - γ` (after rescaling), and the branch of `q` is chosen from
/// the nonzero real roots of `-x + a₁x² + a₄x³`:
/// two distinct roots `r₁, r₂` (`|r₁| ≤ |r₂|`, ties resolved to the positive
/// root) rescale by `r₁` onto case 1 with `a = r₂/r₁`; a double root
/// rescales onto case 1 with `a = 1`; a single simple root rescales onto
/// case 3; no nonzero real roots is case 2 with `b = a₄` (which requires
/// `a₁ = 0`, otherwise the x² term is not removable and the reduction fails).
pub fn to_canonical(k: &KuklesParams) -> Result<Reduction, ModelError> {
    k.validate()?;
    const ZERO_TOL: f64 = 1e-12;

    // Nonzero roots of q solve a₄x² + a₁x - 1 = 0.
    let (q_case, scale) = if k.a4.abs() <= ZERO_TOL {
        if k.a1.abs() <= ZERO_TOL {
            (QCase::Case2 { b: 0.0 }, 1.0)
        } else {
            (QCase::Case3, 1.0 / k.a1)
        }
    } else {
        let roots = merge_roots(real_roots_quadratic(k.a4, k.a1, -1.0));
        match roots.as_slice() {
            [] => {
                if k.a1.abs() <= ZERO_TOL {
                    (QCase::Case2 { b: k.a4 }, 1.0)
                } else {
                    return Err(ModelError::DegenerateQ);
                }
            }
            [(r, 2)] => (QCase::Case1 { a: 1.0 }, *r),
            [(r1, 1), (r2, 1)] => {
                let (near, far) = if r1.abs() < r2.abs() {
                    (*r1, *r2)
                } else if r2.abs() < r1.abs() {
                    (*r2, *r1)
                } else if *r1 > 0.0 {
                    (*r1, *r2)
                } else {
                    (*r2, *r1)
                };
                (QCase::Case1 { a: far / near }, near)
            }
            _ => return Err(ModelError::DegenerateQ),
        }
    };

    let r = scale;
    let beta = k.a2 * r;
    let gamma = k.a7 * r * r;
    let params = CanonicalParams {
        q_case,
        c: k.a3 * r,
        d: k.a6 * r * r,
        alpha0: k.delta + beta - gamma,
        alpha2: k.a5 * r * r,
        beta,
        gamma,
    };
    params.validate()?;
    Ok(Reduction { params, scale })
}

/// Analytic Jacobian of the canonical field.
pub fn jacobian(p: &CanonicalParams, s: State) -> Mat2 {
    let (x, y) = (s.x, s.y);
    let dq_dx = p.q_case.dq(x) + (p.beta + 2.0 * p.alpha2 * x) * y + p.d * y * y;
    let dq_dy = p.linear_y_coefficient(x) + 2.0 * (p.c + p.d * x) * y + 3.0 * p.gamma * y * y;
    Mat2([[0.0, 1.0], [dq_dx, dq_dy]])
}

// ---------------------------------------------------------------------------
// Singularities
// ---------------------------------------------------------------------------

/// Classification of an equilibrium from its linearization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingularityKind {
    #[serde(rename = "saddle")]
    Saddle,
    #[serde(rename = "anti-saddle-focus")]
    AntiSaddleFocus,
    #[serde(rename = "anti-saddle-node")]
    AntiSaddleNode,
    /// Zero trace with positive determinant. A true center is only
    /// certified when the reversibility defect vanishes.
    #[serde(rename = "center-candidate")]
    Center,
    #[serde(rename = "saddle-node")]
    SaddleNode,
    #[serde(rename = "degenerate")]
    Degenerate,
    #[serde(rename = "infinite")]
    Infinite,
}

impl SingularityKind {
    /// Anti-saddles are equilibria with positive Jacobian determinant.
    pub fn is_anti_saddle(self) -> bool {
        matches!(
            self,
            SingularityKind::AntiSaddleFocus
                | SingularityKind::AntiSaddleNode
                | SingularityKind::Center
        )
    }
}

/// A finite equilibrium with its linearization data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Singularity {
    pub location: State,
    pub kind: SingularityKind,
    pub eigenvalues: (Complex64, Complex64),
    pub trace: f64,
    pub det: f64,
    /// Multiplicity of the corresponding root of `q`.
    pub root_multiplicity: u32,
}

fn classify(trace: f64, det: f64, multiplicity: u32) -> SingularityKind {
    if det < -DET_TOL {
        SingularityKind::Saddle
    } else if det.abs() <= DET_TOL {
        // A double root of q carries one hyperbolic and one center
        // direction; the nilpotent sub-case (zero trace) is still reported
        // as a saddle-node since the multiplicity-two root structure is
        // what defines it.
        if multiplicity == 2 || trace.abs() > TRACE_TOL {
            SingularityKind::SaddleNode
        } else {
            SingularityKind::Degenerate
        }
    } else if trace.abs() < TRACE_TOL {
        SingularityKind::Center
    } else if trace * trace - 4.0 * det < 0.0 {
        SingularityKind::AntiSaddleFocus
    } else {
        SingularityKind::AntiSaddleNode
    }
}

/// All finite equilibria, on the x-axis at the real roots of `q`, each
/// classified from the Jacobian there. Sorted by x-coordinate.
pub fn finite_singularities(p: &CanonicalParams) -> Vec<Singularity> {
    p.q_case
        .finite_roots()
        .into_iter()
        .map(|(x, multiplicity)| {
            let location = State::new(x, 0.0);
            let j = jacobian(p, location);
            let (trace, det) = (j.trace(), j.det());
            Singularity {
                location,
                kind: classify(trace, det, multiplicity),
                eigenvalues: eigenvalues_from_trace_det(trace, det),
                trace,
                det,
                root_multiplicity: multiplicity,
            }
        })
        .collect()
}

/// Slopes `u = y/x` of the non-vertical singular directions at infinity:
/// real roots of `γu³ + du² + α₂u + s = 0` with `s` the cubic coefficient
/// of `q`. The vertical direction always exists and is not listed here.
pub fn infinite_directions(p: &CanonicalParams) -> Vec<f64> {
    merge_roots(real_roots_cubic(
        p.gamma,
        p.d,
        p.alpha2,
        p.q_case.infinity_constant(),
    ))
    .into_iter()
    .map(|(u, _)| u)
    .collect()
}

// ---------------------------------------------------------------------------
// First integrals
// ---------------------------------------------------------------------------

/// First integral `H(x, y)` of the integrable skeleton
/// (`c = d = α₀ = α₂ = β = γ = 0`) of a given branch:
///
/// * case 1: `H = x² - (2/3)(1 + 1/a)x³ + (1/(2a))x⁴ + y²`,
/// * case 2: `H = x² - (b/2)x⁴ + y²`,
/// * case 3: `H = x² - (2/3)x³ + y²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstIntegral {
    pub q_case: QCase,
}

pub fn first_integral(q_case: QCase) -> FirstIntegral {
    FirstIntegral { q_case }
}

impl FirstIntegral {
    pub fn value(&self, s: State) -> f64 {
        let (x, y) = (s.x, s.y);
        let x2 = x * x;
        match self.q_case {
            QCase::Case1 { a } => {
                x2 - (2.0 / 3.0) * (1.0 + 1.0 / a) * x2 * x + (1.0 / (2.0 * a)) * x2 * x2 + y * y
            }
            QCase::Case2 { b } => x2 - 0.5 * b * x2 * x2 + y * y,
            QCase::Case3 => x2 - (2.0 / 3.0) * x2 * x + y * y,
        }
    }

    /// `(∂H/∂x, ∂H/∂y)`; note `∂H/∂x = -2 q(x)`.
    pub fn gradient(&self, s: State) -> State {
        State::new(-2.0 * self.q_case.q(s.x), 2.0 * s.y)
    }

    /// `dH/dt = Hx·P + Hy·Q` along the field of `p`; identically zero when
    /// all of `c`, `d`, `α₀`, `α₂`, `β`, `γ` vanish.
    pub fn lie_derivative(&self, p: &CanonicalParams, s: State) -> f64 {
        let f = eval_field(p, s);
        self.gradient(s).dot(f)
    }
}

// ---------------------------------------------------------------------------
// Rotation determinants and reversibility
// ---------------------------------------------------------------------------

/// `Δ_μ = P·∂Q/∂μ - Q·∂P/∂μ` for a parameter `μ`, evaluated analytically.
///
/// Closed forms: `Δ_α₀ = y²`, `Δ_α₂ = x²y²`, `Δ_γ = y²(1 + y²)`,
/// `Δ_β = (x - 1)y²`.
pub fn rotation_determinant(which: ParamId, p: &CanonicalParams, s: State) -> f64 {
    let _ = p; // P = y carries no parameter, so Δ_μ = y · ∂Q/∂μ.
    let (x, y) = (s.x, s.y);
    let dq_dmu = match which {
        ParamId::Alpha0 => y,
        ParamId::Alpha2 => x * x * y,
        ParamId::Beta => (x - 1.0) * y,
        ParamId::Gamma => y + y * y * y,
    };
    y * dq_dmu
}

/// Parameter record whose phase portrait is the `(x, y) ↦ (2-x, -y)` image
/// of `p`'s. Only defined for case 1 with `a = 2`, whose `q` is odd about
/// `x = 1`: the map swaps the two anti-saddles, so cycle structure around
/// the origin mirrors to the point `(2, 0)` and vice versa. Fixed points of
/// the involution (`β = -2α₂`, `c = -d`) are exactly the x=1-symmetric
/// systems.
pub fn mirror_about_x1(p: &CanonicalParams) -> Option<CanonicalParams> {
    match p.q_case {
        QCase::Case1 { a } if (a - 2.0).abs() < 1e-12 => Some(CanonicalParams {
            q_case: p.q_case,
            c: -(p.c + 2.0 * p.d),
            d: p.d,
            alpha0: p.alpha0,
            alpha2: p.alpha2,
            beta: -p.beta - 4.0 * p.alpha2,
            gamma: p.gamma,
        }),
        _ => None,
    }
}

/// `|F(x,-y) + F(x,y)|` with `F = Q/P`; zero everywhere exactly when
/// `α₀ = α₂ = β = γ = 0`, i.e. when the field is symmetric in the x-axis.
pub fn reversibility_defect(p: &CanonicalParams, sample: State) -> Result<f64, ModelError> {
    if sample.y == 0.0 {
        return Err(ModelError::OnSection);
    }
    let up = eval_field(p, sample);
    let mirrored = State::new(sample.x, -sample.y);
    let down = eval_field(p, mirrored);
    Ok((down.y / down.x + up.y / up.x).abs())
}

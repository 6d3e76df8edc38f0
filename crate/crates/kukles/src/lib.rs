//! Numerical toolkit for the Kukles cubic system.
//!
//! The crate implements the planar cubic system `ẋ = y`,
//! `ẏ = -x + δy + a₁x² + a₂xy + a₃y² + a₄x³ + a₅x²y + a₆xy² + a₇y³`
//! together with its canonical reduction, and the machinery needed to
//! study its limit cycles numerically:
//!
//! - [`model`] — parameter records, field evaluation, the reduction to the
//!   canonical form, singularity classification (finite points and
//!   directions at infinity), first integrals of the integrable skeletons,
//!   rotation determinants and the x-axis reversibility test.
//! - [`integrate`] — adaptive Dormand–Prince 5(4) integration with dense
//!   output, event location and variational co-integration for monodromy
//!   matrices.
//! - [`cycles`] — Poincaré sections, return maps, Newton-refined limit
//!   cycles with Floquet multipliers, and cycle counting around an
//!   anti-saddle.
//! - [`bifurcation`] — Hopf values, pseudo-arclength continuation of cycle
//!   branches with fold detection, saddle separatrices and homoclinic
//!   (eight-loop) location.
//! - [`scan`] — parameter-grid censuses of cycle distributions, phase
//!   portraits, and the scripted bifurcation scenario runner.

pub mod bifurcation;
pub mod cycles;
pub mod integrate;
pub mod model;
mod roots;
pub mod scan;

pub use model::{CanonicalParams, KuklesParams, QCase, State};

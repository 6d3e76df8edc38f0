//! Real roots of polynomials of degree at most three.
//!
//! Closed forms with Newton polishing; degenerate leading coefficients fall
//! through to the lower-degree solver, so callers can hand over possibly
//! degenerate cubics directly. Roots are returned sorted ascending with
//! their multiplicities.

/// Roots closer than this (relative to the largest root magnitude) are merged.
pub(crate) const MERGE_REL_TOL: f64 = 1e-9;

/// A coefficient is treated as zero below this, relative to the largest
/// coefficient magnitude of the polynomial.
const COEFF_REL_TOL: f64 = 1e-14;

fn approx_zero(c: f64, scale: f64) -> bool {
    c == 0.0 || c.abs() <= COEFF_REL_TOL * scale
}

/// Merges a sorted list of roots into `(root, multiplicity)` pairs.
pub(crate) fn merge_roots(mut roots: Vec<f64>) -> Vec<(f64, u32)> {
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let max_mag = roots.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let tol = MERGE_REL_TOL * max_mag;
    let mut merged: Vec<(f64, u32)> = Vec::new();
    for r in roots {
        match merged.last_mut() {
            Some((prev, mult)) if (r - *prev).abs() <= tol => {
                // Keep the mean of the cluster as the representative.
                *prev = (*prev * f64::from(*mult) + r) / f64::from(*mult + 1);
                *mult += 1;
            }
            _ => merged.push((r, 1)),
        }
    }
    merged
}

/// Real roots of `c1 x + c0 = 0`.
pub(crate) fn real_roots_linear(c1: f64, c0: f64) -> Vec<f64> {
    let scale = c1.abs().max(c0.abs());
    if scale == 0.0 || approx_zero(c1, scale) {
        // Constant (possibly identically zero) equation: no isolated roots.
        return Vec::new();
    }
    vec![-c0 / c1]
}

/// Real roots of `c2 x² + c1 x + c0 = 0`, with repeats for double roots.
pub(crate) fn real_roots_quadratic(c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let scale = c2.abs().max(c1.abs()).max(c0.abs());
    if scale == 0.0 || approx_zero(c2, scale) {
        return real_roots_linear(c1, c0);
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    let disc_scale = (c1 * c1).abs() + (4.0 * c2 * c0).abs();
    if disc < 0.0 {
        if disc.abs() <= 1e-12 * disc_scale {
            let r = -c1 / (2.0 * c2);
            return vec![r, r];
        }
        return Vec::new();
    }
    if disc == 0.0 || disc <= 1e-30 * disc_scale {
        let r = -c1 / (2.0 * c2);
        return vec![r, r];
    }
    // Citardauq split avoids cancellation for |c1| >> |c0 c2|.
    let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
    if q == 0.0 {
        // c1 == 0: symmetric pair.
        let r = (-c0 / c2).sqrt();
        return vec![-r, r];
    }
    let mut out = vec![q / c2, c0 / q];
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Real roots of `c3 x³ + c2 x² + c1 x + c0 = 0`, with repeats for
/// multiple roots, each polished by a few Newton steps.
pub(crate) fn real_roots_cubic(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let scale = c3.abs().max(c2.abs()).max(c1.abs()).max(c0.abs());
    if scale == 0.0 || approx_zero(c3, scale) {
        return real_roots_quadratic(c2, c1, c0);
    }
    // Depressed form t³ + p t + q with x = t - b/3.
    let b = c2 / c3;
    let c = c1 / c3;
    let d = c0 / c3;
    let p = c - b * b / 3.0;
    let q = d - b * c / 3.0 + 2.0 * b * b * b / 27.0;
    let shift = -b / 3.0;

    let mut roots = if p == 0.0 && q == 0.0 {
        vec![0.0, 0.0, 0.0]
    } else {
        let half_q = 0.5 * q;
        let third_p = p / 3.0;
        let disc = half_q * half_q + third_p * third_p * third_p;
        let disc_scale = (half_q * half_q).abs() + (third_p * third_p * third_p).abs();
        if disc > 1e-12 * disc_scale {
            // One real root (Cardano).
            let s = disc.sqrt();
            let u = (-half_q + s).cbrt();
            let v = (-half_q - s).cbrt();
            vec![u + v]
        } else if disc < -1e-12 * disc_scale {
            // Three distinct real roots (trigonometric form).
            let m = 2.0 * (-third_p).sqrt();
            let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
            let theta = arg.acos() / 3.0;
            (0..3)
                .map(|k| m * (theta - 2.0 * std::f64::consts::PI * f64::from(k) / 3.0).cos())
                .collect()
        } else if p.abs() <= 1e-12 * (c - b * b / 3.0).abs().max(1.0) && q == 0.0 {
            vec![0.0, 0.0, 0.0]
        } else {
            // Borderline discriminant: a simple and a double root.
            let single = 3.0 * q / p;
            let double = -1.5 * q / p;
            vec![single, double, double]
        }
    };

    for t in &mut roots {
        let mut x = *t + shift;
        for _ in 0..3 {
            let f = ((c3 * x + c2) * x + c1) * x + c0;
            let df = (3.0 * c3 * x + 2.0 * c2) * x + c1;
            if df.abs() > 1e-300 {
                let step = f / df;
                if step.is_finite() {
                    x -= step;
                }
            }
        }
        *t = x;
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

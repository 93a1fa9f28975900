//! Builtin systems.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::cycles::{cycle_offset, CycleSetup};
use crate::error::{Error, Result};
use crate::field::{symmetrize, FilippovSystem, Params, Point, SmoothField, ALPHA0};
use crate::integrate::rk::IntegratorOptions;

/// Upper field of the Thompson–Hunt family:
/// `(1 − y, x − (a y + b y³) + α₁ + α₂ (y − y²))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThompsonHunt {
    pub a: f64,
    pub b: f64,
}

impl SmoothField for ThompsonHunt {
    fn eval(&self, p: Point, alpha: &Params) -> [f64; 2] {
        let y = p.y;
        [1.0 - y, p.x - (self.a * y + self.b * y * y * y) + alpha[0] + alpha[1] * (y - y * y)]
    }

    fn jacobian(&self, p: Point, alpha: &Params) -> [[f64; 2]; 2] {
        let y = p.y;
        [[0.0, -1.0], [1.0, -self.a - 3.0 * self.b * y * y + alpha[1] * (1.0 - 2.0 * y)]]
    }

    fn param_partials(&self, p: Point, _alpha: &Params) -> [[f64; 2]; 2] {
        [[0.0, 0.0], [1.0, p.y - p.y * p.y]]
    }
}

/// Attracting unit circle centred at `(0, 1 + α₂)`, with `α₁` added to `g`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Circle;

impl SmoothField for Circle {
    fn eval(&self, p: Point, alpha: &Params) -> [f64; 2] {
        let (x, y) = (p.x, p.y - alpha[1] - 1.0);
        let s = 1.0 - x * x - y * y;
        [-y + x * s, x + y * s + alpha[0]]
    }

    fn jacobian(&self, p: Point, alpha: &Params) -> [[f64; 2]; 2] {
        let (x, y) = (p.x, p.y - alpha[1] - 1.0);
        let s = 1.0 - x * x - y * y;
        [[s - 2.0 * x * x, -1.0 - 2.0 * x * y], [1.0 - 2.0 * x * y, s - 2.0 * y * y]]
    }

    fn param_partials(&self, p: Point, alpha: &Params) -> [[f64; 2]; 2] {
        let j = self.jacobian(p, alpha);
        [[0.0, -j[0][1]], [1.0, -j[1][1]]]
    }
}

/// Upper field `(1, 2x)`: parabolic orbits touching `y = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Parabola;

impl SmoothField for Parabola {
    fn eval(&self, p: Point, alpha: &Params) -> [f64; 2] {
        [1.0, 2.0 * p.x + alpha[0] + alpha[1] * p.y]
    }

    fn jacobian(&self, _p: Point, alpha: &Params) -> [[f64; 2]; 2] {
        [[0.0, 0.0], [2.0, alpha[1]]]
    }

    fn param_partials(&self, p: Point, _alpha: &Params) -> [[f64; 2]; 2] {
        [[0.0, 0.0], [1.0, p.y]]
    }
}

pub fn thompson_hunt(a: f64, b: f64) -> FilippovSystem {
    symmetrize(Arc::new(ThompsonHunt { a, b }))
}

pub fn circle_system() -> FilippovSystem {
    symmetrize(Arc::new(Circle))
}

pub fn parabola_system() -> FilippovSystem {
    symmetrize(Arc::new(Parabola))
}

/// Default `b` scan for the locus `ϑ(a)`.
pub const THETA_SCAN: (f64, f64, usize) = (0.1, 5.0, 50);

fn theta_setup(opts: &IntegratorOptions) -> CycleSetup {
    CycleSetup::for_offsets(1.5, 50.0, opts)
}

/// `φ₂` of `thompson_hunt(a, b)` at `α = 0`, or `None` when no cycle is found.
pub fn theta_offset(a: f64, b: f64, opts: &IntegratorOptions) -> Option<f64> {
    cycle_offset(&thompson_hunt(a, b), &ALPHA0, &theta_setup(opts)).ok()
}

pub fn theta_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1).max(1) as f64).collect()
}

/// Bisects between a scan point with an offset and a neighbour without one, looking for an
/// offset of the opposite sign near the edge of existence.
fn bracket_at_edge(
    f: &mut impl FnMut(f64) -> Option<f64>,
    (mut b_in, v_in): (f64, f64),
    mut b_out: f64,
) -> Option<(f64, f64, f64, f64)> {
    for _ in 0..40 {
        let m = 0.5 * (b_in + b_out);
        match f(m) {
            Some(v) if v * v_in <= 0.0 => return Some((b_in, v_in, m, v)),
            Some(_) => b_in = m,
            None => b_out = m,
        }
    }
    None
}

/// Refines the first sign change of `φ₂` in a scan table to `|φ₂| ≤ 1e-9`. A sign change
/// hidden between an offset and a failed neighbour is searched for by bisection.
pub fn find_theta_from_table(a: f64, table: &[(f64, Option<f64>)], opts: &IntegratorOptions) -> Result<f64> {
    let setup = theta_setup(opts);
    let mut f = |b: f64| cycle_offset(&thompson_hunt(a, b), &ALPHA0, &setup);
    let mut probe = |b: f64| f(b).ok();
    let bracket = table.windows(2).find_map(|w| match (w[0], w[1]) {
        ((b0, Some(v0)), (b1, Some(v1))) if v0 * v1 <= 0.0 => Some((b0, v0, b1, v1)),
        ((b0, Some(v0)), (b1, None)) => bracket_at_edge(&mut probe, (b0, v0), b1),
        ((b0, None), (b1, Some(v1))) => bracket_at_edge(&mut probe, (b1, v1), b0).map(|(x1, y1, x0, y0)| (x0, y0, x1, y1)),
        _ => None,
    });
    let Some((b0, v0, b1, v1)) = bracket else {
        return Err(Error::NoBracket { table: table.to_vec() });
    };
    let b = crate::roots::brent_with_values(&mut f, b0, v0, b1, v1, 1e-14, 1e-10, 200)?;
    let r = f(b)?;
    if r.abs() > 1e-9 {
        return Err(Error::NoConvergence { what: "theta refinement", iterations: 200 });
    }
    Ok(b)
}

/// `ϑ(a)`: the `b` at which the upper cycle of the Thompson–Hunt family grazes `Σ` at `O`.
pub fn find_theta(a: f64, opts: &IntegratorOptions) -> Result<f64> {
    if a.is_nan() || a >= 0.0 {
        return Err(Error::InvalidInput { detail: alloc::format!("a = {a} must be negative") });
    }
    let (lo, hi, n) = THETA_SCAN;
    let table: Vec<(f64, Option<f64>)> = theta_grid(lo, hi, n).into_iter().map(|b| (b, theta_offset(a, b, opts))).collect();
    find_theta_from_table(a, &table, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{fd_jacobian, fd_param_partials, Side, ALPHA0};

    fn close(a: [[f64; 2]; 2], b: [[f64; 2]; 2], tol: f64) -> bool {
        (0..2).all(|i| (0..2).all(|j| (a[i][j] - b[i][j]).abs() < tol))
    }

    #[test]
    fn analytic_partials_match_differences() {
        let fields: [&dyn SmoothField; 3] = [&ThompsonHunt { a: -1.0, b: 0.3 }, &Circle, &Parabola];
        let pts = [Point::new(0.3, -0.7), Point::new(-1.1, 0.4), Point::new(0.0, 2.0)];
        let al = [0.02, -0.03];
        for f in fields {
            for p in pts {
                assert!(close(f.jacobian(p, &al), fd_jacobian(f, p, &al), 1e-7));
                assert!(close(f.param_partials(p, &al), fd_param_partials(f, p, &al), 1e-7));
            }
        }
    }

    #[test]
    fn thompson_hunt_origin_data() {
        let s = thompson_hunt(-1.0, 0.3);
        let v = s.eval_side_unchecked(Point::ORIGIN, Side::Upper, &ALPHA0);
        assert_eq!(v, [1.0, 0.0]);
        let pa = s.param_partials(Point::ORIGIN, Side::Upper, &ALPHA0);
        assert_eq!((pa[1][0], pa[1][1]), (1.0, 0.0));
        let (zh, z2h) = s.lie_derivatives(0.0, Side::Upper, &ALPHA0).unwrap();
        assert_eq!((zh, z2h), (0.0, 1.0));
        let lo = s.eval_side_unchecked(Point::new(0.2, -0.5), Side::Lower, &ALPHA0);
        assert!((lo[0] - (-1.0 - -0.5)).abs() < 1e-15);
    }

    #[test]
    fn theta_at_minus_one() {
        let b = find_theta(-1.0, &IntegratorOptions::default()).unwrap();
        assert!((b - 0.281246770728896).abs() < 1e-8, "{b}");
        assert!(find_theta(0.5, &IntegratorOptions::default()).is_err());
    }

    #[test]
    fn theta_table_without_sign_change() {
        let t = [(0.1, Some(-1.0)), (0.2, None), (0.3, Some(-0.5))];
        assert!(matches!(find_theta_from_table(-1.0, &t, &IntegratorOptions::default()), Err(Error::NoBracket { .. })));
    }

    #[test]
    fn circle_fold_data() {
        let s = circle_system();
        let v = s.eval_side_unchecked(Point::ORIGIN, Side::Upper, &ALPHA0);
        let j = s.jacobian(Point::ORIGIN, Side::Upper, &ALPHA0);
        assert_eq!((v[0], v[1], j[1][0]), (1.0, 0.0, 1.0));
    }
}

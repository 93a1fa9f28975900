//! Measured defects for the structural invariants: flow symmetry, boundary partition,
//! sliding tangency, event idempotence and quadrature convergence.

use alloc::vec::Vec;

use crate::boundary::{classify_point, sliding_field, BoundaryKind, TANGENCY_TOL};
use crate::error::Result;
use crate::field::{FilippovSystem, Params, Point, Side};
use crate::integrate::hybrid::{flow, ArcKind, Event};
use crate::integrate::rk::IntegratorOptions;
use crate::variational::{error_estimates, quantities, GrazingCycleData};

/// Largest `|φₜ(p) + φₜ(−p)|` over the recorded events and the end point of two hybrid
/// flows, for a system with `Z⁻(p) = −Z⁺(−p)`.
pub fn symmetry_defect(sys: &FilippovSystem, p: Point, t: f64, alpha: &Params, opts: &IntegratorOptions) -> Result<f64> {
    let a = flow(sys, p, None, t, alpha, opts)?;
    let b = flow(sys, -p, None, t, alpha, opts)?;
    let mut d = a.end_point().dist(-b.end_point());
    if a.events.len() != b.events.len() {
        return Ok(f64::INFINITY);
    }
    for (ea, eb) in a.events.iter().zip(&b.events) {
        if ea.event != eb.event {
            return Ok(f64::INFINITY);
        }
        d = d.max(ea.p.dist(-eb.p)).max((ea.t - eb.t).abs());
    }
    Ok(d)
}

/// Whether the label at `(x, 0)` agrees with the signs of `Z⁺h` and `Z⁻h`; `None` within
/// the tangency tolerance.
pub fn partition_consistent(sys: &FilippovSystem, x: f64, alpha: &Params) -> Result<Option<bool>> {
    let p = Point::new(x, 0.0);
    let gu = sys.eval_side(p, Side::Upper, alpha)?[1];
    let gl = sys.eval_side(p, Side::Lower, alpha)?[1];
    if gu.abs() <= TANGENCY_TOL || gl.abs() <= TANGENCY_TOL {
        return Ok(None);
    }
    let want = if gu * gl > 0.0 {
        BoundaryKind::Crossing
    } else if gu < 0.0 {
        BoundaryKind::SlidingStable
    } else {
        BoundaryKind::SlidingUnstable
    };
    Ok(Some(classify_point(sys, x, alpha)?.kind == want))
}

/// `|Zˢh|` at a sliding point, `None` elsewhere.
pub fn sliding_tangency(sys: &FilippovSystem, x: f64, alpha: &Params) -> Result<Option<f64>> {
    let kind = classify_point(sys, x, alpha)?.kind;
    if !matches!(kind, BoundaryKind::SlidingStable | BoundaryKind::SlidingUnstable) {
        return Ok(None);
    }
    Ok(Some(sliding_field(sys, x, alpha)?[1].abs()))
}

/// Restarts the flow at its first boundary event and reports whether that event fires again
/// within the guard band `2·event_tol`. `None` when no event occurs within `t`.
pub fn event_refires(sys: &FilippovSystem, p: Point, t: f64, alpha: &Params, opts: &IntegratorOptions) -> Result<Option<bool>> {
    let tr = flow(sys, p, None, t, alpha, opts)?;
    let Some(first) = tr
        .events
        .iter()
        .skip(1)
        .find(|e| matches!(e.event, Event::BoundaryHit | Event::SlidingEntry | Event::Grazing))
    else {
        return Ok(None);
    };
    let before = tr.arcs[0].kind;
    let hint = match (first.event, before.side()) {
        (Event::SlidingEntry, _) => ArcKind::Sliding,
        (Event::BoundaryHit, Some(side)) => side.other().into(),
        _ => before,
    };
    let again = flow(sys, first.p, Some(hint), t, alpha, opts)?;
    let guard = 2.0 * opts.event_tol;
    Ok(Some(again.events.iter().skip(1).any(|e| {
        e.event == first.event && e.t.abs() <= guard && e.p.dist(first.p) <= guard
    })))
}

/// For each intrinsic quantity: the change when both tolerances are halved, and the error
/// estimate reported at the original tolerances.
pub fn halving_changes(
    sys: &FilippovSystem,
    gcd: &GrazingCycleData,
    opts: &IntegratorOptions,
) -> Result<Vec<(&'static str, f64, f64)>> {
    let base = quantities(sys, gcd, opts)?;
    let half = quantities(sys, gcd, &opts.scaled(0.5))?;
    let (_, est) = error_estimates(sys, gcd, opts)?;
    Ok(base
        .named()
        .iter()
        .zip(half.named().iter())
        .zip(est)
        .map(|(((n, a), (_, b)), (_, e))| (*n, (a - b).abs(), e))
        .collect())
}

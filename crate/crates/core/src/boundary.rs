//! Filippov classification of points on `y = 0`, the sliding field, folds and
//! pseudo-equilibria.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{FilippovSystem, Params, Point, Side};
use crate::roots;

/// `|Zh|` below this counts as a tangency.
pub const TANGENCY_TOL: f64 = 1e-10;
/// `|Z²h|` below this at a tangency is a degenerate (non-fold) contact.
pub const DEGENERATE_FOLD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BoundaryKind {
    Crossing,
    SlidingStable,
    SlidingUnstable,
    Tangency,
    BoundaryEquilibrium,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FoldInfo {
    pub is_fold: bool,
    pub visible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryClass {
    pub kind: BoundaryKind,
    pub upper: Option<FoldInfo>,
    pub lower: Option<FoldInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TangencySide {
    Upper,
    Lower,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TangencyRecord {
    pub x: f64,
    pub side: TangencySide,
    pub upper: Option<FoldInfo>,
    pub lower: Option<FoldInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PseudoKind {
    PseudoSaddle,
    PseudoNode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PseudoEquilibrium {
    pub x: f64,
    pub kind: PseudoKind,
}

/// A maximal interval of sliding between consecutive tangencies.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlidingSegment {
    pub a: f64,
    pub b: f64,
    pub stable: bool,
}

fn fold_info(side: Side, z2h: f64) -> FoldInfo {
    let is_fold = z2h.abs() >= DEGENERATE_FOLD_TOL;
    let visible = match side {
        Side::Upper => z2h > 0.0,
        Side::Lower => z2h < 0.0,
    };
    FoldInfo { is_fold, visible: is_fold && visible }
}

pub fn classify_point(sys: &FilippovSystem, x0: f64, alpha: &Params) -> Result<BoundaryClass> {
    let p = Point::new(x0, 0.0);
    for side in [Side::Upper, Side::Lower] {
        let v = sys.eval_side(p, side, alpha)?;
        if v[0].abs() < TANGENCY_TOL && v[1].abs() < TANGENCY_TOL {
            return Ok(BoundaryClass { kind: BoundaryKind::BoundaryEquilibrium, upper: None, lower: None });
        }
    }
    let (zu, z2u) = sys.lie_derivatives(x0, Side::Upper, alpha)?;
    let (zl, z2l) = sys.lie_derivatives(x0, Side::Lower, alpha)?;
    let mut upper = None;
    let mut lower = None;
    if zu.abs() < TANGENCY_TOL {
        if z2u.abs() < DEGENERATE_FOLD_TOL {
            return Err(Error::AmbiguousClassification { x: x0 });
        }
        upper = Some(fold_info(Side::Upper, z2u));
    }
    if zl.abs() < TANGENCY_TOL {
        if z2l.abs() < DEGENERATE_FOLD_TOL {
            return Err(Error::AmbiguousClassification { x: x0 });
        }
        lower = Some(fold_info(Side::Lower, z2l));
    }
    let kind = if upper.is_some() || lower.is_some() {
        BoundaryKind::Tangency
    } else if zu * zl > 0.0 {
        BoundaryKind::Crossing
    } else if zu < 0.0 {
        BoundaryKind::SlidingStable
    } else {
        BoundaryKind::SlidingUnstable
    };
    Ok(BoundaryClass { kind, upper, lower })
}

/// Full Filippov sliding vector `μZ⁻ + (1−μ)Z⁺` at `(x0, 0)`.
pub fn sliding_field(sys: &FilippovSystem, x0: f64, alpha: &Params) -> Result<[f64; 2]> {
    let p = Point::new(x0, 0.0);
    let zp = sys.eval_side(p, Side::Upper, alpha)?;
    let zm = sys.eval_side(p, Side::Lower, alpha)?;
    let den = zp[1] - zm[1];
    if den.abs() < 1e-14 {
        return Err(Error::DivisionDegenerate { x: x0 });
    }
    let mu = zp[1] / den;
    Ok([mu * zm[0] + (1.0 - mu) * zp[0], mu * zm[1] + (1.0 - mu) * zp[1]])
}

/// The x-component of the sliding field.
pub fn sliding_velocity(sys: &FilippovSystem, x0: f64, alpha: &Params) -> Result<f64> {
    sliding_field(sys, x0, alpha).map(|v| v[0])
}

const SCAN_POINTS: usize = 400;

fn side_roots(sys: &FilippovSystem, side: Side, lo: f64, hi: f64, alpha: &Params) -> Result<Vec<(f64, bool)>> {
    let g = |x: f64| sys.eval_side(Point::new(x, 0.0), side, alpha).map(|v| v[1]);
    let n = SCAN_POINTS;
    let xs: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let mut vals = Vec::with_capacity(n + 1);
    for &x in &xs {
        vals.push(g(x)?);
    }
    let mut out: Vec<(f64, bool)> = Vec::new();
    let mut push = |x: f64, degenerate: bool| {
        if !out.iter().any(|(r, _)| (r - x).abs() < 1e-9) {
            out.push((x, degenerate));
        }
    };
    for k in 0..n {
        let (a, b) = (xs[k], xs[k + 1]);
        let (ga, gb) = (vals[k], vals[k + 1]);
        if ga == 0.0 {
            push(a, false);
            continue;
        }
        if ga * gb < 0.0 {
            let r = roots::brent(g, a, b, 1e-15, 1e-14, 200)?;
            let r = polish(sys, side, r, alpha).unwrap_or(r);
            push(r, false);
        } else if k > 0 && vals[k].abs() < vals[k - 1].abs() && vals[k].abs() <= vals[k + 1].abs() {
            let (xm, gm) = roots::brent_minimize(|x| g(x).map(f64::abs), xs[k - 1], b, 1e-14, 200)?;
            if gm < TANGENCY_TOL {
                push(xm, true);
            }
        }
    }
    if vals[n] == 0.0 {
        push(hi, false);
    }
    Ok(out)
}

fn polish(sys: &FilippovSystem, side: Side, x0: f64, alpha: &Params) -> Result<f64> {
    roots::newton(
        |x| {
            let p = Point::new(x, 0.0);
            let v = sys.eval_side(p, side, alpha)?;
            Ok((v[1], sys.jacobian(p, side, alpha)[1][0]))
        },
        x0,
        1e-12,
        20,
    )
}

/// All zeros of `g⁺(·, 0)` and `g⁻(·, 0)` in `[lo, hi]`, merged across sides, sorted by `x`.
pub fn find_tangencies(sys: &FilippovSystem, lo: f64, hi: f64, alpha: &Params) -> Result<Vec<TangencyRecord>> {
    let mut recs: Vec<TangencyRecord> = Vec::new();
    for side in [Side::Upper, Side::Lower] {
        for (x, degenerate) in side_roots(sys, side, lo, hi, alpha)? {
            let (_, z2h) = sys.lie_derivatives(x, side, alpha)?;
            let mut info = fold_info(side, z2h);
            if degenerate {
                info.is_fold = false;
                info.visible = false;
            }
            if let Some(r) = recs.iter_mut().find(|r| (r.x - x).abs() < 1e-9) {
                r.side = TangencySide::Both;
                match side {
                    Side::Upper => r.upper = Some(info),
                    Side::Lower => r.lower = Some(info),
                }
            } else {
                let (s, u, l) = match side {
                    Side::Upper => (TangencySide::Upper, Some(info), None),
                    Side::Lower => (TangencySide::Lower, None, Some(info)),
                };
                recs.push(TangencyRecord { x, side: s, upper: u, lower: l });
            }
        }
    }
    recs.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(recs)
}

/// Maximal sliding segments inside `[lo, hi]`, split at tangencies.
pub fn sliding_segments(sys: &FilippovSystem, lo: f64, hi: f64, alpha: &Params) -> Result<Vec<SlidingSegment>> {
    let tang = find_tangencies(sys, lo, hi, alpha)?;
    let mut cuts: Vec<f64> = Vec::with_capacity(tang.len() + 2);
    cuts.push(lo);
    cuts.extend(tang.iter().map(|t| t.x).filter(|&x| x > lo && x < hi));
    cuts.push(hi);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        match classify_point(sys, mid, alpha)?.kind {
            BoundaryKind::SlidingStable => out.push(SlidingSegment { a: w[0], b: w[1], stable: true }),
            BoundaryKind::SlidingUnstable => out.push(SlidingSegment { a: w[0], b: w[1], stable: false }),
            _ => {}
        }
    }
    Ok(out)
}

/// Zeros of the sliding velocity inside the open segment `(a, b)`.
///
/// A zero is a pseudo-saddle when the sliding flow along `Σ` and the transverse dynamics
/// disagree: repelling along `Σ` on an attracting segment, or attracting along `Σ` on a
/// repelling one.
pub fn pseudo_equilibria(sys: &FilippovSystem, a: f64, b: f64, alpha: &Params) -> Result<Vec<PseudoEquilibrium>> {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    let w = b - a;
    let lo = a + 1e-9 * w.max(1e-300);
    let hi = b - 1e-9 * w.max(1e-300);
    let stable = match classify_point(sys, 0.5 * (a + b), alpha)?.kind {
        BoundaryKind::SlidingStable => true,
        BoundaryKind::SlidingUnstable => false,
        _ => return Ok(Vec::new()),
    };
    let v = |x: f64| sliding_velocity(sys, x, alpha);
    let n = 200;
    let xs: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let mut vals = Vec::with_capacity(n + 1);
    for &x in &xs {
        vals.push(v(x)?);
    }
    let mut out = Vec::new();
    for k in 0..n {
        if vals[k] == 0.0 || vals[k] * vals[k + 1] < 0.0 {
            let r = if vals[k] == 0.0 { xs[k] } else { roots::brent(v, xs[k], xs[k + 1], 1e-15, 1e-14, 200)? };
            let h = 1e-6 * w.max(1e-12);
            let slope = (v(r + h)? - v(r - h)?) / (2.0 * h);
            let saddle = (stable && slope > 0.0) || (!stable && slope < 0.0);
            out.push(PseudoEquilibrium { x: r, kind: if saddle { PseudoKind::PseudoSaddle } else { PseudoKind::PseudoNode } });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{symmetrize, FnField, ALPHA0};
    use alloc::sync::Arc;

    fn constant(up: [f64; 2], lo: [f64; 2]) -> FilippovSystem {
        FilippovSystem::from_pair(
            Arc::new(FnField(move |_: Point, _: &Params| up)),
            Arc::new(FnField(move |_: Point, _: &Params| lo)),
        )
    }

    fn parabola() -> FilippovSystem {
        symmetrize(Arc::new(FnField(|p: Point, _: &Params| [1.0, 2.0 * p.x])))
    }

    #[test]
    fn constant_fields_slide() {
        let s = constant([1.0, -1.0], [1.0, 1.0]);
        assert_eq!(classify_point(&s, 0.3, &ALPHA0).unwrap().kind, BoundaryKind::SlidingStable);
        assert_eq!(sliding_velocity(&s, 0.0, &ALPHA0).unwrap(), 1.0);
        let s2 = constant([2.0, -1.0], [0.0, 1.0]);
        assert_eq!(sliding_velocity(&s2, 0.0, &ALPHA0).unwrap(), 1.0);
        assert!(pseudo_equilibria(&s, -1.0, 1.0, &ALPHA0).unwrap().is_empty());
        let u = constant([1.0, 1.0], [1.0, -1.0]);
        assert_eq!(classify_point(&u, 0.0, &ALPHA0).unwrap().kind, BoundaryKind::SlidingUnstable);
    }

    #[test]
    fn parabola_classification() {
        let s = parabola();
        assert_eq!(classify_point(&s, 0.5, &ALPHA0).unwrap().kind, BoundaryKind::Crossing);
        let c = classify_point(&s, 0.0, &ALPHA0).unwrap();
        assert_eq!(c.kind, BoundaryKind::Tangency);
        assert_eq!(c.upper, Some(FoldInfo { is_fold: true, visible: true }));
        assert_eq!(c.lower, Some(FoldInfo { is_fold: true, visible: true }));
        let t = find_tangencies(&s, -1.0, 1.0, &ALPHA0).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].side, TangencySide::Both);
        assert!(t[0].x.abs() < 1e-12);
    }

    #[test]
    fn degenerate_tangency_is_reported() {
        let s = symmetrize(Arc::new(FnField(|p: Point, _: &Params| [1.0, p.x * p.x])));
        assert!(matches!(classify_point(&s, 0.0, &ALPHA0), Err(Error::AmbiguousClassification { .. })));
    }

    #[test]
    fn node_on_stable_segment() {
        let s = FilippovSystem::from_pair(
            Arc::new(FnField(|p: Point, _: &Params| [-p.x, -1.0])),
            Arc::new(FnField(|p: Point, _: &Params| [-p.x, 1.0])),
        );
        let pe = pseudo_equilibria(&s, -1.0, 1.0, &ALPHA0).unwrap();
        assert_eq!(pe.len(), 1);
        assert!(pe[0].x.abs() < 1e-12);
        assert_eq!(pe[0].kind, PseudoKind::PseudoNode);
    }

    #[test]
    fn sliding_field_is_tangent() {
        let s = FilippovSystem::from_pair(
            Arc::new(FnField(|p: Point, _: &Params| [1.0 + p.x, -2.0 - p.x * p.x])),
            Arc::new(FnField(|p: Point, _: &Params| [p.x, 0.5 + p.x * p.x])),
        );
        for k in 0..20 {
            let v = sliding_field(&s, -1.0 + 0.1 * k as f64, &ALPHA0).unwrap();
            assert!(v[1].abs() <= 1e-12);
        }
    }
}

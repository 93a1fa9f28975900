//! Parallel versions of the tracing and diagram assembly. Work is split over (curve, `β₁`)
//! pairs and region cases; results are collected in input order, so output is deterministic.

use grazing_core::atlas::{
    assemble_curve, beta1_grid, classify_case, ordering_violations, region_cases, trace_point, BifurcationDiagram,
    BoundaryCurve, CurveKind, TracedPoint, Unfolding,
};
use grazing_core::Result;
use rayon::prelude::*;

use crate::config::GridConfig;

/// Negative and positive `β₁` grids in absolute units.
pub fn grids(unf: &Unfolding, g: &GridConfig) -> (Vec<f64>, Vec<f64>) {
    let s = unf.setup.scale();
    (beta1_grid(g.beta1_min, g.beta1_max, g.points, s, -1.0), beta1_grid(g.beta1_min, g.beta1_max, g.points, s, 1.0))
}

pub fn trace_curves(unf: &Unfolding, kinds: &[CurveKind], neg: &[f64], pos: &[f64]) -> Vec<BoundaryCurve> {
    let grid = |k: CurveKind| if k.side() < 0.0 { neg } else { pos };
    let tasks: Vec<(CurveKind, f64)> = kinds.iter().flat_map(|&k| grid(k).iter().map(move |&b| (k, b))).collect();
    let traced: Vec<(CurveKind, f64, Result<TracedPoint>)> =
        tasks.par_iter().map(|&(k, b)| (k, b, trace_point(unf, k, b))).collect();
    let mut per_kind: Vec<Vec<(f64, Result<TracedPoint>)>> = kinds.iter().map(|_| Vec::new()).collect();
    for (k, b, r) in traced {
        if let Some(i) = kinds.iter().position(|&q| q == k) {
            per_kind[i].push((b, r));
        }
    }
    kinds.iter().zip(per_kind).map(|(&k, points)| assemble_curve(unf, k, points)).collect()
}

pub fn build_diagram(unf: &Unfolding, neg: &[f64], pos: &[f64]) -> Result<BifurcationDiagram> {
    unf.require_stable()?;
    let curves = trace_curves(unf, &CurveKind::PSI, neg, pos);
    let cases = region_cases(&curves, neg, pos);
    let regions = cases.par_iter().map(|c| classify_case(unf, c)).collect();
    let ordering_violations = ordering_violations(&curves);
    Ok(BifurcationDiagram { curves, regions, ordering_violations })
}

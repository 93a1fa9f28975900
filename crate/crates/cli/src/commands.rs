use grazing_core::atlas::{
    beta_form_at, predicted_coefficients, to_beta_form, BifurcationDiagram, BoundaryCurve, CurveKind,
    PredictedCoefficients, RegionResult, Unfolding,
};
use grazing_core::boundary::{find_tangencies, pseudo_equilibria, sliding_segments, PseudoEquilibrium, SlidingSegment, TangencyRecord};
use grazing_core::cycles::{classify_portrait, CensusEntry, PortraitInventory};
use grazing_core::field::Point;
use grazing_core::integrate::hybrid::{flow, flow_until, Direction, EventRecord, HybridTrajectory};
use grazing_core::integrate::rk::IntegratorOptions;
use grazing_core::variational::{
    beta_jacobian, error_estimates, floquet, grazing_cycle, identity_residuals, sign_suite, IdentityResiduals,
    IntrinsicQuantities,
};
use grazing_core::{Error, FilippovSystem, Params};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{num, Output};
use crate::pipeline;
use crate::systems::{self, ResolvedSystem};

pub type CmdResult = Result<String, CliError>;

fn trajectory_rows(tr: &HybridTrajectory) -> Vec<Vec<String>> {
    let mut rows: Vec<(f64, Point, &'static str, String)> = Vec::new();
    for arc in &tr.arcs {
        for &(t, p) in &arc.samples {
            if rows.last().is_some_and(|r| r.0 == t && r.1 == p) {
                continue;
            }
            rows.push((t, p, arc.kind.as_str(), String::new()));
        }
    }
    for ev in &tr.events {
        match rows.iter_mut().find(|r| r.0 == ev.t && r.1 == ev.p && r.3.is_empty()) {
            Some(r) => r.3 = ev.event.as_str().into(),
            None => {
                let at = rows.partition_point(|r| r.0.abs() <= ev.t.abs());
                let kind = rows.get(at.saturating_sub(1)).map_or("upper", |r| r.2);
                rows.insert(at, (ev.t, ev.p, kind, ev.event.as_str().into()));
            }
        }
    }
    rows.into_iter().map(|(t, p, k, e)| vec![num(t), num(p.x), num(p.y), k.into(), e]).collect()
}

const TRAJECTORY_HEADER: [&str; 5] = ["t", "x", "y", "arc_kind", "event"];

#[derive(Serialize)]
struct ArcSummary {
    kind: &'static str,
    t_start: f64,
    t_end: f64,
    samples: usize,
}

#[derive(Serialize)]
struct SimulateResult {
    system: ResolvedSystem,
    alpha: Params,
    from: [f64; 2],
    t: f64,
    direction: &'static str,
    total_time: f64,
    final_point: Point,
    final_event: &'static str,
    events: Vec<EventRecord>,
    arcs: Vec<ArcSummary>,
    trajectory_file: &'static str,
}

pub fn simulate(cfg: &RunConfig, out: &mut Output) -> CmdResult {
    let (sys, system) = systems::build(cfg)?;
    let s = &cfg.simulate;
    let start = Point::new(s.from[0], s.from[1]);
    let tr = flow_until(&sys, start, s.side_hint(), s.t, &cfg.params.alpha, &cfg.tolerances.options(), s.direction(), None)?;
    out.csv("trajectory.csv", &TRAJECTORY_HEADER, trajectory_rows(&tr))?;
    let result = SimulateResult {
        system,
        alpha: cfg.params.alpha,
        from: s.from,
        t: s.t,
        direction: if s.direction() == Direction::Forward { "forward" } else { "backward" },
        total_time: tr.total_time,
        final_point: tr.end_point(),
        final_event: tr.final_event().as_str(),
        events: tr.events.clone(),
        arcs: tr
            .arcs
            .iter()
            .map(|a| ArcSummary { kind: a.kind.as_str(), t_start: a.start().0, t_end: a.end().0, samples: a.samples.len() })
            .collect(),
        trajectory_file: "trajectory.csv",
    };
    out.json("simulate.json", &result)
}

#[derive(Serialize)]
struct SegmentReport {
    segment: SlidingSegment,
    pseudo_equilibria: Vec<PseudoEquilibrium>,
}

#[derive(Serialize)]
struct TangencyResult {
    system: ResolvedSystem,
    alpha: Params,
    interval: [f64; 2],
    tangencies: Vec<TangencyRecord>,
    sliding_segments: Vec<SegmentReport>,
}

pub fn tangencies(cfg: &RunConfig, out: &mut Output) -> CmdResult {
    let (sys, system) = systems::build(cfg)?;
    let (lo, hi, alpha) = (cfg.tangencies.x_min, cfg.tangencies.x_max, cfg.params.alpha);
    let segments = sliding_segments(&sys, lo, hi, &alpha)?
        .into_iter()
        .map(|seg| Ok(SegmentReport { segment: seg, pseudo_equilibria: pseudo_equilibria(&sys, seg.a, seg.b, &alpha)? }))
        .collect::<Result<Vec<_>, Error>>()?;
    let result = TangencyResult {
        system,
        alpha,
        interval: [lo, hi],
        tangencies: find_tangencies(&sys, lo, hi, &alpha)?,
        sliding_segments: segments,
    };
    out.json("tangencies.json", &result)
}

#[derive(Serialize)]
struct CycleSummary {
    period: f64,
    diameter: f64,
    section: Point,
    section_phase: f64,
    section_fallback: bool,
    tau_plus: f64,
    tau_minus: f64,
    closure_residual: f64,
}

#[derive(Serialize)]
struct NamedValue {
    name: &'static str,
    value: f64,
    error_estimate: f64,
}

#[derive(Serialize)]
struct QuantitiesResult {
    system: ResolvedSystem,
    tolerances: IntegratorOptions,
    lambda0: f64,
    floquet_lambda0: f64,
    kappa2_positive: bool,
    transversality: f64,
    transversality_holds: bool,
    beta_jacobian: Option<[[f64; 2]; 2]>,
    beta_jacobian_det: Option<f64>,
    predicted_coefficients: PredictedCoefficients,
    cycle: CycleSummary,
    values: Vec<NamedValue>,
    quantities: IntrinsicQuantities,
    identity_residuals: IdentityResiduals,
    identity_max: f64,
    sign_suite: Vec<(&'static str, bool)>,
}

fn quantities_opts(cfg: &RunConfig) -> IntegratorOptions {
    if cfg.quantities.strict {
        IntegratorOptions::strict()
    } else {
        cfg.tolerances.options()
    }
}

fn quantities_result(cfg: &RunConfig, sys: &FilippovSystem, system: ResolvedSystem) -> Result<QuantitiesResult, CliError> {
    let opts = quantities_opts(cfg);
    let gcd = grazing_cycle(sys, &opts, cfg.system.section_phase)?;
    let q = grazing_core::variational::quantities(sys, &gcd, &opts)?;
    let (_, est) = error_estimates(sys, &gcd, &opts)?;
    let values = q
        .named()
        .iter()
        .zip(est)
        .map(|(&(name, value), (_, e))| NamedValue { name, value, error_estimate: e })
        .collect();
    let jac = beta_jacobian(&q).ok();
    let r = identity_residuals(&q);
    let t = q.transversality();
    Ok(QuantitiesResult {
        system,
        tolerances: opts,
        lambda0: q.lambda0,
        floquet_lambda0: floquet(&gcd).0,
        kappa2_positive: q.kappa2 > 0.0,
        transversality: t,
        transversality_holds: t.abs() > 1e-8,
        beta_jacobian: jac,
        beta_jacobian_det: jac.map(|j| j[0][0] * j[1][1] - j[0][1] * j[1][0]),
        predicted_coefficients: predicted_coefficients(&q),
        cycle: CycleSummary {
            period: gcd.period,
            diameter: gcd.diameter,
            section: gcd.section,
            section_phase: gcd.section_phase,
            section_fallback: gcd.section_fallback,
            tau_plus: gcd.tau_plus,
            tau_minus: gcd.tau_minus,
            closure_residual: gcd.closure_residual,
        },
        values,
        quantities: q,
        identity_residuals: r,
        identity_max: r.max(),
        sign_suite: sign_suite(&q).to_vec(),
    })
}

pub fn quantities(cfg: &RunConfig, out: &mut Output) -> CmdResult {
    let (sys, system) = systems::build(cfg)?;
    let result = quantities_result(cfg, &sys, system)?;
    out.json("quantities.json", &result)
}

fn unfolding(cfg: &RunConfig) -> Result<(Unfolding, ResolvedSystem), CliError> {
    let (sys, system) = systems::build(cfg)?;
    let unf = Unfolding::new(&sys, &cfg.tolerances.options(), cfg.system.section_phase)?;
    Ok((unf, system))
}

fn census_text(c: &[CensusEntry]) -> String {
    c.iter()
        .map(|(k, s)| match s {
            Some(s) => format!("{}:{}", k.as_str(), s.as_str()),
            None => k.as_str().to_string(),
        })
        .collect::<Vec<_>>()
        .join(";")
}

#[derive(Serialize)]
struct PortraitResult {
    system: ResolvedSystem,
    alpha: Params,
    beta: [f64; 2],
    census: String,
    inventory: PortraitInventory,
    trajectory_files: Vec<String>,
}

pub fn portrait(cfg: &RunConfig, out: &mut Output) -> CmdResult {
    let (unf, system) = unfolding(cfg)?;
    let bf = match cfg.params.beta {
        Some(b) => beta_form_at(&unf, b, None)?,
        None => to_beta_form(&unf, &cfg.params.alpha)?,
    };
    let inv = classify_portrait(&bf, &unf.setup)?;
    let mut files = Vec::new();
    if cfg.portrait.trajectories {
        let groups = [
            ("standard", &inv.standard_cycles),
            ("grazing", &inv.grazing_cycles),
            ("crossing", &inv.crossing_cycles),
            ("critical_crossing", &inv.critical_crossing),
            ("sliding_one_zonal", &inv.sliding_cycles_one_zonal),
            ("sliding_two_zonal", &inv.sliding_cycles_two_zonal),
            ("sliding_homoclinic", &inv.sliding_homoclinics),
        ];
        let t = 2.2 * unf.setup.period;
        for (name, recs) in groups {
            for (k, rec) in recs.iter().enumerate() {
                let tr = flow(&bf.sys, rec.point, None, t, &bf.alpha, &unf.setup.opts)?;
                let file = format!("object_{name}_{k}.csv");
                out.csv(&file, &TRAJECTORY_HEADER, trajectory_rows(&tr))?;
                files.push(file);
            }
        }
    }
    let result = PortraitResult { system, alpha: bf.alpha, beta: bf.beta, census: census_text(&inv.census()), inventory: inv, trajectory_files: files };
    out.json("portrait.json", &result)
}

fn curve_kinds(name: &str) -> Vec<CurveKind> {
    CurveKind::PSI.iter().copied().filter(|k| name == "all" || k.as_str() == name).collect()
}

fn curve_csv(out: &mut Output, c: &BoundaryCurve) -> Result<String, CliError> {
    let file = format!("{}.csv", c.kind.as_str());
    let rows = c.samples.iter().map(|s| vec![num(s.beta1), num(s.beta2), num(s.alpha[0]), num(s.alpha[1]), num(s.event_residual)]);
    out.csv(&file, &["beta1", "beta2", "alpha1", "alpha2", "event_residual"], rows)?;
    Ok(file)
}

#[derive(Serialize)]
struct CurveReport {
    curve: &'static str,
    file: String,
    points: usize,
    skipped: Vec<(f64, String)>,
    predicted_coeff: f64,
    fitted_coeff: Option<f64>,
    relative_error: Option<f64>,
    linear_term: Option<f64>,
    tangent: Option<bool>,
}

fn curve_report(out: &mut Output, c: &BoundaryCurve) -> Result<CurveReport, CliError> {
    Ok(CurveReport {
        curve: c.kind.as_str(),
        file: curve_csv(out, c)?,
        points: c.samples.len(),
        skipped: c.skipped.clone(),
        predicted_coeff: c.predicted_coeff,
        fitted_coeff: c.fitted_coeff,
        relative_error: c.coefficient_error(),
        linear_term: c.fit.map(|f| f.linear),
        tangent: c.fit.map(|f| f.is_tangent()),
    })
}

#[derive(Serialize)]
struct BoundaryResult {
    system: ResolvedSystem,
    scale: f64,
    curves: Vec<CurveReport>,
    fits: Vec<BoundaryCurve>,
}

pub fn boundary(cfg: &RunConfig, out: &mut Output) -> CmdResult {
    let (unf, system) = unfolding(cfg)?;
    unf.require_stable()?;
    let (neg, pos) = pipeline::grids(&unf, &cfg.grid);
    let curves = pipeline::trace_curves(&unf, &curve_kinds(&cfg.boundary.curve), &neg, &pos);
    let reports = curves.iter().map(|c| curve_report(out, c)).collect::<Result<Vec<_>, _>>()?;
    let result = BoundaryResult { system, scale: unf.setup.scale(), curves: reports, fits: curves };
    out.json("boundary.json", &result)
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plots the traced boundary curves and the region samples from the CSVs in this directory."""
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def read(name):
    with open(os.path.join(here, name), newline="") as fh:
        return list(csv.DictReader(fh))


fig, ax = plt.subplots(figsize=(7, 5))
for k in range(1, 6):
    name = f"psi{k}.csv"
    if not os.path.exists(os.path.join(here, name)):
        continue
    rows = read(name)
    ax.plot([float(r["beta1"]) for r in rows], [float(r["beta2"]) for r in rows], "o-", ms=3, label=f"psi{k}")
for r in read("regions.csv"):
    b1, b2 = float(r["beta1"]), float(r["beta2"])
    ax.plot(b1, b2, "k." if r["matches"] == "true" else "rx")
    ax.annotate(r["label"], (b1, b2), fontsize=7)
ax.axhline(0.0, color="0.6", lw=0.5)
ax.axvline(0.0, color="0.6", lw=0.5)
ax.set_xscale("symlog", linthresh=1e-4)
ax.set_yscale("symlog", linthresh=1e-8)
ax.set_xlabel("beta1")
ax.set_ylabel("beta2")
ax.legend()
fig.tight_layout()
target = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "diagram.png")
fig.savefig(target, dpi=150)
"#;

#[derive(Serialize)]
struct RegionRow {
    label: String,
    beta: [f64; 2],
    alpha: Params,
    matches: bool,
    expected: String,
    observed: String,
    max_closure: Option<f64>,
    error: Option<String>,
}

fn region_row(r: &RegionResult) -> RegionRow {
    RegionRow {
        label: r.case.label.clone(),
        beta: r.case.beta,
        alpha: r.alpha,
        matches: r.matches,
        expected: census_text(&r.expected),
        observed: census_text(&r.observed),
        max_closure: r.inventory.as_ref().map(|i| i.max_closure()),
        error: r.error.clone(),
    }
}

#[derive(Serialize)]
struct DiagramResult {
    system: ResolvedSystem,
    scale: f64,
    closure_tolerance: f64,
    consistent: bool,
    ordering_violations: Vec<String>,
    curves: Vec<CurveReport>,
    regions: Vec<RegionRow>,
    diagram: BifurcationDiagram,
}

fn write_diagram(out: &mut Output, unf: &Unfolding, system: ResolvedSystem, d: BifurcationDiagram) -> Result<DiagramResult, CliError> {
    let curves = d.curves.iter().map(|c| curve_report(out, c)).collect::<Result<Vec<_>, _>>()?;
    let regions: Vec<RegionRow> = d.regions.iter().map(region_row).collect();
    let header = ["label", "beta1", "beta2", "alpha1", "alpha2", "matches", "expected", "observed", "max_closure", "error"];
    let rows = regions.iter().map(|r| {
        vec![
            r.label.clone(),
            num(r.beta[0]),
            num(r.beta[1]),
            num(r.alpha[0]),
            num(r.alpha[1]),
            r.matches.to_string(),
            r.expected.clone(),
            r.observed.clone(),
            r.max_closure.map(num).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ]
    });
    out.csv("regions.csv", &header, rows)?;
    out.text("plot_diagram.py", PLOT_SCRIPT)?;
    Ok(DiagramResult {
        system,
        scale: unf.setup.scale(),
        closure_tolerance: unf.setup.closure_tol(),
        consistent: d.check().is_ok(),
        ordering_violations: d.ordering_violations.clone(),
        curves,
        regions,
        diagram: d,
    })
}

pub fn diagram(cfg: &RunConfig, out: &mut Output) -> CmdResult {
    let (unf, system) = unfolding(cfg)?;
    let (neg, pos) = pipeline::grids(&unf, &cfg.grid);
    let d = pipeline::build_diagram(&unf, &neg, &pos)?;
    let check = d.check();
    let result = write_diagram(out, &unf, system, d)?;
    let text = out.json("diagram.json", &result)?;
    check?;
    Ok(text)
}

#[derive(Serialize)]
struct ExampleResult {
    a: f64,
    theta: f64,
    quantities: QuantitiesResult,
    diagram: DiagramResult,
}

fn report_markdown(r: &ExampleResult) -> String {
    let q = &r.quantities;
    let mut s = String::new();
    s.push_str("# Thompson–Hunt grazing-sliding report\n\n");
    s.push_str(&format!("- a = {}\n- theta(a) = {}\n", r.a, r.theta));
    s.push_str(&format!("- period = {}\n- lambda(0) = {}\n", q.cycle.period, q.lambda0));
    s.push_str(&format!("- kappa2 = {} (positive: {})\n", q.quantities.kappa2, q.kappa2_positive));
    s.push_str(&format!("- transversality = {} (holds: {})\n", q.transversality, q.transversality_holds));
    s.push_str(&format!("- largest identity residual = {:e}\n\n", q.identity_max));
    s.push_str("| curve | predicted | fitted | relative error | tangent |\n|---|---|---|---|---|\n");
    for c in &r.diagram.curves {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
        s.push_str(&format!(
            "| {} | {:.6} | {} | {} | {} |\n",
            c.curve,
            c.predicted_coeff,
            opt(c.fitted_coeff),
            opt(c.relative_error),
            c.tangent.map_or("-".into(), |t| t.to_string())
        ));
    }
    s.push_str("\n| case | matches | observed |\n|---|---|---|\n");
    for g in &r.diagram.regions {
        s.push_str(&format!("| {} | {} | {} |\n", g.label, g.matches, g.error.clone().unwrap_or_else(|| g.observed.clone())));
    }
    s.push_str(&format!("\nOrdering violations: {}\n", r.diagram.ordering_violations.len()));
    s
}

pub fn example(cfg: &RunConfig, out: &mut Output) -> CmdResult {
    let (sys, system) = systems::build(cfg)?;
    let theta = system.b.expect("thompson_hunt resolves b");
    let q = quantities_result(cfg, &sys, system.clone())?;
    let unf = Unfolding::new(&sys, &cfg.tolerances.options(), cfg.system.section_phase)?;
    let (neg, pos) = pipeline::grids(&unf, &cfg.grid);
    let d = pipeline::build_diagram(&unf, &neg, &pos)?;
    let check = d.check();
    let dr = write_diagram(out, &unf, system, d)?;
    let result = ExampleResult { a: cfg.system.a, theta, quantities: q, diagram: dr };
    out.text("report.md", &report_markdown(&result))?;
    let text = out.json("report.json", &result)?;
    check?;
    Ok(text)
}

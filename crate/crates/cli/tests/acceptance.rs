//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.
//! Runs without the test harness: `cargo test -p grazing-cli --test acceptance`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use grazing_cli::config::GridConfig;
use grazing_cli::pipeline;
use grazing_core::atlas::{beta_form_at, BifurcationDiagram, Unfolding, CURVE_CASES, OPEN_REGIONS};
use grazing_core::checks::{event_refires, halving_changes, partition_consistent, sliding_tangency, symmetry_defect};
use grazing_core::cycles::{crossing_cycles, cycle_offset, fold_offset, CycleSetup, Stability};
use grazing_core::field::{Point, ALPHA0};
use grazing_core::integrate::rk::IntegratorOptions;
use grazing_core::models::{circle_system, find_theta, parabola_system, thompson_hunt};
use grazing_core::variational::{
    beta_jacobian, grazing_cycle, identity_residuals, quantities, sign_suite, DEFAULT_SECTION_PHASE,
};
use grazing_core::FilippovSystem;

type Outcome = Result<String, String>;

struct Report {
    failed: usize,
}

impl Report {
    fn record(&mut self, n: u8, name: &str, elapsed: Duration, limit: Option<Duration>, outcome: Outcome) {
        let outcome = match (outcome, limit) {
            (Ok(_), Some(l)) if elapsed > l => Err(format!("took {elapsed:.2?}, limit {l:?}")),
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        if outcome.is_err() {
            self.failed += 1;
        }
        println!("{tag} {n}. {name} [{elapsed:.2?}] {detail}");
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn floquet_oracle() -> Outcome {
    let opts = IntegratorOptions::default();
    let sys = circle_system();
    let gcd = grazing_cycle(&sys, &opts, DEFAULT_SECTION_PHASE).map_err(|e| e.to_string())?;
    let q = quantities(&sys, &gcd, &opts).map_err(|e| e.to_string())?;
    let exact = (-4.0 * PI).exp();
    let rel = ((q.lambda0 - exact) / exact).abs();
    ensure(rel <= 1e-6, || format!("lambda(0) = {:e}, relative error {rel:e}", q.lambda0))?;
    Ok(format!("lambda(0) = {:.10e}, relative error {rel:.1e}", q.lambda0))
}

fn identity_suite(theta: f64) -> Outcome {
    let opts = IntegratorOptions::strict();
    let mut worst = 0.0f64;
    for (name, sys) in [("circle", circle_system()), ("thompson_hunt", thompson_hunt(-1.0, theta))] {
        let gcd = grazing_cycle(&sys, &opts, DEFAULT_SECTION_PHASE).map_err(|e| format!("{name}: {e}"))?;
        let q = quantities(&sys, &gcd, &opts).map_err(|e| format!("{name}: {e}"))?;
        let r = identity_residuals(&q);
        for (what, v) in [
            ("|A1+ - A1-|", r.a1_diff),
            ("lambda ratio", r.lambda_ratio),
            ("A2 difference", r.a2_rel),
            ("B difference", r.b_rel),
        ] {
            ensure(v <= 1e-8, || format!("{name}: {what} residual {v:e}"))?;
            worst = worst.max(v);
        }
        for (sign, ok) in sign_suite(&q) {
            ensure(ok, || format!("{name}: sign check {sign} fails"))?;
        }
    }
    Ok(format!("largest residual {worst:.1e}, sign suite holds on both systems"))
}

fn reproduction() -> Result<(f64, String), String> {
    let opts = IntegratorOptions::default();
    let theta = find_theta(-1.0, &opts).map_err(|e| format!("find_theta: {e}"))?;
    let sys = thompson_hunt(-1.0, theta);
    let phi1 = fold_offset(&sys, &ALPHA0).map_err(|e| e.to_string())?;
    let gcd = grazing_cycle(&sys, &opts, DEFAULT_SECTION_PHASE).map_err(|e| e.to_string())?;
    let setup = CycleSetup::new(&gcd, &opts);
    let phi2 = cycle_offset(&sys, &ALPHA0, &setup).map_err(|e| e.to_string())?;
    let q = quantities(&sys, &gcd, &opts).map_err(|e| e.to_string())?;
    let j = beta_jacobian(&q).map_err(|e| e.to_string())?;
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    ensure(phi1.abs() <= 1e-10, || format!("|phi1| = {:e}", phi1.abs()))?;
    ensure(phi2.abs() <= 1e-9, || format!("|phi2| = {:e}", phi2.abs()))?;
    ensure(q.lambda0 < 1.0, || format!("lambda(0) = {}", q.lambda0))?;
    ensure(q.kappa2 > 0.0, || format!("kappa2 = {}", q.kappa2))?;
    ensure(det.abs() > 1e-3, || format!("det = {det:e}"))?;
    Ok((
        theta,
        format!(
            "theta = {theta:.11}, |phi1| = {:.1e}, |phi2| = {:.1e}, lambda(0) = {:.4}, kappa2 = {:.4}, det = {det:.4}",
            phi1.abs(),
            phi2.abs(),
            q.lambda0,
            q.kappa2
        ),
    ))
}

fn coefficients(d: &BifurcationDiagram) -> Outcome {
    let mut parts = Vec::new();
    for c in &d.curves {
        let name = c.kind.as_str();
        ensure(c.skipped.is_empty(), || format!("{name}: {} grid points failed", c.skipped.len()))?;
        let err = c.coefficient_error().ok_or_else(|| format!("{name}: no fit"))?;
        ensure(err <= 0.15, || format!("{name}: coefficient error {:.1}%", 100.0 * err))?;
        ensure(c.fit.as_ref().is_some_and(|f| f.is_tangent()), || format!("{name}: linear term not tangency-small"))?;
        parts.push(format!("{name} {:.1}%", 100.0 * err));
    }
    Ok(parts.join(", "))
}

fn ordering(d: &BifurcationDiagram) -> Outcome {
    ensure(d.ordering_violations.is_empty(), || format!("violations: {:?}", d.ordering_violations))?;
    let points: usize = d.curves.iter().map(|c| c.samples.len()).sum();
    Ok(format!("strict at all {points} traced points"))
}

fn census(d: &BifurcationDiagram, tol: f64) -> Outcome {
    let mut open = 0;
    let mut curve = 0;
    let mut worst = 0.0f64;
    for r in &d.regions {
        let label = r.case.label.as_str();
        ensure(r.matches, || match &r.error {
            Some(e) => format!("{label}: {e}"),
            None => format!("{label}: expected {:?}, observed {:?}", r.expected, r.observed),
        })?;
        let closure = r.inventory.as_ref().map_or(0.0, |i| i.max_closure());
        ensure(closure <= tol, || format!("{label}: closure {closure:e} > {tol:e}"))?;
        worst = worst.max(closure);
        if OPEN_REGIONS.contains(&label) {
            open += 1;
        } else if CURVE_CASES.contains(&label) {
            curve += 1;
        }
    }
    ensure(open == OPEN_REGIONS.len(), || format!("{open} of {} open regions sampled", OPEN_REGIONS.len()))?;
    ensure(curve >= 7, || format!("only {curve} curve cases sampled"))?;
    Ok(format!("{open} open regions and {curve} curve/axis cases match; largest closure {worst:.1e} (limit {tol:.1e})"))
}

fn displacement_correspondence(unf: &Unfolding, d: &BifurcationDiagram) -> Outcome {
    let case = d.regions.iter().find(|r| r.case.label == "4c").ok_or("no 4c sample")?;
    let bf = beta_form_at(unf, case.case.beta, case.case.alpha).map_err(|e| e.to_string())?;
    let roots = crossing_cycles(&bf, &unf.setup).map_err(|e| e.to_string())?;
    ensure(roots.len() == 2, || format!("{} crossing roots", roots.len()))?;
    let (inner, outer) = (roots[0], roots[1]);
    ensure(outer.derivative < 0.0 && outer.stability == Stability::Stable, || format!("outer root D' = {:e}", outer.derivative))?;
    ensure(inner.derivative > 0.0 && inner.stability == Stability::Unstable, || format!("inner root D' = {:e}", inner.derivative))?;
    let inv = case.inventory.as_ref().ok_or("no inventory")?;
    let mult = |s: Stability| inv.crossing_cycles.iter().find(|c| c.stability == Some(s)).and_then(|c| c.multiplier);
    let (ms, mu) = (mult(Stability::Stable).ok_or("no stable orbit")?, mult(Stability::Unstable).ok_or("no unstable orbit")?);
    ensure(ms.abs() < 1.0, || format!("stable orbit multiplier {ms}"))?;
    ensure(mu.abs() > 1.0, || format!("unstable orbit multiplier {mu}"))?;
    Ok(format!(
        "outer D' = {:.3e} (multiplier {ms:.4}), inner D' = {:.3e} (multiplier {mu:.4})",
        outer.derivative, inner.derivative
    ))
}

fn lattice(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| lo + (hi - lo) * (k as f64 + 0.5) / n as f64)
}

fn property_suites(theta: f64) -> Outcome {
    let opts = IntegratorOptions::default();
    let eps = opts.eps_int();
    let th = thompson_hunt(-1.0, theta);
    let alphas = [[0.0, 0.0], [0.01, -0.005], [-0.015, 0.01]];
    let err = |e: grazing_core::Error| e.to_string();

    let mut sym = 0.0f64;
    for alpha in &alphas {
        for x in lattice(-1.5, 1.5, 4) {
            for y in lattice(0.05, 2.0, 3) {
                sym = sym.max(symmetry_defect(&th, Point::new(x, y), 3.0, alpha, &opts).map_err(err)?);
            }
        }
    }
    ensure(sym <= 10.0 * eps, || format!("symmetry defect {sym:e}"))?;

    let systems: [FilippovSystem; 3] = [th.clone(), circle_system(), parabola_system()];
    let mut labelled = 0;
    let mut tangency = 0.0f64;
    for alpha in &alphas {
        for sys in &systems {
            for x in lattice(-2.0, 2.0, 80) {
                if let Some(ok) = partition_consistent(sys, x, alpha).map_err(err)? {
                    ensure(ok, || format!("partition disagrees at x = {x}"))?;
                    labelled += 1;
                }
            }
            for x in lattice(-0.05, 0.05, 40) {
                if let Some(g) = sliding_tangency(sys, x, alpha).map_err(err)? {
                    tangency = tangency.max(g);
                }
            }
        }
    }
    ensure(tangency <= 1e-12, || format!("sliding field normal component {tangency:e}"))?;

    let mut restarts = 0;
    for alpha in &alphas {
        for x in lattice(-1.0, 1.0, 8) {
            for y in lattice(0.02, 0.6, 4) {
                if let Some(again) = event_refires(&th, Point::new(x, y), 6.0, alpha, &opts).map_err(err)? {
                    ensure(!again, || format!("event re-fired after restart from ({x}, {y})"))?;
                    restarts += 1;
                }
            }
        }
    }
    ensure(restarts >= 10, || format!("only {restarts} flows reached the boundary"))?;

    for (name, sys) in [("thompson_hunt", th), ("circle", circle_system())] {
        let gcd = grazing_cycle(&sys, &IntegratorOptions::strict(), DEFAULT_SECTION_PHASE).map_err(err)?;
        for (q, change, estimate) in halving_changes(&sys, &gcd, &opts).map_err(err)? {
            ensure(change <= estimate, || format!("{name} {q}: change {change:e} > estimate {estimate:e}"))?;
        }
    }
    Ok(format!(
        "symmetry {sym:.1e}, {labelled} labels consistent, tangency {tangency:.1e}, {restarts} restarts clean, halving within estimates"
    ))
}

fn main() {
    let mut report = Report { failed: 0 };

    let (o, t) = timed(floquet_oracle);
    report.record(1, "Floquet oracle", t, Some(Duration::from_secs(1)), o);

    let (repro, t3) = timed(reproduction);
    let theta = repro.as_ref().map(|r| r.0).unwrap_or(0.28124677072);

    let (o, t) = timed(|| identity_suite(theta));
    report.record(2, "Identity suite", t, None, o);

    report.record(3, "Locus reproduction", t3, Some(Duration::from_secs(30)), repro.map(|r| r.1));

    let opts = IntegratorOptions::default();
    let (built, t) = timed(|| -> Result<(Unfolding, BifurcationDiagram), String> {
        let unf = Unfolding::new(&thompson_hunt(-1.0, theta), &opts, DEFAULT_SECTION_PHASE).map_err(|e| e.to_string())?;
        let (neg, pos) = pipeline::grids(&unf, &GridConfig::default());
        let diagram = pipeline::build_diagram(&unf, &neg, &pos).map_err(|e| e.to_string())?;
        Ok((unf, diagram))
    });
    match &built {
        Ok((unf, d)) => {
            report.record(4, "Asymptotic coefficients", t, Some(Duration::from_secs(600)), coefficients(d));
            report.record(5, "Curve ordering", t, None, ordering(d));
            report.record(6, "Region census", t, None, census(d, unf.setup.closure_tol()));
            let (o, t7) = timed(|| displacement_correspondence(unf, d));
            report.record(7, "Displacement correspondence", t7, None, o);
        }
        Err(e) => {
            for (n, name) in [(4, "Asymptotic coefficients"), (5, "Curve ordering"), (6, "Region census"), (7, "Displacement correspondence")] {
                report.record(n, name, t, None, Err(format!("diagram failed: {e}")));
            }
        }
    }

    let (o, t) = timed(|| property_suites(theta));
    report.record(8, "Property suites", t, Some(Duration::from_secs(120)), o);

    println!("acceptance: {} of 8 criteria passed", 8 - report.failed);
    if report.failed > 0 {
        std::process::exit(1);
    }
}

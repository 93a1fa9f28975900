//! Fold and cycle offsets, transition and displacement maps, and portrait classification.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::boundary;
use crate::error::{Error, Result};
use crate::field::{FilippovSystem, Params, Point, Side};
use crate::integrate::hybrid::{flow_until, hit_section, poincare_map, ArcKind, Direction, Event, Section, SectionKind};
use crate::integrate::rk::IntegratorOptions;
use crate::roots::{brent_minimize, newton};
use crate::variational::GrazingCycleData;

/// Abscissa of the `Z⁺` fold near the origin: the root of `g⁺(x, 0; α)`.
pub fn fold_offset(sys: &FilippovSystem, alpha: &Params) -> Result<f64> {
    newton(
        |x| {
            let p = Point::new(x, 0.0);
            let g = sys.eval_side(p, Side::Upper, alpha)?[1];
            Ok((g, sys.jacobian(p, Side::Upper, alpha)[1][0]))
        },
        0.0,
        1e-13,
        50,
    )
    .map_err(|_| Error::NoConvergence { what: "fold offset", iterations: 50 })
}

/// Largest `|β₁|`, as a fraction of the cycle diameter, at which the maps are used.
pub const BETA1_WINDOW: f64 = 1e-2;

/// Geometry shared by all maps at one unfolding: the section `Π`, the domain radius `ε₁`,
/// time budgets and the tolerance bands used to decide that a scalar vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CycleSetup {
    /// `(a, b)` on the unperturbed cycle.
    pub section: Point,
    pub half_width: f64,
    pub eps1: f64,
    pub diameter: f64,
    pub period: f64,
    pub opts: IntegratorOptions,
    /// Error growth `λ⁻(0)` of the backward transition from `Σ` to `Π`.
    pub amplification: f64,
    /// `|D|`, `|P|`, `|Q|` at or below this count as zero.
    pub zero_band: f64,
    /// `|β₂|` at or below this counts as zero.
    pub beta_band: f64,
    pub scan_points: usize,
}

impl CycleSetup {
    pub fn new(gcd: &GrazingCycleData, opts: &IntegratorOptions) -> Self {
        let scale = gcd.diameter.max(1e-3);
        let e_total = gcd.div_integral.last().copied().unwrap_or(0.0);
        let k = (0..gcd.gamma.len())
            .min_by(|&i, &j| (gcd.gamma[i].0 - gcd.tau_plus).abs().total_cmp(&(gcd.gamma[j].0 - gcd.tau_plus).abs()))
            .unwrap_or(0);
        let e_sec = gcd.div_integral.get(k).copied().unwrap_or(0.0);
        let amplification = libm::exp(e_sec - e_total).max(1.0);
        CycleSetup {
            section: gcd.section,
            half_width: 0.25 * gcd.diameter,
            eps1: 0.3 * gcd.diameter,
            diameter: gcd.diameter,
            period: gcd.period,
            opts: *opts,
            amplification,
            zero_band: 100.0 * opts.eps_int() * scale * amplification,
            beta_band: 1000.0 * opts.eps_int() * scale,
            scan_points: 400,
        }
    }

    /// Setup for offset computations only, when no grazing cycle is known yet.
    pub fn for_offsets(half_width: f64, period: f64, opts: &IntegratorOptions) -> Self {
        CycleSetup {
            section: Point::ORIGIN,
            half_width,
            eps1: 0.0,
            diameter: 4.0 * half_width,
            period,
            opts: *opts,
            amplification: 1.0,
            zero_band: 0.0,
            beta_band: 0.0,
            scan_points: 0,
        }
    }

    pub fn pi(&self) -> Section {
        let a = self.section.x;
        Section::horizontal(self.section.y, (a - self.half_width, a + self.half_width)).with_normal_sign(1.0)
    }

    pub fn scale(&self) -> f64 {
        self.diameter.max(1e-3)
    }

    /// Closure tolerance for certified objects.
    pub fn closure_tol(&self) -> f64 {
        10.0 * self.opts.eps_int() * self.scale()
    }

    fn t_budget(&self) -> f64 {
        2.0 * self.period
    }

    /// Halves `ε₁` until both transition maps reach `Π` at `±ε₁`, the backward one also at
    /// `−ε₁ − 2·BETA1_WINDOW·scale`, and `D(ε₁; 0) < 0`.
    pub fn adapt_eps1(&mut self, sys: &FilippovSystem) -> Result<()> {
        let bf = BetaForm::at(sys, [0.0, 0.0], [0.0, 0.0]);
        let reach = 2.0 * BETA1_WINDOW * self.scale();
        for _ in 0..12 {
            let ok = (|| -> Result<bool> {
                let dp = transition_map(&bf, self, self.eps1, MapSide::Plus)?;
                let dm = transition_map(&bf, self, -self.eps1, MapSide::Minus)?;
                transition_map(&bf, self, -self.eps1 - reach, MapSide::Minus)?;
                Ok(dp - dm < 0.0)
            })();
            match ok {
                Ok(true) => return Ok(()),
                Ok(false) | Err(Error::NoHit { .. }) => self.eps1 *= 0.5,
                Err(e) => return Err(e),
            }
        }
        Err(Error::NoConvergence { what: "displacement domain radius", iterations: 12 })
    }
}

/// Offset `β₂ = φ₂(α)` of the `Z⁺` limit cycle above the fold abscissa; positive when the
/// cycle lies strictly above `Σ`.
pub fn cycle_offset(sys: &FilippovSystem, alpha: &Params, setup: &CycleSetup) -> Result<f64> {
    cycle_offset_from(sys, alpha, setup, 0.0)
}

/// As [`cycle_offset`] with a continuation seed for the Newton iteration.
pub fn cycle_offset_from(sys: &FilippovSystem, alpha: &Params, setup: &CycleSetup, seed: f64) -> Result<f64> {
    let x0 = fold_offset(sys, alpha)?;
    let w = setup.half_width;
    let sec = Section::vertical(x0, (-w, w));
    let scale = setup.scale();
    let tol = 10.0 * setup.opts.eps_int() * scale;
    let max_step = 0.1 * scale;
    let mut y = seed;
    for _ in 0..50 {
        let (p, dp) = poincare_map(sys, &sec, y, alpha, &setup.opts, setup.t_budget())
            .map_err(|_| Error::NoCycle { what: "poincare return lost" })?;
        let r = p - y;
        if (dp - 1.0).abs() < 1e-12 {
            return Err(Error::HyperbolicityViolated { lambda0: dp });
        }
        let step = (-r / (dp - 1.0)).clamp(-max_step, max_step);
        y += step;
        if !y.is_finite() || y.abs() > w {
            break;
        }
        if r.abs() <= tol || step.abs() <= 1e-14 * scale {
            let y = match poincare_map(sys, &sec, y, alpha, &setup.opts, setup.t_budget()) {
                Ok((p, dp)) if (dp - 1.0).abs() >= 1e-12 => y - (p - y) / (dp - 1.0),
                _ => y,
            };
            let v = sys.eval_side(Point::new(x0, y), Side::Upper, alpha)?;
            if libm::hypot(v[0], v[1]) <= 1e-6 {
                return Err(Error::NoCycle { what: "return converged to an equilibrium" });
            }
            return Ok(y);
        }
    }
    Err(Error::NoCycle { what: "cycle offset iteration diverged" })
}

/// A system translated so that the `Z⁺` fold sits at the origin, with its parameters.
#[derive(Debug, Clone)]
pub struct BetaForm {
    pub sys: FilippovSystem,
    pub alpha: Params,
    pub beta: [f64; 2],
}

impl BetaForm {
    /// Translates `sys` (given in original coordinates) by `beta[0]`.
    pub fn at(sys: &FilippovSystem, alpha: Params, beta: [f64; 2]) -> Self {
        BetaForm { sys: sys.translated(beta[0]), alpha, beta }
    }

    /// Left end of the displacement domain `I`.
    pub fn domain_start(&self) -> f64 {
        (-2.0 * self.beta[0]).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum MapSide {
    Plus,
    Minus,
}

/// Abscissa on `Π` reached from `(x, 0)` by the forward (`Plus`) or backward (`Minus`) flow of `Z⁺`.
pub fn transition_map(bf: &BetaForm, setup: &CycleSetup, x: f64, side: MapSide) -> Result<f64> {
    let dir = match side {
        MapSide::Plus => Direction::Forward,
        MapSide::Minus => Direction::Backward,
    };
    let (_, p) = hit_section(
        &bf.sys,
        Point::new(x, 0.0),
        Side::Upper,
        &setup.pi(),
        dir,
        &bf.alpha,
        &setup.opts,
        setup.t_budget(),
    )?;
    Ok(p.x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DisplacementSample {
    pub x: f64,
    pub value: f64,
    pub derivative: f64,
}

/// `D(x) = D⁺(x) − D⁻(−2β₁ − x)`.
pub fn displacement_value(bf: &BetaForm, setup: &CycleSetup, x: f64) -> Result<f64> {
    let dp = transition_map(bf, setup, x, MapSide::Plus)?;
    let dm = transition_map(bf, setup, -2.0 * bf.beta[0] - x, MapSide::Minus)?;
    Ok(dp - dm)
}

fn diff_step(setup: &CycleSetup) -> f64 {
    libm::cbrt(setup.opts.eps_int()) * 0.1 * setup.scale()
}

/// `D` with its central-difference derivative.
pub fn displacement(bf: &BetaForm, setup: &CycleSetup, x: f64) -> Result<DisplacementSample> {
    let lo = bf.domain_start();
    if x < lo - 1e-12 * setup.scale() || x > setup.eps1 {
        return Err(Error::InvalidInput { detail: format!("x = {x} outside [{lo}, {}]", setup.eps1) });
    }
    let h = diff_step(setup);
    let value = displacement_value(bf, setup, x)?;
    let derivative = (displacement_value(bf, setup, x + h)? - displacement_value(bf, setup, x - h)?) / (2.0 * h);
    Ok(DisplacementSample { x, value, derivative })
}

fn second_derivative(bf: &BetaForm, setup: &CycleSetup, x: f64, d0: f64) -> Result<f64> {
    let h = 10.0 * diff_step(setup);
    Ok((displacement_value(bf, setup, x + h)? - 2.0 * d0 + displacement_value(bf, setup, x - h)?) / (h * h))
}

/// Scan abscissae on `I`, clustered toward its left end.
fn scan_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| {
        let s = k as f64 / n as f64;
        lo + (hi - lo) * s * s * s
    })
    .collect()
}

/// `D` sampled on the clustered scan grid over `I`.
pub fn scan_displacement(bf: &BetaForm, setup: &CycleSetup) -> Result<Vec<(f64, f64)>> {
    let lo = bf.domain_start();
    scan_grid(lo, setup.eps1, setup.scan_points)
        .into_iter()
        .map(|x| displacement_value(bf, setup, x).map(|d| (x, d)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Stability {
    Stable,
    Unstable,
    MultiplicityTwo,
    ExternallyStable,
    ExternallyUnstable,
    InternallyStable,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::MultiplicityTwo => "multiplicity-two",
            Stability::ExternallyStable => "externally-stable",
            Stability::ExternallyUnstable => "externally-unstable",
            Stability::InternallyStable => "internally-stable",
        }
    }

    /// Orientation of `D`: a zero with `D' < 0` is an attracting crossing cycle.
    pub fn from_slope(d: f64) -> Self {
        if d < 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CrossingRoot {
    pub x: f64,
    pub multiplicity: u8,
    pub stability: Stability,
    pub derivative: f64,
}

/// Zeros of `D` in the open domain `I°`, sorted by abscissa.
pub fn crossing_cycles(bf: &BetaForm, setup: &CycleSetup) -> Result<Vec<CrossingRoot>> {
    let samples = scan_displacement(bf, setup)?;
    crossing_cycles_from_scan(bf, setup, &samples)
}

fn crossing_cycles_from_scan(bf: &BetaForm, setup: &CycleSetup, samples: &[(f64, f64)]) -> Result<Vec<CrossingRoot>> {
    let lo = bf.domain_start();
    let band = setup.zero_band;
    let xtol = 1e-13 * setup.scale();
    let mut f = |x: f64| displacement_value(bf, setup, x);

    let kmax = (0..samples.len()).max_by(|&i, &j| samples[i].1.total_cmp(&samples[j].1)).unwrap_or(0);
    let mut double: Option<CrossingRoot> = None;
    let mut excl = 0.0;
    if kmax > 0 && kmax + 1 < samples.len() {
        let (a, b) = (samples[kmax - 1].0, samples[kmax + 1].0);
        let (xm, neg) = brent_minimize(|x| f(x).map(|v| -v), a, b, xtol, 200)?;
        let dm = -neg;
        if dm.abs() <= band {
            let d2 = second_derivative(bf, setup, xm, dm)?;
            let width = 4.0 * libm::sqrt(band / d2.abs());
            if d2 < 0.0 && xm - lo > width {
                excl = width;
                double = Some(CrossingRoot { x: xm, multiplicity: 2, stability: Stability::MultiplicityTwo, derivative: 0.0 });
            }
        }
    }

    let d_lo = samples.first().map(|s| s.1).unwrap_or(f64::NAN);
    let mut roots = Vec::new();
    for w in samples.windows(2) {
        let ((x0, d0), (x1, d1)) = (w[0], w[1]);
        if d0 * d1 >= 0.0 {
            continue;
        }
        let r = crate::roots::brent_with_values(&mut f, x0, d0, x1, d1, xtol, 0.0, 200)?;
        if let Some(dr) = &double {
            if (r - dr.x).abs() <= excl {
                continue;
            }
        }
        let h = diff_step(setup);
        let der = (f(r + h)? - f(r - h)?) / (2.0 * h);
        if d_lo.abs() <= band && (r - lo).abs() <= 2.0 * band / der.abs().max(1e-300) + 10.0 * xtol {
            continue;
        }
        if r <= lo {
            continue;
        }
        roots.push(CrossingRoot { x: r, multiplicity: 1, stability: Stability::from_slope(der), derivative: der });
    }
    roots.extend(double);
    roots.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(roots)
}

/// `P = D⁺(−β₁) − D⁻(0)`, `Q = D⁺(0) − D⁻(−β₁)` and `D` at the left end of `I`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryValues {
    pub p: f64,
    pub q: f64,
    pub d_left: f64,
}

pub fn boundary_functions(bf: &BetaForm, setup: &CycleSetup) -> Result<BoundaryValues> {
    let b1 = bf.beta[0];
    let dp0 = transition_map(bf, setup, 0.0, MapSide::Plus)?;
    let dm0 = transition_map(bf, setup, 0.0, MapSide::Minus)?;
    let p = transition_map(bf, setup, -b1, MapSide::Plus)? - dm0;
    let q = dp0 - transition_map(bf, setup, -b1, MapSide::Minus)?;
    let d_left = displacement_value(bf, setup, bf.domain_start())?;
    Ok(BoundaryValues { p, q, d_left })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CycleRecord {
    /// `None` for homoclinic orbits.
    pub stability: Option<Stability>,
    pub point: Point,
    /// Certified closure defect of direct integration.
    pub closure: f64,
    /// Derivative of the direct return map at the cycle, when one was polished.
    pub multiplier: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ObjectKind {
    StandardCycle,
    GrazingCycle,
    CrossingCycle,
    CriticalCrossing,
    SlidingOneZonal,
    SlidingTwoZonal,
    SlidingHomoclinic,
}

impl ObjectKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectKind::StandardCycle => "standard_cycle",
            ObjectKind::GrazingCycle => "grazing_cycle",
            ObjectKind::CrossingCycle => "crossing_cycle",
            ObjectKind::CriticalCrossing => "critical_crossing",
            ObjectKind::SlidingOneZonal => "sliding_one_zonal",
            ObjectKind::SlidingTwoZonal => "sliding_two_zonal",
            ObjectKind::SlidingHomoclinic => "sliding_homoclinic",
        }
    }
}

/// One entry of a census: object type with its stability label.
pub type CensusEntry = (ObjectKind, Option<Stability>);

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PortraitInventory {
    pub beta: [f64; 2],
    pub standard_cycles: Vec<CycleRecord>,
    pub grazing_cycles: Vec<CycleRecord>,
    pub crossing_cycles: Vec<CycleRecord>,
    pub critical_crossing: Vec<CycleRecord>,
    pub sliding_cycles_one_zonal: Vec<CycleRecord>,
    pub sliding_cycles_two_zonal: Vec<CycleRecord>,
    pub sliding_homoclinics: Vec<CycleRecord>,
    /// `(a, b, stable)` of the sliding segment between the two folds.
    pub sliding_segment: Option<(f64, f64, bool)>,
    pub pseudo_saddle: Option<f64>,
    pub boundary: Option<BoundaryValues>,
    /// Quantities that fell inside a tolerance band.
    pub flags: Vec<String>,
}

impl PortraitInventory {
    /// Sorted multiset of `(kind, label)` over all detected objects.
    pub fn census(&self) -> Vec<CensusEntry> {
        let groups = [
            (ObjectKind::StandardCycle, &self.standard_cycles),
            (ObjectKind::GrazingCycle, &self.grazing_cycles),
            (ObjectKind::CrossingCycle, &self.crossing_cycles),
            (ObjectKind::CriticalCrossing, &self.critical_crossing),
            (ObjectKind::SlidingOneZonal, &self.sliding_cycles_one_zonal),
            (ObjectKind::SlidingTwoZonal, &self.sliding_cycles_two_zonal),
            (ObjectKind::SlidingHomoclinic, &self.sliding_homoclinics),
        ];
        let mut out: Vec<CensusEntry> =
            groups.iter().flat_map(|(k, v)| v.iter().map(move |c| (*k, c.stability))).collect();
        out.sort();
        out
    }

    pub fn max_closure(&self) -> f64 {
        [
            &self.standard_cycles,
            &self.grazing_cycles,
            &self.crossing_cycles,
            &self.critical_crossing,
            &self.sliding_cycles_one_zonal,
            &self.sliding_cycles_two_zonal,
            &self.sliding_homoclinics,
        ]
        .iter()
        .flat_map(|v| v.iter().map(|c| c.closure))
        .fold(0.0, f64::max)
    }
}

fn inconsistent(what: &str, detail: String) -> Error {
    Error::InconsistentDetection { detail: format!("{what}: {detail}") }
}

/// Secant iteration on `a ↦ R(a) − a` from the detected point `a0`. Returns the polished
/// point, its closure `|R(a) − a|` and `R'(a)`.
fn polish_fixed_point<F>(mut ret: F, a0: f64, setup: &CycleSetup, what: &str) -> Result<(f64, f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let scale = setup.scale();
    let goal = 0.1 * setup.closure_tol();
    let (mut a, mut r) = (a0, ret(a0)? - a0);
    let mut best = (a, r.abs());
    let mut b = a0 + 1e-8 * scale;
    let mut rb = ret(b)? - b;
    for _ in 0..12 {
        if rb.abs() < best.1 {
            best = (b, rb.abs());
        }
        if best.1 <= goal || rb == r {
            break;
        }
        let next = b - rb * (b - a) / (rb - r);
        if !next.is_finite() || (next - b).abs() <= 1e-15 * scale {
            break;
        }
        (a, r) = (b, rb);
        b = next;
        rb = ret(b)? - b;
    }
    if rb.abs() < best.1 {
        best = (b, rb.abs());
    }
    if (best.0 - a0).abs() > 1e-6 * scale {
        return Err(inconsistent(what, format!("direct return moved the detected point from {a0} to {}", best.0)));
    }
    let mut last = None;
    for h in [1e-6 * scale, 1e-7 * scale, 1e-8 * scale] {
        match (ret(best.0 + h), ret(best.0 - h)) {
            (Ok(up), Ok(down)) => return Ok((best.0, best.1, (up - down) / (2.0 * h))),
            (Err(e), _) | (_, Err(e)) => last = Some(e),
        }
    }
    Err(last.expect("at least one step tried"))
}

/// Horizontal section `y = ±b` through `Π` or its mirror image under the symmetry.
fn section_for(bf: &BetaForm, setup: &CycleSetup, side: Side) -> Section {
    match side {
        Side::Upper => setup.pi(),
        Side::Lower => {
            let a = -2.0 * bf.beta[0] - setup.section.x;
            let w = setup.half_width;
            Section::horizontal(-setup.section.y, (a - w, a + w)).with_normal_sign(-1.0)
        }
    }
}

/// Limit cycle of one side's field through `start`, polished on the return to its section.
/// With `hybrid` the return uses the Filippov flow and must not touch `Σ` transversally.
fn certify_smooth_cycle(bf: &BetaForm, setup: &CycleSetup, start: Point, side: Side, hybrid: bool) -> Result<(Point, f64, f64)> {
    let sec = section_for(bf, setup, side);
    let c = match sec.kind {
        SectionKind::Horizontal(c) => c,
        SectionKind::Vertical(c) => c,
    };
    let (o, budget) = (&setup.opts, setup.t_budget());
    let (_, p0) = hit_section(&bf.sys, start, side, &sec, Direction::Forward, &bf.alpha, o, budget)?;
    let ret = |a: f64| -> Result<f64> {
        let q = Point::new(a, c);
        if !hybrid {
            return hit_section(&bf.sys, q, side, &sec, Direction::Forward, &bf.alpha, o, budget).map(|h| h.1.x);
        }
        let tr = flow_until(&bf.sys, q, None, budget, &bf.alpha, o, Direction::Forward, Some(&sec))?;
        if tr.final_event() != Event::SectionHit || tr.count(Event::BoundaryHit) > 0 || tr.count(Event::SlidingEntry) > 0 {
            return Err(inconsistent(
                "standard cycle",
                format!("integration from {q:?} ended with {} and {} boundary hits", tr.final_event().as_str(), tr.count(Event::BoundaryHit)),
            ));
        }
        Ok(tr.end_point().x)
    };
    let (a, closure, m) = polish_fixed_point(ret, p0.x, setup, "standard cycle")?;
    Ok((Point::new(a, c), closure, m))
}

/// Crossing cycle through `(x, 0)`, polished on one hybrid revolution from its point on `Π`.
fn certify_crossing(bf: &BetaForm, setup: &CycleSetup, x: f64) -> Result<(Point, f64, f64)> {
    let a0 = transition_map(bf, setup, x, MapSide::Plus)?;
    let c = setup.section.y;
    let ret = |a: f64| -> Result<f64> {
        let start = Point::new(a, c);
        let tr = flow_until(&bf.sys, start, None, 3.0 * setup.period, &bf.alpha, &setup.opts, Direction::Forward, Some(&setup.pi()))?;
        if tr.final_event() != Event::SectionHit || tr.count(Event::SlidingEntry) > 0 || tr.count(Event::BoundaryHit) < 2 {
            return Err(inconsistent(
                "crossing cycle",
                format!(
                    "revolution from x = {x} ended with {}, {} crossings, {} sliding entries",
                    tr.final_event().as_str(),
                    tr.count(Event::BoundaryHit),
                    tr.count(Event::SlidingEntry)
                ),
            ));
        }
        Ok(tr.end_point().x)
    };
    let (a, closure, m) = polish_fixed_point(ret, a0, setup, "crossing cycle")?;
    Ok((Point::new(a, c), closure, m))
}

/// Abscissa where the `Z⁺` orbit through `(x, 0)`, followed in `dir`, next reaches `Σ` after
/// passing `Π`.
pub fn landing(bf: &BetaForm, setup: &CycleSetup, x: f64, dir: Direction) -> Result<f64> {
    let sys = &bf.sys;
    let (o, budget) = (&setup.opts, setup.t_budget());
    let (_, on_pi) = hit_section(sys, Point::new(x, 0.0), Side::Upper, &setup.pi(), dir, &bf.alpha, o, budget)?;
    let reach = setup.eps1 + 2.0 * bf.beta[0].abs();
    let sigma = Section::horizontal(0.0, (-reach, reach)).with_normal_sign(-dir.sign());
    let (_, p) = hit_section(sys, on_pi, Side::Upper, &sigma, dir, &bf.alpha, o, budget)?;
    Ok(p.x)
}

/// Defect of the connection from the `Z⁺` fold at `0` to `target` on `Σ`, followed forward
/// for `β₁ > 0` and backward for `β₁ < 0` so that the landing is transversal.
pub fn fold_connection(bf: &BetaForm, setup: &CycleSetup, target: f64) -> Result<f64> {
    let dir = if bf.beta[0] > 0.0 { Direction::Forward } else { Direction::Backward };
    landing(bf, setup, 0.0, dir).map(|x| x - target)
}

/// Distance from `target` to the orbit through the fold, from the abscissa defect and the
/// landing angle.
fn connection_gap(bf: &BetaForm, setup: &CycleSetup, target: f64) -> Result<f64> {
    let d = fold_connection(bf, setup, target)?;
    let v = bf.sys.eval_side(Point::new(target + d, 0.0), Side::Upper, &bf.alpha)?;
    Ok(d.abs() * v[1].abs() / libm::hypot(v[0], v[1]))
}

/// Sliding structure observed by hybrid integration from the fold at `O`.
struct SlidingRun {
    landings: Vec<f64>,
    exits: Vec<f64>,
}

fn sliding_run(bf: &BetaForm, setup: &CycleSetup, dir: Direction) -> Result<SlidingRun> {
    let tr = flow_until(
        &bf.sys,
        Point::ORIGIN,
        Some(ArcKind::Upper),
        3.0 * setup.period,
        &bf.alpha,
        &setup.opts,
        dir,
        None,
    )?;
    let mut landings = Vec::new();
    let mut exits = Vec::new();
    for e in tr.events.iter().skip(1) {
        match e.event {
            Event::SlidingEntry => landings.push(e.p.x),
            Event::FoldExit => exits.push(e.p.x),
            Event::PseudoEquilibrium => exits.push(f64::NAN),
            _ => {}
        }
    }
    Ok(SlidingRun { landings, exits })
}

/// Detects and certifies every object of the portrait at `bf.beta`.
pub fn classify_portrait(bf: &BetaForm, setup: &CycleSetup) -> Result<PortraitInventory> {
    let [b1, b2] = bf.beta;
    let band = setup.zero_band;
    let tol = setup.closure_tol();
    let b1_zero = b1.abs() <= setup.beta_band;
    let b2_zero = b2.abs() <= setup.beta_band;
    let mut inv = PortraitInventory { beta: bf.beta, ..Default::default() };

    if !b1_zero {
        let (a, b) = if b1 > 0.0 { (-2.0 * b1, 0.0) } else { (0.0, -2.0 * b1) };
        let stable = b1 > 0.0;
        let seg = boundary::classify_point(&bf.sys, 0.5 * (a + b) + 0.25 * (b - a), &bf.alpha)?;
        let observed_stable = seg.kind == boundary::BoundaryKind::SlidingStable;
        if observed_stable != stable {
            return Err(inconsistent("sliding segment", format!("expected stable = {stable}, found {:?}", seg.kind)));
        }
        inv.sliding_segment = Some((a, b, stable));
        let pe = boundary::pseudo_equilibria(&bf.sys, a, b, &bf.alpha)?;
        inv.pseudo_saddle = pe.iter().find(|p| p.kind == boundary::PseudoKind::PseudoSaddle).map(|p| p.x);
    }

    // Standard or grazing cycles.
    let sym = |p: Point| Point::new(-2.0 * b1 - p.x, -p.y);
    if b2_zero || b2 > 0.0 {
        let up = Point::new(0.0, b2);
        let (p_up, c_up, m_up) = certify_smooth_cycle(bf, setup, up, Side::Upper, !b2_zero)?;
        let (p_lo, c_lo, m_lo) = certify_smooth_cycle(bf, setup, sym(up), Side::Lower, !b2_zero)?;
        if c_up.max(c_lo) > tol {
            return Err(inconsistent("standard cycle", format!("closure {} exceeds {tol}", c_up.max(c_lo))));
        }
        if m_up.abs().max(m_lo.abs()) >= 1.0 {
            return Err(inconsistent("standard cycle", format!("return multipliers {m_up}, {m_lo} not contracting")));
        }
        let label = if !b2_zero || b1_zero {
            Stability::Stable
        } else {
            Stability::InternallyStable
        };
        let target = if b2_zero { &mut inv.grazing_cycles } else { &mut inv.standard_cycles };
        target.push(CycleRecord { stability: Some(label), point: p_up, closure: c_up, multiplier: Some(m_up) });
        target.push(CycleRecord { stability: Some(label), point: p_lo, closure: c_lo, multiplier: Some(m_lo) });
    }

    // Crossing cycles.
    let samples = scan_displacement(bf, setup)?;
    for r in crossing_cycles_from_scan(bf, setup, &samples)? {
        let (p, c, m) = certify_crossing(bf, setup, r.x)?;
        if r.multiplicity == 1 && (m.abs() < 1.0) != (r.stability == Stability::Stable) {
            return Err(inconsistent("crossing cycle", format!("D' = {} at x = {} but return multiplier {m}", r.derivative, r.x)));
        }
        if c > tol {
            return Err(inconsistent("crossing cycle", format!("closure {c} at x = {} exceeds {tol}", r.x)));
        }
        inv.crossing_cycles.push(CycleRecord { stability: Some(r.stability), point: p, closure: c, multiplier: Some(m) });
    }
    if b1_zero {
        if b2_zero {
            inv.flags.push("fold-fold with grazing loop".into());
        }
        return Ok(inv);
    }

    let bv = boundary_functions(bf, setup)?;
    inv.boundary = Some(bv);
    let lo = bf.domain_start();

    // Critical crossing cycle through a fold.
    if bv.d_left.abs() <= band {
        inv.flags.push(format!("D at left end within band: {:.3e}", bv.d_left));
        let h = diff_step(setup);
        let right = (displacement_value(bf, setup, lo + h)? - bv.d_left) / h;
        let label = if right < 0.0 { Stability::ExternallyStable } else { Stability::ExternallyUnstable };
        // The orbit through the fold at 0 must connect to the partner fold.
        let partner = -2.0 * b1;
        let c = connection_gap(bf, setup, partner)?;
        if c > tol {
            return Err(inconsistent("critical crossing", format!("fold connection to {partner} misses by {c}")));
        }
        inv.critical_crossing.push(CycleRecord { stability: Some(label), point: Point::new(lo, 0.0), closure: c, multiplier: None });
    }

    // Sliding cycles and homoclinics.
    let (active, dir, g, stable) = if b1 > 0.0 && b2 < 0.0 && !b2_zero {
        (true, Direction::Forward, bv.q, true)
    } else if b1 < 0.0 && b2 > 0.0 && !b2_zero {
        (true, Direction::Backward, -bv.p, false)
    } else {
        (false, Direction::Forward, 0.0, false)
    };
    if !active {
        return Ok(inv);
    }
    let label = if stable { Stability::Stable } else { Stability::Unstable };
    let run = sliding_run(bf, setup, dir)?;
    let saddle = -b1;
    let first = run.landings.first().copied();
    let scale = setup.scale();
    if g.abs() <= band {
        inv.flags.push(format!("homoclinic function within band: {g:.3e}"));
        let land = first.ok_or_else(|| inconsistent("sliding homoclinic", "orbit from O never reached the sliding segment".into()))?;
        if (land - saddle).abs() > 1e-6 * scale {
            return Err(inconsistent("sliding homoclinic", format!("landing {land} far from pseudo-saddle {saddle}")));
        }
        let c = connection_gap(bf, setup, saddle)?;
        if c > tol {
            return Err(inconsistent("sliding homoclinic", format!("fold connection to {saddle} misses by {c}")));
        }
        let o = Point::ORIGIN;
        inv.sliding_homoclinics.push(CycleRecord { stability: None, point: o, closure: c, multiplier: None });
        inv.sliding_homoclinics.push(CycleRecord { stability: None, point: sym(o), closure: c, multiplier: None });
        return Ok(inv);
    }
    let near = |x: f64, target: f64| (x - target).abs() <= 1e-6 * scale;
    // g < 0: one-zonal; g > 0 with D at the left end of the right sign: two-zonal.
    let one_zonal = g < 0.0;
    let two_zonal = !one_zonal && if stable { bv.d_left < -band } else { bv.d_left > band };
    let observed = match (first, run.exits.first(), run.exits.get(1)) {
        (Some(_), Some(&e0), _) if near(e0, 0.0) => Some((1, e0.abs())),
        (Some(_), Some(&e0), Some(&e1)) if near(e0, -2.0 * b1) && near(e1, 0.0) => Some((2, e1.abs())),
        _ => None,
    };
    match (one_zonal, two_zonal, observed) {
        (true, _, Some((1, c))) => {
            let o = Point::ORIGIN;
            inv.sliding_cycles_one_zonal.push(CycleRecord { stability: Some(label), point: o, closure: c, multiplier: None });
            inv.sliding_cycles_one_zonal.push(CycleRecord { stability: Some(label), point: sym(o), closure: c, multiplier: None });
        }
        (false, true, Some((2, c))) => {
            inv.sliding_cycles_two_zonal.push(CycleRecord { stability: Some(label), point: Point::ORIGIN, closure: c, multiplier: None });
        }
        (false, false, _) => {}
        (one, two, obs) => {
            return Err(inconsistent(
                "sliding cycle",
                format!(
                    "sign logic one-zonal = {one}, two-zonal = {two}; integration landings {:?}, exits {:?}, pattern {obs:?}",
                    run.landings, run.exits
                ),
            ))
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ALPHA0;
    use crate::models::{circle_system, thompson_hunt};
    use crate::variational::grazing_cycle;

    #[test]
    fn circle_fold_offset() {
        let s = circle_system();
        assert!(fold_offset(&s, &ALPHA0).unwrap().abs() < 1e-15);
        let a1 = 0.01;
        let exact = (-1.0 + libm::sqrt(1.0 - 4.0 * a1)) / 2.0;
        assert!((fold_offset(&s, &[a1, 0.0]).unwrap() - exact).abs() < 1e-13);
    }

    #[test]
    fn circle_cycle_offset_matches_geometry() {
        let s = circle_system();
        let setup = CycleSetup::for_offsets(0.5, 2.0 * core::f64::consts::PI, &IntegratorOptions::strict());
        for d in [0.01, -0.02] {
            let off = cycle_offset(&s, &[0.0, d], &setup).unwrap();
            let xf = fold_offset(&s, &[0.0, d]).unwrap();
            let exact = 1.0 + d - libm::sqrt(1.0 - xf * xf);
            assert!((off - exact).abs() < 1e-10, "{off} vs {exact}");
        }
    }

    #[test]
    fn thompson_hunt_displacement_near_fold_fold() {
        let o = IntegratorOptions::strict();
        let s = thompson_hunt(-1.0, 0.281246770728896);
        let gcd = grazing_cycle(&s, &o, 0.25).unwrap();
        let mut setup = CycleSetup::new(&gcd, &o);
        setup.adapt_eps1(&s).unwrap();
        let bf = BetaForm::at(&s, ALPHA0, [0.0, 0.0]);
        assert!(displacement_value(&bf, &setup, 0.0).unwrap().abs() <= setup.zero_band);
        let x = 0.02;
        let d = displacement_value(&bf, &setup, x).unwrap();
        assert!(d < 0.0);
        let d2 = displacement_value(&bf, &setup, 2.0 * x).unwrap();
        assert!((d2 / d - 4.0).abs() < 0.3, "quadratic growth ratio {}", d2 / d);
        assert!(crossing_cycles(&bf, &setup).unwrap().is_empty());
    }

    #[test]
    fn stability_orientation() {
        assert_eq!(Stability::from_slope(-1.0), Stability::Stable);
        assert_eq!(Stability::from_slope(0.5), Stability::Unstable);
    }

    #[test]
    fn secant_polish_reaches_fixed_point() {
        let setup = CycleSetup::for_offsets(1.0, 1.0, &IntegratorOptions::strict());
        let (a, c, m) = polish_fixed_point(|a| Ok(0.5 * a + 0.25), 0.5 + 1e-9, &setup, "test").unwrap();
        assert!((a - 0.5).abs() < 1e-13 && c < 1e-13 && (m - 0.5).abs() < 1e-9);
    }
}

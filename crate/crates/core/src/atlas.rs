//! The `α ↔ β` reparameterisation, boundary tracing, coefficient fits and the assembled diagram.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::cycles::{
    boundary_functions, classify_portrait, BETA1_WINDOW, cycle_offset_from, displacement_value, fold_offset, BetaForm,
    fold_connection, CensusEntry, CycleSetup, ObjectKind, PortraitInventory, Stability,
};
use crate::error::{Error, Result};
use crate::field::{FilippovSystem, Params};
use crate::integrate::rk::IntegratorOptions;
use crate::roots::{brent_minimize, brent_with_values};
use crate::variational::{beta_jacobian, grazing_cycle, quantities, GrazingCycleData, IntrinsicQuantities};

/// Everything fixed by the unperturbed system: its grazing cycle, intrinsic quantities,
/// the linearised reparameterisation and the map geometry.
#[derive(Debug, Clone)]
pub struct Unfolding {
    pub sys: FilippovSystem,
    pub cycle: GrazingCycleData,
    pub quantities: IntrinsicQuantities,
    /// `∂β/∂α` at `α = 0`.
    pub jacobian: [[f64; 2]; 2],
    pub setup: CycleSetup,
}

impl Unfolding {
    pub fn new(sys: &FilippovSystem, opts: &IntegratorOptions, section_phase: f64) -> Result<Self> {
        let cycle = grazing_cycle(sys, opts, section_phase)?;
        let q = quantities(sys, &cycle, opts)?;
        let jacobian = beta_jacobian(&q)?;
        let mut setup = CycleSetup::new(&cycle, opts);
        setup.adapt_eps1(sys)?;
        Ok(Unfolding { sys: sys.clone(), cycle, quantities: q, jacobian, setup })
    }

    /// `λ(0) < 1` is required by the diagram.
    pub fn require_stable(&self) -> Result<()> {
        let l = self.quantities.lambda0;
        if l < 1.0 {
            Ok(())
        } else {
            Err(Error::HyperbolicityViolated { lambda0: l })
        }
    }

    fn jacobian_inverse(&self) -> Result<[[f64; 2]; 2]> {
        inverse(self.jacobian)
    }
}

fn inverse(m: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    if det.abs() <= 1e-12 * scale * scale {
        return Err(Error::IllConditioned { detail: "singular reparameterisation Jacobian" });
    }
    Ok([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

fn mat_vec(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// `β = (φ₁(α), φ₂(α))`, with the linear prediction as Newton seed for `φ₂`.
pub fn beta_of_alpha(unf: &Unfolding, alpha: &Params) -> Result<[f64; 2]> {
    let b1 = fold_offset(&unf.sys, alpha)?;
    let seed = mat_vec(&unf.jacobian, *alpha)[1];
    let b2 = cycle_offset_from(&unf.sys, alpha, &unf.setup, seed)?;
    Ok([b1, b2])
}

/// The system at `α` translated to β-form, with `β = φ(α)`.
pub fn to_beta_form(unf: &Unfolding, alpha: &Params) -> Result<BetaForm> {
    let beta = beta_of_alpha(unf, alpha)?;
    Ok(BetaForm::at(&unf.sys, *alpha, beta))
}

/// Inverts `α ↦ φ(α)` by Broyden iteration seeded with the linearisation.
pub fn beta_to_alpha(unf: &Unfolding, target: [f64; 2]) -> Result<Params> {
    beta_to_alpha_from(unf, target, None)
}

/// As [`beta_to_alpha`] with an optional starting point for continuation.
///
/// Iterates toward `ε_int · scale` and accepts anything within `1e-10 · scale` once progress stalls.
pub fn beta_to_alpha_from(unf: &Unfolding, target: [f64; 2], start: Option<Params>) -> Result<Params> {
    const MAX_ITER: usize = 50;
    let mut h = unf.jacobian_inverse()?;
    let mut alpha = start.unwrap_or_else(|| mat_vec(&h, target));
    let scale = unf.setup.scale().max(1.0);
    let (goal, accept) = (unf.setup.opts.eps_int() * scale, 1e-10 * scale);
    let resid = |a: &Params| -> Result<[f64; 2]> {
        let b = beta_of_alpha(unf, a)?;
        Ok([b[0] - target[0], b[1] - target[1]])
    };
    let norm = |r: &[f64; 2]| r[0].abs().max(r[1].abs());
    let mut r = resid(&alpha)?;
    let mut best = (alpha, norm(&r));
    let mut stall = 0;
    for _ in 0..MAX_ITER {
        if best.1 <= goal || (stall >= 3 && best.1 <= accept) {
            return Ok(best.0);
        }
        let step = mat_vec(&h, r);
        let next = [alpha[0] - step[0], alpha[1] - step[1]];
        let rn = resid(&next)?;
        let s = [next[0] - alpha[0], next[1] - alpha[1]];
        let y = [rn[0] - r[0], rn[1] - r[1]];
        let hy = mat_vec(&h, y);
        let den = s[0] * hy[0] + s[1] * hy[1];
        if den.abs() > 1e-300 {
            let u = [s[0] - hy[0], s[1] - hy[1]];
            let sh = [s[0] * h[0][0] + s[1] * h[1][0], s[0] * h[0][1] + s[1] * h[1][1]];
            for i in 0..2 {
                for j in 0..2 {
                    h[i][j] += u[i] * sh[j] / den;
                }
            }
        }
        alpha = next;
        r = rn;
        if norm(&r) < best.1 {
            best = (alpha, norm(&r));
            stall = 0;
        } else {
            stall += 1;
        }
    }
    if best.1 <= accept {
        return Ok(best.0);
    }
    Err(Error::NoConvergence { what: "beta to alpha", iterations: MAX_ITER })
}

/// β-form at a target `β`; the stored `β` is the one actually reached.
pub fn beta_form_at(unf: &Unfolding, target: [f64; 2], start: Option<Params>) -> Result<BetaForm> {
    let alpha = beta_to_alpha_from(unf, target, start)?;
    to_beta_form(unf, &alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CurveKind {
    Psi1,
    Psi2,
    Psi3,
    Psi4,
    Psi5,
    Beta1Axis,
    Beta2Axis,
}

impl CurveKind {
    pub const PSI: [CurveKind; 5] = [CurveKind::Psi1, CurveKind::Psi2, CurveKind::Psi3, CurveKind::Psi4, CurveKind::Psi5];

    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::Psi1 => "psi1",
            CurveKind::Psi2 => "psi2",
            CurveKind::Psi3 => "psi3",
            CurveKind::Psi4 => "psi4",
            CurveKind::Psi5 => "psi5",
            CurveKind::Beta1Axis => "beta1_axis",
            CurveKind::Beta2Axis => "beta2_axis",
        }
    }

    /// Sign of `β₁` on which the curve lives.
    pub fn side(self) -> f64 {
        match self {
            CurveKind::Psi1 | CurveKind::Psi2 | CurveKind::Psi4 => -1.0,
            _ => 1.0,
        }
    }
}

/// Quadratic coefficients `c` in `β₂ ≈ c β₁²` predicted from origin data and `λ(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictedCoefficients {
    pub c: [f64; 5],
}

impl PredictedCoefficients {
    pub fn get(&self, kind: CurveKind) -> Option<f64> {
        let i = CurveKind::PSI.iter().position(|k| *k == kind)?;
        Some(self.c[i])
    }
}

pub fn predicted_coefficients(q: &IntrinsicQuantities) -> PredictedCoefficients {
    predicted_from(q.lambda0, q.origin.gx0, q.origin.f0)
}

pub fn predicted_from(l: f64, gx: f64, f: f64) -> PredictedCoefficients {
    let m = l - 1.0;
    PredictedCoefficients {
        c: [
            2.0 * l * gx / (m * m * f),
            -2.0 * l * gx / (m * f),
            2.0 * gx / (m * f),
            -l * gx / (2.0 * m * f),
            gx / (2.0 * m * f),
        ],
    }
}

/// Quadratic fit of a traced curve.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuadraticFit {
    /// `c` in `β₂ ≈ c β₁²`, by least squares on relative residuals.
    pub coeff: f64,
    /// Root-mean-square relative residual of that fit.
    pub residual: f64,
    /// Linear term `l` of the fit `β₂ ≈ l β₁ + c β₁² + d β₁³`.
    pub linear: f64,
    pub max_abs_beta1: f64,
    pub used: usize,
}

impl QuadraticFit {
    /// `|l| ≤ 1e-3 · |c| · max|β₁|`.
    pub fn is_tangent(&self) -> bool {
        self.linear.abs() <= 1e-3 * self.coeff.abs() * self.max_abs_beta1
    }
}

/// Fits the innermost samples spanning one decade of `|β₁|` (at least six).
pub fn fit_quadratic(samples: &[(f64, f64)]) -> Result<QuadraticFit> {
    let mut pts: Vec<(f64, f64)> = samples.iter().copied().filter(|(b1, b2)| *b1 != 0.0 && b1.is_finite() && b2.is_finite()).collect();
    pts.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    if pts.len() < 6 {
        return Err(Error::IllConditioned { detail: "fewer than six samples" });
    }
    let m = pts[0].0.abs();
    let in_decade = pts.iter().take_while(|(b1, _)| b1.abs() <= 10.0 * m * (1.0 + 1e-9)).count();
    let used = in_decade.max(6);
    let pts = &pts[..used];
    let top = pts[used - 1].0.abs();
    if top < 9.99 * m {
        return Err(Error::IllConditioned { detail: "samples do not span a decade of |beta1|" });
    }
    let ratios: Vec<f64> = pts.iter().map(|(b1, b2)| b2 / (b1 * b1)).collect();
    let coeff = ratios.iter().sum::<f64>() / used as f64;
    let residual = libm::sqrt(ratios.iter().map(|r| { let d = r / coeff - 1.0; d * d }).sum::<f64>() / used as f64);
    // r = l/β₁ + c + d β₁ by normal equations.
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for ((b1, _), r) in pts.iter().zip(&ratios) {
        let row = [1.0 / b1, 1.0, *b1];
        for i in 0..3 {
            atb[i] += row[i] * r;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let sol = solve3(ata, atb).ok_or(Error::IllConditioned { detail: "singular normal equations" })?;
    Ok(QuadraticFit { coeff, residual, linear: sol[0], max_abs_beta1: top, used })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let p = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c] == 0.0 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..3 {
            let f = a[r][c] / a[c][c];
            let pivot = a[c];
            for (x, y) in a[r][c..].iter_mut().zip(&pivot[c..]) {
                *x -= f * y;
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 3];
    for c in (0..3).rev() {
        let s: f64 = (c + 1..3).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    Some(x)
}

/// Log-spaced `β₁` magnitudes in `[lo, hi] · scale`, signed by `side`.
pub fn beta1_grid(lo: f64, hi: f64, n: usize, scale: f64, side: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let s = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
            side * scale * lo * libm::pow(hi / lo, s)
        })
        .collect()
}

/// Largest `D(x; β)` over `I°`, located near the expected double root.
pub fn max_displacement(bf: &BetaForm, setup: &CycleSetup) -> Result<(f64, f64)> {
    let lo = bf.domain_start();
    let reach = (30.0 * bf.beta[0].abs()).max(1e-6 * setup.scale());
    let hi = (lo + reach).min(setup.eps1);
    let n = 40;
    let mut best = (lo, f64::NEG_INFINITY);
    let mut grid = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let x = lo + (hi - lo) * k as f64 / n as f64;
        let d = displacement_value(bf, setup, x)?;
        grid.push(x);
        if d > best.1 {
            best = (x, d);
        }
    }
    let k = grid.iter().position(|x| *x == best.0).unwrap_or(0);
    let a = grid[k.saturating_sub(1)];
    let b = grid[(k + 1).min(n)];
    if a == b {
        return Ok(best);
    }
    let (x, neg) = brent_minimize(|x| displacement_value(bf, setup, x).map(|v| -v), a, b, 1e-13 * setup.scale(), 200)?;
    Ok((x, -neg))
}

/// Defining scalar of a boundary at a β-form point; changes sign across the curve.
pub fn event_value(kind: CurveKind, bf: &BetaForm, setup: &CycleSetup) -> Result<f64> {
    match kind {
        CurveKind::Psi1 => max_displacement(bf, setup).map(|m| m.1),
        CurveKind::Psi2 => displacement_value(bf, setup, -2.0 * bf.beta[0]),
        CurveKind::Psi3 => displacement_value(bf, setup, 0.0),
        CurveKind::Psi4 => boundary_functions(bf, setup).map(|v| v.p),
        CurveKind::Psi5 => boundary_functions(bf, setup).map(|v| v.q),
        CurveKind::Beta1Axis | CurveKind::Beta2Axis => Ok(bf.beta[1]),
    }
}

/// Residual of a connection curve measured by direct integration from the `Z⁺` fold.
/// `None` for `ψ₁` and the axes.
pub fn landing_residual(kind: CurveKind, bf: &BetaForm, setup: &CycleSetup) -> Option<Result<f64>> {
    let b1 = bf.beta[0];
    let target = match kind {
        CurveKind::Psi2 | CurveKind::Psi3 => -2.0 * b1,
        CurveKind::Psi4 | CurveKind::Psi5 => -b1,
        _ => return None,
    };
    Some(fold_connection(bf, setup, target))
}

/// One traced point: `β₂` on the curve, with the `α` reached.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TracedPoint {
    pub beta1: f64,
    pub beta2: f64,
    pub alpha: Params,
    pub event_residual: f64,
}

/// Brent search in `β₂` for the curve at fixed `β₁`, bracketing around the predicted value.
pub fn trace_point(unf: &Unfolding, kind: CurveKind, beta1: f64) -> Result<TracedPoint> {
    if beta1 * kind.side() <= 0.0 {
        return Err(Error::InvalidInput { detail: format!("{} needs beta1 with sign {}", kind.as_str(), kind.side()) });
    }
    let c = predicted_coefficients(&unf.quantities).get(kind).unwrap_or(0.0);
    let guess = c * beta1 * beta1;
    let setup = &unf.setup;
    let mut last_alpha: Option<Params> = None;
    let mut eval = |b2: f64| -> Result<f64> {
        let bf = beta_form_at(unf, [beta1, b2], last_alpha)?;
        last_alpha = Some(bf.alpha);
        event_value(kind, &bf, setup)
    };
    for (lo_f, hi_f) in [(0.7, 1.3), (0.4, 1.8), (0.1, 3.0)] {
        let (a, b) = (guess * lo_f, guess * hi_f);
        let fa = eval(a)?;
        let fb = eval(b)?;
        if fa * fb <= 0.0 {
            let b2 = brent_with_values(&mut eval, a, fa, b, fb, 1e-12 * guess.abs(), 0.0, 200)?;
            let bf = beta_form_at(unf, [beta1, b2], last_alpha)?;
            let point = refine_on_landing(unf, kind, beta1, b2, &bf)?;
            return Ok(point.unwrap_or(TracedPoint {
                beta1,
                beta2: bf.beta[1],
                alpha: bf.alpha,
                event_residual: event_value(kind, &bf, setup)?,
            }));
        }
    }
    Err(Error::EventNotBracketed { beta1 })
}

/// Secant in `β₂` on the forward landing residual, started at the displacement root.
fn refine_on_landing(unf: &Unfolding, kind: CurveKind, beta1: f64, b2: f64, bf: &BetaForm) -> Result<Option<TracedPoint>> {
    let setup = &unf.setup;
    let Some(r0) = landing_residual(kind, bf, setup) else { return Ok(None) };
    let Ok(r0) = r0 else { return Ok(None) };
    let goal = 0.1 * setup.closure_tol();
    let mut best = TracedPoint { beta1, beta2: bf.beta[1], alpha: bf.alpha, event_residual: r0 };
    let (mut x0, mut f0) = (b2, r0);
    let mut x1 = b2 * (1.0 + 1e-5);
    let mut hint = bf.alpha;
    for _ in 0..10 {
        let Ok(bf1) = beta_form_at(unf, [beta1, x1], Some(hint)) else { break };
        let Some(Ok(f1)) = landing_residual(kind, &bf1, setup) else { break };
        hint = bf1.alpha;
        if f1.abs() < best.event_residual.abs() {
            best = TracedPoint { beta1, beta2: bf1.beta[1], alpha: bf1.alpha, event_residual: f1 };
        }
        if best.event_residual.abs() <= goal || f1 == f0 {
            break;
        }
        let next = x1 - f1 * (x1 - x0) / (f1 - f0);
        if !next.is_finite() || (next - b2).abs() > 1e-3 * b2.abs() {
            break;
        }
        (x0, f0) = (x1, f1);
        x1 = next;
    }
    Ok(Some(best))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryCurve {
    pub kind: CurveKind,
    pub samples: Vec<TracedPoint>,
    /// Grid points where the event was not bracketed, with the reason.
    pub skipped: Vec<(f64, String)>,
    pub fit: Option<QuadraticFit>,
    pub fitted_coeff: Option<f64>,
    pub predicted_coeff: f64,
}

impl BoundaryCurve {
    /// Relative gap between the fitted and predicted coefficients.
    pub fn coefficient_error(&self) -> Option<f64> {
        self.fitted_coeff.map(|c| ((c - self.predicted_coeff) / self.predicted_coeff).abs())
    }

    pub fn beta2_at(&self, beta1: f64) -> Option<f64> {
        self.samples.iter().find(|s| s.beta1 == beta1).map(|s| s.beta2)
    }
}

/// Collects per-point results into a curve with its fit.
pub fn assemble_curve(unf: &Unfolding, kind: CurveKind, points: Vec<(f64, Result<TracedPoint>)>) -> BoundaryCurve {
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for (b1, r) in points {
        match r {
            Ok(p) => samples.push(p),
            Err(e) => skipped.push((b1, format!("{e}"))),
        }
    }
    samples.sort_by(|a, b| a.beta1.abs().total_cmp(&b.beta1.abs()));
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.beta1, s.beta2)).collect();
    let fit = fit_quadratic(&pairs).ok();
    let predicted_coeff = predicted_coefficients(&unf.quantities).get(kind).unwrap_or(f64::NAN);
    BoundaryCurve { kind, samples, skipped, fitted_coeff: fit.map(|f| f.coeff), fit, predicted_coeff }
}

/// Traces one curve sequentially over a `β₁` grid.
pub fn trace_boundary(unf: &Unfolding, kind: CurveKind, grid: &[f64]) -> BoundaryCurve {
    let pts = grid.iter().map(|&b1| (b1, trace_point(unf, kind, b1))).collect();
    assemble_curve(unf, kind, pts)
}

/// Strict ordering `ψ₁ > ψ₂ > ψ₄ > 0` and `ψ₃ < ψ₅ < 0` at every common grid point.
pub fn ordering_violations(curves: &[BoundaryCurve]) -> Vec<String> {
    let get = |k: CurveKind| curves.iter().find(|c| c.kind == k);
    let mut out = Vec::new();
    if let (Some(c1), Some(c2), Some(c4)) = (get(CurveKind::Psi1), get(CurveKind::Psi2), get(CurveKind::Psi4)) {
        for s in &c1.samples {
            if let (Some(v2), Some(v4)) = (c2.beta2_at(s.beta1), c4.beta2_at(s.beta1)) {
                if !(s.beta2 > v2 && v2 > v4 && v4 > 0.0) {
                    out.push(format!("beta1 = {:e}: psi1 {:e}, psi2 {v2:e}, psi4 {v4:e}", s.beta1, s.beta2));
                }
            }
        }
    }
    if let (Some(c3), Some(c5)) = (get(CurveKind::Psi3), get(CurveKind::Psi5)) {
        for s in &c3.samples {
            if let Some(v5) = c5.beta2_at(s.beta1) {
                if !(s.beta2 < v5 && v5 < 0.0) {
                    out.push(format!("beta1 = {:e}: psi3 {:e}, psi5 {v5:e}", s.beta1, s.beta2));
                }
            }
        }
    }
    out
}

/// Open regions of the diagram.
pub const OPEN_REGIONS: [&str; 9] = ["3a", "3c", "3e", "3g", "4a", "4c", "4e", "4g", "4i"];

/// Curve, axis and origin cases.
pub const CURVE_CASES: [&str; 10] = ["1", "2a", "2b", "3b", "3d", "3f", "4b", "4d", "4f", "4h"];

/// Expected census for a case label.
pub fn expected_census(label: &str) -> Option<Vec<CensusEntry>> {
    use ObjectKind::*;
    use Stability::*;
    let std2 = [(StandardCycle, Some(Stable)), (StandardCycle, Some(Stable))];
    let cross = (CrossingCycle, Some(Stable));
    let mut v: Vec<CensusEntry> = match label {
        "1" => vec![(GrazingCycle, Some(Stable)), (GrazingCycle, Some(Stable))],
        "2a" | "3a" | "4a" => std2.to_vec(),
        "2b" | "3g" | "4i" => vec![cross],
        "3b" => vec![(GrazingCycle, Some(InternallyStable)), (GrazingCycle, Some(InternallyStable))],
        "3c" => vec![(SlidingOneZonal, Some(Stable)), (SlidingOneZonal, Some(Stable))],
        "3d" => vec![(SlidingHomoclinic, None), (SlidingHomoclinic, None)],
        "3e" => vec![(SlidingTwoZonal, Some(Stable))],
        "3f" => vec![(CriticalCrossing, Some(ExternallyStable))],
        "4b" => [&std2[..], &[(CrossingCycle, Some(MultiplicityTwo))]].concat(),
        "4c" => [&std2[..], &[cross, (CrossingCycle, Some(Unstable))]].concat(),
        "4d" => [&std2[..], &[cross, (CriticalCrossing, Some(ExternallyUnstable))]].concat(),
        "4e" => [&std2[..], &[cross, (SlidingTwoZonal, Some(Unstable))]].concat(),
        "4f" => [&std2[..], &[cross, (SlidingHomoclinic, None), (SlidingHomoclinic, None)]].concat(),
        "4g" => [&std2[..], &[cross, (SlidingOneZonal, Some(Unstable)), (SlidingOneZonal, Some(Unstable))]].concat(),
        "4h" => vec![(GrazingCycle, Some(InternallyStable)), (GrazingCycle, Some(InternallyStable)), cross],
        _ => return None,
    };
    v.sort();
    Some(v)
}

/// A sampled parameter point with its expected label.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegionCase {
    pub label: String,
    pub beta: [f64; 2],
    /// Parameters of a traced curve point, used as is instead of inverting `β`.
    pub alpha: Option<Params>,
}

/// Sample points: one per open region at the middle of the grid, plus curve and axis cases.
///
/// Inside a region the sample is the geometric mean of the adjacent curve values; where a
/// region is unbounded on one side the nearest curve value is doubled or halved.
pub fn region_cases(curves: &[BoundaryCurve], neg_grid: &[f64], pos_grid: &[f64]) -> Vec<RegionCase> {
    let curve = |k: CurveKind| curves.iter().find(|c| c.kind == k);
    let mid = |g: &[f64]| g.get(g.len() / 2).copied();
    let mut out = Vec::new();
    let mut push = |label: &str, beta: [f64; 2], hint: Option<Params>| {
        out.push(RegionCase { label: label.into(), beta, alpha: hint })
    };
    let at = |k: CurveKind, b1: f64| curve(k).and_then(|c| c.samples.iter().find(|s| s.beta1 == b1).copied());
    if let Some(b1) = mid(neg_grid) {
        if let (Some(p1), Some(p2), Some(p4)) = (at(CurveKind::Psi1, b1), at(CurveKind::Psi2, b1), at(CurveKind::Psi4, b1)) {
            let (v1, v2, v4) = (p1.beta2, p2.beta2, p4.beta2);
            push("4a", [b1, 2.0 * v1], None);
            push("4b", [b1, v1], Some(p1.alpha));
            push("4c", [b1, libm::sqrt(v1 * v2)], None);
            push("4d", [b1, v2], Some(p2.alpha));
            push("4e", [b1, libm::sqrt(v2 * v4)], None);
            push("4f", [b1, v4], Some(p4.alpha));
            push("4g", [b1, 0.5 * v4], None);
            push("4h", [b1, 0.0], None);
            push("4i", [b1, -v4], None);
        }
    }
    if let Some(b1) = mid(pos_grid) {
        if let (Some(p3), Some(p5)) = (at(CurveKind::Psi3, b1), at(CurveKind::Psi5, b1)) {
            let (v3, v5) = (p3.beta2, p5.beta2);
            push("3a", [b1, -v5], None);
            push("3b", [b1, 0.0], None);
            push("3c", [b1, 0.5 * v5], None);
            push("3d", [b1, v5], Some(p5.alpha));
            push("3e", [b1, -libm::sqrt(v3 * v5)], None);
            push("3f", [b1, v3], Some(p3.alpha));
            push("3g", [b1, 2.0 * v3], None);
            push("2a", [0.0, -v5], None);
            push("2b", [0.0, v5], None);
        }
    }
    push("1", [0.0, 0.0], Some([0.0, 0.0]));
    out
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegionResult {
    pub case: RegionCase,
    pub alpha: Params,
    pub inventory: Option<PortraitInventory>,
    pub error: Option<String>,
    pub expected: Vec<CensusEntry>,
    pub observed: Vec<CensusEntry>,
    pub matches: bool,
}

/// Classifies one case and compares with its expected census.
pub fn classify_case(unf: &Unfolding, case: &RegionCase) -> RegionResult {
    let expected = expected_census(&case.label).unwrap_or_default();
    let run = || -> Result<(Params, PortraitInventory)> {
        let bf = match case.alpha {
            Some(a) => to_beta_form(unf, &a)?,
            None => beta_form_at(unf, case.beta, None)?,
        };
        let inv = classify_portrait(&bf, &unf.setup)?;
        Ok((bf.alpha, inv))
    };
    match run() {
        Ok((alpha, inv)) => {
            let observed = inv.census();
            let matches = observed == expected;
            RegionResult { case: case.clone(), alpha, inventory: Some(inv), error: None, expected, observed, matches }
        }
        Err(e) => RegionResult {
            case: case.clone(),
            alpha: [f64::NAN; 2],
            inventory: None,
            error: Some(format!("{e}")),
            expected,
            observed: Vec::new(),
            matches: false,
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BifurcationDiagram {
    pub curves: Vec<BoundaryCurve>,
    pub regions: Vec<RegionResult>,
    pub ordering_violations: Vec<String>,
}

impl BifurcationDiagram {
    /// `RegionMismatch` listing every case whose census differs from the expected one.
    pub fn check(&self) -> Result<()> {
        let bad: Vec<String> = self
            .regions
            .iter()
            .filter(|r| !r.matches)
            .map(|r| match &r.error {
                Some(e) => format!("{}: {e}", r.case.label),
                None => format!("{}: expected {:?}, observed {:?}", r.case.label, r.expected, r.observed),
            })
            .collect();
        if bad.is_empty() && self.ordering_violations.is_empty() {
            Ok(())
        } else {
            let mut all = bad;
            all.extend(self.ordering_violations.iter().cloned());
            Err(Error::RegionMismatch { detail: all.join("; ") })
        }
    }
}

/// Default grids: 12 log-spaced `|β₁|` in `[1e-3, 1e-2]` times the cycle diameter.
pub fn default_grids(unf: &Unfolding) -> (Vec<f64>, Vec<f64>) {
    let s = unf.setup.scale();
    (beta1_grid(1e-3, BETA1_WINDOW, 12, s, -1.0), beta1_grid(1e-3, BETA1_WINDOW, 12, s, 1.0))
}

/// Sequential assembly of the full diagram.
pub fn build_diagram(unf: &Unfolding, neg_grid: &[f64], pos_grid: &[f64]) -> Result<BifurcationDiagram> {
    unf.require_stable()?;
    let curves: Vec<BoundaryCurve> = CurveKind::PSI
        .iter()
        .map(|&k| trace_boundary(unf, k, if k.side() < 0.0 { neg_grid } else { pos_grid }))
        .collect();
    let regions = region_cases(&curves, neg_grid, pos_grid).iter().map(|c| classify_case(unf, c)).collect();
    let ordering_violations = ordering_violations(&curves);
    Ok(BifurcationDiagram { curves, regions, ordering_violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients_for_unit_origin_data() {
        let c = predicted_from(0.2, 1.0, 1.0).c;
        let want = [0.625, 0.5, -2.5, 0.125, -0.625];
        for (a, b) in c.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(c[0] > c[1] && c[1] > c[3] && c[3] > 0.0);
        assert!(c[2] < c[4] && c[4] < 0.0);
    }

    #[test]
    fn fit_recovers_quadratic() {
        let pts: Vec<(f64, f64)> = beta1_grid(1e-3, 1e-2, 8, 1.0, -1.0)
            .into_iter()
            .map(|b| (b, 0.7 * b * b + 0.3 * b * b * b))
            .collect();
        let f = fit_quadratic(&pts).unwrap();
        assert!((f.coeff / 0.7 - 1.0).abs() < 0.01);
        assert!(f.is_tangent());
        assert_eq!(f.used, 8);
    }

    #[test]
    fn fit_detects_linear_term() {
        let pts: Vec<(f64, f64)> =
            beta1_grid(1e-3, 1e-2, 8, 1.0, 1.0).into_iter().map(|b| (b, 1e-4 * b + b * b)).collect();
        let f = fit_quadratic(&pts).unwrap();
        assert!((f.linear - 1e-4).abs() < 1e-9);
        assert!(!f.is_tangent());
    }

    #[test]
    fn fit_rejects_short_or_narrow_grids() {
        let few: Vec<(f64, f64)> = beta1_grid(1e-3, 1e-2, 5, 1.0, 1.0).into_iter().map(|b| (b, b * b)).collect();
        assert!(matches!(fit_quadratic(&few), Err(Error::IllConditioned { .. })));
        let narrow: Vec<(f64, f64)> = beta1_grid(1e-3, 5e-3, 9, 1.0, 1.0).into_iter().map(|b| (b, b * b)).collect();
        assert!(matches!(fit_quadratic(&narrow), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn census_table_is_complete() {
        for l in OPEN_REGIONS.iter().chain(CURVE_CASES.iter()).chain(["4i"].iter()) {
            assert!(expected_census(l).is_some(), "{l}");
        }
        assert_eq!(expected_census("4c").unwrap().len(), 4);
        assert_eq!(expected_census("4f").unwrap().len(), 5);
        assert!(expected_census("5a").is_none());
    }

    #[test]
    fn inverse_of_diagonal() {
        let m = inverse([[2.0, 0.0], [0.0, -4.0]]).unwrap();
        assert_eq!(m, [[0.5, 0.0], [0.0, -0.25]]);
        assert!(inverse([[1.0, 2.0], [2.0, 4.0]]).is_err());
    }
}

//! Quantities along the unperturbed grazing cycle: the Floquet factor, the Melnikov-type
//! integrals, their one-sided versions and the expansion coefficients built from them.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{FilippovSystem, Point, Side, ALPHA0};
use crate::integrate::hybrid::{smooth_until, Section};
use crate::integrate::rk::{IntegratorOptions, Stepper};

/// Default phase of the section point as a fraction of the period.
pub const DEFAULT_SECTION_PHASE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GrazingCycleData {
    /// Samples `(t, γ₀(t))` for `t ∈ [0, T₀]`.
    pub gamma: Vec<(f64, Point)>,
    /// `∫₀ᵗ div` at each sample.
    pub div_integral: Vec<f64>,
    pub period: f64,
    /// The point `(a, b)` defining the horizontal section `Π`.
    pub section: Point,
    pub section_phase: f64,
    /// Whether the phase rule failed and the point of maximal `g⁺` was used instead.
    pub section_fallback: bool,
    pub tau_plus: f64,
    pub tau_minus: f64,
    /// Bounding-box diagonal of the cycle.
    pub diameter: f64,
    /// `|γ₀(T₀) − γ₀(0)|` from the return integration.
    pub closure_residual: f64,
}

impl GrazingCycleData {
    /// `Π` as an event surface: hits with `g > 0` near `a`.
    pub fn section_line(&self) -> Section {
        let w = 0.25 * self.diameter;
        Section::horizontal(self.section.y, (self.section.x - w, self.section.x + w)).with_normal_sign(1.0)
    }
}

fn cycle_samples_rhs(sys: &FilippovSystem) -> impl FnMut(&[f64; 3]) -> [f64; 3] + '_ {
    move |y: &[f64; 3]| {
        let p = Point::new(y[0], y[1]);
        let v = sys.eval_side_unchecked(p, Side::Upper, &ALPHA0);
        [v[0], v[1], sys.divergence(p, Side::Upper, &ALPHA0)]
    }
}

/// Integrates a smooth system for exactly time `t_end`, calling `on_step` after every step.
pub(crate) fn integrate_for<const N: usize, F>(
    rhs: &mut F,
    y0: [f64; N],
    t_end: f64,
    opts: &IntegratorOptions,
    mut on_step: impl FnMut(f64, &[f64; N]),
) -> Result<[f64; N]>
where
    F: FnMut(&[f64; N]) -> [f64; N],
{
    let mut st = Stepper::new(rhs, 0.0, y0, *opts)?;
    while st.t < t_end {
        st.step(rhs, t_end)?;
        on_step(st.t, &st.y);
    }
    Ok(st.y)
}

/// The upper cycle through the origin at `α = 0`.
pub fn grazing_cycle(sys: &FilippovSystem, opts: &IntegratorOptions, section_phase: f64) -> Result<GrazingCycleData> {
    let o = sys.eval_side(Point::ORIGIN, Side::Upper, &ALPHA0)?;
    if o[1].abs() > 1e-8 || o[0] <= 0.0 {
        return Err(Error::NotGrazing { residual: o[1].abs() });
    }
    if !(section_phase > 0.0 && section_phase < 1.0) {
        return Err(Error::InvalidInput { detail: "section phase must lie in (0, 1)".into() });
    }
    let ret = Section::vertical(0.0, (-0.5, 0.5)).with_normal_sign(1.0);
    let mut rhs = cycle_samples_rhs(sys);
    let budget = 1e3;
    let (period, y_ret) = match smooth_until(&mut rhs, [0.0, 0.0, 0.0], 1.0, &ret, opts, budget) {
        Ok(v) => v,
        Err(Error::NoHit { .. }) | Err(Error::StepSizeUnderflow { .. }) => {
            return Err(Error::NotGrazing { residual: f64::INFINITY })
        }
        Err(e) => return Err(e),
    };
    let residual = libm::hypot(y_ret[0], y_ret[1]);
    if residual > 1e-9 {
        return Err(Error::NotGrazing { residual });
    }
    let mut gamma = alloc::vec![(0.0, Point::ORIGIN)];
    let mut divs = alloc::vec![0.0];
    let t_sec = section_phase * period;
    let mut sec_state = None;
    let mut st = Stepper::new(&mut rhs, 0.0, [0.0, 0.0, 0.0], *opts)?;
    for limit in [t_sec, period] {
        while st.t < limit {
            st.step(&mut rhs, limit)?;
            gamma.push((st.t, Point::new(st.y[0], st.y[1])));
            divs.push(st.y[2]);
        }
        if sec_state.is_none() {
            sec_state = Some(st.y);
        }
    }
    let sec_state = sec_state.expect("section state recorded");
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (_, p) in &gamma {
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    let diameter = libm::hypot(xmax - xmin, ymax - ymin);
    let g_at = |p: Point| sys.eval_side_unchecked(p, Side::Upper, &ALPHA0)[1];
    let gmax = gamma.iter().map(|(_, p)| g_at(*p)).fold(0.0, f64::max);
    let mut section = Point::new(sec_state[0], sec_state[1]);
    let mut tau_plus = t_sec;
    let mut fallback = false;
    if g_at(section) <= 1e-3 * gmax {
        let (t, p) = gamma
            .iter()
            .copied()
            .max_by(|a, b| g_at(a.1).total_cmp(&g_at(b.1)))
            .ok_or(Error::NoCycle { what: "empty cycle samples" })?;
        section = p;
        tau_plus = t;
        fallback = true;
    }
    let mut gcd = GrazingCycleData {
        gamma,
        div_integral: divs,
        period,
        section,
        section_phase,
        section_fallback: fallback,
        tau_plus,
        tau_minus: 0.0,
        diameter,
        closure_residual: residual,
    };
    // The backward orbit from O to Π is the forward orbit from Π to O; integrating it
    // forward stays on the attracting side.
    let mut fwd = |y: &[f64; 2]| sys.eval_side_unchecked(Point::new(y[0], y[1]), Side::Upper, &ALPHA0);
    let (tm, _) = smooth_until(&mut fwd, [gcd.section.x, gcd.section.y], 1.0, &ret, opts, 2.0 * period)?;
    gcd.tau_minus = -tm;
    Ok(gcd)
}

/// `λ(0)` and `λ(tₖ)` on the sample grid of the cycle.
pub fn floquet(gcd: &GrazingCycleData) -> (f64, Vec<(f64, f64)>) {
    let total = *gcd.div_integral.last().unwrap_or(&0.0);
    let lam = gcd.gamma.iter().zip(&gcd.div_integral).map(|((t, _), d)| (*t, libm::exp(total - d))).collect();
    (libm::exp(total), lam)
}

/// Data of `Z⁺` at the origin and at the section point, all at `α = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OriginData {
    pub f0: f64,
    pub gx0: f64,
    pub g_alpha: [f64; 2],
    pub g_ab: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntrinsicQuantities {
    pub lambda0: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub nu: f64,
    /// `(λ⁺(0), λ⁻(0))`
    pub lambda_pm0: (f64, f64),
    /// `[[κ₁⁺, κ₂⁺], [κ₁⁻, κ₂⁻]]`
    pub kappa_pm: [[f64; 2]; 2],
    pub nu_pm: (f64, f64),
    pub a1_pm: (f64, f64),
    pub a2_pm: (f64, f64),
    pub b_pm: (f64, f64),
    pub origin: OriginData,
}

impl IntrinsicQuantities {
    pub fn transversality(&self) -> f64 {
        transversality(self.kappa1, self.kappa2, self.origin.g_alpha)
    }

    /// Every scalar with its name, in a fixed order.
    pub fn named(&self) -> [(&'static str, f64); 19] {
        [
            ("lambda0", self.lambda0),
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("nu", self.nu),
            ("lambda_plus0", self.lambda_pm0.0),
            ("lambda_minus0", self.lambda_pm0.1),
            ("kappa1_plus", self.kappa_pm[0][0]),
            ("kappa2_plus", self.kappa_pm[0][1]),
            ("kappa1_minus", self.kappa_pm[1][0]),
            ("kappa2_minus", self.kappa_pm[1][1]),
            ("nu_plus", self.nu_pm.0),
            ("nu_minus", self.nu_pm.1),
            ("A1_plus", self.a1_pm.0),
            ("A1_minus", self.a1_pm.1),
            ("A2_plus", self.a2_pm.0),
            ("A2_minus", self.a2_pm.1),
            ("B_plus", self.b_pm.0),
            ("B_minus", self.b_pm.1),
            ("transversality", self.transversality()),
        ]
    }
}

/// `κ₁ g_α₂ − κ₂ g_α₁` at the origin.
pub fn transversality(kappa1: f64, kappa2: f64, g_alpha: [f64; 2]) -> f64 {
    kappa1 * g_alpha[1] - kappa2 * g_alpha[0]
}

/// Forward integration from `p0` for time `T`; returns `E = ∫₀ᵀ div` and
/// `Jᵢ = ∫₀ᵀ e^{E(T) − E(t)} hᵢ dt` for `h = (f g_α₁ − g f_α₁, f g_α₂ − g f_α₂, g f_x − f g_x)`.
/// `J` obeys `J' = div·J + h`, which keeps it bounded along a contracting cycle.
fn weighted_integrals(sys: &FilippovSystem, p0: Point, t_end: f64, opts: &IntegratorOptions) -> Result<(f64, [f64; 3])> {
    let mut rhs = |y: &[f64; 6]| {
        let p = Point::new(y[0], y[1]);
        let v = sys.eval_side_unchecked(p, Side::Upper, &ALPHA0);
        let j = sys.jacobian(p, Side::Upper, &ALPHA0);
        let pa = sys.param_partials(p, Side::Upper, &ALPHA0);
        let (f, g) = (v[0], v[1]);
        let div = j[0][0] + j[1][1];
        let h1 = f * pa[1][0] - g * pa[0][0];
        let h2 = f * pa[1][1] - g * pa[0][1];
        let hn = g * j[0][0] - f * j[1][0];
        [f, g, div, div * y[3] + h1, div * y[4] + h2, div * y[5] + hn]
    };
    let y = integrate_for(&mut rhs, [p0.x, p0.y, 0.0, 0.0, 0.0, 0.0], t_end, opts, |_, _| {})?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical { what: "weighted cycle integrals" });
    }
    Ok((y[2], [y[3], y[4], y[5]]))
}

pub fn origin_data(sys: &FilippovSystem, section: Point) -> Result<OriginData> {
    let v = sys.eval_side(Point::ORIGIN, Side::Upper, &ALPHA0)?;
    let j = sys.jacobian(Point::ORIGIN, Side::Upper, &ALPHA0);
    let pa = sys.param_partials(Point::ORIGIN, Side::Upper, &ALPHA0);
    let g_ab = sys.eval_side(section, Side::Upper, &ALPHA0)?[1];
    Ok(OriginData { f0: v[0], gx0: j[1][0], g_alpha: [pa[1][0], pa[1][1]], g_ab })
}

/// Full-cycle and one-sided quantities, with the coefficients `A₁±`, `A₂±`, `B±`.
pub fn quantities(sys: &FilippovSystem, gcd: &GrazingCycleData, opts: &IntegratorOptions) -> Result<IntrinsicQuantities> {
    let (e0, [k1, k2, nu]) = weighted_integrals(sys, Point::ORIGIN, gcd.period, opts)?;
    let lambda0 = libm::exp(e0);
    let (ep, [k1p, k2p, nup]) = weighted_integrals(sys, Point::ORIGIN, gcd.tau_plus, opts)?;
    let lp = libm::exp(ep);
    // [τ⁻, 0] is traversed forward from Π; the weight exp ∫ₜ^{τ⁻} div equals
    // e^{−E(U)} · e^{E(U) − E(u)} with u = t − τ⁻ and U = −τ⁻.
    let (em, km) = weighted_integrals(sys, gcd.section, -gcd.tau_minus, opts)?;
    let lm = libm::exp(-em);
    let [k1m, k2m, num] = km.map(|v| -lm * v);
    let od = origin_data(sys, gcd.section)?;
    let delta = transversality(k1, k2, od.g_alpha);
    let [ga1, ga2] = od.g_alpha;
    let a1 = |nus: f64, k1s: f64, k2s: f64| {
        nus / od.g_ab - (k1s * (nu * ga2 + k2 * od.gx0) - k2s * (nu * ga1 + k1 * od.gx0)) / (od.g_ab * delta)
    };
    let a2 = |k1s: f64, k2s: f64| (k2s * ga1 - k1s * ga2) * od.f0 * (1.0 - lambda0) / (od.g_ab * delta);
    let b = |ls: f64| od.gx0 * ls / (2.0 * od.g_ab);
    Ok(IntrinsicQuantities {
        lambda0,
        kappa1: k1,
        kappa2: k2,
        nu,
        lambda_pm0: (lp, lm),
        kappa_pm: [[k1p, k2p], [k1m, k2m]],
        nu_pm: (nup, num),
        a1_pm: (a1(nup, k1p, k2p), a1(num, k1m, k2m)),
        a2_pm: (a2(k1p, k2p), a2(k1m, k2m)),
        b_pm: (b(lp), b(lm)),
        origin: od,
    })
}

/// Twice the largest difference from the finest of three tolerance levels (factors 1, 0.1,
/// 0.01), floored at a few ulps of `max(|value|, 1)`. Returns the finest values with them.
pub fn error_estimates(
    sys: &FilippovSystem,
    gcd: &GrazingCycleData,
    opts: &IntegratorOptions,
) -> Result<(IntrinsicQuantities, Vec<(&'static str, f64)>)> {
    let coarse = quantities(sys, gcd, opts)?;
    let mid = quantities(sys, gcd, &opts.scaled(1e-1))?;
    let fine = quantities(sys, gcd, &opts.scaled(1e-2))?;
    let errs = coarse
        .named()
        .iter()
        .zip(mid.named().iter())
        .zip(fine.named().iter())
        .map(|(((n, c), (_, m)), (_, f))| {
            let d = (c - f).abs().max((m - f).abs());
            (*n, (2.0 * d).max(8.0 * f64::EPSILON * f.abs().max(1.0)))
        })
        .collect();
    Ok((fine, errs))
}

/// Residuals of the exact relations between the one-sided quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IdentityResiduals {
    /// `|A₁⁺ − A₁⁻|`
    pub a1_diff: f64,
    /// `|λ⁻(0)λ(0)/λ⁺(0) − 1|`
    pub lambda_ratio: f64,
    /// Relative error of `A₂⁺ − A₂⁻` against its closed form.
    pub a2_rel: f64,
    pub b_rel: f64,
    pub kappa1_rel: f64,
    pub kappa2_rel: f64,
    pub nu_rel: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        [self.a1_diff, self.lambda_ratio, self.a2_rel, self.b_rel, self.kappa1_rel, self.kappa2_rel, self.nu_rel]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / b.abs().max(scale).max(1e-300)
}

pub fn identity_residuals(q: &IntrinsicQuantities) -> IdentityResiduals {
    let od = &q.origin;
    let (lp, lm) = q.lambda_pm0;
    let a2_closed = lm * (q.lambda0 - 1.0) * od.f0 / od.g_ab;
    let b_closed = lm * (q.lambda0 - 1.0) * od.gx0 / (2.0 * od.g_ab);
    let kscale = q.kappa_pm[0][0].abs().max(q.kappa_pm[0][1].abs()).max(q.nu_pm.0.abs());
    IdentityResiduals {
        a1_diff: (q.a1_pm.0 - q.a1_pm.1).abs(),
        lambda_ratio: (lm * q.lambda0 / lp - 1.0).abs(),
        a2_rel: rel(q.a2_pm.0 - q.a2_pm.1, a2_closed, 0.0),
        b_rel: rel(q.b_pm.0 - q.b_pm.1, b_closed, 0.0),
        kappa1_rel: rel(q.kappa_pm[1][0], q.kappa_pm[0][0] - q.kappa1 * lm, 1e-8 * kscale),
        kappa2_rel: rel(q.kappa_pm[1][1], q.kappa_pm[0][1] - q.kappa2 * lm, 1e-8 * kscale),
        nu_rel: rel(q.nu_pm.1, q.nu_pm.0 - q.nu * lm, 1e-8 * kscale),
    }
}

/// Sign facts that hold for a stable cycle: `B± > 0`, `A₂⁺ − A₂⁻ < 0`, `B⁺ − B⁻ < 0`.
pub fn sign_suite(q: &IntrinsicQuantities) -> [(&'static str, bool); 4] {
    [
        ("B_plus_positive", q.b_pm.0 > 0.0),
        ("B_minus_positive", q.b_pm.1 > 0.0),
        ("A2_difference_negative", q.a2_pm.0 - q.a2_pm.1 < 0.0),
        ("B_difference_negative", q.b_pm.0 - q.b_pm.1 < 0.0),
    ]
}

/// `∂(φ₁, φ₂)/∂α` at `α = 0`.
pub fn beta_jacobian(q: &IntrinsicQuantities) -> Result<[[f64; 2]; 2]> {
    if (q.lambda0 - 1.0).abs() < 1e-6 {
        return Err(Error::HyperbolicityViolated { lambda0: q.lambda0 });
    }
    let od = &q.origin;
    let den = od.f0 * (1.0 - q.lambda0);
    let row2 = |i: usize, k: f64| (q.nu * od.g_alpha[i] / od.gx0 + k) / den;
    Ok([
        [-od.g_alpha[0] / od.gx0, -od.g_alpha[1] / od.gx0],
        [row2(0, q.kappa1), row2(1, q.kappa2)],
    ])
}

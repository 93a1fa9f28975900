//! Dormand–Prince 5(4) for autonomous systems of fixed dimension.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Tolerance on event functions after polishing.
    pub event_tol: f64,
    pub max_step: f64,
    pub max_events: usize,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            event_tol: 1e-12,
            max_step: 0.05,
            max_events: 10_000,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn strict() -> Self {
        IntegratorOptions { rel_tol: 1e-12, abs_tol: 1e-14, event_tol: 1e-13, ..Self::default() }
    }

    /// Same options with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        IntegratorOptions { rel_tol: self.rel_tol * factor, abs_tol: self.abs_tol * factor, ..*self }
    }

    /// Geometric tolerance `ε_int` used for closure and confinement checks.
    pub fn eps_int(&self) -> f64 {
        self.rel_tol.max(self.abs_tol)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.event_tol > 0.0
            && self.max_step > 0.0
            && self.max_events > 0
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput { detail: "integrator tolerances must be positive".into() })
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] += h * s;
    }
    out
}

/// One Dormand–Prince step of size `h` from `(y0, f0)`.
/// Returns `(y1, f1, error_vector)`; `f1` is the FSAL stage.
pub fn dp_step<const N: usize, F>(rhs: &mut F, y0: &[f64; N], f0: &[f64; N], h: f64) -> ([f64; N], [f64; N], [f64; N])
where
    F: FnMut(&[f64; N]) -> [f64; N],
{
    let k1 = f0;
    let k2 = rhs(&axpy(y0, h, &[(A21, k1)]));
    let k3 = rhs(&axpy(y0, h, &[(A31, k1), (A32, &k2)]));
    let k4 = rhs(&axpy(y0, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = rhs(&axpy(y0, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = rhs(&axpy(y0, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y1 = axpy(y0, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = rhs(&y1);
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y1, k7, err)
}

/// An accepted step, enough for cubic Hermite interpolation.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord<const N: usize> {
    pub t0: f64,
    pub y0: [f64; N],
    pub f0: [f64; N],
    pub t1: f64,
    pub y1: [f64; N],
    pub f1: [f64; N],
}

impl<const N: usize> StepRecord<N> {
    pub fn h(&self) -> f64 {
        self.t1 - self.t0
    }

    /// Cubic Hermite interpolant of component `i` at `t`.
    pub fn hermite(&self, i: usize, t: f64) -> f64 {
        let h = self.h();
        let s = (t - self.t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * self.y0[i] + h10 * h * self.f0[i] + h01 * self.y1[i] + h11 * h * self.f1[i]
    }

    pub fn hermite_state(&self, t: f64) -> [f64; N] {
        let mut out = [0.0; N];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.hermite(i, t);
        }
        out
    }

    /// Minimum of the Hermite interpolant of component `i` strictly inside the step,
    /// as `(t, value)`, if the cubic has an interior local minimum.
    pub fn interior_min(&self, i: usize) -> Option<(f64, f64)> {
        let h = self.h();
        let (p0, p1, m0, m1) = (self.y0[i], self.y1[i], h * self.f0[i], h * self.f1[i]);
        // p(s) = a s³ + b s² + c s + d
        let a = 2.0 * p0 + m0 - 2.0 * p1 + m1;
        let b = -3.0 * p0 - 2.0 * m0 + 3.0 * p1 - m1;
        let c = m0;
        let mut best: Option<(f64, f64)> = None;
        let mut consider = |s: f64| {
            if s > 0.0 && s < 1.0 && 6.0 * a * s + 2.0 * b > 0.0 {
                let t = self.t0 + s * h;
                let v = self.hermite(i, t);
                if best.is_none_or(|(_, bv)| v < bv) {
                    best = Some((t, v));
                }
            }
        };
        // Stationary points of p: 3a s² + 2b s + c = 0, solved without cancellation.
        let (qa, qb, qc) = (3.0 * a, 2.0 * b, c);
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let q = -0.5 * (qb + libm::sqrt(disc).copysign(qb));
            if q != 0.0 {
                consider(qc / q);
                if qa != 0.0 {
                    consider(q / qa);
                }
            } else if qa != 0.0 {
                consider(0.0);
            }
        }
        best
    }
}

/// Adaptive stepper. Time always increases; callers integrate backward by negating the
/// right-hand side.
#[derive(Debug, Clone)]
pub struct Stepper<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub f: [f64; N],
    pub h: f64,
    pub opts: IntegratorOptions,
    pub steps: usize,
}

impl<const N: usize> Stepper<N> {
    pub fn new<F>(rhs: &mut F, t0: f64, y0: [f64; N], opts: IntegratorOptions) -> Result<Self>
    where
        F: FnMut(&[f64; N]) -> [f64; N],
    {
        let f0 = rhs(&y0);
        if !f0.iter().chain(y0.iter()).all(|v| v.is_finite()) {
            return Err(Error::Numerical { what: "initial state" });
        }
        let mut s = Stepper { t: t0, y: y0, f: f0, h: 0.0, opts, steps: 0 };
        s.h = s.initial_step(rhs);
        Ok(s)
    }

    /// Restarts from a new state, keeping the current step size as a hint.
    pub fn reset<F>(&mut self, rhs: &mut F, t: f64, y: [f64; N]) -> Result<()>
    where
        F: FnMut(&[f64; N]) -> [f64; N],
    {
        self.t = t;
        self.y = y;
        self.f = rhs(&y);
        if !self.f.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical { what: "right-hand side" });
        }
        let h0 = self.initial_step(rhs);
        self.h = if self.h > 0.0 { self.h.min(h0 * 10.0).max(h0) } else { h0 };
        Ok(())
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.opts.abs_tol + self.opts.rel_tol * a.abs().max(b.abs())
    }

    fn norm(&self, v: &[f64; N], y0: &[f64; N], y1: &[f64; N]) -> f64 {
        let mut s = 0.0;
        for i in 0..N {
            let r = v[i] / self.scale(y0[i], y1[i]);
            s += r * r;
        }
        libm::sqrt(s / N as f64)
    }

    fn initial_step<F>(&self, rhs: &mut F) -> f64
    where
        F: FnMut(&[f64; N]) -> [f64; N],
    {
        let d0 = self.norm(&self.y, &self.y, &self.y);
        let d1 = self.norm(&self.f, &self.y, &self.y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { (0.01 * d0 / d1).max(1e-10) };
        let y1 = axpy(&self.y, h0, &[(1.0, &self.f)]);
        let f1 = rhs(&y1);
        let mut diff = [0.0; N];
        for i in 0..N {
            diff[i] = f1[i] - self.f[i];
        }
        let d2 = self.norm(&diff, &self.y, &self.y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            libm::pow(0.01 / d1.max(d2), 0.2)
        };
        (100.0 * h0).min(h1).min(self.opts.max_step)
    }

    /// Takes one accepted step, never past `t_limit`.
    pub fn step<F>(&mut self, rhs: &mut F, t_limit: f64) -> Result<StepRecord<N>>
    where
        F: FnMut(&[f64; N]) -> [f64; N],
    {
        if self.steps >= self.opts.max_steps {
            return Err(Error::NoConvergence { what: "integration step budget", iterations: self.steps });
        }
        let mut h = self.h.min(self.opts.max_step);
        let mut clipped = false;
        if self.t + h >= t_limit {
            h = t_limit - self.t;
            clipped = true;
        }
        loop {
            if h <= 1e-14 * self.t.abs().max(1.0) && !(clipped && h > 0.0) {
                return Err(Error::StepSizeUnderflow { t: self.t });
            }
            let (y1, f1, err) = dp_step(rhs, &self.y, &self.f, h);
            let finite = y1.iter().chain(f1.iter()).all(|v| v.is_finite());
            let e = if finite { self.norm(&err, &self.y, &y1) } else { f64::INFINITY };
            if e <= 1.0 {
                let fac = if e == 0.0 { 5.0 } else { (0.9 * libm::pow(e, -0.2)).clamp(0.2, 5.0) };
                let rec = StepRecord { t0: self.t, y0: self.y, f0: self.f, t1: self.t + h, y1, f1 };
                self.t = if clipped { t_limit } else { self.t + h };
                self.y = y1;
                self.f = f1;
                if !clipped || h * fac > self.h {
                    self.h = (h * fac).min(self.opts.max_step);
                }
                self.steps += 1;
                return Ok(rec);
            }
            let fac = if e.is_finite() { (0.9 * libm::pow(e, -0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= fac;
            clipped = false;
        }
    }
}

/// Locates a sign change of `event` inside an accepted step by re-integrating one
/// Dormand–Prince step from the step start. Returns `(t, y)` with
/// `|event(y)| ≤ event_tol` or the best bracketed point.
pub fn locate_event<const N: usize, F, G>(
    rhs: &mut F,
    rec: &StepRecord<N>,
    mut event: G,
    event_tol: f64,
) -> Result<(f64, [f64; N])>
where
    F: FnMut(&[f64; N]) -> [f64; N],
    G: FnMut(&[f64; N]) -> f64,
{
    let g0 = event(&rec.y0);
    let g1 = event(&rec.y1);
    locate_between(rhs, rec, &mut event, 0.0, g0, rec.h(), g1, event_tol)
}

/// As [`locate_event`] on the sub-interval `[s0, s1]` of step offsets with known values.
#[allow(clippy::too_many_arguments)]
pub fn locate_between<const N: usize, F, G>(
    rhs: &mut F,
    rec: &StepRecord<N>,
    event: &mut G,
    s0: f64,
    g0: f64,
    s1: f64,
    g1: f64,
    event_tol: f64,
) -> Result<(f64, [f64; N])>
where
    F: FnMut(&[f64; N]) -> [f64; N],
    G: FnMut(&[f64; N]) -> f64,
{
    let state_at = |rhs: &mut F, s: f64| -> [f64; N] {
        if s == 0.0 {
            rec.y0
        } else {
            dp_step(rhs, &rec.y0, &rec.f0, s).0
        }
    };
    if g0 == 0.0 {
        return Ok((rec.t0 + s0, state_at(rhs, s0)));
    }
    let (mut a, mut fa, mut b, mut fb) = (s0, g0, s1, g1);
    let mut best = if fa.abs() < fb.abs() { a } else { b };
    let mut best_v = fa.abs().min(fb.abs());
    for _ in 0..100 {
        if best_v <= event_tol || (b - a).abs() <= 4.0 * f64::EPSILON * rec.t1.abs().max(1.0) {
            break;
        }
        // Illinois-modified regula falsi, safeguarded by bisection.
        let mut s = if fb != fa { b - fb * (b - a) / (fb - fa) } else { 0.5 * (a + b) };
        let lo = a.min(b);
        let hi = a.max(b);
        let w = hi - lo;
        if !(s > lo + 0.01 * w && s < hi - 0.01 * w) {
            s = 0.5 * (a + b);
        }
        let ys = state_at(rhs, s);
        let gs = event(&ys);
        if gs.abs() < best_v {
            best_v = gs.abs();
            best = s;
        }
        if gs == 0.0 {
            break;
        }
        if gs.signum() == fb.signum() {
            b = s;
            fb = gs;
            fa *= 0.5;
        } else {
            a = b;
            fa = fb;
            b = s;
            fb = gs;
        }
    }
    Ok((rec.t0 + best, state_at(rhs, best)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_accuracy() {
        let mut rhs = |y: &[f64; 1]| [-y[0]];
        let mut s = Stepper::new(&mut rhs, 0.0, [1.0], IntegratorOptions::default()).unwrap();
        while s.t < 2.0 {
            s.step(&mut rhs, 2.0).unwrap();
        }
        assert_eq!(s.t, 2.0);
        assert!((s.y[0] - libm::exp(-2.0)).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let mut rhs = |y: &[f64; 2]| [y[1], -y[0]];
        let mut s = Stepper::new(&mut rhs, 0.0, [1.0, 0.0], IntegratorOptions::default()).unwrap();
        while s.t < 10.0 {
            s.step(&mut rhs, 10.0).unwrap();
        }
        let e = s.y[0] * s.y[0] + s.y[1] * s.y[1];
        assert!((e - 1.0).abs() < 1e-9);
        assert!((s.y[0] - libm::cos(10.0)).abs() < 1e-8);
    }

    #[test]
    fn event_location_is_polished() {
        let mut rhs = |y: &[f64; 2]| [y[1], -y[0]];
        let mut s = Stepper::new(&mut rhs, 0.0, [1.0, 0.0], IntegratorOptions::default()).unwrap();
        loop {
            let rec = s.step(&mut rhs, 10.0).unwrap();
            if rec.y0[0] > 0.0 && rec.y1[0] <= 0.0 {
                let (t, y) = locate_event(&mut rhs, &rec, |y| y[0], 1e-13).unwrap();
                assert!(y[0].abs() <= 1e-13);
                assert!((t - core::f64::consts::FRAC_PI_2).abs() < 1e-10);
                break;
            }
        }
    }

    #[test]
    fn hermite_minimum() {
        let mut rhs = |y: &[f64; 2]| [1.0, 2.0 * (y[0] - 0.5)];
        let y0 = [0.0, 0.25];
        let f0 = rhs(&y0);
        let (y1, f1, _) = dp_step(&mut rhs, &y0, &f0, 1.0);
        let rec = StepRecord { t0: 0.0, y0, f0, t1: 1.0, y1, f1 };
        let (t, v) = rec.interior_min(1).unwrap();
        assert!((t - 0.5).abs() < 1e-12 && v.abs() < 1e-12);
    }
}

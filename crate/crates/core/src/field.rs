use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Unfolding parameters `α = (α₁, α₂)`.
pub type Params = [f64; 2];

/// The unperturbed parameter value.
pub const ALPHA0: Params = [0.0, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(self, other: Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

impl core::ops::Neg for Point {
    type Output = Point;

    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

/// Which zone a field or an arc belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Upper => Side::Lower,
            Side::Lower => Side::Upper,
        }
    }

    /// `+1` above the boundary, `-1` below.
    pub fn sign(self) -> f64 {
        match self {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        }
    }
}

fn fd_step(c: f64) -> f64 {
    1e-6 * c.abs().max(1.0)
}

/// A smooth planar vector field `(f, g)` depending on two parameters.
///
/// Derivatives default to central differences; implementors with closed forms should
/// override them.
pub trait SmoothField: Send + Sync {
    fn eval(&self, p: Point, alpha: &Params) -> [f64; 2];

    /// `[[f_x, f_y], [g_x, g_y]]`.
    fn jacobian(&self, p: Point, alpha: &Params) -> [[f64; 2]; 2] {
        fd_jacobian(self, p, alpha)
    }

    /// `[[f_α₁, f_α₂], [g_α₁, g_α₂]]`.
    fn param_partials(&self, p: Point, alpha: &Params) -> [[f64; 2]; 2] {
        fd_param_partials(self, p, alpha)
    }

    fn divergence(&self, p: Point, alpha: &Params) -> f64 {
        let j = self.jacobian(p, alpha);
        j[0][0] + j[1][1]
    }
}

/// Central-difference Jacobian, regardless of any analytic override.
pub fn fd_jacobian<F: SmoothField + ?Sized>(field: &F, p: Point, alpha: &Params) -> [[f64; 2]; 2] {
    let hx = fd_step(p.x);
    let hy = fd_step(p.y);
    let xp = field.eval(Point::new(p.x + hx, p.y), alpha);
    let xm = field.eval(Point::new(p.x - hx, p.y), alpha);
    let yp = field.eval(Point::new(p.x, p.y + hy), alpha);
    let ym = field.eval(Point::new(p.x, p.y - hy), alpha);
    [
        [(xp[0] - xm[0]) / (2.0 * hx), (yp[0] - ym[0]) / (2.0 * hy)],
        [(xp[1] - xm[1]) / (2.0 * hx), (yp[1] - ym[1]) / (2.0 * hy)],
    ]
}

/// Central-difference parameter partials.
pub fn fd_param_partials<F: SmoothField + ?Sized>(
    field: &F,
    p: Point,
    alpha: &Params,
) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        let h = fd_step(alpha[i]);
        let mut ap = *alpha;
        let mut am = *alpha;
        ap[i] += h;
        am[i] -= h;
        let vp = field.eval(p, &ap);
        let vm = field.eval(p, &am);
        out[0][i] = (vp[0] - vm[0]) / (2.0 * h);
        out[1][i] = (vp[1] - vm[1]) / (2.0 * h);
    }
    out
}

/// A field given by a closure; all derivatives by finite differences.
pub struct FnField<F>(pub F);

impl<F> SmoothField for FnField<F>
where
    F: Fn(Point, &Params) -> [f64; 2] + Send + Sync,
{
    fn eval(&self, p: Point, alpha: &Params) -> [f64; 2] {
        (self.0)(p, alpha)
    }
}

/// One monomial `c·xⁱ·yʲ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Monomial {
    pub i: u32,
    pub j: u32,
    pub c: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Polynomial(pub Vec<Monomial>);

impl Polynomial {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.0.iter().map(|m| m.c * libm::pow(x, m.i as f64) * libm::pow(y, m.j as f64)).sum()
    }

    fn powi(v: f64, n: u32) -> f64 {
        if n == 0 {
            1.0
        } else {
            libm::pow(v, n as f64)
        }
    }

    pub fn dx(&self, x: f64, y: f64) -> f64 {
        self.0
            .iter()
            .filter(|m| m.i > 0)
            .map(|m| m.c * m.i as f64 * Self::powi(x, m.i - 1) * Self::powi(y, m.j))
            .sum()
    }

    pub fn dy(&self, x: f64, y: f64) -> f64 {
        self.0
            .iter()
            .filter(|m| m.j > 0)
            .map(|m| m.c * m.j as f64 * Self::powi(x, m.i) * Self::powi(y, m.j - 1))
            .sum()
    }
}

/// Polynomial field with terms linear in each parameter:
/// `f = f₀ + α₁ f₁ + α₂ f₂`, same for `g`.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolynomialField {
    pub f: [Polynomial; 3],
    pub g: [Polynomial; 3],
}

impl SmoothField for PolynomialField {
    fn eval(&self, p: Point, a: &Params) -> [f64; 2] {
        let c = |q: &[Polynomial; 3]| {
            q[0].eval(p.x, p.y) + a[0] * q[1].eval(p.x, p.y) + a[1] * q[2].eval(p.x, p.y)
        };
        [c(&self.f), c(&self.g)]
    }

    fn jacobian(&self, p: Point, a: &Params) -> [[f64; 2]; 2] {
        let dx = |q: &[Polynomial; 3]| {
            q[0].dx(p.x, p.y) + a[0] * q[1].dx(p.x, p.y) + a[1] * q[2].dx(p.x, p.y)
        };
        let dy = |q: &[Polynomial; 3]| {
            q[0].dy(p.x, p.y) + a[0] * q[1].dy(p.x, p.y) + a[1] * q[2].dy(p.x, p.y)
        };
        [[dx(&self.f), dy(&self.f)], [dx(&self.g), dy(&self.g)]]
    }

    fn param_partials(&self, p: Point, _a: &Params) -> [[f64; 2]; 2] {
        [
            [self.f[1].eval(p.x, p.y), self.f[2].eval(p.x, p.y)],
            [self.g[1].eval(p.x, p.y), self.g[2].eval(p.x, p.y)],
        ]
    }
}

#[derive(Clone)]
enum LowerField {
    Reflected,
    Explicit(Arc<dyn SmoothField>),
}

/// The pair `(Z⁺, Z⁻)` with boundary `h(x, y) = y`.
///
/// `shift` implements the translation `(x, y) → (x + shift, y)`: the stored fields are
/// evaluated at the shifted point.
#[derive(Clone)]
pub struct FilippovSystem {
    upper: Arc<dyn SmoothField>,
    lower: LowerField,
    shift: f64,
    symmetric: bool,
}

impl fmt::Debug for FilippovSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FilippovSystem")
            .field("shift", &self.shift)
            .field("symmetric", &self.symmetric)
            .field("reflected", &matches!(self.lower, LowerField::Reflected))
            .finish()
    }
}

/// Symmetric partner built from an upper field.
pub fn symmetrize(upper: Arc<dyn SmoothField>) -> FilippovSystem {
    FilippovSystem { upper, lower: LowerField::Reflected, shift: 0.0, symmetric: true }
}

impl FilippovSystem {
    /// Builds a system from two independent fields; the symmetry certificate is set when the
    /// reflection identity holds to `1e-12` on a probe grid.
    pub fn from_pair(upper: Arc<dyn SmoothField>, lower: Arc<dyn SmoothField>) -> Self {
        let mut sys =
            FilippovSystem { upper, lower: LowerField::Explicit(lower), shift: 0.0, symmetric: false };
        sys.symmetric = sys.symmetry_residual(&ALPHA0) <= 1e-12;
        sys
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn upper_field(&self) -> &Arc<dyn SmoothField> {
        &self.upper
    }

    /// The same system in coordinates translated by `dx`.
    pub fn translated(&self, dx: f64) -> Self {
        let mut s = self.clone();
        s.shift += dx;
        s
    }

    /// Largest violation of `Z⁻(x,y) = −Z⁺(−x,−y)` over a grid on `[−2, 2]²`, measured in
    /// the original (unshifted) coordinates.
    pub fn symmetry_residual(&self, alpha: &Params) -> f64 {
        let lower = match &self.lower {
            LowerField::Reflected => return 0.0,
            LowerField::Explicit(l) => l,
        };
        let mut worst: f64 = 0.0;
        for i in 0..9 {
            for j in 0..9 {
                let p = Point::new(-2.0 + 0.5 * i as f64, -2.0 + 0.5 * j as f64);
                let zl = lower.eval(p, alpha);
                let zu = self.upper.eval(-p, alpha);
                worst = worst.max((zl[0] + zu[0]).abs()).max((zl[1] + zu[1]).abs());
            }
        }
        worst
    }

    fn shifted(&self, p: Point) -> Point {
        Point::new(p.x + self.shift, p.y)
    }

    /// Field of the given side at `p`, with no check that `p` lies in that zone.
    pub fn eval_side(&self, p: Point, side: Side, alpha: &Params) -> Result<[f64; 2]> {
        let v = self.eval_side_unchecked(p, side, alpha);
        if v[0].is_finite() && v[1].is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical { what: "field evaluation" })
        }
    }

    #[inline]
    pub fn eval_side_unchecked(&self, p: Point, side: Side, alpha: &Params) -> [f64; 2] {
        let q = self.shifted(p);
        match side {
            Side::Upper => self.upper.eval(q, alpha),
            Side::Lower => match &self.lower {
                LowerField::Reflected => {
                    let v = self.upper.eval(-q, alpha);
                    [-v[0], -v[1]]
                }
                LowerField::Explicit(l) => l.eval(q, alpha),
            },
        }
    }

    /// Jacobian of the given side; for the reflected lower field `J⁻(p) = J⁺(−p)`.
    pub fn jacobian(&self, p: Point, side: Side, alpha: &Params) -> [[f64; 2]; 2] {
        let q = self.shifted(p);
        match side {
            Side::Upper => self.upper.jacobian(q, alpha),
            Side::Lower => match &self.lower {
                LowerField::Reflected => self.upper.jacobian(-q, alpha),
                LowerField::Explicit(l) => l.jacobian(q, alpha),
            },
        }
    }

    pub fn param_partials(&self, p: Point, side: Side, alpha: &Params) -> [[f64; 2]; 2] {
        let q = self.shifted(p);
        match side {
            Side::Upper => self.upper.param_partials(q, alpha),
            Side::Lower => match &self.lower {
                LowerField::Reflected => {
                    let m = self.upper.param_partials(-q, alpha);
                    [[-m[0][0], -m[0][1]], [-m[1][0], -m[1][1]]]
                }
                LowerField::Explicit(l) => l.param_partials(q, alpha),
            },
        }
    }

    pub fn divergence(&self, p: Point, side: Side, alpha: &Params) -> f64 {
        let j = self.jacobian(p, side, alpha);
        j[0][0] + j[1][1]
    }

    /// `(Zh, Z²h)` at `(x0, 0)` for `h = y`: `Zh = g`, `Z²h = f·g_x + g·g_y`.
    pub fn lie_derivatives(&self, x0: f64, side: Side, alpha: &Params) -> Result<(f64, f64)> {
        let p = Point::new(x0, 0.0);
        let v = self.eval_side(p, side, alpha)?;
        let j = self.jacobian(p, side, alpha);
        let z2 = v[0] * j[1][0] + v[1] * j[1][1];
        if !z2.is_finite() {
            return Err(Error::Numerical { what: "Lie derivative" });
        }
        Ok((v[1], z2))
    }
}

//! Event-driven integration of Filippov trajectories.

use alloc::vec::Vec;

use super::rk::{locate_between, locate_event, IntegratorOptions, StepRecord, Stepper};
use crate::boundary::{sliding_velocity, TANGENCY_TOL};
use crate::error::{Error, Result};
use crate::field::{FilippovSystem, Params, Point, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ArcKind {
    Upper,
    Lower,
    Sliding,
}

impl ArcKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArcKind::Upper => "upper",
            ArcKind::Lower => "lower",
            ArcKind::Sliding => "sliding",
        }
    }

    pub fn side(self) -> Option<Side> {
        match self {
            ArcKind::Upper => Some(Side::Upper),
            ArcKind::Lower => Some(Side::Lower),
            ArcKind::Sliding => None,
        }
    }
}

impl From<Side> for ArcKind {
    fn from(s: Side) -> Self {
        match s {
            Side::Upper => ArcKind::Upper,
            Side::Lower => ArcKind::Lower,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Event {
    Start,
    BoundaryHit,
    SlidingEntry,
    FoldExit,
    SectionHit,
    #[cfg_attr(feature = "serde", serde(rename = "timeout"))]
    TimeOut,
    Grazing,
    PseudoEquilibrium,
}

impl Event {
    pub fn as_str(self) -> &'static str {
        match self {
            Event::Start => "start",
            Event::BoundaryHit => "boundary_hit",
            Event::SlidingEntry => "sliding_entry",
            Event::FoldExit => "fold_exit",
            Event::SectionHit => "section_hit",
            Event::TimeOut => "timeout",
            Event::Grazing => "grazing",
            Event::PseudoEquilibrium => "pseudo_equilibrium",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SectionKind {
    /// `x = c`
    Vertical(f64),
    /// `y = c`
    Horizontal(f64),
}

/// A line segment used as an event surface. `bracket` bounds the free coordinate;
/// `normal_sign` filters hits by the sign of the forward-time field component normal to the
/// line.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Section {
    pub kind: SectionKind,
    pub bracket: (f64, f64),
    pub normal_sign: Option<f64>,
}

impl Section {
    pub fn vertical(c: f64, bracket: (f64, f64)) -> Self {
        Section { kind: SectionKind::Vertical(c), bracket, normal_sign: None }
    }

    pub fn horizontal(c: f64, bracket: (f64, f64)) -> Self {
        Section { kind: SectionKind::Horizontal(c), bracket, normal_sign: None }
    }

    pub fn with_normal_sign(mut self, s: f64) -> Self {
        self.normal_sign = Some(s);
        self
    }

    pub fn value(&self, p: Point) -> f64 {
        match self.kind {
            SectionKind::Vertical(c) => p.x - c,
            SectionKind::Horizontal(c) => p.y - c,
        }
    }

    pub fn free_coordinate(&self, p: Point) -> f64 {
        match self.kind {
            SectionKind::Vertical(_) => p.y,
            SectionKind::Horizontal(_) => p.x,
        }
    }

    pub fn normal_component(&self, v: [f64; 2]) -> f64 {
        match self.kind {
            SectionKind::Vertical(_) => v[0],
            SectionKind::Horizontal(_) => v[1],
        }
    }

    fn in_bracket(&self, p: Point) -> bool {
        let s = self.free_coordinate(p);
        let (lo, hi) = (self.bracket.0.min(self.bracket.1), self.bracket.0.max(self.bracket.1));
        s >= lo && s <= hi
    }

    fn accepts(&self, p: Point, forward_velocity: [f64; 2]) -> bool {
        self.in_bracket(p)
            && self.normal_sign.is_none_or(|s| self.normal_component(forward_velocity) * s > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Arc {
    pub kind: ArcKind,
    pub samples: Vec<(f64, Point)>,
    pub entry_event: Event,
    pub exit_event: Event,
}

impl Arc {
    pub fn start(&self) -> (f64, Point) {
        self.samples[0]
    }

    pub fn end(&self) -> (f64, Point) {
        *self.samples.last().expect("arc has samples")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventRecord {
    pub t: f64,
    pub p: Point,
    pub event: Event,
}

/// Arcs in order; times are signed, so a backward trajectory has decreasing `t`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HybridTrajectory {
    pub arcs: Vec<Arc>,
    pub events: Vec<EventRecord>,
    pub total_time: f64,
    pub direction: Direction,
}

impl HybridTrajectory {
    pub fn end_point(&self) -> Point {
        self.arcs.last().map(|a| a.end().1).unwrap_or_default()
    }

    pub fn final_event(&self) -> Event {
        self.arcs.last().map(|a| a.exit_event).unwrap_or(Event::Start)
    }

    pub fn count(&self, ev: Event) -> usize {
        self.events.iter().filter(|e| e.event == ev).count()
    }
}

struct Outcome {
    arc: Arc,
    next: Option<(ArcKind, Point, Event)>,
    s_end: f64,
}

struct Flow<'a> {
    sys: &'a FilippovSystem,
    alpha: &'a Params,
    opts: IntegratorOptions,
    dir: f64,
    stop: Option<&'a Section>,
    t_max: f64,
    events: Vec<EventRecord>,
}

/// Depth below `Σ` that still counts as touching it.
fn graze_depth(opts: &IntegratorOptions) -> f64 {
    opts.eps_int()
}

fn arm_guard(opts: &IntegratorOptions) -> f64 {
    2.0 * opts.event_tol
}

impl Flow<'_> {
    fn field(&self, p: Point, side: Side) -> [f64; 2] {
        let v = self.sys.eval_side_unchecked(p, side, self.alpha);
        [self.dir * v[0], self.dir * v[1]]
    }

    fn z2h(&self, x: f64, side: Side) -> f64 {
        self.sys.lie_derivatives(x, side, self.alpha).map(|v| v.1).unwrap_or(f64::NAN)
    }

    fn record(&mut self, s: f64, p: Point, event: Event) -> Result<()> {
        self.events.push(EventRecord { t: self.dir * s, p, event });
        if self.events.len() > self.opts.max_events {
            return Err(Error::MaxEventsExceeded { events: self.opts.max_events });
        }
        Ok(())
    }

    fn touch(&mut self, s: f64, p: Point, last: &mut f64) -> Result<()> {
        if s - *last > 1e-6 {
            self.record(s, p, Event::Grazing)?;
        }
        *last = s;
        Ok(())
    }

    /// Next arc after a standard arc on `from` lands on `Σ` at `(x, 0)`.
    fn landing(&self, x: f64, from: Side) -> (ArcKind, Event) {
        let p = Point::new(x, 0.0);
        let other = from.other();
        let sigma = from.sign();
        let zo = self.field(p, other)[1];
        if sigma * zo < -TANGENCY_TOL {
            (other.into(), Event::BoundaryHit)
        } else if sigma * zo > TANGENCY_TOL {
            (ArcKind::Sliding, Event::SlidingEntry)
        } else if other.sign() * self.z2h(x, other) > 0.0 {
            (other.into(), Event::BoundaryHit)
        } else {
            (ArcKind::Sliding, Event::SlidingEntry)
        }
    }

    fn section_hit<const N: usize, F>(
        &self,
        rhs: &mut F,
        rec: &StepRecord<N>,
        point: impl Fn(&[f64; N]) -> Point,
        forward_vel: impl Fn(Point) -> [f64; 2],
    ) -> Result<Option<(f64, [f64; N])>>
    where
        F: FnMut(&[f64; N]) -> [f64; N],
    {
        let Some(sec) = self.stop else { return Ok(None) };
        let v0 = sec.value(point(&rec.y0));
        let v1 = sec.value(point(&rec.y1));
        if !(v0 * v1 < 0.0 || (v1 == 0.0 && v0 != 0.0)) {
            return Ok(None);
        }
        let (t, y) = locate_event(rhs, rec, |y| sec.value(point(y)), self.opts.event_tol)?;
        let p = point(&y);
        if sec.accepts(p, forward_vel(p)) {
            Ok(Some((t, y)))
        } else {
            Ok(None)
        }
    }

    fn standard(&mut self, side: Side, p0: Point, s0: f64, entry: Event) -> Result<Outcome> {
        let sigma = side.sign();
        let dir = self.dir;
        let sys = self.sys;
        let alpha = self.alpha;
        let mut rhs = |y: &[f64; 2]| {
            let v = sys.eval_side_unchecked(Point::new(y[0], y[1]), side, alpha);
            [dir * v[0], dir * v[1]]
        };
        let mut st = Stepper::new(&mut rhs, s0, [p0.x, p0.y], self.opts)?;
        let mut samples = alloc::vec![(dir * s0, p0)];
        let guard = arm_guard(&self.opts);
        let depth = graze_depth(&self.opts);
        let mut armed = sigma * p0.y > guard;
        let mut last_touch = f64::NEG_INFINITY;
        let finish = |samples: Vec<(f64, Point)>, exit, next, s_end| Outcome {
            arc: Arc { kind: side.into(), samples, entry_event: entry, exit_event: exit },
            next,
            s_end,
        };
        loop {
            let rec = st.step(&mut rhs, self.t_max)?;
            let to_p = |y: &[f64; 2]| Point::new(y[0], y[1]);
            let fwd = |p: Point| {
                let v = sys.eval_side_unchecked(p, side, alpha);
                [v[0], v[1]]
            };
            let sec = self.section_hit(&mut rhs, &rec, to_p, fwd)?;
            let e0 = sigma * rec.y0[1];
            let e1 = sigma * rec.y1[1];
            let mut landing: Option<(f64, [f64; 2])> = None;
            if armed {
                if e1 <= 0.0 {
                    landing = Some(locate_event(&mut rhs, &rec, |y| sigma * y[1], self.opts.event_tol)?);
                } else if let Some((tm, em)) = rec.interior_min_signed(1, sigma) {
                    if em < -depth {
                        let s1 = tm - rec.t0;
                        let mut ev = |y: &[f64; 2]| sigma * y[1];
                        landing = Some(locate_between(&mut rhs, &rec, &mut ev, 0.0, e0, s1, em, self.opts.event_tol)?);
                    } else if em <= depth && sec.is_none_or(|(ts, _)| ts > tm) {
                        let y = rec.hermite_state(tm);
                        self.touch(tm, Point::new(y[0], 0.0), &mut last_touch)?;
                    }
                } else if e1 <= depth && sigma * rec.f0[1] < 0.0 && sigma * rec.f1[1] >= 0.0 && sec.is_none() {
                    self.touch(rec.t1, Point::new(rec.y1[0], 0.0), &mut last_touch)?;
                }
            } else if e1 > guard {
                armed = true;
            } else if e1 < -depth && e0 <= guard {
                landing = Some((rec.t0, rec.y0));
            }
            // A located landing may be a grazing touch that continues in the same zone.
            if let Some((tl, yl)) = landing {
                let x = yl[0];
                let v = sigma * self.field(Point::new(x, 0.0), side)[1];
                let z2 = sigma * self.z2h(x, side);
                let is_graze = z2 > 0.0 && v * v / (2.0 * z2) <= depth;
                if is_graze && sec.is_none_or(|(ts, _)| ts > tl) {
                    self.touch(tl, Point::new(x, 0.0), &mut last_touch)?;
                    armed = false;
                    landing = None;
                }
            }
            let first = match (sec, landing) {
                (Some(s), Some(l)) => {
                    if s.0 <= l.0 {
                        (Some(s), None)
                    } else {
                        (None, Some(l))
                    }
                }
                other => other,
            };
            match first {
                (Some((ts, ys)), _) => {
                    let p = Point::new(ys[0], ys[1]);
                    samples.push((dir * ts, p));
                    self.record(ts, p, Event::SectionHit)?;
                    return Ok(finish(samples, Event::SectionHit, None, ts));
                }
                (None, Some((tl, yl))) => {
                    let p = Point::new(yl[0], 0.0);
                    samples.push((dir * tl, p));
                    let (kind, ev) = self.landing(p.x, side);
                    self.record(tl, p, ev)?;
                    return Ok(finish(samples, ev, Some((kind, p, ev)), tl));
                }
                _ => {}
            }
            samples.push((dir * st.t, Point::new(st.y[0], st.y[1])));
            if st.t >= self.t_max {
                let p = Point::new(st.y[0], st.y[1]);
                self.record(st.t, p, Event::TimeOut)?;
                return Ok(finish(samples, Event::TimeOut, None, st.t));
            }
        }
    }

    fn sliding(&mut self, x0: f64, s0: f64, entry: Event) -> Result<Outcome> {
        let dir = self.dir;
        let sys = self.sys;
        let alpha = self.alpha;
        let mut rhs = |y: &[f64; 1]| [dir * sliding_velocity(sys, y[0], alpha).unwrap_or(f64::NAN)];
        let up = |x: f64| dir * sys.eval_side_unchecked(Point::new(x, 0.0), Side::Upper, alpha)[1];
        let lo = |x: f64| dir * sys.eval_side_unchecked(Point::new(x, 0.0), Side::Lower, alpha)[1];
        let mut samples = alloc::vec![(dir * s0, Point::new(x0, 0.0))];
        let finish = |samples: Vec<(f64, Point)>, exit, next, s_end| Outcome {
            arc: Arc { kind: ArcKind::Sliding, samples, entry_event: entry, exit_event: exit },
            next,
            s_end,
        };
        if rhs(&[x0])[0].abs() < 1e-12 {
            let p = Point::new(x0, 0.0);
            self.record(s0, p, Event::PseudoEquilibrium)?;
            return Ok(finish(samples, Event::PseudoEquilibrium, None, s0));
        }
        let mut st = Stepper::new(&mut rhs, s0, [x0], self.opts)?;
        loop {
            let rec = st.step(&mut rhs, self.t_max)?;
            let to_p = |y: &[f64; 1]| Point::new(y[0], 0.0);
            let fwd = |p: Point| [dir * rhs_velocity(sys, p.x, alpha), 0.0];
            let sec = self.section_hit(&mut rhs, &rec, to_p, fwd)?;
            let (u0, u1) = (up(rec.y0[0]), up(rec.y1[0]));
            let (l0, l1) = (lo(rec.y0[0]), lo(rec.y1[0]));
            let mut exit: Option<(f64, [f64; 1], Side)> = None;
            if u0 < 0.0 && u1 >= 0.0 {
                let (t, y) = locate_event(&mut rhs, &rec, |y| up(y[0]), self.opts.event_tol)?;
                exit = Some((t, y, Side::Upper));
            }
            if l0 > 0.0 && l1 <= 0.0 {
                let (t, y) = locate_event(&mut rhs, &rec, |y| lo(y[0]), self.opts.event_tol)?;
                if exit.is_none_or(|e| t < e.0) {
                    exit = Some((t, y, Side::Lower));
                }
            }
            if let Some((ts, ys)) = sec {
                if exit.is_none_or(|e| ts <= e.0) {
                    let p = Point::new(ys[0], 0.0);
                    samples.push((dir * ts, p));
                    self.record(ts, p, Event::SectionHit)?;
                    return Ok(finish(samples, Event::SectionHit, None, ts));
                }
            }
            if let Some((te, ye, side)) = exit {
                let p = Point::new(ye[0], 0.0);
                samples.push((dir * te, p));
                self.record(te, p, Event::FoldExit)?;
                return Ok(finish(samples, Event::FoldExit, Some((side.into(), p, Event::FoldExit)), te));
            }
            let p = Point::new(st.y[0], 0.0);
            samples.push((dir * st.t, p));
            if st.f[0].abs() < 1e-12 {
                self.record(st.t, p, Event::PseudoEquilibrium)?;
                return Ok(finish(samples, Event::PseudoEquilibrium, None, st.t));
            }
            if st.t >= self.t_max {
                self.record(st.t, p, Event::TimeOut)?;
                return Ok(finish(samples, Event::TimeOut, None, st.t));
            }
        }
    }

    /// Arc kind for a start point on `Σ` without a hint.
    fn initial_kind(&self, x: f64) -> ArcKind {
        let p = Point::new(x, 0.0);
        let zu = self.field(p, Side::Upper)[1];
        let zl = self.field(p, Side::Lower)[1];
        if zu.abs() <= TANGENCY_TOL && self.z2h(x, Side::Upper) > 0.0 {
            ArcKind::Upper
        } else if zl.abs() <= TANGENCY_TOL && self.z2h(x, Side::Lower) < 0.0 {
            ArcKind::Lower
        } else if zu < 0.0 && zl > 0.0 {
            ArcKind::Sliding
        } else if zu < 0.0 && zl < 0.0 {
            ArcKind::Lower
        } else {
            ArcKind::Upper
        }
    }
}

fn rhs_velocity(sys: &FilippovSystem, x: f64, alpha: &Params) -> f64 {
    sliding_velocity(sys, x, alpha).unwrap_or(f64::NAN)
}

impl<const N: usize> StepRecord<N> {
    /// Interior minimum of `sign · y[i]` on the Hermite interpolant.
    pub fn interior_min_signed(&self, i: usize, sign: f64) -> Option<(f64, f64)> {
        if sign > 0.0 {
            self.interior_min(i)
        } else {
            let mut neg = *self;
            neg.y0[i] = -neg.y0[i];
            neg.y1[i] = -neg.y1[i];
            neg.f0[i] = -neg.f0[i];
            neg.f1[i] = -neg.f1[i];
            neg.interior_min(i)
        }
    }
}

/// Hybrid trajectory from `start` for elapsed time `t_max`.
pub fn flow(
    sys: &FilippovSystem,
    start: Point,
    side_hint: Option<ArcKind>,
    t_max: f64,
    alpha: &Params,
    opts: &IntegratorOptions,
) -> Result<HybridTrajectory> {
    flow_until(sys, start, side_hint, t_max, alpha, opts, Direction::Forward, None)
}

/// Hybrid trajectory that additionally stops at the first accepted hit of `stop`.
#[allow(clippy::too_many_arguments)]
pub fn flow_until(
    sys: &FilippovSystem,
    start: Point,
    side_hint: Option<ArcKind>,
    t_max: f64,
    alpha: &Params,
    opts: &IntegratorOptions,
    direction: Direction,
    stop: Option<&Section>,
) -> Result<HybridTrajectory> {
    opts.validate()?;
    if !start.is_finite() {
        return Err(Error::InvalidInput { detail: "start point must be finite".into() });
    }
    let mut fl = Flow { sys, alpha, opts: *opts, dir: direction.sign(), stop, t_max, events: Vec::new() };
    let mut kind = if start.y > 0.0 {
        ArcKind::Upper
    } else if start.y < 0.0 {
        ArcKind::Lower
    } else {
        side_hint.unwrap_or_else(|| fl.initial_kind(start.x))
    };
    fl.record(0.0, start, Event::Start)?;
    let mut p = start;
    let mut s = 0.0;
    let mut entry = Event::Start;
    let mut arcs = Vec::new();
    loop {
        let out = match kind.side() {
            Some(side) => fl.standard(side, p, s, entry)?,
            None => fl.sliding(p.x, s, entry)?,
        };
        s = out.s_end;
        arcs.push(out.arc);
        match out.next {
            Some((k, q, ev)) if s < t_max => {
                kind = k;
                p = q;
                entry = ev;
            }
            _ => break,
        }
    }
    Ok(HybridTrajectory { arcs, events: fl.events, total_time: fl.dir * s, direction })
}

/// First accepted hit of `section` by the smooth flow of one side's field, ignoring `Σ`.
/// Returns the signed time and the hit point.
#[allow(clippy::too_many_arguments)]
pub fn hit_section(
    sys: &FilippovSystem,
    start: Point,
    side: Side,
    section: &Section,
    direction: Direction,
    alpha: &Params,
    opts: &IntegratorOptions,
    t_budget: f64,
) -> Result<(f64, Point)> {
    let dir = direction.sign();
    let mut rhs = |y: &[f64; 2]| {
        let v = sys.eval_side_unchecked(Point::new(y[0], y[1]), side, alpha);
        [dir * v[0], dir * v[1]]
    };
    let (t, y) = smooth_until(&mut rhs, [start.x, start.y], dir, section, opts, t_budget)?;
    Ok((dir * t, Point::new(y[0], y[1])))
}

/// Integrates a smooth augmented system whose first two components are the planar state
/// until the first accepted hit of `section`. `dir` converts the right-hand side back to
/// forward-time velocity for the normal filter.
pub fn smooth_until<const N: usize, F>(
    rhs: &mut F,
    y0: [f64; N],
    dir: f64,
    section: &Section,
    opts: &IntegratorOptions,
    t_budget: f64,
) -> Result<(f64, [f64; N])>
where
    F: FnMut(&[f64; N]) -> [f64; N],
{
    let mut st = Stepper::new(rhs, 0.0, y0, *opts)?;
    let p = |y: &[f64; N]| Point::new(y[0], y[1]);
    loop {
        let rec = match st.step(rhs, t_budget) {
            Ok(r) => r,
            Err(Error::StepSizeUnderflow { .. }) | Err(Error::Numerical { .. }) => {
                return Err(Error::NoHit { t_budget })
            }
            Err(e) => return Err(e),
        };
        let v0 = section.value(p(&rec.y0));
        let v1 = section.value(p(&rec.y1));
        if v0 * v1 < 0.0 || (v1 == 0.0 && v0 != 0.0) {
            let (t, y) = locate_event(rhs, &rec, |y| section.value(p(y)), opts.event_tol)?;
            let f = rhs(&y);
            if section.accepts(p(&y), [dir * f[0], dir * f[1]]) {
                return Ok((t, y));
            }
        } else if section.normal_sign.is_none() {
            if let Some(hit) = tangential_touch(rhs, &rec, section, opts) {
                return Ok(hit);
            }
        }
        if st.t >= t_budget {
            return Err(Error::NoHit { t_budget });
        }
    }
}

/// A step whose interpolant reaches the line tangentially, without a sign change.
fn tangential_touch<const N: usize, F>(
    rhs: &mut F,
    rec: &StepRecord<N>,
    section: &Section,
    opts: &IntegratorOptions,
) -> Option<(f64, [f64; N])>
where
    F: FnMut(&[f64; N]) -> [f64; N],
{
    let (i, c) = match section.kind {
        SectionKind::Vertical(c) => (0, c),
        SectionKind::Horizontal(c) => (1, c),
    };
    let v0 = rec.y0[i] - c;
    for sgn in [1.0, -1.0] {
        if sgn * v0 <= 0.0 {
            continue;
        }
        let (tm, m) = rec.interior_min_signed(i, sgn)?;
        if m - sgn * c <= opts.eps_int() * c.abs().max(1.0) {
            let y = super::rk::dp_step(rhs, &rec.y0, &rec.f0, tm - rec.t0).0;
            if section.in_bracket(Point::new(y[0], y[1])) {
                return Some((tm, y));
            }
        }
    }
    None
}

/// First return to the vertical section through `section`, for the upper field.
///
/// The derivative uses `P'(y₀) = exp(∫ div) · f(p₀) / f(p₁)`.
pub fn poincare_map(
    sys: &FilippovSystem,
    section: &Section,
    y0: f64,
    alpha: &Params,
    opts: &IntegratorOptions,
    t_budget: f64,
) -> Result<(f64, f64)> {
    let SectionKind::Vertical(c) = section.kind else {
        return Err(Error::InvalidInput { detail: "poincare_map needs a vertical section".into() });
    };
    let p0 = Point::new(c, y0);
    let f0 = sys.eval_side(p0, Side::Upper, alpha)?;
    let sec = Section { normal_sign: Some(f0[0].signum()), ..*section };
    let mut rhs = |y: &[f64; 3]| {
        let q = Point::new(y[0], y[1]);
        let v = sys.eval_side_unchecked(q, Side::Upper, alpha);
        [v[0], v[1], sys.divergence(q, Side::Upper, alpha)]
    };
    let (_, y) = smooth_until(&mut rhs, [c, y0, 0.0], 1.0, &sec, opts, t_budget).map_err(|e| match e {
        Error::NoHit { .. } => Error::NoReturn,
        other => other,
    })?;
    let f1 = sys.eval_side(Point::new(y[0], y[1]), Side::Upper, alpha)?;
    Ok((y[1], libm::exp(y[2]) * f0[0] / f1[0]))
}

/// Central-difference derivative of the first-return map.
pub fn poincare_map_fd(
    sys: &FilippovSystem,
    section: &Section,
    y0: f64,
    alpha: &Params,
    opts: &IntegratorOptions,
    t_budget: f64,
) -> Result<(f64, f64)> {
    let h = 1e-6 * y0.abs().max(1.0);
    let (y1, _) = poincare_map(sys, section, y0, alpha, opts, t_budget)?;
    let (yp, _) = poincare_map(sys, section, y0 + h, alpha, opts, t_budget)?;
    let (ym, _) = poincare_map(sys, section, y0 - h, alpha, opts, t_budget)?;
    Ok((y1, (yp - ym) / (2.0 * h)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{symmetrize, FnField, ALPHA0};
    use alloc::sync::Arc as Rc;

    fn parabola() -> FilippovSystem {
        symmetrize(Rc::new(FnField(|p: Point, _: &Params| [1.0, 2.0 * p.x])))
    }

    fn circle() -> FilippovSystem {
        symmetrize(Rc::new(FnField(|p: Point, _: &Params| {
            let (x, y) = (p.x, p.y - 1.0);
            let r2 = x * x + y * y;
            [-y + x * (1.0 - r2), x + y * (1.0 - r2)]
        })))
    }

    #[test]
    fn parabola_orbit_is_preserved() {
        let s = parabola();
        let tr = flow(&s, Point::new(-1.0, 1.0), None, 0.9, &ALPHA0, &IntegratorOptions::default()).unwrap();
        assert_eq!(tr.arcs.len(), 1);
        assert_eq!(tr.arcs[0].kind, ArcKind::Upper);
        for (_, p) in &tr.arcs[0].samples {
            assert!((p.y - p.x * p.x).abs() < 1e-9);
        }
    }

    #[test]
    fn parabola_grazes_at_origin() {
        let s = parabola();
        let tr = flow(&s, Point::new(-1.0, 1.0), None, 2.5, &ALPHA0, &IntegratorOptions::default()).unwrap();
        assert_eq!(tr.arcs.len(), 1);
        assert_eq!(tr.arcs[0].kind, ArcKind::Upper);
        let g: Vec<_> = tr.events.iter().filter(|e| e.event == Event::Grazing).collect();
        assert_eq!(g.len(), 1);
        assert!((g[0].t - 1.0).abs() < 1e-6, "{:?}", g[0]);
        assert!((tr.total_time - 2.5).abs() < 1e-12);
    }

    #[test]
    fn constant_fields_enter_sliding() {
        let s = FilippovSystem::from_pair(
            Rc::new(FnField(|_: Point, _: &Params| [1.0, -1.0])),
            Rc::new(FnField(|_: Point, _: &Params| [1.0, 1.0])),
        );
        let tr = flow(&s, Point::new(0.0, 0.5), None, 2.0, &ALPHA0, &IntegratorOptions::default()).unwrap();
        assert_eq!(tr.arcs.len(), 2);
        assert_eq!(tr.arcs[1].kind, ArcKind::Sliding);
        let (t, p) = tr.arcs[1].start();
        assert!((t - 0.5).abs() < 1e-12 && (p.x - 0.5).abs() < 1e-12);
        assert!((tr.end_point().x - 2.0).abs() < 1e-10);
    }

    #[test]
    fn circle_section_hits() {
        let s = circle();
        let o = IntegratorOptions::default();
        let sec = Section::vertical(0.0, (1.0, 3.0));
        let (t, p) = hit_section(&s, Point::new(0.0, 2.0), Side::Upper, &sec, Direction::Forward, &ALPHA0, &o, 20.0).unwrap();
        assert!((t - 2.0 * core::f64::consts::PI).abs() < 1e-8 && (p.y - 2.0).abs() < 1e-9);
        let top = Section::horizontal(2.0, (-1.0, 1.0));
        let (t, p) = hit_section(&s, Point::ORIGIN, Side::Upper, &top, Direction::Forward, &ALPHA0, &o, 20.0).unwrap();
        assert!((t - core::f64::consts::PI).abs() < 1e-4 && p.x.abs() < 1e-4);
        let mid = Section::horizontal(1.0, (-2.0, 0.0));
        let (t, p) = hit_section(&s, Point::ORIGIN, Side::Upper, &mid, Direction::Backward, &ALPHA0, &o, 20.0).unwrap();
        assert!((t + core::f64::consts::FRAC_PI_2).abs() < 1e-8 && (p.x + 1.0).abs() < 1e-8);
    }

    #[test]
    fn circle_floquet_multiplier() {
        let s = circle();
        let o = IntegratorOptions::default();
        let sec = Section::vertical(0.0, (1.0, 3.0));
        let (y1, d) = poincare_map(&s, &sec, 2.0, &ALPHA0, &o, 20.0).unwrap();
        assert!((y1 - 2.0).abs() < 1e-9);
        let expect = libm::exp(-4.0 * core::f64::consts::PI);
        assert!(((d - expect) / expect).abs() < 1e-6, "{d} vs {expect}");
        let (up, _) = poincare_map(&s, &sec, 2.1, &ALPHA0, &o, 20.0).unwrap();
        assert!(up > 2.0 && up < 2.1);
        let (dn, _) = poincare_map(&s, &sec, 1.9, &ALPHA0, &o, 20.0).unwrap();
        assert!(dn > 1.9 && dn < 2.0);
    }
}

//! Run configuration: a sectioned TOML document, merged from defaults, an optional file and
//! command-line overrides, then validated before any computation.

use grazing_core::field::{Monomial, Polynomial, PolynomialField};
use grazing_core::integrate::hybrid::{ArcKind, Direction};
use grazing_core::integrate::rk::IntegratorOptions;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SYSTEM_IDS: [&str; 4] = ["thompson_hunt", "circle", "parabola", "polynomial"];
pub const CURVE_NAMES: [&str; 6] = ["all", "psi1", "psi2", "psi3", "psi4", "psi5"];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub params: ParamsConfig,
    pub tolerances: Tolerances,
    pub simulate: SimulateConfig,
    pub tangencies: TangencyConfig,
    pub quantities: QuantitiesConfig,
    pub portrait: PortraitConfig,
    pub grid: GridConfig,
    pub boundary: BoundaryConfig,
    pub output: OutputConfig,
    pub run: RunSection,
}

/// Named system, or `polynomial` with an inline upper field whose symmetric partner is
/// generated. Thompson–Hunt uses `a`, and `b` when given (otherwise `b = ϑ(a)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub id: String,
    pub a: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Phase of the section point along the grazing cycle.
    pub section_phase: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<InlineField>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig { id: "thompson_hunt".into(), a: -1.0, b: None, section_phase: 0.25, upper: None }
    }
}

/// Terms `[i, j, c]` meaning `c·xⁱ·yʲ`; `*_alpha1` and `*_alpha2` multiply the parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InlineField {
    pub f: Vec<[f64; 3]>,
    pub g: Vec<[f64; 3]>,
    pub f_alpha1: Vec<[f64; 3]>,
    pub f_alpha2: Vec<[f64; 3]>,
    pub g_alpha1: Vec<[f64; 3]>,
    pub g_alpha2: Vec<[f64; 3]>,
}

impl InlineField {
    pub fn to_field(&self) -> Result<PolynomialField, CliError> {
        let poly = |terms: &[[f64; 3]], name: &str| -> Result<Polynomial, CliError> {
            terms
                .iter()
                .map(|&[i, j, c]| {
                    let exp_ok = |e: f64| e >= 0.0 && e.fract() == 0.0 && e <= 32.0;
                    if !exp_ok(i) || !exp_ok(j) || !c.is_finite() {
                        return Err(CliError::config(format!("system.upper.{name}: bad term [{i}, {j}, {c}]")));
                    }
                    Ok(Monomial { i: i as u32, j: j as u32, c })
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Polynomial)
        };
        Ok(PolynomialField {
            f: [poly(&self.f, "f")?, poly(&self.f_alpha1, "f_alpha1")?, poly(&self.f_alpha2, "f_alpha2")?],
            g: [poly(&self.g, "g")?, poly(&self.g_alpha1, "g_alpha1")?, poly(&self.g_alpha2, "g_alpha2")?],
        })
    }
}

/// `alpha` is used unless `beta` is given, for the commands that accept either.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub alpha: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    pub event: f64,
    pub max_step: f64,
    pub max_events: usize,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let o = IntegratorOptions::default();
        Tolerances {
            rel: o.rel_tol,
            abs: o.abs_tol,
            event: o.event_tol,
            max_step: o.max_step,
            max_events: o.max_events,
            max_steps: o.max_steps,
        }
    }
}

impl Tolerances {
    pub fn options(&self) -> IntegratorOptions {
        IntegratorOptions {
            rel_tol: self.rel,
            abs_tol: self.abs,
            event_tol: self.event,
            max_step: self.max_step,
            max_events: self.max_events,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub from: [f64; 2],
    pub t: f64,
    /// `forward` or `backward`.
    pub direction: String,
    /// `auto`, `upper`, `lower` or `sliding`.
    pub side: String,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { from: [0.0, 1.0], t: 10.0, direction: "forward".into(), side: "auto".into() }
    }
}

impl SimulateConfig {
    pub fn direction(&self) -> Direction {
        if self.direction == "backward" {
            Direction::Backward
        } else {
            Direction::Forward
        }
    }

    pub fn side_hint(&self) -> Option<ArcKind> {
        match self.side.as_str() {
            "upper" => Some(ArcKind::Upper),
            "lower" => Some(ArcKind::Lower),
            "sliding" => Some(ArcKind::Sliding),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TangencyConfig {
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for TangencyConfig {
    fn default() -> Self {
        TangencyConfig { x_min: -1.0, x_max: 1.0 }
    }
}

/// With `strict`, the quantities are computed at the strict tolerances (1e-12 / 1e-14)
/// instead of `[tolerances]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantitiesConfig {
    pub strict: bool,
}

impl Default for QuantitiesConfig {
    fn default() -> Self {
        QuantitiesConfig { strict: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PortraitConfig {
    /// Write one trajectory CSV per detected object.
    pub trajectories: bool,
}

impl Default for PortraitConfig {
    fn default() -> Self {
        PortraitConfig { trajectories: true }
    }
}

/// `|β₁|` grid, as fractions of the cycle diameter, shared by `boundary` and `diagram`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub beta1_min: f64,
    pub beta1_max: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { beta1_min: 1e-3, beta1_max: 1e-2, points: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    /// `all` or one of `psi1` … `psi5`.
    pub curve: String,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig { curve: "all".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "grazing-out".into() }
    }
}

/// `jobs = 0` uses every available core.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub jobs: usize,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("config: {}", e.message())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::config(msg));
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !SYSTEM_IDS.contains(&self.system.id.as_str()) {
            return bad(format!("system.id = {:?}; expected one of {SYSTEM_IDS:?}", self.system.id));
        }
        if (self.system.id == "polynomial") != self.system.upper.is_some() {
            return bad("system.upper must be given exactly when system.id = \"polynomial\"".into());
        }
        if let Some(u) = &self.system.upper {
            u.to_field()?;
        }
        if !finite(&[self.system.a]) || !self.system.b.is_none_or(f64::is_finite) {
            return bad("system.a and system.b must be finite".into());
        }
        if !(self.system.section_phase > 0.0 && self.system.section_phase < 1.0) {
            return bad("system.section_phase must lie in (0, 1)".into());
        }
        if !finite(&self.params.alpha) || !self.params.beta.is_none_or(|b| finite(&b)) {
            return bad("params.alpha and params.beta must be finite".into());
        }
        if self.tolerances.options().validate().is_err() {
            return bad("tolerances must be positive".into());
        }
        let s = &self.simulate;
        if !finite(&s.from) || !(s.t.is_finite() && s.t > 0.0) {
            return bad("simulate.from must be finite and simulate.t positive".into());
        }
        if !["forward", "backward"].contains(&s.direction.as_str()) {
            return bad(format!("simulate.direction = {:?}; expected forward or backward", s.direction));
        }
        if !["auto", "upper", "lower", "sliding"].contains(&s.side.as_str()) {
            return bad(format!("simulate.side = {:?}; expected auto, upper, lower or sliding", s.side));
        }
        let t = &self.tangencies;
        if !(finite(&[t.x_min, t.x_max]) && t.x_min < t.x_max) {
            return bad("tangencies.x_min must be below tangencies.x_max".into());
        }
        let g = &self.grid;
        if !(g.beta1_min > 0.0 && g.beta1_min < g.beta1_max && g.beta1_max.is_finite()) || g.points < 6 {
            return bad("grid needs 0 < beta1_min < beta1_max and at least 6 points".into());
        }
        if !CURVE_NAMES.contains(&self.boundary.curve.as_str()) {
            return bad(format!("boundary.curve = {:?}; expected one of {CURVE_NAMES:?}", self.boundary.curve));
        }
        if self.output.dir.is_empty() {
            return bad("output.dir must not be empty".into());
        }
        Ok(())
    }
}

//! Named systems and the inline polynomial definition.

use std::sync::Arc;

use grazing_core::field::symmetrize;
use grazing_core::models::{circle_system, find_theta, parabola_system, thompson_hunt};
use grazing_core::FilippovSystem;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

/// The system actually built, with every parameter resolved.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedSystem {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Whether `b` was located as `ϑ(a)`.
    pub b_from_theta: bool,
}

pub fn build(cfg: &RunConfig) -> Result<(FilippovSystem, ResolvedSystem), CliError> {
    let s = &cfg.system;
    let plain = |id: &str| ResolvedSystem { id: id.into(), a: None, b: None, b_from_theta: false };
    Ok(match s.id.as_str() {
        "thompson_hunt" => {
            let (b, from_theta) = match s.b {
                Some(b) => (b, false),
                None => (find_theta(s.a, &cfg.tolerances.options())?, true),
            };
            let r = ResolvedSystem { id: s.id.clone(), a: Some(s.a), b: Some(b), b_from_theta: from_theta };
            (thompson_hunt(s.a, b), r)
        }
        "circle" => (circle_system(), plain("circle")),
        "parabola" => (parabola_system(), plain("parabola")),
        "polynomial" => {
            let field = s.upper.as_ref().ok_or_else(|| CliError::config("system.upper missing"))?.to_field()?;
            (symmetrize(Arc::new(field)), plain("polynomial"))
        }
        other => return Err(CliError::config(format!("unknown system {other:?}"))),
    })
}

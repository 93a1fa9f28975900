//! Smooth and hybrid time integration.

pub mod hybrid;
pub mod rk;

pub use hybrid::{
    flow, flow_until, hit_section, poincare_map, poincare_map_fd, Arc, ArcKind, Direction, Event,
    EventRecord, HybridTrajectory, Section, SectionKind,
};
pub use rk::IntegratorOptions;

use std::sync::OnceLock;

use grazing_core::atlas::{beta_form_at, Unfolding};
use grazing_core::checks::{event_refires, halving_changes, partition_consistent, sliding_tangency, symmetry_defect};
use grazing_core::cycles::crossing_cycles;
use grazing_core::field::{Point, ALPHA0};
use grazing_core::integrate::hybrid::{flow, ArcKind};
use grazing_core::integrate::rk::IntegratorOptions;
use grazing_core::models::{circle_system, parabola_system, thompson_hunt};
use grazing_core::variational::{grazing_cycle, DEFAULT_SECTION_PHASE};
use proptest::prelude::*;

const THETA: f64 = 0.281246770728896;

fn unfolding() -> &'static Unfolding {
    static U: OnceLock<Unfolding> = OnceLock::new();
    U.get_or_init(|| Unfolding::new(&thompson_hunt(-1.0, THETA), &IntegratorOptions::default(), DEFAULT_SECTION_PHASE).unwrap())
}

fn small_alpha() -> impl Strategy<Value = [f64; 2]> {
    [-0.02..0.02f64, -0.02..0.02f64]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn flows_from_mirrored_points_are_mirrored(
        x in -1.5..1.5f64,
        y in 0.05..2.0f64,
        t in 0.5..4.0f64,
        alpha in small_alpha(),
    ) {
        let opts = IntegratorOptions::default();
        let sys = thompson_hunt(-1.0, THETA);
        let d = symmetry_defect(&sys, Point::new(x, y), t, &alpha, &opts).unwrap();
        prop_assert!(d <= 10.0 * opts.eps_int(), "defect {d}");
    }

    #[test]
    fn boundary_labels_partition_the_axis(x in -2.0..2.0f64, alpha in small_alpha()) {
        for sys in [thompson_hunt(-1.0, THETA), circle_system(), parabola_system()] {
            if let Some(ok) = partition_consistent(&sys, x, &alpha).unwrap() {
                prop_assert!(ok);
            }
        }
    }

    #[test]
    fn sliding_field_is_tangent(x in -0.05..0.05f64, alpha in small_alpha()) {
        for sys in [thompson_hunt(-1.0, THETA), circle_system()] {
            if let Some(gy) = sliding_tangency(&sys, x, &alpha).unwrap() {
                prop_assert!(gy <= 1e-12, "|Zs h| = {gy}");
            }
        }
    }

    #[test]
    fn located_events_do_not_refire(
        x in -1.0..1.0f64,
        y in 0.05..1.5f64,
        alpha in small_alpha(),
    ) {
        let opts = IntegratorOptions::default();
        let sys = thompson_hunt(-1.0, THETA);
        if let Some(again) = event_refires(&sys, Point::new(x, y), 6.0, &alpha, &opts).unwrap() {
            prop_assert!(!again);
        }
    }

    #[test]
    fn at_most_two_crossing_cycles(u1 in -1.0..1.0f64, u2 in -1.0..1.0f64) {
        let unf = unfolding();
        let s = 1e-2 * unf.setup.scale();
        let b1 = u1 * s;
        let bf = beta_form_at(unf, [b1, u2 * b1 * b1], None).unwrap();
        prop_assert!(crossing_cycles(&bf, &unf.setup).unwrap().len() <= 2);
    }

    #[test]
    fn sliding_arcs_stay_on_the_boundary(
        x in -0.3..0.3f64,
        y in 0.01..0.3f64,
        alpha in small_alpha(),
    ) {
        let opts = IntegratorOptions::default();
        let sys = thompson_hunt(-1.0, THETA);
        let tr = flow(&sys, Point::new(x, y), None, 5.0, &alpha, &opts).unwrap();
        for arc in tr.arcs.iter().filter(|a| a.kind == ArcKind::Sliding) {
            let ymax = arc.samples.iter().map(|(_, p)| p.y.abs()).fold(0.0, f64::max);
            prop_assert!(ymax <= opts.eps_int());
        }
    }
}

#[test]
fn halving_tolerances_stays_within_estimates() {
    let opts = IntegratorOptions::default();
    for sys in [thompson_hunt(-1.0, THETA), circle_system()] {
        let gcd = grazing_cycle(&sys, &IntegratorOptions::strict(), DEFAULT_SECTION_PHASE).unwrap();
        for (name, change, estimate) in halving_changes(&sys, &gcd, &opts).unwrap() {
            assert!(change <= estimate, "{name}: change {change:e} > estimate {estimate:e}");
        }
    }
}

#[test]
fn symmetry_holds_on_the_unperturbed_circle() {
    let opts = IntegratorOptions::default();
    let sys = circle_system();
    for p in [Point::new(0.5, 1.0), Point::new(-0.3, 0.2), Point::new(1.2, 2.5)] {
        let d = symmetry_defect(&sys, p, 7.0, &ALPHA0, &opts).unwrap();
        assert!(d <= 10.0 * opts.eps_int(), "defect {d}");
    }
}

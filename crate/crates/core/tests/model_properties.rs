use proptest::prelude::*;

use resonet_core::model::{dist_to_cycle, lyapunov_l, workload_max};
use resonet_core::{CycleTrajectory, NetworkParams, TriangleState};

fn state() -> impl Strategy<Value = TriangleState> {
    prop::array::uniform5(0.0f64..2.0).prop_map(TriangleState::from_array)
}

proptest! {
    #[test]
    fn swap_is_an_involution(x in state()) {
        prop_assert_eq!(x.swap_ab().swap_ab(), x);
        prop_assert_eq!(x.total(), x.swap_ab().total());
    }

    #[test]
    fn l1_is_a_metric(x in state(), y in state(), z in state()) {
        prop_assert_eq!(x.l1(&y), y.l1(&x));
        prop_assert_eq!(x.l1(&x), 0.0);
        prop_assert!(x.l1(&z) <= x.l1(&y) + y.l1(&z) + 1e-12);
    }

    #[test]
    fn lyapunov_is_zero_or_above_threshold(x in prop::array::uniform5(0.0f64..80.0).prop_map(TriangleState::from_array)) {
        let p = NetworkParams::default();
        let l = lyapunov_l(&x, &p);
        prop_assert!(l == 0.0 || l >= p.k_threshold);
        prop_assert_eq!(l, lyapunov_l(&x.swap_ab(), &p));
        prop_assert!(l <= workload_max(&x, &p));
    }

    #[test]
    fn orbit_points_have_unit_mass(phase in 0.0f64..2.0) {
        let c = CycleTrajectory::new(&NetworkParams::default()).unwrap();
        let x = c.point(phase).unwrap();
        prop_assert!((x.total() - 1.0).abs() < 1e-12);
        prop_assert!(x.validate().is_ok());
        let (d, _) = c.distance(&x);
        prop_assert!(d < 1e-12);
    }

    #[test]
    fn half_period_shift_swaps(phase in 0.0f64..1.0) {
        let c = CycleTrajectory::new(&NetworkParams::default()).unwrap();
        let x = c.point(phase).unwrap();
        let y = c.point(phase + 1.0).unwrap();
        prop_assert!(x.swap_ab().l1(&y) < 1e-12);
    }

    #[test]
    fn distance_is_a_lower_envelope(x in state(), phases in prop::collection::vec(0.0f64..2.0, 50)) {
        let c = CycleTrajectory::new(&NetworkParams::default()).unwrap();
        let (d, phi) = dist_to_cycle(&x);
        prop_assert!((c.point(phi).unwrap().l1(&x) - d).abs() < 1e-12);
        for t in phases {
            prop_assert!(d <= c.point(t).unwrap().l1(&x) + 1e-12);
        }
    }
}

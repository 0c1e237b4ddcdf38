use nalgebra::Vector2;
use proptest::prelude::*;
use resloco_control::{com_force, dcm_control_law};

proptest! {
    #[test]
    fn control_law_is_linear_in_the_error(
        ex in -0.2f64..0.2, ez in -0.2f64..0.2, a in -5.0f64..5.0,
        kx in 0.1f64..10.0, kz in 0.1f64..10.0, vx in -1.0f64..1.0,
    ) {
        let b = 0.2673;
        let xi_ref = Vector2::new(0.3, 0.7);
        let v_ref = Vector2::new(vx, 0.7);
        let e = Vector2::new(ex, ez);
        let one = dcm_control_law(xi_ref + e, xi_ref, v_ref, [kx, kz], b) - v_ref;
        let scaled = dcm_control_law(xi_ref + e * a, xi_ref, v_ref, [kx, kz], b) - v_ref;
        prop_assert!((scaled - one * a).amax() < 1e-12);
    }

    #[test]
    fn closed_loop_error_dynamics_are_stable(ex in -0.2f64..0.2, k in 0.5f64..10.0) {
        // ξ̇ = (ξ − v)/b with ξ̇_ref = (ξ_ref − v_ref)/b gives ė = −K e.
        let b = 0.2673;
        let xi_ref = Vector2::new(0.0, 0.7);
        let v_ref = Vector2::new(-0.05, 0.7);
        let xi = xi_ref + Vector2::new(ex, 0.0);
        let v = dcm_control_law(xi, xi_ref, v_ref, [k, k], b);
        let e_dot = (xi - v) / b - (xi_ref - v_ref) / b;
        prop_assert!((e_dot.x + k * ex).abs() < 1e-12);
    }

    #[test]
    fn com_force_is_linear(dx in -1.0f64..1.0, dz in -1.0f64..1.0, a in -3.0f64..3.0, m in 1.0f64..50.0) {
        let b = 0.2673;
        let x = Vector2::new(0.1, 0.7);
        let f1 = com_force(x, x - Vector2::new(dx, dz), m, b);
        let f2 = com_force(x, x - Vector2::new(dx, dz) * a, m, b);
        prop_assert!((f2 - f1 * a).amax() < 1e-9 * (1.0 + f1.amax()));
    }
}

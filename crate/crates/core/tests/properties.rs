use nalgebra::{Matrix3, Rotation3, Vector3, Vector4};
use proptest::prelude::*;

use softarm::actuation::{periodic_pressures, pressure_forces, merge_cavities, PeriodicSignalConfig};
use softarm::controller::{controller_step, ControllerConfig, ControllerState};
use softarm::materials::{snh_energy_density, snh_first_piola, StableNeoHookeanParams};
use softarm::mesh::{generate_arm, ArmParams, Point, CAVITY_GROUPS};

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn rotation() -> impl Strategy<Value = Rotation3<f64>> {
    (vec3(1.0), 0.0..std::f64::consts::TAU).prop_map(|(axis, angle)| {
        let axis = if axis.norm() < 1e-3 { Vector3::z() } else { axis };
        Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn controller_pressures_stay_in_bounds(
        tips in prop::collection::vec(vec3(0.05), 1..200),
        target in vec3(0.03),
        anti_windup in any::<bool>(),
    ) {
        let cfg = ControllerConfig { anti_windup, ..ControllerConfig::default() };
        let mut state = ControllerState::default();
        for tip in &tips {
            let out = controller_step(&target, tip, &mut state, &cfg);
            prop_assert!(out.e_k >= 0.0);
            prop_assert!(state.pressures.iter().all(|&p| (cfg.p_min..=cfg.p_max).contains(&p)));
        }
    }

    #[test]
    fn controller_increment_follows_demand_signs(tip in vec3(0.03), target in vec3(0.03)) {
        let cfg = ControllerConfig::default();
        let mut state = ControllerState::new(Vector4::repeat(0.65));
        let out = controller_step(&target, &tip, &mut state, &cfg);
        for i in 0..4 {
            prop_assert!(out.increment[i] * out.demand[i] >= 0.0);
        }
    }

    #[test]
    fn snh_is_frame_indifferent(r in rotation(), m in prop::array::uniform9(-0.3f64..0.3), mu in 0.1f64..10.0, lambda in 0.0f64..50.0) {
        let p = StableNeoHookeanParams::from_lame(mu, lambda).unwrap();
        let f = Matrix3::identity() + Matrix3::from_row_slice(&m);
        let rf = r.matrix() * f;
        let (e, er) = (snh_energy_density(&f, &p), snh_energy_density(&rf, &p));
        prop_assert!((e - er).abs() <= 1e-12 * (1.0 + e.abs()));
        // P(RF) = R P(F)
        let diff = snh_first_piola(&rf, &p) - r.matrix() * snh_first_piola(&f, &p);
        prop_assert!(diff.norm() <= 1e-12 * (1.0 + snh_first_piola(&f, &p).norm()));
    }

    #[test]
    fn snh_rest_state_is_stress_free(r in rotation(), mu in 0.1f64..10.0, lambda in 0.0f64..50.0) {
        let p = StableNeoHookeanParams::from_lame(mu, lambda).unwrap();
        let stress = snh_first_piola(r.matrix(), &p);
        prop_assert!(stress.norm() <= 1e-12 * mu);
        prop_assert!(snh_energy_density(r.matrix(), &p).abs() <= 1e-12 * mu);
    }

    #[test]
    fn periodic_split_sums_to_the_offset(t in 0.0f64..200.0) {
        let cfg = PeriodicSignalConfig::default();
        let (l, r) = periodic_pressures(t, &cfg);
        let p = merge_cavities(l, r);
        prop_assert_eq!((p[1] + p[3]) + (p[0] + p[2]), 2.0 * cfg.p0);
        prop_assert!(p.iter().all(|&x| (0.0..=0.65).contains(&x)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cavity_loads_stay_balanced_under_rigid_motion(r in rotation(), shift in vec3(1.0), p in 0.01f64..2.0) {
        let params = ArmParams { element_size: 0.02, ..ArmParams::default() };
        let arm = generate_arm(&params).unwrap();
        let q: Vec<Point> = arm.spa.vertices.iter().map(|x| r * x + shift).collect();
        for name in CAVITY_GROUPS {
            let tris = &arm.spa.tri_group(name).unwrap().triangles;
            let (f, _) = pressure_forces(tris, &q, p);
            let area: f64 = tris.iter().map(|&[a, b, c]| 0.5 * (q[b] - q[a]).cross(&(q[c] - q[a])).norm()).sum();
            let net: Point = f.iter().sum();
            let scale = p * area * (1.0 + shift.norm());
            prop_assert!(net.norm() <= 1e-12 * scale, "{name}: {}", net.norm());
        }
    }
}

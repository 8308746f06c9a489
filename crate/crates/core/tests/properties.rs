use proptest::prelude::*;

use vpgen_core::dynamics::{operator_norm, SimOptions, SimState};
use vpgen_core::radial_field::{mass_profile, verify_key_estimate, FieldSnapshot, RadialGrid};
use vpgen_core::scales::{
    classify_scale, regularize, Particle, ParticleEnsemble, Scale, Shell, SingularDatum,
};
use vpgen_core::VpError;

fn particles(max: usize) -> impl Strategy<Value = Vec<Particle>> {
    prop::collection::vec(
        (0.01f64..1.9, -1.0f64..1.0, 0.0f64..0.5, 0.001f64..1.0)
            .prop_map(|(r, vr, l, m)| Particle { r, vr, l, m }),
        1..max,
    )
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 48,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn sampled_mass_is_exact(mass in 0.01f64..100.0, n in 50usize..3000, seed in any::<u64>()) {
        let d = SingularDatum::cold_ball(mass, 1.0, 1.0).unwrap();
        let e = regularize(&d, 0.5, n, seed).unwrap();
        prop_assert_eq!(e.particles.iter().map(|p| p.m).sum::<f64>(), mass);
        let mut reversed = e.particles.clone();
        reversed.reverse();
        prop_assert_eq!(reversed.iter().map(|p| p.m).sum::<f64>(), mass);
    }

    #[test]
    fn shell_samples_stay_in_their_shell(radius in 0.5f64..2.0, mass in 0.1f64..3.0, s in 0.05f64..0.5) {
        let d = SingularDatum::shells(vec![Shell { radius, velocity: 0.0, mass }], 1.0).unwrap();
        let e = match regularize(&d, s, 500, 0) {
            Err(VpError::ShellTouchesOrigin { .. }) => return Ok(()),
            other => other.unwrap(),
        };
        prop_assert!(e.particles.iter().all(|p| (p.r - radius).abs() <= e.radial_width));
        prop_assert_eq!(e.particles.iter().map(|p| p.m).sum::<f64>(), mass);
    }

    #[test]
    fn enclosed_mass_is_monotone(ps in particles(200)) {
        let e = ParticleEnsemble::from_particles(ps, 1.0);
        let grid = RadialGrid::uniform(2.0, 37).unwrap();
        let m = mass_profile(&e, &grid);
        prop_assert!(m.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!((m.last().unwrap() - e.total_mass).abs() <= 1e-12 * e.total_mass);
    }

    #[test]
    fn field_obeys_pointwise_and_key_bounds(ps in particles(200)) {
        let e = ParticleEnsemble::from_particles(ps, 1.0);
        let grid = RadialGrid::uniform(2.0, 40).unwrap();
        let snap = FieldSnapshot::build(&e, &grid).unwrap();
        prop_assert!(snap.pointwise_bound_excess() <= 1e-12 * e.total_mass);
        // M(r) <= min(M, (4 pi / 3) sup(rho) r^3) for a bin-constant density
        let ceiling = (4.0 * std::f64::consts::PI / 3.0).powf(2.0 / 3.0);
        prop_assert!(verify_key_estimate(&snap).unwrap() <= ceiling * (1.0 + 1e-12));
    }

    #[test]
    fn steps_conserve_mass_and_angular_momentum(ps in particles(60), dt in 1e-4f64..1e-2) {
        let e = ParticleEnsemble::from_particles(ps, 1.0);
        let mut s = SimState::new(&e, SimOptions::default()).unwrap();
        for _ in 0..20 {
            s.step(dt).unwrap();
        }
        let out = s.particles();
        // arbitrary weights: summation order changes the last bits
        prop_assert!((s.mass() - e.total_mass).abs() <= 1e-12 * e.total_mass);
        for (a, b) in out.iter().zip(&e.particles) {
            prop_assert_eq!(a.l, b.l);
            prop_assert_eq!(a.m, b.m);
            prop_assert!(a.r >= 0.0);
        }
        prop_assert!(s.p_sup.is_finite() && s.q_sup >= e.max_radius());
    }

    #[test]
    fn tangent_keeps_unit_determinant(r in 0.5f64..1.5, vr in -0.3f64..0.3, l in 0.2f64..1.2) {
        let e = ParticleEnsemble::from_particles(vec![Particle { r, vr, l, m: 1e-9 }], 1.0);
        let opts = SimOptions { central_mass: 1.0, track_tangent: true, ..SimOptions::default() };
        let mut s = SimState::new(&e, opts).unwrap();
        for _ in 0..200 {
            s.step(1e-3).unwrap();
        }
        if let Some(t) = s.tangents().unwrap()[0] {
            let det = t[0] * t[3] - t[1] * t[2];
            prop_assert!((det - 1.0).abs() < 1e-9);
            prop_assert!(operator_norm(&t) >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn power_of_log_classes_nest(p in 0.5f64..4.0, q in 0.5f64..4.0) {
        let scale = Scale::power_of_log(p).unwrap();
        if q <= p {
            prop_assert!(classify_scale(&scale, q, 1).unwrap().member);
        }
    }
}

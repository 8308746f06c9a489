use std::f64::consts::PI;

use vpgen_core::radial_field::{
    check_vanishing_conditions, cic_profiles, force_at, mass_profile, solve_vanishing_at_infinity,
    verify_key_estimate, ConvolutionSolver, FieldSnapshot, RadialDensity, RadialGrid,
    VanishingRepresentative,
};
use vpgen_core::scales::{regularize, Particle, ParticleEnsemble, SingularDatum};
use vpgen_core::VpError;

/// Potential of a uniform ball of mass `m` and radius `a`, gamma = 1.
fn ball_potential(m: f64, a: f64, r: f64) -> f64 {
    if r < a {
        -m * (3.0 * a * a - r * r) / (2.0 * a * a * a)
    } else {
        -m / r
    }
}

/// Unit ball split into `j` equal-mass shells; one particle at the mass
/// midpoint of each shell. Returns the particles and the shell boundaries.
fn equal_mass_ball(j: usize) -> (ParticleEnsemble, Vec<f64>) {
    let edges: Vec<f64> = (0..=j).map(|k| (k as f64 / j as f64).cbrt()).collect();
    let m = 1.0 / j as f64;
    let particles = (0..j)
        .map(|k| Particle {
            r: ((k as f64 + 0.5) / j as f64).cbrt(),
            vr: 0.0,
            l: 0.0,
            m,
        })
        .collect();
    (ParticleEnsemble::from_particles(particles, 1.0), edges)
}

fn single(r: f64, m: f64) -> ParticleEnsemble {
    ParticleEnsemble::from_particles(
        vec![Particle {
            r,
            vr: 0.0,
            l: 0.0,
            m,
        }],
        1.0,
    )
}

#[test]
fn enclosed_mass_of_equal_mass_ball() {
    let (e, edges) = equal_mass_ball(1000);
    let grid = RadialGrid::new(edges.clone()).unwrap();
    let mass = mass_profile(&e, &grid);
    for (k, (&r, &m)) in edges.iter().zip(&mass).enumerate() {
        assert!(
            (m - r.powi(3)).abs() < 1e-12,
            "node {k}: {m} vs {}",
            r.powi(3)
        );
    }
}

#[test]
fn enclosed_mass_is_a_step() {
    let e = single(0.5, 2.0);
    let grid = RadialGrid::uniform(1.0, 4).unwrap();
    assert_eq!(mass_profile(&e, &grid), vec![0.0, 0.0, 0.0, 2.0, 2.0]);
}

#[test]
fn force_counts_half_of_a_particle_on_the_sphere() {
    let e = single(0.5, 1.0);
    assert_eq!(force_at(&e, 0.5), 2.0);
    assert_eq!(force_at(&e, 0.25), 0.0);
    assert_eq!(force_at(&e, 1.0), 1.0);
    assert_eq!(force_at(&e, 0.0), 0.0);
}

#[test]
fn potential_of_equal_mass_ball_is_exact() {
    let (e, mut edges) = equal_mass_ball(1000);
    edges.extend([1.5, 2.0]);
    let grid = RadialGrid::new(edges).unwrap();
    let snap = FieldSnapshot::build(&e, &grid).unwrap();
    for (&r, &u) in grid.nodes().iter().zip(&snap.potential) {
        let exact = ball_potential(1.0, 1.0, r);
        assert!((u - exact).abs() < 1e-12, "r={r}: {u} vs {exact}");
    }
    assert!((snap.potential[0] + 1.5).abs() < 1e-12);
    for (&r, &f) in grid.nodes().iter().zip(&snap.force) {
        let exact = if r < 1.0 { r } else { 1.0 / (r * r) };
        assert!((f - exact).abs() < 1e-12);
    }
}

#[test]
fn pointwise_bound_holds_for_sampled_data() {
    let d = SingularDatum::cold_ball(1.0, 1.0, 1.0).unwrap();
    let e = regularize(&d, 0.25, 20_000, 3).unwrap();
    let grid = RadialGrid::with_spacing(2.0, 1.0 / 64.0).unwrap();
    let snap = FieldSnapshot::build(&e, &grid).unwrap();
    assert!(snap.pointwise_bound_excess() <= 1e-12);
    let ratio = verify_key_estimate(&snap).unwrap();
    assert!(ratio > 0.0 && ratio <= 4.0, "{ratio}");
}

#[test]
fn key_ratio_of_uniform_ball() {
    let (e, edges) = equal_mass_ball(1000);
    let snap = FieldSnapshot::build(&e, &RadialGrid::new(edges).unwrap()).unwrap();
    // sup|u'| = M / R^2, rho = 3M / (4 pi R^3)
    let exact = (4.0 * PI / 3.0).powf(2.0 / 3.0);
    assert!((verify_key_estimate(&snap).unwrap() - exact).abs() < 1e-9);
}

#[test]
fn key_estimate_rejects_empty_density() {
    let e = ParticleEnsemble::from_particles(vec![], 1.0);
    let grid = RadialGrid::uniform(1.0, 4).unwrap();
    let snap = FieldSnapshot::build(&e, &grid).unwrap();
    assert!(matches!(
        verify_key_estimate(&snap),
        Err(VpError::ZeroDensity)
    ));
}

#[test]
fn support_outside_grid_is_an_error() {
    let grid = RadialGrid::uniform(1.0, 4).unwrap();
    assert!(matches!(
        FieldSnapshot::build(&single(1.5, 1.0), &grid),
        Err(VpError::SupportEscapedGrid { .. })
    ));
}

#[test]
fn cic_force_conserves_total_mass() {
    let (e, _) = equal_mass_ball(200);
    let grid = RadialGrid::uniform(2.0, 40).unwrap();
    let (_, force) = cic_profiles(&e.particles, &grid, 1.0);
    let last = *grid.nodes().last().unwrap();
    assert!((force.last().unwrap() * last * last - 1.0).abs() < 1e-12);
}

#[test]
fn convolution_matches_uniform_ball() {
    let rho = 3.0 / (4.0 * PI);
    let ball = RadialDensity::new(move |r| if r < 1.0 { rho } else { 0.0 }, Some(1.0));
    let solver = ConvolutionSolver::new(0.05).unwrap();
    let radii = [0.0, 0.5, 1.5, 2.0];
    let dual = solve_vanishing_at_infinity(&ball, 1.0, &radii, &solver).unwrap();
    let radial = dual.radial.as_ref().unwrap();
    for (k, &r) in radii.iter().enumerate() {
        let exact = ball_potential(1.0, 1.0, r);
        assert!((radial[k] - exact).abs() < 1e-10, "radial r={r}");
        assert!(
            (dual.convolution[k] - exact).abs() < 2e-3,
            "conv r={r}: {}",
            dual.convolution[k]
        );
    }
}

#[test]
fn convolution_is_translation_invariant() {
    let rho = 3.0 / (4.0 * PI);
    let solver = ConvolutionSolver::new(0.1).unwrap();
    let at_origin = RadialDensity::new(move |r| if r < 1.0 { rho } else { 0.0 }, Some(1.0));
    let shifted = RadialDensity::new(move |r| if r < 1.0 { rho } else { 0.0 }, Some(1.0))
        .centered_at([0.3, -0.2, 0.7]);
    let a = solver.solve(&at_origin, 1.0, &[[0.5, 0.0, 0.0]]).unwrap();
    let b = solver.solve(&shifted, 1.0, &[[0.8, -0.2, 0.7]]).unwrap();
    assert!((a[0] - b[0]).abs() < 1e-12);
}

#[test]
fn convolution_needs_declared_support() {
    let unbounded = RadialDensity::new(|r: f64| (-r).exp(), None);
    let solver = ConvolutionSolver::new(0.1).unwrap();
    assert!(matches!(
        solver.solve(&unbounded, 1.0, &[[0.0; 3]]),
        Err(VpError::UndeclaredSupport)
    ));
}

fn sampled(f: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
    let radii: Vec<f64> = (1..=200).map(|k| 0.05 * k as f64).collect();
    let values = radii.iter().map(|&r| f(r)).collect();
    (radii, values)
}

#[test]
fn vanishing_conditions_accept_point_mass_exterior() {
    let (r, u) = sampled(|r| ball_potential(1.0, 1.0, r));
    let check = check_vanishing_conditions(&VanishingRepresentative::new(r, u, 1.0, 0.0));
    assert!(check.cond_i && check.cond_ii);
}

#[test]
fn vanishing_conditions_reject_a_plateau() {
    // harmonic outside the support but tends to a nonzero constant
    let (r, u) = sampled(|r| ball_potential(1.0, 1.0, r) + 2.0);
    let check = check_vanishing_conditions(&VanishingRepresentative::new(r, u, 1.0, 0.0));
    assert!(!check.cond_i);
    assert!(check.cond_ii);
}

#[test]
fn vanishing_conditions_reject_sources_past_the_claim() {
    let (r, u) = sampled(|r| ball_potential(1.0, 3.0, r));
    let check = check_vanishing_conditions(&VanishingRepresentative::new(r, u, 1.0, 0.0));
    assert!(!check.cond_ii);
}

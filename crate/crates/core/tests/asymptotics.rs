use vpgen_core::asymptotics::{
    fit_exponent, linear_response, metrics_file_name, run_sweep, stability_experiment,
    verify_tangent_growth, verify_zero_order, PerturbationMode, StabilitySpec, SweepSpec,
};
use vpgen_core::scales::{Shell, SingularDatum};
use vpgen_core::VpError;

fn cold_spec(widths: Vec<f64>, n0: usize, t_end: f64) -> SweepSpec {
    SweepSpec::new(
        SingularDatum::cold_ball(1.0, 1.0, 1.0).unwrap(),
        widths,
        n0,
        t_end,
    )
}

fn stability_spec() -> StabilitySpec {
    let sweep = cold_spec(vec![0.5], 1000, 0.3);
    StabilitySpec {
        datum: sweep.datum,
        n0: 1000,
        s0: 0.5,
        t_end: 0.3,
        eta: sweep.eta,
        grid: sweep.grid,
        seed: 0,
        sample_every: 10,
    }
}

#[test]
fn exponent_fit_recovers_a_power_law() {
    let pairs: Vec<(f64, f64)> = [1.0, 0.5, 0.25, 0.125, 0.0625]
        .iter()
        .map(|&s: &f64| (s, 3.0 * s.powf(-0.75)))
        .collect();
    let fit = fit_exponent("q", &pairs).unwrap();
    assert!((fit.slope - 0.75).abs() < 1e-12);
    assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
    assert!((fit.r2 - 1.0).abs() < 1e-12);
}

#[test]
fn exponent_fit_needs_four_positive_points() {
    let pairs = [(1.0, 1.0), (0.5, 2.0), (0.25, 4.0)];
    assert!(matches!(
        fit_exponent("q", &pairs),
        Err(VpError::InsufficientData { .. })
    ));
    let pairs = [(1.0, 1.0), (0.5, 2.0), (0.25, 0.0), (0.125, 8.0)];
    assert!(matches!(
        fit_exponent("q", &pairs),
        Err(VpError::NonPositive { .. })
    ));
}

#[test]
fn sweep_writes_metrics_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = cold_spec(SweepSpec::halving_widths(0.5, 2), 1000, 0.2);
    let a = run_sweep(&spec, Some(dir.path())).unwrap();
    for s in &spec.widths {
        let path = dir.path().join(metrics_file_name(*s));
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,P,Q,"), "{}", path.display());
    }
    let b = run_sweep(&spec, None).unwrap();
    // untracked tangents are NaN, so compare renderings
    let rows = |r: &vpgen_core::asymptotics::SweepResult| {
        format!(
            "{:?}",
            r.completed().map(|(_, m)| &m.rows).collect::<Vec<_>>()
        )
    };
    assert_eq!(rows(&a), rows(&b));
}

#[test]
fn sweep_keeps_exact_mass_and_key_ratio() {
    let spec = cold_spec(SweepSpec::halving_widths(0.5, 3), 1000, 0.4);
    let result = run_sweep(&spec, None).unwrap();
    assert!(result.failures().is_empty());
    for (_, m) in result.completed() {
        assert!(m.rows.iter().all(|r| r.mass == 1.0));
        assert!(m.key_ratios.iter().all(|&k| k <= 4.0));
        assert!(m.pointwise_excess.iter().all(|&e| e <= 1e-12));
    }
}

#[test]
fn under_resolved_widths_are_recorded_and_the_sweep_continues() {
    let shell = Shell {
        radius: 1.0,
        velocity: 0.0,
        mass: 1.0,
    };
    let datum = SingularDatum::shells(vec![shell], 1.0).unwrap();
    // 8 particles at s = 1/2 cannot fill a shell; larger counts can
    let mut spec = SweepSpec::new(datum, vec![0.5, 0.25, 0.125], 8, 0.1);
    spec.n0 = 8;
    let flagged = run_sweep(&spec, None).unwrap();
    assert!(!flagged.failures().is_empty());
    spec.n0 = 2000;
    let fine = run_sweep(&spec, None).unwrap();
    assert!(fine.failures().is_empty());
    assert_eq!(fine.completed().count(), 3);
}

#[test]
fn zero_order_suite_reports_every_quantity() {
    let mut spec = cold_spec(SweepSpec::halving_widths(0.5, 4), 1000, 0.3);
    spec.capture_times = vec![0.2];
    let rows = verify_zero_order(&run_sweep(&spec, None).unwrap(), 0.2, 0.15);
    let names: Vec<&str> = rows.iter().map(|r| r.quantity.as_str()).collect();
    assert_eq!(names, ["f", "P", "u", "u'", "rho", "Z"]);
    for r in &rows {
        assert!(r.fit.is_some(), "{}", r.quantity);
        assert_eq!(r.pass, Some(true), "{}", r.quantity);
    }
}

#[test]
fn tangent_fit_requires_tracking() {
    let spec = cold_spec(SweepSpec::halving_widths(0.5, 4), 500, 0.1);
    let result = run_sweep(&spec, None).unwrap();
    assert!(matches!(
        verify_tangent_growth(&result, 0.1),
        Err(VpError::TangentDisabled)
    ));
}

#[test]
fn tangent_fit_uses_every_width() {
    let mut spec = cold_spec(SweepSpec::halving_widths(0.5, 4), 500, 0.3);
    spec.track_tangent = true;
    let fit = verify_tangent_growth(&run_sweep(&spec, None).unwrap(), 0.3).unwrap();
    assert_eq!(fit.pairs.len(), 4);
    // a 2x2 matrix with unit determinant has operator norm at least 1
    assert!(fit.pairs.iter().all(|&(_, t)| t >= 1.0 - 1e-9));
    assert!(fit.c.is_finite());
}

#[test]
fn unperturbed_copy_has_no_difference() {
    let r = stability_experiment(&stability_spec(), 0.5, 0.0, PerturbationMode::Data).unwrap();
    assert_eq!(r.d_z, 0.0);
    assert_eq!(r.amplification, 0.0);
}

#[test]
fn perturbation_must_be_small_against_the_width() {
    let err = stability_experiment(&stability_spec(), 0.25, 0.25, PerturbationMode::Data);
    assert!(matches!(err, Err(VpError::PerturbationTooLarge { .. })));
}

#[test]
fn response_is_linear_in_the_perturbation() {
    for mode in [PerturbationMode::Data, PerturbationMode::Forcing] {
        let lr = linear_response(&stability_spec(), 0.5, 1e-3, mode).unwrap();
        assert!(lr.pass, "{mode:?}: {:?}", lr.ratios);
    }
}

#[test]
fn forcing_perturbation_integrates_to_a_smaller_offset() {
    // forcing adds delta * dt per step, so its offset grows from zero
    let spec = stability_spec();
    let data = stability_experiment(&spec, 0.5, 1e-3, PerturbationMode::Data).unwrap();
    let forcing = stability_experiment(&spec, 0.5, 1e-3, PerturbationMode::Forcing).unwrap();
    assert!(forcing.d_z > 0.0 && forcing.d_z < data.d_z);
    assert!(data.history.windows(2).all(|w| w[1].1 >= w[0].1));
}

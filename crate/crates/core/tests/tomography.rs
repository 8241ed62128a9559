use photonic_quench::mesh::{chip_profile, chip_unitary, layout_dtqw};
use photonic_quench::tomography::{
    chi_square, fit, monte_carlo_errors, reconstruction_fidelity, synthesize_measurements, CircuitModel, FitOptions, MeasurementSet, Pol, DEFAULT_PAIRS,
};
use photonic_quench::{ComplexMatrix, Error, C64};

fn quick() -> FitOptions {
    FitOptions { starts: 8, hops: 4, seed: 3, ..Default::default() }
}

#[test]
fn negative_control_wrong_template() {
    let truth = chip_unitary();
    let data = synthesize_measurements(&truth, &truth, 0.01, 4, &DEFAULT_PAIRS).unwrap();
    let wrong = CircuitModel::from_template(&layout_dtqw(&chip_profile()).without_layer(3), &DEFAULT_PAIRS).unwrap();
    match fit(&data, &wrong, &quick()) {
        Err(Error::Convergence { best, .. }) => {
            assert!(best.residual > 20.0 * best.n_data as f64, "{} vs {}", best.residual, best.n_data);
        }
        other => panic!("expected a convergence error, got {other:?}"),
    }
}

#[test]
fn fit_never_worse_than_its_starts() {
    let truth = chip_unitary();
    let data = synthesize_measurements(&truth, &truth, 0.01, 9, &DEFAULT_PAIRS).unwrap();
    let model = CircuitModel::chip();
    let r = fit(&data, &model, &quick()).unwrap();
    for pol in [&r.h, &r.v] {
        assert_eq!(pol.start_values.len(), 8);
        assert!(pol.start_values.iter().all(|&s| pol.residual <= s));
        // the reported residual is the chi-square of the reported parameters
        let which = if std::ptr::eq(pol, &r.h) { Pol::H } else { Pol::V };
        let again = chi_square(&model, &pol.params, &data, which).unwrap();
        assert!((again - pol.residual).abs() <= 1e-9 * (1.0 + again));
    }
}

#[test]
fn polarization_insensitive_device() {
    let truth = chip_unitary();
    let data = synthesize_measurements(&truth, &truth, 0.0, 1, &DEFAULT_PAIRS).unwrap();
    let r = fit(&data, &CircuitModel::chip(), &FitOptions::default()).unwrap();
    assert!(r.polarization_fidelity() >= 0.999);
    assert!(reconstruction_fidelity(&r.h.unitary, &truth).unwrap() >= 0.999);
}

#[test]
fn global_phase_of_truth_is_irrelevant() {
    let truth = chip_unitary();
    let shifted = truth.scale(C64::from_polar(1.0, 1.234));
    let a = synthesize_measurements(&truth, &truth, 0.0, 1, &DEFAULT_PAIRS).unwrap();
    let b = synthesize_measurements(&shifted, &shifted, 0.0, 1, &DEFAULT_PAIRS).unwrap();
    for (x, y) in a.h.splitting.iter().flatten().zip(b.h.splitting.iter().flatten()) {
        assert!((x - y).abs() < 1e-14);
    }
    for (x, y) in a.h.visibilities.iter().zip(&b.h.visibilities) {
        assert!((x.value - y.value).abs() < 1e-12);
    }
    assert!((reconstruction_fidelity(&truth, &shifted).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn monte_carlo_reproducible_and_tight_without_noise() {
    let truth = chip_unitary();
    let model = CircuitModel::chip();
    let data = synthesize_measurements(&truth, &truth, 0.0, 2, &DEFAULT_PAIRS).unwrap();
    let r = fit(&data, &model, &quick()).unwrap();
    let a = monte_carlo_errors(&data, &model, &r, 20, 5).unwrap();
    let b = monte_carlo_errors(&data, &model, &r, 20, 5).unwrap();
    assert_eq!(a, b);
    // sigma floor of 1e-4 leaves only tiny spreads on the moduli; phases of
    // the chip's dark entries are undefined and are not checked
    assert!(a.gauge_std_h[..25].iter().all(|&s| s < 1e-3), "{:?}", a.gauge_std_h);
    let (mean, _) = a.fidelity_summary(Pol::H);
    assert!(mean > 0.99999);
    assert!(matches!(monte_carlo_errors(&data, &model, &r, 19, 5), Err(Error::Validation(_))));
}

#[test]
fn chi_square_scale_matches_data_count() {
    // at the truth, noisy data gives chi-square near the number of data points
    let truth = chip_unitary();
    let model = CircuitModel::chip();
    let ts: Vec<f64> = layout_dtqw(&chip_profile()).layers().iter().flat_map(|l| l.couplers.iter().map(|c| c.transmittance)).collect();
    let p = model.params_from(&ts, &vec![0.0; model.n_phases()]).unwrap();
    assert!(model.compile(&p).unwrap().max_abs_diff(&truth) < 1e-14);
    let mut total = 0.0;
    let mut count = 0.0;
    for seed in 0..40 {
        // small noise keeps clamping at the physical bounds rare
        let data = synthesize_measurements(&truth, &truth, 0.002, seed, &DEFAULT_PAIRS).unwrap();
        total += chi_square(&model, &p, &data, Pol::H).unwrap();
        count += data.h.len() as f64;
    }
    let ratio = total / count;
    assert!((ratio - 1.0).abs() < 0.1, "chi2 per datum {ratio}");
}

#[test]
fn file_round_trip_and_parse_errors() {
    let u: ComplexMatrix = chip_unitary();
    let data = synthesize_measurements(&u, &u, 0.01, 12, &DEFAULT_PAIRS).unwrap();
    let parsed = MeasurementSet::from_text(&data.to_text()).unwrap();
    assert_eq!(parsed, data);
    let err = MeasurementSet::from_text("n_modes = 5\nvisibility_convention = upside_down\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }));
}

use elliptica_core::elliptic::Tau;
use elliptica_core::identities::monodromy_constants;
use elliptica_core::painleve::{
    dichotomy_fit, integrate, PVIConstants, PVIState, StepperConfig, DEFAULT_HBAR_SAMPLES,
};
use num_complex::Complex64 as C;

fn start(n_tau: f64) -> PVIState {
    PVIState {
        u: C::new(0.27, 0.31),
        v: C::new(0.1, 0.05),
        tau: Tau::new(C::new(0.0, n_tau)).unwrap(),
    }
}

fn endpoint(step: Option<f64>, rtol: f64) -> C {
    let config = StepperConfig {
        fixed_step: step,
        rtol,
        atol: rtol * 1e-2,
        ..StepperConfig::default()
    };
    let tr = integrate(
        &start(0.9),
        &PVIConstants::default(),
        1,
        C::new(0.0, 1.2),
        &config,
    )
    .unwrap();
    assert!(tr.completed());
    tr.last().u
}

#[test]
fn fixed_step_converges_at_fifth_order() {
    let reference = endpoint(None, 1e-14);
    let errs: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|h| (endpoint(Some(*h), 1e-11) - reference).norm())
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 5.0).abs() < 1.0, "{errs:?}");
    }
}

#[test]
fn adaptive_and_fixed_runs_agree() {
    let a = endpoint(None, 1e-11);
    let b = endpoint(Some(1e-3), 1e-11);
    assert!((a - b).norm() < 1e-10);
}

#[test]
fn dichotomy_picks_four_constants_for_odd_rank() {
    let s = start(0.9);
    let deltas = [C::new(1e-3, 0.0), C::new(0.0, 2e-3), C::new(-1.5e-3, 5e-4)];
    let fit = dichotomy_fit(&s, &monodromy_constants(3), DEFAULT_HBAR_SAMPLES[0], 3, &deltas).unwrap();
    assert!(fit.four_constant.fit_residual < 1e-6, "{fit:?}");
    assert!(fit.single_constant.fit_residual > 1e-2, "{fit:?}");
}

#[test]
fn dichotomy_picks_single_constant_for_even_rank() {
    let s = start(0.9);
    let deltas = [C::new(1e-3, 0.0), C::new(0.0, 2e-3), C::new(-1.5e-3, 5e-4)];
    let fit = dichotomy_fit(&s, &monodromy_constants(2), DEFAULT_HBAR_SAMPLES[1], 2, &deltas).unwrap();
    assert!(fit.single_constant.fit_residual < 1e-6, "{fit:?}");
    assert!(fit.four_constant.fit_residual > 1e-2, "{fit:?}");
}

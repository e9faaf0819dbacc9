use num_complex::Complex64;
use proptest::prelude::*;

use quadham::characteristic::{closed_form_kernel, kernel_parameters, solve_characteristic};
use quadham::coefficients::{builtin_coefficients, convert_convention, Convention, ModelId, ModelSpec};
use quadham::dynamics::{evolve_second_moments, uncertainty_check, SecondMoments};
use quadham::invariants::{energy_operator_catalog, pinney_kappa, pinney_residual};
use quadham::jet::Jet;
use quadham::propagator::{propagate_gaussian, GaussianState};

fn squeezed(width: f64, x_mean: f64, chirp: f64) -> GaussianState {
    let s = 1.0 / (width * width);
    GaussianState::new(
        Complex64::new(chirp, s / 2.0),
        Complex64::new(0.0, -s * x_mean),
        Complex64::new(0.0, s * x_mean * x_mean / 2.0),
    )
    .unwrap()
}

fn model_strategy() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        (0.6..1.5f64, 0.0..0.3f64).prop_map(|(w, l)| ModelSpec::new(ModelId::CaldirolaKanai).omega0(w).lambda(l)),
        (0.6..1.5f64, 0.0..0.3f64, 0.0..0.2f64)
            .prop_map(|(w, l, m)| ModelSpec::new(ModelId::United).omega0(w).lambda(l).mu(m)),
        (0.6..1.5f64, 0.05..0.3f64, 0.3..1.0f64)
            .prop_map(|(w, l, d)| ModelSpec::new(ModelId::ModifiedParametric).omega0(w).lambda(l).delta(d)),
        (0.6..1.5f64, 0.05..0.3f64).prop_map(|(w, l)| ModelSpec::new(ModelId::ParametricSech2).omega0(w).lambda(l)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn catalog_energy_is_conserved_along_moments(
        spec in model_strategy(),
        width in 0.5..2.0f64,
        x_mean in -1.0..1.0f64,
        chirp in -0.3..0.3f64,
    ) {
        let tc = builtin_coefficients(&spec, Convention::HamiltonianForm).unwrap();
        let (_, m0) = squeezed(width, x_mean, chirp).moments(0.0).unwrap();
        let path = evolve_second_moments(&tc, &m0, 3.0, 1e-12).unwrap();
        let e0 = energy_operator_catalog(&spec, 0.0).unwrap().expectation(&m0);
        for &t in path.times() {
            let e = energy_operator_catalog(&spec, t).unwrap().expectation(&path.at(t));
            prop_assert!((e - e0).abs() <= 1e-8 * e0.abs(), "t={t} e={e} e0={e0}");
        }
    }

    #[test]
    fn energy_forms_are_positive_semidefinite(spec in model_strategy(), t in 0.0..3.0f64) {
        let e = energy_operator_catalog(&spec, t).unwrap();
        prop_assert!(e.discriminant() >= -1e-12, "{e:?}");
    }

    #[test]
    fn propagated_gaussians_respect_uncertainty(
        w in 0.6..1.5f64,
        l in 0.0..0.3f64,
        width in 0.5..2.0f64,
        x_mean in -1.0..1.0f64,
        t in 0.05..1.2f64,
    ) {
        let spec = ModelSpec::new(ModelId::CaldirolaKanai).omega0(w).lambda(l);
        let kp = closed_form_kernel(&spec, t).unwrap();
        let out = propagate_gaussian(&kp, &squeezed(width, x_mean, 0.0)).unwrap();
        let (f, s) = out.moments(t).unwrap();
        let r = uncertainty_check(&f, &s).unwrap();
        prop_assert!(r.margin >= -1e-10, "{r:?}");
    }

    #[test]
    fn numeric_kernel_matches_closed_form(spec in model_strategy(), frac in 0.1..0.9f64) {
        let eq = builtin_coefficients(&spec, Convention::EquationForm).unwrap();
        // stay well inside the first caustic
        let t = frac * 0.5 * std::f64::consts::PI / spec.omega().max(1.0);
        let path = solve_characteristic(&eq, t + 0.1, 1e-12).unwrap();
        let num = kernel_parameters(&eq, &path, t).unwrap();
        let cf = closed_form_kernel(&spec, t).unwrap();
        for (a, b) in [(num.alpha, cf.alpha), (num.beta, cf.beta), (num.gamma, cf.gamma)] {
            prop_assert!((a - b).abs() <= 1e-7 * b.abs().max(1.0), "{num:?} vs {cf:?}");
        }
    }

    #[test]
    fn convention_round_trip(spec in model_strategy(), t in 0.0..3.0f64) {
        let h = builtin_coefficients(&spec, Convention::HamiltonianForm).unwrap();
        let back = convert_convention(&convert_convention(&h, Convention::EquationForm), Convention::HamiltonianForm);
        let (a, b) = (h.eval(t), back.eval(t));
        prop_assert!((a.a - b.a).abs() + (a.b - b.b).abs() + (a.c - b.c).abs() + (a.d - b.d).abs() < 1e-14);
    }

    #[test]
    fn pinney_superposition_solves_ermakov(
        omega in 0.3..2.0f64,
        a in 0.2..3.0f64,
        b in -1.0..1.0f64,
        t in 0.0..10.0f64,
    ) {
        // u = cos ωt, v = sin ωt / ω has unit Wronskian
        let c = (1.0 + b * b) / a;
        let tt = Jet::var(t);
        let u = (tt * omega).cos();
        let v = (tt * omega).sin() / omega;
        let kappa = pinney_kappa(u, v, a, b, c);
        let r = pinney_residual(u, v, kappa, 1.0);
        prop_assert!(r.abs() <= 1e-9 * (1.0 + kappa.second.abs()), "{r}");
    }

    #[test]
    fn second_moment_norm_follows_decay(w in 0.6..1.5f64, l in 0.0..0.3f64, m in 0.0..0.3f64) {
        let spec = ModelSpec::new(ModelId::United).omega0(w).lambda(l).mu(m);
        let tc = builtin_coefficients(&spec, Convention::HamiltonianForm).unwrap();
        let m0 = SecondMoments { p2: 0.5, x2: 0.5, pxxp: 0.0, norm: 1.0, t: 0.0 };
        let path = evolve_second_moments(&tc, &m0, 2.0, 1e-12).unwrap();
        let n = path.at(2.0).norm;
        prop_assert!((n - (-2.0 * m).exp()).abs() < 1e-9, "{n}");
    }
}

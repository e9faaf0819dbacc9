use quadham::characteristic::{closed_form_kernel, ClosedFormKernel};
use quadham::coefficients::{builtin_coefficients, Convention, ModelId, ModelSpec};
use quadham::dynamics::{closed_form_expectation, evolve_second_moments, ExpectationInit, Which};
use quadham::export::CsvTable;
use quadham::gridsim::{evolve_grid, measure_moments};
use quadham::invariants::energy_operator_catalog;
use quadham::propagator::{propagate_gaussian, propagate_grid, schrodinger_residual, GaussianState, Grid};
use quadham::Error;

fn eq(spec: &ModelSpec) -> quadham::coefficients::TimeCoefficients {
    builtin_coefficients(spec, Convention::EquationForm).unwrap()
}

#[test]
fn harmonic_residual_at_half_time() {
    let spec = ModelSpec::new(ModelId::SimpleHarmonic);
    let tc = eq(&spec);
    let k = ClosedFormKernel(spec);
    // the prefactor alone contributes (h²/6)·|(ln sin t)‴/2| ≈ 1.3e-6 at h = 1e-3
    let r = schrodinger_residual(&tc, &k, 0.3, -0.2, 0.5, 1e-3).unwrap();
    assert!(r <= 3e-6, "{r:e}");
    let r2 = schrodinger_residual(&tc, &k, 0.3, -0.2, 0.5, 5e-4).unwrap();
    assert!((r / r2 - 4.0).abs() < 0.05, "{}", r / r2);
}

#[test]
fn gaussian_kernel_grid_and_crank_nicolson_agree() {
    let spec = ModelSpec::new(ModelId::CaldirolaKanai).omega0(1.0).lambda(0.1);
    let grid = Grid::span(-10.0, 10.0, 2048).unwrap();
    let g0 = GaussianState::coherent(0.5, 0.2);
    let psi0 = g0.sample(&grid);
    let t = 0.5;
    let kp = closed_form_kernel(&spec, t).unwrap();
    let exact = propagate_gaussian(&kp, &g0).unwrap().sample(&grid);
    let quad = propagate_grid(&kp, &psi0, &grid).unwrap();
    let cn = evolve_grid(&eq(&spec), &psi0, 1e-3, 500, 500).unwrap();
    assert!(exact.sup_distance(&quad) < 1e-4);
    assert!(exact.sup_distance(cn.last()) < 1e-4);
}

#[test]
fn moments_from_grid_match_moment_ode() {
    let spec = ModelSpec::new(ModelId::United).omega0(1.0).lambda(0.2).mu(0.1);
    let grid = Grid::span(-10.0, 10.0, 2048).unwrap();
    let psi0 = GaussianState::coherent(1.0, 0.0).sample(&grid);
    let ev = evolve_grid(&eq(&spec), &psi0, 1e-3, 1000, 1000).unwrap();
    let (_, m0) = measure_moments(&psi0, 0.0).unwrap();
    let ham = builtin_coefficients(&spec, Convention::HamiltonianForm).unwrap();
    let path = evolve_second_moments(&ham, &m0, 1.0, 1e-12).unwrap();
    let (_, grid_m) = measure_moments(ev.last(), 1.0).unwrap();
    let ode_m = path.at(1.0);
    for (g, o) in [(grid_m.x2, ode_m.x2), (grid_m.p2, ode_m.p2), (grid_m.pxxp, ode_m.pxxp)] {
        assert!((g - o).abs() < 1e-4, "{grid_m:?} vs {ode_m:?}");
    }
}

#[test]
fn caldirola_kanai_energy_closed_form() {
    let spec = ModelSpec::new(ModelId::CaldirolaKanai).omega0(1.0).lambda(0.15);
    let ham = builtin_coefficients(&spec, Convention::HamiltonianForm).unwrap();
    let (_, m0) = GaussianState::coherent(0.7, -0.3).moments(0.0).unwrap();
    let init = ExpectationInit::from_moments(&spec, &m0).unwrap();
    let cf = closed_form_expectation(&spec, Which::H0, init).unwrap();
    let path = evolve_second_moments(&ham, &m0, 4.0, 1e-12).unwrap();
    let h0 = |t: f64| {
        let m = path.at(t);
        let w = spec.omega0 / 2.0;
        w * (-2.0 * spec.lambda * t).exp() * m.p2 + w * (2.0 * spec.lambda * t).exp() * m.x2
    };
    for t in [0.5, 1.7, 3.9] {
        assert!((cf.eval(t) - h0(t)).abs() < 1e-8, "t={t}");
    }
}

#[test]
fn free_particle_has_no_energy_closed_form_for_heisenberg_mo() {
    let spec = ModelSpec::new(ModelId::FreeParticle);
    let init = ExpectationInit { e0: 0.5, h0: 0.5, l0: 0.0, m0: 0.0 };
    let r = closed_form_expectation(&spec, Which::H0, init);
    assert!(matches!(r, Err(Error::NoClosedForm(_))));
}

#[test]
fn invalid_models_are_validation_errors() {
    let spec = ModelSpec::new(ModelId::ModifiedParametric).delta(0.0);
    let e = builtin_coefficients(&spec, Convention::EquationForm).unwrap_err();
    assert_eq!(e.code(), "invalid_model_params");
    assert_eq!(e.module(), "coefficients");
    assert!(e.is_validation());
}

#[test]
fn catalog_energy_exports_as_csv() {
    let spec = ModelSpec::new(ModelId::ParametricSech2).omega0(1.0).lambda(0.3);
    let mut table = CsvTable::new(["t", "A", "B", "C"]);
    for k in 0..5 {
        let t = 0.5 * k as f64;
        let e = energy_operator_catalog(&spec, t).unwrap();
        table.push(vec![t, e.a, e.b, e.c]);
    }
    let back = CsvTable::read_str(&table.to_csv_string().unwrap()).unwrap();
    assert_eq!(back, table);
}

//! The acceptance checks, runnable from tests and from the command line.

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characteristic::{
    closed_form_kernel, closed_form_mu, kernel_parameters, solve_characteristic, ClosedFormKernel, KernelParameters,
};
use crate::coefficients::{builtin_coefficients, Convention, ModelId, ModelSpec, TimeCoefficients};
use crate::dynamics::{
    appendix_d_basis, cj_closed_form, cj_h0_equation_solve, closed_form_expectation, evolve_first_moments,
    evolve_second_moments, expectation_operators, uncertainty_check, BasisFunction, ExpectationInit, FirstMoments,
    Which,
};
use crate::error::{Error, Result};
use crate::gridsim::{evolve_grid, invariant_drift, measure_moments};
use crate::invariants::{
    auxiliary_residual, general_invariant, ladder_factorization, pinney_kappa, CatalogPath, OperatorPath,
    QuadraticForm,
};
use crate::jet::Jet;
use crate::propagator::{propagate_gaussian, propagate_grid, schrodinger_residual, GaussianState, Grid, GridState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Budget {
    /// Fewer samples and models; every tolerance unchanged.
    Quick,
    Full,
}

impl std::str::FromStr for Budget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Budget::Quick),
            "full" => Ok(Budget::Full),
            _ => Err(Error::InvalidInput(format!("budget must be quick or full, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    /// Worst measured value of the quantity compared against `limit`.
    pub measured: f64,
    pub limit: f64,
    pub detail: String,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} [{:>2}] {}: measured {:.3e} (limit {:.1e}){}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.limit,
            if self.detail.is_empty() { String::new() } else { format!(" -- {}", self.detail) }
        )
    }
}

pub const CRITERIA: [(u32, &str); 10] = [
    (1, "kernel consistency"),
    (2, "PDE residual"),
    (3, "invariant conservation"),
    (4, "generalized invariant and auxiliary equation"),
    (5, "closed-form expectation values"),
    (6, "elementary equation basis"),
    (7, "first moments, norm and uncertainty"),
    (8, "ladder algebra"),
    (9, "oracle cross-check"),
    (10, "convergence orders"),
];

const SEED: u64 = 0x5eed_2011;

fn params(model: ModelId) -> ModelSpec {
    ModelSpec::new(model).omega0(1.0).lambda(0.1).mu(0.05).delta(0.5)
}

fn eq(spec: &ModelSpec) -> Result<TimeCoefficients> {
    builtin_coefficients(spec, Convention::EquationForm)
}

fn ham(spec: &ModelSpec) -> Result<TimeCoefficients> {
    builtin_coefficients(spec, Convention::HamiltonianForm)
}

/// Models with a closed-form Green function other than the elementary ones.
pub const KERNEL_MODELS: [ModelId; 8] = [
    ModelId::CaldirolaKanai,
    ModelId::ModifiedCaldirolaKanai,
    ModelId::United,
    ModelId::ModifiedOscillator,
    ModelId::CjCoordinate,
    ModelId::CjMomentum,
    ModelId::ModifiedParametric,
    ModelId::ParametricSech2,
];

/// Models whose catalogued energy operator is checked for conservation.
pub const ENERGY_MODELS: [ModelId; 7] = [
    ModelId::CaldirolaKanai,
    ModelId::ModifiedCaldirolaKanai,
    ModelId::ModifiedOscillator,
    ModelId::ModifiedParametric,
    ModelId::United,
    ModelId::CjCoordinate,
    ModelId::ParametricSech2,
];

struct Tally {
    worst: f64,
    notes: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Tally { worst: 0.0, notes: Vec::new() }
    }

    fn see(&mut self, v: f64) {
        if v.is_nan() {
            self.worst = f64::NAN;
        } else if !self.worst.is_nan() {
            self.worst = self.worst.max(v);
        }
    }

    fn note(&mut self, s: String) {
        self.notes.push(s);
    }
}

fn outcome(id: u32, limit: f64, r: Result<Tally>) -> CheckOutcome {
    let name = CRITERIA[(id - 1) as usize].1.to_string();
    match r {
        Ok(t) => CheckOutcome {
            id,
            name,
            passed: t.worst <= limit,
            measured: t.worst,
            limit,
            detail: t.notes.join("; "),
        },
        Err(e) => CheckOutcome { id, name, passed: false, measured: f64::NAN, limit, detail: format!("error: {e}") },
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Sample times in `(lo, hi)` away from the zeros of the closed-form μ.
fn caustic_free_times(spec: &ModelSpec, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let m = 8 * n;
    let ok: Vec<f64> = (0..m)
        .map(|k| lo + (hi - lo) * (k as f64 + 0.5) / m as f64)
        .filter(|&t| match (closed_form_kernel(spec, t), closed_form_mu(spec, t)) {
            (Ok(kp), Ok((mu, mp))) => kp.mu.abs() > 0.05 * (mu * mu + mp * mp).sqrt(),
            _ => false,
        })
        .collect();
    let stride = (ok.len() / n).max(1);
    ok.into_iter().step_by(stride).take(n).collect()
}

fn end_time(spec: &ModelSpec, want: f64) -> f64 {
    want.min(spec.domain_end() - 0.05)
}

/// 1. Numerically assembled kernels against the closed forms.
pub fn check_kernel_consistency(budget: Budget) -> CheckOutcome {
    let run = || -> Result<Tally> {
        let mut tally = Tally::new();
        let n = if budget == Budget::Full { 20 } else { 6 };
        for model in KERNEL_MODELS {
            let spec = params(model);
            let tc = eq(&spec)?;
            let t_end = end_time(&spec, 6.0);
            let path = solve_characteristic(&tc, t_end, 1e-12)?;
            let mut worst: f64 = 0.0;
            for t in caustic_free_times(&spec, 0.05, t_end, n) {
                let num = kernel_parameters(&tc, &path, t)?;
                let cf = closed_form_kernel(&spec, t)?;
                for (a, b) in [(num.alpha, cf.alpha), (num.beta, cf.beta), (num.gamma, cf.gamma)] {
                    worst = worst.max(rel(a, b));
                }
            }
            tally.see(worst);
            tally.note(format!("{model} {worst:.1e}"));
        }
        Ok(tally)
    };
    outcome(1, 1e-7, run())
}

/// 2. Schrödinger residual of every closed-form Green function at random points.
pub fn check_pde_residual(budget: Budget) -> CheckOutcome {
    let run = || -> Result<Tally> {
        let mut tally = Tally::new();
        let mut rng = StdRng::seed_from_u64(SEED);
        let n = if budget == Budget::Full { 10 } else { 3 };
        let models = KERNEL_MODELS.iter().chain(&[ModelId::SimpleHarmonic, ModelId::FreeParticle]);
        for &model in models {
            let spec = params(model);
            let tc = eq(&spec)?;
            let kernel = ClosedFormKernel(spec);
            let hi = end_time(&spec, 2.0);
            let mut worst: f64 = 0.0;
            let mut done = 0;
            while done < n {
                let (x, y, t) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.2..hi));
                match schrodinger_residual(&tc, &kernel, x, y, t, 1e-3) {
                    Ok(r) => {
                        worst = worst.max(r);
                        done += 1;
                    }
                    Err(Error::CausticEncountered { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            tally.see(worst);
            tally.note(format!("{model} {worst:.1e}"));
        }
        Ok(tally)
    };
    outcome(2, 1e-5, run())
}

fn period(spec: &ModelSpec) -> f64 {
    match spec.model {
        // ⟨H₀⟩ grows like cosh 2t; the grid cannot hold the state for long
        ModelId::ModifiedOscillator => 1.0,
        _ => 2.0 * std::f64::consts::PI / spec.omega(),
    }
}

pub const GRID_N: usize = 2048;
pub const GRID_HALF_WIDTH: f64 = 10.0;
pub const GRID_DT: f64 = 1e-3;

fn initial_state() -> GaussianState {
    GaussianState::coherent(1.0, 0.0)
}

/// Coherent state of the energy operator at t = 0, displaced to x̄ = 1; the unit
/// state when that operator is indefinite.
fn matched_state(e0: &QuadraticForm) -> Result<GaussianState> {
    if !(e0.a > 0.0 && e0.b > 0.0) {
        return Ok(initial_state());
    }
    let s = (e0.b / e0.a).sqrt();
    GaussianState::new(Complex64::new(0.0, s / 2.0), Complex64::new(0.0, -s), Complex64::new(0.0, s / 2.0))
}

fn conservation_half_width(model: ModelId) -> f64 {
    match model {
        // squeezed hard in x: the Laplacian needs the finer spacing
        ModelId::ModifiedParametric => 6.0,
        // spreads like e^{2t}
        ModelId::ModifiedOscillator => 12.0,
        _ => GRID_HALF_WIDTH,
    }
}

/// 3. Drift of catalogued energy operators along grid and moment evolutions.
pub fn check_invariant_conservation(budget: Budget) -> CheckOutcome {
    let models: Vec<ModelId> = match budget {
        Budget::Full => ENERGY_MODELS.to_vec(),
        Budget::Quick => vec![ModelId::CaldirolaKanai, ModelId::United],
    };
    let results: Vec<std::result::Result<(ModelId, f64, f64), (ModelId, Error)>> = models
        .par_iter()
        .map(|&model| {
            conservation_for(model).map_err(|e| (model, e))
        })
        .collect();
    let mut tally = Tally::new();
    let mut ode_worst: f64 = 0.0;
    for r in results {
        match r {
            Ok((model, g, o)) => {
                tally.see(g);
                ode_worst = ode_worst.max(o);
                tally.note(format!("{model} grid {g:.1e} ode {o:.1e}"));
            }
            Err((model, e)) => {
                tally.see(f64::NAN);
                tally.note(format!("{model}: {e}"));
            }
        }
    }
    // the ODE path has its own, tighter limit
    if ode_worst > 1e-8 {
        tally.see(f64::INFINITY);
        tally.note(format!("moment-ODE drift {ode_worst:.1e} exceeds 1e-8"));
    }
    outcome(3, 1e-4, Ok(tally))
}

fn conservation_for(model: ModelId) -> Result<(ModelId, f64, f64)> {
    let spec = params(model);
    let catalog = CatalogPath(spec);
    let hw = conservation_half_width(model);
    let grid = Grid::span(-hw, hw, GRID_N)?;
    let psi0 = matched_state(&catalog.form(0.0))?.sample(&grid);
    let t_end = period(&spec);
    let steps = (t_end / GRID_DT).round() as usize;
    let ev = evolve_grid(&eq(&spec)?, &psi0, GRID_DT, steps, 50)?;
    let grid_drift = invariant_drift(&ev, &|t| catalog.form(t))?;

    let (_, m0) = measure_moments(&psi0, 0.0)?;
    let path = evolve_second_moments(&ham(&spec)?, &m0, ev.times.last().copied().unwrap_or(t_end), 1e-12)?;
    let e0 = catalog.form(0.0).expectation(&m0);
    let ode_drift = path
        .times()
        .iter()
        .map(|&t| rel(catalog.form(t).expectation(&path.at(t)), e0))
        .fold(0.0, f64::max);
    Ok((model, grid_drift, ode_drift))
}

fn united_mu(spec: ModelSpec) -> impl Fn(Jet) -> Jet + Send + Sync {
    let (w0, l) = (spec.omega0, spec.lambda);
    move |t: Jet| (t * -l).exp() * (w0 / 2.0).sqrt()
}

/// 4. Generalized invariant of the united model and Pinney-superposed auxiliary solutions.
pub fn check_generalized_invariant(budget: Budget) -> CheckOutcome {
    let run = || -> Result<Tally> {
        let mut tally = Tally::new();
        let spec = ModelSpec::new(ModelId::United).omega0(1.0).lambda(0.3).mu(0.1);
        let tc = ham(&spec)?;
        let c0 = spec.omega_sq() / 4.0;
        let mu = united_mu(spec);
        let times: Vec<f64> = (0..20).map(|k| 0.25 * k as f64).collect();
        let (mut aux, mut coef): (f64, f64) = (0.0, 0.0);
        for &t in &times {
            aux = aux.max(auxiliary_residual(&tc, &mu, c0, t)?);
            let g = general_invariant(&tc, &mu, c0, t)?;
            coef = coef.max(g.form.max_abs_diff(&crate::invariants::energy_operator_catalog(&spec, t)?));
        }
        tally.note(format!("aux {aux:.1e} (1e-10), EOUM {coef:.1e} (1e-10)"));
        if aux > 1e-10 || coef > 1e-10 {
            tally.see(f64::INFINITY);
        }

        // μ₁ = e^{−λt} cos ωt, μ₂ = e^{−λt} sin ωt; W(μ₁, μ₂)/(2a) = ω/ω₀
        let (w, w0, l) = (spec.omega(), spec.omega0, spec.lambda);
        let target = c0 * (w0 / w).powi(2);
        let mut rng = StdRng::seed_from_u64(SEED + 4);
        let n = if budget == Budget::Full { 5 } else { 2 };
        for _ in 0..n {
            let a: f64 = rng.random_range(0.5..2.0);
            let b: f64 = rng.random_range(-0.4..0.4);
            let c = (b * b + target) / a;
            let mu = move |t: Jet| {
                let e = (t * -l).exp();
                pinney_kappa(e * (t * w).cos(), e * (t * w).sin(), a, b, c)
            };
            for &t in &times {
                tally.see(auxiliary_residual(&tc, &mu, c0, t)?);
            }
        }
        Ok(tally)
    };
    outcome(4, 1e-9, run())
}

/// 5. §5 closed forms against the moment system and the CJ equation.
pub fn check_closed_forms(_budget: Budget) -> CheckOutcome {
    let run = || -> Result<Tally> {
        let mut tally = Tally::new();
        let (_, m0) = GaussianState::coherent(0.6, 0.3).moments(0.0)?;
        for (model, which) in
            [(ModelId::CaldirolaKanai, Which::H), (ModelId::United, Which::H0), (ModelId::ModifiedOscillator, Which::H0)]
        {
            let spec = params(model);
            let tc = ham(&spec)?;
            let t_end = if model == ModelId::ModifiedOscillator { 1.5 } else { 10.0 };
            let path = evolve_second_moments(&tc, &m0, t_end, 1e-12)?;
            let cf = closed_form_expectation(&spec, which, ExpectationInit::from_moments(&spec, &m0)?)?;
            let mut worst: f64 = 0.0;
            for &t in path.times() {
                let m = path.at(t);
                let numeric = match which {
                    Which::H0 => expectation_operators(&spec, t)?.h0.expectation(&m),
                    Which::H => {
                        let k = tc.eval(t);
                        QuadraticForm::new(k.a, k.b, k.c, k.d, t).expectation(&m)
                    }
                };
                worst = worst.max(rel(numeric, cf.eval(t)));
            }
            tally.note(format!("{model} {worst:.1e}"));
            tally.see(worst);
        }
        let (l, w0, e0, l0) = (0.3, 1.0, 0.9, 0.25);
        let cj = cj_h0_equation_solve(l, w0, e0, l0, 5.0, 1e-12)?;
        let cj_worst = (0..=1000)
            .map(|k| 0.01 + k as f64 * (5.0 - 0.01) / 1000.0)
            .map(|t| (cj.value(t) - cj_closed_form(l, w0, e0, l0, t)).abs())
            .fold(0.0, f64::max);
        tally.note(format!("CJ {cj_worst:.1e} (1e-6)"));
        if cj_worst > 1e-6 {
            tally.see(f64::INFINITY);
        }
        Ok(tally)
    };
    outcome(5, 1e-8, run())
}

/// 6. Basis of the elementary equation and its companion.
pub fn check_appendix_d(_budget: Budget) -> CheckOutcome {
    let run = || -> Result<Tally> {
        let mut tally = Tally::new();
        let b = appendix_d_basis(1.1, 0.3, 0.2)?;
        let (mut res, mut wr): (f64, f64) = (0.0, 0.0);
        for k in 0..100 {
            let t = 0.05 * (k + 1) as f64;
            for f in BasisFunction::ALL {
                res = res.max(b.residual(f, t).abs());
            }
            wr = wr.max((b.wronskian_y(t) - b.wronskian_y_formula(t)).abs());
            wr = wr.max((b.wronskian_z(t) - b.wronskian_z_formula()).abs());
        }
        tally.note(format!("residual {res:.1e} (1e-9), wronskians {wr:.1e} (1e-10)"));
        tally.see(res);
        if wr > 1e-10 {
            tally.see(f64::INFINITY);
        }
        Ok(tally)
    };
    outcome(6, 1e-9, run())
}

/// 7. Ehrenfest closed forms, the norm law on the grid and the uncertainty margin.
pub fn check_moments_and_uncertainty(budget: Budget) -> CheckOutcome {
    let run = || -> Result<Tally> {
        let mut tally = Tally::new();
        let init = FirstMoments { x: 1.0, p: 0.2, norm: 1.0, t: 0.0 };

        // united: X = A e^{−(λ+μ)t} sin(ωt + δ) for the unnormalized first moment
        let spec = params(ModelId::United);
        let tc = ham(&spec)?;
        let path = evolve_first_moments(&tc, &init, 8.0, 1e-12)?;
        let (w, k) = (spec.omega(), spec.lambda + spec.mu_param);
        let k0 = tc.eval(0.0);
        let x0 = init.x;
        let xd0 = 2.0 * k0.a * init.p + 2.0 * k0.d * init.x;
        // x0 = A sin δ, xd0 = A(ω cos δ − k sin δ)
        let delta = x0.atan2((xd0 + k * x0) / w);
        let amp = x0 / delta.sin();
        let mut worst: f64 = 0.0;
        for &t in path.times() {
            let want = amp * (-k * t).exp() * (w * t + delta).sin();
            worst = worst.max((path.raw(t)[0] - want).abs());
        }
        tally.note(format!("united <x> {worst:.1e} (1e-8)"));
        let mut ehr = worst;

        // CJ coordinate: ⟨x⟩ = A sin(ωt + δ)/cosh λt
        let spec = params(ModelId::CjCoordinate);
        let tc = ham(&spec)?;
        let path = evolve_first_moments(&tc, &init, 8.0, 1e-12)?;
        let w = spec.omega();
        let xd0 = 2.0 * tc.eval(0.0).a * init.p;
        let delta = init.x.atan2(xd0 / w);
        let amp = init.x / delta.sin();
        let mut worst: f64 = 0.0;
        for &t in path.times() {
            let want = amp * (w * t + delta).sin() / (spec.lambda * t).cosh();
            worst = worst.max((path.at(t).x - want).abs());
        }
        tally.note(format!("CJ <x> {worst:.1e} (1e-8)"));
        ehr = ehr.max(worst);
        if ehr > 1e-8 {
            tally.see(f64::INFINITY);
        }

        // norm law on the grid
        let spec = params(ModelId::United);
        let grid = Grid::span(-GRID_HALF_WIDTH, GRID_HALF_WIDTH, GRID_N)?;
        let psi0 = initial_state().sample(&grid);
        let steps = if budget == Budget::Full { 3000 } else { 1000 };
        let ev = evolve_grid(&eq(&spec)?, &psi0, GRID_DT, steps, 250)?;
        let n0 = psi0.norm_sq();
        let mut norm_worst: f64 = 0.0;
        for (s, &t) in ev.states.iter().zip(&ev.times) {
            norm_worst = norm_worst.max(rel(s.norm_sq() / n0, (-spec.mu_param * t).exp()));
        }
        tally.note(format!("norm law {norm_worst:.1e} (1e-4)"));
        if norm_worst > 1e-4 {
            tally.see(f64::INFINITY);
        }

        // uncertainty margin along closed-form Gaussian evolutions
        let s0 = GaussianState::coherent(0.4, -0.3);
        let (f, m) = s0.moments(0.0)?;
        let m0 = uncertainty_check(&f, &m)?.margin;
        tally.note(format!("margin at t=0 {m0:.1e}"));
        if m0.abs() > 1e-12 {
            tally.see(f64::INFINITY);
        }
        let mut lowest = f64::INFINITY;
        for model in KERNEL_MODELS.iter().chain(&[ModelId::SimpleHarmonic, ModelId::FreeParticle]) {
            let spec = params(*model);
            for t in caustic_free_times(&spec, 0.05, end_time(&spec, 4.0), 12) {
                let s = propagate_gaussian(&closed_form_kernel(&spec, t)?, &s0)?;
                let (f, m) = s.moments(t)?;
                lowest = lowest.min(uncertainty_check(&f, &m)?.margin);
            }
        }
        tally.note(format!("lowest margin {lowest:.1e} (>= -1e-10)"));
        if lowest < -1e-10 {
            tally.see(f64::INFINITY);
        }
        tally.see(ehr);
        Ok(tally)
    };
    outcome(7, 1e-8, run())
}

/// 8. Ladder operators of three models.
pub fn check_ladder(_budget: Budget) -> CheckOutcome {
    let run = || -> Result<Tally> {
        let mut tally = Tally::new();
        let mut check = |name: &str, tc: &TimeCoefficients, mu: &dyn crate::jet::ScalarFunction, c0: f64| -> Result<()> {
            let mut worst: f64 = 0.0;
            for k in 0..10 {
                let t = 0.3 + 0.4 * k as f64;
                let pair = ladder_factorization(tc, mu, c0, t)?;
                let g = general_invariant(tc, mu, c0, t)?;
                worst = worst.max((pair.commutator() - 1.0).abs() / 1e-2);
                worst = worst.max(pair.reconstruct().rel_diff(&g.form));
            }
            tally.note(format!("{name} {worst:.1e}"));
            tally.see(worst);
            Ok(())
        };
        let united = ModelSpec::new(ModelId::United).omega0(1.0).lambda(0.3).mu(0.1);
        check("united", &ham(&united)?, &united_mu(united), united.omega_sq() / 4.0)?;
        let mck = ModelSpec::new(ModelId::ModifiedCaldirolaKanai).omega0(1.0).lambda(0.2);
        check("modified_caldirola_kanai", &ham(&mck)?, &united_mu(mck), mck.omega_sq() / 4.0)?;
        let sech = ModelSpec::new(ModelId::ParametricSech2).omega0(1.0).lambda(0.3);
        let (w, l) = (sech.omega(), sech.lambda);
        let kappa = move |t: Jet| ((t * l).tanh().square() * (l * l) + w * w).sqrt();
        check("parametric_sech2", &ham(&sech)?, &kappa, w * w * (w * w + l * l).powi(2))?;
        Ok(tally)
    };
    // the commutator term is scaled by 1e-2 so that one limit covers both 1e-12 and 1e-10
    outcome(8, 1e-10, run())
}

/// 9. Grid quadrature, Gaussian closed form and Crank–Nicolson against each other.
pub fn check_oracles(_budget: Budget) -> CheckOutcome {
    let run = || -> Result<Tally> {
        let mut tally = Tally::new();
        let grid = Grid::span(-GRID_HALF_WIDTH, GRID_HALF_WIDTH, GRID_N)?;
        let s0 = GaussianState::coherent(0.5, 0.3);
        let psi0 = s0.sample(&grid);
        for model in [ModelId::CaldirolaKanai, ModelId::SimpleHarmonic] {
            let spec = params(model);
            let t = 0.5;
            let kp = closed_form_kernel(&spec, t)?;
            let quad = propagate_grid(&kp, &psi0, &grid)?;
            let exact = propagate_gaussian(&kp, &s0)?.sample(&grid);
            let steps = (t / GRID_DT).round() as usize;
            let cn = evolve_grid(&eq(&spec)?, &psi0, GRID_DT, steps, steps)?;
            let cn = cn.last();
            let d = [quad.sup_distance(&exact), quad.sup_distance(cn), exact.sup_distance(cn)];
            let worst = d.iter().copied().fold(0.0, f64::max);
            tally.note(format!("{model} {:.1e}/{:.1e}/{:.1e}", d[0], d[1], d[2]));
            tally.see(worst);
        }
        Ok(tally)
    };
    outcome(9, 1e-4, run())
}

fn cn_error_ratio(spec: &ModelSpec) -> Result<f64> {
    // dt·max|b|·x_max² stays below 1 for CK at the coarse step
    let grid = Grid::span(-5.5, 5.5, 1024)?;
    let psi0 = GaussianState::coherent(0.5, 0.0).sample(&grid);
    let tc = eq(spec)?;
    let t_end = 1.0;
    let run = |dt: f64| -> Result<GridState> {
        let steps = (t_end / dt).round() as usize;
        Ok(evolve_grid(&tc, &psi0, dt, steps, steps)?.last().clone())
    };
    let reference = run(0.05 / 32.0)?;
    let coarse = run(0.05)?.sup_distance(&reference);
    let fine = run(0.025)?.sup_distance(&reference);
    Ok(coarse / fine)
}

/// 10. Observed orders of Crank–Nicolson in time and of the residual stencil.
pub fn check_convergence(_budget: Budget) -> CheckOutcome {
    let run = || -> Result<Tally> {
        let mut tally = Tally::new();
        let mut dev: f64 = 0.0;
        for model in [ModelId::SimpleHarmonic, ModelId::CaldirolaKanai] {
            let r = cn_error_ratio(&params(model))?;
            tally.note(format!("CN {model} {r:.3}"));
            dev = dev.max((r - 4.0).abs());
        }
        for model in [ModelId::ModifiedParametric, ModelId::SimpleHarmonic, ModelId::United] {
            let spec = params(model);
            let tc = eq(&spec)?;
            let k = ClosedFormKernel(spec);
            let a = schrodinger_residual(&tc, &k, 0.3, -0.2, 0.4, 2e-3)?;
            let b = schrodinger_residual(&tc, &k, 0.3, -0.2, 0.4, 1e-3)?;
            tally.note(format!("residual {model} {:.3}", a / b));
            dev = dev.max((a / b - 4.0).abs());
        }
        tally.see(dev);
        Ok(tally)
    };
    // measured is the largest |ratio − 4|
    outcome(10, 0.5, run())
}

pub fn run_check(id: u32, budget: Budget) -> Result<CheckOutcome> {
    Ok(match id {
        1 => check_kernel_consistency(budget),
        2 => check_pde_residual(budget),
        3 => check_invariant_conservation(budget),
        4 => check_generalized_invariant(budget),
        5 => check_closed_forms(budget),
        6 => check_appendix_d(budget),
        7 => check_moments_and_uncertainty(budget),
        8 => check_ladder(budget),
        9 => check_oracles(budget),
        10 => check_convergence(budget),
        _ => return Err(Error::InvalidInput(format!("no check {id}"))),
    })
}

/// All checks, in criterion order.
pub fn run_all(budget: Budget) -> Vec<CheckOutcome> {
    CRITERIA.par_iter().map(|&(id, _)| run_check(id, budget).expect("known id")).collect()
}

/// Kernel parameters compared field by field; used by tests and the CLI.
pub fn kernel_rel_diff(a: &KernelParameters, b: &KernelParameters) -> f64 {
    [(a.alpha, b.alpha), (a.beta, b.beta), (a.gamma, b.gamma)].iter().map(|&(x, y)| rel(x, y)).fold(0.0, f64::max)
}

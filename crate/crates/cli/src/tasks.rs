//! One function per subcommand. Each returns its output for a single model spec.

use serde::Serialize;

use quadham::characteristic::{
    closed_form_mu, solve_characteristic, ClosedFormKernel, KernelSource, NumericKernel,
};
use quadham::coefficients::{builtin_coefficients, Convention, ModelSpec, TimeCoefficients};
use quadham::dynamics::{
    appendix_d_basis, evolve_first_moments, evolve_second_moments, uncertainty_check, BasisFunction,
};
use quadham::export::CsvTable;
use quadham::gridsim::{evolve_grid, measure_moments};
use quadham::invariants::energy_operator_catalog;
use quadham::propagator::{green_eval, propagate_gaussian_sweep, GaussianState, Grid};
use quadham::{Error, Result};

use crate::settings::Settings;

pub enum Output {
    Table(CsvTable),
    Record(Green),
}

#[derive(Serialize)]
pub struct Green {
    re: f64,
    im: f64,
}

fn ham(spec: &ModelSpec) -> Result<TimeCoefficients> {
    builtin_coefficients(spec, Convention::HamiltonianForm)
}

fn eq(spec: &ModelSpec) -> Result<TimeCoefficients> {
    builtin_coefficients(spec, Convention::EquationForm)
}

/// `samples + 1` evenly spaced times on `[start, t_end]`.
fn times(s: &Settings, start_at_zero: bool) -> Result<Vec<f64>> {
    let t_end = s.positive("t_end", 1.0)?;
    let n = s.usize_or("samples", 100)?.max(1);
    let first = if start_at_zero { 0 } else { 1 };
    Ok((first..=n).map(|k| t_end * k as f64 / n as f64).collect())
}

fn tol(s: &Settings) -> Result<f64> {
    s.positive("tol", 1e-10)
}

fn initial_state(s: &Settings) -> Result<GaussianState> {
    Ok(GaussianState::coherent(s.f64_or("x_mean", 0.5)?, s.f64_or("p_mean", 0.0)?))
}

/// Evaluate kernels either from the closed-form catalog or from a solved characteristic.
fn with_kernel<T>(spec: &ModelSpec, s: &Settings, t_max: f64, f: impl FnOnce(&dyn KernelSource) -> Result<T>) -> Result<T> {
    match s.get("source").unwrap_or("closed") {
        "closed" => f(&ClosedFormKernel(*spec)),
        "numeric" => {
            let tc = eq(spec)?;
            let path = solve_characteristic(&tc, t_max * 1.001, tol(s)?)?;
            f(&NumericKernel { tc: &tc, path: &path })
        }
        other => Err(Error::InvalidInput(format!("source must be closed or numeric, got {other:?}"))),
    }
}

pub fn mu(spec: &ModelSpec, s: &Settings) -> Result<Output> {
    let ts = times(s, true)?;
    let path = solve_characteristic(&eq(spec)?, *ts.last().unwrap(), tol(s)?)?;
    let closed = closed_form_mu(spec, ts[ts.len() / 2]).is_ok();
    let mut table = if closed {
        CsvTable::new(["t", "mu", "mu_prime", "mu_closed", "mu_prime_closed"])
    } else {
        CsvTable::new(["t", "mu", "mu_prime"])
    };
    for &t in &ts {
        let (m, mp) = path.eval(t);
        if closed {
            let (cm, cmp) = closed_form_mu(spec, t)?;
            table.push(vec![t, m, mp, cm, cmp]);
        } else {
            table.push(vec![t, m, mp]);
        }
    }
    Ok(Output::Table(table))
}

pub fn kernel(spec: &ModelSpec, s: &Settings) -> Result<Output> {
    let ts = match s.get("t") {
        Some(_) => vec![s.positive("t", 1.0)?],
        None => times(s, false)?,
    };
    let t_max = ts.iter().copied().fold(0.0, f64::max);
    with_kernel(spec, s, t_max, |k| {
        let mut table = CsvTable::new(["t", "mu", "mu_prime", "h", "alpha", "beta", "gamma"]);
        for &t in &ts {
            let kp = k.kernel(t)?;
            table.push(vec![kp.t, kp.mu, kp.mu_prime, kp.h, kp.alpha, kp.beta, kp.gamma]);
        }
        Ok(Output::Table(table))
    })
}

pub fn green(spec: &ModelSpec, s: &Settings) -> Result<Output> {
    let t = s.positive("t", 1.0)?;
    let (x, y) = (s.f64_req("x")?, s.f64_req("y")?);
    with_kernel(spec, s, t, |k| {
        let g = green_eval(&k.kernel(t)?, x, y)?;
        Ok(Output::Record(Green { re: g.re, im: g.im }))
    })
}

pub fn propagate(spec: &ModelSpec, s: &Settings) -> Result<Output> {
    let psi0 = initial_state(s)?;
    match s.get("method").unwrap_or("gaussian") {
        "gaussian" => {
            let ts = times(s, false)?;
            let t_max = *ts.last().unwrap();
            let states = with_kernel(spec, s, t_max, |k| propagate_gaussian_sweep(k, &psi0, &ts))?;
            let mut table = CsvTable::new(["t", "re_Lambda", "im_Lambda", "re_Theta", "im_Theta", "norm"]);
            for (t, g) in ts.iter().zip(&states) {
                table.push(vec![*t, g.lambda.re, g.lambda.im, g.theta.re, g.theta.im, g.norm_sq()]);
            }
            Ok(Output::Table(table))
        }
        "grid" => {
            let hw = s.positive("half_width", 10.0)?;
            let grid = Grid::span(-hw, hw, s.usize_or("n", 2048)?)?;
            let dt = s.positive("dt", 1e-3)?;
            let t_end = s.positive("t_end", 1.0)?;
            let steps = (t_end / dt).round().max(1.0) as usize;
            let every = (steps / s.usize_or("samples", 100)?.max(1)).max(1);
            let ev = evolve_grid(&eq(spec)?, &psi0.sample(&grid), dt, steps, every)?;
            let mut table = CsvTable::new(["t", "norm", "x_mean", "p_mean", "x2", "p2", "pxxp"]);
            for (st, &t) in ev.states.iter().zip(&ev.times) {
                let (f, m) = measure_moments(st, t)?;
                table.push(vec![t, m.norm, f.x, f.p, m.x2, m.p2, m.pxxp]);
            }
            Ok(Output::Table(table))
        }
        other => Err(Error::InvalidInput(format!("method must be gaussian or grid, got {other:?}"))),
    }
}

pub fn moments(spec: &ModelSpec, s: &Settings) -> Result<Output> {
    let ts = times(s, true)?;
    let (_, m0) = initial_state(s)?.moments(0.0)?;
    let path = evolve_second_moments(&ham(spec)?, &m0, *ts.last().unwrap(), tol(s)?)?;
    let mut table = CsvTable::new(["t", "p2", "x2", "pxxp", "norm", "energy"]);
    for &t in &ts {
        let m = path.at(t);
        let e = energy_operator_catalog(spec, t).map(|f| f.expectation(&m)).unwrap_or(f64::NAN);
        table.push(vec![t, m.p2, m.x2, m.pxxp, m.norm, e]);
    }
    Ok(Output::Table(table))
}

pub fn invariant(spec: &ModelSpec, s: &Settings) -> Result<Output> {
    let ts = times(s, true)?;
    let (_, m0) = initial_state(s)?.moments(0.0)?;
    let path = evolve_second_moments(&ham(spec)?, &m0, *ts.last().unwrap(), tol(s)?)?;
    let mut table = CsvTable::new(["t", "a", "b", "c", "d", "expectation"]);
    for &t in &ts {
        let f = energy_operator_catalog(spec, t)?;
        table.push(vec![t, f.a, f.b, f.c, f.d, f.expectation(&path.at(t))]);
    }
    Ok(Output::Table(table))
}

pub fn appendix_d(s: &Settings) -> Result<Output> {
    let basis = appendix_d_basis(s.f64_or("omega0", 1.0)?, s.f64_or("lambda", 0.5)?, s.f64_or("gamma", 0.0)?)?;
    let mut header: Vec<String> = vec!["t".into()];
    header.extend(BasisFunction::ALL.iter().map(|f| f.name().to_string()));
    header.push("max_residual".into());
    let mut table = CsvTable::new(header);
    for t in times(s, true)? {
        let mut row = vec![t];
        let mut worst: f64 = 0.0;
        for f in BasisFunction::ALL {
            row.push(basis.eval(f, t));
            let r = basis.residual(f, t).abs();
            // z1, z2 are singular where tanh(λt + γ) vanishes; keep the NaN visible
            worst = if r.is_nan() || worst.is_nan() { f64::NAN } else { worst.max(r) };
        }
        row.push(worst);
        table.push(row);
    }
    Ok(Output::Table(table))
}

pub fn uncertainty(spec: &ModelSpec, s: &Settings) -> Result<Output> {
    let ts = times(s, true)?;
    let t_end = *ts.last().unwrap();
    let (f0, m0) = initial_state(s)?.moments(0.0)?;
    let tc = ham(spec)?;
    let first = evolve_first_moments(&tc, &f0, t_end, tol(s)?)?;
    let second = evolve_second_moments(&tc, &m0, t_end, tol(s)?)?;
    let mut table = CsvTable::new(["t", "var_x", "var_p", "margin"]);
    for &t in &ts {
        let r = uncertainty_check(&first.at(t), &second.at(t))?;
        table.push(vec![t, r.var_x, r.var_p, r.margin]);
    }
    Ok(Output::Table(table))
}

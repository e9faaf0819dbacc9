//! Crank–Nicolson finite-difference evolution of the Schrödinger equation in
//! equation form, used as an independent check on the closed forms.

use num_complex::Complex64;

use crate::coefficients::{Convention, TimeCoefficients};
use crate::dynamics::{FirstMoments, SecondMoments};
use crate::error::{Error, Result};
use crate::invariants::QuadraticForm;
use crate::propagator::GridState;
use crate::tridiag;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Mass allowed within [`EDGE_CELLS`] of either boundary, relative to the total.
pub const LEAK_LIMIT: f64 = 1e-8;
pub const EDGE_CELLS: usize = 5;

/// Recorded states of a Crank–Nicolson run.
#[derive(Debug, Clone)]
pub struct GridEvolution {
    pub times: Vec<f64>,
    pub states: Vec<GridState>,
    pub dt: f64,
    pub scheme_order: u32,
}

impl GridEvolution {
    pub fn last(&self) -> &GridState {
        self.states.last().unwrap()
    }
}

fn edge_fraction(s: &GridState) -> f64 {
    let n = s.values.len();
    let k = EDGE_CELLS.min(n / 2);
    let edge: f64 = s.values[..k].iter().chain(&s.values[n - k..]).map(|v| v.norm_sqr()).sum();
    let total: f64 = s.values.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        0.0
    } else {
        edge / total
    }
}

/// Evolve `psi0` by `steps` Crank–Nicolson steps of size `dt`, storing every
/// `record_every`-th state (the initial and final states are always stored).
pub fn evolve_grid(
    tc: &TimeCoefficients,
    psi0: &GridState,
    dt: f64,
    steps: usize,
    record_every: usize,
) -> Result<GridEvolution> {
    tc.require(Convention::EquationForm)?;
    if !(dt > 0.0) || record_every == 0 {
        return Err(Error::InvalidInput("need dt > 0 and record_every >= 1".into()));
    }
    let grid = psi0.grid();
    let n = grid.n;
    let t_end = dt * steps as f64;
    if t_end >= tc.domain_end() {
        return Err(Error::SingularCoefficient { t: tc.domain_end() });
    }
    let xmax2 = grid.x_max().powi(2);
    let bmax = (0..=16)
        .map(|k| tc.eval(t_end * k as f64 / 16.0).b.abs())
        .fold(0.0, f64::max);
    if dt * bmax * xmax2 >= 1.0 {
        return Err(Error::UnderResolved(format!(
            "dt·max|b|·x_max² = {:.3} must be < 1; reduce dt or the domain",
            dt * bmax * xmax2
        )));
    }
    let leak = edge_fraction(psi0);
    if leak > LEAK_LIMIT {
        return Err(Error::BoundaryLeak { t: 0.0, fraction: leak });
    }

    let dx = grid.dx;
    let xs: Vec<f64> = grid.points().collect();
    let zero = Complex64::new(0.0, 0.0);
    let mut lower = vec![zero; n];
    let mut diag = vec![zero; n];
    let mut upper = vec![zero; n];
    let mut rhs = vec![zero; n];
    let mut scratch = vec![zero; n];
    let mut psi = psi0.values.clone();

    let mut ev = GridEvolution {
        times: vec![0.0],
        states: vec![psi0.clone()],
        dt,
        scheme_order: 2,
    };
    for step in 0..steps {
        let t = step as f64 * dt;
        let k = tc.checked_jets(t + 0.5 * dt)?.values();
        let kin = k.a / (dx * dx);
        // H as a tridiagonal matrix: (hl, hd, hu) per row
        let h_row = |j: usize| -> (Complex64, Complex64, Complex64) {
            let x = xs[j];
            let hd = Complex64::new(2.0 * kin + k.b * x * x, 0.5 * k.c - k.d);
            let hu = if j + 1 < n {
                Complex64::new(-kin, -k.c * (x + xs[j + 1]) / (4.0 * dx))
            } else {
                zero
            };
            let hl = if j > 0 {
                Complex64::new(-kin, k.c * (x + xs[j - 1]) / (4.0 * dx))
            } else {
                zero
            };
            (hl, hd, hu)
        };
        let half = 0.5 * dt * I;
        for j in 0..n {
            let (hl, hd, hu) = h_row(j);
            let mut hpsi = hd * psi[j];
            if j > 0 {
                hpsi += hl * psi[j - 1];
            }
            if j + 1 < n {
                hpsi += hu * psi[j + 1];
            }
            rhs[j] = psi[j] - half * hpsi;
            lower[j] = half * hl;
            diag[j] = 1.0 + half * hd;
            upper[j] = half * hu;
        }
        tridiag::solve(&lower, &diag, &upper, &mut rhs, &mut scratch);
        std::mem::swap(&mut psi, &mut rhs);

        let t_next = (step + 1) as f64 * dt;
        let state = GridState { x0: grid.x0, dx, values: psi.clone() };
        let leak = edge_fraction(&state);
        if leak > LEAK_LIMIT {
            return Err(Error::BoundaryLeak { t: t_next, fraction: leak });
        }
        if (step + 1) % record_every == 0 || step + 1 == steps {
            ev.times.push(t_next);
            ev.states.push(state);
        }
    }
    Ok(ev)
}

/// Fourth-order centred first derivative with zero values beyond the edges.
fn derivative(s: &GridState) -> Vec<Complex64> {
    let v = &s.values;
    let n = v.len();
    let at = |j: isize| -> Complex64 {
        if j < 0 || j >= n as isize {
            Complex64::new(0.0, 0.0)
        } else {
            v[j as usize]
        }
    };
    (0..n as isize)
        .map(|j| (8.0 * (at(j + 1) - at(j - 1)) - (at(j + 2) - at(j - 2))) / (12.0 * s.dx))
        .collect()
}

/// Moments of a grid state by trapezoid sums; `t` is copied into the output.
pub fn measure_moments(s: &GridState, t: f64) -> Result<(FirstMoments, SecondMoments)> {
    let dpsi = derivative(s);
    let (mut n, mut x1, mut x2, mut p1, mut p2, mut xp) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (j, (v, dv)) in s.values.iter().zip(&dpsi).enumerate() {
        let x = s.x(j);
        let rho = v.norm_sqr();
        let cross = v.conj() * dv;
        n += rho;
        x1 += x * rho;
        x2 += x * x * rho;
        p1 += cross.im;
        p2 += dv.norm_sqr();
        xp += x * cross.im;
    }
    let dx = s.dx;
    let (n, x1, x2, p1, p2, xp) = (n * dx, x1 * dx, x2 * dx, p1 * dx, p2 * dx, xp * dx);
    if !(n > 0.0) {
        return Err(Error::InvalidMoments("zero norm".into()));
    }
    let (xm, pm) = (x1 / n, p1 / n);
    for var in [x2 / n - xm * xm, p2 / n - pm * pm] {
        if var < -1e-12 {
            return Err(Error::NegativeVariance { variance: var });
        }
    }
    Ok((
        FirstMoments { x: xm, p: pm, norm: n, t },
        SecondMoments { p2, x2, pxxp: 2.0 * xp, norm: n, t },
    ))
}

/// Largest relative change of `⟨E⟩` over the recorded states.
pub fn invariant_drift(ev: &GridEvolution, e_path: &dyn Fn(f64) -> QuadraticForm) -> Result<f64> {
    let mut first = None;
    let mut worst: f64 = 0.0;
    for (s, &t) in ev.states.iter().zip(&ev.times) {
        let (_, m) = measure_moments(s, t)?;
        let e = e_path(t).expectation(&m);
        let e0 = *first.get_or_insert(e);
        worst = worst.max((e - e0).abs());
    }
    let e0: f64 = first.unwrap_or(0.0);
    Ok(worst / e0.abs().max(f64::EPSILON))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{builtin_coefficients, ModelId, ModelSpec};
    use crate::propagator::{GaussianState, Grid};

    fn eq(spec: ModelSpec) -> TimeCoefficients {
        builtin_coefficients(&spec, Convention::EquationForm).unwrap()
    }

    #[test]
    fn unit_gaussian_moments() {
        let grid = Grid::span(-10.0, 10.0, 1024).unwrap();
        let s = GaussianState::coherent(0.0, 0.0).sample(&grid);
        let (f, m) = measure_moments(&s, 0.0).unwrap();
        assert!((f.norm - 1.0).abs() < 1e-10);
        assert!((m.x2 - 0.5).abs() < 1e-10 && (m.p2 - 0.5).abs() < 1e-7 && m.pxxp.abs() < 1e-12, "{m:?}");
        let s = GaussianState::coherent(1.25, 0.0).sample(&grid);
        let (f, _) = measure_moments(&s, 0.0).unwrap();
        assert!((f.x - 1.25).abs() < 1e-10);
    }

    #[test]
    fn zero_state_stays_zero() {
        let grid = Grid::span(-5.0, 5.0, 64).unwrap();
        let tc = eq(ModelSpec::new(ModelId::SimpleHarmonic));
        let ev = evolve_grid(&tc, &GridState::zeros(&grid), 0.01, 10, 1).unwrap();
        assert_eq!(ev.last().max_abs(), 0.0);
    }

    #[test]
    fn boundary_leak_detected() {
        let grid = Grid::span(-3.0, 3.0, 256).unwrap();
        let tc = eq(ModelSpec::new(ModelId::FreeParticle));
        let s = GaussianState::coherent(0.0, 4.0).sample(&grid);
        let r = evolve_grid(&tc, &s, 0.01, 200, 10);
        assert!(matches!(r, Err(Error::BoundaryLeak { .. })));
    }

    #[test]
    fn united_norm_decays() {
        let spec = ModelSpec::new(ModelId::United).omega0(1.0).lambda(0.2).mu(0.1);
        let grid = Grid::span(-10.0, 10.0, 1024).unwrap();
        let s = GaussianState::coherent(0.5, 0.0).sample(&grid);
        let ev = evolve_grid(&eq(spec), &s, 1e-3, 1000, 250).unwrap();
        let n0 = s.norm_sq();
        for (st, &t) in ev.states.iter().zip(&ev.times) {
            let ratio = st.norm_sq() / n0;
            assert!((ratio / (-0.1 * t).exp() - 1.0).abs() < 1e-4, "t={t} {ratio}");
        }
    }
}

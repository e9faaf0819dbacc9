//! Green functions, closed-form Gaussian propagation and direct quadrature
//! of `ψ(x, t) = ∫ G(x, y, t) φ(y) dy`.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characteristic::{KernelParameters, KernelSource};
use crate::coefficients::{Convention, TimeCoefficients};
use crate::dynamics::{FirstMoments, SecondMoments};
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Smallest |μ| accepted by [`green_eval`].
pub const MU_FLOOR: f64 = 1e-12;

fn check_mu(kp: &KernelParameters) -> Result<()> {
    if !(kp.mu.abs() >= MU_FLOOR) {
        return Err(Error::CausticEncountered { t: kp.t, lo: kp.t, hi: kp.t });
    }
    Ok(())
}

/// `(2πiμ)^{-1/2}` on the principal branch.
fn prefactor(mu: f64) -> Complex64 {
    (Complex64::new(0.0, 2.0 * PI * mu)).sqrt().inv()
}

/// `G(x, y, t) = (2πiμ)^{-1/2} exp(i(αx² + βxy + γy²))`.
pub fn green_eval(kp: &KernelParameters, x: f64, y: f64) -> Result<Complex64> {
    check_mu(kp)?;
    let phase = kp.alpha * x * x + kp.beta * x * y + kp.gamma * y * y;
    Ok(prefactor(kp.mu) * Complex64::from_polar(1.0, phase))
}

/// `ψ(x) = exp(i(Λx² + Θx + Φ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub lambda: Complex64,
    pub theta: Complex64,
    pub phi: Complex64,
    /// Accumulated phase of the square-root prefactor, already folded into `phi`.
    pub branch_phase: f64,
}

impl GaussianState {
    pub fn new(lambda: Complex64, theta: Complex64, phi: Complex64) -> Result<Self> {
        let s = GaussianState { lambda, theta, phi, branch_phase: 0.0 };
        s.check()?;
        Ok(s)
    }

    /// Normalized coherent state of unit width centred at `(x̄, p̄)`.
    pub fn coherent(x_mean: f64, p_mean: f64) -> Self {
        GaussianState {
            lambda: Complex64::new(0.0, 0.5),
            theta: Complex64::new(p_mean, -x_mean),
            phi: Complex64::new(0.0, 0.5 * x_mean * x_mean + 0.25 * PI.ln()),
            branch_phase: 0.0,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.lambda.im > 0.0) {
            return Err(Error::NonNormalizable { im_lambda: self.lambda.im });
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        (I * (self.lambda * x * x + self.theta * x + self.phi)).exp()
    }

    pub fn sample(&self, grid: &Grid) -> GridState {
        GridState {
            x0: grid.x0,
            dx: grid.dx,
            values: grid.points().map(|x| self.eval(x)).collect(),
        }
    }

    /// `∫|ψ|² dx` in closed form.
    pub fn norm_sq(&self) -> f64 {
        let (l, th, ph) = (self.lambda.im, self.theta.im, self.phi.im);
        (PI / (2.0 * l)).sqrt() * (th * th / (2.0 * l) - 2.0 * ph).exp()
    }

    /// Closed-form first and second moments.
    pub fn moments(&self, t: f64) -> Result<(FirstMoments, SecondMoments)> {
        self.check()?;
        let n = self.norm_sq();
        let (l, th) = (self.lambda, self.theta);
        let xbar = -th.im / (2.0 * l.im);
        let x2n = 1.0 / (4.0 * l.im) + xbar * xbar;
        let pbar = 2.0 * l.re * xbar + th.re;
        let p2 = n * (4.0 * l.norm_sqr() * x2n + 4.0 * (l * th.conj()).re * xbar + th.norm_sqr());
        let pxxp = 2.0 * n * (2.0 * l.re * x2n + th.re * xbar);
        Ok((
            FirstMoments { x: xbar, p: pbar, norm: n, t },
            SecondMoments { p2, x2: n * x2n, pxxp, norm: n, t },
        ))
    }
}

/// Closed-form `∫ G(x, y, t) φ(y) dy` for a Gaussian `φ`, principal branch.
pub fn propagate_gaussian(kp: &KernelParameters, s: &GaussianState) -> Result<GaussianState> {
    let (out, arg) = propagate_raw(kp, s)?;
    Ok(apply_branch(out, -0.5 * arg))
}

/// Result without the prefactor phase, and the principal `arg(iμ) + arg(−iK)`.
fn propagate_raw(kp: &KernelParameters, s: &GaussianState) -> Result<(GaussianState, f64)> {
    s.check()?;
    check_mu(kp)?;
    let k = s.lambda + kp.gamma;
    if k.norm() < 1e-12 {
        return Err(Error::DegenerateWidth { modulus: k.norm() });
    }
    let lambda = kp.alpha - kp.beta * kp.beta / (4.0 * k);
    let theta = -kp.beta * s.theta / (2.0 * k);
    let modulus = 1.0 / (2.0 * kp.mu.abs() * k.norm()).sqrt();
    let phi = s.phi - s.theta * s.theta / (4.0 * k) - I * modulus.ln();
    let arg = Complex64::new(0.0, kp.mu).arg() + (-I * k).arg();
    let out = GaussianState { lambda, theta, phi, branch_phase: 0.0 };
    out.check()?;
    Ok((out, arg))
}

fn apply_branch(mut s: GaussianState, phase: f64) -> GaussianState {
    s.phi += phase;
    s.branch_phase = phase;
    s
}

fn wrap(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Propagate `s` to each of `times` (increasing), tracking the square-root
/// branch continuously from one output to the next.
pub fn propagate_gaussian_sweep(
    kernel: &dyn KernelSource,
    s: &GaussianState,
    times: &[f64],
) -> Result<Vec<GaussianState>> {
    let raw: Vec<(GaussianState, f64)> = times
        .iter()
        .map(|&t| kernel.kernel(t).and_then(|kp| propagate_raw(&kp, s)))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(raw.len());
    let mut prev: Option<f64> = None;
    for (st, arg) in raw {
        let unwrapped = match prev {
            None => arg,
            Some(p) => p + wrap(arg - p),
        };
        prev = Some(unwrapped);
        out.push(apply_branch(st, -0.5 * unwrapped));
    }
    Ok(out)
}

/// Uniform grid `x_j = x0 + j·dx`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x0: f64,
    pub dx: f64,
    pub n: usize,
}

impl Grid {
    /// `n` points spanning `[lo, hi]` inclusive.
    pub fn span(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 8 || !(hi > lo) {
            return Err(Error::InvalidInput(format!("grid needs n >= 8 and hi > lo, got n={n}, [{lo}, {hi}]")));
        }
        Ok(Grid { x0: lo, dx: (hi - lo) / (n - 1) as f64, n })
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|j| self.x(j))
    }

    pub fn x_max(&self) -> f64 {
        self.x(0).abs().max(self.x(self.n - 1).abs())
    }
}

/// Samples of a wavefunction on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub x0: f64,
    pub dx: f64,
    pub values: Vec<Complex64>,
}

impl GridState {
    pub fn new(x0: f64, dx: f64, values: Vec<Complex64>) -> Result<Self> {
        if !(dx > 0.0) || values.len() < 8 {
            return Err(Error::InvalidInput(format!("grid state needs dx > 0 and >= 8 values, got dx={dx}, n={}", values.len())));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidInput("grid state has non-finite values".into()));
        }
        Ok(GridState { x0, dx, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        GridState { x0: grid.x0, dx: grid.dx, values: vec![Complex64::new(0.0, 0.0); grid.n] }
    }

    pub fn grid(&self) -> Grid {
        Grid { x0: self.x0, dx: self.dx, n: self.values.len() }
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    /// Discrete `dx·Σ|ψ_j|²`.
    pub fn norm_sq(&self) -> f64 {
        self.dx * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest pointwise difference from `other` (same grid assumed).
    pub fn sup_distance(&self, other: &GridState) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Whether both end values are below `rel·max|ψ|`.
    pub fn decays(&self, rel: f64) -> bool {
        let m = self.max_abs();
        let n = self.values.len();
        self.values[0].norm() <= rel * m && self.values[n - 1].norm() <= rel * m
    }
}

/// Trapezoidal quadrature of the Cauchy integral onto `target`.
pub fn propagate_grid(kp: &KernelParameters, phi: &GridState, target: &Grid) -> Result<GridState> {
    check_mu(kp)?;
    let peak = phi.max_abs();
    if peak == 0.0 {
        return Ok(GridState::zeros(target));
    }
    if !phi.decays(1e-10) {
        return Err(Error::InvalidInput("source state does not decay to 1e-10 of its peak at the grid ends".into()));
    }
    let dy = phi.dx;
    let support = phi
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > 1e-10 * peak)
        .map(|(j, _)| phi.x(j).abs())
        .fold(0.0, f64::max);
    let advance = kp.beta.abs() * target.x_max() * dy + 2.0 * kp.gamma.abs() * support * dy;
    if advance > FRAC_PI_4 {
        return Err(Error::UnderResolved(format!(
            "phase advance {advance:.3} per source step exceeds pi/4; refine the source grid"
        )));
    }
    let pre = prefactor(kp.mu) * dy;
    let n = phi.values.len();
    let values = (0..target.n)
        .into_par_iter()
        .map(|i| {
            let x = target.x(i);
            let ax2 = kp.alpha * x * x;
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in phi.values.iter().enumerate() {
                let y = phi.x(j);
                let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                let phase = ax2 + kp.beta * x * y + kp.gamma * y * y;
                acc += Complex64::from_polar(w, phase) * v;
            }
            acc * pre
        })
        .collect();
    Ok(GridState { x0: target.x0, dx: target.dx, values })
}

/// `|i∂ₜG − ĤG| / |G|` at `(x, y, t)` by central differences of step `fd_step`.
///
/// The differences are taken on `ln G` through log-ratios such as
/// `ln(G(x + h)/G(x))`, so `ĤG/G = −a((ln G)'' + (ln G)'²) + bx² − i(c x (ln G)' + d)`.
/// Since `ln G` is quadratic in `x`, only the time difference carries truncation error.
pub fn schrodinger_residual(
    tc: &TimeCoefficients,
    kernel: &dyn KernelSource,
    x: f64,
    y: f64,
    t: f64,
    fd_step: f64,
) -> Result<f64> {
    tc.require(Convention::EquationForm)?;
    let h = fd_step;
    let kp = kernel.kernel(t)?;
    let kp_plus = kernel.kernel(t + h)?;
    let kp_minus = kernel.kernel(t - h)?;
    let g = |k: &KernelParameters, x: f64| green_eval(k, x, y);
    let g0 = g(&kp, x)?;
    let (tp, tm) = ((g(&kp_plus, x)? / g0).ln(), (g(&kp_minus, x)? / g0).ln());
    let (xp, xm) = ((g(&kp, x + h)? / g0).ln(), (g(&kp, x - h)? / g0).ln());
    let lt = (tp - tm) / (2.0 * h);
    let lx = (xp - xm) / (2.0 * h);
    let lxx = (xp + xm) / (h * h);
    let k = tc.checked_jets(t)?.values();
    let hg = -k.a * (lxx + lx * lx) + k.b * x * x - I * (k.c * x * lx + k.d);
    Ok((I * lt - hg).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristic::{closed_form_kernel, ClosedFormKernel};
    use crate::coefficients::{builtin_coefficients, ModelId, ModelSpec};

    fn sho() -> ModelSpec {
        ModelSpec::new(ModelId::SimpleHarmonic).omega0(1.0)
    }

    #[test]
    fn sho_green_at_quarter_period() {
        let kp = closed_form_kernel(&sho(), std::f64::consts::FRAC_PI_2).unwrap();
        let (x, y) = (0.3, -0.7);
        let g = green_eval(&kp, x, y).unwrap();
        let expect = Complex64::new(0.0, 2.0 * PI).sqrt().inv() * Complex64::from_polar(1.0, -x * y);
        assert!((g - expect).norm() < 1e-14);
        assert!((g - green_eval(&kp, y, x).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn free_gaussian_spreads() {
        let spec = ModelSpec::new(ModelId::FreeParticle);
        let s = GaussianState::new(Complex64::new(0.0, 0.5), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)).unwrap();
        for &t in &[0.3, 1.0, 2.5] {
            let out = propagate_gaussian(&closed_form_kernel(&spec, t).unwrap(), &s).unwrap();
            assert!((out.lambda.im - 1.0 / (2.0 * (1.0 + t * t))).abs() < 1e-14);
            assert!((out.norm_sq() - s.norm_sq()).abs() < 1e-12);
        }
    }

    #[test]
    fn coherent_state_moments() {
        let s = GaussianState::coherent(1.5, -0.5);
        let (f, m) = s.moments(0.0).unwrap();
        assert!((f.norm - 1.0).abs() < 1e-14);
        assert!((f.x - 1.5).abs() < 1e-14 && (f.p + 0.5).abs() < 1e-14);
        assert!((m.x2 - (0.5 + 2.25)).abs() < 1e-13);
        assert!((m.p2 - (0.5 + 0.25)).abs() < 1e-13);
        assert!((m.pxxp - 2.0 * 1.5 * -0.5).abs() < 1e-13);
    }

    #[test]
    fn sho_coherent_state_recentres() {
        let s = GaussianState::coherent(1.0, 0.0);
        for &t in &[0.4, 1.1, 2.0] {
            let out = propagate_gaussian(&closed_form_kernel(&sho(), t).unwrap(), &s).unwrap();
            let (f, _) = out.moments(t).unwrap();
            assert!((f.x - t.cos()).abs() < 1e-12);
            assert!((f.norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_quadrature_matches_closed_form() {
        let grid = Grid::span(-12.0, 12.0, 2048).unwrap();
        let s = GaussianState::coherent(0.5, 0.3);
        let kp = closed_form_kernel(&sho(), 0.7).unwrap();
        let num = propagate_grid(&kp, &s.sample(&grid), &grid).unwrap();
        let exact = propagate_gaussian(&kp, &s).unwrap().sample(&grid);
        assert!(num.sup_distance(&exact) < 1e-6);
    }

    #[test]
    fn zero_state_stays_zero() {
        let grid = Grid::span(-5.0, 5.0, 64).unwrap();
        let kp = closed_form_kernel(&sho(), 0.7).unwrap();
        let out = propagate_grid(&kp, &GridState::zeros(&grid), &grid).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn under_resolved_is_reported() {
        let grid = Grid::span(-12.0, 12.0, 128).unwrap();
        let kp = closed_form_kernel(&sho(), 0.05).unwrap();
        let s = GaussianState::coherent(0.0, 0.0).sample(&grid);
        assert!(matches!(propagate_grid(&kp, &s, &grid), Err(Error::UnderResolved(_))));
    }

    #[test]
    fn residual_small_and_second_order() {
        let spec = ModelSpec::new(ModelId::ModifiedParametric).omega0(1.0).lambda(0.2).delta(0.5);
        let tc = builtin_coefficients(&spec, Convention::EquationForm).unwrap();
        let k = ClosedFormKernel(spec);
        let r1 = schrodinger_residual(&tc, &k, 0.3, -0.2, 0.4, 1e-3).unwrap();
        // truncation-limited: the third time derivative of ln G is ~140 here
        assert!(r1 < 3e-5, "{r1}");
        let a = schrodinger_residual(&tc, &k, 0.3, -0.2, 0.4, 2e-2).unwrap();
        let b = schrodinger_residual(&tc, &k, 0.3, -0.2, 0.4, 1e-2).unwrap();
        assert!((a / b - 4.0).abs() < 0.5, "{a} {b} {}", a / b);
    }

    #[test]
    fn sweep_tracks_ground_state_phase_through_caustics() {
        // the ground state only picks up exp(-it/2); the sweep must follow it past t = π
        let times: Vec<f64> = (0..620).map(|i| 0.005 + i as f64 * 0.01).collect();
        let s = GaussianState::coherent(0.0, 0.0);
        let out = propagate_gaussian_sweep(&ClosedFormKernel(sho()), &s, &times).unwrap();
        for (st, &t) in out.iter().zip(&times) {
            assert!((st.phi.re + 0.5 * t).abs() < 1e-9, "t={t}: {}", st.phi.re);
        }
        for w in out.windows(2) {
            assert!((w[1].branch_phase - w[0].branch_phase).abs() < PI / 2.0);
        }
    }
}

//! Characteristic equation `μ'' − τ μ' + 4σ μ = 0` with `μ(0) = 0`,
//! `μ'(0) = 2a(0)`, and the kernel parameters built from its solution:
//!
//! ```text
//! α = μ'/(4aμ) − d/(2a)
//! h = exp(−∫(c − 2d))
//! β = −h/μ
//! γ = a h²/(μ μ') + d(0)/(2a(0)) − 4 ∫ a σ h²/μ'²
//! ```
//!
//! (equation-form coefficients throughout).

use serde::{Deserialize, Serialize};

use crate::coefficients::{tau_sigma, Convention, ModelId, ModelSpec, TimeCoefficients};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::ode::{self, OdeOptions, OdeSolution};
use crate::quadrature;

/// Relative guard band around caustics: kernels with `|μ| < CAUSTIC_GUARD·scale` are refused.
pub const CAUSTIC_GUARD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParameters {
    pub t: f64,
    pub mu: f64,
    pub mu_prime: f64,
    pub h: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Anything that can hand out kernel parameters at a time `t`.
pub trait KernelSource: Sync {
    fn kernel(&self, t: f64) -> Result<KernelParameters>;
}

/// Dense solution of the characteristic equation.
#[derive(Debug, Clone)]
pub struct MuPath {
    sol: OdeSolution<2>,
    caustics: Vec<f64>,
    turning_points: Vec<f64>,
    scale: f64,
}

impl MuPath {
    pub fn grid(&self) -> &[f64] {
        &self.sol.t
    }

    pub fn mu_values(&self) -> Vec<f64> {
        self.sol.y.iter().map(|y| y[0]).collect()
    }

    pub fn mu_prime_values(&self) -> Vec<f64> {
        self.sol.y.iter().map(|y| y[1]).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.sol.t_end()
    }

    /// `(μ, μ')` at `t` by Hermite interpolation.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let y = self.sol.value(t);
        (y[0], y[1])
    }

    /// Zeros of μ after `t = 0` (focal points).
    pub fn caustics(&self) -> &[f64] {
        &self.caustics
    }

    /// Zeros of μ'.
    pub fn turning_points(&self) -> &[f64] {
        &self.turning_points
    }

    /// Largest |μ| on the path; the caustic guard is relative to it.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// First caustic, if any, with a bracket from the grid.
    pub fn first_caustic(&self) -> Option<f64> {
        self.caustics.first().copied()
    }

    fn check_guard(&self, t: f64, mu: f64) -> Result<()> {
        if mu.abs() < CAUSTIC_GUARD * self.scale {
            let near = self
                .caustics
                .iter()
                .copied()
                .min_by(|a, b| (a - t).abs().partial_cmp(&(b - t).abs()).unwrap())
                .unwrap_or(t);
            return Err(Error::CausticEncountered { t, lo: near.min(t), hi: near.max(t) });
        }
        Ok(())
    }
}

fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Integrate the characteristic equation on `[0, t_end]` with local error `tol`.
pub fn solve_characteristic(tc: &TimeCoefficients, t_end: f64, tol: f64) -> Result<MuPath> {
    tc.require(Convention::EquationForm)?;
    if !(t_end > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("need t_end > 0 and tol > 0, got {t_end}, {tol}")));
    }
    if t_end >= tc.domain_end() {
        return Err(Error::SingularCoefficient { t: tc.domain_end() });
    }
    let a0 = tc.a(0.0);
    let (tau0, sigma0) = tau_sigma(tc, 0.0)?;
    let freq = 1.0 + tau0.abs() + (4.0 * sigma0).abs().sqrt();
    let opts = OdeOptions {
        rtol: tol,
        atol: tol,
        h_max: ((3840.0 * tol).powf(0.25) / freq).min(0.05),
        ..Default::default()
    };
    let mut bad_t = None;
    let rhs = |t: f64, y: &[f64; 2]| match tau_sigma(tc, t) {
        Ok((tau, sigma)) => [y[1], tau * y[1] - 4.0 * sigma * y[0]],
        Err(_) => {
            bad_t.get_or_insert(t);
            [f64::NAN, f64::NAN]
        }
    };
    let sol = ode::integrate(rhs, 0.0, [0.0, 2.0 * a0], t_end, &opts, &[], |_, _| false);
    if let Some(t) = bad_t {
        if sol.is_err() {
            return Err(Error::SingularCoefficient { t });
        }
    }
    let sol = sol?;
    let scale = sol.y.iter().map(|y| y[0].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    let mut caustics = Vec::new();
    let mut turning_points = Vec::new();
    for i in 0..sol.t.len() - 1 {
        let (t0, t1) = (sol.t[i], sol.t[i + 1]);
        let (y0, y1) = (sol.y[i], sol.y[i + 1]);
        if i > 0 && y0[0] != 0.0 && (y0[0] > 0.0) != (y1[0] > 0.0) {
            caustics.push(bisect_root(|s| sol.value(s)[0], t0, t1));
        }
        if (y0[1] > 0.0) != (y1[1] > 0.0) && y0[1] != 0.0 {
            turning_points.push(bisect_root(|s| sol.value(s)[1], t0, t1));
        }
    }
    Ok(MuPath { sol, caustics, turning_points, scale })
}

/// `ln h(t) = −∫₀ᵗ (c − 2d) ds` in equation form.
pub fn ln_h(tc: &TimeCoefficients, t: f64) -> Result<f64> {
    tc.require(Convention::EquationForm)?;
    let v = quadrature::integrate_default(
        |s| {
            let k = tc.eval(s);
            k.c - 2.0 * k.d
        },
        0.0,
        t,
    )?;
    Ok(-v)
}

/// Kernel parameters from the numerical characteristic solution.
pub fn kernel_parameters(tc: &TimeCoefficients, path: &MuPath, t: f64) -> Result<KernelParameters> {
    tc.require(Convention::EquationForm)?;
    if !(t > 0.0) || t > path.t_end() {
        return Err(Error::InvalidInput(format!("t = {t} outside (0, {}]", path.t_end())));
    }
    let (mu, mu_prime) = path.eval(t);
    path.check_guard(t, mu)?;
    let k = tc.checked_jets(t)?;
    let (a, d) = (k.a.value, k.d.value);
    let h = ln_h(tc, t)?.exp();
    let alpha = mu_prime / (4.0 * a * mu) - d / (2.0 * a);
    let beta = -h / mu;
    let gamma = gamma_continued(tc, path, t)?;
    Ok(KernelParameters { t, mu, mu_prime, h, alpha, beta, gamma })
}

/// γ(t) continued past turning points of μ.
///
/// The textbook formula integrates `aσh²/μ'²`, which is not integrable at a
/// zero of μ'. Between caustics we integrate `γ' = −a h²/μ²` instead, and the
/// textbook difference form is used only on windows that contain a caustic but
/// no turning point.
fn gamma_continued(tc: &TimeCoefficients, path: &MuPath, t: f64) -> Result<f64> {
    let rtol = 1e-11;
    let atol = 1e-13;
    let h2 = |s: f64| -> f64 { (2.0 * ln_h(tc, s).unwrap_or(f64::NAN)).exp() };
    let big_f = |s: f64| -> f64 {
        let (m, mp) = path.eval(s);
        tc.a(s) * h2(s) / (m * mp)
    };
    let g = |s: f64| -> f64 {
        let (_, mp) = path.eval(s);
        let sigma = tau_sigma(tc, s).map(|x| x.1).unwrap_or(f64::NAN);
        tc.a(s) * sigma * h2(s) / (mp * mp)
    };
    let dgamma = |s: f64| -> f64 {
        let (m, _) = path.eval(s);
        -tc.a(s) * h2(s) / (m * m)
    };

    let first_landmark = path
        .turning_points
        .first()
        .copied()
        .unwrap_or(f64::INFINITY)
        .min(path.caustics.first().copied().unwrap_or(f64::INFINITY));
    let s0 = t.min(0.5 * first_landmark);
    let k0 = tc.eval(0.0);
    let mut gamma = big_f(s0) + k0.d / (2.0 * k0.a) - 4.0 * quadrature::integrate(g, 0.0, s0, rtol, atol)?;
    let mut current = s0;

    for &c in path.caustics.iter().filter(|&&c| c > s0 && c < t) {
        let before = path.turning_points.iter().copied().filter(|&z| z < c).last().unwrap_or(0.0);
        let after = path
            .turning_points
            .iter()
            .copied()
            .find(|&z| z > c)
            .unwrap_or(c + (c - before));
        let p = 0.5 * (before + c);
        let r = t.min(0.5 * (c + after));
        if p > current {
            gamma += quadrature::integrate(dgamma, current, p, rtol, atol)?;
        }
        let p = p.max(current);
        gamma += big_f(r) - big_f(p) - 4.0 * quadrature::integrate(g, p, r, rtol, atol)?;
        current = r;
    }
    if t > current {
        gamma += quadrature::integrate(dgamma, current, t, rtol, atol)?;
    }
    if gamma.is_finite() {
        Ok(gamma)
    } else {
        Err(Error::NonFiniteCoefficient { t })
    }
}

/// Kernel parameters evaluated from a solved characteristic path.
pub struct NumericKernel<'a> {
    pub tc: &'a TimeCoefficients,
    pub path: &'a MuPath,
}

impl KernelSource for NumericKernel<'_> {
    fn kernel(&self, t: f64) -> Result<KernelParameters> {
        kernel_parameters(self.tc, self.path, t)
    }
}

/// Kernel parameters from the closed-form catalog.
pub struct ClosedFormKernel(pub ModelSpec);

impl KernelSource for ClosedFormKernel {
    fn kernel(&self, t: f64) -> Result<KernelParameters> {
        closed_form_kernel(&self.0, t)
    }
}

/// Closed-form μ of a built-in model as a jet in `t`.
pub fn closed_form_mu_jet(spec: &ModelSpec, t: f64) -> Jet {
    let tt = Jet::var(t);
    let (w0, l) = (spec.omega0, spec.lambda);
    let w = spec.omega();
    let wt = tt * w;
    match spec.model {
        ModelId::CaldirolaKanai | ModelId::ModifiedCaldirolaKanai => {
            (tt * -l).exp() * wt.sin() * (w0 / w)
        }
        ModelId::United => (tt * -(l - spec.mu_param)).exp() * wt.sin() * (w0 / w),
        ModelId::ModifiedOscillator => tt.cos() * tt.sinh() + tt.sin() * tt.cosh(),
        ModelId::CjCoordinate => wt.sin() / ((tt * l).cosh() * w),
        ModelId::CjMomentum => {
            (wt.cos() * (tt * l).sinh() * l + wt.sin() * (tt * l).cosh() * w) / w0
        }
        ModelId::ModifiedParametric => wt.sin() * (tt * l + spec.delta).tanh() * spec.delta.tanh(),
        ModelId::ParametricSech2 => {
            (wt.cos() * (tt * l).sinh() * l + wt.sin() * (tt * l).cosh() * w)
                / ((tt * l).cosh() * (w * w + l * l))
        }
        ModelId::SimpleHarmonic => wt.sin() / w,
        ModelId::FreeParticle => tt,
    }
}

/// `(μ, μ')` of a built-in model in closed form.
pub fn closed_form_mu(spec: &ModelSpec, t: f64) -> Result<(f64, f64)> {
    spec.validate()?;
    let j = closed_form_mu_jet(spec, t);
    Ok((j.value, j.first))
}

/// Closed-form μ for coefficients that came from the built-in catalog.
pub fn closed_form_mu_for(tc: &TimeCoefficients, t: f64) -> Result<(f64, f64)> {
    match tc.model() {
        Some(spec) => closed_form_mu(spec, t),
        None => Err(Error::NoClosedForm("user-defined coefficients".into())),
    }
}

/// Closed-form kernel parameters of a built-in model.
pub fn closed_form_kernel(spec: &ModelSpec, t: f64) -> Result<KernelParameters> {
    spec.validate()?;
    if !(t > 0.0) || t >= spec.domain_end() {
        return Err(Error::InvalidInput(format!("t = {t} outside (0, {})", spec.domain_end())));
    }
    let (mu, mu_prime) = closed_form_mu(spec, t)?;
    // Reference amplitude for the guard: the envelope of μ near t.
    let envelope = match spec.model {
        ModelId::FreeParticle => t,
        ModelId::ModifiedOscillator => t.cosh() + t.sinh(),
        _ => {
            let w = spec.omega();
            let alt = closed_form_mu_jet(spec, t).first / w;
            (mu * mu + alt * alt).sqrt()
        }
    };
    if mu.abs() < CAUSTIC_GUARD * envelope {
        return Err(Error::CausticEncountered { t, lo: t, hi: t });
    }
    let (w0, l) = (spec.omega0, spec.lambda);
    let w = spec.omega();
    let (s, c) = (w * t).sin_cos();
    let (sh, ch) = ((l * t).sinh(), (l * t).cosh());
    let mut h = 1.0;
    let (alpha, beta, gamma) = match spec.model {
        ModelId::CaldirolaKanai => {
            let e = (2.0 * l * t).exp();
            (
                (w * c - l * s) * e / (2.0 * w0 * s),
                -w * (l * t).exp() / (w0 * s),
                (w * c + l * s) / (2.0 * w0 * s),
            )
        }
        ModelId::ModifiedCaldirolaKanai => {
            let e = (2.0 * l * t).exp();
            (
                (w * c + l * s) * e / (2.0 * w0 * s),
                -w * (l * t).exp() / (w0 * s),
                (w * c - l * s) / (2.0 * w0 * s),
            )
        }
        ModelId::United => {
            let m = spec.mu_param;
            h = (m * t).exp();
            let e = (2.0 * l * t).exp();
            (
                (w * c + (m - l) * s) * e / (2.0 * w0 * s),
                -w * (l * t).exp() / (w0 * s),
                (w * c + (l - m) * s) / (2.0 * w0 * s),
            )
        }
        ModelId::ModifiedOscillator => {
            let (st, ct) = t.sin_cos();
            let (sht, cht) = (t.sinh(), t.cosh());
            let m = ct * sht + st * cht;
            (
                (ct * cht - st * sht) / (2.0 * m),
                -1.0 / m,
                (ct * cht + st * sht) / (2.0 * m),
            )
        }
        ModelId::CjCoordinate => (
            ch * (w * c * ch - l * s * sh) / (2.0 * s),
            // the extra factor 1/2 of the commonly quoted β is dropped here; β·μ = −1 fixes it
            -w * ch / s,
            w * c / (2.0 * s),
        ),
        ModelId::CjMomentum => {
            let dd = l * c * sh + w * s * ch;
            (
                w0 * c / (2.0 * ch * dd),
                -w0 / dd,
                w0 * (w * c * ch - l * s * sh) / (2.0 * w * dd),
            )
        }
        ModelId::ModifiedParametric => {
            let u = l * t + spec.delta;
            let cot = c / s;
            let coth_u = 1.0 / u.tanh();
            let coth_d = 1.0 / spec.delta.tanh();
            (
                0.5 * cot * coth_u * coth_u,
                -coth_d * coth_u / s,
                0.5 * cot * coth_d * coth_d,
            )
        }
        ModelId::ParametricSech2 => {
            let th = (l * t).tanh();
            let dn = w * s + l * th * c;
            let k2 = w * w + l * l;
            (
                ((w * w + l * l / (ch * ch)) * c - l * w * th * s) / (2.0 * dn),
                -k2 / dn,
                k2 * (w * c - l * th * s) / (2.0 * w * dn),
            )
        }
        ModelId::SimpleHarmonic => (w * c / (2.0 * s), -w / s, w * c / (2.0 * s)),
        ModelId::FreeParticle => (1.0 / (2.0 * t), -1.0 / t, 1.0 / (2.0 * t)),
    };
    Ok(KernelParameters { t, mu, mu_prime, h, alpha, beta, gamma })
}

/// Kernel of the coordinate-representation damped model with ω₀ = 0:
/// `μ = tanh(λt)/λ`, `α = γ = λ/(2 tanh λt)`, `β = −λ/tanh λt`.
pub fn cj_pure_damping_kernel(lambda: f64, t: f64) -> Result<KernelParameters> {
    if lambda == 0.0 || !(t > 0.0) {
        return Err(Error::InvalidInput("need lambda != 0 and t > 0".into()));
    }
    let th = (lambda * t).tanh();
    let ch = (lambda * t).cosh();
    Ok(KernelParameters {
        t,
        mu: th / lambda,
        mu_prime: 1.0 / (ch * ch),
        h: 1.0,
        alpha: lambda / (2.0 * th),
        beta: -lambda / th,
        gamma: lambda / (2.0 * th),
    })
}

/// Residual of the elementary antiderivative used for the coordinate-representation
/// damped kernel.
///
/// The derivative of `(λ cos φ sinh λt + ω sin φ cosh λt)/(ω cos φ cosh λt − λ sin φ sinh λt)`,
/// `φ = ωt + δ`, is taken by forward-mode differentiation and compared against
/// `ω ω₀² cosh² λt / (ω cos φ cosh λt − λ sin φ sinh λt)²` with `ω₀² = ω² + λ²`.
pub fn verify_cj_antiderivative(lambda: f64, omega: f64, delta: f64, t: f64) -> f64 {
    let tt = Jet::var(t);
    let p = tt * omega + delta;
    let (sh, ch) = ((tt * lambda).sinh(), (tt * lambda).cosh());
    let den = p.cos() * ch * omega - p.sin() * sh * lambda;
    let lhs = (p.cos() * sh * lambda + p.sin() * ch * omega) / den;
    let w0sq = omega * omega + lambda * lambda;
    let rhs = omega * w0sq * ch.value * ch.value / (den.value * den.value);
    (lhs.first - rhs).abs()
}

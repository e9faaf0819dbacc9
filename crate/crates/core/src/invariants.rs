//! Quadratic and linear dynamical invariants.
//!
//! Quadratic operators are written `A p² + B x² + C px + D xp` in the
//! Hamiltonian-form convention; every invariant built here has `C = D`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficients::{Convention, ModelId, ModelSpec, TimeCoefficients};
use crate::dynamics::{FirstMoments, SecondMoments};
use crate::error::{Error, Result};
use crate::jet::{fd_step, Jet, ScalarFunction};
use crate::ode::{self, OdeOptions, OdeSolution};
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub t: f64,
}

impl QuadraticForm {
    pub fn new(a: f64, b: f64, c: f64, d: f64, t: f64) -> Self {
        QuadraticForm { a, b, c, d, t }
    }

    /// `A p² + B x² + C(px + xp)`.
    pub fn symmetric(a: f64, b: f64, c: f64, t: f64) -> Self {
        QuadraticForm { a, b, c, d: c, t }
    }

    pub fn zero(t: f64) -> Self {
        QuadraticForm::new(0.0, 0.0, 0.0, 0.0, t)
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// `⟨O⟩ = A⟨p²⟩ + B⟨x²⟩ + ½(C + D)⟨px + xp⟩ + ½ i (D − C)⟨1⟩`.
    pub fn expectation_complex(&self, m: &SecondMoments) -> Complex64 {
        Complex64::new(
            self.a * m.p2 + self.b * m.x2 + 0.5 * (self.c + self.d) * m.pxxp,
            0.5 * (self.d - self.c) * m.norm,
        )
    }

    /// Real part of the expectation (the whole value when `C = D`).
    pub fn expectation(&self, m: &SecondMoments) -> f64 {
        self.expectation_complex(m).re
    }

    /// `AB − ((C + D)/2)²`; non-negative for a positive semidefinite form.
    pub fn discriminant(&self) -> f64 {
        let s = 0.5 * (self.c + self.d);
        self.a * self.b - s * s
    }

    pub fn scaled(&self, k: f64) -> Self {
        QuadraticForm::new(k * self.a, k * self.b, k * self.c, k * self.d, self.t)
    }

    /// Largest coefficient difference.
    pub fn max_abs_diff(&self, o: &QuadraticForm) -> f64 {
        self.coefficients()
            .iter()
            .zip(o.coefficients())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Largest coefficient difference relative to the largest coefficient of `o`.
    pub fn rel_diff(&self, o: &QuadraticForm) -> f64 {
        let scale = o.coefficients().iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        self.max_abs_diff(o) / scale
    }
}

/// A time-dependent quadratic operator.
pub trait OperatorPath: Sync {
    fn form(&self, t: f64) -> QuadraticForm;

    /// Time derivative of the coefficients; central differences by default.
    fn derivative(&self, t: f64) -> QuadraticForm {
        let h = fd_step(t).max(1e-5);
        let (p, m) = (self.form(t + h), self.form(t - h));
        let k = 0.5 / h;
        QuadraticForm::new((p.a - m.a) * k, (p.b - m.b) * k, (p.c - m.c) * k, (p.d - m.d) * k, t)
    }
}

impl<F> OperatorPath for F
where
    F: Fn(f64) -> QuadraticForm + Sync,
{
    fn form(&self, t: f64) -> QuadraticForm {
        self(t)
    }
}

/// The catalogued energy operator of a model, with exact time derivatives.
#[derive(Debug, Clone, Copy)]
pub struct CatalogPath(pub ModelSpec);

impl OperatorPath for CatalogPath {
    fn form(&self, t: f64) -> QuadraticForm {
        let [a, b, c] = catalog_jets(&self.0, t);
        QuadraticForm::symmetric(a.value, b.value, c.value, t)
    }

    fn derivative(&self, t: f64) -> QuadraticForm {
        let [a, b, c] = catalog_jets(&self.0, t);
        QuadraticForm::symmetric(a.first, b.first, c.first, t)
    }
}

fn catalog_jets(spec: &ModelSpec, t: f64) -> [Jet; 3] {
    let tt = Jet::var(t);
    let (w0, l) = (spec.omega0, spec.lambda);
    let w = spec.omega();
    let k = Jet::constant;
    match spec.model {
        ModelId::CaldirolaKanai | ModelId::ModifiedCaldirolaKanai => {
            let sign = if spec.model == ModelId::CaldirolaKanai { 1.0 } else { -1.0 };
            [
                (tt * (-2.0 * l)).exp() * (w0 / 2.0),
                (tt * (2.0 * l)).exp() * (w0 / 2.0),
                k(sign * l / 2.0),
            ]
        }
        ModelId::United => {
            let m = spec.mu_param;
            [
                (tt * (m - 2.0 * l)).exp() * (w0 / 2.0),
                (tt * (m + 2.0 * l)).exp() * (w0 / 2.0),
                (tt * m).exp() * ((l - m) / 2.0),
            ]
        }
        ModelId::ModifiedOscillator => {
            let two = tt * 2.0;
            [two.cos() * 0.5, two.cos() * -0.5, two.sin() * 0.5]
        }
        ModelId::CjCoordinate => {
            let (sh, ch) = ((tt * l).sinh(), (tt * l).cosh());
            [
                ch.square().recip() * 0.5,
                (sh.square() * (w0 * w0) + w * w) * 0.5,
                (tt * l).tanh() * (l / 2.0),
            ]
        }
        ModelId::CjMomentum => {
            let (sh, ch) = ((tt * l).sinh(), (tt * l).cosh());
            [
                (sh.square() * (w0 * w0) + w * w) / (2.0 * w0),
                ch.square().recip() * (w0 / 2.0),
                (tt * l).tanh() * (-l / 2.0),
            ]
        }
        ModelId::ModifiedParametric => {
            let th2 = (tt * l + spec.delta).tanh().square();
            [th2, th2.recip(), k(0.0)]
        }
        ModelId::ParametricSech2 => {
            let (sh, ch) = ((tt * l).sinh(), (tt * l).cosh());
            let kappa2 = (tt * l).tanh().square() * (l * l) + w * w;
            let c0 = w * w * (w * w + l * l).powi(2);
            let ch6 = ch.powi(6);
            [
                kappa2,
                (sh.square() * l.powi(6) + ch6 * c0) / (ch6 * kappa2),
                sh / ch.powi(3) * -(l.powi(3)),
            ]
        }
        ModelId::SimpleHarmonic => [k(0.5), k(w0 * w0 / 2.0), k(0.0)],
        ModelId::FreeParticle => [k(0.5), k(0.0), k(0.0)],
    }
}

/// Closed-form energy operator of a built-in model at `t`.
pub fn energy_operator_catalog(spec: &ModelSpec, t: f64) -> Result<QuadraticForm> {
    spec.validate()?;
    Ok(CatalogPath(*spec).form(t))
}

/// Coefficient path of a solved energy system.
#[derive(Debug, Clone)]
pub struct QuadraticPath {
    sol: OdeSolution<3>,
}

impl QuadraticPath {
    pub fn times(&self) -> &[f64] {
        &self.sol.t
    }

    pub fn t_end(&self) -> f64 {
        self.sol.t_end()
    }
}

impl OperatorPath for QuadraticPath {
    fn form(&self, t: f64) -> QuadraticForm {
        let y = self.sol.value(t);
        QuadraticForm::symmetric(y[0], y[1], y[2], t)
    }

    fn derivative(&self, t: f64) -> QuadraticForm {
        let dy = self.sol.eval(t).1;
        QuadraticForm::symmetric(dy[0], dy[1], dy[2], t)
    }
}

fn require_self_adjoint(tc: &TimeCoefficients, t_end: f64) -> Result<()> {
    for k in 0..=32 {
        let t = t_end * k as f64 / 32.0;
        if !tc.is_self_adjoint_at(t) {
            return Err(Error::InvalidInput(format!("coefficients are not self-adjoint at t = {t} (need c = d)")));
        }
    }
    Ok(())
}

/// Integrate `A' = −4(aC − dA)`, `B' = −4(dB − bC)`, `C' = −2(aB − bA)` from `init`.
pub fn solve_energy_system(
    tc: &TimeCoefficients,
    init: (f64, f64, f64),
    t_end: f64,
    tol: f64,
) -> Result<QuadraticPath> {
    tc.require(Convention::HamiltonianForm)?;
    require_self_adjoint(tc, t_end)?;
    if !(init.0.is_finite() && init.1.is_finite() && init.2.is_finite()) {
        return Err(Error::InvalidInput("initial coefficients must be finite".into()));
    }
    let rhs = |t: f64, y: &[f64; 3]| {
        let k = tc.eval(t);
        [
            -4.0 * (k.a * y[2] - k.d * y[0]),
            -4.0 * (k.d * y[1] - k.b * y[2]),
            -2.0 * (k.a * y[1] - k.b * y[0]),
        ]
    };
    let sol = ode::integrate(rhs, 0.0, [init.0, init.1, init.2], t_end, &OdeOptions::with_tol(tol), &[], |_, _| false)?;
    Ok(QuadraticPath { sol })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeVariable {
    PhysicalTime,
    ProperTime,
}

type JetFn = Arc<dyn Fn(f64) -> Jet + Send + Sync>;

/// A positive solution of `κ'' + ω²(t) κ = c₀/κ³` on a window.
#[derive(Clone)]
pub struct ErmakovSolution {
    kappa: JetFn,
    pub c0: f64,
    pub variable: TimeVariable,
    pub t_start: f64,
    pub t_end: f64,
    /// Largest Ermakov residual (or local error estimate for numerical solutions) seen on the window.
    pub residual: f64,
}

impl std::fmt::Debug for ErmakovSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ErmakovSolution")
            .field("c0", &self.c0)
            .field("variable", &self.variable)
            .field("window", &(self.t_start, self.t_end))
            .field("residual", &self.residual)
            .finish()
    }
}

impl ErmakovSolution {
    pub fn kappa(&self, t: f64) -> f64 {
        (self.kappa)(t).value
    }

    pub fn kappa_prime(&self, t: f64) -> f64 {
        (self.kappa)(t).first
    }

    pub fn kappa_jet(&self, t: f64) -> Jet {
        (self.kappa)(t)
    }
}

impl ScalarFunction for ErmakovSolution {
    fn jet(&self, t: f64) -> Jet {
        (self.kappa)(t)
    }
}

/// Integrate the Ermakov equation from `(κ0, κ0')` at `t = 0`.
pub fn solve_ermakov(
    omega_sq: impl Fn(f64) -> f64 + Send + Sync + 'static,
    c0: f64,
    init: (f64, f64),
    t_end: f64,
    tol: f64,
) -> Result<ErmakovSolution> {
    if !(init.0 > 0.0) {
        return Err(Error::InvalidInput(format!("kappa0 must be positive, got {}", init.0)));
    }
    let omega_sq = Arc::new(omega_sq);
    let w = omega_sq.clone();
    let rhs = move |t: f64, y: &[f64; 2]| [y[1], -w(t) * y[0] + c0 / y[0].powi(3)];
    let sol = ode::integrate(rhs, 0.0, [init.0, init.1], t_end, &OdeOptions::with_tol(tol), &[], |_, y| y[0] < 1e-8)?;
    if let Some(t) = sol.stopped_at {
        return Err(Error::KappaCollapse { t });
    }
    let residual = sol.max_error_ratio * tol;
    let sol = Arc::new(sol);
    let kappa: JetFn = Arc::new(move |t| {
        let y = sol.value(t);
        let second = -omega_sq(t) * y[0] + c0 / y[0].powi(3);
        Jet::new(y[0], y[1], second)
    });
    Ok(ErmakovSolution { kappa, c0, variable: TimeVariable::PhysicalTime, t_start: 0.0, t_end, residual })
}

/// `κ = (A u² + 2B uv + C v²)^{1/2}` as a jet.
pub fn pinney_kappa(u: Jet, v: Jet, a: f64, b: f64, c: f64) -> Jet {
    (u * u * a + u * v * (2.0 * b) + v * v * c).sqrt()
}

/// `κ'' + ω² κ − c₀/κ³` with `ω² = −(u u'' + v v'')/(u² + v²)`.
pub fn pinney_residual(u: Jet, v: Jet, kappa: Jet, c0: f64) -> f64 {
    let omega_sq = -(u.value * u.second + v.value * v.second) / (u.value * u.value + v.value * v.value);
    kappa.second + omega_sq * kappa.value - c0 / kappa.value.powi(3)
}

/// Pinney's superposition of two solutions of `z'' + ω² z = 0` with Wronskian `W`.
///
/// The constraint is `AC − B² = c₀/W²`; the classical normalization is `c₀ = 1`.
/// Positivity and the residual are checked at `times`.
pub fn pinney_superpose(
    u: impl Fn(Jet) -> Jet + Send + Sync + 'static,
    v: impl Fn(Jet) -> Jet + Send + Sync + 'static,
    (a, b, c): (f64, f64, f64),
    wronskian: f64,
    c0: f64,
    times: &[f64],
) -> Result<ErmakovSolution> {
    let expected = c0 / (wronskian * wronskian);
    let got = a * c - b * b;
    if (got - expected).abs() > 1e-10 * expected.abs().max(1.0) {
        return Err(Error::ConstraintViolated(format!("AC - B^2 = {got}, expected c0/W^2 = {expected}")));
    }
    let (u, v) = (Arc::new(u), Arc::new(v));
    let mut residual: f64 = 0.0;
    for &t in times {
        let tt = Jet::var(t);
        let (uj, vj) = (u(tt), v(tt));
        let k = pinney_kappa(uj, vj, a, b, c);
        if !(k.value > 0.0) {
            return Err(Error::NonPositiveForm { t });
        }
        residual = residual.max(pinney_residual(uj, vj, k, c0).abs());
    }
    let kappa: JetFn = Arc::new(move |t| {
        let tt = Jet::var(t);
        pinney_kappa(u(tt), v(tt), a, b, c)
    });
    let (lo, hi) = times.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &t| (l.min(t), h.max(t)));
    Ok(ErmakovSolution { kappa, c0, variable: TimeVariable::PhysicalTime, t_start: lo, t_end: hi, residual })
}

/// Lewis–Riesenfeld invariant `(κp − κ'x)² + c₀x²/κ²` at `t`.
pub fn lewis_riesenfeld_invariant(sol: &ErmakovSolution, t: f64) -> QuadraticForm {
    let k = sol.kappa_jet(t);
    QuadraticForm::symmetric(
        k.value * k.value,
        k.first * k.first + sol.c0 / (k.value * k.value),
        -k.value * k.first,
        t,
    )
}

fn integral(tc: &TimeCoefficients, t: f64, f: impl Fn(f64, f64) -> f64) -> Result<f64> {
    quadrature::integrate(
        |s| {
            let k = tc.eval(s);
            f(k.c, k.d)
        },
        0.0,
        t,
        1e-10,
        1e-14,
    )
}

/// Residual of `μ'' − (a'/a)μ' + (4ab + (a'/a − c − d)(c + d) − c' − d')μ − C₀(2a)²/μ³`.
pub fn auxiliary_residual(tc: &TimeCoefficients, mu: &dyn ScalarFunction, c0: f64, t: f64) -> Result<f64> {
    tc.require(Convention::HamiltonianForm)?;
    let k = tc.checked_jets(t)?;
    let m = mu.jet(t);
    let (a, ap, b) = (k.a.value, k.a.first, k.b.value);
    let (s, sp) = (k.c.value + k.d.value, k.c.first + k.d.first);
    let lhs = m.second - ap / a * m.first + (4.0 * a * b + (ap / a - s) * s - sp) * m.value;
    let rhs = if c0 == 0.0 { 0.0 } else { c0 * 4.0 * a * a / m.value.powi(3) };
    Ok((lhs - rhs).abs())
}

/// Quantities of the general (Theorem-1) form of the invariant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantDiagnostics {
    /// `exp(−∫(3c + d))`
    pub mu1: f64,
    /// `exp(∫(c + 3d))`
    pub mu2: f64,
    /// `exp(2∫(c + d))/(2a)`
    pub k: f64,
    /// `∫ 2a (μ₁/μ₂)^{1/2}`
    pub proper_time: f64,
    /// `μ exp(−∫(c + d))`
    pub kappa: f64,
    pub kappa_prime: f64,
}

impl InvariantDiagnostics {
    /// `(1/μ₁)(κp − κ'x/(2a))² + C₀x²/(μ₂κ²)` expanded.
    pub fn form(&self, a: f64, c0: f64, t: f64) -> QuadraticForm {
        let q = self.kappa_prime / (2.0 * a);
        QuadraticForm::symmetric(
            self.kappa * self.kappa / self.mu1,
            q * q / self.mu1 + c0 / (self.mu2 * self.kappa * self.kappa),
            -self.kappa * q / self.mu1,
            t,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralInvariant {
    pub form: QuadraticForm,
    pub diagnostics: InvariantDiagnostics,
    pub aux_residual: f64,
}

/// Symmetric quadratic invariant built from a solution `μ` of the auxiliary equation:
/// `[(μp − (μ' − (c + d)μ)x/(2a))² + C₀x²/μ²]·exp(∫(c − d))`.
pub fn general_invariant(
    tc: &TimeCoefficients,
    mu: &dyn ScalarFunction,
    c0: f64,
    t: f64,
) -> Result<GeneralInvariant> {
    tc.require(Convention::HamiltonianForm)?;
    let aux = auxiliary_residual(tc, mu, c0, t)?;
    if !(aux <= 1e-8) {
        return Err(Error::AuxiliaryResidualTooLarge { residual: aux, limit: 1e-8 });
    }
    let m = mu.jet(t);
    if m.value == 0.0 && c0 != 0.0 {
        return Err(Error::MuVanishes { t });
    }
    let k = tc.checked_jets(t)?.values();
    if k.a == 0.0 {
        return Err(Error::SingularCoefficient { t });
    }
    let s = k.c + k.d;
    let q = (m.first - s * m.value) / (2.0 * k.a);
    let w = integral(tc, t, |c, d| c - d)?.exp();
    let extra = if c0 == 0.0 { 0.0 } else { c0 / (m.value * m.value) };
    let form = QuadraticForm::symmetric(m.value * m.value * w, (q * q + extra) * w, -m.value * q * w, t);

    let int_s = integral(tc, t, |c, d| c + d)?;
    let mu1 = (-integral(tc, t, |c, d| 3.0 * c + d)?).exp();
    let mu2 = integral(tc, t, |c, d| c + 3.0 * d)?.exp();
    let proper_time = quadrature::integrate(
        |s| {
            let kk = tc.eval(s);
            let i1 = integral(tc, s, |c, d| 3.0 * c + d).unwrap_or(f64::NAN);
            let i2 = integral(tc, s, |c, d| c + 3.0 * d).unwrap_or(f64::NAN);
            2.0 * kk.a * (-0.5 * (i1 + i2)).exp()
        },
        0.0,
        t,
        1e-10,
        1e-14,
    )?;
    let e = (-int_s).exp();
    let diagnostics = InvariantDiagnostics {
        mu1,
        mu2,
        k: (2.0 * int_s).exp() / (2.0 * k.a),
        proper_time,
        kappa: m.value * e,
        kappa_prime: (m.first - s * m.value) * e,
    };
    Ok(GeneralInvariant { form, diagnostics, aux_residual: aux })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearForm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub t: f64,
}

impl LinearForm {
    /// `A⟨p⟩ + B⟨x⟩ + C⟨1⟩` with unnormalized expectations.
    pub fn expectation(&self, m: &FirstMoments) -> f64 {
        m.norm * (self.a * m.p + self.b * m.x + self.c)
    }
}

/// Residual of `A'' − (a'/a + 2c − 2d)A' + 4(ab − cd + c a'/(2a) − c'/2)A`.
pub fn linear_equation_residual(tc: &TimeCoefficients, a_fn: &dyn ScalarFunction, t: f64) -> Result<f64> {
    tc.require(Convention::HamiltonianForm)?;
    let k = tc.checked_jets(t)?;
    let (a, ap, b, c, cp, d) = (k.a.value, k.a.first, k.b.value, k.c.value, k.c.first, k.d.value);
    let f = a_fn.jet(t);
    let r = f.second - (ap / a + 2.0 * c - 2.0 * d) * f.first
        + 4.0 * (a * b - c * d + c * ap / (2.0 * a) - cp / 2.0) * f.value;
    Ok(r.abs())
}

/// Linear invariant `P = A p + ((2cA − A')/(2a)) x + C₀ exp(∫(c − d))`.
pub fn linear_invariant(tc: &TimeCoefficients, a_fn: &dyn ScalarFunction, c0: f64, t: f64) -> Result<LinearForm> {
    let res = linear_equation_residual(tc, a_fn, t)?;
    if !(res <= 1e-8) {
        return Err(Error::ResidualTooLarge { residual: res, limit: 1e-8 });
    }
    let k = tc.checked_jets(t)?.values();
    let f = a_fn.jet(t);
    let growth = integral(tc, t, |c, d| c - d)?.exp();
    Ok(LinearForm {
        a: f.value,
        b: (2.0 * k.c * f.value - f.first) / (2.0 * k.a),
        c: c0 * growth,
        t,
    })
}

/// `â = x_coeff·x + d_coeff·∂ₓ`, `â† = conj(x_coeff)·x − d_coeff·∂ₓ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderPair {
    pub t: f64,
    pub x_coeff: Complex64,
    pub d_coeff: f64,
    pub omega_t: f64,
    pub omega0: f64,
}

impl LadderPair {
    pub fn creation_x_coeff(&self) -> Complex64 {
        self.x_coeff.conj()
    }

    /// `[â, â†]` from the coefficient algebra, `2·Re(x_coeff)·d_coeff`.
    pub fn commutator(&self) -> f64 {
        2.0 * self.x_coeff.re * self.d_coeff
    }

    /// `(ω(t)/2)(â â† + â† â)` as a quadratic form.
    pub fn reconstruct(&self) -> QuadraticForm {
        let w = self.omega_t;
        QuadraticForm::symmetric(
            w * self.d_coeff * self.d_coeff,
            w * self.x_coeff.norm_sqr(),
            w * self.d_coeff * self.x_coeff.im,
            self.t,
        )
    }
}

/// Factor the general invariant as `(ω(t)/2)(â â† + â† â)` with `ω₀ = 2√C₀`.
pub fn ladder_factorization(tc: &TimeCoefficients, mu: &dyn ScalarFunction, c0: f64, t: f64) -> Result<LadderPair> {
    if !(c0 > 0.0) {
        return Err(Error::InvalidC0(c0));
    }
    let m = mu.jet(t);
    if m.value == 0.0 {
        return Err(Error::MuVanishes { t });
    }
    let inv = general_invariant(tc, mu, c0, t)?;
    let k = tc.checked_jets(t)?.values();
    let q = (m.first - (k.c + k.d) * m.value) / (2.0 * k.a);
    let omega0 = 2.0 * c0.sqrt();
    let r = omega0.sqrt();
    let pair = LadderPair {
        t,
        x_coeff: Complex64::new(r / (2.0 * m.value), -q / r),
        d_coeff: m.value / r,
        omega_t: omega0 * integral(tc, t, |c, d| c - d)?.exp(),
        omega0,
    };
    let diff = pair.reconstruct().rel_diff(&inv.form);
    if diff > 1e-10 {
        return Err(Error::ConstraintViolated(format!("factorization differs from the invariant by {diff:e}")));
    }
    Ok(pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::builtin_coefficients;

    fn ham(spec: ModelSpec) -> TimeCoefficients {
        builtin_coefficients(&spec, Convention::HamiltonianForm).unwrap()
    }

    #[test]
    fn ck_energy_system_tracks_catalog() {
        let spec = ModelSpec::new(ModelId::CaldirolaKanai).omega0(1.0).lambda(0.1);
        let path = solve_energy_system(&ham(spec), (0.5, 0.5, 0.05), 3.0, 1e-12).unwrap();
        for &t in &[0.7, 1.9, 3.0] {
            let e = energy_operator_catalog(&spec, t).unwrap();
            assert!(path.form(t).max_abs_diff(&e) < 1e-9);
        }
        let zero = solve_energy_system(&ham(spec), (0.0, 0.0, 0.0), 1.0, 1e-10).unwrap();
        assert_eq!(zero.form(0.5), QuadraticForm::zero(0.5));
    }

    #[test]
    fn catalog_entries() {
        let mo = energy_operator_catalog(&ModelSpec::new(ModelId::ModifiedOscillator), 0.3).unwrap();
        assert!((mo.a - 0.6f64.cos() / 2.0).abs() < 1e-15 && (mo.c - 0.6f64.sin() / 2.0).abs() < 1e-15);
        let um = energy_operator_catalog(&ModelSpec::new(ModelId::United).omega0(1.0).lambda(0.3).mu(0.1), 0.0).unwrap();
        assert_eq!((um.a, um.b), (0.5, 0.5));
        assert!((um.c - 0.1).abs() < 1e-15 && um.c == um.d);
        let mpo = energy_operator_catalog(&ModelSpec::new(ModelId::ModifiedParametric).omega0(1.0).lambda(0.2).delta(0.5), 0.0).unwrap();
        assert!((mpo.a - 0.5f64.tanh().powi(2)).abs() < 1e-15 && mpo.c == 0.0);
    }

    #[test]
    fn catalog_satisfies_energy_system() {
        for m in ModelId::ALL {
            let spec = ModelSpec::new(m).omega0(1.0).lambda(0.2).mu(0.1).delta(0.5);
            if !m.is_self_adjoint() {
                continue;
            }
            let tc = ham(spec);
            for &t in &[0.2, 0.9] {
                let e = CatalogPath(spec);
                let (f, df) = (e.form(t), e.derivative(t));
                let k = tc.eval(t);
                let ra = df.a + 4.0 * (k.a * f.c - k.d * f.a);
                let rb = df.b + 4.0 * (k.d * f.b - k.b * f.c);
                let rc = df.c + 2.0 * (k.a * f.b - k.b * f.a);
                assert!(ra.abs().max(rb.abs()).max(rc.abs()) < 1e-12, "{m} t={t}: {ra} {rb} {rc}");
            }
        }
    }

    #[test]
    fn ermakov_elementary_solutions() {
        let s = solve_ermakov(|_| 1.0, 1.0, (1.0, 0.0), 5.0, 1e-12).unwrap();
        assert!((s.kappa(3.3) - 1.0).abs() < 1e-10);
        let s = solve_ermakov(|_| 1.0, 0.0, (1.0, 0.0), 1.5, 1e-12).unwrap();
        assert!((s.kappa(1.2) - 1.2f64.cos()).abs() < 1e-10);
        assert!(matches!(solve_ermakov(|_| 1.0, 0.0, (1.0, 0.0), 2.0, 1e-12), Err(Error::KappaCollapse { .. })));
    }

    #[test]
    fn pinney_trivial_case() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let s = pinney_superpose(|t: Jet| t.cos(), |t: Jet| t.sin(), (1.0, 0.0, 1.0), 1.0, 1.0, &times).unwrap();
        assert!((s.kappa(2.2) - 1.0).abs() < 1e-15);
        let bad = pinney_superpose(|t: Jet| t.cos(), |t: Jet| t.sin(), (1.1, 0.0, 1.0), 1.0, 1.0, &times);
        assert!(matches!(bad, Err(Error::ConstraintViolated(_))));
    }

    #[test]
    fn lewis_riesenfeld_examples() {
        let s = solve_ermakov(|_| 1.0, 1.0, (1.0, 0.0), 1.0, 1e-12).unwrap();
        let e = lewis_riesenfeld_invariant(&s, 0.5);
        assert!(e.max_abs_diff(&QuadraticForm::symmetric(1.0, 1.0, 0.0, 0.5)) < 1e-10);
        let s = solve_ermakov(|_| 1.0, 0.0, (1.0, 0.0), 1.0, 1e-12).unwrap();
        let t = 0.6;
        let e = lewis_riesenfeld_invariant(&s, t);
        let (sn, cs) = t.sin_cos();
        assert!(e.max_abs_diff(&QuadraticForm::symmetric(cs * cs, sn * sn, sn * cs, t)) < 1e-9, "{e:?}");
    }

    fn united() -> ModelSpec {
        ModelSpec::new(ModelId::United).omega0(1.0).lambda(0.3).mu(0.1)
    }

    fn united_mu(spec: ModelSpec) -> impl Fn(Jet) -> Jet + Send + Sync {
        let (w0, l) = (spec.omega0, spec.lambda);
        move |t: Jet| (t * -l).exp() * (w0 / 2.0).sqrt()
    }

    #[test]
    fn united_general_invariant_is_catalog() {
        let spec = united();
        let tc = ham(spec);
        let c0 = spec.omega_sq() / 4.0;
        let mu = united_mu(spec);
        for &t in &[0.0, 0.4, 1.7] {
            assert!(auxiliary_residual(&tc, &mu, c0, t).unwrap() < 1e-12);
            let g = general_invariant(&tc, &mu, c0, t).unwrap();
            let e = energy_operator_catalog(&spec, t).unwrap();
            assert!(g.form.max_abs_diff(&e) < 1e-10, "{:?} {:?}", g.form, e);
            let th1 = g.diagnostics.form(tc.a(t), c0, t);
            assert!(th1.max_abs_diff(&g.form) < 1e-10);
        }
    }

    #[test]
    fn ladder_commutator_and_reconstruction() {
        let spec = united();
        let tc = ham(spec);
        let c0 = spec.omega_sq() / 4.0;
        let pair = ladder_factorization(&tc, &united_mu(spec), c0, 0.3).unwrap();
        assert!((pair.commutator() - 1.0).abs() < 1e-12);
        assert!(matches!(ladder_factorization(&tc, &united_mu(spec), 0.0, 0.3), Err(Error::InvalidC0(_))));
    }

    #[test]
    fn sho_linear_invariant() {
        let tc = ham(ModelSpec::new(ModelId::SimpleHarmonic).omega0(1.0));
        let t = 0.8;
        let p = linear_invariant(&tc, &|s: Jet| s.cos(), 0.3, t).unwrap();
        assert!((p.a - t.cos()).abs() < 1e-15 && (p.b - t.sin()).abs() < 1e-15 && (p.c - 0.3).abs() < 1e-15);
        assert!(matches!(linear_invariant(&tc, &|s: Jet| s.cosh(), 0.0, t), Err(Error::ResidualTooLarge { .. })));
    }
}

//! Expectation values: derivative formulas, moment systems and the
//! closed-form solutions of the damped-oscillator family.
//!
//! Second moments are unnormalized (`⟨ψ, Oψ⟩` with `norm = ⟨ψ, ψ⟩`), which is
//! the quantity conserved by invariants of non-self-adjoint Hamiltonians.
//! First moments are reported normalized together with the norm.

use serde::{Deserialize, Serialize};

use crate::coefficients::{tau_sigma, Convention, ModelId, ModelSpec, TimeCoefficients};
use crate::error::{Error, Result};
use crate::invariants::{OperatorPath, QuadraticForm};
use crate::jet::Jet;
use crate::ode::{self, OdeOptions, OdeSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstMoments {
    /// `⟨x⟩/⟨1⟩`
    pub x: f64,
    /// `⟨p⟩/⟨1⟩`
    pub p: f64,
    pub norm: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondMoments {
    pub p2: f64,
    pub x2: f64,
    /// `⟨px + xp⟩`
    pub pxxp: f64,
    pub norm: f64,
    pub t: f64,
}

impl SecondMoments {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.p2, self.x2, self.pxxp, self.norm].iter().all(|v| v.is_finite());
        if !ok || self.norm <= 0.0 || self.p2 < 0.0 || self.x2 < 0.0 {
            return Err(Error::InvalidMoments(format!("{self:?}")));
        }
        Ok(())
    }
}

/// The symmetric form `R` with `d⟨O⟩/dt = Re⟨R⟩` under the Hamiltonian `tc`.
///
/// Uses `H† = H + i(c − d)`, so `d⟨O⟩/dt = ⟨∂O/∂t⟩ + i⟨[H, O]⟩ − (c − d)⟨O⟩`.
pub fn heisenberg_form(tc: &TimeCoefficients, path: &dyn OperatorPath, t: f64) -> Result<QuadraticForm> {
    tc.require(Convention::HamiltonianForm)?;
    let k = tc.checked_jets(t)?.values();
    let (o, d) = (path.form(t), path.derivative(t));
    let e = 0.5 * (k.c + k.d);
    let f = 0.5 * (o.c + o.d);
    let fp = 0.5 * (d.c + d.d);
    let g = k.c - k.d;
    Ok(QuadraticForm::symmetric(
        d.a + 4.0 * k.a * f - 4.0 * e * o.a - g * o.a,
        d.b + 4.0 * e * o.b - 4.0 * k.b * f - g * o.b,
        fp + 2.0 * k.a * o.b - 2.0 * k.b * o.a - g * f,
        t,
    ))
}

/// `d⟨O⟩/dt` contracted with the moments `m` (real part).
pub fn moment_derivative(tc: &TimeCoefficients, path: &dyn OperatorPath, m: &SecondMoments) -> Result<f64> {
    Ok(heisenberg_form(tc, path, m.t)?.expectation(m))
}

/// Second-moment path `(⟨p²⟩, ⟨x²⟩, ⟨px + xp⟩, ⟨1⟩)`.
#[derive(Debug, Clone)]
pub struct MomentPath {
    sol: OdeSolution<4>,
}

impl MomentPath {
    pub fn at(&self, t: f64) -> SecondMoments {
        let y = self.sol.value(t);
        SecondMoments { p2: y[0], x2: y[1], pxxp: y[2], norm: y[3], t }
    }

    pub fn derivative(&self, t: f64) -> [f64; 4] {
        self.sol.eval(t).1
    }

    pub fn times(&self) -> &[f64] {
        &self.sol.t
    }

    pub fn t_end(&self) -> f64 {
        self.sol.t_end()
    }

    pub fn samples(&self) -> Vec<SecondMoments> {
        self.sol.t.iter().map(|&t| self.at(t)).collect()
    }
}

fn moment_rhs(tc: &TimeCoefficients, t: f64, y: &[f64; 4]) -> [f64; 4] {
    let k = tc.eval(t);
    let (a, b, c, d) = (k.a, k.b, k.c, k.d);
    [
        (-3.0 * c - d) * y[0] - 2.0 * b * y[2],
        (c + 3.0 * d) * y[1] + 2.0 * a * y[2],
        4.0 * a * y[0] - 4.0 * b * y[1] + (d - c) * y[2],
        (d - c) * y[3],
    ]
}

/// Integrate the linear second-moment system together with the norm law.
pub fn evolve_second_moments(
    tc: &TimeCoefficients,
    init: &SecondMoments,
    t_end: f64,
    tol: f64,
) -> Result<MomentPath> {
    tc.require(Convention::HamiltonianForm)?;
    init.validate()?;
    let y0 = [init.p2, init.x2, init.pxxp, init.norm];
    let sol = ode::integrate(
        |t, y| moment_rhs(tc, t, y),
        init.t,
        y0,
        t_end,
        &OdeOptions::with_tol(tol),
        &[],
        |_, _| false,
    )?;
    Ok(MomentPath { sol })
}

/// Unnormalized first moments `(⟨x⟩, ⟨p⟩, ⟨1⟩)`.
#[derive(Debug, Clone)]
pub struct FirstMomentPath {
    sol: OdeSolution<3>,
    /// Largest residual of the second-order (Newtonian) form over the output nodes.
    pub ehrenfest_residual: f64,
}

impl FirstMomentPath {
    pub fn at(&self, t: f64) -> FirstMoments {
        let y = self.sol.value(t);
        FirstMoments { x: y[0] / y[2], p: y[1] / y[2], norm: y[2], t }
    }

    /// `(⟨x⟩, ⟨p⟩, ⟨1⟩)` without normalization.
    pub fn raw(&self, t: f64) -> [f64; 3] {
        self.sol.value(t)
    }

    pub fn times(&self) -> &[f64] {
        &self.sol.t
    }
}

/// Integrate `X' = 2aP + 2dX`, `P' = −2bX − 2cP`, `N' = (d − c)N` for the
/// unnormalized first moments and check `X'' − τX' + 4σX = 0` at every node.
pub fn evolve_first_moments(
    tc: &TimeCoefficients,
    init: &FirstMoments,
    t_end: f64,
    tol: f64,
) -> Result<FirstMomentPath> {
    tc.require(Convention::HamiltonianForm)?;
    if !(init.x.is_finite() && init.p.is_finite() && init.norm > 0.0) {
        return Err(Error::InvalidMoments(format!("{init:?}")));
    }
    let rhs = |t: f64, y: &[f64; 3]| {
        let k = tc.eval(t);
        [
            2.0 * k.a * y[1] + 2.0 * k.d * y[0],
            -2.0 * k.b * y[0] - 2.0 * k.c * y[1],
            (k.d - k.c) * y[2],
        ]
    };
    let y0 = [init.x * init.norm, init.p * init.norm, init.norm];
    let sol = ode::integrate(rhs, init.t, y0, t_end, &OdeOptions::with_tol(tol), &[], |_, _| false)?;

    let mut worst: f64 = 0.0;
    for (t, y) in sol.t.iter().zip(&sol.y) {
        let j = tc.checked_jets(*t)?;
        let (a, ap, b, c, d, dp) = (j.a.value, j.a.first, j.b.value, j.c.value, j.d.value, j.d.first);
        let (x, p) = (y[0], y[1]);
        let xd = 2.0 * a * p + 2.0 * d * x;
        let pd = -2.0 * b * x - 2.0 * c * p;
        let xdd = 2.0 * ap * p + 2.0 * a * pd + 2.0 * dp * x + 2.0 * d * xd;
        let (tau, sigma) = tau_sigma(tc, *t)?;
        let scale = xdd.abs().max(xd.abs()).max(x.abs()).max(1.0);
        worst = worst.max((xdd - tau * xd + 4.0 * sigma * x).abs() / scale);
    }
    if worst > 10.0 * tol.max(1e-12) {
        return Err(Error::ToleranceNotMet {
            what: "first-moment second-order form",
            detail: format!("residual {worst:e}"),
        });
    }
    Ok(FirstMomentPath { sol, ehrenfest_residual: worst })
}

/// The operators used by the closed-form expectation laws of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationOperators {
    pub h0: QuadraticForm,
    pub l: QuadraticForm,
    pub m: QuadraticForm,
    pub e: QuadraticForm,
}

/// `H₀`, `L`, `M` and `E` of a catalogued model at `t`, in the model's
/// Hamiltonian-form frame.
pub fn expectation_operators(spec: &ModelSpec, t: f64) -> Result<ExpectationOperators> {
    spec.validate()?;
    let (w0, l) = (spec.omega0, spec.lambda);
    let e = crate::invariants::energy_operator_catalog(spec, t)?;
    let s = QuadraticForm::symmetric;
    let ops = match spec.model {
        ModelId::CaldirolaKanai | ModelId::ModifiedCaldirolaKanai => {
            let (em, ep) = ((-2.0 * l * t).exp(), (2.0 * l * t).exp());
            ExpectationOperators {
                h0: s(w0 / 2.0 * em, w0 / 2.0 * ep, 0.0, t),
                l: s(-l * w0 * em, l * w0 * ep, 0.0, t),
                m: s(0.0, 0.0, 1.0, t),
                e,
            }
        }
        ModelId::United => {
            let g = (spec.mu_param * t).exp();
            let (em, ep) = ((-2.0 * l * t).exp(), (2.0 * l * t).exp());
            ExpectationOperators {
                h0: s(w0 / 2.0 * g * em, w0 / 2.0 * g * ep, 0.0, t),
                l: s(-g * em, g * ep, 0.0, t),
                m: s(0.0, 0.0, g, t),
                e,
            }
        }
        ModelId::ModifiedOscillator => {
            let (sn, cs) = (2.0 * t).sin_cos();
            ExpectationOperators {
                h0: s(0.5, 0.5, 0.0, t),
                l: s(-sn, sn, cs, t),
                m: s(0.0, 0.0, 1.0, t),
                e,
            }
        }
        ModelId::CjCoordinate => {
            let ch2 = (l * t).cosh().powi(2);
            ExpectationOperators {
                h0: s(1.0 / (w0 * ch2), w0 * ch2, 0.0, t),
                l: s(1.0 / (w0 * ch2), -w0 * ch2, 0.0, t),
                m: s(0.0, 0.0, 1.0, t),
                e,
            }
        }
        ModelId::ModifiedParametric => {
            let th2 = (l * t + spec.delta).tanh().powi(2);
            ExpectationOperators {
                h0: e,
                l: s(th2, -1.0 / th2, 0.0, t),
                m: s(0.0, 0.0, 1.0, t),
                e,
            }
        }
        m => return Err(Error::NoClosedForm(format!("no expectation operators for {m}"))),
    };
    Ok(ops)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    H,
    H0,
}

/// Initial expectation values for the closed forms; `l0` is `⟨L⟩₀` with `L`
/// from [`expectation_operators`] and `m0` is `⟨M⟩₀` (only the CJ model uses it).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpectationInit {
    pub e0: f64,
    pub h0: f64,
    pub l0: f64,
    pub m0: f64,
}

impl ExpectationInit {
    pub fn from_moments(spec: &ModelSpec, m: &SecondMoments) -> Result<Self> {
        let ops = expectation_operators(spec, m.t)?;
        Ok(ExpectationInit {
            e0: ops.e.expectation(m),
            h0: ops.h0.expectation(m),
            l0: ops.l.expectation(m),
            m0: ops.m.expectation(m),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClosedFormExpectation {
    spec: ModelSpec,
    which: Which,
    init: ExpectationInit,
}

impl ClosedFormExpectation {
    pub fn eval(&self, t: f64) -> f64 {
        let i = &self.init;
        let (w0, l) = (self.spec.omega0, self.spec.lambda);
        let w = self.spec.omega();
        let oscillating = |sin_amp: f64| {
            let (sn, cs) = (2.0 * w * t).sin_cos();
            let base = w0 * w0 * i.e0 / (w * w);
            (i.h0 - base) * cs + sin_amp * sn + base
        };
        let h0 = match self.spec.model {
            ModelId::CaldirolaKanai => oscillating(i.l0 / (2.0 * w)),
            ModelId::ModifiedCaldirolaKanai => oscillating(-i.l0 / (2.0 * w)),
            ModelId::United => oscillating(0.5 * (l - self.spec.mu_param) * w0 / w * i.l0),
            ModelId::ModifiedOscillator => i.h0 * (2.0 * t).cosh() + 0.5 * i.l0 * (2.0 * t).sinh(),
            ModelId::CjCoordinate => cj_closed_form(l, w0, i.e0, i.l0, t),
            _ => unreachable!(),
        };
        match (self.which, self.spec.model) {
            (Which::H0, _) | (Which::H, ModelId::CaldirolaKanai) => h0,
            (Which::H, ModelId::ModifiedCaldirolaKanai) => 2.0 * i.e0 - h0,
            (Which::H, ModelId::ModifiedOscillator) => h0 + i.e0,
            _ => unreachable!(),
        }
    }
}

/// Closed-form `⟨H⟩(t)` or `⟨H₀⟩(t)`.
pub fn closed_form_expectation(spec: &ModelSpec, which: Which, init: ExpectationInit) -> Result<ClosedFormExpectation> {
    spec.validate()?;
    let ok = match (spec.model, which) {
        (ModelId::CaldirolaKanai | ModelId::ModifiedCaldirolaKanai | ModelId::ModifiedOscillator, _) => true,
        (ModelId::United | ModelId::CjCoordinate, Which::H0) => true,
        _ => false,
    };
    if !ok {
        return Err(Error::NoClosedForm(format!("{which:?} for {}", spec.model)));
    }
    if spec.model == ModelId::CjCoordinate && init.m0 != 0.0 {
        return Err(Error::NoClosedForm("the CJ closed form assumes <M>_0 = 0; use cj_h0_equation_solve_with_m0".into()));
    }
    Ok(ClosedFormExpectation { spec: *spec, which, init })
}

/// Closed-form `⟨H₀⟩(t)` of the CJ model (requires `⟨M⟩₀ = 0`).
pub fn cj_closed_form(lambda: f64, omega0: f64, e0: f64, l0: f64, t: f64) -> f64 {
    let l = lambda;
    let w2 = omega0 * omega0 - l * l;
    let w = w2.sqrt();
    let th = (l * t).tanh();
    let ch2 = (l * t).cosh().powi(2);
    let amp = -l * (l * l * e0 + omega0 * w2 * l0) / (omega0 * w2 * (2.0 * w2 + l * l));
    let (sn, cs) = (2.0 * w * t).sin_cos();
    amp * (2.0 * w * th * sn + l * (1.0 + th * th) * cs)
        + 2.0 * e0 * omega0 / w2 * (1.0 - l * l / (2.0 * omega0 * omega0 * ch2))
}

/// Numerical solution of the CJ second-order equation for `⟨H₀⟩`.
#[derive(Debug, Clone)]
pub struct CjPath {
    sol: OdeSolution<2>,
    series: [f64; 5],
    pub eps: f64,
}

impl CjPath {
    pub fn value(&self, t: f64) -> f64 {
        self.jet(t).value
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.jet(t).first
    }

    fn jet(&self, t: f64) -> Jet {
        if t < self.eps {
            let h = &self.series;
            Jet::new(
                h[0] + t * t * (h[2] + t * (h[3] + t * h[4])),
                t * (2.0 * h[2] + t * (3.0 * h[3] + 4.0 * t * h[4])),
                2.0 * h[2] + t * (6.0 * h[3] + 12.0 * t * h[4]),
            )
        } else {
            let (y, dy) = self.sol.eval(t);
            Jet::new(y[0], y[1], dy[1])
        }
    }

    pub fn t_end(&self) -> f64 {
        self.sol.t_end()
    }
}

pub const CJ_START: f64 = 1e-3;

/// Integrate `y'' − 4λ/sinh(2λt) y' + 2(2ω² + λ²/cosh²(λt)) y = 8ω₀⟨E⟩₀` with
/// `⟨M⟩₀ = 0`.
pub fn cj_h0_equation_solve(lambda: f64, omega0: f64, e0: f64, l0: f64, t_end: f64, tol: f64) -> Result<CjPath> {
    cj_h0_equation_solve_with_m0(lambda, omega0, e0, l0, 0.0, t_end, tol)
}

/// As [`cj_h0_equation_solve`] with a general `⟨M⟩₀`, which selects the
/// odd `t³` mode left free by the equation's initial conditions.
pub fn cj_h0_equation_solve_with_m0(
    lambda: f64,
    omega0: f64,
    e0: f64,
    l0: f64,
    m0: f64,
    t_end: f64,
    tol: f64,
) -> Result<CjPath> {
    let l = lambda;
    let w2 = omega0 * omega0 - l * l;
    if !(w2 > 0.0) || !(omega0 > 0.0) {
        return Err(Error::InvalidModelParams(format!("need omega0^2 > lambda^2 and omega0 > 0 (omega^2 = {w2})")));
    }
    if !(t_end > CJ_START) {
        return Err(Error::InvalidInput(format!("t_end must exceed {CJ_START}")));
    }
    let l2 = l * l;
    let h0 = (4.0 * omega0 * e0 - l2 * l0) / (2.0 * w2 + l2);
    let h2 = -l2 * l0;
    let h3 = 4.0 / 3.0 * l2 * omega0 * m0;
    let h4 = (-(8.0 / 3.0) * l2 * h2 - 2.0 * (2.0 * w2 + l2) * h2 + 2.0 * l2 * l2 * h0) / 4.0;
    let series = [h0, 0.0, h2, h3, h4];
    let eps = CJ_START;
    let start = CjPath { sol: empty_solution(), series, eps: f64::INFINITY }.jet(eps);

    let rhs = |t: f64, y: &[f64; 2]| {
        let drag = if l == 0.0 { 2.0 / t } else { 4.0 * l / (2.0 * l * t).sinh() };
        let ch2 = (l * t).cosh().powi(2);
        [y[1], 8.0 * omega0 * e0 + drag * y[1] - 2.0 * (2.0 * w2 + l2 / ch2) * y[0]]
    };
    let sol = ode::integrate(rhs, eps, [start.value, start.first], t_end, &OdeOptions::with_tol(tol), &[], |_, _| false)?;
    Ok(CjPath { sol, series, eps })
}

fn empty_solution() -> OdeSolution<2> {
    OdeSolution { t: vec![0.0], y: vec![[0.0; 2]], dy: vec![[0.0; 2]], max_error_ratio: 0.0, stopped_at: None }
}

/// Basis of the elementary equation
/// `y'' − 4λ/sinh(2λt + 2γ) y' + (ω² + 2λ²/cosh²(λt + γ)) y = 1`
/// and of its companion `z'' + (ω² − 2λ²/sinh²(λt + γ)) z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppendixDBasis {
    pub omega: f64,
    pub lambda: f64,
    pub gamma: f64,
}

/// Jet-valued basis functions, selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisFunction {
    Y1,
    Y2,
    Particular,
    Z1,
    Z2,
}

impl BasisFunction {
    pub const ALL: [BasisFunction; 5] =
        [BasisFunction::Y1, BasisFunction::Y2, BasisFunction::Particular, BasisFunction::Z1, BasisFunction::Z2];

    pub fn name(self) -> &'static str {
        match self {
            BasisFunction::Y1 => "y1",
            BasisFunction::Y2 => "y2",
            BasisFunction::Particular => "Y",
            BasisFunction::Z1 => "z1",
            BasisFunction::Z2 => "z2",
        }
    }
}

pub fn appendix_d_basis(omega: f64, lambda: f64, gamma: f64) -> Result<AppendixDBasis> {
    if !(omega > 0.0) || lambda == 0.0 || !lambda.is_finite() || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!("need omega > 0 and lambda != 0 (omega = {omega}, lambda = {lambda})")));
    }
    Ok(AppendixDBasis { omega, lambda, gamma })
}

impl AppendixDBasis {
    fn u(&self, t: Jet) -> Jet {
        t * self.lambda + self.gamma
    }

    pub fn y1_jet(&self, t: Jet) -> Jet {
        let (w, l) = (self.omega, self.lambda);
        let th = self.u(t).tanh();
        th * w * (t * w).cos() - (th.square() + 1.0) * l * (t * w).sin()
    }

    pub fn y2_jet(&self, t: Jet) -> Jet {
        let (w, l) = (self.omega, self.lambda);
        let th = self.u(t).tanh();
        th * w * (t * w).sin() + (th.square() + 1.0) * l * (t * w).cos()
    }

    pub fn particular_jet(&self, t: Jet) -> Jet {
        let (w, l) = (self.omega, self.lambda);
        let ch2 = self.u(t).cosh().square();
        (1.0 - (2.0 * l * l / (w * w + 4.0 * l * l)) / ch2) / (w * w)
    }

    pub fn z1_jet(&self, t: Jet) -> Jet {
        let (w, l) = (self.omega, self.lambda);
        let u = self.u(t);
        (t * w).cos() * w - u.cosh() / u.sinh() * l * (t * w).sin()
    }

    pub fn z2_jet(&self, t: Jet) -> Jet {
        let (w, l) = (self.omega, self.lambda);
        let u = self.u(t);
        (t * w).sin() * w + u.cosh() / u.sinh() * l * (t * w).cos()
    }

    pub fn jet(&self, f: BasisFunction, t: f64) -> Jet {
        let t = Jet::var(t);
        match f {
            BasisFunction::Y1 => self.y1_jet(t),
            BasisFunction::Y2 => self.y2_jet(t),
            BasisFunction::Particular => self.particular_jet(t),
            BasisFunction::Z1 => self.z1_jet(t),
            BasisFunction::Z2 => self.z2_jet(t),
        }
    }

    pub fn eval(&self, f: BasisFunction, t: f64) -> f64 {
        self.jet(f, t).value
    }

    /// Residual of the equation the basis function belongs to (right-hand
    /// side 1 for `Y`, 0 otherwise).
    pub fn residual_of(&self, f: BasisFunction, y: Jet, t: f64) -> f64 {
        let (w, l) = (self.omega, self.lambda);
        let u = l * t + self.gamma;
        match f {
            BasisFunction::Z1 | BasisFunction::Z2 => y.second + (w * w - 2.0 * l * l / u.sinh().powi(2)) * y.value,
            _ => {
                let rhs = if f == BasisFunction::Particular { 1.0 } else { 0.0 };
                y.second - 4.0 * l / (2.0 * u).sinh() * y.first + (w * w + 2.0 * l * l / u.cosh().powi(2)) * y.value
                    - rhs
            }
        }
    }

    pub fn residual(&self, f: BasisFunction, t: f64) -> f64 {
        self.residual_of(f, self.jet(f, t), t)
    }

    /// `W(y₁, y₂)` computed from the functions.
    pub fn wronskian_y(&self, t: f64) -> f64 {
        let (a, b) = (self.jet(BasisFunction::Y1, t), self.jet(BasisFunction::Y2, t));
        a.value * b.first - a.first * b.value
    }

    /// `ω(ω² + 4λ²) tanh²(λt + γ)`.
    pub fn wronskian_y_formula(&self, t: f64) -> f64 {
        let (w, l) = (self.omega, self.lambda);
        w * (w * w + 4.0 * l * l) * (l * t + self.gamma).tanh().powi(2)
    }

    pub fn wronskian_z(&self, t: f64) -> f64 {
        let (a, b) = (self.jet(BasisFunction::Z1, t), self.jet(BasisFunction::Z2, t));
        a.value * b.first - a.first * b.value
    }

    /// `ω(ω² + λ²)`.
    pub fn wronskian_z_formula(&self) -> f64 {
        self.omega * (self.omega * self.omega + self.lambda * self.lambda)
    }

    /// `tanh(λt + γ)·z(t)` with `z` taken from the companion equation at
    /// doubled parameters `(2λ, 2γ)`; this solves the homogeneous `y` equation.
    pub fn substituted(&self, f: BasisFunction, t: f64) -> Jet {
        let doubled = AppendixDBasis { omega: self.omega, lambda: 2.0 * self.lambda, gamma: 2.0 * self.gamma };
        let tt = Jet::var(t);
        let z = match f {
            BasisFunction::Z1 => doubled.z1_jet(tt),
            BasisFunction::Z2 => doubled.z2_jet(tt),
            _ => panic!("substitution applies to z1 and z2"),
        };
        self.u(tt).tanh() * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    /// `δp·δx − 1/2`
    pub margin: f64,
    pub var_x: f64,
    pub var_p: f64,
    /// `⟨(Δp)²⟩⟨(Δx)²⟩ − ¼⟨1⟩²` with unnormalized deviations.
    pub unnormalized_margin: f64,
}

/// Heisenberg margin `δp δx − 1/2` from normalized deviations.
pub fn uncertainty_check(first: &FirstMoments, second: &SecondMoments) -> Result<UncertaintyReport> {
    let n = second.norm;
    if !(n > 0.0) {
        return Err(Error::InvalidMoments(format!("norm must be positive, got {n}")));
    }
    let var_x = second.x2 / n - first.x * first.x;
    let var_p = second.p2 / n - first.p * first.p;
    for v in [var_x, var_p] {
        if v < -1e-12 {
            return Err(Error::InvalidMoments(format!("negative variance {v:e}")));
        }
    }
    let (var_x, var_p) = (var_x.max(0.0), var_p.max(0.0));
    Ok(UncertaintyReport {
        margin: (var_x * var_p).sqrt() - 0.5,
        var_x,
        var_p,
        unnormalized_margin: var_x * var_p * n * n - 0.25 * n * n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::builtin_coefficients;
    use crate::invariants::CatalogPath;
    use crate::propagator::GaussianState;

    fn ham(spec: &ModelSpec) -> TimeCoefficients {
        builtin_coefficients(spec, Convention::HamiltonianForm).unwrap()
    }

    fn coherent_moments(x: f64, p: f64) -> (FirstMoments, SecondMoments) {
        GaussianState::coherent(x, p).moments(0.0).unwrap()
    }

    #[test]
    fn energy_operators_have_zero_derivative() {
        let (_, m) = coherent_moments(0.7, -0.4);
        for id in ModelId::ALL {
            let spec = ModelSpec::new(id).omega0(1.0).lambda(0.2).mu(0.1).delta(0.5);
            let tc = ham(&spec);
            let d = moment_derivative(&tc, &CatalogPath(spec), &SecondMoments { t: 0.4, ..m }).unwrap();
            assert!(d.abs() < 1e-9, "{id}: {d}");
        }
    }

    #[test]
    fn ck_derivative_of_l() {
        let spec = ModelSpec::new(ModelId::CaldirolaKanai).omega0(1.3).lambda(0.2);
        let tc = ham(&spec);
        let (l, w0) = (0.2, 1.3);
        let lpath = move |t: f64| expectation_operators(&spec, t).unwrap().l;
        let m = SecondMoments { p2: 0.9, x2: 0.4, pxxp: 0.3, norm: 1.0, t: 0.6 };
        let got = moment_derivative(&tc, &lpath, &m).unwrap();
        let t = m.t;
        let want = 2.0 * l * l * w0 * ((-2.0 * l * t).exp() * m.p2 + (2.0 * l * t).exp() * m.x2) + 2.0 * l * w0 * w0 * m.pxxp;
        assert!((got - want).abs() < 1e-6, "{got} {want}");
    }

    #[test]
    fn closed_forms_match_moment_system() {
        let (_, m0) = coherent_moments(0.6, 0.3);
        for (id, which) in [
            (ModelId::CaldirolaKanai, Which::H),
            (ModelId::ModifiedCaldirolaKanai, Which::H0),
            (ModelId::ModifiedCaldirolaKanai, Which::H),
            (ModelId::United, Which::H0),
            (ModelId::ModifiedOscillator, Which::H0),
            (ModelId::ModifiedOscillator, Which::H),
        ] {
            let spec = ModelSpec::new(id).omega0(1.0).lambda(0.2).mu(0.05);
            let tc = ham(&spec);
            let t_end = if id == ModelId::ModifiedOscillator { 1.2 } else { 6.0 };
            let path = evolve_second_moments(&tc, &m0, t_end, 1e-11).unwrap();
            let cf = closed_form_expectation(&spec, which, ExpectationInit::from_moments(&spec, &m0).unwrap()).unwrap();
            for &t in path.times() {
                let m = path.at(t);
                let ops = expectation_operators(&spec, t).unwrap();
                let numeric = match (which, id) {
                    (Which::H0, _) => ops.h0.expectation(&m),
                    _ => {
                        let k = tc.eval(t);
                        QuadraticForm::new(k.a, k.b, k.c, k.d, t).expectation(&m)
                    }
                };
                assert!((numeric - cf.eval(t)).abs() < 1e-8 * numeric.abs().max(1.0), "{id} {which:?} t={t}: {numeric} vs {}", cf.eval(t));
            }
        }
    }

    #[test]
    fn ck_fixed_point() {
        let spec = ModelSpec::new(ModelId::CaldirolaKanai).omega0(1.0).lambda(0.3);
        let w2 = spec.omega_sq();
        let h0 = 0.8;
        let init = ExpectationInit { e0: w2 * h0, h0, l0: 0.0, m0: 0.0 };
        let cf = closed_form_expectation(&spec, Which::H, init).unwrap();
        for &t in &[0.3, 2.0, 7.5] {
            assert!((cf.eval(t) - h0).abs() < 1e-14);
        }
    }

    #[test]
    fn cj_numeric_vs_closed_form() {
        let (l, w0, e0, l0) = (0.3, 1.0, 0.9, 0.25);
        let path = cj_h0_equation_solve(l, w0, e0, l0, 5.0, 1e-12).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..=500 {
            let t = 0.01 + k as f64 * (5.0 - 0.01) / 500.0;
            worst = worst.max((path.value(t) - cj_closed_form(l, w0, e0, l0, t)).abs());
        }
        assert!(worst < 1e-6, "{worst}");
        assert!(path.derivative(1e-7).abs() < 1e-6);
    }

    #[test]
    fn cj_small_lambda_limit() {
        let (w0, e0) = (1.0, 0.7);
        let path = cj_h0_equation_solve(1e-6, w0, e0, 0.2, 3.0, 1e-12).unwrap();
        for &t in &[0.5, 1.7, 3.0] {
            assert!((path.value(t) - 2.0 * e0 / w0).abs() < 1e-6);
        }
    }

    #[test]
    fn appendix_d_identities() {
        let b = appendix_d_basis(1.1, 0.3, 0.2).unwrap();
        for k in 0..100 {
            let t = 0.05 + 0.04 * k as f64;
            for f in BasisFunction::ALL {
                assert!(b.residual(f, t).abs() < 1e-9, "{} at {t}", f.name());
            }
            assert!((b.wronskian_y(t) - b.wronskian_y_formula(t)).abs() < 1e-10);
            assert!((b.wronskian_z(t) - b.wronskian_z_formula()).abs() < 1e-10);
            for f in [BasisFunction::Z1, BasisFunction::Z2] {
                let y = b.substituted(f, t);
                assert!(b.residual_of(BasisFunction::Y1, y, t).abs() < 1e-9);
            }
        }
        assert!(appendix_d_basis(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn coherent_state_is_minimal() {
        let (f, s) = coherent_moments(0.3, -1.1);
        let r = uncertainty_check(&f, &s).unwrap();
        assert!(r.margin.abs() < 1e-12);
        let bad = SecondMoments { x2: 0.0, ..s };
        assert!(uncertainty_check(&f, &bad).is_err());
    }

    #[test]
    fn ck_first_moments_obey_damped_equation() {
        let spec = ModelSpec::new(ModelId::CaldirolaKanai).omega0(1.0).lambda(0.2);
        let tc = ham(&spec);
        let path = evolve_first_moments(&tc, &FirstMoments { x: 1.0, p: 0.0, norm: 1.0, t: 0.0 }, 6.0, 1e-11).unwrap();
        assert!(path.ehrenfest_residual < 1e-10);
        // x(0) = 1, x'(0) = 2a(0)p(0) = 0: x = e^{-λt}(cos ωt + λ/ω sin ωt)
        let w = spec.omega();
        for &t in &[1.0f64, 3.5, 6.0] {
            let want = (-0.2 * t).exp() * ((w * t).cos() + 0.2 / w * (w * t).sin());
            assert!((path.at(t).x - want).abs() < 1e-8);
        }
    }
}

//! Coefficient functions of a quadratic Hamiltonian and the built-in models.
//!
//! Two conventions are supported. In [`Convention::HamiltonianForm`] the
//! operator is `H = a p² + b x² + c px + d xp`. In
//! [`Convention::EquationForm`] the Schrödinger equation reads
//! `i ψ_t = −a ψ_xx + b x² ψ − i(c x ψ_x + d ψ)`, and the two are related by
//! `c_eq = c + d`, `d_eq = c`. Units are ħ = m = 1.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{fd_step, Jet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Convention {
    EquationForm,
    HamiltonianForm,
}

impl Convention {
    pub fn name(self) -> &'static str {
        match self {
            Convention::EquationForm => "EquationForm",
            Convention::HamiltonianForm => "HamiltonianForm",
        }
    }
}

/// Point values of the four coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Coefficients with first and second time derivatives.
#[derive(Debug, Clone, Copy)]
pub struct CoeffJets {
    pub a: Jet,
    pub b: Jet,
    pub c: Jet,
    pub d: Jet,
}

impl CoeffJets {
    pub fn values(&self) -> Coeffs {
        Coeffs {
            a: self.a.value,
            b: self.b.value,
            c: self.c.value,
            d: self.d.value,
        }
    }

    fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    fn to_equation(self) -> CoeffJets {
        CoeffJets {
            c: self.c + self.d,
            d: self.c,
            ..self
        }
    }

    fn to_hamiltonian(self) -> CoeffJets {
        CoeffJets {
            c: self.d,
            d: self.c - self.d,
            ..self
        }
    }
}

/// Something that evaluates the four coefficient functions in its own convention.
pub trait CoefficientSource: Send + Sync {
    fn jets(&self, t: f64) -> CoeffJets;
}

type RealFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;
type DerivFn = Box<dyn Fn(f64) -> [f64; 4] + Send + Sync>;

/// User-supplied coefficients. Derivatives come from the optional callback,
/// otherwise from central differences.
pub struct FnCoefficients {
    pub a: RealFn,
    pub b: RealFn,
    pub c: RealFn,
    pub d: RealFn,
    pub derivatives: Option<DerivFn>,
}

impl FnCoefficients {
    fn diff(f: &RealFn, t: f64) -> (f64, f64) {
        let h = fd_step(t);
        let h2 = h.max(1e-4);
        (
            (f(t + h) - f(t - h)) / (2.0 * h),
            (f(t + h2) - 2.0 * f(t) + f(t - h2)) / (h2 * h2),
        )
    }
}

impl CoefficientSource for FnCoefficients {
    fn jets(&self, t: f64) -> CoeffJets {
        let fs = [&self.a, &self.b, &self.c, &self.d];
        let mut out = [Jet::constant(0.0); 4];
        let given = self.derivatives.as_ref().map(|g| g(t));
        for (k, f) in fs.iter().enumerate() {
            let (d1, d2) = Self::diff(f, t);
            let d1 = given.map_or(d1, |g| g[k]);
            out[k] = Jet::new(f(t), d1, d2);
        }
        CoeffJets {
            a: out[0],
            b: out[1],
            c: out[2],
            d: out[3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    CaldirolaKanai,
    ModifiedCaldirolaKanai,
    United,
    ModifiedOscillator,
    CjCoordinate,
    CjMomentum,
    ModifiedParametric,
    ParametricSech2,
    SimpleHarmonic,
    FreeParticle,
}

impl ModelId {
    pub const ALL: [ModelId; 10] = [
        ModelId::CaldirolaKanai,
        ModelId::ModifiedCaldirolaKanai,
        ModelId::United,
        ModelId::ModifiedOscillator,
        ModelId::CjCoordinate,
        ModelId::CjMomentum,
        ModelId::ModifiedParametric,
        ModelId::ParametricSech2,
        ModelId::SimpleHarmonic,
        ModelId::FreeParticle,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelId::CaldirolaKanai => "caldirola_kanai",
            ModelId::ModifiedCaldirolaKanai => "modified_caldirola_kanai",
            ModelId::United => "united",
            ModelId::ModifiedOscillator => "modified_oscillator",
            ModelId::CjCoordinate => "cj_coordinate",
            ModelId::CjMomentum => "cj_momentum",
            ModelId::ModifiedParametric => "modified_parametric",
            ModelId::ParametricSech2 => "parametric_sech2",
            ModelId::SimpleHarmonic => "simple_harmonic",
            ModelId::FreeParticle => "free_particle",
        }
    }

    /// Parameters the model reads from a [`ModelSpec`].
    pub fn parameters(self) -> &'static [&'static str] {
        match self {
            ModelId::CaldirolaKanai
            | ModelId::ModifiedCaldirolaKanai
            | ModelId::CjCoordinate
            | ModelId::CjMomentum
            | ModelId::ParametricSech2 => &["omega0", "lambda"],
            ModelId::United => &["omega0", "lambda", "mu"],
            ModelId::ModifiedOscillator | ModelId::FreeParticle => &[],
            ModelId::ModifiedParametric => &["omega0", "lambda", "delta"],
            ModelId::SimpleHarmonic => &["omega0"],
        }
    }

    pub fn constraint(self) -> &'static str {
        match self {
            ModelId::CaldirolaKanai
            | ModelId::ModifiedCaldirolaKanai
            | ModelId::CjCoordinate
            | ModelId::CjMomentum => "omega0^2 - lambda^2 > 0",
            ModelId::United => "omega0^2 - (lambda - mu)^2 > 0",
            ModelId::ModifiedOscillator => "t < pi/2",
            ModelId::ModifiedParametric => "delta != 0, omega0 > 0",
            ModelId::ParametricSech2 | ModelId::SimpleHarmonic => "omega0 > 0",
            ModelId::FreeParticle => "none",
        }
    }

    pub fn is_self_adjoint(self) -> bool {
        self != ModelId::United
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        ModelId::ALL
            .iter()
            .copied()
            .find(|m| m.id() == key)
            .ok_or_else(|| Error::InvalidInput(format!("unknown model '{s}'")))
    }
}

/// Parameters of a built-in model.
///
/// `omega0` doubles as the frequency ω of the modified parametric and sech²
/// oscillators, whose Hamiltonians are written directly in terms of ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: ModelId,
    pub omega0: f64,
    pub lambda: f64,
    pub mu_param: f64,
    pub delta: f64,
}

impl ModelSpec {
    pub fn new(model: ModelId) -> Self {
        ModelSpec {
            model,
            omega0: 1.0,
            lambda: 0.0,
            mu_param: 0.0,
            delta: 0.0,
        }
    }

    pub fn omega0(mut self, v: f64) -> Self {
        self.omega0 = v;
        self
    }

    pub fn lambda(mut self, v: f64) -> Self {
        self.lambda = v;
        self
    }

    pub fn mu(mut self, v: f64) -> Self {
        self.mu_param = v;
        self
    }

    pub fn delta(mut self, v: f64) -> Self {
        self.delta = v;
        self
    }

    /// Squared oscillation frequency of the model's characteristic solution.
    pub fn omega_sq(&self) -> f64 {
        let (w0, l) = (self.omega0, self.lambda);
        match self.model {
            ModelId::CaldirolaKanai
            | ModelId::ModifiedCaldirolaKanai
            | ModelId::CjCoordinate
            | ModelId::CjMomentum => w0 * w0 - l * l,
            ModelId::United => w0 * w0 - (l - self.mu_param).powi(2),
            ModelId::ModifiedOscillator => 1.0,
            ModelId::ModifiedParametric | ModelId::ParametricSech2 | ModelId::SimpleHarmonic => {
                w0 * w0
            }
            ModelId::FreeParticle => 0.0,
        }
    }

    pub fn omega(&self) -> f64 {
        self.omega_sq().max(0.0).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModelParams(msg));
        for (name, v) in [
            ("omega0", self.omega0),
            ("lambda", self.lambda),
            ("mu", self.mu_param),
            ("delta", self.delta),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} is not finite"));
            }
        }
        if self.omega0 < 0.0 {
            return bad(format!("omega0 must be >= 0, got {}", self.omega0));
        }
        match self.model {
            ModelId::ModifiedOscillator | ModelId::FreeParticle => Ok(()),
            ModelId::ModifiedParametric if self.delta == 0.0 => bad("delta != 0 required".into()),
            ModelId::ModifiedParametric | ModelId::ParametricSech2 | ModelId::SimpleHarmonic
                if self.omega0 <= 0.0 =>
            {
                bad("omega0 > 0 required".into())
            }
            _ if self.omega_sq() <= 0.0 => bad(format!(
                "{}: omega^2 = {} must be positive ({})",
                self.model,
                self.omega_sq(),
                self.model.constraint()
            )),
            _ => Ok(()),
        }
    }

    /// End of the time interval on which the coefficients are finite.
    pub fn domain_end(&self) -> f64 {
        match self.model {
            ModelId::ModifiedOscillator => FRAC_PI_2,
            ModelId::ModifiedParametric if self.lambda * self.delta < 0.0 => -self.delta / self.lambda,
            _ => f64::INFINITY,
        }
    }

    /// Build a spec from `key=value` pairs (model, omega0, lambda, mu, delta).
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut model = None;
        let mut spec = ModelSpec::new(ModelId::FreeParticle);
        for (k, v) in pairs {
            let num = || {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("{k}: cannot parse '{v}' as a number")))
            };
            match k.trim() {
                "model" => model = Some(v.parse::<ModelId>()?),
                "omega0" => spec.omega0 = num()?,
                "lambda" => spec.lambda = num()?,
                "mu" | "mu_param" => spec.mu_param = num()?,
                "delta" => spec.delta = num()?,
                other => return Err(Error::InvalidInput(format!("unknown model key '{other}'"))),
            }
        }
        spec.model = model.ok_or_else(|| Error::InvalidInput("missing 'model'".into()))?;
        Ok(spec)
    }
}

struct Builtin(ModelSpec);

impl CoefficientSource for Builtin {
    fn jets(&self, t: f64) -> CoeffJets {
        let s = &self.0;
        let tt = Jet::var(t);
        let (w0, l) = (s.omega0, s.lambda);
        let zero = Jet::constant(0.0);
        let ck = || ((tt * (-2.0 * l)).exp() * (w0 / 2.0), (tt * (2.0 * l)).exp() * (w0 / 2.0));
        match s.model {
            ModelId::CaldirolaKanai => {
                let (a, b) = ck();
                CoeffJets { a, b, c: zero, d: zero }
            }
            ModelId::ModifiedCaldirolaKanai => {
                let (a, b) = ck();
                let m = Jet::constant(-l);
                CoeffJets { a, b, c: m, d: m }
            }
            ModelId::United => {
                let (a, b) = ck();
                CoeffJets { a, b, c: zero, d: Jet::constant(-s.mu_param) }
            }
            ModelId::ModifiedOscillator => {
                let (sn, cs) = (tt.sin(), tt.cos());
                CoeffJets {
                    a: cs.square(),
                    b: sn.square(),
                    c: sn * cs,
                    d: sn * cs,
                }
            }
            ModelId::CjCoordinate => {
                let ch2 = (tt * l).cosh().square();
                CoeffJets {
                    a: ch2.recip() * 0.5,
                    b: ch2 * (w0 * w0 / 2.0),
                    c: zero,
                    d: zero,
                }
            }
            ModelId::CjMomentum => {
                let ch2 = (tt * l).cosh().square();
                CoeffJets {
                    a: ch2 * (w0 / 2.0),
                    b: ch2.recip() * (w0 / 2.0),
                    c: zero,
                    d: zero,
                }
            }
            ModelId::ModifiedParametric => {
                let u = tt * l + s.delta;
                let th2 = u.tanh().square();
                let cd = l / (u * 2.0).sinh();
                CoeffJets {
                    a: th2 * (w0 / 2.0),
                    b: th2.recip() * (w0 / 2.0),
                    c: cd,
                    d: cd,
                }
            }
            ModelId::ParametricSech2 => {
                let sech2 = (tt * l).cosh().square().recip();
                CoeffJets {
                    a: Jet::constant(0.5),
                    b: (sech2 * (2.0 * l * l) + w0 * w0) * 0.5,
                    c: zero,
                    d: zero,
                }
            }
            ModelId::SimpleHarmonic => CoeffJets {
                a: Jet::constant(0.5),
                b: Jet::constant(w0 * w0 / 2.0),
                c: zero,
                d: zero,
            },
            ModelId::FreeParticle => CoeffJets {
                a: Jet::constant(0.5),
                b: zero,
                c: zero,
                d: zero,
            },
        }
    }
}

/// Coefficient functions in a declared convention on the domain `[0, t_max)`.
#[derive(Clone)]
pub struct TimeCoefficients {
    source: Arc<dyn CoefficientSource>,
    native: Convention,
    convention: Convention,
    t_max: f64,
    model: Option<ModelSpec>,
}

impl fmt::Debug for TimeCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeCoefficients")
            .field("convention", &self.convention)
            .field("t_max", &self.t_max)
            .field("model", &self.model)
            .finish()
    }
}

impl TimeCoefficients {
    /// Wrap an arbitrary source whose functions are written in `convention`.
    pub fn from_source(
        source: Arc<dyn CoefficientSource>,
        convention: Convention,
        t_max: f64,
    ) -> Result<Self> {
        let a0 = source.jets(0.0).a.value;
        if a0 == 0.0 || !a0.is_finite() {
            return Err(Error::InvalidInput(format!("a(0) must be finite and non-zero, got {a0}")));
        }
        Ok(TimeCoefficients {
            source,
            native: convention,
            convention,
            t_max,
            model: None,
        })
    }

    pub fn from_fns(
        convention: Convention,
        t_max: f64,
        a: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
        c: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let src = FnCoefficients {
            a: Box::new(a),
            b: Box::new(b),
            c: Box::new(c),
            d: Box::new(d),
            derivatives: None,
        };
        Self::from_source(Arc::new(src), convention, t_max)
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn model(&self) -> Option<&ModelSpec> {
        self.model.as_ref()
    }

    pub fn domain_end(&self) -> f64 {
        self.t_max
    }

    pub fn require(&self, conv: Convention) -> Result<()> {
        if self.convention == conv {
            Ok(())
        } else {
            Err(Error::ConventionMismatch {
                expected: conv.name(),
                found: self.convention.name(),
            })
        }
    }

    /// Coefficients and derivatives in this object's convention.
    pub fn jets(&self, t: f64) -> CoeffJets {
        let j = self.source.jets(t);
        match (self.native, self.convention) {
            (Convention::HamiltonianForm, Convention::EquationForm) => j.to_equation(),
            (Convention::EquationForm, Convention::HamiltonianForm) => j.to_hamiltonian(),
            _ => j,
        }
    }

    pub fn checked_jets(&self, t: f64) -> Result<CoeffJets> {
        let j = self.jets(t);
        if j.is_finite() {
            Ok(j)
        } else {
            Err(Error::NonFiniteCoefficient { t })
        }
    }

    pub fn eval(&self, t: f64) -> Coeffs {
        self.jets(t).values()
    }

    pub fn a(&self, t: f64) -> f64 {
        self.eval(t).a
    }

    /// Whether the coefficients at `t` describe a self-adjoint Hamiltonian.
    pub fn is_self_adjoint_at(&self, t: f64) -> bool {
        let k = self.eval(t);
        let (lhs, rhs) = match self.convention {
            Convention::HamiltonianForm => (k.c, k.d),
            Convention::EquationForm => (k.c, 2.0 * k.d),
        };
        (lhs - rhs).abs() <= 1e-14 * (1.0 + lhs.abs())
    }
}

/// Coefficients of a built-in model in the requested convention.
pub fn builtin_coefficients(spec: &ModelSpec, convention: Convention) -> Result<TimeCoefficients> {
    spec.validate()?;
    let tc = TimeCoefficients {
        source: Arc::new(Builtin(*spec)),
        native: Convention::HamiltonianForm,
        convention: Convention::HamiltonianForm,
        t_max: spec.domain_end(),
        model: Some(*spec),
    };
    Ok(convert_convention(&tc, convention))
}

/// Re-express `tc` in `target`. The underlying functions are shared, so a
/// round trip returns exactly the original values.
pub fn convert_convention(tc: &TimeCoefficients, target: Convention) -> TimeCoefficients {
    TimeCoefficients {
        convention: target,
        ..tc.clone()
    }
}

/// Drift and restoring coefficients (τ, σ) at `t`.
///
/// In equation form these define the characteristic equation
/// `μ'' − τ μ' + 4σ μ = 0`; in Hamiltonian form they define the
/// second-order Ehrenfest equation for ⟨x⟩.
pub fn tau_sigma(tc: &TimeCoefficients, t: f64) -> Result<(f64, f64)> {
    let j = tc.checked_jets(t)?;
    let (a, ap, b) = (j.a.value, j.a.first, j.b.value);
    if a == 0.0 {
        return Err(Error::SingularCoefficient { t });
    }
    let (c, d, dp) = (j.c.value, j.d.value, j.d.first);
    let out = match tc.convention {
        Convention::EquationForm => (
            ap / a - 2.0 * c + 4.0 * d,
            a * b - c * d + d * d + d * ap / (2.0 * a) - dp / 2.0,
        ),
        Convention::HamiltonianForm => (
            ap / a - 2.0 * c + 2.0 * d,
            a * b - c * d + d * ap / (2.0 * a) - dp / 2.0,
        ),
    };
    if out.0.is_finite() && out.1.is_finite() {
        Ok(out)
    } else {
        Err(Error::NonFiniteCoefficient { t })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ham(spec: ModelSpec) -> TimeCoefficients {
        builtin_coefficients(&spec, Convention::HamiltonianForm).unwrap()
    }

    #[test]
    fn ck_with_zero_damping_is_the_oscillator() {
        let k = ham(ModelSpec::new(ModelId::CaldirolaKanai).omega0(1.0)).eval(0.8);
        assert_eq!((k.a, k.b, k.c, k.d), (0.5, 0.5, 0.0, 0.0));
    }

    #[test]
    fn cj_coordinate_values() {
        let t = 1.3;
        let k = ham(ModelSpec::new(ModelId::CjCoordinate).omega0(1.0).lambda(0.2)).eval(t);
        let ch = (0.2 * t).cosh();
        assert!((k.a - 1.0 / (2.0 * ch * ch)).abs() < 1e-15);
        assert!((k.b - ch * ch / 2.0).abs() < 1e-15);
    }

    #[test]
    fn united_hamiltonian_form() {
        let spec = ModelSpec::new(ModelId::United).omega0(1.0).lambda(0.3).mu(0.1);
        let t = 0.9;
        let k = ham(spec).eval(t);
        assert!((k.a - 0.5 * (-0.6 * t).exp()).abs() < 1e-15);
        assert!((k.b - 0.5 * (0.6 * t).exp()).abs() < 1e-15);
        assert_eq!((k.c, k.d), (0.0, -0.1));
        let e = builtin_coefficients(&spec, Convention::EquationForm).unwrap().eval(t);
        assert_eq!((e.c, e.d), (-0.1, 0.0));
    }

    #[test]
    fn self_adjoint_map() {
        let spec = ModelSpec::new(ModelId::ModifiedCaldirolaKanai).omega0(1.0).lambda(0.25);
        let e = builtin_coefficients(&spec, Convention::EquationForm).unwrap();
        let k = e.eval(0.4);
        assert_eq!((k.c, k.d), (-0.5, -0.25));
        assert!(e.is_self_adjoint_at(0.4));
    }

    #[test]
    fn round_trip_is_exact() {
        let spec = ModelSpec::new(ModelId::ModifiedParametric).omega0(1.0).lambda(0.2).delta(0.5);
        let h = ham(spec);
        let back = convert_convention(&convert_convention(&h, Convention::EquationForm), Convention::HamiltonianForm);
        for &t in &[0.0, 0.7, 2.1] {
            assert_eq!(h.eval(t), back.eval(t));
        }
    }

    #[test]
    fn ck_tau_sigma() {
        let spec = ModelSpec::new(ModelId::CaldirolaKanai).omega0(1.0).lambda(0.1);
        let e = builtin_coefficients(&spec, Convention::EquationForm).unwrap();
        let (tau, sigma) = tau_sigma(&e, 1.7).unwrap();
        assert!((tau + 0.2).abs() < 1e-14);
        assert!((sigma - 0.25).abs() < 1e-14);
    }

    #[test]
    fn modified_oscillator_ehrenfest() {
        // x'' + 2 tan t x' - 2x = 0, i.e. tau = -2 tan t, 4 sigma = -2
        let h = ham(ModelSpec::new(ModelId::ModifiedOscillator));
        for &t in &[0.1, 0.6, 1.2] {
            let (tau, sigma) = tau_sigma(&h, t).unwrap();
            assert!((tau + 2.0 * t.tan()).abs() < 1e-13);
            assert!((4.0 * sigma + 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_params() {
        let s = ModelSpec::new(ModelId::CaldirolaKanai).omega0(0.5).lambda(0.6);
        assert!(matches!(s.validate(), Err(Error::InvalidModelParams(_))));
        let s = ModelSpec::new(ModelId::ModifiedParametric).omega0(1.0).lambda(0.2);
        assert!(s.validate().is_err());
        let s = ModelSpec::new(ModelId::United).omega0(1.0).lambda(1.3).mu(0.2);
        assert!(s.validate().is_err());
    }

    #[test]
    fn parse_pairs() {
        let s = ModelSpec::from_pairs([("model", "united"), ("omega0", "1"), ("lambda", "0.3"), ("mu", "0.1")]).unwrap();
        assert_eq!(s.model, ModelId::United);
        assert_eq!(s.mu_param, 0.1);
        assert!(ModelSpec::from_pairs([("model", "nope")]).is_err());
    }
}

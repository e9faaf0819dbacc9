//! Second-order forward-mode differentiation in one variable.
//!
//! A [`Jet`] carries `f(t)`, `f'(t)` and `f''(t)`. Arithmetic and the
//! elementary functions propagate all three by the chain rule, so closed-form
//! coefficient models get exact first and second derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

impl Jet {
    pub const fn new(value: f64, first: f64, second: f64) -> Self {
        Jet { value, first, second }
    }

    pub const fn constant(value: f64) -> Self {
        Jet::new(value, 0.0, 0.0)
    }

    /// The independent variable itself.
    pub const fn var(t: f64) -> Self {
        Jet::new(t, 1.0, 0.0)
    }

    /// Apply a scalar function given its value and first two derivatives at `self.value`.
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        Jet::new(
            f,
            df * self.first,
            d2f * self.first * self.first + df * self.second,
        )
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Self {
        let x = self.value;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }

    pub fn sinh(self) -> Self {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.chain(s, c, s)
    }

    pub fn cosh(self) -> Self {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.chain(c, s, c)
    }

    pub fn tanh(self) -> Self {
        let th = self.value.tanh();
        let sech2 = 1.0 - th * th;
        self.chain(th, sech2, -2.0 * th * sech2)
    }

    pub fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.value))
    }

    pub fn recip(self) -> Self {
        let x = self.value;
        self.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn powi(self, n: i32) -> Self {
        let x = self.value;
        let nf = f64::from(n);
        self.chain(
            x.powi(n),
            nf * x.powi(n - 1),
            nf * (nf - 1.0) * x.powi(n - 2),
        )
    }

    pub fn square(self) -> Self {
        self * self
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.first.is_finite() && self.second.is_finite()
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet::new(self.value + o.value, self.first + o.first, self.second + o.second)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet::new(self.value - o.value, self.first - o.first, self.second - o.second)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet::new(
            self.value * o.value,
            self.first * o.value + self.value * o.first,
            self.second * o.value + 2.0 * self.first * o.first + self.value * o.second,
        )
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet::new(-self.value, -self.first, -self.second)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, o: f64) -> Jet {
        Jet::new(self.value + o, self.first, self.second)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, o: f64) -> Jet {
        Jet::new(self.value - o, self.first, self.second)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, o: f64) -> Jet {
        Jet::new(self.value * o, self.first * o, self.second * o)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, o: f64) -> Jet {
        Jet::new(self.value / o, self.first / o, self.second / o)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        o + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        -o + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        o * self
    }
}

impl Div<Jet> for f64 {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        o.recip() * self
    }
}

/// A real function of time that can report its first two derivatives.
pub trait ScalarFunction: Send + Sync {
    fn jet(&self, t: f64) -> Jet;

    fn value(&self, t: f64) -> f64 {
        self.jet(t).value
    }
}

impl<F> ScalarFunction for F
where
    F: Fn(Jet) -> Jet + Send + Sync,
{
    fn jet(&self, t: f64) -> Jet {
        self(Jet::var(t))
    }
}

/// Wraps a plain value-only closure and differentiates it by central differences.
pub struct FiniteDifference<F>(pub F);

impl<F> ScalarFunction for FiniteDifference<F>
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn jet(&self, t: f64) -> Jet {
        let h = fd_step(t).max(1e-4);
        let f = &self.0;
        let (fm, f0, fp) = (f(t - h), f(t), f(t + h));
        Jet::new(f0, (fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
    }
}

/// Step used for finite-difference fallbacks.
pub fn fd_step(t: f64) -> f64 {
    (1e-8 * t.abs()).max(1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, t: f64) -> (f64, f64) {
        let h = 1e-4;
        (
            (f(t + h) - f(t - h)) / (2.0 * h),
            (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h),
        )
    }

    #[test]
    fn composite_matches_finite_difference() {
        let g = |x: Jet| (x * 0.7).sin() * (x * 0.3).exp() / (x.cosh() + 2.0) + x.tanh().sqrt();
        let gf = |x: f64| (0.7 * x).sin() * (0.3 * x).exp() / (x.cosh() + 2.0) + x.tanh().sqrt();
        for &t in &[0.3, 1.1, 2.5] {
            let j = g(Jet::var(t));
            let (d1, d2) = fd(gf, t);
            assert!((j.value - gf(t)).abs() < 1e-14);
            assert!((j.first - d1).abs() < 1e-7, "{} {}", j.first, d1);
            assert!((j.second - d2).abs() < 1e-5, "{} {}", j.second, d2);
        }
    }

    #[test]
    fn powi_and_ln() {
        let t = 1.7;
        let j = Jet::var(t).powi(-3) + Jet::var(t).ln();
        assert!((j.first - (-3.0 * t.powi(-4) + 1.0 / t)).abs() < 1e-14);
        assert!((j.second - (12.0 * t.powi(-5) - 1.0 / (t * t))).abs() < 1e-13);
    }
}

//! Adaptive Dormand–Prince 5(4) integration with cubic Hermite dense output.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions {
            rtol: tol,
            atol: tol,
            ..Default::default()
        }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: 0.05,
            max_steps: 2_000_000,
        }
    }
}

/// Accepted steps of an integration together with slopes at every node.
#[derive(Debug, Clone)]
pub struct OdeSolution<const N: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; N]>,
    pub dy: Vec<[f64; N]>,
    /// Largest scaled local error estimate among accepted steps (<= 1 means within tolerance).
    pub max_error_ratio: f64,
    /// Set when integration stopped early because the guard fired.
    pub stopped_at: Option<f64>,
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrate `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// `stops` are times the stepper lands on exactly. `guard` may end the
/// integration early; the solution then records the stopping time.
pub fn integrate<const N: usize, F, G>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    opts: &OdeOptions,
    stops: &[f64],
    mut guard: G,
) -> Result<OdeSolution<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    G: FnMut(f64, &[f64; N]) -> bool,
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut stops: Vec<f64> = stops
        .iter()
        .copied()
        .filter(|s| dir * (s - t0) > 0.0 && dir * (t1 - s) > 0.0)
        .collect();
    stops.sort_by(|a, b| (dir * a).partial_cmp(&(dir * b)).unwrap());
    stops.push(t1);
    let mut next_stop = 0;

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut sol = OdeSolution {
        t: vec![t],
        y: vec![y],
        dy: vec![k1],
        max_error_ratio: 0.0,
        stopped_at: None,
    };
    if span == 0.0 {
        return Ok(sol);
    }
    if k1.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::SingularCoefficient { t });
    }

    let mut h = (opts.rtol.powf(0.2) * 0.1).min(opts.h_max).min(span);
    let mut steps = 0usize;
    while dir * (t1 - t) > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::ToleranceNotMet {
                what: "ode",
                detail: format!("step limit reached at t = {t}"),
            });
        }
        let target = stops[next_stop];
        let mut landing = false;
        if h >= (target - t).abs() {
            h = (target - t).abs();
            landing = true;
        }
        let hs = dir * h;
        let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * hs,
            &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + hs,
            &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = axpy(&y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let t_new = if landing { target } else { t + hs };
        let k7 = f(t_new, &y_new);

        let mut err = 0.0;
        let mut finite = true;
        for i in 0..N {
            let e = hs
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
            finite &= y_new[i].is_finite() && k7[i].is_finite();
        }
        let err = (err / N as f64).sqrt();
        if !finite || !err.is_finite() {
            h *= 0.25;
            if h < 1e-14 * span.max(1.0) {
                return Err(Error::SingularCoefficient { t });
            }
            continue;
        }
        if err <= 1.0 {
            t = t_new;
            y = y_new;
            k1 = k7;
            sol.t.push(t);
            sol.y.push(y);
            sol.dy.push(k1);
            sol.max_error_ratio = sol.max_error_ratio.max(err);
            if landing {
                next_stop += 1;
            }
            if guard(t, &y) {
                sol.stopped_at = Some(t);
                return Ok(sol);
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(opts.h_max);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < 1e-14 * span.max(1.0) {
                return Err(Error::ToleranceNotMet {
                    what: "ode",
                    detail: format!("step size underflow at t = {t}"),
                });
            }
        }
    }
    Ok(sol)
}

impl<const N: usize> OdeSolution<N> {
    pub fn t_start(&self) -> f64 {
        self.t[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().unwrap()
    }

    pub fn last(&self) -> [f64; N] {
        *self.y.last().unwrap()
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.t.len();
        if n < 2 {
            return 0;
        }
        let increasing = self.t[n - 1] >= self.t[0];
        let idx = if increasing {
            self.t.partition_point(|&s| s <= t)
        } else {
            self.t.partition_point(|&s| s >= t)
        };
        idx.clamp(1, n - 1) - 1
    }

    /// Cubic Hermite interpolation of the state and its slope.
    pub fn eval(&self, t: f64) -> ([f64; N], [f64; N]) {
        if self.t.len() == 1 {
            return (self.y[0], self.dy[0]);
        }
        let i = self.locate(t);
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (y0, y1, d0, d1) = (&self.y[i], &self.y[i + 1], &self.dy[i], &self.dy[i + 1]);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let g00 = 6.0 * s * (s - 1.0) / h;
        let g10 = (1.0 - s) * (1.0 - 3.0 * s);
        let g01 = -g00;
        let g11 = s * (3.0 * s - 2.0);
        let mut y = [0.0; N];
        let mut dy = [0.0; N];
        for k in 0..N {
            y[k] = h00 * y0[k] + h * h10 * d0[k] + h01 * y1[k] + h * h11 * d1[k];
            dy[k] = g00 * y0[k] + g10 * d0[k] + g01 * y1[k] + g11 * d1[k];
        }
        (y, dy)
    }

    pub fn value(&self, t: f64) -> [f64; N] {
        self.eval(t).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_one_period() {
        let opts = OdeOptions::with_tol(1e-12);
        let tp = 2.0 * std::f64::consts::PI;
        let sol = integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [0.0, 1.0], tp, &opts, &[], |_, _| false)
            .unwrap();
        let y = sol.last();
        assert!(y[0].abs() < 1e-10 && (y[1] - 1.0).abs() < 1e-10);
        assert_eq!(sol.t_end(), tp);
        for &t in &[0.3, 1.7, 4.4] {
            let v = sol.value(t);
            assert!((v[0] - f64::sin(t)).abs() < 1e-9, "{}", v[0] - t.sin());
        }
    }

    #[test]
    fn backward_and_stops() {
        let opts = OdeOptions::with_tol(1e-11);
        let sol = integrate(|_, y: &[f64; 1]| [-y[0]], 1.0, [1.0], 0.0, &opts, &[0.5], |_, _| false).unwrap();
        assert!(sol.t.iter().any(|&t| t == 0.5));
        assert!((sol.last()[0] - 1f64.exp()).abs() < 1e-9);
        assert!((sol.value(0.25)[0] - 0.75f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn guard_stops_early() {
        let opts = OdeOptions::with_tol(1e-10);
        let sol = integrate(|_, y: &[f64; 1]| [-1.0 + 0.0 * y[0]], 0.0, [1.0], 5.0, &opts, &[], |_, y| y[0] < 0.2)
            .unwrap();
        let ts = sol.stopped_at.unwrap();
        assert!(ts > 0.8 && ts < 1.0);
    }
}

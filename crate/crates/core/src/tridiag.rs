//! Thomas algorithm for complex tridiagonal systems.

use num_complex::Complex64;

/// Solve `lower[i]·x[i−1] + diag[i]·x[i] + upper[i]·x[i+1] = rhs[i]` in place.
///
/// `lower[0]` and `upper[n−1]` are ignored. `scratch` must have length n.
pub fn solve(
    lower: &[Complex64],
    diag: &[Complex64],
    upper: &[Complex64],
    rhs: &mut [Complex64],
    scratch: &mut [Complex64],
) {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n && scratch.len() == n);
    if n == 0 {
        return;
    }
    let mut denom = diag[0];
    scratch[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = upper[i] / denom;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= scratch[i] * next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let lower = [c(0.0, 0.0), c(1.0, 0.5), c(-0.3, 0.0)];
        let diag = [c(4.0, 1.0), c(3.0, -1.0), c(5.0, 0.2)];
        let upper = [c(0.5, 0.0), c(1.0, 1.0), c(0.0, 0.0)];
        let x = [c(1.0, -1.0), c(0.5, 2.0), c(-2.0, 0.3)];
        let mut rhs = [
            diag[0] * x[0] + upper[0] * x[1],
            lower[1] * x[0] + diag[1] * x[1] + upper[1] * x[2],
            lower[2] * x[1] + diag[2] * x[2],
        ];
        let mut scratch = [c(0.0, 0.0); 3];
        solve(&lower, &diag, &upper, &mut rhs, &mut scratch);
        for i in 0..3 {
            assert!((rhs[i] - x[i]).norm() < 1e-14);
        }
    }
}

//! Small numerical kernels shared by the solvers and analyses.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    let n = n as f64;
    PI.powf(n / 2.0) / libm::tgamma(n / 2.0 + 1.0)
}

/// Surface measure of the unit sphere in `R^n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// LU factorization of a tridiagonal matrix without pivoting.
///
/// Intended for diagonally dominant M-matrices, where the Thomas algorithm
/// is stable.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    upper_scaled: Vec<f64>,
    pivot_inv: Vec<f64>,
}

impl Tridiagonal {
    /// `lower[i]` couples row `i` to `i-1`, `upper[i]` couples row `i` to `i+1`.
    pub fn factor(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut upper_scaled = vec![0.0; n];
        let mut pivot_inv = vec![0.0; n];
        let mut prev = 0.0;
        for i in 0..n {
            let pivot = diag[i] - if i > 0 { lower[i] * prev } else { 0.0 };
            if !(pivot.abs() > 0.0) || !pivot.is_finite() {
                return Err(Error::SingularAssembly(format!("zero pivot in row {i}")));
            }
            pivot_inv[i] = 1.0 / pivot;
            prev = if i + 1 < n { upper[i] * pivot_inv[i] } else { 0.0 };
            upper_scaled[i] = prev;
        }
        Ok(Self { lower: lower.to_vec(), upper_scaled, pivot_inv })
    }

    /// Solves in place; `rhs` becomes the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        for i in 0..n {
            let carry = if i > 0 { self.lower[i] * rhs[i - 1] } else { 0.0 };
            rhs[i] = (rhs[i] - carry) * self.pivot_inv[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            rhs[i] -= self.upper_scaled[i] * rhs[i + 1];
        }
    }
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let coef = least_squares(x.iter().map(|&xi| vec![1.0, xi]).collect(), y)?;
    let rms = rms_residual(x, y, |xi| coef[0] + coef[1] * xi);
    Ok(LineFit { intercept: coef[0], slope: coef[1], rms })
}

fn rms_residual(x: &[f64], y: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let ss: f64 = x.iter().zip(y).map(|(&xi, &yi)| (yi - f(xi)).powi(2)).sum();
    (ss / x.len().max(1) as f64).sqrt()
}

/// Least-squares solution of `rows * c = y` via SVD.
pub fn least_squares(rows: Vec<Vec<f64>>, y: &[f64]) -> Result<Vec<f64>> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if m < n || n == 0 || y.len() != m {
        return Err(Error::FitFailure(format!("{m} samples for {n} unknowns")));
    }
    let a = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return Err(Error::FitFailure("degenerate design matrix".into()));
    }
    let sol = svd
        .solve(&b, smax * 1e-13)
        .map_err(|e| Error::FitFailure(e.to_string()))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailure("non-finite coefficients".into()));
    }
    Ok(sol.iter().copied().collect())
}

/// Aitken's delta-squared estimate of the limit of `s0, s1, s2`.
pub fn aitken(s0: f64, s1: f64, s2: f64) -> Option<f64> {
    let d1 = s1 - s0;
    let d2 = s2 - s1;
    let denom = d2 - d1;
    if denom.abs() <= 1e-15 * (s0.abs() + s1.abs() + s2.abs()) {
        return None;
    }
    let v = s2 - d2 * d2 / denom;
    v.is_finite().then_some(v)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Geometric snapshot times from `t_min` to `t_max` with ratio at most `ratio`.
///
/// The last time equals `t_max` exactly.
pub fn geometric_times(t_min: f64, t_max: f64, ratio: f64) -> Result<Vec<f64>> {
    if !(t_min > 0.0) || !(t_max > t_min) || !t_max.is_finite() {
        return Err(Error::Config(format!("need 0 < t_min < T, got t_min = {t_min}, T = {t_max}")));
    }
    if !(ratio > 1.0 && ratio <= 1.5) {
        return Err(Error::Config(format!("time ratio {ratio} outside (1, 1.5]")));
    }
    let mut times = vec![t_min];
    let mut k = 1;
    loop {
        let t = t_min * ratio.powi(k);
        if t >= t_max * (1.0 - 1e-12) {
            break;
        }
        times.push(t);
        k += 1;
    }
    times.push(t_max);
    Ok(times)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_matches_dense_solve() {
        let n = 7;
        let lower: Vec<f64> = (0..n).map(|i| -1.0 - 0.1 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.5 - 0.05 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 4.0 + i as f64).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = rhs.clone();
        Tridiagonal::factor(&lower, &diag, &upper).unwrap().solve_in_place(&mut x);
        for i in 0..n {
            let mut r = diag[i] * x[i];
            if i > 0 {
                r += lower[i] * x[i - 1];
            }
            if i + 1 < n {
                r += upper[i] * x[i + 1];
            }
            assert!((r - rhs[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn aitken_recovers_geometric_limit() {
        let s: Vec<f64> = (0..3).map(|k| 2.0 + 0.7 * 0.5f64.powi(k)).collect();
        assert!((aitken(s[0], s[1], s[2]).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn geometric_times_end_exactly() {
        let t = geometric_times(1e-5, 10.0, 1.2).unwrap();
        assert_eq!(*t.last().unwrap(), 10.0);
        for w in t.windows(2) {
            assert!(w[1] / w[0] <= 1.2 * (1.0 + 1e-12));
        }
        assert!(geometric_times(1e-5, 10.0, 1.6).is_err());
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-14);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
    }
}

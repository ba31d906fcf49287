//! Real polynomials stored lowest power first.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn eval(p: &[f64], s: Complex64) -> Complex64 {
    p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// Drops leading coefficients that are negligible relative to the largest one.
pub fn trim(p: &[f64], rel_tol: f64) -> Vec<f64> {
    let scale = p.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut n = p.len();
    while n > 1 && p[n - 1].abs() <= rel_tol * scale {
        n -= 1;
    }
    p[..n.max(1)].to_vec()
}

pub fn degree(p: &[f64]) -> usize {
    p.len().saturating_sub(1)
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| a.get(k).copied().unwrap_or(0.0) + b.get(k).copied().unwrap_or(0.0))
        .collect()
}

pub fn scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|x| x * k).collect()
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(m: DMatrix<f64>) -> Result<Vec<Complex64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m, 1e-14, 10_000)
        .ok_or_else(|| Error::NumericFailure("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Roots through the eigenvalues of the companion matrix.
pub fn roots(p: &[f64]) -> Result<Vec<Complex64>> {
    let p = trim(p, 1e-14);
    let n = degree(&p);
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = p[n];
    let mut c = DMatrix::zeros(n, n);
    for k in 1..n {
        c[(k, k - 1)] = 1.0;
    }
    for k in 0..n {
        c[(k, n - 1)] = -p[k] / lead;
    }
    eigenvalues(c)
}

/// Monic real polynomial with the given roots (conjugates must be paired).
pub fn from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut acc = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
        for (k, a) in acc.iter().enumerate() {
            next[k + 1] += a;
            next[k] -= a * r;
        }
        acc = next;
    }
    acc.iter().map(|c| c.re).collect()
}

/// Characteristic polynomial `det(sI − A)` by the Faddeev–LeVerrier recursion.
pub fn charpoly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = a * &m + DMatrix::identity(n, n) * coeffs[n + 1 - k];
        coeffs[n - k] = -(a * &m).trace() / k as f64;
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_roots() {
        // s² + 2s + 5 → −1 ± 2j
        let mut r = roots(&[5.0, 2.0, 1.0]).unwrap();
        r.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((r[0] - Complex64::new(-1.0, -2.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(-1.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn from_roots_inverts_roots() {
        let p = [6.0, -5.0, -2.0, 1.0];
        let back = from_roots(&roots(&p).unwrap());
        for (a, b) in p.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn charpoly_of_companion() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -9.0, -0.6]);
        let c = charpoly(&a);
        assert!((c[0] - 9.0).abs() < 1e-12 && (c[1] - 0.6).abs() < 1e-12 && c[2] == 1.0);
    }
}

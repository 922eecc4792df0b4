//! Dense real polynomials (ascending coefficients) for the phase-type root path.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub(crate) fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0))
        .collect()
}

/// Characteristic polynomial `det(sI − A)` and the coefficient matrices of
/// `adj(sI − A) = Σ_k M_k s^{m−k}` (so `M_1 = I` leads), by Faddeev–LeVerrier.
pub(crate) fn charpoly_adjugate(a: &DMatrix<f64>) -> (Vec<f64>, Vec<DMatrix<f64>>) {
    let m = a.nrows();
    let mut c = vec![0.0; m + 1];
    c[m] = 1.0;
    let mut mats = Vec::with_capacity(m);
    let mut prev = DMatrix::<f64>::zeros(m, m);
    for k in 1..=m {
        let mk = a * &prev + DMatrix::<f64>::identity(m, m) * c[m - k + 1];
        c[m - k] = -(a * &mk).trace() / k as f64;
        mats.push(mk.clone());
        prev = mk;
    }
    (c, mats)
}

/// All complex roots via eigenvalues of the companion matrix.
pub(crate) fn roots(coeffs: &[f64]) -> Vec<Complex64> {
    let mut c = coeffs.to_vec();
    while c.last() == Some(&0.0) {
        c.pop();
    }
    let deg = c.len().saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let companion = DMatrix::from_fn(deg, deg, |i, j| {
        if i == 0 {
            -c[deg - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    companion.complex_eigenvalues().iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_roots() {
        // s² − 3s + 2
        let mut r: Vec<f64> = roots(&[2.0, -3.0, 1.0]).iter().map(|z| z.re).collect();
        r.sort_by(f64::total_cmp);
        assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn complex_pair() {
        // s² + 1
        let r = roots(&[1.0, 0.0, 1.0]);
        assert_eq!(r.len(), 2);
        for z in r {
            assert!(z.re.abs() < 1e-12 && (z.im.abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn faddeev_leverrier_small() {
        let a = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 0.5, -3.0]);
        let (c, mats) = charpoly_adjugate(&a);
        // det(sI − A) = s² + 5s + 5.5
        assert!((c[0] - 5.5).abs() < 1e-12 && (c[1] - 5.0).abs() < 1e-12 && c[2] == 1.0);
        // adj(sI − A) at s = 1 times (I − A) is det·I
        let s = 2.0;
        let adj = &mats[0] * s + &mats[1];
        let prod = &adj * (DMatrix::identity(2, 2) * s - &a);
        let det = c[0] + c[1] * s + c[2] * s * s;
        assert!((prod - DMatrix::identity(2, 2) * det).norm() < 1e-12);
        assert_eq!(mul(&[1.0, 1.0], &[1.0, -1.0]), vec![1.0, 0.0, -1.0]);
        assert_eq!(sub(&[1.0], &[0.0, 2.0]), vec![1.0, -2.0]);
    }
}

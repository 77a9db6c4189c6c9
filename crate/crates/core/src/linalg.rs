//! Small dense solves for the `r × r` normal equations of the ALS block update.

use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// How a normal-equations system was finally solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMethod {
    Cholesky,
    /// Cholesky after adding this multiple of the identity.
    Shifted(f64),
    PseudoInverse,
}

/// Lower Cholesky factor of a symmetric matrix, or `None` if a pivot is not positive.
pub fn cholesky<T: Scalar>(a: &Matrix<T>, shift: T) -> Option<Matrix<T>> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j) + shift;
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` in place.
fn cholesky_solve_in_place<T: Scalar>(l: &Matrix<T>, b: &mut [T]) {
    let n = l.rows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * b[k];
        }
        b[i] = s / l.get(i, i);
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l.get(k, i) * b[k];
        }
        b[i] = s / l.get(i, i);
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns `(eigenvalues, eigenvectors as columns)`.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.get(i, j) * m.get(i, j))
            .sum();
        let scale: T = (0..n).map(|i| m.get(i, i) * m.get(i, i)).sum();
        if off <= T::epsilon() * T::epsilon() * scale || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == T::zero() {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    ((0..n).map(|i| m.get(i, i)).collect(), v)
}

/// Solves `X Γ = M` for `X` (`M` is `I × r`, `Γ` symmetric positive semidefinite `r × r`).
///
/// Plain Cholesky first; on failure a Tikhonov shift of `1e-12·tr(Γ)/r` is added and
/// escalated ×10 up to `1e-6·tr(Γ)/r`; the last resort is the eigen pseudo-inverse with
/// cutoff `1e-12·λ_max`. Never fails.
pub fn solve_gram_system<T: Scalar>(gamma: &Matrix<T>, rhs: &Matrix<T>) -> (Matrix<T>, SolveMethod) {
    let r = gamma.rows();
    debug_assert_eq!(gamma.cols(), r);
    debug_assert_eq!(rhs.cols(), r);

    let attempt = |shift: T| -> Option<Matrix<T>> {
        let l = cholesky(gamma, shift)?;
        let mut out = rhs.transpose();
        for row in 0..rhs.rows() {
            cholesky_solve_in_place(&l, out.column_mut(row));
        }
        let out = out.transpose();
        out.values().iter().all(|v| v.is_finite()).then_some(out)
    };

    if let Some(x) = attempt(T::zero()) {
        return (x, SolveMethod::Cholesky);
    }
    let base = gamma.trace() / T::lit(r as f64);
    if base > T::zero() && base.is_finite() {
        let mut factor = 1e-12;
        while factor <= 1e-6 * (1.0 + 1e-9) {
            if let Some(x) = attempt(base * T::lit(factor)) {
                return (x, SolveMethod::Shifted(factor * base.to_f64_lossy()));
            }
            factor *= 10.0;
        }
    }

    let (vals, vecs) = symmetric_eigen(gamma);
    let lmax = vals.iter().fold(T::zero(), |a, &b| a.max(b));
    let cutoff = T::lit(1e-12) * lmax;
    let mut pinv = Matrix::zeros(r, r);
    for (k, &lam) in vals.iter().enumerate() {
        if lam > cutoff && lam > T::zero() {
            let inv = T::one() / lam;
            for j in 0..r {
                for i in 0..r {
                    let v = pinv.get(i, j) + vecs.get(i, k) * vecs.get(j, k) * inv;
                    pinv.set(i, j, v);
                }
            }
        }
    }
    let x = rhs.matmul(&pinv).expect("pseudo-inverse dimensions agree");
    (x, SolveMethod::PseudoInverse)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd() -> Matrix<f64> {
        Matrix::new(3, 3, vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]).unwrap()
    }

    #[test]
    fn cholesky_path_solves_exactly() {
        let g = spd();
        let x_true = Matrix::from_fn(5, 3, |i, j| (i as f64) * 0.3 - (j as f64));
        let rhs = x_true.matmul(&g).unwrap();
        let (x, how) = solve_gram_system(&g, &rhs);
        assert_eq!(how, SolveMethod::Cholesky);
        for (a, b) in x.values().iter().zip(x_true.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_gram_falls_back_without_panicking() {
        // rank-1 Gram from two identical columns
        let a = Matrix::new(3, 2, vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]).unwrap();
        let g = crate::tensor::gram(&a);
        let rhs = Matrix::from_fn(4, 2, |i, _| i as f64);
        let (x, how) = solve_gram_system(&g, &rhs);
        assert_ne!(how, SolveMethod::Cholesky);
        assert!(x.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_gram_uses_pseudo_inverse() {
        let g = Matrix::<f64>::zeros(2, 2);
        let rhs = Matrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let (x, how) = solve_gram_system(&g, &rhs);
        assert_eq!(how, SolveMethod::PseudoInverse);
        assert!(x.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jacobi_reconstructs() {
        let g = spd();
        let (vals, vecs) = symmetric_eigen(&g);
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| vecs.get(i, k) * vals[k] * vecs.get(j, k)).sum();
                assert!((s - g.get(i, j)).abs() < 1e-12);
            }
        }
    }
}

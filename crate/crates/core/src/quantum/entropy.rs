use num_complex::Complex;

use super::eig::{eig_hermitian, Eigen};
use super::matrix::CMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalues at or below this count as outside the support.
pub const SUPPORT_CUTOFF: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Checks Hermiticity and that no eigenvalue falls below `-tol`.
pub fn check_psd<T: Real>(m: &CMatrix<T>, tol: f64, what: &str) -> Result<Eigen<T>> {
    if !m.is_square() {
        return Err(Error::dim(format!("{what} is not square")));
    }
    if m.hermitian_defect() > T::tol(HERMITIAN_TOL) * m.max_abs().max(T::one()) {
        return Err(Error::invalid(format!("{what} is not Hermitian")));
    }
    let e = eig_hermitian(m)?;
    if let Some(&low) = e.values.first() {
        if low < -T::tol(tol) {
            return Err(Error::invalid(format!("{what} has eigenvalue {low} below zero")));
        }
    }
    Ok(e)
}

/// Checks that `m` is a density matrix: PSD within `1e-10`, unit trace within `1e-10`.
pub fn check_density<T: Real>(m: &CMatrix<T>) -> Result<Eigen<T>> {
    let e = check_psd(m, PSD_TOL, "density matrix")?;
    let tr = m.trace().re;
    if (tr - T::one()).abs() > T::tol(TRACE_TOL) {
        return Err(Error::invalid(format!("density matrix has trace {tr}")));
    }
    Ok(e)
}

/// `tr[a (log2 a − log2 b)]` for PSD `a`, `b` from their eigendecompositions.
///
/// Not normalised: with unit traces it is the quantum relative entropy.
/// Returns `+∞` when the weight of `a` outside the support of `b` exceeds
/// the cutoff.
pub fn relative_entropy_eig<T: Real>(a: &Eigen<T>, b: &Eigen<T>) -> T {
    let cutoff = T::tol(SUPPORT_CUTOFF);
    let own: T = a.values.iter().map(|&p| crate::scalar::xlog2x(p.max(T::zero()))).sum();
    let n = a.values.len();
    let mut cross = T::zero();
    let mut outside = T::zero();
    for (j, &q) in b.values.iter().enumerate() {
        // ⟨j|a|j⟩ = Σ_i p_i |⟨i|j⟩|²
        let mut w = T::zero();
        for (i, &p) in a.values.iter().enumerate() {
            if p <= T::zero() {
                continue;
            }
            let mut ov = Complex::new(T::zero(), T::zero());
            for k in 0..n {
                ov += a.vectors[(k, i)].conj() * b.vectors[(k, j)];
            }
            w += p * ov.norm_sqr();
        }
        if q <= cutoff {
            outside += w;
        } else {
            cross += w * q.log2();
        }
    }
    if outside > cutoff {
        return T::infinity();
    }
    own - cross
}

/// `tr[a (log2 a − log2 b)]` for PSD matrices of equal size.
pub fn relative_entropy_psd<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Result<T> {
    if a.rows() != b.rows() || !a.is_square() || !b.is_square() {
        return Err(Error::dim(format!("relative entropy of {}x{} against {}x{}", a.rows(), a.cols(), b.rows(), b.cols())));
    }
    Ok(relative_entropy_eig(&eig_hermitian(a)?, &eig_hermitian(b)?))
}

/// `S_Q(ρ‖σ) = tr[ρ(log2 ρ − log2 σ)]` in bits.
pub fn quantum_relative_entropy<T: Real>(rho: &CMatrix<T>, sigma: &CMatrix<T>) -> Result<T> {
    if rho.rows() != sigma.rows() {
        return Err(Error::dim(format!("states of dimension {} and {}", rho.rows(), sigma.rows())));
    }
    let a = check_density(rho)?;
    let b = check_density(sigma)?;
    Ok(relative_entropy_eig(&a, &b).max(T::zero()))
}

/// Fréchet derivative of the natural logarithm at `σ` (given by its
/// eigendecomposition) in direction `x`:
/// `Σ_{jk} ⟨j|x|k⟩ f[q_j, q_k] |j⟩⟨k|` with divided differences `f` of `ln`.
pub fn log_derivative<T: Real>(sigma: &Eigen<T>, x: &CMatrix<T>) -> CMatrix<T> {
    let v = &sigma.vectors;
    let xe = &(&v.adjoint() * x) * v;
    let q = &sigma.values;
    let floor = T::tol(SUPPORT_CUTOFF);
    let dd = CMatrix::from_fn(q.len(), q.len(), |j, k| {
        let (a, b) = (q[j].max(floor), q[k].max(floor));
        let f = if (a - b).abs() <= T::tol(1e-12) * a.max(b) {
            T::lit(2.0) / (a + b)
        } else {
            (a.ln() - b.ln()) / (a - b)
        };
        xe[(j, k)] * f
    });
    &(v * &dd) * &v.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_against_mixed_is_one_bit() {
        let rho = CMatrix::<f64>::diag(&[1.0, 0.0]);
        let mixed = CMatrix::<f64>::diag(&[0.5, 0.5]);
        assert!((quantum_relative_entropy(&rho, &mixed).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(quantum_relative_entropy(&rho, &rho).unwrap(), 0.0);
        let orth = CMatrix::<f64>::diag(&[0.0, 1.0]);
        assert!(quantum_relative_entropy(&rho, &orth).unwrap().is_infinite());
    }

    #[test]
    fn log_derivative_matches_finite_difference() {
        let s = CMatrix::<f64>::from_fn(3, 3, |i, j| {
            if i == j {
                Complex::new([0.5, 0.3, 0.2][i], 0.0)
            } else {
                Complex::new(0.05, 0.02 * (i as f64 - j as f64))
            }
        });
        let x = CMatrix::<f64>::from_fn(3, 3, |i, j| Complex::new((i + j) as f64 * 0.1, 0.07 * (i as f64 - j as f64)));
        let e = eig_hermitian(&s).unwrap();
        let d = log_derivative(&e, &x);
        let h = 1e-6;
        let logm = |m: &CMatrix<f64>| eig_hermitian(m).unwrap().apply(f64::ln);
        let plus = logm(&(&s + &x.scale(h)));
        let minus = logm(&(&s - &x.scale(h)));
        let fd = (&plus - &minus).scale(0.5 / h);
        assert!(d.max_abs_diff(&fd) < 1e-6, "{}", d.max_abs_diff(&fd));
    }
}

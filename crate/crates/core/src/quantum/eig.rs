//! Hermitian eigendecomposition by cyclic Jacobi on the real embedding
//! `[[A, -B], [B, A]]` of `H = A + iB`.

use num_complex::Complex;

use super::matrix::{CMatrix, C};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 100;
const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues in ascending order with the matching unit eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Eigen<T> {
    pub values: Vec<T>,
    pub vectors: CMatrix<T>,
}

impl<T: Real> Eigen<T> {
    /// `Σ_k f(λ_k) |v_k⟩⟨v_k|`.
    pub fn apply(&self, f: impl Fn(T) -> T) -> CMatrix<T> {
        let n = self.values.len();
        let fv: Vec<T> = self.values.iter().map(|&l| f(l)).collect();
        CMatrix::from_fn(n, n, |i, j| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (k, &w) in fv.iter().enumerate() {
                acc += self.vectors[(i, k)] * self.vectors[(j, k)].conj() * w;
            }
            acc
        })
    }

    pub fn reconstruct(&self) -> CMatrix<T> {
        self.apply(|l| l)
    }
}

/// Cyclic Jacobi on a real symmetric matrix stored row-major; returns the
/// diagonal and accumulates rotations into `v` (columns are eigenvectors).
fn jacobi_symmetric<T: Real>(a: &mut [T], n: usize) -> Result<(Vec<T>, Vec<T>)> {
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let scale = a.iter().map(|x| *x * *x).sum::<T>().sqrt().max(T::min_positive_value());
    let stop = T::epsilon() * T::epsilon() * scale * scale * T::from_usize_lossy(n);
    for _ in 0..MAX_SWEEPS {
        let off: T = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j] * a[i * n + j]).sum();
        if off <= stop {
            let diag = (0..n).map(|i| a[i * n + i]).collect();
            return Ok((diag, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::Numeric(format!("Jacobi did not converge in {MAX_SWEEPS} sweeps")))
}

fn norm<T: Real>(v: &[C<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// Eigendecomposition of a Hermitian matrix.
pub fn eig_hermitian<T: Real>(h: &CMatrix<T>) -> Result<Eigen<T>> {
    if !h.is_square() {
        return Err(Error::dim(format!("eigendecomposition of a {}x{} matrix", h.rows(), h.cols())));
    }
    let n = h.dim();
    let defect = h.hermitian_defect();
    if !(defect <= T::tol(HERMITIAN_TOL) * h.max_abs().max(T::one())) {
        return Err(Error::invalid(format!("matrix is not Hermitian (defect {:e})", defect.to_f64_lossy())));
    }
    if n == 0 {
        return Ok(Eigen { values: vec![], vectors: CMatrix::zeros(0, 0) });
    }
    let h = h.hermitian_part();
    let m = 2 * n;
    let mut emb = vec![T::zero(); m * m];
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            emb[i * m + j] = z.re;
            emb[(i + n) * m + j + n] = z.re;
            emb[i * m + j + n] = -z.im;
            emb[(i + n) * m + j] = z.im;
        }
    }
    let (diag, v) = jacobi_symmetric(&mut emb, m)?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| diag[a].partial_cmp(&diag[b]).expect("finite eigenvalues"));

    // Each eigenvalue of H appears twice in the embedding; a cluster of 2k
    // real eigenvectors spans a k-dimensional complex eigenspace.
    let width = T::tol(1e-10) * h.max_abs().max(T::one());
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &k in &order {
        match clusters.last_mut() {
            Some(c) if diag[k] - diag[*c.last().expect("nonempty")] <= width => c.push(k),
            _ => clusters.push(vec![k]),
        }
    }

    let mut basis: Vec<Vec<C<T>>> = Vec::with_capacity(n);
    for cluster in &clusters {
        let mut candidates: Vec<Vec<C<T>>> = cluster
            .iter()
            .map(|&k| (0..n).map(|i| Complex::new(v[i * m + k], v[(i + n) * m + k])).collect())
            .collect();
        let want = (cluster.len() + 1) / 2;
        for _ in 0..want.min(n - basis.len()) {
            // project the remaining candidates against everything chosen so far
            for cand in candidates.iter_mut() {
                for b in &basis {
                    let overlap: C<T> = b.iter().zip(cand.iter()).map(|(x, y)| x.conj() * y).fold(Complex::new(T::zero(), T::zero()), |a, z| a + z);
                    for (c, &bi) in cand.iter_mut().zip(b) {
                        *c -= bi * overlap;
                    }
                }
            }
            let (best, _) = candidates
                .iter()
                .enumerate()
                .map(|(i, c)| (i, norm(c)))
                .fold((0, T::neg_infinity()), |acc, (i, r)| if r > acc.1 { (i, r) } else { acc });
            let chosen = candidates.swap_remove(best);
            let r = norm(&chosen);
            if r <= T::tol(1e-6) {
                return Err(Error::Numeric("eigenvector extraction lost rank".into()));
            }
            basis.push(chosen.into_iter().map(|z| z / r).collect());
        }
    }
    if basis.len() != n {
        return Err(Error::Numeric(format!("recovered {} of {n} eigenvectors", basis.len())));
    }
    let mut pairs: Vec<(T, Vec<C<T>>)> = basis
        .into_iter()
        .map(|b| {
            let hb: Vec<C<T>> = (0..n)
                .map(|i| (0..n).fold(Complex::new(T::zero(), T::zero()), |acc, j| acc + h[(i, j)] * b[j]))
                .collect();
            let rq = b.iter().zip(&hb).map(|(x, y)| (x.conj() * y).re).sum::<T>();
            (rq, b)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite eigenvalues"));
    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = CMatrix::from_fn(n, n, |i, k| pairs[k].1[i]);
    Ok(Eigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn residuals(h: &CMatrix<f64>, e: &Eigen<f64>) -> (f64, f64) {
        let n = h.dim();
        let rec = e.reconstruct().max_abs_diff(h);
        let u = &e.vectors.adjoint() * &e.vectors;
        (rec, u.max_abs_diff(&CMatrix::identity(n)))
    }

    #[test]
    fn pauli_z_and_identity() {
        let z = CMatrix::<f64>::diag(&[1.0, -1.0]);
        let e = eig_hermitian(&z).unwrap();
        assert_eq!(e.values, vec![-1.0, 1.0]);
        let id = CMatrix::<f64>::identity(5);
        let e = eig_hermitian(&id).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-14));
        let (rec, unit) = residuals(&id, &e);
        assert!(rec < 1e-12 && unit < 1e-12);
    }

    #[test]
    fn random_hermitian_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 3, 4, 8, 16] {
            let g = CMatrix::<f64>::ginibre(&mut rng, n, n);
            let h = (&g + &g.adjoint()).scale(0.5);
            let e = eig_hermitian(&h).unwrap();
            let (rec, unit) = residuals(&h, &e);
            assert!(rec <= 1e-9 * n as f64, "n={n} rec={rec}");
            assert!(unit <= 1e-9, "n={n} unit={unit}");
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn degenerate_spectrum_keeps_orthonormal_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = CMatrix::<f64>::ginibre(&mut rng, 6, 6);
        // unitary from the eigenvectors of a generic Hermitian matrix
        let u = eig_hermitian(&(&g + &g.adjoint())).unwrap().vectors;
        let d = CMatrix::diag(&[0.0, 0.0, 0.0, 0.5, 0.5, 1.0]);
        let h = &(&u * &d) * &u.adjoint();
        let e = eig_hermitian(&h.hermitian_part()).unwrap();
        let (rec, unit) = residuals(&h, &e);
        assert!(rec < 1e-10 && unit < 1e-10, "rec={rec} unit={unit}");
    }
}

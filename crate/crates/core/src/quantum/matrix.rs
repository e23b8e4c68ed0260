use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type C<T> = Complex<T>;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![C::new(T::zero(), T::zero()); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        Ok(CMatrix { rows, cols, data })
    }

    /// Real diagonal matrix.
    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C::new(v, T::zero());
        }
        m
    }

    /// `|v⟩⟨w|`.
    pub fn outer(v: &[C<T>], w: &[C<T>]) -> Self {
        Self::from_fn(v.len(), w.len(), |i, j| v[i] * w[j].conj())
    }

    /// `|i⟩⟨i|` in dimension `n`.
    pub fn basis_projector(n: usize, i: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(i, i)] = C::new(T::one(), T::zero());
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Side length of a square matrix.
    pub fn dim(&self) -> usize {
        self.rows
    }

    pub fn data(&self) -> &[C<T>] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: T) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn scale_c(&self, s: C<T>) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    /// `self += s·other`.
    pub fn add_scaled(&mut self, s: T, other: &Self) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn trace(&self) -> C<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).fold(C::new(T::zero(), T::zero()), |a, b| a + b)
    }

    /// `tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C<T> {
        let mut acc = C::new(T::zero(), T::zero());
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    /// `Re tr(self · other)`, the Hilbert–Schmidt pairing for Hermitian arguments.
    pub fn inner_re(&self, other: &Self) -> T {
        self.trace_product(other).re
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (a, b)| m.max((*a - *b).norm()))
    }

    pub fn hermitian_defect(&self) -> T {
        if !self.is_square() {
            return T::infinity();
        }
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(M + M†)/2`.
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * half)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (r, c) = (other.rows, other.cols);
        Self::from_fn(self.rows * r, self.cols * c, |i, j| self[(i / r, j / c)] * other[(i % r, j % c)])
    }

    /// Partial trace of a square matrix on subsystems of sizes `dims`,
    /// keeping the subsystems listed in `keep` (in increasing order).
    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<Self> {
        let total: usize = dims.iter().product();
        if !self.is_square() || total != self.rows {
            return Err(Error::dim(format!("subsystem dims {dims:?} do not match a {}x{} matrix", self.rows, self.cols)));
        }
        if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= dims.len()) {
            return Err(Error::dim(format!("keep list {keep:?} is not an increasing list of subsystems")));
        }
        let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
        let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
        let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
        let nk: usize = kept_dims.iter().product();
        let nt: usize = traced_dims.iter().product();
        let compose = |kept: usize, tr: usize| -> usize {
            let mut digits = vec![0usize; dims.len()];
            let mut rem = kept;
            for (pos, &k) in keep.iter().enumerate().rev() {
                digits[k] = rem % kept_dims[pos];
                rem /= kept_dims[pos];
            }
            let mut rem = tr;
            for (pos, &k) in traced.iter().enumerate().rev() {
                digits[k] = rem % traced_dims[pos];
                rem /= traced_dims[pos];
            }
            digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
        };
        let mut out = Self::zeros(nk, nk);
        for i in 0..nk {
            for j in 0..nk {
                let mut acc = C::new(T::zero(), T::zero());
                for t in 0..nt {
                    acc += self[(compose(i, t), compose(j, t))];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(out)
    }

    /// Matrix with i.i.d. standard complex Gaussian entries.
    pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Self {
        let half = T::lit(std::f64::consts::FRAC_1_SQRT_2);
        Self::from_fn(rows, cols, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C::new(T::lit(re) * half, T::lit(im) * half)
        })
    }

    pub fn to_json(&self) -> Value {
        let part = |f: fn(&C<T>) -> T| -> Value {
            Value::Array(
                (0..self.rows)
                    .map(|i| Value::Array((0..self.cols).map(|j| json!(f(&self[(i, j)]).to_f64_lossy())).collect()))
                    .collect(),
            )
        };
        let mut v = json!({ "re": part(|z| z.re), "im": part(|z| z.im) });
        if self.is_square() {
            v["dim"] = json!(self.rows);
        } else {
            v["rows"] = json!(self.rows);
            v["cols"] = json!(self.cols);
        }
        v
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let grid = |key: &str| -> Result<Vec<Vec<f64>>> {
            let rows = v.get(key).and_then(Value::as_array).ok_or_else(|| Error::Parse(format!("matrix is missing \"{key}\"")))?;
            rows.iter()
                .map(|r| {
                    r.as_array()
                        .ok_or_else(|| Error::Parse(format!("\"{key}\" rows must be arrays")))?
                        .iter()
                        .map(|x| x.as_f64().ok_or_else(|| Error::Parse(format!("non-numeric entry in \"{key}\""))))
                        .collect()
                })
                .collect()
        };
        let re = grid("re")?;
        let im = grid("im")?;
        let rows = re.len();
        let cols = re.first().map_or(0, Vec::len);
        if im.len() != rows || re.iter().chain(&im).any(|r| r.len() != cols) {
            return Err(Error::Parse("ragged or mismatched re/im grids".into()));
        }
        if let Some(d) = v.get("dim") {
            if d.as_u64() != Some(rows as u64) || rows != cols {
                return Err(Error::Parse(format!("declared dim {d} does not match a {rows}x{cols} grid")));
            }
        }
        Ok(Self::from_fn(rows, cols, |i, j| C::new(T::lit(re[i][j]), T::lit(im[i][j]))))
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = C<T>;
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Mul for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs[(k, j)];
                    out.data[i * rhs.cols + j] += a * b;
                }
            }
        }
        out
    }
}

impl<T: Real> Add for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn add(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix sum shape mismatch");
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect() }
    }
}

impl<T: Real> Sub for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn sub(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix difference shape mismatch");
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect() }
    }
}

impl<T: Real> Serialize for CMatrix<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for CMatrix<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        CMatrix::from_json(&v).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    #[test]
    fn partial_trace_of_product_recovers_factor() {
        let a = CMatrix::from_fn(2, 2, |i, j| c((i + 2 * j) as f64, i as f64 - j as f64));
        let b = CMatrix::from_fn(3, 3, |i, j| c(1.0 + (i * j) as f64, 0.5 * (i as f64 - j as f64)));
        let ab = a.kron(&b);
        let ta = ab.partial_trace(&[2, 3], &[0]).unwrap();
        assert!(ta.max_abs_diff(&a.scale_c(b.trace())) < 1e-12);
        let tb = ab.partial_trace(&[2, 3], &[1]).unwrap();
        assert!(tb.max_abs_diff(&b.scale_c(a.trace())) < 1e-12);
        assert_eq!(ab.partial_trace(&[2, 3], &[0, 1]).unwrap(), ab);
    }

    #[test]
    fn json_round_trip() {
        let m = CMatrix::from_fn(2, 2, |i, j| c(i as f64 * 0.25, j as f64 - 0.5));
        let v = m.to_json();
        assert_eq!(v["dim"], 2);
        assert_eq!(CMatrix::<f64>::from_json(&v).unwrap(), m);
        let bad = json!({ "dim": 3, "re": [[1.0]], "im": [[0.0]] });
        assert!(CMatrix::<f64>::from_json(&bad).is_err());
    }
}

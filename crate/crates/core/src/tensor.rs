//! Probability vectors, dense joint tables and the classical KL divergence.
//!
//! All divergences are in bits. `0·log(0/q) = 0`, and `p > 0` against `q = 0`
//! yields `+inf` rather than an error so optimizers can treat it as a barrier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub(crate) const SIMPLEX_TOL: f64 = 1e-12;
pub(crate) const RENORMALIZE_TOL: f64 = 1e-9;

/// Checks a weight list against the simplex and renormalizes small drift.
pub(crate) fn validate_simplex<T: Real>(weights: &mut [T], what: &str) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::invalid(format!("{what}: empty distribution")));
    }
    let neg_tol = T::tol(SIMPLEX_TOL);
    for w in weights.iter_mut() {
        if !w.is_finite() {
            return Err(Error::invalid(format!("{what}: non-finite weight")));
        }
        if *w < T::zero() {
            if *w < -neg_tol {
                return Err(Error::invalid(format!(
                    "{what}: negative weight {}",
                    w.to_f64_lossy()
                )));
            }
            *w = T::zero();
        }
    }
    let total: T = weights.iter().copied().sum();
    let drift = (total - T::one()).abs();
    if drift > T::tol(RENORMALIZE_TOL) {
        return Err(Error::invalid(format!(
            "{what}: total mass {} is not 1",
            total.to_f64_lossy()
        )));
    }
    if drift > T::tol(SIMPLEX_TOL) {
        for w in weights.iter_mut() {
            *w /= total;
        }
    }
    Ok(())
}

/// KL divergence of two raw, already validated distributions.
pub(crate) fn kl_raw<T: Real>(p: &[T], q: &[T]) -> T {
    let mut acc = T::zero();
    for (&pi, &qi) in p.iter().zip(q) {
        if pi <= T::zero() {
            continue;
        }
        if qi <= T::zero() {
            return T::infinity();
        }
        acc += pi * (pi / qi).log2();
    }
    // Rounding can push a zero divergence marginally negative.
    acc.max(T::zero())
}

/// A finite probability distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound = "T: Real")]
pub struct ProbVector<T> {
    weights: Vec<T>,
}

impl<T: Real> ProbVector<T> {
    pub fn new(mut weights: Vec<T>) -> Result<Self> {
        validate_simplex(&mut weights, "probability vector")?;
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over an empty alphabet");
        let w = T::one() / T::from_usize_lossy(n);
        Self {
            weights: vec![w; n],
        }
    }

    pub fn point(n: usize, at: usize) -> Self {
        let mut weights = vec![T::zero(); n];
        weights[at] = T::one();
        Self { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn into_inner(self) -> Vec<T> {
        self.weights
    }
}

impl<T: Real> TryFrom<Vec<T>> for ProbVector<T> {
    type Error = Error;

    fn try_from(v: Vec<T>) -> Result<Self> {
        Self::new(v)
    }
}

impl<T> From<ProbVector<T>> for Vec<T> {
    fn from(p: ProbVector<T>) -> Self {
        p.weights
    }
}

impl<T> std::ops::Index<usize> for ProbVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.weights[i]
    }
}

/// A dense joint distribution over a product of finite alphabets, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable<T> {
    shape: Vec<usize>,
    weights: Vec<T>,
}

impl<T: Real> JointTable<T> {
    pub fn new(shape: Vec<usize>, mut weights: Vec<T>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if shape.iter().any(|&n| n == 0) || len != weights.len() {
            return Err(Error::dim(format!(
                "joint table of shape {shape:?} given {} weights",
                weights.len()
            )));
        }
        validate_simplex(&mut weights, "joint table")?;
        Ok(Self { shape, weights })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn flatten(&self) -> ProbVector<T> {
        ProbVector {
            weights: self.weights.clone(),
        }
    }

    /// Marginal on the first factor of a two-factor table.
    pub fn first_marginal(&self) -> Result<ProbVector<T>> {
        let (na, nb) = self.two_factors()?;
        let weights = (0..na)
            .map(|a| self.weights[a * nb..(a + 1) * nb].iter().copied().sum())
            .collect();
        Ok(ProbVector { weights })
    }

    /// `p(b|a)`; uniform when `p(a) = 0`.
    pub fn conditional(&self, a: usize) -> Result<ProbVector<T>> {
        let (_, nb) = self.two_factors()?;
        let row = &self.weights[a * nb..(a + 1) * nb];
        let pa: T = row.iter().copied().sum();
        if pa <= T::zero() {
            return Ok(ProbVector::uniform(nb));
        }
        Ok(ProbVector {
            weights: row.iter().map(|&w| w / pa).collect(),
        })
    }

    fn two_factors(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            &[na, nb] => Ok((na, nb)),
            other => Err(Error::dim(format!(
                "expected a two-factor table, got shape {other:?}"
            ))),
        }
    }
}

/// `S(p||q) = Σ p log2(p/q)` in bits.
pub fn kl_divergence<T: Real>(p: &ProbVector<T>, q: &ProbVector<T>) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::dim(format!(
            "distributions over {} and {} symbols",
            p.len(),
            q.len()
        )));
    }
    Ok(kl_raw(p.weights(), q.weights()))
}

/// Both terms of the chain rule `S(p(a,b)||q(a,b)) = S(p(a)||q(a)) + Σ_a p(a) S(p(b|a)||q(b|a))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRuleSplit<T> {
    pub marginal_kl: T,
    pub conditional_kl_avg: T,
}

impl<T: Real> ChainRuleSplit<T> {
    pub fn total(&self) -> T {
        self.marginal_kl + self.conditional_kl_avg
    }
}

pub fn chain_rule_split<T: Real>(p: &JointTable<T>, q: &JointTable<T>) -> Result<ChainRuleSplit<T>> {
    if p.shape() != q.shape() {
        return Err(Error::dim(format!(
            "joint tables of shapes {:?} and {:?}",
            p.shape(),
            q.shape()
        )));
    }
    let (na, _) = p.two_factors()?;
    let pa = p.first_marginal()?;
    let qa = q.first_marginal()?;
    let marginal_kl = kl_raw(pa.weights(), qa.weights());
    let mut conditional_kl_avg = T::zero();
    for a in 0..na {
        if pa[a] <= T::zero() {
            continue;
        }
        let term = kl_raw(p.conditional(a)?.weights(), q.conditional(a)?.weights());
        conditional_kl_avg += pa[a] * term;
    }
    Ok(ChainRuleSplit {
        marginal_kl,
        conditional_kl_avg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(w: &[f64]) -> ProbVector<f64> {
        ProbVector::new(w.to_vec()).unwrap()
    }

    #[test]
    fn identical_distributions_have_zero_divergence() {
        assert_eq!(kl_divergence(&pv(&[0.5, 0.5]), &pv(&[0.5, 0.5])).unwrap(), 0.0);
    }

    #[test]
    fn point_mass_against_fair_coin_is_one_bit() {
        let d = kl_divergence(&pv(&[1.0, 0.0]), &pv(&[0.5, 0.5])).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn absolute_continuity_violation_is_infinite() {
        let d = kl_divergence(&pv(&[0.5, 0.5]), &pv(&[1.0, 0.0])).unwrap();
        assert!(d.is_infinite() && d > 0.0);
    }

    #[test]
    fn divergence_is_asymmetric() {
        let p = pv(&[0.9, 0.1]);
        let q = pv(&[0.5, 0.5]);
        let pq = kl_divergence(&p, &q).unwrap();
        let qp = kl_divergence(&q, &p).unwrap();
        // 0.9 log2 1.8 + 0.1 log2 0.2 and 0.5 log2(5/9) + 0.5 log2 5
        let pq_direct = 0.9 * 1.8f64.log2() + 0.1 * 0.2f64.log2();
        let qp_direct = 0.5 * (0.5f64 / 0.9).log2() + 0.5 * (0.5f64 / 0.1).log2();
        assert!((pq - pq_direct).abs() < 1e-15);
        assert!((qp - qp_direct).abs() < 1e-15);
        assert!((pq - qp).abs() > 0.1);
    }

    #[test]
    fn length_mismatch_is_a_dimension_error() {
        let err = kl_divergence(&pv(&[1.0]), &pv(&[0.5, 0.5])).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn simplex_validation() {
        assert!(ProbVector::new(vec![0.6, 0.6]).is_err());
        assert!(ProbVector::new(vec![-0.1, 1.1]).is_err());
        // drift below 1e-9 is absorbed
        let p = ProbVector::new(vec![0.5 + 1e-10, 0.5]).unwrap();
        let s: f64 = p.weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chain_rule_identical_joints() {
        let p = JointTable::new(vec![2, 3], vec![0.1, 0.2, 0.1, 0.3, 0.2, 0.1]).unwrap();
        let split = chain_rule_split(&p, &p).unwrap();
        assert_eq!(split.marginal_kl, 0.0);
        assert_eq!(split.conditional_kl_avg, 0.0);
    }

    #[test]
    fn chain_rule_on_product_tables() {
        let (pa, pb) = ([0.3, 0.7], [0.2, 0.5, 0.3]);
        let (qa, qb) = ([0.6, 0.4], [0.1, 0.1, 0.8]);
        let outer = |a: &[f64], b: &[f64]| {
            a.iter()
                .flat_map(|&x| b.iter().map(move |&y| x * y))
                .collect::<Vec<_>>()
        };
        let p = JointTable::new(vec![2, 3], outer(&pa, &pb)).unwrap();
        let q = JointTable::new(vec![2, 3], outer(&qa, &qb)).unwrap();
        let split = chain_rule_split(&p, &q).unwrap();
        let s_a = kl_divergence(&pv(&pa), &pv(&qa)).unwrap();
        let s_b = kl_divergence(&pv(&pb), &pv(&qb)).unwrap();
        assert!((split.marginal_kl - s_a).abs() < 1e-14);
        assert!((split.conditional_kl_avg - s_b).abs() < 1e-14);
    }

    #[test]
    fn chain_rule_needs_two_factors() {
        let p = JointTable::new(vec![2, 2, 1], vec![0.25; 4]).unwrap();
        assert!(matches!(chain_rule_split(&p, &p), Err(Error::Dimension(_))));
    }

    #[test]
    fn single_precision_divergence() {
        let p = ProbVector::<f32>::new(vec![1.0, 0.0]).unwrap();
        let q = ProbVector::<f32>::uniform(2);
        assert!((kl_divergence(&p, &q).unwrap() - 1.0).abs() < 1e-6);
    }
}

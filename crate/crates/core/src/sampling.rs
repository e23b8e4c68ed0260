//! Seeded instance generators used by the verifiers and tests.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::behaviors::{product, Behavior};
use crate::polytopes::{ns_vertices_222, VertexCatalogue};
use crate::scalar::Real;

/// Dirichlet(α, …, α) sample of length `n`.
pub fn dirichlet<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize, alpha: f64) -> Vec<T> {
    let gamma = Gamma::new(alpha, 1.0).expect("positive concentration");
    let raw: Vec<f64> = (0..n).map(|_| gamma.sample(rng).max(f64::MIN_POSITIVE)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|&x| T::lit(x / total)).collect()
}

/// `rows` independent Dirichlet(1) distributions over `cols` outcomes, row-major.
pub fn stochastic_rows<T: Real, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Vec<T> {
    (0..rows).flat_map(|_| dirichlet::<T, R>(rng, cols, 1.0)).collect()
}

/// Random mixture of `k` distinct catalogue vertices with Dirichlet(1) weights.
pub fn random_mixture<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    catalogue: &VertexCatalogue<T>,
    k: usize,
) -> (Behavior<T>, Vec<T>) {
    let n = catalogue.len();
    let picks = rand::seq::index::sample(rng, n, k.min(n));
    let w = dirichlet::<T, R>(rng, picks.len(), 1.0);
    let mut weights = vec![T::zero(); n];
    for (i, &wi) in picks.iter().zip(&w) {
        weights[i] = wi;
    }
    let b = catalogue.combine(&weights).expect("weights are a distribution");
    (b, weights)
}

/// Random non-signalling (2,2,2) box: a Dirichlet mixture of all 24 vertices.
pub fn random_ns_222<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Behavior<T> {
    let cat = ns_vertices_222::<T>();
    let w = dirichlet::<T, R>(rng, cat.len(), 0.5);
    cat.combine(&w).expect("weights are a distribution")
}

/// Random box on the `A0A1|B0B1` (2,2,2) scenario that is non-signalling
/// across every site: a mixture of pair products of random NS boxes and
/// random LR_ns vertices.
pub fn random_ns_broadcast<T: Real, R: Rng + ?Sized>(rng: &mut R, lrns: &VertexCatalogue<T>) -> Behavior<T> {
    let n_products = 1 + rng.random_range(0..3);
    let n_vertices = rng.random_range(0..4);
    let mut parts: Vec<Behavior<T>> = (0..n_products)
        .map(|_| product(&random_ns_222(rng), &random_ns_222(rng)))
        .collect();
    for _ in 0..n_vertices {
        parts.push(lrns.vertices()[rng.random_range(0..lrns.len())].clone());
    }
    let w = dirichlet::<T, R>(rng, parts.len(), 1.0);
    let items: Vec<(T, &Behavior<T>)> = w.iter().copied().zip(&parts).collect();
    Behavior::convex_combination(&items).expect("weights are a distribution")
}

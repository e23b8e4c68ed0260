//! Vertex catalogues and LP membership for the local set, the (2,2,2)
//! non-signalling polytope, and the LR_ns set of wing products.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behaviors::{deterministic, ns_vertex_222, wing_product, Behavior, Scenario};
use crate::error::{Error, Result};
use crate::index::multi_indices;
use crate::lp::{feasibility, Phase1};
use crate::scalar::{max_abs_diff, Real};

/// Default cap on the number of catalogue vertices.
pub const DEFAULT_VERTEX_CAP: usize = 1_000_000;
/// Largest accepted reconstruction residual for an inside verdict.
pub const RECONSTRUCTION_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CatalogueKind {
    LocalDeterministic,
    Ns222,
    LrnsProduct,
}

#[derive(Debug, Clone)]
pub struct VertexCatalogue<T> {
    scenario: Scenario,
    vertices: Vec<Behavior<T>>,
    kind: CatalogueKind,
}

impl<T: Real> VertexCatalogue<T> {
    pub fn new(scenario: Scenario, vertices: Vec<Behavior<T>>, kind: CatalogueKind) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::invalid("empty vertex catalogue"));
        }
        if let Some(v) = vertices.iter().find(|v| v.scenario() != &scenario) {
            return Err(Error::dim(format!(
                "vertex over {:?} in a catalogue over {scenario:?}",
                v.scenario()
            )));
        }
        Ok(Self {
            scenario,
            vertices,
            kind,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn vertices(&self) -> &[Behavior<T>] {
        &self.vertices
    }

    pub fn kind(&self) -> CatalogueKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// `Σ_v w_v V_v`.
    pub fn combine(&self, weights: &[T]) -> Result<Behavior<T>> {
        if weights.len() != self.len() {
            return Err(Error::dim(format!(
                "{} weights for {} vertices",
                weights.len(),
                self.len()
            )));
        }
        let items: Vec<(T, &Behavior<T>)> = weights.iter().copied().zip(&self.vertices).collect();
        Behavior::convex_combination(&items)
    }

    /// JSON array of the vertices, each in the behavior schema.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.vertices)?)
    }
}

/// Every deterministic strategy of one wing: a table from joint wing input
/// to joint wing output, spelled out per storage position.
fn wing_strategies(scenario: &Scenario, wing: usize) -> Vec<Vec<Vec<usize>>> {
    let positions: Vec<usize> = if wing == 0 {
        (0..scenario.alice_len()).collect()
    } else {
        (scenario.alice_len()..scenario.num_sites()).collect()
    };
    let in_dims: Vec<usize> = positions.iter().map(|&p| scenario.input_dims()[p]).collect();
    let out_dims: Vec<usize> = positions.iter().map(|&p| scenario.output_dims()[p]).collect();
    let inputs: Vec<Vec<usize>> = multi_indices(&in_dims).collect();
    let outputs: Vec<Vec<usize>> = multi_indices(&out_dims).collect();
    // one joint output per joint input
    multi_indices(&vec![outputs.len(); inputs.len()])
        .map(|choice| choice.iter().map(|&o| outputs[o].clone()).collect())
        .collect()
}

fn checked_count(counts: &[u128], cap: usize) -> Result<usize> {
    let size = counts.iter().try_fold(1u128, |acc, &c| acc.checked_mul(c)).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::Capacity { size, cap });
    }
    Ok(size as usize)
}

fn pow_u128(base: usize, exp: usize) -> u128 {
    (0..exp).try_fold(1u128, |acc, _| acc.checked_mul(base as u128)).unwrap_or(u128::MAX)
}

/// Local deterministic vertices across the wing bipartition, with the default cap.
pub fn local_deterministic_vertices<T: Real>(scenario: &Scenario) -> Result<VertexCatalogue<T>> {
    local_deterministic_vertices_capped(scenario, DEFAULT_VERTEX_CAP)
}

/// Products of deterministic wing strategies. A wing strategy assigns a
/// joint wing output to every joint wing input, so the count is
/// `Π_wings o_w^(m_w)` over the wings' joint alphabets.
pub fn local_deterministic_vertices_capped<T: Real>(
    scenario: &Scenario,
    cap: usize,
) -> Result<VertexCatalogue<T>> {
    let [(ma, oa), (mb, ob)] = scenario.wing_alphabets();
    checked_count(&[pow_u128(oa, ma), pow_u128(ob, mb)], cap)?;
    let alice = wing_strategies(scenario, 0);
    let bob = wing_strategies(scenario, 1);
    let na = scenario.alice_len();
    let in_dims = scenario.input_dims();
    let mut vertices = Vec::with_capacity(alice.len() * bob.len());
    for sa in &alice {
        for sb in &bob {
            let v = Behavior::from_fn(scenario.clone(), |x, a| {
                let ka = crate::index::ravel(&x[..na], &in_dims[..na]);
                let kb = crate::index::ravel(&x[na..], &in_dims[na..]);
                if sa[ka][..] == a[..na] && sb[kb][..] == a[na..] {
                    T::one()
                } else {
                    T::zero()
                }
            })?;
            vertices.push(v);
        }
    }
    VertexCatalogue::new(scenario.clone(), vertices, CatalogueKind::LocalDeterministic)
}

/// Products of deterministic single-site responses (local across every site).
pub fn fully_local_vertices<T: Real>(scenario: &Scenario, cap: usize) -> Result<VertexCatalogue<T>> {
    let in_dims = scenario.input_dims();
    let out_dims = scenario.output_dims();
    let counts: Vec<u128> = in_dims.iter().zip(&out_dims).map(|(&m, &o)| pow_u128(o, m)).collect();
    checked_count(&counts, cap)?;
    let per_site: Vec<Vec<Vec<usize>>> = in_dims
        .iter()
        .zip(&out_dims)
        .map(|(&m, &o)| multi_indices(&vec![o; m]).collect())
        .collect();
    let dims: Vec<usize> = per_site.iter().map(Vec::len).collect();
    let vertices = multi_indices(&dims)
        .map(|choice| {
            let responses: Vec<Vec<usize>> =
                choice.iter().enumerate().map(|(p, &c)| per_site[p][c].clone()).collect();
            deterministic(scenario.clone(), &responses)
        })
        .collect::<Result<Vec<_>>>()?;
    VertexCatalogue::new(scenario.clone(), vertices, CatalogueKind::LocalDeterministic)
}

/// The 24 extreme points of the (2,2,2) non-signalling polytope: 16 local
/// deterministic boxes followed by the 8 nonlocal boxes indexed by
/// `(α, β, γ)` in binary order.
pub fn ns_vertices_222<T: Real>() -> VertexCatalogue<T> {
    let scenario = Scenario::chsh();
    let mut vertices = local_deterministic_vertices::<T>(&scenario)
        .expect("16 vertices")
        .vertices;
    for alpha in 0..2 {
        for beta in 0..2 {
            for gamma in 0..2 {
                vertices.push(ns_vertex_222(alpha, beta, gamma));
            }
        }
    }
    VertexCatalogue::new(scenario, vertices, CatalogueKind::Ns222).expect("valid catalogue")
}

/// All wing products `Q_A ⊗ Q_B` of two wing catalogues.
pub fn lrns_vertices<T: Real>(
    wing_a: &VertexCatalogue<T>,
    wing_b: &VertexCatalogue<T>,
) -> Result<VertexCatalogue<T>> {
    lrns_vertices_capped(wing_a, wing_b, DEFAULT_VERTEX_CAP)
}

pub fn lrns_vertices_capped<T: Real>(
    wing_a: &VertexCatalogue<T>,
    wing_b: &VertexCatalogue<T>,
    cap: usize,
) -> Result<VertexCatalogue<T>> {
    checked_count(&[wing_a.len() as u128, wing_b.len() as u128], cap)?;
    let vertices: Vec<Behavior<T>> = wing_a
        .vertices
        .iter()
        .flat_map(|qa| wing_b.vertices.iter().map(move |qb| wing_product(qa, qb)))
        .collect();
    let scenario = vertices[0].scenario().clone();
    VertexCatalogue::new(scenario, vertices, CatalogueKind::LrnsProduct)
}

/// The LR_ns catalogue of the `A0A1 | B0B1` broadcast scenario over (2,2,2) pairs.
pub fn lrns_vertices_broadcast_222<T: Real>() -> VertexCatalogue<T> {
    let ns = ns_vertices_222::<T>();
    lrns_vertices(&ns, &ns).expect("576 vertices")
}

/// Linear functional `f` with threshold `β`: `f·V ≤ β` for every vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Separation<T> {
    pub functional: Vec<T>,
    pub threshold: T,
    pub query_value: T,
}

impl<T: Real> Separation<T> {
    pub fn evaluate(&self, b: &Behavior<T>) -> T {
        self.functional.iter().zip(b.table()).map(|(&f, &p)| f * p).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipResult<T> {
    pub inside: bool,
    /// Convex weights over the catalogue, when inside.
    pub weights: Option<Vec<T>>,
    /// Separating functional, when outside.
    pub separation: Option<Separation<T>>,
    /// Outside: `f·q − β` (positive). Inside: minus the reconstruction residual.
    pub margin: T,
}

/// Decides whether `b` is a convex combination of the catalogue vertices.
pub fn membership<T: Real>(b: &Behavior<T>, catalogue: &VertexCatalogue<T>, tol: T) -> Result<MembershipResult<T>> {
    if b.scenario() != catalogue.scenario() {
        return Err(Error::dim(format!(
            "query over {:?}, catalogue over {:?}",
            b.scenario(),
            catalogue.scenario()
        )));
    }
    let n_out = b.num_outcomes();
    let mut query = b.table().to_vec();
    for row in query.chunks_mut(n_out) {
        let s: T = row.iter().copied().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }

    let columns: Vec<Vec<T>> = catalogue
        .vertices
        .iter()
        .map(|v| {
            let mut c = v.table().to_vec();
            c.push(T::one());
            c
        })
        .collect();
    let mut rhs = query.clone();
    rhs.push(T::one());

    match feasibility(&columns, &rhs)? {
        Phase1::Feasible { x } => {
            let total: T = x.iter().copied().sum();
            let weights: Vec<T> = x.iter().map(|&w| w / total).collect();
            let mut recon = vec![T::zero(); query.len()];
            for (&w, v) in weights.iter().zip(&catalogue.vertices) {
                if w > T::zero() {
                    for (r, &p) in recon.iter_mut().zip(v.table()) {
                        *r += w * p;
                    }
                }
            }
            let residual = max_abs_diff(&recon, &query);
            if residual > T::tol(RECONSTRUCTION_TOL) {
                return Err(Error::Solver {
                    message: "feasible basis does not reconstruct the query".into(),
                    residual: residual.to_f64_lossy(),
                });
            }
            Ok(MembershipResult {
                inside: true,
                weights: Some(weights),
                separation: None,
                margin: -residual,
            })
        }
        Phase1::Infeasible { farkas, infeasibility } => {
            let l = query.len();
            let mut f: Vec<T> = farkas[..l].to_vec();
            let scale = f.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            if scale <= T::zero() {
                return Err(Error::Solver {
                    message: "degenerate separating functional".into(),
                    residual: infeasibility.to_f64_lossy(),
                });
            }
            f.iter_mut().for_each(|v| *v /= scale);
            let dot = |t: &[T]| -> T { f.iter().zip(t).map(|(&a, &p)| a * p).sum() };
            let threshold = catalogue
                .vertices
                .iter()
                .map(|v| dot(v.table()))
                .fold(T::neg_infinity(), T::max);
            let query_value = dot(&query);
            let margin = query_value - threshold;
            if margin < tol / T::lit(2.0) {
                return Err(Error::Solver {
                    message: format!(
                        "separation margin {} below half the tolerance",
                        margin.to_f64_lossy()
                    ),
                    residual: infeasibility.to_f64_lossy(),
                });
            }
            Ok(MembershipResult {
                inside: false,
                weights: None,
                separation: Some(Separation {
                    functional: f,
                    threshold,
                    query_value,
                }),
                margin,
            })
        }
    }
}

/// Membership of many queries against one catalogue, in parallel.
pub fn membership_many<T: Real>(
    queries: &[Behavior<T>],
    catalogue: &VertexCatalogue<T>,
    tol: T,
) -> Vec<Result<MembershipResult<T>>> {
    queries.par_iter().map(|q| membership(q, catalogue, tol)).collect()
}

/// Bipartite locality of a box across its wings.
pub fn is_local<T: Real>(b: &Behavior<T>) -> Result<bool> {
    let cat = local_deterministic_vertices::<T>(b.scenario())?;
    Ok(membership(b, &cat, T::tol(1e-9))?.inside)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behaviors::pr_box;

    #[test]
    fn chsh_scenario_has_sixteen_local_vertices() {
        let cat = local_deterministic_vertices::<f64>(&Scenario::chsh()).unwrap();
        assert_eq!(cat.len(), 16);
        assert!(cat.vertices().iter().all(|v| v.table().iter().all(|&p| p == 0.0 || p == 1.0)));
    }

    #[test]
    fn trivial_scenario_has_four_vertices() {
        let cat = local_deterministic_vertices::<f64>(&Scenario::bipartite(1, 2, 1, 2)).unwrap();
        assert_eq!(cat.len(), 4);
    }

    #[test]
    fn capacity_is_enforced() {
        let err = local_deterministic_vertices_capped::<f64>(&Scenario::bipartite(8, 4, 8, 4), 1000);
        assert!(matches!(err, Err(Error::Capacity { .. })));
    }

    #[test]
    fn ns_catalogue_contents() {
        let cat = ns_vertices_222::<f64>();
        assert_eq!(cat.len(), 24);
        assert_eq!(cat.vertices()[16], pr_box());
        assert!(cat.vertices().iter().all(|v| v.is_nonsignalling(&[0]).holds));
    }

    #[test]
    fn lrns_catalogue_has_576_vertices() {
        let cat = lrns_vertices_broadcast_222::<f64>();
        assert_eq!(cat.len(), 576);
        assert!(cat.scenario().is_broadcast_shape());
    }

    #[test]
    fn pr_box_is_separated_from_the_local_set() {
        let cat = local_deterministic_vertices::<f64>(&Scenario::chsh()).unwrap();
        let r = membership(&pr_box(), &cat, 1e-9).unwrap();
        assert!(!r.inside);
        let sep = r.separation.unwrap();
        for v in cat.vertices() {
            assert!(sep.evaluate(v) <= sep.threshold + 1e-12);
        }
        assert!(sep.query_value > sep.threshold);
    }

    #[test]
    fn uniform_box_is_inside() {
        let cat = local_deterministic_vertices::<f64>(&Scenario::chsh()).unwrap();
        let r = membership(&Behavior::uniform(Scenario::chsh()), &cat, 1e-9).unwrap();
        assert!(r.inside);
        let w = r.weights.unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn catalogue_json_is_an_array_of_behaviors() {
        let cat = ns_vertices_222::<f64>();
        let back: Vec<Behavior<f64>> = serde_json::from_str(&cat.to_json().unwrap()).unwrap();
        assert_eq!(back, cat.vertices());
    }
}

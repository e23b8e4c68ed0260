use serde::{Deserialize, Serialize};

use super::Assemblage;
use crate::error::{Error, Result};
use crate::index::multi_indices;
use crate::polytopes::ns_vertices_222;
use crate::quantum::{eig_hermitian, project_psd, CMatrix, SUPPORT_CUTOFF};
use crate::scalar::Real;

/// Response functions `q_λ(a|x)`, each stored `[x][a]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseCatalogue<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub responses: Vec<Vec<T>>,
}

impl<T: Real> ResponseCatalogue<T> {
    /// All `s^r` deterministic strategies `D_λ(a|x) = δ_{a, λ(x)}`.
    pub fn deterministic(inputs: usize, outputs: usize) -> Self {
        let responses = multi_indices(&vec![outputs; inputs])
            .map(|choice| {
                let mut q = vec![T::zero(); inputs * outputs];
                for (x, &a) in choice.iter().enumerate() {
                    q[x * outputs + a] = T::one();
                }
                q
            })
            .collect();
        ResponseCatalogue { inputs, outputs, responses }
    }

    /// The 24 vertices of the (2,2,2) no-signalling polytope as responses of
    /// the joint wing `(x0x1 → a0a1)`.
    pub fn ns_wing_222() -> Self {
        let responses = ns_vertices_222::<T>().vertices().iter().map(|v| v.table().to_vec()).collect();
        ResponseCatalogue { inputs: 4, outputs: 4, responses }
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// `Σ_λ q_λ(a|x) σ_λ` for every `(x, a)`.
    pub fn combine(&self, states: &[CMatrix<T>]) -> Vec<CMatrix<T>> {
        let d = states.first().map_or(0, CMatrix::rows);
        (0..self.inputs * self.outputs)
            .map(|i| {
                let mut acc = CMatrix::zeros(d, d);
                for (q, s) in self.responses.iter().zip(states) {
                    if q[i] != T::zero() {
                        acc.add_scaled(q[i], s);
                    }
                }
                acc
            })
            .collect()
    }

    fn check_shape(&self, asm: &Assemblage<T>) -> Result<()> {
        if (self.inputs, self.outputs) != (asm.num_inputs(), asm.num_outputs()) {
            return Err(Error::dim(format!(
                "responses over ({}, {}) for an assemblage with ({}, {})",
                self.inputs,
                self.outputs,
                asm.num_inputs(),
                asm.num_outputs()
            )));
        }
        Ok(())
    }
}

/// Hidden-state model `ϱ_{a|x} = Σ_λ q_λ(a|x) σ_λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct LhsModel<T> {
    pub catalogue: ResponseCatalogue<T>,
    /// Subnormalised hidden states, one per response.
    pub states: Vec<CMatrix<T>>,
}

impl<T: Real> LhsModel<T> {
    pub fn reconstruct(&self) -> Vec<CMatrix<T>> {
        self.catalogue.combine(&self.states)
    }

    /// Largest entrywise deviation of the reconstruction from `asm`.
    pub fn residual(&self, asm: &Assemblage<T>) -> T {
        self.reconstruct()
            .iter()
            .zip(asm.elements())
            .fold(T::zero(), |m, (a, b)| m.max(a.max_abs_diff(b)))
    }

    /// Smallest eigenvalue over all hidden states.
    pub fn min_eigenvalue(&self) -> Result<T> {
        let mut low = T::infinity();
        for s in &self.states {
            low = low.min(eig_hermitian(s)?.values[0]);
        }
        Ok(low)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeasibilityConfig {
    pub max_iters: usize,
    /// Iteration stops once the reconstruction residual falls below this.
    pub stop_tol: f64,
    /// A model is reported iff the final residual is at most this.
    pub accept_tol: f64,
}

impl Default for FeasibilityConfig {
    fn default() -> Self {
        FeasibilityConfig { max_iters: 50_000, stop_tol: 1e-8, accept_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeasibilityStatus {
    ModelFound,
    NoModelWithinBudget,
}

/// Linear steering functional `Σ_{a,x} tr(F_{a|x} ϱ_{a|x}) ≤ bound`, valid
/// for every assemblage in the hull of the catalogue.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct SteeringFunctional<T> {
    pub elements: Vec<CMatrix<T>>,
    pub bound: T,
    pub value: T,
}

impl<T: Real> SteeringFunctional<T> {
    pub fn violation(&self) -> T {
        self.value - self.bound
    }

    pub fn evaluate(&self, elements: &[CMatrix<T>]) -> T {
        self.elements.iter().zip(elements).map(|(f, e)| f.inner_re(e)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct UnsteerabilityReport<T> {
    pub status: FeasibilityStatus,
    pub model: Option<LhsModel<T>>,
    pub residual: T,
    pub iterations: usize,
    /// Present when no model was found.
    pub functional: Option<SteeringFunctional<T>>,
    /// Whether the functional separates the input from the catalogue hull.
    pub corroborated: bool,
}

const FUNCTIONAL_TOL: f64 = 1e-9;

/// Affine projector onto `{X : Σ_λ q_λ(a|x) X_λ = ϱ_{a|x}}`, applied entrywise.
struct AffineProjector<T> {
    /// `rows × len` coefficient matrix `M[(x,a), λ]`.
    m: Vec<Vec<T>>,
    /// Pseudo-inverse of `M Mᵀ`.
    gram_pinv: Vec<Vec<T>>,
}

impl<T: Real> AffineProjector<T> {
    fn new(cat: &ResponseCatalogue<T>) -> Result<Self> {
        let rows = cat.inputs * cat.outputs;
        let m: Vec<Vec<T>> = (0..rows).map(|i| cat.responses.iter().map(|q| q[i]).collect()).collect();
        let gram = CMatrix::from_fn(rows, rows, |i, j| {
            num_complex::Complex::new(m[i].iter().zip(&m[j]).map(|(&a, &b)| a * b).sum(), T::zero())
        });
        let e = eig_hermitian(&gram)?;
        let top = e.values.last().copied().unwrap_or(T::zero()).abs();
        let cut = T::tol(1e-10) * top.max(T::one());
        let pinv = e.apply(|v| if v > cut { T::one() / v } else { T::zero() });
        let gram_pinv = (0..rows).map(|i| (0..rows).map(|j| pinv[(i, j)].re).collect()).collect();
        Ok(AffineProjector { m, gram_pinv })
    }

    /// `M X − ϱ`.
    fn defect(&self, x: &[CMatrix<T>], target: &[CMatrix<T>]) -> Vec<CMatrix<T>> {
        self.m
            .iter()
            .zip(target)
            .map(|(row, t)| {
                let mut acc = t.scale(-T::one());
                for (&c, xl) in row.iter().zip(x) {
                    if c != T::zero() {
                        acc.add_scaled(c, xl);
                    }
                }
                acc
            })
            .collect()
    }

    /// `(M Mᵀ)⁺ R`.
    fn solve(&self, r: &[CMatrix<T>]) -> Vec<CMatrix<T>> {
        let d = r[0].rows();
        self.gram_pinv
            .iter()
            .map(|row| {
                let mut acc = CMatrix::zeros(d, d);
                for (&c, ri) in row.iter().zip(r) {
                    if c != T::zero() {
                        acc.add_scaled(c, ri);
                    }
                }
                acc
            })
            .collect()
    }

    fn project(&self, x: &mut [CMatrix<T>], target: &[CMatrix<T>]) {
        let y = self.solve(&self.defect(x, target));
        for (l, xl) in x.iter_mut().enumerate() {
            for (row, yi) in self.m.iter().zip(&y) {
                if row[l] != T::zero() {
                    xl.add_scaled(-row[l], yi);
                }
            }
        }
    }
}

fn max_norm<T: Real>(ms: &[CMatrix<T>]) -> T {
    ms.iter().fold(T::zero(), |m, e| m.max(e.max_abs()))
}

/// Face of the PSD cone allowed for one hidden state.
enum Face<T> {
    Full,
    Zero,
    /// Orthonormal columns spanning the allowed support.
    Sub(CMatrix<T>),
}

impl<T: Real> Face<T> {
    fn project(&self, m: &CMatrix<T>) -> Result<CMatrix<T>> {
        match self {
            Face::Full => project_psd(m),
            Face::Zero => Ok(CMatrix::zeros(m.rows(), m.cols())),
            Face::Sub(v) => {
                let vh = v.adjoint();
                let inner = project_psd(&(&(&vh * m) * v).hermitian_part())?;
                Ok((&(v * &inner) * &vh).hermitian_part())
            }
        }
    }
}

/// `q_λ(a|x) σ_λ ⪯ ϱ_{a|x}`, so `σ_λ` lives on the intersection of the
/// supports of the elements its response touches.
fn faces<T: Real>(elements: &[CMatrix<T>], cat: &ResponseCatalogue<T>) -> Result<Vec<Face<T>>> {
    let d = elements[0].rows();
    let cut = T::tol(SUPPORT_CUTOFF);
    let complements = elements
        .iter()
        .map(|e| -> Result<CMatrix<T>> {
            let eg = eig_hermitian(&e.hermitian_part())?;
            Ok(eg.apply(|l| if l > cut { T::zero() } else { T::one() }))
        })
        .collect::<Result<Vec<_>>>()?;
    if complements.iter().all(|c| c.max_abs() < T::lit(0.5)) {
        return Ok((0..cat.len()).map(|_| Face::Full).collect());
    }
    cat.responses
        .iter()
        .map(|q| {
            let mut acc = CMatrix::zeros(d, d);
            for (c, &w) in complements.iter().zip(q) {
                if w > T::zero() {
                    acc = &acc + c;
                }
            }
            let eg = eig_hermitian(&acc.hermitian_part())?;
            let keep: Vec<usize> = (0..d).filter(|&i| eg.values[i] < T::lit(1e-8)).collect();
            Ok(match keep.len() {
                0 => Face::Zero,
                k if k == d => Face::Full,
                k => Face::Sub(CMatrix::from_fn(d, k, |i, j| eg.vectors[(i, keep[j])])),
            })
        })
        .collect()
}

/// `(ρ^{-1/2}, ρ^{1/2})` on the support of `ρ`.
fn whitening<T: Real>(rho: &CMatrix<T>) -> Result<(CMatrix<T>, CMatrix<T>)> {
    let e = eig_hermitian(rho)?;
    let cut = T::tol(SUPPORT_CUTOFF) * e.values.last().copied().unwrap_or(T::one()).max(T::one());
    let inv = e.apply(|l| if l > cut { T::one() / l.sqrt() } else { T::zero() });
    let root = e.apply(|l| if l > cut { l.sqrt() } else { T::zero() });
    Ok((inv, root))
}

/// Decides whether `asm` lies in the hull `{Σ_λ q_λ σ_λ : σ_λ ⪰ 0}` by
/// Dykstra's alternating projections between the reconstruction constraints
/// and the PSD cones, starting from zero.
///
/// The elements are first whitened by `ρ_B^{-1/2}`, which maps models to
/// models. Each PSD projection is restricted to the face forced by the
/// supports of the elements, which keeps rank-deficient inputs from stalling.
pub fn lhs_feasibility<T: Real>(
    asm: &Assemblage<T>,
    cat: &ResponseCatalogue<T>,
    cfg: &FeasibilityConfig,
) -> Result<UnsteerabilityReport<T>> {
    cat.check_shape(asm)?;
    let proj = AffineProjector::new(cat)?;
    let (white, unwhite) = whitening(&asm.reduced_state())?;
    let congruence = |w: &CMatrix<T>, m: &CMatrix<T>| (&(w * m) * w).hermitian_part();
    let target: Vec<CMatrix<T>> = asm.elements().iter().map(|e| congruence(&white, e)).collect();
    let faces = faces(&target, cat)?;
    let (xw, iterations) = dykstra(&target, &proj, &faces, cfg)?;
    let x: Vec<CMatrix<T>> = xw.iter().map(|s| congruence(&unwhite, s)).collect();
    let residual = max_norm(&proj.defect(&x, asm.elements()));
    if residual <= T::tol(cfg.accept_tol) {
        return Ok(UnsteerabilityReport {
            status: FeasibilityStatus::ModelFound,
            model: Some(LhsModel { catalogue: cat.clone(), states: x }),
            residual,
            iterations,
            functional: None,
            corroborated: false,
        });
    }
    let functional = separating_functional(&proj, &x, asm, cat)?;
    let corroborated = functional.violation() > T::tol(FUNCTIONAL_TOL);
    Ok(UnsteerabilityReport {
        status: FeasibilityStatus::NoModelWithinBudget,
        model: None,
        residual,
        iterations,
        functional: Some(functional),
        corroborated,
    })
}

/// Sweeps between resets of the Dykstra corrections.
const RESTART: usize = 100;

/// Dykstra iterations from zero, restarted from the current iterate every
/// `RESTART` sweeps; returns the last PSD iterate.
fn dykstra<T: Real>(
    target: &[CMatrix<T>],
    proj: &AffineProjector<T>,
    faces: &[Face<T>],
    cfg: &FeasibilityConfig,
) -> Result<(Vec<CMatrix<T>>, usize)> {
    let d = target[0].rows();
    let n = faces.len();
    let mut x: Vec<CMatrix<T>> = vec![CMatrix::zeros(d, d); n];
    let mut corr: Vec<CMatrix<T>> = vec![CMatrix::zeros(d, d); n];
    let mut iterations = 0;
    let stop = T::tol(cfg.stop_tol);
    while iterations < cfg.max_iters {
        iterations += 1;
        if iterations % RESTART == 0 {
            corr.iter_mut().for_each(|c| *c = CMatrix::zeros(d, d));
        }
        proj.project(&mut x, target);
        for ((xl, cl), face) in x.iter_mut().zip(corr.iter_mut()).zip(faces) {
            let shifted = &*xl + &*cl;
            let p = face.project(&shifted)?;
            *cl = &shifted - &p;
            *xl = p;
        }
        let r = max_norm(&proj.defect(&x, target));
        if r <= stop {
            break;
        }
    }
    Ok((x, iterations))
}

/// `F = (M Mᵀ)⁺ (ϱ − M X)` from the final PSD iterate, scaled to unit max
/// norm, with its exact bound `max_λ λ_max(Σ_{a,x} q_λ(a|x) F_{a|x})`.
fn separating_functional<T: Real>(
    proj: &AffineProjector<T>,
    x: &[CMatrix<T>],
    asm: &Assemblage<T>,
    cat: &ResponseCatalogue<T>,
) -> Result<SteeringFunctional<T>> {
    let gap: Vec<CMatrix<T>> = proj.defect(x, asm.elements()).iter().map(|r| r.scale(-T::one())).collect();
    let mut f: Vec<CMatrix<T>> = proj.solve(&gap).iter().map(CMatrix::hermitian_part).collect();
    let scale = max_norm(&f);
    if scale > T::zero() {
        f = f.iter().map(|m| m.scale(T::one() / scale)).collect();
    }
    let d = asm.dim();
    let mut bound = T::neg_infinity();
    for q in &cat.responses {
        let mut w = CMatrix::zeros(d, d);
        for (i, fi) in f.iter().enumerate() {
            if q[i] != T::zero() {
                w.add_scaled(q[i], fi);
            }
        }
        bound = bound.max(*eig_hermitian(&w.hermitian_part())?.values.last().expect("nonempty"));
    }
    let mut functional = SteeringFunctional { elements: f, bound, value: T::zero() };
    functional.value = functional.evaluate(asm.elements());
    Ok(functional)
}

/// LHS feasibility over the deterministic strategies.
pub fn is_unsteerable<T: Real>(asm: &Assemblage<T>, cfg: &FeasibilityConfig) -> Result<UnsteerabilityReport<T>> {
    lhs_feasibility(asm, &ResponseCatalogue::deterministic(asm.num_inputs(), asm.num_outputs()), cfg)
}

/// UR_ns feasibility for a quadripartite assemblage with binary inputs and
/// outputs on each pair: responses run over the no-signalling vertices of
/// the joint wing.
pub fn is_urns<T: Real>(asm4: &Assemblage<T>, cfg: &FeasibilityConfig) -> Result<UnsteerabilityReport<T>> {
    let [w0, w1] = asm4.require_wings()?;
    if [w0.inputs, w0.outputs, w1.inputs, w1.outputs] != [2, 2, 2, 2] {
        return Err(Error::pre("UR_ns membership needs binary inputs and outputs on both pairs"));
    }
    lhs_feasibility(asm4, &ResponseCatalogue::ns_wing_222(), cfg)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::assemblages::{werner_assemblage, Assemblage};
    use crate::quantum::random_density;

    #[test]
    fn constructed_lhs_is_found() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cat = ResponseCatalogue::<f64>::deterministic(2, 2);
        let w = crate::sampling::dirichlet::<f64, _>(&mut rng, cat.len(), 1.0);
        let states: Vec<_> = w.iter().map(|&p| random_density::<f64, _>(&mut rng, 2, 2).scale(p)).collect();
        let asm = Assemblage::new(2, 2, 2, cat.combine(&states)).unwrap();
        let r = is_unsteerable(&asm, &FeasibilityConfig::default()).unwrap();
        assert_eq!(r.status, FeasibilityStatus::ModelFound);
        assert!(r.model.unwrap().residual(&asm) <= 1e-6);
    }

    #[test]
    fn werner_classification() {
        let cfg = FeasibilityConfig::default();
        let low = is_unsteerable(&werner_assemblage::<f64>(0.3).unwrap(), &cfg).unwrap();
        assert_eq!(low.status, FeasibilityStatus::ModelFound);
        let high = is_unsteerable(&werner_assemblage::<f64>(0.9).unwrap(), &cfg).unwrap();
        assert_eq!(high.status, FeasibilityStatus::NoModelWithinBudget);
        assert!(high.corroborated);
    }
}

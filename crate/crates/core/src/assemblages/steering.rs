use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lhs::{lhs_feasibility, FeasibilityConfig, LhsModel, ResponseCatalogue};
use super::Assemblage;
use crate::error::{Error, Result};
use crate::quantum::{eig_hermitian, log_derivative, relative_entropy_eig, CMatrix, Eigen};
use crate::sampling::dirichlet;
use crate::scalar::Real;

const ZERO_OBJECTIVE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FwConfig {
    pub iterations: usize,
    /// Initial smoothing of the max over inputs; decays as `1/√t`.
    pub smoothing: f64,
    /// Weight of the maximally mixed component blended into warm starts.
    pub interior: f64,
    /// Dykstra iterations spent on the feasibility warm start (0 disables it).
    pub warm_start_iters: usize,
    /// Exponentiated-gradient steps run after the Frank–Wolfe budget.
    pub polish_iters: usize,
    pub seed: Option<u64>,
}

impl Default for FwConfig {
    fn default() -> Self {
        FwConfig { iterations: 2000, smoothing: 0.05, interior: 1e-6, warm_start_iters: 2000, polish_iters: 500, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct SteeringBound<T> {
    /// `max_x S_Q(ρ_AB(x) ‖ σ_AB(x))` at the witness.
    pub upper_bound: T,
    pub per_input: Vec<T>,
    pub witness: LhsModel<T>,
    /// Frank–Wolfe gap of the smoothed objective at the last Frank–Wolfe iterate.
    pub fw_gap: T,
    /// Frank–Wolfe iterations actually run.
    pub iterations: usize,
}

impl<T: Real> SteeringBound<T> {
    /// The witness as an assemblage.
    pub fn witness_assemblage(&self, like: &Assemblage<T>) -> Result<Assemblage<T>> {
        let mut a = Assemblage::new(like.num_inputs(), like.num_outputs(), like.dim(), self.witness.reconstruct())?;
        if let Some(w) = like.wings() {
            a = a.with_wings(w)?;
        }
        Ok(a)
    }
}

struct Evaluation<T> {
    per_input: Vec<T>,
    sigma_eigs: Vec<Eigen<T>>,
}

impl<T: Real> Evaluation<T> {
    fn max(&self) -> T {
        self.per_input.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// `μ ln Σ_x exp(v_x / μ)`.
    fn smoothed(&self, mu: T) -> T {
        let top = self.max();
        if !top.is_finite() {
            return top;
        }
        top + mu * self.per_input.iter().map(|&v| ((v - top) / mu).exp()).sum::<T>().ln()
    }
}

fn evaluate<T: Real>(
    rho_eigs: &[Eigen<T>],
    cat: &ResponseCatalogue<T>,
    states: &[CMatrix<T>],
) -> Result<Evaluation<T>> {
    let sigma = cat.combine(states);
    let sigma_eigs = sigma.iter().map(|s| eig_hermitian(&s.hermitian_part())).collect::<Result<Vec<_>>>()?;
    let s = cat.outputs;
    let per_input = (0..cat.inputs)
        .map(|x| (0..s).map(|a| relative_entropy_eig(&rho_eigs[x * s + a], &sigma_eigs[x * s + a])).sum::<T>().max(T::zero()))
        .collect();
    Ok(Evaluation { per_input, sigma_eigs })
}

/// `K_v = Σ_{a,x} q_v(a|x) π(x) G_{a|x}`, the gradient of the smoothed
/// objective with respect to each hidden state.
fn vertex_gradients<T: Real>(
    asm: &Assemblage<T>,
    cat: &ResponseCatalogue<T>,
    eval: &Evaluation<T>,
    mu: T,
) -> Vec<CMatrix<T>> {
    let s = cat.outputs;
    let d = asm.dim();
    let top = eval.max();
    let mut pi: Vec<T> = eval.per_input.iter().map(|&v| ((v - top) / mu).exp()).collect();
    let z: T = pi.iter().copied().sum();
    pi.iter_mut().for_each(|p| *p /= z);
    // G_{a|x} = −(1/ln2) Dlog(ς_{a|x})[ϱ_{a|x}]
    let grads: Vec<CMatrix<T>> = (0..cat.inputs * s)
        .map(|i| log_derivative(&eval.sigma_eigs[i], &asm.elements()[i]).scale(-pi[i / s] / T::LN_2()))
        .collect();
    cat.responses
        .iter()
        .map(|q| {
            let mut k = CMatrix::zeros(d, d);
            for (i, g) in grads.iter().enumerate() {
                if q[i] != T::zero() {
                    k.add_scaled(q[i], g);
                }
            }
            k.hermitian_part()
        })
        .collect()
}

/// One exponentiated-gradient step `S_v ∝ exp(ln S_v − η K_v)`.
fn exp_gradient_step<T: Real>(states: &[CMatrix<T>], ks: &[CMatrix<T>], eta: T) -> Result<Vec<CMatrix<T>>> {
    let floor = T::lit(1e-30);
    let mut out = Vec::with_capacity(states.len());
    for (s, k) in states.iter().zip(ks) {
        let log_s = eig_hermitian(&s.hermitian_part())?.apply(|l| l.max(floor).ln());
        let mut m = log_s;
        m.add_scaled(-eta, k);
        out.push(eig_hermitian(&m.hermitian_part())?.apply(|l| l.exp()));
    }
    // shift-free normalisation; exponents stay moderate because ln S_v ≤ 0
    normalized(&out)
}

fn normalized<T: Real>(states: &[CMatrix<T>]) -> Result<Vec<CMatrix<T>>> {
    let total: T = states.iter().map(|s| s.trace().re).sum();
    if !(total > T::zero()) {
        return Err(Error::Numeric("warm start has zero trace".into()));
    }
    Ok(states.iter().map(|s| s.scale(T::one() / total).hermitian_part()).collect())
}

fn blend<T: Real>(states: &[CMatrix<T>], interior: &[CMatrix<T>], delta: T) -> Vec<CMatrix<T>> {
    states
        .iter()
        .zip(interior)
        .map(|(s, i)| {
            let mut m = s.scale(T::one() - delta);
            m.add_scaled(delta, i);
            m
        })
        .collect()
}

/// Frank–Wolfe upper bound on the relative entropy of steering of `asm`
/// with respect to the hull of `cat`.
///
/// Iterates are `Σ_v q_v ⊗ S_v` with `S_v ⪰ 0`, `Σ_v tr S_v = 1`; the linear
/// subproblem picks the vertex and pure state minimising the linearised
/// objective via a smallest-eigenvector computation. The returned bound is
/// the true (unsmoothed) objective at the best iterate.
pub fn relative_entropy_steering_ub<T: Real>(
    asm: &Assemblage<T>,
    cat: &ResponseCatalogue<T>,
    cfg: &FwConfig,
    initial: Option<&LhsModel<T>>,
) -> Result<SteeringBound<T>> {
    if (cat.inputs, cat.outputs) != (asm.num_inputs(), asm.num_outputs()) {
        return Err(Error::dim("catalogue does not match the assemblage"));
    }
    let d = asm.dim();
    let nv = cat.len();
    let rho_eigs = asm.elements().iter().map(eig_hermitian).collect::<Result<Vec<_>>>()?;

    let weights: Vec<T> = match cfg.seed {
        Some(seed) => dirichlet(&mut ChaCha8Rng::seed_from_u64(seed), nv, 1.0),
        None => vec![T::one() / T::from_usize_lossy(nv); nv],
    };
    let mixed = CMatrix::identity(d).scale(T::one() / T::from_usize_lossy(d));
    let interior: Vec<CMatrix<T>> = weights.iter().map(|&w| mixed.scale(w)).collect();

    let mut starts = vec![interior.clone()];
    let delta = T::lit(cfg.interior);
    if let Some(m) = initial {
        if m.states.len() != nv || m.states.iter().any(|s| s.rows() != d) {
            return Err(Error::dim("initial witness does not match the catalogue"));
        }
        starts.push(blend(&normalized(&m.states)?, &interior, delta));
    }
    if cfg.warm_start_iters > 0 {
        let fcfg = FeasibilityConfig { max_iters: cfg.warm_start_iters, ..FeasibilityConfig::default() };
        let report = lhs_feasibility(asm, cat, &fcfg)?;
        if let Some(m) = report.model {
            starts.push(blend(&normalized(&m.states)?, &interior, delta));
        }
    }
    let mut states = Vec::new();
    let mut eval: Option<Evaluation<T>> = None;
    for s in starts {
        let e = evaluate(&rho_eigs, cat, &s)?;
        if eval.as_ref().is_none_or(|b| e.max() < b.max()) {
            eval = Some(e);
            states = s;
        }
    }
    let mut eval = eval.expect("at least one start");
    let mut best = (eval.max(), eval.per_input.clone(), states.clone());
    let mut fw_gap = T::infinity();

    let mut iterations = 0;
    for t in 1..=cfg.iterations {
        if best.0 <= T::tol(ZERO_OBJECTIVE) {
            break;
        }
        iterations = t;
        let mu = T::lit(cfg.smoothing) / T::from_usize_lossy(t).sqrt();
        let ks = vertex_gradients(asm, cat, &eval, mu);
        let mut inner = T::zero();
        let mut lmo = (T::infinity(), 0, Vec::new());
        for (v, k) in ks.iter().enumerate() {
            inner += k.inner_re(&states[v]);
            let e = eig_hermitian(k)?;
            if e.values[0] < lmo.0 {
                lmo = (e.values[0], v, e.vectors.column(0));
            }
        }
        fw_gap = inner - lmo.0;
        let target = CMatrix::outer(&lmo.2, &lmo.2);
        let mut gamma = T::lit(2.0) / T::from_usize_lossy(t + 2);
        // halve the step until the smoothed objective does not increase
        let current = eval.smoothed(mu);
        let mut accepted = None;
        for _ in 0..30 {
            let mut cand: Vec<CMatrix<T>> = states.iter().map(|m| m.scale(T::one() - gamma)).collect();
            cand[lmo.1].add_scaled(gamma, &target);
            let e = evaluate(&rho_eigs, cat, &cand)?;
            if e.smoothed(mu) <= current {
                accepted = Some((cand, e));
                break;
            }
            gamma = gamma * T::lit(0.5);
        }
        if let Some((cand, e)) = accepted {
            states = cand;
            eval = e;
        }
        if eval.max() < best.0 {
            best = (eval.max(), eval.per_input.clone(), states.clone());
        }
    }
    if best.0.is_finite() && best.0 > T::tol(ZERO_OBJECTIVE) && cfg.polish_iters > 0 {
        let mu = T::lit(cfg.smoothing) / T::from_usize_lossy(cfg.iterations.max(1)).sqrt();
        let mut states = best.2.clone();
        let mut eval = evaluate(&rho_eigs, cat, &states)?;
        let mut eta = T::one();
        for _ in 0..cfg.polish_iters {
            let ks = vertex_gradients(asm, cat, &eval, mu);
            let current = eval.smoothed(mu);
            let mut moved = false;
            for _ in 0..30 {
                let cand = exp_gradient_step(&states, &ks, eta)?;
                let e = evaluate(&rho_eigs, cat, &cand)?;
                if e.smoothed(mu) <= current {
                    states = cand;
                    eval = e;
                    eta = eta * T::lit(1.5);
                    moved = true;
                    break;
                }
                eta = eta * T::lit(0.5);
            }
            if eval.max() < best.0 {
                best = (eval.max(), eval.per_input.clone(), states.clone());
            }
            if !moved {
                break;
            }
        }
    }
    if iterations == 0 && best.0 <= T::tol(ZERO_OBJECTIVE) {
        // the objective is nonnegative, so its value bounds the gap
        fw_gap = best.0;
    }
    if !best.0.is_finite() {
        return Err(Error::Optimization { message: "witness never covered the support".into(), last_value: f64::INFINITY });
    }
    Ok(SteeringBound {
        upper_bound: best.0,
        per_input: best.1,
        witness: LhsModel { catalogue: cat.clone(), states: best.2 },
        fw_gap,
        iterations,
    })
}

/// Upper bound with respect to the LHS (deterministic-strategy) set.
pub fn steering_ub_lhs<T: Real>(asm: &Assemblage<T>, cfg: &FwConfig) -> Result<SteeringBound<T>> {
    let cat = ResponseCatalogue::deterministic(asm.num_inputs(), asm.num_outputs());
    relative_entropy_steering_ub(asm, &cat, cfg, None)
}

/// Upper bound with respect to UR_ns for a quadripartite binary assemblage.
pub fn steering_ub_urns<T: Real>(asm4: &Assemblage<T>, cfg: &FwConfig) -> Result<SteeringBound<T>> {
    let [w0, w1] = asm4.require_wings()?;
    if [w0.inputs, w0.outputs, w1.inputs, w1.outputs] != [2, 2, 2, 2] {
        return Err(Error::pre("UR_ns bound needs binary inputs and outputs on both pairs"));
    }
    relative_entropy_steering_ub(asm4, &ResponseCatalogue::ns_wing_222(), cfg, None)
}

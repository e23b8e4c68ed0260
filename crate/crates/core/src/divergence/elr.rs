//! Relative entropy of nonlocality: `min_{Q ∈ conv(V)} max_s S(P_s || Q_s)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::behaviors::Behavior;
use crate::error::{Error, Result};
use crate::polytopes::{membership, VertexCatalogue};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElrConfig {
    /// Log-sum-exp temperatures (bits), run as a continuation.
    pub tau_ladder: Vec<f64>,
    /// Weights of the uniform box mixed into the iterate.
    pub eps_ladder: Vec<f64>,
    /// Mirror-descent iterations per ε run.
    pub iterations: usize,
    /// Base step; the step at iteration `t` is `step / √t`.
    pub step: f64,
    /// Random Dirichlet initial weights; uniform when absent.
    pub seed: Option<u64>,
    /// Upper minus certified lower bound below which the run counts as converged.
    pub gap_tol: f64,
}

impl Default for ElrConfig {
    fn default() -> Self {
        Self {
            tau_ladder: vec![1.0, 0.3, 0.1, 0.03],
            eps_ladder: vec![1e-2, 1e-3, 1e-4],
            iterations: 20_000,
            step: 0.5,
            seed: None,
            gap_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderEntry<T> {
    pub eps: f64,
    /// Objective at the ε-mixed witness.
    pub value_mixed: T,
    /// Objective at the same weights with ε set to zero.
    pub value_unmixed: T,
    pub lower_bound: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct ElrResult<T> {
    /// Objective at the witness: an upper bound on the relative entropy.
    pub value: T,
    /// Setting attaining the maximum at the witness.
    pub setting: Vec<usize>,
    pub witness: Behavior<T>,
    /// Convex weights over the catalogue reproducing the witness.
    pub weights: Vec<T>,
    /// Certified lower bound from the linearized dual.
    pub gap_certificate: T,
    /// Richardson extrapolation of the mixed values to ε = 0 (diagnostic).
    pub extrapolated: T,
    pub ladder: Vec<LadderEntry<T>>,
    pub converged: bool,
}

impl<T: Real> ElrResult<T> {
    /// `value − gap_certificate`.
    pub fn gap(&self) -> T {
        self.value - self.gap_certificate
    }
}

/// Catalogue vertices stored as sparse `(flat index, value)` lists.
pub(crate) struct Kernel<T> {
    n_out: usize,
    n_set: usize,
    p: Vec<T>,
    verts: Vec<Vec<(u32, T)>>,
}

impl<T: Real> Kernel<T> {
    pub(crate) fn new(p: &Behavior<T>, catalogue: &VertexCatalogue<T>) -> Result<Self> {
        if p.scenario() != catalogue.scenario() {
            return Err(Error::dim(format!(
                "box over {:?}, catalogue over {:?}",
                p.scenario(),
                catalogue.scenario()
            )));
        }
        let verts = catalogue
            .vertices()
            .iter()
            .map(|v| {
                v.table()
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x != T::zero())
                    .map(|(i, &x)| (i as u32, x))
                    .collect()
            })
            .collect();
        Ok(Self {
            n_out: p.num_outcomes(),
            n_set: p.num_settings(),
            p: p.table().to_vec(),
            verts,
        })
    }

    fn len(&self) -> usize {
        self.verts.len()
    }

    fn mixture(&self, w: &[T], eps: T, q: &mut [T]) {
        q.fill(eps / T::from_usize_lossy(self.n_out));
        let scale = T::one() - eps;
        for (v, &wv) in self.verts.iter().zip(w) {
            if wv > T::zero() {
                let c = scale * wv;
                for &(i, x) in v {
                    q[i as usize] += c * x;
                }
            }
        }
    }

    fn setting_kls(&self, q: &[T], out: &mut [T]) {
        for (s, k) in out.iter_mut().enumerate() {
            let lo = s * self.n_out;
            *k = crate::tensor::kl_raw(&self.p[lo..lo + self.n_out], &q[lo..lo + self.n_out]);
        }
    }

    /// `r = π_s P / Q` entrywise.
    fn ratios(&self, pi: &[T], q: &[T], r: &mut [T]) {
        for s in 0..self.n_set {
            for o in 0..self.n_out {
                let i = s * self.n_out + o;
                r[i] = if self.p[i] > T::zero() { pi[s] * self.p[i] / q[i] } else { T::zero() };
            }
        }
    }

    /// `g_v = Σ_i r_i V_v(i)`.
    fn scores(&self, r: &[T], g: &mut [T]) {
        for (gv, v) in g.iter_mut().zip(&self.verts) {
            let mut acc = T::zero();
            for &(i, x) in v {
                acc += r[i as usize] * x;
            }
            *gv = acc;
        }
    }

    /// Linearized lower bound `Σ π_s S_s(Q) − (max_v R_v − 1)/ln 2` at `q`.
    fn lower_bound(&self, pi: &[T], q: &[T], kls: &[T]) -> T {
        let f: T = pi.iter().zip(kls).map(|(&a, &k)| if a > T::zero() { a * k } else { T::zero() }).sum();
        if !f.is_finite() {
            return T::neg_infinity();
        }
        let mut r = vec![T::zero(); q.len()];
        self.ratios(pi, q, &mut r);
        let mut g = vec![T::zero(); self.len()];
        self.scores(&r, &mut g);
        let rmax = g.iter().copied().fold(T::neg_infinity(), T::max);
        (f - (rmax - T::one()) / T::LN_2()).max(T::zero())
    }
}

fn softmax<T: Real>(k: &[T], tau: T, out: &mut [T]) {
    let m = k.iter().copied().fold(T::neg_infinity(), T::max);
    let mut z = T::zero();
    for (o, &v) in out.iter_mut().zip(k) {
        *o = ((v - m) / tau).exp();
        z += *o;
    }
    out.iter_mut().for_each(|o| *o /= z);
}

fn argmax<T: Real>(v: &[T]) -> (usize, T) {
    v.iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
}

fn initial_weights<T: Real>(n: usize, seed: Option<u64>) -> Vec<T> {
    match seed {
        None => vec![T::one() / T::from_usize_lossy(n); n],
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|&x| T::lit(x / total)).collect()
        }
    }
}

/// Best certified lower bound over a few candidate input distributions at `q`.
fn certificate<T: Real>(kernel: &Kernel<T>, q: &[T], kls: &[T], taus: &[f64]) -> T {
    let mut pi = vec![T::zero(); kernel.n_set];
    let mut best = T::zero();
    for &tau in taus {
        softmax(kls, T::lit(tau), &mut pi);
        best = best.max(kernel.lower_bound(&pi, q, kls));
    }
    let (s, _) = argmax(kls);
    pi.fill(T::zero());
    pi[s] = T::one();
    best.max(kernel.lower_bound(&pi, q, kls))
}

struct RunOutcome<T> {
    weights: Vec<T>,
    entry: LadderEntry<T>,
}

fn mirror_descent_run<T: Real>(kernel: &Kernel<T>, w: &mut Vec<T>, eps: f64, cfg: &ElrConfig) -> RunOutcome<T> {
    let n = kernel.len();
    let len = kernel.p.len();
    let e = T::lit(eps);
    let mut q = vec![T::zero(); len];
    let mut r = vec![T::zero(); len];
    let mut kls = vec![T::zero(); kernel.n_set];
    let mut pi = vec![T::zero(); kernel.n_set];
    let mut g = vec![T::zero(); n];

    let mut best_val = T::infinity();
    let mut best_w = w.clone();
    let stages = cfg.tau_ladder.len().max(1);
    let per_stage = (cfg.iterations / stages).max(1);
    let mut t = 1usize;
    for &tau in &cfg.tau_ladder {
        let tau = T::lit(tau);
        for _ in 0..per_stage {
            kernel.mixture(w, e, &mut q);
            kernel.setting_kls(&q, &mut kls);
            let (_, val) = argmax(&kls);
            if val < best_val {
                best_val = val;
                best_w.clone_from(w);
            }
            softmax(&kls, tau, &mut pi);
            kernel.ratios(&pi, &q, &mut r);
            kernel.scores(&r, &mut g);
            let gmax = g.iter().copied().fold(T::zero(), T::max);
            if gmax <= T::zero() {
                break;
            }
            let eta = T::lit(cfg.step) / T::from_usize_lossy(t).sqrt();
            let mut z = T::zero();
            for (wv, &gv) in w.iter_mut().zip(&g) {
                *wv *= (eta * (gv - gmax) / gmax).exp();
                z += *wv;
            }
            w.iter_mut().for_each(|wv| *wv /= z);
            t += 1;
        }
    }
    kernel.mixture(w, e, &mut q);
    kernel.setting_kls(&q, &mut kls);
    if argmax(&kls).1 < best_val {
        best_w.clone_from(w);
    }

    kernel.mixture(&best_w, e, &mut q);
    kernel.setting_kls(&q, &mut kls);
    let value_mixed = argmax(&kls).1;
    let lower_bound = certificate(kernel, &q, &kls, &cfg.tau_ladder);
    kernel.mixture(&best_w, T::zero(), &mut q);
    kernel.setting_kls(&q, &mut kls);
    let value_unmixed = argmax(&kls).1;
    w.clone_from(&best_w);
    RunOutcome {
        weights: best_w,
        entry: LadderEntry {
            eps,
            value_mixed,
            value_unmixed,
            lower_bound,
        },
    }
}

fn uniform_weights<T: Real>(catalogue: &VertexCatalogue<T>) -> Result<Vec<T>> {
    let u = Behavior::uniform(catalogue.scenario().clone());
    membership(&u, catalogue, T::tol(1e-9))?
        .weights
        .ok_or_else(|| Error::pre("the uniform box is not in the convex hull of the catalogue"))
}

#[allow(clippy::too_many_arguments)]
fn assemble<T: Real>(
    p: &Behavior<T>,
    catalogue: &VertexCatalogue<T>,
    weights: Vec<T>,
    eps: f64,
    value: T,
    gap_certificate: T,
    ladder: Vec<LadderEntry<T>>,
    gap_tol: f64,
) -> Result<ElrResult<T>> {
    if !value.is_finite() {
        return Err(Error::Optimization {
            message: "objective is not finite at the final iterate".into(),
            last_value: value.to_f64_lossy(),
        });
    }
    let weights = if eps > 0.0 {
        let u = uniform_weights(catalogue)?;
        let e = T::lit(eps);
        weights.iter().zip(&u).map(|(&w, &uv)| (T::one() - e) * w + e * uv).collect()
    } else {
        weights
    };
    let witness = catalogue.combine(&weights)?;
    let report = super::box_kl(p, &witness)?;
    let extrapolated = match ladder.as_slice() {
        [.., a, b] if a.eps != b.eps => {
            let (e1, e2) = (T::lit(a.eps), T::lit(b.eps));
            b.value_mixed - e2 * (a.value_mixed - b.value_mixed) / (e1 - e2)
        }
        [.., b] => b.value_mixed,
        [] => value,
    };
    Ok(ElrResult {
        value: report.value,
        setting: report.argmax_setting,
        witness,
        weights,
        gap_certificate,
        extrapolated,
        converged: report.value - gap_certificate <= T::tol(gap_tol),
        ladder,
    })
}

/// Relative entropy of nonlocality of `p` against the convex hull of `catalogue`.
///
/// Entropic mirror descent on the vertex weights of a log-sum-exp smoothed
/// max-over-settings objective, with the uniform box mixed in at each ε of
/// the ladder. The reported value is the objective at the best witness
/// found, so it is always an upper bound; `gap_certificate` is a lower bound.
/// Boxes inside the hull short-circuit to the membership certificate and an
/// empty ladder.
pub fn relative_entropy_nl<T: Real>(
    p: &Behavior<T>,
    catalogue: &VertexCatalogue<T>,
    cfg: &ElrConfig,
) -> Result<ElrResult<T>> {
    let ns = p.is_nonsignalling_wings();
    if !ns.holds {
        return Err(Error::pre(format!(
            "box signals across the wings (violation {:e})",
            ns.max_violation.to_f64_lossy()
        )));
    }
    let kernel = Kernel::new(p, catalogue)?;
    let m = membership(p, catalogue, T::tol(1e-9))?;
    if let (true, Some(w)) = (m.inside, m.weights) {
        return assemble(p, catalogue, w, 0.0, T::zero(), T::zero(), Vec::new(), cfg.gap_tol);
    }
    let mut w = initial_weights::<T>(kernel.len(), cfg.seed);
    let mut ladder = Vec::with_capacity(cfg.eps_ladder.len());
    let mut best: Option<(T, Vec<T>, f64)> = None;
    let mut lower = T::zero();
    for &eps in &cfg.eps_ladder {
        let run = mirror_descent_run(&kernel, &mut w, eps, cfg);
        lower = lower.max(run.entry.lower_bound);
        for (val, e) in [(run.entry.value_mixed, eps), (run.entry.value_unmixed, 0.0)] {
            if best.as_ref().is_none_or(|(b, _, _)| val < *b) {
                best = Some((val, run.weights.clone(), e));
            }
        }
        ladder.push(run.entry);
    }
    let (value, weights, eps) = best.ok_or_else(|| Error::invalid("empty ε ladder"))?;
    assemble(p, catalogue, weights, eps, value, lower, ladder, cfg.gap_tol)
}

/// Independent saddle-point solver for the same problem: Hedge on the
/// input distribution against EM best responses on the vertex weights.
/// Returns the objective at the averaged weights.
pub fn cross_check_elr<T: Real>(
    p: &Behavior<T>,
    catalogue: &VertexCatalogue<T>,
    rounds: usize,
    inner: usize,
) -> Result<ElrResult<T>> {
    let kernel = Kernel::new(p, catalogue)?;
    let n = kernel.len();
    let len = kernel.p.len();
    let mut w = vec![T::one() / T::from_usize_lossy(n); n];
    let mut pi = vec![T::one() / T::from_usize_lossy(kernel.n_set); kernel.n_set];
    let mut w_sum = vec![T::zero(); n];
    let mut q = vec![T::zero(); len];
    let mut r = vec![T::zero(); len];
    let mut g = vec![T::zero(); n];
    let mut kls = vec![T::zero(); kernel.n_set];
    let log_s = T::from_usize_lossy(kernel.n_set).ln().max(T::one());
    for k in 1..=rounds {
        for _ in 0..inner {
            kernel.mixture(&w, T::zero(), &mut q);
            kernel.ratios(&pi, &q, &mut r);
            kernel.scores(&r, &mut g);
            let z: T = w.iter().zip(&g).map(|(&a, &b)| a * b).sum();
            for (wv, &gv) in w.iter_mut().zip(&g) {
                *wv = *wv * gv / z;
            }
        }
        for (s, &wv) in w_sum.iter_mut().zip(&w) {
            *s += wv;
        }
        kernel.mixture(&w, T::zero(), &mut q);
        kernel.setting_kls(&q, &mut kls);
        let eta = (T::lit(8.0) * log_s / T::from_usize_lossy(k)).sqrt();
        let m = kls.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        for (a, &kv) in pi.iter_mut().zip(&kls) {
            *a *= (eta * (kv - m)).exp();
            z += *a;
        }
        pi.iter_mut().for_each(|a| *a /= z);
    }
    let total: T = w_sum.iter().copied().sum();
    let weights: Vec<T> = w_sum.iter().map(|&x| x / total).collect();
    kernel.mixture(&weights, T::zero(), &mut q);
    kernel.setting_kls(&q, &mut kls);
    let value = argmax(&kls).1;
    let lower = certificate(&kernel, &q, &kls, &[1.0, 0.3, 0.1, 0.03]);
    assemble(p, catalogue, weights, 0.0, value, lower, Vec::new(), 1e-3)
}

/// Certified lower bound on the relative entropy for a given input
/// distribution `pi` and a strictly positive candidate `q` in the hull.
pub fn elr_lower_bound<T: Real>(
    p: &Behavior<T>,
    catalogue: &VertexCatalogue<T>,
    pi: &[T],
    q: &Behavior<T>,
) -> Result<T> {
    let kernel = Kernel::new(p, catalogue)?;
    if pi.len() != kernel.n_set {
        return Err(Error::dim("input distribution length"));
    }
    let mut kls = vec![T::zero(); kernel.n_set];
    kernel.setting_kls(q.table(), &mut kls);
    Ok(kernel.lower_bound(pi, q.table(), &kls))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behaviors::{pr_box, Scenario};
    use crate::polytopes::local_deterministic_vertices;

    #[test]
    fn pr_box_against_the_local_set() {
        let cat = local_deterministic_vertices::<f64>(&Scenario::chsh()).unwrap();
        let r = relative_entropy_nl(&pr_box(), &cat, &ElrConfig::default()).unwrap();
        let exact = (4.0f64 / 3.0).log2();
        assert!((r.value - exact).abs() < 1e-4, "{} vs {exact}", r.value);
        assert!(r.gap_certificate <= exact + 1e-12);
        let c = cross_check_elr(&pr_box(), &cat, 4000, 5).unwrap();
        assert!((c.value - exact).abs() < 1e-3, "{} vs {exact}", c.value);
    }

    #[test]
    fn vertex_input_is_free() {
        let cat = local_deterministic_vertices::<f64>(&Scenario::chsh()).unwrap();
        let r = relative_entropy_nl(&cat.vertices()[5], &cat, &ElrConfig::default()).unwrap();
        assert!(r.value < 1e-6, "{}", r.value);
    }
}

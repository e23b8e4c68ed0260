//! Steering assemblages `ϱ_{a|x}`, their classical-quantum states, LHS and
//! UR_ns feasibility, the relative entropy of steering, assemblage LOSR
//! maps and the verifiers for the no-broadcasting argument.

mod lhs;
mod losr;
mod steering;
mod verify;

pub use lhs::{
    is_unsteerable, is_urns, lhs_feasibility, FeasibilityConfig, FeasibilityStatus, LhsModel, ResponseCatalogue,
    SteeringFunctional, UnsteerabilityReport,
};
pub use losr::{apply_losr_assemblage, random_urns_losr, AssemblageLosr};
pub use steering::{relative_entropy_steering_ub, steering_ub_lhs, steering_ub_urns, FwConfig, SteeringBound};
pub use verify::{
    measured_image_distance, piani_check, prop3_check, random_lhs_assemblage, random_urns_assemblage, thm2_demo,
    thm2_demo_with, verify_appendix_c_lemmas, AppendixCConfig, AppendixCReport, AssemblageContractivity, LemmaCheck,
    PianiReport, Thm2Config, Thm2Report,
};

use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};

use crate::divergence::compositions;
use crate::error::{Error, Result};
use crate::quantum::{
    check_psd, quantum_relative_entropy, random_cptp_rng, random_density, relative_entropy_psd, CMatrix, KrausChannel,
    Povm,
};
use crate::scalar::Real;
use crate::tensor::ProbVector;

const PSD_TOL: f64 = 1e-10;
const NORMALIZATION_TOL: f64 = 1e-9;
const NS_TOL: f64 = 1e-9;
/// Tolerance of the broadcasting relation.
pub const BROADCAST_TOL: f64 = 1e-8;

/// Shape of one pair `(X_i, A_i, B_i)` of a quadripartite assemblage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wing {
    pub inputs: usize,
    pub outputs: usize,
    pub dim: usize,
}

/// Family of subnormalised states `ϱ_{a|x}` on Bob's system.
///
/// Quadripartite assemblages carry their pair structure in `wings`; the
/// flattened indices are `x = x0·r1 + x1`, `a = a0·s1 + a1` and Bob's system
/// is `B0 ⊗ B1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assemblage<T> {
    inputs: usize,
    outputs: usize,
    dim: usize,
    elements: Vec<CMatrix<T>>,
    wings: Option<[Wing; 2]>,
}

impl<T: Real> Assemblage<T> {
    /// Validated assemblage; `elements` is indexed `[x][a]`.
    pub fn new(inputs: usize, outputs: usize, dim: usize, elements: Vec<CMatrix<T>>) -> Result<Self> {
        let a = Self::from_raw(inputs, outputs, dim, elements)?;
        a.validate()?;
        Ok(a)
    }

    fn from_raw(inputs: usize, outputs: usize, dim: usize, elements: Vec<CMatrix<T>>) -> Result<Self> {
        if inputs == 0 || outputs == 0 || dim == 0 {
            return Err(Error::dim("assemblage alphabets and dimension must be positive"));
        }
        if elements.len() != inputs * outputs {
            return Err(Error::dim(format!("{} elements for {inputs} inputs and {outputs} outputs", elements.len())));
        }
        if elements.iter().any(|e| e.rows() != dim || !e.is_square()) {
            return Err(Error::dim(format!("elements must be {dim}x{dim}")));
        }
        Ok(Assemblage { inputs, outputs, dim, elements, wings: None })
    }

    /// Attaches a pair structure; alphabets and dimension must factor accordingly.
    pub fn with_wings(mut self, wings: [Wing; 2]) -> Result<Self> {
        let [w0, w1] = wings;
        if w0.inputs * w1.inputs != self.inputs || w0.outputs * w1.outputs != self.outputs || w0.dim * w1.dim != self.dim {
            return Err(Error::dim("wing shapes do not factor the assemblage"));
        }
        self.wings = Some(wings);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        for (i, e) in self.elements.iter().enumerate() {
            check_psd(e, PSD_TOL, &format!("element (x={}, a={})", i / self.outputs, i % self.outputs))?;
        }
        let reduced: Vec<CMatrix<T>> = (0..self.inputs).map(|x| self.reduced_state_at(x)).collect();
        for (x, rb) in reduced.iter().enumerate() {
            let tr = rb.trace().re;
            if (tr - T::one()).abs() > T::tol(NORMALIZATION_TOL) {
                return Err(Error::invalid(format!("input {x}: total trace {tr}")));
            }
            let drift = rb.max_abs_diff(&reduced[0]);
            if drift > T::tol(NS_TOL) {
                return Err(Error::Signalling { violation: drift.to_f64_lossy() });
            }
        }
        Ok(())
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn wings(&self) -> Option<[Wing; 2]> {
        self.wings
    }

    pub fn elements(&self) -> &[CMatrix<T>] {
        &self.elements
    }

    pub fn element(&self, x: usize, a: usize) -> &CMatrix<T> {
        &self.elements[x * self.outputs + a]
    }

    fn reduced_state_at(&self, x: usize) -> CMatrix<T> {
        let mut rb = CMatrix::zeros(self.dim, self.dim);
        for a in 0..self.outputs {
            rb = &rb + self.element(x, a);
        }
        rb
    }

    /// `ρ_B = Σ_a ϱ_{a|x}`, the same for every `x`.
    pub fn reduced_state(&self) -> CMatrix<T> {
        self.reduced_state_at(0)
    }

    /// `p(a|x) = tr ϱ_{a|x}`, indexed `[x][a]`.
    pub fn probabilities(&self) -> Vec<T> {
        self.elements.iter().map(|e| e.trace().re).collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.require_same_shape(other)?;
        Ok(self.elements.iter().zip(&other.elements).fold(T::zero(), |m, (a, b)| m.max(a.max_abs_diff(b))))
    }

    pub(crate) fn require_same_shape(&self, other: &Self) -> Result<()> {
        if (self.inputs, self.outputs, self.dim) != (other.inputs, other.outputs, other.dim) {
            return Err(Error::dim(format!(
                "assemblage shapes ({}, {}, {}) and ({}, {}, {})",
                self.inputs, self.outputs, self.dim, other.inputs, other.outputs, other.dim
            )));
        }
        Ok(())
    }

    /// `weight · self + (1 − weight) · other`.
    pub fn mix(&self, other: &Self, weight: T) -> Result<Self> {
        self.require_same_shape(other)?;
        let elements = self
            .elements
            .iter()
            .zip(&other.elements)
            .map(|(a, b)| {
                let mut m = a.scale(weight);
                m.add_scaled(T::one() - weight, b);
                m
            })
            .collect();
        Ok(Assemblage { elements, ..self.clone() })
    }

    pub(crate) fn require_wings(&self) -> Result<[Wing; 2]> {
        self.wings.ok_or_else(|| Error::pre("assemblage has no pair structure"))
    }

    /// Reduction onto pair `i`: `Σ_{a_other} tr_{B_other} ϱ_{a0a1|x0x1}`,
    /// required to be independent of the other pair's input within `tol`.
    pub fn marginal_pair(&self, pair: usize, tol: f64) -> Result<Assemblage<T>> {
        let [w0, w1] = self.require_wings()?;
        let (own, other) = if pair == 0 { (w0, w1) } else { (w1, w0) };
        let dims = [w0.dim, w1.dim];
        let mut elements = Vec::with_capacity(own.inputs * own.outputs);
        let mut worst = T::zero();
        for xo in 0..own.inputs {
            for ao in 0..own.outputs {
                let mut reference: Option<CMatrix<T>> = None;
                for xt in 0..other.inputs {
                    let mut acc = CMatrix::zeros(own.dim, own.dim);
                    for at in 0..other.outputs {
                        let (x, a) = if pair == 0 {
                            (xo * w1.inputs + xt, ao * w1.outputs + at)
                        } else {
                            (xt * w1.inputs + xo, at * w1.outputs + ao)
                        };
                        acc = &acc + &self.element(x, a).partial_trace(&dims, &[pair])?;
                    }
                    match &reference {
                        None => reference = Some(acc),
                        Some(r) => worst = worst.max(r.max_abs_diff(&acc)),
                    }
                }
                elements.push(reference.expect("at least one input"));
            }
        }
        if worst > T::tol(tol) {
            return Err(Error::Signalling { violation: worst.to_f64_lossy() });
        }
        Assemblage::from_raw(own.inputs, own.outputs, own.dim, elements)
    }

    pub fn to_json(&self) -> Value {
        let mut elements = Map::new();
        for x in 0..self.inputs {
            for a in 0..self.outputs {
                elements.insert(format!("{x},{a}"), self.element(x, a).to_json());
            }
        }
        let mut v = json!({ "r": self.inputs, "s": self.outputs, "dim": self.dim, "elements": elements });
        if let Some(w) = self.wings {
            v["wings"] = json!(w);
        }
        v
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let field = |k: &str| -> Result<usize> {
            v.get(k)
                .and_then(Value::as_u64)
                .map(|n| n as usize)
                .ok_or_else(|| Error::Parse(format!("assemblage is missing integer \"{k}\"")))
        };
        let (r, s, d) = (field("r")?, field("s")?, field("dim")?);
        let map = v
            .get("elements")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::Parse("assemblage is missing \"elements\"".into()))?;
        if map.len() != r * s {
            return Err(Error::Parse(format!("{} elements for r={r}, s={s}", map.len())));
        }
        let mut elements = Vec::with_capacity(r * s);
        for x in 0..r {
            for a in 0..s {
                let m = map.get(&format!("{x},{a}")).ok_or_else(|| Error::Parse(format!("missing element \"{x},{a}\"")))?;
                elements.push(CMatrix::from_json(m)?);
            }
        }
        let asm = Assemblage::new(r, s, d, elements)?;
        match v.get("wings") {
            None | Some(Value::Null) => Ok(asm),
            Some(w) => asm.with_wings(serde_json::from_value(w.clone())?),
        }
    }
}

impl<T: Real> Serialize for Assemblage<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for Assemblage<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Assemblage::from_json(&v).map_err(D::Error::custom)
    }
}

/// `ϱ_{a0a1|x0x1} = ϱ_{a0|x0} ⊗ ϱ'_{a1|x1}`.
pub fn product<T: Real>(p: &Assemblage<T>, q: &Assemblage<T>) -> Assemblage<T> {
    let mut elements = Vec::with_capacity(p.elements.len() * q.elements.len());
    for x0 in 0..p.inputs {
        for x1 in 0..q.inputs {
            for a0 in 0..p.outputs {
                for a1 in 0..q.outputs {
                    elements.push(p.element(x0, a0).kron(q.element(x1, a1)));
                }
            }
        }
    }
    let wings = [
        Wing { inputs: p.inputs, outputs: p.outputs, dim: p.dim },
        Wing { inputs: q.inputs, outputs: q.outputs, dim: q.dim },
    ];
    Assemblage {
        inputs: p.inputs * q.inputs,
        outputs: p.outputs * q.outputs,
        dim: p.dim * q.dim,
        elements,
        wings: Some(wings),
    }
}

/// `ϱ_{a|x} = tr_A[(Π_a^x ⊗ I) ρ_AB]`.
pub fn steering_from_state<T: Real>(rho_ab: &CMatrix<T>, alice: &[Povm<T>]) -> Result<Assemblage<T>> {
    let first = alice.first().ok_or_else(|| Error::invalid("no measurements"))?;
    let (da, s) = (first.dim(), first.len());
    if alice.iter().any(|p| p.dim() != da || p.len() != s) {
        return Err(Error::dim("measurements differ in dimension or outcome count"));
    }
    if rho_ab.rows() % da != 0 || !rho_ab.is_square() {
        return Err(Error::dim(format!("state of dimension {} with Alice of dimension {da}", rho_ab.rows())));
    }
    crate::quantum::check_density(rho_ab)?;
    let db = rho_ab.rows() / da;
    let id = CMatrix::identity(db);
    let mut elements = Vec::with_capacity(alice.len() * s);
    for povm in alice {
        for e in povm.effects() {
            let m = &e.kron(&id) * rho_ab;
            elements.push(m.partial_trace(&[da, db], &[1])?.hermitian_part());
        }
    }
    Assemblage::new(alice.len(), s, db, elements)
}

/// Two-qubit Werner state `v|ψ⁻⟩⟨ψ⁻| + (1 − v) I/4`.
pub fn werner_state<T: Real>(visibility: T) -> CMatrix<T> {
    let h = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let z = T::zero();
    let psi = [num_complex::Complex::new(z, z), num_complex::Complex::new(h, z), num_complex::Complex::new(-h, z), num_complex::Complex::new(z, z)];
    let mut m = CMatrix::outer(&psi, &psi).scale(visibility);
    m.add_scaled((T::one() - visibility) / T::lit(4.0), &CMatrix::identity(4));
    m
}

/// Werner-state assemblage with Alice measuring `σ_x` (input 0) and `σ_z`
/// (input 1): `ϱ_{a|x} = ¼(I ∓ v σ_x)` and `¼(I ∓ v σ_z)`.
pub fn werner_assemblage<T: Real>(visibility: T) -> Result<Assemblage<T>> {
    let alice = [Povm::qubit_axis([1.0, 0.0, 0.0]), Povm::qubit_axis([0.0, 0.0, 1.0])];
    steering_from_state(&werner_state(visibility), &alice)
}

/// Random `outcomes`-outcome POVM on dimension `dim` from a Gaussian isometry.
pub fn random_povm<T: Real, R: Rng + ?Sized>(rng: &mut R, dim: usize, outcomes: usize) -> Result<Povm<T>> {
    let ch: KrausChannel<T> = random_cptp_rng(rng, dim, 1, outcomes.max(dim))?;
    // group rank-one effects K†K into `outcomes` bins
    let ops = ch.kraus_ops();
    let mut effects = vec![CMatrix::zeros(dim, dim); outcomes];
    for (i, k) in ops.iter().enumerate() {
        effects[i % outcomes] = &effects[i % outcomes] + &(&k.adjoint() * k);
    }
    Povm::new(effects.into_iter().map(|e| e.hermitian_part()).collect())
}

/// Assemblage from a random `s ⊗ d` state and random `s`-outcome POVMs.
pub fn random_assemblage<T: Real, R: Rng + ?Sized>(rng: &mut R, r: usize, s: usize, d: usize) -> Result<Assemblage<T>> {
    let rho = random_density(rng, s * d, s * d);
    let povms = (0..r).map(|_| random_povm(rng, s, s)).collect::<Result<Vec<_>>>()?;
    steering_from_state(&rho, &povms)
}

/// Classical-quantum state `Σ_{x,a} π(x) |x⟩⟨x| ⊗ |a⟩⟨a| ⊗ ϱ_{a|x}` on `X ⊗ A ⊗ B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct CqState<T> {
    pub pi: ProbVector<T>,
    pub inputs: usize,
    pub outputs: usize,
    pub dim: usize,
    pub matrix: CMatrix<T>,
}

impl<T: Real> CqState<T> {
    /// Block `π(x) ϱ_{a|x}`.
    pub fn block(&self, x: usize, a: usize) -> CMatrix<T> {
        let off = (x * self.outputs + a) * self.dim;
        CMatrix::from_fn(self.dim, self.dim, |i, j| self.matrix[(off + i, off + j)])
    }
}

pub fn cq_state<T: Real>(asm: &Assemblage<T>, pi: &ProbVector<T>) -> Result<CqState<T>> {
    if pi.len() != asm.inputs {
        return Err(Error::dim(format!("input distribution of length {} for {} inputs", pi.len(), asm.inputs)));
    }
    let d = asm.dim;
    let n = asm.inputs * asm.outputs * d;
    let mut m = CMatrix::zeros(n, n);
    for x in 0..asm.inputs {
        let w = pi.weights()[x];
        for a in 0..asm.outputs {
            let off = (x * asm.outputs + a) * d;
            let e = asm.element(x, a);
            for i in 0..d {
                for j in 0..d {
                    m[(off + i, off + j)] = e[(i, j)] * w;
                }
            }
        }
    }
    Ok(CqState { pi: pi.clone(), inputs: asm.inputs, outputs: asm.outputs, dim: d, matrix: m })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssemblageKl<T> {
    pub value: T,
    pub argmax_input: usize,
    /// `S_Q(ρ_AB(x) ‖ σ_AB(x))` for every input.
    pub per_input: Vec<T>,
}

/// `Σ_a tr ϱ_{a|x}(log2 ϱ_{a|x} − log2 ς_{a|x})` for one input.
pub(crate) fn input_divergence<T: Real>(p: &Assemblage<T>, q: &Assemblage<T>, x: usize) -> Result<T> {
    let mut total = T::zero();
    for a in 0..p.outputs {
        total += relative_entropy_psd(p.element(x, a), q.element(x, a))?;
    }
    Ok(total.max(T::zero()))
}

/// `S_A(ϱ‖ς) = sup_π S_Q(ρ_XAB ‖ σ_XAB)`, attained at a point mass on the
/// worst input.
pub fn assemblage_kl<T: Real>(p: &Assemblage<T>, q: &Assemblage<T>) -> Result<AssemblageKl<T>> {
    p.require_same_shape(q)?;
    let per_input = (0..p.inputs).map(|x| input_divergence(p, q, x)).collect::<Result<Vec<T>>>()?;
    let (argmax_input, value) = per_input
        .iter()
        .copied()
        .enumerate()
        .fold((0, T::neg_infinity()), |acc, (x, v)| if v > acc.1 { (x, v) } else { acc });
    Ok(AssemblageKl { value, argmax_input, per_input })
}

/// Largest `S_Q` between the dense CQ states over the resolution-`n` grid of
/// input distributions.
pub fn assemblage_kl_grid<T: Real>(p: &Assemblage<T>, q: &Assemblage<T>, resolution: usize) -> Result<T> {
    p.require_same_shape(q)?;
    let mut best = T::neg_infinity();
    let mut failure = None;
    let mut counts = vec![0usize; p.inputs];
    compositions(resolution, p.inputs, &mut counts, 0, &mut |c| {
        let pi: Vec<T> = c.iter().map(|&k| T::from_usize_lossy(k) / T::from_usize_lossy(resolution)).collect();
        let run = || -> Result<T> {
            let pi = ProbVector::new(pi)?;
            quantum_relative_entropy(&cq_state(p, &pi)?.matrix, &cq_state(q, &pi)?.matrix)
        };
        match run() {
            Ok(v) => best = best.max(v),
            Err(e) => failure = Some(e),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(best),
    }
}

/// Whether both pair reductions of `asm4` equal `asm2` within [`BROADCAST_TOL`].
pub fn is_broadcast_assemblage<T: Real>(asm4: &Assemblage<T>, asm2: &Assemblage<T>) -> Result<bool> {
    let [w0, w1] = asm4.require_wings()?;
    let w = Wing { inputs: asm2.inputs, outputs: asm2.outputs, dim: asm2.dim };
    if w0 != w || w1 != w {
        return Err(Error::dim("broadcast pairs must match the original assemblage"));
    }
    for pair in 0..2 {
        match asm4.marginal_pair(pair, BROADCAST_TOL) {
            Ok(m) => {
                if m.max_abs_diff(asm2)? > T::tol(BROADCAST_TOL) {
                    return Ok(false);
                }
            }
            Err(Error::Signalling { .. }) => return Ok(false),
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::quantum::pauli;

    #[test]
    fn werner_elements_match_closed_form() {
        let v = 0.6;
        let asm = werner_assemblage::<f64>(v).unwrap();
        for (x, k) in [(0, 1), (1, 3)] {
            for a in 0..2 {
                let sign = if a == 0 { -1.0 } else { 1.0 };
                let mut expect = CMatrix::identity(2);
                expect.add_scaled(sign * v, &pauli(k));
                assert!(asm.element(x, a).max_abs_diff(&expect.scale(0.25)) < 1e-14);
            }
        }
    }

    #[test]
    fn product_is_broadcast_of_its_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_assemblage::<f64, _>(&mut rng, 2, 2, 2).unwrap();
        let b = random_assemblage::<f64, _>(&mut rng, 2, 2, 2).unwrap();
        assert!(is_broadcast_assemblage(&product(&a, &a), &a).unwrap());
        assert!(!is_broadcast_assemblage(&product(&a, &b), &a).unwrap());
        let m = product(&a, &b).marginal_pair(1, 1e-9).unwrap();
        assert!(m.max_abs_diff(&b).unwrap() < 1e-12);
    }

    #[test]
    fn kl_grid_agrees_with_max_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_assemblage::<f64, _>(&mut rng, 2, 2, 2).unwrap();
        let b = random_assemblage::<f64, _>(&mut rng, 2, 2, 2).unwrap();
        let kl = assemblage_kl(&a, &b).unwrap();
        let grid = assemblage_kl_grid(&a, &b, 1000).unwrap();
        assert!((kl.value - grid).abs() < 1e-9, "{} vs {grid}", kl.value);
        assert!(assemblage_kl(&a, &a).unwrap().value < 1e-12);
    }

    #[test]
    fn json_round_trip_keeps_wings() {
        let asm = werner_assemblage::<f64>(0.5).unwrap();
        let p = product(&asm, &asm);
        let back = Assemblage::<f64>::from_json(&p.to_json()).unwrap();
        assert_eq!(back.wings(), p.wings());
        assert!(back.max_abs_diff(&p).unwrap() < 1e-15);
    }
}

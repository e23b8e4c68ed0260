//! LOSR maps from a bipartite assemblage to the quadripartite broadcast
//! scenario: `r(λ)`, Alice's pre/post-processing per `λ`, and a channel
//! `E_λ : B → B0 ⊗ B1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lhs::{LhsModel, ResponseCatalogue};
use super::{Assemblage, Wing};
use crate::error::{Error, Result};
use crate::losr::{relabelling_wing, structured_wing, WingTables};
use crate::polytopes::{membership, ns_vertices_222};
use crate::quantum::{random_cptp_rng, CMatrix, KrausChannel};
use crate::sampling::dirichlet;
use crate::scalar::Real;
use crate::tensor::ProbVector;
use crate::behaviors::{Behavior, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct AssemblageLosr<T> {
    input: Wing,
    output: [Wing; 2],
    lambda_weights: ProbVector<T>,
    /// `pre [x0x1][x]`, `post [x0x1][x][a][a0a1]` per `λ`.
    alice: Vec<WingTables<T>>,
    channels: Vec<KrausChannel<T>>,
}

impl<T: Real> AssemblageLosr<T> {
    pub fn new(
        input: Wing,
        output: [Wing; 2],
        lambda_weights: ProbVector<T>,
        alice: Vec<WingTables<T>>,
        channels: Vec<KrausChannel<T>>,
    ) -> Result<Self> {
        let n = lambda_weights.len();
        if alice.len() != n || channels.len() != n {
            return Err(Error::dim("one table set and one channel per shared-randomness value"));
        }
        let xin = output[0].inputs * output[1].inputs;
        let aout = output[0].outputs * output[1].outputs;
        for (l, (t, ch)) in alice.iter().zip(&channels).enumerate() {
            if t.pre.len() != xin * input.inputs || t.post.len() != xin * input.inputs * input.outputs * aout {
                return Err(Error::dim(format!("λ={l}: tables do not match the scenarios")));
            }
            for (i, row) in t.pre.chunks(input.inputs).chain(t.post.chunks(aout)).enumerate() {
                let total: T = row.iter().copied().sum();
                if row.iter().any(|&v| v < -T::tol(1e-10)) || (total - T::one()).abs() > T::tol(1e-10) {
                    return Err(Error::invalid(format!("λ={l}: row {i} is not a distribution")));
                }
            }
            if ch.input_dim() != input.dim || ch.output_dim() != output[0].dim * output[1].dim {
                return Err(Error::dim(format!("λ={l}: channel dimensions do not match")));
            }
        }
        Ok(AssemblageLosr { input, output, lambda_weights, alice, channels })
    }

    pub fn input(&self) -> Wing {
        self.input
    }

    pub fn output(&self) -> [Wing; 2] {
        self.output
    }

    pub fn lambda_weights(&self) -> &ProbVector<T> {
        &self.lambda_weights
    }

    pub fn alice(&self) -> &[WingTables<T>] {
        &self.alice
    }

    pub fn channels(&self) -> &[KrausChannel<T>] {
        &self.channels
    }

    /// `ϱ_{a0a1|x0x1} = Σ_λ r(λ) Σ_{x,a} π(x|x0x1,λ) χ(a0a1|x0x1,x,a,λ) E_λ(ϱ_{a|x})`.
    pub fn apply(&self, asm: &Assemblage<T>) -> Result<Assemblage<T>> {
        let inp = self.input;
        if (asm.num_inputs(), asm.num_outputs(), asm.dim()) != (inp.inputs, inp.outputs, inp.dim) {
            return Err(Error::dim("assemblage does not match the map's input scenario"));
        }
        let xin = self.output[0].inputs * self.output[1].inputs;
        let aout = self.output[0].outputs * self.output[1].outputs;
        let dout = self.output[0].dim * self.output[1].dim;
        let mut out = vec![CMatrix::zeros(dout, dout); xin * aout];
        for (l, (&r, t)) in self.lambda_weights.weights().iter().zip(&self.alice).enumerate() {
            if r == T::zero() {
                continue;
            }
            let mapped = asm.elements().iter().map(|e| self.channels[l].apply(e)).collect::<Result<Vec<_>>>()?;
            for xw in 0..xin {
                for x in 0..inp.inputs {
                    let px = t.pre[xw * inp.inputs + x];
                    if px == T::zero() {
                        continue;
                    }
                    for a in 0..inp.outputs {
                        let base = ((xw * inp.inputs + x) * inp.outputs + a) * aout;
                        for aw in 0..aout {
                            let w = r * px * t.post[base + aw];
                            if w != T::zero() {
                                out[xw * aout + aw].add_scaled(w, &mapped[x * inp.outputs + a]);
                            }
                        }
                    }
                }
            }
        }
        let out = out.iter().map(CMatrix::hermitian_part).collect();
        Assemblage::new(xin, aout, dout, out)?.with_wings(self.output)
    }

    /// Image of an LHS model: the response `Σ_{x,a} π χ D_μ(a|x)` of every
    /// `(λ, μ)` pair, split over the no-signalling vertices by linear
    /// programming, carrying the hidden state `r(λ) E_λ(σ_μ)`.
    pub fn transport_model(&self, model: &LhsModel<T>) -> Result<LhsModel<T>> {
        let out = self.output;
        if [out[0].inputs, out[0].outputs, out[1].inputs, out[1].outputs] != [2, 2, 2, 2] {
            return Err(Error::pre("transport targets binary pairs"));
        }
        let inp = self.input;
        let cat = ResponseCatalogue::ns_wing_222();
        let ns = ns_vertices_222::<T>();
        let dout = out[0].dim * out[1].dim;
        let mut states = vec![CMatrix::zeros(dout, dout); cat.len()];
        for (l, (&r, t)) in self.lambda_weights.weights().iter().zip(&self.alice).enumerate() {
            if r == T::zero() {
                continue;
            }
            for (q, sigma) in model.catalogue.responses.iter().zip(&model.states) {
                if sigma.trace().re <= T::zero() {
                    continue;
                }
                let mut resp = vec![T::zero(); 16];
                for xw in 0..4 {
                    for x in 0..inp.inputs {
                        for a in 0..inp.outputs {
                            let w = t.pre[xw * inp.inputs + x] * q[x * inp.outputs + a];
                            if w == T::zero() {
                                continue;
                            }
                            let base = ((xw * inp.inputs + x) * inp.outputs + a) * 4;
                            for aw in 0..4 {
                                resp[xw * 4 + aw] += w * t.post[base + aw];
                            }
                        }
                    }
                }
                let b = Behavior::new(Scenario::chsh(), resp)?;
                let m = membership(&b, &ns, T::tol(1e-9))?;
                let weights = m.weights.ok_or_else(|| Error::pre("transported response leaves the no-signalling set"))?;
                let image = self.channels[l].apply(sigma)?;
                for (v, &w) in weights.iter().enumerate() {
                    if w > T::zero() {
                        states[v].add_scaled(r * w, &image);
                    }
                }
            }
        }
        Ok(LhsModel { catalogue: cat, states })
    }
}

pub fn apply_losr_assemblage<T: Real>(map: &AssemblageLosr<T>, asm: &Assemblage<T>) -> Result<Assemblage<T>> {
    map.apply(asm)
}

/// Random LOSR map from a binary-input, binary-output assemblage on a
/// `dim`-dimensional system to the broadcast scenario with pairs of the same
/// shape. Alice's wirings use the structured modes that keep unsteerable
/// inputs inside UR_ns. The first `λ` is a relabelling routed to one pair
/// with an isometric channel, so images of steerable inputs stay steerable;
/// the others are random.
pub fn random_urns_losr<T: Real>(seed: u64, dim: usize, lambda: usize) -> Result<AssemblageLosr<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = ProbVector::new(dirichlet::<T, _>(&mut rng, lambda, 1.0))?;
    let mut alice = Vec::with_capacity(lambda);
    let mut channels = Vec::with_capacity(lambda);
    for l in 0..lambda {
        let (tables, rank) = if l == 0 {
            (relabelling_wing(&mut rng), 1)
        } else {
            let mode = rng.random_range(0..3);
            (structured_wing(&mut rng, mode), 1 + rng.random_range(0..dim * dim))
        };
        alice.push(tables);
        channels.push(random_cptp_rng(&mut rng, dim, dim * dim, rank)?);
    }
    let w = Wing { inputs: 2, outputs: 2, dim };
    AssemblageLosr::new(w, [w, w], weights, alice, channels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemblages::{is_urns, werner_assemblage, FeasibilityConfig, FeasibilityStatus};
    use crate::quantum::random_density;

    #[test]
    fn append_state_map_extends_the_assemblage() {
        let asm = werner_assemblage::<f64>(0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tau = random_density::<f64, _>(&mut rng, 2, 2);
        // x = x0, a0 = a, a1 = 0
        let mut pre = vec![0.0; 8];
        let mut post = vec![0.0; 4 * 2 * 2 * 4];
        for xw in 0..4 {
            let x0 = xw / 2;
            pre[xw * 2 + x0] = 1.0;
            for x in 0..2 {
                for a in 0..2 {
                    post[((xw * 2 + x) * 2 + a) * 4 + a * 2] = 1.0;
                }
            }
        }
        let w = Wing { inputs: 2, outputs: 2, dim: 2 };
        let map = AssemblageLosr::new(
            w,
            [w, w],
            ProbVector::point(1, 0),
            vec![WingTables { pre, post }],
            vec![KrausChannel::append_state(2, &tau).unwrap()],
        )
        .unwrap();
        let out = map.apply(&asm).unwrap();
        for x0 in 0..2 {
            for x1 in 0..2 {
                for a0 in 0..2 {
                    let expect = asm.element(x0, a0).kron(&tau);
                    assert!(out.element(x0 * 2 + x1, a0 * 2).max_abs_diff(&expect) < 1e-14);
                    assert!(out.element(x0 * 2 + x1, a0 * 2 + 1).max_abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn unsteerable_inputs_stay_in_urns() {
        let asm = werner_assemblage::<f64>(0.4).unwrap();
        for seed in 0..3 {
            let map = random_urns_losr::<f64>(seed, 2, 3).unwrap();
            let out = map.apply(&asm).unwrap();
            let r = is_urns(&out, &FeasibilityConfig::default()).unwrap();
            assert_eq!(r.status, FeasibilityStatus::ModelFound, "seed {seed}");
        }
    }
}

//! LOSR wirings in the shared-randomness canonical form.
//!
//! For each value of the shared variable `λ`, each wing has a pre-processing
//! table `π(x | x_wing, λ)` choosing the input fed to its half of the
//! original box, and a post-processing table `χ(a_wing | x_wing, x, a, λ)`
//! producing the wing's outputs. The wings share nothing but `λ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::behaviors::{nest, unnest, wing_product, Behavior, Scenario};
use crate::divergence::box_kl;
use crate::error::{Error, Result};
use crate::polytopes::{membership_many, VertexCatalogue};
use crate::sampling::{dirichlet, stochastic_rows};
use crate::scalar::Real;
use crate::tensor::ProbVector;

/// Largest supported number of shared-randomness values.
pub const LAMBDA_CAP: usize = 64;
/// Default number of shared-randomness values for random maps.
pub const DEFAULT_LAMBDA: usize = 4;
const STOCHASTIC_TOL: f64 = 1e-10;

/// One wing's tables for a single `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct WingTables<T> {
    /// `[x_wing][x]`.
    pub pre: Vec<T>,
    /// `[x_wing][x][a][a_wing]`.
    pub post: Vec<T>,
}

/// Alphabet sizes of one wing: new joint input/output, original input/output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct WingDims {
    new_in: usize,
    new_out: usize,
    old_in: usize,
    old_out: usize,
}

impl WingDims {
    fn check<T: Real>(&self, t: &WingTables<T>, who: &str) -> Result<()> {
        if t.pre.len() != self.new_in * self.old_in
            || t.post.len() != self.new_in * self.old_in * self.old_out * self.new_out
        {
            return Err(Error::dim(format!("{who} tables do not match the scenarios")));
        }
        check_rows(&t.pre, self.old_in, &format!("{who} pre-processing"))?;
        check_rows(&t.post, self.new_out, &format!("{who} post-processing"))
    }
}

fn check_rows<T: Real>(table: &[T], width: usize, what: &str) -> Result<()> {
    for (i, row) in table.chunks(width).enumerate() {
        let total: T = row.iter().copied().sum();
        if row.iter().any(|&v| v < -T::tol(STOCHASTIC_TOL) || !v.is_finite())
            || (total - T::one()).abs() > T::tol(STOCHASTIC_TOL)
        {
            return Err(Error::invalid(format!("{what}: row {i} is not a distribution")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LosrMap<T> {
    input: Scenario,
    output: Scenario,
    lambda_weights: ProbVector<T>,
    alice: Vec<WingTables<T>>,
    bob: Vec<WingTables<T>>,
}

fn wing_dims(input: &Scenario, output: &Scenario) -> [WingDims; 2] {
    let i = input.wing_alphabets();
    let o = output.wing_alphabets();
    [0, 1].map(|w| WingDims {
        new_in: o[w].0,
        new_out: o[w].1,
        old_in: i[w].0,
        old_out: i[w].1,
    })
}

impl<T: Real> LosrMap<T> {
    pub fn new(
        input: Scenario,
        output: Scenario,
        lambda_weights: ProbVector<T>,
        alice: Vec<WingTables<T>>,
        bob: Vec<WingTables<T>>,
    ) -> Result<Self> {
        let n = lambda_weights.len();
        if n > LAMBDA_CAP {
            return Err(Error::invalid(format!("{n} shared-randomness values exceed the cap of {LAMBDA_CAP}")));
        }
        if alice.len() != n || bob.len() != n {
            return Err(Error::dim("one set of wing tables per λ is required"));
        }
        let [da, db] = wing_dims(&input, &output);
        for (ta, tb) in alice.iter().zip(&bob) {
            da.check(ta, "Alice")?;
            db.check(tb, "Bob")?;
        }
        Ok(Self {
            input,
            output,
            lambda_weights,
            alice,
            bob,
        })
    }

    pub fn input_scenario(&self) -> &Scenario {
        &self.input
    }

    pub fn output_scenario(&self) -> &Scenario {
        &self.output
    }

    pub fn lambda_weights(&self) -> &ProbVector<T> {
        &self.lambda_weights
    }

    pub fn alice(&self) -> &[WingTables<T>] {
        &self.alice
    }

    pub fn bob(&self) -> &[WingTables<T>] {
        &self.bob
    }

    /// Builds a map from joint per-`λ` tables, accepting it only if both
    /// tables factorize across the wings.
    ///
    /// `pre[λ]` is `I(x, y | x_A, x_B)` laid out `[x_A][x_B][x][y]`; `post[λ]`
    /// is `O(a_A, a_B | x_A, x_B, x, y, a, b)` laid out
    /// `[x_A][x_B][x][y][a][b][a_A][a_B]`.
    pub fn from_joint_tables(
        input: Scenario,
        output: Scenario,
        lambda_weights: ProbVector<T>,
        pre: &[Vec<T>],
        post: &[Vec<T>],
    ) -> Result<Self> {
        let [da, db] = wing_dims(&input, &output);
        let tol = T::tol(STOCHASTIC_TOL);
        let mut alice = Vec::with_capacity(pre.len());
        let mut bob = Vec::with_capacity(pre.len());
        for (l, (i_tab, o_tab)) in pre.iter().zip(post).enumerate() {
            let (xa_n, xb_n, x_n, y_n) = (da.new_in, db.new_in, da.old_in, db.old_in);
            if i_tab.len() != xa_n * xb_n * x_n * y_n {
                return Err(Error::dim(format!("joint pre-processing table {l}")));
            }
            let i_at = |xa: usize, xb: usize, x: usize, y: usize| i_tab[((xa * xb_n + xb) * x_n + x) * y_n + y];
            let mut pa = vec![T::zero(); xa_n * x_n];
            let mut pb = vec![T::zero(); xb_n * y_n];
            for xa in 0..xa_n {
                for x in 0..x_n {
                    pa[xa * x_n + x] = (0..y_n).map(|y| i_at(xa, 0, x, y)).sum();
                }
            }
            for xb in 0..xb_n {
                for y in 0..y_n {
                    pb[xb * y_n + y] = (0..x_n).map(|x| i_at(0, xb, x, y)).sum();
                }
            }
            for xa in 0..xa_n {
                for xb in 0..xb_n {
                    for x in 0..x_n {
                        for y in 0..y_n {
                            if (i_at(xa, xb, x, y) - pa[xa * x_n + x] * pb[xb * y_n + y]).abs() > tol {
                                return Err(Error::pre(format!(
                                    "pre-processing at λ={l} correlates the wings beyond the shared variable"
                                )));
                            }
                        }
                    }
                }
            }

            let (a_n, b_n, aa_n, ab_n) = (da.old_out, db.old_out, da.new_out, db.new_out);
            if o_tab.len() != xa_n * xb_n * x_n * y_n * a_n * b_n * aa_n * ab_n {
                return Err(Error::dim(format!("joint post-processing table {l}")));
            }
            let o_at = |xa: usize, xb: usize, x: usize, y: usize, a: usize, b: usize, aa: usize, ab: usize| {
                o_tab[((((((xa * xb_n + xb) * x_n + x) * y_n + y) * a_n + a) * b_n + b) * aa_n + aa) * ab_n + ab]
            };
            let mut qa = vec![T::zero(); xa_n * x_n * a_n * aa_n];
            let mut qb = vec![T::zero(); xb_n * y_n * b_n * ab_n];
            for xa in 0..xa_n {
                for x in 0..x_n {
                    for a in 0..a_n {
                        for aa in 0..aa_n {
                            qa[((xa * x_n + x) * a_n + a) * aa_n + aa] =
                                (0..ab_n).map(|ab| o_at(xa, 0, x, 0, a, 0, aa, ab)).sum();
                        }
                    }
                }
            }
            for xb in 0..xb_n {
                for y in 0..y_n {
                    for b in 0..b_n {
                        for ab in 0..ab_n {
                            qb[((xb * y_n + y) * b_n + b) * ab_n + ab] =
                                (0..aa_n).map(|aa| o_at(0, xb, 0, y, 0, b, aa, ab)).sum();
                        }
                    }
                }
            }
            for xa in 0..xa_n {
                for xb in 0..xb_n {
                    for x in 0..x_n {
                        for y in 0..y_n {
                            for a in 0..a_n {
                                for b in 0..b_n {
                                    for aa in 0..aa_n {
                                        for ab in 0..ab_n {
                                            let want = qa[((xa * x_n + x) * a_n + a) * aa_n + aa]
                                                * qb[((xb * y_n + y) * b_n + b) * ab_n + ab];
                                            if (o_at(xa, xb, x, y, a, b, aa, ab) - want).abs() > tol {
                                                return Err(Error::pre(format!(
                                                    "post-processing at λ={l} lets one wing's outputs depend on the other wing"
                                                )));
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            alice.push(WingTables { pre: pa, post: qa });
            bob.push(WingTables { pre: pb, post: qb });
        }
        Self::new(input, output, lambda_weights, alice, bob)
    }

    /// The map ignoring its input and emitting `V_A ⊗ V_B`.
    pub fn constant(input: Scenario, va: &Behavior<T>, vb: &Behavior<T>) -> Result<Self> {
        let output = wing_product(va, vb).scenario().clone();
        let [da, db] = wing_dims(&input, &output);
        let wing = |d: WingDims, v: &Behavior<T>| {
            let mut pre = vec![T::zero(); d.new_in * d.old_in];
            let mut post = Vec::with_capacity(d.new_in * d.old_in * d.old_out * d.new_out);
            for xw in 0..d.new_in {
                pre[xw * d.old_in] = T::one();
                for _ in 0..d.old_in * d.old_out {
                    post.extend_from_slice(v.setting(xw));
                }
            }
            WingTables { pre, post }
        };
        Self::new(
            input,
            output,
            ProbVector::point(1, 0),
            vec![wing(da, va)],
            vec![wing(db, vb)],
        )
    }

    /// Feeds `x_0` to the box and copies its output to both sub-parties of
    /// each wing, from a (2,2,2) box to the `A0A1|B0B1` scenario.
    pub fn copy_wiring() -> Self {
        let wing = || {
            let mut pre = vec![T::zero(); 4 * 2];
            let mut post = vec![T::zero(); 4 * 2 * 2 * 4];
            for x0 in 0..2 {
                for x1 in 0..2 {
                    let xw = x0 * 2 + x1;
                    pre[xw * 2 + x0] = T::one();
                    for x in 0..2 {
                        for a in 0..2 {
                            post[((xw * 2 + x) * 2 + a) * 4 + a * 2 + a] = T::one();
                        }
                    }
                }
            }
            WingTables { pre, post }
        };
        Self::new(
            Scenario::chsh(),
            Scenario::broadcast(2, 2),
            ProbVector::point(1, 0),
            vec![wing()],
            vec![wing()],
        )
        .expect("valid wiring")
    }

    /// Applies the map to a box over the input scenario.
    pub fn apply(&self, p: &Behavior<T>) -> Result<Behavior<T>> {
        if p.scenario() != &self.input {
            return Err(Error::dim(format!(
                "map expects {:?}, got {:?}",
                self.input,
                p.scenario()
            )));
        }
        let [da, db] = wing_dims(&self.input, &self.output);
        let n_out = da.new_out * db.new_out;
        let mut table = vec![T::zero(); self.output.table_len()];
        let pt = p.table();
        for (l, &r) in self.lambda_weights.weights().iter().enumerate() {
            if r <= T::zero() {
                continue;
            }
            let (ta, tb) = (&self.alice[l], &self.bob[l]);
            for xa in 0..da.new_in {
                for xb in 0..db.new_in {
                    let out = &mut table[(xa * db.new_in + xb) * n_out..][..n_out];
                    for x in 0..da.old_in {
                        let pa = ta.pre[xa * da.old_in + x];
                        if pa <= T::zero() {
                            continue;
                        }
                        for y in 0..db.old_in {
                            let pb = tb.pre[xb * db.old_in + y];
                            if pb <= T::zero() {
                                continue;
                            }
                            let c = r * pa * pb;
                            let row = &pt[(x * db.old_in + y) * da.old_out * db.old_out..];
                            for a in 0..da.old_out {
                                let ca = &ta.post[((xa * da.old_in + x) * da.old_out + a) * da.new_out..][..da.new_out];
                                for b in 0..db.old_out {
                                    let d = c * row[a * db.old_out + b];
                                    if d <= T::zero() {
                                        continue;
                                    }
                                    let cb = &tb.post[((xb * db.old_in + y) * db.old_out + b) * db.new_out..][..db.new_out];
                                    for (aa, &ea) in ca.iter().enumerate() {
                                        let e = d * ea;
                                        if e == T::zero() {
                                            continue;
                                        }
                                        for (ab, &eb) in cb.iter().enumerate() {
                                            out[aa * db.new_out + ab] += e * eb;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Behavior::new(self.output.clone(), table)
    }
}

/// Sizes for [`random_losr`].
#[derive(Debug, Clone, PartialEq)]
pub struct LosrSizes {
    pub input: Scenario,
    pub output: Scenario,
    pub lambda: usize,
}

impl Default for LosrSizes {
    fn default() -> Self {
        Self {
            input: Scenario::chsh(),
            output: Scenario::broadcast(2, 2),
            lambda: DEFAULT_LAMBDA,
        }
    }
}

/// Map with every table drawn from a flat Dirichlet distribution.
pub fn random_losr<T: Real>(seed: u64, sizes: &LosrSizes) -> Result<LosrMap<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [da, db] = wing_dims(&sizes.input, &sizes.output);
    let lambda = ProbVector::new(dirichlet::<T, _>(&mut rng, sizes.lambda, 1.0))?;
    let mut wing = |d: WingDims| WingTables {
        pre: stochastic_rows(&mut rng, d.new_in, d.old_in),
        post: stochastic_rows(&mut rng, d.new_in * d.old_in * d.old_out, d.new_out),
    };
    let (mut alice, mut bob) = (Vec::new(), Vec::new());
    for _ in 0..sizes.lambda {
        alice.push(wing(da));
        bob.push(wing(db));
    }
    LosrMap::new(sizes.input.clone(), sizes.output.clone(), lambda, alice, bob)
}

/// Wing tables for one `λ` whose images of deterministic inputs are
/// non-signalling between the two sub-parties.
///
/// Mode 0: the box input follows `x0`; `a0` reads `(x0, x, a)`; `a1` reads `x1` only.
/// Mode 1: the same with the sub-parties swapped.
/// Mode 2: a fixed box input; `a0` reads `(x0, x, a)` and `a1` reads `(x1, x, a)`.
pub(crate) fn structured_wing<T: Real, R: Rng + ?Sized>(rng: &mut R, mode: usize) -> WingTables<T> {
    let mut pre = vec![T::zero(); 4 * 2];
    let mut post = vec![T::zero(); 4 * 2 * 2 * 4];
    let route: Vec<T> = stochastic_rows(rng, 2, 2);
    let fixed = rng.random_range(0..2);
    // per sub-party response tables indexed [own input][x][a][own output]
    let informed0: Vec<T> = stochastic_rows(rng, 8, 2);
    let informed1: Vec<T> = stochastic_rows(rng, 8, 2);
    let blind0: Vec<T> = stochastic_rows(rng, 2, 2);
    let blind1: Vec<T> = stochastic_rows(rng, 2, 2);
    for x0 in 0..2 {
        for x1 in 0..2 {
            let xw = x0 * 2 + x1;
            for x in 0..2 {
                pre[xw * 2 + x] = match mode {
                    0 => route[x0 * 2 + x],
                    1 => route[x1 * 2 + x],
                    _ => {
                        if x == fixed {
                            T::one()
                        } else {
                            T::zero()
                        }
                    }
                };
                for a in 0..2 {
                    for a0 in 0..2 {
                        for a1 in 0..2 {
                            let i0 = informed0[((x0 * 2 + x) * 2 + a) * 2 + a0];
                            let i1 = informed1[((x1 * 2 + x) * 2 + a) * 2 + a1];
                            let v = match mode {
                                0 => i0 * blind1[x1 * 2 + a1],
                                1 => blind0[x0 * 2 + a0] * i1,
                                _ => i0 * i1,
                            };
                            post[((xw * 2 + x) * 2 + a) * 4 + a0 * 2 + a1] = v;
                        }
                    }
                }
            }
        }
    }
    WingTables { pre, post }
}

/// `x = x_k ⊕ s`, `a_k = a ⊕ t(x_k)` for a random pair `k`; the other
/// pair answers with a random function of its own input.
pub(crate) fn relabelling_wing<T: Real, R: Rng + ?Sized>(rng: &mut R) -> WingTables<T> {
    let k = rng.random_range(0..2);
    let s = rng.random_range(0..2);
    let t = [rng.random_range(0..2), rng.random_range(0..2)];
    let blind = [rng.random_range(0..2), rng.random_range(0..2)];
    let mut pre = vec![T::zero(); 8];
    let mut post = vec![T::zero(); 64];
    for x0 in 0..2 {
        for x1 in 0..2 {
            let xw = x0 * 2 + x1;
            let (own, other) = if k == 0 { (x0, x1) } else { (x1, x0) };
            pre[xw * 2 + (own ^ s)] = T::one();
            for x in 0..2 {
                for a in 0..2 {
                    let (ak, ao) = (a ^ t[own], blind[other]);
                    let (a0, a1) = if k == 0 { (ak, ao) } else { (ao, ak) };
                    post[((xw * 2 + x) * 2 + a) * 4 + a0 * 2 + a1] = T::one();
                }
            }
        }
    }
    WingTables { pre, post }
}

/// Random wiring from a (2,2,2) box to the `A0A1|B0B1` scenario built to
/// keep local inputs inside LR_ns. The first `λ` relabels the box into one
/// pair on each wing; for the others each wing picks one of three wiring
/// modes.
pub fn random_lrns_losr<T: Real>(seed: u64, lambda: usize) -> Result<LosrMap<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = ProbVector::new(dirichlet::<T, _>(&mut rng, lambda, 1.0))?;
    let (mut alice, mut bob) = (Vec::new(), Vec::new());
    if lambda > 0 {
        alice.push(relabelling_wing(&mut rng));
        bob.push(relabelling_wing(&mut rng));
    }
    for _ in 1..lambda {
        let ma = rng.random_range(0..3);
        let mb = rng.random_range(0..3);
        alice.push(structured_wing(&mut rng, ma));
        bob.push(structured_wing(&mut rng, mb));
    }
    LosrMap::new(Scenario::chsh(), Scenario::broadcast(2, 2), weights, alice, bob)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreservationReport<T> {
    pub preserved: bool,
    /// Index of an input vertex whose image leaves the target set.
    pub offending_vertex: Option<usize>,
    /// Largest separation margin among images found outside (zero if none).
    pub worst_margin: T,
    pub vertices_checked: usize,
}

/// Whether `m` maps every vertex of `inputs` into the hull of `target`.
///
/// `apply` is linear, so this decides preservation of the whole hull.
pub fn preserves_lrns<T: Real>(
    m: &LosrMap<T>,
    inputs: &VertexCatalogue<T>,
    target: &VertexCatalogue<T>,
) -> Result<PreservationReport<T>> {
    let images = inputs
        .vertices()
        .iter()
        .map(|v| m.apply(v))
        .collect::<Result<Vec<_>>>()?;
    let results = membership_many(&images, target, T::tol(1e-9));
    let mut report = PreservationReport {
        preserved: true,
        offending_vertex: None,
        worst_margin: T::zero(),
        vertices_checked: images.len(),
    };
    for (i, r) in results.into_iter().enumerate() {
        let r = r?;
        if !r.inside {
            report.preserved = false;
            report.offending_vertex.get_or_insert(i);
            report.worst_margin = report.worst_margin.max(r.margin);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractivityReport<T> {
    pub before: T,
    pub after: T,
    pub holds: bool,
}

/// `S_b(M(P) || M(Q)) ≤ S_b(P || Q) + 1e-9`.
pub fn contractivity_check<T: Real>(m: &LosrMap<T>, p: &Behavior<T>, q: &Behavior<T>) -> Result<ContractivityReport<T>> {
    let before = box_kl(p, q)?.value;
    let after = box_kl(&m.apply(p)?, &m.apply(q)?)?.value;
    let holds = after <= before + T::tol(1e-9) || (before.is_infinite() && before > T::zero());
    Ok(ContractivityReport { before, after, holds })
}

#[derive(Serialize, Deserialize)]
struct LosrRepr {
    input: Scenario,
    output: Scenario,
    lambda_weights: Vec<f64>,
    alice_pre: Value,
    alice_post: Value,
    bob_pre: Value,
    bob_post: Value,
}

impl<T: Real> Serialize for LosrMap<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let [da, db] = wing_dims(&self.input, &self.output);
        let n = self.lambda_weights.len();
        let flat = |tabs: &[WingTables<T>], pre: bool| -> Vec<f64> {
            tabs.iter()
                .flat_map(|t| if pre { &t.pre } else { &t.post }.iter().map(|v| v.to_f64_lossy()))
                .collect()
        };
        let pre_dims = |d: WingDims| vec![n, d.new_in, d.old_in];
        let post_dims = |d: WingDims| vec![n, d.new_in, d.old_in, d.old_out, d.new_out];
        LosrRepr {
            input: self.input.clone(),
            output: self.output.clone(),
            lambda_weights: self.lambda_weights.weights().iter().map(|v| v.to_f64_lossy()).collect(),
            alice_pre: nest(&flat(&self.alice, true), &pre_dims(da)),
            alice_post: nest(&flat(&self.alice, false), &post_dims(da)),
            bob_pre: nest(&flat(&self.bob, true), &pre_dims(db)),
            bob_post: nest(&flat(&self.bob, false), &post_dims(db)),
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for LosrMap<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = LosrRepr::deserialize(d)?;
        let [da, db] = wing_dims(&repr.input, &repr.output);
        let n = repr.lambda_weights.len();
        let conv = |v: Vec<f64>| -> Vec<T> { v.into_iter().map(T::lit).collect() };
        let read = |v: &Value, dims: Vec<usize>| -> std::result::Result<Vec<T>, D::Error> {
            let mut out = Vec::new();
            unnest(v, &dims, &mut out).map_err(D::Error::custom)?;
            Ok(conv(out))
        };
        let wings = |pre: &Value, post: &Value, dd: WingDims| -> std::result::Result<Vec<WingTables<T>>, D::Error> {
            let pre = read(pre, vec![n, dd.new_in, dd.old_in])?;
            let post = read(post, vec![n, dd.new_in, dd.old_in, dd.old_out, dd.new_out])?;
            let (lp, lq) = (pre.len() / n.max(1), post.len() / n.max(1));
            Ok((0..n)
                .map(|l| WingTables {
                    pre: pre[l * lp..(l + 1) * lp].to_vec(),
                    post: post[l * lq..(l + 1) * lq].to_vec(),
                })
                .collect())
        };
        let alice = wings(&repr.alice_pre, &repr.alice_post, da)?;
        let bob = wings(&repr.bob_pre, &repr.bob_post, db)?;
        let lambda = ProbVector::new(conv(repr.lambda_weights)).map_err(D::Error::custom)?;
        LosrMap::new(repr.input, repr.output, lambda, alice, bob).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behaviors::{deterministic, pr_box};
    use crate::polytopes::{local_deterministic_vertices, lrns_vertices_broadcast_222, ns_vertices_222};

    #[test]
    fn copy_wiring_keeps_deterministic_boxes_deterministic() {
        let d = deterministic::<f64>(Scenario::chsh(), &[vec![0, 1], vec![1, 1]]).unwrap();
        let out = LosrMap::copy_wiring().apply(&d).unwrap();
        assert!(out.table().iter().all(|&v| v == 0.0 || v == 1.0));
        assert_eq!(out.value(&[1, 0, 0, 1], &[1, 1, 1, 1]), 1.0);
    }

    #[test]
    fn constant_map_ignores_its_input() {
        let ns = ns_vertices_222::<f64>();
        let m = LosrMap::constant(Scenario::chsh(), &ns.vertices()[3], &ns.vertices()[20]).unwrap();
        let v = wing_product(&ns.vertices()[3], &ns.vertices()[20]);
        assert_eq!(m.apply(&pr_box()).unwrap(), v);
        assert_eq!(m.apply(&Behavior::uniform(Scenario::chsh())).unwrap(), v);
    }

    #[test]
    fn random_maps_are_reproducible() {
        let a = random_losr::<f64>(7, &LosrSizes::default()).unwrap();
        let b = random_losr::<f64>(7, &LosrSizes::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.apply(&Behavior::uniform(Scenario::chsh())).is_ok());
    }

    #[test]
    fn structured_maps_preserve_lrns() {
        let local = local_deterministic_vertices::<f64>(&Scenario::chsh()).unwrap();
        let lrns = lrns_vertices_broadcast_222::<f64>();
        for seed in 0..3 {
            let m = random_lrns_losr::<f64>(seed, 4).unwrap();
            let r = preserves_lrns(&m, &local, &lrns).unwrap();
            assert!(r.preserved, "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn copy_wiring_does_not_preserve_lrns() {
        let local = local_deterministic_vertices::<f64>(&Scenario::chsh()).unwrap();
        let lrns = lrns_vertices_broadcast_222::<f64>();
        let r = preserves_lrns(&LosrMap::copy_wiring(), &local, &lrns).unwrap();
        assert!(!r.preserved);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = random_lrns_losr::<f64>(3, 5).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: LosrMap<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn lambda_cap() {
        let sizes = LosrSizes {
            lambda: LAMBDA_CAP + 1,
            ..LosrSizes::default()
        };
        assert!(random_losr::<f64>(0, &sizes).is_err());
    }
}

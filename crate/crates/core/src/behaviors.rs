//! Boxes (behaviors): conditional probability tables over a scenario of
//! local sites grouped into two spatial wings.
//!
//! Tables are stored inputs-major: `[x...][y...][a...][b...]`, where the site
//! positions follow the wing grouping (Alice's sites first, in grouping
//! order, then Bob's). Every index argument in this module is given per
//! storage position.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::index::{multi_indices, ravel, unravel};
use crate::scalar::{max_abs_diff, Real};
use crate::tensor::{validate_simplex, ProbVector};

/// Normalization tolerance per joint input.
pub const NORMALIZATION_TOL: f64 = 1e-10;
/// Tolerance for marginals to count as input independent.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Smallest conditioning probability accepted by [`condition_on_pair0`].
pub const CONDITIONING_GUARD: f64 = 1e-12;

/// Site cardinalities and their grouping into the Alice and Bob wings.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Scenario {
    sites: Vec<(usize, usize)>,
    grouping: [Vec<usize>; 2],
    order: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ScenarioRepr {
    wings: Vec<[usize; 2]>,
    grouping: Vec<Vec<usize>>,
}

impl Scenario {
    /// `sites[i] = (num_inputs, num_outputs)`; `grouping` lists Alice's sites
    /// and Bob's sites.
    pub fn new(sites: Vec<(usize, usize)>, grouping: [Vec<usize>; 2]) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::invalid("scenario without sites"));
        }
        if sites.iter().any(|&(m, o)| m == 0 || o == 0) {
            return Err(Error::invalid("site cardinalities must be at least 1"));
        }
        let mut seen = vec![false; sites.len()];
        for &s in grouping.iter().flatten() {
            if s >= sites.len() || seen[s] {
                return Err(Error::invalid(format!(
                    "grouping {grouping:?} is not a partition of {} sites",
                    sites.len()
                )));
            }
            seen[s] = true;
        }
        if seen.iter().any(|&v| !v) {
            return Err(Error::invalid(format!(
                "grouping {grouping:?} does not cover all {} sites",
                sites.len()
            )));
        }
        let order = grouping.iter().flatten().copied().collect();
        Ok(Self {
            sites,
            grouping,
            order,
        })
    }

    pub fn bipartite(inputs_a: usize, outputs_a: usize, inputs_b: usize, outputs_b: usize) -> Self {
        Self::new(
            vec![(inputs_a, outputs_a), (inputs_b, outputs_b)],
            [vec![0], vec![1]],
        )
        .expect("valid bipartite scenario")
    }

    /// Two inputs and two outputs per party.
    pub fn chsh() -> Self {
        Self::bipartite(2, 2, 2, 2)
    }

    /// Sites `A0, A1, B0, B1` grouped `A0A1 | B0B1`, each with the given cardinalities.
    pub fn broadcast(inputs: usize, outputs: usize) -> Self {
        Self::new(vec![(inputs, outputs); 4], [vec![0, 1], vec![2, 3]]).expect("valid scenario")
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[(usize, usize)] {
        &self.sites
    }

    pub fn grouping(&self) -> &[Vec<usize>; 2] {
        &self.grouping
    }

    /// Site stored at each position.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Number of storage positions belonging to Alice's wing.
    pub fn alice_len(&self) -> usize {
        self.grouping[0].len()
    }

    pub fn input_dims(&self) -> Vec<usize> {
        self.order.iter().map(|&s| self.sites[s].0).collect()
    }

    pub fn output_dims(&self) -> Vec<usize> {
        self.order.iter().map(|&s| self.sites[s].1).collect()
    }

    pub fn num_settings(&self) -> usize {
        self.input_dims().iter().product()
    }

    pub fn num_outcomes(&self) -> usize {
        self.output_dims().iter().product()
    }

    /// Joint input and output alphabet sizes of each wing: `[(X_A, A_A), (X_B, A_B)]`.
    pub fn wing_alphabets(&self) -> [(usize, usize); 2] {
        let side = |g: &Vec<usize>| {
            g.iter()
                .fold((1, 1), |(m, o), &s| (m * self.sites[s].0, o * self.sites[s].1))
        };
        [side(&self.grouping[0]), side(&self.grouping[1])]
    }

    pub fn table_len(&self) -> usize {
        self.num_settings() * self.num_outcomes()
    }

    /// True for the `A0A1 | B0B1` layout with matching pair alphabets.
    pub fn is_broadcast_shape(&self) -> bool {
        self.sites.len() == 4
            && self.grouping == [vec![0, 1], vec![2, 3]]
            && self.sites[0] == self.sites[1]
            && self.sites[2] == self.sites[3]
    }

    /// Scenario of the kept storage positions, with the grouping restricted.
    fn restrict(&self, keep: &[usize]) -> Scenario {
        let sites = keep.iter().map(|&p| self.sites[self.order[p]]).collect();
        let na = self.alice_len();
        let alice = keep.iter().enumerate().filter(|(_, &p)| p < na).map(|(i, _)| i).collect();
        let bob = keep.iter().enumerate().filter(|(_, &p)| p >= na).map(|(i, _)| i).collect();
        Scenario::new(sites, [alice, bob]).expect("restriction of a valid scenario")
    }
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scenario({:?} grouped {:?})", self.sites, self.grouping)
    }
}

impl Serialize for Scenario {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ScenarioRepr {
            wings: self.sites.iter().map(|&(m, o)| [m, o]).collect(),
            grouping: self.grouping.to_vec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Scenario {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = ScenarioRepr::deserialize(d)?;
        let [alice, bob]: [Vec<usize>; 2] = repr
            .grouping
            .try_into()
            .map_err(|_| D::Error::custom("grouping must have exactly two wings"))?;
        Scenario::new(repr.wings.into_iter().map(|[m, o]| (m, o)).collect(), [alice, bob])
            .map_err(D::Error::custom)
    }
}

/// A conditional probability table `P(outputs | inputs)`.
#[derive(Clone, PartialEq)]
pub struct Behavior<T> {
    scenario: Scenario,
    table: Vec<T>,
}

/// Outcome of a non-signalling test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsReport<T> {
    pub holds: bool,
    pub max_violation: T,
}

impl<T: Real> Behavior<T> {
    pub fn new(scenario: Scenario, mut table: Vec<T>) -> Result<Self> {
        if table.len() != scenario.table_len() {
            return Err(Error::dim(format!(
                "{scenario:?} needs {} table entries, got {}",
                scenario.table_len(),
                table.len()
            )));
        }
        let n_out = scenario.num_outcomes();
        for (s, row) in table.chunks_mut(n_out).enumerate() {
            let total: T = row.iter().copied().sum();
            if (total - T::one()).abs() > T::tol(NORMALIZATION_TOL) {
                return Err(Error::invalid(format!(
                    "outputs at joint input {s} sum to {}",
                    total.to_f64_lossy()
                )));
            }
            validate_simplex(row, "behavior row")?;
        }
        Ok(Self { scenario, table })
    }

    /// Builds a table from `f(inputs, outputs)`; rows are normalized on entry.
    pub fn from_fn(scenario: Scenario, mut f: impl FnMut(&[usize], &[usize]) -> T) -> Result<Self> {
        let in_dims = scenario.input_dims();
        let out_dims = scenario.output_dims();
        let mut table = Vec::with_capacity(scenario.table_len());
        for x in multi_indices(&in_dims) {
            for a in multi_indices(&out_dims) {
                table.push(f(&x, &a));
            }
        }
        Self::new(scenario, table)
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_raw(scenario: Scenario, table: Vec<T>) -> Self {
        debug_assert_eq!(table.len(), scenario.table_len());
        Self { scenario, table }
    }

    pub fn uniform(scenario: Scenario) -> Self {
        let n_out = scenario.num_outcomes();
        let v = T::one() / T::from_usize_lossy(n_out);
        let table = vec![v; scenario.table_len()];
        Self { scenario, table }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn table(&self) -> &[T] {
        &self.table
    }

    pub fn into_table(self) -> Vec<T> {
        self.table
    }

    pub fn num_settings(&self) -> usize {
        self.scenario.num_settings()
    }

    pub fn num_outcomes(&self) -> usize {
        self.scenario.num_outcomes()
    }

    /// Output distribution at joint input `s`.
    pub fn setting(&self, s: usize) -> &[T] {
        let n = self.num_outcomes();
        &self.table[s * n..(s + 1) * n]
    }

    pub fn distribution(&self, s: usize) -> ProbVector<T> {
        ProbVector::new(self.setting(s).to_vec()).expect("behavior rows are normalized")
    }

    pub fn value(&self, inputs: &[usize], outputs: &[usize]) -> T {
        let s = ravel(inputs, &self.scenario.input_dims());
        let o = ravel(outputs, &self.scenario.output_dims());
        self.table[s * self.num_outcomes() + o]
    }

    /// `weight·self + (1 − weight)·other`.
    pub fn mix(&self, other: &Self, weight: T) -> Result<Self> {
        self.require_same_scenario(other)?;
        let table = self
            .table
            .iter()
            .zip(&other.table)
            .map(|(&p, &q)| weight * p + (T::one() - weight) * q)
            .collect();
        Ok(Self::from_raw(self.scenario.clone(), table))
    }

    /// Convex combination `Σ w_i B_i`; weights are validated as a distribution.
    pub fn convex_combination(items: &[(T, &Behavior<T>)]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::invalid("empty convex combination"))?
            .1;
        let mut weights: Vec<T> = items.iter().map(|(w, _)| *w).collect();
        validate_simplex(&mut weights, "mixture weights")?;
        let mut table = vec![T::zero(); first.table.len()];
        for (&w, (_, b)) in weights.iter().zip(items) {
            first.require_same_scenario(b)?;
            for (t, &v) in table.iter_mut().zip(&b.table) {
                *t += w * v;
            }
        }
        Ok(Self::from_raw(first.scenario.clone(), table))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.require_same_scenario(other)?;
        Ok(max_abs_diff(&self.table, &other.table))
    }

    pub(crate) fn require_same_scenario(&self, other: &Self) -> Result<()> {
        if self.scenario != other.scenario {
            return Err(Error::dim(format!(
                "behaviors over {:?} and {:?}",
                self.scenario, other.scenario
            )));
        }
        Ok(())
    }

    /// Marginal table over the kept storage positions, evaluated at every
    /// joint input, plus the worst dependence on the discarded inputs.
    fn marginal_spread(&self, keep: &[usize]) -> (Vec<T>, T) {
        let in_dims = self.scenario.input_dims();
        let out_dims = self.scenario.output_dims();
        let kin: Vec<usize> = keep.iter().map(|&p| in_dims[p]).collect();
        let kout: Vec<usize> = keep.iter().map(|&p| out_dims[p]).collect();
        let n_kin: usize = kin.iter().product();
        let n_kout: usize = kout.iter().product();
        let n_out = self.num_outcomes();

        let out_map: Vec<usize> = (0..n_out)
            .map(|o| {
                let a = unravel(o, &out_dims);
                let ka: Vec<usize> = keep.iter().map(|&p| a[p]).collect();
                ravel(&ka, &kout)
            })
            .collect();

        let mut reference: Vec<Option<Vec<T>>> = vec![None; n_kin];
        let mut violation = T::zero();
        for s in 0..self.num_settings() {
            let x = unravel(s, &in_dims);
            let kx: Vec<usize> = keep.iter().map(|&p| x[p]).collect();
            let k = ravel(&kx, &kin);
            let mut m = vec![T::zero(); n_kout];
            for (o, &p) in self.setting(s).iter().enumerate() {
                m[out_map[o]] += p;
            }
            match &reference[k] {
                None => reference[k] = Some(m),
                Some(r) => violation = violation.max(max_abs_diff(r, &m)),
            }
        }
        let table = reference.into_iter().flat_map(|m| m.expect("every kept input visited")).collect();
        (table, violation)
    }

    /// Marginal behavior on the kept storage positions.
    ///
    /// Fails with [`Error::Signalling`] when the marginal depends on the
    /// discarded positions' inputs by more than [`MARGINAL_TOL`].
    pub fn marginal(&self, keep: &[usize]) -> Result<Self> {
        let positions = self.scenario.num_sites();
        if keep.is_empty() || keep.iter().any(|&p| p >= positions) || keep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::dim(format!(
                "kept positions {keep:?} must be increasing and below {positions}"
            )));
        }
        let (table, violation) = self.marginal_spread(keep);
        if violation > T::tol(MARGINAL_TOL) {
            return Err(Error::Signalling {
                violation: violation.to_f64_lossy(),
            });
        }
        Ok(Self::from_raw(self.scenario.restrict(keep), table))
    }

    /// Non-signalling across the bipartition `cell | complement` (storage positions).
    pub fn is_nonsignalling(&self, cell: &[usize]) -> NsReport<T> {
        let n = self.scenario.num_sites();
        let mut a: Vec<usize> = cell.to_vec();
        a.sort_unstable();
        a.dedup();
        let b: Vec<usize> = (0..n).filter(|p| !a.contains(p)).collect();
        let mut worst = T::zero();
        for side in [&a, &b] {
            if !side.is_empty() {
                worst = worst.max(self.marginal_spread(side).1);
            }
        }
        NsReport {
            holds: worst <= T::tol(MARGINAL_TOL),
            max_violation: worst,
        }
    }

    /// Non-signalling across the two wings.
    pub fn is_nonsignalling_wings(&self) -> NsReport<T> {
        let na = self.scenario.alice_len();
        self.is_nonsignalling(&(0..na).collect::<Vec<_>>())
    }

    /// Non-signalling across every single site.
    pub fn is_fully_nonsignalling(&self) -> NsReport<T> {
        let mut worst = T::zero();
        for p in 0..self.scenario.num_sites() {
            worst = worst.max(self.is_nonsignalling(&[p]).max_violation);
        }
        NsReport {
            holds: worst <= T::tol(MARGINAL_TOL),
            max_violation: worst,
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Behavior<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Behavior")
            .field("scenario", &self.scenario)
            .field("table", &self.table)
            .finish()
    }
}

/// The Popescu–Rohrlich box: `P(ab|xy) = 1/2` iff `a ⊕ b = x·y`.
pub fn pr_box<T: Real>() -> Behavior<T> {
    ns_vertex_222(0, 0, 0)
}

/// Nonlocal extreme point of the (2,2,2) non-signalling polytope:
/// `P(ab|xy) = 1/2` iff `a ⊕ b = xy ⊕ αx ⊕ βy ⊕ γ`.
pub fn ns_vertex_222<T: Real>(alpha: usize, beta: usize, gamma: usize) -> Behavior<T> {
    let half = T::lit(0.5);
    Behavior::from_fn(Scenario::chsh(), |x, a| {
        let rhs = (x[0] * x[1]) ^ (alpha * x[0]) ^ (beta * x[1]) ^ gamma;
        if (a[0] ^ a[1]) == (rhs & 1) {
            half
        } else {
            T::zero()
        }
    })
    .expect("valid vertex")
}

/// Deterministic box: `responses[p][x]` is the output of storage position `p` on input `x`.
pub fn deterministic<T: Real>(scenario: Scenario, responses: &[Vec<usize>]) -> Result<Behavior<T>> {
    let in_dims = scenario.input_dims();
    let out_dims = scenario.output_dims();
    if responses.len() != in_dims.len()
        || responses
            .iter()
            .zip(in_dims.iter().zip(&out_dims))
            .any(|(r, (&m, &o))| r.len() != m || r.iter().any(|&v| v >= o))
    {
        return Err(Error::dim("response functions do not match the scenario"));
    }
    Behavior::from_fn(scenario, |x, a| {
        if x.iter().zip(a).enumerate().all(|(p, (&xi, &ai))| responses[p][xi] == ai) {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// Product box with grouped indices `A A' | B B'`: `P(a a' b b' | x x' y y') = P(ab|xy) Q(a'b'|x'y')`.
pub fn product<T: Real>(p: &Behavior<T>, q: &Behavior<T>) -> Behavior<T> {
    let (sp, sq) = (p.scenario(), q.scenario());
    let (pa, qa) = (sp.alice_len(), sq.alice_len());
    let (np, nq) = (sp.num_sites(), sq.num_sites());
    // new storage positions: p's Alice, q's Alice, p's Bob, q's Bob
    let mut sites = Vec::with_capacity(np + nq);
    let mut from: Vec<(bool, usize)> = Vec::with_capacity(np + nq);
    for p_pos in 0..pa {
        sites.push(sp.sites()[sp.order()[p_pos]]);
        from.push((false, p_pos));
    }
    for q_pos in 0..qa {
        sites.push(sq.sites()[sq.order()[q_pos]]);
        from.push((true, q_pos));
    }
    for p_pos in pa..np {
        sites.push(sp.sites()[sp.order()[p_pos]]);
        from.push((false, p_pos));
    }
    for q_pos in qa..nq {
        sites.push(sq.sites()[sq.order()[q_pos]]);
        from.push((true, q_pos));
    }
    let na = pa + qa;
    let scenario = Scenario::new(sites, [(0..na).collect(), (na..np + nq).collect()])
        .expect("product scenario");
    let (pin, pout) = (sp.input_dims(), sp.output_dims());
    let (qin, qout) = (sq.input_dims(), sq.output_dims());
    let mut xp = vec![0; np];
    let mut ap = vec![0; np];
    let mut xq = vec![0; nq];
    let mut aq = vec![0; nq];
    let n_out_p = p.num_outcomes();
    let n_out_q = q.num_outcomes();
    Behavior::from_fn(scenario, |x, a| {
        for (k, &(is_q, pos)) in from.iter().enumerate() {
            if is_q {
                xq[pos] = x[k];
                aq[pos] = a[k];
            } else {
                xp[pos] = x[k];
                ap[pos] = a[k];
            }
        }
        let vp = p.table[ravel(&xp, &pin) * n_out_p + ravel(&ap, &pout)];
        let vq = q.table[ravel(&xq, &qin) * n_out_q + ravel(&aq, &qout)];
        vp * vq
    })
    .expect("product of normalized boxes is normalized")
}

/// Wing product `W_A ⊗ W_B`: every site of `wa` on Alice's side, every site of `wb` on Bob's.
pub fn wing_product<T: Real>(wa: &Behavior<T>, wb: &Behavior<T>) -> Behavior<T> {
    let (sa, sb) = (wa.scenario(), wb.scenario());
    let mut sites: Vec<(usize, usize)> = sa.order().iter().map(|&s| sa.sites()[s]).collect();
    sites.extend(sb.order().iter().map(|&s| sb.sites()[s]));
    let na = sa.num_sites();
    let n = sites.len();
    let scenario =
        Scenario::new(sites, [(0..na).collect(), (na..n).collect()]).expect("wing product scenario");
    let (xa, oa) = (wa.num_settings(), wa.num_outcomes());
    let (xb, ob) = (wb.num_settings(), wb.num_outcomes());
    let mut table = Vec::with_capacity(xa * xb * oa * ob);
    for sx in 0..xa {
        for sy in 0..xb {
            let ra = wa.setting(sx);
            let rb = wb.setting(sy);
            for &pa in ra {
                for &pb in rb {
                    table.push(pa * pb);
                }
            }
        }
    }
    Behavior::from_raw(scenario, table)
}

fn require_broadcast<T: Real>(b4: &Behavior<T>) -> Result<()> {
    if !b4.scenario().is_broadcast_shape() {
        return Err(Error::dim(format!(
            "expected an A0A1|B0B1 broadcast scenario, got {:?}",
            b4.scenario()
        )));
    }
    Ok(())
}

/// Marginal of the pair `A_i B_i` of a broadcast-shaped box.
pub fn marginal_pair<T: Real>(b4: &Behavior<T>, pair: usize) -> Result<Behavior<T>> {
    require_broadcast(b4)?;
    if pair > 1 {
        return Err(Error::dim(format!("pair index {pair} must be 0 or 1")));
    }
    b4.marginal(&[pair, 2 + pair])
}

/// Whether both pair marginals of `b4` equal `b2` within [`MARGINAL_TOL`].
pub fn is_broadcast_of<T: Real>(b4: &Behavior<T>, b2: &Behavior<T>) -> Result<bool> {
    for pair in 0..2 {
        let m = marginal_pair(b4, pair)?;
        if m.scenario() != b2.scenario() {
            return Err(Error::dim(format!(
                "pair marginal over {:?} cannot be compared with {:?}",
                m.scenario(),
                b2.scenario()
            )));
        }
        if max_abs_diff(m.table(), b2.table()) > T::tol(MARGINAL_TOL) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Probability of `(a0, b0)` at `(x0, y0)`, summed at the given pair-1 inputs.
pub fn pair0_probability<T: Real>(
    b4: &Behavior<T>,
    (a0, b0): (usize, usize),
    (x0, y0): (usize, usize),
    (x1, y1): (usize, usize),
) -> T {
    let (_, o_a) = b4.scenario().sites()[0];
    let (_, o_b) = b4.scenario().sites()[2];
    let mut total = T::zero();
    for a1 in 0..o_a {
        for b1 in 0..o_b {
            total += b4.value(&[x0, x1, y0, y1], &[a0, a1, b0, b1]);
        }
    }
    total
}

/// `P(a1, b1 | x, y, a0, b0)` as a distribution over `(a1, b1)`, row-major.
pub fn condition_on_pair0<T: Real>(
    b4: &Behavior<T>,
    (a0, b0): (usize, usize),
    (x0, y0): (usize, usize),
    (x1, y1): (usize, usize),
) -> Result<ProbVector<T>> {
    require_broadcast(b4)?;
    let denom = pair0_probability(b4, (a0, b0), (x0, y0), (x1, y1));
    if denom <= T::lit(CONDITIONING_GUARD) {
        return Err(Error::Conditioning {
            probability: denom.to_f64_lossy(),
        });
    }
    let (_, o_a) = b4.scenario().sites()[1];
    let (_, o_b) = b4.scenario().sites()[3];
    let mut w = Vec::with_capacity(o_a * o_b);
    for a1 in 0..o_a {
        for b1 in 0..o_b {
            w.push(b4.value(&[x0, x1, y0, y1], &[a0, a1, b0, b1]) / denom);
        }
    }
    ProbVector::new(w)
}

/// The pair-1 box conditioned on `(x0, y0, a0, b0)`, as a box over `(x1, y1)`.
///
/// Returns `None` when the conditioning event has probability below the
/// guard at some pair-1 input. Requires `b4` non-signalling from pair 1 to
/// pair 0 for the result to be a well-defined box.
pub fn conditional_pair1_box<T: Real>(
    b4: &Behavior<T>,
    (a0, b0): (usize, usize),
    (x0, y0): (usize, usize),
) -> Result<Option<Behavior<T>>> {
    require_broadcast(b4)?;
    let s = b4.scenario().sites();
    let sc = Scenario::bipartite(s[1].0, s[1].1, s[3].0, s[3].1);
    let mut table = Vec::with_capacity(sc.table_len());
    for x1 in 0..s[1].0 {
        for y1 in 0..s[3].0 {
            match condition_on_pair0(b4, (a0, b0), (x0, y0), (x1, y1)) {
                Ok(p) => table.extend_from_slice(p.weights()),
                Err(Error::Conditioning { .. }) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(Some(Behavior::new(sc, table)?))
}

impl<T: Real> Serialize for Behavior<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            scenario: &'a Scenario,
            table: Value,
        }
        let mut dims = self.scenario.input_dims();
        dims.extend(self.scenario.output_dims());
        let values: Vec<f64> = self.table.iter().map(|v| v.to_f64_lossy()).collect();
        Repr {
            scenario: &self.scenario,
            table: nest(&values, &dims),
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for Behavior<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            scenario: Scenario,
            table: Value,
        }
        let repr = Repr::deserialize(d)?;
        let mut dims = repr.scenario.input_dims();
        dims.extend(repr.scenario.output_dims());
        let mut flat = Vec::with_capacity(repr.scenario.table_len());
        unnest(&repr.table, &dims, &mut flat).map_err(D::Error::custom)?;
        let table = flat
            .into_iter()
            .map(|v| T::from_f64(v).ok_or_else(|| D::Error::custom("unrepresentable entry")))
            .collect::<std::result::Result<Vec<T>, _>>()?;
        Behavior::new(repr.scenario, table).map_err(D::Error::custom)
    }
}

/// Nested JSON arrays from a row-major buffer.
pub(crate) fn nest(values: &[f64], dims: &[usize]) -> Value {
    match dims.split_first() {
        None => Value::from(values[0]),
        Some((&d, rest)) => {
            let chunk = values.len() / d;
            Value::Array(values.chunks(chunk).map(|c| nest(c, rest)).collect())
        }
    }
}

/// Flattens nested arrays of the given shape, row-major.
pub(crate) fn unnest(v: &Value, dims: &[usize], out: &mut Vec<f64>) -> Result<()> {
    match dims.split_first() {
        None => {
            let x = v
                .as_f64()
                .ok_or_else(|| Error::Parse(format!("expected a number, found {v}")))?;
            out.push(x);
            Ok(())
        }
        Some((&d, rest)) => {
            let arr = v
                .as_array()
                .ok_or_else(|| Error::Parse("expected a nested array".into()))?;
            if arr.len() != d {
                return Err(Error::Parse(format!(
                    "array of length {} where {d} entries are required",
                    arr.len()
                )));
            }
            arr.iter().try_for_each(|item| unnest(item, rest, out))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det_chsh(fa: [usize; 2], fb: [usize; 2]) -> Behavior<f64> {
        deterministic(Scenario::chsh(), &[fa.to_vec(), fb.to_vec()]).unwrap()
    }

    #[test]
    fn local_deterministic_box_is_nonsignalling() {
        let b = det_chsh([0, 1], [1, 1]);
        assert!(b.is_nonsignalling(&[0]).holds);
        assert_eq!(b.is_nonsignalling(&[0]).max_violation, 0.0);
    }

    #[test]
    fn pr_box_is_nonsignalling_with_uniform_marginals() {
        let pr = pr_box::<f64>();
        assert!(pr.is_nonsignalling(&[0]).holds);
        let alice = pr.marginal(&[0]).unwrap();
        assert!(alice.table().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn remote_input_dependence_is_signalling() {
        // P(a|x,y) = δ_{a,y}, Bob outputs 0
        let b = Behavior::<f64>::from_fn(Scenario::chsh(), |x, a| {
            if a[0] == x[1] && a[1] == 0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let report = b.is_nonsignalling(&[0]);
        assert!(!report.holds);
        assert_eq!(report.max_violation, 1.0);
        assert!(matches!(b.marginal(&[0]), Err(Error::Signalling { .. })));
    }

    #[test]
    fn rows_must_be_normalized() {
        let mut t = pr_box::<f64>().into_table();
        t[0] += 1e-6;
        assert!(Behavior::new(Scenario::chsh(), t).is_err());
        assert!(Behavior::<f64>::new(Scenario::chsh(), vec![0.25; 15]).is_err());
    }

    #[test]
    fn product_marginals_recover_factors() {
        let p = pr_box::<f64>();
        let q = det_chsh([1, 0], [0, 0]);
        let b4 = product(&p, &q);
        assert!(b4.scenario().is_broadcast_shape());
        assert_eq!(marginal_pair(&b4, 0).unwrap().table(), p.table());
        assert_eq!(marginal_pair(&b4, 1).unwrap().table(), q.table());
    }

    #[test]
    fn product_of_deterministic_boxes_is_deterministic() {
        let b4 = product(&det_chsh([0, 1], [1, 0]), &det_chsh([1, 1], [0, 1]));
        assert!(b4.table().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn pr_squared_broadcasts_pr() {
        let pr = pr_box::<f64>();
        let b4 = product(&pr, &pr);
        assert!(is_broadcast_of(&b4, &pr).unwrap());
        let mixed = product(&pr, &det_chsh([0, 0], [0, 0]));
        assert!(!is_broadcast_of(&mixed, &pr).unwrap());
    }

    #[test]
    fn conditioning_a_product_gives_the_pair1_box() {
        let pr = pr_box::<f64>();
        let q = ns_vertex_222::<f64>(1, 0, 1).mix(&Behavior::uniform(Scenario::chsh()), 0.3).unwrap();
        let b4 = product(&pr, &q);
        for (x1, y1) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let c = condition_on_pair0(&b4, (0, 0), (1, 1), (x1, y1));
            // a0 ⊕ b0 = 1 at x0 = y0 = 1, so (0, 0) has probability 0
            assert!(matches!(c, Err(Error::Conditioning { .. })));
            let c = condition_on_pair0(&b4, (0, 1), (1, 1), (x1, y1)).unwrap();
            assert!(max_abs_diff(c.weights(), q.setting(x1 * 2 + y1)) < 1e-15);
        }
    }

    #[test]
    fn perfectly_correlated_pairs_condition_to_a_point_mass() {
        // a1 = a0 and b1 = b0, pair 0 uniform and independent of inputs
        let b4 = Behavior::<f64>::from_fn(Scenario::broadcast(2, 2), |_, a| {
            if a[1] == a[0] && a[3] == a[2] {
                0.25
            } else {
                0.0
            }
        })
        .unwrap();
        let c = condition_on_pair0(&b4, (1, 0), (0, 1), (1, 0)).unwrap();
        assert_eq!(c.weights(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let q = ns_vertex_222::<f64>(0, 1, 1).mix(&det_chsh([0, 1], [1, 1]), 0.1 + 1e-17).unwrap();
        let b4 = product(&q, &pr_box());
        let text = serde_json::to_string(&b4).unwrap();
        let back: Behavior<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, b4);
        assert!(text.starts_with(r#"{"scenario":{"wings":[[2,2],[2,2],[2,2],[2,2]],"grouping":[[0,1],[2,3]]}"#));
    }

    #[test]
    fn json_shape_errors() {
        let bad = r#"{"scenario":{"wings":[[2,2],[2,2]],"grouping":[[0],[1]]},"table":[[0.5,0.5]]}"#;
        assert!(serde_json::from_str::<Behavior<f64>>(bad).is_err());
        let bad_group = r#"{"scenario":{"wings":[[2,2],[2,2]],"grouping":[[0],[0]]},"table":[]}"#;
        assert!(serde_json::from_str::<Behavior<f64>>(bad_group).is_err());
    }

    #[test]
    fn wing_product_layout() {
        let wa = pr_box::<f64>();
        let wb = det_chsh([0, 1], [0, 0]);
        let v = wing_product(&wa, &wb);
        assert_eq!(v.value(&[1, 1, 1, 0], &[0, 1, 1, 0]), 0.5);
        assert_eq!(v.value(&[1, 1, 1, 0], &[0, 0, 1, 0]), 0.0);
        assert!(v.is_fully_nonsignalling().holds);
    }

    #[test]
    fn single_precision_pr_box() {
        let pr = pr_box::<f32>();
        assert!(pr.is_nonsignalling(&[0]).holds);
    }
}

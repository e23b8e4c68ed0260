use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::eig::eig_hermitian;
use super::entropy::{check_density, check_psd};
use super::matrix::{CMatrix, C};
use crate::behaviors::{Behavior, Scenario};
use crate::error::{Error, Result};
use crate::scalar::Real;

const EFFECT_PSD_TOL: f64 = 1e-10;
const COMPLETENESS_TOL: f64 = 1e-9;

fn c<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(T::lit(re), T::lit(im))
}

/// Pauli matrix `σ_k` for `k` in `0..4` (`σ_0 = I`).
pub fn pauli<T: Real>(k: usize) -> CMatrix<T> {
    let z = c::<T>(0.0, 0.0);
    let (a, b, cc, d) = match k {
        0 => (c(1.0, 0.0), z, z, c(1.0, 0.0)),
        1 => (z, c(1.0, 0.0), c(1.0, 0.0), z),
        2 => (z, c(0.0, -1.0), c(0.0, 1.0), z),
        3 => (c(1.0, 0.0), z, z, c(-1.0, 0.0)),
        _ => panic!("Pauli index {k} out of range"),
    };
    CMatrix::from_vec(2, 2, vec![a, b, cc, d]).expect("2x2")
}

/// `(I + n·σ)/2` scaled by `weight`.
fn bloch_effect<T: Real>(n: [f64; 3], weight: f64) -> CMatrix<T> {
    let mut m = pauli::<T>(0);
    for (k, &nk) in n.iter().enumerate() {
        m.add_scaled(T::lit(nk), &pauli(k + 1));
    }
    m.scale(T::lit(0.5 * weight))
}

/// Positive operator-valued measure on a `dim`-dimensional system.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm<T> {
    dim: usize,
    effects: Vec<CMatrix<T>>,
}

impl<T: Real> Povm<T> {
    pub fn new(effects: Vec<CMatrix<T>>) -> Result<Self> {
        let dim = effects.first().ok_or_else(|| Error::invalid("POVM has no effects"))?.rows();
        let mut total = CMatrix::zeros(dim, dim);
        for (i, e) in effects.iter().enumerate() {
            if e.rows() != dim || !e.is_square() {
                return Err(Error::dim(format!("effect {i} is not {dim}x{dim}")));
            }
            check_psd(e, EFFECT_PSD_TOL, &format!("effect {i}"))?;
            total = &total + e;
        }
        let defect = total.max_abs_diff(&CMatrix::identity(dim));
        if defect > T::tol(COMPLETENESS_TOL) {
            return Err(Error::invalid(format!("effects sum to identity only within {:e}", defect.to_f64_lossy())));
        }
        Ok(Povm { dim, effects })
    }

    /// Projective measurement in the computational basis.
    pub fn computational(dim: usize) -> Self {
        Povm { dim, effects: (0..dim).map(|i| CMatrix::basis_projector(dim, i)).collect() }
    }

    /// Two-outcome qubit measurement along the unit Bloch vector `n`; outcome
    /// 0 is the `+1` eigenspace of `n·σ`.
    pub fn qubit_axis(n: [f64; 3]) -> Self {
        let m = [-n[0], -n[1], -n[2]];
        Povm { dim: 2, effects: vec![bloch_effect(n, 1.0), bloch_effect(m, 1.0)] }
    }

    /// `{ |f⟩⟨f| ⊗ E_i }` over `flags` classical values, ordered `(f, i)`.
    pub fn flagged(flags: usize, inner: &Povm<T>) -> Self {
        let effects = (0..flags)
            .flat_map(|f| inner.effects.iter().map(move |e| CMatrix::basis_projector(flags, f).kron(e)))
            .collect();
        Povm { dim: flags * inner.dim, effects }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effects(&self) -> &[CMatrix<T>] {
        &self.effects
    }

    /// Outcome probabilities `tr(F_i X)` (real parts).
    pub fn probabilities(&self, x: &CMatrix<T>) -> Vec<T> {
        self.effects.iter().map(|e| e.inner_re(x)).collect()
    }
}

/// Measurement map `X ↦ Σ_i tr(F_i X) |i⟩⟨i|`.
pub fn measurement_map<T: Real>(povm: &Povm<T>, x: &CMatrix<T>) -> Result<CMatrix<T>> {
    if x.rows() != povm.dim || !x.is_square() {
        return Err(Error::dim(format!("measuring a {}x{} matrix with a dimension-{} POVM", x.rows(), x.cols(), povm.dim)));
    }
    let mut out = CMatrix::zeros(povm.len(), povm.len());
    for (i, e) in povm.effects.iter().enumerate() {
        out[(i, i)] = e.trace_product(x);
    }
    Ok(out)
}

/// Tetrahedral SIC-POVM: effects `½|ψ_k⟩⟨ψ_k|` with Bloch vectors at the
/// vertices of a regular tetrahedron.
pub fn sic_povm_qubit<T: Real>() -> Povm<T> {
    let s = 1.0 / 3f64.sqrt();
    let dirs = [[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]];
    Povm { dim: 2, effects: dirs.iter().map(|&n| bloch_effect(n, 0.5)).collect() }
}

/// Born-rule behavior `P(ab|xy) = tr[(A_a^x ⊗ B_b^y) ρ]`.
pub fn quantum_behavior<T: Real>(state: &CMatrix<T>, alice: &[Povm<T>], bob: &[Povm<T>]) -> Result<Behavior<T>> {
    let side = |povms: &[Povm<T>], who: &str| -> Result<(usize, usize)> {
        let first = povms.first().ok_or_else(|| Error::invalid(format!("{who} has no measurements")))?;
        if povms.iter().any(|p| p.dim != first.dim || p.len() != first.len()) {
            return Err(Error::dim(format!("{who}'s measurements differ in dimension or outcome count")));
        }
        Ok((first.dim, first.len()))
    };
    let (da, oa) = side(alice, "Alice")?;
    let (db, ob) = side(bob, "Bob")?;
    if state.rows() != da * db {
        return Err(Error::dim(format!("state of dimension {} for local dimensions {da}x{db}", state.rows())));
    }
    check_density(state)?;
    let scenario = Scenario::bipartite(alice.len(), oa, bob.len(), ob);
    Behavior::from_fn(scenario, |x, a| {
        let op = alice[x[0]].effects[a[0]].kron(&bob[x[1]].effects[a[1]]);
        op.inner_re(state).max(T::zero())
    })
}

/// Completely positive trace-preserving map in Kraus form.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel<T> {
    input_dim: usize,
    output_dim: usize,
    ops: Vec<CMatrix<T>>,
}

impl<T: Real> KrausChannel<T> {
    pub fn new(ops: Vec<CMatrix<T>>) -> Result<Self> {
        let first = ops.first().ok_or_else(|| Error::invalid("channel has no Kraus operators"))?;
        let (output_dim, input_dim) = (first.rows(), first.cols());
        let mut total = CMatrix::zeros(input_dim, input_dim);
        for (i, k) in ops.iter().enumerate() {
            if k.rows() != output_dim || k.cols() != input_dim {
                return Err(Error::dim(format!("Kraus operator {i} has the wrong shape")));
            }
            total = &total + &(&k.adjoint() * k);
        }
        let defect = total.max_abs_diff(&CMatrix::identity(input_dim));
        if defect > T::tol(COMPLETENESS_TOL) {
            return Err(Error::invalid(format!("Kraus operators are trace-preserving only within {:e}", defect.to_f64_lossy())));
        }
        Ok(KrausChannel { input_dim, output_dim, ops })
    }

    pub fn identity(dim: usize) -> Self {
        KrausChannel { input_dim: dim, output_dim: dim, ops: vec![CMatrix::identity(dim)] }
    }

    /// `ρ ↦ tr(ρ) I/d`.
    pub fn depolarizing(dim: usize) -> Self {
        let w = T::one() / T::from_usize_lossy(dim).sqrt();
        let mut ops = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut k = CMatrix::zeros(dim, dim);
                k[(i, j)] = Complex::new(w, T::zero());
                ops.push(k);
            }
        }
        KrausChannel { input_dim: dim, output_dim: dim, ops }
    }

    /// `ρ ↦ ρ ⊗ τ` for a fixed state `τ`.
    pub fn append_state(dim: usize, tau: &CMatrix<T>) -> Result<Self> {
        let e = check_density(tau)?;
        let d2 = tau.rows();
        let mut ops = Vec::new();
        for (k, &p) in e.values.iter().enumerate() {
            if p <= T::zero() {
                continue;
            }
            let col = CMatrix::from_fn(d2, 1, |i, _| e.vectors[(i, k)] * p.sqrt());
            ops.push(CMatrix::identity(dim).kron(&col));
        }
        KrausChannel::new(ops)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn kraus_ops(&self) -> &[CMatrix<T>] {
        &self.ops
    }

    /// `Σ_k K ρ K†`; accepts any square input of the right size.
    pub fn apply(&self, rho: &CMatrix<T>) -> Result<CMatrix<T>> {
        if rho.rows() != self.input_dim || !rho.is_square() {
            return Err(Error::dim(format!("channel on dimension {} applied to a {}x{} matrix", self.input_dim, rho.rows(), rho.cols())));
        }
        let mut out = CMatrix::zeros(self.output_dim, self.output_dim);
        for k in &self.ops {
            out = &out + &(&(k * rho) * &k.adjoint());
        }
        Ok(out)
    }
}

/// `apply_channel(ch, ρ)`.
pub fn apply_channel<T: Real>(ch: &KrausChannel<T>, rho: &CMatrix<T>) -> Result<CMatrix<T>> {
    ch.apply(rho)
}

/// Orthonormalises the columns of `v` in place (modified Gram–Schmidt).
fn orthonormalize_columns<T: Real>(v: &mut CMatrix<T>) -> Result<()> {
    let (rows, cols) = (v.rows(), v.cols());
    for j in 0..cols {
        for k in 0..j {
            let mut ov = Complex::new(T::zero(), T::zero());
            for i in 0..rows {
                ov += v[(i, k)].conj() * v[(i, j)];
            }
            for i in 0..rows {
                let vk = v[(i, k)];
                v[(i, j)] -= vk * ov;
            }
        }
        let n = (0..rows).map(|i| v[(i, j)].norm_sqr()).sum::<T>().sqrt();
        if n <= T::tol(1e-12) {
            return Err(Error::Numeric("degenerate Gaussian sample".into()));
        }
        for i in 0..rows {
            v[(i, j)] = v[(i, j)] / n;
        }
    }
    Ok(())
}

/// Random channel from `input_dim` to `output_dim` with `kraus_rank`
/// operators, cut from a Gaussian isometry.
pub fn random_cptp_rng<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    input_dim: usize,
    output_dim: usize,
    kraus_rank: usize,
) -> Result<KrausChannel<T>> {
    if output_dim * kraus_rank < input_dim {
        return Err(Error::dim(format!("no isometry from dimension {input_dim} into {output_dim}x{kraus_rank}")));
    }
    let mut v = CMatrix::ginibre(rng, output_dim * kraus_rank, input_dim);
    orthonormalize_columns(&mut v)?;
    let ops = (0..kraus_rank)
        .map(|r| CMatrix::from_fn(output_dim, input_dim, |i, j| v[(r * output_dim + i, j)]))
        .collect();
    KrausChannel::new(ops)
}

/// Seeded [`random_cptp_rng`] with Kraus rank `input_dim · output_dim`.
pub fn random_cptp<T: Real>(seed: u64, input_dim: usize, output_dim: usize) -> Result<KrausChannel<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_cptp_rng(&mut rng, input_dim, output_dim, input_dim * output_dim)
}

/// Random state `GG†/tr(GG†)` with `G` a `dim × rank` Ginibre matrix.
pub fn random_density<T: Real, R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> CMatrix<T> {
    let g = CMatrix::ginibre(rng, dim, rank);
    let m = &g * &g.adjoint();
    let tr = m.trace().re;
    m.scale(T::one() / tr).hermitian_part()
}

/// Projector onto the smallest-eigenvalue eigenvector and that eigenvalue.
pub fn min_eigenpair<T: Real>(h: &CMatrix<T>) -> Result<(T, Vec<C<T>>)> {
    let e = eig_hermitian(h)?;
    Ok((e.values[0], e.vectors.column(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behaviors::NsReport;

    fn singlet() -> CMatrix<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = vec![c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)];
        CMatrix::outer(&psi, &psi)
    }

    #[test]
    fn singlet_reaches_tsirelson() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let alice = [Povm::qubit_axis([0.0, 0.0, 1.0]), Povm::qubit_axis([1.0, 0.0, 0.0])];
        let bob = [Povm::qubit_axis([s, 0.0, s]), Povm::qubit_axis([-s, 0.0, s])];
        let b = quantum_behavior(&singlet(), &alice, &bob).unwrap();
        let corr = |x: usize, y: usize| {
            let mut e = 0.0;
            for a in 0..2 {
                for bb in 0..2 {
                    let sign = if a == bb { 1.0 } else { -1.0 };
                    e += sign * b.value(&[x, y], &[a, bb]);
                }
            }
            e
        };
        let chsh = corr(0, 0) + corr(0, 1) + corr(1, 0) - corr(1, 1);
        assert!((chsh.abs() - 2.0 * 2f64.sqrt()).abs() < 1e-9, "{chsh}");
        let NsReport { holds, .. } = b.is_nonsignalling_wings();
        assert!(holds);
    }

    #[test]
    fn sic_is_complete_and_informational() {
        let p = sic_povm_qubit::<f64>();
        assert!(Povm::new(p.effects().to_vec()).is_ok());
        let gram = CMatrix::from_fn(4, 4, |i, j| Complex::new(p.effects()[i].inner_re(&p.effects()[j]), 0.0));
        let e = eig_hermitian(&gram).unwrap();
        assert!(e.values[0] > 1e-9);
    }

    #[test]
    fn channels_preserve_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density::<f64, _>(&mut rng, 3, 3);
        assert!(KrausChannel::identity(3).apply(&rho).unwrap().max_abs_diff(&rho) < 1e-15);
        let dep = KrausChannel::<f64>::depolarizing(3).apply(&rho).unwrap();
        assert!(dep.max_abs_diff(&CMatrix::identity(3).scale(1.0 / 3.0)) < 1e-14);
        let ch = random_cptp::<f64>(4, 3, 2).unwrap();
        let out = ch.apply(&rho).unwrap();
        assert!((out.trace().re - 1.0).abs() < 1e-10);
        assert!(check_density(&out).is_ok());
    }

    #[test]
    fn incomplete_povm_rejected() {
        let e = vec![CMatrix::<f64>::basis_projector(2, 0)];
        assert!(matches!(Povm::new(e), Err(Error::Validation(_))));
    }
}

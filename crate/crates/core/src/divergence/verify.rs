//! Numerical checks of the chain rule for boxes, the conditional-box
//! lemmas, and the broadcasting gap.

use serde::Serialize;

use super::{relative_entropy_nl, ElrConfig, ElrResult};
use crate::behaviors::{
    conditional_pair1_box, is_broadcast_of, marginal_pair, pair0_probability, Behavior,
};
use crate::error::{Error, Result};
use crate::polytopes::{
    is_local, local_deterministic_vertices, lrns_vertices_broadcast_222, membership,
};
use crate::scalar::Real;
use crate::tensor::kl_raw;

/// Both sides of the chain rule at one joint input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainRuleResidual<T> {
    pub lhs: T,
    pub marginal_term: T,
    pub conditional_term: T,
    /// `|lhs − (marginal_term + conditional_term)|`; zero when both sides are infinite.
    pub residual: T,
    pub finite: bool,
}

/// Evaluates `S(P||Q) = S(P_0||Q_0) + Σ P(a0 b0) S(P(·|a0 b0)||Q(·|a0 b0))`
/// at `inputs = [x0, x1, y0, y1]`.
pub fn verify_chain_rule_box<T: Real>(
    p4: &Behavior<T>,
    q4: &Behavior<T>,
    inputs: [usize; 4],
) -> Result<ChainRuleResidual<T>> {
    p4.require_same_scenario(q4)?;
    if !p4.scenario().is_broadcast_shape() {
        return Err(Error::dim("chain rule needs an A0A1|B0B1 box"));
    }
    let [x0, x1, y0, y1] = inputs;
    let sites = p4.scenario().sites();
    let (oa, ob) = (sites[0].1, sites[2].1);
    let s = crate::index::ravel(&inputs, &p4.scenario().input_dims());
    let lhs = kl_raw(p4.setting(s), q4.setting(s));

    let mut p0 = Vec::with_capacity(oa * ob);
    let mut q0 = Vec::with_capacity(oa * ob);
    for a0 in 0..oa {
        for b0 in 0..ob {
            p0.push(pair0_probability(p4, (a0, b0), (x0, y0), (x1, y1)));
            q0.push(pair0_probability(q4, (a0, b0), (x0, y0), (x1, y1)));
        }
    }
    let marginal_term = kl_raw(&p0, &q0);

    let mut conditional_term = T::zero();
    for a0 in 0..oa {
        for b0 in 0..ob {
            let w = p0[a0 * ob + b0];
            if w <= T::zero() {
                continue;
            }
            let wq = q0[a0 * ob + b0];
            let mut pc = Vec::new();
            let mut qc = Vec::new();
            for a1 in 0..sites[1].1 {
                for b1 in 0..sites[3].1 {
                    pc.push(p4.value(&[x0, x1, y0, y1], &[a0, a1, b0, b1]) / w);
                    let v = q4.value(&[x0, x1, y0, y1], &[a0, a1, b0, b1]);
                    qc.push(if wq > T::zero() { v / wq } else { T::zero() });
                }
            }
            conditional_term += w * kl_raw(&pc, &qc);
        }
    }
    let rhs = marginal_term + conditional_term;
    let finite = lhs.is_finite() && rhs.is_finite();
    let residual = if finite {
        (lhs - rhs).abs()
    } else if lhs.is_infinite() == rhs.is_infinite() {
        T::zero()
    } else {
        T::infinity()
    };
    Ok(ChainRuleResidual {
        lhs,
        marginal_term,
        conditional_term,
        residual,
        finite,
    })
}

/// Outcome of a lemma whose hypothesis may not hold.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaStatus {
    Holds,
    Fails(String),
    Vacuous(String),
}

impl LemmaStatus {
    pub fn passed(&self) -> bool {
        !matches!(self, LemmaStatus::Fails(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport<T> {
    /// Nonlocal conditional of `p4` with positive weight: `(x0, y0) → (a0, b0)`.
    pub b1: LemmaStatus,
    pub b1_witnesses: Vec<((usize, usize), (usize, usize))>,
    /// Every conditional of `q4` is local.
    pub b2: LemmaStatus,
    pub b2_conditionals_checked: usize,
    /// The averaged conditional divergence is positive at every `(x0, y0)`.
    pub b3: LemmaStatus,
    pub b3_values: Vec<T>,
}

impl<T> LemmaReport<T> {
    pub fn passed(&self) -> bool {
        self.b1.passed() && self.b2.passed() && self.b3.passed()
    }
}

/// Local-membership check of every conditional pair-1 box of an LR_ns box.
pub fn lemma_b2_conditionals<T: Real>(q4: &Behavior<T>) -> Result<(LemmaStatus, usize)> {
    let sites = q4.scenario().sites().to_vec();
    let local = local_deterministic_vertices::<T>(&crate::behaviors::Scenario::bipartite(
        sites[1].0, sites[1].1, sites[3].0, sites[3].1,
    ))?;
    let mut checked = 0;
    for x0 in 0..sites[0].0 {
        for y0 in 0..sites[2].0 {
            for a0 in 0..sites[0].1 {
                for b0 in 0..sites[2].1 {
                    let Some(c) = conditional_pair1_box(q4, (a0, b0), (x0, y0))? else {
                        continue;
                    };
                    checked += 1;
                    if !membership(&c, &local, T::tol(1e-9))?.inside {
                        return Ok((
                            LemmaStatus::Fails(format!(
                                "conditional at x0={x0} y0={y0} a0={a0} b0={b0} is nonlocal"
                            )),
                            checked,
                        ));
                    }
                }
            }
        }
    }
    Ok((LemmaStatus::Holds, checked))
}

/// Checks the three conditional-box lemmas for `p4` against an LR_ns box `q4`
/// on the (2,2,2) broadcast scenario.
pub fn verify_lemma_conditionals<T: Real>(p4: &Behavior<T>, q4: &Behavior<T>) -> Result<LemmaReport<T>> {
    p4.require_same_scenario(q4)?;
    let lrns = lrns_vertices_broadcast_222::<T>();
    if p4.scenario() != lrns.scenario() {
        return Err(Error::dim("lemma checks run on the (2,2,2) broadcast scenario"));
    }
    if !membership(q4, &lrns, T::tol(1e-9))?.inside {
        return Err(Error::pre("q4 is not in LR_ns"));
    }
    let ns = p4.is_nonsignalling(&[0, 2]);
    if !ns.holds {
        return Err(Error::pre(format!(
            "p4 signals between the pairs (violation {:e})",
            ns.max_violation.to_f64_lossy()
        )));
    }

    let (b2, b2_conditionals_checked) = lemma_b2_conditionals(q4)?;

    let pair1 = marginal_pair(p4, 1)?;
    if is_local(&pair1)? {
        let why = "pair-1 marginal of p4 is local".to_string();
        return Ok(LemmaReport {
            b1: LemmaStatus::Vacuous(why.clone()),
            b1_witnesses: Vec::new(),
            b2,
            b2_conditionals_checked,
            b3: LemmaStatus::Vacuous(why),
            b3_values: Vec::new(),
        });
    }

    let guard = T::lit(crate::behaviors::CONDITIONING_GUARD);
    let mut b1 = LemmaStatus::Holds;
    let mut b1_witnesses = Vec::new();
    let mut b3 = LemmaStatus::Holds;
    let mut b3_values = Vec::new();
    for x0 in 0..2 {
        for y0 in 0..2 {
            let mut found = None;
            for a0 in 0..2 {
                for b0 in 0..2 {
                    if found.is_some() {
                        continue;
                    }
                    if pair0_probability(p4, (a0, b0), (x0, y0), (0, 0)) <= guard {
                        continue;
                    }
                    if let Some(c) = conditional_pair1_box(p4, (a0, b0), (x0, y0))? {
                        if !is_local(&c)? {
                            found = Some((a0, b0));
                        }
                    }
                }
            }
            match found {
                Some(ab) => b1_witnesses.push(((x0, y0), ab)),
                None => {
                    if b1.passed() {
                        b1 = LemmaStatus::Fails(format!("no nonlocal conditional at x0={x0} y0={y0}"));
                    }
                }
            }

            let mut best = T::neg_infinity();
            for x1 in 0..2 {
                for y1 in 0..2 {
                    let r = verify_chain_rule_box(p4, q4, [x0, x1, y0, y1])?;
                    best = best.max(r.conditional_term);
                }
            }
            if !(best > T::zero()) && b3.passed() {
                b3 = LemmaStatus::Fails(format!("conditional divergence vanishes at x0={x0} y0={y0}"));
            }
            b3_values.push(best);
        }
    }
    Ok(LemmaReport {
        b1,
        b1_witnesses,
        b2,
        b2_conditionals_checked,
        b3,
        b3_values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Prop2Report<T> {
    pub elr_p4: ElrResult<T>,
    pub elr_p2: ElrResult<T>,
    pub gap: T,
    /// Sum of both runs' upper-minus-lower bound gaps.
    pub tolerance: T,
    pub p2_nonlocal: bool,
    /// `gap` exceeds `tolerance`.
    pub strict: bool,
}

/// Relative entropies of a broadcast `p4` and of the box `p2` it broadcasts.
pub fn prop2_gap<T: Real>(p4: &Behavior<T>, p2: &Behavior<T>, cfg: &ElrConfig) -> Result<Prop2Report<T>> {
    if !is_broadcast_of(p4, p2)? {
        return Err(Error::pre("p4 is not a broadcast of p2"));
    }
    let local = local_deterministic_vertices::<T>(p2.scenario())?;
    let p2_nonlocal = !membership(p2, &local, T::tol(1e-9))?.inside;
    let lrns = if p4.scenario() == lrns_vertices_broadcast_222::<T>().scenario() {
        lrns_vertices_broadcast_222::<T>()
    } else {
        return Err(Error::dim("broadcast gap is implemented for (2,2,2) pairs"));
    };
    let (elr_p4, elr_p2) = rayon::join(
        || relative_entropy_nl(p4, &lrns, cfg),
        || relative_entropy_nl(p2, &local, cfg),
    );
    let (elr_p4, elr_p2) = (elr_p4?, elr_p2?);
    let gap = elr_p4.value - elr_p2.value;
    let tolerance = elr_p4.gap() + elr_p2.gap();
    Ok(Prop2Report {
        strict: gap > tolerance,
        gap,
        tolerance,
        p2_nonlocal,
        elr_p4,
        elr_p2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behaviors::{pr_box, product};

    #[test]
    fn identical_boxes_give_zero_on_both_sides() {
        let b = product(&pr_box::<f64>(), &pr_box());
        let r = verify_chain_rule_box(&b, &b, [1, 0, 1, 1]).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn pr_squared_lemmas() {
        let p4 = product(&pr_box::<f64>(), &pr_box());
        let cat = lrns_vertices_broadcast_222::<f64>();
        let q4 = cat.vertices()[37].mix(&cat.vertices()[300], 0.4).unwrap();
        let r = verify_lemma_conditionals(&p4, &q4).unwrap();
        assert_eq!(r.b1, LemmaStatus::Holds);
        assert_eq!(r.b2, LemmaStatus::Holds);
        assert_eq!(r.b3, LemmaStatus::Holds);
        assert_eq!(r.b1_witnesses.len(), 4);
    }

    #[test]
    fn non_lrns_reference_is_rejected() {
        let p4 = product(&pr_box::<f64>(), &pr_box());
        assert!(matches!(
            verify_lemma_conditionals(&p4, &p4),
            Err(Error::Precondition(_))
        ));
    }
}

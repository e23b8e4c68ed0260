//! Box divergences, the relative entropy of nonlocality, and the checks
//! behind the no-broadcasting argument for boxes.

mod elr;
mod verify;

pub use elr::{
    cross_check_elr, elr_lower_bound, relative_entropy_nl, ElrConfig, ElrResult, LadderEntry,
};
pub use verify::{
    lemma_b2_conditionals, prop2_gap, verify_chain_rule_box, verify_lemma_conditionals,
    ChainRuleResidual, LemmaReport, LemmaStatus, Prop2Report,
};

use serde::Serialize;

use crate::behaviors::Behavior;
use crate::error::{Error, Result};
use crate::index::unravel;
use crate::scalar::Real;
use crate::tensor::kl_raw;

/// Box KL divergence together with the per-setting values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxDivergenceReport<T> {
    pub value: T,
    pub argmax_setting: Vec<usize>,
    pub per_setting: Vec<T>,
}

/// `max_{x,y} S(P(·|x,y) || Q(·|x,y))`.
///
/// The supremum over input distributions of the joint divergence is linear
/// in the distribution, so it is attained at a point mass.
pub fn box_kl<T: Real>(p: &Behavior<T>, q: &Behavior<T>) -> Result<BoxDivergenceReport<T>> {
    p.require_same_scenario(q)?;
    let per_setting: Vec<T> = (0..p.num_settings())
        .map(|s| kl_raw(p.setting(s), q.setting(s)))
        .collect();
    let (best, value) = per_setting
        .iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    Ok(BoxDivergenceReport {
        value,
        argmax_setting: unravel(best, &p.scenario().input_dims()),
        per_setting,
    })
}

/// Joint divergence `S(π·P || π·Q)` for an input distribution `π`.
pub fn joint_kl<T: Real>(p: &Behavior<T>, q: &Behavior<T>, pi: &[T]) -> Result<T> {
    p.require_same_scenario(q)?;
    if pi.len() != p.num_settings() {
        return Err(Error::dim(format!(
            "{} input weights for {} settings",
            pi.len(),
            p.num_settings()
        )));
    }
    let mut acc = T::zero();
    for (s, &w) in pi.iter().enumerate() {
        for (&a, &b) in p.setting(s).iter().zip(q.setting(s)) {
            let (ja, jb) = (w * a, w * b);
            if ja > T::zero() {
                if jb <= T::zero() {
                    return Ok(T::infinity());
                }
                acc += ja * (ja / jb).log2();
            }
        }
    }
    Ok(acc.max(T::zero()))
}

/// Supremum of [`joint_kl`] over the grid `{k/n}` of input distributions.
pub fn box_kl_pi_grid<T: Real>(p: &Behavior<T>, q: &Behavior<T>, resolution: usize) -> Result<T> {
    let s = p.num_settings();
    let mut best = T::neg_infinity();
    let mut counts = vec![0usize; s];
    compositions(resolution, s, &mut counts, 0, &mut |c| {
        let pi: Vec<T> = c
            .iter()
            .map(|&k| T::from_usize_lossy(k) / T::from_usize_lossy(resolution))
            .collect();
        if let Ok(v) = joint_kl(p, q, &pi) {
            best = best.max(v);
        }
    });
    Ok(best)
}

/// Number of points of the resolution-`n` grid on the `parts`-simplex.
pub fn pi_grid_size(n: usize, parts: usize) -> u128 {
    // C(n + parts - 1, parts - 1)
    let k = parts.saturating_sub(1) as u128;
    let mut c = 1u128;
    for i in 0..k {
        c = c * (n as u128 + k - i) / (i + 1);
    }
    c
}

pub(crate) fn compositions(left: usize, parts: usize, buf: &mut Vec<usize>, at: usize, f: &mut impl FnMut(&[usize])) {
    if at + 1 == parts {
        buf[at] = left;
        f(buf);
        return;
    }
    for k in 0..=left {
        buf[at] = k;
        compositions(left - k, parts, buf, at + 1, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behaviors::{pr_box, Scenario};

    #[test]
    fn pr_box_against_uniform_is_one_bit_everywhere() {
        let r = box_kl(&pr_box::<f64>(), &Behavior::uniform(Scenario::chsh())).unwrap();
        assert!(r.per_setting.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_boxes_have_zero_divergence() {
        let pr = pr_box::<f64>();
        assert_eq!(box_kl(&pr, &pr).unwrap().value, 0.0);
    }

    #[test]
    fn grid_size_counts_compositions() {
        assert_eq!(pi_grid_size(37, 4), 9880);
        assert_eq!(pi_grid_size(3, 2), 4);
    }
}

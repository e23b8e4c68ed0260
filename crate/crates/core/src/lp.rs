//! Dense primal simplex for equality-constrained feasibility problems
//! `A x = b, x ≥ 0`, with Bland's rule for anti-cycling.
//!
//! Only phase 1 is needed: either the artificial variables are driven to
//! zero, or the phase-1 dual is a Farkas certificate `y` with `yᵀA ≤ 0`
//! and `yᵀb > 0`.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub(crate) const FEASIBILITY_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const REDUCED_COST_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone)]
pub(crate) enum Phase1<T> {
    Feasible { x: Vec<T> },
    Infeasible { farkas: Vec<T>, infeasibility: T },
}

/// Solves `Σ_j columns[j]·x_j = rhs, x ≥ 0` for feasibility.
pub(crate) fn feasibility<T: Real>(columns: &[Vec<T>], rhs: &[T]) -> Result<Phase1<T>> {
    let m = rhs.len();
    let n = columns.len();
    if columns.iter().any(|c| c.len() != m) {
        return Err(Error::dim("constraint columns of unequal height"));
    }
    let width = n + m + 1;
    let at = |i: usize, j: usize| i * width + j;
    let mut tab = vec![T::zero(); (m + 1) * width];

    // Flip rows so that the right-hand side is nonnegative.
    let sign: Vec<T> = rhs
        .iter()
        .map(|&v| if v < T::zero() { -T::one() } else { T::one() })
        .collect();
    for i in 0..m {
        for (j, col) in columns.iter().enumerate() {
            tab[at(i, j)] = sign[i] * col[i];
        }
        tab[at(i, n + i)] = T::one();
        tab[at(i, n + m)] = sign[i] * rhs[i];
    }
    // Reduced costs for minimizing the sum of artificials.
    for j in 0..n {
        let mut s = T::zero();
        for i in 0..m {
            s += tab[at(i, j)];
        }
        tab[at(m, j)] = -s;
    }
    let mut z = T::zero();
    for i in 0..m {
        z += tab[at(i, n + m)];
    }
    tab[at(m, n + m)] = -z;

    let mut basis: Vec<usize> = (n..n + m).collect();
    let rc_tol = T::tol(REDUCED_COST_TOL);
    let piv_tol = T::tol(PIVOT_TOL);

    let mut pivots = 0;
    loop {
        let entering = (0..n + m).find(|&j| tab[at(m, j)] < -rc_tol);
        let Some(e) = entering else { break };

        let mut leave: Option<(usize, T)> = None;
        for i in 0..m {
            let a = tab[at(i, e)];
            if a > piv_tol {
                let ratio = tab[at(i, n + m)] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        let slack = T::tol(1e-12) * (T::one() + best.abs());
                        if ratio < best - slack || (ratio <= best + slack && basis[i] < basis[r]) {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
        }
        let Some((r, _)) = leave else {
            // Phase 1 is bounded below by zero, so this is a numerical breakdown.
            return Err(Error::Solver {
                message: "unbounded phase-1 direction".into(),
                residual: (-tab[at(m, n + m)]).to_f64_lossy(),
            });
        };

        let p = tab[at(r, e)];
        for j in 0..width {
            tab[at(r, j)] /= p;
        }
        for i in 0..=m {
            if i == r {
                continue;
            }
            let f = tab[at(i, e)];
            if f != T::zero() {
                for j in 0..width {
                    let v = tab[at(r, j)];
                    tab[at(i, j)] -= f * v;
                }
            }
        }
        basis[r] = e;

        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(Error::Solver {
                message: format!("pivot budget of {MAX_PIVOTS} exhausted"),
                residual: (-tab[at(m, n + m)]).to_f64_lossy(),
            });
        }
    }

    let infeasibility = -tab[at(m, n + m)];
    if infeasibility <= T::tol(FEASIBILITY_TOL) {
        let mut x = vec![T::zero(); n];
        for (i, &bv) in basis.iter().enumerate() {
            if bv < n {
                x[bv] = tab[at(i, n + m)].max(T::zero());
            }
        }
        Ok(Phase1::Feasible { x })
    } else {
        let farkas = (0..m)
            .map(|i| sign[i] * (T::one() - tab[at(m, n + i)]))
            .collect();
        Ok(Phase1::Infeasible {
            farkas,
            infeasibility,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasible_point_satisfies_constraints() {
        // x0 + x1 = 1, x0 - x1 = 0.5
        let cols: Vec<Vec<f64>> = vec![vec![1.0, 1.0], vec![1.0, -1.0]];
        match feasibility(&cols, &[1.0, 0.5]).unwrap() {
            Phase1::Feasible { x } => {
                assert!((x[0] - 0.75).abs() < 1e-12);
                assert!((x[1] - 0.25).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn farkas_certificate_for_infeasible_system() {
        // x0 + x1 = 1, x0 + x1 = 2
        let cols = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        match feasibility(&cols, &[1.0, 2.0]).unwrap() {
            Phase1::Infeasible { farkas, infeasibility } => {
                assert!(infeasibility > 0.5);
                for c in &cols {
                    let v: f64 = c.iter().zip(&farkas).map(|(a, y)| a * y).sum();
                    assert!(v <= 1e-12);
                }
                let yb = farkas[0] + 2.0 * farkas[1];
                assert!(yb > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn redundant_rows_are_harmless() {
        let cols = vec![vec![1.0, 2.0, 1.0], vec![0.0, 0.0, 1.0]];
        assert!(matches!(
            feasibility(&cols, &[0.5, 1.0, 1.0]).unwrap(),
            Phase1::Feasible { .. }
        ));
    }

    #[test]
    fn negative_right_hand_side() {
        let cols: Vec<Vec<f64>> = vec![vec![-1.0]];
        match feasibility(&cols, &[-3.0]).unwrap() {
            Phase1::Feasible { x } => assert!((x[0] - 3.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}

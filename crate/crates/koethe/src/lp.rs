//! Small exact-arithmetic simplex for L1-minimal solutions of linear
//! systems.
//!
//! Minimizes sum |x_i| subject to A x = b over exact rationals by the
//! usual split x = p - m with p, m >= 0, a phase-1 basis of artificials,
//! and Bland's rule throughout, which guarantees termination without any
//! tolerance. Sized for a few thousand columns at most.

use crate::scalar::Scalar;

/// Hard cap on simplex pivots; systems here are tiny, so hitting the cap
/// means something is wrong and the caller falls back.
const MAX_PIVOTS: usize = 50_000;

/// Minimizes sum_i |x_i| subject to `rows`: each row is (coefficients, rhs).
/// Returns None if the system is infeasible or the pivot cap is hit.
pub fn minimize_l1(num_vars: usize, rows: &[(Vec<Scalar>, Scalar)]) -> Option<Vec<Scalar>> {
    let r = rows.len();
    if r == 0 {
        return Some(vec![Scalar::zero(); num_vars]);
    }
    // Columns: p_0..p_{v-1}, m_0..m_{v-1}, artificials a_0..a_{r-1}.
    let cols = 2 * num_vars + r;
    let mut a = vec![vec![Scalar::zero(); cols]; r];
    let mut b = Vec::with_capacity(r);
    for (ri, (coeffs, rhs)) in rows.iter().enumerate() {
        assert_eq!(coeffs.len(), num_vars);
        let flip = rhs.is_negative();
        for (ci, v) in coeffs.iter().enumerate() {
            let v = if flip { -v } else { v.clone() };
            a[ri][ci] = v.clone();
            a[ri][num_vars + ci] = -&v;
        }
        a[ri][2 * num_vars + ri] = Scalar::one();
        b.push(if flip { -rhs } else { rhs.clone() });
    }
    let mut basis: Vec<usize> = (0..r).map(|ri| 2 * num_vars + ri).collect();

    // Phase 1: drive the artificials to zero.
    let phase1_cost: Vec<Scalar> = (0..cols)
        .map(|c| if c >= 2 * num_vars { Scalar::one() } else { Scalar::zero() })
        .collect();
    if !simplex(&mut a, &mut b, &mut basis, &phase1_cost, cols)? {
        return None;
    }
    let obj1: Scalar = basis
        .iter()
        .zip(&b)
        .filter(|(c, _)| **c >= 2 * num_vars)
        .fold(Scalar::zero(), |acc, (_, v)| &acc + v);
    if !obj1.is_zero() {
        return None;
    }

    // Phase 2: minimize the L1 mass; artificials may stay basic at zero
    // but must never re-enter.
    let phase2_cost: Vec<Scalar> = (0..cols)
        .map(|c| if c < 2 * num_vars { Scalar::one() } else { Scalar::zero() })
        .collect();
    if !simplex(&mut a, &mut b, &mut basis, &phase2_cost, 2 * num_vars)? {
        return None;
    }

    let mut x = vec![Scalar::zero(); num_vars];
    for (row, col) in basis.iter().enumerate() {
        if *col < num_vars {
            x[*col] = &x[*col] + &b[row];
        } else if *col < 2 * num_vars {
            x[*col - num_vars] = &x[*col - num_vars] - &b[row];
        }
    }
    Some(x)
}

/// Runs the simplex to optimality for the given cost vector, allowing only
/// columns < enter_limit to enter. Returns None on pivot-cap overrun,
/// Some(true) at optimality. The tableau is kept in basis-eliminated form.
fn simplex(
    a: &mut [Vec<Scalar>],
    b: &mut [Scalar],
    basis: &mut [usize],
    cost: &[Scalar],
    enter_limit: usize,
) -> Option<bool> {
    let rows = a.len();
    for _ in 0..MAX_PIVOTS {
        // Reduced costs: cost_c - sum_r cost_{basis_r} * a[r][c].
        let mut entering = None;
        for c in 0..enter_limit {
            if basis.contains(&c) {
                continue;
            }
            let mut red = cost[c].clone();
            for r in 0..rows {
                let cb = &cost[basis[r]];
                if !cb.is_zero() && !a[r][c].is_zero() {
                    red = &red - &(cb * &a[r][c]);
                }
            }
            if red.is_negative() {
                entering = Some(c);
                break; // Bland: smallest index.
            }
        }
        let e = match entering {
            None => return Some(true),
            Some(e) => e,
        };
        // Ratio test, ties broken by smallest basis index (Bland).
        let mut leave: Option<(usize, Scalar)> = None;
        for r in 0..rows {
            if a[r][e].is_positive() {
                let ratio = &b[r] / &a[r][e];
                let better = match &leave {
                    None => true,
                    Some((lr, lv)) => {
                        ratio < *lv || (ratio == *lv && basis[r] < basis[*lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let (lr, _) = leave?; // Unbounded: cannot happen for L1 problems.
        pivot(a, b, basis, lr, e);
    }
    None
}

fn pivot(a: &mut [Vec<Scalar>], b: &mut [Scalar], basis: &mut [usize], lr: usize, e: usize) {
    let rows = a.len();
    let inv = a[lr][e].recip();
    for cell in a[lr].iter_mut() {
        *cell = &*cell * &inv;
    }
    b[lr] = &b[lr] * &inv;
    let pivot_row = a[lr].clone();
    for r in 0..rows {
        if r != lr && !a[r][e].is_zero() {
            let f = a[r][e].clone();
            for (cell, p) in a[r].iter_mut().zip(&pivot_row) {
                *cell = &*cell - &(&f * p);
            }
            b[r] = &b[r] - &(&f * &b[lr]);
        }
    }
    basis[lr] = e;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: i64, d: i64) -> Scalar {
        Scalar::ratio(n, d)
    }

    fn mass(x: &[Scalar]) -> Scalar {
        x.iter().fold(Scalar::zero(), |acc, v| &acc + &v.abs())
    }

    #[test]
    fn single_equation() {
        let x = minimize_l1(1, &[(vec![s(2, 1)], s(1, 1))]).unwrap();
        assert_eq!(x[0], s(1, 2));
    }

    #[test]
    fn negative_rhs_and_sign_split() {
        let x = minimize_l1(1, &[(vec![s(4, 1)], s(-1, 1))]).unwrap();
        assert_eq!(x[0], s(-1, 4));
    }

    #[test]
    fn prefers_cheap_column() {
        // c1 + 4 c2 = 1: putting everything on c2 costs 1/4.
        let x = minimize_l1(2, &[(vec![s(1, 1), s(4, 1)], s(1, 1))]).unwrap();
        assert_eq!(mass(&x), s(1, 4));
        let lhs = &x[0] + &(&x[1] * &s(4, 1));
        assert_eq!(lhs, s(1, 1));
    }

    #[test]
    fn two_constraints() {
        // x0 + x1 = 2, x0 - x1 = 0 forces x0 = x1 = 1.
        let x = minimize_l1(
            2,
            &[
                (vec![s(1, 1), s(1, 1)], s(2, 1)),
                (vec![s(1, 1), s(-1, 1)], s(0, 1)),
            ],
        )
        .unwrap();
        assert_eq!(x, vec![s(1, 1), s(1, 1)]);
    }

    #[test]
    fn infeasible_system() {
        let r = minimize_l1(1, &[(vec![s(0, 1)], s(1, 1))]);
        assert!(r.is_none());
    }

    #[test]
    fn triangular_chain() {
        // Near-cancellation chain: delta*c1 = 0, delta*c2 + c1 = 0,
        // delta*c3 + c2 = 1 with delta = 1/8 forces c3 = 8.
        let d = s(1, 8);
        let z = s(0, 1);
        let x = minimize_l1(
            3,
            &[
                (vec![d.clone(), z.clone(), z.clone()], z.clone()),
                (vec![s(1, 1), d.clone(), z.clone()], z.clone()),
                (vec![z.clone(), s(1, 1), d.clone()], s(1, 1)),
            ],
        )
        .unwrap();
        assert_eq!(x, vec![z.clone(), z, s(8, 1)]);
    }
}

//! Exact optimization engines: simplex LP, weighted quadratic transport and
//! linear maximization over increasing rules.

mod monotone;
mod quad_transport;
mod simplex;

pub use monotone::{maximize_monotone_linear, monotone_objective, MonotoneOptimum};
pub use quad_transport::{
    solve_quad_transport, solve_quad_transport_from, verify_quad_kkt, QuadError,
    QuadTransportProblem, QuadTransportSolution,
};
pub use simplex::{
    solve_lp, solve_lp_traced, verify_optimal, Constraint, LpError, LpProblem, LpSolution,
    LpStatus, RowSense, Sense, VarBounds, PIVOT_FACTOR, PIVOT_LIMIT_VAR,
};

use crate::rational::Rational;

/// Solves the square system `a z = b` by exact Gaussian elimination.
/// Returns `None` when `a` is singular.
pub(crate) fn solve_square(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for k in col..n {
            if !a[col][k].is_zero() {
                a[col][k] *= &inv;
            }
        }
        b[col] *= &inv;
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for k in col..n {
                if !a[col][k].is_zero() {
                    let change = &factor * &a[col][k];
                    a[r][k] -= change;
                }
            }
            let change = &factor * &b[col];
            b[r] -= change;
        }
    }
    Some(b)
}

use serde::Serialize;

use crate::rational::Rational;

/// Optimum of a linear objective over increasing rules `q: Y -> [0,1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MonotoneOptimum {
    pub value: Rational,
    /// The 0/1 rule `1{y >= threshold}`.
    pub rule: Vec<Rational>,
    /// Smallest optimal threshold in `1..=len+1`; `len+1` means the zero rule.
    pub threshold: usize,
}

/// Maximizes `sum_y p2(y) c(y) q(y)` over increasing `q` with values in `[0,1]`.
///
/// The feasible set is the convex hull of the threshold rules, so scanning the
/// suffix sums is exact. Ties go to the smallest threshold, which makes the
/// returned rule pointwise largest among optimal extreme points.
pub fn maximize_monotone_linear(c: &[Rational], p2: &[Rational]) -> MonotoneOptimum {
    let n = c.len();
    let mut suffix = vec![Rational::zero(); n + 1];
    for y in (0..n).rev() {
        suffix[y] = &suffix[y + 1] + &p2[y] * &c[y];
    }
    let mut best = n;
    for k in (0..n).rev() {
        if suffix[k] >= suffix[best] {
            best = k;
        }
    }
    let rule = (0..n)
        .map(|y| if y >= best { Rational::one() } else { Rational::zero() })
        .collect();
    MonotoneOptimum {
        value: suffix[best].clone(),
        rule,
        threshold: best + 1,
    }
}

/// `sum_y p2(y) c(y) q(y)` for an arbitrary rule.
pub fn monotone_objective(c: &[Rational], p2: &[Rational], q: &[Rational]) -> Rational {
    c.iter()
        .zip(p2)
        .zip(q)
        .map(|((c, p), q)| c * p * q)
        .sum()
}

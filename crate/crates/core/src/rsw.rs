//! The best safe allocation: optimal for every seller type subject to seller
//! Bayesian incentive compatibility and buyer ex post incentive compatibility
//! and participation.
//!
//! The relaxed problem keeps seller local upward BIC, buyer local downward
//! EPIC and buyer EPIR at the lowest type. With downward EPIC binding, the
//! payments are pinned down by the rule and `u0(x) = u2(x,1)`, and the seller
//! payoff is
//!
//! `U1(x) = E_y[VS(x,y) q(x,y)] + v11(x) + E_y v12(y) - u0(x)`.
//!
//! Slack in a downward EPIC only lowers `E_y t(x,y)`, which `u0(x)` already
//! does, so the LP over increments `d(x,k) = q(x,k) - q(x,k-1) >= 0` and
//! `u0 >= 0` has the same optimal payoffs. Its duals on the seller rows give
//! the multipliers `kappa`.

use serde::Serialize;
use thiserror::Error;

use crate::checks::Checks;
use crate::env::{
    check_constraints, derived_quantities, interim_rules, seller_payoff_vector, Allocation,
    Belief, DerivedQuantities, Environment, Matrix,
};
use crate::lp::{
    maximize_monotone_linear, monotone_objective, solve_lp, LpError, LpStatus, Sense, VarBounds,
};
use crate::program::{IncrementLp, Lin, MechanismLp};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RswError {
    #[error("objective weights must be positive and match the seller types")]
    BadWeights,
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("relaxed problem returned status {0:?}")]
    Status(LpStatus),
    #[error("post-verification failed: {}", .0.join(", "))]
    Verification(Vec<String>),
}

/// Multipliers and supporting belief of the relaxed problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RswCertificate {
    /// `kappa[x-1]` multiplies the seller local upward BIC of type `x`, `x < x_size`.
    pub kappa: Vec<Rational>,
    /// `lambda[x-1][y-1] = pi1(x) (1 - P2(y-1))`.
    pub lambda: Matrix,
    pub pi1: Belief,
}

impl RswCertificate {
    /// `kappa(x)` for `x` in `0..=x_size`, zero at both ends.
    pub fn kappa_at(&self, x: usize) -> Rational {
        if x == 0 || x > self.kappa.len() {
            Rational::zero()
        } else {
            self.kappa[x - 1].clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RswSolution {
    pub allocation: Allocation,
    pub certificate: RswCertificate,
    pub payoffs: Vec<Rational>,
    pub weights: Vec<Rational>,
    pub verification: Checks,
    pub pivots: usize,
}

/// Solves the relaxed problem with the prior as objective weights.
pub fn solve_rsw(env: &Environment) -> Result<RswSolution, RswError> {
    solve_rsw_weighted(env, env.p1())
}

/// Solves the relaxed problem maximizing `sum_x w(x) U1(x)`; any positive
/// weights give the same payoff vector.
pub fn solve_rsw_weighted(env: &Environment, weights: &[Rational]) -> Result<RswSolution, RswError> {
    let nx = env.x_size();
    if weights.len() != nx || weights.iter().any(|w| !w.is_positive()) {
        return Err(RswError::BadWeights);
    }
    let d = derived_quantities(env);
    let mut m = IncrementLp::new(env, Sense::Max, VarBounds::nonneg());
    let mut objective = Lin::default();
    for x in 0..nx {
        objective = objective + m.payoff(x) * &weights[x];
    }
    m.set_objective(&objective);
    let bic_rows: Vec<usize> = (0..nx.saturating_sub(1))
        .map(|x| {
            let (lhs, rhs) = (m.payoff(x), m.deviation(x + 1, x));
            m.add_ge(lhs, rhs)
        })
        .collect();
    let sol = solve_lp(&m.lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(RswError::Status(sol.status));
    }
    let allocation = m.allocation(&sol);

    let total: Rational = weights.iter().sum();
    let raw: Vec<Rational> = bic_rows.iter().map(|&r| -&sol.duals[r]).collect();
    let raw_at = |x: usize| -> Rational {
        if x == 0 || x > raw.len() {
            Rational::zero()
        } else {
            raw[x - 1].clone()
        }
    };
    let pi1: Vec<Rational> = (1..=nx)
        .map(|x| (&weights[x - 1] + raw_at(x) - raw_at(x - 1)) / &total)
        .collect();
    let lambda = closed_form_lambda(&pi1, &d);
    let certificate = RswCertificate {
        kappa: raw.iter().map(|k| k / &total).collect(),
        lambda,
        pi1: Belief::new_unchecked(pi1),
    };
    let verification = verify_rsw_weighted(env, &allocation, &certificate, weights);
    if !verification.all_passed() {
        return Err(RswError::Verification(verification.failures()));
    }
    Ok(RswSolution {
        payoffs: seller_payoff_vector(env, &allocation),
        allocation,
        certificate,
        weights: weights.to_vec(),
        verification,
        pivots: sol.pivots,
    })
}

fn closed_form_lambda(pi1: &[Rational], d: &DerivedQuantities) -> Matrix {
    pi1.iter()
        .map(|w| {
            (0..d.cdf2.len())
                .map(|y| w * (Rational::one() - d.cdf(y)))
                .collect()
        })
        .collect()
}

/// All structural conclusions an RSW allocation and its certificate satisfy.
pub fn verify_rsw(env: &Environment, g: &Allocation, cert: &RswCertificate) -> Checks {
    verify_rsw_weighted(env, g, cert, env.p1())
}

/// [`verify_rsw`] for a certificate of the problem with objective weights `weights`.
pub fn verify_rsw_weighted(
    env: &Environment,
    g: &Allocation,
    cert: &RswCertificate,
    weights: &[Rational],
) -> Checks {
    let (nx, ny) = (env.x_size(), env.y_size());
    let total: Rational = weights.iter().sum();
    let d = derived_quantities(env);
    let pi1 = cert.pi1.as_slice();
    let mut checks = Checks::new();
    checks.push(
        "certificate multipliers are nonnegative",
        cert.kappa.iter().all(|k| !k.is_negative()) && cert.kappa.len() + 1 == nx,
    );
    checks.push(
        "certificate belief is a distribution",
        Belief::new(pi1.to_vec()).is_ok() && pi1.len() == nx,
    );
    checks.push(
        "certificate belief matches the multipliers",
        (1..=nx).all(|x| {
            pi1[x - 1] == &weights[x - 1] / &total + cert.kappa_at(x) - cert.kappa_at(x - 1)
        }),
    );
    checks.push(
        "buyer multipliers follow the closed form",
        cert.lambda == closed_form_lambda(pi1, &d),
    );
    let report = check_constraints(env, g, &env.prior());
    let binding_epic = (0..nx).all(|x| (1..ny).all(|y| report.buyer_epic[x][y][y - 1].is_zero()));
    checks.push("buyer local downward EPIC binds", binding_epic);
    checks.push(
        "buyer EPIR binds at the lowest type",
        (0..nx).all(|x| report.buyer_epir[x][0].is_zero()),
    );
    checks.push("buyer EPIC", report.flags.buyer_epic);
    checks.push("buyer EPIR", report.flags.buyer_epir);
    checks.push("seller BIC", report.flags.seller_bic);
    checks.push("seller IIR", report.flags.seller_iir);
    checks.push(
        "reduced-surplus optimality",
        verify_reduced_surplus_optimality(env, g, cert),
    );
    checks.push(
        "types outside the belief do not trade",
        (0..nx).all(|x| {
            !pi1[x].is_zero()
                || (g.q[x].iter().all(Rational::is_zero) && g.t[x].iter().all(Rational::is_zero))
        }),
    );
    let rules = interim_rules(env, g, &env.prior());
    checks.push(
        "seller interim rule decreasing",
        rules.q1.windows(2).all(|w| w[0] >= w[1]),
    );
    checks.push(
        "rows increasing in the buyer type",
        g.q.iter().all(|row| row.windows(2).all(|w| w[0] <= w[1])),
    );
    checks
}

/// Checks that each row `q(x,.)` maximizes
/// `sum_y p2(y) [pi1(x) VS(x,y) - kappa(x-1) dv1(x)] q(y)` over increasing
/// rules, and that positive multipliers sit on binding seller local upward BICs.
pub fn verify_reduced_surplus_optimality(
    env: &Environment,
    g: &Allocation,
    cert: &RswCertificate,
) -> bool {
    let (nx, ny) = (env.x_size(), env.y_size());
    let d = derived_quantities(env);
    let pi1 = cert.pi1.as_slice();
    if pi1.len() != nx || g.q.len() != nx {
        return false;
    }
    for x in 0..nx {
        let row = &g.q[x];
        if row.len() != ny
            || row.iter().any(|v| v.is_negative() || *v > 1)
            || row.windows(2).any(|w| w[0] > w[1])
        {
            return false;
        }
        let penalty = cert.kappa_at(x) * &d.dv1[x];
        let c: Vec<Rational> = (0..ny)
            .map(|y| &pi1[x] * &d.virtual_surplus[x][y] - &penalty)
            .collect();
        let best = maximize_monotone_linear(&c, env.p2());
        if monotone_objective(&c, env.p2(), row) != best.value {
            return false;
        }
    }
    let report = check_constraints(env, g, &env.prior());
    (1..nx).all(|x| cert.kappa_at(x).is_zero() || report.seller_bic[x - 1][x].is_zero())
}

/// Solves, for every seller type separately, the problem with all-pairs
/// seller BIC, all-pairs buyer EPIC and EPIR everywhere, maximizing that
/// type's payoff. The LP has `2 |X| |Y|` variables and `O(|X|^2 + |X||Y|^2)`
/// rows, so it is meant for small instances.
pub fn rsw_per_type_crosscheck(env: &Environment) -> Result<Vec<Rational>, RswError> {
    let mut out = Vec::with_capacity(env.x_size());
    for x in 0..env.x_size() {
        let mut m = MechanismLp::full(env, Sense::Max);
        m.seller_bic_all();
        m.buyer_epic_all();
        m.buyer_epir_all();
        let objective = m.seller_truthful(x);
        m.set_objective(&objective);
        let sol = solve_lp(&m.lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(RswError::Status(sol.status));
        }
        out.push(sol.value);
    }
    Ok(out)
}

/// A menu that trades surely above a threshold at one price, not at all
/// below it, and arbitrarily at the threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AfpMenu {
    pub x: usize,
    /// In `1..=y_size + 1`; `y_size + 1` means the menu never trades.
    pub threshold: usize,
    pub price: Rational,
    pub interior_q: Rational,
    pub interior_t: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AfpError {
    #[error("buyer virtual valuation is not strictly increasing: {left} at y={y} vs {right} at y={}", .y + 1)]
    RegularityViolated {
        y: usize,
        left: Rational,
        right: Rational,
    },
    #[error("menu of seller type {x} is not an almost-fixed price: {reason}")]
    PatternViolated { x: usize, reason: String },
}

/// Checks that `phi - dv2 (1 - P2) / p2` is strictly increasing.
pub fn check_regularity(env: &Environment) -> Result<(), AfpError> {
    let d = derived_quantities(env);
    for y in 1..env.y_size() {
        let (left, right) = (d.buyer_virtual(y - 1), d.buyer_virtual(y));
        if left >= right {
            return Err(AfpError::RegularityViolated { y, left, right });
        }
    }
    Ok(())
}

/// Decomposes every menu into an almost-fixed price.
pub fn extract_almost_fixed_prices(
    env: &Environment,
    g: &Allocation,
) -> Result<Vec<AfpMenu>, AfpError> {
    check_regularity(env)?;
    (1..=env.x_size()).map(|x| afp_menu(x, &g.q[x - 1], &g.t[x - 1])).collect()
}

/// Reads one menu as an almost-fixed price without any regularity check.
pub fn afp_menu(x: usize, q: &[Rational], t: &[Rational]) -> Result<AfpMenu, AfpError> {
    let ny = q.len();
    let fail = |reason: String| AfpError::PatternViolated { x, reason };
    let first = q.iter().position(|v| !v.is_zero()).unwrap_or(ny);
    for y in 0..first {
        if !t[y].is_zero() {
            return Err(fail(format!("payment {} below the threshold at y={}", t[y], y + 1)));
        }
    }
    if first == ny {
        return Ok(AfpMenu {
            x,
            threshold: ny + 1,
            price: Rational::zero(),
            interior_q: Rational::zero(),
            interior_t: Rational::zero(),
        });
    }
    let (interior_q, interior_t) = (q[first].clone(), t[first].clone());
    let price = t.get(first + 1).cloned().unwrap_or_else(|| interior_t.clone());
    for y in first + 1..ny {
        if q[y] != 1 || t[y] != price {
            return Err(fail(format!("cell y={} is ({}, {})", y + 1, q[y], t[y])));
        }
    }
    if price.is_negative() {
        return Err(fail(format!("negative price {price}")));
    }
    Ok(AfpMenu {
        x,
        threshold: first + 1,
        price,
        interior_q,
        interior_t,
    })
}

use serde::Serialize;

use super::alloc::{Allocation, Belief, Matrix};
use super::{derived_quantities, Environment};
use crate::rational::Rational;

/// Seller's expected payoff from reporting `report` when her type is `true_type`.
pub fn seller_interim_payoff(
    env: &Environment,
    g: &Allocation,
    report: usize,
    true_type: usize,
) -> Rational {
    let (xh, x) = (report - 1, true_type - 1);
    (0..env.y_size())
        .map(|j| {
            let keep = Rational::one() - &g.q[xh][j];
            &env.p2()[j] * (&g.t[xh][j] + env.seller_value(x, j) * keep)
        })
        .sum()
}

/// Truthful seller payoffs `U1(x)` for every type.
pub fn seller_payoff_vector(env: &Environment, g: &Allocation) -> Vec<Rational> {
    (1..=env.x_size())
        .map(|x| seller_interim_payoff(env, g, x, x))
        .collect()
}

/// Buyer's ex post payoff from reporting `report` at the type profile `(x, y)`.
pub fn buyer_expost_payoff(
    env: &Environment,
    g: &Allocation,
    report: usize,
    x: usize,
    y: usize,
) -> Rational {
    let (yh, xi, yi) = (report - 1, x - 1, y - 1);
    env.buyer_value(xi, yi) * &g.q[xi][yh] - &g.t[xi][yh]
}

/// Truthful buyer ex post payoffs `u2(x,y)`.
pub fn buyer_expost_matrix(env: &Environment, g: &Allocation) -> Matrix {
    (1..=env.x_size())
        .map(|x| {
            (1..=env.y_size())
                .map(|y| buyer_expost_payoff(env, g, y, x, y))
                .collect()
        })
        .collect()
}

/// Buyer's expected payoff from reporting `report` at type `true_type` under `belief`.
pub fn buyer_interim_payoff(
    env: &Environment,
    g: &Allocation,
    report: usize,
    true_type: usize,
    belief: &Belief,
) -> Rational {
    belief
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, w)| !w.is_zero())
        .map(|(i, w)| w * buyer_expost_payoff(env, g, report, i + 1, true_type))
        .sum()
}

/// Truthful buyer interim payoffs `U2(y, belief)`.
pub fn buyer_interim_vector(env: &Environment, g: &Allocation, belief: &Belief) -> Vec<Rational> {
    (1..=env.y_size())
        .map(|y| buyer_interim_payoff(env, g, y, y, belief))
        .collect()
}

/// Interim trade probabilities of each side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InterimRules {
    /// `Q1(x) = E_y q(x,y)` under `p2`.
    pub q1: Vec<Rational>,
    /// `Q2(y) = sum_x belief(x) q(x,y)`.
    pub q2: Vec<Rational>,
}

pub fn interim_rules(env: &Environment, g: &Allocation, belief: &Belief) -> InterimRules {
    let q1 = g
        .q
        .iter()
        .map(|row| row.iter().zip(env.p2()).map(|(q, p)| p * q).sum())
        .collect();
    let q2 = (0..env.y_size())
        .map(|j| {
            belief
                .as_slice()
                .iter()
                .zip(&g.q)
                .map(|(w, row)| w * &row[j])
                .sum()
        })
        .collect();
    InterimRules { q1, q2 }
}

/// One boolean per incentive and participation condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConstraintFlags {
    pub seller_bic: bool,
    pub seller_iir: bool,
    /// Buyer BIC under the supplied belief.
    pub buyer_bic: bool,
    /// Buyer IIR under the supplied belief.
    pub buyer_iir: bool,
    pub buyer_epic: bool,
    pub buyer_epir: bool,
    /// BIC and IIR for both sides under the supplied belief.
    pub belief_feasible: bool,
    /// BIC and IIR for both sides under the prior.
    pub feasible: bool,
}

/// Exact slacks of every incentive and participation constraint.
///
/// Index order follows the constraint: `seller_bic[x][x_hat]`,
/// `buyer_bic[y][y_hat]`, `buyer_epic[x][y][y_hat]`; all 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstraintReport {
    pub seller_bic: Matrix,
    pub seller_iir: Vec<Rational>,
    pub buyer_bic: Matrix,
    pub buyer_iir: Vec<Rational>,
    pub buyer_bic_prior: Matrix,
    pub buyer_iir_prior: Vec<Rational>,
    pub buyer_epic: Vec<Matrix>,
    pub buyer_epir: Matrix,
    pub flags: ConstraintFlags,
}

fn nonneg<'a>(values: impl IntoIterator<Item = &'a Rational>) -> bool {
    values.into_iter().all(|v| !v.is_negative())
}

fn buyer_slacks(
    env: &Environment,
    g: &Allocation,
    belief: &Belief,
) -> (Matrix, Vec<Rational>) {
    let ny = env.y_size();
    let table: Matrix = (1..=ny)
        .map(|y| {
            (1..=ny)
                .map(|yh| buyer_interim_payoff(env, g, yh, y, belief))
                .collect()
        })
        .collect();
    let bic = (0..ny)
        .map(|j| (0..ny).map(|k| &table[j][j] - &table[j][k]).collect())
        .collect();
    let iir = (0..ny).map(|j| table[j][j].clone()).collect();
    (bic, iir)
}

pub fn check_constraints(env: &Environment, g: &Allocation, belief: &Belief) -> ConstraintReport {
    let (nx, ny) = (env.x_size(), env.y_size());
    let seller_table: Matrix = (1..=nx)
        .map(|x| {
            (1..=nx)
                .map(|xh| seller_interim_payoff(env, g, xh, x))
                .collect()
        })
        .collect();
    let seller_bic: Matrix = (0..nx)
        .map(|i| (0..nx).map(|k| &seller_table[i][i] - &seller_table[i][k]).collect())
        .collect();
    let seller_iir: Vec<Rational> = (0..nx)
        .map(|i| &seller_table[i][i] - env.outside_option(i))
        .collect();
    let (buyer_bic, buyer_iir) = buyer_slacks(env, g, belief);
    let (buyer_bic_prior, buyer_iir_prior) = buyer_slacks(env, g, &env.prior());
    let mut buyer_epic = Vec::with_capacity(nx);
    let mut buyer_epir = Vec::with_capacity(nx);
    for x in 1..=nx {
        let row: Matrix = (1..=ny)
            .map(|y| {
                (1..=ny)
                    .map(|yh| buyer_expost_payoff(env, g, yh, x, y))
                    .collect()
            })
            .collect();
        buyer_epic.push(
            (0..ny)
                .map(|j| (0..ny).map(|k| &row[j][j] - &row[j][k]).collect::<Vec<_>>())
                .collect::<Matrix>(),
        );
        buyer_epir.push((0..ny).map(|j| row[j][j].clone()).collect::<Vec<_>>());
    }

    let s_bic = nonneg(seller_bic.iter().flatten());
    let s_iir = nonneg(&seller_iir);
    let b_bic = nonneg(buyer_bic.iter().flatten());
    let b_iir = nonneg(&buyer_iir);
    let flags = ConstraintFlags {
        seller_bic: s_bic,
        seller_iir: s_iir,
        buyer_bic: b_bic,
        buyer_iir: b_iir,
        buyer_epic: nonneg(buyer_epic.iter().flatten().flatten()),
        buyer_epir: nonneg(buyer_epir.iter().flatten()),
        belief_feasible: s_bic && s_iir && b_bic && b_iir,
        feasible: s_bic
            && s_iir
            && nonneg(buyer_bic_prior.iter().flatten())
            && nonneg(&buyer_iir_prior),
    };
    ConstraintReport {
        seller_bic,
        seller_iir,
        buyer_bic,
        buyer_iir,
        buyer_bic_prior,
        buyer_iir_prior,
        buyer_epic,
        buyer_epir,
        flags,
    }
}

/// How the seller payoff vector of one allocation compares with another's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dominance {
    Equal,
    /// At least as good for every type and strictly better for some.
    Dominates,
    DominatedBy,
    Incomparable,
}

impl Dominance {
    pub fn weakly_dominates(self) -> bool {
        matches!(self, Dominance::Equal | Dominance::Dominates)
    }

    pub fn weakly_dominated(self) -> bool {
        matches!(self, Dominance::Equal | Dominance::DominatedBy)
    }

    /// Classifies payoff vector `a` against `b`.
    pub fn compare(a: &[Rational], b: &[Rational]) -> Dominance {
        let ge = a.iter().zip(b).all(|(u, v)| u >= v);
        let le = a.iter().zip(b).all(|(u, v)| u <= v);
        match (ge, le) {
            (true, true) => Dominance::Equal,
            (true, false) => Dominance::Dominates,
            (false, true) => Dominance::DominatedBy,
            (false, false) => Dominance::Incomparable,
        }
    }
}

/// Compares `a` with `b` by the seller's truthful interim payoffs.
pub fn dominance(env: &Environment, a: &Allocation, b: &Allocation) -> Dominance {
    Dominance::compare(&seller_payoff_vector(env, a), &seller_payoff_vector(env, b))
}

/// Trade exactly where social surplus is nonnegative.
pub fn efficient_rule(env: &Environment) -> Matrix {
    let d = derived_quantities(env);
    d.psi
        .iter()
        .map(|psi| {
            d.phi
                .iter()
                .map(|phi| {
                    if !(psi + phi).is_negative() {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                })
                .collect()
        })
        .collect()
}

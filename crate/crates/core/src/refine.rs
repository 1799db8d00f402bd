//! Payoff-equivalence transforms, dominance and blocking tests, the solution
//! concepts built on them, and the seller payoff set for two seller types.
//!
//! Strict improvements are decided by slack-maximization LPs: an improvement
//! exists iff the optimal slack is positive, which exact arithmetic decides.

use serde::Serialize;
use thiserror::Error;

use crate::benchmarks::solve_full_information;
use crate::checks::Checks;
use crate::env::{
    check_constraints, derived_quantities, dominance, interim_rules, seller_payoff_vector,
    Allocation, AllocationError, Belief, Dominance, Environment,
};
use crate::lp::{
    solve_lp, solve_quad_transport, LpError, LpStatus, QuadError, QuadTransportProblem,
    QuadTransportSolution, Sense, VarBounds,
};
use crate::program::{IncrementLp, Lin, MechanismLp};
use crate::rational::Rational;
use crate::rsw::{solve_rsw, RswError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefineError {
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("allocation is not feasible: {0}")]
    InfeasibleInput(String),
    #[error("payoff set needs exactly two seller types, found {0}")]
    UnsupportedDimension(usize),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("linear program returned status {0:?}")]
    Status(LpStatus),
    #[error(transparent)]
    Rsw(#[from] RswError),
    #[error("post-verification failed: {}", .0.join(", "))]
    Verification(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TransformVariant {
    /// Keeps both interim payoff vectors.
    PreserveBoth,
    /// Keeps the seller's payoffs and makes buyer local downward EPIC bind.
    BindingEpic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransformTrace {
    /// Marginal payment weights `alpha(y)` for `y` in `Y`; `alpha(y_size + 1) = 0`
    /// is implicit.
    pub alpha: Vec<Rational>,
    pub qp_rule: QuadTransportSolution,
    pub variant: TransformVariant,
}

fn nonneg<'a>(values: impl IntoIterator<Item = &'a Rational>) -> bool {
    values.into_iter().all(|v| !v.is_negative())
}

fn require_bic(env: &Environment, g: &Allocation, buyer_iir: bool) -> Result<(), RefineError> {
    g.validate(env.x_size(), env.y_size())?;
    let report = check_constraints(env, g, &env.prior());
    if !report.flags.seller_bic {
        return Err(RefineError::PreconditionFailed("seller BIC".into()));
    }
    if !nonneg(report.buyer_bic_prior.iter().flatten()) {
        return Err(RefineError::PreconditionFailed("buyer BIC under the prior".into()));
    }
    if buyer_iir && !nonneg(&report.buyer_iir_prior) {
        return Err(RefineError::PreconditionFailed("buyer IIR under the prior".into()));
    }
    Ok(())
}

fn least_squares_rule(env: &Environment, g: &Allocation) -> Result<QuadTransportSolution, RefineError> {
    let problem = QuadTransportProblem::from_rule(env.p1(), env.p2(), &g.q);
    Ok(solve_quad_transport(&problem)?)
}

/// Replaces `g` by an allocation with the least-squares rule of the same
/// interim marginals that is EPIC for the buyer and keeps both interim payoff
/// vectors.
pub fn epic_equivalent(
    env: &Environment,
    g: &Allocation,
) -> Result<(Allocation, TransformTrace), RefineError> {
    require_bic(env, g, false)?;
    let (nx, ny) = (env.x_size(), env.y_size());
    let prior = env.prior();
    let qp = least_squares_rule(env, g)?;
    let q = qp.q.clone();
    let old_q2 = interim_rules(env, g, &prior).q2;
    let old_t2: Vec<Rational> = (0..ny)
        .map(|y| (0..nx).map(|x| &env.p1()[x] * &g.t[x][y]).sum())
        .collect();
    let mut alpha = Vec::with_capacity(ny);
    alpha.push(env.v22()[0].clone());
    for y in 1..ny {
        let dq = &old_q2[y] - &old_q2[y - 1];
        if dq.is_positive() {
            let own: Rational = (0..nx)
                .map(|x| &env.p1()[x] * &env.v21()[x] * (&g.q[x][y] - &g.q[x][y - 1]))
                .sum();
            alpha.push((&old_t2[y] - &old_t2[y - 1] - own) / dq);
        } else {
            alpha.push(env.v22()[y].clone());
        }
    }
    let alpha_at = |y: usize| alpha.get(y).cloned().unwrap_or_else(Rational::zero);
    let d = derived_quantities(env);
    let coef: Vec<Rational> = (0..ny)
        .map(|y| {
            let step = alpha_at(y + 1) - alpha_at(y);
            &alpha[y] - &env.v12()[y] - step * (Rational::one() - d.cdf(y + 1)) / &env.p2()[y]
        })
        .collect();
    let t = payments_from_weights(env, g, &q, &d.psi, &coef, &alpha);
    let out = Allocation { q, t };
    let mut checks = transform_checks(env, g, &out);
    checks.push(
        "alpha_between_values",
        (1..ny).all(|y| env.v22()[y - 1] <= alpha[y] && alpha[y] <= env.v22()[y]),
    );
    checks.push(
        "buyer_payoffs_preserved",
        crate::env::buyer_interim_vector(env, &out, &prior)
            == crate::env::buyer_interim_vector(env, g, &prior),
    );
    if !checks.all_passed() {
        return Err(RefineError::Verification(checks.failures()));
    }
    Ok((
        out,
        TransformTrace {
            alpha,
            qp_rule: qp,
            variant: TransformVariant::PreserveBoth,
        },
    ))
}

/// Like [`epic_equivalent`] for allocations that are also IIR for the buyer,
/// but with binding buyer local downward EPIC; keeps the seller's payoffs.
pub fn epic_equivalent_binding(env: &Environment, g: &Allocation) -> Result<Allocation, RefineError> {
    require_bic(env, g, true)?;
    let ny = env.y_size();
    let qp = least_squares_rule(env, g)?;
    let d = derived_quantities(env);
    let coef: Vec<Rational> = (0..ny).map(|y| d.buyer_virtual(y)).collect();
    let t = payments_from_weights(env, g, &qp.q, &d.psi, &coef, env.v22());
    let out = Allocation { q: qp.q, t };
    let mut checks = transform_checks(env, g, &out);
    let report = check_constraints(env, &out, &env.prior());
    let binding = report
        .buyer_epic
        .iter()
        .all(|m| (1..ny).all(|y| m[y][y - 1].is_zero()));
    checks.push("downward_epic_binds", binding);
    checks.push("lowest_buyer_iir", !report.buyer_iir_prior[0].is_negative());
    if !checks.all_passed() {
        return Err(RefineError::Verification(checks.failures()));
    }
    Ok(out)
}

/// `t(x,1) = v2(x,1) q(x,1) + U1(x) - E_y[(psi(x) + coef(y)) q(x,y) + v11(x) + v12(y)]`,
/// `t(x,y) = t(x,y-1) + (v21(x) + weight(y)) (q(x,y) - q(x,y-1))`.
fn payments_from_weights(
    env: &Environment,
    g: &Allocation,
    q: &[Vec<Rational>],
    psi: &[Rational],
    coef: &[Rational],
    weight: &[Rational],
) -> Vec<Vec<Rational>> {
    let (nx, ny) = (env.x_size(), env.y_size());
    let u1 = seller_payoff_vector(env, g);
    let mut t = vec![vec![Rational::zero(); ny]; nx];
    for x in 0..nx {
        let expected: Rational = (0..ny)
            .map(|y| &env.p2()[y] * ((&psi[x] + &coef[y]) * &q[x][y] + env.seller_value(x, y)))
            .sum();
        t[x][0] = env.buyer_value(x, 0) * &q[x][0] + &u1[x] - expected;
        for y in 1..ny {
            t[x][y] = &t[x][y - 1] + (&env.v21()[x] + &weight[y]) * (&q[x][y] - &q[x][y - 1]);
        }
    }
    t
}

fn transform_checks(env: &Environment, before: &Allocation, after: &Allocation) -> Checks {
    let report = check_constraints(env, after, &env.prior());
    let mut checks = Checks::new();
    checks.push("seller_bic", report.flags.seller_bic);
    checks.push("buyer_epic", report.flags.buyer_epic);
    checks.push(
        "seller_payoffs_preserved",
        seller_payoff_vector(env, after) == seller_payoff_vector(env, before),
    );
    checks
}

/// Outcome of a dominance test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DominanceCheck {
    pub undominated: bool,
    /// Optimal total slack `sum_x s(x)` with each `s(x)` capped at 1; zero when
    /// no feasible allocation weakly improves on every type.
    pub slack: Rational,
    /// A feasible allocation weakly better for every type and strictly better for some.
    pub witness: Option<Allocation>,
}

/// Decides whether some allocation feasible under `belief` weakly improves on
/// `g` for every seller type and strictly for at least one.
pub fn undominated_given(
    env: &Environment,
    g: &Allocation,
    belief: &Belief,
) -> Result<DominanceCheck, RefineError> {
    g.validate(env.x_size(), env.y_size())?;
    if belief.len() != env.x_size() {
        return Err(RefineError::PreconditionFailed("belief length".into()));
    }
    let base = seller_payoff_vector(env, g);
    let pi = belief.as_slice();
    let (slack, witness) = if pi.iter().all(Rational::is_positive) {
        dominance_lp_reduced(env, &base, pi)?
    } else {
        dominance_lp_aggregated(env, &base, pi)?
    };
    let Some(witness) = witness else {
        return Ok(DominanceCheck {
            undominated: true,
            slack,
            witness: None,
        });
    };
    let report = check_constraints(env, &witness, belief);
    if !report.flags.belief_feasible || dominance(env, &witness, g) != Dominance::Dominates {
        return Err(RefineError::Verification(vec!["dominating_witness".into()]));
    }
    Ok(DominanceCheck {
        undominated: false,
        slack,
        witness: Some(witness),
    })
}

type DominanceLp = (Rational, Option<Allocation>);

/// Dominance search over mechanisms with binding buyer downward EPIC. Exact
/// for beliefs with full support, where every feasible allocation has such a
/// counterpart with the same seller payoffs.
fn dominance_lp_reduced(
    env: &Environment,
    base: &[Rational],
    pi: &[Rational],
) -> Result<DominanceLp, RefineError> {
    let mut m = IncrementLp::new(env, Sense::Max, VarBounds::free());
    m.buyer_participation(pi);
    m.seller_bic_local();
    m.seller_iir();
    let mut objective = Lin::default();
    for (x, b) in base.iter().enumerate() {
        let s = m.lp.add_var(VarBounds::unit());
        objective.push(s, Rational::one());
        let lhs = m.payoff(x);
        m.add_ge(lhs, Lin::constant(b.clone()) + Lin::var(s, Rational::one()));
    }
    m.set_objective(&objective);
    let sol = solve_lp(&m.lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let witness = sol.value.is_positive().then(|| m.allocation(&sol));
            Ok((sol.value, witness))
        }
        LpStatus::Infeasible => Ok((Rational::zero(), None)),
        other => Err(RefineError::Status(other)),
    }
}

/// Dominance search over all rules with aggregated payments.
fn dominance_lp_aggregated(
    env: &Environment,
    base: &[Rational],
    pi: &[Rational],
) -> Result<DominanceLp, RefineError> {
    let mut m = MechanismLp::aggregated(env, Sense::Max, pi);
    m.feasible_under(pi);
    let mut objective = Lin::default();
    for (x, b) in base.iter().enumerate() {
        let s = m.lp.add_var(VarBounds::unit());
        objective.push(s, Rational::one());
        let lhs = m.seller_truthful(x);
        m.add_ge(lhs, Lin::constant(b.clone()) + Lin::var(s, Rational::one()));
    }
    m.set_objective(&objective);
    let sol = solve_lp(&m.lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let witness = sol.value.is_positive().then(|| m.allocation(&sol));
            Ok((sol.value, witness))
        }
        LpStatus::Infeasible => Ok((Rational::zero(), None)),
        other => Err(RefineError::Status(other)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StrongSolutionCheck {
    pub holds: bool,
    pub rsw: Allocation,
    pub rsw_payoffs: Vec<Rational>,
    pub dominance: DominanceCheck,
}

/// An RSW allocation that is undominated under the prior.
pub fn check_strong_solution(env: &Environment) -> Result<StrongSolutionCheck, RefineError> {
    let rsw = solve_rsw(env)?;
    let dominance = undominated_given(env, &rsw.allocation, &env.prior())?;
    Ok(StrongSolutionCheck {
        holds: dominance.undominated,
        rsw: rsw.allocation,
        rsw_payoffs: rsw.payoffs,
        dominance,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockingWitness {
    /// Seller types, 1-based, that strictly gain.
    pub coalition: Vec<usize>,
    pub allocation: Allocation,
    /// Smallest gain over the coalition.
    pub slack: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoreCheck {
    pub core: bool,
    pub witness: Option<BlockingWitness>,
}

/// Largest seller type count for which coalitions are enumerated.
pub const MAX_COALITION_TYPES: usize = 10;

fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u32..(1 << n)).map(move |mask| (1..=n).filter(|x| mask & (1 << (x - 1)) != 0).collect())
}

/// Maximizes the smallest gain over `coalition` subject to no gain outside it
/// and feasibility under every belief in `beliefs`.
fn best_improvement(
    env: &Environment,
    base: &[Rational],
    coalition: &[usize],
    beliefs: &[Belief],
) -> Result<Option<(Rational, Allocation)>, RefineError> {
    let mut m = MechanismLp::full(env, Sense::Max);
    m.seller_bic_local();
    m.seller_iir(true);
    for b in beliefs {
        m.buyer_bic_local(b.as_slice());
        m.buyer_iir_bottom(b.as_slice());
    }
    let s = m.lp.add_var(VarBounds {
        lower: None,
        upper: Some(Rational::one()),
    });
    for (x, b) in base.iter().enumerate() {
        let lhs = m.seller_truthful(x);
        if coalition.contains(&(x + 1)) {
            m.add_ge(lhs, Lin::constant(b.clone()) + Lin::var(s, Rational::one()));
        } else {
            m.add_le(lhs, Lin::constant(b.clone()));
        }
    }
    m.set_objective(&Lin::var(s, Rational::one()));
    let sol = solve_lp(&m.lp)?;
    match sol.status {
        LpStatus::Infeasible => Ok(None),
        LpStatus::Optimal if sol.value.is_positive() => {
            let g = m.allocation(&sol);
            Ok(Some((sol.value, g)))
        }
        LpStatus::Optimal => Ok(None),
        other => Err(RefineError::Status(other)),
    }
}

fn verify_blocking(
    env: &Environment,
    base: &[Rational],
    coalition: &[usize],
    beliefs: &[Belief],
    g: &Allocation,
) -> bool {
    let u = seller_payoff_vector(env, g);
    let gains = (0..env.x_size()).all(|x| {
        if coalition.contains(&(x + 1)) {
            u[x] > base[x]
        } else {
            u[x] <= base[x]
        }
    });
    gains
        && beliefs
            .iter()
            .all(|b| check_constraints(env, g, b).flags.belief_feasible)
}

/// Decides whether a feasible `g` is a core mechanism: no coalition `Z` of
/// seller types has an allocation that makes exactly `Z` strictly better off
/// and is feasible for the prior conditioned on every superset of `Z`.
pub fn check_core(env: &Environment, g: &Allocation) -> Result<CoreCheck, RefineError> {
    g.validate(env.x_size(), env.y_size())?;
    let report = check_constraints(env, g, &env.prior());
    if !report.flags.feasible {
        return Err(RefineError::InfeasibleInput(
            "not BIC and IIR for both sides under the prior".into(),
        ));
    }
    let n = env.x_size();
    if n > MAX_COALITION_TYPES {
        return Err(RefineError::PreconditionFailed(format!(
            "coalition enumeration supports at most {MAX_COALITION_TYPES} seller types, found {n}"
        )));
    }
    let base = seller_payoff_vector(env, g);
    let all: Vec<Vec<usize>> = subsets(n).collect();
    for z in &all {
        let beliefs: Vec<Belief> = all
            .iter()
            .filter(|sup| z.iter().all(|x| sup.contains(x)))
            .map(|sup| Belief::conditional(env.p1(), sup).expect("full-support prior"))
            .collect();
        if let Some((slack, alloc)) = best_improvement(env, &base, z, &beliefs)? {
            if !verify_blocking(env, &base, z, &beliefs, &alloc) {
                return Err(RefineError::Verification(vec!["blocking_witness".into()]));
            }
            return Ok(CoreCheck {
                core: false,
                witness: Some(BlockingWitness {
                    coalition: z.clone(),
                    allocation: alloc,
                    slack,
                }),
            });
        }
    }
    Ok(CoreCheck {
        core: true,
        witness: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExistenceCheck {
    pub exists: bool,
    pub allocation: Option<Allocation>,
}

/// An allocation passing the FGP criterion exists iff the RSW allocation is
/// undominated under the prior, in which case it is one.
pub fn check_fgp_exists(env: &Environment) -> Result<ExistenceCheck, RefineError> {
    let strong = check_strong_solution(env)?;
    Ok(ExistenceCheck {
        exists: strong.holds,
        allocation: strong.holds.then_some(strong.rsw),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SnpCheck {
    pub exists: bool,
    pub allocation: Option<Allocation>,
    pub rsw_payoffs: Vec<Rational>,
    pub full_info_payoffs: Vec<Rational>,
    /// Coalitions, 1-based, for which the corroborating search found an
    /// allocation feasible under the prior conditioned on the coalition that
    /// makes exactly that coalition better off than the RSW allocation.
    /// `None` when there are more than [`MAX_COALITION_TYPES`] seller types.
    pub credible_coalitions: Option<Vec<Vec<usize>>>,
}

/// A strongly neologism-proof allocation exists iff the RSW payoffs equal the
/// full-information payoffs, in which case the RSW allocation is one.
///
/// As corroboration, every nonempty coalition is tested for an allocation
/// feasible under the prior conditioned on it that makes exactly it better off.
pub fn check_snp_exists(env: &Environment) -> Result<SnpCheck, RefineError> {
    let rsw = solve_rsw(env)?;
    let full = solve_full_information(env);
    let exists = rsw.payoffs == full.payoffs;
    let credible = if env.x_size() <= MAX_COALITION_TYPES {
        let mut found = Vec::new();
        for z in subsets(env.x_size()) {
            let belief = Belief::conditional(env.p1(), &z).expect("full-support prior");
            if best_improvement(env, &rsw.payoffs, &z, std::slice::from_ref(&belief))?.is_some() {
                found.push(z);
            }
        }
        Some(found)
    } else {
        None
    };
    Ok(SnpCheck {
        exists,
        allocation: exists.then(|| rsw.allocation.clone()),
        rsw_payoffs: rsw.payoffs,
        full_info_payoffs: full.payoffs,
        credible_coalitions: credible,
    })
}

/// `a U1(1) + b U1(2) <= c` with `(a, b)` a primitive integer vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Facet {
    pub a: Rational,
    pub b: Rational,
    pub c: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolygonVertex {
    pub payoff: [Rational; 2],
    /// Feasible allocation attaining the vertex.
    pub witness: Allocation,
}

/// The feasible seller payoff vectors that weakly dominate the RSW payoffs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PayoffPolygon {
    pub label: String,
    pub rsw_payoffs: Vec<Rational>,
    /// Counterclockwise from the lowest, then leftmost, vertex.
    pub vertices: Vec<PolygonVertex>,
    pub facets: Vec<Facet>,
}

type Point = [Rational; 2];

fn cross(o: &Point, a: &Point, b: &Point) -> Rational {
    (&a[0] - &o[0]) * (&b[1] - &o[1]) - (&a[1] - &o[1]) * (&b[0] - &o[0])
}

/// Convex hull, counterclockwise from the lowest-then-leftmost point, without
/// collinear points.
fn convex_hull(points: &[Point]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&i, &j| points[i].cmp(&points[j]));
    idx.dedup_by(|a, b| points[*a] == points[*b]);
    if idx.len() <= 2 {
        return idx;
    }
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2
            && !cross(&points[lower[lower.len() - 2]], &points[lower[lower.len() - 1]], &points[i])
                .is_positive()
        {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2
            && !cross(&points[upper[upper.len() - 2]], &points[upper[upper.len() - 1]], &points[i])
                .is_positive()
        {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    let mut hull = lower;
    hull.extend(upper);
    let start = (0..hull.len())
        .min_by(|&a, &b| {
            let (p, q) = (&points[hull[a]], &points[hull[b]]);
            (&p[1], &p[0]).cmp(&(&q[1], &q[0]))
        })
        .unwrap_or(0);
    hull.rotate_left(start);
    hull
}

/// Scales `(a, b)` to a primitive integer vector with the same direction.
fn primitive(a: &Rational, b: &Rational) -> (Rational, Rational) {
    fn gcd(mut x: u64, mut y: u64) -> u64 {
        while y != 0 {
            (x, y) = (y, x % y);
        }
        x
    }
    let (da, db) = (
        a.denom_u64().expect("small denominator"),
        b.denom_u64().expect("small denominator"),
    );
    let scale = Rational::from_integer((da / gcd(da, db) * db) as i64);
    let (ia, ib) = (a * &scale, b * &scale);
    let (na, nb) = (
        ia.to_i64().expect("small numerator").unsigned_abs(),
        ib.to_i64().expect("small numerator").unsigned_abs(),
    );
    let g = Rational::from_integer(gcd(na, nb).max(1) as i64);
    (ia / &g, ib / &g)
}

struct SupportOracle<'a> {
    env: &'a Environment,
    rsw: Vec<Rational>,
}

impl SupportOracle<'_> {
    /// Point of the set maximizing `w`, then `w2` among maximizers.
    fn extreme(&self, w: &Point, w2: &Point) -> Result<(Point, Allocation), RefineError> {
        let first = self.solve(w, None)?;
        let level = &w[0] * &first.0[0] + &w[1] * &first.0[1];
        self.solve(w2, Some((w, level)))
    }

    fn solve(
        &self,
        w: &Point,
        fixed: Option<(&Point, Rational)>,
    ) -> Result<(Point, Allocation), RefineError> {
        let prior = self.env.p1().to_vec();
        let mut m = MechanismLp::aggregated(self.env, Sense::Max, &prior);
        m.feasible_under(&prior);
        for x in 0..2 {
            let lhs = m.seller_truthful(x);
            m.add_ge(lhs, Lin::constant(self.rsw[x].clone()));
        }
        let dot = |m: &MechanismLp, v: &Point| {
            m.seller_truthful(0) * &v[0] + m.seller_truthful(1) * &v[1]
        };
        if let Some((v, level)) = fixed {
            let lhs = dot(&m, v);
            m.add_ge(lhs, Lin::constant(level));
        }
        let objective = dot(&m, w);
        m.set_objective(&objective);
        let sol = solve_lp(&m.lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(RefineError::Status(sol.status));
        }
        let g = m.allocation(&sol);
        let u = seller_payoff_vector(self.env, &g);
        Ok(([u[0].clone(), u[1].clone()], g))
    }
}

/// Computes the polygon of feasible seller payoff vectors weakly above the
/// RSW payoffs for two seller types by support-function refinement.
pub fn seller_payoff_set(env: &Environment) -> Result<PayoffPolygon, RefineError> {
    if env.x_size() != 2 {
        return Err(RefineError::UnsupportedDimension(env.x_size()));
    }
    let rsw = solve_rsw(env)?;
    let oracle = SupportOracle {
        env,
        rsw: rsw.payoffs.clone(),
    };
    let ri = Rational::from_integer;
    let axes: [(Point, Point); 4] = [
        ([ri(1), ri(0)], [ri(0), ri(1)]),
        ([ri(0), ri(1)], [ri(-1), ri(0)]),
        ([ri(-1), ri(0)], [ri(0), ri(-1)]),
        ([ri(0), ri(-1)], [ri(1), ri(0)]),
    ];
    let mut points: Vec<Point> = Vec::new();
    let mut witnesses: Vec<Allocation> = Vec::new();
    let mut insert = |p: Point, g: Allocation, points: &mut Vec<Point>| {
        if !points.contains(&p) {
            points.push(p);
            witnesses.push(g);
        }
    };
    for (w, w2) in &axes {
        let (p, g) = oracle.extreme(w, w2)?;
        insert(p, g, &mut points);
    }
    let mut certified: Vec<Facet> = Vec::new();
    loop {
        let hull = convex_hull(&points);
        let mut candidates: Vec<(Point, Point)> = Vec::new();
        if hull.len() == 2 {
            let (a, b) = (&points[hull[0]], &points[hull[1]]);
            let dir = [&b[0] - &a[0], &b[1] - &a[1]];
            candidates.push(([dir[1].clone(), -&dir[0]], dir.clone()));
            candidates.push(([-&dir[1], dir[0].clone()], [-&dir[0], -&dir[1]]));
            candidates.push((dir.clone(), [-&dir[1], dir[0].clone()]));
            candidates.push(([-&dir[0], -&dir[1]], [dir[1].clone(), -&dir[0]]));
        } else if hull.len() >= 3 {
            for k in 0..hull.len() {
                let (a, b) = (&points[hull[k]], &points[hull[(k + 1) % hull.len()]]);
                let dir = [&b[0] - &a[0], &b[1] - &a[1]];
                candidates.push(([dir[1].clone(), -&dir[0]], dir));
            }
        }
        let mut grew = false;
        certified.clear();
        for (normal, tie) in candidates {
            let (n0, n1) = primitive(&normal[0], &normal[1]);
            let reach = hull
                .iter()
                .map(|&i| &n0 * &points[i][0] + &n1 * &points[i][1])
                .max()
                .expect("nonempty hull");
            let (p, g) = oracle.extreme(&[n0.clone(), n1.clone()], &tie)?;
            let value = &n0 * &p[0] + &n1 * &p[1];
            if value > reach {
                insert(p, g, &mut points);
                grew = true;
            } else {
                certified.push(Facet {
                    a: n0,
                    b: n1,
                    c: reach,
                });
            }
        }
        if grew {
            continue;
        }
        if hull.len() == 1 {
            let p = &points[hull[0]];
            for (a, b, c) in [
                (ri(1), ri(0), p[0].clone()),
                (ri(0), ri(1), p[1].clone()),
                (ri(-1), ri(0), -&p[0]),
                (ri(0), ri(-1), -&p[1]),
            ] {
                certified.push(Facet { a, b, c });
            }
        }
        let vertices = hull
            .iter()
            .map(|&i| PolygonVertex {
                payoff: points[i].clone(),
                witness: witnesses[i].clone(),
            })
            .collect();
        return Ok(PayoffPolygon {
            label: "feasible-and-dominating region".into(),
            rsw_payoffs: rsw.payoffs,
            vertices,
            facets: certified,
        });
    }
}

/// Plot data: one `u1,u2` row per vertex.
pub fn polygon_csv(polygon: &PayoffPolygon) -> String {
    let mut out = String::from("u1,u2\n");
    for v in &polygon.vertices {
        out.push_str(&format!("{},{}\n", v.payoff[0], v.payoff[1]));
    }
    out
}

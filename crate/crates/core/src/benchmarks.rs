//! Full-information, ex-ante-optimal and efficiency benchmarks, and the
//! comparisons between them and the RSW allocation.
//!
//! Full information: for a known seller type the buyer faces a monopoly
//! screening problem whose value is `E_y[VS(x,y) q(x,y)]` plus the outside
//! option, maximized over increasing rules. The pointwise largest optimal
//! threshold rule is a fixed price `v21(x) + v22(threshold)`.
//!
//! Ex-ante optimum: every allocation that is BIC for both sides under the
//! prior has a payoff-equivalent version with increasing rows and binding
//! buyer local downward EPIC, whose buyer participation only has to hold in
//! expectation over the seller's type. The reduced LP therefore works over
//! rule increments and a free `u0(x) = u2(x,1)` with `E_x u0 >= 0`.

use serde::Serialize;
use thiserror::Error;

use crate::checks::Checks;
use crate::env::{
    buyer_expost_matrix, check_constraints, derived_quantities, efficient_rule, interim_rules,
    seller_payoff_vector, Allocation, AllocationError, DerivedQuantities, Environment, Matrix,
};
use crate::lp::{maximize_monotone_linear, solve_lp, LpError, LpStatus, Sense, VarBounds};
use crate::program::{IncrementLp, Lin, MechanismLp};
use crate::rational::Rational;
use crate::rsw::{solve_rsw, RswError, RswSolution};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchmarkError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("linear program returned status {0:?}")]
    Status(LpStatus),
    #[error(transparent)]
    Rsw(#[from] RswError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error("interim trade probability increases from type {x} to type {}", .x + 1)]
    MonotonicityHypothesisFails { x: usize },
    #[error("post-verification failed: {}", .0.join(", "))]
    Verification(Vec<String>),
}

/// Menu offered by seller type `x` under full information.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FixedPriceMenu {
    pub x: usize,
    /// Lowest trading buyer type; `y_size + 1` means no trade.
    pub threshold: usize,
    /// Price paid when trade occurs; zero for the no-trade menu.
    pub price: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FullInformation {
    pub allocation: Allocation,
    pub menus: Vec<FixedPriceMenu>,
    pub payoffs: Vec<Rational>,
    pub verification: Checks,
}

/// Solves the full-information problem type by type with the pointwise
/// largest optimal rule.
pub fn solve_full_information(env: &Environment) -> FullInformation {
    let (nx, ny) = (env.x_size(), env.y_size());
    let d = derived_quantities(env);
    let mut q = vec![vec![Rational::zero(); ny]; nx];
    let mut t = vec![vec![Rational::zero(); ny]; nx];
    let mut menus = Vec::with_capacity(nx);
    let mut values = Vec::with_capacity(nx);
    for x in 0..nx {
        let opt = maximize_monotone_linear(&d.virtual_surplus[x], env.p2());
        let price = if opt.threshold <= ny {
            &env.v21()[x] + &env.v22()[opt.threshold - 1]
        } else {
            Rational::zero()
        };
        for y in (opt.threshold - 1)..ny {
            q[x][y] = Rational::one();
            t[x][y] = price.clone();
        }
        values.push(opt.value + env.outside_option(x));
        menus.push(FixedPriceMenu {
            x: x + 1,
            threshold: opt.threshold,
            price,
        });
    }
    let allocation = Allocation { q, t };
    let payoffs = seller_payoff_vector(env, &allocation);
    let report = check_constraints(env, &allocation, &env.prior());
    let mut verification = Checks::new();
    verification.push("buyer_epic", report.flags.buyer_epic);
    verification.push("buyer_epir", report.flags.buyer_epir);
    verification.push("per_type_value", payoffs == values);
    verification.push("revenue_identity", revenue_identity_holds(env, &allocation));
    FullInformation {
        allocation,
        menus,
        payoffs,
        verification,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExAnteSolution {
    pub allocation: Allocation,
    pub payoffs: Vec<Rational>,
    /// `E_x U1(x)`.
    pub value: Rational,
    pub seller_iir: bool,
    pub verification: Checks,
}

/// Maximizes the seller's ex-ante payoff subject to seller BIC and buyer BIC
/// and IIR under the prior.
pub fn solve_ex_ante_optimal(env: &Environment) -> Result<ExAnteSolution, BenchmarkError> {
    solve_ex_ante_optimal_with(env, false)
}

/// As [`solve_ex_ante_optimal`], optionally adding seller IIR.
pub fn solve_ex_ante_optimal_with(
    env: &Environment,
    seller_iir: bool,
) -> Result<ExAnteSolution, BenchmarkError> {
    let nx = env.x_size();
    let mut m = IncrementLp::new(env, Sense::Max, VarBounds::free());
    let mut objective = Lin::default();
    for x in 0..nx {
        objective = objective + m.payoff(x) * &env.p1()[x];
    }
    m.set_objective(&objective);
    m.buyer_participation(env.p1());
    m.seller_bic_local();
    if seller_iir {
        m.seller_iir();
    }
    let sol = solve_lp(&m.lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(BenchmarkError::Status(sol.status));
    }
    finish_ex_ante(env, m.allocation(&sol), sol.value, seller_iir)
}

/// The ex-ante problem over all rules with interim payments under the prior
/// and all-pairs incentive constraints. Slower; used as an oracle.
pub fn solve_ex_ante_direct(
    env: &Environment,
    seller_iir: bool,
) -> Result<ExAnteSolution, BenchmarkError> {
    let prior = env.p1().to_vec();
    let mut m = MechanismLp::aggregated(env, Sense::Max, &prior);
    m.seller_bic_all();
    m.buyer_bic_all(&prior);
    m.buyer_iir_all(&prior);
    if seller_iir {
        m.seller_iir(false);
    }
    let mut objective = Lin::default();
    for x in 0..env.x_size() {
        objective = objective + m.seller_truthful(x) * &prior[x];
    }
    m.set_objective(&objective);
    let sol = solve_lp(&m.lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(BenchmarkError::Status(sol.status));
    }
    finish_ex_ante(env, m.allocation(&sol), sol.value, seller_iir)
}

fn finish_ex_ante(
    env: &Environment,
    allocation: Allocation,
    value: Rational,
    seller_iir: bool,
) -> Result<ExAnteSolution, BenchmarkError> {
    let payoffs = seller_payoff_vector(env, &allocation);
    let expected = expectation(env.p1(), &payoffs);
    let mut verification = ex_ante_feasibility(env, &allocation, seller_iir);
    verification.push("objective_value", expected == value);
    if !verification.all_passed() {
        return Err(BenchmarkError::Verification(verification.failures()));
    }
    Ok(ExAnteSolution {
        allocation,
        payoffs,
        value: expected,
        seller_iir,
        verification,
    })
}

fn ex_ante_feasibility(env: &Environment, g: &Allocation, seller_iir: bool) -> Checks {
    let report = check_constraints(env, g, &env.prior());
    let nonneg = |v: &Rational| !v.is_negative();
    let mut checks = Checks::new();
    checks.push("seller_bic", report.flags.seller_bic);
    checks.push(
        "buyer_bic_prior",
        report.buyer_bic_prior.iter().flatten().all(nonneg),
    );
    checks.push("buyer_iir_prior", report.buyer_iir_prior.iter().all(nonneg));
    if seller_iir {
        checks.push("seller_iir", report.flags.seller_iir);
    }
    checks
}

/// Builds an ex-ante optimal allocation that keeps the full-information rule
/// and moves payments so the seller's ex-ante payoff is unchanged.
///
/// With `D(x) = U1(x) - U1(x-1) - dv1(x) (1 - Q1(x))` and
/// `S(x) = sum_{2 <= x' <= x} D(x')`, the payments are
/// `t(x,1) = v2(x,1) q(x,1) - S(x) + E_x S` and
/// `t(x,y) = t(x,y-1) + v2(x,y) (q(x,y) - q(x,y-1))`.
pub fn construct_ex_ante_from_full_info(
    env: &Environment,
    fullinfo: &Allocation,
) -> Result<ExAnteSolution, BenchmarkError> {
    let (nx, ny) = (env.x_size(), env.y_size());
    fullinfo.validate(nx, ny)?;
    let q1 = interim_rules(env, fullinfo, &env.prior()).q1;
    if let Some(x) = (1..nx).find(|&x| q1[x] > q1[x - 1]) {
        return Err(BenchmarkError::MonotonicityHypothesisFails { x });
    }
    let d = derived_quantities(env);
    let u1 = seller_payoff_vector(env, fullinfo);
    let mut shift = vec![Rational::zero(); nx];
    for x in 1..nx {
        let step = &u1[x] - &u1[x - 1] - &d.dv1[x] * (Rational::one() - &q1[x]);
        shift[x] = &shift[x - 1] + step;
    }
    let m = expectation(env.p1(), &shift);
    let q = fullinfo.q.clone();
    let mut t = vec![vec![Rational::zero(); ny]; nx];
    for x in 0..nx {
        t[x][0] = env.buyer_value(x, 0) * &q[x][0] - &shift[x] + &m;
        for y in 1..ny {
            t[x][y] = &t[x][y - 1] + env.buyer_value(x, y) * (&q[x][y] - &q[x][y - 1]);
        }
    }
    let allocation = Allocation { q, t };
    let payoffs = seller_payoff_vector(env, &allocation);
    let value = expectation(env.p1(), &payoffs);
    let mut verification = ex_ante_feasibility(env, &allocation, false);
    verification.push("ex_ante_value", value == expectation(env.p1(), &u1));
    if !verification.all_passed() {
        return Err(BenchmarkError::Verification(verification.failures()));
    }
    Ok(ExAnteSolution {
        allocation,
        payoffs,
        value,
        seller_iir: false,
        verification,
    })
}

/// Checks `E_y t(x,y) = E_y[(v2(x,y) - rent(y)) q(x,y)] - u2(x,1)` for every
/// seller type; this holds exactly when the buyer local downward EPICs bind.
pub fn revenue_identity_holds(env: &Environment, g: &Allocation) -> bool {
    let d = derived_quantities(env);
    let u2 = buyer_expost_matrix(env, g);
    (0..env.x_size()).all(|x| {
        let revenue: Rational = (0..env.y_size())
            .map(|y| &env.p2()[y] * &g.t[x][y])
            .sum();
        let virtual_revenue: Rational = (0..env.y_size())
            .map(|y| &env.p2()[y] * (env.buyer_value(x, y) - &d.rent[y]) * &g.q[x][y])
            .sum();
        revenue == virtual_revenue - &u2[x][0]
    })
}

fn expectation(weights: &[Rational], values: &[Rational]) -> Rational {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

fn is_increasing(values: &[Rational]) -> bool {
    values.windows(2).all(|w| w[0] <= w[1])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SellerPayoffGaps {
    pub full_info_minus_rsw: Vec<Rational>,
    pub full_info_minus_ex_ante: Vec<Rational>,
    pub ex_ante_minus_rsw: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonReport {
    pub rsw_payoffs: Vec<Rational>,
    pub full_info_payoffs: Vec<Rational>,
    pub ex_ante_payoffs: Vec<Rational>,
    pub rsw_rule: Matrix,
    pub full_info_rule: Matrix,
    pub efficient_rule: Matrix,
    pub full_info_menus: Vec<FixedPriceMenu>,
    /// `q*(x,y) <= q_full(x,y)` per cell.
    pub undersupply_rsw_vs_fullinfo: Vec<Vec<bool>>,
    /// `q*(x,y) < q_full(x,y)` per cell.
    pub strict_undersupply_rsw_vs_fullinfo: Vec<Vec<bool>>,
    /// `q_full(x,y) <= q_eff(x,y)` per cell; present only when `phi` is increasing.
    pub undersupply_fullinfo_vs_efficient: Option<Vec<Vec<bool>>>,
    pub efficient_comparison_skipped: Option<String>,
    pub seller_payoff_gaps: SellerPayoffGaps,
    /// `u2_full(x,y) - u2*(x,y)`.
    pub buyer_expost_gaps: Matrix,
    /// Ex-ante seller payoffs of RSW, ex-ante optimum and full information.
    pub exante_ranking: [Rational; 3],
    pub full_info_q1_decreasing: bool,
    pub seller_iir: bool,
    pub checks: Checks,
}

pub fn payoff_comparison_report(env: &Environment) -> Result<ComparisonReport, BenchmarkError> {
    payoff_comparison_report_with(env, false)
}

/// Computes all benchmarks from scratch and compares them.
pub fn payoff_comparison_report_with(
    env: &Environment,
    seller_iir: bool,
) -> Result<ComparisonReport, BenchmarkError> {
    let rsw = solve_rsw(env)?;
    let full = solve_full_information(env);
    let ex_ante = solve_ex_ante_optimal_with(env, seller_iir)?;
    let efficient = efficient_rule(env);
    let d = derived_quantities(env);
    Ok(compare(env, &d, &rsw, &full, &ex_ante, efficient, seller_iir))
}

fn compare(
    env: &Environment,
    d: &DerivedQuantities,
    rsw: &RswSolution,
    full: &FullInformation,
    ex_ante: &ExAnteSolution,
    efficient: Matrix,
    seller_iir: bool,
) -> ComparisonReport {
    let (qs, qf) = (&rsw.allocation.q, &full.allocation.q);
    let cellwise = |a: &Matrix, b: &Matrix, f: fn(&Rational, &Rational) -> bool| -> Vec<Vec<bool>> {
        a.iter()
            .zip(b)
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(u, v)| f(u, v)).collect())
            .collect()
    };
    let undersupply = cellwise(qs, qf, |a, b| a <= b);
    let strict = cellwise(qs, qf, |a, b| a < b);
    let (vs_efficient, skipped) = if is_increasing(&d.phi) {
        (Some(cellwise(qf, &efficient, |a, b| a <= b)), None)
    } else {
        (None, Some("phi is not increasing in the buyer's type".to_string()))
    };
    let diff = |a: &[Rational], b: &[Rational]| -> Vec<Rational> {
        a.iter().zip(b).map(|(u, v)| u - v).collect()
    };
    let gaps = SellerPayoffGaps {
        full_info_minus_rsw: diff(&full.payoffs, &rsw.payoffs),
        full_info_minus_ex_ante: diff(&full.payoffs, &ex_ante.payoffs),
        ex_ante_minus_rsw: diff(&ex_ante.payoffs, &rsw.payoffs),
    };
    let u2_full = buyer_expost_matrix(env, &full.allocation);
    let u2_rsw = buyer_expost_matrix(env, &rsw.allocation);
    let buyer_gaps: Matrix = u2_full.iter().zip(&u2_rsw).map(|(a, b)| diff(a, b)).collect();
    let ranking = [
        expectation(env.p1(), &rsw.payoffs),
        ex_ante.value.clone(),
        expectation(env.p1(), &full.payoffs),
    ];
    let q1 = interim_rules(env, &full.allocation, &env.prior()).q1;
    let q1_decreasing = q1.windows(2).all(|w| w[0] >= w[1]);

    let mut checks = Checks::new();
    checks.push("rsw_below_full_info_rule", undersupply.iter().flatten().all(|b| *b));
    if let Some(m) = &vs_efficient {
        checks.push("full_info_below_efficient_rule", m.iter().flatten().all(|b| *b));
    }
    let v21 = env.v21();
    let payoff_order = (0..env.x_size()).all(|x| {
        if v21[x] == v21[0] {
            rsw.payoffs[x] == full.payoffs[x]
        } else {
            rsw.payoffs[x] <= full.payoffs[x]
        }
    });
    checks.push("rsw_payoff_below_full_info", payoff_order);
    checks.push(
        "rsw_buyer_payoff_below_full_info",
        buyer_gaps.iter().flatten().all(|g| !g.is_negative()),
    );
    checks.push(
        "ex_ante_ranking",
        ranking[0] <= ranking[1] && ranking[1] <= ranking[2],
    );
    if !seller_iir && q1_decreasing {
        checks.push("ex_ante_equals_full_info", ranking[1] == ranking[2]);
    }
    checks.push(
        "revenue_identity_rsw",
        revenue_identity_holds(env, &rsw.allocation),
    );
    checks.push(
        "revenue_identity_full_info",
        revenue_identity_holds(env, &full.allocation),
    );

    ComparisonReport {
        rsw_payoffs: rsw.payoffs.clone(),
        full_info_payoffs: full.payoffs.clone(),
        ex_ante_payoffs: ex_ante.payoffs.clone(),
        rsw_rule: qs.clone(),
        full_info_rule: qf.clone(),
        efficient_rule: efficient,
        full_info_menus: full.menus.clone(),
        undersupply_rsw_vs_fullinfo: undersupply,
        strict_undersupply_rsw_vs_fullinfo: strict,
        undersupply_fullinfo_vs_efficient: vs_efficient,
        efficient_comparison_skipped: skipped,
        seller_payoff_gaps: gaps,
        buyer_expost_gaps: buyer_gaps,
        exante_ranking: ranking,
        full_info_q1_decreasing: q1_decreasing,
        seller_iir,
        checks,
    }
}

/// Plot data with one row per type profile: `x,y,q_rsw,q_full_info,q_efficient`.
pub fn plot_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("x,y,q_rsw,q_full_info,q_efficient\n");
    for (x, row) in report.rsw_rule.iter().enumerate() {
        for (y, q) in row.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                x + 1,
                y + 1,
                q,
                report.full_info_rule[x][y],
                report.efficient_rule[x][y]
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::rational::{r, ri};

    #[test]
    fn fixed_prices_with_threshold_13_minus_x() {
        let full = solve_full_information(&catalog::efficient_trade_25());
        for menu in &full.menus {
            let x = menu.x as i64;
            assert_eq!(menu.threshold as i64, (13 - x).max(1));
            let price = if x <= 12 { 2 * x + 13 } else { 3 * x + 1 };
            assert_eq!(menu.price, ri(price));
        }
        assert!(full.verification.all_passed());
    }

    #[test]
    fn fixed_prices_with_threshold_27_minus_x() {
        let full = solve_full_information(&catalog::vanishing_market_25());
        for menu in &full.menus {
            let x = menu.x as i64;
            assert_eq!(menu.threshold as i64, 27 - x);
            let price = if x == 1 { 0 } else { 2 * x + 27 };
            assert_eq!(menu.price, ri(price));
        }
    }

    #[test]
    fn skewed_used_car_full_information() {
        let full = solve_full_information(&catalog::skewed_used_car());
        assert_eq!(full.allocation.q, vec![vec![ri(1); 2]; 2]);
        assert_eq!(full.allocation.t, vec![vec![ri(200); 2], vec![ri(300); 2]]);
        assert_eq!(full.payoffs, vec![ri(200), ri(300)]);
    }

    #[test]
    fn used_car_ex_ante_value() {
        let env = catalog::used_car();
        let full = solve_full_information(&env);
        assert_eq!(full.payoffs, vec![ri(200), ri(300)]);
        let reduced = solve_ex_ante_optimal(&env).unwrap();
        assert_eq!(reduced.value, ri(250));
        assert_eq!(solve_ex_ante_direct(&env, false).unwrap().value, ri(250));
        let built = construct_ex_ante_from_full_info(&env, &full.allocation).unwrap();
        assert_eq!(built.value, ri(250));
        assert_eq!(built.allocation.t, vec![vec![ri(250); 2]; 2]);
    }

    #[test]
    fn dominated_rsw_ex_ante_value() {
        let env = catalog::dominated_rsw();
        let sol = solve_ex_ante_optimal(&env).unwrap();
        assert_eq!(sol.value, ri(10));
        let constant = Allocation::constant(2, 2, ri(1), ri(10));
        assert!(ex_ante_feasibility(&env, &constant, false).all_passed());
        let built =
            construct_ex_ante_from_full_info(&env, &solve_full_information(&env).allocation)
                .unwrap();
        assert_eq!(built.value, ri(10));
    }

    #[test]
    fn reduced_and_direct_agree_with_seller_participation() {
        for (_, env) in catalog::all().into_iter().filter(|(_, e)| e.x_size() <= 2) {
            for iir in [false, true] {
                let a = solve_ex_ante_optimal_with(&env, iir).unwrap();
                let b = solve_ex_ante_direct(&env, iir).unwrap();
                assert_eq!(a.value, b.value);
            }
        }
    }

    #[test]
    fn increasing_interim_trade_blocks_construction() {
        let env = catalog::vanishing_market_25();
        let full = solve_full_information(&env);
        let q1 = interim_rules(&env, &full.allocation, &env.prior()).q1;
        assert_eq!(q1[4], r(4, 25));
        assert_eq!(
            construct_ex_ante_from_full_info(&env, &full.allocation),
            Err(BenchmarkError::MonotonicityHypothesisFails { x: 1 })
        );
    }

    #[test]
    fn skewed_used_car_comparison() {
        let report = payoff_comparison_report(&catalog::skewed_used_car()).unwrap();
        assert_eq!(report.seller_payoff_gaps.full_info_minus_rsw, vec![ri(0), ri(40)]);
        assert!(report.checks.all_passed(), "{:?}", report.checks.failures());
        assert!(report.strict_undersupply_rsw_vs_fullinfo[1][0]);
    }

    #[test]
    fn efficient_trade_comparison() {
        let env = catalog::efficient_trade_25();
        let report = payoff_comparison_report(&env).unwrap();
        assert!(report.checks.all_passed(), "{:?}", report.checks.failures());
        assert!(report.strict_undersupply_rsw_vs_fullinfo.iter().flatten().any(|b| *b));
        let csv = plot_csv(&report);
        assert_eq!(csv.lines().count(), 1 + 25 * 25);
    }

    #[test]
    fn revenue_identity_fails_without_binding_epic() {
        let env = catalog::used_car();
        let g = Allocation {
            q: vec![vec![ri(0), ri(1)], vec![ri(0), ri(1)]],
            t: vec![vec![ri(0), ri(100)], vec![ri(0), ri(100)]],
        };
        assert!(!revenue_identity_holds(&env, &g));
    }
}

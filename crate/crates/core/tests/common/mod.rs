//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use ipmech::benchmarks::{solve_ex_ante_direct, solve_ex_ante_optimal, solve_ex_ante_optimal_with};
use ipmech::env::{build_environment, Allocation, Environment, EnvironmentSpec, Matrix};
use ipmech::lp::QuadTransportProblem;
use ipmech::rsw::solve_rsw;
use ipmech::Rational;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

/// Distribution with full support and denominators dividing the total weight.
pub fn distribution(len: usize) -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec(1i64..=4, len).prop_map(|w| {
        let total: i64 = w.iter().sum();
        w.into_iter().map(|v| rat(v, total)).collect()
    })
}

/// Increasing sequence in halves; strictly increasing when `strict`.
pub fn increasing(len: usize, strict: bool) -> impl Strategy<Value = Vec<Rational>> {
    let step_min = if strict { 1 } else { 0 };
    (0i64..=20, prop::collection::vec(step_min..=8i64, len)).prop_map(|(start, steps)| {
        let mut level = start;
        steps
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                if i > 0 {
                    level += s;
                }
                rat(level, 2)
            })
            .collect()
    })
}

pub fn environment_sized(nx: usize, ny: usize) -> impl Strategy<Value = Environment> {
    (
        distribution(nx),
        distribution(ny),
        increasing(nx, true),
        increasing(ny, false),
        increasing(nx, false),
        increasing(ny, true),
    )
        .prop_map(move |(p1, p2, v11, v12, v21, v22)| {
            build_environment(EnvironmentSpec {
                x_size: nx,
                y_size: ny,
                p1,
                p2,
                v11,
                v12,
                v21,
                v22,
            })
            .expect("generated environment is valid")
        })
}

/// Environments with up to four types on each side.
pub fn environment() -> impl Strategy<Value = Environment> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(nx, ny)| environment_sized(nx, ny))
}

/// Positive weights with small denominators.
pub fn weights(len: usize) -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec((1i64..=9, 1i64..=3), len)
        .prop_map(|w| w.into_iter().map(|(n, d)| rat(n, d)).collect())
}

pub fn mix(a: &Allocation, b: &Allocation, w: &Rational) -> Allocation {
    let blend = |m: &Matrix, n: &Matrix| -> Matrix {
        m.iter()
            .zip(n)
            .map(|(r, s)| {
                r.iter()
                    .zip(s)
                    .map(|(u, v)| w * u + (Rational::one() - w) * v)
                    .collect()
            })
            .collect()
    };
    Allocation {
        q: blend(&a.q, &b.q),
        t: blend(&a.t, &b.t),
    }
}

/// Allocations that are BIC and IIR for both sides under the prior: the RSW
/// allocation, both ex-ante optima with seller participation,
/// no trade, and mixtures of them.
pub fn feasible_allocations(env: &Environment, mixes: &[(usize, usize, Rational)]) -> Vec<Allocation> {
    let mut base = vec![
        solve_rsw(env).expect("rsw").allocation,
        solve_ex_ante_direct(env, true).expect("direct ex-ante").allocation,
        solve_ex_ante_optimal_with(env, true).expect("reduced ex-ante").allocation,
        Allocation::no_trade(env.x_size(), env.y_size()),
    ];
    let extra: Vec<Allocation> = mixes
        .iter()
        .map(|(i, j, w)| mix(&base[i % 4], &base[j % 4], w))
        .collect();
    base.extend(extra);
    base
}

/// Monotone 0/1 rules on `n` buyer types are the threshold rules.
pub fn brute_force_monotone(c: &[Rational], p2: &[Rational]) -> Rational {
    (0..=c.len())
        .map(|k| (k..c.len()).map(|y| &p2[y] * &c[y]).sum::<Rational>())
        .max()
        .expect("at least one rule")
}

/// Floating-point minimizer of `sum w q^2` over the transport polytope by
/// Dykstra's alternating projections in the weighted norm.
pub fn float_quad_transport(problem: &QuadTransportProblem, iterations: usize) -> Vec<Vec<f64>> {
    let (nx, ny) = (problem.pi1.len(), problem.p2.len());
    let n = nx * ny;
    let f = |v: &Rational| v.to_f64();
    let w: Vec<f64> = (0..n)
        .map(|k| f(&problem.pi1[k / ny]) * f(&problem.p2[k % ny]))
        .collect();
    // Row constraints and all but the last column constraint are independent.
    let rows = nx + ny - 1;
    let mut a = DMatrix::<f64>::zeros(rows, n);
    let mut b = DVector::<f64>::zeros(rows);
    for x in 0..nx {
        for y in 0..ny {
            a[(x, x * ny + y)] = f(&problem.p2[y]);
        }
        b[x] = f(&problem.row_targets[x]);
    }
    for y in 0..ny - 1 {
        for x in 0..nx {
            a[(nx + y, x * ny + y)] = f(&problem.pi1[x]);
        }
        b[nx + y] = f(&problem.col_targets[y]);
    }
    let w_inv = DMatrix::from_diagonal(&DVector::from_iterator(n, w.iter().map(|v| 1.0 / v)));
    let gram = &a * &w_inv * a.transpose();
    let lu = gram.lu();
    let project_affine = |z: &DVector<f64>| -> DVector<f64> {
        let residual = &a * z - &b;
        let lambda = lu.solve(&residual).expect("independent constraints");
        z - &w_inv * a.transpose() * lambda
    };
    let mut z = DVector::<f64>::zeros(n);
    let mut p = DVector::<f64>::zeros(n);
    let mut q = DVector::<f64>::zeros(n);
    for _ in 0..iterations {
        let y = project_affine(&(&z + &p));
        p = &z + &p - &y;
        let next = (&y + &q).map(|v| v.clamp(0.0, 1.0));
        q = &y + &q - &next;
        let change = (&next - &z).amax();
        z = next;
        if change < 1e-13 {
            break;
        }
    }
    (0..nx)
        .map(|x| (0..ny).map(|y| z[x * ny + y]).collect())
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn expectation(w: &[Rational], v: &[Rational]) -> Rational {
    w.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn is_increasing(v: &[Rational]) -> bool {
    v.windows(2).all(|w| w[0] <= w[1])
}

fn is_decreasing(v: &[Rational]) -> bool {
    v.windows(2).all(|w| w[0] >= w[1])
}

/// Rows increasing in the buyer's type and, on rows with positive weight,
/// columns decreasing in the seller's type.
pub fn rule_is_monotone(q: &Matrix, pi1: &[Rational]) -> bool {
    let rows = q.iter().all(|row| is_increasing(row));
    let live: Vec<&Vec<Rational>> = q.iter().zip(pi1).filter(|(_, w)| w.is_positive()).map(|(r, _)| r).collect();
    let cols = live.windows(2).all(|w| w[0].iter().zip(w[1]).all(|(a, b)| a >= b));
    rows && cols
}

/// RSW output: post-verification, certificate shape, seller participation,
/// decreasing `Q1`, uniqueness against the per-type cross-check, and
/// undominatedness under the supporting belief.
pub fn rsw_properties(env: &Environment) -> Result<(), TestCaseError> {
    use ipmech::env::{check_constraints, interim_rules, seller_payoff_vector};
    use ipmech::refine::undominated_given;
    use ipmech::rsw::rsw_per_type_crosscheck;

    let sol = solve_rsw(env).map_err(|e| TestCaseError::fail(e.to_string()))?;
    ensure(sol.verification.all_passed(), || format!("verification {:?}", sol.verification.failures()))?;
    let g = &sol.allocation;
    let report = check_constraints(env, g, &env.prior());
    ensure(report.flags.feasible && report.flags.buyer_epic && report.flags.buyer_epir, || {
        format!("flags {:?}", report.flags)
    })?;
    let pi = sol.certificate.pi1.as_slice();
    ensure(pi.iter().all(|w| !w.is_negative()), || "negative belief".into())?;
    ensure(pi.iter().sum::<Rational>() == Rational::one(), || "belief does not sum to 1".into())?;
    ensure(sol.certificate.kappa.iter().all(|k| !k.is_negative()), || "negative kappa".into())?;
    let mut cdf = Rational::zero();
    for y in 0..env.y_size() {
        for x in 0..env.x_size() {
            let expected = &pi[x] * (Rational::one() - &cdf);
            ensure(sol.certificate.lambda[x][y] == expected, || format!("lambda({x},{y})"))?;
        }
        cdf += &env.p2()[y];
    }
    for x in 0..env.x_size() {
        let lhs = &pi[x];
        let rhs = &env.p1()[x] + sol.certificate.kappa_at(x + 1) - sol.certificate.kappa_at(x);
        ensure(*lhs == rhs, || format!("belief identity at {x}"))?;
    }
    let u1 = seller_payoff_vector(env, g);
    ensure(u1 == sol.payoffs, || "reported payoffs".into())?;
    for x in 0..env.x_size() {
        let outside = &env.v11()[x] + expectation(env.p2(), env.v12());
        ensure(u1[x] >= outside, || format!("seller IIR at {x}"))?;
    }
    ensure(is_decreasing(&interim_rules(env, g, &env.prior()).q1), || "Q1 not decreasing".into())?;
    ensure(g.q.iter().all(|row| is_increasing(row)), || "EPIC rule not increasing in y".into())?;
    let per_type = rsw_per_type_crosscheck(env).map_err(|e| TestCaseError::fail(e.to_string()))?;
    ensure(per_type == sol.payoffs, || format!("per-type {per_type:?} vs {:?}", sol.payoffs))?;
    let dominance = undominated_given(env, g, &sol.certificate.pi1).map_err(|e| TestCaseError::fail(e.to_string()))?;
    ensure(dominance.undominated, || "dominated under its supporting belief".into())?;
    Ok(())
}

/// Re-solving with positive weights leaves the payoff vector unchanged.
pub fn weighted_properties(env: &Environment, w: &[Rational]) -> Result<(), TestCaseError> {
    use ipmech::rsw::solve_rsw_weighted;
    let base = solve_rsw(env).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let weighted = solve_rsw_weighted(env, w).map_err(|e| TestCaseError::fail(e.to_string()))?;
    ensure(weighted.verification.all_passed(), || "weighted verification".into())?;
    ensure(weighted.payoffs == base.payoffs, || format!("{:?} vs {:?}", weighted.payoffs, base.payoffs))
}

/// Undersupply, payoff dominance, ex-ante ranking and revenue identities,
/// recomputed from the raw solver outputs.
pub fn benchmark_properties(env: &Environment) -> Result<(), TestCaseError> {
    use ipmech::benchmarks::{revenue_identity_holds, solve_full_information};
    use ipmech::env::{buyer_expost_matrix, derived_quantities, efficient_rule, interim_rules};

    let rsw = solve_rsw(env).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let full = solve_full_information(env);
    ensure(full.verification.all_passed(), || format!("full info {:?}", full.verification.failures()))?;
    let (qs, qf) = (&rsw.allocation.q, &full.allocation.q);
    let cells = (0..env.x_size()).flat_map(|x| (0..env.y_size()).map(move |y| (x, y)));
    for (x, y) in cells.clone() {
        ensure(qs[x][y] <= qf[x][y], || format!("undersupply at ({x},{y})"))?;
    }
    let d = derived_quantities(env);
    if is_increasing(&d.phi) {
        let eff = efficient_rule(env);
        for (x, y) in cells.clone() {
            ensure(qf[x][y] <= eff[x][y], || format!("full info above efficient at ({x},{y})"))?;
        }
    }
    for x in 0..env.x_size() {
        if env.v21()[x] == env.v21()[0] {
            ensure(rsw.payoffs[x] == full.payoffs[x], || format!("payoff equality at {x}"))?;
        } else {
            ensure(rsw.payoffs[x] <= full.payoffs[x], || format!("payoff order at {x}"))?;
        }
    }
    let (us, uf) = (buyer_expost_matrix(env, &rsw.allocation), buyer_expost_matrix(env, &full.allocation));
    for (x, y) in cells {
        ensure(us[x][y] <= uf[x][y], || format!("buyer payoff at ({x},{y})"))?;
    }
    let direct = solve_ex_ante_direct(env, false).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let reduced = solve_ex_ante_optimal(env).map_err(|e| TestCaseError::fail(e.to_string()))?;
    ensure(direct.value == reduced.value, || format!("ex-ante {} vs {}", direct.value, reduced.value))?;
    let low = expectation(env.p1(), &rsw.payoffs);
    let high = expectation(env.p1(), &full.payoffs);
    ensure(low <= direct.value && direct.value <= high, || format!("ranking {low} {} {high}", direct.value))?;
    if is_decreasing(&interim_rules(env, &full.allocation, &env.prior()).q1) {
        ensure(direct.value == high, || "ex-ante differs from full information".into())?;
    }
    ensure(revenue_identity_holds(env, &rsw.allocation), || "revenue identity rsw".into())?;
    ensure(revenue_identity_holds(env, &full.allocation), || "revenue identity full info".into())?;
    Ok(())
}

/// Both transforms keep the payoffs they promise, and the least-squares rule
/// is monotone.
pub fn transform_properties(env: &Environment, mixes: &[(usize, usize, Rational)]) -> Result<(), TestCaseError> {
    use ipmech::env::{buyer_interim_vector, check_constraints, seller_payoff_vector};
    use ipmech::lp::verify_quad_kkt;
    use ipmech::refine::{epic_equivalent, epic_equivalent_binding};

    let prior = env.prior();
    for g in feasible_allocations(env, mixes) {
        let (h, trace) = epic_equivalent(env, &g).map_err(|e| TestCaseError::fail(e.to_string()))?;
        ensure(seller_payoff_vector(env, &h) == seller_payoff_vector(env, &g), || "U1 changed".into())?;
        ensure(buyer_interim_vector(env, &h, &prior) == buyer_interim_vector(env, &g, &prior), || {
            "U2 changed".into()
        })?;
        let report = check_constraints(env, &h, &prior);
        ensure(report.flags.feasible && report.flags.buyer_epic, || format!("flags {:?}", report.flags))?;
        ensure(rule_is_monotone(&trace.qp_rule.q, env.p1()), || "least-squares rule not monotone".into())?;
        let problem = QuadTransportProblem::from_rule(env.p1(), env.p2(), &g.q);
        verify_quad_kkt(&problem, &trace.qp_rule).map_err(TestCaseError::fail)?;
        let b = epic_equivalent_binding(env, &g).map_err(|e| TestCaseError::fail(e.to_string()))?;
        ensure(seller_payoff_vector(env, &b) == seller_payoff_vector(env, &g), || "binding U1 changed".into())?;
        let report = check_constraints(env, &b, &prior);
        let binding = report.buyer_epic.iter().all(|m| (1..env.y_size()).all(|y| m[y][y - 1].is_zero()));
        ensure(binding, || "downward EPIC not binding".into())?;
    }
    Ok(())
}

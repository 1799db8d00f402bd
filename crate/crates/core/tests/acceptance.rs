//! Acceptance criteria, one line of output per criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};

use common::*;
use ipmech::benchmarks::{payoff_comparison_report, solve_full_information};
use ipmech::catalog;
use ipmech::env::{check_constraints, dominance, seller_payoff_vector, Allocation, Dominance};
use ipmech::lp::{maximize_monotone_linear, solve_quad_transport, verify_quad_kkt, QuadTransportProblem};
use ipmech::refine::{check_core, check_fgp_exists, check_snp_exists, check_strong_solution, seller_payoff_set};
use ipmech::rsw::{check_regularity, extract_almost_fixed_prices, solve_rsw};
use ipmech::Rational;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! require {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ri(n: i64) -> Rational {
    Rational::from_integer(n)
}

fn constant_rows(rows: &[(i64, i64, i64, i64)], ny: usize) -> Allocation {
    Allocation {
        q: rows.iter().map(|&(n, d, _, _)| vec![rat(n, d); ny]).collect(),
        t: rows.iter().map(|&(_, _, n, d)| vec![rat(n, d); ny]).collect(),
    }
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn used_car_rsw() -> Outcome {
    let env = catalog::used_car();
    let sol = solve_rsw(&env).map_err(|e| e.to_string())?;
    let table = Allocation {
        q: vec![vec![ri(1), ri(1)], vec![ri(0), rat(2, 3)]],
        t: vec![vec![ri(200), ri(200)], vec![ri(0), rat(800, 3)]],
    };
    require!(sol.allocation == table, "allocation {:?}", sol.allocation);
    require!(sol.payoffs == vec![ri(200), rat(800, 3)], "payoffs {:?}", sol.payoffs);
    Ok(())
}

fn dominated_rsw() -> Outcome {
    let env = catalog::dominated_rsw();
    let sol = solve_rsw(&env).map_err(|e| e.to_string())?;
    let menus = constant_rows(&[(1, 1, 7, 1), (1, 5, 13, 5)], 2);
    require!(sol.allocation == menus, "menus {:?}", sol.allocation);
    let strong = check_strong_solution(&env).map_err(|e| e.to_string())?;
    require!(!strong.holds, "strong solution reported");
    let better = constant_rows(&[(1, 1, 10, 1), (1, 1, 10, 1)], 2);
    require!(check_constraints(&env, &better, &env.prior()).flags.feasible, "q = 1, t = 10 infeasible");
    require!(
        dominance(&env, &better, &sol.allocation) == Dominance::Dominates,
        "q = 1, t = 10 does not dominate"
    );
    Ok(())
}

fn efficient_trade() -> Outcome {
    let env = catalog::efficient_trade_25();
    let full = solve_full_information(&env);
    for m in &full.menus {
        let x = m.x as i64;
        for y in 1..=25i64 {
            let trades = full.allocation.q[m.x - 1][(y - 1) as usize] == 1;
            require!(trades == (y >= 13 - x), "trade set of x={x} at y={y}");
        }
        if 13 - x >= 1 {
            require!(m.threshold as i64 == 13 - x, "threshold of x={x}: {}", m.threshold);
            require!(m.price == ri(2 * x + 13), "price of x={x}: {}", m.price);
        } else {
            // Every buyer type trades; the price is the lowest buyer value.
            require!(m.threshold == 1 && m.price == ri(3 * x + 1), "menu of x={x}: {:?}", m);
        }
    }
    check_regularity(&env).map_err(|e| e.to_string())?;
    let rsw = solve_rsw(&env).map_err(|e| e.to_string())?;
    extract_almost_fixed_prices(&env, &rsw.allocation).map_err(|e| e.to_string())?;
    let report = payoff_comparison_report(&env).map_err(|e| e.to_string())?;
    require!(
        report.undersupply_rsw_vs_fullinfo.iter().flatten().all(|b| *b),
        "undersupply violated"
    );
    require!(
        report.strict_undersupply_rsw_vs_fullinfo.iter().flatten().any(|b| *b),
        "no strict undersupply cell"
    );
    Ok(())
}

fn vanishing_market() -> Outcome {
    let env = catalog::vanishing_market_25();
    let full = solve_full_information(&env);
    for m in &full.menus {
        let x = m.x as i64;
        require!(m.threshold as i64 == 27 - x, "threshold of x={x}: {}", m.threshold);
        if 27 - x <= 25 {
            require!(m.price == ri(2 * x + 27), "price of x={x}: {}", m.price);
        }
    }
    let rsw = solve_rsw(&env).map_err(|e| e.to_string())?;
    require!(rsw.allocation == Allocation::no_trade(25, 25), "RSW trades");
    Ok(())
}

fn used_car_triangle() -> Outcome {
    let poly = seller_payoff_set(&catalog::used_car()).map_err(|e| e.to_string())?;
    let vertices: Vec<[Rational; 2]> = poly.vertices.iter().map(|v| v.payoff.clone()).collect();
    let want = vec![
        [ri(200), rat(800, 3)],
        [rat(700, 3), rat(800, 3)],
        [ri(225), ri(275)],
    ];
    require!(vertices == want, "vertices {vertices:?}");
    let mut facets: Vec<(Rational, Rational, Rational)> =
        poly.facets.iter().map(|f| (f.a.clone(), f.b.clone(), f.c.clone())).collect();
    facets.sort();
    let mut expected = vec![
        (ri(0), ri(-1), rat(-800, 3)),
        (ri(-1), ri(3), ri(600)),
        (ri(1), ri(1), ri(500)),
    ];
    expected.sort();
    require!(facets == expected, "facets {facets:?}");
    Ok(())
}

fn core_trapezoid() -> Outcome {
    let env = catalog::core_trapezoid();
    let poly = seller_payoff_set(&env).map_err(|e| e.to_string())?;
    let top = poly.vertices.iter().map(|v| v.payoff[1].clone()).max().ok_or("empty polygon")?;
    require!(top == ri(100), "max U1(2) = {top}");
    let witness = |u1: i64| {
        poly.vertices
            .iter()
            .find(|v| v.payoff == [ri(u1), ri(100)])
            .map(|v| v.witness.clone())
            .ok_or(format!("no vertex ({u1},100)"))
    };
    let (low, high) = (witness(95)?, witness(100)?);
    let middle = mix(&low, &high, &rat(3, 5));
    for (label, g) in [("95", &low), ("97", &middle), ("100", &high)] {
        let u = seller_payoff_vector(&env, g);
        require!(u[1] == ri(100), "U1(2) of {label} is {}", u[1]);
        require!(u[0] == ri(label.parse().unwrap()), "U1(1) of {label} is {}", u[0]);
        let core = check_core(&env, g).map_err(|e| e.to_string())?;
        require!(core.core, "allocation {label} blocked");
    }
    let rsw = solve_rsw(&env).map_err(|e| e.to_string())?;
    require!(rsw.payoffs == vec![ri(80), ri(90)], "RSW payoffs {:?}", rsw.payoffs);
    require!(!check_core(&env, &rsw.allocation).map_err(|e| e.to_string())?.core, "RSW not blocked");
    Ok(())
}

fn fgp_without_snp() -> Outcome {
    let env = catalog::skewed_used_car();
    let rsw = solve_rsw(&env).map_err(|e| e.to_string())?;
    require!(rsw.payoffs == vec![ri(200), ri(260)], "RSW payoffs {:?}", rsw.payoffs);
    let g = &rsw.allocation;
    require!(g.q[1][0] == rat(1, 5), "q(2,1) = {}", g.q[1][0]);
    require!(g.t[1][0] == ri(60) && g.t[1][1] == ri(380), "t(2,.) = {:?}", g.t[1]);
    let full = solve_full_information(&env);
    require!(full.payoffs == vec![ri(200), ri(300)], "full-information payoffs {:?}", full.payoffs);
    require!(check_fgp_exists(&env).map_err(|e| e.to_string())?.exists, "FGP missing");
    require!(!check_snp_exists(&env).map_err(|e| e.to_string())?.exists, "SNP reported");
    Ok(())
}

fn random_environments() -> Outcome {
    let strategy = (environment(), weights(4), prop::collection::vec((0usize..4, 0usize..4, 0i64..=4), 2));
    runner(200)
        .run(&strategy, |(env, w, mixes)| {
            let w = &w[..env.x_size()];
            let mixes: Vec<(usize, usize, Rational)> =
                mixes.into_iter().map(|(i, j, k)| (i, j, rat(k, 4))).collect();
            rsw_properties(&env)?;
            weighted_properties(&env, w)?;
            benchmark_properties(&env)?;
            transform_properties(&env, &mixes)?;
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn oracle_equivalence() -> Outcome {
    let monotone = (1usize..=12).prop_flat_map(|n| {
        (prop::collection::vec((-20i64..=20, 1i64..=3), n), distribution(n))
    });
    runner(100)
        .run(&monotone, |(c, p2)| {
            let c: Vec<Rational> = c.into_iter().map(|(n, d)| rat(n, d)).collect();
            let opt = maximize_monotone_linear(&c, &p2);
            prop_assert_eq!(opt.value, brute_force_monotone(&c, &p2));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let shapes = prop_oneof![
        Just((1usize, 2usize)), Just((2, 1)), Just((2, 2)), Just((2, 3)),
        Just((3, 2)), Just((1, 6)), Just((6, 1)), Just((1, 3)), Just((3, 1)),
    ];
    let quad = shapes.prop_flat_map(|(nx, ny)| {
        (distribution(nx), distribution(ny), prop::collection::vec(prop::collection::vec(0i64..=4, ny), nx))
    });
    runner(100)
        .run(&quad, |(pi1, p2, grid)| {
            let q: Vec<Vec<Rational>> = grid.iter().map(|r| r.iter().map(|&v| rat(v, 4)).collect()).collect();
            let problem = QuadTransportProblem::from_rule(&pi1, &p2, &q);
            let sol = solve_quad_transport(&problem).map_err(|e| TestCaseError::fail(e.to_string()))?;
            verify_quad_kkt(&problem, &sol).map_err(TestCaseError::fail)?;
            let approx = float_quad_transport(&problem, 200_000);
            for (exact, float) in sol.q.iter().flatten().zip(approx.iter().flatten()) {
                prop_assert!((exact.to_f64() - float).abs() <= 1e-6, "{} vs {}", exact, float);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("used-car RSW allocation and payoffs", used_car_rsw),
        ("dominated RSW allocation and strong-solution failure", dominated_rsw),
        ("efficient-trade thresholds, prices, almost-fixed prices, undersupply", efficient_trade),
        ("vanishing market thresholds, prices and no RSW trade", vanishing_market),
        ("used-car payoff triangle", used_car_triangle),
        ("core allocations on the trapezoid", core_trapezoid),
        ("FGP without strong neologism-proofness", fgp_without_snp),
        ("200 random environments", random_environments),
        ("oracle equivalence of monotone and quadratic solvers", oracle_equivalence),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(()) => println!("criterion {}: PASS {name} ({:.1?})", i + 1, start.elapsed()),
            Err(e) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {e}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

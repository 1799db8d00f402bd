//! Reference environments with known solutions.
//!
//! The same environments ship as JSON files under `data/` at the workspace
//! root; the tests check that both encodings agree.

use crate::env::{build_environment, Environment, EnvironmentSpec};
use crate::rational::{r, ri, Rational};

fn uniform(n: usize) -> Vec<Rational> {
    vec![r(1, n as i64); n]
}

fn ints(values: impl IntoIterator<Item = i64>) -> Vec<Rational> {
    values.into_iter().map(ri).collect()
}

fn build(spec: EnvironmentSpec) -> Environment {
    build_environment(spec).expect("catalog environment is valid")
}

/// Two-quality used car: seller values `100x`, buyer values `100(x+y)`,
/// independent uniform types on `{1,2}`.
pub fn used_car() -> Environment {
    build(EnvironmentSpec {
        x_size: 2,
        y_size: 2,
        p1: uniform(2),
        p2: uniform(2),
        v11: ints([100, 200]),
        v12: ints([0, 0]),
        v21: ints([100, 200]),
        v22: ints([100, 200]),
    })
}

/// The used car with a buyer who is frequent only with probability 1/4.
/// The RSW allocation is undominated here but strictly below full information.
pub fn skewed_used_car() -> Environment {
    let mut spec = used_car().to_spec();
    spec.p2 = vec![r(3, 4), r(1, 4)];
    build(spec)
}

/// Seller values `x + 3y`, buyer values `6x + y` on `{1,2}^2`: the RSW
/// allocation is dominated under the prior.
pub fn dominated_rsw() -> Environment {
    build(EnvironmentSpec {
        x_size: 2,
        y_size: 2,
        p1: uniform(2),
        p2: uniform(2),
        v11: ints([1, 2]),
        v12: ints([3, 6]),
        v21: ints([6, 12]),
        v22: ints([1, 2]),
    })
}

/// 25 x 25 types, seller values `x`, buyer values `3x + y`: trade is always
/// efficient.
pub fn efficient_trade_25() -> Environment {
    build(EnvironmentSpec {
        x_size: 25,
        y_size: 25,
        p1: uniform(25),
        p2: uniform(25),
        v11: ints(1..=25),
        v12: ints(std::iter::repeat_n(0, 25)),
        v21: ints((1..=25).map(|x| 3 * x)),
        v22: ints(1..=25),
    })
}

/// 25 x 25 types, seller values `x + 28`, buyer values `3x + y`: the lowest
/// seller type never trades under full information, so the market vanishes.
pub fn vanishing_market_25() -> Environment {
    build(EnvironmentSpec {
        x_size: 25,
        y_size: 25,
        p1: uniform(25),
        p2: uniform(25),
        v11: ints((1..=25).map(|x| x + 28)),
        v12: ints(std::iter::repeat_n(0, 25)),
        v21: ints((1..=25).map(|x| 3 * x)),
        v22: ints(1..=25),
    })
}

/// Seller values `10x + 70`, buyer values `60x + 10y`: no trade is RSW and the
/// feasible payoff set is a trapezoid.
pub fn core_trapezoid() -> Environment {
    build(EnvironmentSpec {
        x_size: 2,
        y_size: 2,
        p1: uniform(2),
        p2: uniform(2),
        v11: ints([80, 90]),
        v12: ints([0, 0]),
        v21: ints([60, 120]),
        v22: ints([10, 20]),
    })
}

/// The buyer's valuation ignores the seller's type, so the seller's private
/// information costs nothing.
pub fn private_buyer() -> Environment {
    build(EnvironmentSpec {
        x_size: 2,
        y_size: 2,
        p1: uniform(2),
        p2: uniform(2),
        v11: ints([20, 40]),
        v12: ints([0, 0]),
        v21: ints([0, 0]),
        v22: ints([60, 100]),
    })
}

/// Every catalog environment with its file stem under `data/`.
pub fn all() -> Vec<(&'static str, Environment)> {
    vec![
        ("used_car", used_car()),
        ("skewed_used_car", skewed_used_car()),
        ("dominated_rsw", dominated_rsw()),
        ("efficient_trade_25", efficient_trade_25()),
        ("vanishing_market_25", vanishing_market_25()),
        ("core_trapezoid", core_trapezoid()),
        ("private_buyer", private_buyer()),
    ]
}

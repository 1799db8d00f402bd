//! Trading environments: type spaces, priors and additively separable valuations.
//!
//! Types are numbered `1..=x_size` for the seller and `1..=y_size` for the
//! buyer in every public signature. Vectors are stored 0-based.

mod alloc;
mod payoff;

pub use alloc::{Allocation, AllocationError, Belief, BeliefError, Matrix};
pub use payoff::{
    buyer_expost_matrix, buyer_expost_payoff, buyer_interim_payoff, buyer_interim_vector,
    check_constraints, dominance, efficient_rule, interim_rules, seller_interim_payoff,
    seller_payoff_vector, ConstraintFlags, ConstraintReport, Dominance, InterimRules,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("type space `{0}` must contain at least one type")]
    EmptyTypeSpace(&'static str),
    #[error("`{field}` has {found} entries, expected {expected}")]
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("prior `{field}` lacks full support: entry {index} is {value}")]
    NoFullSupport {
        field: &'static str,
        index: usize,
        value: Rational,
    },
    #[error("prior `{field}` sums to {sum}, not 1")]
    PriorSum { field: &'static str, sum: Rational },
    #[error("`{field}` must be strictly increasing, but entry {index} is {current} after {previous}")]
    NotStrictlyIncreasing {
        field: &'static str,
        index: usize,
        previous: Rational,
        current: Rational,
    },
    #[error("`{field}` must be increasing, but entry {index} is {current} after {previous}")]
    NotIncreasing {
        field: &'static str,
        index: usize,
        previous: Rational,
        current: Rational,
    },
    #[error("valuation `{field}` is negative at entry {index}: {value}")]
    NegativeValuation {
        field: &'static str,
        index: usize,
        value: Rational,
    },
    #[error("malformed JSON: {0}")]
    Json(String),
}

/// Raw environment description as read from a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub x_size: usize,
    pub y_size: usize,
    pub p1: Vec<Rational>,
    pub p2: Vec<Rational>,
    pub v11: Vec<Rational>,
    pub v12: Vec<Rational>,
    pub v21: Vec<Rational>,
    pub v22: Vec<Rational>,
}

/// A validated environment. Construct with [`build_environment`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    x_size: usize,
    y_size: usize,
    p1: Vec<Rational>,
    p2: Vec<Rational>,
    v11: Vec<Rational>,
    v12: Vec<Rational>,
    v21: Vec<Rational>,
    v22: Vec<Rational>,
}

impl<'de> Deserialize<'de> for Environment {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let spec = EnvironmentSpec::deserialize(deserializer)?;
        build_environment(spec).map_err(serde::de::Error::custom)
    }
}

fn check_len(field: &'static str, v: &[Rational], expected: usize) -> Result<(), EnvError> {
    if v.len() != expected {
        return Err(EnvError::DimensionMismatch {
            field,
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

fn check_prior(field: &'static str, p: &[Rational]) -> Result<(), EnvError> {
    for (i, v) in p.iter().enumerate() {
        if !v.is_positive() {
            return Err(EnvError::NoFullSupport {
                field,
                index: i + 1,
                value: v.clone(),
            });
        }
    }
    let sum: Rational = p.iter().sum();
    if sum != Rational::one() {
        return Err(EnvError::PriorSum { field, sum });
    }
    Ok(())
}

fn check_monotone(field: &'static str, v: &[Rational], strict: bool) -> Result<(), EnvError> {
    for (i, value) in v.iter().enumerate() {
        if value.is_negative() {
            return Err(EnvError::NegativeValuation {
                field,
                index: i + 1,
                value: value.clone(),
            });
        }
    }
    for i in 1..v.len() {
        let (prev, cur) = (&v[i - 1], &v[i]);
        if strict && cur <= prev {
            return Err(EnvError::NotStrictlyIncreasing {
                field,
                index: i + 1,
                previous: prev.clone(),
                current: cur.clone(),
            });
        }
        if !strict && cur < prev {
            return Err(EnvError::NotIncreasing {
                field,
                index: i + 1,
                previous: prev.clone(),
                current: cur.clone(),
            });
        }
    }
    Ok(())
}

/// Validates a raw description, reporting the first violated invariant.
pub fn build_environment(spec: EnvironmentSpec) -> Result<Environment, EnvError> {
    if spec.x_size == 0 {
        return Err(EnvError::EmptyTypeSpace("x_size"));
    }
    if spec.y_size == 0 {
        return Err(EnvError::EmptyTypeSpace("y_size"));
    }
    check_len("p1", &spec.p1, spec.x_size)?;
    check_len("p2", &spec.p2, spec.y_size)?;
    check_len("v11", &spec.v11, spec.x_size)?;
    check_len("v12", &spec.v12, spec.y_size)?;
    check_len("v21", &spec.v21, spec.x_size)?;
    check_len("v22", &spec.v22, spec.y_size)?;
    check_prior("p1", &spec.p1)?;
    check_prior("p2", &spec.p2)?;
    check_monotone("v11", &spec.v11, true)?;
    check_monotone("v22", &spec.v22, true)?;
    check_monotone("v12", &spec.v12, false)?;
    check_monotone("v21", &spec.v21, false)?;
    Ok(Environment {
        x_size: spec.x_size,
        y_size: spec.y_size,
        p1: spec.p1,
        p2: spec.p2,
        v11: spec.v11,
        v12: spec.v12,
        v21: spec.v21,
        v22: spec.v22,
    })
}

/// Parses and validates an environment JSON document.
pub fn environment_from_json(text: &str) -> Result<Environment, EnvError> {
    let spec: EnvironmentSpec =
        serde_json::from_str(text).map_err(|e| EnvError::Json(e.to_string()))?;
    build_environment(spec)
}

impl Environment {
    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn p1(&self) -> &[Rational] {
        &self.p1
    }

    pub fn p2(&self) -> &[Rational] {
        &self.p2
    }

    pub fn v11(&self) -> &[Rational] {
        &self.v11
    }

    pub fn v12(&self) -> &[Rational] {
        &self.v12
    }

    pub fn v21(&self) -> &[Rational] {
        &self.v21
    }

    pub fn v22(&self) -> &[Rational] {
        &self.v22
    }

    pub fn to_spec(&self) -> EnvironmentSpec {
        EnvironmentSpec {
            x_size: self.x_size,
            y_size: self.y_size,
            p1: self.p1.clone(),
            p2: self.p2.clone(),
            v11: self.v11.clone(),
            v12: self.v12.clone(),
            v21: self.v21.clone(),
            v22: self.v22.clone(),
        }
    }

    /// Canonical JSON text (fixed key order, canonical rationals).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("environment serializes")
    }

    /// The prior `p1` as a buyer belief.
    pub fn prior(&self) -> Belief {
        Belief::new_unchecked(self.p1.clone())
    }

    /// Seller's ex post valuation `v11(x) + v12(y)`, 0-based indices.
    pub(crate) fn seller_value(&self, xi: usize, yi: usize) -> Rational {
        &self.v11[xi] + &self.v12[yi]
    }

    /// Buyer's ex post valuation `v21(x) + v22(y)`, 0-based indices.
    pub(crate) fn buyer_value(&self, xi: usize, yi: usize) -> Rational {
        &self.v21[xi] + &self.v22[yi]
    }

    /// `E_y[v12(y)]`.
    pub(crate) fn mean_v12(&self) -> Rational {
        self.p2.iter().zip(&self.v12).map(|(p, v)| p * v).sum()
    }

    /// No-trade payoff `v11(x) + E_y[v12(y)]`, 0-based.
    pub(crate) fn outside_option(&self, xi: usize) -> Rational {
        &self.v11[xi] + self.mean_v12()
    }
}

/// Quantities derived from the primitives that the solvers share.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedQuantities {
    /// `v21(x) - v11(x)`.
    pub psi: Vec<Rational>,
    /// `v22(y) - v12(y)`.
    pub phi: Vec<Rational>,
    /// `v11(x) - v11(x-1)`, zero at the lowest type.
    pub dv1: Vec<Rational>,
    /// `v22(y+1) - v22(y)`, zero at the highest type.
    pub dv2: Vec<Rational>,
    /// Cumulative distribution of the buyer's type, `cdf2[y-1] = P2(y)`.
    pub cdf2: Vec<Rational>,
    /// Information-rent correction `dv2(y) (1 - P2(y)) / p2(y)`.
    pub rent: Vec<Rational>,
    /// `psi(x) + phi(y) - rent(y)`.
    pub virtual_surplus: Matrix,
}

impl DerivedQuantities {
    /// `P2(y)` for `y` in `0..=y_size`.
    pub fn cdf(&self, y: usize) -> Rational {
        if y == 0 {
            Rational::zero()
        } else {
            self.cdf2[y - 1].clone()
        }
    }

    /// `phi(y) - rent(y)`, the buyer-side part of the virtual surplus (0-based).
    pub fn buyer_virtual(&self, yi: usize) -> Rational {
        &self.phi[yi] - &self.rent[yi]
    }
}

pub fn derived_quantities(env: &Environment) -> DerivedQuantities {
    let (nx, ny) = (env.x_size, env.y_size);
    let psi: Vec<Rational> = (0..nx).map(|i| &env.v21[i] - &env.v11[i]).collect();
    let phi: Vec<Rational> = (0..ny).map(|j| &env.v22[j] - &env.v12[j]).collect();
    let dv1 = (0..nx)
        .map(|i| {
            if i == 0 {
                Rational::zero()
            } else {
                &env.v11[i] - &env.v11[i - 1]
            }
        })
        .collect();
    let dv2: Vec<Rational> = (0..ny)
        .map(|j| {
            if j + 1 == ny {
                Rational::zero()
            } else {
                &env.v22[j + 1] - &env.v22[j]
            }
        })
        .collect();
    let mut cdf2 = Vec::with_capacity(ny);
    let mut acc = Rational::zero();
    for p in &env.p2 {
        acc += p;
        cdf2.push(acc.clone());
    }
    let rent: Vec<Rational> = (0..ny)
        .map(|j| &dv2[j] * (Rational::one() - &cdf2[j]) / &env.p2[j])
        .collect();
    let virtual_surplus = (0..nx)
        .map(|i| (0..ny).map(|j| &psi[i] + &phi[j] - &rent[j]).collect())
        .collect();
    DerivedQuantities {
        psi,
        phi,
        dv1,
        dv2,
        cdf2,
        rent,
        virtual_surplus,
    }
}

#[cfg(test)]
mod tests {
    use crate::catalog::*;
    use super::*;
    use crate::rational::{r, ri};

    #[test]
    fn used_car_is_valid() {
        let env = used_car();
        assert_eq!(env.x_size(), 2);
        assert_eq!(env.v22(), &[ri(100), ri(200)]);
    }

    #[test]
    fn rejects_missing_support() {
        let mut spec = used_car().to_spec();
        spec.p1 = vec![ri(1), ri(0)];
        assert!(matches!(
            build_environment(spec),
            Err(EnvError::NoFullSupport { field: "p1", index: 2, .. })
        ));
    }

    #[test]
    fn rejects_flat_buyer_own_component() {
        let mut spec = used_car().to_spec();
        spec.v22 = vec![ri(5), ri(5)];
        assert!(matches!(
            build_environment(spec),
            Err(EnvError::NotStrictlyIncreasing { field: "v22", .. })
        ));
    }

    #[test]
    fn rejects_prior_not_summing_to_one() {
        let mut spec = used_car().to_spec();
        spec.p2 = vec![r(1, 2), r(1, 3)];
        assert!(matches!(
            build_environment(spec),
            Err(EnvError::PriorSum { field: "p2", .. })
        ));
    }

    #[test]
    fn rejects_decreasing_cross_component() {
        let mut spec = used_car().to_spec();
        spec.v21 = vec![ri(3), ri(1)];
        assert!(matches!(
            build_environment(spec),
            Err(EnvError::NotIncreasing { field: "v21", .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let env = efficient_trade_25();
        let text = env.canonical_json();
        let back = environment_from_json(&text).unwrap();
        assert_eq!(back, env);
        assert_eq!(back.canonical_json(), text);
    }

    #[test]
    fn json_accepts_fraction_strings() {
        let text = r#"{"x_size":2,"y_size":2,"p1":["1/2","1/2"],"p2":["3/4","1/4"],
            "v11":[100,200],"v12":[0,0],"v21":[100,200],"v22":[100,200]}"#;
        let env = environment_from_json(text).unwrap();
        assert_eq!(env.p2()[0], r(3, 4));
    }

    #[test]
    fn efficient_trade_virtual_surplus_closed_form() {
        let env = efficient_trade_25();
        let d = derived_quantities(&env);
        for x in 1..=25i64 {
            for y in 1..=25i64 {
                let vs = &d.virtual_surplus[(x - 1) as usize][(y - 1) as usize];
                assert_eq!(vs, &ri(2 * x + 2 * y - 25), "x={x} y={y}");
            }
        }
        assert!(d.dv1[0].is_zero());
        assert!(d.dv2[24].is_zero());
        assert_eq!(d.cdf2[24], ri(1));
    }

    #[test]
    fn used_car_virtual_surplus() {
        let d = derived_quantities(&used_car());
        assert_eq!(d.psi, vec![ri(0), ri(0)]);
        assert_eq!(d.phi, vec![ri(100), ri(200)]);
        assert_eq!(d.virtual_surplus[0], vec![ri(0), ri(200)]);
        assert_eq!(d.virtual_surplus[1], vec![ri(0), ri(200)]);
    }

    #[test]
    fn last_column_has_no_rent_correction() {
        for env in [used_car(), dominated_rsw(), skewed_used_car(), vanishing_market_25()] {
            let d = derived_quantities(&env);
            let last = env.y_size() - 1;
            for x in 0..env.x_size() {
                assert_eq!(d.virtual_surplus[x][last], &d.psi[x] + &d.phi[last]);
            }
            for w in d.cdf2.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }
}

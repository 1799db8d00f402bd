use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;

/// Row-major matrix indexed `[x-1][y-1]`.
pub type Matrix = Vec<Vec<Rational>>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AllocationError {
    #[error("`{field}` has {found} rows, expected {expected}")]
    RowCount {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("`{field}` row {row} has {found} entries, expected {expected}")]
    RowLength {
        field: &'static str,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("trade probability q({x},{y}) = {value} is outside [0,1]")]
    ProbabilityOutOfRange { x: usize, y: usize, value: Rational },
    #[error("malformed JSON: {0}")]
    Json(String),
}

/// A direct mechanism: trade probabilities `q` and buyer-to-seller payments `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Allocation {
    pub q: Matrix,
    pub t: Matrix,
}

fn check_shape(
    field: &'static str,
    m: &Matrix,
    nx: usize,
    ny: usize,
) -> Result<(), AllocationError> {
    if m.len() != nx {
        return Err(AllocationError::RowCount {
            field,
            expected: nx,
            found: m.len(),
        });
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != ny {
            return Err(AllocationError::RowLength {
                field,
                row: i + 1,
                expected: ny,
                found: row.len(),
            });
        }
    }
    Ok(())
}

impl Allocation {
    /// Builds an allocation after checking shape and `0 <= q <= 1`.
    pub fn new(q: Matrix, t: Matrix, x_size: usize, y_size: usize) -> Result<Self, AllocationError> {
        let a = Allocation { q, t };
        a.validate(x_size, y_size)?;
        Ok(a)
    }

    pub fn validate(&self, x_size: usize, y_size: usize) -> Result<(), AllocationError> {
        check_shape("q", &self.q, x_size, y_size)?;
        check_shape("t", &self.t, x_size, y_size)?;
        for (i, row) in self.q.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if v.is_negative() || *v > 1 {
                    return Err(AllocationError::ProbabilityOutOfRange {
                        x: i + 1,
                        y: j + 1,
                        value: v.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// The mechanism that never trades and never pays.
    pub fn no_trade(x_size: usize, y_size: usize) -> Self {
        let zeros = vec![vec![Rational::zero(); y_size]; x_size];
        Allocation {
            q: zeros.clone(),
            t: zeros,
        }
    }

    /// A constant mechanism `q = q0`, `t = t0` everywhere.
    pub fn constant(x_size: usize, y_size: usize, q0: Rational, t0: Rational) -> Self {
        Allocation {
            q: vec![vec![q0; y_size]; x_size],
            t: vec![vec![t0; y_size]; x_size],
        }
    }

    pub fn x_size(&self) -> usize {
        self.q.len()
    }

    pub fn y_size(&self) -> usize {
        self.q.first().map_or(0, Vec::len)
    }

    /// `q(x,y)` with 1-based types.
    pub fn q_at(&self, x: usize, y: usize) -> &Rational {
        &self.q[x - 1][y - 1]
    }

    /// `t(x,y)` with 1-based types.
    pub fn t_at(&self, x: usize, y: usize) -> &Rational {
        &self.t[x - 1][y - 1]
    }

    pub fn from_json(text: &str, x_size: usize, y_size: usize) -> Result<Self, AllocationError> {
        let a: Allocation =
            serde_json::from_str(text).map_err(|e| AllocationError::Json(e.to_string()))?;
        a.validate(x_size, y_size)?;
        Ok(a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BeliefError {
    #[error("belief entry {index} is negative: {value}")]
    Negative { index: usize, value: Rational },
    #[error("belief sums to {0}, not 1")]
    Sum(Rational),
    #[error("belief is empty")]
    Empty,
}

/// A distribution over seller types. Zero entries are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Belief(Vec<Rational>);

impl Belief {
    pub fn new(pi1: Vec<Rational>) -> Result<Self, BeliefError> {
        if pi1.is_empty() {
            return Err(BeliefError::Empty);
        }
        for (i, v) in pi1.iter().enumerate() {
            if v.is_negative() {
                return Err(BeliefError::Negative {
                    index: i + 1,
                    value: v.clone(),
                });
            }
        }
        let sum: Rational = pi1.iter().sum();
        if sum != 1 {
            return Err(BeliefError::Sum(sum));
        }
        Ok(Belief(pi1))
    }

    pub(crate) fn new_unchecked(pi1: Vec<Rational>) -> Self {
        Belief(pi1)
    }

    /// All mass on seller type `x` (1-based).
    pub fn degenerate(x_size: usize, x: usize) -> Self {
        let mut v = vec![Rational::zero(); x_size];
        v[x - 1] = Rational::one();
        Belief(v)
    }

    /// `prior` conditioned on the set of 1-based types `support`.
    pub fn conditional(prior: &[Rational], support: &[usize]) -> Result<Self, BeliefError> {
        let mass: Rational = support.iter().map(|&x| &prior[x - 1]).sum();
        if !mass.is_positive() {
            return Err(BeliefError::Sum(mass));
        }
        let mut v = vec![Rational::zero(); prior.len()];
        for &x in support {
            v[x - 1] = &prior[x - 1] / &mass;
        }
        Belief::new(v)
    }

    pub fn as_slice(&self) -> &[Rational] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<Rational> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<'de> Deserialize<'de> for Belief {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = Vec::<Rational>::deserialize(deserializer)?;
        Belief::new(v).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{r, ri};

    #[test]
    fn rejects_probability_above_one() {
        let q = vec![vec![ri(1), r(3, 2)]];
        let t = vec![vec![ri(0), ri(0)]];
        assert!(matches!(
            Allocation::new(q, t, 1, 2),
            Err(AllocationError::ProbabilityOutOfRange { x: 1, y: 2, .. })
        ));
    }

    #[test]
    fn rejects_ragged_rows() {
        let q = vec![vec![ri(1), ri(1)], vec![ri(0)]];
        let t = vec![vec![ri(0), ri(0)], vec![ri(0), ri(0)]];
        assert!(matches!(
            Allocation::new(q, t, 2, 2),
            Err(AllocationError::RowLength { field: "q", row: 2, .. })
        ));
    }

    #[test]
    fn allocation_json_round_trip() {
        let text = r#"{"q":[[1,1],[0,"2/3"]],"t":[[200,200],[0,"800/3"]]}"#;
        let a = Allocation::from_json(text, 2, 2).unwrap();
        assert_eq!(a.t_at(2, 2), &r(800, 3));
        assert_eq!(serde_json::to_string(&a).unwrap(), text);
    }

    #[test]
    fn belief_allows_zero_entries() {
        let b = Belief::new(vec![ri(0), ri(1)]).unwrap();
        assert_eq!(b, Belief::degenerate(2, 2));
        assert!(matches!(Belief::new(vec![r(1, 2), r(1, 3)]), Err(BeliefError::Sum(_))));
        assert!(matches!(
            Belief::new(vec![ri(2), ri(-1)]),
            Err(BeliefError::Negative { index: 2, .. })
        ));
    }

    #[test]
    fn conditional_prior() {
        let prior = vec![r(1, 2), r(1, 4), r(1, 4)];
        let b = Belief::conditional(&prior, &[2, 3]).unwrap();
        assert_eq!(b.as_slice(), &[ri(0), r(1, 2), r(1, 2)]);
    }
}

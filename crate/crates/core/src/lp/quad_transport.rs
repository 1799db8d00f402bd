//! Weighted least-squares rule with prescribed interim marginals.
//!
//! Minimizes `sum pi1(x) p2(y) q(x,y)^2` over `q` in `[0,1]^{X x Y}` with
//! `sum_y p2(y) q(x,y) = R(x)` and `sum_x pi1(x) q(x,y) = C(y)`.
//!
//! Free cells of an optimum satisfy `q = alpha(x) + beta(y)`, so each
//! equality-constrained subproblem is a linear system on `alpha, beta`. The
//! working set always leaves the free cells forming a connected spanning
//! graph, which keeps that system nonsingular.

use serde::Serialize;
use thiserror::Error;

use super::simplex::{solve_lp, LpError, LpProblem, LpStatus, RowSense, Sense, VarBounds};
use super::solve_square;
use crate::env::Matrix;
use crate::rational::Rational;

pub const ITERATION_LIMIT: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuadTransportProblem {
    pub pi1: Vec<Rational>,
    pub p2: Vec<Rational>,
    pub row_targets: Vec<Rational>,
    pub col_targets: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuadTransportSolution {
    pub q: Matrix,
    /// Row potentials; zero on rows with zero weight.
    pub alpha: Vec<Rational>,
    /// Column potentials, normalized so the last one is zero.
    pub beta: Vec<Rational>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuadError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("weight `{field}` entry {index} is negative or not a distribution")]
    BadWeights { field: &'static str, index: usize },
    #[error("row targets aggregate to {rows} but column targets to {cols}")]
    InconsistentTotals { rows: Rational, cols: Rational },
    #[error("no rule in [0,1] meets the marginal targets")]
    Infeasible,
    #[error("starting rule does not meet the targets")]
    BadStart,
    #[error("working set became dependent")]
    Singular,
    #[error("iteration limit reached")]
    IterationLimit,
    #[error("optimality conditions failed: {0}")]
    Kkt(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

impl QuadTransportProblem {
    /// The problem whose targets are the marginals of `q`.
    pub fn from_rule(pi1: &[Rational], p2: &[Rational], q: &Matrix) -> Self {
        let row_targets = q
            .iter()
            .map(|row| row.iter().zip(p2).map(|(v, p)| v * p).sum())
            .collect();
        let col_targets = (0..p2.len())
            .map(|j| q.iter().zip(pi1).map(|(row, w)| w * &row[j]).sum())
            .collect();
        QuadTransportProblem {
            pi1: pi1.to_vec(),
            p2: p2.to_vec(),
            row_targets,
            col_targets,
        }
    }

    /// Cell weights `pi1(x) p2(y)`.
    pub fn weights(&self) -> Matrix {
        self.pi1
            .iter()
            .map(|a| self.p2.iter().map(|b| a * b).collect())
            .collect()
    }

    pub fn objective(&self, q: &Matrix) -> Rational {
        let mut total = Rational::zero();
        for (a, row) in self.pi1.iter().zip(q) {
            for (b, v) in self.p2.iter().zip(row) {
                total += a * b * v * v;
            }
        }
        total
    }

    fn check(&self) -> Result<(), QuadError> {
        if self.row_targets.len() != self.pi1.len() || self.col_targets.len() != self.p2.len() {
            return Err(QuadError::Dimension(format!(
                "{}x{} weights with {} row and {} column targets",
                self.pi1.len(),
                self.p2.len(),
                self.row_targets.len(),
                self.col_targets.len()
            )));
        }
        for (field, w, strict) in [("pi1", &self.pi1, false), ("p2", &self.p2, true)] {
            for (index, v) in w.iter().enumerate() {
                if v.is_negative() || (strict && v.is_zero()) {
                    return Err(QuadError::BadWeights { field, index: index + 1 });
                }
            }
            if w.iter().sum::<Rational>() != 1 {
                return Err(QuadError::BadWeights { field, index: 0 });
            }
        }
        let rows: Rational = self
            .pi1
            .iter()
            .zip(&self.row_targets)
            .map(|(w, r)| w * r)
            .sum();
        let cols: Rational = self
            .p2
            .iter()
            .zip(&self.col_targets)
            .map(|(w, c)| w * c)
            .sum();
        if rows != cols {
            return Err(QuadError::InconsistentTotals { rows, cols });
        }
        Ok(())
    }

    fn meets_targets(&self, q: &Matrix) -> bool {
        let here = QuadTransportProblem::from_rule(&self.pi1, &self.p2, q);
        let rows_ok = self
            .pi1
            .iter()
            .zip(here.row_targets.iter().zip(&self.row_targets))
            .all(|(w, (a, b))| w.is_zero() || a == b);
        rows_ok && here.col_targets == self.col_targets
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Cell {
    Free,
    AtZero,
    AtOne,
}

/// Finds a feasible rule by linear programming, then runs the active-set method.
pub fn solve_quad_transport(
    problem: &QuadTransportProblem,
) -> Result<QuadTransportSolution, QuadError> {
    problem.check()?;
    let (nx, ny) = (problem.pi1.len(), problem.p2.len());
    let mut lp = LpProblem::new(Sense::Max);
    let vars: Vec<Vec<usize>> = (0..nx)
        .map(|_| lp.add_vars(ny, VarBounds::unit()))
        .collect();
    for x in 0..nx {
        lp.add_constraint(
            (0..ny).map(|y| (vars[x][y], problem.p2[y].clone())),
            RowSense::Eq,
            problem.row_targets[x].clone(),
        );
    }
    for y in 0..ny {
        lp.add_constraint(
            (0..nx).map(|x| (vars[x][y], problem.pi1[x].clone())),
            RowSense::Eq,
            problem.col_targets[y].clone(),
        );
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(QuadError::Infeasible);
    }
    let start: Matrix = vars
        .iter()
        .map(|row| row.iter().map(|&v| sol.x[v].clone()).collect())
        .collect();
    solve_quad_transport_from(problem, &start)
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

/// Runs the active-set method from a rule that already meets the targets.
pub fn solve_quad_transport_from(
    problem: &QuadTransportProblem,
    start: &Matrix,
) -> Result<QuadTransportSolution, QuadError> {
    problem.check()?;
    let (nx, ny) = (problem.pi1.len(), problem.p2.len());
    if start.len() != nx || start.iter().any(|row| row.len() != ny) {
        return Err(QuadError::Dimension("starting rule has the wrong shape".into()));
    }
    if start.iter().flatten().any(|v| v.is_negative() || *v > 1) || !problem.meets_targets(start)
    {
        return Err(QuadError::BadStart);
    }
    let mut q = start.clone();
    for x in 0..nx {
        if problem.pi1[x].is_zero() {
            let r = &problem.row_targets[x];
            if r.is_negative() || *r > 1 {
                return Err(QuadError::Infeasible);
            }
            q[x] = vec![r.clone(); ny];
        }
    }
    let rows: Vec<usize> = (0..nx).filter(|&x| problem.pi1[x].is_positive()).collect();
    if rows.is_empty() {
        return Ok(QuadTransportSolution {
            q,
            alpha: vec![Rational::zero(); nx],
            beta: vec![Rational::zero(); ny],
            iterations: 0,
        });
    }

    // Initial working set: bound cells, except those needed to connect the
    // free-cell graph on rows and columns.
    let nodes = rows.len() + ny;
    let mut parent: Vec<usize> = (0..nodes).collect();
    let mut status = vec![vec![Cell::Free; ny]; nx];
    let mut bound_cells = Vec::new();
    for (ri, &x) in rows.iter().enumerate() {
        for y in 0..ny {
            let v = &q[x][y];
            if v.is_zero() || *v == 1 {
                bound_cells.push((ri, x, y));
            } else {
                let (a, b) = (find(&mut parent, ri), find(&mut parent, rows.len() + y));
                parent[a] = b;
            }
        }
    }
    for (ri, x, y) in bound_cells {
        let (a, b) = (find(&mut parent, ri), find(&mut parent, rows.len() + y));
        if a == b {
            status[x][y] = if q[x][y].is_zero() {
                Cell::AtZero
            } else {
                Cell::AtOne
            };
        } else {
            parent[a] = b;
        }
    }

    let mut iterations = 0;
    loop {
        if iterations >= ITERATION_LIMIT {
            return Err(QuadError::IterationLimit);
        }
        iterations += 1;
        let (alpha, beta) = equality_step(problem, &rows, &q, &status)?;
        let mut moved = false;
        let mut step = Rational::one();
        let mut blocking: Option<(usize, usize, Cell)> = None;
        let mut direction = vec![vec![Rational::zero(); ny]; nx];
        for &x in &rows {
            for y in 0..ny {
                if status[x][y] != Cell::Free {
                    continue;
                }
                let target = &alpha[x] + &beta[y];
                let p = &target - &q[x][y];
                if p.is_zero() {
                    continue;
                }
                moved = true;
                let (ratio, cell) = if p.is_negative() {
                    (&q[x][y] / &(-&p), Cell::AtZero)
                } else {
                    ((Rational::one() - &q[x][y]) / &p, Cell::AtOne)
                };
                if ratio < step {
                    step = ratio;
                    blocking = Some((x, y, cell));
                }
                direction[x][y] = p;
            }
        }
        if moved {
            for &x in &rows {
                for y in 0..ny {
                    if !direction[x][y].is_zero() {
                        let delta = &direction[x][y] * &step;
                        q[x][y] += delta;
                    }
                }
            }
            if let Some((x, y, cell)) = blocking {
                status[x][y] = cell;
                q[x][y] = if cell == Cell::AtZero {
                    Rational::zero()
                } else {
                    Rational::one()
                };
            }
            continue;
        }
        let mut worst: Option<(Rational, usize, usize)> = None;
        for &x in &rows {
            for y in 0..ny {
                let s = &alpha[x] + &beta[y];
                let multiplier = match status[x][y] {
                    Cell::Free => continue,
                    Cell::AtZero => -s,
                    Cell::AtOne => s - Rational::one(),
                };
                if multiplier.is_negative()
                    && worst.as_ref().is_none_or(|(m, _, _)| multiplier < *m)
                {
                    worst = Some((multiplier, x, y));
                }
            }
        }
        match worst {
            Some((_, x, y)) => status[x][y] = Cell::Free,
            None => {
                let solution = QuadTransportSolution {
                    q,
                    alpha,
                    beta,
                    iterations,
                };
                verify_quad_kkt(problem, &solution).map_err(QuadError::Kkt)?;
                return Ok(solution);
            }
        }
    }
}

/// Solves for the potentials of the equality-constrained subproblem in which
/// bound cells stay fixed and free cells equal `alpha(x) + beta(y)`.
fn equality_step(
    problem: &QuadTransportProblem,
    rows: &[usize],
    q: &Matrix,
    status: &[Vec<Cell>],
) -> Result<(Vec<Rational>, Vec<Rational>), QuadError> {
    let ny = problem.p2.len();
    let nr = rows.len();
    // Unknowns: alpha for each positive row, beta for columns 0..ny-1.
    let size = nr + ny - 1;
    let mut a = vec![vec![Rational::zero(); size]; size];
    let mut b = vec![Rational::zero(); size];
    for (ri, &x) in rows.iter().enumerate() {
        b[ri] = problem.row_targets[x].clone();
        for y in 0..ny {
            let p = &problem.p2[y];
            if status[x][y] == Cell::Free {
                a[ri][ri] += p;
                if y + 1 < ny {
                    a[ri][nr + y] += p;
                }
            } else {
                b[ri] -= p * &q[x][y];
            }
        }
    }
    for y in 0..ny.saturating_sub(1) {
        let eq = nr + y;
        b[eq] = problem.col_targets[y].clone();
        for (ri, &x) in rows.iter().enumerate() {
            let w = &problem.pi1[x];
            if status[x][y] == Cell::Free {
                a[eq][ri] += w;
                a[eq][nr + y] += w;
            } else {
                b[eq] -= w * &q[x][y];
            }
        }
    }
    let z = solve_square(a, b).ok_or(QuadError::Singular)?;
    let mut alpha = vec![Rational::zero(); problem.pi1.len()];
    for (ri, &x) in rows.iter().enumerate() {
        alpha[x] = z[ri].clone();
    }
    let mut beta = vec![Rational::zero(); ny];
    let free = ny.saturating_sub(1);
    beta[..free].clone_from_slice(&z[nr..nr + free]);
    Ok((alpha, beta))
}

/// Checks the optimality certificate exactly: marginals, box, constant rows of
/// zero weight, and `q = alpha + beta` on interior cells with the correct
/// sign of `alpha + beta` on bound cells.
pub fn verify_quad_kkt(
    problem: &QuadTransportProblem,
    sol: &QuadTransportSolution,
) -> Result<(), String> {
    let (nx, ny) = (problem.pi1.len(), problem.p2.len());
    let q = &sol.q;
    if q.len() != nx || q.iter().any(|row| row.len() != ny) {
        return Err("rule has the wrong shape".into());
    }
    if q.iter().flatten().any(|v| v.is_negative() || *v > 1) {
        return Err("rule leaves [0,1]".into());
    }
    if !problem.meets_targets(q) {
        return Err("marginals differ from the targets".into());
    }
    for x in 0..nx {
        if problem.pi1[x].is_zero() {
            if q[x].iter().any(|v| *v != problem.row_targets[x]) {
                return Err(format!("zero-weight row {} is not constant", x + 1));
            }
            continue;
        }
        for y in 0..ny {
            let s = &sol.alpha[x] + &sol.beta[y];
            let v = &q[x][y];
            let ok = if v.is_zero() {
                !s.is_positive()
            } else if *v == 1 {
                s >= 1
            } else {
                &s == v
            };
            if !ok {
                return Err(format!(
                    "cell ({},{}) = {v} with potential {s}",
                    x + 1,
                    y + 1
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{r, ri};

    #[test]
    fn constant_marginals_give_constant_rule() {
        let p = QuadTransportProblem {
            pi1: vec![r(1, 3); 3],
            p2: vec![r(1, 2); 2],
            row_targets: vec![r(2, 5); 3],
            col_targets: vec![r(2, 5); 2],
        };
        let sol = solve_quad_transport(&p).unwrap();
        assert!(sol.q.iter().flatten().all(|v| *v == r(2, 5)));
    }

    #[test]
    fn used_car_rsw_marginals() {
        let q = vec![vec![ri(1), ri(1)], vec![ri(0), r(2, 3)]];
        let half = vec![r(1, 2); 2];
        let p = QuadTransportProblem::from_rule(&half, &half, &q);
        assert_eq!(p.row_targets, vec![ri(1), r(1, 3)]);
        assert_eq!(p.col_targets, vec![r(1, 2), r(5, 6)]);
        let sol = solve_quad_transport(&p).unwrap();
        assert_eq!(sol.q, q);
    }

    #[test]
    fn spreads_mass_evenly_when_possible() {
        // A checkerboard rule has a flat minimizer with the same marginals.
        let q = vec![vec![ri(1), ri(0)], vec![ri(0), ri(1)]];
        let half = vec![r(1, 2); 2];
        let p = QuadTransportProblem::from_rule(&half, &half, &q);
        let sol = solve_quad_transport_from(&p, &q).unwrap();
        assert!(sol.q.iter().flatten().all(|v| *v == r(1, 2)));
        assert!(p.objective(&sol.q) < p.objective(&q));
    }

    #[test]
    fn zero_weight_row_is_flat() {
        let q = vec![vec![ri(0), ri(1)], vec![ri(1), ri(1)]];
        let p = QuadTransportProblem::from_rule(&[ri(0), ri(1)], &vec![r(1, 2); 2], &q);
        let sol = solve_quad_transport(&p).unwrap();
        assert_eq!(sol.q[0], vec![r(1, 2), r(1, 2)]);
        assert_eq!(sol.q[1], vec![ri(1), ri(1)]);
    }

    #[test]
    fn rejects_inconsistent_totals() {
        let p = QuadTransportProblem {
            pi1: vec![ri(1)],
            p2: vec![ri(1)],
            row_targets: vec![r(1, 2)],
            col_targets: vec![r(1, 3)],
        };
        assert!(matches!(
            solve_quad_transport(&p),
            Err(QuadError::InconsistentTotals { .. })
        ));
    }

    #[test]
    fn tampered_certificate_is_rejected() {
        let q = vec![vec![r(1, 2), r(1, 2)]];
        let p = QuadTransportProblem::from_rule(&[ri(1)], &vec![r(1, 2); 2], &q);
        let mut sol = solve_quad_transport(&p).unwrap();
        assert!(verify_quad_kkt(&p, &sol).is_ok());
        sol.beta[0] = ri(1);
        assert!(verify_quad_kkt(&p, &sol).is_err());
    }
}

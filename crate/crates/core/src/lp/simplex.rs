//! Exact primal simplex with bounded variables.
//!
//! Pricing takes the largest reduced cost and switches to Bland's rule during
//! runs of degenerate pivots, which rules out cycling. Rows whose slack can
//! start basic do so; every row still carries an artificial column, so the
//! final tableau holds `B^-1` in the artificial block and the duals are read
//! off directly.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::rational::Rational;

/// Default ceiling on pivots is `PIVOT_FACTOR * (rows + columns)^2` of the
/// internal tableau. `TOOLKIT_PIVOT_LIMIT` replaces it with an absolute count.
pub const PIVOT_FACTOR: usize = 1;

pub const PIVOT_LIMIT_VAR: &str = "TOOLKIT_PIVOT_LIMIT";

/// Consecutive degenerate pivots after which pricing falls back to Bland's
/// rule until the objective moves again.
const DEGENERATE_RUN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VarBounds {
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

impl VarBounds {
    pub fn nonneg() -> Self {
        VarBounds {
            lower: Some(Rational::zero()),
            upper: None,
        }
    }

    pub fn free() -> Self {
        VarBounds {
            lower: None,
            upper: None,
        }
    }

    pub fn range(lower: Rational, upper: Rational) -> Self {
        VarBounds {
            lower: Some(lower),
            upper: Some(upper),
        }
    }

    pub fn unit() -> Self {
        Self::range(Rational::zero(), Rational::one())
    }

    pub fn at_most(upper: Rational) -> Self {
        VarBounds {
            lower: None,
            upper: Some(upper),
        }
    }
}

/// One linear constraint `sum coeffs (sense) rhs`, stored sparsely.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Constraint {
    pub coeffs: Vec<(usize, Rational)>,
    pub sense: RowSense,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<Rational>,
    pub objective_constant: Rational,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<VarBounds>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`solve_lp`]. Primal and dual values are meaningful only when
/// the status is `Optimal`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<Rational>,
    pub value: Rational,
    /// `duals[i]` is the derivative of the optimal value with respect to `rhs[i]`.
    pub duals: Vec<Rational>,
    /// Internal column indices of the final basis, in row order.
    pub basis: Vec<usize>,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("objective has {found} coefficients for {expected} variables")]
    ObjectiveLength { expected: usize, found: usize },
    #[error("constraint {row} references variable {var}, but there are only {n} variables")]
    VariableOutOfRange { row: usize, var: usize, n: usize },
    #[error("variable {var} has lower bound {lower} above upper bound {upper}")]
    InvalidBounds {
        var: usize,
        lower: Rational,
        upper: Rational,
    },
    #[error("pivot limit of {0} reached")]
    PivotLimit(usize),
    #[error("optimality certificate failed: {0}")]
    Verification(String),
}

impl LpProblem {
    pub fn new(sense: Sense) -> Self {
        LpProblem {
            sense,
            objective: Vec::new(),
            objective_constant: Rational::zero(),
            constraints: Vec::new(),
            bounds: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.bounds.len()
    }

    /// Adds a variable with objective coefficient zero and returns its index.
    pub fn add_var(&mut self, bounds: VarBounds) -> usize {
        self.bounds.push(bounds);
        self.objective.push(Rational::zero());
        self.bounds.len() - 1
    }

    pub fn add_vars(&mut self, count: usize, bounds: VarBounds) -> Vec<usize> {
        (0..count).map(|_| self.add_var(bounds.clone())).collect()
    }

    pub fn set_objective(&mut self, var: usize, coeff: Rational) {
        self.objective[var] = coeff;
    }

    pub fn add_objective(&mut self, var: usize, coeff: &Rational) {
        self.objective[var] += coeff;
    }

    /// Adds a constraint, merging repeated variable indices and dropping zeros.
    pub fn add_constraint(
        &mut self,
        coeffs: impl IntoIterator<Item = (usize, Rational)>,
        sense: RowSense,
        rhs: Rational,
    ) -> usize {
        let mut merged: Vec<(usize, Rational)> = Vec::new();
        let mut sorted: Vec<(usize, Rational)> = coeffs.into_iter().collect();
        sorted.sort_by_key(|(j, _)| *j);
        for (j, c) in sorted {
            match merged.last_mut() {
                Some((k, acc)) if *k == j => *acc += c,
                _ => merged.push((j, c)),
            }
        }
        merged.retain(|(_, c)| !c.is_zero());
        self.constraints.push(Constraint {
            coeffs: merged,
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.bounds.len();
        if self.objective.len() != n {
            return Err(LpError::ObjectiveLength {
                expected: n,
                found: self.objective.len(),
            });
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if let Some((var, _)) = c.coeffs.iter().find(|(j, _)| *j >= n) {
                return Err(LpError::VariableOutOfRange { row, var: *var, n });
            }
        }
        for (var, b) in self.bounds.iter().enumerate() {
            if let (Some(l), Some(u)) = (&b.lower, &b.upper) {
                if l > u {
                    return Err(LpError::InvalidBounds {
                        var,
                        lower: l.clone(),
                        upper: u.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Evaluates the left-hand side of constraint `row` at `x`.
    pub fn row_activity(&self, row: usize, x: &[Rational]) -> Rational {
        self.constraints[row]
            .coeffs
            .iter()
            .map(|(j, c)| c * &x[*j])
            .sum()
    }

    pub fn objective_at(&self, x: &[Rational]) -> Rational {
        let linear: Rational = self
            .objective
            .iter()
            .zip(x)
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, v)| c * v)
            .sum();
        linear + &self.objective_constant
    }
}

/// How an internal nonnegative column maps back to an original variable.
#[derive(Debug, Clone)]
enum ColKind {
    /// `x = lower + col`.
    Shifted(usize, Rational),
    /// `x = upper - col`.
    Mirrored(usize, Rational),
    /// Positive part of a free variable.
    Plus(usize),
    /// Negative part of a free variable.
    Minus(usize),
    Slack,
    Artificial,
}

struct Tableau {
    a: Vec<Vec<Rational>>,
    beta: Vec<Rational>,
    basis: Vec<usize>,
    basic_row: Vec<Option<usize>>,
    upper: Vec<Option<Rational>>,
    at_upper: Vec<bool>,
    barred: Vec<bool>,
    cost: Vec<Rational>,
    d: Vec<Rational>,
    pivots: usize,
    limit: usize,
    degenerate_run: usize,
    trace: Option<String>,
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

impl Tableau {
    fn recompute_reduced_costs(&mut self) {
        let n = self.cost.len();
        let mut d = self.cost.clone();
        for (i, row) in self.a.iter().enumerate() {
            let cb = &self.cost[self.basis[i]];
            if cb.is_zero() {
                continue;
            }
            for j in 0..n {
                if !row[j].is_zero() {
                    d[j] -= cb * &row[j];
                }
            }
        }
        self.d = d;
    }

    fn value_of_nonbasic(&self, j: usize) -> Rational {
        if self.at_upper[j] {
            self.upper[j].clone().expect("column at upper bound has one")
        } else {
            Rational::zero()
        }
    }

    fn column_value(&self, j: usize) -> Rational {
        match self.basic_row[j] {
            Some(i) => self.beta[i].clone(),
            None => self.value_of_nonbasic(j),
        }
    }

    fn step(&mut self) -> Result<Step, LpError> {
        let n = self.cost.len();
        let eligible = |j: usize| {
            if self.basic_row[j].is_some() || self.barred[j] {
                return false;
            }
            if matches!(&self.upper[j], Some(u) if u.is_zero()) {
                return false;
            }
            if self.at_upper[j] {
                self.d[j].is_negative()
            } else {
                self.d[j].is_positive()
            }
        };
        // Largest reduced cost, or Bland's rule inside a degenerate run.
        let enter = if self.degenerate_run >= DEGENERATE_RUN {
            (0..n).find(|&j| eligible(j))
        } else {
            let mut best: Option<(usize, Rational)> = None;
            for j in (0..n).filter(|&j| eligible(j)) {
                let size = self.d[j].abs();
                if best.as_ref().is_none_or(|(_, b)| size > *b) {
                    best = Some((j, size));
                }
            }
            best.map(|(j, _)| j)
        };
        let Some(j) = enter else {
            return Ok(Step::Optimal);
        };
        if self.pivots >= self.limit {
            return Err(LpError::PivotLimit(self.limit));
        }
        self.pivots += 1;
        let increasing = !self.at_upper[j];

        // `None` leaving row means the entering column flips to its other bound.
        let mut best: Option<(Rational, Option<(usize, bool)>)> =
            self.upper[j].clone().map(|u| (u, None));
        for i in 0..self.a.len() {
            let alpha = &self.a[i][j];
            if alpha.is_zero() {
                continue;
            }
            // Basic variable i moves by `rate` per unit step of the entering column.
            let rate = if increasing { -alpha } else { alpha.clone() };
            let col = self.basis[i];
            let (limit, to_upper) = if rate.is_negative() {
                (&self.beta[i] / &(-&rate), false)
            } else {
                match &self.upper[col] {
                    Some(u) => ((u - &self.beta[i]) / &rate, true),
                    None => continue,
                }
            };
            let better = match &best {
                None => true,
                Some((theta, leave)) => {
                    limit < *theta
                        || (limit == *theta
                            && matches!(leave, Some((r, _)) if col < self.basis[*r]))
                }
            };
            if better {
                best = Some((limit, Some((i, to_upper))));
            }
        }
        let Some((theta, leave)) = best else {
            return Ok(Step::Unbounded);
        };
        if theta.is_zero() {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }
        let delta = if increasing { theta } else { -theta };
        if !delta.is_zero() {
            for i in 0..self.a.len() {
                if !self.a[i][j].is_zero() {
                    let change = &self.a[i][j] * &delta;
                    self.beta[i] -= change;
                }
            }
        }
        match leave {
            None => {
                self.at_upper[j] = !self.at_upper[j];
            }
            Some((r, to_upper)) => {
                let entering_value = self.value_of_nonbasic(j) + &delta;
                let leaving = self.basis[r];
                self.at_upper[leaving] = to_upper;
                self.basic_row[leaving] = None;
                self.at_upper[j] = false;
                self.pivot(r, j);
                self.basis[r] = j;
                self.basic_row[j] = Some(r);
                self.beta[r] = entering_value;
            }
        }
        if self.trace.is_some() {
            let dump = self.dump();
            if let Some(trace) = self.trace.as_mut() {
                let _ = writeln!(trace, "pivot {} enter {}", self.pivots, j);
                trace.push_str(&dump);
            }
        }
        Ok(Step::Moved)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.a[r][j].recip();
        for v in self.a[r].iter_mut() {
            if !v.is_zero() {
                *v *= &piv;
            }
        }
        let pivot_row = std::mem::take(&mut self.a[r]);
        let support: Vec<usize> = (0..pivot_row.len())
            .filter(|&k| !pivot_row[k].is_zero())
            .collect();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r || row[j].is_zero() {
                continue;
            }
            let factor = row[j].clone();
            for &k in &support {
                let change = &factor * &pivot_row[k];
                row[k] -= change;
            }
        }
        if !self.d[j].is_zero() {
            let factor = self.d[j].clone();
            for &k in &support {
                let change = &factor * &pivot_row[k];
                self.d[k] -= change;
            }
        }
        self.a[r] = pivot_row;
    }

    fn run(&mut self) -> Result<Step, LpError> {
        loop {
            match self.step()? {
                Step::Moved => continue,
                other => return Ok(other),
            }
        }
    }

    /// Plain-text tableau: one row per line, `basis | value | entries`.
    fn dump(&self) -> String {
        let mut out = String::new();
        for (i, row) in self.a.iter().enumerate() {
            let _ = write!(out, "{} | {} |", self.basis[i], self.beta[i]);
            for v in row {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        let _ = write!(out, "d |");
        for v in &self.d {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
        out
    }
}

fn pivot_limit(rows: usize, cols: usize) -> usize {
    if let Ok(text) = std::env::var(PIVOT_LIMIT_VAR) {
        if let Ok(limit) = text.trim().parse::<usize>() {
            return limit;
        }
    }
    PIVOT_FACTOR * (rows + cols) * (rows + cols)
}

/// Solves the problem exactly and verifies the optimality certificate.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    solve_inner(problem, false).map(|(s, _)| s)
}

/// Like [`solve_lp`], also returning a plain-text dump of every tableau.
pub fn solve_lp_traced(problem: &LpProblem) -> Result<(LpSolution, String), LpError> {
    solve_inner(problem, true).map(|(s, t)| (s, t.unwrap_or_default()))
}

fn solve_inner(problem: &LpProblem, traced: bool) -> Result<(LpSolution, Option<String>), LpError> {
    problem.validate()?;
    let n = problem.num_vars();
    let m = problem.constraints.len();

    // Internal columns: structural parts, then slacks, then artificials.
    let mut kinds: Vec<ColKind> = Vec::new();
    let mut upper: Vec<Option<Rational>> = Vec::new();
    let mut var_cols: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); n];
    let mut shift = vec![Rational::zero(); n];
    for (v, b) in problem.bounds.iter().enumerate() {
        match (&b.lower, &b.upper) {
            (Some(l), u) => {
                var_cols[v].push((kinds.len(), Rational::one()));
                kinds.push(ColKind::Shifted(v, l.clone()));
                upper.push(u.as_ref().map(|u| u - l));
                shift[v] = l.clone();
            }
            (None, Some(u)) => {
                var_cols[v].push((kinds.len(), -Rational::one()));
                kinds.push(ColKind::Mirrored(v, u.clone()));
                upper.push(None);
                shift[v] = u.clone();
            }
            (None, None) => {
                var_cols[v].push((kinds.len(), Rational::one()));
                kinds.push(ColKind::Plus(v));
                upper.push(None);
                var_cols[v].push((kinds.len(), -Rational::one()));
                kinds.push(ColKind::Minus(v));
                upper.push(None);
            }
        }
    }
    let structural = kinds.len();
    let mut slack_of_row = vec![None; m];
    for (i, c) in problem.constraints.iter().enumerate() {
        if c.sense != RowSense::Eq {
            slack_of_row[i] = Some(kinds.len());
            kinds.push(ColKind::Slack);
            upper.push(None);
        }
    }
    let first_artificial = kinds.len();
    for _ in 0..m {
        kinds.push(ColKind::Artificial);
        upper.push(None);
    }
    let ncols = kinds.len();

    let mut a = vec![vec![Rational::zero(); ncols]; m];
    let mut beta = Vec::with_capacity(m);
    let mut row_sign = Vec::with_capacity(m);
    let mut start = Vec::with_capacity(m);
    for (i, c) in problem.constraints.iter().enumerate() {
        let mut rhs = c.rhs.clone();
        for (v, coef) in &c.coeffs {
            rhs -= coef * &shift[*v];
            for (col, s) in &var_cols[*v] {
                a[i][*col] = coef * s;
            }
        }
        if let Some(s) = slack_of_row[i] {
            a[i][s] = if c.sense == RowSense::Le {
                Rational::one()
            } else {
                -Rational::one()
            };
        }
        let slack_sign = slack_of_row[i].map(|_| c.sense == RowSense::Le);
        let flip = rhs.is_negative() || (rhs.is_zero() && slack_sign == Some(false));
        if flip {
            for v in a[i].iter_mut() {
                if !v.is_zero() {
                    *v = -&*v;
                }
            }
            rhs = -rhs;
        }
        a[i][first_artificial + i] = Rational::one();
        row_sign.push(if flip { -1 } else { 1 });
        beta.push(rhs);
        // A slack with coefficient +1 starts basic; the row needs no artificial.
        start.push(match slack_of_row[i] {
            Some(s) if a[i][s].is_positive() => s,
            _ => first_artificial + i,
        });
    }

    let mut phase1_cost = vec![Rational::zero(); ncols];
    for c in phase1_cost.iter_mut().skip(first_artificial) {
        *c = -Rational::one();
    }
    let sign = match problem.sense {
        Sense::Max => Rational::one(),
        Sense::Min => -Rational::one(),
    };
    let mut cost = vec![Rational::zero(); ncols];
    for (v, cols) in var_cols.iter().enumerate() {
        for (col, s) in cols {
            cost[*col] = &problem.objective[v] * s * &sign;
        }
    }

    let mut basic_row = vec![None; ncols];
    let mut barred = vec![false; ncols];
    for (i, &col) in start.iter().enumerate() {
        basic_row[col] = Some(i);
        if col != first_artificial + i {
            barred[first_artificial + i] = true;
            upper[first_artificial + i] = Some(Rational::zero());
        }
    }
    let mut t = Tableau {
        a,
        beta,
        basis: start,
        basic_row,
        upper,
        at_upper: vec![false; ncols],
        barred,
        cost: phase1_cost,
        d: Vec::new(),
        pivots: 0,
        limit: pivot_limit(m, ncols),
        degenerate_run: 0,
        trace: traced.then(String::new),
    };
    t.recompute_reduced_costs();
    if let Some(trace) = t.trace.as_mut() {
        trace.push_str("phase 1\n");
    }
    if let Some(trace) = t.trace.clone() {
        t.trace = Some(trace + &t.dump());
    }
    t.run()?;
    let infeasibility: Rational = (first_artificial..ncols).map(|j| t.column_value(j)).sum();
    if infeasibility.is_positive() {
        return Ok((
            LpSolution {
                status: LpStatus::Infeasible,
                x: vec![Rational::zero(); n],
                value: Rational::zero(),
                duals: vec![Rational::zero(); m],
                basis: t.basis.clone(),
                pivots: t.pivots,
            },
            t.trace,
        ));
    }
    for j in first_artificial..ncols {
        t.upper[j] = Some(Rational::zero());
        t.barred[j] = true;
    }
    t.cost = cost;
    t.degenerate_run = 0;
    t.recompute_reduced_costs();
    if let Some(trace) = t.trace.as_mut() {
        trace.push_str("phase 2\n");
    }
    if let Step::Unbounded = t.run()? {
        return Ok((
            LpSolution {
                status: LpStatus::Unbounded,
                x: vec![Rational::zero(); n],
                value: Rational::zero(),
                duals: vec![Rational::zero(); m],
                basis: t.basis.clone(),
                pivots: t.pivots,
            },
            t.trace,
        ));
    }

    let mut x = vec![Rational::zero(); n];
    for (col, kind) in kinds.iter().enumerate().take(structural) {
        let val = t.column_value(col);
        match kind {
            ColKind::Shifted(v, l) => x[*v] = l + &val,
            ColKind::Mirrored(v, u) => x[*v] = u - &val,
            ColKind::Plus(v) => x[*v] += val,
            ColKind::Minus(v) => x[*v] -= val,
            ColKind::Slack | ColKind::Artificial => unreachable!(),
        }
    }
    let mut duals = Vec::with_capacity(m);
    for i in 0..m {
        let col = first_artificial + i;
        let mut y = Rational::zero();
        for (k, row) in t.a.iter().enumerate() {
            let cb = &t.cost[t.basis[k]];
            if !cb.is_zero() && !row[col].is_zero() {
                y += cb * &row[col];
            }
        }
        y = y * row_sign[i] * &sign;
        duals.push(y);
    }
    let value = problem.objective_at(&x);
    let solution = LpSolution {
        status: LpStatus::Optimal,
        x,
        value,
        duals,
        basis: t.basis.clone(),
        pivots: t.pivots,
    };
    verify_optimal(problem, &solution)?;
    Ok((solution, t.trace))
}

/// Checks primal feasibility, dual feasibility, complementary slackness and
/// strong duality of an optimal solution against the original problem.
pub fn verify_optimal(problem: &LpProblem, sol: &LpSolution) -> Result<(), LpError> {
    let fail = |msg: String| Err(LpError::Verification(msg));
    let sign = match problem.sense {
        Sense::Max => Rational::one(),
        Sense::Min => -Rational::one(),
    };
    let x = &sol.x;
    for (v, b) in problem.bounds.iter().enumerate() {
        if matches!(&b.lower, Some(l) if &x[v] < l) || matches!(&b.upper, Some(u) if &x[v] > u) {
            return fail(format!("variable {v} = {} violates its bounds", x[v]));
        }
    }
    let mut reduced: Vec<Rational> = problem.objective.iter().map(|c| c * &sign).collect();
    let mut dual_value = Rational::zero();
    for (i, c) in problem.constraints.iter().enumerate() {
        let lhs = problem.row_activity(i, x);
        let ok = match c.sense {
            RowSense::Le => lhs <= c.rhs,
            RowSense::Ge => lhs >= c.rhs,
            RowSense::Eq => lhs == c.rhs,
        };
        if !ok {
            return fail(format!("constraint {i} violated: {lhs} vs {}", c.rhs));
        }
        let y = &sol.duals[i] * &sign;
        let sign_ok = match c.sense {
            RowSense::Le => !y.is_negative(),
            RowSense::Ge => !y.is_positive(),
            RowSense::Eq => true,
        };
        if !sign_ok {
            return fail(format!("dual {i} = {} has the wrong sign", sol.duals[i]));
        }
        if !y.is_zero() {
            if lhs != c.rhs {
                return fail(format!("dual {i} nonzero on a slack constraint"));
            }
            dual_value += &y * &c.rhs;
            for (j, coef) in &c.coeffs {
                reduced[*j] -= &y * coef;
            }
        }
    }
    for (v, r) in reduced.iter().enumerate() {
        let b = &problem.bounds[v];
        if r.is_positive() && b.upper.as_ref() != Some(&x[v]) {
            return fail(format!("variable {v} could increase (reduced cost {r})"));
        }
        if r.is_negative() && b.lower.as_ref() != Some(&x[v]) {
            return fail(format!("variable {v} could decrease (reduced cost {r})"));
        }
        if !r.is_zero() {
            dual_value += r * &x[v];
        }
    }
    let primal = (problem.objective_at(x) - &problem.objective_constant) * &sign;
    if primal != dual_value {
        return fail(format!("duality gap: primal {primal}, dual {dual_value}"));
    }
    if sol.value != problem.objective_at(x) {
        return fail("reported value differs from the objective at x".to_string());
    }
    Ok(())
}

//! Linear programs over direct mechanisms.
//!
//! Two payment encodings are offered. `Full` keeps one payment per cell and
//! can express constraints under any belief. `Aggregated` keeps only the
//! interim payments `T1(x) = E_y t(x,y)` and `T2(y) = sum_x pi(x) t(x,y)` for a
//! single belief `pi`, tied by `sum_x pi T1 = sum_y p2 T2`; every seller and
//! buyer interim payoff under `pi` is linear in them.
//!
//! Under monotone single crossing (own valuation components strictly
//! increasing) the local incentive constraints imply the global ones, so the
//! `*_local` helpers are exact; witnesses are still checked with the
//! all-pairs evaluator.

use std::ops::{Add, Mul, Sub};

use crate::env::{derived_quantities, Allocation, Environment, Matrix};
use crate::lp::{LpProblem, LpSolution, RowSense, Sense, VarBounds};
use crate::rational::Rational;

/// Affine expression `sum coef * var + constant`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Lin {
    pub terms: Vec<(usize, Rational)>,
    pub constant: Rational,
}

impl Lin {
    pub fn var(v: usize, coef: Rational) -> Lin {
        Lin {
            terms: vec![(v, coef)],
            constant: Rational::zero(),
        }
    }

    pub fn constant(c: Rational) -> Lin {
        Lin {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn push(&mut self, v: usize, coef: Rational) {
        if !coef.is_zero() {
            self.terms.push((v, coef));
        }
    }
}

impl Add for Lin {
    type Output = Lin;
    fn add(mut self, rhs: Lin) -> Lin {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl Sub for Lin {
    type Output = Lin;
    fn sub(self, rhs: Lin) -> Lin {
        self + rhs * &(-Rational::one())
    }
}

impl Mul<&Rational> for Lin {
    type Output = Lin;
    fn mul(mut self, k: &Rational) -> Lin {
        for (_, c) in self.terms.iter_mut() {
            *c *= k;
        }
        self.constant *= k;
        self
    }
}

pub(crate) enum Payments {
    Full(Vec<Vec<usize>>),
    Aggregated {
        t1: Vec<usize>,
        t2: Vec<usize>,
        belief: Vec<Rational>,
    },
}

pub(crate) struct MechanismLp<'a> {
    pub env: &'a Environment,
    pub lp: LpProblem,
    pub q: Vec<Vec<usize>>,
    pub pay: Payments,
}

impl<'a> MechanismLp<'a> {
    fn with_q(env: &'a Environment, sense: Sense) -> (LpProblem, Vec<Vec<usize>>) {
        let mut lp = LpProblem::new(sense);
        let q = (0..env.x_size())
            .map(|_| lp.add_vars(env.y_size(), VarBounds::unit()))
            .collect();
        (lp, q)
    }

    pub fn full(env: &'a Environment, sense: Sense) -> Self {
        let (mut lp, q) = Self::with_q(env, sense);
        let t = (0..env.x_size())
            .map(|_| lp.add_vars(env.y_size(), VarBounds::free()))
            .collect();
        MechanismLp {
            env,
            lp,
            q,
            pay: Payments::Full(t),
        }
    }

    pub fn aggregated(env: &'a Environment, sense: Sense, belief: &[Rational]) -> Self {
        let (mut lp, q) = Self::with_q(env, sense);
        let t1 = lp.add_vars(env.x_size(), VarBounds::free());
        let t2 = lp.add_vars(env.y_size(), VarBounds::free());
        let terms = t1
            .iter()
            .zip(belief)
            .map(|(v, w)| (*v, w.clone()))
            .chain(t2.iter().zip(env.p2()).map(|(v, p)| (*v, -p)));
        lp.add_constraint(terms, RowSense::Eq, Rational::zero());
        MechanismLp {
            env,
            lp,
            q,
            pay: Payments::Aggregated {
                t1,
                t2,
                belief: belief.to_vec(),
            },
        }
    }

    /// `E_y t(x,y)`, 0-based.
    fn seller_revenue(&self, x: usize) -> Lin {
        match &self.pay {
            Payments::Full(t) => {
                let mut e = Lin::default();
                for (j, p) in self.env.p2().iter().enumerate() {
                    e.push(t[x][j], p.clone());
                }
                e
            }
            Payments::Aggregated { t1, .. } => Lin::var(t1[x], Rational::one()),
        }
    }

    /// Seller payoff from reporting `report` at true type `truth`, 0-based.
    pub fn seller_payoff(&self, report: usize, truth: usize) -> Lin {
        let mut e = self.seller_revenue(report);
        for (j, p) in self.env.p2().iter().enumerate() {
            let v = p * self.env.seller_value(truth, j);
            e.push(self.q[report][j], -&v);
            e.constant += v;
        }
        e
    }

    /// Buyer ex post payoff from reporting `report` at `(x, y)`; full payments only.
    pub fn buyer_expost(&self, report: usize, x: usize, y: usize) -> Lin {
        let Payments::Full(t) = &self.pay else {
            panic!("ex post payoffs need full payments");
        };
        let mut e = Lin::var(self.q[x][report], self.env.buyer_value(x, y));
        e.push(t[x][report], -Rational::one());
        e
    }

    /// Buyer interim payoff from reporting `report` at type `truth` under `belief`.
    /// With aggregated payments `belief` must be the encoding's own belief.
    pub fn buyer_interim(&self, report: usize, truth: usize, belief: &[Rational]) -> Lin {
        match &self.pay {
            Payments::Full(_) => {
                let mut e = Lin::default();
                for (x, w) in belief.iter().enumerate() {
                    if !w.is_zero() {
                        e = e + self.buyer_expost(report, x, truth) * w;
                    }
                }
                e
            }
            Payments::Aggregated { t2, belief: own, .. } => {
                assert_eq!(own.as_slice(), belief, "aggregated payments fix the belief");
                let mut e = Lin::var(t2[report], -Rational::one());
                for (x, w) in belief.iter().enumerate() {
                    e.push(self.q[x][report], w * self.env.buyer_value(x, truth));
                }
                e
            }
        }
    }

    /// Adds `lhs >= rhs` and returns the row index.
    pub fn add_ge(&mut self, lhs: Lin, rhs: Lin) -> usize {
        let diff = lhs - rhs;
        self.lp
            .add_constraint(diff.terms, RowSense::Ge, -diff.constant)
    }

    /// Adds `lhs <= rhs` and returns the row index.
    pub fn add_le(&mut self, lhs: Lin, rhs: Lin) -> usize {
        let diff = lhs - rhs;
        self.lp
            .add_constraint(diff.terms, RowSense::Le, -diff.constant)
    }

    pub fn seller_truthful(&self, x: usize) -> Lin {
        self.seller_payoff(x, x)
    }

    pub fn seller_bic_local(&mut self) {
        for x in 0..self.env.x_size().saturating_sub(1) {
            let up = self.seller_payoff(x + 1, x);
            self.add_ge(self.seller_truthful(x), up);
            let down = self.seller_payoff(x, x + 1);
            self.add_ge(self.seller_truthful(x + 1), down);
        }
    }

    pub fn seller_bic_all(&mut self) {
        let n = self.env.x_size();
        for x in 0..n {
            for xh in (0..n).filter(|&k| k != x) {
                let dev = self.seller_payoff(xh, x);
                self.add_ge(self.seller_truthful(x), dev);
            }
        }
    }

    /// Seller IIR; at the top type only when `local`.
    pub fn seller_iir(&mut self, local: bool) {
        let n = self.env.x_size();
        let start = if local { n - 1 } else { 0 };
        for x in start..n {
            let outside = Lin::constant(self.env.outside_option(x));
            self.add_ge(self.seller_truthful(x), outside);
        }
    }

    pub fn buyer_bic_local(&mut self, belief: &[Rational]) {
        for y in 0..self.env.y_size().saturating_sub(1) {
            let truthful = self.buyer_interim(y, y, belief);
            let up = self.buyer_interim(y + 1, y, belief);
            self.add_ge(truthful, up);
            let truthful = self.buyer_interim(y + 1, y + 1, belief);
            let down = self.buyer_interim(y, y + 1, belief);
            self.add_ge(truthful, down);
        }
    }

    pub fn buyer_bic_all(&mut self, belief: &[Rational]) {
        let n = self.env.y_size();
        for y in 0..n {
            for yh in (0..n).filter(|&k| k != y) {
                let truthful = self.buyer_interim(y, y, belief);
                let dev = self.buyer_interim(yh, y, belief);
                self.add_ge(truthful, dev);
            }
        }
    }

    pub fn buyer_iir_all(&mut self, belief: &[Rational]) {
        for y in 0..self.env.y_size() {
            let u = self.buyer_interim(y, y, belief);
            self.add_ge(u, Lin::default());
        }
    }

    /// Buyer IIR at the lowest type, which implies it for all types under BIC.
    pub fn buyer_iir_bottom(&mut self, belief: &[Rational]) {
        let u = self.buyer_interim(0, 0, belief);
        self.add_ge(u, Lin::default());
    }

    /// Seller BIC and IIR plus buyer BIC and IIR under `belief`.
    pub fn feasible_under(&mut self, belief: &[Rational]) {
        self.seller_bic_local();
        self.seller_iir(true);
        self.buyer_bic_local(belief);
        self.buyer_iir_bottom(belief);
    }

    pub fn buyer_epic_all(&mut self) {
        let (nx, ny) = (self.env.x_size(), self.env.y_size());
        for x in 0..nx {
            for y in 0..ny {
                for yh in (0..ny).filter(|&k| k != y) {
                    let truthful = self.buyer_expost(y, x, y);
                    let dev = self.buyer_expost(yh, x, y);
                    self.add_ge(truthful, dev);
                }
            }
        }
    }

    pub fn buyer_epir_all(&mut self) {
        for x in 0..self.env.x_size() {
            for y in 0..self.env.y_size() {
                let u = self.buyer_expost(y, x, y);
                self.add_ge(u, Lin::default());
            }
        }
    }

    pub fn set_objective(&mut self, e: &Lin) {
        for (v, c) in &e.terms {
            self.lp.add_objective(*v, c);
        }
        self.lp.objective_constant += &e.constant;
    }

    /// Reads the allocation off a solution; aggregated payments are spread as
    /// `t(x,y) = T1(x) + T2(y) - sum_y p2 T2`.
    pub fn allocation(&self, sol: &LpSolution) -> Allocation {
        let q: Matrix = self
            .q
            .iter()
            .map(|row| row.iter().map(|v| sol.x[*v].clone()).collect())
            .collect();
        let t = match &self.pay {
            Payments::Full(t) => t
                .iter()
                .map(|row| row.iter().map(|v| sol.x[*v].clone()).collect())
                .collect(),
            Payments::Aggregated { t1, t2, .. } => {
                let mean: Rational = t2
                    .iter()
                    .zip(self.env.p2())
                    .map(|(v, p)| p * &sol.x[*v])
                    .sum();
                t1.iter()
                    .map(|a| {
                        t2.iter()
                            .map(|b| &sol.x[*a] + &sol.x[*b] - &mean)
                            .collect()
                    })
                    .collect()
            }
        };
        Allocation { q, t }
    }
}

/// Mechanisms with binding buyer local downward EPIC, parametrized by the
/// rule increments `d(x,k) = q(x,k) - q(x,k-1)` in `[0,1]` with row sums at
/// most 1, and the lowest buyer type's ex post payoff `u0(x)`.
pub(crate) struct IncrementLp<'a> {
    pub env: &'a Environment,
    pub lp: LpProblem,
    pub inc: Vec<Vec<usize>>,
    pub u0: Vec<usize>,
    /// `suffix[x][k] = sum_{y >= k} p2(y) VS(x,y)`.
    suffix: Matrix,
    /// `mass[k] = 1 - P2(k-1)`.
    mass: Vec<Rational>,
    dv_own: Vec<Rational>,
}

impl<'a> IncrementLp<'a> {
    pub fn new(env: &'a Environment, sense: Sense, u0_bounds: VarBounds) -> Self {
        let (nx, ny) = (env.x_size(), env.y_size());
        let d = derived_quantities(env);
        let suffix = (0..nx)
            .map(|x| {
                let mut acc = Rational::zero();
                let mut out = vec![Rational::zero(); ny];
                for y in (0..ny).rev() {
                    acc += &env.p2()[y] * &d.virtual_surplus[x][y];
                    out[y] = acc.clone();
                }
                out
            })
            .collect();
        let mass = (0..ny).map(|k| Rational::one() - d.cdf(k)).collect();
        let mut lp = LpProblem::new(sense);
        let inc: Vec<Vec<usize>> = (0..nx).map(|_| lp.add_vars(ny, VarBounds::unit())).collect();
        let u0 = lp.add_vars(nx, u0_bounds);
        for row in &inc {
            lp.add_constraint(
                row.iter().map(|&v| (v, Rational::one())),
                RowSense::Le,
                Rational::one(),
            );
        }
        IncrementLp {
            env,
            lp,
            inc,
            u0,
            suffix,
            mass,
            dv_own: env.v11().to_vec(),
        }
    }

    /// Truthful seller payoff `U1(x)`, 0-based.
    pub fn payoff(&self, x: usize) -> Lin {
        let mut e = Lin::constant(self.env.outside_option(x));
        for (k, v) in self.inc[x].iter().enumerate() {
            e.push(*v, self.suffix[x][k].clone());
        }
        e.push(self.u0[x], -Rational::one());
        e
    }

    /// Interim trade probability `Q1(x)`.
    pub fn interim_q(&self, x: usize) -> Lin {
        let mut e = Lin::default();
        for (k, v) in self.inc[x].iter().enumerate() {
            e.push(*v, self.mass[k].clone());
        }
        e
    }

    /// `U1(report | truth) = U1(report) - (v11(report) - v11(truth)) (1 - Q1(report))`.
    pub fn deviation(&self, report: usize, truth: usize) -> Lin {
        let gap = &self.dv_own[report] - &self.dv_own[truth];
        let keep = Lin::constant(Rational::one()) - self.interim_q(report);
        self.payoff(report) - keep * &gap
    }

    pub fn add_ge(&mut self, lhs: Lin, rhs: Lin) -> usize {
        let diff = lhs - rhs;
        self.lp.add_constraint(diff.terms, RowSense::Ge, -diff.constant)
    }

    pub fn set_objective(&mut self, e: &Lin) {
        for (v, c) in &e.terms {
            self.lp.add_objective(*v, c);
        }
        self.lp.objective_constant += &e.constant;
    }

    /// Seller BIC between adjacent types in both directions.
    pub fn seller_bic_local(&mut self) {
        for x in 0..self.env.x_size().saturating_sub(1) {
            let (lhs, rhs) = (self.payoff(x), self.deviation(x + 1, x));
            self.add_ge(lhs, rhs);
            let (lhs, rhs) = (self.payoff(x + 1), self.deviation(x, x + 1));
            self.add_ge(lhs, rhs);
        }
    }

    pub fn seller_iir(&mut self) {
        for x in 0..self.env.x_size() {
            let outside = Lin::constant(self.env.outside_option(x));
            let lhs = self.payoff(x);
            self.add_ge(lhs, outside);
        }
    }

    /// Interim participation of the lowest buyer type under `belief`.
    pub fn buyer_participation(&mut self, belief: &[Rational]) {
        let mut e = Lin::default();
        for (x, w) in belief.iter().enumerate() {
            e.push(self.u0[x], w.clone());
        }
        self.add_ge(e, Lin::default());
    }

    /// Rule from the increments, payments from binding downward EPIC.
    pub fn allocation(&self, sol: &LpSolution) -> Allocation {
        let (nx, ny) = (self.env.x_size(), self.env.y_size());
        let mut q = vec![vec![Rational::zero(); ny]; nx];
        let mut t = vec![vec![Rational::zero(); ny]; nx];
        for x in 0..nx {
            let mut level = Rational::zero();
            for y in 0..ny {
                let prev = level.clone();
                level += &sol.x[self.inc[x][y]];
                let value = self.env.buyer_value(x, y);
                t[x][y] = if y == 0 {
                    &value * &level - &sol.x[self.u0[x]]
                } else {
                    &t[x][y - 1] + value * (&level - &prev)
                };
                q[x][y] = level.clone();
            }
        }
        Allocation { q, t }
    }
}

//! Hinge-loss Markov random fields: weighted hinge potentials over `[0, 1]`
//! variables with linear equality/inequality constraints, and the convex
//! MAP solvers that minimize them.
//!
//! The energy of an assignment is `sum_j w_j * max{l_j(y), 0}^{p_j}` with
//! `l_j` affine and `p_j` in `{1, 2}`. MAP inference minimizes that energy
//! over the box intersected with the constraints. A tiny `eps * ||y||^2`
//! tie-break makes the reported optimum the minimum-norm point of an
//! otherwise flat optimal face.
//!
//! Two interchangeable backends implement [`MapSolver`]:
//! [`ProjectedSubgradient`] (the default) and [`ConsensusAdmm`].

mod admm;
mod ground;
mod pgd;
mod project;

pub use admm::ConsensusAdmm;
pub use pgd::ProjectedSubgradient;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Tie-break coefficient: the solvers minimize the energy plus
/// `TIE_BREAK_EPS * ||y||^2` over the free variables.
pub const TIE_BREAK_EPS: f64 = 1e-6;

/// Constraint satisfaction tolerance guaranteed on returned assignments.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Default solve tolerance.
pub const DEFAULT_TOL: f64 = 1e-4;

/// Default iteration budget.
pub const DEFAULT_MAX_ITER: usize = 20_000;

fn check_unit(value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutsideUnitInterval { value })
    }
}

/// Relaxed conjunction: `max{0, a + b - 1}`.
pub fn luk_and(a: f64, b: f64) -> Result<f64> {
    Ok((check_unit(a)? + check_unit(b)? - 1.0).max(0.0))
}

/// Relaxed disjunction: `min{1, a + b}`.
pub fn luk_or(a: f64, b: f64) -> Result<f64> {
    Ok((check_unit(a)? + check_unit(b)?).min(1.0))
}

/// Relaxed negation: `1 - a`.
pub fn luk_neg(a: f64) -> Result<f64> {
    Ok(1.0 - check_unit(a)?)
}

/// Hinge exponent `p_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exponent {
    Linear,
    Squared,
}

impl Exponent {
    pub fn power(self) -> u8 {
        match self {
            Exponent::Linear => 1,
            Exponent::Squared => 2,
        }
    }
}

/// One weighted hinge potential `w * max{offset + sum coeff*y, 0}^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeTerm {
    pub weight: f64,
    pub coeffs: Vec<(usize, f64)>,
    pub offset: f64,
    pub exponent: Exponent,
}

impl HingeTerm {
    pub fn linear(weight: f64, coeffs: Vec<(usize, f64)>, offset: f64) -> Self {
        HingeTerm {
            weight,
            coeffs,
            offset,
            exponent: Exponent::Linear,
        }
    }

    /// The inner affine value `offset + sum coeff * y`.
    pub fn linear_value(&self, values: &[f64]) -> f64 {
        let mut acc = self.offset;
        for &(var, coeff) in &self.coeffs {
            acc += coeff * values[var];
        }
        acc
    }

    /// The weighted hinge penalty at `values`.
    pub fn penalty(&self, values: &[f64]) -> f64 {
        let hinge = self.linear_value(values).max(0.0);
        match self.exponent {
            Exponent::Linear => self.weight * hinge,
            Exponent::Squared => self.weight * hinge * hinge,
        }
    }
}

/// Kind of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Equality,
    Leq,
}

impl ConstraintKind {
    pub fn label(self) -> &'static str {
        match self {
            ConstraintKind::Equality => "eq",
            ConstraintKind::Leq => "leq",
        }
    }
}

/// `sum coeff * y  (= | <=)  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub kind: ConstraintKind,
}

impl LinearConstraint {
    pub fn equality(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        LinearConstraint {
            coeffs,
            rhs,
            kind: ConstraintKind::Equality,
        }
    }

    pub fn leq(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        LinearConstraint {
            coeffs,
            rhs,
            kind: ConstraintKind::Leq,
        }
    }

    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .map(|&(var, coeff)| coeff * values[var])
            .sum()
    }

    /// How far `values` is from satisfying the constraint (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let gap = self.lhs(values) - self.rhs;
        match self.kind {
            ConstraintKind::Equality => gap.abs(),
            ConstraintKind::Leq => gap.max(0.0),
        }
    }
}

/// Grounds one weighted implication rule `body -> head` into a hinge term
/// measuring its distance to satisfaction:
/// `max{1 - sum_head y - sum_body (1 - y), 0}`.
///
/// For the single-literal rule `s -> t` this reduces to `max{y_s - y_t, 0}`.
pub fn ground_rule(weight: f64, body: &[usize], head: &[usize]) -> Result<HingeTerm> {
    if weight < 0.0 || !weight.is_finite() {
        return Err(Error::NegativeWeight { weight });
    }
    if body.is_empty() && head.is_empty() {
        return Err(Error::EmptyRule);
    }
    let mut coeffs = Vec::with_capacity(body.len() + head.len());
    for &var in body {
        coeffs.push((var, 1.0));
    }
    for &var in head {
        coeffs.push((var, -1.0));
    }
    let offset = 1.0 - body.len() as f64;
    Ok(HingeTerm::linear(weight, coeffs, offset))
}

/// A MAP inference instance: `num_vars` variables in `[0, 1]`, some fixed
/// by evidence, an energy made of hinge terms, and linear constraints.
#[derive(Debug, Clone, Default)]
pub struct HlMrfProblem {
    num_vars: usize,
    evidence: BTreeMap<usize, f64>,
    terms: Vec<HingeTerm>,
    constraints: Vec<LinearConstraint>,
}

impl HlMrfProblem {
    pub fn new(num_vars: usize) -> Self {
        HlMrfProblem {
            num_vars,
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn terms(&self) -> &[HingeTerm] {
        &self.terms
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn evidence(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.evidence.iter().map(|(&v, &x)| (v, x))
    }

    pub fn is_evidence(&self, var: usize) -> bool {
        self.evidence.contains_key(&var)
    }

    pub fn num_free(&self) -> usize {
        self.num_vars - self.evidence.len()
    }

    fn check_var(&self, var: usize) -> Result<()> {
        if var >= self.num_vars {
            return Err(Error::VarOutOfRange {
                var,
                num_vars: self.num_vars,
            });
        }
        Ok(())
    }

    /// Fixes a variable to an observed value in `[0, 1]`.
    pub fn set_evidence(&mut self, var: usize, value: f64) -> Result<()> {
        self.check_var(var)?;
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::EvidenceOutOfRange { var, value });
        }
        self.evidence.insert(var, value);
        Ok(())
    }

    pub fn add_term(&mut self, term: HingeTerm) -> Result<()> {
        if term.weight < 0.0 || !term.weight.is_finite() {
            return Err(Error::NegativeWeight {
                weight: term.weight,
            });
        }
        for &(var, _) in &term.coeffs {
            self.check_var(var)?;
        }
        self.terms.push(term);
        Ok(())
    }

    pub fn add_constraint(&mut self, constraint: LinearConstraint) -> Result<()> {
        if constraint.coeffs.is_empty() {
            return Err(Error::EmptyConstraint);
        }
        for &(var, _) in &constraint.coeffs {
            self.check_var(var)?;
        }
        self.constraints.push(constraint);
        Ok(())
    }

    /// Maximum constraint violation at `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(0.0, f64::max)
    }

    /// Line-oriented text dump of the grounded problem, for golden-file
    /// tests and inspection. Evidence variables carry their fixed value.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for var in 0..self.num_vars {
            match self.evidence.get(&var) {
                Some(value) => writeln!(out, "VAR {var} = {value}").unwrap(),
                None => writeln!(out, "VAR {var}").unwrap(),
            }
        }
        for term in &self.terms {
            write!(
                out,
                "TERM {} {} {}",
                term.weight,
                term.exponent.power(),
                term.offset
            )
            .unwrap();
            for &(var, coeff) in &term.coeffs {
                write!(out, " ({var}:{coeff})").unwrap();
            }
            out.push('\n');
        }
        for con in &self.constraints {
            write!(out, "CON {} {}", con.kind.label(), con.rhs).unwrap();
            for &(var, coeff) in &con.coeffs {
                write!(out, " ({var}:{coeff})").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Exact energy `sum_j w_j * max{l_j(values), 0}^{p_j}`; never negative.
///
/// `values` must cover every variable (evidence included).
pub fn objective(problem: &HlMrfProblem, values: &[f64]) -> f64 {
    assert_eq!(values.len(), problem.num_vars());
    problem.terms.iter().map(|t| t.penalty(values)).sum()
}

/// A solution: one value per variable (evidence echoed at its fixed value)
/// and the unregularized energy at those values.
#[derive(Debug, Clone)]
pub struct Assignment {
    values: Vec<f64>,
    objective: f64,
}

impl Assignment {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, var: usize) -> f64 {
        self.values[var]
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }
}

/// A constrained MAP solver backend. Implementations must return a point
/// whose energy is within `tol` of the constrained minimum, satisfy every
/// constraint within [`FEASIBILITY_TOL`] and the box exactly, and report
/// the minimum-norm optimum (via the [`TIE_BREAK_EPS`] regularizer).
pub trait MapSolver: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(&self, problem: &HlMrfProblem, tol: f64, max_iter: usize) -> Result<Assignment>;
}

/// Solves with the default backend ([`ProjectedSubgradient`]).
pub fn solve(problem: &HlMrfProblem, tol: f64, max_iter: usize) -> Result<Assignment> {
    ProjectedSubgradient::default().solve(problem, tol, max_iter)
}

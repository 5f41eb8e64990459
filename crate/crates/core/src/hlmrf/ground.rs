//! Reduction of a problem to its free variables: evidence values are folded
//! into term offsets and constraint right-hand sides.

use crate::error::{Error, Result};

use super::{objective, Assignment, ConstraintKind, Exponent, HlMrfProblem};

pub(super) struct GroundTerm {
    pub weight: f64,
    pub coeffs: Vec<(usize, f64)>,
    pub offset: f64,
    pub exponent: Exponent,
}

pub(super) struct GroundConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    /// Squared Euclidean norm of the coefficient vector.
    pub norm_sq: f64,
}

pub(super) struct Grounded {
    /// Original index of each free variable, ascending.
    pub free: Vec<usize>,
    pub terms: Vec<GroundTerm>,
    pub eqs: Vec<GroundConstraint>,
    pub leqs: Vec<GroundConstraint>,
}

impl Grounded {
    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    /// Energy over free-space values, without the tie-break regularizer.
    pub fn energy(&self, y: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let mut l = t.offset;
                for &(i, c) in &t.coeffs {
                    l += c * y[i];
                }
                let hinge = l.max(0.0);
                match t.exponent {
                    Exponent::Linear => t.weight * hinge,
                    Exponent::Squared => t.weight * hinge * hinge,
                }
            })
            .sum()
    }

    /// Energy plus the minimum-norm tie-break.
    pub fn regularized_energy(&self, y: &[f64]) -> f64 {
        let norm_sq: f64 = y.iter().map(|v| v * v).sum();
        self.energy(y) + super::TIE_BREAK_EPS * norm_sq
    }

    /// Adds the subgradient of the regularized energy at `y` into `grad`.
    /// At a hinge kink the inactive side (zero) is chosen.
    pub fn subgradient(&self, y: &[f64], grad: &mut [f64]) {
        for (g, &v) in grad.iter_mut().zip(y.iter()) {
            *g = 2.0 * super::TIE_BREAK_EPS * v;
        }
        for t in &self.terms {
            let mut l = t.offset;
            for &(i, c) in &t.coeffs {
                l += c * y[i];
            }
            if l <= 0.0 {
                continue;
            }
            let scale = match t.exponent {
                Exponent::Linear => t.weight,
                Exponent::Squared => 2.0 * t.weight * l,
            };
            for &(i, c) in &t.coeffs {
                grad[i] += scale * c;
            }
        }
    }

    pub fn max_violation(&self, y: &[f64]) -> f64 {
        let mut viol = 0.0_f64;
        for con in &self.eqs {
            let mut lhs = 0.0;
            for &(i, c) in &con.coeffs {
                lhs += c * y[i];
            }
            viol = viol.max((lhs - con.rhs).abs());
        }
        for con in &self.leqs {
            let mut lhs = 0.0;
            for &(i, c) in &con.coeffs {
                lhs += c * y[i];
            }
            viol = viol.max((lhs - con.rhs).max(0.0));
        }
        for &v in y {
            viol = viol.max((-v).max(v - 1.0).max(0.0));
        }
        viol
    }
}

/// Tolerance for constant constraints left over after evidence substitution.
const CONSTANT_CONSTRAINT_TOL: f64 = 1e-9;

pub(super) fn ground(problem: &HlMrfProblem) -> Result<Grounded> {
    let num_vars = problem.num_vars();
    let mut position = vec![usize::MAX; num_vars];
    let mut free = Vec::with_capacity(problem.num_free());
    for var in 0..num_vars {
        if !problem.is_evidence(var) {
            position[var] = free.len();
            free.push(var);
        }
    }
    let mut fixed = vec![0.0_f64; num_vars];
    for (var, value) in problem.evidence() {
        fixed[var] = value;
    }

    let mut terms = Vec::with_capacity(problem.terms().len());
    for term in problem.terms() {
        let mut offset = term.offset;
        let mut coeffs = Vec::with_capacity(term.coeffs.len());
        for &(var, coeff) in &term.coeffs {
            if position[var] == usize::MAX {
                offset += coeff * fixed[var];
            } else {
                coeffs.push((position[var], coeff));
            }
        }
        if coeffs.is_empty() {
            // Constant penalty: irrelevant to the argmin.
            continue;
        }
        terms.push(GroundTerm {
            weight: term.weight,
            coeffs,
            offset,
            exponent: term.exponent,
        });
    }

    let mut eqs = Vec::new();
    let mut leqs = Vec::new();
    for con in problem.constraints() {
        let mut rhs = con.rhs;
        let mut coeffs = Vec::with_capacity(con.coeffs.len());
        for &(var, coeff) in &con.coeffs {
            if position[var] == usize::MAX {
                rhs -= coeff * fixed[var];
            } else {
                coeffs.push((position[var], coeff));
            }
        }
        if coeffs.is_empty() {
            let residual = match con.kind {
                ConstraintKind::Equality => rhs.abs(),
                ConstraintKind::Leq => (-rhs).max(0.0),
            };
            if residual > CONSTANT_CONSTRAINT_TOL {
                return Err(Error::Infeasible { residual });
            }
            continue;
        }
        let norm_sq = coeffs.iter().map(|&(_, c)| c * c).sum();
        let grounded = GroundConstraint {
            coeffs,
            rhs,
            norm_sq,
        };
        match con.kind {
            ConstraintKind::Equality => eqs.push(grounded),
            ConstraintKind::Leq => leqs.push(grounded),
        }
    }

    Ok(Grounded {
        free,
        terms,
        eqs,
        leqs,
    })
}

/// Merges a free-space solution back with the evidence and computes the
/// exact unregularized objective.
pub(super) fn assemble(problem: &HlMrfProblem, grounded: &Grounded, y: &[f64]) -> Assignment {
    let mut values = vec![0.0_f64; problem.num_vars()];
    for (var, value) in problem.evidence() {
        values[var] = value;
    }
    for (&var, &v) in grounded.free.iter().zip(y.iter()) {
        values[var] = v.clamp(0.0, 1.0);
    }
    let objective = objective(problem, &values);
    Assignment { values, objective }
}

//! Projection onto the feasible set: the `[0, 1]` box intersected with the
//! linear equality/inequality constraints, via Dykstra's alternating
//! projection. Divergence of the cycle is how infeasibility is detected.

use crate::error::{Error, Result};

use super::ground::{GroundConstraint, Grounded};

/// Feasibility reached by the projector; tighter than what solvers promise
/// on returned assignments.
const PROJECTION_TOL: f64 = 1e-9;

const MAX_CYCLES: usize = 5_000;

fn clamp_box(y: &mut [f64]) {
    for v in y.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

fn project_hyperplane(y: &mut [f64], con: &GroundConstraint) {
    let mut lhs = 0.0;
    for &(i, c) in &con.coeffs {
        lhs += c * y[i];
    }
    let shift = (lhs - con.rhs) / con.norm_sq;
    for &(i, c) in &con.coeffs {
        y[i] -= shift * c;
    }
}

fn project_halfspace(y: &mut [f64], con: &GroundConstraint) {
    let mut lhs = 0.0;
    for &(i, c) in &con.coeffs {
        lhs += c * y[i];
    }
    if lhs > con.rhs {
        let shift = (lhs - con.rhs) / con.norm_sq;
        for &(i, c) in &con.coeffs {
            y[i] -= shift * c;
        }
    }
}

/// Reusable Dykstra workspace. Solvers project every iterate, so the
/// per-set increment buffers are allocated once.
pub(super) struct Projector {
    increments: Vec<Vec<f64>>,
    before: Vec<f64>,
}

impl Projector {
    pub fn new(grounded: &Grounded) -> Self {
        let n = grounded.num_free();
        let num_sets = 1 + grounded.eqs.len() + grounded.leqs.len();
        Projector {
            increments: vec![vec![0.0; n]; num_sets],
            before: vec![0.0; n],
        }
    }

    /// Projects `y` in place onto the feasible set of `grounded`.
    ///
    /// With no linear constraints this is a plain box clamp. Otherwise
    /// Dykstra's cycle runs until every set is satisfied within
    /// `PROJECTION_TOL`; failure to get there within the cycle budget
    /// reports the remaining residual as an infeasibility.
    pub fn project(&mut self, grounded: &Grounded, y: &mut [f64]) -> Result<()> {
        if grounded.eqs.is_empty() && grounded.leqs.is_empty() {
            clamp_box(y);
            return Ok(());
        }
        if grounded.max_violation(y) < PROJECTION_TOL {
            clamp_box(y);
            return Ok(());
        }

        for increment in &mut self.increments {
            increment.iter_mut().for_each(|p| *p = 0.0);
        }
        let mut residual = f64::INFINITY;
        for _ in 0..MAX_CYCLES {
            for (set, increment) in self.increments.iter_mut().enumerate() {
                for (v, p) in y.iter_mut().zip(increment.iter()) {
                    *v += p;
                }
                self.before.copy_from_slice(y);
                if set == 0 {
                    clamp_box(y);
                } else if set <= grounded.eqs.len() {
                    project_hyperplane(y, &grounded.eqs[set - 1]);
                } else {
                    project_halfspace(y, &grounded.leqs[set - 1 - grounded.eqs.len()]);
                }
                for ((p, b), v) in increment.iter_mut().zip(&self.before).zip(y.iter()) {
                    *p = b - v;
                }
            }
            residual = grounded.max_violation(y);
            if residual < PROJECTION_TOL {
                clamp_box(y);
                return Ok(());
            }
        }
        Err(Error::Infeasible { residual })
    }
}

/// Projection of the origin onto the feasible set; the solvers' start point.
pub(super) fn feasible_start(grounded: &Grounded) -> Result<Vec<f64>> {
    let mut y = vec![0.0_f64; grounded.num_free()];
    Projector::new(grounded).project(grounded, &mut y)?;
    Ok(y)
}

/// Minimum-norm point of the optimal face identified at `y_star`.
///
/// On the cell where the hinge activity pattern of `y_star` holds, the
/// energy is `g·y + const` with `g` the active-term gradient. The face of
/// equal energy is therefore a polyhedron: the feasible set, intersected
/// with `g·y = g·y_star`, with every inactive hinge kept inactive, and with
/// the affine value of every active squared term frozen. Projecting the
/// origin onto it resolves the `TIE_BREAK_EPS` tie exactly instead of
/// leaving first-order iterates stranded partway along a flat valley.
///
/// Returns `None` when the projection does not converge; callers keep
/// `y_star` in that case. Callers must also re-check that the pinned point
/// does not increase the regularized energy before adopting it.
pub(super) fn pin_minimum_norm(grounded: &Grounded, y_star: &[f64]) -> Option<Vec<f64>> {
    let n = y_star.len();
    let mut eqs: Vec<GroundConstraint> = grounded
        .eqs
        .iter()
        .map(|c| GroundConstraint {
            coeffs: c.coeffs.clone(),
            rhs: c.rhs,
            norm_sq: c.norm_sq,
        })
        .collect();
    let mut leqs: Vec<GroundConstraint> = grounded
        .leqs
        .iter()
        .map(|c| GroundConstraint {
            coeffs: c.coeffs.clone(),
            rhs: c.rhs,
            norm_sq: c.norm_sq,
        })
        .collect();

    let mut active_gradient = vec![0.0_f64; n];
    let mut any_active_linear = false;
    for term in &grounded.terms {
        let mut l = term.offset;
        for &(i, c) in &term.coeffs {
            l += c * y_star[i];
        }
        if l > 0.0 {
            match term.exponent {
                super::Exponent::Linear => {
                    for &(i, c) in &term.coeffs {
                        active_gradient[i] += term.weight * c;
                    }
                    any_active_linear = true;
                }
                super::Exponent::Squared => {
                    let rhs = l - term.offset;
                    let norm_sq = term.coeffs.iter().map(|&(_, c)| c * c).sum();
                    eqs.push(GroundConstraint {
                        coeffs: term.coeffs.clone(),
                        rhs,
                        norm_sq,
                    });
                }
            }
        } else {
            let norm_sq = term.coeffs.iter().map(|&(_, c)| c * c).sum();
            leqs.push(GroundConstraint {
                coeffs: term.coeffs.clone(),
                rhs: -term.offset,
                norm_sq,
            });
        }
    }
    if any_active_linear {
        let coeffs: Vec<(usize, f64)> = active_gradient
            .iter()
            .enumerate()
            .filter(|(_, g)| g.abs() > 1e-12)
            .map(|(i, &g)| (i, g))
            .collect();
        if !coeffs.is_empty() {
            let rhs = coeffs.iter().map(|&(i, g)| g * y_star[i]).sum();
            let norm_sq = coeffs.iter().map(|&(_, g)| g * g).sum();
            eqs.push(GroundConstraint {
                coeffs,
                rhs,
                norm_sq,
            });
        }
    }

    let face = Grounded {
        free: grounded.free.clone(),
        terms: Vec::new(),
        eqs,
        leqs,
    };
    let mut y = vec![0.0_f64; n];
    Projector::new(&face).project(&face, &mut y).ok()?;
    Some(y)
}

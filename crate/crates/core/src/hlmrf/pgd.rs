//! Projected subgradient descent with geometrically decaying steps.
//!
//! Hinge energies are polyhedral, so a normalized subgradient step with a
//! geometric step schedule contracts linearly toward the optimal face; the
//! `TIE_BREAK_EPS` quadratic then pins the minimum-norm point of that face.
//! Every iterate is projected back onto the feasible set, and the best
//! feasible point seen (by regularized energy) is the one returned.

use crate::error::{Error, Result};

use super::ground::{assemble, ground};
use super::project::{feasible_start, pin_minimum_norm, Projector};
use super::{Assignment, HlMrfProblem, MapSolver};

#[derive(Debug, Clone)]
pub struct ProjectedSubgradient {
    /// Initial step length (in variable-space Euclidean norm).
    pub initial_step: f64,
    /// Multiplier applied to the step after every epoch.
    pub decay: f64,
    /// Iterations per epoch.
    pub epoch_len: usize,
}

impl Default for ProjectedSubgradient {
    fn default() -> Self {
        ProjectedSubgradient {
            initial_step: 0.5,
            decay: 0.9,
            epoch_len: 50,
        }
    }
}

/// Epochs the best energy must stay flat (relative to `tol`) before the
/// solver declares convergence, once the step has shrunk below `tol`.
const PLATEAU_EPOCHS: usize = 3;

impl MapSolver for ProjectedSubgradient {
    fn name(&self) -> &'static str {
        "pgd"
    }

    fn solve(&self, problem: &HlMrfProblem, tol: f64, max_iter: usize) -> Result<Assignment> {
        let grounded = ground(problem)?;
        if grounded.num_free() == 0 {
            let assignment = assemble(problem, &grounded, &[]);
            return Ok(assignment);
        }

        let mut projector = Projector::new(&grounded);
        let mut y = feasible_start(&grounded)?;
        let n = y.len();

        let mut best = y.clone();
        let mut best_energy = grounded.regularized_energy(&y);
        let mut step = self.initial_step;
        let mut plateau_reference = best_energy;
        let mut plateau_count = 0usize;
        let mut grad = vec![0.0_f64; n];

        for iter in 0..max_iter {
            grounded.subgradient(&y, &mut grad);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > 1e-15 {
                let scale = step / norm;
                for (v, g) in y.iter_mut().zip(&grad) {
                    *v -= scale * g;
                }
                projector.project(&grounded, &mut y)?;
                let energy = grounded.regularized_energy(&y);
                if energy < best_energy {
                    best_energy = energy;
                    best.copy_from_slice(&y);
                }
            }

            if (iter + 1) % self.epoch_len == 0 {
                step *= self.decay;
                let improved = plateau_reference - best_energy;
                // The step bounds the argmin resolution, so it must fall an
                // order of magnitude below the requested tolerance.
                if step <= 0.1 * tol && improved <= tol * best_energy.abs().max(1.0) {
                    plateau_count += 1;
                    if plateau_count >= PLATEAU_EPOCHS {
                        if let Some(pinned) = pin_minimum_norm(&grounded, &best) {
                            if grounded.regularized_energy(&pinned) <= best_energy + 1e-12 {
                                best = pinned;
                            }
                        }
                        return Ok(assemble(problem, &grounded, &best));
                    }
                } else {
                    plateau_count = 0;
                }
                plateau_reference = best_energy;
            }
        }

        Err(Error::SolverMaxIter {
            max_iter,
            objective: grounded.energy(&best),
            step,
            violation: grounded.max_violation(&best),
        })
    }
}

//! Consensus ADMM over the hinge potentials and constraints.
//!
//! Every hinge term and every linear constraint owns a local copy of the
//! variables it touches; the consensus update averages the copies, folds in
//! the `TIE_BREAK_EPS` quadratic, and clamps to the box. Hinge proxes are
//! closed-form; constraint proxes are hyperplane/halfspace projections.
//! The returned consensus point is projected once onto the feasible set so
//! the assignment meets the same guarantees as the default backend.

use crate::error::{Error, Result};

use super::ground::{assemble, ground, Grounded};
use super::project::{feasible_start, pin_minimum_norm, Projector};
use super::{Assignment, Exponent, HlMrfProblem, MapSolver, TIE_BREAK_EPS};

#[derive(Debug, Clone)]
pub struct ConsensusAdmm {
    /// Initial penalty parameter.
    pub rho: f64,
    /// Enable residual-balancing adaptation of `rho`.
    pub adaptive: bool,
}

impl Default for ConsensusAdmm {
    fn default() -> Self {
        ConsensusAdmm {
            rho: 1.0,
            adaptive: true,
        }
    }
}

enum Prox {
    Hinge {
        weight: f64,
        coeffs: Vec<f64>,
        offset: f64,
        norm_sq: f64,
        exponent: Exponent,
    },
    Hyperplane {
        coeffs: Vec<f64>,
        rhs: f64,
        norm_sq: f64,
    },
    Halfspace {
        coeffs: Vec<f64>,
        rhs: f64,
        norm_sq: f64,
    },
}

struct Potential {
    /// Positions (into the free-variable vector) this potential touches.
    vars: Vec<usize>,
    prox: Prox,
    /// Local copy and scaled dual, one entry per touched variable.
    x: Vec<f64>,
    u: Vec<f64>,
}

impl Potential {
    /// `x = prox_{f/rho}(v)`, with `v = z_local - u` already stored in `x`.
    fn update(&mut self, rho: f64) {
        match &self.prox {
            Prox::Hinge {
                weight,
                coeffs,
                offset,
                norm_sq,
                exponent,
            } => {
                let l: f64 = offset + coeffs.iter().zip(&self.x).map(|(c, v)| c * v).sum::<f64>();
                if l <= 0.0 {
                    return;
                }
                match exponent {
                    Exponent::Linear => {
                        // Try the fully-active region first; fall back to the kink.
                        let shift = weight / rho;
                        let l_after = l - shift * norm_sq;
                        let scale = if l_after >= 0.0 { shift } else { l / norm_sq };
                        for (v, c) in self.x.iter_mut().zip(coeffs) {
                            *v -= scale * c;
                        }
                    }
                    Exponent::Squared => {
                        let scale = 2.0 * weight * l / (rho + 2.0 * weight * norm_sq);
                        for (v, c) in self.x.iter_mut().zip(coeffs) {
                            *v -= scale * c;
                        }
                    }
                }
            }
            Prox::Hyperplane {
                coeffs,
                rhs,
                norm_sq,
            } => {
                let lhs: f64 = coeffs.iter().zip(&self.x).map(|(c, v)| c * v).sum();
                let shift = (lhs - rhs) / norm_sq;
                for (v, c) in self.x.iter_mut().zip(coeffs) {
                    *v -= shift * c;
                }
            }
            Prox::Halfspace {
                coeffs,
                rhs,
                norm_sq,
            } => {
                let lhs: f64 = coeffs.iter().zip(&self.x).map(|(c, v)| c * v).sum();
                if lhs > *rhs {
                    let shift = (lhs - rhs) / norm_sq;
                    for (v, c) in self.x.iter_mut().zip(coeffs) {
                        *v -= shift * c;
                    }
                }
            }
        }
    }
}

fn build_potentials(grounded: &Grounded, z: &[f64]) -> Vec<Potential> {
    let mut potentials = Vec::new();
    for term in &grounded.terms {
        let vars: Vec<usize> = term.coeffs.iter().map(|&(i, _)| i).collect();
        let coeffs: Vec<f64> = term.coeffs.iter().map(|&(_, c)| c).collect();
        let norm_sq: f64 = coeffs.iter().map(|c| c * c).sum();
        potentials.push(Potential {
            x: vars.iter().map(|&i| z[i]).collect(),
            u: vec![0.0; vars.len()],
            vars,
            prox: Prox::Hinge {
                weight: term.weight,
                coeffs,
                offset: term.offset,
                norm_sq,
                exponent: term.exponent,
            },
        });
    }
    for (cons, is_eq) in grounded
        .eqs
        .iter()
        .map(|c| (c, true))
        .chain(grounded.leqs.iter().map(|c| (c, false)))
    {
        let vars: Vec<usize> = cons.coeffs.iter().map(|&(i, _)| i).collect();
        let coeffs: Vec<f64> = cons.coeffs.iter().map(|&(_, c)| c).collect();
        potentials.push(Potential {
            x: vars.iter().map(|&i| z[i]).collect(),
            u: vec![0.0; vars.len()],
            vars,
            prox: if is_eq {
                Prox::Hyperplane {
                    coeffs,
                    rhs: cons.rhs,
                    norm_sq: cons.norm_sq,
                }
            } else {
                Prox::Halfspace {
                    coeffs,
                    rhs: cons.rhs,
                    norm_sq: cons.norm_sq,
                }
            },
        });
    }
    potentials
}

impl MapSolver for ConsensusAdmm {
    fn name(&self) -> &'static str {
        "admm"
    }

    fn solve(&self, problem: &HlMrfProblem, tol: f64, max_iter: usize) -> Result<Assignment> {
        let grounded = ground(problem)?;
        if grounded.num_free() == 0 {
            return Ok(assemble(problem, &grounded, &[]));
        }

        let n = grounded.num_free();
        let mut z = feasible_start(&grounded)?;
        let mut potentials = build_potentials(&grounded, &z);
        if potentials.is_empty() {
            // Nothing couples the variables; the regularized optimum is the
            // projected origin itself.
            return Ok(assemble(problem, &grounded, &z));
        }

        let mut copies = vec![0.0_f64; n];
        for potential in &potentials {
            for &i in &potential.vars {
                copies[i] += 1.0;
            }
        }

        let mut rho = self.rho;
        let mut z_prev = z.clone();
        let eps_primal = tol * 1e-2;
        let eps_dual = tol * 1e-2;

        for iter in 0..max_iter {
            for potential in &mut potentials {
                for ((x, &i), u) in potential.x.iter_mut().zip(&potential.vars).zip(&potential.u) {
                    *x = z[i] - u;
                }
                potential.update(rho);
            }

            z_prev.copy_from_slice(&z);
            let mut sums = vec![0.0_f64; n];
            for potential in &potentials {
                for ((&i, x), u) in potential.vars.iter().zip(&potential.x).zip(&potential.u) {
                    sums[i] += x + u;
                }
            }
            for i in 0..n {
                let z_i = rho * sums[i] / (rho * copies[i] + 2.0 * TIE_BREAK_EPS);
                z[i] = z_i.clamp(0.0, 1.0);
            }

            let mut primal_sq = 0.0_f64;
            for potential in &mut potentials {
                for ((u, x), &i) in potential.u.iter_mut().zip(&potential.x).zip(&potential.vars) {
                    let gap = x - z[i];
                    *u += gap;
                    primal_sq += gap * gap;
                }
            }
            let mut dual_sq = 0.0_f64;
            for i in 0..n {
                let dz = z[i] - z_prev[i];
                dual_sq += copies[i] * dz * dz;
            }
            let primal = primal_sq.sqrt();
            let dual = rho * dual_sq.sqrt();

            if primal <= eps_primal && dual <= eps_dual {
                let mut y = z.clone();
                Projector::new(&grounded).project(&grounded, &mut y)?;
                if let Some(pinned) = pin_minimum_norm(&grounded, &y) {
                    if grounded.regularized_energy(&pinned)
                        <= grounded.regularized_energy(&y) + 1e-12
                    {
                        y = pinned;
                    }
                }
                return Ok(assemble(problem, &grounded, &y));
            }

            if self.adaptive && (iter + 1) % 50 == 0 {
                if primal > 10.0 * dual && rho < 1e3 {
                    rho *= 2.0;
                    for potential in &mut potentials {
                        for u in &mut potential.u {
                            *u *= 0.5;
                        }
                    }
                } else if dual > 10.0 * primal && rho > 1e-3 {
                    rho *= 0.5;
                    for potential in &mut potentials {
                        for u in &mut potential.u {
                            *u *= 2.0;
                        }
                    }
                }
            }
        }

        let mut y = z;
        Projector::new(&grounded).project(&grounded, &mut y)?;
        Err(Error::SolverMaxIter {
            max_iter,
            objective: grounded.energy(&y),
            step: rho,
            violation: grounded.max_violation(&y),
        })
    }
}

//! Solver-versus-brute-force checks on random instances.
//!
//! The oracle scans the full 0.01 grid over the free variables, keeping only
//! points that satisfy the constraints, and evaluates the energy with its
//! own arithmetic (independent of the solver and of `HingeTerm::penalty`).
//! Instance generation keeps the total Lipschitz mass of the energy bounded
//! so the grid discretization error stays well under the comparison band.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unriddle_core::hlmrf::{
    ConsensusAdmm, Exponent, HingeTerm, HlMrfProblem, LinearConstraint, MapSolver,
    ProjectedSubgradient, FEASIBILITY_TOL,
};

const GRID_STEP: f64 = 0.01;

/// Dense-coefficient view of a problem with evidence folded in, evaluated
/// by straight-line arithmetic.
struct GridOracle {
    terms: Vec<(f64, u8, f64, Vec<f64>)>,
    eqs: Vec<(f64, Vec<f64>)>,
    leqs: Vec<(f64, Vec<f64>)>,
    num_free: usize,
}

impl GridOracle {
    fn build(problem: &HlMrfProblem) -> GridOracle {
        let n = problem.num_vars();
        let mut fixed = vec![None; n];
        for (var, value) in problem.evidence() {
            fixed[var] = Some(value);
        }
        let mut position = vec![usize::MAX; n];
        let mut num_free = 0;
        for var in 0..n {
            if fixed[var].is_none() {
                position[var] = num_free;
                num_free += 1;
            }
        }

        let mut terms = Vec::new();
        for term in problem.terms() {
            let mut offset = term.offset;
            let mut dense = vec![0.0; num_free];
            for &(var, coeff) in &term.coeffs {
                match fixed[var] {
                    Some(value) => offset += coeff * value,
                    None => dense[position[var]] += coeff,
                }
            }
            terms.push((term.weight, term.exponent.power(), offset, dense));
        }
        let mut eqs = Vec::new();
        let mut leqs = Vec::new();
        for con in problem.constraints() {
            let mut rhs = con.rhs;
            let mut dense = vec![0.0; num_free];
            for &(var, coeff) in &con.coeffs {
                match fixed[var] {
                    Some(value) => rhs -= coeff * value,
                    None => dense[position[var]] += coeff,
                }
            }
            match con.kind {
                unriddle_core::hlmrf::ConstraintKind::Equality => eqs.push((rhs, dense)),
                unriddle_core::hlmrf::ConstraintKind::Leq => leqs.push((rhs, dense)),
            }
        }
        GridOracle {
            terms,
            eqs,
            leqs,
            num_free,
        }
    }

    fn energy_at(&self, point: &[f64]) -> f64 {
        let mut total = 0.0;
        for (weight, power, offset, dense) in &self.terms {
            let mut l = *offset;
            for (c, y) in dense.iter().zip(point) {
                l += c * y;
            }
            if l > 0.0 {
                total += weight * if *power == 1 { l } else { l * l };
            }
        }
        total
    }

    fn feasible(&self, point: &[f64]) -> bool {
        for (rhs, dense) in &self.eqs {
            let lhs: f64 = dense.iter().zip(point).map(|(c, y)| c * y).sum();
            if (lhs - rhs).abs() > 1e-9 {
                return false;
            }
        }
        for (rhs, dense) in &self.leqs {
            let lhs: f64 = dense.iter().zip(point).map(|(c, y)| c * y).sum();
            if lhs > rhs + 1e-9 {
                return false;
            }
        }
        true
    }

    /// Exhaustive minimum over feasible grid points.
    fn minimum(&self) -> Option<f64> {
        let steps = (1.0 / GRID_STEP).round() as usize; // 100
        let mut point = vec![0.0_f64; self.num_free];
        let mut best: Option<f64> = None;
        let mut idx = vec![0_usize; self.num_free];
        loop {
            for (p, &i) in point.iter_mut().zip(&idx) {
                *p = i as f64 * GRID_STEP;
            }
            if self.feasible(&point) {
                let e = self.energy_at(&point);
                if best.map_or(true, |b| e < b) {
                    best = Some(e);
                }
            }
            // Odometer increment.
            let mut level = 0;
            loop {
                if level == self.num_free {
                    return best;
                }
                idx[level] += 1;
                if idx[level] <= steps {
                    break;
                }
                idx[level] = 0;
                level += 1;
            }
        }
    }
}

/// Random instance anchored at a grid point so the feasible set is nonempty
/// and contains grid points. Total hinge Lipschitz mass is capped so the
/// oracle's discretization error stays below ~1.5e-2.
fn random_instance(rng: &mut ChaCha8Rng, max_free: usize) -> HlMrfProblem {
    let num_free = rng.gen_range(2..=max_free);
    let with_evidence = rng.gen_bool(0.4);
    let num_vars = num_free + usize::from(with_evidence);
    let mut problem = HlMrfProblem::new(num_vars);
    if with_evidence {
        let value = rng.gen_range(0..=100) as f64 * GRID_STEP;
        problem.set_evidence(num_vars - 1, value).unwrap();
    }

    let anchor: Vec<f64> = (0..num_free)
        .map(|_| rng.gen_range(0..=100) as f64 * GRID_STEP)
        .collect();

    let num_terms = rng.gen_range(1..=8);
    let mut terms = Vec::new();
    let mut mass = 0.0;
    for _ in 0..num_terms {
        let weight = rng.gen_range(0.1..2.0);
        let arity = rng.gen_range(1..=num_vars.min(3));
        let mut vars: Vec<usize> = (0..num_vars).collect();
        for i in 0..arity {
            let j = rng.gen_range(i..num_vars);
            vars.swap(i, j);
        }
        let coeffs: Vec<(usize, f64)> = vars[..arity]
            .iter()
            .map(|&v| {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                (v, sign * rng.gen_range(0.25..1.0))
            })
            .collect();
        let offset = rng.gen_range(-1.0..1.0);
        let exponent = if rng.gen_bool(0.25) {
            Exponent::Squared
        } else {
            Exponent::Linear
        };
        mass += weight * coeffs.iter().map(|(_, c)| c.abs()).sum::<f64>();
        terms.push(HingeTerm {
            weight,
            coeffs,
            offset,
            exponent,
        });
    }
    let scale = if mass > 3.0 { 3.0 / mass } else { 1.0 };
    for mut term in terms {
        term.weight *= scale;
        problem.add_term(term).unwrap();
    }

    for _ in 0..rng.gen_range(0..=2_usize) {
        if rng.gen_bool(0.3) {
            // Unit-coefficient equality through the anchor: exactly
            // representable on the grid.
            let arity = rng.gen_range(1..=num_free);
            let coeffs: Vec<(usize, f64)> = (0..arity).map(|v| (v, 1.0)).collect();
            let rhs = anchor[..arity].iter().sum::<f64>();
            problem
                .add_constraint(LinearConstraint::equality(coeffs, rhs))
                .unwrap();
        } else {
            let coeffs: Vec<(usize, f64)> = (0..num_free)
                .map(|v| (v, rng.gen_range(-1.0..1.0)))
                .collect();
            let lhs_at_anchor: f64 = coeffs.iter().map(|&(v, c)| c * anchor[v]).sum();
            let slack = rng.gen_range(0.05..0.5);
            problem
                .add_constraint(LinearConstraint::leq(coeffs, lhs_at_anchor + slack))
                .unwrap();
        }
    }
    problem
}

fn check_backend(solver: &dyn MapSolver, seed: u64, count: usize, max_free: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_gap = 0.0_f64;
    for case in 0..count {
        let problem = random_instance(&mut rng, max_free);
        let oracle = GridOracle::build(&problem);
        let grid_min = oracle.minimum().expect("anchored instance is feasible");
        let assignment = solver
            .solve(&problem, 1e-4, 20_000)
            .unwrap_or_else(|e| panic!("case {case}: {e}"));
        let gap = (assignment.objective() - grid_min).abs();
        worst_gap = worst_gap.max(gap);
        assert!(
            gap <= 2e-2,
            "case {case} ({}): solver {} vs grid {} (gap {gap:.4})",
            solver.name(),
            assignment.objective(),
            grid_min,
        );
        assert!(
            problem.max_violation(assignment.values()) <= FEASIBILITY_TOL,
            "case {case}: constraint violation"
        );
        assert!(assignment
            .values()
            .iter()
            .all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v)));
    }
    println!(
        "{}: {count} instances, worst |solver - grid| = {worst_gap:.5}",
        solver.name()
    );
}

#[test]
fn pgd_matches_grid_oracle() {
    check_backend(&ProjectedSubgradient::default(), 42, 120, 3);
}

#[test]
fn pgd_matches_grid_oracle_four_vars() {
    check_backend(&ProjectedSubgradient::default(), 43, 12, 4);
}

#[test]
fn admm_matches_grid_oracle() {
    check_backend(&ConsensusAdmm::default(), 44, 120, 3);
}

#[test]
fn backends_agree_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pgd = ProjectedSubgradient::default();
    let admm = ConsensusAdmm::default();
    for case in 0..60 {
        let problem = random_instance(&mut rng, 3);
        let a = pgd.solve(&problem, 1e-4, 20_000).unwrap();
        let b = admm.solve(&problem, 1e-4, 20_000).unwrap();
        assert!(
            (a.objective() - b.objective()).abs() <= 5e-3,
            "case {case}: pgd {} vs admm {}",
            a.objective(),
            b.objective()
        );
    }
}

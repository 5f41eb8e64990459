//! Structural invariants of the MAP solvers: convexity of the energy,
//! weight-scaling equivariance, and argmin stability under scaling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unriddle_core::hlmrf::{
    objective, Exponent, HingeTerm, HlMrfProblem, LinearConstraint, MapSolver,
    ProjectedSubgradient,
};

fn random_problem(rng: &mut ChaCha8Rng) -> HlMrfProblem {
    let n = rng.gen_range(2..=3_usize);
    let mut p = HlMrfProblem::new(n);
    for _ in 0..rng.gen_range(1..=6) {
        let arity = rng.gen_range(1..=n.min(2));
        let coeffs: Vec<(usize, f64)> = (0..arity)
            .map(|v| {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                (v, sign * rng.gen_range(0.3..1.0))
            })
            .collect();
        p.add_term(HingeTerm {
            weight: rng.gen_range(0.2..1.5),
            coeffs,
            offset: rng.gen_range(-0.5..0.8),
            exponent: if rng.gen_bool(0.2) {
                Exponent::Squared
            } else {
                Exponent::Linear
            },
        })
        .unwrap();
    }
    if rng.gen_bool(0.5) {
        let coeffs: Vec<(usize, f64)> = (0..n).map(|v| (v, 1.0)).collect();
        p.add_constraint(LinearConstraint::leq(coeffs, rng.gen_range(0.5..1.5)))
            .unwrap();
    }
    p
}

fn scale_weights(p: &HlMrfProblem, c: f64) -> HlMrfProblem {
    let mut q = HlMrfProblem::new(p.num_vars());
    for (var, v) in p.evidence() {
        q.set_evidence(var, v).unwrap();
    }
    for t in p.terms() {
        q.add_term(HingeTerm {
            weight: t.weight * c,
            coeffs: t.coeffs.clone(),
            offset: t.offset,
            exponent: t.exponent,
        })
        .unwrap();
    }
    for con in p.constraints() {
        q.add_constraint(con.clone()).unwrap();
    }
    q
}

#[test]
fn objective_is_midpoint_convex() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let p = random_problem(&mut rng);
        let n = p.num_vars();
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let mid: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
        let bound = 0.5 * objective(&p, &u) + 0.5 * objective(&p, &v);
        assert!(objective(&p, &mid) <= bound + 1e-9);
    }
}

#[test]
fn weight_scaling_scales_objective_and_keeps_argmin() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let solver = ProjectedSubgradient::default();
    let tol = 1e-4;
    for case in 0..50 {
        let p = random_problem(&mut rng);
        let base = solver.solve(&p, tol, 20_000).unwrap();
        for c in [0.5, 3.0] {
            let scaled = solver.solve(&scale_weights(&p, c), tol, 20_000).unwrap();
            let objective_gap = (scaled.objective() - c * base.objective()).abs();
            assert!(
                objective_gap <= 2e-2,
                "case {case} c={c}: objective gap {objective_gap}"
            );
            let drift = scaled
                .values()
                .iter()
                .zip(base.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            assert!(drift <= 2.0 * tol, "case {case} c={c}: argmin drift {drift}");
        }
    }
}

use super::*;
use crate::hlmrf::{objective, solve, ConstraintKind};
use crate::kgraph::KnowledgeStore;

fn store_with_vectors(tokens: &[&str], vectors: &[Vec<f64>]) -> KnowledgeStore {
    let dim = vectors[0].len();
    KnowledgeStore::from_parts(
        tokens.iter().map(|t| t.to_string()).collect(),
        dim,
        vectors.to_vec(),
        dim,
        vectors.to_vec(),
        vec![],
        vec![],
    )
    .unwrap()
}

/// Brute-force scan of a grounded stage over its free variables. Ties in
/// energy (within 1e-12) break toward the smaller-norm point, mirroring
/// the solver's minimum-norm tie-break.
fn grid_best(stage: &GroundedStage, step: f64) -> (f64, Vec<f64>) {
    let free: Vec<usize> = stage.target_vars.iter().map(|&(_, v)| v).collect();
    let n = stage.problem.num_vars();
    let mut values = vec![0.0_f64; n];
    for (var, v) in stage.problem.evidence() {
        values[var] = v;
    }
    let steps = (1.0 / step).round() as usize;
    let mut idx = vec![0_usize; free.len()];
    let mut best = (f64::INFINITY, f64::INFINITY, values.clone());
    loop {
        for (&var, &i) in free.iter().zip(&idx) {
            values[var] = i as f64 * step;
        }
        if stage.problem.max_violation(&values) <= 1e-9 {
            let e = objective(&stage.problem, &values);
            let norm_sq: f64 = free.iter().map(|&v| values[v] * values[v]).sum();
            if e < best.0 - 1e-12 || ((e - best.0).abs() <= 1e-12 && norm_sq < best.1) {
                best = (e, norm_sq, values.clone());
            }
        }
        let mut level = 0;
        loop {
            if level == free.len() {
                return (best.0, best.2);
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

#[test]
fn theta_defaults_validate() {
    ThetaConfig::default().validate().unwrap();
}

#[test]
fn theta_rejects_out_of_range() {
    let mut t = ThetaConfig::default();
    t.stage1_sum_cap = 1.5;
    assert!(t.validate().is_err());
    let mut t = ThetaConfig::default();
    t.stage2_sum_cap = 0.5;
    assert!(t.validate().is_err());
    let mut t = ThetaConfig::default();
    t.gate_sim = 1.2;
    assert!(t.validate().is_err());
    let mut t = ThetaConfig::default();
    t.alpha_cn = 0.0;
    t.alpha_w2v = 0.0;
    assert!(t.validate().is_err());
}

#[test]
fn theta_overrides_by_key() {
    let mut t = ThetaConfig::default();
    t.set("gate_sim", "0.6").unwrap();
    t.set("num_targets", "25").unwrap();
    assert_eq!(t.gate_sim, 0.6);
    assert_eq!(t.num_targets, 25);
    assert!(t.set("no_such_knob", "1").is_err());
    assert!(t.set("gate_sim", "abc").is_err());
}

#[test]
fn rule_weight_formula() {
    // Orthogonal vectors in both spaces: mapped similarity 0.5 everywhere,
    // and the symmetric adjacency gives every concept centrality 1.
    let store = store_with_vectors(&["s", "t"], &[vec![1.0, 0.0], vec![0.0, 1.0]]);
    let s = store.concept("s").unwrap();
    let t = store.concept("t").unwrap();
    let theta = ThetaConfig::default();
    assert!((store.centrality(t) - 1.0).abs() < 1e-6);
    let w = rule_weight(s, t, &store, &theta);
    assert!((w - 3.5).abs() < 1e-6, "got {w}");
}

#[test]
fn rule_weight_pure_popularity_term() {
    // Opposite vectors: both similarities 0; only 1/centrality remains.
    let store = store_with_vectors(&["s", "t"], &[vec![1.0, 0.0], vec![-1.0, 0.0]]);
    let s = store.concept("s").unwrap();
    let t = store.concept("t").unwrap();
    let w = rule_weight(s, t, &store, &ThetaConfig::default());
    assert!((w - 1.0).abs() < 1e-6, "got {w}");
}

#[test]
fn rule_weight_matches_re_evaluation_oracle() {
    let store = store_with_vectors(
        &["a", "b", "c"],
        &[vec![1.0, 0.2], vec![0.4, 1.0], vec![-0.3, 0.9]],
    );
    let theta = ThetaConfig::default();
    for s in store.concepts() {
        for t in store.concepts() {
            let expected = theta.alpha_cn * store.similarity(SpaceId::Cn, s, t)
                + theta.alpha_w2v * store.similarity(SpaceId::W2v, s, t)
                + 1.0 / store.centrality(t);
            let got = rule_weight(s, t, &store, &theta);
            assert!((got - expected).abs() < 1e-12);
            assert!(got > 0.0 && got.is_finite());
        }
    }
}

#[test]
fn pair_weight_endpoints() {
    let store = store_with_vectors(&["a", "b"], &[vec![1.0, 0.0], vec![-1.0, 0.0]]);
    let a = store.concept("a").unwrap();
    let b = store.concept("b").unwrap();
    let theta = ThetaConfig::default();
    // Self-similarity is exactly 1 in both spaces.
    assert_eq!(pair_weight(a, a, &store, &theta), 5.0);
    // Opposite vectors: both similarities 0.
    assert_eq!(pair_weight(a, b, &store, &theta), 0.0);
}

/// Four concepts sharing one direction: every similarity is 1 (within fp),
/// so every seed-target pair passes the 0.8 gate.
fn clustered_store() -> KnowledgeStore {
    store_with_vectors(
        &["s1", "s2", "t1", "t2"],
        &[
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 0.0],
        ],
    )
}

#[test]
fn stage1_counting_contract() {
    let store = clustered_store();
    let theta = ThetaConfig::default();
    let ids: Vec<ConceptId> = ["s1", "s2", "t1", "t2"]
        .iter()
        .map(|t| store.concept(t).unwrap())
        .collect();
    let seedset = SeedSet::new(0, "test", vec![(ids[0], 0.9), (ids[1], 0.8)]).unwrap();
    let candidates = TargetCandidateSet {
        image_id: 0,
        targets: vec![ids[2], ids[3]],
        sim_matrix: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
    };
    let stage = build_stage1(&seedset, &candidates, &store, &theta).unwrap();

    // 2x2 gated seed-target rules, 2 symmetric pair couples (4 terms), one cap.
    let seed_target = stage
        .rules
        .iter()
        .filter(|r| r.kind == RuleKind::SeedTarget)
        .count();
    let pair = stage
        .rules
        .iter()
        .filter(|r| r.kind == RuleKind::TargetTarget)
        .count();
    assert_eq!(seed_target, 4);
    assert_eq!(pair, 2 * theta.pair_partners * candidates.targets.len());
    assert_eq!(stage.problem.terms().len(), 8);
    assert_eq!(stage.problem.constraints().len(), 1);
    assert_eq!(stage.problem.constraints()[0].kind, ConstraintKind::Leq);
    assert_eq!(stage.problem.constraints()[0].rhs, theta.stage1_sum_cap);
    assert!(stage.rules.iter().all(|r| r.weight >= 0.0 && r.weight.is_finite()));
}

#[test]
fn stage1_gate_excludes_dissimilar_pairs() {
    // s2 is orthogonal to t1: combined similarity 0.5 < 0.8, so that rule
    // (and only that one) is absent.
    let store = store_with_vectors(
        &["s1", "s2", "t1"],
        &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]],
    );
    let theta = ThetaConfig::default();
    let s1 = store.concept("s1").unwrap();
    let s2 = store.concept("s2").unwrap();
    let t1 = store.concept("t1").unwrap();
    let seedset = SeedSet::new(0, "test", vec![(s1, 0.9), (s2, 0.8)]).unwrap();
    let candidates = TargetCandidateSet {
        image_id: 0,
        targets: vec![t1],
        sim_matrix: vec![vec![1.0], vec![0.5]],
    };
    let stage = build_stage1(&seedset, &candidates, &store, &theta).unwrap();
    let seed_target: Vec<_> = stage
        .rules
        .iter()
        .filter(|r| r.kind == RuleKind::SeedTarget)
        .collect();
    assert_eq!(seed_target.len(), 1);
    assert_eq!(seed_target[0].endpoints.0, 0); // s1's variable
}

#[test]
fn stage1_solution_prefers_connected_target() {
    // Target A is similar to both seeds, target B to neither. The grid
    // oracle on the grounded problem confirms I(A) > I(B) at the optimum.
    // tb is anti-similar to everything, so it is neither gated in nor
    // meaningfully coupled to ta (pair weight 0).
    let store = store_with_vectors(
        &["s1", "s2", "ta", "tb"],
        &[
            vec![1.0, 0.0, 0.0],
            vec![0.9, 0.1, 0.0],
            vec![1.0, 0.05, 0.0],
            vec![-1.0, -0.05, 0.0],
        ],
    );
    let theta = ThetaConfig::default();
    let ids: Vec<ConceptId> = ["s1", "s2", "ta", "tb"]
        .iter()
        .map(|t| store.concept(t).unwrap())
        .collect();
    let seedset = SeedSet::new(0, "test", vec![(ids[0], 0.9), (ids[1], 0.8)]).unwrap();
    let candidates = TargetCandidateSet {
        image_id: 0,
        targets: vec![ids[2], ids[3]],
        sim_matrix: vec![vec![1.0, 0.0], vec![1.0, 0.0]],
    };
    let stage = build_stage1(&seedset, &candidates, &store, &theta).unwrap();

    let (grid_obj, grid_point) = grid_best(&stage, 0.01);
    let a_var = stage.target_vars[0].1;
    let b_var = stage.target_vars[1].1;
    assert!(grid_point[a_var] > grid_point[b_var]);

    let assignment = solve(&stage.problem, theta.tol, theta.max_iter).unwrap();
    assert!((assignment.objective() - grid_obj).abs() <= 2e-2);
    assert!(assignment.value(a_var) > assignment.value(b_var));
}

#[test]
fn stage1_rejects_empty_candidates() {
    let store = clustered_store();
    let s1 = store.concept("s1").unwrap();
    let seedset = SeedSet::new(0, "test", vec![(s1, 0.9)]).unwrap();
    let candidates = TargetCandidateSet {
        image_id: 0,
        targets: vec![],
        sim_matrix: vec![vec![]],
    };
    assert!(build_stage1(&seedset, &candidates, &store, &ThetaConfig::default()).is_err());
}

#[test]
fn stage2_unifies_shared_targets() {
    let store = clustered_store();
    let theta = ThetaConfig::default();
    let ids: Vec<ConceptId> = ["s1", "s2", "t1", "t2"]
        .iter()
        .map(|t| store.concept(t).unwrap())
        .collect();
    let seedsets = vec![
        SeedSet::new(0, "test", vec![(ids[0], 0.9)]).unwrap(),
        SeedSet::new(1, "test", vec![(ids[1], 0.8)]).unwrap(),
    ];
    // t1 survives in both images; t2 only in the second.
    let inferred = vec![
        InferredTargets {
            image_id: 0,
            targets: vec![(ids[2], 0.5)],
        },
        InferredTargets {
            image_id: 1,
            targets: vec![(ids[2], 0.4), (ids[3], 0.2)],
        },
    ];
    let stage = build_stage2(&inferred, &seedsets, &store, &theta).unwrap();
    // One unified variable per distinct concept.
    assert_eq!(stage.target_vars.len(), 2);
    assert_eq!(stage.problem.num_vars(), 2 + 2);
    // Everything is gated in here: 2 seeds x 2 unified targets.
    assert_eq!(stage.problem.terms().len(), 4);
    assert_eq!(stage.problem.constraints().len(), 1);
    assert_eq!(stage.problem.constraints()[0].rhs, 1.0);
}

#[test]
fn stage2_rejects_empty_inferred_sets() {
    let store = clustered_store();
    let s1 = store.concept("s1").unwrap();
    let seedsets = vec![SeedSet::new(0, "test", vec![(s1, 0.9)]).unwrap()];
    let inferred = vec![InferredTargets {
        image_id: 0,
        targets: vec![],
    }];
    assert!(matches!(
        build_stage2(&inferred, &seedsets, &store, &ThetaConfig::default()),
        Err(Error::NoInferredTargets)
    ));
}

#[test]
fn stage2_widely_connected_target_wins() {
    // "wide" is gated-similar to the seeds of all four images; "narrow"
    // only to the first image's seed. Verified against the grid oracle.
    let wide_axis = [1.0, 0.0, 0.0, 0.0];
    let mut vectors = vec![];
    let mut tokens = vec![];
    for k in 0..4 {
        tokens.push(format!("seed{k}"));
        // Each seed shares the wide axis strongly.
        let mut v = vec![0.0; 4];
        v[0] = 1.0;
        v[k] = if k == 0 { 1.0 } else { 0.35 };
        vectors.push(v);
    }
    tokens.push("wide".to_string());
    vectors.push(wide_axis.to_vec());
    tokens.push("narrow".to_string());
    // Similar to seed0 only.
    vectors.push(vec![1.0, 0.0, 0.0, 0.35]);

    let refs: Vec<&str> = tokens.iter().map(|s| s.as_str()).collect();
    let store = store_with_vectors(&refs, &vectors);
    let theta = ThetaConfig::default();
    let wide = store.concept("wide").unwrap();
    let narrow = store.concept("narrow").unwrap();

    let seedsets: Vec<SeedSet> = (0..4)
        .map(|k| {
            let seed = store.concept(&format!("seed{k}")).unwrap();
            SeedSet::new(k, "test", vec![(seed, 0.8)]).unwrap()
        })
        .collect();
    let inferred: Vec<InferredTargets> = (0..4)
        .map(|k| InferredTargets {
            image_id: k,
            targets: if k == 0 {
                vec![(wide, 0.5), (narrow, 0.5)]
            } else {
                vec![(wide, 0.5)]
            },
        })
        .collect();
    let stage = build_stage2(&inferred, &seedsets, &store, &theta).unwrap();

    let wide_var = stage
        .target_vars
        .iter()
        .find(|&&(c, _)| c == wide)
        .unwrap()
        .1;
    let narrow_var = stage
        .target_vars
        .iter()
        .find(|&&(c, _)| c == narrow)
        .unwrap()
        .1;

    let (grid_obj, grid_point) = grid_best(&stage, 0.01);
    assert!(grid_point[wide_var] > grid_point[narrow_var]);

    let assignment = solve(&stage.problem, theta.tol, theta.max_iter).unwrap();
    assert!((assignment.objective() - grid_obj).abs() <= 2e-2);
    assert!(assignment.value(wide_var) > assignment.value(narrow_var));
    // The cap keeps the summed scores at or below 1.
    let total: f64 = stage
        .target_vars
        .iter()
        .map(|&(_, v)| assignment.value(v))
        .sum();
    assert!(total <= 1.0 + 1e-6);
}

#[test]
fn stage2_single_image_reduces_to_capped_rescoring() {
    let store = clustered_store();
    let theta = ThetaConfig::default();
    let s1 = store.concept("s1").unwrap();
    let t1 = store.concept("t1").unwrap();
    let t2 = store.concept("t2").unwrap();
    let seedsets = vec![SeedSet::new(0, "test", vec![(s1, 0.9)]).unwrap()];
    let inferred = vec![InferredTargets {
        image_id: 0,
        targets: vec![(t1, 0.6), (t2, 0.5)],
    }];
    let stage = build_stage2(&inferred, &seedsets, &store, &theta).unwrap();
    let assignment = solve(&stage.problem, theta.tol, theta.max_iter).unwrap();
    let total: f64 = stage
        .target_vars
        .iter()
        .map(|&(_, v)| assignment.value(v))
        .sum();
    assert!(total <= theta.stage2_sum_cap + 1e-6);
}

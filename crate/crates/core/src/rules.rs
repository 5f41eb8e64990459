//! Grounding of the two inference models: the per-image model (stage one)
//! and the joint cross-image model (stage two).
//!
//! Both models share one rule shape: a weighted implication `seed -> target`
//! penalizing `max{I(seed) - I(target), 0}`. Stage one adds symmetric
//! target-target couplings that pull near-synonymous candidates together,
//! and caps the per-image confidence mass; stage two grounds every image's
//! seeds against the union of surviving targets (unified by concept) under
//! a joint unit cap, which makes the targets compete.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hlmrf::{ground_rule, HlMrfProblem, LinearConstraint};
use crate::kgraph::{ConceptId, KnowledgeStore, SpaceId};

/// Model hyper-parameters. Defaults are the tuned operating point; every
/// field can be overridden from the command line.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaConfig {
    /// Candidate targets kept per image after ranking.
    pub num_targets: usize,
    /// Association-space similarity weight in rule weights.
    pub alpha_cn: f64,
    /// Distributional similarity weight in rule weights.
    pub alpha_w2v: f64,
    /// Maximally-similar partners coupled to each target.
    pub pair_partners: usize,
    /// Combined-similarity gate for seed-target rules.
    pub gate_sim: f64,
    /// Cap on the summed target confidences of one image.
    pub stage1_sum_cap: f64,
    /// Joint cap for the cross-image stage; fixed at 1.
    pub stage2_sum_cap: f64,
    /// Seed-seed similarity threshold for resource-flow edges.
    pub seed_sim_threshold: f64,
    /// Concreteness assumed for unrated concepts (scale midpoint).
    pub concreteness_default: f64,
    /// Stage-one score a target needs to reach stage two.
    pub survivor_threshold: f64,
    /// Per-image cap on stage-two candidates.
    pub survivor_cap: usize,
    /// Association-space pool size for retrieval.
    pub retrieve_pool: usize,
    /// Targets kept per seed after the visual rerank.
    pub retrieve_keep: usize,
    /// Solver tolerance.
    pub tol: f64,
    /// Solver iteration budget.
    pub max_iter: usize,
}

impl Default for ThetaConfig {
    fn default() -> Self {
        ThetaConfig {
            num_targets: 2500,
            alpha_cn: 1.0,
            alpha_w2v: 4.0,
            pair_partners: 1,
            gate_sim: 0.8,
            stage1_sum_cap: 2.0,
            stage2_sum_cap: 1.0,
            seed_sim_threshold: 0.6,
            concreteness_default: 3.0,
            survivor_threshold: 0.01,
            survivor_cap: 100,
            retrieve_pool: 10_000,
            retrieve_keep: 10_000,
            tol: 1e-4,
            max_iter: 20_000,
        }
    }
}

impl ThetaConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::InvalidConfig { reason });
        if self.alpha_cn < 0.0 || self.alpha_w2v < 0.0 || self.alpha_cn + self.alpha_w2v <= 0.0 {
            return fail(format!(
                "similarity weights must be nonnegative with a positive sum, got {} and {}",
                self.alpha_cn, self.alpha_w2v
            ));
        }
        if !(0.0..=1.0).contains(&self.gate_sim) {
            return fail(format!("gate_sim {} outside [0, 1]", self.gate_sim));
        }
        if self.stage1_sum_cap != 1.0 && self.stage1_sum_cap != 2.0 {
            return fail(format!(
                "stage1_sum_cap must be 1 or 2, got {}",
                self.stage1_sum_cap
            ));
        }
        if self.stage2_sum_cap != 1.0 {
            return fail(format!(
                "stage2_sum_cap is fixed at 1, got {}",
                self.stage2_sum_cap
            ));
        }
        if !(0.0..=1.0).contains(&self.seed_sim_threshold) {
            return fail(format!(
                "seed_sim_threshold {} outside [0, 1]",
                self.seed_sim_threshold
            ));
        }
        if !(1.0..=5.0).contains(&self.concreteness_default) {
            return fail(format!(
                "concreteness_default {} outside [1, 5]",
                self.concreteness_default
            ));
        }
        if !(0.0..=1.0).contains(&self.survivor_threshold) {
            return fail(format!(
                "survivor_threshold {} outside [0, 1]",
                self.survivor_threshold
            ));
        }
        if self.num_targets == 0 || self.survivor_cap == 0 {
            return fail("num_targets and survivor_cap must be at least 1".to_string());
        }
        if self.retrieve_keep == 0 || self.retrieve_pool < self.retrieve_keep {
            return fail(format!(
                "retrieval sizes must satisfy pool >= keep >= 1, got {} and {}",
                self.retrieve_pool, self.retrieve_keep
            ));
        }
        if self.tol <= 0.0 || self.max_iter == 0 {
            return fail(format!(
                "solver parameters must be positive, got tol {} and max_iter {}",
                self.tol, self.max_iter
            ));
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| Error::InvalidConfig {
                reason: format!("bad value {value:?} for theta key {key:?}"),
            })
        }
        match key {
            "num_targets" => self.num_targets = parse(key, value)?,
            "alpha_cn" => self.alpha_cn = parse(key, value)?,
            "alpha_w2v" => self.alpha_w2v = parse(key, value)?,
            "pair_partners" => self.pair_partners = parse(key, value)?,
            "gate_sim" => self.gate_sim = parse(key, value)?,
            "stage1_sum_cap" => self.stage1_sum_cap = parse(key, value)?,
            "stage2_sum_cap" => self.stage2_sum_cap = parse(key, value)?,
            "seed_sim_threshold" => self.seed_sim_threshold = parse(key, value)?,
            "concreteness_default" => self.concreteness_default = parse(key, value)?,
            "survivor_threshold" => self.survivor_threshold = parse(key, value)?,
            "survivor_cap" => self.survivor_cap = parse(key, value)?,
            "retrieve_pool" => self.retrieve_pool = parse(key, value)?,
            "retrieve_keep" => self.retrieve_keep = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            other => {
                return Err(Error::InvalidConfig {
                    reason: format!(
                        "unknown theta key {other:?}; known: num_targets, alpha_cn, alpha_w2v, \
                         pair_partners, gate_sim, stage1_sum_cap, stage2_sum_cap, \
                         seed_sim_threshold, concreteness_default, survivor_threshold, \
                         survivor_cap, retrieve_pool, retrieve_keep, tol, max_iter"
                    ),
                })
            }
        }
        Ok(())
    }
}

/// Detected labels of one image with their confidences.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    pub image_id: usize,
    pub classifier_tag: String,
    pub seeds: Vec<(ConceptId, f64)>,
}

impl SeedSet {
    pub fn new(
        image_id: usize,
        classifier_tag: impl Into<String>,
        seeds: Vec<(ConceptId, f64)>,
    ) -> Result<Self> {
        if seeds.is_empty() {
            return Err(Error::InvalidRiddle {
                reason: format!("image {image_id} has no seeds"),
            });
        }
        let mut unique: Vec<ConceptId> = seeds.iter().map(|(c, _)| *c).collect();
        unique.sort();
        unique.dedup();
        if unique.len() != seeds.len() {
            return Err(Error::InvalidRiddle {
                reason: format!("image {image_id} has duplicate seeds"),
            });
        }
        if seeds.iter().any(|&(_, w)| !(0.0..=1.0).contains(&w)) {
            return Err(Error::InvalidRiddle {
                reason: format!("image {image_id} has a confidence outside [0, 1]"),
            });
        }
        Ok(SeedSet {
            image_id,
            classifier_tag: classifier_tag.into(),
            seeds,
        })
    }

    pub fn confidences(&self) -> Vec<f64> {
        self.seeds.iter().map(|&(_, w)| w).collect()
    }
}

/// Ranked candidate targets of one image, with the seed-by-target visual
/// similarity matrix used to rank them.
#[derive(Debug, Clone)]
pub struct TargetCandidateSet {
    pub image_id: usize,
    pub targets: Vec<ConceptId>,
    /// `sim_matrix[s][t]`: visual similarity of seed `s` to target `t`.
    pub sim_matrix: Vec<Vec<f64>>,
}

/// Kind of a grounded rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    SeedTarget,
    TargetTarget,
}

/// One grounded implication, kept for inspection and grounding statistics.
#[derive(Debug, Clone)]
pub struct GroundRuleSpec {
    pub kind: RuleKind,
    pub weight: f64,
    /// Variable ids `(body, head)`.
    pub endpoints: (usize, usize),
}

/// A grounded stage problem plus the variable maps needed to read the
/// solution back out.
#[derive(Debug)]
pub struct GroundedStage {
    pub problem: HlMrfProblem,
    /// `(image_id, concept, var)` for every seed occurrence.
    pub seed_vars: Vec<(usize, ConceptId, usize)>,
    /// `(concept, var)` for every free target, ascending by concept.
    pub target_vars: Vec<(ConceptId, usize)>,
    pub rules: Vec<GroundRuleSpec>,
}

/// Weight of a seed-to-target rule: similarity evidence from both spaces
/// plus an inverse-centrality penalty that disfavors over-connected targets.
/// Strictly positive (centrality is capped at 1).
pub fn rule_weight(
    seed: ConceptId,
    target: ConceptId,
    store: &KnowledgeStore,
    theta: &ThetaConfig,
) -> f64 {
    theta.alpha_cn * store.similarity(SpaceId::Cn, seed, target)
        + theta.alpha_w2v * store.similarity(SpaceId::W2v, seed, target)
        + 1.0 / store.centrality(target)
}

/// Weight of a target-target coupling: same evidence, no popularity penalty.
pub fn pair_weight(
    a: ConceptId,
    b: ConceptId,
    store: &KnowledgeStore,
    theta: &ThetaConfig,
) -> f64 {
    theta.alpha_cn * store.similarity(SpaceId::Cn, a, b)
        + theta.alpha_w2v * store.similarity(SpaceId::W2v, a, b)
}

/// Whether a seed-target pair passes the combined-similarity gate: the
/// alpha-weighted mean of the two similarities must reach `gate_sim`.
pub fn gate(
    seed: ConceptId,
    target: ConceptId,
    store: &KnowledgeStore,
    theta: &ThetaConfig,
) -> bool {
    let combined = theta.alpha_cn * store.similarity(SpaceId::Cn, seed, target)
        + theta.alpha_w2v * store.similarity(SpaceId::W2v, seed, target);
    combined / (theta.alpha_cn + theta.alpha_w2v) >= theta.gate_sim
}

/// Grounds the per-image model: seeds are evidence, targets free; gated
/// seed-target rules, symmetric couplings of each target to its
/// `pair_partners` most-similar targets, one cap on the target sum.
pub fn build_stage1(
    seedset: &SeedSet,
    candidates: &TargetCandidateSet,
    store: &KnowledgeStore,
    theta: &ThetaConfig,
) -> Result<GroundedStage> {
    if candidates.targets.is_empty() {
        return Err(Error::InvalidRiddle {
            reason: format!("image {} has no candidate targets", candidates.image_id),
        });
    }
    let num_seeds = seedset.seeds.len();
    let num_targets = candidates.targets.len();
    let mut problem = HlMrfProblem::new(num_seeds + num_targets);

    let mut seed_vars = Vec::with_capacity(num_seeds);
    for (i, &(concept, confidence)) in seedset.seeds.iter().enumerate() {
        problem.set_evidence(i, confidence)?;
        seed_vars.push((seedset.image_id, concept, i));
    }
    let target_vars: Vec<(ConceptId, usize)> = candidates
        .targets
        .iter()
        .enumerate()
        .map(|(j, &concept)| (concept, num_seeds + j))
        .collect();

    let mut rules = Vec::new();
    for &(_, seed, seed_var) in &seed_vars {
        for &(target, target_var) in &target_vars {
            if !gate(seed, target, store, theta) {
                continue;
            }
            let weight = rule_weight(seed, target, store, theta);
            problem.add_term(ground_rule(weight, &[seed_var], &[target_var])?)?;
            rules.push(GroundRuleSpec {
                kind: RuleKind::SeedTarget,
                weight,
                endpoints: (seed_var, target_var),
            });
        }
    }

    for &(target, target_var) in &target_vars {
        let mut partners: Vec<(ConceptId, usize, f64)> = target_vars
            .iter()
            .filter(|&&(other, _)| other != target)
            .map(|&(other, var)| (other, var, pair_weight(target, other, store, theta)))
            .collect();
        partners.sort_by(|(ida, _, wa), (idb, _, wb)| wb.total_cmp(wa).then(ida.cmp(idb)));
        for &(_, partner_var, weight) in partners.iter().take(theta.pair_partners) {
            for (body, head) in [(target_var, partner_var), (partner_var, target_var)] {
                problem.add_term(ground_rule(weight, &[body], &[head])?)?;
                rules.push(GroundRuleSpec {
                    kind: RuleKind::TargetTarget,
                    weight,
                    endpoints: (body, head),
                });
            }
        }
    }

    let cap_coeffs: Vec<(usize, f64)> = target_vars.iter().map(|&(_, var)| (var, 1.0)).collect();
    problem.add_constraint(LinearConstraint::leq(cap_coeffs, theta.stage1_sum_cap))?;

    Ok(GroundedStage {
        problem,
        seed_vars,
        target_vars,
        rules,
    })
}

/// Surviving targets of one image, with their stage-one scores.
#[derive(Debug, Clone)]
pub struct InferredTargets {
    pub image_id: usize,
    pub targets: Vec<(ConceptId, f64)>,
}

/// Grounds the joint model: every image's seeds (evidence) against the
/// union of surviving targets. Targets shared across images unify into one
/// variable by concept identity; a single cap of `stage2_sum_cap` makes
/// them compete.
pub fn build_stage2(
    inferred: &[InferredTargets],
    seedsets: &[SeedSet],
    store: &KnowledgeStore,
    theta: &ThetaConfig,
) -> Result<GroundedStage> {
    let unified: BTreeSet<ConceptId> = inferred
        .iter()
        .flat_map(|set| set.targets.iter().map(|&(c, _)| c))
        .collect();
    if unified.is_empty() {
        return Err(Error::NoInferredTargets);
    }

    let num_seeds: usize = seedsets.iter().map(|s| s.seeds.len()).sum();
    let mut problem = HlMrfProblem::new(num_seeds + unified.len());

    let mut seed_vars = Vec::with_capacity(num_seeds);
    let mut var = 0;
    for seedset in seedsets {
        for &(concept, confidence) in &seedset.seeds {
            problem.set_evidence(var, confidence)?;
            seed_vars.push((seedset.image_id, concept, var));
            var += 1;
        }
    }
    let target_vars: Vec<(ConceptId, usize)> = unified
        .into_iter()
        .enumerate()
        .map(|(j, concept)| (concept, num_seeds + j))
        .collect();

    let mut rules = Vec::new();
    for &(_, seed, seed_var) in &seed_vars {
        for &(target, target_var) in &target_vars {
            if !gate(seed, target, store, theta) {
                continue;
            }
            let weight = rule_weight(seed, target, store, theta);
            problem.add_term(ground_rule(weight, &[seed_var], &[target_var])?)?;
            rules.push(GroundRuleSpec {
                kind: RuleKind::SeedTarget,
                weight,
                endpoints: (seed_var, target_var),
            });
        }
    }

    let cap_coeffs: Vec<(usize, f64)> = target_vars.iter().map(|&(_, var)| (var, 1.0)).collect();
    problem.add_constraint(LinearConstraint::leq(cap_coeffs, theta.stage2_sum_cap))?;

    Ok(GroundedStage {
        problem,
        seed_vars,
        target_vars,
        rules,
    })
}

#[cfg(test)]
mod tests;

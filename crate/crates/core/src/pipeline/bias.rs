//! Bias correction of the detected seed weights, in three interchangeable
//! variants:
//!
//! - `ur`: plain per-image normalization.
//! - `gur`: cross-image greedy reweighting — a seed gains weight when its
//!   similarity pattern to every image's seeds matches those images'
//!   confidence patterns.
//! - `bur`: specificity-driven resource flow — confidence mass flows from
//!   abstract over-connected seeds toward similar but more specific ones,
//!   via a small linear program solved by the same MAP solver.

use crate::error::{Error, Result};
use crate::hlmrf::{ground_rule, HlMrfProblem, LinearConstraint, MapSolver};
use crate::kgraph::{cosine_similarity, ConceptId, KnowledgeStore, SpaceId};
use crate::rules::{SeedSet, ThetaConfig};

use super::Riddle;

/// A seed-reweighting strategy. `solver` is only exercised by variants
/// that solve an optimization problem to redistribute mass.
pub trait BiasCorrection: Send + Sync {
    fn name(&self) -> &'static str;

    fn reweight(
        &self,
        riddle: &Riddle,
        store: &KnowledgeStore,
        theta: &ThetaConfig,
        solver: &dyn MapSolver,
    ) -> Result<Riddle>;
}

fn normalized(seeds: &[(ConceptId, f64)]) -> Result<Vec<(ConceptId, f64)>> {
    let total: f64 = seeds.iter().map(|&(_, w)| w).sum();
    if total <= 0.0 {
        return Err(Error::ZeroConfidenceMass);
    }
    Ok(seeds.iter().map(|&(c, w)| (c, w / total)).collect())
}

/// Divides each confidence by the image's total; the output sums to 1.
pub fn reweight_ur(seedset: &SeedSet) -> Result<SeedSet> {
    SeedSet::new(
        seedset.image_id,
        seedset.classifier_tag.clone(),
        normalized(&seedset.seeds)?,
    )
}

/// Cross-image greedy reweighting. For seed `s` of any image, and each
/// image `j`: the similarity vector of `s` against image `j`'s seeds is
/// compared (by cosine) to image `j`'s confidence vector; the new weight is
/// the mean of those cosines over all images, then normalized per image.
/// A zero-norm side contributes cosine 0.
pub fn reweight_gur(riddle: &Riddle, store: &KnowledgeStore) -> Result<Riddle> {
    let confidences: Vec<Vec<f64>> = riddle.images.iter().map(|s| s.confidences()).collect();
    let mut images = Vec::with_capacity(riddle.images.len());
    for seedset in &riddle.images {
        let mut reweighted = Vec::with_capacity(seedset.seeds.len());
        for &(seed, _) in &seedset.seeds {
            let mut total = 0.0;
            for (other, other_confidence) in riddle.images.iter().zip(&confidences) {
                let sims: Vec<f64> = other
                    .seeds
                    .iter()
                    .map(|&(other_seed, _)| store.similarity(SpaceId::Cn, seed, other_seed))
                    .collect();
                total += cosine_similarity(&sims, other_confidence).unwrap_or(0.0);
            }
            reweighted.push((seed, total / riddle.images.len() as f64));
        }
        images.push(SeedSet::new(
            seedset.image_id,
            seedset.classifier_tag.clone(),
            normalized(&reweighted)?,
        )?);
    }
    Riddle::new(riddle.id.clone(), images, riddle.groundtruth.clone())
}

/// Specificity scores behind the resource-flow variant.
#[derive(Debug, Clone)]
pub struct BurSeedScore {
    pub concept: ConceptId,
    /// Eigenvector centrality (popularity).
    pub ecs: f64,
    /// Concreteness rating, defaulted for unrated concepts.
    pub cr: f64,
    /// Combined centrality score: mean of min-max-normalized ECS and -CR.
    pub cs: f64,
}

#[derive(Debug, Clone)]
pub struct BurScores {
    pub per_seed: Vec<BurSeedScore>,
}

/// Min-max normalization to [0, 1]; a constant column maps to 0.5.
fn min_max(values: &[f64]) -> Vec<f64> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max - min <= 0.0 {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - min) / (max - min)).collect()
}

/// Resource-flow reweighting of one image.
///
/// Seeds are ordered by decreasing combined centrality (abstract first).
/// Scanning that order, each seed links from its predecessor when their
/// association similarity exceeds the threshold, otherwise from the
/// nearest earlier seed that does exceed it. Mass then flows along edges:
/// minimize the summed flow violations `max{w_u - w_v, 0}` subject to
/// total mass conservation, untouched seeds pinned, and every graph seed
/// keeping at least half its confidence. The same MAP solver handles the
/// program; weights are normalized afterwards.
pub fn reweight_bur(
    seedset: &SeedSet,
    store: &KnowledgeStore,
    theta: &ThetaConfig,
    solver: &dyn MapSolver,
) -> Result<(SeedSet, BurScores)> {
    let n = seedset.seeds.len();
    let confidences = seedset.confidences();
    let total: f64 = confidences.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroConfidenceMass);
    }

    let ecs: Vec<f64> = seedset
        .seeds
        .iter()
        .map(|&(c, _)| store.centrality(c))
        .collect();
    let cr: Vec<f64> = seedset
        .seeds
        .iter()
        .map(|&(c, _)| store.concreteness(c).unwrap_or(theta.concreteness_default))
        .collect();
    let neg_cr: Vec<f64> = cr.iter().map(|v| -v).collect();
    let ecs_norm = min_max(&ecs);
    let cr_norm = min_max(&neg_cr);
    let cs: Vec<f64> = ecs_norm
        .iter()
        .zip(&cr_norm)
        .map(|(a, b)| (a + b) / 2.0)
        .collect();
    let scores = BurScores {
        per_seed: seedset
            .seeds
            .iter()
            .enumerate()
            .map(|(i, &(concept, _))| BurSeedScore {
                concept,
                ecs: ecs[i],
                cr: cr[i],
                cs: cs[i],
            })
            .collect(),
    };

    // Scan order: decreasing CS, ties by ascending concept id.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        cs[b].total_cmp(&cs[a])
            .then(seedset.seeds[a].0.cmp(&seedset.seeds[b].0))
    });

    let sim = |a: usize, b: usize| {
        store.similarity(SpaceId::Cn, seedset.seeds[a].0, seedset.seeds[b].0)
    };
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for pos in 1..n {
        let v = order[pos];
        let u = order[pos - 1];
        if sim(u, v) > theta.seed_sim_threshold {
            edges.push((u, v));
        } else {
            for q in (0..pos.saturating_sub(1)).rev() {
                let candidate = order[q];
                if sim(candidate, v) > theta.seed_sim_threshold {
                    edges.push((candidate, v));
                    break;
                }
            }
        }
    }

    let mut in_graph = vec![false; n];
    for &(u, v) in &edges {
        in_graph[u] = true;
        in_graph[v] = true;
    }

    // Seeds outside the graph are pinned to their confidence, which the
    // grounding treats as evidence; with no edges at all this returns the
    // input exactly.
    let mut problem = HlMrfProblem::new(n);
    for i in 0..n {
        if !in_graph[i] {
            problem.set_evidence(i, confidences[i])?;
        }
    }
    for &(u, v) in &edges {
        problem.add_term(ground_rule(1.0, &[u], &[v])?)?;
    }
    let mass_coeffs: Vec<(usize, f64)> = (0..n).map(|i| (i, 1.0)).collect();
    problem.add_constraint(LinearConstraint::equality(mass_coeffs, total))?;
    for i in 0..n {
        if in_graph[i] {
            problem.add_constraint(LinearConstraint::leq(
                vec![(i, -1.0)],
                -0.5 * confidences[i],
            ))?;
        }
    }

    let assignment = solver.solve(&problem, theta.tol, theta.max_iter)?;
    let reweighted: Vec<(ConceptId, f64)> = seedset
        .seeds
        .iter()
        .enumerate()
        .map(|(i, &(c, _))| (c, assignment.value(i)))
        .collect();
    let seedset = SeedSet::new(
        seedset.image_id,
        seedset.classifier_tag.clone(),
        normalized(&reweighted)?,
    )?;
    Ok((seedset, scores))
}

/// Plain normalization.
pub struct Ur;

impl BiasCorrection for Ur {
    fn name(&self) -> &'static str {
        "ur"
    }

    fn reweight(
        &self,
        riddle: &Riddle,
        _store: &KnowledgeStore,
        _theta: &ThetaConfig,
        _solver: &dyn MapSolver,
    ) -> Result<Riddle> {
        let images = riddle
            .images
            .iter()
            .map(reweight_ur)
            .collect::<Result<Vec<_>>>()?;
        Riddle::new(riddle.id.clone(), images, riddle.groundtruth.clone())
    }
}

/// Cross-image greedy reweighting.
pub struct Gur;

impl BiasCorrection for Gur {
    fn name(&self) -> &'static str {
        "gur"
    }

    fn reweight(
        &self,
        riddle: &Riddle,
        store: &KnowledgeStore,
        _theta: &ThetaConfig,
        _solver: &dyn MapSolver,
    ) -> Result<Riddle> {
        reweight_gur(riddle, store)
    }
}

/// Specificity resource flow.
pub struct Bur;

impl BiasCorrection for Bur {
    fn name(&self) -> &'static str {
        "bur"
    }

    fn reweight(
        &self,
        riddle: &Riddle,
        store: &KnowledgeStore,
        theta: &ThetaConfig,
        solver: &dyn MapSolver,
    ) -> Result<Riddle> {
        let images = riddle
            .images
            .iter()
            .map(|seedset| reweight_bur(seedset, store, theta, solver).map(|(s, _)| s))
            .collect::<Result<Vec<_>>>()?;
        Riddle::new(riddle.id.clone(), images, riddle.groundtruth.clone())
    }
}

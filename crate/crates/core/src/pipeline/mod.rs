//! End-to-end riddle solving.
//!
//! A riddle is four images, each a set of detected labels with confidences.
//! Solving runs: bias correction of the seed weights, per-seed candidate
//! retrieval, per-image candidate ranking, the per-image inference stage,
//! and the joint cross-image stage whose scores rank the final answers.
//!
//! The bias-correction variants live in [`bias`]; the stage cuts (centroid
//! baseline, retrieval-only, full inference) in [`stage`].

mod bias;
mod stage;

pub use bias::{
    reweight_bur, reweight_gur, reweight_ur, BiasCorrection, Bur, BurScores, BurSeedScore, Gur,
    Ur,
};
pub use stage::{AllCut, RrCut, StageCut, VbCut};

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::hlmrf::MapSolver;
use crate::kgraph::{cosine_similarity, ConceptId, KnowledgeStore};
use crate::rules::{
    build_stage1, build_stage2, InferredTargets, SeedSet, TargetCandidateSet, ThetaConfig,
};
use crate::vissim::{build_seed_profile, retrieve_targets, visual_similarity_against};

/// Four images and an optional groundtruth, ready for solving.
#[derive(Debug, Clone)]
pub struct Riddle {
    pub id: String,
    pub images: Vec<SeedSet>,
    pub groundtruth: Vec<String>,
}

pub const IMAGES_PER_RIDDLE: usize = 4;

impl Riddle {
    pub fn new(id: impl Into<String>, images: Vec<SeedSet>, groundtruth: Vec<String>) -> Result<Self> {
        if images.len() != IMAGES_PER_RIDDLE {
            return Err(Error::InvalidRiddle {
                reason: format!("expected {IMAGES_PER_RIDDLE} images, got {}", images.len()),
            });
        }
        Ok(Riddle {
            id: id.into(),
            images,
            groundtruth,
        })
    }
}

/// A token dropped or adjusted during ingestion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestWarning {
    pub image_id: usize,
    pub label: String,
    pub reason: &'static str,
}

#[derive(Deserialize)]
struct RiddleFile {
    id: String,
    #[serde(default)]
    groundtruth: Vec<String>,
    images: Vec<ImageFile>,
}

#[derive(Deserialize)]
struct ImageFile {
    #[serde(default)]
    classifier_tag: String,
    detections: Vec<DetectionFile>,
}

#[derive(Deserialize)]
struct DetectionFile {
    label: String,
    confidence: f64,
}

/// Parses a riddle file: JSON with `id`, optional `groundtruth` token list,
/// and exactly four `images`, each carrying `classifier_tag` and
/// `detections` of `{label, confidence}`.
///
/// Labels that do not resolve against the store are dropped with a warning,
/// as are repeats of an already-seen label; confidences are clamped to
/// `[0, 1]`. An image left with no resolvable seed is an error.
pub fn ingest_riddle(
    path: &Path,
    store: &KnowledgeStore,
) -> Result<(Riddle, Vec<IngestWarning>)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: RiddleFile = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_parsed(file, store)
}

/// [`ingest_riddle`] over an in-memory JSON string.
pub fn ingest_riddle_str(
    text: &str,
    store: &KnowledgeStore,
) -> Result<(Riddle, Vec<IngestWarning>)> {
    let file: RiddleFile = serde_json::from_str(text).map_err(|source| Error::Json {
        path: "<inline>".into(),
        source,
    })?;
    ingest_parsed(file, store)
}

fn ingest_parsed(file: RiddleFile, store: &KnowledgeStore) -> Result<(Riddle, Vec<IngestWarning>)> {
    if file.images.len() != IMAGES_PER_RIDDLE {
        return Err(Error::InvalidRiddle {
            reason: format!(
                "riddle {:?} has {} images, expected {IMAGES_PER_RIDDLE}",
                file.id,
                file.images.len()
            ),
        });
    }
    let mut warnings = Vec::new();
    let mut images = Vec::with_capacity(IMAGES_PER_RIDDLE);
    for (image_id, image) in file.images.into_iter().enumerate() {
        let mut seeds: Vec<(ConceptId, f64)> = Vec::new();
        let mut seen: BTreeMap<ConceptId, ()> = BTreeMap::new();
        for detection in image.detections {
            match store.concept(&detection.label) {
                Some(concept) => {
                    if seen.insert(concept, ()).is_some() {
                        warnings.push(IngestWarning {
                            image_id,
                            label: detection.label,
                            reason: "duplicate label",
                        });
                        continue;
                    }
                    seeds.push((concept, detection.confidence.clamp(0.0, 1.0)));
                }
                None => warnings.push(IngestWarning {
                    image_id,
                    label: detection.label,
                    reason: "out of vocabulary",
                }),
            }
        }
        if seeds.is_empty() {
            return Err(Error::InvalidRiddle {
                reason: format!(
                    "riddle {:?}: image {image_id} has no resolvable seed",
                    file.id
                ),
            });
        }
        images.push(SeedSet::new(image_id, image.classifier_tag, seeds)?);
    }
    Ok((Riddle::new(file.id, images, file.groundtruth)?, warnings))
}

/// Final ranked answers: descending score, ties by ascending concept id.
#[derive(Debug, Clone)]
pub struct AnswerList {
    entries: Vec<(ConceptId, f64)>,
}

impl AnswerList {
    pub fn new(mut entries: Vec<(ConceptId, f64)>) -> Self {
        entries.sort_by(|(ida, sa), (idb, sb)| sb.total_cmp(sa).then(ida.cmp(idb)));
        AnswerList { entries }
    }

    pub fn entries(&self) -> &[(ConceptId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tokens<'s>(&self, store: &'s KnowledgeStore) -> Vec<&'s str> {
        self.entries.iter().map(|&(id, _)| store.token(id)).collect()
    }

    /// `rank<TAB>token<TAB>score` rows, rank starting at 1.
    pub fn to_tsv(&self, store: &KnowledgeStore) -> String {
        let mut out = String::new();
        for (rank, &(id, score)) in self.entries.iter().enumerate() {
            out.push_str(&format!("{}\t{}\t{score:.6}\n", rank + 1, store.token(id)));
        }
        out
    }
}

/// Ranks the union of retrieved targets for one image: each target's score
/// is the cosine of its visual-similarity column (over the image's seeds)
/// against the seed-confidence vector. Targets with an all-zero column are
/// dropped; the top `num_targets` survive.
///
/// `retrieved[i]` holds the `(target, visual similarity)` list of seed `i`;
/// entries missing for some seed are filled in from the store.
pub fn rank_targets(
    seedset: &SeedSet,
    retrieved: &[Vec<(ConceptId, f64)>],
    store: &KnowledgeStore,
    theta: &ThetaConfig,
) -> Result<TargetCandidateSet> {
    assert_eq!(retrieved.len(), seedset.seeds.len());
    let confidence: Vec<f64> = seedset.confidences();

    let mut union: BTreeMap<ConceptId, Vec<Option<f64>>> = BTreeMap::new();
    for (i, list) in retrieved.iter().enumerate() {
        for &(target, score) in list {
            union
                .entry(target)
                .or_insert_with(|| vec![None; seedset.seeds.len()])[i] = Some(score);
        }
    }
    if union.is_empty() {
        return Ok(TargetCandidateSet {
            image_id: seedset.image_id,
            targets: vec![],
            sim_matrix: vec![vec![]; seedset.seeds.len()],
        });
    }

    let profiles: Vec<_> = seedset
        .seeds
        .iter()
        .map(|&(seed, _)| build_seed_profile(seed, store))
        .collect();

    let mut scored: Vec<(ConceptId, f64, Vec<f64>)> = Vec::with_capacity(union.len());
    for (target, cached) in union {
        let column: Vec<f64> = cached
            .iter()
            .enumerate()
            .map(|(i, entry)| {
                entry.unwrap_or_else(|| visual_similarity_against(&profiles[i], target, store))
            })
            .collect();
        if column.iter().all(|&v| v == 0.0) {
            continue;
        }
        match cosine_similarity(&column, &confidence) {
            Ok(score) => scored.push((target, score, column)),
            // Zero-norm confidence vector cannot rank anything.
            Err(_) => continue,
        }
    }
    scored.sort_by(|(ida, sa, _), (idb, sb, _)| sb.total_cmp(sa).then(ida.cmp(idb)));
    scored.truncate(theta.num_targets);

    let targets: Vec<ConceptId> = scored.iter().map(|(id, _, _)| *id).collect();
    let mut sim_matrix = vec![vec![0.0; targets.len()]; seedset.seeds.len()];
    for (j, (_, _, column)) in scored.iter().enumerate() {
        for (i, &value) in column.iter().enumerate() {
            sim_matrix[i][j] = value;
        }
    }
    Ok(TargetCandidateSet {
        image_id: seedset.image_id,
        targets,
        sim_matrix,
    })
}

/// Rank scores of a candidate set, aligned with `candidates.targets`,
/// recomputed the same way [`rank_targets`] scored them.
fn rank_scores(candidates: &TargetCandidateSet, confidence: &[f64]) -> Vec<f64> {
    (0..candidates.targets.len())
        .map(|j| {
            let column: Vec<f64> = (0..confidence.len())
                .map(|i| candidates.sim_matrix[i][j])
                .collect();
            cosine_similarity(&column, confidence).unwrap_or(0.0)
        })
        .collect()
}

/// Retrieval and ranking for one image: per-seed association-space pools
/// reranked by visual similarity, merged and ranked against the confidence
/// vector.
pub fn retrieve_and_rank(
    seedset: &SeedSet,
    store: &KnowledgeStore,
    theta: &ThetaConfig,
) -> Result<TargetCandidateSet> {
    let available = store.len().saturating_sub(1);
    if available == 0 {
        return Ok(TargetCandidateSet {
            image_id: seedset.image_id,
            targets: vec![],
            sim_matrix: vec![vec![]; seedset.seeds.len()],
        });
    }
    let pool = theta.retrieve_pool.min(available).max(1);
    let keep = theta.retrieve_keep.min(pool);
    let retrieved: Vec<Vec<(ConceptId, f64)>> = seedset
        .seeds
        .iter()
        .map(|&(seed, _)| retrieve_targets(seed, store, pool, keep))
        .collect::<Result<_>>()?;
    rank_targets(seedset, &retrieved, store, theta)
}

/// Everything observable about one image's pass through the pipeline.
#[derive(Debug, Clone)]
pub struct ImageTrace {
    pub image_id: usize,
    pub reweighted_seeds: Vec<(ConceptId, f64)>,
    /// Ranked candidates with their ranking score.
    pub ranked_targets: Vec<(ConceptId, f64)>,
    /// Solved per-image scores, aligned with the candidate order.
    pub stage1_scores: Vec<(ConceptId, f64)>,
    /// Targets advancing to the joint stage, with stage-one scores.
    pub survivors: Vec<(ConceptId, f64)>,
    pub term_count: usize,
    pub constraint_count: usize,
}

/// A solved riddle: the final answers plus per-stage traces.
#[derive(Debug, Clone)]
pub struct RiddleSolution {
    pub riddle_id: String,
    pub classifier_tag: String,
    pub answers: AnswerList,
    pub images: Vec<ImageTrace>,
    pub stage2_term_count: usize,
    pub stage2_target_count: usize,
}

/// Runs the full pipeline on an already bias-corrected riddle.
pub fn solve_prepared(
    riddle: &Riddle,
    store: &KnowledgeStore,
    theta: &ThetaConfig,
    solver: &dyn MapSolver,
    classifier_tag: &str,
) -> Result<RiddleSolution> {
    let mut traces = Vec::with_capacity(riddle.images.len());
    let mut inferred = Vec::with_capacity(riddle.images.len());
    for seedset in &riddle.images {
        let candidates = retrieve_and_rank(seedset, store, theta)?;
        if candidates.targets.is_empty() {
            // No stage-one problem; the image's seeds still reach stage two.
            traces.push(ImageTrace {
                image_id: seedset.image_id,
                reweighted_seeds: seedset.seeds.clone(),
                ranked_targets: vec![],
                stage1_scores: vec![],
                survivors: vec![],
                term_count: 0,
                constraint_count: 0,
            });
            inferred.push(InferredTargets {
                image_id: seedset.image_id,
                targets: vec![],
            });
            continue;
        }

        let scores = rank_scores(&candidates, &seedset.confidences());
        let stage = build_stage1(seedset, &candidates, store, theta)?;
        let assignment = solver.solve(&stage.problem, theta.tol, theta.max_iter)?;
        let stage1_scores: Vec<(ConceptId, f64)> = stage
            .target_vars
            .iter()
            .map(|&(concept, var)| (concept, assignment.value(var)))
            .collect();

        let mut survivors: Vec<(ConceptId, f64)> = stage1_scores
            .iter()
            .filter(|&&(_, score)| score > theta.survivor_threshold)
            .copied()
            .collect();
        survivors.sort_by(|(ida, sa), (idb, sb)| sb.total_cmp(sa).then(ida.cmp(idb)));
        survivors.truncate(theta.survivor_cap);

        traces.push(ImageTrace {
            image_id: seedset.image_id,
            reweighted_seeds: seedset.seeds.clone(),
            ranked_targets: candidates
                .targets
                .iter()
                .zip(&scores)
                .map(|(&c, &s)| (c, s))
                .collect(),
            stage1_scores,
            survivors: survivors.clone(),
            term_count: stage.problem.terms().len(),
            constraint_count: stage.problem.constraints().len(),
        });
        inferred.push(InferredTargets {
            image_id: seedset.image_id,
            targets: survivors,
        });
    }

    let stage2 = build_stage2(&inferred, &riddle.images, store, theta)?;
    let assignment = solver.solve(&stage2.problem, theta.tol, theta.max_iter)?;
    let answers = AnswerList::new(
        stage2
            .target_vars
            .iter()
            .map(|&(concept, var)| (concept, assignment.value(var)))
            .collect(),
    );

    Ok(RiddleSolution {
        riddle_id: riddle.id.clone(),
        classifier_tag: classifier_tag.to_string(),
        answers,
        images: traces,
        stage2_term_count: stage2.problem.terms().len(),
        stage2_target_count: stage2.target_vars.len(),
    })
}

/// The full procedure: bias-correct with `variant`, then retrieve, rank,
/// and run both inference stages. `classifier_tag` is a label recorded on
/// the solution, not a behavior switch.
pub fn solve_riddle(
    riddle: &Riddle,
    store: &KnowledgeStore,
    theta: &ThetaConfig,
    variant: &dyn BiasCorrection,
    solver: &dyn MapSolver,
    classifier_tag: &str,
) -> Result<RiddleSolution> {
    theta.validate()?;
    let reweighted = variant.reweight(riddle, store, theta, solver)?;
    solve_prepared(&reweighted, store, theta, solver, classifier_tag)
}

#[cfg(test)]
mod tests;

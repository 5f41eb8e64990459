//! Automatic evaluation and the vision-only baselines.
//!
//! A riddle scores the maximum raw distributional similarity between its
//! groundtruth and any of the top ten answers; dataset accuracy is the mean
//! of those maxima in percentage form. Raw cosine (not the mapped `[0, 1]`
//! similarity) is used throughout so exact matches score 1 and antonymous
//! noise can go negative.

use crate::error::{Error, Result};
use crate::kgraph::{cosine_similarity, map_cosine, normalize_token, ConceptId, KnowledgeStore, SpaceId};
use crate::pipeline::{retrieve_and_rank, AnswerList, Riddle};
use crate::rules::ThetaConfig;

/// How many top answers the metric considers.
pub const SCORED_ANSWERS: usize = 10;

/// Score of one riddle.
#[derive(Debug, Clone)]
pub struct RiddleScore {
    pub riddle_id: String,
    /// Maximum phrase similarity over the top answers, in `[-1, 1]`.
    pub max_sim: f64,
    pub best_answer: String,
}

/// Expands a phrase for lookup: the normalized whole token when it is in
/// vocabulary, otherwise its underscore-separated parts.
pub fn phrase_tokens(store: &KnowledgeStore, phrase: &str) -> Vec<String> {
    let normalized = normalize_token(phrase);
    if store.concept(&normalized).is_some() || !normalized.contains('_') {
        vec![normalized]
    } else {
        normalized.split('_').map(str::to_string).collect()
    }
}

fn any_in_vocab(store: &KnowledgeStore, tokens: &[String]) -> bool {
    tokens.iter().any(|t| store.concept(t).is_some())
}

/// Scores a riddle: the maximum phrase similarity between the groundtruth
/// and the top [`SCORED_ANSWERS`] answer tokens. An answer with no
/// in-vocabulary token contributes -1 rather than failing the riddle; a
/// groundtruth with no in-vocabulary token excludes the riddle.
pub fn score_riddle(
    riddle_id: &str,
    answer_tokens: &[String],
    groundtruth: &[String],
    store: &KnowledgeStore,
) -> Result<RiddleScore> {
    let gt_tokens: Vec<String> = groundtruth
        .iter()
        .flat_map(|p| phrase_tokens(store, p))
        .collect();
    if !any_in_vocab(store, &gt_tokens) {
        return Err(Error::GroundtruthOov { tokens: gt_tokens });
    }
    if answer_tokens.is_empty() {
        return Err(Error::InvalidRiddle {
            reason: format!("riddle {riddle_id:?} has no answers to score"),
        });
    }

    let mut max_sim = f64::NEG_INFINITY;
    let mut best_answer = String::new();
    for answer in answer_tokens.iter().take(SCORED_ANSWERS) {
        let tokens = phrase_tokens(store, answer);
        let sim = if any_in_vocab(store, &tokens) {
            store.phrase_similarity(SpaceId::W2v, &tokens, &gt_tokens)?
        } else {
            -1.0
        };
        if sim > max_sim {
            max_sim = sim;
            best_answer = answer.clone();
        }
    }
    Ok(RiddleScore {
        riddle_id: riddle_id.to_string(),
        max_sim,
        best_answer,
    })
}

/// Mean of the per-riddle maxima, in percentage form. Excluded riddles are
/// simply absent from `scores`; an empty slice is an error.
pub fn dataset_accuracy(scores: &[RiddleScore]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::NoScoredRiddles);
    }
    Ok(100.0 * scores.iter().map(|s| s.max_sim).sum::<f64>() / scores.len() as f64)
}

/// Renders the evaluation report: one `riddle_id<TAB>max_sim<TAB>best_answer`
/// row per scored riddle plus a trailing `TOTAL<TAB>accuracy` row.
pub fn render_report(scores: &[RiddleScore], accuracy: f64) -> String {
    let mut out = String::new();
    for score in scores {
        out.push_str(&format!(
            "{}\t{:.6}\t{}\n",
            score.riddle_id, score.max_sim, score.best_answer
        ));
    }
    out.push_str(&format!("TOTAL\t{accuracy:.4}\n"));
    out
}

/// Nearest vocabulary concepts to an arbitrary vector, by raw cosine,
/// descending with ties by ascending id.
fn nearest_concepts(
    store: &KnowledgeStore,
    space: SpaceId,
    vector: &[f64],
    k: usize,
) -> Result<Vec<(ConceptId, f64)>> {
    let table = store.space(space);
    let mut scored: Vec<(ConceptId, f64)> = store
        .concepts()
        .map(|c| cosine_similarity(vector, table.vector(c)).map(|cos| (c, cos)))
        .collect::<Result<_>>()?;
    scored.sort_by(|(ida, sa), (idb, sb)| sb.total_cmp(sa).then(ida.cmp(idb)));
    scored.truncate(k);
    Ok(scored)
}

fn weighted_centroid(
    store: &KnowledgeStore,
    space: SpaceId,
    seeds: &[(ConceptId, f64)],
) -> Result<Vec<f64>> {
    let table = store.space(space);
    let mut centroid = vec![0.0; table.dim()];
    let mut mass = 0.0;
    for &(concept, weight) in seeds {
        for (c, v) in centroid.iter_mut().zip(table.vector(concept)) {
            *c += weight * v;
        }
        mass += weight;
    }
    if mass <= 0.0 {
        return Err(Error::ZeroConfidenceMass);
    }
    for c in &mut centroid {
        *c /= mass;
    }
    Ok(centroid)
}

fn mean_of(vectors: &[Vec<f64>]) -> Vec<f64> {
    let dim = vectors[0].len();
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= vectors.len() as f64;
    }
    mean
}

/// Vision-only baseline: per-image weighted centroid of the seeds'
/// distributional vectors, mean of the four centroids, top ten nearest
/// vocabulary concepts. Scores are the mapped cosines.
pub fn baseline_vb(riddle: &Riddle, store: &KnowledgeStore) -> Result<AnswerList> {
    let centroids: Vec<Vec<f64>> = riddle
        .images
        .iter()
        .map(|seedset| weighted_centroid(store, SpaceId::W2v, &seedset.seeds))
        .collect::<Result<_>>()?;
    let mean = mean_of(&centroids);
    let nearest = nearest_concepts(store, SpaceId::W2v, &mean, SCORED_ANSWERS)?;
    Ok(AnswerList::new(
        nearest
            .into_iter()
            .map(|(c, cos)| (c, map_cosine(cos)))
            .collect(),
    ))
}

/// Retrieval-stage baseline: per-image unweighted mean of the ranked
/// candidates' distributional vectors, mean across images, top ten nearest
/// vocabulary concepts.
pub fn baseline_rr(
    riddle: &Riddle,
    store: &KnowledgeStore,
    theta: &ThetaConfig,
) -> Result<AnswerList> {
    let table = store.space(SpaceId::W2v);
    let mut image_means = Vec::new();
    for seedset in &riddle.images {
        let candidates = retrieve_and_rank(seedset, store, theta)?;
        if candidates.targets.is_empty() {
            continue;
        }
        let vectors: Vec<Vec<f64>> = candidates
            .targets
            .iter()
            .map(|&c| table.vector(c).to_vec())
            .collect();
        image_means.push(mean_of(&vectors));
    }
    if image_means.is_empty() {
        return Err(Error::NoInferredTargets);
    }
    let mean = mean_of(&image_means);
    let nearest = nearest_concepts(store, SpaceId::W2v, &mean, SCORED_ANSWERS)?;
    Ok(AnswerList::new(
        nearest
            .into_iter()
            .map(|(c, cos)| (c, map_cosine(cos)))
            .collect(),
    ))
}

#[cfg(test)]
mod tests;

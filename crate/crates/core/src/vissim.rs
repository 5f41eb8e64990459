//! Relation-profile visual similarity.
//!
//! Association-space similarity alone ranks oddities highly for concrete
//! object words. The visual metric instead represents a seed by its
//! qualifying relational assertions: every `(relation, word)` pair under
//! HasA, HasProperty, PartOf or MemberOf — for the seed and its one-hop
//! IsA superclasses — becomes a dimension, valued by the assertion weight.
//! Targets are laid out on the seed's dimensions and compared by mapped
//! cosine. Candidate retrieval ranks an association-space pool by this
//! metric.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kgraph::{cosine_similarity, map_cosine, ConceptId, KnowledgeStore, Relation, SpaceId};

/// Relations whose assertions define profile dimensions.
pub const PROFILE_RELATIONS: [Relation; 4] = [
    Relation::HasA,
    Relation::HasProperty,
    Relation::PartOf,
    Relation::MemberOf,
];

/// Sparse relational vector: aligned `dims` and `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationProfile {
    pub owner: ConceptId,
    pub dims: Vec<(Relation, ConceptId)>,
    pub values: Vec<f64>,
}

impl RelationProfile {
    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Builds the profile of a seed: its own qualifying assertions first, then
/// those of its one-hop IsA superclasses (ascending id), first occurrence
/// of a `(relation, word)` dimension wins. An empty profile is legal and
/// marks an abstract seed.
pub fn build_seed_profile(seed: ConceptId, store: &KnowledgeStore) -> RelationProfile {
    let mut owners = vec![seed];
    let mut supers: Vec<ConceptId> = store
        .assertions_from(seed)
        .iter()
        .filter(|a| a.relation == Relation::IsA)
        .map(|a| a.tail)
        .collect();
    supers.sort();
    supers.dedup();
    owners.extend(supers.into_iter().filter(|&c| c != seed));

    let mut dims = Vec::new();
    let mut values = Vec::new();
    let mut seen: HashMap<(Relation, ConceptId), ()> = HashMap::new();
    for owner in owners {
        for assertion in store.assertions_from(owner) {
            if !PROFILE_RELATIONS.contains(&assertion.relation) {
                continue;
            }
            let dim = (assertion.relation.clone(), assertion.tail);
            if seen.insert(dim.clone(), ()).is_none() {
                dims.push(dim);
                values.push(assertion.weight);
            }
        }
    }
    RelationProfile {
        owner: seed,
        dims,
        values,
    }
}

/// Lays a target out on the dimensions of a seed profile: the value at
/// `(r, w)` is the weight of the assertion `(target, r, w)` when present,
/// zero otherwise.
pub fn build_target_profile(
    target: ConceptId,
    dims: &[(Relation, ConceptId)],
    store: &KnowledgeStore,
) -> RelationProfile {
    let weights: HashMap<(&Relation, ConceptId), f64> = store
        .assertions_from(target)
        .iter()
        .map(|a| ((&a.relation, a.tail), a.weight))
        .collect();
    let values = dims
        .iter()
        .map(|(r, w)| weights.get(&(r, *w)).copied().unwrap_or(0.0))
        .collect();
    RelationProfile {
        owner: target,
        dims: dims.to_vec(),
        values,
    }
}

/// Mapped cosine of the seed and target relation profiles, in `[0, 1]`.
///
/// A seed with no usable profile (no qualifying assertions, or only
/// zero-weight ones) is abstract: association-space similarity is used
/// directly. A nonempty seed profile against an all-zero target vector is
/// zero evidence of visual kinship and scores 0.
pub fn visual_similarity(seed: ConceptId, target: ConceptId, store: &KnowledgeStore) -> f64 {
    let profile = build_seed_profile(seed, store);
    visual_similarity_against(&profile, target, store)
}

/// [`visual_similarity`] with the seed profile prebuilt, for rerank loops.
pub fn visual_similarity_against(
    seed_profile: &RelationProfile,
    target: ConceptId,
    store: &KnowledgeStore,
) -> f64 {
    if seed_profile.is_empty() || seed_profile.norm_sq() == 0.0 {
        return store.similarity(SpaceId::Cn, seed_profile.owner, target);
    }
    let target_profile = build_target_profile(target, &seed_profile.dims, store);
    if target_profile.norm_sq() == 0.0 {
        return 0.0;
    }
    let cos = cosine_similarity(&seed_profile.values, &target_profile.values)
        .expect("profiles share dims and both have nonzero norm");
    map_cosine(cos)
}

/// Retrieves candidate targets for a seed: the `pool_size` nearest concepts
/// by association-space similarity, reranked by visual similarity, top
/// `keep` returned with their visual scores. Ties break by ascending id.
pub fn retrieve_targets(
    seed: ConceptId,
    store: &KnowledgeStore,
    pool_size: usize,
    keep: usize,
) -> Result<Vec<(ConceptId, f64)>> {
    if keep == 0 || pool_size < keep {
        return Err(Error::InvalidConfig {
            reason: format!(
                "retrieve_targets requires pool_size >= keep >= 1, got {pool_size} and {keep}"
            ),
        });
    }
    let pool = store.top_k_similar(SpaceId::Cn, seed, pool_size)?;
    let profile = build_seed_profile(seed, store);
    let mut reranked: Vec<(ConceptId, f64)> = pool
        .into_iter()
        .map(|(target, _)| (target, visual_similarity_against(&profile, target, store)))
        .collect();
    reranked.sort_by(|(ida, sa), (idb, sb)| sb.total_cmp(sa).then(ida.cmp(idb)));
    reranked.truncate(keep);
    Ok(reranked)
}

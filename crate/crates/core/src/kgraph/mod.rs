//! Knowledge sources: concept vocabulary, two embedding spaces, relational
//! assertions, eigenvector centrality, and concreteness ratings.
//!
//! A [`KnowledgeStore`] is immutable after load and safe to share across
//! threads. The two embedding spaces are the association space (`cn`), whose
//! vector similarity approximates multi-path graph connectivity, and a
//! distributional space (`w2v`).

mod load;

pub use load::{LoadStats, StorePaths};

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};

/// Dense index into the vocabulary. Issued by the store; one id per token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptId(pub(crate) u32);

impl ConceptId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// The two embedding spaces served by the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceId {
    /// Association space derived from the knowledge graph.
    Cn,
    /// Distributional word-vector space.
    W2v,
}

impl SpaceId {
    pub fn name(self) -> &'static str {
        match self {
            SpaceId::Cn => "cn",
            SpaceId::W2v => "w2v",
        }
    }
}

impl fmt::Display for SpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SpaceId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cn" => Ok(SpaceId::Cn),
            "w2v" => Ok(SpaceId::W2v),
            other => Err(Error::UnknownStrategy {
                kind: "embedding space",
                name: other.to_string(),
                known: "cn, w2v".to_string(),
            }),
        }
    }
}

/// Relation label of an assertion. The named variants are the ones the
/// engine reasons with; anything else round-trips through `Other`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    HasA,
    HasProperty,
    PartOf,
    MemberOf,
    IsA,
    Other(String),
}

impl Relation {
    pub fn parse(label: &str) -> Relation {
        match label {
            "HasA" => Relation::HasA,
            "HasProperty" => Relation::HasProperty,
            "PartOf" => Relation::PartOf,
            "MemberOf" => Relation::MemberOf,
            "IsA" => Relation::IsA,
            other => Relation::Other(other.to_string()),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Relation::HasA => "HasA",
            Relation::HasProperty => "HasProperty",
            Relation::PartOf => "PartOf",
            Relation::MemberOf => "MemberOf",
            Relation::IsA => "IsA",
            Relation::Other(label) => label,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One weighted relational edge between two concepts.
#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub head: ConceptId,
    pub relation: Relation,
    pub tail: ConceptId,
    pub weight: f64,
}

/// Per-concept vectors of one embedding space, stored row-major.
#[derive(Debug, Clone)]
pub struct EmbeddingSpace {
    name: SpaceId,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingSpace {
    fn new(name: SpaceId, dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len() % dim, 0);
        EmbeddingSpace { name, dim, data }
    }

    pub fn name(&self) -> SpaceId {
        self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, id: ConceptId) -> &[f64] {
        let start = id.index() * self.dim;
        &self.data[start..start + self.dim]
    }
}

/// Eigenvector centrality per concept, max-normalized to 1 and floored at
/// [`CENTRALITY_FLOOR`] so that `1/score` popularity penalties stay bounded.
#[derive(Debug, Clone)]
pub struct CentralityScores {
    scores: Vec<f64>,
}

/// Lower bound applied to centrality scores before any `1/score` use.
pub const CENTRALITY_FLOOR: f64 = 1e-4;

impl CentralityScores {
    /// Max-normalizes `raw` and floors every entry. `raw` must contain at
    /// least one strictly positive value.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        let max = raw.iter().cloned().fold(0.0_f64, f64::max);
        if max <= 0.0 || !max.is_finite() {
            return Err(Error::InvalidMatrix {
                reason: "centrality vector has no positive entry".to_string(),
            });
        }
        let scores = raw
            .into_iter()
            .map(|s| (s / max).max(CENTRALITY_FLOOR))
            .collect();
        Ok(CentralityScores { scores })
    }

    pub fn get(&self, id: ConceptId) -> f64 {
        self.scores[id.index()]
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.scores.iter().copied()
    }
}

/// Human concreteness ratings on a 1 (abstract) to 5 (concrete) scale.
/// Partial: concepts without a rating are simply absent.
#[derive(Debug, Clone, Default)]
pub struct ConcretenessRatings {
    ratings: HashMap<ConceptId, f64>,
}

impl ConcretenessRatings {
    pub fn insert(&mut self, id: ConceptId, rating: f64) -> Result<()> {
        if !(1.0..=5.0).contains(&rating) {
            return Err(Error::InvalidConfig {
                reason: format!("concreteness rating {rating} outside [1, 5]"),
            });
        }
        self.ratings.entry(id).or_insert(rating);
        Ok(())
    }

    pub fn get(&self, id: ConceptId) -> Option<f64> {
        self.ratings.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }
}

/// Cosine similarity of two equal-dimension vectors, in `[-1, 1]`.
///
/// Zero-norm inputs are an explicit error; the result is never NaN.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm {
            context: "cosine_similarity",
        });
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Maps a cosine in `[-1, 1]` onto `[0, 1]`.
pub fn map_cosine(cos: f64) -> f64 {
    (cos + 1.0) / 2.0
}

/// Eigenvector centrality of a nonnegative adjacency matrix via power
/// iteration, max-normalized to 1 and floored.
///
/// The iteration runs on the diagonally shifted matrix `A + sigma*I`, which
/// has the same eigenvectors as `A` but a strictly dominant eigenvalue, so
/// bipartite-like graphs do not oscillate. Convergence is declared when
/// successive max-normalized iterates differ by less than `tol` in max-norm.
pub fn eigenvector_centrality(
    adjacency: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
) -> Result<CentralityScores> {
    let n = adjacency.len();
    if n == 0 {
        return Err(Error::InvalidMatrix {
            reason: "empty matrix".to_string(),
        });
    }
    let mut max_row_sum = 0.0_f64;
    for (i, row) in adjacency.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidMatrix {
                reason: format!("row {i} has length {}, expected {n}", row.len()),
            });
        }
        let mut sum = 0.0;
        for &v in row {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidMatrix {
                    reason: format!("entry {v} in row {i} is not a finite nonnegative value"),
                });
            }
            sum += v;
        }
        max_row_sum = max_row_sum.max(sum);
    }
    if max_row_sum == 0.0 {
        return Err(Error::InvalidMatrix {
            reason: "matrix has no nonzero row".to_string(),
        });
    }

    let sigma = 0.1 * max_row_sum;
    let mut x = vec![1.0_f64; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut next = vec![0.0_f64; n];
        for i in 0..n {
            let row = &adjacency[i];
            let mut acc = sigma * x[i];
            for j in 0..n {
                acc += row[j] * x[j];
            }
            next[i] = acc;
        }
        let max = next.iter().cloned().fold(0.0_f64, f64::max);
        if max <= 0.0 {
            return Err(Error::CentralityDiverged {
                iterations: max_iter,
                residual: f64::INFINITY,
            });
        }
        for v in &mut next {
            *v /= max;
        }
        residual = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        x = next;
        if residual < tol {
            return CentralityScores::from_raw(x);
        }
    }
    Err(Error::CentralityDiverged {
        iterations: max_iter,
        residual,
    })
}

/// Normalizes a raw token: trimmed, case-folded, inner whitespace joined
/// with underscores.
pub fn normalize_token(raw: &str) -> String {
    raw.trim()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
}

/// Similarity threshold below which association-space adjacency entries are
/// zeroed when deriving the centrality graph.
pub const CENTRALITY_ADJACENCY_CUTOFF: f64 = 0.5;

// Store-build iteration budget. Near-degenerate spectra converge slowly, so
// the tolerance is looser than the projection-grade 1e-9; centrality only
// feeds 1/score rule weights, where 1e-7 is far below anything observable.
const CENTRALITY_TOL: f64 = 1e-7;
const CENTRALITY_MAX_ITER: usize = 20_000;

/// Immutable knowledge store. All lookups are by [`ConceptId`]; tokens are
/// resolved once at the boundary.
#[derive(Debug)]
pub struct KnowledgeStore {
    tokens: Vec<String>,
    index: HashMap<String, ConceptId>,
    cn: EmbeddingSpace,
    w2v: EmbeddingSpace,
    assertions: Vec<Assertion>,
    head_ranges: Vec<Range<usize>>,
    centrality: CentralityScores,
    concreteness: ConcretenessRatings,
    stats: LoadStats,
}

impl KnowledgeStore {
    /// Builds a store from in-memory parts. Tokens are normalized; both
    /// vector tables must align with `tokens`. Assertions referencing
    /// unknown tokens are dropped and counted.
    pub fn from_parts(
        tokens: Vec<String>,
        cn_dim: usize,
        cn_vectors: Vec<Vec<f64>>,
        w2v_dim: usize,
        w2v_vectors: Vec<Vec<f64>>,
        assertions: Vec<(String, Relation, String, f64)>,
        concreteness: Vec<(String, f64)>,
    ) -> Result<Self> {
        let mut normalized = Vec::with_capacity(tokens.len());
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, raw) in tokens.iter().enumerate() {
            let token = normalize_token(raw);
            if token.is_empty() {
                return Err(Error::InvalidConfig {
                    reason: format!("vocabulary entry {i} is empty"),
                });
            }
            if index.contains_key(&token) {
                return Err(Error::InvalidConfig {
                    reason: format!("duplicate vocabulary token {token:?}"),
                });
            }
            index.insert(token.clone(), ConceptId(i as u32));
            normalized.push(token);
        }
        let cn = pack_space(SpaceId::Cn, cn_dim, &cn_vectors, &normalized)?;
        let w2v = pack_space(SpaceId::W2v, w2v_dim, &w2v_vectors, &normalized)?;

        let mut stats = LoadStats::default();
        let mut resolved = Vec::with_capacity(assertions.len());
        for (head, relation, tail, weight) in assertions {
            if weight < 0.0 || !weight.is_finite() {
                return Err(Error::NegativeWeight { weight });
            }
            let head = normalize_token(&head);
            let tail = normalize_token(&tail);
            match (index.get(&head), index.get(&tail)) {
                (Some(&h), Some(&t)) => resolved.push(Assertion {
                    head: h,
                    relation,
                    tail: t,
                    weight,
                }),
                _ => stats.assertions_skipped += 1,
            }
        }

        let mut ratings = ConcretenessRatings::default();
        for (token, rating) in concreteness {
            match index.get(&normalize_token(&token)) {
                Some(&id) => ratings.insert(id, rating)?,
                None => stats.ratings_skipped += 1,
            }
        }

        Self::assemble(normalized, index, cn, w2v, resolved, ratings, stats)
    }

    /// Loads a store from the on-disk file formats. See [`StorePaths`].
    pub fn load(paths: &StorePaths) -> Result<Self> {
        load::load_store(paths)
    }

    fn assemble(
        tokens: Vec<String>,
        index: HashMap<String, ConceptId>,
        cn: EmbeddingSpace,
        w2v: EmbeddingSpace,
        mut assertions: Vec<Assertion>,
        concreteness: ConcretenessRatings,
        mut stats: LoadStats,
    ) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidConfig {
                reason: "empty vocabulary".to_string(),
            });
        }

        assertions.sort_by(|a, b| (a.head, &a.relation, a.tail).cmp(&(b.head, &b.relation, b.tail)));
        let before = assertions.len();
        assertions.dedup_by(|a, b| a.head == b.head && a.relation == b.relation && a.tail == b.tail);
        stats.assertions_skipped += before - assertions.len();

        let mut head_ranges = vec![0..0; tokens.len()];
        let mut i = 0;
        while i < assertions.len() {
            let head = assertions[i].head;
            let start = i;
            while i < assertions.len() && assertions[i].head == head {
                i += 1;
            }
            head_ranges[head.index()] = start..i;
        }

        let centrality = derive_centrality(&cn)?;

        Ok(KnowledgeStore {
            tokens,
            index,
            cn,
            w2v,
            assertions,
            head_ranges,
            centrality,
            concreteness,
            stats,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn stats(&self) -> &LoadStats {
        &self.stats
    }

    /// Resolves a raw token to its concept id, if present.
    pub fn concept(&self, raw: &str) -> Option<ConceptId> {
        self.index.get(&normalize_token(raw)).copied()
    }

    /// Like [`Self::concept`] but an out-of-vocabulary token is an error
    /// carrying the token.
    pub fn require_concept(&self, raw: &str) -> Result<ConceptId> {
        self.concept(raw).ok_or_else(|| Error::OutOfVocabulary {
            token: raw.to_string(),
        })
    }

    pub fn token(&self, id: ConceptId) -> &str {
        &self.tokens[id.index()]
    }

    pub fn concepts(&self) -> impl Iterator<Item = ConceptId> {
        (0..self.tokens.len() as u32).map(ConceptId)
    }

    pub fn space(&self, space: SpaceId) -> &EmbeddingSpace {
        match space {
            SpaceId::Cn => &self.cn,
            SpaceId::W2v => &self.w2v,
        }
    }

    pub fn assertions_from(&self, head: ConceptId) -> &[Assertion] {
        &self.assertions[self.head_ranges[head.index()].clone()]
    }

    pub fn all_assertions(&self) -> &[Assertion] {
        &self.assertions
    }

    /// Floored, max-normalized eigenvector centrality of a concept.
    pub fn centrality(&self, id: ConceptId) -> f64 {
        self.centrality.get(id)
    }

    pub fn centrality_scores(&self) -> &CentralityScores {
        &self.centrality
    }

    pub fn concreteness(&self, id: ConceptId) -> Option<f64> {
        self.concreteness.get(id)
    }

    /// Normalized similarity of two concepts in a space: cosine mapped onto
    /// `[0, 1]` via `(cos + 1) / 2`. Self-similarity is exactly 1.
    pub fn similarity(&self, space: SpaceId, a: ConceptId, b: ConceptId) -> f64 {
        if a == b {
            return 1.0;
        }
        let table = self.space(space);
        // Vocabulary vectors are validated non-zero at load time.
        let cos = cosine_similarity(table.vector(a), table.vector(b))
            .expect("vocabulary vectors are non-zero and equal-dimension");
        map_cosine(cos)
    }

    /// Raw cosine of the token-mean vectors of two phrases. Out-of-vocabulary
    /// tokens are dropped before averaging; an all-OOV side is an error
    /// listing its tokens.
    pub fn phrase_similarity(&self, space: SpaceId, a: &[String], b: &[String]) -> Result<f64> {
        let va = self.phrase_mean(space, a)?;
        let vb = self.phrase_mean(space, b)?;
        cosine_similarity(&va, &vb)
    }

    fn phrase_mean(&self, space: SpaceId, tokens: &[String]) -> Result<Vec<f64>> {
        let table = self.space(space);
        let mut mean = vec![0.0; table.dim()];
        let mut count = 0usize;
        for token in tokens {
            if let Some(id) = self.concept(token) {
                for (m, v) in mean.iter_mut().zip(table.vector(id)) {
                    *m += v;
                }
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::AllTokensOov {
                tokens: tokens.to_vec(),
            });
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        Ok(mean)
    }

    /// The `k` concepts most similar to `seed` in a space, excluding the
    /// seed itself: descending score, ties broken by ascending id. Asking
    /// for more than `len() - 1` truncates rather than erroring.
    pub fn top_k_similar(
        &self,
        space: SpaceId,
        seed: ConceptId,
        k: usize,
    ) -> Result<Vec<(ConceptId, f64)>> {
        if k == 0 {
            return Err(Error::InvalidConfig {
                reason: "top_k_similar requires k >= 1".to_string(),
            });
        }
        let mut scored: Vec<(ConceptId, f64)> = self
            .concepts()
            .filter(|&c| c != seed)
            .map(|c| (c, self.similarity(space, seed, c)))
            .collect();
        scored.sort_by(|(ida, sa), (idb, sb)| sb.total_cmp(sa).then(ida.cmp(idb)));
        scored.truncate(k);
        Ok(scored)
    }
}

fn pack_space(
    name: SpaceId,
    dim: usize,
    vectors: &[Vec<f64>],
    tokens: &[String],
) -> Result<EmbeddingSpace> {
    if dim == 0 {
        return Err(Error::InvalidConfig {
            reason: format!("space {name} has dimension 0"),
        });
    }
    if vectors.len() != tokens.len() {
        return Err(Error::InvalidConfig {
            reason: format!(
                "space {name} has {} vectors for {} tokens",
                vectors.len(),
                tokens.len()
            ),
        });
    }
    let mut data = Vec::with_capacity(dim * vectors.len());
    for (vec, token) in vectors.iter().zip(tokens) {
        if vec.len() != dim {
            return Err(Error::DimensionMismatch {
                left: vec.len(),
                right: dim,
            });
        }
        if vec.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroVector {
                token: token.clone(),
                space: name.name(),
            });
        }
        data.extend_from_slice(vec);
    }
    Ok(EmbeddingSpace::new(name, dim, data))
}

/// Centrality graph: pairwise mapped association-space similarity, entries
/// below [`CENTRALITY_ADJACENCY_CUTOFF`] zeroed.
fn derive_centrality(cn: &EmbeddingSpace) -> Result<CentralityScores> {
    let n = cn.data.len() / cn.dim;
    let mut adjacency = vec![vec![0.0_f64; n]; n];
    for i in 0..n {
        adjacency[i][i] = 1.0;
        for j in i + 1..n {
            let cos = cosine_similarity(
                cn.vector(ConceptId(i as u32)),
                cn.vector(ConceptId(j as u32)),
            )?;
            let sim = map_cosine(cos);
            if sim >= CENTRALITY_ADJACENCY_CUTOFF {
                adjacency[i][j] = sim;
                adjacency[j][i] = sim;
            }
        }
    }
    eigenvector_centrality(&adjacency, CENTRALITY_TOL, CENTRALITY_MAX_ITER)
}

//! On-disk formats for the knowledge sources.
//!
//! - Embedding file (one per space): UTF-8 text, first line the dimension
//!   `D`, then one `token d1 d2 ... dD` line per concept, space-separated.
//! - Assertions file: tab-separated `head<TAB>relation<TAB>tail<TAB>weight`.
//! - Concreteness file: tab-separated `token<TAB>rating`, rating in [1, 5].
//!
//! The vocabulary is the set of tokens present in **both** embedding files,
//! in association-file order; tokens found in only one space are skipped and
//! counted. Assertions or ratings over unknown tokens are likewise skipped.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{normalize_token, pack_space, ConceptId, KnowledgeStore, Relation, SpaceId};

/// Input files for [`KnowledgeStore::load`].
#[derive(Debug, Clone)]
pub struct StorePaths {
    pub cn_embeddings: PathBuf,
    pub w2v_embeddings: PathBuf,
    pub assertions: PathBuf,
    pub concreteness: Option<PathBuf>,
}

/// Counters for entries skipped during load.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    /// Tokens present in only one embedding file, or repeated.
    pub tokens_skipped: usize,
    /// Assertions whose head or tail is out of vocabulary, or repeated.
    pub assertions_skipped: usize,
    /// Ratings for out-of-vocabulary tokens, or repeated.
    pub ratings_skipped: usize,
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

struct RawSpace {
    dim: usize,
    vectors: Vec<(String, Vec<f64>)>,
    duplicates: usize,
}

fn parse_embeddings(path: &Path) -> Result<RawSpace> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty embedding file"))?;
    let dim: usize = first
        .trim()
        .parse()
        .map_err(|_| parse_err(path, 1, format!("expected dimension, got {first:?}")))?;
    if dim == 0 {
        return Err(parse_err(path, 1, "dimension must be positive"));
    }

    let mut seen: HashMap<String, ()> = HashMap::new();
    let mut vectors = Vec::new();
    let mut skipped = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = normalize_token(fields.next().unwrap_or(""));
        if token.is_empty() {
            return Err(parse_err(path, lineno, "missing token"));
        }
        let mut vec = Vec::with_capacity(dim);
        for field in fields {
            let value: f64 = field.parse().map_err(|_| {
                parse_err(path, lineno, format!("bad vector component {field:?}"))
            })?;
            vec.push(value);
        }
        if vec.len() != dim {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {dim} components, got {}", vec.len()),
            ));
        }
        if seen.insert(token.clone(), ()).is_some() {
            skipped += 1;
            continue;
        }
        vectors.push((token, vec));
    }
    if vectors.is_empty() {
        return Err(parse_err(path, 1, "no vectors"));
    }
    Ok(RawSpace {
        dim,
        vectors,
        duplicates: skipped,
    })
}

fn parse_assertions(path: &Path) -> Result<Vec<(String, Relation, String, f64)>> {
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 4 tab-separated fields, got {}", fields.len()),
            ));
        }
        let weight: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad weight {:?}", fields[3])))?;
        if weight < 0.0 || !weight.is_finite() {
            return Err(parse_err(path, lineno, format!("negative weight {weight}")));
        }
        out.push((
            fields[0].to_string(),
            Relation::parse(fields[1].trim()),
            fields[2].to_string(),
            weight,
        ));
    }
    Ok(out)
}

fn parse_concreteness(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 2 tab-separated fields, got {}", fields.len()),
            ));
        }
        let rating: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad rating {:?}", fields[1])))?;
        if !(1.0..=5.0).contains(&rating) {
            return Err(parse_err(
                path,
                lineno,
                format!("rating {rating} outside [1, 5]"),
            ));
        }
        out.push((fields[0].to_string(), rating));
    }
    Ok(out)
}

pub(super) fn load_store(paths: &StorePaths) -> Result<KnowledgeStore> {
    let cn_raw = parse_embeddings(&paths.cn_embeddings)?;
    let w2v_raw = parse_embeddings(&paths.w2v_embeddings)?;

    let w2v_by_token: HashMap<&str, &Vec<f64>> = w2v_raw
        .vectors
        .iter()
        .map(|(t, v)| (t.as_str(), v))
        .collect();

    let mut stats = LoadStats::default();
    stats.tokens_skipped += cn_raw.duplicates + w2v_raw.duplicates;
    let mut tokens = Vec::new();
    let mut index = HashMap::new();
    let mut cn_vectors = Vec::new();
    let mut w2v_vectors = Vec::new();
    for (token, cn_vec) in &cn_raw.vectors {
        match w2v_by_token.get(token.as_str()) {
            Some(w2v_vec) => {
                index.insert(token.clone(), ConceptId(tokens.len() as u32));
                tokens.push(token.clone());
                cn_vectors.push(cn_vec.clone());
                w2v_vectors.push((*w2v_vec).clone());
            }
            None => stats.tokens_skipped += 1,
        }
    }
    stats.tokens_skipped += w2v_raw.vectors.len() - tokens.len();

    let cn = pack_space(SpaceId::Cn, cn_raw.dim, &cn_vectors, &tokens)?;
    let w2v = pack_space(SpaceId::W2v, w2v_raw.dim, &w2v_vectors, &tokens)?;

    let mut assertions = Vec::new();
    for (head, relation, tail, weight) in parse_assertions(&paths.assertions)? {
        let head = normalize_token(&head);
        let tail = normalize_token(&tail);
        match (index.get(&head), index.get(&tail)) {
            (Some(&h), Some(&t)) => assertions.push(super::Assertion {
                head: h,
                relation,
                tail: t,
                weight,
            }),
            _ => stats.assertions_skipped += 1,
        }
    }

    let mut ratings = super::ConcretenessRatings::default();
    if let Some(path) = &paths.concreteness {
        for (token, rating) in parse_concreteness(path)? {
            match index.get(&normalize_token(&token)) {
                Some(&id) => {
                    if ratings.get(id).is_some() {
                        stats.ratings_skipped += 1;
                    } else {
                        ratings.insert(id, rating)?;
                    }
                }
                None => stats.ratings_skipped += 1,
            }
        }
    }

    KnowledgeStore::assemble(tokens, index, cn, w2v, assertions, ratings, stats)
}

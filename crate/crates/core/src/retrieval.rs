//! Prompt store with deterministic embeddings and exact nearest-neighbor
//! search.
//!
//! Embeddings are hashed bag-of-words vectors: lowercase, split on
//! non-alphanumerics, FNV-1a 64-bit each term into one of [`EMBED_DIM`]
//! buckets, weight by term frequency, L2-normalize. No corpus statistics,
//! no neural encoder — the same text always embeds to the same bytes, which
//! makes retrieval results reproducible across machines and store reloads.
//! Search is a linear scan; stores here are hundreds of prompts, not
//! millions, and exactness is worth more than an index.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Number of hash buckets in an embedding.
pub const EMBED_DIM: usize = 256;

/// How many retrieved examples a default few-shot context carries.
pub const DEFAULT_SHOTS: usize = 5;

const FNV_OFFSET: u64 = 14695981039346656037;
const FNV_PRIME: u64 = 1099511628211;

fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Bucket index a term hashes to.
pub fn term_bucket(term: &str) -> usize {
    (fnv1a_64(term.as_bytes()) % EMBED_DIM as u64) as usize
}

/// Hashed-TF embedding of `text`, L2-normalized.
///
/// Text with no alphanumeric terms embeds to the unit vector on bucket 0,
/// so every embedding has norm 1.
pub fn embed(text: &str) -> Vec<f64> {
    let mut v = vec![0.0f64; EMBED_DIM];
    let lowered = text.to_lowercase();
    let mut any = false;
    for term in lowered.split(|c: char| !c.is_alphanumeric()) {
        if term.is_empty() {
            continue;
        }
        v[term_bucket(term)] += 1.0;
        any = true;
    }
    if !any {
        v[0] = 1.0;
        return v;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= norm;
    }
    v
}

/// Cosine similarity; zero vectors compare as 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Serialized form: embeddings are derived data and never persisted.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawExample {
    id: String,
    text: String,
    tags: Vec<String>,
    quality: f64,
}

/// A stored prompt with its derived embedding.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawExample", into = "RawExample")]
pub struct PromptExample {
    pub id: String,
    pub text: String,
    pub tags: Vec<String>,
    pub quality: f64,
    embedding: Vec<f64>,
}

impl PromptExample {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        tags: Vec<String>,
        quality: f64,
    ) -> Result<Self, StoreError> {
        let id = id.into();
        if !(0.0..=1.0).contains(&quality) || !quality.is_finite() {
            return Err(StoreError::QualityOutOfRange { id, quality });
        }
        let text = text.into();
        let embedding = embed(&text);
        Ok(Self {
            id,
            text,
            tags,
            quality,
            embedding,
        })
    }

    pub fn embedding(&self) -> &[f64] {
        &self.embedding
    }
}

impl TryFrom<RawExample> for PromptExample {
    type Error = StoreError;

    fn try_from(raw: RawExample) -> Result<Self, StoreError> {
        PromptExample::new(raw.id, raw.text, raw.tags, raw.quality)
    }
}

impl From<PromptExample> for RawExample {
    fn from(e: PromptExample) -> Self {
        Self {
            id: e.id,
            text: e.text,
            tags: e.tags,
            quality: e.quality,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("duplicate example id {0:?}")]
    DuplicateId(String),
    #[error("no example with id {0:?}")]
    UnknownId(String),
    #[error("example {id:?} has embedding dimension {actual}, store uses {expected}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        actual: usize,
    },
    #[error("example {id:?} quality {quality} is outside [0, 1]")]
    QualityOutOfRange { id: String, quality: f64 },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Id-indexed collection of prompts, persisted as JSON-lines.
#[derive(Debug, Clone, Default)]
pub struct PromptStore {
    examples: BTreeMap<String, PromptExample>,
}

impl PromptStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dimension(&self) -> usize {
        EMBED_DIM
    }

    pub fn add(&mut self, example: PromptExample) -> Result<(), StoreError> {
        if example.embedding.len() != EMBED_DIM {
            return Err(StoreError::DimensionMismatch {
                id: example.id.clone(),
                expected: EMBED_DIM,
                actual: example.embedding.len(),
            });
        }
        if self.examples.contains_key(&example.id) {
            return Err(StoreError::DuplicateId(example.id));
        }
        self.examples.insert(example.id.clone(), example);
        Ok(())
    }

    pub fn remove(&mut self, id: &str) -> Result<PromptExample, StoreError> {
        self.examples
            .remove(id)
            .ok_or_else(|| StoreError::UnknownId(id.to_string()))
    }

    pub fn get(&self, id: &str) -> Option<&PromptExample> {
        self.examples.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PromptExample> {
        self.examples.values()
    }

    /// Top-`k` examples by cosine similarity to `query`, ties broken by id
    /// ascending. `k` larger than the store returns everything, ranked.
    pub fn knn(&self, query: &str, k: usize) -> Vec<PromptExample> {
        let q = embed(query);
        let mut scored: Vec<(f64, &PromptExample)> = self
            .examples
            .values()
            .map(|e| (cosine(&q, &e.embedding), e))
            .collect();
        scored.sort_by(|(sa, ea), (sb, eb)| {
            sb.partial_cmp(sa)
                .expect("cosine of unit vectors is finite")
                .then_with(|| ea.id.cmp(&eb.id))
        });
        scored.into_iter().take(k).map(|(_, e)| e.clone()).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let file = std::fs::File::open(path)?;
        Self::load_reader(std::io::BufReader::new(file))
    }

    pub fn load_reader(reader: impl BufRead) -> Result<Self, StoreError> {
        let mut store = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let example: PromptExample =
                serde_json::from_str(&line).map_err(|source| StoreError::Parse {
                    line: i + 1,
                    source,
                })?;
            store.add(example)?;
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let mut file = std::fs::File::create(path)?;
        self.save_writer(&mut file)
    }

    pub fn save_writer(&self, writer: &mut impl Write) -> Result<(), StoreError> {
        for example in self.examples.values() {
            let raw = RawExample::from(example.clone());
            let line = serde_json::to_string(&raw).expect("plain struct serializes");
            writeln!(writer, "{line}")?;
        }
        Ok(())
    }
}

/// Few-shot context: instruction, retrieved examples, then the request,
/// separated by blank lines.
pub fn assemble_context(instruction: &str, store: &PromptStore, query: &str, k: usize) -> String {
    let mut sections = vec![instruction.to_string()];
    for (i, example) in store.knn(query, k).iter().enumerate() {
        sections.push(format!("Example {}: {}", i + 1, example.text));
    }
    sections.push(format!("Request: {query}"));
    sections.join("\n\n")
}

//! Classifier-free guidance with negative contexts and token blacklists.
//!
//! Each decoding step scores the next token twice: once conditioned on the
//! real prompt, once on a negative context assembled from retrieved "how not
//! to write" demonstrations. The guided distribution extrapolates from the
//! negative branch toward the conditional one — `g = neg + γ·(cond − neg)`
//! in log space — so γ > 1 actively pushes away from the flaws the negative
//! context exemplifies. Blacklists are applied after guidance: a banned
//! token stays impossible no matter how the scores combine.

use std::collections::BTreeSet;
use std::io::BufRead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grammar::SampleParams;
use crate::logprob::{LogProbError, LogProbVector};
use crate::provider::{ModelError, TokenModel};
use crate::retrieval::{cosine, embed};
use crate::vocab::{TokenId, VocabError, Vocabulary};

/// Guidance scale used when a caller does not pick one.
pub const DEFAULT_GAMMA: f64 = 1.5;

/// Flaw categories the stock negative demonstrations are labeled with.
/// `NegativeDemo::attribute` may also carry user-defined labels.
pub const STANDARD_FLAWS: [&str; 5] = [
    "incoherent-scene",
    "ambiguous-details",
    "verbose",
    "poor-composition",
    "grammar-errors",
];

#[derive(Debug, Clone, Default)]
pub struct GuidanceConfig {
    pub gamma: f64,
    pub negative_context: Vec<TokenId>,
    pub blacklist: BTreeSet<TokenId>,
}

/// A labeled example of writing to steer away from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegativeDemo {
    pub text: String,
    pub attribute: String,
}

#[derive(Debug, thiserror::Error)]
pub enum GuidanceError {
    #[error("guidance scale must be finite and ≥ 0, got {0}")]
    InvalidGamma(f64),
    #[error("the end-of-sequence token cannot be blacklisted")]
    EosBlacklisted,
    #[error("negative-demo store is empty")]
    EmptyDemoStore,
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    LogProb(#[from] LogProbError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
}

/// Combine conditional and negative log-probabilities:
/// `g = neg + γ·(cond − neg)`, renormalized.
///
/// Tokens impossible under `cond` stay impossible. Tokens impossible only
/// under `neg` are maximally boosted when γ > 1 (there is nothing to steer
/// away from, so they soak up the mass) and suppressed when γ < 1.
pub fn guided_logprobs(
    cond: &LogProbVector,
    neg: &LogProbVector,
    gamma: f64,
) -> Result<LogProbVector, GuidanceError> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(GuidanceError::InvalidGamma(gamma));
    }
    if cond.len() != neg.len() {
        return Err(LogProbError::ShapeMismatch {
            expected: cond.len(),
            actual: neg.len(),
        }
        .into());
    }
    let scores: Vec<f64> = cond
        .values()
        .iter()
        .zip(neg.values())
        .map(|(&c, &n)| {
            if c == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else if n == f64::NEG_INFINITY {
                match gamma.partial_cmp(&1.0).expect("gamma is finite") {
                    std::cmp::Ordering::Greater => f64::INFINITY,
                    std::cmp::Ordering::Equal => c,
                    std::cmp::Ordering::Less => f64::NEG_INFINITY,
                }
            } else {
                n + gamma * (c - n)
            }
        })
        .collect();
    Ok(LogProbVector::from_scores(scores)?)
}

/// Force blacklisted ids to −∞ and renormalize the rest.
pub fn apply_blacklist(
    v: &LogProbVector,
    blacklist: &BTreeSet<TokenId>,
) -> Result<LogProbVector, GuidanceError> {
    if blacklist.is_empty() {
        return Ok(v.clone());
    }
    Ok(v.masked(|t| !blacklist.contains(&t))?)
}

/// Every vocabulary token whose text contains `word`, for word-level bans
/// with token-level enforcement. Never includes eos.
pub fn blacklist_word(word: &str, vocab: &Vocabulary) -> BTreeSet<TokenId> {
    vocab.ids_containing(word).into_iter().collect()
}

/// Read a JSON-lines demo store: one `{"text", "attribute"}` object per
/// line, blank lines ignored.
pub fn load_demos(reader: impl BufRead) -> Result<Vec<NegativeDemo>, GuidanceError> {
    let mut demos = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let demo: NegativeDemo =
            serde_json::from_str(&line).map_err(|source| GuidanceError::Parse {
                line: i + 1,
                source,
            })?;
        demos.push(demo);
    }
    Ok(demos)
}

/// Top-`k` demos by embedding similarity to `query`; ties keep store order.
pub fn select_negative_demos(
    query: &str,
    demos: &[NegativeDemo],
    k: usize,
) -> Result<Vec<NegativeDemo>, GuidanceError> {
    if demos.is_empty() {
        return Err(GuidanceError::EmptyDemoStore);
    }
    let q = embed(query);
    let mut scored: Vec<(f64, &NegativeDemo)> =
        demos.iter().map(|d| (cosine(&q, &embed(&d.text)), d)).collect();
    scored.sort_by(|(sa, _), (sb, _)| sb.partial_cmp(sa).expect("cosine is finite"));
    Ok(scored.into_iter().take(k).map(|(_, d)| d.clone()).collect())
}

/// Tokenized negative context: demo texts joined by single newlines. No
/// demos means an empty context — the negative branch degrades to the
/// model's unconditional distribution.
pub fn build_negative_context(
    demos: &[NegativeDemo],
    vocab: &Vocabulary,
) -> Result<Vec<TokenId>, GuidanceError> {
    if demos.is_empty() {
        return Ok(Vec::new());
    }
    let joined = demos.iter().map(|d| d.text.as_str()).collect::<Vec<_>>().join("\n");
    Ok(vocab.tokenize(&joined)?)
}

/// Sample a continuation of `prompt_ctx` under guidance.
///
/// Each step queries the model twice — prompt plus generated tokens, and
/// negative context plus generated tokens — combines the results with
/// [`guided_logprobs`], applies the blacklist, and samples. Stops at eos or
/// after `params.max_tokens` tokens; returns the generated text only.
pub fn guided_decode<M: TokenModel>(
    model: &M,
    prompt_ctx: &[TokenId],
    config: &GuidanceConfig,
    params: &SampleParams,
) -> Result<String, GuidanceError> {
    if !config.gamma.is_finite() || config.gamma < 0.0 {
        return Err(GuidanceError::InvalidGamma(config.gamma));
    }
    let vocab = model.vocab();
    if config.blacklist.contains(&vocab.eos_id()) {
        return Err(GuidanceError::EosBlacklisted);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut generated: Vec<TokenId> = Vec::new();
    for _ in 0..params.max_tokens {
        let mut cond_ctx = prompt_ctx.to_vec();
        cond_ctx.extend_from_slice(&generated);
        let mut neg_ctx = config.negative_context.clone();
        neg_ctx.extend_from_slice(&generated);

        let cond = model.next_logprobs(&cond_ctx)?;
        let neg = model.next_logprobs(&neg_ctx)?;
        let guided = guided_logprobs(&cond, &neg, config.gamma)?;
        let constrained = apply_blacklist(&guided, &config.blacklist)?;
        let tok = constrained.with_temperature(params.temperature)?.sample(&mut rng);
        if tok == vocab.eos_id() {
            break;
        }
        generated.push(tok);
    }
    Ok(vocab.detokenize(&generated)?)
}

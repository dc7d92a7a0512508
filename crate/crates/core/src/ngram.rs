//! Add-alpha smoothed n-gram language model.
//!
//! A deterministic, exactly enumerable stand-in for a real language model:
//! every decoding strategy in this crate is exercised against it in tests,
//! and anything that behaves correctly over the [`TokenModel`] contract here
//! behaves identically over a remote provider.

use std::collections::HashMap;

use crate::logprob::LogProbVector;
use crate::provider::{ModelError, TokenModel};
use crate::vocab::{TokenId, VocabError, Vocabulary};

pub const DEFAULT_ORDER: usize = 2;
pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NGramError {
    #[error("n-gram order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("smoothing alpha must be non-negative, got {0}")]
    NegativeAlpha(f64),
    #[error(transparent)]
    Vocab(#[from] VocabError),
}

/// Counts-based conditional distribution with add-alpha smoothing.
///
/// `P(t | ctx) = (count(ctx, t) + alpha) / (total(ctx) + alpha * |V|)` where
/// `ctx` is the last `order - 1` context tokens (fewer at the very start of
/// generation; training counts every suffix length up to `order - 1`, so
/// short contexts are conditioned on real corpus statistics rather than
/// falling back to uniform). A context never seen in training yields the
/// uniform distribution — by smoothing when `alpha > 0`, and as the defined
/// limit when `alpha = 0`.
#[derive(Debug, Clone)]
pub struct NGramModel {
    vocab: Vocabulary,
    order: usize,
    alpha: f64,
    counts: HashMap<Vec<TokenId>, HashMap<TokenId, u64>>,
    totals: HashMap<Vec<TokenId>, u64>,
}

impl NGramModel {
    /// Count sliding windows over `tokenize(corpus)`.
    ///
    /// `alpha = 0` disables smoothing, making seen-context distributions
    /// exact count ratios; generation then cannot leave the corpus support.
    pub fn train(
        corpus: &str,
        order: usize,
        alpha: f64,
        vocab: Vocabulary,
    ) -> Result<Self, NGramError> {
        if order < 1 {
            return Err(NGramError::InvalidOrder(order));
        }
        if alpha < 0.0 || !alpha.is_finite() {
            return Err(NGramError::NegativeAlpha(alpha));
        }
        let seq = vocab.tokenize(corpus)?;
        let mut counts: HashMap<Vec<TokenId>, HashMap<TokenId, u64>> = HashMap::new();
        let mut totals: HashMap<Vec<TokenId>, u64> = HashMap::new();
        for i in 0..seq.len() {
            let max_ctx = (order - 1).min(i);
            for k in 0..=max_ctx {
                let ctx = seq[i - k..i].to_vec();
                *counts.entry(ctx.clone()).or_default().entry(seq[i]).or_insert(0) += 1;
                *totals.entry(ctx).or_insert(0) += 1;
            }
        }
        Ok(Self {
            vocab,
            order,
            alpha,
            counts,
            totals,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Raw count of `token` after exactly `context` (no suffix-taking).
    pub fn count(&self, context: &[TokenId], token: TokenId) -> u64 {
        self.counts
            .get(context)
            .and_then(|m| m.get(&token))
            .copied()
            .unwrap_or(0)
    }

    /// Total continuations observed after exactly `context`.
    pub fn context_total(&self, context: &[TokenId]) -> u64 {
        self.totals.get(context).copied().unwrap_or(0)
    }

    fn conditioning_key<'a>(&self, context: &'a [TokenId]) -> &'a [TokenId] {
        let keep = (self.order - 1).min(context.len());
        &context[context.len() - keep..]
    }
}

impl TokenModel for NGramModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_logprobs(&self, context: &[TokenId]) -> Result<LogProbVector, ModelError> {
        let key = self.conditioning_key(context);
        let v = self.vocab.len();
        let total = self.context_total(key) as f64;
        let denom = total + self.alpha * v as f64;
        let probs: Vec<f64> = if denom == 0.0 {
            // Unseen context with alpha = 0: the smoothed distribution's
            // limit is uniform.
            vec![1.0 / v as f64; v]
        } else {
            (0..v)
                .map(|i| {
                    let c = self.count(key, TokenId::new(i as u32)) as f64;
                    (c + self.alpha) / denom
                })
                .collect()
        };
        Ok(LogProbVector::from_probs(&probs)?)
    }
}

/// Word-level vocabulary for a corpus: each distinct whitespace-separated
/// word plus its leading-space form, then byte fallback.
///
/// The leading-space forms make greedy tokenization segment running text at
/// word boundaries ("cat sitting" → ["cat", " sitting"]), so token
/// boundaries never split a word — which in turn lets token-level filters
/// (blacklists, forbidden words) see whole words.
pub fn word_vocab(corpus: &str) -> Vocabulary {
    let mut tokens: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for word in corpus.split_whitespace() {
        for form in [word.to_string(), format!(" {word}")] {
            if seen.insert(form.clone()) {
                tokens.push(form);
            }
        }
    }
    Vocabulary::with_byte_fallback(tokens).expect("word forms are valid UTF-8 and non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logprob::logsumexp;

    /// Probability mass of a word: its bare token plus its leading-space form.
    fn word_prob(model: &NGramModel, lp: &LogProbVector, word: &str) -> f64 {
        let mut p = 0.0;
        for form in [word.to_string(), format!(" {word}")] {
            if let Some(id) = model.vocab().id_of(form.as_bytes()) {
                p += lp.get(id).exp();
            }
        }
        p
    }

    #[test]
    fn unigram_frequencies_from_small_corpus() {
        let corpus = "a a a b";
        let model = NGramModel::train(corpus, 1, 0.0, word_vocab(corpus)).unwrap();
        let lp = model.next_logprobs(&[]).unwrap();
        assert!((word_prob(&model, &lp, "a") - 0.75).abs() < 1e-12);
        assert!((word_prob(&model, &lp, "b") - 0.25).abs() < 1e-12);
    }

    #[test]
    fn unseen_context_is_uniform_under_smoothing() {
        let corpus = "a a a b";
        let vocab = word_vocab(corpus);
        let model = NGramModel::train(corpus, 2, 0.1, vocab).unwrap();
        // A context never observed in the corpus: 'b' is corpus-final.
        let b = model.vocab().id_of(b" b").unwrap();
        let lp = model.next_logprobs(&[b]).unwrap();
        let v = model.vocab().len() as f64;
        for i in 0..model.vocab().len() {
            let p = lp.get(TokenId::new(i as u32)).exp();
            assert!((p - 1.0 / v).abs() < 1e-12, "token {i}: {p}");
        }
    }

    #[test]
    fn every_context_yields_a_normalized_vector() {
        let corpus = "the cat sat on the mat the cat ran";
        let model = NGramModel::train(corpus, 3, 0.05, word_vocab(corpus)).unwrap();
        let the = model.vocab().id_of(b"the").unwrap();
        let cat = model.vocab().id_of(b" cat").unwrap();
        for ctx in [vec![], vec![the], vec![the, cat], vec![cat, cat, the, cat]] {
            let lp = model.next_logprobs(&ctx).unwrap();
            assert!(logsumexp(lp.values()).abs() < 1e-6);
        }
    }

    #[test]
    fn single_word_corpus_counts_once() {
        let corpus = "cat";
        let model = NGramModel::train(corpus, 1, 0.1, word_vocab(corpus)).unwrap();
        let cat = model.vocab().id_of(b"cat").unwrap();
        assert_eq!(model.count(&[], cat), 1);
        assert_eq!(model.context_total(&[]), 1);
    }

    #[test]
    fn doubling_the_corpus_doubles_counts_and_preserves_ratios() {
        // "ab" tiles seamlessly, so concatenating it with itself repeats
        // every token occurrence exactly.
        let vocab = Vocabulary::with_byte_fallback(["a", "b"]).unwrap();
        let m1 = NGramModel::train("ab", 2, 0.0, vocab.clone()).unwrap();
        let m2 = NGramModel::train("abab", 2, 0.0, vocab).unwrap();
        let a = m1.vocab().id_of(b"a").unwrap();
        let b = m1.vocab().id_of(b"b").unwrap();
        for t in [a, b] {
            assert_eq!(m1.count(&[], t) * 2, m2.count(&[], t));
        }
        assert_eq!(m1.count(&[a], b) * 2, m2.count(&[a], b));
        // With alpha = 0 the conditional distribution is scale-invariant.
        let lp1 = m1.next_logprobs(&[a]).unwrap();
        let lp2 = m2.next_logprobs(&[a]).unwrap();
        for i in 0..m1.vocab().len() {
            let id = TokenId::new(i as u32);
            assert_eq!(lp1.get(id), lp2.get(id));
        }
    }

    #[test]
    fn bigram_makes_deterministic_continuations_certain() {
        let corpus = "cat sitting cat sitting";
        let model = NGramModel::train(corpus, 2, 0.0, word_vocab(corpus)).unwrap();
        // Every occurrence of "cat" (bare and leading-space form) is followed
        // by " sitting".
        let sit = model.vocab().id_of(b" sitting").unwrap();
        for cat_form in [&b"cat"[..], &b" cat"[..]] {
            let cat = model.vocab().id_of(cat_form).unwrap();
            let lp = model.next_logprobs(&[cat]).unwrap();
            assert_eq!(lp.get(sit), 0.0, "log P = 0 means P = 1");
        }
    }

    #[test]
    fn identical_training_runs_are_bit_identical() {
        let corpus = "the cat sat on the mat";
        let a = NGramModel::train(corpus, 2, 0.1, word_vocab(corpus)).unwrap();
        let b = NGramModel::train(corpus, 2, 0.1, word_vocab(corpus)).unwrap();
        let the = a.vocab().id_of(b"the").unwrap();
        let la = a.next_logprobs(&[the]).unwrap();
        let lb = b.next_logprobs(&[the]).unwrap();
        assert_eq!(la.values(), lb.values());
    }

    #[test]
    fn order_zero_is_rejected() {
        let corpus = "cat";
        let err = NGramModel::train(corpus, 0, 0.1, word_vocab(corpus)).unwrap_err();
        assert_eq!(err, NGramError::InvalidOrder(0));
    }
}

//! The model abstraction every decoding strategy is written against.

use crate::logprob::{LogProbError, LogProbVector};
use crate::vocab::{TokenId, VocabError, Vocabulary};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    /// The backing provider could not be reached or answered with an error.
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    /// The provider answered, but with something that is not a valid
    /// distribution over its own vocabulary.
    #[error("provider returned a malformed distribution: {0}")]
    BadDistribution(#[from] LogProbError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
}

/// A conditional token distribution: a vocabulary plus, for any context, a
/// normalized log-probability vector over that vocabulary.
///
/// Implementations must be deterministic: the same context yields the same
/// vector. Randomness belongs to the decoding strategies, not the model.
pub trait TokenModel {
    fn vocab(&self) -> &Vocabulary;

    /// Normalized next-token log probabilities given `context`, natural log,
    /// one entry per vocabulary id.
    fn next_logprobs(&self, context: &[TokenId]) -> Result<LogProbVector, ModelError>;
}

impl<M: TokenModel + ?Sized> TokenModel for &M {
    fn vocab(&self) -> &Vocabulary {
        (**self).vocab()
    }

    fn next_logprobs(&self, context: &[TokenId]) -> Result<LogProbVector, ModelError> {
        (**self).next_logprobs(context)
    }
}

impl<M: TokenModel + ?Sized> TokenModel for Box<M> {
    fn vocab(&self) -> &Vocabulary {
        (**self).vocab()
    }

    fn next_logprobs(&self, context: &[TokenId]) -> Result<LogProbVector, ModelError> {
        (**self).next_logprobs(context)
    }
}

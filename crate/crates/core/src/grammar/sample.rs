//! Grammar-constrained sampling: masked, renormalized decoding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::logprob::LogProbError;
use crate::provider::{ModelError, TokenModel};
use crate::vocab::TokenId;

use super::{Grammar, RecognizerState};

#[derive(Debug, Clone)]
pub struct SampleParams {
    pub temperature: f64,
    pub seed: u64,
    pub max_tokens: usize,
}

impl Default for SampleParams {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            seed: 0,
            max_tokens: 64,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GrammarSampleError {
    #[error("token budget exhausted before the grammar completed; partial output: {partial:?}")]
    LengthExhausted { partial: String },
    /// The provider put zero probability on every grammar-admissible token.
    #[error("provider assigns no mass to any admissible token after {partial:?}")]
    NoMass { partial: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Sample one string from the grammar's language.
///
/// Each step intersects the provider's next-token distribution with the
/// recognizer's admissible set, renormalizes, and samples. eos is
/// admissible only at complete states, so anything returned is a full
/// member of the language.
pub fn grammar_sample<M: TokenModel>(
    model: &M,
    grammar: &Grammar,
    params: &SampleParams,
) -> Result<String, GrammarSampleError> {
    grammar_sample_with_context(model, grammar, &[], params)
}

/// [`grammar_sample`] with extra conditioning tokens prepended to the
/// provider context (the grammar constrains only the sampled continuation).
pub fn grammar_sample_with_context<M: TokenModel>(
    model: &M,
    grammar: &Grammar,
    context: &[TokenId],
    params: &SampleParams,
) -> Result<String, GrammarSampleError> {
    let vocab = model.vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut state = RecognizerState::init(grammar);
    let mut full_context = context.to_vec();

    for _ in 0..params.max_tokens {
        let mask = state.valid_mask(vocab);
        let lp = model.next_logprobs(&full_context)?;
        let masked = match lp.masked(|id| mask.is_set(id)) {
            Ok(m) => m,
            Err(LogProbError::AllMasked) => {
                return Err(GrammarSampleError::NoMass {
                    partial: state.consumed_text(),
                })
            }
            Err(e) => return Err(ModelError::from(e).into()),
        };
        let shaped = masked
            .with_temperature(params.temperature)
            .map_err(ModelError::from)?;
        let tok = shaped.sample(&mut rng);
        if tok == vocab.eos_id() {
            return Ok(state.consumed_text());
        }
        state = state
            .advance(vocab.bytes(tok).map_err(ModelError::from)?)
            .expect("mask admits only live continuations");
        full_context.push(tok);
    }

    if state.is_complete() {
        Ok(state.consumed_text())
    } else {
        Err(GrammarSampleError::LengthExhausted {
            partial: state.consumed_text(),
        })
    }
}

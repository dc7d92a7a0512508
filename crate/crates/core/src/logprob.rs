//! Normalized log-probability vectors over a token vocabulary.
//!
//! Every distribution in this crate is carried as natural-log probabilities
//! normalized so that `logsumexp(values) == 0` within [`NORM_TOLERANCE`].
//! Entries may be `-inf` (masked tokens) but at least one entry is finite.

use rand::Rng;

use crate::TokenId;

/// Tolerance on `logsumexp` for a vector to count as normalized.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Errors from constructing or combining log-probability vectors.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LogProbError {
    #[error("vector has no finite entry to carry probability mass")]
    AllMasked,
    #[error("vector length {actual} does not match expected {expected}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("logsumexp is {0}, outside the normalization tolerance")]
    NotNormalized(f64),
}

/// Numerically stable log(sum(exp(values))).
///
/// Returns `-inf` for an empty slice or a slice of all `-inf`.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// A normalized natural-log probability distribution over token ids `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbVector {
    values: Vec<f64>,
}

impl LogProbVector {
    /// Normalize arbitrary finite-or-`-inf` scores into a distribution.
    ///
    /// Entries equal to `-inf` keep zero mass. Fails if no entry is finite.
    pub fn from_scores(mut values: Vec<f64>) -> Result<Self, LogProbError> {
        let z = logsumexp(&values);
        if !z.is_finite() {
            if values.iter().any(|v| *v == f64::INFINITY) {
                // An infinite score swallows all mass; spread it uniformly
                // over the infinite entries so the result stays a distribution.
                let n = values.iter().filter(|v| **v == f64::INFINITY).count();
                let share = -(n as f64).ln();
                for v in values.iter_mut() {
                    *v = if *v == f64::INFINITY {
                        share
                    } else {
                        f64::NEG_INFINITY
                    };
                }
                return Ok(Self { values });
            }
            return Err(LogProbError::AllMasked);
        }
        for v in values.iter_mut() {
            *v -= z;
        }
        Ok(Self { values })
    }

    /// Build from linear probabilities (need not sum to one; zero allowed).
    pub fn from_probs(probs: &[f64]) -> Result<Self, LogProbError> {
        Self::from_scores(probs.iter().map(|p| p.ln()).collect())
    }

    /// Wrap values that are already normalized; checked against tolerance.
    pub fn from_normalized(values: Vec<f64>) -> Result<Self, LogProbError> {
        let z = logsumexp(&values);
        if !(z.abs() <= NORM_TOLERANCE) {
            return Err(LogProbError::NotNormalized(z));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: TokenId) -> f64 {
        self.values[id.index()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Deviation of `logsumexp` from zero; diagnostic for the normalization
    /// invariant.
    pub fn normalization_error(&self) -> f64 {
        logsumexp(&self.values).abs()
    }

    /// Highest-probability token id; ties resolve to the lowest id.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0usize;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        TokenId::new(best as u32)
    }

    /// Zero out the masked entries and renormalize the rest.
    ///
    /// `allowed` decides which ids keep their mass. Fails when nothing
    /// survives the mask.
    pub fn masked<F: Fn(TokenId) -> bool>(&self, allowed: F) -> Result<Self, LogProbError> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if allowed(TokenId::new(i as u32)) {
                    *v
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        Self::from_scores(values)
    }

    /// Apply a temperature then renormalize. `temperature == 0` collapses
    /// the distribution onto its argmax.
    pub fn with_temperature(&self, temperature: f64) -> Result<Self, LogProbError> {
        if temperature <= 0.0 {
            let best = self.argmax();
            return self.masked(|id| id == best);
        }
        Self::from_scores(self.values.iter().map(|v| v / temperature).collect())
    }

    /// Draw one token by inverse-CDF over the linear probabilities.
    ///
    /// Deterministic given the generator state.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> TokenId {
        let r: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last_finite = 0usize;
        for (i, v) in self.values.iter().enumerate() {
            if v.is_finite() {
                last_finite = i;
                acc += v.exp();
                if r < acc {
                    return TokenId::new(i as u32);
                }
            }
        }
        // Rounding left a sliver of unassigned mass; charge it to the last
        // finite entry.
        TokenId::new(last_finite as u32)
    }

    /// Interpret the vector as linear probabilities.
    pub fn probs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.exp()).collect()
    }
}

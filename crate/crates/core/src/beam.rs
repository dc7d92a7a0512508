//! Constraint-guaranteeing beam search.
//!
//! Hypotheses are grouped into banks by how many constraint steps they have
//! completed. Each decoding step expands every survivor by its top-scoring
//! tokens plus one forced token per unfulfilled constraint, then refills the
//! beam round-robin across banks from most-complete to least, best score
//! first within a bank. The round-robin keeps constraint-advancing
//! hypotheses alive even when their raw scores lag, which is what turns
//! "phrase should appear" into "phrase appears in 100% of outputs".

use crate::constraints::{CompiledConstraint, ConstraintState};
use crate::provider::{ModelError, TokenModel};
use crate::vocab::{TokenId, Vocabulary};

#[derive(Debug, Clone)]
pub struct BeamParams {
    pub width: usize,
    pub max_tokens: usize,
    /// Accepted for interface symmetry with the samplers; beam search is
    /// fully deterministic and never consumes randomness.
    pub seed: u64,
}

impl Default for BeamParams {
    fn default() -> Self {
        Self {
            width: 4,
            max_tokens: 32,
            seed: 0,
        }
    }
}

/// One beam entry: a token sequence, its cumulative log probability, and
/// per-constraint matching state.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    pub score: f64,
    pub constraint_states: Vec<ConstraintState>,
    /// Σ steps_done over constraints.
    pub bank: usize,
    /// Ended with eos (as opposed to running to the token budget).
    pub finished: bool,
}

impl Hypothesis {
    fn root(constraints: &[CompiledConstraint]) -> Self {
        Self {
            tokens: Vec::new(),
            score: 0.0,
            constraint_states: constraints.iter().map(|c| c.initial()).collect(),
            bank: 0,
            finished: false,
        }
    }

    pub fn fulfilled(&self) -> bool {
        self.constraint_states.iter().all(|s| s.fulfilled())
    }

    pub fn text(&self, vocab: &Vocabulary) -> String {
        vocab.detokenize(&self.tokens).expect("beam tokens are valid")
    }

    fn extend(
        &self,
        tok: TokenId,
        logprob: f64,
        constraints: &[CompiledConstraint],
        eos: TokenId,
    ) -> Self {
        let constraint_states: Vec<ConstraintState> = constraints
            .iter()
            .zip(&self.constraint_states)
            .map(|(c, s)| c.step(s, tok))
            .collect();
        let bank = constraints
            .iter()
            .zip(&constraint_states)
            .map(|(c, s)| c.steps_done(s))
            .sum();
        let mut tokens = self.tokens.clone();
        tokens.push(tok);
        Self {
            tokens,
            score: self.score + logprob,
            constraint_states,
            bank,
            finished: tok == eos,
        }
    }
}

/// Score-descending, then lexicographically ascending token order; a total
/// order over hypotheses that makes every selection step deterministic.
fn rank(a: &Hypothesis, b: &Hypothesis) -> std::cmp::Ordering {
    b.score
        .partial_cmp(&a.score)
        .expect("scores are never NaN")
        .then_with(|| a.tokens.cmp(&b.tokens))
}

#[derive(Debug, thiserror::Error)]
pub enum BeamError {
    #[error("no hypothesis fulfilled all constraints within {max_tokens} tokens; best partial reached bank {} of {}", .best_partial.bank, .total_steps)]
    Unsatisfiable {
        max_tokens: usize,
        total_steps: usize,
        /// Highest-bank (then highest-score) incomplete hypothesis, for
        /// diagnostics.
        best_partial: Box<Hypothesis>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Run constrained beam search; returns fulfilled hypotheses ranked by
/// score.
///
/// Every returned hypothesis satisfies all `constraints` and either ended
/// with eos or used the full token budget.
pub fn beam_search<M: TokenModel>(
    model: &M,
    constraints: &[CompiledConstraint],
    params: &BeamParams,
) -> Result<Vec<Hypothesis>, BeamError> {
    let vocab = model.vocab();
    let eos = vocab.eos_id();
    let width = params.width.max(1);

    let mut beam = vec![Hypothesis::root(constraints)];
    let mut completed: Vec<Hypothesis> = Vec::new();

    for _step in 0..params.max_tokens {
        let mut pool: Vec<Hypothesis> = Vec::new();
        for hyp in &beam {
            let lp = model.next_logprobs(&hyp.tokens)?;

            // Top-`width` tokens by score (ties to the lower id), plus each
            // constraint's forced next token.
            let mut order: Vec<usize> = (0..vocab.len()).collect();
            order.sort_by(|&a, &b| {
                lp.values()[b]
                    .partial_cmp(&lp.values()[a])
                    .expect("logprobs are never NaN")
                    .then(a.cmp(&b))
            });
            let mut chosen: Vec<TokenId> = order
                .into_iter()
                .take(width)
                .map(|i| TokenId::new(i as u32))
                .collect();
            for (c, s) in constraints.iter().zip(&hyp.constraint_states) {
                if let Some(forced) = c.forced_token(s, vocab, hyp.tokens.is_empty()) {
                    if !chosen.contains(&forced) {
                        chosen.push(forced);
                    }
                }
            }

            for tok in chosen {
                let cand = hyp.extend(tok, lp.get(tok), constraints, eos);
                if cand.finished {
                    if cand.fulfilled() {
                        completed.push(cand);
                    }
                    // eos on an unfulfilled hypothesis is a dead end.
                } else {
                    pool.push(cand);
                }
            }
        }

        if pool.is_empty() {
            break;
        }

        // Round-robin refill: visit banks from most constraint progress to
        // least, taking the best remaining candidate of each, cycling until
        // the beam is full.
        let mut banks: std::collections::BTreeMap<usize, Vec<Hypothesis>> =
            std::collections::BTreeMap::new();
        for cand in pool {
            banks.entry(cand.bank).or_default().push(cand);
        }
        for members in banks.values_mut() {
            members.sort_by(rank);
        }
        let mut next_beam = Vec::with_capacity(width);
        'fill: loop {
            let mut drew_any = false;
            for (_bank, members) in banks.iter_mut().rev() {
                if let Some(best) = members.first().cloned() {
                    members.remove(0);
                    next_beam.push(best);
                    drew_any = true;
                    if next_beam.len() == width {
                        break 'fill;
                    }
                }
            }
            if !drew_any {
                break;
            }
        }
        beam = next_beam;
    }

    // Budget exhausted: live hypotheses that satisfied everything still
    // count as results.
    completed.extend(beam.iter().filter(|h| h.fulfilled()).cloned());
    completed.sort_by(rank);

    if completed.is_empty() {
        let best_partial = beam
            .iter()
            .max_by(|a, b| {
                a.bank
                    .cmp(&b.bank)
                    .then(a.score.partial_cmp(&b.score).expect("scores are never NaN"))
            })
            .cloned()
            .unwrap_or_else(|| Hypothesis::root(constraints));
        return Err(BeamError::Unsatisfiable {
            max_tokens: params.max_tokens,
            total_steps: constraints.iter().map(|c| c.total_steps()).sum(),
            best_partial: Box::new(best_partial),
        });
    }
    Ok(completed)
}

/// One constrained search per palette, sharing the subject anchor.
///
/// Returns the top hypothesis of each run, in palette order.
pub fn seasonal_series<M: TokenModel>(
    model: &M,
    anchor: &CompiledConstraint,
    palette_constraints: &[CompiledConstraint],
    params: &BeamParams,
) -> Result<Vec<Hypothesis>, BeamError> {
    let mut out = Vec::with_capacity(palette_constraints.len());
    for palette in palette_constraints {
        let constraints = vec![anchor.clone(), palette.clone()];
        let ranked = beam_search(model, &constraints, params)?;
        out.push(ranked.into_iter().next().expect("beam_search returns ≥1"));
    }
    Ok(out)
}

//! Sequential Monte Carlo steering of token generation.
//!
//! A population of particles extends a shared prompt one token at a time.
//! Each step samples from a *proposal* — the model's distribution with
//! forbidden tokens masked out — and pays for the mismatch with an
//! importance weight: `log p(t) − log q(t)`, which for masking is exactly
//! `log(1 − forbidden mass)`. Particles whose effective sample size decays
//! below a threshold are multinomially resampled back to equal weights.
//! The result is a weighted sample from the model's distribution
//! conditioned on never emitting a forbidden token, not merely a greedy
//! "avoid these words" filter.
//!
//! Randomness is counter-based: every (step, particle) pair draws from its
//! own ChaCha stream derived from the run seed, so results are identical no
//! matter how particle stepping is scheduled.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::logprob::{logsumexp, LogProbError, LogProbVector};
use crate::provider::{ModelError, TokenModel};
use crate::vocab::{TokenId, VocabError, Vocabulary};

/// Fraction of the particle count the ESS must stay above.
pub const DEFAULT_ESS_THRESHOLD: f64 = 0.5;

/// Particle count used when a program does not pick one.
pub const DEFAULT_N_PARTICLES: usize = 64;

/// One hypothesis in the population.
#[derive(Debug, Clone)]
pub struct Particle {
    pub context: Vec<TokenId>,
    pub log_weight: f64,
    pub finished: bool,
}

/// What to generate and what to avoid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteeringProgram {
    pub prompt: String,
    pub forbidden_words: Vec<String>,
    pub max_tokens: usize,
}

/// Runtime knobs, separate from the program itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmcOptions {
    pub n_particles: usize,
    pub ess_threshold: f64,
    pub seed: u64,
}

impl Default for SmcOptions {
    fn default() -> Self {
        Self {
            n_particles: DEFAULT_N_PARTICLES,
            ess_threshold: DEFAULT_ESS_THRESHOLD,
            seed: 0,
        }
    }
}

/// On-disk program file: the program fields plus optional runtime knobs.
pub fn parse_program(json: &str) -> Result<(SteeringProgram, SmcOptions), SmcError> {
    parse_program_with(json, &SmcOptions::default())
}

/// [`parse_program`], but knobs the file omits fall back to `defaults`
/// instead of the built-ins.
pub fn parse_program_with(
    json: &str,
    defaults: &SmcOptions,
) -> Result<(SteeringProgram, SmcOptions), SmcError> {
    #[derive(Deserialize)]
    struct File {
        prompt: String,
        forbidden_words: Vec<String>,
        max_tokens: usize,
        n_particles: Option<usize>,
        ess_threshold: Option<f64>,
        seed: Option<u64>,
    }
    let f: File = serde_json::from_str(json)?;
    Ok((
        SteeringProgram {
            prompt: f.prompt,
            forbidden_words: f.forbidden_words,
            max_tokens: f.max_tokens,
        },
        SmcOptions {
            n_particles: f.n_particles.unwrap_or(defaults.n_particles),
            ess_threshold: f.ess_threshold.unwrap_or(defaults.ess_threshold),
            seed: f.seed.unwrap_or(defaults.seed),
        },
    ))
}

#[derive(Debug, thiserror::Error)]
pub enum SmcError {
    #[error("masking forbids every token in this context")]
    AllForbidden,
    #[error("every particle was killed by a condition violation")]
    AllDead,
    #[error("{unfinished} of {total} particles still running at the {max_tokens}-token budget")]
    BudgetExhausted {
        max_tokens: usize,
        unfinished: usize,
        total: usize,
        /// Texts and normalized weights of the particles that did finish.
        finished: Vec<(String, f64)>,
    },
    #[error("forbidden word {0:?} must be lowercase and non-empty")]
    InvalidForbiddenWord(String),
    #[error("particle count must be ≥ 1")]
    InvalidParticleCount,
    #[error("ess threshold must lie in (0, 1], got {0}")]
    InvalidEssThreshold(f64),
    #[error(transparent)]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    LogProb(#[from] LogProbError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
}

/// Token ids whose text contains any of `words` as a case-insensitive
/// substring. Compiled once per run and shared read-only by all particles.
pub fn forbidden_token_set(vocab: &Vocabulary, words: &[String]) -> BTreeSet<TokenId> {
    let mut set = BTreeSet::new();
    for word in words {
        set.extend(vocab.ids_containing(word));
    }
    set
}

/// The proposal distribution: forbidden entries −∞, renormalized.
pub fn masked_proposal(
    logprobs: &LogProbVector,
    forbidden: &BTreeSet<TokenId>,
) -> Result<LogProbVector, SmcError> {
    if forbidden.is_empty() {
        return Ok(logprobs.clone());
    }
    logprobs.masked(|t| !forbidden.contains(&t)).map_err(|e| match e {
        LogProbError::AllMasked => SmcError::AllForbidden,
        other => SmcError::LogProb(other),
    })
}

/// Advance one live particle by one token.
///
/// Samples from the masked proposal, adds `log p − log q` to the weight,
/// and applies the hard condition from the steering program: a forbidden
/// token zeroes the weight. With the proposal masking the same set, the
/// condition can never fire — it is kept as defense in depth.
pub fn particle_step<M: TokenModel>(
    p: &Particle,
    model: &M,
    forbidden: &BTreeSet<TokenId>,
    rng: &mut impl Rng,
) -> Result<Particle, SmcError> {
    debug_assert!(!p.finished, "finished particles are never stepped");
    let target = model.next_logprobs(&p.context)?;
    let proposal = masked_proposal(&target, forbidden)?;
    let tok = proposal.sample(rng);

    let mut next = p.clone();
    next.log_weight += target.get(tok) - proposal.get(tok);
    if forbidden.contains(&tok) {
        next.log_weight = f64::NEG_INFINITY;
    }
    next.context.push(tok);
    if tok == model.vocab().eos_id() {
        next.finished = true;
    }
    Ok(next)
}

/// `(Σw)² / Σw²` over linear weights; ranges from 1 (one particle carries
/// everything) to N (all equal).
pub fn effective_sample_size(log_weights: &[f64]) -> Result<f64, SmcError> {
    if log_weights.iter().all(|&w| w == f64::NEG_INFINITY) {
        return Err(SmcError::AllDead);
    }
    let lse = logsumexp(log_weights);
    let sum_sq: f64 = log_weights.iter().map(|&w| (2.0 * (w - lse)).exp()).sum();
    Ok(1.0 / sum_sq)
}

fn stream_rng(seed: u64, step: usize, lane: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((step as u64) << 32) | u64::from(lane));
    rng
}

const RESAMPLE_LANE: u32 = u32::MAX;

fn normalized(particles: &[&Particle], vocab: &Vocabulary) -> Vec<(String, f64)> {
    if particles.is_empty() {
        return Vec::new();
    }
    let logs: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
    let lse = logsumexp(&logs);
    particles
        .iter()
        .map(|p| {
            let text = vocab.detokenize(&p.context).expect("particle tokens are valid");
            (text, (p.log_weight - lse).exp())
        })
        .collect()
}

/// Run the steering program and return finished texts with normalized
/// weights.
///
/// Resampling triggers whenever the ESS drops below
/// `ess_threshold · n_particles`; it draws multinomially from the current
/// weights and resets all weights to equal. With a fixed seed the entire
/// run is reproducible token for token.
pub fn smc_run<M: TokenModel>(
    model: &M,
    program: &SteeringProgram,
    options: &SmcOptions,
) -> Result<Vec<(String, f64)>, SmcError> {
    if options.n_particles < 1 || options.n_particles > u32::MAX as usize - 1 {
        return Err(SmcError::InvalidParticleCount);
    }
    if !(options.ess_threshold > 0.0 && options.ess_threshold <= 1.0) {
        return Err(SmcError::InvalidEssThreshold(options.ess_threshold));
    }
    for word in &program.forbidden_words {
        if word.is_empty() || *word != word.to_lowercase() {
            return Err(SmcError::InvalidForbiddenWord(word.clone()));
        }
    }

    let vocab = model.vocab();
    let forbidden = forbidden_token_set(vocab, &program.forbidden_words);
    let prompt_tokens = vocab.tokenize(&program.prompt)?;
    let mut particles = vec![
        Particle {
            context: prompt_tokens,
            log_weight: 0.0,
            finished: false,
        };
        options.n_particles
    ];

    for step in 0..program.max_tokens {
        if particles.iter().all(|p| p.finished) {
            break;
        }
        for (i, slot) in particles.iter_mut().enumerate() {
            if slot.finished || slot.log_weight == f64::NEG_INFINITY {
                continue;
            }
            let mut rng = stream_rng(options.seed, step, i as u32);
            *slot = particle_step(slot, model, &forbidden, &mut rng)?;
        }

        let log_weights: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
        let ess = effective_sample_size(&log_weights)?;
        if ess < options.ess_threshold * options.n_particles as f64 {
            let lse = logsumexp(&log_weights);
            let probs: Vec<f64> = log_weights.iter().map(|&w| (w - lse).exp()).collect();
            let mut cumulative = Vec::with_capacity(probs.len());
            let mut acc = 0.0;
            for p in &probs {
                acc += p;
                cumulative.push(acc);
            }
            let mut rng = stream_rng(options.seed, step, RESAMPLE_LANE);
            let mut resampled = Vec::with_capacity(particles.len());
            for _ in 0..particles.len() {
                let u: f64 = rng.gen_range(0.0..1.0);
                let idx = cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(particles.len() - 1);
                let mut pick = particles[idx].clone();
                pick.log_weight = 0.0;
                resampled.push(pick);
            }
            particles = resampled;
        }
    }

    let finished: Vec<&Particle> = particles.iter().filter(|p| p.finished).collect();
    let unfinished = particles.len() - finished.len();
    if unfinished > 0 {
        return Err(SmcError::BudgetExhausted {
            max_tokens: program.max_tokens,
            unfinished,
            total: particles.len(),
            finished: normalized(&finished, vocab),
        });
    }
    Ok(normalized(&finished, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ngram::{word_vocab, NGramModel};

    #[test]
    fn forbidden_set_uses_substring_semantics() {
        let vocab = Vocabulary::with_byte_fallback(["red", "bored", "blue", "over"]).unwrap();
        let set = forbidden_token_set(&vocab, &["red".to_string()]);
        assert!(set.contains(&vocab.id_of(b"red").unwrap()));
        assert!(set.contains(&vocab.id_of(b"bored").unwrap()), "substring match");
        assert!(!set.contains(&vocab.id_of(b"blue").unwrap()));
        assert!(!set.contains(&vocab.eos_id()));
        assert!(forbidden_token_set(&vocab, &[]).is_empty());
    }

    #[test]
    fn masked_proposal_redistributes_and_rejects_total_masks() {
        let lp = LogProbVector::from_probs(&[0.25, 0.25, 0.25, 0.25]).unwrap();
        let untouched = masked_proposal(&lp, &BTreeSet::new()).unwrap();
        assert_eq!(untouched.values(), lp.values());

        let forbid: BTreeSet<TokenId> = [TokenId::new(3)].into();
        let masked = masked_proposal(&lp, &forbid).unwrap();
        for i in 0..3 {
            assert!((masked.probs()[i] - 1.0 / 3.0).abs() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            assert_ne!(masked.sample(&mut rng), TokenId::new(3));
        }

        let everything: BTreeSet<TokenId> = (0..4).map(TokenId::new).collect();
        assert!(matches!(
            masked_proposal(&lp, &everything),
            Err(SmcError::AllForbidden)
        ));
    }

    #[test]
    fn ess_spans_one_to_n() {
        let equal = vec![0.0; 10];
        assert!((effective_sample_size(&equal).unwrap() - 10.0).abs() < 1e-9);

        let mut lone = vec![f64::NEG_INFINITY; 10];
        lone[3] = -1.2;
        assert!((effective_sample_size(&lone).unwrap() - 1.0).abs() < 1e-9);

        // Linear weights [0.5, 0.25, 0.25]: Σw² = 0.375.
        let mixed = [0.5f64.ln(), 0.25f64.ln(), 0.25f64.ln()];
        assert!((effective_sample_size(&mixed).unwrap() - 1.0 / 0.375).abs() < 0.001);

        let dead = vec![f64::NEG_INFINITY; 4];
        assert!(matches!(effective_sample_size(&dead), Err(SmcError::AllDead)));
    }

    /// Tiny closed-vocabulary model: two letters plus eos, i.i.d. steps.
    /// With alpha = 2 over corpus "abab": P(a) = P(b) = 0.4, P(eos) = 0.2.
    fn coin_model() -> NGramModel {
        let vocab = Vocabulary::new(
            vec![b"a".to_vec(), b"b".to_vec(), b"<eos>".to_vec()],
            TokenId::new(2),
        )
        .unwrap();
        NGramModel::train("abab", 1, 2.0, vocab).unwrap()
    }

    #[test]
    fn weight_stays_zero_without_masking() {
        let model = coin_model();
        let p = Particle {
            context: vec![],
            log_weight: 0.0,
            finished: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let empty = BTreeSet::new();
        let mut current = p;
        for _ in 0..20 {
            if current.finished {
                break;
            }
            current = particle_step(&current, &model, &empty, &mut rng).unwrap();
            assert_eq!(current.log_weight, 0.0);
        }
    }

    #[test]
    fn weight_increment_is_log_one_minus_forbidden_mass() {
        let model = coin_model();
        let vocab = model.vocab();
        let forbidden = forbidden_token_set(vocab, &["b".to_string()]);
        let target = model.next_logprobs(&[]).unwrap();
        let mass: f64 = forbidden.iter().map(|&t| target.get(t).exp()).sum();
        assert!((mass - 0.4).abs() < 1e-12, "P(b) under the coin model");

        let p = Particle {
            context: vec![],
            log_weight: 0.0,
            finished: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let next = particle_step(&p, &model, &forbidden, &mut rng).unwrap();
            assert!(
                (next.log_weight - (1.0 - mass).ln()).abs() < 1e-12,
                "increment is log(1 − m) whatever token was drawn"
            );
            assert!(!forbidden.contains(next.context.last().unwrap()));
            assert!(next.log_weight.is_finite(), "condition never fires");
        }
    }

    #[test]
    fn eos_finishes_a_particle() {
        let model = coin_model();
        let p = Particle {
            context: vec![],
            log_weight: 0.0,
            finished: false,
        };
        let empty = BTreeSet::new();
        for seed in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let next = particle_step(&p, &model, &empty, &mut rng).unwrap();
            if next.finished {
                assert_eq!(*next.context.last().unwrap(), model.vocab().eos_id());
                return;
            }
        }
        panic!("eos has probability 0.2; 200 seeds should hit it");
    }

    #[test]
    fn single_particle_without_forbidden_words_is_ancestral_sampling() {
        let model = coin_model();
        let program = SteeringProgram {
            prompt: String::new(),
            forbidden_words: vec![],
            max_tokens: 40,
        };
        let options = SmcOptions {
            n_particles: 1,
            ess_threshold: 0.5,
            seed: 17,
        };
        let run = smc_run(&model, &program, &options);

        // Reference: draw from the model directly, using the same per-step
        // streams the runner uses for particle 0.
        let mut context: Vec<TokenId> = vec![];
        let mut finished_text = None;
        for step in 0..40 {
            let dist = model.next_logprobs(&context).unwrap();
            let mut rng = stream_rng(17, step, 0);
            let tok = dist.sample(&mut rng);
            context.push(tok);
            if tok == model.vocab().eos_id() {
                finished_text = Some(model.vocab().detokenize(&context).unwrap());
                break;
            }
        }
        match (run, finished_text) {
            (Ok(out), Some(text)) => {
                assert_eq!(out, vec![(text, 1.0)]);
            }
            (Err(SmcError::BudgetExhausted { .. }), None) => {}
            (got, want) => panic!("runner and reference disagree: {got:?} vs {want:?}"),
        }
    }

    #[test]
    fn fixed_seed_reproduces_the_run_exactly() {
        let model = coin_model();
        let program = SteeringProgram {
            prompt: "a".into(),
            forbidden_words: vec!["b".into()],
            max_tokens: 30,
        };
        let options = SmcOptions {
            n_particles: 32,
            ess_threshold: 0.5,
            seed: 101,
        };
        let a = smc_run(&model, &program, &options);
        let b = smc_run(&model, &program, &options);
        match (a, b) {
            (Ok(x), Ok(y)) => assert_eq!(x, y),
            (
                Err(SmcError::BudgetExhausted { finished: x, unfinished: ux, .. }),
                Err(SmcError::BudgetExhausted { finished: y, unfinished: uy, .. }),
            ) => {
                assert_eq!(x, y);
                assert_eq!(ux, uy);
            }
            other => panic!("runs diverged: {other:?}"),
        }
    }

    #[test]
    fn forbidden_words_never_surface_in_results() {
        let corpus = "a quiet field with red poppies and a blue sky \
                      a quiet field with golden wheat and a blue sky \
                      a red barn beside golden wheat under a blue sky";
        let model = NGramModel::train(corpus, 2, 0.05, word_vocab(corpus)).unwrap();
        let program = SteeringProgram {
            prompt: "a quiet field with".into(),
            forbidden_words: vec!["red".into()],
            max_tokens: 20,
        };
        for seed in 0..20u64 {
            let options = SmcOptions {
                n_particles: 16,
                ess_threshold: 0.5,
                seed,
            };
            let texts: Vec<String> = match smc_run(&model, &program, &options) {
                Ok(out) => out.into_iter().map(|(t, _)| t).collect(),
                Err(SmcError::BudgetExhausted { finished, .. }) => {
                    finished.into_iter().map(|(t, _)| t).collect()
                }
                Err(e) => panic!("{e}"),
            };
            for text in texts {
                assert!(!text.to_lowercase().contains("red"), "seed {seed}: {text:?}");
            }
        }
    }

    #[test]
    fn weights_equal_after_resampling_and_count_is_constant() {
        // Force frequent resampling with a tiny threshold-busting setup:
        // masking "b" gives every particle the same weight, so instead make
        // weights diverge by finishing times, then check invariants through
        // the public run with a high threshold.
        let model = coin_model();
        let program = SteeringProgram {
            prompt: String::new(),
            forbidden_words: vec!["b".into()],
            max_tokens: 25,
        };
        let options = SmcOptions {
            n_particles: 64,
            ess_threshold: 1.0,
            seed: 5,
        };
        // ess_threshold = 1.0 means "resample whenever weights are not all
        // equal", exercising the resampling path constantly.
        match smc_run(&model, &program, &options) {
            Ok(out) => {
                assert_eq!(out.len(), 64, "particle count constant");
                let total: f64 = out.iter().map(|(_, w)| w).sum();
                assert!((total - 1.0).abs() < 1e-9);
            }
            Err(SmcError::BudgetExhausted { total, .. }) => {
                assert_eq!(total, 64);
            }
            Err(e) => panic!("{e}"),
        }
    }

    /// Exact conditional distribution over finished, clean outcomes by full
    /// enumeration, and the total variation distance of the SMC estimate.
    fn tv_against_enumeration(n_particles: usize, seed: u64) -> f64 {
        let model = coin_model();
        let vocab = model.vocab();
        let eos = vocab.eos_id();
        let forbidden = forbidden_token_set(vocab, &["b".to_string()]);
        let max_tokens = 5;

        // Enumerate every sequence of ≤ max_tokens draws; keep those that
        // end in eos and never touch a forbidden token.
        let mut exact: std::collections::BTreeMap<String, f64> = Default::default();
        let mut stack: Vec<(Vec<TokenId>, f64)> = vec![(vec![], 0.0)];
        while let Some((ctx, logp)) = stack.pop() {
            let dist = model.next_logprobs(&ctx).unwrap();
            for i in 0..vocab.len() {
                let t = TokenId::new(i as u32);
                let lp = logp + dist.get(t);
                if forbidden.contains(&t) {
                    continue;
                }
                let mut next = ctx.clone();
                next.push(t);
                if t == eos {
                    *exact.entry(vocab.detokenize(&next).unwrap()).or_insert(0.0) += lp.exp();
                } else if next.len() < max_tokens {
                    stack.push((next, lp));
                }
            }
        }
        let z: f64 = exact.values().sum();
        for v in exact.values_mut() {
            *v /= z;
        }

        let program = SteeringProgram {
            prompt: String::new(),
            forbidden_words: vec!["b".into()],
            max_tokens,
        };
        let options = SmcOptions {
            n_particles,
            ess_threshold: 0.5,
            seed,
        };
        let weighted = match smc_run(&model, &program, &options) {
            Ok(out) => out,
            Err(SmcError::BudgetExhausted { finished, .. }) => finished,
            Err(e) => panic!("{e}"),
        };
        let mut empirical: std::collections::BTreeMap<String, f64> = Default::default();
        for (text, w) in weighted {
            *empirical.entry(text).or_insert(0.0) += w;
        }

        let keys: BTreeSet<&String> = exact.keys().chain(empirical.keys()).collect();
        0.5 * keys
            .into_iter()
            .map(|k| {
                (exact.get(k).copied().unwrap_or(0.0) - empirical.get(k).copied().unwrap_or(0.0))
                    .abs()
            })
            .sum::<f64>()
    }

    #[test]
    fn weighted_sample_converges_to_the_enumerated_conditional() {
        let tv = tv_against_enumeration(2000, 4);
        assert!(tv <= 0.05, "TV {tv} exceeds 0.05 at N=2000");

        // Convergence trend: growing N shrinks the distance.
        let coarse = tv_against_enumeration(50, 4);
        let fine = tv_against_enumeration(2000, 4);
        assert!(
            fine <= coarse + 0.02,
            "TV should not degrade with N: {coarse} → {fine}"
        );
    }

    #[test]
    fn program_file_round_trips_with_defaults() {
        let (program, options) = parse_program(
            "{\"prompt\":\"p\",\"forbidden_words\":[\"red\"],\"max_tokens\":9}",
        )
        .unwrap();
        assert_eq!(program.prompt, "p");
        assert_eq!(program.max_tokens, 9);
        assert_eq!(options.n_particles, DEFAULT_N_PARTICLES);
        assert_eq!(options.ess_threshold, DEFAULT_ESS_THRESHOLD);
        assert_eq!(options.seed, 0);

        let (_, custom) = parse_program(
            "{\"prompt\":\"p\",\"forbidden_words\":[],\"max_tokens\":3,\
             \"n_particles\":7,\"ess_threshold\":0.25,\"seed\":99}",
        )
        .unwrap();
        assert_eq!(custom.n_particles, 7);
        assert_eq!(custom.ess_threshold, 0.25);
        assert_eq!(custom.seed, 99);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let model = coin_model();
        let program = SteeringProgram {
            prompt: String::new(),
            forbidden_words: vec!["Red".into()],
            max_tokens: 4,
        };
        let options = SmcOptions::default();
        assert!(matches!(
            smc_run(&model, &program, &options),
            Err(SmcError::InvalidForbiddenWord(_))
        ));

        let ok_program = SteeringProgram {
            prompt: String::new(),
            forbidden_words: vec![],
            max_tokens: 4,
        };
        assert!(matches!(
            smc_run(
                &model,
                &ok_program,
                &SmcOptions {
                    n_particles: 0,
                    ..Default::default()
                }
            ),
            Err(SmcError::InvalidParticleCount)
        ));
        assert!(matches!(
            smc_run(
                &model,
                &ok_program,
                &SmcOptions {
                    ess_threshold: 0.0,
                    ..Default::default()
                }
            ),
            Err(SmcError::InvalidEssThreshold(_))
        ));
    }

    #[test]
    fn all_forbidden_kills_the_run() {
        // With alpha = 0, eos never smooths in: the whole distribution sits
        // on "a" and "b", and forbidding both leaves nothing to sample.
        let vocab = Vocabulary::new(
            vec![b"a".to_vec(), b"b".to_vec(), b"<eos>".to_vec()],
            TokenId::new(2),
        )
        .unwrap();
        let model = NGramModel::train("abab", 1, 0.0, vocab).unwrap();
        let program = SteeringProgram {
            prompt: String::new(),
            forbidden_words: vec!["a".into(), "b".into()],
            max_tokens: 4,
        };
        let err = smc_run(&model, &program, &SmcOptions::default()).unwrap_err();
        assert!(matches!(err, SmcError::AllForbidden), "{err}");
    }
}

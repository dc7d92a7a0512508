//! Steering engine for text generation over generic token models.
//!
//! The crate is organized around one trait, [`TokenModel`]: anything that can
//! report a vocabulary and a normalized next-token log-probability vector.
//! On top of it sit several decoding strategies that shape *what* gets
//! generated without touching the model itself:
//!
//! - grammar-constrained sampling ([`grammar`]): compile a BNF-style grammar,
//!   mask every step to tokens that keep a parse alive;
//! - constrained beam search ([`beam`]): keep only hypotheses that make
//!   progress through required phrases, selecting round-robin across
//!   progress banks;
//! - classifier-free guidance ([`guidance`]): extrapolate away from a
//!   negative context, with hard token blacklists;
//! - sequential Monte Carlo steering ([`smc`]): particle filtering with
//!   masked proposals and importance weights.
//!
//! [`retrieval`] and [`director`] handle the prompt side: hashed
//! bag-of-words embeddings with exact nearest-neighbor search, checklist
//! prompt assembly, emphasis syntax, and keyframe schedules for animation
//! prompts.

pub mod beam;
pub mod constraints;
pub mod director;
pub mod grammar;
pub mod guidance;
pub mod logprob;
pub mod ngram;
pub mod provider;
pub mod remote;
pub mod retrieval;
pub mod smc;
pub mod vocab;

pub use beam::{beam_search, seasonal_series, BeamError, BeamParams, Hypothesis};
pub use constraints::{
    compile_constraint, CompiledConstraint, ConstraintError, ConstraintSpec, ConstraintState,
    PaletteTable,
};
pub use director::{
    apply_emphasis, build_prompt, direct, keyframe_schedule, lexical_overlap, validate_schedule,
    DirectMode, DirectOptions, DirectorError, EmphasisMap, Keyframe, KeyframeSchedule,
    PromptSpec, CHECKLIST_INSTRUCTION, DEFAULT_OVERLAP_THRESHOLD,
};
pub use guidance::{
    apply_blacklist, blacklist_word, build_negative_context, guided_decode, guided_logprobs,
    load_demos, select_negative_demos, GuidanceConfig, GuidanceError, NegativeDemo,
    DEFAULT_GAMMA,
};
pub use logprob::{logsumexp, LogProbError, LogProbVector, NORM_TOLERANCE};
pub use ngram::NGramModel;
pub use provider::{ModelError, TokenModel};
pub use retrieval::{
    assemble_context, cosine, embed, PromptExample, PromptStore, StoreError, DEFAULT_SHOTS,
    EMBED_DIM,
};
pub use smc::{
    effective_sample_size, forbidden_token_set, masked_proposal, parse_program,
    parse_program_with, particle_step, smc_run, Particle, SmcError, SmcOptions,
    SteeringProgram, DEFAULT_ESS_THRESHOLD, DEFAULT_N_PARTICLES,
};
pub use vocab::{TokenId, VocabError, Vocabulary};

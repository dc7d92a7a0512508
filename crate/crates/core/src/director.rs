//! Checklist prompt construction, emphasis weighting, and keyframe
//! scheduling.
//!
//! [`build_prompt`] turns a nine-category checklist into a single
//! comma-separated prompt: subject first and verbatim, every later field
//! decapitalized — but only when its leading word is ordinary prose.
//! Interior capitals ("DeviantArt", "H.R."), signal a name that must
//! survive untouched. [`keyframe_schedule`] produces animation prompts that
//! keep one anchor phrase verbatim in every frame and refuse to ship
//! adjacent frames whose word overlap is too low to interpolate between.
//! [`direct`] is the end-to-end path: retrieve examples, assemble a
//! few-shot context, then decode under a grammar or guidance.

use serde::{Deserialize, Serialize};

use crate::grammar::{
    grammar_sample_with_context, Grammar, GrammarSampleError, SampleParams,
};
use crate::guidance::{guided_decode, GuidanceConfig, GuidanceError};
use crate::provider::TokenModel;
use crate::retrieval::{assemble_context, PromptStore};
use crate::vocab::VocabError;

/// Minimum word-level Jaccard overlap adjacent keyframes must share.
pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.5;

/// Instruction placed at the head of a [`direct`] few-shot context.
pub const CHECKLIST_INSTRUCTION: &str = "Write one image prompt as a single \
comma-separated line covering, in order: subject, medium, style, artist, \
website, resolution, additional details, color, and lighting.";

/// The nine-category prompt checklist. Only `subject` is required.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptSpec {
    pub subject: Option<String>,
    pub medium: Option<String>,
    pub style: Option<String>,
    pub artist: Option<String>,
    pub website: Option<String>,
    pub resolution: Option<String>,
    pub additional_details: Option<String>,
    pub color: Option<String>,
    pub lighting: Option<String>,
}

/// Phrases to re-weight inside a finished prompt.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EmphasisMap {
    pub entries: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyframe {
    pub index: usize,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyframeSchedule {
    pub anchor: String,
    pub frames: Vec<Keyframe>,
}

#[derive(Debug, thiserror::Error)]
pub enum DirectorError {
    #[error("prompt spec must include a subject")]
    MissingSubject,
    #[error("emphasis phrases must be non-empty")]
    EmptyPhrase,
    #[error("emphasis weight {weight} for {phrase:?} is outside [0.1, 2.0]")]
    WeightOutOfBounds { phrase: String, weight: f64 },
    #[error("emphasis phrase {0:?} does not occur in the prompt")]
    PhraseNotFound(String),
    #[error("emphasis phrases {first:?} and {second:?} overlap in the prompt")]
    OverlappingPhrases { first: String, second: String },
    #[error("keyframe anchor must be non-empty")]
    EmptyAnchor,
    #[error("{stages} stages but {indices} frame indices")]
    StageCountMismatch { stages: usize, indices: usize },
    #[error("frame indices must be strictly increasing ({prev} then {next})")]
    NonIncreasingIndices { prev: usize, next: usize },
    #[error("frame {index} does not contain the anchor")]
    AnchorMissing { index: usize },
    #[error(
        "frames {left} and {right} overlap only {overlap:.3}, below the {threshold} threshold"
    )]
    OverlapTooLow {
        left: usize,
        right: usize,
        overlap: f64,
        threshold: f64,
    },
    #[error(transparent)]
    Grammar(#[from] GrammarSampleError),
    #[error(transparent)]
    Guidance(#[from] GuidanceError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
}

/// Lowercase the leading character of `text` unless its first word carries
/// an interior capital (a brand or initialism that must stay intact).
fn decapitalize(text: &str) -> String {
    let first_run: String = text
        .chars()
        .skip_while(|c| !c.is_alphanumeric())
        .take_while(|c| c.is_alphanumeric())
        .collect();
    if first_run.chars().skip(1).any(|c| c.is_uppercase()) {
        return text.to_string();
    }
    let mut chars = text.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Join the checklist into one prompt: fields in fixed order, separated by
/// ", ", subject verbatim and everything else decapitalized.
pub fn build_prompt(spec: &PromptSpec) -> Result<String, DirectorError> {
    let subject = spec.subject.as_deref().ok_or(DirectorError::MissingSubject)?;
    let mut parts = vec![subject.to_string()];
    for field in [
        &spec.medium,
        &spec.style,
        &spec.artist,
        &spec.website,
        &spec.resolution,
        &spec.additional_details,
        &spec.color,
        &spec.lighting,
    ] {
        if let Some(text) = field {
            if !text.is_empty() {
                parts.push(decapitalize(text));
            }
        }
    }
    Ok(parts.join(", "))
}

/// Wrap each phrase's first occurrence as `(phrase:W)`, one decimal place.
/// Weight 1.0 validates but leaves the phrase untouched.
pub fn apply_emphasis(prompt: &str, emphasis: &EmphasisMap) -> Result<String, DirectorError> {
    let mut spans: Vec<(usize, usize, &str, f64)> = Vec::new();
    for (phrase, weight) in &emphasis.entries {
        if phrase.is_empty() {
            return Err(DirectorError::EmptyPhrase);
        }
        if !(0.1..=2.0).contains(weight) {
            return Err(DirectorError::WeightOutOfBounds {
                phrase: phrase.clone(),
                weight: *weight,
            });
        }
        let start = prompt
            .find(phrase.as_str())
            .ok_or_else(|| DirectorError::PhraseNotFound(phrase.clone()))?;
        spans.push((start, start + phrase.len(), phrase, *weight));
    }
    spans.sort_by_key(|&(start, end, ..)| (start, end));
    for pair in spans.windows(2) {
        if pair[1].0 < pair[0].1 {
            return Err(DirectorError::OverlappingPhrases {
                first: pair[0].2.to_string(),
                second: pair[1].2.to_string(),
            });
        }
    }

    let mut out = String::with_capacity(prompt.len());
    let mut cursor = 0;
    for (start, end, phrase, weight) in spans {
        out.push_str(&prompt[cursor..start]);
        if weight == 1.0 {
            out.push_str(phrase);
        } else {
            out.push_str(&format!("({phrase}:{weight:.1})"));
        }
        cursor = end;
    }
    out.push_str(&prompt[cursor..]);
    Ok(out)
}

fn word_set(text: &str) -> std::collections::BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Jaccard index over lowercase word sets; two empty texts count as fully
/// overlapping.
pub fn lexical_overlap(a: &str, b: &str) -> f64 {
    let wa = word_set(a);
    let wb = word_set(b);
    if wa.is_empty() && wb.is_empty() {
        return 1.0;
    }
    let intersection = wa.intersection(&wb).count() as f64;
    let union = wa.union(&wb).count() as f64;
    intersection / union
}

/// Re-check every schedule invariant: strictly increasing indices, anchor
/// present (case-insensitively) in each frame, adjacent overlap at or above
/// `threshold`.
pub fn validate_schedule(
    schedule: &KeyframeSchedule,
    threshold: f64,
) -> Result<(), DirectorError> {
    if schedule.anchor.is_empty() {
        return Err(DirectorError::EmptyAnchor);
    }
    let anchor = schedule.anchor.to_lowercase();
    for pair in schedule.frames.windows(2) {
        if pair[1].index <= pair[0].index {
            return Err(DirectorError::NonIncreasingIndices {
                prev: pair[0].index,
                next: pair[1].index,
            });
        }
    }
    for frame in &schedule.frames {
        if !frame.prompt.to_lowercase().contains(&anchor) {
            return Err(DirectorError::AnchorMissing { index: frame.index });
        }
    }
    for pair in schedule.frames.windows(2) {
        let overlap = lexical_overlap(&pair[0].prompt, &pair[1].prompt);
        if overlap < threshold {
            return Err(DirectorError::OverlapTooLow {
                left: pair[0].index,
                right: pair[1].index,
                overlap,
                threshold,
            });
        }
    }
    Ok(())
}

/// Build one prompt per stage — "The {anchor} {stage}." — at the given
/// frame indices, refusing schedules whose adjacent frames drift too far
/// apart to interpolate.
pub fn keyframe_schedule(
    anchor: &str,
    stages: &[String],
    frame_indices: &[usize],
    overlap_threshold: f64,
) -> Result<KeyframeSchedule, DirectorError> {
    if anchor.is_empty() {
        return Err(DirectorError::EmptyAnchor);
    }
    if stages.len() != frame_indices.len() {
        return Err(DirectorError::StageCountMismatch {
            stages: stages.len(),
            indices: frame_indices.len(),
        });
    }
    let frames = stages
        .iter()
        .zip(frame_indices)
        .map(|(stage, &index)| Keyframe {
            index,
            prompt: format!("The {anchor} {stage}."),
        })
        .collect();
    let schedule = KeyframeSchedule {
        anchor: anchor.to_string(),
        frames,
    };
    validate_schedule(&schedule, overlap_threshold)?;
    Ok(schedule)
}

/// How [`direct`] turns the assembled context into a prompt.
pub enum DirectMode {
    /// Sample under a grammar; the output is a member of its language.
    Grammar(Grammar),
    /// Sample under classifier-free guidance and a blacklist.
    Guided(GuidanceConfig),
}

pub struct DirectOptions {
    pub instruction: String,
    pub shots: usize,
    pub sample: SampleParams,
    pub mode: DirectMode,
}

/// End-to-end prompt direction: retrieve `shots` similar examples, build a
/// few-shot context, and decode the final prompt under the chosen mode.
pub fn direct<M: TokenModel>(
    model: &M,
    store: &PromptStore,
    request: &str,
    options: &DirectOptions,
) -> Result<String, DirectorError> {
    let context_text = assemble_context(&options.instruction, store, request, options.shots);
    let context = model.vocab().tokenize(&context_text)?;
    match &options.mode {
        DirectMode::Grammar(grammar) => {
            Ok(grammar_sample_with_context(model, grammar, &context, &options.sample)?)
        }
        DirectMode::Guided(config) => {
            Ok(guided_decode(model, &context, config, &options.sample)?)
        }
    }
}

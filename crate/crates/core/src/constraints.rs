//! Sequence-level constraints for beam decoding.
//!
//! A constraint is one or more phrases that must appear in the generated
//! text as a contiguous run of tokens. Compilation turns each phrase into
//! its token alternatives (bare and leading-space spellings), and matching
//! runs a KMP automaton over token ids so overlapping near-misses keep their
//! longest useful progress instead of resetting to zero.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::vocab::{TokenId, VocabError, Vocabulary};

/// Declarative constraint, as written in constraint files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSpec {
    /// One exact phrase that must appear.
    Phrasal { phrase: String },
    /// At least one of the listed phrases must appear.
    Disjunctive { phrases: Vec<String> },
    /// At least one phrase of the named palette must appear.
    ColorPatterns { palette: String },
    /// Like [`ConstraintSpec::Phrasal`], but marks the central subject so
    /// the compiled form can be reused across a series of generations.
    SubjectAnchor { phrase: String },
}

/// Named palettes, each a list of color-mood phrases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PaletteTable(pub BTreeMap<String, Vec<String>>);

impl PaletteTable {
    pub fn get(&self, name: &str) -> Option<&[String]> {
        self.0.get(name).map(|v| v.as_slice())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(|s| s.as_str())
    }
}

impl Default for PaletteTable {
    /// Eight stock palettes. "winter hues" and "spring blossoms" are the
    /// load-bearing entries (the seasonal-series walkthrough names them);
    /// the rest are sensible companions.
    fn default() -> Self {
        let entries: [(&str, &[&str]); 8] = [
            ("winter", &["winter hues", "snowy palette", "icy blues"]),
            ("spring", &["spring blossoms", "fresh greens", "pastel petals"]),
            ("summer", &["summer glow", "golden sunlight", "vivid greens"]),
            ("fall", &["fall colors", "autumn leaves", "amber tones"]),
            ("sunrise", &["sunrise hues", "dawn glow", "soft morning light"]),
            ("sunset", &["sunset colors", "dusk palette", "burnt orange sky"]),
            ("neon", &["neon glow", "electric colors", "vivid magenta"]),
            ("pastel", &["pastel tones", "soft pastels", "muted colors"]),
        ];
        PaletteTable(
            entries
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConstraintError {
    #[error("constraint phrase is empty")]
    EmptyPhrase,
    #[error("disjunctive constraint lists no phrases")]
    NoPhrases,
    #[error("unknown palette `{0}`")]
    UnknownPalette(String),
    #[error(transparent)]
    Vocab(#[from] VocabError),
}

/// Matching progress of one constraint along a hypothesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintState {
    /// Matched token count into each alternative (KMP automaton state).
    progress: Vec<usize>,
    fulfilled: bool,
}

impl ConstraintState {
    pub fn fulfilled(&self) -> bool {
        self.fulfilled
    }
}

/// A constraint compiled against a vocabulary: token-id alternatives plus
/// their KMP failure functions.
#[derive(Debug, Clone)]
pub struct CompiledConstraint {
    /// Each phrase spelled as tokens, bare and (when distinct) with a
    /// leading space, so the phrase matches both at the start of a text and
    /// after other words.
    alternatives: Vec<Vec<TokenId>>,
    failures: Vec<Vec<usize>>,
    total_steps: usize,
    reusable: bool,
    label: String,
}

fn failure_function(pattern: &[TokenId]) -> Vec<usize> {
    let mut fail = vec![0usize; pattern.len()];
    let mut k = 0;
    for i in 1..pattern.len() {
        while k > 0 && pattern[i] != pattern[k] {
            k = fail[k - 1];
        }
        if pattern[i] == pattern[k] {
            k += 1;
        }
        fail[i] = k;
    }
    fail
}

fn kmp_step(pattern: &[TokenId], fail: &[usize], mut j: usize, tok: TokenId) -> usize {
    while j > 0 && (j == pattern.len() || pattern[j] != tok) {
        j = fail[j - 1];
    }
    if j < pattern.len() && pattern[j] == tok {
        j + 1
    } else {
        0
    }
}

/// Resolve a spec to phrases and compile them against `vocab`.
pub fn compile_constraint(
    spec: &ConstraintSpec,
    palettes: &PaletteTable,
    vocab: &Vocabulary,
) -> Result<CompiledConstraint, ConstraintError> {
    let (phrases, reusable, label): (Vec<String>, bool, String) = match spec {
        ConstraintSpec::Phrasal { phrase } => (vec![phrase.clone()], false, phrase.clone()),
        ConstraintSpec::SubjectAnchor { phrase } => (vec![phrase.clone()], true, phrase.clone()),
        ConstraintSpec::Disjunctive { phrases } => {
            if phrases.is_empty() {
                return Err(ConstraintError::NoPhrases);
            }
            (phrases.clone(), false, phrases.join(" | "))
        }
        ConstraintSpec::ColorPatterns { palette } => {
            let phrases = palettes
                .get(palette)
                .ok_or_else(|| ConstraintError::UnknownPalette(palette.clone()))?;
            if phrases.is_empty() {
                return Err(ConstraintError::UnknownPalette(palette.clone()));
            }
            (phrases.to_vec(), false, format!("palette:{palette}"))
        }
    };

    let mut alternatives: Vec<Vec<TokenId>> = Vec::new();
    for phrase in &phrases {
        if phrase.trim().is_empty() {
            return Err(ConstraintError::EmptyPhrase);
        }
        let bare = vocab.tokenize(phrase)?;
        if bare.is_empty() {
            return Err(ConstraintError::EmptyPhrase);
        }
        let mut forms = vec![bare];
        // Mid-text spelling, only when the vocabulary can spell a leading
        // space at all.
        if let Ok(spaced) = vocab.tokenize(&format!(" {phrase}")) {
            forms.push(spaced);
        }
        for toks in forms {
            if !alternatives.contains(&toks) {
                alternatives.push(toks);
            }
        }
    }
    let failures = alternatives.iter().map(|a| failure_function(a)).collect();
    let total_steps = alternatives.iter().map(Vec::len).min().expect("≥1 phrase");
    Ok(CompiledConstraint {
        alternatives,
        failures,
        total_steps,
        reusable,
        label,
    })
}

impl CompiledConstraint {
    pub fn initial(&self) -> ConstraintState {
        ConstraintState {
            progress: vec![0; self.alternatives.len()],
            fulfilled: false,
        }
    }

    /// Tokens in the shortest alternative; the step count a fulfilled
    /// constraint contributes to its hypothesis's bank.
    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    /// Whether this constraint may be shared across generation calls
    /// (subject anchors are; everything else is call-local).
    pub fn reusable(&self) -> bool {
        self.reusable
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Advance the automaton by one emitted token. Fulfillment is monotone:
    /// a fulfilled state ignores further tokens.
    pub fn step(&self, state: &ConstraintState, tok: TokenId) -> ConstraintState {
        if state.fulfilled {
            return state.clone();
        }
        let mut progress = Vec::with_capacity(state.progress.len());
        let mut fulfilled = false;
        for (a, &j) in state.progress.iter().enumerate() {
            let next = kmp_step(&self.alternatives[a], &self.failures[a], j, tok);
            if next == self.alternatives[a].len() {
                fulfilled = true;
            }
            progress.push(next);
        }
        ConstraintState { progress, fulfilled }
    }

    /// Bank contribution: best progress while matching, pinned to
    /// `total_steps` once fulfilled.
    pub fn steps_done(&self, state: &ConstraintState) -> usize {
        if state.fulfilled {
            self.total_steps
        } else {
            state.progress.iter().copied().max().unwrap_or(0)
        }
    }

    /// The single token to force-feed next from `state`, or `None` when
    /// fulfilled.
    ///
    /// Picks the most-advanced alternative; on a fresh state it prefers the
    /// spelling that concatenates cleanly — the leading-space form inside
    /// running text, the bare form at the start.
    pub fn forced_token(
        &self,
        state: &ConstraintState,
        vocab: &Vocabulary,
        at_text_start: bool,
    ) -> Option<TokenId> {
        if state.fulfilled {
            return None;
        }
        let best = *state.progress.iter().max().expect("≥1 alternative");
        let candidates: Vec<usize> = (0..self.alternatives.len())
            .filter(|a| state.progress[*a] == best)
            .collect();
        let pick = if best == 0 && candidates.len() > 1 {
            *candidates
                .iter()
                .find(|a| {
                    let first = self.alternatives[**a][0];
                    let starts_with_space = vocab
                        .bytes(first)
                        .map(|b| b.first() == Some(&b' '))
                        .unwrap_or(false);
                    starts_with_space != at_text_start
                })
                .unwrap_or(&candidates[0])
        } else {
            candidates[0]
        };
        Some(self.alternatives[pick][state.progress[pick]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ngram::word_vocab;

    fn feed(c: &CompiledConstraint, tokens: &[TokenId]) -> ConstraintState {
        let mut s = c.initial();
        for t in tokens {
            s = c.step(&s, *t);
        }
        s
    }

    #[test]
    fn phrasal_fulfills_on_its_own_tokens() {
        let vocab = word_vocab("an oak tree in winter");
        let c = compile_constraint(
            &ConstraintSpec::Phrasal { phrase: "oak tree".into() },
            &PaletteTable::default(),
            &vocab,
        )
        .unwrap();
        assert_eq!(c.total_steps(), 2);
        let toks = vocab.tokenize("oak tree").unwrap();
        assert_eq!(toks.len(), 2);
        let s = feed(&c, &toks);
        assert!(s.fulfilled());
        assert_eq!(c.steps_done(&s), 2);
    }

    #[test]
    fn leading_space_spelling_matches_mid_text() {
        let vocab = word_vocab("an oak tree in winter");
        let c = compile_constraint(
            &ConstraintSpec::Phrasal { phrase: "oak tree".into() },
            &PaletteTable::default(),
            &vocab,
        )
        .unwrap();
        let toks = vocab.tokenize("an oak tree").unwrap();
        assert!(feed(&c, &toks).fulfilled());
    }

    #[test]
    fn disjunctive_fulfills_on_any_alternative() {
        let vocab = word_vocab("next to above under");
        let c = compile_constraint(
            &ConstraintSpec::Disjunctive {
                phrases: vec!["next to".into(), "above".into()],
            },
            &PaletteTable::default(),
            &vocab,
        )
        .unwrap();
        let s = feed(&c, &vocab.tokenize("above").unwrap());
        assert!(s.fulfilled());
        // total_steps is the shortest alternative: "above" is one token.
        assert_eq!(c.total_steps(), 1);
    }

    #[test]
    fn color_patterns_resolves_through_the_palette_table() {
        let vocab = word_vocab("a scene with winter hues and snow");
        let c = compile_constraint(
            &ConstraintSpec::ColorPatterns { palette: "winter".into() },
            &PaletteTable::default(),
            &vocab,
        )
        .unwrap();
        let s = feed(&c, &vocab.tokenize("a scene with winter hues").unwrap());
        assert!(s.fulfilled());

        let err = compile_constraint(
            &ConstraintSpec::ColorPatterns { palette: "nosuch".into() },
            &PaletteTable::default(),
            &vocab,
        )
        .unwrap_err();
        assert_eq!(err, ConstraintError::UnknownPalette("nosuch".into()));
    }

    #[test]
    fn mismatch_resets_to_longest_border_not_zero() {
        // Pattern [a, a, b] fed [a, a, a, b]: the third `a` must keep two
        // matched tokens of progress, so the final `b` completes the match.
        let vocab = Vocabulary::new(
            vec![b"a".to_vec(), b"b".to_vec(), b"<eos>".to_vec()],
            TokenId::new(2),
        )
        .unwrap();
        let c = compile_constraint(
            &ConstraintSpec::Phrasal { phrase: "aab".into() },
            &PaletteTable::default(),
            &vocab,
        )
        .unwrap();
        let a = vocab.id_of(b"a").unwrap();
        let b = vocab.id_of(b"b").unwrap();
        let s = feed(&c, &[a, a, a, b]);
        assert!(s.fulfilled(), "KMP border reset must catch the overlap");
    }

    #[test]
    fn fulfillment_is_monotone() {
        let vocab = word_vocab("oak tree winter");
        let c = compile_constraint(
            &ConstraintSpec::Phrasal { phrase: "oak".into() },
            &PaletteTable::default(),
            &vocab,
        )
        .unwrap();
        let mut s = feed(&c, &vocab.tokenize("oak").unwrap());
        assert!(s.fulfilled());
        for t in vocab.tokenize(" tree winter oak").unwrap() {
            s = c.step(&s, t);
            assert!(s.fulfilled());
        }
    }

    #[test]
    fn forced_token_prefers_the_spelling_that_fits() {
        let vocab = word_vocab("oak tree tall");
        let c = compile_constraint(
            &ConstraintSpec::SubjectAnchor { phrase: "oak tree".into() },
            &PaletteTable::default(),
            &vocab,
        )
        .unwrap();
        assert!(c.reusable());
        let init = c.initial();
        let at_start = c.forced_token(&init, &vocab, true).unwrap();
        assert_eq!(vocab.bytes(at_start).unwrap(), b"oak");
        let mid_text = c.forced_token(&init, &vocab, false).unwrap();
        assert_eq!(vocab.bytes(mid_text).unwrap(), b" oak");
        // Once progress exists, the continuation of the advanced alternative
        // is forced.
        let s = c.step(&init, at_start);
        let next = c.forced_token(&s, &vocab, false).unwrap();
        assert_eq!(vocab.bytes(next).unwrap(), b" tree");
    }

    #[test]
    fn empty_phrases_are_rejected() {
        let vocab = word_vocab("x");
        for spec in [
            ConstraintSpec::Phrasal { phrase: "  ".into() },
            ConstraintSpec::Disjunctive { phrases: vec![] },
        ] {
            assert!(compile_constraint(&spec, &PaletteTable::default(), &vocab).is_err());
        }
    }

    #[test]
    fn spec_files_parse_with_kind_tags() {
        let json = r#"[
            {"kind": "subject_anchor", "phrase": "oak tree"},
            {"kind": "color_patterns", "palette": "winter"},
            {"kind": "disjunctive", "phrases": ["next to", "above"]},
            {"kind": "phrasal", "phrase": "golden hour"}
        ]"#;
        let specs: Vec<ConstraintSpec> = serde_json::from_str(json).unwrap();
        assert_eq!(specs.len(), 4);
        assert_eq!(
            specs[0],
            ConstraintSpec::SubjectAnchor { phrase: "oak tree".into() }
        );
    }

    #[test]
    fn default_palette_table_round_trips_as_json() {
        let table = PaletteTable::default();
        assert_eq!(table.names().count(), 8);
        assert!(table.get("winter").unwrap().contains(&"winter hues".to_string()));
        assert!(table.get("spring").unwrap().contains(&"spring blossoms".to_string()));
        let json = serde_json::to_string(&table).unwrap();
        let back: PaletteTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, table);
    }
}

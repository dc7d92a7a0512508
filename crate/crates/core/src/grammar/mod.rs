//! Context-free grammars compiled for byte-level incremental recognition.
//!
//! A [`Grammar`] is compiled once (productivity-checked, separators resolved)
//! and then drives three things: the incremental [`RecognizerState`] that
//! accepts or rejects byte prefixes, exact [`TokenMask`]s over a vocabulary,
//! and [`enumerate_language`] as a brute-force oracle for the other two.
//!
//! Separators are part of the grammar, not the recognizer: the parser
//! inserts an explicit [`Symbol::Separator`] between adjacent production
//! symbols (unless joined with `~`), so "cat sitting" is literally the byte
//! string the recognizer sees.

mod enumerate;
mod parse;
mod recognizer;
mod sample;

pub use enumerate::{enumerate_language, enumerate_language_capped, EnumerateError, DEFAULT_STRING_CAP};
pub use parse::parse_grammar;
pub use recognizer::{RecognizerState, RejectError, TokenMask};
pub use sample::{grammar_sample, grammar_sample_with_context, GrammarSampleError, SampleParams};

/// One position in a production body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    /// Index into the grammar's nonterminal table.
    NonTerminal(usize),
    /// Index into the grammar's terminal table.
    Terminal(usize),
    /// The grammar-wide separator byte string (never present when that
    /// string is empty).
    Separator,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    pub lhs: usize,
    pub rhs: Vec<Symbol>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GrammarError {
    #[error("line {line}, column {col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("line {line}, column {col}: undefined symbol `{name}`")]
    UndefinedSymbol {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("line {line}, column {col}: empty terminal")]
    EmptyTerminal { line: usize, col: usize },
    #[error("nonterminal `{name}` cannot derive any terminal string")]
    Unproductive { name: String },
    #[error("grammar has no rules")]
    NoRules,
    #[error("start symbol index {0} out of range")]
    BadStart(usize),
    #[error("production {0} is malformed: {1}")]
    BadProduction(usize, String),
}

/// Sentinel for "cannot derive a finite terminal string".
const UNPRODUCTIVE: u32 = u32::MAX;

/// A compiled context-free grammar.
///
/// Immutable after construction; the compile step verifies that every
/// nonterminal is productive, so a recognizer over this grammar can treat
/// "some parse item survives" as "some completion exists".
#[derive(Debug, Clone)]
pub struct Grammar {
    nt_names: Vec<String>,
    terminals: Vec<Vec<u8>>,
    productions: Vec<Production>,
    prods_by_nt: Vec<Vec<usize>>,
    start: usize,
    separator: Vec<u8>,
    nullable: Vec<bool>,
    /// Minimal count of real terminals (separators excluded) derivable from
    /// each nonterminal; `UNPRODUCTIVE` if none.
    min_terminals: Vec<u32>,
}

impl Grammar {
    /// Assemble a grammar from explicit parts and verify its invariants.
    ///
    /// `productions` carry separators explicitly: the source-format parser
    /// has already inserted [`Symbol::Separator`] wherever the separator
    /// applies, so this constructor performs no insertion of its own.
    pub fn new(
        nt_names: Vec<String>,
        terminals: Vec<Vec<u8>>,
        productions: Vec<Production>,
        start: usize,
        separator: Vec<u8>,
    ) -> Result<Self, GrammarError> {
        if productions.is_empty() {
            return Err(GrammarError::NoRules);
        }
        if start >= nt_names.len() {
            return Err(GrammarError::BadStart(start));
        }
        for (i, t) in terminals.iter().enumerate() {
            if t.is_empty() {
                return Err(GrammarError::BadProduction(i, "empty terminal".into()));
            }
        }
        let mut prods_by_nt = vec![Vec::new(); nt_names.len()];
        for (i, p) in productions.iter().enumerate() {
            if p.lhs >= nt_names.len() {
                return Err(GrammarError::BadProduction(i, "lhs out of range".into()));
            }
            for s in &p.rhs {
                let ok = match s {
                    Symbol::NonTerminal(n) => *n < nt_names.len(),
                    Symbol::Terminal(t) => *t < terminals.len(),
                    Symbol::Separator => !separator.is_empty(),
                };
                if !ok {
                    return Err(GrammarError::BadProduction(i, "symbol out of range".into()));
                }
            }
            prods_by_nt[p.lhs].push(i);
        }

        let min_terminals = compute_min_terminals(&nt_names, &productions);
        // A nonterminal with no productions at all is also unproductive.
        for (nt, name) in nt_names.iter().enumerate() {
            if min_terminals[nt] == UNPRODUCTIVE {
                return Err(GrammarError::Unproductive { name: name.clone() });
            }
        }
        let nullable = compute_nullable(&nt_names, &productions, &separator);

        Ok(Self {
            nt_names,
            terminals,
            productions,
            prods_by_nt,
            start,
            separator,
            nullable,
            min_terminals,
        })
    }

    pub fn nonterminal_count(&self) -> usize {
        self.nt_names.len()
    }

    pub fn terminal_count(&self) -> usize {
        self.terminals.len()
    }

    /// Productions after `|` expansion.
    pub fn production_count(&self) -> usize {
        self.productions.len()
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn separator(&self) -> &[u8] {
        &self.separator
    }

    pub fn nonterminal_name(&self, nt: usize) -> &str {
        &self.nt_names[nt]
    }

    pub fn terminal_bytes(&self, t: usize) -> &[u8] {
        &self.terminals[t]
    }

    /// Terminal strings in table order (all are valid UTF-8 by construction
    /// from source text).
    pub fn terminal_strings(&self) -> Vec<String> {
        self.terminals
            .iter()
            .map(|t| String::from_utf8_lossy(t).into_owned())
            .collect()
    }

    pub(crate) fn productions_of(&self, nt: usize) -> &[usize] {
        &self.prods_by_nt[nt]
    }

    /// Whether `nt` can derive the empty string.
    pub fn is_nullable(&self, nt: usize) -> bool {
        self.nullable[nt]
    }

    /// Fewest real terminals any derivation from `nt` can contain.
    pub(crate) fn min_terminals(&self, nt: usize) -> u32 {
        self.min_terminals[nt]
    }

    /// Byte length of a symbol when it is a fixed byte string (terminals and
    /// the separator); `None` for nonterminals.
    pub(crate) fn symbol_bytes(&self, s: Symbol) -> Option<&[u8]> {
        match s {
            Symbol::Terminal(t) => Some(&self.terminals[t]),
            Symbol::Separator => Some(&self.separator),
            Symbol::NonTerminal(_) => None,
        }
    }
}

fn compute_min_terminals(nt_names: &[String], productions: &[Production]) -> Vec<u32> {
    let mut min = vec![UNPRODUCTIVE; nt_names.len()];
    loop {
        let mut changed = false;
        for p in productions {
            let mut sum: u32 = 0;
            let mut ok = true;
            for s in &p.rhs {
                match s {
                    Symbol::Terminal(_) => sum = sum.saturating_add(1),
                    Symbol::Separator => {}
                    Symbol::NonTerminal(n) => {
                        if min[*n] == UNPRODUCTIVE {
                            ok = false;
                            break;
                        }
                        sum = sum.saturating_add(min[*n]);
                    }
                }
            }
            if ok && sum < min[p.lhs] {
                min[p.lhs] = sum;
                changed = true;
            }
        }
        if !changed {
            return min;
        }
    }
}

fn compute_nullable(nt_names: &[String], productions: &[Production], separator: &[u8]) -> Vec<bool> {
    let mut nullable = vec![false; nt_names.len()];
    loop {
        let mut changed = false;
        for p in productions {
            if nullable[p.lhs] {
                continue;
            }
            let all = p.rhs.iter().all(|s| match s {
                Symbol::Terminal(_) => false,
                Symbol::Separator => separator.is_empty(),
                Symbol::NonTerminal(n) => nullable[*n],
            });
            if all {
                nullable[p.lhs] = true;
                changed = true;
            }
        }
        if !changed {
            return nullable;
        }
    }
}

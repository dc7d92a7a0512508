//! Incremental byte-level recognition and token masks.
//!
//! Earley recognition where terminal symbols are unrolled into their
//! individual bytes, so the chart advances one byte at a time and a
//! partially consumed terminal is just a dot inside its byte run. Because
//! the grammar compile step rejects unproductive nonterminals, a non-empty
//! chart column is equivalent to "this prefix extends to some member of the
//! language (or already is one)" — which is exactly the liveness question a
//! token mask needs to answer.

use crate::vocab::{TokenId, Vocabulary};

use super::{Grammar, Symbol};

/// One step of a compiled production body: either a whole nonterminal or a
/// single byte of a terminal/separator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Micro {
    NonTerminal(usize),
    Byte(u8),
}

#[derive(Debug, Clone)]
struct CompiledProd {
    lhs: usize,
    micros: Vec<Micro>,
}

fn compile(grammar: &Grammar) -> Vec<CompiledProd> {
    grammar
        .productions()
        .iter()
        .map(|p| {
            let mut micros = Vec::new();
            for s in &p.rhs {
                match s {
                    Symbol::NonTerminal(n) => micros.push(Micro::NonTerminal(*n)),
                    _ => {
                        for &b in grammar.symbol_bytes(*s).expect("fixed bytes") {
                            micros.push(Micro::Byte(b));
                        }
                    }
                }
            }
            CompiledProd { lhs: p.lhs, micros }
        })
        .collect()
}

/// Index of the synthetic start production S' → S.
const AUGMENTED: u32 = u32::MAX;

/// Earley item: production, dot position over its micro-symbols, and the
/// chart column where this instance began.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Item {
    prod: u32,
    dot: u32,
    origin: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("input rejected at byte offset {offset}: no grammar continuation matches 0x{byte:02x}")]
pub struct RejectError {
    /// Offset into the `bytes` argument of the advance call that failed.
    pub offset: usize,
    pub byte: u8,
}

/// Set of vocabulary tokens admissible from some recognizer state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenMask {
    bits: Vec<u64>,
    len: usize,
}

impl TokenMask {
    pub fn new(len: usize) -> Self {
        Self {
            bits: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn set(&mut self, id: TokenId) {
        let i = id.index();
        assert!(i < self.len, "token id {i} out of mask range {}", self.len);
        self.bits[i / 64] |= 1 << (i % 64);
    }

    pub fn is_set(&self, id: TokenId) -> bool {
        let i = id.index();
        i < self.len && self.bits[i / 64] & (1 << (i % 64)) != 0
    }

    /// Number of admissible tokens.
    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn any(&self) -> bool {
        self.bits.iter().any(|w| *w != 0)
    }

    /// Admissible token ids in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.len)
            .map(|i| TokenId::new(i as u32))
            .filter(move |id| self.is_set(*id))
    }
}

/// Incremental recognizer over a borrowed grammar.
///
/// A state is a pure function of `(grammar, consumed)`: advancing in chunks
/// or byte-by-byte lands on identical charts. Every constructed state is
/// live — [`RecognizerState::advance`] refuses transitions that would kill
/// every parse item, reporting the offending byte instead.
#[derive(Debug, Clone)]
pub struct RecognizerState<'g> {
    grammar: &'g Grammar,
    compiled: Vec<CompiledProd>,
    consumed: Vec<u8>,
    /// One column per consumed byte, plus the initial column.
    chart: Vec<Vec<Item>>,
}

impl<'g> PartialEq for RecognizerState<'g> {
    /// Chart equality up to item order; used by the chunk-associativity
    /// property tests.
    fn eq(&self, other: &Self) -> bool {
        if self.consumed != other.consumed || self.chart.len() != other.chart.len() {
            return false;
        }
        self.chart.iter().zip(&other.chart).all(|(a, b)| {
            let mut a = a.clone();
            let mut b = b.clone();
            let key = |i: &Item| (i.prod, i.dot, i.origin);
            a.sort_by_key(key);
            b.sort_by_key(key);
            a == b
        })
    }
}

impl<'g> RecognizerState<'g> {
    /// Seed the chart with the start symbol's productions.
    pub fn init(grammar: &'g Grammar) -> Self {
        let mut state = Self {
            grammar,
            compiled: compile(grammar),
            consumed: Vec::new(),
            chart: vec![vec![Item { prod: AUGMENTED, dot: 0, origin: 0 }]],
        };
        state.close(0);
        state
    }

    pub fn grammar(&self) -> &'g Grammar {
        self.grammar
    }

    pub fn consumed(&self) -> &[u8] {
        &self.consumed
    }

    /// Consumed bytes as text (all grammar byte strings come from UTF-8
    /// source, so this holds for every reachable state).
    pub fn consumed_text(&self) -> String {
        String::from_utf8_lossy(&self.consumed).into_owned()
    }

    fn next_micro(&self, item: Item) -> Option<Micro> {
        if item.prod == AUGMENTED {
            if item.dot == 0 {
                Some(Micro::NonTerminal(self.grammar.start()))
            } else {
                None
            }
        } else {
            self.compiled[item.prod as usize].micros.get(item.dot as usize).copied()
        }
    }

    fn lhs_of(&self, item: Item) -> Option<usize> {
        if item.prod == AUGMENTED {
            None
        } else {
            Some(self.compiled[item.prod as usize].lhs)
        }
    }

    fn add(&mut self, col: usize, item: Item) {
        if !self.chart[col].contains(&item) {
            self.chart[col].push(item);
        }
    }

    /// Predict/complete closure of one chart column.
    fn close(&mut self, col: usize) {
        let mut i = 0;
        while i < self.chart[col].len() {
            let item = self.chart[col][i];
            match self.next_micro(item) {
                Some(Micro::NonTerminal(x)) => {
                    for &p in self.grammar.productions_of(x) {
                        self.add(col, Item { prod: p as u32, dot: 0, origin: col as u32 });
                    }
                    // An epsilon-ish completion of x may already sit in this
                    // column; if so the parent advances immediately.
                    let completed_here = self.chart[col].iter().any(|it| {
                        it.origin as usize == col
                            && self.lhs_of(*it) == Some(x)
                            && self.next_micro(*it).is_none()
                    });
                    if completed_here {
                        self.add(col, Item { dot: item.dot + 1, ..item });
                    }
                }
                Some(Micro::Byte(_)) => {}
                None => {
                    if let Some(lhs) = self.lhs_of(item) {
                        let parents: Vec<Item> = self.chart[item.origin as usize]
                            .iter()
                            .filter(|p| self.next_micro(**p) == Some(Micro::NonTerminal(lhs)))
                            .copied()
                            .collect();
                        for p in parents {
                            self.add(col, Item { dot: p.dot + 1, ..p });
                        }
                    }
                }
            }
            i += 1;
        }
    }

    fn advance_byte(&mut self, b: u8) -> bool {
        let col = self.chart.len() - 1;
        let mut next = Vec::new();
        for item in &self.chart[col] {
            if self.next_micro(*item) == Some(Micro::Byte(b)) {
                next.push(Item { dot: item.dot + 1, ..*item });
            }
        }
        if next.is_empty() {
            return false;
        }
        self.chart.push(next);
        self.consumed.push(b);
        self.close(col + 1);
        true
    }

    /// Extend the consumed prefix; chunked and byte-by-byte advances agree.
    ///
    /// On rejection the state that was advanced is unchanged and the error
    /// names the first offending byte's offset within `bytes`.
    pub fn advance(&self, bytes: &[u8]) -> Result<Self, RejectError> {
        let mut next = self.clone();
        for (offset, &b) in bytes.iter().enumerate() {
            if !next.advance_byte(b) {
                return Err(RejectError { offset, byte: b });
            }
        }
        Ok(next)
    }

    /// True iff the consumed bytes form a complete member of the language.
    pub fn is_complete(&self) -> bool {
        self.chart
            .last()
            .expect("chart never empty")
            .iter()
            .any(|i| i.prod == AUGMENTED && i.dot == 1)
    }

    /// Whether any continuation (or completion) remains. Holds for every
    /// state this type hands out; exposed for assertions.
    pub fn is_live(&self) -> bool {
        !self.chart.last().expect("chart never empty").is_empty()
    }

    /// Exact token admissibility: bit `t` is set iff advancing by token
    /// `t`'s bytes keeps the recognizer alive; the eos bit is set iff the
    /// current state is complete.
    pub fn valid_mask(&self, vocab: &Vocabulary) -> TokenMask {
        let mut mask = TokenMask::new(vocab.len());
        for i in 0..vocab.len() {
            let id = TokenId::new(i as u32);
            if id == vocab.eos_id() {
                if self.is_complete() {
                    mask.set(id);
                }
            } else {
                let bytes = vocab.bytes(id).expect("dense ids");
                if self.advance(bytes).is_ok() {
                    mask.set(id);
                }
            }
        }
        mask
    }

    /// Full terminal strings that may come next, directly or after the
    /// grammar separator. Sorted for stable output.
    pub fn expected_terminals(&self) -> Vec<String> {
        let sep = self.grammar.separator().to_vec();
        let mut out = Vec::new();
        for t in 0..self.grammar.terminal_count() {
            let bytes = self.grammar.terminal_bytes(t).to_vec();
            let mut with_sep = sep.clone();
            with_sep.extend_from_slice(&bytes);
            if self.advance(&bytes).is_ok() || (!sep.is_empty() && self.advance(&with_sep).is_ok())
            {
                out.push(String::from_utf8_lossy(&bytes).into_owned());
            }
        }
        out.sort();
        out
    }
}

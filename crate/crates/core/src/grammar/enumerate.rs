//! Brute-force language enumeration, the oracle the recognizer is tested
//! against.

use std::collections::{BTreeSet, HashSet};

use super::{Grammar, Symbol, UNPRODUCTIVE};

/// Cap on result strings before enumeration gives up.
pub const DEFAULT_STRING_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnumerateError {
    #[error("max_terminals must be at least 1")]
    InvalidMax,
    #[error("language exceeds the enumeration cap of {cap} strings")]
    Explosion { cap: usize },
}

/// All strings of the language derivable with at most `max_terminals`
/// terminal symbols (separators do not count), using the default cap.
pub fn enumerate_language(
    grammar: &Grammar,
    max_terminals: usize,
) -> Result<BTreeSet<String>, EnumerateError> {
    enumerate_language_capped(grammar, max_terminals, DEFAULT_STRING_CAP)
}

/// [`enumerate_language`] with an explicit explosion cap.
///
/// Expansion is leftmost-nonterminal with sentential-form deduplication and
/// a lower-bound prune on remaining terminal count, so recursive grammars
/// terminate whenever their sub-`max_terminals` fragment is finite; the cap
/// (on produced strings, and on visited forms at 20× the cap) guards the
/// rest.
pub fn enumerate_language_capped(
    grammar: &Grammar,
    max_terminals: usize,
    cap: usize,
) -> Result<BTreeSet<String>, EnumerateError> {
    if max_terminals == 0 {
        return Err(EnumerateError::InvalidMax);
    }
    let mut results = BTreeSet::new();
    let mut seen: HashSet<Vec<Symbol>> = HashSet::new();
    let mut stack: Vec<Vec<Symbol>> = vec![vec![Symbol::NonTerminal(grammar.start())]];
    let form_cap = cap.saturating_mul(20);
    let mut visited = 0usize;

    while let Some(form) = stack.pop() {
        visited += 1;
        if visited > form_cap {
            return Err(EnumerateError::Explosion { cap });
        }
        // Lower bound on terminals in any string derivable from this form.
        let mut lower = 0usize;
        let mut first_nt = None;
        for (i, s) in form.iter().enumerate() {
            match s {
                Symbol::Terminal(_) => lower += 1,
                Symbol::Separator => {}
                Symbol::NonTerminal(n) => {
                    debug_assert_ne!(grammar.min_terminals(*n), UNPRODUCTIVE);
                    lower += grammar.min_terminals(*n) as usize;
                    if first_nt.is_none() {
                        first_nt = Some((i, *n));
                    }
                }
            }
        }
        if lower > max_terminals {
            continue;
        }
        match first_nt {
            None => {
                let mut bytes = Vec::new();
                for s in &form {
                    bytes.extend_from_slice(grammar.symbol_bytes(*s).expect("no NTs left"));
                }
                results.insert(String::from_utf8_lossy(&bytes).into_owned());
                if results.len() > cap {
                    return Err(EnumerateError::Explosion { cap });
                }
            }
            Some((i, nt)) => {
                for &p in grammar.productions_of(nt) {
                    let mut next = Vec::with_capacity(form.len() + 4);
                    next.extend_from_slice(&form[..i]);
                    next.extend_from_slice(&grammar.productions()[p].rhs);
                    next.extend_from_slice(&form[i + 1..]);
                    if seen.insert(next.clone()) {
                        stack.push(next);
                    }
                }
            }
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;
    use crate::grammar::testutil::scene_grammar;

    #[test]
    fn single_string_grammar() {
        let g = parse_grammar("S ::= \"x\"\n").unwrap();
        let lang = enumerate_language(&g, 1).unwrap();
        assert_eq!(lang.into_iter().collect::<Vec<_>>(), ["x"]);
    }

    #[test]
    fn scene_language_at_one_terminal_is_the_subjects() {
        let lang = enumerate_language(&scene_grammar(), 1).unwrap();
        assert_eq!(lang.into_iter().collect::<Vec<_>>(), ["cat", "dog"]);
    }

    #[test]
    fn scene_language_has_22_strings() {
        // 2 bare subjects + 2·2 subject-action pairs + 2·2·2·2 relational
        // sentences, all reachable within four terminals.
        let lang = enumerate_language(&scene_grammar(), 4).unwrap();
        assert_eq!(lang.len(), 22);
        assert!(lang.contains("cat"));
        assert!(lang.contains("dog jumping"));
        assert!(lang.contains("cat sitting next to dog"));
        assert!(lang.contains("dog jumping above cat"));
        // Below four terminals the relational strings are out of reach.
        assert_eq!(enumerate_language(&scene_grammar(), 3).unwrap().len(), 6);
        // The language is exhausted at four terminals.
        assert_eq!(enumerate_language(&scene_grammar(), 9).unwrap().len(), 22);
    }

    #[test]
    fn separator_joins_terminals_in_output() {
        let g = parse_grammar("@separator \", \"\nS ::= \"a\" \"b\" | \"a\" ~ \"b\"\n").unwrap();
        let lang = enumerate_language(&g, 2).unwrap();
        assert_eq!(lang.into_iter().collect::<Vec<_>>(), ["a, b", "ab"]);
    }

    #[test]
    fn epsilon_derivations_produce_the_empty_string() {
        let g = parse_grammar("@separator \"\"\nS ::= \"x\" S |\n").unwrap();
        let lang = enumerate_language(&g, 3).unwrap();
        assert_eq!(
            lang.into_iter().collect::<Vec<_>>(),
            ["", "x", "xx", "xxx"]
        );
    }

    #[test]
    fn recursive_grammars_are_bounded_by_the_terminal_budget() {
        let g = parse_grammar("S ::= \"x\" | \"x\" S\n").unwrap();
        let lang = enumerate_language(&g, 3).unwrap();
        assert_eq!(
            lang.into_iter().collect::<Vec<_>>(),
            ["x", "x x", "x x x"]
        );
    }

    #[test]
    fn explosion_guard_trips_on_tiny_caps() {
        let err = enumerate_language_capped(&scene_grammar(), 5, 10).unwrap_err();
        assert_eq!(err, EnumerateError::Explosion { cap: 10 });
    }

    #[test]
    fn zero_terminal_budget_is_invalid() {
        assert_eq!(
            enumerate_language(&scene_grammar(), 0).unwrap_err(),
            EnumerateError::InvalidMax
        );
    }
}

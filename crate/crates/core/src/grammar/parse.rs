//! Text format for grammars.
//!
//! ```text
//! # Comments run to end of line.
//! @separator " "                 # optional, default single space; "" disables
//! S ::= Element | Element Attribute
//! Element ::= "cat" | "dog"
//! Pair ::= Element ~ "-tail"    # ~ joins symbols without the separator
//! Maybe ::= "x" |                # empty alternative = epsilon
//! ```
//!
//! Rules are `Name ::= alt | alt | ...`; a line starting with `|` continues
//! the previous rule's alternatives. Terminals are double-quoted with
//! `\"`, `\\`, `\n`, `\t`, `\r` escapes. Within an alternative, symbols
//! separated by whitespace get the grammar separator between them; symbols
//! joined with `~` are adjacent (no separator). The first rule's name is the
//! start symbol.

use std::collections::HashMap;

use super::{Grammar, GrammarError, Production, Symbol};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(Vec<u8>),
    Defines, // ::=
    Pipe,
    Tilde,
    Directive(String),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn syntax(line: usize, col: usize, message: impl Into<String>) -> GrammarError {
    GrammarError::Syntax {
        line,
        col,
        message: message.into(),
    }
}

fn lex_line(text: &str, line_no: usize) -> Result<Vec<Spanned>, GrammarError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0usize;
    while i < chars.len() {
        let col = i + 1;
        let c = chars[i];
        match c {
            ' ' | '\t' | '\r' => i += 1,
            '#' => break,
            '|' => {
                out.push(Spanned { tok: Tok::Pipe, line: line_no, col });
                i += 1;
            }
            '~' => {
                out.push(Spanned { tok: Tok::Tilde, line: line_no, col });
                i += 1;
            }
            ':' => {
                if chars[i..].starts_with(&[':', ':', '=']) {
                    out.push(Spanned { tok: Tok::Defines, line: line_no, col });
                    i += 3;
                } else {
                    return Err(syntax(line_no, col, "expected `::=`"));
                }
            }
            '"' => {
                let mut bytes = Vec::new();
                i += 1;
                loop {
                    if i >= chars.len() {
                        return Err(syntax(line_no, col, "unterminated string"));
                    }
                    match chars[i] {
                        '"' => {
                            i += 1;
                            break;
                        }
                        '\\' => {
                            i += 1;
                            let esc = *chars.get(i).ok_or_else(|| {
                                syntax(line_no, i, "dangling escape at end of line")
                            })?;
                            let b = match esc {
                                '"' => b'"',
                                '\\' => b'\\',
                                'n' => b'\n',
                                't' => b'\t',
                                'r' => b'\r',
                                other => {
                                    return Err(syntax(
                                        line_no,
                                        i + 1,
                                        format!("unknown escape `\\{other}`"),
                                    ))
                                }
                            };
                            bytes.push(b);
                            i += 1;
                        }
                        ch => {
                            let mut buf = [0u8; 4];
                            bytes.extend_from_slice(ch.encode_utf8(&mut buf).as_bytes());
                            i += 1;
                        }
                    }
                }
                out.push(Spanned { tok: Tok::Quoted(bytes), line: line_no, col });
            }
            '@' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let name: String = chars[start..j].iter().collect();
                out.push(Spanned { tok: Tok::Directive(name), line: line_no, col });
                i = j;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let name: String = chars[start..j].iter().collect();
                out.push(Spanned { tok: Tok::Ident(name), line: line_no, col });
                i = j;
            }
            other => return Err(syntax(line_no, col, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum RawSym {
    NonTerminal { name: String, line: usize, col: usize },
    Literal { bytes: Vec<u8> },
    /// Marks the following symbol as adjacent to the previous one.
    Joiner { line: usize, col: usize },
}

type RawAlt = Vec<RawSym>;

/// Split one rule body (everything after `::=`, or after a continuation
/// pipe) into alternatives.
fn parse_alts(tokens: &[Spanned]) -> Result<Vec<RawAlt>, GrammarError> {
    let mut alts = vec![Vec::new()];
    for t in tokens {
        match &t.tok {
            Tok::Pipe => alts.push(Vec::new()),
            Tok::Ident(name) => alts.last_mut().unwrap().push(RawSym::NonTerminal {
                name: name.clone(),
                line: t.line,
                col: t.col,
            }),
            Tok::Quoted(bytes) => {
                if bytes.is_empty() {
                    return Err(GrammarError::EmptyTerminal { line: t.line, col: t.col });
                }
                alts.last_mut().unwrap().push(RawSym::Literal { bytes: bytes.clone() })
            }
            Tok::Tilde => {
                let alt = alts.last_mut().unwrap();
                match alt.last() {
                    None | Some(RawSym::Joiner { .. }) => {
                        return Err(syntax(t.line, t.col, "`~` must join two symbols"))
                    }
                    _ => alt.push(RawSym::Joiner { line: t.line, col: t.col }),
                }
            }
            Tok::Defines => return Err(syntax(t.line, t.col, "unexpected `::=`")),
            Tok::Directive(_) => {
                return Err(syntax(t.line, t.col, "directive not allowed inside a rule"))
            }
        }
    }
    for alt in &alts {
        if let Some(RawSym::Joiner { line, col }) = alt.last() {
            return Err(syntax(*line, *col, "`~` must join two symbols"));
        }
    }
    Ok(alts)
}

/// Parse grammar source into a compiled [`Grammar`].
pub fn parse_grammar(source: &str) -> Result<Grammar, GrammarError> {
    let mut separator: Option<Vec<u8>> = None;
    // (name, alternatives) in declaration order; repeated names merge.
    let mut rules: Vec<(String, Vec<RawAlt>)> = Vec::new();
    let mut rule_index: HashMap<String, usize> = HashMap::new();

    for (idx, raw_line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let tokens = lex_line(raw_line, line_no)?;
        if tokens.is_empty() {
            continue;
        }
        match &tokens[0].tok {
            Tok::Directive(name) if name == "separator" => {
                if tokens.len() != 2 {
                    return Err(syntax(
                        line_no,
                        tokens[0].col,
                        "@separator takes exactly one quoted string",
                    ));
                }
                let bytes = match &tokens[1].tok {
                    Tok::Quoted(b) => b.clone(),
                    _ => {
                        return Err(syntax(
                            line_no,
                            tokens[1].col,
                            "@separator takes a quoted string",
                        ))
                    }
                };
                if separator.replace(bytes).is_some() {
                    return Err(syntax(line_no, tokens[0].col, "duplicate @separator"));
                }
            }
            Tok::Directive(name) => {
                return Err(syntax(
                    line_no,
                    tokens[0].col,
                    format!("unknown directive `@{name}`"),
                ))
            }
            Tok::Pipe => {
                // Continuation of the previous rule's alternatives.
                if rules.is_empty() {
                    return Err(syntax(line_no, tokens[0].col, "`|` with no rule to continue"));
                }
                let alts = parse_alts(&tokens[1..])?;
                rules.last_mut().unwrap().1.extend(alts);
            }
            Tok::Ident(name) => {
                if tokens.len() < 2 || tokens[1].tok != Tok::Defines {
                    return Err(syntax(
                        line_no,
                        tokens.get(1).map(|t| t.col).unwrap_or(tokens[0].col),
                        "expected `::=` after rule name",
                    ));
                }
                let alts = parse_alts(&tokens[2..])?;
                match rule_index.get(name) {
                    Some(&i) => rules[i].1.extend(alts),
                    None => {
                        rule_index.insert(name.clone(), rules.len());
                        rules.push((name.clone(), alts));
                    }
                }
            }
            _ => {
                return Err(syntax(
                    line_no,
                    tokens[0].col,
                    "expected a rule name, `|` continuation, or directive",
                ))
            }
        }
    }

    if rules.is_empty() {
        return Err(GrammarError::NoRules);
    }
    let separator = separator.unwrap_or_else(|| b" ".to_vec());

    let nt_names: Vec<String> = rules.iter().map(|(n, _)| n.clone()).collect();
    let nt_index: HashMap<&str, usize> = nt_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();

    let mut terminals: Vec<Vec<u8>> = Vec::new();
    let mut term_index: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut productions = Vec::new();
    for (lhs, (_, alts)) in rules.iter().enumerate() {
        for alt in alts {
            let mut rhs = Vec::new();
            let mut pending_join = false;
            for sym in alt {
                match sym {
                    RawSym::Joiner { .. } => pending_join = true,
                    RawSym::NonTerminal { name, line, col } => {
                        let id = *nt_index.get(name.as_str()).ok_or_else(|| {
                            GrammarError::UndefinedSymbol {
                                name: name.clone(),
                                line: *line,
                                col: *col,
                            }
                        })?;
                        push_symbol(&mut rhs, Symbol::NonTerminal(id), &mut pending_join, &separator);
                    }
                    RawSym::Literal { bytes } => {
                        let id = *term_index.entry(bytes.clone()).or_insert_with(|| {
                            terminals.push(bytes.clone());
                            terminals.len() - 1
                        });
                        push_symbol(&mut rhs, Symbol::Terminal(id), &mut pending_join, &separator);
                    }
                }
            }
            productions.push(Production { lhs, rhs });
        }
    }

    Grammar::new(nt_names, terminals, productions, 0, separator)
}

fn push_symbol(rhs: &mut Vec<Symbol>, sym: Symbol, pending_join: &mut bool, separator: &[u8]) {
    if !rhs.is_empty() && !*pending_join && !separator.is_empty() {
        rhs.push(Symbol::Separator);
    }
    *pending_join = false;
    rhs.push(sym);
}

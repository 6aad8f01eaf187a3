//! Token-level scanning for the Lean 4 surface subset.
//!
//! The lexer keeps byte spans into the original source so parse errors and
//! opaque-raw captures can point back at the text they came from. Comments are
//! blanked out (replaced by spaces) before scanning so spans stay valid.

use std::fmt;

/// Byte range into the source that produced a token or an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn slice<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    /// Identifier, possibly `.`-qualified (`Nat.succ`).
    Ident(String),
    /// Unsigned numeric literal. Negative numbers are prefix `-` plus a literal.
    Num(u64),
    Sym(Sym),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sym {
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LAngle,
    RAngle,
    Comma,
    Colon,
    ColonEq,
    Semicolon,
    Forall,
    Exists,
    Not,
    And,
    Or,
    Imp,
    Eq,
    Ne,
    Le,
    Ge,
    Lt,
    Gt,
    Plus,
    Minus,
    Star,
    /// Any operator glyph the subset does not model; triggers opaque-raw fallback.
    Other(String),
}

impl Sym {
    pub fn text(&self) -> &str {
        match self {
            Sym::LParen => "(",
            Sym::RParen => ")",
            Sym::LBrace => "{",
            Sym::RBrace => "}",
            Sym::LBracket => "[",
            Sym::RBracket => "]",
            Sym::LAngle => "\u{27e8}",
            Sym::RAngle => "\u{27e9}",
            Sym::Comma => ",",
            Sym::Colon => ":",
            Sym::ColonEq => ":=",
            Sym::Semicolon => ";",
            Sym::Forall => "\u{2200}",
            Sym::Exists => "\u{2203}",
            Sym::Not => "\u{ac}",
            Sym::And => "\u{2227}",
            Sym::Or => "\u{2228}",
            Sym::Imp => "\u{2192}",
            Sym::Eq => "=",
            Sym::Ne => "\u{2260}",
            Sym::Le => "\u{2264}",
            Sym::Ge => "\u{2265}",
            Sym::Lt => "<",
            Sym::Gt => ">",
            Sym::Plus => "+",
            Sym::Minus => "-",
            Sym::Star => "*",
            Sym::Other(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LexError {
    #[error("unterminated block comment at {0}")]
    UnterminatedComment(Span),
    #[error("numeric literal out of range at {0}")]
    NumOverflow(Span),
}

/// Replaces `--` line comments and nested `/- -/` block comments with spaces.
/// Output has the same byte length as the input.
pub fn strip_comments(src: &str) -> Result<String, LexError> {
    let bytes = src.as_bytes();
    let mut out = bytes.to_vec();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'-' && i + 1 < bytes.len() && bytes[i + 1] == b'-' {
            while i < bytes.len() && bytes[i] != b'\n' {
                out[i] = b' ';
                i += 1;
            }
        } else if bytes[i] == b'/' && i + 1 < bytes.len() && bytes[i + 1] == b'-' {
            let start = i;
            let mut depth = 1;
            out[i] = b' ';
            out[i + 1] = b' ';
            i += 2;
            while i < bytes.len() && depth > 0 {
                if bytes[i] == b'/' && i + 1 < bytes.len() && bytes[i + 1] == b'-' {
                    depth += 1;
                    out[i] = b' ';
                    out[i + 1] = b' ';
                    i += 2;
                } else if bytes[i] == b'-' && i + 1 < bytes.len() && bytes[i + 1] == b'/' {
                    depth -= 1;
                    out[i] = b' ';
                    out[i + 1] = b' ';
                    i += 2;
                } else {
                    // Newlines survive so line structure stays usable for the
                    // proof splitter; everything else is blanked byte by byte.
                    if bytes[i] != b'\n' {
                        out[i] = b' ';
                    }
                    i += 1;
                }
            }
            if depth > 0 {
                return Err(LexError::UnterminatedComment(Span::new(start, src.len())));
            }
        } else {
            i += 1;
        }
    }
    // Blanking individual bytes of a multibyte char leaves invalid UTF-8 only if
    // we split a char; the loop above blanks every byte of non-newline chars, so
    // the result is ASCII spaces in those positions and remains valid.
    Ok(String::from_utf8(out).expect("comment stripping preserves UTF-8"))
}

fn is_ident_start(c: char) -> bool {
    c == '_'
        || c.is_alphabetic()
        || matches!(c, '\u{2115}' | '\u{2124}' | '\u{211a}' | '\u{211d}' | '\u{2102}')
}

fn is_ident_continue(c: char) -> bool {
    c == '_'
        || c == '\''
        || c == '!'
        || c == '?'
        || c.is_alphanumeric()
        || ('\u{2080}'..='\u{2089}').contains(&c)
        || matches!(c, '\u{2115}' | '\u{2124}' | '\u{211a}' | '\u{211d}' | '\u{2102}')
}

/// True when `s` is a lexically valid subset identifier (used by opaque-raw
/// occurrence scans and by the witness parser).
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if is_ident_start(c) => {}
        _ => return false,
    }
    chars.all(|c| is_ident_continue(c) || c == '.')
}

/// Scans `text` and returns each identifier occurrence at token boundaries.
/// Used to find which bound names an opaque-raw fragment mentions.
pub fn scan_identifiers(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = text.char_indices().peekable();
    while let Some((i, c)) = it.next() {
        if is_ident_start(c) {
            let mut end = i + c.len_utf8();
            while let Some(&(j, c2)) = it.peek() {
                if is_ident_continue(c2) || c2 == '.' {
                    end = j + c2.len_utf8();
                    it.next();
                } else {
                    break;
                }
            }
            out.push(text[i..end].to_string());
        }
    }
    out
}

/// Tokenizes comment-stripped source. Unknown glyphs become `Sym::Other` so the
/// parser can decide between a hard error and an opaque-raw capture.
pub fn lex(src: &str) -> Result<Vec<Token>, LexError> {
    let mut toks = Vec::new();
    let mut it = src.char_indices().peekable();
    while let Some(&(i, c)) = it.peek() {
        if c.is_whitespace() {
            it.next();
            continue;
        }
        if is_ident_start(c) {
            it.next();
            let mut end = i + c.len_utf8();
            while let Some(&(j, c2)) = it.peek() {
                if is_ident_continue(c2) {
                    end = j + c2.len_utf8();
                    it.next();
                } else if c2 == '.' {
                    // Qualified name: consume the dot only if an identifier
                    // character follows, so `h.` at end of text stays two tokens.
                    let mut probe = it.clone();
                    probe.next();
                    match probe.peek() {
                        Some(&(_, c3)) if is_ident_start(c3) => {
                            it.next();
                            end = j + c2.len_utf8();
                        }
                        _ => break,
                    }
                } else {
                    break;
                }
            }
            toks.push(Token {
                tok: Tok::Ident(src[i..end].to_string()),
                span: Span::new(i, end),
            });
            continue;
        }
        if c.is_ascii_digit() {
            it.next();
            let mut end = i + 1;
            while let Some(&(j, c2)) = it.peek() {
                if c2.is_ascii_digit() {
                    end = j + 1;
                    it.next();
                } else {
                    break;
                }
            }
            let n: u64 = src[i..end]
                .parse()
                .map_err(|_| LexError::NumOverflow(Span::new(i, end)))?;
            toks.push(Token {
                tok: Tok::Num(n),
                span: Span::new(i, end),
            });
            continue;
        }
        it.next();
        let end = i + c.len_utf8();
        let two = |it: &mut std::iter::Peekable<std::str::CharIndices>, want: char| -> bool {
            if let Some(&(_, c2)) = it.peek() {
                if c2 == want {
                    it.next();
                    return true;
                }
            }
            false
        };
        let (sym, end) = match c {
            '(' => (Sym::LParen, end),
            ')' => (Sym::RParen, end),
            '{' => (Sym::LBrace, end),
            '}' => (Sym::RBrace, end),
            '[' => (Sym::LBracket, end),
            ']' => (Sym::RBracket, end),
            '\u{27e8}' => (Sym::LAngle, end),
            '\u{27e9}' => (Sym::RAngle, end),
            ',' => (Sym::Comma, end),
            ';' => (Sym::Semicolon, end),
            ':' => {
                if two(&mut it, '=') {
                    (Sym::ColonEq, end + 1)
                } else {
                    (Sym::Colon, end)
                }
            }
            '\u{2200}' => (Sym::Forall, end),
            '\u{2203}' => (Sym::Exists, end),
            '\u{ac}' => (Sym::Not, end),
            '\u{2227}' => (Sym::And, end),
            '\u{2228}' => (Sym::Or, end),
            '\u{2192}' => (Sym::Imp, end),
            '=' => (Sym::Eq, end),
            '\u{2260}' => (Sym::Ne, end),
            '\u{2264}' => (Sym::Le, end),
            '\u{2265}' => (Sym::Ge, end),
            '<' => {
                if two(&mut it, '=') {
                    (Sym::Le, end + 1)
                } else {
                    (Sym::Lt, end)
                }
            }
            '>' => {
                if two(&mut it, '=') {
                    (Sym::Ge, end + 1)
                } else {
                    (Sym::Gt, end)
                }
            }
            '!' => {
                if two(&mut it, '=') {
                    (Sym::Ne, end + 1)
                } else {
                    (Sym::Other("!".to_string()), end)
                }
            }
            '+' => (Sym::Plus, end),
            '-' => {
                if two(&mut it, '>') {
                    (Sym::Imp, end + 1)
                } else {
                    (Sym::Minus, end)
                }
            }
            '*' => (Sym::Star, end),
            other => (Sym::Other(other.to_string()), end),
        };
        toks.push(Token {
            tok: Tok::Sym(sym),
            span: Span::new(i, end),
        });
    }
    Ok(toks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syms(src: &str) -> Vec<Tok> {
        lex(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn lexes_unicode_connectives() {
        let toks = syms("\u{2200} x, \u{ac} P \u{2227} Q \u{2192} R");
        assert_eq!(
            toks,
            vec![
                Tok::Sym(Sym::Forall),
                Tok::Ident("x".into()),
                Tok::Sym(Sym::Comma),
                Tok::Sym(Sym::Not),
                Tok::Ident("P".into()),
                Tok::Sym(Sym::And),
                Tok::Ident("Q".into()),
                Tok::Sym(Sym::Imp),
                Tok::Ident("R".into()),
            ]
        );
    }

    #[test]
    fn lexes_subscripted_and_primed_idents() {
        let toks = syms("h\u{2081} h' x\u{2082}\u{2080} \u{2115} \u{2124}");
        assert_eq!(
            toks,
            vec![
                Tok::Ident("h\u{2081}".into()),
                Tok::Ident("h'".into()),
                Tok::Ident("x\u{2082}\u{2080}".into()),
                Tok::Ident("\u{2115}".into()),
                Tok::Ident("\u{2124}".into()),
            ]
        );
    }

    #[test]
    fn lexes_qualified_names() {
        let toks = syms("Nat.succ n");
        assert_eq!(
            toks,
            vec![Tok::Ident("Nat.succ".into()), Tok::Ident("n".into())]
        );
    }

    #[test]
    fn ascii_fallbacks_map_to_unicode_syms() {
        let toks = syms("a -> b != c <= d >= e");
        assert_eq!(
            toks,
            vec![
                Tok::Ident("a".into()),
                Tok::Sym(Sym::Imp),
                Tok::Ident("b".into()),
                Tok::Sym(Sym::Ne),
                Tok::Ident("c".into()),
                Tok::Sym(Sym::Le),
                Tok::Ident("d".into()),
                Tok::Sym(Sym::Ge),
                Tok::Ident("e".into()),
            ]
        );
    }

    #[test]
    fn colon_eq_is_one_token() {
        let toks = syms("x := 3");
        assert_eq!(
            toks,
            vec![
                Tok::Ident("x".into()),
                Tok::Sym(Sym::ColonEq),
                Tok::Num(3),
            ]
        );
    }

    #[test]
    fn strip_comments_preserves_length_and_newlines() {
        let src = "theorem t -- note\n/- block\n comment -/ : True";
        let stripped = strip_comments(src).unwrap();
        assert_eq!(stripped.len(), src.len());
        assert_eq!(
            stripped.lines().count(),
            src.lines().count(),
            "newlines preserved"
        );
        assert!(!stripped.contains("note"));
        assert!(!stripped.contains("comment"));
        assert!(stripped.contains("theorem t"));
        assert!(stripped.contains(": True"));
    }

    #[test]
    fn nested_block_comments() {
        let src = "/- a /- b -/ c -/ x";
        let stripped = strip_comments(src).unwrap();
        assert_eq!(stripped.trim(), "x");
    }

    #[test]
    fn unterminated_block_comment_is_error() {
        assert!(matches!(
            strip_comments("/- open"),
            Err(LexError::UnterminatedComment(_))
        ));
    }

    #[test]
    fn scan_identifiers_respects_token_boundaries() {
        let ids = scan_identifiers("foo (bar2 + h\u{2081}) qux.quux");
        assert_eq!(ids, vec!["foo", "bar2", "h\u{2081}", "qux.quux"]);
    }

    #[test]
    fn huge_literal_is_an_error_not_a_panic() {
        assert!(matches!(
            lex("99999999999999999999999999"),
            Err(LexError::NumOverflow(_))
        ));
    }
}

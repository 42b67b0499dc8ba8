use serde::Serialize;

use super::{DslError, ErrorKind, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TokenKind {
    Ident,
    StrLit,
    IntLit,
    FloatLit,
    Op,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Dot,
    Comma,
    Colon,
    LBrace,
    RBrace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Token {
    pub kind: TokenKind,
    /// Exact source slice, quotes included for string literals.
    pub text: String,
    pub span: Span,
}

impl Token {
    pub fn is_literal(&self) -> bool {
        matches!(self.kind, TokenKind::StrLit | TokenKind::IntLit | TokenKind::FloatLit)
    }

    pub fn is_op(&self, sym: &str) -> bool {
        self.kind == TokenKind::Op && self.text == sym
    }
}

const TWO_CHAR_OPS: [&str; 4] = ["==", "!=", "<=", ">="];
const ONE_CHAR_OPS: &str = "<>=&|~+-*/%";

fn lex_error(start: usize, end: usize, reason: impl Into<String>) -> DslError {
    DslError::new(ErrorKind::LexError, Span::new(start, end), reason)
}

/// Splits `source` into maximal-munch tokens. Whitespace separates tokens
/// and is otherwise dropped; the gaps between spans are exactly that
/// whitespace.
pub fn lex(source: &str) -> Result<Vec<Token>, DslError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = source[i..].chars().next().expect("in bounds");
        let start = i;
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let kind = match c {
            '[' => single(&mut i, TokenKind::LBracket),
            ']' => single(&mut i, TokenKind::RBracket),
            '(' => single(&mut i, TokenKind::LParen),
            ')' => single(&mut i, TokenKind::RParen),
            '{' => single(&mut i, TokenKind::LBrace),
            '}' => single(&mut i, TokenKind::RBrace),
            ',' => single(&mut i, TokenKind::Comma),
            ':' => single(&mut i, TokenKind::Colon),
            '.' if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => single(&mut i, TokenKind::Dot),
            '\'' | '"' => {
                i = scan_string(source, i, c)?;
                TokenKind::StrLit
            }
            c if c.is_ascii_digit() || c == '.' => scan_number(bytes, &mut i),
            c if c.is_alphabetic() || c == '_' => {
                while let Some(ch) = source[i..].chars().next() {
                    if ch.is_alphanumeric() || ch == '_' {
                        i += ch.len_utf8();
                    } else {
                        break;
                    }
                }
                TokenKind::Ident
            }
            _ => {
                if TWO_CHAR_OPS.iter().any(|op| source[i..].starts_with(op)) {
                    i += 2;
                    TokenKind::Op
                } else if ONE_CHAR_OPS.contains(c) {
                    i += 1;
                    TokenKind::Op
                } else {
                    return Err(lex_error(start, start + c.len_utf8(), format!("unexpected character {c:?}")));
                }
            }
        };
        tokens.push(Token {
            kind,
            text: source[start..i].to_string(),
            span: Span::new(start, i),
        });
    }
    Ok(tokens)
}

fn single(i: &mut usize, kind: TokenKind) -> TokenKind {
    *i += 1;
    kind
}

fn scan_string(source: &str, start: usize, quote: char) -> Result<usize, DslError> {
    let mut chars = source[start + 1..].char_indices();
    while let Some((off, ch)) = chars.next() {
        match ch {
            '\\' => {
                if chars.next().is_none() {
                    break;
                }
            }
            '\n' => break,
            c if c == quote => return Ok(start + 1 + off + 1),
            _ => {}
        }
    }
    Err(lex_error(start, source.len(), "unterminated string"))
}

fn scan_number(bytes: &[u8], i: &mut usize) -> TokenKind {
    let mut float = false;
    while *i < bytes.len() && bytes[*i].is_ascii_digit() {
        *i += 1;
    }
    if *i < bytes.len() && bytes[*i] == b'.' && bytes.get(*i + 1).is_none_or(|b| !b.is_ascii_alphabetic() || *b == b'e') {
        float = true;
        *i += 1;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
    }
    if *i < bytes.len() && (bytes[*i] == b'e' || bytes[*i] == b'E') {
        let mut j = *i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            *i = j;
            float = true;
        }
    }
    if float {
        TokenKind::FloatLit
    } else {
        TokenKind::IntLit
    }
}

/// Decodes a string literal's text (quotes included) into its value.
pub fn unquote(text: &str) -> String {
    let inner = &text[1..text.len() - 1];
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('0') => out.push('\0'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenKind::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        lex(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn column_projection() {
        assert_eq!(kinds("table['Year']"), vec![Ident, LBracket, StrLit, RBracket]);
    }

    #[test]
    fn comparison_with_float() {
        let toks = lex("x >= 10.5").unwrap();
        assert_eq!(toks.iter().map(|t| t.kind).collect::<Vec<_>>(), vec![Ident, Op, FloatLit]);
        assert_eq!(toks[1].text, ">=");
    }

    #[test]
    fn unterminated_string() {
        let err = lex("table['a").unwrap_err();
        assert_eq!(err.kind, ErrorKind::LexError);
        assert_eq!(err.span.start, 6);
    }

    #[test]
    fn both_quote_styles_and_escapes() {
        let toks = lex(r#"'it\'s' "a""#).unwrap();
        assert_eq!(toks.len(), 2);
        assert_eq!(unquote(&toks[0].text), "it's");
        assert_eq!(unquote(&toks[1].text), "a");
    }

    #[test]
    fn numbers() {
        assert_eq!(kinds("1 2.5 .5 1e3 3."), vec![IntLit, FloatLit, FloatLit, FloatLit, FloatLit]);
        // method call on an integer-looking prefix is not a float
        assert_eq!(kinds("x.iloc[0].name"), vec![Ident, Dot, Ident, LBracket, IntLit, RBracket, Dot, Ident]);
    }

    #[test]
    fn unknown_character() {
        assert_eq!(lex("table # comment").unwrap_err().kind, ErrorKind::LexError);
    }

    #[test]
    fn spans_cover_source_modulo_whitespace() {
        let src = "table[ table['a'] >= 3 ].groupby( 'b' )";
        let toks = lex(src).unwrap();
        let mut rebuilt = String::new();
        let mut last = 0;
        for t in &toks {
            assert!(src[last..t.span.start].chars().all(char::is_whitespace));
            rebuilt.push_str(&src[last..t.span.start]);
            rebuilt.push_str(&t.text);
            last = t.span.end;
        }
        rebuilt.push_str(&src[last..]);
        assert_eq!(rebuilt, src);
    }
}

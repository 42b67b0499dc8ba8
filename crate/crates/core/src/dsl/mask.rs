use super::lexer::{lex, TokenKind};
use super::DslError;

/// Deletes every string and numeric literal (quotes included) and all
/// whitespace, concatenating the remaining tokens in order.
pub fn mask_constants(source: &str) -> Result<String, DslError> {
    Ok(lex(source)?
        .into_iter()
        .filter(|t| !t.is_literal())
        .map(|t| t.text)
        .collect())
}

/// Deletes string literals only; numbers and whitespace are kept.
pub fn strip_string_literals(source: &str) -> Result<String, DslError> {
    let mut out = String::with_capacity(source.len());
    let mut last = 0;
    for t in lex(source)?.iter().filter(|t| t.kind == TokenKind::StrLit) {
        out.push_str(&source[last..t.span.start]);
        last = t.span.end;
    }
    out.push_str(&source[last..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masking_examples() {
        assert_eq!(
            mask_constants("table[table['Outcome']=='Winner'].groupby('Opponent in final')").unwrap(),
            "table[table[]==].groupby()"
        );
        assert_eq!(
            mask_constants("table['Year'].value_counts().idxmax()").unwrap(),
            "table[].value_counts().idxmax()"
        );
        assert_eq!(mask_constants("table").unwrap(), "table");
        assert_eq!(mask_constants("table[table['a'] > 10.5].head( 3 )").unwrap(), "table[table[]>].head()");
    }

    #[test]
    fn stripping_examples() {
        assert_eq!(strip_string_literals("table['Year'].head(5)").unwrap(), "table[].head(5)");
        assert_eq!(strip_string_literals("len(table)").unwrap(), "len(table)");
        assert_eq!(strip_string_literals("table[['A','B']]").unwrap(), "table[[,]]");
    }

    #[test]
    fn lex_errors_propagate() {
        assert!(mask_constants("table['a").is_err());
        assert!(strip_string_literals("table['a").is_err());
    }
}

//! Recursive-descent parser for the table-query language.
//!
//! Precedence, loosest first: `|`, `&`, `~`, comparison, `+ -`, `* / %`,
//! unary minus, postfix chains. Chains are left-associative.

use super::ast::{Arg, BinOp, Expr, ExprKind};
use super::lexer::{lex, unquote, Token, TokenKind};
use super::{DslError, ErrorKind, Span};
use crate::table::Cell;

pub fn parse_source(source: &str) -> Result<Expr, DslError> {
    let tokens = lex(source)?;
    parse(&tokens)
}

pub fn parse(tokens: &[Token]) -> Result<Expr, DslError> {
    let mut p = Parser {
        tokens,
        pos: 0,
        params: Vec::new(),
    };
    let expr = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(p.error_at(t.span, "end of input"));
    }
    Ok(expr)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    params: Vec<String>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&'a Token> {
        self.tokens.get(self.pos + k)
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn end_span(&self) -> Span {
        let end = self.tokens.last().map_or(0, |t| t.span.end);
        Span::new(end, end)
    }

    fn error_at(&self, span: Span, expected: &str) -> DslError {
        DslError::new(ErrorKind::ParseError, span, format!("expected {expected}"))
    }

    fn error_here(&self, expected: &str) -> DslError {
        let span = self.peek().map_or(self.end_span(), |t| t.span);
        self.error_at(span, expected)
    }

    fn at(&self, kind: TokenKind) -> bool {
        self.peek().is_some_and(|t| t.kind == kind)
    }

    fn at_op(&self, sym: &str) -> bool {
        self.peek().is_some_and(|t| t.is_op(sym))
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<&'a Token, DslError> {
        if self.at(kind) {
            Ok(self.bump().expect("checked"))
        } else {
            Err(self.error_here(what))
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        self.or_expr()
    }

    fn binary_level(
        &mut self,
        ops: &[&str],
        next: fn(&mut Self) -> Result<Expr, DslError>,
    ) -> Result<Expr, DslError> {
        let mut lhs = next(self)?;
        while let Some(t) = self.peek().filter(|t| t.kind == TokenKind::Op && ops.contains(&t.text.as_str())) {
            self.bump();
            let op = BinOp::from_symbol(&t.text).expect("listed operator");
            let rhs = next(self)?;
            let span = lhs.span.join(rhs.span);
            lhs = Expr::new(
                ExprKind::BinOp {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            );
        }
        Ok(lhs)
    }

    fn or_expr(&mut self) -> Result<Expr, DslError> {
        self.binary_level(&["|"], Self::and_expr)
    }

    fn and_expr(&mut self) -> Result<Expr, DslError> {
        self.binary_level(&["&"], Self::not_expr)
    }

    fn not_expr(&mut self) -> Result<Expr, DslError> {
        if self.at_op("~") {
            let start = self.bump().expect("checked").span;
            let operand = self.not_expr()?;
            let span = start.join(operand.span);
            return Ok(Expr::new(ExprKind::UnaryNot(Box::new(operand)), span));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr, DslError> {
        let lhs = self.arith()?;
        let Some(t) = self.peek() else { return Ok(lhs) };
        let Some(op) = BinOp::from_symbol(&t.text).filter(|o| t.kind == TokenKind::Op && o.is_comparison()) else {
            return Ok(lhs);
        };
        self.bump();
        let rhs = self.arith()?;
        let span = lhs.span.join(rhs.span);
        Ok(Expr::new(
            ExprKind::BinOp {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            span,
        ))
    }

    fn arith(&mut self) -> Result<Expr, DslError> {
        self.binary_level(&["+", "-"], Self::term)
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        self.binary_level(&["*", "/", "%"], Self::unary)
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if self.at_op("-") {
            let start = self.bump().expect("checked").span;
            let operand = self.unary()?;
            let span = start.join(operand.span);
            let kind = match operand.kind {
                ExprKind::Literal(Cell::Int(v)) => ExprKind::Literal(Cell::Int(-v)),
                ExprKind::Literal(Cell::Float(v)) => ExprKind::Literal(Cell::Float(-v)),
                other => ExprKind::Neg(Box::new(Expr::new(other, operand.span))),
            };
            return Ok(Expr::new(kind, span));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, DslError> {
        let mut base = self.primary()?;
        loop {
            if self.at(TokenKind::LBracket) {
                base = self.subscript(base)?;
            } else if self.at(TokenKind::Dot) {
                base = self.dotted(base)?;
            } else {
                return Ok(base);
            }
        }
    }

    fn subscript(&mut self, base: Expr) -> Result<Expr, DslError> {
        self.bump();
        let inner = self.expr()?;
        let close = self.expect(TokenKind::RBracket, "`]`")?;
        let span = base.span.join(close.span);
        let base = Box::new(base);
        let kind = match inner.kind {
            ExprKind::Literal(Cell::Str(name)) => ExprKind::ColumnProj { base, name },
            ExprKind::Literal(Cell::Int(index)) => ExprKind::Index { base, index },
            ExprKind::ListLit(items) => {
                let names = items
                    .into_iter()
                    .map(|e| match e.kind {
                        ExprKind::Literal(Cell::Str(s)) => Ok(s),
                        _ => Err(self.error_at(e.span, "column name string")),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                ExprKind::MultiProj { base, names }
            }
            other => ExprKind::RowFilter {
                base,
                predicate: Box::new(Expr::new(other, inner.span)),
            },
        };
        Ok(Expr::new(kind, span))
    }

    fn dotted(&mut self, base: Expr) -> Result<Expr, DslError> {
        self.bump();
        let name_tok = self.expect(TokenKind::Ident, "identifier after `.`")?;
        let name = name_tok.text.clone();
        if name == "iloc" && self.at(TokenKind::LBracket) {
            self.bump();
            let index = self.expr()?;
            let close = self.expect(TokenKind::RBracket, "`]`")?;
            let span = base.span.join(close.span);
            return Ok(Expr::new(
                ExprKind::IlocIndex {
                    base: Box::new(base),
                    index: Box::new(index),
                },
                span,
            ));
        }
        if name == "str"
            && self.at(TokenKind::Dot)
            && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Ident)
            && self.peek_at(2).is_some_and(|t| t.kind == TokenKind::LParen)
        {
            self.bump();
            let method = self.bump().expect("checked").text.clone();
            let (args, end) = self.call_args()?;
            let span = base.span.join(end);
            return Ok(Expr::new(
                ExprKind::Method {
                    base: Box::new(base),
                    name: format!("str.{method}"),
                    args,
                },
                span,
            ));
        }
        if self.at(TokenKind::LParen) {
            let (args, end) = self.call_args()?;
            let span = base.span.join(end);
            return Ok(Expr::new(
                ExprKind::Method {
                    base: Box::new(base),
                    name,
                    args,
                },
                span,
            ));
        }
        let span = base.span.join(name_tok.span);
        Ok(Expr::new(
            ExprKind::Attr {
                base: Box::new(base),
                name,
            },
            span,
        ))
    }

    /// Parses `( args? )`, returning the arguments and the closing span.
    fn call_args(&mut self) -> Result<(Vec<Arg>, Span), DslError> {
        self.expect(TokenKind::LParen, "`(`")?;
        let mut args = Vec::new();
        if !self.at(TokenKind::RParen) {
            loop {
                let name = if self.at(TokenKind::Ident) && self.peek_at(1).is_some_and(|t| t.is_op("=")) {
                    let n = self.bump().expect("checked").text.clone();
                    self.bump();
                    Some(n)
                } else {
                    None
                };
                let value = self.expr()?;
                args.push(Arg { name, value });
                if self.at(TokenKind::Comma) {
                    self.bump();
                    if self.at(TokenKind::RParen) {
                        break;
                    }
                    continue;
                }
                break;
            }
        }
        let close = self.expect(TokenKind::RParen, "`)` or `,`")?;
        Ok((args, close.span))
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        let Some(tok) = self.peek() else {
            return Err(self.error_here("expression"));
        };
        match tok.kind {
            TokenKind::StrLit => {
                self.bump();
                Ok(Expr::new(ExprKind::Literal(Cell::Str(unquote(&tok.text))), tok.span))
            }
            TokenKind::IntLit => {
                self.bump();
                let v = tok
                    .text
                    .parse::<i64>()
                    .map_err(|_| self.error_at(tok.span, "integer literal in range"))?;
                Ok(Expr::new(ExprKind::Literal(Cell::Int(v)), tok.span))
            }
            TokenKind::FloatLit => {
                self.bump();
                let v = tok.text.parse::<f64>().map_err(|_| self.error_at(tok.span, "float literal"))?;
                Ok(Expr::new(ExprKind::Literal(Cell::float(v)), tok.span))
            }
            TokenKind::LParen => {
                self.bump();
                let mut inner = self.expr()?;
                let close = self.expect(TokenKind::RParen, "`)`")?;
                inner.span = tok.span.join(close.span);
                Ok(inner)
            }
            TokenKind::LBracket => self.list_lit(),
            TokenKind::LBrace => self.dict_lit(),
            TokenKind::Ident => self.ident(),
            _ => Err(self.error_here("expression")),
        }
    }

    fn list_lit(&mut self) -> Result<Expr, DslError> {
        let open = self.bump().expect("checked").span;
        let mut items = Vec::new();
        while !self.at(TokenKind::RBracket) {
            items.push(self.expr()?);
            if !self.at(TokenKind::Comma) {
                break;
            }
            self.bump();
        }
        let close = self.expect(TokenKind::RBracket, "`]` or `,`")?;
        Ok(Expr::new(ExprKind::ListLit(items), open.join(close.span)))
    }

    fn dict_lit(&mut self) -> Result<Expr, DslError> {
        let open = self.bump().expect("checked").span;
        let mut pairs = Vec::new();
        while !self.at(TokenKind::RBrace) {
            let key = self.expr()?;
            self.expect(TokenKind::Colon, "`:`")?;
            let value = self.expr()?;
            pairs.push((key, value));
            if !self.at(TokenKind::Comma) {
                break;
            }
            self.bump();
        }
        let close = self.expect(TokenKind::RBrace, "`}` or `,`")?;
        Ok(Expr::new(ExprKind::DictLit(pairs), open.join(close.span)))
    }

    fn ident(&mut self) -> Result<Expr, DslError> {
        let tok = self.bump().expect("checked");
        let name = tok.text.as_str();
        if self.params.iter().any(|p| p == name) {
            return Ok(Expr::new(ExprKind::Var(name.to_string()), tok.span));
        }
        match name {
            "table" => Ok(Expr::new(ExprKind::TableRef, tok.span)),
            "True" => Ok(Expr::new(ExprKind::Literal(Cell::Int(1)), tok.span)),
            "False" => Ok(Expr::new(ExprKind::Literal(Cell::Int(0)), tok.span)),
            "None" => Ok(Expr::new(ExprKind::Literal(Cell::Null), tok.span)),
            "lambda" => {
                let param = self.expect(TokenKind::Ident, "lambda parameter")?.text.clone();
                self.expect(TokenKind::Colon, "`:` after lambda parameter")?;
                self.params.push(param.clone());
                let body = self.expr();
                self.params.pop();
                let body = body?;
                let span = tok.span.join(body.span);
                Ok(Expr::new(
                    ExprKind::Lambda {
                        param,
                        body: Box::new(body),
                    },
                    span,
                ))
            }
            _ if self.at(TokenKind::LParen) => {
                let (mut args, end) = self.call_args()?;
                let span = tok.span.join(end);
                if name == "len" {
                    if args.len() != 1 || args[0].name.is_some() {
                        return Err(self.error_at(span, "exactly one argument to len()"));
                    }
                    let arg = args.pop().expect("one arg").value;
                    return Ok(Expr::new(ExprKind::LenCall(Box::new(arg)), span));
                }
                Ok(Expr::new(
                    ExprKind::Call {
                        func: name.to_string(),
                        args,
                    },
                    span,
                ))
            }
            _ => Ok(Expr::new(ExprKind::Name(name.to_string()), tok.span)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind_of(src: &str) -> ExprKind {
        parse_source(src).unwrap().kind
    }

    #[test]
    fn bare_table() {
        assert_eq!(kind_of("table"), ExprKind::TableRef);
    }

    #[test]
    fn double_dot_is_a_parse_error() {
        let err = parse_source("table..x").unwrap_err();
        assert_eq!(err.kind, ErrorKind::ParseError);
        assert_eq!(err.span, Span::new(6, 7));
    }

    #[test]
    fn snooker_listing_shape() {
        let e = parse_source("table[table['Outcome']=='Winner'].groupby('Opponent in final').size().idxmax()").unwrap();
        let ExprKind::Method { base, name, .. } = e.kind else { panic!() };
        assert_eq!(name, "idxmax");
        let ExprKind::Method { base, name, .. } = base.kind else { panic!() };
        assert_eq!(name, "size");
        let ExprKind::Method { base, name, args } = base.kind else { panic!() };
        assert_eq!(name, "groupby");
        assert_eq!(args[0].value.kind, ExprKind::Literal(Cell::Str("Opponent in final".into())));
        let ExprKind::RowFilter { base, predicate } = base.kind else { panic!() };
        assert_eq!(base.kind, ExprKind::TableRef);
        assert!(matches!(predicate.kind, ExprKind::BinOp { op: BinOp::Eq, .. }));
    }

    #[test]
    fn comparison_binds_tighter_than_logic() {
        let e = parse_source("table[table['a'] > 1 & ~ table['b'] == 'x' | table['c'] < 2]").unwrap();
        let ExprKind::RowFilter { predicate, .. } = e.kind else { panic!() };
        let ExprKind::BinOp { op: BinOp::Or, lhs, .. } = predicate.kind else { panic!() };
        let ExprKind::BinOp { op: BinOp::And, rhs, .. } = lhs.kind else { panic!() };
        let ExprKind::UnaryNot(inner) = rhs.kind else { panic!() };
        assert!(matches!(inner.kind, ExprKind::BinOp { op: BinOp::Eq, .. }));
    }

    #[test]
    fn kwargs_lists_dicts_and_names() {
        let e = parse_source("table.groupby(['P']).agg({'G': sum}).sort_values(by=['G'], ascending=False).iloc[0].name").unwrap();
        let ExprKind::Attr { base, name } = e.kind else { panic!() };
        assert_eq!(name, "name");
        let ExprKind::IlocIndex { base, .. } = base.kind else { panic!() };
        let ExprKind::Method { name, args, .. } = base.kind else { panic!() };
        assert_eq!(name, "sort_values");
        assert_eq!(args[0].name.as_deref(), Some("by"));
        assert_eq!(args[1].value.kind, ExprKind::Literal(Cell::Int(0)));
    }

    #[test]
    fn lambda_scopes_its_parameter() {
        let e = parse_source("table['S'].apply(lambda x: int(x.split('-')[0]) + 1)").unwrap();
        let ExprKind::Method { args, .. } = e.kind else { panic!() };
        let ExprKind::Lambda { param, body } = &args[0].value.kind else { panic!() };
        assert_eq!(param, "x");
        let ExprKind::BinOp { lhs, .. } = &body.kind else { panic!() };
        let ExprKind::Call { func, args } = &lhs.kind else { panic!() };
        assert_eq!(func, "int");
        let ExprKind::Index { base, index } = &args[0].value.kind else { panic!() };
        assert_eq!(*index, 0);
        let ExprKind::Method { base, .. } = &base.kind else { panic!() };
        assert_eq!(base.kind, ExprKind::Var("x".into()));
        // outside the lambda `x` is just a name
        assert_eq!(kind_of("x"), ExprKind::Name("x".into()));
    }

    #[test]
    fn str_accessor_and_shape() {
        let e = parse_source("table[table['C'].str.contains('5th')].shape[0]").unwrap();
        let ExprKind::Index { base, index: 0 } = e.kind else { panic!() };
        assert!(matches!(base.kind, ExprKind::Attr { ref name, .. } if name == "shape"));
        let e = parse_source("table['C'].str.rstrip('%')").unwrap();
        assert!(matches!(e.kind, ExprKind::Method { ref name, .. } if name == "str.rstrip"));
    }

    #[test]
    fn negative_literals_fold() {
        assert_eq!(kind_of("-3"), ExprKind::Literal(Cell::Int(-3)));
        assert!(matches!(kind_of("table['a'].iloc[-1]"), ExprKind::IlocIndex { .. }));
    }

    #[test]
    fn trailing_tokens_rejected() {
        assert_eq!(parse_source("table )").unwrap_err().kind, ErrorKind::ParseError);
        assert_eq!(parse_source("len(table, table)").unwrap_err().kind, ErrorKind::ParseError);
        assert_eq!(parse_source("sum(int(x) for x in table)").unwrap_err().kind, ErrorKind::ParseError);
    }
}

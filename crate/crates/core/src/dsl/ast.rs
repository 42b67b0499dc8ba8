use super::Span;
use crate::table::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl BinOp {
    pub fn from_symbol(s: &str) -> Option<BinOp> {
        Some(match s {
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "&" => BinOp::And,
            "|" => BinOp::Or,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Mod,
            _ => return None,
        })
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arg {
    /// Keyword name for `name=value` arguments.
    pub name: Option<String>,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    /// The `table` chain root.
    TableRef,
    /// `base['name']`.
    ColumnProj { base: Box<Expr>, name: String },
    /// `base[['a', 'b']]`.
    MultiProj { base: Box<Expr>, names: Vec<String> },
    /// `base[predicate]`.
    RowFilter { base: Box<Expr>, predicate: Box<Expr> },
    /// `base.name(args)`; `.str.` methods are named `str.<method>`.
    Method { base: Box<Expr>, name: String, args: Vec<Arg> },
    BinOp { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    /// `~operand`.
    UnaryNot(Box<Expr>),
    /// Arithmetic negation of a non-literal.
    Neg(Box<Expr>),
    Literal(Cell),
    ListLit(Vec<Expr>),
    DictLit(Vec<(Expr, Expr)>),
    Lambda { param: String, body: Box<Expr> },
    LenCall(Box<Expr>),
    /// Builtin call such as `int(x)`.
    Call { func: String, args: Vec<Arg> },
    /// `base.name` without a call.
    Attr { base: Box<Expr>, name: String },
    /// `base.iloc[index]`.
    IlocIndex { base: Box<Expr>, index: Box<Expr> },
    /// `base[<int>]`.
    Index { base: Box<Expr>, index: i64 },
    /// Reference to the enclosing lambda's parameter.
    Var(String),
    /// Any other bare identifier, e.g. `sum` in `agg({'a': sum})`.
    Name(String),
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }
}

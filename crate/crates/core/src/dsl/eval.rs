//! Tree-walking evaluator. Input tables are never mutated; every step
//! produces fresh values. A step counter and a wall-clock deadline bound
//! the work done by any single query.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::time::Instant;

use super::ast::{Arg, BinOp, Expr, ExprKind};
use super::value::{Frame, Grouped, ListSeries, Mask, Selection, Series, Value};
use super::{DslError, ErrorKind, Span};
use crate::table::{parse_datetime, parse_float, parse_int, Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalLimits {
    pub max_rows: usize,
    pub max_steps: u64,
    pub timeout_ms: u64,
}

impl Default for EvalLimits {
    fn default() -> Self {
        EvalLimits {
            max_rows: 100_000,
            max_steps: 10_000_000,
            timeout_ms: 2_000,
        }
    }
}

pub fn evaluate(expr: &Expr, table: &Table, limits: &EvalLimits) -> Result<Value, DslError> {
    if limits.max_rows == 0 || limits.max_steps == 0 || limits.timeout_ms == 0 {
        return Err(DslError::new(ErrorKind::LimitExceeded, expr.span, "limits must be positive"));
    }
    let mut ev = Evaluator {
        table,
        limits: *limits,
        steps: 0,
        started: Instant::now(),
        env: Vec::new(),
    };
    ev.eval(expr)
}

type Fault = (ErrorKind, String);

fn fault<T>(kind: ErrorKind, msg: impl Into<String>) -> Result<T, Fault> {
    Err((kind, msg.into()))
}

trait At<T> {
    fn at(self, span: Span) -> Result<T, DslError>;
}

impl<T> At<T> for Result<T, Fault> {
    fn at(self, span: Span) -> Result<T, DslError> {
        self.map_err(|(kind, msg)| DslError::new(kind, span, msg))
    }
}

fn type_err<T>(msg: impl Into<String>) -> Result<T, Fault> {
    fault(ErrorKind::TypeError, msg)
}

fn unknown_method<T>(what: &str, on: &Value) -> Result<T, Fault> {
    fault(ErrorKind::UnknownMethod, format!("`{what}` is not supported on a {}", on.kind_name()))
}

fn bool_cell(b: bool) -> Cell {
    Cell::Int(b as i64)
}

fn truthy(c: &Cell) -> Result<bool, Fault> {
    match c {
        Cell::Int(v) => Ok(*v != 0),
        Cell::Float(v) => Ok(*v != 0.0),
        Cell::Null => Ok(false),
        other => type_err(format!("`{}` is not a boolean", other.render())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Category {
    Numeric,
    Text,
    Time,
}

fn category(c: &Cell) -> Option<Category> {
    match c {
        Cell::Int(_) | Cell::Float(_) => Some(Category::Numeric),
        Cell::Str(_) => Some(Category::Text),
        Cell::DateTime(_) => Some(Category::Time),
        Cell::Null => None,
    }
}

/// The single category shared by all non-null cells, or a TypeError.
fn uniform_category(values: &[Cell], what: &str) -> Result<Option<Category>, Fault> {
    let mut seen = None;
    for c in values {
        match (seen, category(c)) {
            (_, None) => {}
            (None, k) => seen = k,
            (Some(a), Some(b)) if a != b => return type_err(format!("{what} over mixed value types")),
            _ => {}
        }
    }
    Ok(seen)
}

fn ordering_of(a: &Cell, b: &Cell) -> Option<Ordering> {
    use Cell::*;
    match (a, b) {
        (Int(x), Int(y)) => Some(x.cmp(y)),
        (x, y) if x.is_numeric() && y.is_numeric() => x.as_f64()?.partial_cmp(&y.as_f64()?),
        (Str(s), n) if n.is_numeric() => str_vs_number(s, n),
        (n, Str(s)) if n.is_numeric() => str_vs_number(s, n).map(Ordering::reverse),
        (Str(x), Str(y)) => Some(x.cmp(y)),
        (DateTime(x), DateTime(y)) => Some(x.cmp(y)),
        (DateTime(d), Str(s)) => parse_datetime(s).map(|x| d.cmp(&x)),
        (Str(s), DateTime(d)) => parse_datetime(s).map(|x| x.cmp(d)),
        _ => None,
    }
}

fn str_vs_number(s: &str, n: &Cell) -> Option<Ordering> {
    if let (Some(x), Cell::Int(y)) = (parse_int(s), n) {
        return Some(x.cmp(y));
    }
    parse_float(s)?.partial_cmp(&n.as_f64()?)
}

/// Cell comparison. Anything compared with a null is false; text that
/// reads as a number or date compares as one.
fn compare(op: BinOp, a: &Cell, b: &Cell) -> Result<bool, Fault> {
    if a.is_null() || b.is_null() {
        return Ok(false);
    }
    match ordering_of(a, b) {
        Some(o) => Ok(match op {
            BinOp::Eq => o == Ordering::Equal,
            BinOp::Ne => o != Ordering::Equal,
            BinOp::Lt => o == Ordering::Less,
            BinOp::Le => o != Ordering::Greater,
            BinOp::Gt => o == Ordering::Greater,
            BinOp::Ge => o != Ordering::Less,
            _ => unreachable!("comparison operator"),
        }),
        None => match op {
            BinOp::Eq => Ok(false),
            BinOp::Ne => Ok(true),
            _ => type_err(format!("cannot order `{}` against `{}`", a.render(), b.render())),
        },
    }
}

fn arith(op: BinOp, a: &Cell, b: &Cell) -> Result<Cell, Fault> {
    use Cell::*;
    if a.is_null() || b.is_null() {
        return Ok(Null);
    }
    let overflow = || (ErrorKind::TypeError, "integer overflow".to_string());
    match (a, b) {
        (Int(x), Int(y)) => match op {
            BinOp::Add => x.checked_add(*y).map(Int).ok_or_else(overflow),
            BinOp::Sub => x.checked_sub(*y).map(Int).ok_or_else(overflow),
            BinOp::Mul => x.checked_mul(*y).map(Int).ok_or_else(overflow),
            BinOp::Div if *y == 0 => fault(ErrorKind::DivisionByZero, "division by zero"),
            BinOp::Div => Ok(Cell::float(*x as f64 / *y as f64)),
            BinOp::Mod if *y == 0 => fault(ErrorKind::DivisionByZero, "modulo by zero"),
            BinOp::Mod => Ok(Int(x.checked_rem_euclid(*y).map_or(0, |r| if r != 0 && *y < 0 { r + y } else { r }))),
            _ => unreachable!("arithmetic operator"),
        },
        (x, y) if x.is_numeric() && y.is_numeric() => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            Ok(Cell::float(match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div if y == 0.0 => return fault(ErrorKind::DivisionByZero, "division by zero"),
                BinOp::Div => x / y,
                BinOp::Mod if y == 0.0 => return fault(ErrorKind::DivisionByZero, "modulo by zero"),
                BinOp::Mod => x - y * (x / y).floor(),
                _ => unreachable!("arithmetic operator"),
            }))
        }
        (Str(x), Str(y)) if op == BinOp::Add => Ok(Str(format!("{x}{y}"))),
        _ => type_err(format!("unsupported operand types for {op:?}: `{}` and `{}`", a.render(), b.render())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Reducer {
    Sum,
    Mean,
    Max,
    Min,
    Count,
    Nunique,
    Size,
}

impl Reducer {
    fn from_name(name: &str) -> Option<Reducer> {
        Some(match name {
            "sum" => Reducer::Sum,
            "mean" => Reducer::Mean,
            "max" => Reducer::Max,
            "min" => Reducer::Min,
            "count" => Reducer::Count,
            "nunique" => Reducer::Nunique,
            "size" => Reducer::Size,
            _ => return None,
        })
    }
}

fn sum_cells(values: &[Cell]) -> Result<Cell, Fault> {
    if values.iter().any(|c| matches!(c, Cell::Str(_) | Cell::DateTime(_))) {
        return type_err("sum over non-numeric values");
    }
    if values.iter().any(|c| matches!(c, Cell::Float(_))) {
        return Ok(Cell::float(values.iter().filter_map(Cell::as_f64).sum()));
    }
    let mut acc: i64 = 0;
    for c in values {
        if let Cell::Int(v) = c {
            acc = acc.checked_add(*v).ok_or((ErrorKind::TypeError, "integer overflow".to_string()))?;
        }
    }
    Ok(Cell::Int(acc))
}

fn reduce(values: &[Cell], r: Reducer) -> Result<Cell, Fault> {
    match r {
        Reducer::Sum => sum_cells(values),
        Reducer::Mean => {
            if values.iter().any(|c| matches!(c, Cell::Str(_) | Cell::DateTime(_))) {
                return type_err("mean over non-numeric values");
            }
            let nums: Vec<f64> = values.iter().filter_map(Cell::as_f64).collect();
            if nums.is_empty() {
                return type_err("mean of no values");
            }
            Ok(Cell::float(nums.iter().sum::<f64>() / nums.len() as f64))
        }
        Reducer::Max | Reducer::Min => {
            uniform_category(values, "max/min")?;
            let best = values.iter().filter(|c| !c.is_null()).reduce(|a, b| {
                let o = b.total_cmp(a);
                let better = if r == Reducer::Max { o == Ordering::Greater } else { o == Ordering::Less };
                if better {
                    b
                } else {
                    a
                }
            });
            Ok(best.cloned().unwrap_or(Cell::Null))
        }
        Reducer::Count => Ok(Cell::Int(values.iter().filter(|c| !c.is_null()).count() as i64)),
        Reducer::Nunique => {
            let mut seen: Vec<&Cell> = values.iter().filter(|c| !c.is_null()).collect();
            seen.sort_by(|a, b| a.total_cmp(b));
            seen.dedup_by(|a, b| a.total_cmp(b) == Ordering::Equal);
            Ok(Cell::Int(seen.len() as i64))
        }
        Reducer::Size => Ok(Cell::Int(values.len() as i64)),
    }
}

/// Label of the first occurrence of the largest (or smallest) value.
fn idx_extreme(values: &[Cell], index: &[Cell], max: bool) -> Result<Cell, Fault> {
    uniform_category(values, "idxmax/idxmin")?;
    let mut best: Option<usize> = None;
    for (i, c) in values.iter().enumerate() {
        if c.is_null() {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(b) => {
                let o = c.total_cmp(&values[b]);
                if (max && o == Ordering::Greater) || (!max && o == Ordering::Less) {
                    best = Some(i);
                }
            }
        }
    }
    match best {
        Some(i) => Ok(index[i].clone()),
        None => fault(ErrorKind::IndexError, "argmax of an empty sequence"),
    }
}

/// Stable ordering, nulls last regardless of direction.
fn sort_order(keys: &[&[Cell]], ascending: &[bool], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        for (k, col) in keys.iter().enumerate() {
            let (a, b) = (&col[i], &col[j]);
            let o = match (a.is_null(), b.is_null()) {
                (true, true) => Ordering::Equal,
                (true, false) => Ordering::Greater,
                (false, true) => Ordering::Less,
                _ => {
                    let o = a.total_cmp(b);
                    if ascending[k] {
                        o
                    } else {
                        o.reverse()
                    }
                }
            };
            if o != Ordering::Equal {
                return o;
            }
        }
        Ordering::Equal
    });
    order
}

fn value_counts(s: &Series) -> Series {
    let mut counts: Vec<(Cell, i64)> = Vec::new();
    let mut slot: HashMap<&Cell, usize> = HashMap::new();
    for c in s.values.iter().filter(|c| !c.is_null()) {
        match slot.get(c) {
            Some(&k) => counts[k].1 += 1,
            None => {
                slot.insert(c, counts.len());
                counts.push((c.clone(), 1));
            }
        }
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1));
    Series {
        name: Some(Cell::Str("count".into())),
        index: counts.iter().map(|(c, _)| c.clone()).collect(),
        values: counts.into_iter().map(|(_, n)| Cell::Int(n)).collect(),
    }
}

fn group_label(key: &[Cell]) -> Cell {
    if key.len() == 1 {
        key[0].clone()
    } else {
        let parts: Vec<String> = key
            .iter()
            .map(|c| if c.is_null() { "None".to_string() } else { c.render() })
            .collect();
        Cell::Str(format!("({})", parts.join(", ")))
    }
}

fn lookup_label(index: &[Cell], label: &Cell) -> Option<usize> {
    index.iter().position(|l| l == label)
}

/// Position for an integer subscript: a label when the index holds
/// integers, otherwise a position.
fn int_subscript(index: &[Cell], i: i64) -> Result<usize, Fault> {
    if index.iter().any(|l| matches!(l, Cell::Int(_))) {
        return lookup_label(index, &Cell::Int(i)).ok_or((ErrorKind::IndexError, format!("label {i} not found")));
    }
    positional(index.len(), i)
}

fn positional(len: usize, i: i64) -> Result<usize, Fault> {
    let k = if i < 0 { len as i64 + i } else { i };
    if k < 0 || k >= len as i64 {
        return fault(ErrorKind::IndexError, format!("position {i} out of range for length {len}"));
    }
    Ok(k as usize)
}

fn mask_as_series(m: Mask) -> Series {
    Series {
        name: None,
        values: m.values.into_iter().map(bool_cell).collect(),
        index: m.index,
    }
}

fn astype(c: &Cell, ty: &str) -> Result<Cell, Fault> {
    match ty {
        "int" => match c {
            Cell::Int(v) => Ok(Cell::Int(*v)),
            Cell::Float(v) if v.abs() < 9.2e18 => Ok(Cell::Int(v.trunc() as i64)),
            Cell::Str(s) => parse_int(s).map(Cell::Int).ok_or((ErrorKind::TypeError, format!("invalid integer `{s}`"))),
            other => type_err(format!("cannot convert `{}` to int", other.render())),
        },
        "float" => match c {
            Cell::Null => Ok(Cell::Null),
            Cell::Int(v) => Ok(Cell::Float(*v as f64)),
            Cell::Float(v) => Ok(Cell::Float(*v)),
            Cell::Str(s) => parse_float(s).map(Cell::Float).ok_or((ErrorKind::TypeError, format!("invalid float `{s}`"))),
            other => type_err(format!("cannot convert `{}` to float", other.render())),
        },
        "str" => Ok(match c {
            Cell::Null => Cell::Null,
            other => Cell::Str(other.render()),
        }),
        other => fault(ErrorKind::UnknownMethod, format!("unsupported type `{other}`")),
    }
}

fn builtin(func: &str, v: &Cell, digits: Option<i64>) -> Result<Cell, Fault> {
    match func {
        "int" | "float" | "str" => {
            if func == "str" && v.is_null() {
                return Ok(Cell::Str("None".into()));
            }
            astype(v, func)
        }
        "abs" => match v {
            Cell::Int(x) => x.checked_abs().map(Cell::Int).ok_or((ErrorKind::TypeError, "integer overflow".into())),
            Cell::Float(x) => Ok(Cell::Float(x.abs())),
            other => type_err(format!("bad operand for abs: `{}`", other.render())),
        },
        "round" => match (v, digits) {
            (Cell::Int(x), _) => Ok(Cell::Int(*x)),
            (Cell::Float(x), None) => Ok(Cell::Int(x.round_ties_even() as i64)),
            (Cell::Float(x), Some(d)) => {
                let p = 10f64.powi(d.clamp(-300, 300) as i32);
                Ok(Cell::float((x * p).round_ties_even() / p))
            }
            (other, _) => type_err(format!("bad operand for round: `{}`", other.render())),
        },
        other => fault(ErrorKind::UnknownMethod, format!("unknown function `{other}`")),
    }
}

fn str_method(name: &str, c: &Cell, args: &[Cell]) -> Result<Cell, Fault> {
    let s = match c {
        Cell::Null => return Ok(Cell::Null),
        Cell::Str(s) => s,
        other => return type_err(format!("`.str.{name}` on non-text value `{}`", other.render())),
    };
    let text_arg = |i: usize| -> Result<Option<&str>, Fault> {
        match args.get(i) {
            None | Some(Cell::Null) => Ok(None),
            Some(Cell::Str(a)) => Ok(Some(a.as_str())),
            Some(other) => type_err(format!("expected a text argument, got `{}`", other.render())),
        }
    };
    let strip_set = |i: usize| -> Result<Option<Vec<char>>, Fault> { Ok(text_arg(i)?.map(|a| a.chars().collect())) };
    Ok(match name {
        "contains" => match text_arg(0)? {
            Some(pat) => bool_cell(s.contains(pat)),
            None => return type_err("contains needs a pattern"),
        },
        "startswith" => bool_cell(s.starts_with(text_arg(0)?.ok_or((ErrorKind::TypeError, "startswith needs a prefix".into()))?)),
        "endswith" => bool_cell(s.ends_with(text_arg(0)?.ok_or((ErrorKind::TypeError, "endswith needs a suffix".into()))?)),
        "lower" => Cell::Str(s.to_lowercase()),
        "upper" => Cell::Str(s.to_uppercase()),
        "len" => Cell::Int(s.chars().count() as i64),
        "strip" => Cell::Str(match strip_set(0)? {
            Some(set) => s.trim_matches(set.as_slice()).to_string(),
            None => s.trim().to_string(),
        }),
        "lstrip" => Cell::Str(match strip_set(0)? {
            Some(set) => s.trim_start_matches(set.as_slice()).to_string(),
            None => s.trim_start().to_string(),
        }),
        "rstrip" => Cell::Str(match strip_set(0)? {
            Some(set) => s.trim_end_matches(set.as_slice()).to_string(),
            None => s.trim_end().to_string(),
        }),
        "replace" => match (text_arg(0)?, text_arg(1)?) {
            (Some(a), Some(b)) if !a.is_empty() => Cell::Str(s.replace(a, b)),
            _ => return type_err("replace needs two text arguments"),
        },
        other => return fault(ErrorKind::UnknownMethod, format!("unknown string method `{other}`")),
    })
}

fn split_text(c: &Cell, sep: Option<&str>) -> Result<Option<Vec<Cell>>, Fault> {
    match c {
        Cell::Null => Ok(None),
        Cell::Str(s) => Ok(Some(match sep {
            Some("") => return fault(ErrorKind::TypeError, "empty separator"),
            Some(sep) => s.split(sep).map(|p| Cell::Str(p.to_string())).collect(),
            None => s.split_whitespace().map(|p| Cell::Str(p.to_string())).collect(),
        })),
        other => type_err(format!("`.str.split` on non-text value `{}`", other.render())),
    }
}

/// Positional/keyword argument lookup.
fn arg<'a>(args: &'a [Arg], pos: usize, name: &str) -> Option<&'a Expr> {
    args.iter()
        .find(|a| a.name.as_deref() == Some(name))
        .or_else(|| args.iter().filter(|a| a.name.is_none()).nth(pos))
        .map(|a| &a.value)
}

fn check_args(args: &[Arg], max_positional: usize, keywords: &[&str], method: &str) -> Result<(), Fault> {
    let positional = args.iter().filter(|a| a.name.is_none()).count();
    if positional > max_positional {
        return type_err(format!("`{method}` takes at most {max_positional} positional arguments"));
    }
    if let Some(k) = args.iter().filter_map(|a| a.name.as_deref()).find(|k| !keywords.contains(k)) {
        return type_err(format!("`{method}` got an unexpected keyword `{k}`"));
    }
    Ok(())
}

/// Name of a function or type given as a bare identifier or a string.
fn name_arg(e: &Expr) -> Option<&str> {
    match &e.kind {
        ExprKind::Name(n) => Some(n),
        ExprKind::Literal(Cell::Str(s)) => Some(s),
        _ => None,
    }
}

struct Evaluator<'t> {
    table: &'t Table,
    limits: EvalLimits,
    steps: u64,
    started: Instant,
    env: Vec<(String, Value)>,
}

impl Evaluator<'_> {
    fn tick(&mut self, work: usize, span: Span) -> Result<(), DslError> {
        self.steps = self.steps.saturating_add(work as u64 + 1);
        if self.steps > self.limits.max_steps {
            return Err(DslError::new(ErrorKind::LimitExceeded, span, "step budget exhausted"));
        }
        if self.started.elapsed().as_millis() as u64 > self.limits.timeout_ms {
            return Err(DslError::new(ErrorKind::LimitExceeded, span, "evaluation timed out"));
        }
        Ok(())
    }

    fn eval(&mut self, e: &Expr) -> Result<Value, DslError> {
        self.tick(0, e.span)?;
        let span = e.span;
        match &e.kind {
            ExprKind::TableRef => self.table_frame(span),
            ExprKind::ColumnProj { base, name } => {
                let b = self.eval(base)?;
                self.project(b, name).at(span)
            }
            ExprKind::MultiProj { base, names } => {
                let b = self.eval(base)?;
                self.multi_project(b, names).at(span)
            }
            ExprKind::RowFilter { base, predicate } => {
                let b = self.eval(base)?;
                let p = self.eval(predicate)?;
                self.tick(p_len(&p), span)?;
                filter(b, p).at(span)
            }
            ExprKind::Method { base, name, args } => {
                let b = self.eval(base)?;
                self.method(b, name, args, span)
            }
            ExprKind::BinOp { op, lhs, rhs } => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                self.tick(p_len(&l).max(p_len(&r)), span)?;
                binop(*op, l, r).at(span)
            }
            ExprKind::UnaryNot(x) => match self.eval(x)? {
                Value::Mask(m) => Ok(Value::Mask(Mask {
                    values: m.values.iter().map(|b| !b).collect(),
                    index: m.index,
                })),
                Value::Scalar(c) => Ok(Value::Scalar(bool_cell(!truthy(&c).at(span)?))),
                other => type_err(format!("`~` on a {}", other.kind_name())).at(span),
            },
            ExprKind::Neg(x) => {
                let v = self.eval(x)?;
                binop(BinOp::Sub, Value::Scalar(Cell::Int(0)), v).at(span)
            }
            ExprKind::Literal(c) => Ok(Value::Scalar(c.clone())),
            ExprKind::ListLit(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match self.eval(item)? {
                        Value::Scalar(c) => out.push(c),
                        other => return type_err(format!("list items must be scalars, got a {}", other.kind_name())).at(item.span),
                    }
                }
                Ok(Value::List(out))
            }
            ExprKind::DictLit(_) => type_err("a dict is only valid as the argument of agg()").at(span),
            ExprKind::Lambda { .. } => type_err("a lambda is only valid as the argument of apply()").at(span),
            ExprKind::LenCall(x) => {
                let v = self.eval(x)?;
                length(&v).map(|n| Value::Scalar(Cell::Int(n as i64))).at(span)
            }
            ExprKind::Call { func, args } => self.call(func, args, span),
            ExprKind::Attr { base, name } => {
                let b = self.eval(base)?;
                attr(b, name).at(span)
            }
            ExprKind::IlocIndex { base, index } => {
                let b = self.eval(base)?;
                let i = match self.eval(index)? {
                    Value::Scalar(Cell::Int(i)) => i,
                    other => return type_err(format!("iloc needs an integer, got a {}", other.kind_name())).at(index.span),
                };
                iloc(b, i).at(span)
            }
            ExprKind::Index { base, index } => {
                let b = self.eval(base)?;
                int_index(b, *index).at(span)
            }
            ExprKind::Var(name) => match self.env.iter().rev().find(|(n, _)| n == name) {
                Some((_, v)) => Ok(v.clone()),
                None => fault(ErrorKind::UnknownMethod, format!("unbound name `{name}`")).at(span),
            },
            ExprKind::Name(n) => fault(ErrorKind::UnknownMethod, format!("unknown name `{n}`")).at(span),
        }
    }

    fn table_frame(&mut self, span: Span) -> Result<Value, DslError> {
        let t = self.table;
        if t.row_count() > self.limits.max_rows {
            return Err(DslError::new(
                ErrorKind::LimitExceeded,
                span,
                format!("table has {} rows, limit is {}", t.row_count(), self.limits.max_rows),
            ));
        }
        self.tick(t.row_count() * t.column_count().max(1), span)?;
        Ok(Value::Frame(Frame {
            names: t.column_names().into_iter().map(String::from).collect(),
            columns: t.columns().iter().map(|c| c.cells.clone()).collect(),
            index: (0..t.row_count() as i64).map(Cell::Int).collect(),
        }))
    }

    fn project(&mut self, b: Value, name: &str) -> Result<Value, Fault> {
        match b {
            Value::Frame(f) => match f.column_position(name) {
                Some(k) => Ok(Value::Series(Series {
                    name: Some(Cell::Str(name.into())),
                    values: f.columns[k].clone(),
                    index: f.index,
                })),
                None => fault(ErrorKind::UnknownColumn, format!("no column `{name}`")),
            },
            Value::Grouped(mut g) => {
                if g.frame.column_position(name).is_none() {
                    return fault(ErrorKind::UnknownColumn, format!("no column `{name}`"));
                }
                g.selection = Selection::One(name.into());
                Ok(Value::Grouped(g))
            }
            Value::Series(s) => match lookup_label(&s.index, &Cell::Str(name.into())) {
                Some(i) => Ok(Value::Scalar(s.values[i].clone())),
                None => fault(ErrorKind::IndexError, format!("label `{name}` not found")),
            },
            Value::ListSeries(s) => match lookup_label(&s.index, &Cell::Str(name.into())) {
                Some(i) => Ok(list_or_null(&s.values[i])),
                None => fault(ErrorKind::IndexError, format!("label `{name}` not found")),
            },
            other => type_err(format!("cannot select `{name}` from a {}", other.kind_name())),
        }
    }

    fn multi_project(&mut self, b: Value, names: &[String]) -> Result<Value, Fault> {
        match b {
            Value::Frame(f) => {
                let mut columns = Vec::with_capacity(names.len());
                for n in names {
                    let k = f.column_position(n).ok_or((ErrorKind::UnknownColumn, format!("no column `{n}`")))?;
                    columns.push(f.columns[k].clone());
                }
                Ok(Value::Frame(Frame {
                    names: names.to_vec(),
                    columns,
                    index: f.index,
                }))
            }
            Value::Grouped(mut g) => {
                if let Some(n) = names.iter().find(|n| g.frame.column_position(n).is_none()) {
                    return fault(ErrorKind::UnknownColumn, format!("no column `{n}`"));
                }
                g.selection = Selection::Many(names.to_vec());
                Ok(Value::Grouped(g))
            }
            other => type_err(format!("cannot select columns from a {}", other.kind_name())),
        }
    }

    fn call(&mut self, func: &str, args: &[Arg], span: Span) -> Result<Value, DslError> {
        if !matches!(func, "int" | "float" | "str" | "abs" | "round") {
            return fault(ErrorKind::UnknownMethod, format!("unknown function `{func}`")).at(span);
        }
        let max_args = if func == "round" { 2 } else { 1 };
        if args.is_empty() || args.len() > max_args || args.iter().any(|a| a.name.is_some()) {
            return type_err(format!("`{func}` takes {max_args} positional argument(s)")).at(span);
        }
        let digits = match args.get(1) {
            Some(a) => match self.eval(&a.value)? {
                Value::Scalar(Cell::Int(d)) => Some(d),
                _ => return type_err("round digits must be an integer").at(a.value.span),
            },
            None => None,
        };
        let v = self.eval(&args[0].value)?;
        match v {
            Value::Scalar(c) => builtin(func, &c, digits).map(Value::Scalar).at(span),
            Value::List(items) if func == "str" => Ok(Value::Scalar(Cell::Str(render_list(&items)))),
            other => type_err(format!("`{func}` of a {}", other.kind_name())).at(span),
        }
    }

    /// Applies a unary callable argument to one value.
    fn call_unary(&mut self, f: &Expr, x: Value) -> Result<Value, DslError> {
        match &f.kind {
            ExprKind::Lambda { param, body } => {
                self.env.push((param.clone(), x));
                let out = self.eval(body);
                self.env.pop();
                out
            }
            ExprKind::Name(n) if n == "len" => length(&x).map(|n| Value::Scalar(Cell::Int(n as i64))).at(f.span),
            ExprKind::Name(n) => match x {
                Value::Scalar(c) => builtin(n, &c, None).map(Value::Scalar).at(f.span),
                other => type_err(format!("`{n}` of a {}", other.kind_name())).at(f.span),
            },
            _ => type_err("apply() needs a lambda or a builtin name").at(f.span),
        }
    }

    fn apply_scalar(&mut self, f: &Expr, x: Value) -> Result<Cell, DslError> {
        match self.call_unary(f, x)? {
            Value::Scalar(c) => Ok(c),
            other => type_err(format!("apply() function returned a {}", other.kind_name())).at(f.span),
        }
    }

    fn scalar_arg(&mut self, e: &Expr) -> Result<Cell, DslError> {
        match self.eval(e)? {
            Value::Scalar(c) => Ok(c),
            other => type_err(format!("expected a scalar argument, got a {}", other.kind_name())).at(e.span),
        }
    }

    fn int_arg(&mut self, args: &[Arg], pos: usize, name: &str, default: i64) -> Result<i64, DslError> {
        match arg(args, pos, name) {
            None => Ok(default),
            Some(e) => match self.scalar_arg(e)? {
                Cell::Int(v) => Ok(v),
                other => type_err(format!("`{name}` must be an integer, got `{}`", other.render())).at(e.span),
            },
        }
    }

    fn names_arg(&mut self, e: &Expr) -> Result<Vec<String>, DslError> {
        match self.eval(e)? {
            Value::Scalar(Cell::Str(s)) => Ok(vec![s]),
            Value::List(items) if !items.is_empty() => items
                .into_iter()
                .map(|c| match c {
                    Cell::Str(s) => Ok(s),
                    other => type_err(format!("column names must be text, got `{}`", other.render())).at(e.span),
                })
                .collect(),
            _ => type_err("expected a column name or a list of column names").at(e.span),
        }
    }

    fn bools_arg(&mut self, e: &Expr) -> Result<Vec<bool>, DslError> {
        match self.eval(e)? {
            Value::Scalar(c) => Ok(vec![truthy(&c).at(e.span)?]),
            Value::List(items) => items.iter().map(|c| truthy(c).at(e.span)).collect(),
            other => type_err(format!("expected a boolean, got a {}", other.kind_name())).at(e.span),
        }
    }

    fn method(&mut self, b: Value, name: &str, args: &[Arg], span: Span) -> Result<Value, DslError> {
        self.tick(p_len(&b), span)?;
        match b {
            Value::Frame(f) => self.frame_method(f, name, args, span),
            Value::Series(s) => self.series_method(s, name, args, span),
            Value::Mask(m) => match name {
                "sum" | "mean" | "any" | "all" | "count" | "size" => {
                    check_args(args, 0, &[], name).at(span)?;
                    let n = m.values.iter().filter(|b| **b).count();
                    let c = match name {
                        "sum" => Cell::Int(n as i64),
                        "mean" if m.values.is_empty() => return type_err("mean of no values").at(span),
                        "mean" => Cell::Float(n as f64 / m.values.len() as f64),
                        "any" => bool_cell(n > 0),
                        "all" => bool_cell(n == m.values.len()),
                        _ => Cell::Int(m.values.len() as i64),
                    };
                    Ok(Value::Scalar(c))
                }
                _ => self.series_method(mask_as_series(m), name, args, span),
            },
            Value::ListSeries(s) => self.list_series_method(s, name, args, span),
            Value::Grouped(g) => self.grouped_method(g, name, args, span),
            Value::Scalar(c) => self.scalar_method(c, name, args, span),
            other => unknown_method(name, &other).at(span),
        }
    }

    fn frame_method(&mut self, f: Frame, name: &str, args: &[Arg], span: Span) -> Result<Value, DslError> {
        match name {
            "groupby" => {
                check_args(args, 1, &["by"], name).at(span)?;
                let by = arg(args, 0, "by").ok_or(()).or_else(|_| type_err("groupby needs `by`").at(span))?;
                let keys = self.names_arg(by)?;
                groupby(f, keys).at(by.span)
            }
            "sort_values" => {
                check_args(args, 2, &["by", "ascending"], name).at(span)?;
                let by = arg(args, 0, "by").ok_or(()).or_else(|_| type_err("sort_values needs `by`").at(span))?;
                let keys = self.names_arg(by)?;
                let asc = match arg(args, 1, "ascending") {
                    Some(e) => self.bools_arg(e)?,
                    None => vec![true],
                };
                let asc = broadcast_flags(asc, keys.len()).at(span)?;
                let mut cols = Vec::with_capacity(keys.len());
                for k in &keys {
                    let p = f
                        .column_position(k)
                        .ok_or((ErrorKind::UnknownColumn, format!("no column `{k}`")))
                        .at(by.span)?;
                    cols.push(f.columns[p].as_slice());
                }
                let order = sort_order(&cols, &asc, f.len());
                Ok(Value::Frame(f.take(&order)))
            }
            "head" | "tail" => {
                check_args(args, 1, &["n"], name).at(span)?;
                let n = self.int_arg(args, 0, "n", 5)?;
                Ok(Value::Frame(f.take(&head_tail(f.len(), n, name == "head"))))
            }
            "count" | "nunique" => {
                check_args(args, 0, &[], name).at(span)?;
                let r = Reducer::from_name(name).expect("reducer name");
                let values = f.columns.iter().map(|c| reduce(c, r)).collect::<Result<Vec<_>, _>>().at(span)?;
                Ok(Value::Series(Series {
                    name: None,
                    values,
                    index: f.names.iter().map(|n| Cell::Str(n.clone())).collect(),
                }))
            }
            _ => unknown_method(name, &Value::Frame(f)).at(span),
        }
    }

    fn series_method(&mut self, s: Series, name: &str, args: &[Arg], span: Span) -> Result<Value, DslError> {
        if let Some(r) = Reducer::from_name(name) {
            check_args(args, 0, &[], name).at(span)?;
            return reduce(&s.values, r).map(Value::Scalar).at(span);
        }
        if let Some(m) = name.strip_prefix("str.") {
            return self.str_accessor(s, m, args, span);
        }
        match name {
            "idxmax" | "idxmin" => {
                check_args(args, 0, &[], name).at(span)?;
                idx_extreme(&s.values, &s.index, name == "idxmax").map(Value::Scalar).at(span)
            }
            "value_counts" => {
                check_args(args, 0, &[], name).at(span)?;
                Ok(Value::Series(value_counts(&s)))
            }
            "sort_values" => {
                check_args(args, 1, &["ascending"], name).at(span)?;
                let asc = match arg(args, 0, "ascending") {
                    Some(e) => self.bools_arg(e)?,
                    None => vec![true],
                };
                let asc = broadcast_flags(asc, 1).at(span)?;
                let order = sort_order(&[&s.values], &asc, s.len());
                Ok(Value::Series(s.take(&order)))
            }
            "head" | "tail" => {
                check_args(args, 1, &["n"], name).at(span)?;
                let n = self.int_arg(args, 0, "n", 5)?;
                Ok(Value::Series(s.take(&head_tail(s.len(), n, name == "head"))))
            }
            "unique" => {
                check_args(args, 0, &[], name).at(span)?;
                let mut out: Vec<Cell> = Vec::new();
                for c in &s.values {
                    if !out.contains(c) {
                        out.push(c.clone());
                    }
                }
                Ok(Value::List(out))
            }
            "tolist" | "to_list" => {
                check_args(args, 0, &[], name).at(span)?;
                Ok(Value::List(s.values))
            }
            "astype" => {
                check_args(args, 1, &["dtype"], name).at(span)?;
                let e = arg(args, 0, "dtype").ok_or(()).or_else(|_| type_err("astype needs a type").at(span))?;
                let ty = name_arg(e)
                    .ok_or(())
                    .or_else(|_| type_err("astype needs int, float or str").at(e.span))?;
                let values = s.values.iter().map(|c| astype(c, ty)).collect::<Result<_, _>>().at(span)?;
                Ok(Value::Series(Series { values, ..s }))
            }
            "apply" => {
                check_args(args, 1, &[], name).at(span)?;
                let f = arg(args, 0, "func").ok_or(()).or_else(|_| type_err("apply needs a function").at(span))?;
                let mut values = Vec::with_capacity(s.len());
                for c in &s.values {
                    self.tick(1, span)?;
                    values.push(self.apply_scalar(f, Value::Scalar(c.clone()))?);
                }
                Ok(Value::Series(Series { values, ..s }))
            }
            _ => unknown_method(name, &Value::Series(s)).at(span),
        }
    }

    fn str_accessor(&mut self, s: Series, m: &str, args: &[Arg], span: Span) -> Result<Value, DslError> {
        if m == "split" {
            check_args(args, 1, &["pat"], "str.split").at(span)?;
            let sep = match arg(args, 0, "pat") {
                Some(e) => match self.scalar_arg(e)? {
                    Cell::Str(p) => Some(p),
                    Cell::Null => None,
                    other => return type_err(format!("separator must be text, got `{}`", other.render())).at(e.span),
                },
                None => None,
            };
            let values = s
                .values
                .iter()
                .map(|c| split_text(c, sep.as_deref()))
                .collect::<Result<_, _>>()
                .at(span)?;
            return Ok(Value::ListSeries(ListSeries {
                name: s.name,
                values,
                index: s.index,
            }));
        }
        check_args(args, 2, &["pat"], &format!("str.{m}")).at(span)?;
        let mut cargs = Vec::new();
        for a in args {
            cargs.push(self.scalar_arg(&a.value)?);
        }
        let values: Vec<Cell> = s.values.iter().map(|c| str_method(m, c, &cargs)).collect::<Result<_, _>>().at(span)?;
        if matches!(m, "contains" | "startswith" | "endswith") {
            return Ok(Value::Mask(Mask {
                values: values.iter().map(|c| matches!(c, Cell::Int(1))).collect(),
                index: s.index,
            }));
        }
        Ok(Value::Series(Series { values, ..s }))
    }

    fn list_series_method(&mut self, s: ListSeries, name: &str, args: &[Arg], span: Span) -> Result<Value, DslError> {
        match name {
            "apply" => {
                check_args(args, 1, &[], name).at(span)?;
                let f = arg(args, 0, "func").ok_or(()).or_else(|_| type_err("apply needs a function").at(span))?;
                let mut values = Vec::with_capacity(s.values.len());
                for v in &s.values {
                    self.tick(1, span)?;
                    values.push(self.apply_scalar(f, list_or_null(v))?);
                }
                Ok(Value::Series(Series {
                    name: s.name,
                    values,
                    index: s.index,
                }))
            }
            "str.get" => {
                check_args(args, 1, &[], name).at(span)?;
                let i = self.int_arg(args, 0, "i", 0)?;
                let values = s
                    .values
                    .iter()
                    .map(|v| match v {
                        Some(items) => positional(items.len(), i).map_or(Cell::Null, |k| items[k].clone()),
                        None => Cell::Null,
                    })
                    .collect();
                Ok(Value::Series(Series {
                    name: s.name,
                    values,
                    index: s.index,
                }))
            }
            "str.len" => Ok(Value::Series(Series {
                name: s.name,
                values: s
                    .values
                    .iter()
                    .map(|v| v.as_ref().map_or(Cell::Null, |l| Cell::Int(l.len() as i64)))
                    .collect(),
                index: s.index,
            })),
            "head" | "tail" => {
                check_args(args, 1, &["n"], name).at(span)?;
                let n = self.int_arg(args, 0, "n", 5)?;
                let rows = head_tail(s.values.len(), n, name == "head");
                Ok(Value::ListSeries(ListSeries {
                    name: s.name,
                    values: rows.iter().map(|&i| s.values[i].clone()).collect(),
                    index: rows.iter().map(|&i| s.index[i].clone()).collect(),
                }))
            }
            _ => unknown_method(name, &Value::ListSeries(s)).at(span),
        }
    }

    fn grouped_method(&mut self, g: Grouped, name: &str, args: &[Arg], span: Span) -> Result<Value, DslError> {
        let labels: Vec<Cell> = g.groups.iter().map(|(l, _)| l.clone()).collect();
        if name == "size" {
            check_args(args, 0, &[], name).at(span)?;
            return Ok(Value::Series(Series {
                name: None,
                values: g.groups.iter().map(|(_, rows)| Cell::Int(rows.len() as i64)).collect(),
                index: labels,
            }));
        }
        if let Some(r) = Reducer::from_name(name) {
            check_args(args, 0, &[], name).at(span)?;
            let plan: Vec<(String, Reducer)> = selected_columns(&g).into_iter().map(|c| (c, r)).collect();
            return aggregate(&g, &plan, matches!(g.selection, Selection::One(_))).at(span);
        }
        match name {
            "agg" | "aggregate" => {
                check_args(args, 1, &["func"], name).at(span)?;
                let spec = arg(args, 0, "func").ok_or(()).or_else(|_| type_err("agg needs a function").at(span))?;
                let plan = match &spec.kind {
                    ExprKind::DictLit(pairs) => {
                        let mut plan = Vec::with_capacity(pairs.len());
                        for (k, v) in pairs {
                            let col = match &k.kind {
                                ExprKind::Literal(Cell::Str(c)) => c.clone(),
                                _ => return type_err("agg keys must be column names").at(k.span),
                            };
                            if g.frame.column_position(&col).is_none() {
                                return fault(ErrorKind::UnknownColumn, format!("no column `{col}`")).at(k.span);
                            }
                            plan.push((col, reducer_arg(v)?));
                        }
                        plan
                    }
                    _ => {
                        let r = reducer_arg(spec)?;
                        selected_columns(&g).into_iter().map(|c| (c, r)).collect()
                    }
                };
                let single = matches!(g.selection, Selection::One(_)) && !matches!(spec.kind, ExprKind::DictLit(_));
                aggregate(&g, &plan, single).at(span)
            }
            "apply" => {
                check_args(args, 1, &[], name).at(span)?;
                let f = arg(args, 0, "func").ok_or(()).or_else(|_| type_err("apply needs a function").at(span))?;
                let Selection::One(col) = &g.selection else {
                    return type_err("groupby apply needs a single selected column").at(span);
                };
                let k = g.frame.column_position(col).expect("validated selection");
                let mut values = Vec::with_capacity(g.groups.len());
                for (_, rows) in &g.groups {
                    self.tick(rows.len(), span)?;
                    let part = Series {
                        name: Some(Cell::Str(col.clone())),
                        values: rows.iter().map(|&i| g.frame.columns[k][i].clone()).collect(),
                        index: rows.iter().map(|&i| g.frame.index[i].clone()).collect(),
                    };
                    values.push(self.apply_scalar(f, Value::Series(part))?);
                }
                Ok(Value::Series(Series {
                    name: Some(Cell::Str(col.clone())),
                    values,
                    index: labels,
                }))
            }
            _ => unknown_method(name, &Value::Grouped(g)).at(span),
        }
    }

    fn scalar_method(&mut self, c: Cell, name: &str, args: &[Arg], span: Span) -> Result<Value, DslError> {
        if name == "split" {
            check_args(args, 1, &["sep"], name).at(span)?;
            let sep = match arg(args, 0, "sep") {
                Some(e) => match self.scalar_arg(e)? {
                    Cell::Str(p) => Some(p),
                    Cell::Null => None,
                    other => return type_err(format!("separator must be text, got `{}`", other.render())).at(e.span),
                },
                None => None,
            };
            return match split_text(&c, sep.as_deref()).at(span)? {
                Some(items) => Ok(Value::List(items)),
                None => type_err("split of None").at(span),
            };
        }
        if !matches!(c, Cell::Str(_)) || !matches!(name, "strip" | "lstrip" | "rstrip" | "lower" | "upper" | "replace" | "startswith" | "endswith") {
            return unknown_method(name, &Value::Scalar(c)).at(span);
        }
        check_args(args, 2, &[], name).at(span)?;
        let mut cargs = Vec::new();
        for a in args {
            cargs.push(self.scalar_arg(&a.value)?);
        }
        str_method(name, &c, &cargs).map(Value::Scalar).at(span)
    }
}

fn reducer_arg(e: &Expr) -> Result<Reducer, DslError> {
    let n = name_arg(e).ok_or(()).or_else(|_| type_err("expected an aggregation name").at(e.span))?;
    let n = if n == "len" { "size" } else { n };
    Reducer::from_name(n)
        .ok_or(())
        .or_else(|_| fault(ErrorKind::UnknownMethod, format!("unknown aggregation `{n}`")).at(e.span))
}

fn selected_columns(g: &Grouped) -> Vec<String> {
    match &g.selection {
        Selection::All => g.frame.names.iter().filter(|n| !g.keys.contains(n)).cloned().collect(),
        Selection::One(c) => vec![c.clone()],
        Selection::Many(cs) => cs.clone(),
    }
}

fn aggregate(g: &Grouped, plan: &[(String, Reducer)], as_series: bool) -> Result<Value, Fault> {
    let labels: Vec<Cell> = g.groups.iter().map(|(l, _)| l.clone()).collect();
    let mut columns = Vec::with_capacity(plan.len());
    for (col, r) in plan {
        let k = g.frame.column_position(col).expect("validated column");
        let mut out = Vec::with_capacity(g.groups.len());
        for (_, rows) in &g.groups {
            let part: Vec<Cell> = rows.iter().map(|&i| g.frame.columns[k][i].clone()).collect();
            out.push(reduce(&part, *r)?);
        }
        columns.push(out);
    }
    if as_series {
        return Ok(Value::Series(Series {
            name: Some(Cell::Str(plan[0].0.clone())),
            values: columns.pop().expect("one column"),
            index: labels,
        }));
    }
    Ok(Value::Frame(Frame {
        names: plan.iter().map(|(c, _)| c.clone()).collect(),
        columns,
        index: labels,
    }))
}

fn groupby(f: Frame, keys: Vec<String>) -> Result<Value, Fault> {
    let mut positions = Vec::with_capacity(keys.len());
    for k in &keys {
        positions.push(f.column_position(k).ok_or((ErrorKind::UnknownColumn, format!("no column `{k}`")))?);
    }
    let mut groups: Vec<(Vec<Cell>, Vec<usize>)> = Vec::new();
    let mut slot: HashMap<Vec<Cell>, usize> = HashMap::new();
    for r in 0..f.len() {
        let key: Vec<Cell> = positions.iter().map(|&p| f.columns[p][r].clone()).collect();
        match slot.get(&key) {
            Some(&g) => groups[g].1.push(r),
            None => {
                slot.insert(key.clone(), groups.len());
                groups.push((key, vec![r]));
            }
        }
    }
    groups.sort_by(|(a, _), (b, _)| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    Ok(Value::Grouped(Grouped {
        frame: f,
        keys,
        groups: groups.into_iter().map(|(k, rows)| (group_label(&k), rows)).collect(),
        selection: Selection::All,
    }))
}

fn broadcast_flags(flags: Vec<bool>, n: usize) -> Result<Vec<bool>, Fault> {
    match flags.len() {
        1 => Ok(vec![flags[0]; n]),
        k if k == n => Ok(flags),
        k => type_err(format!("ascending has {k} entries for {n} sort keys")),
    }
}

fn head_tail(len: usize, n: i64, head: bool) -> Vec<usize> {
    let n = if n < 0 { (len as i64 + n).max(0) as usize } else { (n as usize).min(len) };
    if head {
        (0..n).collect()
    } else {
        (len - n..len).collect()
    }
}

fn p_len(v: &Value) -> usize {
    match v {
        Value::Frame(f) => f.len() * f.names.len().max(1),
        Value::Series(s) => s.len(),
        Value::ListSeries(s) => s.values.len(),
        Value::Mask(m) => m.values.len(),
        Value::Grouped(g) => g.frame.len(),
        Value::Scalar(_) => 1,
        Value::List(l) => l.len(),
    }
}

fn list_or_null(v: &Option<Vec<Cell>>) -> Value {
    match v {
        Some(items) => Value::List(items.clone()),
        None => Value::Scalar(Cell::Null),
    }
}

fn render_list(items: &[Cell]) -> String {
    super::value::render_value(&Value::List(items.to_vec()))
}

fn length(v: &Value) -> Result<usize, Fault> {
    Ok(match v {
        Value::Frame(f) => f.len(),
        Value::Series(s) => s.len(),
        Value::ListSeries(s) => s.values.len(),
        Value::Mask(m) => m.values.len(),
        Value::Grouped(g) => g.groups.len(),
        Value::List(l) => l.len(),
        Value::Scalar(Cell::Str(s)) => s.chars().count(),
        Value::Scalar(c) => return type_err(format!("`{}` has no length", c.render())),
    })
}

fn attr(b: Value, name: &str) -> Result<Value, Fault> {
    match (&b, name) {
        (Value::Frame(f), "shape") => Ok(Value::List(vec![Cell::Int(f.len() as i64), Cell::Int(f.names.len() as i64)])),
        (Value::Frame(f), "columns") => Ok(Value::List(f.names.iter().map(|n| Cell::Str(n.clone())).collect())),
        (Value::Frame(f), n) if f.column_position(n).is_some() => {
            let k = f.column_position(n).expect("checked");
            Ok(Value::Series(Series {
                name: Some(Cell::Str(n.into())),
                values: f.columns[k].clone(),
                index: f.index.clone(),
            }))
        }
        (Value::Series(s), "name") => Ok(Value::Scalar(s.name.clone().unwrap_or(Cell::Null))),
        (Value::Series(s), "shape") => Ok(Value::List(vec![Cell::Int(s.len() as i64)])),
        (Value::Series(s), "size") => Ok(Value::Scalar(Cell::Int(s.len() as i64))),
        (Value::Mask(m), "shape") => Ok(Value::List(vec![Cell::Int(m.values.len() as i64)])),
        (Value::Mask(m), "size") => Ok(Value::Scalar(Cell::Int(m.values.len() as i64))),
        (Value::Grouped(g), "ngroups") => Ok(Value::Scalar(Cell::Int(g.groups.len() as i64))),
        _ => unknown_method(name, &b),
    }
}

fn iloc(b: Value, i: i64) -> Result<Value, Fault> {
    match b {
        Value::Frame(f) => {
            let r = positional(f.len(), i)?;
            Ok(Value::Series(Series {
                name: Some(f.index[r].clone()),
                values: f.columns.iter().map(|c| c[r].clone()).collect(),
                index: f.names.iter().map(|n| Cell::Str(n.clone())).collect(),
            }))
        }
        Value::Series(s) => Ok(Value::Scalar(s.values[positional(s.len(), i)?].clone())),
        Value::ListSeries(s) => Ok(list_or_null(&s.values[positional(s.values.len(), i)?])),
        Value::Mask(m) => Ok(Value::Scalar(bool_cell(m.values[positional(m.values.len(), i)?]))),
        Value::List(l) => Ok(Value::Scalar(l[positional(l.len(), i)?].clone())),
        other => unknown_method("iloc", &other),
    }
}

fn int_index(b: Value, i: i64) -> Result<Value, Fault> {
    match b {
        Value::List(l) => Ok(Value::Scalar(l[positional(l.len(), i)?].clone())),
        Value::Series(s) => Ok(Value::Scalar(s.values[int_subscript(&s.index, i)?].clone())),
        Value::ListSeries(s) => Ok(list_or_null(&s.values[int_subscript(&s.index, i)?])),
        Value::Mask(m) => Ok(Value::Scalar(bool_cell(m.values[int_subscript(&m.index, i)?]))),
        Value::Frame(_) => fault(ErrorKind::UnknownColumn, format!("no column `{i}`")),
        Value::Scalar(Cell::Str(s)) => {
            let chars: Vec<char> = s.chars().collect();
            Ok(Value::Scalar(Cell::Str(chars[positional(chars.len(), i)?].to_string())))
        }
        other => type_err(format!("a {} is not subscriptable", other.kind_name())),
    }
}

/// Keep flags for `target` rows, matched by label when the mask was built
/// over a different index.
fn align_mask(target: &[Cell], m: &Mask) -> Result<Vec<bool>, Fault> {
    if m.index == target {
        return Ok(m.values.clone());
    }
    let by_label: HashMap<&Cell, bool> = m.index.iter().zip(&m.values).map(|(l, b)| (l, *b)).collect();
    target
        .iter()
        .map(|l| {
            by_label
                .get(l)
                .copied()
                .ok_or((ErrorKind::IndexError, "boolean filter is not aligned with its target".to_string()))
        })
        .collect()
}

fn filter(b: Value, p: Value) -> Result<Value, Fault> {
    let m = match p {
        Value::Mask(m) => m,
        other => return type_err(format!("row filter must be a boolean series, got a {}", other.kind_name())),
    };
    let keep = |index: &[Cell]| -> Result<Vec<usize>, Fault> {
        Ok(align_mask(index, &m)?.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i).collect())
    };
    match b {
        Value::Frame(f) => {
            let rows = keep(&f.index)?;
            Ok(Value::Frame(f.take(&rows)))
        }
        Value::Series(s) => {
            let rows = keep(&s.index)?;
            Ok(Value::Series(s.take(&rows)))
        }
        other => type_err(format!("cannot filter a {}", other.kind_name())),
    }
}

enum Operand {
    Cells(Vec<Cell>, Vec<Cell>, Option<Cell>),
    One(Cell),
}

fn operand(v: Value) -> Result<Operand, Fault> {
    match v {
        Value::Series(s) => Ok(Operand::Cells(s.values, s.index, s.name)),
        Value::Mask(m) => {
            let s = mask_as_series(m);
            Ok(Operand::Cells(s.values, s.index, None))
        }
        Value::Scalar(c) => Ok(Operand::One(c)),
        other => type_err(format!("a {} cannot be used in an expression", other.kind_name())),
    }
}

fn binop(op: BinOp, l: Value, r: Value) -> Result<Value, Fault> {
    if matches!(op, BinOp::And | BinOp::Or) {
        return logical(op, l, r);
    }
    let (a, b) = (operand(l)?, operand(r)?);
    let (index, name, pairs): (Vec<Cell>, Option<Cell>, Vec<(Cell, Cell)>) = match (a, b) {
        (Operand::One(x), Operand::One(y)) => {
            return if op.is_comparison() {
                compare(op, &x, &y).map(|b| Value::Scalar(bool_cell(b)))
            } else {
                arith(op, &x, &y).map(Value::Scalar)
            };
        }
        (Operand::Cells(xs, idx, name), Operand::One(y)) => {
            let pairs = xs.into_iter().map(|x| (x, y.clone())).collect();
            (idx, name, pairs)
        }
        (Operand::One(x), Operand::Cells(ys, idx, name)) => {
            let pairs = ys.into_iter().map(|y| (x.clone(), y)).collect();
            (idx, name, pairs)
        }
        (Operand::Cells(xs, ix, name), Operand::Cells(ys, iy, _)) => {
            if ix != iy {
                return fault(ErrorKind::IndexError, "series are not aligned");
            }
            (ix, name, xs.into_iter().zip(ys).collect())
        }
    };
    if op.is_comparison() {
        let values = pairs.iter().map(|(x, y)| compare(op, x, y)).collect::<Result<_, _>>()?;
        Ok(Value::Mask(Mask { values, index }))
    } else {
        let values = pairs.iter().map(|(x, y)| arith(op, x, y)).collect::<Result<_, _>>()?;
        Ok(Value::Series(Series { name, values, index }))
    }
}

fn logical(op: BinOp, l: Value, r: Value) -> Result<Value, Fault> {
    let combine = |a: bool, b: bool| if op == BinOp::And { a && b } else { a || b };
    match (l, r) {
        (Value::Mask(a), Value::Mask(b)) => {
            let bv = align_mask(&a.index, &b)?;
            Ok(Value::Mask(Mask {
                values: a.values.iter().zip(bv).map(|(x, y)| combine(*x, y)).collect(),
                index: a.index,
            }))
        }
        (Value::Scalar(a), Value::Scalar(b)) => Ok(Value::Scalar(bool_cell(combine(truthy(&a)?, truthy(&b)?)))),
        (Value::Mask(m), Value::Scalar(c)) | (Value::Scalar(c), Value::Mask(m)) => {
            let b = truthy(&c)?;
            Ok(Value::Mask(Mask {
                values: m.values.iter().map(|x| combine(*x, b)).collect(),
                index: m.index,
            }))
        }
        (a, b) => type_err(format!("`&`/`|` between a {} and a {}", a.kind_name(), b.kind_name())),
    }
}

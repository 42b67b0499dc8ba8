//! Random query plans over random small tables, plus a naive
//! row-at-a-time interpreter for them that shares no code with the
//! evaluator beyond the cell type.

use std::cmp::Ordering;

use insightgen_core::dsl::{run, ErrorKind, EvalLimits, Value};
use insightgen_core::{Cell, Column, ColumnType, Table};
use rand::Rng;

const WORDS: &[&str] = &["a", "b", "ab", "ba", "3", "-1"];

#[derive(Debug, Clone, PartialEq)]
pub enum Out {
    Scalar(Cell),
    List(Vec<Cell>),
    Rows { index: Vec<Cell>, cols: Vec<Vec<Cell>> },
}

#[derive(Debug, Clone)]
pub enum Pred {
    Cmp { col: String, op: &'static str, lit: Cell },
    ColCmp { a: String, op: &'static str, b: String },
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
    Not(Box<Pred>),
}

#[derive(Debug, Clone)]
pub enum Term {
    Len,
    ShapeRows,
    Reduce { col: String, r: &'static str },
    Idx { col: String, max: bool },
    ValueCountsIdxmax { col: String },
    GroupSize { keys: Vec<String> },
    GroupAgg { key: String, col: String, r: &'static str },
    SortHead { col: String, asc: bool, n: i64 },
    Iloc { i: i64 },
    Unique { col: String },
    Contains { col: String, pat: String },
    MultiHead { cols: Vec<String>, n: i64 },
    AstypeFloatSum { col: String },
    ColumnHead { col: String, n: i64 },
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub filter: Option<Pred>,
    pub term: Term,
}

fn lit_src(c: &Cell) -> String {
    match c {
        Cell::Str(s) => format!("'{s}'"),
        other => other.render(),
    }
}

fn pred_src(p: &Pred) -> String {
    match p {
        Pred::Cmp { col, op, lit } => format!("(table['{col}'] {op} {})", lit_src(lit)),
        Pred::ColCmp { a, op, b } => format!("(table['{a}'] {op} table['{b}'])"),
        Pred::And(x, y) => format!("({} & {})", pred_src(x), pred_src(y)),
        Pred::Or(x, y) => format!("({} | {})", pred_src(x), pred_src(y)),
        Pred::Not(x) => format!("~{}", pred_src(x)),
    }
}

impl Plan {
    pub fn source(&self) -> String {
        let f = match &self.filter {
            Some(p) => format!("table[{}]", pred_src(p)),
            None => "table".to_string(),
        };
        match &self.term {
            Term::Len => format!("len({f})"),
            Term::ShapeRows => format!("{f}.shape[0]"),
            Term::Reduce { col, r } => format!("{f}['{col}'].{r}()"),
            Term::Idx { col, max } => format!("{f}['{col}'].{}()", if *max { "idxmax" } else { "idxmin" }),
            Term::ValueCountsIdxmax { col } => format!("{f}['{col}'].value_counts().idxmax()"),
            Term::GroupSize { keys } if keys.len() == 1 => format!("{f}.groupby('{}').size()", keys[0]),
            Term::GroupSize { keys } => {
                let ks: Vec<String> = keys.iter().map(|k| format!("'{k}'")).collect();
                format!("{f}.groupby([{}]).size()", ks.join(", "))
            }
            Term::GroupAgg { key, col, r } => format!("{f}.groupby('{key}').agg({{'{col}': '{r}'}})"),
            Term::SortHead { col, asc, n } => {
                let a = if *asc { "True" } else { "False" };
                format!("{f}.sort_values(by='{col}', ascending={a}).head({n})")
            }
            Term::Iloc { i } => format!("{f}.iloc[{i}]"),
            Term::Unique { col } => format!("{f}['{col}'].unique()"),
            Term::Contains { col, pat } => format!("len({f}[{f}['{col}'].str.contains('{pat}')])"),
            Term::MultiHead { cols, n } => {
                let cs: Vec<String> = cols.iter().map(|c| format!("'{c}'")).collect();
                format!("{f}[[{}]].head({n})", cs.join(", "))
            }
            Term::AstypeFloatSum { col } => format!("{f}['{col}'].astype(float).sum()"),
            Term::ColumnHead { col, n } => format!("{f}['{col}'].head({n})"),
        }
    }
}

pub fn random_table<R: Rng>(rng: &mut R) -> Table {
    let ncols = rng.random_range(1..=8);
    let nrows = rng.random_range(0..=30);
    let columns = (0..ncols)
        .map(|k| {
            let ty = match rng.random_range(0..3) {
                0 => ColumnType::Integer,
                1 => ColumnType::Float,
                _ => ColumnType::String,
            };
            let null_rate = [0.0, 0.1, 0.4][rng.random_range(0..3)];
            let cells = (0..nrows)
                .map(|_| {
                    if rng.random_bool(null_rate) {
                        return Cell::Null;
                    }
                    match ty {
                        ColumnType::Integer => Cell::Int(rng.random_range(-3..6)),
                        ColumnType::Float => Cell::Float(rng.random_range(1..12) as f64 / 2.0),
                        _ => Cell::Str(WORDS[rng.random_range(0..WORDS.len())].to_string()),
                    }
                })
                .collect();
            Column::new(format!("c{k}"), ty, cells)
        })
        .collect();
    Table::new(columns).expect("rectangular")
}

fn random_lit<R: Rng>(rng: &mut R, ty: ColumnType) -> Cell {
    let ty = if rng.random_bool(0.15) {
        [ColumnType::Integer, ColumnType::Float, ColumnType::String][rng.random_range(0..3)]
    } else {
        ty
    };
    match ty {
        ColumnType::Integer => Cell::Int(rng.random_range(-3..6)),
        ColumnType::Float => Cell::Float(rng.random_range(1..12) as f64 / 2.0),
        _ => Cell::Str(WORDS[rng.random_range(0..WORDS.len())].to_string()),
    }
}

const OPS: &[&str] = &["==", "!=", "<", "<=", ">", ">="];

fn random_pred<R: Rng>(rng: &mut R, t: &Table, depth: u32) -> Pred {
    let pick = |rng: &mut R| &t.columns()[rng.random_range(0..t.column_count())];
    let roll = if depth == 0 { rng.random_range(0..4) } else { rng.random_range(0..7) };
    match roll {
        0..=2 => {
            let c = pick(rng);
            Pred::Cmp {
                col: c.name.clone(),
                op: OPS[rng.random_range(0..OPS.len())],
                lit: random_lit(rng, c.declared_type),
            }
        }
        3 => {
            let a = pick(rng);
            let same: Vec<&Column> = t
                .columns()
                .iter()
                .filter(|c| c.declared_type.is_numeric() == a.declared_type.is_numeric())
                .collect();
            let b = if rng.random_bool(0.8) { same[rng.random_range(0..same.len())] } else { pick(rng) };
            Pred::ColCmp {
                a: a.name.clone(),
                op: OPS[rng.random_range(0..OPS.len())],
                b: b.name.clone(),
            }
        }
        4 => Pred::And(Box::new(random_pred(rng, t, depth - 1)), Box::new(random_pred(rng, t, depth - 1))),
        5 => Pred::Or(Box::new(random_pred(rng, t, depth - 1)), Box::new(random_pred(rng, t, depth - 1))),
        _ => Pred::Not(Box::new(random_pred(rng, t, depth - 1))),
    }
}

const REDUCERS: &[&str] = &["sum", "mean", "max", "min", "count", "nunique", "size"];

pub fn random_plan<R: Rng>(rng: &mut R, t: &Table) -> Plan {
    let filter = rng.random_bool(0.6).then(|| random_pred(rng, t, 2));
    let col = |rng: &mut R| t.columns()[rng.random_range(0..t.column_count())].name.clone();
    let term = match rng.random_range(0..14) {
        0 => Term::Len,
        1 => Term::ShapeRows,
        2 => Term::Reduce {
            col: col(rng),
            r: REDUCERS[rng.random_range(0..REDUCERS.len())],
        },
        3 => Term::Idx {
            col: col(rng),
            max: rng.random_bool(0.5),
        },
        4 => Term::ValueCountsIdxmax { col: col(rng) },
        5 => {
            let n = rng.random_range(1..=2.min(t.column_count()));
            let mut keys = vec![col(rng)];
            while keys.len() < n {
                let k = col(rng);
                if !keys.contains(&k) {
                    keys.push(k);
                }
            }
            Term::GroupSize { keys }
        }
        6 => Term::GroupAgg {
            key: col(rng),
            col: col(rng),
            r: REDUCERS[rng.random_range(0..REDUCERS.len())],
        },
        7 => Term::SortHead {
            col: col(rng),
            asc: rng.random_bool(0.5),
            n: rng.random_range(0..7),
        },
        8 => Term::Iloc {
            i: rng.random_range(-4..32),
        },
        9 => Term::Unique { col: col(rng) },
        10 => Term::Contains {
            col: col(rng),
            pat: ["a", "b", "3", ""][rng.random_range(0..4)].to_string(),
        },
        11 => {
            let mut cols = vec![col(rng)];
            let extra = col(rng);
            if !cols.contains(&extra) {
                cols.push(extra);
            }
            Term::MultiHead {
                cols,
                n: rng.random_range(0..7),
            }
        }
        12 => Term::AstypeFloatSum { col: col(rng) },
        _ => Term::ColumnHead {
            col: col(rng),
            n: rng.random_range(0..7),
        },
    };
    Plan { filter, term }
}

/// Runs the plan through the real evaluator and flattens the value.
pub fn actual(plan: &Plan, t: &Table) -> Result<Out, ErrorKind> {
    match run(&plan.source(), t, &EvalLimits::default()) {
        Ok(Value::Scalar(c)) => Ok(Out::Scalar(c)),
        Ok(Value::List(l)) => Ok(Out::List(l)),
        Ok(Value::Series(s)) => Ok(Out::Rows {
            index: s.index,
            cols: vec![s.values],
        }),
        Ok(Value::Frame(f)) => Ok(Out::Rows {
            index: f.index,
            cols: f.columns,
        }),
        Ok(other) => panic!("unexpected {} for {}", other.kind_name(), plan.source()),
        Err(e) => Err(e.kind),
    }
}

// ---- reference interpreter ----

type R<T> = Result<T, ErrorKind>;

fn num(c: &Cell) -> Option<f64> {
    match c {
        Cell::Int(v) => Some(*v as f64),
        Cell::Float(v) => Some(*v),
        _ => None,
    }
}

fn cell_at<'a>(t: &'a Table, col: &str, row: usize) -> &'a Cell {
    &t.column(col).expect("generated column").cells[row]
}

fn ref_compare(op: &str, a: &Cell, b: &Cell) -> R<bool> {
    if matches!(a, Cell::Null) || matches!(b, Cell::Null) {
        return Ok(false);
    }
    let ord = match (a, b) {
        (Cell::Str(x), Cell::Str(y)) => Some(x.as_str().cmp(y.as_str())),
        (Cell::Str(s), n) => s.trim().parse::<f64>().ok().and_then(|x| x.partial_cmp(&num(n).unwrap())),
        (n, Cell::Str(s)) => s.trim().parse::<f64>().ok().and_then(|y| num(n).unwrap().partial_cmp(&y)),
        (x, y) => num(x).unwrap().partial_cmp(&num(y).unwrap()),
    };
    match ord {
        Some(o) => Ok(match op {
            "==" => o.is_eq(),
            "!=" => o.is_ne(),
            "<" => o.is_lt(),
            "<=" => o.is_le(),
            ">" => o.is_gt(),
            _ => o.is_ge(),
        }),
        None if op == "==" => Ok(false),
        None if op == "!=" => Ok(true),
        None => Err(ErrorKind::TypeError),
    }
}

pub fn eval_pred(p: &Pred, t: &Table, row: usize) -> R<bool> {
    match p {
        Pred::Cmp { col, op, lit } => ref_compare(op, cell_at(t, col, row), lit),
        Pred::ColCmp { a, op, b } => ref_compare(op, cell_at(t, a, row), cell_at(t, b, row)),
        Pred::And(x, y) => {
            let (l, r) = (eval_pred(x, t, row), eval_pred(y, t, row));
            Ok(l? & r?)
        }
        Pred::Or(x, y) => {
            let (l, r) = (eval_pred(x, t, row), eval_pred(y, t, row));
            Ok(l? | r?)
        }
        Pred::Not(x) => Ok(!eval_pred(x, t, row)?),
    }
}

/// Same ordering as cells within one column: numbers by value, text by
/// bytes; nulls after everything.
fn ref_order(a: &Cell, b: &Cell) -> Ordering {
    match (a, b) {
        (Cell::Null, Cell::Null) => Ordering::Equal,
        (Cell::Null, _) => Ordering::Greater,
        (_, Cell::Null) => Ordering::Less,
        (Cell::Str(x), Cell::Str(y)) => x.cmp(y),
        (x, y) => num(x).unwrap().partial_cmp(&num(y).unwrap()).unwrap(),
    }
}

fn ref_reduce(vals: &[&Cell], r: &str) -> R<Cell> {
    let present: Vec<&Cell> = vals.iter().copied().filter(|c| !matches!(c, Cell::Null)).collect();
    let has_text = present.iter().any(|c| matches!(c, Cell::Str(_)));
    match r {
        "sum" => {
            if has_text {
                return Err(ErrorKind::TypeError);
            }
            if present.iter().any(|c| matches!(c, Cell::Float(_))) {
                let mut s = 0.0;
                for c in &present {
                    s += num(c).unwrap();
                }
                Ok(Cell::Float(s))
            } else {
                Ok(Cell::Int(present.iter().map(|c| num(c).unwrap() as i64).sum()))
            }
        }
        "mean" => {
            if has_text || present.is_empty() {
                return Err(ErrorKind::TypeError);
            }
            let mut s = 0.0;
            for c in &present {
                s += num(c).unwrap();
            }
            Ok(Cell::Float(s / present.len() as f64))
        }
        "max" | "min" => {
            let mut best: Option<&Cell> = None;
            for c in &present {
                let better = match best {
                    None => true,
                    Some(b) => {
                        let o = ref_order(c, b);
                        if r == "max" {
                            o.is_gt()
                        } else {
                            o.is_lt()
                        }
                    }
                };
                if better {
                    best = Some(c);
                }
            }
            Ok(best.cloned().unwrap_or(Cell::Null))
        }
        "count" => Ok(Cell::Int(present.len() as i64)),
        "nunique" => {
            let mut seen: Vec<&Cell> = Vec::new();
            for c in &present {
                if !seen.contains(c) {
                    seen.push(c);
                }
            }
            Ok(Cell::Int(seen.len() as i64))
        }
        _ => Ok(Cell::Int(vals.len() as i64)),
    }
}

fn stable_sort(rows: &mut [usize], key: impl Fn(usize, usize) -> Ordering) {
    // insertion sort: stable by construction
    for i in 1..rows.len() {
        let mut j = i;
        while j > 0 && key(rows[j - 1], rows[j]).is_gt() {
            rows.swap(j - 1, j);
            j -= 1;
        }
    }
}

fn label(row: usize) -> Cell {
    Cell::Int(row as i64)
}

fn rows_frame(t: &Table, rows: &[usize], cols: &[String]) -> Out {
    Out::Rows {
        index: rows.iter().map(|&r| label(r)).collect(),
        cols: cols
            .iter()
            .map(|c| rows.iter().map(|&r| cell_at(t, c, r).clone()).collect())
            .collect(),
    }
}

fn groups(t: &Table, rows: &[usize], keys: &[String]) -> Vec<(Vec<Cell>, Vec<usize>)> {
    let mut out: Vec<(Vec<Cell>, Vec<usize>)> = Vec::new();
    for &r in rows {
        let key: Vec<Cell> = keys.iter().map(|k| cell_at(t, k, r).clone()).collect();
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(r),
            None => out.push((key, vec![r])),
        }
    }
    out.sort_by(|(a, _), (b, _)| {
        for (x, y) in a.iter().zip(b) {
            let o = ref_order(x, y);
            if o.is_ne() {
                return o;
            }
        }
        Ordering::Equal
    });
    out
}

fn group_name(key: &[Cell]) -> Cell {
    if key.len() == 1 {
        return key[0].clone();
    }
    let parts: Vec<String> = key
        .iter()
        .map(|c| match c {
            Cell::Null => "None".to_string(),
            other => other.to_string(),
        })
        .collect();
    Cell::Str(format!("({})", parts.join(", ")))
}

fn take_n(len: usize, n: i64) -> usize {
    (n.max(0) as usize).min(len)
}

pub fn reference(plan: &Plan, t: &Table) -> Result<Out, ErrorKind> {
    let mut rows = Vec::new();
    let mut failure = None;
    for r in 0..t.row_count() {
        match &plan.filter {
            None => rows.push(r),
            Some(p) => match eval_pred(p, t, r) {
                Ok(true) => rows.push(r),
                Ok(false) => {}
                Err(e) => failure = failure.or(Some(e)),
            },
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let names: Vec<String> = t.column_names().iter().map(|s| s.to_string()).collect();
    let col_vals = |c: &str| -> Vec<&Cell> { rows.iter().map(|&r| cell_at(t, c, r)).collect() };
    match &plan.term {
        Term::Len | Term::ShapeRows => Ok(Out::Scalar(Cell::Int(rows.len() as i64))),
        Term::Reduce { col, r } => ref_reduce(&col_vals(col), r).map(Out::Scalar),
        Term::Idx { col, max } => {
            let mut best: Option<usize> = None;
            for &r in &rows {
                let c = cell_at(t, col, r);
                if matches!(c, Cell::Null) {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some(b) => {
                        let o = ref_order(c, cell_at(t, col, b));
                        if *max {
                            o.is_gt()
                        } else {
                            o.is_lt()
                        }
                    }
                };
                if better {
                    best = Some(r);
                }
            }
            best.map(|r| Out::Scalar(label(r))).ok_or(ErrorKind::IndexError)
        }
        Term::ValueCountsIdxmax { col } => {
            let mut counts: Vec<(&Cell, usize)> = Vec::new();
            for c in col_vals(col) {
                if matches!(c, Cell::Null) {
                    continue;
                }
                match counts.iter_mut().find(|(k, _)| *k == c) {
                    Some((_, n)) => *n += 1,
                    None => counts.push((c, 1)),
                }
            }
            let mut best: Option<(&Cell, usize)> = None;
            for (c, n) in counts {
                if best.is_none_or(|(_, m)| n > m) {
                    best = Some((c, n));
                }
            }
            best.map(|(c, _)| Out::Scalar(c.clone())).ok_or(ErrorKind::IndexError)
        }
        Term::GroupSize { keys } => {
            let gs = groups(t, &rows, keys);
            Ok(Out::Rows {
                index: gs.iter().map(|(k, _)| group_name(k)).collect(),
                cols: vec![gs.iter().map(|(_, m)| Cell::Int(m.len() as i64)).collect()],
            })
        }
        Term::GroupAgg { key, col, r } => {
            let gs = groups(t, &rows, std::slice::from_ref(key));
            let mut vals = Vec::new();
            for (_, members) in &gs {
                let part: Vec<&Cell> = members.iter().map(|&m| cell_at(t, col, m)).collect();
                vals.push(ref_reduce(&part, r)?);
            }
            Ok(Out::Rows {
                index: gs.iter().map(|(k, _)| group_name(k)).collect(),
                cols: vec![vals],
            })
        }
        Term::SortHead { col, asc, n } => {
            let mut sorted = rows.clone();
            stable_sort(&mut sorted, |a, b| {
                let (x, y) = (cell_at(t, col, a), cell_at(t, col, b));
                match (x, y) {
                    (Cell::Null, _) | (_, Cell::Null) => ref_order(x, y),
                    _ if *asc => ref_order(x, y),
                    _ => ref_order(y, x),
                }
            });
            sorted.truncate(take_n(sorted.len(), *n));
            Ok(rows_frame(t, &sorted, &names))
        }
        Term::Iloc { i } => {
            let len = rows.len() as i64;
            let k = if *i < 0 { len + i } else { *i };
            if k < 0 || k >= len {
                return Err(ErrorKind::IndexError);
            }
            let r = rows[k as usize];
            Ok(Out::Rows {
                index: names.iter().map(|n| Cell::Str(n.clone())).collect(),
                cols: vec![names.iter().map(|n| cell_at(t, n, r).clone()).collect()],
            })
        }
        Term::Unique { col } => {
            let mut seen: Vec<Cell> = Vec::new();
            for c in col_vals(col) {
                if !seen.contains(c) {
                    seen.push(c.clone());
                }
            }
            Ok(Out::List(seen))
        }
        Term::Contains { col, pat } => {
            let mut n = 0;
            for c in col_vals(col) {
                match c {
                    Cell::Null => {}
                    Cell::Str(s) => n += s.contains(pat.as_str()) as i64,
                    _ => return Err(ErrorKind::TypeError),
                }
            }
            Ok(Out::Scalar(Cell::Int(n)))
        }
        Term::MultiHead { cols, n } => {
            let kept = &rows[..take_n(rows.len(), *n)];
            Ok(rows_frame(t, kept, cols))
        }
        Term::AstypeFloatSum { col } => {
            let mut floats = Vec::new();
            for c in col_vals(col) {
                match c {
                    Cell::Null => {}
                    Cell::Str(s) => floats.push(s.trim().parse::<f64>().map_err(|_| ErrorKind::TypeError)?),
                    other => floats.push(num(other).unwrap()),
                }
            }
            if floats.is_empty() {
                return Ok(Out::Scalar(Cell::Int(0)));
            }
            let mut s = 0.0;
            for f in floats {
                s += f;
            }
            Ok(Out::Scalar(Cell::Float(s)))
        }
        Term::ColumnHead { col, n } => {
            let kept = &rows[..take_n(rows.len(), *n)];
            Ok(Out::Rows {
                index: kept.iter().map(|&r| label(r)).collect(),
                cols: vec![kept.iter().map(|&r| cell_at(t, col, r).clone()).collect()],
            })
        }
    }
}

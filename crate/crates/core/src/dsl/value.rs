use crate::table::Cell;

/// Row-labelled frame. Labels start as original row positions and become
/// group keys after aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub names: Vec<String>,
    pub columns: Vec<Vec<Cell>>,
    pub index: Vec<Cell>,
}

impl Frame {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn column_position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn take(&self, rows: &[usize]) -> Frame {
        Frame {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i].clone()).collect())
                .collect(),
            index: rows.iter().map(|&i| self.index[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: Option<Cell>,
    pub values: Vec<Cell>,
    pub index: Vec<Cell>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn take(&self, rows: &[usize]) -> Series {
        Series {
            name: self.name.clone(),
            values: rows.iter().map(|&i| self.values[i].clone()).collect(),
            index: rows.iter().map(|&i| self.index[i].clone()).collect(),
        }
    }
}

/// Series whose cells are lists, produced by `str.split`.
#[derive(Debug, Clone, PartialEq)]
pub struct ListSeries {
    pub name: Option<Cell>,
    pub values: Vec<Option<Vec<Cell>>>,
    pub index: Vec<Cell>,
}

/// Boolean series produced by comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub values: Vec<bool>,
    pub index: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    All,
    One(String),
    Many(Vec<String>),
}

/// Result of `groupby`: disjoint row partitions covering `frame`, ordered
/// by key. A null key forms its own partition, sorted last.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouped {
    pub frame: Frame,
    pub keys: Vec<String>,
    pub groups: Vec<(Cell, Vec<usize>)>,
    pub selection: Selection,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Frame(Frame),
    Series(Series),
    ListSeries(ListSeries),
    Mask(Mask),
    Grouped(Grouped),
    Scalar(Cell),
    List(Vec<Cell>),
}

impl Value {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Frame(_) => "frame",
            Value::Series(_) => "series",
            Value::ListSeries(_) => "series of lists",
            Value::Mask(_) => "boolean series",
            Value::Grouped(_) => "groupby",
            Value::Scalar(_) => "scalar",
            Value::List(_) => "list",
        }
    }
}

const PREVIEW_ROWS: usize = 5;

fn repr(c: &Cell) -> String {
    match c {
        Cell::Null => "None".into(),
        Cell::Str(s) => format!("'{s}'"),
        other => other.render(),
    }
}

fn csv_rows(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for r in rows.take(PREVIEW_ROWS) {
        w.write_record(&r).expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("utf-8").trim_end().to_string()
}

/// Text rendering of a result: scalars as text, frames and series as CSV of
/// their first five rows.
pub fn render_value(v: &Value) -> String {
    match v {
        Value::Scalar(Cell::Null) => "None".into(),
        Value::Scalar(c) => c.render(),
        Value::List(items) => format!("[{}]", items.iter().map(repr).collect::<Vec<_>>().join(", ")),
        Value::Series(s) => csv_rows(
            vec!["index".into(), s.name.as_ref().map(Cell::render).unwrap_or_default()],
            s.index.iter().zip(&s.values).map(|(i, v)| vec![i.render(), v.render()]),
        ),
        Value::ListSeries(s) => csv_rows(
            vec!["index".into(), s.name.as_ref().map(Cell::render).unwrap_or_default()],
            s.index.iter().zip(&s.values).map(|(i, v)| {
                let cell = v.as_ref().map_or_else(String::new, |l| {
                    format!("[{}]", l.iter().map(repr).collect::<Vec<_>>().join(", "))
                });
                vec![i.render(), cell]
            }),
        ),
        Value::Mask(m) => csv_rows(
            vec!["index".into(), String::new()],
            m.index
                .iter()
                .zip(&m.values)
                .map(|(i, b)| vec![i.render(), if *b { "True".into() } else { "False".into() }]),
        ),
        Value::Frame(f) => {
            let mut header = vec!["index".to_string()];
            header.extend(f.names.iter().cloned());
            csv_rows(
                header,
                (0..f.len()).map(|r| {
                    std::iter::once(f.index[r].render())
                        .chain(f.columns.iter().map(|c| c[r].render()))
                        .collect()
                }),
            )
        }
        Value::Grouped(g) => format!("<groupby {:?}: {} groups>", g.keys, g.groups.len()),
    }
}

//! Small bundled tables used by tests, benches and the CLI demo paths.

use crate::table::{parse_csv, CsvOptions, Table};

pub const SNOOKER_CSV: &str = include_str!("../fixtures/snooker.csv");
pub const PLAYERS_CSV: &str = include_str!("../fixtures/players.csv");
pub const TRANSIT_CSV: &str = include_str!("../fixtures/transit.csv");

fn load(text: &str) -> Table {
    parse_csv(text.as_bytes(), CsvOptions::default())
        .expect("bundled fixture parses")
        .infer_types()
}

/// Snooker career finals table (14 rows).
pub fn snooker() -> Table {
    load(SNOOKER_CSV)
}

pub fn players() -> Table {
    load(PLAYERS_CSV)
}

pub fn transit() -> Table {
    load(TRANSIT_CSV)
}

/// All bundled tables with stable ids.
pub fn all() -> Vec<(&'static str, Table)> {
    vec![("snooker", snooker()), ("players", players()), ("transit", transit())]
}

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::prompt::GenerationStyle;
use super::GenError;

/// One side of a pair awaiting translation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "text", rename_all = "snake_case")]
pub enum Half {
    Question(String),
    Code(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedPairs {
    pub pairs: Vec<(String, String)>,
    pub halves: Vec<Half>,
    /// Entries dropped because the half the style requires was missing.
    pub dropped: usize,
}

fn marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:[-*]\s*)?\**\s*([QqCc])(\d+)\s*\**\s*[:.)]\**\s*(.*)$").expect("valid regex"))
}

#[derive(Default)]
struct Entry {
    number: u32,
    question: Option<String>,
    code: Option<String>,
}

fn clean_code(code: &str) -> String {
    let c = code.trim();
    let c = c.strip_prefix("```python").or_else(|| c.strip_prefix("```")).unwrap_or(c);
    let c = c.strip_suffix("```").unwrap_or(c).trim();
    let c = c.strip_prefix('`').and_then(|s| s.strip_suffix('`')).unwrap_or(c);
    c.trim().to_string()
}

fn clean_question(q: &str) -> String {
    q.trim().trim_matches('*').trim().to_string()
}

/// Extracts numbered `Qk:` / `Ck:` entries. Lines that carry no marker
/// continue the previous entry (code chains split over lines); anything
/// before the first marker is ignored.
pub fn parse_pairs(raw: &str, style: GenerationStyle) -> Result<ParsedPairs, GenError> {
    let mut entries: Vec<Entry> = Vec::new();
    // (entry position, is_code) of the field currently being extended
    let mut open: Option<(usize, bool)> = None;
    let mut fenced = false;
    for line in raw.lines() {
        if let Some(m) = marker().captures(line) {
            let is_code = m[1].eq_ignore_ascii_case("c");
            let number: u32 = m[2].parse().unwrap_or(u32::MAX);
            let text = m[3].to_string();
            let pos = match entries.iter().rposition(|e| e.number == number) {
                Some(p) if (if is_code { entries[p].code.is_none() } else { entries[p].question.is_none() }) => p,
                _ => {
                    entries.push(Entry {
                        number,
                        ..Entry::default()
                    });
                    entries.len() - 1
                }
            };
            if is_code {
                entries[pos].code = Some(text);
            } else {
                entries[pos].question = Some(text);
            }
            fenced = m[3].trim_start().starts_with("```") && !m[3].trim_end().ends_with("```");
            open = Some((pos, is_code));
            continue;
        }
        let t = line.trim();
        if t.is_empty() {
            open = None;
            continue;
        }
        if t.starts_with("```") {
            // a closing fence ends the field it belongs to
            if fenced {
                open = None;
            }
            fenced = !fenced;
            continue;
        }
        if let Some((pos, is_code)) = open {
            let field = if is_code { &mut entries[pos].code } else { &mut entries[pos].question };
            let f = field.get_or_insert_with(String::new);
            if !f.trim().is_empty() {
                f.push(if is_code { '\n' } else { ' ' });
            }
            f.push_str(t);
        }
    }

    let mut out = ParsedPairs::default();
    for e in entries {
        let q = e.question.map(|q| clean_question(&q)).filter(|q| !q.is_empty());
        let c = e.code.map(|c| clean_code(&c)).filter(|c| !c.is_empty());
        match style {
            GenerationStyle::QuestionThenCode | GenerationStyle::CodeThenQuestion => match (q, c) {
                (Some(q), Some(c)) => out.pairs.push((q, c)),
                _ => out.dropped += 1,
            },
            GenerationStyle::QuestionOnly => match q {
                Some(q) => out.halves.push(Half::Question(q)),
                None => out.dropped += 1,
            },
            GenerationStyle::CodeOnly => match c {
                Some(c) => out.halves.push(Half::Code(c)),
                None => out.dropped += 1,
            },
        }
    }
    if out.pairs.is_empty() && out.halves.is_empty() {
        return Err(GenError::NoPairsFound);
    }
    Ok(out)
}

/// Renders pairs in the wire format, in the order the style asks for.
pub fn render_pairs(pairs: &[(String, String)], style: GenerationStyle) -> String {
    let mut out = String::new();
    for (k, (q, c)) in pairs.iter().enumerate() {
        let k = k + 1;
        match style {
            GenerationStyle::CodeThenQuestion => out.push_str(&format!("C{k}: {c}\nQ{k}: {q}\n")),
            GenerationStyle::QuestionOnly => out.push_str(&format!("Q{k}: {q}\n")),
            GenerationStyle::CodeOnly => out.push_str(&format!("C{k}: {c}\n")),
            GenerationStyle::QuestionThenCode => out.push_str(&format!("Q{k}: {q}\nC{k}: {c}\n")),
        }
    }
    out
}

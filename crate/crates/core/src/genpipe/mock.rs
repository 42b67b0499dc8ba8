use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::client::{ChatClient, ChatRequest, ChatResponse};
use super::prompt::{estimate_tokens, GenerationStyle, SYSTEM_PROMPT, TRANSLATE_TO_CODE_SYSTEM, TRANSLATE_TO_QUESTION_SYSTEM};
use super::GenError;
use crate::alignment::JUDGE_SYSTEM;
use crate::table::{parse_csv, Cell, CsvOptions};

/// Offline stand-in for a chat model. It reads the table context out of the
/// prompt and answers from a fixed set of question/code templates, with a
/// seeded share of mismatched and non-executable code. Identical requests
/// get identical replies.
#[derive(Debug, Clone)]
pub struct MockChatClient {
    seed: u64,
    misaligned_rate: f64,
    broken_rate: f64,
}

impl MockChatClient {
    pub fn new(seed: u64) -> Self {
        MockChatClient {
            seed,
            misaligned_rate: 0.15,
            broken_rate: 0.10,
        }
    }

    pub fn with_rates(seed: u64, misaligned_rate: f64, broken_rate: f64) -> Self {
        MockChatClient {
            seed,
            misaligned_rate,
            broken_rate,
        }
    }

    fn rng_for(&self, text: &str) -> ChaCha8Rng {
        let digest = Sha256::digest(text.as_bytes());
        let mut b = [0u8; 8];
        b.copy_from_slice(&digest[..8]);
        ChaCha8Rng::seed_from_u64(self.seed ^ u64::from_le_bytes(b))
    }

    fn reply(&self, system: &str, user: &str) -> String {
        let ctx = Context::read(user);
        let pool = templates(&ctx);
        if system == TRANSLATE_TO_CODE_SYSTEM {
            let q = field_after(user, "\nQuestion: ");
            let code = pool
                .iter()
                .find(|(tq, _)| *tq == q)
                .map_or_else(|| "len(table)".to_string(), |(_, c)| c.clone());
            return format!("C1: {code}");
        }
        if system == TRANSLATE_TO_QUESTION_SYSTEM {
            let c = field_after(user, "\nCode: ");
            let question = pool
                .iter()
                .find(|(_, tc)| *tc == c)
                .map_or_else(|| "What does this expression compute?".to_string(), |(q, _)| q.clone());
            return format!("Q1: {question}");
        }
        if system == JUDGE_SYSTEM {
            return judge(field_after(user, "\nQuestion: "), field_after(user, "\nCode: ")).into();
        }
        if system != SYSTEM_PROMPT {
            return "I can only help with table questions.".into();
        }

        let mut rng = self.rng_for(user);
        let n = requested_count(user).max(1);
        let style = detect_style(user);
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.shuffle(&mut rng);
        let mut out = String::from("Here are the insights:\n");
        for k in 0..n {
            let (q, mut c) = pool[order[k % order.len()]].clone();
            let roll: f64 = rng.random();
            if roll < self.broken_rate {
                c = broken(&c, &ctx, &mut rng);
            } else if roll < self.broken_rate + self.misaligned_rate && pool.len() > 1 {
                let other = loop {
                    let j = rng.random_range(0..pool.len());
                    if pool[j].1 != c {
                        break j;
                    }
                };
                c = pool[other].1.clone();
            }
            let k = k + 1;
            match style {
                GenerationStyle::QuestionThenCode => out.push_str(&format!("Q{k}: {q}\nC{k}: {c}\n")),
                GenerationStyle::CodeThenQuestion => out.push_str(&format!("C{k}: {c}\nQ{k}: {q}\n")),
                GenerationStyle::QuestionOnly => out.push_str(&format!("Q{k}: {q}\n")),
                GenerationStyle::CodeOnly => out.push_str(&format!("C{k}: {c}\n")),
            }
        }
        out
    }
}

impl ChatClient for MockChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GenError> {
        let text = self.reply(request.system_text(), request.user_text());
        let prompt: usize = request.messages.iter().map(|m| estimate_tokens(&m.content)).sum();
        let completion = estimate_tokens(&text) as u64;
        Ok(ChatResponse {
            prompt_tokens: prompt as u64,
            completion_tokens: completion,
            // simulated latency, never measured
            wall_ms: 200 + 15 * completion,
            text,
        })
    }
}

/// Says yes when every literal the code quotes is named in the question,
/// or when a literal-free expression meets a counting question.
fn judge(question: &str, code: &str) -> &'static str {
    let q = question.to_lowercase();
    let quoted: Vec<String> = code.split('\'').skip(1).step_by(2).map(str::to_lowercase).collect();
    let ok = if quoted.is_empty() {
        q.contains("how many") || q.contains("rows")
    } else {
        quoted.iter().all(|lit| q.contains(lit.as_str()))
    };
    if ok {
        "Yes"
    } else {
        "No"
    }
}

#[derive(Debug, Default)]
struct ColumnInfo {
    name: String,
    dtype: String,
    cardinality: usize,
    example: Option<Cell>,
}

#[derive(Debug, Default)]
struct Context {
    rows: usize,
    columns: Vec<ColumnInfo>,
}

impl Context {
    fn read(user: &str) -> Context {
        let mut ctx = Context::default();
        for line in user.lines() {
            let Some(rest) = line.strip_prefix("- ") else { continue };
            let Some((name, props)) = rest.split_once(": dtype=") else { continue };
            let dtype = props.split(',').next().unwrap_or("").to_string();
            let cardinality = props
                .split(", ")
                .find_map(|p| p.strip_prefix("cardinality="))
                .and_then(|v| v.parse().ok())
                .unwrap_or(0);
            ctx.columns.push(ColumnInfo {
                name: name.to_string(),
                dtype,
                cardinality,
                example: None,
            });
        }
        if let Some(start) = user.find("Table sample (") {
            let head = &user[start..];
            ctx.rows = head
                .split_once(" of ")
                .and_then(|(_, r)| r.split(' ').next())
                .and_then(|r| r.parse().ok())
                .unwrap_or(0);
            let body = head.split_once(":\n").map_or("", |(_, b)| b);
            let csv = body.split("\n\n").next().unwrap_or("");
            if let Ok(t) = parse_csv(csv.as_bytes(), CsvOptions::default()) {
                let t = t.infer_types();
                for c in &mut ctx.columns {
                    c.example = t.column(&c.name).and_then(|col| col.cells.iter().find(|x| !x.is_null()).cloned());
                }
            }
        }
        ctx
    }

    fn of_type<'a>(&'a self, pred: impl Fn(&ColumnInfo) -> bool + 'a) -> impl Iterator<Item = &'a ColumnInfo> + 'a {
        self.columns.iter().filter(move |c| pred(c))
    }
}

fn is_numeric(c: &ColumnInfo) -> bool {
    c.dtype == "integer" || c.dtype == "float"
}

fn is_category(c: &ColumnInfo, rows: usize) -> bool {
    c.dtype == "string" && c.cardinality > 1 && (rows == 0 || c.cardinality < rows)
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
}

fn literal(cell: &Cell) -> Option<String> {
    match cell {
        Cell::Int(v) => Some(v.to_string()),
        Cell::Float(v) if v.is_finite() => Some(cell.render()),
        Cell::Str(s) => Some(quote(s)),
        _ => None,
    }
}

/// Question/code pairs that are correct for the described table, in a
/// fixed order.
fn templates(ctx: &Context) -> Vec<(String, String)> {
    let mut out = vec![("How many rows does the table have?".to_string(), "len(table)".to_string())];
    let cats: Vec<&ColumnInfo> = ctx.of_type(|c| is_category(c, ctx.rows)).collect();
    let nums: Vec<&ColumnInfo> = ctx.of_type(is_numeric).collect();
    for c in &cats {
        let n = quote(&c.name);
        out.push((format!("Which {} appears most often?", c.name), format!("table[{n}].value_counts().idxmax()")));
        out.push((format!("How many distinct values of {} are there?", c.name), format!("table[{n}].nunique()")));
        if let Some(v) = c.example.as_ref().and_then(literal) {
            out.push((
                format!("How many rows have {} equal to {}?", c.name, v.trim_matches('\'')),
                format!("len(table[table[{n}] == {v}])"),
            ));
            for d in cats.iter().filter(|d| d.name != c.name) {
                out.push((
                    format!("Which {} appears most often among rows where {} is {}?", d.name, c.name, v.trim_matches('\'')),
                    format!("table[table[{n}] == {v}][{}].value_counts().idxmax()", quote(&d.name)),
                ));
            }
        }
    }
    for x in &nums {
        let n = quote(&x.name);
        out.push((format!("What is the average {}?", x.name), format!("table[{n}].mean()")));
        out.push((format!("What is the highest {}?", x.name), format!("table[{n}].max()")));
        out.push((format!("What is the lowest {}?", x.name), format!("table[{n}].min()")));
        if let Some(v) = x.example.as_ref().and_then(literal) {
            out.push((
                format!("How many rows have {} greater than {v}?", x.name),
                format!("len(table[table[{n}] > {v}])"),
            ));
        }
    }
    for c in &cats {
        for x in &nums {
            let (cn, xn) = (quote(&c.name), quote(&x.name));
            out.push((
                format!("Which {} has the highest total {}?", c.name, x.name),
                format!("table.groupby({cn})[{xn}].sum().idxmax()"),
            ));
            out.push((
                format!("What is the average {} for each {}?", x.name, c.name),
                format!("table.groupby({cn})[{xn}].mean()"),
            ));
        }
        out.push((format!("How many rows are there for each {}?", c.name), format!("table.groupby({}).size()", quote(&c.name))));
    }
    out
}

/// Code the evaluator will reject: a misspelled column or a method outside
/// the supported subset.
fn broken(code: &str, ctx: &Context, rng: &mut ChaCha8Rng) -> String {
    match (rng.random_bool(0.5), ctx.columns.first()) {
        (true, Some(c)) => format!("table[{}].sum()", quote(&format!("{}_total", c.name))),
        (_, Some(c)) => format!("table.pivot_table(index={})", quote(&c.name)),
        (_, None) => format!("{code}.explode()"),
    }
}

fn requested_count(user: &str) -> usize {
    user.split_once("exactly ")
        .and_then(|(_, r)| r.split(' ').next())
        .and_then(|n| n.parse().ok())
        .unwrap_or(1)
}

fn detect_style(user: &str) -> GenerationStyle {
    if user.contains("Q1: <question>\nC1: <code>") {
        GenerationStyle::QuestionThenCode
    } else if user.contains("C1: <code>\nQ1: <question>") {
        GenerationStyle::CodeThenQuestion
    } else if user.contains("Q1: <question>") {
        GenerationStyle::QuestionOnly
    } else {
        GenerationStyle::CodeOnly
    }
}

fn field_after<'a>(user: &'a str, marker: &str) -> &'a str {
    user.split_once(marker)
        .and_then(|(_, r)| r.lines().next())
        .map_or("", str::trim)
}

use std::ops::{Add, AddAssign};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::client::{ChatClient, ChatExchange, ChatMessage, ChatRequest};
use super::parse::{parse_pairs, Half};
use super::prompt::{build_translation_prompt, GenOptions, GenerationStyle, PromptSpec};
use super::GenError;
use crate::dsl::{render_value, run, EvalLimits, ErrorKind, Value};
use crate::profile::TableProfile;
use crate::table::Table;

/// Rows kept when rendering a frame or series result.
const RESULT_ROWS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub wall_ms: u64,
}

impl Usage {
    pub fn of(exchange: &ChatExchange) -> Usage {
        Usage {
            prompt_tokens: exchange.response.prompt_tokens,
            completion_tokens: exchange.response.completion_tokens,
            wall_ms: exchange.wall_ms,
        }
    }

    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

impl Add for Usage {
    type Output = Usage;

    fn add(self, o: Usage) -> Usage {
        Usage {
            prompt_tokens: self.prompt_tokens + o.prompt_tokens,
            completion_tokens: self.completion_tokens + o.completion_tokens,
            wall_ms: self.wall_ms + o.wall_ms,
        }
    }
}

impl AddAssign for Usage {
    fn add_assign(&mut self, o: Usage) {
        *self = *self + o;
    }
}

impl std::iter::Sum for Usage {
    fn sum<I: Iterator<Item = Usage>>(iter: I) -> Usage {
        iter.fold(Usage::default(), Add::add)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeKind {
    Generate,
    Translate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageEntry {
    pub table_id: String,
    pub kind: ExchangeKind,
    pub usage: Usage,
}

/// Append-only record of every model call; totals are computed on read.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageLedger {
    entries: Vec<UsageEntry>,
}

impl UsageLedger {
    pub fn new() -> Self {
        UsageLedger::default()
    }

    pub fn record(&mut self, table_id: &str, kind: ExchangeKind, usage: Usage) {
        self.entries.push(UsageEntry {
            table_id: table_id.to_string(),
            kind,
            usage,
        });
    }

    pub fn merge(&mut self, other: UsageLedger) {
        self.entries.extend(other.entries);
    }

    pub fn entries(&self) -> &[UsageEntry] {
        &self.entries
    }

    pub fn calls(&self, kind: ExchangeKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }

    pub fn totals(&self) -> Usage {
        self.entries.iter().map(|e| e.usage).sum()
    }

    pub fn totals_for(&self, kind: ExchangeKind) -> Usage {
        self.entries.iter().filter(|e| e.kind == kind).map(|e| e.usage).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum CandidateStatus {
    Pending,
    Executable { result: String },
    NonExecutable { kind: ErrorKind, message: String },
}

impl CandidateStatus {
    pub fn is_executable(&self) -> bool {
        matches!(self, CandidateStatus::Executable { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsightCandidate {
    pub table_id: String,
    pub index: usize,
    pub question: String,
    pub code: String,
    pub status: CandidateStatus,
    pub usage: Usage,
}

impl InsightCandidate {
    /// Moves a pending candidate to its final status. A second call fails.
    pub fn resolve(&mut self, status: CandidateStatus) -> Result<(), GenError> {
        if self.status != CandidateStatus::Pending {
            return Err(GenError::AlreadyResolved(self.index));
        }
        self.status = status;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationOutcome {
    pub candidates: Vec<InsightCandidate>,
    pub raw: String,
    /// Entries the parser or a failed translation discarded.
    pub dropped: usize,
    /// Fewer candidates came back than were asked for.
    pub truncated: bool,
}

fn call(client: &dyn ChatClient, opts: &GenOptions, system: &str, user: &str) -> Result<ChatExchange, GenError> {
    let request = ChatRequest {
        model: opts.model.clone(),
        messages: vec![ChatMessage::system(system), ChatMessage::user(user)],
        temperature: opts.temperature,
        max_tokens: opts.max_tokens,
    };
    let response = client.complete(&request)?;
    Ok(ChatExchange {
        wall_ms: response.wall_ms,
        request,
        response,
    })
}

/// One completion for a built prompt. Retries and caching belong to the
/// client stack passed in.
pub fn generate(client: &dyn ChatClient, spec: &PromptSpec, opts: &GenOptions) -> Result<(String, ChatExchange), GenError> {
    let exchange = call(client, opts, &spec.system_text, &spec.user_text)?;
    Ok((exchange.response.text.clone(), exchange))
}

/// Completes a question with code or code with a question, one call each.
pub fn translate(
    client: &dyn ChatClient,
    half: &Half,
    t: &Table,
    profile: &TableProfile,
    opts: &GenOptions,
) -> Result<((String, String), ChatExchange), GenError> {
    let (system, user) = build_translation_prompt(half, t, profile, opts)?;
    let exchange = call(client, opts, &system, &user)?;
    let text = &exchange.response.text;
    let pair = match half {
        Half::Question(q) => match parse_pairs(text, GenerationStyle::CodeOnly)?.halves.into_iter().next() {
            Some(Half::Code(c)) => (q.clone(), c),
            _ => return Err(GenError::NoPairsFound),
        },
        Half::Code(c) => match parse_pairs(text, GenerationStyle::QuestionOnly)?.halves.into_iter().next() {
            Some(Half::Question(q)) => (q, c.clone()),
            _ => return Err(GenError::NoPairsFound),
        },
    };
    Ok((pair, exchange))
}

/// Generation, parsing and (for single-modality styles) translation for
/// one table. The generation call's usage is charged to the first
/// candidate; each translation is charged to the candidate it completed.
pub fn generate_insights(
    client: &dyn ChatClient,
    table_id: &str,
    t: &Table,
    profile: &TableProfile,
    spec: &PromptSpec,
    opts: &GenOptions,
    ledger: &mut UsageLedger,
) -> Result<GenerationOutcome, GenError> {
    let (raw, exchange) = generate(client, spec, opts)?;
    let gen_usage = Usage::of(&exchange);
    ledger.record(table_id, ExchangeKind::Generate, gen_usage);
    let parsed = parse_pairs(&raw, spec.style)?;
    let mut dropped = parsed.dropped;

    let mut completed: Vec<((String, String), Usage)> = parsed.pairs.into_iter().map(|p| (p, Usage::default())).collect();
    for half in &parsed.halves {
        match translate(client, half, t, profile, opts) {
            Ok((pair, ex)) => {
                let u = Usage::of(&ex);
                ledger.record(table_id, ExchangeKind::Translate, u);
                completed.push((pair, u));
            }
            Err(GenError::NoPairsFound) => dropped += 1,
            Err(e) => return Err(e),
        }
    }

    let truncated = completed.len() < spec.n_insights;
    let candidates = completed
        .into_iter()
        .enumerate()
        .map(|(index, ((question, code), usage))| InsightCandidate {
            table_id: table_id.to_string(),
            index,
            question,
            code,
            status: CandidateStatus::Pending,
            usage: if index == 0 { usage + gen_usage } else { usage },
        })
        .collect();
    Ok(GenerationOutcome {
        candidates,
        raw,
        dropped,
        truncated,
    })
}

pub(crate) fn render_result(v: &Value) -> String {
    let text = render_value(v);
    match v {
        Value::Scalar(_) | Value::List(_) => text,
        _ => text.lines().take(RESULT_ROWS + 1).collect::<Vec<_>>().join("\n"),
    }
}

/// Runs every pending candidate's code against the table and records the
/// outcome. Order and membership are unchanged.
pub fn filter_executable(cands: Vec<InsightCandidate>, t: &Table, limits: &EvalLimits) -> Vec<InsightCandidate> {
    cands
        .into_par_iter()
        .map(|mut c| {
            if c.status == CandidateStatus::Pending {
                let status = match run(&c.code, t, limits) {
                    Ok(v) => CandidateStatus::Executable { result: render_result(&v) },
                    Err(e) => CandidateStatus::NonExecutable {
                        kind: e.kind,
                        message: e.message,
                    },
                };
                c.status = status;
            }
            c
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::genpipe::{build_prompt, CachedClient, MockChatClient, RetryPolicy, RetryingClient, ScriptedClient, ShotMode, Sleeper};
    use crate::profile::profile_table;
    use std::time::Duration;

    struct NoSleep;

    impl Sleeper for NoSleep {
        fn sleep(&self, _: Duration) {}
    }

    fn pending(index: usize, code: &str) -> InsightCandidate {
        InsightCandidate {
            table_id: "snooker".into(),
            index,
            question: String::new(),
            code: code.into(),
            status: CandidateStatus::Pending,
            usage: Usage::default(),
        }
    }

    fn spec(style: GenerationStyle, n: usize) -> (Table, TableProfile, PromptSpec) {
        let t = fixtures::snooker();
        let p = profile_table("snooker", &t).unwrap();
        let s = build_prompt(&t, &p, &[], style, &ShotMode::ZeroShot, n, &GenOptions::default()).unwrap();
        (t, p, s)
    }

    #[test]
    fn filter_records_results_and_error_kinds() {
        let t = fixtures::snooker();
        let cands = vec![
            pending(0, "len(table)"),
            pending(1, "table.explode('x')"),
            pending(2, "table['Nope'].sum()"),
            pending(3, "table['Year'].value_counts()"),
        ];
        let out = filter_executable(cands, &t, &EvalLimits::default());
        assert_eq!(out[0].status, CandidateStatus::Executable { result: "14".into() });
        assert!(matches!(out[1].status, CandidateStatus::NonExecutable { kind: ErrorKind::UnknownMethod, .. }));
        assert!(matches!(out[2].status, CandidateStatus::NonExecutable { kind: ErrorKind::UnknownColumn, .. }));
        let CandidateStatus::Executable { result } = &out[3].status else { panic!() };
        assert_eq!(result.lines().count(), 1 + RESULT_ROWS);
        assert_eq!(out.iter().map(|c| c.index).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn status_resolves_once() {
        let mut c = pending(4, "len(table)");
        c.resolve(CandidateStatus::Executable { result: "14".into() }).unwrap();
        assert_eq!(
            c.resolve(CandidateStatus::Executable { result: "14".into() }),
            Err(GenError::AlreadyResolved(4))
        );
    }

    #[test]
    fn canned_completion_is_cached() {
        let canned = "Q1: How many rows?\nC1: len(table)\nQ2: Mean year?\nC2: table['Year'].mean()";
        let (_, _, s) = spec(GenerationStyle::QuestionThenCode, 2);
        let client = CachedClient::new(ScriptedClient::constant(canned), None).unwrap();
        let (raw, ex) = generate(&client, &s, &GenOptions::default()).unwrap();
        assert_eq!(raw, canned);
        assert!(ex.response.prompt_tokens > 0);
        let (raw2, _) = generate(&client, &s, &GenOptions::default()).unwrap();
        assert_eq!(raw2, canned);
        assert_eq!(client.hits(), 1);
    }

    #[test]
    fn server_errors_exhaust_retries() {
        let err = || Err(GenError::ApiError { status: 500, message: "boom".into() });
        let inner = ScriptedClient::new(vec![err(), err(), err()], Some("Q1: a\nC1: len(table)".into()));
        let client = RetryingClient::new(&inner, RetryPolicy::default(), Box::new(NoSleep));
        let (_, _, s) = spec(GenerationStyle::QuestionThenCode, 1);
        let e = generate(&client, &s, &GenOptions::default()).unwrap_err();
        assert!(matches!(e, GenError::ApiError { status: 500, .. }));
        assert_eq!(inner.calls(), 3);
    }

    #[test]
    fn translation_completes_either_half() {
        let (t, p, _) = spec(GenerationStyle::QuestionOnly, 1);
        let opts = GenOptions::default();
        let client = ScriptedClient::constant("C1: len(table)");
        let (pair, _) = translate(&client, &Half::Question("How many rows are in the table?".into()), &t, &p, &opts).unwrap();
        assert_eq!(pair, ("How many rows are in the table?".to_string(), "len(table)".to_string()));
        let client = ScriptedClient::constant("Q1: How many rows are there?");
        let (pair, _) = translate(&client, &Half::Code("len(table)".into()), &t, &p, &opts).unwrap();
        assert_eq!(pair.0, "How many rows are there?");
    }

    #[test]
    fn question_only_batch_makes_one_translation_per_question() {
        let (t, p, s) = spec(GenerationStyle::QuestionOnly, 25);
        let mock = MockChatClient::new(5);
        let mut ledger = UsageLedger::new();
        let out = generate_insights(&mock, "snooker", &t, &p, &s, &GenOptions::default(), &mut ledger).unwrap();
        assert_eq!(out.candidates.len(), 25);
        assert_eq!(ledger.calls(ExchangeKind::Generate), 1);
        assert_eq!(ledger.calls(ExchangeKind::Translate), 25);
        let per_candidate: Usage = out.candidates.iter().map(|c| c.usage).sum();
        assert_eq!(per_candidate, ledger.totals());
        let by_kind = ledger.totals_for(ExchangeKind::Generate) + ledger.totals_for(ExchangeKind::Translate);
        assert_eq!(by_kind, ledger.totals());
    }

    #[test]
    fn single_modality_styles_cost_more() {
        let mock = MockChatClient::new(9);
        let mut cost = Vec::new();
        for style in GenerationStyle::ALL {
            let (t, p, s) = spec(style, 25);
            let mut ledger = UsageLedger::new();
            generate_insights(&mock, "snooker", &t, &p, &s, &GenOptions::default(), &mut ledger).unwrap();
            cost.push(ledger.totals().total_tokens());
        }
        let [qc, cq, q, c] = cost[..] else { unreachable!() };
        assert!(q > c && c > 5 * qc.max(cq), "{cost:?}");
    }

    #[test]
    fn truncation_and_indices() {
        let (t, p, s) = spec(GenerationStyle::QuestionThenCode, 5);
        let client = ScriptedClient::constant("Q1: a?\nC1: len(table)\nQ2: b?\nQ3: c?\nC3: table['Year'].max()");
        let mut ledger = UsageLedger::new();
        let out = generate_insights(&client, "snooker", &t, &p, &s, &GenOptions::default(), &mut ledger).unwrap();
        assert!(out.truncated);
        assert_eq!(out.dropped, 1);
        assert_eq!(out.candidates.iter().map(|c| c.index).collect::<Vec<_>>(), vec![0, 1]);
        let filtered = filter_executable(out.candidates, &t, &EvalLimits::default());
        assert_eq!(filtered.iter().map(|c| c.index).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn mock_pipeline_is_reproducible() {
        let run_once = || {
            let (t, p, s) = spec(GenerationStyle::CodeThenQuestion, 25);
            let mut ledger = UsageLedger::new();
            let out = generate_insights(&MockChatClient::new(11), "snooker", &t, &p, &s, &GenOptions::default(), &mut ledger)
                .unwrap();
            serde_json::to_string(&filter_executable(out.candidates, &t, &EvalLimits::default())).unwrap()
        };
        assert_eq!(run_once(), run_once());
    }
}

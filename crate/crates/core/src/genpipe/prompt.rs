use serde::{Deserialize, Serialize};

use super::GenError;
use crate::profile::{ColumnProfile, GroupbyCandidate, TableProfile};
use crate::table::{sample_rows, serialize_csv, Table};

pub const SYSTEM_PROMPT: &str = "You are a data analyst. You explore tables held in a pandas dataframe named `table` \
and propose insightful questions together with single pandas expressions that answer them.";

pub const TRANSLATE_TO_CODE_SYSTEM: &str = "You are a data analyst. Given a question about a pandas dataframe named \
`table`, reply with one pandas expression that answers it.";

pub const TRANSLATE_TO_QUESTION_SYSTEM: &str = "You are a data analyst. Given a pandas expression over a dataframe \
named `table`, reply with the question that the expression answers.";

const CODE_RULES: &str = "Each code must be a single expression that starts with `table` and uses column \
selection, boolean filters, groupby, aggregation, sorting or string methods. Do not import modules, assign \
variables or write more than one line of code.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationStyle {
    QuestionThenCode,
    CodeThenQuestion,
    QuestionOnly,
    CodeOnly,
}

impl GenerationStyle {
    pub const ALL: [GenerationStyle; 4] = [
        GenerationStyle::QuestionThenCode,
        GenerationStyle::CodeThenQuestion,
        GenerationStyle::QuestionOnly,
        GenerationStyle::CodeOnly,
    ];

    /// Single-modality styles need a translation call per entry.
    pub fn needs_translation(self) -> bool {
        matches!(self, GenerationStyle::QuestionOnly | GenerationStyle::CodeOnly)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            GenerationStyle::QuestionThenCode => "qc",
            GenerationStyle::CodeThenQuestion => "cq",
            GenerationStyle::QuestionOnly => "q",
            GenerationStyle::CodeOnly => "c",
        }
    }

    pub fn from_short_name(s: &str) -> Option<Self> {
        GenerationStyle::ALL.into_iter().find(|g| g.short_name() == s)
    }

    /// Line template shown to the model.
    fn format_lines(self) -> &'static str {
        match self {
            GenerationStyle::QuestionThenCode => "Q1: <question>\nC1: <code>",
            GenerationStyle::CodeThenQuestion => "C1: <code>\nQ1: <question>",
            GenerationStyle::QuestionOnly => "Q1: <question>",
            GenerationStyle::CodeOnly => "C1: <code>",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ShotMode {
    ZeroShot,
    OneShot { examples: [(String, String); 3] },
}

/// The three static example pairs used in one-shot prompts. They refer to
/// a different, invented table on purpose.
pub fn one_shot_examples() -> ShotMode {
    let ex = |q: &str, c: &str| (q.to_string(), c.to_string());
    ShotMode::OneShot {
        examples: [
            ex(
                "Which team won the most matches?",
                "table[table['Result'] == 'W'].groupby('Team').size().idxmax()",
            ),
            ex("What is the average attendance per match?", "table['Attendance'].mean()"),
            ex("How many matches were played in 2019?", "len(table[table['Season'] == 2019])"),
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub system_text: String,
    pub user_text: String,
    pub n_insights: usize,
    pub style: GenerationStyle,
    pub shots: ShotMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenOptions {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub sample_rows: usize,
    pub top_candidates: usize,
    pub max_prompt_tokens: usize,
    pub seed: u64,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            model: "gpt-3.5-turbo".into(),
            temperature: 0.7,
            max_tokens: 2048,
            sample_rows: 5,
            top_candidates: 3,
            max_prompt_tokens: 8000,
            seed: 0,
        }
    }
}

/// Rough token count: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

fn fmt_num(v: f64) -> String {
    format!("{v:.3}")
}

fn property_line(c: &ColumnProfile) -> String {
    let extrema = match &c.extrema {
        Some((lo, hi)) => format!("[{lo}, {hi}]"),
        None => "none".into(),
    };
    format!(
        "- {}: dtype={}, position={}, missing={}, cardinality={}, extrema={}, peak_frequency={}, entropy={}",
        c.name,
        c.dtype,
        c.position,
        c.missing_count,
        c.cardinality,
        extrema,
        fmt_num(c.peak_frequency),
        fmt_num(c.entropy)
    )
}

fn table_context(t: &Table, profile: &TableProfile, opts: &GenOptions) -> String {
    let sample = sample_rows(t, opts.sample_rows, opts.seed);
    let mut out = format!("Table sample ({} of {} rows):\n", sample.row_count(), t.row_count());
    out.push_str(serialize_csv(&sample).trim_end());
    out.push_str("\n\nColumn properties:\n");
    for c in &profile.column_profiles {
        out.push_str(&property_line(c));
        out.push('\n');
    }
    out
}

fn example_block(style: GenerationStyle, examples: &[(String, String); 3]) -> String {
    let mut out = String::from("Examples from a different table:\n");
    for (k, (q, c)) in examples.iter().enumerate() {
        let k = k + 1;
        match style {
            GenerationStyle::CodeThenQuestion => out.push_str(&format!("C{k}: {c}\nQ{k}: {q}\n")),
            _ => out.push_str(&format!("Q{k}: {q}\nC{k}: {c}\n")),
        }
    }
    out
}

fn instructions(style: GenerationStyle, n: usize) -> String {
    let noun = if n == 1 { "" } else { "s" };
    let task = match style {
        GenerationStyle::QuestionThenCode => {
            format!("Generate exactly {n} insightful question{noun} about this table, each followed by the pandas code that answers it.")
        }
        GenerationStyle::CodeThenQuestion => {
            format!("Generate exactly {n} pandas code snippet{noun} that reveal insights about this table, each followed by the question it answers.")
        }
        GenerationStyle::QuestionOnly => format!("Generate exactly {n} insightful question{noun} about this table."),
        GenerationStyle::CodeOnly => {
            format!("Generate exactly {n} pandas code snippet{noun} that reveal insights about this table.")
        }
    };
    let mut out = format!("{task}\nUse this format, numbering entries from 1:\n{}\n", style.format_lines());
    if style != GenerationStyle::QuestionOnly {
        out.push_str(CODE_RULES);
        out.push('\n');
    }
    out
}

/// Builds the generation prompt: sample rows, column properties and the
/// groupby-candidate line, then the style instructions and any examples.
pub fn build_prompt(
    t: &Table,
    profile: &TableProfile,
    candidates: &[GroupbyCandidate],
    style: GenerationStyle,
    shots: &ShotMode,
    n_insights: usize,
    opts: &GenOptions,
) -> Result<PromptSpec, GenError> {
    if n_insights == 0 {
        return Err(GenError::InvalidSpec("n_insights must be at least 1".into()));
    }
    let mut user = table_context(t, profile, opts);
    let top: Vec<String> = candidates
        .iter()
        .take(opts.top_candidates)
        .map(|c| format!("'{}' ({:.2})", c.column_name, c.score))
        .collect();
    user.push_str(&format!(
        "\ngroupby candidates: {}\n(a weak hint about columns that may suit grouping and aggregation)\n\n",
        if top.is_empty() { "none".to_string() } else { top.join(", ") }
    ));
    user.push_str(&instructions(style, n_insights));
    if let ShotMode::OneShot { examples } = shots {
        user.push('\n');
        user.push_str(&example_block(style, examples));
    }
    let estimated = estimate_tokens(SYSTEM_PROMPT) + estimate_tokens(&user);
    if estimated > opts.max_prompt_tokens {
        return Err(GenError::TokenBudgetExceeded {
            estimated,
            budget: opts.max_prompt_tokens,
        });
    }
    Ok(PromptSpec {
        system_text: SYSTEM_PROMPT.to_string(),
        user_text: user,
        n_insights,
        style,
        shots: shots.clone(),
    })
}

/// Prompt asking for the missing half of a question/code pair.
pub fn build_translation_prompt(
    half: &super::Half,
    t: &Table,
    profile: &TableProfile,
    opts: &GenOptions,
) -> Result<(String, String), GenError> {
    let mut user = table_context(t, profile, opts);
    let system = match half {
        super::Half::Question(q) => {
            if q.trim().is_empty() {
                return Err(GenError::InvalidSpec("empty question".into()));
            }
            user.push_str(&format!("\nQuestion: {q}\nAnswer with one line in the form\nC1: <code>\n{CODE_RULES}\n"));
            TRANSLATE_TO_CODE_SYSTEM
        }
        super::Half::Code(c) => {
            if c.trim().is_empty() {
                return Err(GenError::InvalidSpec("empty code".into()));
            }
            user.push_str(&format!("\nCode: {c}\nAnswer with one line in the form\nQ1: <question>\n"));
            TRANSLATE_TO_QUESTION_SYSTEM
        }
    };
    let estimated = estimate_tokens(system) + estimate_tokens(&user);
    if estimated > opts.max_prompt_tokens {
        return Err(GenError::TokenBudgetExceeded {
            estimated,
            budget: opts.max_prompt_tokens,
        });
    }
    Ok((system.to_string(), user))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::profile::{default_groupby_tree, predict_groupby, profile_table};

    fn snooker_prompt(style: GenerationStyle, shots: &ShotMode, n: usize) -> PromptSpec {
        let t = fixtures::snooker();
        let p = profile_table("snooker", &t).unwrap();
        let cands = predict_groupby(default_groupby_tree(), &p).unwrap();
        build_prompt(&t, &p, &cands, style, shots, n, &GenOptions::default()).unwrap()
    }

    #[test]
    fn snooker_prompt_has_the_three_parts_in_order() {
        let spec = snooker_prompt(GenerationStyle::QuestionThenCode, &ShotMode::ZeroShot, 25);
        let u = &spec.user_text;
        assert!(u.contains("Opponent in final"));
        let sample = u.find("Table sample").unwrap();
        let props = u.find("Column properties:").unwrap();
        let cands = u.find("\ngroupby candidates:").unwrap();
        assert!(sample < props && props < cands);
        assert_eq!(u.lines().filter(|l| l.starts_with("- ")).count(), 5);
        assert!(u.contains("exactly 25 insightful questions"));
        assert!(u.contains("18--12"));
    }

    #[test]
    fn single_insight_wording() {
        let spec = snooker_prompt(GenerationStyle::QuestionOnly, &ShotMode::ZeroShot, 1);
        assert!(spec.user_text.contains("exactly 1 insightful question about"));
    }

    #[test]
    fn one_shot_splices_examples() {
        let shots = one_shot_examples();
        let spec = snooker_prompt(GenerationStyle::CodeThenQuestion, &shots, 10);
        let ShotMode::OneShot { examples } = &shots else { unreachable!() };
        for (q, c) in examples {
            assert!(spec.user_text.contains(q.as_str()));
            assert!(spec.user_text.contains(c.as_str()));
        }
    }

    #[test]
    fn budget_is_enforced() {
        let t = fixtures::snooker();
        let p = profile_table("snooker", &t).unwrap();
        let opts = GenOptions {
            max_prompt_tokens: 50,
            ..GenOptions::default()
        };
        let err = build_prompt(&t, &p, &[], GenerationStyle::QuestionThenCode, &ShotMode::ZeroShot, 5, &opts).unwrap_err();
        assert!(matches!(err, GenError::TokenBudgetExceeded { budget: 50, .. }));
        let err = build_prompt(&t, &p, &[], GenerationStyle::QuestionThenCode, &ShotMode::ZeroShot, 0, &GenOptions::default());
        assert!(matches!(err, Err(GenError::InvalidSpec(_))));
    }
}

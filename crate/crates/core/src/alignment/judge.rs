use super::data::Label;
use super::AlignError;
use crate::genpipe::{ChatClient, ChatMessage, ChatRequest, GenOptions};

pub const JUDGE_SYSTEM: &str = "You review pandas code written against a dataframe named `table`. Decide whether \
executing the code correctly answers the question. End your reply with a single word: Yes or No.";

pub fn judge_prompt(question: &str, code: &str, table_sample: &str) -> String {
    format!(
        "Table sample:\n{}\n\nQuestion: {question}\nCode: {code}\n\nDoes the code correctly answer the question? Answer Yes or No.",
        table_sample.trim_end()
    )
}

/// The last `yes` or `no` word in the reply decides; a reply without
/// either is an error rather than a guess.
pub fn parse_verdict(reply: &str) -> Result<Label, AlignError> {
    reply
        .split(|c: char| !c.is_alphanumeric())
        .rev()
        .find_map(|w| match w.to_ascii_lowercase().as_str() {
            "yes" => Some(Label::Aligned),
            "no" => Some(Label::Misaligned),
            _ => None,
        })
        .ok_or_else(|| AlignError::UnparseableVerdict(reply.chars().take(200).collect()))
}

pub fn llm_judge(
    client: &dyn ChatClient,
    question: &str,
    code: &str,
    table_sample: &str,
    opts: &GenOptions,
) -> Result<Label, AlignError> {
    let request = ChatRequest {
        model: opts.model.clone(),
        messages: vec![
            ChatMessage::system(JUDGE_SYSTEM),
            ChatMessage::user(judge_prompt(question, code, table_sample)),
        ],
        temperature: 0.0,
        max_tokens: 256,
    };
    let response = client.complete(&request)?;
    parse_verdict(&response.text)
}

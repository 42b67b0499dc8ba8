use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::alignment::{SwapScheme, TrainConfig, Variant};
use crate::dsl::EvalLimits;
use crate::genpipe::{one_shot_examples, GenOptions, GenerationStyle, ShotMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EndpointConfig {
    pub chat_base_url: String,
    pub embedding_base_url: String,
    /// Name of the environment variable holding the API key. The key
    /// itself never enters the config or any run artifact.
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub retry_attempts: u32,
    pub retry_base_delay_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            chat_base_url: "https://api.openai.com/v1".into(),
            embedding_base_url: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_ms: 60_000,
            retry_attempts: 3,
            retry_base_delay_ms: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub chat: String,
    pub judge: String,
    pub embedding: String,
    pub embedding_dim: usize,
    /// Width of the offline embedding provider used with `--mock`.
    pub mock_embedding_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            chat: "gpt-3.5-turbo".into(),
            judge: "gpt-4".into(),
            embedding: "text-embedding-3-small".into(),
            embedding_dim: 1536,
            mock_embedding_dim: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotsSetting {
    #[default]
    Zero,
    One,
}

impl ShotsSetting {
    pub fn mode(self) -> ShotMode {
        match self {
            ShotsSetting::Zero => ShotMode::ZeroShot,
            ShotsSetting::One => one_shot_examples(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ShotsSetting::Zero => "zero",
            ShotsSetting::One => "one",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub n_insights: usize,
    pub style: GenerationStyle,
    pub shots: ShotsSetting,
    pub temperature: f64,
    pub max_tokens: u32,
    pub sample_rows: usize,
    pub top_candidates: usize,
    pub max_prompt_tokens: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        let g = GenOptions::default();
        GenerationConfig {
            n_insights: 25,
            style: GenerationStyle::QuestionThenCode,
            shots: ShotsSetting::Zero,
            temperature: g.temperature,
            max_tokens: g.max_tokens,
            sample_rows: g.sample_rows,
            top_candidates: g.top_candidates,
            max_prompt_tokens: g.max_prompt_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub variant: Variant,
    /// Trained model used to score executable insights; none skips scoring.
    pub model_path: Option<PathBuf>,
    pub swap: SwapScheme,
    pub train: TrainConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            variant: Variant::Concat,
            model_path: None,
            swap: SwapScheme::AdjacentSwap,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    pub svg: bool,
    /// Column-count bucket edges for the diversity curves.
    pub column_edges: Vec<usize>,
    pub strata: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            svg: true,
            column_edges: vec![4, 9, 14],
            strata: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    /// Tables processed concurrently.
    pub parallel: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            out_dir: PathBuf::from("runs"),
            cache_dir: None,
            parallel: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub endpoints: EndpointConfig,
    pub models: ModelConfig,
    pub generation: GenerationConfig,
    pub dsl: EvalLimits,
    pub classifier: ClassifierConfig,
    pub report: ReportConfig,
    pub run: RunConfig,
}

/// Replaces `${NAME}` with the value `lookup` returns; an unknown name is
/// an error. `$${` escapes a literal `${`.
fn interpolate(s: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<String, HarnessError> {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find("${") {
        if rest[..pos].ends_with('$') {
            out.push_str(&rest[..pos - 1]);
            out.push_str("${");
            rest = &rest[pos + 2..];
            continue;
        }
        out.push_str(&rest[..pos]);
        let after = &rest[pos + 2..];
        let end = after
            .find('}')
            .ok_or_else(|| HarnessError::Config(format!("unterminated ${{ in {s:?}")))?;
        let name = &after[..end];
        let value = lookup(name).ok_or_else(|| HarnessError::Config(format!("environment variable {name} is not set")))?;
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn interpolate_value(v: &mut toml::Value, lookup: &dyn Fn(&str) -> Option<String>) -> Result<(), HarnessError> {
    match v {
        toml::Value::String(s) => *s = interpolate(s, lookup)?,
        toml::Value::Array(items) => {
            for item in items {
                interpolate_value(item, lookup)?;
            }
        }
        toml::Value::Table(t) => {
            for (_, item) in t.iter_mut() {
                interpolate_value(item, lookup)?;
            }
        }
        _ => {}
    }
    Ok(())
}

impl Config {
    /// Parses TOML, substituting `${VAR}` in string values through `lookup`.
    pub fn parse_with(text: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<Config, HarnessError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        for (_, v) in table.iter_mut() {
            interpolate_value(v, lookup)?;
        }
        let cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Config, HarnessError> {
        Config::parse_with(text, &|name| std::env::var(name).ok())
    }

    pub fn load(path: &Path) -> Result<Config, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        let g = &self.generation;
        if g.n_insights == 0 {
            return bad("generation.n_insights must be at least 1");
        }
        if !(0.0..=2.0).contains(&g.temperature) {
            return bad("generation.temperature must lie in [0, 2]");
        }
        if self.run.parallel == 0 {
            return bad("run.parallel must be at least 1");
        }
        if self.dsl.max_rows == 0 || self.dsl.max_steps == 0 || self.dsl.timeout_ms == 0 {
            return bad("dsl limits must be positive");
        }
        if self.models.embedding_dim == 0 || self.models.mock_embedding_dim == 0 {
            return bad("embedding dimensions must be positive");
        }
        let t = &self.classifier.train;
        if !(t.split_ratio > 0.0 && t.split_ratio < 1.0) {
            return bad("classifier.train.split_ratio must lie in (0, 1)");
        }
        if !(t.threshold > 0.0 && t.threshold < 1.0) {
            return bad("classifier.train.threshold must lie in (0, 1)");
        }
        let e = &self.report.column_edges;
        if e.is_empty() || e.windows(2).any(|w| w[0] >= w[1]) {
            return bad("report.column_edges must be strictly increasing and non-empty");
        }
        if self.report.strata == 0 {
            return bad("report.strata must be at least 1");
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, leaving out the `run`
    /// section (output location and parallelism do not change results).
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = value.as_object_mut() {
            m.remove("run");
        }
        let json = serde_json::to_vec(&value).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn gen_options(&self, seed: u64) -> GenOptions {
        let g = &self.generation;
        GenOptions {
            model: self.models.chat.clone(),
            temperature: g.temperature,
            max_tokens: g.max_tokens,
            sample_rows: g.sample_rows,
            top_candidates: g.top_candidates,
            max_prompt_tokens: g.max_prompt_tokens,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(name: &str) -> Option<String> {
        (name == "CACHE_ROOT").then(|| "/tmp/cache".to_string())
    }

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(Config::parse_with("", &env).unwrap(), Config::default());
    }

    #[test]
    fn sections_and_interpolation() {
        let text = r#"
            [generation]
            n_insights = 10
            style = "code_only"
            shots = "one"

            [classifier]
            variant = "cosine_projection"
            swap = { scheme = "all_pairs", cap = 100 }

            [classifier.train]
            epochs = 5

            [run]
            cache_dir = "${CACHE_ROOT}/insights"
            parallel = 2
        "#;
        let cfg = Config::parse_with(text, &env).unwrap();
        assert_eq!(cfg.generation.n_insights, 10);
        assert_eq!(cfg.generation.style, GenerationStyle::CodeOnly);
        assert_eq!(cfg.classifier.variant, Variant::CosineProjection);
        assert_eq!(cfg.classifier.swap, SwapScheme::AllPairs { cap: Some(100) });
        assert_eq!(cfg.classifier.train.epochs, 5);
        assert_eq!(cfg.classifier.train.batch_size, 32);
        assert_eq!(cfg.run.cache_dir, Some(PathBuf::from("/tmp/cache/insights")));
    }

    #[test]
    fn rejects_unknown_keys_missing_variables_and_bad_values() {
        assert!(Config::parse_with("[generation]\nn_insight = 3", &env).is_err());
        assert!(Config::parse_with("bogus = 1", &env).is_err());
        let e = Config::parse_with("[run]\ncache_dir = \"${NOPE}\"", &env).unwrap_err();
        assert!(e.to_string().contains("NOPE"));
        assert!(Config::parse_with("[generation]\nn_insights = 0", &env).is_err());
        assert!(Config::parse_with("[report]\ncolumn_edges = [9, 4]", &env).is_err());
    }

    #[test]
    fn escape_and_hash() {
        let cfg = Config::parse_with("[endpoints]\nchat_base_url = \"$${literal}\"", &env).unwrap();
        assert_eq!(cfg.endpoints.chat_base_url, "${literal}");
        assert_eq!(Config::default().hash(), Config::default().hash());
        assert_ne!(cfg.hash(), Config::default().hash());
        assert_eq!(cfg.hash().len(), 64);
        let mut moved = Config::default();
        moved.run.out_dir = "elsewhere".into();
        moved.run.parallel = 1;
        assert_eq!(moved.hash(), Config::default().hash());
    }
}

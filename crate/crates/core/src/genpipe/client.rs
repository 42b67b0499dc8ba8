use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::http::HttpConfig;
use super::prompt::estimate_tokens;
use super::GenError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// Hex SHA-256 of the canonical JSON encoding of the request.
    pub fn cache_key(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn system_text(&self) -> &str {
        self.messages
            .iter()
            .find(|m| m.role == "system")
            .map_or("", |m| m.content.as_str())
    }

    pub fn user_text(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub request: ChatRequest,
    pub response: ChatResponse,
    pub wall_ms: u64,
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GenError>;
}

impl<T: ChatClient + ?Sized> ChatClient for &T {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GenError> {
        (**self).complete(request)
    }
}

impl<T: ChatClient + ?Sized> ChatClient for Box<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GenError> {
        (**self).complete(request)
    }
}

impl<T: ChatClient + ?Sized> ChatClient for Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GenError> {
        (**self).complete(request)
    }
}

/// Client for `POST {base_url}/chat/completions`.
pub struct OpenAiChatClient {
    http: HttpConfig,
}

impl OpenAiChatClient {
    pub fn new(http: HttpConfig) -> Self {
        OpenAiChatClient { http }
    }
}

impl ChatClient for OpenAiChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GenError> {
        let started = Instant::now();
        let body = serde_json::to_value(request).map_err(|e| GenError::InvalidSpec(e.to_string()))?;
        let v = self.http.post_json("chat/completions", &body)?;
        let text = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| GenError::BadResponse("missing choices[0].message.content".into()))?;
        Ok(ChatResponse {
            text: text.to_string(),
            prompt_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
            wall_ms: started.elapsed().as_millis() as u64,
        })
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub attempts: u32,
    pub base_delay_ms: u64,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay_ms: 1000,
            jitter: 0.2,
            seed: 0,
        }
    }
}

/// Retries transient failures with exponential backoff (base, 2x, 4x, ...)
/// and multiplicative jitter.
pub struct RetryingClient<C> {
    inner: C,
    policy: RetryPolicy,
    sleeper: Box<dyn Sleeper>,
    rng: Mutex<ChaCha8Rng>,
}

impl<C: ChatClient> RetryingClient<C> {
    pub fn new(inner: C, policy: RetryPolicy, sleeper: Box<dyn Sleeper>) -> Self {
        let rng = Mutex::new(ChaCha8Rng::seed_from_u64(policy.seed));
        RetryingClient {
            inner,
            policy,
            sleeper,
            rng,
        }
    }

    fn delay(&self, retry: u32) -> Duration {
        let base = self.policy.base_delay_ms as f64 * 2f64.powi(retry as i32);
        let j = self.policy.jitter;
        let factor = if j > 0.0 {
            1.0 + self.rng.lock().expect("rng lock").random_range(-j..=j)
        } else {
            1.0
        };
        Duration::from_millis((base * factor).round() as u64)
    }
}

impl<C: ChatClient> ChatClient for RetryingClient<C> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GenError> {
        let attempts = self.policy.attempts.max(1);
        let mut attempt = 0;
        loop {
            match self.inner.complete(request) {
                Ok(r) => return Ok(r),
                Err(e) if e.is_transient() && attempt + 1 < attempts => {
                    log::warn!("chat request failed ({e}), retrying");
                    self.sleeper.sleep(self.delay(attempt));
                    attempt += 1;
                }
                Err(GenError::ApiError { status: 429, .. }) => return Err(GenError::RateLimited),
                Err(e) => return Err(e),
            }
        }
    }
}

/// Memoizes responses by request hash, in memory and optionally on disk
/// as one JSON file per key.
pub struct CachedClient<C> {
    inner: C,
    dir: Option<PathBuf>,
    mem: RwLock<HashMap<String, ChatResponse>>,
    write_lock: Mutex<()>,
    hits: AtomicUsize,
}

impl<C: ChatClient> CachedClient<C> {
    pub fn new(inner: C, dir: Option<PathBuf>) -> Result<Self, GenError> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| GenError::Cache(e.to_string()))?;
        }
        Ok(CachedClient {
            inner,
            dir,
            mem: RwLock::new(HashMap::new()),
            write_lock: Mutex::new(()),
            hits: AtomicUsize::new(0),
        })
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    fn load(&self, key: &str) -> Option<ChatResponse> {
        if let Some(r) = self.mem.read().expect("cache lock").get(key) {
            return Some(r.clone());
        }
        let path = self.dir.as_ref()?.join(format!("{key}.json"));
        let text = fs::read_to_string(path).ok()?;
        serde_json::from_str(&text).ok()
    }

    fn store(&self, key: &str, r: &ChatResponse) -> Result<(), GenError> {
        let _guard = self.write_lock.lock().expect("cache write lock");
        self.mem.write().expect("cache lock").insert(key.to_string(), r.clone());
        if let Some(d) = &self.dir {
            let tmp = d.join(format!("{key}.json.tmp"));
            let text = serde_json::to_string(r).map_err(|e| GenError::Cache(e.to_string()))?;
            fs::write(&tmp, text).map_err(|e| GenError::Cache(e.to_string()))?;
            fs::rename(&tmp, d.join(format!("{key}.json"))).map_err(|e| GenError::Cache(e.to_string()))?;
        }
        Ok(())
    }
}

impl<C: ChatClient> ChatClient for CachedClient<C> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GenError> {
        let key = request.cache_key();
        if let Some(r) = self.load(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(r);
        }
        let r = self.inner.complete(request)?;
        self.store(&key, &r)?;
        Ok(r)
    }
}

/// Replays a fixed script of outcomes, then repeats a fallback reply.
pub struct ScriptedClient {
    script: Mutex<VecDeque<Result<String, GenError>>>,
    fallback: Option<String>,
    calls: AtomicUsize,
    requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedClient {
    pub fn constant(text: impl Into<String>) -> Self {
        ScriptedClient::new(Vec::new(), Some(text.into()))
    }

    pub fn new(script: Vec<Result<String, GenError>>, fallback: Option<String>) -> Self {
        ScriptedClient {
            script: Mutex::new(script.into()),
            fallback,
            calls: AtomicUsize::new(0),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().expect("requests lock").clone()
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GenError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.requests.lock().expect("requests lock").push(request.clone());
        let next = self.script.lock().expect("script lock").pop_front();
        let text = match next {
            Some(outcome) => outcome?,
            None => self
                .fallback
                .clone()
                .ok_or_else(|| GenError::Transport("script exhausted".into()))?,
        };
        let prompt: usize = request.messages.iter().map(|m| estimate_tokens(&m.content)).sum();
        Ok(ChatResponse {
            prompt_tokens: prompt as u64,
            completion_tokens: estimate_tokens(&text) as u64,
            wall_ms: 0,
            text,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct RecordingSleeper(Arc<Mutex<Vec<Duration>>>);

    impl Sleeper for RecordingSleeper {
        fn sleep(&self, d: Duration) {
            self.0.lock().unwrap().push(d);
        }
    }

    fn request() -> ChatRequest {
        ChatRequest {
            model: "m".into(),
            messages: vec![ChatMessage::system("s"), ChatMessage::user("u")],
            temperature: 0.7,
            max_tokens: 100,
        }
    }

    fn server_error() -> Result<String, GenError> {
        Err(GenError::ApiError {
            status: 500,
            message: "boom".into(),
        })
    }

    #[test]
    fn cache_hits_on_repeat() {
        let canned = "Q1: How many rows?\nC1: len(table)\nQ2: Max year?\nC2: table['Year'].max()";
        let client = CachedClient::new(ScriptedClient::constant(canned), None).unwrap();
        let a = client.complete(&request()).unwrap();
        let b = client.complete(&request()).unwrap();
        assert_eq!(a.text, canned);
        assert_eq!(a, b);
        assert_eq!(client.hits(), 1);
        assert_eq!(client.inner.calls(), 1);
    }

    #[test]
    fn disk_cache_survives_new_client() {
        let dir = tempfile::tempdir().unwrap();
        let first = CachedClient::new(ScriptedClient::constant("x"), Some(dir.path().into())).unwrap();
        first.complete(&request()).unwrap();
        let second = CachedClient::new(ScriptedClient::constant("y"), Some(dir.path().into())).unwrap();
        assert_eq!(second.complete(&request()).unwrap().text, "x");
        assert_eq!(second.inner.calls(), 0);
    }

    #[test]
    fn three_server_errors_exhaust_retries() {
        let slept = Arc::new(Mutex::new(Vec::new()));
        let inner = ScriptedClient::new(vec![server_error(), server_error(), server_error()], Some("late".into()));
        let client = RetryingClient::new(inner, RetryPolicy::default(), Box::new(RecordingSleeper(slept.clone())));
        let err = client.complete(&request()).unwrap_err();
        assert!(matches!(err, GenError::ApiError { status: 500, .. }));
        assert_eq!(client.inner.calls(), 3);
        let delays = slept.lock().unwrap().clone();
        assert_eq!(delays.len(), 2);
        assert!((800..=1200).contains(&(delays[0].as_millis() as u64)));
        assert!((1600..=2400).contains(&(delays[1].as_millis() as u64)));
    }

    #[test]
    fn recovery_and_non_transient_errors() {
        let slept = Arc::new(Mutex::new(Vec::new()));
        let inner = ScriptedClient::new(vec![Err(GenError::Timeout)], Some("ok".into()));
        let client = RetryingClient::new(inner, RetryPolicy::default(), Box::new(RecordingSleeper(slept.clone())));
        assert_eq!(client.complete(&request()).unwrap().text, "ok");

        let inner = ScriptedClient::new(
            vec![Err(GenError::ApiError {
                status: 401,
                message: "no".into(),
            })],
            Some("ok".into()),
        );
        let client = RetryingClient::new(inner, RetryPolicy::default(), Box::new(RecordingSleeper(slept)));
        assert!(matches!(client.complete(&request()), Err(GenError::ApiError { status: 401, .. })));
        assert_eq!(client.inner.calls(), 1);
    }

    #[test]
    fn throttling_maps_to_rate_limited() {
        let slept = Arc::new(Mutex::new(Vec::new()));
        let throttled = || {
            Err(GenError::ApiError {
                status: 429,
                message: String::new(),
            })
        };
        let inner = ScriptedClient::new(vec![throttled(), throttled(), throttled()], None);
        let client = RetryingClient::new(inner, RetryPolicy::default(), Box::new(RecordingSleeper(slept)));
        assert_eq!(client.complete(&request()), Err(GenError::RateLimited));
    }

    #[test]
    fn cache_key_depends_on_every_field() {
        let base = request();
        let mut other = base.clone();
        other.temperature = 0.2;
        assert_ne!(base.cache_key(), other.cache_key());
        let mut other = base.clone();
        other.max_tokens = 5;
        assert_ne!(base.cache_key(), other.cache_key());
        assert_eq!(base.cache_key(), request().cache_key());
    }
}

//! Uniform interface to chat-completion and text-embedding services:
//! prompt templating, response parsing, content-hash caching, retries, a
//! token-bucket rate limiter, and deterministic mocks for offline runs.

pub mod cache;
pub mod http;
pub mod mock;
pub mod parse;
pub mod templates;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use cache::ResponseCache;
use parse::{parse_structured, ParsedResponse};
use templates::{render, TemplateId};

/// One chat-completion request: a template plus its variable bindings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub template_id: TemplateId,
    pub variables: BTreeMap<String, String>,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(template_id: TemplateId, variables: BTreeMap<String, String>) -> Self {
        ChatRequest {
            template_id,
            variables,
            max_output_tokens: 1024,
            temperature: 0.0,
        }
    }

    pub fn rendered(&self) -> Result<String> {
        render(self.template_id, &self.variables)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRequest {
    pub texts: Vec<String>,
}

impl EmbeddingRequest {
    pub fn new(texts: Vec<String>) -> Self {
        EmbeddingRequest { texts }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    HttpChat,
    HttpEmbed,
    Mock,
}

/// Configuration for one provider endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default)]
    pub endpoint: String,
    pub model_name: String,
    #[serde(default)]
    pub auth_env_var: String,
    /// Requests per minute.
    #[serde(default = "default_rate_limit")]
    pub rate_limit: u32,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub cache_dir: String,
    /// Mock-only: deterministic fraction of chat calls that fail, in [0,1].
    #[serde(default, skip_serializing_if = "is_zero")]
    pub failure_rate: f64,
    /// Seed for mock behavior; ignored by HTTP providers.
    #[serde(default)]
    pub seed: u64,
}

fn default_rate_limit() -> u32 {
    6000
}

fn default_max_retries() -> u32 {
    2
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl ProviderConfig {
    pub fn mock(model_name: &str, seed: u64) -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            endpoint: String::new(),
            model_name: model_name.to_string(),
            auth_env_var: String::new(),
            rate_limit: default_rate_limit(),
            max_retries: default_max_retries(),
            cache_dir: String::new(),
            failure_rate: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rate_limit == 0 {
            return Err(Error::Config("rate_limit must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.failure_rate) {
            return Err(Error::Config("failure_rate must be in [0,1]".into()));
        }
        if matches!(self.kind, ProviderKind::HttpChat | ProviderKind::HttpEmbed)
            && self.endpoint.is_empty()
        {
            return Err(Error::Config("http provider requires an endpoint".into()));
        }
        Ok(())
    }
}

/// Call counters observable by tests and run manifests.
#[derive(Debug, Default)]
pub struct ProviderStats {
    pub requests: AtomicU64,
    pub network_calls: AtomicU64,
    pub cache_hits: AtomicU64,
    pub failures: AtomicU64,
}

impl ProviderStats {
    pub fn snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            requests: self.requests.load(Ordering::SeqCst),
            network_calls: self.network_calls.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
            failures: self.failures.load(Ordering::SeqCst),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StatsSnapshot {
    pub requests: u64,
    pub network_calls: u64,
    pub cache_hits: u64,
    pub failures: u64,
}

/// Transport-level backend behind the caching/retry wrapper.
pub trait ChatBackend: Send + Sync {
    /// One attempt. `rendered` is the full prompt; mocks may also inspect
    /// the structured request.
    fn call(&self, request: &ChatRequest, rendered: &str) -> std::result::Result<String, String>;

    /// True when a call consumes network; drives the network_calls counter.
    fn uses_network(&self) -> bool {
        false
    }
}

pub trait EmbedBackend: Send + Sync {
    fn call(&self, texts: &[String]) -> std::result::Result<Vec<Vec<f64>>, String>;

    fn uses_network(&self) -> bool {
        false
    }
}

/// Token bucket granting `rate_limit` requests per minute with bursts up to
/// one minute's allowance.
struct TokenBucket {
    capacity: f64,
    refill_per_sec: f64,
    state: Mutex<BucketState>,
}

struct BucketState {
    tokens: f64,
    last: Instant,
}

impl TokenBucket {
    fn new(rate_per_minute: u32) -> Self {
        let capacity = rate_per_minute as f64;
        TokenBucket {
            capacity,
            refill_per_sec: capacity / 60.0,
            state: Mutex::new(BucketState {
                tokens: capacity,
                last: Instant::now(),
            }),
        }
    }

    /// Time to wait before the next request may proceed. Takes the token.
    fn reserve(&self) -> Duration {
        let mut state = self.state.lock().unwrap();
        let now = Instant::now();
        let elapsed = now.duration_since(state.last).as_secs_f64();
        state.tokens = (state.tokens + elapsed * self.refill_per_sec).min(self.capacity);
        state.last = now;
        if state.tokens >= 1.0 {
            state.tokens -= 1.0;
            Duration::ZERO
        } else {
            let deficit = 1.0 - state.tokens;
            state.tokens -= 1.0;
            Duration::from_secs_f64(deficit / self.refill_per_sec)
        }
    }

    fn acquire(&self) {
        let wait = self.reserve();
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// A chat provider: rendering, caching, rate limiting, and retries around a
/// backend. Safe for concurrent use.
pub struct ChatProvider {
    config: ProviderConfig,
    backend: Box<dyn ChatBackend>,
    cache: Option<ResponseCache>,
    limiter: TokenBucket,
    pub stats: Arc<ProviderStats>,
}

const RETRY_BACKOFF: Duration = Duration::from_millis(50);

/// Appended to the rendered prompt when retrying after a parse failure, so
/// the retry gets a fresh cache key.
const FORMAT_REMINDER: &str =
    "\n\nReminder: follow the required output format exactly, with no extra commentary.";

impl ChatProvider {
    pub fn from_config(config: ProviderConfig) -> Result<ChatProvider> {
        config.validate()?;
        let backend: Box<dyn ChatBackend> = match config.kind {
            ProviderKind::Mock => Box::new(mock::RuleMockChat::new(config.seed, config.failure_rate)),
            ProviderKind::HttpChat => Box::new(http::HttpChat::new(&config)?),
            ProviderKind::HttpEmbed => {
                return Err(Error::Config("http_embed is not a chat provider kind".into()))
            }
        };
        Ok(Self::with_backend(config, backend))
    }

    pub fn with_backend(config: ProviderConfig, backend: Box<dyn ChatBackend>) -> ChatProvider {
        let cache = if config.cache_dir.is_empty() {
            None
        } else {
            Some(ResponseCache::new(config.cache_dir.clone()))
        };
        let limiter = TokenBucket::new(config.rate_limit);
        ChatProvider {
            config,
            backend,
            cache,
            limiter,
            stats: Arc::new(ProviderStats::default()),
        }
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    /// Raw chat: render, check cache, then call the backend with retries.
    pub fn chat(&self, request: &ChatRequest) -> Result<String> {
        let rendered = request.rendered()?;
        self.chat_rendered(request, &rendered)
    }

    fn chat_rendered(&self, request: &ChatRequest, rendered: &str) -> Result<String> {
        self.stats.requests.fetch_add(1, Ordering::SeqCst);
        let key = ResponseCache::chat_key(
            &self.config.model_name,
            rendered,
            request.temperature,
            request.max_output_tokens,
        );
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key) {
                self.stats.cache_hits.fetch_add(1, Ordering::SeqCst);
                return Ok(hit);
            }
        }
        let attempts = self.config.max_retries + 1;
        let mut last_err = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(RETRY_BACKOFF);
            }
            self.limiter.acquire();
            if self.backend.uses_network() {
                self.stats.network_calls.fetch_add(1, Ordering::SeqCst);
            }
            match self.backend.call(request, rendered) {
                Ok(text) => {
                    if let Some(cache) = &self.cache {
                        cache.put(&key, &text)?;
                    }
                    return Ok(text);
                }
                Err(e) => last_err = e,
            }
        }
        self.stats.failures.fetch_add(1, Ordering::SeqCst);
        Err(Error::Provider {
            attempts,
            message: last_err,
        })
    }

    /// Chat plus structured parsing, with one retry-with-reminder on parse
    /// failure. Transport failures inside each chat are retried separately.
    pub fn chat_parsed(&self, request: &ChatRequest) -> Result<ParsedResponse> {
        let raw = self.chat(request)?;
        match parse_structured(request.template_id, &raw) {
            Ok(parsed) => Ok(parsed),
            Err(_) => {
                let rendered = request.rendered()?;
                let reminded = format!("{rendered}{FORMAT_REMINDER}");
                let raw = self.chat_rendered(request, &reminded)?;
                parse_structured(request.template_id, &raw)
            }
        }
    }
}

/// An embedding provider. Returned vectors are L2-normalized here,
/// regardless of backend.
pub struct Embedder {
    config: ProviderConfig,
    backend: Box<dyn EmbedBackend>,
    limiter: TokenBucket,
    pub stats: Arc<ProviderStats>,
}

impl Embedder {
    pub fn from_config(config: ProviderConfig) -> Result<Embedder> {
        config.validate()?;
        let backend: Box<dyn EmbedBackend> = match config.kind {
            ProviderKind::Mock => Box::new(mock::HashEmbedder::new(config.seed)),
            ProviderKind::HttpEmbed => Box::new(http::HttpEmbed::new(&config)?),
            ProviderKind::HttpChat => {
                return Err(Error::Config("http_chat is not an embedding provider kind".into()))
            }
        };
        Ok(Self::with_backend(config, backend))
    }

    pub fn with_backend(config: ProviderConfig, backend: Box<dyn EmbedBackend>) -> Embedder {
        let limiter = TokenBucket::new(config.rate_limit);
        Embedder {
            config,
            backend,
            limiter,
            stats: Arc::new(ProviderStats::default()),
        }
    }

    pub fn embed(&self, request: &EmbeddingRequest) -> Result<Vec<Vec<f64>>> {
        if request.texts.is_empty() {
            return Err(Error::contract("embedding request requires at least one text"));
        }
        if request.texts.iter().any(|t| t.trim().is_empty()) {
            return Err(Error::contract("embedding request texts must be non-empty"));
        }
        self.stats.requests.fetch_add(1, Ordering::SeqCst);
        let attempts = self.config.max_retries + 1;
        let mut last_err = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(RETRY_BACKOFF);
            }
            self.limiter.acquire();
            if self.backend.uses_network() {
                self.stats.network_calls.fetch_add(1, Ordering::SeqCst);
            }
            match self.backend.call(&request.texts) {
                Ok(vectors) => return normalize_batch(vectors, request.texts.len()),
                Err(e) => last_err = e,
            }
        }
        self.stats.failures.fetch_add(1, Ordering::SeqCst);
        Err(Error::Provider {
            attempts,
            message: last_err,
        })
    }
}

fn normalize_batch(vectors: Vec<Vec<f64>>, expected: usize) -> Result<Vec<Vec<f64>>> {
    if vectors.len() != expected {
        return Err(Error::Provider {
            attempts: 1,
            message: format!("backend returned {} vectors for {expected} texts", vectors.len()),
        });
    }
    let dim = vectors.first().map(|v| v.len()).unwrap_or(0);
    let mut out = Vec::with_capacity(vectors.len());
    for mut v in vectors {
        if v.len() != dim || dim == 0 {
            return Err(Error::Provider {
                attempts: 1,
                message: format!("embedding dimension mismatch: {} vs {dim}", v.len()),
            });
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Provider {
                attempts: 1,
                message: "zero-norm embedding".to_string(),
            });
        }
        for x in &mut v {
            *x /= norm;
        }
        out.push(v);
    }
    Ok(out)
}

/// Cosine similarity of two unit vectors (a plain dot product).
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::CodeUnit;
use crate::promptgen::PromptBundle;
use crate::types::estimate_tokens;

use super::{extract_comment, ChatRequest, GeneratedComment, LlmError, ModelSpec, Provider, RequestMeta};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub temperature: f64,
    pub max_output_tokens: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            temperature: 0.0,
            max_output_tokens: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

/// Counting semaphore bounding requests in flight across clients.
#[derive(Debug)]
pub struct Limiter {
    max: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

impl Limiter {
    pub fn new(max: usize) -> Arc<Limiter> {
        Arc::new(Limiter {
            max: max.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        })
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.max {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        Permit(self)
    }

    pub fn in_flight(&self) -> usize {
        *self.in_flight.lock().unwrap()
    }
}

#[derive(Serialize, Deserialize)]
struct CachedReply {
    model: String,
    text: String,
}

/// Content-addressed reply store. Lookups for the same key are serialized so
/// concurrent identical requests reach the provider once.
#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Arc<ResponseCache> {
        Arc::new(ResponseCache {
            dir: dir.into(),
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn key(spec: &ModelSpec, params: &GenParams, prompt: &str) -> String {
        let mut h = Sha256::new();
        for part in [spec.name.as_str(), spec.endpoint.as_str(), spec.wire_model()] {
            h.update(part.as_bytes());
            h.update([0]);
        }
        h.update(params.temperature.to_le_bytes());
        h.update((params.max_output_tokens as u64).to_le_bytes());
        h.update(prompt.as_bytes());
        hex::encode(h.finalize())
    }

    fn lock_for(&self, key: &str) -> Arc<Mutex<()>> {
        self.locks.lock().unwrap().entry(key.to_string()).or_default().clone()
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn get(&self, key: &str, model: &str) -> Option<String> {
        let text = fs::read_to_string(self.path(key)).ok()?;
        let r: CachedReply = serde_json::from_str(&text).ok()?;
        (r.model == model).then_some(r.text)
    }

    fn put(&self, key: &str, model: &str, text: &str) -> Result<(), LlmError> {
        let err = |e| LlmError::Cache(self.dir.clone(), e);
        fs::create_dir_all(&self.dir).map_err(err)?;
        let body = serde_json::to_string(&CachedReply {
            model: model.to_string(),
            text: text.to_string(),
        })
        .expect("serializable");
        let tmp = self.dir.join(format!(".{key}.{:?}.tmp", thread::current().id()));
        fs::write(&tmp, body).map_err(err)?;
        fs::rename(&tmp, self.path(key)).map_err(err)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub latency_ms: u64,
    pub cached: bool,
}

pub struct Client {
    pub spec: ModelSpec,
    provider: Arc<dyn Provider>,
    cache: Option<Arc<ResponseCache>>,
    retry: RetryPolicy,
    limiter: Arc<Limiter>,
    pub params: GenParams,
}

impl Client {
    pub fn new(spec: ModelSpec, provider: Arc<dyn Provider>) -> Client {
        Client {
            spec,
            provider,
            cache: None,
            retry: RetryPolicy::default(),
            limiter: Limiter::new(4),
            params: GenParams::default(),
        }
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_limiter(mut self, limiter: Arc<Limiter>) -> Self {
        self.limiter = limiter;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_params(mut self, params: GenParams) -> Self {
        self.params = params;
        self
    }

    pub fn complete_prompt(&self, prompt: &str, meta: &RequestMeta) -> Result<Completion, LlmError> {
        let needed = estimate_tokens(prompt) + self.params.max_output_tokens;
        if needed > self.spec.context_window {
            return Err(LlmError::ContextOverflow {
                model: self.spec.name.clone(),
                needed,
                window: self.spec.context_window,
            });
        }
        let key = ResponseCache::key(&self.spec, &self.params, prompt);
        let key_lock = self.cache.as_ref().map(|c| c.lock_for(&key));
        let _guard = key_lock.as_ref().map(|l| l.lock().unwrap());
        if let Some(text) = self.cache.as_ref().and_then(|c| c.get(&key, &self.spec.name)) {
            return Ok(Completion {
                text,
                latency_ms: 0,
                cached: true,
            });
        }

        let req = ChatRequest {
            prompt: prompt.to_string(),
            temperature: self.params.temperature,
            max_output_tokens: self.params.max_output_tokens,
            meta: meta.clone(),
        };
        let started = Instant::now();
        let text = {
            let _permit = self.limiter.acquire();
            self.call_with_retries(&req, needed)?
        };
        let latency_ms = started.elapsed().as_millis() as u64;
        if let Some(c) = &self.cache {
            c.put(&key, &self.spec.name, &text)?;
        }
        Ok(Completion {
            text,
            latency_ms,
            cached: false,
        })
    }

    fn call_with_retries(&self, req: &ChatRequest, needed: usize) -> Result<String, LlmError> {
        let mut attempt = 0;
        loop {
            match self.provider.complete(req) {
                Err(LlmError::Transient(msg)) if attempt < self.retry.max_retries => {
                    let delay = self.retry.base_delay * 2u32.pow(attempt);
                    log::warn!("{}: {msg}; retrying in {delay:?}", self.spec.name);
                    thread::sleep(delay);
                    attempt += 1;
                }
                Err(LlmError::ContextOverflow { model, window, .. }) => {
                    return Err(LlmError::ContextOverflow { model, needed, window })
                }
                other => return other,
            }
        }
    }

    /// Sends a prompt bundle and extracts one comment per target unit.
    pub fn complete(&self, bundle: &PromptBundle, units: &[&CodeUnit]) -> Result<Vec<GeneratedComment>, LlmError> {
        let meta = RequestMeta {
            targets: bundle.targets.clone(),
            setup: Some(bundle.setup),
            pass_index: bundle.pass_index,
        };
        let c = self.complete_prompt(&bundle.render(), &meta)?;
        units
            .iter()
            .map(|u| {
                let e = extract_comment(&c.text, u)?;
                let text = e.comment.clone().unwrap_or_default();
                Ok(GeneratedComment {
                    unit_id: u.id.clone(),
                    model: self.spec.name.clone(),
                    setup: bundle.setup,
                    pass_index: bundle.pass_index,
                    empty: text.trim().is_empty(),
                    text,
                    raw_comment: e.raw_comment,
                    annotated_file: e.annotated_file,
                    latency_ms: c.latency_ms,
                    cached: c.cached,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llmclient::provider::tests::{ok_body, serve, spec};
    use crate::llmclient::{HttpProvider, MockProvider, Registry};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn mock_client() -> Client {
        let spec = Registry::builtin().get("mock").unwrap().clone();
        Client::new(spec, Arc::new(MockProvider::fixed("/* heap comparator */")))
    }

    #[test]
    fn second_identical_request_is_cached() {
        let d = tempfile::tempdir().unwrap();
        let client = mock_client().with_cache(ResponseCache::new(d.path()));
        let a = client.complete_prompt("p", &RequestMeta::default()).unwrap();
        let b = client.complete_prompt("p", &RequestMeta::default()).unwrap();
        assert!(!a.cached && b.cached);
        assert_eq!(a.text, b.text);
        let stored = fs::read_dir(d.path()).unwrap().count();
        assert_eq!(stored, 1);
    }

    #[test]
    fn oversize_prompt_overflows_before_sending() {
        let client = mock_client();
        let prompt = "x".repeat(4 * 40_000);
        assert!(matches!(
            client.complete_prompt(&prompt, &RequestMeta::default()),
            Err(LlmError::ContextOverflow { .. })
        ));
    }

    #[test]
    fn transient_failures_are_retried() {
        let (url, seen) = serve(vec![(503, "busy".into()), (429, "slow".into()), (200, ok_body("done"))]);
        let client = Client::new(spec(&url, None), Arc::new(HttpProvider::new(&spec(&url, None)).unwrap()))
            .with_retry(RetryPolicy {
                max_retries: 3,
                base_delay: Duration::from_millis(1),
            });
        let c = client.complete_prompt("p", &RequestMeta::default()).unwrap();
        assert_eq!(c.text, "done");
        assert_eq!(seen.lock().unwrap().len(), 3);
    }

    struct AlwaysBusy(AtomicUsize);

    impl Provider for AlwaysBusy {
        fn complete(&self, _: &ChatRequest) -> Result<String, LlmError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Err(LlmError::Transient("busy".into()))
        }
    }

    #[test]
    fn retries_stop_after_three() {
        let p = Arc::new(AlwaysBusy(AtomicUsize::new(0)));
        let spec = Registry::builtin().get("mock").unwrap().clone();
        let client = Client::new(spec, p.clone()).with_retry(RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(1),
        });
        assert!(matches!(client.complete_prompt("p", &RequestMeta::default()), Err(LlmError::Transient(_))));
        assert_eq!(p.0.load(Ordering::SeqCst), 4);
    }

    struct Slow {
        limiter: Arc<Limiter>,
        peak: AtomicUsize,
    }

    impl Provider for Slow {
        fn complete(&self, _: &ChatRequest) -> Result<String, LlmError> {
            self.peak.fetch_max(self.limiter.in_flight(), Ordering::SeqCst);
            thread::sleep(Duration::from_millis(20));
            Ok("ok".into())
        }
    }

    #[test]
    fn in_flight_is_bounded() {
        let limiter = Limiter::new(2);
        let p = Arc::new(Slow {
            limiter: limiter.clone(),
            peak: AtomicUsize::new(0),
        });
        let spec = Registry::builtin().get("mock").unwrap().clone();
        let client = Arc::new(Client::new(spec, p.clone()).with_limiter(limiter));
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let c = client.clone();
                thread::spawn(move || c.complete_prompt(&format!("p{i}"), &RequestMeta::default()).unwrap())
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(p.peak.load(Ordering::SeqCst), 2);
    }
}

//! Judge scoring: an HTTP client for a chat-completions endpoint and an
//! offline keyword mock.
//!
//! Rubrics (prompt template plus mock keywords per trait) are data; the
//! defaults ship in `data/rubrics.json` and can be replaced from a file.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const API_KEY_ENV: &str = "TRAITGEO_JUDGE_KEY";
const DEFAULT_RUBRICS: &str = include_str!("../data/rubrics.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rubric {
    pub trait_name: String,
    /// Prompt with `{text}` (and optionally `{trait}`) placeholders.
    pub template: String,
    pub keywords: Vec<String>,
}

impl Rubric {
    pub fn render(&self, text: &str) -> String {
        self.template
            .replace("{trait}", &self.trait_name)
            .replace("{text}", text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricSet {
    pub rubrics: Vec<Rubric>,
}

impl RubricSet {
    pub fn defaults() -> Self {
        serde_json::from_str(DEFAULT_RUBRICS).expect("bundled rubrics are valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn get(&self, trait_idx: usize) -> Result<&Rubric> {
        self.rubrics
            .get(trait_idx)
            .ok_or_else(|| Error::InvalidParameter(format!("no rubric for trait {trait_idx}")))
    }
}

pub trait Judge: Send + Sync {
    /// Raw 1–5 verdict for `text` on the rubric's trait.
    fn judge(&self, text: &str, rubric: &Rubric) -> Result<f64>;
}

/// Scores one generation. Empty text is rejected before any request.
pub fn score_generation(judge: &dyn Judge, text: &str, rubric: &Rubric) -> Result<f64> {
    if text.trim().is_empty() {
        return Err(Error::InvalidParameter("empty generation text".into()));
    }
    let score = judge.judge(text, rubric)?;
    if (1.0..=5.0).contains(&score) {
        Ok(score)
    } else {
        Err(Error::UnparseableVerdict(score.to_string()))
    }
}

/// Whole-word, case-insensitive keyword occurrences in `text`.
pub fn keyword_hits(text: &str, keywords: &[String]) -> usize {
    keywords
        .iter()
        .filter(|k| !k.is_empty())
        .map(|k| {
            let re = Regex::new(&format!(r"(?i)\b{}\b", regex::escape(k))).expect("escaped keyword");
            re.find_iter(text).count()
        })
        .sum()
}

/// `clip(1 + hits, 1, 5)`. Pure: no I/O, no state.
pub fn mock_judge(text: &str, rubric: &Rubric) -> f64 {
    (1 + keyword_hits(text, &rubric.keywords)).min(5) as f64
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MockJudge;

impl Judge for MockJudge {
    fn judge(&self, text: &str, rubric: &Rubric) -> Result<f64> {
        Ok(mock_judge(text, rubric))
    }
}

/// Reads the first standalone number in a reply; it must lie in `[1, 5]`.
pub fn parse_verdict(reply: &str) -> Result<f64> {
    let re = Regex::new(r"(?:^|[^\w.])(-?\d+(?:\.\d+)?)(?:$|[^\w])").expect("static regex");
    let first = re
        .captures(reply)
        .and_then(|c| c.get(1))
        .ok_or_else(|| Error::UnparseableVerdict(reply.to_string()))?;
    match first.as_str().parse::<f64>() {
        Ok(x) if (1.0..=5.0).contains(&x) => Ok(x),
        _ => Err(Error::UnparseableVerdict(reply.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JudgeConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub max_concurrency: usize,
    /// First backoff delay; doubles after every failed attempt.
    pub backoff_base: Duration,
    /// Optional JSON-lines verdict log.
    pub verdict_log: Option<PathBuf>,
}

impl JudgeConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            timeout_secs: 30,
            max_retries: 3,
            max_concurrency: 4,
            backoff_base: Duration::from_millis(500),
            verdict_log: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_concurrency == 0 {
            return Err(Error::InvalidParameter("judge concurrency must be >= 1".into()));
        }
        if self.endpoint.is_empty() {
            return Err(Error::InvalidParameter("judge endpoint is empty".into()));
        }
        Ok(())
    }
}

/// Counting semaphore capping in-flight requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct HttpJudge {
    config: JudgeConfig,
    agent: ureq::Agent,
    slots: Slots,
    log: Option<Mutex<File>>,
}

enum Attempt {
    Transient(String),
    Fatal(Error),
}

impl HttpJudge {
    pub fn new(config: JudgeConfig) -> Result<Self> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let log = match &config.verdict_log {
            Some(p) => Some(Mutex::new(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .map_err(|e| Error::io(p, e))?,
            )),
            None => None,
        };
        Ok(Self {
            slots: Slots {
                free: Mutex::new(config.max_concurrency),
                cv: Condvar::new(),
            },
            config,
            agent,
            log,
        })
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.config.model,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": 0,
        })
    }

    fn attempt(&self, body: &Value) -> std::result::Result<String, Attempt> {
        let _slot = self.slots.acquire();
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| Attempt::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Transient(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(Attempt::Fatal(Error::JudgeUnavailable(format!("HTTP {status}"))));
        }
        let reply: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(Error::UnparseableVerdict(e.to_string())))?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Attempt::Fatal(Error::UnparseableVerdict(reply.to_string())))
    }

    fn log_verdict(&self, body: &Value, score: f64) {
        let Some(log) = &self.log else { return };
        let hash = hex::encode(Sha256::digest(body.to_string().as_bytes()));
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let line = json!({ "request_hash": hash, "score": score, "timestamp": ts });
        if let Ok(mut f) = log.lock() {
            let _ = writeln!(f, "{line}");
        }
    }
}

impl Judge for HttpJudge {
    fn judge(&self, text: &str, rubric: &Rubric) -> Result<f64> {
        let body = self.request_body(&rubric.render(text));
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                thread::sleep(self.config.backoff_base * 2u32.saturating_pow(attempt - 1));
            }
            match self.attempt(&body) {
                Ok(reply) => {
                    let score = parse_verdict(&reply)?;
                    self.log_verdict(&body, score);
                    return Ok(score);
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient(msg)) => last = msg,
            }
        }
        Err(Error::JudgeUnavailable(format!(
            "{} attempts failed, last: {last}",
            self.config.max_retries + 1
        )))
    }
}

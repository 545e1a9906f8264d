//! Language-model crossover: parents are normalized to `[0, 1]`, rendered into
//! a prompt, and the completion is parsed back into one offspring. After
//! `max_retries` failed attempts the classical operator takes over.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng as _, SeedableRng};
use serde_json::json;
use thiserror::Error;

use crate::moead::Solution;
use crate::scenario::{WindowBounds, WindowVector};
use crate::variation::{Rng, Sbx, Variation};

pub const ENDPOINT_VAR: &str = "LLM_ENDPOINT";
pub const KEY_VAR_VAR: &str = "LLM_API_KEY_VAR";
pub const MODEL_VAR: &str = "LLM_MODEL";

/// Components outside this range mean the model misunderstood the protocol.
const VALID_RANGE: (f64, f64) = (-0.5, 1.5);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("window bounds are degenerate ({0} = {0})")]
    DegenerateBounds(f64),
    #[error("no valid {dim}-component vector in response")]
    NoValidVector { dim: usize },
    #[error("request failed: {0}")]
    Transport(String),
    #[error("unexpected response shape: {0}")]
    Response(String),
    #[error("llm configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    pub api_key_var: String,
    pub temperature: f64,
    pub timeout: Duration,
    pub max_retries: usize,
    /// Minimum spacing between requests across all threads.
    pub min_interval: Duration,
}

impl LlmConfig {
    /// Reads `LLM_ENDPOINT`, `LLM_MODEL` and `LLM_API_KEY_VAR`.
    pub fn from_env() -> Result<Self, LlmError> {
        let var = |name: &str| std::env::var(name).map_err(|_| LlmError::Config(format!("{name} is not set")));
        Ok(Self {
            endpoint_url: var(ENDPOINT_VAR)?,
            model_name: var(MODEL_VAR)?,
            api_key_var: var(KEY_VAR_VAR)?,
            temperature: 0.7,
            timeout: Duration::from_secs(60),
            max_retries: 3,
            min_interval: Duration::from_millis(0),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub text: String,
    pub parents_normalized: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    pub dim: usize,
}

pub fn normalize(w: &WindowVector, bounds: WindowBounds) -> Result<Vec<f64>, LlmError> {
    if bounds.width() <= 0.0 {
        return Err(LlmError::DegenerateBounds(bounds.lower));
    }
    Ok(w.as_slice().iter().map(|x| (x - bounds.lower) / bounds.width()).collect())
}

/// Inverse of [`normalize`]; components outside `[0, 1]` are clamped.
pub fn denormalize(o: &[f64], bounds: WindowBounds) -> WindowVector {
    if o.iter().any(|x| !(0.0..=1.0).contains(x)) {
        log::warn!("normalized offspring {o:?} leaves [0, 1], clamping");
    }
    WindowVector::new(o.iter().map(|x| bounds.lower + x.clamp(0.0, 1.0) * bounds.width()).collect())
}

fn number_word(n: usize) -> String {
    const WORDS: [&str; 11] = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];
    WORDS.get(n).map_or_else(|| n.to_string(), |w| w.to_string())
}

fn span(values: &[f64]) -> String {
    let body: Vec<String> = values.iter().map(|v| format!("{v:.3}")).collect();
    format!("<start>{}<end>", body.join(","))
}

pub fn build_prompt(parents_normalized: &[Vec<f64>], values: &[Vec<f64>], dim: usize) -> PromptBundle {
    let objectives = values.first().map_or(0, Vec::len);
    let mut text = format!(
        "You will assist me in minimizing a {} objective task. The number of optimization variable is vector. \
         The dimension of each variable is {}. I have a set of variables along with their function values. \
         The vector start with <start> and end with <end>.\n\n",
        number_word(objectives),
        number_word(dim)
    );
    for (p, v) in parents_normalized.iter().zip(values) {
        let _ = writeln!(text, "vector: {}", span(p));
        let _ = writeln!(text, "value: {}", span(v));
    }
    text.push_str(
        "\nProvide a new vector that different from all the vectors listed above and function values smaller \
         than the smallest value among them. Avoid writing any code or providing explanations. Each output new \
         vector need to begin with <start> and end with <end>.",
    );
    PromptBundle { text, parents_normalized: parents_normalized.to_vec(), values: values.to_vec(), dim }
}

/// Every `<start>..<end>` span with exactly `dim` finite components, clamped to `[0, 1]`.
pub fn parse_response(text: &str, dim: usize) -> Result<Vec<Vec<f64>>, LlmError> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(s) = rest.find("<start>") {
        let after = &rest[s + "<start>".len()..];
        let Some(e) = after.find("<end>") else { break };
        if let Some(v) = parse_vector(&after[..e], dim) {
            out.push(v);
        }
        rest = &after[e + "<end>".len()..];
    }
    if out.is_empty() {
        Err(LlmError::NoValidVector { dim })
    } else {
        Ok(out)
    }
}

fn parse_vector(body: &str, dim: usize) -> Option<Vec<f64>> {
    let v: Vec<f64> = body.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().ok()?;
    if v.len() != dim || v.iter().any(|x| !x.is_finite() || *x < VALID_RANGE.0 || *x > VALID_RANGE.1) {
        return None;
    }
    Some(v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect())
}

pub trait CompletionClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

/// Offline stand-in: answers with the mean of the prompt's `vector:` lines
/// plus uniform jitter in `[-jitter, jitter]`, seeded from `seed` and the prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct MockClient {
    pub seed: u64,
    pub jitter: f64,
}

impl MockClient {
    pub fn new(seed: u64) -> Self {
        Self { seed, jitter: 0.05 }
    }
}

/// FNV-1a, stable across platforms and toolchains.
fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

impl CompletionClient for MockClient {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let parents: Vec<Vec<f64>> = prompt
            .lines()
            .filter_map(|l| l.trim().strip_prefix("vector:"))
            .filter_map(|l| parse_response(l, l.matches(',').count() + 1).ok())
            .flatten()
            .collect();
        let Some(first) = parents.first() else {
            return Ok("I could not find any vectors.".into());
        };
        let mut rng = Rng::seed_from_u64(self.seed ^ fnv1a(prompt));
        let mean: Vec<f64> = (0..first.len())
            .map(|i| {
                let m = parents.iter().map(|p| p[i]).sum::<f64>() / parents.len() as f64;
                let j = if self.jitter > 0.0 { rng.random_range(-self.jitter..=self.jitter) } else { 0.0 };
                (m + j).clamp(0.0, 1.0)
            })
            .collect();
        let body: Vec<String> = mean.iter().map(|x| x.to_string()).collect();
        Ok(format!("<start>{}<end>", body.join(",")))
    }
}

/// Chat-completions client over HTTP.
pub struct HttpClient {
    config: LlmConfig,
    agent: ureq::Agent,
    key: String,
    last_request: Mutex<Option<Instant>>,
}

impl HttpClient {
    pub fn new(config: LlmConfig) -> Result<Self, LlmError> {
        let key = std::env::var(&config.api_key_var)
            .map_err(|_| LlmError::Config(format!("API key variable {} is not set", config.api_key_var)))?;
        let agent = ureq::Agent::config_builder().timeout_global(Some(config.timeout)).build().into();
        Ok(Self { config, agent, key, last_request: Mutex::new(None) })
    }

    fn pace(&self) {
        let mut last = self.last_request.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = *last {
            let wait = self.config.min_interval.saturating_sub(t.elapsed());
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
        }
        *last = Some(Instant::now());
    }
}

impl CompletionClient for HttpClient {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        self.pace();
        let body = json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        });
        let value: serde_json::Value = self
            .agent
            .post(&self.config.endpoint_url)
            .header("Authorization", &format!("Bearer {}", self.key))
            .send_json(&body)
            .map_err(|e| LlmError::Transport(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| LlmError::Response("missing choices[0].message.content".into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MateOutcome {
    pub offspring: WindowVector,
    pub attempts: usize,
    pub fell_back: bool,
}

/// One LLM mating event: up to `max_retries` completions, then `fallback`.
pub fn llm_mate(
    parents: &[&Solution],
    bounds: WindowBounds,
    client: &dyn CompletionClient,
    max_retries: usize,
    fallback: &dyn Variation,
    rng: &mut Rng,
) -> MateOutcome {
    let dim = parents[0].windows.len();
    let normalized: Result<Vec<_>, _> =
        parents.iter().map(|p| normalize(&p.windows.clone().clamped(bounds), bounds)).collect();
    if let Ok(normalized) = normalized {
        let values: Vec<Vec<f64>> = parents.iter().map(|p| p.objectives.0.clone()).collect();
        let prompt = build_prompt(&normalized, &values, dim);
        for attempt in 1..=max_retries {
            match client.complete(&prompt.text).and_then(|r| parse_response(&r, dim)) {
                Ok(vectors) => {
                    return MateOutcome {
                        offspring: denormalize(&vectors[0], bounds),
                        attempts: attempt,
                        fell_back: false,
                    };
                }
                Err(e) => log::debug!("llm attempt {attempt}/{max_retries} failed: {e}"),
            }
        }
    }
    MateOutcome { offspring: fallback.mate(parents, bounds, rng), attempts: max_retries, fell_back: true }
}

/// [`llm_mate`] as a [`Variation`], counting calls and fallbacks.
pub struct LlmMate {
    name: String,
    client: Box<dyn CompletionClient>,
    fallback: Sbx,
    max_retries: usize,
    parents: usize,
    matings: AtomicUsize,
    fallbacks: AtomicUsize,
}

impl LlmMate {
    pub fn new(name: impl Into<String>, client: Box<dyn CompletionClient>, max_retries: usize) -> Self {
        Self {
            name: name.into(),
            client,
            fallback: Sbx::default(),
            max_retries: max_retries.max(1),
            parents: 2,
            matings: AtomicUsize::new(0),
            fallbacks: AtomicUsize::new(0),
        }
    }

    pub fn mock(seed: u64) -> Self {
        Self::new("mock-llm", Box::new(MockClient::new(seed)), 3)
    }

    /// Parents shown per prompt, 2 to 5.
    pub fn with_parents(mut self, parents: usize) -> Self {
        self.parents = parents.clamp(2, 5);
        self
    }

    pub fn matings(&self) -> usize {
        self.matings.load(Ordering::Relaxed)
    }

    pub fn fallbacks(&self) -> usize {
        self.fallbacks.load(Ordering::Relaxed)
    }
}

impl Variation for LlmMate {
    fn name(&self) -> &str {
        &self.name
    }

    fn parents_required(&self) -> usize {
        self.parents
    }

    fn mate(&self, parents: &[&Solution], bounds: WindowBounds, rng: &mut Rng) -> WindowVector {
        let out = llm_mate(parents, bounds, self.client.as_ref(), self.max_retries, &self.fallback, rng);
        self.matings.fetch_add(1, Ordering::Relaxed);
        if out.fell_back {
            self.fallbacks.fetch_add(1, Ordering::Relaxed);
        }
        out.offspring
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moead::ObjectiveVector;
    use crate::variation::Rng;
    use proptest::prelude::*;

    const B: WindowBounds = WindowBounds { lower: 20.0, upper: 150.0 };

    fn sol(w: &[f64]) -> Solution {
        Solution {
            windows: WindowVector::new(w.to_vec()),
            objectives: ObjectiveVector(vec![0.025, 0.034, 0.041, 64.0]),
        }
    }

    struct Canned(&'static str, AtomicUsize);

    impl CompletionClient for Canned {
        fn complete(&self, _: &str) -> Result<String, LlmError> {
            self.1.fetch_add(1, Ordering::Relaxed);
            Ok(self.0.to_string())
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&WindowVector::uniform(3, 20.0), B).unwrap(), vec![0.0; 3]);
        assert_eq!(normalize(&WindowVector::uniform(3, 150.0), B).unwrap(), vec![1.0; 3]);
        assert_eq!(normalize(&WindowVector::uniform(3, 85.0), B).unwrap(), vec![0.5; 3]);
        assert!(normalize(&WindowVector::uniform(3, 85.0), WindowBounds::new(5.0, 5.0)).is_err());
        assert_eq!(denormalize(&[0.0; 3], B), WindowVector::uniform(3, 20.0));
        assert_eq!(denormalize(&[0.5; 3], B), WindowVector::uniform(3, 85.0));
    }

    #[test]
    fn prompt_structure() {
        let p = build_prompt(
            &[vec![0.137, 0.572, 0.671], vec![0.147, 0.255, 0.615]],
            &vec![vec![0.025, 0.034, 0.041, 64.0]; 2],
            3,
        );
        assert_eq!(p.text.matches("vector:").count(), 2);
        assert_eq!(p.text.matches("value:").count(), 2);
        assert!(p.text.contains("<start>0.137,0.572,0.671<end>"));
        assert!(p.text.contains("The dimension of each variable is three"));
        assert!(p.text.contains("minimizing a four objective task"));
        assert!(p.text.contains("Avoid writing any code"));
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse_response("<start>0.1,0.2,0.3<end>", 3).unwrap(), vec![vec![0.1, 0.2, 0.3]]);
        assert!(parse_response("noise <start>0.1,0.2<end>", 3).is_err());
        let two = parse_response("a <start>0.1, 0.2,0.3<end> b <start>0.4,0.5,0.6<end>", 3).unwrap();
        assert_eq!(two, vec![vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6]]);
        assert_eq!(parse_response("<start>1.2,-0.1,0.5<end>", 3).unwrap(), vec![vec![1.0, 0.0, 0.5]]);
        assert!(parse_response("<start>1.6,0.1,0.5<end>", 3).is_err());
        assert!(parse_response("<start>nan,0.1,0.5<end>", 3).is_err());
        assert!(parse_response("<start>0.1,0.1,0.5", 3).is_err());
    }

    #[test]
    fn mock_returns_parent_mean() {
        let client = MockClient { seed: 0, jitter: 0.0 };
        let (a, b) = (sol(&[20.0, 85.0, 150.0]), sol(&[150.0, 85.0, 20.0]));
        let mut rng = Rng::seed_from_u64(1);
        let out = llm_mate(&[&a, &b], B, &client, 3, &Sbx::default(), &mut rng);
        assert!(!out.fell_back);
        assert_eq!(out.attempts, 1);
        // Prompt rounding to 3 decimals is exact for 0, 0.5 and 1.
        assert_eq!(out.offspring, WindowVector::uniform(3, 85.0));
    }

    #[test]
    fn fixed_answer_denormalizes() {
        let client = Canned("<start>0.5,0.5,0.5<end>", AtomicUsize::new(0));
        let a = sol(&[30.0, 40.0, 50.0]);
        let mut rng = Rng::seed_from_u64(1);
        let out = llm_mate(&[&a, &a], B, &client, 3, &Sbx::default(), &mut rng);
        assert_eq!(out.offspring, WindowVector::uniform(3, 85.0));
    }

    #[test]
    fn garbage_falls_back_after_three_calls() {
        let client = Canned("sorry, as requested here is some code", AtomicUsize::new(0));
        let (a, b) = (sol(&[30.0, 40.0, 50.0]), sol(&[100.0, 120.0, 140.0]));
        let mut rng = Rng::seed_from_u64(1);
        let out = llm_mate(&[&a, &b], B, &client, 3, &Sbx::default(), &mut rng);
        assert!(out.fell_back);
        assert_eq!(client.1.load(Ordering::Relaxed), 3);
        assert!(out.offspring.within(B));
        let mut again = Rng::seed_from_u64(1);
        assert_eq!(out.offspring, Sbx::default().mate(&[&a, &b], B, &mut again));
    }

    #[test]
    fn mock_is_deterministic() {
        let m = LlmMate::mock(42);
        let (a, b) = (sol(&[30.0, 40.0, 50.0]), sol(&[100.0, 120.0, 140.0]));
        let x = m.mate(&[&a, &b], B, &mut Rng::seed_from_u64(3));
        let y = m.mate(&[&a, &b], B, &mut Rng::seed_from_u64(3));
        assert_eq!(x, y);
        assert_eq!(m.matings(), 2);
        assert_eq!(m.fallbacks(), 0);
    }

    proptest! {
        #[test]
        fn round_trip(w in prop::collection::vec(20.0f64..=150.0, 1..6)) {
            let w = WindowVector::new(w);
            let back = denormalize(&normalize(&w, B).unwrap(), B);
            for (a, b) in back.as_slice().iter().zip(w.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn offspring_in_bounds_for_any_reply(reply in ".{0,80}", seed in any::<u64>()) {
            struct Fixed(String);
            impl CompletionClient for Fixed {
                fn complete(&self, _: &str) -> Result<String, LlmError> { Ok(self.0.clone()) }
            }
            let client = Fixed(reply);
            let (a, b) = (sol(&[30.0, 40.0, 50.0]), sol(&[100.0, 120.0, 140.0]));
            let out = llm_mate(&[&a, &b], B, &client, 3, &Sbx::default(), &mut Rng::seed_from_u64(seed));
            prop_assert!(out.offspring.within(B));
        }
    }
}

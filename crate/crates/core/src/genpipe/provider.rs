use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

/// Environment variables read by [`HttpProvider::from_env`].
pub const ENV_ENDPOINT: &str = "SKILLGROUND_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "SKILLGROUND_LLM_API_KEY";
pub const ENV_MODEL: &str = "SKILLGROUND_LLM_MODEL";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProviderError {
    /// Worth retrying: timeouts, rate limits, 5xx.
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider failure: {0}")]
    Fatal(String),
    #[error("provider is not configured: {0}")]
    MissingConfig(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Transient(_))
    }
}

/// Text completion plus token usage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Synchronous text-in, text-out language model.
pub trait LlmProvider: Send + Sync {
    fn model_name(&self) -> String;

    fn complete(&self, system_prompt: &str, user_prompt: &str) -> Result<Completion, ProviderError>;
}

/// Rough whitespace token count for providers that do not report usage.
pub fn approx_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Replays canned responses in order and records every prompt it receives.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    script: Mutex<VecDeque<Result<String, ProviderError>>>,
    prompts: Mutex<Vec<(String, String)>>,
}

impl ScriptedProvider {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_results(responses.into_iter().map(|s| Ok(s.into())))
    }

    pub fn with_results(results: impl IntoIterator<Item = Result<String, ProviderError>>) -> Self {
        Self {
            script: Mutex::new(results.into_iter().collect()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    /// `(system, user)` prompts seen so far.
    pub fn prompts(&self) -> Vec<(String, String)> {
        self.prompts.lock().expect("prompt log").clone()
    }
}

impl LlmProvider for ScriptedProvider {
    fn model_name(&self) -> String {
        "scripted".into()
    }

    fn complete(&self, system_prompt: &str, user_prompt: &str) -> Result<Completion, ProviderError> {
        self.prompts
            .lock()
            .expect("prompt log")
            .push((system_prompt.to_string(), user_prompt.to_string()));
        let next = self
            .script
            .lock()
            .expect("script")
            .pop_front()
            .unwrap_or_else(|| Err(ProviderError::Fatal("script exhausted".into())));
        next.map(|text| Completion {
            prompt_tokens: approx_tokens(system_prompt) + approx_tokens(user_prompt),
            completion_tokens: approx_tokens(&text),
            text,
        })
    }
}

/// OpenAI-compatible chat-completions client.
pub struct HttpProvider {
    endpoint: String,
    api_key: String,
    model: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Deserialize)]
struct ChatUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

impl HttpProvider {
    pub fn new(endpoint: &str, api_key: &str, model: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(180)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
            model: model.to_string(),
            agent,
        }
    }

    /// Endpoint defaults to the public OpenAI API and the model to `gpt-4o`;
    /// the API key is mandatory.
    pub fn from_env() -> Result<Self, ProviderError> {
        let key = std::env::var(ENV_API_KEY)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| ProviderError::MissingConfig(format!("{ENV_API_KEY} is not set")))?;
        let endpoint =
            std::env::var(ENV_ENDPOINT).unwrap_or_else(|_| "https://api.openai.com/v1".into());
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "gpt-4o".into());
        Ok(Self::new(&endpoint, &key, &model))
    }
}

impl LlmProvider for HttpProvider {
    fn model_name(&self) -> String {
        self.model.clone()
    }

    fn complete(&self, system_prompt: &str, user_prompt: &str) -> Result<Completion, ProviderError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_prompt},
            ],
        });
        let mut resp = self
            .agent
            .post(format!("{}/chat/completions", self.endpoint))
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(ProviderError::Transient(format!("HTTP {status}")));
        }
        if status >= 400 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(ProviderError::Fatal(format!("HTTP {status}: {text}")));
        }
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::Fatal(format!("bad response body: {e}")))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| ProviderError::Fatal("response has no choices".into()))?;
        let (prompt_tokens, completion_tokens) = parsed.usage.map_or_else(
            || (approx_tokens(system_prompt) + approx_tokens(user_prompt), approx_tokens(&text)),
            |u| (u.prompt_tokens, u.completion_tokens),
        );
        Ok(Completion {
            text,
            prompt_tokens,
            completion_tokens,
        })
    }
}

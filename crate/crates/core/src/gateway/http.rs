//! OpenAI-compatible chat-completions client.

use std::time::Duration;

use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::CallError;
use crate::error::{Error, Result};
use crate::extract::{THINK_CLOSE, THINK_OPEN};
use crate::prompt::PromptText;

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    #[serde(default)]
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
    /// Servers running a reasoning parser return the think segment here
    /// instead of inline.
    #[serde(default, alias = "reasoning")]
    reasoning_content: Option<String>,
}

pub(crate) struct HttpBackend {
    client: reqwest::Client,
    url: String,
    model: String,
    temperature: f64,
    max_tokens: u32,
    api_key: Option<String>,
}

impl HttpBackend {
    pub(crate) fn new(
        endpoint: &str,
        model: &str,
        temperature: f64,
        max_tokens: u32,
        api_key_env: Option<&str>,
        timeout: Duration,
    ) -> Result<Self> {
        let base = endpoint.trim_end_matches('/');
        if !(base.starts_with("http://") || base.starts_with("https://")) {
            return Err(Error::Backend(format!(
                "endpoint {endpoint:?} must be an http:// or https:// URL"
            )));
        }
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Backend(format!("cannot build HTTP client: {e}")))?;
        let api_key = std::env::var(api_key_env.unwrap_or("OPENAI_API_KEY"))
            .ok()
            .filter(|k| !k.is_empty());
        Ok(HttpBackend {
            client,
            url: format!("{base}/v1/chat/completions"),
            model: model.to_string(),
            temperature,
            max_tokens,
            api_key,
        })
    }

    pub(crate) async fn complete(&self, prompt: &PromptText) -> Result<String, CallError> {
        let mut messages = Vec::with_capacity(2);
        if !prompt.system_text.is_empty() {
            messages.push(ChatMessage {
                role: "system",
                content: &prompt.system_text,
            });
        }
        messages.push(ChatMessage {
            role: "user",
            content: &prompt.user_text,
        });
        let body = ChatRequest {
            model: &self.model,
            messages,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        };

        let mut req = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| CallError::Transient(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .await
            .map_err(|e| CallError::Transient(format!("reading body: {e}")))?;
        if !status.is_success() {
            let snippet: String = text.chars().take(200).collect();
            let msg = format!("HTTP {status}: {snippet}");
            return Err(if is_transient_status(status) {
                CallError::Transient(msg)
            } else {
                CallError::Fatal(msg)
            });
        }
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| CallError::Fatal(format!("unexpected response body: {e}")))?;
        let Some(choice) = parsed.choices.into_iter().next() else {
            return Err(CallError::Fatal("response has no choices".into()));
        };
        let content = choice.message.content.unwrap_or_default();
        Ok(match choice.message.reasoning_content.filter(|r| !r.is_empty()) {
            Some(reasoning) => format!("{THINK_OPEN}\n{reasoning}\n{THINK_CLOSE}\n\n{content}"),
            None => content,
        })
    }
}

/// 5xx and 429 are retried; every other non-success status fails at once.
pub(crate) fn is_transient_status(status: StatusCode) -> bool {
    status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS
}

//! Transport abstraction and the OpenAI-compatible HTTP implementation.

use serde::Serialize;

use super::AgentRequest;

/// A failed transport attempt. Retryable failures (timeouts, 429/5xx) go
/// through exponential backoff; the rest abort immediately.
#[derive(Debug, Clone)]
pub struct TransportFailure {
    pub message: String,
    pub retryable: bool,
}

impl TransportFailure {
    pub fn fatal(message: impl Into<String>) -> Self {
        TransportFailure {
            message: message.into(),
            retryable: false,
        }
    }

    pub fn retryable(message: impl Into<String>) -> Self {
        TransportFailure {
            message: message.into(),
            retryable: true,
        }
    }
}

/// Anything that can turn an [`AgentRequest`] into a raw model response.
pub trait Transport: Send + Sync {
    fn send(&self, model: &str, request: &AgentRequest) -> Result<String, TransportFailure>;
}

/// One chat message in the OpenAI wire format.
#[derive(Debug, Serialize)]
pub struct WireMessage {
    pub role: &'static str,
    pub content: serde_json::Value,
}

/// Build the chat-completions request body for an agent request.
pub fn wire_body(model: &str, request: &AgentRequest) -> serde_json::Value {
    let user_content = if request.images.is_empty() {
        serde_json::Value::String(request.user_payload.clone())
    } else {
        let mut parts = vec![serde_json::json!({
            "type": "text",
            "text": request.user_payload,
        })];
        for image in &request.images {
            parts.push(serde_json::json!({
                "type": "image_url",
                "image_url": {"url": data_url(image)},
            }));
        }
        serde_json::Value::Array(parts)
    };
    serde_json::json!({
        "model": model,
        "messages": [
            {"role": "system", "content": request.system_prompt},
            {"role": "user", "content": user_content},
        ],
        "temperature": request.temperature,
        "max_tokens": request.max_output_tokens,
    })
}

#[cfg(feature = "live-transport")]
fn data_url(image: &super::ImageAttachment) -> String {
    use base64::Engine as _;
    format!(
        "data:{};base64,{}",
        image.media_type,
        base64::engine::general_purpose::STANDARD.encode(&image.bytes)
    )
}

#[cfg(not(feature = "live-transport"))]
fn data_url(image: &super::ImageAttachment) -> String {
    // Without the live transport the URL is only ever part of a digest-free
    // wire body used by stub transports; a hex placeholder keeps it cheap.
    format!("data:{};hex,{}", image.media_type, image.digest())
}

/// Blocking HTTP transport for OpenAI-compatible chat-completions servers.
///
/// Configuration comes from the environment:
/// `SLIDEWRIGHT_API_KEY`, `SLIDEWRIGHT_BASE_URL` (default
/// `https://api.openai.com/v1`).
#[cfg(feature = "live-transport")]
pub struct HttpTransport {
    base_url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[cfg(feature = "live-transport")]
impl HttpTransport {
    pub fn from_env() -> Self {
        HttpTransport::new(
            std::env::var("SLIDEWRIGHT_BASE_URL")
                .unwrap_or_else(|_| "https://api.openai.com/v1".to_string()),
            std::env::var("SLIDEWRIGHT_API_KEY").ok(),
        )
    }

    pub fn new(base_url: String, api_key: Option<String>) -> Self {
        HttpTransport {
            base_url,
            api_key,
            client: reqwest::blocking::Client::builder()
                .timeout(std::time::Duration::from_secs(300))
                .build()
                .expect("HTTP client construction is infallible with static options"),
        }
    }
}

#[cfg(feature = "live-transport")]
impl Transport for HttpTransport {
    fn send(&self, model: &str, request: &AgentRequest) -> Result<String, TransportFailure> {
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let mut call = self.client.post(&url).json(&wire_body(model, request));
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call
            .send()
            .map_err(|e| TransportFailure::retryable(format!("request failed: {e}")))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| TransportFailure::retryable(format!("body read failed: {e}")))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(TransportFailure::retryable(format!(
                "HTTP {}: {}",
                status, text
            )));
        }
        if !status.is_success() {
            return Err(TransportFailure::fatal(format!("HTTP {}: {}", status, text)));
        }
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| TransportFailure::fatal(format!("non-JSON completion response: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                TransportFailure::fatal("completion response lacks choices[0].message.content")
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{AgentName, ImageAttachment};

    #[test]
    fn wire_body_shapes_text_and_vision_requests() {
        let req = AgentRequest::new(AgentName::SlidePlanner, "hello".to_string());
        let body = wire_body("test-model", &req);
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["messages"][1]["content"], "hello");

        let req = AgentRequest::new(AgentName::QuizTaker, "look".to_string())
            .with_images(vec![ImageAttachment::png(vec![9, 9])])
            .unwrap();
        let body = wire_body("m", &req);
        assert_eq!(body["messages"][1]["content"][0]["type"], "text");
        assert_eq!(body["messages"][1]["content"][1]["type"], "image_url");
    }
}

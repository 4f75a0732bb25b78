//! HTTP backends speaking the de-facto open chat-completion and embedding
//! wire shapes. Auth is a bearer token read from the configured environment
//! variable at call time.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::providers::{ChatBackend, ChatRequest, EmbedBackend, ProviderConfig};

fn bearer_token(auth_env_var: &str) -> Option<String> {
    if auth_env_var.is_empty() {
        return None;
    }
    std::env::var(auth_env_var).ok()
}

pub struct HttpChat {
    endpoint: String,
    model_name: String,
    auth_env_var: String,
    agent: ureq::Agent,
}

impl HttpChat {
    pub fn new(config: &ProviderConfig) -> Result<HttpChat> {
        if config.endpoint.is_empty() {
            return Err(Error::Config("http_chat requires an endpoint".into()));
        }
        Ok(HttpChat {
            endpoint: config.endpoint.clone(),
            model_name: config.model_name.clone(),
            auth_env_var: config.auth_env_var.clone(),
            agent: ureq::AgentBuilder::new()
                .timeout(std::time::Duration::from_secs(120))
                .build(),
        })
    }
}

impl ChatBackend for HttpChat {
    fn call(&self, request: &ChatRequest, rendered: &str) -> std::result::Result<String, String> {
        let body = json!({
            "model": self.model_name,
            "messages": [{"role": "user", "content": rendered}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });
        let mut http_request = self.agent.post(&self.endpoint);
        if let Some(token) = bearer_token(&self.auth_env_var) {
            http_request = http_request.set("Authorization", &format!("Bearer {token}"));
        }
        let response = http_request
            .set("Content-Type", "application/json")
            .send_string(&body.to_string())
            .map_err(|e| format!("chat endpoint error: {e}"))?;
        let value: Value = response
            .into_json()
            .map_err(|e| format!("chat endpoint returned invalid JSON: {e}"))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.to_string())
            .ok_or_else(|| "chat response missing choices[0].message.content".to_string())
    }

    fn uses_network(&self) -> bool {
        true
    }
}

pub struct HttpEmbed {
    endpoint: String,
    model_name: String,
    auth_env_var: String,
    agent: ureq::Agent,
}

impl HttpEmbed {
    pub fn new(config: &ProviderConfig) -> Result<HttpEmbed> {
        if config.endpoint.is_empty() {
            return Err(Error::Config("http_embed requires an endpoint".into()));
        }
        Ok(HttpEmbed {
            endpoint: config.endpoint.clone(),
            model_name: config.model_name.clone(),
            auth_env_var: config.auth_env_var.clone(),
            agent: ureq::AgentBuilder::new()
                .timeout(std::time::Duration::from_secs(120))
                .build(),
        })
    }
}

impl EmbedBackend for HttpEmbed {
    fn call(&self, texts: &[String]) -> std::result::Result<Vec<Vec<f64>>, String> {
        let body = json!({
            "model": self.model_name,
            "input": texts,
        });
        let mut http_request = self.agent.post(&self.endpoint);
        if let Some(token) = bearer_token(&self.auth_env_var) {
            http_request = http_request.set("Authorization", &format!("Bearer {token}"));
        }
        let response = http_request
            .set("Content-Type", "application/json")
            .send_string(&body.to_string())
            .map_err(|e| format!("embedding endpoint error: {e}"))?;
        let value: Value = response
            .into_json()
            .map_err(|e| format!("embedding endpoint returned invalid JSON: {e}"))?;
        let data = value["data"]
            .as_array()
            .ok_or_else(|| "embedding response missing data[]".to_string())?;
        data.iter()
            .map(|item| {
                item["embedding"]
                    .as_array()
                    .ok_or_else(|| "embedding entry missing embedding[]".to_string())?
                    .iter()
                    .map(|x| {
                        x.as_f64()
                            .ok_or_else(|| "non-numeric embedding component".to_string())
                    })
                    .collect()
            })
            .collect()
    }

    fn uses_network(&self) -> bool {
        true
    }
}

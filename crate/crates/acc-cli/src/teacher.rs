//! HTTP teacher client speaking the common chat-completion wire shape.

use acc_core::verify::{TeacherClient, TeacherError, TeacherRequest};

/// Environment variable holding the bearer token for remote teachers.
pub const TOKEN_ENV: &str = "ACC_TEACHER_TOKEN";

/// Remote rationale source. Each call posts one single-message chat
/// completion and returns the first choice's content; every transport or
/// payload problem maps to [`TeacherError::Unavailable`] so the retry
/// policy and deferral logic in the pipeline apply uniformly.
pub struct HttpTeacher {
    url: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpTeacher {
    /// Builds a client for `url`, reading the bearer token (if any) from
    /// [`TOKEN_ENV`].
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            token: std::env::var(TOKEN_ENV).ok(),
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl TeacherClient for HttpTeacher {
    fn generate(&mut self, request: &TeacherRequest) -> Result<String, TeacherError> {
        let body = serde_json::json!({
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.decode_params.temperature,
            "max_tokens": request.decode_params.max_tokens,
        });
        let mut call = self.client.post(&self.url).json(&body);
        if let Some(token) = &self.token {
            call = call.bearer_auth(token);
        }
        let response = call
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| TeacherError::Unavailable(e.to_string()))?;
        let payload: serde_json::Value = response
            .json()
            .map_err(|e| TeacherError::Unavailable(format!("bad completion payload: {e}")))?;
        payload["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| {
                TeacherError::Unavailable("completion payload has no message content".into())
            })
    }
}

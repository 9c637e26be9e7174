//! Blocking HTTP client for chat-completions endpoints.
//!
//! Speaks the minimal dialect every OpenAI-compatible server (including a
//! local Ollama) accepts: a single user message in, `choices[0].message.
//! content` out. Transport failures, timeouts and 5xx responses are retried
//! up to the configured budget; 4xx and unparseable bodies are not, since
//! resending the same request cannot fix either.
//!
//! The API key is taken from the environment by the command layer and only
//! ever placed in the Authorization header. It never appears in errors,
//! logs, or the debug prompt dump.

use std::time::{Duration, Instant};

use serde::Deserialize;
use sliceguard_core::detection::{ChatClient, ChatError, ChatReply};

/// Environment variable holding the bearer token for the LLM endpoint.
pub const API_KEY_ENV: &str = "SLICEGUARD_API_KEY";

pub struct HttpChatClient {
    endpoint: String,
    model: String,
    api_key: String,
    timeout_ms: u64,
    max_retries: u32,
    debug_prompts: bool,
    http: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatCompletion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

impl HttpChatClient {
    pub fn new(
        endpoint: String,
        model: String,
        api_key: String,
        timeout_ms: u64,
        max_retries: u32,
        debug_prompts: bool,
    ) -> Result<Self, ChatError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(timeout_ms))
            .build()
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        Ok(HttpChatClient {
            endpoint,
            model,
            api_key,
            timeout_ms,
            max_retries,
            debug_prompts,
            http,
        })
    }

    fn attempt(&self, prompt: &str) -> Result<String, (ChatError, bool)> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let response = self
            .http
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    (
                        ChatError::Timeout {
                            after_ms: self.timeout_ms,
                        },
                        true,
                    )
                } else {
                    (ChatError::Transport(e.to_string()), true)
                }
            })?;

        let status = response.status().as_u16();
        let text = response
            .text()
            .map_err(|e| (ChatError::Transport(e.to_string()), true))?;
        if !(200..300).contains(&status) {
            let mut detail = text;
            detail.truncate(200);
            // Server-side failures are worth retrying; client errors are not.
            return Err((ChatError::Endpoint { status, detail }, status >= 500));
        }

        let completion: ChatCompletion = serde_json::from_str(&text).map_err(|e| {
            (
                ChatError::Malformed(format!("{e} in chat-completion body")),
                false,
            )
        })?;
        let choice = completion
            .choices
            .into_iter()
            .next()
            .ok_or((ChatError::Malformed("empty choices array".into()), false))?;
        Ok(choice.message.content)
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&mut self, prompt: &str) -> Result<ChatReply, ChatError> {
        if self.debug_prompts {
            eprintln!("prompt> {prompt}");
        }
        let started = Instant::now();
        let mut attempts_left = self.max_retries + 1;
        let text = loop {
            attempts_left -= 1;
            match self.attempt(prompt) {
                Ok(text) => break text,
                Err((err, retryable)) => {
                    if retryable && attempts_left > 0 {
                        continue;
                    }
                    if self.debug_prompts {
                        eprintln!("error< {err}");
                    }
                    return Err(err);
                }
            }
        };
        let round_trip_ms = started.elapsed().as_millis() as u64;
        if self.debug_prompts {
            eprintln!("reply< {text}");
        }
        Ok(ChatReply {
            text,
            round_trip_ms,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// One-shot HTTP server: answers `responses[i]` to the i-th connection,
    /// counts requests, shuts down when all responses are spent.
    fn serve(responses: Vec<String>) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let endpoint = format!(
            "http://{}/v1/chat/completions",
            listener.local_addr().unwrap()
        );
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = Arc::clone(&hits);
        std::thread::spawn(move || {
            for response in responses {
                let (mut stream, _) = listener.accept().unwrap();
                counter.fetch_add(1, Ordering::SeqCst);
                let mut buf = [0u8; 4096];
                let mut seen = Vec::new();
                // Read until the JSON body is complete enough; requests here
                // are tiny, one read after the blank line suffices.
                loop {
                    let n = stream.read(&mut buf).unwrap();
                    seen.extend_from_slice(&buf[..n]);
                    if n == 0 || body_complete(&seen) {
                        break;
                    }
                }
                stream.write_all(response.as_bytes()).unwrap();
            }
        });
        (endpoint, hits)
    }

    fn body_complete(raw: &[u8]) -> bool {
        let Some(split) = raw.windows(4).position(|w| w == b"\r\n\r\n") else {
            return false;
        };
        let headers = String::from_utf8_lossy(&raw[..split]);
        let length: usize = headers
            .lines()
            .find_map(|l| {
                l.to_ascii_lowercase()
                    .strip_prefix("content-length:")
                    .map(str::trim)
                    .map(str::to_string)
            })
            .and_then(|v| v.parse().ok())
            .unwrap_or(0);
        raw.len() >= split + 4 + length
    }

    fn http_200(body: &str) -> String {
        format!(
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
    }

    fn http_error(status: u16, body: &str) -> String {
        format!(
            "HTTP/1.1 {status} X\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
    }

    fn client(endpoint: String, retries: u32) -> HttpChatClient {
        HttpChatClient::new(
            endpoint,
            "gemma2".into(),
            "test-key".into(),
            2_000,
            retries,
            false,
        )
        .unwrap()
    }

    #[test]
    fn parses_the_first_choice_content() {
        let reply = r#"{"choices":[{"message":{"role":"assistant","content":"Legitimate"}}]}"#;
        let (endpoint, hits) = serve(vec![http_200(reply)]);
        let mut c = client(endpoint, 0);
        let out = c.complete("prompt").unwrap();
        assert_eq!(out.text, "Legitimate");
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn retries_server_errors_until_success() {
        let reply = r#"{"choices":[{"message":{"content":"Malicious"}}]}"#;
        let (endpoint, hits) = serve(vec![
            http_error(500, "overloaded"),
            http_error(503, "overloaded"),
            http_200(reply),
        ]);
        let mut c = client(endpoint, 2);
        let out = c.complete("prompt").unwrap();
        assert_eq!(out.text, "Malicious");
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (endpoint, hits) = serve(vec![http_error(404, "no such model")]);
        let mut c = client(endpoint, 3);
        let err = c.complete("prompt").unwrap_err();
        assert!(matches!(err, ChatError::Endpoint { status: 404, .. }));
        assert!(err.to_string().contains("no such model"));
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn malformed_bodies_are_not_retried() {
        let (endpoint, hits) = serve(vec![http_200("{\"not\":\"a completion\"}")]);
        let mut c = client(endpoint, 3);
        let err = c.complete("prompt").unwrap_err();
        assert!(matches!(err, ChatError::Malformed(_)));
        assert_eq!(hits.load(Ordering::SeqCst), 1);

        let (endpoint, _) = serve(vec![http_200("{\"choices\":[]}")]);
        let mut c = client(endpoint, 0);
        assert!(matches!(
            c.complete("prompt").unwrap_err(),
            ChatError::Malformed(_)
        ));
    }

    #[test]
    fn refused_connections_surface_as_transport_errors() {
        // Bind to grab a free port, then drop the listener so nothing is
        // there when the client connects.
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let endpoint = format!(
            "http://{}/v1/chat/completions",
            listener.local_addr().unwrap()
        );
        drop(listener);
        let mut c = client(endpoint, 1);
        let err = c.complete("prompt").unwrap_err();
        assert!(matches!(err, ChatError::Transport(_)));
        // The key must never leak into error text.
        assert!(!err.to_string().contains("test-key"));
    }

    #[test]
    fn slow_servers_are_reported_as_timeouts() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let endpoint = format!(
            "http://{}/v1/chat/completions",
            listener.local_addr().unwrap()
        );
        let lingerer = std::thread::spawn(move || {
            // Accept and then sit on the connection past the client timeout.
            let (stream, _) = listener.accept().unwrap();
            std::thread::sleep(std::time::Duration::from_millis(900));
            drop(stream);
        });
        let mut c = HttpChatClient::new(endpoint, "m".into(), "k".into(), 250, 0, false).unwrap();
        let err = c.complete("prompt").unwrap_err();
        assert!(matches!(err, ChatError::Timeout { after_ms: 250 }));
        lingerer.join().unwrap();
    }
}

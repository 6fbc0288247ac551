//! Caption normalization: a deterministic rule table as the offline
//! default, plus an optional chat-completion client for free-form input.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::caption;
use crate::error::Error;
use crate::Result;

/// Outcome of normalization; `used_fallback` is set when a configured
/// client failed and the rule-based path produced the caption instead.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizeOutcome {
    pub caption: String,
    pub used_fallback: bool,
}

fn number_words() -> &'static [(&'static str, &'static str)] {
    &[
        ("twenty", "20"),
        ("nineteen", "19"),
        ("eighteen", "18"),
        ("seventeen", "17"),
        ("sixteen", "16"),
        ("fifteen", "15"),
        ("fourteen", "14"),
        ("thirteen", "13"),
        ("twelve", "12"),
        ("eleven", "11"),
        ("ten", "10"),
        ("nine", "9"),
        ("eight", "8"),
        ("seven", "7"),
        ("six", "6"),
        ("five", "5"),
        ("four", "4"),
        ("three", "3"),
        ("two", "2"),
        ("one", "1"),
        ("zero", "0"),
    ]
}

/// Inflected verb -> the "-ing" form used by the canonical class names.
fn verb_lemmas() -> &'static [(&'static str, &'static str)] {
    &[
        ("barks", "barking"),
        ("barked", "barking"),
        ("knocks", "knocking"),
        ("knocked", "knocking"),
        ("slams", "slamming"),
        ("slammed", "slamming"),
        ("chirps", "chirping"),
        ("chirped", "chirping"),
        ("moos", "mooing"),
        ("mooed", "mooing"),
        ("rings", "ringing"),
        ("rang", "ringing"),
        ("beeps", "beeping"),
        ("beeped", "beeping"),
        ("meows", "meowing"),
        ("meowed", "meowing"),
        ("breaks", "breaking"),
        ("broke", "breaking"),
        ("bangs", "banging"),
        ("banged", "banging"),
        ("blows", "blowing"),
        ("blew", "blowing"),
        ("beats", "beating"),
        ("beat", "beating"),
        ("wails", "wailing"),
        ("wailed", "wailing"),
        ("ticks", "ticking"),
        ("ticked", "ticking"),
        ("types", "typing"),
        ("typed", "typing"),
    ]
}

struct Rules {
    article: Regex,
    between: Regex,
    from_to: Regex,
    during: Regex,
    at_seconds: Regex,
    occurred_at: Regex,
    ws: Regex,
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| Rules {
        article: Regex::new(r"\b(?:a|an|the)\s+").unwrap(),
        between: Regex::new(
            r"(?:occurr?e?[ds]?\s+)?between\s+(\d+(?:\.\d+)?)\s+and\s+(\d+(?:\.\d+)?)\s+seconds?",
        )
        .unwrap(),
        from_to: Regex::new(r"from\s+(\d+(?:\.\d+)?)\s+to\s+(\d+(?:\.\d+)?)\s+seconds?").unwrap(),
        during: Regex::new(r"during\s+(\d+(?:\.\d+)?)\s*-\s*(\d+(?:\.\d+)?)\s+seconds?").unwrap(),
        at_seconds: Regex::new(r"at\s+(\d+(?:\.\d+)?)\s*-\s*(\d+(?:\.\d+)?)(?:\s+seconds?)?")
            .unwrap(),
        occurred_at: Regex::new(r"\boccurr?e?[ds]?\s+at\b").unwrap(),
        ws: Regex::new(r"\s+").unwrap(),
    })
}

/// Deterministic rule-based normalizer: number words to digits, phrase
/// rewrites into the `at a-b` form, verb lemmatization into the canonical
/// "-ing" class names. Canonical captions are fixpoints.
pub fn rule_normalize(text: &str) -> String {
    let r = rules();
    let mut s = text.trim().trim_end_matches('.').to_lowercase();
    s = r.ws.replace_all(&s, " ").into_owned();
    for (word, digit) in number_words() {
        s = Regex::new(&format!(r"\b{word}\b"))
            .unwrap()
            .replace_all(&s, *digit)
            .into_owned();
    }
    s = r.article.replace_all(&s, "").into_owned();
    // Count words the frequency grammar accepts but does not emit.
    s = Regex::new(r"\bonce\b").unwrap().replace_all(&s, "1 times").into_owned();
    s = Regex::new(r"\btwice\b").unwrap().replace_all(&s, "2 times").into_owned();
    s = Regex::new(r"\b1 time\b").unwrap().replace_all(&s, "1 times").into_owned();
    for (form, lemma) in verb_lemmas() {
        s = Regex::new(&format!(r"\b{form}\b"))
            .unwrap()
            .replace_all(&s, *lemma)
            .into_owned();
    }
    s = r.between.replace_all(&s, "at $1-$2").into_owned();
    s = r.from_to.replace_all(&s, "at $1-$2").into_owned();
    s = r.during.replace_all(&s, "at $1-$2").into_owned();
    s = r.occurred_at.replace_all(&s, "at").into_owned();
    s = r.at_seconds.replace_all(&s, "at $1-$2").into_owned();
    s.trim().to_string()
}

/// True when `text` parses as either caption form.
pub fn is_canonical(text: &str, clip_length: f64) -> bool {
    caption::parse_timestamp_caption(text, clip_length).is_ok()
        || caption::parse_frequency_caption(text).is_ok()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// A chat-completion backend. The HTTP implementation is
/// [`HttpChatClient`]; tests use in-process fakes.
pub trait ChatClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String>;
}

/// Few-shot normalization through a chat client, with rule-based fallback
/// on transport failure and one retry on unparseable replies.
pub fn llm_normalize(
    text: &str,
    client: &dyn ChatClient,
    examples: &[(String, String)],
    clip_length: f64,
) -> Result<NormalizeOutcome> {
    if examples.is_empty() {
        return Err(Error::InvalidConfig(
            "llm_normalize requires at least one example".into(),
        ));
    }
    let mut messages = vec![ChatMessage {
        role: "system".into(),
        content: "Rewrite the user's sentence into a canonical caption. \
                  Timestamp captions look like \"dog barking at 2-3\"; frequency \
                  captions look like \"dog barking 3 times\". Reply with the \
                  caption only."
            .into(),
    }];
    for (raw, canonical) in examples {
        messages.push(ChatMessage {
            role: "user".into(),
            content: raw.clone(),
        });
        messages.push(ChatMessage {
            role: "assistant".into(),
            content: canonical.clone(),
        });
    }
    messages.push(ChatMessage {
        role: "user".into(),
        content: text.to_string(),
    });

    let mut replies = Vec::new();
    for _attempt in 0..2 {
        match client.complete(&messages) {
            Ok(reply) => {
                let candidate = reply.trim().to_string();
                if is_canonical(&candidate, clip_length) {
                    return Ok(NormalizeOutcome {
                        caption: candidate,
                        used_fallback: false,
                    });
                }
                replies.push(reply);
            }
            Err(_) => {
                // Transport failure: fall back to the rule table.
                return Ok(NormalizeOutcome {
                    caption: rule_normalize(text),
                    used_fallback: true,
                });
            }
        }
    }
    Err(Error::UnparseableReply(replies))
}

/// Normalize with the rule table only.
pub fn normalize_offline(text: &str) -> NormalizeOutcome {
    NormalizeOutcome {
        caption: rule_normalize(text),
        used_fallback: false,
    }
}

// --- HTTP client -----------------------------------------------------------

/// Chat-completion client for an OpenAI-style endpoint. The bearer token
/// is read from the environment variable named in `token_env`.
#[derive(Debug, Clone)]
pub struct HttpChatClient {
    pub endpoint: String,
    pub model: String,
    pub token_env: String,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

impl ChatClient for HttpChatClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        let token = std::env::var(&self.token_env)
            .map_err(|_| Error::ChatClient(format!("missing env var {}", self.token_env)))?;
        let body = ChatRequest {
            model: &self.model,
            messages,
        };
        let client = reqwest::blocking::Client::new();
        let response = client
            .post(&self.endpoint)
            .bearer_auth(token)
            .json(&body)
            .send()
            .map_err(|e| Error::ChatClient(e.to_string()))?
            .error_for_status()
            .map_err(|e| Error::ChatClient(e.to_string()))?;
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| Error::ChatClient(e.to_string()))?;
        parsed
            .choices
            .first()
            .map(|c| c.message.content.clone())
            .ok_or_else(|| Error::ChatClient("empty choices".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_words_and_between() {
        assert_eq!(
            rule_normalize("a dog barking occurred between two and three seconds"),
            "dog barking at 2-3"
        );
    }

    #[test]
    fn verb_lemmatization() {
        assert_eq!(rule_normalize("a dog barks three times"), "dog barking 3 times");
        assert_eq!(rule_normalize("The cow moos twice"), "cow mooing 2 times");
        assert_eq!(rule_normalize("a gunshot once"), "gunshot 1 times");
    }

    #[test]
    fn canonical_is_fixpoint() {
        for text in [
            "gunshot at 1-2",
            "dog barking at 2-3",
            "dog barking 3 times",
            "door knocking at 1-4 and door slamming at 6-8",
        ] {
            assert_eq!(rule_normalize(text), text);
        }
    }

    #[test]
    fn from_to_and_during() {
        assert_eq!(
            rule_normalize("bird chirping from 4 to 6 seconds"),
            "bird chirping at 4-6"
        );
        assert_eq!(
            rule_normalize("bird chirping during 4-6 seconds"),
            "bird chirping at 4-6"
        );
    }

    struct FakeClient {
        replies: std::cell::RefCell<Vec<Result<String>>>,
    }

    impl FakeClient {
        fn new(replies: Vec<Result<String>>) -> Self {
            Self {
                replies: std::cell::RefCell::new(replies),
            }
        }
    }

    impl ChatClient for FakeClient {
        fn complete(&self, _messages: &[ChatMessage]) -> Result<String> {
            self.replies.borrow_mut().remove(0)
        }
    }

    fn examples() -> Vec<(String, String)> {
        vec![(
            "a dog barks twice".to_string(),
            "dog barking 2 times".to_string(),
        )]
    }

    #[test]
    fn llm_path_accepts_parseable_reply() {
        let client = FakeClient::new(vec![Ok("dog barking at 2-3".into())]);
        let out = llm_normalize("whatever", &client, &examples(), 10.0).unwrap();
        assert_eq!(out.caption, "dog barking at 2-3");
        assert!(!out.used_fallback);
    }

    #[test]
    fn llm_retries_once_then_errors_with_replies() {
        let client = FakeClient::new(vec![Ok("garbage one".into()), Ok("garbage two".into())]);
        match llm_normalize("whatever", &client, &examples(), 10.0) {
            Err(Error::UnparseableReply(replies)) => {
                assert_eq!(replies, vec!["garbage one", "garbage two"]);
            }
            other => panic!("expected UnparseableReply, got {other:?}"),
        }
    }

    #[test]
    fn llm_network_failure_falls_back() {
        let client = FakeClient::new(vec![Err(Error::ChatClient("refused".into()))]);
        let out = llm_normalize("a dog barks three times", &client, &examples(), 10.0).unwrap();
        assert_eq!(out.caption, "dog barking 3 times");
        assert!(out.used_fallback);
    }
}

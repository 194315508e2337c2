//! Text embeddings for topic clustering.
//!
//! [`HashingEmbedder`] is the offline default: signed feature hashing of word
//! unigrams and bigrams, L2-normalized. [`RemoteEmbedder`] calls an embedding
//! gateway and is wrapped by [`embed_texts`] with a fallback policy.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::tokens;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("embedding transport: {0}")]
    Transport(String),
    #[error("embedding gateway returned status {0}")]
    Status(u16),
    #[error("embedding gateway returned {got} vectors for {expected} texts")]
    Count { expected: usize, got: usize },
    #[error("embedding vectors have inconsistent dimensions")]
    Ragged,
}

pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

/// Common English function words; they carry no topic.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be", "because",
    "been", "but", "by", "can", "could", "did", "do", "does", "for", "from", "get", "had", "has",
    "have", "he", "her", "him", "his", "how", "i", "i'm", "if", "in", "into", "is", "it", "it's",
    "its", "just", "me", "more", "most", "my", "no", "not", "of", "on", "or", "our", "out", "she",
    "so", "some", "than", "that", "the", "their", "them", "then", "there", "these", "they",
    "this", "to", "too", "up", "us", "very", "was", "we", "were", "what", "when", "which", "who",
    "why", "will", "with", "would", "you", "your", "you're",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashingEmbedder {
    pub dim: usize,
    pub max_ngram: usize,
    pub drop_stopwords: bool,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self {
            dim: 256,
            max_ngram: 2,
            drop_stopwords: true,
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl HashingEmbedder {
    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let words: Vec<String> = tokens(text)
            .into_iter()
            .filter(|t| !(self.drop_stopwords && STOPWORDS.contains(&t.as_str())))
            .collect();
        let mut v = vec![0.0; self.dim];
        for n in 1..=self.max_ngram.max(1) {
            for gram in words.windows(n) {
                let h = fnv1a(gram.join(" ").as_bytes());
                let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
                v[(h % self.dim as u64) as usize] += sign;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // No content words: a fixed unit vector keeps the norm invariant.
            v[0] = 1.0;
        } else {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl Embedder for HashingEmbedder {
    fn name(&self) -> &str {
        "hashing"
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Posts `{"texts": [...]}` and expects `{"vectors": [[...], ...]}`.
pub struct RemoteEmbedder {
    endpoint: String,
    api_key: Option<String>,
    timeout: Duration,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key,
            timeout,
            agent: ureq::Agent::config_builder()
                .http_status_as_error(false)
                .build()
                .into(),
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

impl Embedder for RemoteEmbedder {
    fn name(&self) -> &str {
        "remote"
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let transport = |e: ureq::Error| EmbedError::Transport(e.to_string());
        let mut req = self
            .agent
            .post(&self.endpoint)
            .config()
            .timeout_global(Some(self.timeout))
            .build();
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(EmbedRequest { texts }).map_err(transport)?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(EmbedError::Status(status));
        }
        let body: EmbedResponse = resp.body_mut().read_json().map_err(transport)?;
        if body.vectors.len() != texts.len() {
            return Err(EmbedError::Count {
                expected: texts.len(),
                got: body.vectors.len(),
            });
        }
        let dim = body.vectors.first().map_or(0, Vec::len);
        if dim == 0 || body.vectors.iter().any(|v| v.len() != dim) {
            return Err(EmbedError::Ragged);
        }
        Ok(body.vectors)
    }
}

/// Embeds with `primary`; on failure either falls back to hashing or aborts.
pub fn embed_texts(
    primary: &dyn Embedder,
    texts: &[&str],
    fallback: Option<&HashingEmbedder>,
) -> Result<(Vec<Vec<f64>>, String), EmbedError> {
    match primary.embed(texts) {
        Ok(v) => Ok((v, primary.name().to_owned())),
        Err(e) => match fallback {
            Some(h) => {
                tracing::warn!(error = %e, "embedding provider failed; using hashing fallback");
                Ok((h.embed(texts)?, h.name().to_owned()))
            }
            None => Err(e),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_texts_identical_vectors() {
        let e = HashingEmbedder::default();
        assert_eq!(e.embed_one("Background checks work"), e.embed_one("background checks work"));
    }

    #[test]
    fn unit_norm_even_without_content_words() {
        let e = HashingEmbedder::default();
        for text in ["the and of", "rifles storage safety laws", ""] {
            let v = e.embed_one(text);
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12, "{text:?}");
        }
    }

    struct Broken;
    impl Embedder for Broken {
        fn name(&self) -> &str {
            "broken"
        }
        fn embed(&self, _: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
            Err(EmbedError::Status(500))
        }
    }

    #[test]
    fn fallback_policy() {
        let h = HashingEmbedder::default();
        let (v, name) = embed_texts(&Broken, &["one two"], Some(&h)).unwrap();
        assert_eq!((v.len(), name.as_str()), (1, "hashing"));
        assert_eq!(embed_texts(&Broken, &["x"], None), Err(EmbedError::Status(500)));
    }
}

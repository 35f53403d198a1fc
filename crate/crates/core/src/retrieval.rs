//! BM25 retrieval of training methods that demonstrate logging style.
//!
//! Documents are the original training methods with their logs in place,
//! one per distinct method. Queries are the target's log-free method
//! body, so the best matches show what a finished statement looks like in
//! similar code.

use crate::corpus::{reinserted_method, Sample, Split};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("index holds {have} documents but {want} were requested")]
    IndexTooSmall { have: usize, want: usize },
}

/// Splits code into lowercase word tokens: identifiers break at camelCase
/// humps and snake_case underscores, punctuation and quotes vanish, and
/// number literals survive whole (digits never split a word).
pub fn tokenize_code(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for raw in text.split(|c: char| !c.is_alphanumeric() && c != '_') {
        for word in raw.split('_') {
            if word.is_empty() {
                continue;
            }
            split_camel(word, &mut tokens);
        }
    }
    tokens
}

fn split_camel(word: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = word.chars().collect();
    let mut start = 0;
    for i in 1..chars.len() {
        let prev = chars[i - 1];
        let cur = chars[i];
        let next_lower = chars.get(i + 1).is_some_and(|c| c.is_lowercase());
        let hump = !prev.is_uppercase() && cur.is_uppercase();
        let acronym_end = prev.is_uppercase() && cur.is_uppercase() && next_lower;
        if hump || acronym_end {
            out.push(chars[start..i].iter().collect::<String>().to_lowercase());
            start = i;
        }
    }
    out.push(chars[start..].iter().collect::<String>().to_lowercase());
}

#[derive(Debug, Clone)]
struct Doc {
    sample_id: String,
    source: String,
    term_freq: BTreeMap<String, usize>,
    len: usize,
}

/// Inverted statistics over the train split, ready for scoring.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    docs: Vec<Doc>,
    doc_freq: BTreeMap<String, usize>,
    avg_len: f64,
    k1: f64,
    b: f64,
}

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleExample {
    pub sample_id: String,
    /// Original method text, logging statements included.
    pub method_source_with_logs: String,
    pub score: f64,
}

impl Bm25Index {
    /// Indexes every train-split method once. Samples of the same method
    /// collapse into one document (the restored original method), labeled
    /// with the lexicographically first of their sample ids.
    pub fn build(samples: &[Sample], k1: f64, b: f64) -> Self {
        let mut by_method: BTreeMap<&str, &Sample> = BTreeMap::new();
        for sample in samples {
            if sample.split != Split::Train {
                continue;
            }
            by_method
                .entry(sample.method_id.as_str())
                .and_modify(|held| {
                    if sample.sample_id < held.sample_id {
                        *held = sample;
                    }
                })
                .or_insert(sample);
        }
        let mut docs: Vec<Doc> = by_method
            .into_values()
            .map(|sample| {
                let source = reinserted_method(sample);
                let tokens = tokenize_code(&source);
                let mut term_freq = BTreeMap::new();
                for t in &tokens {
                    *term_freq.entry(t.clone()).or_insert(0) += 1;
                }
                Doc {
                    sample_id: sample.sample_id.clone(),
                    source,
                    len: tokens.len(),
                    term_freq,
                }
            })
            .collect();
        docs.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));

        let mut doc_freq = BTreeMap::new();
        for doc in &docs {
            for term in doc.term_freq.keys() {
                *doc_freq.entry(term.clone()).or_insert(0) += 1;
            }
        }
        let total: usize = docs.iter().map(|d| d.len).sum();
        let avg_len = if docs.is_empty() {
            1.0
        } else {
            (total as f64 / docs.len() as f64).max(1.0)
        };
        Bm25Index {
            docs,
            doc_freq,
            avg_len,
            k1,
            b,
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Non-negative IDF: terms in more than half the documents score 0
    /// instead of dragging totals negative.
    fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        (((n - df + 0.5) / (df + 0.5)).ln()).max(0.0)
    }

    fn score(&self, query_counts: &BTreeMap<String, usize>, doc: &Doc) -> f64 {
        let mut total = 0.0;
        for term in query_counts.keys() {
            let tf = doc.term_freq.get(term).copied().unwrap_or(0) as f64;
            if tf == 0.0 {
                continue;
            }
            let norm = self.k1 * (1.0 - self.b + self.b * doc.len as f64 / self.avg_len);
            total += self.idf(term) * (tf * (self.k1 + 1.0)) / (tf + norm);
        }
        total
    }
}

/// The `k` highest-scoring style examples for a query method, best first,
/// ties resolved by sample id. Asking for more documents than the index
/// holds is an error so the caller can decide whether a short list is
/// acceptable.
pub fn top_k(
    index: &Bm25Index,
    query_method: &str,
    k: usize,
) -> Result<Vec<StyleExample>, RetrievalError> {
    if index.docs.len() < k {
        return Err(RetrievalError::IndexTooSmall {
            have: index.docs.len(),
            want: k,
        });
    }
    let mut query_counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in tokenize_code(query_method) {
        *query_counts.entry(t).or_insert(0) += 1;
    }
    let mut scored: Vec<(f64, &Doc)> = index
        .docs
        .iter()
        .map(|d| (index.score(&query_counts, d), d))
        .collect();
    // Stable sort keeps the sample-id order the docs were stored in, so
    // equal scores come out alphabetically.
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(score, doc)| StyleExample {
            sample_id: doc.sample_id.clone(),
            method_source_with_logs: doc.source.clone(),
            score,
        })
        .collect())
}

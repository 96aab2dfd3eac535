//! Client for embeddings endpoints of the common shape: `POST {base}/embeddings`
//! with `{"model": …, "input": [...]}`, answered by
//! `{"data": [{"embedding": [...], "index": i}, ...]}`.
//!
//! Writes a dataset CSV, appending as batches complete so an interrupted run
//! resumes by skipping prompts already present. The auth token is read from
//! an environment variable and is never logged or persisted.

use std::fs::{self, OpenOptions};
use std::path::Path;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{GeodexError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub token_env: String,
    pub batch_size: usize,
    pub max_retries: u32,
    /// First retry delay; doubles on every further attempt.
    pub backoff_ms: u64,
    /// Batches issued concurrently.
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "text-embedding-3-large".into(),
            token_env: "OPENAI_API_KEY".into(),
            batch_size: 64,
            max_retries: 5,
            backoff_ms: 500,
            max_in_flight: 1,
            timeout_secs: 60,
        }
    }
}

impl EndpointConfig {
    fn url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/embeddings") {
            base.to_string()
        } else {
            format!("{base}/embeddings")
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prompt {
    pub value: String,
    pub text: String,
}

/// One prompt per line, either `value<TAB>text` or bare `text`; bare lines
/// get their 0-based line number (ignoring blanks) as value.
pub fn read_prompts(path: &Path) -> Result<Vec<Prompt>> {
    let text = fs::read_to_string(path)
        .map_err(|e| GeodexError::Config(format!("cannot read prompts {}: {e}", path.display())))?;
    let prompts: Vec<Prompt> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| match line.split_once('\t') {
            Some((v, t)) => Prompt {
                value: v.trim().to_string(),
                text: t.to_string(),
            },
            None => Prompt {
                value: i.to_string(),
                text: line.to_string(),
            },
        })
        .collect();
    if prompts.is_empty() {
        return Err(GeodexError::Format(format!("{} has no prompts", path.display())));
    }
    Ok(prompts)
}

#[derive(Serialize)]
struct Request<'a> {
    model: &'a str,
    input: Vec<&'a str>,
}

#[derive(Deserialize)]
struct Response {
    data: Vec<Item>,
}

#[derive(Deserialize)]
struct Item {
    embedding: Vec<f64>,
    #[serde(default)]
    index: Option<usize>,
}

enum Attempt {
    Retry(String),
    Fatal(GeodexError),
}

fn request_once(
    client: &reqwest::blocking::Client,
    config: &EndpointConfig,
    token: &str,
    batch: &[&Prompt],
) -> std::result::Result<Vec<Vec<f64>>, Attempt> {
    let body = Request {
        model: &config.model,
        input: batch.iter().map(|p| p.text.as_str()).collect(),
    };
    let resp = client
        .post(config.url())
        .bearer_auth(token)
        .json(&body)
        .send()
        .map_err(|e| Attempt::Retry(format!("request failed: {}", e.without_url())))?;
    let status = resp.status();
    if !status.is_success() {
        let text = resp.text().unwrap_or_default();
        let msg = format!("endpoint returned {status}: {}", text.trim());
        return Err(if status.as_u16() == 429 || status.is_server_error() {
            Attempt::Retry(msg)
        } else {
            Attempt::Fatal(GeodexError::Network(msg))
        });
    }
    let parsed: Response = resp
        .json()
        .map_err(|e| Attempt::Fatal(GeodexError::Format(format!("malformed response: {}", e.without_url()))))?;
    if parsed.data.len() != batch.len() {
        return Err(Attempt::Fatal(GeodexError::Format(format!(
            "response/prompt count mismatch: {} embeddings for {} prompts",
            parsed.data.len(),
            batch.len()
        ))));
    }
    let mut items = parsed.data;
    if items.iter().all(|it| it.index.is_some()) {
        items.sort_by_key(|it| it.index);
    }
    Ok(items.into_iter().map(|it| it.embedding).collect())
}

fn request_with_retries(
    client: &reqwest::blocking::Client,
    config: &EndpointConfig,
    token: &str,
    batch: &[&Prompt],
) -> Result<Vec<Vec<f64>>> {
    let mut delay = config.backoff_ms;
    let mut attempt = 0;
    loop {
        match request_once(client, config, token, batch) {
            Ok(v) => return Ok(v),
            Err(Attempt::Fatal(e)) => return Err(e),
            Err(Attempt::Retry(msg)) => {
                if attempt >= config.max_retries {
                    return Err(GeodexError::Network(format!(
                        "{msg} (gave up after {} attempts)",
                        attempt + 1
                    )));
                }
                log_line(&format!("retrying in {delay} ms: {msg}"));
                thread::sleep(Duration::from_millis(delay));
                delay = delay.saturating_mul(2);
                attempt += 1;
            }
        }
    }
}

fn log_line(msg: &str) {
    eprintln!("geodex fetch: {msg}");
}

/// Labels already present in an existing output CSV, and its vector width.
fn existing_rows(out: &Path) -> Result<(Vec<String>, Option<usize>)> {
    if !out.exists() || fs::metadata(out)?.len() == 0 {
        return Ok((Vec::new(), None));
    }
    let mut reader = csv::Reader::from_path(out)?;
    let dim = reader.headers()?.len().checked_sub(2);
    let mut labels = Vec::new();
    for rec in reader.records() {
        labels.push(rec?[0].to_string());
    }
    Ok((labels, dim))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FetchSummary {
    pub fetched: usize,
    pub skipped: usize,
}

/// Embeds every prompt not yet in `out` and appends `label,value,x…` rows.
pub fn fetch_embeddings(prompts: &[Prompt], out: &Path, config: &EndpointConfig) -> Result<FetchSummary> {
    let token = std::env::var(&config.token_env).map_err(|_| {
        GeodexError::Config(format!("environment variable {} is not set", config.token_env))
    })?;
    if config.batch_size == 0 || config.max_in_flight == 0 {
        return Err(GeodexError::Config("batch size and in-flight cap must be positive".into()));
    }
    let (done, mut dim) = existing_rows(out)?;
    let todo: Vec<&Prompt> = prompts.iter().filter(|p| !done.contains(&p.text)).collect();
    let skipped = prompts.len() - todo.len();
    if todo.is_empty() {
        return Ok(FetchSummary { fetched: 0, skipped });
    }

    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(config.timeout_secs))
        .build()
        .map_err(|e| GeodexError::Network(format!("cannot build HTTP client: {e}")))?;
    let batches: Vec<&[&Prompt]> = todo.chunks(config.batch_size).collect();
    let mut fetched = 0;
    for group in batches.chunks(config.max_in_flight) {
        let results: Vec<Result<Vec<Vec<f64>>>> = thread::scope(|scope| {
            let handles: Vec<_> = group
                .iter()
                .map(|batch| {
                    let (client, token) = (&client, token.as_str());
                    scope.spawn(move || request_with_retries(client, config, token, batch))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("fetch worker panicked"))
                .collect()
        });
        // append in prompt order; stop at the first failed batch so the file
        // stays a prefix-closed record of completed work
        for (batch, result) in group.iter().zip(results) {
            let vectors = result?;
            append_rows(out, batch, &vectors, &mut dim)?;
            fetched += batch.len();
        }
    }
    Ok(FetchSummary { fetched, skipped })
}

fn append_rows(out: &Path, batch: &[&Prompt], vectors: &[Vec<f64>], dim: &mut Option<usize>) -> Result<()> {
    for v in vectors {
        match *dim {
            None => *dim = Some(v.len()),
            Some(d) if d != v.len() => {
                return Err(GeodexError::Format(format!(
                    "embedding width changed from {d} to {}",
                    v.len()
                )))
            }
            _ => {}
        }
    }
    let d = dim.unwrap_or(0);
    let fresh = !out.exists() || fs::metadata(out)?.len() == 0;
    let file = OpenOptions::new().create(true).append(true).open(out)?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        let mut header = vec!["label".to_string(), "value".to_string()];
        header.extend((0..d).map(|j| format!("x{j}")));
        w.write_record(&header)?;
    }
    for (p, v) in batch.iter().zip(vectors) {
        let mut rec = vec![p.text.clone(), p.value.clone()];
        rec.extend(v.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

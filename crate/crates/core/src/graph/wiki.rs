//! Candidate entity extraction from encyclopedia pages.
//!
//! Fixture mode reads one recorded page file per title and is the default
//! everywhere tests run; live mode issues HTTPS GETs against a configured
//! summary/links endpoint pair. Extraction never mutates the graph —
//! classification and ingestion happen downstream.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone)]
pub enum WikiSource {
    /// Reads `<dir>/<slug>.json` files recorded ahead of time.
    Fixture { dir: PathBuf },
    /// Fetches `{base_url}/page/summary/{title}` and
    /// `{base_url}/page/links/{title}`.
    Live { base_url: String, timeout_ms: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WikiCandidate {
    pub label: String,
    /// Sentence of the page summary mentioning the term, or empty.
    pub snippet: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordedPage {
    title: String,
    summary: String,
    links: Vec<String>,
}

#[derive(Deserialize)]
struct LiveSummary {
    #[serde(default)]
    extract: String,
}

#[derive(Deserialize)]
struct LiveLinks {
    #[serde(default)]
    links: Vec<String>,
}

pub fn page_slug(title: &str) -> String {
    title.trim().to_lowercase().replace(' ', "_")
}

fn snippet_for(summary: &str, label: &str) -> String {
    let lowered = label.to_lowercase();
    summary
        .split('.')
        .map(str::trim)
        .find(|sentence| sentence.to_lowercase().contains(&lowered))
        .map(|s| s.to_string())
        .unwrap_or_default()
}

fn candidates_from(summary: &str, links: &[String]) -> Vec<WikiCandidate> {
    if summary.trim().is_empty() {
        return Vec::new();
    }
    links
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|label| WikiCandidate {
            label: label.trim().to_string(),
            snippet: snippet_for(summary, label),
        })
        .collect()
}

/// Returns hyperlinked terms from the page summary and link structure in
/// document order. Performs no graph mutation.
pub async fn wiki_ingest(page_title: &str, source: &WikiSource) -> Result<Vec<WikiCandidate>> {
    match source {
        WikiSource::Fixture { dir } => {
            let path = dir.join(format!("{}.json", page_slug(page_title)));
            if !path.exists() {
                return Err(Error::NotFound(format!(
                    "wiki fixture {} for page {page_title:?}",
                    path.display()
                )));
            }
            let text = std::fs::read_to_string(&path)?;
            let page: RecordedPage = serde_json::from_str(&text).map_err(|e| Error::Format {
                message: format!("bad wiki fixture: {e}"),
                offset: None,
            })?;
            Ok(candidates_from(&page.summary, &page.links))
        }
        WikiSource::Live { base_url, timeout_ms } => {
            let client = reqwest::Client::builder()
                .timeout(std::time::Duration::from_millis(*timeout_ms))
                .build()
                .map_err(|e| Error::config(format!("http client: {e}")))?;
            let base = base_url.trim_end_matches('/');
            let slug = page_slug(page_title);
            let summary: LiveSummary = fetch_json(&client, &format!("{base}/page/summary/{slug}")).await?;
            let links: LiveLinks = fetch_json(&client, &format!("{base}/page/links/{slug}")).await?;
            Ok(candidates_from(&summary.extract, &links.links))
        }
    }
}

async fn fetch_json<T: for<'de> Deserialize<'de>>(
    client: &reqwest::Client,
    url: &str,
) -> Result<T> {
    let response = client
        .get(url)
        .send()
        .await
        .map_err(|e| Error::SourceUnavailable(format!("{url}: {e}")))?;
    if !response.status().is_success() {
        return Err(Error::SourceUnavailable(format!(
            "{url}: status {}",
            response.status()
        )));
    }
    response
        .json::<T>()
        .await
        .map_err(|e| Error::SourceUnavailable(format!("{url}: bad payload: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_fixture(dir: &std::path::Path, slug: &str, page: &RecordedPage) {
        std::fs::write(
            dir.join(format!("{slug}.json")),
            serde_json::to_string_pretty(page).unwrap(),
        )
        .unwrap();
    }

    #[tokio::test]
    async fn fixture_extraction_in_document_order() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "physics",
            &RecordedPage {
                title: "Physics".into(),
                summary: "Physics studies matter. Entropy rises. Energy is conserved.".into(),
                links: vec!["Entropy".into(), "Energy".into(), "Quantum mechanics".into()],
            },
        );
        let source = WikiSource::Fixture {
            dir: dir.path().to_path_buf(),
        };
        let candidates = wiki_ingest("Physics", &source).await.unwrap();
        assert_eq!(
            candidates.iter().map(|c| c.label.as_str()).collect::<Vec<_>>(),
            vec!["Entropy", "Energy", "Quantum mechanics"]
        );
        assert_eq!(candidates[0].snippet, "Entropy rises");
        assert_eq!(candidates[2].snippet, "");
    }

    #[tokio::test]
    async fn empty_summary_yields_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "void",
            &RecordedPage {
                title: "Void".into(),
                summary: "  ".into(),
                links: vec!["Something".into()],
            },
        );
        let source = WikiSource::Fixture {
            dir: dir.path().to_path_buf(),
        };
        assert!(wiki_ingest("Void", &source).await.unwrap().is_empty());
    }

    #[tokio::test]
    async fn missing_fixture_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let source = WikiSource::Fixture {
            dir: dir.path().to_path_buf(),
        };
        assert!(matches!(
            wiki_ingest("Absent", &source).await,
            Err(Error::NotFound(_))
        ));
    }

    #[tokio::test]
    async fn live_failure_is_source_unavailable() {
        let source = WikiSource::Live {
            base_url: "http://127.0.0.1:1".into(),
            timeout_ms: 200,
        };
        assert!(matches!(
            wiki_ingest("Physics", &source).await,
            Err(Error::SourceUnavailable(_))
        ));
    }
}

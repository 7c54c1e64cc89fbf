//! Fixture-backed review service on an ephemeral port.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use pvlens::pipeline::{Resources, RunConfig};
use pvlens::service::{review_label, serve, ServiceState, TokenFile, TokenTable};
use pvlens_core::review::{ReviewLabel, Study};
use reqwest::{Client, Method, StatusCode};
use serde::de::DeserializeOwned;
use serde_json::Value;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn resources() -> Resources {
    let f = fixtures();
    Resources::load(&RunConfig::new(f.join("labels"), f.join("terms"), f.join("unused.sqlite"))).unwrap()
}

pub fn label_from_xml(xml: &str, res: &Resources) -> ReviewLabel {
    review_label(xml.as_bytes(), res).unwrap()
}

pub fn fixture_label(file: &str, res: &Resources) -> ReviewLabel {
    label_from_xml(&std::fs::read_to_string(fixtures().join("labels").join(file)).unwrap(), res)
}

/// Reviewers r1..r4 with tokens `tok-r<n>`, adjudicator `adj` with `tok-adj`.
pub fn tokens() -> TokenTable {
    let mut f = TokenFile::default();
    for i in 1..=4 {
        f.reviewers.insert(format!("r{i}"), format!("tok-r{i}"));
    }
    f.adjudicators.insert("adj".into(), "tok-adj".into());
    TokenTable::from_file(&f).unwrap()
}

pub struct Server {
    pub base: String,
    pub state: Arc<ServiceState>,
    client: Client,
}

/// Starts a server over `labels`, each with an explicit reviewer pair.
pub async fn start(labels: Vec<(ReviewLabel, (&str, &str))>) -> Server {
    let res = resources();
    let mut study = Study::new((1..=4).map(|i| format!("r{i}")).collect(), 0).unwrap();
    for (label, (a, b)) in labels {
        study.add_label_with(label, (a.into(), b.into())).unwrap();
    }
    let Resources {
        store,
        stopwords,
        filter,
        ..
    } = res;
    let state = Arc::new(ServiceState::new(study, tokens(), store, stopwords, filter).with_clock(|| 1_700_000_000));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(serve(listener, state.clone()));
    Server {
        base,
        state,
        client: Client::new(),
    }
}

impl Server {
    /// Sends a request; `token` is the bare token, `None` for no header.
    pub async fn call(&self, method: Method, path: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, String) {
        let mut req = self.client.request(method, format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status();
        (status, resp.text().await.unwrap())
    }

    pub async fn get<T: DeserializeOwned>(&self, path: &str, token: &str) -> T {
        let (status, body) = self.call(Method::GET, path, Some(token), None).await;
        assert_eq!(status, StatusCode::OK, "GET {path}: {body}");
        serde_json::from_str(&body).unwrap()
    }

    pub async fn post<T: DeserializeOwned>(&self, path: &str, token: &str, body: Value) -> T {
        let (status, text) = self.call(Method::POST, path, Some(token), Some(body)).await;
        assert_eq!(status, StatusCode::OK, "POST {path}: {text}");
        serde_json::from_str(&text).unwrap()
    }
}

/// `{"decisions": [...]}` giving `verdict(term_id)` for every id in `0..n`.
pub fn decisions(n: u32, verdict: impl Fn(u32) -> &'static str) -> Value {
    let d: Vec<Value> = (0..n)
        .map(|i| serde_json::json!({"term_id": i, "verdict": verdict(i)}))
        .collect();
    serde_json::json!({ "decisions": d })
}

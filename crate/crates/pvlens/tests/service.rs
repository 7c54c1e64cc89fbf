mod support;

use std::io::Cursor;

use pvlens::report::{metrics_from_export, read_export, Classifier};
use pvlens::service::{metrics_view, ErrorBody, LabelView, NextLabel, QueueView};
use pvlens_core::review::{LabelStatus, Receipt};
use reqwest::{Method, StatusCode};
use serde_json::json;
use support::{decisions, fixture_label, label_from_xml, resources, start, Server};

async fn two_labels() -> Server {
    let res = resources();
    start(vec![
        (fixture_label("label_a.xml", &res), ("r1", "r2")),
        (fixture_label("label_b.xml", &res), ("r2", "r3")),
    ])
    .await
}

async fn error(s: &Server, method: Method, path: &str, token: Option<&str>, body: Option<serde_json::Value>) -> (StatusCode, ErrorBody) {
    let (status, text) = s.call(method, path, token, body).await;
    (status, serde_json::from_str(&text).unwrap_or_else(|_| panic!("{path}: {text}")))
}

#[tokio::test]
async fn tokens_and_roles_are_enforced() {
    let s = two_labels().await;
    for token in [None, Some("nope")] {
        let (st, e) = error(&s, Method::GET, "/labels/next", token, None).await;
        assert_eq!((st, e.error.as_str()), (StatusCode::UNAUTHORIZED, "Unauthorized"));
    }
    let (st, _) = error(&s, Method::GET, "/labels/next", Some("tok-adj"), None).await;
    assert_eq!(st, StatusCode::FORBIDDEN);
    let (st, _) = error(&s, Method::GET, "/adjudication/queue", Some("tok-r1"), None).await;
    assert_eq!(st, StatusCode::FORBIDDEN);
    let (st, _) = error(&s, Method::POST, "/adjudication/d-0", Some("tok-r1"), Some(json!({"verdict": "include"}))).await;
    assert_eq!(st, StatusCode::FORBIDDEN);
    // r3 is not on label a.
    let (st, e) = error(&s, Method::GET, "/labels/set-a", Some("tok-r3"), None).await;
    assert_eq!((st, e.error.as_str()), (StatusCode::FORBIDDEN, "NotAssigned"));
    let (st, e) = error(&s, Method::POST, "/labels/set-a/review", Some("tok-r3"), Some(decisions(6, |_| "include"))).await;
    assert_eq!((st, e.error.as_str()), (StatusCode::FORBIDDEN, "NotAssigned"));
    // Adjudicators may read any label; everyone may read metrics.
    let v: LabelView = s.get("/labels/set-a", "tok-adj").await;
    assert_eq!(v.terms.len(), 6);
    let _: serde_json::Value = s.get("/metrics", "tok-r4").await;
}

#[tokio::test]
async fn unknown_labels_and_items_are_404() {
    let s = two_labels().await;
    let (st, e) = error(&s, Method::GET, "/labels/set-x", Some("tok-adj"), None).await;
    assert_eq!((st, e.error.as_str()), (StatusCode::NOT_FOUND, "UnknownLabel"));
    let (st, _) = error(&s, Method::POST, "/labels/set-x/review", Some("tok-r1"), Some(decisions(1, |_| "include"))).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    for item in ["d-0", "u-3", "zz", "d-x"] {
        let path = format!("/adjudication/{item}");
        let (st, e) = error(&s, Method::POST, &path, Some("tok-adj"), Some(json!({"verdict": "exclude"}))).await;
        assert_eq!((st, e.error.as_str()), (StatusCode::NOT_FOUND, "UnknownItem"), "{item}");
    }
}

#[tokio::test]
async fn bad_submissions_are_rejected_without_side_effects() {
    let s = two_labels().await;
    let path = "/labels/set-a/review";
    let (st, e) = error(&s, Method::POST, path, Some("tok-r1"), Some(decisions(4, |_| "include"))).await;
    assert_eq!((st, e.error.as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "IncompleteDecisions"));
    assert_eq!(e.missing_term_ids, [4, 5]);

    let mut dup = decisions(6, |_| "include");
    dup["decisions"].as_array_mut().unwrap().push(json!({"term_id": 0, "verdict": "exclude"}));
    let (st, e) = error(&s, Method::POST, path, Some("tok-r1"), Some(dup)).await;
    assert_eq!((st, e.error.as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "DuplicateDecision"));

    let mut unknown = decisions(6, |_| "include");
    unknown["decisions"].as_array_mut().unwrap().push(json!({"term_id": 17, "verdict": "exclude"}));
    let (st, e) = error(&s, Method::POST, path, Some("tok-r1"), Some(unknown)).await;
    assert_eq!((st, e.error.as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "UnknownTerm"));

    let mut empty = decisions(6, |_| "include");
    empty["user_terms"] = json!([{"category": "AdverseEvent", "text": "  "}]);
    let (st, e) = error(&s, Method::POST, path, Some("tok-r1"), Some(empty)).await;
    assert_eq!((st, e.error.as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "EmptyUserTerm"));

    let (st, e) = error(&s, Method::POST, path, Some("tok-r1"), Some(json!({"decisions": [{"term_id": 0, "verdict": "maybe"}]}))).await;
    assert_eq!((st, e.error.as_str()), (StatusCode::BAD_REQUEST, "BadRequest"));

    // Nothing above was recorded.
    let v: LabelView = s.get("/labels/set-a", "tok-r1").await;
    assert_eq!(v.status, LabelStatus::InReview);
    assert!(s.state.with_study(|st| st.export_records().is_empty()));
    let r: Receipt = s.post(path, "tok-r1", decisions(6, |_| "include")).await;
    assert_eq!(r.decisions, 6);
    let (st, e) = error(&s, Method::POST, path, Some("tok-r1"), Some(decisions(6, |_| "include"))).await;
    assert_eq!((st, e.error.as_str()), (StatusCode::CONFLICT, "AlreadySubmitted"));
}

#[tokio::test]
async fn next_label_walks_the_pending_assignments() {
    let s = two_labels().await;
    let n: NextLabel = s.get("/labels/next", "tok-r2").await;
    assert_eq!(n.set_id, "set-a");
    let _: Receipt = s.post("/labels/set-a/review", "tok-r2", decisions(6, |_| "include")).await;
    let n: NextLabel = s.get("/labels/next", "tok-r2").await;
    assert_eq!(n.set_id, "set-b");
    let (st, body) = s.call(Method::GET, "/labels/next", Some("tok-r4"), None).await;
    assert_eq!((st, body.as_str()), (StatusCode::NO_CONTENT, ""));
}

#[tokio::test]
async fn spans_carry_utf16_offsets() {
    let res = resources();
    let xml = r#"<document><setId root="set-a"/><effectiveTime value="20240101"/>
        <component><structuredBody><section><code code="34084-4"/>
        <paragraph>Œdème 😀 then rash and nausea</paragraph></section></structuredBody></component></document>"#;
    let s = start(vec![(label_from_xml(xml, &res), ("r1", "r2"))]).await;
    let v: LabelView = s.get("/labels/set-a", "tok-r1").await;
    let text = &v.sections[0].text;
    let utf16: Vec<u16> = text.encode_utf16().collect();
    assert_eq!(v.terms.len(), 2);
    for t in &v.terms {
        for sp in &t.spans {
            let surface = &text[sp.start..sp.end];
            assert_eq!(String::from_utf16(&utf16[sp.utf16_start..sp.utf16_end]).unwrap(), surface);
            assert!(sp.utf16_start < sp.start);
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_double_submit_has_one_winner() {
    let s = std::sync::Arc::new(two_labels().await);
    let mut handles = Vec::new();
    for _ in 0..16 {
        let s = s.clone();
        handles.push(tokio::spawn(async move {
            s.call(Method::POST, "/labels/set-a/review", Some("tok-r1"), Some(decisions(6, |_| "include")))
                .await
                .0
        }));
    }
    let mut ok = 0;
    let mut conflict = 0;
    for h in handles {
        match h.await.unwrap() {
            StatusCode::OK => ok += 1,
            StatusCode::CONFLICT => conflict += 1,
            other => panic!("unexpected {other}"),
        }
    }
    assert_eq!((ok, conflict), (1, 15));
    assert_eq!(s.state.with_study(|st| st.export_records().len()), 6);
}

#[tokio::test]
async fn adjudication_closes_the_label_and_locks_it() {
    let s = two_labels().await;
    let path = "/labels/set-a/review";
    let _: Receipt = s.post(path, "tok-r1", decisions(6, |_| "include")).await;
    let r: Receipt = s.post(path, "tok-r2", decisions(6, |i| if i == 2 { "exclude" } else { "include" })).await;
    assert_eq!((r.adjudication_items_created, r.label_status), (1, LabelStatus::AwaitingAdjudication));

    let q: QueueView = s.get("/adjudication/queue", "tok-adj").await;
    assert_eq!(q.discrepancies.len(), 1);
    assert_eq!(q.discrepancies[0].term_id, 2);
    let out: serde_json::Value = s.post("/adjudication/d-0", "tok-adj", json!({"verdict": "exclude"})).await;
    assert_eq!(out["label_status"], "closed");
    let (st, e) = error(&s, Method::POST, "/adjudication/d-0", Some("tok-adj"), Some(json!({"verdict": "include"}))).await;
    assert_eq!((st, e.error.as_str()), (StatusCode::CONFLICT, "AlreadyAdjudicated"));
    let body = json!({"user_terms": [{"category": "AdverseEvent", "text": "vomiting"}]});
    let (st, e) = error(&s, Method::POST, "/labels/set-a/user-terms", Some("tok-r1"), Some(body)).await;
    assert_eq!((st, e.error.as_str()), (StatusCode::CONFLICT, "LabelClosed"));
}

#[tokio::test]
async fn export_round_trips_into_the_same_metrics() {
    let s = two_labels().await;
    let empty = s.call(Method::GET, "/export/decisions", Some("tok-adj"), None).await;
    assert_eq!(empty, (StatusCode::OK, String::new()));

    let ut = json!([{"category": "BoxedWarning", "text": "Diarrhea"}, {"category": "AdverseEvent", "text": "blood pressure"}]);
    let mut a1 = decisions(6, |_| "include");
    a1["user_terms"] = ut.clone();
    let _: Receipt = s.post("/labels/set-a/review", "tok-r1", a1).await;
    let _: Receipt = s.post("/labels/set-a/review", "tok-r2", decisions(6, |i| if i < 2 { "exclude" } else { "include" })).await;
    let _: Receipt = s.post("/labels/set-b/review", "tok-r2", decisions(4, |_| "include")).await;
    let _: Receipt = s.post("/labels/set-b/review", "tok-r3", decisions(4, |i| if i == 3 { "exclude" } else { "include" })).await;
    for (item, verdict) in [("d-0", "include"), ("d-1", "exclude"), ("d-2", "exclude"), ("u-0", "include"), ("u-1", "include")] {
        let _: serde_json::Value = s.post(&format!("/adjudication/{item}"), "tok-adj", json!({ "verdict": verdict })).await;
    }

    let (st, first) = s.call(Method::GET, "/export/decisions", Some("tok-r4"), None).await;
    assert_eq!(st, StatusCode::OK);
    let (_, second) = s.call(Method::GET, "/export/decisions", Some("tok-adj"), None).await;
    assert_eq!(first, second);
    assert_eq!(first.lines().count(), 12);

    let live = metrics_view(&s.state);
    assert_eq!(live.closed_labels, 2);
    let res = resources();
    let classifier = Classifier {
        store: &res.store,
        stopwords: &res.stopwords,
        filter: &res.filter,
    };
    let offline = metrics_from_export(&read_export(Cursor::new(first.as_bytes())).unwrap(), Some(&classifier));
    assert_eq!(offline.counts, live.counts);
    assert_eq!(offline.overall_agreement, live.overall_agreement);
    assert_eq!(offline.adjudicator_agreement, live.adjudicator_agreement);
    assert_eq!(offline.scores, live.scores);
    // 10 terms, 7 concordant; d-1 and d-2 excluded; one accepted miss
    // (diarrhoea in the boxed warning; blood pressure has a rejected type).
    assert_eq!(live.overall_agreement, Some(0.7));
    let o = live.counts.overall();
    assert_eq!((o.tp, o.fp, o.fn_), (8, 2, 1));
}

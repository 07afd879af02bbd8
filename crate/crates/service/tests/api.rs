use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, Response, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use dsearch_core::config::{CustomField, EngineConfig, FieldType};
use dsearch_core::index::IndexShard;
use dsearch_core::ingest::content_hash;
use dsearch_service::multipart::{encode, Part};
use dsearch_service::{router, AppState, PROVENANCE_HEADER};

const BOUNDARY: &str = "test-boundary-7MA4YWxk";

struct Harness {
    app: Router,
    _dir: tempfile::TempDir,
}

fn config(dir: &std::path::Path) -> EngineConfig {
    let mut c = EngineConfig::default();
    c.index_path = dir.join("index");
    c.cache_path = dir.join("cache");
    c.custom_metadata_fields = vec![CustomField {
        name: "license".into(),
        field_type: FieldType::Enum,
        required: false,
        enum_values: Some(vec!["cc-by".into(), "odbl".into()]),
    }];
    c
}

fn harness_with(edit: impl FnOnce(&mut EngineConfig)) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path());
    edit(&mut c);
    let state = AppState::in_memory(c.clone(), IndexShard::new(c.lsh));
    Harness {
        app: router(Arc::new(state)),
        _dir: dir,
    }
}

fn harness() -> Harness {
    harness_with(|_| {})
}

fn file_part(name: &str, filename: &str, data: &str) -> Part {
    Part {
        name: name.into(),
        filename: Some(filename.into()),
        content_type: Some("text/csv".into()),
        data: data.as_bytes().to_vec(),
    }
}

fn json_part(name: &str, v: &Value) -> Part {
    Part {
        name: name.into(),
        filename: None,
        content_type: Some("application/json".into()),
        data: v.to_string().into_bytes(),
    }
}

fn multipart_request(uri: &str, parts: &[Part]) -> Request<Body> {
    Request::post(uri)
        .header(
            header::CONTENT_TYPE,
            format!("multipart/form-data; boundary={BOUNDARY}"),
        )
        .body(Body::from(encode(BOUNDARY, parts)))
        .unwrap()
}

fn json_request(uri: &str, v: &Value) -> Request<Body> {
    Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(v.to_string()))
        .unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Response<Body>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    (resp.status(), resp)
}

async fn body_bytes(resp: Response<Body>) -> Vec<u8> {
    resp.into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec()
}

async fn send_json(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let (status, resp) = send(app, req).await;
    let bytes = body_bytes(resp).await;
    (
        status,
        serde_json::from_slice(&bytes).unwrap_or(Value::Null),
    )
}

async fn upload(app: &Router, filename: &str, csv: &str, meta: Value) -> (StatusCode, Value) {
    send_json(
        app,
        multipart_request(
            "/api/v1/upload",
            &[
                file_part("file", filename, csv),
                json_part("metadata", &meta),
            ],
        ),
    )
    .await
}

fn borough_csv() -> String {
    let mut s = String::from("borough,population,area_km2\n");
    for (b, p, a) in [
        ("Manhattan", 1694251, 59.1),
        ("Brooklyn", 2736074, 179.7),
        ("Queens", 2405464, 281.1),
        ("Bronx", 1472654, 109.0),
        ("Staten Island", 495747, 151.2),
    ] {
        s.push_str(&format!("{b},{p},{a}\n"));
    }
    s
}

fn complaints_csv() -> String {
    let mut s = String::from("complaint_id,borough,response_hours\n");
    let boroughs = [
        "Manhattan",
        "Brooklyn",
        "Queens",
        "Bronx",
        "Manhattan",
        "Queens",
        "Brooklyn",
        "Bronx",
    ];
    for (i, b) in boroughs.iter().enumerate() {
        s.push_str(&format!("{},{b},{}\n", 1000 + i, 2 + i));
    }
    s
}

#[tokio::test]
async fn upload_then_keyword_search() {
    let h = harness();
    let (status, body) = upload(
        &h.app,
        "boroughs.csv",
        &borough_csv(),
        json!({"description": "NYC borough population"}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let id = body["id"].as_str().unwrap().to_string();
    assert_eq!(body["profile"]["name"], "boroughs");
    upload(&h.app, "complaints.csv", &complaints_csv(), json!({})).await;

    let (status, page) = send_json(
        &h.app,
        json_request("/api/v1/search", &json!({"keywords": ["population"]})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(page["total"], 1);
    assert_eq!(page["results"][0]["dataset_id"], id.as_str());

    let (_, page) = send_json(
        &h.app,
        json_request("/api/v1/search", &json!({"keywords": ["borough"]})),
    )
    .await;
    let scores: Vec<f64> = page["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["total_score"].as_f64().unwrap())
        .collect();
    assert_eq!(scores.len(), 2);
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[tokio::test]
async fn search_errors() {
    let h = harness();
    let (status, body) = send_json(
        &h.app,
        Request::post("/api/v1/search").body(Body::empty()).unwrap(),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "EmptyQuery");
    assert!(body["message"].is_string());

    let (status, body) = send_json(&h.app, json_request("/api/v1/search", &json!({}))).await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("EmptyQuery"))
    );

    let (status, body) = send_json(
        &h.app,
        json_request("/api/v1/search", &json!({"keywords": 3})),
    )
    .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("InvalidQuery"))
    );

    let (status, body) = send_json(
        &h.app,
        json_request(
            "/api/v1/search",
            &json!({"spatial": {"named_area": "Atlantis"}}),
        ),
    )
    .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("UnknownNamedArea"))
    );

    let ragged = "a,b\n1,2\n3\n";
    let (status, body) = send_json(
        &h.app,
        multipart_request(
            "/api/v1/search",
            &[file_part("related_file", "r.csv", ragged)],
        ),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert!(
        body["code"] == "RaggedRows" || body["code"] == "MalformedCsv",
        "{body}"
    );
}

#[tokio::test]
async fn upload_type_override_and_metadata() {
    let h = harness();
    let mut csv = String::from("event_day,count\n");
    for d in 1..=16 {
        csv.push_str(&format!("2021-03-{d:02},{d}\n"));
    }
    csv.push_str("unknown,1\nunknown,2\ntbd,3\npending,4\n");

    let (status, body) = upload(&h.app, "events.csv", &csv, json!({"name": "Events"})).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(
        body["profile"]["columns"][0]["detected_type"],
        "categorical"
    );
    // same bytes again
    let (status, dup) = upload(&h.app, "again.csv", &csv, json!({})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(dup["code"], "Duplicate");
    assert_eq!(dup["details"]["id"], body["id"]);

    let csv2 = csv.replace("count", "visits");
    let (status, body) = upload(
        &h.app,
        "events2.csv",
        &csv2,
        json!({"type_overrides": {"event_day": "temporal"}, "custom_metadata": {"license": "odbl"}}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let col = &body["profile"]["columns"][0];
    assert_eq!(col["detected_type"], "categorical");
    assert_eq!(col["user_type_override"], "temporal");
    assert!(col["summary"].to_string().contains("temporal"), "{col}");
    assert_eq!(body["profile"]["custom_metadata"]["license"], "odbl");

    let (status, body) = upload(
        &h.app,
        "x.csv",
        "k\n1\n",
        json!({"custom_metadata": {"license": "mit"}}),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "InvalidMetadata");
    assert_eq!(body["details"]["violations"][0]["field"], "license");

    let (status, body) = upload(
        &h.app,
        "x.csv",
        "k\nabc\n",
        json!({"type_overrides": {"k": "numerical"}}),
    )
    .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (
            StatusCode::UNPROCESSABLE_ENTITY,
            Some("OverrideUnparseable")
        )
    );
}

#[tokio::test]
async fn required_custom_field() {
    let h = harness_with(|c| {
        c.custom_metadata_fields.push(CustomField {
            name: "owner".into(),
            field_type: FieldType::String,
            required: true,
            enum_values: None,
        })
    });
    let (status, body) = upload(&h.app, "x.csv", "k\n1\n", json!({})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["details"]["violations"][0]["field"], "owner");
    let (status, _) = upload(
        &h.app,
        "x.csv",
        "k\n1\n",
        json!({"custom_metadata": {"owner": "parks"}}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
}

#[tokio::test]
async fn search_then_augment_round_trip() {
    let h = harness();
    let (_, right) = upload(&h.app, "boroughs.csv", &borough_csv(), json!({})).await;
    let right_id = right["id"].as_str().unwrap().to_string();
    let (_, left) = upload(&h.app, "complaints.csv", &complaints_csv(), json!({})).await;
    let left_id = left["id"].as_str().unwrap().to_string();

    // related search by file; the result carries everything augment needs
    let (status, page) = send_json(
        &h.app,
        multipart_request(
            "/api/v1/search",
            &[
                file_part("related_file", "complaints.csv", &complaints_csv()),
                Part {
                    name: "mode".into(),
                    filename: None,
                    content_type: None,
                    data: b"join".to_vec(),
                },
            ],
        ),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{page}");
    let hit = page["results"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["dataset_id"] == right_id.as_str())
        .expect("borough table found")
        .clone();
    assert_eq!(hit["augmentation"]["mode"], "join");

    let request = json!({"right_id": hit["dataset_id"], "augmentation": hit["augmentation"]});
    let (status, resp) = send(
        &h.app,
        multipart_request(
            "/api/v1/augment",
            &[
                json_part("request", &request),
                file_part("left_file", "complaints.csv", &complaints_csv()),
            ],
        ),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert!(resp.headers()[header::CONTENT_TYPE]
        .to_str()
        .unwrap()
        .starts_with("text/csv"));
    let prov: Value =
        serde_json::from_str(resp.headers()[PROVENANCE_HEADER].to_str().unwrap()).unwrap();
    assert_eq!(prov["right_id"], right_id.as_str());
    assert_eq!(prov["left_rows"], 8);
    assert_eq!(prov["result_rows"], 8);
    let csv = String::from_utf8(body_bytes(resp).await).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 9);
    assert!(
        lines[0].starts_with("complaint_id,borough,response_hours,"),
        "{}",
        lines[0]
    );
    assert!(lines[1].contains("1694251"), "{}", lines[1]);

    // same through JSON with the left side by id
    let request =
        json!({"left_id": left_id, "right_id": right_id, "augmentation": hit["augmentation"]});
    let (status, resp) = send(&h.app, json_request("/api/v1/augment", &request)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(String::from_utf8(body_bytes(resp).await).unwrap(), csv);
}

#[tokio::test]
async fn augment_errors() {
    let h = harness();
    let (_, right) = upload(&h.app, "boroughs.csv", &borough_csv(), json!({})).await;
    let (_, left) = upload(&h.app, "complaints.csv", &complaints_csv(), json!({})).await;
    let (l, r) = (left["id"].clone(), right["id"].clone());

    let spec =
        json!({"mode": "join", "pairs": [{"left_column": "borough", "right_column": "borough"}]});
    let (status, body) = send_json(
        &h.app,
        json_request(
            "/api/v1/augment",
            &json!({"left_id": l, "right_id": "ds-missing", "spec": spec}),
        ),
    )
    .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::NOT_FOUND, Some("NotFound"))
    );

    let bad = json!({"mode": "join", "pairs": [{"left_column": "borough", "right_column": "borough"}],
                     "agg": {"borough": "mean"}, "include_columns": ["borough"]});
    let (status, body) = send_json(
        &h.app,
        json_request(
            "/api/v1/augment",
            &json!({"left_id": l, "right_id": r, "spec": bad}),
        ),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(body["code"], "AggregationOnNonNumeric");
    assert_eq!(body["details"]["column"], "borough");

    let (status, body) = send_json(
        &h.app,
        json_request("/api/v1/augment", &json!({"left_id": l, "right_id": r})),
    )
    .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("InvalidRequest"))
    );
}

#[tokio::test]
async fn dataset_detail_download_and_stats() {
    let h = harness();
    let csv = borough_csv();
    let (_, body) = upload(&h.app, "boroughs.csv", &csv, json!({"source": "nyc"})).await;
    let id = body["id"].as_str().unwrap();
    upload(&h.app, "complaints.csv", &complaints_csv(), json!({})).await;

    let (status, profile) = send_json(&h.app, get(&format!("/api/v1/datasets/{id}"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(profile["row_count"], 5);
    let (status, body) = send_json(&h.app, get("/api/v1/datasets/ds-nope")).await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::NOT_FOUND, Some("NotFound"))
    );

    let (status, resp) = send(&h.app, get(&format!("/api/v1/datasets/{id}/download"))).await;
    assert_eq!(status, StatusCode::OK);
    let bytes = body_bytes(resp).await;
    assert_eq!(
        content_hash(&bytes),
        profile["provenance"]["content_hash"].as_str().unwrap()
    );
    let (status, _) = send(&h.app, get("/api/v1/datasets/ds-nope/download")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (_, stats) = send_json(&h.app, get("/api/v1/stats")).await;
    assert_eq!(stats["dataset_count"], 2);
    assert_eq!(stats["per_source"]["nyc"], 1);
    assert_eq!(stats["per_source"]["upload"], 1);
    assert_eq!(stats["per_type"]["categorical"], 2);
    let (_, list) = send_json(&h.app, get("/api/v1/datasets")).await;
    assert_eq!(list.as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn evicted_upload_is_gone() {
    let h = harness_with(|c| c.cache_cap_bytes = 0);
    let (_, body) = upload(&h.app, "boroughs.csv", &borough_csv(), json!({})).await;
    let id = body["id"].as_str().unwrap();
    // the lone entry survives its own put, the next upload evicts it
    upload(&h.app, "complaints.csv", &complaints_csv(), json!({})).await;
    let (status, body) = send_json(&h.app, get(&format!("/api/v1/datasets/{id}/download"))).await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::GONE, Some("SourceGone"))
    );
}

#[tokio::test]
async fn config_areas_and_cors() {
    let h = harness();
    let (_, cfg) = send_json(&h.app, get("/api/v1/config")).await;
    assert_eq!(cfg["custom_metadata_fields"][0]["name"], "license");
    let (status, areas) = send_json(&h.app, get("/api/v1/areas")).await;
    assert_eq!(status, StatusCode::OK);
    assert!(areas.as_array().unwrap().len() > 10);
    let (status, _) = send_json(&h.app, get("/api/v1/areas/Atlantis")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let req = Request::get("/api/v1/stats")
        .header(header::ORIGIN, "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let (_, resp) = send(&h.app, req).await;
    assert_eq!(resp.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "*");
}

#[tokio::test]
async fn concurrent_uploads_all_land() {
    let h = harness();
    let mut tasks = Vec::new();
    for i in 0..12 {
        let app = h.app.clone();
        tasks.push(tokio::spawn(async move {
            let csv = format!("station,reading\nS{i},{i}\nS{},{}\n", i + 1, i * 2);
            upload(&app, &format!("s{i}.csv"), &csv, json!({})).await.0
        }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::CREATED);
    }
    let (_, stats) = send_json(&h.app, get("/api/v1/stats")).await;
    assert_eq!(stats["dataset_count"], 12);
}

#[tokio::test]
async fn index_persists_across_restarts() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path());
    let app = router(Arc::new(AppState::open(c.clone()).unwrap()));
    let (status, body) = upload(&app, "boroughs.csv", &borough_csv(), json!({})).await;
    assert_eq!(status, StatusCode::CREATED);
    drop(app);

    let app = router(Arc::new(AppState::open(c).unwrap()));
    let (status, profile) = send_json(
        &app,
        get(&format!(
            "/api/v1/datasets/{}",
            body["id"].as_str().unwrap()
        )),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(profile, body["profile"]);
}

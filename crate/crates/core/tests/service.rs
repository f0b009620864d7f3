use std::path::Path;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use cvkit::geometry::{dlt_project, write_dlt_coefficients, CameraProfile};
use cvkit::pipeline::scan_registry;
use cvkit::pose::{write_pose_file, Part, PoseFormat, PoseSequence, Skeleton};
use cvkit::service::{router, AppState, Project, ProjectCamera};
use http_body_util::BodyExt;
use nalgebra::Point3;
use serde_json::{json, Value};
use tower::ServiceExt;

fn rig() -> Vec<CameraProfile> {
    vec![
        CameraProfile::new(
            "left",
            [800.0, 0.0, -320.0, 100.0, 0.0, 800.0, -240.0, 50.0, 0.0, 0.0, -1.0],
            640,
            480,
        ),
        CameraProfile::new(
            "right",
            [0.0, 800.0, -320.0, 80.0, 800.0, 0.0, -240.0, -30.0, 0.0, 0.0, -1.0],
            640,
            480,
        ),
        CameraProfile::new(
            "top",
            [
                600.0, 300.0, -100.0, 20.0, -200.0, 700.0, -300.0, 10.0, 0.05, 0.02, -1.0,
            ],
            640,
            480,
        ),
    ]
}

fn fixture_project(dir: &Path) {
    let frames = dir.join("left_frames");
    std::fs::create_dir(&frames).unwrap();
    for i in 0..3u8 {
        let img = image::RgbImage::from_fn(8, 6, |x, y| image::Rgb([i * 50, x as u8 * 20, y as u8 * 30]));
        img.save(frames.join(format!("frame{i}.png"))).unwrap();
    }
    let mut p = Project::new("fixture");
    p.cameras = ["left", "right", "top"].into_iter().map(ProjectCamera::new).collect();
    p.cameras[0].frames = Some("left_frames".into());
    p.part_order = vec!["snout".into(), "tail".into()];
    p.save(dir).unwrap();

    let mut seq = PoseSequence::new(vec!["snout".into(), "tail".into()], 3)
        .unwrap()
        .with_fps(30.0);
    for i in 0..20u64 {
        let t = i as f64;
        seq.push(Skeleton::new(
            i,
            vec![
                Part::new("snout", vec![t, 2.0 * t, 5.0], 0.9),
                Part::new("tail", vec![t - 3.0, 2.0 * t, 1.0], 0.8),
            ],
        ))
        .unwrap();
    }
    write_pose_file(&seq, dir.join("track.csv"), PoseFormat::Cvkit).unwrap();
}

struct Client {
    app: axum::Router,
}

impl Client {
    fn new(dir: &Path) -> Self {
        Self {
            app: router(AppState::open(dir).unwrap()),
        }
    }

    async fn raw(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>, String) {
        let mut req = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let ctype = resp
            .headers()
            .get("content-type")
            .map(|v| v.to_str().unwrap().to_string())
            .unwrap_or_default();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, bytes, ctype)
    }

    async fn json(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, bytes, _) = self.raw(method, uri, body).await;
        (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
    }
}

#[tokio::test]
async fn processors_match_scan() {
    let dir = tempfile::tempdir().unwrap();
    fixture_project(dir.path());
    let procs = dir.path().join("processors");
    std::fs::create_dir(&procs).unwrap();
    std::fs::write(
        procs.join("copy.processor"),
        "id = copy\ncategory = utility\ninput_kind = pose3d\noutput_kind = pose3d\nexec = \"external:cp {input} {output}\"\n",
    )
    .unwrap();
    let c = Client::new(dir.path());
    let (status, body) = c.json(Method::GET, "/processors", None).await;
    assert_eq!(status, StatusCode::OK);
    let reg = scan_registry(&[procs]).unwrap();
    assert_eq!(body["processors"], serde_json::to_value(reg.manifests()).unwrap());
    assert!(body["processors"].as_array().unwrap().iter().any(|m| m["id"] == "copy"));
}

#[tokio::test]
async fn annotation_round_trip_and_delete() {
    let dir = tempfile::tempdir().unwrap();
    fixture_project(dir.path());
    let c = Client::new(dir.path());
    let posted = json!([
        {"camera": "left", "frame": 3, "part": "snout", "x": 100.0, "y": 200.0, "provenance": "annotated"},
        {"camera": "right", "frame": 3, "part": "tail", "x": 0.5, "y": 1.25, "provenance": "annotated"}
    ]);
    let (status, _) = c
        .json(Method::POST, "/annotations", Some(json!({"annotations": posted})))
        .await;
    assert_eq!(status, StatusCode::OK);
    let (_, got) = c.json(Method::GET, "/annotations", None).await;
    assert_eq!(got["annotations"], posted);
    let (_, only) = c.json(Method::GET, "/annotations?camera=right", None).await;
    assert_eq!(only["annotations"].as_array().unwrap().len(), 1);

    // restart: state lives in the project dir only
    let c = Client::new(dir.path());
    let (_, again) = c.json(Method::GET, "/annotations", None).await;
    assert_eq!(again["annotations"], posted);

    let (status, removed) = c
        .json(Method::DELETE, "/annotations?camera=left&frame=3&part=snout", None)
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(removed["x"], 100.0);
    let (status, err) = c
        .json(Method::DELETE, "/annotations?camera=left&frame=3&part=snout", None)
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "NotFound");
}

#[tokio::test]
async fn interpolation_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    fixture_project(dir.path());
    let c = Client::new(dir.path());
    let pts = json!({"annotations": [
        {"camera": "left", "frame": 0, "part": "snout", "x": 0.0, "y": 0.0},
        {"camera": "left", "frame": 10, "part": "snout", "x": 10.0, "y": 10.0}
    ]});
    c.json(Method::POST, "/annotations", Some(pts)).await;
    let req = json!({"camera": "left", "part": "snout", "frame_a": 0, "frame_b": 10});
    let (status, body) = c.json(Method::POST, "/annotations/interpolate", Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["written"], 9);
    let (_, f5) = c.json(Method::GET, "/annotations?camera=left&frame=5", None).await;
    assert_eq!(f5["annotations"][0]["x"], 5.0);
    assert_eq!(f5["annotations"][0]["provenance"], "interpolated");

    let bad = json!({"camera": "left", "part": "tail", "frame_a": 0, "frame_b": 10});
    let (status, err) = c.json(Method::POST, "/annotations/interpolate", Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "MissingEndpoints");
    assert_eq!(err["detail"]["part"], "tail");
}

#[tokio::test]
async fn import_dlt_then_reproject_and_accept() {
    let dir = tempfile::tempdir().unwrap();
    fixture_project(dir.path());
    let c = Client::new(dir.path());
    let cams = rig();
    let mut csv = Vec::new();
    write_dlt_coefficients(&cams, &mut csv).unwrap();
    let (status, project) = c
        .json(
            Method::POST,
            "/calibration/import-dlt",
            Some(json!({"csv": String::from_utf8(csv).unwrap()})),
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(project["cameras"][2]["profile"]["name"], "top");

    let x = Point3::new(1.5, -2.0, -12.0);
    let (status, err) = c
        .json(Method::POST, "/reproject", Some(json!({"frame": 4, "part": "snout"})))
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "InsufficientViews");

    let mut ann = Vec::new();
    for cam in &cams[..2] {
        let uv = dlt_project(cam, &x).unwrap();
        ann.push(json!({"camera": cam.name, "frame": 4, "part": "snout", "x": uv.x, "y": uv.y}));
    }
    c.json(Method::POST, "/annotations", Some(json!({"annotations": ann})))
        .await;
    let (status, prop) = c
        .json(
            Method::POST,
            "/reproject",
            Some(json!({"frame": 4, "part": "snout", "store": true})),
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    let truth = dlt_project(&cams[2], &x).unwrap();
    let p = &prop["proposals"][0];
    assert_eq!(p["camera"], "top");
    assert!((p["x"].as_f64().unwrap() - truth.x).abs() < 1e-6);
    assert!((p["y"].as_f64().unwrap() - truth.y).abs() < 1e-6);

    let (_, stored) = c.json(Method::GET, "/annotations?camera=top", None).await;
    assert_eq!(stored["annotations"][0]["provenance"], "projected");
    // accepting re-posts the point as annotated
    let mut accepted = stored["annotations"][0].clone();
    accepted["provenance"] = json!("annotated");
    accepted.as_object_mut().unwrap().remove("residual");
    c.json(
        Method::POST,
        "/annotations",
        Some(json!({"annotations": [accepted.clone()]})),
    )
    .await;
    let (_, stored) = c.json(Method::GET, "/annotations?camera=top", None).await;
    assert_eq!(stored["annotations"][0], accepted);
}

#[tokio::test]
async fn calibration_frames_and_export() {
    let dir = tempfile::tempdir().unwrap();
    fixture_project(dir.path());
    let c = Client::new(dir.path());
    let mut ann = Vec::new();
    for f in 0..6u64 {
        for (k, cam) in ["left", "right", "top"].iter().enumerate() {
            let v = (f * 37 % 11) as f64 * 10.0 + k as f64;
            ann.push(json!({"camera": cam, "frame": f, "part": "snout", "x": v, "y": -v}));
        }
    }
    c.json(Method::POST, "/annotations", Some(json!({"annotations": ann})))
        .await;
    let (status, sel) = c
        .json(Method::POST, "/calibration/select-frames", Some(json!({"k": 3})))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(sel["frames"].as_array().unwrap().len(), 3);
    let (status, out) = c
        .json(Method::POST, "/calibration/export-easywand", Some(json!({"k": 3})))
        .await;
    assert_eq!(status, StatusCode::OK);
    let (frames, per_cam) = cvkit::geometry::read_easywand_points(dir.path().join("easywand")).unwrap();
    assert_eq!(json!(frames), out["frames"]);
    assert_eq!(per_cam.len(), 3);
}

#[tokio::test]
async fn frames_are_served_as_png() {
    let dir = tempfile::tempdir().unwrap();
    fixture_project(dir.path());
    let c = Client::new(dir.path());
    let (status, bytes, ctype) = c.raw(Method::GET, "/frames/left/2", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctype, "image/png");
    let img = image::load_from_memory(&bytes).unwrap().to_rgb8();
    assert_eq!(img.get_pixel(3, 1).0, [100, 60, 30]);
    assert_eq!(
        c.json(Method::GET, "/frames/left/9", None).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        c.json(Method::GET, "/frames/nope/0", None).await.0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn project_update_validates() {
    let dir = tempfile::tempdir().unwrap();
    fixture_project(dir.path());
    let c = Client::new(dir.path());
    let (_, mut p) = c.json(Method::GET, "/project", None).await;
    p["arena"] = json!([0.0, 0.0, 100.0, 100.0]);
    let (status, _) = c.json(Method::POST, "/project", Some(p.clone())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(c.json(Method::GET, "/project", None).await.1, p);
    p["cameras"][1]["name"] = json!("left");
    let (status, err) = c.json(Method::POST, "/project", Some(p)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "InvalidProject");
}

async fn wait_for_run(c: &Client, run_id: &str) -> Value {
    for _ in 0..500 {
        let (_, st) = c.json(Method::GET, &format!("/runs/{run_id}"), None).await;
        if st["state"] == "succeeded" || st["state"] == "failed" {
            return st;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("run {run_id} did not finish");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn pipeline_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    fixture_project(dir.path());
    let c = Client::new(dir.path());
    let text = "name = smooth\nsource = track.csv\nsink = smoothed.csv\n\n[stage]\nid = loader\n\n[stage]\nid = moving_average\nwindow = 3\n\n[stage]\nid = statistics\n";
    let (status, body) = c
        .json(Method::POST, "/pipelines", Some(json!({"id": "smooth", "text": text})))
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let (_, list) = c.json(Method::GET, "/pipelines", None).await;
    assert_eq!(list["pipelines"][0]["id"], "smooth");

    let (status, started) = c.json(Method::POST, "/pipelines/smooth/run", None).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let run_id = started["run_id"].as_str().unwrap().to_string();
    let st = wait_for_run(&c, &run_id).await;
    assert_eq!(st["state"], "succeeded", "{st}");
    assert_eq!(st["report"]["stages"].as_array().unwrap().len(), 3);

    let (status, bytes, ctype) = c.raw(Method::GET, &format!("/runs/{run_id}/artifacts/2"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctype, "text/csv");
    let ws = dir.path().join("runs").join(&run_id);
    assert_eq!(bytes, std::fs::read(ws.join("stage_2_statistics.csv")).unwrap());
    assert_eq!(
        c.json(Method::GET, &format!("/runs/{run_id}/artifacts/7"), None)
            .await
            .0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(c.json(Method::GET, "/runs/999", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_pipeline_is_rejected_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    fixture_project(dir.path());
    let c = Client::new(dir.path());
    let text = "name = broken\n\n[stage]\nid = kalman\n";
    let (status, err) = c
        .json(Method::POST, "/pipelines", Some(json!({"id": "broken", "text": text})))
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "InvalidPipeline");
    assert!(!err["detail"].as_array().unwrap().is_empty());
    let (status, err) = c
        .json(Method::POST, "/pipelines", Some(json!({"id": "x", "text": "[stage\n"})))
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "MalformedConfig");
    assert_eq!(
        c.json(Method::POST, "/pipelines/missing/run", None).await.0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn failed_run_reports_partial_progress() {
    let dir = tempfile::tempdir().unwrap();
    fixture_project(dir.path());
    let c = Client::new(dir.path());
    let text = "name = bad\nsource = track.csv\n\n[stage]\nid = loader\n\n[stage]\nid = align_axes\norigin = snout\nx_axis = tail\nxy_plane = ear\n";
    let (status, _) = c
        .json(Method::POST, "/pipelines", Some(json!({"id": "bad", "text": text})))
        .await;
    assert_eq!(status, StatusCode::OK);
    let (_, started) = c.json(Method::POST, "/pipelines/bad/run", None).await;
    let st = wait_for_run(&c, started["run_id"].as_str().unwrap()).await;
    assert_eq!(st["state"], "failed");
    assert_eq!(st["error"]["code"], "StageFailure");
    assert_eq!(st["report"]["stages"].as_array().unwrap().len(), 1);
}

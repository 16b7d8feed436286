use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use axum::body::Body;
use axum::http::{Method, Request};
use http_body_util::BodyExt;
use tower::ServiceExt;

use hyperscen::service::{router, AppState};
use hyperscen_core::profiling::ProfileVector;
use hyperscen_core::scenario::{parse_launch_script, read_scenario, to_canonical_json};
use hyperscen_core::{parse_board_config, VmDefinition, WorkloadClass};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperscen")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn board_parse_prints_canonical_capacities() {
    let out = stdout(&run(&["board", "parse", p(&fixture("board.xml")), "--json"]));
    let cap = parse_board_config(&std::fs::read_to_string(fixture("board.xml")).unwrap()).unwrap();
    assert_eq!(out, to_canonical_json(&cap).unwrap());
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["board", "parse", "/nonexistent/board.xml"]).status.code(), Some(1));
    assert_eq!(run(&["optimize", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.xml");
    std::fs::write(&bad, "<board><cpu><pcores>x</pcores></cpu></board>").unwrap();
    let o = run(&["board", "parse", p(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
}

/// Profiles both VMs through the CLI and writes vms.json with them embedded.
fn prepare(dir: &Path) -> (PathBuf, Vec<VmDefinition>) {
    let board = fixture("board.xml");
    let ai_trace = dir.join("llm.csv");
    stdout(&run(&["profile", "synth", "--class", "ai", "--size", "1", "--seed", "11", "--out", p(&ai_trace)]));
    let mut defs = Vec::new();
    for (id, class, trace) in [
        ("web-api", WorkloadClass::WebMicroservice, fixture("trace.csv")),
        ("llm", WorkloadClass::AiInference, ai_trace),
    ] {
        let prof: ProfileVector =
            serde_json::from_str(&stdout(&run(&["profile", "summarize", p(&trace), "--board", p(&board)]))).unwrap();
        defs.push(VmDefinition {
            vm_id: id.into(),
            workload_class: Some(class),
            profile: Some(prof),
            ..Default::default()
        });
    }
    let vms = dir.join("vms.json");
    std::fs::write(&vms, serde_json::to_string_pretty(&defs).unwrap()).unwrap();
    (vms, defs)
}

#[test]
fn optimize_writes_scenario_and_launch_script() {
    let dir = tempfile::tempdir().unwrap();
    let (vms, _) = prepare(dir.path());
    let out = dir.path().join("scenario.json");
    let o = run(&["optimize", "--board", p(&fixture("board.xml")), "--vms", p(&vms), "--out", p(&out), "--stats"]);
    let stats: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(stats["nodes_visited"].as_u64().unwrap() > 0);
    assert!(stats["nodes_pruned"].is_u64());

    let text = std::fs::read_to_string(&out).unwrap();
    let doc = read_scenario(&text).unwrap();
    assert_eq!(doc.vms.len(), 2);
    let launch = std::fs::read_to_string(dir.path().join("launch.sh")).unwrap();
    let parsed: Vec<_> = parse_launch_script(&launch).unwrap().into_iter().map(|(_, r)| r).collect();
    assert_eq!(parsed, doc.allocations());

    // same inputs, same bytes
    let again = dir.path().join("again.json");
    stdout(&run(&["optimize", "--board", p(&fixture("board.xml")), "--vms", p(&vms), "--out", p(&again)]));
    assert_eq!(std::fs::read_to_string(again).unwrap(), text);

    let eq = dir.path().join("equal.json");
    stdout(&run(&[
        "optimize", "--board", p(&fixture("board.xml")), "--vms", p(&vms), "--out", p(&eq), "--baseline", "equal",
    ]));
    let eq_doc = read_scenario(&std::fs::read_to_string(eq).unwrap()).unwrap();
    assert_eq!(eq_doc.vms[0].allocation, eq_doc.vms[1].allocation);
    assert_eq!(run(&["optimize", "--board", p(&fixture("board.xml")), "--vms", p(&vms), "--out", p(&out), "--baseline", "optimized"]).status.code(), Some(1));
}

#[tokio::test]
async fn cli_and_service_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (vms, defs) = prepare(dir.path());
    let out = dir.path().join("scenario.json");
    stdout(&run(&["optimize", "--board", p(&fixture("board.xml")), "--vms", p(&vms), "--out", p(&out)]));
    let cli_text = std::fs::read_to_string(&out).unwrap();

    let app = router(AppState::default());
    let call = |method: Method, uri: String, body: String| {
        let app = app.clone();
        async move {
            let req = Request::builder().method(method).uri(uri).body(Body::from(body)).unwrap();
            let resp = app.oneshot(req).await.unwrap();
            String::from_utf8(resp.into_body().collect().await.unwrap().to_bytes().to_vec()).unwrap()
        }
    };
    let v: serde_json::Value = serde_json::from_str(&call(Method::POST, "/sessions".into(), String::new()).await).unwrap();
    let id = v["session_id"].as_str().unwrap().to_string();
    call(Method::PUT, format!("/sessions/{id}/board"), std::fs::read_to_string(fixture("board.xml")).unwrap()).await;
    call(Method::PUT, format!("/sessions/{id}/vms"), serde_json::to_string(&defs).unwrap()).await;
    let svc_text = call(Method::POST, format!("/sessions/{id}/optimize"), String::new()).await;
    assert_eq!(svc_text, cli_text);
    let script = call(Method::GET, format!("/sessions/{id}/launch-script"), String::new()).await;
    assert_eq!(script, std::fs::read_to_string(dir.path().join("launch.sh")).unwrap());
}

#[test]
fn vm_spec_and_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let def = dir.path().join("def.json");
    std::fs::write(&def, r#"{"vm_id": "web-api", "workload_class": "web_microservice"}"#).unwrap();
    let board = fixture("board.xml");
    let spec: serde_json::Value = serde_json::from_str(&stdout(&run(&[
        "profile", "vm-spec", "--def", p(&def), "--board", p(&board), "--trace", p(&fixture("trace.csv")),
    ])))
    .unwrap();
    assert_eq!(spec["vm_id"], "web-api");
    assert!(!spec["qos_models"].as_object().unwrap().is_empty());
    // no profile anywhere
    assert_eq!(run(&["profile", "vm-spec", "--def", p(&def), "--board", p(&board)]).status.code(), Some(1));

    let (vms, _) = prepare(dir.path());
    let b: serde_json::Value = serde_json::from_str(&stdout(&run(&[
        "baseline", "--board", p(&board), "--vms", p(&vms), "--strategy", "proportional",
    ])))
    .unwrap();
    assert_eq!(b["strategy"], "proportional_split");
    assert_eq!(b["allocations"].as_object().unwrap().len(), 2);
}

#[test]
fn dataset_fit_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("d.jsonl");
    stdout(&run(&["dataset", "--per-class", "12", "--seed", "3", "--out", p(&ds)]));
    let lines = std::fs::read_to_string(&ds).unwrap();
    assert_eq!(lines.lines().count(), 36);

    let models: serde_json::Value = serde_json::from_str(&stdout(&run(&["fit", "--dataset", p(&ds)]))).unwrap();
    assert_eq!(models.as_object().unwrap().len(), 3);
    assert_eq!(run(&["fit", "--dataset", p(&ds), "--workload", "nope"]).status.code(), Some(1));

    let csv = stdout(&run(&["compare-models", "--dataset", p(&ds), "--splits", "2"]));
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "model,latency_train,latency_eval,throughput_train,throughput_eval");
    assert!(rows[1].starts_with("parametric,") && rows[2].starts_with("mlp,"));
}

#[test]
fn refine_sim_table() {
    let out = stdout(&run(&["refine-sim", "--seed", "7", "--scenarios", "3", "--strategies", "all"]));
    for s in ["equal", "proportional", "optimized"] {
        assert!(out.lines().any(|l| l.starts_with(s)), "{out}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&stdout(&run(&["refine-sim", "--seed", "7", "--scenarios", "3", "--strategies", "equal", "--json"])))
            .unwrap();
    assert_eq!(json.as_array().unwrap().len(), 1);
    assert_eq!(run(&["refine-sim", "--strategies", "fastest"]).status.code(), Some(1));
}

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::Router;
use easel_core::mock::{FixtureRegistry, FixtureSource, MockBackends};
use easel_core::workflow::CommandSpec;
use easel_core::{Backends, Capability, Command, ContentHash, Engine, EngineConfig, FixedClock, Session};
use easel_server::config::ServiceConfig;
use easel_server::service::AppState;
use easel_server::store::Store;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn registry() -> Arc<FixtureRegistry> {
    Arc::new(FixtureRegistry::load_dir(&fixtures_dir().join("scenes")).expect("scene fixtures load"))
}

/// Serve `router` on an ephemeral port from a background runtime and
/// return its base URL. The server lives until the process exits.
pub fn spawn(router: Router) -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()
            .unwrap()
            .block_on(async move {
                let l = tokio::net::TcpListener::from_std(listener).unwrap();
                axum::serve(l, router).await.unwrap();
            })
    });
    format!("http://{addr}")
}

pub fn spawn_mock(capabilities: &[Capability]) -> String {
    spawn(easel_server::mockserver::router(registry(), capabilities.to_vec()))
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(60)))
        .build()
        .into()
}

/// POST JSON, returning status and parsed body (Null when empty).
pub fn post_json(url: &str, body: &serde_json::Value) -> (u16, serde_json::Value) {
    let mut r = agent()
        .post(url)
        .header("content-type", "application/json")
        .send(serde_json::to_vec(body).unwrap())
        .unwrap();
    read(&mut r)
}

pub fn post_raw(url: &str, body: &[u8]) -> (u16, serde_json::Value) {
    let mut r = agent().post(url).header("content-type", "application/json").send(body).unwrap();
    read(&mut r)
}

pub fn get_json(url: &str) -> (u16, serde_json::Value) {
    let mut r = agent().get(url).call().unwrap();
    read(&mut r)
}

pub fn delete(url: &str) -> u16 {
    agent().delete(url).call().unwrap().status().as_u16()
}

pub fn get_bytes(url: &str) -> (u16, Vec<u8>) {
    let mut r = agent().get(url).call().unwrap();
    let status = r.status().as_u16();
    (status, r.body_mut().with_config().limit(1 << 30).read_to_vec().unwrap())
}

fn read(r: &mut ureq::http::Response<ureq::Body>) -> (u16, serde_json::Value) {
    let status = r.status().as_u16();
    let text = r.body_mut().with_config().limit(1 << 30).read_to_string().unwrap();
    let v = if text.is_empty() {
        serde_json::Value::Null
    } else {
        serde_json::from_str(&text).unwrap_or(serde_json::Value::String(text))
    };
    (status, v)
}

const SCENES: &[&str] = &["lake_scenery", "kid_sweatshirt", "dinner_table", "forest_band"];

fn coord(rng: &mut impl Rng) -> f64 {
    (rng.gen_range(0.0..1.0f64) * 1000.0).round() / 1000.0
}

/// A command JSON for a session showing `scene` with `masks` pending.
/// Mostly valid; some fail by design (unknown objects, nothing to undo).
pub fn random_spec(rng: &mut impl Rng, reg: &FixtureRegistry, scene: Option<&str>, masks: &[String]) -> Value {
    let Some(scene) = scene else {
        return json!({"op": "set_image", "fixture": SCENES.choose(rng).unwrap()});
    };
    let objects: Vec<&str> = reg
        .scene(scene)
        .map(|s| s.manifest.objects.iter().map(|o| o.name.as_str()).collect())
        .unwrap_or_default();
    let roll = rng.gen_range(0..100);
    match roll {
        0..=4 => json!({"op": "set_image", "fixture": SCENES.choose(rng).unwrap()}),
        5..=19 => json!({"op": "chat", "text": format!("turn {}", rng.gen_range(0..1000))}),
        20..=39 => {
            let text = if rng.gen_bool(0.9) && !objects.is_empty() {
                objects.choose(rng).unwrap().to_string()
            } else {
                "unicorn".into()
            };
            json!({"op": "segment_by_text", "text": text})
        }
        40..=47 => {
            let (x, y) = (coord(rng), coord(rng));
            let x2 = (x + rng.gen_range(-0.1..0.1f64)).clamp(0.0, 1.0);
            let y2 = (y + rng.gen_range(-0.1..0.1f64)).clamp(0.0, 1.0);
            json!({"op": "segment_by_stroke", "strokes": [{"points": [[x, y], [x2, y2]], "brush_radius": 0.02}]})
        }
        48..=72 if !masks.is_empty() => {
            let mask_id = masks.choose(rng).unwrap();
            match rng.gen_range(0..3) {
                0 => json!({"op": "remove_object", "mask_id": mask_id}),
                1 => json!({
                    "op": "move_object", "mask_id": mask_id,
                    "dx": (rng.gen_range(-0.3..0.3f64) * 100.0).round() / 100.0,
                    "dy": (rng.gen_range(-0.3..0.3f64) * 100.0).round() / 100.0,
                }),
                _ => json!({"op": "replace_object", "mask_id": mask_id, "prompt": format!("a thing {}", rng.gen_range(0..50))}),
            }
        }
        48..=77 => {
            let (x, y) = (coord(rng) * 0.7, coord(rng) * 0.7);
            json!({"op": "inpaint_objects", "grounding": {
                "instruction": "a red ball",
                "boxes": [[x, y, x + 0.2, y + 0.2]],
            }})
        }
        78..=80 => json!({"op": "generate_image", "caption": format!("a scene {}", rng.gen_range(0..20))}),
        81..=85 => json!({"op": "clear_masks"}),
        _ => json!({"op": "undo"}),
    }
}

pub struct TestService {
    pub base: String,
    pub state: Arc<AppState>,
    pub dir: tempfile::TempDir,
}

impl TestService {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn create(&self) -> String {
        let (status, body) = post_json(&self.url("/api/sessions"), &json!({}));
        assert_eq!(status, 201, "{body}");
        body["session_id"].as_str().unwrap().to_owned()
    }

    pub fn command(&self, id: &str, spec: &Value) -> (u16, Value) {
        post_json(&self.url(&format!("/api/sessions/{id}/command")), spec)
    }
}

pub fn test_config(dir: &std::path::Path) -> ServiceConfig {
    ServiceConfig {
        data_dir: dir.to_owned(),
        mock_mode: true,
        fixtures_dir: Some(fixtures_dir().join("scenes")),
        ..ServiceConfig::default()
    }
}

/// Mock-mode service over a fresh data directory.
pub fn service() -> TestService {
    service_with(|_| {}, None)
}

pub fn service_with(tweak: impl FnOnce(&mut ServiceConfig), backends: Option<Arc<dyn Backends>>) -> TestService {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = test_config(dir.path());
    tweak(&mut cfg);
    let state = match backends {
        Some(b) => AppState::new(cfg, b, Some(registry())).unwrap(),
        None => AppState::from_config(cfg).unwrap(),
    };
    let base = spawn(easel_server::service::router(state.clone()));
    TestService { base, state, dir }
}

/// Run `specs` in order on a fresh in-process session with local mocks.
pub fn serial_replay(specs: &[Value]) -> Session {
    let reg = registry();
    let engine = Engine::new(
        Arc::new(MockBackends::new(reg.clone())),
        Arc::new(FixedClock(0)),
        EngineConfig::default(),
    );
    let mut session = Session::with_id("serial");
    for spec in specs {
        let spec: CommandSpec = serde_json::from_value(spec.clone()).unwrap();
        if let Ok(cmd) = spec.resolve(Some(reg.as_ref() as &dyn FixtureSource)) {
            let _ = engine.execute(&mut session, cmd);
        }
    }
    session
}

/// Drive a service session with `n` random commands; returns the specs sent.
pub fn drive(svc: &TestService, id: &str, seed: u64, n: usize) -> Vec<Value> {
    let reg = registry();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene: Option<String> = None;
    let mut masks: Vec<String> = Vec::new();
    let mut sent = Vec::new();
    for _ in 0..n {
        let spec = random_spec(&mut rng, &reg, scene.as_deref(), &masks);
        let (status, body) = svc.command(id, &spec);
        assert!(
            matches!(status, 200 | 400 | 404 | 422),
            "unexpected {status} for {spec}: {body}"
        );
        if status == 200 {
            match spec["op"].as_str().unwrap() {
                "set_image" => scene = spec["fixture"].as_str().map(str::to_owned),
                "generate_image" => scene = Some("generated".into()),
                _ => {}
            }
            masks = body["masks"]
                .as_array()
                .unwrap()
                .iter()
                .map(|m| m["id"].as_str().unwrap().to_owned())
                .collect();
        }
        sent.push(spec);
    }
    sent
}

pub fn local_engine() -> Engine {
    Engine::new(
        Arc::new(MockBackends::new(registry())),
        Arc::new(FixedClock(1_700_000_000_000)),
        EngineConfig::default(),
    )
}

/// Run `n` random commands, saving after each one as the service does.
pub fn build_session(store: &Store, seed: u64, n: usize) -> Session {
    let reg = registry();
    let engine = local_engine();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = format!("s{seed}");
    let mut session = Session::with_id(&id).with_snapshots(store.snapshots_for(&id));
    let mut scene = None;
    let mut executed = 0;
    while executed < n {
        let masks: Vec<String> = session.pending_masks().map(|m| m.id.clone()).collect();
        let spec = random_spec(&mut rng, &reg, scene.as_deref(), &masks);
        let fixture = spec["fixture"].as_str().map(str::to_owned);
        let spec: CommandSpec = serde_json::from_value(spec).unwrap();
        let cmd = spec.resolve(Some(reg.as_ref() as &dyn FixtureSource)).unwrap();
        let before = session.revision();
        let ok = engine.execute(&mut session, cmd).is_ok();
        if ok && fixture.is_some() {
            scene = fixture;
        }
        if session.revision() > before {
            executed += 1;
            store.save(&session).unwrap();
        }
    }
    session
}

/// Canvas after each successful edit.
pub fn hash_chain(s: &Session) -> Vec<Option<ContentHash>> {
    s.history().iter().map(|e| e.canvas_hash_after).collect()
}

/// Undo to the floor, collecting the canvas hash after each step.
pub fn unwind(engine: &Engine, s: &mut Session) -> Vec<Option<ContentHash>> {
    let mut out = Vec::new();
    while engine.execute(s, Command::Undo).is_ok() {
        out.push(s.canvas_hash());
    }
    out
}

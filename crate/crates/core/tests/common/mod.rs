#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use easel_core::mock::{FixtureRegistry, MockBackends};
use easel_core::script::Scenario;
use easel_core::{Backends, Engine, EngineConfig, FixedClock};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn registry() -> Arc<FixtureRegistry> {
    Arc::new(FixtureRegistry::load_dir(&fixtures_dir().join("scenes")).expect("scene fixtures load"))
}

pub fn engine_with(backends: Arc<dyn Backends>) -> Engine {
    Engine::new(backends, Arc::new(FixedClock(1_700_000_000_000)), EngineConfig::default())
}

pub fn mock_engine(registry: &Arc<FixtureRegistry>) -> Engine {
    engine_with(Arc::new(MockBackends::new(registry.clone())))
}

pub fn scenario(name: &str) -> Scenario {
    let path = fixtures_dir().join("scenarios").join(format!("{name}.json"));
    Scenario::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

pub fn scenario_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(fixtures_dir().join("scenarios"))
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().into_string().unwrap();
            let stem = name.strip_suffix(".json")?;
            (!stem.ends_with(".golden")).then(|| stem.to_owned())
        })
        .collect();
    names.sort();
    names
}

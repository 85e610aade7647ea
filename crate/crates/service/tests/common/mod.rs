#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use scengen_core::retrieval::RegionIndex;
use scengen_interpreter::{ChatClient, Interpreter};
use scengen_model::Generator32;
use scengen_service::assets::{bundled_generator, fixture_index};
use scengen_service::store::ScenarioStore;
use scengen_service::{Interpretation, Pipeline};

fn shared() -> &'static (Generator32, RegionIndex) {
    static SHARED: OnceLock<(Generator32, RegionIndex)> = OnceLock::new();
    SHARED.get_or_init(|| (bundled_generator().unwrap(), fixture_index().unwrap()))
}

pub struct Harness {
    pub pipeline: Arc<Pipeline>,
    pub dir: tempfile::TempDir,
}

pub fn pipeline_with(interpretation: Interpretation, index: Option<RegionIndex>) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let (model, fixture) = shared();
    let pipeline = Pipeline {
        model: model.clone(),
        index: index.unwrap_or_else(|| fixture.clone()),
        interpreter: Interpreter::default(),
        interpretation,
        store: Some(ScenarioStore::open(dir.path().join("store")).unwrap()),
        default_k: 10,
        default_seed: None,
    };
    Harness { pipeline: Arc::new(pipeline), dir }
}

pub fn offline() -> Harness {
    pipeline_with(Interpretation::Offline, None)
}

pub fn chat(client: impl ChatClient + 'static) -> Harness {
    pipeline_with(Interpretation::Chat(Box::new(client)), None)
}

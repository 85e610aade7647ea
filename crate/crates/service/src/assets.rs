//! Fixtures shipped inside the binary: a generator trained on the eight fixture scenes, the
//! region index cut from the two fixture source maps, and the training configuration.

use scengen_core::retrieval::{build_region_index, BuildParams, RegionIndex, RetrievalError};
use scengen_core::synthetic::fixture_maps;
use scengen_model::checkpoint;
use scengen_model::{Generator32, ModelError};

use crate::training::TrainFile;

pub const BUNDLED_CHECKPOINT: &[u8] = include_bytes!("../assets/generator.safetensors");
pub const BUNDLED_TRAIN_CONFIG: &str = include_str!("../assets/train.toml");

pub fn bundled_generator() -> Result<Generator32, ModelError> {
    checkpoint::from_bytes(BUNDLED_CHECKPOINT)
}

pub fn fixture_index() -> Result<RegionIndex, RetrievalError> {
    let (maps, traces) = fixture_maps();
    Ok(build_region_index(&maps, &traces, &BuildParams::default())?.index)
}

pub fn bundled_train_file() -> TrainFile {
    BUNDLED_TRAIN_CONFIG.parse().expect("bundled training config is valid")
}

//! The `train` subcommand: a TOML document with `[generator]` and `[train]` tables, each
//! field optional and defaulted.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::Serialize;

use scengen_core::document::scenario_from_json;
use scengen_core::scenario::Scenario;
use scengen_model::train::{prepare_sample, train, TrainConfig, TrainReport};
use scengen_model::{Generator32, GeneratorConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainFile {
    pub generator: GeneratorConfig,
    pub train: TrainConfig,
}

/// Overlay `user` onto the serialized defaults so partial tables keep every other default.
fn overlay<T: Serialize + serde::de::DeserializeOwned>(defaults: &T, user: Option<&toml::Value>) -> anyhow::Result<T> {
    let mut base = toml::Value::try_from(defaults)?;
    if let (Some(toml::Value::Table(user)), toml::Value::Table(base)) = (user, &mut base) {
        for (k, v) in user {
            base.insert(k.clone(), v.clone());
        }
    } else if user.is_some() {
        bail!("expected a table");
    }
    Ok(base.try_into()?)
}

impl FromStr for TrainFile {
    type Err = anyhow::Error;

    fn from_str(text: &str) -> anyhow::Result<Self> {
        let doc: toml::Table = toml::from_str(text)?;
        if let Some(unknown) = doc.keys().find(|k| *k != "generator" && *k != "train") {
            bail!("unknown table [{unknown}]");
        }
        let generator = overlay(&GeneratorConfig::default(), doc.get("generator")).context("[generator]")?;
        let train = overlay(&TrainConfig::default(), doc.get("train")).context("[train]")?;
        Ok(Self { generator, train })
    }
}

/// Every `*.json` scenario document in `dir`, in file-name order.
pub fn load_scenarios(dir: &Path) -> anyhow::Result<Vec<(String, Scenario)>> {
    let mut names: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|p| {
            let bytes = fs::read(&p)?;
            let s = scenario_from_json(&bytes).with_context(|| p.display().to_string())?;
            Ok((p.file_name().unwrap_or_default().to_string_lossy().into_owned(), s))
        })
        .collect()
}

/// Train a fresh f32 generator; checkpoints and `metrics.jsonl` go to `out`.
pub fn run(data: &Path, file: &TrainFile, out: &Path, seed: u64) -> anyhow::Result<(Generator32, TrainReport)> {
    let scenes = load_scenarios(data)?;
    if scenes.is_empty() {
        bail!("no scenario documents in {}", data.display());
    }
    let samples = scenes
        .iter()
        .map(|(name, s)| prepare_sample(s, &file.generator).with_context(|| name.clone()))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut config = file.train.clone();
    config.seed = seed;
    let mut model = Generator32::new(file.generator.clone(), seed)?;
    let report = train(&mut model, &samples, &config, Some(out))?;
    Ok((model, report))
}

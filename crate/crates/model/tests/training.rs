use std::fs;

use scengen_core::synthetic::fixture_dataset;
use scengen_model::checkpoint;
use scengen_model::generator::GeneratorConfig;
use scengen_model::train::{prepare_sample, train, EpochRecord, TrainConfig, TrainError, TrainingSample};
use scengen_model::{Generator32, Generator64, ModelError};

fn tiny() -> GeneratorConfig {
    GeneratorConfig { d: 16, attribute_mlp_width: 32, mcg_blocks: 2, transformer_layers: 1, ..GeneratorConfig::default() }
}

fn samples(config: &GeneratorConfig, count: usize) -> Vec<TrainingSample> {
    fixture_dataset().iter().take(count).map(|s| prepare_sample(s, config).unwrap()).collect()
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig { batch_size: 2, epochs, seed: 5, learning_rate: 1e-3, ..TrainConfig::default() }
}

#[test]
fn defaults_follow_the_documented_recipe() {
    let c = TrainConfig::default();
    assert_eq!((c.learning_rate, c.batch_size, c.epochs), (3e-4, 64, 100));
    assert_eq!((c.weight_decay, c.clip_norm), (0.01, 1.0));
    assert!(TrainConfig { batch_size: 0, ..c.clone() }.validate().is_err());
    assert!(TrainConfig { learning_rate: f64::NAN, ..c.clone() }.validate().is_err());
    let g = GeneratorConfig::default();
    assert_eq!((g.d, g.mcg_blocks, g.transformer_layers, g.heads), (256, 5, 2, 4));
    assert_eq!((g.gmm_components, g.motion_modes, g.attribute_mlp_width), (5, 12, 512));
    assert_eq!((g.max_lanes, g.max_agents, g.horizon, g.dropout), (384, 32, 50, 0.1));
}

#[test]
fn zero_learning_rate_keeps_losses_constant() {
    let config = GeneratorConfig { dropout: 0.0, ..tiny() };
    let data = samples(&config, 3);
    let mut model = Generator64::new(config, 1).unwrap();
    let before = model.params().entries().iter().map(|e| e.value.clone()).collect::<Vec<_>>();
    let tc = TrainConfig { learning_rate: 0.0, batch_size: 3, ..quick(4) };
    let report = train(&mut model, &data, &tc, None).unwrap();
    assert_eq!(report.epochs.len(), 4);
    let first = &report.epochs[0];
    for e in &report.epochs {
        assert!((e.loss_total - first.loss_total).abs() < 1e-9 * first.loss_total.abs());
        assert!((e.loss_motion - first.loss_motion).abs() < 1e-9 * first.loss_motion.abs());
    }
    let after = model.params().entries().iter().map(|e| e.value.clone()).collect::<Vec<_>>();
    assert_eq!(before, after);
}

fn run(seed: u64) -> (Vec<EpochRecord>, Vec<f32>) {
    let config = tiny();
    let data = samples(&config, 4);
    let mut model = Generator32::new(config, 3).unwrap();
    let report = train(&mut model, &data, &TrainConfig { seed, ..quick(3) }, None).unwrap();
    let weights = model.params().entries().iter().flat_map(|e| e.value.data.clone()).collect();
    (report.epochs, weights)
}

#[test]
fn same_seed_reproduces_losses_and_weights() {
    let (a, wa) = run(5);
    let (b, wb) = run(5);
    let strip = |v: &[EpochRecord]| v.iter().map(|e| (e.loss_total, e.loss_position, e.loss_attr, e.loss_motion)).collect::<Vec<_>>();
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(wa, wb);
    let (c, _) = run(6);
    assert_ne!(strip(&a), strip(&c));
}

#[test]
fn training_reduces_loss_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny();
    let data = samples(&config, 8);
    let mut model = Generator32::new(config, 2).unwrap();
    let report = train(&mut model, &data, &TrainConfig { batch_size: 4, ..quick(6) }, Some(dir.path())).unwrap();
    assert_eq!(report.steps(), 12);
    let first = report.epochs.first().unwrap().loss_total;
    let last = report.epochs.last().unwrap().loss_total;
    assert!(last < first, "{first} -> {last}");

    let log = fs::read_to_string(dir.path().join("metrics.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 6);
    for (i, rec) in lines.iter().enumerate() {
        assert_eq!(rec["epoch"], i + 1);
        for key in ["loss_total", "loss_position", "loss_attr", "loss_motion", "lr", "wall_time"] {
            assert!(rec[key].is_number(), "{key}");
        }
    }
    let (best, last_path) = report.checkpoints.unwrap();
    let restored: Generator32 = checkpoint::load(&last_path).unwrap();
    assert_eq!(restored.params().entries(), model.params().entries());
    let best_model: Generator32 = checkpoint::load(&best).unwrap();
    assert_eq!(best_model.config(), model.config());
}

#[test]
fn checkpoint_round_trip_preserves_outputs() {
    let config = tiny();
    let model = Generator64::new(config.clone(), 12).unwrap();
    let bytes = checkpoint::to_bytes(&model).unwrap();
    let back: Generator64 = checkpoint::from_bytes(&bytes).unwrap();
    let s = &samples(&config, 1)[0];
    assert_eq!(model.infer(&s.lanes, &s.code).unwrap(), back.infer(&s.lanes, &s.code).unwrap());
}

/// Rewrite the JSON header of a safetensors blob.
fn edit_header(bytes: &[u8], f: impl FnOnce(&mut serde_json::Value)) -> Vec<u8> {
    let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let mut header: serde_json::Value = serde_json::from_slice(&bytes[8..8 + n]).unwrap();
    f(&mut header);
    let mut text = serde_json::to_string(&header).unwrap();
    while text.len() % 8 != 0 {
        text.push(' ');
    }
    let mut out = (text.len() as u64).to_le_bytes().to_vec();
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&bytes[8 + n..]);
    out
}

#[test]
fn checkpoint_refuses_mismatched_shapes_and_foreign_files() {
    let model = Generator64::new(tiny(), 1).unwrap();
    let bytes = checkpoint::to_bytes(&model).unwrap();

    let wider = edit_header(&bytes, |h| {
        let cfg = h["__metadata__"]["config"].as_str().unwrap().to_string();
        let mut cfg: serde_json::Value = serde_json::from_str(&cfg).unwrap();
        cfg["d"] = 24.into();
        h["__metadata__"]["config"] = serde_json::to_string(&cfg).unwrap().into();
    });
    match checkpoint::from_bytes::<f64>(&wider) {
        Err(ModelError::Checkpoint(msg)) => assert!(msg.contains("shape"), "{msg}"),
        other => panic!("expected a shape error, got {other:?}"),
    }

    let fewer_agents = edit_header(&bytes, |h| {
        let cfg = h["__metadata__"]["config"].as_str().unwrap().to_string();
        let mut cfg: serde_json::Value = serde_json::from_str(&cfg).unwrap();
        cfg["max_agents"] = 31.into();
        h["__metadata__"]["config"] = serde_json::to_string(&cfg).unwrap().into();
    });
    assert!(checkpoint::from_bytes::<f64>(&fewer_agents).is_err());

    let foreign = edit_header(&bytes, |h| h["__metadata__"]["format"] = "something-else".into());
    assert!(checkpoint::from_bytes::<f64>(&foreign).is_err());
    let bad_config = edit_header(&bytes, |h| h["__metadata__"]["config"] = "{\"d\": 0}".into());
    assert!(checkpoint::from_bytes::<f64>(&bad_config).is_err());
    assert!(checkpoint::from_bytes::<f64>(&bytes[..bytes.len() / 2]).is_err());

    // Precision converts on load.
    let single: Generator32 = checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(single.params().scalar_count(), model.params().scalar_count());
}

#[test]
fn non_finite_loss_reports_the_batch() {
    let config = tiny();
    let mut data = samples(&config, 4);
    data[2].targets.attributes[1][0][0] = f64::NAN;
    let mut model = Generator64::new(config, 4).unwrap();
    match train(&mut model, &data, &TrainConfig { batch_size: 1, ..quick(1) }, None) {
        Err(TrainError::Divergence { sample, epoch, losses, .. }) => {
            assert_eq!((sample, epoch), (2, 1));
            assert!(!losses.attr.is_finite() && losses.position.is_finite(), "{losses:?}");
        }
        other => panic!("expected divergence, got {other:?}"),
    }
    assert!(matches!(train(&mut model, &[], &quick(1), None), Err(TrainError::EmptyDataset)));
}

#[test]
fn preparation_checks_model_limits() {
    let scene = &fixture_dataset()[0];
    let short = GeneratorConfig { horizon: 20, ..tiny() };
    assert!(prepare_sample(scene, &short).is_err());
    let few_lanes = GeneratorConfig { max_lanes: 10, ..tiny() };
    assert!(prepare_sample(scene, &few_lanes).is_err());
    let s = prepare_sample(scene, &tiny()).unwrap();
    assert_eq!(s.code.agents.len(), s.targets.agent_count());
    assert_eq!(s.scenario.ego_index, 0);
}

//! The `scengen` command line.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use scengen_core::document::{map_to_json, source_map_from_json, scenario_from_json, scenario_to_json};
use scengen_core::eval::{evaluate_dataset, BandwidthPolicy};
use scengen_core::retrieval::{build_region_index, BuildParams, RegionIndex, SourceMap, TracePoint};
use scengen_core::synthetic::{fixture_dataset, fixture_maps};
use scengen_interpreter::{HttpChatClient, Interpreter};
use scengen_model::checkpoint;

use crate::assets::{bundled_generator, fixture_index};
use crate::config::ServiceConfig;
use crate::pipeline::{EditRequest, GenerateRequest, Interpretation, Pipeline};
use crate::render::{frame_file_name, png_bytes, render_frames, RenderStyle};
use crate::store::ScenarioStore;
use crate::training::{self, TrainFile};

#[derive(Debug, Parser)]
#[command(name = "scengen", version, about = "Language-conditioned traffic scenario generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Service configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Interpret with the fallback grammar and rule-based editor; no network access.
    #[arg(long)]
    pub offline: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scenario from a description and write its document.
    Generate {
        #[arg(long)]
        text: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        map_id: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Edit a scenario document with an instruction, regenerating on the same map.
    Edit {
        file: PathBuf,
        #[arg(long)]
        instruction: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Write one PNG per timestep (frame_001.png, ...).
    Render {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a generator on a directory of scenario documents.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// TOML with optional [generator] and [train] tables.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare generated and reference scenario directories.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `median` or a fixed positive kernel width.
        #[arg(long, default_value = "median")]
        bandwidth: BandwidthPolicy,
    },
    /// Build a region index from source maps and trace points.
    BuildIndex {
        /// Directory of map documents; each file stem is the source-map id.
        #[arg(long, required_unless_present = "fixture")]
        maps: Option<PathBuf>,
        /// JSON array of `{map_id, position: [x, y], heading}`.
        #[arg(long, required_unless_present = "fixture")]
        traces: Option<PathBuf>,
        /// Use the bundled fixture maps and traces.
        #[arg(long, conflicts_with_all = ["maps", "traces"])]
        fixture: bool,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the bundled fixture scenes, source maps and traces as documents.
    ExportFixtures {
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the /v1 HTTP API.
    Serve {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Overrides the configured listen address.
        #[arg(long)]
        listen: Option<String>,
    },
}

fn load_config(args: &PipelineArgs) -> anyhow::Result<ServiceConfig> {
    let mut config = match &args.config {
        Some(p) => ServiceConfig::from_file(p)?,
        None => ServiceConfig::default(),
    };
    config.offline |= args.offline;
    Ok(config)
}

/// Assemble a pipeline from configuration: checkpoint, index, interpreter and store.
pub fn build_pipeline(config: &ServiceConfig) -> anyhow::Result<Pipeline> {
    let model = match &config.checkpoint {
        Some(p) => checkpoint::load(p).with_context(|| format!("checkpoint {}", p.display()))?,
        None => bundled_generator().context("bundled checkpoint")?,
    };
    let index = match &config.index {
        Some(p) => RegionIndex::load(p).with_context(|| format!("index {}", p.display()))?,
        None => fixture_index().context("bundled index")?,
    };
    let interpretation = if config.offline {
        Interpretation::Offline
    } else {
        Interpretation::Chat(Box::new(HttpChatClient::from_env(config.llm.clone())?))
    };
    let mut interpreter = Interpreter::default();
    if let Some(t) = &config.transcript {
        interpreter = interpreter.with_transcript(t);
    }
    let store = config.store.as_ref().map(ScenarioStore::open).transpose()?;
    Ok(Pipeline { model, index, interpreter, interpretation, store, default_k: config.k, default_seed: config.seed })
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn read_scenario(path: &Path) -> anyhow::Result<scengen_core::scenario::Scenario> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    scenario_from_json(&bytes).with_context(|| path.display().to_string())
}

fn load_source_maps(dir: &Path) -> anyhow::Result<Vec<SourceMap>> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let map = source_map_from_json(&fs::read(&p)?).with_context(|| p.display().to_string())?;
            let map_id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok(SourceMap { map_id, map })
        })
        .collect()
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate { text, seed, k, map_id, out, pipeline } => {
            let p = build_pipeline(&load_config(&pipeline)?)?;
            let res = p.generate(&GenerateRequest { text, seed, k, map_id }).map_err(|e| anyhow::anyhow!(e))?;
            write_file(&out, &serde_json::to_vec(&res.scenario)?)?;
            let meta = json!({ "id": res.id, "region_id": res.region_id, "seed": res.seed, "summary": res.summary,
                "code": res.code, "warnings": res.warnings });
            println!("{meta}");
        }
        Command::Edit { file, instruction, out, pipeline } => {
            let p = build_pipeline(&load_config(&pipeline)?)?;
            let scenario: serde_json::Value = serde_json::from_slice(&scenario_to_json(&read_scenario(&file)?))?;
            let req = EditRequest { scenario_id: None, scenario: Some(scenario), instruction };
            let res = p.edit(&req).map_err(|e| anyhow::anyhow!(e))?;
            write_file(&out, &serde_json::to_vec(&res.scenario)?)?;
            let meta = json!({ "id": res.id, "region_id": res.region_id, "summary": res.summary,
                "code_before": res.code_before, "code": res.code, "warnings": res.warnings });
            println!("{meta}");
        }
        Command::Render { file, out } => {
            let frames = render_frames(&read_scenario(&file)?, &RenderStyle::default())?;
            fs::create_dir_all(&out)?;
            for (i, img) in frames.iter().enumerate() {
                write_file(&out.join(frame_file_name(i + 1)), &png_bytes(img))?;
            }
            println!("{} frames written to {}", frames.len(), out.display());
        }
        Command::Train { data, config, out, seed } => {
            let file: TrainFile = match config {
                Some(p) => fs::read_to_string(&p)?.parse().with_context(|| p.display().to_string())?,
                None => TrainFile { generator: Default::default(), train: Default::default() },
            };
            let (_, report) = training::run(&data, &file, &out, seed)?;
            let last = report.epochs.last().context("no epochs ran")?;
            println!(
                "{} steps, {} epochs; final loss {:.4}; best epoch {}; checkpoints in {}",
                report.steps(),
                report.epochs.len(),
                last.loss_total,
                report.best_epoch,
                out.display()
            );
        }
        Command::Eval { pred, reference, out, bandwidth } => {
            let report = evaluate_dataset(&pred, &reference, bandwidth)?;
            write_file(&out, &serde_json::to_vec_pretty(&report)?)?;
            println!(
                "{} pairs: pos {:.4}, heading {:.4}, speed {:.4}, size {:.4}, mADE {:.3}, mFDE {:.3}, SCR {:.3}",
                report.pair_count,
                report.mmd_position,
                report.mmd_heading,
                report.mmd_speed,
                report.mmd_size,
                report.made,
                report.mfde,
                report.scr
            );
        }
        Command::BuildIndex { maps, traces, fixture, radius, out } => {
            let (maps, traces) = if fixture {
                fixture_maps()
            } else {
                let maps = load_source_maps(maps.as_deref().context("--maps")?)?;
                let traces_path = traces.context("--traces")?;
                let traces: Vec<TracePoint> = serde_json::from_slice(&fs::read(&traces_path)?)
                    .with_context(|| traces_path.display().to_string())?;
                (maps, traces)
            };
            let mut params = BuildParams::default();
            if let Some(r) = radius {
                if !(r > 0.0) {
                    bail!("radius must be positive");
                }
                params.radius = r;
            }
            let report = build_region_index(&maps, &traces, &params)?;
            for s in &report.skipped {
                eprintln!("trace {} skipped: {}", s.index, s.reason);
            }
            report.index.save(&out)?;
            println!("{} regions written to {}", report.index.len(), out.display());
        }
        Command::ExportFixtures { out } => {
            for (i, s) in fixture_dataset().iter().enumerate() {
                write_file(&out.join("scenarios").join(format!("{i:02}.json")), &scenario_to_json(s))?;
            }
            let (maps, traces) = fixture_maps();
            for m in &maps {
                write_file(&out.join("maps").join(format!("{}.json", m.map_id)), &map_to_json(&m.map))?;
            }
            write_file(&out.join("traces.json"), &serde_json::to_vec_pretty(&traces)?)?;
            println!("fixtures written to {}", out.display());
        }
        Command::Serve { pipeline, listen } => {
            let mut config = load_config(&pipeline)?;
            config.store.get_or_insert_with(|| PathBuf::from("scenarios"));
            let addr: SocketAddr = listen.as_deref().unwrap_or(&config.listen).parse().context("listen address")?;
            let p = Arc::new(build_pipeline(&config)?);
            let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                log::info!("listening on http://{}", listener.local_addr()?);
                axum::serve(listener, crate::api::router(p))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}

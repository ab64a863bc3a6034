//! `nsdf train`: joint optimization over prepared grid caches.

use super::prepare::load_prepared;
use super::{write_manifest, CmdResult, Ctx};
use clap::Args;
use nsdf_core::model::{init_model, load_checkpoint, save_checkpoint, ArchitectureSpec};
use nsdf_core::rng::Stream;
use nsdf_core::train::{optimizer_from_blob, optimizer_to_blob, train, TrainConfig};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Args)]
pub struct TrainArgs {
    /// Prepared cache directory (from `nsdf prepare`).
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    pub out: PathBuf,
    /// History CSV path (default: <out>.history.csv).
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Resume from an earlier checkpoint with optimizer state.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub points_per_timepoint: Option<usize>,
    #[arg(long)]
    pub batch_sequences: Option<usize>,
    /// Train the rotation-aware variant.
    #[arg(long)]
    pub equivariant: bool,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub omega0: Option<f64>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

pub fn run(ctx: &Ctx, args: TrainArgs) -> CmdResult {
    let (names, grids) = load_prepared(&args.data)?;
    let mut tcfg: TrainConfig = ctx
        .file_config
        .apply_section("train", plain_train_config(ctx.seed))?
        .into();
    if let Some(v) = args.epochs {
        tcfg.epochs = v;
    }
    if let Some(v) = args.lr {
        tcfg.lr = v;
    }
    if let Some(v) = args.points_per_timepoint {
        tcfg.points_per_timepoint = v;
    }
    if let Some(v) = args.batch_sequences {
        tcfg.batch_sequences = v;
    }
    if args.checkpoint_every.is_some() {
        tcfg.checkpoint_every = args.checkpoint_every;
        tcfg.checkpoint_dir = args.out.parent().map(|p| p.to_path_buf());
    }
    tcfg.seed = ctx.seed;

    let mut arch = ctx
        .file_config
        .apply_section("arch", ArchitectureSpec::default())?;
    if args.equivariant {
        arch.equivariant = true;
    }
    if let Some(v) = args.latent_dim {
        arch.latent_dim = v;
    }
    if let Some(v) = args.omega0 {
        arch.omega0 = v;
    }

    let (state, resume_adam) = if let Some(resume_path) = &args.resume {
        let (state, blob) = load_checkpoint(resume_path).map_err(|e| e.to_string())?;
        let adam = blob
            .map(|b| optimizer_from_blob(&state, &b, tcfg.adam))
            .transpose()
            .map_err(|e| e.to_string())?;
        (state, adam)
    } else {
        let mut rng = Stream::new(ctx.seed, "init", 0);
        let mut state =
            init_model(&arch, 0, tcfg.sigma2, &mut rng).map_err(|e| e.to_string())?;
        for name in &names {
            state.register_sequence(name, &mut rng);
        }
        (state, None)
    };

    let arch_json = serde_json::to_value(&state.arch).unwrap();
    println!(
        "training {} sequences, {} epochs, {} parameters",
        grids.len(),
        tcfg.epochs,
        nsdf_core::model::count_parameters(&state.arch)
    );
    let out = train(state, &grids, &tcfg, resume_adam).map_err(|e| e.to_string())?;
    let blob = optimizer_to_blob(&out.state, &out.adam);
    save_checkpoint(&args.out, &out.state, Some(&blob)).map_err(|e| e.to_string())?;
    let history_path = args
        .history
        .clone()
        .unwrap_or_else(|| args.out.with_extension("history.csv"));
    std::fs::write(&history_path, out.history.to_csv()).map_err(|e| e.to_string())?;
    if let Some(last) = out.history.rows.last() {
        println!(
            "final epoch {}: loss_rec {:.6}, loss_code {:.6}, lr {:.2e}",
            last.epoch, last.loss_rec, last.loss_code, last.lr
        );
    }
    if let Some(dir) = args.out.parent() {
        write_manifest(
            dir,
            "train",
            ctx,
            &json!({
                "data": args.data.display().to_string(),
                "arch": arch_json,
                "train": train_config_json(&tcfg),
                "resume": args.resume.as_ref().map(|p| p.display().to_string()),
            }),
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Serializable mirror of `TrainConfig` for config files and manifests.
#[derive(serde::Serialize, serde::Deserialize)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_sequences: usize,
    pub points_per_timepoint: usize,
    pub lr: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub sigma2: f64,
    pub near_threshold_um: f64,
    pub seed: u64,
    pub checkpoint_every: Option<usize>,
}

fn plain_train_config(seed: u64) -> TrainSection {
    let d = TrainConfig::default();
    TrainSection {
        epochs: d.epochs,
        batch_sequences: d.batch_sequences,
        points_per_timepoint: d.points_per_timepoint,
        lr: d.lr,
        lr_decay_factor: d.lr_decay_factor,
        lr_decay_every: d.lr_decay_every,
        sigma2: d.sigma2,
        near_threshold_um: d.near_threshold_um,
        seed,
        checkpoint_every: None,
    }
}

impl From<TrainSection> for TrainConfig {
    fn from(s: TrainSection) -> Self {
        TrainConfig {
            epochs: s.epochs,
            batch_sequences: s.batch_sequences,
            points_per_timepoint: s.points_per_timepoint,
            lr: s.lr,
            lr_decay_factor: s.lr_decay_factor,
            lr_decay_every: s.lr_decay_every,
            sigma2: s.sigma2,
            near_threshold_um: s.near_threshold_um,
            seed: s.seed,
            checkpoint_every: s.checkpoint_every,
            ..TrainConfig::default()
        }
    }
}

pub fn train_config_json(cfg: &TrainConfig) -> serde_json::Value {
    json!({
        "epochs": cfg.epochs,
        "batch_sequences": cfg.batch_sequences,
        "points_per_timepoint": cfg.points_per_timepoint,
        "lr": cfg.lr,
        "lr_decay_factor": cfg.lr_decay_factor,
        "lr_decay_every": cfg.lr_decay_every,
        "sigma2": cfg.sigma2,
        "near_threshold_um": cfg.near_threshold_um,
        "seed": cfg.seed,
    })
}

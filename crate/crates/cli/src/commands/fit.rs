//! `nsdf fit-latent`: optimize a latent code (and rotation) for a new
//! sequence against frozen decoder weights.

use super::{write_manifest, CmdResult, Ctx};
use clap::Args;
use nsdf_core::model::load_checkpoint;
use nsdf_core::rng::Stream;
use nsdf_core::sdfdata::{draw_training_batch, SamplerConfig};
use nsdf_core::train::{fit_latent, FitConfig};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Args)]
pub struct FitArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Prepared cache directory holding the new sequence(s).
    #[arg(long)]
    pub data: PathBuf,
    /// Which sequence of the cache to fit (by index, default 0).
    #[arg(long, default_value_t = 0)]
    pub seq: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Samples drawn per time point for the fitting objective.
    #[arg(long, default_value_t = 2000)]
    pub points_per_timepoint: usize,
}

pub fn run(ctx: &Ctx, args: FitArgs) -> CmdResult {
    let (state, _) = load_checkpoint(&args.checkpoint).map_err(|e| e.to_string())?;
    let (names, grids) = super::prepare::load_prepared(&args.data)?;
    if args.seq >= grids.len() {
        return Err(format!(
            "sequence index {} out of range ({} prepared)",
            args.seq,
            grids.len()
        ));
    }
    let mut fcfg: FitConfig = ctx.file_config.apply_section("fit", FitSection::default())?.into();
    fcfg.seed = ctx.seed;
    fcfg.sigma2 = state.sigma2;
    if let Some(v) = args.restarts {
        fcfg.n_restarts = v;
    }
    if let Some(v) = args.iterations {
        fcfg.iterations = v;
    }

    // One stratified draw per time point of the target sequence.
    let seq_grids = vec![grids[args.seq].clone()];
    let mut points = Vec::new();
    let mut times = Vec::new();
    let mut targets = Vec::new();
    for (k, grid) in seq_grids[0].iter().enumerate() {
        let mut rng = Stream::new(ctx.seed, "fit-sample", k as u64);
        let one = vec![vec![grid.clone()]];
        let (batch, _) = draw_training_batch(
            &one,
            &mut rng,
            &SamplerConfig {
                batch_sequences: 1,
                points_per_timepoint: args.points_per_timepoint.min(grid.values.len()),
                near_threshold_um: 0.6,
            },
        )
        .map_err(|e| e.to_string())?;
        points.extend(batch.points);
        times.extend(batch.times);
        targets.extend(batch.targets);
    }

    let result = fit_latent(&state, &points, &times, &targets, &fcfg).map_err(|e| e.to_string())?;
    println!(
        "fit {}: loss {:.6} over {} restarts",
        names[args.seq], result.loss, fcfg.n_restarts
    );
    let out = json!({
        "sequence": names[args.seq],
        "loss": result.loss,
        "restart_losses": result.restart_losses,
        "z": result.z,
        "angles_rad": result.angles,
        "euler_order": nsdf_core::rot::EULER_ORDER_TAG,
    });
    std::fs::write(&args.out, serde_json::to_string_pretty(&out).unwrap())
        .map_err(|e| e.to_string())?;
    if let Some(dir) = args.out.parent() {
        write_manifest(
            dir,
            "fit-latent",
            ctx,
            &json!({
                "checkpoint": args.checkpoint.display().to_string(),
                "data": args.data.display().to_string(),
                "seq": args.seq,
                "restarts": fcfg.n_restarts,
                "iterations": fcfg.iterations,
                "points_per_timepoint": args.points_per_timepoint,
            }),
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Serialize, serde::Deserialize)]
pub struct FitSection {
    pub iterations: usize,
    pub lr: f64,
    pub n_restarts: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        let d = FitConfig::default();
        FitSection {
            iterations: d.iterations,
            lr: d.lr,
            n_restarts: d.n_restarts,
        }
    }
}

impl From<FitSection> for FitConfig {
    fn from(s: FitSection) -> Self {
        FitConfig {
            iterations: s.iterations,
            lr: s.lr,
            n_restarts: s.n_restarts,
            ..FitConfig::default()
        }
    }
}

//! `nsdf evaluate`: quantitative comparison of two mask-sequence sets.
//!
//! Shape descriptors come from exact SDFs meshed at the zero level (in µm);
//! Dice is computed voxelwise on paired sequences when both sets hold the
//! same number. KS tests pool the per-sequence-per-time descriptor values.

use super::{write_manifest, CmdResult, Ctx};
use clap::Args;
use nsdf_core::eval::{
    descriptor_series, dice, ks_two_sample, shape_metrics, DescriptorSeries, SeriesStats,
    ShapeMetrics, VolumeMode,
};
use nsdf_core::infer::marching_cubes;
use nsdf_core::sdfdata::{load_voxel_sequence, signed_distance_transform, SdfGrid, VoxelSequence};
use rayon::prelude::*;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Args)]
pub struct EvaluateArgs {
    /// Reference mask-sequence directory.
    #[arg(long)]
    pub real: PathBuf,
    /// Generated mask-sequence directory.
    #[arg(long)]
    pub gen: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn load_set(dir: &Path) -> Result<Vec<VoxelSequence>, String> {
    let mut seq_dirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| format!("cannot read {}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("meta.json").is_file())
        .collect();
    seq_dirs.sort();
    if seq_dirs.is_empty() {
        return Err(format!("no sequences under {}", dir.display()));
    }
    seq_dirs
        .iter()
        .map(|p| load_voxel_sequence(p).map_err(|e| format!("{}: {e}", p.display())))
        .collect()
}

/// Per-(sequence, time) descriptors from the µm-space zero level set.
fn metrics_table(set: &[VoxelSequence]) -> Result<Vec<Vec<ShapeMetrics>>, String> {
    set.par_iter()
        .map(|seq| {
            seq.volumes
                .iter()
                .enumerate()
                .map(|(k, vol)| {
                    let sdf = signed_distance_transform(vol, seq.spacing)
                        .map_err(|e| format!("{} frame {k}: {e}", seq.name))?;
                    let grid = SdfGrid {
                        values: sdf,
                        grid: vol.dims,
                        time_coord: 0.0,
                        scale: 1.0,
                        origin: (
                            0.5 * seq.spacing.0,
                            0.5 * seq.spacing.1,
                            0.5 * seq.spacing.2,
                        ),
                        step: seq.spacing,
                    };
                    let mesh = marching_cubes(&grid, 0.0);
                    shape_metrics(&mesh, VolumeMode::Mesh, None)
                        .map_err(|e| format!("{} frame {k}: {e}", seq.name))
                })
                .collect()
        })
        .collect()
}

fn series_csv(stats: &SeriesStats) -> String {
    let mut out = String::from("time,mean,median,iqr_lo,iqr_hi,min,max\n");
    for t in 0..stats.mean.len() {
        out.push_str(&format!(
            "{t},{},{},{},{},{},{}\n",
            stats.mean[t], stats.median[t], stats.iqr_lo[t], stats.iqr_hi[t], stats.min[t],
            stats.max[t]
        ));
    }
    out
}

fn write_series(dir: &Path, tag: &str, series: &DescriptorSeries) -> Result<(), String> {
    for (metric, stats) in [
        ("surface", &series.surface),
        ("volume", &series.volume),
        ("sphericity", &series.sphericity),
    ] {
        std::fs::write(dir.join(format!("{tag}_{metric}.csv")), series_csv(stats))
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn pool(table: &[Vec<ShapeMetrics>], pick: impl Fn(&ShapeMetrics) -> f64) -> Vec<f64> {
    table.iter().flatten().map(&pick).collect()
}

pub fn run(ctx: &Ctx, args: EvaluateArgs) -> CmdResult {
    let real = load_set(&args.real)?;
    let gen = load_set(&args.gen)?;
    std::fs::create_dir_all(&args.out).map_err(|e| e.to_string())?;

    let real_metrics = metrics_table(&real)?;
    let gen_metrics = metrics_table(&gen)?;
    write_series(&args.out, "real", &descriptor_series(&real_metrics).map_err(|e| e.to_string())?)?;
    write_series(&args.out, "gen", &descriptor_series(&gen_metrics).map_err(|e| e.to_string())?)?;

    // Dice only in paired mode (matching counts, matched by sorted order).
    let paired = real.len() == gen.len()
        && real
            .iter()
            .zip(&gen)
            .all(|(a, b)| a.dims == b.dims && a.n_time() == b.n_time());
    let dsc_summary = if paired {
        let mut all = Vec::new();
        for (a, b) in real.iter().zip(&gen) {
            for (va, vb) in a.volumes.iter().zip(&b.volumes) {
                all.push(dice(&va.data, va.dims, &vb.data, vb.dims).map_err(|e| e.to_string())?);
            }
        }
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let mut csv = String::from("pair,dsc\n");
        for (i, d) in all.iter().enumerate() {
            csv.push_str(&format!("{i},{d}\n"));
        }
        std::fs::write(args.out.join("dsc.csv"), csv).map_err(|e| e.to_string())?;
        json!({ "paired": true, "dsc_mean": mean, "n_pairs": all.len() })
    } else {
        if ctx.verbose {
            println!("sets differ in shape; skipping paired Dice");
        }
        json!({ "paired": false })
    };

    let mut ks = serde_json::Map::new();
    for (metric, pick) in [
        ("surface", (|m: &ShapeMetrics| m.surface) as fn(&ShapeMetrics) -> f64),
        ("volume", |m: &ShapeMetrics| m.volume),
        ("sphericity", |m: &ShapeMetrics| m.sphericity),
    ] {
        let (d, p) = ks_two_sample(&pool(&real_metrics, pick), &pool(&gen_metrics, pick))
            .map_err(|e| e.to_string())?;
        ks.insert(metric.to_string(), json!({ "d": d, "p": p }));
    }
    let summary = json!({
        "real_sequences": real.len(),
        "gen_sequences": gen.len(),
        "dice": dsc_summary,
        "ks": ks,
        "volume_mode": "mesh",
    });
    std::fs::write(
        args.out.join("summary.json"),
        serde_json::to_string_pretty(&summary).unwrap(),
    )
    .map_err(|e| e.to_string())?;
    write_manifest(
        &args.out,
        "evaluate",
        ctx,
        &json!({
            "real": args.real.display().to_string(),
            "gen": args.gen.display().to_string(),
        }),
    )?;
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(ExitCode::SUCCESS)
}

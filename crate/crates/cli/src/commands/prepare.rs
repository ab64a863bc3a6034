//! `nsdf prepare`: mask sequences → centered/aligned → exact SDF → normalized
//! grid caches.

use super::{write_manifest, CmdResult, Ctx};
use clap::Args;
use nsdf_core::rng::fnv1a;
use nsdf_core::sdfdata::{
    center_and_align, load_voxel_sequence, normalize_to_domain, signed_distance_transform,
    write_sdf_grid,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Args)]
pub struct PrepareArgs {
    /// Directory of sequence directories (each holding meta.json + frames).
    #[arg(long = "in")]
    pub in_dir: PathBuf,
    #[arg(long = "out")]
    pub out_dir: PathBuf,
    /// Also rotate each frame onto its principal axes.
    #[arg(long)]
    pub align: bool,
    /// Skip sequences whose inputs are unchanged since the last run.
    #[arg(long)]
    pub if_stale: bool,
}

#[derive(Serialize, Deserialize)]
struct IndexEntry {
    name: String,
    n_time: usize,
    dims: [usize; 3],
    spacing_um: [f64; 3],
    scale: f64,
    input_hash: String,
    files: Vec<String>,
}

#[derive(Serialize, Deserialize, Default)]
struct Index {
    sequences: Vec<IndexEntry>,
    align: bool,
}

fn hash_sequence_dir(dir: &Path) -> Result<String, String> {
    let mut h: u64 = 0xfeed_beef;
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| format!("cannot read {}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    names.sort();
    for p in names {
        if p.is_file() {
            let bytes = std::fs::read(&p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            h ^= fnv1a(p.file_name().unwrap().to_string_lossy().as_bytes());
            h = h.rotate_left(13) ^ fnv1a(&bytes);
        }
    }
    Ok(format!("{h:016x}"))
}

pub fn run(ctx: &Ctx, args: PrepareArgs) -> CmdResult {
    let mut seq_dirs: Vec<PathBuf> = std::fs::read_dir(&args.in_dir)
        .map_err(|e| format!("cannot read {}: {e}", args.in_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("meta.json").is_file())
        .collect();
    seq_dirs.sort();
    if seq_dirs.is_empty() {
        return Err(format!(
            "no sequence directories under {}",
            args.in_dir.display()
        ));
    }
    std::fs::create_dir_all(&args.out_dir).map_err(|e| e.to_string())?;
    let index_path = args.out_dir.join("index.json");
    let previous: Index = if args.if_stale && index_path.is_file() {
        std::fs::read_to_string(&index_path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default()
    } else {
        Index::default()
    };

    let mut index = Index {
        sequences: Vec::new(),
        align: args.align,
    };
    for dir in &seq_dirs {
        let name = dir.file_name().unwrap().to_string_lossy().to_string();
        let input_hash = hash_sequence_dir(dir)?;
        if args.if_stale && previous.align == args.align {
            if let Some(prev) = previous
                .sequences
                .iter()
                .find(|s| s.name == name && s.input_hash == input_hash)
            {
                let all_present = prev
                    .files
                    .iter()
                    .all(|f| args.out_dir.join(&name).join(f).is_file());
                if all_present {
                    println!("{name}: unchanged, skipping");
                    index.sequences.push(IndexEntry {
                        name: prev.name.clone(),
                        n_time: prev.n_time,
                        dims: prev.dims,
                        spacing_um: prev.spacing_um,
                        scale: prev.scale,
                        input_hash,
                        files: prev.files.clone(),
                    });
                    continue;
                }
            }
        }
        let seq = load_voxel_sequence(dir).map_err(|e| format!("{name}: {e}"))?;
        let seq = center_and_align(&seq, args.align).map_err(|e| format!("{name}: {e}"))?;
        let n_time = seq.n_time();
        let sdfs: Result<Vec<Vec<f64>>, String> = seq
            .volumes
            .par_iter()
            .enumerate()
            .map(|(k, vol)| {
                signed_distance_transform(vol, seq.spacing)
                    .map_err(|e| format!("{name} frame {k}: {e}"))
            })
            .collect();
        let sdfs = sdfs?;
        let seq_out = args.out_dir.join(&name);
        std::fs::create_dir_all(&seq_out).map_err(|e| e.to_string())?;
        let mut files = Vec::new();
        let mut scale = 0.0;
        for (k, sdf) in sdfs.iter().enumerate() {
            let grid = normalize_to_domain(sdf, seq.dims, seq.spacing, k, n_time);
            scale = grid.scale;
            let fname = format!("t_{k:04}.nsdf");
            write_sdf_grid(&seq_out.join(&fname), &grid).map_err(|e| e.to_string())?;
            files.push(fname);
        }
        let fg: usize = seq.volumes.iter().map(|v| v.foreground_count()).sum();
        println!(
            "{name}: {} frames of {:?}, scale {scale} um/unit, {} foreground voxels total",
            n_time, seq.dims, fg
        );
        index.sequences.push(IndexEntry {
            name,
            n_time,
            dims: [seq.dims.0, seq.dims.1, seq.dims.2],
            spacing_um: [seq.spacing.0, seq.spacing.1, seq.spacing.2],
            scale,
            input_hash,
            files,
        });
    }
    std::fs::write(
        &index_path,
        serde_json::to_string_pretty(&index).unwrap(),
    )
    .map_err(|e| e.to_string())?;
    write_manifest(
        &args.out_dir,
        "prepare",
        ctx,
        &json!({
            "in": args.in_dir.display().to_string(),
            "align": args.align,
            "sequences": index.sequences.len(),
        }),
    )?;
    Ok(ExitCode::SUCCESS)
}

/// Loads every prepared sequence (sorted by name) from a cache directory.
pub fn load_prepared(
    dir: &Path,
) -> Result<(Vec<String>, Vec<Vec<nsdf_core::sdfdata::SdfGrid>>), String> {
    let index_path = dir.join("index.json");
    let text = std::fs::read_to_string(&index_path)
        .map_err(|e| format!("cannot read {}: {e}", index_path.display()))?;
    let index: Index = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let mut names = Vec::new();
    let mut grids = Vec::new();
    for entry in &index.sequences {
        let mut seq = Vec::new();
        for f in &entry.files {
            let grid = nsdf_core::sdfdata::read_sdf_grid(&dir.join(&entry.name).join(f))
                .map_err(|e| e.to_string())?;
            seq.push(grid);
        }
        names.push(entry.name.clone());
        grids.push(seq);
    }
    Ok((names, grids))
}

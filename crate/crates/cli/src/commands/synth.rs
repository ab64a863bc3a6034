//! `nsdf synthesize` and `nsdf interpolate`: grid evaluation and export.

use super::{write_manifest, CmdResult, Ctx};
use clap::Args;
use nsdf_core::infer::{
    evaluate_grid, marching_cubes, synthesize_latents, voxelize, write_mask_raw, write_obj,
    GridSpec, SynthesisMode,
};
use nsdf_core::model::{load_checkpoint, ModelState};
use nsdf_core::rng::Stream;
use nsdf_core::rot::{matrix_to_euler, random_rotation};
use nsdf_core::sdfdata::write_sdf_grid;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// gaussian (fresh codes) or perturb (noise around trained codes).
    #[arg(long, default_value = "gaussian")]
    pub mode: String,
    #[arg(long)]
    pub std: Option<f64>,
    /// Number of sequences to synthesize.
    #[arg(short = 'n', long, default_value_t = 33)]
    pub count: usize,
    /// Cubic grid edge length.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    #[arg(long, default_value_t = 10)]
    pub time_points: usize,
    #[arg(long, default_value_t = 32)]
    pub chunk: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Fixed rotation angles "a,b,c" in radians.
    #[arg(long)]
    pub angles: Option<String>,
    /// Draw a uniform random rotation per synthesized sequence.
    #[arg(long)]
    pub random_rotation: bool,
    /// Comma list of exports: mask, obj, sdf.
    #[arg(long, default_value = "mask,obj")]
    pub export: String,
}

fn parse_angles(text: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if parts.len() != 3 {
        return Err(format!("--angles needs three comma-separated values, got {text}"));
    }
    Ok([parts[0], parts[1], parts[2]])
}

pub fn run(ctx: &Ctx, args: SynthArgs) -> CmdResult {
    let (state, _) = load_checkpoint(&args.checkpoint).map_err(|e| e.to_string())?;
    let mode = match args.mode.as_str() {
        "gaussian" => SynthesisMode::Gaussian {
            std: args.std.unwrap_or(0.001),
        },
        "perturb" => SynthesisMode::Perturb {
            std: args.std.unwrap_or(0.0005),
        },
        other => return Err(format!("unknown mode '{other}' (gaussian or perturb)")),
    };
    let mut rng = Stream::new(ctx.seed, "synthesize", 0);
    let codes = synthesize_latents(mode, args.count, state.arch.latent_dim, &state.latents, &mut rng)
        .map_err(|e| e.to_string())?;
    let fixed_angles = args.angles.as_deref().map(parse_angles).transpose()?;
    let times: Vec<f64> = (0..args.time_points)
        .map(|k| nsdf_core::sdfdata::time_coordinate(k, args.time_points))
        .collect();
    let spec = GridSpec {
        dims: (args.grid, args.grid, args.grid),
        time_points: times,
        chunk: args.chunk,
        ..GridSpec::default()
    };
    let exports: Vec<&str> = args.export.split(',').map(str::trim).collect();

    let mut rot_rng = Stream::new(ctx.seed, "synthesize-rotation", 0);
    for (i, z) in codes.iter().enumerate() {
        let angles = if state.arch.equivariant {
            Some(if args.random_rotation {
                matrix_to_euler(&random_rotation(&mut rot_rng))
            } else {
                fixed_angles.unwrap_or([0.0; 3])
            })
        } else {
            None
        };
        let dir = args.out.join(format!("seq_{i:03}"));
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        export_sequence(&state, z, angles, &spec, &dir, &exports)?;
        if ctx.verbose {
            println!("synthesized seq_{i:03}");
        }
    }
    write_manifest(
        &args.out,
        "synthesize",
        ctx,
        &json!({
            "checkpoint": args.checkpoint.display().to_string(),
            "mode": args.mode,
            "std": args.std,
            "count": args.count,
            "grid": args.grid,
            "time_points": args.time_points,
            "chunk": args.chunk,
            "angles": fixed_angles,
            "random_rotation": args.random_rotation,
            "export": args.export,
        }),
    )?;
    println!("synthesized {} sequences into {}", codes.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn export_sequence(
    state: &ModelState,
    z: &[f64],
    angles: Option<[f64; 3]>,
    spec: &GridSpec,
    dir: &Path,
    exports: &[&str],
) -> Result<(), String> {
    let grids = evaluate_grid(state, z, angles, spec).map_err(|e| e.to_string())?;
    for (k, grid) in grids.iter().enumerate() {
        if exports.contains(&"mask") {
            let mask = voxelize(grid);
            write_mask_raw(&mask, &dir.join(format!("t_{k:04}.raw"))).map_err(|e| e.to_string())?;
        }
        if exports.contains(&"obj") {
            let mesh = marching_cubes(grid, 0.0);
            if mesh.triangles.is_empty() {
                eprintln!(
                    "warning: {} t_{k:04}: zero level set absent, empty mesh",
                    dir.display()
                );
            }
            write_obj(&mesh, &dir.join(format!("t_{k:04}.obj"))).map_err(|e| e.to_string())?;
        }
        if exports.contains(&"sdf") {
            write_sdf_grid(&dir.join(format!("t_{k:04}.nsdf")), grid).map_err(|e| e.to_string())?;
        }
    }
    // meta.json so evaluate can ingest synthesized masks directly.
    let meta = json!({
        "dims": [spec.dims.0, spec.dims.1, spec.dims.2],
        "spacing_um": grid_spacing_um(spec),
        "n_time": spec.time_points.len(),
        "name": dir.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default(),
    });
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta).unwrap())
        .map_err(|e| e.to_string())?;
    Ok(())
}

fn grid_spacing_um(spec: &GridSpec) -> [f64; 3] {
    let (_, step) = spec.origin_step();
    [
        step[0] * spec.scale_um,
        step[1] * spec.scale_um,
        step[2] * spec.scale_um,
    ]
}

#[derive(Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Trained sequence index whose latent (and rotation) to use.
    #[arg(long, default_value_t = 0)]
    pub seq: usize,
    /// Comma list of time coordinates in [-1, 1].
    #[arg(long)]
    pub times: Option<String>,
    /// Dense count of evenly spaced time points (used when --times absent).
    #[arg(long, default_value_t = 30)]
    pub frames: usize,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    #[arg(long, default_value_t = 32)]
    pub chunk: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "mask,obj")]
    pub export: String,
}

pub fn run_interpolate(ctx: &Ctx, args: InterpolateArgs) -> CmdResult {
    let (state, _) = load_checkpoint(&args.checkpoint).map_err(|e| e.to_string())?;
    if args.seq >= state.n_sequences() {
        return Err(format!(
            "sequence {} out of range ({} trained)",
            args.seq,
            state.n_sequences()
        ));
    }
    let times: Vec<f64> = match &args.times {
        Some(list) => list
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?,
        None => (0..args.frames)
            .map(|k| nsdf_core::sdfdata::time_coordinate(k, args.frames))
            .collect(),
    };
    if times.iter().any(|t| !(-1.0..=1.0).contains(t)) {
        return Err("time coordinates must lie in [-1, 1]".into());
    }
    let spec = GridSpec {
        dims: (args.grid, args.grid, args.grid),
        time_points: times.clone(),
        chunk: args.chunk,
        ..GridSpec::default()
    };
    let angles = if state.arch.equivariant {
        Some(state.angles[args.seq])
    } else {
        None
    };
    let z = state.latents[args.seq].clone();
    let dir = args.out.join(format!("seq_{:03}", args.seq));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let exports: Vec<&str> = args.export.split(',').map(str::trim).collect();
    export_sequence(&state, &z, angles, &spec, &dir, &exports)?;
    write_manifest(
        &args.out,
        "interpolate",
        ctx,
        &json!({
            "checkpoint": args.checkpoint.display().to_string(),
            "seq": args.seq,
            "times": times,
            "grid": args.grid,
            "export": args.export,
        }),
    )?;
    Ok(ExitCode::SUCCESS)
}

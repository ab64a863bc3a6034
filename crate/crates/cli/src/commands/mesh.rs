//! `nsdf export-mesh`: cached SDF grids → OBJ meshes.

use super::{write_manifest, CmdResult, Ctx};
use clap::Args;
use nsdf_core::infer::{marching_cubes, write_obj};
use nsdf_core::sdfdata::read_sdf_grid;
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Args)]
pub struct ExportMeshArgs {
    /// A .nsdf file or a directory tree of them.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub iso: f64,
    /// Scale vertices into micrometers using each grid's stored scale.
    #[arg(long)]
    pub um: bool,
}

fn collect_grids(root: &PathBuf) -> Vec<PathBuf> {
    if root.is_file() {
        return vec![root.clone()];
    }
    let mut out = Vec::new();
    let mut stack = vec![root.clone()];
    while let Some(dir) = stack.pop() {
        if let Ok(entries) = std::fs::read_dir(&dir) {
            for e in entries.flatten() {
                let p = e.path();
                if p.is_dir() {
                    stack.push(p);
                } else if p.extension().map_or(false, |x| x == "nsdf") {
                    out.push(p);
                }
            }
        }
    }
    out.sort();
    out
}

pub fn run(ctx: &Ctx, args: ExportMeshArgs) -> CmdResult {
    let files = collect_grids(&args.input);
    if files.is_empty() {
        return Err(format!("no .nsdf grids under {}", args.input.display()));
    }
    std::fs::create_dir_all(&args.out).map_err(|e| e.to_string())?;
    let mut exported = 0usize;
    for f in &files {
        let grid = read_sdf_grid(f).map_err(|e| e.to_string())?;
        let mut mesh = marching_cubes(&grid, args.iso);
        if mesh.triangles.is_empty() {
            eprintln!("warning: {}: iso {} outside value range, empty mesh", f.display(), args.iso);
        }
        if args.um {
            mesh = mesh.to_um(grid.scale);
        }
        let stem = f.file_stem().unwrap().to_string_lossy();
        let parent = f
            .parent()
            .and_then(|p| p.file_name())
            .map(|n| format!("{}_", n.to_string_lossy()))
            .unwrap_or_default();
        write_obj(&mesh, &args.out.join(format!("{parent}{stem}.obj")))
            .map_err(|e| e.to_string())?;
        exported += 1;
    }
    write_manifest(
        &args.out,
        "export-mesh",
        ctx,
        &json!({
            "in": args.input.display().to_string(),
            "iso": args.iso,
            "um": args.um,
            "meshes": exported,
        }),
    )?;
    println!("exported {exported} meshes");
    Ok(ExitCode::SUCCESS)
}

//! `nsdf experiment <name>`: scripted studies with machine-readable outputs.

use super::{CmdResult, Ctx};
use clap::Args;
use nsdf_core::experiments::{
    run_ablation_equivariance, run_activation_comparison, run_interpolation_study,
    run_spectral_study, write_study_outputs, AblationConfig, ActivationConfig,
    InterpolationConfig, SpectralConfig, StudyReport,
};
use std::path::PathBuf;
use std::process::ExitCode;

pub const NAMES: [&str; 4] = [
    "equivariance-ablation",
    "temporal-interpolation",
    "spectral-bias",
    "activation-comparison",
];

#[derive(Args)]
pub struct ExperimentArgs {
    /// One of: equivariance-ablation, temporal-interpolation, spectral-bias,
    /// activation-comparison.
    pub name: String,
    #[arg(long, default_value = "experiments")]
    pub out: PathBuf,
    /// Print the resolved config and exit.
    #[arg(long)]
    pub dry_run: bool,
}

pub fn run(ctx: &Ctx, args: ExperimentArgs) -> CmdResult {
    let out_dir = args.out.join(&args.name);
    let (config_json, report): (serde_json::Value, StudyReport) = match args.name.as_str() {
        "equivariance-ablation" => {
            let mut cfg: AblationConfig = ctx
                .file_config
                .apply_section("ablation", AblationConfig::default())?;
            cfg.seed = ctx.seed;
            let cj = serde_json::to_value(&cfg).unwrap();
            if args.dry_run {
                println!("{}", serde_json::to_string_pretty(&cj).unwrap());
                return Ok(ExitCode::SUCCESS);
            }
            (cj, run_ablation_equivariance(&cfg).map_err(|e| e.to_string())?)
        }
        "temporal-interpolation" => {
            let mut cfg: InterpolationConfig = ctx
                .file_config
                .apply_section("interpolation", InterpolationConfig::default())?;
            cfg.seed = ctx.seed;
            let cj = serde_json::to_value(&cfg).unwrap();
            if args.dry_run {
                println!("{}", serde_json::to_string_pretty(&cj).unwrap());
                return Ok(ExitCode::SUCCESS);
            }
            (cj, run_interpolation_study(&cfg).map_err(|e| e.to_string())?)
        }
        "spectral-bias" => {
            let mut cfg: SpectralConfig = ctx
                .file_config
                .apply_section("spectral", SpectralConfig::default())?;
            cfg.seed = ctx.seed;
            let cj = serde_json::to_value(&cfg).unwrap();
            if args.dry_run {
                println!("{}", serde_json::to_string_pretty(&cj).unwrap());
                return Ok(ExitCode::SUCCESS);
            }
            (cj, run_spectral_study(&cfg).map_err(|e| e.to_string())?)
        }
        "activation-comparison" => {
            let mut cfg: ActivationConfig = ctx
                .file_config
                .apply_section("activation", ActivationConfig::default())?;
            cfg.seed = ctx.seed;
            let cj = serde_json::to_value(&cfg).unwrap();
            if args.dry_run {
                println!("{}", serde_json::to_string_pretty(&cj).unwrap());
                return Ok(ExitCode::SUCCESS);
            }
            (cj, run_activation_comparison(&cfg).map_err(|e| e.to_string())?)
        }
        other => {
            return Err(format!(
                "unknown experiment '{other}'; available: {}",
                NAMES.join(", ")
            ))
        }
    };
    write_study_outputs(&report, &config_json, ctx.seed, &out_dir).map_err(|e| e.to_string())?;
    print!("{}", report.render_text());
    println!("outputs in {}", out_dir.display());
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

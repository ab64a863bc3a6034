//! Scripted studies on analytic fixtures: rotation-ablation, temporal
//! interpolation, spectral bias, and activation comparison.
//!
//! Every study returns a [`StudyReport`] with per-assertion outcomes, a
//! results CSV, and a JSON summary; [`write_study_outputs`] persists those
//! together with a manifest (resolved config, config hash, seed, git
//! describe) sufficient to re-run the study bit-identically.

mod fixtures;

pub use fixtures::{
    make_fixture, Fixture, FixtureKind, FixtureSpec, SequenceShape, Spike, FIXTURE_SCALE_UM,
};

use crate::eval::{dice, shape_metrics, VolumeMode};
use crate::infer::{evaluate_grid, marching_cubes, voxelize, GridSpec};
use crate::model::{init_model, Activation, ArchitectureSpec, ModelState};
use crate::rng::{fnv1a, Stream};
use crate::rot::random_rotation;
use crate::sdfdata::SdfGrid;
use crate::train::{train, AdamState, TrainConfig, TrainError, TrainOutput};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::Path;

#[derive(Clone, Debug)]
pub struct StudyReport {
    pub name: String,
    pub pass: bool,
    /// (description, outcome) per acceptance assertion of the study.
    pub assertions: Vec<(String, bool)>,
    pub csv: String,
    pub summary: serde_json::Value,
}

impl StudyReport {
    fn assert(&mut self, desc: &str, ok: bool) {
        self.assertions.push((desc.to_string(), ok));
        self.pass &= ok;
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("study {}: {}\n", self.name, if self.pass { "PASS" } else { "FAIL" });
        for (desc, ok) in &self.assertions {
            out.push_str(&format!("  [{}] {desc}\n", if *ok { "ok" } else { "FAIL" }));
        }
        out
    }
}

/// Writes `manifest.json` and `results.csv` (plus a summary JSON) for a
/// finished study.
pub fn write_study_outputs(
    report: &StudyReport,
    config_json: &serde_json::Value,
    seed: u64,
    dir: &Path,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let config_text = serde_json::to_string(config_json).expect("config serializes");
    let manifest = json!({
        "name": report.name,
        "pass": report.pass,
        "seed": seed,
        "config": config_json,
        "config_hash": format!("{:016x}", fnv1a(config_text.as_bytes())),
        "git_describe": git_describe(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).unwrap(),
    )?;
    std::fs::write(dir.join("results.csv"), &report.csv)?;
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&report.summary).unwrap(),
    )?;
    Ok(())
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

/// Grid spec that reproduces the sampling lattice of a data grid.
pub fn matching_grid_spec(grid: &SdfGrid, chunk: usize) -> GridSpec {
    let dims = [grid.grid.0, grid.grid.1, grid.grid.2];
    let step = [grid.step.0, grid.step.1, grid.step.2];
    let origin = [grid.origin.0, grid.origin.1, grid.origin.2];
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for a in 0..3 {
        lo[a] = origin[a] - step[a] / 2.0;
        hi[a] = lo[a] + dims[a] as f64 * step[a];
    }
    GridSpec {
        dims: grid.grid,
        time_points: vec![grid.time_coord],
        chunk,
        bounds: (lo, hi),
        scale_um: grid.scale,
    }
}

/// Dice between the model's reconstruction of `(seq, time_idx)` and the
/// reference grid.
pub fn reconstruction_dsc(
    state: &ModelState,
    reference: &SdfGrid,
    seq: usize,
) -> Result<f64, TrainError> {
    let spec = matching_grid_spec(reference, 32);
    let angles = if state.arch.equivariant {
        Some(state.angles[seq])
    } else {
        None
    };
    let rec = evaluate_grid(state, &state.latents[seq], angles, &spec)
        .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
    let got = voxelize(&rec[0]);
    let want = voxelize(reference);
    dice(&got, rec[0].grid, &want, reference.grid)
        .map_err(|e| TrainError::InvalidConfig(e.to_string()))
}

/// Sphericity of the reconstructed shape at one (seq, time).
fn reconstruction_sphericity(
    state: &ModelState,
    reference: &SdfGrid,
    seq: usize,
) -> Result<f64, TrainError> {
    let spec = matching_grid_spec(reference, 32);
    let angles = if state.arch.equivariant {
        Some(state.angles[seq])
    } else {
        None
    };
    let rec = evaluate_grid(state, &state.latents[seq], angles, &spec)
        .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
    let mesh = marching_cubes(&rec[0], 0.0);
    if mesh.triangles.is_empty() {
        return Ok(0.0);
    }
    let m = shape_metrics(&mesh, VolumeMode::Mesh, None)
        .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
    Ok(m.sphericity)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn train_model(
    arch: &ArchitectureSpec,
    data: &[Vec<SdfGrid>],
    cfg: &TrainConfig,
) -> Result<TrainOutput, TrainError> {
    let mut rng = Stream::new(cfg.seed, "init", 0);
    let state = init_model(arch, data.len(), cfg.sigma2, &mut rng)?;
    train(state, data, cfg, None)
}

// ---------------------------------------------------------------------------
// Rotation ablation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AblationConfig {
    pub n_base: usize,
    pub n_rotations: usize,
    pub n_time: usize,
    pub grid: usize,
    pub latent_dims: Vec<usize>,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub epochs: usize,
    pub batch_sequences: usize,
    pub points_per_timepoint: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            n_base: 6,
            n_rotations: 4,
            n_time: 6,
            grid: 48,
            latent_dims: vec![8],
            hidden_layers: 6,
            hidden_width: 48,
            epochs: 500,
            batch_sequences: 10,
            points_per_timepoint: 1500,
            lr: 2e-4,
            seed: 0,
        }
    }
}

/// Mean pairwise latent distance among rotated copies of each base shape,
/// divided by the mean pairwise distance across different base shapes.
pub fn cluster_tightness(latents: &[Vec<f64>], n_base: usize, n_rot: usize) -> f64 {
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mut within = 0.0;
    let mut within_n = 0usize;
    for b in 0..n_base {
        for i in 0..n_rot {
            for j in (i + 1)..n_rot {
                within += dist(&latents[b * n_rot + i], &latents[b * n_rot + j]);
                within_n += 1;
            }
        }
    }
    let mut across = 0.0;
    let mut across_n = 0usize;
    for a in 0..n_base {
        for b in (a + 1)..n_base {
            for i in 0..n_rot {
                for j in 0..n_rot {
                    across += dist(&latents[a * n_rot + i], &latents[b * n_rot + j]);
                    across_n += 1;
                }
            }
        }
    }
    (within / within_n as f64) / (across / across_n as f64)
}

/// Builds the rotated-copies data set and trains rotation-aware and plain
/// variants across the latent-dimension sweep.
pub fn run_ablation_equivariance(cfg: &AblationConfig) -> Result<StudyReport, TrainError> {
    let fixture = make_fixture(&FixtureSpec {
        kind: FixtureKind::SpikyStar,
        n_sequences: cfg.n_base,
        n_time: cfg.n_time,
        grid: cfg.grid,
        seed: cfg.seed,
    });
    // Rotated copies: sequence b*n_rot + r is base b under rotation (b, r).
    let mut rot_rng = Stream::new(cfg.seed, "ablation-rotations", 0);
    let rotations: Vec<_> = (0..cfg.n_base * cfg.n_rotations)
        .map(|_| random_rotation(&mut rot_rng))
        .collect();
    let data: Vec<Vec<SdfGrid>> = (0..cfg.n_base * cfg.n_rotations)
        .map(|i| {
            let base = i / cfg.n_rotations;
            (0..cfg.n_time)
                .map(|k| fixture.grid_at(base, k, Some(&rotations[i])))
                .collect()
        })
        .collect();

    let mut report = StudyReport {
        name: "equivariance-ablation".into(),
        pass: true,
        assertions: Vec::new(),
        csv: String::from("latent_dim,model,dsc_mean,dsc_std,cluster_tightness\n"),
        summary: json!({}),
    };
    let mut summary_rows = Vec::new();
    let mut dim8: Option<((f64, f64), (f64, f64))> = None; // ((dsc, tight) eq, noneq)

    for &dim in &cfg.latent_dims {
        let mut per_model = Vec::new();
        for equivariant in [true, false] {
            let arch = ArchitectureSpec {
                hidden_layers: cfg.hidden_layers,
                hidden_width: cfg.hidden_width,
                latent_dim: dim,
                omega0: 30.0,
                activation: Activation::Sine,
                latent_inject_layers: inject_layers_for(cfg.hidden_layers),
                coord_inject: true,
                equivariant,
                clamp_delta: None,
            };
            let tcfg = TrainConfig {
                epochs: cfg.epochs,
                batch_sequences: cfg.batch_sequences,
                points_per_timepoint: cfg.points_per_timepoint,
                lr: cfg.lr,
                seed: cfg.seed + dim as u64,
                ..TrainConfig::default()
            };
            let out = train_model(&arch, &data, &tcfg)?;
            // Dice at the final time point (the most-developed shape).
            let mut dscs = Vec::new();
            for seq in 0..data.len() {
                dscs.push(reconstruction_dsc(
                    &out.state,
                    &data[seq][cfg.n_time - 1],
                    seq,
                )?);
            }
            let (dsc_mean, dsc_std) = mean_std(&dscs);
            let tightness = cluster_tightness(&out.state.latents, cfg.n_base, cfg.n_rotations);
            let tag = if equivariant { "equivariant" } else { "non-equivariant" };
            report.csv.push_str(&format!(
                "{dim},{tag},{dsc_mean},{dsc_std},{tightness}\n"
            ));
            summary_rows.push(json!({
                "latent_dim": dim,
                "model": tag,
                "dsc_mean": dsc_mean,
                "dsc_std": dsc_std,
                "cluster_tightness": tightness,
            }));
            per_model.push((dsc_mean, tightness));
        }
        if dim == 8 {
            dim8 = Some(((per_model[0].0, per_model[0].1), (per_model[1].0, per_model[1].1)));
        }
    }
    if let Some(((dsc_eq, tight_eq), (dsc_ne, tight_ne))) = dim8 {
        report.assert(
            &format!("DSC(rotation-aware)={dsc_eq:.4} >= DSC(plain)={dsc_ne:.4} at latent dim 8"),
            dsc_eq >= dsc_ne,
        );
        report.assert(
            &format!(
                "cluster tightness (rotation-aware)={tight_eq:.4} < (plain)={tight_ne:.4}"
            ),
            tight_eq < tight_ne,
        );
    }
    report.summary = json!({ "rows": summary_rows });
    Ok(report)
}

/// Scales the default {1, 5, 8} injection pattern to shallower networks.
pub fn inject_layers_for(hidden_layers: usize) -> Vec<usize> {
    if hidden_layers >= 9 {
        vec![1, 5, 8]
    } else if hidden_layers >= 5 {
        vec![1, hidden_layers / 2 + 1, hidden_layers]
    } else if hidden_layers >= 2 {
        vec![1, hidden_layers]
    } else {
        vec![1]
    }
}

// ---------------------------------------------------------------------------
// Temporal interpolation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InterpolationConfig {
    pub n_sequences: usize,
    pub n_time: usize,
    pub stride: usize,
    pub grid: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub latent_dim: usize,
    pub epochs: usize,
    pub points_per_timepoint: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for InterpolationConfig {
    fn default() -> Self {
        // Stride 4 over 29 frames keeps the trained-time spacing of the
        // full-scale setup; much sparser supervision in τ would ask the
        // high-frequency network to invent the in-between frames.
        InterpolationConfig {
            n_sequences: 4,
            n_time: 29,
            stride: 4,
            grid: 48,
            hidden_layers: 5,
            hidden_width: 48,
            latent_dim: 8,
            epochs: 1500,
            points_per_timepoint: 2000,
            lr: 3e-4,
            seed: 0,
        }
    }
}

/// Trains on a stride subset of the time points and reports per-time DSC
/// with held-out rows flagged.
pub fn run_interpolation_study(cfg: &InterpolationConfig) -> Result<StudyReport, TrainError> {
    let fixture = make_fixture(&FixtureSpec {
        kind: FixtureKind::GrowingSphere,
        n_sequences: cfg.n_sequences,
        n_time: cfg.n_time,
        grid: cfg.grid,
        seed: cfg.seed,
    });
    let full = fixture.grids();
    let trained_times: Vec<usize> = (0..cfg.n_time).step_by(cfg.stride.max(1)).collect();
    let subset: Vec<Vec<SdfGrid>> = full
        .iter()
        .map(|seq| trained_times.iter().map(|&k| seq[k].clone()).collect())
        .collect();

    let arch = ArchitectureSpec {
        hidden_layers: cfg.hidden_layers,
        hidden_width: cfg.hidden_width,
        latent_dim: cfg.latent_dim,
        omega0: 30.0,
        activation: Activation::Sine,
        latent_inject_layers: inject_layers_for(cfg.hidden_layers),
        coord_inject: true,
        equivariant: false,
        clamp_delta: None,
    };
    let tcfg = TrainConfig {
        epochs: cfg.epochs,
        batch_sequences: 5,
        points_per_timepoint: cfg.points_per_timepoint,
        lr: cfg.lr,
        seed: cfg.seed,
        ..TrainConfig::default()
    };
    let out = train_model(&arch, &subset, &tcfg)?;

    let mut report = StudyReport {
        name: "temporal-interpolation".into(),
        pass: true,
        assertions: Vec::new(),
        csv: String::from("time_index,time_coord,held_out,dsc_mean,dsc_std\n"),
        summary: json!({}),
    };
    let mut trained_dsc = Vec::new();
    let mut held_dsc = Vec::new();
    let mut rows = Vec::new();
    for k in 0..cfg.n_time {
        let held_out = !trained_times.contains(&k);
        let mut dscs = Vec::new();
        for seq in 0..cfg.n_sequences {
            dscs.push(reconstruction_dsc(&out.state, &full[seq][k], seq)?);
        }
        let (m, s) = mean_std(&dscs);
        report.csv.push_str(&format!(
            "{k},{},{},{m},{s}\n",
            fixture.time(k),
            held_out as u8
        ));
        rows.push(json!({"time_index": k, "held_out": held_out, "dsc_mean": m, "dsc_std": s}));
        if held_out {
            held_dsc.push(m);
        } else {
            trained_dsc.push(m);
        }
    }
    if held_dsc.is_empty() {
        report.assert("stride 1 leaves no held-out rows", true);
    } else {
        let (tm, _) = mean_std(&trained_dsc);
        let (hm, _) = mean_std(&held_dsc);
        // On the sphere fixture the true generalization gap is ~0 and the
        // per-time DSC varies with radius (the hardest, smallest sphere is a
        // trained endpoint), so the direction is asserted up to voxelization
        // noise.
        report.assert(
            &format!("mean DSC at trained times {tm:.4} >= held-out {hm:.4} - 0.005"),
            tm >= hm - 0.005,
        );
        let min_held = held_dsc.iter().cloned().fold(f64::INFINITY, f64::min);
        report.assert(
            &format!("every held-out DSC >= 0.85 (min {min_held:.4})"),
            min_held >= 0.85,
        );
    }
    report.summary = json!({ "rows": rows, "trained_times": trained_times });
    Ok(report)
}

// ---------------------------------------------------------------------------
// Spectral bias
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub omegas: Vec<f64>,
    pub n_sequences: usize,
    pub n_time: usize,
    pub grid: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub latent_dim: usize,
    pub epochs: usize,
    pub points_per_timepoint: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            omegas: vec![1.0, 5.0, 15.0, 30.0],
            n_sequences: 3,
            n_time: 4,
            grid: 48,
            hidden_layers: 5,
            hidden_width: 48,
            latent_dim: 8,
            epochs: 400,
            points_per_timepoint: 2000,
            lr: 2e-4,
            seed: 0,
        }
    }
}

/// Trains one model per ω₀ and reports reconstructed sphericity and DSC at
/// the final time point.
pub fn run_spectral_study(cfg: &SpectralConfig) -> Result<StudyReport, TrainError> {
    let fixture = make_fixture(&FixtureSpec {
        kind: FixtureKind::SpikyStar,
        n_sequences: cfg.n_sequences,
        n_time: cfg.n_time,
        grid: cfg.grid,
        seed: cfg.seed,
    });
    let data = fixture.grids();
    let mut report = StudyReport {
        name: "spectral-bias".into(),
        pass: true,
        assertions: Vec::new(),
        csv: String::from("omega0,dsc_mean,sphericity_mean\n"),
        summary: json!({}),
    };
    let mut rows = Vec::new();
    let mut by_omega = std::collections::BTreeMap::new();
    for &omega in &cfg.omegas {
        let arch = ArchitectureSpec {
            hidden_layers: cfg.hidden_layers,
            hidden_width: cfg.hidden_width,
            latent_dim: cfg.latent_dim,
            omega0: omega,
            activation: Activation::Sine,
            latent_inject_layers: inject_layers_for(cfg.hidden_layers),
            coord_inject: true,
            equivariant: false,
            clamp_delta: None,
        };
        let tcfg = TrainConfig {
            epochs: cfg.epochs,
            batch_sequences: 5,
            points_per_timepoint: cfg.points_per_timepoint,
            lr: cfg.lr,
            seed: cfg.seed,
            ..TrainConfig::default()
        };
        let out = train_model(&arch, &data, &tcfg)?;
        let mut dscs = Vec::new();
        let mut sphs = Vec::new();
        for seq in 0..cfg.n_sequences {
            let reference = &data[seq][cfg.n_time - 1];
            dscs.push(reconstruction_dsc(&out.state, reference, seq)?);
            sphs.push(reconstruction_sphericity(&out.state, reference, seq)?);
        }
        let (dsc, _) = mean_std(&dscs);
        let (sph, _) = mean_std(&sphs);
        report.csv.push_str(&format!("{omega},{dsc},{sph}\n"));
        rows.push(json!({"omega0": omega, "dsc_mean": dsc, "sphericity_mean": sph}));
        by_omega.insert((omega * 1000.0) as i64, (dsc, sph));
    }
    let lo = cfg.omegas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = cfg.omegas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (dsc_lo, sph_lo) = by_omega[&((lo * 1000.0) as i64)];
    let (dsc_hi, sph_hi) = by_omega[&((hi * 1000.0) as i64)];
    report.assert(
        &format!("sphericity(omega={lo}) {sph_lo:.4} > sphericity(omega={hi}) {sph_hi:.4}"),
        sph_lo > sph_hi,
    );
    report.assert(
        &format!("DSC(omega={hi}) {dsc_hi:.4} >= DSC(omega={lo}) {dsc_lo:.4}"),
        dsc_hi >= dsc_lo,
    );
    report.assert(
        &format!("report holds one row per omega ({})", cfg.omegas.len()),
        report.csv.lines().count() == cfg.omegas.len() + 1,
    );
    report.summary = json!({ "rows": rows });
    Ok(report)
}

// ---------------------------------------------------------------------------
// Activation comparison
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ActivationConfig {
    pub n_sequences: usize,
    pub n_time: usize,
    pub grid: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub latent_dim: usize,
    /// Latent dimension for the ReLU baseline (kept larger, as in the
    /// reference architecture).
    pub relu_latent_dim: usize,
    pub epochs: usize,
    pub eval_every: usize,
    pub dsc_target: f64,
    pub points_per_timepoint: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ActivationConfig {
    fn default() -> Self {
        ActivationConfig {
            n_sequences: 3,
            n_time: 4,
            grid: 48,
            hidden_layers: 6,
            hidden_width: 64,
            latent_dim: 8,
            relu_latent_dim: 16,
            epochs: 1600,
            eval_every: 100,
            dsc_target: 0.9,
            points_per_timepoint: 2500,
            lr: 2e-4,
            seed: 0,
        }
    }
}

/// Trains sine and ReLU variants with periodic DSC measurements and finds
/// the first epoch where each crosses the target DSC.
pub fn run_activation_comparison(cfg: &ActivationConfig) -> Result<StudyReport, TrainError> {
    let fixture = make_fixture(&FixtureSpec {
        kind: FixtureKind::SpikyStar,
        n_sequences: cfg.n_sequences,
        n_time: cfg.n_time,
        grid: cfg.grid,
        seed: cfg.seed,
    });
    let data = fixture.grids();
    let reference_sph: f64 = {
        let mut sphs = Vec::new();
        for seq in 0..cfg.n_sequences {
            let mesh = marching_cubes(&data[seq][cfg.n_time - 1], 0.0);
            sphs.push(
                shape_metrics(&mesh, VolumeMode::Mesh, None)
                    .map(|m| m.sphericity)
                    .unwrap_or(0.0),
            );
        }
        mean_std(&sphs).0
    };

    let mut report = StudyReport {
        name: "activation-comparison".into(),
        pass: true,
        assertions: Vec::new(),
        csv: String::from("variant,epoch,dsc_mean\n"),
        summary: json!({}),
    };
    let mut crossings = Vec::new();
    let mut final_sph = Vec::new();
    for activation in [Activation::Sine, Activation::Relu] {
        let tag = match activation {
            Activation::Sine => "sine",
            Activation::Relu => "relu",
        };
        let arch = ArchitectureSpec {
            hidden_layers: cfg.hidden_layers,
            hidden_width: cfg.hidden_width,
            latent_dim: match activation {
                Activation::Sine => cfg.latent_dim,
                Activation::Relu => cfg.relu_latent_dim,
            },
            omega0: 30.0,
            activation,
            latent_inject_layers: inject_layers_for(cfg.hidden_layers),
            coord_inject: true,
            equivariant: false,
            clamp_delta: None,
        };
        let mut rng = Stream::new(cfg.seed, "init", 0);
        let mut state = init_model(&arch, data.len(), 1e-4, &mut rng)?;
        let mut adam: Option<AdamState> = None;
        let mut crossing: Option<usize> = None;
        let mut last_dsc = 0.0;
        let mut epochs_done = 0;
        while epochs_done < cfg.epochs {
            let target = (epochs_done + cfg.eval_every).min(cfg.epochs);
            let tcfg = TrainConfig {
                epochs: target,
                batch_sequences: 5,
                points_per_timepoint: cfg.points_per_timepoint,
                lr: cfg.lr,
                seed: cfg.seed,
                ..TrainConfig::default()
            };
            let out = train(state, &data, &tcfg, adam)?;
            state = out.state;
            adam = Some(out.adam);
            epochs_done = target;
            let mut dscs = Vec::new();
            for seq in 0..cfg.n_sequences {
                dscs.push(reconstruction_dsc(&state, &data[seq][cfg.n_time - 1], seq)?);
            }
            last_dsc = mean_std(&dscs).0;
            report.csv.push_str(&format!("{tag},{epochs_done},{last_dsc}\n"));
            if crossing.is_none() && last_dsc >= cfg.dsc_target {
                crossing = Some(epochs_done);
            }
        }
        let mut sphs = Vec::new();
        for seq in 0..cfg.n_sequences {
            sphs.push(reconstruction_sphericity(
                &state,
                &data[seq][cfg.n_time - 1],
                seq,
            )?);
        }
        crossings.push((tag.to_string(), crossing, last_dsc));
        final_sph.push(mean_std(&sphs).0);
    }
    let sine_cross = crossings[0].1;
    let relu_cross = crossings[1].1;
    let describe = |c: &Option<usize>| c.map_or("never".to_string(), |e| e.to_string());
    report.assert(
        &format!(
            "sine reaches DSC {} at epoch {} before relu ({})",
            cfg.dsc_target,
            describe(&sine_cross),
            describe(&relu_cross)
        ),
        match (sine_cross, relu_cross) {
            (Some(s), Some(r)) => s < r,
            (Some(_), None) => true,
            _ => false,
        },
    );
    report.assert(
        &format!(
            "sine sphericity {:.4} closer to reference {:.4} than relu {:.4}",
            final_sph[0], reference_sph, final_sph[1]
        ),
        (final_sph[0] - reference_sph).abs() <= (final_sph[1] - reference_sph).abs(),
    );
    report.summary = json!({
        "reference_sphericity": reference_sph,
        "crossings": crossings.iter().map(|(t, c, d)| json!({
            "variant": t, "crossing_epoch": c, "final_dsc": d
        })).collect::<Vec<_>>(),
        "final_sphericity": { "sine": final_sph[0], "relu": final_sph[1] },
    });
    Ok(report)
}

//! Model evaluation on space-time grids, latent sampling, isosurface
//! extraction, voxelization, and exports.

mod marching;
mod tables;

pub use marching::marching_cubes;

use crate::model::{ModelError, ModelState};
use crate::rng::Stream;
use crate::sdfdata::SdfGrid;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

/// Evaluating more points than this per chunk risks multi-gigabyte
/// intermediates; the guard suggests a smaller edge instead.
pub const MAX_CHUNK_POINTS: usize = 2_000_000;

#[derive(Debug, Error)]
pub enum InferError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("chunk edge {chunk} gives {points} points per chunk (max {max}); try chunk={suggest}")]
    ChunkTooLarge {
        chunk: usize,
        points: usize,
        max: usize,
        suggest: usize,
    },
    #[error("perturb mode needs trained latent codes")]
    NoTrainedCodes,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Where and when to evaluate the model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: (usize, usize, usize),
    pub time_points: Vec<f64>,
    /// Sub-grid edge length per evaluation chunk.
    pub chunk: usize,
    /// Axis-aligned bounds, default Ω = [−1,1]³; samples at voxel centers.
    pub bounds: ([f64; 3], [f64; 3]),
    /// µm per normalized unit stamped into produced grids.
    pub scale_um: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            dims: (64, 64, 64),
            time_points: vec![0.0],
            chunk: 32,
            bounds: ([-1.0; 3], [1.0; 3]),
            scale_um: 1.0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), InferError> {
        if self.dims.0 < 2 || self.dims.1 < 2 || self.dims.2 < 2 {
            return Err(InferError::InvalidSpec(format!(
                "grid dims must be at least 2 per axis, got {:?}",
                self.dims
            )));
        }
        if self.chunk == 0 {
            return Err(InferError::InvalidSpec("chunk must be at least 1".into()));
        }
        let points = self.chunk * self.chunk * self.chunk;
        if points > MAX_CHUNK_POINTS {
            let mut suggest = self.chunk;
            while suggest * suggest * suggest > MAX_CHUNK_POINTS {
                suggest /= 2;
            }
            return Err(InferError::ChunkTooLarge {
                chunk: self.chunk,
                points,
                max: MAX_CHUNK_POINTS,
                suggest,
            });
        }
        Ok(())
    }

    pub fn origin_step(&self) -> ([f64; 3], [f64; 3]) {
        let dims = [self.dims.0, self.dims.1, self.dims.2];
        let mut origin = [0.0; 3];
        let mut step = [0.0; 3];
        for a in 0..3 {
            step[a] = (self.bounds.1[a] - self.bounds.0[a]) / dims[a] as f64;
            origin[a] = self.bounds.0[a] + step[a] / 2.0;
        }
        (origin, step)
    }
}

/// Indexed triangle mesh; `unit_um` records whether vertices are in µm or
/// normalized units.
#[derive(Clone, Debug, Default)]
pub struct MeshSurface {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    pub unit_um: bool,
}

impl MeshSurface {
    /// Rescales normalized vertices into µm.
    pub fn to_um(&self, scale: f64) -> MeshSurface {
        MeshSurface {
            vertices: self
                .vertices
                .iter()
                .map(|v| [v[0] * scale, v[1] * scale, v[2] * scale])
                .collect(),
            triangles: self.triangles.clone(),
            unit_um: true,
        }
    }
}

/// Evaluates the model on every grid point for every requested time point.
/// Points are processed in chunk³-point sub-grids; the output does not
/// depend on the chunk size.
pub fn evaluate_grid(
    state: &ModelState,
    z: &[f64],
    angles: Option<[f64; 3]>,
    spec: &GridSpec,
) -> Result<Vec<SdfGrid>, InferError> {
    spec.validate()?;
    let (origin, step) = spec.origin_step();
    let (nx, ny, nz) = spec.dims;
    let c = spec.chunk;
    let blocks: Vec<(usize, usize, usize)> = {
        let mut v = Vec::new();
        for bz in (0..nz).step_by(c) {
            for by in (0..ny).step_by(c) {
                for bx in (0..nx).step_by(c) {
                    v.push((bx, by, bz));
                }
            }
        }
        v
    };
    let mut out = Vec::with_capacity(spec.time_points.len());
    for &t in &spec.time_points {
        let results: Result<Vec<(usize, usize, usize, Vec<f64>)>, ModelError> = blocks
            .par_iter()
            .map(|&(bx, by, bz)| {
                let ex = (bx + c).min(nx);
                let ey = (by + c).min(ny);
                let ez = (bz + c).min(nz);
                let n = (ex - bx) * (ey - by) * (ez - bz);
                let mut points = Vec::with_capacity(n);
                for zz in bz..ez {
                    for yy in by..ey {
                        for xx in bx..ex {
                            points.push([
                                origin[0] + xx as f64 * step[0],
                                origin[1] + yy as f64 * step[1],
                                origin[2] + zz as f64 * step[2],
                            ]);
                        }
                    }
                }
                let times = vec![t; n];
                let vals = state.forward_fast(&points, &times, z, angles)?;
                Ok((bx, by, bz, vals))
            })
            .collect();
        let mut values = vec![0.0f64; nx * ny * nz];
        for (bx, by, bz, vals) in results? {
            let ex = (bx + c).min(nx);
            let ey = (by + c).min(ny);
            let ez = (bz + c).min(nz);
            let mut i = 0;
            for zz in bz..ez {
                for yy in by..ey {
                    for xx in bx..ex {
                        values[zz * nx * ny + yy * nx + xx] = vals[i];
                        i += 1;
                    }
                }
            }
        }
        out.push(SdfGrid {
            values,
            grid: spec.dims,
            time_coord: t,
            scale: spec.scale_um,
            origin: (origin[0], origin[1], origin[2]),
            step: (step[0], step[1], step[2]),
        });
    }
    Ok(out)
}

/// Evaluates at arbitrary continuous times; thin wrapper over
/// [`evaluate_grid`] for callers that think in time lists.
pub fn interpolate_time(
    state: &ModelState,
    z: &[f64],
    angles: Option<[f64; 3]>,
    t_list: &[f64],
    spec: &GridSpec,
) -> Result<Vec<SdfGrid>, InferError> {
    let mut s = spec.clone();
    s.time_points = t_list.to_vec();
    evaluate_grid(state, z, angles, &s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum SynthesisMode {
    /// Fresh codes from N(0, std²) per entry.
    Gaussian { std: f64 },
    /// Trained codes (round-robin) plus N(0, std²) noise.
    Perturb { std: f64 },
}

/// Draws new latent codes for synthesis.
pub fn synthesize_latents(
    mode: SynthesisMode,
    count: usize,
    latent_dim: usize,
    trained: &[Vec<f64>],
    rng: &mut Stream,
) -> Result<Vec<Vec<f64>>, InferError> {
    match mode {
        SynthesisMode::Gaussian { std } => {
            if std <= 0.0 {
                return Err(InferError::InvalidSpec("gaussian std must be positive".into()));
            }
            Ok((0..count)
                .map(|_| (0..latent_dim).map(|_| rng.normal_with(0.0, std)).collect())
                .collect())
        }
        SynthesisMode::Perturb { std } => {
            if trained.is_empty() {
                return Err(InferError::NoTrainedCodes);
            }
            Ok((0..count)
                .map(|i| {
                    let base = &trained[i % trained.len()];
                    base.iter().map(|v| v + rng.normal_with(0.0, std)).collect()
                })
                .collect())
        }
    }
}

/// Binary occupancy: voxel = 1 iff SDF ≤ 0 (the zero level itself counts as
/// foreground).
pub fn voxelize(grid: &SdfGrid) -> Vec<u8> {
    grid.values.iter().map(|&v| (v <= 0.0) as u8).collect()
}

/// Nearest-neighbor rotation of a binary mask about the grid center
/// (output voxel samples the input at the back-rotated position).
pub fn rotate_mask(mask: &[u8], dims: (usize, usize, usize), r: &crate::rot::Mat3) -> Vec<u8> {
    let (nx, ny, nz) = dims;
    let c = [
        (nx as f64 - 1.0) / 2.0,
        (ny as f64 - 1.0) / 2.0,
        (nz as f64 - 1.0) / 2.0,
    ];
    let rt = crate::rot::mat3_transpose(r);
    let mut out = vec![0u8; mask.len()];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let d = [x as f64 - c[0], y as f64 - c[1], z as f64 - c[2]];
                let s = crate::rot::mat3_apply(&rt, d);
                let sx = (c[0] + s[0]).round() as isize;
                let sy = (c[1] + s[1]).round() as isize;
                let sz = (c[2] + s[2]).round() as isize;
                if sx >= 0
                    && sy >= 0
                    && sz >= 0
                    && (sx as usize) < nx
                    && (sy as usize) < ny
                    && (sz as usize) < nz
                    && mask[sz as usize * nx * ny + sy as usize * nx + sx as usize] != 0
                {
                    out[z * nx * ny + y * nx + x] = 1;
                }
            }
        }
    }
    out
}

/// Writes an ASCII Wavefront OBJ with `v`/`f` records (1-indexed faces).
pub fn write_obj(mesh: &MeshSurface, path: &Path) -> Result<(), InferError> {
    let io_err = |source| InferError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut buf = String::new();
    buf.push_str(&format!(
        "# {} vertices, {} faces ({})\n",
        mesh.vertices.len(),
        mesh.triangles.len(),
        if mesh.unit_um { "micrometers" } else { "normalized units" }
    ));
    for v in &mesh.vertices {
        buf.push_str(&format!("v {} {} {}\n", v[0], v[1], v[2]));
    }
    for t in &mesh.triangles {
        buf.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    f.write_all(buf.as_bytes()).map_err(io_err)
}

/// Raw little-endian u8 mask, x-fastest (the frame format of sequence
/// directories).
pub fn write_mask_raw(mask: &[u8], path: &Path) -> Result<(), InferError> {
    std::fs::write(path, mask).map_err(|source| InferError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, ArchitectureSpec, Activation};

    fn toy_state() -> ModelState {
        let arch = ArchitectureSpec {
            hidden_layers: 3,
            hidden_width: 10,
            latent_dim: 4,
            omega0: 30.0,
            activation: Activation::Sine,
            latent_inject_layers: vec![1, 2],
            coord_inject: true,
            equivariant: true,
            clamp_delta: None,
        };
        let mut rng = Stream::new(41, "infer-test", 0);
        init_model(&arch, 1, 1e-4, &mut rng).unwrap()
    }

    #[test]
    fn chunk_size_does_not_change_output() {
        let state = toy_state();
        let z = state.latents[0].clone();
        let angles = Some(state.angles[0]);
        let mut spec = GridSpec {
            dims: (64, 64, 64),
            time_points: vec![0.25],
            chunk: 32,
            ..GridSpec::default()
        };
        let a = evaluate_grid(&state, &z, angles, &spec).unwrap();
        spec.chunk = 7;
        let b = evaluate_grid(&state, &z, angles, &spec).unwrap();
        spec.chunk = 64;
        let c = evaluate_grid(&state, &z, angles, &spec).unwrap();
        assert_eq!(a[0].values, b[0].values);
        assert_eq!(a[0].values, c[0].values);
    }

    #[test]
    fn tiny_grid_matches_direct_forward() {
        let state = toy_state();
        let z = state.latents[0].clone();
        let angles = Some(state.angles[0]);
        let spec = GridSpec {
            dims: (2, 2, 2),
            time_points: vec![0.0],
            chunk: 32,
            ..GridSpec::default()
        };
        let grids = evaluate_grid(&state, &z, angles, &spec).unwrap();
        assert_eq!(grids[0].values.len(), 8);
        let (origin, step) = spec.origin_step();
        let mut points = Vec::new();
        for zz in 0..2 {
            for yy in 0..2 {
                for xx in 0..2 {
                    points.push([
                        origin[0] + xx as f64 * step[0],
                        origin[1] + yy as f64 * step[1],
                        origin[2] + zz as f64 * step[2],
                    ]);
                }
            }
        }
        let fast = state
            .forward_fast(&points, &vec![0.0; 8], &z, angles)
            .unwrap();
        assert_eq!(grids[0].values, fast);
        let reference = state.forward(&points, &vec![0.0; 8], &z, angles).unwrap();
        for (a, b) in grids[0].values.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12, "fast path diverged: {a} vs {b}");
        }
    }

    #[test]
    fn chunk_count_for_large_grid() {
        // 256³ at chunk 32 → 512 blocks per time point.
        let n_blocks = |dim: usize, c: usize| dim.div_ceil(c);
        assert_eq!(n_blocks(256, 32).pow(3), 512);
        // 30 time points dispatch 30·512 chunks.
        assert_eq!(30 * n_blocks(256, 32).pow(3), 15_360);
    }

    #[test]
    fn oversized_chunk_rejected_with_suggestion() {
        let spec = GridSpec {
            chunk: 200,
            ..GridSpec::default()
        };
        match spec.validate() {
            Err(InferError::ChunkTooLarge { suggest, .. }) => {
                assert!(suggest.pow(3) <= MAX_CHUNK_POINTS);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn synthesize_gaussian_std_within_concentration_bounds() {
        let mut rng = Stream::new(42, "synth", 0);
        let codes =
            synthesize_latents(SynthesisMode::Gaussian { std: 0.001 }, 33, 64, &[], &mut rng)
                .unwrap();
        assert_eq!(codes.len(), 33);
        let all: Vec<f64> = codes.iter().flatten().copied().collect();
        assert_eq!(all.len(), 2112);
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / all.len() as f64;
        let std = var.sqrt();
        assert!(std > 0.0008 && std < 0.0012, "sample std {std}");
    }

    #[test]
    fn perturb_zero_noise_returns_trained_codes() {
        let trained = vec![vec![0.1, 0.2], vec![-0.3, 0.4]];
        let mut rng = Stream::new(43, "synth", 1);
        let codes = synthesize_latents(
            SynthesisMode::Perturb { std: 0.0 },
            4,
            2,
            &trained,
            &mut rng,
        )
        .unwrap();
        assert_eq!(codes[0], trained[0]);
        assert_eq!(codes[1], trained[1]);
        assert_eq!(codes[2], trained[0]);
        // Perturb without trained codes is a usage error.
        assert!(matches!(
            synthesize_latents(SynthesisMode::Perturb { std: 0.1 }, 1, 2, &[], &mut rng),
            Err(InferError::NoTrainedCodes)
        ));
    }

    #[test]
    fn voxelize_thresholds_at_zero_inclusive() {
        let grid = SdfGrid {
            values: vec![-0.5, 0.0, 0.5, 1.0],
            grid: (4, 1, 1),
            time_coord: 0.0,
            scale: 1.0,
            origin: (-0.75, 0.0, 0.0),
            step: (0.5, 0.0, 0.0),
        };
        assert_eq!(voxelize(&grid), vec![1, 1, 0, 0]);
        let all_pos = SdfGrid {
            values: vec![0.1; 4],
            ..grid
        };
        assert_eq!(voxelize(&all_pos), vec![0, 0, 0, 0]);
    }

    #[test]
    fn obj_export_round_trip_shape() {
        let mesh = MeshSurface {
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            triangles: vec![[0, 1, 2]],
            unit_um: false,
        };
        let path = std::env::temp_dir().join(format!("nsdf-obj-{}.obj", std::process::id()));
        write_obj(&mesh, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("v 0 0 0\n") || text.contains("v 0 0 0\r\n"));
        assert!(text.contains("f 1 2 3"));
        let _ = std::fs::remove_file(&path);
    }
}

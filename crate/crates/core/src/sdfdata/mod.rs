//! Voxel-mask ingest and conversion into normalized signed-distance training
//! data.
//!
//! The pipeline is: load a mask sequence, center (and optionally axis-align)
//! every frame, run the exact signed distance transform, then map physical
//! coordinates into the normalized domain `Ω = [−1,1]³`, `τ = [−1,1]`.
//! Sample positions are voxel centers; the normalization scale is half of
//! the largest physical extent and is shared across the axes and time points
//! of a sequence so shapes keep their proportions while growing.

mod align;
mod edt;
mod format;
mod sample;

pub use align::center_and_align;
pub use edt::{signed_distance_transform, squared_distance_to_sites};
pub use format::{
    load_voxel_sequence, read_sdf_grid, write_sdf_grid, write_voxel_sequence, SequenceMeta,
};
pub use sample::{draw_training_batch, DrawStats, SampleBatch, SamplerConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ContentError {
    #[error("empty frame {0}")]
    EmptyFrame(usize),
    #[error("volume is entirely foreground")]
    AllForeground,
    #[error("volume is entirely background")]
    AllBackground,
    #[error("frame {frame} has {count} connected components; at most 2 are supported")]
    TooManyComponents { frame: usize, count: usize },
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing or unreadable frame {frame} ({path}): {source}")]
    Frame {
        frame: usize,
        path: String,
        source: std::io::Error,
    },
    #[error("corrupt frame {frame}: {detail}")]
    CorruptFrame { frame: usize, detail: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Content(#[from] ContentError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("metadata error: {0}")]
    Meta(String),
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("points_per_timepoint {requested} exceeds the {available} samples in the grid")]
    TooManyPoints { requested: usize, available: usize },
    #[error("no grids to sample from")]
    NoGrids,
}

/// One binary occupancy volume, x-fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Volume {
    pub dims: (usize, usize, usize),
    pub data: Vec<u8>,
}

impl Volume {
    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Volume {
            dims,
            data: vec![0; dims.0 * dims.1 * dims.2],
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        z * self.dims.0 * self.dims.1 + y * self.dims.0 + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.data[self.idx(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: u8) {
        let i = self.idx(x, y, z);
        self.data[i] = v;
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn iter_coords(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let (nx, ny, nz) = self.dims;
        (0..nz).flat_map(move |z| (0..ny).flat_map(move |y| (0..nx).map(move |x| (x, y, z))))
    }
}

/// Time-ordered binary occupancy volumes with physical voxel spacing.
#[derive(Clone, Debug)]
pub struct VoxelSequence {
    pub volumes: Vec<Volume>,
    pub spacing: (f64, f64, f64),
    pub dims: (usize, usize, usize),
    pub name: String,
}

impl VoxelSequence {
    pub fn n_time(&self) -> usize {
        self.volumes.len()
    }

    /// Checks the type invariants: shared dims, positive spacing, at least
    /// one frame, no empty frame.
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.volumes.is_empty() {
            return Err(IngestError::Schema("sequence has no frames".into()));
        }
        if self.spacing.0 <= 0.0 || self.spacing.1 <= 0.0 || self.spacing.2 <= 0.0 {
            return Err(IngestError::Schema(format!(
                "spacing components must be positive, got {:?}",
                self.spacing
            )));
        }
        for (k, v) in self.volumes.iter().enumerate() {
            if v.dims != self.dims {
                return Err(IngestError::Schema(format!(
                    "frame {k} has dims {:?}, expected {:?}",
                    v.dims, self.dims
                )));
            }
            if v.foreground_count() == 0 {
                return Err(ContentError::EmptyFrame(k).into());
            }
        }
        Ok(())
    }
}

/// Discrete signed-distance samples on a regular grid for one time point,
/// in normalized domain units.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdfGrid {
    pub values: Vec<f64>,
    pub grid: (usize, usize, usize),
    /// Time coordinate in τ = [−1, 1].
    pub time_coord: f64,
    /// Micrometers per normalized unit.
    pub scale: f64,
    /// Normalized coordinate of sample (0,0,0) per axis; samples step by
    /// `step` along each axis (voxel-center convention).
    pub origin: (f64, f64, f64),
    pub step: (f64, f64, f64),
}

impl SdfGrid {
    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        z * self.grid.0 * self.grid.1 + y * self.grid.0 + x
    }

    #[inline]
    pub fn value(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.idx(x, y, z)]
    }

    /// Normalized coordinates of sample (x, y, z).
    #[inline]
    pub fn position(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        [
            self.origin.0 + x as f64 * self.step.0,
            self.origin.1 + y as f64 * self.step.1,
            self.origin.2 + z as f64 * self.step.2,
        ]
    }

    /// A surface must exist and values must respect the 1-Lipschitz bound
    /// between neighboring samples (up to discretization tolerance).
    pub fn validate(&self) -> Result<(), String> {
        let (min, max) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if !(min < 0.0 && 0.0 < max) {
            return Err(format!(
                "grid holds no surface: values span [{min}, {max}]"
            ));
        }
        const TOL: f64 = 1e-6;
        let (nx, ny, nz) = self.grid;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let v = self.value(x, y, z);
                    if x + 1 < nx && (v - self.value(x + 1, y, z)).abs() > self.step.0 + TOL {
                        return Err(format!("Lipschitz violation at ({x},{y},{z}) along x"));
                    }
                    if y + 1 < ny && (v - self.value(x, y + 1, z)).abs() > self.step.1 + TOL {
                        return Err(format!("Lipschitz violation at ({x},{y},{z}) along y"));
                    }
                    if z + 1 < nz && (v - self.value(x, y, z + 1)).abs() > self.step.2 + TOL {
                        return Err(format!("Lipschitz violation at ({x},{y},{z}) along z"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Maps time index `k` of `n` onto τ; a single time point maps to 0.
pub fn time_coordinate(k: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        -1.0 + 2.0 * k as f64 / (n - 1) as f64
    }
}

/// Converts a physical-unit SDF volume into a normalized [`SdfGrid`].
///
/// The spatial mapping is `x_norm = (x_phys − extent/2) / scale` with
/// `scale = extent_max / 2`, samples at voxel centers, and SDF values
/// divided by the same scale.
pub fn normalize_to_domain(
    sdf_um: &[f64],
    dims: (usize, usize, usize),
    spacing: (f64, f64, f64),
    time_index: usize,
    n_time: usize,
) -> SdfGrid {
    let ext = (
        dims.0 as f64 * spacing.0,
        dims.1 as f64 * spacing.1,
        dims.2 as f64 * spacing.2,
    );
    let scale = 0.5 * ext.0.max(ext.1).max(ext.2);
    let origin = (
        (0.5 * spacing.0 - 0.5 * ext.0) / scale,
        (0.5 * spacing.1 - 0.5 * ext.1) / scale,
        (0.5 * spacing.2 - 0.5 * ext.2) / scale,
    );
    let step = (spacing.0 / scale, spacing.1 / scale, spacing.2 / scale);
    SdfGrid {
        values: sdf_um.iter().map(|v| v / scale).collect(),
        grid: dims,
        time_coord: time_coordinate(time_index, n_time),
        scale,
        origin,
        step,
    }
}

/// Physical µm position of the normalized coordinate `x_norm` on an axis
/// with the given extent (inverse of the `normalize_to_domain` mapping).
pub fn denormalize_position(x_norm: f64, scale: f64, extent: f64) -> f64 {
    x_norm * scale + 0.5 * extent
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_volume_scale_and_value() {
        let dims = (256, 256, 256);
        let spacing = (0.125, 0.125, 0.125);
        let n = dims.0 * dims.1 * dims.2;
        let mut sdf = vec![1.0; n];
        sdf[0] = 0.6;
        sdf[1] = -0.3;
        let grid = normalize_to_domain(&sdf, dims, spacing, 0, 30);
        assert_eq!(grid.scale, 16.0);
        assert_eq!(grid.values[0], 0.0375);
        assert_eq!(grid.time_coord, -1.0);
    }

    #[test]
    fn time_endpoints_and_single_frame() {
        assert_eq!(time_coordinate(0, 30), -1.0);
        assert_eq!(time_coordinate(29, 30), 1.0);
        assert_eq!(time_coordinate(0, 1), 0.0);
        // stride-4 subset of a 29-frame sequence: frame index k0 maps to
        // −1 + k0/14.
        assert!((time_coordinate(4, 29) - (-1.0 + 4.0 / 14.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_sdf_stays_zero() {
        let grid = normalize_to_domain(&[0.0, 1.0, -1.0, 0.5], (4, 1, 1), (1.0, 1.0, 1.0), 0, 1);
        assert_eq!(grid.values[0], 0.0);
    }

    #[test]
    fn round_trip_positions() {
        let dims = (32, 16, 8);
        let spacing = (0.5, 1.0, 2.0);
        let grid = normalize_to_domain(&vec![0.0; 32 * 16 * 8], dims, spacing, 0, 1);
        let ext = (
            dims.0 as f64 * spacing.0,
            dims.1 as f64 * spacing.1,
            dims.2 as f64 * spacing.2,
        );
        for (i, (ext_axis, sp)) in [(ext.0, spacing.0), (ext.1, spacing.1), (ext.2, spacing.2)]
            .iter()
            .enumerate()
        {
            for k in 0..[dims.0, dims.1, dims.2][i] {
                let phys = (k as f64 + 0.5) * sp;
                let norm = (phys - 0.5 * ext_axis) / grid.scale;
                let back = denormalize_position(norm, grid.scale, *ext_axis);
                assert!(
                    (back - phys).abs() <= 1e-9 * phys.abs().max(1.0),
                    "axis {i} sample {k}: {back} vs {phys}"
                );
            }
        }
    }

    #[test]
    fn largest_axis_spans_unit_interval() {
        let grid = normalize_to_domain(&vec![0.0; 64 * 32 * 32], (64, 32, 32), (1.0, 1.0, 1.0), 0, 1);
        let first = grid.position(0, 0, 0);
        let last = grid.position(63, 31, 31);
        assert!((first[0] - (-1.0 + grid.step.0 / 2.0)).abs() < 1e-12);
        assert!((last[0] - (1.0 - grid.step.0 / 2.0)).abs() < 1e-12);
        // Shorter axes sit centered strictly inside the unit interval.
        assert!(first[1] > -1.0 && last[1] < 1.0);
        assert!((first[1] + last[1]).abs() < 1e-12);
    }
}

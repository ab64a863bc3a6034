//! Non-uniform training-batch sampling.
//!
//! A batch selects `batch_sequences` sequences with repetition and one
//! uniformly random time point per pick. From each chosen grid it draws
//! `points_per_timepoint` distinct samples: 70% from voxels whose SDF is at
//! most `near_threshold_um` (the surface band plus the interior) and 30%
//! from the rest. When a stratum runs short the deficit is filled from the
//! other stratum and counted in [`DrawStats`].

use super::{SamplerError, SdfGrid};
use crate::rng::Stream;

pub const NEAR_FRACTION: f64 = 0.7;

#[derive(Clone, Debug)]
pub struct SamplerConfig {
    pub batch_sequences: usize,
    pub points_per_timepoint: usize,
    /// Threshold in physical µm; converted per grid via its scale.
    pub near_threshold_um: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            batch_sequences: 5,
            points_per_timepoint: 1_000_000,
            near_threshold_um: 0.6,
        }
    }
}

/// Flat set of (x, y, z, t, sdf) training tuples.
#[derive(Clone, Debug, Default)]
pub struct SampleBatch {
    pub points: Vec<[f64; 3]>,
    pub times: Vec<f64>,
    pub targets: Vec<f64>,
    pub seq_ids: Vec<usize>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, p: [f64; 3], t: f64, sdf: f64, seq: usize) {
        self.points.push(p);
        self.times.push(t);
        self.targets.push(sdf);
        self.seq_ids.push(seq);
    }

    /// Every coordinate must lie inside Ω × τ and the four lists must agree
    /// in length (already structural).
    pub fn validate(&self) -> Result<(), String> {
        for (i, p) in self.points.iter().enumerate() {
            if p.iter().any(|c| !(-1.0..=1.0).contains(c)) {
                return Err(format!("point {i} outside the spatial domain: {p:?}"));
            }
            if !(-1.0..=1.0).contains(&self.times[i]) {
                return Err(format!("time {i} outside the temporal domain: {}", self.times[i]));
            }
        }
        Ok(())
    }
}

/// Per-draw bookkeeping, including stratum shortfalls.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DrawStats {
    pub near_drawn: usize,
    pub far_drawn: usize,
    pub near_deficit: usize,
    pub far_deficit: usize,
    /// (seq, time) picks in draw order.
    pub picks: Vec<(usize, usize)>,
}

/// Draws one training batch from `grids[seq][time]`.
pub fn draw_training_batch(
    grids: &[Vec<SdfGrid>],
    rng: &mut Stream,
    cfg: &SamplerConfig,
) -> Result<(SampleBatch, DrawStats), SamplerError> {
    if grids.is_empty() || grids.iter().any(|g| g.is_empty()) {
        return Err(SamplerError::NoGrids);
    }
    let mut batch = SampleBatch::default();
    let mut stats = DrawStats::default();
    for _ in 0..cfg.batch_sequences {
        let seq = rng.index(grids.len());
        let time = rng.index(grids[seq].len());
        stats.picks.push((seq, time));
        draw_from_grid(&grids[seq][time], seq, cfg, rng, &mut batch, &mut stats)?;
    }
    Ok((batch, stats))
}

fn draw_from_grid(
    grid: &SdfGrid,
    seq: usize,
    cfg: &SamplerConfig,
    rng: &mut Stream,
    batch: &mut SampleBatch,
    stats: &mut DrawStats,
) -> Result<(), SamplerError> {
    let total = grid.values.len();
    let want = cfg.points_per_timepoint;
    if want > total {
        return Err(SamplerError::TooManyPoints {
            requested: want,
            available: total,
        });
    }
    let thr = cfg.near_threshold_um / grid.scale;
    let mut near: Vec<u32> = Vec::new();
    let mut far: Vec<u32> = Vec::new();
    for (i, &v) in grid.values.iter().enumerate() {
        if v <= thr {
            near.push(i as u32);
        } else {
            far.push(i as u32);
        }
    }

    let want_near = (NEAR_FRACTION * want as f64).round() as usize;
    let want_far = want - want_near;
    let take_near = want_near.min(near.len());
    let take_far = want_far.min(far.len());
    let near_deficit = want_near - take_near;
    let far_deficit = want_far - take_far;
    // Borrow the shortfall from the other stratum; `want <= total`
    // guarantees the borrow fits.
    let take_near = take_near + far_deficit.min(near.len() - take_near);
    let take_far = take_far + near_deficit.min(far.len() - take_far);
    stats.near_deficit += near_deficit;
    stats.far_deficit += far_deficit;
    stats.near_drawn += take_near;
    stats.far_drawn += take_far;

    for (pool, take) in [(&mut near, take_near), (&mut far, take_far)] {
        let chosen = rng.choose_k(pool, take);
        for idx in chosen {
            let i = idx as usize;
            let (nx, ny) = (grid.grid.0, grid.grid.1);
            let x = i % nx;
            let y = (i / nx) % ny;
            let z = i / (nx * ny);
            batch.push(grid.position(x, y, z), grid.time_coord, grid.values[i], seq);
        }
    }
    Ok(())
}

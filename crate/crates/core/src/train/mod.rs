//! Joint optimization of network weights, latent codes, and rotation angles.
//!
//! Every epoch runs `ceil(N / batch_sequences)` optimizer steps. A step
//! draws a batch (sequences picked with repetition), assembles the loss
//! `Σ_i [ mean-L1(pred_i, target_i) + ‖z_i‖²/σ² ]` over the distinct
//! sequences in the batch, backpropagates, and applies one Adam update to
//! all tensors (absent sequences see zero gradients). The learning rate is
//! multiplied by `lr_decay_factor` every `lr_decay_every` epochs.

mod adam;

pub use adam::{AdamConfig, AdamError, AdamState};

use crate::autodiff::{NodeId, Tape};
use crate::mat::Mat;
use crate::model::{build_tape_forward, ModelError, ModelState, OptimizerBlob};
use crate::rng::Stream;
use crate::sdfdata::{draw_training_batch, SampleBatch, SamplerConfig, SamplerError, SdfGrid};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Graph(#[from] crate::autodiff::GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Adam(#[from] AdamError),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("loss is not finite at epoch {epoch} step {step}{diag}")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        diag: String,
    },
    #[error("empty batch: {0}")]
    EmptyBatch(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(#[from] crate::model::CheckpointError),
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_sequences: usize,
    pub points_per_timepoint: usize,
    pub lr: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub sigma2: f64,
    pub near_threshold_um: f64,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Write a checkpoint every this many epochs (requires checkpoint_dir).
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2000,
            batch_sequences: 5,
            points_per_timepoint: 1_000_000,
            lr: 1e-4,
            lr_decay_factor: 0.5,
            lr_decay_every: 350,
            sigma2: 1e-4,
            near_threshold_um: 0.6,
            adam: AdamConfig::default(),
            seed: 0,
            checkpoint_every: None,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.lr <= 0.0 {
            return Err(TrainError::InvalidConfig("lr must be positive".into()));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(TrainError::InvalidConfig(
                "lr_decay_factor must lie in (0, 1]".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_sequences == 0 {
            return Err(TrainError::InvalidConfig(
                "batch_sequences must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Learning rate at a 0-based epoch: decays stepwise.
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay_factor.powi((epoch / self.lr_decay_every) as i32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub loss_rec: f64,
    pub loss_code: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default)]
pub struct History {
    pub rows: Vec<HistoryRow>,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss_rec,loss_code,lr,seconds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.loss_rec, r.loss_code, r.lr, r.seconds
            ));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Mean absolute error over a batch. Errors on empty input.
pub fn loss_reconstruction(pred: &[f64], target: &[f64]) -> Result<f64, TrainError> {
    if pred.is_empty() || pred.len() != target.len() {
        return Err(TrainError::EmptyBatch(format!(
            "reconstruction loss needs equal nonzero lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

/// Latent regularizer `‖z‖² / σ²`.
pub fn loss_code(z: &[f64], sigma2: f64) -> f64 {
    assert!(sigma2 > 0.0, "sigma2 must be positive");
    z.iter().map(|v| v * v).sum::<f64>() / sigma2
}

/// Loss breakdown for logging.
#[derive(Clone, Debug, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub rec: f64,
    pub code: f64,
    /// Per distinct sequence: (seq_id, rec, code).
    pub per_sequence: Vec<(usize, f64, f64)>,
}

/// Evaluates the training objective on a batch without gradients.
pub fn total_loss(state: &ModelState, batch: &SampleBatch) -> Result<LossBreakdown, TrainError> {
    let groups = group_by_sequence(state, batch)?;
    let mut out = LossBreakdown::default();
    for (seq, idx) in groups {
        let points: Vec<[f64; 3]> = idx.iter().map(|&i| batch.points[i]).collect();
        let times: Vec<f64> = idx.iter().map(|&i| batch.times[i]).collect();
        let targets: Vec<f64> = idx.iter().map(|&i| batch.targets[i]).collect();
        let angles = if state.arch.equivariant {
            Some(state.angles[seq])
        } else {
            None
        };
        let pred = state.forward(&points, &times, &state.latents[seq], angles)?;
        let rec = loss_reconstruction(&pred, &targets)?;
        let code = loss_code(&state.latents[seq], state.sigma2);
        out.per_sequence.push((seq, rec, code));
        out.rec += rec;
        out.code += code;
    }
    out.total = out.rec + out.code;
    Ok(out)
}

fn group_by_sequence(
    state: &ModelState,
    batch: &SampleBatch,
) -> Result<BTreeMap<usize, Vec<usize>>, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch("batch holds no samples".into()));
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &seq) in batch.seq_ids.iter().enumerate() {
        if seq >= state.n_sequences() {
            return Err(ModelError::UnknownSequence(seq).into());
        }
        groups.entry(seq).or_default().push(i);
    }
    Ok(groups)
}

// ---------------------------------------------------------------------------
// Parameter registry
// ---------------------------------------------------------------------------

/// Fixed tensor order: layer weights and biases, then latents, then angles.
/// Checkpoint optimizer blobs use the same order.
fn tensor_names(state: &ModelState) -> Vec<String> {
    let mut names = Vec::new();
    for i in 0..state.layers.len() {
        names.push(format!("layer_{i}.w"));
        names.push(format!("layer_{i}.b"));
    }
    for i in 0..state.latents.len() {
        names.push(format!("latent_{i}"));
    }
    if state.arch.equivariant {
        for i in 0..state.angles.len() {
            names.push(format!("angles_{i}"));
        }
    }
    names
}

fn tensor_shapes(state: &ModelState) -> Vec<usize> {
    let mut shapes = Vec::new();
    for l in &state.layers {
        shapes.push(l.w.len());
        shapes.push(l.b.len());
    }
    for z in &state.latents {
        shapes.push(z.len());
    }
    if state.arch.equivariant {
        for _ in &state.angles {
            shapes.push(3);
        }
    }
    shapes
}

/// Flattens optimizer moments in the fixed tensor order of `tensor_shapes`.
pub fn optimizer_to_blob(_state: &ModelState, adam: &AdamState) -> OptimizerBlob {
    OptimizerBlob {
        m: adam.m.iter().flatten().copied().collect(),
        v: adam.v.iter().flatten().copied().collect(),
        step: adam.step,
    }
}

pub fn optimizer_from_blob(
    state: &ModelState,
    blob: &OptimizerBlob,
    cfg: AdamConfig,
) -> Result<AdamState, TrainError> {
    let shapes = tensor_shapes(state);
    let total: usize = shapes.iter().sum();
    if blob.m.len() != total || blob.v.len() != total {
        return Err(TrainError::InvalidConfig(format!(
            "optimizer blob holds {} moments, model needs {total}",
            blob.m.len()
        )));
    }
    let mut adam = AdamState::new(&shapes, cfg);
    let mut off = 0;
    for (k, &n) in shapes.iter().enumerate() {
        adam.m[k].copy_from_slice(&blob.m[off..off + n]);
        adam.v[k].copy_from_slice(&blob.v[off..off + n]);
        off += n;
    }
    adam.step = blob.step;
    Ok(adam)
}

// ---------------------------------------------------------------------------
// One optimizer step
// ---------------------------------------------------------------------------

struct StepGrads {
    /// (w_grad, b_grad) per layer.
    layers: Vec<(Vec<f64>, Vec<f64>)>,
    /// seq → latent grad.
    latents: BTreeMap<usize, Vec<f64>>,
    /// seq → angle grad.
    angles: BTreeMap<usize, [f64; 3]>,
    breakdown: LossBreakdown,
}

/// Builds the loss tape for a batch, backpropagates, and returns gradients.
fn loss_and_grads(state: &ModelState, batch: &SampleBatch) -> Result<StepGrads, TrainError> {
    let groups = group_by_sequence(state, batch)?;
    let mut tape = Tape::new();
    let weight_ids: Vec<(NodeId, NodeId)> = state
        .layers
        .iter()
        .map(|l| {
            let w = tape.leaf(l.w.clone());
            let b = tape.leaf(Mat::from_vec(1, l.b.len(), l.b.clone()));
            (w, b)
        })
        .collect();

    let mut terms = Vec::new();
    let mut z_ids = BTreeMap::new();
    let mut angle_ids = BTreeMap::new();
    let mut breakdown = LossBreakdown::default();
    let inv_sigma2 = 1.0 / state.sigma2;
    for (&seq, idx) in &groups {
        let b = idx.len();
        let mut pmat = Mat::zeros(b, 3);
        let mut tmat = Mat::zeros(b, 1);
        let mut target = Mat::zeros(b, 1);
        for (row, &i) in idx.iter().enumerate() {
            pmat.row_mut(row).copy_from_slice(&batch.points[i]);
            tmat.set(row, 0, batch.times[i]);
            target.set(row, 0, batch.targets[i]);
        }
        let pid = tape.constant(pmat);
        let tid = tape.constant(tmat);
        let zid = tape.leaf(Mat::from_vec(
            1,
            state.arch.latent_dim,
            state.latents[seq].clone(),
        ));
        z_ids.insert(seq, zid);
        let aid = if state.arch.equivariant {
            let id = tape.leaf(Mat::from_vec(1, 3, state.angles[seq].to_vec()));
            angle_ids.insert(seq, id);
            Some(id)
        } else {
            None
        };
        let target_id = tape.constant(target);
        let pred = build_tape_forward(
            &mut tape,
            &state.arch,
            &weight_ids,
            pid,
            tid,
            Some(zid),
            aid,
        )?;
        let diff = tape.sub(pred, target_id)?;
        let rec = tape.mean_abs(diff)?;
        let zsq = tape.sum_sq(zid);
        let code = tape.scale(zsq, inv_sigma2);
        breakdown
            .per_sequence
            .push((seq, tape.value(rec).get(0, 0), tape.value(code).get(0, 0)));
        breakdown.rec += tape.value(rec).get(0, 0);
        breakdown.code += tape.value(code).get(0, 0);
        terms.push(rec);
        terms.push(code);
    }
    let total = tape.sum_scalars(&terms)?;
    breakdown.total = tape.value(total).get(0, 0);
    tape.backward(total)?;

    let layers = weight_ids
        .iter()
        .map(|&(w, b)| (tape.grad(w).data().to_vec(), tape.grad(b).data().to_vec()))
        .collect();
    let latents = z_ids
        .iter()
        .map(|(&seq, &id)| (seq, tape.grad(id).data().to_vec()))
        .collect();
    let angles = angle_ids
        .iter()
        .map(|(&seq, &id)| {
            let g = tape.grad(id);
            (seq, [g.get(0, 0), g.get(0, 1), g.get(0, 2)])
        })
        .collect();
    Ok(StepGrads {
        layers,
        latents,
        angles,
        breakdown,
    })
}

/// Applies one Adam update across every tensor; sequences absent from the
/// step see zero gradients (their moments still decay).
fn apply_step(
    state: &mut ModelState,
    grads: &StepGrads,
    adam: &mut AdamState,
    lr: f64,
) -> Result<(), TrainError> {
    let t = adam.begin_step();
    let names = tensor_names(state);
    let mut k = 0usize;
    for (i, (gw, gb)) in grads.layers.iter().enumerate() {
        adam.update_tensor(k, &names[k], state.layers[i].w.data_mut(), gw, lr, t)?;
        k += 1;
        adam.update_tensor(k, &names[k], &mut state.layers[i].b, gb, lr, t)?;
        k += 1;
    }
    let zero_latent = vec![0.0; state.arch.latent_dim];
    for i in 0..state.latents.len() {
        let g = grads.latents.get(&i).unwrap_or(&zero_latent);
        adam.update_tensor(k, &names[k], &mut state.latents[i], g, lr, t)?;
        k += 1;
    }
    if state.arch.equivariant {
        for i in 0..state.angles.len() {
            let g = grads.angles.get(&i).copied().unwrap_or([0.0; 3]);
            adam.update_tensor(k, &names[k], &mut state.angles[i], &g, lr, t)?;
            k += 1;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

pub struct TrainOutput {
    pub state: ModelState,
    pub history: History,
    pub adam: AdamState,
}

/// Trains the model on `data[seq][time]` grids. Fully reproducible for a
/// fixed seed; resumable by passing the optimizer state from a checkpoint.
pub fn train(
    mut state: ModelState,
    data: &[Vec<SdfGrid>],
    cfg: &TrainConfig,
    resume: Option<AdamState>,
) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    if data.len() != state.n_sequences() {
        return Err(TrainError::InvalidConfig(format!(
            "model registers {} sequences but data holds {}",
            state.n_sequences(),
            data.len()
        )));
    }
    let steps_per_epoch = data.len().div_ceil(cfg.batch_sequences);
    let sampler = SamplerConfig {
        batch_sequences: cfg.batch_sequences,
        points_per_timepoint: cfg.points_per_timepoint,
        near_threshold_um: cfg.near_threshold_um,
    };
    let mut adam = resume.unwrap_or_else(|| AdamState::new(&tensor_shapes(&state), cfg.adam));
    let start_epoch = (adam.step / steps_per_epoch as u64) as usize;
    let mut history = History::default();

    for epoch in start_epoch..cfg.epochs {
        let lr = cfg.lr_at_epoch(epoch);
        let t0 = Instant::now();
        let mut rec_sum = 0.0;
        let mut code_sum = 0.0;
        for step in 0..steps_per_epoch {
            let global_step = (epoch * steps_per_epoch + step) as u64;
            let mut rng = Stream::new(cfg.seed, "batch", global_step);
            let (batch, _stats) = draw_training_batch(data, &mut rng, &sampler)?;
            let grads = loss_and_grads(&state, &batch)?;
            if !grads.breakdown.total.is_finite() {
                let diag = if let Some(dir) = &cfg.checkpoint_dir {
                    let path = dir.join("diagnostic_nan.nsmc");
                    let blob = optimizer_to_blob(&state, &adam);
                    crate::model::save_checkpoint(&path, &state, Some(&blob))?;
                    format!(" (diagnostic checkpoint at {})", path.display())
                } else {
                    String::new()
                };
                return Err(TrainError::NonFiniteLoss { epoch, step, diag });
            }
            apply_step(&mut state, &grads, &mut adam, lr)?;
            rec_sum += grads.breakdown.rec;
            code_sum += grads.breakdown.code;
        }
        history.rows.push(HistoryRow {
            epoch,
            loss_rec: rec_sum / steps_per_epoch as f64,
            loss_code: code_sum / steps_per_epoch as f64,
            lr,
            seconds: t0.elapsed().as_secs_f64(),
        });
        if let (Some(every), Some(dir)) = (cfg.checkpoint_every, &cfg.checkpoint_dir) {
            if every > 0 && (epoch + 1) % every == 0 {
                let blob = optimizer_to_blob(&state, &adam);
                crate::model::save_checkpoint(
                    &dir.join(format!("ckpt_epoch_{:05}.nsmc", epoch + 1)),
                    &state,
                    Some(&blob),
                )?;
            }
        }
    }
    Ok(TrainOutput {
        state,
        history,
        adam,
    })
}

// ---------------------------------------------------------------------------
// Latent fitting for new sequences
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct FitConfig {
    pub iterations: usize,
    pub lr: f64,
    pub n_restarts: usize,
    pub sigma2: f64,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            iterations: 400,
            lr: 5e-3,
            n_restarts: 8,
            sigma2: 1e-4,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub z: Vec<f64>,
    pub angles: [f64; 3],
    pub loss: f64,
    pub restart_losses: Vec<f64>,
}

/// Optimizes a latent code (and rotation angles for rotation-aware models)
/// against frozen decoder weights by Adam on the sample objective
/// `mean-L1 + ‖z‖²/σ²`. Keeps the best iterate seen across all restarts.
///
/// Restart 1 initializes angles from `N(0, π²/64)` like training. The
/// objective is multimodal in the rotation and that prior concentrates all
/// starts near the identity, so each later restart draws a small pool of
/// uniform rotations, scores them once, and descends from the best; pool
/// candidates already tried by earlier restarts are not repeated.
pub fn fit_latent(
    state: &ModelState,
    points: &[[f64; 3]],
    times: &[f64],
    targets: &[f64],
    cfg: &FitConfig,
) -> Result<FitResult, TrainError> {
    if points.is_empty() {
        return Err(TrainError::EmptyBatch(
            "latent fitting needs a nonempty sample set".into(),
        ));
    }
    if points.len() != times.len() || points.len() != targets.len() {
        return Err(TrainError::EmptyBatch(
            "points, times, and targets must have equal lengths".into(),
        ));
    }
    let latent_dim = state.arch.latent_dim;
    let mut best: Option<FitResult> = None;
    let mut restart_losses = Vec::new();

    // Fixed-topology tape, rebuilt values per restart via replay.
    let mut tape = Tape::new();
    let weight_ids: Vec<(NodeId, NodeId)> = state
        .layers
        .iter()
        .map(|l| {
            let w = tape.constant(l.w.clone());
            let b = tape.constant(Mat::from_vec(1, l.b.len(), l.b.clone()));
            (w, b)
        })
        .collect();
    let b = points.len();
    let mut pmat = Mat::zeros(b, 3);
    let mut tmat = Mat::zeros(b, 1);
    let mut tgt = Mat::zeros(b, 1);
    for i in 0..b {
        pmat.row_mut(i).copy_from_slice(&points[i]);
        tmat.set(i, 0, times[i]);
        tgt.set(i, 0, targets[i]);
    }
    let pid = tape.constant(pmat);
    let tid = tape.constant(tmat);
    let target_id = tape.constant(tgt);
    let zid = tape.leaf(Mat::zeros(1, latent_dim));
    let aid = if state.arch.equivariant {
        Some(tape.leaf(Mat::zeros(1, 3)))
    } else {
        None
    };
    let pred = build_tape_forward(
        &mut tape,
        &state.arch,
        &weight_ids,
        pid,
        tid,
        Some(zid),
        aid,
    )?;
    let diff = tape.sub(pred, target_id)?;
    let rec = tape.mean_abs(diff)?;
    let zsq = tape.sum_sq(zid);
    let code = tape.scale(zsq, 1.0 / cfg.sigma2);
    let total = tape.sum_scalars(&[rec, code])?;

    for restart in 0..cfg.n_restarts.max(1) {
        let mut rng = Stream::new(cfg.seed, "fit-restart", restart as u64);
        let z0: Vec<f64> = (0..latent_dim).map(|_| rng.normal_with(0.0, 0.01)).collect();
        let a0 = if restart == 0 || aid.is_none() {
            let std = std::f64::consts::PI / 8.0;
            [
                rng.normal_with(0.0, std),
                rng.normal_with(0.0, std),
                rng.normal_with(0.0, std),
            ]
        } else {
            // Score a pool of uniform rotations at the fresh latent and
            // start from the best.
            tape.set_value(zid, Mat::from_vec(1, latent_dim, z0.clone()));
            let mut best_cand = ([0.0; 3], f64::INFINITY);
            for _ in 0..6 {
                let cand = [
                    rng.uniform_range(-std::f64::consts::PI, std::f64::consts::PI),
                    rng.uniform_range(-std::f64::consts::PI, std::f64::consts::PI),
                    rng.uniform_range(-std::f64::consts::PI, std::f64::consts::PI),
                ];
                tape.set_value(aid.unwrap(), Mat::from_vec(1, 3, cand.to_vec()));
                tape.replay();
                let loss = tape.value(total).get(0, 0);
                if loss < best_cand.1 {
                    best_cand = (cand, loss);
                }
            }
            best_cand.0
        };
        tape.set_value(zid, Mat::from_vec(1, latent_dim, z0));
        if let Some(a) = aid {
            tape.set_value(a, Mat::from_vec(1, 3, a0.to_vec()));
        }

        let n_tensors = if aid.is_some() { 2 } else { 1 };
        let mut adam = AdamState::new(
            &(0..n_tensors)
                .map(|i| if i == 0 { latent_dim } else { 3 })
                .collect::<Vec<_>>(),
            cfg.adam,
        );
        let mut restart_best = f64::INFINITY;
        for _iter in 0..cfg.iterations {
            tape.replay();
            let loss = tape.value(total).get(0, 0);
            if loss < restart_best {
                restart_best = loss;
            }
            let better = best.as_ref().map_or(true, |b| loss < b.loss);
            if better {
                let a = aid.map_or([0.0; 3], |id| {
                    [tape.entry(id, 0, 0), tape.entry(id, 0, 1), tape.entry(id, 0, 2)]
                });
                best = Some(FitResult {
                    z: tape.value(zid).data().to_vec(),
                    angles: a,
                    loss,
                    restart_losses: Vec::new(),
                });
            }
            tape.backward(total)?;
            let t = adam.begin_step();
            let gz = tape.grad(zid);
            let mut zcur = tape.value(zid).data().to_vec();
            adam.update_tensor(0, "fit.z", &mut zcur, gz.data(), cfg.lr, t)?;
            tape.set_value(zid, Mat::from_vec(1, latent_dim, zcur));
            if let Some(a) = aid {
                let ga = tape.grad(a);
                let mut acur = tape.value(a).data().to_vec();
                adam.update_tensor(1, "fit.angles", &mut acur, ga.data(), cfg.lr, t)?;
                tape.set_value(a, Mat::from_vec(1, 3, acur));
            }
        }
        // Final candidate after the last step.
        tape.replay();
        let loss = tape.value(total).get(0, 0);
        if loss < restart_best {
            restart_best = loss;
        }
        if best.as_ref().map_or(true, |b| loss < b.loss) {
            let a = aid.map_or([0.0; 3], |id| {
                [tape.entry(id, 0, 0), tape.entry(id, 0, 1), tape.entry(id, 0, 2)]
            });
            best = Some(FitResult {
                z: tape.value(zid).data().to_vec(),
                angles: a,
                loss,
                restart_losses: Vec::new(),
            });
        }
        restart_losses.push(restart_best);
    }
    let mut out = best.expect("at least one restart ran");
    out.restart_losses = restart_losses;
    Ok(out)
}

//! The conditional network `f(x, t, z)` and its rotation-aware variant
//! `f(Rᵀx, t, z)`.
//!
//! Wiring: the first layer consumes the concatenation of the (possibly
//! rotated) coordinates `(x, y, z, t)` and, when layer 1 is in the latent
//! injection set, the latent code. Every later hidden layer consumes the
//! previous activations plus the coordinates (when `coord_inject` is set)
//! plus the latent code at the layers listed in `latent_inject_layers`.
//! The output layer is linear to one scalar. In the rotation-aware variant
//! the rotated coordinates feed every injection point.

mod checkpoint;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, CheckpointError, OptimizerBlob, CHECKPOINT_MAGIC,
};

use crate::autodiff::{GraphError, NodeId, Tape};
use crate::mat::Mat;
use crate::rng::Stream;
use crate::rot::rotate_points_rows;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const COORD_DIM: usize = 4; // x, y, z, t

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sine,
    Relu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub latent_dim: usize,
    pub omega0: f64,
    pub activation: Activation,
    /// 1-based hidden layer indices that receive the latent code.
    pub latent_inject_layers: Vec<usize>,
    pub coord_inject: bool,
    pub equivariant: bool,
    /// Optional DeepSDF-style output clamp; off by default.
    pub clamp_delta: Option<f64>,
}

impl Default for ArchitectureSpec {
    fn default() -> Self {
        ArchitectureSpec {
            hidden_layers: 9,
            hidden_width: 128,
            latent_dim: 64,
            omega0: 30.0,
            activation: Activation::Sine,
            latent_inject_layers: vec![1, 5, 8],
            coord_inject: true,
            equivariant: false,
            clamp_delta: None,
        }
    }
}

impl ArchitectureSpec {
    /// The comparison baseline: 8 hidden ReLU layers, width 128, a 256-dim
    /// latent injected at the input and re-injected mid-network.
    pub fn relu_baseline() -> Self {
        ArchitectureSpec {
            hidden_layers: 8,
            hidden_width: 128,
            latent_dim: 256,
            omega0: 30.0,
            activation: Activation::Relu,
            latent_inject_layers: vec![1, 5],
            coord_inject: true,
            equivariant: false,
            clamp_delta: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden_layers == 0 || self.hidden_width == 0 {
            return Err(ModelError::InvalidArch(
                "hidden_layers and hidden_width must be positive".into(),
            ));
        }
        if self.activation == Activation::Sine && self.omega0 <= 0.0 {
            return Err(ModelError::InvalidArch("omega0 must be positive".into()));
        }
        for &k in &self.latent_inject_layers {
            if k == 0 || k > self.hidden_layers {
                return Err(ModelError::InvalidArch(format!(
                    "latent injection layer {k} outside 1..={}",
                    self.hidden_layers
                )));
            }
        }
        Ok(())
    }

    fn injects_at(&self, layer: usize) -> bool {
        self.latent_dim > 0 && self.latent_inject_layers.contains(&layer)
    }

    /// (c_in, c_out) for each weight layer, hidden layers first, then the
    /// output layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 1);
        for k in 1..=self.hidden_layers {
            let mut c_in = if k == 1 {
                COORD_DIM
            } else {
                self.hidden_width + if self.coord_inject { COORD_DIM } else { 0 }
            };
            if self.injects_at(k) {
                c_in += self.latent_dim;
            }
            dims.push((c_in, self.hidden_width));
        }
        dims.push((self.hidden_width, 1));
        dims
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("latent dimension mismatch: model expects {expected}, got {got}")]
    LatentDimMismatch { expected: usize, got: usize },
    #[error("sequence {0} is not registered in the model")]
    UnknownSequence(usize),
    #[error("rotation angles required by the rotation-aware model")]
    MissingAngles,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// One affine layer.
#[derive(Clone, Debug)]
pub struct Layer {
    /// `[c_out × c_in]`.
    pub w: Mat,
    pub b: Vec<f64>,
}

/// All trainable state: layer weights, per-sequence latent codes, and
/// per-sequence rotation angles when the architecture is rotation-aware.
#[derive(Clone, Debug)]
pub struct ModelState {
    pub arch: ArchitectureSpec,
    pub layers: Vec<Layer>,
    pub latents: Vec<Vec<f64>>,
    pub angles: Vec<[f64; 3]>,
    pub seq_names: Vec<String>,
    pub sigma2: f64,
    pub seed: u64,
}

impl ModelState {
    pub fn n_sequences(&self) -> usize {
        self.latents.len()
    }

    pub fn register_sequence(&mut self, name: &str, rng: &mut Stream) -> usize {
        self.latents
            .push((0..self.arch.latent_dim).map(|_| rng.normal_with(0.0, 0.01)).collect());
        if self.arch.equivariant {
            let std = std::f64::consts::PI / 8.0;
            self.angles.push([
                rng.normal_with(0.0, std),
                rng.normal_with(0.0, std),
                rng.normal_with(0.0, std),
            ]);
        }
        self.seq_names.push(name.to_string());
        self.latents.len() - 1
    }

    /// Plain forward evaluation (no gradients). Empty input gives an empty
    /// output.
    pub fn forward(
        &self,
        points: &[[f64; 3]],
        times: &[f64],
        z: &[f64],
        angles: Option<[f64; 3]>,
    ) -> Result<Vec<f64>, ModelError> {
        assert_eq!(points.len(), times.len());
        if z.len() != self.arch.latent_dim {
            return Err(ModelError::LatentDimMismatch {
                expected: self.arch.latent_dim,
                got: z.len(),
            });
        }
        if self.arch.equivariant && angles.is_none() {
            return Err(ModelError::MissingAngles);
        }
        if points.is_empty() {
            return Ok(Vec::new());
        }
        let b = points.len();
        let mut pts = Mat::zeros(b, 3);
        for (i, p) in points.iter().enumerate() {
            pts.row_mut(i).copy_from_slice(p);
        }
        let rotated = if self.arch.equivariant {
            rotate_points_rows(&pts, angles.unwrap())
        } else {
            pts
        };
        let mut coords = Mat::zeros(b, COORD_DIM);
        for i in 0..b {
            let row = coords.row_mut(i);
            row[..3].copy_from_slice(rotated.row(i));
            row[3] = times[i];
        }

        let mut h = Mat::zeros(0, 0);
        for k in 1..=self.arch.hidden_layers {
            let input = if k == 1 {
                if self.arch.injects_at(1) {
                    concat_cols(&[&coords, &broadcast(z, b)])
                } else {
                    coords.clone()
                }
            } else {
                let mut parts: Vec<&Mat> = vec![&h];
                let zb;
                if self.arch.coord_inject {
                    parts.push(&coords);
                }
                if self.arch.injects_at(k) {
                    zb = broadcast(z, b);
                    parts.push(&zb);
                    concat_cols(&parts)
                } else {
                    concat_cols(&parts)
                }
            };
            let layer = &self.layers[k - 1];
            let mut lin = input.matmul_nt(&layer.w);
            lin.add_bias_rows(&layer.b);
            h = match self.arch.activation {
                Activation::Sine => lin.map(|v| (self.arch.omega0 * v).sin()),
                Activation::Relu => lin.map(|v| v.max(0.0)),
            };
        }
        let out_layer = self.layers.last().unwrap();
        let mut out = h.matmul_nt(&out_layer.w);
        out.add_bias_rows(&out_layer.b);
        let mut values = out.data().to_vec();
        if let Some(delta) = self.arch.clamp_delta {
            for v in values.iter_mut() {
                *v = v.clamp(-delta, delta);
            }
        }
        Ok(values)
    }

    /// Inference-only forward pass.
    ///
    /// Identical math to [`ModelState::forward`] with the latent
    /// contribution folded into per-layer bias vectors and no intermediate
    /// concatenation buffers, which makes dense grid sweeps several times
    /// faster. Values agree with `forward` up to f64 rounding (the
    /// reductions are split differently) and are deterministic.
    pub fn forward_fast(
        &self,
        points: &[[f64; 3]],
        times: &[f64],
        z: &[f64],
        angles: Option<[f64; 3]>,
    ) -> Result<Vec<f64>, ModelError> {
        assert_eq!(points.len(), times.len());
        if z.len() != self.arch.latent_dim {
            return Err(ModelError::LatentDimMismatch {
                expected: self.arch.latent_dim,
                got: z.len(),
            });
        }
        if self.arch.equivariant && angles.is_none() {
            return Err(ModelError::MissingAngles);
        }
        let b = points.len();
        if b == 0 {
            return Ok(Vec::new());
        }
        let width = self.arch.hidden_width;
        // Per-layer bias with the constant latent part folded in.
        let zb: Vec<Vec<f64>> = (1..=self.arch.hidden_layers)
            .map(|k| {
                let layer = &self.layers[k - 1];
                let c_in = layer.w.cols();
                if self.arch.injects_at(k) {
                    let zoff = c_in - self.arch.latent_dim;
                    (0..layer.w.rows())
                        .map(|j| layer.b[j] + crate::mat::dot(&layer.w.row(j)[zoff..], z))
                        .collect()
                } else {
                    layer.b.clone()
                }
            })
            .collect();

        let rot = angles.map(crate::rot::euler_to_matrix);
        let mut coords = vec![[0.0f64; 4]; b];
        for (i, (p, t)) in points.iter().zip(times).enumerate() {
            let q = match &rot {
                // Row convention: x ↦ Rᵀx.
                Some(r) => crate::rot::mat3_apply(&crate::rot::mat3_transpose(r), *p),
                None => *p,
            };
            coords[i] = [q[0], q[1], q[2], *t];
        }

        let act = |v: f64| match self.arch.activation {
            Activation::Sine => (self.arch.omega0 * v).sin(),
            Activation::Relu => v.max(0.0),
        };
        // Layer 1: coords (and folded latent) only.
        use rayon::prelude::*;
        let row_chunk = 4096usize;
        let mut h = Mat::zeros(b, width);
        {
            let layer = &self.layers[0];
            let zb0 = &zb[0];
            h.data_mut()
                .par_chunks_mut(width * row_chunk)
                .enumerate()
                .for_each(|(blk, chunk)| {
                    for (r, orow) in chunk.chunks_mut(width).enumerate() {
                        let c = &coords[blk * row_chunk + r];
                        for (j, o) in orow.iter_mut().enumerate() {
                            let w = layer.w.row(j);
                            let lin =
                                c[0] * w[0] + c[1] * w[1] + c[2] * w[2] + c[3] * w[3] + zb0[j];
                            *o = act(lin);
                        }
                    }
                });
        }
        for k in 2..=self.arch.hidden_layers {
            let layer = &self.layers[k - 1];
            // Hidden-to-hidden block once through the fast matmul; the four
            // coordinate columns and folded bias are added per element.
            let mut w_h = Mat::zeros(width, width);
            for j in 0..width {
                w_h.row_mut(j).copy_from_slice(&layer.w.row(j)[..width]);
            }
            let mut lin = h.matmul_nt(&w_h);
            let zbk = &zb[k - 1];
            let coord_inject = self.arch.coord_inject;
            lin.data_mut()
                .par_chunks_mut(width * row_chunk)
                .enumerate()
                .for_each(|(blk, chunk)| {
                    for (r, orow) in chunk.chunks_mut(width).enumerate() {
                        let c = coords[blk * row_chunk + r];
                        for (j, o) in orow.iter_mut().enumerate() {
                            let mut v = *o + zbk[j];
                            if coord_inject {
                                let w = layer.w.row(j);
                                v += c[0] * w[width]
                                    + c[1] * w[width + 1]
                                    + c[2] * w[width + 2]
                                    + c[3] * w[width + 3];
                            }
                            *o = act(v);
                        }
                    }
                });
            h = lin;
        }
        let out_layer = self.layers.last().unwrap();
        let wout = out_layer.w.row(0);
        let bout = out_layer.b[0];
        let clamp = self.arch.clamp_delta;
        let mut values = vec![0.0f64; b];
        values
            .par_chunks_mut(row_chunk)
            .enumerate()
            .for_each(|(blk, chunk)| {
                for (r, o) in chunk.iter_mut().enumerate() {
                    let i = blk * row_chunk + r;
                    let v = crate::mat::dot(&h.data()[i * width..(i + 1) * width], wout) + bout;
                    *o = match clamp {
                        Some(delta) => v.clamp(-delta, delta),
                        None => v,
                    };
                }
            });
        Ok(values)
    }

    /// Number of (x, t) tuples outside Ω × τ; callers may want to warn.
    pub fn domain_violations(points: &[[f64; 3]], times: &[f64]) -> usize {
        points
            .iter()
            .zip(times)
            .filter(|(p, t)| {
                p.iter().any(|c| !(-1.0..=1.0).contains(c)) || !(-1.0..=1.0).contains(*t)
            })
            .count()
    }
}

fn broadcast(z: &[f64], rows: usize) -> Mat {
    let mut m = Mat::zeros(rows, z.len());
    for i in 0..rows {
        m.row_mut(i).copy_from_slice(z);
    }
    m
}

fn concat_cols(parts: &[&Mat]) -> Mat {
    let rows = parts[0].rows();
    let cols = parts.iter().map(|p| p.cols()).sum();
    let mut out = Mat::zeros(rows, cols);
    for i in 0..rows {
        let orow = out.row_mut(i);
        let mut off = 0;
        for p in parts {
            let prow = p.row(i);
            orow[off..off + prow.len()].copy_from_slice(prow);
            off += prow.len();
        }
    }
    out
}

/// Handles to the leaf nodes of a tape-built forward pass.
pub struct TapeForward {
    pub weight_ids: Vec<(NodeId, NodeId)>,
    pub pred: NodeId,
}

/// Builds the forward pass on a tape with the given leaf nodes for the
/// latent code and angles. `weight_ids` must hold one (W, b) leaf pair per
/// layer, matching `arch.layer_dims()`.
pub fn build_tape_forward(
    tape: &mut Tape,
    arch: &ArchitectureSpec,
    weight_ids: &[(NodeId, NodeId)],
    points: NodeId,
    times: NodeId,
    z: Option<NodeId>,
    angles: Option<NodeId>,
) -> Result<NodeId, ModelError> {
    let b = tape.value(points).rows();
    let rotated = match (arch.equivariant, angles) {
        (true, Some(a)) => tape.rotate3(points, a)?,
        (true, None) => return Err(ModelError::MissingAngles),
        (false, _) => points,
    };
    let coords = tape.concat(&[rotated, times])?;
    let zb = match z {
        Some(zid) if arch.latent_dim > 0 => Some(tape.broadcast_rows(zid, b)?),
        _ => None,
    };

    let mut h = coords;
    for k in 1..=arch.hidden_layers {
        let input = if k == 1 {
            match zb {
                Some(zn) if arch.injects_at(1) => tape.concat(&[coords, zn])?,
                _ => coords,
            }
        } else {
            let mut parts = vec![h];
            if arch.coord_inject {
                parts.push(coords);
            }
            if let Some(zn) = zb {
                if arch.injects_at(k) {
                    parts.push(zn);
                }
            }
            tape.concat(&parts)?
        };
        let (w, bias) = weight_ids[k - 1];
        let lin = tape.linear(input, w, bias)?;
        h = match arch.activation {
            Activation::Sine => tape.sine(lin, arch.omega0),
            Activation::Relu => tape.relu(lin),
        };
    }
    let (w, bias) = weight_ids[arch.hidden_layers];
    Ok(tape.linear(h, w, bias)?)
}

/// Initializes weights, per-sequence latent codes, and (for the
/// rotation-aware variant) per-sequence angles.
///
/// Sine layers after the first draw from `U(±√(6/(ω₀²·c_in)))`, the first
/// layer from `U(±1/c_in)`; the ReLU variant uses Kaiming-uniform
/// `U(±√(6/c_in))` everywhere. Latents draw from `N(0, 0.01²)` and angles
/// from `N(0, π²/64)`. Biases start at zero.
pub fn init_model(
    arch: &ArchitectureSpec,
    n_sequences: usize,
    sigma2: f64,
    rng: &mut Stream,
) -> Result<ModelState, ModelError> {
    arch.validate()?;
    let mut layers = Vec::new();
    for (idx, (c_in, c_out)) in arch.layer_dims().into_iter().enumerate() {
        let bound = match arch.activation {
            Activation::Sine => {
                if idx == 0 {
                    1.0 / c_in as f64
                } else {
                    (6.0 / (arch.omega0 * arch.omega0 * c_in as f64)).sqrt()
                }
            }
            Activation::Relu => (6.0 / c_in as f64).sqrt(),
        };
        let mut w = Mat::zeros(c_out, c_in);
        for v in w.data_mut() {
            *v = rng.uniform_range(-bound, bound);
        }
        layers.push(Layer {
            w,
            b: vec![0.0; c_out],
        });
    }
    let mut state = ModelState {
        arch: arch.clone(),
        layers,
        latents: Vec::new(),
        angles: Vec::new(),
        seq_names: Vec::new(),
        sigma2,
        seed: rng.lineage.0,
    };
    for i in 0..n_sequences {
        state.register_sequence(&format!("seq_{i:03}"), rng);
    }
    Ok(state)
}

/// Exact count of scalars (weights + biases) implied by the wiring.
pub fn count_parameters(arch: &ArchitectureSpec) -> usize {
    arch.layer_dims()
        .into_iter()
        .map(|(c_in, c_out)| c_in * c_out + c_out)
        .sum()
}

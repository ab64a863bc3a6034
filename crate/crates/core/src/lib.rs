//! Rotation-disentangled implicit neural representations of time-evolving
//! 3D shapes.
//!
//! The library learns a signed distance field `f(x, y, z, t)` for a set of
//! shape sequences from voxel masks. A fully connected network with sine
//! activations is conditioned on a per-sequence latent code and, optionally,
//! a per-sequence rotation so that rotated copies of a shape share one
//! latent code. Trained models reconstruct, synthesize, and interpolate
//! shape sequences; meshes and binary volumes are extracted for evaluation.
//!
//! Modules follow the processing pipeline:
//!
//! * [`sdfdata`] — voxel ingest, centering/alignment, exact Euclidean
//!   distance transforms, domain normalization, and training-batch sampling
//! * [`autodiff`] — tape-based reverse-mode differentiation for the small
//!   fixed set of operations the network needs
//! * [`model`] — network assembly, initialization, and checkpoints
//! * [`train`] — joint Adam optimization of weights, latent codes, and
//!   rotation angles; latent fitting for new sequences
//! * [`infer`] — chunked grid evaluation, latent sampling, marching cubes,
//!   voxelization, and mesh/volume export
//! * [`eval`] — Dice coefficients, shape descriptors, Kolmogorov-Smirnov
//!   tests, and latent-space PCA
//! * [`experiments`] — scripted studies on analytic fixtures

pub mod autodiff;
pub mod eval;
pub mod experiments;
pub mod infer;
pub mod mat;
pub mod model;
pub mod rng;
pub mod rot;
pub mod sdfdata;
pub mod train;

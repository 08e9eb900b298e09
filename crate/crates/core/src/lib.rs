//! Desk-scale brain captioning pipeline on a synthetic brain-image-caption world.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`data`]: synthetic world generation, dataset format, voxel alignment,
//!   patching, trial averaging, standardization, and noise injection.
//! - [`bed`]: self-supervised masked-patch pretraining of the brain encoder.
//! - [`blm`]: the end-to-end brain-language model — a small causal LM, a
//!   query transformer aligned to it, and the fMRI projector trained to feed
//!   brain activity into the frozen stack.
//! - [`metrics`]: caption metrics (ROUGE-L, CIDEr, METEOR-lite, embedding
//!   similarity) and image metrics (PixCorr, SSIM, two-way identification)
//!   implemented from scratch.
//! - [`recon`]: ridge mapping to a visual latent, sketch decoding, and
//!   caption-conditioned diffusion reconstruction.
//! - [`harness`]: experiment configuration, staged pipeline orchestration
//!   with digest-based skipping, noise sweeps, ablations, and reports.
//!
//! All computation is `f64` and deterministic: parallel code paths reduce in
//! a fixed order, so results are bit-identical with and without the
//! `parallel` feature and across thread counts.

pub mod error;
pub mod util;
pub mod nn;
pub mod data;
pub mod bed;
pub mod blm;
pub mod metrics;
pub mod recon;
pub mod harness;

pub use error::{Error, Result};

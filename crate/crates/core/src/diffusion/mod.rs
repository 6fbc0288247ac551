//! Desk-scale conditional diffusion core.
//!
//! A per-frame denoiser is conditioned on the timestamp matrix by channel
//! concatenation and on a pooled event embedding by feature-wise affine
//! modulation. The audio side is an analytic band-energy codec, so the
//! latent channels line up one-to-one with the detector's class bands.

mod codec;
mod model;
mod sample;
mod schedule;
mod train;

pub use codec::{align_to_frames, toy_decode, toy_encode, LatentSequence};
pub use model::{Denoiser, DenoiserConfig, Gradients};
pub use sample::{sample, SampleConfig};
pub use schedule::{forward_marginal, make_schedule, reverse_step, NoiseSchedule};
pub use train::{encode_dataset, train, EpochLog, TrainConfig, TrainItem};

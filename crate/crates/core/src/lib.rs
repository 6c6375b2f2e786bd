//! Visual episodic memory for exploration: a ConvLSTM sequence autoencoder
//! whose SSIM reconstruction score discounts frontier costs in a simulated
//! multi-room world.

pub mod error;
pub mod nn;

pub use error::{Error, Result};
pub mod baselines;
pub mod harness;
pub mod mapping;
pub mod memory;
pub mod ssim;
pub mod world;

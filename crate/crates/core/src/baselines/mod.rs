//! Comparison conditions beyond plain frontier exploration.

pub mod vae;

pub use vae::{
    vae_curiosity_bonus, vae_forward, vae_loss, window_bonus, VaeLoss, VaeModel, VaeOutput,
    DEFAULT_LATENT,
};

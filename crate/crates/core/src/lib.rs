//! Latent patch quantum GAN.
//!
//! A convolutional autoencoder compresses 28x28 digits into a row-stochastic
//! 5x8 latent matrix; a bank of small parameterized circuits with ancilla
//! post-selection learns to generate such matrices adversarially; the decoder
//! maps generated latents back to images. Everything is simulated exactly.

pub mod dataio;
pub mod error;
pub mod eval;
pub mod generator;
pub mod latent;
pub mod models;
pub mod nn;
pub mod qsim;
pub mod training;

pub use error::{Error, Result};
pub use latent::LatentMatrix;

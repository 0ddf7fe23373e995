//! Personality-conditioned GAN for eye-tracking time series.
//!
//! The crate covers the whole pipeline: a small reverse-mode tensor core
//! ([`numerics`]), recording ingestion and windowing ([`dataio`]), the
//! blink autoencoder bridge ([`blinkcodec`]), the conditional GAN
//! ([`cgan`]), evaluation metrics ([`eval`]) and animation export
//! ([`anim`]).

pub mod anim;
pub mod blinkcodec;
pub mod cgan;
pub mod checkpoint;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod numerics;
pub mod synthetic;

pub use error::{Error, Result};

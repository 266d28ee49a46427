//! Side-informed spread-spectrum watermarking.
//!
//! The host signal is projected onto an `n`-dimensional subspace with
//! pseudo-random ±1 carriers. In that subspace a structured dirty-paper
//! codebook (a punctured rate-1/2 convolutional code whose message bits are
//! forced in the trellis while index bits stay free) selects the codeword
//! closest to the host, and the watermark is chosen on the sphere of radius
//! `sqrt(nP)` to sit as deep as possible inside the codeword's robustness
//! cone. Power is allocated per coefficient by a min-max game against a
//! scaling-plus-noise attacker.
//!
//! Inter-symbol interference caused by non-orthogonal carriers can be
//! removed at the decoder ([`watermarker::extract_isi_cancel`]) or folded
//! into the side information at the embedder ([`watermarker::embed_informed`]).
//!
//! Module map:
//! - [`conv_trellis`]: encoder, puncturing, constrained soft Viterbi
//! - [`dp_codebook`]: codebook sizing, sub-codebook and full-codebook search
//! - [`spread`]: carriers, spread transforms, subspace energies, β weights
//! - [`optimizer`]: capacities, best responses, distortion budgets
//! - [`watermarker`]: max-robustness watermark, embedding and extraction loops
//! - [`channel`]: AWGN, SAWGN, game-optimal attack, JPEG surrogate
//! - [`media`]: Haar DWT, host model, perceptual weights, PGM I/O, metrics
//! - [`bench`]: synthetic hosts and attack sweeps

pub mod bench;
pub mod channel;
pub mod conv_trellis;
pub mod dp_codebook;
pub mod error;
pub mod media;
pub mod optimizer;
pub mod spread;
pub mod watermarker;

pub use error::{Error, Result};

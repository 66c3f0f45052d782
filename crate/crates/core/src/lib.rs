//! Numerical engine for KAM normal-form iterations on finite truncations of
//! infinite-dimensional Hamiltonians whose normal frequencies obey the weak
//! growth law Omega_i = |i|^d + o(|i|^d) + o(|i|^delta) with d > 0.
//!
//! The crate provides the sparse Taylor-Fourier algebra, divisor
//! classification with the modified Diophantine condition, a fully audited
//! KAM step (cutoffs, truncation, homological equation, Lie transform,
//! hypothesis checks), the iteration driver with its schedules, empirical
//! resonance-measure estimation over sampled parameter boxes, and front-ends
//! building the Hamiltonians of nonlinear Schroedinger and Klein-Gordon
//! models in KAM-ready coordinates.

pub mod config;
pub mod error;
pub mod iterate;
pub mod kamstep;
pub mod measure;
pub mod numerics;
pub mod pde;
pub mod series;
pub mod spectra;

pub use error::{KamError, Result};

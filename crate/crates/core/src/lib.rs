//! Co-readership analysis of scholarly usage logs.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`logstore`] parses access events and collapses them into per-user
//!    read profiles restricted to a journal set.
//! 2. [`population`] keeps users whose monthly read rate falls in a band and
//!    ranks them into a sample.
//! 3. [`coread`] builds the co-read matrix `R` (papers two users have in
//!    common) and its row-normalized form `N`.
//! 4. [`spectra`] computes the spectrum of `N` through its symmetric twin
//!    `D^-1/2 R D^-1/2`, the spectral density, the separation statistic and
//!    the scaling of the leading eigenvalue with sample size.
//! 5. [`communities`] projects users onto the leading eigenvectors and
//!    turns sphere neighborhoods back into cited-paper lists.
//!
//! [`synth`] generates logs from a preferential-attachment readership model
//! for testing every stage without private data.
//!
//! Data-parallel loops go through [`Exec`]; disabling the default
//! `parallel` feature makes every mode sequential.

pub mod communities;
pub mod coread;
pub mod exec;
pub mod lanczos;
pub mod logstore;
pub mod matrix;
pub mod pipeline;
pub mod population;
pub mod spectra;
pub mod synth;

pub use exec::Exec;
pub use matrix::DenseMatrix;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("log ingestion: {0}")]
    Log(#[from] logstore::LogError),
    #[error("population: {0}")]
    Population(#[from] population::PopulationError),
    #[error("co-read matrices: {0}")]
    Coread(#[from] coread::CoreadError),
    #[error("spectra: {0}")]
    Spectra(#[from] spectra::SpectraError),
    #[error("communities: {0}")]
    Communities(#[from] communities::CommunityError),
    #[error("synthesis: {0}")]
    Synth(#[from] synth::SynthError),
}

//! k-means as a quantizer and as a classifier.
//!
//! Lloyd's algorithm and k-means++ seeding, exact brute-force oracles for
//! tiny instances, margin and clusterability diagnostics, classification
//! risks, synthetic laws with known optima, and a seeded experiment harness
//! for convergence-rate studies.

pub mod classification;
pub mod data;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod lloyd;
pub mod margin;
pub mod normal;
pub mod oracle;
pub mod quantization;
pub mod rng;

pub use data::{assign, partition, Assignment, Codebook, Dataset};
pub use error::{Error, Result};

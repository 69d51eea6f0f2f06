//! Privacy-preserving traffic-count estimation for routing services.
//!
//! Vehicles jointly compute noisy per-road traffic counts with secret-sharing
//! MPC so that no participant learns another's location and the published
//! counts are differentially private. Counts are turned into travel times
//! through BPR delay functions, and a discrete-time simulator compares
//! routing on private estimates against routing on ground truth.

pub mod cli;
pub mod field;
pub mod laplace;
pub mod protocol;
pub mod roadnet;
pub mod sharing;
pub mod sim;
pub mod tntp;

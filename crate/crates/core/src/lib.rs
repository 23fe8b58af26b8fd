//! LiDAR-inertial odometry built on an incremental k-d tree map.
//!
//! - [`ikd_tree`]: the incremental spatial index.
//! - [`manifold`]: the navigation state, its retraction and IMU propagation.
//! - [`lio`]: scan registration, the iterated Kalman update and the per-scan loop.
//! - [`synth`]: deterministic synthetic worlds, trajectories and sensor data.
//! - [`bench`]: timing harness, baselines and accuracy metrics.
//! - [`config`]: the TOML run configuration.

pub mod geometry;
pub mod ikd_tree;
pub mod manifold;
pub mod lio;
pub mod bench;
pub mod config;
pub mod synth;

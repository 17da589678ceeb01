//! Photon-stream simulation: trajectories, detectors and tag files.

mod rng;

pub mod campaign;
pub mod detector;
pub mod tags;
pub mod trajectory;

pub use campaign::{accelerated, mean_signal_rate, run_campaign, run_separation, simulate_fringe, simulate_position, SimulatedPosition};
pub use detector::detect;
pub use rng::{stream_rng, Domain};
pub use tags::{sidecar_path, StreamMetadata, TimeTagStream};
pub use trajectory::{run_trajectory, EmissionRecord, PhaseNoise, TrajectoryRunSpec, Unraveling};

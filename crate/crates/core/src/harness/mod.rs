//! Experiments, calibration, statistics and the session service.

pub mod calibrate;
pub mod episode;
pub mod experiment;
pub mod session;
pub mod stats;

pub use calibrate::{calibrate, calibrate_initial_xb, measure, part_accuracy, CalibrationReport, CalibrationSettings, Quality};
pub use episode::{episode_scene, run_episode, search_seed, EpisodeRecord};
pub use experiment::{run_experiment, run_single, ExperimentConfig, ExperimentResult, ExperimentSummary, PairTest, RegretCurve, RunResult};
pub use session::{serve, serve_on, RegionSchematic, SceneSchematic, Session, SessionService, TruckSchematic};

//! Experiment orchestration: corpora, baseline training, trials and metrics.

pub mod corpus;

pub use corpus::{
    ground_truth_grid, room_tour_frames, room_tour_frames_for, tour_frames, Corpus, WindowSet,
    HELD_OUT_WINDOWS,
};
pub mod config;
pub mod trial;

pub use config::{Condition, ExperimentConfig};
pub use trial::{
    interior_rooms, run_trial, run_trial_detailed, trial_seed, RoomEntry, TickRow, TrialRecord,
    TrialRun, TrialSetup, WindowScore,
};
pub mod experiment;

pub use experiment::{
    run_experiment, run_with_setup, two_proportion_z, ExperimentResult, MetricsTable,
    ProportionTest, Summary,
};
pub mod export;

pub use export::export_csv;
pub mod forgetting;

pub use forgetting::{
    analyze_forgetting, room_visits, ForgettingCriteria, ForgettingSequence, ForgettingSummary,
    RoomVisit,
};
pub mod baseline;

pub use baseline::{train_baseline, ModelKind, TrainOptions, TrainReport};
pub mod eval;

pub use eval::{evaluate_rooms, RoomEvaluation, RoomScores};

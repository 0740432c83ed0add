//! End-to-end orchestration: smoothing, aggregation, projection, clustering
//! and scoring of manifest sessions, plus one-axis sweeps.

mod config;
mod pretrain;
mod profiles;
mod run;
mod sweep;

pub use config::{Algorithm, InitMethod, PipelineConfig};
pub use pretrain::{pretrain_on_manifest, write_pretrained, Skipped};
pub use profiles::profiles_from_session;
pub use run::{
    dec_features, load_session, prepare_session, run_pipeline, run_session, score_rttm, session_dir,
    standardize_global, write_session_outputs,
    AggregateScore, PipelineReport, SessionInput, SessionOutcome, SessionResult,
};
pub use sweep::{run_sweep, SweepAxis, SweepReport};

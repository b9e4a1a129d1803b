//! The iterative design loop: compose generation requests from a decoded
//! command, collect ratings, pick the next base image, and record every step
//! in a replayable event log.

pub mod corpus;
pub mod driver;
pub mod engine;
pub mod gateway;
pub mod log;
pub mod store;
pub mod types;

pub use corpus::{compose_requests, round_seed, PromptCorpus, PERTURBED_PER_ROUND};
pub use driver::{generate_with_limit, play_round, Recorder};
pub use engine::{
    session_report, DesignSession, FinalMark, Round, RoundOutcome, RoundSatisfaction, SatisfactionTrace,
    SessionConfig, SessionError, SessionEvent, SessionStatus, CANDIDATES_PER_ROUND, MAX_RATING, MIN_RATING,
};
pub use log::{replay_log, SessionLog};
pub use store::ArtifactStore;
pub use types::{
    CandidateImage, Constraints, FailureKind, GenerationRequest, GenerationResult, GenerationStatus, ImageRef,
    Provenance,
};

//! Anonymized speaker database.
//!
//! Each local speaker of a session arrives as a set of embedded segments. The
//! segment embeddings are averaged and renormalized, scored by cosine against
//! every enrolled centroid, and either merged into the best match (when the
//! score reaches the threshold) or enrolled under a fresh random id.
//!
//! The database persists as an append-only JSON-lines enrollment log;
//! replaying the log rebuilds the same snapshot bit for bit.

mod db;
mod embedding;

use thiserror::Error;

pub use db::{
    cap_eligible, EnrolledSpeaker, EnrollmentEvent, EnrollmentOutcome, MatchDecision,
    SessionEnrollment, SharedSpeakerDb, SpeakerDb, SpeakerDbSnapshot,
};
pub use embedding::{score, SpeakerEmbedding, DEFAULT_DIMENSION};

pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.7;

#[derive(Debug, Error)]
pub enum SpeakerError {
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("embedding is not unit norm (norm {0})")]
    NotUnitNorm(f64),
    #[error("embedding has zero norm")]
    ZeroVector,
    #[error("no segments to enroll")]
    EmptySegments,
    #[error("segment duration must be positive and finite, got {0}")]
    BadDuration(f64),
    #[error("enrollment log: {0}")]
    Log(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

use serde::{Deserialize, Serialize};

use super::SpeakerError;

pub const DEFAULT_DIMENSION: usize = 192;

const UNIT_TOLERANCE: f64 = 1e-9;

/// Unit-norm speaker embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpeakerEmbedding(Vec<f64>);

impl SpeakerEmbedding {
    /// Wraps a vector that must already be unit norm.
    pub fn new(vector: Vec<f64>) -> Result<Self, SpeakerError> {
        let norm = l2(&vector);
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(SpeakerError::NotUnitNorm(norm));
        }
        Ok(SpeakerEmbedding(vector))
    }

    /// Scales an arbitrary nonzero vector to unit norm.
    pub fn normalize(mut vector: Vec<f64>) -> Result<Self, SpeakerError> {
        let norm = l2(&vector);
        if !norm.is_finite() || norm <= 0.0 {
            return Err(SpeakerError::ZeroVector);
        }
        vector.iter_mut().for_each(|x| *x /= norm);
        Ok(SpeakerEmbedding(vector))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for SpeakerEmbedding {
    type Error = SpeakerError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        SpeakerEmbedding::new(v)
    }
}

impl From<SpeakerEmbedding> for Vec<f64> {
    fn from(e: SpeakerEmbedding) -> Self {
        e.0
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity of two unit vectors, clamped to [-1, 1].
pub fn score(a: &SpeakerEmbedding, b: &SpeakerEmbedding) -> Result<f64, SpeakerError> {
    if a.dim() != b.dim() {
        return Err(SpeakerError::DimensionMismatch(a.dim(), b.dim()));
    }
    let dot: f64 = a.0.iter().zip(b.0.iter()).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

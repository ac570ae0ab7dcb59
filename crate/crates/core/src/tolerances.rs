use serde::{Deserialize, Serialize};

/// Numerical thresholds used across the pipeline.
///
/// Rank decisions are relative to the largest singular value involved.
/// Residual thresholds form a ladder: values at or below `identity_pass`
/// count as zero, values at or above `detector` count as nonzero, anything
/// in between is reported as inconclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rank_tol: f64,
    pub nullity_tol: f64,
    pub class_tol: f64,
    pub frame_tol: f64,
    pub identity_pass: f64,
    pub detector: f64,
    pub iso_tol: f64,
    pub congruence_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_tol: 1e-8,
            nullity_tol: 1e-8,
            class_tol: 1e-6,
            frame_tol: 1e-6,
            identity_pass: 1e-5,
            detector: 1e-3,
            iso_tol: 1e-7,
            congruence_tol: 1e-6,
        }
    }
}

impl Tolerances {
    /// Every threshold multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Tolerances {
            rank_tol: self.rank_tol * factor,
            nullity_tol: self.nullity_tol * factor,
            class_tol: self.class_tol * factor,
            frame_tol: self.frame_tol * factor,
            identity_pass: self.identity_pass * factor,
            detector: self.detector * factor,
            iso_tol: self.iso_tol * factor,
            congruence_tol: self.congruence_tol * factor,
        }
    }

    /// Three-way reading of a detector residual.
    pub fn detect(&self, residual: f64) -> Detection {
        if !residual.is_finite() {
            Detection::Inconclusive
        } else if residual <= self.identity_pass {
            Detection::Vanishing
        } else if residual >= self.detector {
            Detection::Nonvanishing
        } else {
            Detection::Inconclusive
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    Vanishing,
    Inconclusive,
    Nonvanishing,
}

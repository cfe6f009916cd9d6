//! Caption hypotheses and the candidate generation plan.
//!
//! A base caption `C0` is expanded by an external language model into two
//! alternative captions. Every caption is sent to an external text-to-audio
//! generator a fixed number of times with distinct seeds; the resulting audio
//! embeddings form the candidate set of a scene.

mod generator;
mod plan;
mod prompts;

pub use generator::{
    submit_generation, ArtifactRef, AudioGenerator, GenerationFailure, GenerationRequest,
    resolve_artifact, FailedEntry, ReplayGenerator, GENERATOR_URL_ENV,
};
#[cfg(feature = "http")]
pub use generator::HttpGenerator;
pub use plan::{build_candidate_plan, build_plan_for_count, generation_seed, CandidatePlan, PlanEntry};
pub use prompts::{
    build_expansion_prompt, format_hypotheses, parse_hypotheses, PromptKind, CONTROL_TEMPLATE,
    OURS_TEMPLATE,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisMode {
    Ours,
    Control,
    /// Base caption only.
    Basic,
}

impl std::str::FromStr for HypothesisMode {
    type Err = HypothesisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ours" => Ok(Self::Ours),
            "control" => Ok(Self::Control),
            "basic" => Ok(Self::Basic),
            other => Err(HypothesisError::InvalidSet(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisSet {
    pub c0: String,
    pub expansions: Vec<String>,
    pub mode: HypothesisMode,
}

impl HypothesisSet {
    pub fn new(
        c0: impl Into<String>,
        expansions: Vec<String>,
        mode: HypothesisMode,
    ) -> Result<Self, HypothesisError> {
        let c0 = c0.into();
        if c0.trim().is_empty() {
            return Err(HypothesisError::EmptyCaption);
        }
        match mode {
            HypothesisMode::Basic if !expansions.is_empty() => {
                return Err(HypothesisError::InvalidSet(
                    "basic mode takes no expansions".into(),
                ))
            }
            HypothesisMode::Ours | HypothesisMode::Control
                if expansions.len() != 2 || expansions.iter().any(|e| e.trim().is_empty()) =>
            {
                return Err(HypothesisError::InvalidSet(
                    "expected exactly two non-empty expansions".into(),
                ))
            }
            _ => {}
        }
        Ok(Self {
            c0,
            expansions,
            mode,
        })
    }

    pub fn basic(c0: impl Into<String>) -> Result<Self, HypothesisError> {
        Self::new(c0, Vec::new(), HypothesisMode::Basic)
    }

    /// Captions in hypothesis-index order: `C0`, then the expansions.
    pub fn captions(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.c0.as_str()).chain(self.expansions.iter().map(String::as_str))
    }

    pub fn len(&self) -> usize {
        1 + self.expansions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HypothesisError {
    #[error("base caption is empty")]
    EmptyCaption,
    #[error("malformed model response: {0}")]
    MalformedResponse(String),
    #[error("invalid hypothesis set: {0}")]
    InvalidSet(String),
    #[error("generator unavailable: {0}")]
    GeneratorUnavailable(String),
    #[error("{} of {total} generation requests failed: {}", failed.len(), failed.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; "))]
    PartialFailure {
        total: usize,
        failed: Vec<FailedEntry>,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_validation() {
        assert!(HypothesisSet::basic("a park").unwrap().expansions.is_empty());
        assert!(HypothesisSet::new("a park", vec!["x".into()], HypothesisMode::Ours).is_err());
        assert!(HypothesisSet::new("a park", vec!["x".into()], HypothesisMode::Basic).is_err());
        assert!(
            HypothesisSet::new("a park", vec!["x".into(), " ".into()], HypothesisMode::Control)
                .is_err()
        );
        let s = HypothesisSet::new("a", vec!["b".into(), "c".into()], HypothesisMode::Ours).unwrap();
        assert_eq!(s.captions().collect::<Vec<_>>(), ["a", "b", "c"]);
        assert_eq!("control".parse::<HypothesisMode>().unwrap(), HypothesisMode::Control);
        assert!("loud".parse::<HypothesisMode>().is_err());
    }
}

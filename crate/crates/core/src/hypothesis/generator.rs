//! Clients for the external text-to-audio generator.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::plan::{CandidatePlan, PlanEntry};
use super::HypothesisError;

/// Endpoint of the live generator service.
pub const GENERATOR_URL_ENV: &str = "GEO2SOUND_GENERATOR_URL";

/// Body of one generation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt_text: String,
    pub seed: u64,
    pub duration_s: f64,
    pub scene_id: String,
    pub hypothesis_index: usize,
    pub sample_index: usize,
}

impl GenerationRequest {
    pub fn new(scene_id: &str, e: &PlanEntry) -> Self {
        Self {
            prompt_text: e.prompt_text.clone(),
            seed: e.generation_seed,
            duration_s: 10.0,
            scene_id: scene_id.to_string(),
            hypothesis_index: e.hypothesis_index,
            sample_index: e.sample_index,
        }
    }
}

/// Where the embedding of one generated clip ended up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub hypothesis_index: usize,
    pub sample_index: usize,
    pub embedding_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GenerationFailure {
    /// The backend could not be reached at all.
    Unavailable(String),
    /// The backend answered but this entry failed.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailedEntry {
    pub hypothesis_index: usize,
    pub sample_index: usize,
    pub reason: String,
}

impl fmt::Display for FailedEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "h{} s{}: {}",
            self.hypothesis_index, self.sample_index, self.reason
        )
    }
}

pub trait AudioGenerator {
    fn generate(&self, request: &GenerationRequest) -> Result<PathBuf, GenerationFailure>;
}

/// Runs every plan entry and returns references in plan order. Failures are
/// collected, never dropped; if nothing could reach the backend the error is
/// [`HypothesisError::GeneratorUnavailable`].
pub fn submit_generation(
    plan: &CandidatePlan,
    client: &dyn AudioGenerator,
) -> Result<Vec<ArtifactRef>, HypothesisError> {
    let mut refs = Vec::with_capacity(plan.entries.len());
    let mut failed = Vec::new();
    let mut unavailable = 0;
    for e in &plan.entries {
        match client.generate(&GenerationRequest::new(&plan.scene_id, e)) {
            Ok(path) => refs.push(ArtifactRef {
                hypothesis_index: e.hypothesis_index,
                sample_index: e.sample_index,
                embedding_path: path,
            }),
            Err(f) => {
                let reason = match f {
                    GenerationFailure::Unavailable(r) => {
                        unavailable += 1;
                        r
                    }
                    GenerationFailure::Failed(r) => r,
                };
                failed.push(FailedEntry {
                    hypothesis_index: e.hypothesis_index,
                    sample_index: e.sample_index,
                    reason,
                });
            }
        }
    }
    if failed.is_empty() {
        return Ok(refs);
    }
    if unavailable == plan.entries.len() {
        return Err(HypothesisError::GeneratorUnavailable(failed[0].reason.clone()));
    }
    Err(HypothesisError::PartialFailure {
        total: plan.entries.len(),
        failed,
    })
}

/// Reads pre-generated embeddings named `{scene_id}_h{h}_s{s}.npy`.
#[derive(Debug, Clone)]
pub struct ReplayGenerator {
    pub dir: PathBuf,
}

impl ReplayGenerator {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, scene_id: &str, hypothesis: usize, sample: usize) -> PathBuf {
        self.dir
            .join(format!("{scene_id}_h{hypothesis}_s{sample}.npy"))
    }
}

impl AudioGenerator for ReplayGenerator {
    fn generate(&self, r: &GenerationRequest) -> Result<PathBuf, GenerationFailure> {
        if !self.dir.is_dir() {
            return Err(GenerationFailure::Unavailable(format!(
                "replay directory {} does not exist",
                self.dir.display()
            )));
        }
        let p = self.path_for(&r.scene_id, r.hypothesis_index, r.sample_index);
        if p.is_file() {
            Ok(p)
        } else {
            Err(GenerationFailure::Failed(format!("missing {}", p.display())))
        }
    }
}

/// POSTs a [`GenerationRequest`] as JSON and expects
/// `{"embedding_path": "..."}` back.
#[cfg(feature = "http")]
#[derive(Debug, Clone)]
pub struct HttpGenerator {
    url: String,
    agent: ureq::Agent,
}

#[cfg(feature = "http")]
impl HttpGenerator {
    pub fn new(url: impl Into<String>, timeout: std::time::Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            url: url.into(),
            agent,
        }
    }

    /// Endpoint from [`GENERATOR_URL_ENV`], if set.
    pub fn from_env(timeout: std::time::Duration) -> Option<Self> {
        std::env::var(GENERATOR_URL_ENV)
            .ok()
            .filter(|u| !u.is_empty())
            .map(|u| Self::new(u, timeout))
    }
}

#[cfg(feature = "http")]
impl AudioGenerator for HttpGenerator {
    fn generate(&self, r: &GenerationRequest) -> Result<PathBuf, GenerationFailure> {
        #[derive(Deserialize)]
        struct Reply {
            embedding_path: PathBuf,
        }
        let mut resp = self.agent.post(&self.url).send_json(r).map_err(|e| match e {
            ureq::Error::Io(_)
            | ureq::Error::ConnectionFailed
            | ureq::Error::HostNotFound
            | ureq::Error::Timeout(_) => GenerationFailure::Unavailable(e.to_string()),
            other => GenerationFailure::Failed(other.to_string()),
        })?;
        let reply: Reply = resp
            .body_mut()
            .read_json()
            .map_err(|e| GenerationFailure::Failed(format!("bad reply: {e}")))?;
        Ok(reply.embedding_path)
    }
}

/// Resolves a reference against the directory it is relative to.
pub fn resolve_artifact(base: &Path, r: &ArtifactRef) -> PathBuf {
    if r.embedding_path.is_absolute() {
        r.embedding_path.clone()
    } else {
        base.join(&r.embedding_path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::{build_candidate_plan, HypothesisMode, HypothesisSet};

    fn plan() -> CandidatePlan {
        let h = HypothesisSet::new("c0", vec!["c1".into(), "c2".into()], HypothesisMode::Ours)
            .unwrap();
        build_candidate_plan("s1", &h, 2, 7)
    }

    fn populate(dir: &Path, skip: Option<(usize, usize)>) {
        let g = ReplayGenerator::new(dir);
        for h in 0..3 {
            for s in 0..2 {
                if Some((h, s)) != skip {
                    std::fs::write(g.path_for("s1", h, s), b"x").unwrap();
                }
            }
        }
    }

    #[test]
    fn replay_all_present() {
        let dir = tempfile::tempdir().unwrap();
        populate(dir.path(), None);
        let refs = submit_generation(&plan(), &ReplayGenerator::new(dir.path())).unwrap();
        assert_eq!(refs.len(), 6);
        assert_eq!(refs[5].hypothesis_index, 2);
        assert_eq!(refs[5].sample_index, 1);
        assert!(refs[2].embedding_path.ends_with("s1_h1_s0.npy"));
    }

    #[test]
    fn replay_missing_one() {
        let dir = tempfile::tempdir().unwrap();
        populate(dir.path(), Some((1, 1)));
        match submit_generation(&plan(), &ReplayGenerator::new(dir.path())) {
            Err(HypothesisError::PartialFailure { total, failed }) => {
                assert_eq!(total, 6);
                assert_eq!(failed.len(), 1);
                assert_eq!((failed[0].hypothesis_index, failed[0].sample_index), (1, 1));
            }
            other => panic!("expected partial failure, got {other:?}"),
        }
    }

    #[test]
    fn replay_dir_absent() {
        let r = submit_generation(&plan(), &ReplayGenerator::new("/nonexistent/replay"));
        assert!(matches!(r, Err(HypothesisError::GeneratorUnavailable(_))));
    }
}

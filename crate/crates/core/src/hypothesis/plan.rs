use serde::{Deserialize, Serialize};

use super::HypothesisSet;
use crate::rng::splitmix64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    /// 0 is the base caption, 1 and 2 the expansions.
    pub hypothesis_index: usize,
    pub sample_index: usize,
    pub prompt_text: String,
    pub generation_seed: u64,
}

/// Entries are hypothesis-major; entry position is the candidate index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePlan {
    pub scene_id: String,
    pub entries: Vec<PlanEntry>,
}

/// Seed for one generation request: FNV-1a over the identifying fields,
/// finished with a splitmix64 round.
pub fn generation_seed(base_seed: u64, scene_id: &str, hypothesis: usize, sample: usize) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    feed(&base_seed.to_le_bytes());
    // length prefix keeps ("ab", 1) and ("a", …) apart
    feed(&(scene_id.len() as u64).to_le_bytes());
    feed(scene_id.as_bytes());
    feed(&(hypothesis as u64).to_le_bytes());
    feed(&(sample as u64).to_le_bytes());
    splitmix64(h)
}

pub fn build_candidate_plan(
    scene_id: &str,
    h: &HypothesisSet,
    samples_per_hypothesis: usize,
    base_seed: u64,
) -> CandidatePlan {
    let entries = h
        .captions()
        .enumerate()
        .flat_map(|(hi, caption)| {
            (0..samples_per_hypothesis).map(move |si| PlanEntry {
                hypothesis_index: hi,
                sample_index: si,
                prompt_text: caption.to_string(),
                generation_seed: generation_seed(base_seed, scene_id, hi, si),
            })
        })
        .collect();
    CandidatePlan {
        scene_id: scene_id.to_string(),
        entries,
    }
}

/// Plan with exactly `total` entries spread over the hypotheses as evenly as
/// possible; earlier hypotheses take the remainder (10 over 3 gives 4, 3, 3).
pub fn build_plan_for_count(
    scene_id: &str,
    h: &HypothesisSet,
    total: usize,
    base_seed: u64,
) -> CandidatePlan {
    let k = h.len();
    let entries = h
        .captions()
        .enumerate()
        .flat_map(|(hi, caption)| {
            let samples = total / k + usize::from(hi < total % k);
            (0..samples).map(move |si| PlanEntry {
                hypothesis_index: hi,
                sample_index: si,
                prompt_text: caption.to_string(),
                generation_seed: generation_seed(base_seed, scene_id, hi, si),
            })
        })
        .collect();
    CandidatePlan {
        scene_id: scene_id.to_string(),
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::HypothesisMode;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn full() -> HypothesisSet {
        HypothesisSet::new(
            "a harbour",
            vec!["Gulls cry over busy docks.".into(), "A very quiet harbour at dawn.".into()],
            HypothesisMode::Ours,
        )
        .unwrap()
    }

    #[test]
    fn plan_sizes() {
        assert_eq!(build_candidate_plan("s", &full(), 2, 42).entries.len(), 6);
        assert_eq!(build_candidate_plan("s", &full(), 1, 42).entries.len(), 3);
        let basic = HypothesisSet::basic("a harbour").unwrap();
        let p = build_candidate_plan("s", &basic, 1, 42);
        assert_eq!(p.entries.len(), 1);
        assert_eq!(p.entries[0].prompt_text, "a harbour");
    }

    #[test]
    fn hypothesis_major_order() {
        let p = build_candidate_plan("s", &full(), 2, 0);
        let order: Vec<(usize, usize)> = p
            .entries
            .iter()
            .map(|e| (e.hypothesis_index, e.sample_index))
            .collect();
        assert_eq!(order, [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]);
        assert_eq!(p.entries[3].prompt_text, "Gulls cry over busy docks.");
    }

    #[test]
    fn seeds_deterministic_and_distinct() {
        let a = build_candidate_plan("scene-1", &full(), 4, 42);
        let b = build_candidate_plan("scene-1", &full(), 4, 42);
        assert_eq!(a, b);
        let mut seen = HashSet::new();
        for scene in 0..200 {
            for h in 0..3 {
                for s in 0..4 {
                    assert!(seen.insert(generation_seed(42, &format!("scene-{scene}"), h, s)));
                }
            }
        }
        assert_ne!(generation_seed(42, "x", 0, 0), generation_seed(43, "x", 0, 0));
    }

    #[test]
    fn counts_spread_over_hypotheses() {
        let per = |n: usize| {
            let p = build_plan_for_count("s", &full(), n, 7);
            (0..3)
                .map(|h| p.entries.iter().filter(|e| e.hypothesis_index == h).count())
                .collect::<Vec<_>>()
        };
        assert_eq!(per(1), [1, 0, 0]);
        assert_eq!(per(3), [1, 1, 1]);
        assert_eq!(per(6), [2, 2, 2]);
        assert_eq!(per(10), [4, 3, 3]);
        assert_eq!(
            build_plan_for_count("s", &full(), 6, 7),
            build_candidate_plan("s", &full(), 2, 7)
        );
        let basic = HypothesisSet::basic("c").unwrap();
        assert_eq!(build_plan_for_count("s", &basic, 10, 7).entries.len(), 10);
    }

    proptest! {
        #[test]
        fn plan_size_is_product(samples in 1usize..8, basic in any::<bool>()) {
            let h = if basic { HypothesisSet::basic("c").unwrap() } else { full() };
            prop_assert_eq!(build_candidate_plan("id", &h, samples, 1).entries.len(), h.len() * samples);
        }
    }
}

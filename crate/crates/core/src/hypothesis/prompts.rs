//! Caption expansion prompt payloads.

use super::HypothesisError;

const PLACEHOLDER: &str = "{C0}";

pub const OURS_TEMPLATE: &str = r#"Given the following satellite image caption:
"{C0}"

Generate TWO alternative sentences describing the same scene,
but reflecting DIFFERENT plausible acoustic conditions.

Requirements:
- Each sentence must remain consistent with the original visual scene.
- Each sentence must be a single concise English sentence.
- Do NOT include prefaces such as "This scene", "The image shows", etc. Start directly with the main content.
- The TWO sentences must differ in the dominant acoustic condition in a way that is acoustically meaningful (e.g., busy vs. quiet traffic, with vs. without natural ambience, higher vs. lower overall ambient noise).
- Each sentence MUST contain at least ONE explicit acoustic cue (e.g., a traffic-intensity cue such as "busy traffic" vs. "nearly traffic-free", or a natural-sound cue such as "birds chirping" vs. "no birds" / "wind ambience", or an ambient-noise cue such as "noticeably loud" vs. "very quiet").
- Do NOT introduce unrealistic or clearly unsupported sound sources.
- If the caption does not strongly support traffic, prefer natural ambience differences instead.

Output format (exactly two lines):
(1) [Sentence]
(2) [Sentence]
"#;

pub const CONTROL_TEMPLATE: &str = r#"Given the following satellite image caption:
"{C0}"

Generate TWO alternative sentences describing the same scene,
but keep the dominant acoustic condition EXACTLY the same.

Requirements:
- Each sentence must remain consistent with the original visual scene.
- Each sentence must be a single concise English sentence.
- Do NOT include prefaces such as "This scene", "The image shows", etc.
- The dominant acoustic condition (sound source type + presence/absence + relative intensity) MUST be the same in both sentences.
- Do NOT change any acoustic-relevant words or phrases, including:
  - traffic intensity words (e.g., busy/light/quiet, continuous vehicles) and any implied change in vehicle noise;
  - presence/absence of natural sound sources (e.g., birds, wind, water ambience) or their intensity;
  - overall ambient noise level qualifiers (e.g., loud/very quiet/noisy/low-noise).
- Only change acoustic-invariant aspects, such as phrasing, syntactic structure, or non-acoustic visual details that do NOT imply a different sound source or intensity.

Output format (exactly two lines):
(1) [Sentence]
(2) [Sentence]
"#;

/// Which expansion prompt to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    /// Acoustically distinct hypotheses.
    Ours,
    /// Acoustically invariant rephrasings.
    Control,
}

pub fn build_expansion_prompt(c0: &str, kind: PromptKind) -> Result<String, HypothesisError> {
    if c0.trim().is_empty() {
        return Err(HypothesisError::EmptyCaption);
    }
    let template = match kind {
        PromptKind::Ours => OURS_TEMPLATE,
        PromptKind::Control => CONTROL_TEMPLATE,
    };
    Ok(template.replacen(PLACEHOLDER, c0, 1))
}

/// Pulls `(1) …` and `(2) …` out of a model reply. Blank lines and unnumbered
/// prose are ignored; any other numbered line is an error.
pub fn parse_hypotheses(response: &str) -> Result<[String; 2], HypothesisError> {
    let mut found: [Option<String>; 2] = [None, None];
    for line in response.lines() {
        let line = line.trim();
        let Some((n, text)) = numbered(line) else {
            continue;
        };
        let slot = match n {
            1 | 2 => &mut found[n - 1],
            _ => {
                return Err(HypothesisError::MalformedResponse(format!(
                    "unexpected numbered line ({n})"
                )))
            }
        };
        if slot.is_some() {
            return Err(HypothesisError::MalformedResponse(format!("line ({n}) appears twice")));
        }
        if text.is_empty() {
            return Err(HypothesisError::MalformedResponse(format!("line ({n}) is empty")));
        }
        *slot = Some(text.to_string());
    }
    match found {
        [Some(a), Some(b)] => Ok([a, b]),
        _ => Err(HypothesisError::MalformedResponse(
            "expected lines (1) and (2)".into(),
        )),
    }
}

/// Inverse of [`parse_hypotheses`].
pub fn format_hypotheses(h: &[String; 2]) -> String {
    format!("(1) {}\n(2) {}\n", h[0], h[1])
}

fn numbered(line: &str) -> Option<(usize, &str)> {
    let rest = line.strip_prefix('(')?;
    let close = rest.find(')')?;
    let n: usize = rest[..close].parse().ok()?;
    Some((n, rest[close + 1..].trim()))
}

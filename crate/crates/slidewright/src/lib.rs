//! Turn a parsed paper (Markdown + asset manifest) into a narratively
//! structured, editable slide deck.
//!
//! The pipeline reconstructs the paper's discourse structure per section,
//! commits to a global narrative plan, refines a slide outline through a
//! bounded critique-judge-revise loop, resolves the outline into a concrete
//! slide plan (layouts, assets, text runs, footnotes, theme color), and
//! renders the result as `.pptx`, standalone HTML, or Beamer source.
//!
//! All LLM access goes through [`gateway`], which supports live calls,
//! transcript recording, and deterministic replay; every agent-facing step
//! has a validated JSON contract with bounded repair retries and a
//! deterministic fallback. [`evalharness`] implements the quiz, rubric,
//! pairwise-preference, ROUGE-L, and corpus-curation metrics.

pub mod commitment;
pub mod deck;
pub mod discourse;
pub mod evalharness;
pub mod gateway;
pub mod ingest;
pub mod outline;
pub mod pipeline;
pub mod render;

#[cfg(any(test, feature = "test-support"))]
pub mod testsupport;

use std::fmt;

use serde::{Deserialize, Serialize};

/// A non-fatal condition surfaced by a pipeline stage and carried into the
/// run manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    /// Stage or operation that raised the warning, e.g. `"ingest"`.
    pub stage: String,
    pub message: String,
}

impl Warning {
    pub fn new(stage: &str, message: impl Into<String>) -> Self {
        Warning {
            stage: stage.to_string(),
            message: message.into(),
        }
    }
}

/// One problem found by a validator, located by a path into the value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Report-style validation result: empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, path: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.to_string(),
            message: message.into(),
        });
    }

    /// All violations joined into one line, for repair prompts.
    pub fn summary(&self) -> String {
        self.violations
            .iter()
            .map(Violation::to_string)
            .collect::<Vec<_>>()
            .join("; ")
    }
}

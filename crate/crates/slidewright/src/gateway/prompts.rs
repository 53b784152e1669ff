//! System prompts and the response-schema registry.
//!
//! Prompt texts ship as editable files under `prompts/` (embedded at compile
//! time, overridable per directory at runtime). The schema documents are
//! appended to every system prompt and exposed programmatically through
//! [`schema_registry`].

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};

use super::AgentName;

fn embedded_prompt(agent: AgentName) -> &'static str {
    match agent {
        AgentName::DiscourseParser => include_str!("../../prompts/discourse_parser.txt"),
        AgentName::CommitmentBuilder => include_str!("../../prompts/commitment_builder.txt"),
        AgentName::SlidePlanner => include_str!("../../prompts/slide_planner.txt"),
        AgentName::NarrativeCritic => include_str!("../../prompts/narrative_critic.txt"),
        AgentName::NarrativeJudge => include_str!("../../prompts/narrative_judge.txt"),
        AgentName::Reviser => include_str!("../../prompts/reviser.txt"),
        AgentName::DeckConstructor => include_str!("../../prompts/deck_constructor.txt"),
        AgentName::AestheticsRefiner => include_str!("../../prompts/aesthetics_refiner.txt"),
        AgentName::QuizGenerator => include_str!("../../prompts/quiz_generator.txt"),
        AgentName::QuizTaker => include_str!("../../prompts/quiz_taker.txt"),
        AgentName::JudgeScorer => include_str!("../../prompts/judge_scorer.txt"),
        AgentName::PairwiseJudge => include_str!("../../prompts/pairwise_judge.txt"),
    }
}

fn prompt_file_name(agent: AgentName) -> &'static str {
    match agent {
        AgentName::DiscourseParser => "discourse_parser.txt",
        AgentName::CommitmentBuilder => "commitment_builder.txt",
        AgentName::SlidePlanner => "slide_planner.txt",
        AgentName::NarrativeCritic => "narrative_critic.txt",
        AgentName::NarrativeJudge => "narrative_judge.txt",
        AgentName::Reviser => "reviser.txt",
        AgentName::DeckConstructor => "deck_constructor.txt",
        AgentName::AestheticsRefiner => "aesthetics_refiner.txt",
        AgentName::QuizGenerator => "quiz_generator.txt",
        AgentName::QuizTaker => "quiz_taker.txt",
        AgentName::JudgeScorer => "judge_scorer.txt",
        AgentName::PairwiseJudge => "pairwise_judge.txt",
    }
}

/// The JSON schema document registered for a schema id.
pub fn schema_document(schema_id: &str) -> Option<Value> {
    let node_def = json!({
        "oneOf": [
            {"type": "object", "properties": {"edu": {"type": "string"}}, "required": ["edu"]},
            {
                "type": "object",
                "properties": {
                    "relation": {"enum": ["Elaboration", "Explanation", "Context", "Purpose", "Evaluation", "Organization"]},
                    "type": {"const": "NS"},
                    "nucleus": {"$ref": "#/$defs/node"},
                    "satellite": {"$ref": "#/$defs/node"},
                    "nucleus_position": {"enum": ["first", "second"]}
                },
                "required": ["relation", "type", "nucleus", "satellite"]
            },
            {
                "type": "object",
                "properties": {
                    "relation": {"enum": ["Joint", "Same-unit"]},
                    "type": {"const": "MN"},
                    "left": {"$ref": "#/$defs/node"},
                    "right": {"$ref": "#/$defs/node"}
                },
                "required": ["relation", "type", "left", "right"]
            }
        ]
    });
    let outline = json!({
        "type": "object",
        "properties": {
            "slides": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "slide_number": {"type": "integer", "minimum": 1},
                        "section_index": {"type": "integer", "minimum": 1},
                        "section_title": {"type": "string"},
                        "slide_title": {"type": "string"},
                        "paragraph_ids": {"type": "array", "items": {"type": "string"}},
                        "rationale": {"type": "string"}
                    },
                    "required": ["slide_number", "section_index", "section_title", "slide_title", "paragraph_ids", "rationale"]
                }
            }
        },
        "required": ["slides"]
    });
    let finding_list = json!({
        "type": "array",
        "items": {
            "type": "object",
            "properties": {
                "affected_slides": {"type": "array", "items": {"type": "integer"}},
                "note": {"type": "string"}
            },
            "required": ["affected_slides", "note"]
        }
    });
    let doc = match schema_id {
        "discourse.tree.v1" => json!({
            "$id": "discourse.tree.v1",
            "$defs": {"node": node_def},
            "$ref": "#/$defs/node"
        }),
        "commitment.v1" => json!({
            "$id": "commitment.v1",
            "type": "object",
            "properties": {
                "snapshot": {"type": "string", "minLength": 1},
                "core_content": {
                    "type": "object",
                    "properties": {
                        "thesis": {"type": "string", "minLength": 1},
                        "key_takeaways": {"type": "array", "items": {"type": "string"}, "minItems": 1, "maxItems": 7}
                    },
                    "required": ["thesis", "key_takeaways"]
                },
                "talk_contract": {
                    "type": "object",
                    "properties": {"prerequisites": {"type": "array", "items": {"type": "string"}, "minItems": 1}},
                    "required": ["prerequisites"]
                },
                "narrative_spine": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "section_plan": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "properties": {
                            "section_title": {"type": "string"},
                            "budget_slides": {"type": "integer", "minimum": 0}
                        },
                        "required": ["section_title", "budget_slides"]
                    }
                }
            },
            "required": ["snapshot", "core_content", "talk_contract", "narrative_spine", "section_plan"]
        }),
        "outline.v1" => {
            let mut o = outline;
            o["$id"] = json!("outline.v1");
            o
        }
        "critique.v1" => json!({
            "$id": "critique.v1",
            "type": "object",
            "properties": {
                "a": finding_list, "b": finding_list, "c": finding_list,
                "d": finding_list, "e": finding_list
            },
            "required": ["a", "b", "c", "d", "e"]
        }),
        "verdict.v1" => json!({
            "$id": "verdict.v1",
            "type": "object",
            "properties": {
                "decision": {"enum": ["Ready", "Revise"]},
                "rationale": {"type": "string"},
                "must_fix": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "issue": {"type": "string"},
                            "severity": {"enum": ["High", "Medium", "Low"]},
                            "affected_slides": {"type": "array", "items": {"type": "integer"}}
                        },
                        "required": ["issue", "severity", "affected_slides"]
                    }
                },
                "guidance": {"type": "string"}
            },
            "required": ["decision", "rationale", "must_fix", "guidance"]
        }),
        "deck.draft.v1" => json!({
            "$id": "deck.draft.v1",
            "type": "object",
            "properties": {
                "deck_title": {"type": "string"},
                "slides": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "slide_number": {"type": "integer", "minimum": 1},
                            "title": {"type": "string"},
                            "blocks": {
                                "type": "array",
                                "minItems": 1,
                                "items": {
                                    "type": "object",
                                    "properties": {
                                        "text": {"type": "string", "minLength": 1},
                                        "indent_level": {"type": "integer", "minimum": 0, "maximum": 3}
                                    },
                                    "required": ["text"]
                                }
                            }
                        },
                        "required": ["slide_number", "title", "blocks"]
                    }
                }
            },
            "required": ["deck_title", "slides"]
        }),
        "deck.refine.v1" => json!({
            "$id": "deck.refine.v1",
            "type": "object",
            "properties": {
                "slides": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "slide_number": {"type": "integer", "minimum": 1},
                            "blocks": {
                                "type": "array",
                                "minItems": 1,
                                "items": {
                                    "type": "object",
                                    "properties": {
                                        "text": {"type": "string", "minLength": 1},
                                        "indent_level": {"type": "integer", "minimum": 0, "maximum": 3}
                                    },
                                    "required": ["text"]
                                }
                            }
                        },
                        "required": ["slide_number", "blocks"]
                    }
                }
            },
            "required": ["slides"]
        }),
        "quiz.items.v1" => json!({
            "$id": "quiz.items.v1",
            "type": "object",
            "properties": {
                "items": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "question": {"type": "string", "minLength": 1},
                            "options": {"type": "array", "items": {"type": "string"}, "minItems": 4, "maxItems": 4},
                            "correct": {"enum": ["A", "B", "C", "D"]}
                        },
                        "required": ["question", "options", "correct"]
                    }
                }
            },
            "required": ["items"]
        }),
        "quiz.answers.v1" => json!({
            "$id": "quiz.answers.v1",
            "type": "object",
            "properties": {
                "answers": {"type": "array", "items": {"enum": ["A", "B", "C", "D", "E"]}}
            },
            "required": ["answers"]
        }),
        "rubric.v1" => json!({
            "$id": "rubric.v1",
            "type": "object",
            "properties": {
                "satisfied": {"type": "array", "items": {"type": "boolean"}, "minItems": 10, "maxItems": 10}
            },
            "required": ["satisfied"]
        }),
        "pairwise.vote.v1" => json!({
            "$id": "pairwise.vote.v1",
            "type": "object",
            "properties": {
                "vote": {"enum": [1, 2]},
                "reason": {"type": "string"}
            },
            "required": ["vote"]
        }),
        _ => return None,
    };
    Some(doc)
}

/// All registered schemas, keyed by schema id.
pub fn schema_registry() -> BTreeMap<&'static str, Value> {
    let mut map = BTreeMap::new();
    for agent in AgentName::ALL {
        let id = agent.schema_id();
        map.entry(id).or_insert_with(|| {
            schema_document(id).expect("every agent maps to a registered schema")
        });
    }
    map
}

/// Per-agent system prompts: embedded defaults plus optional per-directory
/// overrides. The response schema is always appended.
#[derive(Debug, Clone, Default)]
pub struct PromptSet {
    overrides: BTreeMap<AgentName, String>,
}

impl PromptSet {
    /// Load overrides from a directory of `<agent_snake_case>.txt` files.
    /// Missing files fall back to the embedded prompt.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut overrides = BTreeMap::new();
        for agent in AgentName::ALL {
            let path = dir.join(prompt_file_name(agent));
            if path.exists() {
                overrides.insert(agent, std::fs::read_to_string(&path)?);
            }
        }
        Ok(PromptSet { overrides })
    }

    pub fn system_prompt(&self, agent: AgentName) -> String {
        let base = self
            .overrides
            .get(&agent)
            .map(String::as_str)
            .unwrap_or_else(|| embedded_prompt(agent));
        let schema = schema_document(agent.schema_id())
            .expect("every agent maps to a registered schema");
        format!(
            "{}\n\nRespond with one JSON value and nothing else, conforming to schema \"{}\":\n{}",
            base.trim_end(),
            agent.schema_id(),
            schema
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompts_embed_schema_contract() {
        for agent in AgentName::ALL {
            let p = PromptSet::default().system_prompt(agent);
            assert!(p.contains(agent.schema_id()), "{}", agent.as_str());
            assert!(p.len() > 100);
        }
    }

    #[test]
    fn prompt_overrides_take_precedence() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("reviser.txt"), "Custom reviser brief.").unwrap();
        let set = PromptSet::from_dir(dir.path()).unwrap();
        assert!(set.system_prompt(AgentName::Reviser).starts_with("Custom reviser brief."));
        // Untouched agents keep the embedded text.
        assert!(set
            .system_prompt(AgentName::DiscourseParser)
            .contains("binary discourse tree"));
    }
}

//! Deterministic transports and fixture builders for tests.
//!
//! Enabled with the `test-support` feature (always on under `cfg(test)`).
//! Nothing here touches the network: [`QueueTransport`] pops canned
//! responses, [`ScriptedTransport`] synthesizes schema-valid agent responses
//! from the request payload itself, so recording a transcript through it and
//! replaying that transcript exercises the full gateway machinery offline.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde_json::{json, Value};

use crate::discourse::{DiscourseNode, DiscourseTree, NucleusPosition, RelationLabel};
use crate::gateway::{AgentName, AgentRequest, Transport, TransportFailure};

/// Pops one canned response per send, in order. Sends after exhaustion fail
/// fatally, which surfaces as a transport error in the gateway.
pub struct QueueTransport {
    responses: Mutex<VecDeque<String>>,
    pub calls: AtomicU64,
}

impl QueueTransport {
    pub fn new(responses: Vec<String>) -> Self {
        QueueTransport {
            responses: Mutex::new(responses.into()),
            calls: AtomicU64::new(0),
        }
    }
}

impl Transport for QueueTransport {
    fn send(&self, _model: &str, _request: &AgentRequest) -> Result<String, TransportFailure> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.responses
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| TransportFailure::fatal("queue transport exhausted"))
    }
}

/// A transport that always fails, for asserting that a code path never
/// reaches the network.
pub struct PanicTransport;

impl Transport for PanicTransport {
    fn send(&self, _model: &str, request: &AgentRequest) -> Result<String, TransportFailure> {
        panic!(
            "transport must not be reached (agent {})",
            request.agent.as_str()
        );
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Small deterministic PRNG seeded from request content.
struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next() % n.max(1) as u64) as usize
    }
}

/// Build a random valid discourse tree over the given paragraph ids:
/// random split shapes, labels, and nucleus sides.
pub fn random_valid_tree(seed: u64, section_index: usize, ids: &[String]) -> DiscourseTree {
    fn build(rng: &mut SplitMix, ids: &[String]) -> DiscourseNode {
        if ids.len() == 1 {
            return DiscourseNode::Leaf {
                edu: ids[0].clone(),
            };
        }
        let split = 1 + rng.below(ids.len() - 1);
        let label = RelationLabel::ALL[rng.below(RelationLabel::ALL.len())];
        let nucleus = if rng.next() % 2 == 0 {
            NucleusPosition::First
        } else {
            NucleusPosition::Second
        };
        DiscourseNode::Relation {
            label,
            nucleus,
            first: Box::new(build(rng, &ids[..split])),
            second: Box::new(build(rng, &ids[split..])),
        }
    }
    let mut rng = SplitMix(seed ^ 0x5eed);
    DiscourseTree::new(section_index, build(&mut rng, ids))
}

/// Synthesizes a schema-valid response for every agent, deterministically
/// from the request payload. Optionally emits garbage for the first
/// `malformed_prefix` sends to exercise repair loops, or follows a scripted
/// Ready/Revise pattern for the narrative judge.
pub struct ScriptedTransport {
    pub calls: AtomicU64,
    malformed_prefix: AtomicU64,
    judge_script: Mutex<VecDeque<&'static str>>,
}

impl Default for ScriptedTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl ScriptedTransport {
    pub fn new() -> Self {
        ScriptedTransport {
            calls: AtomicU64::new(0),
            malformed_prefix: AtomicU64::new(0),
            judge_script: Mutex::new(VecDeque::new()),
        }
    }

    /// The first `n` sends return unparseable text.
    pub fn with_malformed_prefix(self, n: u64) -> Self {
        self.malformed_prefix.store(n, Ordering::SeqCst);
        self
    }

    /// Fix the judge's decisions; entries must be "Ready" or "Revise".
    /// When the script runs dry the judge says Ready.
    pub fn with_judge_script(self, script: &[&'static str]) -> Self {
        *self.judge_script.lock().unwrap() = script.to_vec().into();
        self
    }

    fn respond(&self, request: &AgentRequest) -> Value {
        let payload: Value = serde_json::from_str(&request.user_payload).unwrap_or(Value::Null);
        let seed = fnv1a(request.user_payload.as_bytes());
        match request.agent {
            AgentName::DiscourseParser => {
                let ids: Vec<String> = payload["paragraphs"]
                    .as_array()
                    .map(|a| {
                        a.iter()
                            .filter_map(|p| p["id"].as_str().map(str::to_string))
                            .collect()
                    })
                    .unwrap_or_default();
                let index = payload["section_index"].as_u64().unwrap_or(1) as usize;
                let tree = random_valid_tree(seed, index, &ids);
                serde_json::to_value(&tree.root).expect("tree serializes")
            }
            AgentName::CommitmentBuilder => scripted_commitment(&payload),
            AgentName::SlidePlanner => scripted_outline(&payload, seed),
            AgentName::NarrativeCritic => json!({
                "a": [], "b": [], "c": [],
                "d": [{"affected_slides": [1], "note": "opening slide packs two ideas"}],
                "e": []
            }),
            AgentName::NarrativeJudge => {
                let decision = self
                    .judge_script
                    .lock()
                    .unwrap()
                    .pop_front()
                    .unwrap_or("Ready");
                if decision == "Revise" {
                    json!({
                        "decision": "Revise",
                        "rationale": "the critique lists unresolved structural issues",
                        "must_fix": [{
                            "issue": "split the overloaded opening slide",
                            "severity": "High",
                            "affected_slides": [1]
                        }],
                        "guidance": "move the second idea of slide 1 onto its own slide"
                    })
                } else {
                    json!({
                        "decision": "Ready",
                        "rationale": "outline follows the commitment and flows cleanly",
                        "must_fix": [],
                        "guidance": ""
                    })
                }
            }
            AgentName::Reviser => scripted_revision(&payload),
            AgentName::DeckConstructor => scripted_deck(&payload),
            AgentName::AestheticsRefiner => scripted_refinement(&payload),
            AgentName::QuizGenerator => {
                let count = payload["count"].as_u64().unwrap_or(25) as usize;
                let quiz_type = payload["quiz_type"].as_str().unwrap_or("Story");
                let items: Vec<Value> = (0..count)
                    .map(|i| {
                        json!({
                            "question": format!("{} question {} about the paper?", quiz_type, i + 1),
                            "options": [
                                format!("candidate answer {}a", i + 1),
                                format!("candidate answer {}b", i + 1),
                                format!("candidate answer {}c", i + 1),
                                format!("candidate answer {}d", i + 1)
                            ],
                            "correct": ["A", "B", "C", "D"][i % 4]
                        })
                    })
                    .collect();
                json!({ "items": items })
            }
            AgentName::QuizTaker => {
                let n = payload["items"].as_array().map(Vec::len).unwrap_or(25);
                // Deterministic answers: cycle A..E from the payload hash.
                let mut rng = SplitMix(seed);
                let answers: Vec<&str> = (0..n)
                    .map(|_| ["A", "B", "C", "D", "E"][rng.below(5)])
                    .collect();
                json!({ "answers": answers })
            }
            AgentName::JudgeScorer => {
                let mut rng = SplitMix(seed);
                let satisfied: Vec<bool> = (0..10).map(|_| rng.next() % 2 == 0).collect();
                json!({ "satisfied": satisfied })
            }
            AgentName::PairwiseJudge => {
                // Prefer whichever presentation contains the marker token, so
                // tests can force consistent deck-level preferences.
                let first = payload["first"].to_string();
                let second = payload["second"].to_string();
                let vote = if first.contains("PREFERRED") {
                    1
                } else if second.contains("PREFERRED") {
                    2
                } else if fnv1a(first.as_bytes()) >= fnv1a(second.as_bytes()) {
                    1
                } else {
                    2
                };
                json!({"vote": vote, "reason": "stronger narrative"})
            }
        }
    }
}

fn scripted_commitment(payload: &Value) -> Value {
    let budget = payload["slide_budget"].as_u64().unwrap_or(10);
    let sections: Vec<&str> = payload["sections"]
        .as_array()
        .map(|a| a.iter().filter_map(|s| s["title"].as_str()).collect())
        .unwrap_or_default();
    let n = sections.len().max(1) as u64;
    let per = budget / n;
    let extra = (budget % n) as usize;
    let plan: Vec<Value> = sections
        .iter()
        .enumerate()
        .map(|(i, title)| {
            json!({
                "section_title": title,
                "budget_slides": per + u64::from(i < extra)
            })
        })
        .collect();
    let audience = payload["target_audience"].as_str().unwrap_or("General Public");
    json!({
        "snapshot": format!("A focused walk through the work for {}, sized to {} slides.", audience, budget),
        "core_content": {
            "thesis": "Structure-aware planning yields clearer decks than flat summarization.",
            "key_takeaways": [
                "Discourse structure guides grouping",
                "A global plan keeps the story consistent",
                "Bounded refinement improves flow"
            ]
        },
        "talk_contract": {
            "prerequisites": ["Basic familiarity with the research area"]
        },
        "narrative_spine": [
            "Set up the problem",
            "Show the approach",
            "Demonstrate the evidence",
            "Close with implications"
        ],
        "section_plan": plan
    })
}

fn scripted_outline(payload: &Value, seed: u64) -> Value {
    // One slide per discourse-tree top-level span, bounded by the total
    // budget so shorter talks get fewer slides.
    let budget = payload["commitment"]["section_plan"]
        .as_array()
        .map(|plan| {
            plan.iter()
                .filter_map(|p| p["budget_slides"].as_u64())
                .sum::<u64>()
        })
        .filter(|b| *b > 0)
        .unwrap_or(10) as usize;
    let mut rng = SplitMix(seed);
    let mut slides = Vec::new();
    if let Some(sections) = payload["sections"].as_array() {
        for section in sections {
            let index = section["index"].as_u64().unwrap_or(1);
            let title = section["title"].as_str().unwrap_or("Section");
            let ids: Vec<&str> = section["paragraph_ids"]
                .as_array()
                .map(|a| a.iter().filter_map(Value::as_str).collect())
                .unwrap_or_default();
            if ids.is_empty() {
                continue;
            }
            // Per-section slide count scales with the budget share.
            let sections_total = sections.len().max(1);
            let max_here = (budget / sections_total).clamp(1, ids.len());
            let groups = max_here.min(1 + rng.below(max_here.max(1)));
            let chunk = ids.len().div_ceil(groups);
            for (g, chunk_ids) in ids.chunks(chunk.max(1)).enumerate() {
                slides.push(json!({
                    "slide_number": slides.len() + 1,
                    "section_index": index,
                    "section_title": title,
                    "slide_title": if g == 0 { title.to_string() } else { format!("{} ({})", title, g + 1) },
                    "paragraph_ids": chunk_ids,
                    "rationale": "grouped by shared rhetorical span"
                }));
            }
        }
    }
    json!({ "slides": slides })
}

fn scripted_revision(payload: &Value) -> Value {
    // Split the first slide with more than one paragraph, per the scripted
    // judge guidance; otherwise return the outline unchanged.
    let mut slides: Vec<Value> = payload["outline"]["slides"]
        .as_array()
        .cloned()
        .unwrap_or_default();
    if let Some(pos) = slides
        .iter()
        .position(|s| s["paragraph_ids"].as_array().map(Vec::len).unwrap_or(0) > 1)
    {
        let slide = slides[pos].clone();
        let ids = slide["paragraph_ids"].as_array().cloned().unwrap_or_default();
        let (left, right) = ids.split_at(ids.len() / 2);
        let mut a = slide.clone();
        a["paragraph_ids"] = json!(left);
        let mut b = slide.clone();
        b["paragraph_ids"] = json!(right);
        b["slide_title"] = json!(format!(
            "{} (cont.)",
            slide["slide_title"].as_str().unwrap_or("Slide")
        ));
        slides.splice(pos..=pos, [a, b]);
    }
    for (i, slide) in slides.iter_mut().enumerate() {
        slide["slide_number"] = json!(i + 1);
    }
    json!({ "slides": slides })
}

fn scripted_deck(payload: &Value) -> Value {
    let mut slides = Vec::new();
    if let Some(outline_slides) = payload["slides"].as_array() {
        for slide in outline_slides {
            let n = slide["slide_number"].as_u64().unwrap_or(1);
            let title = slide["slide_title"].as_str().unwrap_or("Slide");
            let texts: Vec<&str> = slide["paragraph_texts"]
                .as_array()
                .map(|a| a.iter().filter_map(Value::as_str).collect())
                .unwrap_or_default();
            let blocks: Vec<Value> = texts
                .iter()
                .flat_map(|t| {
                    // First clause of each paragraph becomes one bullet.
                    let clause: String = t.chars().take(110).collect();
                    Some(json!({"text": clause.trim().to_string(), "indent_level": 0}))
                })
                .collect();
            let blocks = if blocks.is_empty() {
                vec![json!({"text": format!("Key points of {}", title), "indent_level": 0})]
            } else {
                blocks
            };
            slides.push(json!({
                "slide_number": n,
                "title": title,
                "blocks": blocks
            }));
        }
    }
    json!({
        "deck_title": payload["deck_title"].as_str().unwrap_or("Technical Talk"),
        "slides": slides
    })
}

fn scripted_refinement(payload: &Value) -> Value {
    let mut out = Vec::new();
    if let Some(slides) = payload["slides"].as_array() {
        for slide in slides {
            let n = slide["slide_number"].as_u64().unwrap_or(1);
            let action = slide["action"].as_str().unwrap_or("enrich");
            let blocks: Vec<String> = slide["blocks"]
                .as_array()
                .map(|a| {
                    a.iter()
                        .filter_map(|b| b["text"].as_str().map(str::to_string))
                        .collect()
                })
                .unwrap_or_default();
            let new_blocks: Vec<Value> = match action {
                "condense" => {
                    let keep = blocks.len().div_ceil(2).max(1);
                    blocks
                        .iter()
                        .take(keep)
                        .map(|t| {
                            let short: String = t.chars().take(90).collect();
                            json!({"text": short, "indent_level": 0})
                        })
                        .collect()
                }
                "emphasize" => blocks
                    .iter()
                    .map(|t| {
                        let marked = match t.split_once(' ') {
                            Some((head, rest)) => {
                                format!("\\textbf{{{}}} {}", head, rest)
                            }
                            None => format!("\\textcolor{{theme}}{{{}}}", t),
                        };
                        json!({"text": marked, "indent_level": 0})
                    })
                    .collect(),
                // enrich
                _ => {
                    let mut b: Vec<Value> = blocks
                        .iter()
                        .map(|t| json!({"text": t, "indent_level": 0}))
                        .collect();
                    while b.len() < 3 {
                        b.push(json!({
                            "text": format!("Supporting detail {} drawn from the source material.", b.len() + 1),
                            "indent_level": 1
                        }));
                    }
                    b
                }
            };
            out.push(json!({"slide_number": n, "blocks": new_blocks}));
        }
    }
    json!({ "slides": out })
}

impl Transport for ScriptedTransport {
    fn send(&self, _model: &str, request: &AgentRequest) -> Result<String, TransportFailure> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let remaining = self.malformed_prefix.load(Ordering::SeqCst);
        if remaining > 0 {
            self.malformed_prefix.store(remaining - 1, Ordering::SeqCst);
            return Ok("sorry, here is some prose instead of JSON".to_string());
        }
        Ok(self.respond(request).to_string())
    }
}

/// A compact six-section fixture document with citations, used across the
/// integration tests.
pub fn fixture_paper_markdown() -> String {
    let mut md = String::from("# Structured Deck Synthesis from Long Documents\n\n");
    let sections: [(&str, &[&str]); 6] = [
        ("Introduction", &[
            "Long technical documents overwhelm flat summarization, because a single pass cannot hold both the global argument and the local evidence [1].",
            "We frame deck construction as narrative reconstruction: recover the document's structure first, then plan slides against it.",
            "Our contribution is a staged planner that separates structure recovery, global planning, and bounded refinement.",
        ]),
        ("Related Work", &[
            "Prior systems condense sections independently and stitch the results, which fractures cross-section flow [2].",
            "Outline-first pipelines improve ordering but commit to a single pass, so early mistakes persist into the final deck [3].",
        ]),
        ("Method", &[
            "Each section is parsed into a binary structure over its paragraphs, separating central claims from supporting material.",
            "A global plan fixes the thesis, the takeaways, the assumed prerequisites, the story beats, and a per-section slide budget.",
            "Slides are drafted against that plan and revised through a bounded critique and judgment cycle [1,4].",
            "The final pass matches figures to slides, selects layouts, and applies consistent emphasis styling.",
        ]),
        ("Experiments", &[
            "We evaluate coverage with question answering over the generated decks and compare preference rates against strong baselines.",
            "An ablation over the structural components shows that removing any one of them reduces narrative quality scores [5].",
            "Across backbones, the staged planner retains more methodological detail at equal deck length.",
        ]),
        ("Discussion", &[
            "The approach is agnostic to the downstream renderer, which only consumes a resolved slide plan.",
            "Failure cases concentrate in slides that overrun their layout capacity when bullet counts grow unchecked.",
        ]),
        ("Conclusion", &[
            "Recovering structure before planning, and planning before writing, yields decks that read like talks rather than digests.",
        ]),
    ];
    for (title, paragraphs) in sections {
        md.push_str(&format!("## {}\n\n", title));
        for p in paragraphs {
            md.push_str(p);
            md.push_str("\n\n");
        }
    }
    md.push_str("## References\n\n[1] First reference. [2] Second. [3] Third. [4] Fourth. [5] Fifth.\n");
    md
}

/// Write a deterministic asset manifest (3 figures as PNGs on disk + 3 cell
/// tables) into `dir`, returning the manifest path.
pub fn write_fixture_manifest(dir: &std::path::Path) -> std::path::PathBuf {
    use image::{Rgb, RgbImage};
    let colors = [
        ("fig_arch", Rgb([200u8, 40, 40]), "Overview of the staged planner architecture"),
        ("fig_flow", Rgb([40, 90, 200]), "Narrative flow comparison across systems"),
        ("fig_abl", Rgb([40, 160, 90]), "Ablation study of structural components"),
    ];
    for (name, color, _) in &colors {
        let mut img = RgbImage::from_pixel(64, 48, *color);
        // A few off-color pixels so extraction has a real histogram.
        for x in 0..8 {
            img.put_pixel(x, 0, Rgb([250, 250, 250]));
        }
        img.save(dir.join(format!("{}.png", name))).unwrap();
    }
    let assets: Vec<Value> = colors
        .iter()
        .map(|(name, _, caption)| {
            json!({
                "id": name,
                "kind": "figure",
                "caption": caption,
                "width_px": 64,
                "height_px": 48,
                "media_path": format!("{}.png", name)
            })
        })
        .chain([
            json!({"id": "tab_main", "kind": "table", "caption": "Main results across evaluation backbones",
                   "width_px": 0, "height_px": 0,
                   "cells": [["System", "Coverage", "Preference"], ["Baseline", "61.2", "34%"], ["Staged", "71.4", "66%"]]}),
            json!({"id": "tab_abl", "kind": "table", "caption": "Ablation results for each component",
                   "width_px": 0, "height_px": 0,
                   "cells": [["Variant", "Score"], ["Full", "9.7"], ["No structure", "7.5"]]}),
            json!({"id": "tab_cost", "kind": "table", "caption": "Cost accounting per stage",
                   "width_px": 0, "height_px": 0,
                   "cells": [["Stage", "Calls"], ["Planning", "3"], ["Refinement", "4"]]}),
        ])
        .collect();
    let manifest = json!({
        "assets": assets,
        "references": [
            "A. Author. On long documents. 2021.",
            "B. Author. Section-wise digests. 2022.",
            "C. Author. Outline-first generation. 2023.",
            "D. Author. Bounded self-revision. 2024.",
            "E. Author. Ablation protocols. 2024."
        ]
    });
    let path = dir.join("assets.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    path
}

//! Parse input Markdown and the asset manifest into a validated
//! [`DocumentBundle`]: ordered sections, paragraph EDUs with stable IDs,
//! a citation map, and an asset dictionary.
//!
//! Paragraphs are blank-line-delimited blocks under a heading; level-1/2
//! ATX headings open sections, deeper headings fold into the surrounding
//! text. Sections titled like bibliographies, appendices, or
//! acknowledgements are dropped during ingestion.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::Warning;

/// Blocks shorter than this (after whitespace normalization) merge into the
/// neighbouring paragraph instead of becoming their own EDU.
pub const MIN_PARAGRAPH_CHARS: usize = 20;

/// Title keywords that mark a section for removal during ingestion.
const DROPPED_TITLE_KEYWORDS: &[&str] = &["reference", "bibliography", "appendix", "acknowledg"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("no section with at least one paragraph remains after ingestion")]
    EmptyDocument,
    #[error("malformed heading at line {line_no}: {reason}")]
    MalformedHeading { line_no: usize, reason: String },
    #[error("asset manifest schema error at {path}: {message}")]
    ManifestSchema { path: String, message: String },
    #[error("asset media missing: {}", .paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingMedia { paths: Vec<PathBuf> },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse role of a section within the paper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SectionGroup {
    Introduction,
    RelatedWork,
    Methodology,
    Evaluation,
    Conclusion,
    Other,
}

impl fmt::Display for SectionGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SectionGroup::Introduction => "Introduction",
            SectionGroup::RelatedWork => "RelatedWork",
            SectionGroup::Methodology => "Methodology",
            SectionGroup::Evaluation => "Evaluation",
            SectionGroup::Conclusion => "Conclusion",
            SectionGroup::Other => "Other",
        };
        f.write_str(s)
    }
}

/// One paragraph treated as an elementary discourse unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    /// Stable key of the form `s<section>.p<ordinal>`.
    pub id: String,
    pub text: String,
    pub char_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    /// 1-based, contiguous across the bundle.
    pub index: usize,
    pub title: String,
    pub group: SectionGroup,
    pub paragraphs: Vec<Paragraph>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssetKind {
    Figure,
    Table,
}

/// A figure or table extracted from the source document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Asset {
    pub id: String,
    pub kind: AssetKind,
    pub caption: String,
    pub width_px: u32,
    pub height_px: u32,
    /// Rendered media for figures (and optionally tables).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub media_path: Option<PathBuf>,
    /// Cell grid for tables without a rendered image.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<Vec<String>>>,
}

impl Asset {
    /// Width/height ratio used for layout-zone fitting. Tables that only
    /// carry a cell grid get a nominal aspect from the grid shape.
    pub fn aspect(&self) -> f64 {
        if self.width_px > 0 && self.height_px > 0 {
            return f64::from(self.width_px) / f64::from(self.height_px);
        }
        match &self.cells {
            Some(rows) if !rows.is_empty() => {
                let cols = rows.iter().map(Vec::len).max().unwrap_or(1).max(1);
                cols as f64 / rows.len() as f64
            }
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationEntry {
    /// Short form as it appears in text, e.g. `"[12]"`.
    pub short_form: String,
    pub full_reference: String,
    pub footnote_label: String,
    /// False when no bibliography entry matched the short form.
    pub resolved: bool,
}

/// The validated input to every downstream stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentBundle {
    pub title: String,
    pub sections: Vec<Section>,
    pub assets: BTreeMap<String, Asset>,
    pub citations: BTreeMap<String, CitationEntry>,
    /// Hex SHA-256 of the source Markdown.
    pub source_hash: String,
}

impl DocumentBundle {
    pub fn section(&self, index: usize) -> Option<&Section> {
        self.sections.iter().find(|s| s.index == index)
    }

    pub fn paragraph_text(&self, id: &str) -> Option<&str> {
        self.sections
            .iter()
            .flat_map(|s| s.paragraphs.iter())
            .find(|p| p.id == id)
            .map(|p| p.text.as_str())
    }

    pub fn paragraph_ids(&self) -> impl Iterator<Item = &str> {
        self.sections
            .iter()
            .flat_map(|s| s.paragraphs.iter())
            .map(|p| p.id.as_str())
    }

    /// Plain-text re-serialization of the bundle; parsing it again yields
    /// the same title and sections.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        if self.title != "Untitled" {
            out.push_str(&format!("# {}\n\n", self.title));
        }
        for section in &self.sections {
            out.push_str(&format!("## {}\n\n", section.title));
            for paragraph in &section.paragraphs {
                out.push_str(&paragraph.text);
                out.push_str("\n\n");
            }
        }
        out
    }
}

/// Classify a section title into its group. Case-insensitive keyword match,
/// first hit in the listed precedence order wins; total and pure.
pub fn classify_section(title: &str) -> SectionGroup {
    let lower = title.to_lowercase();
    const TABLE: &[(&[&str], SectionGroup)] = &[
        (&["introduction"], SectionGroup::Introduction),
        (&["related", "background"], SectionGroup::RelatedWork),
        (&["method", "approach", "model"], SectionGroup::Methodology),
        (
            &["experiment", "evaluation", "result", "ablation"],
            SectionGroup::Evaluation,
        ),
        (
            &["conclusion", "discussion", "limitation"],
            SectionGroup::Conclusion,
        ),
    ];
    for (keywords, group) in TABLE {
        if keywords.iter().any(|k| lower.contains(k)) {
            return *group;
        }
    }
    SectionGroup::Other
}

fn is_dropped_title(title: &str) -> bool {
    let lower = title.to_lowercase();
    DROPPED_TITLE_KEYWORDS.iter().any(|k| lower.contains(k))
}

fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

struct RawSection {
    level: usize,
    title: String,
    blocks: Vec<String>,
}

/// Parse an ATX heading line. Returns `Ok(None)` for non-heading lines.
fn parse_heading(line: &str, line_no: usize) -> Result<Option<(usize, String)>, IngestError> {
    let trimmed = line.trim_start();
    if !trimmed.starts_with('#') {
        return Ok(None);
    }
    let hashes = trimmed.chars().take_while(|&c| c == '#').count();
    if hashes > 6 {
        return Err(IngestError::MalformedHeading {
            line_no,
            reason: format!("{} '#' markers exceed the 6-level ATX range", hashes),
        });
    }
    let rest = &trimmed[hashes..];
    if !rest.is_empty() && !rest.starts_with(' ') && !rest.starts_with('\t') {
        // "#tag" style token, not an ATX heading.
        return Ok(None);
    }
    // Strip optional closing hash run.
    let title = rest.trim().trim_end_matches('#').trim();
    if title.is_empty() {
        return Err(IngestError::MalformedHeading {
            line_no,
            reason: "heading has no title text".to_string(),
        });
    }
    Ok(Some((hashes, title.to_string())))
}

/// Parse Markdown into a [`DocumentBundle`] without assets or citations.
///
/// Level-1/2 headings become sections and blank-line-delimited blocks become
/// paragraphs. A unique leading level-1 heading is consumed as the document
/// title. Bibliography/appendix-like sections are dropped, empty sections are
/// removed, and the survivors are renumbered contiguously from 1.
pub fn parse_markdown(source: &str) -> Result<DocumentBundle, IngestError> {
    let mut raw_sections: Vec<RawSection> = Vec::new();
    let mut current_block = String::new();

    let mut push_block = |sections: &mut Vec<RawSection>, block: &mut String| {
        let normalized = normalize_whitespace(block);
        block.clear();
        if normalized.is_empty() {
            return;
        }
        if sections.is_empty() {
            sections.push(RawSection {
                level: 2,
                title: "Body".to_string(),
                blocks: Vec::new(),
            });
        }
        sections.last_mut().unwrap().blocks.push(normalized);
    };

    for (idx, line) in source.lines().enumerate() {
        match parse_heading(line, idx + 1)? {
            Some((level, title)) if level <= 2 => {
                push_block(&mut raw_sections, &mut current_block);
                raw_sections.push(RawSection {
                    level,
                    title,
                    blocks: Vec::new(),
                });
            }
            Some((_, title)) => {
                // Deeper headings fold into the surrounding text as their
                // own block opener.
                push_block(&mut raw_sections, &mut current_block);
                current_block.push_str(&title);
                current_block.push(' ');
            }
            None => {
                if line.trim().is_empty() {
                    push_block(&mut raw_sections, &mut current_block);
                } else {
                    current_block.push_str(line);
                    current_block.push('\n');
                }
            }
        }
    }
    push_block(&mut raw_sections, &mut current_block);

    // A unique leading H1 names the document; its direct blocks become a
    // plain "Body" section.
    let h1_count = raw_sections.iter().filter(|s| s.level == 1).count();
    let mut title = "Untitled".to_string();
    if h1_count == 1 && raw_sections.first().map(|s| s.level) == Some(1) {
        let head = raw_sections.remove(0);
        title = head.title;
        if !head.blocks.is_empty() {
            raw_sections.insert(
                0,
                RawSection {
                    level: 2,
                    title: "Body".to_string(),
                    blocks: head.blocks,
                },
            );
        }
    }

    let mut sections = Vec::new();
    for raw in raw_sections {
        if is_dropped_title(&raw.title) {
            continue;
        }
        let merged = merge_short_blocks(&raw.blocks);
        if merged.is_empty() {
            continue;
        }
        let index = sections.len() + 1;
        let paragraphs = merged
            .into_iter()
            .enumerate()
            .map(|(ordinal, text)| Paragraph {
                id: format!("s{}.p{}", index, ordinal + 1),
                char_count: text.chars().count(),
                text,
            })
            .collect();
        sections.push(Section {
            index,
            group: classify_section(&raw.title),
            title: raw.title,
            paragraphs,
        });
    }

    if sections.is_empty() {
        return Err(IngestError::EmptyDocument);
    }

    Ok(DocumentBundle {
        title,
        sections,
        assets: BTreeMap::new(),
        citations: BTreeMap::new(),
        source_hash: hex::encode(Sha256::digest(source.as_bytes())),
    })
}

/// Apply the minimum-length rule: blocks under [`MIN_PARAGRAPH_CHARS`]
/// append to the previous paragraph, or prepend to the next when no
/// previous paragraph exists yet.
fn merge_short_blocks(blocks: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut pending: Option<String> = None;
    for block in blocks {
        let mut text = match pending.take() {
            Some(p) => format!("{} {}", p, block),
            None => block.clone(),
        };
        if text.chars().count() >= MIN_PARAGRAPH_CHARS {
            out.push(text);
        } else if let Some(prev) = out.last_mut() {
            prev.push(' ');
            prev.push_str(&text);
        } else {
            pending = Some(std::mem::take(&mut text));
        }
    }
    if let Some(p) = pending {
        out.push(p);
    }
    out
}

/// Map every bracketed numeric citation (`[3]`, `[1,4]`, ...) found in body
/// text to a [`CitationEntry`]. Best-effort: tokens without a matching
/// bibliography entry are kept but flagged unresolved.
pub fn extract_citations(
    source: &str,
    references: &[String],
) -> (BTreeMap<String, CitationEntry>, Vec<Warning>) {
    let group_re = regex::Regex::new(r"\[(\d+(?:\s*,\s*\d+)*)\]").unwrap();
    let mut map = BTreeMap::new();
    let mut warnings = Vec::new();
    for line in source.lines() {
        if parse_heading(line, 0).ok().flatten().is_some() {
            continue;
        }
        for caps in group_re.captures_iter(line) {
            for num in caps[1].split(',') {
                let num = num.trim();
                let key = format!("[{}]", num);
                if map.contains_key(&key) {
                    continue;
                }
                let index: usize = num.parse().unwrap_or(0);
                let (full_reference, resolved) = match index.checked_sub(1).and_then(|i| references.get(i)) {
                    Some(r) => (r.clone(), true),
                    None => ("(unresolved)".to_string(), false),
                };
                if !resolved {
                    warnings.push(Warning::new(
                        "ingest",
                        format!("citation {} has no matching reference entry", key),
                    ));
                }
                map.insert(
                    key.clone(),
                    CitationEntry {
                        short_form: key.clone(),
                        full_reference,
                        footnote_label: key,
                        resolved,
                    },
                );
            }
        }
    }
    (map, warnings)
}

#[derive(Debug, Deserialize)]
struct RawManifest {
    #[serde(default)]
    assets: Vec<RawAsset>,
    #[serde(default)]
    references: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawAsset {
    id: String,
    kind: String,
    #[serde(default)]
    caption: String,
    #[serde(default)]
    width_px: u32,
    #[serde(default)]
    height_px: u32,
    #[serde(default)]
    media_path: Option<String>,
    #[serde(default)]
    cells: Option<Vec<Vec<String>>>,
}

/// Loaded and validated asset manifest.
#[derive(Debug, Clone)]
pub struct AssetManifest {
    pub assets: BTreeMap<String, Asset>,
    pub references: Vec<String>,
    pub warnings: Vec<Warning>,
}

/// Load the asset-manifest JSON file; all assets are validated (positive
/// dimensions, existing media files for figures). Relative media paths
/// resolve against the manifest's directory.
pub fn load_asset_manifest(path: &Path) -> Result<AssetManifest, IngestError> {
    let text = std::fs::read_to_string(path)?;
    let raw: RawManifest =
        serde_json::from_str(&text).map_err(|e| IngestError::ManifestSchema {
            path: "$".to_string(),
            message: e.to_string(),
        })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let mut assets = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut missing = Vec::new();
    for (i, a) in raw.assets.into_iter().enumerate() {
        let field = |name: &str| format!("assets[{}].{}", i, name);
        let kind = match a.kind.as_str() {
            "figure" => AssetKind::Figure,
            "table" => AssetKind::Table,
            other => {
                return Err(IngestError::ManifestSchema {
                    path: field("kind"),
                    message: format!("expected \"figure\" or \"table\", got {:?}", other),
                })
            }
        };
        if a.id.trim().is_empty() {
            return Err(IngestError::ManifestSchema {
                path: field("id"),
                message: "asset id must be non-empty".to_string(),
            });
        }
        if assets.contains_key(&a.id) {
            return Err(IngestError::ManifestSchema {
                path: field("id"),
                message: format!("duplicate asset id {:?}", a.id),
            });
        }
        let needs_dims = kind == AssetKind::Figure || a.media_path.is_some();
        if needs_dims && a.width_px == 0 {
            return Err(IngestError::ManifestSchema {
                path: field("width_px"),
                message: "width must be positive".to_string(),
            });
        }
        if needs_dims && a.height_px == 0 {
            return Err(IngestError::ManifestSchema {
                path: field("height_px"),
                message: "height must be positive".to_string(),
            });
        }
        if kind == AssetKind::Figure && a.media_path.is_none() {
            return Err(IngestError::ManifestSchema {
                path: field("media_path"),
                message: "figures require a media file".to_string(),
            });
        }
        if kind == AssetKind::Table && a.media_path.is_none() && a.cells.is_none() {
            return Err(IngestError::ManifestSchema {
                path: field("cells"),
                message: "tables require either a media file or a cell grid".to_string(),
            });
        }
        let media_path = a.media_path.map(|p| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        });
        if let Some(p) = &media_path {
            if !p.exists() {
                missing.push(p.clone());
            }
        }
        if a.caption.trim().is_empty() {
            warnings.push(Warning::new(
                "ingest",
                format!("asset {:?} has an empty caption", a.id),
            ));
        }
        assets.insert(
            a.id.clone(),
            Asset {
                id: a.id,
                kind,
                caption: normalize_whitespace(&a.caption),
                width_px: a.width_px,
                height_px: a.height_px,
                media_path,
                cells: a.cells,
            },
        );
    }
    if !missing.is_empty() {
        return Err(IngestError::MissingMedia { paths: missing });
    }
    Ok(AssetManifest {
        assets,
        references: raw.references,
        warnings,
    })
}

/// Parse Markdown and attach assets/citations from a manifest in one step.
pub fn ingest_document(
    source: &str,
    manifest: Option<&AssetManifest>,
) -> Result<(DocumentBundle, Vec<Warning>), IngestError> {
    let mut bundle = parse_markdown(source)?;
    let mut warnings = Vec::new();
    if let Some(m) = manifest {
        bundle.assets = m.assets.clone();
        warnings.extend(m.warnings.iter().cloned());
        let (citations, cite_warnings) = extract_citations(source, &m.references);
        bundle.citations = citations;
        warnings.extend(cite_warnings);
    } else {
        let (citations, cite_warnings) = extract_citations(source, &[]);
        bundle.citations = citations;
        warnings.extend(cite_warnings);
    }
    Ok((bundle, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn para(len: usize, seed: &str) -> String {
        // Deterministic filler comfortably above the merge threshold.
        let mut s = String::new();
        while s.chars().count() < len {
            s.push_str(seed);
            s.push(' ');
        }
        s.trim().to_string()
    }

    #[test]
    fn drops_bibliography_and_appendix_sections() {
        let src = format!(
            "# Introduction\n\n{}\n\n# Method\n\n{}\n\n# References\n\n[1] Someone, somewhere, 2020.\n",
            para(40, "intro text"),
            para(40, "method text")
        );
        let bundle = parse_markdown(&src).unwrap();
        assert_eq!(bundle.sections.len(), 2);
        assert_eq!(bundle.sections[0].title, "Introduction");
        assert_eq!(bundle.sections[1].title, "Method");
        assert!(bundle.sections.iter().all(|s| !is_dropped_title(&s.title)));
    }

    #[test]
    fn no_heading_document_becomes_body_section() {
        let src = "just a single paragraph with no heading at all";
        let bundle = parse_markdown(src).unwrap();
        assert_eq!(bundle.title, "Untitled");
        assert_eq!(bundle.sections.len(), 1);
        assert_eq!(bundle.sections[0].title, "Body");
        assert_eq!(bundle.sections[0].group, SectionGroup::Other);
        assert_eq!(bundle.sections[0].paragraphs.len(), 1);
    }

    /// Independent oracle: a line scanner that counts `## ` heading markers
    /// and blank-line-delimited groups, with no knowledge of the parser.
    fn oracle_scan(src: &str) -> Vec<usize> {
        let mut counts = Vec::new();
        let mut in_block = false;
        for line in src.lines() {
            if line.starts_with("## ") {
                counts.push(0);
                in_block = false;
            } else if line.trim().is_empty() {
                in_block = false;
            } else if !in_block {
                if let Some(last) = counts.last_mut() {
                    *last += 1;
                }
                in_block = true;
            }
        }
        counts
    }

    #[test]
    fn six_sections_three_paragraphs_each() {
        let mut src = String::new();
        for s in 1..=6 {
            src.push_str(&format!("## Topic {}\n\n", s));
            for p in 1..=3 {
                src.push_str(&para(30, &format!("section {} block {}", s, p)));
                src.push_str("\n\n");
            }
        }
        let oracle = oracle_scan(&src);
        assert_eq!(oracle, vec![3; 6]);

        let bundle = parse_markdown(&src).unwrap();
        assert_eq!(bundle.sections.len(), 6);
        for (si, section) in bundle.sections.iter().enumerate() {
            assert_eq!(section.index, si + 1);
            assert_eq!(section.paragraphs.len(), oracle[si]);
            for (pi, p) in section.paragraphs.iter().enumerate() {
                assert_eq!(p.id, format!("s{}.p{}", si + 1, pi + 1));
            }
        }
    }

    #[test]
    fn unique_leading_h1_becomes_title() {
        let src = format!(
            "# A Study of Things\n\n## Introduction\n\n{}\n",
            para(40, "opening")
        );
        let bundle = parse_markdown(&src).unwrap();
        assert_eq!(bundle.title, "A Study of Things");
        assert_eq!(bundle.sections.len(), 1);
        assert_eq!(bundle.sections[0].title, "Introduction");
    }

    #[test]
    fn empty_document_is_rejected() {
        assert!(matches!(
            parse_markdown("## Heading Only\n"),
            Err(IngestError::EmptyDocument)
        ));
        assert!(matches!(parse_markdown(""), Err(IngestError::EmptyDocument)));
    }

    #[test]
    fn overlong_heading_is_malformed() {
        let err = parse_markdown("####### Seven\n\nbody text that is long enough\n").unwrap_err();
        assert!(matches!(err, IngestError::MalformedHeading { line_no: 1, .. }));
    }

    #[test]
    fn empty_heading_is_malformed() {
        let err = parse_markdown("##   \n\nbody text that is long enough\n").unwrap_err();
        assert!(matches!(err, IngestError::MalformedHeading { .. }));
    }

    #[test]
    fn short_blocks_merge_into_previous_paragraph() {
        let src = format!("## S\n\n{}\n\ntiny.\n", para(40, "lead"));
        let bundle = parse_markdown(&src).unwrap();
        assert_eq!(bundle.sections[0].paragraphs.len(), 1);
        assert!(bundle.sections[0].paragraphs[0].text.ends_with("tiny."));
    }

    #[test]
    fn classify_matches_hand_built_table() {
        // Oracle: the keyword table applied by hand to a 20-title fixture.
        let fixture: &[(&str, SectionGroup)] = &[
            ("Introduction", SectionGroup::Introduction),
            ("1 Introduction", SectionGroup::Introduction),
            ("Related Work", SectionGroup::RelatedWork),
            ("Background", SectionGroup::RelatedWork),
            ("Background and Related Work", SectionGroup::RelatedWork),
            ("Method", SectionGroup::Methodology),
            ("Methodology", SectionGroup::Methodology),
            ("Our Approach", SectionGroup::Methodology),
            ("Model Architecture", SectionGroup::Methodology),
            ("Proposed Model", SectionGroup::Methodology),
            ("Experiments", SectionGroup::Evaluation),
            ("Experiments and Results", SectionGroup::Evaluation),
            ("Evaluation", SectionGroup::Evaluation),
            ("Ablation Studies", SectionGroup::Evaluation),
            ("Results", SectionGroup::Evaluation),
            ("Conclusion", SectionGroup::Conclusion),
            ("Discussion", SectionGroup::Conclusion),
            ("Limitations", SectionGroup::Conclusion),
            ("X", SectionGroup::Other),
            ("Notation", SectionGroup::Other),
        ];
        assert_eq!(fixture.len(), 20);
        for (title, expected) in fixture {
            assert_eq!(classify_section(title), *expected, "title {:?}", title);
        }
    }

    #[test]
    fn classify_is_total_and_pure_over_fuzz_corpus() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let words = [
            "deep", "related", "intro", "method", "results", "notes", "zz", "Background",
            "Evaluation", "conclusion", "of", "the", "Study",
        ];
        for _ in 0..200 {
            let n = rng.random_range(1..5);
            let title: Vec<&str> = (0..n).map(|_| words[rng.random_range(0..words.len())]).collect();
            let title = title.join(" ");
            let a = classify_section(&title);
            let b = classify_section(&title);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn citation_extraction_matches_bracket_enumeration() {
        let refs: Vec<String> = (1..=5).map(|i| format!("Author {i}. Title {i}.")).collect();

        let (map, warnings) = extract_citations("as shown in [3]", &refs);
        assert_eq!(map.len(), 1);
        assert_eq!(map["[3]"].full_reference, "Author 3. Title 3.");
        assert!(map["[3]"].resolved);
        assert!(warnings.is_empty());

        let (map, _) = extract_citations("no brackets here", &refs);
        assert!(map.is_empty());

        // Oracle: manual enumeration of bracket groups in a small fixture.
        let fixture = "first [1,4] then [2] and again [1]\nheadings are skipped below\n## [5]\n";
        let (map, _) = extract_citations(fixture, &refs);
        let keys: Vec<&str> = map.keys().map(String::as_str).collect();
        assert_eq!(keys, vec!["[1]", "[2]", "[4]"]);

        let (map, warnings) = extract_citations("dangling [9]", &refs);
        assert!(!map["[9]"].resolved);
        assert_eq!(map["[9]"].full_reference, "(unresolved)");
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn manifest_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let png = dir.path().join("fig1.png");
        image::RgbImage::from_pixel(4, 4, image::Rgb([200, 10, 10]))
            .save(&png)
            .unwrap();

        let manifest = serde_json::json!({
            "assets": [
                {"id": "fig1", "kind": "figure", "caption": "A red square", "width_px": 4, "height_px": 4, "media_path": "fig1.png"},
                {"id": "fig2", "kind": "figure", "caption": "Again", "width_px": 4, "height_px": 4, "media_path": "fig1.png"},
                {"id": "fig3", "kind": "figure", "caption": "Thrice", "width_px": 4, "height_px": 4, "media_path": "fig1.png"},
                {"id": "tab1", "kind": "table", "caption": "Numbers", "width_px": 0, "height_px": 0, "cells": [["a", "b"], ["1", "2"]]},
                {"id": "tab2", "kind": "table", "caption": "More", "width_px": 0, "height_px": 0, "cells": [["x"]]},
                {"id": "tab3", "kind": "table", "caption": "Yet more", "width_px": 0, "height_px": 0, "cells": [["y"]]}
            ],
            "references": ["Ref one", "Ref two"]
        });
        let path = dir.path().join("assets.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();

        let loaded = load_asset_manifest(&path).unwrap();
        assert_eq!(loaded.assets.len(), 6);
        assert_eq!(loaded.assets["fig1"].kind, AssetKind::Figure);
        assert_eq!(loaded.assets["tab1"].kind, AssetKind::Table);
        assert_eq!(loaded.references.len(), 2);

        // Empty manifest: pipeline proceeds text-only.
        let empty = dir.path().join("empty.json");
        std::fs::write(&empty, "{}").unwrap();
        assert!(load_asset_manifest(&empty).unwrap().assets.is_empty());

        // Zero width on a figure violates the schema, with a field path.
        let bad = serde_json::json!({
            "assets": [{"id": "f", "kind": "figure", "caption": "c", "width_px": 0, "height_px": 4, "media_path": "fig1.png"}]
        });
        let bad_path = dir.path().join("bad.json");
        std::fs::write(&bad_path, bad.to_string()).unwrap();
        match load_asset_manifest(&bad_path) {
            Err(IngestError::ManifestSchema { path, .. }) => {
                assert_eq!(path, "assets[0].width_px")
            }
            other => panic!("expected schema error, got {:?}", other),
        }

        // Missing media file.
        let gone = serde_json::json!({
            "assets": [{"id": "f", "kind": "figure", "caption": "c", "width_px": 4, "height_px": 4, "media_path": "nope.png"}]
        });
        let gone_path = dir.path().join("gone.json");
        std::fs::write(&gone_path, gone.to_string()).unwrap();
        assert!(matches!(
            load_asset_manifest(&gone_path),
            Err(IngestError::MissingMedia { .. })
        ));
    }

    #[test]
    fn parse_is_deterministic_and_ids_are_unique() {
        let src = format!(
            "# Title Here\n\n## Introduction\n\n{}\n\n{}\n\n## Method\n\n{}\n",
            para(30, "one"),
            para(30, "two"),
            para(30, "three")
        );
        let a = parse_markdown(&src).unwrap();
        let b = parse_markdown(&src).unwrap();
        assert_eq!(a, b);
        let ids: Vec<&str> = a.paragraph_ids().collect();
        let mut dedup = ids.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(ids.len(), dedup.len());
    }

    #[test]
    fn reparse_of_reserialization_is_identity() {
        let src = format!(
            "# A Title\n\n## Introduction\n\n{}\n\nshort tail.\n\n## Results\n\n{}\n\n## Appendix\n\n{}\n",
            para(45, "alpha"),
            para(45, "beta"),
            para(45, "gamma")
        );
        let first = parse_markdown(&src).unwrap();
        let second = parse_markdown(&first.to_markdown()).unwrap();
        assert_eq!(first.title, second.title);
        assert_eq!(first.sections, second.sections);
    }

    #[test]
    fn dropped_section_property_over_random_inputs() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let titles = [
            "Introduction", "References", "Methods", "Appendix A", "Results",
            "Bibliography", "Acknowledgements", "Conclusion", "Notation",
        ];
        for _ in 0..50 {
            let mut src = String::new();
            for _ in 0..rng.random_range(1..6) {
                let t = titles[rng.random_range(0..titles.len())];
                src.push_str(&format!("## {}\n\n{}\n\n", t, para(32, "filler words")));
            }
            match parse_markdown(&src) {
                Ok(bundle) => {
                    for s in &bundle.sections {
                        assert!(!is_dropped_title(&s.title), "survived: {}", s.title);
                    }
                }
                Err(IngestError::EmptyDocument) => {}
                Err(e) => panic!("unexpected error: {e}"),
            }
        }
    }
}

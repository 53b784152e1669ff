//! Discourse-tree model: relation taxonomy, per-section binary trees over
//! paragraph EDUs, validation, canonical JSON serialization, statistics, and
//! the agent-backed section parser with its deterministic fallback.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::gateway::{AgentName, AgentRequest, Gateway, GatewayError};
use crate::ingest::{DocumentBundle, Section, SectionGroup};
use crate::{ValidationReport, Violation, Warning};

#[derive(Debug, Error)]
pub enum DiscourseError {
    #[error("sample is degenerate: {0} has zero variance")]
    DegenerateSample(&'static str),
    #[error("need at least two trees for a correlation report")]
    SampleTooSmall,
}

/// Rhetorical relation between two adjacent spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationLabel {
    Elaboration,
    Explanation,
    Context,
    Purpose,
    Evaluation,
    Organization,
    Joint,
    #[serde(rename = "Same-unit")]
    SameUnit,
}

/// Whether a relation distinguishes a nucleus from a satellite (`NS`) or
/// treats both spans as equally central (`MN`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArityClass {
    NS,
    MN,
}

impl RelationLabel {
    pub const ALL: [RelationLabel; 8] = [
        RelationLabel::Elaboration,
        RelationLabel::Explanation,
        RelationLabel::Context,
        RelationLabel::Purpose,
        RelationLabel::Evaluation,
        RelationLabel::Organization,
        RelationLabel::Joint,
        RelationLabel::SameUnit,
    ];

    pub fn arity_class(self) -> ArityClass {
        match self {
            RelationLabel::Joint | RelationLabel::SameUnit => ArityClass::MN,
            _ => ArityClass::NS,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationLabel::Elaboration => "Elaboration",
            RelationLabel::Explanation => "Explanation",
            RelationLabel::Context => "Context",
            RelationLabel::Purpose => "Purpose",
            RelationLabel::Evaluation => "Evaluation",
            RelationLabel::Organization => "Organization",
            RelationLabel::Joint => "Joint",
            RelationLabel::SameUnit => "Same-unit",
        }
    }

    fn from_str(s: &str) -> Option<Self> {
        RelationLabel::ALL.iter().copied().find(|l| l.as_str() == s)
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which of the two document-ordered children carries the central claim of
/// an NS relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NucleusPosition {
    First,
    Second,
}

/// A node of the binary discourse tree. Children are kept in document
/// order; NS relations additionally record which child is the nucleus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiscourseNode {
    Leaf {
        edu: String,
    },
    Relation {
        label: RelationLabel,
        /// Meaningful for NS relations; fixed to `First` for MN.
        nucleus: NucleusPosition,
        first: Box<DiscourseNode>,
        second: Box<DiscourseNode>,
    },
}

impl DiscourseNode {
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk_leaves(0, &mut |edu, _| out.push(edu));
        out
    }

    fn walk_leaves<'a>(&'a self, depth: usize, visit: &mut impl FnMut(&'a str, usize)) {
        match self {
            DiscourseNode::Leaf { edu } => visit(edu, depth),
            DiscourseNode::Relation { first, second, .. } => {
                first.walk_leaves(depth + 1, visit);
                second.walk_leaves(depth + 1, visit);
            }
        }
    }

    fn relation_count(&self) -> usize {
        match self {
            DiscourseNode::Leaf { .. } => 0,
            DiscourseNode::Relation { first, second, .. } => {
                1 + first.relation_count() + second.relation_count()
            }
        }
    }
}

// Canonical key order: relation, type, nucleus/left, satellite/right.
impl Serialize for DiscourseNode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            DiscourseNode::Leaf { edu } => {
                let mut map = serializer.serialize_map(Some(1))?;
                map.serialize_entry("edu", edu)?;
                map.end()
            }
            DiscourseNode::Relation {
                label,
                nucleus,
                first,
                second,
            } => match label.arity_class() {
                ArityClass::NS => {
                    let (nuc, sat) = match nucleus {
                        NucleusPosition::First => (first, second),
                        NucleusPosition::Second => (second, first),
                    };
                    let mut map = serializer.serialize_map(Some(5))?;
                    map.serialize_entry("relation", label.as_str())?;
                    map.serialize_entry("type", "NS")?;
                    map.serialize_entry("nucleus", nuc)?;
                    map.serialize_entry("satellite", sat)?;
                    map.serialize_entry(
                        "nucleus_position",
                        match nucleus {
                            NucleusPosition::First => "first",
                            NucleusPosition::Second => "second",
                        },
                    )?;
                    map.end()
                }
                ArityClass::MN => {
                    let mut map = serializer.serialize_map(Some(4))?;
                    map.serialize_entry("relation", label.as_str())?;
                    map.serialize_entry("type", "MN")?;
                    map.serialize_entry("left", first)?;
                    map.serialize_entry("right", second)?;
                    map.end()
                }
            },
        }
    }
}

impl<'de> Deserialize<'de> for DiscourseNode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        node_from_value(&value, "root").map_err(|v| {
            D::Error::custom(
                v.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join("; "),
            )
        })
    }
}

const CHILD_KEYS: [&str; 4] = ["nucleus", "satellite", "left", "right"];

/// Decode a JSON node, reporting every structural violation with its path.
fn node_from_value(value: &Value, path: &str) -> Result<DiscourseNode, Vec<Violation>> {
    let viol = |msg: String| {
        vec![Violation {
            path: path.to_string(),
            message: msg,
        }]
    };
    let obj = value
        .as_object()
        .ok_or_else(|| viol("node must be a JSON object".to_string()))?;

    if let Some(edu) = obj.get("edu") {
        let edu = edu
            .as_str()
            .ok_or_else(|| viol("leaf \"edu\" must be a string".to_string()))?;
        return Ok(DiscourseNode::Leaf {
            edu: edu.to_string(),
        });
    }

    let child_keys: Vec<&str> = CHILD_KEYS
        .iter()
        .copied()
        .filter(|k| obj.contains_key(*k))
        .collect();
    let extra_children = obj
        .keys()
        .filter(|k| k.starts_with("child") || k.as_str() == "middle" || k.as_str() == "center")
        .count();
    if child_keys.len() + extra_children != 2 {
        return Err(viol(format!(
            "non-binary node at path {} ({} child keys present)",
            path,
            child_keys.len() + extra_children
        )));
    }

    let label_str = obj
        .get("relation")
        .and_then(Value::as_str)
        .ok_or_else(|| viol("missing \"relation\" string".to_string()))?;
    let label = RelationLabel::from_str(label_str)
        .ok_or_else(|| viol(format!("relation {:?} is not in the taxonomy", label_str)))?;
    let declared_type = obj.get("type").and_then(Value::as_str);

    match label.arity_class() {
        ArityClass::NS => {
            if let Some(t) = declared_type {
                if t != "NS" {
                    return Err(viol(format!(
                        "relation {} is NS but node declares type {:?}",
                        label, t
                    )));
                }
            }
            if child_keys != ["nucleus", "satellite"] {
                return Err(viol(format!(
                    "NS node must have nucleus/satellite children, found {:?}",
                    child_keys
                )));
            }
            let nucleus_position = match obj.get("nucleus_position").and_then(Value::as_str) {
                None | Some("first") => NucleusPosition::First,
                Some("second") => NucleusPosition::Second,
                Some(other) => {
                    return Err(viol(format!(
                        "nucleus_position must be \"first\" or \"second\", got {:?}",
                        other
                    )))
                }
            };
            let nuc = node_from_value(&obj["nucleus"], &format!("{}.nucleus", path))?;
            let sat = node_from_value(&obj["satellite"], &format!("{}.satellite", path))?;
            let (first, second) = match nucleus_position {
                NucleusPosition::First => (nuc, sat),
                NucleusPosition::Second => (sat, nuc),
            };
            Ok(DiscourseNode::Relation {
                label,
                nucleus: nucleus_position,
                first: Box::new(first),
                second: Box::new(second),
            })
        }
        ArityClass::MN => {
            if let Some(t) = declared_type {
                if t != "MN" {
                    return Err(viol(format!(
                        "relation {} is MN but node declares type {:?}",
                        label, t
                    )));
                }
            }
            if child_keys != ["left", "right"] {
                return Err(viol(format!(
                    "MN node must have left/right children, found {:?}",
                    child_keys
                )));
            }
            let left = node_from_value(&obj["left"], &format!("{}.left", path))?;
            let right = node_from_value(&obj["right"], &format!("{}.right", path))?;
            Ok(DiscourseNode::Relation {
                label,
                nucleus: NucleusPosition::First,
                first: Box::new(left),
                second: Box::new(right),
            })
        }
    }
}

/// A validated per-section discourse tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscourseTree {
    pub section_index: usize,
    pub root: DiscourseNode,
    /// Leaf paragraph IDs in document order; redundant with `root` but kept
    /// explicit for inspection and cross-checked by validation.
    pub leaf_order: Vec<String>,
}

impl DiscourseTree {
    pub fn new(section_index: usize, root: DiscourseNode) -> Self {
        let leaf_order = root.leaves().iter().map(|s| s.to_string()).collect();
        DiscourseTree {
            section_index,
            root,
            leaf_order,
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_order.len()
    }
}

/// Validate a typed tree against its section: leaf coverage and order,
/// binarity bookkeeping, and the leaf-order field itself.
pub fn validate_tree(tree: &DiscourseTree, section: &Section) -> ValidationReport {
    let mut report = ValidationReport::default();

    let actual: Vec<&str> = tree.root.leaves();
    if tree.leaf_order.len() != actual.len()
        || tree.leaf_order.iter().map(String::as_str).ne(actual.iter().copied())
    {
        report.push("leaf_order", "leaf_order field does not match the tree's leaves");
    }

    let expected: Vec<&str> = section.paragraphs.iter().map(|p| p.id.as_str()).collect();
    if actual != expected {
        report.push(
            "root",
            format!(
                "leaves {:?} do not equal the section's paragraphs {:?} in document order",
                actual, expected
            ),
        );
    }

    let mut seen = std::collections::BTreeSet::new();
    for edu in &actual {
        if !seen.insert(*edu) {
            report.push("root", format!("duplicate leaf {:?}", edu));
        }
    }

    let relations = tree.root.relation_count();
    if actual.len() != relations + 1 {
        report.push(
            "root",
            format!(
                "{} leaves require exactly {} relation nodes, found {}",
                actual.len(),
                actual.len().saturating_sub(1),
                relations
            ),
        );
    }

    report
}

/// Validate raw agent JSON: structural checks (binarity, taxonomy, NS/MN
/// role consistency) with node paths, then the semantic checks of
/// [`validate_tree`].
pub fn validate_tree_value(value: &Value, section: &Section) -> Result<DiscourseTree, ValidationReport> {
    match node_from_value(value, "root") {
        Ok(root) => {
            let tree = DiscourseTree::new(section.index, root);
            let report = validate_tree(&tree, section);
            if report.is_valid() {
                Ok(tree)
            } else {
                Err(report)
            }
        }
        Err(violations) => Err(ValidationReport { violations }),
    }
}

/// Structural statistics for one tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeStats {
    /// Maximum leaf depth in edges; a single-leaf tree has height 0.
    pub height: usize,
    pub avg_leaf_depth: f64,
    pub relation_count: usize,
    pub relation_histogram: BTreeMap<RelationLabel, usize>,
}

pub fn compute_stats(tree: &DiscourseTree) -> TreeStats {
    let mut depths = Vec::new();
    tree.root.walk_leaves(0, &mut |_, d| depths.push(d));
    let height = depths.iter().copied().max().unwrap_or(0);
    let avg_leaf_depth = if depths.is_empty() {
        0.0
    } else {
        depths.iter().sum::<usize>() as f64 / depths.len() as f64
    };

    let mut histogram = BTreeMap::new();
    fn count(node: &DiscourseNode, hist: &mut BTreeMap<RelationLabel, usize>) {
        if let DiscourseNode::Relation {
            label,
            first,
            second,
            ..
        } = node
        {
            *hist.entry(*label).or_insert(0) += 1;
            count(first, hist);
            count(second, hist);
        }
    }
    count(&tree.root, &mut histogram);

    TreeStats {
        height,
        avg_leaf_depth,
        relation_count: tree.root.relation_count(),
        relation_histogram: histogram,
    }
}

/// Per-group relation proportions across a set of trees. Groups with zero
/// relations are omitted; each histogram sums to 1.
pub fn relation_distribution(
    trees: &[DiscourseTree],
    bundle: &DocumentBundle,
) -> BTreeMap<SectionGroup, BTreeMap<RelationLabel, f64>> {
    let mut counts: BTreeMap<SectionGroup, BTreeMap<RelationLabel, usize>> = BTreeMap::new();
    for tree in trees {
        let Some(section) = bundle.section(tree.section_index) else {
            continue;
        };
        let hist = compute_stats(tree).relation_histogram;
        let entry = counts.entry(section.group).or_default();
        for (label, n) in hist {
            *entry.entry(label).or_insert(0) += n;
        }
    }
    counts
        .into_iter()
        .filter_map(|(group, hist)| {
            let total: usize = hist.values().sum();
            if total == 0 {
                return None;
            }
            let normalized = hist
                .into_iter()
                .map(|(label, n)| (label, n as f64 / total as f64))
                .collect();
            Some((group, normalized))
        })
        .collect()
}

/// Pearson correlations between leaf counts and derived tree measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub leaves_vs_relations: f64,
    pub leaves_vs_height: f64,
    pub leaves_vs_avg_depth: f64,
}

/// Pearson r for integer series, exact at the ±1 endpoints: perfect affine
/// relationships are detected in integer arithmetic so r comes out as
/// exactly 1.0 or -1.0 instead of a rounding neighbour.
pub fn pearson_int(xs: &[i64], ys: &[i64]) -> Result<f64, DiscourseError> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as i128;
    if n < 2 {
        return Err(DiscourseError::SampleTooSmall);
    }
    let sx: i128 = xs.iter().map(|&v| v as i128).sum();
    let sy: i128 = ys.iter().map(|&v| v as i128).sum();
    let sxx: i128 = xs.iter().map(|&v| (v as i128) * (v as i128)).sum();
    let syy: i128 = ys.iter().map(|&v| (v as i128) * (v as i128)).sum();
    let sxy: i128 = xs
        .iter()
        .zip(ys)
        .map(|(&a, &b)| (a as i128) * (b as i128))
        .sum();
    let var_x = n * sxx - sx * sx;
    let var_y = n * syy - sy * sy;
    if var_x == 0 {
        return Err(DiscourseError::DegenerateSample("x"));
    }
    if var_y == 0 {
        return Err(DiscourseError::DegenerateSample("y"));
    }
    let cov = n * sxy - sx * sy;
    if cov * cov == var_x * var_y {
        return Ok(if cov > 0 { 1.0 } else { -1.0 });
    }
    Ok(cov as f64 / ((var_x as f64).sqrt() * (var_y as f64).sqrt()))
}

pub fn pearson_f64(xs: &[f64], ys: &[f64]) -> Result<f64, DiscourseError> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return Err(DiscourseError::SampleTooSmall);
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&a, &b) in xs.iter().zip(ys) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 {
        return Err(DiscourseError::DegenerateSample("x"));
    }
    if vy == 0.0 {
        return Err(DiscourseError::DegenerateSample("y"));
    }
    Ok(cov / (vx.sqrt() * vy.sqrt()))
}

/// Pearson r for (leaves vs relations), (leaves vs height), and
/// (leaves vs average leaf depth) over a tree sample.
pub fn correlation_report(trees: &[DiscourseTree]) -> Result<CorrelationReport, DiscourseError> {
    if trees.len() < 2 {
        return Err(DiscourseError::SampleTooSmall);
    }
    let stats: Vec<TreeStats> = trees.iter().map(compute_stats).collect();
    let leaves: Vec<i64> = trees.iter().map(|t| t.leaf_count() as i64).collect();
    let relations: Vec<i64> = stats.iter().map(|s| s.relation_count as i64).collect();
    let heights: Vec<i64> = stats.iter().map(|s| s.height as i64).collect();
    let avg_depths: Vec<f64> = stats.iter().map(|s| s.avg_leaf_depth).collect();
    let leaves_f: Vec<f64> = leaves.iter().map(|&v| v as f64).collect();

    Ok(CorrelationReport {
        leaves_vs_relations: pearson_int(&leaves, &relations)?,
        leaves_vs_height: pearson_int(&leaves, &heights)?,
        leaves_vs_avg_depth: pearson_f64(&leaves_f, &avg_depths)?,
    })
}

/// Deterministic default: a right-leaning all-Elaboration chain with the
/// first paragraph as the ultimate nucleus.
pub fn fallback_tree(section: &Section) -> DiscourseTree {
    fn chain(ids: &[&str]) -> DiscourseNode {
        match ids {
            [only] => DiscourseNode::Leaf {
                edu: (*only).to_string(),
            },
            [head, rest @ ..] => DiscourseNode::Relation {
                label: RelationLabel::Elaboration,
                nucleus: NucleusPosition::First,
                first: Box::new(DiscourseNode::Leaf {
                    edu: (*head).to_string(),
                }),
                second: Box::new(chain(rest)),
            },
            [] => unreachable!("sections passed downstream always have paragraphs"),
        }
    }
    let ids: Vec<&str> = section.paragraphs.iter().map(|p| p.id.as_str()).collect();
    DiscourseTree::new(section.index, chain(&ids))
}

/// Outcome of [`parse_section_discourse`].
#[derive(Debug, Clone)]
pub struct SectionDiscourse {
    pub tree: DiscourseTree,
    /// True when agent output never validated and the default chain was used.
    pub used_fallback: bool,
}

/// Ask the discourse-parser agent for a tree over the section's paragraphs.
/// Schema-invalid output goes through the gateway's bounded repair retries;
/// if they are exhausted the right-leaning default tree is returned with a
/// warning flag. Transport failure is the only hard error.
pub fn parse_section_discourse(
    section: &Section,
    gateway: &Gateway,
) -> Result<(SectionDiscourse, Vec<Warning>), GatewayError> {
    let payload = serde_json::json!({
        "section_index": section.index,
        "section_title": section.title,
        "paragraphs": section.paragraphs.iter().map(|p| {
            serde_json::json!({"id": p.id, "text": p.text})
        }).collect::<Vec<_>>(),
    });
    let request = AgentRequest::new(AgentName::DiscourseParser, payload.to_string());
    let result = gateway.call(&request, |value| {
        validate_tree_value(value, section).map_err(|report| {
            report
                .violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        })
    });
    match result {
        Ok(tree) => Ok((
            SectionDiscourse {
                tree,
                used_fallback: false,
            },
            Vec::new(),
        )),
        Err(GatewayError::SchemaFailure { attempts, last_error }) => Ok((
            SectionDiscourse {
                tree: fallback_tree(section),
                used_fallback: true,
            },
            vec![Warning::new(
                "discourse",
                format!(
                    "section {}: agent output failed validation after {} attempts ({}); using default chain",
                    section.index, attempts, last_error
                ),
            )],
        )),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Paragraph, SectionGroup};

    fn section(index: usize, n: usize) -> Section {
        Section {
            index,
            title: format!("Section {}", index),
            group: SectionGroup::Methodology,
            paragraphs: (1..=n)
                .map(|p| Paragraph {
                    id: format!("s{}.p{}", index, p),
                    text: format!("paragraph {} of section {} with enough text", p, index),
                    char_count: 42,
                })
                .collect(),
        }
    }

    fn leaf(id: &str) -> DiscourseNode {
        DiscourseNode::Leaf { edu: id.to_string() }
    }

    fn ns(label: RelationLabel, nucleus: NucleusPosition, a: DiscourseNode, b: DiscourseNode) -> DiscourseNode {
        DiscourseNode::Relation {
            label,
            nucleus,
            first: Box::new(a),
            second: Box::new(b),
        }
    }

    #[test]
    fn taxonomy_arity_classes() {
        use RelationLabel::*;
        for l in [Elaboration, Explanation, Context, Purpose, Evaluation, Organization] {
            assert_eq!(l.arity_class(), ArityClass::NS);
        }
        for l in [Joint, SameUnit] {
            assert_eq!(l.arity_class(), ArityClass::MN);
        }
    }

    #[test]
    fn single_leaf_tree_stats() {
        let tree = DiscourseTree::new(1, leaf("s1.p1"));
        let stats = compute_stats(&tree);
        assert_eq!(stats.height, 0);
        assert_eq!(stats.avg_leaf_depth, 0.0);
        assert_eq!(stats.relation_count, 0);
        assert!(stats.relation_histogram.is_empty());
    }

    #[test]
    fn balanced_four_leaf_stats() {
        let tree = DiscourseTree::new(
            1,
            ns(
                RelationLabel::Joint,
                NucleusPosition::First,
                ns(RelationLabel::Elaboration, NucleusPosition::First, leaf("s1.p1"), leaf("s1.p2")),
                ns(RelationLabel::Explanation, NucleusPosition::First, leaf("s1.p3"), leaf("s1.p4")),
            ),
        );
        let stats = compute_stats(&tree);
        assert_eq!(stats.height, 2);
        assert_eq!(stats.avg_leaf_depth, 2.0);
        assert_eq!(stats.relation_count, 3);
    }

    /// Oracle: an explicit stack walk collecting (leaf, depth) pairs,
    /// independent of the recursive implementation.
    fn depths_by_stack(root: &DiscourseNode) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![(root, 0usize)];
        while let Some((node, d)) = stack.pop() {
            match node {
                DiscourseNode::Leaf { .. } => out.push(d),
                DiscourseNode::Relation { first, second, .. } => {
                    stack.push((second, d + 1));
                    stack.push((first, d + 1));
                }
            }
        }
        out
    }

    #[test]
    fn right_leaning_five_chain_stats_match_depth_walk_oracle() {
        let sec = section(1, 5);
        let tree = fallback_tree(&sec);
        let oracle = depths_by_stack(&tree.root);
        assert_eq!(oracle.iter().copied().max().unwrap(), 4);
        let expected_avg = oracle.iter().sum::<usize>() as f64 / oracle.len() as f64;

        let stats = compute_stats(&tree);
        assert_eq!(stats.height, 4);
        assert_eq!(stats.avg_leaf_depth, expected_avg);
        assert_eq!(stats.avg_leaf_depth, 2.8); // (1+2+3+4+4)/5
        assert_eq!(stats.relation_count, 4);
        assert_eq!(stats.relation_histogram[&RelationLabel::Elaboration], 4);
    }

    #[test]
    fn fallback_tree_always_validates_clean() {
        for n in 1..=8 {
            let sec = section(3, n);
            let tree = fallback_tree(&sec);
            let report = validate_tree(&tree, &sec);
            assert!(report.is_valid(), "n={}: {:?}", n, report);
        }
    }

    #[test]
    fn two_paragraph_section_forces_single_relation() {
        let sec = section(2, 2);
        let tree = fallback_tree(&sec);
        match &tree.root {
            DiscourseNode::Relation { first, second, .. } => {
                assert_eq!(first.leaves(), vec!["s2.p1"]);
                assert_eq!(second.leaves(), vec!["s2.p2"]);
            }
            _ => panic!("expected a relation root"),
        }
        assert_eq!(compute_stats(&tree).relation_count, 1);
    }

    #[test]
    fn validation_flags_wrong_leaf_order() {
        let sec = section(1, 3);
        let tree = DiscourseTree::new(
            1,
            ns(
                RelationLabel::Elaboration,
                NucleusPosition::First,
                leaf("s1.p2"),
                ns(RelationLabel::Elaboration, NucleusPosition::First, leaf("s1.p1"), leaf("s1.p3")),
            ),
        );
        let report = validate_tree(&tree, &sec);
        assert!(!report.is_valid());
        assert!(report.violations.iter().any(|v| v.message.contains("document order")));
    }

    #[test]
    fn valid_three_leaf_tree_has_empty_report() {
        let sec = section(1, 3);
        let tree = DiscourseTree::new(
            1,
            ns(
                RelationLabel::Context,
                NucleusPosition::Second,
                leaf("s1.p1"),
                ns(RelationLabel::Joint, NucleusPosition::First, leaf("s1.p2"), leaf("s1.p3")),
            ),
        );
        assert!(validate_tree(&tree, &sec).is_valid());
    }

    #[test]
    fn non_binary_json_node_is_reported_with_path() {
        let sec = section(1, 3);
        let value = serde_json::json!({
            "relation": "Elaboration",
            "type": "NS",
            "nucleus": {"edu": "s1.p1"},
            "satellite": {"edu": "s1.p2"},
            "child3": {"edu": "s1.p3"}
        });
        let report = validate_tree_value(&value, &sec).unwrap_err();
        assert!(report.violations[0].message.contains("non-binary node at path root"));
    }

    #[test]
    fn unknown_relation_is_rejected() {
        let sec = section(1, 2);
        let value = serde_json::json!({
            "relation": "Banter",
            "type": "NS",
            "nucleus": {"edu": "s1.p1"},
            "satellite": {"edu": "s1.p2"}
        });
        let report = validate_tree_value(&value, &sec).unwrap_err();
        assert!(report.violations[0].message.contains("taxonomy"));
    }

    #[test]
    fn type_mismatch_is_rejected() {
        let sec = section(1, 2);
        let value = serde_json::json!({
            "relation": "Joint",
            "type": "NS",
            "nucleus": {"edu": "s1.p1"},
            "satellite": {"edu": "s1.p2"}
        });
        assert!(validate_tree_value(&value, &sec).is_err());
    }

    #[test]
    fn json_round_trip_is_identity_and_byte_stable() {
        let sec = section(4, 4);
        let tree = DiscourseTree::new(
            4,
            ns(
                RelationLabel::Explanation,
                NucleusPosition::Second,
                ns(RelationLabel::SameUnit, NucleusPosition::First, leaf("s4.p1"), leaf("s4.p2")),
                ns(RelationLabel::Purpose, NucleusPosition::First, leaf("s4.p3"), leaf("s4.p4")),
            ),
        );
        let json = serde_json::to_string(&tree).unwrap();
        let back: DiscourseTree = serde_json::from_str(&json).unwrap();
        assert_eq!(tree, back);
        assert_eq!(json, serde_json::to_string(&back).unwrap());
        // Canonical key order on the wire.
        let start = json.find("\"relation\"").unwrap();
        let ty = json.find("\"type\"").unwrap();
        assert!(start < ty);
    }

    #[test]
    fn satellite_first_round_trips_through_nucleus_position() {
        let sec = section(1, 2);
        let tree = DiscourseTree::new(
            1,
            ns(RelationLabel::Context, NucleusPosition::Second, leaf("s1.p1"), leaf("s1.p2")),
        );
        assert!(validate_tree(&tree, &sec).is_valid());
        let json = serde_json::to_value(&tree).unwrap();
        assert_eq!(json["root"]["nucleus"]["edu"], "s1.p2");
        assert_eq!(json["root"]["nucleus_position"], "second");
        let back: DiscourseTree = serde_json::from_value(json).unwrap();
        assert_eq!(back.leaf_order, vec!["s1.p1", "s1.p2"]);
    }

    #[test]
    fn distribution_normalizes_per_group() {
        let mut bundle = crate::ingest::parse_markdown(
            "## Methodology\n\naaaaaaaaaaaaaaaaaaaaaaaa\n\nbbbbbbbbbbbbbbbbbbbbbbbb\n\n## Results\n\ncccccccccccccccccccccccc\n\ndddddddddddddddddddddddd\n\neeeeeeeeeeeeeeeeeeeeeeee\n",
        )
        .unwrap();
        bundle.sections[0].group = SectionGroup::Methodology;
        bundle.sections[1].group = SectionGroup::Evaluation;

        let t1 = fallback_tree(&bundle.sections[0]); // 1 Elaboration
        let t2 = DiscourseTree::new(
            2,
            ns(
                RelationLabel::Joint,
                NucleusPosition::First,
                leaf("s2.p1"),
                ns(RelationLabel::Evaluation, NucleusPosition::First, leaf("s2.p2"), leaf("s2.p3")),
            ),
        );
        let dist = relation_distribution(&[t1, t2], &bundle);
        assert_eq!(dist[&SectionGroup::Methodology][&RelationLabel::Elaboration], 1.0);
        let eval = &dist[&SectionGroup::Evaluation];
        assert_eq!(eval[&RelationLabel::Joint], 0.5);
        assert_eq!(eval[&RelationLabel::Evaluation], 0.5);
        let sum: f64 = eval.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);

        assert!(relation_distribution(&[], &bundle).is_empty());
    }

    #[test]
    fn chain_correlations_are_exactly_one() {
        let trees: Vec<DiscourseTree> = [2usize, 4, 8]
            .iter()
            .map(|&n| fallback_tree(&section(1, n)))
            .collect();
        // Oracle: heights of chains are leaves-1, so (2,1),(4,3),(8,7) is
        // affine and Pearson r must be exactly 1.0.
        let report = correlation_report(&trees).unwrap();
        assert_eq!(report.leaves_vs_relations, 1.0);
        assert_eq!(report.leaves_vs_height, 1.0);

        let trees: Vec<DiscourseTree> = [2usize, 3, 5]
            .iter()
            .map(|&n| fallback_tree(&section(1, n)))
            .collect();
        assert_eq!(correlation_report(&trees).unwrap().leaves_vs_relations, 1.0);
    }

    #[test]
    fn same_size_sample_is_degenerate() {
        let trees: Vec<DiscourseTree> = (1..=3).map(|i| fallback_tree(&section(i, 4))).collect();
        assert!(matches!(
            correlation_report(&trees),
            Err(DiscourseError::DegenerateSample(_))
        ));
    }
}

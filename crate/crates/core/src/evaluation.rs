//! Comparison of the automatic network against the curated one, annotation
//! worksheets and the error-cascade arithmetic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linkage::AliasDictionary;
use crate::network::WeightedGraph;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot sample {requested} connections from {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("worksheet row {row}: {message}")]
    Uncategorized { row: usize, message: String },
    #[error("worksheet row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Undirected edge as a sorted name pair.
pub type Edge = (String, String);

fn sorted_edge(a: String, b: String) -> Edge {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NetworkDiff {
    pub missing_edges: Vec<Edge>,
    pub extra_edges: Vec<Edge>,
    pub shared_edges: Vec<Edge>,
}

fn canonical_edges(g: &WeightedGraph, aliases: Option<&AliasDictionary>) -> BTreeSet<Edge> {
    let name = |label: &str| match aliases {
        None => label.to_string(),
        Some(dict) => dict.resolve(label).map(str::to_string).unwrap_or_else(|| {
            log::warn!("label {label:?} not in the alias dictionary, kept verbatim");
            label.to_string()
        }),
    };
    g.edges()
        .filter_map(|(u, v, _)| {
            let (a, b) = (name(u), name(v));
            (a != b).then(|| sorted_edge(a, b))
        })
        .collect()
}

/// Edge-set comparison after mapping both graphs' labels to canonical forms.
pub fn diff_networks(auto: &WeightedGraph, manual: &WeightedGraph, aliases: Option<&AliasDictionary>) -> NetworkDiff {
    let a = canonical_edges(auto, aliases);
    let m = canonical_edges(manual, aliases);
    NetworkDiff {
        missing_edges: m.difference(&a).cloned().collect(),
        extra_edges: a.difference(&m).cloned().collect(),
        shared_edges: m.intersection(&a).cloned().collect(),
    }
}

/// Uniform sample of `k` edges without replacement, in sampled order.
pub fn sample_connections(edges: &[Edge], k: usize, seed: u64) -> Result<Vec<Edge>, EvalError> {
    if k > edges.len() {
        return Err(EvalError::SampleTooLarge {
            requested: k,
            available: edges.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, edges.len(), k)
        .into_iter()
        .map(|i| edges[i].clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    NotDetectableInText,
    CorruptedByTextRecognition,
    #[serde(rename = "NotDetectedByNER")]
    NotDetectedByNer,
    NotLinkableToCorrectVariant,
    FailedToLinkToCorrectVariant,
    Correct,
    DirectConnectionFound,
    PossibleIndirectConnection,
    NoEvidenceOfConnection,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Missing,
    Extra,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::NotDetectableInText,
        Category::CorruptedByTextRecognition,
        Category::NotDetectedByNer,
        Category::NotLinkableToCorrectVariant,
        Category::FailedToLinkToCorrectVariant,
        Category::Correct,
        Category::DirectConnectionFound,
        Category::PossibleIndirectConnection,
        Category::NoEvidenceOfConnection,
        Category::Error,
    ];

    pub fn side(self) -> Side {
        match self {
            Category::DirectConnectionFound
            | Category::PossibleIndirectConnection
            | Category::NoEvidenceOfConnection
            | Category::Error => Side::Extra,
            _ => Side::Missing,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::NotDetectableInText => "NotDetectableInText",
            Category::CorruptedByTextRecognition => "CorruptedByTextRecognition",
            Category::NotDetectedByNer => "NotDetectedByNER",
            Category::NotLinkableToCorrectVariant => "NotLinkableToCorrectVariant",
            Category::FailedToLinkToCorrectVariant => "FailedToLinkToCorrectVariant",
            Category::Correct => "Correct",
            Category::DirectConnectionFound => "DirectConnectionFound",
            Category::PossibleIndirectConnection => "PossibleIndirectConnection",
            Category::NoEvidenceOfConnection => "NoEvidenceOfConnection",
            Category::Error => "Error",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Correct,
    Wrong,
    NotApplicable,
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "correct" => Ok(Verdict::Correct),
            "wrong" => Ok(Verdict::Wrong),
            "notapplicable" | "n/a" | "na" => Ok(Verdict::NotApplicable),
            _ => Err(format!("unknown verdict {s:?}")),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Correct => "Correct",
            Verdict::Wrong => "Wrong",
            Verdict::NotApplicable => "NotApplicable",
        })
    }
}

/// One worksheet line. On the missing side every line judges one endpoint
/// `entity` of a sampled edge. On the extra side, lines with an empty `entity`
/// judge the connection itself and lines naming an entity carry that person's
/// KB-link and record-linkage verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WorksheetRow {
    pub edge_u: String,
    pub edge_v: String,
    pub entity: String,
    pub witness_docs: Vec<String>,
    pub category: Option<Category>,
    pub kb_link_verdict: Option<Verdict>,
    pub linkage_verdict: Option<Verdict>,
    pub note: String,
}

#[derive(Serialize, Deserialize)]
struct RawRow {
    edge_u: String,
    edge_v: String,
    entity: String,
    witness_docs: String,
    category: String,
    kb_link_verdict: String,
    linkage_verdict: String,
    note: String,
}

fn witnesses_for(edge: &Edge, witnesses: &BTreeMap<Edge, Vec<String>>) -> Vec<String> {
    witnesses.get(edge).cloned().unwrap_or_default()
}

/// Blank rows for sampled missing edges, one per endpoint.
pub fn missing_worksheet(sample: &[Edge], witnesses: &BTreeMap<Edge, Vec<String>>) -> Vec<WorksheetRow> {
    sample
        .iter()
        .flat_map(|e| {
            let docs = witnesses_for(e, witnesses);
            [&e.0, &e.1].map(|entity| WorksheetRow {
                edge_u: e.0.clone(),
                edge_v: e.1.clone(),
                entity: entity.clone(),
                witness_docs: docs.clone(),
                ..Default::default()
            })
        })
        .collect()
}

/// Blank rows for sampled extra edges, then one review row per distinct
/// entity (at its first appearance).
pub fn extra_worksheet(sample: &[Edge], witnesses: &BTreeMap<Edge, Vec<String>>) -> Vec<WorksheetRow> {
    let mut rows: Vec<WorksheetRow> = sample
        .iter()
        .map(|e| WorksheetRow {
            edge_u: e.0.clone(),
            edge_v: e.1.clone(),
            witness_docs: witnesses_for(e, witnesses),
            ..Default::default()
        })
        .collect();
    let mut seen = BTreeSet::new();
    for e in sample {
        for entity in [&e.0, &e.1] {
            if seen.insert(entity.clone()) {
                rows.push(WorksheetRow {
                    edge_u: e.0.clone(),
                    edge_v: e.1.clone(),
                    entity: entity.clone(),
                    witness_docs: witnesses_for(e, witnesses),
                    ..Default::default()
                });
            }
        }
    }
    rows
}

pub fn write_worksheet<W: Write>(w: W, rows: &[WorksheetRow]) -> Result<(), EvalError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(RawRow {
            edge_u: r.edge_u.clone(),
            edge_v: r.edge_v.clone(),
            entity: r.entity.clone(),
            witness_docs: r.witness_docs.join(";"),
            category: r.category.map(|c| c.to_string()).unwrap_or_default(),
            kb_link_verdict: r.kb_link_verdict.map(|v| v.to_string()).unwrap_or_default(),
            linkage_verdict: r.linkage_verdict.map(|v| v.to_string()).unwrap_or_default(),
            note: r.note.clone(),
        })?;
    }
    if rows.is_empty() {
        out.write_record([
            "edge_u",
            "edge_v",
            "entity",
            "witness_docs",
            "category",
            "kb_link_verdict",
            "linkage_verdict",
            "note",
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn optional<T: FromStr<Err = String>>(s: &str, row: usize) -> Result<Option<T>, EvalError> {
    if s.trim().is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|message| EvalError::MalformedRow { row, message })
}

/// Read a worksheet; `row` numbers in errors count the header as row 1.
pub fn read_worksheet<R: Read>(r: R) -> Result<Vec<WorksheetRow>, EvalError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, raw) in rdr.deserialize::<RawRow>().enumerate() {
        let row = i + 2;
        let raw = raw.map_err(|e| EvalError::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        out.push(WorksheetRow {
            category: optional(&raw.category, row)?,
            kb_link_verdict: optional(&raw.kb_link_verdict, row)?,
            linkage_verdict: optional(&raw.linkage_verdict, row)?,
            witness_docs: raw
                .witness_docs
                .split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect(),
            edge_u: raw.edge_u,
            edge_v: raw.edge_v,
            entity: raw.entity,
            note: raw.note,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageAccuracy {
    pub stage: String,
    pub entering: usize,
    pub correct: usize,
    pub failed: usize,
    /// Entities leaving the stage without being judged (no correct variant
    /// exists to link to).
    pub excluded: usize,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRow {
    pub source: String,
    pub target: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSummary {
    pub category_counts: BTreeMap<String, usize>,
    pub sampled_entities: usize,
    pub stages: Vec<StageAccuracy>,
    /// Correct entities over those detectable in text.
    pub overall_accuracy: Option<f64>,
    pub sampled_connections: usize,
    /// Direct connections only.
    pub meaningful_low: Option<f64>,
    /// Direct plus possible indirect connections.
    pub meaningful_high: Option<f64>,
    pub kb_link_accuracy: Option<f64>,
    pub linkage_check_accuracy: Option<f64>,
    pub flow: Vec<FlowRow>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn verdict_accuracy<'a>(verdicts: impl Iterator<Item = Option<Verdict>> + 'a) -> Option<f64> {
    let (mut ok, mut judged) = (0, 0);
    for v in verdicts.flatten() {
        match v {
            Verdict::Correct => {
                ok += 1;
                judged += 1;
            }
            Verdict::Wrong => judged += 1,
            Verdict::NotApplicable => {}
        }
    }
    ratio(ok, judged)
}

/// Tally filled worksheets. The missing side is evaluated as a cascade
/// (text recognition, NER, record linkage), each stage judged on what the
/// previous one passed.
pub fn summarize_annotations(missing: &[WorksheetRow], extra: &[WorksheetRow]) -> Result<AnnotationSummary, EvalError> {
    let mut counts: BTreeMap<Category, usize> = BTreeMap::new();
    for (i, r) in missing.iter().enumerate() {
        let row = i + 2;
        match r.category {
            None => {
                return Err(EvalError::Uncategorized {
                    row,
                    message: format!("entity {:?} of missing edge has no category", r.entity),
                })
            }
            Some(c) if c.side() != Side::Missing => {
                return Err(EvalError::MalformedRow {
                    row,
                    message: format!("category {c} belongs to extra connections"),
                })
            }
            Some(c) => *counts.entry(c).or_default() += 1,
        }
    }
    let mut entity_rows = Vec::new();
    for (i, r) in extra.iter().enumerate() {
        let row = i + 2;
        if !r.entity.is_empty() {
            if r.kb_link_verdict.is_none() {
                return Err(EvalError::Uncategorized {
                    row,
                    message: format!("entity {:?} has no KB-link verdict", r.entity),
                });
            }
            entity_rows.push(r);
            continue;
        }
        match r.category {
            None => {
                return Err(EvalError::Uncategorized {
                    row,
                    message: format!("extra edge ({}, {}) has no category", r.edge_u, r.edge_v),
                })
            }
            Some(c) if c.side() != Side::Extra => {
                return Err(EvalError::MalformedRow {
                    row,
                    message: format!("category {c} belongs to missing connections"),
                })
            }
            Some(c) => *counts.entry(c).or_default() += 1,
        }
    }

    let n = |c: Category| counts.get(&c).copied().unwrap_or(0);
    let sampled = missing.len();
    let tr_in = sampled - n(Category::NotDetectableInText);
    let tr_fail = n(Category::CorruptedByTextRecognition);
    let ner_in = tr_in - tr_fail;
    let ner_fail = n(Category::NotDetectedByNer);
    let rl_in = ner_in - ner_fail;
    let rl_fail = n(Category::FailedToLinkToCorrectVariant);
    let rl_excluded = n(Category::NotLinkableToCorrectVariant);
    let correct = n(Category::Correct);
    debug_assert_eq!(rl_in, correct + rl_fail + rl_excluded);

    let stages = vec![
        StageAccuracy {
            stage: "text_recognition".into(),
            entering: tr_in,
            correct: ner_in,
            failed: tr_fail,
            excluded: 0,
            accuracy: ratio(ner_in, tr_in),
        },
        StageAccuracy {
            stage: "ner".into(),
            entering: ner_in,
            correct: rl_in,
            failed: ner_fail,
            excluded: 0,
            accuracy: ratio(rl_in, ner_in),
        },
        StageAccuracy {
            stage: "record_linkage".into(),
            entering: rl_in,
            correct,
            failed: rl_fail,
            excluded: rl_excluded,
            accuracy: ratio(correct, rl_in - rl_excluded),
        },
    ];

    let flow_row = |s: &str, t: Category, c: usize| FlowRow {
        source: s.into(),
        target: t.name().into(),
        count: c,
    };
    let pass = |s: &str, t: &str, c: usize| FlowRow {
        source: s.into(),
        target: t.into(),
        count: c,
    };
    let flow = vec![
        flow_row(
            "sampled",
            Category::NotDetectableInText,
            n(Category::NotDetectableInText),
        ),
        pass("sampled", "text_recognition", tr_in),
        flow_row("text_recognition", Category::CorruptedByTextRecognition, tr_fail),
        pass("text_recognition", "ner", ner_in),
        flow_row("ner", Category::NotDetectedByNer, ner_fail),
        pass("ner", "record_linkage", rl_in),
        flow_row("record_linkage", Category::NotLinkableToCorrectVariant, rl_excluded),
        flow_row("record_linkage", Category::FailedToLinkToCorrectVariant, rl_fail),
        flow_row("record_linkage", Category::Correct, correct),
    ];

    let connections = extra.len() - entity_rows.len();
    let direct = n(Category::DirectConnectionFound);
    let indirect = n(Category::PossibleIndirectConnection);
    Ok(AnnotationSummary {
        category_counts: counts.iter().map(|(c, k)| (c.name().to_string(), *k)).collect(),
        sampled_entities: sampled,
        stages,
        overall_accuracy: ratio(correct, tr_in),
        sampled_connections: connections,
        meaningful_low: ratio(direct, connections),
        meaningful_high: ratio(direct + indirect, connections),
        kb_link_accuracy: verdict_accuracy(entity_rows.iter().map(|r| r.kb_link_verdict)),
        linkage_check_accuracy: verdict_accuracy(entity_rows.iter().map(|r| r.linkage_verdict)),
        flow,
    })
}

impl AnnotationSummary {
    /// Flow rows ending in a terminal category, which partition the sample.
    pub fn terminal_flow(&self) -> impl Iterator<Item = &FlowRow> {
        self.flow.iter().filter(|r| r.target.parse::<Category>().is_ok())
    }

    pub fn write_flow_csv<W: Write>(&self, w: W) -> Result<(), EvalError> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.flow {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkage::Cluster;

    fn e(a: &str, b: &str) -> Edge {
        sorted_edge(a.into(), b.into())
    }

    fn graph(edges: &[(&str, &str)]) -> WeightedGraph {
        let mut g = WeightedGraph::new();
        for (u, v) in edges {
            g.add_weight(u, v, 1);
        }
        g
    }

    #[test]
    fn diff_examples() {
        let d = diff_networks(
            &graph(&[("A", "B"), ("B", "C")]),
            &graph(&[("A", "B"), ("C", "D")]),
            None,
        );
        assert_eq!(d.missing_edges, vec![e("C", "D")]);
        assert_eq!(d.extra_edges, vec![e("B", "C")]);
        assert_eq!(d.shared_edges, vec![e("A", "B")]);

        let g = graph(&[("A", "B"), ("B", "C")]);
        let same = diff_networks(&g, &g, None);
        assert!(same.missing_edges.is_empty() && same.extra_edges.is_empty());
    }

    #[test]
    fn diff_resolves_aliases() {
        let aliases = AliasDictionary::from_clusters(vec![Cluster {
            canonical: "Sybren Valkema".into(),
            aliases: vec!["Iep Valkema".into()],
        }]);
        let auto = graph(&[("Sybren Valkema", "Harvey Littleton")]);
        let manual = graph(&[("Iep Valkema", "Harvey Littleton"), ("Kea Verwey", "Sybren Valkema")]);
        let d = diff_networks(&auto, &manual, Some(&aliases));
        assert_eq!(d.shared_edges, vec![e("Harvey Littleton", "Sybren Valkema")]);
        assert_eq!(d.missing_edges, vec![e("Kea Verwey", "Sybren Valkema")]);
        assert!(d.extra_edges.is_empty());
    }

    fn edges(n: usize) -> Vec<Edge> {
        (0..n).map(|i| e(&format!("a{i:03}"), &format!("b{i:03}"))).collect()
    }

    #[test]
    fn sampling_examples() {
        let pool = edges(200);
        let a = sample_connections(&pool, 88, 42).unwrap();
        assert_eq!(a, sample_connections(&pool, 88, 42).unwrap());
        assert_eq!(a.iter().collect::<BTreeSet<_>>().len(), 88);
        assert_eq!(sample_connections(&pool, 25, 7).unwrap().len(), 25);

        let mut full = sample_connections(&pool[..30], 30, 1).unwrap();
        full.sort();
        assert_eq!(full, pool[..30]);

        match sample_connections(&pool[..3], 4, 0) {
            Err(EvalError::SampleTooLarge {
                requested: 4,
                available: 3,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sampling_is_uniform() {
        let pool = edges(20);
        let (k, trials) = (5usize, 2000u64);
        let mut hits: BTreeMap<Edge, usize> = BTreeMap::new();
        for seed in 0..trials {
            for edge in sample_connections(&pool, k, seed).unwrap() {
                *hits.entry(edge).or_default() += 1;
            }
        }
        let p = k as f64 / pool.len() as f64;
        let mean = trials as f64 * p;
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        for edge in &pool {
            let c = hits.get(edge).copied().unwrap_or(0) as f64;
            assert!(
                (c - mean).abs() <= 3.0 * sd,
                "{edge:?} drawn {c} times, expected {mean}"
            );
        }
    }

    fn filled(cat: Category, n: usize) -> Vec<WorksheetRow> {
        (0..n)
            .map(|i| WorksheetRow {
                edge_u: format!("u{i}"),
                edge_v: format!("v{i}"),
                entity: format!("u{i}"),
                category: Some(cat),
                ..Default::default()
            })
            .collect()
    }

    #[test]
    fn all_correct_is_perfect() {
        let s = summarize_annotations(&filled(Category::Correct, 10), &[]).unwrap();
        assert!(s.stages.iter().all(|st| st.accuracy == Some(1.0)));
        assert_eq!(s.overall_accuracy, Some(1.0));
        assert_eq!(s.meaningful_low, None);
    }

    #[test]
    fn text_recognition_stage() {
        let mut rows = filled(Category::CorruptedByTextRecognition, 37);
        rows.extend(filled(Category::Correct, 83));
        let s = summarize_annotations(&rows, &[]).unwrap();
        assert!((s.stages[0].accuracy.unwrap() - 83.0 / 120.0).abs() < 1e-12);
        assert_eq!(s.terminal_flow().map(|r| r.count).sum::<usize>(), 120);
    }

    #[test]
    fn uncategorized_rows_are_named() {
        let mut rows = filled(Category::Correct, 3);
        rows[1].category = None;
        match summarize_annotations(&rows, &[]) {
            Err(EvalError::Uncategorized { row: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let wrong_side = filled(Category::DirectConnectionFound, 1);
        assert!(matches!(
            summarize_annotations(&wrong_side, &[]),
            Err(EvalError::MalformedRow { .. })
        ));
        let extra_entity = vec![WorksheetRow {
            entity: "X".into(),
            ..Default::default()
        }];
        assert!(matches!(
            summarize_annotations(&[], &extra_entity),
            Err(EvalError::Uncategorized { row: 2, .. })
        ));
    }

    #[test]
    fn worksheet_round_trip() {
        let sample = vec![e("Kea Verwey", "Sybren Valkema"), e("Erwin Eisch", "Sybren Valkema")];
        let witnesses: BTreeMap<Edge, Vec<String>> =
            [(sample[0].clone(), vec!["L001".to_string(), "L007".to_string()])].into();
        let mut rows = missing_worksheet(&sample, &witnesses);
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].witness_docs, ["L001", "L007"]);
        rows[0].category = Some(Category::NotDetectableInText);
        rows[0].note = "signature only, \"K.\"".into();
        let mut buf = Vec::new();
        write_worksheet(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("edge_u,edge_v,entity,witness_docs,category,kb_link_verdict,linkage_verdict,note\n"));
        assert_eq!(read_worksheet(buf.as_slice()).unwrap(), rows);

        let extra = extra_worksheet(&sample, &witnesses);
        // Two edge rows plus three distinct people.
        assert_eq!(extra.len(), 5);
        assert!(extra[..2].iter().all(|r| r.entity.is_empty()));

        let mut empty = Vec::new();
        write_worksheet(&mut empty, &[]).unwrap();
        assert!(read_worksheet(empty.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn bad_category_reports_row() {
        let csv =
            "edge_u,edge_v,entity,witness_docs,category,kb_link_verdict,linkage_verdict,note\na,b,a,,Nonsense,,,\n";
        assert!(matches!(
            read_worksheet(csv.as_bytes()),
            Err(EvalError::MalformedRow { row: 2, .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_graph() -> impl Strategy<Value = WeightedGraph> {
            proptest::collection::vec((0u8..6, 0u8..6), 0..12).prop_map(|es| {
                let mut g = WeightedGraph::new();
                for (u, v) in es {
                    g.add_weight(&format!("p{u}"), &format!("p{v}"), 1);
                }
                g
            })
        }

        proptest! {
            #[test]
            fn swap_swaps_sides(a in random_graph(), b in random_graph()) {
                let d = diff_networks(&a, &b, None);
                let r = diff_networks(&b, &a, None);
                prop_assert_eq!(&d.missing_edges, &r.extra_edges);
                prop_assert_eq!(&d.extra_edges, &r.missing_edges);
                prop_assert_eq!(&d.shared_edges, &r.shared_edges);
            }
        }
    }
}

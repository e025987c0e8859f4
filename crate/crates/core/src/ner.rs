//! Person-name recognition through pluggable recognizers, merged with a
//! recall-oriented union.
//!
//! Offsets are in Unicode scalar values (`char`s), half-open.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Page};

#[derive(Debug, Error)]
pub enum NerError {
    #[error("no recognizers configured")]
    NoRecognizers,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed mention row at line {line}: {message}")]
    MalformedRow { line: usize, message: String },
}

/// Failure of one recognizer on one page. The driver logs and skips it.
#[derive(Debug, Error)]
#[error("recognizer {recognizer} failed on page {page_id}: {message}")]
pub struct RecognizerError {
    pub recognizer: String,
    pub page_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub surface: String,
    pub doc_id: String,
    pub page_id: String,
    pub char_start: usize,
    pub char_end: usize,
    pub recognizer_id: String,
}

impl Mention {
    pub fn len(&self) -> usize {
        self.char_end - self.char_start
    }

    pub fn is_empty(&self) -> bool {
        self.char_end == self.char_start
    }

    /// Spans intersect (page identity is not checked).
    pub fn overlaps(&self, other: &Mention) -> bool {
        self.char_start < other.char_end && other.char_start < self.char_end
    }
}

/// Characters `[start, end)` of `text`, or `None` when out of range.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let b0 = indices.nth(start)?;
    let b1 = if end == start {
        b0
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[b0..b1])
}

pub trait Recognizer: Send + Sync {
    fn id(&self) -> &str;

    /// Person mentions on a page, with offsets into `page.text`.
    fn recognize(&self, page: &Page) -> Result<Vec<Mention>, RecognizerError>;

    /// `false` makes the driver call this recognizer from one thread at a time.
    fn concurrent(&self) -> bool {
        true
    }
}

const LEADING_PUNCT: &[char] = &['(', '[', '"', '\'', '\u{201c}', '\u{2018}', '\u{201e}'];
const TRAILING_PUNCT: &[char] = &[',', ';', ':', '!', '?', ')', ']', '"', '\'', '\u{201d}', '\u{2019}'];

/// Dictionary recognizer. Names match token by token, so any run of
/// whitespace in the text matches a single space in the name; punctuation
/// around the match is ignored. Longest match wins at each position.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    id: String,
    by_first: HashMap<String, Vec<Vec<String>>>,
}

impl Gazetteer {
    pub fn new<I, S>(id: impl Into<String>, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut by_first: HashMap<String, Vec<Vec<String>>> = HashMap::new();
        for name in names {
            let tokens: Vec<String> = name.as_ref().split_whitespace().map(str::to_string).collect();
            if let Some(first) = tokens.first() {
                let entry = by_first.entry(first.clone()).or_default();
                if !entry.contains(&tokens) {
                    entry.push(tokens);
                }
            }
        }
        for v in by_first.values_mut() {
            v.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        }
        Self {
            id: id.into(),
            by_first,
        }
    }

    /// One name per line.
    pub fn from_reader<R: Read>(id: impl Into<String>, reader: R) -> std::io::Result<Self> {
        let mut names = Vec::new();
        for line in BufReader::new(reader).lines() {
            let line = line?;
            if !line.trim().is_empty() {
                names.push(line);
            }
        }
        Ok(Self::new(id, names))
    }

    pub fn is_empty(&self) -> bool {
        self.by_first.is_empty()
    }
}

struct Token<'a> {
    text: &'a str,
    start: usize,
    end: usize,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut pos = 0usize;
    for (byte, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some((b, s)) = start.take() {
                out.push(Token {
                    text: &text[b..byte],
                    start: s,
                    end: pos,
                });
            }
        } else if start.is_none() {
            start = Some((byte, pos));
        }
        pos += 1;
    }
    if let Some((b, s)) = start {
        out.push(Token {
            text: &text[b..],
            start: s,
            end: pos,
        });
    }
    out
}

fn strip_leading(t: &str) -> (&str, usize) {
    let stripped = t.trim_start_matches(LEADING_PUNCT);
    (stripped, t[..t.len() - stripped.len()].chars().count())
}

/// Candidate forms of a name-final token with the number of characters cut
/// from its end.
fn trailing_forms(t: &str) -> Vec<(&str, usize)> {
    let mut forms = vec![(t, 0)];
    let mut cur = t;
    while let Some(c) = cur.chars().last() {
        if !(TRAILING_PUNCT.contains(&c) || c == '.') {
            break;
        }
        cur = &cur[..cur.len() - c.len_utf8()];
        forms.push((cur, forms.len()));
    }
    forms
}

impl Recognizer for Gazetteer {
    fn id(&self) -> &str {
        &self.id
    }

    fn recognize(&self, page: &Page) -> Result<Vec<Mention>, RecognizerError> {
        let tokens = tokenize(&page.text);
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let (first, lead) = strip_leading(tokens[i].text);
            let mut matched = None;
            'names: for candidates in [self.by_first.get(first)].into_iter().flatten().chain(
                trailing_forms(first)
                    .into_iter()
                    .skip(1)
                    .filter_map(|(f, _)| self.by_first.get(f)),
            ) {
                for name in candidates {
                    let n = name.len();
                    if n > 1 && name[0] != first {
                        continue;
                    }
                    if i + n > tokens.len() {
                        continue;
                    }
                    let last_idx = i + n - 1;
                    let interior_ok = (1..n.saturating_sub(1)).all(|k| tokens[i + k].text == name[k]);
                    if !interior_ok {
                        continue;
                    }
                    let last_text = if n == 1 { first } else { tokens[last_idx].text };
                    if let Some((_, cut)) = trailing_forms(last_text).into_iter().find(|(f, _)| *f == name[n - 1]) {
                        matched = Some((n, tokens[i].start + lead, tokens[last_idx].end - cut));
                        break 'names;
                    }
                }
            }
            match matched {
                Some((n, start, end)) => {
                    let surface = char_slice(&page.text, start, end).unwrap_or_default().to_string();
                    out.push(Mention {
                        surface,
                        doc_id: page.doc_id.clone(),
                        page_id: page.page_id.clone(),
                        char_start: start,
                        char_end: end,
                        recognizer_id: self.id.clone(),
                    });
                    i += n;
                }
                None => i += 1,
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportRow {
    pub page_id: String,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    #[serde(rename = "type")]
    pub entity_type: String,
    pub recognizer: String,
}

/// Replays precomputed mentions (e.g. from an external NER model). Only
/// `PER` rows are kept; rows carry their own recognizer id.
#[derive(Debug, Clone, Default)]
pub struct MentionImport {
    id: String,
    rows: HashMap<String, Vec<ImportRow>>,
}

impl MentionImport {
    pub fn new(id: impl Into<String>, rows: Vec<ImportRow>) -> Self {
        let mut by_page: HashMap<String, Vec<ImportRow>> = HashMap::new();
        for r in rows.into_iter().filter(|r| r.entity_type == "PER") {
            by_page.entry(r.page_id.clone()).or_default().push(r);
        }
        Self {
            id: id.into(),
            rows: by_page,
        }
    }

    pub fn from_reader<R: Read>(id: impl Into<String>, reader: R) -> Result<Self, NerError> {
        let mut rows = Vec::new();
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            rows.push(serde_json::from_str(&line).map_err(|e| NerError::MalformedRow {
                line: idx + 1,
                message: e.to_string(),
            })?);
        }
        Ok(Self::new(id, rows))
    }
}

impl Recognizer for MentionImport {
    fn id(&self) -> &str {
        &self.id
    }

    fn recognize(&self, page: &Page) -> Result<Vec<Mention>, RecognizerError> {
        let Some(rows) = self.rows.get(&page.page_id) else {
            return Ok(Vec::new());
        };
        let fail = |message: String| RecognizerError {
            recognizer: self.id.clone(),
            page_id: page.page_id.clone(),
            message,
        };
        rows.iter()
            .map(|r| {
                if r.start >= r.end {
                    return Err(fail(format!("empty span [{}, {})", r.start, r.end)));
                }
                match char_slice(&page.text, r.start, r.end) {
                    Some(s) if s == r.surface => Ok(Mention {
                        surface: r.surface.clone(),
                        doc_id: page.doc_id.clone(),
                        page_id: page.page_id.clone(),
                        char_start: r.start,
                        char_end: r.end,
                        recognizer_id: r.recognizer.clone(),
                    }),
                    Some(s) => Err(fail(format!(
                        "span [{}, {}) is {s:?}, expected {:?}",
                        r.start, r.end, r.surface
                    ))),
                    None => Err(fail(format!("span [{}, {}) out of range", r.start, r.end))),
                }
            })
            .collect()
    }
}

/// Union of all recognizers' mentions. Overlapping spans on the same page are
/// one mention; the longest span survives, ties going to the smaller
/// recognizer id. Sorted by `(doc_id, page_id, char_start)`.
pub fn aggregate_union(per_recognizer: &[Vec<Mention>]) -> Vec<Mention> {
    let mut by_page: BTreeMap<(&str, &str), Vec<&Mention>> = BTreeMap::new();
    for m in per_recognizer.iter().flatten() {
        by_page
            .entry((m.doc_id.as_str(), m.page_id.as_str()))
            .or_default()
            .push(m);
    }
    let mut out = Vec::new();
    for (_, mut ms) in by_page {
        ms.sort_by(|a, b| {
            (a.char_start, a.char_end, &a.recognizer_id, &a.surface).cmp(&(
                b.char_start,
                b.char_end,
                &b.recognizer_id,
                &b.surface,
            ))
        });
        let mut group: Vec<&Mention> = Vec::new();
        let mut group_end = 0usize;
        for m in ms {
            if !group.is_empty() && m.char_start >= group_end {
                out.push(pick_longest(&group).clone());
                group.clear();
            }
            group_end = if group.is_empty() {
                m.char_end
            } else {
                group_end.max(m.char_end)
            };
            group.push(m);
        }
        if !group.is_empty() {
            out.push(pick_longest(&group).clone());
        }
    }
    out
}

fn pick_longest<'a>(group: &[&'a Mention]) -> &'a Mention {
    group
        .iter()
        .copied()
        .min_by(|a, b| {
            b.len()
                .cmp(&a.len())
                .then_with(|| a.recognizer_id.cmp(&b.recognizer_id))
                .then_with(|| a.char_start.cmp(&b.char_start))
                .then_with(|| a.surface.cmp(&b.surface))
        })
        .expect("non-empty group")
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MentionSet {
    pub mentions: Vec<Mention>,
    pub surface_counts: BTreeMap<String, usize>,
}

impl MentionSet {
    pub fn from_mentions(mentions: Vec<Mention>) -> Self {
        let mut surface_counts = BTreeMap::new();
        for m in &mentions {
            *surface_counts.entry(m.surface.clone()).or_insert(0) += 1;
        }
        Self {
            mentions,
            surface_counts,
        }
    }

    pub fn len(&self) -> usize {
        self.mentions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mentions.is_empty()
    }

    pub fn unique_surfaces(&self) -> usize {
        self.surface_counts.len()
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for m in &self.mentions {
            serde_json::to_writer(&mut w, m)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read<R: Read>(reader: R) -> Result<Self, NerError> {
        let mut mentions = Vec::new();
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            mentions.push(serde_json::from_str(&line).map_err(|e| NerError::MalformedRow {
                line: idx + 1,
                message: e.to_string(),
            })?);
        }
        Ok(Self::from_mentions(mentions))
    }
}

fn run_recognizer(r: &dyn Recognizer, page: &Page) -> Vec<Mention> {
    match r.recognize(page) {
        Ok(ms) => ms,
        Err(e) => {
            log::warn!("{e}; page skipped");
            Vec::new()
        }
    }
}

/// Run every recognizer on every page of the correspondence documents and
/// merge per page.
pub fn build_mention_set(documents: &[Document], recognizers: &[&dyn Recognizer]) -> Result<MentionSet, NerError> {
    if recognizers.is_empty() {
        return Err(NerError::NoRecognizers);
    }
    let pages: Vec<&Page> = documents
        .iter()
        .filter(|d| d.is_correspondence)
        .flat_map(|d| d.pages.iter())
        .collect();
    let mut per_page: Vec<Vec<Vec<Mention>>> = vec![Vec::with_capacity(recognizers.len()); pages.len()];
    for r in recognizers {
        let found: Vec<Vec<Mention>> = if r.concurrent() {
            crate::par::map(&pages, |p| run_recognizer(*r, p))
        } else {
            pages.iter().map(|p| run_recognizer(*r, p)).collect()
        };
        for (slot, ms) in per_page.iter_mut().zip(found) {
            slot.push(ms);
        }
    }
    let merged = crate::par::map(&per_page, |lists| aggregate_union(lists));
    let mut mentions: Vec<Mention> = merged.into_iter().flatten().collect();
    mentions.sort_by(|a, b| (&a.doc_id, &a.page_id, a.char_start).cmp(&(&b.doc_id, &b.page_id, b.char_start)));
    Ok(MentionSet::from_mentions(mentions))
}

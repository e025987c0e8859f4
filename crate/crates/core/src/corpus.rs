//! Page ingestion, correspondence selection, modality classification and
//! grouping of pages into documents.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed page record at line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("malformed metadata row {row}: {message}")]
    MalformedMetadata { row: usize, message: String },
    #[error("duplicate page id {0:?}")]
    DuplicateId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Ocr,
    Htr,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Typed,
    HandwrittenOrDrawing,
    #[default]
    Unclassified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub page_id: String,
    pub doc_id: String,
    #[serde(rename = "title", default)]
    pub metadata_title: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub source: Source,
    #[serde(default)]
    pub modality: Modality,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub pages: Vec<Page>,
    pub is_correspondence: bool,
}

/// An ingested corpus. Pages are sorted by `(doc_id, page_id)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub pages: Vec<Page>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_pages: usize,
    pub pages_with_entities: usize,
    pub typed_pages_with_entities: usize,
    pub handwritten_pages_with_entities: usize,
}

/// Keyword rule selecting correspondence by metadata title.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrespondenceFilter {
    keywords: Vec<String>,
}

impl Default for CorrespondenceFilter {
    fn default() -> Self {
        Self::new(["letter", "correspondence"])
    }
}

impl CorrespondenceFilter {
    pub fn new<I, S>(keywords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            keywords: keywords
                .into_iter()
                .map(|k| k.as_ref().trim().to_lowercase())
                .filter(|k| !k.is_empty())
                .collect(),
        }
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn is_correspondence(&self, metadata_title: &str) -> bool {
        let title = metadata_title.to_lowercase();
        self.keywords.iter().any(|k| title.contains(k.as_str()))
    }
}

/// Default-keyword shorthand for [`CorrespondenceFilter::is_correspondence`].
pub fn is_correspondence(metadata_title: &str) -> bool {
    CorrespondenceFilter::default().is_correspondence(metadata_title)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalityConfig {
    /// Minimum fraction of Latin letters among non-whitespace characters.
    pub latin_threshold: f64,
    /// Minimum count of non-whitespace characters.
    pub min_chars: usize,
}

impl Default for ModalityConfig {
    fn default() -> Self {
        Self {
            latin_threshold: 0.5,
            min_chars: 20,
        }
    }
}

fn is_latin_letter(c: char) -> bool {
    if !c.is_alphabetic() {
        return false;
    }
    matches!(c as u32,
        0x0041..=0x005A
        | 0x0061..=0x007A
        | 0x00C0..=0x00D6
        | 0x00D8..=0x00F6
        | 0x00F8..=0x024F
        | 0x1E00..=0x1EFF
        | 0x2C60..=0x2C7F
        | 0xA720..=0xA7FF
        | 0xFB00..=0xFB06)
}

/// Classify a page from the recognized text of the OCR engine.
///
/// A page counts as typed when the engine produced enough Latin script.
/// HTR-sourced pages are handwritten by construction.
pub fn classify_modality(page: &Page, config: &ModalityConfig) -> Modality {
    if page.source == Source::Htr {
        return Modality::HandwrittenOrDrawing;
    }
    let mut total = 0usize;
    let mut latin = 0usize;
    for c in page.text.chars().filter(|c| !c.is_whitespace()) {
        total += 1;
        if is_latin_letter(c) {
            latin += 1;
        }
    }
    if total == 0 || total < config.min_chars {
        return Modality::HandwrittenOrDrawing;
    }
    if latin as f64 / total as f64 >= config.latin_threshold {
        Modality::Typed
    } else {
        Modality::HandwrittenOrDrawing
    }
}

impl Corpus {
    pub fn from_pages(mut pages: Vec<Page>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for p in &pages {
            if !seen.insert(p.page_id.as_str()) {
                return Err(CorpusError::DuplicateId(p.page_id.clone()));
            }
        }
        pages.sort_by(|a, b| (&a.doc_id, &a.page_id).cmp(&(&b.doc_id, &b.page_id)));
        Ok(Self { pages })
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }

    pub fn classify(&mut self, config: &ModalityConfig) {
        crate::par::for_each_mut(&mut self.pages, |p| p.modality = classify_modality(p, config));
    }

    /// Pages with at least one entity, split by modality.
    pub fn stats<'a, I>(&self, pages_with_entities: I) -> CorpusStats
    where
        I: IntoIterator<Item = &'a str>,
    {
        let with: HashSet<&str> = pages_with_entities.into_iter().collect();
        let mut stats = CorpusStats {
            total_pages: self.pages.len(),
            ..Default::default()
        };
        for p in self.pages.iter().filter(|p| with.contains(p.page_id.as_str())) {
            stats.pages_with_entities += 1;
            match p.modality {
                Modality::Typed => stats.typed_pages_with_entities += 1,
                Modality::HandwrittenOrDrawing => stats.handwritten_pages_with_entities += 1,
                Modality::Unclassified => {}
            }
        }
        stats
    }
}

#[derive(Deserialize)]
struct PageRow {
    page_id: Option<String>,
    doc_id: Option<String>,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    source: Source,
    #[serde(default)]
    modality: Modality,
}

/// Read page records (JSON Lines). Blank lines are skipped.
pub fn read_pages<R: Read>(reader: R) -> Result<Vec<Page>, CorpusError> {
    let mut pages = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: PageRow = serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRow {
            line: lineno,
            message: e.to_string(),
        })?;
        let missing = |field: &str| CorpusError::MalformedRow {
            line: lineno,
            message: format!("missing field `{field}`"),
        };
        pages.push(Page {
            page_id: row.page_id.ok_or_else(|| missing("page_id"))?,
            doc_id: row.doc_id.ok_or_else(|| missing("doc_id"))?,
            metadata_title: row.title.unwrap_or_default(),
            text: row.text.unwrap_or_default(),
            source: row.source,
            modality: row.modality,
        });
    }
    Ok(pages)
}

/// Read the `doc_id,title` metadata table.
pub fn read_metadata<R: Read>(reader: R) -> Result<BTreeMap<String, String>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let mut out = BTreeMap::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 2;
        let rec = rec.map_err(|e| CorpusError::MalformedMetadata {
            row,
            message: e.to_string(),
        })?;
        let doc_id = rec.get(0).unwrap_or("").trim();
        if doc_id.is_empty() {
            return Err(CorpusError::MalformedMetadata {
                row,
                message: "empty doc_id".into(),
            });
        }
        out.insert(doc_id.to_string(), rec.get(1).unwrap_or("").to_string());
    }
    Ok(out)
}

/// Ingest page records plus optional metadata. Page-record titles win over
/// metadata titles; metadata only fills pages with an empty title.
/// Modality is reset to `unclassified`.
pub fn ingest_pages(path: &Path, metadata_path: Option<&Path>) -> Result<Corpus, CorpusError> {
    let pages = read_pages(File::open(path)?)?;
    let metadata = match metadata_path {
        Some(p) => read_metadata(File::open(p)?)?,
        None => BTreeMap::new(),
    };
    ingest(pages, &metadata)
}

pub fn ingest(mut pages: Vec<Page>, metadata: &BTreeMap<String, String>) -> Result<Corpus, CorpusError> {
    for p in &mut pages {
        p.modality = Modality::Unclassified;
        if p.metadata_title.is_empty() {
            if let Some(t) = metadata.get(&p.doc_id) {
                p.metadata_title = t.clone();
            }
        }
    }
    Corpus::from_pages(pages)
}

/// One document per distinct `doc_id`, in `doc_id` order.
pub fn group_documents(corpus: &Corpus, filter: &CorrespondenceFilter) -> Vec<Document> {
    let mut groups: BTreeMap<&str, Vec<Page>> = BTreeMap::new();
    for p in &corpus.pages {
        groups.entry(p.doc_id.as_str()).or_default().push(p.clone());
    }
    groups
        .into_iter()
        .map(|(doc_id, mut pages)| {
            pages.sort_by(|a, b| a.page_id.cmp(&b.page_id));
            let is_correspondence = pages.iter().any(|p| filter.is_correspondence(&p.metadata_title));
            Document {
                doc_id: doc_id.to_string(),
                pages,
                is_correspondence,
            }
        })
        .collect()
}

/// Serialized corpus row: a page plus its document-level correspondence flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    #[serde(flatten)]
    pub page: Page,
    pub is_correspondence: bool,
}

pub fn write_corpus<W: Write>(mut w: W, documents: &[Document]) -> std::io::Result<()> {
    for d in documents {
        for p in &d.pages {
            let rec = CorpusRecord {
                page: p.clone(),
                is_correspondence: d.is_correspondence,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Read a corpus written by [`write_corpus`] back into documents.
pub fn read_corpus<R: Read>(reader: R) -> Result<Vec<Document>, CorpusError> {
    let mut docs: BTreeMap<String, Document> = BTreeMap::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRow {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if seen.insert(rec.page.page_id.clone(), idx).is_some() {
            return Err(CorpusError::DuplicateId(rec.page.page_id));
        }
        let doc = docs.entry(rec.page.doc_id.clone()).or_insert_with(|| Document {
            doc_id: rec.page.doc_id.clone(),
            pages: Vec::new(),
            is_correspondence: false,
        });
        doc.is_correspondence |= rec.is_correspondence;
        doc.pages.push(rec.page);
    }
    let mut out: Vec<Document> = docs.into_values().collect();
    for d in &mut out {
        d.pages.sort_by(|a, b| a.page_id.cmp(&b.page_id));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn page(id: &str, doc: &str, title: &str, text: &str) -> Page {
        Page {
            page_id: id.into(),
            doc_id: doc.into(),
            metadata_title: title.into(),
            text: text.into(),
            source: Source::Ocr,
            modality: Modality::Unclassified,
        }
    }

    #[test]
    fn correspondence_keywords() {
        assert!(is_correspondence("Letter from H. Littleton"));
        assert!(!is_correspondence("Drawing, vase study"));
        assert!(is_correspondence("CORRESPONDENCE 1968-1972"));
        let f = CorrespondenceFilter::new(["brief"]);
        assert!(f.is_correspondence("Brief aan Valkema"));
        assert!(!f.is_correspondence("Letter"));
    }

    #[test]
    fn modality_examples() {
        let cfg = ModalityConfig::default();
        let typed = page("p", "d", "", "Dear Mr Valkema, thank you for your letter.");
        assert_eq!(classify_modality(&typed, &cfg), Modality::Typed);
        assert_eq!(
            classify_modality(&page("p", "d", "", ""), &cfg),
            Modality::HandwrittenOrDrawing
        );
        let symbols = page("p", "d", "", "§§ ~~ 3791 ---");
        assert_eq!(classify_modality(&symbols, &cfg), Modality::HandwrittenOrDrawing);
        // enough characters but no Latin script
        let greek = page("p", "d", "", "Αγαπητέ κύριε, σας ευχαριστώ πολύ για την επιστολή");
        assert_eq!(classify_modality(&greek, &cfg), Modality::HandwrittenOrDrawing);
        let short = page("p", "d", "", "Dear Sir");
        assert_eq!(classify_modality(&short, &cfg), Modality::HandwrittenOrDrawing);
    }

    #[test]
    fn htr_pages_stay_handwritten() {
        let mut p = page("p", "d", "", "Dear Mr Valkema, thank you for your letter.");
        p.source = Source::Htr;
        assert_eq!(
            classify_modality(&p, &ModalityConfig::default()),
            Modality::HandwrittenOrDrawing
        );
    }

    #[test]
    fn ingest_counts_and_empty() {
        let data = r#"{"page_id":"p2","doc_id":"b","title":"Letter","text":"x","source":"ocr"}
{"page_id":"p1","doc_id":"a","title":"","text":"y","source":"htr"}

{"page_id":"p3","doc_id":"a","title":"Note","text":"","source":"unknown"}
"#;
        let pages = read_pages(data.as_bytes()).unwrap();
        let corpus = ingest(pages, &BTreeMap::new()).unwrap();
        assert_eq!(corpus.len(), 3);
        let ids: Vec<_> = corpus.pages.iter().map(|p| p.page_id.as_str()).collect();
        assert_eq!(ids, ["p1", "p3", "p2"]);
        assert!(corpus.pages.iter().all(|p| p.modality == Modality::Unclassified));

        let empty = ingest(read_pages("".as_bytes()).unwrap(), &BTreeMap::new()).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn ingest_errors() {
        let dup = "{\"page_id\":\"p1\",\"doc_id\":\"a\"}\n{\"page_id\":\"p1\",\"doc_id\":\"b\"}\n";
        let err = ingest(read_pages(dup.as_bytes()).unwrap(), &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId(ref id) if id == "p1"));

        let bad = "{\"page_id\":\"p1\",\"doc_id\":\"a\"}\n{\"page_id\":\"p2\"}\n";
        match read_pages(bad.as_bytes()).unwrap_err() {
            CorpusError::MalformedRow { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
        let garbage = "not json\n";
        assert!(matches!(
            read_pages(garbage.as_bytes()),
            Err(CorpusError::MalformedRow { line: 1, .. })
        ));
    }

    #[test]
    fn metadata_fills_empty_titles_only() {
        let meta = read_metadata("doc_id,title\na,Letter to Lewis\nb,Brochure\n".as_bytes()).unwrap();
        let pages = vec![page("p1", "a", "", ""), page("p2", "b", "Letter from Lewis", "")];
        let corpus = ingest(pages, &meta).unwrap();
        assert_eq!(corpus.pages[0].metadata_title, "Letter to Lewis");
        assert_eq!(corpus.pages[1].metadata_title, "Letter from Lewis");
    }

    #[test]
    fn grouping() {
        let corpus = Corpus::from_pages(vec![
            page("p1", "a", "Vase", ""),
            page("p2", "a", "Letter enclosure", ""),
            page("p3", "b", "Drawing", ""),
            page("p4", "b", "Drawing", ""),
        ])
        .unwrap();
        let docs = group_documents(&corpus, &CorrespondenceFilter::default());
        assert_eq!(docs.len(), 2);
        assert!(docs.iter().all(|d| d.pages.len() == 2));
        assert!(docs[0].is_correspondence);
        assert!(!docs[1].is_correspondence);
        assert!(docs.iter().all(|d| d.pages.iter().all(|p| p.doc_id == d.doc_id)));

        let single = Corpus::from_pages(vec![page("p1", "a", "", "")]).unwrap();
        assert_eq!(group_documents(&single, &CorrespondenceFilter::default()).len(), 1);
    }

    #[test]
    fn corpus_file_round_trip() {
        let corpus = Corpus::from_pages(vec![page("p1", "a", "Letter", "hi"), page("p2", "b", "x", "")]).unwrap();
        let docs = group_documents(&corpus, &CorrespondenceFilter::default());
        let mut buf = Vec::new();
        write_corpus(&mut buf, &docs).unwrap();
        assert_eq!(read_corpus(buf.as_slice()).unwrap(), docs);
    }

    #[test]
    fn stats_bounds() {
        let mut corpus = Corpus::from_pages(vec![
            page("p1", "a", "", "Dear Mr Valkema, thank you for your letter."),
            page("p2", "a", "", ""),
            page("p3", "b", "", "also"),
        ])
        .unwrap();
        corpus.classify(&ModalityConfig::default());
        let s = corpus.stats(["p1", "p2"]);
        assert_eq!(s.total_pages, 3);
        assert_eq!(s.pages_with_entities, 2);
        assert_eq!(s.typed_pages_with_entities, 1);
        assert_eq!(s.handwritten_pages_with_entities, 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn classification_partitions_pages(texts in proptest::collection::vec(".{0,60}", 0..20)) {
                let pages: Vec<Page> = texts.iter().enumerate()
                    .map(|(i, t)| page(&format!("p{i}"), &format!("d{}", i % 3), "", t))
                    .collect();
                let mut corpus = Corpus::from_pages(pages).unwrap();
                corpus.classify(&ModalityConfig::default());
                let typed = corpus.pages.iter().filter(|p| p.modality == Modality::Typed).count();
                let hw = corpus.pages.iter().filter(|p| p.modality == Modality::HandwrittenOrDrawing).count();
                prop_assert_eq!(typed + hw, corpus.len());
                let docs = group_documents(&corpus, &CorrespondenceFilter::default());
                prop_assert_eq!(docs.iter().map(|d| d.pages.len()).sum::<usize>(), corpus.len());
                for p in &corpus.pages {
                    prop_assert_eq!(classify_modality(p, &ModalityConfig::default()), p.modality);
                }
            }
        }
    }
}

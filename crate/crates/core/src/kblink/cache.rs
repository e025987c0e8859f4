use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::RwLock;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::{KbCandidate, KbClient, KbError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    Label,
    Entity,
    Country,
}

impl QueryKind {
    fn prefix(self) -> &'static str {
        match self {
            QueryKind::Label => "label",
            QueryKind::Entity => "entity",
            QueryKind::Country => "country",
        }
    }
}

/// Cache key: kind prefix plus the trimmed, whitespace-collapsed query text.
pub fn query_key(kind: QueryKind, text: &str) -> String {
    format!(
        "{}:{}",
        kind.prefix(),
        text.split_whitespace().collect::<Vec<_>>().join(" ")
    )
}

/// Recorded query/response pairs, kept sorted so the file is stable.
pub type KbCache = BTreeMap<String, Value>;

/// Cache-first client. Without an upstream client every miss is an error,
/// which is how offline runs are enforced.
pub struct CachedClient {
    cache: RwLock<KbCache>,
    upstream: Option<Box<dyn KbClient>>,
    network_calls: AtomicUsize,
}

impl CachedClient {
    pub fn new(cache: KbCache, upstream: Option<Box<dyn KbClient>>) -> Self {
        Self {
            cache: RwLock::new(cache),
            upstream,
            network_calls: AtomicUsize::new(0),
        }
    }

    pub fn offline(cache: KbCache) -> Self {
        Self::new(cache, None)
    }

    pub fn load(path: &Path) -> Result<KbCache, KbError> {
        if !path.exists() {
            return Ok(KbCache::new());
        }
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn save(&self, path: &Path) -> Result<(), KbError> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &*self.cache.read().expect("cache lock"))?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn snapshot(&self) -> KbCache {
        self.cache.read().expect("cache lock").clone()
    }

    /// Upstream requests issued so far.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    fn lookup<T, F>(&self, kind: QueryKind, text: &str, fetch: F) -> Result<T, KbError>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce(&dyn KbClient) -> Result<T, KbError>,
    {
        let key = query_key(kind, text);
        if let Some(v) = self.cache.read().expect("cache lock").get(&key) {
            return serde_json::from_value(v.clone()).map_err(|e| KbError::Malformed {
                query: key.clone(),
                message: e.to_string(),
            });
        }
        let Some(up) = self.upstream.as_deref() else {
            return Err(KbError::CacheMiss { query: key });
        };
        self.network_calls.fetch_add(1, Ordering::SeqCst);
        let value = fetch(up)?;
        let payload = serde_json::to_value(&value).map_err(|e| KbError::Malformed {
            query: key.clone(),
            message: e.to_string(),
        })?;
        self.cache.write().expect("cache lock").insert(key, payload);
        Ok(value)
    }
}

impl KbClient for CachedClient {
    fn search_label(&self, label: &str) -> Result<Vec<KbCandidate>, KbError> {
        self.lookup(QueryKind::Label, label, |c| c.search_label(label))
    }

    fn entity(&self, kb_id: &str) -> Result<Option<KbCandidate>, KbError> {
        self.lookup(QueryKind::Entity, kb_id, |c| c.entity(kb_id))
    }

    fn country(&self, kb_id: &str) -> Result<Option<String>, KbError> {
        self.lookup(QueryKind::Country, kb_id, |c| c.country(kb_id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    struct Fixed;
    impl KbClient for Fixed {
        fn search_label(&self, label: &str) -> Result<Vec<KbCandidate>, KbError> {
            Ok(vec![KbCandidate {
                kb_id: "Q1".into(),
                label: label.into(),
                description: String::new(),
                occupations: vec![],
            }])
        }
        fn entity(&self, _: &str) -> Result<Option<KbCandidate>, KbError> {
            Ok(None)
        }
        fn country(&self, kb_id: &str) -> Result<Option<String>, KbError> {
            Err(KbError::Transport {
                query: kb_id.into(),
                message: "unreachable".into(),
            })
        }
    }

    #[test]
    fn keys_normalize_whitespace() {
        assert_eq!(
            query_key(QueryKind::Label, "  Sybren   Valkema "),
            "label:Sybren Valkema"
        );
    }

    #[test]
    fn records_then_replays() {
        let client = CachedClient::new(KbCache::new(), Some(Box::new(Fixed)));
        assert_eq!(client.search_label("Sybren Valkema").unwrap().len(), 1);
        assert_eq!(client.search_label("Sybren  Valkema").unwrap().len(), 1);
        assert_eq!(client.network_calls(), 1);
        assert!(client.country("Q1").unwrap_err().is_retryable());

        let offline = CachedClient::offline(client.snapshot());
        assert_eq!(offline.search_label("Sybren Valkema").unwrap()[0].kb_id, "Q1");
        assert_eq!(offline.network_calls(), 0);
        let miss = offline.search_label("Nobody").unwrap_err();
        assert!(matches!(miss, KbError::CacheMiss { .. }) && miss.is_retryable());
    }

    #[test]
    fn malformed_payload_names_query() {
        let mut cache = KbCache::new();
        cache.insert("label:Bad".into(), json!({"not": "a list"}));
        match CachedClient::offline(cache).search_label("Bad") {
            Err(KbError::Malformed { query, .. }) => assert_eq!(query, "label:Bad"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        assert!(CachedClient::load(&path).unwrap().is_empty());
        let client = CachedClient::new(KbCache::new(), Some(Box::new(Fixed)));
        client.search_label("A").unwrap();
        client.save(&path).unwrap();
        assert_eq!(CachedClient::load(&path).unwrap(), client.snapshot());
    }
}

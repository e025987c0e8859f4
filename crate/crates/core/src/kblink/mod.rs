//! Knowledge-base linking of alias clusters.
//!
//! Candidates come from label lookups (canonical form first, then aliases
//! until something matches). Among the candidates, the one whose description
//! and occupations are most similar to a manually fixed anchor entity wins.

mod cache;
mod embed;
#[cfg(feature = "sparql")]
mod sparql;

pub use cache::{query_key, CachedClient, KbCache, QueryKind};
pub use embed::{cosine, embed, EmbedError, EmbeddingProvider, HashedBagOfWords};
#[cfg(feature = "sparql")]
pub use sparql::{SparqlClient, SparqlConfig};

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linkage::{AliasDictionary, Cluster};

#[derive(Debug, Error)]
pub enum KbError {
    #[error("transport failure for {query:?}: {message}")]
    Transport { query: String, message: String },
    #[error("offline and not cached: {query:?}")]
    CacheMiss { query: String },
    #[error("malformed response for {query:?}: {message}")]
    Malformed { query: String, message: String },
    #[error("anchor entity {0} not found")]
    AnchorNotFound(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Json(#[from] serde_json::Error),
}

impl KbError {
    /// Failures that may succeed on retry or with a network connection.
    pub fn is_retryable(&self) -> bool {
        matches!(self, KbError::Transport { .. } | KbError::CacheMiss { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbCandidate {
    pub kb_id: String,
    pub label: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub occupations: Vec<String>,
}

pub trait KbClient: Send + Sync {
    /// Person entities whose label (or alternate label) equals `label`.
    fn search_label(&self, label: &str) -> Result<Vec<KbCandidate>, KbError>;

    fn entity(&self, kb_id: &str) -> Result<Option<KbCandidate>, KbError>;

    /// Country of citizenship, else of residence.
    fn country(&self, kb_id: &str) -> Result<Option<String>, KbError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedActor {
    #[serde(rename = "canonical")]
    pub canonical_name: String,
    pub aliases: Vec<String>,
    pub kb_id: Option<String>,
    #[serde(rename = "score")]
    pub disambiguation_score: Option<f64>,
    pub country: Option<String>,
}

pub fn write_actors<W: Write>(mut w: W, actors: &[LinkedActor]) -> std::io::Result<()> {
    for a in actors {
        serde_json::to_writer(&mut w, a)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_actors<R: Read>(reader: R) -> Result<Vec<LinkedActor>, KbError> {
    let mut out = Vec::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Query the canonical form, then each alias in stored order, stopping at the
/// first non-empty answer.
pub fn generate_candidates(cluster: &Cluster, client: &dyn KbClient) -> Result<Vec<KbCandidate>, KbError> {
    for form in cluster.members() {
        let mut found = client.search_label(form)?;
        if !found.is_empty() {
            let mut seen = BTreeSet::new();
            found.retain(|c| !c.kb_id.is_empty() && seen.insert(c.kb_id.clone()));
            return Ok(found);
        }
    }
    Ok(Vec::new())
}

/// Reference entity the other actors are disambiguated against.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub kb_id: String,
    pub description_embedding: Vec<f64>,
    pub occupation_embedding: Vec<f64>,
}

impl Anchor {
    pub fn from_candidate(c: &KbCandidate, provider: &dyn EmbeddingProvider) -> Result<Self, EmbedError> {
        Ok(Self {
            kb_id: c.kb_id.clone(),
            description_embedding: embed(provider, &c.description)?,
            occupation_embedding: embed(provider, &c.occupations.join(", "))?,
        })
    }
}

/// Mean of the available cosine components, 0 when none is available.
pub fn candidate_score(candidate: &KbCandidate, anchor: &Anchor, provider: &dyn EmbeddingProvider) -> f64 {
    let component = |text: &str, anchor_vec: &[f64]| -> Option<f64> {
        if text.trim().is_empty() {
            return None;
        }
        match embed(provider, text) {
            Ok(v) => cosine(&v, anchor_vec),
            Err(e) => {
                log::warn!("embedding failed for {}: {e}", candidate.kb_id);
                None
            }
        }
    };
    let parts: Vec<f64> = [
        component(&candidate.description, &anchor.description_embedding),
        component(&candidate.occupations.join(", "), &anchor.occupation_embedding),
    ]
    .into_iter()
    .flatten()
    .collect();
    if parts.is_empty() {
        0.0
    } else {
        parts.iter().sum::<f64>() / parts.len() as f64
    }
}

/// Highest-scoring candidate; ties go to the smallest `kb_id`.
pub fn disambiguate(
    candidates: &[KbCandidate],
    anchor: &Anchor,
    provider: &dyn EmbeddingProvider,
) -> Option<(String, f64)> {
    let scores = crate::par::map(candidates, |c| candidate_score(c, anchor, provider));
    candidates
        .iter()
        .zip(scores)
        .max_by(|(a, sa), (b, sb)| sa.total_cmp(sb).then_with(|| b.kb_id.cmp(&a.kb_id)))
        .map(|(c, s)| (c.kb_id.clone(), s))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorSpec {
    pub kb_id: String,
    /// Name of the anchor actor in the corpus. Defaults to the entity label.
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkOptions {
    pub enrich_country: bool,
    /// Keep clusters without candidates, with `kb_id = None`.
    pub keep_unlinked: bool,
}

/// Link every cluster; clusters without candidates are dropped. The anchor
/// cluster is linked to the anchor entity with score 1.
pub fn link_entities(
    aliases: &AliasDictionary,
    anchor: &AnchorSpec,
    client: &dyn KbClient,
    provider: &dyn EmbeddingProvider,
    options: LinkOptions,
) -> Result<Vec<LinkedActor>, KbError> {
    let anchor_entity = client
        .entity(&anchor.kb_id)?
        .ok_or_else(|| KbError::AnchorNotFound(anchor.kb_id.clone()))?;
    let anchor_vectors = Anchor::from_candidate(&anchor_entity, provider).map_err(|e| KbError::Malformed {
        query: anchor.kb_id.clone(),
        message: e.to_string(),
    })?;
    let anchor_name = anchor.name.as_deref().unwrap_or(&anchor_entity.label);
    let anchor_canonical = aliases.resolve(anchor_name).map(str::to_string);

    let results = crate::par::map(&aliases.clusters, |cluster| -> Result<Option<LinkedActor>, KbError> {
        let mut actor = LinkedActor {
            canonical_name: cluster.canonical.clone(),
            aliases: cluster.aliases.clone(),
            kb_id: None,
            disambiguation_score: None,
            country: None,
        };
        if anchor_canonical.as_deref() == Some(cluster.canonical.as_str()) {
            actor.kb_id = Some(anchor.kb_id.clone());
            actor.disambiguation_score = Some(1.0);
        } else {
            let candidates = generate_candidates(cluster, client)?;
            match disambiguate(&candidates, &anchor_vectors, provider) {
                Some((kb_id, score)) => {
                    actor.kb_id = Some(kb_id);
                    actor.disambiguation_score = Some(score);
                }
                None if options.keep_unlinked => return Ok(Some(actor)),
                None => return Ok(None),
            }
        }
        if options.enrich_country {
            if let Some(id) = &actor.kb_id {
                actor.country = client.country(id)?;
            }
        }
        Ok(Some(actor))
    });
    let mut actors = Vec::new();
    for r in results {
        if let Some(a) = r? {
            actors.push(a);
        }
    }
    actors.sort_by(|a, b| a.canonical_name.cmp(&b.canonical_name));
    Ok(actors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn cand(id: &str, label: &str, desc: &str, occ: &[&str]) -> KbCandidate {
        KbCandidate {
            kb_id: id.into(),
            label: label.into(),
            description: desc.into(),
            occupations: occ.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[derive(Default)]
    struct MapClient {
        labels: HashMap<String, Vec<KbCandidate>>,
        entities: HashMap<String, KbCandidate>,
        countries: HashMap<String, String>,
    }

    impl KbClient for MapClient {
        fn search_label(&self, label: &str) -> Result<Vec<KbCandidate>, KbError> {
            Ok(self.labels.get(label).cloned().unwrap_or_default())
        }
        fn entity(&self, kb_id: &str) -> Result<Option<KbCandidate>, KbError> {
            Ok(self.entities.get(kb_id).cloned())
        }
        fn country(&self, kb_id: &str) -> Result<Option<String>, KbError> {
            Ok(self.countries.get(kb_id).cloned())
        }
    }

    fn valkema() -> KbCandidate {
        cand(
            "Q2618110",
            "Sybren Valkema",
            "Dutch glass artist (1916-1996)",
            &["glass artist", "ceramicist", "textile artist"],
        )
    }

    fn fixture_client() -> MapClient {
        let mut c = MapClient::default();
        c.entities.insert("Q2618110".into(), valkema());
        c.labels.insert("Sybren Valkema".into(), vec![valkema()]);
        c.labels.insert(
            "Albert Lewis".into(),
            vec![
                cand(
                    "Q200",
                    "Albert Lewis",
                    "English footballer",
                    &["association football player"],
                ),
                cand("Q100", "Albert Lewis", "American glass artist", &["glass artist"]),
            ],
        );
        c.labels.insert(
            "K. Fischer".into(),
            vec![cand("Q300", "K. Fischer", "German glass artist", &["glass artist"])],
        );
        c.countries
            .insert("Q2618110".into(), "Kingdom of the Netherlands".into());
        c.countries.insert("Q100".into(), "United States".into());
        c
    }

    fn dict() -> AliasDictionary {
        AliasDictionary::from_clusters(vec![
            Cluster {
                canonical: "Sybren Valkema".into(),
                aliases: vec!["S. Valkema".into()],
            },
            Cluster {
                canonical: "Albert Lewis".into(),
                aliases: vec![],
            },
            Cluster {
                canonical: "Kitty Fischer".into(),
                aliases: vec!["K. Fischer".into(), "Kitty F.".into()],
            },
            Cluster {
                canonical: "Jan Nobody".into(),
                aliases: vec![],
            },
        ])
    }

    fn anchor() -> AnchorSpec {
        AnchorSpec {
            kb_id: "Q2618110".into(),
            name: None,
        }
    }

    #[test]
    fn candidate_fallback_to_alias() {
        let client = fixture_client();
        let d = dict();
        let found = generate_candidates(d.cluster_of("Kitty Fischer").unwrap(), &client).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].kb_id, "Q300");
        assert!(generate_candidates(d.cluster_of("Jan Nobody").unwrap(), &client)
            .unwrap()
            .is_empty());
        let v = generate_candidates(d.cluster_of("Sybren Valkema").unwrap(), &client).unwrap();
        assert!(v.iter().any(|c| c.kb_id == "Q2618110"));
    }

    #[test]
    fn glass_artist_beats_footballer() {
        let p = HashedBagOfWords::default();
        let a = Anchor::from_candidate(&valkema(), &p).unwrap();
        let client = fixture_client();
        let (id, score) = disambiguate(&client.labels["Albert Lewis"], &a, &p).unwrap();
        assert_eq!(id, "Q100");
        assert!((-1.0..=1.0).contains(&score));
        assert!(disambiguate(&[], &a, &p).is_none());
        let single = [cand("Q9", "x", "footballer", &[])];
        assert_eq!(disambiguate(&single, &a, &p).unwrap().0, "Q9");
    }

    #[test]
    fn ties_and_empty_components() {
        let p = HashedBagOfWords::default();
        let a = Anchor::from_candidate(&valkema(), &p).unwrap();
        let bare = [cand("Q7", "x", "", &[]), cand("Q5", "x", "", &[])];
        assert_eq!(disambiguate(&bare, &a, &p).unwrap(), ("Q5".to_string(), 0.0));
        // description only: averaged over the single available component
        let c = cand("Q1", "x", "Dutch glass artist (1916-1996)", &[]);
        assert!((candidate_score(&c, &a, &p) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn link_whole_dictionary() {
        let client = fixture_client();
        let p = HashedBagOfWords::default();
        let opts = LinkOptions {
            enrich_country: true,
            keep_unlinked: false,
        };
        let actors = link_entities(&dict(), &anchor(), &client, &p, opts).unwrap();
        let names: Vec<_> = actors.iter().map(|a| a.canonical_name.as_str()).collect();
        assert_eq!(names, ["Albert Lewis", "Kitty Fischer", "Sybren Valkema"]);
        let v = &actors[2];
        assert_eq!(v.kb_id.as_deref(), Some("Q2618110"));
        assert_eq!(v.disambiguation_score, Some(1.0));
        assert_eq!(v.country.as_deref(), Some("Kingdom of the Netherlands"));
        assert_eq!(actors[0].kb_id.as_deref(), Some("Q100"));
        assert!(actors
            .iter()
            .all(|a| a.kb_id.is_some() == a.disambiguation_score.is_some()));
        assert!(actors.len() <= dict().len());

        let keep = LinkOptions {
            enrich_country: false,
            keep_unlinked: true,
        };
        let all = link_entities(&dict(), &anchor(), &client, &p, keep).unwrap();
        assert_eq!(all.len(), 4);
        let nobody = all.iter().find(|a| a.canonical_name == "Jan Nobody").unwrap();
        assert!(nobody.kb_id.is_none() && nobody.disambiguation_score.is_none());

        let missing = AnchorSpec {
            kb_id: "Q0".into(),
            name: None,
        };
        assert!(matches!(
            link_entities(&dict(), &missing, &client, &p, opts),
            Err(KbError::AnchorNotFound(_))
        ));
    }

    #[test]
    fn actor_file_round_trip() {
        let client = fixture_client();
        let actors = link_entities(
            &dict(),
            &anchor(),
            &client,
            &HashedBagOfWords::default(),
            LinkOptions::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_actors(&mut buf, &actors).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        assert!(line.starts_with("{\"canonical\":\"Albert Lewis\",\"aliases\":[],\"kb_id\":\"Q100\",\"score\":"));
        assert_eq!(read_actors(buf.as_slice()).unwrap(), actors);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        struct Scaled(HashedBagOfWords, f64);
        impl EmbeddingProvider for Scaled {
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
                Ok(self.0.embed(text)?.into_iter().map(|x| x * self.1).collect())
            }
        }

        proptest! {
            #[test]
            fn selection_is_argmax_and_scale_invariant(
                descs in proptest::collection::vec("(glass|artist|dutch|football|player|painter|potter| ){0,6}", 1..6),
                scale in 0.01f64..100.0,
            ) {
                let cands: Vec<KbCandidate> = descs.iter().enumerate()
                    .map(|(i, d)| cand(&format!("Q{i}"), "x", d, &[]))
                    .collect();
                let base = HashedBagOfWords::default();
                let a = Anchor::from_candidate(&valkema(), &base).unwrap();
                let (id, best) = disambiguate(&cands, &a, &base).unwrap();
                for c in &cands {
                    let s = candidate_score(c, &a, &base);
                    prop_assert!((-1.0..=1.0).contains(&s));
                    prop_assert!(best >= s);
                }
                let scaled = Scaled(HashedBagOfWords::default(), scale);
                let a2 = Anchor::from_candidate(&valkema(), &scaled).unwrap();
                let (id2, _) = disambiguate(&cands, &a2, &scaled).unwrap();
                prop_assert_eq!(id, id2);
            }
        }
    }
}

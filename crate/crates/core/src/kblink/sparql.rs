//! Live Wikidata-style SPARQL client.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde_json::Value;

use super::{KbCandidate, KbClient, KbError};

#[derive(Debug, Clone, PartialEq)]
pub struct SparqlConfig {
    pub endpoint: String,
    pub user_agent: String,
    /// Label languages tried for an exact label match.
    pub languages: Vec<String>,
    /// Also match `skos:altLabel`.
    pub alt_labels: bool,
    /// Restrict to instances of human (`wd:Q5`).
    pub humans_only: bool,
    /// Language of descriptions and occupation labels.
    pub description_language: String,
    pub min_interval: Duration,
    pub timeout: Duration,
}

impl Default for SparqlConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://query.wikidata.org/sparql".into(),
            user_agent: concat!("archnet/", env!("CARGO_PKG_VERSION")).into(),
            languages: ["en", "nl", "de", "fr"].iter().map(|s| s.to_string()).collect(),
            alt_labels: true,
            humans_only: true,
            description_language: "en".into(),
            min_interval: Duration::from_millis(500),
            timeout: Duration::from_secs(60),
        }
    }
}

pub struct SparqlClient {
    config: SparqlConfig,
    agent: ureq::Agent,
    last_request: Mutex<Option<Instant>>,
}

fn literal(s: &str) -> String {
    let escaped = s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
    format!("\"{escaped}\"")
}

fn is_entity_id(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next() == Some('Q') && s.len() > 1 && chars.all(|c| c.is_ascii_digit())
}

impl SparqlClient {
    pub fn new(config: SparqlConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(config.timeout)
            .user_agent(&config.user_agent)
            .build();
        Self {
            config,
            agent,
            last_request: Mutex::new(None),
        }
    }

    fn throttle(&self) {
        let mut last = self.last_request.lock().expect("rate limiter lock");
        if let Some(t) = *last {
            let elapsed = t.elapsed();
            if elapsed < self.config.min_interval {
                std::thread::sleep(self.config.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn query(&self, sparql: &str, query_name: &str) -> Result<Vec<BTreeMap<String, String>>, KbError> {
        self.throttle();
        let response = self
            .agent
            .get(&self.config.endpoint)
            .query("query", sparql)
            .query("format", "json")
            .set("Accept", "application/sparql-results+json")
            .call()
            .map_err(|e| KbError::Transport {
                query: query_name.to_string(),
                message: e.to_string(),
            })?;
        let body: Value = response.into_json().map_err(|e| KbError::Malformed {
            query: query_name.to_string(),
            message: e.to_string(),
        })?;
        let bindings = body
            .pointer("/results/bindings")
            .and_then(Value::as_array)
            .ok_or_else(|| KbError::Malformed {
                query: query_name.to_string(),
                message: "missing results.bindings".into(),
            })?;
        Ok(bindings
            .iter()
            .map(|row| {
                row.as_object()
                    .map(|o| {
                        o.iter()
                            .filter_map(|(k, v)| {
                                v.get("value")
                                    .and_then(Value::as_str)
                                    .map(|s| (k.clone(), s.to_string()))
                            })
                            .collect()
                    })
                    .unwrap_or_default()
            })
            .collect())
    }

    fn entity_details(&self, pattern: &str, query_name: &str) -> Result<Vec<KbCandidate>, KbError> {
        let lang = literal(&self.config.description_language);
        let sparql = format!(
            "SELECT ?item ?label ?desc (GROUP_CONCAT(DISTINCT ?occLabel; separator=\"|\") AS ?occs) WHERE {{\n\
             {pattern}\n\
             OPTIONAL {{ ?item rdfs:label ?label FILTER(LANG(?label) = {lang}) }}\n\
             OPTIONAL {{ ?item schema:description ?desc FILTER(LANG(?desc) = {lang}) }}\n\
             OPTIONAL {{ ?item wdt:P106 ?occ . ?occ rdfs:label ?occLabel FILTER(LANG(?occLabel) = {lang}) }}\n\
             }} GROUP BY ?item ?label ?desc"
        );
        let rows = self.query(&sparql, query_name)?;
        let mut out: BTreeMap<String, KbCandidate> = BTreeMap::new();
        for row in rows {
            let Some(item) = row.get("item") else { continue };
            let kb_id = item.rsplit('/').next().unwrap_or(item).to_string();
            let mut occupations: Vec<String> = row
                .get("occs")
                .map(|s| s.split('|').filter(|o| !o.is_empty()).map(str::to_string).collect())
                .unwrap_or_default();
            occupations.sort();
            out.entry(kb_id.clone()).or_insert(KbCandidate {
                kb_id,
                label: row.get("label").cloned().unwrap_or_default(),
                description: row.get("desc").cloned().unwrap_or_default(),
                occupations,
            });
        }
        Ok(out.into_values().collect())
    }
}

impl KbClient for SparqlClient {
    fn search_label(&self, label: &str) -> Result<Vec<KbCandidate>, KbError> {
        let names: Vec<String> = self
            .config
            .languages
            .iter()
            .map(|l| format!("{}@{l}", literal(label)))
            .collect();
        let mut pattern = format!("VALUES ?name {{ {} }}\n", names.join(" "));
        if self.config.alt_labels {
            pattern.push_str("{ ?item rdfs:label ?name } UNION { ?item skos:altLabel ?name }\n");
        } else {
            pattern.push_str("?item rdfs:label ?name .\n");
        }
        if self.config.humans_only {
            pattern.push_str("?item wdt:P31 wd:Q5 .");
        }
        self.entity_details(&pattern, label)
    }

    fn entity(&self, kb_id: &str) -> Result<Option<KbCandidate>, KbError> {
        if !is_entity_id(kb_id) {
            return Err(KbError::Malformed {
                query: kb_id.to_string(),
                message: "not an entity id".into(),
            });
        }
        let pattern = format!("VALUES ?item {{ wd:{kb_id} }}");
        Ok(self.entity_details(&pattern, kb_id)?.into_iter().next())
    }

    fn country(&self, kb_id: &str) -> Result<Option<String>, KbError> {
        if !is_entity_id(kb_id) {
            return Err(KbError::Malformed {
                query: kb_id.to_string(),
                message: "not an entity id".into(),
            });
        }
        let lang = literal(&self.config.description_language);
        for property in ["P27", "P551"] {
            let sparql = format!(
                "SELECT ?countryLabel WHERE {{ wd:{kb_id} wdt:{property} ?country . \
                 ?country rdfs:label ?countryLabel FILTER(LANG(?countryLabel) = {lang}) }} \
                 ORDER BY ?countryLabel LIMIT 1"
            );
            if let Some(row) = self.query(&sparql, kb_id)?.into_iter().next() {
                if let Some(c) = row.get("countryLabel") {
                    return Ok(Some(c.clone()));
                }
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_are_escaped() {
        assert_eq!(literal("a\"b"), "\"a\\\"b\"");
        assert!(is_entity_id("Q2618110"));
        assert!(!is_entity_id("Q"));
        assert!(!is_entity_id("wd:Q1 } DROP"));
    }

    #[test]
    fn rejects_bad_ids_without_network() {
        let c = SparqlClient::new(SparqlConfig::default());
        assert!(matches!(c.entity("nope"), Err(KbError::Malformed { .. })));
        assert!(matches!(c.country("nope"), Err(KbError::Malformed { .. })));
    }
}

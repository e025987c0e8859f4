//! Record linkage: merge surface forms of the same person into alias clusters.
//!
//! Every pair of unique surface forms gets three indel-similarity scores
//! (last name, prefix, whole name as substring) combined into a weighted total.
//! Each form is merged with its single best match when that total reaches the
//! threshold; seed aliases are merged up front, and the clusters are the
//! transitive closure of all merges.

mod names;
mod similarity;
mod union_find;

pub use names::{normalize, split_name, InfixSet, NameParts, DEFAULT_INFIXES};
pub use similarity::{lcs_len, partial_ratio, partial_ratio_chars, ratio, ratio_chars};
pub use union_find::UnionFind;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinkageError {
    #[error("name {0:?} is empty after normalization")]
    EmptyName(String),
    #[error("weights must be non-negative and sum to 1, got {0}, {1}, {2}")]
    InvalidWeights(f64, f64, f64),
    #[error("threshold {0} outside [0, 100]")]
    InvalidThreshold(f64),
    #[error("unknown blocking mode {0:?}")]
    UnknownBlocking(String),
    #[error("malformed seed row {row}: {message}")]
    MalformedSeed { row: usize, message: String },
    #[error("malformed alias dictionary: {0}")]
    MalformedAliases(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub lastname: f64,
    pub prefix: f64,
    pub substring: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            lastname: 0.4,
            prefix: 0.2,
            substring: 0.4,
        }
    }
}

impl Weights {
    pub fn new(lastname: f64, prefix: f64, substring: f64) -> Result<Self, LinkageError> {
        let w = Self {
            lastname,
            prefix,
            substring,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), LinkageError> {
        let parts = [self.lastname, self.prefix, self.substring];
        let sum: f64 = parts.iter().sum();
        if parts.iter().any(|w| !w.is_finite() || *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(LinkageError::InvalidWeights(self.lastname, self.prefix, self.substring));
        }
        Ok(())
    }
}

impl FromStr for Weights {
    type Err = LinkageError;

    /// Parses `"0.4,0.2,0.4"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().unwrap_or(f64::NAN))
            .collect();
        match parts.as_slice() {
            [a, b, c] => Weights::new(*a, *b, *c),
            _ => Err(LinkageError::InvalidWeights(f64::NAN, f64::NAN, f64::NAN)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScores {
    pub lastname_score: f64,
    pub prefix_score: f64,
    pub substring_score: f64,
    pub total_score: f64,
}

pub fn score_pair(a: &NameParts, b: &NameParts, weights: &Weights) -> SimilarityScores {
    let lastname_score = ratio(&a.lastname, &b.lastname);
    let prefix_score = ratio(&a.prefix, &b.prefix);
    let substring_score = partial_ratio(&a.normalized, &b.normalized);
    SimilarityScores {
        lastname_score,
        prefix_score,
        substring_score,
        total_score: weights.lastname * lastname_score
            + weights.prefix * prefix_score
            + weights.substring * substring_score,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Blocking {
    /// Score all pairs.
    #[default]
    None,
    /// Only score pairs whose last names start with the same character.
    LastnameInitial,
}

impl FromStr for Blocking {
    type Err = LinkageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Blocking::None),
            "lastname_initial" | "lastname-initial" => Ok(Blocking::LastnameInitial),
            other => Err(LinkageError::UnknownBlocking(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub left: usize,
    pub right: usize,
    pub scores: SimilarityScores,
}

/// Pairwise score lookup table over lexicographically sorted unique surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTable {
    pub surfaces: Vec<String>,
    /// Pairs with `left < right`, ordered by `(left, right)`.
    pub pairs: Vec<ScoredPair>,
}

impl SimilarityTable {
    pub fn get(&self, a: &str, b: &str) -> Option<&SimilarityScores> {
        let i = self.surfaces.binary_search_by(|s| s.as_str().cmp(a)).ok()?;
        let j = self.surfaces.binary_search_by(|s| s.as_str().cmp(b)).ok()?;
        let key = (i.min(j), i.max(j));
        self.pairs
            .binary_search_by(|p| (p.left, p.right).cmp(&key))
            .ok()
            .map(|k| &self.pairs[k].scores)
    }
}

/// Score every unordered pair of surfaces within a block. Surfaces that are
/// empty after normalization are dropped.
pub fn build_similarity_table<S: AsRef<str>>(
    surfaces: &[S],
    infixes: &InfixSet,
    weights: &Weights,
    blocking: Blocking,
) -> SimilarityTable {
    let unique: BTreeSet<&str> = surfaces.iter().map(|s| s.as_ref()).collect();
    let mut kept = Vec::with_capacity(unique.len());
    let mut parts = Vec::with_capacity(unique.len());
    for s in unique {
        match split_name(s, infixes) {
            Ok(p) => {
                kept.push(s.to_string());
                parts.push(p);
            }
            Err(e) => log::warn!("skipping surface form: {e}"),
        }
    }
    let block_of = |p: &NameParts| match blocking {
        Blocking::None => None,
        Blocking::LastnameInitial => p.lastname.chars().next(),
    };
    let rows = crate::par::map_range(parts.len(), |i| {
        let bi = block_of(&parts[i]);
        (i + 1..parts.len())
            .filter(|&j| block_of(&parts[j]) == bi)
            .map(|j| ScoredPair {
                left: i,
                right: j,
                scores: score_pair(&parts[i], &parts[j], weights),
            })
            .collect::<Vec<_>>()
    });
    SimilarityTable {
        surfaces: kept,
        pairs: rows.into_iter().flatten().collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedAlias {
    pub alias: String,
    pub canonical: String,
}

/// Read the `alias,canonical` seed CSV.
pub fn read_seeds<R: Read>(reader: R) -> Result<Vec<SeedAlias>, LinkageError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 2;
        let rec = rec.map_err(|e| LinkageError::MalformedSeed {
            row,
            message: e.to_string(),
        })?;
        let (Some(alias), Some(canonical)) = (rec.get(0), rec.get(1)) else {
            return Err(LinkageError::MalformedSeed {
                row,
                message: "expected alias,canonical".into(),
            });
        };
        if alias.trim().is_empty() || canonical.trim().is_empty() {
            return Err(LinkageError::MalformedSeed {
                row,
                message: "empty name".into(),
            });
        }
        out.push(SeedAlias {
            alias: alias.trim().to_string(),
            canonical: canonical.trim().to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkageConfig {
    pub threshold: f64,
    pub weights: Weights,
    pub blocking: Blocking,
    pub infixes: InfixSet,
    /// Optional conjunctive guard: every component score must reach this value.
    pub min_component_score: Option<f64>,
}

impl Default for LinkageConfig {
    fn default() -> Self {
        Self {
            threshold: 85.0,
            weights: Weights::default(),
            blocking: Blocking::None,
            infixes: InfixSet::default(),
            min_component_score: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub canonical: String,
    /// Members other than the canonical form, by descending corpus count then
    /// lexicographically.
    pub aliases: Vec<String>,
}

impl Cluster {
    pub fn members(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.canonical.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

/// Partition of surface forms into clusters with a canonical form each.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AliasDictionary {
    /// Sorted by canonical form.
    pub clusters: Vec<Cluster>,
    #[serde(skip)]
    pub seed_aliases: Vec<SeedAlias>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    #[serde(skip)]
    normalized_index: HashMap<String, usize>,
}

impl PartialEq for AliasDictionary {
    fn eq(&self, other: &Self) -> bool {
        self.clusters == other.clusters
    }
}

impl AliasDictionary {
    pub fn from_clusters(mut clusters: Vec<Cluster>) -> Self {
        clusters.sort_by(|a, b| a.canonical.cmp(&b.canonical));
        let mut dict = Self {
            clusters,
            ..Default::default()
        };
        dict.reindex();
        dict
    }

    fn reindex(&mut self) {
        self.index.clear();
        self.normalized_index.clear();
        for (i, c) in self.clusters.iter().enumerate() {
            for m in c.members() {
                self.index.entry(m.to_string()).or_insert(i);
                self.normalized_index.entry(normalize(m)).or_insert(i);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn cluster_of(&self, surface: &str) -> Option<&Cluster> {
        self.index.get(surface).map(|&i| &self.clusters[i])
    }

    /// Canonical form for a label: exact surface match first, then a match on
    /// the normalized form.
    pub fn resolve(&self, label: &str) -> Option<&str> {
        self.index
            .get(label)
            .or_else(|| self.normalized_index.get(&normalize(label)))
            .map(|&i| self.clusters[i].canonical.as_str())
    }

    pub fn read<R: Read>(reader: R) -> Result<Self, LinkageError> {
        let dict: AliasDictionary = serde_json::from_reader(reader)?;
        Ok(Self::from_clusters(dict.clusters))
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), LinkageError> {
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

/// Representative of a cluster: highest corpus count, then longest, then
/// lexicographically smallest. Seed-alias targets win within their cluster.
pub fn canonical_form<'a, S: AsRef<str>>(
    cluster: &'a [S],
    surface_counts: &BTreeMap<String, usize>,
    seed_targets: &HashSet<String>,
) -> &'a str {
    let key = |s: &str| {
        (
            seed_targets.contains(s),
            surface_counts.get(s).copied().unwrap_or(0),
            s.chars().count(),
        )
    };
    cluster
        .iter()
        .map(|s| s.as_ref())
        .min_by(|a, b| key(b).cmp(&key(a)).then_with(|| a.cmp(b)))
        .expect("cluster must be non-empty")
}

/// All surfaces that take part in linkage: counted forms plus seed names.
pub fn surface_universe(surface_counts: &BTreeMap<String, usize>, seeds: &[SeedAlias]) -> Vec<String> {
    let mut all: BTreeSet<String> = surface_counts.keys().cloned().collect();
    for s in seeds {
        all.insert(s.alias.clone());
        all.insert(s.canonical.clone());
    }
    all.into_iter().collect()
}

/// Merge each surface with its best match by total score when the score
/// reaches the threshold; seeds are merged first.
pub fn link_records(
    surface_counts: &BTreeMap<String, usize>,
    table: &SimilarityTable,
    config: &LinkageConfig,
    seeds: &[SeedAlias],
) -> Result<AliasDictionary, LinkageError> {
    config.weights.validate()?;
    if !(0.0..=100.0).contains(&config.threshold) {
        return Err(LinkageError::InvalidThreshold(config.threshold));
    }
    let mut surfaces: BTreeSet<String> = table.surfaces.iter().cloned().collect();
    for s in surface_universe(surface_counts, seeds) {
        if !normalize(&s).is_empty() {
            surfaces.insert(s);
        }
    }
    let surfaces: Vec<String> = surfaces.into_iter().collect();
    let position: HashMap<&str, usize> = surfaces.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let mut uf = UnionFind::new(surfaces.len());
    for s in seeds {
        if let (Some(&a), Some(&b)) = (position.get(s.alias.as_str()), position.get(s.canonical.as_str())) {
            uf.union(a, b);
        }
    }

    // best[i] = (total, other) with ties going to the smaller surface
    let mut best: Vec<Option<(f64, usize, SimilarityScores)>> = vec![None; surfaces.len()];
    for pair in &table.pairs {
        let a = position[table.surfaces[pair.left].as_str()];
        let b = position[table.surfaces[pair.right].as_str()];
        for (me, other) in [(a, b), (b, a)] {
            let better = match best[me] {
                None => true,
                Some((t, o, _)) => pair.scores.total_score > t || (pair.scores.total_score == t && other < o),
            };
            if better {
                best[me] = Some((pair.scores.total_score, other, pair.scores));
            }
        }
    }
    for (i, b) in best.iter().enumerate() {
        let Some((total, j, scores)) = *b else { continue };
        if total < config.threshold {
            continue;
        }
        if let Some(min) = config.min_component_score {
            if scores.lastname_score < min || scores.prefix_score < min || scores.substring_score < min {
                continue;
            }
        }
        uf.union(i, j);
    }

    let seed_targets: HashSet<String> = seeds.iter().map(|s| s.canonical.clone()).collect();
    let clusters = uf
        .groups()
        .into_iter()
        .map(|group| {
            let members: Vec<&str> = group.iter().map(|&i| surfaces[i].as_str()).collect();
            let canonical = canonical_form(&members, surface_counts, &seed_targets).to_string();
            let mut aliases: Vec<String> = members
                .iter()
                .filter(|m| **m != canonical)
                .map(|m| m.to_string())
                .collect();
            let count = |s: &str| surface_counts.get(s).copied().unwrap_or(0);
            aliases.sort_by(|a, b| count(b).cmp(&count(a)).then_with(|| a.cmp(b)));
            Cluster { canonical, aliases }
        })
        .collect();
    let mut dict = AliasDictionary::from_clusters(clusters);
    dict.seed_aliases = seeds.to_vec();
    Ok(dict)
}

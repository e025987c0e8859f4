//! End-to-end runs driven by one JSON configuration, with every intermediate
//! artifact persisted and fingerprinted in a run manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{self, AnalysisReport, StatsComparison};
use crate::corpus::{self, CorrespondenceFilter, ModalityConfig};
use crate::evaluation::{self, NetworkDiff};
use crate::kblink::{self, AnchorSpec, CachedClient, HashedBagOfWords, LinkOptions};
use crate::linkage::{self, AliasDictionary, Blocking, InfixSet, LinkageConfig, SeedAlias, Weights};
use crate::ner::{self, Gazetteer, MentionImport, Recognizer};
use crate::network::{self, WeightedGraph};

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("input {key} not found: {path}")]
    MissingInput { key: &'static str, path: PathBuf },
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: BoxError,
    },
}

impl PipelineError {
    fn stage(stage: &'static str) -> impl FnOnce(BoxError) -> PipelineError {
        move |source| PipelineError::Stage { stage, source }
    }
}

fn default_latin_threshold() -> f64 {
    ModalityConfig::default().latin_threshold
}
fn default_min_chars() -> usize {
    ModalityConfig::default().min_chars
}
fn default_keywords() -> Vec<String> {
    CorrespondenceFilter::default().keywords().to_vec()
}
fn default_threshold() -> f64 {
    85.0
}
fn default_weights() -> [f64; 3] {
    [0.4, 0.2, 0.4]
}
fn default_min_weight() -> u64 {
    10
}
fn default_seed() -> u64 {
    42
}
fn default_top() -> usize {
    10
}
fn default_true() -> bool {
    true
}

/// Optional comparison against a curated sender-receiver network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub manual: PathBuf,
    #[serde(default)]
    pub sample_missing: usize,
    #[serde(default)]
    pub sample_extra: usize,
}

/// Run configuration. Relative paths resolve against the directory holding
/// the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub pages: PathBuf,
    #[serde(default)]
    pub metadata: Option<PathBuf>,
    #[serde(default)]
    pub gazetteer: Option<PathBuf>,
    #[serde(default)]
    pub import_mentions: Vec<PathBuf>,
    #[serde(default)]
    pub seeds: Option<PathBuf>,
    pub kb_cache: PathBuf,
    #[serde(default = "default_latin_threshold")]
    pub latin_threshold: f64,
    #[serde(default = "default_min_chars")]
    pub min_chars: usize,
    #[serde(default = "default_keywords")]
    pub keywords: Vec<String>,
    #[serde(default = "default_threshold")]
    pub linkage_threshold: f64,
    #[serde(default = "default_weights")]
    pub weights: [f64; 3],
    #[serde(default)]
    pub blocking: Blocking,
    #[serde(default = "default_min_weight")]
    pub min_weight: u64,
    pub anchor: String,
    #[serde(default)]
    pub anchor_name: Option<String>,
    #[serde(default = "default_true")]
    pub enrich_country: bool,
    #[serde(default)]
    pub offline: bool,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_top")]
    pub top: usize,
    #[serde(default)]
    pub compare: Option<CompareConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut config: PipelineConfig = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn weights(&self) -> Result<Weights, ConfigError> {
        let [a, b, c] = self.weights;
        Weights::new(a, b, c).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Range checks plus existence of every input file.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.weights()?;
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !(0.0..=1.0).contains(&self.latin_threshold) {
            return invalid(format!("latin_threshold {} outside [0, 1]", self.latin_threshold));
        }
        if !(0.0..=100.0).contains(&self.linkage_threshold) {
            return invalid(format!("linkage_threshold {} outside [0, 100]", self.linkage_threshold));
        }
        if self.min_weight == 0 {
            return invalid("min_weight must be at least 1".into());
        }
        if self.anchor.trim().is_empty() {
            return invalid("anchor kb id is empty".into());
        }
        if self.gazetteer.is_none() && self.import_mentions.is_empty() {
            return invalid("no recognizer: set gazetteer or import_mentions".into());
        }
        let mut inputs: Vec<(&'static str, &PathBuf)> = vec![("pages", &self.pages)];
        inputs.extend(self.metadata.iter().map(|p| ("metadata", p)));
        inputs.extend(self.gazetteer.iter().map(|p| ("gazetteer", p)));
        inputs.extend(self.import_mentions.iter().map(|p| ("import_mentions", p)));
        inputs.extend(self.seeds.iter().map(|p| ("seeds", p)));
        inputs.extend(self.compare.iter().map(|c| ("compare.manual", &c.manual)));
        if self.offline {
            inputs.push(("kb_cache", &self.kb_cache));
        }
        for (key, p) in inputs {
            let path = self.resolve(p);
            if !path.is_file() {
                return Err(ConfigError::MissingInput { key, path });
            }
        }
        Ok(())
    }

    /// SHA-256 of the configuration as serialized (paths as written).
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn file_digest(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub inputs: Vec<ArtifactDigest>,
    pub outputs: Vec<ArtifactDigest>,
    pub counts: BTreeMap<String, u64>,
}

/// Fingerprint of a run. Holds no timestamps or absolute paths, so identical
/// runs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn count(&self, stage: &str, key: &str) -> Option<u64> {
        self.stages.iter().find(|s| s.stage == stage)?.counts.get(key).copied()
    }

    /// Entities surviving NER, record linkage and entity linking.
    pub fn entity_counts(&self) -> [Option<u64>; 3] {
        [
            self.count("ner", "unique_surfaces"),
            self.count("link-records", "mentioned_clusters"),
            self.count("link-entities", "linked_actors"),
        ]
    }
}

struct Run<'a> {
    config: &'a PipelineConfig,
    out: &'a Path,
    stages: Vec<StageRecord>,
}

impl Run<'_> {
    fn input(&self, p: &Path) -> Result<ArtifactDigest, BoxError> {
        let shown = p.to_string_lossy().into_owned();
        Ok(ArtifactDigest {
            path: shown,
            sha256: file_digest(&self.config.resolve(p))?,
        })
    }

    fn output(&self, name: &str) -> Result<ArtifactDigest, BoxError> {
        Ok(ArtifactDigest {
            path: name.to_string(),
            sha256: file_digest(&self.out.join(name))?,
        })
    }

    fn create(&self, name: &str) -> std::io::Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn record(
        &mut self,
        stage: &str,
        inputs: Vec<ArtifactDigest>,
        outputs: &[&str],
        counts: &[(&str, u64)],
    ) -> Result<(), BoxError> {
        let outputs = outputs.iter().map(|n| self.output(n)).collect::<Result<_, _>>()?;
        self.stages.push(StageRecord {
            stage: stage.to_string(),
            inputs,
            outputs,
            counts: counts.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        });
        Ok(())
    }
}

fn finish<W: Write>(mut w: W) -> std::io::Result<()> {
    w.flush()
}

fn write_json<T: Serialize>(run: &Run<'_>, name: &str, value: &T) -> Result<(), BoxError> {
    let mut w = run.create(name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    finish(w)?;
    Ok(())
}

fn write_graph(run: &Run<'_>, name: &str, g: &WeightedGraph) -> Result<(), BoxError> {
    let mut w = run.create(name)?;
    network::write_graphml(&mut w, g)?;
    finish(w)?;
    Ok(())
}

fn kb_client(config: &PipelineConfig) -> Result<CachedClient, BoxError> {
    let cache = CachedClient::load(&config.resolve(&config.kb_cache))?;
    if config.offline {
        return Ok(CachedClient::offline(cache));
    }
    #[cfg(feature = "sparql")]
    {
        let upstream: Box<dyn kblink::KbClient> = Box::new(kblink::SparqlClient::new(kblink::SparqlConfig::default()));
        Ok(CachedClient::new(cache, Some(upstream)))
    }
    #[cfg(not(feature = "sparql"))]
    {
        log::warn!("built without the sparql feature; KB lookups use the cache only");
        Ok(CachedClient::offline(cache))
    }
}

/// Keep only clusters with at least one surface mentioned in the corpus.
fn mentioned_clusters(aliases: &AliasDictionary, counts: &BTreeMap<String, usize>) -> AliasDictionary {
    AliasDictionary::from_clusters(
        aliases
            .clusters
            .iter()
            .filter(|c| c.members().any(|m| counts.contains_key(m)))
            .cloned()
            .collect(),
    )
}

/// Execute every stage in order, writing artifacts and `manifest.json` into
/// `out`. Artifacts of completed stages stay in place when a later stage fails.
pub fn run_pipeline(config: &PipelineConfig, out: &Path) -> Result<RunManifest, PipelineError> {
    config.validate()?;
    fs::create_dir_all(out).map_err(|e| PipelineError::Stage {
        stage: "setup",
        source: Box::new(e),
    })?;
    let mut run = Run {
        config,
        out,
        stages: Vec::new(),
    };

    // ingest + classify
    let documents = (|| -> Result<_, BoxError> {
        let meta = config.metadata.as_ref().map(|p| config.resolve(p));
        let mut corpus = corpus::ingest_pages(&config.resolve(&config.pages), meta.as_deref())?;
        corpus.classify(&ModalityConfig {
            latin_threshold: config.latin_threshold,
            min_chars: config.min_chars,
        });
        let docs = corpus::group_documents(&corpus, &CorrespondenceFilter::new(&config.keywords));
        let mut w = run.create("corpus.jsonl")?;
        corpus::write_corpus(&mut w, &docs)?;
        finish(w)?;
        let mut inputs = vec![run.input(&config.pages)?];
        if let Some(m) = &config.metadata {
            inputs.push(run.input(m)?);
        }
        let letters = docs.iter().filter(|d| d.is_correspondence).count() as u64;
        run.record(
            "ingest",
            inputs,
            &["corpus.jsonl"],
            &[
                ("pages", corpus.len() as u64),
                ("documents", docs.len() as u64),
                ("correspondence_documents", letters),
            ],
        )?;
        Ok((corpus, docs))
    })()
    .map_err(PipelineError::stage("ingest"))?;
    let (corpus, documents) = documents;

    // ner
    let mentions = (|| -> Result<_, BoxError> {
        let mut recognizers: Vec<Box<dyn Recognizer>> = Vec::new();
        let mut inputs = Vec::new();
        if let Some(g) = &config.gazetteer {
            recognizers.push(Box::new(Gazetteer::from_reader(
                "gazetteer",
                File::open(config.resolve(g))?,
            )?));
            inputs.push(run.input(g)?);
        }
        for p in &config.import_mentions {
            let id = format!("import:{}", p.file_stem().unwrap_or_default().to_string_lossy());
            recognizers.push(Box::new(MentionImport::from_reader(
                id,
                File::open(config.resolve(p))?,
            )?));
            inputs.push(run.input(p)?);
        }
        let refs: Vec<&dyn Recognizer> = recognizers.iter().map(|r| r.as_ref()).collect();
        let set = ner::build_mention_set(&documents, &refs)?;
        let mut w = run.create("mentions.jsonl")?;
        set.write(&mut w)?;
        finish(w)?;
        let stats = corpus.stats(set.mentions.iter().map(|m| m.page_id.as_str()));
        write_json(&run, "corpus_stats.json", &stats)?;
        run.record(
            "ner",
            inputs,
            &["mentions.jsonl", "corpus_stats.json"],
            &[
                ("mentions", set.len() as u64),
                ("unique_surfaces", set.unique_surfaces() as u64),
                ("pages_with_entities", stats.pages_with_entities as u64),
            ],
        )?;
        Ok(set)
    })()
    .map_err(PipelineError::stage("ner"))?;

    // link-records
    let (aliases, seeds) = (|| -> Result<_, BoxError> {
        let seeds: Vec<SeedAlias> = match &config.seeds {
            Some(p) => linkage::read_seeds(File::open(config.resolve(p))?)?,
            None => Vec::new(),
        };
        let lc = LinkageConfig {
            threshold: config.linkage_threshold,
            weights: config.weights()?,
            blocking: config.blocking,
            infixes: InfixSet::default(),
            min_component_score: None,
        };
        let universe = linkage::surface_universe(&mentions.surface_counts, &seeds);
        let table = linkage::build_similarity_table(&universe, &lc.infixes, &lc.weights, lc.blocking);
        let aliases = linkage::link_records(&mentions.surface_counts, &table, &lc, &seeds)?;
        let mut w = run.create("aliases.json")?;
        aliases.write(&mut w)?;
        finish(w)?;
        let inputs = config.seeds.iter().map(|p| run.input(p)).collect::<Result<_, _>>()?;
        let active = mentioned_clusters(&aliases, &mentions.surface_counts).len();
        run.record(
            "link-records",
            inputs,
            &["aliases.json"],
            &[
                ("surfaces", universe.len() as u64),
                ("scored_pairs", table.pairs.len() as u64),
                ("clusters", aliases.len() as u64),
                ("mentioned_clusters", active as u64),
            ],
        )?;
        Ok((aliases, seeds))
    })()
    .map_err(PipelineError::stage("link-records"))?;
    drop(seeds);

    // link-entities
    let actors = (|| -> Result<_, BoxError> {
        let client = kb_client(config)?;
        let active = mentioned_clusters(&aliases, &mentions.surface_counts);
        let anchor = AnchorSpec {
            kb_id: config.anchor.clone(),
            name: config.anchor_name.clone(),
        };
        let options = LinkOptions {
            enrich_country: config.enrich_country,
            keep_unlinked: false,
        };
        let actors = kblink::link_entities(&active, &anchor, &client, &HashedBagOfWords::default(), options)?;
        if client.network_calls() > 0 {
            client.save(&config.resolve(&config.kb_cache))?;
        }
        let mut w = run.create("actors.jsonl")?;
        kblink::write_actors(&mut w, &actors)?;
        finish(w)?;
        let inputs = vec![run.input(&config.kb_cache)?];
        run.record(
            "link-entities",
            inputs,
            &["actors.jsonl"],
            &[("linked_actors", actors.len() as u64)],
        )?;
        Ok(actors)
    })()
    .map_err(PipelineError::stage("link-entities"))?;

    // build-network
    let graph = (|| -> Result<_, BoxError> {
        let full = network::build_cooccurrence(&mentions.mentions, &aliases, &actors);
        let pruned = network::prune(&full, config.min_weight, false);
        write_graph(&run, "g_cooccurrence.graphml", &full)?;
        write_graph(&run, "g_auto.graphml", &pruned)?;
        run.record(
            "build-network",
            Vec::new(),
            &["g_cooccurrence.graphml", "g_auto.graphml"],
            &[
                ("nodes", full.node_count() as u64),
                ("edges", full.edge_count() as u64),
                ("pruned_nodes", pruned.node_count() as u64),
                ("pruned_edges", pruned.edge_count() as u64),
            ],
        )?;
        Ok((full, pruned))
    })()
    .map_err(PipelineError::stage("build-network"))?;
    let (full, pruned) = graph;

    // analyze
    let report = (|| -> Result<AnalysisReport, BoxError> {
        let report = analysis::analyze(&pruned, config.top)?;
        write_json(&run, "stats.json", &report)?;
        run.record(
            "analyze",
            Vec::new(),
            &["stats.json"],
            &[("communities", report.communities.len() as u64)],
        )?;
        Ok(report)
    })()
    .map_err(PipelineError::stage("analyze"))?;

    if let Some(cmp) = &config.compare {
        (|| -> Result<(), BoxError> {
            let rows = network::read_manual_rows(File::open(config.resolve(&cmp.manual))?)?;
            let manual = network::manual_network(&rows, Some(&aliases));
            write_graph(&run, "g_manual.graphml", &manual)?;
            let diff = evaluation::diff_networks(&pruned, &manual, Some(&aliases));
            write_json(&run, "diff.json", &diff)?;
            let by_doc = network::actors_by_document(&mentions.mentions, &aliases, &actors);
            let auto_witnesses = network::cooccurrence_witnesses(&by_doc);
            let manual_witnesses = network::manual_witnesses(&rows, Some(&aliases));
            write_worksheets(&run, &diff, cmp, config.seed, &manual_witnesses, &auto_witnesses)?;
            let mut comparison = StatsComparison {
                graphs: vec!["auto".into()],
                stats: vec![report.stats.clone()],
            };
            if !manual.is_empty() {
                comparison.graphs.push("manual".into());
                comparison.stats.push(analysis::graph_stats(&manual)?);
            }
            let mut w = run.create("comparison.csv")?;
            comparison.write_csv(&mut w)?;
            finish(w)?;
            run.record(
                "compare",
                vec![run.input(&cmp.manual)?],
                &[
                    "g_manual.graphml",
                    "diff.json",
                    "missing_worksheet.csv",
                    "extra_worksheet.csv",
                    "comparison.csv",
                ],
                &[
                    ("missing_edges", diff.missing_edges.len() as u64),
                    ("extra_edges", diff.extra_edges.len() as u64),
                    ("shared_edges", diff.shared_edges.len() as u64),
                ],
            )?;
            Ok(())
        })()
        .map_err(PipelineError::stage("compare"))?;
    }
    drop(full);

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.hash(),
        stages: run.stages,
    };
    let counts = manifest.entity_counts();
    if counts.windows(2).any(|w| w[0] < w[1]) {
        log::warn!("entity counts increase across stages: {counts:?}");
    }
    let write = || -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(out.join("manifest.json"))?);
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        w.write_all(b"\n")?;
        w.flush()
    };
    write().map_err(|e| PipelineError::Stage {
        stage: "manifest",
        source: Box::new(e),
    })?;
    Ok(manifest)
}

fn write_worksheets(
    run: &Run<'_>,
    diff: &NetworkDiff,
    cmp: &CompareConfig,
    seed: u64,
    manual_witnesses: &BTreeMap<evaluation::Edge, Vec<String>>,
    auto_witnesses: &BTreeMap<evaluation::Edge, Vec<String>>,
) -> Result<(), BoxError> {
    let missing = evaluation::sample_connections(&diff.missing_edges, cmp.sample_missing, seed)?;
    let extra = evaluation::sample_connections(&diff.extra_edges, cmp.sample_extra, seed)?;
    let mut w = run.create("missing_worksheet.csv")?;
    evaluation::write_worksheet(&mut w, &evaluation::missing_worksheet(&missing, manual_witnesses))?;
    finish(w)?;
    let mut w = run.create("extra_worksheet.csv")?;
    evaluation::write_worksheet(&mut w, &evaluation::extra_worksheet(&extra, auto_witnesses))?;
    finish(w)?;
    Ok(())
}

/// Write `graph` in `format` to `path`.
pub fn export(graph: &WeightedGraph, format: network::GraphFormat, path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    network::export(&mut w, graph, format)?;
    w.flush()
}

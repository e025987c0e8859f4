use std::error::Error;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use archnet::analysis::{self, StatsComparison};
use archnet::corpus::{self, CorrespondenceFilter, ModalityConfig};
use archnet::evaluation;
use archnet::kblink::{self, AnchorSpec, CachedClient, HashedBagOfWords, KbClient, LinkOptions};
use archnet::linkage::{self, AliasDictionary, Blocking, InfixSet, LinkageConfig, Weights};
use archnet::ner::{self, Gazetteer, MentionImport, MentionSet, Recognizer};
use archnet::network::{self, GraphFormat, WeightedGraph};
use archnet::pipeline::{self, PipelineConfig, PipelineError};
use clap::{Args, Parser, Subcommand};

/// Build and analyze person networks from recognized-text letter archives.
#[derive(Parser)]
#[command(name = "archnet", version)]
struct Cli {
    /// Never contact the knowledge base; answer from the cache only.
    #[arg(long, global = true)]
    offline: bool,
    /// Run every stage single-threaded.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the whole pipeline from a configuration file.
    Run(RunArgs),
    /// Read page records and metadata into a classified corpus.
    Ingest(IngestArgs),
    /// Recognize person mentions in the correspondence.
    Ner(NerArgs),
    /// Cluster surface forms into an alias dictionary.
    LinkRecords(LinkRecordsArgs),
    /// Link alias clusters to knowledge-base entities.
    LinkEntities(LinkEntitiesArgs),
    /// Build the document co-occurrence network.
    BuildNetwork(BuildNetworkArgs),
    /// Load a curated sender-receiver network.
    LoadManual(LoadManualArgs),
    /// Graph statistics and centrality profiles.
    Analyze(AnalyzeArgs),
    /// Diff two networks and sample connections for annotation.
    Compare(CompareArgs),
    /// Tally annotated worksheets.
    Summarize(SummarizeArgs),
    /// Convert a graph to GraphML, node-link JSON or DOT.
    Export(ExportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    min_weight: Option<u64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    top: Option<usize>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    pages: PathBuf,
    #[arg(long)]
    metadata: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    latin_threshold: f64,
    #[arg(long, default_value_t = 20)]
    min_chars: usize,
    /// Title keywords marking correspondence; defaults to the built-in list.
    #[arg(long, value_delimiter = ',')]
    keywords: Option<Vec<String>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NerArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    /// Precomputed mention file; repeatable.
    #[arg(long = "import")]
    imports: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LinkRecordsArgs {
    #[arg(long)]
    mentions: PathBuf,
    #[arg(long)]
    seeds: Option<PathBuf>,
    #[arg(long, default_value_t = 85.0)]
    threshold: f64,
    #[arg(long, default_value = "0.4,0.2,0.4")]
    weights: String,
    #[arg(long, default_value = "none")]
    blocking: String,
    /// Also require every component score to reach this value.
    #[arg(long)]
    min_component_score: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LinkEntitiesArgs {
    #[arg(long)]
    aliases: PathBuf,
    #[arg(long)]
    anchor: String,
    /// Corpus name of the anchor actor, when it differs from the KB label.
    #[arg(long)]
    anchor_name: Option<String>,
    #[arg(long)]
    cache: PathBuf,
    /// Restrict linking to clusters mentioned in this mention file.
    #[arg(long)]
    mentions: Option<PathBuf>,
    #[arg(long)]
    no_country: bool,
    #[arg(long)]
    keep_unlinked: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildNetworkArgs {
    #[arg(long)]
    mentions: PathBuf,
    #[arg(long)]
    aliases: PathBuf,
    #[arg(long)]
    actors: PathBuf,
    #[arg(long, default_value_t = 10)]
    min_weight: u64,
    #[arg(long)]
    keep_isolates: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LoadManualArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    aliases: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Further graphs to tabulate side by side with the main one.
    #[arg(long, num_args = 1..)]
    compare: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    auto: PathBuf,
    #[arg(long)]
    manual: PathBuf,
    #[arg(long)]
    aliases: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    sample_missing: usize,
    #[arg(long, default_value_t = 0)]
    sample_extra: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Letters behind the manual edges, for worksheet witnesses.
    #[arg(long)]
    manual_csv: Option<PathBuf>,
    /// Mentions and actors behind the automatic edges, for worksheet witnesses.
    #[arg(long, requires = "actors")]
    mentions: Option<PathBuf>,
    #[arg(long, requires = "mentions")]
    actors: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    missing: PathBuf,
    #[arg(long)]
    extra: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the stage-flow table for a Sankey chart.
    #[arg(long)]
    flow: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    format: String,
    #[arg(long)]
    out: PathBuf,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Validation(String),
    Stage(String),
}

type Result<T, E = Failure> = std::result::Result<T, E>;

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

fn stage<E: Into<Box<dyn Error>>>(name: &'static str) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Stage(format!("{name}: {}", e.into()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| invalid(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Stage(format!("cannot create {}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Stage(format!("cannot write {}: {e}", path.display())))
}

fn write_with<F>(path: &Path, name: &'static str, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::result::Result<(), Box<dyn Error>>,
{
    let mut w = create(path)?;
    f(&mut w).map_err(stage(name))?;
    w.flush().map_err(stage(name))
}

fn write_json<T: serde::Serialize>(path: &Path, name: &'static str, value: &T) -> Result<()> {
    write_with(path, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn load_graph(path: &Path) -> Result<WeightedGraph> {
    if !path.is_file() {
        return Err(invalid(format!("graph {} not found", path.display())));
    }
    network::read_graph(path).map_err(stage("read graph"))
}

fn load_aliases(path: &Path) -> Result<AliasDictionary> {
    AliasDictionary::read(open(path)?).map_err(stage("read aliases"))
}

fn load_mentions(path: &Path) -> Result<MentionSet> {
    MentionSet::read(open(path)?).map_err(stage("read mentions"))
}

fn save_graph(path: &Path, g: &WeightedGraph) -> Result<()> {
    let format = GraphFormat::from_path(path).map_err(invalid)?;
    write_with(path, "write graph", |w| Ok(network::export(w, g, format)?))
}

fn cmd_run(args: RunArgs, offline: bool) -> Result<()> {
    let mut config = PipelineConfig::load(&args.config).map_err(invalid)?;
    config.offline |= offline;
    if let Some(v) = args.min_weight {
        config.min_weight = v;
    }
    if let Some(v) = args.threshold {
        config.linkage_threshold = v;
    }
    if let Some(w) = &args.weights {
        let w: Weights = w.parse().map_err(invalid)?;
        config.weights = [w.lastname, w.prefix, w.substring];
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.top {
        config.top = v;
    }
    match pipeline::run_pipeline(&config, &args.out) {
        Ok(manifest) => {
            let [ner, clusters, linked] = manifest.entity_counts();
            log::info!("entities: {ner:?} surfaces, {clusters:?} clusters, {linked:?} linked actors");
            Ok(())
        }
        Err(PipelineError::Config(e)) => Err(invalid(e)),
        Err(e) => Err(Failure::Stage(e.to_string())),
    }
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.latin_threshold) {
        return Err(invalid("--latin-threshold must lie in [0, 1]"));
    }
    let pages = corpus::read_pages(open(&a.pages)?).map_err(stage("ingest"))?;
    let metadata = match &a.metadata {
        Some(p) => corpus::read_metadata(open(p)?).map_err(stage("ingest"))?,
        None => Default::default(),
    };
    let mut c = corpus::ingest(pages, &metadata).map_err(stage("ingest"))?;
    c.classify(&ModalityConfig {
        latin_threshold: a.latin_threshold,
        min_chars: a.min_chars,
    });
    let filter = a
        .keywords
        .as_deref()
        .map_or_else(CorrespondenceFilter::default, CorrespondenceFilter::new);
    let docs = corpus::group_documents(&c, &filter);
    write_with(&a.out, "ingest", |w| Ok(corpus::write_corpus(w, &docs)?))
}

fn cmd_ner(a: NerArgs) -> Result<()> {
    let documents = corpus::read_corpus(open(&a.corpus)?).map_err(stage("ner"))?;
    let mut recognizers: Vec<Box<dyn Recognizer>> = Vec::new();
    if let Some(g) = &a.gazetteer {
        recognizers.push(Box::new(
            Gazetteer::from_reader("gazetteer", open(g)?).map_err(stage("ner"))?,
        ));
    }
    for p in &a.imports {
        let id = format!("import:{}", p.file_stem().unwrap_or_default().to_string_lossy());
        recognizers.push(Box::new(
            MentionImport::from_reader(id, open(p)?).map_err(stage("ner"))?,
        ));
    }
    if recognizers.is_empty() {
        return Err(invalid("give --gazetteer or at least one --import"));
    }
    let refs: Vec<&dyn Recognizer> = recognizers.iter().map(|r| r.as_ref()).collect();
    let set = ner::build_mention_set(&documents, &refs).map_err(stage("ner"))?;
    log::info!("{} mentions, {} unique surfaces", set.len(), set.unique_surfaces());
    write_with(&a.out, "ner", |w| Ok(set.write(w)?))
}

fn cmd_link_records(a: LinkRecordsArgs) -> Result<()> {
    let config = LinkageConfig {
        threshold: a.threshold,
        weights: a.weights.parse().map_err(invalid)?,
        blocking: a.blocking.parse::<Blocking>().map_err(invalid)?,
        infixes: InfixSet::default(),
        min_component_score: a.min_component_score,
    };
    if !(0.0..=100.0).contains(&config.threshold) {
        return Err(invalid("--threshold must lie in [0, 100]"));
    }
    let mentions = load_mentions(&a.mentions)?;
    let seeds = match &a.seeds {
        Some(p) => linkage::read_seeds(open(p)?).map_err(invalid)?,
        None => Vec::new(),
    };
    let universe = linkage::surface_universe(&mentions.surface_counts, &seeds);
    let table = linkage::build_similarity_table(&universe, &config.infixes, &config.weights, config.blocking);
    let aliases =
        linkage::link_records(&mentions.surface_counts, &table, &config, &seeds).map_err(stage("link-records"))?;
    log::info!("{} surfaces into {} clusters", universe.len(), aliases.len());
    write_with(&a.out, "link-records", |w| Ok(aliases.write(w)?))
}

fn cmd_link_entities(a: LinkEntitiesArgs, offline: bool) -> Result<()> {
    let mut aliases = load_aliases(&a.aliases)?;
    if let Some(p) = &a.mentions {
        let counts = load_mentions(p)?.surface_counts;
        aliases = AliasDictionary::from_clusters(
            aliases
                .clusters
                .into_iter()
                .filter(|c| c.members().any(|m| counts.contains_key(m)))
                .collect(),
        );
    }
    let cache = CachedClient::load(&a.cache).map_err(stage("link-entities"))?;
    let client = if offline {
        CachedClient::offline(cache)
    } else {
        let upstream: Box<dyn KbClient> = Box::new(kblink::SparqlClient::new(kblink::SparqlConfig::default()));
        CachedClient::new(cache, Some(upstream))
    };
    let anchor = AnchorSpec {
        kb_id: a.anchor.clone(),
        name: a.anchor_name.clone(),
    };
    let options = LinkOptions {
        enrich_country: !a.no_country,
        keep_unlinked: a.keep_unlinked,
    };
    let result = kblink::link_entities(&aliases, &anchor, &client, &HashedBagOfWords::default(), options);
    if client.network_calls() > 0 {
        client.save(&a.cache).map_err(stage("link-entities"))?;
    }
    let actors = result.map_err(stage("link-entities"))?;
    write_with(&a.out, "link-entities", |w| Ok(kblink::write_actors(w, &actors)?))
}

fn cmd_build_network(a: BuildNetworkArgs) -> Result<()> {
    if a.min_weight == 0 {
        return Err(invalid("--min-weight must be at least 1"));
    }
    let mentions = load_mentions(&a.mentions)?;
    let aliases = load_aliases(&a.aliases)?;
    let actors = kblink::read_actors(open(&a.actors)?).map_err(stage("build-network"))?;
    let full = network::build_cooccurrence(&mentions.mentions, &aliases, &actors);
    let g = network::prune(&full, a.min_weight, a.keep_isolates);
    log::info!("{} nodes and {} edges after pruning", g.node_count(), g.edge_count());
    save_graph(&a.out, &g)
}

fn cmd_load_manual(a: LoadManualArgs) -> Result<()> {
    let aliases = a.aliases.as_deref().map(load_aliases).transpose()?;
    let g = network::load_manual_network(open(&a.csv)?, aliases.as_ref()).map_err(invalid)?;
    save_graph(&a.out, &g)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let g = load_graph(&a.graph)?;
    let report = analysis::analyze(&g, a.top).map_err(stage("analyze"))?;
    if !a.compare.is_empty() {
        let mut cmp = StatsComparison {
            graphs: vec![a.graph.display().to_string()],
            stats: vec![report.stats.clone()],
        };
        for p in &a.compare {
            let other = load_graph(p)?;
            cmp.stats.push(analysis::graph_stats(&other).map_err(stage("analyze"))?);
            cmp.graphs.push(p.display().to_string());
        }
        write_json(&sibling(&a.out, "_comparison.json"), "analyze", &cmp)?;
        write_with(
            &sibling(&a.out, "_comparison.csv"),
            "analyze",
            |w| Ok(cmp.write_csv(w)?),
        )?;
    }
    write_json(&a.out, "analyze", &report)
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let auto = load_graph(&a.auto)?;
    let manual = load_graph(&a.manual)?;
    let aliases = a.aliases.as_deref().map(load_aliases).transpose()?;
    let diff = evaluation::diff_networks(&auto, &manual, aliases.as_ref());
    log::info!(
        "{} missing, {} extra, {} shared edges",
        diff.missing_edges.len(),
        diff.extra_edges.len(),
        diff.shared_edges.len()
    );
    let manual_witnesses = match &a.manual_csv {
        Some(p) => {
            let rows = network::read_manual_rows(open(p)?).map_err(invalid)?;
            network::manual_witnesses(&rows, aliases.as_ref())
        }
        None => Default::default(),
    };
    let auto_witnesses = match (&a.mentions, &a.actors, &aliases) {
        (Some(m), Some(ac), Some(al)) => {
            let mentions = load_mentions(m)?;
            let actors = kblink::read_actors(open(ac)?).map_err(stage("compare"))?;
            network::cooccurrence_witnesses(&network::actors_by_document(&mentions.mentions, al, &actors))
        }
        _ => Default::default(),
    };
    let missing = evaluation::sample_connections(&diff.missing_edges, a.sample_missing, a.seed).map_err(invalid)?;
    let extra = evaluation::sample_connections(&diff.extra_edges, a.sample_extra, a.seed).map_err(invalid)?;
    write_json(&a.out.join("diff.json"), "compare", &diff)?;
    let rows = evaluation::missing_worksheet(&missing, &manual_witnesses);
    write_with(&a.out.join("missing_worksheet.csv"), "compare", |w| {
        Ok(evaluation::write_worksheet(w, &rows)?)
    })?;
    let rows = evaluation::extra_worksheet(&extra, &auto_witnesses);
    write_with(&a.out.join("extra_worksheet.csv"), "compare", |w| {
        Ok(evaluation::write_worksheet(w, &rows)?)
    })
}

fn cmd_summarize(a: SummarizeArgs) -> Result<()> {
    let missing = evaluation::read_worksheet(open(&a.missing)?).map_err(invalid)?;
    let extra = match &a.extra {
        Some(p) => evaluation::read_worksheet(open(p)?).map_err(invalid)?,
        None => Vec::new(),
    };
    let summary = evaluation::summarize_annotations(&missing, &extra).map_err(invalid)?;
    if let Some(p) = &a.flow {
        write_with(p, "summarize", |w| Ok(summary.write_flow_csv(w)?))?;
    }
    write_json(&a.out, "summarize", &summary)
}

fn cmd_export(a: ExportArgs) -> Result<()> {
    let format: GraphFormat = a.format.parse().map_err(invalid)?;
    let g = load_graph(&a.graph)?;
    write_with(&a.out, "export", |w| Ok(network::export(w, &g, format)?))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if cli.sequential {
        archnet::par::set_parallelism(false);
    }
    let offline = cli.offline;
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, offline),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Ner(a) => cmd_ner(a),
        Command::LinkRecords(a) => cmd_link_records(a),
        Command::LinkEntities(a) => cmd_link_entities(a, offline),
        Command::BuildNetwork(a) => cmd_build_network(a),
        Command::LoadManual(a) => cmd_load_manual(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Export(a) => cmd_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            log::error!("{m}");
            ExitCode::from(2)
        }
        Err(Failure::Stage(m)) => {
            log::error!("{m}");
            ExitCode::from(3)
        }
    }
}

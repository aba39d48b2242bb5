use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde_json::json;

use semctx::cluster::Linkage;
use semctx::concept::{ConceptMeasure, ConceptSimilarity, SimilarityConfig};
use semctx::ddg::EdgeKind;
use semctx::export::matrix_csv;
use semctx::facts::{extract_corpus, load_facts, load_library, CorpusFacts, LibraryFacts};
use semctx::lexical::LexicalKernel;
use semctx::pipeline::{
    deltas, document_similarity, heatmap, identifier_table, modularize, topics, Enrichment, Inputs, Model,
    PipelineConfig, Scores, TopicSource,
};
use semctx::syntax::{parse_compilation, SourceUnit};
use semctx::tree::{authoritative_tree, path_difference, ted, LabeledTree};
use semctx::vector::{kernel_to_distance, Weighting};

/// Semantically enriched context models of source code.
#[derive(Parser)]
#[command(name = "semctx", version, about)]
struct Cli {
    /// Corpus facts, one JSON document per line.
    #[arg(long, global = true)]
    facts: Option<PathBuf>,
    /// Library facts JSON with a `types` array.
    #[arg(long, global = true)]
    libs: Option<PathBuf>,
    /// Source file or directory to parse, repeatable; required by graph models.
    #[arg(long, global = true)]
    src: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for pairwise computations.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JSON pipeline configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse sources and write their facts.
    Ingest,
    /// Write the semantic network as CSV edges and DOT.
    Network,
    /// Write a similarity table between concepts or identifiers.
    Similarity {
        /// Conceptual measure for the concept table.
        #[arg(long, value_parser = parse_enum::<ConceptMeasure>, default_value = "diffusion")]
        measure: ConceptMeasure,
        /// Compare identifiers under the configured enrichment instead.
        #[arg(long)]
        identifiers: bool,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Write the document similarity and distance tables.
    Kernel {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Write per-module dependency graphs.
    Ddg,
    /// Cluster modules and score the result against the package tree.
    Modularize {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        cut: CutArgs,
    },
    /// Cluster identifiers into topics.
    Topics {
        /// Number of topics.
        #[arg(long)]
        k: usize,
        /// Context the identifiers are compared in.
        #[arg(long, value_parser = parse_enum::<TopicSource>, default_value = "boit")]
        via: TopicSource,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Write the module by type usage map and its distance tables.
    Heatmap {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Compare a produced tree with the authoritative one.
    Evaluate {
        /// Produced decomposition in Newick.
        #[arg(long)]
        produced: PathBuf,
        /// Authoritative tree in Newick; built from the facts when absent.
        #[arg(long)]
        authoritative: Option<PathBuf>,
        /// Baseline decomposition in Newick for percentage deltas.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[command(flatten)]
        cut: CutArgs,
    },
}

/// Overrides of the pipeline configuration.
#[derive(Args, Default)]
struct ModelArgs {
    #[arg(long, value_parser = parse_enum::<Model>)]
    model: Option<Model>,
    #[arg(long, value_parser = parse_enum::<Enrichment>)]
    enrichment: Option<Enrichment>,
    #[arg(long, value_parser = parse_enum::<ConceptMeasure>)]
    concept: Option<ConceptMeasure>,
    /// Lexical kernel, or `none`.
    #[arg(long)]
    lexical: Option<String>,
    /// Identity feature similarity and no weighting.
    #[arg(long)]
    plain: bool,
    #[arg(long, value_parser = parse_enum::<Weighting>)]
    weighting: Option<Weighting>,
    #[arg(long, value_parser = parse_enum::<Linkage>)]
    linkage: Option<Linkage>,
    /// Compare identifiers case-sensitively.
    #[arg(long)]
    case_sensitive: bool,
    /// Walk-kernel decay.
    #[arg(long)]
    lambda: Option<f64>,
}

/// Dendrogram cut and scoring options.
#[derive(Args, Default)]
struct CutArgs {
    /// Cut the dendrogram into this many groups.
    #[arg(long)]
    k: Option<usize>,
    /// Count edges instead of nodes in path difference.
    #[arg(long)]
    pd_edges: bool,
    /// Report the square root of the path difference.
    #[arg(long)]
    pd_sqrt: bool,
    /// Packages with fewer direct modules are dissolved into their parent.
    #[arg(long)]
    min_package_size: Option<usize>,
    /// Packages with more direct modules are split evenly.
    #[arg(long)]
    max_package_size: Option<usize>,
}

impl CutArgs {
    fn apply(&self, mut cfg: PipelineConfig) -> Result<PipelineConfig> {
        if self.k.is_some() {
            cfg.k = self.k;
        }
        if self.pd_edges {
            cfg.pd.edges = true;
        }
        if self.pd_sqrt {
            cfg.pd.sqrt = true;
        }
        if let Some(n) = self.min_package_size {
            cfg.thresholds.min_size = n;
        }
        if let Some(n) = self.max_package_size {
            cfg.thresholds.max_size = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_lowercase())).map_err(|_| format!("unknown value `{}`", s))
}

impl ModelArgs {
    fn apply(&self, mut cfg: PipelineConfig) -> Result<PipelineConfig> {
        if let Some(m) = self.model {
            cfg.model = m;
        }
        if let Some(e) = self.enrichment {
            cfg.enrichment = e;
        }
        if self.concept.is_some() || self.lexical.is_some() {
            cfg.enrichment = Enrichment::Custom;
            cfg.concept = self.concept.or(cfg.concept);
            if let Some(l) = &self.lexical {
                cfg.lexical = if l == "none" { None } else { Some(parse_enum::<LexicalKernel>(l).map_err(anyhow::Error::msg)?) };
            }
        }
        if self.plain {
            cfg.enrichment = Enrichment::Plain;
            cfg.weighting = Weighting::None;
        }
        if let Some(w) = self.weighting {
            cfg.weighting = w;
        }
        if let Some(l) = self.linkage {
            cfg.linkage = l;
        }
        if self.case_sensitive {
            cfg.case_sensitive = true;
        }
        if self.lambda.is_some() {
            cfg.lambda = self.lambda;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

struct Session {
    out: PathBuf,
    config: PipelineConfig,
    facts: Option<PathBuf>,
    libs: LibraryFacts,
    src: Vec<PathBuf>,
}

impl Session {
    fn config(&self, args: &ModelArgs) -> Result<PipelineConfig> {
        args.apply(self.config.clone())
    }

    fn sources(&self) -> Result<Vec<SourceUnit>> {
        let mut files = Vec::new();
        for root in &self.src {
            for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
                let entry = entry.with_context(|| format!("reading {}", root.display()))?;
                if entry.file_type().is_file() {
                    files.push(entry.into_path());
                }
            }
        }
        let mut units = Vec::new();
        for f in files {
            let text = fs::read_to_string(&f).with_context(|| format!("reading {}", f.display()))?;
            let parsed = parse_compilation(&text).with_context(|| format!("parsing {}", f.display()))?;
            info!("{}: {} classes", f.display(), parsed.len());
            units.extend(parsed);
        }
        Ok(units)
    }

    fn inputs(&self) -> Result<Inputs> {
        let sources = if self.src.is_empty() { Vec::new() } else { self.sources()? };
        let corpus = match &self.facts {
            Some(path) => load_facts(path).with_context(|| format!("loading facts {}", path.display()))?,
            None if !sources.is_empty() => extract_corpus(&sources, &self.libs),
            None => bail!("no corpus: pass --facts or --src"),
        };
        if corpus.units.is_empty() {
            bail!("the corpus is empty");
        }
        for ty in corpus.unresolved_types(&self.libs) {
            warn!("type `{}` is neither declared in the corpus nor in the library facts", ty);
        }
        Ok(Inputs { corpus, libs: self.libs.clone(), sources })
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    fn write_json(&self, name: &str, value: &impl serde::Serialize) -> Result<PathBuf> {
        self.write(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {:#}", e);
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => PipelineConfig::default(),
    };
    let libs = match &cli.libs {
        Some(path) => load_library(path).with_context(|| format!("loading library facts {}", path.display()))?,
        None => LibraryFacts::default(),
    };
    let s = Session { out: cli.out, config, facts: cli.facts, libs, src: cli.src };
    match cli.command {
        Command::Ingest => ingest(&s),
        Command::Network => network(&s),
        Command::Similarity { measure, identifiers, model } => similarity(&s, measure, identifiers, &model),
        Command::Kernel { model } => kernel(&s, &model),
        Command::Ddg => ddg(&s),
        Command::Modularize { model, cut } => run_modularize(&s, &model, &cut),
        Command::Topics { k, via, model } => run_topics(&s, k, via, &model),
        Command::Heatmap { model } => run_heatmap(&s, &model),
        Command::Evaluate { produced, authoritative, baseline, cut } => {
            evaluate(&s, &produced, authoritative.as_deref(), baseline.as_deref(), &cut)
        }
    }
}

fn ingest(s: &Session) -> Result<()> {
    if s.src.is_empty() {
        bail!("ingest needs --src");
    }
    let units = s.sources()?;
    let corpus: CorpusFacts = extract_corpus(&units, &s.libs);
    for ty in corpus.unresolved_types(&s.libs) {
        warn!("type `{}` is neither declared in the corpus nor in the library facts", ty);
    }
    s.write("facts.jsonl", &corpus.to_jsonl())?;
    Ok(())
}

fn network(s: &Session) -> Result<()> {
    let inputs = s.inputs()?;
    let net = inputs.network(s.config.supervised);
    for w in net.warnings() {
        warn!("{}", w);
    }
    s.write("network.csv", &net.to_csv())?;
    s.write("network.dot", &net.to_dot())?;
    Ok(())
}

fn similarity(s: &Session, measure: ConceptMeasure, identifiers: bool, args: &ModelArgs) -> Result<()> {
    let inputs = s.inputs()?;
    let cfg = s.config(args)?;
    if identifiers {
        let vocab: BTreeSet<String> =
            inputs.corpus.units.iter().flat_map(|u| u.occurrences.iter().map(|o| o.id.clone())).collect();
        let table = identifier_table(&inputs, &cfg, &vocab)?;
        let labels: Vec<String> = vocab.into_iter().collect();
        s.write("identifier_similarity.csv", &matrix_csv(&labels, &labels, &table))?;
        return Ok(());
    }
    let net = inputs.network(cfg.supervised);
    let sim = SimilarityConfig { measure, alpha_ipl: cfg.alpha_ipl, alpha_diffusion: cfg.alpha_diffusion };
    let cs = ConceptSimilarity::new(&net, sim)?;
    let labels = cs.hierarchy().concepts().to_vec();
    s.write(&format!("similarity_{}.csv", measure.name()), &matrix_csv(&labels, &labels, &cs.table(&labels)))?;
    Ok(())
}

fn kernel(s: &Session, args: &ModelArgs) -> Result<()> {
    let inputs = s.inputs()?;
    let cfg = s.config(args)?;
    let k = document_similarity(&inputs, &cfg)?;
    let labels = inputs.unit_names();
    s.write("kernel.csv", &matrix_csv(&labels, &labels, &k))?;
    s.write("distance.csv", &matrix_csv(&labels, &labels, &kernel_to_distance(&k)))?;
    Ok(())
}

fn ddg(s: &Session) -> Result<()> {
    if s.src.is_empty() {
        bail!("dependency graphs need --src");
    }
    let inputs = s.inputs()?;
    let graphs = inputs.graphs()?;
    let mut csv = String::from("module,source,target,kind\n");
    for g in &graphs {
        s.write(&format!("ddg/{}.dot", g.name), &g.to_dot())?;
        for (a, b, kind) in g.edge_keys() {
            csv.push_str(&csv_line(&[&g.name, a, b, EdgeKind::name(kind)]));
        }
    }
    s.write("ddg.csv", &csv)?;
    Ok(())
}

fn csv_line(fields: &[&str]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(fields).expect("in-memory csv");
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8")
}

fn run_modularize(s: &Session, args: &ModelArgs, cut: &CutArgs) -> Result<()> {
    let inputs = s.inputs()?;
    let cfg = cut.apply(s.config(args)?)?;
    let m = modularize(&inputs, &cfg)?;
    let mut report = m.report;
    report.artifacts.push(s.write("dendrogram.nwk", &(m.dendrogram.to_newick() + "\n"))?.display().to_string());
    report.artifacts.push(s.write("produced.nwk", &(m.produced.to_newick() + "\n"))?.display().to_string());
    report.artifacts.push(s.write("authoritative.nwk", &(m.authoritative.to_newick() + "\n"))?.display().to_string());
    if let Some(p) = &report.partition {
        report.artifacts.push(s.write_json("partition.json", p)?.display().to_string());
    }
    s.write_json("report.json", &report)?;
    println!(
        "PD {} ({}) TED {} ({}) against baseline PD {} TED {}",
        report.scores.pd, report.deltas.pd, report.scores.ted, report.deltas.ted, report.baseline.pd, report.baseline.ted
    );
    Ok(())
}

fn run_topics(s: &Session, k: usize, via: TopicSource, args: &ModelArgs) -> Result<()> {
    let inputs = s.inputs()?;
    let cfg = s.config(args)?;
    if via == TopicSource::Ddg && inputs.sources.is_empty() {
        bail!("topics via ddg need --src");
    }
    // topic contexts default to raw counts
    let weighting = args.weighting.unwrap_or(Weighting::None);
    let t = topics(&inputs, &cfg, k, via, weighting)?;
    s.write("topics.nwk", &(t.dendrogram.to_newick() + "\n"))?;
    s.write_json("topics.json", &t.report)?;
    for (i, topic) in t.report.topics.iter().enumerate() {
        println!("topic {}: {}", i + 1, topic.join(" "));
    }
    Ok(())
}

fn run_heatmap(s: &Session, args: &ModelArgs) -> Result<()> {
    let inputs = s.inputs()?;
    let cfg = s.config(args)?;
    let h = heatmap(&inputs, &cfg)?;
    for w in &h.warnings {
        println!("warning: {}", w);
    }
    let rows: Vec<String> = h.modules.iter().zip(&h.packages).map(|(m, p)| format!("{}|{}", p, m)).collect();
    s.write("heatmap.csv", &matrix_csv(&rows, &h.types, &h.counts))?;
    s.write("module_distance.csv", &matrix_csv(&h.modules, &h.modules, &h.module_distance))?;
    s.write("type_distance.csv", &matrix_csv(&h.types, &h.types, &h.type_distance))?;
    Ok(())
}

fn read_tree(path: &Path) -> Result<LabeledTree> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    LabeledTree::parse_newick(&text).with_context(|| format!("parsing {}", path.display()))
}

fn score(produced: &LabeledTree, truth: &LabeledTree, cfg: &PipelineConfig) -> Result<Scores> {
    let produced = produced
        .restrict_leaves(&truth.leaf_set(), true)
        .context("the produced tree shares no leaf with the authoritative tree")?;
    Ok(Scores { pd: path_difference(&produced, truth, cfg.pd)?, ted: ted(&produced, truth)? })
}

fn evaluate(
    s: &Session,
    produced: &Path,
    authoritative: Option<&Path>,
    baseline: Option<&Path>,
    cut: &CutArgs,
) -> Result<()> {
    let cfg = cut.apply(s.config.clone())?;
    let truth = match authoritative {
        Some(path) => read_tree(path)?,
        None => authoritative_tree(&s.inputs()?.corpus, cfg.thresholds)?,
    };
    let scores = score(&read_tree(produced)?, &truth, &cfg)?;
    let mut report = json!({ "pd": scores.pd, "ted": scores.ted });
    match baseline {
        Some(path) => {
            let base = score(&read_tree(path)?, &truth, &cfg)?;
            let d = deltas(scores, base);
            println!("PD {} ({}) TED {} ({})", scores.pd, d.pd, scores.ted, d.ted);
            report["baseline"] = json!({ "pd": base.pd, "ted": base.ted });
            report["deltas"] = serde_json::to_value(&d)?;
        }
        None => println!("PD {} TED {}", scores.pd, scores.ted),
    }
    s.write_json("evaluation.json", &report)?;
    Ok(())
}

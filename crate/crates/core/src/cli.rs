//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit status: 0 on success, 1 on usage
//! errors, 2 on data errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::apigraph::{
    api_usage, build_vocabulary, extract_app_graph, extraction_provenance, parse_listing, ApiCallGraph,
    ApiVocabulary, AppApiUsage, Label,
};
use crate::checkpoint::{Checkpoint, ModelKind};
use crate::error::{Error, Result};
use crate::evalmetrics::{evaluate_corpus, sweep, sweep_csv, AppTruth, Level, Source, SWEEP_THRESHOLDS};
use crate::gam::{train_gam, GamConfig, GamModel};
use crate::gat::{train_gat, GatConfig, GatModel};
use crate::localize::{
    AppDetection, LocalizationReport, Thresholds, DEFAULT_CLASS_THRESHOLD, DEFAULT_METHOD_THRESHOLD,
};
use crate::pipeline::{analyze_corpus, predict_both, with_workers};
use crate::synthcorpus::{gen_corpus, library, CorpusLayout, CorpusManifest, CorpusSpec, Split};

pub const DETECT_FORMAT: &str = "xaidroid-detect-v1";
pub const SWEEP_FORMAT: &str = "xaidroid-sweep-v1";

#[derive(Parser, Debug)]
#[command(name = "xaidroid", version, about = "Malware detection and localization over Android API call graphs")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,

    /// Worker threads for per-app stages (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    /// Log progress to stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a labeled synthetic corpus.
    GenCorpus(GenCorpusArgs),
    /// Build the sensitive-API vocabulary from a corpus's listings.
    BuildVocab(BuildVocabArgs),
    /// Turn method listings into API call graphs.
    Extract(ExtractArgs),
    /// Train one model on labeled graphs.
    Train(TrainArgs),
    /// App-level verdicts from both models.
    Detect(DetectArgs),
    /// Method- and class-level localization reports.
    Localize(LocalizeArgs),
    /// Score reports against ground truth.
    Evaluate(EvaluateArgs),
    /// Recall and F1 across attention thresholds.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitArg {
    Train,
    Test,
    All,
}

impl SplitArg {
    fn split(self) -> Option<Split> {
        match self {
            SplitArg::Train => Some(Split::Train),
            SplitArg::Test => Some(Split::Test),
            SplitArg::All => None,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct GenCorpusArgs {
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub n_apps: usize,
    #[arg(long, default_value_t = 0.5)]
    pub malware_ratio: f64,
    #[arg(long, default_value_t = 84.0)]
    pub mean_nodes: f64,
    #[arg(long, default_value_t = 20)]
    pub min_nodes: usize,
    #[arg(long, default_value_t = 200)]
    pub max_nodes: usize,
    /// Vocabulary threshold applied to the training split.
    #[arg(long, default_value_t = 10)]
    pub min_apps: usize,
    /// Motif to plant (repeatable; default all).
    #[arg(long = "motif")]
    pub motifs: Vec<String>,
    /// Sprinkle uncalled motif APIs into benign apps.
    #[arg(long)]
    pub decoy: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct BuildVocabArgs {
    /// Corpus directory, or any directory of `.slst` listings.
    #[arg(long)]
    #[serde(skip)]
    pub corpus: PathBuf,
    /// Superset of sensitive APIs, one per line [default: <corpus>/superset.txt].
    #[arg(long)]
    #[serde(skip)]
    pub superset: Option<PathBuf>,
    /// Keep APIs used by at least this many apps.
    #[arg(long, default_value_t = 10)]
    pub min_apps: usize,
    /// Corpus split whose apps are counted.
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    pub split: SplitArg,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct ExtractArgs {
    /// Listing files (`.slst`); the file stem is the app id.
    #[serde(skip)]
    pub listings: Vec<PathBuf>,
    /// Extract every app of a corpus directory instead.
    #[arg(long, conflicts_with = "listings")]
    #[serde(skip)]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
    #[arg(long)]
    #[serde(skip)]
    pub vocab: PathBuf,
    /// Directory of `<app-id>.json` truth files supplying labels.
    #[arg(long)]
    #[serde(skip)]
    pub truth: Option<PathBuf>,
    /// Output directory for `<app-id>.json` graphs.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

/// Graphs to read: a corpus split, or explicit files and directories.
#[derive(Args, Debug, Serialize)]
pub struct GraphInput {
    /// Graph files or directories of them.
    #[serde(skip)]
    pub graphs: Vec<PathBuf>,
    /// Corpus directory; its `graphs/` are read for the chosen split.
    #[arg(long, conflicts_with = "graphs")]
    #[serde(skip)]
    pub corpus: Option<PathBuf>,
    /// Corpus split (default: train for `train`, test otherwise).
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: ModelKind,
    #[command(flatten)]
    pub input: GraphInput,
    /// Vocabulary the graphs were extracted with [default: <corpus>/vocab.json].
    #[arg(long)]
    #[serde(skip)]
    pub vocab: Option<PathBuf>,
    /// Overrides the model's default epoch count.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Overrides the model's default learning rate.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// GAM only: nodes visited per rollout.
    #[arg(long)]
    pub step_size: Option<usize>,
    /// GAM only: agents per graph.
    #[arg(long)]
    pub agents: Option<usize>,
    /// Output checkpoint file.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Debug, Serialize)]
pub struct ModelPair {
    /// GAM checkpoint.
    #[arg(long)]
    #[serde(skip)]
    pub gam: PathBuf,
    /// GAT checkpoint.
    #[arg(long)]
    #[serde(skip)]
    pub gat: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct DetectArgs {
    #[command(flatten)]
    pub models: ModelPair,
    #[command(flatten)]
    pub input: GraphInput,
    /// Output file [default: stdout].
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct LocalizeArgs {
    #[command(flatten)]
    pub models: ModelPair,
    #[command(flatten)]
    pub input: GraphInput,
    #[arg(long, default_value_t = DEFAULT_METHOD_THRESHOLD)]
    pub method_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_CLASS_THRESHOLD)]
    pub class_threshold: f64,
    /// Also write a `<app-id>.txt` rendering next to each report.
    #[arg(long)]
    pub text: bool,
    /// Output directory for `<app-id>.json` reports.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelArg {
    App,
    Class,
    Method,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Level {
        match l {
            LevelArg::App => Level::App,
            LevelArg::Class => Level::Class,
            LevelArg::Method => Level::Method,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceArg {
    Ensemble,
    Gam,
    Gat,
}

impl From<SourceArg> for Source {
    fn from(s: SourceArg) -> Source {
        match s {
            SourceArg::Ensemble => Source::Ensemble,
            SourceArg::Gam => Source::Gam,
            SourceArg::Gat => Source::Gat,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct EvaluateArgs {
    /// Directory of localization reports.
    #[arg(long)]
    #[serde(skip)]
    pub reports: PathBuf,
    /// Directory of truth files (a corpus's `truth/`).
    #[arg(long)]
    #[serde(skip)]
    pub truth: PathBuf,
    #[arg(long, value_enum)]
    pub level: LevelArg,
    #[arg(long, value_enum, default_value_t = SourceArg::Ensemble)]
    pub source: SourceArg,
    /// Print an aligned table instead of JSON on stdout.
    #[arg(long)]
    pub text: bool,
    /// Also write the JSON evaluation here.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    #[serde(skip)]
    pub reports: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value_t = LevelArg::Method)]
    pub level: LevelArg,
    #[arg(long, value_enum, default_value_t = SourceArg::Ensemble)]
    pub source: SourceArg,
    /// Comma-separated thresholds [default: 5e-3,1e-3,5e-4,1e-4,5e-5].
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<f64>,
    /// CSV output [default: stdout].
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("xaidroid: {e}");
            if e.is_usage() {
                1
            } else {
                2
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let ctx = Ctx {
        seed: cli.seed,
        workers: cli.workers,
    };
    match &cli.command {
        Command::GenCorpus(a) => ctx.gen_corpus(a),
        Command::BuildVocab(a) => ctx.build_vocab(a),
        Command::Extract(a) => ctx.extract(a),
        Command::Train(a) => ctx.train(a),
        Command::Detect(a) => ctx.detect(a),
        Command::Localize(a) => ctx.localize(a),
        Command::Evaluate(a) => ctx.evaluate(a),
        Command::Sweep(a) => ctx.sweep(a),
    }
}

struct Ctx {
    seed: u64,
    workers: usize,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash over `(name, content hash)` pairs, in the given order.
fn digest_named(items: &[(String, String)]) -> String {
    let mut h = Sha256::new();
    for (name, digest) in items {
        h.update(name.as_bytes());
        h.update(b"\0");
        h.update(digest.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::usage(format!("no such file: {}", path.display())));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn make_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Files with extension `ext` directly inside `dir`, sorted by name.
fn files_in(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::usage(format!("no such directory: {}", dir.display())));
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() && p.extension().is_some_and(|x| x == ext) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .ok_or_else(|| Error::usage(format!("cannot take an app id from {}", path.display())))
}

fn load_vocab(path: &Path) -> Result<(ApiVocabulary, String)> {
    let text = read_text(path)?;
    let v: ApiVocabulary = serde_json::from_str(&text)?;
    Ok((v, sha256_hex(text.as_bytes())))
}

fn load_checkpoint(path: &Path) -> Result<(Checkpoint, String)> {
    let text = read_text(path)?;
    Ok((Checkpoint::from_json(&text)?, sha256_hex(text.as_bytes())))
}

/// Reads every `.json` file of `dir` with `parse`, sorted by file name.
fn load_dir<T>(dir: &Path, parse: impl Fn(&str) -> Result<T>) -> Result<(Vec<T>, String)> {
    let mut items = Vec::new();
    let mut named = Vec::new();
    for p in files_in(dir, "json")? {
        let text = read_text(&p)?;
        named.push((stem(&p)?, sha256_hex(text.as_bytes())));
        items.push(parse(&text).map_err(|e| Error::data(format!("{}: {e}", p.display())))?);
    }
    if items.is_empty() {
        return Err(Error::usage(format!("no .json files in {}", dir.display())));
    }
    Ok((items, digest_named(&named)))
}

impl GraphInput {
    /// Graphs in a stable order plus a digest of their files.
    fn load(&self, default_split: SplitArg) -> Result<(Vec<ApiCallGraph>, String)> {
        let paths: Vec<PathBuf> = match &self.corpus {
            Some(dir) => {
                let manifest = CorpusManifest::load(dir)?;
                let split = self.split.unwrap_or(default_split).split();
                let l = CorpusLayout(dir);
                manifest.ids(split).into_iter().map(|id| l.graph(id)).collect()
            }
            None => {
                let mut out = Vec::new();
                for p in &self.graphs {
                    if p.is_dir() {
                        out.extend(files_in(p, "json")?);
                    } else {
                        out.push(p.clone());
                    }
                }
                out
            }
        };
        if paths.is_empty() {
            return Err(Error::usage("no input graphs (give graph files or --corpus)"));
        }
        let mut graphs = Vec::with_capacity(paths.len());
        let mut named = Vec::with_capacity(paths.len());
        for p in &paths {
            let text = read_text(p)?;
            named.push((stem(p)?, sha256_hex(text.as_bytes())));
            graphs.push(ApiCallGraph::from_json(&text).map_err(|e| Error::data(format!("{}: {e}", p.display())))?);
        }
        Ok((graphs, digest_named(&named)))
    }
}

/// Rejects graphs whose node ids or recorded vocabulary disagree with the
/// vocabulary a model was trained on.
fn check_graphs(graphs: &[ApiCallGraph], vocab_sha256: &str, vocab_size: usize) -> Result<()> {
    for g in graphs {
        if let Some(h) = g.provenance.as_ref().and_then(|p| p.get("vocab_sha256")).and_then(Value::as_str) {
            if h != vocab_sha256 {
                return Err(Error::data(format!("{}: graph was extracted with a different vocabulary", g.app_id)));
            }
        }
        if g.nodes.iter().any(|n| n.id as usize >= vocab_size) {
            return Err(Error::data(format!("{}: node id outside the vocabulary", g.app_id)));
        }
    }
    Ok(())
}

impl Ctx {
    /// Provenance block: tool, command, seed, the non-path configuration and
    /// content hashes of the inputs.
    fn provenance(&self, command: &str, config: &impl Serialize, inputs: BTreeMap<&str, String>) -> Result<Value> {
        Ok(json!({
            "tool": "xaidroid",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": self.seed,
            "config": serde_json::to_value(config)?,
            "inputs": inputs,
        }))
    }

    fn gen_corpus(&self, a: &GenCorpusArgs) -> Result<()> {
        let spec = CorpusSpec {
            n_apps: a.n_apps,
            malware_ratio: a.malware_ratio,
            mean_nodes: a.mean_nodes,
            min_nodes: a.min_nodes,
            max_nodes: a.max_nodes,
            min_apps: a.min_apps,
            motifs: if a.motifs.is_empty() {
                library().iter().map(|m| m.name.to_owned()).collect()
            } else {
                a.motifs.clone()
            },
            decoy: a.decoy,
            seed: self.seed,
            ..CorpusSpec::default()
        };
        let mut corpus = with_workers(self.workers, || gen_corpus(&spec))??;
        corpus.manifest.provenance = self.provenance("gen-corpus", a, BTreeMap::new())?;
        corpus.write(&a.out)?;
        info!("wrote {} apps to {}", corpus.apps.len(), a.out.display());
        Ok(())
    }

    fn build_vocab(&self, a: &BuildVocabArgs) -> Result<()> {
        let dir = &a.corpus;
        let (files, ids): (Vec<PathBuf>, Vec<String>) = if dir.join("manifest.json").exists() {
            let m = CorpusManifest::load(dir)?;
            let l = CorpusLayout(dir);
            m.ids(a.split.split()).into_iter().map(|id| (l.listing(id), id.to_owned())).unzip()
        } else {
            let files = files_in(dir, "slst")?;
            let ids = files.iter().map(|p| stem(p)).collect::<Result<Vec<_>>>()?;
            (files, ids)
        };
        if files.is_empty() {
            return Err(Error::usage(format!("no listings under {}", dir.display())));
        }
        let usage = files
            .iter()
            .zip(ids)
            .map(|(p, app_id)| {
                let ms = parse_listing(&read_text(p)?).map_err(|e| Error::data(format!("{}: {e}", p.display())))?;
                Ok(AppApiUsage {
                    app_id,
                    apis: api_usage(&ms),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let superset_path = a.superset.clone().unwrap_or_else(|| CorpusLayout(dir).superset());
        let superset: Vec<String> = read_text(&superset_path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_owned)
            .collect();
        let vocab = build_vocabulary(&usage, &superset, a.min_apps)?;
        write_text(&a.out, &(serde_json::to_string_pretty(&vocab)? + "\n"))?;
        info!("vocabulary of {} APIs from {} apps", vocab.len(), usage.len());
        Ok(())
    }

    fn extract(&self, a: &ExtractArgs) -> Result<()> {
        let (vocab, _) = load_vocab(&a.vocab)?;
        // (app id, listing path, truth path)
        let jobs: Vec<(String, PathBuf, Option<PathBuf>)> = match &a.corpus {
            Some(dir) => {
                let m = CorpusManifest::load(dir)?;
                let l = CorpusLayout(dir);
                let truth_dir = a.truth.clone().unwrap_or_else(|| dir.join("truth"));
                m.ids(a.split.split())
                    .into_iter()
                    .map(|id| (id.to_owned(), l.listing(id), Some(truth_dir.join(format!("{id}.json")))))
                    .collect()
            }
            None => {
                if a.listings.is_empty() {
                    return Err(Error::usage("no listings given (pass files or --corpus)"));
                }
                a.listings
                    .iter()
                    .map(|p| {
                        let id = stem(p)?;
                        let truth = a.truth.as_ref().map(|d| d.join(format!("{id}.json"))).filter(|t| t.exists());
                        Ok((id, p.clone(), truth))
                    })
                    .collect::<Result<_>>()?
            }
        };
        make_dir(&a.out)?;
        let graphs = with_workers(self.workers, || {
            jobs.par_iter()
                .map(|(id, listing, truth)| {
                    let text = read_text(listing)?;
                    let ms = parse_listing(&text).map_err(|e| Error::data(format!("{}: {e}", listing.display())))?;
                    let (label, methods) = match truth {
                        Some(t) => {
                            let t = AppTruth::from_json(&read_text(t)?)?;
                            (t.label, t.method_labels(&ms))
                        }
                        None => (Label::Unknown, BTreeMap::new()),
                    };
                    let mut g = extract_app_graph(id, &ms, &vocab, label, &methods);
                    g.provenance = Some(extraction_provenance(&text, &vocab));
                    Ok(g)
                })
                .collect::<Result<Vec<_>>>()
        })??;
        for g in &graphs {
            write_text(&a.out.join(format!("{}.json", g.app_id)), &g.to_json()?)?;
        }
        info!("extracted {} graphs", graphs.len());
        Ok(())
    }

    fn train(&self, a: &TrainArgs) -> Result<()> {
        let vocab_path = match (&a.vocab, &a.input.corpus) {
            (Some(p), _) => p.clone(),
            (None, Some(dir)) => CorpusLayout(dir).vocab(),
            (None, None) => return Err(Error::usage("train needs --vocab when graphs are given as files")),
        };
        let (vocab, vocab_file_sha) = load_vocab(&vocab_path)?;
        let (graphs, graphs_sha) = a.input.load(SplitArg::Train)?;
        let graphs: Vec<ApiCallGraph> = graphs.into_iter().filter(|g| g.label != Label::Unknown).collect();
        if graphs.is_empty() {
            return Err(Error::usage("no labeled graphs to train on"));
        }
        check_graphs(&graphs, &vocab.hash(), vocab.len())?;
        let inputs = BTreeMap::from([("graphs_sha256", graphs_sha), ("vocab_file_sha256", vocab_file_sha)]);
        let prov = self.provenance("train", a, inputs)?;
        info!("training {} on {} graphs", a.model, graphs.len());
        let ckpt = match a.model {
            ModelKind::Gam => {
                let d = GamConfig::default();
                let cfg = GamConfig {
                    epochs: a.epochs.unwrap_or(d.epochs),
                    learning_rate: a.learning_rate.unwrap_or(d.learning_rate),
                    step_size: a.step_size.unwrap_or(d.step_size),
                    n_agents: a.agents.unwrap_or(d.n_agents),
                    seed: self.seed,
                    ..d
                };
                let (m, trace) = train_gam(&GamModel::new(&cfg, vocab.len())?, &graphs, &cfg)?;
                Checkpoint::from_gam(&m, &vocab, trace, prov)?
            }
            ModelKind::Gat => {
                if a.step_size.is_some() || a.agents.is_some() {
                    return Err(Error::usage("--step-size and --agents apply to the gam model only"));
                }
                let d = GatConfig::default();
                let cfg = GatConfig {
                    epochs: a.epochs.unwrap_or(d.epochs),
                    learning_rate: a.learning_rate.unwrap_or(d.learning_rate),
                    seed: self.seed,
                    ..d
                };
                let (m, trace) = train_gat(&GatModel::new(&cfg, vocab.len())?, &graphs, &cfg)?;
                Checkpoint::from_gat(&m, &vocab, trace, prov)?
            }
        };
        write_text(&a.out, &ckpt.to_json()?)
    }

    /// Both models plus their checkpoint hashes, checked against each other
    /// and against the graphs.
    fn models(&self, m: &ModelPair, graphs: &[ApiCallGraph]) -> Result<(GamModel, GatModel, BTreeMap<&'static str, String>)> {
        let (ga, ga_sha) = load_checkpoint(&m.gam)?;
        let (gt, gt_sha) = load_checkpoint(&m.gat)?;
        if ga.vocab_sha256 != gt.vocab_sha256 {
            return Err(Error::data("the two checkpoints were trained on different vocabularies"));
        }
        check_graphs(graphs, &ga.vocab_sha256, ga.vocab_size)?;
        let inputs = BTreeMap::from([("gam_checkpoint_sha256", ga_sha), ("gat_checkpoint_sha256", gt_sha)]);
        Ok((ga.gam(None)?, gt.gat(None)?, inputs))
    }

    fn detect(&self, a: &DetectArgs) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            app_id: &'a str,
            detection: AppDetection,
        }
        let (graphs, graphs_sha) = a.input.load(SplitArg::Test)?;
        let (gam, gat, mut inputs) = self.models(&a.models, &graphs)?;
        inputs.insert("graphs_sha256", graphs_sha);
        let detections = with_workers(self.workers, || {
            graphs
                .par_iter()
                .map(|g| {
                    let (x, y) = predict_both(&gam, &gat, g)?;
                    crate::localize::detect_app(&x.probs, &y.probs)
                })
                .collect::<Result<Vec<_>>>()
        })??;
        let apps: Vec<Row> = graphs
            .iter()
            .zip(detections)
            .map(|(g, detection)| Row {
                app_id: &g.app_id,
                detection,
            })
            .collect();
        let doc = json!({
            "format": DETECT_FORMAT,
            "apps": apps,
            "provenance": self.provenance("detect", a, inputs)?,
        });
        emit(a.out.as_deref(), &(serde_json::to_string_pretty(&doc)? + "\n"))
    }

    fn localize(&self, a: &LocalizeArgs) -> Result<()> {
        let thresholds = Thresholds {
            method: a.method_threshold,
            class: a.class_threshold,
        };
        thresholds.validate()?;
        let (graphs, _) = a.input.load(SplitArg::Test)?;
        let (gam, gat, inputs) = self.models(&a.models, &graphs)?;
        let reports = analyze_corpus(&gam, &gat, &graphs, thresholds, self.workers)?;
        make_dir(&a.out)?;
        for (mut r, g) in reports.into_iter().zip(&graphs) {
            let mut inputs = inputs.clone();
            inputs.insert("graph_sha256", sha256_hex(g.to_json()?.as_bytes()));
            r.provenance = Some(self.provenance("localize", a, inputs)?);
            write_text(&a.out.join(format!("{}.json", r.app_id)), &r.to_json()?)?;
            if a.text {
                write_text(&a.out.join(format!("{}.txt", r.app_id)), &r.to_text())?;
            }
        }
        info!("wrote {} reports to {}", graphs.len(), a.out.display());
        Ok(())
    }

    fn reports_and_truths(&self, reports: &Path, truth: &Path) -> Result<(Vec<LocalizationReport>, Vec<AppTruth>, BTreeMap<&'static str, String>)> {
        let (r, r_sha) = load_dir(reports, LocalizationReport::from_json)?;
        let (t, t_sha) = load_dir(truth, AppTruth::from_json)?;
        Ok((r, t, BTreeMap::from([("reports_sha256", r_sha), ("truth_sha256", t_sha)])))
    }

    fn evaluate(&self, a: &EvaluateArgs) -> Result<()> {
        let (reports, truths, inputs) = self.reports_and_truths(&a.reports, &a.truth)?;
        let mut e = evaluate_corpus(&reports, &truths, a.level.into(), a.source.into())?;
        e.provenance = Some(self.provenance("evaluate", a, inputs)?);
        let json = e.to_json()?;
        if let Some(p) = &a.out {
            write_text(p, &json)?;
        }
        if a.text {
            print!("{}", e.to_text());
        } else if a.out.is_none() {
            print!("{json}");
        }
        Ok(())
    }

    fn sweep(&self, a: &SweepArgs) -> Result<()> {
        let (reports, truths, inputs) = self.reports_and_truths(&a.reports, &a.truth)?;
        let thresholds = if a.thresholds.is_empty() { SWEEP_THRESHOLDS.to_vec() } else { a.thresholds.clone() };
        let points = sweep(&reports, &truths, a.level.into(), a.source.into(), &thresholds)?;
        let prov = self.provenance("sweep", a, inputs)?;
        let text = format!("# format: {SWEEP_FORMAT}\n# provenance: {prov}\n{}", sweep_csv(&points));
        emit(a.out.as_deref(), &text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_arguments_exit_with_usage_status() {
        assert_eq!(run(["xaidroid", "--nope"]), 1);
        assert_eq!(run(["xaidroid", "train", "--model", "lstm", "--out", "x"]), 1);
        assert_eq!(run(["xaidroid", "evaluate", "--reports", "/nonexistent", "--truth", "/nonexistent", "--level", "app"]), 1);
        assert_eq!(run(["xaidroid", "--help"]), 0);
    }

    #[test]
    fn defaults_follow_the_reference_configuration() {
        let cli = Cli::try_parse_from(["xaidroid", "localize", "--gam", "a", "--gat", "b", "--out", "o", "g.json"]).unwrap();
        match cli.command {
            Command::Localize(l) => {
                assert_eq!(l.method_threshold, 1e-4);
                assert_eq!(l.class_threshold, 1e-3);
                assert_eq!(l.input.graphs, vec![PathBuf::from("g.json")]);
            }
            other => panic!("{other:?}"),
        }
        let cli = Cli::try_parse_from(["xaidroid", "build-vocab", "--corpus", "c", "--out", "v"]).unwrap();
        assert!(matches!(cli.command, Command::BuildVocab(BuildVocabArgs { min_apps: 10, .. })));
        assert_eq!(cli.seed, 7);
    }

    #[test]
    fn provenance_omits_paths() {
        let cli = Cli::try_parse_from(["xaidroid", "gen-corpus", "--out", "/tmp/somewhere", "--n-apps", "8"]).unwrap();
        let Command::GenCorpus(a) = &cli.command else { unreachable!() };
        let ctx = Ctx { seed: 1, workers: 0 };
        let p = ctx.provenance("gen-corpus", a, BTreeMap::new()).unwrap();
        assert_eq!(p["config"]["n_apps"], 8);
        assert!(!p.to_string().contains("somewhere"));
    }
}

//! Synthetic app corpora with planted malicious behaviour and exact ground
//! truth at app, class and method level.
//!
//! Apps are generated as method listings; graphs are then extracted with a
//! vocabulary built from the training split, exactly as for real input.

mod generate;
pub mod motifs;
pub mod pool;

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use generate::{gen_benign_app, gen_malicious_app, GeneratedApp, NodeCountSampler, MIN_BACKGROUND};
pub use motifs::{library, motif, Flow, Motif, Stage};

use crate::apigraph::{api_usage, build_vocabulary, ApiCallGraph, ApiVocabulary, AppApiUsage, Label};
use crate::error::{Error, Result};
use crate::evalmetrics::AppTruth;
use crate::seeding::{stream_rng, DOMAIN_CORPUS};

pub const CORPUS_FORMAT: &str = "xaidroid-corpus-v1";

/// Stream index reserved for corpus-wide draws (label and split layout).
const LAYOUT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub n_apps: usize,
    pub malware_ratio: f64,
    pub mean_nodes: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub methods_per_app: [usize; 2],
    pub train_fraction: f64,
    pub min_apps: usize,
    /// Motif names from the library, assigned round-robin to malicious apps.
    pub motifs: Vec<String>,
    /// Sprinkle uncalled motif APIs into benign apps.
    pub decoy: bool,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n_apps: 500,
            malware_ratio: 0.5,
            mean_nodes: 84.0,
            min_nodes: 20,
            max_nodes: 200,
            methods_per_app: [4, 60],
            train_fraction: 0.7,
            min_apps: 10,
            motifs: library().iter().map(|m| m.name.to_owned()).collect(),
            decoy: false,
            seed: 7,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_apps < 4 {
            return Err(Error::usage("a corpus needs at least 4 apps"));
        }
        if !(self.malware_ratio > 0.0 && self.malware_ratio < 1.0) {
            return Err(Error::usage("malware_ratio must lie strictly between 0 and 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::usage("train_fraction must lie strictly between 0 and 1"));
        }
        if self.methods_per_app[0] == 0 || self.methods_per_app[0] > self.methods_per_app[1] {
            return Err(Error::usage("methods_per_app must be a range [lo, hi] with 1 <= lo <= hi"));
        }
        if self.min_apps == 0 {
            return Err(Error::usage("min_apps must be at least 1"));
        }
        if self.motifs.is_empty() {
            return Err(Error::usage("at least one motif is required"));
        }
        NodeCountSampler::new(self.min_nodes, self.mean_nodes, self.max_nodes)?;
        for name in &self.motifs {
            let m = motif(name)?;
            if m.apis().len() + MIN_BACKGROUND > self.min_nodes {
                return Err(Error::usage(format!(
                    "motif {name} does not fit in apps of {} nodes",
                    self.min_nodes
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppEntry {
    pub id: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub split: Split,
    pub nodes: usize,
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format: String,
    pub spec: CorpusSpec,
    pub vocab_sha256: String,
    pub apps: Vec<AppEntry>,
    pub provenance: serde_json::Value,
}

impl CorpusManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: CorpusManifest = serde_json::from_str(&text)?;
        if m.format != CORPUS_FORMAT {
            return Err(Error::data(format!("{} is not a corpus manifest", path.display())));
        }
        Ok(m)
    }

    pub fn ids(&self, split: Option<Split>) -> Vec<&str> {
        self.apps
            .iter()
            .filter(|a| split.is_none_or(|s| a.split == s))
            .map(|a| a.id.as_str())
            .collect()
    }
}

/// File locations inside a corpus directory.
pub struct CorpusLayout<'a>(pub &'a Path);

impl CorpusLayout<'_> {
    pub fn listing(&self, id: &str) -> PathBuf {
        self.0.join("apps").join(format!("{id}.slst"))
    }
    pub fn graph(&self, id: &str) -> PathBuf {
        self.0.join("graphs").join(format!("{id}.json"))
    }
    pub fn truth(&self, id: &str) -> PathBuf {
        self.0.join("truth").join(format!("{id}.json"))
    }
    pub fn vocab(&self) -> PathBuf {
        self.0.join("vocab.json")
    }
    pub fn superset(&self) -> PathBuf {
        self.0.join("superset.txt")
    }
    pub fn manifest(&self) -> PathBuf {
        self.0.join("manifest.json")
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub manifest: CorpusManifest,
    pub superset: Vec<String>,
    pub vocab: ApiVocabulary,
    pub apps: Vec<GeneratedApp>,
    pub graphs: Vec<ApiCallGraph>,
}

/// Every sensitive API the generator knows about, sorted.
pub fn superset() -> Vec<String> {
    let mut all: Vec<String> = pool::benign_pool();
    all.extend(library().iter().flat_map(|m| m.apis()).map(str::to_owned));
    all.extend(pool::unused_sensitive().map(str::to_owned));
    all.sort();
    all.dedup();
    all
}

struct Slot {
    index: usize,
    split: Split,
    motif: Option<&'static Motif>,
}

fn layout(spec: &CorpusSpec) -> Result<Vec<Slot>> {
    let n = spec.n_apps;
    let n_mal = ((n as f64) * spec.malware_ratio).round() as usize;
    let n_mal = n_mal.clamp(2, n - 2);
    let motifs: Vec<&'static Motif> = spec.motifs.iter().map(|m| motif(m)).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(spec.seed, DOMAIN_CORPUS, LAYOUT_STREAM));

    let train_mal = ((n_mal as f64) * spec.train_fraction).round() as usize;
    let train_ben = (((n - n_mal) as f64) * spec.train_fraction).round() as usize;
    let mut slots: Vec<Slot> = order
        .iter()
        .enumerate()
        .map(|(rank, &index)| {
            let malicious = rank < n_mal;
            let (k, train_quota) = if malicious { (rank, train_mal) } else { (rank - n_mal, train_ben) };
            Slot {
                index,
                split: if k < train_quota { Split::Train } else { Split::Test },
                motif: malicious.then(|| motifs[k % motifs.len()]),
            }
        })
        .collect();
    slots.sort_by_key(|s| s.index);
    Ok(slots)
}

fn app_id(index: usize, n: usize) -> String {
    let width = n.to_string().len().max(4);
    format!("app-{index:0width$}")
}

/// Generates a whole corpus in memory. Output depends only on `spec`.
pub fn gen_corpus(spec: &CorpusSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let slots = layout(spec)?;
    let apps: Vec<GeneratedApp> = slots
        .par_iter()
        .map(|s| {
            let id = app_id(s.index, spec.n_apps);
            let mut rng = stream_rng(spec.seed, DOMAIN_CORPUS, s.index as u64);
            match s.motif {
                Some(m) => gen_malicious_app(&id, spec, m, &mut rng),
                None => gen_benign_app(&id, spec, &mut rng),
            }
        })
        .collect::<Result<_>>()?;

    let superset = superset();
    let usage: Vec<AppApiUsage> = apps
        .iter()
        .zip(&slots)
        .filter(|(_, s)| s.split == Split::Train)
        .map(|(a, _)| AppApiUsage {
            app_id: a.app_id.clone(),
            apis: api_usage(&a.listings),
        })
        .collect();
    let vocab = build_vocabulary(&usage, &superset, spec.min_apps)?;
    let graphs: Vec<ApiCallGraph> = apps.par_iter().map(|a| a.graph(&vocab)).collect();

    let entries = apps
        .iter()
        .zip(&slots)
        .zip(&graphs)
        .map(|((a, s), g)| AppEntry {
            id: a.app_id.clone(),
            label: a.label,
            variant: a.variant.clone(),
            split: s.split,
            nodes: g.nodes.len(),
            edges: g.edges.len(),
        })
        .collect();
    let manifest = CorpusManifest {
        format: CORPUS_FORMAT.to_owned(),
        spec: spec.clone(),
        vocab_sha256: vocab.hash(),
        apps: entries,
        provenance: serde_json::json!({
            "generator": "synthcorpus",
            "version": env!("CARGO_PKG_VERSION"),
            "seed": spec.seed,
        }),
    };
    Ok(SyntheticCorpus {
        manifest,
        superset,
        vocab,
        apps,
        graphs,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

impl SyntheticCorpus {
    /// Writes the corpus under `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let l = CorpusLayout(dir);
        for sub in ["apps", "graphs", "truth"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        for (a, g) in self.apps.iter().zip(&self.graphs) {
            write(&l.listing(&a.app_id), &a.listing_text())?;
            write(&l.graph(&a.app_id), &g.to_json()?)?;
            write(&l.truth(&a.app_id), &a.truth.to_json()?)?;
        }
        write(&l.superset(), &(self.superset.join("\n") + "\n"))?;
        write(&l.vocab(), &(serde_json::to_string_pretty(&self.vocab)? + "\n"))?;
        write(&l.manifest(), &(serde_json::to_string_pretty(&self.manifest)? + "\n"))?;
        Ok(())
    }

    pub fn split_graphs(&self, split: Split) -> Vec<&ApiCallGraph> {
        self.manifest
            .apps
            .iter()
            .zip(&self.graphs)
            .filter(|(e, _)| e.split == split)
            .map(|(_, g)| g)
            .collect()
    }

    pub fn truths(&self) -> Vec<&AppTruth> {
        self.apps.iter().map(|a| &a.truth).collect()
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::apigraph::{extract_app_graph, parse_listing};

    fn small(seed: u64) -> CorpusSpec {
        CorpusSpec {
            n_apps: 100,
            seed,
            ..CorpusSpec::default()
        }
    }

    #[test]
    fn labels_and_splits_follow_the_spec() {
        let c = gen_corpus(&small(3)).unwrap();
        let apps = &c.manifest.apps;
        let mal = apps.iter().filter(|a| a.label == Label::Malicious).count();
        assert_eq!(mal, 50);
        let train = apps.iter().filter(|a| a.split == Split::Train).count();
        assert!((69..=71).contains(&train), "{train}");
        for a in apps {
            assert_eq!(a.variant.is_some(), a.label == Label::Malicious);
        }
        let variants: BTreeSet<&str> = apps.iter().filter_map(|a| a.variant.as_deref()).collect();
        assert_eq!(variants.len(), 4);
    }

    #[test]
    fn reextraction_matches_emitted_graphs() {
        let c = gen_corpus(&small(5)).unwrap();
        for (a, g) in c.apps.iter().zip(&c.graphs) {
            let listings = parse_listing(&a.listing_text()).unwrap();
            let again = extract_app_graph(&a.app_id, &listings, &c.vocab, a.label, &a.method_truth());
            assert_eq!(again.nodes, g.nodes, "{}", a.app_id);
            assert_eq!(again.edges, g.edges, "{}", a.app_id);
            assert_eq!(again.methods, g.methods, "{}", a.app_id);
            g.validate().unwrap();
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        gen_corpus(&small(9)).unwrap().write(a.path()).unwrap();
        gen_corpus(&small(9)).unwrap().write(b.path()).unwrap();
        for rel in ["manifest.json", "vocab.json", "superset.txt", "apps/app-0042.slst", "graphs/app-0042.json", "truth/app-0042.json"] {
            let x = fs::read(a.path().join(rel)).unwrap();
            let y = fs::read(b.path().join(rel)).unwrap();
            assert_eq!(x, y, "{rel}");
        }
        let other = gen_corpus(&small(10)).unwrap();
        assert_ne!(other.apps[0].listings, gen_corpus(&small(9)).unwrap().apps[0].listings);
    }

    #[test]
    fn node_counts_track_the_target_mean() {
        let c = gen_corpus(&CorpusSpec {
            n_apps: 300,
            ..CorpusSpec::default()
        })
        .unwrap();
        let mean = c.graphs.iter().map(|g| g.nodes.len()).sum::<usize>() as f64 / c.graphs.len() as f64;
        assert!((mean - 84.0).abs() <= 8.4, "{mean}");
        assert!(c.graphs.iter().all(|g| !g.nodes.is_empty()));
    }

    #[test]
    fn motif_nodes_appear_only_in_malicious_graphs() {
        // 100 apps leave under 10 training apps per motif; lower the cutoff.
        let c = gen_corpus(&CorpusSpec { min_apps: 3, ..small(4) }).unwrap();
        let pool: BTreeSet<String> = pool::benign_pool().into_iter().collect();
        let exclusive: BTreeSet<String> = library()
            .iter()
            .flat_map(|m| m.apis())
            .filter(|a| !pool.contains(*a))
            .map(str::to_owned)
            .collect();
        for g in &c.graphs {
            let hits = g.nodes.iter().filter(|n| exclusive.contains(&n.api)).count();
            assert_eq!(hits > 0, g.label == Label::Malicious, "{}", g.app_id);
        }
    }

    #[test]
    fn invalid_specs_are_usage_errors() {
        let bad = [
            CorpusSpec { n_apps: 2, ..CorpusSpec::default() },
            CorpusSpec { malware_ratio: 1.0, ..CorpusSpec::default() },
            CorpusSpec { mean_nodes: 10.0, ..CorpusSpec::default() },
            CorpusSpec { motifs: vec!["nope".into()], ..CorpusSpec::default() },
            CorpusSpec { min_nodes: 12, mean_nodes: 40.0, ..CorpusSpec::default() },
        ];
        for s in bad {
            assert!(gen_corpus(&s).unwrap_err().is_usage(), "{s:?}");
        }
    }
}

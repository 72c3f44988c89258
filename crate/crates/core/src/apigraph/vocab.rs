use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const VOCAB_FORMAT: &str = "xaidroid-vocab-v1";

/// Where a vocabulary came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabProvenance {
    pub superset_sha256: String,
    pub min_apps: usize,
}

/// Ordered set of sensitive API signatures. Ids are positions in `apis`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "VocabFile", into = "VocabFile")]
pub struct ApiVocabulary {
    apis: Vec<String>,
    index: HashMap<String, u32>,
    provenance: VocabProvenance,
}

impl PartialEq for ApiVocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.apis == other.apis && self.provenance == other.provenance
    }
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    format: String,
    apis: Vec<String>,
    provenance: VocabProvenance,
}

impl TryFrom<VocabFile> for ApiVocabulary {
    type Error = Error;

    fn try_from(f: VocabFile) -> Result<Self> {
        if f.format != VOCAB_FORMAT {
            return Err(Error::data(format!("unexpected vocabulary format {:?}", f.format)));
        }
        ApiVocabulary::new(f.apis, f.provenance)
    }
}

impl From<ApiVocabulary> for VocabFile {
    fn from(v: ApiVocabulary) -> Self {
        VocabFile {
            format: VOCAB_FORMAT.to_owned(),
            apis: v.apis,
            provenance: v.provenance,
        }
    }
}

/// APIs used by one app. Repeated uses inside the app count once.
#[derive(Debug, Clone, Default)]
pub struct AppApiUsage {
    pub app_id: String,
    pub apis: BTreeSet<String>,
}

impl ApiVocabulary {
    pub fn new(apis: Vec<String>, provenance: VocabProvenance) -> Result<Self> {
        let mut index = HashMap::with_capacity(apis.len());
        for (i, api) in apis.iter().enumerate() {
            if index.insert(api.clone(), i as u32).is_some() {
                return Err(Error::data(format!("duplicate vocabulary entry {api}")));
            }
        }
        Ok(ApiVocabulary {
            apis,
            index,
            provenance,
        })
    }

    /// Vocabulary over exactly `apis` (sorted), with no filtering provenance.
    pub fn from_apis<I, S>(apis: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = apis.into_iter().map(Into::into).collect();
        let list: Vec<String> = set.into_iter().collect();
        let provenance = VocabProvenance {
            superset_sha256: sha256_lines(&list),
            min_apps: 1,
        };
        ApiVocabulary::new(list, provenance).expect("set entries are unique")
    }

    pub fn len(&self) -> usize {
        self.apis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.apis.is_empty()
    }

    pub fn id(&self, api: &str) -> Option<u32> {
        self.index.get(api).copied()
    }

    pub fn api(&self, id: u32) -> Option<&str> {
        self.apis.get(id as usize).map(String::as_str)
    }

    pub fn apis(&self) -> &[String] {
        &self.apis
    }

    pub fn provenance(&self) -> &VocabProvenance {
        &self.provenance
    }

    /// Hex SHA-256 of the ordered signature list; checkpoints pin this.
    pub fn hash(&self) -> String {
        sha256_lines(&self.apis)
    }
}

pub fn sha256_lines(lines: &[String]) -> String {
    let mut h = Sha256::new();
    for l in lines {
        h.update(l.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Keeps every superset API used by at least `min_apps` distinct apps,
/// ordered by signature.
pub fn build_vocabulary(
    corpus: &[AppApiUsage],
    superset: &[String],
    min_apps: usize,
) -> Result<ApiVocabulary> {
    if corpus.is_empty() {
        return Err(Error::usage("cannot build a vocabulary from an empty corpus"));
    }
    if min_apps == 0 {
        return Err(Error::usage("min_apps must be at least 1"));
    }
    let mut per_app: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for rec in corpus {
        per_app
            .entry(rec.app_id.as_str())
            .or_default()
            .extend(rec.apis.iter().map(String::as_str));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for apis in per_app.values() {
        for api in apis {
            *counts.entry(api).or_default() += 1;
        }
    }
    let kept: BTreeSet<String> = superset
        .iter()
        .filter(|api| counts.get(api.as_str()).copied().unwrap_or(0) >= min_apps)
        .cloned()
        .collect();
    ApiVocabulary::new(
        kept.into_iter().collect(),
        VocabProvenance {
            superset_sha256: sha256_lines(superset),
            min_apps,
        },
    )
}

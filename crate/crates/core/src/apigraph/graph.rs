use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::method_graph::MethodGraph;
use super::vocab::ApiVocabulary;
use crate::error::{Error, Result};

pub const GRAPH_FORMAT: &str = "xaidroid-graph-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Malicious,
    Benign,
    Unknown,
}

impl Label {
    /// Class index used by both classifiers: benign 0, malicious 1.
    pub fn class_index(self) -> Option<usize> {
        match self {
            Label::Benign => Some(0),
            Label::Malicious => Some(1),
            Label::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: u32,
    pub api: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodRecord {
    #[serde(rename = "class")]
    pub class_name: String,
    #[serde(rename = "method")]
    pub method_name: String,
    /// Vocabulary ids invoked in the method's own body.
    pub apis: Vec<u32>,
    pub truth: Label,
}

/// App-level API call graph: one node per distinct vocabulary API, nodes
/// ordered by vocabulary id. Node ids are vocabulary ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiCallGraph {
    pub format: String,
    pub app_id: String,
    pub label: Label,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<[u32; 2]>,
    pub methods: Vec<MethodRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl ApiCallGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_ids(&self) -> Vec<u32> {
        self.nodes.iter().map(|n| n.id).collect()
    }

    pub fn edge_set(&self) -> BTreeSet<(u32, u32)> {
        self.edges.iter().map(|e| (e[0], e[1])).collect()
    }

    /// Checks the structural invariants of the graph.
    pub fn validate(&self) -> Result<()> {
        if self.format != GRAPH_FORMAT {
            return Err(Error::data(format!("unexpected graph format {:?}", self.format)));
        }
        let ids: BTreeSet<u32> = self.nodes.iter().map(|n| n.id).collect();
        if ids.len() != self.nodes.len() {
            return Err(Error::data(format!("{}: duplicate node ids", self.app_id)));
        }
        if self.nodes.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(Error::data(format!("{}: nodes not sorted by id", self.app_id)));
        }
        for e in &self.edges {
            if !ids.contains(&e[0]) || !ids.contains(&e[1]) {
                return Err(Error::data(format!("{}: edge {:?} leaves the node set", self.app_id, e)));
            }
        }
        for m in &self.methods {
            if let Some(a) = m.apis.iter().find(|a| !ids.contains(a)) {
                return Err(Error::data(format!(
                    "{}: method {}->{} uses api {a} outside the graph",
                    self.app_id, m.class_name, m.method_name
                )));
            }
        }
        Ok(())
    }

    /// Dense local indexing used by the models.
    pub fn structure(&self) -> GraphStructure {
        GraphStructure::new(self)
    }

    /// Distinct classes in order of first appearance, with their method indices.
    pub fn classes(&self) -> Vec<(String, Vec<usize>)> {
        let mut order: Vec<(String, Vec<usize>)> = Vec::new();
        let mut pos: HashMap<&str, usize> = HashMap::new();
        for (i, m) in self.methods.iter().enumerate() {
            match pos.get(m.class_name.as_str()) {
                Some(&p) => order[p].1.push(i),
                None => {
                    pos.insert(&m.class_name, order.len());
                    order.push((m.class_name.clone(), vec![i]));
                }
            }
        }
        order
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: ApiCallGraph = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }
}

/// Node-index view of an [`ApiCallGraph`]: index `i` is the `i`-th node in
/// vocabulary-id order. Adjacency lists are sorted.
#[derive(Debug, Clone)]
pub struct GraphStructure {
    pub vocab_ids: Vec<u32>,
    pub out_adj: Vec<Vec<usize>>,
    pub in_adj: Vec<Vec<usize>>,
}

impl GraphStructure {
    pub fn new(g: &ApiCallGraph) -> Self {
        let vocab_ids: Vec<u32> = g.nodes.iter().map(|n| n.id).collect();
        let local: HashMap<u32, usize> = vocab_ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let n = vocab_ids.len();
        let mut out_adj = vec![BTreeSet::new(); n];
        let mut in_adj = vec![BTreeSet::new(); n];
        for e in &g.edges {
            let (s, d) = (local[&e[0]], local[&e[1]]);
            out_adj[s].insert(d);
            in_adj[d].insert(s);
        }
        GraphStructure {
            vocab_ids,
            out_adj: out_adj.into_iter().map(|s| s.into_iter().collect()).collect(),
            in_adj: in_adj.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.vocab_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab_ids.is_empty()
    }

    /// Undirected neighborhoods with a self-loop on every node, sorted.
    pub fn symmetric_neighborhoods(&self) -> Vec<Vec<usize>> {
        (0..self.len())
            .map(|i| {
                let mut s: BTreeSet<usize> = self.out_adj[i].iter().copied().collect();
                s.extend(self.in_adj[i].iter().copied());
                s.insert(i);
                s.into_iter().collect()
            })
            .collect()
    }
}

/// Statistics from merging method graphs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeStats {
    pub unresolved_calls: usize,
    pub summary_rounds: usize,
}

/// Merges per-method graphs into the app graph by call-site inlining.
///
/// Every API preceding a call to local method `B` gains edges to the APIs
/// `B` can start with, and every API `B` can end with gains edges to the
/// APIs following the call. A callee that can run without an API of its
/// own is looked through to its own callees. Entry/exit summaries are
/// iterated to a fixed point, so recursion terminates. Calls to methods not
/// in `methods` are ignored.
pub fn merge_app_graph(
    app_id: &str,
    methods: &[MethodGraph],
    app_label: Label,
    truth: &BTreeMap<String, Label>,
    vocab: &ApiVocabulary,
) -> (ApiCallGraph, MergeStats) {
    let by_sig: HashMap<String, usize> =
        methods.iter().enumerate().map(|(i, m)| (m.signature(), i)).collect();
    let callee = |site: &super::method_graph::CallSite| by_sig.get(&site.callee).copied();

    let mut stats = MergeStats::default();
    let mut entry: Vec<BTreeSet<u32>> = methods.iter().map(|m| m.entry_apis.clone()).collect();
    let mut exit: Vec<BTreeSet<u32>> = methods.iter().map(|m| m.exit_apis.clone()).collect();
    loop {
        stats.summary_rounds += 1;
        let mut changed = false;
        for (i, m) in methods.iter().enumerate() {
            let mut add_entry = BTreeSet::new();
            for &c in &m.entry_calls {
                if let Some(b) = callee(&m.call_sites[c]) {
                    add_entry.extend(entry[b].iter().copied());
                }
            }
            let mut add_exit = BTreeSet::new();
            for c in m.exit_calls() {
                if let Some(b) = callee(&m.call_sites[c]) {
                    add_exit.extend(exit[b].iter().copied());
                }
            }
            let before = (entry[i].len(), exit[i].len());
            entry[i].extend(add_entry);
            exit[i].extend(add_exit);
            changed |= before != (entry[i].len(), exit[i].len());
        }
        if !changed {
            break;
        }
    }

    let mut edges: BTreeSet<(u32, u32)> = BTreeSet::new();
    let mut nodes: BTreeSet<u32> = BTreeSet::new();
    for m in methods {
        nodes.extend(m.api_nodes.iter().copied());
        edges.extend(m.intra_edges.iter().copied());
        for site in &m.call_sites {
            let Some(b) = callee(site) else {
                stats.unresolved_calls += 1;
                continue;
            };
            for &p in &site.preceding_apis {
                edges.extend(entry[b].iter().map(|&e| (p, e)));
            }
            for &x in &exit[b] {
                edges.extend(site.following_apis.iter().map(|&f| (x, f)));
                for &fc in &site.following_calls {
                    if let Some(b2) = callee(&m.call_sites[fc]) {
                        edges.extend(entry[b2].iter().map(|&e| (x, e)));
                    }
                }
            }
        }
    }
    if stats.unresolved_calls > 0 {
        log::warn!("{app_id}: {} unresolved local call sites dropped", stats.unresolved_calls);
    }

    let graph = ApiCallGraph {
        format: GRAPH_FORMAT.to_owned(),
        app_id: app_id.to_owned(),
        label: app_label,
        nodes: nodes
            .iter()
            .map(|&id| GraphNode {
                id,
                api: vocab.api(id).unwrap_or_default().to_owned(),
            })
            .collect(),
        edges: edges.into_iter().map(|(a, b)| [a, b]).collect(),
        methods: methods
            .iter()
            .map(|m| MethodRecord {
                class_name: m.class_name.clone(),
                method_name: m.method_name.clone(),
                apis: m.api_nodes.iter().copied().collect(),
                truth: truth.get(&m.signature()).copied().unwrap_or(Label::Unknown),
            })
            .collect(),
        provenance: None,
    };
    (graph, stats)
}

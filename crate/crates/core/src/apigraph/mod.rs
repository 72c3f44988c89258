//! Method listings to app-level API call graphs.
//!
//! Each method is turned into a small graph over the sensitive APIs it
//! invokes; the method graphs are then merged along local call sites into a
//! single graph per app with one node per distinct API.

mod graph;
mod listing;
mod method_graph;
mod rename;
mod vocab;

use std::collections::BTreeMap;

pub use graph::{
    merge_app_graph, ApiCallGraph, GraphNode, GraphStructure, Label, MergeStats, MethodRecord,
    GRAPH_FORMAT,
};
pub use listing::{
    api_usage, method_signature, parse_listing, print_listing, split_signature, FlowKind,
    InstructionRow, MethodListing, Target,
};
pub use method_graph::{build_method_graph, CallSite, MethodGraph};
pub use rename::{rename_identifiers, Renaming};
pub use vocab::{
    build_vocabulary, sha256_lines, ApiVocabulary, AppApiUsage, VocabProvenance, VOCAB_FORMAT,
};

/// Parsed listings straight to the merged app graph.
pub fn extract_app_graph(
    app_id: &str,
    listings: &[MethodListing],
    vocab: &ApiVocabulary,
    app_label: Label,
    truth: &BTreeMap<String, Label>,
) -> ApiCallGraph {
    let methods: Vec<MethodGraph> = listings.iter().map(|l| build_method_graph(l, vocab)).collect();
    merge_app_graph(app_id, &methods, app_label, truth, vocab).0
}

/// Provenance block attached to extracted graphs: hashes of the listing text
/// and of the vocabulary it was filtered through.
pub fn extraction_provenance(listing_text: &str, vocab: &ApiVocabulary) -> serde_json::Value {
    use sha2::{Digest, Sha256};
    serde_json::json!({
        "listing_sha256": hex::encode(Sha256::digest(listing_text.as_bytes())),
        "vocab_sha256": vocab.hash(),
    })
}

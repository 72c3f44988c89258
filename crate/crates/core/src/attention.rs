use serde::{Deserialize, Serialize};

use crate::apigraph::ApiCallGraph;
use crate::error::{Error, Result};

/// Per-node attention score A(i), aligned with a graph's node list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeAttention {
    /// Vocabulary ids, ascending (the graph's node order).
    pub node_ids: Vec<u32>,
    pub scores: Vec<f64>,
}

impl NodeAttention {
    pub fn new(node_ids: Vec<u32>, scores: Vec<f64>) -> Result<Self> {
        if node_ids.len() != scores.len() {
            return Err(Error::usage(format!(
                "{} node ids but {} attention scores",
                node_ids.len(),
                scores.len()
            )));
        }
        if node_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::usage("attention node ids must be strictly ascending"));
        }
        if let Some(s) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::numeric(format!("attention score {s} is negative or not finite")));
        }
        Ok(NodeAttention { node_ids, scores })
    }

    pub fn zeros(graph: &ApiCallGraph) -> Self {
        NodeAttention {
            node_ids: graph.node_ids(),
            scores: vec![0.0; graph.node_count()],
        }
    }

    /// Score of a vocabulary id; ids outside the map score 0.
    pub fn get(&self, id: u32) -> f64 {
        self.node_ids
            .binary_search(&id)
            .map_or(0.0, |i| self.scores[i])
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.scores.iter().sum()
    }
}

//! Per-app prediction and localization over many graphs, in parallel.

use rayon::prelude::*;

use crate::apigraph::ApiCallGraph;
use crate::error::{Error, Result};
use crate::gam::{gam_predict, GamModel};
use crate::gat::{gat_predict, GatModel};
use crate::localize::{localize, LocalizationReport, ModelOutput, Thresholds};

/// Both models' outputs for one graph.
pub fn predict_both(gam: &GamModel, gat: &GatModel, graph: &ApiCallGraph) -> Result<(ModelOutput, ModelOutput)> {
    let (probs, attention) = gam_predict(gam, graph)?;
    let a = ModelOutput { probs, attention };
    let (probs, attention) = gat_predict(gat, graph)?;
    let b = ModelOutput { probs, attention };
    Ok((a, b))
}

pub fn analyze_app(
    gam: &GamModel,
    gat: &GatModel,
    graph: &ApiCallGraph,
    thresholds: Thresholds,
) -> Result<LocalizationReport> {
    let (a, b) = predict_both(gam, gat, graph)?;
    localize(graph, &a, &b, thresholds)
}

/// Runs `f` on a pool of `workers` threads; 0 means rayon's default.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::usage(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Reports for every graph, in input order. Each app is independent and
/// draws from its own seeded streams, so the result does not depend on the
/// worker count.
pub fn analyze_corpus(
    gam: &GamModel,
    gat: &GatModel,
    graphs: &[ApiCallGraph],
    thresholds: Thresholds,
    workers: usize,
) -> Result<Vec<LocalizationReport>> {
    thresholds.validate()?;
    with_workers(workers, || {
        graphs
            .par_iter()
            .map(|g| analyze_app(gam, gat, g, thresholds))
            .collect::<Result<Vec<_>>>()
    })?
}

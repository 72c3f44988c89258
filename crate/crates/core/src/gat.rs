//! Multi-head edge-attention graph network for app classification.
//!
//! Each layer transforms node features per head (`h' = W h`), scores every
//! edge of the self-looped, symmetrized neighborhood with
//! `LeakyReLU(a_selfᵀ h'_i + a_neighᵀ h'_j)`, normalizes the scores over the
//! neighborhood and aggregates. Intermediate layers concatenate the heads,
//! the last one averages them. Node outputs are mean-pooled and fed to a
//! linear classifier.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::apigraph::{ApiCallGraph, GraphStructure};
use crate::attention::NodeAttention;
use crate::error::{Error, Result};
use crate::seeding::{stream_rng, DOMAIN_GAT_SHUFFLE};
use crate::numkernel::{
    cross_entropy, cross_entropy_logit_grad, dot, leaky_relu, leaky_relu_grad, softmax, Activation,
    ParamSet, Tensor2, LEAKY_SLOPE,
};

pub const GAT_OUT_W: &str = "gat.out.w";
pub const GAT_OUT_B: &str = "gat.out.b";

/// How per-node attention is read off the final attention layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeAttentionMode {
    /// Mean attention a node receives from its neighborhood, `mean_j α_ji`.
    #[default]
    Received,
    /// Mean of the node's own outgoing coefficients, `mean_j α_ij`. Always
    /// `1/|N(i)|`; kept for comparison.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatConfig {
    pub in_features: usize,
    pub hidden: usize,
    pub heads: usize,
    pub classes: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub layers: usize,
    pub seed: u64,
    #[serde(default)]
    pub node_attention: NodeAttentionMode,
}

impl Default for GatConfig {
    fn default() -> Self {
        GatConfig {
            in_features: 1,
            hidden: 8,
            heads: 8,
            classes: 2,
            epochs: 200,
            learning_rate: 5e-4,
            layers: 2,
            seed: 0,
            node_attention: NodeAttentionMode::Received,
        }
    }
}

impl GatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_features == 0 || self.hidden == 0 || self.heads == 0 || self.layers == 0 {
            return Err(Error::usage("gat dimensions, heads and layers must be at least 1"));
        }
        if self.classes != 2 {
            return Err(Error::usage("gat supports exactly 2 classes"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::usage("gat learning rate must be positive"));
        }
        Ok(())
    }

    /// Structural fields only; training fields may differ between configs
    /// that describe the same parameter layout.
    fn same_shape(&self, other: &GatConfig) -> bool {
        (self.in_features, self.hidden, self.heads, self.classes, self.layers)
            == (other.in_features, other.hidden, other.heads, other.classes, other.layers)
    }

    /// `(input width, per-head output width, concatenate heads)` per layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize, bool)> {
        (0..self.layers)
            .map(|l| {
                let input = if l == 0 { self.in_features } else { self.hidden * self.heads };
                (input, self.hidden, l + 1 < self.layers)
            })
            .collect()
    }
}

fn head_name(layer: usize, head: usize, part: &str) -> String {
    format!("gat.l{layer}.h{head}.{part}")
}

/// Node neighborhoods in compressed-row form. Row `i` lists `N(i)`,
/// ascending, always including `i` itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhoods {
    offsets: Vec<usize>,
    members: Vec<usize>,
}

impl Neighborhoods {
    pub fn from_lists(lists: &[Vec<usize>]) -> Result<Self> {
        let n = lists.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut members = Vec::new();
        offsets.push(0);
        for (i, l) in lists.iter().enumerate() {
            if !l.contains(&i) {
                return Err(Error::usage(format!("neighborhood of node {i} lacks its self-loop")));
            }
            if let Some(j) = l.iter().find(|&&j| j >= n) {
                return Err(Error::usage(format!("neighbor {j} of node {i} is out of range")));
            }
            members.extend_from_slice(l);
            offsets.push(members.len());
        }
        Ok(Neighborhoods { offsets, members })
    }

    pub fn from_structure(s: &GraphStructure) -> Self {
        Neighborhoods::from_lists(&s.symmetric_neighborhoods())
            .expect("symmetric neighborhoods always carry self-loops")
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total number of (i, j) pairs, self-loops included.
    pub fn entry_count(&self) -> usize {
        self.members.len()
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn of(&self, i: usize) -> &[usize] {
        &self.members[self.range(i)]
    }

    pub fn member(&self, entry: usize) -> usize {
        self.members[entry]
    }
}

/// Borrowed parameters of one attention head.
#[derive(Debug, Clone, Copy)]
pub struct HeadParams<'a> {
    /// `out × in`.
    pub w: &'a Tensor2,
    /// `out × 1`, applied to the receiving node.
    pub att_self: &'a Tensor2,
    /// `out × 1`, applied to the neighbor.
    pub att_neigh: &'a Tensor2,
    /// `out × 1`.
    pub bias: &'a Tensor2,
}

#[derive(Debug, Clone)]
pub struct LayerParams<'a> {
    pub heads: Vec<HeadParams<'a>>,
    pub concat: bool,
    pub activation: Activation,
}

impl LayerParams<'_> {
    fn head_out(&self) -> usize {
        self.heads[0].w.rows()
    }

    pub fn output_width(&self) -> usize {
        if self.concat {
            self.head_out() * self.heads.len()
        } else {
            self.head_out()
        }
    }
}

/// Output of [`gat_layer`]: node features plus, per head, the coefficients
/// `α` in neighborhood entry order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerOutput {
    pub features: Tensor2,
    pub attention: Vec<Vec<f64>>,
}

struct HeadCache {
    transformed: Tensor2,
    scores: Vec<f64>,
    alpha: Vec<f64>,
    pre: Tensor2,
}

struct LayerCache {
    input: Tensor2,
    heads: Vec<HeadCache>,
}

fn layer_forward(layer: &LayerParams<'_>, nb: &Neighborhoods, x: &Tensor2) -> Result<(Tensor2, LayerCache)> {
    let n = nb.node_count();
    if layer.heads.is_empty() {
        return Err(Error::usage("attention layer without heads"));
    }
    if x.rows() != n {
        return Err(Error::usage(format!("{} feature rows for {n} nodes", x.rows())));
    }
    let out = layer.head_out();
    for h in &layer.heads {
        if h.w.cols() != x.cols()
            || h.w.rows() != out
            || h.att_self.shape() != (out, 1)
            || h.att_neigh.shape() != (out, 1)
            || h.bias.shape() != (out, 1)
        {
            return Err(Error::usage("attention head shapes do not match the layer input"));
        }
    }
    let k_heads = layer.heads.len();
    let mut output = Tensor2::zeros(n, layer.output_width());
    let mut caches = Vec::with_capacity(k_heads);
    for (k, h) in layer.heads.iter().enumerate() {
        let mut transformed = Tensor2::zeros(n, out);
        for i in 0..n {
            h.w.matvec_acc(x.row(i), transformed.row_mut(i));
        }
        let s: Vec<f64> = (0..n).map(|i| dot(h.att_self.data(), transformed.row(i))).collect();
        let t: Vec<f64> = (0..n).map(|j| dot(h.att_neigh.data(), transformed.row(j))).collect();
        let mut scores = vec![0.0; nb.entry_count()];
        let mut alpha = vec![0.0; nb.entry_count()];
        let mut pre = Tensor2::zeros(n, out);
        for i in 0..n {
            let r = nb.range(i);
            let logits: Vec<f64> = r
                .clone()
                .map(|e| {
                    scores[e] = s[i] + t[nb.member(e)];
                    leaky_relu(scores[e], LEAKY_SLOPE)
                })
                .collect();
            let probs = softmax(&logits)?;
            alpha[r.clone()].copy_from_slice(&probs);
            let row = pre.row_mut(i);
            row.copy_from_slice(h.bias.data());
            for e in r {
                let a = alpha[e];
                for (p, v) in row.iter_mut().zip(transformed.row(nb.member(e))) {
                    *p += a * v;
                }
            }
        }
        for i in 0..n {
            let dst = output.row_mut(i);
            for (c, &p) in pre.row(i).iter().enumerate() {
                let v = layer.activation.apply(p);
                if layer.concat {
                    dst[k * out + c] = v;
                } else {
                    dst[c] += v / k_heads as f64;
                }
            }
        }
        caches.push(HeadCache {
            transformed,
            scores,
            alpha,
            pre,
        });
    }
    Ok((
        output,
        LayerCache {
            input: x.clone(),
            heads: caches,
        },
    ))
}

/// One multi-head attention layer. Heads are concatenated when
/// `layer.concat`, averaged otherwise; the activation is applied per head
/// before combining.
pub fn gat_layer(layer: &LayerParams<'_>, nb: &Neighborhoods, x: &Tensor2) -> Result<LayerOutput> {
    let (features, cache) = layer_forward(layer, nb, x)?;
    Ok(LayerOutput {
        features,
        attention: cache.heads.into_iter().map(|h| h.alpha).collect(),
    })
}

/// Gradient accumulators of one head, same shapes as [`HeadParams`].
struct HeadGrads {
    w: Tensor2,
    att_self: Tensor2,
    att_neigh: Tensor2,
    bias: Tensor2,
}

/// Backward pass of one layer. Returns the gradient with respect to the
/// layer input.
fn layer_backward(
    layer: &LayerParams<'_>,
    nb: &Neighborhoods,
    cache: &LayerCache,
    d_out: &Tensor2,
    grads: &mut [HeadGrads],
) -> Tensor2 {
    let n = nb.node_count();
    let out = layer.head_out();
    let k_heads = layer.heads.len();
    let mut d_x = Tensor2::zeros(n, cache.input.cols());
    for (k, (h, hc)) in layer.heads.iter().zip(&cache.heads).enumerate() {
        let g = &mut grads[k];
        let mut d_pre = Tensor2::zeros(n, out);
        for i in 0..n {
            let src = d_out.row(i);
            let dst = d_pre.row_mut(i);
            for (c, d) in dst.iter_mut().enumerate() {
                let upstream = if layer.concat {
                    src[k * out + c]
                } else {
                    src[c] / k_heads as f64
                };
                *d = upstream * layer.activation.grad(hc.pre[(i, c)]);
            }
        }
        let mut d_transformed = Tensor2::zeros(n, out);
        let mut d_s = vec![0.0; n];
        let mut d_t = vec![0.0; n];
        for i in 0..n {
            let dp = d_pre.row(i);
            for (b, d) in g.bias.data_mut().iter_mut().zip(dp) {
                *b += d;
            }
            let r = nb.range(i);
            let d_alpha: Vec<f64> = r.clone().map(|e| dot(dp, hc.transformed.row(nb.member(e)))).collect();
            let inner: f64 = r.clone().zip(&d_alpha).map(|(e, d)| hc.alpha[e] * d).sum();
            for (e, da) in r.zip(&d_alpha) {
                let j = nb.member(e);
                let a = hc.alpha[e];
                for (t, d) in d_transformed.row_mut(j).iter_mut().zip(dp) {
                    *t += a * d;
                }
                let d_score = a * (da - inner) * leaky_relu_grad(hc.scores[e], LEAKY_SLOPE);
                d_s[i] += d_score;
                d_t[j] += d_score;
            }
        }
        for i in 0..n {
            let hp = hc.transformed.row(i);
            for (a, v) in g.att_self.data_mut().iter_mut().zip(hp) {
                *a += d_s[i] * v;
            }
            for (a, v) in g.att_neigh.data_mut().iter_mut().zip(hp) {
                *a += d_t[i] * v;
            }
            let dt = d_transformed.row_mut(i);
            for ((d, s), t) in dt.iter_mut().zip(h.att_self.data()).zip(h.att_neigh.data()) {
                *d += d_s[i] * s + d_t[i] * t;
            }
            g.w.add_outer(d_transformed.row(i), cache.input.row(i), 1.0);
            h.w.t_matvec_acc(d_transformed.row(i), d_x.row_mut(i));
        }
    }
    d_x
}

fn layer_params<'a>(params: &'a ParamSet, config: &GatConfig, l: usize) -> Result<LayerParams<'a>> {
    let heads = (0..config.heads)
        .map(|k| {
            Ok(HeadParams {
                w: params.get(&head_name(l, k, "w"))?,
                att_self: params.get(&head_name(l, k, "att_self"))?,
                att_neigh: params.get(&head_name(l, k, "att_neigh"))?,
                bias: params.get(&head_name(l, k, "bias"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LayerParams {
        heads,
        concat: l + 1 < config.layers,
        activation: Activation::Elu,
    })
}

struct Forward {
    caches: Vec<LayerCache>,
    outputs: Vec<Tensor2>,
    pooled: Vec<f64>,
    probs: Vec<f64>,
}

fn forward(params: &ParamSet, config: &GatConfig, x: &Tensor2, nb: &Neighborhoods) -> Result<Forward> {
    if nb.node_count() == 0 {
        return Err(Error::usage("cannot classify an empty graph"));
    }
    let mut caches = Vec::with_capacity(config.layers);
    let mut outputs = Vec::with_capacity(config.layers);
    let mut h = x.clone();
    for l in 0..config.layers {
        let layer = layer_params(params, config, l)?;
        let (next, cache) = layer_forward(&layer, nb, &h)?;
        caches.push(cache);
        outputs.push(next.clone());
        h = next;
    }
    let n = h.rows() as f64;
    let mut pooled = vec![0.0; h.cols()];
    for i in 0..h.rows() {
        for (p, v) in pooled.iter_mut().zip(h.row(i)) {
            *p += v / n;
        }
    }
    let w = params.get(GAT_OUT_W)?;
    let b = params.get(GAT_OUT_B)?;
    let mut logits = b.data().to_vec();
    w.matvec_acc(&pooled, &mut logits);
    let probs = softmax(&logits)?;
    Ok(Forward {
        caches,
        outputs,
        pooled,
        probs,
    })
}

fn loss_and_grads_impl(
    params: &ParamSet,
    config: &GatConfig,
    x: &Tensor2,
    nb: &Neighborhoods,
    label: usize,
) -> Result<(f64, Vec<f64>, ParamSet)> {
    let fw = forward(params, config, x, nb)?;
    let loss = cross_entropy(&fw.probs, label);
    let mut grads = params.zeros_like();
    let d_logits = cross_entropy_logit_grad(&fw.probs, label);
    grads.get_mut(GAT_OUT_W)?.add_outer(&d_logits, &fw.pooled, 1.0);
    for (b, d) in grads.get_mut(GAT_OUT_B)?.data_mut().iter_mut().zip(&d_logits) {
        *b += d;
    }
    let mut d_pooled = vec![0.0; fw.pooled.len()];
    params.get(GAT_OUT_W)?.t_matvec_acc(&d_logits, &mut d_pooled);
    let last = fw.outputs.last().expect("at least one layer");
    let n = last.rows();
    let mut d_h = Tensor2::from_fn(n, last.cols(), |_, c| d_pooled[c] / n as f64);
    for l in (0..config.layers).rev() {
        let layer = layer_params(params, config, l)?;
        let mut head_grads: Vec<HeadGrads> = layer
            .heads
            .iter()
            .map(|h| HeadGrads {
                w: Tensor2::zeros(h.w.rows(), h.w.cols()),
                att_self: Tensor2::zeros(h.att_self.rows(), 1),
                att_neigh: Tensor2::zeros(h.att_neigh.rows(), 1),
                bias: Tensor2::zeros(h.bias.rows(), 1),
            })
            .collect();
        d_h = layer_backward(&layer, nb, &fw.caches[l], &d_h, &mut head_grads);
        for (k, g) in head_grads.into_iter().enumerate() {
            grads.get_mut(&head_name(l, k, "w"))?.add_assign(&g.w);
            grads.get_mut(&head_name(l, k, "att_self"))?.add_assign(&g.att_self);
            grads.get_mut(&head_name(l, k, "att_neigh"))?.add_assign(&g.att_neigh);
            grads.get_mut(&head_name(l, k, "bias"))?.add_assign(&g.bias);
        }
    }
    Ok((loss, fw.probs, grads))
}

/// A graph in model-ready form: input features and neighborhoods.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub features: Tensor2,
    pub neighborhoods: Neighborhoods,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatModel {
    pub config: GatConfig,
    pub vocab_size: usize,
    pub params: ParamSet,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, limit: f64) -> Tensor2 {
    Tensor2::from_fn(rows, cols, |_, _| rng.gen_range(-limit..limit))
}

impl GatModel {
    /// Glorot-uniform weights and attention vectors drawn from `config.seed`.
    /// The first layer sees a single scalar in (0, 1], so its weights are
    /// widened by |vocabulary|/4 and its biases place each unit's ELU knee at
    /// a random point of that range. Later biases start at 0.
    pub fn new(config: &GatConfig, vocab_size: usize) -> Result<Self> {
        config.validate()?;
        if vocab_size == 0 {
            return Err(Error::usage("empty vocabulary"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::new();
        let gain = vocab_size as f64 / 4.0;
        for (l, (input, out, _)) in config.layer_dims().into_iter().enumerate() {
            let w_lim = (6.0 / (input + out) as f64).sqrt();
            let a_lim = (6.0 / (out + 1) as f64).sqrt();
            for k in 0..config.heads {
                let w = uniform(&mut rng, out, input, if l == 0 { w_lim * gain } else { w_lim });
                params.insert(head_name(l, k, "att_self"), uniform(&mut rng, out, 1, a_lim))?;
                params.insert(head_name(l, k, "att_neigh"), uniform(&mut rng, out, 1, a_lim))?;
                let bias = if l == 0 {
                    Tensor2::from_fn(out, 1, |r, _| -w.row(r)[0] * rng.gen_range(0.0..1.0))
                } else {
                    Tensor2::zeros(out, 1)
                };
                params.insert(head_name(l, k, "w"), w)?;
                params.insert(head_name(l, k, "bias"), bias)?;
            }
        }
        let o_lim = (6.0 / (config.hidden + config.classes) as f64).sqrt();
        params.insert(GAT_OUT_W, uniform(&mut rng, config.classes, config.hidden, o_lim))?;
        params.insert(GAT_OUT_B, Tensor2::zeros(config.classes, 1))?;
        Ok(GatModel {
            config: config.clone(),
            vocab_size,
            params,
        })
    }

    pub fn layer(&self, l: usize) -> Result<LayerParams<'_>> {
        if l >= self.config.layers {
            return Err(Error::usage(format!("layer {l} out of range")));
        }
        layer_params(&self.params, &self.config, l)
    }

    /// Scalar feature `(vocab_id + 1) / |vocabulary|` per node.
    pub fn prepare(&self, graph: &ApiCallGraph) -> Result<PreparedGraph> {
        if self.config.in_features != 1 {
            return Err(Error::usage("graph features are defined for in_features = 1 only"));
        }
        if graph.nodes.is_empty() {
            return Err(Error::usage(format!("{}: cannot classify an empty graph", graph.app_id)));
        }
        let v = self.vocab_size as f64;
        let values = graph.nodes.iter().map(|n| (n.id as f64 + 1.0) / v).collect();
        Ok(PreparedGraph {
            features: Tensor2::column(values)?,
            neighborhoods: Neighborhoods::from_structure(&graph.structure()),
        })
    }

    /// Class probabilities and final-layer coefficients (per head).
    pub fn forward(&self, g: &PreparedGraph) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let fw = forward(&self.params, &self.config, &g.features, &g.neighborhoods)?;
        let last = fw.caches.into_iter().last().expect("at least one layer");
        Ok((fw.probs, last.heads.into_iter().map(|h| h.alpha).collect()))
    }

    /// Cross-entropy loss, class probabilities and parameter gradients.
    pub fn loss_and_grads(&self, g: &PreparedGraph, label: usize) -> Result<(f64, Vec<f64>, ParamSet)> {
        if label >= self.config.classes {
            return Err(Error::usage(format!("label {label} out of range")));
        }
        loss_and_grads_impl(&self.params, &self.config, &g.features, &g.neighborhoods, label)
    }

    /// Loss only, evaluated at arbitrary parameters of this model's layout.
    pub fn loss_at(&self, params: &ParamSet, g: &PreparedGraph, label: usize) -> Result<f64> {
        let fw = forward(params, &self.config, &g.features, &g.neighborhoods)?;
        Ok(cross_entropy(&fw.probs, label))
    }
}

/// Node attention from head-averaged final-layer coefficients.
pub fn node_attention(nb: &Neighborhoods, alpha: &[Vec<f64>], mode: NodeAttentionMode) -> Vec<f64> {
    let n = nb.node_count();
    let k = alpha.len() as f64;
    let mut scores = vec![0.0; n];
    for i in 0..n {
        for e in nb.range(i) {
            let a: f64 = alpha.iter().map(|h| h[e]).sum::<f64>() / k;
            match mode {
                NodeAttentionMode::Received => scores[nb.member(e)] += a,
                NodeAttentionMode::Literal => scores[i] += a,
            }
        }
    }
    for (i, s) in scores.iter_mut().enumerate() {
        *s /= nb.of(i).len() as f64;
    }
    scores
}

/// Class probabilities and per-node attention for one graph, using the
/// model's configured attention mode.
pub fn gat_predict(model: &GatModel, graph: &ApiCallGraph) -> Result<(Vec<f64>, NodeAttention)> {
    gat_predict_with(model, graph, model.config.node_attention)
}

pub fn gat_predict_with(
    model: &GatModel,
    graph: &ApiCallGraph,
    mode: NodeAttentionMode,
) -> Result<(Vec<f64>, NodeAttention)> {
    let g = model.prepare(graph)?;
    let (probs, alpha) = model.forward(&g)?;
    let scores = node_attention(&g.neighborhoods, &alpha, mode);
    Ok((probs, NodeAttention::new(graph.node_ids(), scores)?))
}

pub(crate) fn labeled_indices(corpus: &[ApiCallGraph]) -> Result<Vec<(usize, usize)>> {
    let labeled: Vec<(usize, usize)> = corpus
        .iter()
        .enumerate()
        .filter_map(|(i, g)| g.label.class_index().map(|c| (i, c)))
        .collect();
    let has = |c: usize| labeled.iter().any(|&(_, l)| l == c);
    if !(has(0) && has(1)) {
        return Err(Error::usage("training corpus must contain both malicious and benign graphs"));
    }
    Ok(labeled)
}

/// Trains with one adaptive-moment update per graph, visiting graphs in a
/// seeded shuffled order each epoch. Returns the trained model and the
/// epoch-mean loss trace. Unlabeled and empty graphs are skipped.
pub fn train_gat(model: &GatModel, corpus: &[ApiCallGraph], config: &GatConfig) -> Result<(GatModel, Vec<f64>)> {
    config.validate()?;
    if !config.same_shape(&model.config) {
        return Err(Error::usage("training config does not match the model's layer layout"));
    }
    let labeled = labeled_indices(corpus)?;
    let mut trained = model.clone();
    trained.config = config.clone();
    let mut prepared = Vec::with_capacity(labeled.len());
    for &(i, label) in &labeled {
        if corpus[i].nodes.is_empty() {
            log::warn!("{}: empty graph skipped", corpus[i].app_id);
            continue;
        }
        prepared.push((trained.prepare(&corpus[i])?, label));
    }
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut stream_rng(config.seed, DOMAIN_GAT_SHUFFLE, epoch as u64));
        let mut total = 0.0;
        for &p in &order {
            let (g, label) = &prepared[p];
            let (loss, _, grads) = trained.loss_and_grads(g, *label)?;
            trained.params.adam_update(&grads, config.learning_rate)?;
            total += loss;
        }
        let mean = total / prepared.len() as f64;
        log::info!("gat epoch {}/{}: loss {mean:.5}", epoch + 1, config.epochs);
        trace.push(mean);
    }
    Ok((trained, trace))
}

//! Graph-walking attention agent for app classification.
//!
//! An agent starts on a random node and moves along out-edges for `T - 1`
//! steps. At each step it scores the candidate neighbors with
//! `s_v = aᵀ tanh(E[v] + W_ctx h + b)` and picks one. An LSTM reads the
//! one-hot id of every visited node; an exponential moving average of the
//! hidden states serves as memory. The memory concatenated with the final
//! hidden state feeds a linear softmax classifier. Selection is trained with
//! a baselined policy gradient, everything else with cross-entropy.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::apigraph::ApiCallGraph;
use crate::attention::NodeAttention;
use crate::error::{Error, Result};
use crate::gat::labeled_indices;
use crate::numkernel::{
    cross_entropy, cross_entropy_logit_grad, dot, lstm_backward, lstm_forward, softmax, LstmGrads,
    LstmInput, LstmState, LstmStepCache, LstmWeights, ParamSet, Tensor2, LSTM_BIAS, LSTM_W_HIDDEN,
    LSTM_W_INPUT,
};
use crate::seeding::{pack_stream, stream_rng, DOMAIN_GAM_INIT, DOMAIN_GAM_PREDICT, DOMAIN_GAM_TRAIN};

pub const GAM_NODE: &str = "gam.att.node";
pub const GAM_CTX: &str = "gam.att.ctx";
pub const GAM_ATT_BIAS: &str = "gam.att.bias";
pub const GAM_ATT_VEC: &str = "gam.att.vec";
pub const GAM_CLS_W: &str = "gam.cls.w";
pub const GAM_CLS_B: &str = "gam.cls.b";

const CLASSES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamConfig {
    /// Nodes visited per rollout.
    pub step_size: usize,
    pub n_agents: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub hidden_dim: usize,
    pub attention_dim: usize,
    /// γ in `M ← (1 − γ) M + γ h`.
    pub memory_decay: f64,
    /// Decay of the moving-average reward baseline.
    pub baseline_decay: f64,
    pub seed: u64,
}

impl Default for GamConfig {
    fn default() -> Self {
        GamConfig {
            step_size: 40,
            n_agents: 10,
            epochs: 50,
            learning_rate: 1e-4,
            hidden_dim: 32,
            attention_dim: 32,
            memory_decay: 0.1,
            baseline_decay: 0.9,
            seed: 0,
        }
    }
}

impl GamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step_size == 0 || self.n_agents == 0 {
            return Err(Error::usage("gam step size and agent count must be at least 1"));
        }
        if self.hidden_dim == 0 || self.attention_dim == 0 {
            return Err(Error::usage("gam hidden and attention dims must be at least 1"));
        }
        if !(self.memory_decay > 0.0 && self.memory_decay < 1.0) {
            return Err(Error::usage("gam memory decay must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(Error::usage("gam baseline decay must lie in [0, 1)"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::usage("gam learning rate must be positive"));
        }
        Ok(())
    }

    fn same_shape(&self, other: &GamConfig) -> bool {
        (self.hidden_dim, self.attention_dim) == (other.hidden_dim, other.attention_dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutMode {
    Sample,
    Argmax,
}

/// One attention-guided move. Positions index the graph's node list.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub candidates: Vec<usize>,
    pub distribution: Vec<f64>,
    /// Index into `candidates`.
    pub chosen: usize,
    pub log_prob: f64,
}

/// A walk over node positions (indices into `graph.nodes`).
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub visited: Vec<usize>,
    /// Move `t` leads from `visited[t]` to `visited[t + 1]`; `None` marks a
    /// restart from a node without neighbors.
    pub decisions: Vec<Option<Decision>>,
    pub probs: Vec<f64>,
}

/// Graph in agent-ready form.
#[derive(Debug, Clone)]
pub struct WalkGraph {
    pub vocab_ids: Vec<u32>,
    pub out_adj: Vec<Vec<usize>>,
    pub in_adj: Vec<Vec<usize>>,
    /// Start pool: positions with out-degree > 0, or all positions.
    pub starts: Vec<usize>,
}

impl WalkGraph {
    pub fn new(graph: &ApiCallGraph) -> Result<Self> {
        if graph.nodes.is_empty() {
            return Err(Error::usage(format!("{}: cannot walk an empty graph", graph.app_id)));
        }
        let s = graph.structure();
        let mut starts: Vec<usize> = (0..s.len()).filter(|&i| !s.out_adj[i].is_empty()).collect();
        if starts.is_empty() {
            starts = (0..s.len()).collect();
        }
        Ok(WalkGraph {
            vocab_ids: s.vocab_ids,
            out_adj: s.out_adj,
            in_adj: s.in_adj,
            starts,
        })
    }

    pub fn len(&self) -> usize {
        self.vocab_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab_ids.is_empty()
    }

    fn candidates(&self, node: usize) -> &[usize] {
        if !self.out_adj[node].is_empty() {
            &self.out_adj[node]
        } else {
            &self.in_adj[node]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamModel {
    pub config: GamConfig,
    pub vocab_size: usize,
    pub params: ParamSet,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, limit: f64) -> Tensor2 {
    Tensor2::from_fn(rows, cols, |_, _| rng.gen_range(-limit..limit))
}

impl GamModel {
    /// Uniform random initialization from `config.seed`. Biases start at 0
    /// except the LSTM forget gate, which starts at 1.
    pub fn new(config: &GamConfig, vocab_size: usize) -> Result<Self> {
        config.validate()?;
        if vocab_size == 0 {
            return Err(Error::usage("empty vocabulary"));
        }
        let (h, a, v) = (config.hidden_dim, config.attention_dim, vocab_size);
        let mut rng = stream_rng(config.seed, DOMAIN_GAM_INIT, 0);
        let lstm_lim = 1.0 / (h as f64).sqrt();
        let mut params = ParamSet::new();
        params.insert(LSTM_W_INPUT, uniform(&mut rng, 4 * h, v, lstm_lim))?;
        params.insert(LSTM_W_HIDDEN, uniform(&mut rng, 4 * h, h, lstm_lim))?;
        params.insert(LSTM_BIAS, Tensor2::from_fn(4 * h, 1, |r, _| if (h..2 * h).contains(&r) { 1.0 } else { 0.0 }))?;
        let att_lim = 1.0 / (a as f64).sqrt();
        params.insert(GAM_NODE, uniform(&mut rng, v, a, att_lim))?;
        params.insert(GAM_CTX, uniform(&mut rng, a, h, (6.0 / (a + h) as f64).sqrt()))?;
        params.insert(GAM_ATT_BIAS, Tensor2::zeros(a, 1))?;
        params.insert(GAM_ATT_VEC, uniform(&mut rng, a, 1, att_lim))?;
        params.insert(GAM_CLS_W, uniform(&mut rng, CLASSES, 2 * h, (6.0 / (2 * h + CLASSES) as f64).sqrt()))?;
        params.insert(GAM_CLS_B, Tensor2::zeros(CLASSES, 1))?;
        Ok(GamModel {
            config: config.clone(),
            vocab_size,
            params,
        })
    }
}

struct AttentionView<'a> {
    node: &'a Tensor2,
    ctx: &'a Tensor2,
    bias: &'a Tensor2,
    vec: &'a Tensor2,
}

impl<'a> AttentionView<'a> {
    fn new(params: &'a ParamSet) -> Result<Self> {
        Ok(AttentionView {
            node: params.get(GAM_NODE)?,
            ctx: params.get(GAM_CTX)?,
            bias: params.get(GAM_ATT_BIAS)?,
            vec: params.get(GAM_ATT_VEC)?,
        })
    }

    /// Candidate scores plus the `tanh` activations behind them.
    fn scores(&self, vocab_ids: &[u32], context: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if context.len() != self.ctx.cols() {
            return Err(Error::usage("context size does not match the attention map"));
        }
        let mut shared = self.bias.data().to_vec();
        self.ctx.matvec_acc(context, &mut shared);
        let mut scores = Vec::with_capacity(vocab_ids.len());
        let mut acts = Vec::with_capacity(vocab_ids.len());
        for &v in vocab_ids {
            let v = v as usize;
            if v >= self.node.rows() {
                return Err(Error::usage(format!("node id {v} outside the vocabulary")));
            }
            let act: Vec<f64> = self.node.row(v).iter().zip(&shared).map(|(e, s)| (e + s).tanh()).collect();
            scores.push(dot(self.vec.data(), &act));
            acts.push(act);
        }
        Ok((scores, acts))
    }
}

/// Attention distribution over candidate nodes (vocabulary ids) given a
/// context vector.
pub fn structural_attention(model: &GamModel, candidates: &[u32], context: &[f64]) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::usage("structural attention needs at least one candidate"));
    }
    let (scores, _) = AttentionView::new(&model.params)?.scores(candidates, context)?;
    softmax(&scores)
}

enum Policy<'r> {
    Sample(&'r mut ChaCha8Rng),
    Argmax(&'r mut ChaCha8Rng),
    Replay(&'r Rollout),
}

struct Trace {
    lstm: Vec<LstmStepCache>,
    hidden: Vec<Vec<f64>>,
    /// Per decision: tanh activations for every candidate.
    acts: Vec<Option<Vec<Vec<f64>>>>,
    z: Vec<f64>,
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn sample_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn walk(params: &ParamSet, config: &GamConfig, g: &WalkGraph, mut policy: Policy<'_>) -> Result<(Rollout, Trace)> {
    let steps = config.step_size;
    if let Policy::Replay(r) = &policy {
        if r.visited.len() != steps || r.decisions.len() + 1 != steps {
            return Err(Error::usage("replayed rollout length does not match the step size"));
        }
    }
    let lstm = LstmWeights::from_params(params)?;
    let att = AttentionView::new(params)?;
    let h = config.hidden_dim;
    let gamma = config.memory_decay;

    let pick_start = |policy: &mut Policy<'_>, t: usize| -> usize {
        match policy {
            Policy::Sample(rng) | Policy::Argmax(rng) => g.starts[rng.gen_range(0..g.starts.len())],
            Policy::Replay(r) => r.visited[t],
        }
    };

    let mut visited = Vec::with_capacity(steps);
    let mut decisions = Vec::with_capacity(steps.saturating_sub(1));
    let mut caches = Vec::with_capacity(steps);
    let mut hidden = Vec::with_capacity(steps);
    let mut acts_log = Vec::with_capacity(steps.saturating_sub(1));
    let mut state = LstmState::zeros(h);
    let mut memory = vec![0.0; h];

    let mut current = pick_start(&mut policy, 0);
    for t in 0..steps {
        if t > 0 {
            let cands = g.candidates(current);
            if cands.is_empty() {
                current = pick_start(&mut policy, t);
                decisions.push(None);
                acts_log.push(None);
            } else {
                let ids: Vec<u32> = cands.iter().map(|&c| g.vocab_ids[c]).collect();
                let (scores, acts) = att.scores(&ids, &state.hidden)?;
                let dist = softmax(&scores)?;
                let chosen = match &mut policy {
                    Policy::Sample(rng) => sample_index(rng, &dist),
                    Policy::Argmax(_) => argmax_lowest(&dist),
                    Policy::Replay(r) => match &r.decisions[t - 1] {
                        Some(d) if d.candidates == cands => d.chosen,
                        _ => return Err(Error::usage("replayed rollout does not fit the graph")),
                    },
                };
                current = cands[chosen];
                decisions.push(Some(Decision {
                    candidates: cands.to_vec(),
                    log_prob: dist[chosen].ln(),
                    distribution: dist,
                    chosen,
                }));
                acts_log.push(Some(acts));
            }
        }
        visited.push(current);
        let id = g.vocab_ids[current] as usize;
        let (next, cache) = lstm_forward(&state, LstmInput::OneHot(id), &lstm)?;
        state = next;
        for (m, v) in memory.iter_mut().zip(&state.hidden) {
            *m = (1.0 - gamma) * *m + gamma * v;
        }
        caches.push(cache);
        hidden.push(state.hidden.clone());
    }

    let mut z = memory;
    z.extend_from_slice(&state.hidden);
    let w = params.get(GAM_CLS_W)?;
    let mut logits = params.get(GAM_CLS_B)?.data().to_vec();
    w.matvec_acc(&z, &mut logits);
    let probs = softmax(&logits)?;
    Ok((
        Rollout {
            visited,
            decisions,
            probs,
        },
        Trace {
            lstm: caches,
            hidden,
            acts: acts_log,
            z,
        },
    ))
}

/// Runs one agent. `Sample` draws moves from the attention distribution;
/// `Argmax` takes the most attended candidate, lowest position on ties. The
/// stream also drives start and restart nodes.
pub fn run_rollout(
    model: &GamModel,
    graph: &WalkGraph,
    mode: RolloutMode,
    rng: &mut ChaCha8Rng,
) -> Result<Rollout> {
    let policy = match mode {
        RolloutMode::Sample => Policy::Sample(rng),
        RolloutMode::Argmax => Policy::Argmax(rng),
    };
    walk(&model.params, &model.config, graph, policy).map(|(r, _)| r)
}

/// Surrogate objective of a fixed rollout:
/// `CE(ŷ, label) − advantage · Σ log π(chosen)`.
fn surrogate(rollout: &Rollout, label: usize, advantage: f64) -> f64 {
    let log_probs: f64 = rollout.decisions.iter().flatten().map(|d| d.log_prob).sum();
    cross_entropy(&rollout.probs, label) - advantage * log_probs
}

#[allow(clippy::too_many_arguments)]
fn backward(
    params: &ParamSet,
    config: &GamConfig,
    g: &WalkGraph,
    rollout: &Rollout,
    trace: &Trace,
    label: usize,
    advantage: f64,
    grads: &mut ParamSet,
) -> Result<()> {
    let h = config.hidden_dim;
    let steps = rollout.visited.len();
    let gamma = config.memory_decay;

    let d_logits = cross_entropy_logit_grad(&rollout.probs, label);
    grads.get_mut(GAM_CLS_W)?.add_outer(&d_logits, &trace.z, 1.0);
    for (b, d) in grads.get_mut(GAM_CLS_B)?.data_mut().iter_mut().zip(&d_logits) {
        *b += d;
    }
    let mut d_z = vec![0.0; 2 * h];
    params.get(GAM_CLS_W)?.t_matvec_acc(&d_logits, &mut d_z);

    let mut d_hidden: Vec<Vec<f64>> = (0..steps)
        .map(|t| {
            let coef = gamma * (1.0 - gamma).powi((steps - 1 - t) as i32);
            d_z[..h].iter().map(|d| coef * d).collect()
        })
        .collect();
    for (d, v) in d_hidden[steps - 1].iter_mut().zip(&d_z[h..]) {
        *d += v;
    }

    if advantage != 0.0 {
        let att = AttentionView::new(params)?;
        let a = config.attention_dim;
        let mut d_vec = vec![0.0; a];
        let mut d_bias = vec![0.0; a];
        let mut d_ctx = Tensor2::zeros(a, h);
        let mut d_node: Vec<(usize, Vec<f64>)> = Vec::new();
        for (t, (dec, acts)) in rollout.decisions.iter().zip(&trace.acts).enumerate() {
            let (Some(dec), Some(acts)) = (dec, acts) else {
                continue;
            };
            let mut d_u_sum = vec![0.0; a];
            for (k, (&p, act)) in dec.distribution.iter().zip(acts).enumerate() {
                let d_score = advantage * (p - if k == dec.chosen { 1.0 } else { 0.0 });
                let mut d_u = vec![0.0; a];
                for c in 0..a {
                    d_vec[c] += d_score * act[c];
                    d_u[c] = d_score * att.vec.data()[c] * (1.0 - act[c] * act[c]);
                    d_u_sum[c] += d_u[c];
                }
                d_node.push((g.vocab_ids[dec.candidates[k]] as usize, d_u));
            }
            for (b, d) in d_bias.iter_mut().zip(&d_u_sum) {
                *b += d;
            }
            // The decision after visit t uses hidden[t] as context.
            d_ctx.add_outer(&d_u_sum, &trace.hidden[t], 1.0);
            att.ctx.t_matvec_acc(&d_u_sum, &mut d_hidden[t]);
        }
        grads.get_mut(GAM_ATT_VEC)?.data_mut().iter_mut().zip(&d_vec).for_each(|(g, d)| *g += d);
        grads.get_mut(GAM_ATT_BIAS)?.data_mut().iter_mut().zip(&d_bias).for_each(|(g, d)| *g += d);
        grads.get_mut(GAM_CTX)?.add_assign(&d_ctx);
        let node = grads.get_mut(GAM_NODE)?;
        for (v, d) in d_node {
            node.row_mut(v).iter_mut().zip(&d).for_each(|(g, d)| *g += d);
        }
    }

    let lstm = LstmWeights::from_params(params)?;
    let mut lg = LstmGrads::zeros_like(&lstm);
    let mut carry = LstmState::zeros(h);
    for t in (0..steps).rev() {
        let dh: Vec<f64> = carry.hidden.iter().zip(&d_hidden[t]).map(|(a, b)| a + b).collect();
        let (prev, _) = lstm_backward(&trace.lstm[t], &dh, &carry.cell, &lstm, &mut lg);
        carry = prev;
    }
    lg.add_into(grads)
}

impl GamModel {
    /// Surrogate loss of `rollout` replayed under `params`.
    pub fn replay_loss(&self, params: &ParamSet, graph: &WalkGraph, rollout: &Rollout, label: usize, advantage: f64) -> Result<f64> {
        let (replayed, _) = walk(params, &self.config, graph, Policy::Replay(rollout))?;
        Ok(surrogate(&replayed, label, advantage))
    }

    /// Surrogate loss and its gradient for a fixed rollout: cross-entropy
    /// through classifier, memory and LSTM, plus the policy-gradient term
    /// through the attention map and the contexts feeding it.
    pub fn replay_grads(&self, graph: &WalkGraph, rollout: &Rollout, label: usize, advantage: f64) -> Result<(f64, ParamSet)> {
        if label >= CLASSES {
            return Err(Error::usage(format!("label {label} out of range")));
        }
        let (replayed, trace) = walk(&self.params, &self.config, graph, Policy::Replay(rollout))?;
        let mut grads = self.params.zeros_like();
        backward(&self.params, &self.config, graph, &replayed, &trace, label, advantage, &mut grads)?;
        Ok((surrogate(&replayed, label, advantage), grads))
    }
}

/// Class probabilities averaged over `n_agents` argmax rollouts, and node
/// attention: every candidate distribution is added to its nodes and the
/// total is divided by the number of moves that had candidates.
pub fn gam_predict(model: &GamModel, graph: &ApiCallGraph) -> Result<(Vec<f64>, NodeAttention)> {
    let g = WalkGraph::new(graph)?;
    let mut probs = vec![0.0; CLASSES];
    let mut mass = vec![0.0; g.len()];
    let mut moves = 0usize;
    for agent in 0..model.config.n_agents {
        let mut rng = stream_rng(model.config.seed, DOMAIN_GAM_PREDICT, agent as u64);
        let r = run_rollout(model, &g, RolloutMode::Argmax, &mut rng)?;
        for (p, q) in probs.iter_mut().zip(&r.probs) {
            *p += q;
        }
        for d in r.decisions.iter().flatten() {
            moves += 1;
            for (&c, &p) in d.candidates.iter().zip(&d.distribution) {
                mass[c] += p;
            }
        }
    }
    let agents = model.config.n_agents as f64;
    probs.iter_mut().for_each(|p| *p /= agents);
    if moves > 0 {
        mass.iter_mut().for_each(|m| *m /= moves as f64);
    }
    Ok((probs, NodeAttention::new(g.vocab_ids, mass)?))
}

/// Trains with one adaptive-moment update per graph. Each graph gets
/// `n_agents` sampled rollouts; reward is +1 for a correct argmax
/// prediction, −1 otherwise, against a moving-average baseline. Returns the
/// trained model and the epoch-mean cross-entropy trace.
pub fn train_gam(model: &GamModel, corpus: &[ApiCallGraph], config: &GamConfig) -> Result<(GamModel, Vec<f64>)> {
    config.validate()?;
    if !config.same_shape(&model.config) {
        return Err(Error::usage("training config does not match the model's dimensions"));
    }
    let labeled = labeled_indices(corpus)?;
    let mut trained = model.clone();
    trained.config = config.clone();
    let mut graphs = Vec::with_capacity(labeled.len());
    for &(i, label) in &labeled {
        if corpus[i].nodes.is_empty() {
            log::warn!("{}: empty graph skipped", corpus[i].app_id);
            continue;
        }
        graphs.push((i, WalkGraph::new(&corpus[i])?, label));
    }
    let mut baseline = 0.0;
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        let mut correct = 0usize;
        for (i, g, label) in &graphs {
            let mut grads = trained.params.zeros_like();
            let mut reward_sum = 0.0;
            for agent in 0..config.n_agents {
                let mut rng = stream_rng(config.seed, DOMAIN_GAM_TRAIN, pack_stream(epoch, *i, agent));
                let (rollout, tr) = walk(&trained.params, config, g, Policy::Sample(&mut rng))?;
                let hit = argmax_lowest(&rollout.probs) == *label;
                let reward = if hit { 1.0 } else { -1.0 };
                correct += hit as usize;
                reward_sum += reward;
                total += cross_entropy(&rollout.probs, *label);
                backward(&trained.params, config, g, &rollout, &tr, *label, reward - baseline, &mut grads)?;
            }
            grads.scale(1.0 / config.n_agents as f64);
            trained.params.adam_update(&grads, config.learning_rate)?;
            baseline = config.baseline_decay * baseline
                + (1.0 - config.baseline_decay) * reward_sum / config.n_agents as f64;
        }
        let rollouts = (graphs.len() * config.n_agents) as f64;
        let mean = total / rollouts;
        log::info!(
            "gam epoch {}/{}: loss {mean:.5}, rollout accuracy {:.3}",
            epoch + 1,
            config.epochs,
            correct as f64 / rollouts
        );
        trace.push(mean);
    }
    Ok((trained, trace))
}

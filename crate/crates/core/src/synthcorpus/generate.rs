//! Per-app generation: a benign skeleton of classes and methods, optionally
//! with a motif planted into fresh methods.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::motifs::{library, Flow, Motif};
use super::pool::{self, benign_pool, pool_weight};
use super::CorpusSpec;
use crate::apigraph::{
    extract_app_graph, method_signature, print_listing, ApiCallGraph, ApiVocabulary,
    InstructionRow, Label, MethodListing, Target,
};
use crate::error::{Error, Result};
use crate::evalmetrics::{AppTruth, TRUTH_FORMAT};

/// Smallest number of background APIs an app carries next to a motif.
pub const MIN_BACKGROUND: usize = 8;

/// One generated app: its listing, the ground truth and its label.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedApp {
    pub app_id: String,
    pub label: Label,
    pub variant: Option<String>,
    pub listings: Vec<MethodListing>,
    pub truth: AppTruth,
}

impl GeneratedApp {
    pub fn listing_text(&self) -> String {
        print_listing(&self.listings)
    }

    /// Per-method truth map as consumed by graph extraction.
    pub fn method_truth(&self) -> BTreeMap<String, Label> {
        self.truth.method_labels(&self.listings)
    }

    pub fn graph(&self, vocab: &ApiVocabulary) -> ApiCallGraph {
        let mut g = extract_app_graph(&self.app_id, &self.listings, vocab, self.label, &self.method_truth());
        g.provenance = Some(crate::apigraph::extraction_provenance(&self.listing_text(), vocab));
        g
    }
}

/// Node budget sampler: `min + G`, `G` geometric, redrawn while above `max`,
/// with the success probability chosen so the mean hits the target.
#[derive(Debug, Clone, Copy)]
pub struct NodeCountSampler {
    min: usize,
    max: usize,
    p: f64,
}

impl NodeCountSampler {
    pub fn new(min: usize, mean: f64, max: usize) -> Result<Self> {
        if min as f64 >= mean || mean >= max as f64 {
            return Err(Error::usage(format!("need min < mean < max, got {min} / {mean} / {max}")));
        }
        let (mut lo, mut hi) = (1e-9_f64, 1.0 - 1e-9);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if truncated_mean(min, max, mid) > mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(NodeCountSampler { min, max, p: 0.5 * (lo + hi) })
    }

    pub fn mean(&self) -> f64 {
        truncated_mean(self.min, self.max, self.p)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let q = (1.0 - self.p).ln();
        loop {
            let u: f64 = 1.0 - rng.gen::<f64>();
            let g = (u.ln() / q).floor();
            if g <= (self.max - self.min) as f64 {
                return self.min + g as usize;
            }
        }
    }
}

fn truncated_mean(min: usize, max: usize, p: f64) -> f64 {
    let (mut mass, mut first) = (0.0, 0.0);
    let mut w = p;
    for g in 0..=(max - min) {
        mass += w;
        first += g as f64 * w;
        w *= 1.0 - p;
    }
    min as f64 + first / mass
}

#[derive(Debug, Clone)]
enum Item {
    Api(String),
    Local(String),
}

#[derive(Debug, Clone)]
struct Block {
    items: Vec<Item>,
    flow: Flow,
}

#[derive(Debug, Clone)]
enum Body {
    Loose(Vec<Item>),
    Shaped(Vec<Block>),
}

#[derive(Debug, Clone)]
struct Draft {
    class: String,
    name: String,
    body: Body,
}

impl Draft {
    fn signature(&self) -> String {
        method_signature(&self.class, &self.name)
    }
}

struct Skeleton {
    package: String,
    obfuscated: bool,
    classes: Vec<String>,
    methods: Vec<Draft>,
}

fn obfuscated_word(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
}

fn package_name(rng: &mut ChaCha8Rng, obfuscated: bool) -> String {
    if obfuscated {
        loop {
            let parts: Vec<String> = (0..3)
                .map(|_| {
                    let n = rng.gen_range(2..=5);
                    obfuscated_word(rng, n)
                })
                .collect();
            if !pool::RESERVED_ROOTS.contains(&parts[0].as_str()) {
                return parts.join("/");
            }
        }
    }
    let vendor = pool::VENDORS.choose(rng).expect("non-empty");
    let product = pool::PRODUCTS.choose(rng).expect("non-empty");
    format!("com/{vendor}/{product}")
}

fn letter_name(i: usize, upper: bool) -> String {
    let base = if upper { b'A' } else { b'a' };
    let mut s = String::new();
    let mut k = i;
    loop {
        s.insert(0, (base + (k % 26) as u8) as char);
        if k < 26 {
            break;
        }
        k = k / 26 - 1;
    }
    s
}

fn unique(name: String, taken: &BTreeSet<String>) -> String {
    if !taken.contains(&name) {
        return name;
    }
    (2..).map(|i| format!("{name}{i}")).find(|n| !taken.contains(n)).expect("unbounded")
}

fn background(spec: &CorpusSpec, n_apis: usize, rng: &mut ChaCha8Rng) -> Result<Skeleton> {
    let obfuscated = rng.gen_bool(0.3);
    let package = package_name(rng, obfuscated);

    let lo = spec.methods_per_app[0].max(1);
    let hi = spec.methods_per_app[1].max(lo);
    let n_methods = ((n_apis as f64 / 3.5) * rng.gen_range(0.8..1.25)).round() as usize;
    let n_methods = n_methods.clamp(lo, hi);
    let per_class = rng.gen_range(3.0..6.0);
    let n_classes = ((n_methods as f64 / per_class).ceil() as usize).clamp(1, 12);

    let mut class_names: Vec<String> = if obfuscated {
        (0..n_classes).map(|i| letter_name(i, true)).collect()
    } else {
        let mut names: Vec<&str> = pool::CLASS_NAMES.to_vec();
        names.shuffle(rng);
        names.into_iter().take(n_classes).map(str::to_owned).collect()
    };
    class_names.sort();
    let classes: Vec<String> = class_names.iter().map(|c| format!("L{package}/{c};")).collect();

    let mut owner: Vec<usize> = (0..n_methods).map(|i| if i < n_classes { i } else { rng.gen_range(0..n_classes) }).collect();
    owner.shuffle(rng);
    let mut taken: Vec<BTreeSet<String>> = vec![BTreeSet::new(); n_classes];
    let mut methods = Vec::with_capacity(n_methods);
    for &c in &owner {
        let base = if obfuscated {
            letter_name(taken[c].len(), false)
        } else {
            pool::METHOD_NAMES.choose(rng).expect("non-empty").to_string()
        };
        let name = unique(base, &taken[c]);
        taken[c].insert(name.clone());
        methods.push(Draft {
            class: classes[c].clone(),
            name,
            body: Body::Loose(Vec::new()),
        });
    }

    let pool = benign_pool();
    let indexed: Vec<(usize, &String)> = pool.iter().enumerate().collect();
    let chosen: Vec<String> = indexed
        .choose_multiple_weighted(rng, n_apis.min(pool.len()), |(i, _)| pool_weight(*i))
        .map_err(|e| Error::data(format!("API draw failed: {e}")))?
        .map(|(_, a)| (*a).clone())
        .collect();

    let mut items: Vec<Vec<Item>> = vec![Vec::new(); n_methods];
    for api in chosen {
        let m = rng.gen_range(0..n_methods);
        items[m].push(Item::Api(api.clone()));
        if n_methods > 1 && rng.gen_bool(0.25) {
            let other = (m + rng.gen_range(1..n_methods)) % n_methods;
            items[other].push(Item::Api(api));
        }
    }
    for list in items.iter_mut() {
        if rng.gen_bool(0.3) {
            list.push(Item::Api(pool::NOISE.choose(rng).expect("non-empty").to_string()));
        }
    }
    let sigs: Vec<String> = methods.iter().map(Draft::signature).collect();
    for m in 1..n_methods {
        if rng.gen_bool(0.8) {
            let parent = rng.gen_range(0..m);
            items[parent].push(Item::Local(sigs[m].clone()));
        }
    }
    if n_methods > 1 {
        for _ in 0..n_methods / 5 {
            let a = rng.gen_range(0..n_methods);
            let b = (a + rng.gen_range(1..n_methods)) % n_methods;
            items[a].push(Item::Local(sigs[b].clone()));
        }
    }
    for (draft, mut list) in methods.iter_mut().zip(items) {
        list.shuffle(rng);
        draft.body = Body::Loose(list);
    }
    Ok(Skeleton {
        package,
        obfuscated,
        classes,
        methods,
    })
}

fn shape(items: Vec<Item>, rng: &mut ChaCha8Rng) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut rest = items.into_iter().peekable();
    while rest.peek().is_some() {
        let len = rng.gen_range(1..=4);
        let chunk: Vec<Item> = rest.by_ref().take(len).collect();
        let r: f64 = rng.gen();
        let flow = if r < 0.6 {
            Flow::Chain
        } else if r < 0.8 {
            Flow::Guard
        } else if r < 0.9 {
            Flow::Loop
        } else {
            Flow::Branch
        };
        blocks.push(Block { items: chunk, flow });
    }
    blocks
}

fn invoke_opcode(item: &Item, rng: &mut ChaCha8Rng) -> &'static str {
    match item {
        Item::Local(_) => {
            if rng.gen_bool(0.5) {
                "invoke-virtual"
            } else {
                "invoke-direct"
            }
        }
        Item::Api(sig) if sig.ends_with("-><init>") => "invoke-direct",
        Item::Api(sig) => match sig.bytes().map(usize::from).sum::<usize>() % 5 {
            0 => "invoke-static",
            1 => "invoke-interface",
            _ => "invoke-virtual",
        },
    }
}

enum SymTarget {
    Sig(Target),
    Label(usize),
    None,
}

struct Emitter<'r> {
    rows: Vec<(&'static str, SymTarget)>,
    labels: Vec<usize>,
    rng: &'r mut ChaCha8Rng,
}

impl Emitter<'_> {
    fn label(&mut self) -> usize {
        self.labels.push(usize::MAX);
        self.labels.len() - 1
    }

    fn place(&mut self, l: usize) {
        self.labels[l] = self.rows.len();
    }

    fn items(&mut self, items: &[Item]) {
        for it in items {
            if self.rng.gen_bool(0.15) {
                self.rows.push(("const-string", SymTarget::None));
            }
            let op = invoke_opcode(it, self.rng);
            let target = match it {
                Item::Api(s) => Target::Api(s.clone()),
                Item::Local(s) => Target::Local(s.clone()),
            };
            self.rows.push((op, SymTarget::Sig(target)));
            if self.rng.gen_bool(0.3) {
                self.rows.push(("move-result-object", SymTarget::None));
            }
        }
    }

    fn block(&mut self, b: &Block) {
        match b.flow {
            Flow::Chain => self.items(&b.items),
            Flow::Branch if b.items.len() >= 2 => {
                let (other, end) = (self.label(), self.label());
                let mid = b.items.len() / 2;
                self.rows.push(("if-nez", SymTarget::Label(other)));
                self.items(&b.items[..mid]);
                self.rows.push(("goto", SymTarget::Label(end)));
                self.place(other);
                self.items(&b.items[mid..]);
                self.place(end);
            }
            Flow::Guard | Flow::Branch => {
                let end = self.label();
                self.rows.push(("if-eqz", SymTarget::Label(end)));
                self.items(&b.items);
                self.place(end);
            }
            Flow::Loop => {
                let (head, end) = (self.label(), self.label());
                self.place(head);
                self.rows.push(("if-ge", SymTarget::Label(end)));
                self.items(&b.items);
                self.rows.push(("goto", SymTarget::Label(head)));
                self.place(end);
            }
        }
    }

    fn finish(self, returns_object: bool) -> Vec<InstructionRow> {
        let mut rows = self.rows;
        rows.push((if returns_object { "return-object" } else { "return-void" }, SymTarget::None));
        let mut offsets = Vec::with_capacity(rows.len());
        let mut at = 0u32;
        for (op, _) in &rows {
            offsets.push(at);
            at += match *op {
                o if o.starts_with("invoke") => 6,
                "const-string" | "if-eqz" | "if-nez" | "if-ge" => 4,
                _ => 2,
            };
        }
        let labels = self.labels;
        rows.into_iter()
            .zip(&offsets)
            .map(|((op, t), &offset)| InstructionRow {
                offset,
                opcode: op.to_owned(),
                target: match t {
                    SymTarget::Sig(t) => t,
                    SymTarget::Label(l) => Target::Branch(offsets[labels[l]]),
                    SymTarget::None => Target::None,
                },
            })
            .collect()
    }
}

fn render(methods: Vec<Draft>, rng: &mut ChaCha8Rng) -> Vec<MethodListing> {
    let mut out: Vec<MethodListing> = methods
        .into_iter()
        .map(|d| {
            let blocks = match d.body {
                Body::Loose(items) => shape(items, rng),
                Body::Shaped(b) => b,
            };
            let returns_object = rng.gen_bool(0.3);
            let mut e = Emitter {
                rows: Vec::new(),
                labels: Vec::new(),
                rng,
            };
            for b in &blocks {
                e.block(b);
            }
            MethodListing {
                class_name: d.class,
                method_name: d.name,
                rows: e.finish(returns_object),
            }
        })
        .collect();
    out.sort_by_key(MethodListing::signature);
    out
}

fn truth(app_id: &str, label: Label, variant: Option<String>, methods: Vec<String>) -> AppTruth {
    let classes: BTreeSet<String> = methods
        .iter()
        .filter_map(|m| crate::apigraph::split_signature(m).map(|(c, _)| c.to_owned()))
        .collect();
    let mut methods = methods;
    methods.sort();
    AppTruth {
        format: TRUTH_FORMAT.to_owned(),
        app_id: app_id.to_owned(),
        label,
        variant,
        malicious_methods: methods,
        malicious_classes: classes.into_iter().collect(),
    }
}

fn exclusive_apis(m: &Motif) -> Vec<&'static str> {
    let pool: BTreeSet<String> = benign_pool().into_iter().collect();
    m.apis().into_iter().filter(|a| !pool.contains(*a)).collect()
}

/// A benign app. In decoy mode, half of them also carry an uncalled method
/// that uses a few motif-exclusive APIs.
pub fn gen_benign_app(app_id: &str, spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> Result<GeneratedApp> {
    let sampler = NodeCountSampler::new(spec.min_nodes, spec.mean_nodes, spec.max_nodes)?;
    let n = sampler.sample(rng);
    let mut sk = background(spec, n, rng)?;
    if spec.decoy && rng.gen_bool(0.5) {
        let motif = library().choose(rng).expect("non-empty");
        let apis = exclusive_apis(motif);
        let k = rng.gen_range(1..=2);
        let picked: Vec<Item> = apis.choose_multiple(rng, k).map(|a| Item::Api(a.to_string())).collect();
        let class = sk.classes.choose(rng).expect("at least one class").clone();
        let taken: BTreeSet<String> = sk.methods.iter().filter(|d| d.class == class).map(|d| d.name.clone()).collect();
        sk.methods.push(Draft {
            class,
            name: unique("unused".to_owned(), &taken),
            body: Body::Shaped(vec![Block { items: picked, flow: Flow::Chain }]),
        });
    }
    let listings = render(sk.methods, rng);
    Ok(GeneratedApp {
        app_id: app_id.to_owned(),
        label: Label::Benign,
        variant: None,
        listings,
        truth: truth(app_id, Label::Benign, None, Vec::new()),
    })
}

/// A malicious app: a benign skeleton plus 1 to 3 planted methods, in a
/// class of their own, that together run `motif`. Every background method
/// calls the entry method once, right after one of the motif's trigger APIs.
pub fn gen_malicious_app(
    app_id: &str,
    spec: &CorpusSpec,
    motif: &Motif,
    rng: &mut ChaCha8Rng,
) -> Result<GeneratedApp> {
    let motif_size = motif.apis().len();
    if motif.stages.is_empty() || motif_size + MIN_BACKGROUND > spec.min_nodes {
        return Err(Error::usage(format!(
            "motif {} uses {motif_size} APIs, too many for apps of at least {} nodes",
            motif.name, spec.min_nodes
        )));
    }
    let sampler = NodeCountSampler::new(spec.min_nodes, spec.mean_nodes, spec.max_nodes)?;
    let n = sampler.sample(rng);
    let mut sk = background(spec, n - motif_size, rng)?;

    let class = planted_class(&sk, rng);
    let n_stages = motif.stages.len();
    let k = rng.gen_range(1..=n_stages.min(3));
    let mut cuts: Vec<usize> = (1..n_stages).collect::<Vec<_>>().choose_multiple(rng, k - 1).copied().collect();
    cuts.sort_unstable();
    cuts.push(n_stages);

    let mut names: Vec<&str> = pool::PLANTED_METHOD_NAMES.to_vec();
    names.shuffle(rng);
    let sigs: Vec<String> = names[..k].iter().map(|n| method_signature(&class, n)).collect();

    let mut start = 0;
    let mut planted = Vec::with_capacity(k);
    for (j, &end) in cuts.iter().enumerate() {
        let mut blocks: Vec<Block> = motif.stages[start..end]
            .iter()
            .map(|s| Block {
                items: s.apis.iter().map(|a| Item::Api(a.to_string())).collect(),
                flow: s.flow,
            })
            .collect();
        if j + 1 < k {
            let at = rng.gen_range(0..=blocks.len());
            blocks.insert(at, Block { items: vec![Item::Local(sigs[j + 1].clone())], flow: Flow::Chain });
        } else if rng.gen_bool(0.3) {
            let helper = sk.methods.choose(rng).expect("skeleton has methods").signature();
            blocks.push(Block { items: vec![Item::Local(helper)], flow: Flow::Chain });
        }
        planted.push(Draft {
            class: class.clone(),
            name: names[j].to_owned(),
            body: Body::Shaped(blocks),
        });
        start = end;
    }

    for s in 0..sk.methods.len() {
        let trig = motif.trigger.choose(rng).map(|t| Item::Api(t.to_string()));
        if let Body::Loose(items) = &mut sk.methods[s].body {
            let at = rng.gen_range(0..=items.len());
            items.insert(at, Item::Local(sigs[0].clone()));
            if let Some(t) = trig {
                items.insert(at, t);
            }
        }
    }

    sk.methods.extend(planted);
    let listings = render(sk.methods, rng);
    let variant = Some(motif.name.to_owned());
    Ok(GeneratedApp {
        app_id: app_id.to_owned(),
        label: Label::Malicious,
        variant: variant.clone(),
        listings,
        truth: truth(app_id, Label::Malicious, variant, sigs),
    })
}

fn planted_class(sk: &Skeleton, rng: &mut ChaCha8Rng) -> String {
    let taken: BTreeSet<&String> = sk.classes.iter().collect();
    if rng.gen_bool(0.5) {
        let outer = sk.classes.choose(rng).expect("at least one class");
        let stem = outer.trim_end_matches(';');
        return (1..)
            .map(|i| format!("{stem}${i};"))
            .find(|c| !taken.contains(c))
            .expect("unbounded");
    }
    let candidates: Vec<String> = if sk.obfuscated {
        (0..64).map(|i| letter_name(i, true)).collect()
    } else {
        pool::PLANTED_CLASS_NAMES.iter().map(|s| s.to_string()).collect()
    };
    let free: Vec<String> = candidates
        .into_iter()
        .map(|c| format!("L{}/{c};", sk.package))
        .filter(|c| !taken.contains(c))
        .collect();
    match free.choose(rng) {
        Some(c) => c.clone(),
        None => format!("L{}/Payload;", sk.package),
    }
}

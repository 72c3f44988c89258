//! Acceptance criteria AC1-AC8. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xaidroid::apigraph::{
    api_usage, extract_app_graph, parse_listing, rename_identifiers, ApiCallGraph, ApiVocabulary, GraphNode, Label,
    MethodRecord, Renaming, GRAPH_FORMAT,
};
use xaidroid::evalmetrics::{evaluate_corpus, sweep, AppTruth, ConfusionCounts, Level, Source, SWEEP_THRESHOLDS, TRUTH_FORMAT};
use xaidroid::gam::{gam_predict, run_rollout, train_gam, GamConfig, GamModel, RolloutMode, WalkGraph};
use xaidroid::gat::{gat_predict, node_attention, train_gat, GatConfig, GatModel, Neighborhoods, NodeAttentionMode, PreparedGraph};
use xaidroid::localize::{
    class_attention, localize, normalize_methods, threshold_verdicts, AppDetection, ClassEntry, ClassScore,
    LocalizationReport, MethodEntry, MethodScore, ModelDetection, ModelOutput, Thresholds, Verdict, REPORT_FORMAT,
};
use xaidroid::numkernel::{grad_check, softmax, Tensor2};
use xaidroid::pipeline::analyze_corpus;
use xaidroid::seeding::stream_rng;
use xaidroid::synthcorpus::{gen_corpus, CorpusSpec, Split};
use xaidroid::NodeAttention;

const FIXTURE: &str = include_str!("fixtures/sms_receiver.slst");

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// AC1 -------------------------------------------------------------------

fn ac1() -> Outcome {
    let t = Instant::now();
    let listings = parse_listing(FIXTURE).map_err(|e| e.to_string())?;
    let vocab = ApiVocabulary::from_apis(api_usage(&listings));
    let g = extract_app_graph("table", &listings, &vocab, Label::Unknown, &BTreeMap::new());
    let elapsed = t.elapsed();

    const SB: &str = "Ljava/lang/StringBuilder;";
    let sig = |c: &str, m: &str| format!("{c}->{m}");
    let sb_init = sig(SB, "<init>");
    let sb_append = sig(SB, "append");
    let sb_str = sig(SB, "toString");
    let action = sig("Landroid/content/Intent;", "getAction");
    let extras = sig("Landroid/content/Intent;", "getExtras");
    let equals = sig("Ljava/lang/String;", "equals");
    let get = sig("Landroid/os/Bundle;", "get");
    let pdu = sig("Landroid/telephony/SmsMessage;", "createFromPdu");
    let addr = sig("Landroid/telephony/SmsMessage;", "getDisplayOriginatingAddress");
    let body = sig("Landroid/telephony/SmsMessage;", "getDisplayMessageBody");
    let al = sig("Ljava/util/ArrayList;", "<init>");
    let add = sig("Ljava/util/List;", "add");
    let obj = sig("Ljava/lang/Object;", "toString");
    let default = sig("Landroid/telephony/SmsManager;", "getDefault");
    let send = sig("Landroid/telephony/SmsManager;", "sendTextMessage");

    // Hand trace of the listing: straight-line succession, both arms of
    // every if-*, the loop back-edge through the bounds check, self-loop on
    // repeated append, then the three inlined call sites.
    let expected: BTreeSet<(&str, &str)> = [
        (&sb_init, &action),
        (&action, &equals),
        (&equals, &extras),
        (&equals, &sb_str),
        (&extras, &get),
        (&extras, &sb_str),
        (&get, &pdu),
        (&get, &sb_str),
        (&pdu, &addr),
        (&addr, &sb_append),
        (&sb_append, &sb_append),
        (&sb_append, &body),
        (&body, &sb_append),
        (&sb_append, &pdu),
        (&sb_append, &sb_str),
        (&al, &add),
        (&add, &obj),
        (&default, &send),
        (&al, &sb_init),
        (&sb_str, &add),
        (&obj, &default),
    ]
    .into_iter()
    .map(|(a, b)| (a.as_str(), b.as_str()))
    .collect();

    let name = |id: u32| vocab.api(id).unwrap();
    let got: BTreeSet<(&str, &str)> = g.edge_set().into_iter().map(|(a, b)| (name(a), name(b))).collect();
    check(g.nodes.len() == 15, || format!("{} nodes, expected 15", g.nodes.len()))?;
    let per_method: Vec<usize> = g.methods.iter().map(|m| m.apis.len()).collect();
    check(per_method == [10, 3, 2], || format!("per-method API counts {per_method:?}, expected [10, 3, 2]"))?;
    check(got == expected, || {
        let missing: Vec<_> = expected.difference(&got).collect();
        let extra: Vec<_> = got.difference(&expected).collect();
        format!("edge sets differ: missing {missing:?}, extra {extra:?}")
    })?;
    check(elapsed < Duration::from_secs(1), || format!("took {}", secs(elapsed)))?;
    Ok(format!("15 nodes (10+3+2), {} edges exact incl. 3 cross-method, {} (limit 1s)", got.len(), secs(elapsed)))
}

// Shared random helpers ------------------------------------------------

fn random_graph(rng: &mut ChaCha8Rng, n: usize, vocab: u32, p: f64) -> ApiCallGraph {
    let mut ids: Vec<u32> = (0..vocab).collect();
    ids.shuffle(rng);
    let mut ids = ids[..n].to_vec();
    ids.sort_unstable();
    let mut edges = Vec::new();
    for &a in &ids {
        for &b in &ids {
            if rng.gen_bool(p) {
                edges.push([a, b]);
            }
        }
    }
    ApiCallGraph {
        format: GRAPH_FORMAT.to_owned(),
        app_id: "rand".to_owned(),
        label: Label::Benign,
        nodes: ids.iter().map(|&id| GraphNode { id, api: format!("Lr/A;->m{id}") }).collect(),
        edges,
        methods: Vec::new(),
        provenance: None,
    }
}

// AC2 -------------------------------------------------------------------

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-4;
const FD_TRIALS: u64 = 20;

fn ac2() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_gat: f64 = 0.0;
    let mut worst_gam: f64 = 0.0;
    let e = |e: xaidroid::Error| e.to_string();
    for trial in 0..FD_TRIALS {
        let model = GatModel::new(&GatConfig { seed: 1000 + trial, ..GatConfig::default() }, 16).map_err(e)?;
        let g = model.prepare(&random_graph(&mut rng, 5, 16, 0.35)).map_err(e)?;
        let label = (trial % 2) as usize;
        let (_, _, grads) = model.loss_and_grads(&g, label).map_err(e)?;
        let err = grad_check(|p| model.loss_at(p, &g, label), &model.params, &grads, FD_STEP).map_err(e)?;
        worst_gat = worst_gat.max(err);
    }
    for trial in 0..FD_TRIALS {
        let cfg = GamConfig {
            hidden_dim: 6,
            attention_dim: 5,
            step_size: 10,
            n_agents: 1,
            seed: 2000 + trial,
            ..GamConfig::default()
        };
        let model = GamModel::new(&cfg, 16).map_err(e)?;
        let g = WalkGraph::new(&random_graph(&mut rng, 5, 16, 0.35)).map_err(e)?;
        let r = run_rollout(&model, &g, RolloutMode::Sample, &mut stream_rng(trial, 99, 0)).map_err(e)?;
        let label = (trial % 2) as usize;
        let adv = rng.gen_range(-1.0..1.0);
        let (_, grads) = model.replay_grads(&g, &r, label, adv).map_err(e)?;
        let err = grad_check(|p| model.replay_loss(p, &g, &r, label, adv), &model.params, &grads, FD_STEP).map_err(e)?;
        worst_gam = worst_gam.max(err);
    }
    let elapsed = t.elapsed();
    check(worst_gat <= FD_TOL && worst_gam <= FD_TOL, || {
        format!("max rel err gat {worst_gat:.2e}, gam {worst_gam:.2e} (limit {FD_TOL:e})")
    })?;
    check(elapsed < Duration::from_secs(60), || format!("took {}", secs(elapsed)))?;
    Ok(format!(
        "{FD_TRIALS}+{FD_TRIALS} trials, max rel err gat {worst_gat:.2e}, gam {worst_gam:.2e} (limit {FD_TOL:e}), {} (limit 60s)",
        secs(elapsed)
    ))
}

// AC3 -------------------------------------------------------------------

const INSTANCES: usize = 200;

fn random_outputs(rng: &mut ChaCha8Rng, g: &ApiCallGraph) -> ModelOutput {
    let scores: Vec<f64> = g
        .nodes
        .iter()
        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..1.0f64).powi(6) })
        .collect();
    let p: f64 = rng.gen_range(0.0..1.0);
    ModelOutput {
        probs: vec![1.0 - p, p],
        attention: NodeAttention::new(g.node_ids(), scores).unwrap(),
    }
}

fn random_thresholds(rng: &mut ChaCha8Rng) -> Thresholds {
    Thresholds {
        method: 10f64.powf(rng.gen_range(-5.0..-1.0)),
        class: 10f64.powf(rng.gen_range(-5.0..-1.0)),
    }
}

fn malicious<'a>(items: impl Iterator<Item = (&'a str, Verdict)>) -> BTreeSet<&'a str> {
    items.filter(|(_, v)| v.is_malicious()).map(|(n, _)| n).collect()
}

fn ac3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut bump = |k: &'static str| *counts.entry(k).or_default() += 1;

    // softmax normalization and permutation equivariance
    for _ in 0..INSTANCES {
        let n = rng.gen_range(1..30);
        let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-60.0..60.0)).collect();
        let p = softmax(&logits).map_err(|e| e.to_string())?;
        let s: f64 = p.iter().sum();
        check((s - 1.0).abs() <= 1e-12, || format!("softmax sums to {s}"))?;
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let q = softmax(&perm.iter().map(|&i| logits[i]).collect::<Vec<_>>()).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            check((q[k] - p[i]).abs() <= 1e-12, || "softmax not permutation-equivariant".into())?;
        }
        bump("softmax");
    }

    // GAT attention normalization per node and head, and permutation equivariance
    let corpus_shapes = gen_corpus(&CorpusSpec { n_apps: 24, min_apps: 2, seed: 33, ..CorpusSpec::default() }).map_err(|e| e.to_string())?;
    for inst in 0..INSTANCES {
        let v = 40;
        let model = GatModel::new(&GatConfig { seed: inst as u64, ..GatConfig::default() }, v).unwrap();
        let n = rng.gen_range(2..14);
        let g = model.prepare(&random_graph(&mut rng, n, v as u32, 0.25)).unwrap();
        let (probs, alpha) = model.forward(&g).unwrap();
        for head in &alpha {
            for i in 0..n {
                let s: f64 = g.neighborhoods.range(i).map(|e| head[e]).sum();
                check((s - 1.0).abs() <= 1e-12, || format!("attention out of node {i} sums to {s}"))?;
            }
        }
        bump("gat-normalization");

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let lists: Vec<Vec<usize>> = (0..n).map(|i| g.neighborhoods.of(i).to_vec()).collect();
        let mut permuted = vec![Vec::new(); n];
        for (i, l) in lists.iter().enumerate() {
            let mut m: Vec<usize> = l.iter().map(|&j| perm[j]).collect();
            m.sort_unstable();
            permuted[perm[i]] = m;
        }
        let mut xp = Tensor2::zeros(n, 1);
        for i in 0..n {
            xp.row_mut(perm[i])[0] = g.features.row(i)[0];
        }
        let h = PreparedGraph {
            features: xp,
            neighborhoods: Neighborhoods::from_lists(&permuted).unwrap(),
        };
        let (probs_p, alpha_p) = model.forward(&h).unwrap();
        for (a, b) in probs.iter().zip(&probs_p) {
            check((a - b).abs() <= 1e-9, || "class probabilities change under relabeling".into())?;
        }
        let sa = node_attention(&g.neighborhoods, &alpha, NodeAttentionMode::Received);
        let sb = node_attention(&h.neighborhoods, &alpha_p, NodeAttentionMode::Received);
        for i in 0..n {
            check((sa[i] - sb[perm[i]]).abs() <= 1e-9, || "node attention not permuted with the nodes".into())?;
        }
        bump("permutation");
    }

    // method normalization and class partition law
    for _ in 0..INSTANCES {
        let n = rng.gen_range(1..25);
        let zero = rng.gen_bool(0.15);
        let values: Vec<f64> = (0..n).map(|_| if zero || rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..1e-3) }).collect();
        let norm = normalize_methods(&values);
        let s: f64 = norm.iter().sum();
        check(s == 0.0 || (s - 1.0).abs() <= 1e-9, || format!("normalized method attention sums to {s}"))?;
        bump("method-normalization");

        let classes: Vec<String> = (0..n).map(|_| format!("Lc{};", rng.gen_range(0..5))).collect();
        let refs: Vec<&str> = classes.iter().map(String::as_str).collect();
        let ca = class_attention(&norm, &refs).unwrap();
        let cs: f64 = ca.iter().map(|(_, v)| v).sum();
        check((cs - s).abs() <= 1e-9, || format!("class sum {cs} vs method sum {s}"))?;
        let distinct: BTreeSet<&str> = refs.iter().copied().collect();
        check(ca.len() == distinct.len(), || "classes are not a partition".into())?;
        bump("class-partition");
    }

    // ensemble intersection and threshold monotonicity on real graph shapes
    for _ in 0..INSTANCES {
        let g = corpus_shapes.graphs.choose(&mut rng).unwrap();
        let (a, b) = (random_outputs(&mut rng, g), random_outputs(&mut rng, g));
        let th = random_thresholds(&mut rng);
        let r = localize(g, &a, &b, th).unwrap();
        let sigs: Vec<String> = r.methods.iter().map(MethodEntry::signature).collect();
        let m_set = |f: &dyn Fn(&MethodEntry) -> Verdict| malicious(r.methods.iter().zip(&sigs).map(|(m, s)| (s.as_str(), f(m))));
        let (mg, mt, me) = (m_set(&|m| m.gam.verdict), m_set(&|m| m.gat.verdict), m_set(&|m| m.ensemble));
        check(me == mg.intersection(&mt).copied().collect(), || "method ensemble is not the intersection".into())?;
        let c_set = |f: &dyn Fn(&ClassEntry) -> Verdict| malicious(r.classes.iter().map(|c| (c.class_name.as_str(), f(c))));
        let (cg, ct, ce) = (c_set(&|c| c.gam.verdict), c_set(&|c| c.gat.verdict), c_set(&|c| c.ensemble));
        check(ce == cg.intersection(&ct).copied().collect(), || "class ensemble is not the intersection".into())?;
        let d = &r.detection;
        check(d.ensemble.is_malicious() == (d.gam.verdict.is_malicious() && d.gat.verdict.is_malicious()), || {
            "app ensemble is not the conjunction".into()
        })?;
        bump("intersection");

        // lower thresholds only ever add malicious units
        let mut ts: Vec<f64> = (0..4).map(|_| 10f64.powf(rng.gen_range(-6.0..-1.0))).collect();
        ts.sort_by(|x, y| y.total_cmp(x));
        let mut prev_m: Option<BTreeSet<String>> = None;
        let mut prev_c: Option<BTreeSet<String>> = None;
        for &t in &ts {
            let rt = r.rethreshold(Thresholds { method: t, class: t }).unwrap();
            let ms: BTreeSet<String> = rt.methods.iter().filter(|m| m.ensemble.is_malicious()).map(|m| m.signature()).collect();
            let cs: BTreeSet<String> = rt.classes.iter().filter(|c| c.ensemble.is_malicious()).map(|c| c.class_name.clone()).collect();
            if let (Some(pm), Some(pc)) = (&prev_m, &prev_c) {
                check(pm.is_subset(&ms) && pc.is_subset(&cs), || format!("malicious set shrank when lowering the threshold to {t:e}"))?;
            }
            prev_m = Some(ms);
            prev_c = Some(cs);
        }
        let v: f64 = rng.gen_range(0.0..1e-3);
        let up = v + rng.gen_range(0.0..1e-3);
        let t = 10f64.powf(rng.gen_range(-6.0..-2.0));
        let pair = threshold_verdicts(&[v, up], t).unwrap();
        check(!(pair[0].is_malicious() && !pair[1].is_malicious()), || "raising attention flipped a verdict to benign".into())?;
        bump("monotonicity");
    }

    let min = counts.values().copied().min().unwrap_or(0);
    check(min >= 100, || format!("only {min} instances for some invariant"))?;
    let names: Vec<String> = counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
    Ok(format!("all invariants held: {}", names.join(", ")))
}

// AC4 -------------------------------------------------------------------

fn random_ident(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
}

fn random_renaming(rng: &mut ChaCha8Rng, listings: &[xaidroid::apigraph::MethodListing]) -> Renaming {
    let mut r = Renaming::default();
    let mut used = BTreeSet::new();
    for l in listings {
        if !r.classes.contains_key(&l.class_name) {
            loop {
                let name = format!("Lzz/{}/{};", random_ident(rng, 3), random_ident(rng, 4));
                if used.insert(name.clone()) {
                    r.classes.insert(l.class_name.clone(), name);
                    break;
                }
            }
        }
    }
    let mut per_class: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for l in listings {
        let taken = per_class.entry(l.class_name.clone()).or_default();
        loop {
            let name = random_ident(rng, 6);
            if taken.insert(name.clone()) {
                r.methods.insert((l.class_name.clone(), l.method_name.clone()), name);
                break;
            }
        }
    }
    r
}

/// Maps class and method names in `report` back through `inverse`.
fn unrename_report(report: &LocalizationReport, inverse: &Renaming) -> LocalizationReport {
    let mut out = report.clone();
    for m in &mut out.methods {
        let key = (m.class_name.clone(), m.method_name.clone());
        m.method_name = inverse.methods.get(&key).cloned().unwrap_or(key.1);
        m.class_name = inverse.classes.get(&m.class_name).cloned().unwrap_or_else(|| m.class_name.clone());
    }
    for c in &mut out.classes {
        c.class_name = inverse.classes.get(&c.class_name).cloned().unwrap_or_else(|| c.class_name.clone());
    }
    out
}

fn ac4() -> Outcome {
    let corpus = gen_corpus(&CorpusSpec { n_apps: 12, min_apps: 2, seed: 44, ..CorpusSpec::default() }).map_err(|e| e.to_string())?;
    let vocab = &corpus.vocab;
    let gam = GamModel::new(&GamConfig { seed: 4, ..GamConfig::default() }, vocab.len()).unwrap();
    let gat = GatModel::new(&GatConfig { seed: 4, ..GatConfig::default() }, vocab.len()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let renamings = 10;
    let mut apps = 0;
    for k in 0..renamings {
        let app = &corpus.apps[k % corpus.apps.len()];
        let truth = app.method_truth();
        let g0 = extract_app_graph(&app.app_id, &app.listings, vocab, app.label, &truth);
        let r = random_renaming(&mut rng, &app.listings);
        let inv = r.inverse().map_err(|e| e.to_string())?;
        let renamed = rename_identifiers(&app.listings, &r).map_err(|e| e.to_string())?;
        let truth_r: BTreeMap<String, Label> = renamed.iter().zip(&app.listings).map(|(n, o)| (n.signature(), truth[&o.signature()])).collect();
        let g1 = extract_app_graph(&app.app_id, &renamed, vocab, app.label, &truth_r);

        check(g0.nodes == g1.nodes && g0.edges == g1.edges, || format!("{}: graph changed under renaming", app.app_id))?;
        let methods_back: Vec<MethodRecord> = g1
            .methods
            .iter()
            .map(|m| {
                let mut m = m.clone();
                m.method_name = inv.methods[&(m.class_name.clone(), m.method_name.clone())].clone();
                m.class_name = inv.classes[&m.class_name].clone();
                m
            })
            .collect();
        check(methods_back == g0.methods, || format!("{}: method records changed", app.app_id))?;

        let (p0, a0) = gam_predict(&gam, &g0).unwrap();
        let (p1, a1) = gam_predict(&gam, &g1).unwrap();
        let (q0, b0) = gat_predict(&gat, &g0).unwrap();
        let (q1, b1) = gat_predict(&gat, &g1).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        check(bits(&p0) == bits(&p1) && bits(&q0) == bits(&q1), || "probabilities changed".into())?;
        check(bits(&a0.scores) == bits(&a1.scores) && bits(&b0.scores) == bits(&b1.scores), || "attention changed".into())?;

        let rep0 = localize(&g0, &ModelOutput { probs: p0, attention: a0 }, &ModelOutput { probs: q0, attention: b0 }, Thresholds::default()).unwrap();
        let rep1 = localize(&g1, &ModelOutput { probs: p1, attention: a1 }, &ModelOutput { probs: q1, attention: b1 }, Thresholds::default()).unwrap();
        let back = unrename_report(&rep1, &inv);
        check(back.to_json().unwrap() == rep0.to_json().unwrap(), || format!("{}: report changed beyond the renamed identifiers", app.app_id))?;
        apps += 1;
    }
    Ok(format!("{renamings} random bijective renamings over {apps} apps: graphs, GAM/GAT attention and reports bit-identical"))
}

// AC5 -------------------------------------------------------------------

const VARIANTS: [&str; 3] = ["alpha", "beta", "gamma"];

fn verdict(rng: &mut ChaCha8Rng) -> Verdict {
    Verdict::from_flag(rng.gen_bool(0.5))
}

fn random_case(rng: &mut ChaCha8Rng) -> (Vec<LocalizationReport>, Vec<AppTruth>) {
    let n_apps = rng.gen_range(1..8);
    let mut reports = Vec::new();
    let mut truths = Vec::new();
    for a in 0..n_apps {
        let app_id = format!("a{a}");
        let label = if rng.gen_bool(0.6) { Label::Malicious } else { Label::Benign };
        let n_methods = rng.gen_range(1..7);
        let mut methods = Vec::new();
        let mut bad_methods = Vec::new();
        for m in 0..n_methods {
            let class_name = format!("Lp/C{};", rng.gen_range(0..3));
            let score = |rng: &mut ChaCha8Rng| MethodScore { attention: 0.0, normalized: 0.0, verdict: verdict(rng) };
            let e = MethodEntry {
                class_name,
                method_name: format!("m{m}"),
                gam: score(rng),
                gat: score(rng),
                ensemble: verdict(rng),
            };
            if rng.gen_bool(0.3) {
                bad_methods.push(e.signature());
            }
            methods.push(e);
        }
        let class_names: BTreeSet<String> = methods.iter().map(|m| m.class_name.clone()).collect();
        let classes: Vec<ClassEntry> = class_names
            .iter()
            .map(|c| ClassEntry {
                class_name: c.clone(),
                gam: ClassScore { attention: 0.0, verdict: verdict(rng) },
                gat: ClassScore { attention: 0.0, verdict: verdict(rng) },
                ensemble: verdict(rng),
            })
            .collect();
        let bad_classes: Vec<String> = class_names.iter().filter(|_| rng.gen_bool(0.4)).cloned().collect();
        let det = |rng: &mut ChaCha8Rng| ModelDetection { probs: vec![0.5, 0.5], verdict: verdict(rng) };
        reports.push(LocalizationReport {
            format: REPORT_FORMAT.to_owned(),
            app_id: app_id.clone(),
            thresholds: Thresholds::default(),
            detection: AppDetection { gam: det(rng), gat: det(rng), ensemble: verdict(rng) },
            methods,
            classes,
            provenance: None,
        });
        truths.push(AppTruth {
            format: TRUTH_FORMAT.to_owned(),
            app_id,
            label,
            variant: (label == Label::Malicious).then(|| VARIANTS.choose(rng).unwrap().to_string()),
            malicious_methods: bad_methods,
            malicious_classes: bad_classes,
        });
    }
    (reports, truths)
}

fn tally(c: &mut ConfusionCounts, pred: Verdict, truth: bool) {
    match (pred.is_malicious(), truth) {
        (true, true) => c.tp += 1,
        (true, false) => c.fp += 1,
        (false, false) => c.tn += 1,
        (false, true) => c.fn_ += 1,
    }
}

/// Straight loops over every unit, written independently of the library.
fn brute_force(reports: &[LocalizationReport], truths: &[AppTruth], level: Level, source: Source) -> BTreeMap<String, ConfusionCounts> {
    let pick = |gam: Verdict, gat: Verdict, ens: Verdict| match source {
        Source::Gam => gam,
        Source::Gat => gat,
        Source::Ensemble => ens,
    };
    let mut out: BTreeMap<String, ConfusionCounts> = BTreeMap::new();
    for r in reports {
        let t = truths.iter().find(|t| t.app_id == r.app_id).unwrap();
        match level {
            Level::App => {
                let d = &r.detection;
                tally(out.entry("all".into()).or_default(), pick(d.gam.verdict, d.gat.verdict, d.ensemble), t.label == Label::Malicious);
            }
            Level::Method if t.label == Label::Malicious => {
                for m in &r.methods {
                    let c = out.entry(t.variant.clone().unwrap()).or_default();
                    tally(c, pick(m.gam.verdict, m.gat.verdict, m.ensemble), t.malicious_methods.contains(&m.signature()));
                }
            }
            Level::Class if t.label == Label::Malicious => {
                for k in &r.classes {
                    let c = out.entry(t.variant.clone().unwrap()).or_default();
                    tally(c, pick(k.gam.verdict, k.gat.verdict, k.ensemble), t.malicious_classes.contains(&k.class_name));
                }
            }
            _ => {}
        }
    }
    out
}

fn ac5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sets = 1000;
    let mut compared = 0usize;
    for i in 0..sets {
        let (reports, truths) = random_case(&mut rng);
        for level in [Level::App, Level::Method, Level::Class] {
            let source = *[Source::Ensemble, Source::Gam, Source::Gat].choose(&mut rng).unwrap();
            let expected = brute_force(&reports, &truths, level, source);
            match evaluate_corpus(&reports, &truths, level, source) {
                Ok(e) => {
                    let got: BTreeMap<String, ConfusionCounts> =
                        e.variants.iter().map(|v| (v.variant.clone(), v.metrics.counts)).collect();
                    check(got == expected, || format!("set {i} {level:?}: {got:?} vs brute force {expected:?}"))?;
                    compared += 1;
                }
                Err(_) => check(expected.is_empty(), || format!("set {i} {level:?}: evaluation failed with units present"))?,
            }
        }
    }
    Ok(format!("{sets} random sets, {compared} level evaluations, confusion counts equal brute force exactly"))
}

// AC6 / AC7 ------------------------------------------------------------

const AC6_ACCURACY: f64 = 0.90;
const AC6_METHOD_RECALL: f64 = 0.90;
const AC6_CLASS_RECALL: f64 = 0.90;
const AC6_BUDGET: Duration = Duration::from_secs(30 * 60);
const AC7_F1_SLACK: f64 = 0.02;
const BENCH_SEED: u64 = 7;

struct Bench {
    reports: Vec<LocalizationReport>,
    truths: Vec<AppTruth>,
    elapsed: Duration,
}

fn bench() -> Result<Bench, String> {
    let e = |e: xaidroid::Error| e.to_string();
    let t = Instant::now();
    let corpus = gen_corpus(&CorpusSpec::default()).map_err(e)?;
    let train: Vec<ApiCallGraph> = corpus.split_graphs(Split::Train).into_iter().cloned().collect();
    let test: Vec<ApiCallGraph> = corpus.split_graphs(Split::Test).into_iter().cloned().collect();
    let v = corpus.vocab.len();
    let gat_cfg = GatConfig { seed: BENCH_SEED, ..GatConfig::default() };
    let (gat, _) = train_gat(&GatModel::new(&gat_cfg, v).map_err(e)?, &train, &gat_cfg).map_err(e)?;
    let gam_cfg = GamConfig { seed: BENCH_SEED, ..GamConfig::default() };
    let (gam, _) = train_gam(&GamModel::new(&gam_cfg, v).map_err(e)?, &train, &gam_cfg).map_err(e)?;
    let reports = analyze_corpus(&gam, &gat, &test, Thresholds::default(), 0).map_err(e)?;
    let ids: BTreeSet<&str> = test.iter().map(|g| g.app_id.as_str()).collect();
    let truths = corpus.truths().into_iter().filter(|t| ids.contains(t.app_id.as_str())).cloned().collect();
    Ok(Bench { reports, truths, elapsed: t.elapsed() })
}

fn ac6(b: &Bench) -> Outcome {
    let ev = |level| evaluate_corpus(&b.reports, &b.truths, level, Source::Ensemble).map_err(|e| e.to_string());
    let app = ev(Level::App)?.average;
    let method = ev(Level::Method)?.average;
    let class = ev(Level::Class)?.average;
    let summary = format!(
        "test apps {}: accuracy {:.4} (>= {AC6_ACCURACY}), FPR {:.4}, method recall {:.4} (>= {AC6_METHOD_RECALL}), class recall {:.4} (>= {AC6_CLASS_RECALL}), {} (limit {}s)",
        b.reports.len(),
        app.accuracy,
        app.fpr,
        method.recall,
        class.recall,
        secs(b.elapsed),
        AC6_BUDGET.as_secs()
    );
    let ok = app.accuracy >= AC6_ACCURACY
        && method.recall >= AC6_METHOD_RECALL
        && class.recall >= AC6_CLASS_RECALL
        && b.elapsed <= AC6_BUDGET;
    if ok {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn ac7(b: &Bench) -> Outcome {
    let pts = sweep(&b.reports, &b.truths, Level::Method, Source::Ensemble, &SWEEP_THRESHOLDS).map_err(|e| e.to_string())?;
    let series: Vec<String> = pts.iter().map(|p| format!("{:e}: R {:.4} F1 {:.4}", p.threshold, p.recall, p.f1)).collect();
    let monotone = pts.windows(2).all(|w| w[1].recall >= w[0].recall);
    let at = |t: f64| pts.iter().find(|p| p.threshold == t).map(|p| p.f1).unwrap();
    let (f_op, f_low) = (at(1e-4), at(5e-5));
    let summary = format!("[{}]; F1(1e-4) {f_op:.4} vs F1(5e-5) {f_low:.4} (slack {AC7_F1_SLACK})", series.join(", "));
    if monotone && f_op >= f_low - AC7_F1_SLACK {
        Ok(summary)
    } else {
        Err(format!("recall monotone {monotone}; {summary}"))
    }
}

// AC8 -------------------------------------------------------------------

fn xaidroid(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_xaidroid")).args(args).output().map_err(|e| e.to_string())?;
    check(out.status.success(), || format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn ac8() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let s = |p: &Path| p.to_str().unwrap().to_owned();
    let corpus = root.path().join("corpus");
    xaidroid(&["gen-corpus", "--out", &s(&corpus), "--n-apps", "60", "--min-apps", "3"])?;
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let dir = root.path().join(run);
        let (gam, gat, reports) = (dir.join("gam.json"), dir.join("gat.json"), dir.join("reports"));
        xaidroid(&["train", "--model", "gam", "--corpus", &s(&corpus), "--epochs", "3", "--out", &s(&gam)])?;
        xaidroid(&["train", "--model", "gat", "--corpus", &s(&corpus), "--epochs", "20", "--out", &s(&gat)])?;
        xaidroid(&["localize", "--gam", &s(&gam), "--gat", &s(&gat), "--corpus", &s(&corpus), "--out", &s(&reports)])?;
        runs.push((fs::read(gam).unwrap(), fs::read(gat).unwrap(), files(&reports)));
    }
    let (a, b) = (&runs[0], &runs[1]);
    check(a.0 == b.0, || "GAM checkpoints differ".into())?;
    check(a.1 == b.1, || "GAT checkpoints differ".into())?;
    check(a.2 == b.2, || "reports differ".into())?;
    Ok(format!("2 runs of train (gam, gat) + localize: checkpoints and {} reports byte-identical", a.2.len()))
}

// ---------------------------------------------------------------------

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(format!(
            "panicked: {}",
            p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
        )),
    }
}

fn main() {
    let mut results: Vec<(&str, &str, Outcome)> = vec![
        ("AC1", "graph construction golden test", guarded(ac1)),
        ("AC2", "gradient verification", guarded(ac2)),
        ("AC3", "invariant suite", guarded(ac3)),
        ("AC4", "renaming invariance", guarded(ac4)),
        ("AC5", "evaluation oracle equivalence", guarded(ac5)),
    ];
    match catch_unwind(bench) {
        Ok(Ok(b)) => {
            results.push(("AC6", "desk-scale benchmark", guarded(|| ac6(&b))));
            results.push(("AC7", "threshold sweep shape", guarded(|| ac7(&b))));
        }
        Ok(Err(e)) => {
            results.push(("AC6", "desk-scale benchmark", Err(e.clone())));
            results.push(("AC7", "threshold sweep shape", Err(e)));
        }
        Err(_) => {
            results.push(("AC6", "desk-scale benchmark", Err("benchmark run panicked".into())));
            results.push(("AC7", "threshold sweep shape", Err("benchmark run panicked".into())));
        }
    }
    results.push(("AC8", "determinism", guarded(ac8)));

    let mut failed = 0;
    for (id, name, r) in &results {
        match r {
            Ok(detail) => println!("{id} PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

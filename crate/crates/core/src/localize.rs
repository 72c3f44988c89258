//! Turns per-node attention of both models into method and class attention,
//! threshold verdicts and the ensemble decision.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::apigraph::ApiCallGraph;
use crate::attention::NodeAttention;
use crate::error::{Error, Result};

pub const REPORT_FORMAT: &str = "xaidroid-report-v1";
pub const DEFAULT_METHOD_THRESHOLD: f64 = 1e-4;
pub const DEFAULT_CLASS_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Malicious,
    Benign,
}

impl Verdict {
    pub fn is_malicious(self) -> bool {
        self == Verdict::Malicious
    }

    pub fn from_flag(malicious: bool) -> Self {
        if malicious {
            Verdict::Malicious
        } else {
            Verdict::Benign
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Gam,
    Gat,
}

/// Node attention tagged with the model that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionMap {
    pub model: ModelTag,
    pub attention: NodeAttention,
}

/// Per-method attention: the sum of node attention over the APIs the
/// method invokes in its own body. Missing nodes count as 0.
pub fn method_attention(attn: &NodeAttention, graph: &ApiCallGraph) -> Vec<f64> {
    graph
        .methods
        .iter()
        .map(|m| m.apis.iter().map(|&id| attn.get(id)).sum())
        .collect()
}

/// Divides by the total; an all-zero input stays all zero.
pub fn normalize_methods(values: &[f64]) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        values.iter().map(|v| v / total).collect()
    } else {
        vec![0.0; values.len()]
    }
}

/// Sums normalized method attention per class. `method_classes[k]` is the
/// class of method `k`; classes come out in order of first appearance.
pub fn class_attention(ma_norm: &[f64], method_classes: &[&str]) -> Result<Vec<(String, f64)>> {
    if ma_norm.len() != method_classes.len() {
        return Err(Error::usage("one class per method required"));
    }
    let mut out: Vec<(String, f64)> = Vec::new();
    for (&v, &c) in ma_norm.iter().zip(method_classes) {
        match out.iter_mut().find(|(name, _)| name == c) {
            Some(entry) => entry.1 += v,
            None => out.push((c.to_owned(), v)),
        }
    }
    Ok(out)
}

/// Malicious iff the value strictly exceeds the threshold.
pub fn threshold_verdicts(values: &[f64], threshold: f64) -> Result<Vec<Verdict>> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::usage(format!("threshold {threshold} must be positive")));
    }
    Ok(values.iter().map(|&v| Verdict::from_flag(v > threshold)).collect())
}

/// Malicious iff both verdicts are malicious.
pub fn ensemble_and(gam: Option<Verdict>, gat: Option<Verdict>) -> Result<Verdict> {
    match (gam, gat) {
        (Some(a), Some(b)) => Ok(Verdict::from_flag(a.is_malicious() && b.is_malicious())),
        _ => Err(Error::usage("ensemble needs a verdict from both models")),
    }
}

/// Argmax over `[benign, malicious]`; a tie is benign.
pub fn class_verdict(probs: &[f64]) -> Result<Verdict> {
    if probs.len() != 2 || probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::usage("class probabilities must be two finite values"));
    }
    Ok(Verdict::from_flag(probs[1] > probs[0]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDetection {
    pub probs: Vec<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppDetection {
    pub gam: ModelDetection,
    pub gat: ModelDetection,
    pub ensemble: Verdict,
}

pub fn detect_app(gam_probs: &[f64], gat_probs: &[f64]) -> Result<AppDetection> {
    let gam = class_verdict(gam_probs)?;
    let gat = class_verdict(gat_probs)?;
    Ok(AppDetection {
        gam: ModelDetection {
            probs: gam_probs.to_vec(),
            verdict: gam,
        },
        gat: ModelDetection {
            probs: gat_probs.to_vec(),
            verdict: gat,
        },
        ensemble: ensemble_and(Some(gam), Some(gat))?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub method: f64,
    pub class: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            method: DEFAULT_METHOD_THRESHOLD,
            class: DEFAULT_CLASS_THRESHOLD,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        threshold_verdicts(&[], self.method)?;
        threshold_verdicts(&[], self.class)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    /// MA: summed node attention.
    pub attention: f64,
    /// MA normalized over the app's methods.
    pub normalized: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEntry {
    #[serde(rename = "class")]
    pub class_name: String,
    #[serde(rename = "method")]
    pub method_name: String,
    pub gam: MethodScore,
    pub gat: MethodScore,
    pub ensemble: Verdict,
}

impl MethodEntry {
    pub fn signature(&self) -> String {
        crate::apigraph::method_signature(&self.class_name, &self.method_name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    /// CA: summed normalized method attention.
    pub attention: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    #[serde(rename = "class")]
    pub class_name: String,
    pub gam: ClassScore,
    pub gat: ClassScore,
    pub ensemble: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub format: String,
    pub app_id: String,
    pub thresholds: Thresholds,
    pub detection: AppDetection,
    pub methods: Vec<MethodEntry>,
    pub classes: Vec<ClassEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

/// Probabilities and node attention of one model on one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    pub probs: Vec<f64>,
    pub attention: NodeAttention,
}

fn method_scores(attn: &NodeAttention, graph: &ApiCallGraph, threshold: f64) -> Result<Vec<MethodScore>> {
    let raw = method_attention(attn, graph);
    let norm = normalize_methods(&raw);
    let verdicts = threshold_verdicts(&norm, threshold)?;
    Ok(raw
        .into_iter()
        .zip(norm)
        .zip(verdicts)
        .map(|((attention, normalized), verdict)| MethodScore {
            attention,
            normalized,
            verdict,
        })
        .collect())
}

fn class_scores(methods: &[MethodScore], classes: &[&str], threshold: f64) -> Result<Vec<ClassScore>> {
    let norm: Vec<f64> = methods.iter().map(|m| m.normalized).collect();
    let ca = class_attention(&norm, classes)?;
    let values: Vec<f64> = ca.iter().map(|(_, v)| *v).collect();
    let verdicts = threshold_verdicts(&values, threshold)?;
    Ok(values
        .into_iter()
        .zip(verdicts)
        .map(|(attention, verdict)| ClassScore { attention, verdict })
        .collect())
}

/// Builds the full report for one app.
pub fn localize(
    graph: &ApiCallGraph,
    gam: &ModelOutput,
    gat: &ModelOutput,
    thresholds: Thresholds,
) -> Result<LocalizationReport> {
    thresholds.validate()?;
    let detection = detect_app(&gam.probs, &gat.probs)?;
    let gam_m = method_scores(&gam.attention, graph, thresholds.method)?;
    let gat_m = method_scores(&gat.attention, graph, thresholds.method)?;
    let methods = graph
        .methods
        .iter()
        .zip(gam_m.iter().zip(&gat_m))
        .map(|(m, (&a, &b))| {
            Ok(MethodEntry {
                class_name: m.class_name.clone(),
                method_name: m.method_name.clone(),
                gam: a,
                gat: b,
                ensemble: ensemble_and(Some(a.verdict), Some(b.verdict))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = LocalizationReport {
        format: REPORT_FORMAT.to_owned(),
        app_id: graph.app_id.clone(),
        thresholds,
        detection,
        methods,
        classes: Vec::new(),
        provenance: None,
    };
    report.classes = report.class_entries()?;
    Ok(report)
}

impl LocalizationReport {
    fn class_entries(&self) -> Result<Vec<ClassEntry>> {
        let names: Vec<&str> = self.methods.iter().map(|m| m.class_name.as_str()).collect();
        let gam_m: Vec<MethodScore> = self.methods.iter().map(|m| m.gam).collect();
        let gat_m: Vec<MethodScore> = self.methods.iter().map(|m| m.gat).collect();
        let gam_c = class_scores(&gam_m, &names, self.thresholds.class)?;
        let gat_c = class_scores(&gat_m, &names, self.thresholds.class)?;
        let order = class_attention(&vec![0.0; names.len()], &names)?;
        order
            .into_iter()
            .zip(gam_c.into_iter().zip(gat_c))
            .map(|((class_name, _), (a, b))| {
                Ok(ClassEntry {
                    class_name,
                    gam: a,
                    gat: b,
                    ensemble: ensemble_and(Some(a.verdict), Some(b.verdict))?,
                })
            })
            .collect()
    }

    /// Same attention values, verdicts recomputed at new thresholds.
    pub fn rethreshold(&self, thresholds: Thresholds) -> Result<LocalizationReport> {
        thresholds.validate()?;
        let mut out = self.clone();
        out.thresholds = thresholds;
        for m in &mut out.methods {
            for s in [&mut m.gam, &mut m.gat] {
                s.verdict = Verdict::from_flag(s.normalized > thresholds.method);
            }
            m.ensemble = ensemble_and(Some(m.gam.verdict), Some(m.gat.verdict))?;
        }
        out.classes = out.class_entries()?;
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: LocalizationReport = serde_json::from_str(text)?;
        if r.format != REPORT_FORMAT {
            return Err(Error::data(format!("unexpected report format {:?}", r.format)));
        }
        Ok(r)
    }

    /// Plain-text rendering, units sorted by descending `min(gam, gat)`
    /// attention (the value the ensemble effectively thresholds).
    pub fn to_text(&self) -> String {
        let v = |x: Verdict| if x.is_malicious() { "MAL" } else { "-" };
        let d = &self.detection;
        let mut s = String::new();
        let _ = writeln!(s, "app {}", self.app_id);
        let _ = writeln!(
            s,
            "detection: gam {} ({:.4})  gat {} ({:.4})  ensemble {}",
            v(d.gam.verdict),
            d.gam.probs[1],
            v(d.gat.verdict),
            d.gat.probs[1],
            v(d.ensemble)
        );
        let _ = writeln!(s, "\nclasses (threshold {:e})", self.thresholds.class);
        let _ = writeln!(s, "{:>12} {:>12} {:>4} {:>4} {:>4}  class", "gam_ca", "gat_ca", "gam", "gat", "ens");
        let mut classes: Vec<&ClassEntry> = self.classes.iter().collect();
        classes.sort_by(|a, b| b.gam.attention.min(b.gat.attention).total_cmp(&a.gam.attention.min(a.gat.attention)));
        for c in classes {
            let _ = writeln!(
                s,
                "{:>12.6e} {:>12.6e} {:>4} {:>4} {:>4}  {}",
                c.gam.attention,
                c.gat.attention,
                v(c.gam.verdict),
                v(c.gat.verdict),
                v(c.ensemble),
                c.class_name
            );
        }
        let _ = writeln!(s, "\nmethods (threshold {:e})", self.thresholds.method);
        let _ = writeln!(s, "{:>12} {:>12} {:>4} {:>4} {:>4}  method", "gam_norm", "gat_norm", "gam", "gat", "ens");
        let mut methods: Vec<&MethodEntry> = self.methods.iter().collect();
        methods.sort_by(|a, b| b.gam.normalized.min(b.gat.normalized).total_cmp(&a.gam.normalized.min(a.gat.normalized)));
        for m in methods {
            let _ = writeln!(
                s,
                "{:>12.6e} {:>12.6e} {:>4} {:>4} {:>4}  {}",
                m.gam.normalized,
                m.gat.normalized,
                v(m.gam.verdict),
                v(m.gat.verdict),
                v(m.ensemble),
                m.signature()
            );
        }
        s
    }
}

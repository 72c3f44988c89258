//! Confusion-matrix metrics for app detection and for method/class
//! localization.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::apigraph::{Label, MethodListing};
use crate::error::{Error, Result};
use crate::localize::{LocalizationReport, Thresholds, Verdict};

pub const TRUTH_FORMAT: &str = "xaidroid-truth-v1";
pub const EVAL_FORMAT: &str = "xaidroid-eval-v1";
pub const SWEEP_THRESHOLDS: [f64; 5] = [5e-3, 1e-3, 5e-4, 1e-4, 5e-5];

/// Ground truth for one app.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppTruth {
    pub format: String,
    pub app_id: String,
    pub label: Label,
    /// Motif name for malicious apps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// Signatures `Lpkg/Cls;->name`.
    pub malicious_methods: Vec<String>,
    pub malicious_classes: Vec<String>,
}

impl AppTruth {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Per-method labels for `listings`, as consumed by graph extraction.
    /// Listed malicious methods are malicious, the rest benign.
    pub fn method_labels(&self, listings: &[MethodListing]) -> BTreeMap<String, Label> {
        let bad: BTreeSet<&str> = self.malicious_methods.iter().map(String::as_str).collect();
        listings
            .iter()
            .map(|l| {
                let sig = l.signature();
                let label = if bad.contains(sig.as_str()) { Label::Malicious } else { Label::Benign };
                (sig, label)
            })
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: AppTruth = serde_json::from_str(text)?;
        if t.format != TRUTH_FORMAT {
            return Err(Error::data(format!("unexpected truth format {:?}", t.format)));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Exact confusion counts; positives are `Malicious`.
pub fn score(predictions: &[Verdict], truths: &[Verdict]) -> Result<ConfusionCounts> {
    if predictions.len() != truths.len() {
        return Err(Error::usage(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (p, t) in predictions.iter().zip(truths) {
        match (p.is_malicious(), t.is_malicious()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub counts: ConfusionCounts,
    /// Metrics whose denominator was zero (reported as 0).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

pub fn metrics(c: &ConfusionCounts) -> Result<MetricRow> {
    if c.total() == 0 {
        return Err(Error::usage("metrics of empty confusion counts"));
    }
    let mut undefined = Vec::new();
    let mut ratio = |name: &str, num: u64, den: u64| {
        if den == 0 {
            undefined.push(name.to_owned());
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let accuracy = ratio("accuracy", c.tp + c.tn, c.total());
    let precision = ratio("precision", c.tp, c.tp + c.fp);
    let recall = ratio("recall", c.tp, c.tp + c.fn_);
    let fpr = ratio("fpr", c.fp, c.fp + c.tn);
    let fnr = ratio("fnr", c.fn_, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        undefined.push("f1".to_owned());
        0.0
    };
    Ok(MetricRow {
        accuracy,
        precision,
        recall,
        f1,
        fpr,
        fnr,
        counts: *c,
        undefined,
    })
}

/// Unweighted mean of each metric; counts are summed, flags merged.
pub fn macro_average(rows: &[MetricRow]) -> Result<MetricRow> {
    if rows.is_empty() {
        return Err(Error::usage("macro average of no rows"));
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&MetricRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let mut counts = ConfusionCounts::default();
    let mut flags = BTreeSet::new();
    for r in rows {
        counts.add(&r.counts);
        flags.extend(r.undefined.iter().cloned());
    }
    Ok(MetricRow {
        accuracy: mean(|r| r.accuracy),
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        f1: mean(|r| r.f1),
        fpr: mean(|r| r.fpr),
        fnr: mean(|r| r.fnr),
        counts,
        undefined: flags.into_iter().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    App,
    Class,
    Method,
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "app" => Ok(Level::App),
            "class" => Ok(Level::Class),
            "method" => Ok(Level::Method),
            _ => Err(Error::usage(format!("unknown level {s:?}"))),
        }
    }
}

/// Which verdicts of a report are scored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[default]
    Ensemble,
    Gam,
    Gat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub variant: String,
    pub metrics: MetricRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub format: String,
    pub level: Level,
    pub source: Source,
    pub variants: Vec<VariantRow>,
    pub average: MetricRow,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

fn pick<T: Copy>(source: Source, gam: T, gat: T, ensemble: T) -> T {
    match source {
        Source::Ensemble => ensemble,
        Source::Gam => gam,
        Source::Gat => gat,
    }
}

fn pair_up<'a>(reports: &'a [LocalizationReport], truths: &'a [AppTruth]) -> Result<Vec<(&'a LocalizationReport, &'a AppTruth)>> {
    let by_id: HashMap<&str, &AppTruth> = truths.iter().map(|t| (t.app_id.as_str(), t)).collect();
    let missing: Vec<&str> = reports
        .iter()
        .filter(|r| !by_id.contains_key(r.app_id.as_str()))
        .map(|r| r.app_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::usage(format!("no truth for reports: {}", missing.join(", "))));
    }
    Ok(reports.iter().map(|r| (r, by_id[r.app_id.as_str()])).collect())
}

/// Per-unit `(variant, prediction, truth)` triples for one level.
///
/// App level scores every app's detection verdict in a single `all`
/// variant. Class and method levels score the units of truly malicious apps
/// only, grouped by the app's variant.
fn units(pairs: &[(&LocalizationReport, &AppTruth)], level: Level, source: Source) -> Result<Vec<(String, Verdict, Verdict)>> {
    let mut out = Vec::new();
    for (r, t) in pairs {
        match level {
            Level::App => {
                let truth = match t.label {
                    Label::Malicious => Verdict::Malicious,
                    Label::Benign => Verdict::Benign,
                    Label::Unknown => {
                        return Err(Error::usage(format!("{}: app label unknown", t.app_id)));
                    }
                };
                let d = &r.detection;
                out.push(("all".to_owned(), pick(source, d.gam.verdict, d.gat.verdict, d.ensemble), truth));
            }
            Level::Method | Level::Class if t.label == Label::Malicious => {
                let variant = t.variant.clone().unwrap_or_else(|| "unspecified".to_owned());
                if level == Level::Method {
                    let bad: BTreeSet<&str> = t.malicious_methods.iter().map(String::as_str).collect();
                    for m in &r.methods {
                        let truth = Verdict::from_flag(bad.contains(m.signature().as_str()));
                        out.push((variant.clone(), pick(source, m.gam.verdict, m.gat.verdict, m.ensemble), truth));
                    }
                } else {
                    let bad: BTreeSet<&str> = t.malicious_classes.iter().map(String::as_str).collect();
                    for c in &r.classes {
                        let truth = Verdict::from_flag(bad.contains(c.class_name.as_str()));
                        out.push((variant.clone(), pick(source, c.gam.verdict, c.gat.verdict, c.ensemble), truth));
                    }
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Per-variant metric rows plus their macro average.
pub fn evaluate_corpus(
    reports: &[LocalizationReport],
    truths: &[AppTruth],
    level: Level,
    source: Source,
) -> Result<Evaluation> {
    let pairs = pair_up(reports, truths)?;
    let mut grouped: BTreeMap<String, (Vec<Verdict>, Vec<Verdict>)> = BTreeMap::new();
    for (variant, p, t) in units(&pairs, level, source)? {
        let e = grouped.entry(variant).or_default();
        e.0.push(p);
        e.1.push(t);
    }
    if grouped.is_empty() {
        return Err(Error::usage("nothing to evaluate at this level"));
    }
    let variants = grouped
        .into_iter()
        .map(|(variant, (p, t))| {
            Ok(VariantRow {
                variant,
                metrics: metrics(&score(&p, &t)?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<MetricRow> = variants.iter().map(|v| v.metrics.clone()).collect();
    Ok(Evaluation {
        format: EVAL_FORMAT.to_owned(),
        level,
        source,
        variants,
        average: macro_average(&rows)?,
        provenance: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub recall: f64,
    pub f1: f64,
    /// Units flagged malicious at this threshold.
    pub flagged: u64,
}

/// Re-thresholds every report at each threshold (method or class level)
/// and records the macro-average recall and F1.
pub fn sweep(
    reports: &[LocalizationReport],
    truths: &[AppTruth],
    level: Level,
    source: Source,
    thresholds: &[f64],
) -> Result<Vec<SweepPoint>> {
    if level == Level::App {
        return Err(Error::usage("threshold sweeps apply to class or method level"));
    }
    thresholds
        .iter()
        .map(|&t| {
            let rethresholded = reports
                .iter()
                .map(|r| {
                    let mut th: Thresholds = r.thresholds;
                    match level {
                        Level::Method => th.method = t,
                        _ => th.class = t,
                    }
                    r.rethreshold(th)
                })
                .collect::<Result<Vec<_>>>()?;
            let e = evaluate_corpus(&rethresholded, truths, level, source)?;
            Ok(SweepPoint {
                threshold: t,
                recall: e.average.recall,
                f1: e.average.f1,
                flagged: e.average.counts.tp + e.average.counts.fp,
            })
        })
        .collect()
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("threshold,recall,f1,flagged\n");
    for p in points {
        let _ = writeln!(s, "{:e},{},{},{}", p.threshold, p.recall, p.f1, p.flagged);
    }
    s
}

impl Evaluation {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Aligned-column table, one row per variant plus the average.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<22} {:>7} {:>7} {:>9} {:>9} {:>7} {:>9} {:>7}",
            "variant", "FPR", "FNR", "Accuracy", "Precision", "Recall", "F1-Score", "units"
        );
        let row = |s: &mut String, name: &str, m: &MetricRow| {
            let _ = writeln!(
                s,
                "{:<22} {:>7.4} {:>7.4} {:>9.4} {:>9.4} {:>7.4} {:>9.4} {:>7}",
                name,
                m.fpr,
                m.fnr,
                m.accuracy,
                m.precision,
                m.recall,
                m.f1,
                m.counts.total()
            );
        };
        for v in &self.variants {
            row(&mut s, &v.variant, &v.metrics);
        }
        row(&mut s, "average", &self.average);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Verdict::*;

    #[test]
    fn score_examples() {
        let c = score(&[Benign; 4], &[Benign; 4]).unwrap();
        assert_eq!((c.tp, c.tn), (0, 4));
        let c = score(&[Malicious, Benign], &[Benign, Malicious]).unwrap();
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (0, 0, 1, 1));
        assert!(score(&[Benign], &[]).is_err());
    }

    #[test]
    fn metrics_examples() {
        let m = metrics(&ConfusionCounts { tp: 2, fp: 1, tn: 7, fn_: 0 }).unwrap();
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.recall, 1.0);
        assert!((m.f1 - 0.8).abs() < 1e-15);
        assert!((m.accuracy - 0.9).abs() < 1e-15);
        assert_eq!(m.fpr, 0.125);
        assert_eq!(m.fnr, 0.0);
        assert!(m.undefined.is_empty());

        let m = metrics(&ConfusionCounts { tp: 3, fp: 0, tn: 2, fn_: 0 }).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));

        let m = metrics(&ConfusionCounts { tp: 0, fp: 0, tn: 1, fn_: 2 }).unwrap();
        assert_eq!((m.recall, m.f1), (0.0, 0.0));
        assert!(m.undefined.contains(&"f1".to_owned()) && m.undefined.contains(&"precision".to_owned()));

        assert!(metrics(&ConfusionCounts::default()).is_err());
    }

    #[test]
    fn macro_average_of_rows() {
        let a = metrics(&ConfusionCounts { tp: 1, fp: 0, tn: 1, fn_: 0 }).unwrap();
        let b = metrics(&ConfusionCounts { tp: 0, fp: 1, tn: 0, fn_: 1 }).unwrap();
        let avg = macro_average(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(avg.accuracy, (a.accuracy + b.accuracy) / 2.0);
        assert_eq!(avg.recall, 0.5);
        let same = macro_average(&[a.clone(), a.clone()]).unwrap();
        assert_eq!((same.accuracy, same.f1, same.fpr), (a.accuracy, a.f1, a.fpr));
    }

    fn brute_force(p: &[bool], t: &[bool]) -> [u64; 4] {
        let n = |pp: bool, tt: bool| p.iter().zip(t).filter(|(a, b)| **a == pp && **b == tt).count() as u64;
        [n(true, true), n(true, false), n(false, false), n(false, true)]
    }

    proptest! {
        #[test]
        fn score_matches_brute_force(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 0..60)) {
            let p: Vec<bool> = pairs.iter().map(|x| x.0).collect();
            let t: Vec<bool> = pairs.iter().map(|x| x.1).collect();
            let pv: Vec<Verdict> = p.iter().map(|&b| Verdict::from_flag(b)).collect();
            let tv: Vec<Verdict> = t.iter().map(|&b| Verdict::from_flag(b)).collect();
            let c = score(&pv, &tv).unwrap();
            prop_assert_eq!([c.tp, c.fp, c.tn, c.fn_], brute_force(&p, &t));
        }
    }
}

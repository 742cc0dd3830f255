//! Accuracy, macro-F1 and AvgRec (macro recall) over the three classes.
//!
//! Empty confusion rows give recall 0, empty columns precision 0, and F1 is
//! 0 when precision and recall are both 0.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, N_CLASSES};
use crate::{Error, Result};

/// `counts[gold][pred]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; N_CLASSES]; N_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..N_CLASSES).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion(gold: &[Label], pred: &[Label]) -> Result<ConfusionMatrix> {
    if gold.len() != pred.len() {
        return Err(Error::Shape(format!("{} gold labels but {} predictions", gold.len(), pred.len())));
    }
    if gold.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    let mut cm = ConfusionMatrix::default();
    for (g, p) in gold.iter().zip(pred) {
        cm.counts[g.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub avg_rec: f64,
    pub precision: [f64; N_CLASSES],
    pub recall: [f64; N_CLASSES],
    pub f1: [f64; N_CLASSES],
    pub confusion: ConfusionMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_category: Option<BTreeMap<String, MetricsReport>>,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("empty confusion matrix"));
    }
    let mut precision = [0.0; N_CLASSES];
    let mut recall = [0.0; N_CLASSES];
    let mut f1 = [0.0; N_CLASSES];
    for c in 0..N_CLASSES {
        let row: u64 = cm.counts[c].iter().sum();
        let col: u64 = (0..N_CLASSES).map(|g| cm.counts[g][c]).sum();
        precision[c] = ratio(cm.counts[c][c], col);
        recall[c] = ratio(cm.counts[c][c], row);
        let s = precision[c] + recall[c];
        f1[c] = if s == 0.0 { 0.0 } else { 2.0 * precision[c] * recall[c] / s };
    }
    let mean = |v: &[f64; N_CLASSES]| v.iter().sum::<f64>() / N_CLASSES as f64;
    Ok(MetricsReport {
        accuracy: ratio(cm.trace(), total),
        macro_f1: mean(&f1),
        avg_rec: mean(&recall),
        precision,
        recall,
        f1,
        confusion: *cm,
        per_category: None,
    })
}

/// Overall report; with `categories` (one per question) also one report per
/// category.
pub fn evaluate(gold: &[Label], pred: &[Label], categories: Option<&[String]>) -> Result<MetricsReport> {
    let mut report = metrics(&confusion(gold, pred)?)?;
    if let Some(cats) = categories {
        if cats.len() != gold.len() {
            return Err(Error::Shape(format!("{} categories for {} questions", cats.len(), gold.len())));
        }
        let mut groups: BTreeMap<&str, (Vec<Label>, Vec<Label>)> = BTreeMap::new();
        for ((g, p), c) in gold.iter().zip(pred).zip(cats) {
            let e = groups.entry(c.as_str()).or_default();
            e.0.push(*g);
            e.1.push(*p);
        }
        let mut per = BTreeMap::new();
        for (c, (g, p)) in groups {
            per.insert(c.to_string(), metrics(&confusion(&g, &p)?)?);
        }
        report.per_category = Some(per);
    }
    Ok(report)
}

impl MetricsReport {
    /// Human-readable summary: headline metrics, per-class scores,
    /// confusion matrix, then one line per category.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "accuracy  {:.4}", self.accuracy);
        let _ = writeln!(s, "macro_f1  {:.4}", self.macro_f1);
        let _ = writeln!(s, "avg_rec   {:.4}", self.avg_rec);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<12} {:>9} {:>9} {:>9}", "class", "precision", "recall", "f1");
        for l in Label::ALL {
            let c = l.index();
            let _ = writeln!(s, "{:<12} {:>9.4} {:>9.4} {:>9.4}", l.name(), self.precision[c], self.recall[c], self.f1[c]);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<12} {:>11} {:>11} {:>11}", "gold\\pred", "FACTUAL", "OPINION", "SOCIALIZING");
        for l in Label::ALL {
            let r = self.confusion.counts[l.index()];
            let _ = writeln!(s, "{:<12} {:>11} {:>11} {:>11}", l.name(), r[0], r[1], r[2]);
        }
        if let Some(per) = &self.per_category {
            let _ = writeln!(s);
            let _ = writeln!(s, "{:<32} {:>6} {:>9} {:>9} {:>9}", "category", "n", "accuracy", "macro_f1", "avg_rec");
            for (c, r) in per {
                let _ = writeln!(
                    s,
                    "{:<32} {:>6} {:>9.4} {:>9.4} {:>9.4}",
                    c,
                    r.confusion.total(),
                    r.accuracy,
                    r.macro_f1,
                    r.avg_rec
                );
            }
        }
        s
    }
}

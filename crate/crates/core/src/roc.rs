//! ROC curves and AUC with BSM as the positive class.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Samples with anomaly score `>= threshold` are flagged BSM.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Sweeps thresholds over the sorted unique anomaly scores (higher means more
/// anomalous). Equal scores flip together; AUC is the trapezoidal area.
pub fn roc_auc(anomaly_scores: &[f64], labels: &[Label]) -> Result<RocCurve> {
    if anomaly_scores.len() != labels.len() {
        return Err(Error::dim(labels.len(), anomaly_scores.len()));
    }
    if anomaly_scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numerical("NaN anomaly score".into()));
    }
    let pos = labels.iter().filter(|&&l| l == Label::Bsm).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Data("ROC needs both SM and BSM samples".into()));
    }

    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| anomaly_scores[b].total_cmp(&anomaly_scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut k = 0;
    while k < order.len() {
        let threshold = anomaly_scores[order[k]];
        while k < order.len() && anomaly_scores[order[k]] == threshold {
            match labels[order[k]] {
                Label::Bsm => tp += 1,
                Label::Sm => fp += 1,
            }
            k += 1;
        }
        let prev = *points.last().unwrap();
        let p = RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        };
        auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
        points.push(p);
    }
    Ok(RocCurve { points, auc })
}

impl RocCurve {
    /// `threshold,fpr,tpr` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "threshold,fpr,tpr")?;
        for p in &self.points {
            writeln!(w, "{:e},{:e},{:e}", p.threshold, p.fpr, p.tpr)?;
        }
        Ok(())
    }
}

/// Reads a `score,label` CSV of anomaly scores (higher is more anomalous).
pub fn read_scores_csv(path: &Path) -> Result<(Vec<f64>, Vec<Label>)> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(0, e.to_string()))?;
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing `{name}` column")))
    };
    let (sc, lc) = (col("score")?, col("label")?);
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        let field = rec.get(sc).unwrap_or("");
        let s: f64 = field
            .parse()
            .map_err(|_| parse_err(line, format!("non-numeric score {field:?}")))?;
        let l: Label = rec
            .get(lc)
            .unwrap_or("")
            .parse()
            .map_err(|e: Error| parse_err(line, e.to_string()))?;
        scores.push(s);
        labels.push(l);
    }
    Ok((scores, labels))
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

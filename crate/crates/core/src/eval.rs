//! Confusion matrix, per-class and support-weighted metrics, ROC and AUC.
//!
//! Orientation: rows are the actual class (no-risk, risk), columns the
//! predicted class, so the top-right cell is `fp` and bottom-left is `fn`.

use serde::{Deserialize, Serialize};

use crate::error::{CrlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    pub fn new(tn: u64, fp: u64, fn_: u64, tp: u64) -> Self {
        Self { tn, fp, fn_, tp }
    }

    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn actual_negatives(&self) -> u64 {
        self.tn + self.fp
    }

    pub fn actual_positives(&self) -> u64 {
        self.fn_ + self.tp
    }

    /// `[[tn, fp], [fn, tp]]`.
    pub fn as_rows(&self) -> [[u64; 2]; 2] {
        [[self.tn, self.fp], [self.fn_, self.tp]]
    }

    /// The same matrix with the roles of the two classes swapped.
    fn relabeled(&self) -> Self {
        Self {
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
            tp: self.tn,
        }
    }
}

fn check_binary(v: &[u8]) -> Result<()> {
    if v.iter().any(|&x| x > 1) {
        return Err(CrlError::NonBinaryLabels);
    }
    Ok(())
}

pub fn confusion_matrix(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(CrlError::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    check_binary(y_true)?;
    check_binary(y_pred)?;
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (0, 0) => cm.tn += 1,
            (0, _) => cm.fp += 1,
            (_, 0) => cm.fn_ += 1,
            _ => cm.tp += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    /// Index 0 treats no-risk as the positive class, index 1 risk.
    pub per_class: [ClassMetrics; 2],
    pub weighted: WeightedMetrics,
    /// Names of ratios that were 0/0 and reported as 0.
    pub zero_division: Vec<String>,
}

fn ratio(num: u64, den: u64, name: &str, flags: &mut Vec<String>) -> f64 {
    if den == 0 {
        flags.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_metrics(cm: &ConfusionMatrix, class: usize, flags: &mut Vec<String>) -> ClassMetrics {
    let precision = ratio(cm.tp, cm.tp + cm.fp, &format!("precision[{class}]"), flags);
    let recall = ratio(cm.tp, cm.tp + cm.fn_, &format!("recall[{class}]"), flags);
    let specificity = ratio(
        cm.tn,
        cm.tn + cm.fp,
        &format!("specificity[{class}]"),
        flags,
    );
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        flags.push(format!("f1[{class}]"));
        0.0
    };
    ClassMetrics {
        precision,
        recall,
        specificity,
        f1,
        support: cm.tp + cm.fn_,
    }
}

pub fn classification_metrics(cm: &ConfusionMatrix) -> Result<MetricSet> {
    let total = cm.total();
    if total == 0 {
        return Err(CrlError::EmptyMatrix);
    }
    let mut flags = Vec::new();
    let per_class = [
        class_metrics(&cm.relabeled(), 0, &mut flags),
        class_metrics(cm, 1, &mut flags),
    ];
    let w = |f: fn(&ClassMetrics) -> f64| -> f64 {
        per_class
            .iter()
            .map(|c| c.support as f64 * f(c))
            .sum::<f64>()
            / total as f64
    };
    let weighted = WeightedMetrics {
        precision: w(|c| c.precision),
        recall: w(|c| c.recall),
        specificity: w(|c| c.specificity),
        f1: w(|c| c.f1),
    };
    Ok(MetricSet {
        accuracy: (cm.tp + cm.tn) as f64 / total as f64,
        per_class,
        weighted,
        zero_division: flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores ≥ this are predicted positive at this point; `None` at the
    /// origin, where nothing is.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fpr,tpr,threshold\n");
        for p in &self.points {
            let t = p.threshold.map(|t| t.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{},{t}\n", p.fpr, p.tpr));
        }
        s
    }
}

/// Sweeps thresholds over the distinct scores from high to low; tied
/// scores move the curve in one step. AUC by the trapezoidal rule.
pub fn roc_curve(y_true: &[u8], scores: &[f64]) -> Result<RocCurve> {
    if y_true.len() != scores.len() {
        return Err(CrlError::LengthMismatch {
            left: y_true.len(),
            right: scores.len(),
        });
    }
    check_binary(y_true)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(CrlError::Config("scores contain NaN".into()));
    }
    let pos = y_true.iter().filter(|&&y| y == 1).count() as u64;
    let neg = y_true.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(CrlError::OneClassOnly);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: None,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if y_true[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: Some(s),
        });
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5)
        .sum::<f64>()
        .clamp(0.0, 1.0);
    Ok(RocCurve { points, auc })
}

/// `(TPR + TNR) / 2`: the trapezoidal AUC of hard {0,1} predictions.
pub fn hard_label_auc(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.actual_positives() == 0 || cm.actual_negatives() == 0 {
        return Err(CrlError::OneClassOnly);
    }
    let tpr = cm.tp as f64 / cm.actual_positives() as f64;
    let tnr = cm.tn as f64 / cm.actual_negatives() as f64;
    Ok(0.5 * (tpr + tnr))
}

/// `1 - SS_res / SS_tot`.
pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(CrlError::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.len() < 2 {
        return Err(CrlError::ZeroVariance);
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(CrlError::ZeroVariance);
    }
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RocMode {
    Scores,
    HardLabels,
}

/// Everything reported for one classifier on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion_matrix: ConfusionMatrix,
    pub metrics: MetricSet,
    /// Weighted recall, which is what the reference specificity column reports.
    pub reported_specificity: f64,
    pub roc_mode: RocMode,
    pub roc: RocCurve,
    pub auc_scores: f64,
    pub auc_hard_labels: f64,
    pub r2: Option<f64>,
}

/// Builds the report from labels, hard predictions and real scores. The ROC
/// curve uses the scores or the hard labels depending on `mode`.
pub fn evaluate(y_true: &[u8], y_pred: &[u8], scores: &[f64], mode: RocMode) -> Result<EvalReport> {
    let cm = confusion_matrix(y_true, y_pred)?;
    let metrics = classification_metrics(&cm)?;
    let score_roc = roc_curve(y_true, scores)?;
    let hard: Vec<f64> = y_pred.iter().map(|&p| f64::from(p)).collect();
    let hard_roc = roc_curve(y_true, &hard)?;
    let truth: Vec<f64> = y_true.iter().map(|&t| f64::from(t)).collect();
    let r2 = r2_score(&truth, &hard).ok();
    let auc_hard_labels = hard_label_auc(&cm)?;
    Ok(EvalReport {
        confusion_matrix: cm,
        reported_specificity: metrics.weighted.recall,
        metrics,
        roc_mode: mode,
        auc_scores: score_roc.auc,
        auc_hard_labels,
        roc: match mode {
            RocMode::Scores => score_roc,
            RocMode::HardLabels => hard_roc,
        },
        r2,
    })
}

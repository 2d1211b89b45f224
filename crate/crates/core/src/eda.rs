//! Exploratory statistics and correlation-driven feature selection.
//!
//! Missing values (`NaN`) are skipped pairwise everywhere in this module.
//! Moments are population moments; quartiles use linear interpolation
//! between order statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CrlError, Result};
use crate::preprocess::EncodedTable;

/// Number of equal-width bins on [0,1] used for the density peaks.
pub const HISTOGRAM_BINS: usize = 50;

/// Ratio of the smaller to the larger per-class mean above which a
/// feature counts as balanced.
pub const BALANCE_RATIO: f64 = 0.6;

/// Manual stage-2 drop applied when none is configured.
pub const DEFAULT_MANUAL_DROPS: &[&str] = &["person_income"];

pub const DEFAULT_THRESHOLD: f64 = 0.1;

/// Pearson r over the pairs where neither value is `NaN`.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(CrlError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let pairs = || x.iter().zip(y).filter(|(a, b)| !a.is_nan() && !b.is_nan());
    let n = pairs().count();
    if n < 2 {
        return Err(CrlError::DegenerateCorrelation);
    }
    // divide by the largest magnitude first so huge inputs cannot overflow
    let (ka, kb) = pairs().fold((0.0f64, 0.0f64), |(ka, kb), (a, b)| {
        (ka.max(a.abs()), kb.max(b.abs()))
    });
    if ka == 0.0 || kb == 0.0 || !ka.is_finite() || !kb.is_finite() {
        return Err(CrlError::DegenerateCorrelation);
    }
    let (sx, sy) = pairs().fold((0.0, 0.0), |(sx, sy), (a, b)| (sx + a / ka, sy + b / kb));
    let (mx, my) = (sx / n as f64, sy / n as f64);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in pairs() {
        let (da, db) = (a / ka - mx, b / kb - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CrlError::DegenerateCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson r of every feature column against the binary target, in column
/// order. Constant features report `None`.
pub fn correlation_with_target(table: &EncodedTable) -> Result<Vec<(String, Option<f64>)>> {
    let target: Vec<f64> = table.labels.iter().map(|&l| f64::from(l)).collect();
    table
        .names
        .iter()
        .zip(&table.columns)
        .map(|(name, col)| match pearson_correlation(col, &target) {
            Ok(r) => Ok((name.clone(), Some(r))),
            Err(CrlError::DegenerateCorrelation) => Ok((name.clone(), None)),
            Err(e) => Err(e),
        })
        .collect()
}

/// Square correlation matrix over all features plus the target (last).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (n, row) in self.names.iter().zip(&self.values) {
            out.push_str(n);
            for v in row {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&format!("{v:.6}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn correlation_matrix(table: &EncodedTable, target_name: &str) -> CorrelationMatrix {
    let mut names = table.names.clone();
    names.push(target_name.to_string());
    let target: Vec<f64> = table.labels.iter().map(|&l| f64::from(l)).collect();
    let mut cols: Vec<&[f64]> = table.columns.iter().map(Vec::as_slice).collect();
    cols.push(&target);
    let values = cols
        .par_iter()
        .map(|a| {
            cols.iter()
                .map(|b| pearson_correlation(a, b).ok())
                .collect()
        })
        .collect();
    CorrelationMatrix { names, values }
}

fn observed(x: &[f64]) -> Vec<f64> {
    x.iter().copied().filter(|v| !v.is_nan()).collect()
}

/// Population variance; `None` for an empty slice.
pub fn variance(x: &[f64]) -> Option<f64> {
    let v = observed(x);
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    Some(v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n)
}

/// Fisher–Pearson g1 = m3 / m2^(3/2). Positive means a longer right tail.
pub fn skewness(x: &[f64]) -> Result<f64> {
    let v = observed(x);
    if v.len() < 3 {
        return Err(CrlError::DegenerateDistribution);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let (m2, m3) = v.iter().fold((0.0, 0.0), |(m2, m3), a| {
        let d = a - mean;
        (m2 + d * d, m3 + d * d * d)
    });
    let (m2, m3) = (m2 / n, m3 / n);
    let scale = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if m2 <= (1e-12 * scale).powi(2) {
        return Err(CrlError::DegenerateDistribution);
    }
    Ok(m3 / m2.powf(1.5))
}

/// Quantile of already-sorted data by linear interpolation at `q·(n-1)`.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

pub fn quartiles(x: &[f64]) -> Option<Quartiles> {
    let mut v = observed(x);
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(Quartiles {
        q1: sorted_quantile(&v, 0.25),
        median: sorted_quantile(&v, 0.5),
        q3: sorted_quantile(&v, 0.75),
    })
}

/// Points strictly outside `[Q1 - 1.5·IQR, Q3 + 1.5·IQR]`.
pub fn outlier_count(x: &[f64]) -> usize {
    let Some(q) = quartiles(x) else { return 0 };
    let lo = q.q1 - 1.5 * q.iqr();
    let hi = q.q3 + 1.5 * q.iqr();
    x.iter()
        .filter(|v| !v.is_nan() && (**v < lo || **v > hi))
        .count()
}

/// Highest histogram density on [0,1] with `HISTOGRAM_BINS` bins, and the
/// midpoint of the bin where it occurs (lowest bin wins ties).
pub fn density_peak(x: &[f64]) -> Option<(f64, f64)> {
    let v = observed(x);
    if v.is_empty() {
        return None;
    }
    let width = 1.0 / HISTOGRAM_BINS as f64;
    let mut counts = [0usize; HISTOGRAM_BINS];
    for a in &v {
        let k = ((a.clamp(0.0, 1.0) / width).floor() as usize).min(HISTOGRAM_BINS - 1);
        counts[k] += 1;
    }
    let (k, c) = counts.iter().enumerate().fold(
        (0, 0),
        |best, (k, &c)| if c > best.1 { (k, c) } else { best },
    );
    let density = c as f64 / (v.len() as f64 * width);
    Some((density, (k as f64 + 0.5) * width))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceFlag {
    Balanced,
    Unbalanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub count: usize,
    /// Mean of the feature within the class (bar height).
    pub mean: f64,
    /// Interquartile range within the class.
    pub spread: f64,
    pub peak_density: f64,
    pub peak_location: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureProfile {
    pub name: String,
    pub correlation_with_target: Option<f64>,
    pub variance: f64,
    pub skewness: Option<f64>,
    pub quartiles: Quartiles,
    pub outlier_count: usize,
    pub balance_flag: BalanceFlag,
    /// Index 0 is the no-risk class, index 1 the risk class.
    pub per_class: [ClassStats; 2],
    pub histogram_bins: usize,
}

fn class_stats(values: &[f64]) -> ClassStats {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let (peak_density, peak_location) = density_peak(values).unwrap_or((0.0, 0.0));
    ClassStats {
        count: n,
        mean,
        spread: quartiles(values).map_or(0.0, |q| q.iqr()),
        peak_density,
        peak_location,
    }
}

/// Profiles one (normalized) feature column against binary labels.
pub fn profile_feature(name: &str, column: &[f64], labels: &[u8]) -> Result<FeatureProfile> {
    if column.len() != labels.len() {
        return Err(CrlError::LengthMismatch {
            left: column.len(),
            right: labels.len(),
        });
    }
    let mut by_class: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (&v, &l) in column.iter().zip(labels) {
        if l > 1 {
            return Err(CrlError::NonBinaryLabels);
        }
        if !v.is_nan() {
            by_class[l as usize].push(v);
        }
    }
    for (class, values) in by_class.iter().enumerate() {
        if values.is_empty() {
            return Err(CrlError::EmptyClass(class as u8));
        }
    }
    let target: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let correlation_with_target = pearson_correlation(column, &target).ok();
    let per_class = [class_stats(&by_class[0]), class_stats(&by_class[1])];

    let (small, large) = {
        let (a, b) = (per_class[0].mean.abs(), per_class[1].mean.abs());
        (a.min(b), a.max(b))
    };
    let balance_flag = if large == 0.0 || small / large > BALANCE_RATIO {
        BalanceFlag::Balanced
    } else {
        BalanceFlag::Unbalanced
    };

    Ok(FeatureProfile {
        name: name.to_string(),
        correlation_with_target,
        variance: variance(column).unwrap_or(0.0),
        skewness: skewness(column).ok(),
        quartiles: quartiles(column).ok_or(CrlError::DegenerateDistribution)?,
        outlier_count: outlier_count(column),
        balance_flag,
        per_class,
        histogram_bins: HISTOGRAM_BINS,
    })
}

/// Input to feature selection: a feature's target correlation and whether
/// its profile looks degenerate (zero variance and zero per-class spread).
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub name: String,
    pub correlation: Option<f64>,
    pub degenerate: bool,
}

impl From<&FeatureProfile> for Candidate {
    fn from(p: &FeatureProfile) -> Self {
        Candidate {
            name: p.name.clone(),
            correlation: p.correlation_with_target,
            degenerate: p.variance == 0.0 && p.per_class.iter().all(|c| c.spread == 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFeature {
    pub name: String,
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedFeature {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub threshold: f64,
    pub stage1_included: Vec<ScoredFeature>,
    pub stage1_dropped: Vec<ScoredFeature>,
    pub stage2_dropped: Vec<DroppedFeature>,
    /// Kept features whose profile has zero variance and zero spread.
    pub degenerate: Vec<String>,
    pub final_features: Vec<String>,
}

/// Stage 1 keeps `|r| >= threshold`; stage 2 removes the manual drops.
pub fn select_features(
    candidates: &[Candidate],
    threshold: f64,
    manual_drops: &[String],
) -> Result<SelectionReport> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(CrlError::Config(format!(
            "selection threshold must be positive, got {threshold}"
        )));
    }
    let mut report = SelectionReport {
        threshold,
        stage1_included: Vec::new(),
        stage1_dropped: Vec::new(),
        stage2_dropped: Vec::new(),
        degenerate: Vec::new(),
        final_features: Vec::new(),
    };
    for c in candidates {
        let scored = ScoredFeature {
            name: c.name.clone(),
            correlation: c.correlation,
        };
        match c.correlation {
            Some(r) if r.abs() >= threshold => report.stage1_included.push(scored),
            _ => report.stage1_dropped.push(scored),
        }
    }
    for drop in manual_drops {
        if !candidates.iter().any(|c| &c.name == drop) {
            log::warn!("manual drop `{drop}` is not a candidate feature");
        }
    }
    for kept in &report.stage1_included {
        if manual_drops.contains(&kept.name) {
            report.stage2_dropped.push(DroppedFeature {
                name: kept.name.clone(),
                reason: "manual drop".to_string(),
            });
            continue;
        }
        if candidates
            .iter()
            .any(|c| c.name == kept.name && c.degenerate)
        {
            report.degenerate.push(kept.name.clone());
        }
        report.final_features.push(kept.name.clone());
    }
    Ok(report)
}

/// Min-max scales every column over its observed values (`NaN` kept).
pub fn normalize_columns(table: &EncodedTable) -> EncodedTable {
    let mut out = table.clone();
    for col in &mut out.columns {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in col.iter().filter(|v| !v.is_nan()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        for v in col.iter_mut().filter(|v| !v.is_nan()) {
            *v = crate::preprocess::scale_value(*v, lo, hi);
        }
    }
    out
}

/// Full EDA output for one encoded table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaReport {
    pub correlations: Vec<ScoredFeature>,
    pub profiles: Vec<FeatureProfile>,
    pub selection: SelectionReport,
}

/// Correlations on the encoded (unscaled) table, profiles on its min-max
/// scaled copy, then selection.
pub fn run_eda(table: &EncodedTable, threshold: f64, manual_drops: &[String]) -> Result<EdaReport> {
    let correlations: Vec<ScoredFeature> = correlation_with_target(table)?
        .into_iter()
        .map(|(name, correlation)| ScoredFeature { name, correlation })
        .collect();
    let scaled = normalize_columns(table);
    let profiles = scaled
        .names
        .par_iter()
        .zip(scaled.columns.par_iter())
        .map(|(name, col)| profile_feature(name, col, &scaled.labels))
        .collect::<Result<Vec<_>>>()?;
    let candidates: Vec<Candidate> = profiles
        .iter()
        .zip(&correlations)
        .map(|(p, c)| Candidate {
            correlation: c.correlation,
            ..Candidate::from(p)
        })
        .collect();
    let selection = select_features(&candidates, threshold, manual_drops)?;
    Ok(EdaReport {
        correlations,
        profiles,
        selection,
    })
}
